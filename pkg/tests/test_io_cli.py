import csv
import json
import subprocess
import sys
from fractions import Fraction as F

import pytest
from hypothesis import given

from conftest import max_affines
from tropma import io
from tropma._exact import InvalidInput
from tropma.abelian import Cocycle, PolarizedTropAV, random_ptav, tropical_theta
from tropma.cli import main
from tropma.convex import MaxAffine
from tropma.monge_ampere import DiscreteMeasure
from tropma.polytope import box

SQUARE_TRI = MaxAffine.of([((0, 0), 0), ((1, 0), 0), ((0, 1), 0), ((1, 1), F(-1, 2))])


def dump(tmp_path, name, obj) -> str:
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr().out
    return code, out


# ------------------------------------------------------------------ codecs

def test_rational_strings():
    assert io.q(F(-3, 4)) == "-3/4" and io.q(F(2)) == "2"
    assert io.parse_q("-3/4") == F(-3, 4) and io.parse_q(5) == 5 and io.parse_q("0.25") == F(1, 4)
    with pytest.raises(InvalidInput):
        io.parse_q("one")
    assert io.parse_point("1/2,0") == (F(1, 2), F(0))


@given(max_affines(max_pieces=5))
def test_maxaffine_round_trip(f):
    assert io.maxaffine_from_json(json.loads(json.dumps(io.maxaffine_to_json(f)))) == f


def test_other_round_trips():
    body = box([0, F(-1, 3)], [2, 1])
    assert io.polytope_from_json(io.polytope_to_json(body)) == body
    hs_only = {"dim": 2, "halfspaces": io.polytope_to_json(body)["halfspaces"]}
    assert io.polytope_from_json(hs_only) == body
    mu = DiscreteMeasure.of(2, [((0, F(1, 2)), F(2, 3)), ((1, 1), 1)])
    assert io.measure_from_json(io.measure_to_json(mu)) == mu
    p = random_ptav(2, 2, seed=4)
    assert io.ptav_from_json(io.ptav_to_json(p)) == p
    th = tropical_theta(Cocycle.of(p))
    back = io.periodic_from_json(io.periodic_to_json(th))
    assert back.base_pieces == th.base_pieces and back.cocycle.ptav == p
    assert io.function_from_json(io.periodic_to_json(th)).base_pieces == th.base_pieces


def test_missing_field_is_invalid():
    with pytest.raises(InvalidInput):
        io.maxaffine_from_json({"dim": 1})
    with pytest.raises(InvalidInput):
        io.context_from_json({"g": 2, "n": 1})


# ------------------------------------------------------------------ CLI

def test_cli_ma_and_csv(tmp_path, capsys):
    f = dump(tmp_path, "f.json", io.maxaffine_to_json(SQUARE_TRI))
    code, out = run(capsys, "ma", "--f", f)
    assert code == 0
    mu = io.measure_from_json(json.loads(out))
    assert mu.total == 2
    code, out = run(capsys, "ma", "--f", f, "--format", "csv")
    rows = list(csv.reader(out.splitlines()))
    assert code == 0 and sum(F(r[-1]) for r in rows) == 2


def test_cli_output_file(tmp_path, capsys):
    f = dump(tmp_path, "f.json", io.maxaffine_to_json(SQUARE_TRI))
    target = tmp_path / "out.json"
    assert run(capsys, "legendre", "--f", f, "-o", target)[0] == 0
    obj = json.loads(target.read_text())
    assert io.polytope_from_json(obj["domain"]) == box([0, 0], [1, 1])


def test_cli_mixed_and_psh(tmp_path, capsys):
    f1 = dump(tmp_path, "a.json", io.maxaffine_to_json(MaxAffine.of([((0, 0), 0), ((1, 0), 0)])))
    f2 = dump(tmp_path, "b.json", io.maxaffine_to_json(MaxAffine.of([((0, 0), 0), ((0, 1), 0)])))
    code, out = run(capsys, "mixed-ma", "--f", f1, f2)
    assert code == 0 and io.measure_from_json(json.loads(out)).total == 1
    fan = dump(tmp_path, "fan.json", {"dim": 1, "cones": [{"rays": [[1]]}, {"rays": [[-1]]}]})
    g = dump(tmp_path, "g.json", io.maxaffine_to_json(MaxAffine.of([((1,), 0), ((-1,), 0)])))
    code, out = run(capsys, "check-psh", "--f", g, "--fan", fan)
    assert code == 0 and json.loads(out) == {"psh": False}
    green = dump(tmp_path, "green.json", {"psi": [{"cone": 0, "slope": ["0"]},
                                                   {"cone": 1, "slope": ["1"]}]})
    zero_plus_g0 = dump(tmp_path, "h.json",
                        io.maxaffine_to_json(MaxAffine.of([((0,), 0), ((-1,), 0)])))
    code, out = run(capsys, "check-psh", "--f", zero_plus_g0, "--fan", fan, "--green", green)
    assert code == 0 and json.loads(out) == {"theta_psh": True}


def test_cli_sbp(tmp_path, capsys):
    body = dump(tmp_path, "body.json", io.polytope_to_json(box([0, 0], [1, 1])))
    mu = dump(tmp_path, "mu.json",
              io.measure_to_json(DiscreteMeasure.of(2, [((0, 0), 1), ((1, F(1, 2)), 1)])))
    code, out = run(capsys, "sbp", "--body", body, "--measure", mu)
    obj = json.loads(out)
    assert code == 0 and obj["report"]["ok"] and obj["max_residual"] <= 1e-9
    bad = dump(tmp_path, "bad.json", io.measure_to_json(DiscreteMeasure.of(2, [((0, 0), 1)])))
    assert run(capsys, "sbp", "--body", body, "--measure", bad)[0] == 2
    assert run(capsys, "sbp", "--body", body, "--measure", bad, "--rescale")[0] == 0


def test_cli_torus_and_mumford(tmp_path, capsys):
    p = dump(tmp_path, "p.json", io.ptav_to_json(PolarizedTropAV.of([[1]], [[1]])))
    mu = dump(tmp_path, "mu.json", io.measure_to_json(DiscreteMeasure.of(1, [((F(1, 2),), 1)])))
    code, out = run(capsys, "torus-ma", "--ptav", p, "--measure", mu)
    obj = json.loads(out)
    assert code == 0 and obj["max_residual"] <= 1e-9
    th = dump(tmp_path, "th.json", obj["f"])
    ctx = dump(tmp_path, "ctx.json", {"g": 2, "n": 1, "deg_H_B": 1, "d": 1})
    code, out = run(capsys, "mumford-degree", "--ctx", ctx, "--f", th)
    obj = json.loads(out)
    assert code == 0 and obj["equal"] and obj["total"] == "2"
    code, out = run(capsys, "mumford-degree", "--ctx", ctx, "--f", th, "--vertex", "1/2")
    assert code == 0 and json.loads(out)["degree"] == "2" and json.loads(out)["nef"]


def test_cli_example_p1(capsys):
    code, out = run(capsys, "example-p1", "--alpha", "1/4", "--m", "100")
    obj = json.loads(out)
    assert code == 0 and obj["error"] <= 0.05 and obj["alpha"] == "1/4"


def test_cli_oracles(tmp_path, capsys):
    f = dump(tmp_path, "f.json", io.maxaffine_to_json(MaxAffine.of([((0,), 0), ((1,), 0)])))
    code, out = run(capsys, "oracle", "mc", "--f", f, "--lo=-1e-9", "--hi", "1e-9",
                    "--samples", "500")
    assert code == 0 and json.loads(out)["estimate"] == pytest.approx(1.0)
    code, out = run(capsys, "oracle", "fd", "--expr", "0.5*(u[0]**2+4*u[1]**2)", "--point", "1,2")
    assert code == 0 and json.loads(out)["ma_density"] == pytest.approx(8, abs=1e-6)
    assert run(capsys, "oracle", "fd", "--expr", "__import__('os')", "--point", "0")[0] == 2
    assert run(capsys, "oracle", "mc", "--lo", "0", "--hi", "1")[0] == 2
    assert run(capsys, "oracle", "fd", "--expr", "u[[", "--point", "0")[0] == 2


def test_cli_exit_codes(tmp_path, capsys):
    assert run(capsys, "ma", "--f", tmp_path / "missing.json")[0] == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(capsys, "ma", "--f", bad)[0] == 2
    assert run(capsys, "no-such-command")[0] == 2
    assert run(capsys, "--help")[0] == 0
    body = dump(tmp_path, "body.json", io.polytope_to_json(box([0, 0], [1, 1])))
    atoms = [((F(i, 7), F(j, 5)), F(2, 20)) for i in range(4) for j in range(5)]
    mu = dump(tmp_path, "mu.json", io.measure_to_json(DiscreteMeasure.of(2, atoms)))
    assert run(capsys, "sbp", "--body", body, "--measure", mu, "--max-iter", "1")[0] == 3


def test_entry_point_subprocess(tmp_path):
    f = dump(tmp_path, "f.json", io.maxaffine_to_json(SQUARE_TRI))
    res = subprocess.run([sys.executable, "-m", "tropma.cli", "ma", "--f", f],
                         capture_output=True, text=True)
    assert res.returncode == 0 and json.loads(res.stdout)["dim"] == 2
