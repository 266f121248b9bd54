"""JSON encoding of the library's values; rationals travel as "p/q" strings."""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path
from typing import Any

from ._exact import InvalidInput, to_fraction, vec
from .abelian import Cocycle, PeriodicPL, PolarizedTropAV
from .convex import MaxAffine
from .monge_ampere import DiscreteMeasure
from .mumford import MumfordContext
from .polytope import Polytope
from .toric import Fan, GreenData, canonical_green


def q(x) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def parse_q(s) -> Fraction:
    if isinstance(s, bool):
        raise InvalidInput("booleans are not numbers")
    if isinstance(s, str):
        try:
            return Fraction(s.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise InvalidInput(f"not a rational: {s!r}") from exc
    return to_fraction(s)


def qvec(v) -> list[str]:
    return [q(x) for x in v]


def parse_vec(v) -> tuple[Fraction, ...]:
    if not isinstance(v, (list, tuple)):
        raise InvalidInput(f"expected a list of rationals, got {v!r}")
    return tuple(parse_q(x) for x in v)


def _get(obj: dict, key: str):
    if not isinstance(obj, dict) or key not in obj:
        raise InvalidInput(f"missing field {key!r}")
    return obj[key]


# --- MaxAffine / Polytope / measures ---------------------------------------------

def maxaffine_to_json(f: MaxAffine) -> dict:
    return {"dim": f.dim, "pieces": [{"slope": qvec(m), "offset": q(c)} for m, c in f.pieces]}


def maxaffine_from_json(obj: dict) -> MaxAffine:
    pieces = [(parse_vec(_get(p, "slope")), parse_q(_get(p, "offset")))
              for p in _get(obj, "pieces")]
    return MaxAffine.of(pieces, int(obj.get("dim", len(pieces[0][0]) if pieces else 0)))


def polytope_to_json(p: Polytope) -> dict:
    return {"dim": p.dim, "vertices": [qvec(v) for v in p.vertices],
            "halfspaces": [{"normal": qvec(a), "offset": q(b)} for a, b in p.halfspaces]}


def polytope_from_json(obj: dict) -> Polytope:
    if "vertices" in obj:
        verts = [parse_vec(v) for v in obj["vertices"]]
        if not verts:
            raise InvalidInput("a polytope needs at least one vertex")
        return Polytope.from_points(verts, int(obj.get("dim", len(verts[0]))))
    hs = [(parse_vec(_get(h, "normal")), parse_q(_get(h, "offset")))
          for h in _get(obj, "halfspaces")]
    if not hs:
        raise InvalidInput("a polytope needs halfspaces or vertices")
    return Polytope.from_halfspaces(hs, int(obj.get("dim", len(hs[0][0]))))


def measure_to_json(mu: DiscreteMeasure) -> dict:
    return {"dim": mu.dim, "atoms": [{"point": qvec(p), "mass": q(m)} for p, m in mu.atoms]}


def measure_from_json(obj: dict) -> DiscreteMeasure:
    atoms = [(parse_vec(_get(a, "point")), parse_q(_get(a, "mass"))) for a in _get(obj, "atoms")]
    dim = int(obj.get("dim", len(atoms[0][0]) if atoms else 0))
    return DiscreteMeasure.of(dim, atoms)


# --- fans ---------------------------------------------------------------------------

def fan_from_json(obj: dict) -> Fan:
    cones = [[tuple(int(parse_q(x)) for x in r) for r in _get(c, "rays")]
             for c in _get(obj, "cones")]
    return Fan.of(int(_get(obj, "dim")), cones)


def fan_to_json(fan: Fan) -> dict:
    return {"dim": fan.dim, "cones": [{"rays": [list(r) for r in c]} for c in fan.declared]}


def green_from_json(obj: dict, fan: Fan) -> GreenData:
    slopes = {}
    for entry in _get(obj, "psi"):
        idx = int(_get(entry, "cone"))
        if not 0 <= idx < len(fan.declared):
            raise InvalidInput(f"cone index {idx} out of range")
        slopes[fan.declared[idx]] = tuple(int(parse_q(x)) for x in _get(entry, "slope"))
    data = canonical_green(fan, slopes)
    if "green" in obj:
        data = GreenData(fan, data.psi, maxaffine_from_json(obj["green"]))
    return data


# --- abelian --------------------------------------------------------------------------

def ptav_to_json(p: PolarizedTropAV) -> dict:
    return {"n": p.n, "lambda_basis": [qvec(r) for r in p.lambda_basis],
            "polarization": [list(r) for r in p.polarization]}


def ptav_from_json(obj: dict) -> PolarizedTropAV:
    p = PolarizedTropAV.of([parse_vec(r) for r in _get(obj, "lambda_basis")],
                           _get(obj, "polarization"))
    if "n" in obj and int(obj["n"]) != p.n:
        raise InvalidInput("n does not match lambda_basis")
    return p


def periodic_to_json(f: PeriodicPL) -> dict:
    return {"ptav": ptav_to_json(f.cocycle.ptav),
            "base_pieces": [{"slope": qvec(m), "offset": q(c)} for m, c in f.base_pieces],
            "radius": f.radius}


def periodic_from_json(obj: dict) -> PeriodicPL:
    z = Cocycle.of(ptav_from_json(_get(obj, "ptav")))
    pieces = [(parse_vec(_get(p, "slope")), parse_q(_get(p, "offset")))
              for p in _get(obj, "base_pieces")]
    return PeriodicPL.of(z, pieces)


def context_from_json(obj: dict) -> MumfordContext:
    return MumfordContext(int(_get(obj, "g")), int(_get(obj, "n")), int(_get(obj, "deg_H_B")),
                          int(_get(obj, "d")))


# --- files ----------------------------------------------------------------------------

def load(path: str | Path) -> Any:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise InvalidInput(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidInput(f"{path} is not valid JSON: {exc}") from exc


def function_from_json(obj: dict) -> MaxAffine | PeriodicPL:
    return periodic_from_json(obj) if "ptav" in obj else maxaffine_from_json(obj)


def parse_point(text: str) -> tuple[Fraction, ...]:
    """Comma-separated rationals, e.g. "1/2,0"."""
    return vec(parse_q(x) for x in text.split(",") if x.strip())
