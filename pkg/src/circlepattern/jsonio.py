"""JSON bundles exchanged between CLI subcommands.

A bundle is a JSON object::

    {
      "version": 1,
      "mesh": {"genus": g, "faces": [[i, j, k], ...], "deck_labels": {...}},
      "cr": {"<edge>": [re, im], ...},            optional
      "theta": {"<edge>": angle, ...},            optional
      "positions": [[v, m, n, re, im], ...],      optional
      "face_lifts": [[f, m, n], ...],             optional
      "q": [[re, im], ...]                        optional
    }

Further keys (holonomy, modulus, basis, ...) are carried along untouched.
Nonfinite coordinates are written as the strings ``"inf"``/``"-inf"``.
"""

from __future__ import annotations

import dataclasses
import json

import numpy as np

from circlepattern.crsys import AngleStructure, CrossRatioSystem
from circlepattern.develop import DevelopingMap
from circlepattern.surface import TriangulatedSurface, lift_patch, trivial_patch

VERSION = 1


class BundleError(ValueError):
    pass


def make_bundle(surface: TriangulatedSurface, cr=None, theta=None, dev=None, q=None, **extra) -> dict:
    out = {"version": VERSION, "mesh": surface.to_json_dict()}
    if cr is not None:
        out.update(cr.to_json_dict())
    if theta is not None:
        out.update(theta.to_json_dict())
    if dev is not None:
        out.update(dev.to_json_dict())
        out["face_lifts"] = [[int(f), int(a[0]), int(a[1])] for f, a in dev.patch.face_lifts]
    if q is not None:
        out["q"] = [[float(z.real), float(z.imag)] for z in np.asarray(q, dtype=complex)]
    out.update(extra)
    return out


def dumps(bundle: dict) -> str:
    return json.dumps(bundle, indent=1, sort_keys=True) + "\n"


def loads(text: str) -> dict:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise BundleError(f"malformed JSON: {exc}") from exc
    if not isinstance(d, dict) or "mesh" not in d:
        raise BundleError("bundle has no mesh")
    if d.get("version", VERSION) != VERSION:
        raise BundleError(f"unsupported bundle version {d.get('version')!r}")
    return d


def read_surface(d: dict) -> TriangulatedSurface:
    return TriangulatedSurface.from_json_dict(d["mesh"])


def read_cr(d: dict, surface) -> CrossRatioSystem | None:
    return CrossRatioSystem.from_json_dict(surface, d) if "cr" in d else None


def read_theta(d: dict, surface) -> AngleStructure | None:
    return AngleStructure.from_json_dict(surface, d) if "theta" in d else None


def read_q(d: dict) -> np.ndarray | None:
    if "q" not in d:
        return None
    return np.array([complex(re, im) for re, im in d["q"]])


def read_dev(d: dict, surface) -> DevelopingMap | None:
    if "positions" not in d:
        return None
    table = {}
    for v, m, n, re, im in d["positions"]:
        table[(int(v), (int(m), int(n)))] = complex(float(re), float(im))
    if surface.genus == 1:
        base = lift_patch(surface)
    else:
        base = trivial_patch(surface)
    if "face_lifts" in d:
        lifts = tuple((int(f), (int(m), int(n))) for f, m, n in d["face_lifts"])
    else:
        lifts = base.face_lifts
    words = tuple(sorted({w for _, w in lifts}))
    verts = tuple(sorted(table))
    patch = dataclasses.replace(base, words=words, lifted_vertices=verts, face_lifts=lifts, _corner_cache={})
    return DevelopingMap.from_positions(surface, table, patch)
