"""Scenario configuration files (TOML).

A scenario describes the domain and its fractures (or an imported mesh),
the physical parameters of every object, the flow scheme with its boundary
conditions, an optional tracer transport run and where to write results.
See ``docs/config.md`` for the full schema.
"""
from __future__ import annotations

import logging
import re
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from mdflow.errors import ParseError, ValidationError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

logger = logging.getLogger(__name__)

SCHEMES = ("tpfa", "vem")
SIDES = ("xmin", "xmax", "ymin", "ymax", "zmin", "zmax")
OBJECT_KEYS = ("permeability", "aperture", "normal_permeability", "kappa", "source")


@dataclass
class FractureSpec:
    id: str
    min: Tuple[float, ...]
    max: Tuple[float, ...]
    params: Dict[str, float] = field(default_factory=dict)


@dataclass
class TransportSpec:
    enabled: bool = False
    dt: float = 0.01
    t_end: float = 1.0
    inflow_concentration: float = 1.0
    inflow_sides: Tuple[str, ...] = ()
    porosity: float = 1.0
    initial: float = 0.0


@dataclass
class OutputSpec:
    directory: Path = Path("output")
    every: int = 0
    vtk: bool = True
    reference: Optional[Path] = None


@dataclass
class ScenarioConfig:
    """Validated scenario with all defaults filled in.

    ``boundary`` maps box sides to ``(kind, value)`` with kind
    ``"dirichlet"`` (pressure) or ``"neumann"`` (outward flux per unit
    area); unlisted sides are impermeable. ``objects`` maps grid names
    (fracture ids, intersection names such as ``"F1&F4"``, or names of
    imported grids) to parameter overrides.
    """

    ambient_dim: int
    domain_min: Optional[Tuple[float, ...]]
    domain_max: Optional[Tuple[float, ...]]
    cells: Optional[Tuple[int, ...]]
    mesh: Optional[Path]
    fractures: List[FractureSpec]
    matrix: Dict[str, float]
    objects: Dict[str, Dict[str, float]]
    fracture_defaults: Dict[str, float]
    scheme: str
    boundary: Dict[str, Tuple[str, float]]
    transport: TransportSpec
    output: OutputSpec
    source: Optional[Path] = None

    def object_parameters(self) -> Dict[str, Dict[str, float]]:
        """Per-object parameters: fracture entries first, explicit objects win."""
        out = {f.id: dict(f.params) for f in self.fractures}
        for name, p in self.objects.items():
            out.setdefault(name, {}).update(p)
        return out


def _line_of(message: str) -> Optional[int]:
    m = re.search(r"line (\d+)", message)
    return int(m.group(1)) if m else None


def _field_line(text: str, key: str) -> Optional[int]:
    """Best-effort line number of the first ``key = ...`` or ``[key]`` in ``text``."""
    leaf = key.split(".")[-1].split("[")[0]
    pat = re.compile(rf"^\s*(\[+\s*{re.escape(leaf)}\s*\]+|{re.escape(leaf)}\s*=)")
    for i, line in enumerate(text.splitlines(), start=1):
        if pat.match(line):
            return i
    return None


class _Checker:
    """Typed accessors that report the offending field and line."""

    def __init__(self, text: str, path: str) -> None:
        self.text = text
        self.path = path

    def fail(self, key: str, msg: str) -> None:
        line = _field_line(self.text, key)
        where = f"{self.path}:{line}" if line else self.path
        raise ValidationError(f"{where}: {key}: {msg}")

    def table(self, parent: Dict[str, Any], name: str, key: str, required=False) -> Dict[str, Any]:
        val = parent.get(name)
        if val is None:
            if required:
                self.fail(key, "missing section")
            return {}
        if not isinstance(val, dict):
            self.fail(key, "expected a table")
        return val

    def number(self, tbl, name, key, default=None, positive=False, nonneg=False) -> float:
        val = tbl.get(name, default)
        if val is None:
            self.fail(key, "missing value")
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            self.fail(key, f"expected a number, got {val!r}")
        val = float(val)
        if positive and not val > 0:
            self.fail(key, "must be positive")
        if nonneg and val < 0:
            self.fail(key, "must be non-negative")
        return val

    def vector(self, tbl, name, key, length, integer=False) -> Tuple:
        val = tbl.get(name)
        if not isinstance(val, list) or len(val) != length:
            self.fail(key, f"expected a list of {length} numbers")
        kind = (int,) if integer else (int, float)
        if any(isinstance(v, bool) or not isinstance(v, kind) for v in val):
            self.fail(key, f"expected {'integers' if integer else 'numbers'}")
        return tuple(int(v) for v in val) if integer else tuple(float(v) for v in val)

    def unknown(self, tbl: Dict[str, Any], allowed, key: str) -> None:
        extra = sorted(set(tbl) - set(allowed))
        if extra:
            self.fail(f"{key}.{extra[0]}" if key else extra[0], "unknown field")

    def params(self, tbl, key, allowed=OBJECT_KEYS) -> Dict[str, float]:
        out = {}
        for name in allowed:
            if name in tbl:
                out[name] = self.number(tbl, name, f"{key}.{name}",
                                        positive=name != "source" and name != "kappa",
                                        nonneg=name == "kappa")
        return out


def parse_config(path) -> ScenarioConfig:
    """Read and validate a scenario file.

    Relative paths inside the file (mesh, output directory, reference) are
    resolved against the directory of the file.

    Raises
    ------
    ParseError
        The file is missing or is not valid TOML.
    ValidationError
        A field is missing, has the wrong type or is inconsistent.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"{path}: cannot read configuration ({exc.strerror})") from None
    cfg = parse_config_string(text, base=path.parent, name=str(path))
    cfg.source = path.resolve()
    return cfg


def parse_config_string(text: str, base=Path("."), name: str = "<string>") -> ScenarioConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        line = _line_of(str(exc))
        where = f"{name}:{line}" if line else name
        raise ParseError(f"{where}: {exc}") from None
    return _validate(raw, _Checker(text, name), Path(base))


def _validate(raw: Dict[str, Any], chk: _Checker, base: Path) -> ScenarioConfig:
    chk.unknown(raw, ("domain", "fractures", "matrix", "objects", "fracture_defaults", "flow",
                      "transport", "output"), "")

    dom = chk.table(raw, "domain", "domain", required=True)
    chk.unknown(dom, ("dim", "min", "max", "cells", "mesh"), "domain")
    dim = dom.get("dim")
    if isinstance(dim, bool) or dim not in (2, 3):
        chk.fail("domain.dim", "must be 2 or 3")
    dim = int(dim)
    mesh = dom.get("mesh")
    fr_raw = raw.get("fractures")
    if mesh is not None and fr_raw is not None:
        chk.fail("domain.mesh", "give either a fracture list or a mesh file, not both")
    lo = hi = cells = None
    if "min" in dom or "max" in dom or mesh is None:
        lo = chk.vector(dom, "min", "domain.min", dim)
        hi = chk.vector(dom, "max", "domain.max", dim)
        if any(b <= a for a, b in zip(lo, hi)):
            chk.fail("domain.max", "must exceed domain.min on every axis")
    if mesh is not None:
        if not isinstance(mesh, str):
            chk.fail("domain.mesh", "expected a file path")
        mesh = (base / mesh).resolve()
        if "cells" in dom:
            chk.fail("domain.cells", "not used with an imported mesh")
    else:
        cells = chk.vector(dom, "cells", "domain.cells", dim, integer=True)
        if min(cells) < 1:
            chk.fail("domain.cells", "need at least one cell per axis")

    fractures: List[FractureSpec] = []
    if fr_raw is not None:
        if not isinstance(fr_raw, list):
            chk.fail("fractures", "expected an array of tables [[fractures]]")
        seen = set()
        for i, f in enumerate(fr_raw):
            key = f"fractures[{i}]"
            if not isinstance(f, dict):
                chk.fail(key, "expected a table")
            chk.unknown(f, ("id", "min", "max") + OBJECT_KEYS, key)
            fid = f.get("id", f"F{i + 1}")
            if not isinstance(fid, str) or not fid:
                chk.fail(f"{key}.id", "expected a non-empty string")
            if fid in seen:
                chk.fail(f"{key}.id", f"duplicate fracture id {fid!r}")
            seen.add(fid)
            fractures.append(FractureSpec(
                fid,
                chk.vector(f, "min", f"{key}.min", dim),
                chk.vector(f, "max", f"{key}.max", dim),
                chk.params(f, key),
            ))

    mat = chk.table(raw, "matrix", "matrix")
    chk.unknown(mat, ("permeability", "source"), "matrix")
    matrix = {"permeability": 1.0, "aperture": 1.0}
    matrix.update(chk.params(mat, "matrix", ("permeability", "source")))

    fdef = chk.table(raw, "fracture_defaults", "fracture_defaults")
    chk.unknown(fdef, OBJECT_KEYS, "fracture_defaults")
    fracture_defaults = chk.params(fdef, "fracture_defaults")

    objects: Dict[str, Dict[str, float]] = {}
    obj_raw = raw.get("objects", [])
    if not isinstance(obj_raw, list):
        chk.fail("objects", "expected an array of tables [[objects]]")
    for i, o in enumerate(obj_raw):
        key = f"objects[{i}]"
        if not isinstance(o, dict) or not isinstance(o.get("name"), str):
            chk.fail(f"{key}.name", "every object needs a name")
        chk.unknown(o, ("name",) + OBJECT_KEYS, key)
        objects.setdefault(o["name"], {}).update(chk.params(o, key))

    flow = chk.table(raw, "flow", "flow")
    chk.unknown(flow, ("scheme", "bc"), "flow")
    scheme = flow.get("scheme")
    if scheme is None:
        warnings.warn("no flow scheme given; using tpfa", UserWarning, stacklevel=3)
        scheme = "tpfa"
    if not isinstance(scheme, str) or scheme.lower() not in SCHEMES:
        chk.fail("flow.scheme", f"must be one of {', '.join(SCHEMES)}")
    scheme = scheme.lower()
    sides = SIDES[: 2 * dim]
    boundary: Dict[str, Tuple[str, float]] = {}
    bc = chk.table(flow, "bc", "flow.bc")
    chk.unknown(bc, sides, "flow.bc")
    for side, spec in bc.items():
        key = f"flow.bc.{side}"
        if not isinstance(spec, dict):
            chk.fail(key, "expected a table with type and value")
        chk.unknown(spec, ("type", "value"), key)
        kind = spec.get("type")
        if kind not in ("dirichlet", "neumann"):
            chk.fail(f"{key}.type", "must be 'dirichlet' or 'neumann'")
        boundary[side] = (kind, chk.number(spec, "value", f"{key}.value", default=0.0))

    tr = chk.table(raw, "transport", "transport")
    chk.unknown(tr, ("enabled", "dt", "t_end", "inflow_concentration", "inflow_sides",
                     "porosity", "initial"), "transport")
    enabled = tr.get("enabled", bool(tr))
    if not isinstance(enabled, bool):
        chk.fail("transport.enabled", "expected true or false")
    transport = TransportSpec(enabled=enabled)
    if tr:
        transport.dt = chk.number(tr, "dt", "transport.dt", default=transport.dt, positive=True)
        transport.t_end = chk.number(tr, "t_end", "transport.t_end", default=transport.t_end,
                                     positive=True)
        if transport.t_end < transport.dt:
            chk.fail("transport.t_end", "must be at least one time step")
        transport.inflow_concentration = chk.number(
            tr, "inflow_concentration", "transport.inflow_concentration", default=1.0)
        transport.porosity = chk.number(tr, "porosity", "transport.porosity", default=1.0,
                                        positive=True)
        if transport.porosity > 1:
            chk.fail("transport.porosity", "must lie in (0, 1]")
        transport.initial = chk.number(tr, "initial", "transport.initial", default=0.0)
        inflow_sides = tr.get("inflow_sides")
        if inflow_sides is None:
            # default: every side with the highest prescribed pressure
            dir_sides = {s: v for s, (k, v) in boundary.items() if k == "dirichlet"}
            top = max(dir_sides.values()) if dir_sides else None
            inflow_sides = [s for s, v in dir_sides.items() if v == top]
        if not isinstance(inflow_sides, list) or any(s not in sides for s in inflow_sides):
            chk.fail("transport.inflow_sides", f"expected a list drawn from {', '.join(sides)}")
        transport.inflow_sides = tuple(inflow_sides)

    out = chk.table(raw, "output", "output")
    chk.unknown(out, ("directory", "every", "vtk", "reference"), "output")
    output = OutputSpec()
    if "directory" in out:
        if not isinstance(out["directory"], str):
            chk.fail("output.directory", "expected a path")
        output.directory = Path(out["directory"])
    output.directory = (base / output.directory).resolve()
    every = out.get("every", 0)
    if isinstance(every, bool) or not isinstance(every, int) or every < 0:
        chk.fail("output.every", "expected a non-negative integer")
    output.every = every
    vtk = out.get("vtk", True)
    if not isinstance(vtk, bool):
        chk.fail("output.vtk", "expected true or false")
    output.vtk = vtk
    if "reference" in out:
        if not isinstance(out["reference"], str):
            chk.fail("output.reference", "expected a path")
        output.reference = (base / out["reference"]).resolve()

    return ScenarioConfig(
        ambient_dim=dim,
        domain_min=lo,
        domain_max=hi,
        cells=cells,
        mesh=mesh,
        fractures=fractures,
        matrix=matrix,
        objects=objects,
        fracture_defaults=fracture_defaults,
        scheme=scheme,
        boundary=boundary,
        transport=transport,
        output=output,
    )
