"""Declarative scenario files.

Scenarios are TOML documents.  Every key is checked against a schema; unknown
keys, wrong types, missing required values, incoherent units and unresolved
references are all collected and reported together.  The grammar::

    name = "harmonic_coherent"          # required
    description = "..."                  # optional
    seed = 12345                         # optional, default 0
    output = "runs/harmonic_coherent"    # optional, default runs/<name>

    [grid]        dims = 1, extent = 24.0 (or list), points = 1024 (or list)
    [units]       hbar = 1.0, mass = 1.0 | masses = [m1, m2], c = 50.0 (optional)
    [potential]   kind = free | harmonic | quartic | gaussian_well | polynomial | two_body
    [state]       kind = gaussian | coherent | eigenstate | superposition | product | entangled_gaussian
    [integrator]  kind = schrodinger | relativistic, dt, t_final, save_stride
    [tolerances]  dipole, ehrenfest, trajectory, mixture
    [analyses.<name>]  one table per requested analysis (see ``ANALYSES``)

Two-particle runs use a grid with ``2 * d`` axes (particle 1 first) and
``masses = [m1, m2]``.  Relativistic runs evolve the relative coordinate of an
equal-time two-body system and need ``masses`` and ``c``.
"""
from __future__ import annotations

import copy
import difflib
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

from .errors import ScenarioError

_NUM = (int, float)
REQUIRED = object()


def _number(v):
    return isinstance(v, _NUM) and not isinstance(v, bool)


def _positive(v):
    return _number(v) and v > 0


def _nonneg_int(v):
    return isinstance(v, int) and not isinstance(v, bool) and v >= 0


def _pos_int(v):
    return isinstance(v, int) and not isinstance(v, bool) and v >= 1


def _num_or_list(v):
    return _number(v) or (isinstance(v, list) and v and all(_number(x) for x in v))


def _pos_or_list(v):
    return _positive(v) or (isinstance(v, list) and v and all(_positive(x) for x in v))


def _int_or_list(v):
    return _pos_int(v) or (isinstance(v, list) and v and all(_pos_int(x) for x in v))


def _string(v):
    return isinstance(v, str)


def _bool(v):
    return isinstance(v, bool)


def _coef(v):
    """A complex coefficient: a number or ``[re, im]``."""
    return _number(v) or (isinstance(v, list) and len(v) == 2 and all(_number(x) for x in v))


def _table(v):
    return isinstance(v, dict)


def _list_of_tables(v):
    return isinstance(v, list) and all(isinstance(x, dict) for x in v)


def _int_list(v):
    return isinstance(v, list) and v and all(_pos_int(x) for x in v)


def _num_list(v):
    return isinstance(v, list) and all(_number(x) for x in v)


# key -> (check, description, default)
TOP = {
    "name": (_string, "string", REQUIRED),
    "description": (_string, "string", ""),
    "seed": (_nonneg_int, "nonnegative integer", 0),
    "output": (_string, "path", None),
    "grid": (_table, "table", REQUIRED),
    "units": (_table, "table", {}),
    "potential": (_table, "table", {"kind": "free"}),
    "state": (_table, "table", REQUIRED),
    "integrator": (_table, "table", REQUIRED),
    "tolerances": (_table, "table", {}),
    "analyses": (_table, "table", {}),
}

GRID = {
    "dims": (_pos_int, "positive integer", 1),
    "extent": (_pos_or_list, "positive number or list", REQUIRED),
    "points": (_int_or_list, "positive integer or list", REQUIRED),
}

UNITS = {
    "hbar": (_positive, "positive number", 1.0),
    "mass": (_positive, "positive number", None),
    "masses": (lambda v: isinstance(v, list) and v and all(_positive(x) for x in v), "list of positive numbers", None),
    "c": (_positive, "positive number", None),
}

POTENTIALS = {
    "free": {},
    "harmonic": {"omega": (_positive, "positive number", REQUIRED), "mass": (_positive, "positive number", 1.0)},
    "quartic": {"lambda": (_number, "number", REQUIRED)},
    "gaussian_well": {"depth": (_number, "number", REQUIRED), "width": (_positive, "positive number", REQUIRED),
                      "center": (_num_or_list, "number or list", None)},
    "polynomial": {"terms": (_table, "table of 'i,j,..' = coefficient", REQUIRED)},
    "two_body": {"pair": (_table, "potential table", REQUIRED), "external": (_table, "potential table", {"kind": "free"})},
}

STATES = {
    "gaussian": {"x0": (_num_or_list, "number or list", 0.0), "p0": (_num_or_list, "number or list", 0.0),
                 "sigma": (_pos_or_list, "positive number or list", 1.0)},
    "coherent": {"omega": (_positive, "positive number", REQUIRED), "x0": (_num_or_list, "number or list", 0.0),
                 "p0": (_num_or_list, "number or list", 0.0)},
    "eigenstate": {"n": (lambda v: _nonneg_int(v) or (isinstance(v, list) and v and all(_nonneg_int(x) for x in v)),
                         "nonnegative integer or list", REQUIRED),
                   "omega": (_positive, "positive number", 1.0), "center": (_num_or_list, "number or list", 0.0)},
    "superposition": {"components": (_list_of_tables, "list of state tables", REQUIRED),
                      "coefficients": (lambda v: isinstance(v, list) and all(_coef(x) for x in v),
                                       "list of numbers or [re, im] pairs", REQUIRED)},
    "product": {"particle1": (_table, "state table", REQUIRED), "particle2": (_table, "state table", REQUIRED)},
    "entangled_gaussian": {"x1": (_num_or_list, "number or list", 0.0), "x2": (_num_or_list, "number or list", 0.0),
                           "p1": (_num_or_list, "number or list", 0.0), "p2": (_num_or_list, "number or list", 0.0),
                           "sigma_cm": (_positive, "positive number", 1.0),
                           "sigma_rel": (_positive, "positive number", 1.0)},
}

INTEGRATOR = {
    "kind": (lambda v: v in ("schrodinger", "relativistic"), "'schrodinger' or 'relativistic'", "schrodinger"),
    "dt": (_positive, "positive number", REQUIRED),
    "t_final": (_positive, "positive number", REQUIRED),
    "save_stride": (_pos_int, "positive integer", 1),
}

TOLERANCES = {
    "dipole": (_positive, "positive number", 1e-8),
    "ehrenfest": (_positive, "positive number", 1e-5),
    "trajectory": (_positive, "positive number", 1e-5),
    "mixture": (_positive, "positive number", 1e-6),
    "boundary_fail": (_positive, "positive number", 1e-3),
}

MODES = ("frozen", "time-interpolated", "prescribed")

ANALYSES = {
    "moments": {
        "order": (lambda v: _pos_int(v) and v <= 8, "integer 1..8", 4),
        "every": (_pos_int, "positive integer", 1),
    },
    "classify": {
        "expect": (lambda v: v in ("EMWF", "NDWF-only", "neither"), "'EMWF', 'NDWF-only' or 'neither'", None),
    },
    "effective": {
        "orders": (_int_list, "list of positive integers", [1]),
        "multipole_source": (lambda v: v in MODES, "one of " + ", ".join(MODES), "time-interpolated"),
        "moment_order": (_pos_int, "positive integer", None),
        "analytic": (lambda v: v in ("none", "harmonic", "free"), "'none', 'harmonic' or 'free'", "none"),
        "max_error": (_positive, "positive number", None),
        "improvement": (_positive, "positive number", None),
        "x0": (_num_or_list, "number or list", None),
        "v0": (_num_or_list, "number or list", None),
    },
    "wigner": {
        "times": (_num_list, "list of saved times", [0.0]),
        "csv_points": (_pos_int, "positive integer", 128),
        "check": (_bool, "boolean", True),
    },
    "bohm": {
        "seeds": (_pos_int, "positive integer", 1000),
        "mode": (lambda v: v in ("density", "uniform"), "'density' or 'uniform'", "density"),
        "bins": (_pos_int, "positive integer", 40),
        "max_tv": (_positive, "positive number", 0.05),
        "euler": (_bool, "boolean", True),
        "export_seeds": (_pos_int, "positive integer", 100),
    },
    "mixture": {
        "components": (_list_of_tables, "list of {weight, state} tables", REQUIRED),
        "i": (_nonneg_int, "axis index", 0),
        "j": (_nonneg_int, "axis index", 0),
        "expect_classical": (_bool, "boolean", None),
    },
    "relativistic": {
        "compare_nonrelativistic": (_bool, "boolean", True),
        "max_error": (_positive, "positive number", 5e-4),
    },
}

ANALYSIS_DOCS = {
    "moments": """moments — central moments of the density about <x>(t) at saved times.
  order = 4        highest moment order (1..8)
  every = 1        use every k-th saved snapshot
  Output: moments.csv (t, alpha, value, kind).""",
    "classify": """classify — NDWF/EMWF verdict of the evolved record.
  The trajectory is <x>(t); the dipole about it is audited at each snapshot and
  both Ehrenfest relations are checked by central differences on the save stride.
  The Ehrenfest tolerance is quoted at a stride of 1e-3 and scales with stride^2.
  expect = "EMWF"  optional expected verdict (turns into a pass/fail check)
  Output: residuals.csv, classification.txt.""",
    "effective": """effective — classical trajectories with multipole force corrections.
  orders = [1, 2, 3, 4]       truncation orders N (1 = bare Newton)
  multipole_source = "time-interpolated"
      frozen             moments of the initial state held constant
      time-interpolated  moments sampled along the quantum run, cubic-spline in t
      prescribed         moments given analytically (only from the Python API)
  moment_order       highest moment order fed to the force (default: max order)
  analytic = "none"  also compare against the harmonic/free closed-form path
  max_error          pass if every order stays within this distance of <x>(t)
  improvement        pass if rms(N_max) <= improvement * rms(N=1)
  x0, v0             explicit Cauchy data instead of <x>(0), <p>(0)/m
  Output: classical.csv (order, t, x..., v...).""",
    "wigner": """wigner — Wigner function W(x, p) at selected saved times (1-D and 2-D grids).
  times = [0.0]     saved times to transform (nearest saved time)
  csv_points = 128  rows per axis in the CSV preview (1-D only)
  check = true      marginals, purity, first-moment and commutator identities
  Output: wigner_<k>.bin (binary field), wigner_<k>.csv (1-D).""",
    "bohm": """bohm — Bohm trajectories flowed with the guidance field of the run.
  seeds = 1000        number of seed points (drawn with the scenario seed)
  mode = "density"    seeds from |psi0|^2 or "uniform" over the grid
  bins = 40, max_tv   equivariance check: histogram TV distance against |psi(T)|^2
  euler = true        Euler-form residual of the Madelung flow
  export_seeds = 100  trajectories written to the CSV
  Output: bohm_trajectories.csv (seed, t, x...).""",
    "mixture": """mixture — diagonal mixture of two-particle components evolved in the same potential.
  components = [{ weight = 0.5, state = { kind = "product", ... } }, ...]
  i, j = 0          axes of the correlation <x1^i x2^j>
  expect_classical  optional expected outcome of the classicality check
  Output: mixture_report.csv (t, quantum, classical, residual) and per-component verdicts.""",
    "relativistic": """relativistic — checks for the relative-coordinate square-root Hamiltonian run.
  compare_nonrelativistic = true  compare <x>(t) with a reduced-mass Schroedinger run
  max_error = 5e-4                pass threshold for that comparison
  Also reports the drift of <pi> and the v -> pi -> v round-trip error.""",
}


@dataclass(frozen=True)
class Scenario:
    name: str
    description: str
    seed: int
    output: str | None
    grid: dict
    units: dict
    potential: dict
    state: dict
    integrator: dict
    tolerances: dict
    analyses: dict
    source: str | None = field(default=None, compare=False)

    def to_dict(self) -> dict:
        return {
            "name": self.name, "description": self.description, "seed": self.seed, "output": self.output,
            "grid": self.grid, "units": self.units, "potential": self.potential, "state": self.state,
            "integrator": self.integrator, "tolerances": self.tolerances, "analyses": self.analyses,
        }

    @property
    def dims(self) -> int:
        return self.grid["dims"]

    @property
    def two_particle(self) -> bool:
        return len(self.units["masses"]) == 2 and self.integrator["kind"] == "schrodinger"


def _suggest(key, allowed) -> str:
    near = difflib.get_close_matches(key, list(allowed), n=1, cutoff=0.6)
    return f" (did you mean '{near[0]}'?)" if near else ""


def _check_table(table, schema, where, errors) -> dict:
    """Validate keys/types against ``schema`` and fill defaults."""
    out = {}
    for key in table:
        if key not in schema:
            errors.append(f"{where}: unknown key '{key}'{_suggest(key, schema)}")
    for key, (check, desc, default) in schema.items():
        if key in table:
            if check(table[key]):
                out[key] = copy.deepcopy(table[key])
            else:
                errors.append(f"{where}.{key}: expected {desc}, got {table[key]!r}")
        elif default is REQUIRED:
            errors.append(f"{where}: missing required key '{key}'")
        elif default is not None:
            out[key] = copy.deepcopy(default)
    return out


def _check_kind(table, kinds, where, errors) -> dict | None:
    if not isinstance(table, dict):
        errors.append(f"{where}: expected a table")
        return None
    kind = table.get("kind")
    if kind is None:
        errors.append(f"{where}: missing required key 'kind'")
        return None
    if kind not in kinds:
        errors.append(f"{where}.kind: unknown kind '{kind}'{_suggest(str(kind), kinds)}; "
                      f"choose from {', '.join(kinds)}")
        return None
    rest = {k: v for k, v in table.items() if k != "kind"}
    out = _check_table(rest, kinds[kind], where, errors)
    out["kind"] = kind
    return out


def _check_potential(table, where, errors, ndim):
    pot = _check_kind(table, POTENTIALS, where, errors)
    if pot is None:
        return None
    if pot["kind"] == "two_body":
        if ndim is not None and ndim % 2:
            errors.append(f"{where}: a two-body potential needs an even number of grid axes")
        sub = None if ndim is None else ndim // 2
        for part in ("pair", "external"):
            if part in pot:
                inner = _check_potential(pot[part], f"{where}.{part}", errors, sub)
                if inner is not None and inner["kind"] == "two_body":
                    errors.append(f"{where}.{part}: nested two-body potentials are not allowed")
                pot[part] = inner
    if pot["kind"] == "polynomial" and "terms" in pot:
        for key, val in pot["terms"].items():
            try:
                exps = [int(t) for t in key.split(",")]
            except ValueError:
                errors.append(f"{where}.terms: key '{key}' is not a comma-separated exponent list")
                continue
            if ndim is not None and len(exps) != ndim:
                errors.append(f"{where}.terms: key '{key}' needs {ndim} exponents")
            if any(e < 0 for e in exps):
                errors.append(f"{where}.terms: negative exponent in '{key}'")
            if not _number(val):
                errors.append(f"{where}.terms.{key}: expected number, got {val!r}")
    return pot


def _check_state(table, where, errors, depth=0):
    st = _check_kind(table, STATES, where, errors)
    if st is None:
        return None
    if st["kind"] == "superposition":
        comps = st.get("components", [])
        st["components"] = [_check_state(c, f"{where}.components[{i}]", errors, depth + 1)
                            for i, c in enumerate(comps)]
        if "coefficients" in st and len(st["coefficients"]) != len(comps):
            errors.append(f"{where}: {len(comps)} components but {len(st['coefficients'])} coefficients")
        if not comps:
            errors.append(f"{where}: a superposition needs at least one component")
    if st["kind"] == "product":
        for part in ("particle1", "particle2"):
            if part in st:
                inner = _check_state(st[part], f"{where}.{part}", errors, depth + 1)
                if inner is not None and inner["kind"] in ("product", "entangled_gaussian"):
                    errors.append(f"{where}.{part}: a particle state must be a one-particle state")
                st[part] = inner
    return st


def _is_two_particle(st) -> bool:
    if st is None:
        return False
    if st["kind"] == "superposition":
        comps = [c for c in st.get("components", []) if c is not None]
        return bool(comps) and all(_is_two_particle(c) for c in comps)
    return st["kind"] in ("product", "entangled_gaussian")


def _axis_list(value, n, where, errors, name):
    vals = value if isinstance(value, list) else [value] * n
    if len(vals) != n:
        errors.append(f"{where}: {name} has {len(vals)} entries for {n} axes")
    return vals


def validate(doc: dict, source: str | None = None) -> Scenario:
    """Validate a parsed document; raises :class:`ScenarioError` listing every problem."""
    errors: list[str] = []
    if not isinstance(doc, dict):
        raise ScenarioError(["scenario must be a table"])
    top = _check_table(doc, TOP, "scenario", errors)

    grid = _check_table(top.get("grid", {}), GRID, "grid", errors) if "grid" in top else {}
    dims = grid.get("dims")
    if dims is not None and dims > 3:
        errors.append(f"grid.dims: at most 3 axes are supported, got {dims}")
    if dims is not None:
        for key in ("extent", "points"):
            if key in grid:
                grid[key] = _axis_list(grid[key], dims, f"grid.{key}", errors, key)
        pts = grid.get("points", [])
        for n in pts if isinstance(pts, list) else []:
            if isinstance(n, int) and (n < 2 or n & (n - 1)):
                errors.append(f"grid.points: {n} is not a power of two >= 2")

    units = _check_table(top.get("units", {}), UNITS, "units", errors)
    if "mass" in units and "masses" in units:
        errors.append("units: give either 'mass' or 'masses', not both")
    masses = units.pop("masses", None) or [units.pop("mass", 1.0)]
    units.pop("mass", None)
    if len(masses) > 2:
        errors.append(f"units.masses: at most two particles are supported, got {len(masses)}")
    units["masses"] = masses

    integ = _check_table(top.get("integrator", {}), INTEGRATOR, "integrator", errors) if "integrator" in top else {}
    if "dt" in integ and "t_final" in integ:
        if integ["dt"] >= integ["t_final"]:
            errors.append(f"integrator.dt = {integ['dt']} must be smaller than t_final = {integ['t_final']}")
        elif integ["dt"] * integ.get("save_stride", 1) > integ["t_final"]:
            errors.append("integrator: the save window dt * save_stride exceeds t_final")
    relativistic = integ.get("kind") == "relativistic"

    if dims is not None and len(masses) == 2 and not relativistic and dims % 2:
        errors.append(f"units: two masses need an even number of grid axes, got dims = {dims}")
    if relativistic:
        if len(masses) != 2:
            errors.append("units: a relativistic run needs masses = [m1, m2]")
        if "c" not in units:
            errors.append("units: a relativistic run needs the speed of light 'c'")
    elif "c" in units:
        errors.append("units.c: only meaningful for integrator.kind = 'relativistic'")

    pot = _check_potential(top.get("potential", {"kind": "free"}), "potential", errors, dims)
    two_particle = len(masses) == 2 and not relativistic
    if pot is not None and pot["kind"] == "two_body" and not two_particle:
        errors.append("potential: a two-body potential needs masses = [m1, m2] and a Schroedinger integrator")

    state = _check_state(top["state"], "state", errors) if "state" in top else None
    if state is not None:
        two_state = _is_two_particle(state)
        if two_particle and not two_state:
            errors.append("state: a two-particle run needs a 'product' or 'entangled_gaussian' state")
        if two_state and not two_particle:
            errors.append(f"state.kind = '{state['kind']}' needs masses = [m1, m2]")

    tol = _check_table(top.get("tolerances", {}), TOLERANCES, "tolerances", errors)

    analyses = {}
    for name, table in top.get("analyses", {}).items():
        if name not in ANALYSES:
            errors.append(f"analyses: unknown analysis '{name}'{_suggest(name, ANALYSES)}")
            continue
        if not isinstance(table, dict):
            errors.append(f"analyses.{name}: expected a table")
            continue
        analyses[name] = _check_table(table, ANALYSES[name], f"analyses.{name}", errors)
    _check_references(analyses, relativistic, two_particle, dims, errors)

    if errors:
        raise ScenarioError(errors)
    return Scenario(
        name=top["name"], description=top.get("description", ""), seed=top.get("seed", 0),
        output=top.get("output"), grid=grid, units=units, potential=pot, state=state,
        integrator=integ, tolerances=tol, analyses=analyses, source=source,
    )


def _check_references(analyses, relativistic, two_particle, dims, errors):
    eff = analyses.get("effective")
    if eff is not None:
        explicit = "x0" in eff and "v0" in eff
        if "classify" not in analyses and not explicit:
            errors.append("analyses.effective: needs analyses.classify or explicit Cauchy data (x0 and v0)")
        if eff.get("multipole_source") == "prescribed":
            errors.append("analyses.effective: 'prescribed' moments are only available from the Python API")
        if relativistic:
            errors.append("analyses.effective: not available for relativistic runs")
    if relativistic:
        for name in ("classify", "bohm", "mixture"):
            if name in analyses:
                errors.append(f"analyses.{name}: not available for relativistic runs")
    elif "relativistic" in analyses:
        errors.append("analyses.relativistic: needs integrator.kind = 'relativistic'")
    if "mixture" in analyses:
        if not two_particle:
            errors.append("analyses.mixture: needs a two-particle run (masses = [m1, m2])")
        comps = analyses["mixture"].get("components", [])
        total = 0.0
        for k, comp in enumerate(comps):
            where = f"analyses.mixture.components[{k}]"
            for key in comp:
                if key not in ("weight", "state"):
                    errors.append(f"{where}: unknown key '{key}'{_suggest(key, ('weight', 'state'))}")
            w = comp.get("weight")
            if not _number(w) or w < 0:
                errors.append(f"{where}.weight: expected a nonnegative number")
            else:
                total += w
            if "state" not in comp:
                errors.append(f"{where}: missing required key 'state'")
            else:
                st = _check_state(comp["state"], f"{where}.state", errors)
                if st is not None and not _is_two_particle(st):
                    errors.append(f"{where}.state: needs a two-particle state")
                comp["state"] = st
        if comps and not math.isclose(total, 1.0, rel_tol=0, abs_tol=1e-12):
            errors.append(f"analyses.mixture: component weights sum to {total!r}, not 1")
        if dims is not None:
            d = dims // 2 if dims else 0
            for key in ("i", "j"):
                if analyses["mixture"].get(key, 0) >= max(d, 1):
                    errors.append(f"analyses.mixture.{key}: axis index out of range for {d} axes per particle")
    if "wigner" in analyses and dims is not None and dims > 2:
        errors.append("analyses.wigner: Wigner grids are limited to 2 axes")


def parse_scenario(path) -> Scenario:
    """Read and validate a scenario file."""
    path = Path(path)
    if not path.is_file():
        raise ScenarioError([f"{path}: no such scenario file"])
    try:
        doc = tomllib.loads(path.read_text(encoding="utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ScenarioError([f"{path}: not well-formed: {exc}"]) from exc
    return validate(doc, source=str(path))


def parse_string(text: str) -> Scenario:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError([f"not well-formed: {exc}"]) from exc
    return validate(doc)


SCENARIO_DIR = Path(__file__).parent / "scenarios"


def list_scenarios() -> list[tuple[str, str]]:
    """``(name, description)`` of every shipped scenario, sorted by name."""
    out = []
    for p in sorted(SCENARIO_DIR.glob("*.scn")):
        try:
            sc = parse_scenario(p)
            out.append((p.stem, sc.description))
        except ScenarioError as exc:  # pragma: no cover - shipped files are tested
            out.append((p.stem, f"INVALID: {exc.errors[0]}"))
    return out


def shipped_scenario(name: str) -> Path:
    p = SCENARIO_DIR / (name if name.endswith(".scn") else name + ".scn")
    if not p.is_file():
        names = [q.stem for q in SCENARIO_DIR.glob("*.scn")]
        raise ScenarioError([f"no shipped scenario '{name}'{_suggest(name, names)}"])
    return p


def describe(analysis: str) -> str:
    """Documentation text for one analysis."""
    if analysis not in ANALYSIS_DOCS:
        near = difflib.get_close_matches(analysis, list(ANALYSIS_DOCS), n=3, cutoff=0.4)
        hint = f"; did you mean {', '.join(near)}?" if near else ""
        raise KeyError(f"unknown analysis '{analysis}'{hint} (available: {', '.join(ANALYSIS_DOCS)})")
    return ANALYSIS_DOCS[analysis]
