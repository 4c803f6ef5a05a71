"""Scenario execution: evolve once, then run every requested analysis stage.

Each stage returns a :class:`StageResult` with named pass/fail checks.  A stage
that raises is recorded as ``error`` with the exception text and the remaining
independent stages still run.  Outputs are written into a staging directory
that is renamed into place at the end, so an output directory is either
complete (with ``manifest.json``) or absent.
"""
from __future__ import annotations

import hashlib
import math
import os
import shutil
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, _fft, bohm, classifier, dynamics, effective, io, mixtures, moments, states, wigner
from ._kernels import BACKEND
from .grid import Grid, Units, make_grid
from .potentials import build_potential
from .scenario import Scenario

PASS, FAIL, ERROR, SKIP = "pass", "fail", "error", "skip"
EXIT_OK, EXIT_ANALYSIS, EXIT_INVALID = 0, 1, 2
ORDER = ("evolve", "moments", "classify", "effective", "wigner", "bohm", "mixture", "relativistic")
MONOTONE_SLACK = 1e-9


@dataclass
class Check:
    name: str
    value: float
    threshold: float
    relation: str = "<="

    @property
    def passed(self) -> bool:
        if self.relation == "<=":
            return bool(self.value <= self.threshold)
        if self.relation == "<":
            return bool(self.value < self.threshold)
        if self.relation == ">":
            return bool(self.value > self.threshold)
        if self.relation == "==":
            return bool(self.value == self.threshold)
        raise ValueError(self.relation)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag}  {self.name}: {_num(self.value)} {self.relation} {_num(self.threshold)}"


@dataclass
class StageResult:
    name: str
    status: str = PASS
    reason: str = ""
    checks: list = field(default_factory=list)
    info: list = field(default_factory=list)  # (label, text) pairs for the report
    files: list = field(default_factory=list)

    def finalize(self) -> "StageResult":
        if self.status == PASS and any(not c.passed for c in self.checks):
            self.status = FAIL
            self.reason = "; ".join(c.name for c in self.checks if not c.passed) + " failed"
        if self.status == PASS and not self.reason:
            self.reason = f"{len(self.checks)} checks passed" if self.checks else "completed"
        return self


@dataclass
class RunResult:
    exit_code: int
    directory: Path | None
    stages: list
    report: str


def _num(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return f"{float(v):.6e}"


# -- construction -------------------------------------------------------------------------

def build_grid(sc: Scenario) -> Grid:
    g = sc.grid
    return make_grid(g["dims"], g["extent"], g["points"])


def build_units(sc: Scenario) -> Units:
    u = sc.units
    return Units(u["hbar"], tuple(u["masses"]), u.get("c"))


def _value(v):
    return complex(v[0], v[1]) if isinstance(v, list) else complex(v)


def build_state(spec: dict, grid: Grid, units: Units):
    kind = spec["kind"]
    if kind == "gaussian":
        return states.gaussian(grid, spec["x0"], spec["p0"], spec["sigma"], units)
    if kind == "coherent":
        return states.coherent(grid, spec["omega"], spec["x0"], spec["p0"], units)
    if kind == "eigenstate":
        return states.oscillator_eigenstate(grid, spec["n"], spec["omega"], units, spec["center"])
    if kind == "superposition":
        comps = [build_state(c, grid, units) for c in spec["components"]]
        return states.superposition(comps, [_value(c) for c in spec["coefficients"]])
    if kind == "product":
        d = grid.dims // 2
        g1, g2 = grid.sub(range(d)), grid.sub(range(d, 2 * d))
        u1 = Units(units.hbar, (units.masses[0],))
        u2 = Units(units.hbar, (units.masses[-1],))
        return states.product(build_state(spec["particle1"], g1, u1), build_state(spec["particle2"], g2, u2))
    if kind == "entangled_gaussian":
        return states.entangled_gaussian(grid, spec["x1"], spec["x2"], spec["p1"], spec["p2"],
                                         spec["sigma_cm"], spec["sigma_rel"], units)
    raise ValueError(f"unknown state kind {kind!r}")


def _reduced_mass(units: Units) -> float:
    m1, m2 = units.masses
    return m1 * m2 / (m1 + m2)


class Context:
    """Shared objects of one run: grid, units, potential, the evolved record and the scenario."""

    def __init__(self, sc: Scenario, out: Path, tol_scale: float):
        self.sc = sc
        self.out = out
        self.tol = {k: v * tol_scale for k, v in sc.tolerances.items()}
        self.tol_scale = tol_scale
        self.grid = build_grid(sc)
        self.relativistic = sc.integrator["kind"] == "relativistic"
        units = build_units(sc)
        if self.relativistic:
            # the relative coordinate carries the reduced mass for the nonrelativistic comparison
            self.pair_units = units
            units = Units(units.hbar, (_reduced_mass(units),))
        self.units = units
        self.potential = build_potential(sc.potential, self.grid.dims, self.grid)
        self.record = None
        self.classification = None

    def evolve(self, psi0, keep_snapshots=True):
        it = self.sc.integrator
        if self.relativistic:
            m1, m2 = self.pair_units.masses
            pot = None if self.sc.potential["kind"] == "free" else self.potential
            return dynamics.relativistic_evolve(psi0, m1, m2, self.pair_units.c, it["t_final"], it["dt"],
                                                it["save_stride"], potential=pot, keep_snapshots=keep_snapshots)
        return dynamics.evolve(psi0, self.potential, it["t_final"], it["dt"], it["save_stride"],
                               keep_snapshots=keep_snapshots)


# -- stages -----------------------------------------------------------------------------------

def stage_evolve(ctx: Context, res: StageResult):
    psi0 = build_state(ctx.sc.state, ctx.grid, ctx.units)
    rec = ctx.evolve(psi0)
    ctx.record = rec
    header, rows = io.expectation_rows(rec)
    res.files.append(io.write_csv(ctx.out / "expectations.csv", header, rows))
    norm_drift = float(np.max(np.abs(rec.norms - 1.0)))
    e = rec.energies[:, 0]
    res.info += [("saved times", str(len(rec))), ("integrator", rec.metadata.get("integrator", "")),
                 ("max |E(t) - E(0)|", _num(float(np.max(np.abs(e - e[0]))))),
                 ("final <x>", " ".join(_num(v) for v in rec.positions[-1]))]
    res.checks.append(Check("norm drift", norm_drift, 1e-10))


def stage_moments(ctx: Context, res: StageResult, opts: dict):
    rec = ctx.record
    snaps = list(rec.states())[:: opts["every"]]
    series = moments.multipole_series(snaps, order=opts["order"], fail=ctx.tol["boundary_fail"])
    rows = sorted(moments.moment_rows(series), key=lambda r: (r[0], r[3], r[1]))
    res.files.append(io.write_csv(ctx.out / "moments.csv", ["t", "alpha", "value", "kind"], rows))
    dip = max(float(np.linalg.norm(ms.dipole())) for ms in series)
    res.info.append(("snapshots", str(len(series))))
    res.checks.append(Check("max central dipole", dip, ctx.tol["dipole"]))


def stage_classify(ctx: Context, res: StageResult, opts: dict):
    rep = classifier.emwf_check(ctx.record, tol_dipole=ctx.tol["dipole"], tol_ehrenfest=ctx.tol["ehrenfest"],
                                fail=ctx.tol["boundary_fail"])
    ctx.classification = rep
    res.files.append(io.write_csv(ctx.out / "residuals.csv", ["t", "res1", "res2", "dipole_audit"],
                                  rep.residual_rows()))
    lines = [f"verdict: {rep.verdict}"] + [f"{k}: {_num(v)}" for k, v in sorted(rep.summary().items())
                                           if k != "verdict"]
    (ctx.out / "classification.txt").write_text("\n".join(lines) + "\n")
    res.files.append(ctx.out / "classification.txt")
    res.info += [("verdict", rep.verdict), ("max dipole audit", _num(rep.max_dipole)),
                 ("max res1", _num(rep.max_res1)), ("max res2", _num(rep.max_res2)),
                 ("Ehrenfest tolerance at this stride", _num(rep.tol_ehrenfest))]
    for key in ("res1_refinement_ratio", "res2_refinement_ratio"):
        if key in rep.notes:
            res.info.append((key.replace("_", " "), _num(rep.notes[key])))
    if opts.get("expect"):
        res.checks.append(Check(f"verdict is {opts['expect']}", float(rep.verdict == opts["expect"]), 1.0, "=="))


def _analytic(kind, V, x0, v0, times, masses):
    """Closed-form path for a free particle or an isotropic oscillator."""
    if kind == "free":
        return x0[None, :] + np.outer(times, v0)
    curvature = V.derivative_at((2,) + (0,) * (len(x0) - 1), np.zeros(len(x0)))
    omega = math.sqrt(curvature / masses[0])
    return np.outer(np.cos(omega * times), x0) + np.outer(np.sin(omega * times), v0 / omega)


def stage_effective(ctx: Context, res: StageResult, opts: dict):
    rec = ctx.record
    orders = sorted(set(opts["orders"]))
    mode = opts["multipole_source"]
    m = rec.axis_masses
    explicit = "x0" in opts and "v0" in opts
    x0 = np.broadcast_to(np.asarray(opts["x0"], float), m.shape) if explicit else rec.positions[0]
    v0 = np.broadcast_to(np.asarray(opts["v0"], float), m.shape) if explicit else rec.momenta[0] / m
    k = opts.get("moment_order") or max(orders)
    source = None
    if max(orders) > 1:
        if mode == effective.INTERPOLATED:
            source = effective.InterpolatedMoments.from_record(rec, k)
        else:
            source = effective.FrozenMoments(moments.multipoles(rec.snapshot(0), order=k, c_max=0))
    rows = []
    rms = {}
    thr = opts.get("max_error")
    for n in orders:
        tr = effective.integrate_effective(x0, v0, rec.potential, source, n, rec.times, m)
        met = effective.compare_trajectories(rec.times, rec.positions, tr.times, tr.x,
                                             threshold=ctx.tol["trajectory"], hbar=rec.units.hbar)
        rms[n] = met.rms_position_error
        res.info.append((f"order {n}", f"max {_num(met.max_position_error)}  rms {_num(met.rms_position_error)}  horizon {_num(met.horizon)}"))
        for t, x, v in zip(tr.times, tr.x, tr.v):
            rows.append([n, t, *x, *v])
        if thr is not None:
            res.checks.append(Check(f"order {n} max |<x> - x_eff|", met.max_position_error, thr * ctx.tol_scale, "<"))
    d = rec.grid.dims
    header = ["order", "t"] + [f"x{a}" for a in range(d)] + [f"v{a}" for a in range(d)]
    res.files.append(io.write_csv(ctx.out / "classical.csv", header, rows))
    if opts["analytic"] != "none":
        xa = _analytic(opts["analytic"], rec.potential, np.asarray(x0, float), np.asarray(v0, float), rec.times, m)
        err = float(np.max(np.linalg.norm(rec.positions - xa, axis=1)))
        res.info.append(("analytic comparison", _num(err)))
        if thr is not None:
            res.checks.append(Check("max |<x> - x_analytic|", err, thr * ctx.tol_scale, "<"))
    if opts.get("improvement") is not None and len(orders) > 1:
        lo, hi = orders[0], orders[-1]
        res.checks.append(Check(f"rms(N={hi}) / rms(N={lo})", rms[hi] / rms[lo], opts["improvement"]))
        worst = max(rms[b] - rms[a] for a, b in zip(orders, orders[1:]))
        res.checks.append(Check("rms increase between consecutive orders", worst, MONOTONE_SLACK))


def stage_wigner(ctx: Context, res: StageResult, opts: dict):
    rec = ctx.record
    for t in opts["times"]:
        k = int(np.argmin(np.abs(rec.times - t)))
        psi = rec.snapshot(k)
        W = wigner.wigner_transform(psi)
        ext = list(psi.grid.extents) + [len(p) * (p[1] - p[0]) for p in W.momenta]
        res.files.append(io.write_field(ctx.out / f"wigner_{k:05d}.bin", W.values, ext))
        if W.dims == 1:
            res.files.append(io.write_csv(ctx.out / f"wigner_{k:05d}.csv", ["x", "p", "W"],
                                          wigner.downsample_rows(W, opts["csv_points"])))
        label = f"t={_num(float(rec.times[k]))}"
        res.info.append((f"{label} min W", _num(float(W.values.min()))))
        if opts["check"]:
            rho_x, rho_p = wigner.marginals(W)
            ex = float(np.max(np.abs(rho_x - psi.density())))
            ep = float(np.max(np.abs(rho_p - wigner.momentum_density_shifted(psi))))
            ms = moments.multipoles(psi, order=1, c_max=2)
            coeffs = wigner.wigner_multipole_coefficients(psi, ms=ms, c_max=1, n_max=0)
            p_w = np.array([coeffs[((0,) * W.dims, (a,))] for a in range(W.dims)])
            comm = wigner.commutator_check(psi, ms)
            target = 1j * psi.hbar * np.eye(W.dims)
            res.checks += [
                Check(f"{label} position marginal", ex, 1e-8 * ctx.tol_scale),
                Check(f"{label} momentum marginal", ep, 1e-8 * ctx.tol_scale),
                Check(f"{label} |purity - 1|", abs(W.purity() - 1.0), 1e-6 * ctx.tol_scale),
                Check(f"{label} first momentum moment vs <p>",
                      float(np.max(np.abs(p_w - rec.momenta[k]))), 1e-8 * ctx.tol_scale),
                Check(f"{label} commutator deviation",
                      float(np.max(np.abs(comm.difference - target))), 1e-8 * ctx.tol_scale),
            ]


def stage_bohm(ctx: Context, res: StageResult, opts: dict):
    rec = ctx.record
    rng = np.random.default_rng(ctx.sc.seed)
    seeds = bohm.sample_seeds(rec.snapshot(0), opts["seeds"], rng, mode=opts["mode"])
    bundle = bohm.integrate_bohm_trajectories(rec, seeds)
    n_out = min(opts["export_seeds"], seeds.shape[0])
    d = rec.grid.dims
    rows = bundle.rows(n_out)
    res.files.append(io.write_csv(ctx.out / "bohm_trajectories.csv",
                                  ["seed", "t"] + [f"x{a}" for a in range(d)], rows))
    final = bundle.final_positions()
    res.info += [("seeds", str(seeds.shape[0])), ("truncated", str(int(bundle.truncated.sum()))),
                 ("ordering preserved", str(bundle.ordering_preserved)),
                 ("max relative velocity change per step", _num(bundle.max_velocity_change))]
    if opts["mode"] == "density":
        tv = bohm.total_variation(final, rec.snapshot(len(rec) - 1), bins=opts["bins"])
        res.checks.append(Check("TV distance flowed samples vs |psi(T)|^2", tv, opts["max_tv"] * ctx.tol_scale, "<"))
    if d == 1:
        res.checks.append(Check("trajectory ordering preserved", float(bundle.ordering_preserved), 1.0, "=="))
    if opts["euler"] and len(rec) >= 5:
        fine = bohm.euler_residual(rec, every=1)
        coarse = bohm.euler_residual(rec, every=2)
        a, b = float(np.max(fine.max_residual)), float(np.max(coarse.max_residual))
        res.info += [("Euler residual (stride h)", _num(a)), ("Euler residual (stride 2h)", _num(b)),
                     ("Euler refinement ratio", _num(b / a if a > 0 else float("inf")))]


def _mixture_components(ctx: Context, opts: dict):
    comps = []
    for comp in opts["components"]:
        psi = build_state(comp["state"], ctx.grid, ctx.units)
        comps.append(mixtures.MixtureComponent(float(comp["weight"]), ctx.evolve(psi)))
    return mixtures.reduced_density(comps)


def stage_mixture(ctx: Context, res: StageResult, opts: dict):
    ens = _mixture_components(ctx, opts)
    rep = mixtures.classicality_check(ens, tol=ctx.tol["dipole"], tol_ehrenfest=ctx.tol["ehrenfest"])
    times, resid = mixtures.residual_series(ens, opts["i"], opts["j"])
    rows = []
    for t in times:
        e = mixtures.mixture_expectation(ens, opts["i"], opts["j"], t)
        rows.append([t, e.quantum, e.classical, e.residual])
    res.files.append(io.write_csv(ctx.out / "mixture_report.csv", ["t", "quantum", "classical", "residual"], rows))
    for c in rep.components:
        res.info.append((f"component {c.index} (w={_num(c.weight)})",
                         f"{c.verdict}; dipoles {_num(c.dipole1)} {_num(c.dipole2)} cross {_num(c.cross)}"))
    res.info += [("classicality flag", str(rep.passed)), ("max residual", _num(float(resid.max())))]
    expect = opts.get("expect_classical")
    if expect is not None:
        res.checks.append(Check("classicality flag as expected", float(rep.passed == expect), 1.0, "=="))
    if expect is not False and rep.passed:
        res.checks.append(Check("max quantum-classical residual", float(resid.max()), ctx.tol["mixture"], "<"))
    if expect is False:
        res.checks.append(Check("max quantum-classical residual", float(resid.max()), 1e-3, ">"))


def stage_relativistic(ctx: Context, res: StageResult, opts: dict):
    rec = ctx.record
    steps = rec.metadata["steps"]
    drift = float(np.max(np.abs(rec.momenta - rec.momenta[0])))
    per_1e4 = drift * 1e4 / max(steps, 1)
    res.info.append(("max |<pi>(t) - <pi>(0)|", _num(drift)))
    if ctx.sc.potential["kind"] == "free":
        res.checks.append(Check("<pi> drift per 1e4 steps", per_1e4, 1e-12 * ctx.tol_scale, "<"))
    m1, m2 = ctx.pair_units.masses
    c = ctx.pair_units.c
    if m1 == m2:
        v = np.linspace(-1.9 * c, 1.9 * c, 39)
        back = np.array([effective.relative_velocity(effective.relativistic_relative_momentum(x, m1, c), m1, c)
                         for x in v])
        rt = float(np.max(np.abs(back - v) / np.maximum(1.0, np.abs(v))))
        res.checks.append(Check("v -> pi -> v round trip", rt, 1e-12 * ctx.tol_scale, "<"))
    if opts["compare_nonrelativistic"]:
        psi0 = build_state(ctx.sc.state, ctx.grid, ctx.units)
        it = ctx.sc.integrator
        pot = ctx.potential
        nr = dynamics.evolve(psi0, pot, it["t_final"], it["dt"], it["save_stride"], keep_snapshots=False)
        err = float(np.max(np.abs(nr.positions - rec.positions)))
        res.checks.append(Check("max |<x>_rel - <x>_reduced-mass|", err, opts["max_error"] * ctx.tol_scale, "<"))


STAGES = {
    "moments": stage_moments,
    "classify": stage_classify,
    "effective": stage_effective,
    "wigner": stage_wigner,
    "bohm": stage_bohm,
    "mixture": stage_mixture,
    "relativistic": stage_relativistic,
}


def _run_stage(name, func, *args) -> StageResult:
    res = StageResult(name)
    try:
        func(*args, res) if name == "evolve" else func(args[0], res, args[1])
    except Exception as exc:  # noqa: BLE001 - any stage failure is reported, later stages still run
        res.status = ERROR
        res.reason = f"{type(exc).__name__}: {exc}"
        res.checks = []
    return res.finalize()


# -- report & manifest --------------------------------------------------------------------------

def render_report(sc: Scenario, stages: list, exit_code: int, settings: dict) -> str:
    lines = [f"scenario: {sc.name}"]
    if sc.description:
        lines.append(f"description: {sc.description}")
    lines += [f"{k}: {v}" for k, v in settings.items()]
    lines.append(f"exit status: {exit_code}")
    lines.append("")
    for st in stages:
        lines.append(f"[{st.name}] {st.status.upper()} - {st.reason}")
        for label, text in st.info:
            lines.append(f"    {label}: {text}")
        for c in st.checks:
            lines.append(f"    {c.line()}")
        lines.append("")
    n_checks = sum(len(s.checks) for s in stages)
    n_pass = sum(c.passed for s in stages for c in s.checks)
    lines.append(f"checks: {n_pass}/{n_checks} passed")
    return "\n".join(lines) + "\n"


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(directory: Path) -> Path:
    files = sorted(p for p in directory.rglob("*") if p.is_file() and p.name != "manifest.json")
    entries = [{"path": p.relative_to(directory).as_posix(), "bytes": p.stat().st_size, "sha256": _sha256(p)}
               for p in files]
    return io.write_json(directory / "manifest.json", {"files": entries})


# -- entry point ---------------------------------------------------------------------------------

def default_output(sc: Scenario) -> Path:
    return Path(sc.output) if sc.output else Path("runs") / sc.name


def run_scenario(sc: Scenario, out: str | os.PathLike | None = None, threads: int | None = None,
                 seed: int | None = None, tol_scale: float = 1.0, force: bool = False) -> RunResult:
    """Execute a validated scenario; returns the exit code, output directory and report text."""
    if seed is not None:
        sc = Scenario(**{**sc.__dict__, "seed": int(seed)})
    if not tol_scale > 0:
        raise ValueError("tol_scale must be positive")
    target = Path(out) if out is not None else default_output(sc)
    if target.exists() and any(target.iterdir()):
        if not force:
            raise FileExistsError(f"output directory {target} exists and is not empty (use --force to replace)")
    if threads is not None:
        _fft.set_threads(threads)
    target.parent.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=f".{target.name}.", dir=target.parent))
    try:
        ctx = Context(sc, staging, tol_scale)
        stages = [_run_stage("evolve", stage_evolve, ctx)]
        for name in ORDER[1:]:
            if name not in sc.analyses:
                continue
            opts = sc.analyses[name]
            if stages[0].status == ERROR:
                stages.append(StageResult(name, SKIP, "evolve stage failed"))
                continue
            if name == "effective" and ctx.classification is None and not ("x0" in opts and "v0" in opts):
                stages.append(StageResult(name, SKIP, "classify stage did not complete"))
                continue
            stages.append(_run_stage(name, STAGES[name], ctx, opts))
        bad = any(s.status in (ERROR, FAIL) for s in stages) or any(
            s.status == SKIP for s in stages)
        exit_code = EXIT_ANALYSIS if bad else EXIT_OK
        settings = {"seed": sc.seed, "threads": _fft.get_threads(), "tol_scale": repr(float(tol_scale)),
                    "version": __version__}
        io.write_json(staging / "meta.json", {
            "scenario": sc.to_dict(), "settings": settings, "kernel_backend": BACKEND,
            "record": None if ctx.record is None else {
                "kind": ctx.record.kind, "n_saved": len(ctx.record), "metadata": ctx.record.metadata},
            "stages": {s.name: s.status for s in stages},
        })
        report = render_report(sc, stages, exit_code, settings)
        (staging / "report.txt").write_text(report)
        write_manifest(staging)
        if target.exists():
            shutil.rmtree(target)
        staging.rename(target)
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise
    return RunResult(exit_code, target, stages, report)
