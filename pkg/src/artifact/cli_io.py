"""Run configuration, structured output, checkpoints and the ``artifact`` command line."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import os
import sys
import time
import typing
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import fluid_models as fm
from . import limit_harness as lh
from . import vmb_sim as vs
from .collision import BGK, AngularQuadrature, HardSphere, entropy, relax_step
from .kinetic_core import Regime, ScalingRegime, Species, VelocityGrid, discrete_maxwellian, moments
from .linearized_transport import transport_coefficients

SCHEMA_VERSION = 1
KINETIC_COLUMNS = ("t", "step", "mass", "momentum_x", "momentum_y", "momentum_z", "kinetic_energy",
                   "field_energy", "charge", "divB_max", "gauss_residual", "entropy")
FLUID_COLUMNS = ("t", "step", "kinetic", "internal", "field", "total", "divB", "divu", "boussinesq", "sigma")
RELAX_COLUMNS = ("t", "step", "entropy", "mass_plus", "mass_minus", "momentum_x", "momentum_y",
                 "momentum_z", "energy")


class ConfigError(ValueError):
    def __init__(self, path: str, msg: str):
        super().__init__(f"{path}: {msg}" if path else msg)
        self.path = path


class OutputError(OSError):
    pass


# ---------------------------------------------------------------- configuration

@dataclass
class SpeciesConfig:
    m_plus: float = 1.0
    m_minus: float = 1.0
    e_plus: float = 1.0
    e_minus: float = 1.0


@dataclass
class CollisionConfig:
    nu0: float = 1.0
    temp_exponent: float = -1.0
    energy_cut: float = 25.0
    scheme: str = "interp"
    angular: str = "6x12"


@dataclass
class GridConfig:
    nx: int = 64
    ny: int = 1
    length: float = 2 * math.pi
    nv: int = 12
    vmax: float = 6.0
    limiter: str = "mc"


@dataclass
class TimeConfig:
    tmax: float = 0.1
    policy: str = "cfl"
    cfl: float = 0.4
    dt: float = 0.001
    output_every: int = 1


@dataclass
class SweepConfig:
    epsilons: list = field(default_factory=lambda: [0.1, 0.05, 0.025])
    amplitude: float = 1.0
    corrector: bool = True
    fields: list = field(default_factory=lambda: ["rho", "sigma", "ux", "uy", "uz", "T"])
    norm: str = "L2"
    self_test: bool = False


@dataclass
class FluidConfig:
    eta: float = 1.0
    nu: float = 0.0
    kappa: float = 0.0
    amplitude: float = 0.1


@dataclass
class RunConfig:
    regime: str = "A"
    model: str = "EulerMaxwell15"
    backend: str = "bgk"
    epsilon: float = 0.1
    mu0: float = 1.0
    eps0: float = 1.0
    seed: int = 0
    out_dir: str = "out"
    species: SpeciesConfig = field(default_factory=SpeciesConfig)
    collision: CollisionConfig = field(default_factory=CollisionConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    time: TimeConfig = field(default_factory=TimeConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    fluid: FluidConfig = field(default_factory=FluidConfig)
    tolerances: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_POSITIVE = {
    "epsilon", "mu0", "eps0", "species.m_plus", "species.m_minus", "species.e_plus", "species.e_minus",
    "collision.nu0", "collision.energy_cut", "grid.nx", "grid.ny", "grid.length", "grid.nv", "grid.vmax",
    "time.tmax", "time.cfl", "time.dt", "time.output_every", "fluid.eta", "sweep.amplitude",
}
_NONNEG = {"fluid.nu", "fluid.kappa", "fluid.amplitude", "seed"}
_CHOICES = {
    "regime": [r.value for r in Regime],
    "model": [m.value for m in fm.Model],
    "backend": ["bgk", "hard_sphere"],
    "collision.scheme": ["interp", "entropic"],
    "grid.limiter": ["upwind", "minmod", "mc", "none"],
    "time.policy": ["cfl", "fixed"],
    "sweep.norm": ["L2", "Linf"],
}


def _hints(cls):
    return typing.get_type_hints(cls)


def _coerce(value, tp, path):
    if dataclasses.is_dataclass(tp):
        return _build(tp, value, path)
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(path, f"expected bool, got {type(value).__name__}")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected int, got {type(value).__name__}")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected number, got {type(value).__name__}")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(path, f"expected string, got {type(value).__name__}")
        return value
    if tp is list:
        if not isinstance(value, list):
            raise ConfigError(path, f"expected list, got {type(value).__name__}")
        return list(value)
    if tp is dict:
        if not isinstance(value, dict):
            raise ConfigError(path, f"expected mapping, got {type(value).__name__}")
        out = {}
        for k, v in value.items():
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"{path}.{k}", "tolerance overrides must be numbers")
            out[str(k)] = float(v)
        return out
    raise ConfigError(path, f"unsupported type {tp}")


def _build(cls, data, prefix=""):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(prefix or "<root>", f"expected mapping, got {type(data).__name__}")
    hints = _hints(cls)
    kwargs = {}
    for key, value in data.items():
        path = f"{prefix}.{key}" if prefix else str(key)
        if key not in hints:
            raise ConfigError(path, "unknown key")
        kwargs[key] = _coerce(value, hints[key], path)
    return cls(**kwargs)


def validate_config(cfg: RunConfig) -> RunConfig:
    flat = {}

    def walk(obj, prefix):
        for f in dataclasses.fields(obj):
            v = getattr(obj, f.name)
            p = f"{prefix}.{f.name}" if prefix else f.name
            if dataclasses.is_dataclass(v):
                walk(v, p)
            else:
                flat[p] = v

    walk(cfg, "")
    for p in _POSITIVE:
        if not flat[p] > 0:
            raise ConfigError(p, f"must be positive, got {flat[p]}")
    for p in _NONNEG:
        if flat[p] < 0:
            raise ConfigError(p, f"must be non-negative, got {flat[p]}")
    for p, choices in _CHOICES.items():
        if flat[p] not in choices:
            raise ConfigError(p, f"must be one of {choices}, got {flat[p]!r}")
    if not 0 < cfg.epsilon <= 1:
        raise ConfigError("epsilon", "must lie in (0, 1]")
    eps = cfg.sweep.epsilons
    if not eps or any(isinstance(e, bool) or not isinstance(e, (int, float)) or not 0 < e <= 1 for e in eps):
        raise ConfigError("sweep.epsilons", "must be a non-empty list of numbers in (0, 1]")
    cfg.sweep.epsilons = [float(e) for e in eps]
    if any(not isinstance(s, str) for s in cfg.sweep.fields):
        raise ConfigError("sweep.fields", "must be a list of strings")
    try:
        AngularQuadrature.product_gauss(*_angular(cfg.collision.angular))
    except (ValueError, TypeError) as exc:
        raise ConfigError("collision.angular", str(exc)) from None
    if cfg.grid.nv % 2:
        raise ConfigError("grid.nv", "must be even")
    return cfg


def _angular(spec):
    from .collision import parse_angular_order
    return parse_angular_order(spec)


def parse_config(text: str | None) -> RunConfig:
    """YAML text to a validated RunConfig; unknown keys and bad values raise ConfigError with the key path."""
    try:
        data = yaml.safe_load(text) if text else None
    except yaml.YAMLError as exc:
        raise ConfigError("<document>", f"malformed YAML: {exc}") from None
    return validate_config(_build(RunConfig, data))


def serialize_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False, default_flow_style=False)


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise OutputError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


# ---------------------------------------------------------------- output

def _ensure_dir(path: Path) -> Path:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create output directory {path}: {exc}") from exc
    if not os.access(path, os.W_OK):
        raise OutputError(f"output directory {path} is not writable")
    return path


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_timeseries(rows, path, columns) -> Path:
    """CSV with the fixed header ``columns``; missing entries are written as nan."""
    path = Path(path)
    _ensure_dir(path.parent)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for r in rows:
                w.writerow([_fmt(r.get(c, float("nan"))) for c in columns])
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    return path


def read_timeseries(path):
    with Path(path).open() as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float).reshape(len(rows) - 1, len(rows[0]))


def write_report(report: dict, path) -> Path:
    """JSON with schema_version; non-finite floats become null."""
    path = Path(path)
    _ensure_dir(path.parent)
    doc = lh._jsonable(dict(report))
    doc["schema_version"] = SCHEMA_VERSION
    try:
        path.write_text(json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    return path


def report_schema() -> dict:
    return json.loads((Path(__file__).with_name("report_schema.json")).read_text())


def checkpoint(state, path, meta: dict | None = None) -> Path:
    """Self-describing .npz: raw arrays plus a JSON header describing the state."""
    path = Path(path)
    _ensure_dir(path.parent)
    if isinstance(state, vs.KineticState):
        arrays = {"f1": state.f1, "f2": state.f2}
        head = {"kind": "kinetic", "t": state.t, "step": state.step}
    elif isinstance(state, fm.FluidState):
        arrays = {"rho": state.rho, "u": state.u, "T": state.T, "sigma": state.sigma}
        if state.theta is not None:
            arrays["theta"] = state.theta
        head = {"kind": "fluid", "t": state.t, "model": state.model.value,
                "coeffs": dataclasses.asdict(state.coeffs),
                "species": [dataclasses.asdict(s) for s in state.species]}
    else:
        raise TypeError(f"cannot checkpoint {type(state).__name__}")
    arrays.update(E=state.em.E, B=state.em.B, dxdy=np.array([state.em.dx, state.em.dy]))
    head["schema_version"] = SCHEMA_VERSION
    head["meta"] = meta or {}
    head["t_hex"] = float(head["t"]).hex()
    try:
        with path.open("wb") as fh:
            np.savez(fh, header=np.array(json.dumps(head, sort_keys=True)), **arrays)
    except OSError as exc:
        raise OutputError(f"cannot write checkpoint {path}: {exc}") from exc
    return path


def restore(path):
    """Inverse of checkpoint: returns (state, meta)."""
    try:
        with np.load(Path(path), allow_pickle=False) as z:
            head = json.loads(str(z["header"]))
            a = {k: z[k].copy() for k in z.files if k != "header"}
    except OSError as exc:
        raise OutputError(f"cannot read checkpoint {path}: {exc}") from exc
    dx, dy = a["dxdy"]
    em = vs.EMField(a["E"], a["B"], float(dx), float(dy))
    t = float.fromhex(head["t_hex"])
    if head["kind"] == "kinetic":
        return vs.KineticState(a["f1"], a["f2"], em, t, head["step"]), head["meta"]
    sp = tuple(Species(**s) for s in head["species"])
    st = fm.FluidState(head["model"], a["rho"], a["u"], a["T"], a["sigma"], em,
                       fm.FluidCoefficients(**head["coeffs"]), sp, t, a.get("theta"))
    return st, head["meta"]


# ---------------------------------------------------------------- builders

def make_species(cfg: RunConfig):
    s = cfg.species
    return Species(s.m_plus, s.e_plus, 1), Species(s.m_minus, s.e_minus, -1)


def make_kernel(cfg: RunConfig):
    c = cfg.collision
    if cfg.backend == "bgk":
        return BGK(c.nu0, c.temp_exponent)
    return HardSphere(energy_cut=c.energy_cut, scheme=c.scheme)


def make_angular(cfg: RunConfig):
    return AngularQuadrature.product_gauss(*_angular(cfg.collision.angular))


def make_setup(cfg: RunConfig, epsilon: float | None = None) -> vs.KineticSetup:
    g = cfg.grid
    sc = ScalingRegime(cfg.regime, cfg.epsilon if epsilon is None else epsilon, cfg.mu0, cfg.eps0)
    return vs.KineticSetup(VelocityGrid(g.vmax, g.nv), g.nx, sc, make_species(cfg), make_kernel(cfg),
                           g.length, g.limiter, make_angular(cfg) if cfg.backend == "hard_sphere" else None)


def _dt(cfg, dt_stable):
    return cfg.time.dt if cfg.time.policy == "fixed" else dt_stable


def _fluid_initial(cfg: RunConfig) -> fm.FluidState:
    g = cfg.grid
    f = cfg.fluid
    coeffs = fm.FluidCoefficients(eta=f.eta, nu=f.nu, kappa=f.kappa, mu0=cfg.mu0, eps0=cfg.eps0)
    st = fm.make_state(cfg.model, g.nx, g.ny, g.length, coeffs, make_species(cfg))
    a = f.amplitude
    dx = g.length / g.nx
    x = -g.length / 2 + (np.arange(g.nx) + 0.5) * dx
    if st.model.incompressible:
        ly = g.length
        dy = ly / g.ny
        y = -ly / 2 + (np.arange(g.ny) + 0.5) * dy
        X, Y = np.meshgrid(x, y, indexing="ij")
        st.u[0] = a * np.sin(X) * np.cos(Y)
        st.u[1] = -a * np.cos(X) * np.sin(Y)
        st.theta = a * np.cos(X + Y)
        st.rho = -st.theta
        st.em = vs.EMField.zeros(g.nx, g.ny, g.length, ly)
        st.em.B[2] = 1.0 + a * np.cos(X + dx / 2)
        return st
    st.rho[:, 0] = 1 + a * np.cos(x)
    st.u[0, :, 0] = a * np.sin(x)
    st.T[:, 0] = 1 + 0.5 * a * np.sin(x)
    st.em.B[2, :, 0] = 0.5 + a * np.cos(x + dx / 2)
    if st.model is fm.Model.EulerMaxwell15:
        st.u[1, :, 0] = 0.5 * a * np.cos(x)
        st.em.E[1, :, 0] = a * np.sin(x)
    elif st.model is fm.Model.EMHD:
        st.em.E = fm._resistive_E(st.em, st.u, coeffs)[0]
    return st


# ---------------------------------------------------------------- commands

def _write_common(cfg: RunConfig, out: Path):
    _ensure_dir(out)
    (out / "config.resolved.yaml").write_text(serialize_config(cfg))


def cmd_transport(cfg: RunConfig, out: Path) -> dict:
    grid = VelocityGrid(cfg.grid.vmax, cfg.grid.nv)
    ang = make_angular(cfg) if cfg.backend == "hard_sphere" else None
    tc = transport_coefficients(grid, make_kernel(cfg), angular=ang)
    rep = {"command": "transport", **tc.as_dict()}
    write_report(rep, out / "report.json")
    return rep


def bimodal_state(grid: VelocityGrid, species, rng: np.random.Generator):
    """Two-species state made of two displaced Maxwellians per species."""
    out = []
    for sp in species:
        s = rng.uniform(0.8, 1.2, 2)
        d = rng.uniform(0.5, 1.0) * np.array([1.0, 0.0, 0.0])
        F = (discrete_maxwellian(grid, 0.5 * s[0], d, 1.0, sp.m)
             + discrete_maxwellian(grid, 0.5 * s[1], -d, 1.0, sp.m))
        out.append(F[0])
    return out


def cmd_relax(cfg: RunConfig, out: Path) -> dict:
    rng = np.random.default_rng(cfg.seed)
    grid = VelocityGrid(cfg.grid.vmax, cfg.grid.nv)
    sp, sm = make_species(cfg)
    kernel = make_kernel(cfg)
    ang = make_angular(cfg) if cfg.backend == "hard_sphere" else None
    Fp, Fm = bimodal_state(grid, (sp, sm), rng)
    dt = cfg.time.dt
    nsteps = int(round(cfg.time.tmax / dt))
    rows = []

    def rec(k):
        dp, jp, ep = moments(Fp, grid, sp.m)
        dm, jm, em = moments(Fm, grid, sm.m)
        mom = jp + jm
        rows.append({"t": k * dt, "step": k, "entropy": float(entropy(Fp, Fm, grid)),
                     "mass_plus": float(dp), "mass_minus": float(dm), "momentum_x": mom[0],
                     "momentum_y": mom[1], "momentum_z": mom[2], "energy": float(ep + em)})

    rec(0)
    for k in range(1, nsteps + 1):
        Fp, Fm = relax_step(Fp, Fm, grid, sp, sm, kernel, dt, ang)
        if k % cfg.time.output_every == 0 or k == nsteps:
            rec(k)
    write_timeseries(rows, out / "timeseries.csv", RELAX_COLUMNS)
    H = np.array([r["entropy"] for r in rows])
    rep = {"command": "relax", "steps": nsteps, "entropy_initial": H[0], "entropy_final": H[-1],
           "max_entropy_increment": float(np.max(np.diff(H))) if H.size > 1 else 0.0}
    write_report(rep, out / "report.json")
    return rep


def cmd_kinetic(cfg: RunConfig, out: Path, resume: str | None = None) -> dict:
    setup = make_setup(cfg)
    if resume:
        state, _ = restore(resume)
    else:
        md = lh.default_macro(setup.scaling.regime, setup, cfg.sweep.amplitude)
        state = lh.well_prepared_init(setup, md, corrector=cfg.sweep.corrector)
    dt = _dt(cfg, vs.stable_dt(state, setup, cfg.time.cfl))
    rows = [vs.step_diagnostics(state, setup)]

    def cb(s):
        if s.step % cfg.time.output_every == 0:
            rows.append(vs.step_diagnostics(s, setup))

    # on resume, time.tmax is the additional simulated time
    state = vs.run(state, setup, state.t + cfg.time.tmax if resume else cfg.time.tmax, dt=dt, callback=cb)
    if rows[-1]["step"] != state.step:
        rows.append(vs.step_diagnostics(state, setup))
    write_timeseries(rows, out / "timeseries.csv", KINETIC_COLUMNS)
    checkpoint(state, out / "checkpoint.npz", {"regime": cfg.regime, "epsilon": cfg.epsilon})
    first, last = rows[0], rows[-1]
    rep = {"command": "kinetic", "regime": cfg.regime, "epsilon": cfg.epsilon, "dt": dt, "steps": state.step,
           "final": last,
           "mass_drift": abs(last["mass"] - first["mass"]) / abs(first["mass"]),
           "charge_drift": abs(last["charge"] - first["charge"])}
    write_report(rep, out / "report.json")
    return rep


def cmd_fluid(cfg: RunConfig, out: Path, resume: str | None = None) -> dict:
    state = restore(resume)[0] if resume else _fluid_initial(cfg)
    dt = _dt(cfg, fm.stable_fluid_dt(state, cfg.time.cfl))
    rows = []
    step = [0]

    def rec(s):
        r = {"t": s.t, "step": step[0], **energies_row(s)}
        rows.append(r)

    rec(state)

    def cb(s):
        step[0] += 1
        if step[0] % cfg.time.output_every == 0:
            rec(s)

    state = fm.run_fluid(state, state.t + cfg.time.tmax if resume else cfg.time.tmax, dt=dt, callback=cb)
    if rows[-1]["step"] != step[0]:
        rec(state)
    write_timeseries(rows, out / "timeseries.csv", FLUID_COLUMNS)
    checkpoint(state, out / "checkpoint.npz", {"model": cfg.model})
    rep = {"command": "fluid", "model": cfg.model, "dt": dt, "steps": step[0], "final": rows[-1]}
    write_report(rep, out / "report.json")
    return rep


def energies_row(s: fm.FluidState) -> dict:
    return {**fm.energies(s), **fm.constraint_defects(s)}


def sweep_spec(cfg: RunConfig) -> lh.SweepSpec:
    g = cfg.grid
    sw = cfg.sweep
    return lh.SweepSpec(
        regime=cfg.regime, epsilons=tuple(sw.epsilons), backend=cfg.backend, nu0=cfg.collision.nu0, nx=g.nx,
        nv=g.nv, vmax=g.vmax, tmax=cfg.time.tmax, dt=cfg.time.dt if cfg.time.policy == "fixed" else None,
        limiter=g.limiter, fields=tuple(sw.fields), norm=sw.norm, amplitude=sw.amplitude,
        corrector=sw.corrector, masses=(cfg.species.m_plus, cfg.species.m_minus), self_test=sw.self_test,
    )


def cmd_sweep(cfg: RunConfig, out: Path) -> dict:
    try:
        rep = lh.epsilon_sweep(sweep_spec(cfg))
    except lh.HarnessError as exc:
        if exc.partial is not None:
            write_report({"command": "sweep", "error": str(exc), **exc.partial.to_dict()}, out / "report.json")
        raise
    doc = {"command": "sweep", **rep.to_dict()}
    timing = {"runtimes": doc.pop("runtimes")}
    write_report(doc, out / "report.json")
    write_report(timing, out / "timing.json")
    rows = []
    for i, e in enumerate(rep.epsilons):
        r = {"epsilon": e}
        for n, v in rep.errors.items():
            if v:
                r[n] = v[i]
        for name in ("total_error", "ohm_residuals", "boussinesq", "divu", "hall_defects"):
            v = getattr(rep, name)
            if v:
                r[name] = v[i]
        rows.append(r)
    cols = ["epsilon", *rep.errors.keys(), "total_error", "ohm_residuals", "boussinesq", "divu", "hall_defects"]
    write_timeseries(rows, out / "sweep.csv", cols)
    return doc


def cmd_compare(cfg: RunConfig, out: Path, chain: bool = False) -> dict:
    """Kinetic run against its fluid limit at one epsilon, or the EMHD -> resistive-MHD chain."""
    if chain:
        e0 = tuple(cfg.sweep.epsilons)
        d, order, mono = lh.model_reduction_chain(e0, nx=cfg.grid.nx, tmax=cfg.time.tmax, eta=cfg.fluid.eta)
        rep = {"command": "compare", "mode": "chain", "eps0": list(e0), "distances": d,
               "fitted_order": order, "monotone": mono}
        write_report(rep, out / "report.json")
        return rep
    if Regime(cfg.regime) is not Regime.A:
        raise ConfigError("regime", "compare runs regime A against the Euler-Maxwell limit")
    setup = make_setup(cfg)
    md = lh.default_macro(Regime.A, setup, cfg.sweep.amplitude)
    state = lh.well_prepared_init(setup, md)
    dt = _dt(cfg, vs.stable_dt(state, setup, cfg.time.cfl))
    state = vs.run(state, setup, cfg.time.tmax, dt=dt)
    fl = fm.run_fluid(lh.fluid_from_macro(setup, md), cfg.time.tmax, dt=dt)
    ck, cf = lh.kinetic_columns(state, setup), lh.fluid_columns(fl)
    errs = {n: float(np.sqrt(np.sum((ck[n] - cf[n]) ** 2) * setup.dx)) for n in cfg.sweep.fields}
    rows = [{"x": float(x), **{f"{n}_kinetic": ck[n][i] for n in cfg.sweep.fields},
             **{f"{n}_fluid": cf[n][i] for n in cfg.sweep.fields}} for i, x in enumerate(setup.x)]
    cols = ["x"] + [f"{n}_{k}" for n in cfg.sweep.fields for k in ("kinetic", "fluid")]
    write_timeseries(rows, out / "profiles.csv", cols)
    rep = {"command": "compare", "mode": "limit", "epsilon": cfg.epsilon, "dt": dt, "errors": errs}
    write_report(rep, out / "report.json")
    return rep


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="artifact", description="Kinetic and fluid plasma runs.")
    p.add_argument("--config", help="YAML run configuration")
    p.add_argument("--out-dir", help="output directory (overrides out_dir)")
    p.add_argument("--seed", type=int, help="random seed (overrides seed)")
    p.add_argument("--threads", type=int, default=None, help="numba thread count")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("transport", help="transport coefficients from the linearized operators")
    sub.add_parser("relax", help="space-homogeneous collision relaxation")
    k = sub.add_parser("kinetic", help="1D kinetic Vlasov-Maxwell-Boltzmann run")
    k.add_argument("--resume", help="checkpoint to continue from for another time.tmax")
    f = sub.add_parser("fluid", help="fluid-model run")
    f.add_argument("--resume", help="checkpoint to continue from for another time.tmax")
    sub.add_parser("sweep", help="epsilon sweep against the limit system")
    c = sub.add_parser("compare", help="kinetic vs fluid limit, or the EMHD chain")
    c.add_argument("--chain", action="store_true", help="EMHD runs over sweep.epsilons as eps0 values")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else parse_config(None)
        if args.out_dir:
            cfg.out_dir = args.out_dir
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("seed", "must be non-negative")
            cfg.seed = args.seed
        if args.threads:
            import numba
            numba.set_num_threads(min(args.threads, numba.config.NUMBA_NUM_THREADS))
        out = Path(cfg.out_dir)
        _write_common(cfg, out)
        t0 = time.perf_counter()
        cmd = args.command
        if cmd == "transport":
            rep = cmd_transport(cfg, out)
        elif cmd == "relax":
            rep = cmd_relax(cfg, out)
        elif cmd == "kinetic":
            rep = cmd_kinetic(cfg, out, args.resume)
        elif cmd == "fluid":
            rep = cmd_fluid(cfg, out, args.resume)
        elif cmd == "sweep":
            rep = cmd_sweep(cfg, out)
        else:
            rep = cmd_compare(cfg, out, args.chain)
    except (ConfigError, OutputError, lh.HarnessError, vs.SimError, fm.FluidError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps({"command": cmd, "out_dir": str(out), "seconds": round(time.perf_counter() - t0, 3),
                      **{k: v for k, v in lh._jsonable(rep).items() if not isinstance(v, (dict, list))}}))
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
