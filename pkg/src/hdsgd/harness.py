"""Run configuration, orchestration, and comparison metrics.

A config is a flat `key = value` text (with optional `[section]` headers that
prefix the keys inside).  Everything a run needs is resolved here: the model,
the spectrum atoms, the eigenbasis initializations, the schedule, and the
solver; `run` then produces a trajectory CSV with the stable schema.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError
from .models import ModelSpec, make_model
from .ode import init_overlaps, integrate_ode
from .simulate import make_sampler, run_hsgd, run_sgd
from .spectrum import SpectrumK, align_groups, parse_spectrum
from .trajectory import STAT_COLUMNS, Trajectory, common_grid, sup_deviation
from .volterra import solve_scalar_resolvent

SOLVERS = ("ode", "volterra", "sgd", "hsgd")

_TOP_KEYS = {
    "model", "spectrum", "d", "gamma", "delta", "T", "dt", "seed",
    "record_stride", "solver", "out",
}


@dataclass
class RunConfig:
    model_kind: str = "least_squares"
    model_params: dict = field(default_factory=dict)
    spectrum: str = "identity"
    x0: str = "gauss:1.0"
    xstar: str = "gauss:1.0"
    d: int = 100
    gamma: str = "1.0"
    delta: float = 0.0
    T: float = 10.0
    dt: float | None = None
    seed: int = 0
    record_stride: int | None = None
    solver: str = "ode"
    out: str | None = None

    def validate(self) -> None:
        if self.solver not in SOLVERS:
            raise ConfigurationError(f"unknown solver {self.solver!r}")
        if self.d < 1:
            raise ConfigurationError("d must be >= 1")
        if self.T <= 0:
            raise ConfigurationError("T must be positive")
        if self.dt is not None and self.dt <= 0:
            raise ConfigurationError("dt must be positive")


def parse_config(text: str) -> RunConfig:
    """Parse `key = value` lines into a RunConfig, rejecting unknown keys."""
    cfg = RunConfig()
    prefix = ""
    seen_params: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            prefix = line[1:-1].strip()
            if prefix not in ("model", "init", ""):
                raise ConfigurationError(f"line {lineno}: unknown section [{prefix}]")
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if prefix:
            key = key if key.startswith(prefix + ".") else f"{prefix}.{key}"
        try:
            _apply_key(cfg, seen_params, key, value)
        except ConfigurationError as exc:
            raise ConfigurationError(f"line {lineno}: {exc}") from None
        except ValueError as exc:
            raise ConfigurationError(f"line {lineno}: bad value for {key}: {exc}") \
                from None
    cfg.model_params = seen_params
    cfg.validate()
    return cfg


def _apply_key(cfg: RunConfig, params: dict, key: str, value: str) -> None:
    if key == "model":
        cfg.model_kind = value
    elif key.startswith("model."):
        params[key[len("model."):]] = value
    elif key == "init.x0":
        cfg.x0 = value
    elif key in ("init.xstar", "init.x_star"):
        cfg.xstar = value
    elif key == "spectrum":
        cfg.spectrum = value
    elif key == "d":
        cfg.d = int(value)
    elif key == "gamma":
        cfg.gamma = value
    elif key == "delta":
        cfg.delta = float(value)
    elif key == "T":
        cfg.T = float(value)
    elif key == "dt":
        cfg.dt = None if value in ("", "auto") else float(value)
    elif key == "seed":
        cfg.seed = int(value)
    elif key == "record_stride":
        stride = int(value)
        cfg.record_stride = None if stride <= 0 else stride
    elif key == "solver":
        cfg.solver = value
    elif key == "out":
        cfg.out = value
    else:
        raise ConfigurationError(f"unknown key {key!r}")


def parse_gamma(spec: str):
    """Constant (`0.5`) or piecewise-constant (`piecewise:0:1.0,5:0.25`)."""
    spec = str(spec).strip()
    if spec.startswith("piecewise:"):
        pieces = []
        for chunk in spec[len("piecewise:"):].split(","):
            t_str, _, g_str = chunk.partition(":")
            pieces.append((float(t_str), float(g_str)))
        pieces.sort()
        if not pieces or pieces[0][0] > 0.0:
            raise ConfigurationError("piecewise schedule must start at t = 0")
        times = np.array([p[0] for p in pieces])
        gammas = np.array([p[1] for p in pieces])

        def fn(t: float) -> float:
            return float(gammas[np.searchsorted(times, t, side="right") - 1])

        return fn
    return float(spec)


def build_model(cfg: RunConfig) -> ModelSpec:
    return make_model(cfg.model_kind, dict(cfg.model_params))


def build_spectrum(cfg: RunConfig) -> SpectrumK:
    return parse_spectrum(cfg.spectrum, cfg.d, cfg.seed)


def resolve_init(spec: str, d: int, cols: int, seed: int, stream: int,
                 xstar: np.ndarray | None = None) -> np.ndarray:
    """Materialize an init spec into (d, cols) eigenbasis coordinates."""
    spec = spec.strip()
    if spec == "same_as_star":
        if xstar is None:
            raise ConfigurationError("same_as_star needs a resolved target")
        if xstar.shape[1] != cols:
            raise ConfigurationError("same_as_star shape mismatch")
        return xstar.copy()
    if spec == "zeros":
        return np.zeros((d, cols))
    kind, _, arg = spec.partition(":")
    if kind == "ones_scaled":
        c = float(arg)
        return np.full((d, cols), c / np.sqrt(d * cols))
    if kind == "gauss":
        norm = float(arg)
        rng = make_sampler(seed, stream)
        x = rng.standard_normal((d, cols))
        return x * (norm / np.linalg.norm(x))
    if kind == "file":
        x = np.loadtxt(arg, ndmin=2)
        if x.shape != (d, cols):
            raise ConfigurationError(
                f"init file {arg}: shape {x.shape} != ({d}, {cols})")
        return x
    raise ConfigurationError(f"unknown init spec {spec!r}")


def run(cfg: RunConfig) -> tuple[Trajectory, int]:
    """Execute one configured run; returns (trajectory, exit_code).

    Exit code 0 on a full run, 2 when the dynamics stopped early at the
    domain boundary.  The trajectory is also written to cfg.out when set.
    """
    cfg.validate()
    model = build_model(cfg)
    spectrum = build_spectrum(cfg)
    gamma = parse_gamma(cfg.gamma)
    xstar = resolve_init(cfg.xstar, cfg.d, model.ell_star, cfg.seed, stream=1)
    x0 = resolve_init(cfg.x0, cfg.d, model.ell, cfg.seed, stream=2, xstar=xstar)

    if cfg.solver == "ode":
        rows = np.hstack([x0, xstar])
        spectrum, grouped = align_groups(spectrum, rows)
        init = init_overlaps(grouped, cfg.d, mults=spectrum.mults)
        traj = integrate_ode(model, spectrum, init, gamma, cfg.T, cfg.dt,
                             delta=cfg.delta, record_stride=cfg.record_stride)
    elif cfg.solver == "volterra":
        rows = np.hstack([x0, xstar])
        spectrum, grouped = align_groups(spectrum, rows)
        traj = solve_scalar_resolvent(
            model, spectrum, grouped[:, 0], grouped[:, 1], gamma, cfg.T,
            cfg.dt if cfg.dt else 1e-3, delta=cfg.delta,
            record_stride=cfg.record_stride)
    elif cfg.solver == "sgd":
        traj = run_sgd(model, spectrum, x0, xstar, gamma, cfg.d, cfg.T,
                       seed=cfg.seed, delta=cfg.delta,
                       record_stride=cfg.record_stride)
    else:
        traj = run_hsgd(model, spectrum, x0, xstar, gamma, cfg.d, cfg.T,
                        cfg.dt, seed=cfg.seed, delta=cfg.delta,
                        record_stride=cfg.record_stride)
    if cfg.out:
        traj.to_csv(cfg.out)
    return traj, (2 if traj.exited_domain else 0)


@dataclass
class ComparisonReport:
    """Per-statistic deviations of each candidate run from a reference."""

    entries: list  # (label, {stat: (sup, mean)})

    def to_csv(self, path) -> None:
        multi = len(self.entries) > 1
        with open(path, "w") as fh:
            fh.write(("config," if multi else "") + "stat,sup_dev,mean_dev\n")
            for label, stats in self.entries:
                for stat, (sup, mean) in stats.items():
                    prefix = f"{label}," if multi else ""
                    fh.write(f"{prefix}{stat},{sup!r},{mean!r}\n")

    def summary(self) -> dict:
        return {label: {stat: {"sup": sup, "mean": mean}
                        for stat, (sup, mean) in stats.items()}
                for label, stats in self.entries}


def compare(configs: list[RunConfig], reference: RunConfig) -> ComparisonReport:
    """Run every config and the reference; report sup/mean deviations.

    Configs must describe the same model and horizon; they are expected to
    differ only in solver, seed, or d.
    """
    for cfg in configs:
        if cfg.model_kind != reference.model_kind:
            raise ConfigurationError("compare needs a common model kind")
        if cfg.T != reference.T:
            raise ConfigurationError("compare needs a common horizon")
    ref_traj, _ = run(reference)
    entries = []
    for i, cfg in enumerate(configs):
        traj, _ = run(cfg)
        grid = common_grid([ref_traj, traj])
        stats = {}
        for stat in STAT_COLUMNS:
            sup, mean = sup_deviation(ref_traj, traj, stat, grid)
            if not np.isnan(sup):
                stats[stat] = (sup, mean)
        entries.append((f"{cfg.solver}[{i}]", stats))
    return ComparisonReport(entries)


def kl_series(model: ModelSpec, traj: Trajectory) -> np.ndarray:
    """KL statistic reconstructed from a scalar-model trajectory."""
    from .overlap import OverlapMatrix

    if not hasattr(model, "kl") or model.ell != 1:
        raise ConfigurationError("kl series needs the scalar logistic model")
    out = np.empty(len(traj))
    for i in range(len(traj)):
        b = OverlapMatrix.from_blocks([[traj.tr_B11[i]]], [[traj.tr_B12[i]]],
                                      [[traj.tr_B22[i]]])
        out[i] = model.kl(b)
    return out


@dataclass
class SweepDRow:
    d: int
    seed: int
    sup_dev: float
    final_risk: float


def sweep_d(cfg: RunConfig, d_list: list[int], seeds: list[int],
            stat: str = "risk") -> tuple[list[SweepDRow], dict[int, float]]:
    """SGD-vs-ODE deviation table across dimensions.

    For each d, the ODE reference is solved once and each seed's SGD run is
    compared on the common grid using `stat` (a trajectory column or `kl`).
    Returns the per-run rows and the per-d median deviation.
    """
    rows: list[SweepDRow] = []
    medians: dict[int, float] = {}
    for d in d_list:
        ref_cfg = replace(cfg, d=d, solver="ode", out=None)
        ref_traj, _ = run(ref_cfg)
        model = build_model(cfg)
        devs = []
        for seed in seeds:
            sgd_cfg = replace(cfg, d=d, solver="sgd", seed=seed, out=None)
            traj, _ = run(sgd_cfg)
            grid = common_grid([ref_traj, traj])
            if stat == "kl":
                ref_vals = np.interp(grid, ref_traj.t, kl_series(model, ref_traj))
                vals = np.interp(grid, traj.t, kl_series(model, traj))
                dev = float(np.max(np.abs(ref_vals - vals)))
            else:
                dev, _ = sup_deviation(ref_traj, traj, stat, grid)
            rows.append(SweepDRow(d, seed, dev, float(traj.risk[-1])))
            devs.append(dev)
        medians[d] = float(np.median(devs))
    return rows, medians


@dataclass
class SweepGammaRow:
    gamma: float
    d2_initial: float
    d2_final: float
    final_risk: float
    final_n: float
    exited: bool


def sweep_gamma(cfg: RunConfig, gamma_list: list[float]) -> list[SweepGammaRow]:
    """Final distance-to-optimum per constant learning rate."""
    rows: list[SweepGammaRow] = []
    for gam in gamma_list:
        traj, _ = run(replace(cfg, gamma=repr(float(gam)), out=None))
        rows.append(SweepGammaRow(
            gamma=float(gam), d2_initial=float(traj.D2[0]),
            d2_final=float(traj.D2[-1]), final_risk=float(traj.risk[-1]),
            final_n=float(traj.N[-1]), exited=traj.exited_domain,
        ))
    return rows


def crossing_gamma(rows: list[SweepGammaRow]) -> float | None:
    """Smallest swept gamma whose final D^2 exceeds its initial value."""
    for row in sorted(rows, key=lambda r: r.gamma):
        if row.d2_final > row.d2_initial:
            return row.gamma
    return None


def write_sweep_gamma_csv(rows: list[SweepGammaRow], path) -> None:
    with open(path, "w") as fh:
        fh.write("gamma,d2_initial,d2_final,final_risk,final_n,exited\n")
        for r in rows:
            fh.write(f"{r.gamma!r},{r.d2_initial!r},{r.d2_final!r},"
                     f"{r.final_risk!r},{r.final_n!r},{int(r.exited)}\n")


def write_sweep_d_csv(rows: list[SweepDRow], path) -> None:
    with open(path, "w") as fh:
        fh.write("d,seed,sup_dev,final_risk\n")
        for r in rows:
            fh.write(f"{r.d},{r.seed},{r.sup_dev!r},{r.final_risk!r}\n")
