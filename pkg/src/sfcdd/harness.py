"""Declarative experiment sweeps and their CSV/JSON output.

A config is a flat ``key = value`` text file. List-valued keys (``S``,
``P``, ``gamma``, ``p_fault``) are comma separated and expand into the
cartesian product of config points. Every (point, run) pair draws its
randomness from ``SeedSequence([seed, point, run])``, so results do not
depend on the order in which points are evaluated.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import time
import warnings
from dataclasses import asdict, dataclass, field, fields, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, ResourceError, SfcddError
from .fault import FaultEngine, FaultSchedule, fault_statistics
from .grid import MAX_POINTS, GridSpec, diagonal_transform, discretize, energy_norm
from .partition import as_fraction, build_partition
from .schwarz import PreconditionerSpec, build_preconditioner
from .solvers import (
    CONVERGED,
    ConvergenceRecord,
    SpectralEstimate,
    estimate_extremes,
    iterations_from_rate,
    pcg,
    random_initial_iterate,
    richardson,
)

MAX_SUBDOMAINS = 1024
LEVEL_RULES = ("explicit", "weak", "isotropic", "isotropic-points", "strong")
Q_RULES = ("fixed", "weak", "strong")
SOLVERS = ("richardson", "pcg", "fpcg")
LIST_KEYS = ("S", "P", "gamma", "p_fault")
CONFIG_ERROR = "config-error"


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigurationError(f"not a boolean: {text!r}")


def _split(text: str) -> list:
    return [t.strip() for t in str(text).split(",") if t.strip()]


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "experiment"
    d: int = 1
    level_rule: str = "weak"
    levels: tuple = ()
    S: tuple = (8,)
    L: int = 16
    P: tuple = (4,)
    q_rule: str = "fixed"
    q: int = 16
    gamma: tuple = (Fraction(1, 2),)
    weighting: str = "omega"
    variant: str = "balanced"
    coarse_basis: str = "agglomeration"
    solver: str = "pcg"
    xi_rule: str = "optimal"
    xi: float = 1.0
    p_fault: tuple = (0.0,)
    runs: int = 1
    seed: int = 0
    tol: float = 1e-8
    max_iter: int = 0
    check_shadow: bool = True
    force: bool = False

    def __post_init__(self):
        if self.level_rule not in LEVEL_RULES:
            raise ConfigurationError(f"level_rule must be one of {LEVEL_RULES}")
        if self.q_rule not in Q_RULES:
            raise ConfigurationError(f"q_rule must be one of {Q_RULES}")
        if self.solver not in SOLVERS:
            raise ConfigurationError(f"solver must be one of {SOLVERS}")
        if self.xi_rule not in ("optimal", "explicit"):
            raise ConfigurationError("xi_rule must be 'optimal' or 'explicit'")
        if self.d < 1 or self.runs < 0:
            raise ConfigurationError("d must be positive and runs nonnegative")
        if self.level_rule == "explicit" and len(self.levels) != self.d:
            raise ConfigurationError(f"explicit levels need {self.d} entries, got {self.levels}")
        if self.level_rule == "weak" and self.d != 1:
            raise ConfigurationError("the weak rule with N = 2^S * P is one-dimensional; use isotropic")

    # -- text form ---------------------------------------------------------

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentConfig":
        kw = {}
        names = {f.name: f for f in fields(cls)}
        for key, raw in data.items():
            if key not in names:
                raise ConfigurationError(f"unknown config key {key!r}")
            if not isinstance(raw, str):
                kw[key] = raw
                continue
            default = names[key].default
            if key in ("gamma",):
                kw[key] = tuple(as_fraction(t) for t in _split(raw))
            elif key == "p_fault":
                kw[key] = tuple(float(t) for t in _split(raw))
            elif key in ("S", "P", "levels"):
                kw[key] = tuple(int(t) for t in _split(raw))
            elif isinstance(default, bool):
                kw[key] = _parse_bool(raw)
            elif isinstance(default, int):
                kw[key] = int(raw)
            elif isinstance(default, float):
                kw[key] = float(raw)
            else:
                kw[key] = raw.strip()
        for key in LIST_KEYS + ("levels",):
            if key in kw and not isinstance(kw[key], tuple):
                kw[key] = tuple(kw[key]) if isinstance(kw[key], (list, tuple)) else (kw[key],)
        if "gamma" in kw:
            kw["gamma"] = tuple(as_fraction(g) for g in kw["gamma"])
        return cls(**kw)

    def to_text(self) -> str:
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            elif isinstance(v, bool):
                v = "true" if v else "false"
            out.append(f"{f.name} = {v}")
        return "\n".join(out) + "\n"

    # -- expansion ---------------------------------------------------------

    def point_keys(self) -> list:
        S = self.S if self.level_rule in ("weak", "isotropic", "isotropic-points") or self.q_rule == "weak" else self.S[:1]
        return list(itertools.product(S, self.P, self.gamma, self.p_fault))


def parse_config_text(text: str) -> dict:
    data = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected key = value, got {line!r}")
        key, value = (t.strip() for t in line.split("=", 1))
        data[key] = value
    return data


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> ExperimentConfig:
    data = parse_config_text(Path(path).read_text()) if path is not None else {}
    data.update(overrides or {})
    return ExperimentConfig.from_mapping(data)


# ---------------------------------------------------------------------------
# config points


@dataclass(frozen=True)
class Point:
    index: int
    S: int
    P: int
    gamma: Fraction
    p_fault: float
    grid: GridSpec
    q: int

    @property
    def N(self) -> int:
        return self.grid.n_points

    def describe(self) -> dict:
        return {
            "point": self.index,
            "S": self.S,
            "P": self.P,
            "gamma": str(self.gamma),
            "p_fault": self.p_fault,
            "N": self.N,
            "levels": "x".join(str(l) for l in self.grid.levels),
            "q": self.q,
        }


def balanced_shape(target: int, d: int) -> tuple:
    """Near-cubic point counts whose product is as large as possible but at most ``target``."""
    base = int(math.floor(target ** (1.0 / d) + 1e-9))
    while (base + 1) ** d <= target:
        base += 1
    n = [base] * d
    for j in range(d):
        if math.prod(n) // n[j] * (n[j] + 1) <= target:
            n[j] += 1
    return tuple(n)


def resolve_grid(cfg: ExperimentConfig, S: int, P: int) -> GridSpec:
    if cfg.level_rule == "explicit":
        return GridSpec(cfg.levels)
    if cfg.level_rule == "weak":
        # mesh width 1/(2^S P); a level grid whenever P is a power of two
        return GridSpec.from_points((2**S * P - 1,))
    if cfg.level_rule == "isotropic-points":
        return GridSpec.from_points(balanced_shape(2**S * P, cfg.d))
    if cfg.level_rule == "isotropic":
        l = math.floor((S + math.log2(P)) / cfg.d + 1e-12)
        if l < 1:
            raise ConfigurationError(f"isotropic level {l} for S={S}, P={P}, d={cfg.d}")
        return GridSpec((l,) * cfg.d)
    if cfg.d == 1:
        return GridSpec((cfg.L,))
    return GridSpec((cfg.L // cfg.d,) * cfg.d)


def resolve_q(cfg: ExperimentConfig, S: int, N: int, P: int) -> int:
    if cfg.q_rule == "fixed":
        return cfg.q
    if cfg.q_rule == "weak":
        return 2 ** (S - 4)
    return 2 ** (int(math.floor(math.log2(N / P))) - 4)


def resolve_point(cfg: ExperimentConfig, index: int, key) -> Point:
    S, P, gamma, p_fault = key
    if P > MAX_SUBDOMAINS and not cfg.force:
        raise ResourceError(f"P = {P} exceeds {MAX_SUBDOMAINS}; pass --force to run anyway")
    grid = resolve_grid(cfg, S, P)
    if grid.n_points > MAX_POINTS and not cfg.force:
        raise ResourceError(f"N = {grid.n_points} exceeds {MAX_POINTS}; pass --force to run anyway")
    if 2 * gamma + 1 > P:
        raise ConfigurationError(f"gamma = {gamma} needs P >= {2 * gamma + 1}, got {P}")
    q = resolve_q(cfg, S, grid.n_points, P)
    if q < 1 or q > grid.n_points // P:
        raise ConfigurationError(f"q = {q} outside [1, floor(N/P) = {grid.n_points // P}]")
    return Point(index, S, P, as_fraction(gamma), float(p_fault), grid, q)


# ---------------------------------------------------------------------------
# results


def _same(a, b) -> bool:
    if isinstance(a, float) and isinstance(b, float) and math.isnan(a) and math.isnan(b):
        return True
    return a == b


@dataclass(eq=False)
class ResultRow:
    run_id: str
    point: int
    run: int
    d: int
    N: int
    P: int
    gamma: str
    q: int
    p_fault: float
    variant: str
    weighting: str
    solver: str
    status: str
    K: int
    rho_ave: float
    rho_asy: float
    n_faults: int
    r_p: float
    r_hat_p: float
    lam_min: float
    lam_max: float
    xi: float
    message: str = ""
    wall_time: float = field(default=0.0, compare=False)

    def __eq__(self, other):
        if not isinstance(other, ResultRow):
            return NotImplemented
        return all(
            _same(getattr(self, f.name), getattr(other, f.name)) for f in fields(self) if f.compare
        )

    @classmethod
    def columns(cls) -> list:
        return [f.name for f in fields(cls)]

    @classmethod
    def from_strings(cls, data: dict) -> "ResultRow":
        kw = {}
        for f in fields(cls):
            raw = data[f.name]
            if f.type in ("int",):
                kw[f.name] = int(raw)
            elif f.type in ("float",):
                kw[f.name] = float(raw)
            else:
                kw[f.name] = raw
        return cls(**kw)


@dataclass
class ResultTable:
    config: ExperimentConfig
    rows: list = field(default_factory=list)
    records: dict = field(default_factory=dict)

    def summary(self) -> list:
        """Per-point averages over converged runs with the discarded count."""
        out = []
        for point, grp in itertools.groupby(self.rows, key=lambda r: r.point):
            grp = list(grp)
            ok = [r for r in grp if r.status == CONVERGED]
            out.append(
                {
                    "point": point,
                    "N": grp[0].N,
                    "P": grp[0].P,
                    "gamma": grp[0].gamma,
                    "q": grp[0].q,
                    "p_fault": grp[0].p_fault,
                    "runs": len(grp),
                    "discarded": len(grp) - len(ok),
                    "mean_K": float(np.mean([r.K for r in ok])) if ok else float("nan"),
                    "mean_rho_ave": float(np.mean([r.rho_ave for r in ok])) if ok else float("nan"),
                    "mean_rho_asy": float(np.mean([r.rho_asy for r in ok])) if ok else float("nan"),
                }
            )
        return out

    def mean_K(self, point: int) -> float:
        for s in self.summary():
            if s["point"] == point:
                return s["mean_K"]
        raise KeyError(point)


def _nan_rates():
    return float("nan"), float("nan")


def _record_row(cfg, pt, run, run_id, rec, est, xi, stats) -> ResultRow:
    rho_ave, rho_asy = _nan_rates()
    if rec.K >= 1 and rec.errors[-1] > 0 and rec.errors[0] > 0:
        rates = rec.rates()
        rho_ave, rho_asy = rates.rho_ave, rates.rho_asy
    return ResultRow(
        run_id=run_id,
        point=pt.index,
        run=run,
        d=cfg.d,
        N=pt.N,
        P=pt.P,
        gamma=str(pt.gamma),
        q=pt.q,
        p_fault=pt.p_fault,
        variant=cfg.variant,
        weighting=cfg.weighting,
        solver=cfg.solver,
        status=rec.status,
        K=rec.K,
        rho_ave=rho_ave,
        rho_asy=rho_asy,
        n_faults=int(sum(rec.n_faults)),
        r_p=stats["r_p"],
        r_hat_p=stats["r_hat_p"],
        lam_min=est.lam_min if est else float("nan"),
        lam_max=est.lam_max if est else float("nan"),
        xi=float(xi) if xi is not None else float("nan"),
        message=rec.message,
        wall_time=rec.wall_time,
    )


def _error_row(cfg, index, key, run, run_id, message) -> ResultRow:
    S, P, gamma, p_fault = key
    return ResultRow(
        run_id=run_id, point=index, run=run, d=cfg.d, N=0, P=int(P), gamma=str(gamma), q=0,
        p_fault=float(p_fault), variant=cfg.variant, weighting=cfg.weighting, solver=cfg.solver,
        status=CONFIG_ERROR, K=0, rho_ave=float("nan"), rho_asy=float("nan"), n_faults=0,
        r_p=float("nan"), r_hat_p=float("nan"), lam_min=float("nan"), lam_max=float("nan"),
        xi=float("nan"), message=message,
    )


class _Setup:
    """Everything a point needs that does not depend on the run."""

    def __init__(self, cfg: ExperimentConfig, pt: Point):
        disc = discretize(pt.grid)
        self.A = disc.A
        self.system = diagonal_transform(disc.A)
        self.part = build_partition(pt.N, pt.P, pt.gamma)
        spec = PreconditionerSpec(cfg.variant, cfg.weighting, pt.gamma, pt.q, cfg.coarse_basis)
        if cfg.solver == "pcg" and not spec.symmetric:
            warnings.warn(
                f"{cfg.variant}/{cfg.weighting} with gamma={pt.gamma} is not symmetric; "
                "standard CG has no guarantee here, consider solver = fpcg",
                stacklevel=2,
            )
        self.precond = build_preconditioner(self.system.A, self.part, spec)
        self.solvers = list(self.precond.solvers)
        self.estimate: SpectralEstimate | None = None
        if cfg.solver == "richardson" and cfg.xi_rule == "optimal":
            self.estimate = estimate_extremes(self.system.A, self.precond)
        scale = self.system.scale
        self.error_fn = lambda xh: energy_norm(self.A, scale * xh)


def run_point(cfg: ExperimentConfig, pt: Point, setup: _Setup | None = None):
    """All runs of one point; returns ``(rows, records)``."""
    setup = setup or _Setup(cfg, pt)
    est = setup.estimate
    xi = None
    if cfg.solver == "richardson":
        xi = est.xi_opt if cfg.xi_rule == "optimal" else cfg.xi
    max_iter = cfg.max_iter
    if max_iter <= 0:
        max_iter = 100 * iterations_from_rate(est.rate_opt) if est and est.rate_opt > 0 else 10_000
    rows, records = [], {}
    sys_ = setup.system
    for run in range(cfg.runs):
        run_id = f"p{pt.index:03d}_r{run:03d}"
        ss = np.random.SeedSequence([cfg.seed, pt.index, run])
        x_seed, f_seed = ss.spawn(2)
        x0 = random_initial_iterate(pt.N, x_seed, setup.A) / sys_.scale
        setup.precond.solvers[:] = setup.solvers
        schedule = FaultSchedule(pt.P, pt.p_fault, np.random.default_rng(f_seed))
        engine = FaultEngine(setup.precond, schedule, sys_.b, check_shadow=cfg.check_shadow)
        kw = dict(tol=cfg.tol, max_iter=max_iter, error_fn=setup.error_fn, faults=engine)
        if cfg.solver == "richardson":
            rec = richardson(sys_.A, sys_.b, setup.precond, xi, x0, **kw)
        else:
            rec = pcg(sys_.A, sys_.b, setup.precond, x0, flexible=cfg.solver == "fpcg", **kw)
        setup.precond.solvers[:] = setup.solvers
        stats = fault_statistics(schedule.alive_counts, pt.P)
        rows.append(_record_row(cfg, pt, run, run_id, rec, est, xi, stats))
        records[run_id] = rec
    return rows, records


def run_experiment(cfg: ExperimentConfig, progress=None) -> ResultTable:
    """Evaluate every config point; configuration errors become error rows."""
    table = ResultTable(cfg)
    cache: dict = {}
    for index, key in enumerate(cfg.point_keys()):
        try:
            pt = resolve_point(cfg, index, key)
            skey = (pt.S, pt.P, pt.gamma)
            if skey not in cache:
                cache = {skey: _Setup(cfg, pt)}
            rows, records = run_point(cfg, pt, cache[skey])
        except SfcddError as exc:
            rows = [_error_row(cfg, index, key, 0, f"p{index:03d}_err", str(exc))]
            records = {}
        table.rows.extend(rows)
        table.records.update(records)
        if progress:
            progress(index, rows)
    return table


# ---------------------------------------------------------------------------
# output


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit_results(table: ResultTable, out_dir: str | Path, fmt: str = "csv") -> list:
    """Write the run table, error curves and per-run records; returns the paths.

    ``fmt="csv"`` writes ``summary.csv`` and one ``curve_<id>.csv`` per run,
    ``fmt="json"`` writes ``summary.json``. Both write ``run_<id>.json`` with
    the full record (including the fault log) and ``config.txt``.
    """
    if fmt not in ("csv", "json"):
        raise ConfigurationError(f"format must be csv or json, got {fmt!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    cols = ResultRow.columns()
    if fmt == "csv":
        path = out / "summary.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for r in table.rows:
                w.writerow([_fmt(getattr(r, c)) for c in cols])
        written.append(path)
        for run_id, rec in table.records.items():
            p = out / f"curve_{run_id}.csv"
            p.write_text(rec.to_csv())
            written.append(p)
    else:
        path = out / "summary.json"
        path.write_text(json.dumps({"rows": [asdict(r) for r in table.rows], "points": table.summary()}, indent=1))
        written.append(path)
    for run_id, rec in table.records.items():
        p = out / f"run_{run_id}.json"
        p.write_text(rec.to_json())
        written.append(p)
    p = out / "config.txt"
    p.write_text(table.config.to_text())
    written.append(p)
    return written


def load_results(out_dir: str | Path) -> ResultTable:
    """Inverse of :func:`emit_results`."""
    out = Path(out_dir)
    cfg = load_config(out / "config.txt")
    table = ResultTable(cfg)
    if (out / "summary.csv").exists():
        with (out / "summary.csv").open() as fh:
            table.rows = [ResultRow.from_strings(row) for row in csv.DictReader(fh)]
    else:
        data = json.loads((out / "summary.json").read_text())
        table.rows = [ResultRow(**row) for row in data["rows"]]
    for r in table.rows:
        p = out / f"run_{r.run_id}.json"
        if p.exists():
            table.records[r.run_id] = ConvergenceRecord.from_json(p.read_text())
    return table


def with_overrides(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    return replace(cfg, **kw)
