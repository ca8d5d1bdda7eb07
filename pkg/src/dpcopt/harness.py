"""Experiment runner: trials, exact oracles, rate fitting, and report emission.

A report is a plain dict written as JSON (sorted keys) plus a one-row-per-
trial CSV; with ``record_timing=False`` the bytes depend only on the config
and seeds.  Excess empirical risk is measured against a certified exact ERM
solve; excess population loss (for SCO runs) against a fixed held-out
Monte-Carlo sample of the task's population.
"""
from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .accountant import (
    DEFAULT_CONSTANTS,
    AccountantConstants,
    ApproxDpBudget,
)
from .baseline import DESK_STEP_CAP, dpsgd_baseline, dpsgd_chains
from .errors import InvalidInputError, SolverError
from .localization import localize, sco_strongly
from .private_erm import (
    ErmResult,
    erm_general,
    erm_strongly_schedule,
    private_acsa,
)
from .problem import (
    BallDomain,
    BoxDomain,
    Dataset,
    Domain,
    HingeLoss,
    LossFamily,
    QuadraticDistanceLoss,
    QuadraticOffset,
    regularize,
)
from .sampling import RandomStream
from .tasks import POPULATION_STREAM, PlantedHingePopulation, Task, make_task

SCHEMA_VERSION = 1

ALGORITHMS = ("private-acsa", "erm-general", "localize", "sco-strongly", "dpsgd-baseline")


# ---------------------------------------------------------------------------
# Exact empirical optimum
# ---------------------------------------------------------------------------

def exact_erm_oracle(family: LossFamily, data: Dataset, domain: Domain,
                     offset: QuadraticOffset | None = None,
                     tol: float = 1e-8) -> tuple[np.ndarray, float]:
    """High-accuracy non-private ERM solve used as ground truth.

    Quadratic families are solved in closed form.  Hinge families go through
    a conic epigraph formulation (certified by the solver's duality gap and
    a direct objective recomputation).  Desk-scale problems only.
    """
    if data.dim > 100 or data.size_N > 100_000:
        raise InvalidInputError("exact oracle is desk-scale only (d <= 100, N <= 1e5)")
    if isinstance(family, QuadraticDistanceLoss):
        return _exact_quadratic(family, data, domain, offset)
    if isinstance(family, HingeLoss):
        return _exact_hinge(family, data, domain, offset, tol)
    w = _subgradient_solve(family, data, domain, offset, iters=1_000_000)
    return w, _objective(family, data, offset, w)


def _objective(family: LossFamily, data: Dataset, offset: QuadraticOffset | None,
               w: np.ndarray) -> float:
    val = family.erm_value(w, data)
    if offset is not None:
        val += offset.value(w)
    return float(val)


def _exact_quadratic(family, data, domain, offset):
    mean = data.X.mean(axis=0)
    if offset is not None and offset.coeff_lambda > 0:
        lam = offset.coeff_lambda
        target = (mean + lam * offset.center) / (1.0 + lam)
    else:
        target = mean
    # isotropic quadratic: the constrained optimum is the projected target
    w = domain.project(target)
    return w, _objective(family, data, offset, w)


def _exact_hinge(family, data, domain, offset, tol):
    import cvxpy as cp

    d = data.dim
    w = cp.Variable(d)
    xi = cp.Variable(data.size_N)
    obj = cp.sum(xi) / data.size_N
    if offset is not None and offset.coeff_lambda > 0:
        obj = obj + offset.coeff_lambda * cp.sum_squares(w - offset.center)
    cons = [xi >= 0, xi >= 1.0 - cp.multiply(data.y, data.X @ w)]
    if isinstance(domain, BallDomain):
        cons.append(cp.norm(w - domain.center, 2) <= domain.radius)
    elif isinstance(domain, BoxDomain):
        cons += [w >= domain.lower, w <= domain.upper]
    else:
        raise InvalidInputError("exact hinge oracle supports ball and box domains")
    prob = cp.Problem(cp.Minimize(obj), cons)
    prob.solve(solver=cp.CLARABEL)
    if prob.status != cp.OPTIMAL:
        raise SolverError(f"exact ERM solve did not converge: status={prob.status}")
    w_star = domain.project(np.asarray(w.value, dtype=float))
    value = _objective(family, data, offset, w_star)
    if abs(value - float(prob.value)) > max(100 * tol, 1e-6 * (1.0 + abs(value))):
        raise SolverError(
            f"exact ERM certificate failed: recomputed {value} vs solver {prob.value}"
        )
    return w_star, value


def _subgradient_solve(family, data, domain, offset, iters: int,
                       w0: np.ndarray | None = None) -> np.ndarray:
    """Deterministic averaged projected subgradient; generic fallback."""
    w = np.zeros(data.dim) if w0 is None else np.asarray(w0, dtype=float)
    w = domain.project(w)
    best, best_val = w.copy(), _objective(family, data, offset, w)
    acc = np.zeros_like(w)
    D, G = domain.diameter_D, family.lipschitz_G
    for t in range(1, iters + 1):
        g = family.subgrad_mean(w, data.X, data.y)
        if offset is not None:
            g = g + offset.grad(w)
        w = domain.project(w - (D / (G * math.sqrt(t))) * g)
        acc += w
        if t % 1000 == 0 or t == iters:
            cand = acc / t
            val = _objective(family, data, offset, cand)
            if val < best_val:
                best, best_val = cand, val
    return best


# ---------------------------------------------------------------------------
# Population reference (SCO ground truth)
# ---------------------------------------------------------------------------

@dataclass
class PopulationReference:
    """A frozen Monte-Carlo sample of the population with its estimated optimum."""

    X: np.ndarray            # float32, (n_mc, d)
    y: np.ndarray            # float32 labels
    f_star: float
    w_star: np.ndarray
    n_mc: int

    def value(self, w: np.ndarray) -> float:
        margins = (self.X @ np.asarray(w, dtype=np.float32)) * self.y
        return float(np.maximum(0.0, 1.0 - margins, dtype=np.float32).mean(dtype=np.float64))


def build_population_reference(pop: PlantedHingePopulation, domain: Domain,
                               n_mc: int, seed: int = 0,
                               polish_iters: int = 1500) -> PopulationReference:
    """Draw the held-out sample and locate its best feasible hinge loss.

    The planted symmetry puts the population optimum on the planted ray, so
    a golden-section search along it nails the reference minimum; a short
    full-dimensional subgradient polish then confirms no materially better
    feasible point exists off the ray.
    """
    gen = RandomStream(seed, POPULATION_STREAM).gen
    data = pop.sample(n_mc, gen)
    X32 = data.X.astype(np.float32)
    y32 = data.y.astype(np.float32)
    radius = domain.max_dist(np.zeros(domain.dim))
    z = (X32 @ pop.direction.astype(np.float32)) * y32

    def ray_value(t: float) -> float:
        return float(np.maximum(0.0, 1.0 - t * z, dtype=np.float32).mean(dtype=np.float64))

    t_star = _golden_section(ray_value, 0.0, radius, tol=1e-9)
    w_star = domain.project(t_star * pop.direction)
    f_ray = ray_value(t_star)

    ref = PopulationReference(X32, y32, f_ray, w_star, n_mc)
    fam = HingeLoss(1.0)
    mc_data = Dataset(data.X, data.y)
    w_polish = _subgradient_solve(fam, mc_data, domain, None,
                                  iters=polish_iters, w0=w_star)
    f_polish = ref.value(w_polish)
    if f_polish < f_ray:
        ref.f_star = f_polish
        ref.w_star = w_polish
    return ref


def _golden_section(f, lo: float, hi: float, tol: float) -> float:
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - phi * (b - a)
    d_ = a + phi * (b - a)
    fc, fd = f(c), f(d_)
    while b - a > tol:
        if fc <= fd:
            b, d_, fd = d_, c, fc
            c = b - phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d_, fd
            d_ = a + phi * (b - a)
            fd = f(d_)
    return (a + b) / 2.0


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    task: str
    algo: str
    N: int
    d: int
    eps: float
    delta: float
    trials: int = 1
    seed: int = 0
    seeds: list[int] | None = None
    out: str | None = None
    radius: float = 1.0
    label_flip: float = 0.1
    mu: float = 1.0                 # modulus for strongly convex task variants
    c1: float = DEFAULT_CONSTANTS.c1
    c2: float = DEFAULT_CONSTANTS.c2
    step_cap: int | None = DESK_STEP_CAP
    population_mc: int = 0          # >0: evaluate excess population loss
    redraw_data: bool = False       # fresh dataset per trial (SCO experiments)
    w0_scale: float = 0.0           # start at w0_scale * ball radius along a fixed direction
    record_timing: bool = True

    def __post_init__(self):
        if self.trials < 1:
            raise InvalidInputError("need trials >= 1")
        if self.algo not in ALGORITHMS:
            raise InvalidInputError(f"unknown algo {self.algo!r}; expected {ALGORITHMS}")

    @property
    def consts(self) -> AccountantConstants:
        return AccountantConstants(self.c1, self.c2)

    @property
    def budget(self) -> ApproxDpBudget:
        return ApproxDpBudget(self.eps, self.delta).require_positive()

    def effective_seeds(self) -> list[int]:
        if self.seeds is not None:
            return list(self.seeds)
        return [self.seed + i for i in range(self.trials)]


@dataclass
class TrialResult:
    seed: int
    point_digest: str
    excess_empirical_risk: float
    gradient_count: int
    spent_eps: float
    spent_delta: float
    excess_population_loss: float | None = None
    wall_time: float | None = None
    cap_applied: bool = False
    phases: list[dict] = field(default_factory=list)

    def row(self) -> dict:
        return {
            "seed": self.seed,
            "point_digest": self.point_digest,
            "excess_empirical_risk": self.excess_empirical_risk,
            "excess_population_loss": self.excess_population_loss,
            "gradient_count": self.gradient_count,
            "spent_eps": self.spent_eps,
            "spent_delta": self.spent_delta,
            "wall_time": self.wall_time,
        }


def _digest(w: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(w, dtype=float).tobytes()).hexdigest()[:16]


def _task_for(cfg: ExperimentConfig, data_seed: int) -> Task:
    kwargs = {"radius": cfg.radius}
    if cfg.task in ("hinge", "strongly-convex-hinge"):
        kwargs["label_flip"] = cfg.label_flip
        # the planted direction is part of the population: fixed per config
        kwargs["direction_seed"] = cfg.seed
    if cfg.task == "strongly-convex-hinge":
        kwargs["mu"] = cfg.mu
    return make_task(cfg.task, cfg.N, cfg.d, data_seed, **kwargs)


def _start_point(cfg: ExperimentConfig, task: Task) -> np.ndarray:
    w0 = np.zeros(cfg.d)
    if cfg.w0_scale != 0.0:
        w0[0] = cfg.w0_scale * cfg.radius
    return task.domain.project(w0)


def run_trial(cfg: ExperimentConfig, task: Task, w0: np.ndarray,
              seed: int) -> tuple[np.ndarray, int, ApproxDpBudget, list[dict], bool]:
    """Dispatch one algorithm run; returns (point, count, spent, phases, capped)."""
    rng = RandomStream(seed, stream_id=0)
    budget = cfg.budget
    consts = cfg.consts
    fam, dom, dat = task.family, task.domain, task.data
    if cfg.algo == "private-acsa":
        mu_total = task.strong_mu
        sched = erm_strongly_schedule(fam.lipschitz_G, dom.diameter_D, mu_total,
                                      dat.size_N, cfg.d, budget, consts)
        if sched is None:
            return w0, 0, ApproxDpBudget(0.0, 0.0), [{"trivial_regime": True}], False
        res = private_acsa(fam, dat, dom, w0, sched, rng, h=task.offset)
        return res.point, res.grad_evals, res.spent, [
            {"T": sched.T, "B": sched.B, "sigma": sched.sigma, "r": sched.r,
             "gradient_count": res.grad_evals}], False
    if cfg.algo == "erm-general":
        res = erm_general(fam, dat, dom, w0, budget, rng, consts, h=task.offset)
        return res.point, res.grad_evals, res.spent, res.phases, False
    if cfg.algo == "localize":
        res = localize(fam, dat, dom, w0, budget, rng, consts)
        return res.point, res.grad_evals, res.spent, res.phases, False
    if cfg.algo == "sco-strongly":
        fam_eff = fam if task.offset is None else regularize(fam, task.offset, dom)
        res = sco_strongly(fam_eff, dat, dom, w0, budget, rng, consts)
        return res.point, res.grad_evals, res.spent, res.phases, False
    if cfg.algo == "dpsgd-baseline":
        res = dpsgd_baseline(fam, dat, dom, budget, rng, w0=w0,
                             step_cap=cfg.step_cap, h=task.offset)
        return res.point, res.grad_evals, res.spent, [
            {"T": res.T, "B": 1, "gradient_count": res.grad_evals}], res.cap_applied
    raise InvalidInputError(f"unhandled algorithm {cfg.algo}")


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Run all trials, aggregate, and (optionally) write JSON/CSV artifacts."""
    seeds = cfg.effective_seeds()
    pop_ref: PopulationReference | None = None
    task = _task_for(cfg, data_seed=cfg.seed)
    oracle_cache: dict[int, tuple[np.ndarray, float]] = {}

    if cfg.population_mc > 0:
        if task.population is None:
            raise InvalidInputError(f"task {cfg.task!r} has no population model")
        pop_ref = build_population_reference(task.population, task.domain,
                                             cfg.population_mc, seed=cfg.seed)

    trials: list[TrialResult] = []
    for seed in seeds:
        data_seed = seed if cfg.redraw_data else cfg.seed
        if cfg.redraw_data:
            task_i = _task_for(cfg, data_seed=data_seed)
        else:
            task_i = task
        if data_seed not in oracle_cache:
            oracle_cache[data_seed] = exact_erm_oracle(
                task_i.family, task_i.data, task_i.domain, task_i.offset)
        _, f_star = oracle_cache[data_seed]
        w0 = _start_point(cfg, task_i)
        t0 = time.perf_counter()
        point, count, spent, phases, capped = run_trial(cfg, task_i, w0, seed)
        wall = time.perf_counter() - t0
        excess = task_i.objective(point) - f_star
        pop_excess = None
        if pop_ref is not None:
            pop_excess = pop_ref.value(point) - pop_ref.f_star
        trials.append(TrialResult(
            seed=seed,
            point_digest=_digest(point),
            excess_empirical_risk=float(excess),
            gradient_count=int(count),
            spent_eps=spent.epsilon,
            spent_delta=spent.delta,
            excess_population_loss=pop_excess,
            wall_time=wall if cfg.record_timing else None,
            cap_applied=capped,
            phases=phases,
        ))

    report = _build_report(cfg, trials, pop_ref)
    if cfg.out:
        write_report(report, cfg.out)
    return report


def _build_report(cfg: ExperimentConfig, trials: list[TrialResult],
                  pop_ref: PopulationReference | None) -> dict:
    ex = np.array([t.excess_empirical_risk for t in trials])
    counts = np.array([t.gradient_count for t in trials])
    agg = {
        "mean_excess_empirical_risk": float(ex.mean()),
        "std_excess_empirical_risk": float(ex.std(ddof=1)) if len(ex) > 1 else 0.0,
        "mean_gradient_count": float(counts.mean()),
        "max_gradient_count": int(counts.max()),
    }
    pop = [t.excess_population_loss for t in trials]
    if all(p is not None for p in pop) and pop:
        arr = np.array(pop, dtype=float)
        agg["mean_excess_population_loss"] = float(arr.mean())
        agg["std_excess_population_loss"] = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
    cfg_dict = {k: v for k, v in vars(cfg).items()}
    report = {
        "schema_version": SCHEMA_VERSION,
        "config": cfg_dict,
        "trials": [t.row() for t in trials],
        "per_phase": [{"seed": t.seed, "phases": t.phases} for t in trials],
        "aggregates": agg,
    }
    if pop_ref is not None:
        report["population_reference"] = {"n_mc": pop_ref.n_mc, "f_star": pop_ref.f_star}
    return report


def check_report(report: dict) -> list[str]:
    """Acceptance-style consistency checks; returns failure descriptions."""
    failures: list[str] = []
    cfg = report["config"]
    for t, ph in zip(report["trials"], report["per_phase"]):
        if t["spent_eps"] > cfg["eps"] + 1e-9 or t["spent_delta"] > cfg["delta"] + 1e-12:
            failures.append(f"seed {t['seed']}: spent budget exceeds request")
        recorded = _sum_phase_counts(ph["phases"])
        if recorded is not None and recorded != t["gradient_count"]:
            failures.append(
                f"seed {t['seed']}: gradient count {t['gradient_count']} != "
                f"sum of phase counts {recorded}"
            )
        if t["excess_empirical_risk"] < -1e-6:
            failures.append(f"seed {t['seed']}: negative excess risk (oracle bug?)")
    return failures


def _sum_phase_counts(phases: list[dict]) -> int | None:
    total = 0
    seen = False
    for ph in phases:
        if "gradient_count" in ph:
            total += ph["gradient_count"]
            seen = True
    return total if seen else None


# ---------------------------------------------------------------------------
# Report I/O and rate fitting
# ---------------------------------------------------------------------------

def write_report(report: dict, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = report["config"]
    stem = f"{cfg['task']}_{cfg['algo']}_n{cfg['N']}_d{cfg['d']}_eps{cfg['eps']}"
    json_path = out / f"{stem}.json"
    json_path.write_text(json.dumps(report, sort_keys=True, indent=1, default=_json_default))
    csv_path = out / f"{stem}.csv"
    rows = [t for t in report["trials"]]
    cols = ["seed", "point_digest", "excess_empirical_risk", "excess_population_loss",
            "gradient_count", "spent_eps", "spent_delta", "wall_time"]
    lines = [",".join(cols)]
    for r in rows:
        lines.append(",".join("" if r[c] is None else repr(r[c]) if isinstance(r[c], float)
                              else str(r[c]) for c in cols))
    csv_path.write_text("\n".join(lines) + "\n")
    return json_path


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def fit_loglog_slope(xs, ys) -> float:
    """Least-squares slope of log y against log x."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise InvalidInputError("log-log fit needs positive values")
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def write_loglog_svg(path: str | Path, xs, series: dict[str, list[float]],
                     title: str = "", width: int = 640, height: int = 480) -> Path:
    """Minimal dependency-free SVG log-log chart (one polyline per series)."""
    xs = np.asarray(xs, dtype=float)
    pal = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"]
    all_y = np.concatenate([np.asarray(v, dtype=float) for v in series.values()])
    lx, ly = np.log10(xs), np.log10(all_y)
    x0, x1 = lx.min(), lx.max()
    y0, y1 = ly.min(), ly.max()
    pad = 50

    def sx(v):
        return pad + (np.log10(v) - x0) / max(x1 - x0, 1e-12) * (width - 2 * pad)

    def sy(v):
        return height - pad - (np.log10(v) - y0) / max(y1 - y0, 1e-12) * (height - 2 * pad)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>',
             f'<text x="{width/2:.0f}" y="20" text-anchor="middle" '
             f'font-family="sans-serif" font-size="14">{title}</text>']
    for k, (name, ys) in enumerate(series.items()):
        ys = np.asarray(ys, dtype=float)
        pts = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in zip(xs, ys))
        color = pal[k % len(pal)]
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        for x, y in zip(xs, ys):
            parts.append(f'<circle cx="{sx(x):.1f}" cy="{sy(y):.1f}" r="3" fill="{color}"/>')
        parts.append(f'<text x="{width - pad}" y="{30 + 16 * k}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="12" fill="{color}">{name}</text>')
    for v in np.unique(np.round(np.linspace(x0, x1, 5))):
        parts.append(f'<text x="{pad + (v - x0) / max(x1 - x0, 1e-12) * (width - 2 * pad):.0f}" '
                     f'y="{height - pad / 2:.0f}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="11">1e{int(v)}</text>')
    parts.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(parts))
    return path
