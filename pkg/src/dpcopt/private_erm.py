"""Private AC-SA and the two ERM reductions (doubling and regularization).

The solver smooths the empirical objective by ball convolution, runs AC-SA
with the subsampled noised oracle, and accounts the spend with the tCDP
pipeline.  Data-independent quadratic terms ride along as the composite
prox term ``h`` so they cost no privacy budget; the noise scale is always
calibrated to the data-dependent family's Lipschitz constant alone.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .accountant import (
    DEFAULT_CONSTANTS,
    ZERO_SPEND,
    AccountantConstants,
    ApproxDpBudget,
    add_spend,
    calibrate_sigma,
    spent_budget,
)
from .acsa import acsa_run
from .errors import InvalidInputError, PreconditionError
from .problem import Dataset, Domain, LossFamily, QuadraticOffset
from .sampling import RandomStream
from .smoothing import SmoothedOracle, SmoothedOracleConfig


@dataclass(frozen=True)
class PrivateAcsaConfig:
    """A fully pinned run: steps, batch, noise scale, smoothing radius, modulus.

    ``mu`` is the total strong convexity (data term plus any composite
    offset's 2*lambda); ``L_override`` replaces the default smoothness
    G sqrt(d)/r, which is mandatory when r = 0.
    """

    T: int
    B: int
    sigma: float
    r: float
    mu: float
    budget: ApproxDpBudget | None
    consts: AccountantConstants = DEFAULT_CONSTANTS
    L_override: float | None = None

    def __post_init__(self):
        if self.T < 1 or self.B < 1:
            raise InvalidInputError("T and B must be >= 1")
        if self.sigma < 0 or self.r < 0:
            raise InvalidInputError("sigma and r must be >= 0")
        if self.mu <= 0:
            raise PreconditionError(
                f"private AC-SA requires a strongly convex objective, got mu={self.mu}"
            )


@dataclass
class ErmResult:
    point: np.ndarray
    grad_evals: int
    spent: ApproxDpBudget
    phases: list[dict] = field(default_factory=list)


def smoothness_default(G: float, d: int, r: float) -> float:
    """Smoothness of the ball-convolved objective: G sqrt(d) / r."""
    if r <= 0:
        raise InvalidInputError("smoothing radius must be > 0 for the default smoothness")
    return G * math.sqrt(d) / r


def private_acsa(family: LossFamily, data: Dataset, domain: Domain, w0: np.ndarray,
                 cfg: PrivateAcsaConfig, rng: RandomStream,
                 h: QuadraticOffset | None = None) -> ErmResult:
    """Run Private AC-SA from w0 under a pinned configuration.

    The accountant validates the configuration and certifies the spend
    before any data is touched.  With ``cfg.budget=None`` the run is a
    non-private diagnostic (no validation, spend recorded as zero) -- used
    by degenerate-oracle tests only.
    """
    w0 = np.asarray(w0, dtype=float)
    G = family.lipschitz_G
    if h is None:
        h = QuadraticOffset.zero(domain.dim)
    if cfg.budget is not None:
        cfg.budget.require_positive()
        calibrate_sigma(G, cfg.B, cfg.T, data.size_N, cfg.budget, cfg.consts)
        spent = spent_budget(G, cfg.sigma, cfg.B, cfg.T, data.size_N, cfg.budget.delta)
        if spent.epsilon > cfg.budget.epsilon:
            raise PreconditionError(
                f"configured sigma spends eps={spent.epsilon:.6g} > "
                f"budget {cfg.budget.epsilon:.6g}"
            )
    else:
        spent = ZERO_SPEND
    L = cfg.L_override if cfg.L_override is not None else smoothness_default(G, domain.dim, cfg.r)
    oracle = SmoothedOracle(
        SmoothedOracleConfig(cfg.r, cfg.B, cfg.sigma, data, family, domain), rng
    )
    run = acsa_run(oracle, cfg.T, w0, cfg.mu, L, h, domain)
    assert oracle.grad_evals == cfg.B * cfg.T
    return ErmResult(point=run.point, grad_evals=oracle.grad_evals, spent=spent)


def erm_strongly_schedule(G: float, D: float, mu: float, N: int, d: int,
                          budget: ApproxDpBudget,
                          consts: AccountantConstants = DEFAULT_CONSTANTS,
                          ) -> PrivateAcsaConfig | None:
    """Steps/batch/noise/radius for the strongly convex ERM solve.

    Returns None in the trivial regime d log(1/delta) > (eps N)^2, where any
    feasible point already meets the bound and the caller outputs its start.
    """
    budget.require_positive()
    eps, delta = budget.epsilon, budget.delta
    log_inv_delta = math.log(1.0 / delta)
    if d * log_inv_delta > (eps * N) ** 2:
        return None
    T = math.ceil(100.0 * eps * N / (consts.c1 * d ** 0.25 * math.sqrt(log_inv_delta)))
    B = math.ceil(math.sqrt(eps * N * N / (consts.c1 * T))
                  + eps * eps * N * N / (d * log_inv_delta * T))
    assert 10 * B <= N, f"schedule produced B={B} > N/10 (N={N})"
    assert eps <= consts.c1 * B * B * T / (N * N) + 1e-12
    sigma = calibrate_sigma(G, B, T, N, budget, consts)
    r = D / (T * d ** 0.25)
    return PrivateAcsaConfig(T=T, B=B, sigma=sigma, r=r, mu=mu,
                             budget=budget, consts=consts)


def doubling_k(N: int) -> int:
    """Number of warm-started repetitions: ceil(log2 log2 N^3)."""
    if N < 2:
        raise InvalidInputError(f"need N >= 2, got {N}")
    return max(1, math.ceil(math.log2(3.0 * math.log2(N))))


def doubling_schedule(budget: ApproxDpBudget, k: int) -> list[ApproxDpBudget]:
    """Phase budgets (eps/2^(k+1-i), delta/2^(k+1-i)); strictly increasing, sums below the total."""
    return [budget.split(0.5 ** (k + 1 - i)) for i in range(1, k + 1)]


def doubling_reduction(solver, family: LossFamily, data: Dataset, domain: Domain,
                       w0: np.ndarray, budget: ApproxDpBudget,
                       k_override: int | None = None) -> ErmResult:
    """Warm-started repetitions with geometrically increasing budgets.

    ``solver(family, data, domain, w_start, phase_budget, phase_index)``
    must return an :class:`ErmResult` honoring its sub-budget.  Total spend
    is the sum of phase spends (basic composition), below the requested
    budget because the geometric schedule sums to (1 - 2^-k) of it.
    """
    budget.require_positive()
    k = k_override if k_override is not None else doubling_k(data.size_N)
    if k < 1:
        raise InvalidInputError(f"need at least one phase, got k={k}")
    w = np.asarray(w0, dtype=float)
    total = ZERO_SPEND
    evals = 0
    phases: list[dict] = []
    for i, sub in enumerate(doubling_schedule(budget, k), start=1):
        try:
            res = solver(family, data, domain, w, sub, i)
        except Exception as exc:
            raise RuntimeError(f"doubling phase {i}/{k} failed: {exc}") from exc
        w = res.point
        evals += res.grad_evals
        total = add_spend(total, res.spent)
        rec = {"phase": i, "eps_i": sub.epsilon, "delta_i": sub.delta,
               "gradient_count": res.grad_evals}
        if res.phases:
            rec["inner"] = res.phases
        phases.append(rec)
    assert total.epsilon <= budget.epsilon + 1e-12
    assert total.delta <= budget.delta + 1e-15
    return ErmResult(point=w, grad_evals=evals, spent=total, phases=phases)


def _schedule_phase_record(cfg: PrivateAcsaConfig) -> dict:
    return {"T": cfg.T, "B": cfg.B, "sigma": cfg.sigma, "r": cfg.r, "mu": cfg.mu}


def erm_strongly(family: LossFamily, data: Dataset, domain: Domain, w0: np.ndarray,
                 budget: ApproxDpBudget, rng: RandomStream,
                 consts: AccountantConstants = DEFAULT_CONSTANTS,
                 h: QuadraticOffset | None = None,
                 mu_total: float | None = None) -> ErmResult:
    """Strongly convex ERM: doubling reduction over the scheduled Private AC-SA.

    ``h`` carries any data-independent quadratic term of the objective (it
    rides in the prox at zero privacy cost); ``mu_total`` defaults to the
    family modulus plus the offset's contribution.
    """
    mu = mu_total if mu_total is not None else (
        family.strong_mu + (h.strong_mu if h is not None else 0.0)
    )
    if mu <= 0:
        raise PreconditionError("erm_strongly needs a strongly convex objective")
    G = family.lipschitz_G
    D = domain.diameter_D
    d = domain.dim

    def phase_solver(fam, dat, dom, w_start, sub_budget, phase_i):
        cfg = erm_strongly_schedule(G, D, mu, dat.size_N, d, sub_budget, consts)
        if cfg is None:
            return ErmResult(point=np.asarray(w_start, dtype=float), grad_evals=0,
                             spent=ZERO_SPEND, phases=[{"trivial_regime": True}])
        res = private_acsa(fam, dat, dom, w_start, cfg, rng.child(phase_i), h=h)
        res.phases = [_schedule_phase_record(cfg)]
        return res

    return doubling_reduction(phase_solver, family, data, domain, w0, budget)


def general_regularizer_weight(G: float, D: float, N: int, d: int,
                               budget: ApproxDpBudget, u_const: float = 1.0) -> float:
    """The reduction's offset weight u = G sqrt(d log(1/delta)) / (D eps N)."""
    return u_const * G * math.sqrt(d * math.log(1.0 / budget.delta)) / (
        D * budget.epsilon * N
    )


def erm_general(family: LossFamily, data: Dataset, domain: Domain, w0: np.ndarray,
                budget: ApproxDpBudget, rng: RandomStream,
                consts: AccountantConstants = DEFAULT_CONSTANTS,
                u_const: float = 1.0,
                h: QuadraticOffset | None = None) -> ErmResult:
    """General convex ERM via regularization to the strongly convex case.

    Adds u||w - w0||^2 (kept as the prox term, zero sensitivity) and runs
    the doubling-wrapped strongly convex solver on the augmented objective.
    When uD >= G the target accuracy is trivial and w0 itself is returned.
    The offset is centered at the start point so the distance entering the
    risk bound is to w0 rather than to an arbitrary origin.
    """
    budget.require_positive()
    w0 = np.asarray(w0, dtype=float)
    G = family.lipschitz_G
    D = domain.diameter_D
    u = general_regularizer_weight(G, D, data.size_N, domain.dim, budget, u_const)
    if u * D >= G:
        return ErmResult(point=w0, grad_evals=0, spent=ZERO_SPEND,
                         phases=[{"degenerate": True, "u": u}])
    offset = QuadraticOffset(u, w0)
    if h is not None:
        offset = combine_offsets(offset, h)
    return erm_strongly(family, data, domain, w0, budget, rng, consts,
                        h=offset, mu_total=family.strong_mu + offset.strong_mu)


def combine_offsets(a: QuadraticOffset, b: QuadraticOffset) -> QuadraticOffset:
    """Sum of two quadratic offsets, re-centered: equal up to an additive constant."""
    if a.coeff_lambda == 0:
        return b
    if b.coeff_lambda == 0:
        return a
    lam = a.coeff_lambda + b.coeff_lambda
    center = (a.coeff_lambda * a.center + b.coeff_lambda * b.center) / lam
    return QuadraticOffset(lam, center)
