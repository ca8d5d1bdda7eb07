"""Iterative localization for private stochastic convex optimization.

Phase i solves a regularized ERM over a ball of radius 2 G eta_i N_i around
the previous output, on a fresh contiguous block of N_i samples, with budget
(eps/2^i, delta/2^i).  The regularizer 1/(eta_i N_i) ||w - w_{i-1}||^2 is
data-independent and rides in the AC-SA prox term; the ball radii shrink by
2^6 per phase, so a logarithmic number of phases pins down the optimum.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .accountant import (
    DEFAULT_CONSTANTS,
    ZERO_SPEND,
    AccountantConstants,
    ApproxDpBudget,
    add_spend,
    calibrate_sigma,
)
from .errors import InvalidInputError
from .private_erm import ErmResult, PrivateAcsaConfig, private_acsa
from .problem import (
    BallIntersectionDomain,
    Dataset,
    Domain,
    LossFamily,
    QuadraticOffset,
)
from .sampling import RandomStream

# Phases need B <= N/10 for the accountant, and the scheduled batch is never
# below 1, so blocks smaller than this cannot be solved privately; the loop
# stops there and the tail samples join the last executed phase.
MIN_PHASE_SAMPLES = 10


@dataclass(frozen=True)
class LocalizationPhase:
    i: int
    eps_i: float
    delta_i: float
    N_i: int
    eta_i: float
    ball_radius_i: float
    lambda_i: float


@dataclass(frozen=True)
class LocalizationSchedule:
    k: int
    eta: float
    phases: tuple[LocalizationPhase, ...]


def localization_eta(G: float, D: float, N: int, d: int, budget: ApproxDpBudget) -> float:
    """Base step parameter: (D/G) min(1/sqrt(N), eps/sqrt(d log(1/delta)))."""
    return (D / G) * min(
        1.0 / math.sqrt(N),
        budget.epsilon / math.sqrt(d * math.log(1.0 / budget.delta)),
    )


def make_schedule(G: float, D: float, N: int, d: int,
                  budget: ApproxDpBudget) -> LocalizationSchedule:
    """The per-phase grid: halving budgets and samples, eta shrinking 32x per phase.

    Phases whose sample count floors to zero are dropped.
    """
    budget.require_positive()
    if N < 2:
        raise InvalidInputError(f"localization needs N >= 2, got {N}")
    eta = localization_eta(G, D, N, d, budget)
    k = math.ceil(math.log2(N))
    phases = []
    for i in range(1, k + 1):
        N_i = N >> i
        if N_i == 0:
            continue
        eta_i = eta / 2.0 ** (5 * i)
        phases.append(LocalizationPhase(
            i=i,
            eps_i=budget.epsilon / 2.0 ** i,
            delta_i=budget.delta / 2.0 ** i,
            N_i=N_i,
            eta_i=eta_i,
            ball_radius_i=2.0 * G * eta_i * N_i,
            lambda_i=1.0 / (eta_i * N_i),
        ))
    return LocalizationSchedule(k=k, eta=eta, phases=tuple(phases))


def phase_erm_schedule(G: float, N_i: int, d: int, eps_i: float, delta_i: float,
                       D_i: float, mu: float,
                       consts: AccountantConstants = DEFAULT_CONSTANTS,
                       ) -> PrivateAcsaConfig:
    """Steps/batch/noise for one localization phase's ERM solve.

    T takes the branch-minimum of the two step counts (the 400-multiplier is
    part of the schedule); B guarantees both B T >= N and the accountant's
    eps <= c1 B^2 T / N^2.
    """
    if N_i < 1:
        raise InvalidInputError(f"phase needs at least one sample, got {N_i}")
    budget = ApproxDpBudget(eps_i, delta_i).require_positive()
    log_inv_delta = math.log(1.0 / delta_i)
    T = 400 * math.ceil(min(
        math.sqrt(N_i) * d ** 0.25,
        N_i * eps_i / (d ** 0.25 * math.sqrt(log_inv_delta)),
    ))
    B = math.ceil(N_i / T + N_i * math.sqrt(eps_i / T))
    assert B * T >= N_i
    sigma = calibrate_sigma(G, B, T, N_i, budget, consts)
    r = D_i / (T * d ** 0.25)
    return PrivateAcsaConfig(T=T, B=B, sigma=sigma, r=r, mu=mu,
                             budget=budget, consts=consts)


def _phase_blocks(schedule: LocalizationSchedule, N: int,
                  min_samples: int) -> list[tuple[LocalizationPhase, int, int]]:
    """Contiguous disjoint index ranges per executable phase.

    Stops at the first phase too small to solve privately; flooring
    leftovers and the skipped tail extend the final executed block, so no
    sample is wasted.
    """
    out: list[tuple[LocalizationPhase, int, int]] = []
    start = 0
    for ph in schedule.phases:
        if ph.N_i < min_samples:
            break
        out.append((ph, start, start + ph.N_i))
        start += ph.N_i
    if not out:
        raise InvalidInputError(
            f"no localization phase is privately solvable with N={N}; "
            f"need at least {min_samples} samples in the first phase"
        )
    ph, s, _ = out[-1]
    out[-1] = (ph, s, N)
    return out


def localize(family: LossFamily, data: Dataset, domain: Domain, w0: np.ndarray,
             budget: ApproxDpBudget, rng: RandomStream,
             consts: AccountantConstants = DEFAULT_CONSTANTS,
             min_phase_samples: int = MIN_PHASE_SAMPLES) -> ErmResult:
    """Iteratively localized private SCO for a convex family."""
    budget.require_positive()
    w0 = np.asarray(w0, dtype=float)
    G = family.lipschitz_G
    schedule = make_schedule(G, domain.diameter_D, data.size_N, domain.dim, budget)
    blocks = _phase_blocks(schedule, data.size_N, min_phase_samples)
    w = w0
    evals = 0
    total = ZERO_SPEND
    phases: list[dict] = []
    for ph, start, stop in blocks:
        block = data.block(start, stop)
        ball = BallIntersectionDomain(domain, center=w, radius=ph.ball_radius_i)
        offset = QuadraticOffset(ph.lambda_i, w)
        mu_i = family.strong_mu + offset.strong_mu
        cfg = phase_erm_schedule(G, block.size_N, domain.dim, ph.eps_i, ph.delta_i,
                                 ball.diameter_D, mu_i, consts)
        try:
            res = private_acsa(family, block, ball, w, cfg, rng.child(ph.i), h=offset)
        except Exception as exc:
            raise RuntimeError(f"localization phase {ph.i} failed: {exc}") from exc
        if not ball.contains(res.point, tol=1e-7):
            raise RuntimeError(f"phase {ph.i} output escaped its localization ball")
        phases.append({
            "phase": ph.i, "eps_i": ph.eps_i, "delta_i": ph.delta_i,
            "N_i": block.size_N, "T": cfg.T, "B": cfg.B, "sigma": cfg.sigma,
            "r": cfg.r, "ball_radius": ph.ball_radius_i,
            "lambda": ph.lambda_i, "gradient_count": res.grad_evals,
        })
        w = res.point
        evals += res.grad_evals
        total = add_spend(total, res.spent)
    assert total.epsilon <= budget.epsilon + 1e-12
    assert total.delta <= budget.delta + 1e-15
    return ErmResult(point=w, grad_evals=evals, spent=total, phases=phases)


def sco_strongly(family: LossFamily, data: Dataset, domain: Domain, w0: np.ndarray,
                 budget: ApproxDpBudget, rng: RandomStream,
                 consts: AccountantConstants = DEFAULT_CONSTANTS,
                 k_override: int | None = None) -> ErmResult:
    """Strongly convex SCO: a doubling wrapper over localization.

    Wrapper phase i consumes floor(N / 2^(k+1-i)) fresh samples and budget
    (eps, delta)/2^(k+1-i), warm-starting from the previous output; counts
    and budgets both rise toward the final, most accurate phase.
    """
    budget.require_positive()
    if family.strong_mu <= 0:
        raise InvalidInputError("sco_strongly needs a strongly convex family")
    N = data.size_N
    k = k_override if k_override is not None else max(1, math.ceil(math.log2(3.0 * math.log2(N))))
    w = np.asarray(w0, dtype=float)
    evals = 0
    total = ZERO_SPEND
    phases: list[dict] = []
    start = 0
    carried = 0
    for i in range(1, k + 1):
        frac = 0.5 ** (k + 1 - i)
        n_i = int(N * frac) + carried
        if i == k:
            n_i = N - start  # trailing flooring leftovers join the last phase
        # a phase must feed localize at least one solvable inner phase
        if n_i // 2 < MIN_PHASE_SAMPLES and i < k:
            carried = n_i
            phases.append({"wrapper_phase": i, "skipped_too_small": n_i})
            continue
        carried = 0
        sub = budget.split(frac)
        block = data.block(start, start + n_i)
        start += n_i
        res = localize(family, block, domain, w, sub, rng.child(i), consts)
        phases.append({"wrapper_phase": i, "eps_i": sub.epsilon, "delta_i": sub.delta,
                       "N_i": n_i, "gradient_count": res.grad_evals,
                       "inner": res.phases})
        w = res.point
        evals += res.grad_evals
        total = add_spend(total, res.spent)
    return ErmResult(point=w, grad_evals=evals, spent=total, phases=phases)
