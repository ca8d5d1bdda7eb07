"""DP-SGD comparison baseline: projected noisy SGD with per-step Gaussian noise.

Schedule as cited for the gradient-perturbation approach: per-step noise
variance G^2 log(1/delta) / eps^2 on a single-sample gradient, T = N^2 steps
(capped at a desk-scale ceiling, with the cap recorded), step size
D / (G_eff sqrt(T)) for G_eff^2 = G_total^2 + sigma^2 d, averaged iterate
output.  Privacy is asserted by construction from that schedule; the
baseline exists for gradient-complexity comparison only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .accountant import ApproxDpBudget
from .errors import InvalidInputError
from .problem import BallDomain, Dataset, Domain, LossFamily, QuadraticOffset
from .sampling import RandomStream

DESK_STEP_CAP = 4_000_000


@dataclass
class BaselineResult:
    point: np.ndarray
    grad_evals: int
    spent: ApproxDpBudget
    T: int
    cap_applied: bool


def _noise_scale(G: float, budget: ApproxDpBudget) -> float:
    return G * math.sqrt(math.log(1.0 / budget.delta)) / budget.epsilon


def dpsgd_baseline(family: LossFamily, data: Dataset, domain: Domain,
                   budget: ApproxDpBudget, rng: RandomStream,
                   w0: np.ndarray | None = None,
                   step_cap: int | None = DESK_STEP_CAP,
                   h: QuadraticOffset | None = None) -> BaselineResult:
    """One baseline run; thin wrapper over the vectorized multi-chain core."""
    chains = dpsgd_chains(family, data, domain, budget, [rng], w0=w0,
                          step_cap=step_cap, h=h)
    return chains[0]


def dpsgd_chains(family: LossFamily, data: Dataset, domain: Domain,
                 budget: ApproxDpBudget, rngs: list[RandomStream],
                 w0: np.ndarray | None = None,
                 step_cap: int | None = DESK_STEP_CAP,
                 h: QuadraticOffset | None = None) -> list[BaselineResult]:
    """Run several independent baseline chains lock-stepped over T steps.

    Chains share the step loop but draw from per-chain streams derived from
    the given ``rngs``: chain c's sample indices come from ``rngs[c].child(0)``
    and its noise from ``rngs[c].child(1)``, block-generated; results are
    deterministic in (rngs, chain count).
    """
    budget.require_positive()
    C = len(rngs)
    if C < 1:
        raise InvalidInputError("need at least one chain")
    N, d = data.size_N, data.dim
    G = family.lipschitz_G
    if h is not None and h.coeff_lambda > 0:
        G_total = G + 2.0 * h.coeff_lambda * (domain.max_dist(h.center))
    else:
        G_total = G
    sigma = _noise_scale(G, budget)
    T_full = N * N
    cap_applied = step_cap is not None and T_full > step_cap
    T = min(T_full, step_cap) if step_cap is not None else T_full
    g_eff = math.sqrt(G_total * G_total + sigma * sigma * d)
    lr = domain.diameter_D / (g_eff * math.sqrt(T))

    if w0 is None:
        w0 = np.zeros(d)
    W = np.tile(np.asarray(w0, dtype=float), (C, 1))
    W_sum = np.zeros_like(W)

    idx_gens = [r.child(0).gen for r in rngs]
    noise_gens = [r.child(1).gen for r in rngs]

    ball = domain if isinstance(domain, BallDomain) else None
    lam = h.coeff_lambda if h is not None else 0.0
    h_center = h.center if h is not None else None

    # Block-generate per-chain randomness to keep the step loop cheap.
    chunk = max(1, min(T, 4_000_000 // max(C * d, 1)))
    done = 0
    while done < T:
        m = min(chunk, T - done)
        idx = np.stack([g.integers(0, N, size=m) for g in idx_gens], axis=1)  # (m, C)
        noise = np.stack([g.normal(0.0, sigma, size=(m, d)) for g in noise_gens], axis=1)
        for j in range(m):
            Xs = data.X[idx[j]]            # (C, d)
            ys = data.y[idx[j]]
            grad = family.subgrad_each(W, Xs, ys) + noise[j]
            if lam > 0:
                grad += 2.0 * lam * (W - h_center)
            W -= lr * grad
            if ball is not None:
                delta = W - ball.center
                norms = np.linalg.norm(delta, axis=1)
                mask = norms > ball.radius
                if np.any(mask):
                    W[mask] = ball.center + delta[mask] * (ball.radius / norms[mask])[:, None]
            else:
                for c in range(C):
                    W[c] = domain.project(W[c])
            W_sum += W
        done += m

    avg = W_sum / T
    return [BaselineResult(point=avg[c].copy(), grad_evals=T, spent=budget,
                           T=T, cap_applied=cap_applied) for c in range(C)]
