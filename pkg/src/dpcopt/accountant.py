"""Truncated-CDP accounting for the subsampled Gaussian mechanism.

Budgets flow through one pipeline: a Gaussian release of a sensitivity-G sum
is (G^2/(2 sigma^2), inf)-tCDP; subsampling a q-fraction amplifies that to
(13 q^2 rho, log(1/q)/(4 rho)); T-fold composition adds the rho's; and the
result converts to approximate DP via eps = rho + 2 sqrt(rho log(1/delta)),
valid while the optimizing Renyi order 1 + sqrt(log(1/delta)/rho) stays below
the truncation point.  Every precondition is checked and failures raise
errors naming the violated inequality; nothing proceeds silently.

Logarithms are natural except the explicit log2 inside the amplification
precondition (the truncated-CDP source states divergences in nats).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import (
    CalibrationError,
    InvalidInputError,
    NoPrivacyError,
    PreconditionError,
    TruncationError,
)

OMEGA_INF = math.inf


@dataclass(frozen=True)
class TcdpBudget:
    """An (rho, omega) truncated-CDP pair; omega = math.inf encodes no truncation."""

    rho: float
    omega: float

    def __post_init__(self):
        if self.rho < 0:
            raise InvalidInputError(f"rho must be >= 0, got {self.rho}")
        if not self.omega > 1:
            raise InvalidInputError(f"omega must be > 1, got {self.omega}")


TCDP_IDENTITY = TcdpBudget(0.0, OMEGA_INF)


@dataclass(frozen=True)
class ApproxDpBudget:
    """An (epsilon, delta) approximate-DP pair.

    Construction allows epsilon = 0 / delta = 0 so that degenerate *spent*
    budgets (no data touched) are representable; entry points that consume a
    *requested* budget validate strict positivity via :meth:`require_positive`.
    """

    epsilon: float
    delta: float

    def __post_init__(self):
        if self.epsilon < 0:
            raise InvalidInputError(f"epsilon must be >= 0, got {self.epsilon}")
        if not 0 <= self.delta <= 0.5:
            raise InvalidInputError(f"delta must be in [0, 1/2], got {self.delta}")

    def require_positive(self) -> "ApproxDpBudget":
        if self.epsilon <= 0 or self.delta <= 0:
            raise InvalidInputError(
                f"a requested budget needs epsilon > 0 and delta > 0, got "
                f"({self.epsilon}, {self.delta})"
            )
        return self

    def split(self, frac_eps: float, frac_delta: float | None = None) -> "ApproxDpBudget":
        if frac_delta is None:
            frac_delta = frac_eps
        return ApproxDpBudget(self.epsilon * frac_eps, self.delta * frac_delta)


ZERO_SPEND = ApproxDpBudget(0.0, 0.0)


def add_spend(a: ApproxDpBudget, b: ApproxDpBudget) -> ApproxDpBudget:
    """Basic composition: epsilons and deltas add."""
    return ApproxDpBudget(a.epsilon + b.epsilon, a.delta + b.delta)


@dataclass(frozen=True)
class AccountantConstants:
    """The two constants of the noise-calibration lemma (c1 <= 1, c2 >= 1).

    c2 = 8 is the smallest power of two for which self-certification passes
    whenever eps <= 1 and delta <= 1/2: the pipeline spends
    13 eps^2 / (2 c2^2 log(1/delta)) + sqrt(26) eps / c2, which stays below
    eps from c2 ~ 5.21 upward.
    """

    c1: float = 1.0
    c2: float = 8.0

    def __post_init__(self):
        if not 0 < self.c1 <= 1:
            raise InvalidInputError(f"c1 must be in (0, 1], got {self.c1}")
        if self.c2 < 1:
            raise InvalidInputError(f"c2 must be >= 1, got {self.c2}")


DEFAULT_CONSTANTS = AccountantConstants()


def gaussian_tcdp(G: float, sigma: float) -> TcdpBudget:
    """tCDP of one Gaussian release with l2-sensitivity G and noise scale sigma."""
    if G < 0:
        raise InvalidInputError(f"sensitivity must be >= 0, got {G}")
    if sigma < 0:
        raise InvalidInputError(f"sigma must be >= 0, got {sigma}")
    if G == 0:
        return TCDP_IDENTITY
    if sigma == 0:
        raise NoPrivacyError("sigma = 0 with positive sensitivity releases the exact sum")
    return TcdpBudget(G * G / (2.0 * sigma * sigma), OMEGA_INF)


def amplify_subsample(b: TcdpBudget, q: float) -> TcdpBudget:
    """Privacy amplification for running a tCDP mechanism on a uniform q-fraction.

    Requires rho in (0, 0.1], log(1/q) >= 3 rho (2 + log2(1/rho)), and the
    input truncation to reach log(1/q)/(2 rho) >= 3.
    """
    if not 0 < q < 1:
        raise InvalidInputError(f"sampling fraction must be in (0, 1), got {q}")
    rho = b.rho
    if not 0 < rho <= 0.1:
        raise PreconditionError(f"amplification needs rho in (0, 0.1], got rho={rho}")
    log_inv_q = math.log(1.0 / q)
    bound = 3.0 * rho * (2.0 + math.log2(1.0 / rho))
    if log_inv_q < bound:
        raise PreconditionError(
            f"amplification needs log(1/q) >= 3*rho*(2 + log2(1/rho)): "
            f"log(1/q)={log_inv_q:.6g} < {bound:.6g}"
        )
    omega_req = log_inv_q / (2.0 * rho)
    if omega_req < 3.0:
        raise PreconditionError(
            f"amplification needs log(1/q)/(2*rho) >= 3, got {omega_req:.6g}"
        )
    if b.omega < omega_req:
        raise PreconditionError(
            f"input truncation too small: needs omega >= log(1/q)/(2*rho) = "
            f"{omega_req:.6g}, got omega={b.omega:.6g}"
        )
    return TcdpBudget(13.0 * q * q * rho, log_inv_q / (4.0 * rho))


def compose(a: TcdpBudget, b: TcdpBudget) -> TcdpBudget:
    """Sequential composition: rhos add, truncation is the smaller omega."""
    return TcdpBudget(a.rho + b.rho, min(a.omega, b.omega))


def compose_many(b: TcdpBudget, n: int) -> TcdpBudget:
    """n-fold self-composition."""
    if n < 0:
        raise InvalidInputError(f"composition count must be >= 0, got {n}")
    if n == 0:
        return TCDP_IDENTITY
    return TcdpBudget(n * b.rho, b.omega)


def tcdp_to_approx_dp(b: TcdpBudget, delta: float) -> ApproxDpBudget:
    """Convert (rho, omega)-tCDP to (eps, delta)-DP at eps = rho + 2 sqrt(rho log(1/delta)).

    The conversion optimizes the Renyi order at 1 + sqrt(log(1/delta)/rho),
    which must not exceed the truncation omega.
    """
    if not 0 < delta <= 0.5:
        raise InvalidInputError(f"delta must be in (0, 1/2], got {delta}")
    if b.rho == 0:
        return ApproxDpBudget(0.0, delta)
    log_inv_delta = math.log(1.0 / delta)
    order = 1.0 + math.sqrt(log_inv_delta / b.rho)
    if b.omega < order:
        raise TruncationError(
            f"conversion needs omega >= 1 + sqrt(log(1/delta)/rho) = "
            f"{order:.6g}, got omega={b.omega:.6g}"
        )
    eps = b.rho + 2.0 * math.sqrt(b.rho * log_inv_delta)
    return ApproxDpBudget(eps, delta)


def sigma_formula(G: float, B: int, T: int, N: int, budget: ApproxDpBudget,
                  consts: AccountantConstants = DEFAULT_CONSTANTS) -> float:
    """The displayed noise scale c2 G B sqrt(T log(1/delta)) / (eps N)."""
    return (consts.c2 * G * B * math.sqrt(T * math.log(1.0 / budget.delta))
            / (budget.epsilon * N))


def spent_budget(G: float, sigma: float, B: int, T: int, N: int, delta: float) -> ApproxDpBudget:
    """Run the full pipeline for T subsampled-Gaussian releases and convert at delta.

    G is the per-release l2-sensitivity of the *sum* of per-sample gradients
    (single-entry replacement; the source analysis uses the one-sided G).
    """
    base = gaussian_tcdp(G, sigma)
    amplified = amplify_subsample(base, q=B / N)
    total = compose_many(amplified, T)
    return tcdp_to_approx_dp(total, delta)


def calibrate_sigma(G: float, B: int, T: int, N: int, budget: ApproxDpBudget,
                    consts: AccountantConstants = DEFAULT_CONSTANTS,
                    sensitivity: float | None = None) -> float:
    """Calibrate the per-release noise scale and self-certify it.

    Checks the calibration lemma's preconditions (eps <= c1 B^2 T / N^2,
    B <= N/10, delta <= 1/2), computes sigma by the displayed formula, then
    replays the full accounting pipeline and fails if the certified epsilon
    overshoots the request -- so the configured constants prove themselves on
    every parameter set they are used with.

    ``sensitivity`` overrides the per-release sum sensitivity (default G).
    """
    budget.require_positive()
    if G < 0:
        raise InvalidInputError(f"Lipschitz constant must be >= 0, got {G}")
    if B < 1 or T < 1 or N < 1:
        raise InvalidInputError("B, T, N must all be >= 1")
    if budget.delta > 0.5:
        raise PreconditionError(f"calibration needs delta <= 1/2, got {budget.delta}")
    if 10 * B > N:
        raise PreconditionError(f"calibration needs B <= N/10, got B={B}, N={N}")
    eps_cap = consts.c1 * B * B * T / (N * N)
    if budget.epsilon > eps_cap:
        raise PreconditionError(
            f"calibration needs eps <= c1 B^2 T / N^2 = {eps_cap:.6g}, "
            f"got eps={budget.epsilon:.6g}"
        )
    sigma = sigma_formula(G, B, T, N, budget, consts)
    if G == 0:
        return sigma
    spent = spent_budget(sensitivity if sensitivity is not None else G,
                         sigma, B, T, N, budget.delta)
    if spent.epsilon > budget.epsilon:
        raise CalibrationError(
            f"self-certification failed: pipeline epsilon {spent.epsilon:.6g} exceeds "
            f"requested {budget.epsilon:.6g}; increase c2 (currently {consts.c2})"
        )
    return sigma


def pipeline_report(G: float, B: int, T: int, N: int, budget: ApproxDpBudget,
                    consts: AccountantConstants = DEFAULT_CONSTANTS) -> dict:
    """Stage-by-stage accounting for the CLI `account` subcommand."""
    budget.require_positive()
    sigma = calibrate_sigma(G, B, T, N, budget, consts)
    base = gaussian_tcdp(G, sigma)
    amplified = amplify_subsample(base, q=B / N)
    total = compose_many(amplified, T)
    spent = tcdp_to_approx_dp(total, budget.delta)
    return {
        "inputs": {"G": G, "B": B, "T": T, "N": N,
                   "eps": budget.epsilon, "delta": budget.delta,
                   "c1": consts.c1, "c2": consts.c2},
        "sigma": sigma,
        "per_release_tcdp": {"rho": base.rho, "omega": None},
        "subsampled_tcdp": {"q": B / N, "rho": amplified.rho, "omega": amplified.omega},
        "composed_tcdp": {"steps": T, "rho": total.rho, "omega": total.omega},
        "spent": {"eps": spent.epsilon, "delta": spent.delta},
        "certified": spent.epsilon <= budget.epsilon,
    }
