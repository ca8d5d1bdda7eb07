"""Ball-convolution smoothing and the subsampled, noised subgradient oracle.

The oracle returns ``(sum_{i in batch} subgrad f(w + y, x_i) + v) / B`` with
one shared ball perturbation ``y`` per call (radius ``radius_r``), a fresh
uniform size-B subsample, and Gaussian noise ``v`` with per-coordinate scale
``noise_sigma``.  Its expectation over all three draws is the gradient of
the smoothed empirical objective at ``w``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, PreconditionError
from .problem import Dataset, Domain, LossFamily
from .sampling import (
    ROLE_NOISE,
    ROLE_SMOOTHING,
    ROLE_SUBSAMPLE,
    RandomStream,
    gaussian_vector,
    subsample_without_replacement,
    uniform_ball_point,
    uniform_ball_points,
)


@dataclass(frozen=True)
class SmoothedOracleConfig:
    radius_r: float
    batch_B: int
    noise_sigma: float
    data: Dataset
    family: LossFamily
    domain: Domain

    def __post_init__(self):
        if self.radius_r < 0:
            raise InvalidInputError(f"smoothing radius must be >= 0, got {self.radius_r}")
        if self.radius_r > self.domain.expansion_r + 1e-12:
            raise InvalidInputError(
                f"smoothing radius {self.radius_r} exceeds the domain expansion "
                f"{self.domain.expansion_r}; losses are not certified Lipschitz there"
            )
        if not 1 <= self.batch_B <= self.data.size_N:
            raise InvalidInputError(
                f"batch size must be in [1, N]={self.data.size_N}, got {self.batch_B}"
            )
        if self.noise_sigma < 0:
            raise InvalidInputError(f"noise sigma must be >= 0, got {self.noise_sigma}")


@dataclass
class OracleStreams:
    """One stream per randomness role, so changing one knob (say B) never
    perturbs the others' sequences."""

    smoothing: RandomStream
    subsample: RandomStream
    noise: RandomStream

    @staticmethod
    def from_stream(rng: RandomStream) -> "OracleStreams":
        return OracleStreams(
            smoothing=rng.child(ROLE_SMOOTHING),
            subsample=rng.child(ROLE_SUBSAMPLE),
            noise=rng.child(ROLE_NOISE),
        )


def smoothed_stochastic_subgrad(cfg: SmoothedOracleConfig, w: np.ndarray,
                                streams: OracleStreams) -> np.ndarray:
    """One oracle call at a feasible point w."""
    w = np.asarray(w, dtype=float)
    if not cfg.domain.contains(w, tol=1e-7):
        raise PreconditionError("oracle queried outside the feasible set")
    d = w.shape[0]
    y = uniform_ball_point(d, cfg.radius_r, streams.smoothing)
    idx = subsample_without_replacement(cfg.data.size_N, cfg.batch_B, streams.subsample)
    mean_grad = cfg.family.subgrad_mean(w + y, cfg.data.X[idx], cfg.data.y[idx])
    if cfg.noise_sigma > 0:
        mean_grad = mean_grad + gaussian_vector(d, cfg.noise_sigma, streams.noise) / cfg.batch_B
    return mean_grad


class SmoothedOracle:
    """Callable oracle bound to a config and a stream; counts gradient evals.

    Each call consumes exactly ``batch_B`` per-sample subgradient
    evaluations, tallied in ``grad_evals``.
    """

    def __init__(self, cfg: SmoothedOracleConfig, rng: RandomStream):
        self.cfg = cfg
        self.streams = OracleStreams.from_stream(rng)
        self.grad_evals = 0

    @property
    def batch_size(self) -> int:
        return self.cfg.batch_B

    def __call__(self, w: np.ndarray) -> np.ndarray:
        g = smoothed_stochastic_subgrad(self.cfg, w, self.streams)
        self.grad_evals += self.cfg.batch_B
        return g


_MC_CHUNK_VALUES = 1 << 22  # cap on the (draws x samples) value matrix per chunk


def mc_smoothed_value(cfg: SmoothedOracleConfig, w: np.ndarray, n_mc: int,
                      rng: RandomStream) -> tuple[float, float]:
    """Monte-Carlo estimate of the smoothed empirical loss at w, with its
    standard error.

    With radius 0 the smoothing is the identity and the exact empirical loss
    is returned with zero standard error.
    """
    w = np.asarray(w, dtype=float)
    if cfg.radius_r == 0.0:
        return cfg.family.erm_value(w, cfg.data), 0.0
    if n_mc < 2:
        raise InvalidInputError(f"need at least 2 Monte-Carlo draws, got {n_mc}")
    N = cfg.data.size_N
    chunk = max(1, _MC_CHUNK_VALUES // max(N, 1))
    per_draw = np.empty(n_mc)
    done = 0
    while done < n_mc:
        m = min(chunk, n_mc - done)
        Y = uniform_ball_points(m, w.shape[0], cfg.radius_r, rng)
        vals = cfg.family.value_many(w[None, :] + Y, cfg.data.X, cfg.data.y)
        per_draw[done:done + m] = vals.mean(axis=1)
        done += m
    est = float(per_draw.mean())
    se = float(per_draw.std(ddof=1) / np.sqrt(n_mc))
    return est, se


def mc_smoothed_grad(cfg: SmoothedOracleConfig, w: np.ndarray, n_mc: int,
                     rng: RandomStream) -> np.ndarray:
    """Monte-Carlo reference for the smoothed empirical gradient at w.

    Averages the full-sample mean subgradient over n_mc ball draws; used as
    the ground truth in oracle-variance checks.
    """
    w = np.asarray(w, dtype=float)
    if cfg.radius_r == 0.0:
        return cfg.family.subgrad_mean(w, cfg.data.X, cfg.data.y)
    d = w.shape[0]
    acc = np.zeros(d)
    chunk = 4096
    done = 0
    while done < n_mc:
        m = min(chunk, n_mc - done)
        Y = uniform_ball_points(m, d, cfg.radius_r, rng)
        acc += _mean_grad_at_points(cfg.family, w[None, :] + Y, cfg.data)
        done += m
    return acc / n_mc


def _mean_grad_at_points(family: LossFamily, W: np.ndarray, data: Dataset) -> np.ndarray:
    """Sum over rows of W of the full-sample mean subgradient at that row."""
    from .problem import HingeLoss  # local import to keep the fast path together

    if isinstance(family, HingeLoss):
        # active-margin mask drives both value and gradient for the hinge
        margins = (W @ data.X.T) * data.y[None, :]
        active = (margins < 1.0).astype(float)
        weights = (active * data.y[None, :]).sum(axis=0)
        return -(weights @ data.X) / data.size_N
    acc = np.zeros(W.shape[1])
    for w in W:
        acc += family.subgrad_mean(w, data.X, data.y)
    return acc
