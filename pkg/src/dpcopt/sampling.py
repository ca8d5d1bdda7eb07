"""Seeded random primitives: Gaussian vectors, uniform ball draws, subsampling.

All randomness flows through :class:`RandomStream`, a thin wrapper around
numpy's counter-based Philox generator keyed by ``(seed, stream path)``.
Distinct stream ids give statistically independent sequences; the same
``(seed, stream_id)`` always replays the same sequence, so every consumer
(noise, subsampling, smoothing, trial replication) owns its own stream and
changing one knob (e.g. the batch size) never perturbs the others' draws.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError

# Conventional role offsets for child streams of one consumer.
ROLE_SMOOTHING = 0
ROLE_SUBSAMPLE = 1
ROLE_NOISE = 2


@dataclass
class RandomStream:
    """A single-consumer random stream addressed by ``(seed, stream_id, path)``.

    ``child(k)`` derives an independent sub-stream; the derivation is
    deterministic, so a trial's streams can be reconstructed from the
    recorded ``(seed, stream_id)`` alone.
    """

    seed: int
    stream_id: int = 0
    path: tuple[int, ...] = ()
    _gen: np.random.Generator | None = field(default=None, repr=False, compare=False)

    @property
    def gen(self) -> np.random.Generator:
        if self._gen is None:
            ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id, *self.path))
            self._gen = np.random.Generator(np.random.Philox(ss))
        return self._gen

    def child(self, k: int) -> "RandomStream":
        return RandomStream(self.seed, self.stream_id, self.path + (k,))


def gaussian_vector(d: int, sigma: float, rng: RandomStream) -> np.ndarray:
    """Draw one d-dimensional vector with i.i.d. N(0, sigma^2) coordinates."""
    if d < 1:
        raise InvalidInputError(f"dimension must be >= 1, got {d}")
    if sigma < 0:
        raise InvalidInputError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0.0:
        return np.zeros(d)
    return rng.gen.normal(0.0, sigma, size=d)


def uniform_ball_point(d: int, r: float, rng: RandomStream) -> np.ndarray:
    """Draw one point uniformly from the closed l2 ball of radius r.

    Gaussian direction scaled by r * U^(1/d); rejection sampling is avoided
    because its acceptance rate collapses beyond d ~ 20.
    """
    if d < 1:
        raise InvalidInputError(f"dimension must be >= 1, got {d}")
    if r < 0:
        raise InvalidInputError(f"radius must be >= 0, got {r}")
    if r == 0.0:
        return np.zeros(d)
    g = rng.gen.normal(size=d)
    norm = np.linalg.norm(g)
    if norm == 0.0:  # probability-zero guard
        g[0] = 1.0
        norm = 1.0
    u = rng.gen.random()
    return (r * u ** (1.0 / d) / norm) * g


def uniform_ball_points(n: int, d: int, r: float, rng: RandomStream) -> np.ndarray:
    """Vectorized batch of n independent uniform-ball draws, shape (n, d).

    Matches n sequential :func:`uniform_ball_point` draws in distribution but
    not draw-for-draw (block generation interleaves differently).
    """
    if n < 0:
        raise InvalidInputError(f"count must be >= 0, got {n}")
    if d < 1:
        raise InvalidInputError(f"dimension must be >= 1, got {d}")
    if r < 0:
        raise InvalidInputError(f"radius must be >= 0, got {r}")
    if r == 0.0:
        return np.zeros((n, d))
    g = rng.gen.normal(size=(n, d))
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    u = rng.gen.random(size=(n, 1))
    return (r * u ** (1.0 / d) / norms) * g


def subsample_without_replacement(N: int, B: int, rng: RandomStream) -> np.ndarray:
    """Uniformly random size-B subset of {0, ..., N-1} via partial Fisher-Yates."""
    if not 1 <= B <= N:
        raise InvalidInputError(f"need 1 <= B <= N, got B={B}, N={N}")
    if B == N:
        return np.arange(N)
    # Generator.choice without replacement implements the partial shuffle.
    return rng.gen.choice(N, size=B, replace=False)
