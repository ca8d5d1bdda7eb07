"""Synthetic benchmark tasks: planted hinge classification and quadratic means.

Hinge features live on the unit sphere so the Lipschitz constant is exactly
the feature bound (1); labels come from a planted halfspace with a
configurable flip probability, which keeps the population loss evaluable by
fresh-sample Monte Carlo.  Strongly convex variants add a quadratic offset
that the solvers treat as a zero-sensitivity composite term.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .problem import (
    BallDomain,
    Dataset,
    Domain,
    HingeLoss,
    LossFamily,
    QuadraticDistanceLoss,
    QuadraticOffset,
)
from .sampling import RandomStream

# Stream ids reserved for data generation, so algorithm streams (small ids)
# never collide with task streams.
TASK_DATA_STREAM = 101
POPULATION_STREAM = 102


def _unit_rows(gen: np.random.Generator, n: int, d: int) -> np.ndarray:
    X = gen.normal(size=(n, d))
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return X / norms


@dataclass(frozen=True)
class PlantedHingePopulation:
    """Distribution: x uniform on the unit sphere, y the planted sign with flips."""

    direction: np.ndarray
    label_flip: float

    def sample(self, n: int, gen: np.random.Generator) -> Dataset:
        d = self.direction.shape[0]
        X = _unit_rows(gen, n, d)
        y = np.where(X @ self.direction >= 0.0, 1.0, -1.0)
        if self.label_flip > 0:
            flips = gen.random(n) < self.label_flip
            y = np.where(flips, -y, y)
        return Dataset(X, y)


@dataclass
class Task:
    """A benchmark instance: data-dependent family, dataset, domain, and an
    optional data-independent quadratic term."""

    name: str
    family: LossFamily
    data: Dataset
    domain: Domain
    offset: QuadraticOffset | None = None
    population: PlantedHingePopulation | None = None

    @property
    def strong_mu(self) -> float:
        off = self.offset.strong_mu if self.offset is not None else 0.0
        return self.family.strong_mu + off

    def objective(self, w: np.ndarray) -> float:
        """Empirical objective including the data-independent term."""
        val = self.family.erm_value(w, self.data)
        if self.offset is not None:
            val += self.offset.value(w)
        return val


def make_hinge_task(N: int, d: int, data_seed: int, radius: float = 1.0,
                    label_flip: float = 0.1, direction_seed: int | None = None) -> Task:
    """Planted-halfspace hinge classification over a centered ball.

    ``direction_seed`` pins the planted direction independently of the data
    draw, so population-level experiments can redraw samples per trial while
    the population itself stays fixed.
    """
    if not 0 <= label_flip < 0.5:
        raise InvalidInputError("label flip probability must be in [0, 0.5)")
    dir_gen = RandomStream(direction_seed if direction_seed is not None else data_seed,
                           TASK_DATA_STREAM).child(0).gen
    direction = _unit_rows(dir_gen, 1, d)[0]
    pop = PlantedHingePopulation(direction, label_flip)
    gen = RandomStream(data_seed, TASK_DATA_STREAM).child(1).gen
    data = pop.sample(N, gen)
    domain = BallDomain(np.zeros(d), radius, expansion_r=radius)
    return Task("hinge", HingeLoss(feature_bound=1.0), data, domain, population=pop)


def make_strongly_convex_hinge_task(N: int, d: int, data_seed: int,
                                    radius: float = 1.0, label_flip: float = 0.1,
                                    mu: float = 1.0,
                                    direction_seed: int | None = None) -> Task:
    """Hinge plus (mu/2-convention) quadratic offset of modulus mu, centered at 0."""
    if mu <= 0:
        raise InvalidInputError("strongly convex task needs mu > 0")
    task = make_hinge_task(N, d, data_seed, radius, label_flip, direction_seed)
    offset = QuadraticOffset(mu / 2.0, np.zeros(d))
    return Task("strongly-convex-hinge", task.family, task.data, task.domain,
                offset=offset, population=task.population)


def make_quadratic_task(N: int, d: int, data_seed: int, radius: float = 1.0,
                        spread: float = 0.5) -> Task:
    """Mean-estimation quadratic: f(w, x) = ||w - x||^2 with features in a
    sub-ball, so the unconstrained optimum (the feature mean) stays interior."""
    gen = RandomStream(data_seed, TASK_DATA_STREAM).gen
    domain = BallDomain(np.zeros(d), radius, expansion_r=radius)
    X = _unit_rows(gen, N, d) * (spread * radius * gen.random((N, 1)))
    data = Dataset(X, np.zeros(N))
    feature_bound = float(np.linalg.norm(X, axis=1).max())
    family = QuadraticDistanceLoss(point_bound=radius + domain.expansion_r,
                                   feature_bound=feature_bound)
    return Task("quadratic", family, data, domain)


_TASK_MAKERS = {
    "hinge": make_hinge_task,
    "strongly-convex-hinge": make_strongly_convex_hinge_task,
    "quadratic": make_quadratic_task,
}


def make_task(name: str, N: int, d: int, data_seed: int, **kwargs) -> Task:
    if name not in _TASK_MAKERS:
        raise InvalidInputError(
            f"unknown task {name!r}; expected one of {sorted(_TASK_MAKERS)}"
        )
    return _TASK_MAKERS[name](N, d, data_seed, **kwargs)
