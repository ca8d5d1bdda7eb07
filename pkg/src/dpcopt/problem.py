"""Loss families, datasets, domains, projections, and quadratic regularization.

Strong convexity uses the half-factor convention throughout:
``f(v) >= f(u) + <g(u), v-u> + (mu/2)||v-u||^2``. Under that convention the
offset ``lam*||w - c||^2`` contributes ``2*lam`` to the modulus.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

_DYKSTRA_TOL = 1e-10
_DYKSTRA_MAX_ITER = 10_000


# ---------------------------------------------------------------------------
# Domains
# ---------------------------------------------------------------------------

class Domain:
    """A closed convex feasible set with exact Euclidean projection.

    ``expansion_r`` is the radius of the Minkowski expansion on which losses
    must stay Lipschitz (smoothing evaluates subgradients at ``w + y`` with
    ``||y|| <= r``).
    """

    expansion_r: float

    @property
    def dim(self) -> int:
        raise NotImplementedError

    @property
    def diameter_D(self) -> float:
        raise NotImplementedError

    def project(self, p: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def project_many(self, P: np.ndarray) -> np.ndarray:
        return np.stack([self.project(p) for p in P])

    def contains(self, p: np.ndarray, tol: float = 1e-9) -> bool:
        return bool(np.linalg.norm(self.project(p) - p) <= tol)

    def max_dist(self, q: np.ndarray) -> float:
        """sup over members of the set of the distance to q."""
        raise NotImplementedError

    def random_point(self, gen: np.random.Generator) -> np.ndarray:
        """A random feasible point (for tests and initialization)."""
        raise NotImplementedError


def _check_finite(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if not np.all(np.isfinite(p)):
        raise InvalidInputError("point has non-finite coordinates")
    return p


@dataclass(frozen=True)
class BallDomain(Domain):
    center: np.ndarray
    radius: float
    expansion_r: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if self.radius <= 0:
            raise InvalidInputError(f"ball radius must be > 0, got {self.radius}")
        if self.expansion_r < 0:
            raise InvalidInputError("expansion_r must be >= 0")

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    @property
    def diameter_D(self) -> float:
        return 2.0 * self.radius

    def project(self, p: np.ndarray) -> np.ndarray:
        p = _check_finite(p)
        delta = p - self.center
        norm = np.linalg.norm(delta)
        if norm <= self.radius:
            return p
        return self.center + delta * (self.radius / norm)

    def project_many(self, P: np.ndarray) -> np.ndarray:
        P = _check_finite(P)
        delta = P - self.center
        norms = np.linalg.norm(delta, axis=1, keepdims=True)
        scale = np.minimum(1.0, self.radius / np.maximum(norms, 1e-300))
        return self.center + delta * scale

    def max_dist(self, q: np.ndarray) -> float:
        return float(np.linalg.norm(np.asarray(q, dtype=float) - self.center) + self.radius)

    def random_point(self, gen: np.random.Generator) -> np.ndarray:
        g = gen.normal(size=self.dim)
        g /= max(np.linalg.norm(g), 1e-300)
        u = gen.random() ** (1.0 / self.dim)
        return self.center + self.radius * u * g


@dataclass(frozen=True)
class BoxDomain(Domain):
    lower: np.ndarray
    upper: np.ndarray
    expansion_r: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "lower", np.asarray(self.lower, dtype=float))
        object.__setattr__(self, "upper", np.asarray(self.upper, dtype=float))
        if self.lower.shape != self.upper.shape:
            raise InvalidInputError("box bounds must have equal shapes")
        if np.any(self.lower > self.upper):
            raise InvalidInputError("box lower bound exceeds upper bound")
        if self.expansion_r < 0:
            raise InvalidInputError("expansion_r must be >= 0")

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    @property
    def diameter_D(self) -> float:
        return float(np.linalg.norm(self.upper - self.lower))

    def project(self, p: np.ndarray) -> np.ndarray:
        p = _check_finite(p)
        return np.clip(p, self.lower, self.upper)

    project_many = project

    def max_dist(self, q: np.ndarray) -> float:
        q = np.asarray(q, dtype=float)
        far = np.maximum(np.abs(q - self.lower), np.abs(q - self.upper))
        return float(np.linalg.norm(far))

    def random_point(self, gen: np.random.Generator) -> np.ndarray:
        return gen.uniform(self.lower, self.upper)


@dataclass(frozen=True)
class BallIntersectionDomain(Domain):
    """base set intersected with a (localization) ball around a fixed center.

    Projection uses Dykstra's alternating scheme between the two exact
    projections, run to a 1e-10 fixed point; a single pass is already exact
    when one set contains the other's projection.
    """

    base: Domain
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if self.radius <= 0:
            raise InvalidInputError(f"intersection ball radius must be > 0, got {self.radius}")

    @property
    def expansion_r(self) -> float:  # type: ignore[override]
        return self.base.expansion_r

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    @property
    def diameter_D(self) -> float:
        return min(self.base.diameter_D, 2.0 * self.radius)

    def _project_ball(self, p: np.ndarray) -> np.ndarray:
        delta = p - self.center
        norm = np.linalg.norm(delta)
        if norm <= self.radius:
            return p
        return self.center + delta * (self.radius / norm)

    def project(self, p: np.ndarray) -> np.ndarray:
        p = _check_finite(p)
        x = p
        q_ball = np.zeros_like(p)
        q_base = np.zeros_like(p)
        for _ in range(_DYKSTRA_MAX_ITER):
            y = self._project_ball(x + q_ball)
            q_ball = x + q_ball - y
            x_new = self.base.project(y + q_base)
            q_base = y + q_base - x_new
            if np.linalg.norm(x_new - x) <= _DYKSTRA_TOL:
                x = x_new
                break
            x = x_new
        # Fixed point is feasible for both sets up to the tolerance.
        return self.base.project(self._project_ball(x))

    def contains(self, p: np.ndarray, tol: float = 1e-9) -> bool:
        in_ball = np.linalg.norm(p - self.center) <= self.radius + tol
        return bool(in_ball and self.base.contains(p, tol))

    def max_dist(self, q: np.ndarray) -> float:
        q = np.asarray(q, dtype=float)
        return float(min(self.base.max_dist(q), np.linalg.norm(q - self.center) + self.radius))

    def random_point(self, gen: np.random.Generator) -> np.ndarray:
        g = gen.normal(size=self.dim)
        g /= max(np.linalg.norm(g), 1e-300)
        u = gen.random() ** (1.0 / self.dim)
        return self.project(self.center + self.radius * u * g)


# ---------------------------------------------------------------------------
# Datasets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Dataset:
    """Ordered samples: feature matrix X of shape (N, d) and labels y of shape (N,)."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.ascontiguousarray(self.X, dtype=float)
        y = np.ascontiguousarray(self.y, dtype=float)
        if X.ndim != 2:
            raise InvalidInputError("X must be a 2-d array")
        if y.shape != (X.shape[0],):
            raise InvalidInputError("y must have one label per row of X")
        if X.shape[0] < 1:
            raise InvalidInputError("dataset must contain at least one sample")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def size_N(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def subset(self, idx: np.ndarray) -> "Dataset":
        return Dataset(self.X[idx], self.y[idx])

    def block(self, start: int, stop: int) -> "Dataset":
        return Dataset(self.X[start:stop], self.y[start:stop])

    @staticmethod
    def from_csv(path) -> "Dataset":
        """Load one sample per row: feature columns first, label last."""
        rows = []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row:
                    continue
                rows.append([float(v) for v in row])
        arr = np.asarray(rows, dtype=float)
        if arr.ndim != 2 or arr.shape[1] < 2:
            raise InvalidInputError("CSV rows must hold at least one feature and a label")
        return Dataset(arr[:, :-1], arr[:, -1])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            for xi, yi in zip(self.X, self.y):
                writer.writerow([repr(v) for v in xi] + [repr(yi)])


# ---------------------------------------------------------------------------
# Loss families
# ---------------------------------------------------------------------------

class LossFamily:
    """Per-sample convex loss with a subgradient oracle.

    ``lipschitz_G`` bounds the subgradient norm over the expanded set K_r;
    ``strong_mu`` is the strong-convexity modulus (half-factor convention).
    Subclasses override the *_many / *_mean hooks with vectorized versions;
    the defaults loop over the per-sample oracle.
    """

    lipschitz_G: float = 0.0
    strong_mu: float = 0.0

    def value(self, w: np.ndarray, x: np.ndarray, y: float) -> float:
        raise NotImplementedError

    def subgrad(self, w: np.ndarray, x: np.ndarray, y: float) -> np.ndarray:
        raise NotImplementedError

    # ---- vectorized hooks ------------------------------------------------

    def value_many(self, W: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Values at every (point, sample) pair; shape (len(W), len(X))."""
        return np.array([[self.value(w, x, yi) for x, yi in zip(X, y)] for w in W])

    def subgrad_mean(self, w: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Average subgradient over the given samples at one point."""
        acc = np.zeros_like(w, dtype=float)
        for x, yi in zip(X, y):
            acc += self.subgrad(w, x, yi)
        return acc / len(X)

    def subgrad_each(self, W: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Paired subgradients: row i is the subgradient at W[i] for sample i."""
        return np.stack([self.subgrad(w, x, yi) for w, x, yi in zip(W, X, y)])

    # ---- conveniences ----------------------------------------------------

    def erm_value(self, w: np.ndarray, data: Dataset) -> float:
        """Empirical loss: the sample average of the per-sample values."""
        return float(self.value_many(np.asarray(w, dtype=float)[None, :], data.X, data.y)[0].mean())

    def erm_values_many(self, W: np.ndarray, data: Dataset) -> np.ndarray:
        return self.value_many(W, data.X, data.y).mean(axis=1)


def hinge_loss_value(w: np.ndarray, x: np.ndarray, y: float) -> float:
    if w.shape != x.shape:
        raise InvalidInputError(f"dimension mismatch: point {w.shape} vs feature {x.shape}")
    return float(max(0.0, 1.0 - y * float(w @ x)))


def hinge_loss_subgrad(w: np.ndarray, x: np.ndarray, y: float) -> np.ndarray:
    """Subgradient of max(0, 1 - y<w,x>); zero vector on the inactive branch."""
    w = np.asarray(w, dtype=float)
    x = np.asarray(x, dtype=float)
    if w.shape != x.shape:
        raise InvalidInputError(f"dimension mismatch: point {w.shape} vs feature {x.shape}")
    if y * float(w @ x) >= 1.0:
        return np.zeros_like(x)
    return -y * x


class HingeLoss(LossFamily):
    """Binary hinge loss with features bounded by ``feature_bound`` (so G equals it)."""

    strong_mu = 0.0

    def __init__(self, feature_bound: float = 1.0):
        if feature_bound <= 0:
            raise InvalidInputError("feature bound must be positive")
        self.feature_bound = float(feature_bound)
        self.lipschitz_G = float(feature_bound)

    def value(self, w, x, y):
        return hinge_loss_value(np.asarray(w, dtype=float), np.asarray(x, dtype=float), y)

    def subgrad(self, w, x, y):
        return hinge_loss_subgrad(w, x, y)

    def value_many(self, W, X, y):
        margins = (W @ X.T) * y[None, :]
        return np.maximum(0.0, 1.0 - margins)

    def subgrad_mean(self, w, X, y):
        margins = (X @ w) * y
        active = margins < 1.0
        if not np.any(active):
            return np.zeros_like(w, dtype=float)
        return -(y[active] @ X[active]) / len(X)

    def subgrad_each(self, W, X, y):
        margins = np.einsum("ij,ij->i", W, X) * y
        active = (margins < 1.0).astype(float)
        return -(active * y)[:, None] * X


class QuadraticDistanceLoss(LossFamily):
    """f(w, x) = ||w - x||^2; strongly convex with modulus 2 (half-factor convention).

    The Lipschitz constant holds over points within ``point_bound`` of the
    origin and features within ``feature_bound``.
    """

    strong_mu = 2.0

    def __init__(self, point_bound: float, feature_bound: float):
        self.lipschitz_G = 2.0 * (float(point_bound) + float(feature_bound))

    def value(self, w, x, y):
        diff = np.asarray(w, dtype=float) - np.asarray(x, dtype=float)
        return float(diff @ diff)

    def subgrad(self, w, x, y):
        return 2.0 * (np.asarray(w, dtype=float) - np.asarray(x, dtype=float))

    def value_many(self, W, X, y):
        # ||w||^2 - 2 w.x + ||x||^2 for every pair
        w2 = np.einsum("ij,ij->i", W, W)[:, None]
        x2 = np.einsum("ij,ij->i", X, X)[None, :]
        return w2 - 2.0 * (W @ X.T) + x2

    def subgrad_mean(self, w, X, y):
        return 2.0 * (w - X.mean(axis=0))

    def subgrad_each(self, W, X, y):
        return 2.0 * (W - X)


# ---------------------------------------------------------------------------
# Quadratic offsets and regularization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadraticOffset:
    """The data-independent term lam * ||w - center||^2.

    Contributes 2*lam of strong convexity under the half-factor convention;
    lam = 0 is the zero function (the identity for :func:`regularize`).
    """

    coeff_lambda: float
    center: np.ndarray

    def __post_init__(self):
        if self.coeff_lambda < 0:
            raise InvalidInputError("offset coefficient must be >= 0")
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))

    def value(self, w: np.ndarray) -> float:
        if self.coeff_lambda == 0.0:
            return 0.0
        diff = np.asarray(w, dtype=float) - self.center
        return float(self.coeff_lambda * (diff @ diff))

    def grad(self, w: np.ndarray) -> np.ndarray:
        if self.coeff_lambda == 0.0:
            return np.zeros_like(np.asarray(w, dtype=float))
        return 2.0 * self.coeff_lambda * (np.asarray(w, dtype=float) - self.center)

    @property
    def strong_mu(self) -> float:
        return 2.0 * self.coeff_lambda

    @staticmethod
    def zero(d: int) -> "QuadraticOffset":
        return QuadraticOffset(0.0, np.zeros(d))


class RegularizedFamily(LossFamily):
    """A loss family plus a quadratic offset folded into every sample's loss."""

    def __init__(self, base: LossFamily, offset: QuadraticOffset, domain: Domain):
        self.base = base
        self.offset = offset
        # Worst-case offset gradient over the expanded set K_r, since the
        # smoothing oracle queries subgradients at w + y with ||y|| <= r.
        reach = domain.max_dist(offset.center) + domain.expansion_r
        self.lipschitz_G = base.lipschitz_G + 2.0 * offset.coeff_lambda * reach
        self.strong_mu = base.strong_mu + offset.strong_mu

    def value(self, w, x, y):
        return self.base.value(w, x, y) + self.offset.value(w)

    def subgrad(self, w, x, y):
        return self.base.subgrad(w, x, y) + self.offset.grad(w)

    def value_many(self, W, X, y):
        diff = W - self.offset.center
        off = self.offset.coeff_lambda * np.einsum("ij,ij->i", diff, diff)
        return self.base.value_many(W, X, y) + off[:, None]

    def subgrad_mean(self, w, X, y):
        return self.base.subgrad_mean(w, X, y) + self.offset.grad(w)

    def subgrad_each(self, W, X, y):
        return self.base.subgrad_each(W, X, y) + 2.0 * self.offset.coeff_lambda * (
            W - self.offset.center
        )


def regularize(family: LossFamily, offset: QuadraticOffset, domain: Domain) -> LossFamily:
    """Add a quadratic offset to every per-sample loss.

    Identity when the coefficient is zero; otherwise the returned family's
    modulus grows by 2*lam and its Lipschitz constant by the offset
    gradient's worst case over K_r.
    """
    if offset.coeff_lambda == 0.0:
        return family
    return RegularizedFamily(family, offset, domain)
