"""Coordinates, signatures, invariant profiles, sample grids and finite differences.

Everything else in the package is built on the small set of value types
defined here.  They are frozen dataclasses and safe to share.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import qmc

EPS = np.finfo(float).eps
FD_TOL = 1e-6

# Step rules for central differences.
H1 = EPS ** (1.0 / 3.0)
H2 = EPS ** (1.0 / 4.0)


class StencilError(ValueError):
    """A finite-difference stencil left the domain of the field."""


def _as_point(point) -> np.ndarray:
    return np.asarray(point, dtype=float).reshape(-1)


# ---------------------------------------------------------------------------
# Signatures and directions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Signature:
    eps: tuple[int, ...]

    def __post_init__(self):
        eps = tuple(int(e) for e in self.eps)
        if any(e not in (1, -1) for e in eps):
            raise ValueError(f"signature entries must be +1 or -1, got {self.eps}")
        if 1 not in eps:
            raise ValueError("signature needs at least one +1 entry")
        object.__setattr__(self, "eps", eps)

    @classmethod
    def euclidean(cls, n: int) -> "Signature":
        return cls((1,) * n)

    @classmethod
    def lorentzian(cls, n: int) -> "Signature":
        """Timelike first coordinate: (-1, +1, ..., +1)."""
        return cls((-1,) + (1,) * (n - 1))

    def __len__(self) -> int:
        return len(self.eps)

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(np.asarray(self.eps, dtype=float))

    def require_dim(self, minimum: int, role: str) -> None:
        if len(self) < minimum:
            raise ValueError(f"{role} chart needs dimension >= {minimum}, got {len(self)}")


def kappa(alpha: Sequence[float], sig: Signature | Sequence[int]) -> float:
    """Causal character of ``alpha``: sum of eps_i * alpha_i**2."""
    eps = sig.eps if isinstance(sig, Signature) else tuple(sig)
    alpha = _as_point(alpha)
    if alpha.size != len(eps):
        raise ValueError(f"dimension mismatch: alpha has {alpha.size} entries, signature {len(eps)}")
    return float(np.dot(np.asarray(eps, dtype=float), alpha * alpha))


@dataclass(frozen=True)
class Direction:
    """Translation-invariance data xi = sum_k alpha_k x_k on a signed chart."""

    alpha: tuple[float, ...]
    sig: Signature

    def __post_init__(self):
        object.__setattr__(self, "alpha", tuple(float(a) for a in self.alpha))
        if len(self.alpha) != len(self.sig):
            raise ValueError("dimension mismatch between alpha and signature")

    @classmethod
    def normalized(cls, alpha: Sequence[float], sig: Signature) -> "Direction":
        """Rescale ``alpha`` so that kappa is exactly -1, 0 or +1."""
        k = kappa(alpha, sig)
        alpha = _as_point(alpha)
        if k != 0.0:
            alpha = alpha / math.sqrt(abs(k))
        return cls(tuple(alpha), sig)

    @classmethod
    def axis(cls, n: int, k: int, sig: Signature | None = None) -> "Direction":
        alpha = np.zeros(n)
        alpha[k] = 1.0
        return cls(tuple(alpha), sig or Signature.euclidean(n))

    @property
    def dim(self) -> int:
        return len(self.alpha)

    @property
    def vector(self) -> np.ndarray:
        return np.asarray(self.alpha)

    @property
    def kappa(self) -> float:
        return kappa(self.alpha, self.sig)

    def xi(self, point) -> float:
        return xi_coordinate(point, self)


def xi_coordinate(point, direction: Direction) -> float:
    """The invariant xi = <alpha, x> (plain dot product, no signature)."""
    x = _as_point(point)
    if x.size != direction.dim:
        raise ValueError(f"dimension mismatch: point has {x.size} entries, direction {direction.dim}")
    return float(np.dot(direction.vector, x))


# ---------------------------------------------------------------------------
# Profiles u(xi) and scalar fields on a chart
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProfileFunction:
    """A function of one variable with its first two derivatives."""

    eval: Callable[[float], float]
    d1: Callable[[float], float]
    d2: Callable[[float], float]
    domain: tuple[float, float] = (-math.inf, math.inf)
    label: str = ""

    def __call__(self, xi: float) -> float:
        return self.eval(xi)

    def contains(self, xi: float) -> bool:
        lo, hi = self.domain
        return lo < xi < hi

    @classmethod
    def constant(cls, c: float) -> "ProfileFunction":
        return cls(lambda s: c, lambda s: 0.0, lambda s: 0.0, label=f"{c}")

    @classmethod
    def affine(cls, slope: float, intercept: float) -> "ProfileFunction":
        return cls(
            lambda s: slope * s + intercept,
            lambda s: slope,
            lambda s: 0.0,
            label=f"{slope}*xi+{intercept}",
        )

    @classmethod
    def exponential(cls, theta: float, rate: float) -> "ProfileFunction":
        return cls(
            lambda s: theta * math.exp(rate * s),
            lambda s: theta * rate * math.exp(rate * s),
            lambda s: theta * rate * rate * math.exp(rate * s),
            label=f"{theta}*exp({rate}*xi)",
        )

    @classmethod
    def reciprocal_affine(cls, theta: float, G: float, C: float) -> "ProfileFunction":
        """theta / (-G xi + C), defined on the side of the pole xi = C/G given by sign."""
        def ev(s):
            return theta / (-G * s + C)

        def d1(s):
            return theta * G / (-G * s + C) ** 2

        def d2(s):
            return 2.0 * theta * G * G / (-G * s + C) ** 3

        return cls(ev, d1, d2, label=f"{theta}/(-{G}*xi+{C})")

    def check_derivatives(self, xs: Sequence[float], tol: float = FD_TOL) -> float:
        """Largest relative gap between the stated derivatives and central differences."""
        worst = 0.0
        for s in xs:
            h1 = H1 * max(1.0, abs(s))
            fd1 = (self.eval(s + h1) - self.eval(s - h1)) / (2 * h1)
            fd2 = (self.d1(s + h1) - self.d1(s - h1)) / (2 * h1)
            for exact, approx in ((self.d1(s), fd1), (self.d2(s), fd2)):
                worst = max(worst, abs(exact - approx) / max(1.0, abs(exact)))
        return worst


@dataclass(frozen=True)
class ScalarField:
    """A scalar function on a chart, with gradient and Hessian in coordinates.

    ``grad`` and ``hess`` may be ``None``; they then fall back to central
    differences of ``value``.
    """

    value: Callable[[np.ndarray], float]
    grad_fn: Callable[[np.ndarray], np.ndarray] | None = None
    hess_fn: Callable[[np.ndarray], np.ndarray] | None = None
    label: str = ""

    def __call__(self, x) -> float:
        return float(self.value(_as_point(x)))

    @property
    def analytic(self) -> bool:
        return self.grad_fn is not None and self.hess_fn is not None

    def grad(self, x) -> np.ndarray:
        x = _as_point(x)
        if self.grad_fn is None:
            return fd_gradient(self.value, x)
        return np.asarray(self.grad_fn(x), dtype=float)

    def hess(self, x) -> np.ndarray:
        x = _as_point(x)
        if self.hess_fn is None:
            return fd_hessian(self.value, x)
        return np.asarray(self.hess_fn(x), dtype=float)

    def numeric(self) -> "ScalarField":
        """Same field with derivatives taken by finite differences."""
        return ScalarField(self.value, None, None, label=self.label)

    @classmethod
    def constant(cls, c: float, n: int) -> "ScalarField":
        return cls(lambda x: c, lambda x: np.zeros(n), lambda x: np.zeros((n, n)), label=f"{c}")

    @classmethod
    def coordinate(cls, k: int, n: int) -> "ScalarField":
        """The coordinate function x_k (0-based index)."""
        e = np.zeros(n)
        e[k] = 1.0
        return cls(lambda x: x[k], lambda x: e.copy(), lambda x: np.zeros((n, n)), label=f"x{k + 1}")

    @classmethod
    def from_profile(cls, profile: ProfileFunction, direction: Direction) -> "ScalarField":
        """u(xi(x)); gradient u' alpha and Hessian u'' alpha alpha^T."""
        a = direction.vector
        aa = np.outer(a, a)

        def value(x):
            return profile.eval(float(a @ x))

        def grad(x):
            return profile.d1(float(a @ x)) * a

        def hess(x):
            return profile.d2(float(a @ x)) * aa

        return cls(value, grad, hess, label=f"{profile.label} along {direction.alpha}")


# ---------------------------------------------------------------------------
# Finite differences
# ---------------------------------------------------------------------------


def _steps(x: np.ndarray, base: float) -> np.ndarray:
    return base * np.maximum(1.0, np.abs(x))


def _check_stencil(inside, x, h):
    if inside is None:
        return
    for k in range(x.size):
        for sgn in (1.0, -1.0):
            y = x.copy()
            y[k] += sgn * h[k]
            if not inside(y):
                raise StencilError(f"stencil point {y} leaves the domain")


def fd_gradient(func: Callable[[np.ndarray], float], point, inside=None) -> np.ndarray:
    """Central-difference gradient with step eps^(1/3) * max(1, |x_k|)."""
    x = _as_point(point)
    h = _steps(x, H1)
    _check_stencil(inside, x, h)
    out = np.empty(x.size)
    for k in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[k] += h[k]
        xm[k] -= h[k]
        out[k] = (func(xp) - func(xm)) / (2.0 * h[k])
    return out


def fd_hessian(func: Callable[[np.ndarray], float], point, inside=None) -> np.ndarray:
    """Central-difference Hessian with step eps^(1/4) * max(1, |x_k|)."""
    x = _as_point(point)
    h = _steps(x, H2)
    _check_stencil(inside, x, h)
    n = x.size
    f0 = func(x)
    out = np.empty((n, n))
    for i in range(n):
        xp, xm = x.copy(), x.copy()
        xp[i] += h[i]
        xm[i] -= h[i]
        out[i, i] = (func(xp) - 2.0 * f0 + func(xm)) / (h[i] * h[i])
        for j in range(i + 1, n):
            acc = 0.0
            for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                y = x.copy()
                y[i] += si * h[i]
                y[j] += sj * h[j]
                acc += si * sj * func(y)
            out[i, j] = out[j, i] = acc / (4.0 * h[i] * h[j])
    return out


def fd_jacobian(func: Callable[[np.ndarray], np.ndarray], point, step: float = H1) -> np.ndarray:
    """Central differences of an array-valued function; derivative index first."""
    x = _as_point(point)
    h = _steps(x, step)
    cols = []
    for k in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[k] += h[k]
        xm[k] -= h[k]
        cols.append((np.asarray(func(xp)) - np.asarray(func(xm))) / (2.0 * h[k]))
    return np.stack(cols)


def fd_second(func: Callable[[np.ndarray], np.ndarray], point) -> np.ndarray:
    """Second partials of an array-valued function, shape (n, n, *out)."""
    x = _as_point(point)
    h = _steps(x, H2)
    n = x.size
    f0 = np.asarray(func(x), dtype=float)
    out = np.empty((n, n) + f0.shape)
    for i in range(n):
        xp, xm = x.copy(), x.copy()
        xp[i] += h[i]
        xm[i] -= h[i]
        out[i, i] = (np.asarray(func(xp)) - 2.0 * f0 + np.asarray(func(xm))) / (h[i] * h[i])
        for j in range(i + 1, n):
            acc = np.zeros_like(f0)
            for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                y = x.copy()
                y[i] += si * h[i]
                y[j] += sj * h[j]
                acc = acc + si * sj * np.asarray(func(y))
            out[i, j] = out[j, i] = acc / (4.0 * h[i] * h[j])
    return out


# ---------------------------------------------------------------------------
# Sample grids
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SampleGrid:
    points: np.ndarray
    margin: float = 0.1
    seed: int = 0
    box: tuple[tuple[float, float], ...] = field(default=())

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def sample_grid(
    dim: int,
    count: int = 100,
    seed: int = 0,
    box: Sequence[tuple[float, float]] | None = None,
    margin: float = 0.1,
    loci: Sequence[Callable[[np.ndarray], float]] = (),
) -> SampleGrid:
    """Scrambled Halton points in ``box`` kept ``margin`` away from each locus.

    A locus is a function whose zero set is singular; points with
    ``|locus(x)| < margin`` are rejected and replaced by further draws.
    """
    if count < 1:
        raise ValueError("grid count must be >= 1")
    box = tuple((float(lo), float(hi)) for lo, hi in (box or [(0.0, 1.0)] * dim))
    if len(box) != dim:
        raise ValueError("box dimension mismatch")
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])
    sampler = qmc.Halton(d=dim, scramble=True, seed=seed)
    kept: list[np.ndarray] = []
    drawn = 0
    while len(kept) < count:
        batch = qmc.scale(sampler.random(count), lo, hi)
        drawn += count
        for p in batch:
            if all(abs(locus(p)) >= margin for locus in loci):
                kept.append(p)
                if len(kept) == count:
                    break
        if drawn > 50 * count and len(kept) < count:
            raise ValueError("could not place grid points away from singular loci")
    return SampleGrid(np.array(kept), margin=margin, seed=seed, box=box)
