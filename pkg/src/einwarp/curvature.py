"""Levi-Civita connection, Ricci tensor and scalar curvature of coordinate metrics.

Index conventions: ``dg[k, i, j] = d_k g_ij`` and ``ddg[l, k, i, j] = d_l d_k g_ij``;
``Gamma[k, i, j]`` is the Christoffel symbol with upper index ``k``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .chart import (
    Direction,
    ProfileFunction,
    ScalarField,
    Signature,
    fd_jacobian,
    fd_second,
)

ANALYTIC = "analytic"
FD = "fd"
DET_FLOOR = 1e-12


class SingularMetricError(ValueError):
    """The metric is degenerate (or undefined) at the requested point."""


@dataclass(frozen=True)
class MetricField:
    """A coordinate metric with optional analytic derivative oracles.

    In ``fd`` mode, or when an oracle is missing, derivatives come from
    central differences of ``components``.
    """

    dim: int
    components: Callable[[np.ndarray], np.ndarray]
    d1: Callable[[np.ndarray], np.ndarray] | None = None
    d2: Callable[[np.ndarray], np.ndarray] | None = None
    singular_loci: tuple[Callable[[np.ndarray], float], ...] = ()
    derivative_mode: str = ANALYTIC
    label: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.derivative_mode not in (ANALYTIC, FD):
            raise ValueError(f"unknown derivative mode {self.derivative_mode!r}")

    def with_mode(self, mode: str) -> "MetricField":
        return replace(self, derivative_mode=mode)

    @property
    def analytic(self) -> bool:
        return self.derivative_mode == ANALYTIC and self.d1 is not None and self.d2 is not None

    def g(self, x) -> np.ndarray:
        return np.asarray(self.components(np.asarray(x, dtype=float)), dtype=float)

    def dg(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.derivative_mode == ANALYTIC and self.d1 is not None:
            return np.asarray(self.d1(x), dtype=float)
        return fd_jacobian(self.components, x)

    def ddg(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.derivative_mode == ANALYTIC and self.d2 is not None:
            return np.asarray(self.d2(x), dtype=float)
        return fd_second(self.components, x)

    def inverse(self, x) -> np.ndarray:
        g = self.g(x)
        if not np.all(np.isfinite(g)) or abs(np.linalg.det(g)) <= DET_FLOOR:
            raise SingularMetricError(f"metric {self.label or ''} is singular at {x}")
        return np.linalg.inv(g)


@dataclass(frozen=True)
class CurvatureBundle:
    metric: np.ndarray
    inverse: np.ndarray
    christoffel: np.ndarray
    ricci: np.ndarray
    scalar: float


def _connection(ginv: np.ndarray, dg: np.ndarray) -> np.ndarray:
    # T[l, i, j] = d_i g_jl + d_j g_il - d_l g_ij
    T = np.einsum("ijl->lij", dg) + np.einsum("jil->lij", dg) - dg
    return 0.5 * np.einsum("kl,lij->kij", ginv, T)


def christoffel(metric: MetricField, x) -> np.ndarray:
    """Gamma^k_ij = 1/2 g^kl (d_i g_jl + d_j g_il - d_l g_ij)."""
    return _connection(metric.inverse(x), metric.dg(x))


def curvature(metric: MetricField, x) -> CurvatureBundle:
    x = np.asarray(x, dtype=float)
    g = metric.g(x)
    ginv = metric.inverse(x)
    dg = metric.dg(x)
    ddg = metric.ddg(x)

    T = np.einsum("ijl->lij", dg) + np.einsum("jil->lij", dg) - dg
    gamma = 0.5 * np.einsum("kl,lij->kij", ginv, T)
    # d_m g^kl = -g^ka (d_m g_ab) g^bl
    dginv = -np.einsum("ka,mab,bl->mkl", ginv, dg, ginv)
    dT = (
        np.einsum("mijl->mlij", ddg)
        + np.einsum("mjil->mlij", ddg)
        - ddg
    )
    dgamma = 0.5 * (
        np.einsum("mkl,lij->mkij", dginv, T) + np.einsum("kl,mlij->mkij", ginv, dT)
    )
    # R_ij = d_k G^k_ij - d_i G^k_kj + G^k_kl G^l_ij - G^k_il G^l_kj
    ric = (
        np.einsum("kkij->ij", dgamma)
        - np.einsum("ikkj->ij", dgamma)
        + np.einsum("kkl,lij->ij", gamma, gamma)
        - np.einsum("kil,lkj->ij", gamma, gamma)
    )
    ric = 0.5 * (ric + ric.T)
    scalar = float(np.einsum("ij,ij->", ginv, ric))
    return CurvatureBundle(g, ginv, gamma, ric, scalar)


def ricci(metric: MetricField, x) -> np.ndarray:
    return curvature(metric, x).ricci


def scalar_curvature(metric: MetricField, x) -> float:
    return curvature(metric, x).scalar


# ---------------------------------------------------------------------------
# Covariant calculus of scalar fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FieldDerivatives:
    """Value, gradient, covariant Hessian, Laplacian and |grad|^2 of a field."""

    value: float
    grad: np.ndarray
    hess: np.ndarray
    laplacian: float
    grad_norm2: float


def covariant_derivatives(metric: MetricField, f: ScalarField, x, bundle: CurvatureBundle | None = None) -> FieldDerivatives:
    """Hessian of ``f`` in the Levi-Civita connection of ``metric``: d2f - Gamma df."""
    x = np.asarray(x, dtype=float)
    ginv = bundle.inverse if bundle is not None else metric.inverse(x)
    gamma = bundle.christoffel if bundle is not None else christoffel(metric, x)
    df = f.grad(x)
    hess = f.hess(x) - np.einsum("kij,k->ij", gamma, df)
    return FieldDerivatives(
        value=f(x),
        grad=df,
        hess=hess,
        laplacian=float(np.einsum("ij,ij->", ginv, hess)),
        grad_norm2=float(df @ ginv @ df),
    )


# ---------------------------------------------------------------------------
# Constructors
# ---------------------------------------------------------------------------


def flat_metric(sig: Signature) -> MetricField:
    n = len(sig)
    eta = sig.matrix
    return MetricField(
        dim=n,
        components=lambda x: eta.copy(),
        d1=lambda x: np.zeros((n, n, n)),
        d2=lambda x: np.zeros((n, n, n, n)),
        label=f"flat{sig.eps}",
    )


def conformally_flat_metric(
    sig: Signature,
    phi: ScalarField,
    loci: Sequence[Callable[[np.ndarray], float]] = (),
    label: str = "",
) -> MetricField:
    """g_bar = eta / phi^2 on a pseudo-Euclidean chart, with analytic derivatives."""
    n = len(sig)
    eta = sig.matrix

    def comp(x):
        return eta / phi(x) ** 2

    def d1(x):
        p = phi(x)
        dp = phi.grad(x)
        return np.einsum("k,ij->kij", -2.0 * dp / p**3, eta)

    def d2(x):
        p = phi(x)
        dp = phi.grad(x)
        hp = phi.hess(x)
        coeff = 6.0 * np.outer(dp, dp) / p**4 - 2.0 * hp / p**3
        return np.einsum("lk,ij->lkij", coeff, eta)

    analytic = phi.analytic
    return MetricField(
        dim=n,
        components=comp,
        d1=d1 if analytic else None,
        d2=d2 if analytic else None,
        singular_loci=tuple(loci) or (lambda x: phi(x),),
        derivative_mode=ANALYTIC if analytic else "fd",
        label=label or f"eta/phi^2, phi={phi.label}",
    )


def hyperbolic_halfspace(n: int) -> MetricField:
    """delta / x_n^2 on x_n > 0: sectional curvature -1."""
    return conformally_flat_metric(
        Signature.euclidean(n),
        ScalarField.coordinate(n - 1, n),
        loci=(lambda x: x[-1],),
        label=f"H^{n}",
    )


def round_sphere(m: int) -> MetricField:
    """Unit sphere S^m in hyperspherical angles: diag(1, s1^2, s1^2 s2^2, ...).

    The last angle is the azimuth; the polar angles must stay off 0 and pi.
    """

    def diag(x):
        s2 = np.sin(x[: m - 1]) ** 2
        h = np.ones(m)
        for i in range(1, m):
            h[i] = h[i - 1] * s2[i - 1]
        return h

    def comp(x):
        return np.diag(diag(x))

    def d1(x):
        h = diag(x)
        cot = np.cos(x[: m - 1]) / np.sin(x[: m - 1])
        out = np.zeros((m, m, m))
        for i in range(m):
            for k in range(min(i, m - 1)):
                out[k, i, i] = 2.0 * cot[k] * h[i]
        return out

    def d2(x):
        h = diag(x)
        th = x[: m - 1]
        cot = np.cos(th) / np.sin(th)
        out = np.zeros((m, m, m, m))
        for i in range(m):
            for k in range(min(i, m - 1)):
                for l in range(min(i, m - 1)):
                    if k == l:
                        # d^2/dt^2 sin^2 t = 2 cos 2t
                        out[l, k, i, i] = 2.0 * np.cos(2 * th[k]) / np.sin(th[k]) ** 2 * h[i]
                    else:
                        out[l, k, i, i] = 4.0 * cot[k] * cot[l] * h[i]
        return out

    loci = tuple((lambda x, k=k: np.sin(x[k])) for k in range(m - 1))
    return MetricField(m, comp, d1, d2, singular_loci=loci, label=f"S^{m}")


# ---------------------------------------------------------------------------
# Closed forms for g_bar = g / phi^2 over a pseudo-Euclidean g
# ---------------------------------------------------------------------------


def conformal_ricci_closed(phi: ScalarField, sig: Signature, x) -> np.ndarray:
    """Ricci of eta/phi^2 from the flat Hessian, Laplacian and gradient of phi."""
    x = np.asarray(x, dtype=float)
    n = len(sig)
    eta = sig.matrix
    p = phi(x)
    if p == 0.0:
        raise SingularMetricError(f"conformal function vanishes at {x}")
    dp = phi.grad(x)
    hp = phi.hess(x)
    eps = np.asarray(sig.eps, dtype=float)
    lap = float(np.dot(eps, np.diag(hp)))
    norm2 = float(np.dot(eps, dp * dp))
    return ((n - 2) * p * hp + (p * lap - (n - 1) * norm2) * eta) / p**2


def conformal_scalar_closed(phi: ProfileFunction, direction: Direction, n: int, xi: float) -> float:
    """Scalar curvature of eta/phi(xi)^2: (n-1)(2 phi phi'' - n phi'^2) kappa."""
    p, dp, ddp = phi.eval(xi), phi.d1(xi), phi.d2(xi)
    return (n - 1) * (2.0 * p * ddp - n * dp * dp) * direction.kappa


def conformal_scalar_field(phi: ScalarField, sig: Signature, x) -> float:
    """(n-1)(2 phi Lap(phi) - n |grad phi|^2) for a general conformal function."""
    x = np.asarray(x, dtype=float)
    n = len(sig)
    eps = np.asarray(sig.eps, dtype=float)
    dp = phi.grad(x)
    lap = float(np.dot(eps, np.diag(phi.hess(x))))
    return (n - 1) * (2.0 * phi(x) * lap - n * float(np.dot(eps, dp * dp)))
