"""Warped products g + f^2 g_fiber and their Einstein residuals.

Three routes to the same condition are provided: the Ricci tensor of the
assembled metric, the base/fiber/scalar block system, and the scalar
identities that follow from contracting it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .chart import Direction, SampleGrid, ScalarField, Signature, fd_gradient, fd_hessian
from .curvature import (
    ANALYTIC,
    FD,
    MetricField,
    covariant_derivatives,
    curvature,
    flat_metric,
    hyperbolic_halfspace,
    round_sphere,
)

TOL_ANALYTIC = 1e-6
TOL_FD = 1e-4


def default_tolerance(mode: str) -> float:
    return TOL_ANALYTIC if mode == ANALYTIC else TOL_FD


class WarpingError(ValueError):
    """The warping function is not positive at a requested point."""


# ---------------------------------------------------------------------------
# Specs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FiberDescriptor:
    m: int
    metric: MetricField
    mu_claim: float
    box: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("fiber dimension must be >= 2")
        if self.metric.dim != self.m:
            raise ValueError("fiber metric dimension does not match m")
        if not self.box:
            object.__setattr__(self, "box", ((0.0, 1.0),) * self.m)


def flat_fiber(m: int, sig: Signature | None = None) -> FiberDescriptor:
    return FiberDescriptor(m, flat_metric(sig or Signature.euclidean(m)), 0.0)


def sphere_fiber(m: int) -> FiberDescriptor:
    box = ((0.6, 2.5),) * (m - 1) + ((0.0, 6.0),)
    return FiberDescriptor(m, round_sphere(m), float(m - 1), box)


def hyperbolic_fiber(m: int) -> FiberDescriptor:
    box = ((0.0, 1.0),) * (m - 1) + ((0.5, 1.5),)
    return FiberDescriptor(m, hyperbolic_halfspace(m), -float(m - 1), box)


FIBERS = {"flat": flat_fiber, "sphere": sphere_fiber, "hyperbolic": hyperbolic_fiber}


@dataclass(frozen=True)
class WarpedProductSpec:
    base: MetricField
    fiber: FiberDescriptor
    f: ScalarField
    lambda_claim: float
    direction: Direction | None = None
    base_box: tuple[tuple[float, float], ...] = ()
    label: str = ""

    @property
    def n(self) -> int:
        return self.base.dim

    @property
    def m(self) -> int:
        return self.fiber.m

    @property
    def mode(self) -> str:
        return self.base.derivative_mode

    def split(self, point) -> tuple[np.ndarray, np.ndarray]:
        p = np.asarray(point, dtype=float)
        return p[: self.n], p[self.n :]

    def with_mode(self, mode: str) -> "WarpedProductSpec":
        f = self.f if mode == ANALYTIC else self.f.numeric()
        fiber = FiberDescriptor(self.fiber.m, self.fiber.metric.with_mode(mode), self.fiber.mu_claim, self.fiber.box)
        return WarpedProductSpec(
            self.base.with_mode(mode), fiber, f, self.lambda_claim, self.direction, self.base_box, self.label
        )

    def scaled_fiber(self, c: float) -> "WarpedProductSpec":
        """(f/c, c^2 g_fiber): the same warped metric, written differently."""
        if c <= 0:
            raise ValueError("scale must be positive")
        f = self.f
        fm = self.fiber.metric
        f_scaled = ScalarField(
            lambda x: f(x) / c,
            None if f.grad_fn is None else (lambda x: f.grad(x) / c),
            None if f.hess_fn is None else (lambda x: f.hess(x) / c),
            label=f"({f.label})/{c}",
        )
        metric = MetricField(
            fm.dim,
            lambda y: c * c * fm.g(y),
            None if fm.d1 is None else (lambda y: c * c * fm.dg(y)),
            None if fm.d2 is None else (lambda y: c * c * fm.ddg(y)),
            fm.singular_loci,
            fm.derivative_mode,
            label=f"{c}^2 {fm.label}",
        )
        fiber = FiberDescriptor(self.m, metric, self.fiber.mu_claim, self.fiber.box)
        return WarpedProductSpec(self.base, fiber, f_scaled, self.lambda_claim, self.direction, self.base_box, self.label)

    def grid(self, count: int = 100, seed: int = 0, margin: float = 0.1) -> SampleGrid:
        """Quasi-random points on the product chart, away from every singular locus."""
        from .chart import sample_grid

        box = tuple(self.base_box or ((0.0, 1.0),) * self.n) + tuple(self.fiber.box)
        n = self.n
        loci = [(lambda p, h=h: h(p[:n])) for h in self.base.singular_loci]
        loci += [(lambda p, h=h: h(p[n:])) for h in self.fiber.metric.singular_loci]
        loci.append(lambda p: self.f(p[:n]))
        return sample_grid(n + self.m, count, seed, box, margin, loci)


def assemble_warped_metric(spec: WarpedProductSpec) -> MetricField:
    """Block metric diag(g(x), f(x)^2 g_fiber(y)), base coordinates first."""
    n, m = spec.n, spec.m
    N = n + m
    base, fib, f = spec.base, spec.fiber.metric, spec.f

    def fval(x):
        v = f(x)
        if not v > 0.0:
            raise WarpingError(f"warping function is {v} at {x}")
        return v

    def comp(p):
        x, y = p[:n], p[n:]
        out = np.zeros((N, N))
        out[:n, :n] = base.g(x)
        out[n:, n:] = fval(x) ** 2 * fib.g(y)
        return out

    def d1(p):
        x, y = p[:n], p[n:]
        fv = fval(x)
        df = f.grad(x)
        gt = fib.g(y)
        out = np.zeros((N, N, N))
        out[:n, :n, :n] = base.dg(x)
        out[:n, n:, n:] = np.einsum("k,ab->kab", 2.0 * fv * df, gt)
        out[n:, n:, n:] = fv**2 * fib.dg(y)
        return out

    def d2(p):
        x, y = p[:n], p[n:]
        fv = fval(x)
        df = f.grad(x)
        hf = f.hess(x)
        gt = fib.g(y)
        dgt = fib.dg(y)
        out = np.zeros((N, N, N, N))
        out[:n, :n, :n, :n] = base.ddg(x)
        out[:n, :n, n:, n:] = np.einsum("lk,ab->lkab", 2.0 * (np.outer(df, df) + fv * hf), gt)
        mixed = np.einsum("l,kab->lkab", 2.0 * fv * df, dgt)
        out[:n, n:, n:, n:] = mixed
        out[n:, :n, n:, n:] = np.transpose(mixed, (1, 0, 2, 3))
        out[n:, n:, n:, n:] = fv**2 * fib.ddg(y)
        return out

    loci = tuple((lambda p, h=h: h(p[:n])) for h in base.singular_loci)
    loci += tuple((lambda p, h=h: h(p[n:])) for h in fib.singular_loci)
    return MetricField(
        N,
        comp,
        d1,
        d2,
        loci,
        derivative_mode=base.derivative_mode,
        label=f"({base.label}) x_f ({fib.label})",
    )


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass
class EquationResidual:
    label: str
    values: np.ndarray  # per point; tensors are reduced to their max |component|
    tolerance: float

    @property
    def sup(self) -> float:
        return float(np.max(np.abs(self.values))) if len(self.values) else 0.0

    @property
    def passed(self) -> bool:
        return bool(self.sup <= self.tolerance)

    def to_dict(self) -> dict:
        return {
            "sup": self.sup,
            "tolerance": self.tolerance,
            "verdict": "pass" if self.passed else "fail",
        }


@dataclass
class ResidualReport:
    title: str
    equations: dict[str, EquationResidual] = field(default_factory=dict)
    mode: str = ANALYTIC
    best_fit_lambda: float | None = None
    lambda_used: float | None = None
    applicable: bool = True
    notes: list[str] = field(default_factory=list)

    def add(self, label: str, values: Iterable[float], tolerance: float) -> EquationResidual:
        eq = EquationResidual(label, np.asarray(list(values), dtype=float), tolerance)
        self.equations[label] = eq
        return eq

    def __getitem__(self, label: str) -> EquationResidual:
        return self.equations[label]

    @property
    def sup(self) -> float:
        return max((e.sup for e in self.equations.values()), default=0.0)

    @property
    def passed(self) -> bool:
        return self.applicable and all(e.passed for e in self.equations.values())

    @property
    def verdict(self) -> str:
        if not self.applicable:
            return "not-applicable"
        return "pass" if self.passed else "fail"

    def to_dict(self) -> dict:
        return {
            "title": self.title,
            "mode": self.mode,
            "lambda": self.lambda_used,
            "best_fit_lambda": self.best_fit_lambda,
            "applicable": self.applicable,
            "equations": {k: e.to_dict() for k, e in self.equations.items()},
            "sup": self.sup,
            "verdict": self.verdict,
            "notes": list(self.notes),
        }


def _tol(tolerance: float | None, mode: str) -> float:
    return default_tolerance(mode) if tolerance is None else float(tolerance)


def _points(grid: SampleGrid | np.ndarray) -> np.ndarray:
    return grid.points if isinstance(grid, SampleGrid) else np.atleast_2d(np.asarray(grid, dtype=float))


# ---------------------------------------------------------------------------
# Residuals
# ---------------------------------------------------------------------------


def einstein_residual(metric: MetricField, lam: float, grid, tolerance: float | None = None) -> ResidualReport:
    """Sup-norm of Ric - lam g over the grid, plus the least-squares Einstein constant."""
    tol = _tol(tolerance, metric.derivative_mode)
    per_point = []
    num = den = 0.0
    for p in _points(grid):
        b = curvature(metric, p)
        per_point.append(np.max(np.abs(b.ricci - lam * b.metric)))
        num += float(np.sum(b.ricci * b.metric))
        den += float(np.sum(b.metric * b.metric))
    report = ResidualReport("einstein", mode=metric.derivative_mode, lambda_used=lam)
    report.add("Ric - lambda g", per_point, tol)
    report.best_fit_lambda = num / den if den else None
    return report


def oneill_residuals(
    spec: WarpedProductSpec, lam: float, mu: float, grid, tolerance: float | None = None
) -> ResidualReport:
    """Residuals of the base, fiber and scalar equations equivalent to Ric = lam g."""
    tol = _tol(tolerance, spec.mode)
    m = spec.m
    base_res, fiber_res, scalar_res = [], [], []
    for p in _points(grid):
        x, y = spec.split(p)
        b = curvature(spec.base, x)
        d = covariant_derivatives(spec.base, spec.f, x, b)
        f = d.value
        base_res.append(np.max(np.abs(b.ricci - (m / f) * d.hess - lam * b.metric)))
        fb = curvature(spec.fiber.metric, y)
        fiber_res.append(np.max(np.abs(fb.ricci - mu * fb.metric)))
        scalar_res.append(f * d.laplacian + (m - 1) * d.grad_norm2 + lam * f * f - mu)
    report = ResidualReport("oneill", mode=spec.mode, lambda_used=lam)
    report.add("base: Ric - (m/f) Hess f - lambda g", base_res, tol)
    report.add("fiber: Ric_F - mu g_F", fiber_res, tol)
    report.add("scalar: f Lap f + (m-1)|grad f|^2 + lambda f^2 - mu", scalar_res, tol)
    return report


def horizontal_residual_tensor(spec: WarpedProductSpec, lam: float, x) -> np.ndarray:
    """Signed n x n residual Ric - (m/f) Hess f - lam g at a base point."""
    b = curvature(spec.base, x)
    d = covariant_derivatives(spec.base, spec.f, x, b)
    return b.ricci - (spec.m / d.value) * d.hess - lam * b.metric


def scalar_identities(
    spec: WarpedProductSpec, lam: float, mu: float, grid, tolerance: float | None = None
) -> ResidualReport:
    """Pointwise residuals of the contracted identities on the base."""
    n, m = spec.n, spec.m
    if m < 2:
        raise ValueError("scalar identities need fiber dimension m >= 2")
    tol = _tol(tolerance, spec.mode)
    trace, gradient, divergence = [], [], []
    for p in _points(grid):
        x, _ = spec.split(p)
        b = curvature(spec.base, x)
        d = covariant_derivatives(spec.base, spec.f, x, b)
        f, R = d.value, b.scalar
        trace.append(R * f * f - m * f * d.laplacian - n * f * f * lam)
        gradient.append(d.grad_norm2 + (lam * (m - n) + R) / (m * (m - 1)) * f * f - mu / (m - 1))
        div_f_grad_f = d.grad_norm2 + f * d.laplacian
        divergence.append(div_f_grad_f + (m - 2) * d.grad_norm2 + lam * f * f - mu)
    report = ResidualReport("scalar identities", mode=spec.mode, lambda_used=lam)
    report.add("R f^2 - m f Lap f - n lambda f^2", trace, tol)
    report.add("|grad f|^2 + (lambda(m-n)+R)/(m(m-1)) f^2 - mu/(m-1)", gradient, tol)
    report.add("div(f grad f) + (m-2)|grad f|^2 + lambda f^2 - mu", divergence, tol)
    return report


@dataclass(frozen=True)
class Obstruction:
    margin: float
    verdict: str

    @property
    def admissible(self) -> bool:
        return self.margin >= 0.0


def obstruction_margin(R: float, lam: float, n: int, m: int) -> Obstruction:
    """lam (n - m) - R; a negative margin forces a constant warping function."""
    margin = lam * (n - m) - R
    if margin > 0:
        verdict = "admissible"
    elif margin == 0:
        verdict = "boundary"
    else:
        verdict = "warping must be trivial (mu=0 case)"
    return Obstruction(margin, verdict)


def _covariant_laplacian(metric: MetricField, h, x) -> float:
    b = curvature(metric, x)
    dh = fd_gradient(h, x)
    hh = fd_hessian(h, x) - np.einsum("kij,k->ij", b.christoffel, dh)
    return float(np.einsum("ij,ij->", b.inverse, hh))


def bochner_identities(
    spec: WarpedProductSpec, grid, tolerance: float | None = None, constancy_tol: float = 1e-8
) -> ResidualReport:
    """Pointwise chain behind the constant-scalar-curvature rigidity argument.

    Only applicable when the base scalar curvature is constant on the grid
    and the claimed Einstein constant equals R/(n-1); otherwise the report
    comes back marked not applicable.  Third derivatives of f are taken by
    finite differences, so the FD tolerance is the default.
    """
    n, m = spec.n, spec.m
    lam = spec.lambda_claim
    pts = _points(grid)
    report = ResidualReport("bochner", mode=spec.mode, lambda_used=lam)
    scalars = np.array([curvature(spec.base, spec.split(p)[0]).scalar for p in pts])
    R = float(np.mean(scalars))
    if np.ptp(scalars) > constancy_tol or abs(lam - R / (n - 1)) > constancy_tol:
        report.applicable = False
        report.notes.append(f"hypothesis fails: lambda={lam}, R/(n-1)={R / (n - 1)}, spread of R={np.ptp(scalars)}")
        return report
    tol = TOL_FD if tolerance is None else tolerance
    base, f = spec.base, spec.f

    def grad_norm2(x):
        return covariant_derivatives(base, f, x).grad_norm2

    def laplacian(x):
        return covariant_derivatives(base, f, x).laplacian

    lap_eq, ric_grad, bochner, hess_eq, ric_norm = [], [], [], [], []
    for p in pts:
        x, _ = spec.split(p)
        b = curvature(base, x)
        d = covariant_derivatives(base, f, x, b)
        grad_up = b.inverse @ d.grad
        ric_ff = float(grad_up @ b.ricci @ grad_up)
        hess_up = b.inverse @ d.hess @ b.inverse
        hess_norm2 = float(np.einsum("ij,ij->", hess_up, d.hess))
        ric_up = b.inverse @ b.ricci @ b.inverse
        ric_norm2 = float(np.einsum("ij,ij->", ric_up, b.ricci))
        half_lap = 0.5 * _covariant_laplacian(base, grad_norm2, x)
        grad_lap = fd_gradient(laplacian, x)
        lap_eq.append(-d.laplacian - R * d.value / (m * (n - 1)))
        ric_grad.append(ric_ff)
        bochner.append(half_lap - hess_norm2 - ric_ff - float(grad_up @ grad_lap))
        hess_eq.append(hess_norm2 - R * R * d.value**2 / (m * m * (n - 1) ** 2))
        ric_norm.append(ric_norm2 - R * R / (n - 1))
    report.add("-Lap f - R f/(m(n-1))", lap_eq, tol)
    report.add("Ric(grad f, grad f)", ric_grad, tol)
    report.add("Bochner formula", bochner, tol)
    report.add("|Hess f|^2 - R^2 f^2/(m^2 (n-1)^2)", hess_eq, tol)
    report.add("|Ric|^2 - R^2/(n-1)", ric_norm, tol)
    return report


def cross_validate(spec: WarpedProductSpec, lam: float, mu: float, grid, tolerance: float | None = None) -> dict:
    """Compare the direct Einstein residual with the block-system maxima.

    Both sups are floored at the tolerance before taking their ratio, so two
    passing computations always agree.
    """
    tol = _tol(tolerance, spec.mode)
    direct = einstein_residual(assemble_warped_metric(spec), lam, grid, tol)
    blocks = oneill_residuals(spec, lam, mu, grid, tol)
    a, b = max(direct.sup, tol), max(blocks.sup, tol)
    ratio = a / b
    return {
        "direct": direct.sup,
        "blocks": blocks.sup,
        "ratio": ratio,
        "agree": bool(0.1 <= ratio <= 10.0 and direct.passed == blocks.passed),
        "reports": (direct, blocks),
    }
