"""ODE reduction for translation-invariant conformal bases with Ricci-flat fiber.

With phi and f depending only on xi = <alpha, x>, the Einstein condition
becomes a system for (phi, f), or equivalently for (phi, G) where
f'/f = G/phi.  This module evaluates those systems, builds f from G by
quadrature, integrates the (phi, G) system as an initial value problem and
lifts trajectories back to full warped metrics.
"""

from __future__ import annotations

import csv
import io
import math
from functools import lru_cache
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicHermiteSpline

from .chart import Direction, ProfileFunction, ScalarField, Signature, sample_grid
from .curvature import conformally_flat_metric
from .warp import FiberDescriptor, ResidualReport, WarpedProductSpec, assemble_warped_metric, einstein_residual


class NegativeRadicand(ValueError):
    """kappa (lambda (n - m) - R) < 0: no real invariant solution for these data."""


class InadmissibleInitialData(ValueError):
    pass


class SingularityReached(RuntimeError):
    def __init__(self, xi: float, reason: str):
        super().__init__(f"{reason} at xi={xi:.6g}")
        self.xi = xi
        self.reason = reason


@dataclass(frozen=True)
class ReducedParams:
    n: int
    m: int
    lam: float
    kappa: int = 1
    g_sign: int = 1

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("base dimension n must be >= 3")
        if self.m < 2:
            raise ValueError("fiber dimension m must be >= 2")
        if self.kappa not in (1, -1):
            raise ValueError("kappa must be +1 or -1 (the lightlike case is not handled)")
        if self.g_sign not in (1, -1):
            raise ValueError("g_sign must be +1 or -1")

    @property
    def kl(self) -> float:
        return self.kappa * self.lam


def G_of(lam: float, Rbar: float, kappa: float, n: int, m: int, g_sign: int = 1) -> float:
    """Signed root of kappa (lambda (n - m) - Rbar) / (m (m - 1))."""
    radicand = kappa * (lam * (n - m) - Rbar) / (m * (m - 1))
    if radicand < 0:
        raise NegativeRadicand(f"radicand {radicand:.6g} < 0 (lambda={lam}, Rbar={Rbar}, kappa={kappa})")
    return math.copysign(math.sqrt(radicand), g_sign) if radicand else 0.0


# ---------------------------------------------------------------------------
# f from G by quadrature
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WarpValue:
    f: float
    log_derivative: float  # f'/f, which must equal G/phi


def warp_from_G(phi: ProfileFunction, G: ProfileFunction, theta: float, xi0: float, xi: float) -> WarpValue:
    """f(xi) = theta * exp(int_{xi0}^{xi} G/phi), so that f(xi0) = theta."""
    if theta <= 0:
        raise ValueError("theta must be positive")
    lo, hi = sorted((xi0, xi))
    # phi is continuous, so a sign change on [lo, hi] means a zero inside.
    probes = np.linspace(lo, hi, 65)
    vals = np.array([phi.eval(s) for s in probes])
    if np.any(vals == 0) or np.any(np.sign(vals) != np.sign(vals[0])):
        raise SingularityReached(float(probes[np.argmax(np.sign(vals) != np.sign(vals[0]))]), "phi vanishes")
    if xi == xi0:
        integral = 0.0
    else:
        integral, _ = integrate.quad(lambda s: G.eval(s) / phi.eval(s), xi0, xi, epsabs=1e-13, epsrel=1e-13, limit=200)
    return WarpValue(theta * math.exp(integral), G.eval(xi) / phi.eval(xi))


def warp_profile(phi: ProfileFunction, G: ProfileFunction, theta: float, xi0: float) -> ProfileFunction:
    """f as a profile; derivatives from f'/f = G/phi."""

    @lru_cache(maxsize=4096)
    def ev(s):
        return warp_from_G(phi, G, theta, xi0, s).f

    def d1(s):
        return ev(s) * G.eval(s) / phi.eval(s)

    def d2(s):
        p, dp, g, dg = phi.eval(s), phi.d1(s), G.eval(s), G.d1(s)
        r = g / p
        return ev(s) * (r * r + dg / p - g * dp / (p * p))

    return ProfileFunction(ev, d1, d2, phi.domain, label=f"{theta}*exp(int G/phi)")


# ---------------------------------------------------------------------------
# Residuals of the three ODE systems (left side minus right side)
# ---------------------------------------------------------------------------


def ode_residuals_general(phi: ProfileFunction, f: ProfileFunction, params: ReducedParams, xi: float) -> np.ndarray:
    n, m, kl = params.n, params.m, params.kl
    p, dp, ddp = phi.eval(xi), phi.d1(xi), phi.d2(xi)
    u, du, ddu = f.eval(xi), f.d1(xi), f.d2(xi)
    return np.array([
        (n - 2) * u * ddp - m * ddu * p - 2 * m * dp * du,
        u * p * ddp - (n - 1) * u * dp**2 + m * p * dp * du - kl * u,
        (n - 2) * u * p * dp * du - (m - 1) * p**2 * du**2 - u * ddu * p**2 - kl * u**2,
    ])


def ode_residuals_reduced(phi: ProfileFunction, G: ProfileFunction, params: ReducedParams, xi: float) -> np.ndarray:
    n, m, kl = params.n, params.m, params.kl
    p, dp, ddp = phi.eval(xi), phi.d1(xi), phi.d2(xi)
    g, dg = G.eval(xi), G.d1(xi)
    d_gphi = dg * p + g * dp
    return np.array([
        (n - 2) * p * ddp - m * d_gphi - m * g * g,
        p * ddp - (n - 1) * dp**2 + m * g * dp - kl,
        n * g * dp - d_gphi - m * g * g - kl,
    ])


def ode_residuals_constantR(phi: ProfileFunction, G: float, params: ReducedParams, xi: float) -> np.ndarray:
    n, m, kl = params.n, params.m, params.kl
    p, dp, ddp = phi.eval(xi), phi.d1(xi), phi.d2(xi)
    return np.array([
        (n - 2) * p * ddp - m * G * dp - m * G * G,
        p * ddp - (n - 1) * dp**2 + m * G * dp - kl,
        (n - 1) * G * dp - m * G * G - kl,
    ])


# ---------------------------------------------------------------------------
# Initial value problem
# ---------------------------------------------------------------------------


def evolution(state: np.ndarray, params: ReducedParams) -> np.ndarray:
    """(phi, phi', G)' using the third equation for G' and the first for phi''."""
    p, dp, g = state
    n, m = params.n, params.m
    dg = ((n - 1) * g * dp - m * g * g - params.kl) / p
    ddp = m * (dg * p + g * dp + g * g) / ((n - 2) * p)
    return np.array([dp, ddp, dg])


def constraint(state: np.ndarray, params: ReducedParams) -> float:
    """Second reduced equation, which contains no G'; zero on exact solutions."""
    p, dp, g = state
    ddp = evolution(state, params)[1]
    return p * ddp - (params.n - 1) * dp * dp + params.m * g * dp - params.kl


def admissible_initial_data(phi0: float, dphi0: float, params: ReducedParams) -> list[float]:
    """Values of G compatible with (phi, phi') at a point, sorted ascending.

    Eliminating G' with the third equation and phi'' between the first two
    leaves the quadratic

        m(m-1) G^2 - 2m(n-1) phi' G + (n-1)(n-2) phi'^2 + (m+n-2) kappa lambda = 0,

    which does not involve phi itself.
    """
    if phi0 == 0:
        raise ValueError("phi must be nonzero")
    n, m = params.n, params.m
    a = m * (m - 1)
    b = -2.0 * m * (n - 1) * dphi0
    c = (n - 1) * (n - 2) * dphi0**2 + (m + n - 2) * params.kl
    disc = b * b - 4 * a * c
    if disc < 0:
        return []
    if disc == 0:
        return [-b / (2 * a)]
    sq = math.sqrt(disc)
    # stable form avoids cancellation in the smaller root
    q = -0.5 * (b + math.copysign(sq, b)) if b != 0 else -0.5 * sq
    roots = sorted({q / a, c / q}) if q != 0 else sorted({sq / (2 * a), -sq / (2 * a)})
    return roots


@dataclass
class ReducedState:
    xi: float
    phi: float
    dphi: float
    G: float


@dataclass
class Trajectory:
    xi: np.ndarray
    states: np.ndarray  # columns phi, phi', G
    monitor: np.ndarray
    step: float
    params: ReducedParams
    diagnostic: str | None = None
    halted_at: float | None = None
    error_estimate: float | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def completed(self) -> bool:
        return self.diagnostic is None

    @property
    def phi(self) -> np.ndarray:
        return self.states[:, 0]

    @property
    def dphi(self) -> np.ndarray:
        return self.states[:, 1]

    @property
    def G(self) -> np.ndarray:
        return self.states[:, 2]

    def __len__(self) -> int:
        return len(self.xi)

    def state(self, i: int) -> ReducedState:
        return ReducedState(float(self.xi[i]), *map(float, self.states[i]))

    def derivatives(self) -> np.ndarray:
        return np.array([evolution(s, self.params) for s in self.states])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["xi", "phi", "dphi", "G", "monitor"])
        for x, (p, dp, g), mon in zip(self.xi, self.states, self.monitor):
            w.writerow([repr(float(x)), repr(float(p)), repr(float(dp)), repr(float(g)), repr(float(mon))])
        return buf.getvalue()

    def profiles(self) -> tuple[ProfileFunction, ProfileFunction]:
        """Piecewise Hermite interpolants of phi and G, with phi'' from the flow."""
        if len(self.xi) < 2:
            raise ValueError("trajectory too short to interpolate")
        rates = self.derivatives()
        order = np.argsort(self.xi)
        xs = self.xi[order]
        phi_s = CubicHermiteSpline(xs, self.phi[order], self.dphi[order])
        dphi_s = CubicHermiteSpline(xs, self.dphi[order], rates[order, 1])
        G_s = CubicHermiteSpline(xs, self.G[order], rates[order, 2])
        domain = (float(xs[0]), float(xs[-1]))
        phi = ProfileFunction(
            lambda s: float(phi_s(s)), lambda s: float(dphi_s(s)), lambda s: float(dphi_s(s, 1)), domain, "phi(traj)"
        )
        G = ProfileFunction(lambda s: float(G_s(s)), lambda s: float(G_s(s, 1)), lambda s: float(G_s(s, 2)), domain, "G(traj)")
        return phi, G


def _rk4(y, h, params):
    k1 = evolution(y, params)
    k2 = evolution(y + 0.5 * h * k1, params)
    k3 = evolution(y + 0.5 * h * k2, params)
    k4 = evolution(y + h * k3, params)
    return y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _march(initial: ReducedState, params, step, end, monitor_bound, phi_floor):
    y = np.array([initial.phi, initial.dphi, initial.G], dtype=float)
    nsteps = int(round(abs(end - initial.xi) / step))
    h = math.copysign(step, end - initial.xi)
    xs, ys, mons = [initial.xi], [y], [constraint(y, params)]
    for k in range(1, nsteps + 1):
        xi_next = initial.xi + k * h
        y_next = _rk4(y, h, params)
        if not np.all(np.isfinite(y_next)) or abs(y_next[0]) < phi_floor:
            return xs, ys, mons, f"singularity: phi -> 0 (pole of f)", xi_next
        mon = constraint(y_next, params)
        if not math.isfinite(mon) or abs(mon) > monitor_bound:
            return xs, ys, mons, f"constraint monitor {mon:.3g} exceeds {monitor_bound:g}", xi_next
        y = y_next
        xs.append(xi_next)
        ys.append(y)
        mons.append(mon)
    return xs, ys, mons, None, None


def integrate_reduced(
    initial: ReducedState,
    params: ReducedParams,
    step: float = 1e-3,
    span: tuple[float, float] | None = None,
    admissibility_tol: float = 1e-8,
    monitor_bound: float = 1e-6,
    estimate_error: bool = False,
) -> Trajectory:
    """Fixed-step RK4 for (phi, phi', G) with the G'-free equation as monitor.

    Integration stops early, with ``diagnostic`` set, when |phi| drops below
    1e-6 |phi0| or the monitor leaves its bound.  ``estimate_error`` reruns
    at half the step and records the largest state difference at the
    common nodes.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    if initial.phi == 0:
        raise InadmissibleInitialData("phi0 must be nonzero")
    y0 = np.array([initial.phi, initial.dphi, initial.G])
    gap = constraint(y0, params)
    if abs(gap) > admissibility_tol:
        roots = admissible_initial_data(initial.phi, initial.dphi, params)
        raise InadmissibleInitialData(
            f"initial data violate the constraint by {gap:.3g}; admissible G0 for this (phi0, phi0') are {roots}"
        )
    start, end = span if span is not None else (initial.xi, initial.xi + 1.0)
    if start != initial.xi:
        raise ValueError("span must start at the initial xi")
    phi_floor = 1e-6 * abs(initial.phi)
    xs, ys, mons, diag, where = _march(initial, params, step, end, monitor_bound, phi_floor)
    traj = Trajectory(np.array(xs), np.array(ys), np.array(mons), step, params, diag, where)
    if estimate_error:
        xs2, ys2, *_ = _march(initial, params, step / 2, end, monitor_bound, phi_floor)
        common = min(len(xs), (len(xs2) + 1) // 2)
        fine = np.array(ys2)[: 2 * common - 1 : 2]
        traj.error_estimate = float(np.max(np.abs(np.array(ys)[:common] - fine)))
    return traj


# ---------------------------------------------------------------------------
# Lifting back to a warped metric
# ---------------------------------------------------------------------------


def default_direction(params: ReducedParams) -> Direction:
    """Last coordinate axis for kappa = +1, a timelike first axis for kappa = -1."""
    n = params.n
    if params.kappa == 1:
        return Direction.axis(n, n - 1)
    return Direction.axis(n, 0, Signature.lorentzian(n))


def lift(trajectory: Trajectory, theta: float, fiber: FiberDescriptor, direction: Direction | None = None) -> WarpedProductSpec:
    params = trajectory.params
    direction = direction or default_direction(params)
    if round(direction.kappa) != params.kappa:
        raise ValueError("direction does not match the trajectory's kappa")
    phi, G = trajectory.profiles()
    xi0 = float(trajectory.xi[0])
    f = warp_profile(phi, G, theta, xi0)
    base = conformally_flat_metric(direction.sig, ScalarField.from_profile(phi, direction), label="eta/phi(traj)^2")
    lo, hi = phi.domain
    a = direction.vector
    # xi stays inside the trajectory range when the box is thin along alpha
    k = int(np.argmax(np.abs(a)))
    box = [(0.0, 1.0)] * params.n
    box[k] = tuple(sorted((lo / a[k], hi / a[k])))
    return WarpedProductSpec(base, fiber, ScalarField.from_profile(f, direction), params.lam, direction, tuple(box), "lifted")


def lift_and_verify(
    trajectory: Trajectory,
    theta: float,
    fiber: FiberDescriptor,
    grid=None,
    lam: float | None = None,
    tolerance: float = 1e-5,
    direction: Direction | None = None,
    count: int = 100,
    seed: int = 0,
) -> ResidualReport:
    """Einstein residual of the metric rebuilt from ``trajectory``.

    ``lam`` defaults to the trajectory's own constant; pass another value to
    measure the mismatch.
    """
    if fiber.mu_claim != 0.0:
        raise ValueError("the reduction assumes a Ricci-flat fiber")
    spec = lift(trajectory, theta, fiber, direction)
    if grid is None:
        a = spec.direction.vector
        lo, hi = trajectory.xi.min(), trajectory.xi.max()
        loci = [lambda p: float(a @ p[: spec.n]) - lo, lambda p: hi - float(a @ p[: spec.n])]
        box = tuple(spec.base_box) + tuple(fiber.box)
        grid = sample_grid(spec.n + spec.m, count, seed, box, margin=0.05 * (hi - lo), loci=loci)
    lam = trajectory.params.lam if lam is None else lam
    report = einstein_residual(assemble_warped_metric(spec), lam, grid, tolerance)
    report.title = "lifted trajectory"
    if not trajectory.completed:
        report.notes.append(f"trajectory halted: {trajectory.diagnostic} at xi={trajectory.halted_at}")
    return report
