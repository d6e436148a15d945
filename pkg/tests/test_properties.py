"""Randomized checks of structural invariants (hypothesis, 100 cases each)."""

import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from einwarp.chart import Direction, ProfileFunction, ScalarField, Signature, kappa, xi_coordinate
from einwarp.curvature import (
    conformal_ricci_closed,
    conformal_scalar_closed,
    conformally_flat_metric,
    curvature,
    scalar_curvature,
)
from einwarp.reduction import (
    ReducedParams,
    ReducedState,
    admissible_initial_data,
    integrate_reduced,
    ode_residuals_reduced,
    warp_from_G,
)
from einwarp.warp import (
    WarpedProductSpec,
    assemble_warped_metric,
    hyperbolic_fiber,
    obstruction_margin,
    scalar_identities,
    sphere_fiber,
)

CASES = settings(max_examples=100, deadline=None)

reals = st.floats(-3.0, 3.0, allow_nan=False)
signs = st.sampled_from([1, -1])
dims = st.integers(3, 5)


@st.composite
def signature_and_alpha(draw):
    n = draw(dims)
    eps = [draw(signs) for _ in range(n)]
    eps[draw(st.integers(0, n - 1))] = 1
    alpha = [draw(reals) for _ in range(n)]
    return Signature(eps), alpha


@CASES
@given(signature_and_alpha(), st.randoms(use_true_random=False))
def test_kappa_permutation_invariant(data, rnd):
    sig, alpha = data
    order = list(range(len(alpha)))
    rnd.shuffle(order)
    permuted = Signature([sig.eps[i] for i in order])
    assert math.isclose(kappa(alpha, sig), kappa([alpha[i] for i in order], permuted), rel_tol=1e-12, abs_tol=1e-12)


@CASES
@given(st.lists(reals, min_size=3, max_size=3), st.lists(reals, min_size=3, max_size=3), st.lists(reals, min_size=3, max_size=3))
def test_xi_linear(x, y, alpha):
    d = Direction(alpha, Signature.euclidean(3))
    lhs = xi_coordinate(np.add(x, y), d)
    assert math.isclose(lhs, xi_coordinate(x, d) + xi_coordinate(y, d), abs_tol=1e-12)


@st.composite
def profiles(draw):
    kind = draw(st.sampled_from(["affine", "exp", "reciprocal"]))
    if kind == "affine":
        return ProfileFunction.affine(draw(st.floats(-2, 2)), draw(st.floats(-2, 2)))
    if kind == "exp":
        return ProfileFunction.exponential(draw(st.floats(0.1, 3)), draw(st.floats(-1.5, 1.5)))
    return ProfileFunction.reciprocal_affine(draw(st.floats(0.1, 3)), draw(st.floats(0.2, 2)), 10.0)


@CASES
@given(profiles(), st.floats(-2, 2))
def test_profile_derivatives_against_fd(profile, xi):
    assert profile.check_derivatives([xi]) < 1e-6


def _conformal_spec(draw):
    """Random conformally flat base with a random invariant warp and fiber."""
    n = draw(dims)
    eps = [draw(signs) for _ in range(n)]
    eps[-1] = 1
    sig = Signature(eps)
    k = draw(st.integers(0, n - 1))
    if sig.eps[k] == -1:
        k = n - 1
    d = Direction.axis(n, k, sig)
    phi = ProfileFunction.exponential(draw(st.floats(0.5, 2)), draw(st.floats(-1, 1)))
    f = ProfileFunction.exponential(draw(st.floats(0.5, 2)), draw(st.floats(-1, 1)))
    fiber = draw(st.sampled_from([sphere_fiber, hyperbolic_fiber]))(draw(st.integers(2, 3)))
    base = conformally_flat_metric(sig, ScalarField.from_profile(phi, d))
    return WarpedProductSpec(base, fiber, ScalarField.from_profile(f, d), 0.0, d)


@st.composite
def warped_specs(draw):
    spec = _conformal_spec(draw)
    rng = np.random.default_rng(draw(st.integers(0, 2**16)))
    lo = np.array([b[0] for b in spec.fiber.box])
    hi = np.array([b[1] for b in spec.fiber.box])
    point = np.concatenate([rng.uniform(-0.5, 0.5, spec.n), rng.uniform(lo, hi)])
    return spec, point


@CASES
@given(warped_specs(), st.floats(0.05, 20.0))
def test_fiber_scaling_absorption(data, c):
    spec, p = data
    a = assemble_warped_metric(spec)
    b = assemble_warped_metric(spec.scaled_fiber(c))
    # powers of two are exact, so equality is bit-for-bit in that case
    c2 = 2.0 ** round(math.log2(c))
    b2 = assemble_warped_metric(spec.scaled_fiber(c2))
    assert np.array_equal(a.g(p), b2.g(p))
    np.testing.assert_allclose(a.g(p), b.g(p), rtol=1e-14)


@CASES
@given(warped_specs())
def test_ricci_symmetry_and_trace(data):
    spec, p = data
    metric = assemble_warped_metric(spec)
    g = metric.g(p)
    b = curvature(metric, p)
    assert np.allclose(b.christoffel, np.transpose(b.christoffel, (0, 2, 1)), rtol=0, atol=1e-12 * (1 + np.abs(b.christoffel).max()))
    assert np.array_equal(b.ricci, b.ricci.T)
    assert math.isclose(b.scalar, float(np.trace(np.linalg.solve(g, b.ricci))), rel_tol=1e-9, abs_tol=1e-9)


@CASES
@given(warped_specs())
def test_fd_matches_analytic_derivatives(data):
    spec, p = data
    metric = assemble_warped_metric(spec)
    fd = metric.with_mode("fd")
    scale1 = 1 + np.abs(metric.dg(p)).max()
    scale2 = 1 + np.abs(metric.ddg(p)).max()
    assert np.abs(metric.dg(p) - fd.dg(p)).max() < 1e-6 * scale1
    assert np.abs(metric.ddg(p) - fd.ddg(p)).max() < 1e-4 * scale2


@st.composite
def conformal_points(draw):
    n = draw(dims)
    eps = [draw(signs) for _ in range(n)]
    eps[-1] = 1
    sig = Signature(eps)
    d = Direction.axis(n, n - 1, sig)
    kind = draw(st.sampled_from(["affine", "exp"]))
    if kind == "affine":
        prof = ProfileFunction.affine(draw(st.floats(-1, 1)), draw(st.floats(3, 5)))
    else:
        prof = ProfileFunction.exponential(draw(st.floats(0.5, 2)), draw(st.floats(-1, 1)))
    x = np.random.default_rng(draw(st.integers(0, 2**16))).uniform(-1, 1, n)
    return sig, d, prof, x


@CASES
@given(conformal_points())
def test_conformal_closed_forms_match_engine(data):
    sig, d, prof, x = data
    phi = ScalarField.from_profile(prof, d)
    base = conformally_flat_metric(sig, phi)
    b = curvature(base, x)
    closed = conformal_ricci_closed(phi, sig, x)
    assert np.abs(b.ricci - closed).max() < 1e-8 * (1 + np.abs(closed).max())
    rbar = conformal_scalar_closed(prof, d, len(x), d.xi(x))
    assert math.isclose(b.scalar, rbar, rel_tol=1e-8, abs_tol=1e-8)


@st.composite
def admissible_starts(draw):
    n = draw(dims)
    m = draw(st.integers(2, 4))
    kap = draw(signs)
    lam = draw(st.floats(-4, 4))
    params = ReducedParams(n, m, lam, kap)
    dphi0 = draw(st.floats(-1.5, 1.5))
    roots = admissible_initial_data(1.0, dphi0, params)
    if not roots:
        lam = -abs(lam) - 1.0 if kap == 1 else abs(lam) + 1.0
        params = ReducedParams(n, m, lam, kap)
        roots = admissible_initial_data(1.0, dphi0, params)
    g0 = roots[draw(st.integers(0, len(roots) - 1))]
    return params, ReducedState(0.0, 1.0, dphi0, g0)


@CASES
@given(admissible_starts())
def test_G_definition_consistency(data):
    params, start = data
    tr = integrate_reduced(start, params, 1e-3, (0.0, 0.05), monitor_bound=1e-3)
    n, m = params.n, params.m
    d = Direction.axis(n, n - 1) if params.kappa == 1 else Direction.axis(n, 0, Signature.lorentzian(n))
    rates = tr.derivatives()
    scale = 1 + np.abs(tr.states).max() ** 2
    for (p, dp, g), (_, ddp, _) in zip(tr.states, rates):
        prof = ProfileFunction(lambda s, p=p: p, lambda s, dp=dp: dp, lambda s, ddp=ddp: ddp)
        rbar = conformal_scalar_closed(prof, d, n, 0.0)
        gap = g * g - params.kappa * (params.lam * (n - m) - rbar) / (m * (m - 1))
        assert abs(gap) < 1e-6 * scale


@CASES
@given(admissible_starts())
def test_constraint_monitor_stays_small(data):
    params, start = data
    tr = integrate_reduced(start, params, 1e-3, (0.0, 0.05), monitor_bound=1e-3)
    scale = 1 + np.abs(tr.states).max() ** 2
    assert np.abs(tr.monitor).max() < 1e-8 * scale


@CASES
@given(st.floats(-2, 2), st.floats(0.5, 2), st.floats(-1, 1), st.floats(-1, 1), st.integers(3, 5), st.integers(2, 4), st.floats(-3, 3))
def test_branch_symmetry(xi, a, b, c, n, m, lam):
    # phi(xi) = a exp(b xi), G(xi) = c + xi^2; mirrored: psi(xi) = phi(-xi), H(xi) = -G(-xi)
    params = ReducedParams(n, m, lam, 1)
    phi = ProfileFunction.exponential(a, b)
    G = ProfileFunction(lambda s: c + s * s, lambda s: 2 * s, lambda s: 2.0)
    psi = ProfileFunction.exponential(a, -b)
    H = ProfileFunction(lambda s: -(c + s * s), lambda s: -2 * s, lambda s: -2.0)
    r1 = ode_residuals_reduced(phi, G, params, -xi)
    r2 = ode_residuals_reduced(psi, H, params, xi)
    np.testing.assert_allclose(r1, r2, rtol=1e-12, atol=1e-12)


@CASES
@given(st.floats(0.5, 3), st.floats(-0.8, 0.8), st.floats(-1, 1), st.floats(0.1, 1.5))
def test_quadrature_log_derivative(theta, b, c, xi):
    phi = ProfileFunction.exponential(1.0, b)
    G = ProfileFunction(lambda s: c + math.sin(s), lambda s: math.cos(s), lambda s: -math.sin(s))
    h = 1e-5
    lp = math.log(warp_from_G(phi, G, theta, 0.0, xi + h).f)
    lm = math.log(warp_from_G(phi, G, theta, 0.0, xi - h).f)
    assert abs((lp - lm) / (2 * h) - G.eval(xi) / phi.eval(xi)) < 1e-8


@CASES
@given(st.floats(0.3, 1.5), st.floats(-0.3, 0.3), st.integers(0, 2**16))
def test_pointwise_obstruction(x3, slope, seed):
    # mu = 0 and identity 2 holding with grad f != 0 forces lambda(n-m) - R >= 0
    from einwarp.catalog import affine_conformal

    entry = affine_conformal(3, 2, 1.0, 5.0 + slope)
    spec = entry.spec
    lam = entry.derived_lambda
    x = np.array([0.2, 0.7, x3])
    r = scalar_identities(spec, lam, 0.0, np.concatenate([x, [0.5, 0.5]])[None, :])
    ident = r["|grad f|^2 + (lambda(m-n)+R)/(m(m-1)) f^2 - mu/(m-1)"]
    assert ident.sup < 1e-8
    R = scalar_curvature(spec.base, x)
    assert obstruction_margin(R, lam, 3, 2).margin >= 0
