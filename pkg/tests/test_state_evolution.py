import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import optimize

from phaseretrieval import scalar_models as sm
from phaseretrieval import spectra
from phaseretrieval import state_evolution as se
from phaseretrieval.errors import DomainError, SolverError, UnsupportedOperationError
from phaseretrieval.state_evolution import (Informed, OverlapState, ProblemSpec, SEConfig,
                                            Uninformed)

REAL_G = spectra.gaussian_iid(1)
COMPLEX_G = spectra.gaussian_iid(2)
REAL_O = spectra.column_orthonormal(1)
UNITARY = spectra.column_orthonormal(2)


def spec_for(ens, alpha, **kw):
    return ProblemSpec.for_ensemble(ens, alpha, **kw)


def gamma_residual(spec, q_x, q_z, gx, gz):
    nu = spec.nu
    d = 1.0 / spec.rho + gx + nu.eigenvalues * gz
    a = 1.0 / spec.rho + gx
    r1 = spec.rho - q_x - (np.dot(nu.weights, 1 / d) + nu.zero_mass / a)
    r2 = spec.alpha * (spec.Q_z - q_z) - np.dot(nu.weights, nu.eigenvalues / d)
    return max(abs(r1), abs(r2))


# ---------------------------------------------------------------- solve_gammas

@pytest.mark.parametrize("ens,alpha", [(REAL_G, 0.7), (COMPLEX_G, 2.0), (UNITARY, 1.5)])
def test_solve_gammas_trivial(ens, alpha):
    assert se.solve_gammas(spec_for(ens, alpha), 0.0, 0.0) == (0.0, 0.0)


def test_solve_gammas_point_mass_tie_break():
    spec = ProblemSpec(sm.Prior(1, 1.0), sm.Channel(1, 0.0), spectra.point_mass(1.0), 1.0)
    for q in (0.1, 0.5, 0.9):
        gx, gz = se.solve_gammas(spec, q, q)
        assert 1 - q == pytest.approx(1 / (1 + gx + gz), rel=1e-12)
        assert gx == 0.0
        assert gamma_residual(spec, q, q, gx, gz) < 1e-12


def test_solve_gammas_against_brute_force():
    spec = ProblemSpec(sm.Prior(1, 1.0), sm.Channel(1, 0.0), spectra.marchenko_pastur(2.0), 2.0)
    q_x, q_z = 0.5, 0.3
    # oracle: coarse grid over the saturation domain, then a 2-D polish
    lam_min = spec.nu.lambda_min
    best = None
    for gz in np.linspace(-0.9 / max(lam_min, 1e-3), 10, 400):
        for gx in np.linspace(-0.99, 10, 200):
            if 1 + gx + lam_min * gz <= 0:
                continue
            r = gamma_residual(spec, q_x, q_z, gx, gz)
            if best is None or r < best[0]:
                best = (r, gx, gz)
    lam, w = spec.nu.eigenvalues, spec.nu.weights

    def equations(g):
        d = 1 + g[0] + lam * g[1]
        return [spec.rho - q_x - np.dot(w, 1 / d), spec.alpha * (spec.Q_z - q_z) - np.dot(w, lam / d)]

    sol = optimize.root(equations, best[1:], tol=1e-15)
    gx, gz = se.solve_gammas(spec, q_x, q_z)
    assert gamma_residual(spec, q_x, q_z, gx, gz) < 1e-12
    assert (gx, gz) == pytest.approx(tuple(sol.x), abs=1e-9)
    assert 1 / spec.rho + gx + lam_min * gz > 0


@settings(max_examples=25, deadline=None)
@given(q_x=st.floats(0.01, 0.95), frac=st.floats(0.02, 0.98), alpha=st.floats(0.3, 4.0))
def test_solve_gammas_residual_and_saturation(q_x, frac, alpha):
    spec = ProblemSpec(sm.Prior(1, 1.0), sm.Channel(1, 0.0), spectra.marchenko_pastur(alpha, 96), alpha)
    nu = spec.nu
    m_x = 1.0 - q_x
    # alpha m_z / m_x must lie between the harmonic mean and lambda_max of nu
    harmonic = 0.0 if nu.zero_mass else 1.0 / np.dot(nu.weights, 1.0 / nu.eigenvalues)
    lo, hi = m_x * harmonic / alpha, m_x * nu.lambda_max / alpha
    m_z = min(lo + frac * (hi - lo), spec.Q_z * (1 - 1e-9))
    q_z = spec.Q_z - m_z
    if not (q_z > 0):
        return
    try:
        gx, gz = se.solve_gammas(spec, q_x, q_z, m_x, m_z)
    except SolverError as err:
        # only allowed where the exact root has a nearly vanishing denominator
        lin = se._lmmse(spec, m_x, m_z)
        a = 1.0 + lin.gamma_x
        assert (a + nu.eigenvalues * lin.gamma_z).min() / a < 1e-6
        assert err.residual > 1e-12
        return
    assert gamma_residual(spec, q_x, q_z, gx, gz) < 1e-12 * max(1.0, abs(gx), abs(gz))
    assert 1.0 + gx + nu.lambda_min * gz > 0


def test_solve_gammas_reports_ill_conditioned_root():
    spec = ProblemSpec(sm.Prior(1, 1.0), sm.Channel(1, 0.0), spectra.marchenko_pastur(1.0, 96), 1.0)
    m_x = 0.25
    m_z = 0.75 * m_x * spec.nu.lambda_max + 0.25 * m_x * spec.nu.lambda_min
    with pytest.raises(SolverError) as info:
        se.solve_gammas(spec, 1 - m_x, spec.Q_z - m_z, m_x, m_z)
    assert info.value.residual > 1e-12


# ---------------------------------------------------------------- se_step

@pytest.mark.parametrize("ens,alpha,delta", [(REAL_G, 0.8, 0.0), (COMPLEX_G, 1.5, 0.0),
                                             (UNITARY, 2.5, 0.0), (REAL_G, 1.2, 0.3)])
@pytest.mark.parametrize("order", [se.MESSAGE_PASSING, se.LMMSE_FIRST])
def test_trivial_point_is_exact(ens, alpha, delta, order):
    spec = spec_for(ens, alpha, delta=delta)
    for damping in (0.0, 0.5):
        new = se.se_step(spec, se.TRIVIAL_STATE, damping, order)
        assert new.as_array().tobytes() == np.zeros(6).tobytes()


@settings(max_examples=100, deadline=None)
@given(qhx=st.floats(0.0, 1e6), qhz=st.floats(0.0, 50.0), rho=st.floats(0.2, 3.0))
def test_gaussian_prior_reduction(qhx, qhz, rho):
    spec = ProblemSpec(sm.Prior(1, rho), sm.Channel(1, 0.0), spectra.marchenko_pastur(1.3, 32), 1.3)
    new = se.se_step(spec, OverlapState(0.0, 0.0, qhx, qhz))
    assert new.q_x == pytest.approx(rho * rho * qhx / (1 + rho * qhx), rel=1e-13, abs=1e-300)
    assert new.m_x == pytest.approx(rho / (1 + rho * qhx), rel=1e-13)


def test_unitary_informed_decreases_monotonically():
    spec = spec_for(UNITARY, 2.5)
    res = se.se_fixed_point(spec, SEConfig(init=Informed(), free_entropy=False))
    mmse = [spec.rho - s.q_x if s.m_x is None else s.m_x for s in res.trace]
    # the start point does not satisfy alpha m_z = m_x on a point-mass spectrum;
    # the first two steps project onto that line, after which the decrease is strict
    assert max(mmse[:3]) == pytest.approx(mmse[0], rel=1e-6)
    iterates = mmse[2:]
    assert all(b < a for a, b in zip(iterates, iterates[1:]))
    assert iterates[-1] < 1e-8


# ---------------------------------------------------------------- fixed points

def test_below_weak_recovery_stays_trivial():
    res = se.se_fixed_point(spec_for(REAL_G, 0.4), SEConfig(free_entropy=False))
    assert res.converged
    assert res.mmse == pytest.approx(1.0, abs=1e-6)


def test_unitary_informed_full_recovery():
    res = se.se_fixed_point(spec_for(UNITARY, 2.5), SEConfig(init=Informed(), free_entropy=False))
    assert res.mmse < 1e-6


def test_real_gaussian_uninformed_full_recovery():
    res = se.se_fixed_point(spec_for(REAL_G, 1.5), SEConfig(free_entropy=False))
    assert res.converged
    assert res.mmse < 1e-6


def test_max_iter_flags_instead_of_raising():
    res = se.se_fixed_point(spec_for(REAL_G, 1.0), SEConfig(max_iter=3, free_entropy=False))
    assert not res.converged
    assert res.iterations == 3


@pytest.mark.parametrize("alpha", [0.6, 0.9, 1.05])
def test_uninformed_dominates_informed(alpha):
    spec = spec_for(REAL_G, alpha)
    unf = se.se_fixed_point(spec, SEConfig(free_entropy=False))
    inf = se.se_fixed_point(spec, SEConfig(init=Informed(), free_entropy=False))
    assert unf.mmse >= inf.mmse - 1e-8
    for r in (unf, inf):
        assert spec.rho * spec.nu.zero_mass - 1e-10 <= r.mmse <= spec.rho + 1e-10


def test_lmmse_first_order_reaches_same_fixed_point_when_it_converges():
    spec = spec_for(COMPLEX_G, 1.5)
    mp = se.se_fixed_point(spec, SEConfig(free_entropy=False))
    lf = se.se_fixed_point(spec, SEConfig(order=se.LMMSE_FIRST, damping=0.8, max_iter=4000,
                                          free_entropy=False))
    if lf.converged:
        assert lf.mmse == pytest.approx(mp.mmse, abs=1e-7)
    assert mp.converged


@pytest.mark.parametrize("ens,alpha", [(COMPLEX_G, 1.5), (REAL_G, 0.8), (spectra.product_of_gaussians(1.0, 2), 1.2)])
def test_schedules_share_fixed_points(ens, alpha):
    spec = spec_for(ens, alpha, **(dict(n=64, samples=1) if ens.kind == spectra.PRODUCT_OF_GAUSSIANS else {}))
    state = se.se_fixed_point(spec, SEConfig(free_entropy=False)).trace[-1]
    for order in (se.MESSAGE_PASSING, se.LMMSE_FIRST):
        new = se.se_step(spec, state, 0.0, order)
        assert new.q_x == pytest.approx(state.q_x, abs=1e-8)
        assert new.q_z == pytest.approx(state.q_z, abs=1e-8)


def test_noiseless_full_recovery_free_entropy_is_infinite():
    spec = spec_for(REAL_G, 1.5)
    res = se.se_fixed_point(spec, SEConfig())
    assert res.mmse < 1e-10 and res.free_entropy == math.inf
    # the potential along the linear-stage domain edge grows without bound
    nu = spec.nu
    harmonic = 1.0 / np.dot(nu.weights, 1.0 / nu.eigenvalues)
    vals = []
    for m_x in (1e-3, 1e-5, 1e-7):
        m_z = m_x * harmonic / spec.alpha * (1 + 1e-7)
        vals.append(se.potential(spec, 1 - m_x, spec.Q_z - m_z, m_x, m_z))
    assert vals[0] < vals[1] < vals[2]


def test_informed_start_does_not_stop_during_a_slow_escape():
    # the informed point at the rho nu({0}) floor is unstable here; the first
    # escape steps are below tol in absolute terms
    spec = spec_for(REAL_G, 0.95)
    informed = se.se_fixed_point(spec, SEConfig(init=Informed()))
    uninformed = se.se_fixed_point(spec, SEConfig())
    assert informed.converged and informed.iterations > 50
    assert informed.mmse == pytest.approx(uninformed.mmse, rel=1e-6)
    assert informed.mmse > 0.5


def test_config_validation():
    with pytest.raises(DomainError):
        SEConfig(damping=1.0)
    with pytest.raises(DomainError):
        SEConfig(order="backwards")


# ---------------------------------------------------------------- potential

def _fd_gradient(spec, q_x, q_z, h=1e-5):
    f = lambda a, b: se.potential(spec, a, b)
    return ((f(q_x + h, q_z) - f(q_x - h, q_z)) / (2 * h),
            (f(q_x, q_z + h) - f(q_x, q_z - h)) / (2 * h))


@pytest.mark.parametrize("ens,alpha,init", [(REAL_G, 0.8, Uninformed()), (COMPLEX_G, 1.5, Uninformed()),
                                            (REAL_G, 0.9, Informed())])
def test_gradient_vanishes_at_fixed_point(ens, alpha, init):
    spec = spec_for(ens, alpha)
    res = se.se_fixed_point(spec, SEConfig(init=init, free_entropy=False))
    fp = res.fixed_point
    g = _fd_gradient(spec, fp.q_x, fp.q_z)
    assert math.hypot(*g) < 1e-6


def test_analytic_gradient_matches_finite_differences():
    spec = spec_for(COMPLEX_G, 1.3)
    for q_x, q_z in [(0.2, 0.35), (0.5, 0.6), (0.7, 0.85)]:
        fd = _fd_gradient(spec, q_x, q_z)
        an = se.potential_gradient(spec, q_x, q_z)
        assert an == pytest.approx(fd, abs=1e-7)


def _profile_qz(spec, q_x):
    """Stationary q_z of the potential at fixed q_x (inside the linear-stage domain)."""
    m_x = spec.rho - q_x
    lo = max(0.0, spec.Q_z - m_x * spec.nu.lambda_max / spec.alpha) + 1e-9
    nu = spec.nu
    harmonic = 0.0 if nu.zero_mass else 1.0 / np.dot(nu.weights, 1.0 / nu.eigenvalues)
    hi = min(spec.Q_z, spec.Q_z - m_x * harmonic / spec.alpha) - 1e-9
    g = lambda q_z: se.potential_gradient(spec, q_x, q_z)[1]
    grid = np.linspace(lo, hi, 40)
    vals = [g(x) for x in grid]
    for a, b, fa, fb in zip(grid, grid[1:], vals, vals[1:]):
        if fa * fb < 0:
            return optimize.brentq(g, a, b, xtol=1e-15, rtol=1e-15)
    raise AssertionError("no stationary q_z")


@pytest.mark.parametrize("beta,alpha", [(1, 0.8), (2, 1.7)])
def test_reduced_gaussian_potential_matches_full_profile(beta, alpha):
    spec = spec_for(spectra.gaussian_iid(beta), alpha)
    for q in (0.1, 0.4, 0.7):
        q_z = _profile_qz(spec, q)
        qhat = q / (spec.rho * (spec.rho - q))
        full = se.potential(spec, q, q_z)
        assert se.potential_gaussian_phi(spec, q, qhat) == pytest.approx(full, abs=1e-8)


def test_reduced_potential_at_origin_against_quadrature():
    spec = spec_for(COMPLEX_G, 1.0)
    # Psi_P0(0) = 0 and Psi_out at omega = 0, v = 1: E_y log Zout = -1 - E|z|^2... by direct quadrature
    from scipy import integrate
    psi_out0 = integrate.quad(lambda y: math.exp(-y) * (-y), 0, np.inf)[0]
    assert se.potential_gaussian_phi(spec, 0.0, 0.0) == pytest.approx(psi_out0, abs=1e-10)


def test_reduced_potential_extremiser_matches_informed_mmse():
    spec = spec_for(REAL_G, 1.5)
    # sup over qhat is attained at q = q_x(qhat); maximise the profile over q near full recovery
    prof = lambda q: -se.potential_gaussian_phi(spec, q, q / (1 - q))
    res = optimize.minimize_scalar(prof, bounds=(0.5, 1 - 1e-12), method="bounded",
                                   options={"xatol": 1e-13})
    informed = se.se_fixed_point(spec, SEConfig(init=Informed(), free_entropy=False))
    assert 1 - res.x == pytest.approx(informed.mmse, abs=1e-6)


def test_reduced_potential_convex_in_q():
    spec = spec_for(REAL_G, 1.2)
    qs = np.linspace(0.05, 0.9, 18)
    vals = np.array([se.potential_gaussian_phi(spec, q, 0.7) for q in qs])
    assert np.all(np.diff(vals, 2) > -1e-10)


def test_product_potential_with_unit_spectrum_reduces():
    spec = spec_for(REAL_G, 1.3)
    for q, qh in [(0.2, 0.5), (0.6, 2.0)]:
        a = se.potential_product(spec, q, qh, spectra.point_mass(1.0), 1.0)
        assert a == pytest.approx(se.potential_gaussian_phi(spec, q, qh), abs=1e-12)


def test_product_potential_zero_qhat_minimised_at_zero():
    spec = spec_for(REAL_G, 1.3)
    nu_b = spectra.marchenko_pastur(1.5)
    vals = [se.potential_product(spec, q, 0.0, nu_b, 1.5) for q in np.linspace(0.0, 0.9, 10)]
    assert np.argmin(vals) == 0
    with pytest.raises(DomainError):
        se.potential_product(spec, 0.1, 0.1, spectra.SpectralDensity([], [], 1.0), 1.5)


def test_product_extremiser_matches_state_evolution():
    spec = spec_for(spectra.product_of_gaussians(1.5, beta=2), 1.8)
    nu_b, delta = spectra.marchenko_pastur(1.5), 1.5
    Q = nu_b.moment(1) / delta

    def inner(qh):
        return optimize.minimize_scalar(lambda q: se.potential_product(spec, q, qh, nu_b, delta),
                                        bounds=(1e-9, Q - 1e-9), method="bounded",
                                        options={"xatol": 1e-12}).fun

    qh = optimize.minimize_scalar(lambda t: -inner(t), bounds=(1e-6, 50), method="bounded",
                                  options={"xatol": 1e-10}).x
    reduced = nu_b.mean(lambda x: 1 / (1 + qh * x))
    res = se.se_fixed_point(spec, SEConfig(free_entropy=False))
    assert reduced == pytest.approx(res.mmse, abs=1e-4)


# ---------------------------------------------------------------- trivial-point stability

def composed_map_det(spec):
    """det(AB - I) of the two-block linearisation written with moments of nu."""
    rho, alpha = spec.rho, spec.alpha
    l1, l2 = se.spectral_moments(spec)
    F = sm.channel_fisher(spec.channel, spec.Q_z)
    D = rho ** 2 * (l2 - l1 ** 2)
    a = np.diag([rho ** 2, rho ** 2 * l1 ** 2 / alpha ** 2 * (1 + F)])
    b = np.array([[-l1 ** 2 / D, alpha * l1 / D],
                  [l1 / D, alpha ** 2 / (rho ** 2 * l1 ** 2) - alpha / D]])
    return np.linalg.det(a @ b - np.eye(2))


@pytest.mark.parametrize("ens,alpha_wr", [(REAL_G, 0.5), (COMPLEX_G, 1.0),
                                          (spectra.product_of_gaussians(1.0, 2), 0.5),
                                          (spectra.product_of_gaussians(1.0, 1), 0.25)])
def test_jacobian_radius_one_at_threshold_two_routes(ens, alpha_wr):
    kw = dict(n=64, samples=1) if ens.kind == spectra.PRODUCT_OF_GAUSSIANS else {}
    spec = spec_for(ens, alpha_wr, **kw)
    assert se.trivial_jacobian_radius(spec) == pytest.approx(1.0, abs=1e-9)
    assert composed_map_det(spec) == pytest.approx(0.0, abs=1e-9)
    assert abs(composed_map_det(spec_for(ens, 1.2 * alpha_wr, **kw))) > 1e-3


@pytest.mark.parametrize("ens,alpha", [(REAL_G, 0.5), (REAL_G, 0.3), (COMPLEX_G, 1.4),
                                       (UNITARY, 2.0)])
def test_jacobian_matches_finite_difference_of_step(ens, alpha):
    spec = spec_for(ens, alpha)
    jac = se.trivial_jacobian(spec)
    eps = 1e-7
    fd = np.zeros((4, 4))
    for col, (hx, hz) in ((2, (eps, 0.0)), (3, (0.0, eps))):
        new = se._message_passing_step(spec, OverlapState(0.0, 0.0, hx, hz), 0.0)
        fd[:, col] = np.array([new.q_x, new.q_z, new.qhat_x, new.qhat_z]) / eps
    assert fd == pytest.approx(jac, rel=1e-4, abs=1e-6)


def test_jacobian_point_mass_limit():
    assert se.trivial_jacobian_radius(spec_for(UNITARY, 2.0)) == pytest.approx(1.0, abs=1e-12)
    assert se.trivial_jacobian_radius(spec_for(REAL_O, 1.5)) == pytest.approx(1.0, abs=1e-12)


def test_jacobian_below_threshold_stable():
    assert se.trivial_jacobian_radius(spec_for(REAL_G, 0.4)) < 1.0


@pytest.mark.parametrize("ens", [REAL_G, COMPLEX_G, REAL_O, UNITARY,
                                 spectra.product_of_gaussians(1.0, 2)])
def test_radius_strictly_increasing_in_alpha(ens):
    lo = 1.0 if ens.kind == spectra.COLUMN_ORTHONORMAL else 0.1
    alphas = np.linspace(lo, 5.0, 40)
    # the radius only uses closed-form moments; a coarse empirical nu keeps products cheap
    kw = dict(n=64, samples=1) if ens.kind == spectra.PRODUCT_OF_GAUSSIANS else {}
    radii = [se.trivial_jacobian_radius(spec_for(ens, a, **kw)) for a in alphas]
    assert np.all(np.diff(radii) > 0)


# ---------------------------------------------------------------- mutual information

def test_mutual_information_noiseless_unsupported():
    with pytest.raises(UnsupportedOperationError):
        se.mutual_information_density(spec_for(REAL_G, 1.0))


def test_mutual_information_i_mmse():
    base = dict(delta=0.5)
    mi = lambda s: se.mutual_information_density(spec_for(REAL_G, 1.0, side_snr=s, **base))
    i0 = mi(0.0)
    assert 0 < i0 < math.inf
    s, h = 0.3, 1e-3
    deriv = (mi(s + h) - mi(s - h)) / (2 * h)
    spec = spec_for(REAL_G, 1.0, side_snr=s, **base)
    # the relation holds on the branch with the larger free entropy
    runs = [se.se_fixed_point(spec, SEConfig(init=init, free_entropy=True))
            for init in (Uninformed(), Informed())]
    best = max(runs, key=lambda r: r.free_entropy)
    assert deriv == pytest.approx(0.5 * best.mmse, rel=1e-4)


def test_mutual_information_vanishes_in_limits():
    assert se.mutual_information_density(spec_for(REAL_G, 1.0, delta=1e6)) < 1e-6
    assert se.mutual_information_density(spec_for(REAL_G, 1e-4, delta=0.5)) < 1e-3
