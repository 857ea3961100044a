"""State evolution and replica potential for rotationally invariant sensing.

Overlaps are carried together with their complements m_x = rho - q_x and
m_z = Q_z - q_z.  Near full recovery q approaches its maximum and the
complement is the only accurate representation, so every update computes the
complements directly instead of subtracting.
"""

from dataclasses import dataclass, field, replace
import math

import numpy as np
from scipy import optimize

from . import scalar_models as sm
from . import spectra
from .errors import DomainError, SolverError, UnsupportedOperationError

# relative tolerance deciding that alpha m_z = c m_x for a point-mass spectrum
POINT_MASS_TOL = 1e-10
RESIDUAL_TOL = 1e-12


@dataclass(frozen=True)
class OverlapState:
    """Order parameters of the fixed-point system.

    ``m_x`` and ``m_z`` optionally hold the exact complements rho - q_x and
    Q_z - q_z; when absent they are recomputed from q.
    """

    q_x: float
    q_z: float
    qhat_x: float = 0.0
    qhat_z: float = 0.0
    gamma_x: float = 0.0
    gamma_z: float = 0.0
    m_x: float = None
    m_z: float = None

    def as_array(self):
        return np.array([self.q_x, self.q_z, self.qhat_x, self.qhat_z,
                         self.gamma_x, self.gamma_z])

    def complements(self, spec):
        m_x = self.m_x if self.m_x is not None else spec.rho - self.q_x
        m_z = self.m_z if self.m_z is not None else spec.Q_z - self.q_z
        return m_x, m_z


TRIVIAL_STATE = OverlapState(0.0, 0.0)


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """Prior, channel and spectrum at sampling ratio alpha.

    ``side_snr`` adds an independent Gaussian observation sqrt(side_snr) x + noise
    of every signal component; it is zero for the plain model and only serves
    the I-MMSE check of the mutual information.
    """

    prior: sm.Prior
    channel: sm.Channel
    nu: spectra.SpectralDensity
    alpha: float
    side_snr: float = 0.0
    ensemble: object = None

    def __post_init__(self):
        if not self.alpha > 0:
            raise DomainError("alpha must be positive")
        if self.prior.beta != self.channel.beta:
            raise DomainError("prior and channel disagree on beta")
        if not self.side_snr >= 0:
            raise DomainError("side_snr must be nonnegative")
        if not self.Q_z > 0:
            raise DomainError("Q_z = rho <lambda> / alpha must be positive")

    @classmethod
    def for_ensemble(cls, ensemble, alpha, rho=1.0, delta=0.0, side_snr=0.0, **density_kw):
        nu = spectra.density_at(ensemble, alpha, **density_kw)
        return cls(sm.Prior(ensemble.beta, rho), sm.Channel(ensemble.beta, delta), nu,
                   float(alpha), side_snr, ensemble)

    @property
    def beta(self):
        return self.prior.beta

    @property
    def rho(self):
        return self.prior.rho

    @property
    def Q_z(self):
        return self.rho * self.nu.moment(1) / self.alpha

    @property
    def Qhat_z(self):
        return 1.0 / self.Q_z

    @property
    def symmetric(self):
        """Trivial fixed point exists (centred Gaussian prior, no side information)."""
        return self.side_snr == 0.0


@dataclass(frozen=True)
class Uninformed:
    eps: float = 1e-8


@dataclass(frozen=True)
class Informed:
    eps: float = 1e-8


MESSAGE_PASSING = "message-passing"
LMMSE_FIRST = "lmmse-first"


@dataclass(frozen=True)
class SEConfig:
    """Iteration controls.

    ``order`` selects the update schedule.  ``message-passing`` (default) runs
    denoisers -> extrinsic precisions -> linear stage, the schedule followed by
    G-VAMP.  ``lmmse-first`` inverts the linear stage from the current
    overlaps, then updates the conjugates and the overlaps; it needs a
    spectrum that is not a point mass and falls back to message passing
    otherwise.
    """

    damping: float = 0.5
    tol: float = 1e-10
    max_iter: int = 2000
    init: object = field(default_factory=Uninformed)
    order: str = MESSAGE_PASSING
    keep_trace: bool = True
    free_entropy: bool = True

    def __post_init__(self):
        if not 0.0 <= self.damping < 1.0:
            raise DomainError("damping must lie in [0, 1)")
        if not self.tol > 0:
            raise DomainError("tol must be positive")
        if self.max_iter < 1:
            raise DomainError("max_iter must be at least 1")
        if self.order not in (MESSAGE_PASSING, LMMSE_FIRST):
            raise DomainError(f"unknown order {self.order!r}")


@dataclass(frozen=True)
class SEResult:
    fixed_point: OverlapState
    mmse: float
    free_entropy: float
    iterations: int
    converged: bool
    trace: tuple = ()


# ---------------------------------------------------------------- linear stage

@dataclass(frozen=True)
class _Lmmse:
    gamma_x: float
    gamma_z: float
    qhat_x: float
    qhat_z: float
    log_term: float  # <ln(rho^-1 + gamma_x + lambda gamma_z)>
    residual: float


def _moments_at(nu, d):
    """<1/d>, <lambda/d> and <ln d> over the atoms (zero atom has d = 1)."""
    w, lam = nu.weights, nu.eigenvalues
    den = float(np.dot(w, 1.0 / d)) + nu.zero_mass
    num = float(np.dot(w, lam / d))
    logd = float(np.dot(w, np.log(d)))
    return den, num, logd


def _d_positive(nu, s):
    return 1.0 + nu.eigenvalues * math.exp(s)


def _d_negative(nu, u):
    # t = -(1 - e^-u) / lambda_max, written so that 1 + lambda t keeps full precision
    r = nu.eigenvalues / nu.lambda_max
    return (1.0 - r) + r * math.exp(-u)


def _bracket(f, x0, step, limit):
    """Walk from x0 by doubling steps until f changes sign; f(x0) has the reference sign."""
    s0 = f(x0) > 0
    x, h = x0, step
    for _ in range(200):
        nxt = x + h
        if abs(nxt - x0) > limit:
            nxt = x0 + math.copysign(limit, h)
        if (f(nxt) > 0) != s0:
            return (x, nxt) if h > 0 else (nxt, x)
        if abs(nxt - x0) >= limit:
            return None
        x, h = nxt, 2.0 * h
    return None


def _lmmse(spec, m_x, m_z):
    """Solve the linear-stage equations for (gamma_x, gamma_z) given the complements.

    Reduction: with a = rho^-1 + gamma_x and t = gamma_z / a the ratio of the
    two equations, <lambda/(1+lambda t)> / <1/(1+lambda t)> = alpha m_z / m_x,
    is strictly decreasing in t, so a bracketed 1-D root gives t and then a.
    """
    rho, alpha, nu = spec.rho, spec.alpha, spec.nu
    Q = spec.Q_z
    if m_x == rho and m_z == Q:
        return _Lmmse(0.0, 0.0, 0.0, 0.0, -math.log(rho), 0.0)
    if not (0.0 < m_x <= rho and 0.0 < m_z <= Q):
        raise DomainError("overlaps outside [0, rho) x [0, Q_z)")
    target = alpha * m_z / m_x
    if nu.is_point_mass:
        c = nu.lambda_max
        if abs(target - c) > POINT_MASS_TOL * c:
            raise SolverError("point-mass spectrum forces alpha m_z = c m_x",
                              residual=abs(alpha * m_z - c * m_x))
        # tie-break: all of the linear-stage precision on the z side
        a = 1.0 / rho
        gz = (1.0 / m_x - a) / c
        return _Lmmse(0.0, gz, 0.0, max(0.0, 1.0 / m_z - 1.0 / Q - gz),
                      -math.log(m_x), abs(alpha * m_z - c * m_x))
    mean = nu.moment(1)
    if target == mean:
        d = np.ones_like(nu.eigenvalues)
        t = 0.0
    elif target < mean:
        if nu.zero_mass == 0.0:
            floor = 1.0 / float(np.dot(nu.weights, 1.0 / nu.eigenvalues))
            if target <= floor:
                raise SolverError(f"alpha m_z / m_x = {target:g} is below the harmonic "
                                  f"mean {floor:g} of the spectrum", residual=floor - target)

        def g(s):
            den, num, _ = _moments_at(nu, _d_positive(nu, s))
            return math.log(num / den) - math.log(target)

        br = _bracket(g, 0.0, -1.0, 700.0) if g(0.0) < 0 else _bracket(g, 0.0, 1.0, 700.0)
        if br is None:
            # target within rounding of the mean
            d, t = np.ones_like(nu.eigenvalues), 0.0
        else:
            s = optimize.brentq(g, *br, xtol=1e-15, rtol=4.0 * np.finfo(float).eps, maxiter=500)
            d, t = _d_positive(nu, s), math.exp(s)
    else:
        top = nu.lambda_max
        if target >= top:
            raise SolverError(f"alpha m_z / m_x = {target:g} is above lambda_max = {top:g}",
                              residual=target - top)

        def g(u):
            den, num, _ = _moments_at(nu, _d_negative(nu, u))
            return math.log(num / den) - math.log(target)

        br = _bracket(g, 1e-300, 1e-3, 700.0)
        if br is None:
            raise SolverError("cannot bracket the negative-gamma branch", residual=g(700.0))
        u = optimize.brentq(g, *br, xtol=1e-15, rtol=4.0 * np.finfo(float).eps, maxiter=500)
        d, t = _d_negative(nu, u), math.expm1(-u) / top
    den, num, logd = _moments_at(nu, d)
    a = den / m_x
    gx = a - 1.0 / rho
    gz = t * a
    # 1/m_x - 1/rho - gamma_x = (1 - den)/m_x = t num / m_x, without cancellation
    qhx = t * num / m_x
    # 1/m_z - 1/Q_z - gamma_z with alpha m_z gamma_z = t num
    qhz = (alpha - t * num) / (alpha * m_z) - 1.0 / Q
    residual = abs(num / a - alpha * m_z)
    if residual > RESIDUAL_TOL * max(1.0, alpha * m_z) * 1e3:
        raise SolverError("linear stage did not reach its residual target", residual=residual)
    return _Lmmse(gx, gz, max(0.0, qhx), max(0.0, qhz), math.log(a) + logd, residual)


def solve_gammas(spec, q_x, q_z, m_x=None, m_z=None):
    """(gamma_x, gamma_z) solving rho - q_x = <1/(rho^-1 + gamma_x + lambda gamma_z)>
    and alpha (Q_z - q_z) = <lambda/(rho^-1 + gamma_x + lambda gamma_z)>.

    The solution is unique and may have a negative component; the saturation
    condition rho^-1 + gamma_x + lambda gamma_z > 0 always holds.
    """
    if m_x is None:
        m_x = spec.rho - q_x
    if m_z is None:
        m_z = spec.Q_z - q_z
    sol = _lmmse(spec, m_x, m_z)
    gx, gz = sol.gamma_x, sol.gamma_z
    # the pair is what callers see, so check the equations in its own terms; when
    # 1 + lambda t nearly vanishes the rounded pair cannot meet the target
    nu = spec.nu
    a = 1.0 / spec.rho + gx
    d = a + nu.eigenvalues * gz
    if np.any(d <= 0):
        raise SolverError("rounded gammas violate the saturation condition", residual=float(-d.min()))
    r1 = m_x - float(np.dot(nu.weights, 1.0 / d)) - (nu.zero_mass / a if nu.zero_mass else 0.0)
    r2 = spec.alpha * m_z - float(np.dot(nu.weights, nu.eigenvalues / d))
    residual = max(abs(r1), abs(r2))
    if residual > RESIDUAL_TOL * max(1.0, abs(gx), abs(gz)):
        raise SolverError(f"linear stage is ill-conditioned here (min denominator {d.min():.3g})",
                          residual=residual)
    return gx, gz


# ---------------------------------------------------------------- denoisers

def _prior_side(spec, qhat_x):
    """(q_x, m_x) of the prior denoiser with extrinsic precision qhat_x."""
    a = qhat_x + spec.side_snr
    return float(sm.prior_overlap(spec.prior, a)), float(sm.prior_mmse(spec.prior, a))


def _output_side(spec, qhat_z):
    """(q_z, m_z) of the channel denoiser with extrinsic precision qhat_z."""
    Q = spec.Q_z
    if qhat_z == 0.0:
        return 0.0, Q
    Qh = spec.Qhat_z
    v = 1.0 / (Qh + qhat_z)
    s2 = qhat_z / (Qh * (Qh + qhat_z))
    mmse = sm.output_mmse(spec.channel, v, s2)
    return s2 + (v - mmse), mmse


def _damp(new, old, d):
    if d == 0.0:
        return new
    keys = ("q_x", "q_z", "qhat_x", "qhat_z", "gamma_x", "gamma_z", "m_x", "m_z")
    vals = {}
    for k in keys:
        a, b = getattr(new, k), getattr(old, k)
        vals[k] = a if b is None else (1.0 - d) * a + d * b
    return OverlapState(**vals)


def _lmmse_first_step(spec, state):
    m_x, m_z = state.complements(spec)
    lin = _lmmse(spec, m_x, m_z)
    q_x, m_x = _prior_side(spec, lin.qhat_x)
    q_z, m_z = _output_side(spec, lin.qhat_z)
    return OverlapState(q_x, q_z, lin.qhat_x, lin.qhat_z, lin.gamma_x, lin.gamma_z, m_x, m_z)


def _message_passing_step(spec, state, damping):
    """Denoisers -> extrinsic precisions -> linear stage -> new conjugates.

    The overlaps are the denoiser outputs at the incoming conjugates; damping
    acts on the conjugates and extrinsic precisions, which carry the dynamics.
    """
    rho, alpha, nu = spec.rho, spec.alpha, spec.nu
    q_x, m_x = _prior_side(spec, state.qhat_x)
    q_z, m_z = _output_side(spec, state.qhat_z)
    # Gaussian prior: 1/m_x - 1/rho - qhat_x is exactly the side-channel SNR
    gx = spec.side_snr
    gz = 1.0 / m_z - spec.Qhat_z - state.qhat_z
    a = 1.0 / rho + gx
    d = a + nu.eigenvalues * gz
    if a <= 0 or np.any(d <= 0):
        raise SolverError("extrinsic precisions leave the saturation domain")
    lx = float(np.dot(nu.weights, 1.0 / d)) + nu.zero_mass / a
    lz = float(np.dot(nu.weights, nu.eigenvalues / d)) / alpha
    qhx = max(0.0, 1.0 / lx - 1.0 / rho - gx)
    qhz = max(0.0, 1.0 / lz - spec.Qhat_z - gz)
    if state.qhat_x == 0.0 and state.qhat_z == 0.0 and spec.symmetric:
        qhx = qhz = gz = 0.0  # exact trivial point
    if damping:
        d = damping
        qhx = (1.0 - d) * qhx + d * state.qhat_x
        qhz = (1.0 - d) * qhz + d * state.qhat_z
        gx = (1.0 - d) * gx + d * state.gamma_x
        gz = (1.0 - d) * gz + d * state.gamma_z
    return OverlapState(q_x, q_z, qhx, qhz, gx, gz, m_x, m_z)


def se_step(spec, state, damping=0.0, order=MESSAGE_PASSING):
    """One state-evolution update with damping factor ``damping`` (new <- (1-d) new + d old)."""
    if order == LMMSE_FIRST and not spec.nu.is_point_mass:
        return _damp(_lmmse_first_step(spec, state), state, damping)
    return _message_passing_step(spec, state, damping)


def initial_state(spec, init):
    rho, Q, eps = spec.rho, spec.Q_z, init.eps
    if isinstance(init, Informed):
        m_x = rho * spec.nu.zero_mass + eps
        m_z = eps
    elif isinstance(init, Uninformed):
        m_x, m_z = rho - eps, Q - eps
    else:
        raise DomainError(f"unknown initialisation {init!r}")
    m_x, m_z = min(m_x, rho), min(m_z, Q)
    q_x, q_z = rho - m_x, Q - m_z
    # conjugates consistent with the overlaps at gamma = 0
    return OverlapState(q_x, q_z, q_x / (rho * m_x), q_z / (Q * m_z), 0.0, 0.0, m_x, m_z)


def se_fixed_point(spec, config=None):
    """Iterate se_step from the configured start until (q_x, q_z) stop moving.

    Convergence is measured on the overlaps only: the conjugates diverge as
    the overlaps approach full recovery.  Besides an absolute step below
    ``tol``, the complements m = rho - q_x, Q_z - q_z must move by less than
    sqrt(tol) in relative terms, unless m_x has reached rho nu({0}).
    """
    config = config or SEConfig()
    state = initial_state(spec, config.init)
    trace = [state] if config.keep_trace else []
    converged = False
    floor = spec.rho * spec.nu.zero_mass
    it = 0
    for it in range(1, config.max_iter + 1):
        new = se_step(spec, state, config.damping, config.order)
        change = max(abs(new.q_x - state.q_x), abs(new.q_z - state.q_z))
        old_m, new_m = state.complements(spec), new.complements(spec)
        state = new
        if config.keep_trace:
            trace.append(state)
        if change < config.tol and (_settled(old_m, new_m, config.tol)
                                    or new_m[0] - floor <= config.tol * spec.rho):
            converged = True
            break
    m_x, m_z = state.complements(spec)
    fe = _fixed_point_free_entropy(spec, state, m_x, m_z) if config.free_entropy else math.nan
    return SEResult(state, m_x, fe, it, converged, tuple(trace))


def _settled(old_m, new_m, tol):
    # tiny absolute steps can hide a geometric escape of a tiny m_z, so the
    # complements must also be still in relative terms
    return all(abs(b - a) <= math.sqrt(tol) * max(b, 1e-300) for a, b in zip(old_m, new_m))


FULL_RECOVERY_TOL = 1e-6


def _fixed_point_free_entropy(spec, state, m_x, m_z):
    try:
        return potential(spec, state.q_x, state.q_z, m_x, m_z)
    except SolverError:
        # noiseless channel at full recovery: m_z collapses faster than m_x, the
        # iterate leaves the linear-stage domain and the potential grows like
        # log(1 / m_x) along the domain edge, so the limit value is +inf
        floor = spec.rho * spec.nu.zero_mass
        if spec.channel.noiseless and m_x - floor <= FULL_RECOVERY_TOL * spec.rho:
            return math.inf
        raise


# ---------------------------------------------------------------- potential

def _i_prior(spec, q_x, m_x):
    beta, rho, lam = spec.beta, spec.rho, spec.side_snr
    qhat = max(0.0, q_x / (rho * m_x) - lam)
    return (-0.5 * beta * qhat * q_x
            + 0.5 * beta * (rho * qhat - math.log1p(rho * (qhat + lam))))


def _psi_out_hat(spec, qhat):
    Qh = spec.Qhat_z
    v = 1.0 / (Qh + qhat)
    return sm.psi_out(spec.channel, v, qhat / (Qh * (Qh + qhat)))


def output_conjugate(spec, q_z, m_z=None):
    """qhat_z >= 0 minimising the I_out objective: output mmse at qhat_z equals m_z."""
    Q = spec.Q_z
    m_z = Q - q_z if m_z is None else m_z
    if q_z <= 0.0:
        return 0.0

    def g(s):
        return math.log(_output_side(spec, math.exp(s))[1]) - math.log(m_z)

    s0 = math.log(max(q_z / (Q * m_z), 1e-300))
    br = _bracket(g, s0, 1.0 if g(s0) > 0 else -1.0, 800.0)
    if br is None:
        raise SolverError("cannot bracket the output conjugate", residual=g(s0))
    s = optimize.brentq(g, *br, xtol=1e-14, rtol=4.0 * np.finfo(float).eps, maxiter=500)
    return math.exp(s)


def _i_out(spec, q_z, m_z):
    beta = spec.beta
    qhat = output_conjugate(spec, q_z, m_z)
    return (0.5 * beta * qhat * m_z - 0.5 * beta * math.log(spec.Qhat_z + qhat)
            + _psi_out_hat(spec, qhat))


def _i_int(spec, q_x, q_z, m_x, m_z):
    beta, rho, alpha, Q, nu = spec.beta, spec.rho, spec.alpha, spec.Q_z, spec.nu
    tail = (-0.5 * beta * math.log(m_x) - 0.5 * beta * q_x / rho
            - 0.5 * alpha * beta * math.log(m_z) - 0.5 * alpha * beta * q_z / Q)
    if nu.is_point_mass:
        # the infimum over gamma >= 0 is attained on the boundary in closed form
        c = nu.lambda_max
        k = min(m_x, alpha * m_z / c)
        s = max(1.0 / rho, 1.0 / k)
        return 0.5 * beta * (k * (s - 1.0 / rho) - math.log(s)) + tail
    lin = _lmmse(spec, m_x, m_z)
    inner = (0.5 * beta * m_x * lin.gamma_x + 0.5 * alpha * beta * m_z * lin.gamma_z
             - 0.5 * beta * lin.log_term)
    return inner + tail


def potential(spec, q_x, q_z, m_x=None, m_z=None):
    """I_0(q_x) + alpha I_out(q_z) + I_int(q_x, q_z) with all inner extremisations solved."""
    m_x = spec.rho - q_x if m_x is None else m_x
    m_z = spec.Q_z - q_z if m_z is None else m_z
    if not (0.0 < m_x <= spec.rho and 0.0 < m_z <= spec.Q_z):
        raise DomainError("need 0 <= q_x < rho and 0 <= q_z < Q_z")
    return (_i_prior(spec, q_x, m_x) + spec.alpha * _i_out(spec, q_z, m_z)
            + _i_int(spec, q_x, q_z, m_x, m_z))


def potential_gradient(spec, q_x, q_z, m_x=None, m_z=None):
    """Analytic gradient (d/dq_x, d/dq_z) of potential by the envelope theorem."""
    beta, rho, alpha, Q = spec.beta, spec.rho, spec.alpha, spec.Q_z
    m_x = rho - q_x if m_x is None else m_x
    m_z = Q - q_z if m_z is None else m_z
    qhx = max(0.0, q_x / (rho * m_x) - spec.side_snr)
    qhz = output_conjugate(spec, q_z, m_z)
    lin = _lmmse(spec, m_x, m_z)
    gx, gz = lin.gamma_x, lin.gamma_z
    dx = 0.5 * beta * (q_x / (rho * m_x) - gx - qhx)
    dz = 0.5 * alpha * beta * (q_z / (Q * m_z) - gz - qhz)
    return dx, dz


def _psi_out_q(spec, q):
    """Psi_out parametrised by the overlap: omega ~ N(0, q), v = Q_z - q."""
    return sm.psi_out(spec.channel, spec.Q_z - q, q)


def _is_gaussian_spectrum(spec):
    if spec.ensemble is not None:
        return spec.ensemble.kind == spectra.GAUSSIAN_IID
    a = spec.alpha
    return (abs(spec.nu.moment(1) - a) <= 1e-8 * a
            and abs(spec.nu.moment(2) - a * a - a) <= 1e-8 * (a * a + a))


def potential_gaussian_phi(spec, q, qhat):
    """Two-variable potential -beta q qhat / 2 + Psi_P0(qhat) + alpha Psi_out(q) for i.i.d. Gaussian Phi."""
    if not _is_gaussian_spectrum(spec):
        raise DomainError("potential_gaussian_phi needs an i.i.d. Gaussian ensemble")
    beta, rho, lam = spec.beta, spec.rho, spec.side_snr
    psi0 = 0.5 * beta * (rho * qhat - math.log1p(rho * (qhat + lam)))
    return -0.5 * beta * q * qhat + psi0 + spec.alpha * _psi_out_q(spec, q)


def potential_product(spec, q, qhat, nu_b, delta):
    """Two-variable potential for Phi = W B / sqrt(p) with p / n = delta and B^dagger B / n ~ nu_b."""
    if nu_b.zero_mass >= 1.0:
        raise DomainError("nu_B must not be a point mass at zero")
    if not delta > 0:
        raise DomainError("delta must be positive")
    beta = spec.beta
    ex = nu_b.moment(1)
    Q = ex / delta
    elog = nu_b.mean(lambda x: np.log1p(qhat * x))
    psi = sm.psi_out(spec.channel, Q - q, q)
    return 0.5 * beta * qhat * (ex - delta * q) - 0.5 * beta * elog + spec.alpha * psi


# ---------------------------------------------------------------- trivial point

def spectral_moments(spec):
    """(<lambda>, <lambda^2>): closed forms when the ensemble has them, else from nu."""
    if spec.ensemble is not None:
        try:
            exact = spectra.analytic_moments(spec.ensemble, spec.alpha)
        except DomainError:
            exact = None
        if exact is not None:
            return exact
    return spec.nu.moment(1), spec.nu.moment(2)


def trivial_jacobian(spec, fisher=None):
    """4x4 Jacobian at the trivial point of the message-passing update, acting on
    (q_x, q_z, qhat_x, qhat_z).

    Perturbing the conjugates moves the overlaps through the denoisers and the
    conjugates through the linear stage; the only nontrivial eigenvalue is
    F (alpha <lambda^2> / <lambda>^2 - 1).
    """
    if not spec.symmetric:
        raise DomainError("the trivial point needs symmetric prior and channel")
    rho, alpha, Q = spec.rho, spec.alpha, spec.Q_z
    l1, l2 = spectral_moments(spec)
    F = sm.channel_fisher(spec.channel, Q) if fisher is None else fisher
    jac = np.zeros((4, 4))
    jac[0, 2] = rho * rho
    jac[1, 3] = Q * Q * (1.0 + F)
    jac[2, 3] = l1 * F
    jac[3, 3] = (alpha * l2 / (l1 * l1) - 1.0) * F
    return jac


def trivial_jacobian_radius(spec, fisher=None):
    return float(np.max(np.abs(np.linalg.eigvals(trivial_jacobian(spec, fisher)))))


# ---------------------------------------------------------------- mutual information

def conditional_entropy(channel):
    """Differential entropy of y given z; constant in z for additive Gaussian noise."""
    if channel.noiseless:
        raise UnsupportedOperationError("noiseless channel has no finite conditional entropy")
    return 0.5 * math.log(2.0 * math.pi * math.e * channel.delta)


def mutual_information_density(spec, config=None):
    """I(X; Y | Phi) / n from the larger of the informed and uninformed free entropies."""
    h = conditional_entropy(spec.channel)
    config = config or SEConfig()
    best = -math.inf
    for init in (Uninformed(), Informed()):
        res = se_fixed_point(spec, replace(config, init=init, free_entropy=True))
        best = max(best, res.free_entropy)
    return -best - spec.alpha * h
