"""Weak- and full-recovery thresholds in the sampling ratio alpha.

Three lines are computed for a Gaussian prior:

* alpha_wr_algo, where the trivial fixed point loses linear stability;
* alpha_fr_it = beta (1 - nu({0})), counting degrees of freedom;
* alpha_fr_algo, where the uninformed state evolution reaches full recovery.
"""

from dataclasses import dataclass, field
import math

from scipy import optimize

from . import scalar_models as sm
from . import spectra
from .errors import DomainError, SolverError, UnboundedThresholdError
from .state_evolution import (ProblemSpec, SEConfig, Uninformed, se_fixed_point,
                              trivial_jacobian_radius)

CLOSED_FORM = "ClosedForm"
IMPLICIT_SOLVE = "ImplicitSolve"
SE_BISECTION = "SEBisection"

WR_BRACKET = (1e-3, 50.0)
FR_BRACKET = (0.05, 10.0)
FR_WIDTH = 1e-3
FR_MAX_ITER = 60


@dataclass(frozen=True)
class FullRecoveryBracket:
    """Bisection result: the predicate is false at ``lower`` and true at ``upper``."""

    lower: float
    upper: float
    mmse_lower: float
    mmse_upper: float
    evaluations: int

    @property
    def value(self):
        return 0.5 * (self.lower + self.upper)

    @property
    def width(self):
        return self.upper - self.lower


@dataclass
class ThresholdReport:
    ensemble: str
    alpha_wr_algo: float = math.nan
    alpha_fr_it: float = math.nan
    alpha_fr_algo: float = math.nan
    alpha_fr_algo_bracket: tuple = (math.nan, math.nan)
    methods: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)

    @property
    def ok(self):
        return not self.errors

    def as_dict(self):
        return {
            "ensemble": self.ensemble,
            "alpha_wr_algo": self.alpha_wr_algo,
            "alpha_fr_it": self.alpha_fr_it,
            "alpha_fr_algo": self.alpha_fr_algo,
            "alpha_fr_algo_bracket": list(self.alpha_fr_algo_bracket),
            "methods": dict(self.methods),
            "errors": dict(self.errors),
        }


def _defaults(ensemble, channel, prior):
    beta = ensemble.beta
    channel = sm.Channel(beta, 0.0) if channel is None else channel
    prior = sm.Prior(beta, 1.0) if prior is None else prior
    if channel.beta != beta or prior.beta != beta:
        raise DomainError("ensemble, channel and prior disagree on beta")
    return channel, prior


def min_alpha(ensemble):
    """Smallest sampling ratio the ensemble is defined at."""
    return 1.0 if ensemble.kind == spectra.COLUMN_ORTHONORMAL else 0.0


def _moment_ratio(ensemble, alpha):
    """<lambda>^2 / <lambda^2> of nu(alpha) and whether it came from a closed form."""
    exact = spectra.analytic_moments(ensemble, alpha)
    if exact is not None:
        l1, l2 = exact
        return l1 * l1 / l2, True
    nu = spectra.density_at(ensemble, alpha)
    return nu.moment(1) ** 2 / nu.moment(2), False


def _sign_change(f, lo, hi, points=64):
    """First sub-interval of a geometric grid on [lo, hi] where f changes sign."""
    ratio = (hi / lo) ** (1.0 / points)
    a, fa = lo, f(lo)
    for k in range(1, points + 1):
        b = lo * ratio ** k if k < points else hi
        fb = f(b)
        if fa == 0.0:
            return a, a
        if (fa < 0) != (fb < 0):
            return a, b
        a, fa = b, fb
    return None


def alpha_wr_algo(ensemble, channel=None, prior=None, return_method=False):
    """Algorithmic weak-recovery threshold: the trivial fixed point turns unstable.

    Noiseless channels solve alpha = (1 + beta/2) <lambda>^2 / <lambda^2> with
    nu = nu(alpha); other channels bisect trivial_jacobian_radius - 1.
    """
    channel, prior = _defaults(ensemble, channel, prior)
    beta = ensemble.beta
    lo, hi = max(WR_BRACKET[0], min_alpha(ensemble)), WR_BRACKET[1]
    if channel.noiseless:
        exact = {}

        def h(a):
            ratio, closed = _moment_ratio(ensemble, a)
            exact[a] = closed
            return a - (1.0 + 0.5 * beta) * ratio

        br = _sign_change(h, lo, hi)
        if br is None:
            raise SolverError(f"no weak-recovery threshold in [{lo:g}, {hi:g}]")
        root = br[0] if br[0] == br[1] else optimize.brentq(h, *br, xtol=1e-14, rtol=1e-15)
        method = CLOSED_FORM if all(exact.values()) else IMPLICIT_SOLVE
    else:
        def h(a):
            spec = ProblemSpec.for_ensemble(ensemble, a, prior.rho, channel.delta)
            return trivial_jacobian_radius(spec) - 1.0

        br = _sign_change(h, lo, hi, points=32)
        if br is None:
            raise SolverError(f"radius - 1 has no sign change on [{lo:g}, {hi:g}]")
        root = br[0] if br[0] == br[1] else optimize.brentq(h, *br, xtol=1e-10)
        method = IMPLICIT_SOLVE
    return (root, method) if return_method else root


def _rank_fraction(ensemble):
    """c such that 1 - nu_alpha({0}) = min(alpha, c)."""
    if ensemble.kind == spectra.COLUMN_ORTHONORMAL:
        return 1.0
    return min((1.0,) + ensemble.gammas)


def alpha_fr_it(ensemble, beta=None, at_alpha=None, nu=None):
    """Information-theoretic full-recovery threshold beta (1 - nu({0})).

    Without ``at_alpha`` the self-consistent value inf{alpha : alpha > beta (1 -
    nu_alpha({0}))} is returned.  With ``at_alpha`` the right-hand side is
    evaluated at that ratio, from ``nu`` when an (empirical) density is given.
    """
    beta = ensemble.beta if beta is None else beta
    if beta not in (1, 2):
        raise DomainError("beta must be 1 or 2")
    if at_alpha is not None:
        zero = nu.zero_mass if nu is not None else spectra.analytic_zero_mass(ensemble, at_alpha)
        return beta * (1.0 - zero)
    if nu is not None:
        return beta * (1.0 - nu.zero_mass)
    # 1 - nu0 = min(alpha, c) and alpha > beta min(alpha, c) iff alpha > beta c
    return max(beta * _rank_fraction(ensemble), min_alpha(ensemble))


def uninformed_mmse(ensemble, alpha, channel=None, prior=None, config=None):
    channel, prior = _defaults(ensemble, channel, prior)
    spec = ProblemSpec.for_ensemble(ensemble, alpha, prior.rho, channel.delta)
    config = config or SEConfig(init=Uninformed(), keep_trace=False, free_entropy=False)
    res = se_fixed_point(spec, config)
    return res.mmse, spec


def alpha_fr_algo(ensemble, channel=None, prior=None, tol_fr=None, bracket=FR_BRACKET,
                  width=FR_WIDTH, max_iter=FR_MAX_ITER, config=None):
    """Bisect alpha on [uninformed SE mmse <= rho nu({0}) + tol_fr].

    tol_fr defaults to 1e-6 rho.  Returns a FullRecoveryBracket of width at
    most ``width``.
    """
    channel, prior = _defaults(ensemble, channel, prior)
    rho = prior.rho
    tol_fr = 1e-6 * rho if tol_fr is None else tol_fr
    evaluations = 0

    def predicate(a):
        nonlocal evaluations
        evaluations += 1
        mmse, spec = uninformed_mmse(ensemble, a, channel, prior, config)
        return mmse <= rho * spec.nu.zero_mass + tol_fr, mmse

    lo = max(bracket[0], min_alpha(ensemble))
    hi = bracket[1]
    ok_hi, m_hi = predicate(hi)
    if not ok_hi:
        raise UnboundedThresholdError(f"no full recovery up to alpha = {hi:g}", residual=m_hi)
    ok_lo, m_lo = predicate(lo)
    if ok_lo:
        return FullRecoveryBracket(lo, lo, m_lo, m_lo, evaluations)
    for _ in range(max_iter):
        if hi - lo <= width:
            break
        mid = 0.5 * (lo + hi)
        ok, m = predicate(mid)
        if ok:
            hi, m_hi = mid, m
        else:
            lo, m_lo = mid, m
    return FullRecoveryBracket(lo, hi, m_lo, m_hi, evaluations)


def threshold_report(ensemble, channel=None, prior=None, full_recovery=True, tol_fr=None):
    """All three thresholds; failures are recorded per entry instead of raised."""
    channel, prior = _defaults(ensemble, channel, prior)
    report = ThresholdReport(ensemble.label)
    try:
        report.alpha_wr_algo, report.methods["alpha_wr_algo"] = alpha_wr_algo(
            ensemble, channel, prior, return_method=True)
    except (SolverError, DomainError) as exc:
        report.errors["alpha_wr_algo"] = str(exc)
    if channel.noiseless:
        report.alpha_fr_it = alpha_fr_it(ensemble)
        report.methods["alpha_fr_it"] = CLOSED_FORM
    else:
        report.errors["alpha_fr_it"] = "defined for the noiseless channel only"
    if full_recovery:
        try:
            br = alpha_fr_algo(ensemble, channel, prior, tol_fr)
            report.alpha_fr_algo = br.value
            report.alpha_fr_algo_bracket = (br.lower, br.upper)
            report.methods["alpha_fr_algo"] = SE_BISECTION
        except (SolverError, DomainError) as exc:
            report.errors["alpha_fr_algo"] = str(exc)
    return report
