"""Generalized vector approximate message passing (G-VAMP) at finite size.

The estimator couples x and z = Phi x / sqrt(n) through three blocks: the
prior denoiser on x, the channel denoiser on z and a joint linear (LMMSE)
stage computed from the SVD of Phi.  Messages are Gaussian with a scalar
precision per vector, so the recursion is tracked by the state evolution.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from . import ensembles
from . import scalar_models as sm
from .errors import DomainError

VARIANCE_FLOOR = 1e-11

# independent Philox streams per seed
_SIGNAL_STREAM = 1
_NOISE_STREAM = 2
_INIT_STREAM = 3


@dataclass(frozen=True)
class GvampConfig:
    max_iter: int = 200
    damping: float = 0.3
    stop_tol: float = 1e-10
    variance_floor: float = VARIANCE_FLOOR
    seed: int = 0
    init_scale: float = 1e-6

    def __post_init__(self):
        if self.max_iter < 1:
            raise DomainError("max_iter must be at least 1")
        if not 0.0 <= self.damping < 1.0:
            raise DomainError("damping must lie in [0, 1)")
        if not self.variance_floor > 0:
            raise DomainError("variance floor must be positive")
        if not self.stop_tol > 0:
            raise DomainError("stop_tol must be positive")


@dataclass
class GvampRun:
    mse_trace: np.ndarray
    overlap_trace: np.ndarray
    estimate: np.ndarray
    converged: bool
    iterations: int
    diverged: bool = False
    clipped: int = 0
    fallbacks: int = 0
    zvar_trace: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def final_mse(self):
        return float(self.mse_trace[-1]) if self.mse_trace.size else math.nan


def generate_instance(ensemble, prior, channel, n, alpha, seed):
    """(MatrixInstance, signal, observations) for one seed.

    The matrix, the signal and the channel noise use separate streams of the
    seed, so changing the channel does not change Phi or the signal.
    """
    if prior.beta != ensemble.beta or channel.beta != ensemble.beta:
        raise DomainError("ensemble, prior and channel disagree on beta")
    inst = ensembles.sample(ensemble, n, alpha, seed)
    x, y = observe(inst, prior, channel, seed)
    return inst, x, y


def observe(instance, prior, channel, seed):
    """Signal drawn from the prior and its observations through a given matrix."""
    n = instance.n
    x = math.sqrt(prior.rho) * ensembles.gaussian(
        ensembles.rng_for(seed, _SIGNAL_STREAM), n, prior.beta)
    z = instance.phi @ x / math.sqrt(n)
    y = np.abs(z) ** 2
    if not channel.noiseless:
        noise = ensembles.rng_for(seed, _NOISE_STREAM).standard_normal(y.shape)
        y = y + math.sqrt(channel.delta) * noise
    return x, y


def prior_denoiser(r, gamma, prior):
    """Posterior mean and average variance of x ~ N(0, rho) observed as r = x + N(0, 1/gamma)."""
    if not gamma > 0:
        raise DomainError("gamma must be positive")
    rho = prior.rho
    mean = rho * gamma * np.asarray(r) / (1.0 + rho * gamma)
    return mean, rho / (1.0 + rho * gamma)


def output_denoiser(y, omega, v, channel, floor=VARIANCE_FLOOR):
    """Channel posterior of z ~ N(omega, v) given y.

    Returns (mean, average variance, number of fallback components); points
    where Zout underflows keep the prior moments (omega, v).
    """
    if not v > 0:
        raise DomainError("v must be positive")
    mean, var = sm.posterior_moments(channel, y, omega, v, strict=False)
    bad = ~(np.isfinite(mean) & np.isfinite(var))
    if np.any(bad):
        mean = np.where(bad, omega, mean)
        var = np.where(bad, v, var)
    return mean, max(float(np.mean(var)), floor), int(np.count_nonzero(bad))


def mse_mod_phase(estimate, truth):
    """min over global phases |c| = 1 of ||truth - c estimate||^2 / n."""
    estimate, truth = np.asarray(estimate), np.asarray(truth)
    if estimate.shape != truth.shape:
        raise DomainError("estimate and truth differ in length")
    n = truth.size
    inner = np.vdot(estimate, truth)
    if inner == 0:
        return float((np.vdot(truth, truth).real + np.vdot(estimate, estimate).real) / n)
    if np.iscomplexobj(estimate) or np.iscomplexobj(truth):
        c = inner / abs(inner)
    else:
        c = math.copysign(1.0, inner.real)
    return float(np.sum(np.abs(truth - c * estimate) ** 2) / n)


def overlap(estimate, truth, rho=1.0):
    return float(abs(np.vdot(estimate, truth)) / (truth.size * rho))


def lmmse_stage(instance, hx, gamma, hz, tau):
    """Gaussian posterior of x proportional to exp(-gamma|x|^2/2 + <hx, x> - tau|Ax|^2/2 + <hz, Ax>).

    A = Phi / sqrt(n), messages in natural parameters (precision-weighted mean,
    precision).  Returns (x mean, average x variance, z = A x mean, average z variance).
    """
    u, s, vh = instance.svd
    n, m = instance.n, instance.m
    sig = s / math.sqrt(n)
    d = gamma + tau * sig ** 2
    if not (gamma > 0 and np.all(d > 0)):
        raise DomainError("linear stage needs gamma + tau lambda > 0")
    vx = vh @ hx
    coef = (vx + sig * (hz.conj() @ u).conj()) / d
    # directions outside the row space only see the x message
    x = ((coef - vx / gamma).conj() @ vh).conj() + hx / gamma
    z = u @ (sig * coef)
    xvar = (np.sum(1.0 / d) + (n - s.size) / gamma) / n
    zvar = float(np.sum(sig ** 2 / d)) / m
    return x, float(xvar), z, zvar


def _extrinsic(mean, var, prec_in, h_in, floor):
    """Divide a Gaussian posterior by its incoming message, in natural parameters.

    A precision below ``floor`` is raised to it; the precision-weighted mean is kept.
    """
    prec = 1.0 / var - prec_in
    clipped = not prec >= floor
    return mean / var - h_in, max(prec, floor), clipped


def _mix(new, old, d):
    return new if old is None or d == 0.0 else (1.0 - d) * new + d * old


def run(instance, y, prior, channel, config=None, truth=None, x_init=None):
    """Run G-VAMP on one instance; traces are recorded against ``truth`` when given.

    ``x_init`` replaces the random symmetry-breaking start of the z-side message.

    Messages are stored as (precision-weighted mean, precision) and damped in
    that form, which stays finite as a precision approaches zero.
    """
    config = config or GvampConfig()
    beta, rho, d, floor = prior.beta, prior.rho, config.damping, config.variance_floor
    n, m = instance.n, instance.m
    y = np.asarray(y, dtype=float)
    if y.shape != (m,):
        raise DomainError("observations do not match the matrix")
    dtype = complex if beta == 2 else float
    s = instance.svd[1] / math.sqrt(n)
    q_z = rho * float(np.sum(s ** 2)) / m

    # symmetry breaking: a small random x enters through the z-side message
    if x_init is None:
        x0 = math.sqrt(config.init_scale) * ensembles.gaussian(
            ensembles.rng_for(config.seed, _INIT_STREAM), n, beta)
    else:
        x0 = np.asarray(x_init)
    h1x, g1 = np.zeros(n, dtype=dtype), floor
    t1 = 1.0 / q_z
    h1z = t1 * (instance.phi @ x0) / math.sqrt(n)
    # Gaussian prior: the extrinsic x message is the prior itself
    h2x, g2 = np.zeros(n, dtype=dtype), 1.0 / rho
    h2z = t2 = None

    mse, ovl, zvars = [], [], []
    clipped = fallbacks = 0
    converged = diverged = False
    x_prev = None
    it = 0
    for it in range(1, config.max_iter + 1):
        x1, _ = prior_denoiser(h1x / g1, g1, prior)
        if not np.all(np.isfinite(x1)):
            diverged = True
            break
        if truth is not None:
            mse.append(mse_mod_phase(x1, truth))
            ovl.append(overlap(x1, truth, rho))
        if x_prev is not None:
            # relative change: near the trivial point the estimate itself is tiny
            step = float(np.sum(np.abs(x1 - x_prev) ** 2))
            if step <= config.stop_tol * float(np.sum(np.abs(x1) ** 2)):
                converged = True
                break
        x_prev = x1

        z1, zv1, bad = output_denoiser(y, h1z / t1, 1.0 / t1, channel, floor)
        fallbacks += bad
        hz, tz, c = _extrinsic(z1, zv1, t1, h1z, floor)
        clipped += c
        h2z, t2 = _mix(hz, h2z, d), _mix(tz, t2, d)

        x2, xv2, z2, zv2 = lmmse_stage(instance, h2x, g2, h2z, t2)
        zvars.append(zv2)
        hx, gx, c1 = _extrinsic(x2, max(xv2, floor), g2, h2x, floor)
        hz, tz, c2 = _extrinsic(z2, max(zv2, floor), t2, h2z, floor)
        clipped += c1 + c2
        h1x, g1 = _mix(hx, h1x, d), _mix(gx, g1, d)
        h1z, t1 = _mix(hz, h1z, d), _mix(tz, t1, d)
    if truth is not None and mse and mse[-1] > 4.0 * rho:
        diverged = True
    return GvampRun(np.array(mse), np.array(ovl), x1, converged, it, diverged,
                    clipped, fallbacks, np.array(zvars))
