"""Scalar prior and channel integrals for the modulus-squared channel.

Conventions: z ~ N_beta(0, 1) has E|z|^2 = 1 (each real part of variance 1/2
when beta = 2).  Derivatives with respect to a complex argument are taken in
the two-real-variables sense, f' = d_x f + i d_y f, so for the channel

    fout = grad_omega log Zout,   dfout_domega = Laplacian_omega log Zout,

and the channel posterior of z given (y, omega, v) has

    mean = omega + (v / beta) fout,   variance = v + (v / beta)^2 dfout_domega.

f0 is the posterior mean of the scalar Gaussian problem, i.e.
(1 / beta) d_b log Z0.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy import special

from .errors import AccuracyError, DomainError, EvaluationError

EULER_GAMMA = float(np.euler_gamma)


@dataclass(frozen=True)
class Prior:
    """Centered Gaussian prior N_beta(0, rho)."""

    beta: int = 1
    rho: float = 1.0
    kind: str = "gaussian"

    def __post_init__(self):
        if self.beta not in (1, 2):
            raise DomainError("beta must be 1 or 2")
        if not self.rho > 0:
            raise DomainError("rho must be positive")
        if self.kind != "gaussian":
            raise DomainError(f"unsupported prior {self.kind!r}")


@dataclass(frozen=True)
class Channel:
    """y = |z|^2 (delta = 0) or y = |z|^2 + sqrt(delta) * N(0, 1)."""

    beta: int = 1
    delta: float = 0.0

    def __post_init__(self):
        if self.beta not in (1, 2):
            raise DomainError("beta must be 1 or 2")
        if self.delta < 0 or not math.isfinite(self.delta):
            raise DomainError("noise variance must be finite and >= 0")

    @property
    def noiseless(self):
        return self.delta == 0.0

    @property
    def kind(self):
        return "noiseless" if self.noiseless else "gaussian-noise"


@dataclass(frozen=True)
class QuadratureGrid:
    """Node counts for the scalar integrals; panel rules use ``panel_nodes`` per panel."""

    y_nodes: int = 256
    s_nodes: int = 192
    inner_nodes: int = 96
    panel_nodes: int = 24
    width: float = 10.0

    def __post_init__(self):
        if min(self.y_nodes, self.s_nodes, self.inner_nodes) < 32 or self.panel_nodes < 8:
            raise DomainError("quadrature rules are too coarse")


DEFAULT_GRID = QuadratureGrid()


# ---------------------------------------------------------------- helpers

def _gl(k):
    x, w = np.polynomial.legendre.leggauss(k)
    return x, w


_GL_CACHE = {}


def gauss_legendre(k):
    if k not in _GL_CACHE:
        _GL_CACHE[k] = _gl(k)
    return _GL_CACHE[k]


def _map(lo, hi, k):
    """Gauss-Legendre nodes/weights on [lo, hi] (broadcast over leading dims)."""
    x, w = gauss_legendre(k)
    lo = np.asarray(lo, dtype=float)[..., None]
    hi = np.asarray(hi, dtype=float)[..., None]
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w


def _panels(breaks, k):
    """Composite Gauss-Legendre rule on consecutive breakpoints (1-D)."""
    xs, ws = [], []
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        if hi > lo:
            x, w = _map(lo, hi, k)
            xs.append(x)
            ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)


def bessel_ratio(x):
    """I1(x) / I0(x) for x >= 0."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x < 1e3
    out[small] = special.i1e(x[small]) / special.i0e(x[small])
    out[~small] = 1.0 - _one_minus_ratio_series(x[~small])
    return out


def _one_minus_ratio_series(x):
    u = 1.0 / x
    return u * (0.5 + u * (0.125 + u * (0.125 + u * 25.0 / 128.0)))


def one_minus_ratio_sq(x):
    """1 - (I1/I0)^2, without cancellation for large arguments."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x < 1e3
    r = special.i1e(x[small]) / special.i0e(x[small])
    out[small] = (1.0 - r) * (1.0 + r)
    d = _one_minus_ratio_series(x[~small])
    out[~small] = d * (2.0 - d)
    return out


def log_i0e(x):
    return np.log(special.i0e(x))


# ---------------------------------------------------------------- prior

def z0(prior, b, a):
    """E_{x ~ N_beta(0, rho)} exp(-beta a |x|^2 / 2 + beta b.x)."""
    a = np.asarray(a, dtype=float)
    if np.any(a < 0):
        raise DomainError("a must be nonnegative")
    beta, rho = prior.beta, prior.rho
    d = 1.0 + rho * a
    return d ** (-beta / 2.0) * np.exp(beta * rho * np.abs(b) ** 2 / (2.0 * d))


def f0(prior, b, a):
    """Posterior mean rho b / (1 + rho a) of the scalar Gaussian channel."""
    a = np.asarray(a, dtype=float)
    if np.any(a < 0):
        raise DomainError("a must be nonnegative")
    return prior.rho * np.asarray(b) / (1.0 + prior.rho * a)


def prior_variance(prior, a):
    """Posterior variance E|x - f0|^2 = rho / (1 + rho a)."""
    return prior.rho / (1.0 + prior.rho * np.asarray(a, dtype=float))


def prior_overlap(prior, qhat):
    """q_x = E_xi Z0 |f0|^2 at (b, a) = (sqrt(qhat) xi, qhat)."""
    rho = prior.rho
    return rho * rho * qhat / (1.0 + rho * qhat)


def prior_mmse(prior, qhat):
    return prior.rho / (1.0 + prior.rho * qhat)


def psi_prior(prior, qhat):
    """E_xi Z0 log Z0 at (sqrt(qhat) xi, qhat)."""
    beta, rho = prior.beta, prior.rho
    return 0.5 * beta * (rho * qhat - math.log1p(rho * qhat))


# ---------------------------------------------------------------- channel, pointwise

def _radius(omega):
    omega = np.asarray(omega)
    return np.abs(omega)


def _direction(omega, r):
    """omega / |omega| with 0 at the origin."""
    omega = np.asarray(omega)
    with np.errstate(invalid="ignore", divide="ignore"):
        d = np.where(r > 0, omega / np.where(r > 0, r, 1.0), 0.0)
    return d


def _check_v(v):
    v = np.asarray(v, dtype=float)
    if np.any(~(v > 0)):
        raise DomainError("v must be positive")
    return v


def _log_zout_noiseless(beta, y, r, v):
    with np.errstate(divide="ignore", invalid="ignore"):
        sy = np.sqrt(np.where(y > 0, y, 0.0))
        if beta == 2:
            out = -np.log(v) - (sy - r) ** 2 / v + log_i0e(2.0 * r * sy / v)
        else:
            out = (-0.5 * np.log(2.0 * math.pi * v) - (sy - r) ** 2 / (2.0 * v)
                   + np.log1p(np.exp(-2.0 * sy * r / v)) - np.log(2.0 * sy))
    out = np.where(y < 0, -np.inf, out)
    return out


def _noiseless_derivs(beta, y, r, v):
    """Radial derivative and Laplacian of log Zout (noiseless closed forms)."""
    sy = np.sqrt(np.maximum(y, 0.0))
    if beta == 2:
        k = 2.0 * r * sy / v
        d1 = (2.0 * sy * bessel_ratio(k) - 2.0 * r) / v
        lap = -4.0 / v + 4.0 * y / v ** 2 * one_minus_ratio_sq(k)
    else:
        t = sy * r / v
        d1 = (sy * np.tanh(t) - r) / v
        lap = y / v ** 2 * _sech2(t) - 1.0 / v
    return d1, lap


def _sech2(t):
    e = np.exp(-2.0 * np.abs(t))
    return 4.0 * e / (1.0 + e) ** 2


def _s_density(beta, s, r, v):
    """Density of s = |omega + sqrt(v) g| given r = |omega|, plus log-derivatives.

    Returns p, d1 = d_r log p and lap = Laplacian(p) / p.
    """
    if beta == 2:
        k = 2.0 * r * s / v
        with np.errstate(divide="ignore"):
            logp = np.log(2.0 * s / v) - (s - r) ** 2 / v + log_i0e(k)
        p = np.exp(logp)
        d1 = (2.0 * s * bessel_ratio(k) - 2.0 * r) / v
        lap = d1 ** 2 - 4.0 / v + 4.0 * s ** 2 / v ** 2 * one_minus_ratio_sq(k)
        return p, d1, lap
    norm = 1.0 / math.sqrt(2.0 * math.pi) / np.sqrt(v)
    em = norm * np.exp(-(s - r) ** 2 / (2.0 * v))
    ep = norm * np.exp(-(s + r) ** 2 / (2.0 * v))
    p = em + ep
    dp = (em * (s - r) - ep * (s + r)) / v
    d2p = em * ((s - r) ** 2 / v - 1.0) / v + ep * ((s + r) ** 2 / v - 1.0) / v
    with np.errstate(invalid="ignore", divide="ignore"):
        d1 = np.where(p > 0, dp / p, 0.0)
        lap = np.where(p > 0, d2p / p, 0.0)
    return p, d1, lap


def _s_grid(beta, y, r, v, delta, grid):
    """Per-point s-panels covering the s-law and the noise kernel around sqrt(y)."""
    sd = np.sqrt(v)
    w = grid.width
    lo = np.maximum(0.0, r - w * sd)
    hi = r + w * sd
    sy = np.sqrt(np.maximum(y, 0.0))
    # kernel N(y; s^2, delta) in s has half-width ~ w sqrt(delta) / (2 s)
    kw = w * math.sqrt(delta) / np.maximum(2.0 * sy, math.sqrt(w * math.sqrt(delta)))
    klo = np.clip(sy - kw, lo, hi)
    khi = np.clip(sy + kw, lo, hi)
    k = grid.s_nodes // 3
    pts = [_map(lo, klo, k), _map(klo, khi, k), _map(khi, hi, k)]
    s = np.concatenate([p[0] for p in pts], axis=-1)
    ws = np.concatenate([p[1] for p in pts], axis=-1)
    return s, ws


def _noisy_parts(channel, y, r, v, grid):
    """Zout, d_r Zout and Laplacian Zout by quadrature over s = |z|."""
    beta, delta = channel.beta, channel.delta
    y, r, v = np.broadcast_arrays(np.asarray(y, float), np.asarray(r, float),
                                  np.asarray(v, float))
    s, ws = _s_grid(beta, y, r, v, delta, grid)
    p, d1, lap = _s_density(beta, s, r[..., None], v[..., None])
    ker = np.exp(-(y[..., None] - s ** 2) ** 2 / (2.0 * delta)) / math.sqrt(2.0 * math.pi * delta)
    base = ws * p * ker
    z = base.sum(-1)
    dz = (base * d1).sum(-1)
    lz = (base * lap).sum(-1)
    return z, dz, lz


def zout(channel, y, omega, v, grid=DEFAULT_GRID):
    """Zout(y; omega, v) = E_z P_out(y | sqrt(v) z + omega)."""
    v = _check_v(v)
    y = np.asarray(y, dtype=float)
    r = _radius(omega)
    if channel.noiseless:
        with np.errstate(divide="ignore"):
            out = np.exp(_log_zout_noiseless(channel.beta, y, r, v))
        return np.where(y < 0, 0.0, out)
    return _noisy_parts(channel, y, r, v, grid)[0]


def log_zout(channel, y, omega, v, grid=DEFAULT_GRID):
    v = _check_v(v)
    y = np.asarray(y, dtype=float)
    if channel.noiseless:
        return _log_zout_noiseless(channel.beta, y, _radius(omega), v)
    with np.errstate(divide="ignore"):
        return np.log(zout(channel, y, omega, v, grid))


def _derivs(channel, y, omega, v, grid, strict=True):
    """|omega|, radial derivative and Laplacian of log Zout.

    With ``strict`` false, points where Zout vanishes give nan instead of raising.
    """
    v = _check_v(v)
    y = np.asarray(y, dtype=float)
    r = _radius(omega)
    if channel.noiseless:
        bad = (y <= 0) if channel.beta == 1 else (y < 0)
        if strict and np.any(bad):
            raise EvaluationError("zout vanishes or is singular at the query point")
        with np.errstate(divide="ignore", invalid="ignore"):
            d1, lap = _noiseless_derivs(channel.beta, y, r, v)
        if np.any(bad):
            d1, lap = np.where(bad, np.nan, d1), np.where(bad, np.nan, lap)
        return r, d1, lap
    z, dz, lz = _noisy_parts(channel, y, r, v, grid)
    bad = ~(z > 0)
    if strict and np.any(bad):
        raise EvaluationError("zout underflows at the query point")
    with np.errstate(divide="ignore", invalid="ignore"):
        d1 = dz / z
        # Laplacian(log Z) = Laplacian(Z) / Z - |grad Z|^2 / Z^2
        lap = lz / z - d1 ** 2
    return r, np.where(bad, np.nan, d1), np.where(bad, np.nan, lap)


def fout(channel, y, omega, v, grid=DEFAULT_GRID):
    """grad_omega log Zout; complex-valued for beta = 2."""
    r, d1, _ = _derivs(channel, y, omega, v, grid)
    out = _direction(omega, r) * d1
    return out if channel.beta == 2 else np.real(out)


def dfout_domega(channel, y, omega, v, grid=DEFAULT_GRID):
    """Laplacian of log Zout in omega (the second derivative when beta = 1)."""
    return _derivs(channel, y, omega, v, grid)[2]


def posterior_moments(channel, y, omega, v, grid=DEFAULT_GRID, strict=True):
    """Mean and variance E|z - mean|^2 of z given y and the prior N_beta(omega, v).

    ``strict=False`` returns nan at points where Zout underflows.
    """
    r, d1, lap = _derivs(channel, y, omega, v, grid, strict)
    beta = channel.beta
    mean = np.asarray(omega) + (v / beta) * _direction(omega, r) * d1
    var = v + (v / beta) ** 2 * lap
    if beta == 1:
        mean = np.real(mean)
    return mean, var


# ---------------------------------------------------------------- averages over omega

def _omega_rule(beta, sigma2, v, k):
    """Nodes r = |omega| and weights for omega ~ N_beta(0, sigma2).

    Composite Gauss-Legendre panels refined geometrically towards r = 0 on the
    scale sqrt(v), where the channel integrands vary fastest.
    """
    if sigma2 <= 0.0:
        return np.zeros(1), np.ones(1)
    sd, u = math.sqrt(sigma2), math.sqrt(v)
    r, w = _panels(u * _scaled_breaks(9.0 * sd / u), k)
    if beta == 2:
        dens = 2.0 * r / sigma2 * np.exp(-r * r / sigma2)
    else:
        dens = 2.0 * np.exp(-0.5 * r * r / sigma2) / (math.sqrt(2.0 * math.pi) * sd)
    return r, w * dens


def _scaled_breaks(top):
    """Breakpoints 0, .5, 1, 2, 4, ... capped at `top` (scaled units)."""
    b = [0.0]
    x = 0.5
    while x < top:
        b.append(x)
        x *= 2.0
    b.append(top)
    return np.array(b)


def _h2(b, k):
    """Scaled posterior variance of the complex noiseless channel at |omega| = b sqrt(v)."""
    b = np.asarray(b, dtype=float)
    a, w = _map(np.maximum(0.0, b - 9.0), b + 9.0, k)
    bb = b[..., None]
    x = 2.0 * a * bb
    f = 2.0 * a ** 3 * np.exp(-(a - bb) ** 2) * special.i0e(x) * one_minus_ratio_sq(x)
    return (w * f).sum(-1)


def _k1(b, k):
    """Scaled posterior variance kernel of the real noiseless channel."""
    b = np.asarray(b, dtype=float)
    a, w = _map(np.zeros_like(b), np.full_like(b, 12.0), k)
    bb = b[..., None]
    f = a ** 2 * np.exp(-(a + bb) ** 2 / 2.0) / (1.0 + np.exp(-2.0 * a * bb))
    return 4.0 / math.sqrt(2.0 * math.pi) * (w * f).sum(-1)


_K1_TOTAL = None


def _k1_total():
    global _K1_TOTAL
    if _K1_TOTAL is None:
        b, w = _panels(np.array([0.0, 2.0, 5.0, 12.0]), 64)
        _K1_TOTAL = float((w * _k1(b, 96)).sum())
    return _K1_TOTAL


ASYMPTOTIC_SNR = 1e12


def _mmse_noiseless(beta, v, sigma2, grid):
    if sigma2 <= 0.0:
        return v
    c = math.sqrt(sigma2 / v)
    k = grid.inner_nodes
    if beta == 2:
        if c * c > ASYMPTOTIC_SNR:
            return 0.5 * v
        b, w = _panels(_scaled_breaks(6.0 * c), grid.panel_nodes)
        dens = 2.0 * b / c ** 2 * np.exp(-(b / c) ** 2)
        return v * float((w * dens * _h2(b, k)).sum())
    if c * c > ASYMPTOTIC_SNR:
        return 2.0 * v / c * _k1_total() / math.sqrt(2.0 * math.pi)
    top = min(12.0, 12.0 * c)
    b, w = _panels(_scaled_breaks(top), grid.panel_nodes)
    dens = np.exp(-0.5 * (b / c) ** 2) / (math.sqrt(2.0 * math.pi) * c)
    return 2.0 * v * float((w * dens * _k1(b, k)).sum())


def output_mmse(channel, v, sigma2, grid=DEFAULT_GRID):
    """E |z - E[z | y, omega]|^2 with omega ~ N_beta(0, sigma2), z | omega ~ N_beta(omega, v)."""
    if not v > 0:
        raise DomainError("v must be positive")
    if channel.noiseless:
        return _mmse_noiseless(channel.beta, float(v), float(sigma2), grid)
    return output_mmse_generic(channel, v, sigma2, grid)


def output_mmse_generic(channel, v, sigma2, grid=DEFAULT_GRID):
    """Same quantity through v - (v/beta)^2 E |fout|^2 and explicit y-quadrature.

    Independent of the scaled kernels used by ``output_mmse`` for the
    noiseless channel, so the two serve as mutual checks.
    """
    beta = channel.beta
    r, wr = _omega_rule(beta, sigma2, v, grid.panel_nodes)
    if channel.noiseless:
        # y = s^2 with s = |omega + sqrt(v) g|
        s, ws = _s_law_grid(beta, r, v, grid)
        p, _, _ = _s_density(beta, s, r[:, None], v)
        d1, _ = _noiseless_derivs(beta, s ** 2, r[:, None], v)
        fisher = (ws * p * d1 ** 2).sum(-1)
        return float(v - (v / beta) ** 2 * np.dot(wr, fisher))

    def score(z, dz, lz):
        return np.where(z > 0, dz ** 2 / np.where(z > 0, z, 1.0), 0.0)

    return float(v - (v / beta) ** 2 * _noisy_average(channel, r, wr, v, grid, score))


_OMEGA_CHUNK = 8


def _noisy_average(channel, r, wr, v, grid, integrand):
    """sum_r wr int dy integrand(Z, d_r Z, Laplacian Z), chunked over r to bound memory."""
    total = 0.0
    for i in range(0, r.size, _OMEGA_CHUNK):
        rc = r[i:i + _OMEGA_CHUNK]
        y, wy = _y_grid(channel, rc, v, grid)
        parts = _noisy_parts(channel, y, rc[:, None], v, grid)
        total += np.dot(wr[i:i + _OMEGA_CHUNK], (wy * integrand(*parts)).sum(-1))
    return float(total)


def _s_law_grid(beta, r, v, grid):
    sd = math.sqrt(v)
    lo = np.maximum(0.0, r - grid.width * sd)
    hi = r + grid.width * sd
    # a second panel near zero resolves the reflected term for small r
    mid = np.clip(r, lo, hi)
    a = _map(lo, mid, grid.s_nodes // 2)
    b = _map(mid, hi, grid.s_nodes // 2)
    return np.concatenate([a[0], b[0]], -1), np.concatenate([a[1], b[1]], -1)


def _y_grid(channel, r, v, grid):
    """Composite y-rule per omega node: noise tails, bulk of s^2, upper tail."""
    sd = math.sqrt(v)
    nd = grid.width * math.sqrt(channel.delta)
    s_lo = np.maximum(0.0, r - grid.width * sd)
    s_hi = r + grid.width * sd
    breaks = np.stack([np.full_like(r, -nd), s_lo ** 2 - nd, s_lo ** 2 + nd,
                       (r + sd) ** 2 + nd, s_hi ** 2 + nd], -1)
    breaks = np.maximum.accumulate(breaks, axis=-1)
    k = grid.y_nodes // 4
    pieces = [_map(breaks[:, i], breaks[:, i + 1], k) for i in range(4)]
    y = np.concatenate([p[0] for p in pieces], -1)
    w = np.concatenate([p[1] for p in pieces], -1)
    return y, w


def psi_out(channel, v, sigma2, grid=DEFAULT_GRID):
    """E_omega int dy Zout log Zout at (omega, v), omega ~ N_beta(0, sigma2)."""
    if not v > 0:
        raise DomainError("v must be positive")
    sigma2 = max(float(sigma2), 0.0)
    if channel.noiseless:
        return _psi_noiseless(channel.beta, float(v), sigma2, grid)
    r, wr = _omega_rule(channel.beta, sigma2, v, grid.panel_nodes)

    def entropy(z, dz, lz):
        return np.where(z > 0, z * np.log(np.where(z > 0, z, 1.0)), 0.0)

    return _noisy_average(channel, r, wr, v, grid, entropy)


def _psi_noiseless(beta, v, sigma2, grid):
    k = grid.inner_nodes
    c = math.sqrt(sigma2 / v)
    if beta == 2:
        if c == 0.0:
            return -math.log(v) - 1.0
        b, w = _panels(_scaled_breaks(6.0 * c), grid.panel_nodes)
        dens = 2.0 * b / c ** 2 * np.exp(-(b / c) ** 2)
        return -math.log(v) + float((w * dens * _g2(b, k)).sum())
    q = sigma2 + v
    elog = 0.5 * math.log(q) - 0.5 * (EULER_GAMMA + math.log(2.0))
    if c == 0.0:
        ed, el = 0.0, math.log(2.0)
    else:
        top = min(12.0, 12.0 * c)
        b, w = _panels(_scaled_breaks(top), grid.panel_nodes)
        dens = 2.0 * np.exp(-0.5 * (b / c) ** 2) / (math.sqrt(2.0 * math.pi) * c)
        ed = float((w * dens * _d1(b)).sum())
        el = float((w * dens * _l1(b, k)).sum())
    return (-0.5 * math.log(2.0 * math.pi * v) - 0.5 * (1.0 + ed) + el
            - math.log(2.0) - elog)


def _d1(b):
    """E[(|b + g| - b)^2] - 1 for g ~ N(0, 1), b >= 0."""
    return 4.0 * b * b * special.ndtr(-b) - 4.0 * b * np.exp(-0.5 * b * b) / math.sqrt(2.0 * math.pi)


def _l1(b, k):
    """E[log(1 + exp(-2 a b))] with a = |b + g|."""
    b = np.asarray(b, dtype=float)
    a, w = _map(np.maximum(0.0, b - 12.0), b + 12.0, k)
    bb = b[..., None]
    p = (np.exp(-0.5 * (a - bb) ** 2) + np.exp(-0.5 * (a + bb) ** 2)) / math.sqrt(2.0 * math.pi)
    return (w * p * np.log1p(np.exp(-2.0 * a * bb))).sum(-1)


def _g2(b, k):
    """E[-(a - b)^2 + log i0e(2ab)] with a the scaled Rice variable."""
    b = np.asarray(b, dtype=float)
    a, w = _map(np.maximum(0.0, b - 9.0), b + 9.0, k)
    bb = b[..., None]
    x = 2.0 * a * bb
    p = 2.0 * a * np.exp(-(a - bb) ** 2) * special.i0e(x)
    return (w * p * (-(a - bb) ** 2 + log_i0e(x))).sum(-1)


def psi_out_zero(channel, q):
    """Psi_out at omega = 0, v = q (minus the differential entropy of y)."""
    if channel.noiseless:
        if channel.beta == 2:
            return -1.0 - math.log(q)
        return -math.log(q) - 0.5 - 0.5 * math.log(math.pi) + 0.5 * EULER_GAMMA
    return psi_out(channel, q, 0.0)


# ---------------------------------------------------------------- Fisher-type bracket

FISHER_PANEL_NODES = 12
FISHER_MAX_NODES = 200000


def channel_fisher(channel, q, grid=DEFAULT_GRID):
    """int dy |E_z (|z|^2 - 1) P_out(y | sqrt(q) z)|^2 / E_z P_out(y | sqrt(q) z).

    Equals Var|z|^2 = 2 / beta for the noiseless channel.
    """
    if not q > 0:
        raise DomainError("q must be positive")
    beta = channel.beta
    if channel.noiseless:
        return 2.0 / beta
    delta = channel.delta
    sd = math.sqrt(delta)
    nd = grid.width * sd
    k = FISHER_PANEL_NODES
    # t = |z|^2: Exp(1) for beta = 2, chi^2_1 for beta = 1; panels in q t no wider
    # than the noise kernel so that both integrals resolve it
    tmax = 45.0 if beta == 2 else 80.0
    width = min(2.0, 1.5 * sd)
    tb = np.linspace(0.0, tmax, int(math.ceil(q * tmax / width)) + 1)
    yb = np.linspace(-nd, q * tmax + nd, int(math.ceil((q * tmax + 2 * nd) / width)) + 1)
    if (tb.size + yb.size) * k > FISHER_MAX_NODES:
        raise AccuracyError("noise too small for the channel_fisher quadrature", 2.0 / beta)
    if beta == 2:
        t, wt = _panels(tb, k)
        pt = np.exp(-t)
    else:
        u, wt = _panels(np.sqrt(tb), k)
        t = u * u
        pt = 2.0 * np.exp(-0.5 * t) / math.sqrt(2.0 * math.pi)
    y, wy = _panels(yb, k)
    wpt = wt * pt
    val = mass = 0.0
    # the kernel is local: each block of y only meets t within nd / q of it
    for idx in np.array_split(np.arange(y.size), max(1, y.size // 512)):
        yc = y[idx]
        lo = np.searchsorted(t, (yc[0] - nd) / q)
        hi = np.searchsorted(t, (yc[-1] + nd) / q, side="right")
        ts, ws = t[lo:hi], wpt[lo:hi]
        ker = np.exp(-(yc[:, None] - q * ts[None, :]) ** 2 / (2.0 * delta))
        ker /= math.sqrt(2.0 * math.pi * delta)
        den = ker @ ws
        num = ker @ (ws * (ts - 1.0))
        with np.errstate(invalid="ignore", divide="ignore"):
            val += float((wy[idx] * np.where(den > 1e-300, num ** 2 / den, 0.0)).sum())
        mass += float((wy[idx] * den).sum())
    if abs(mass - 1.0) > 1e-8:
        raise AccuracyError("y-quadrature lost mass in channel_fisher", val)
    return val
