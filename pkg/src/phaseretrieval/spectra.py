"""Limit spectra of Phi^dagger Phi / n for the supported sensing ensembles.

A density is stored as a list of atoms plus a separate mass at zero.  Every
asymptotic formula in the package only needs linear statistics <f(lambda)>,
so the atomic form loses nothing.
"""

from dataclasses import dataclass, field
from functools import lru_cache
import math

import numpy as np

from .errors import DomainError, EvaluationError

GAUSSIAN_IID = "gaussian"
COLUMN_ORTHONORMAL = "orthonormal"
SUBSAMPLED_HADAMARD = "hadamard"
SUBSAMPLED_DFT = "dft"
PRODUCT_OF_GAUSSIANS = "product"

KINDS = (GAUSSIAN_IID, COLUMN_ORTHONORMAL, SUBSAMPLED_HADAMARD, SUBSAMPLED_DFT,
         PRODUCT_OF_GAUSSIANS)

# empirical construction defaults for ensembles without a closed form
EMPIRICAL_N = 1000
EMPIRICAL_SAMPLES = 20
ZERO_CUTOFF = 1e-10


@dataclass(frozen=True)
class EnsembleSpec:
    """Sensing ensemble plus field index beta (1 real, 2 complex).

    For products, ``gammas`` holds the inner widths k_l / n of the factors,
    so Phi = W_0 W_1 ... W_p / sqrt(k_1 ... k_p).
    """

    kind: str
    beta: int = 1
    gammas: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown ensemble kind {self.kind!r}")
        if self.beta not in (1, 2):
            raise DomainError("beta must be 1 or 2")
        object.__setattr__(self, "gammas", tuple(float(g) for g in self.gammas))
        if self.kind == PRODUCT_OF_GAUSSIANS:
            if not self.gammas:
                raise DomainError("product ensemble needs at least one ratio")
            if any(not (g > 0) for g in self.gammas):
                raise DomainError("product ratios must be positive")
        elif self.gammas:
            raise DomainError("ratios only apply to the product ensemble")
        if self.kind == SUBSAMPLED_HADAMARD and self.beta != 1:
            raise DomainError("subsampled Hadamard is real (beta=1)")
        if self.kind == SUBSAMPLED_DFT and self.beta != 2:
            raise DomainError("subsampled DFT is complex (beta=2)")

    @property
    def label(self):
        field_name = "real" if self.beta == 1 else "complex"
        if self.kind == PRODUCT_OF_GAUSSIANS:
            gs = ",".join(f"{g:g}" for g in self.gammas)
            return f"{field_name} product(gamma={gs})"
        return f"{field_name} {self.kind}"


def gaussian_iid(beta=1):
    return EnsembleSpec(GAUSSIAN_IID, beta)


def column_orthonormal(beta=1):
    return EnsembleSpec(COLUMN_ORTHONORMAL, beta)


def subsampled_hadamard():
    return EnsembleSpec(SUBSAMPLED_HADAMARD, 1)


def subsampled_dft():
    return EnsembleSpec(SUBSAMPLED_DFT, 2)


def product_of_gaussians(gammas, beta=1):
    if np.isscalar(gammas):
        gammas = (gammas,)
    return EnsembleSpec(PRODUCT_OF_GAUSSIANS, beta, tuple(gammas))


@dataclass(frozen=True, eq=False)
class SpectralDensity:
    """Atomic spectral measure: sum_i w_i delta_{lambda_i} + zero_mass delta_0."""

    eigenvalues: np.ndarray
    weights: np.ndarray
    zero_mass: float = 0.0
    source: str = field(default="", compare=False)

    def __post_init__(self):
        lam = np.atleast_1d(np.asarray(self.eigenvalues, dtype=float)).copy()
        w = np.atleast_1d(np.asarray(self.weights, dtype=float)).copy()
        if lam.shape != w.shape:
            raise DomainError("eigenvalues and weights differ in length")
        if np.any(lam < 0) or np.any(~np.isfinite(lam)):
            raise DomainError("eigenvalues must be finite and nonnegative")
        if np.any(w < 0):
            raise DomainError("weights must be nonnegative")
        z = float(self.zero_mass)
        # atoms sitting at zero are folded into zero_mass
        at_zero = lam == 0
        z += float(w[at_zero].sum())
        keep = (~at_zero) & (w > 0)
        lam, w = lam[keep], w[keep]
        total = w.sum() + z
        if abs(total - 1.0) > 1e-12:
            raise DomainError(f"total mass {total!r} differs from 1")
        lam.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "zero_mass", z)

    @property
    def atoms(self):
        return list(zip(self.eigenvalues.tolist(), self.weights.tolist()))

    @property
    def lambda_min(self):
        if self.zero_mass > 0 or self.eigenvalues.size == 0:
            return 0.0
        return float(self.eigenvalues.min())

    @property
    def lambda_max(self):
        if self.eigenvalues.size == 0:
            return 0.0
        return float(self.eigenvalues.max())

    @property
    def is_point_mass(self):
        """True when the measure is a single Dirac mass (zero excluded)."""
        if self.eigenvalues.size == 0:
            return True
        if self.zero_mass > 0:
            return False
        lam = self.eigenvalues
        return bool(lam.max() - lam.min() <= 1e-12 * max(1.0, lam.max()))

    def moment(self, k):
        return moment(self, k)

    def mean(self, f):
        return linear_statistic(self, f)


def moment(nu, k):
    """k-th moment, with the convention 0**0 = 1."""
    if k < 0 or int(k) != k:
        raise DomainError("moment order must be a nonnegative integer")
    k = int(k)
    if k == 0:
        return float(nu.weights.sum() + nu.zero_mass)
    return float(np.dot(nu.weights, nu.eigenvalues ** k))


def linear_statistic(nu, f):
    """<f(lambda)>_nu = sum_i w_i f(lambda_i) + zero_mass f(0)."""
    vals = np.asarray(f(nu.eigenvalues), dtype=float)
    if vals.shape != nu.eigenvalues.shape:
        vals = np.array([float(f(x)) for x in nu.eigenvalues])
    if not np.all(np.isfinite(vals)):
        raise EvaluationError("f is not finite on every atom")
    out = float(np.dot(nu.weights, vals))
    if nu.zero_mass > 0:
        try:
            f0 = float(f(0.0))
        except ZeroDivisionError as exc:
            raise EvaluationError("f is not finite at the zero atom") from exc
        if not math.isfinite(f0):
            raise EvaluationError("f is not finite at the zero atom")
        out += nu.zero_mass * f0
    return out


def point_mass(value=1.0):
    return SpectralDensity(np.array([value]), np.array([1.0]), 0.0, "point mass")


def marchenko_pastur(alpha, nodes=256):
    """Spectrum of Phi^dagger Phi / n for m x n Gaussian Phi, m/n = alpha.

    Bulk on [(sqrt(alpha)-1)^2, (sqrt(alpha)+1)^2] with density
    sqrt((b-x)(x-a)) / (2 pi x) and an atom 1-alpha at zero when alpha < 1.
    Discretised with Gauss-Legendre in the angle x = c + h cos(theta), which
    removes the square-root edges; mass and moments 1-2 are then made exact.
    """
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    a = (math.sqrt(alpha) - 1.0) ** 2
    b = (math.sqrt(alpha) + 1.0) ** 2
    c, h = 0.5 * (a + b), 0.5 * (b - a)
    t, wt = np.polynomial.legendre.leggauss(nodes)
    theta = 0.5 * math.pi * (t + 1.0)
    x = c + h * np.cos(theta)
    dens = h * np.sin(theta) ** 2 * h / (2.0 * math.pi * x)
    w = dens * wt * 0.5 * math.pi
    zero = max(0.0, 1.0 - alpha)
    # near alpha = 1 the 1/x factor is poorly resolved; nudge the weights so
    # the bulk mass and the first two moments are exact
    basis = np.vstack([np.ones_like(x), x, x * x])
    target = np.array([1.0 - zero, alpha, alpha * alpha + alpha])
    c = np.linalg.solve((basis * w) @ basis.T, target - basis @ w)
    w = w * (1.0 + c @ basis)
    if np.any(w <= 0):
        raise EvaluationError("Marchenko-Pastur discretisation is too coarse")
    return SpectralDensity(x, w, zero, f"marchenko-pastur alpha={alpha:g}")


def analytic_zero_mass(ensemble, alpha):
    """nu({0}) from rank counting, available for every ensemble."""
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    if ensemble.kind == COLUMN_ORTHONORMAL:
        _check_orthonormal(alpha)
        return 0.0
    if ensemble.kind == PRODUCT_OF_GAUSSIANS:
        return max(0.0, 1.0 - min((alpha, 1.0) + ensemble.gammas))
    return max(0.0, 1.0 - alpha)


def analytic_moments(ensemble, alpha):
    """Closed-form (<lambda>, <lambda^2>) where the ensemble has one, else None."""
    if ensemble.kind == GAUSSIAN_IID:
        return alpha, alpha * alpha + alpha
    if ensemble.kind == COLUMN_ORTHONORMAL:
        _check_orthonormal(alpha)
        return 1.0, 1.0
    if ensemble.kind == PRODUCT_OF_GAUSSIANS:
        s = sum(1.0 / g for g in ensemble.gammas)
        return alpha, alpha * alpha * (1.0 + 1.0 / alpha + s)
    if alpha <= 1.0:
        return alpha, alpha
    return None


def _check_orthonormal(alpha):
    if alpha < 1.0:
        raise DomainError("column-orthonormal matrices need alpha >= 1")


def density_at(ensemble, alpha, nodes=256, n=None, samples=None, seed=0):
    """Asymptotic density nu of Phi^dagger Phi / n at sampling ratio alpha."""
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    if ensemble.kind == GAUSSIAN_IID:
        return marchenko_pastur(alpha, nodes)
    if ensemble.kind == COLUMN_ORTHONORMAL:
        _check_orthonormal(alpha)
        return point_mass(1.0)
    if ensemble.kind in (SUBSAMPLED_HADAMARD, SUBSAMPLED_DFT) and alpha <= 1.0:
        # rows of a unitary transform: projection of rank m
        return SpectralDensity(np.array([1.0]), np.array([alpha]), 1.0 - alpha,
                               f"{ensemble.kind} alpha={alpha:g}")
    n = n or (1024 if ensemble.kind == SUBSAMPLED_HADAMARD else EMPIRICAL_N)
    samples = samples or EMPIRICAL_SAMPLES
    return empirical_density(ensemble, float(alpha), int(n), int(samples), int(seed))


@lru_cache(maxsize=64)
def empirical_density(ensemble, alpha, n, samples, seed=0):
    """Average of sorted eigenvalues of Phi^dagger Phi / n over sampled instances."""
    from .ensembles import sample_eigenvalues

    stack = np.array([sample_eigenvalues(ensemble, n, alpha, seed + s)
                      for s in range(samples)])
    lam = np.sort(stack, axis=1).mean(axis=0)
    cut = ZERO_CUTOFF * lam.max()
    nz = lam > cut
    zero = float(np.count_nonzero(~nz)) / n
    w = np.full(np.count_nonzero(nz), (1.0 - zero) / max(1, np.count_nonzero(nz)))
    return SpectralDensity(lam[nz], w, zero,
                           f"empirical {ensemble.label} alpha={alpha:g} n={n} S={samples}")
