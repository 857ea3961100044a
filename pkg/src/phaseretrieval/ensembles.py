"""Finite-size sensing matrices for every supported ensemble.

Normalisations follow the asymptotic conventions used by ``spectra``:
Gaussian entries are N_beta(0, 1), so <lambda> = alpha for i.i.d. and
product ensembles, while column-orthonormal matrices have
Phi^dagger Phi / n = identity.
"""

from dataclasses import dataclass
from functools import cached_property
import math
import struct

import numpy as np
import scipy.linalg

from .errors import DomainError
from . import spectra
from .spectra import (COLUMN_ORTHONORMAL, GAUSSIAN_IID, PRODUCT_OF_GAUSSIANS,
                      SUBSAMPLED_DFT, SUBSAMPLED_HADAMARD, SpectralDensity)

DUMP_MAGIC = b"PRPHI001"
_HEADER = struct.Struct("<8sqqq")


def rng_for(seed, stream=0):
    """Counter-based generator (Philox) keyed by the seed and a stream id."""
    return np.random.Generator(np.random.Philox(key=[int(seed), int(stream)]))


def gaussian(rng, shape, beta):
    """i.i.d. N_beta(0, 1) entries: E|z|^2 = 1 in both fields."""
    if beta == 1:
        return rng.standard_normal(shape)
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) / math.sqrt(2.0)


def rows_for(n, alpha):
    m = int(round(alpha * n))
    if m < 1:
        raise DomainError(f"alpha*n = {alpha * n:g} gives no measurements")
    return m


def _next_pow2(k):
    return 1 << (int(k) - 1).bit_length()


def _unitary_rows(ensemble, n, m, rng):
    big = n if m <= n else _next_pow2(m)
    rows = np.sort(rng.choice(big, size=m, replace=False))
    if ensemble.kind == SUBSAMPLED_HADAMARD:
        if n & (n - 1):
            raise DomainError("subsampled Hadamard needs n to be a power of two")
        base = scipy.linalg.hadamard(big, dtype=float)[rows, :n] / math.sqrt(big)
    else:
        base = np.exp(-2j * np.pi * np.outer(rows, np.arange(n)) / big) / math.sqrt(big)
    return math.sqrt(n) * base


def _product_dims(ensemble, n, m):
    inner = [max(1, int(round(g * n))) for g in ensemble.gammas]
    return [m] + inner + [n]


def _product(ensemble, n, m, rng):
    dims = _product_dims(ensemble, n, m)
    phi = gaussian(rng, (dims[0], dims[1]), ensemble.beta)
    for a, b in zip(dims[1:-1], dims[2:]):
        phi = phi @ gaussian(rng, (a, b), ensemble.beta) / math.sqrt(a)
    return phi


def _column_orthonormal(n, m, beta, rng):
    if m < n:
        raise DomainError("column-orthonormal matrices need m >= n")
    q, r = np.linalg.qr(gaussian(rng, (m, n), beta))
    d = np.diagonal(r)
    phase = d / np.abs(d)
    return math.sqrt(n) * q * phase[None, :]


def sample_matrix(ensemble, n, alpha, seed):
    m = rows_for(n, alpha)
    rng = rng_for(seed)
    if ensemble.kind == GAUSSIAN_IID:
        return gaussian(rng, (m, n), ensemble.beta)
    if ensemble.kind == COLUMN_ORTHONORMAL:
        return _column_orthonormal(n, m, ensemble.beta, rng)
    if ensemble.kind in (SUBSAMPLED_HADAMARD, SUBSAMPLED_DFT):
        return _unitary_rows(ensemble, n, m, rng)
    if ensemble.kind == PRODUCT_OF_GAUSSIANS:
        return _product(ensemble, n, m, rng)
    raise DomainError(f"cannot sample {ensemble.kind}")


class MatrixInstance:
    """A sampled m x n sensing matrix with a lazily computed, cached SVD."""

    def __init__(self, phi, ensemble, n, seed, alpha=None):
        phi = np.array(phi)
        phi.setflags(write=False)
        self.phi = phi
        self.ensemble = ensemble
        self.n = int(n)
        self.m = phi.shape[0]
        self.seed = seed
        self.alpha = alpha if alpha is not None else self.m / self.n

    @property
    def beta(self):
        return self.ensemble.beta

    @property
    def meta(self):
        return {"ensemble": self.ensemble.label, "n": self.n, "m": self.m,
                "seed": self.seed}

    @cached_property
    def svd(self):
        """(U, s, Vh) of phi with U: m x r, s: r, Vh: r x n, r = min(m, n)."""
        phi, n, m = self.phi, self.n, self.m
        kind = self.ensemble.kind
        full_transform = m > n and m == _next_pow2(m)
        if kind == COLUMN_ORTHONORMAL or (
                kind in (SUBSAMPLED_HADAMARD, SUBSAMPLED_DFT) and full_transform):
            # phi / sqrt(n) already has orthonormal columns
            return (phi / math.sqrt(n), np.full(n, math.sqrt(n)),
                    np.eye(n, dtype=phi.dtype))
        if kind in (SUBSAMPLED_HADAMARD, SUBSAMPLED_DFT) and m <= n:
            # orthonormal rows
            return (np.eye(m, dtype=phi.dtype), np.full(m, math.sqrt(n)),
                    phi / math.sqrt(n))
        u, s, vh = np.linalg.svd(phi, full_matrices=False)
        return u, s, vh

    def eigenvalues(self):
        """All n eigenvalues of Phi^dagger Phi / n (zeros included)."""
        s = self.svd[1]
        lam = np.zeros(self.n)
        lam[:s.size] = s ** 2 / self.n
        return np.sort(lam)


def sample(ensemble, n, alpha, seed):
    """Deterministic instance of the ensemble with m = round(alpha n) rows."""
    if n < 1:
        raise DomainError("n must be positive")
    phi = sample_matrix(ensemble, int(n), float(alpha), seed)
    return MatrixInstance(phi, ensemble, n, seed, float(alpha))


def sample_eigenvalues(ensemble, n, alpha, seed):
    """Eigenvalues of Phi^dagger Phi / n through the smaller Gram matrix."""
    phi = sample_matrix(ensemble, n, alpha, seed)
    m = phi.shape[0]
    g = phi @ phi.conj().T if m < n else phi.conj().T @ phi
    ev = np.clip(np.linalg.eigvalsh(g), 0.0, None) / n
    lam = np.zeros(n)
    lam[n - ev.size:] = ev
    return np.sort(lam)


def empirical_spectrum(instance, cutoff=spectra.ZERO_CUTOFF):
    """Atoms s_i^2 / n with uniform weights; tiny or missing modes go to zero_mass."""
    lam = instance.eigenvalues()
    top = lam.max() if lam.size else 0.0
    nz = lam > cutoff * top
    count = int(np.count_nonzero(nz))
    zero = 1.0 - count / instance.n
    w = np.full(count, 1.0 / instance.n)
    return SpectralDensity(lam[nz], w, zero, f"empirical {instance.ensemble.label}")


def dump_matrix(instance, path):
    """Little-endian row-major float64 dump with a 32-byte header."""
    phi = np.ascontiguousarray(instance.phi)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(DUMP_MAGIC, instance.beta, instance.m, instance.n))
        if instance.beta == 2:
            data = np.empty(phi.shape + (2,), dtype="<f8")
            data[..., 0] = phi.real
            data[..., 1] = phi.imag
        else:
            data = np.asarray(phi.real, dtype="<f8")
        fh.write(data.tobytes(order="C"))


def load_matrix(path, ensemble=None, seed=None):
    with open(path, "rb") as fh:
        magic, beta, m, n = _HEADER.unpack(fh.read(_HEADER.size))
        if magic != DUMP_MAGIC:
            raise DomainError(f"{path}: not a matrix dump")
        raw = np.frombuffer(fh.read(), dtype="<f8")
    if beta == 2:
        raw = raw.reshape(m, n, 2)
        phi = raw[..., 0] + 1j * raw[..., 1]
    else:
        phi = raw.reshape(m, n).copy()
    if ensemble is None:
        ensemble = spectra.EnsembleSpec(GAUSSIAN_IID, int(beta))
    return MatrixInstance(phi, ensemble, n, seed)
