"""Random-matrix substrate: GUE and Haar sampling, block-GUE assembly,
deterministic-spectrum Choi matrices and spectral utilities.

All randomness flows through :class:`Seed`. A seed names a stream by a master
integer, an experiment label, a trial index and an optional path of child
labels; the Gaussian entries of every matrix are read from the counter-based
generator in :mod:`freepos._kernels`, so a given seed reproduces identical
bytes on one platform.
"""
from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Optional, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from . import _kernels
from .errors import DomainError, NumericalFailure, ShapeMismatch
from .measures import MeasureSpec, SupportProfile, _atom_mass_at, _quantile, cdf

HERMITIAN_TOL = 1e-12
# above this size the bottom eigenvalue is first tried with Lanczos
LANCZOS_MIN_DIM = 800
LANCZOS_RESIDUAL = 1e-8


# ---------------------------------------------------------------------------
# seeds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Seed:
    """Reproducible stream label.

    Parameters
    ----------
    master : int
        64-bit master seed.
    experiment : str
        Experiment id, so different experiments never share streams.
    trial : int
        Trial index within the experiment.
    path : tuple
        Child labels appended by :meth:`child`.
    """

    master: int
    experiment: str = "default"
    trial: int = 0
    path: Tuple = field(default=())

    def __post_init__(self):
        if not (0 <= int(self.master) < 2 ** 64):
            raise DomainError("master seed must be a 64-bit unsigned integer")

    def child(self, *labels) -> "Seed":
        return Seed(self.master, self.experiment, self.trial, self.path + tuple(labels))

    def for_trial(self, trial: int) -> "Seed":
        return Seed(self.master, self.experiment, trial, self.path)

    @property
    def key(self) -> int:
        text = repr((int(self.master), self.experiment, int(self.trial), self.path))
        digest = hashlib.blake2b(text.encode(), digest_size=8).digest()
        return _kernels.mix64(int.from_bytes(digest, "little") ^ int(self.master))

    def normals(self, count: int) -> np.ndarray:
        return _kernels.gaussian_stream(self.key, count)

    def to_json(self) -> dict:
        return {"master": int(self.master), "experiment": self.experiment,
                "trial": int(self.trial), "path": list(self.path)}


def thread_count() -> int:
    """Worker count for parallel trials: ``FREEPOS_THREADS`` or the CPU count."""
    env = os.environ.get("FREEPOS_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# Hermitian containers
# ---------------------------------------------------------------------------

def _check_hermitian(m: np.ndarray, tol: float = HERMITIAN_TOL) -> np.ndarray:
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeMismatch(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NumericalFailure("matrix has non-finite entries")
    scale = max(1.0, float(np.abs(m).max(initial=0.0)))
    if np.abs(m - m.conj().T).max(initial=0.0) > tol * scale:
        raise DomainError("matrix is not Hermitian")
    return m


def hermitize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


@dataclass(frozen=True, eq=False)
class HermitianMatrix:
    """Dense complex Hermitian matrix; the array is made read-only."""

    entries: np.ndarray

    def __post_init__(self):
        m = _check_hermitian(self.entries).copy()
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True, eq=False)
class BipartiteOperator:
    """Hermitian operator on ``C^n (x) C^d`` with ``d x d`` blocks.

    Blocks are addressed with 0-based indices: ``block(i, j)`` is the sub-array
    at rows ``i*d:(i+1)*d`` and columns ``j*d:(j+1)*d``.
    """

    n: int
    d: int
    matrix: np.ndarray

    def __post_init__(self):
        m = _check_hermitian(self.matrix)
        if m.shape[0] != self.n * self.d:
            raise ShapeMismatch(f"dimension {m.shape[0]} != n*d = {self.n * self.d}")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.n * self.d

    def block(self, i: int, j: int) -> np.ndarray:
        d = self.d
        return self.matrix[i * d:(i + 1) * d, j * d:(j + 1) * d]

    def tensor(self) -> np.ndarray:
        """View as an ``(n, d, n, d)`` array."""
        return self.matrix.reshape(self.n, self.d, self.n, self.d)


# ---------------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------------

def _gue_from_normals(g: np.ndarray, d: int) -> np.ndarray:
    """Fill a GUE_d matrix from ``d*d`` standard normals."""
    out = np.zeros((d, d), dtype=np.complex128)
    out[np.diag_indices(d)] = g[:d] / math.sqrt(d)
    iu = np.triu_indices(d, 1)
    m = iu[0].size
    off = (g[d:d + m] + 1j * g[d + m:d + 2 * m]) / math.sqrt(2 * d)
    out[iu] = off
    out[(iu[1], iu[0])] = off.conj()
    return out


def gue_array(d: int, seed: Seed) -> np.ndarray:
    if d < 1:
        raise DomainError("d must be >= 1")
    return _gue_from_normals(seed.normals(d * d), d)


def sample_gue(d: int, seed: Seed) -> HermitianMatrix:
    """GUE_d: real ``N(0,1)/sqrt(d)`` diagonal, complex ``N(0,1/d)`` off-diagonal."""
    return HermitianMatrix(gue_array(d, seed))


@dataclass(frozen=True, eq=False)
class GaussianFamily:
    """I.i.d. GUE_d matrices ``X[(i, j)]`` for ``i <= j`` and ``Y[(i, j)]`` for ``i < j``.

    Indices are 0-based.
    """

    n: int
    d: int
    X: Dict[Tuple[int, int], np.ndarray]
    Y: Dict[Tuple[int, int], np.ndarray]


def sample_family(n: int, d: int, seed: Seed) -> GaussianFamily:
    X, Y = {}, {}
    for i in range(n):
        for j in range(i, n):
            X[(i, j)] = gue_array(d, seed.child("X", i, j))
            if i < j:
                Y[(i, j)] = gue_array(d, seed.child("Y", i, j))
    return GaussianFamily(n, d, X, Y)


def block_assembly(family: GaussianFamily, transpose: bool = False,
                   flip_imaginary: bool = False) -> np.ndarray:
    """Dense block-GUE matrix built from ``family``.

    Diagonal blocks are ``X_ii / sqrt(n)``; the upper block ``(i, j)`` is
    ``(X_ij + i Y_ij) / sqrt(2n)`` and the lower one its adjoint. With
    ``transpose`` every ``X``, ``Y`` is replaced by its transpose and with
    ``flip_imaginary`` the sign in front of ``i Y`` is reversed.
    """
    n, d = family.n, family.d
    out = np.zeros((n * d, n * d), dtype=np.complex128)
    sign = -1.0 if flip_imaginary else 1.0
    rn, r2n = math.sqrt(n), math.sqrt(2 * n)
    for (i, j), x in family.X.items():
        if x.shape != (d, d):
            raise ShapeMismatch(f"X[{i},{j}] has shape {x.shape}, expected {(d, d)}")
        x = x.T if transpose else x
        if i == j:
            out[i * d:(i + 1) * d, i * d:(i + 1) * d] = x / rn
            continue
        y = family.Y[(i, j)]
        if y.shape != (d, d):
            raise ShapeMismatch(f"Y[{i},{j}] has shape {y.shape}, expected {(d, d)}")
        y = y.T if transpose else y
        upper = (x + sign * 1j * y) / r2n
        out[i * d:(i + 1) * d, j * d:(j + 1) * d] = upper
        out[j * d:(j + 1) * d, i * d:(i + 1) * d] = upper.conj().T
    return out


def build_block_gue(n: int, d: int, family: GaussianFamily) -> BipartiteOperator:
    """Assemble a GUE_{nd} matrix from ``n(n+1)/2 + n(n-1)/2`` GUE_d blocks."""
    if family.n != n or family.d != d:
        raise ShapeMismatch(f"family is ({family.n}, {family.d}), expected ({n}, {d})")
    return BipartiteOperator(n, d, block_assembly(family))


def _ginibre(rows: int, cols: int, seed: Seed) -> np.ndarray:
    g = seed.normals(2 * rows * cols)
    return (g[0::2] + 1j * g[1::2]).reshape(rows, cols) / math.sqrt(2.0)


def haar_isometry(m: int, r: int, seed: Seed) -> np.ndarray:
    """First ``r`` columns of a Haar unitary on ``C^m`` (an ``m x r`` isometry)."""
    if not (1 <= r <= m):
        raise DomainError(f"need 1 <= r <= m, got r={r}, m={m}")
    q, rr = np.linalg.qr(_ginibre(m, r, seed))
    diag = np.diag(rr)
    phase = np.where(diag == 0, 1.0, diag / np.abs(diag))
    return q * phase[None, :]


def sample_haar_unitary(m: int, seed: Seed) -> np.ndarray:
    """Haar unitary from the QR decomposition of a Ginibre matrix with phase fix."""
    if m < 1:
        raise DomainError("m must be >= 1")
    return haar_isometry(m, m, seed)


def deterministic_diagonal(spec: MeasureSpec, m: int) -> np.ndarray:
    """Sorted quantiles ``F^{-1}((i - 1/2) / m)``, ``i = 1..m``."""
    if m < 1:
        raise DomainError("m must be >= 1")
    p = (np.arange(1, m + 1) - 0.5) / m
    return np.sort(np.asarray(_quantile(spec, p, False), dtype=np.float64))


def sample_choi_map(spec: MeasureSpec, n: int, d: int, seed: Seed) -> BipartiteOperator:
    """``C = U D U*`` with ``U`` Haar on ``C^{nd}`` and ``D`` the quantile diagonal."""
    if n < 1 or d < 1:
        raise DomainError("n and d must be >= 1")
    diag = deterministic_diagonal(spec, n * d)
    u = sample_haar_unitary(n * d, seed)
    return BipartiteOperator(n, d, hermitize((u * diag[None, :]) @ u.conj().T))


# ---------------------------------------------------------------------------
# block operations
# ---------------------------------------------------------------------------

def apply_choi_map(C: BipartiteOperator, rho) -> np.ndarray:
    """``sum_ij rho_ij C(i, j)``, the image of ``rho`` under the map with Choi matrix ``C``."""
    rho = rho.entries if isinstance(rho, HermitianMatrix) else np.asarray(rho)
    if rho.shape != (C.n, C.n):
        raise ShapeMismatch(f"input is {rho.shape}, map expects ({C.n}, {C.n})")
    return np.einsum("ij,iajb->ab", rho, C.tensor())


def apply_choi_map_ampliated(C: BipartiteOperator, rho: np.ndarray, m: int) -> np.ndarray:
    """``[Phi (x) id_m](rho)`` for ``rho`` on ``C^n (x) C^m``, returned on ``C^d (x) C^m``."""
    n, d = C.n, C.d
    rho = np.asarray(rho)
    if rho.shape != (n * m, n * m):
        raise ShapeMismatch(f"state is {rho.shape}, expected ({n * m}, {n * m})")
    r = rho.reshape(n, m, n, m)
    out = np.einsum("iajb,ixjy->axby", C.tensor(), r)
    return out.reshape(d * m, d * m)


def partial_transpose(Z: BipartiteOperator) -> BipartiteOperator:
    """Transpose on the ``C^n`` factor: block ``(i, j)`` goes to ``(j, i)``."""
    t = Z.tensor().transpose(2, 1, 0, 3).reshape(Z.dim, Z.dim)
    return BipartiteOperator(Z.n, Z.d, t)


# ---------------------------------------------------------------------------
# spectra
# ---------------------------------------------------------------------------

def _entries(M) -> np.ndarray:
    if isinstance(M, BipartiteOperator):
        return M.matrix
    if isinstance(M, HermitianMatrix):
        return M.entries
    return np.asarray(M)


def spectrum(M) -> np.ndarray:
    """All eigenvalues in ascending order (dense LAPACK solver)."""
    a = _entries(M)
    try:
        w = np.linalg.eigvalsh(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigensolver failed: {exc}") from exc
    if not np.all(np.isfinite(w)):
        raise NumericalFailure("eigensolver returned non-finite values")
    return w


def min_eigenvalue(M) -> float:
    """Smallest eigenvalue.

    Large inputs try Lanczos first and accept the result only when its residual
    is below ``LANCZOS_RESIDUAL`` times the matrix scale; otherwise, and for
    small inputs, a dense solve is used.
    """
    a = _entries(M)
    m = a.shape[0]
    if m >= LANCZOS_MIN_DIM:
        try:
            v0 = np.ones(m, dtype=a.dtype) / math.sqrt(m)
            w, v = scipy.sparse.linalg.eigsh(a, k=1, which="SA", tol=1e-12, v0=v0)
            scale = max(1.0, float(np.abs(w[0])), float(np.linalg.norm(a @ v0)))
            if np.linalg.norm(a @ v[:, 0] - w[0] * v[:, 0]) <= LANCZOS_RESIDUAL * scale:
                return float(w[0])
        except (scipy.sparse.linalg.ArpackNoConvergence, scipy.sparse.linalg.ArpackError):
            pass
    try:
        w = scipy.linalg.eigh(a, eigvals_only=True, subset_by_index=[0, 0])
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
        w = spectrum(a)
    return float(w[0])


def bottom_eigenpair(a: np.ndarray, v0: Optional[np.ndarray] = None) -> Tuple[float, np.ndarray]:
    """Smallest eigenvalue and a unit eigenvector of a dense Hermitian array.

    With a starting vector ``v0`` Lanczos is tried first and accepted only when
    its residual is small; the dense solver is the fallback.
    """
    m = a.shape[0]
    if v0 is not None and m > 64:
        try:
            w, v = scipy.sparse.linalg.eigsh(a, k=1, which="SA", v0=v0, tol=1e-12)
            x = v[:, 0]
            scale = max(1.0, float(np.abs(w[0])))
            if np.linalg.norm(a @ x - w[0] * x) <= LANCZOS_RESIDUAL * scale:
                return float(w[0]), x
        except (scipy.sparse.linalg.ArpackNoConvergence, scipy.sparse.linalg.ArpackError):
            pass
    try:
        w, v = scipy.linalg.eigh(a, subset_by_index=[0, 0])
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise NumericalFailure(f"eigensolver failed: {exc}") from exc
    return float(w[0]), v[:, 0]


def histogram(eigenvalues, bins: int = 50, range_: Optional[Tuple[float, float]] = None):
    """Density-normalized histogram; returns ``(edges, densities)``."""
    dens, edges = np.histogram(eigenvalues, bins=bins, range=range_, density=True)
    return edges, dens


def kolmogorov_distance(samples, spec: MeasureSpec) -> float:
    """``sup_x |F_emp(x) - F(x)|`` between a sample and a measure.

    The supremum is taken over both one-sided limits at every distinct sample
    value, so atoms of either distribution are handled exactly.
    """
    x = np.sort(np.asarray(samples, dtype=np.float64))
    m = x.size
    u, counts = np.unique(x, return_counts=True)
    emp_right = np.cumsum(counts) / m
    emp_left = emp_right - counts / m
    f_right = np.asarray(cdf(spec, u), dtype=np.float64)
    f_left = f_right - np.asarray(_atom_mass_at(spec, u), dtype=np.float64)
    return float(max(np.abs(emp_right - f_right).max(), np.abs(emp_left - f_left).max()))


# ---------------------------------------------------------------------------
# Monte Carlo oracle for free convolution powers
# ---------------------------------------------------------------------------

def free_power_oracle(spec: MeasureSpec, n: int, k: int, m: int, trials: int,
                      seed: Seed) -> SupportProfile:
    """Brute-force support of ``spec^{boxplus n/k}`` from random compressions.

    Each trial takes the ``(mk/n)``-corner of ``U D U*`` with ``D`` the
    quantile diagonal of size ``m``, multiplies its eigenvalues by ``n/k`` and
    the reported endpoints are the extremes over all trials.
    """
    if not (1 <= k <= n):
        raise DomainError(f"need 1 <= k <= n, got n={n}, k={k}")
    if m % n:
        raise DomainError(f"m={m} must be divisible by n={n}")
    if trials < 1:
        raise DomainError("trials must be >= 1")
    r = m * k // n
    diag = deterministic_diagonal(spec, m)
    lo, hi = math.inf, -math.inf
    for t in range(trials):
        v = haar_isometry(m, r, seed.child("oracle", t))
        corner = hermitize((v.conj().T * diag[None, :]) @ v)
        w = spectrum(corner) * (n / k)
        lo, hi = min(lo, float(w[0])), max(hi, float(w[-1]))
    return SupportProfile(lo, hi, (), "monte_carlo")


def rational_power(T: float, max_den: int = 64) -> Tuple[int, int]:
    """Write ``T`` as ``n / k`` with a small denominator."""
    frac = Fraction(T).limit_denominator(max_den)
    if abs(float(frac) - T) > 1e-12:
        raise DomainError(f"T={T} is not a ratio n/k with k <= {max_den}")
    return frac.numerator, frac.denominator
