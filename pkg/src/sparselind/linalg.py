"""Dense complex linear algebra primitives.

Thin, validated wrappers over numpy/scipy.  Everything here is a pure
function of its inputs.

Vectorization convention used throughout the package is column stacking:
``vec(|k><l|)`` has basis index ``l*N + k``, i.e. ``vec(X) = X.reshape(-1, order="F")``.
With it, ``vec(A X B) = (B^T kron A) vec(X)``.
"""
from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ValidationError

HERMITIAN_RTOL = 1e-12


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    """Return ``M`` as a finite complex 2-d array."""
    A = np.asarray(M, dtype=complex)
    if A.ndim != 2:
        raise ValidationError(f"{name} must be 2-dimensional, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValidationError(f"{name} has non-finite entries")
    return A


def as_square(M, name: str = "matrix") -> np.ndarray:
    A = as_matrix(M, name)
    if A.shape[0] != A.shape[1]:
        raise ValidationError(f"{name} must be square, got shape {A.shape}")
    return A


def spectral_norm(M) -> float:
    A = np.asarray(M)
    if A.size == 0:
        return 0.0
    return float(np.linalg.norm(A, 2))


def is_hermitian(M, rtol: float = HERMITIAN_RTOL) -> bool:
    A = np.asarray(M)
    scale = max(spectral_norm(A), 1.0)
    return bool(np.max(np.abs(A - A.conj().T), initial=0.0) <= rtol * scale)


def hermitize(M) -> np.ndarray:
    A = np.asarray(M, dtype=complex)
    return 0.5 * (A + A.conj().T)


@dataclass(frozen=True)
class HermitianSpectrum:
    """Ascending eigenvalues with unitary eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        U = self.eigenvectors
        return (U * self.eigenvalues) @ U.conj().T


def hermitian_eig(M, rtol: float = HERMITIAN_RTOL) -> HermitianSpectrum:
    """Eigendecomposition of a Hermitian matrix.

    The input is symmetrized before decomposition; inputs further than
    ``rtol * ||M||`` from Hermitian are rejected.
    """
    A = as_square(M)
    if not is_hermitian(A, rtol):
        raise ValidationError("matrix is not Hermitian within tolerance")
    w, U = np.linalg.eigh(hermitize(A))
    return HermitianSpectrum(w, U)


def expm(M) -> np.ndarray:
    """Matrix exponential (Pade scaling and squaring)."""
    A = as_square(M)
    return scipy.linalg.expm(A)


def singular_values(M) -> np.ndarray:
    return np.linalg.svd(as_matrix(M), compute_uv=False)


def trace_norm(M) -> float:
    """Sum of singular values."""
    A = as_square(M)
    if A.size == 0:
        return 0.0
    return float(np.sum(np.linalg.svd(A, compute_uv=False)))


def partial_trace(M, dims: Sequence[int], keep: int | str = 0) -> np.ndarray:
    """Partial trace of an operator on ``C^dA (x) C^dB``.

    ``keep`` selects the surviving factor: 0 or "A" keeps the first,
    1 or "B" keeps the second.
    """
    A = as_square(M)
    dA, dB = (int(d) for d in dims)
    if A.shape[0] != dA * dB:
        raise ValidationError(f"side {A.shape[0]} does not match dims {dA}x{dB}")
    T = A.reshape(dA, dB, dA, dB)
    if keep in (0, "A"):
        return np.einsum("ajbj->ab", T)
    if keep in (1, "B"):
        return np.einsum("iaib->ab", T)
    raise ValidationError(f"keep must select subsystem 0/'A' or 1/'B', got {keep!r}")


def kron(*mats) -> np.ndarray:
    """Kronecker product of one or more matrices."""
    if not mats:
        raise ValidationError("kron needs at least one factor")
    out = np.asarray(mats[0], dtype=complex)
    for B in mats[1:]:
        out = np.kron(out, np.asarray(B, dtype=complex))
    return out


def vec(X) -> np.ndarray:
    return np.asarray(X, dtype=complex).reshape(-1, order="F")


def unvec(v, n: int | None = None) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    if n is None:
        n = int(round(np.sqrt(v.size)))
    if n * n != v.size:
        raise ValidationError(f"vector of length {v.size} is not a vectorized {n}x{n} matrix")
    return v.reshape(n, n, order="F")


def basis_ket(n: int, i: int) -> np.ndarray:
    e = np.zeros(n, dtype=complex)
    e[i] = 1.0
    return e


def householder_completion(target) -> np.ndarray:
    """Unitary whose first column is the unit vector ``target``.

    A Householder reflection maps ``|0>`` onto ``target`` up to a phase; the
    phase is then absorbed so that ``U|0> = target`` exactly.
    """
    psi = np.asarray(target, dtype=complex).ravel()
    n = psi.size
    nrm = np.linalg.norm(psi)
    if abs(nrm - 1.0) > 1e-9:
        raise ValidationError(f"target must be a unit vector, norm {nrm}")
    psi = psi / nrm
    phase = psi[0] / abs(psi[0]) if abs(psi[0]) > 1e-300 else 1.0
    # reflect e0 onto phase^* psi, which has a real nonnegative first entry
    w = np.conj(phase) * psi
    u = w.copy()
    u[0] -= 1.0
    un = np.linalg.norm(u)
    if un < 1e-14:
        H = np.eye(n, dtype=complex)
    else:
        u /= un
        H = np.eye(n, dtype=complex) - 2.0 * np.outer(u, u.conj())
    # H e0 = w; multiply column 0 by phase so U e0 = psi
    U = H.copy()
    U[:, 0] *= phase
    return U
