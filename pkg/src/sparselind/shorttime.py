"""First-order short-time maps for a single sparse Lindblad operator."""
from __future__ import annotations

import math

import numpy as np

from .decompose import SparseLindbladOpSpec
from .errors import ValidationError
from .linalg import expm, spectral_norm
from .lindblad import QuantumChannel, Superoperator, dissipator_superop

EPS_TOL = 1e-12


def normalize(spec: SparseLindbladOpSpec) -> tuple:
    """Rescale so ``||L||_max <= 1``; returns ``(spec', time_factor)`` with ``D[sL] = s^2 D[L]``."""
    s = spec.max_entry()
    if s <= 1:
        return spec, 1.0
    return spec.scaled(1 / s), s * s


def _check_eps(spec: SparseLindbladOpSpec, eps: float) -> None:
    if not np.isfinite(eps) or eps < 0:
        raise ValidationError(f"eps must be nonnegative, got {eps}")
    m = spec.max_entry()
    if eps * m * m > 1 + EPS_TOL:
        raise ValidationError(f"eps = {eps} exceeds 1/||L||_max^2 = {1 / (m * m):.6g}")


def first_order_superop(spec: SparseLindbladOpSpec, eps: float) -> Superoperator:
    """``1 + eps D[L]``."""
    N = spec.dim
    return Superoperator(N, np.eye(N * N) + eps * dissipator_superop(spec.matrix()))


def one_sparse_isometry(spec: SparseLindbladOpSpec, eps: float) -> np.ndarray:
    """``V|m> = sqrt(1 - eps|c_m|^2)|m>|0> + sqrt(eps) c_m |nu(m)>|1>``, rows ``(system, anc)``."""
    if spec.k != 1:
        raise ValidationError(f"one_sparse_isometry needs k = 1, got k = {spec.k}")
    _check_eps(spec, eps)
    N = spec.dim
    c = spec.coeffs[:, 0]
    nu = spec.perms[0]
    V = np.zeros((N, 2, N), dtype=complex)
    m = np.arange(N)
    V[m, 0, m] = np.sqrt(np.clip(1 - eps * np.abs(c) ** 2, 0, None))
    V[nu, 1, m] = np.sqrt(eps) * c
    return V.reshape(2 * N, N)


def short_time_map_1sparse(spec: SparseLindbladOpSpec, eps: float) -> QuantumChannel:
    V = one_sparse_isometry(spec, eps).reshape(spec.dim, 2, spec.dim)
    return QuantumChannel.from_kraus([V[:, 0, :], V[:, 1, :]])


def approximate_isometry(spec: SparseLindbladOpSpec, eps: float) -> np.ndarray:
    """``V_eps = [I - (eps/2) L^dag L ; sqrt(eps) L]`` with ancilla-major rows.

    The cross-term runs over all pairs of permutations; dropping the equal
    pairs would leave a first-order defect in ``V^dag V``.
    """
    _check_eps(spec, eps)
    L = spec.matrix()
    I = np.eye(spec.dim)
    return np.vstack([I - 0.5 * eps * (L.conj().T @ L), np.sqrt(eps) * L])


def isometry_defect(V: np.ndarray) -> float:
    return spectral_norm(V.conj().T @ V - np.eye(V.shape[1]))


def embedded_unitary(V: np.ndarray) -> np.ndarray:
    """``exp(-i H pi/2)`` for ``H = [[0, V], [V^dag, 0]]``."""
    D, N = V.shape
    H = np.zeros((D + N, D + N), dtype=complex)
    H[:D, D:] = V
    H[D:, :D] = V.conj().T
    return expm(-0.5j * np.pi * H)


def short_time_map_ksparse(spec: SparseLindbladOpSpec, eps: float) -> QuantumChannel:
    """``Tr_anc[e^{-iH pi/2}(|2><2| x rho)e^{iH pi/2}]`` with a three-level ancilla."""
    N = spec.dim
    V = approximate_isometry(spec, eps)
    W = embedded_unitary(V)[:, 2 * N:]  # input ancilla |2>
    return QuantumChannel.from_kraus([W[a * N:(a + 1) * N, :] for a in range(3)])


def short_time_map(spec: SparseLindbladOpSpec, eps: float) -> QuantumChannel:
    return short_time_map_1sparse(spec, eps) if spec.k == 1 else short_time_map_ksparse(spec, eps)


def sparse_op_evolution(spec: SparseLindbladOpSpec, t: float, n: int) -> QuantumChannel:
    """``E_{t/n}^n``, the ``n``-fold composition of the short-time map."""
    if int(n) != n or n < 1:
        raise ValidationError(f"n must be a positive integer, got {n}")
    if not np.isfinite(t) or t < 0:
        raise ValidationError(f"t must be finite and nonnegative, got {t}")
    if t == 0:
        return QuantumChannel.identity(spec.dim)
    unit, factor = normalize(spec)
    eps = factor * t / n
    if eps > 1 + EPS_TOL:
        raise ValidationError(f"per-step eps = {eps:.6g} after rescaling exceeds 1; use more steps")
    return short_time_map(unit, eps).power(int(n))


def steps_for_precision(t: float, k: int, precision: float) -> int:
    """``n = ceil(t^2 k^4 / precision)``, the step count for ``eps = precision / (t k^4)``."""
    if precision <= 0 or k < 1 or t < 0:
        raise ValidationError("need precision > 0, k >= 1 and t >= 0")
    return max(1, math.ceil(t * t * k ** 4 / precision * (1 - 1e-12)))
