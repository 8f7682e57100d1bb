"""Lindbladian representations, the vectorized Liouvillian and channel metrics.

Two representations of a generator are supported:

* operator form: a Hamiltonian plus a list of Lindblad operators ``L_j``;
* overcomplete GKS form: an ``N^2 x N^2`` PSD table ``A`` indexed by
  composite pairs ``(k, l)`` (flat index ``k*N + l``) such that
  ``L(rho) = -i[H, rho] + sum A_{(k,l),(k',l')} (2 <l|rho|l'> |k><k'|
  - delta_{kk'} (|l'><l| rho + rho |l'><l|))``.

Channels are stored as unnormalized Choi matrices
``J = sum_{x,y} E(|x><y|) (x) |x><y|`` (output factor first).
"""
from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import InvariantError, ValidationError
from .linalg import (
    as_square,
    expm,
    hermitize,
    is_hermitian,
    spectral_norm,
    trace_norm,
    unvec,
    vec,
)

PSD_RTOL = 1e-9
CPTP_TOL = 1e-9


def _check_hermitian(H: np.ndarray, name: str) -> None:
    if not is_hermitian(H, 1e-12):
        raise ValidationError(f"{name} is not Hermitian")


@dataclass
class LindbladModel:
    """Hamiltonian plus Lindblad operators on an ``N``-level system."""

    dim: int
    hamiltonian: np.ndarray | None = None
    lindblad_ops: list = field(default_factory=list)

    def __post_init__(self):
        N = int(self.dim)
        if N < 1:
            raise ValidationError(f"dim must be positive, got {self.dim}")
        self.dim = N
        if self.hamiltonian is None:
            self.hamiltonian = np.zeros((N, N), dtype=complex)
        H = as_square(self.hamiltonian, "hamiltonian")
        if H.shape != (N, N):
            raise ValidationError(f"hamiltonian has shape {H.shape}, expected {(N, N)}")
        _check_hermitian(H, "hamiltonian")
        self.hamiltonian = H
        ops = []
        for j, L in enumerate(self.lindblad_ops):
            L = as_square(L, f"lindblad_ops[{j}]")
            if L.shape != (N, N):
                raise ValidationError(f"lindblad_ops[{j}] has shape {L.shape}, expected {(N, N)}")
            ops.append(L)
        self.lindblad_ops = ops

    def apply(self, rho) -> np.ndarray:
        """Element-wise action of the generator on ``rho``."""
        rho = np.asarray(rho, dtype=complex)
        H = self.hamiltonian
        out = -1j * (H @ rho - rho @ H)
        for L in self.lindblad_ops:
            LdL = L.conj().T @ L
            out += L @ rho @ L.conj().T - 0.5 * (LdL @ rho + rho @ LdL)
        return out


class OvercompleteGKS:
    """Sparse Hermitian coefficient table of the overcomplete GKS form.

    Only one triangle is stored (flat index ``p = k*N + l`` with
    ``p <= q``); the conjugate mirror is implied.  ``entry`` counts oracle
    queries in ``self.queries``.
    """

    def __init__(self, dim: int, entries=None, hamiltonian=None):
        self.dim = int(dim)
        if self.dim < 1:
            raise ValidationError(f"dim must be positive, got {dim}")
        N = self.dim
        self.entries: dict = {}
        self.queries = 0
        if hamiltonian is None:
            hamiltonian = np.zeros((N, N), dtype=complex)
        H = as_square(hamiltonian, "hamiltonian")
        if H.shape != (N, N):
            raise ValidationError(f"hamiltonian has shape {H.shape}, expected {(N, N)}")
        _check_hermitian(H, "hamiltonian")
        self.hamiltonian = H
        for key, val in (entries or {}).items():
            self.set(*key, val)

    def _flat(self, k, l):
        N = self.dim
        if not (0 <= k < N and 0 <= l < N):
            raise ValidationError(f"index ({k},{l}) out of range for dim {N}")
        return int(k) * N + int(l)

    def set(self, k, l, kp, lp, value) -> None:
        p, q = self._flat(k, l), self._flat(kp, lp)
        value = complex(value)
        if p > q:
            p, q, value = q, p, value.conjugate()
        if p == q and abs(value.imag) > 1e-12 * max(1.0, abs(value)):
            raise ValidationError(f"diagonal entry at ({k},{l}) must be real")
        if p == q:
            value = complex(value.real)
        if (p, q) in self.entries and abs(self.entries[(p, q)] - value) > 1e-12:
            raise ValidationError(f"conflicting entries for ({k},{l}),({kp},{lp})")
        if value != 0:
            self.entries[(p, q)] = value

    def entry(self, k, l, kp, lp) -> complex:
        """Oracle access to ``A_{(k,l),(k',l')}``; increments ``queries``."""
        self.queries += 1
        p, q = self._flat(k, l), self._flat(kp, lp)
        if p <= q:
            return self.entries.get((p, q), 0j)
        return self.entries.get((q, p), 0j).conjugate()

    def dense(self) -> np.ndarray:
        N2 = self.dim ** 2
        A = np.zeros((N2, N2), dtype=complex)
        for (p, q), v in self.entries.items():
            A[p, q] = v
            A[q, p] = np.conj(v)
        return A

    @classmethod
    def from_dense(cls, A, hamiltonian=None, tol: float = 0.0) -> OvercompleteGKS:
        A = as_square(A, "A")
        N = int(round(np.sqrt(A.shape[0])))
        if N * N != A.shape[0]:
            raise ValidationError(f"A has side {A.shape[0]}, not a square number")
        if not is_hermitian(A, 1e-12):
            raise ValidationError("A is not Hermitian")
        A = hermitize(A)
        g = cls(N, hamiltonian=hamiltonian)
        ps, qs = np.nonzero(np.triu(np.abs(A) > tol))
        for p, q in zip(ps, qs):
            g.entries[(int(p), int(q))] = complex(A[p, q]) if p != q else complex(A[p, q].real)
        return g

    def min_eigenvalue(self) -> float:
        A = self.dense()
        if not A.size:
            return 0.0
        return float(np.linalg.eigvalsh(A)[0])

    def is_psd(self, rtol: float = PSD_RTOL) -> bool:
        A = self.dense()
        return self.min_eigenvalue() >= -rtol * max(spectral_norm(A), 1e-300)


class Superoperator:
    """Linear map on ``N x N`` matrices acting on column-stacked vectors."""

    def __init__(self, dim: int, matrix):
        self.dim = int(dim)
        M = as_square(matrix, "superoperator")
        if M.shape[0] != self.dim ** 2:
            raise ValidationError(f"superoperator side {M.shape[0]} != dim^2 = {self.dim ** 2}")
        self.matrix = M

    def apply(self, rho) -> np.ndarray:
        return unvec(self.matrix @ vec(rho), self.dim)

    def __add__(self, other: Superoperator) -> Superoperator:
        if other.dim != self.dim:
            raise ValidationError("dimension mismatch")
        return Superoperator(self.dim, self.matrix + other.matrix)

    def __mul__(self, scalar) -> Superoperator:
        return Superoperator(self.dim, complex(scalar) * self.matrix)

    __rmul__ = __mul__

    def trace_defect(self) -> float:
        """Size of ``vec(I)^dagger S``; zero for trace-annihilating generators."""
        return float(np.max(np.abs(vec(np.eye(self.dim)).conj() @ self.matrix), initial=0.0))

    def choi_upper_norm(self) -> float:
        """Trace norm of the Choi matrix, an upper bound on the diamond norm."""
        return trace_norm(choi_from_superop_matrix(self.matrix, self.dim, self.dim))


def choi_from_superop_matrix(S, n_in: int, n_out: int) -> np.ndarray:
    S4 = np.asarray(S).reshape(n_out, n_out, n_in, n_in)  # [b, a, y, x]
    return S4.transpose(1, 3, 0, 2).reshape(n_out * n_in, n_out * n_in)


def superop_matrix_from_choi(J, n_in: int, n_out: int) -> np.ndarray:
    J4 = np.asarray(J).reshape(n_out, n_in, n_out, n_in)  # [a, x, b, y]
    return J4.transpose(2, 0, 3, 1).reshape(n_out * n_out, n_in * n_in)


class QuantumChannel:
    """Channel stored as its unnormalized Choi matrix ``J[(a,x),(b,y)] = E(|x><y|)[a,b]``."""

    def __init__(self, dim_in: int, dim_out: int, choi):
        self.dim_in = int(dim_in)
        self.dim_out = int(dim_out)
        J = as_square(choi, "choi")
        if J.shape[0] != self.dim_in * self.dim_out:
            raise ValidationError(f"choi side {J.shape[0]} != {self.dim_out}*{self.dim_in}")
        self.choi = J

    @classmethod
    def from_superoperator(cls, S, dim_in: int | None = None, dim_out: int | None = None):
        if isinstance(S, Superoperator):
            dim_in = dim_out = S.dim
            S = S.matrix
        S = np.asarray(S, dtype=complex)
        if dim_in is None:
            dim_in = int(round(np.sqrt(S.shape[1])))
        if dim_out is None:
            dim_out = int(round(np.sqrt(S.shape[0])))
        return cls(dim_in, dim_out, choi_from_superop_matrix(S, dim_in, dim_out))

    @classmethod
    def from_kraus(cls, kraus: Iterable) -> QuantumChannel:
        kraus = [np.asarray(K, dtype=complex) for K in kraus]
        if not kraus:
            raise ValidationError("need at least one Kraus operator")
        n_out, n_in = kraus[0].shape
        vs = np.array([K.reshape(-1) for K in kraus])
        return cls(n_in, n_out, vs.T @ vs.conj())

    @classmethod
    def identity(cls, dim: int) -> QuantumChannel:
        return cls.from_kraus([np.eye(dim)])

    def superoperator_matrix(self) -> np.ndarray:
        return superop_matrix_from_choi(self.choi, self.dim_in, self.dim_out)

    def apply(self, rho) -> np.ndarray:
        J4 = self.choi.reshape(self.dim_out, self.dim_in, self.dim_out, self.dim_in)
        return np.einsum("axby,xy->ab", J4, np.asarray(rho, dtype=complex))

    def then(self, other: QuantumChannel) -> QuantumChannel:
        """Channel ``other o self`` (apply self first)."""
        if other.dim_in != self.dim_out:
            raise ValidationError("dimension mismatch in composition")
        S = other.superoperator_matrix() @ self.superoperator_matrix()
        return QuantumChannel.from_superoperator(S, self.dim_in, other.dim_out)

    def power(self, n: int) -> QuantumChannel:
        if self.dim_in != self.dim_out:
            raise ValidationError("power needs a square channel")
        if n < 0:
            raise ValidationError("power needs n >= 0")
        S = np.linalg.matrix_power(self.superoperator_matrix(), int(n))
        return QuantumChannel.from_superoperator(S, self.dim_in, self.dim_out)

    def cp_violation(self) -> float:
        """``max(0, -lambda_min(J)) / ||J||``."""
        J = hermitize(self.choi)
        lam = np.linalg.eigvalsh(J)[0]
        return float(max(0.0, -lam) / max(spectral_norm(J), 1e-300))

    def tp_error(self) -> float:
        J4 = self.choi.reshape(self.dim_out, self.dim_in, self.dim_out, self.dim_in)
        T = np.einsum("axay->xy", J4)
        return float(np.max(np.abs(T - np.eye(self.dim_in))))

    def check_cptp(self, tol: float = CPTP_TOL) -> None:
        herm = float(np.max(np.abs(self.choi - self.choi.conj().T), initial=0.0))
        if herm > tol * max(1.0, spectral_norm(self.choi)):
            raise InvariantError("choi_hermitian", f"Choi matrix not Hermitian ({herm:.3e})")
        cp = self.cp_violation()
        if cp > tol:
            raise InvariantError("complete_positivity", f"Choi min eigenvalue -{cp:.3e}*||J||")
        tp = self.tp_error()
        if tp > tol:
            raise InvariantError("trace_preservation", f"partial trace deviates by {tp:.3e}")


def gks_from_lindblad_ops(model: LindbladModel) -> OvercompleteGKS:
    """``A_{(k,l),(k',l')} = 1/2 sum_j a_{j;(k,l)} a_{j;(k',l')}^*``."""
    N = model.dim
    A = np.zeros((N * N, N * N), dtype=complex)
    for L in model.lindblad_ops:
        a = L.reshape(-1)
        A += 0.5 * np.outer(a, a.conj())
    return OvercompleteGKS.from_dense(A, hamiltonian=model.hamiltonian)


def lindblad_ops_from_gks(gks: OvercompleteGKS, rtol: float = PSD_RTOL) -> LindbladModel:
    """Operator form from the spectral decomposition of ``A``."""
    N = gks.dim
    A = gks.dense()
    w, U = np.linalg.eigh(hermitize(A))
    scale = max(float(np.max(np.abs(w), initial=0.0)), 1e-300)
    if w.size and w[0] < -rtol * scale:
        raise ValidationError(f"A is not positive semidefinite (min eigenvalue {w[0]:.3e})")
    ops = []
    for lam, u in zip(w, U.T):
        if lam > rtol * scale:
            ops.append(np.sqrt(2 * lam) * u.reshape(N, N))
    return LindbladModel(N, gks.hamiltonian.copy(), ops)


def _hamiltonian_part(H: np.ndarray) -> np.ndarray:
    N = H.shape[0]
    I = np.eye(N)
    return -1j * (np.kron(I, H) - np.kron(H.T, I))


def _liouvillian_from_ops(model: LindbladModel) -> np.ndarray:
    N = model.dim
    I = np.eye(N)
    S = _hamiltonian_part(model.hamiltonian)
    for L in model.lindblad_ops:
        LdL = L.conj().T @ L
        S += np.kron(L.conj(), L) - 0.5 * np.kron(I, LdL) - 0.5 * np.kron(LdL.T, I)
    return S


def gks_superop_matrix(A, N: int) -> np.ndarray:
    """Dissipative Liouvillian of a dense GKS table (no Hamiltonian)."""
    A4 = np.asarray(A, dtype=complex).reshape(N, N, N, N)  # [k, l, k', l']
    S = 2.0 * A4.transpose(2, 0, 3, 1).reshape(N * N, N * N)
    K = np.einsum("klkm->ml", A4)  # K[l', l] = sum_k A[(k,l),(k,l')]
    I = np.eye(N)
    S -= np.kron(I, K) + np.kron(K.T, I)
    return S


def liouvillian(rep) -> Superoperator:
    """Column-stacked superoperator of a model or GKS table."""
    if isinstance(rep, LindbladModel):
        return Superoperator(rep.dim, _liouvillian_from_ops(rep))
    if isinstance(rep, OvercompleteGKS):
        N = rep.dim
        S = _hamiltonian_part(rep.hamiltonian) + gks_superop_matrix(rep.dense(), N)
        return Superoperator(N, S)
    if isinstance(rep, Superoperator):
        return rep
    raise ValidationError(f"cannot build a Liouvillian from {type(rep).__name__}")


def exact_channel(generator, t: float, check: bool = True) -> QuantumChannel:
    """The channel ``e^{t L}`` computed by a dense matrix exponential."""
    if t < 0:
        raise ValidationError(f"t must be nonnegative, got {t}")
    gen = liouvillian(generator)
    ch = QuantumChannel.from_superoperator(expm(t * gen.matrix), gen.dim, gen.dim)
    if check:
        ch.check_cptp()
    return ch


class ChoiDistance(NamedTuple):
    lower: float
    upper: float


def choi_distance(E1: QuantumChannel, E2: QuantumChannel) -> ChoiDistance:
    """Bracket ``||J1 - J2||_1 / N <= ||E1 - E2||_diamond <= ||J1 - J2||_1``."""
    if (E1.dim_in, E1.dim_out) != (E2.dim_in, E2.dim_out):
        raise ValidationError("channel dimensions differ")
    upper = trace_norm(E1.choi - E2.choi)
    return ChoiDistance(upper / E1.dim_in, upper)


def one_to_one_norm_witness(T, rho) -> float:
    """``||T(rho)||_1``, a lower bound on ``||T||_{1->1}`` for unit-trace-norm ``rho``."""
    rho = as_square(rho, "rho")
    if isinstance(T, Superoperator) or isinstance(T, QuantumChannel):
        out = T.apply(rho)
    elif isinstance(T, (LindbladModel, OvercompleteGKS)):
        out = liouvillian(T).apply(rho)
    else:
        out = T(rho)
    return trace_norm(out)


def dissipator_superop(L) -> np.ndarray:
    """Superoperator matrix of ``D[L](rho) = L rho L^dag - {L^dag L, rho}/2``."""
    L = np.asarray(L, dtype=complex)
    N = L.shape[0]
    I = np.eye(N)
    LdL = L.conj().T @ L
    return np.kron(L.conj(), L) - 0.5 * np.kron(I, LdL) - 0.5 * np.kron(LdL.T, I)


def hamiltonian_superop(H) -> np.ndarray:
    return _hamiltonian_part(np.asarray(H, dtype=complex))

