"""Closed-form channels for structured Lindbladian classes.

Each exact construction builds ancilla states, assembles the sparse
Stinespring isometry, and returns ``Tr_anc[V rho V^dag]``.  Generators are
exposed through ``gks()`` so the result can be compared with ``exact_channel``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .decompose import max_degree, strongly_one_sparse_parts
from .errors import InvariantError, ValidationError
from .linalg import householder_completion
from .lindblad import OvercompleteGKS, QuantumChannel
from .product import strang_product
from .stinespring import (
    AncillaFamily,
    SparseStinespringIsometry,
    SparsityPattern,
    channel_from_isometry,
    identity_pattern,
    isometry_from_ancilla,
)

SPEC_TOL = 1e-12
ISO_TOL = 1e-9


def _real_vector(v, n: int, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=float).reshape(-1)
    if arr.shape != (n,):
        raise ValidationError(f"{name} must have length {n}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} has non-finite entries")
    return arr


def _involution(nu, n: int, fixed_points: bool = True) -> tuple:
    nu = tuple(int(v) for v in np.asarray(nu).reshape(-1))
    if len(nu) != n or sorted(nu) != list(range(n)):
        raise ValidationError("nu must be a permutation of range(dim)")
    for x in range(n):
        if nu[nu[x]] != x:
            raise ValidationError(f"nu is not an involution at {x}")
        if not fixed_points and nu[x] == x:
            raise ValidationError(f"nu has a fixed point at {x}")
    return nu


def _sqrt_nonneg(v: float, name: str, tol: float = 1e-12) -> float:
    if v < -tol:
        raise InvariantError("ancilla_feasibility", f"{name} = {v:.3e} is negative")
    return float(np.sqrt(max(v, 0.0)))


def _finish(pattern: SparsityPattern, phi: np.ndarray) -> SparseStinespringIsometry:
    return isometry_from_ancilla(pattern, AncillaFamily(pattern, phi), tol=ISO_TOL)


# ---------------------------------------------------------------- identical-coordinate


@dataclass
class IdenticalCoordinateSpec:
    """``A_{(i,i),(i,i)} = a_i`` and ``A_{(i,i),(j,j)} = c_i + c_j`` for ``i != j``."""

    dim: int
    a: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        self.a = _real_vector(self.a, self.dim, "a")
        self.c = _real_vector(self.c, self.dim, "c")
        if np.any(self.a < 0):
            raise ValidationError("a must be nonnegative")
        lhs = np.abs(self.c[:, None] + self.c[None, :])
        rhs = np.sqrt(np.outer(self.a, self.a))
        bad = np.argwhere(lhs > rhs + SPEC_TOL * max(1.0, rhs.max(initial=0.0)))
        if bad.size:
            i, j = bad[0]
            raise ValidationError(f"|c_{i} + c_{j}| exceeds sqrt(a_{i} a_{j})")

    def gks(self) -> OvercompleteGKS:
        N = self.dim
        g = OvercompleteGKS(N)
        for i in range(N):
            g.set(i, i, i, i, self.a[i])
            for j in range(i + 1, N):
                g.set(i, i, j, j, self.c[i] + self.c[j])
        return g

    def psd_diagnostic(self) -> float:
        """Smallest eigenvalue of the GKS table; the channel only needs ``a_x >= 2 c_x``."""
        return self.gks().min_eigenvalue()


def identical_coordinate_isometry(spec: IdenticalCoordinateSpec, t: float) -> SparseStinespringIsometry:
    _check_time(t)
    N = spec.dim
    b = np.exp(-(spec.a - 2 * spec.c) * t)
    phi = np.zeros((1, N, N + 1), dtype=complex)
    phi[0, :, 0] = b
    phi[0, np.arange(N), np.arange(N) + 1] = np.sqrt(np.clip(1 - b ** 2, 0, None))
    return _finish(identity_pattern(N), phi)


def identical_coordinate_channel(spec: IdenticalCoordinateSpec, t: float) -> QuantumChannel:
    return channel_from_isometry(identical_coordinate_isometry(spec, t))


# ---------------------------------------------------------------- diagonal rate matrices


@dataclass
class DiagonalSpec:
    """Diagonal GKS table ``A_{(k,l),(k,l)} = a[k, l]`` with ``d``-sparse ``a``."""

    dim: int
    a: np.ndarray
    d: int | None = None

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        if a.shape != (self.dim, self.dim):
            raise ValidationError(f"a must have shape {(self.dim, self.dim)}")
        if np.any(a < 0) or not np.all(np.isfinite(a)):
            raise ValidationError("rates a[k, l] must be finite and nonnegative")
        self.a = a
        deg = max_degree(a != 0)
        if self.d is None:
            self.d = max(1, deg)
        if deg > self.d:
            raise ValidationError(f"a has a row or column with {deg} nonzeros, more than d = {self.d}")

    def gks(self) -> OvercompleteGKS:
        return _diagonal_gks(self.a)


def _diagonal_gks(a: np.ndarray) -> OvercompleteGKS:
    N = a.shape[0]
    g = OvercompleteGKS(N)
    for k, l in zip(*np.nonzero(a)):
        g.set(k, l, k, l, a[k, l])
    return g


@dataclass
class Strongly1SparseSpec:
    """Rates ``off[x] = a_{nu(x), x}`` and ``diag[x] = a_{x,x}`` for an involution ``nu``."""

    dim: int
    nu: tuple
    off: np.ndarray
    diag: np.ndarray

    def __post_init__(self):
        self.nu = _involution(self.nu, self.dim)
        self.off = _real_vector(self.off, self.dim, "off")
        self.diag = _real_vector(self.diag, self.dim, "diag")
        if np.any(self.off < 0) or np.any(self.diag < 0):
            raise ValidationError("rates must be nonnegative")
        for x in range(self.dim):
            if self.nu[x] == x and self.off[x] != 0:
                raise ValidationError(f"fixed point {x} must carry its rate in diag, not off")

    def rate_matrix(self) -> np.ndarray:
        a = np.diag(self.diag).astype(float)
        for x in range(self.dim):
            if self.nu[x] != x:
                a[self.nu[x], x] = self.off[x]
        return a

    def gks(self) -> OvercompleteGKS:
        return _diagonal_gks(self.rate_matrix())


def strongly_1sparse_isometry(spec: Strongly1SparseSpec, t: float) -> SparseStinespringIsometry:
    """Ancilla layout: ``|0>`` shared, ``|1+x>`` stay-branch, ``|1+N+x>`` transfer-branch."""
    _check_time(t)
    N = spec.dim
    pattern = SparsityPattern(N, spec.nu)
    d = pattern.d
    phi = np.zeros((d, N, 2 * N + 1), dtype=complex)
    for x in range(N):
        y = spec.nu[x]
        b = np.exp(-(spec.off[x] + spec.diag[x]) * t)
        s = spec.off[x] + spec.off[y] if y != x else 0.0
        if s > 0:
            decay = np.exp(-2 * s * t)
            stay = spec.off[y] / s + spec.off[x] / s * decay
            moved = spec.off[x] / s * (1 - decay)
        else:
            stay, moved = 1.0, 0.0
        phi[0, x, 0] = b
        phi[0, x, 1 + x] = _sqrt_nonneg(stay - b ** 2, f"c_{x}^2")
        if y != x:
            phi[1, x, 1 + N + x] = np.sqrt(moved)
    return _finish(pattern, phi)


def strongly_1sparse_channel(spec: Strongly1SparseSpec, t: float) -> QuantumChannel:
    return channel_from_isometry(strongly_1sparse_isometry(spec, t))


def decompose_d_sparse(spec: DiagonalSpec) -> list:
    """Split into at most ``3 d^2`` strongly 1-sparse pieces plus one diagonal piece."""
    N = spec.dim
    pieces = []
    diag = np.diag(spec.a).copy()
    if np.any(diag != 0):
        pieces.append(Strongly1SparseSpec(N, tuple(range(N)), np.zeros(N), diag))
    for mask in strongly_one_sparse_parts(spec.a, spec.d):
        nu = list(range(N))
        off = np.zeros(N)
        for k, l in zip(*np.nonzero(mask)):
            nu[k], nu[l] = l, k
            off[l] = spec.a[k, l]
        pieces.append(Strongly1SparseSpec(N, tuple(nu), off, np.zeros(N)))
    return pieces


def d_sparse_diagonal_channel(spec: DiagonalSpec, t: float, r: int) -> QuantumChannel:
    """Strang composition of the exact strongly 1-sparse piece channels."""
    pieces = decompose_d_sparse(spec)
    if not pieces:
        return QuantumChannel.identity(spec.dim)
    factories = [lambda tau, p=p: strongly_1sparse_channel(p, tau) for p in pieces]
    return strang_product(factories, t, r)


# ---------------------------------------------------------------- dense-diagonal


@dataclass
class DenseDiagonalSpec:
    """``a_{k,l} = a_k`` independent of ``l``; partial sums through ``partial_sum``."""

    dim: int
    a: np.ndarray
    prefix: np.ndarray | None = None

    def __post_init__(self):
        self.a = _real_vector(self.a, self.dim, "a")
        if np.any(self.a < 0):
            raise ValidationError("a must be nonnegative")
        computed = np.concatenate([[0.0], np.cumsum(self.a)])
        if self.prefix is None:
            self.prefix = computed
        else:
            self.prefix = _real_vector(self.prefix, self.dim + 1, "prefix")
            if np.max(np.abs(self.prefix - computed)) > 1e-12 * max(1.0, computed[-1]):
                raise ValidationError("prefix sums are inconsistent with a")

    def partial_sum(self, k1: int, k2: int) -> float:
        """``sum_{k=k1}^{k2} a_k`` for ``k1 <= k2``."""
        if not 0 <= k1 <= k2 < self.dim:
            raise ValidationError(f"need 0 <= k1 <= k2 < {self.dim}")
        return float(self.prefix[k2 + 1] - self.prefix[k1])

    @property
    def total(self) -> float:
        return self.partial_sum(0, self.dim - 1)

    def gks(self) -> OvercompleteGKS:
        return _diagonal_gks(np.repeat(self.a[:, None], self.dim, axis=1))


@dataclass
class DenseIsometry:
    """Isometry with rows ordered ``(system, ancilla)``."""

    dim: int
    anc_dim: int
    matrix: np.ndarray = field(repr=False)

    def isometry_error(self) -> float:
        V = self.matrix
        return float(np.max(np.abs(V.conj().T @ V - np.eye(V.shape[1])), initial=0.0))

    def channel(self) -> QuantumChannel:
        return channel_from_isometry(self.matrix)


def dense_diagonal_isometry(spec: DenseDiagonalSpec, t: float) -> DenseIsometry:
    """``V|m> = e^{-St}|m>|0>|0> + sum_k sqrt((1-e^{-2St}) a_k/S) |k>|k>|m+1>``."""
    _check_time(t)
    N, S = spec.dim, spec.total
    V = np.zeros((N, N, N + 1, N), dtype=complex)  # [sys, anc2, anc3, m]
    w = _dense_weights(spec, t)
    for m in range(N):
        V[m, 0, 0, m] = np.exp(-S * t)
        for k in range(N):
            V[k, k, m + 1, m] += w[k]
    iso = DenseIsometry(N, N * (N + 1), V.reshape(N * N * (N + 1), N))
    if iso.isometry_error() > ISO_TOL:
        raise InvariantError("isometry", f"dense-diagonal isometry defect {iso.isometry_error():.3e}")
    return iso


def _dense_weights(spec: DenseDiagonalSpec, t: float) -> np.ndarray:
    S = spec.total
    if S == 0:
        return np.zeros(spec.dim)
    return np.sqrt((1 - np.exp(-2 * S * t)) * spec.a / S)


def dense_diagonal_channel(spec: DenseDiagonalSpec, t: float) -> QuantumChannel:
    return dense_diagonal_isometry(spec, t).channel()


def _controlled_on_zero(U_rest: np.ndarray, dims: tuple) -> np.ndarray:
    """Apply ``U_rest`` to the non-flag registers when the last (qubit) register is 0."""
    D = int(np.prod(dims[:-1]))
    P0, P1 = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])
    return np.kron(U_rest, P0) + np.kron(np.eye(D), P1)


def _permutation_matrix(images: dict, D: int) -> np.ndarray:
    P = np.zeros((D, D))
    for src in range(D):
        P[images.get(src, src), src] = 1
    return P


def dense_diagonal_gates(spec: DenseDiagonalSpec, t: float) -> dict:
    """Unitaries on ``sys (N) x anc2 (N) x anc3 (N+1) x flag (2)`` in circuit order."""
    _check_time(t)
    N, S = spec.dim, spec.total
    dims = (N, N, N + 1, 2)
    D3 = N * N * (N + 1)
    I = np.eye

    def idx(s, a2, a3):
        return (s * N + a2) * (N + 1) + a3

    e = np.exp(-S * t)
    r = np.sqrt(max(0.0, 1 - e * e))
    U1 = np.kron(I(D3), np.array([[r, -e], [e, r]]))

    swap = _permutation_matrix({idx(s, a2, a3): idx(a3, a2, s)
                                for s in range(N) for a2 in range(N) for a3 in range(N)}, D3)
    shift = np.roll(I(N + 1), 1, axis=0)  # |k> -> |k+1>, |N> -> |0>
    P1 = np.kron(I(N * N), shift)
    if S > 0:
        U2_small = householder_completion(np.sqrt(spec.a / S))
    else:
        U2_small = I(N)
    U2 = np.kron(np.kron(I(N), U2_small), I(N + 1))
    P0 = _permutation_matrix({**{idx(0, k, a3): idx(k, k, a3) for k in range(1, N) for a3 in range(N + 1)},
                              **{idx(k, k, a3): idx(0, k, a3) for k in range(1, N) for a3 in range(N + 1)}}, D3)
    X = np.array([[0.0, 1.0], [1.0, 0.0]])
    anc3_zero = np.kron(np.kron(I(N * N), np.diag(np.eye(N + 1)[0])), X)
    anc3_rest = np.kron(np.kron(I(N * N), np.diag(1 - np.eye(N + 1)[0])), I(2))
    return {
        "U1": U1,
        "SWAP": _controlled_on_zero(swap, dims),
        "P1": _controlled_on_zero(P1, dims),
        "U2": _controlled_on_zero(U2, dims),
        "P2": _controlled_on_zero(P0, dims),
        "flip": anc3_zero + anc3_rest,
    }


def dense_diagonal_gate_sequence(spec: DenseDiagonalSpec, t: float, tol: float = ISO_TOL) -> DenseIsometry:
    """Multiply the circuit gates and read off ``V`` from the flag-0 block."""
    gates = dense_diagonal_gates(spec, t)
    U = np.eye(gates["U1"].shape[0], dtype=complex)
    for name in ("U1", "SWAP", "P1", "U2", "P2", "flip"):
        G = gates[name]
        if np.max(np.abs(G.conj().T @ G - np.eye(G.shape[0]))) > tol:
            raise InvariantError("gate_sequence", f"gate {name} is not unitary")
        U = G @ U
    N = spec.dim
    D3 = N * N * (N + 1)
    inputs = [(m * N * (N + 1)) * 2 for m in range(N)]  # |m>|0>|0>|0>
    out = U[:, inputs].reshape(D3, 2, N)
    if np.max(np.abs(out[:, 1, :]), initial=0.0) > tol:
        raise InvariantError("gate_sequence", "flag qubit not returned to |0>")
    iso = DenseIsometry(N, N * (N + 1), out[:, 0, :])
    target = dense_diagonal_isometry(spec, t).matrix
    err = float(np.max(np.abs(iso.matrix - target)))
    if err > tol:
        raise InvariantError("gate_sequence", f"circuit output differs from V by {err:.3e}")
    return iso


# ---------------------------------------------------------------- 1-ket-sparse


@dataclass
class OneKetSparseSpec:
    """Per-orbit rates ``a``, ``aprime`` and coupling ``b`` for a fixed-point-free involution."""

    dim: int
    nu: tuple
    a: np.ndarray
    aprime: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.nu = _involution(self.nu, self.dim, fixed_points=False)
        for name in ("a", "aprime", "b"):
            setattr(self, name, _real_vector(getattr(self, name), self.dim, name))
        if np.any(self.a < 0) or np.any(self.aprime < 0):
            raise ValidationError("a and aprime must be nonnegative")
        for x in range(self.dim):
            y = self.nu[x]
            for name in ("a", "aprime", "b"):
                v = getattr(self, name)
                if abs(v[x] - v[y]) > SPEC_TOL * max(1.0, abs(v[x])):
                    raise ValidationError(f"{name} must agree on the orbit {{{x}, {y}}}")
            if self.b[x] ** 2 > 4 * self.a[x] * self.aprime[x] * (1 + 1e-12) + SPEC_TOL:
                raise ValidationError(f"b^2 > 4 a a' on the orbit {{{x}, {y}}}")

    def gks(self) -> OvercompleteGKS:
        """Coupling entries ``b/2`` reproduce the evolution used by the ancilla construction."""
        N = self.dim
        g = OvercompleteGKS(N)
        for k in range(N):
            nk = self.nu[k]
            g.set(k, nk, k, nk, self.a[k])
            g.set(k, k, k, k, self.aprime[k])
            if k < nk:
                for l in (k, nk):
                    g.set(k, l, nk, l, self.b[k] / 2)
        return g


def one_ket_sparse_coefficients(a: float, ap: float, b: float, t: float) -> tuple:
    """``(a_u, b_u, c_u, d_u)`` of the ancilla construction for one orbit."""
    s = a + ap
    au = np.sqrt(0.5 * (1 - np.exp(-4 * a * t)))
    bu = np.exp(-s * t)
    cu = _sqrt_nonneg(0.5 * (1 + np.exp(-4 * a * t) - 2 * np.exp(-2 * s * t)), "c_u^2")
    du = b * (1 - np.exp(-2 * s * t)) / (2 * s) if s > 0 else b * t
    return float(au), float(bu), cu, float(du)


def one_ket_sparse_isometry(spec: OneKetSparseSpec, t: float) -> SparseStinespringIsometry:
    _check_time(t)
    N = spec.dim
    pattern = SparsityPattern(N, spec.nu)
    phi = np.zeros((2, N, 2 * N + 1), dtype=complex)
    for u in range(N):
        au, bu, cu, du = one_ket_sparse_coefficients(spec.a[u], spec.aprime[u], spec.b[u], t)
        if au ** 2 * cu ** 2 < du ** 2 - 1e-12:
            raise InvariantError("ancilla_feasibility", f"a_u^2 c_u^2 < d_u^2 on orbit of {u}")
        if cu == 0:
            if abs(du) > 1e-12:
                raise InvariantError("ancilla_feasibility", f"c_u = 0 but d_u = {du:.3e}")
            ratio = 0.0
        else:
            ratio = du / cu
        phi[0, u, 0] = bu
        phi[0, u, 1 + u] = cu
        phi[1, u, 1 + u] = ratio
        phi[1, u, 1 + N + u] = _sqrt_nonneg(au ** 2 - ratio ** 2, "a_u^2 - d_u^2/c_u^2")
    return _finish(pattern, phi)


def one_ket_sparse_channel(spec: OneKetSparseSpec, t: float) -> QuantumChannel:
    return channel_from_isometry(one_ket_sparse_isometry(spec, t))


def _check_time(t: float) -> None:
    if not np.isfinite(t) or t < 0:
        raise ValidationError(f"t must be finite and nonnegative, got {t}")
