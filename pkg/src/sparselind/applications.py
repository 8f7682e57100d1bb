"""Worked systems: damped oscillators, quantum stochastic walks, hypercube decoherence."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .classes import DiagonalSpec, IdenticalCoordinateSpec, identical_coordinate_channel
from .decompose import permutation_cover
from .errors import InvariantError, ValidationError
from .linalg import as_square, hermitize, is_hermitian, unvec
from .lindblad import (
    LindbladModel,
    QuantumChannel,
    Superoperator,
    exact_channel,
    gks_superop_matrix,
    hamiltonian_superop,
    liouvillian,
)

# ---------------------------------------------------------------- oscillator


@dataclass
class OscillatorSpec:
    levels: int
    direction: str = "down"
    lam: float = 0.5

    def __post_init__(self):
        if self.levels < 2:
            raise ValidationError("levels must be at least 2")
        if self.direction not in ("up", "down", "mixed"):
            raise ValidationError(f"direction must be up, down or mixed, got {self.direction!r}")
        if not 0 <= self.lam <= 1:
            raise ValidationError("lam must lie in [0, 1]")


def annihilation(N: int) -> np.ndarray:
    """Truncated ``a`` with ``a|j> = sqrt(j)|j-1>``."""
    return np.diag(np.sqrt(np.arange(1, N)), 1).astype(complex)


def oscillator_operators(spec: OscillatorSpec) -> list:
    N = spec.levels
    a = annihilation(N) / np.sqrt(N)
    if spec.direction == "down":
        return [a]
    if spec.direction == "up":
        return [a.conj().T]
    return [np.sqrt(1 - spec.lam) * a, np.sqrt(spec.lam) * a.conj().T]


def oscillator_model(spec: OscillatorSpec) -> LindbladModel:
    return LindbladModel(spec.levels, None, oscillator_operators(spec))


def oscillator_sparse_specs(spec: OscillatorSpec) -> list:
    """One 1-sparse operator spec per Lindblad operator."""
    return [permutation_cover(L, 1) for L in oscillator_operators(spec)]


# ---------------------------------------------------------------- stochastic walks


HAMILTONIANS = ("laplacian", "adjacency", "custom", "none")


@dataclass
class WalkSpec:
    """Undirected weighted graph, Markov rates ``M`` and a Hamiltonian choice.

    Without explicit ``rates`` the walk is ``M_{k,l} = w_{kl} / deg(l)``,
    the unweighted random walk when all weights are 1.  ``mix = w`` weights
    the parts as ``(1-w) H + w L``; ``None`` adds them unweighted.
    """

    vertices: int
    edges: list
    hamiltonian: str = "laplacian"
    custom_hamiltonian: np.ndarray | None = None
    rates: np.ndarray | None = None
    mix: float | None = None
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = int(self.vertices)
        if n < 1:
            raise ValidationError("a walk needs at least one vertex")
        W = np.zeros((n, n))
        for e in self.edges:
            if len(e) not in (2, 3):
                raise ValidationError(f"edge {e!r} must be [u, v] or [u, v, w]")
            u, v = int(e[0]), int(e[1])
            w = float(e[2]) if len(e) == 3 else 1.0
            if not (0 <= u < n and 0 <= v < n) or u == v:
                raise ValidationError(f"edge {e!r} is out of range or a self-loop")
            if w <= 0:
                raise ValidationError(f"edge {e!r} must have positive weight")
            W[u, v] = W[v, u] = w
        self.weights = W
        if self.hamiltonian not in HAMILTONIANS:
            raise ValidationError(f"hamiltonian must be one of {HAMILTONIANS}")
        if self.hamiltonian == "custom":
            H = as_square(self.custom_hamiltonian, "custom_hamiltonian")
            if H.shape != (n, n) or not is_hermitian(H):
                raise ValidationError("custom_hamiltonian must be a Hermitian n x n matrix")
            self.custom_hamiltonian = H
        if self.rates is None:
            deg = W.sum(axis=0)
            M = np.divide(W, deg[None, :], out=np.zeros_like(W), where=deg[None, :] > 0)
        else:
            M = np.asarray(self.rates, dtype=float)
            if M.shape != (n, n):
                raise ValidationError("rates must be n x n")
            off = M - np.diag(np.diag(M))
            if np.any(off < 0):
                raise ValidationError("off-diagonal rates must be nonnegative")
            if np.any((off > 0) & (W == 0)):
                raise ValidationError("rates are nonzero off the graph's edges")
            M = off
        self.rates = M
        if self.mix is not None and not 0 <= self.mix <= 1:
            raise ValidationError("mix must lie in [0, 1]")

    def hamiltonian_matrix(self) -> np.ndarray:
        W = self.weights
        if self.hamiltonian == "laplacian":
            return np.diag(W.sum(axis=0)) - W
        if self.hamiltonian == "adjacency":
            return W.copy()
        if self.hamiltonian == "custom":
            return self.custom_hamiltonian
        return np.zeros_like(W)

    def dissipative_spec(self) -> DiagonalSpec:
        """Diagonal GKS rates ``a_{k,l} = M_{k,l} / 2``, i.e. ``L_{kl} = sqrt(M_kl)|k><l|``."""
        return DiagonalSpec(self.vertices, self.rates / 2, d=max(1, self.vertices))


def stochastic_walk_generator(spec: WalkSpec) -> Superoperator:
    n = spec.vertices
    Hs = hamiltonian_superop(spec.hamiltonian_matrix())
    Ls = gks_superop_matrix(spec.dissipative_spec().gks().dense(), n)
    if spec.mix is None:
        return Superoperator(n, Hs + Ls)
    return Superoperator(n, (1 - spec.mix) * Hs + spec.mix * Ls)


@dataclass
class StationaryResult:
    state: np.ndarray | None
    nullity: int
    residual: float
    unique: bool


def stationary_state(generator, tol: float = 1e-9) -> StationaryResult:
    """Null vector of the Liouvillian as a unit-trace density matrix."""
    S = liouvillian(generator)
    N = S.dim
    M = S.matrix
    _, sv, Vh = np.linalg.svd(M)
    scale = max(1.0, sv[0] if sv.size else 0.0)
    nullity = int(np.sum(sv <= tol * scale))
    if nullity == 0:
        raise InvariantError("stationary_nullspace", f"smallest singular value {sv[-1]:.3e} is not zero")
    if nullity > 1:
        return StationaryResult(None, nullity, 0.0, False)
    rho = unvec(Vh[-1].conj(), N)
    tr = np.trace(rho)
    if abs(tr) < 1e-14:
        raise InvariantError("stationary_nullspace", "null vector has zero trace")
    rho = hermitize(rho / tr)
    residual = float(np.abs(S.apply(rho)).max())
    return StationaryResult(rho, 1, residual, True)


def walk_trajectory(spec: WalkSpec, rho0, times) -> list:
    """States ``e^{tL}(rho0)`` at each time."""
    gen = stochastic_walk_generator(spec)
    rho0 = as_square(rho0, "rho0")
    return [exact_channel(gen, float(t), check=False).apply(rho0) for t in times]


def trajectory_csv(times, states) -> str:
    n = states[0].shape[0] if states else 0
    head = ["t"] + [f"rho_{i}_{j}_{part}" for i in range(n) for j in range(n) for part in ("re", "im")]
    lines = [",".join(head)]
    for t, rho in zip(times, states):
        vals = [format(float(t), ".17g")]
        for i in range(n):
            for j in range(n):
                vals += [format(float(rho[i, j].real), ".17g"), format(float(rho[i, j].imag), ".17g")]
        lines.append(",".join(vals))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- hypercube


PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)


def _on_qubit(op: np.ndarray, j: int, n: int) -> np.ndarray:
    """``op`` on qubit ``j`` (1-based, qubit 1 is the most significant bit)."""
    mats = [np.eye(2)] * n
    mats[j - 1] = op
    return reduce(np.kron, mats)


def hypercube_adjacency(n: int) -> np.ndarray:
    return sum(_on_qubit(PAULI_X, j, n) for j in range(1, n + 1))


def alagic_operators(n: int) -> list:
    projs = [np.diag([1.0, 0.0]), np.diag([0.0, 1.0])]
    return [_on_qubit(P, j, n) for j in range(1, n + 1) for P in projs]


def hypercube_model(n: int, model: str, param: float) -> LindbladModel:
    if not 1 <= n <= 6:
        raise ValidationError("hypercube dimension must be between 1 and 6")
    A = hypercube_adjacency(n)
    if model == "alagic":
        p = float(param)
        if not 0 <= p < 4 / n:
            raise ValidationError(f"p must lie in [0, 4/n) = [0, {4 / n:.4g})")
        return LindbladModel(2 ** n, (1 - p) * A, [np.sqrt(p) * L for L in alagic_operators(n)])
    if model == "strauch":
        lam = float(param)
        if lam < 0:
            raise ValidationError("lambda must be nonnegative")
        ops = [np.sqrt(lam) * np.diag(np.eye(2 ** n)[x]) for x in range(2 ** n)]
        return LindbladModel(2 ** n, A, ops)
    raise ValidationError(f"model must be 'alagic' or 'strauch', got {model!r}")


def strauch_dissipative_spec(n: int, lam: float) -> IdenticalCoordinateSpec:
    N = 2 ** n
    return IdenticalCoordinateSpec(N, np.full(N, lam / 2), np.zeros(N))


def strauch_dissipative_channel(n: int, lam: float, t: float) -> QuantumChannel:
    return identical_coordinate_channel(strauch_dissipative_spec(n, lam), t)


def hypercube_decoherence(n: int, model: str, param: float, t: float) -> QuantumChannel:
    return exact_channel(hypercube_model(n, model, param), t)
