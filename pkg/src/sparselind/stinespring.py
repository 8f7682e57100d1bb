"""Sparse Stinespring isometries built from Gram vectors.

Conventions
-----------
* ``SparsityPattern.nu`` is a permutation whose orbits are the invariant
  sets ``S_x``; ``r_x`` is the orbit size and ``d`` the maximal one.
* The Gram matrix of a channel is the ``dN x dN`` matrix with entries
  ``M[i*N + x, j*N + y] = a_ij^{xy}`` where
  ``E(|x><y|) = sum_ij a_ij^{xy} |nu^i(x)><nu^j(y)|``.  Rows with
  ``i >= r_x`` are zero.
* Ancilla vectors satisfy ``<phi_{y,j}|phi_{x,i}> = a_ij^{xy}``; they are
  stored as ``phi[i, x, :]``.
* The isometry is ``V[z*anc + a, x] = sum_i delta(z, nu^i(x)) phi[i, x, a]``.
"""
from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import InvariantError, ValidationError
from .linalg import householder_completion, kron, spectral_norm
from .lindblad import LindbladModel, QuantumChannel, exact_channel, liouvillian

GRAM_TOL = 1e-9


# ---------------------------------------------------------------- patterns

@dataclass(frozen=True)
class SparsityPattern:
    """Neighbor permutation ``nu`` with its orbit structure."""

    dim: int
    nu: tuple

    def __post_init__(self):
        nu = tuple(int(v) for v in self.nu)
        if len(nu) != self.dim or sorted(nu) != list(range(self.dim)):
            raise ValidationError("nu must be a permutation of range(dim)")
        object.__setattr__(self, "nu", nu)

    def power(self, x: int, i: int) -> int:
        for _ in range(i % self.order(x)):
            x = self.nu[x]
        return x

    def orbit(self, x: int) -> list:
        out = [int(x)]
        y = self.nu[x]
        while y != x:
            out.append(y)
            y = self.nu[y]
        return out

    def order(self, x: int) -> int:
        return len(self.orbit(x))

    @property
    def orders(self) -> list:
        return [self.order(x) for x in range(self.dim)]

    @property
    def d(self) -> int:
        return max(self.orders)

    def orbits(self) -> list:
        seen, out = set(), []
        for x in range(self.dim):
            if x not in seen:
                orb = self.orbit(x)
                seen.update(orb)
                out.append(orb)
        return out

    def nu_power_array(self, i: int) -> np.ndarray:
        return np.array([self.power(x, i) for x in range(self.dim)])


def pattern_from_sets(sets: Sequence[Sequence[int]], dim: int | None = None) -> SparsityPattern:
    """Pattern whose ``nu`` maps each element of an ordered set to its cyclic successor."""
    flat = [int(v) for s in sets for v in s]
    if dim is None:
        dim = len(flat)
    if sorted(flat) != list(range(dim)) or any(len(s) == 0 for s in sets):
        raise ValidationError("sets must partition range(dim) into non-empty ordered orbits")
    nu = [0] * dim
    for s in sets:
        s = [int(v) for v in s]
        for a, b in zip(s, s[1:] + s[:1]):
            nu[a] = b
    return SparsityPattern(dim, tuple(nu))


def identity_pattern(dim: int) -> SparsityPattern:
    return SparsityPattern(dim, tuple(range(dim)))


# ---------------------------------------------------------------- Gram matrix

@dataclass
class GramMatrix:
    """Gram matrix of an invariantly sparse channel."""

    pattern: SparsityPattern
    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return self.pattern.dim

    @property
    def d(self) -> int:
        return self.pattern.d

    def coefficient(self, i: int, j: int, x: int, y: int) -> complex:
        N = self.dim
        return self.matrix[i * N + x, j * N + y]

    def psd_violation(self) -> float:
        M = self.matrix
        lam = np.linalg.eigvalsh(0.5 * (M + M.conj().T))[0]
        return float(max(0.0, -lam) / max(spectral_norm(M), 1e-300))

    def trace_constraint_errors(self) -> tuple:
        """Max deviations of the normalization and orthogonality trace constraints."""
        p, N = self.pattern, self.dim
        norm_err, orth_err = 0.0, 0.0
        for x in range(N):
            r = p.order(x)
            s = sum(self.coefficient(j, j, x, x) for j in range(r))
            norm_err = max(norm_err, abs(s - 1))
            for i in range(1, r):
                y = p.power(x, i)
                s = sum(self.coefficient((i + j) % r, j, x, y) for j in range(r))
                orth_err = max(orth_err, abs(s))
        return float(norm_err), float(orth_err)

    def check(self, tol: float = GRAM_TOL) -> None:
        v = self.psd_violation()
        if v > tol:
            raise InvariantError("gram_psd", f"min eigenvalue -{v:.3e}*||M||")
        n_err, o_err = self.trace_constraint_errors()
        if n_err > tol:
            raise InvariantError("gram_normalization", f"deviation {n_err:.3e}")
        if o_err > tol:
            raise InvariantError("gram_orthogonality", f"deviation {o_err:.3e}")


def _allowed_mask(pattern: SparsityPattern) -> np.ndarray:
    """Boolean mask over Choi indices ``[(a,x),(b,y)]`` allowed by the pattern."""
    N = pattern.dim
    in_orbit = np.zeros((N, N), dtype=bool)  # in_orbit[a, x]: a in S_x
    for x in range(N):
        in_orbit[pattern.orbit(x), x] = True
    return (in_orbit[:, :, None, None] & in_orbit[None, None, :, :]).reshape(N * N, N * N)


def gram_of_channel(channel: QuantumChannel, pattern: SparsityPattern, tol: float = GRAM_TOL) -> GramMatrix:
    """Read the Gram matrix coefficients off the Choi matrix."""
    N = pattern.dim
    if channel.dim_in != N or channel.dim_out != N:
        raise ValidationError("channel and pattern dimensions differ")
    J = channel.choi
    outside = np.abs(J) * ~_allowed_mask(pattern)
    if outside.max(initial=0.0) > tol:
        idx = np.unravel_index(np.argmax(outside), J.shape)
        a, x = divmod(int(idx[0]), N)
        b, y = divmod(int(idx[1]), N)
        raise ValidationError(
            f"channel is not invariantly sparse for this pattern: E(|{x}><{y}|) has weight "
            f"{outside[idx]:.3e} on |{a}><{b}|"
        )
    d = pattern.d
    M = np.zeros((d * N, d * N), dtype=complex)
    J4 = J.reshape(N, N, N, N)  # [a, x, b, y]
    powers = [pattern.nu_power_array(i) for i in range(d)]
    orders = np.array(pattern.orders)
    for i in range(d):
        for j in range(d):
            blk = J4[powers[i][:, None], np.arange(N)[:, None], powers[j][None, :], np.arange(N)[None, :]]
            mask = (i < orders)[:, None] & (j < orders)[None, :]
            M[i * N:(i + 1) * N, j * N:(j + 1) * N] = np.where(mask, blk, 0)
    return GramMatrix(pattern, M)


# ---------------------------------------------------------------- Gram vectors

@dataclass
class AncillaFamily:
    """Ancilla vectors ``phi[i, x, :]`` (unnormalized)."""

    pattern: SparsityPattern
    phi: np.ndarray

    @property
    def anc_dim(self) -> int:
        return self.phi.shape[2]

    def vector(self, x: int, i: int) -> np.ndarray:
        return self.phi[i, x]

    def inner_products(self) -> np.ndarray:
        """Table ``T[(i,x),(j,y)] = <phi_{y,j}|phi_{x,i}>``, comparable to the Gram matrix."""
        d, N, anc = self.phi.shape
        F = self.phi.reshape(d * N, anc)
        return F @ F.conj().T

    def padded(self, anc_dim: int) -> AncillaFamily:
        d, N, anc = self.phi.shape
        if anc_dim < anc:
            raise ValidationError(f"cannot shrink ancilla from {anc} to {anc_dim}")
        phi = np.zeros((d, N, anc_dim), dtype=complex)
        phi[:, :, :anc] = self.phi
        return AncillaFamily(self.pattern, phi)


def default_anc_dim(pattern: SparsityPattern) -> int:
    return pattern.d * pattern.dim + 2


def gram_vectors_full(gram: GramMatrix, anc_dim: int | None = None, tol: float = GRAM_TOL) -> AncillaFamily:
    """Gram vectors from a full eigendecomposition of ``M``."""
    M = gram.matrix
    d, N = gram.d, gram.dim
    w, U = np.linalg.eigh(0.5 * (M + M.conj().T))
    scale = max(np.max(np.abs(w), initial=0.0), 1e-300)
    if w.size and w[0] < -tol * scale:
        raise ValidationError(f"Gram matrix is not PSD (min eigenvalue {w[0]:.3e})")
    w = np.clip(w, 0.0, None)
    # columns of sqrt(D) U^T have inner products M^T, i.e. <phi_b|phi_a> = M[a, b]
    B = np.sqrt(w)[:, None] * U.T
    phi = B.T.reshape(d, N, d * N)
    fam = AncillaFamily(gram.pattern, phi)
    return fam.padded(anc_dim if anc_dim is not None else default_anc_dim(gram.pattern))


class CountingOracle:
    """Wrap an entry accessor ``f(i, j)`` and count calls."""

    def __init__(self, f: Callable[[int, int], complex]):
        self.f = f
        self.queries = 0

    def __call__(self, i: int, j: int) -> complex:
        self.queries += 1
        return self.f(i, j)


def low_rank_gram_vector(entry: Callable[[int, int], complex], r: int, S: Sequence[int], x: int,
                         rtol: float = 1e-10, return_info: bool = False):
    """Gram vector ``v_x`` of a rank-``r`` PSD matrix from at most ``(r+1)^2`` entries.

    The returned vectors satisfy ``v_y^dagger v_x = M[y, x]`` for ``y`` in ``S``
    (and hence for all ``y``).  ``S`` indexes a full-rank principal
    submatrix; the basis of the returned vectors is fixed by ``S`` alone.
    """
    S = [int(s) for s in S]
    if len(S) != r or len(set(S)) != r:
        raise ValidationError(f"S must hold {r} distinct indices")
    oracle = entry if isinstance(entry, CountingOracle) else CountingOracle(entry)
    start = oracle.queries
    idx = S if x in S else S + [int(x)]
    Mx = np.array([[oracle(a, b) for b in idx] for a in idx], dtype=complex)
    MS = Mx[:r, :r]
    w, U = np.linalg.eigh(0.5 * (MS + MS.conj().T))
    norm = max(np.max(np.abs(w), initial=0.0), 1e-300)
    if w[0] < rtol * norm:
        raise ValidationError(f"principal submatrix on S is rank deficient (min eigenvalue {w[0]:.3e})")
    cond = float(w[-1] / w[0])
    VS = np.sqrt(w)[:, None] * U.conj().T  # columns v_i with V^dag V = M_S
    if x in S:
        v = VS[:, S.index(int(x))]
    else:
        w2, U2 = np.linalg.eigh(0.5 * (Mx + Mx.conj().T))
        w2 = np.clip(w2[1:], 0.0, None)  # drop the (numerically) zero eigenvalue
        Vp = np.sqrt(w2)[:, None] * U2[:, 1:].conj().T
        c = np.linalg.solve(Vp[:, :r], Vp[:, r])
        v = VS @ c
    if return_info:
        return v, {"queries": oracle.queries - start, "condition_number": cond}
    return v


def select_full_rank_subset(M, rtol: float = 1e-10) -> list:
    """Greedy principal-submatrix selection maximizing the smallest eigenvalue.

    Stops when no remaining index keeps the smallest eigenvalue above
    ``rtol * ||M||``; the subset size is the numerical rank.
    """
    M = np.asarray(M, dtype=complex)
    n = M.shape[0]
    thresh = rtol * max(spectral_norm(M), 1e-300)
    S: list = []
    remaining = set(range(n))
    while remaining:
        best, best_val = None, thresh
        for j in sorted(remaining):
            idx = S + [j]
            lam = np.linalg.eigvalsh(M[np.ix_(idx, idx)])[0]
            if lam > best_val:
                best, best_val = j, lam
        if best is None:
            break
        S.append(best)
        remaining.remove(best)
    return S


# ---------------------------------------------------------------- isometry

@dataclass
class SparseStinespringIsometry:
    pattern: SparsityPattern
    ancilla: AncillaFamily
    matrix: np.ndarray = field(repr=False)

    @property
    def anc_dim(self) -> int:
        return self.ancilla.anc_dim

    def isometry_error(self) -> float:
        V = self.matrix
        return float(np.max(np.abs(V.conj().T @ V - np.eye(V.shape[1])), initial=0.0))

    def column(self, x: int) -> np.ndarray:
        """``V|x>`` reshaped to ``(system, ancilla)``."""
        return self.matrix[:, x].reshape(self.pattern.dim, self.anc_dim)


def isometry_from_ancilla(pattern: SparsityPattern, ancilla: AncillaFamily, tol: float = GRAM_TOL,
                          check: bool = True) -> SparseStinespringIsometry:
    N, anc = pattern.dim, ancilla.anc_dim
    d = ancilla.phi.shape[0]
    V = np.zeros((N, anc, N), dtype=complex)  # [z, a, x]
    for x in range(N):
        for i in range(min(pattern.order(x), d)):
            V[pattern.power(x, i), :, x] += ancilla.phi[i, x]
    iso = SparseStinespringIsometry(pattern, ancilla, V.reshape(N * anc, N))
    if check:
        err = iso.isometry_error()
        if err > tol:
            raise InvariantError("isometry", f"V^dag V deviates from identity by {err:.3e}")
    return iso


def channel_from_isometry(V) -> QuantumChannel:
    """``E(rho) = Tr_anc[V rho V^dag]`` via Kraus operators ``(I (x) <a|) V``."""
    if isinstance(V, SparseStinespringIsometry):
        N, anc, M = V.pattern.dim, V.anc_dim, V.matrix
    else:
        M = np.asarray(V, dtype=complex)
        N = M.shape[1]
        anc = M.shape[0] // N
    V3 = M.reshape(N, anc, M.shape[1])
    kraus = [V3[:, a, :] for a in range(anc) if np.any(V3[:, a, :])]
    if not kraus:
        kraus = [np.zeros((N, M.shape[1]))]
    return QuantumChannel.from_kraus(kraus)


@dataclass
class PipelineResult:
    gram: GramMatrix
    ancilla: AncillaFamily
    isometry: SparseStinespringIsometry
    channel: QuantumChannel


def stinespring_pipeline(channel: QuantumChannel, pattern: SparsityPattern, anc_dim: int | None = None) -> PipelineResult:
    """Channel -> Gram matrix -> Gram vectors -> isometry -> channel."""
    gram = gram_of_channel(channel, pattern)
    gram.check()
    fam = gram_vectors_full(gram, anc_dim)
    iso = isometry_from_ancilla(pattern, fam)
    return PipelineResult(gram, fam, iso, channel_from_isometry(iso))


# ---------------------------------------------------------------- two-stage check

class Gate:
    """A unitary on ``index (x) system (x) ancilla`` acting on state tensors ``psi[j, z, a]``."""

    name = "gate"

    def apply(self, psi: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def matrix(self, shape) -> np.ndarray:
        n = int(np.prod(shape))
        out = np.zeros((n, n), dtype=complex)
        for k in range(n):
            e = np.zeros(n, dtype=complex)
            e[k] = 1
            out[:, k] = self.apply(e.reshape(shape)).reshape(-1)
        return out


def _shift(c: np.ndarray, power: int) -> np.ndarray:
    # P|j> = |j-1 mod d>, so (P^p c)[j] = c[j+p]
    return np.roll(c, -power, axis=0)


class SystemControlledIndexGate(Gate):
    """``|x><x|_sys (x) U_index``."""

    def __init__(self, x: int, U: np.ndarray, name: str = "W"):
        self.x, self.U, self.name = x, U, name

    def apply(self, psi):
        out = psi.copy()
        out[:, self.x, :] = self.U @ psi[:, self.x, :]
        return out


class IndexSystemControlledAncillaGate(Gate):
    """``|i><i| (x) |x><x| (x) U_anc``."""

    def __init__(self, i: int, x: int, U: np.ndarray, name: str = "Phi"):
        self.i, self.x, self.U, self.name = i, x, U, name

    def apply(self, psi):
        out = psi.copy()
        out[self.i, self.x, :] = self.U @ psi[self.i, self.x, :]
        return out


class IndexControlledPermutation(Gate):
    """``|i><i| (x) nu^i`` on the system register."""

    def __init__(self, i: int, perm: np.ndarray, name: str = "nu"):
        self.i, self.perm, self.name = i, np.asarray(perm), name

    def apply(self, psi):
        out = psi.copy()
        out[self.i] = 0
        out[self.i, self.perm, :] = psi[self.i]
        return out


class StateControlledShift(Gate):
    """Apply ``P^power`` to the index when system (x) ancilla is in ``|x>|phi>`` (or a global state)."""

    def __init__(self, power: int, phi: np.ndarray, x: int | None = None, name: str = "ctrl-P"):
        self.power, self.x, self.name = power, x, name
        nrm = np.linalg.norm(phi)
        self.phi = phi / nrm if nrm > 1e-300 else None

    def apply(self, psi):
        if self.phi is None:
            return psi.copy()
        out = psi.copy()
        if self.x is None:
            c = np.einsum("za,jza->j", self.phi.conj(), psi)
            out += np.einsum("j,za->jza", _shift(c, self.power) - c, self.phi)
        else:
            c = psi[:, self.x, :] @ self.phi.conj()
            out[:, self.x, :] += np.outer(_shift(c, self.power) - c, self.phi)
        return out


class SystemControlledShift(Gate):
    """``|x><x|_sys (x) P^power`` on the index."""

    def __init__(self, x: int, power: int, name: str = "P"):
        self.x, self.power, self.name = x, power, name

    def apply(self, psi):
        out = psi.copy()
        out[:, self.x, :] = _shift(psi[:, self.x, :], self.power)
        return out


def two_stage_circuits(iso: SparseStinespringIsometry, x: int) -> tuple:
    """Gate lists ``(U_forward, U_backward)`` for the orbit of ``x``."""
    p, fam = iso.pattern, iso.ancilla
    N = p.dim
    d = p.order(x)
    orb = [p.power(x, k) for k in range(d)]
    phi = lambda y, i: fam.phi[i, y]

    forward: list = []
    for y in orb:
        norms = np.array([np.linalg.norm(phi(y, i)) for i in range(d)], dtype=complex)
        forward.append(SystemControlledIndexGate(y, householder_completion(norms), "W"))
    for y in orb:
        for i in range(d):
            v = phi(y, i)
            nv = np.linalg.norm(v)
            if nv > 1e-300:
                forward.append(IndexSystemControlledAncillaGate(i, y, householder_completion(v / nv), "Phi"))
    for i in range(1, d):
        perm = np.arange(N)
        for y in orb:
            perm[y] = p.power(y, i)
        forward.append(IndexControlledPermutation(i, perm, f"nu^{i}"))

    backward: list = []
    for k in range(1, d):
        yk = orb[k]
        Phi = np.zeros((N, fam.anc_dim), dtype=complex)
        for i in range(d):
            Phi[orb[(i + k) % d]] += phi(yk, i)
        pre = [StateControlledShift(i + k, phi(yk, i), orb[(i + k) % d]) for i in range(d)]
        post = [StateControlledShift(-(i + k), phi(yk, i), orb[(i + k) % d]) for i in reversed(range(d))]
        backward.extend(pre + [StateControlledShift(-k, Phi, None, f"ctrl-Phi_{k}")] + post)
    for m in range(d):
        backward.append(SystemControlledShift(orb[m], m))
    return forward, backward


def verify_two_stage(iso: SparseStinespringIsometry, x: int | None = None, tol: float = GRAM_TOL,
                     check_unitarity: bool = True) -> dict:
    """Check that the two-stage circuit reproduces the isometry columns on one orbit."""
    p, fam = iso.pattern, iso.ancilla
    if x is None:
        x = max(range(p.dim), key=p.order)
    d = p.order(x)
    orb = [p.power(x, k) for k in range(d)]
    N, anc = p.dim, fam.anc_dim

    orth = 0.0
    for k in range(1, d):
        s = sum(np.vdot(fam.phi[(j + k) % d, x], fam.phi[j, orb[k]]) for j in range(d))
        orth = max(orth, abs(s))
    if orth > tol:
        raise InvariantError("two_stage_orthogonality", f"ancilla family violates orthogonality by {orth:.3e}")

    forward, backward = two_stage_circuits(iso, x)
    shape = (d, N, anc)
    unit_err = 0.0
    if check_unitarity and d * N * anc <= 1024:
        for g in forward + backward:
            U = g.matrix(shape)
            unit_err = max(unit_err, float(np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0])))))
    err_fwd, err = 0.0, 0.0
    for k in range(d):
        psi = np.zeros(shape, dtype=complex)
        psi[0, orb[k], 0] = 1
        for g in forward:
            psi = g.apply(psi)
        target_fwd = np.zeros(shape, dtype=complex)
        for i in range(d):
            target_fwd[i, orb[(i + k) % d]] += fam.phi[i, orb[k]]
        err_fwd = max(err_fwd, float(np.max(np.abs(psi - target_fwd))))
        for g in backward:
            psi = g.apply(psi)
        target = np.zeros(shape, dtype=complex)
        target[0] = iso.column(orb[k])
        err = max(err, float(np.max(np.abs(psi - target))))
    ok = err <= tol and err_fwd <= tol and unit_err <= tol
    return {
        "check": "two_stage",
        "orbit": orb,
        "d": d,
        "max_error": err,
        "forward_error": err_fwd,
        "gate_unitarity_error": unit_err,
        "orthogonality_residual": orth,
        "pass": bool(ok),
    }


# ---------------------------------------------------------------- local Lindbladians

def local_pattern(c: int, n: int) -> SparsityPattern:
    """``nu`` increments the leading ``c`` bits (qubit 1 most significant) mod ``2^c``."""
    N, rest = 2 ** n, 2 ** (n - c)
    nu = [(((x // rest) + 1) % 2 ** c) * rest + x % rest for x in range(N)]
    return SparsityPattern(N, tuple(nu))


def embed_local_model(model: LindbladModel, c: int, n: int) -> LindbladModel:
    """``L_c (x) I`` on ``n`` qubits."""
    I = np.eye(2 ** (n - c))
    return LindbladModel(2 ** n, kron(model.hamiltonian, I), [kron(L, I) for L in model.lindblad_ops])


@dataclass
class LocalPipelineResult:
    channel: QuantumChannel
    isometry: SparseStinespringIsometry
    pattern: SparsityPattern
    rank: int
    subset: list
    max_queries_per_vector: int
    max_condition_number: float


def local_lindbladian_pipeline(model: LindbladModel, c: int, n: int, t: float,
                               anc_dim: int | None = None) -> LocalPipelineResult:
    """Simulate ``L_c (x) I`` through the low-rank Gram path.

    Only the ``2^c``-dimensional channel ``e^{t L_c}`` is exponentiated; the
    Gram entries of the embedded channel are served by an entry oracle.
    """
    if not (1 <= c <= n):
        raise ValidationError(f"need 1 <= c <= n, got c={c}, n={n}")
    if model.dim != 2 ** c:
        raise ValidationError(f"model dimension {model.dim} != 2^c = {2 ** c}")
    local = exact_channel(model, t)
    Jc = local.choi.reshape(2 ** c, 2 ** c, 2 ** c, 2 ** c)  # [a, x, b, y]
    pattern = local_pattern(c, n)
    N, d, rest = 2 ** n, 2 ** c, 2 ** (n - c)

    def coeff(i, x, j, y):
        # E(|x><y|) = E_c(|xc><yc|) (x) |x_rest><y_rest|
        xc, yc = x // rest, y // rest
        return Jc[(xc + i) % d, xc, (yc + j) % d, yc]

    def gram_entry(p, q):
        i, x = divmod(p, N)
        j, y = divmod(q, N)
        return coeff(i, x, j, y)

    # vectors need <phi_b|phi_a> = M[a, b], i.e. the algorithm's v_b^dag v_a = M^T[b, a]
    transposed = lambda b, a: gram_entry(a, b)
    Mt = np.array([[transposed(b, a) for a in range(d * N)] for b in range(d * N)])
    S = select_full_rank_subset(Mt)
    r = len(S)
    anc = anc_dim if anc_dim is not None else default_anc_dim(pattern)
    if anc < r:
        raise ValidationError(f"ancilla dimension {anc} below Gram rank {r}")
    phi = np.zeros((d, N, anc), dtype=complex)
    max_q, max_cond = 0, 0.0
    for a in range(d * N):
        v, info = low_rank_gram_vector(transposed, r, S, a, return_info=True)
        i, x = divmod(a, N)
        phi[i, x, :r] = v
        max_q = max(max_q, info["queries"])
        max_cond = max(max_cond, info["condition_number"])
    fam = AncillaFamily(pattern, phi)
    iso = isometry_from_ancilla(pattern, fam)
    return LocalPipelineResult(channel_from_isometry(iso), iso, pattern, r, S, max_q, max_cond)


def local_lindbladian_channel(model: LindbladModel, c: int, n: int, t: float, verify: bool = False,
                              tol: float = 1e-8) -> QuantumChannel:
    res = local_lindbladian_pipeline(model, c, n, t)
    if verify:
        from .lindblad import choi_distance

        ref = exact_channel(liouvillian(embed_local_model(model, c, n)), t)
        up = choi_distance(res.channel, ref).upper
        if up > tol:
            raise InvariantError("local_pipeline", f"Choi distance to exact channel {up:.3e}")
    return res.channel
