"""Graph decompositions of sparse matrices: edge colorings and permutation covers."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .errors import ValidationError
from .linalg import as_square


def max_degree(mask: np.ndarray) -> int:
    """Largest row or column count of a boolean pattern."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.size:
        return 0
    return int(max(mask.sum(axis=0).max(), mask.sum(axis=1).max()))


def one_sparse_coloring(edges, d: int) -> dict:
    """Color directed edges with at most ``d^2`` colors so each color is 1-sparse.

    Edge ``(u, v)`` gets ``d * next_idx + prev_idx`` where ``next_idx`` counts
    successors of ``u`` numbered below ``v`` and ``prev_idx`` counts
    predecessors of ``v`` numbered below ``u``.
    """
    succ: dict = {}
    pred: dict = {}
    for u, v in edges:
        succ.setdefault(u, []).append(v)
        pred.setdefault(v, []).append(u)
    colors = {}
    for u, v in edges:
        nxt = sum(1 for w in succ[u] if w < v)
        prv = sum(1 for w in pred[v] if w < u)
        if nxt >= d or prv >= d:
            raise ValidationError(f"vertex degree exceeds d = {d}")
        colors[(u, v)] = d * nxt + prv
    return colors


def pairwise_coloring(edges) -> dict:
    """3-color a graph with in- and out-degree at most 1 into isolated edges and 2-cycles.

    Paths and even cycles alternate two colors; odd cycles of length 3 or more
    give their final edge a third color.
    """
    succ = {}
    pred = {}
    for u, v in edges:
        if u in succ or v in pred:
            raise ValidationError("graph is not 1-sparse")
        succ[u], pred[v] = v, u
    colors = {}
    seen = set()
    starts = [u for u in succ if u not in pred]
    for s in starts:
        u, c = s, 0
        while u in succ:
            colors[(u, succ[u])] = c
            seen.add(u)
            u, c = succ[u], 1 - c
    for s in succ:
        if s in seen:
            continue
        cycle = [s]
        while succ[cycle[-1]] != s:
            cycle.append(succ[cycle[-1]])
        seen.update(cycle)
        L = len(cycle)
        for idx, u in enumerate(cycle):
            if L == 2:
                c = 0
            elif L % 2 == 1 and idx == L - 1:
                c = 2
            else:
                c = idx % 2
            colors[(u, succ[u])] = c
    return colors


def strongly_one_sparse_parts(a, d: int | None = None) -> list:
    """Split the off-diagonal of ``a`` into boolean masks, each strongly 1-sparse.

    Edge ``(k, l)`` is present when ``a[k, l] != 0`` and ``k != l``.  At most
    ``3 d^2`` masks are returned; empty colors are dropped.
    """
    a = as_square(a, "a")
    mask = (a != 0) & ~np.eye(a.shape[0], dtype=bool)
    if d is None:
        d = max(1, max_degree(mask))
    if max_degree(mask | (np.diag(np.diag(a)) != 0)) > d:
        raise ValidationError(f"matrix has a row or column with more than d = {d} nonzeros")
    edges = [(int(k), int(l)) for k, l in zip(*np.nonzero(mask))]
    outer = one_sparse_coloring(edges, d)
    parts = []
    for color in range(d * d):
        sub = [e for e in edges if outer[e] == color]
        if not sub:
            continue
        inner = pairwise_coloring(sub)
        for c in range(3):
            piece = [e for e in sub if inner[e] == c]
            if piece:
                m = np.zeros_like(mask)
                for k, l in piece:
                    m[k, l] = True
                parts.append(m)
    return parts


# ---------------------------------------------------------------- permutation cover


@dataclass
class SparseLindbladOpSpec:
    """``L|j> = sum_i coeffs[j, i] |perms[i][j]>``."""

    dim: int
    perms: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        self.perms = np.atleast_2d(np.asarray(self.perms, dtype=int))
        self.coeffs = np.asarray(self.coeffs, dtype=complex).reshape(self.dim, -1)
        k = self.perms.shape[0]
        if self.perms.shape != (k, self.dim) or self.coeffs.shape != (self.dim, k):
            raise ValidationError("perms must have shape (k, N) and coeffs shape (N, k)")
        for i, p in enumerate(self.perms):
            if sorted(p.tolist()) != list(range(self.dim)):
                raise ValidationError(f"perms[{i}] is not a permutation")
        for x in range(self.dim):
            targets = [int(self.perms[i, x]) for i in range(k) if self.coeffs[x, i] != 0]
            if len(set(targets)) != len(targets):
                raise ValidationError(f"column {x}: two permutations with nonzero weight share a target")

    @property
    def k(self) -> int:
        return self.perms.shape[0]

    def matrix(self) -> np.ndarray:
        L = np.zeros((self.dim, self.dim), dtype=complex)
        cols = np.arange(self.dim)
        for i in range(self.k):
            np.add.at(L, (self.perms[i], cols), self.coeffs[:, i])
        return L

    def max_entry(self) -> float:
        return float(np.abs(self.matrix()).max(initial=0.0))

    def scaled(self, factor: float) -> SparseLindbladOpSpec:
        return SparseLindbladOpSpec(self.dim, self.perms.copy(), self.coeffs * factor)


def permutation_cover(L, k: int | None = None) -> SparseLindbladOpSpec:
    """Write a row- and column-``k``-sparse ``L`` as ``k`` weighted permutations.

    The nonzero pattern is padded with zero-weight edges to a ``k``-regular
    bipartite multigraph, then ``k`` perfect matchings are peeled off.
    """
    L = as_square(L, "L")
    N = L.shape[0]
    mask = L != 0
    deg = max_degree(mask)
    if k is None:
        k = max(1, deg)
    if deg > k:
        raise ValidationError(f"L has a row or column with {deg} nonzeros, more than k = {k}")
    mult = mask.astype(int)  # mult[row, col]
    row_def = [k - int(c) for c in mult.sum(axis=1)]
    col_def = [k - int(c) for c in mult.sum(axis=0)]
    rows = [r for r in range(N) for _ in range(row_def[r])]
    cols = [c for c in range(N) for _ in range(col_def[c])]
    for r, c in zip(rows, cols):
        mult[r, c] += 1
    real_left = mask.copy()
    perms = np.zeros((k, N), dtype=int)
    coeffs = np.zeros((N, k), dtype=complex)
    for i in range(k):
        # match each column j to a row nu_i(j)
        match = maximum_bipartite_matching(csr_matrix((mult.T > 0).astype(np.int8)), perm_type="column")
        if np.any(match < 0):
            raise ValidationError("padding failed to produce a perfect matching")
        for j, r in enumerate(match):
            perms[i, j] = r
            mult[r, j] -= 1
            if real_left[r, j]:
                coeffs[j, i] = L[r, j]
                real_left[r, j] = False
    return SparseLindbladOpSpec(N, perms, coeffs)
