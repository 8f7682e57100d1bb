"""No-fast-forwarding demonstration: a chain Lindbladian that computes parity."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import ValidationError
from .linalg import trace_norm
from .lindblad import (
    LindbladModel,
    OvercompleteGKS,
    exact_channel,
    liouvillian,
    one_to_one_norm_witness,
)
from .sampling import random_pure_state, rng_from

TAIL_BOUND = 1 / 64


def chain_operator(N: int) -> np.ndarray:
    """``L|0> = 0`` and ``L|n> = |n-1>`` on ``C^{N+1}``."""
    if N < 1:
        raise ValidationError("N must be at least 1")
    return np.eye(N + 1, k=1, dtype=complex)


def chain_model(N: int) -> LindbladModel:
    return LindbladModel(N + 1, None, [chain_operator(N)])


def _log_poisson(m: np.ndarray, t: float) -> np.ndarray:
    if t == 0:
        return np.where(m == 0, 0.0, -np.inf)
    return m * np.log(t) - t - gammaln(m + 1)


def poisson_tail(N: int, t: float) -> float:
    """``sum_{m<N} t^m e^{-t} / m!``, summed in log space."""
    return float(np.exp(logsumexp(_log_poisson(np.arange(N), t))))


def poisson_populations(N: int, t: float) -> np.ndarray:
    """Level populations of ``e^{tL}(|N><N|)``; index is the level ``0..N``."""
    if t < 0:
        raise ValidationError("t must be nonnegative")
    p = np.zeros(N + 1)
    terms = np.exp(_log_poisson(np.arange(N), t))
    p[N - np.arange(N)] = terms
    p[0] = max(0.0, 1.0 - terms.sum())
    return p


def g_ratio(N: int) -> float:
    """``((2N)^{2N}/(2N)!) / ((2N)^N/N!)``."""
    return float(np.exp(N * np.log(2 * N) - gammaln(2 * N + 1) + gammaln(N + 1)))


def tail_bound_check(N_values) -> dict:
    """Tail values ``sum_{m<N} (2N)^m e^{-2N}/m!``; the bound is asserted only for ``N >= 7``."""
    rows = []
    for N in N_values:
        N = int(N)
        tail = poisson_tail(N, 2 * N)
        asserted = N >= 7
        rows.append({"N": N, "tail": tail, "asserted": asserted, "pass": (tail <= TAIL_BOUND) if asserted else None})
    g13 = g_ratio(13)
    return {
        "rows": rows,
        "g13": g13,
        "g13_pass": abs(g13 - 38.3102) < 1e-3,
        "pass": all(r["pass"] for r in rows if r["asserted"]) and abs(g13 - 38.3102) < 1e-3,
    }


# ---------------------------------------------------------------- parity


@dataclass
class ParityInstance:
    N: int
    s: str

    def __post_init__(self):
        if self.N < 1:
            raise ValidationError("N must be at least 1")
        if len(self.s) != self.N or set(self.s) - {"0", "1"}:
            raise ValidationError(f"s must be a bit string of length {self.N}")

    @property
    def parity(self) -> int:
        return self.s.count("1") % 2

    @classmethod
    def random(cls, N: int, seed=None) -> ParityInstance:
        rng = rng_from(seed)
        return cls(N, "".join(str(b) for b in rng.integers(0, 2, N)))


class BitOracle:
    """Counts reads of the hidden string ``s`` (1-based positions)."""

    def __init__(self, s: str):
        self._s = s
        self.queries = 0

    def __call__(self, n: int) -> int:
        self.queries += 1
        return int(self._s[n - 1])


def parity_index(N: int, n: int, j: int) -> int:
    """Basis index of ``|n, j>`` on ``C^{N+1} (x) C^2``, ancilla-major."""
    return n + (N + 1) * j


def parity_gks(instance: ParityInstance, oracle: BitOracle | None = None) -> tuple:
    """GKS table of ``(1/2) D[L_s]`` assembled entry by entry.

    ``A_{(k,l),(k',l')} = (1/4) <k|L|l> <k'|L|l'>^*``.  Each nonzero entry
    needs the bits for the chain levels of ``l`` and ``l'``: two queries.
    Returns ``(gks, oracle, entries)``.
    """
    N = instance.N
    oracle = oracle or BitOracle(instance.s)
    g = OvercompleteGKS(2 * (N + 1))
    cols = [(n, j) for j in range(2) for n in range(1, N + 1)]
    entries = 0
    for a, (n, j) in enumerate(cols):
        for n2, j2 in cols[a:]:
            sn, sn2 = oracle(n), oracle(n2)
            l, lp = parity_index(N, n, j), parity_index(N, n2, j2)
            k, kp = parity_index(N, n - 1, j ^ sn), parity_index(N, n2 - 1, j2 ^ sn2)
            g.set(k, l, kp, lp, 0.25)
            entries += 1
    return g, oracle, entries


def parity_operator(instance: ParityInstance) -> np.ndarray:
    N = instance.N
    L = np.zeros((2 * (N + 1), 2 * (N + 1)), dtype=complex)
    for n in range(1, N + 1):
        for j in range(2):
            L[parity_index(N, n - 1, j ^ int(instance.s[n - 1])), parity_index(N, n, j)] = 1
    return L


def parity_run(instance: ParityInstance, t: float | None = None) -> dict:
    """Evolve ``|N,0><N,0|`` for ``t = 4N`` and read the ancilla by majority."""
    N = instance.N
    t = 4 * N if t is None else float(t)
    gks, oracle, entries = parity_gks(instance)
    channel = exact_channel(gks, t)
    D = 2 * (N + 1)
    rho0 = np.zeros((D, D))
    rho0[parity_index(N, N, 0), parity_index(N, N, 0)] = 1
    pops = np.clip(np.real(np.diag(channel.apply(rho0))), 0, None)
    anc = np.array([pops[: N + 1].sum(), pops[N + 1:].sum()])
    readout = int(np.argmax(anc))
    return {
        "N": N,
        "t": t,
        "s": instance.s,
        "parity": instance.parity,
        "readout": readout,
        "success_prob": float(anc[instance.parity]),
        "ground_parity_prob": float(pops[parity_index(N, 0, instance.parity)]),
        "queries": oracle.queries,
        "entries": entries,
        "max_queries_per_entry": 2,
    }


# ---------------------------------------------------------------- norm witness


def diamond_norm_witness_check(N: int, samples: int = 100, seed=0, model: LindbladModel | None = None) -> dict:
    """``||L(|N><N|)||_1`` and sampled ``||(L (x) I)(psi)||_1`` on system (x) reference."""
    model = chain_model(N) if model is None else model
    D = model.dim
    gen = liouvillian(model)
    top = np.zeros((D, D))
    top[-1, -1] = 1
    witness = one_to_one_norm_witness(gen, top)
    rng = rng_from(seed)
    S = gen.matrix
    values = []
    for _ in range(samples):
        psi = random_pure_state(rng, D * D).reshape(D, D)  # [system, reference]
        out = np.zeros((D * D, D * D), dtype=complex)
        # apply the generator blockwise over reference matrix units
        for r in range(D):
            for c in range(D):
                block = np.outer(psi[:, r], psi[:, c].conj())
                img = (S @ block.reshape(-1, order="F")).reshape(D, D, order="F")
                out[r::D, c::D] = img
        values.append(trace_norm(out))
    max_sampled = float(max(values)) if values else 0.0
    return {
        "N": N,
        "witness": float(witness),
        "max_sampled": max_sampled,
        "samples": samples,
        "pass": abs(witness - 2) < 1e-12 and max_sampled <= 2 + 1e-9,
    }
