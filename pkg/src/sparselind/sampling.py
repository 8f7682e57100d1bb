"""Random instance generators used by tests, the CLI and the acceptance suite."""
from __future__ import annotations

import numpy as np


def rng_from(seed=None) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def random_complex(rng, shape, scale: float = 1.0) -> np.ndarray:
    rng = rng_from(rng)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_hermitian(rng, n: int, scale: float = 1.0) -> np.ndarray:
    X = random_complex(rng, (n, n), scale)
    return 0.5 * (X + X.conj().T)


def random_psd(rng, n: int, rank: int | None = None) -> np.ndarray:
    X = random_complex(rng, (n, rank or n))
    return X @ X.conj().T


def random_density(rng, n: int, rank: int | None = None) -> np.ndarray:
    P = random_psd(rng, n, rank)
    return P / np.trace(P).real


def random_pure_state(rng, n: int) -> np.ndarray:
    v = random_complex(rng, n)
    return v / np.linalg.norm(v)


def random_unitary(rng, n: int) -> np.ndarray:
    Q, R = np.linalg.qr(random_complex(rng, (n, n)))
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def random_permutation(rng, n: int) -> np.ndarray:
    return rng_from(rng).permutation(n)


def random_involution(rng, n: int, fixed_points: bool = True) -> np.ndarray:
    """Random involution on ``[n]``; with ``fixed_points=False`` ``n`` must be even."""
    rng = rng_from(rng)
    perm = rng.permutation(n)
    nu = np.arange(n)
    npairs = n // 2 if not fixed_points else int(rng.integers(0, n // 2 + 1))
    for i in range(npairs):
        a, b = perm[2 * i], perm[2 * i + 1]
        nu[a], nu[b] = b, a
    return nu
