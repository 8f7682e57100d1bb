"""Second-order (Strang) product formulas for Lindbladian semigroups."""
from __future__ import annotations

import csv
import io
import math
import time
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .lindblad import (
    QuantumChannel,
    Superoperator,
    choi_distance,
    exact_channel,
    liouvillian,
)

TRACE_TOL = 1e-9
CSV_COLUMNS = ("r", "error_lower", "error_upper", "wall_seconds")

# Orders above two would need negative step coefficients, which break complete positivity.
MAX_ORDER = 2


@dataclass
class GeneratorList:
    generators: list
    labels: list = field(default_factory=list)

    def __post_init__(self):
        gens = [liouvillian(g) for g in self.generators]
        if not gens:
            raise ValidationError("at least one generator is required")
        dims = {g.dim for g in gens}
        if len(dims) != 1:
            raise ValidationError(f"generator dimensions differ: {sorted(dims)}")
        for i, g in enumerate(gens):
            if g.trace_defect() > TRACE_TOL * max(1.0, np.abs(g.matrix).max()):
                raise ValidationError(f"generator {i} does not annihilate the trace")
        self.generators = gens
        if not self.labels:
            self.labels = [f"L{i}" for i in range(len(gens))]
        if len(self.labels) != len(gens):
            raise ValidationError("one label per generator is required")

    @property
    def dim(self) -> int:
        return self.generators[0].dim

    @property
    def m(self) -> int:
        return len(self.generators)

    def total(self) -> Superoperator:
        S = self.generators[0]
        for g in self.generators[1:]:
            S = S + g
        return S

    def norm_surrogate(self) -> float:
        """``max_i ||J(L_i)||_1``, an upper bound on each diamond norm."""
        return max(g.choi_upper_norm() for g in self.generators)


def _as_list(gens) -> GeneratorList:
    return gens if isinstance(gens, GeneratorList) else GeneratorList(list(gens))


def strang_product(factories: Sequence, t: float, r: int) -> QuantumChannel:
    """Symmetric product of channel families ``tau -> E_i(tau)`` with ``tau = t / 2r``.

    Each of the ``r`` steps applies ``E_1 ... E_m`` then ``E_m ... E_1``.
    """
    if int(r) != r or r < 1:
        raise ValidationError(f"r must be a positive integer, got {r}")
    if t < 0:
        raise ValidationError(f"t must be nonnegative, got {t}")
    if not factories:
        raise ValidationError("at least one factor is required")
    tau = t / (2 * r)
    factors = [f(tau) for f in factories]
    step = factors[0]
    for f in factors[1:] + factors[::-1]:
        step = step.then(f)
    return step.power(int(r))


def strang_step(gens, t: float, r: int) -> QuantumChannel:
    """``(prod_i e^{t L_i/2r} prod_{j reversed} e^{t L_j/2r})^r`` with exact factors."""
    gens = _as_list(gens)
    return strang_product([lambda tau, g=g: exact_channel(g, tau, check=False) for g in gens.generators], t, r)


def required_steps(m: int, t: float, L: float, eps: float) -> int:
    """Smallest ``r >= 25 (m t L)^{3/2} / sqrt(eps)``, at least 1."""
    if not 0 < eps <= 1:
        raise ValidationError(f"eps must lie in (0, 1), got {eps}")
    if m < 1 or t < 0 or L < 0:
        raise ValidationError("m must be positive and t, L nonnegative")
    bound = 25 * (m * t * L) ** 1.5 / math.sqrt(eps)
    # guard against ceil of values like 2000.0000000000002
    return max(1, math.ceil(bound * (1 - 1e-12)))


@dataclass
class ConvergenceRow:
    r: int
    error_lower: float
    error_upper: float
    wall_seconds: float


@dataclass
class ConvergenceTable:
    rows: list
    slope: float | None

    def to_csv(self, header: dict | None = None) -> str:
        return rows_to_csv(self.rows, header)


def fit_slope(xs: Sequence[float], ys: Sequence[float], floor: float = 1e-15) -> float | None:
    """Least-squares slope of ``log y`` against ``log x``; None when errors vanish."""
    pts = [(x, y) for x, y in zip(xs, ys) if y > floor]
    if len(pts) < 2:
        return None
    lx, ly = np.log([p[0] for p in pts]), np.log([p[1] for p in pts])
    return float(np.polyfit(lx, ly, 1)[0])


def convergence_study(gens, t: float, r_grid: Sequence[int], reference: QuantumChannel | None = None) -> ConvergenceTable:
    gens = _as_list(gens)
    r_grid = [int(r) for r in r_grid]
    if any(b <= a for a, b in zip(r_grid, r_grid[1:])):
        raise ValidationError("r_grid must be strictly ascending")
    if reference is None:
        reference = exact_channel(gens.total(), t, check=False)
    rows = []
    for r in r_grid:
        t0 = time.perf_counter()
        dist = choi_distance(strang_step(gens, t, r), reference)
        rows.append(ConvergenceRow(r, dist.lower, dist.upper, time.perf_counter() - t0))
    return ConvergenceTable(rows, fit_slope([row.r for row in rows], [row.error_lower for row in rows]))


def rows_to_csv(rows, header: dict | None = None, columns: Sequence[str] = CSV_COLUMNS) -> str:
    """CSV text with optional ``# key: value`` comment lines first."""
    buf = io.StringIO()
    for k, v in (header or {}).items():
        buf.write(f"# {k}: {v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        vals = [getattr(row, c) if not isinstance(row, dict) else row[c] for c in columns]
        w.writerow([format(v, ".17g") if isinstance(v, float) else v for v in vals])
    return buf.getvalue()
