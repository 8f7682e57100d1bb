import numpy as np
import pytest
import specgen

from sparselind import LindbladModel, ValidationError, choi_distance, exact_channel
from sparselind.classes import DiagonalSpec
from sparselind.lindblad import Superoperator, liouvillian
from sparselind.product import (
    CSV_COLUMNS,
    MAX_ORDER,
    ConvergenceRow,
    GeneratorList,
    convergence_study,
    fit_slope,
    required_steps,
    rows_to_csv,
    strang_product,
    strang_step,
)
from sparselind.sampling import random_complex, random_hermitian


def random_pair(rng, N=3):
    """Two non-commuting generators."""
    A = LindbladModel(N, random_hermitian(rng, N), [random_complex(rng, (N, N), 0.5)])
    B = LindbladModel(N, None, [random_complex(rng, (N, N), 0.5)])
    return GeneratorList([A, B])


class TestGeneratorList:
    def test_dim_mismatch(self):
        with pytest.raises(ValidationError):
            GeneratorList([LindbladModel(2), LindbladModel(3)])

    def test_trace_annihilation_checked(self):
        bad = Superoperator(2, np.eye(4))
        with pytest.raises(ValidationError):
            GeneratorList([bad])

    def test_empty(self):
        with pytest.raises(ValidationError):
            GeneratorList([])

    def test_labels_and_total(self, rng):
        gens = random_pair(rng)
        assert gens.labels == ["L0", "L1"]
        S = liouvillian(gens.generators[0]).matrix + liouvillian(gens.generators[1]).matrix
        assert np.allclose(gens.total().matrix, S)
        assert gens.norm_surrogate() > 0


class TestStrang:
    def test_single_generator_exact(self, rng):
        gens = GeneratorList([random_pair(rng).generators[0]])
        ref = exact_channel(gens.total(), 1.0)
        for r in (1, 3):
            assert choi_distance(strang_step(gens, 1.0, r), ref).upper < 1e-12

    def test_commuting_exact(self, rng):
        a = np.zeros((4, 4))
        a[1, 0], a[3, 2] = 0.6, 0.9
        p1, p2 = a.copy(), a.copy()
        p1[3, 2], p2[1, 0] = 0, 0
        gens = GeneratorList([DiagonalSpec(4, p1).gks(), DiagonalSpec(4, p2).gks()])
        assert choi_distance(strang_step(gens, 1.0, 1), exact_channel(gens.total(), 1.0)).upper < 1e-12

    def test_strongly_1sparse_pair_ratio(self, rng):
        while True:
            a, b = specgen.strongly_1sparse(rng, 4), specgen.strongly_1sparse(rng, 4)
            gens = GeneratorList([a.gks(), b.gks()])
            ref = exact_channel(gens.total(), 1.0)
            e4 = choi_distance(strang_step(gens, 1.0, 4), ref).lower
            if e4 > 1e-8:
                break
        e8 = choi_distance(strang_step(gens, 1.0, 8), ref).lower
        assert e8 < e4
        assert e4 / e8 == pytest.approx(4, rel=0.3)

    def test_cptp_every_r(self, rng):
        gens = random_pair(rng)
        for r in (1, 2, 5):
            strang_step(gens, 0.7, r).check_cptp(1e-9)

    def test_factor_order(self, rng):
        gens = random_pair(rng)
        tau = 0.3
        fs = [exact_channel(g, tau / 2) for g in gens.generators]
        forward = fs[0].then(fs[1]).then(fs[1]).then(fs[0])
        assert choi_distance(strang_step(gens, tau, 1), forward).upper < 1e-12

    def test_reversed_list_same_order(self, rng):
        gens = random_pair(rng)
        rev = GeneratorList(gens.generators[::-1])
        ref = exact_channel(gens.total(), 1.0)
        s1 = fit_slope([4, 8, 16], [choi_distance(strang_step(gens, 1.0, r), ref).lower for r in (4, 8, 16)])
        s2 = fit_slope([4, 8, 16], [choi_distance(strang_step(rev, 1.0, r), ref).lower for r in (4, 8, 16)])
        assert s1 == pytest.approx(-2, abs=0.3)
        assert s2 == pytest.approx(-2, abs=0.3)

    def test_validation(self, rng):
        gens = random_pair(rng)
        with pytest.raises(ValidationError):
            strang_step(gens, 1.0, 0)
        with pytest.raises(ValidationError):
            strang_step(gens, -1.0, 1)
        with pytest.raises(ValidationError):
            strang_product([], 1.0, 1)

    def test_order_cap(self):
        assert MAX_ORDER == 2


class TestRequiredSteps:
    def test_constant(self):
        assert required_steps(1, 1.0, 1.0, 1.0) == 25

    def test_degenerate(self):
        assert required_steps(3, 0.0, 1.0, 0.5) == 1

    def test_arithmetic(self):
        assert required_steps(4, 2.0, 0.5, 0.01) == 2000

    def test_eps_range(self):
        for eps in (0.0, -1.0, 2.0):
            with pytest.raises(ValidationError):
                required_steps(1, 1.0, 1.0, eps)

    def test_guarantee(self, rng):
        gens = random_pair(rng, 2)
        eps = 1e-2
        r = required_steps(gens.m, 1.0, gens.norm_surrogate(), eps)
        err = choi_distance(strang_step(gens, 1.0, r), exact_channel(gens.total(), 1.0)).lower
        assert err <= eps


class TestConvergence:
    def test_exact_rows(self, rng):
        gens = GeneratorList([random_pair(rng).generators[1]])
        table = convergence_study(gens, 1.0, [1, 2, 4])
        assert all(row.error_lower < 1e-13 for row in table.rows)
        assert table.slope is None

    def test_slope(self, rng):
        table = convergence_study(random_pair(rng), 1.0, [4, 8, 16, 32])
        assert table.slope == pytest.approx(-2, abs=0.3)
        for row in table.rows:
            assert row.error_lower <= row.error_upper

    def test_grid_order(self, rng):
        with pytest.raises(ValidationError):
            convergence_study(random_pair(rng), 1.0, [4, 2])

    def test_csv(self):
        rows = [ConvergenceRow(1, 0.1, 0.2, 0.5), ConvergenceRow(2, 1 / 3, 0.4, 0.25)]
        text = rows_to_csv(rows, {"t": 1})
        lines = text.splitlines()
        assert lines[0] == "# t: 1"
        assert lines[1] == ",".join(CSV_COLUMNS)
        assert lines[3].split(",")[1] == "0.33333333333333331"
        assert float(lines[3].split(",")[1]) == 1 / 3

    def test_fit_slope(self):
        assert fit_slope([1, 2, 4], [1, 0.25, 0.0625]) == pytest.approx(-2)
        assert fit_slope([1, 2], [0, 0]) is None
