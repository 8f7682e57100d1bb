import numpy as np
import pytest
from scipy.special import factorial

from sparselind import LindbladModel, ValidationError, exact_channel
from sparselind.lindblad import dissipator_superop, liouvillian
from sparselind.nff import (
    TAIL_BOUND,
    BitOracle,
    ParityInstance,
    chain_model,
    chain_operator,
    diamond_norm_witness_check,
    g_ratio,
    parity_gks,
    parity_operator,
    parity_run,
    poisson_populations,
    poisson_tail,
    tail_bound_check,
)


def top_state(N):
    rho = np.zeros((N + 1, N + 1))
    rho[N, N] = 1
    return rho


def chain_populations(N, t):
    return np.real(np.diag(exact_channel(chain_model(N), t).apply(top_state(N))))


class TestChain:
    def test_two_level(self):
        p = chain_populations(1, 0.8)
        assert p[1] == pytest.approx(np.exp(-0.8), abs=1e-12)

    def test_operator(self):
        L = chain_operator(3)
        assert np.allclose(L @ np.eye(4)[:, 0], 0)
        assert np.allclose(L @ np.eye(4)[:, 2], np.eye(4)[:, 1])

    def test_poisson_law(self):
        N, t = 3, 1.0
        p = chain_populations(N, t)
        for m in range(N):
            assert p[N - m] == pytest.approx(t ** m * np.exp(-t) / factorial(m), abs=1e-12)

    def test_trace(self):
        for t in (0.0, 0.5, 3.0, 20.0):
            assert chain_populations(4, t).sum() == pytest.approx(1, abs=1e-12)

    def test_matches_oracle_grid(self):
        for N in (1, 4, 7, 10):
            for t in (0.5, 5.0, 30.0):
                assert np.abs(chain_populations(N, t) - poisson_populations(N, t)).max() < 1e-10

    def test_validation(self):
        with pytest.raises(ValidationError):
            chain_model(0)


class TestPoisson:
    def test_t_zero(self):
        p = poisson_populations(5, 0.0)
        assert p[5] == 1 and p[:5].sum() == 0

    def test_tail_at_seven(self):
        assert poisson_tail(7, 14.0) <= TAIL_BOUND

    def test_sums_to_one(self):
        for N, t in ((5, 2.0), (50, 100.0), (12, 0.1)):
            assert poisson_populations(N, t).sum() == pytest.approx(1, abs=1e-12)

    def test_large_n_stable(self):
        assert np.isfinite(poisson_tail(50, 100.0))
        assert 0 < poisson_tail(50, 100.0) < TAIL_BOUND

    def test_negative_time(self):
        with pytest.raises(ValidationError):
            poisson_populations(3, -1.0)


class TestTailBound:
    def test_range(self):
        report = tail_bound_check(range(7, 21))
        assert report["pass"]
        tails = [r["tail"] for r in report["rows"]]
        assert all(a > b for a, b in zip(tails, tails[1:]))

    def test_g13(self):
        assert g_ratio(13) == pytest.approx(38.3102, abs=1e-3)
        assert tail_bound_check([7])["g13_pass"]

    def test_below_range_not_asserted(self):
        row = tail_bound_check([6])["rows"][0]
        assert row["asserted"] is False and row["pass"] is None
        assert row["tail"] > 0


class TestParity:
    def test_zero_string(self):
        res = parity_run(ParityInstance(7, "0" * 7))
        assert res["readout"] == 0 and res["success_prob"] >= 63 / 64

    def test_random_strings(self, rng):
        for _ in range(5):
            inst = ParityInstance.random(7, rng)
            res = parity_run(inst)
            assert res["t"] == 28
            assert res["readout"] == inst.parity
            assert res["success_prob"] >= 63 / 64

    def test_single_bit(self):
        assert parity_run(ParityInstance(1, "1"))["readout"] == 1

    def test_query_accounting(self):
        inst = ParityInstance(5, "10110")
        gks, oracle, entries = parity_gks(inst)
        assert oracle.queries <= 2 * entries
        res = parity_run(inst)
        assert res["queries"] <= res["max_queries_per_entry"] * res["entries"]

    def test_generator_has_half_prefactor(self):
        inst = ParityInstance(4, "0110")
        gks, _, _ = parity_gks(inst)
        expected = 0.5 * dissipator_superop(parity_operator(inst))
        assert np.allclose(liouvillian(gks).matrix, expected)

    def test_monotone_in_time(self):
        inst = ParityInstance(6, "110100")
        probs = [parity_run(inst, t)["success_prob"] for t in (2, 6, 12, 24, 48)]
        assert all(b >= a - 1e-12 for a, b in zip(probs, probs[1:]))

    def test_deterministic_random_instance(self):
        assert ParityInstance.random(10, 4).s == ParityInstance.random(10, 4).s

    def test_oracle_counts(self):
        oracle = BitOracle("101")
        assert [oracle(1), oracle(2), oracle(3)] == [1, 0, 1]
        assert oracle.queries == 3

    def test_validation(self):
        with pytest.raises(ValidationError):
            ParityInstance(3, "10")
        with pytest.raises(ValidationError):
            ParityInstance(2, "12")
        with pytest.raises(ValidationError):
            ParityInstance(0, "")


class TestWitness:
    def test_chain_witness(self):
        report = diamond_norm_witness_check(4, samples=100, seed=1)
        assert report["witness"] == pytest.approx(2.0, abs=1e-12)
        assert report["max_sampled"] <= 2 + 1e-9
        assert report["pass"]

    def test_zero_generator(self):
        report = diamond_norm_witness_check(2, samples=5, model=LindbladModel(3))
        assert report["witness"] == 0
