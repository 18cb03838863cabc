"""Error measurement engine, bound formulas, and batch generators."""

import numpy as np
import pytest

from corrq import harness as hz
from corrq import scalar_quant as sq
from corrq import vector_quant as vq
from corrq.randomness import build_context, derive_key, trial_seeds
from corrq.scalar_quant import ScalarBatch
from corrq.vector_quant import VectorBatch


class TestBoundFormulas:
    def test_one_bit_envelope_value(self):
        assert hz.one_bit_envelope(0.01, 1.0, 100) == pytest.approx(
            3 * 0.01 / 100 + 12 / 100**2
        )
        assert hz.one_bit_envelope(0.0, 2.0, 10) == pytest.approx(48 / 100)

    def test_k_level_envelope_value(self):
        # concentrated regime: sigma term is the smaller branch
        got = hz.k_level_envelope(0.01, 1.0, 100, 8)
        assert got == pytest.approx((12 / 100) * (0.01 / 8) + 48 / (100**2 * 64))
        # diffuse regime: width term wins
        got = hz.k_level_envelope(0.5, 1.0, 10, 32)
        assert got == pytest.approx(
            (12 / 10) * (1 / 32**2) + 48 / (10**2 * 32**2)
        )
        with pytest.raises(ValueError):
            hz.k_level_envelope(0.01, 1.0, 10, 2)

    def test_floor_values(self):
        assert hz.one_bit_floor(0.01, 1.0, 10_000) == pytest.approx(
            0.01 / (64 * 10_000)
        )
        assert hz.k_level_floor(1.0, 10, 4) == pytest.approx(
            1 / (64 * 100 * 16)
        )

    def test_vector_envelope_value(self):
        d, k, n, r, sig = 16, 8, 100, 2.0, 0.05
        per_coord_sigma_sum = np.sqrt(d) * sig
        lead = (12 / n) * min(
            per_coord_sigma_sum * 2 * r / k, d * (2 * r) ** 2 / k**2
        )
        tail = 48 * d * (2 * r) ** 2 / (n**2 * k**2)
        assert hz.vector_envelope(sig, r, n, d, k) == pytest.approx(lead + tail)

    def test_hadamard_bias_bound_uses_padded_dimension(self):
        m = 16
        expected = 18 * 4.0 * np.log(m * 10) / (m**3 * 10**4)
        assert hz.hadamard_bias_bound(2.0, 9, 10) == pytest.approx(expected)
        assert hz.hadamard_bias_bound(2.0, 16, 10) == pytest.approx(expected)


class TestGenerators:
    def test_uniform_mean_shape_and_determinism(self):
        a = hz.gen_uniform_mean(20, 6, 0.01, seed=5)
        b = hz.gen_uniform_mean(20, 6, 0.01, seed=5)
        c = hz.gen_uniform_mean(20, 6, 0.01, seed=6)
        assert a.vectors.shape == (20, 6)
        assert np.array_equal(a.vectors, b.vectors)
        assert not np.array_equal(a.vectors, c.vectors)

    def test_sparse_mean_support(self):
        b = hz.gen_sparse_mean(10, 200, 0.001, sparsity=0.05, seed=3,
                               magnitude=2.0)
        mu = b.mean()
        assert np.count_nonzero(np.abs(mu) > 1.0) == 10  # 5% of 200
        assert b.vectors.shape == (10, 200)

    def test_lower_bound_1bit_concentration(self):
        g = hz.gen_lower_bound_1bit(1000, 1.0, 0.01, seed=9)
        stats = sq.concentration_stats(g)
        assert 0 < stats.sigma_md <= 4 * 0.01
        assert g.values.min() >= 0 and g.values.max() <= 1

    def test_lower_bound_1bit_zero_sigma(self):
        g = hz.gen_lower_bound_1bit(8, 2.0, 0.0, seed=1)
        assert np.all(g.values == 1.0)

    def test_lower_bound_klevel_variants(self):
        for variant in ("mixture", "constant"):
            g = hz.gen_lower_bound_klevel(
                100, 1.0, 4, 0.01, variant=variant, seed=2
            )
            assert g.values.min() >= 0 and g.values.max() <= 1

    def test_constant_grid_batches(self):
        batches = hz.constant_grid_batches(10, 1.0, 4)
        assert len(batches) == 2 * 10 * 4
        for j, b in enumerate(batches):
            assert np.all(b.values == j / (2 * 10 * 4))

    def test_scalar_uniform_mean_range_guard(self):
        b = hz.gen_scalar_uniform_mean(50, 0.01, seed=1)
        assert b.values.min() >= 0 and b.values.max() <= 1
        with pytest.raises(ValueError):
            hz.gen_scalar_uniform_mean(50, 0.2, seed=1)  # 8 sigma > width

    def test_generate_dispatch_and_validation(self):
        spec = hz.SyntheticSpec(kind="uniform-mean", n=5, d=3)
        out = hz.generate(spec, seed=0)
        assert isinstance(out, VectorBatch)
        scalar_spec = hz.SyntheticSpec(kind="lower-bound-1bit", n=5)
        assert isinstance(hz.generate(scalar_spec, seed=0), ScalarBatch)
        with pytest.raises(ValueError):
            hz.SyntheticSpec(kind="nope", n=5)


class TestRunDme:
    def test_exactness_on_own_grid(self):
        for s in range(9):
            batch = ScalarBatch(np.full(8, s / 8), 0.0, 1.0)
            rep = hz.run_dme(batch, "correlated-1bit", trials=100, seed=s)
            assert rep.mse == 0.0

    def test_toy_closed_form_one_point(self):
        x = 0.3
        batch = ScalarBatch(np.array([x, x]), 0.0, 1.0)
        ri = hz.run_dme(batch, "independent", trials=100_000, seed=7)
        rc = hz.run_dme(batch, "correlated-1bit", trials=100_000, seed=7)
        assert abs(ri.mse - x * (1 - x) / 2) < 4 * ri.stderr
        assert abs(rc.mse - (x / 2 + max(x - 0.5, 0) - x * x)) < 4 * rc.stderr

    def test_engine_matches_reference_ops_scalar(self):
        batch = ScalarBatch(np.array([0.13, 0.55, 0.62, 0.91, 0.08]), 0.0, 1.0)
        for scheme, k in (("correlated-1bit", 2), ("correlated-klevel", 5)):
            prep = hz._prepare(batch, scheme, k)
            seeds = trial_seeds(202, 5)
            est, idx, scales, clips = hz._evaluate_chunk(prep, scheme, seeds)
            for t in range(5):
                ctx = build_context(int(seeds[t]), n=5, d=1, k=k)
                op = (
                    sq.one_bit_cq(batch, ctx)
                    if k == 2
                    else sq.k_level_cq(batch, ctx)
                )
                assert np.array_equal(idx[t, 0], op.level_indices), (scheme, t)
                assert est[t, 0] == op.estimate, (scheme, t)

    def test_engine_matches_reference_ops_vector(self):
        rng = np.random.default_rng(5)
        batch = VectorBatch.from_vectors(rng.normal(size=(6, 8)))
        cases = {
            "correlated-klevel": lambda b, c: vq.correlated_vector_cq(b, c, k=4),
            "entropy-cq": lambda b, c: vq.entropy_cq(b, c, k=4),
            "hadamard-cq": lambda b, c: vq.walsh_hadamard_cq(b, c, k=4),
        }
        for scheme, op in cases.items():
            prep = hz._prepare(batch, scheme, 4)
            seeds = trial_seeds(31, 3)
            est, idx, scales, clips = hz._evaluate_chunk(prep, scheme, seeds)
            for t in range(3):
                ctx = build_context(int(seeds[t]), n=6, d=prep.dp, k=4)
                rep = op(batch, ctx)
                assert np.array_equal(idx[t].T, rep.level_indices), scheme
                assert np.allclose(est[t], rep.estimate, atol=1e-12), scheme

    def test_error_decomposition_and_bits(self):
        rng = np.random.default_rng(5)
        batch = VectorBatch.from_vectors(rng.normal(size=(8, 8)))
        expected_bits = {
            "correlated-1bit": 216 + 8,
            "correlated-klevel": 216 + 16,
            "hadamard-cq": 216 + 16,
            "independent": 216 + 16,
            "independent-rotation": 216 + 16,
            "terngrad": 216 + 16 + 64,
            "rotate-sign": 216 + 8 + 64,
        }
        for scheme in hz.SCHEMES:
            k = 2 if scheme == "correlated-1bit" else 4
            rep = hz.run_dme(batch, scheme, trials=400, seed=13, k=k)
            assert abs(rep.mse - rep.bias_sq - rep.mean_variance) <= 1e-9 * max(
                1.0, rep.mse
            )
            if scheme in expected_bits:
                assert rep.bits_per_client == expected_bits[scheme], scheme
            else:
                assert rep.bits_per_client > 216  # entropy-cq is variable

    def test_unbiased_schemes_have_tiny_bias(self):
        rng = np.random.default_rng(5)
        batch = VectorBatch.from_vectors(rng.normal(size=(8, 8)))
        rep = hz.run_dme(batch, "correlated-klevel", trials=20_000, seed=3, k=4)
        assert rep.bias_sq < 16 * rep.mean_variance / 20_000

    def test_reproducible_and_chunk_invariant(self):
        rng = np.random.default_rng(5)
        batch = VectorBatch.from_vectors(rng.normal(size=(8, 8)))
        a = hz.run_dme(batch, "hadamard-cq", trials=300, seed=99, k=4)
        b = hz.run_dme(batch, "hadamard-cq", trials=300, seed=99, k=4)
        c = hz.run_dme(
            batch, "hadamard-cq", trials=300, seed=99, k=4,
            chunk_elements=1 << 8,
        )
        assert a == b == c

    def test_synthetic_spec_input_equals_pregenerated_batch(self):
        spec = hz.SyntheticSpec(kind="uniform-mean", n=10, d=4, sigma_md=0.02)
        via_spec = hz.run_dme(spec, "correlated-1bit", trials=50, seed=8)
        batch = hz.generate(spec, derive_key(8, "data"))
        via_batch = hz.run_dme(batch, "correlated-1bit", trials=50, seed=8)
        assert via_spec == via_batch

    def test_validation(self):
        batch = ScalarBatch(np.array([0.5, 0.6]), 0.0, 1.0)
        with pytest.raises(ValueError):
            hz.run_dme(batch, "no-such-scheme", trials=1, seed=0)
        with pytest.raises(ValueError):
            hz.run_dme(batch, "hadamard-cq", trials=1, seed=0)
        with pytest.raises(ValueError):
            hz.run_dme(batch, "correlated-1bit", trials=0, seed=0)
        with pytest.raises(ValueError):
            hz.run_dme(batch, "correlated-1bit", trials=1, seed=0, k=4)
        with pytest.raises(ValueError):
            hz.run_dme(batch, "independent", trials=1, seed=0, k=1)

    def test_envelope_holds_on_random_batches(self):
        for i, (n, sig) in enumerate([(10, 0.01), (100, 0.005)]):
            b = hz.gen_scalar_uniform_mean(n, sig, seed=3000 + i)
            stats = sq.concentration_stats(b)
            r1 = hz.run_dme(b, "correlated-1bit", trials=2000, seed=50 + i)
            assert r1.mse <= hz.one_bit_envelope(stats.sigma_md, b.width, n)
            r2 = hz.run_dme(b, "correlated-klevel", trials=2000, seed=60 + i,
                            k=8)
            assert r2.mse <= hz.k_level_envelope(stats.sigma_md, b.width, n, 8)


class TestSweepAndCsv:
    def test_csv_header_and_round_trip(self):
        assert hz.CSV_COLUMNS == (
            "scheme", "n", "d", "k", "sigma_md", "trials", "mse", "rmse",
            "bias_sq", "bits_per_client", "stderr",
        )
        batch = ScalarBatch(np.array([0.2, 0.7]), 0.0, 1.0)
        rep = hz.run_dme(batch, "correlated-1bit", trials=10, seed=0)
        text = hz.reports_to_csv([rep])
        header, row = text.strip().split("\n")
        assert header == ",".join(hz.CSV_COLUMNS)
        fields = row.split(",")
        assert fields[0] == "correlated-1bit"
        assert float(fields[6]) == rep.mse  # repr round-trips exactly

    def test_sweep_pairs_schemes_and_orders_grid_major(self):
        base = hz.SyntheticSpec(kind="uniform-mean", n=100, d=8, sigma_md=0.01)
        reps = hz.sweep(
            "sigma_md", [0.002, 0.02], base,
            ["correlated-1bit", "independent"], trials=200, seed=4242,
        )
        assert [r.scheme for r in reps] == [
            "correlated-1bit", "independent",
        ] * 2
        # paired seeds: both schemes see the same batch, so the same
        # realized concentration
        assert reps[0].sigma_md == reps[1].sigma_md
        assert reps[0].rmse < reps[1].rmse
        assert reps[2].rmse < reps[3].rmse

    def test_sweep_axis_k_and_n(self):
        base = hz.SyntheticSpec(kind="uniform-mean", n=100, d=8, sigma_md=0.01)
        by_k = hz.sweep("k", [2, 8], base, ["correlated-klevel"], trials=150,
                        seed=1)
        assert by_k[0].k == 2 and by_k[1].k == 8
        assert by_k[1].rmse < by_k[0].rmse
        by_n = hz.sweep("n", [10, 100], base, ["correlated-1bit"], trials=150,
                        seed=2)
        assert by_n[0].n == 10 and by_n[1].n == 100
        assert by_n[1].rmse < by_n[0].rmse

    def test_sweep_reproducible(self):
        base = hz.SyntheticSpec(kind="uniform-mean", n=10, d=4, sigma_md=0.01)
        args = ("sigma_md", [0.01], base, ["correlated-1bit"], 50, 7)
        assert hz.reports_to_csv(hz.sweep(*args)) == hz.reports_to_csv(
            hz.sweep(*args)
        )

    def test_sweep_validation(self):
        base = hz.SyntheticSpec(kind="uniform-mean", n=10, d=4)
        with pytest.raises(ValueError):
            hz.sweep("bogus", [1], base, ["independent"], 10, 0)
        with pytest.raises(ValueError):
            hz.sweep("n", [], base, ["independent"], 10, 0)
        with pytest.raises(ValueError):
            hz.sweep("n", [10], base, [], 10, 0)
