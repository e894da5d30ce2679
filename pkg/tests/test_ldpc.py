import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from onebit_mimo.exceptions import ConstructionError, InvalidInputError
from onebit_mimo.harness import ExperimentSpec, run_point
from onebit_mimo.ldpc import (
    _gf2_rref,
    _has_four_cycle,
    build_code,
    decode_spa,
    encode,
    read_alist,
    syndrome,
    write_alist,
)


@pytest.fixture(scope="module")
def code():
    return build_code(512, 0.5, 3, seed=0)


def _gf2_rank(H):
    return len(_gf2_rref(H.copy())[1])


class TestConstruction:
    def test_dimensions_and_weights(self, code):
        assert code.H_pc.shape == (256, 512)
        assert code.n == 512 and code.k == 256 and code.rate == 0.5
        assert np.all(code.H_pc.sum(axis=0) == 3)
        assert np.all(code.H_pc.sum(axis=1) == 6)
        assert code.row_weight == 6

    def test_independent_checks(self, code):
        # independent rank computation by numpy-free elimination over GF(2)
        rows = [int("".join(map(str, r)), 2) for r in code.H_pc]
        basis = []
        for r in rows:
            for b in basis:
                r = min(r, r ^ b)
            if r:
                basis.append(r)
        assert len(basis) == 256 == 512 * (1 - 0.5)

    def test_no_four_cycles(self, code):
        overlap = code.H_pc.astype(int) @ code.H_pc.T.astype(int)
        np.fill_diagonal(overlap, 0)
        assert overlap.max() <= 1
        assert not _has_four_cycle(code.H_pc)

    def test_generator_orthogonal(self, code):
        assert not np.any((code.G.astype(int) @ code.H_pc.T.astype(int)) % 2)

    def test_systematic(self, code, rng):
        u = rng.integers(0, 2, code.k)
        np.testing.assert_array_equal(encode(code, u)[code.info_positions], u)

    def test_deterministic(self, code):
        again = build_code(512, 0.5, 3, seed=0)
        np.testing.assert_array_equal(code.H_pc, again.H_pc)
        np.testing.assert_array_equal(code.G, again.G)
        assert not np.array_equal(code.H_pc, build_code(512, 0.5, 3, seed=1).H_pc)

    def test_other_rates(self):
        c = build_code(96, 0.5, 3, seed=4)
        assert c.k == 48 and _gf2_rank(c.H_pc) == 48
        c = build_code(240, 0.75, 3, seed=2)
        assert c.k == 180 and np.all(c.H_pc.sum(axis=1) == 12)

    @pytest.mark.parametrize("args", [(100, 0.33, 3), (512, 1.0, 3), (512, 0.5, 0), (16, 0.5, 9)])
    def test_invalid_parameters(self, args):
        with pytest.raises(InvalidInputError):
            build_code(*args)

    def test_bounded_retries(self):
        with pytest.raises(ConstructionError, match="seed=0"):
            build_code(10, 0.5, 4, seed=0, max_tries=3)


class TestDecoding:
    def test_noiseless(self, code, rng):
        c = encode(code, rng.integers(0, 2, code.k))
        res = decode_spa(code, 60.0 * (1 - 2.0 * c))
        np.testing.assert_array_equal(res.bits, c)
        assert res.syndrome_ok and res.iterations_used in (0, 1)

    def test_single_erasure(self, code, rng):
        c = encode(code, rng.integers(0, 2, code.k))
        for pos in rng.choice(code.n, 20, replace=False):
            llr = 60.0 * (1 - 2.0 * c)
            llr[pos] = 0.0
            # brute force: exactly one value of the erased bit satisfies every check
            completions = []
            for b in (0, 1):
                trial = c.copy()
                trial[pos] = b
                if not syndrome(code, trial).any():
                    completions.append(b)
            assert completions == [c[pos]]
            res = decode_spa(code, llr)
            np.testing.assert_array_equal(res.bits, c)
            assert res.syndrome_ok and res.iterations_used <= 5

    def test_all_zero_llrs(self, code):
        res = decode_spa(code, np.zeros(code.n), max_iter=10)
        assert res.bits.shape == (code.n,)
        assert res.syndrome_ok == (not syndrome(code, res.bits).any())

    def test_syndrome_flag_consistent(self, code, rng):
        llr = rng.normal(0.5, 2.0, (30, code.n))
        res = decode_spa(code, llr, max_iter=5)
        np.testing.assert_array_equal(res.syndrome_ok, ~syndrome(code, res.bits).any(axis=1))

    def test_round_trip_many(self, code, rng):
        U = rng.integers(0, 2, (1000, code.k))
        C = encode(code, U)
        res = decode_spa(code, 20.0 * (1 - 2.0 * C))
        np.testing.assert_array_equal(res.bits[:, code.info_positions], U)
        assert res.syndrome_ok.all()

    def test_corrects_awgn_errors(self, code, rng):
        C = encode(code, rng.integers(0, 2, (20, code.k)))
        s = 1 - 2.0 * C
        sigma2 = 0.5
        r = s + np.sqrt(sigma2) * rng.standard_normal(s.shape)
        llr = 2 * r / sigma2
        raw_errors = np.sum((llr < 0) != C)
        res = decode_spa(code, llr)
        assert raw_errors > 0 and np.sum(res.bits != C) == 0

    def test_batch_matches_single(self, code, rng):
        llr = rng.normal(1.0, 2.0, (5, code.n))
        batch = decode_spa(code, llr)
        for b in range(5):
            one = decode_spa(code, llr[b])
            np.testing.assert_array_equal(one.bits, batch.bits[b])
            assert one.iterations_used == batch.iterations_used[b]

    def test_row_permutation_invariance(self, code, rng):
        perm = rng.permutation(code.H_pc.shape[0])
        permuted = dataclasses.replace(code, H_pc=code.H_pc[perm])
        C = encode(code, rng.integers(0, 2, (10, code.k)))
        llr = 2 * ((1 - 2.0 * C) + rng.standard_normal(C.shape) * 0.8) / 0.64
        a, b = decode_spa(code, llr), decode_spa(permuted, llr)
        np.testing.assert_array_equal(a.bits, b.bits)
        np.testing.assert_array_equal(a.iterations_used, b.iterations_used)
        np.testing.assert_allclose(a.posterior, b.posterior, rtol=1e-9, atol=1e-9)

    def test_length_mismatch(self, code):
        with pytest.raises(InvalidInputError):
            decode_spa(code, np.zeros(code.n - 1))
        with pytest.raises(InvalidInputError):
            encode(code, np.zeros(code.k + 1))

    def test_nonfinite(self, code):
        llr = np.zeros(code.n)
        llr[3] = np.nan
        with pytest.raises(InvalidInputError):
            decode_spa(code, llr)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(-1e6, 1e6))
    def test_huge_llrs_stay_finite(self, seed, scale):
        code = build_code(96, 0.5, 3, seed=4)
        llr = np.random.default_rng(seed).standard_normal(code.n) * scale
        res = decode_spa(code, llr, max_iter=5)
        assert np.all(np.isfinite(res.posterior))


def test_alist_round_trip(code, tmp_path):
    path = tmp_path / "code.alist"
    write_alist(code, path)
    np.testing.assert_array_equal(read_alist(path), code.H_pc)
    header = path.read_text().splitlines()[:2]
    assert header == ["512 256", "3 6"]


def test_coding_gain():
    common = dict(M=32, K=4, sweep=(6.0,), sweep_axis="ebn0", estimator="perfect-csi",
                  detector="lra-mmse", trials=100, base_seed=5)
    coded = run_point(ExperimentSpec(coded=True, **common), 0)
    uncoded = run_point(ExperimentSpec(coded=False, data_len=256, **common), 0)
    ber_c = sum(r.value for r in coded) / len(coded)
    ber_u = sum(r.value for r in uncoded) / len(uncoded)
    assert ber_u > 0 and ber_c < ber_u
