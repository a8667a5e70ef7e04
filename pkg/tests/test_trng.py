import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from memchua.dynamics import Trajectory
from memchua.errors import InsufficientDataError, UsageError
from memchua.trng import (
    BitStream,
    PrerequisiteFailed,
    evaluate,
    extract_bits,
    lsb_policy,
    monobit_test,
    runs_test,
    serial_correlation,
    von_neumann_debias,
)

bit_strings = st.text(alphabet="01", min_size=0, max_size=300)


def alternating(n):
    return BitStream(np.arange(n) % 2)


def trajectory(v1, dt=1e-6):
    v1 = np.asarray(v1, dtype=float)
    samples = np.zeros((len(v1), 4))
    samples[:, 1] = v1
    return Trajectory(0.0, dt, samples, "digest")


class TestDebias:
    @pytest.mark.parametrize("raw, out", [("0110", "01"), ("0000", ""), ("1101", "0"), ("10", "1"), ("1", "")])
    def test_examples(self, raw, out):
        assert von_neumann_debias(BitStream.from_string(raw)).to_string() == out

    def test_marks_metadata(self):
        b = von_neumann_debias(BitStream.from_string("0110", extraction_meta={"debiased": False}))
        assert b.extraction_meta["debiased"] is True

    @given(bit_strings)
    def test_output_length_bounded(self, s):
        assert len(von_neumann_debias(BitStream.from_string(s))) <= len(s) // 2

    def test_removes_bias_of_independent_source(self):
        rng = np.random.default_rng(11)
        raw = BitStream((rng.random(1_000_000) < 0.7).astype(np.uint8))
        assert not evaluate(raw)["monobit"].passed
        clean = von_neumann_debias(raw)
        # expected yield 2 * 0.7 * 0.3 / 2 = 0.21 of the input
        assert len(clean) == pytest.approx(210_000, rel=0.01)
        assert evaluate(clean)["monobit"].passed


class TestMonobit:
    def test_balanced(self):
        s, p = monobit_test(alternating(100))
        assert s == 0 and p == 1.0

    def test_all_ones(self):
        s, p = monobit_test(BitStream(np.ones(100, dtype=np.uint8)))
        assert s == 100
        assert p == pytest.approx(math.erfc(10 / math.sqrt(2)), rel=1e-12)

    @given(st.text(alphabet="01", min_size=100, max_size=400))
    def test_complement_invariant(self, s):
        b = BitStream.from_string(s)
        assert monobit_test(b.complement())[1] == pytest.approx(monobit_test(b)[1], rel=1e-12)

    def test_too_short(self):
        with pytest.raises(InsufficientDataError):
            monobit_test(alternating(99))


class TestRuns:
    def test_alternating(self):
        v, p = runs_test(alternating(20), min_bits=20)
        assert v == 20
        # |20 - 10| / (2 sqrt(40) / 4) = sqrt(10)
        assert p == pytest.approx(math.erfc(math.sqrt(10)), rel=1e-12)
        assert p == pytest.approx(7.7e-6, rel=0.02)

    def test_blocks(self):
        b = BitStream.from_string("0" * 50 + "1" * 50)
        v, p = runs_test(b)
        assert v == 2 and p < 1e-20

    @given(st.lists(st.booleans(), min_size=100, max_size=400))
    def test_complement_invariant(self, bits):
        b = BitStream(np.array(bits, dtype=np.uint8))
        try:
            v, p = runs_test(b)
        except PrerequisiteFailed:
            with pytest.raises(PrerequisiteFailed):
                runs_test(b.complement())
            return
        assert runs_test(b.complement()) == pytest.approx((v, p), rel=1e-12)

    def test_prerequisite(self):
        with pytest.raises(PrerequisiteFailed):
            runs_test(BitStream.from_string("1" * 80 + "0" * 20))


class TestSerialCorrelation:
    def test_alternating(self):
        b = alternating(200)
        assert serial_correlation(b, 1).value == pytest.approx(-1.0)
        assert serial_correlation(b, 2).value == pytest.approx(1.0)
        assert serial_correlation(b, 0).value == pytest.approx(1.0)

    def test_constant_is_degenerate(self):
        c = serial_correlation(BitStream(np.zeros(200, dtype=np.uint8)), 1)
        assert c.degenerate and c.value == 0.0 and c.p_value == 0.0

    def test_too_short(self):
        with pytest.raises(InsufficientDataError):
            serial_correlation(alternating(3), 2)

    def test_independent_bits_small(self):
        rng = np.random.default_rng(5)
        c = serial_correlation(BitStream(rng.integers(0, 2, 100_000)), 1)
        assert abs(c.value) < 0.02 and c.n_pairs == 99_999


class TestExtraction:
    def test_median_ties_map_to_zero(self):
        b = extract_bits(trajectory(np.full(1001, 3.0)), sample_period=1e-5)
        assert not b.bits.any()

    def test_ramp_splits(self):
        b = extract_bits(trajectory(np.linspace(-1, 1, 1001)), sample_period=1e-5)
        assert len(b) == 100
        assert b.to_string() == "0" * 50 + "1" * 50

    @given(st.integers(100, 3000), st.integers(1, 40))
    def test_bit_count(self, n, k):
        if (n - 1) <= 2 * k:
            return
        b = extract_bits(trajectory(np.sin(np.arange(n))), sample_period=k * 1e-6)
        assert len(b) == (n - 1) // k

    def test_metadata(self):
        b = extract_bits(trajectory(np.sin(np.arange(500))), sample_period=1e-5, policy="lsb")
        side = b.sidecar()
        assert side["n_bits"] == len(b) and side["packing"] == "msb-first"
        assert side["source_digest"] == "digest"
        assert side["threshold_policy"].startswith("lsb")
        assert side["debiased"] is False

    def test_lsb_policy_parity(self):
        x = np.array([0.0, 1.0, 2.0, 3.0, -1.0])
        bits = lsb_policy(1.0 / np.std(x))(x)
        assert bits.tolist() == [0, 1, 0, 1, 1]

    def test_callable_policy(self):
        b = extract_bits(trajectory(np.linspace(-1, 1, 101)), sample_period=1e-6, policy=lambda x: x < 0)
        assert b.bits[0] == 1 and b.bits[-1] == 0

    def test_errors(self):
        t = trajectory(np.zeros(100))
        with pytest.raises(UsageError):
            extract_bits(t, sample_period=1e-7)
        with pytest.raises(UsageError):
            extract_bits(t, sample_period=1e-4)
        with pytest.raises(UsageError):
            extract_bits(t, sample_period=1e-6, policy="nope")


class TestEvaluate:
    def test_alternating(self):
        rep = evaluate(alternating(1000))
        assert rep["monobit"].passed
        assert not rep["runs"].passed
        assert not rep.all_passed

    def test_constant(self):
        rep = evaluate(BitStream(np.ones(1000, dtype=np.uint8)))
        assert not rep["monobit"].passed
        assert not rep["runs"].passed and rep["runs"].note
        assert not rep["serial_correlation_lag1"].passed

    def test_short_input_fails_every_test(self):
        rep = evaluate(alternating(10))
        assert all(not t.passed and t.note for t in rep.tests)

    @given(st.text(alphabet="01", min_size=100, max_size=500), st.floats(1e-4, 0.5))
    def test_pass_iff_p_at_least_alpha(self, s, alpha):
        rep = evaluate(BitStream.from_string(s), alpha=alpha)
        for t in rep.tests:
            assert 0.0 <= t.p_value <= 1.0
            if not t.note:
                assert t.passed == (t.p_value >= alpha)

    def test_json_stable(self):
        rng = np.random.default_rng(0)
        b = BitStream(rng.integers(0, 2, 5000))
        a, c = evaluate(b).to_json(), evaluate(b).to_json()
        assert a == c
        doc = json.loads(a)
        assert [t["name"] for t in doc["tests"]] == [
            "monobit", "runs", "serial_correlation_lag1", "serial_correlation_lag2", "serial_correlation_lag8"]

    def test_bad_alpha(self):
        with pytest.raises(UsageError):
            evaluate(alternating(200), alpha=0.0)


class TestPacking:
    @given(bit_strings)
    def test_round_trip(self, s):
        b = BitStream.from_string(s)
        back = BitStream.from_packed(b.packed(), len(b))
        assert back.to_string() == s
        assert len(b.packed()) == (len(s) + 7) // 8

    def test_msb_first(self):
        assert BitStream.from_string("10000000" "0000001").packed() == bytes([0x80, 0x02])

    def test_rejects_non_binary(self):
        with pytest.raises(UsageError):
            BitStream(np.array([0, 2]))
