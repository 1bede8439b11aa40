import numpy as np
import pytest

from naive_sim import naive_run
from steanedec.circuits import (SZ, FaultInjection, build_qec_cycle,
                                enumerate_single_faults)
from steanedec.sim import (AlwaysFlipDecoder, IdentityDecoder, MemorySample,
                           NoiseModel, dep_failure_fraction,
                           run_memory_experiment, run_with_fault,
                           sample_memory_batch)
from steanedec.steane import steane_code


@pytest.fixture(scope="module")
def code():
    return steane_code()


class TestNoiseModel:
    def test_rates(self):
        nm = NoiseModel(p_ph=0.003)
        assert nm.spam_flip == pytest.approx(0.002)
        assert nm.one_q == pytest.approx(0.001)
        assert 15 * nm.two_q == pytest.approx(nm.p_ph)

    def test_rejects_invalid(self):
        with pytest.raises(ValueError):
            NoiseModel(p_ph=1.5)


class TestNoiselessRuns:
    def test_zero_volume_zero_label(self, code):
        for basis in ("Z", "X"):
            s = run_memory_experiment(code, noise=None, T=4, basis=basis)
            assert not s.volume.any()
            assert s.m_L == 0
            assert s.final_syndrome == 0

    def test_label_consistency(self, code):
        s = run_memory_experiment(code, noise=None, T=2, basis="Z", m_in=1)
        assert s.m_L == s.m_in ^ s.m_out

    def test_x5_data_error_syndrome(self, code):
        # fault with X on the data operand of the first entangling gate of
        # the S_Z2 plaquette that touches qubit 5
        gates = build_qec_cycle(code, cycles=2)
        loc = next(g.loc for g in gates
                   if g.kind == "cz" and g.cycle == 1 and g.qubits[0] == 4)
        s = run_memory_experiment(code, noise=None, T=2, basis="Z",
                                  fault=FaultInjection(loc, ("X", "I")))
        # Z-type syndrome of X5 is (0,1,0), first seen in round 1 or 2
        cum = np.bitwise_xor.reduce(s.volume[:, SZ], axis=0)
        assert list(cum) == [0, 1, 0]
        assert s.final_syndrome == 0b010
        assert s.m_L == 0


class TestOracleAgreement:
    def test_every_single_fault_matches_naive(self, code):
        for fault in enumerate_single_faults(code, cycles=2):
            for basis in ("Z", "X"):
                fast = run_memory_experiment(code, None, T=2, basis=basis,
                                             fault=fault)
                ref = naive_run(code, None, T=2, basis=basis, fault=fault)
                assert np.array_equal(fast.volume, ref.volume), fault
                assert fast.m_L == ref.m_L, fault
                assert fast.final_syndrome == ref.final_syndrome, fault

    def test_noisy_label_rate_matches_naive(self, code):
        noise = NoiseModel(p_ph=0.02)
        shots = 3000
        batch = sample_memory_batch(code, noise, T=3, basis="Z",
                                    shots=shots, seed=11)
        rate_fast = batch.m_L.mean()
        rng = np.random.default_rng(7)
        fails = sum(naive_run(code, noise, T=3, basis="Z", rng=rng).m_L
                    for _ in range(shots))
        rate_naive = fails / shots
        # agreement within combined 3 sigma binomial noise
        p = (rate_fast + rate_naive) / 2
        sigma = np.sqrt(2 * p * (1 - p) / shots)
        assert abs(rate_fast - rate_naive) < 3 * sigma + 1e-9


class TestVectorizedEngine:
    def test_noiseless_batch(self, code):
        batch = sample_memory_batch(code, NoiseModel(0.0), T=3, basis="Z",
                                    shots=16, seed=0)
        assert not batch.volumes.any()
        assert not batch.m_L.any()
        assert list(batch.m_in[:4]) == [0, 1, 0, 1]

    def test_reproducible(self, code):
        a = sample_memory_batch(code, NoiseModel(5e-3), T=4, basis="X",
                                shots=200, seed=42)
        b = sample_memory_batch(code, NoiseModel(5e-3), T=4, basis="X",
                                shots=200, seed=42)
        assert np.array_equal(a.volumes, b.volumes)
        assert np.array_equal(a.m_out, b.m_out)
        c = sample_memory_batch(code, NoiseModel(5e-3), T=4, basis="X",
                                shots=200, seed=43)
        assert not np.array_equal(a.volumes, c.volumes)

    def test_prefix_stability(self, code):
        # growing the shot count keeps earlier shots identical
        small = sample_memory_batch(code, NoiseModel(5e-3), T=3, basis="Z",
                                    shots=50, seed=9)
        big = sample_memory_batch(code, NoiseModel(5e-3), T=3, basis="Z",
                                  shots=120, seed=9)
        assert np.array_equal(big.volumes[:50], small.volumes)

    def test_sample_accessor(self, code):
        batch = sample_memory_batch(code, NoiseModel(5e-3), T=3, basis="Z",
                                    shots=8, seed=1)
        s = batch.sample(3)
        assert isinstance(s, MemorySample)
        assert s.m_L == batch.m_L[3]


class TestDep:
    def test_identity_fault_harmless(self, code):
        gates = build_qec_cycle(code, cycles=2)
        fault = FaultInjection(gates[2].loc, ("I", "I"))
        assert run_with_fault(code, fault, "Z", IdentityDecoder()) == 0

    def test_identity_decoder_fraction(self, code):
        frac = dep_failure_fraction(IdentityDecoder(), code, "Z")
        assert 0.02 <= frac <= 0.06

    def test_always_flip_complement(self, code):
        a = dep_failure_fraction(IdentityDecoder(), code, "Z")
        b = dep_failure_fraction(AlwaysFlipDecoder(), code, "Z")
        assert a + b == pytest.approx(1.0)
