"""Pauli-frame simulation of flagged Steane-code memory experiments.

Two engines share the same circuit description:

* a scalar engine (`run_memory_experiment`) used for deterministic
  single-fault runs and as a readable reference, and
* a vectorized engine (`sample_memory_batch`) that propagates all shots
  of a Monte-Carlo batch simultaneously on bit-packed integer arrays.

Noise model (depolarizing circuit-level): after every two-qubit gate one
of the 15 nontrivial two-qubit Paulis with probability p_ph/15 each;
initialization and measurement outcomes invert with probability 2/3 p_ph.

Randomness is drawn from counter-based Philox streams keyed by
(seed, location id), so sampling is reproducible and independent of the
order in which locations are processed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .circuits import (ANC, DATA, FLAG, N_CHANNELS, FaultInjection, Gate,
                       PAULI_1Q, TWO_QUBIT_PAULIS, build_qec_cycle,
                       enumerate_single_faults)
from .steane import CodeDefinition, PauliString, parity


@dataclass(frozen=True)
class NoiseModel:
    """Depolarizing circuit-level noise with physical rate p_ph."""

    p_ph: float

    def __post_init__(self):
        if not 0.0 <= self.p_ph < 1.0:
            raise ValueError(f"p_ph must be in [0, 1), got {self.p_ph}")

    @property
    def spam_flip(self) -> float:
        return 2.0 / 3.0 * self.p_ph

    @property
    def one_q(self) -> float:
        return self.p_ph / 3.0

    @property
    def two_q(self) -> float:
        return self.p_ph / 15.0


@dataclass
class MemorySample:
    """One memory-experiment run.

    ``volume[t, c]`` holds the 12 channel bits of round t+1 (syndrome
    channels are increments relative to the previous round); ``basis`` is
    the logical readout basis; ``final_syndrome`` is the 3-bit half
    syndrome derived from the perfect final data readout (available to
    sequential decoders, not part of the NN input).
    """

    volume: np.ndarray
    basis: str
    m_in: int
    m_out: int
    final_syndrome: int = 0
    # raw measurement record of the preparation round (12 channels);
    # read by the sequential decoder, never part of the NN input
    prep_row: np.ndarray | None = None

    @property
    def m_L(self) -> int:
        return self.m_in ^ self.m_out

    @property
    def rounds(self) -> int:
        return self.volume.shape[0]


# --- scalar engine ----------------------------------------------------------


class PauliFrame:
    """X/Z error record over the 9-qubit register, as two bit masks."""

    __slots__ = ("x", "z")

    def __init__(self):
        self.x = 0
        self.z = 0

    def apply(self, qubit: int, pauli: str):
        px, pz = PAULI_1Q[pauli]
        self.x ^= px << qubit
        self.z ^= pz << qubit

    def clear(self, qubit: int):
        keep = ~(1 << qubit)
        self.x &= keep
        self.z &= keep

    def data_x(self) -> int:
        return self.x & 0x7F

    def data_z(self) -> int:
        return self.z & 0x7F


def _propagate_scalar(frame: PauliFrame, gate: Gate) -> int | None:
    """Apply one gate to the frame; measurement gates return the outcome
    flip bit (noiseless deterministic outcome is 0)."""
    kind = gate.kind
    if kind == "cnot":
        c, t = gate.qubits
        frame.x ^= (frame.x >> c & 1) << t
        frame.z ^= (frame.z >> t & 1) << c
        return None
    if kind == "cz":
        a, b = gate.qubits
        frame.z ^= (frame.x >> b & 1) << a
        frame.z ^= (frame.x >> a & 1) << b
        return None
    if kind in ("prep_plus", "prep_zero"):
        frame.clear(gate.qubits[0])
        return None
    if kind == "meas_x":
        return frame.z >> gate.qubits[0] & 1
    if kind == "meas_z":
        return frame.x >> gate.qubits[0] & 1
    raise ValueError(kind)


def propagate(frame: PauliFrame, gate: Gate) -> int | None:
    """Public scalar propagation rule (see `_propagate_scalar`)."""
    return _propagate_scalar(frame, gate)


def _scalar_noise(frame: PauliFrame, gate: Gate, noise: NoiseModel | None,
                  rng) -> int:
    """Sample and apply the fault of one location; returns a measurement
    outcome flip bit for SPAM locations."""
    if noise is None or noise.p_ph == 0.0 or rng is None:
        return 0
    kind = gate.kind
    if kind in ("cnot", "cz"):
        u = rng.random()
        if u < noise.p_ph:
            pa, pb = TWO_QUBIT_PAULIS[min(int(u / noise.two_q), 14)]
            frame.apply(gate.qubits[0], pa)
            frame.apply(gate.qubits[1], pb)
        return 0
    if kind in ("prep_plus", "prep_zero"):
        if rng.random() < noise.spam_flip:
            frame.apply(gate.qubits[0], "Z" if kind == "prep_plus" else "X")
        return 0
    # measurement flip
    return int(rng.random() < noise.spam_flip)


def _finalize(code: CodeDefinition, frame: PauliFrame, basis: str,
              m_in: int) -> tuple[int, int]:
    """Perfect final data readout: derive the half syndrome, apply the
    weight-1 correction and read the residual logical parity."""
    err = frame.data_x() if basis == "Z" else frame.data_z()
    syn = code._half_syndrome_int(err)
    residual = err ^ code.pure_error_mask(syn)
    flip = parity(residual & code.logical_mask)
    return m_in ^ flip, syn


def run_memory_experiment(code: CodeDefinition, noise: NoiseModel | None,
                          T: int, basis: str, m_in: int = 0,
                          rng=None, fault: FaultInjection | None = None,
                          fault_in_prep: bool = False) -> MemorySample:
    """Scalar memory experiment: one noisy prep cycle defining s(0),
    T cycles recording syndrome increments and flags, perfect readout.

    A single `fault` may be injected into the T QEC cycles (location ids
    refer to `build_qec_cycle(code, cycles=T)`, i.e. exclude the prep
    round) for deterministic error placing. With ``fault_in_prep`` the
    location id addresses the preparation cycle instead.
    """
    if T < 1:
        raise ValueError("T must be >= 1")

    def fault_here(gate: Gate) -> bool:
        if fault is None or gate.loc != fault.loc:
            return False
        return gate.cycle == 0 if fault_in_prep else gate.cycle > 0
    frame = PauliFrame()
    volume = np.zeros((T, N_CHANNELS), dtype=np.uint8)
    prep_row = np.zeros(N_CHANNELS, dtype=np.uint8)
    prev_syn = np.zeros(6, dtype=np.uint8)
    outc = np.zeros(N_CHANNELS, dtype=np.uint8)
    prep = build_qec_cycle(code, cycles=0, include_prep=True)
    body = build_qec_cycle(code, cycles=T)
    for gate in prep + body:
        flip = _propagate_scalar(frame, gate)
        if gate.kind.startswith("meas"):
            flip ^= _scalar_noise(frame, gate, noise, rng)
            if fault is not None and fault.flip_outcome and fault_here(gate):
                flip ^= 1
            outc[gate.channel] = flip
            if gate.channel == N_CHANNELS - 1:  # last measurement of a cycle
                if gate.cycle == 0:
                    prep_row = outc.copy()
                    prev_syn = outc[:6].copy()
                else:
                    volume[gate.cycle - 1, :6] = outc[:6] ^ prev_syn
                    volume[gate.cycle - 1, 6:] = outc[6:]
                    prev_syn = outc[:6].copy()
                outc[:] = 0
        else:
            _scalar_noise(frame, gate, noise, rng)
            if fault is not None and not fault.flip_outcome and fault_here(gate):
                for q, p in zip(gate.qubits, fault.paulis):
                    frame.apply(q, p)
    m_out, syn = _finalize(code, frame, basis, m_in)
    return MemorySample(volume=volume, basis=basis, m_in=m_in, m_out=m_out,
                        final_syndrome=syn, prep_row=prep_row)


# --- deterministic error placer --------------------------------------------


def run_with_fault(code: CodeDefinition, fault: FaultInjection, basis: str,
                   decoder, T: int = 2) -> int:
    """Noiseless run with one injected fault; 1 iff the decoder's logical
    prediction disagrees with the true residual parity."""
    sample = run_memory_experiment(code, noise=None, T=T, basis=basis,
                                   m_in=0, fault=fault)
    return decoder.predict_flip(sample) ^ sample.m_L


def dep_failure_fraction(decoder, code: CodeDefinition, basis: str,
                         cycles: int = 2) -> float:
    """Fraction of enumerated single faults the decoder fails to recover."""
    faults = enumerate_single_faults(code, cycles=cycles)
    failed = sum(run_with_fault(code, f, basis, decoder, T=cycles)
                 for f in faults)
    return failed / len(faults)


class IdentityDecoder:
    """Predicts "no logical flip" for every volume (the undecoded baseline)."""

    def predict_flip(self, sample: MemorySample) -> int:
        return 0


class AlwaysFlipDecoder:
    def predict_flip(self, sample: MemorySample) -> int:
        return 1


# --- vectorized engine ------------------------------------------------------

_PAR = np.zeros(128, dtype=np.uint8)
for _i in range(128):
    _PAR[_i] = bin(_i).count("1") & 1

# toggle bit tables for the 15 two-qubit Paulis
_PX1 = np.array([PAULI_1Q[a][0] for a, b in TWO_QUBIT_PAULIS], dtype=np.int64)
_PZ1 = np.array([PAULI_1Q[a][1] for a, b in TWO_QUBIT_PAULIS], dtype=np.int64)
_PX2 = np.array([PAULI_1Q[b][0] for a, b in TWO_QUBIT_PAULIS], dtype=np.int64)
_PZ2 = np.array([PAULI_1Q[b][1] for a, b in TWO_QUBIT_PAULIS], dtype=np.int64)


def _loc_rng(seed: int, loc: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=(seed, loc)))


@dataclass
class MemoryBatch:
    """Vectorized result of `sample_memory_batch`."""

    volumes: np.ndarray        # (shots, T, 12) uint8
    basis: str
    m_in: np.ndarray           # (shots,) uint8
    m_out: np.ndarray          # (shots,) uint8
    final_syndrome: np.ndarray  # (shots,) uint8, 3-bit ints
    seed: int = 0
    prep_rows: np.ndarray | None = None  # (shots, 12) uint8

    @property
    def m_L(self) -> np.ndarray:
        return self.m_in ^ self.m_out

    def __len__(self) -> int:
        return self.volumes.shape[0]

    def sample(self, i: int) -> MemorySample:
        prep = None if self.prep_rows is None else self.prep_rows[i]
        return MemorySample(volume=self.volumes[i], basis=self.basis,
                            m_in=int(self.m_in[i]), m_out=int(self.m_out[i]),
                            final_syndrome=int(self.final_syndrome[i]),
                            prep_row=prep)


def sample_memory_batch(code: CodeDefinition, noise: NoiseModel, T: int,
                        basis: str, shots: int, seed: int) -> MemoryBatch:
    """Sample `shots` memory experiments at once.

    m_in alternates 0/1 so each input state obtains an equal share of
    samples; the label depends only on the accumulated errors.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    n = shots
    p = noise.p_ph
    spam = noise.spam_flip
    x = np.zeros(n, dtype=np.int64)
    z = np.zeros(n, dtype=np.int64)
    volumes = np.zeros((n, T, N_CHANNELS), dtype=np.uint8)
    prep_rows = np.zeros((n, N_CHANNELS), dtype=np.uint8)
    outc = np.zeros((n, N_CHANNELS), dtype=np.uint8)
    prev_syn = np.zeros((n, 6), dtype=np.uint8)

    program = build_qec_cycle(code, cycles=T, include_prep=True)
    for gate in program:
        kind = gate.kind
        if kind == "cnot":
            c, t = gate.qubits
            x ^= (x >> c & 1) << t
            z ^= (z >> t & 1) << c
        elif kind == "cz":
            a, b = gate.qubits
            znew = ((x >> b & 1) << a) ^ ((x >> a & 1) << b)
            z ^= znew
        elif kind in ("prep_plus", "prep_zero"):
            keep = ~np.int64(1 << gate.qubits[0])
            x &= keep
            z &= keep
        # noise / measurement
        if kind in ("cnot", "cz"):
            if p > 0.0:
                u = _loc_rng(seed, gate.loc).random(n)
                faulted = u < p
                k = np.minimum((u / noise.two_q).astype(np.int64), 14)
                k[~faulted] = 0
                q1, q2 = gate.qubits
                xt = (_PX1[k] << q1) | (_PX2[k] << q2)
                zt = (_PZ1[k] << q1) | (_PZ2[k] << q2)
                x ^= np.where(faulted, xt, 0)
                z ^= np.where(faulted, zt, 0)
        elif kind in ("prep_plus", "prep_zero"):
            if p > 0.0:
                v = _loc_rng(seed, gate.loc).random(n) < spam
                q = gate.qubits[0]
                if kind == "prep_plus":
                    z ^= v.astype(np.int64) << q
                else:
                    x ^= v.astype(np.int64) << q
        else:  # measurement
            q = gate.qubits[0]
            out = (z >> q & 1) if kind == "meas_x" else (x >> q & 1)
            out = out.astype(np.uint8)
            if p > 0.0:
                out ^= (_loc_rng(seed, gate.loc).random(n) < spam).astype(np.uint8)
            outc[:, gate.channel] = out
            if gate.channel == N_CHANNELS - 1:
                if gate.cycle == 0:
                    prep_rows[:] = outc
                    prev_syn[:] = outc[:, :6]
                else:
                    volumes[:, gate.cycle - 1, :6] = outc[:, :6] ^ prev_syn
                    volumes[:, gate.cycle - 1, 6:] = outc[:, 6:]
                    prev_syn[:] = outc[:, :6]
                outc[:] = 0

    err = (x & 0x7F) if basis == "Z" else (z & 0x7F)
    syn = np.zeros(n, dtype=np.int64)
    for kk, sup in enumerate(code.support_masks):
        syn |= _PAR[err & sup].astype(np.int64) << kk
    pec = np.array([code.pure_error_mask(s) for s in range(8)], dtype=np.int64)
    residual = err ^ pec[syn]
    flip = _PAR[residual & code.logical_mask]
    m_in = (np.arange(n) & 1).astype(np.uint8)
    return MemoryBatch(volumes=volumes, basis=basis, m_in=m_in,
                       m_out=m_in ^ flip,
                       final_syndrome=syn.astype(np.uint8), seed=seed,
                       prep_rows=prep_rows)
