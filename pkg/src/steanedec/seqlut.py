"""Sequential look-up-table decoder with flag-conditioned hook corrections.

Per decoding basis the decoder walks the syndrome-increment/flag volume
round by round, carrying a signal state:

* NONE: nothing pending. A raised flag sets FLAG; otherwise an
  unexplained cumulative syndrome sets ERROR.
* FLAG: in the next round the unexplained syndrome selects a row of the
  hook-correction table for the flagged plaquette (falling back to the
  plain weight-1 correction when no row matches).
* ERROR: in the next round a persisting unexplained syndrome is
  corrected with the weight-1 look-up table; a vanished one is dismissed
  as a measurement error.

The perfect final data readout enters as one extra virtual round, so
hooks flagged in the last cycle still receive their follow-up syndrome.
The hook table itself is not hard-coded: it is generated by propagating
an ancilla X fault through the flagged readout circuit after each gate
that follows the first flag coupling.
"""

from __future__ import annotations

import numpy as np

from .circuits import ANC, FLAG, FX, FZ, SX, SZ, Gate, plaquette_gates
from .sim import MemoryBatch, MemorySample, PauliFrame, propagate
from .steane import CodeDefinition, parity

NONE, SIG_ERROR, SIG_FLAG = 0, 1, 2


def hook_correction_table(code: CodeDefinition) -> dict[tuple[int, int], int]:
    """Map (flagged plaquette k, observed half-syndrome) -> data correction.

    Built by injecting X on the syndrome ancilla after every entangling
    gate of the flagged readout and keeping the cases that both raise the
    flag and leave a data-error tail. The tails are the same data-qubit
    sets for X- and Z-type readouts, so one table serves both bases.
    """
    table: dict[tuple[int, int], int] = {}
    for k in range(code.n_stabilizers):
        schedule = plaquette_gates(code, k, "X")
        for inject_after in range(len(schedule)):
            frame = PauliFrame()
            for g, (kind, target) in enumerate(schedule):
                qubits = (ANC, target)
                propagate(frame, Gate(kind, qubits, loc=g))
                if g == inject_after:
                    frame.apply(ANC, "X")
            tail = frame.data_x()
            flagged = frame.x >> FLAG & 1
            if flagged and tail:
                syn = code._half_syndrome_int(tail)
                table[(k, syn)] = tail
    return table


class SeqLutDecoder:
    """Fault-tolerant sequential look-up-table decoder."""

    def __init__(self, code: CodeDefinition):
        self.code = code
        self.table = hook_correction_table(code)
        self._pec = [code.pure_error_mask(s) for s in range(8)]

    def _channels(self, basis: str) -> tuple[tuple[int, ...], tuple[int, ...]]:
        """(syndrome channels, flag channels) feeding the given readout basis.

        Z-basis readout is spoiled by bit flips: those are detected by the
        Z-type generators and hooked by the X-type (CNOT) readouts.
        """
        if basis == "Z":
            return SZ, FX
        if basis == "X":
            return SX, FZ
        raise ValueError(f"basis must be 'X' or 'Z', got {basis!r}")

    def decode_basis(self, volume: np.ndarray, basis: str,
                     final_syndrome: int | None = None,
                     prep_row: np.ndarray | None = None) -> int:
        """Predicted logical-flip bit for one basis.

        ``prep_row`` is the measurement record of the preparation round
        (the decoding sequence starts at round 0). ``final_syndrome`` is
        the 3-bit half syndrome of the perfect final data readout; it
        doubles as the syndrome of round T+1. When it is unavailable (the
        other basis was measured) the accumulated measured syndrome
        stands in for it.
        """
        code = self.code
        syn_ch, flag_ch = self._channels(basis)
        T = volume.shape[0]
        rounds: list[tuple[int, list[int]]] = []
        for row in ([] if prep_row is None else [prep_row]):
            delta = sum(int(row[c]) << i for i, c in enumerate(syn_ch))
            rounds.append((delta, [k for k, c in enumerate(flag_ch) if row[c]]))
        for t in range(T):
            row = volume[t]
            delta = sum(int(row[c]) << i for i, c in enumerate(syn_ch))
            rounds.append((delta, [k for k, c in enumerate(flag_ch) if row[c]]))
        if final_syndrome is None:
            final_syndrome = 0
            for delta, _ in rounds:
                final_syndrome ^= delta
        est = 0
        cum = 0
        signal = NONE
        flagged_k = -1
        for t in range(len(rounds) + 1):
            if t < len(rounds):
                delta, flags = rounds[t]
            else:
                delta = final_syndrome ^ cum
                flags = []
            cum ^= delta
            u = cum ^ code._half_syndrome_int(est)
            if signal == SIG_FLAG:
                est ^= self.table.get((flagged_k, u), self._pec[u])
                signal = NONE
                u = cum ^ code._half_syndrome_int(est)
            elif signal == SIG_ERROR:
                if u:
                    est ^= self._pec[u]
                    u = 0
                signal = NONE
            if flags:
                signal = SIG_FLAG
                flagged_k = flags[0]
            elif u:
                signal = SIG_ERROR
        # the final readout is noiseless, so whatever stayed unexplained
        # is a real data error and gets the plain weight-1 correction
        u = final_syndrome ^ code._half_syndrome_int(est)
        est ^= self._pec[u]
        residual = est ^ self._pec[final_syndrome]
        return parity(residual & code.logical_mask)

    def decode(self, volume: np.ndarray, final_syndrome_z: int | None = None,
               final_syndrome_x: int | None = None,
               prep_row: np.ndarray | None = None) -> tuple[int, int]:
        """(bit-flip, phase-flip) predictions for one volume.

        The final half syndromes default to the accumulated measured
        syndromes when a perfect readout is only available in one basis.
        """
        x_flip = self.decode_basis(volume, "Z", final_syndrome_z, prep_row)
        z_flip = self.decode_basis(volume, "X", final_syndrome_x, prep_row)
        return x_flip, z_flip

    def predict_flip(self, sample: MemorySample) -> int:
        return self.decode_basis(sample.volume, sample.basis,
                                 sample.final_syndrome, sample.prep_row)

    def predict_flips_batch(self, batch: MemoryBatch) -> np.ndarray:
        out = np.empty(len(batch), dtype=np.uint8)
        preps = batch.prep_rows
        for i in range(len(batch)):
            out[i] = self.decode_basis(batch.volumes[i], batch.basis,
                                       int(batch.final_syndrome[i]),
                                       None if preps is None else preps[i])
        return out
