"""Statistics layer: Wilson intervals, infidelity and scaling fits,
attribution correlation matrices, hook-signature excess, and the
fault-tolerance learning monitor."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit

from .circuits import ANC, FX, FZ, SX, SZ
from .sim import dep_failure_fraction, sample_memory_batch
from .steane import CodeDefinition


# --- Wilson interval --------------------------------------------------------


@dataclass(frozen=True)
class WilsonResult:
    p_hat: float
    p_min: float
    p_max: float
    sigma: float


def wilson_interval(k: int, n: int, z2: float = 1.0) -> WilsonResult:
    """Wilson score interval with fringe cutoffs and symmetrized sigma.

    Bounds within 2 counts of the edge (3 for n > 40) are pinned to
    0 resp. 1; sigma is twice the larger deviation of the bounds from
    the point estimate.
    """
    if n < 1 or not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n, n >= 1; got k={k}, n={n}")
    p_hat = k / n
    z = np.sqrt(z2)
    denom = 1.0 + z2 / n
    center = p_hat + z2 / (2 * n)
    half = z * np.sqrt(p_hat * (1 - p_hat) / n + z2 / (4 * n * n))
    p_min = (center - half) / denom
    p_max = (center + half) / denom
    edge = 3 if n > 40 else 2
    if k <= edge:
        p_min = 0.0
    if n - k <= edge:
        p_max = 1.0
    sigma = 2.0 * max(abs(p_hat - p_max), abs(p_hat - p_min))
    return WilsonResult(p_hat, p_min, p_max, sigma)


# --- fits -------------------------------------------------------------------


@dataclass
class FitResult:
    params: tuple[float, ...]
    residual: float
    cov: np.ndarray | None = None


def infidelity_model(t, p_l, t0):
    return 0.5 - 0.5 * (1.0 - 2.0 * p_l) ** (np.asarray(t, dtype=float) - t0)


def fit_infidelity(t, infid, sigma=None) -> FitResult:
    """Least-squares fit of the per-round logical flip model.

    Returns (p_L, t0). A flat-zero series short-circuits to p_L = 0.
    """
    t = np.asarray(t, dtype=float)
    infid = np.asarray(infid, dtype=float)
    if len(t) < 2:
        raise ValueError("need at least 2 points")
    if not infid.any():
        return FitResult((0.0, 0.0), 0.0)
    slope = max((infid[-1] - infid[0]) / (t[-1] - t[0]), 1e-9)
    p0 = (min(slope, 0.49), 0.0)
    popt, pcov = curve_fit(infidelity_model, t, infid, p0=p0, sigma=sigma,
                           bounds=([0.0, -10.0], [0.5, 10.0]), maxfev=20000,
                           xtol=1e-14, ftol=1e-14, gtol=1e-14)
    resid = float(np.sqrt(np.mean((infidelity_model(t, *popt) - infid) ** 2)))
    return FitResult(tuple(popt), resid, pcov)


def fit_scaling(p_ph, p_l) -> FitResult:
    """Log-log least-squares fit of p_L = a * p_ph**b; returns (a, b)."""
    p_ph = np.asarray(p_ph, dtype=float)
    p_l = np.asarray(p_l, dtype=float)
    if len(p_ph) < 2:
        raise ValueError("need at least 2 points")
    if (p_ph <= 0).any() or (p_l <= 0).any():
        raise ValueError("scaling fit needs positive rates")
    b, log_a = np.polyfit(np.log(p_ph), np.log(p_l), 1)
    pred = np.exp(log_a) * p_ph ** b
    resid = float(np.sqrt(np.mean((np.log(pred) - np.log(p_l)) ** 2)))
    return FitResult((float(np.exp(log_a)), float(b)), resid)


# --- Monte-Carlo logical error rate ----------------------------------------


@dataclass
class ErrorRateResult:
    rounds: np.ndarray
    infidelity: np.ndarray
    sigma: np.ndarray
    fit: FitResult

    @property
    def p_l(self) -> float:
        return self.fit.params[0]


def logical_error_rate(decoder, code: CodeDefinition, noise, basis: str,
                       T: int, shots_per_point: int, seed: int) -> ErrorRateResult:
    """Failure probability after t = 1..T rounds, with the per-round rate
    from the infidelity fit. The decoder exposes predict_flips_batch."""
    rounds = np.arange(1, T + 1)
    infid = np.zeros(T)
    sig = np.zeros(T)
    for i, t in enumerate(rounds):
        batch = sample_memory_batch(code, noise, T=int(t), basis=basis,
                                    shots=shots_per_point, seed=seed + 1000 * t)
        pred = decoder.predict_flips_batch(batch)
        k = int((pred ^ batch.m_L).sum())
        w = wilson_interval(k, shots_per_point)
        infid[i] = w.p_hat
        sig[i] = max(w.sigma, 1e-12)
    fit = fit_infidelity(rounds, infid, sigma=None)
    return ErrorRateResult(rounds, infid, sig, fit)


# --- attribution correlations ----------------------------------------------


@dataclass
class CorrelationReport:
    lag: int
    matrix: np.ndarray          # (12, 12), row = channel at t, col at t+lag
    n_samples: int
    zero_variance: np.ndarray   # (12,) bool flags per leading channel

    def pooled_pairs(self) -> int:
        return self.n_samples


def attribution_correlations(attributions: np.ndarray,
                             lag: int = 0) -> CorrelationReport:
    """Pearson correlation of channel a at round t with channel b at
    round t + lag, pooled over samples and all valid t.

    ``attributions``: array (n_samples, T, 12). Zero-variance channels
    yield correlation 0 and are flagged.
    """
    attributions = np.asarray(attributions, dtype=float)
    if attributions.ndim != 3 or attributions.shape[2] != 12:
        raise ValueError("expected shape (n, T, 12)")
    n, T, _ = attributions.shape
    if n < 2 or T <= lag:
        raise ValueError("need >= 2 samples and T > lag")
    X = attributions[:, :T - lag, :].reshape(-1, 12)
    Y = attributions[:, lag:, :].reshape(-1, 12)
    Xc = X - X.mean(axis=0)
    Yc = Y - Y.mean(axis=0)
    sx = np.sqrt((Xc ** 2).sum(axis=0))
    sy = np.sqrt((Yc ** 2).sum(axis=0))
    zero_x = sx < 1e-300
    zero_y = sy < 1e-300
    sx[zero_x] = 1.0
    sy[zero_y] = 1.0
    corr = (Xc / sx).T @ (Yc / sy)
    corr[zero_x, :] = 0.0
    corr[:, zero_y] = 0.0
    np.clip(corr, -1.0, 1.0, out=corr)
    return CorrelationReport(lag=lag, matrix=corr, n_samples=X.shape[0],
                             zero_variance=zero_x | zero_y)


# --- hook signatures --------------------------------------------------------


@dataclass
class HookSignatureSet:
    hook: list[tuple[int, int, int]]      # (flag channel, syndrome channel, lag)
    baseline: list[tuple[int, int, int]]


def derive_hook_signatures(code: CodeDefinition, basis: str) -> HookSignatureSet:
    """Derive the dangerous flag/syndrome channel pairings by injecting the
    weight-two hook class into each plaquette readout and recording which
    flag and which later syndrome increment it raises."""
    from .circuits import FaultInjection, build_qec_cycle
    from .sim import run_memory_experiment

    ptype = "X" if basis == "Z" else "Z"
    flag_family = FX if ptype == "X" else FZ
    syn_family = SZ if ptype == "X" else SX
    gates = build_qec_cycle(code, cycles=3)
    hook = []
    for k in range(code.n_stabilizers):
        ent = [g for g in gates if g.cycle == 1 and g.kind in ("cnot", "cz")
               and (g.qubits[0] == ANC or g.qubits[1] == ANC)]
        group = ent[6 * k: 6 * k + 6] if ptype == "X" \
            else ent[18 + 6 * k: 18 + 6 * k + 6]
        g = group[2]  # the gate whose trailing ancilla X leaves a weight-2 tail
        paulis = ("X", "I") if g.qubits[0] == ANC else ("I", "X")
        sample = run_memory_experiment(code, None, T=3, basis=basis,
                                       fault=FaultInjection(g.loc, paulis))
        vol = sample.volume
        flag_hits = [(t, c) for t in range(3) for c in flag_family if vol[t, c]]
        syn_hits = [(t, c) for t in range(3) for c in syn_family if vol[t, c]]
        assert len(flag_hits) == 1 and len(syn_hits) >= 1
        t_f, c_f = flag_hits[0]
        t_s, c_s = syn_hits[0]
        hook.append((c_f, c_s, t_s - t_f))
    lag = hook[0][2]
    assert all(h[2] == lag for h in hook)
    baseline = [(cf, cs, lag)
                for cf in flag_family for cs in syn_family
                if (cf, cs, lag) not in hook]
    return HookSignatureSet(hook=hook, baseline=baseline)


def hook_excess(report: CorrelationReport,
                signatures: HookSignatureSet) -> tuple[float, float]:
    """Mean absolute correlation over the hook pairs vs the remaining
    flag/syndrome pairs of the same families, at the signature lag."""
    def mean_abs(pairs):
        vals = []
        for cf, cs, lag in pairs:
            if lag != report.lag:
                raise ValueError("report lag does not match signature lag")
            # leading channel is the one observed earlier
            vals.append(abs(report.matrix[cf, cs]) if lag == 0
                        else abs(report.matrix[cf, cs]))
        return float(np.mean(vals))

    return mean_abs(signatures.hook), mean_abs(signatures.baseline)


# --- FT-learning monitor ----------------------------------------------------


@dataclass
class MonitorRow:
    epoch: int
    dep_failure: float
    p_l: dict[float, float]
    scaling_b: float
    hook_mean: float
    baseline_mean: float


def ft_monitor(epoch_decoders, code: CodeDefinition, noise_sweep, basis: str,
               T: int, shots_per_point: int, seed: int,
               attribution_fn=None, signatures: HookSignatureSet | None = None,
               fixed_rounds: int | None = None) -> list[MonitorRow]:
    """Per-epoch FT tracks: DEP failure fraction, fitted p_L per noise
    point, scaling exponent, and hook vs baseline attribution correlation.

    ``epoch_decoders``: iterable of (epoch, decoder). ``attribution_fn``
    maps a decoder to an (n, T, 12) attribution array; when omitted the
    correlation tracks are reported as NaN. Decoders that only accept a
    fixed round count (``fixed_rounds``) are scored by their failure
    rate at that count instead of the per-round infidelity fit.
    """
    from .sim import NoiseModel, sample_memory_batch

    rows = []
    if signatures is None:
        signatures = derive_hook_signatures(code, basis)
    for epoch, decoder in epoch_decoders:
        dep = dep_failure_fraction(
            decoder, code, basis,
            cycles=2 if fixed_rounds is None else fixed_rounds)
        p_ls = {}
        for p_ph in noise_sweep:
            if fixed_rounds is not None:
                batch = sample_memory_batch(code, NoiseModel(p_ph),
                                            T=fixed_rounds, basis=basis,
                                            shots=shots_per_point, seed=seed)
                pred = decoder.predict_flips_batch(batch)
                p_ls[p_ph] = float((pred ^ batch.m_L).mean())
                continue
            res = logical_error_rate(decoder, code, NoiseModel(p_ph), basis,
                                     T, shots_per_point, seed)
            p_ls[p_ph] = res.p_l
        if len(p_ls) >= 2 and all(v > 0 for v in p_ls.values()):
            b = fit_scaling(list(p_ls), list(p_ls.values())).params[1]
        else:
            b = float("nan")
        hook_mean = baseline_mean = float("nan")
        if attribution_fn is not None:
            attr = attribution_fn(decoder)
            lag = signatures.hook[0][2]
            report = attribution_correlations(attr, lag=lag)
            hook_mean, baseline_mean = hook_excess(report, signatures)
        rows.append(MonitorRow(epoch, dep, p_ls, b, hook_mean, baseline_mean))
    return rows
