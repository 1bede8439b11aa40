"""Command-line pipeline: dataset generation, training, evaluation,
explanation, fault-injection certification, and training monitoring.

All subcommands read one YAML config; selected fields can be overridden
by flags. Every artifact embeds a hash of the effective config and
downstream stages refuse artifacts whose hash disagrees.

Exit codes: 0 success, 1 invalid config, 2 missing artifact, 3 DEP
certification failure.
"""

from __future__ import annotations

import json
import os
import sys

import click
import numpy as np
import yaml

from . import dataset as dsmod
from .analysis import (derive_hook_signatures, fit_scaling, ft_monitor,
                       logical_error_rate)
from .circuits import enumerate_single_faults
from .decoders import NnDecoder, dnn2_inputs, rnn_inputs
from .nn import (TrainConfig, build_model, config_hash, load_checkpoint,
                 train)
from .nn.model import spec_by_id
from .seqlut import SeqLutDecoder
from .sim import NoiseModel, run_with_fault, sample_memory_batch
from .steane import steane_code
from .xai import deepshap_batch

DEFAULTS = {
    "seed": 0,
    "out": "runs/default",
    "decoder": "lut",
    "p_ph": 5e-3,
    "pph_sweep": [1e-3, 2e-3, 5e-3],
    "rounds": 2,
    "shots": {"train": 100_000, "val": 14_000, "test": 10_000},
    "train": {"epochs": 30, "batch_size": 64, "lr": 1e-3},
    "eval": {"shots_per_point": 20_000},
    "explain": {"background": 1000, "samples": 14_000},
}

VALID_DECODERS = ("lut", "srnn-x", "srnn-z", "drnn", "dnn2")


def fail(code: int, msg: str):
    click.echo(f"error: {msg}", err=True)
    sys.exit(code)


def load_config(path, overrides) -> dict:
    cfg = {k: (dict(v) if isinstance(v, dict) else v)
           for k, v in DEFAULTS.items()}
    if path is not None:
        try:
            with open(path) as fh:
                user = yaml.safe_load(fh) or {}
        except FileNotFoundError:
            fail(1, f"config file not found: {path}")
        except yaml.YAMLError as exc:
            fail(1, f"config parse error: {exc}")
        if not isinstance(user, dict):
            fail(1, "config must be a mapping")
        for k, v in user.items():
            if isinstance(v, dict) and isinstance(cfg.get(k), dict):
                cfg[k].update(v)
            else:
                cfg[k] = v
    for k, v in overrides.items():
        if v is not None:
            cfg[k] = v
    if cfg["decoder"] not in VALID_DECODERS:
        fail(1, f"unknown decoder {cfg['decoder']!r}")
    if not isinstance(cfg["rounds"], int) or cfg["rounds"] < 1:
        fail(1, "rounds must be a positive integer")
    try:
        cfg["pph_sweep"] = [float(p) for p in cfg["pph_sweep"]]
    except (TypeError, ValueError):
        fail(1, "pph_sweep must be a list of error rates")
    if any(not 0 <= p < 1 for p in cfg["pph_sweep"]):
        fail(1, "pph_sweep rates must lie in [0, 1)")
    cfg["hash"] = config_hash({k: v for k, v in sorted(cfg.items())
                               if k != "hash"})
    return cfg


def decoder_bases(decoder: str) -> list[str]:
    return {"lut": ["Z", "X"], "drnn": ["Z", "X"], "srnn-z": ["Z"],
            "srnn-x": ["X"], "dnn2": ["Z"]}[decoder]


def dataset_rounds(cfg) -> list[int]:
    if cfg["decoder"] in ("dnn2", "lut"):
        return [cfg["rounds"]]
    return list(range(1, cfg["rounds"] + 1))


def dataset_path(cfg, split: str, basis: str, t: int) -> str:
    return os.path.join(cfg["out"], "data",
                        f"{split}_{basis.lower()}_t{t}.sds")


def require_dataset(cfg, split: str, basis: str, t: int):
    path = dataset_path(cfg, split, basis, t)
    if not os.path.exists(path):
        fail(2, f"missing dataset {path}; run gen-data first")
    ds = dsmod.read_dataset(path)
    if ds.config_hash != cfg["hash"]:
        fail(1, f"config hash mismatch for {path}")
    return ds


def checkpoint_dir(cfg) -> str:
    return os.path.join(cfg["out"], "checkpoints", cfg["decoder"])


def latest_checkpoint(cfg):
    d = checkpoint_dir(cfg)
    if not os.path.isdir(d):
        fail(2, f"no checkpoints under {d}; run train first")
    names = sorted(n for n in os.listdir(d) if n.endswith(".ckpt"))
    if not names:
        fail(2, f"no checkpoints under {d}; run train first")
    return os.path.join(d, names[-1])


def load_decoder(cfg, basis: str):
    if cfg["decoder"] == "lut":
        return SeqLutDecoder(steane_code())
    ckpt = load_checkpoint(latest_checkpoint(cfg))
    if ckpt.config_hash != cfg["hash"]:
        fail(1, "config hash mismatch between config and checkpoint")
    model = build_model(spec_by_id(cfg["decoder"]), seed=cfg["seed"])
    weights = {k: v for k, v in ckpt.weights.items()
               if not k.startswith("adam.")}
    model.set_weights_flat(weights)
    t_max = cfg["rounds"] if model.spec.recurrent else None
    return NnDecoder(model, basis=basis, t_max=t_max)


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


_common = [
    click.option("--config", "config_path", type=click.Path(), default=None,
                 help="YAML config file."),
    click.option("--seed", type=int, default=None),
    click.option("--out", type=click.Path(), default=None),
    click.option("--decoder",
                 type=click.Choice(VALID_DECODERS), default=None),
    click.option("--shots", type=int, default=None,
                 help="Override the training-split shot count."),
    click.option("--pph", default=None,
                 help="Comma-separated physical error rates."),
    click.option("--rounds", type=int, default=None),
]


def common_options(fn):
    for opt in reversed(_common):
        fn = opt(fn)
    return fn


def build_cfg(config_path, seed, out, decoder, shots, pph, rounds) -> dict:
    overrides = {"seed": seed, "out": out, "decoder": decoder,
                 "rounds": rounds}
    if pph is not None:
        overrides["pph_sweep"] = pph.split(",")
    cfg = load_config(config_path, overrides)
    if shots is not None:
        cfg["shots"]["train"] = shots
        cfg["hash"] = config_hash({k: v for k, v in sorted(cfg.items())
                                   if k != "hash"})
    return cfg


@click.group()
def main():
    """Steane-code memory simulation, decoding, and explanation."""


@main.command("gen-data")
@common_options
def cmd_gen_data(**kw):
    """Write train/validation/test datasets with disjoint seeds."""
    cfg = build_cfg(**kw)
    code = steane_code()
    os.makedirs(os.path.join(cfg["out"], "data"), exist_ok=True)
    noise = NoiseModel(cfg["p_ph"])
    bases = decoder_bases(cfg["decoder"]) if cfg["decoder"] != "lut" \
        else ["Z"]
    for si, split in enumerate(("train", "val", "test")):
        shots = cfg["shots"][split]
        rounds = dataset_rounds(cfg)
        for basis in bases:
            # equal share per (basis, T) family; initial states alternate
            # inside sample_memory_batch
            per = max(1, shots // (len(rounds) * len(bases)))
            for t in rounds:
                seed = cfg["seed"] + 100 * si + 10 * t \
                    + (0 if basis == "Z" else 5)
                batch = sample_memory_batch(code, noise, T=t, basis=basis,
                                            shots=per, seed=seed)
                ds = dsmod.from_batch(batch, cfg["p_ph"], cfg["hash"])
                path = dataset_path(cfg, split, basis, t)
                dsmod.write_dataset(path, ds)
                dsmod.export_text(path + ".txt", ds)
                click.echo(f"wrote {path} ({per} samples)")


def _training_arrays(cfg):
    """Stack the train-split datasets into network inputs and labels."""
    decoder = cfg["decoder"]
    bases = decoder_bases(decoder)
    rounds = dataset_rounds(cfg)
    xs, ys = [], []
    for basis in bases:
        for t in rounds:
            ds = require_dataset(cfg, "train", basis, t)
            if decoder == "dnn2":
                xs.append(dnn2_inputs(ds.volumes, basis))
            else:
                xs.append(rnn_inputs(ds.volumes, t_max=cfg["rounds"]))
            label = ds.m_L.astype(float)
            if decoder == "drnn":
                y = np.full((len(ds), 2), -1.0)
                y[:, 0 if basis == "Z" else 1] = label
            else:
                y = label[:, None]
            ys.append(y)
    return np.concatenate(xs), np.concatenate(ys)


@main.command("train")
@common_options
def cmd_train(**kw):
    """Train the configured network; one checkpoint per epoch."""
    cfg = build_cfg(**kw)
    if cfg["decoder"] == "lut":
        fail(1, "the look-up-table decoder is not trainable")
    x, y = _training_arrays(cfg)
    model = build_model(spec_by_id(cfg["decoder"]), seed=cfg["seed"])
    ckdir = checkpoint_dir(cfg)
    os.makedirs(ckdir, exist_ok=True)
    tc = TrainConfig(epochs=cfg["train"]["epochs"],
                     batch_size=cfg["train"]["batch_size"],
                     lr=cfg["train"]["lr"], seed=cfg["seed"])
    history = train(model, x, y, tc, config_hash=cfg["hash"],
                    checkpoint_dir=ckdir)
    for rec in history:
        click.echo(f"epoch {rec['epoch']:4d} loss {rec['loss']:.6f}")
    _write_json(os.path.join(cfg["out"], f"train_{cfg['decoder']}.json"),
                {"config_hash": cfg["hash"], "history": history})


@main.command("eval")
@common_options
def cmd_eval(**kw):
    """Logical error rates over the noise sweep, with Wilson error bars."""
    cfg = build_cfg(**kw)
    code = steane_code()
    os.makedirs(cfg["out"], exist_ok=True)
    fixed_t = cfg["decoder"] == "dnn2"
    rows = []
    for basis in decoder_bases(cfg["decoder"]):
        decoder = load_decoder(cfg, basis)
        for p_ph in cfg["pph_sweep"]:
            if fixed_t:
                # fixed-width decoder: failure rate at T rounds, no
                # per-round infidelity fit
                from .analysis import wilson_interval
                batch = sample_memory_batch(
                    code, NoiseModel(p_ph), T=cfg["rounds"], basis=basis,
                    shots=cfg["eval"]["shots_per_point"], seed=cfg["seed"])
                k = int((decoder.predict_flips_batch(batch)
                         ^ batch.m_L).sum())
                w = wilson_interval(k, cfg["eval"]["shots_per_point"])
                rows.append({"basis": basis, "p_ph": p_ph, "p_l": w.p_hat,
                             "infidelity": [w.p_hat], "sigma": [w.sigma]})
            else:
                res = logical_error_rate(
                    decoder, code, NoiseModel(p_ph), basis,
                    T=max(cfg["rounds"], 3),
                    shots_per_point=cfg["eval"]["shots_per_point"],
                    seed=cfg["seed"])
                rows.append({"basis": basis, "p_ph": p_ph, "p_l": res.p_l,
                             "infidelity": res.infidelity.tolist(),
                             "sigma": res.sigma.tolist()})
            click.echo(f"{cfg['decoder']} basis={basis} p_ph={p_ph:g} "
                       f"p_L={rows[-1]['p_l']:.6g}")
    payload = {"config_hash": cfg["hash"], "decoder": cfg["decoder"],
               "rows": rows}
    for basis in decoder_bases(cfg["decoder"]):
        pts = [(r["p_ph"], r["p_l"]) for r in rows
               if r["basis"] == basis and r["p_l"] > 0]
        if len(pts) >= 2:
            fit = fit_scaling([p for p, _ in pts], [v for _, v in pts])
            payload[f"scaling_b_{basis}"] = fit.params[1]
    _write_json(os.path.join(cfg["out"], f"eval_{cfg['decoder']}.json"),
                payload)


@main.command("explain")
@common_options
def cmd_explain(**kw):
    """Attributions of the trained decoder on validation samples."""
    cfg = build_cfg(**kw)
    if cfg["decoder"] == "lut":
        fail(1, "attributions require a network decoder")
    basis = decoder_bases(cfg["decoder"])[0]
    t = dataset_rounds(cfg)[-1]
    val = require_dataset(cfg, "val", basis, t)
    bg_ds = require_dataset(cfg, "train", basis, t)
    decoder = load_decoder(cfg, basis)
    n = min(cfg["explain"]["samples"], len(val))
    nb = min(cfg["explain"]["background"], len(bg_ds))
    xs = decoder.inputs(val.volumes[:n])
    bg = decoder.inputs(bg_ds.volumes[:nb])
    phi, phi0 = deepshap_batch(decoder.model, xs, bg, head=decoder.head,
                               max_rows=200_000)
    out_path = os.path.join(cfg["out"], f"attributions_{cfg['decoder']}.txt")
    with open(out_path, "w") as fh:
        fh.write(f"# config={cfg['hash']} decoder={cfg['decoder']} "
                 f"basis={basis} phi-grid rows=samples\n")
        for i in range(n):
            grid = " ".join(f"{v:.6g}" for v in phi[i].reshape(-1))
            vol = "".join(str(b) for b in val.volumes[i].reshape(-1))
            fh.write(f"{i} {val.T} {basis} {phi0[i]:.6g} {grid} {vol}\n")
    np.save(os.path.join(cfg["out"], f"attributions_{cfg['decoder']}.npy"),
            phi)
    click.echo(f"wrote {out_path} ({n} samples, {nb} background)")


@main.command("dep")
@common_options
def cmd_dep(**kw):
    """Deterministic single-fault certification; exit 3 on any failure."""
    cfg = build_cfg(**kw)
    code = steane_code()
    os.makedirs(cfg["out"], exist_ok=True)
    faults = enumerate_single_faults(code, cycles=cfg["rounds"])
    report = {"config_hash": cfg["hash"], "decoder": cfg["decoder"],
              "cycles": cfg["rounds"], "n_faults": len(faults)}
    worst = 0.0
    for basis in decoder_bases(cfg["decoder"]):
        decoder = load_decoder(cfg, basis)
        failed = sum(run_with_fault(code, f, basis, decoder,
                                    T=cfg["rounds"]) for f in faults)
        frac = failed / len(faults)
        report[f"failure_fraction_{basis}"] = frac
        worst = max(worst, frac)
        click.echo(f"basis {basis}: {failed}/{len(faults)} faults failed")
    _write_json(os.path.join(cfg["out"], f"dep_{cfg['decoder']}.json"),
                report)
    if worst > 0:
        fail(3, "decoder is not fault tolerant under single faults")


@main.command("monitor")
@common_options
def cmd_monitor(**kw):
    """FT-learning tracks for every checkpoint of a training run."""
    cfg = build_cfg(**kw)
    if cfg["decoder"] == "lut":
        fail(1, "monitoring requires a trained run")
    code = steane_code()
    basis = decoder_bases(cfg["decoder"])[0]
    d = checkpoint_dir(cfg)
    if not os.path.isdir(d) or not os.listdir(d):
        fail(2, f"no checkpoints under {d}; run train first")
    t = dataset_rounds(cfg)[-1]
    val = require_dataset(cfg, "val", basis, t)
    bg_ds = require_dataset(cfg, "train", basis, t)
    spec = spec_by_id(cfg["decoder"])
    signatures = derive_hook_signatures(code, basis)

    def decoders():
        for name in sorted(os.listdir(d)):
            if not name.endswith(".ckpt"):
                continue
            ckpt = load_checkpoint(os.path.join(d, name))
            if ckpt.config_hash != cfg["hash"]:
                fail(1, f"config hash mismatch in {name}")
            model = build_model(spec, seed=cfg["seed"])
            model.set_weights_flat({k: v for k, v in ckpt.weights.items()
                                    if not k.startswith("adam.")})
            t_max = cfg["rounds"] if spec.recurrent else None
            yield ckpt.epoch, NnDecoder(model, basis=basis, t_max=t_max)

    n = min(2000, len(val))
    nb = min(200, len(bg_ds))
    chans = None

    def attribution_fn(decoder):
        nonlocal chans
        xs = decoder.inputs(val.volumes[:n])
        bg = decoder.inputs(bg_ds.volumes[:nb])
        phi, _ = deepshap_batch(decoder.model, xs, bg, head=decoder.head,
                                max_rows=100_000)
        if decoder.model.spec.recurrent:
            return phi
        from .decoders import DNN2_CHANNELS
        chans = list(DNN2_CHANNELS[basis])
        full = np.zeros((n, val.T, 12))
        full[:, :, chans] = phi.reshape(n, val.T, 6)
        return full

    rows = ft_monitor(decoders(), code, cfg["pph_sweep"], basis,
                      T=max(cfg["rounds"], 3),
                      shots_per_point=cfg["eval"]["shots_per_point"],
                      seed=cfg["seed"], attribution_fn=attribution_fn,
                      signatures=signatures,
                      fixed_rounds=cfg["rounds"] if cfg["decoder"] == "dnn2"
                      else None)
    table = os.path.join(cfg["out"], f"monitor_{cfg['decoder']}.txt")
    with open(table, "w") as fh:
        fh.write(f"# config={cfg['hash']}\n")
        fh.write("epoch dep_failure scaling_b hook_mean baseline_mean "
                 + " ".join(f"p_l@{p:g}" for p in cfg["pph_sweep"]) + "\n")
        for r in rows:
            pls = " ".join(f"{r.p_l[p]:.6g}" for p in cfg["pph_sweep"])
            fh.write(f"{r.epoch} {r.dep_failure:.6g} {r.scaling_b:.4g} "
                     f"{r.hook_mean:.4g} {r.baseline_mean:.4g} {pls}\n")
    _write_json(os.path.join(cfg["out"], f"monitor_{cfg['decoder']}.json"),
                {"config_hash": cfg["hash"],
                 "rows": [r.__dict__ for r in rows]})
    click.echo(f"wrote {table}")


@main.command("report")
@common_options
def cmd_report(**kw):
    """Consolidated decoder comparison from existing eval artifacts."""
    cfg = build_cfg(**kw)
    lines = ["decoder basis p_ph p_l scaling_b"]
    for dec in VALID_DECODERS:
        path = os.path.join(cfg["out"], f"eval_{dec}.json")
        if not os.path.exists(path):
            continue
        with open(path) as fh:
            payload = json.load(fh)
        for row in payload["rows"]:
            b = payload.get(f"scaling_b_{row['basis']}", float("nan"))
            lines.append(f"{dec} {row['basis']} {row['p_ph']:g} "
                         f"{row['p_l']:.6g} {b:.4g}")
    text = "\n".join(lines) + "\n"
    out_path = os.path.join(cfg["out"], "report.txt")
    os.makedirs(cfg["out"], exist_ok=True)
    with open(out_path, "w") as fh:
        fh.write(f"# config={cfg['hash']}\n")
        fh.write(text)
    click.echo(text)


if __name__ == "__main__":
    main()
