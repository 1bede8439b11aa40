"""Dataset file format, the network decoder wrapper, and the CLI."""

import json
import os

import numpy as np
import pytest
from click.testing import CliRunner

from steanedec import dataset as dsmod
from steanedec.cli import main
from steanedec.decoders import DNN2_CHANNELS, NnDecoder, dnn2_inputs, \
    rnn_inputs
from steanedec.nn import build_model, dnn2_spec, drnn_spec, srnn_spec
from steanedec.sim import NoiseModel, sample_memory_batch
from steanedec.steane import steane_code


@pytest.fixture(scope="module")
def batch():
    return sample_memory_batch(steane_code(), NoiseModel(5e-3), T=2,
                               basis="Z", shots=400, seed=11)


class TestDatasetFormat:
    def test_round_trip(self, batch, tmp_path):
        ds = dsmod.from_batch(batch, 5e-3, "hash123")
        path = tmp_path / "d.sds"
        dsmod.write_dataset(path, ds)
        back = dsmod.read_dataset(path)
        assert np.array_equal(back.volumes, batch.volumes)
        assert np.array_equal(back.m_in, batch.m_in)
        assert np.array_equal(back.m_out, batch.m_out)
        assert np.array_equal(back.m_L, batch.m_L)
        assert (back.p_ph, back.T, back.basis, back.seed) == \
            (5e-3, 2, "Z", 11)
        assert back.config_hash == "hash123"
        assert back.code_id == dsmod.CODE_ID

    def test_label_consistency_enforced(self, batch, tmp_path):
        ds = dsmod.from_batch(batch, 5e-3)
        path = tmp_path / "d.sds"
        dsmod.write_dataset(path, ds)
        raw = bytearray(path.read_bytes())
        raw[-1] ^= 0b100  # corrupt an m_L bit
        path.write_bytes(bytes(raw))
        with pytest.raises(ValueError):
            dsmod.read_dataset(path)

    def test_rejects_garbage(self, tmp_path):
        path = tmp_path / "x.sds"
        path.write_bytes(b"junk")
        with pytest.raises(ValueError):
            dsmod.read_dataset(path)

    def test_text_export(self, batch, tmp_path):
        ds = dsmod.from_batch(batch, 5e-3)
        path = tmp_path / "d.txt"
        dsmod.export_text(path, ds)
        lines = path.read_text().splitlines()
        assert len(lines) == len(ds) + 1
        first = lines[1].split()
        rounds = first[0].split("|")
        assert len(rounds) == 2 and len(rounds[0]) == 12
        assert rounds[0] == "".join(str(b) for b in ds.volumes[0][0])
        assert int(first[1]) ^ int(first[2]) == int(first[3])


class TestDecoderWrapper:
    def test_dnn2_input_channels(self, batch):
        x = dnn2_inputs(batch.volumes, "Z")
        assert x.shape == (len(batch), 12)
        chans = list(DNN2_CHANNELS["Z"])
        assert np.array_equal(
            x.reshape(len(batch), 2, 6),
            batch.volumes[:, :, chans].astype(float))

    def test_rnn_padding(self, batch):
        x = rnn_inputs(batch.volumes, t_max=5)
        assert x.shape == (len(batch), 5, 12)
        assert np.all(x[:, 2:, :] == -1.0)
        assert np.array_equal(x[:, :2, :], batch.volumes.astype(float))

    def test_predict_matches_forward(self, batch):
        model = build_model(dnn2_spec(), seed=1)
        dec = NnDecoder(model, basis="Z")
        q = model.forward(dnn2_inputs(batch.volumes, "Z"))[:, 0]
        assert np.array_equal(dec.predict_flips_batch(batch),
                              (q > 0.5).astype(np.uint8))
        assert dec.predict_flip(batch.sample(3)) == \
            dec.predict_flips_batch(batch)[3]

    def test_drnn_head_selection(self, batch):
        model = build_model(drnn_spec(), seed=2)
        z = NnDecoder(model, basis="Z", t_max=2)
        x = NnDecoder(model, basis="X", t_max=2)
        assert (z.head, x.head) == (0, 1)
        q = model.forward(rnn_inputs(batch.volumes, 2))
        assert np.array_equal(z.predict_flips_batch(batch),
                              (q[:, 0] > 0.5).astype(np.uint8))
        assert np.array_equal(x.predict_flips_batch(batch),
                              (q[:, 1] > 0.5).astype(np.uint8))

    def test_srnn_single_head(self, batch):
        model = build_model(srnn_spec("Z"), seed=3)
        dec = NnDecoder(model, basis="Z", t_max=4)
        flips = dec.predict_flips_batch(batch)
        assert flips.shape == (len(batch),)


class TestCli:
    @pytest.fixture()
    def cfg_path(self, tmp_path):
        cfg = tmp_path / "cfg.yaml"
        cfg.write_text(
            "seed: 5\n"
            f"out: {tmp_path / 'run'}\n"
            "decoder: dnn2\n"
            "p_ph: 0.005\n"
            "pph_sweep: [0.005]\n"
            "rounds: 2\n"
            "shots: {train: 3000, val: 400, test: 200}\n"
            "train: {epochs: 2, batch_size: 64, lr: 0.001}\n"
            "eval: {shots_per_point: 500}\n"
            "explain: {background: 50, samples: 100}\n")
        return str(cfg)

    def run(self, *args):
        return CliRunner().invoke(main, list(args))

    def test_full_dnn2_pipeline(self, cfg_path, tmp_path):
        out = tmp_path / "run"
        r = self.run("gen-data", "--config", cfg_path)
        assert r.exit_code == 0, r.output
        assert (out / "data" / "train_z_t2.sds").exists()
        r = self.run("train", "--config", cfg_path)
        assert r.exit_code == 0, r.output
        assert (out / "checkpoints" / "dnn2" / "epoch_0001.ckpt").exists()
        r = self.run("eval", "--config", cfg_path)
        assert r.exit_code == 0, r.output
        payload = json.loads((out / "eval_dnn2.json").read_text())
        assert payload["rows"][0]["p_ph"] == 0.005
        r = self.run("explain", "--config", cfg_path)
        assert r.exit_code == 0, r.output
        lines = (out / "attributions_dnn2.txt").read_text().splitlines()
        assert len(lines) == 101
        r = self.run("report", "--config", cfg_path)
        assert r.exit_code == 0, r.output
        assert "dnn2" in r.output

    def test_dep_lut_passes(self, cfg_path):
        r = self.run("dep", "--config", cfg_path, "--decoder", "lut")
        assert r.exit_code == 0, r.output
        assert "0/1128" in r.output

    def test_dep_untrained_net_fails_with_exit_3(self, cfg_path):
        r = self.run("gen-data", "--config", cfg_path)
        assert r.exit_code == 0
        # one tiny epoch on purpose: not FT yet
        r = self.run("train", "--config", cfg_path)
        assert r.exit_code == 0
        r = self.run("dep", "--config", cfg_path)
        assert r.exit_code == 3, r.output

    def test_invalid_config_exit_1(self, tmp_path):
        bad = tmp_path / "bad.yaml"
        bad.write_text("decoder: nosuch\n")
        r = self.run("eval", "--config", str(bad))
        assert r.exit_code == 1

    def test_missing_artifact_exit_2(self, cfg_path):
        r = self.run("train", "--config", cfg_path)
        assert r.exit_code == 2

    def test_eval_missing_checkpoint_exit_2(self, cfg_path):
        r = self.run("eval", "--config", cfg_path)
        assert r.exit_code == 2

    def test_config_hash_mismatch_exit_1(self, cfg_path, tmp_path):
        r = self.run("gen-data", "--config", cfg_path)
        assert r.exit_code == 0
        # different seed changes the config hash for the same files
        r = self.run("train", "--config", cfg_path, "--seed", "6")
        assert r.exit_code == 1
