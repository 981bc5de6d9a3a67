import numpy as np
import pytest

from sparsenet.cli import EXIT_CONFIG, EXIT_IO, main
from sparsenet.datasets import write_cifar_batch, write_idx_images, write_idx_labels
from sparsenet.synthetic import as_uint8, make_synthetic_pair

BASE = """
dataset = synthetic_mnist
topology = lenet_small
synthetic_train_n = 120
synthetic_test_n = 40
synthetic_noise = 0.4
batch_size = 20
learning_rate = 0.1
momentum = 0.9
max_iterations = 30
eval_interval = 15
eval_max = 120
seed = 3
"""


def write_cfg(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


def run(args):
    return main([str(a) for a in args])


class TestBasicCommands:
    def test_train_writes_artifacts(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, BASE)
        out = tmp_path / "out"
        assert run(["train", "--config", cfg, "--out", out]) == 0
        assert (out / "model.ckpt").exists()
        assert (out / "metrics.csv").exists()
        manifest = (out / "manifest.txt").read_text()
        assert "config_sha256 = " in manifest
        assert "seed = 3" in manifest
        assert "version = sparsenet-" in manifest
        line = capsys.readouterr().out.strip().splitlines()[-1]
        assert line.startswith("test_accuracy=")
        float(line.split("=", 1)[1])

    def test_eval_prints_single_line(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, BASE)
        out = tmp_path / "out"
        run(["train", "--config", cfg, "--out", out])
        capsys.readouterr()
        cfg2 = write_cfg(tmp_path, BASE + f"checkpoint = {out / 'model.ckpt'}\n", "eval.cfg")
        assert run(["eval", "--config", cfg2, "--out", tmp_path / "out2"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 1
        assert lines[0].startswith("test_accuracy=")

    def test_memory_report_fresh_net_all_dense(self, tmp_path, capsys):
        # cifar_quick's zero-init biases are too few per layer to make any
        # sparse encoding pay off, so a fresh net reports dense everywhere
        cfg = write_cfg(tmp_path, "dataset = synthetic_cifar\ntopology = cifar_quick\n")
        assert run(["memory-report", "--config", cfg, "--out", tmp_path / "m", "--mb"]) == 0
        tail = capsys.readouterr().out
        assert "dense" in tail and "MB" in tail
        csv = (tmp_path / "m" / "memory.csv").read_text()
        body = [ln for ln in csv.strip().splitlines()[1:] if not ln.startswith("TOTAL")]
        assert all(ln.split(",")[6] == "dense" for ln in body)

    def test_train_determinism_bit_exact(self, tmp_path):
        cfg = write_cfg(tmp_path, BASE)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert run(["train", "--config", cfg, "--out", out1]) == 0
        assert run(["train", "--config", cfg, "--out", out2]) == 0
        assert (out1 / "model.ckpt").read_bytes() == (out2 / "model.ckpt").read_bytes()
        assert (out1 / "metrics.csv").read_text() == (out2 / "metrics.csv").read_text()
        assert (out1 / "manifest.txt").read_text() == (out2 / "manifest.txt").read_text()

    def test_seed_flag_overrides_config(self, tmp_path):
        cfg = write_cfg(tmp_path, BASE)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        run(["train", "--config", cfg, "--out", out1, "--seed", 9])
        run(["train", "--config", cfg, "--out", out2])
        assert (out1 / "model.ckpt").read_bytes() != (out2 / "model.ckpt").read_bytes()
        assert "seed = 9" in (out1 / "manifest.txt").read_text()


class TestExitCodes:
    def test_missing_config_is_io_error(self, tmp_path):
        assert run(["train", "--config", tmp_path / "nope.cfg"]) == EXIT_IO

    def test_bad_config_is_config_error(self, tmp_path):
        cfg = write_cfg(tmp_path, "definitely_not_a_key = 1\n")
        assert run(["train", "--config", cfg, "--out", tmp_path / "o"]) == EXIT_CONFIG

    def test_unknown_layer_is_config_error(self, tmp_path):
        cfg = write_cfg(tmp_path, BASE + "[layer:fc9]\nkind = l2_decay\nlambda = 0.1\n")
        assert run(["train", "--config", cfg, "--out", tmp_path / "o"]) == EXIT_CONFIG

    def test_corrupt_checkpoint_is_io_error(self, tmp_path):
        bad = tmp_path / "bad.ckpt"
        bad.write_bytes(b"garbage")
        cfg = write_cfg(tmp_path, BASE + f"checkpoint = {bad}\n")
        assert run(["eval", "--config", cfg, "--out", tmp_path / "o"]) == EXIT_IO

    def test_eval_without_checkpoint_key(self, tmp_path):
        cfg = write_cfg(tmp_path, BASE)
        assert run(["eval", "--config", cfg, "--out", tmp_path / "o"]) == EXIT_CONFIG


class TestFileBackedDatasets:
    def test_mnist_train_eval_cycle(self, tmp_path, capsys):
        train_d, test_d = make_synthetic_pair(80, 30, shape=(1, 28, 28), noise=0.4,
                                              max_shift=2, seed=11)
        paths = {}
        for name, d in (("train", train_d), ("test", test_d)):
            ip, lp = tmp_path / f"{name}.images", tmp_path / f"{name}.labels"
            write_idx_images(ip, as_uint8(d))
            write_idx_labels(lp, d.labels)
            paths[name] = (ip, lp)
        cfg = write_cfg(
            tmp_path,
            "dataset = mnist\n"
            f"train_images = {paths['train'][0]}\ntrain_labels = {paths['train'][1]}\n"
            f"test_images = {paths['test'][0]}\ntest_labels = {paths['test'][1]}\n"
            "topology = lenet_small\nbatch_size = 16\nmax_iterations = 10\n"
            "eval_interval = 10\nseed = 1\n",
        )
        assert run(["train", "--config", cfg, "--out", tmp_path / "o"]) == 0
        assert (tmp_path / "o" / "model.ckpt").exists()

    def test_cifar_binary_cycle(self, tmp_path):
        train_d, test_d = make_synthetic_pair(60, 20, shape=(3, 32, 32), noise=0.6, seed=12)
        tb, vb = tmp_path / "train.bin", tmp_path / "test.bin"
        write_cifar_batch(tb, as_uint8(train_d), train_d.labels)
        write_cifar_batch(vb, as_uint8(test_d), test_d.labels)
        cfg = write_cfg(
            tmp_path,
            f"dataset = cifar10\ntrain_batches = {tb}\ntest_batches = {vb}\n"
            "topology = cifar_quick\nbatch_size = 20\nmax_iterations = 6\n"
            "eval_interval = 6\nseed = 1\n",
        )
        assert run(["train", "--config", cfg, "--out", tmp_path / "o"]) == 0


class TestProtocolCommands:
    def test_greedy_then_ensemble_cycle(self, tmp_path, capsys):
        text = BASE + "target_nnz = 200000\ncandidate_iterations = 10\n"
        cfg = write_cfg(tmp_path, text)
        out = tmp_path / "greedy"
        assert run(["sparsify-greedy", "--config", cfg, "--out", out]) == 0
        log = out / "candidates.csv"
        assert log.exists()
        header = log.read_text().splitlines()[0]
        assert header.startswith("round,layer_reduced,")
        assert "val_acc" in header and "memory_bytes" in header

        capsys.readouterr()
        ens_cfg = write_cfg(
            tmp_path,
            BASE.replace("max_iterations = 30", "max_iterations = 10")
            + f"plan_log = {log}\nensemble_size = 2\n",
            "ens.cfg",
        )
        out2 = tmp_path / "ens"
        assert run(["ensemble", "--config", ens_cfg, "--out", out2]) == 0
        assert (out2 / "member_0.ckpt").exists()
        assert (out2 / "member_1.ckpt").exists()
        summary = (out2 / "ensemble.csv").read_text().strip().splitlines()
        assert summary[0] == "member,nnz,test_acc"
        assert summary[-1].startswith("ensemble,")

    def test_threshold_compare_cmd(self, tmp_path):
        cfg = write_cfg(
            tmp_path, BASE + "threshold_grid = 0.0,0.02\nretrain_iterations = 10\n"
        )
        out = tmp_path / "thr"
        assert run(["threshold-compare", "--config", cfg, "--out", out]) == 0
        lines = (out / "threshold_compare.csv").read_text().strip().splitlines()
        assert lines[0] == "delta,total_nnz,acc_threshold,acc_retrained"
        assert len(lines) == 3

    def test_data_sweep_cmd(self, tmp_path):
        cfg = write_cfg(
            tmp_path,
            BASE + "fractions = 0.5,1.0\nweight_decay = 0.0001\n"
            "[layer:fc1]\nkind = l0_projection\nt = 40000\nperiod = 10\n",
        )
        out = tmp_path / "sweep"
        assert run(["data-sweep", "--config", cfg, "--out", out]) == 0
        lines = (out / "sweep.csv").read_text().strip().splitlines()
        assert lines[0] == "fraction,regime,train_acc,test_acc"
        assert len(lines) == 5
