import json
from pathlib import Path

import numpy as np
import pytest

from leafgan.cli import dispatch
from leafgan.config import (
    PipelineConfig,
    apply_overrides,
    config_hash,
    echo_config,
    load_config,
    render_config,
    validate_config,
)
from leafgan.datakit import save_image
from leafgan.errors import ConfigError
from leafgan.synthetic import write_gan_corpus


class TestConfigFile:
    def test_empty_file_gives_documented_defaults(self, tmp_path):
        path = tmp_path / "empty.cfg"
        path.write_text("")
        cfg = load_config(path)
        assert cfg == PipelineConfig()
        assert (cfg.delta, cfg.lam, cfg.split_ratio) == (0.35, 10.0, 0.7)
        assert (cfg.lflseg_epochs, cfg.lflseg_batch) == (30, 128)
        assert (cfg.gan_epochs, cfg.gan_batch) == (200, 1)
        assert cfg.augment_count == 717

    def test_missing_file_is_config_error(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "nope.cfg")

    def test_out_of_range_delta_names_the_field(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("delta = 1.5\n")
        with pytest.raises(ConfigError, match="delta"):
            load_config(path)

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("warp_factor = 9\n")
        with pytest.raises(ConfigError, match="warp_factor"):
            load_config(path)

    def test_type_errors_name_the_field(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("gan_epochs = soon\n")
        with pytest.raises(ConfigError, match="gan_epochs"):
            load_config(path)

    def test_comments_and_blank_lines_ignored(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("# preamble\n\nseed = 3  # trailing comment\nlambda = 5.5\n")
        cfg = load_config(path)
        assert cfg.seed == 3 and cfg.lam == 5.5

    def test_round_trip_identity(self, tmp_path):
        cfg = PipelineConfig(seed=7, delta=0.41, lam=3.25, data_root="data/x",
                             identity_loss=True, gan_blocks=9)
        echoed = echo_config(cfg, tmp_path)
        assert load_config(echoed) == cfg
        assert config_hash(load_config(echoed)) == config_hash(cfg)

    def test_render_covers_every_field(self):
        text = render_config(PipelineConfig())
        assert "lambda = 10.0" in text and "seed = 0" in text
        assert len(text.strip().splitlines()) == len(PipelineConfig.__dataclass_fields__)

    def test_overrides_win_and_validate(self):
        cfg = apply_overrides(PipelineConfig(), {"delta": 0.5, "seed": None})
        assert cfg.delta == 0.5 and cfg.seed == 0
        with pytest.raises(ConfigError, match="delta"):
            apply_overrides(PipelineConfig(), {"delta": 2.0})

    def test_validate_rejects_bad_momentum(self):
        cfg = PipelineConfig(lflseg_momentum=1.0)
        with pytest.raises(ConfigError, match="lflseg_momentum"):
            validate_config(cfg)


class TestDispatchBasics:
    def test_no_arguments_usage_error(self, capsys):
        assert dispatch([]) == 1

    def test_unknown_subcommand(self):
        assert dispatch(["transmogrify"]) == 1

    def test_group_without_command(self):
        assert dispatch(["lflseg"]) == 1

    def test_help_exits_zero(self):
        assert dispatch(["--help"]) == 0

    def test_config_error_exit_code(self, tmp_path, capsys):
        code = dispatch([
            "lflseg", "segment", "--in", str(tmp_path), "--out", str(tmp_path / "o"),
            "--ckpt", str(tmp_path / "missing.pt"), "--delta", "0.35",
        ])
        assert code == 2
        assert capsys.readouterr().err.startswith("error: config:")

    def test_out_of_range_flag_exit_code(self, tmp_path, capsys):
        code = dispatch([
            "lflseg", "segment", "--in", str(tmp_path), "--out", str(tmp_path / "o"),
            "--ckpt", str(tmp_path / "missing.pt"), "--delta", "1.5",
        ])
        assert code == 2
        assert "delta" in capsys.readouterr().err

    def test_runtime_error_exit_code(self, tmp_path, rng, capsys):
        save_image(rng.random((16, 16, 3)).astype(np.float32), tmp_path / "in" / "a.png")
        bad_ckpt = tmp_path / "bad.pt"
        bad_ckpt.write_bytes(b"not a checkpoint")
        code = dispatch([
            "lflseg", "segment", "--in", str(tmp_path / "in"),
            "--out", str(tmp_path / "o"), "--ckpt", str(bad_ckpt),
        ])
        assert code == 3
        assert capsys.readouterr().err.startswith("error: runtime:")


@pytest.fixture(scope="module")
def lflseg_sources(tmp_path_factory):
    root = tmp_path_factory.mktemp("lflseg_sources")
    gen = np.random.default_rng(0)
    for name, count, side in (("full", 6, 16), ("partial", 2, 32), ("nonleaf", 10, 16)):
        for i in range(count):
            save_image(gen.random((side, side, 3)).astype(np.float32),
                       root / name / f"{name}_{i:03d}.png")
    return root


class TestLflsegPipeline:
    def test_prepare_train_segment_chain(self, lflseg_sources, tmp_path):
        prep = tmp_path / "prep"
        assert dispatch([
            "lflseg", "prepare",
            "--full", str(lflseg_sources / "full"),
            "--partial", str(lflseg_sources / "partial"),
            "--nonleaf", str(lflseg_sources / "nonleaf"),
            "--out", str(prep), "--side", "16", "--seed", "1",
        ]) == 0
        counts = json.loads((prep / "counts.json").read_text())
        assert counts["train"]["full_leaf"] + counts["test"]["full_leaf"] == 36
        assert (prep / "config.echo.cfg").exists()

        run = tmp_path / "clf"
        assert dispatch([
            "lflseg", "train", "--data", str(prep / "dataset"), "--out", str(run),
            "--epochs", "2", "--batch", "32", "--side", "16", "--seed", "1",
        ]) == 0
        ckpts = list((run / "checkpoints").glob("*.pt"))
        assert len(ckpts) == 1
        assert "test_accuracy" in json.loads((run / "metrics.json").read_text())

        masks = tmp_path / "masks"
        assert dispatch([
            "lflseg", "segment", "--in", str(lflseg_sources / "full"),
            "--out", str(masks), "--ckpt", str(ckpts[0]), "--delta", "0.35",
        ]) == 0
        assert len(list(masks.glob("*.png"))) == 6  # one mask per input image

    def test_segment_refuses_same_directory(self, lflseg_sources, tmp_path):
        code = dispatch([
            "lflseg", "segment", "--in", str(lflseg_sources / "full"),
            "--out", str(lflseg_sources / "full"), "--ckpt", str(tmp_path / "x.pt"),
        ])
        assert code == 2


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    return write_gan_corpus(tmp_path_factory.mktemp("gan"), n_train=3, n_test=2, side=32, seed=0)


class TestGanPipeline:
    def test_train_then_generate(self, corpus, tmp_path):
        run = tmp_path / "gan_run"
        assert dispatch([
            "leafgan", "train", "--data", str(corpus["root"]), "--out", str(run),
            "--masks", str(corpus["masks"]), "--epochs", "1", "--side", "32",
            "--ngf", "8", "--ndf", "8", "--blocks", "2", "--seed", "0",
        ]) == 0
        assert (run / "loss_curves.csv").exists()
        assert (run / "config.echo.cfg").exists()

        gen_dir = tmp_path / "generated"
        assert dispatch([
            "leafgan", "generate", "--ckpt", str(run / "checkpoints"),
            "--in", str(corpus["testA"]), "--out", str(gen_dir),
        ]) == 0
        names = sorted(p.name for p in gen_dir.glob("*.png"))
        assert len(names) == 2 and names[0].endswith("_fake_B.png")

        comp_dir = tmp_path / "composited"
        assert dispatch([
            "leafgan", "generate", "--ckpt", str(run / "checkpoints"),
            "--in", str(corpus["trainA"]), "--out", str(comp_dir),
            "--composite", "--masks", str(corpus["masks"]),
        ]) == 0
        comp_names = sorted(p.name for p in comp_dir.glob("*.png"))
        assert len(comp_names) == 3 and comp_names[0].endswith("_fake_B_comp.png")

    def test_missing_masks_is_config_error(self, corpus, tmp_path, capsys):
        code = dispatch([
            "leafgan", "train", "--data", str(corpus["root"]), "--out", str(tmp_path / "r"),
            "--epochs", "1", "--side", "32", "--ngf", "8", "--ndf", "8", "--blocks", "2",
        ])
        assert code == 2


def _write_class_folders(root, n, seed, classes=("healthy", "spotty")):
    gen = np.random.default_rng(seed)
    means = {"healthy": (0.2, 0.8, 0.2), "spotty": (0.7, 0.3, 0.2)}
    for cls in classes:
        for i in range(n):
            img = np.clip(gen.normal(means[cls], 0.08, (16, 16, 3)), 0, 1).astype(np.float32)
            save_image(img, root / cls / f"{cls}_{i:03d}.png")
    return root


class TestEvalPipeline:
    def test_train_and_report(self, tmp_path):
        train_root = _write_class_folders(tmp_path / "train", 8, seed=0)
        test_root = _write_class_folders(tmp_path / "test", 4, seed=9)

        run_a = tmp_path / "runA"
        assert dispatch([
            "eval", "train", "--data", str(train_root), "--out", str(run_a),
            "--epochs", "6", "--batch", "16", "--side", "16", "--seed", "0",
        ]) == 0
        ckpt_a = next((run_a / "checkpoints").glob("*.pt"))

        aug_root = _write_class_folders(tmp_path / "aug", 3, seed=4)
        run_b = tmp_path / "runB"
        assert dispatch([
            "eval", "train", "--data", str(train_root), "--augment", str(aug_root),
            "--out", str(run_b), "--epochs", "6", "--batch", "16", "--side", "16", "--seed", "0",
        ]) == 0
        ckpt_b = next((run_b / "checkpoints").glob("*.pt"))

        report_dir = tmp_path / "reports"
        assert dispatch([
            "eval", "report", "--test", str(test_root), "--out", str(report_dir),
            "--side", "16",
            "--clf", f"baseline={ckpt_a}",
            "--clf", f"baseline+leafgan={ckpt_b}",
        ]) == 0
        assert (report_dir / "report_baseline.csv").exists()
        assert (report_dir / "comparison.csv").exists()
        assert (report_dir / "comparison.txt").exists()

    def test_report_requires_tag_equals_path(self, tmp_path):
        code = dispatch([
            "eval", "report", "--test", str(tmp_path), "--out", str(tmp_path / "o"),
            "--clf", "just_a_path.pt",
        ])
        assert code == 2
