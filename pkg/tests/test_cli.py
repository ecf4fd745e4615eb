import json
from pathlib import Path

import pytest

from modrl.cli import main

TINY_TRAIN = {
    "n_envs": 4, "n_steps": 16, "minibatches": 4, "epochs": 2,
    "total_frames": 128, "finetune_frames": 128, "hidden": [6, 6],
}


def tiny_config(tmp_path, **overrides):
    cfg = {
        "env": {"kind": "do"},
        "train": dict(TINY_TRAIN),
        "reg": {"lambda_cc": 0.05, "schedule_start": 0.0, "schedule_end": 0.1},
        "detect": {"episodes": 5},
        "intervene": {"episodes": 5},
        "eval": {"episodes": 5},
        "out_dir": str(tmp_path / "run"),
        "seeds": [0],
    }
    cfg.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path, cfg


@pytest.mark.parametrize("command", ["train", "detect", "intervene", "sweep",
                                     "render", "eval"])
def test_every_subcommand_has_help(command, capsys):
    with pytest.raises(SystemExit) as exc:
        main([command, "--help"])
    assert exc.value.code == 0
    assert "usage" in capsys.readouterr().out


def test_train_writes_artifacts_and_is_reproducible(tmp_path, capsys):
    path, cfg = tiny_config(tmp_path)
    assert main(["train", "--config", str(path)]) == 0
    out = Path(cfg["out_dir"]) / "seed0"
    for stage in ("raw", "pruned", "finetuned"):
        assert (out / f"checkpoint_{stage}.json").exists()
    metrics = (out / "metrics.csv").read_bytes()
    assert main(["train", "--config", str(path)]) == 0
    assert (out / "metrics.csv").read_bytes() == metrics


def test_missing_env_kind_names_the_field(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"train": dict(TINY_TRAIN)}))
    assert main(["train", "--config", str(path)]) == 2
    assert "env.kind" in capsys.readouterr().err


def test_unknown_key_rejected_by_name(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"env": {"kind": "do", "gravity": 9.8}}))
    assert main(["train", "--config", str(path)]) == 2
    assert "env.gravity" in capsys.readouterr().err


def test_invalid_preset_errors(capsys):
    assert main(["train", "--preset", "nonexistent"]) == 2
    assert "unknown preset" in capsys.readouterr().err


def test_preset_with_overrides(tmp_path):
    code = main(["train", "--preset", "do-desk",
                 "--set", "train.n_envs=4", "--set", "train.n_steps=16",
                 "--set", "train.minibatches=4", "--set", "train.epochs=2",
                 "--set", "train.total_frames=64",
                 "--set", "train.finetune_frames=0",
                 "--set", "train.hidden=[6,6]", "--set", "seeds=[0]",
                 "--out", str(tmp_path / "preset-run")])
    assert code == 0
    assert (tmp_path / "preset-run" / "seed0" / "checkpoint_finetuned.json").exists()


class TestPipelineCommands:
    @pytest.fixture()
    def trained(self, tmp_path):
        path, cfg = tiny_config(tmp_path)
        assert main(["train", "--config", str(path)]) == 0
        return Path(cfg["out_dir"]) / "seed0"

    def test_detect_then_cached_trace(self, trained, capsys):
        ckpt = trained / "checkpoint_finetuned.json"
        assert main(["detect", "--checkpoint", str(ckpt), "--episodes", "5"]) == 0
        out = capsys.readouterr().out
        assert "collected" in out
        parts = list(trained.glob("partition_*.json"))
        assert len(parts) == 1
        assert main(["detect", "--checkpoint", str(ckpt), "--episodes", "5"]) == 0
        assert "cached" in capsys.readouterr().out

    def test_detect_missing_checkpoint_fails(self, tmp_path, capsys):
        assert main(["detect", "--checkpoint", str(tmp_path / "nope.json")]) == 2

    def test_intervene_and_stale_partition(self, trained, tmp_path, capsys):
        ckpt = trained / "checkpoint_finetuned.json"
        assert main(["detect", "--checkpoint", str(ckpt), "--episodes", "5"]) == 0
        part = next(iter(trained.glob("partition_*.json")))
        assert main(["intervene", "--checkpoint", str(ckpt),
                     "--partition", str(part), "--episodes", "5"]) == 0
        csvs = list(trained.glob("interventions_*.csv"))
        assert len(csvs) == 1
        header = csvs[0].read_text().splitlines()[1]
        assert header.startswith("community,mode,group,freq_pct")
        # a partition recorded against a different checkpoint must be refused
        raw = trained / "checkpoint_raw.json"
        capsys.readouterr()
        assert main(["intervene", "--checkpoint", str(raw),
                     "--partition", str(part), "--episodes", "5"]) == 2
        assert "stale partition" in capsys.readouterr().err

    def test_render_formats_and_partition_overlay(self, trained, capsys):
        ckpt = trained / "checkpoint_finetuned.json"
        assert main(["render", "--checkpoint", str(ckpt), "--labels"]) == 0
        svg = list(trained.glob("render_*.svg"))
        assert len(svg) == 1
        first = svg[0].read_bytes()
        assert main(["render", "--checkpoint", str(ckpt), "--labels"]) == 0
        assert svg[0].read_bytes() == first
        assert main(["render", "--checkpoint", str(ckpt),
                     "--format", "dot"]) == 0
        assert list(trained.glob("render_*.dot"))
        assert main(["detect", "--checkpoint", str(ckpt), "--episodes", "5"]) == 0
        part = next(iter(trained.glob("partition_*.json")))
        assert main(["render", "--checkpoint", str(ckpt),
                     "--partition", str(part)]) == 0
        assert list(trained.glob("render_*_part.svg"))

    def test_eval_prints_mean_return(self, trained, capsys):
        ckpt = trained / "checkpoint_finetuned.json"
        assert main(["eval", "--checkpoint", str(ckpt),
                     "--episodes", "5", "--seed", "1"]) == 0
        assert "mean_return=" in capsys.readouterr().out


def test_sweep_grid_and_aggregates(tmp_path, capsys):
    path, cfg = tiny_config(tmp_path)
    code = main(["sweep", "--config", str(path), "--lambdas", "0.0,0.05",
                 "--seeds", "0", "--out", str(tmp_path / "sw")])
    assert code == 0
    runs = (tmp_path / "sw" / "runs.csv").read_text().splitlines()
    agg = (tmp_path / "sw" / "aggregate.csv").read_text().splitlines()
    assert len(runs) == 2 + 2   # hash header + column header + 2 cells
    assert len(agg) == 2 + 2    # one aggregate row per lambda
    assert runs[0].startswith("# config_hash=")


def test_output_root_env_var(tmp_path, monkeypatch):
    monkeypatch.setenv("MODRL_OUT", str(tmp_path / "root"))
    path, cfg = tiny_config(tmp_path, out_dir="rel/run")
    assert main(["train", "--config", str(path)]) == 0
    assert (tmp_path / "root" / "rel" / "run" / "seed0" / "metrics.csv").exists()
