import json

import numpy as np
import pandas as pd
import pytest

from conftest import make_record
from peft_forge import settings
from peft_forge.adapters.accounting import count_trainable_params
from peft_forge.autodiff.tensor import set_default_dtype
from peft_forge.errors import ConfigParseError, PeftForgeError
from peft_forge.experiment import runner, sink
from peft_forge.experiment.cli import main
from peft_forge.experiment.config import AUTO, default_config, parse_config, parse_config_text
from peft_forge.experiment.results import emit_results, format_summary, summarize, write_summary
from peft_forge.experiment.runner import clear_caches, evaluate_checkpoint, run_experiment
from peft_forge.scenarios import (
    STUDIES,
    common,
    scenario1_position_ablation,
    scenario2_structure_ablation,
    scenario3_configuration_comparison,
    scenario4_normalization_study,
    scenario5_regularization_grid,
    scenario6_failure_analysis,
)
from peft_forge.training import loop

HEADER = "experiment.name = demo\ndata.source = synthetic\n"


# ---------------- config parsing ----------------
def test_defaults_fill_every_key():
    cfg = parse_config_text(HEADER + "# a comment\n\nadapter.layernorm = yes  # inline\n")
    assert cfg.name == "demo"
    assert cfg["adapter.layernorm"] is True
    assert cfg["train.base_lr"] == AUTO
    assert cfg.train.base_lr == 1e-3
    assert cfg.seeds == (0, 1, 2, 3, 4)


def test_text_round_trip(tmp_path):
    cfg = default_config("demo", adapter__rank=4, train__base_lr=5e-4)
    path = tmp_path / "demo.cfg"
    path.write_text(cfg.to_text())
    again = parse_config(path)
    assert again.values == cfg.values
    assert again.config_hash == cfg.config_hash


@pytest.mark.parametrize("extra,key_path", [
    ("optimizer.lr = 0.1\n", "optimizer.lr"),
    ("adapter.rank = 4\nadapter.rank = 8\n", "adapter.rank"),
    ("adapter.rank = eight\n", "adapter.rank"),
    ("adapter.position = sideways\n", "adapter.position"),
    ("experiment.seeds = \n", "experiment.seeds"),
    ("data.augmentation = autoaugment\n", "data.augmentation"),
])
def test_parse_errors_name_the_key(extra, key_path):
    with pytest.raises(ConfigParseError) as info:
        parse_config_text(HEADER + extra)
    assert info.value.key_path == key_path


def test_line_numbers_and_missing_keys():
    with pytest.raises(ConfigParseError) as info:
        parse_config_text(HEADER + "\nadapter.rank = 4\nadapter.rank = 8\n")
    assert info.value.line_no == 5
    with pytest.raises(ConfigParseError) as info:
        parse_config_text("experiment.name = demo\n")
    assert info.value.key_path == "data.source"


def test_cross_field_validation():
    with pytest.raises(ConfigParseError) as info:
        default_config("demo", source="folder")
    assert info.value.key_path == "data.path"
    with pytest.raises(ConfigParseError) as info:
        default_config("demo", adapter__preset="none")
    assert info.value.key_path == "adapter.preset"
    with pytest.raises(ConfigParseError) as info:
        default_config("demo", backbone__hidden_dim=30)
    assert info.value.key_path == "backbone"
    with pytest.raises(ConfigParseError):
        default_config("demo").override({"adapter.colour": "red"})


def test_config_hash_tracks_what_a_run_computes():
    cfg = default_config("demo")
    assert len(cfg.config_hash) == 12
    assert cfg.config_hash == default_config("demo").config_hash
    assert cfg.with_overrides(experiment__seeds="7", experiment__output="x.csv").config_hash == cfg.config_hash
    assert cfg.with_overrides(adapter__rank=4).config_hash != cfg.config_hash


def test_custom_preset_builds_a_single_ffn_adapter():
    cfg = default_config("demo", adapter__preset="custom", adapter__position="parallel",
                         adapter__scaling="channel", adapter__dropout=0.1)
    plan = cfg.plan
    assert plan.attention is None
    assert plan.ffn.position == "parallel"
    assert plan.ffn.scaling == "learned-channel"
    assert plan.ffn.dropout_rate == 0.1


# ---------------- result files ----------------
def test_csv_columns_and_precision(tmp_path):
    records = [make_record(val_acc=1 / 3, test_acc=2 / 3), make_record(seed=1, norm=True, data_norm="imagenet")]
    path = emit_results(records, tmp_path / "out" / "results.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "config_hash,seed,position,rank,init,scaling,norm,params,val_acc,test_acc,seconds,data_norm"
    assert lines[1] == "abc123def456,0,post,8,houlsby,learned-channel,false,1234,0.333333,0.666667,1.5,inception"
    assert lines[2].split(",")[6] == "true"
    assert lines[2].split(",")[-1] == "imagenet"


def test_json_output_keeps_epoch_losses(tmp_path):
    path = emit_results([make_record(val_acc=1 / 3)], tmp_path / "results.json", fmt="json")
    payload = json.loads(path.read_text())
    assert payload[0]["val_acc"] == 0.333333
    assert payload[0]["epoch_losses"] == [1.0, 0.5]
    with pytest.raises(ValueError):
        emit_results([], tmp_path / "results.xml", fmt="xml")


def test_summary_statistics(tmp_path):
    records = [
        make_record(label="a", seed=0, test_acc=0.5),
        make_record(label="a", seed=1, test_acc=0.7),
        make_record(label="b", seed=0, val_acc=0.6, test_acc=0.8),
    ]
    summary = summarize(records)
    assert list(summary["label"]) == ["a", "b"]
    assert summary["test_mean"].tolist() == pytest.approx([60.0, 80.0])
    assert summary["test_std"].tolist() == pytest.approx([100 * np.std([0.5, 0.7], ddof=1), 0.0])
    assert summary["delta"].tolist() == pytest.approx([0.0, 20.0])
    assert summary["val_delta"].tolist() == pytest.approx([0.0, 10.0])
    assert summary["n"].tolist() == [2, 1]
    table = format_summary(summary)
    assert "±" in table and "Δ val" in table and "+10.00" in table
    assert format_summary(summarize([])) == "(no results)"
    target = write_summary(summary, tmp_path / "results.csv")
    assert target.name == "results.csv.summary.csv"
    assert len(pd.read_csv(target)) == 2


# ---------------- influx sink ----------------
def test_point_line_protocol():
    line = sink.build_point(make_record(), "position").to_line_protocol()
    assert line.startswith("peft_forge_position,")
    assert "label=post" in line and "study=position" in line
    assert "data_norm=inception" in line
    assert "params=1234i" in line
    assert "test_acc=0.25" in line


def test_sink_is_a_no_op_without_a_url():
    assert sink.write_records([make_record()], "train") == 0


class _FakeClient:
    writes = []
    fail = False

    def __init__(self, **kwargs):
        self.kwargs = kwargs

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False

    def write_api(self, write_options=None):
        return self

    def write(self, bucket, record, write_precision=None):
        if self.fail:
            raise ConnectionError("connection refused")
        self.writes.append((bucket, record))


def test_sink_writes_one_point_per_record(monkeypatch):
    monkeypatch.setattr(settings, "INFLUX_URL", "http://localhost:8086")
    monkeypatch.setattr(sink, "InfluxDBClient", _FakeClient)
    monkeypatch.setattr(_FakeClient, "writes", [])
    assert sink.write_records([make_record(), make_record(seed=1)], "train") == 2
    assert len(_FakeClient.writes[0][1]) == 2

    monkeypatch.setattr(_FakeClient, "fail", True)
    assert sink.write_records([make_record()], "train") == 0


# ---------------- studies ----------------
@pytest.mark.parametrize("module,count", [
    (scenario1_position_ablation, 4),
    (scenario2_structure_ablation, 9),
    (scenario3_configuration_comparison, 5),
    (scenario4_normalization_study, 2),
    (scenario5_regularization_grid, 6),
    (scenario6_failure_analysis, 4),
])
def test_study_rows_build_valid_configs(module, count, tiny_cfg):
    assert len(module.ROWS) == count
    labels = [label for label, _ in module.ROWS]
    assert len(set(labels)) == count
    for _, overrides in module.ROWS:
        cfg = tiny_cfg.override(overrides)
        assert cfg.plan is not None


def test_regularization_grid_runs_on_the_base_adapter(tiny_cfg):
    drops = []
    for label, overrides in scenario5_regularization_grid.ROWS:
        cfg = tiny_cfg.override(overrides)
        plan = cfg.plan
        assert plan.attention is None, label
        ffn = plan.ffn
        assert (ffn.position, ffn.scaling, ffn.init, ffn.rank) == ("post", "none", "houlsby", 8), label
        assert ffn.use_bias and not ffn.use_layernorm, label
        drops.append((cfg.backbone.drop_path_max, ffn.drop_path_rate, ffn.dropout_rate))
    assert drops == [(0.1, 0.1, 0.0), (0.1, 0.0, 0.1), (0.1, 0.0, 0.0),
                     (0.0, 0.1, 0.0), (0.0, 0.0, 0.1), (0.0, 0.0, 0.0)]


def test_study_verbs():
    assert set(STUDIES) == {"ablate-position", "ablate-structure", "compare-configs",
                            "study-norm", "study-reg", "study-failure"}


def test_a_failing_row_does_not_stop_the_study(monkeypatch, tiny_cfg, capsys):
    def fake_run(cfg, label=None, study="train"):
        if label == "b":
            raise PeftForgeError("boom")
        return [make_record(label=label, seed=s, params=cfg["adapter.rank"]) for s in cfg.seeds]

    monkeypatch.setattr(common, "run_experiment", fake_run)
    rows = [("a", {"adapter.rank": 2}), ("b", {}), ("c", {"adapter.rank": 3})]
    result = common.run_rows(tiny_cfg, "toy", rows, "TOY")
    assert not result.ok
    assert result.failures == [("b", "boom")]
    assert [r.label for r in result.records] == ["a", "a", "c", "c"]
    assert list(result.summary["label"]) == ["a", "c"]
    out = capsys.readouterr().out
    assert "❌ b: boom" in out and "📍 3/3 c" in out


# ---------------- runs ----------------
def test_run_experiment_records(tiny_cfg):
    records = run_experiment(tiny_cfg, label="tiny")
    assert [r.seed for r in records] == [0, 1]
    expected = count_trainable_params(tiny_cfg.backbone, tiny_cfg.plan, 3)
    for r in records:
        assert r.params == expected
        assert r.position == "post" and r.rank == 4
        assert 0.0 <= r.val_acc <= 1.0 and 0.0 <= r.test_acc <= 1.0
        assert len(r.epoch_losses) == 2
        assert r.config_hash == tiny_cfg.config_hash


def test_seed_threads_share_the_worker_cap(monkeypatch, tiny_cfg):
    set_default_dtype(tiny_cfg["experiment.precision"])
    runner.pretrained_backbone(tiny_cfg)
    batch_workers = []
    real_assemble = loop.assemble_batch

    def counting_assemble(*args, workers=None, **kwargs):
        batch_workers.append(workers)
        return real_assemble(*args, workers=workers, **kwargs)

    monkeypatch.setattr(loop, "assemble_batch", counting_assemble)
    monkeypatch.setattr(runner, "worker_cap", lambda: 5)
    records = run_experiment(tiny_cfg)
    assert len(records) == 2
    assert batch_workers and set(batch_workers) == {2}


def test_linear_probe_run(tiny_cfg):
    cfg = tiny_cfg.override({"train.mode": "linear", "experiment.seeds": "0"})
    (record,) = run_experiment(cfg)
    assert record.params == 16 * 3 + 3
    assert record.position == "-"


def test_identical_configs_write_identical_results(tiny_cfg, tmp_path):
    first = emit_results(run_experiment(tiny_cfg), tmp_path / "first.csv")
    clear_caches()
    second = emit_results(run_experiment(tiny_cfg), tmp_path / "second.csv")
    pd.testing.assert_frame_equal(
        pd.read_csv(first).drop(columns="seconds"),
        pd.read_csv(second).drop(columns="seconds"),
    )


def test_saved_adapters_score_the_same(tiny_cfg, tmp_path):
    cfg = tiny_cfg.override({"experiment.checkpoint_dir": str(tmp_path), "experiment.seeds": "0"})
    (trained,) = run_experiment(cfg)
    checkpoint = tmp_path / f"{cfg.config_hash}-seed0.ckpt"
    assert checkpoint.exists()
    record = evaluate_checkpoint(cfg, checkpoint)
    assert record.seed == -1 and record.study == "eval"
    assert record.test_acc == trained.test_acc
    assert record.val_acc == trained.val_acc


# ---------------- command line ----------------
def _write_config(cfg, tmp_path):
    path = tmp_path / "tiny.cfg"
    path.write_text(cfg.to_text())
    return str(path)


def test_train_command(tiny_cfg, tmp_path, capsys):
    out = tmp_path / "train.csv"
    assert main(["train", "--config", _write_config(tiny_cfg, tmp_path), "--out", str(out)]) == 0
    assert len(pd.read_csv(out)) == 2
    assert (tmp_path / "train.csv.summary.csv").exists()
    assert "📊 2 records" in capsys.readouterr().out


def test_rank_sweep(tiny_cfg, tmp_path):
    out = tmp_path / "ranks.json"
    argv = ["train", "--config", _write_config(tiny_cfg, tmp_path), "--out", str(out),
            "--ranks", "1,2", "--seeds", "0", "--format", "json"]
    assert main(argv) == 0
    payload = json.loads(out.read_text())
    assert [(r["label"], r["rank"]) for r in payload] == [("r=1", 1), ("r=2", 2)]


def test_study_command(tiny_cfg, tmp_path):
    out = tmp_path / "failure.csv"
    argv = ["study-failure", "--config", _write_config(tiny_cfg, tmp_path), "--out", str(out), "--seeds", "0"]
    assert main(argv) == 0
    summary = pd.read_csv(tmp_path / "failure.csv.summary.csv")
    assert list(summary["label"]) == [label for label, _ in scenario6_failure_analysis.ROWS]


def test_study_command_sends_each_record_once(monkeypatch, tiny_cfg, tmp_path):
    monkeypatch.setattr(settings, "INFLUX_URL", "http://localhost:8086")
    monkeypatch.setattr(sink, "InfluxDBClient", _FakeClient)
    monkeypatch.setattr(_FakeClient, "writes", [])
    out = tmp_path / "norm.csv"
    argv = ["study-norm", "--config", _write_config(tiny_cfg, tmp_path), "--out", str(out), "--seeds", "0"]
    assert main(argv) == 0
    frame = pd.read_csv(out)
    n_records = len(frame)
    assert n_records == len(scenario4_normalization_study.ROWS)
    assert list(frame["data_norm"]) == ["inception", "imagenet"]
    assert len(_FakeClient.writes) == 1
    assert sum(len(points) for _, points in _FakeClient.writes) == n_records


def test_config_errors_exit_with_code_two(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("experiment.name = demo\nadapter.rank = many\n")
    assert main(["train", "--config", str(bad)]) == 2
    assert "adapter.rank" in capsys.readouterr().err
    assert main(["train", "--config", str(tmp_path / "missing.cfg")]) == 2


def test_unknown_verbs_are_rejected():
    with pytest.raises(SystemExit):
        main(["finetune"])


# ---------------- protocol checks on the desk-scale default ----------------
def _test_accs(cfg, seeds):
    return [r.test_acc for r in run_experiment(cfg.override({"experiment.seeds": seeds}))]


@pytest.mark.slow
def test_zero_initialized_adapters_trail_houlsby_init():
    base = default_config("zero-vs-houlsby").override({
        **common.ADAPTER_BASE, "train.epochs": 5, "train.warmup_epochs": 1,
    })
    houlsby = _test_accs(base, "0,1,2,3,4")
    zero = _test_accs(base.override({"adapter.init": "zero-degenerate"}), "0,1,2,3,4")
    assert sum(h > z for h, z in zip(houlsby, zero)) >= 4


@pytest.mark.slow
def test_adapters_beat_linear_probing_and_post_holds_up():
    base = default_config("smoke")
    adapter = np.mean(_test_accs(base.override({"adapter.preset": "adapter-plus", "adapter.rank": 8}), "0,1,2,3,4"))
    linear = np.mean(_test_accs(base.override({"train.mode": "linear"}), "0,1,2,3,4"))
    assert 100 * (adapter - linear) >= 5.0

    post = np.mean(_test_accs(base.override({**common.ADAPTER_BASE, "adapter.position": "post"}), "0,1,2,3,4"))
    intermediate = np.mean(_test_accs(base.override({**common.ADAPTER_BASE, "adapter.position": "intermediate"}),
                                      "0,1,2,3,4"))
    assert 100 * (intermediate - post) <= 0.5
