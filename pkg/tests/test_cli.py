import csv
import io
import json

import pytest

from acdc.cli import export_plot_data, main
from acdc.config import RunConfig, serialize_config
from acdc.engine import make_synthetic_providers, restore, run, snapshot
from acdc.errors import UnknownKind

from conftest import small_config


def write_config(tmp_path, cfg=None):
    cfg = cfg or small_config()
    path = tmp_path / "config.yaml"
    path.write_text(serialize_config(cfg))
    return path


@pytest.fixture
def run_dir(tmp_path):
    """A completed small run driven through the CLI entry point."""
    config_path = write_config(tmp_path)
    out = tmp_path / "run"
    assert main(["run", "--config", str(config_path), "--out", str(out)]) == 0
    return out


# ---------------------------------------------------------------------------
# run / resume


def test_run_writes_run_directory(run_dir):
    cfg = small_config()
    assert (run_dir / "config.yaml").exists()
    manifest = json.loads((run_dir / "manifest.json").read_text())
    assert manifest["version"] == "1"
    # one snapshot per generation plus the initial state
    assert len(manifest["snapshots"]) == cfg.generations + 1
    for rel in manifest["snapshots"].values():
        assert (run_dir / rel).exists()
    tf = json.loads((run_dir / "taskforce.json").read_text())
    assert len(tf["member_ids"]) <= cfg.taskforce_size


def test_run_seed_flag_overrides_config(tmp_path):
    config_path = write_config(tmp_path)
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    assert main(["run", "--config", str(config_path),
                 "--seed", "5", "--out", str(out_a)]) == 0
    assert main(["run", "--config", str(config_path),
                 "--seed", "5", "--out", str(out_b)]) == 0
    snap = "snapshots/gen_00006.snap"
    assert (out_a / snap).read_bytes() == (out_b / snap).read_bytes()


def test_resume_completes_interrupted_run(tmp_path):
    cfg = small_config()
    config_path = write_config(tmp_path, cfg)

    # reference: a full uninterrupted run
    ref = tmp_path / "ref"
    assert main(["run", "--config", str(config_path), "--out", str(ref)]) == 0

    # simulate an interruption by truncating the manifest to generation 3
    cut = tmp_path / "cut"
    assert main(["run", "--config", str(config_path), "--out", str(cut)]) == 0
    manifest = json.loads((cut / "manifest.json").read_text())
    manifest["snapshots"] = {g: p for g, p in manifest["snapshots"].items()
                             if int(g) <= 3}
    (cut / "manifest.json").write_text(json.dumps(manifest))
    for g in range(4, cfg.generations + 1):
        (cut / "snapshots" / f"gen_{g:05d}.snap").unlink()

    assert main(["resume", "--manifest", str(cut / "manifest.json")]) == 0
    final = f"snapshots/gen_{cfg.generations:05d}.snap"
    assert (cut / final).read_bytes() == (ref / final).read_bytes()


def test_resume_of_complete_run_is_noop(run_dir, capsys):
    assert main(["resume", "--manifest", str(run_dir / "manifest.json")]) == 0
    assert "already complete" in capsys.readouterr().out


def test_corrupt_config_hash_is_runtime_error(run_dir):
    (run_dir / "config.yaml").write_text(
        serialize_config(small_config(run_seed=99)))
    assert main(["resume", "--manifest", str(run_dir / "manifest.json")]) == 2


def test_missing_snapshot_is_runtime_error(run_dir):
    (run_dir / "snapshots" / "gen_00002.snap").unlink()
    assert main(["select-taskforce", "--manifest",
                 str(run_dir / "manifest.json"),
                 "--n", "2", "--strategy", "coverage"]) == 2


# ---------------------------------------------------------------------------
# select-taskforce / eval-coverage / lineage


def test_select_taskforce_outputs_members(run_dir, capsys):
    assert main(["select-taskforce", "--manifest",
                 str(run_dir / "manifest.json"),
                 "--n", "3", "--strategy", "coverage"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert len(out["member_ids"]) == 3
    assert out["selection_strategy"] == "coverage"


def test_select_taskforce_random_is_reproducible(run_dir, capsys):
    outs = []
    for _ in range(2):
        assert main(["select-taskforce", "--manifest",
                     str(run_dir / "manifest.json"),
                     "--n", "2", "--strategy", "random"]) == 0
        outs.append(capsys.readouterr().out)
    assert outs[0] == outs[1]


def test_eval_coverage_on_global_archive(run_dir, capsys):
    assert main(["eval-coverage", "--manifest", str(run_dir / "manifest.json"),
                 "--models", "seed0,seed1"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["models"] == ["seed0", "seed1"]
    assert 0.0 <= out["coverage"] <= 1.0
    assert set(out["per_model"]) == {"seed0", "seed1"}


def test_eval_coverage_with_holdout_file(run_dir, tmp_path, capsys):
    from acdc.engine import _task_to_json, make_holdout_tasks
    holdout = tmp_path / "holdout.jsonl"
    tasks = make_holdout_tasks(small_config(), 10)
    holdout.write_text("\n".join(json.dumps(_task_to_json(t)) for t in tasks))
    assert main(["eval-coverage", "--manifest", str(run_dir / "manifest.json"),
                 "--models", "seed0", "--holdout", str(holdout)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["n_tasks"] == 10


def test_eval_coverage_unknown_model(run_dir):
    assert main(["eval-coverage", "--manifest", str(run_dir / "manifest.json"),
                 "--models", "ghost"]) == 2


def test_lineage_prints_ancestry_tree(run_dir, capsys):
    manifest = json.loads((run_dir / "manifest.json").read_text())
    last = sorted(manifest["snapshots"], key=int)[-1]
    state = restore((run_dir / manifest["snapshots"][last]).read_bytes())
    bred = [gid for gid in state.genome_store if gid.startswith("g")]
    target = bred[0] if bred else "seed0"
    assert main(["lineage", "--manifest", str(run_dir / "manifest.json"),
                 "--model", target]) == 0
    out = capsys.readouterr().out
    assert target in out
    assert "(seed)" in out


def test_lineage_unknown_model(run_dir):
    assert main(["lineage", "--manifest", str(run_dir / "manifest.json"),
                 "--model", "ghost"]) == 2


# ---------------------------------------------------------------------------
# export


def test_export_all_kinds(run_dir, tmp_path):
    for kind in ("coverage_over_generations", "new_models_per_gen",
                 "vendi_over_epochs", "adaptation_mix"):
        out = tmp_path / f"{kind}.csv"
        assert main(["export", "--manifest", str(run_dir / "manifest.json"),
                     "--kind", kind, "--out", str(out)]) == 0
        raw = out.read_bytes()
        assert b"\r\n" in raw
        rows = list(csv.reader(io.StringIO(raw.decode("utf-8"))))
        assert len(rows) >= 2  # one header plus data
        assert all(len(r) == len(rows[0]) for r in rows)


def test_export_regeneration_is_bit_identical(run_dir, tmp_path):
    args = ["export", "--manifest", str(run_dir / "manifest.json"),
            "--kind", "coverage_over_generations"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_export_csv_matches_state(run_dir):
    manifest = json.loads((run_dir / "manifest.json").read_text())
    last = sorted(manifest["snapshots"], key=int)[-1]
    state = restore((run_dir / manifest["snapshots"][last]).read_bytes())
    text = export_plot_data(state, "new_models_per_gen")
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["generation", "new_models"]
    assert [int(r[1]) for r in rows[1:]] == \
        [s.new_models for s in state.gen_stats]


def test_export_unknown_kind_raises():
    state, _ = run(small_config())
    with pytest.raises(UnknownKind):
        export_plot_data(state, "mystery_plot")


# ---------------------------------------------------------------------------
# exit codes and usage


def test_missing_required_option_is_usage_error():
    assert main(["run"]) == 1


def test_unknown_command_is_usage_error():
    assert main(["frobnicate"]) == 1


def test_nonexistent_config_is_usage_error(tmp_path):
    assert main(["run", "--config", str(tmp_path / "absent.yaml")]) == 1


def test_invalid_strategy_is_usage_error(run_dir):
    assert main(["select-taskforce", "--manifest",
                 str(run_dir / "manifest.json"),
                 "--n", "2", "--strategy", "vibes"]) == 1


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    assert "Usage" in capsys.readouterr().out
