import csv
import json
import subprocess
import sys

import pytest

from valueprofiles.cli import TRIAL_COLUMNS, fmt, main
from valueprofiles.config import load_config, task_from_ini, task_to_ini
from valueprofiles.errors import ConfigError
from valueprofiles.mechanisms import context_conditional_stats

RECOVER_FILES = {"aic_confusion.csv", "ll_confusion.csv", "bic_confusion.csv", "param_recovery.csv", "summary.txt", "config.ini"}


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


def write_config(tmp_path, shipped_config, edit=lambda s: s, name="cfg.ini"):
    path = tmp_path / name
    path.write_text(edit(shipped_config.read_text()))
    return path


def test_shipped_config_loads(shipped_config):
    cfg = load_config(shipped_config)
    assert cfg.task.n_trials == 400 and cfg.hyper.context_stay_prob == 0.98
    assert cfg.experiment.generator_labels == ("M1", "M2", "M3", "EpsGreedy", "SoftmaxQ")
    assert cfg.agent("M3").params["gamma1"] == 4.0
    assert cfg.simulate.kind == "M3"


def test_task_ini_round_trip(task):
    assert task_from_ini(task_to_ini(task)) == task


@pytest.mark.parametrize(
    "old,new,needle",
    [
        ("hint_accuracy = 0.85", "hint_accuracy = 1.85", "cfg.ini:10: [task]"),
        ("gamma = 2.5", "gama = 2.5", "cfg.ini:25: [generator.M1] gama"),
        ("n_folds = 5", "n_folds = five", "[experiment]"),
        ("kind = M3", "kind = M9", "[simulate] kind"),
        ("[model]", "[modle]", "missing required section [model]"),
    ],
)
def test_config_errors_name_file_and_line(tmp_path, shipped_config, old, new, needle):
    path = write_config(tmp_path, shipped_config, lambda s: s.replace(old, new, 1))
    with pytest.raises(ConfigError) as exc:
        load_config(path)
    assert needle in str(exc.value)


def test_fmt_six_significant_digits():
    assert fmt(1 / 3) == "0.333333" and fmt(None) == "" and fmt(123456789.0) == "1.23457e+08"


@pytest.fixture
def sim_config(tmp_path, shipped_config):
    def make(kind):
        return write_config(tmp_path, shipped_config, lambda s: s.replace("kind = M3", f"kind = {kind}"), f"{kind}.ini")

    return make


def test_simulate_writes_one_row_per_trial(tmp_path, sim_config):
    assert main(["simulate", str(sim_config("M3")), str(tmp_path / "out")]) == 0
    rows = read_csv(tmp_path / "out" / "M3_run000.csv")
    assert len(rows) == 401 and tuple(rows[0]) == TRIAL_COLUMNS
    first = dict(zip(rows[0], rows[1]))
    assert first["true_context"] == "volatile" and first["w0"] != "" and first["run_id"] == "0"
    assert abs(float(first["w0"]) + float(first["w1"]) - 1) < 1e-5


def test_simulate_leaves_undefined_columns_empty(tmp_path, sim_config):
    assert main(["simulate", str(sim_config("M1")), str(tmp_path / "m1")]) == 0
    rows = read_csv(tmp_path / "m1" / "M1_run000.csv")
    col = {c: i for i, c in enumerate(rows[0])}
    assert all(r[col["w0"]] == "" and r[col["w1"]] == "" for r in rows[1:])
    assert main(["simulate", str(sim_config("SoftmaxQ")), str(tmp_path / "q")]) == 0
    rows = read_csv(tmp_path / "q" / "SoftmaxQ_run000.csv")
    assert all(r[col["gamma_eff"]] == "" and r[col["q_ctx_volatile"]] == "" for r in rows[1:])


def test_simulate_is_byte_identical(tmp_path, sim_config):
    cfg = sim_config("M2")
    main(["simulate", str(cfg), str(tmp_path / "a")])
    main(["simulate", str(cfg), str(tmp_path / "b")])
    assert (tmp_path / "a" / "M2_run000.csv").read_bytes() == (tmp_path / "b" / "M2_run000.csv").read_bytes()


def test_recover_manifest(recover_outputs):
    _, out, _ = recover_outputs
    names = {p.name for p in out.iterdir() if p.is_file()}
    assert RECOVER_FILES <= names
    assert len(list((out / "fits").glob("*.json"))) == 75
    doc = json.loads((out / "fits" / "M3_run0_M3.json").read_text())
    assert doc["generator"] == "M3" and len(doc["folds"]) == 5 and len(doc["folds"][0]["search_trace"]) == 108
    header = read_csv(out / "aic_confusion.csv")[0]
    assert header == ["generator", "M1", "M1_se", "M2", "M2_se", "M3", "M3_se", "winner"]
    assert "*" in (out / "summary.txt").read_text()


def test_truncated_config_fails_without_outputs(tmp_path, shipped_config, capsys):
    text = shipped_config.read_text()
    path = tmp_path / "trunc.ini"
    path.write_text(text[: text.index("context_stay_prob") + 8])
    out = tmp_path / "never"
    assert main(["recover", str(path), str(out)]) == 1
    assert not out.exists()
    assert "config error" in capsys.readouterr().err
    assert not [p for p in tmp_path.iterdir() if p.name.startswith(".staging")]


def test_missing_config_file_is_config_error(tmp_path):
    assert main(["simulate", str(tmp_path / "absent.ini"), str(tmp_path / "o")]) == 1


def test_analyze_without_fits_is_runtime_error(tmp_path, capsys):
    (tmp_path / "empty").mkdir()
    assert main(["analyze", str(tmp_path / "empty"), str(tmp_path / "out")]) == 2
    assert "recover output directory" in capsys.readouterr().err
    assert not (tmp_path / "out").exists()


@pytest.fixture(scope="module")
def analysis_dir(recover_outputs, tmp_path_factory):
    out = tmp_path_factory.mktemp("analysis")
    assert main(["analyze", str(recover_outputs[1]), str(out)]) == 0
    return out


def test_analyze_emits_every_panel(analysis_dir):
    for p in "abcdef":
        assert (analysis_dir / f"panel_{p}.csv").exists()
        assert (analysis_dir / f"panel_{p}.svg").read_text().startswith("<svg")
    assert "bootstrap CI" in (analysis_dir / "micro_reversal_test.txt").read_text()


def test_panel_shapes(analysis_dir):
    f = read_csv(analysis_dir / "panel_f.csv")
    assert f[0] == ["trial", "mean_w0", "mean_w1", "is_micro_reversal"] and len(f) == 201
    d = read_csv(analysis_dir / "panel_d.csv")
    assert len(d) == 7 and {(r[0], r[1]) for r in d[1:]} == {(m, c) for m in ("M1", "M2", "M3") for c in ("volatile", "stable")}
    a = read_csv(analysis_dir / "panel_a.csv")
    assert [r[0] for r in a[1:]] == [str(o) for o in range(-10, 41)]


def test_panel_e_matches_context_stats(analysis_dir, analysis):
    rows = read_csv(analysis_dir / "panel_e.csv")[1:]
    for model, ctx, rate, n in rows:
        s = context_conditional_stats(analysis["runs"][model])[ctx]
        assert rate == fmt(s.hint_rate) and int(n) == s.n_trials


def test_console_script_entry_point(tmp_path, sim_config):
    proc = subprocess.run(
        [sys.executable, "-m", "valueprofiles.cli", "simulate", str(sim_config("EpsGreedy")), str(tmp_path / "o")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "o" / "EpsGreedy_run000.csv").exists()
