from __future__ import annotations

import json
import subprocess
import sys

import pytest

from devscreen.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture
def corpus_file(tmp_path, capsys):
    path = tmp_path / "corpus.csv"
    code, out, _ = run(capsys, "synth", "--n", "200", "--seed", "3",
                       "--noise", "0.05", "--out", str(path))
    assert code == 0
    summary = json.loads(out)
    assert summary["records"] == 200
    return path


def test_synth_summary_and_determinism(tmp_path, capsys):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    code, out, _ = run(capsys, "synth", "--n", "50", "--seed", "9", "--out", str(a))
    assert code == 0
    assert json.loads(out)["seed"] == 9
    run(capsys, "synth", "--n", "50", "--seed", "9", "--out", str(b))
    assert a.read_bytes() == b.read_bytes()
    run(capsys, "synth", "--n", "50", "--seed", "10", "--out", str(b))
    assert a.read_bytes() != b.read_bytes()


def test_featurize_writes_matrix(tmp_path, capsys, corpus_file):
    out = tmp_path / "features.csv"
    code, stdout, _ = run(capsys, "featurize", "--in", str(corpus_file), "--out", str(out))
    assert code == 0
    summary = json.loads(stdout)
    assert summary["features"] == 68
    lines = out.read_text().splitlines()
    assert lines[0].startswith("project_id,mirror,fork,")
    assert lines[0].endswith(",star,watcher,community,committer,label")
    assert len(lines) == 201
    assert lines[1].split(",")[-1] in ("TRUE", "FALSE")


def test_train_and_classify(tmp_path, capsys, corpus_file):
    model = tmp_path / "model.tree"
    code, stdout, _ = run(capsys, "train", "--in", str(corpus_file),
                          "--cf", "0.25", "--out", str(model))
    assert code == 0
    summary = json.loads(stdout)
    assert summary["nodes"] >= 1
    assert model.exists()

    # byte-identical retrain
    again = tmp_path / "model2.tree"
    run(capsys, "train", "--in", str(corpus_file), "--cf", "0.25", "--out", str(again))
    assert model.read_bytes() == again.read_bytes()

    preds = tmp_path / "preds.csv"
    code, stdout, _ = run(capsys, "classify", "--model", str(model),
                          "--in", str(corpus_file), "--out", str(preds))
    assert code == 0
    lines = preds.read_text().splitlines()
    assert lines[0] == "project_id,predicted,leaf_id,confidence"
    assert len(lines) == 201
    first = lines[1].split(",")
    assert first[0] == "syn-000000"
    assert first[1] in ("TRUE", "FALSE")
    assert 0.0 <= float(first[3]) <= 1.0


def test_train_text_prints_tree(tmp_path, capsys, corpus_file):
    model = tmp_path / "model.tree"
    code, stdout, _ = run(capsys, "train", "--in", str(corpus_file),
                          "--text", "--out", str(model))
    assert code == 0
    assert " = 0" in stdout or stdout.startswith(": ")


def test_eval_prints_metrics_and_writes_figure(tmp_path, capsys, corpus_file):
    figures = tmp_path / "figs"
    csv_out = tmp_path / "eval.csv"
    code, stdout, _ = run(capsys, "eval", "--in", str(corpus_file),
                          "--out", str(csv_out), "--figures", str(figures))
    assert code == 0
    assert "precision: " in stdout and "recall:    " in stdout
    assert csv_out.read_text().splitlines()[0].startswith("strategy,precision")
    assert (figures / "eval_metrics.png").stat().st_size > 0


def test_cv_reports_folds(tmp_path, capsys, corpus_file):
    csv_out = tmp_path / "cv.csv"
    code, stdout, _ = run(capsys, "cv", "--in", str(corpus_file), "--k", "4",
                          "--seed", "1", "--out", str(csv_out))
    assert code == 0
    assert "folds:     4 (seed 1)" in stdout
    lines = csv_out.read_text().splitlines()
    assert len(lines) == 6  # header + 4 folds + pooled
    assert lines[-1].startswith("pooled 4-fold cv")


def test_baseline_fraction_list(tmp_path, capsys, corpus_file):
    figures = tmp_path / "figs"
    code, stdout, _ = run(capsys, "baseline", "--strategy", "top",
                          "--dimension", "star", "--fraction", "0.1,0.5,1.0",
                          "--in", str(corpus_file), "--figures", str(figures))
    assert code == 0
    assert stdout.count("strategy:  top(star") == 3
    assert (figures / "baseline_top_star.png").stat().st_size > 0


def test_baseline_rejects_bad_fraction(capsys, corpus_file):
    with pytest.raises(SystemExit) as exc:
        main(["baseline", "--strategy", "top", "--dimension", "star",
              "--fraction", "a,b", "--in", str(corpus_file)])
    assert exc.value.code == 2


def test_report_lists_candidates(tmp_path, capsys, corpus_file):
    out = tmp_path / "misses.csv"
    code, stdout, _ = run(capsys, "report", "--in", str(corpus_file),
                          "--out", str(out), "--threshold", "0.02")
    assert code == 0
    summary = json.loads(stdout)
    assert summary["n_total"] == 200
    assert isinstance(summary["candidate_strings"], list)
    assert summary["threshold_exceeded"] == (summary["fraction"] > 0.02)
    lines = out.read_text().splitlines()
    assert lines[0] == "project_id,predicted,truth,leaf_id,description"
    assert len(lines) == summary["misclassified"] + 1


def test_triage_prepare_and_export(tmp_path, capsys, corpus_file):
    session_dir = tmp_path / "session"
    code, stdout, err = run(capsys, "triage", "prepare", "--in", str(corpus_file),
                            "--session", str(session_dir),
                            "--coverage", "0.9", "--effort-budget", "0.6")
    assert code == 0
    summary = json.loads(stdout)
    assert (session_dir / "session.json").exists()
    assert summary["queued"] + summary["auto"] == 200
    assert summary["effort"] <= 0.6

    # no decisions yet: export is empty
    code, stdout, _ = run(capsys, "triage", "export", "--session", str(session_dir))
    assert code == 0 and stdout == ""


def test_triage_prepare_explicit_leaves(tmp_path, capsys, corpus_file):
    session_dir = tmp_path / "session"
    code, stdout, _ = run(capsys, "triage", "prepare", "--in", str(corpus_file),
                          "--session", str(session_dir), "--leaves", "0")
    assert code == 0
    assert json.loads(stdout)["flagged_leaves"] == [0]


def test_triage_prepare_budget_diagnostic(tmp_path, capsys, corpus_file):
    session_dir = tmp_path / "session"
    code, stdout, err = run(capsys, "triage", "prepare", "--in", str(corpus_file),
                            "--session", str(session_dir),
                            "--coverage", "1.0", "--effort-budget", "0.01")
    assert code == 0
    assert "warning: no leaf fits the effort budget" in err
    assert json.loads(stdout)["queued"] == 0


def test_schema_env_and_flag(tmp_path, capsys, corpus_file, monkeypatch, schema):
    from devscreen.features import FeatureSchema, save_lexicon
    trimmed = FeatureSchema(description_keywords=schema.description_keywords[:10],
                            url_keywords=schema.url_keywords)
    lex = tmp_path / "trimmed.json"
    save_lexicon(trimmed, lex)

    out = tmp_path / "features.csv"
    monkeypatch.setenv("DEVSCREEN_SCHEMA", str(lex))
    code, stdout, _ = run(capsys, "featurize", "--in", str(corpus_file), "--out", str(out))
    assert code == 0
    assert json.loads(stdout)["features"] == 10 + 3 + 2 + 4

    # explicit flag beats the environment
    full = tmp_path / "full.json"
    save_lexicon(schema, full)
    code, stdout, _ = run(capsys, "featurize", "--in", str(corpus_file),
                          "--schema", str(full), "--out", str(out))
    assert json.loads(stdout)["features"] == 68


def test_ingest_with_column_map_and_labels(tmp_path, capsys):
    raw = tmp_path / "raw.csv"
    raw.write_text(
        "id,login,repo,link,summary,lang,stars,watchers,committers,members,fork,created\n"
        "r1,octo,web,https://x/octo/web,a web framework,Ruby,5,7,2,3,false,2015-01-01\n"
        "r2,octo,site,https://x/octo/site,my blog,Ruby,1,1,1,1,true,2015-01-02\n"
        "r3,octo,gone,https://x/octo/gone,,,0,0,0,0,false,2015-01-03\n",
        encoding="utf-8")
    cmap = tmp_path / "map.json"
    cmap.write_text(json.dumps({"fields": {
        "project_id": "id", "owner": "login", "name": "repo", "url": "link",
        "description": "summary", "language": "lang", "star_count": "stars",
        "watcher_count": "watchers", "committer_count": "committers",
        "community_count": "members", "is_fork": "fork", "created_at": "created",
    }}), encoding="utf-8")
    labels = tmp_path / "labels.ndjson"
    labels.write_text(
        '{"project_id": "r1", "decision": "TRUE"}\n'
        '{"project_id": "zzz", "decision": "FALSE"}\n', encoding="utf-8")

    out = tmp_path / "clean.csv"
    code, stdout, err = run(capsys, "ingest", "--in", str(raw),
                            "--column-map", str(cmap), "--labels", str(labels),
                            "--out", str(out))
    assert code == 0
    summary = json.loads(stdout)
    # the fork and the removed stub are filtered out
    assert summary["read"] == 3 and summary["kept"] == 1
    assert summary["labels_applied"] == 1
    assert summary["label_warnings"] == 1
    assert "unknown project_id 'zzz'" in err

    from devscreen.corpus import load_dataset
    ds = load_dataset(out)
    assert list(ds)[0].project_id == "r1"
    assert list(ds)[0].label is True


def test_missing_input_is_operational_error(tmp_path, capsys):
    code, _, err = run(capsys, "featurize", "--in", str(tmp_path / "nope.csv"),
                       "--out", str(tmp_path / "x.csv"))
    assert code == 1
    assert err.startswith("error: ")


def test_usage_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["no-such-command"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["train"])  # missing required --in/--out
    assert exc.value.code == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "devscreen", "--help"],
                          capture_output=True, text=True, timeout=60)
    assert proc.returncode == 0
    assert "ingest" in proc.stdout and "triage" in proc.stdout
