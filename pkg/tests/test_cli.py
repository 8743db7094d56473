import json

import pytest

from ecqed.cli import main
from ecqed.corpus import read_jsonl, write_jsonl
from ecqed.fixtures import DATA, fixture_manifest, fixture_source_dir

FIXTURE = str(fixture_source_dir())


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def tsv(out):
    return {row.split("\t")[0]: row.split("\t")[1:] for row in out.strip().splitlines() if not row.startswith("#")}


@pytest.fixture(scope="module")
def toy_config(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "toy.yaml"
    path.write_text('encoder: "toy:16:0"\nhidden_size: 16\nepochs: 2\nlr_other: 1.0e-3\n')
    return path


@pytest.fixture(scope="module")
def checkpoints(tmp_path_factory, toy_config):
    d = tmp_path_factory.mktemp("ckpt")
    multi, single = d / "multi.pt", d / "one.pt"
    assert main(["train", "--config", str(toy_config), "--data", FIXTURE, "--out", str(multi)]) == 0
    assert main(["train", "--config", str(toy_config), "--data", FIXTURE, "--out", str(single), "--one-grid"]) == 0
    return multi, single


def test_ingest_fixture(capsys, tmp_path):
    out_file = tmp_path / "canon.jsonl"
    code, out, _ = run(capsys, "ingest", "--data", FIXTURE, "--out", str(out_file), "--fig-dir", str(tmp_path / "figs"))
    assert code == 0
    rows = tsv(out)
    man = fixture_manifest()
    for split in ("train", "val", "test"):
        assert rows[split] == [str(man[k][split]) for k in ("conversations", "utterances", "quadruples")]
    assert len(read_jsonl(out_file)) == 8
    assert (tmp_path / "figs" / "overlap_distance.png").stat().st_size > 0
    assert (tmp_path / "figs" / "split_counts.tsv").read_text().startswith("split\t")


def test_stats_json(capsys):
    code, out, _ = run(capsys, "stats", "--data", FIXTURE)
    assert code == 0
    stats = json.loads(out)
    assert stats["emotion_type_counts"] == fixture_manifest()["emotion_type_counts"]


def test_ingest_empty_dir(capsys, tmp_path):
    code, _, err = run(capsys, "ingest", "--data", str(tmp_path))
    assert code == 1 and "no dialogs found" in err


def test_train_dry_run_echoes_defaults(capsys):
    code, out, _ = run(capsys, "train", "--dry-run")
    rows = tsv(out)
    assert code == 0
    assert rows["lr_encoder"] == ["2e-05"] and rows["lr_other"] == ["1e-05"] and rows["epochs"] == ["50"]
    assert rows["hidden_size"] == ["768"] and rows["batch_size"] == ["2"]


def test_train_config_errors(capsys, tmp_path):
    code, _, err = run(capsys, "train", "--dry-run", "--ablate", "mlp,biaffine")
    assert code == 2 and "both" in err
    bad = tmp_path / "bad.yaml"
    bad.write_text("learning_rate: 0.1\n")
    code, _, err = run(capsys, "train", "--dry-run", "--config", str(bad))
    assert code == 2 and "learning_rate" in err
    code, _, _ = run(capsys, "train", "--config", str(bad))
    assert code == 2


def test_train_writes_checkpoint_and_log(capsys, tmp_path, toy_config):
    out = tmp_path / "m.pt"
    code, stdout, _ = run(capsys, "train", "--config", str(toy_config), "--data", FIXTURE, "--out", str(out), "--fig-dir", str(tmp_path))
    assert code == 0 and out.stat().st_size > 0
    rows = tsv(stdout)
    assert {"best_epoch", "final_train_loss", "val_f1_quad"} <= set(rows)
    log = [json.loads(l) for l in open(str(out) + ".log.jsonl")]
    assert [r["epoch"] for r in log] == [1, 2]
    assert (tmp_path / "loss_curve.png").exists()


def test_evaluate_gold_as_pred(capsys):
    code, out, _ = run(capsys, "evaluate", "--data", FIXTURE, "--gold-as-pred", "--split", "all")
    rows = tsv(out)
    assert code == 0
    for level in ("quad", "pair", "emotion", "cause", "quad_overlap"):
        assert rows[level][2] == "1.000000"


def test_evaluate_pred_file(capsys, tmp_path, fixture_dialogs):
    data = tmp_path / "d1.jsonl"
    write_jsonl([d for d in fixture_dialogs if d.dialog_id == "te_case_study_1"], data)
    pred = tmp_path / "pred.jsonl"
    pred.write_text((DATA / "case_study_no_sshg_pred.jsonl").read_text().splitlines()[0] + "\n")
    report = tmp_path / "report.json"
    code, out, _ = run(capsys, "evaluate", "--data", str(data), "--pred-file", str(pred), "--out", str(report), "--fig-dir", str(tmp_path))
    assert code == 0
    assert tsv(out)["quad"][:3] == ["0.600000"] * 3
    assert json.loads(report.read_text())["quad"]["tp"] == 3
    assert (tmp_path / "eval.png").exists() and (tmp_path / "eval.tsv").exists()


def test_evaluate_both_case_study_dialogs(capsys):
    code, out, _ = run(
        capsys, "evaluate", "--data", str(DATA / "case_study.jsonl"), "--pred-file", str(DATA / "case_study_no_parallel_pred.jsonl")
    )
    assert code == 0 and tsv(out)["pair"][3] == "3"


def test_evaluate_missing_checkpoint(capsys, tmp_path):
    code, _, err = run(capsys, "evaluate", "--data", FIXTURE, "--checkpoint", str(tmp_path / "nope.pt"))
    assert code == 4


def test_evaluate_unaligned_predictions(capsys, tmp_path):
    pred = tmp_path / "p.jsonl"
    pred.write_text('{"dialog_id": "other", "quadruples": []}\n')
    code, _, err = run(capsys, "evaluate", "--data", FIXTURE, "--pred-file", str(pred))
    assert code == 1 and "aligned" in err


def test_predict_and_evaluate_checkpoint(capsys, tmp_path, checkpoints):
    multi, _ = checkpoints
    pred = tmp_path / "pred.jsonl"
    code, out, _ = run(capsys, "predict", "--data", FIXTURE, "--checkpoint", str(multi), "--out", str(pred))
    assert code == 0 and set(tsv(out)) == {"dialog_id", "te_case_study_1", "te_case_study_2"}
    code, _, _ = run(capsys, "evaluate", "--data", FIXTURE, "--pred-file", str(pred))
    assert code == 0
    code, out_ck, _ = run(capsys, "evaluate", "--data", FIXTURE, "--checkpoint", str(multi))
    code2, out_pf, _ = run(capsys, "evaluate", "--data", FIXTURE, "--pred-file", str(pred))
    assert out_ck == out_pf


def test_benchmark_two_checkpoints(capsys, tmp_path, checkpoints):
    multi, single = checkpoints
    code, out, _ = run(capsys, "benchmark", "--data", FIXTURE, "--checkpoint", str(multi), "--checkpoint", str(single), "--fig-dir", str(tmp_path))
    rows = tsv(out)
    assert code == 0
    assert float(rows["multi_grid"][0]) > 0 and float(rows["one_grid"][0]) > 0
    assert float(rows["ratio_multi_over_one"][0]) > 0 and rows["reference_ratio"] == ["1.348"]
    assert (tmp_path / "throughput.png").exists()


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code != 0
    with pytest.raises(SystemExit) as exc:
        main(["ingest", "--data", FIXTURE, "--bogus"])
    assert exc.value.code != 0


def test_console_script():
    import subprocess
    import sys

    res = subprocess.run([sys.executable, "-m", "ecqed.cli", "train", "--dry-run"], capture_output=True, text=True)
    assert res.returncode == 0 and "lr_other" in res.stdout
