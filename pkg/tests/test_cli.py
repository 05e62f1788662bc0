import csv
import json

import numpy as np
import pytest

from laft.cli import main
from laft.tensor_io import load_matrix

WORLD_SPEC = {
    "attributes": [
        {"name": "number", "values": [f"n{i}" for i in range(10)], "q": 8},
        {"name": "color", "values": ["red", "green", "blue"]},
    ],
    "seed": 11,
    "normal_values": {"number": ["n0", "n1", "n2"], "color": ["red"]},
}


@pytest.fixture(scope="module")
def world(tmp_path_factory):
    root = tmp_path_factory.mktemp("world")
    (root / "spec.json").write_text(json.dumps(WORLD_SPEC))
    assert main(["synth", "--spec", str(root / "spec.json"), "--samples", "40", "--out", str(root / "w")]) == 0
    return root / "w"


def _pipeline_args(w, out, *extra):
    return [
        "pipeline",
        "--prompts", str(w / "prompts_number.json"),
        "--text-features", str(w / "text_number.npy"),
        "--train", str(w / "train.json"),
        "--test", str(w / "test.json"),
        "--mode", "guide",
        "--d", "16",
        "--labels", f"number={w / 'test_number.json'}",
        "--labels", f"color={w / 'test_color.json'}",
        "--out", str(out),
        *extra,
    ]


def test_synth_outputs(world):
    names = {p.name for p in world.iterdir()}
    assert {"train.json", "train.npy", "test.json", "test.npy", "test_number.json", "test_color.json",
            "prompts_number.json", "text_number.npy", "world.json"} <= names
    meta = json.loads((world / "world.json").read_text())
    assert meta["n_train"] == 3 * 40 and meta["n_test"] == 30 * 40
    assert load_matrix(world / "text_number.npy").rows == 10 * 4


def test_pipeline_reports_per_attribute_auroc(world, tmp_path):
    assert main(_pipeline_args(world, tmp_path / "run")) == 0
    report = json.loads((tmp_path / "run" / "report.json").read_text())
    assert report["auroc_number"] >= 0.95
    assert report["mode"] == "guide" and report["d"] == 16 and report["k"] == 30
    for key in ("auroc", "auprc", "fpr95", "positives", "negatives", "prompt_digest", "subspace_digest", "transform"):
        assert key in report
    for name in ("subspace.npy", "subspace.json", "train_transformed.npy", "test_transformed.npy", "scores.json"):
        assert (tmp_path / "run" / name).is_file()


def test_pipeline_is_byte_reproducible(world, tmp_path):
    assert main(_pipeline_args(world, tmp_path / "a")) == 0
    assert main(_pipeline_args(world, tmp_path / "b")) == 0
    for name in ("report.json", "scores.json", "subspace.json", "subspace.npy"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_chained_stages_match_pipeline(world, tmp_path):
    assert main(_pipeline_args(world, tmp_path / "p")) == 0
    sub = tmp_path / "sub"
    assert main(["build-subspace", "--prompts", str(world / "prompts_number.json"),
                 "--text-features", str(world / "text_number.npy"), "--d", "16", "--output", str(sub)]) == 0
    for split in ("train", "test"):
        assert main(["transform", "--input", str(world / f"{split}.npy"), "--subspace", str(sub),
                     "--mode", "guide", "--output", str(tmp_path / f"{split}_t.npy")]) == 0
    assert main(["score", "--train", str(tmp_path / "train_t.npy"), "--test", str(tmp_path / "test_t.npy"),
                 "--no-normalize", "--k", "30", "--output", str(tmp_path / "scores.json")]) == 0
    chained = json.loads((tmp_path / "scores.json").read_text())["scores"]
    direct = json.loads((tmp_path / "p" / "scores.json").read_text())["scores"]
    np.testing.assert_allclose(chained, direct, atol=1e-12)

    # score can also apply the step itself
    assert main(["score", "--train", str(world / "train.npy"), "--test", str(world / "test.npy"),
                 "--step", f"guide:{sub}", "--output", str(tmp_path / "s2.json")]) == 0
    s2 = json.loads((tmp_path / "s2.json").read_text())
    np.testing.assert_allclose(s2["scores"], direct, atol=1e-12)
    assert s2["k"] == 30 and s2["transform"].startswith("guide:")

    assert main(["eval", "--scores", str(tmp_path / "scores.json"), "--labels", str(world / "test_number.json"),
                 "--output", str(tmp_path / "rep.json")]) == 0
    rep = json.loads((tmp_path / "rep.json").read_text())
    full = json.loads((tmp_path / "p" / "report.json").read_text())
    assert rep["auroc"] == pytest.approx(full["auroc_number"], abs=1e-12)
    assert set(rep) == {"auroc", "auprc", "fpr95", "positives", "negatives"}


def test_eval_floats_have_17_significant_digits(tmp_path):
    np.save(tmp_path / "e.npy", np.eye(3))
    (tmp_path / "m.json").write_text(json.dumps({"embeddings": "e.npy", "labels": [1, 0, 0]}))
    (tmp_path / "s.json").write_text(json.dumps({"scores": [0.1, 0.3, 0.2]}))
    assert main(["eval", "--scores", str(tmp_path / "s.json"), "--labels", str(tmp_path / "m.json"),
                 "--output", str(tmp_path / "r.json")]) == 0
    text = (tmp_path / "r.json").read_text()
    # worst ranking: AP = 1/3 at full recall
    assert '"auprc": 0.33333333333333331' in text
    rep = json.loads(text)
    assert rep["auroc"] == 0.0 and rep["fpr95"] == 1.0 and rep["auprc"] == 1 / 3
    assert (rep["positives"], rep["negatives"]) == (1, 2)


def test_render_prompts(tmp_path, capsys):
    p = tmp_path / "p.json"
    p.write_text(json.dumps({"templates": ["a {}", "the {}"], "values": ["x", "y"]}))
    assert main(["render-prompts", "--prompts", str(p)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["rendered"] == ["a x", "the x", "a y", "the y"]
    assert len(out["digest"]) == 16


def test_transform_chained_steps(world, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for prefix, attr in ((a, "number"), (b, "color")):
        assert main(["build-subspace", "--prompts", str(world / f"prompts_{attr}.json"),
                     "--text-features", str(world / f"text_{attr}.npy"), "--d", "4", "--output", str(prefix)]) == 0
    out = tmp_path / "t.npy"
    assert main(["transform", "--input", str(world / "test.npy"), "--step", f"guide:{a}",
                 "--step", f"ignore:{b}", "--output", str(out)]) == 0
    assert load_matrix(out, normalize=False).rows == 1200


def test_missing_prompts_file_exits_2(world, tmp_path, capsys):
    args = _pipeline_args(world, tmp_path / "x")
    args[args.index("--prompts") + 1] = str(tmp_path / "nope.json")
    assert main(args) == 2
    err = capsys.readouterr().err
    assert "nope.json" in err
    assert not (tmp_path / "x" / "report.json").exists()


def test_k_too_large_exits_2(world, tmp_path, capsys):
    assert main(_pipeline_args(world, tmp_path / "x", "--k", "500")) == 2
    assert "k exceeds reference size" in capsys.readouterr().err
    assert not (tmp_path / "x" / "report.json").exists()


def test_numerical_failure_exits_3(world, tmp_path, monkeypatch):
    def broken(*a, **k):
        raise np.linalg.LinAlgError("SVD did not converge")

    monkeypatch.setattr(np.linalg, "svd", broken)
    assert main(_pipeline_args(world, tmp_path / "x")) == 3
    assert not (tmp_path / "x" / "report.json").exists()


def test_bad_step_syntax_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["score", "--train", "a.npy", "--test", "b.npy", "--step", "rotate:x", "--output", "o.json"])
    assert exc.value.code == 2


def _sweep_args(w, out, d_list):
    return ["sweep-d", "--prompts", str(w / "prompts_number.json"), "--text-features", str(w / "text_number.npy"),
            "--train", str(w / "train.json"), "--test", str(w / "test.json"),
            "--eval-labels", str(w / "test_number.json"), "--d-list", d_list, "--output", str(out)]


def test_sweep_d(world, tmp_path):
    out = tmp_path / "sweep.csv"
    assert main(_sweep_args(world, out, "2,8,32")) == 0
    rows = list(csv.DictReader(out.open()))
    assert [r["d"] for r in rows] == ["2", "8", "32"]
    assert list(rows[0]) == ["d", "auroc", "auprc", "fpr95"]
    assert float(rows[1]["auroc"]) >= float(rows[0]["auroc"])


def test_sweep_d_dedup_and_empty(world, tmp_path, caplog):
    out = tmp_path / "sweep.csv"
    with caplog.at_level("WARNING"):
        assert main(_sweep_args(world, out, "4,4,8")) == 0
    assert "duplicate" in caplog.text
    assert [r["d"] for r in csv.DictReader(out.open())] == ["4", "8"]
    assert main(_sweep_args(world, out, "")) == 2
