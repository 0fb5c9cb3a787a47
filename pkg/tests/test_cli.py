import json
import subprocess
import sys

import numpy as np
import pytest

from embedmnl import cli
from embedmnl.embeddings import import_artifact
from embedmnl.modelfile import FittedModel

GEN = """
[synth]
alternatives = {alts}
n = 1500
seed = {seed}

[feature:x]
beta = -1.0

[categorical:color]
categories = 4

[categorical:size]
categories = 3
"""

EXP = """
[experiment]
name = demo
schema = synth_schema.ini
train = {train}
{split}
output = out

[model]
family = {family}
{model_extra}

[fit]
epochs = 3
steps_per_epoch = 10
runs = 2

[baseline]
dummy = yes
"""


def _make(tmp_path, family="emnl", alts="A, B, C", split="split_fraction = 0.8", model_extra="", seed=1, stem="synth"):
    gen = tmp_path / f"gen{seed}.ini"
    gen.write_text(GEN.format(alts=alts, seed=seed))
    assert cli.main(["synth", "--config", str(gen), "--out", str(tmp_path), "--stem", stem]) == 0
    exp = tmp_path / f"exp_{family}_{seed}.ini"
    exp.write_text(EXP.format(train=f"{stem}.csv", split=split, family=family, model_extra=model_extra))
    return exp


def test_fit_writes_all_outputs_with_config_hash(tmp_path, capsys):
    exp = _make(tmp_path)
    assert cli.main(["fit", "--config", str(exp)]) == 0
    out = tmp_path / "out"
    names = {p.name for p in out.iterdir()}
    assert {"runs.csv", "summary.txt", "summary.csv", "coefficients.txt", "coefficients.csv",
            "embeddings.csv", "coordinates.csv", "model.json"} <= names
    from embedmnl.config import ExperimentConfig

    h = ExperimentConfig.load(exp).config_hash()
    for n in names - {"model.json", "embeddings.csv"}:
        assert (out / n).read_text().startswith(f"# embedmnl") and h in (out / n).read_text().splitlines()[0]
    assert h in (out / "embeddings.csv").read_text()
    assert json.loads((out / "model.json").read_text())["config_hash"] == h
    summary = (out / "summary.txt").read_text()
    assert "E-MNL(D=3)" in summary and "MNL_dum" in summary
    assert "E-MNL(D=3)" in capsys.readouterr().out


def test_seed_and_runs_flags(tmp_path):
    exp = _make(tmp_path)
    assert cli.main(["fit", "--config", str(exp), "--runs", "1", "--seed", "7", "--out", str(tmp_path / "o2")]) == 0
    rows = [l for l in (tmp_path / "o2" / "runs.csv").read_text().splitlines() if not l.startswith("#")]
    assert len(rows) == 2 and rows[1].startswith("0,7,ok")


def test_out_env_var(tmp_path, monkeypatch):
    exp = _make(tmp_path)
    text = exp.read_text().replace("output = out\n", "")
    exp.write_text(text)
    monkeypatch.setenv("EMBEDMNL_OUT", str(tmp_path / "envout"))
    assert cli.main(["fit", "--config", str(exp), "--runs", "1"]) == 0
    assert (tmp_path / "envout" / "summary.txt").exists()


def test_config_errors_exit_2(tmp_path, capsys):
    exp = _make(tmp_path)
    exp.write_text(exp.read_text().replace("family = emnl", "family = deep"))
    assert cli.main(["fit", "--config", str(exp)]) == 2
    assert "model.family" in capsys.readouterr().err
    assert cli.main(["fit", "--config", str(tmp_path / "missing.ini")]) == 2


def test_missing_column_exit_2(tmp_path, capsys):
    exp = _make(tmp_path)
    schema = tmp_path / "synth_schema.ini"
    schema.write_text(schema.read_text().replace("column = size", "column = SIZE"))
    assert cli.main(["fit", "--config", str(exp)]) == 2
    assert "SIZE" in capsys.readouterr().err


def test_eval_and_fingerprint_mismatch(tmp_path, capsys):
    exp = _make(tmp_path)
    assert cli.main(["fit", "--config", str(exp), "--runs", "1"]) == 0
    model = tmp_path / "out" / "model.json"
    probs = tmp_path / "p.csv"
    assert cli.main(["eval", "--model", str(model), "--data", str(tmp_path / "synth.csv"), "--out", str(probs)]) == 0
    lines = probs.read_text().splitlines()
    ll = float(lines[1].split(": ")[1])
    P = np.array([[float(v) for v in l.split(",")[2:]] for l in lines[3:]])
    np.testing.assert_allclose(P.sum(axis=1), 1.0)
    fm = FittedModel.load(model)
    assert ll < 0 and fm.ll_train > ll  # full data holds more observations than train

    other = tmp_path / "other_schema.ini"
    other.write_text((tmp_path / "synth_schema.ini").read_text().replace("names = A, B, C", "names = A, B, D")
                     .replace("x_C", "x_D"))
    capsys.readouterr()
    code = cli.main(["eval", "--model", str(model), "--data", str(tmp_path / "synth.csv"), "--schema", str(other)])
    err = capsys.readouterr().err
    assert code == 2 and "fingerprint mismatch" in err and fm.schema_fingerprint in err


def test_embeddings_subcommands(tmp_path, capsys):
    exp = _make(tmp_path)
    assert cli.main(["fit", "--config", str(exp), "--runs", "1"]) == 0
    art_path = tmp_path / "out" / "embeddings.csv"
    art = import_artifact(art_path)
    assert art.Z == 7 and art.D == 3

    assert cli.main(["embeddings", "export", "--model", str(tmp_path / "out" / "model.json"),
                     "--out", str(tmp_path / "e.csv")]) == 0
    assert import_artifact(tmp_path / "e.csv").W.tobytes() == art.W.tobytes()

    assert cli.main(["embeddings", "distances", "--artifact", str(art_path), "--variables", "color",
                     "--out", str(tmp_path / "d.csv")]) == 0
    assert "bin_left" in (tmp_path / "d.csv").read_text()
    assert cli.main(["embeddings", "distances", "--artifact", str(art_path), "--variables", "nope"]) == 2

    assert cli.main(["embeddings", "screen", "--artifact", str(art_path), "--threshold", "10",
                     "--out", str(tmp_path / "s.csv")]) == 0
    assert "color, size" in capsys.readouterr().out

    assert cli.main(["embeddings", "reuse", "--artifact", str(art_path), "--config", str(exp), "--runs", "1",
                     "--out", str(tmp_path / "reuse")]) == 0
    assert "MNL+embeddings(shared)" in (tmp_path / "reuse" / "reuse_summary.txt").read_text()


def test_tied_binary_year_pair_workflow(tmp_path):
    # train on one simulated year, test on the next, then reuse the first year's embeddings
    _make(tmp_path, alts="Car, NoCar", seed=1, stem="y1")
    _make(tmp_path, alts="Car, NoCar", seed=2, stem="y2")
    exp = tmp_path / "pair.ini"
    exp.write_text(EXP.format(train="y1.csv", split="test = y2.csv", family="emnl", model_extra="binary_tied = yes")
                   .replace("synth_schema.ini", "y1_schema.ini"))
    assert cli.main(["fit", "--config", str(exp)]) == 0
    art = import_artifact(tmp_path / "out" / "embeddings.csv")
    assert art.binary_tied and np.array_equal(art.W[:, 1], -art.W[:, 0])
    csv_text = (tmp_path / "out" / "summary.csv").read_text()
    assert "E-MNL(D=2)" in csv_text and "MNL_dum" in csv_text
    assert cli.main(["embeddings", "reuse", "--artifact", str(tmp_path / "out" / "embeddings.csv"),
                     "--config", str(exp), "--out", str(tmp_path / "reuse")]) == 0


def test_elmnl_and_singular_coefficients(tmp_path):
    exp = _make(tmp_path, family="elmnl", model_extra="extra_dims = 1\nhidden = 3")
    assert cli.main(["fit", "--config", str(exp), "--runs", "1"]) == 0
    assert "EL-MNL(D=4, K=3)" in (tmp_path / "out" / "summary.txt").read_text()

    # a feature with no variation across alternatives cannot be identified
    data = tmp_path / "synth.csv"
    lines = data.read_text().splitlines()
    head = lines[0].split(",")
    ia, ib, ic = head.index("x_A"), head.index("x_B"), head.index("x_C")
    fixed = [lines[0]]
    for l in lines[1:]:
        cells = l.split(",")
        cells[ib] = cells[ic] = cells[ia]
        fixed.append(",".join(cells))
    data.write_text("\n".join(fixed) + "\n")
    exp.write_text(exp.read_text().replace("family = elmnl", "family = mnl").replace("extra_dims = 1\nhidden = 3", ""))
    assert cli.main(["fit", "--config", str(exp), "--runs", "1", "--out", str(tmp_path / "sing")]) == 0
    text = (tmp_path / "sing" / "coefficients.txt").read_text()
    assert "unidentified coefficients: x" in text


def test_help_documents_flags():
    out = subprocess.run([sys.executable, "-m", "embedmnl.cli", "fit", "--help"], capture_output=True, text=True).stdout
    for flag in ("--config", "--seed", "--runs", "--out", "--threads"):
        assert flag in out
    top = subprocess.run([sys.executable, "-m", "embedmnl.cli", "--help"], capture_output=True, text=True).stdout
    assert "EMBEDMNL_OUT" in top


def test_model_file_roundtrip_is_exact(tmp_path):
    exp = _make(tmp_path, family="elmnl", model_extra="extra_dims = 1\nhidden = 2")
    assert cli.main(["fit", "--config", str(exp), "--runs", "1"]) == 0
    fm = FittedModel.load(tmp_path / "out" / "model.json")
    again = FittedModel.load(fm.save(tmp_path / "copy.json"))
    for block in ("B", "Bp", "W", "M1", "b1", "M2", "alpha"):
        a, b = getattr(fm.params, block), getattr(again.params, block)
        assert np.asarray(a).tobytes() == np.asarray(b).tobytes()
    assert again.spec == fm.spec and again.schema_fingerprint == fm.schema_fingerprint
    (tmp_path / "bad.json").write_text('{"format": "other"}')
    with pytest.raises(ValueError, match="not an"):
        FittedModel.load(tmp_path / "bad.json")
