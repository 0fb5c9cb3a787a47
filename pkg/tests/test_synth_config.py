import json

import numpy as np
import pytest

from embedmnl.config import ConfigError, ExperimentConfig
from embedmnl.data import Schema, load_csv
from embedmnl.synth import SynthConfig, SynthConfigError, simulate, write_synth

GEN = """
[synth]
alternatives = A, B, C
n = 20000
seed = 1
asc = 0, 0.5, -0.5

[feature:x]
beta = -1.0

[categorical:color]
categories = 3
bp = 2.0
embedding = 0.1 -0.2 0.3 | 0.0 0.4 -0.1 | -0.3 0.0 0.0
"""


def test_simulate_is_seeded_and_consistent(tmp_path):
    cfg = SynthConfig.from_ini(GEN)
    a, b = simulate(cfg), simulate(cfg)
    assert a.csv_text == b.csv_text
    shares = np.bincount(a.choice, minlength=3) / cfg.n
    np.testing.assert_allclose(shares, a.truth["analytic_shares"], atol=0.01)
    assert a.truth["coefficients"] == {"ASC_B": 0.5, "ASC_C": -0.5, "x": -1.0}
    assert a.truth["embeddings"]["color"]["c1"] == [0.0, 0.4, -0.1]

    paths = write_synth(cfg, tmp_path)
    ds = load_csv(paths["data"], Schema.load(paths["schema"]))
    assert len(ds) == cfg.n and ds.feature_names == ["ASC_B", "ASC_C", "x"]
    assert ds.vocabulary.variables == ["color"]
    assert json.loads(paths["truth"].read_text())["n"] == cfg.n


def test_synth_config_errors():
    with pytest.raises(SynthConfigError):
        SynthConfig.from_ini("[synth]\nalternatives = A\nn = 5\n")
    with pytest.raises(SynthConfigError, match="reference"):
        SynthConfig.from_ini("[synth]\nalternatives = A, B\nn = 5\nasc = 1, 0\n")
    with pytest.raises(SynthConfigError, match="embedding"):
        SynthConfig.from_ini(GEN.replace("| -0.3 0.0 0.0", ""))
    with pytest.raises(SynthConfigError):
        SynthConfig.from_ini("[synth]\nalternatives = A, B\n")


EXP = """
[experiment]
name = demo
schema = s.ini
train = d.csv
split_fraction = 0.8

[model]
family = emnl

[fit]
epochs = 10
runs = 2
seed = 4

[baseline]
dummy = yes
drop = color=c1

[report]
formats = text
"""


def test_experiment_config_parsing(tmp_path):
    (tmp_path / "s.ini").write_text("")
    (tmp_path / "d.csv").write_text("")
    (tmp_path / "e.ini").write_text(EXP)
    cfg = ExperimentConfig.load(tmp_path / "e.ini")
    assert cfg.validate() == []
    assert cfg.path(cfg.schema) == tmp_path / "s.ini"
    fc = cfg.fit_config()
    assert (fc.epochs, fc.runs, fc.base_seed, fc.steps_per_epoch) == (10, 2, 4, 50)
    assert cfg.dummy_baseline and cfg.dummy_drop == ["color=c1"] and cfg.formats == ["text"]
    again = ExperimentConfig.from_ini(cfg.to_ini(), tmp_path)
    assert again == cfg and again.config_hash() == cfg.config_hash()
    cfg.fit["runs"] = 3
    assert cfg.config_hash() != again.config_hash()


def test_experiment_config_field_errors(tmp_path):
    bad = EXP.replace("family = emnl", "family = nn").replace("split_fraction = 0.8", "split_fraction = 1.5")
    cfg = ExperimentConfig.from_ini(bad, tmp_path)
    errors = cfg.validate()
    assert any(e.startswith("model.family") for e in errors)
    assert any(e.startswith("experiment.split_fraction") for e in errors)
    assert any(e.startswith("experiment.schema: file not found") for e in errors)
    with pytest.raises(ConfigError, match="fit.learning_rat"):
        ExperimentConfig.from_ini(EXP.replace("epochs = 10", "learning_rat = 0.1"))
    with pytest.raises(ConfigError, match="fit.epochs"):
        ExperimentConfig.from_ini(EXP.replace("epochs = 10", "epochs = ten"))
    with pytest.raises(ConfigError, match="experiment"):
        ExperimentConfig.from_ini("[model]\nfamily = emnl\n")
    with pytest.raises(ConfigError, match="cannot read"):
        ExperimentConfig.load(tmp_path / "nope.ini")


def test_checked_in_configs_parse():
    from pathlib import Path

    root = Path(__file__).parent.parent / "configs"
    sw = Schema.load(root / "swissmetro_schema.ini")
    assert sw.feature_names() == ["ASC_SM", "ASC_Car", "TT", "TC", "HEADWAY"]
    assert len(sw.categorical) == 12
    tu = Schema.load(root / "tu_schema.ini")
    assert tu.feature_names() == ["ASC_Car", "HomeDistNearestStation_Car", "GISdistHW_Car"]
    assert len(tu.categorical) == 10
    for i in range(1, 5):
        cfg = ExperimentConfig.load(root / f"tu_exp{i}.ini")
        assert cfg.binary_tied and cfg.family == "emnl"
        assert cfg.train == f"tu_{2013 + i}.csv" and cfg.test == f"tu_{2014 + i}.csv"
    sm = ExperimentConfig.load(root / "swissmetro_emnl.ini")
    assert len(sm.dummy_drop) == 6
    SynthConfig.from_ini((root / "synth_example.ini").read_text())
    assert ExperimentConfig.load(root / "synth_emnl.ini").family == "emnl"
