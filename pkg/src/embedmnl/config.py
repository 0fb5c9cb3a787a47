"""Experiment configuration files (INI).

::

    [experiment]
    name = swissmetro_emnl
    schema = swissmetro_schema.ini   ; paths are relative to this file
    train = swissmetro.dat.csv
    ; test = other.csv               ; separate test file (vocabulary from train)
    ; split_index = train_idx.txt    ; or split_fraction = 0.8 with split_seed
    output = out/swissmetro_emnl

    [model]
    family = emnl                    ; mnl | emnl | elmnl
    extra_dims = 0
    hidden = 0
    binary_tied = no

    [fit]
    epochs = 500
    steps_per_epoch = 50
    learning_rate = 0.001
    clipnorm = 50
    dropout = 0.2
    runs = 30
    seed = 0

    [baseline]
    dummy = yes
    drop = PURPOSE=3, ORIGIN=1
    reference = first

    [report]
    formats = text, csv
"""
from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, field
from pathlib import Path

from .models import FAMILIES
from .training import FitConfig


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = errors
        super().__init__("; ".join(errors))


_FIT_KEYS = {
    "epochs": int,
    "steps_per_epoch": int,
    "batch_size": int,
    "learning_rate": float,
    "epsilon": float,
    "clipnorm": float,
    "dropout": float,
    "runs": int,
    "seed": int,
    "threads": int,
    "log_every": int,
}


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    schema: str = ""
    train: str = ""
    test: str | None = None
    split_index: str | None = None
    split_fraction: float | None = None
    split_seed: int = 0
    output: str | None = None
    family: str = "emnl"
    extra_dims: int = 0
    hidden: int = 0
    binary_tied: bool = False
    fit: dict = field(default_factory=dict)
    dummy_baseline: bool = False
    dummy_drop: list = field(default_factory=list)
    dummy_reference: str = "first"
    formats: list = field(default_factory=lambda: ["text", "csv"])
    base_dir: Path = field(default=Path("."), compare=False, repr=False)

    # -- parsing ----------------------------------------------------------

    @classmethod
    def from_ini(cls, text: str, base_dir=".") -> "ExperimentConfig":
        cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError([f"cannot parse config: {exc}"]) from None
        errors = []

        def get(section, key, conv=str, default=None):
            if section not in cp or key not in cp[section] or cp[section][key].strip() == "":
                return default
            raw = cp[section][key].strip()
            try:
                if conv is bool:
                    return cp[section].getboolean(key)
                return conv(raw)
            except ValueError:
                errors.append(f"{section}.{key}: invalid value {raw!r}")
                return default

        if "experiment" not in cp:
            raise ConfigError(["missing [experiment] section"])
        cfg = cls(
            name=get("experiment", "name", default="experiment"),
            schema=get("experiment", "schema", default=""),
            train=get("experiment", "train", default=""),
            test=get("experiment", "test"),
            split_index=get("experiment", "split_index"),
            split_fraction=get("experiment", "split_fraction", float),
            split_seed=get("experiment", "split_seed", int, 0),
            output=get("experiment", "output"),
            family=get("model", "family", default="emnl"),
            extra_dims=get("model", "extra_dims", int, 0),
            hidden=get("model", "hidden", int, 0),
            binary_tied=get("model", "binary_tied", bool, False),
            dummy_baseline=get("baseline", "dummy", bool, False),
            dummy_drop=[s.strip() for s in (get("baseline", "drop", default="") or "").split(",") if s.strip()],
            dummy_reference=get("baseline", "reference", default="first"),
            formats=[s.strip() for s in get("report", "formats", default="text, csv").split(",") if s.strip()],
            base_dir=Path(base_dir),
        )
        if "fit" in cp:
            for key in cp["fit"]:
                if key not in _FIT_KEYS:
                    errors.append(f"fit.{key}: unknown option")
                    continue
                val = get("fit", key, _FIT_KEYS[key])
                if val is not None:
                    cfg.fit[key] = val
        if errors:
            raise ConfigError(errors)
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError([f"config: cannot read {path}: {exc.strerror}"]) from None
        return cls.from_ini(text, base_dir=path.parent)

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        exp = {"name": self.name, "schema": self.schema, "train": self.train}
        if self.test:
            exp["test"] = self.test
        if self.split_index:
            exp["split_index"] = self.split_index
        if self.split_fraction is not None:
            exp["split_fraction"] = repr(self.split_fraction)
        exp["split_seed"] = str(self.split_seed)
        if self.output:
            exp["output"] = self.output
        cp["experiment"] = exp
        cp["model"] = {
            "family": self.family,
            "extra_dims": str(self.extra_dims),
            "hidden": str(self.hidden),
            "binary_tied": "yes" if self.binary_tied else "no",
        }
        cp["fit"] = {k: repr(v) if isinstance(v, float) else str(v) for k, v in self.fit.items()}
        cp["baseline"] = {
            "dummy": "yes" if self.dummy_baseline else "no",
            "drop": ", ".join(self.dummy_drop),
            "reference": self.dummy_reference,
        }
        cp["report"] = {"formats": ", ".join(self.formats)}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def config_hash(self) -> str:
        return hashlib.sha256(self.to_ini().encode()).hexdigest()[:16]

    # -- resolution and validation ---------------------------------------

    def path(self, value: str | None) -> Path | None:
        if not value:
            return None
        p = Path(value)
        return p if p.is_absolute() else self.base_dir / p

    def fit_config(self) -> FitConfig:
        kw = dict(self.fit)
        if "seed" in kw:
            kw["base_seed"] = kw.pop("seed")
        return FitConfig(**kw)

    def validate(self) -> list[str]:
        """Field-level problems; empty when the config is usable."""
        errors = []
        if not self.schema:
            errors.append("experiment.schema: required")
        elif not self.path(self.schema).is_file():
            errors.append(f"experiment.schema: file not found: {self.path(self.schema)}")
        if not self.train:
            errors.append("experiment.train: required")
        elif not self.path(self.train).is_file():
            errors.append(f"experiment.train: file not found: {self.path(self.train)}")
        if self.test and not self.path(self.test).is_file():
            errors.append(f"experiment.test: file not found: {self.path(self.test)}")
        if self.split_index and not self.path(self.split_index).is_file():
            errors.append(f"experiment.split_index: file not found: {self.path(self.split_index)}")
        if sum(x is not None and x != "" for x in (self.test, self.split_index, self.split_fraction)) > 1:
            errors.append("experiment: give at most one of test, split_index, split_fraction")
        if self.split_fraction is not None and not 0.0 <= self.split_fraction <= 1.0:
            errors.append("experiment.split_fraction: must lie in [0, 1]")
        if self.family not in FAMILIES:
            errors.append(f"model.family: must be one of {', '.join(FAMILIES)}")
        if self.family == "elmnl" and (self.extra_dims < 1 or self.hidden < 1):
            errors.append("model: elmnl needs extra_dims >= 1 and hidden >= 1")
        if self.family != "elmnl" and (self.extra_dims or self.hidden):
            errors.append("model: extra_dims/hidden only apply to elmnl")
        if self.dummy_reference not in ("first", "none"):
            errors.append("baseline.reference: must be 'first' or 'none'")
        for fmt in self.formats:
            if fmt not in ("text", "csv"):
                errors.append(f"report.formats: unknown format {fmt!r}")
        try:
            self.fit_config()
        except (TypeError, ValueError) as exc:
            errors.append(f"fit: {exc}")
        return errors

