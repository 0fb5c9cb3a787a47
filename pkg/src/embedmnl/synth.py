"""Simulate choice data from a known MNL / E-MNL law.

Generator config (INI)::

    [synth]
    alternatives = A, B, C
    n = 10000
    seed = 7
    asc = 0.0, 0.5, -0.3        ; true ASC per alternative, first one is the reference

    [feature:x1]
    beta = -1.0
    mean = 0.0                  ; per-alternative values drawn from N(mean, sd)
    sd = 1.0

    [categorical:color]
    categories = 4              ; labels c0..c3
    bp = 1.5                    ; true B'
    scale = 1.0                 ; true embeddings ~ U(-scale, scale), seeded
    ; embedding = 0.1 -0.2 0.3 | 0.0 0.1 0.0 | ...   (explicit rows instead)
"""
from __future__ import annotations

import configparser
import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import CategoricalVar, ContinuousVar, Schema
from .numkernel import seeded_rng, softmax


class SynthConfigError(ValueError):
    pass


@dataclass
class SynthFeature:
    name: str
    beta: float
    mean: float = 0.0
    sd: float = 1.0


@dataclass
class SynthCategorical:
    name: str
    n_categories: int
    bp: float = 1.0
    scale: float = 1.0
    embedding: np.ndarray | None = None


@dataclass
class SynthConfig:
    alternatives: list
    n: int
    seed: int = 0
    asc: list = field(default_factory=list)
    features: list = field(default_factory=list)
    categorical: list = field(default_factory=list)

    def __post_init__(self):
        J = len(self.alternatives)
        if J < 2:
            raise SynthConfigError("need at least two alternatives")
        if self.n < 1:
            raise SynthConfigError("n must be positive")
        if not self.asc:
            self.asc = [0.0] * J
        if len(self.asc) != J:
            raise SynthConfigError("asc needs one value per alternative")
        if self.asc[0] != 0.0:
            raise SynthConfigError("the first alternative's ASC is the reference and must be 0")
        for c in self.categorical:
            if c.n_categories < 1 or c.bp < 0:
                raise SynthConfigError(f"categorical {c.name!r}: need categories >= 1 and bp >= 0")
            if c.embedding is not None and c.embedding.shape != (c.n_categories, J):
                raise SynthConfigError(f"categorical {c.name!r}: embedding must be {c.n_categories} x {J}")

    @classmethod
    def from_ini(cls, text: str) -> "SynthConfig":
        cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
        cp.optionxform = str
        try:
            cp.read_string(text)
            sec = cp["synth"]
            alts = [a.strip() for a in sec["alternatives"].split(",") if a.strip()]
            asc = [float(a) for a in sec["asc"].split(",")] if "asc" in sec else []
            feats, cats = [], []
            for name in cp.sections():
                s = cp[name]
                if name.startswith("feature:"):
                    feats.append(
                        SynthFeature(name.split(":", 1)[1], s.getfloat("beta"), s.getfloat("mean", 0.0), s.getfloat("sd", 1.0))
                    )
                elif name.startswith("categorical:"):
                    emb = None
                    if "embedding" in s:
                        emb = np.array([[float(v) for v in row.split()] for row in s["embedding"].split("|")])
                    cats.append(
                        SynthCategorical(
                            name.split(":", 1)[1], s.getint("categories"), s.getfloat("bp", 1.0), s.getfloat("scale", 1.0), emb
                        )
                    )
            return cls(alts, sec.getint("n"), sec.getint("seed", 0), asc, feats, cats)
        except (KeyError, ValueError, TypeError, configparser.Error) as exc:
            if isinstance(exc, SynthConfigError):
                raise
            raise SynthConfigError(f"invalid generator config: {exc}") from None


@dataclass
class SynthResult:
    csv_text: str
    truth: dict
    schema: Schema
    probabilities: np.ndarray
    choice: np.ndarray


def simulate(cfg: SynthConfig) -> SynthResult:
    rng = seeded_rng(cfg.seed)
    J, n = len(cfg.alternatives), cfg.n
    V = np.tile(np.asarray(cfg.asc, dtype=np.float64), (n, 1))
    columns: dict[str, np.ndarray] = {}
    for f in cfg.features:
        x = rng.normal(f.mean, f.sd, size=(n, J))
        V += f.beta * x
        for j, alt in enumerate(cfg.alternatives):
            columns[f"{f.name}_{alt}"] = x[:, j]
    embeddings = {}
    for c in cfg.categorical:
        emb = c.embedding if c.embedding is not None else rng.uniform(-c.scale, c.scale, size=(c.n_categories, J))
        q = rng.integers(0, c.n_categories, size=n)
        V += c.bp * emb[q]
        columns[c.name] = q
        embeddings[c.name] = emb
    P = softmax(V)
    u = rng.random(n)
    choice = np.minimum((P.cumsum(axis=1) < u[:, None]).sum(axis=1), J - 1)

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    names = list(columns)
    w.writerow(["choice"] + names)
    cat_names = {c.name for c in cfg.categorical}
    for i in range(n):
        row = [cfg.alternatives[choice[i]]]
        for name in names:
            row.append(f"c{columns[name][i]}" if name in cat_names else repr(float(columns[name][i])))
        w.writerow(row)

    schema = Schema(
        alternatives=list(cfg.alternatives),
        choice_column="choice",
        reference=cfg.alternatives[0],
        asc=True,
        continuous=[ContinuousVar(f.name, [f"{f.name}_{a}" for a in cfg.alternatives]) for f in cfg.features],
        categorical=[CategoricalVar(c.name, c.name) for c in cfg.categorical],
    )
    truth = {
        "alternatives": list(cfg.alternatives),
        "n": n,
        "seed": cfg.seed,
        "coefficients": {f"ASC_{a}": float(v) for a, v in zip(cfg.alternatives[1:], cfg.asc[1:])}
        | {f.name: f.beta for f in cfg.features},
        "bp": {c.name: c.bp for c in cfg.categorical},
        "embeddings": {
            c.name: {f"c{k}": embeddings[c.name][k].tolist() for k in range(c.n_categories)} for c in cfg.categorical
        },
        "analytic_shares": P.mean(axis=0).tolist(),
        "empirical_shares": (np.bincount(choice, minlength=J) / n).tolist(),
    }
    return SynthResult(buf.getvalue(), truth, schema, P, choice)


def write_synth(cfg: SynthConfig, out_dir, stem: str = "synth") -> dict:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    res = simulate(cfg)
    paths = {
        "data": out_dir / f"{stem}.csv",
        "truth": out_dir / f"{stem}_truth.json",
        "schema": out_dir / f"{stem}_schema.ini",
    }
    paths["data"].write_text(res.csv_text, encoding="utf-8")
    paths["truth"].write_text(json.dumps(res.truth, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    paths["schema"].write_text(res.schema.to_ini(), encoding="utf-8")
    return paths
