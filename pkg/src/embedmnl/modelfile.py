"""Fitted-model files (JSON) consumed by ``embedmnl eval``."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .data import Schema, Vocabulary
from .models import ModelParams, ModelSpec

FORMAT = "embedmnl-model"
VERSION = 1


@dataclass
class FittedModel:
    spec: ModelSpec
    params: ModelParams
    schema: Schema
    vocabulary: Vocabulary
    ll_train: float | None = None
    ll_test: float | None = None
    seed: int | None = None
    config_hash: str = ""

    @property
    def schema_fingerprint(self) -> str:
        return self.schema.fingerprint()

    def save(self, path) -> Path:
        path = Path(path)
        doc = {
            "format": FORMAT,
            "version": VERSION,
            "config_hash": self.config_hash,
            "schema_fingerprint": self.schema_fingerprint,
            "spec": self.spec.to_dict(),
            "params": self.params.to_dict(),
            "schema": self.schema.to_dict(),
            "vocabulary": self.vocabulary.to_dict(),
            "ll_train": self.ll_train,
            "ll_test": self.ll_test,
            "seed": self.seed,
        }
        path.write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
        return path

    @classmethod
    def load(cls, path) -> "FittedModel":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        if doc.get("format") != FORMAT:
            raise ValueError(f"{path} is not an {FORMAT} file")
        if doc.get("version") != VERSION:
            raise ValueError(f"unsupported model file version {doc.get('version')}")
        spec = ModelSpec.from_dict(doc["spec"])
        params = ModelParams.from_dict(doc["params"])
        params.check(spec)
        return cls(
            spec=spec,
            params=params,
            schema=Schema.from_dict(doc["schema"]),
            vocabulary=Vocabulary.from_dict(doc["vocabulary"]),
            ll_train=doc.get("ll_train"),
            ll_test=doc.get("ll_test"),
            seed=doc.get("seed"),
            config_hash=doc.get("config_hash", ""),
        )
