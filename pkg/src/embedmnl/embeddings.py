"""Embedding artifacts: export/import, beta-scaled coordinates, diagnostics, reuse.

Artifact file layout (UTF-8 text)::

    # embedmnl-embeddings
    # format_version: 1
    # J: 3
    # ...other "# key: <json>" header lines...
    variable,category,Train,SM,Car[,extra_1,...]
    PURPOSE,1,0.0123,-0.044,0.1
    ...

Embedding values are written with ``repr`` so that import reproduces them
bit for bit.
"""
from __future__ import annotations

import csv
import io
import json
import warnings
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

import numpy as np

from .data import UNSEEN, ChoiceDataset, Vocabulary
from .models import ModelParams, ModelSpec, full_embeddings

FORMAT_VERSION = 1
MAGIC = "# embedmnl-embeddings"
NEAR_ZERO_THRESHOLD = 0.02
ENCODE_MODES = ("shared", "raw", "scaled_sum")


class ArtifactError(ValueError):
    pass


@dataclass
class EmbeddingArtifact:
    vocabulary: Vocabulary
    W: np.ndarray  # (Z, J + S), tie undone
    alternatives: list[str]
    bp: np.ndarray
    binary_tied: bool = False
    fingerprint: str = ""
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        self.bp = np.asarray(self.bp, dtype=np.float64)
        if self.W.shape[0] != self.vocabulary.size:
            raise ArtifactError(f"W has {self.W.shape[0]} rows, vocabulary has {self.vocabulary.size} categories")
        if self.W.shape[1] < len(self.alternatives):
            raise ArtifactError("fewer embedding columns than alternatives")
        if len(self.bp) != self.vocabulary.n_variables:
            raise ArtifactError("one B' value per categorical variable is required")

    @property
    def J(self) -> int:
        return len(self.alternatives)

    @property
    def D(self) -> int:
        return self.W.shape[1]

    @property
    def Z(self) -> int:
        return self.W.shape[0]

    def dimension_names(self) -> list[str]:
        return list(self.alternatives) + [f"extra_{s + 1}" for s in range(self.D - self.J)]

    def interpretable(self) -> np.ndarray:
        return self.W[:, : self.J]

    def stored_W(self) -> np.ndarray:
        """Embedding matrix in model-parameter layout (tie folded back)."""
        if self.binary_tied:
            return np.concatenate([self.W[:, :1], self.W[:, self.J :]], axis=1)
        return self.W.copy()

    @classmethod
    def from_model(cls, spec: ModelSpec, params: ModelParams, vocabulary: Vocabulary, metadata=None):
        if not spec.uses_embeddings:
            raise ArtifactError("model has no embedding layer")
        meta = {"date": date.today().isoformat()}
        meta.update(metadata or {})
        return cls(
            vocabulary=vocabulary,
            W=full_embeddings(spec, params.W),
            alternatives=list(spec.alternatives) or [f"alt_{j}" for j in range(spec.n_alternatives)],
            bp=params.Bp.copy(),
            binary_tied=spec.binary_tied,
            fingerprint=spec.fingerprint(),
            metadata=meta,
        )


def export_artifact(artifact: EmbeddingArtifact, path, extra_header: dict | None = None) -> Path:
    path = Path(path)
    header = {
        "format_version": FORMAT_VERSION,
        "J": artifact.J,
        "D": artifact.D,
        "Z": artifact.Z,
        "alternatives": artifact.alternatives,
        "binary_tied": artifact.binary_tied,
        "variables": artifact.vocabulary.variables,
        "B_prime": artifact.bp.tolist(),
        "fingerprint": artifact.fingerprint,
        "metadata": artifact.metadata,
    }
    header.update(extra_header or {})
    buf = io.StringIO()
    buf.write(MAGIC + "\n")
    for key, val in header.items():
        buf.write(f"# {key}: {json.dumps(val)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["variable", "category"] + artifact.dimension_names())
    for (var, label), row in zip(artifact.vocabulary.labels(), artifact.W):
        w.writerow([var, label] + [repr(float(x)) for x in row])
    try:
        path.write_text(buf.getvalue(), encoding="utf-8")
    except OSError as exc:
        raise ArtifactError(f"cannot write artifact to {path}: {exc}") from exc
    return path


def import_artifact(path) -> EmbeddingArtifact:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != MAGIC:
        raise ArtifactError(f"{path} is not an embedding artifact")
    header, body_start = {}, 1
    for i, line in enumerate(lines[1:], start=1):
        if not line.startswith("# "):
            body_start = i
            break
        key, _, val = line[2:].partition(": ")
        header[key] = json.loads(val)
    if header.get("format_version") != FORMAT_VERSION:
        raise ArtifactError(f"unsupported artifact format version {header.get('format_version')}")
    reader = csv.reader(lines[body_start:])
    next(reader)  # column names
    variables = header["variables"]
    cats = {v: [] for v in variables}
    rows = []
    for rec in reader:
        var, label, *vals = rec
        cats[var].append(label)
        rows.append([float(v) for v in vals])
    vocab = Vocabulary(variables, [cats[v] for v in variables])
    W = np.array(rows, dtype=np.float64).reshape(len(rows), header["D"])
    if W.shape[0] != header["Z"]:
        raise ArtifactError(f"artifact declares Z={header['Z']} but has {W.shape[0]} rows")
    return EmbeddingArtifact(
        vocabulary=vocab,
        W=W,
        alternatives=header["alternatives"],
        bp=np.array(header["B_prime"], dtype=np.float64),
        binary_tied=header["binary_tied"],
        fingerprint=header.get("fingerprint", ""),
        metadata=header.get("metadata", {}),
    )


# ----------------------------------------------------------------------------
# coordinates and diagnostics


@dataclass
class ScaledCoordinates:
    labels: list  # (variable, category)
    coords: np.ndarray  # (Z, J)
    alternatives: list

    def select(self, variables=None) -> tuple[list, np.ndarray]:
        if variables is None:
            return list(self.labels), self.coords
        variables = list(variables)
        unknown = set(variables) - {v for v, _ in self.labels}
        if unknown:
            raise ArtifactError(f"unknown variable(s): {', '.join(sorted(unknown))}")
        keep = [i for i, (v, _) in enumerate(self.labels) if v in variables]
        return [self.labels[i] for i in keep], self.coords[keep]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["variable", "category"] + list(self.alternatives))
        for (v, c), row in zip(self.labels, self.coords):
            w.writerow([v, c] + [repr(float(x)) for x in row])
        return buf.getvalue()


def scaled_coordinates(artifact: EmbeddingArtifact, scaled: bool = True) -> ScaledCoordinates:
    """Interpretable coordinates, multiplied by their variable's B' if ``scaled``."""
    coords = artifact.interpretable().copy()
    if scaled:
        coords = coords * artifact.bp[artifact.vocabulary.variable_of()][:, None]
    return ScaledCoordinates(artifact.vocabulary.labels(), coords, list(artifact.alternatives))


@dataclass
class DistanceReport:
    pairs: list  # ((var, cat), (var, cat))
    distances: np.ndarray
    bin_edges: np.ndarray
    counts: np.ndarray

    def histogram_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bin_left", "bin_right", "count"])
        for lo, hi, c in zip(self.bin_edges[:-1], self.bin_edges[1:], self.counts):
            w.writerow([repr(float(lo)), repr(float(hi)), int(c)])
        return buf.getvalue()


def pairwise_distances(coords: ScaledCoordinates, variables=None, bins: int = 20) -> DistanceReport:
    """Euclidean distances over all unordered pairs of selected categories."""
    labels, X = coords.select(variables)
    if len(labels) < 2:
        raise ArtifactError("need at least two categories to compute distances")
    i, j = np.triu_indices(len(labels), k=1)
    d = np.sqrt(((X[i] - X[j]) ** 2).sum(axis=1))
    counts, edges = np.histogram(d, bins=bins)
    return DistanceReport([(labels[a], labels[b]) for a, b in zip(i, j)], d, edges, counts)


@dataclass
class NearZeroEntry:
    variable: str
    category: str
    max_abs: float


def near_zero_screen(artifact: EmbeddingArtifact, threshold: float = NEAR_ZERO_THRESHOLD, scaled: bool = False):
    """Categories of variables whose every interpretable coordinate is below ``threshold``.

    Works on raw embedding values by default; ``scaled=True`` screens the
    B'-scaled coordinates instead.
    """
    coords = scaled_coordinates(artifact, scaled=scaled)
    max_abs = np.abs(coords.coords).max(axis=1)
    var_of = artifact.vocabulary.variable_of()
    flagged = []
    for m, var in enumerate(artifact.vocabulary.variables):
        rows = np.flatnonzero(var_of == m)
        if len(rows) and np.all(max_abs[rows] < threshold):
            flagged += [NearZeroEntry(var, coords.labels[r][1], float(max_abs[r])) for r in rows]
    return flagged


# ----------------------------------------------------------------------------
# reuse


def encode_with_artifact(dataset: ChoiceDataset, artifact: EmbeddingArtifact, mode: str = "shared") -> ChoiceDataset:
    """Replace categorical variables by features read from a trained artifact.

    ``shared``: one alternative-varying feature per variable, value
    ``W[category, i]`` in alternative i (one coefficient, E-MNL semantics).
    ``raw``: J features per variable, feature ``(m, i)`` nonzero only in
    alternative i (one coefficient each).
    ``scaled_sum``: a single feature ``sum_m B'_m W[category_m, i]``.
    Unknown categories get a zero vector and are counted in
    ``result.dropped["unseen_categories"]``.
    """
    if mode not in ENCODE_MODES:
        raise ValueError(f"mode must be one of {ENCODE_MODES}")
    J = len(dataset.alternatives)
    if artifact.J != J:
        raise ArtifactError(f"artifact has {artifact.J} alternatives, dataset has {J}")
    if list(artifact.alternatives) != list(dataset.alternatives):
        warnings.warn(
            f"alternative names differ: artifact {artifact.alternatives}, dataset {dataset.alternatives}"
        )
    dv, av = dataset.vocabulary, artifact.vocabulary
    missing = [v for v in dv.variables if v not in av.variables]
    if missing:
        raise ArtifactError(f"artifact has no embeddings for: {', '.join(missing)}")

    n, M = len(dataset), dv.n_variables
    coords = np.zeros((n, M, J))
    Wi = artifact.interpretable()
    n_unseen = 0
    for m, var in enumerate(dv.variables):
        am = av.variables.index(var)
        lookup = np.array([av.get(am, label) for label in dv.categories[m]] + [UNSEEN], dtype=np.int64)
        q = dataset.Q[:, m]
        local = np.where(q == UNSEEN, len(lookup) - 1, q - dv.offsets[m])
        idx = lookup[local]
        seen = idx != UNSEEN
        n_unseen += int((~seen).sum())
        coords[seen, m] = Wi[idx[seen]]
    if n_unseen:
        warnings.warn(f"{n_unseen} category value(s) not in the artifact vocabulary; using zero vectors")

    if mode == "shared":
        extra = np.transpose(coords, (0, 2, 1))  # (N, J, M)
        names = [f"emb_{v}" for v in dv.variables]
    elif mode == "raw":
        extra = np.zeros((n, J, M * J))
        names = []
        for m, var in enumerate(dv.variables):
            for i, alt in enumerate(dataset.alternatives):
                extra[:, i, m * J + i] = coords[:, m, i]
                names.append(f"emb_{var}@{alt}")
    else:
        bp = np.array([artifact.bp[av.variables.index(v)] for v in dv.variables])
        extra = np.einsum("nmj,m->nj", coords, bp)[..., None]
        names = ["emb_scaled_sum"]
    out = dataset.with_features(
        np.concatenate([dataset.X, extra], axis=2), dataset.feature_names + names, keep_categorical=False
    )
    out.dropped = dict(dataset.dropped, unseen_categories=n_unseen)
    return out


def reuse_gap(ll_joint: float, ll_frozen: float, slack: float = 0.01) -> tuple[float, bool]:
    """Relative amount by which a frozen-embedding fit beats the joint fit.

    Returns ``(gap, within)``.  The frozen model's parameter space is a subset
    of the joint one, so ``within`` is False (gap above ``slack``) only when
    the joint fit did not converge.
    """
    gap = (ll_frozen - ll_joint) / abs(ll_joint)
    return gap, gap <= slack
