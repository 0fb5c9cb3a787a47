"""Dataset ingestion: schema files, categorical vocabulary, splits, dummies.

A schema is an INI file.  Example::

    [alternatives]
    names = Train, SM, Car
    reference = Train          ; ASC of this alternative is fixed at zero
    asc = yes

    [choice]
    column = CHOICE
    codes = 1, 2, 3            ; raw value for each alternative, in order
    missing = 0                ; raw values meaning "no recorded choice"

    [availability]
    Train = TRAIN_AV
    SM = SM_AV
    Car = CAR_AV
    require_all = yes          ; drop rows where some alternative is unavailable

    [continuous:TT]
    columns = TRAIN_TT, SM_TT, CAR_TT   ; one per alternative, or one shared column
    scale = 0.01
    mode = generic             ; or "specific" (one coefficient per listed alternative)
    ; alternatives = SM, Car   ; for mode = specific; default all but the reference

    [categorical:PURPOSE]
    column = PURPOSE
    ; edges = 1, 2, 3, 4, 13   ; discretize a numeric column into right-closed bins

A per-alternative column may be given as ``0`` to mean a constant zero
(e.g. headway for Car).
"""
from __future__ import annotations

import configparser
import csv
import hashlib
import io
import json
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .numkernel import seeded_rng

MISSING_TOKENS = frozenset({"", "na", "nan", "null", "none"})
UNSEEN = -1


class SchemaError(ValueError):
    pass


class DataError(ValueError):
    pass


# ----------------------------------------------------------------------------
# schema


@dataclass
class ContinuousVar:
    name: str
    columns: list[str]
    scale: float = 1.0
    mode: str = "generic"
    alternatives: list[str] | None = None


@dataclass
class CategoricalVar:
    name: str
    column: str
    edges: list[float] | None = None


@dataclass
class Schema:
    alternatives: list[str]
    choice_column: str
    reference: str | None = None
    asc: bool = True
    choice_codes: list[str] | None = None
    choice_missing: list[str] = field(default_factory=list)
    availability: dict[str, str] = field(default_factory=dict)
    require_all_available: bool = False
    continuous: list[ContinuousVar] = field(default_factory=list)
    categorical: list[CategoricalVar] = field(default_factory=list)

    def __post_init__(self):
        if len(self.alternatives) < 2:
            raise SchemaError("at least two alternatives are required")
        if len(set(self.alternatives)) != len(self.alternatives):
            raise SchemaError("alternative names must be unique")
        if self.reference is None:
            self.reference = self.alternatives[0]
        if self.reference not in self.alternatives:
            raise SchemaError(f"reference alternative {self.reference!r} is not an alternative")
        names = [v.name for v in self.continuous] + [v.name for v in self.categorical]
        dupes = {n for n in names if names.count(n) > 1}
        if dupes:
            raise SchemaError(f"variable names not unique: {sorted(dupes)}")
        if self.choice_codes is not None and len(self.choice_codes) != len(self.alternatives):
            raise SchemaError("choice.codes must list one code per alternative")
        for alt in self.availability:
            if alt not in self.alternatives:
                raise SchemaError(f"availability given for unknown alternative {alt!r}")
        for var in self.continuous:
            if len(var.columns) not in (1, len(self.alternatives)):
                raise SchemaError(
                    f"continuous variable {var.name!r}: give one shared column or "
                    f"{len(self.alternatives)} per-alternative columns"
                )
            if var.mode not in ("generic", "specific"):
                raise SchemaError(f"continuous variable {var.name!r}: unknown mode {var.mode!r}")
            for alt in var.alternatives or ():
                if alt not in self.alternatives:
                    raise SchemaError(f"continuous variable {var.name!r}: unknown alternative {alt!r}")
        for var in self.categorical:
            if var.edges is not None and np.any(np.diff(var.edges) <= 0):
                raise SchemaError(f"categorical variable {var.name!r}: edges must be strictly increasing")

    @property
    def n_alternatives(self) -> int:
        return len(self.alternatives)

    @property
    def reference_index(self) -> int:
        return self.alternatives.index(self.reference)

    def feature_names(self) -> list[str]:
        """Names of the columns of the continuous tensor, in order."""
        names = []
        if self.asc:
            names += [f"ASC_{a}" for a in self.alternatives if a != self.reference]
        for var in self.continuous:
            if var.mode == "generic":
                names.append(var.name)
            else:
                names += [f"{var.name}_{a}" for a in self._specific_alts(var)]
        return names

    def _specific_alts(self, var: ContinuousVar) -> list[str]:
        if var.alternatives:
            return list(var.alternatives)
        return [a for a in self.alternatives if a != self.reference]

    def required_columns(self) -> list[str]:
        cols = [self.choice_column]
        cols += list(self.availability.values())
        for var in self.continuous:
            cols += [c for c in var.columns if not _is_zero_literal(c)]
        cols += [v.column for v in self.categorical]
        return list(dict.fromkeys(cols))

    # -- (de)serialization -------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "alternatives": list(self.alternatives),
            "reference": self.reference,
            "asc": self.asc,
            "choice_column": self.choice_column,
            "choice_codes": self.choice_codes,
            "choice_missing": list(self.choice_missing),
            "availability": dict(self.availability),
            "require_all_available": self.require_all_available,
            "continuous": [vars(v).copy() for v in self.continuous],
            "categorical": [vars(v).copy() for v in self.categorical],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Schema":
        d = dict(d)
        d["continuous"] = [ContinuousVar(**v) for v in d.get("continuous", [])]
        d["categorical"] = [CategoricalVar(**v) for v in d.get("categorical", [])]
        return cls(**d)

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        cp["alternatives"] = {
            "names": ", ".join(self.alternatives),
            "reference": self.reference,
            "asc": "yes" if self.asc else "no",
        }
        choice = {"column": self.choice_column}
        if self.choice_codes is not None:
            choice["codes"] = ", ".join(self.choice_codes)
        if self.choice_missing:
            choice["missing"] = ", ".join(self.choice_missing)
        cp["choice"] = choice
        if self.availability or self.require_all_available:
            av = dict(self.availability)
            av["require_all"] = "yes" if self.require_all_available else "no"
            cp["availability"] = av
        for var in self.continuous:
            sec = {"columns": ", ".join(var.columns), "scale": repr(var.scale), "mode": var.mode}
            if var.alternatives:
                sec["alternatives"] = ", ".join(var.alternatives)
            cp[f"continuous:{var.name}"] = sec
        for var in self.categorical:
            sec = {"column": var.column}
            if var.edges is not None:
                sec["edges"] = ", ".join(_fmt_num(e) for e in var.edges)
            cp[f"categorical:{var.name}"] = sec
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text: str) -> "Schema":
        cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise SchemaError(f"cannot parse schema: {exc}") from None
        for sec in ("alternatives", "choice"):
            if sec not in cp:
                raise SchemaError(f"schema is missing the [{sec}] section")
        alts = cp["alternatives"]
        if "names" not in alts:
            raise SchemaError("[alternatives] needs 'names'")
        if "column" not in cp["choice"]:
            raise SchemaError("[choice] needs 'column'")
        availability = {}
        require_all = False
        if "availability" in cp:
            for key, val in cp["availability"].items():
                if key == "require_all":
                    require_all = cp["availability"].getboolean("require_all")
                else:
                    availability[key] = val.strip()
        continuous, categorical = [], []
        for name in cp.sections():
            sec = cp[name]
            if name.startswith("continuous:"):
                if "columns" not in sec:
                    raise SchemaError(f"[{name}] needs 'columns'")
                continuous.append(
                    ContinuousVar(
                        name=name.split(":", 1)[1].strip(),
                        columns=_split_list(sec["columns"]),
                        scale=sec.getfloat("scale", 1.0),
                        mode=sec.get("mode", "generic").strip(),
                        alternatives=_split_list(sec["alternatives"]) if "alternatives" in sec else None,
                    )
                )
            elif name.startswith("categorical:"):
                if "column" not in sec:
                    raise SchemaError(f"[{name}] needs 'column'")
                categorical.append(
                    CategoricalVar(
                        name=name.split(":", 1)[1].strip(),
                        column=sec["column"].strip(),
                        edges=[float(e) for e in _split_list(sec["edges"])] if "edges" in sec else None,
                    )
                )
        choice = cp["choice"]
        return cls(
            alternatives=_split_list(alts["names"]),
            reference=alts.get("reference", None),
            asc=alts.getboolean("asc", True),
            choice_column=choice["column"].strip(),
            choice_codes=_split_list(choice["codes"]) if "codes" in choice else None,
            choice_missing=_split_list(choice["missing"]) if "missing" in choice else [],
            availability=availability,
            require_all_available=require_all,
            continuous=continuous,
            categorical=categorical,
        )

    @classmethod
    def load(cls, path) -> "Schema":
        return cls.from_ini(Path(path).read_text(encoding="utf-8"))

    def fingerprint(self) -> str:
        """Hash of what a fitted model depends on: alternatives and feature layout."""
        payload = {
            "alternatives": self.alternatives,
            "features": self.feature_names(),
            "categorical": [v.name for v in self.categorical],
        }
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def _split_list(text: str) -> list[str]:
    return [t.strip() for t in text.replace("\n", ",").split(",") if t.strip()]


def _is_zero_literal(col: str) -> bool:
    try:
        return float(col) == 0.0
    except ValueError:
        return False


def _fmt_num(x: float) -> str:
    return f"{x:g}"


# ----------------------------------------------------------------------------
# vocabulary


@dataclass
class Vocabulary:
    """Global index over all categories of all categorical variables."""

    variables: list[str]
    categories: list[list[str]]

    def __post_init__(self):
        self.offsets = np.concatenate([[0], np.cumsum([len(c) for c in self.categories])]).astype(int)
        self._index = {}
        for m, cats in enumerate(self.categories):
            for j, label in enumerate(cats):
                self._index[(m, label)] = int(self.offsets[m]) + j

    @property
    def size(self) -> int:
        return int(self.offsets[-1])

    Z = size

    @property
    def n_variables(self) -> int:
        return len(self.variables)

    def index(self, variable: str | int, label: str) -> int:
        m = variable if isinstance(variable, int) else self.variables.index(variable)
        return self._index[(m, label)]

    def get(self, m: int, label: str) -> int:
        return self._index.get((m, label), UNSEEN)

    def lookup(self, idx: int) -> tuple[str, str]:
        m = int(np.searchsorted(self.offsets, idx, side="right")) - 1
        if not 0 <= idx < self.size:
            raise IndexError(f"category index {idx} outside 0..{self.size - 1}")
        return self.variables[m], self.categories[m][idx - self.offsets[m]]

    def variable_of(self) -> np.ndarray:
        """Variable index for every global category index."""
        return np.repeat(np.arange(self.n_variables), [len(c) for c in self.categories])

    def labels(self) -> list[tuple[str, str]]:
        return [(v, c) for v, cats in zip(self.variables, self.categories) for c in cats]

    def to_dict(self) -> dict:
        return {"variables": list(self.variables), "categories": [list(c) for c in self.categories]}

    @classmethod
    def from_dict(cls, d: dict) -> "Vocabulary":
        return cls(list(d["variables"]), [list(c) for c in d["categories"]])


# ----------------------------------------------------------------------------
# dataset


class Batch(NamedTuple):
    X: np.ndarray  # (N, J, K) continuous features
    Q: np.ndarray  # (N, M) global category indices, UNSEEN for unknown
    choice: np.ndarray  # (N,)
    avail: np.ndarray  # (N, J) bool


@dataclass
class ChoiceDataset:
    X: np.ndarray
    Q: np.ndarray
    choice: np.ndarray
    avail: np.ndarray
    alternatives: list[str]
    feature_names: list[str]
    vocabulary: Vocabulary
    reference: int = 0
    dropped: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.Q = np.asarray(self.Q, dtype=np.int64)
        if self.Q.ndim != 2:
            self.Q = self.Q.reshape(len(self.X), -1) if len(self.X) else self.Q.reshape(0, self.vocabulary.n_variables)
        self.choice = np.asarray(self.choice, dtype=np.int64)
        self.avail = np.asarray(self.avail, dtype=bool)
        n, j, k = self.X.shape
        if j != len(self.alternatives) or k != len(self.feature_names):
            raise DataError("continuous tensor does not match alternatives/feature names")
        if self.Q.shape[1] != self.vocabulary.n_variables:
            raise DataError("categorical matrix does not match vocabulary")
        if n and not np.all(self.avail[np.arange(n), self.choice]):
            bad = int(np.flatnonzero(~self.avail[np.arange(n), self.choice])[0])
            raise DataError(f"observation {bad}: chosen alternative is unavailable")
        if np.any(self.Q >= self.vocabulary.size) or np.any(self.Q < UNSEEN):
            raise DataError("category index out of range")

    def __len__(self) -> int:
        return len(self.choice)

    @property
    def n_obs(self) -> int:
        return len(self.choice)

    @property
    def n_unseen(self) -> int:
        return int(np.sum(self.Q == UNSEEN))

    def batch(self, idx=None) -> Batch:
        if idx is None:
            return Batch(self.X, self.Q, self.choice, self.avail)
        return Batch(self.X[idx], self.Q[idx], self.choice[idx], self.avail[idx])

    def subset(self, idx) -> "ChoiceDataset":
        idx = np.asarray(idx, dtype=np.int64)
        return replace(
            self, X=self.X[idx], Q=self.Q[idx], choice=self.choice[idx], avail=self.avail[idx], dropped={}
        )

    def with_features(self, X, feature_names, *, keep_categorical=True) -> "ChoiceDataset":
        if keep_categorical:
            return replace(self, X=X, feature_names=list(feature_names))
        return replace(
            self,
            X=X,
            feature_names=list(feature_names),
            Q=np.zeros((len(X), 0), dtype=np.int64),
            vocabulary=Vocabulary([], []),
        )


def _cell(row: dict, col: str) -> str | None:
    val = row.get(col)
    if val is None:
        return None
    val = val.strip()
    return None if val.lower() in MISSING_TOKENS else val


def load_csv(path, schema: Schema, vocabulary: Vocabulary | None = None) -> ChoiceDataset:
    """Read a wide-format CSV into a :class:`ChoiceDataset`.

    Rows with a missing value in any schema column (or a choice listed in
    ``choice.missing``) are dropped and counted in ``dataset.dropped``.  When
    ``vocabulary`` is given it is reused and unknown categories are mapped to
    :data:`UNSEEN`; otherwise one is built from the retained rows in order of
    first appearance.
    """
    path = Path(path)
    J = schema.n_alternatives
    feature_names = schema.feature_names()
    ref = schema.reference_index
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in schema.required_columns() if c not in header]
        if missing:
            raise SchemaError(f"column(s) not found in {path.name}: {', '.join(missing)}")

        dropped = {"missing": 0, "unavailable": 0}
        xs, raw_cats, choices, avails = [], [], [], []
        for lineno, row in enumerate(reader, start=2):
            values = {c: _cell(row, c) for c in schema.required_columns()}
            choice_raw = values[schema.choice_column]
            if any(v is None for v in values.values()) or choice_raw in schema.choice_missing:
                dropped["missing"] += 1
                continue
            try:
                choice = _choice_index(schema, choice_raw)
            except ValueError as exc:
                raise DataError(f"line {lineno}: {exc}") from None
            try:
                av = np.ones(J, dtype=bool)
                for a, col in schema.availability.items():
                    av[schema.alternatives.index(a)] = float(values[col]) != 0.0
                x = np.zeros((J, len(feature_names)))
                k = 0
                if schema.asc:
                    for j in range(J):
                        if j != ref:
                            x[j, k] = 1.0
                            k += 1
                for var in schema.continuous:
                    per_alt = _continuous_values(var, values, J) * var.scale
                    if var.mode == "generic":
                        x[:, k] = per_alt
                        k += 1
                    else:
                        for a in schema._specific_alts(var):
                            j = schema.alternatives.index(a)
                            x[j, k] = per_alt[j]
                            k += 1
                cats = []
                for var in schema.categorical:
                    raw = values[var.column]
                    if var.edges is not None:
                        raw = discretize([float(raw)], var.edges)[0]
                    cats.append(raw)
            except (ValueError, DataError) as exc:
                raise DataError(f"line {lineno}: {exc}") from None
            if schema.require_all_available and not av.all():
                dropped["unavailable"] += 1
                continue
            if not av[choice]:
                raise DataError(f"line {lineno}: chosen alternative {schema.alternatives[choice]!r} is unavailable")
            xs.append(x)
            raw_cats.append(cats)
            choices.append(choice)
            avails.append(av)

    M = len(schema.categorical)
    if vocabulary is None:
        cats_per_var = [list(dict.fromkeys(r[m] for r in raw_cats)) for m in range(M)]
        vocabulary = Vocabulary([v.name for v in schema.categorical], cats_per_var)
    elif vocabulary.variables != [v.name for v in schema.categorical]:
        raise SchemaError("vocabulary variables do not match the schema's categorical variables")
    Q = np.array([[vocabulary.get(m, r[m]) for m in range(M)] for r in raw_cats], dtype=np.int64).reshape(
        len(raw_cats), M
    )
    n_unseen = int(np.sum(Q == UNSEEN))
    if n_unseen:
        warnings.warn(f"{n_unseen} categorical value(s) not in the vocabulary; using zero embeddings")
    dropped["unseen_categories"] = n_unseen
    return ChoiceDataset(
        X=np.array(xs).reshape(len(xs), J, len(feature_names)),
        Q=Q,
        choice=np.array(choices, dtype=np.int64),
        avail=np.array(avails, dtype=bool).reshape(len(avails), J),
        alternatives=list(schema.alternatives),
        feature_names=feature_names,
        vocabulary=vocabulary,
        reference=ref,
        dropped=dropped,
    )


def _choice_index(schema: Schema, raw: str) -> int:
    if schema.choice_codes is not None:
        codes = schema.choice_codes
        if raw in codes:
            return codes.index(raw)
        try:
            num = float(raw)
            for i, c in enumerate(codes):
                if float(c) == num:
                    return i
        except ValueError:
            pass
        raise ValueError(f"choice value {raw!r} is not one of the codes {codes}")
    if raw in schema.alternatives:
        return schema.alternatives.index(raw)
    raise ValueError(f"choice value {raw!r} is not an alternative name")


def _continuous_values(var: ContinuousVar, values: dict, J: int) -> np.ndarray:
    if len(var.columns) == 1:
        return np.full(J, float(values[var.columns[0]]))
    return np.array([0.0 if _is_zero_literal(c) else float(values[c]) for c in var.columns])


# ----------------------------------------------------------------------------
# splitting


def read_index_file(path) -> np.ndarray:
    lines = Path(path).read_text().split()
    try:
        return np.array([int(t) for t in lines], dtype=np.int64)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None


def split(
    dataset: ChoiceDataset,
    *,
    train_index=None,
    fraction: float | None = None,
    seed: int = 0,
) -> tuple[ChoiceDataset, ChoiceDataset]:
    """Partition into (train, test).

    Either ``train_index`` (positions of the training observations; a path
    to a one-index-per-line file is accepted too) or ``fraction`` of rows to
    put in the training set, drawn with ``seed``.
    """
    n = len(dataset)
    if train_index is not None:
        if isinstance(train_index, (str, Path)):
            train_index = read_index_file(train_index)
        idx = np.asarray(train_index, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise DataError(f"split index out of range 0..{n - 1}")
        if len(np.unique(idx)) != len(idx):
            raise DataError("split index contains duplicates")
        is_train = np.zeros(n, dtype=bool)
        is_train[idx] = True
        train = np.sort(idx)
    elif fraction is not None:
        if not 0.0 <= fraction <= 1.0:
            raise ValueError("fraction must lie in [0, 1]")
        perm = seeded_rng(seed).permutation(n)
        train = np.sort(perm[: int(round(fraction * n))])
        is_train = np.zeros(n, dtype=bool)
        is_train[train] = True
    else:
        raise ValueError("give train_index or fraction")
    test = np.flatnonzero(~is_train)
    if len(test) == 0:
        warnings.warn("split leaves the test set empty")
    return dataset.subset(train), dataset.subset(test)


# ----------------------------------------------------------------------------
# dummy encoding


def _parse_drop(entry: str, vocabulary: Vocabulary, alternatives: Sequence[str]):
    alt = None
    if "@" in entry:
        entry, alt = entry.rsplit("@", 1)
        if alt not in alternatives:
            raise DataError(f"drop entry names unknown alternative {alt!r}")
    if "=" in entry:
        var, label = entry.split("=", 1)
        if var not in vocabulary.variables:
            raise DataError(f"drop entry names unknown variable {var!r}")
        m = vocabulary.variables.index(var)
        if label not in vocabulary.categories[m]:
            raise DataError(f"category {label!r} not found in variable {var!r}")
    else:
        hits = [(m, entry) for m, cats in enumerate(vocabulary.categories) if entry in cats]
        if not hits:
            raise DataError(f"category {entry!r} not found in any variable")
        if len(hits) > 1:
            raise DataError(f"category {entry!r} is ambiguous; write VARIABLE={entry}")
        m, label = hits[0]
    return m, label, alt


def dummy_expand(
    dataset: ChoiceDataset,
    drop: Sequence[str] = (),
    *,
    reference: str = "first",
) -> ChoiceDataset:
    """Replace categorical variables by alternative-specific 0/1 dummies.

    Every retained category gets one feature per non-reference alternative,
    nonzero only in that alternative's utility.  ``reference="first"``
    omits the first category of every variable; ``drop`` removes further
    categories, written ``VAR=label`` (or a bare unambiguous label), with an
    optional ``@Alternative`` suffix to drop that single coefficient only.
    """
    vocab = dataset.vocabulary
    alts = dataset.alternatives
    coef_alts = [j for j in range(len(alts)) if j != dataset.reference]
    full_drop, alt_drop = set(), set()
    for entry in drop:
        m, label, alt = _parse_drop(entry, vocab, alts)
        if alt is None:
            full_drop.add((m, label))
        else:
            alt_drop.add((m, label, alts.index(alt)))

    columns, names = [], []
    for m, (var, cats) in enumerate(zip(vocab.variables, vocab.categories)):
        kept = [c for i, c in enumerate(cats) if not (reference == "first" and i == 0)]
        if any((m, c) in full_drop for c in cats) and not [c for c in kept if (m, c) not in full_drop]:
            raise DataError(f"dropping leaves no dummy for variable {var!r}")
        kept = [c for c in kept if (m, c) not in full_drop]
        for label in kept:
            gidx = vocab.index(m, label)
            indicator = (dataset.Q[:, m] == gidx).astype(np.float64)
            for j in coef_alts:
                if (m, label, j) in alt_drop:
                    continue
                col = np.zeros((len(dataset), len(alts)))
                col[:, j] = indicator
                columns.append(col)
                names.append(f"{var}={label}@{alts[j]}")
    if columns:
        extra = np.stack(columns, axis=2)
        X = np.concatenate([dataset.X, extra], axis=2)
    else:
        X = dataset.X.copy()
    return dataset.with_features(X, dataset.feature_names + names, keep_categorical=False)


def dummy_count(n_categories: Sequence[int], n_alternatives: int, drops: int = 0, reference: str = "first") -> int:
    """Number of dummy coefficients :func:`dummy_expand` produces for given sizes."""
    per_var = sum(n - (1 if reference == "first" else 0) for n in n_categories)
    return (per_var - drops) * (n_alternatives - 1)


# ----------------------------------------------------------------------------
# discretization


def bin_labels(edges: Sequence[float]) -> list[str]:
    labels = [f"[{_fmt_num(edges[0])},{_fmt_num(edges[1])}]"]
    labels += [f"({_fmt_num(lo)},{_fmt_num(hi)}]" for lo, hi in zip(edges[1:-1], edges[2:])]
    return labels


def discretize(values, edges: Sequence[float]) -> list[str]:
    """Map numbers to right-closed bin labels: ``[e0,e1]``, ``(e1,e2]``, ...

    Values outside ``[edges[0], edges[-1]]`` raise a :class:`DataError`
    listing every offending position.
    """
    edges = np.asarray(edges, dtype=np.float64)
    if len(edges) < 2 or np.any(np.diff(edges) <= 0):
        raise ValueError("edges must be strictly increasing with at least two entries")
    values = np.asarray(values, dtype=np.float64)
    bad = np.flatnonzero((values < edges[0]) | (values > edges[-1]) | ~np.isfinite(values))
    if bad.size:
        raise DataError(
            "values outside bin range "
            + ", ".join(f"#{i}={values[i]:g}" for i in bad[:20])
        )
    # right-closed: a value equal to an inner edge belongs to the lower bin
    pos = np.searchsorted(edges, values, side="left") - 1
    pos = np.clip(pos, 0, len(edges) - 2)
    labels = bin_labels(edges)
    return [labels[p] for p in pos]
