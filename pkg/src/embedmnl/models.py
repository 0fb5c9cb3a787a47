"""Utilities, probabilities and analytic gradients for MNL, E-MNL and EL-MNL.

All three families share one parameter container:

* ``B``     (K,)          coefficients of the continuous features (ASCs included)
* ``Bp``    (M,)          non-negative coefficient per categorical variable
* ``W``     (Z, D_s)      embedding matrix; ``D_s = J + S`` or ``1 + S`` when tied
* ``M1``    (M*S, H)      hidden-layer weights over the extra embedding dims
* ``b1``    (H,)          hidden-layer biases
* ``M2``    (H, J)        output weights of the representation term
* ``alpha`` (J,)          output biases of the representation term

For a binary tied model only the first alternative's embedding column is
stored; the second is its negation.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields

import numpy as np

from .data import UNSEEN, Batch, ChoiceDataset
from .numkernel import log_softmax, softmax

FAMILIES = ("mnl", "emnl", "elmnl")
BLOCKS = ("B", "Bp", "W", "M1", "b1", "M2", "alpha")
EMBEDDING_INIT_RANGE = 0.05
# B' = 0 is a stationary point (no gradient reaches W), so start inside the feasible set
BP_INIT = 1.0


@dataclass(frozen=True)
class ModelSpec:
    family: str
    n_alternatives: int
    n_features: int
    n_categorical: int = 0
    n_categories: int = 0
    extra_dims: int = 0
    hidden: int = 0
    binary_tied: bool = False
    feature_names: tuple = ()
    alternatives: tuple = ()

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.family == "emnl" and (self.extra_dims or self.hidden):
            raise ValueError("emnl has D = J: extra_dims and hidden must be 0")
        if self.family == "elmnl" and (self.extra_dims < 1 or self.hidden < 1):
            raise ValueError("elmnl needs extra_dims >= 1 and hidden >= 1")
        if self.family != "mnl" and self.n_categorical < 1:
            raise ValueError(f"{self.family} needs at least one categorical variable")
        if self.binary_tied and self.n_alternatives != 2:
            raise ValueError("binary_tied requires exactly two alternatives")
        if self.feature_names and len(self.feature_names) != self.n_features:
            raise ValueError("feature_names length differs from n_features")
        if self.alternatives and len(self.alternatives) != self.n_alternatives:
            raise ValueError("alternatives length differs from n_alternatives")

    @classmethod
    def for_dataset(cls, family: str, data: ChoiceDataset, *, extra_dims=0, hidden=0, binary_tied=False):
        has_emb = family != "mnl"
        return cls(
            family=family,
            n_alternatives=len(data.alternatives),
            n_features=len(data.feature_names),
            n_categorical=data.vocabulary.n_variables if has_emb else 0,
            n_categories=data.vocabulary.size if has_emb else 0,
            extra_dims=extra_dims,
            hidden=hidden,
            binary_tied=binary_tied,
            feature_names=tuple(data.feature_names),
            alternatives=tuple(data.alternatives),
        )

    @property
    def uses_embeddings(self) -> bool:
        return self.family != "mnl"

    @property
    def interp_dims(self) -> int:
        """Stored embedding columns tied to alternatives."""
        if not self.uses_embeddings:
            return 0
        return 1 if self.binary_tied else self.n_alternatives

    @property
    def embedding_dims(self) -> int:
        """Embedding width D (after undoing the tie): J + S."""
        return self.n_alternatives + self.extra_dims if self.uses_embeddings else 0

    @property
    def stored_dims(self) -> int:
        return self.interp_dims + self.extra_dims

    def block_shapes(self) -> dict[str, tuple]:
        M, S, H, J = self.n_categorical, self.extra_dims, self.hidden, self.n_alternatives
        dense = self.family == "elmnl"
        return {
            "B": (self.n_features,),
            "Bp": (M,),
            "W": (self.n_categories, self.stored_dims),
            "M1": (M * S, H) if dense else (0, 0),
            "b1": (H,) if dense else (0,),
            "M2": (H, J) if dense else (0, J),
            "alpha": (J,) if dense else (0,),
        }

    @property
    def n_interpretable(self) -> int:
        if not self.uses_embeddings:
            return self.n_features
        return self.n_features + self.n_categorical + self.n_categories * self.interp_dims

    @property
    def n_params(self) -> int:
        return int(sum(np.prod(s) for s in self.block_shapes().values()))

    @property
    def transparency(self) -> float:
        return self.n_interpretable / self.n_params

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["feature_names"] = list(self.feature_names)
        d["alternatives"] = list(self.alternatives)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        d = dict(d)
        d["feature_names"] = tuple(d.get("feature_names", ()))
        d["alternatives"] = tuple(d.get("alternatives", ()))
        return cls(**d)

    def fingerprint(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def parameter_counts(n_features, n_categorical, n_categories, n_alternatives, extra_dims=0, hidden=0, binary_tied=False):
    """(interpretable, total) parameter counts of an embedding model."""
    spec = ModelSpec(
        family="elmnl" if extra_dims else "emnl",
        n_alternatives=n_alternatives,
        n_features=n_features,
        n_categorical=n_categorical,
        n_categories=n_categories,
        extra_dims=extra_dims,
        hidden=hidden,
        binary_tied=binary_tied,
    )
    return spec.n_interpretable, spec.n_params


@dataclass
class ModelParams:
    B: np.ndarray
    Bp: np.ndarray
    W: np.ndarray
    M1: np.ndarray
    b1: np.ndarray
    M2: np.ndarray
    alpha: np.ndarray

    @classmethod
    def zeros(cls, spec: ModelSpec) -> "ModelParams":
        return cls(**{k: np.zeros(s) for k, s in spec.block_shapes().items()})

    @classmethod
    def init(cls, spec: ModelSpec, rng: np.random.Generator) -> "ModelParams":
        p = cls.zeros(spec)
        p.W = rng.uniform(-EMBEDDING_INIT_RANGE, EMBEDDING_INIT_RANGE, size=p.W.shape)
        p.Bp = np.full(p.Bp.shape, BP_INIT)
        if spec.family == "elmnl":
            p.M1 = _glorot(rng, p.M1.shape)
            p.M2 = _glorot(rng, p.M2.shape)
        return p

    def copy(self) -> "ModelParams":
        return ModelParams(**{k: getattr(self, k).copy() for k in BLOCKS})

    def flatten(self, blocks=BLOCKS) -> np.ndarray:
        return np.concatenate([getattr(self, k).ravel() for k in blocks])

    def unflatten(self, vec: np.ndarray, blocks=BLOCKS) -> "ModelParams":
        """Copy of ``self`` with ``blocks`` replaced from the flat vector."""
        out = self.copy()
        pos = 0
        for k in blocks:
            shape = getattr(self, k).shape
            n = int(np.prod(shape))
            setattr(out, k, np.asarray(vec[pos : pos + n], dtype=np.float64).reshape(shape))
            pos += n
        if pos != len(vec):
            raise ValueError(f"flat vector has {len(vec)} entries, blocks need {pos}")
        return out

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in BLOCKS} | {
            "shapes": {k: list(getattr(self, k).shape) for k in BLOCKS}
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        return cls(**{k: np.array(d[k], dtype=np.float64).reshape(d["shapes"][k]) for k in BLOCKS})

    def check(self, spec: ModelSpec) -> None:
        for k, shape in spec.block_shapes().items():
            if getattr(self, k).shape != tuple(shape):
                raise ValueError(f"parameter block {k} has shape {getattr(self, k).shape}, spec needs {shape}")


def _glorot(rng, shape):
    fan_in, fan_out = shape
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


# ----------------------------------------------------------------------------
# forward


@dataclass
class UtilityBatch:
    V: np.ndarray
    E: np.ndarray | None = None  # (N, M, D_s) gathered embeddings after dropout
    Qp: np.ndarray | None = None  # (N, M, J) interpretable coordinates
    R: np.ndarray | None = None  # (N, M*S) dense-layer input
    h_pre: np.ndarray | None = None
    h: np.ndarray | None = None
    dropout_mask: np.ndarray | None = None
    extras: dict = field(default_factory=dict)


def _as_batch(data) -> Batch:
    return data.batch() if isinstance(data, ChoiceDataset) else data


def untie(spec: ModelSpec, cols: np.ndarray) -> np.ndarray:
    """Interpretable columns (..., interp_dims) -> (..., J)."""
    if spec.binary_tied:
        return np.concatenate([cols, -cols], axis=-1)
    return cols


def full_embeddings(spec: ModelSpec, W: np.ndarray) -> np.ndarray:
    """(Z, J + S) matrix with the tie undone."""
    return np.concatenate([untie(spec, W[:, : spec.interp_dims]), W[:, spec.interp_dims :]], axis=1)


def gather(W: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Embedding rows for category indices; UNSEEN yields a zero row."""
    W_ext = np.vstack([W, np.zeros((1, W.shape[1]))])
    return W_ext[np.where(Q == UNSEEN, W.shape[0], Q)]


def forward_mnl(spec: ModelSpec, params: ModelParams, batch) -> UtilityBatch:
    batch = _as_batch(batch)
    if batch.X.shape[1:] != (spec.n_alternatives, spec.n_features):
        raise ValueError(
            f"features of shape {batch.X.shape[1:]} do not match spec "
            f"({spec.n_alternatives}, {spec.n_features})"
        )
    if params.B.shape != (spec.n_features,):
        raise ValueError("B does not match the model spec")
    return UtilityBatch(V=batch.X @ params.B)


def forward_emnl(spec: ModelSpec, params: ModelParams, batch, dropout_mask=None) -> UtilityBatch:
    batch = _as_batch(batch)
    out = forward_mnl(spec, params, batch)
    if np.any(params.Bp < 0):
        raise ValueError("embedding coefficients must be non-negative")
    if batch.Q.shape[1] != spec.n_categorical:
        raise ValueError("categorical inputs do not match the model spec")
    if batch.Q.size and batch.Q.max() >= spec.n_categories:
        raise IndexError("category index out of range")
    E = gather(params.W, batch.Q)
    if dropout_mask is not None:
        E = E * dropout_mask
    Qp = untie(spec, E[..., : spec.interp_dims])
    out.V = out.V + np.einsum("nmj,m->nj", Qp, params.Bp)
    out.E, out.Qp, out.dropout_mask = E, Qp, dropout_mask
    return out


def forward_elmnl(spec: ModelSpec, params: ModelParams, batch, dropout_mask=None) -> UtilityBatch:
    out = forward_emnl(spec, params, batch, dropout_mask)
    n = out.E.shape[0]
    R = out.E[..., spec.interp_dims :].reshape(n, spec.n_categorical * spec.extra_dims)
    h_pre = R @ params.M1 + params.b1
    h = np.maximum(h_pre, 0.0)
    out.V = out.V + h @ params.M2 + params.alpha
    out.R, out.h_pre, out.h = R, h_pre, h
    return out


def forward(spec: ModelSpec, params: ModelParams, batch, dropout_mask=None) -> UtilityBatch:
    if spec.family == "mnl":
        return forward_mnl(spec, params, batch)
    if spec.family == "emnl":
        return forward_emnl(spec, params, batch, dropout_mask)
    return forward_elmnl(spec, params, batch, dropout_mask)


# ----------------------------------------------------------------------------
# likelihood and gradients


def predict_proba(spec: ModelSpec, params: ModelParams, data) -> np.ndarray:
    batch = _as_batch(data)
    return softmax(forward(spec, params, batch).V, batch.avail)


def chosen_log_probs(spec: ModelSpec, params: ModelParams, data) -> np.ndarray:
    batch = _as_batch(data)
    logp = log_softmax(forward(spec, params, batch).V, batch.avail)
    return logp[np.arange(len(batch.choice)), batch.choice]


def log_likelihood(spec: ModelSpec, params: ModelParams, data) -> float:
    """Sum of log choice probabilities, dropout off."""
    return float(np.sum(chosen_log_probs(spec, params, data)))


def backward(spec: ModelSpec, params: ModelParams, batch, cache: UtilityBatch | None) -> ModelParams:
    """Gradient of the mean cross-entropy over ``batch``.

    ``cache`` must come from :func:`forward` on the same batch; the dropout
    mask stored there is reapplied on the way back.
    """
    if cache is None:
        raise ValueError("backward needs the forward cache")
    batch = _as_batch(batch)
    n = len(batch.choice)
    P = softmax(cache.V, batch.avail)
    dV = P
    dV[np.arange(n), batch.choice] -= 1.0
    dV /= n

    g = ModelParams.zeros(spec)
    g.B = np.einsum("njk,nj->k", batch.X, dV)
    if not spec.uses_embeddings:
        return g

    g.Bp = np.einsum("nmj,nj->m", cache.Qp, dV)
    dQp = dV[:, None, :] * params.Bp[None, :, None]
    if spec.binary_tied:
        dE_interp = dQp[..., :1] - dQp[..., 1:]
    else:
        dE_interp = dQp

    if spec.family == "elmnl":
        g.alpha = dV.sum(axis=0)
        g.M2 = cache.h.T @ dV
        dh_pre = (dV @ params.M2.T) * (cache.h_pre > 0)
        g.b1 = dh_pre.sum(axis=0)
        g.M1 = cache.R.T @ dh_pre
        dR = (dh_pre @ params.M1.T).reshape(n, spec.n_categorical, spec.extra_dims)
        dE = np.concatenate([dE_interp, dR], axis=-1)
    else:
        dE = dE_interp

    if cache.dropout_mask is not None:
        dE = dE * cache.dropout_mask
    seen = batch.Q != UNSEEN
    gW = np.zeros_like(params.W)
    np.add.at(gW, batch.Q[seen], dE[seen])
    g.W = gW
    return g


def loss_and_grad(spec: ModelSpec, params: ModelParams, batch, dropout_mask=None):
    """Mean cross-entropy and its gradient."""
    batch = _as_batch(batch)
    cache = forward(spec, params, batch, dropout_mask)
    logp = log_softmax(cache.V, batch.avail)[np.arange(len(batch.choice)), batch.choice]
    return float(-np.mean(logp)), backward(spec, params, batch, cache)
