"""Post-estimation statistics for the interpretable coefficients (B, B').

Standard errors condition on the embedding matrix and dense layers at their
fitted values: with those held fixed the utility is linear in (B, B') over
the features ``[X, Q']`` plus a fixed offset, so the usual MNL information
matrix applies.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from .data import ChoiceDataset
from .models import ModelParams, ModelSpec, forward, gather, untie
from .numkernel import softmax

CONDITION_LIMIT = 1e12
CONDITIONING_NOTE = "standard errors conditional on fitted embeddings and dense layers"


class SingularHessianError(np.linalg.LinAlgError):
    def __init__(self, unidentified: list[str], condition: float):
        self.unidentified = unidentified
        self.condition = condition
        super().__init__(
            f"Hessian is singular or ill-conditioned (condition number {condition:.3g}); "
            f"unidentified coefficients: {', '.join(unidentified) or 'unknown'}"
        )


def interpretable_names(spec: ModelSpec, data: ChoiceDataset) -> list[str]:
    names = list(spec.feature_names or data.feature_names)
    if spec.uses_embeddings:
        names += list(data.vocabulary.variables)
    return names


def interpretable_vector(spec: ModelSpec, params: ModelParams) -> np.ndarray:
    if spec.uses_embeddings:
        return np.concatenate([params.B, params.Bp])
    return params.B.copy()


def linear_features(spec: ModelSpec, params: ModelParams, data: ChoiceDataset) -> np.ndarray:
    """(N, J, K + M) features multiplying (B, B')."""
    if not spec.uses_embeddings:
        return data.X
    E = gather(params.W, data.Q)
    Qp = untie(spec, E[..., : spec.interp_dims])  # (N, M, J)
    return np.concatenate([data.X, np.transpose(Qp, (0, 2, 1))], axis=2)


def hessian_interpretable(spec: ModelSpec, params: ModelParams, data: ChoiceDataset, *, check: bool = True, names=None):
    """Analytic Hessian of the negative log-likelihood w.r.t. (B, B').

    Raises :class:`SingularHessianError` naming the coefficients involved in
    near-null directions when the condition number exceeds 1e12.
    """
    Zf = linear_features(spec, params, data)
    P = softmax(forward(spec, params, data).V, data.avail)
    zbar = np.einsum("nj,njk->nk", P, Zf)
    centred = Zf - zbar[:, None, :]
    H = np.einsum("nj,njk,njl->kl", P, centred, centred)
    H = 0.5 * (H + H.T)
    if check:
        names = names or interpretable_names(spec, data)
        check_identified(H, names)
    return H


def check_identified(H: np.ndarray, names: list[str]) -> None:
    evals, evecs = np.linalg.eigh(H)
    top = evals[-1] if len(evals) else 0.0
    low = evals[0] if len(evals) else 0.0
    cond = np.inf if low <= 0 or top <= 0 else top / low
    if cond > CONDITION_LIMIT:
        null = evecs[:, evals <= max(top, 1e-300) / CONDITION_LIMIT]
        if null.shape[1] == 0:
            null = evecs[:, :1]
        loading = np.abs(null).max(axis=1)
        bad = [n for n, l in zip(names, loading) if l > 0.1]
        raise SingularHessianError(bad, float(cond))


def significance(p: float) -> str:
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return ""


@dataclass
class CoefficientRow:
    name: str
    estimate: float
    std_error: float
    t_stat: float
    p_value: float

    @property
    def stars(self) -> str:
        return significance(self.p_value)


@dataclass
class CoefficientTable:
    rows: list
    note: str = CONDITIONING_NOTE

    def __getitem__(self, name: str) -> CoefficientRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    def to_text(self) -> str:
        width = max([6] + [len(r.name) for r in self.rows])
        lines = [f"{'Params':<{width}}  {'Estimate':>10} {'Std err':>10} {'t-stat':>10} {'p-value':>8}  Sig."]
        for r in self.rows:
            lines.append(
                f"{r.name:<{width}}  {r.estimate:>10.3f} {r.std_error:>10.3f} "
                f"{r.t_stat:>10.3f} {r.p_value:>8.3f}  {r.stars}"
            )
        lines.append(f"({self.note}; *** p<0.001, ** p<0.01, * p<0.05)")
        return "\n".join(lines)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["param", "estimate", "std_error", "t_stat", "p_value", "sig"])
        for r in self.rows:
            w.writerow([r.name, repr(r.estimate), repr(r.std_error), repr(r.t_stat), repr(r.p_value), r.stars])
        return buf.getvalue()


def coefficient_table(names, estimates, hessian, note: str = CONDITIONING_NOTE) -> CoefficientTable:
    """Std errors from the inverse Hessian, normal-reference two-sided p-values."""
    estimates = np.asarray(estimates, dtype=np.float64)
    check_identified(hessian, list(names))
    cov = np.linalg.inv(hessian)
    se = np.sqrt(np.diag(cov))
    rows = []
    for name, est, s in zip(names, estimates, se):
        t = est / s if s > 0 else float("nan")
        p = float(2.0 * sps.norm.sf(abs(t))) if np.isfinite(t) else float("nan")
        rows.append(CoefficientRow(name, float(est), float(s), float(t), p))
    return CoefficientTable(rows, note)


def estimate_table(spec: ModelSpec, params: ModelParams, data: ChoiceDataset) -> CoefficientTable:
    names = interpretable_names(spec, data)
    H = hessian_interpretable(spec, params, data, names=names)
    note = CONDITIONING_NOTE
    if spec.binary_tied:
        note += f"; embedding columns tied: {spec.alternatives[1] if spec.alternatives else 'second'} = -first"
    return coefficient_table(names, interpretable_vector(spec, params), H, note)


# ----------------------------------------------------------------------------
# summaries


@dataclass
class TransparencyReport:
    interpretable: int
    total: int

    @property
    def ratio(self) -> float:
        return self.interpretable / self.total


@dataclass
class ModelSummary:
    label: str
    transparency: TransparencyReport
    ll_train: tuple
    ll_test: tuple
    aic: tuple
    n_runs: int
    n_failed: int = 0

    def row(self) -> list:
        def ms(x):
            mean, std = x
            return f"{mean:.1f}" + (f" ({std:.1f})" if np.isfinite(std) else "")

        return [
            self.label,
            ms(self.ll_train),
            ms(self.ll_test),
            self.transparency.interpretable,
            self.transparency.total,
            f"{self.transparency.ratio:.2f}",
            ms(self.aic),
            self.n_runs,
            self.n_failed,
        ]


SUMMARY_HEADER = ["model", "LL_train (std)", "LL_test (std)", "interpret. params", "total params", "ratio", "AIC (std)", "runs", "failed"]


def model_label(spec: ModelSpec) -> str:
    if spec.family == "mnl":
        return "MNL"
    if spec.family == "emnl":
        return f"E-MNL(D={spec.embedding_dims})"
    return f"EL-MNL(D={spec.embedding_dims}, K={spec.hidden})"


def model_summary(spec: ModelSpec, results, failures=(), label: str | None = None) -> ModelSummary:
    """LL/AIC block (mean, std over runs) and parameter transparency."""
    results = list(results)

    def agg(attr):
        vals = np.array([getattr(r, attr) for r in results if getattr(r, attr) is not None], dtype=float)
        if len(vals) == 0:
            return float("nan"), float("nan")
        return float(vals.mean()), float(vals.std(ddof=1)) if len(vals) > 1 else float("nan")

    return ModelSummary(
        label=label or model_label(spec),
        transparency=TransparencyReport(spec.n_interpretable, spec.n_params),
        ll_train=agg("ll_train"),
        ll_test=agg("ll_test"),
        aic=agg("aic"),
        n_runs=len(results),
        n_failed=len(failures),
    )


def summary_text(summaries) -> str:
    rows = [SUMMARY_HEADER] + [[str(c) for c in s.row()] for s in summaries]
    widths = [max(len(r[i]) for r in rows) for i in range(len(SUMMARY_HEADER))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in rows)


def summary_csv(summaries) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["model", "ll_train_mean", "ll_train_std", "ll_test_mean", "ll_test_std", "interpretable", "total", "ratio", "aic_mean", "aic_std", "runs", "failed"])
    for s in summaries:
        t = s.transparency
        w.writerow([s.label, *s.ll_train, *s.ll_test, t.interpretable, t.total, t.ratio, *s.aic, s.n_runs, s.n_failed])
    return buf.getvalue()
