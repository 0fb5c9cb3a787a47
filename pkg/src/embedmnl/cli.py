"""Command line interface.

Exit codes: 0 success, 1 runtime failure, 2 configuration or validation error.
The default output directory may be set with the ``EMBEDMNL_OUT`` environment
variable.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig
from .data import DataError, Schema, SchemaError, dummy_expand, load_csv, split
from .embeddings import (
    ArtifactError,
    EmbeddingArtifact,
    encode_with_artifact,
    export_artifact,
    import_artifact,
    near_zero_screen,
    pairwise_distances,
    scaled_coordinates,
)
from .modelfile import FittedModel
from .models import ModelSpec, log_likelihood, predict_proba
from .stats import SingularHessianError, estimate_table, model_summary, summary_csv, summary_text
from .synth import SynthConfig, SynthConfigError, write_synth
from .training import FitConfig, TrainingDiverged, fit_dummy_baseline, fit_multi

log = logging.getLogger("embedmnl")

OUT_ENV = "EMBEDMNL_OUT"
EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


class UsageError(Exception):
    """Configuration/validation problem; maps to exit code 2."""

    def __init__(self, messages):
        self.messages = [messages] if isinstance(messages, str) else list(messages)
        super().__init__("; ".join(self.messages))


def _header(config_hash: str) -> str:
    return f"# embedmnl {__version__} config_sha256: {config_hash}\n"


def _write(path: Path, text: str, config_hash: str) -> Path:
    path.write_text(_header(config_hash) + text, encoding="utf-8")
    return path


def _out_dir(arg: str | None, cfg: ExperimentConfig | None = None) -> Path:
    if arg:
        out = Path(arg)
    elif cfg is not None and cfg.output:
        out = cfg.path(cfg.output)
    else:
        out = Path(os.environ.get(OUT_ENV, "embedmnl_out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_config(args) -> ExperimentConfig:
    try:
        cfg = ExperimentConfig.load(args.config)
    except ConfigError as exc:
        raise UsageError(exc.errors) from None
    if getattr(args, "seed", None) is not None:
        cfg.fit["seed"] = args.seed
    if getattr(args, "runs", None) is not None:
        cfg.fit["runs"] = args.runs
    if getattr(args, "threads", None) is not None:
        cfg.fit["threads"] = args.threads
    errors = cfg.validate()
    if errors:
        raise UsageError(errors)
    return cfg


def load_experiment_data(cfg: ExperimentConfig):
    """Schema, train and test datasets named by an experiment config."""
    try:
        schema = Schema.load(cfg.path(cfg.schema))
        data = load_csv(cfg.path(cfg.train), schema)
        if cfg.test:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                test = load_csv(cfg.path(cfg.test), schema, vocabulary=data.vocabulary)
            for w in caught:
                log.warning("test set: %s", w.message)
            train = data
        elif cfg.split_index:
            train, test = split(data, train_index=cfg.path(cfg.split_index))
        elif cfg.split_fraction is not None:
            train, test = split(data, fraction=cfg.split_fraction, seed=cfg.split_seed)
        else:
            train, test = data, None
    except (SchemaError, DataError) as exc:
        raise UsageError(str(exc)) from None
    log.info(
        "loaded %d training / %s test observations (dropped: %s)",
        len(train), "no" if test is None else len(test), data.dropped,
    )
    return schema, train, test


# ----------------------------------------------------------------------------
# fit


def cmd_fit(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args.out, cfg)
    h = cfg.config_hash()
    schema, train, test = load_experiment_data(cfg)
    fc = cfg.fit_config()
    try:
        spec = ModelSpec.for_dataset(
            cfg.family, train, extra_dims=cfg.extra_dims, hidden=cfg.hidden, binary_tied=cfg.binary_tied
        )
    except ValueError as exc:
        raise UsageError(f"model: {exc}") from None

    run_log = out / "runs.csv"
    if run_log.exists():
        run_log.unlink()
    report = fit_multi(spec, train, test, fc, run_log=run_log)
    _write(run_log, run_log.read_text(encoding="utf-8"), h)
    if report.best is None:
        log.error("all %d runs failed", fc.runs)
        return EXIT_RUNTIME

    summaries = [model_summary(spec, report.results, report.failures)]
    if cfg.dummy_baseline:
        summaries.append(_dummy_baseline(cfg, train, test, fc))
    written = []
    if "text" in cfg.formats:
        written.append(_write(out / "summary.txt", summary_text(summaries) + "\n", h))
    if "csv" in cfg.formats:
        written.append(_write(out / "summary.csv", summary_csv(summaries), h))

    best = report.best
    try:
        table = estimate_table(spec, best.params, train)
        coef_text, coef_csv = table.to_text() + "\n", table.to_csv()
    except SingularHessianError as exc:
        log.warning("%s", exc)
        coef_text = f"{exc}\n"
        coef_csv = "param,estimate,std_error,t_stat,p_value,sig\n" + "".join(
            f"{n},,,,,unidentified\n" for n in exc.unidentified
        )
    header = f"best run seed {best.seed}: LL_train {best.ll_train:.4f}"
    if best.ll_test is not None:
        header += f", LL_test {best.ll_test:.4f}"
    if "text" in cfg.formats:
        written.append(_write(out / "coefficients.txt", header + "\n" + coef_text, h))
    if "csv" in cfg.formats:
        written.append(_write(out / "coefficients.csv", coef_csv, h))

    if spec.uses_embeddings:
        artifact = EmbeddingArtifact.from_model(
            spec, best.params, train.vocabulary, {"dataset": str(cfg.train), "seed": best.seed, "config": h}
        )
        written.append(export_artifact(artifact, out / "embeddings.csv", {"config_sha256": h}))
        written.append(_write(out / "coordinates.csv", scaled_coordinates(artifact).to_csv(), h))
    FittedModel(spec, best.params, schema, train.vocabulary, best.ll_train, best.ll_test, best.seed, h).save(
        out / "model.json"
    )
    written.append(out / "model.json")
    print(summary_text(summaries))
    for p in written:
        log.info("wrote %s", p)
    return EXIT_OK


def _dummy_baseline(cfg, train, test, fc: FitConfig):
    try:
        dtrain = dummy_expand(train, cfg.dummy_drop, reference=cfg.dummy_reference)
        dtest = dummy_expand(test, cfg.dummy_drop, reference=cfg.dummy_reference) if test is not None else None
    except DataError as exc:
        raise UsageError(f"baseline: {exc}") from None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = fit_dummy_baseline(dtrain, fc, test=dtest)
    for w in caught:
        log.warning("dummy baseline: %s", w.message)
    return model_summary(ModelSpec.for_dataset("mnl", dtrain), [res], label="MNL_dum")


# ----------------------------------------------------------------------------
# eval


def cmd_eval(args) -> int:
    try:
        model = FittedModel.load(args.model)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"model: {exc}") from None
    schema = model.schema
    if args.schema:
        try:
            schema = Schema.load(args.schema)
        except (OSError, SchemaError) as exc:
            raise UsageError(f"schema: {exc}") from None
        if schema.fingerprint() != model.schema_fingerprint:
            raise UsageError(
                f"fingerprint mismatch: model {model.schema_fingerprint}, data schema {schema.fingerprint()}"
            )
    try:
        data = load_csv(args.data, schema, vocabulary=model.vocabulary)
    except (SchemaError, DataError) as exc:
        raise UsageError(str(exc)) from None
    ll = log_likelihood(model.spec, model.params, data)
    P = predict_proba(model.spec, model.params, data)
    out = Path(args.out) if args.out else _out_dir(None) / "probabilities.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["obs", "chosen"] + [f"P_{a}" for a in data.alternatives])
    for i, row in enumerate(P):
        w.writerow([i, data.alternatives[data.choice[i]]] + [repr(float(p)) for p in row])
    _write(out, f"# LL: {ll!r}\n" + buf.getvalue(), model.config_hash)
    print(f"LL {ll:.6f} over {len(data)} observations ({data.n_unseen} unseen category values)")
    return EXIT_OK


# ----------------------------------------------------------------------------
# embeddings


def _load_artifact(path) -> EmbeddingArtifact:
    try:
        return import_artifact(path)
    except (OSError, ArtifactError, ValueError, KeyError) as exc:
        raise UsageError(f"artifact: {exc}") from None


def cmd_embeddings(args) -> int:
    sub = args.emb_command
    if sub == "export":
        model = FittedModel.load(args.model)
        art = EmbeddingArtifact.from_model(model.spec, model.params, model.vocabulary, {"seed": model.seed})
        export_artifact(art, args.out, {"config_sha256": model.config_hash})
        print(f"wrote {args.out}: Z={art.Z}, D={art.D}")
        return EXIT_OK

    if sub == "reuse":
        return _cmd_reuse(args)

    art = _load_artifact(args.artifact)
    h = art.metadata.get("config", art.fingerprint)
    if sub == "distances":
        coords = scaled_coordinates(art, scaled=not args.unscaled)
        try:
            rep = pairwise_distances(coords, args.variables, bins=args.bins)
        except ArtifactError as exc:
            raise UsageError(str(exc)) from None
        out = Path(args.out) if args.out else _out_dir(None) / "distances.csv"
        _write(out, rep.histogram_csv(), h)
        print(f"{len(rep.distances)} pairwise distances, median {np.median(rep.distances):.4f}; histogram in {out}")
        return EXIT_OK

    if sub == "screen":
        flagged = near_zero_screen(art, threshold=args.threshold, scaled=args.scaled)
        variables = list(dict.fromkeys(e.variable for e in flagged))
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["variable", "category", "max_abs"])
        for e in flagged:
            w.writerow([e.variable, e.category, repr(e.max_abs)])
        if args.out:
            _write(Path(args.out), buf.getvalue(), h)
        print("near-zero variables: " + (", ".join(variables) if variables else "none"))
        return EXIT_OK
    raise UsageError(f"unknown embeddings command {sub!r}")


def _cmd_reuse(args) -> int:
    art = _load_artifact(args.artifact)
    cfg = _load_config(args)
    out = _out_dir(args.out, cfg)
    h = cfg.config_hash()
    _, train, test = load_experiment_data(cfg)
    try:
        etrain = encode_with_artifact(train, art, args.mode)
        etest = encode_with_artifact(test, art, args.mode) if test is not None else None
    except ArtifactError as exc:
        raise UsageError(str(exc)) from None
    fc = cfg.fit_config()
    spec = ModelSpec.for_dataset("mnl", etrain)
    run_log = out / "reuse_runs.csv"
    if run_log.exists():
        run_log.unlink()
    report = fit_multi(spec, etrain, etest, fc, run_log=run_log)
    _write(run_log, run_log.read_text(encoding="utf-8"), h)
    if report.best is None:
        return EXIT_RUNTIME
    summaries = [model_summary(spec, report.results, report.failures, label=f"MNL+embeddings({args.mode})")]
    if cfg.dummy_baseline:
        summaries.append(_dummy_baseline(cfg, train, test, fc))
    _write(out / "reuse_summary.txt", summary_text(summaries) + "\n", h)
    _write(out / "reuse_summary.csv", summary_csv(summaries), h)
    print(summary_text(summaries))
    return EXIT_OK


# ----------------------------------------------------------------------------
# synth


def cmd_synth(args) -> int:
    try:
        cfg = SynthConfig.from_ini(Path(args.config).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"config: {exc}") from None
    except SynthConfigError as exc:
        raise UsageError(str(exc)) from None
    if args.seed is not None:
        cfg.seed = args.seed
    out = _out_dir(args.out)
    paths = write_synth(cfg, out, stem=args.stem)
    for kind, p in paths.items():
        print(f"{kind}: {p}")
    return EXIT_OK


# ----------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="embedmnl",
        description="Multinomial logit with interpretable categorical embeddings.",
        epilog=f"Output directory default: --out, then the config's output, then ${OUT_ENV}.",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0, help="progress on stderr (-vv for debug)")
    sub = p.add_subparsers(dest="command", required=True)

    def run_flags(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="experiment config (INI)")
        sp.add_argument("--seed", type=int, help="base seed; run r uses seed + r")
        sp.add_argument("--runs", type=int, help="number of training runs")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--threads", type=int, help="parallel training runs")

    sp = sub.add_parser("fit", help="estimate a model as described by a config file")
    run_flags(sp)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("eval", help="log-likelihood and probabilities of a fitted model on a dataset")
    sp.add_argument("--model", required=True, help="model.json written by fit")
    sp.add_argument("--data", required=True, help="CSV file")
    sp.add_argument("--schema", help="schema to read the data with (default: the model's own)")
    sp.add_argument("--out", help="probabilities CSV path")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("embeddings", help="embedding artifact tools")
    esub = sp.add_subparsers(dest="emb_command", required=True)
    e = esub.add_parser("export", help="write the embedding artifact of a fitted model")
    e.add_argument("--model", required=True)
    e.add_argument("--out", required=True)
    e = esub.add_parser("distances", help="histogram of pairwise distances between embeddings")
    e.add_argument("--artifact", required=True)
    e.add_argument("--variables", nargs="+", help="restrict to these categorical variables")
    e.add_argument("--bins", type=int, default=20)
    e.add_argument("--unscaled", action="store_true", help="use raw instead of B'-scaled coordinates")
    e.add_argument("--out", help="histogram CSV path")
    e = esub.add_parser("screen", help="flag variables whose embeddings are all near zero")
    e.add_argument("--artifact", required=True)
    e.add_argument("--threshold", type=float, default=0.02)
    e.add_argument("--scaled", action="store_true", help="screen B'-scaled coordinates")
    e.add_argument("--out", help="CSV of flagged categories")
    e = esub.add_parser("reuse", help="encode categories with an artifact and fit a plain MNL")
    e.add_argument("--artifact", required=True)
    e.add_argument("--mode", choices=("shared", "raw", "scaled_sum"), default="shared")
    run_flags(e)
    sp.set_defaults(func=cmd_embeddings)

    sp = sub.add_parser("synth", help="simulate a dataset from known parameters")
    sp.add_argument("--config", required=True, help="generator config (INI)")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", help="output directory")
    sp.add_argument("--stem", default="synth", help="output file name stem")
    sp.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING if args.verbose == 0 else logging.INFO if args.verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        for msg in exc.messages:
            print(f"error: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    except (TrainingDiverged, ArtifactError, OSError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
