"""Command-line front end.

Subcommands: gen-data, fit-ebm, transform, fit-cate, pipeline, mcc.
Exit codes: 0 success, 2 input/config error, 3 numeric/training failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import os
import sys

import numpy as np

from . import evalx
from .cate import BaseSpec, fit_learner
from .config import ExperimentConfig, load_config
from .dgp import Dataset, gen_dgp, load_csv, sample, save_csv
from .ebm import load_model, save_model
from .errors import (
    CateEbmError,
    ConfigError,
    CsvFormatError,
    IllConditionedError,
    ModelFileError,
    TooFewSamplesError,
    TrainingDivergedError,
)
from .nce import TrainConfig, train_ebm
from .numerics import make_rng, random_orthogonal

_FLOAT_FMT = "%.17g"

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3


def _train_config(cfg: ExperimentConfig, init_seed=None) -> TrainConfig:
    return TrainConfig(
        k=cfg.k, b=cfg.b, rho=cfg.rho, hidden=cfg.hidden, epochs=cfg.epochs,
        batch_size=cfg.batch_size, lr=cfg.lr, seed=cfg.seed,
        init_seed=init_seed, patience=cfg.patience,
    )


def _fixed_b(cfg: ExperimentConfig):
    # B is frozen by its own seed so every run of an experiment shares it
    return random_orthogonal(cfg.k, make_rng(cfg.b_seed))


def _base_spec(cfg: ExperimentConfig) -> BaseSpec:
    return BaseSpec(kind=cfg.base_kind, lam=cfg.base_lam, cv=cfg.base_cv)


def _exp_dir(cfg: ExperimentConfig) -> str:
    path = os.path.join(cfg.out_dir, f"exp-{cfg.fingerprint()}")
    os.makedirs(path, exist_ok=True)
    return path


def _write_repr(path, z) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(f"z{i}" for i in range(z.shape[1])) + "\n")
        for row in z:
            fh.write(",".join(_FLOAT_FMT % v for v in row) + "\n")


def _read_repr(path) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    if not header or not header[0].startswith("z"):
        raise CsvFormatError(f"{path}: not a representation file (header {header[:3]})")
    return np.array([[float(c) for c in row] for row in rows])


def _write_history(path, history) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("epoch,train_loss,val_loss\n")
        for epoch, tr, va in history:
            fh.write(f"{epoch},{_FLOAT_FMT % tr},{_FLOAT_FMT % va}\n")


def cmd_gen_data(cfg: ExperimentConfig, out_dir: str) -> int:
    dgp = gen_dgp(cfg.seed, cfg.d)
    train = sample(dgp, cfg.n, cfg.seed + 1)
    test = sample(dgp, cfg.test_size, cfg.seed + 2)
    save_csv(train, os.path.join(out_dir, "train.csv"))
    save_csv(test, os.path.join(out_dir, "test.csv"))
    print(f"wrote train.csv ({train.n} rows) and test.csv ({test.n} rows) to {out_dir}")
    return EXIT_OK


def cmd_fit_ebm(cfg: ExperimentConfig, train_path: str, out_dir: str,
                init_seed=None, tag: str = "") -> int:
    ds = load_csv(train_path)
    model = train_ebm(ds.x, _train_config(cfg, init_seed=init_seed),
                      b_matrix=_fixed_b(cfg))
    name = f"model{tag}.preb"
    save_model(model, os.path.join(out_dir, name))
    _write_history(os.path.join(out_dir, f"train_log{tag}.csv"), model.history)
    print(f"final validation loss: {model.best_val_loss:.6f} "
          f"(best epoch {model.best_epoch}); wrote {name}")
    return EXIT_OK


def cmd_transform(model_path: str, data_path: str, out_path: str) -> int:
    model = load_model(model_path)
    ds = load_csv(data_path)
    if ds.d != model.d:
        raise ConfigError(f"model expects d={model.d}, data has d={ds.d}")
    _write_repr(out_path, model.represent(ds.x))
    print(f"wrote {out_path}")
    return EXIT_OK


def cmd_fit_cate(cfg: ExperimentConfig, data_path: str, out_dir: str,
                 features_path=None) -> int:
    ds = load_csv(data_path)
    feats = _read_repr(features_path) if features_path else ds.x
    if feats.shape[0] != ds.n:
        raise ConfigError(
            f"feature rows ({feats.shape[0]}) != dataset rows ({ds.n})"
        )
    fit_ds = Dataset(x=feats, a=ds.a, y=ds.y)
    spec = _base_spec(cfg)
    for kind in cfg.learners:
        model = fit_learner(kind, fit_ds, spec, split_seed=cfg.seed)
        tau_hat = model.predict(feats)
        path = os.path.join(out_dir, f"predictions_{kind}.csv")
        with open(path, "w", newline="") as fh:
            fh.write("row,tau_hat\n")
            for i, v in enumerate(tau_hat):
                fh.write(f"{i},{_FLOAT_FMT % v}\n")
        print(f"{kind}-learner: wrote {path} (mean tau_hat {tau_hat.mean():.4f})")
    return EXIT_OK


def cmd_mcc(model_paths, data_path: str, out_dir=None) -> int:
    if len(model_paths) < 2:
        raise ConfigError("mcc needs at least 2 models")
    models = [load_model(p) for p in model_paths]
    first = models[0].fingerprint
    for p, m in zip(model_paths[1:], models[1:]):
        if not first.compatible_with(m.fingerprint):
            raise ConfigError(
                f"model {p} has a different d/k/B fingerprint; "
                "correlations across different B are not comparable"
            )
    ds = load_csv(data_path)
    reps = [m.represent(ds.x) for m in models]
    pairs = []
    for i in range(len(reps)):
        for j in range(i + 1, len(reps)):
            pairs.append((i, j, evalx.mcc(reps[i], reps[j])))
    vals = np.array([v for _, _, v in pairs])
    for i, j, v in pairs:
        print(f"mcc(model{i}, model{j}) = {v:.6f}")
    print(f"mean mcc = {vals.mean():.6f} +- {vals.std():.6f}")
    if out_dir:
        evalx.write_table(os.path.join(out_dir, "mcc.csv"),
                          ["model_i", "model_j", "mcc"], pairs)
    return EXIT_OK


def cmd_pipeline(cfg: ExperimentConfig, with_mcc: bool = False) -> int:
    out_dir = _exp_dir(cfg)
    stage = "gen-data"
    try:
        cmd_gen_data(cfg, out_dir)
        train = load_csv(os.path.join(out_dir, "train.csv"))
        test = load_csv(os.path.join(out_dir, "test.csv"))

        stage = "fit-ebm"
        models = []
        b_matrix = _fixed_b(cfg)
        for r in range(cfg.runs):
            model = train_ebm(train.x, _train_config(cfg, init_seed=cfg.seed + 101 * (r + 1)),
                              b_matrix=b_matrix)
            save_model(model, os.path.join(out_dir, f"model_run{r}.preb"))
            _write_history(os.path.join(out_dir, f"train_log_run{r}.csv"), model.history)
            models.append(model)

        stage = "transform"
        reps_train = [m.represent(train.x) for m in models]
        reps_test = [m.represent(test.x) for m in models]
        for r, (zt, zs) in enumerate(zip(reps_train, reps_test)):
            _write_repr(os.path.join(out_dir, f"repr_train_run{r}.csv"), zt)
            _write_repr(os.path.join(out_dir, f"repr_test_run{r}.csv"), zs)

        stage = "fit-cate"
        spec = _base_spec(cfg)
        rows = []
        for kind in cfg.learners:
            raw_model = fit_learner(kind, train, spec, split_seed=cfg.seed)
            raw_pehe = evalx.pehe(raw_model.predict(test.x), test.tau)
            ebm_vals = []
            for zt, zs in zip(reps_train, reps_test):
                rep_ds = Dataset(x=zt, a=train.a, y=train.y)
                rep_model = fit_learner(kind, rep_ds, spec, split_seed=cfg.seed)
                ebm_vals.append(evalx.pehe(rep_model.predict(zs), test.tau))
            ebm_vals = np.array(ebm_vals)
            rows.append([kind, "raw", float(raw_pehe), 0.0, float(np.sqrt(raw_pehe))])
            rows.append([kind, "ebm", float(ebm_vals.mean()), float(ebm_vals.std()),
                         float(np.mean(np.sqrt(ebm_vals)))])

        stage = "report"
        evalx.write_table(
            os.path.join(out_dir, "pehe_report.csv"),
            ["learner", "features", "pehe_sq_mean", "pehe_sq_std", "pehe_root_mean"],
            rows,
        )
        print(f"report: {os.path.join(out_dir, 'pehe_report.csv')}")
        for row in rows:
            print(f"  {row[0]:>3} {row[1]:>4}  pehe_sq={row[2]:.4f} +- {row[3]:.4f}")

        if with_mcc:
            pairs = []
            for i in range(len(reps_test)):
                for j in range(i + 1, len(reps_test)):
                    pairs.append((i, j, evalx.mcc(reps_test[i], reps_test[j])))
            evalx.write_table(os.path.join(out_dir, "mcc.csv"),
                              ["run_i", "run_j", "mcc"], pairs)
            vals = np.array([v for _, _, v in pairs])
            print(f"mcc over runs: {vals.mean():.4f} +- {vals.std():.4f}")
        return EXIT_OK
    except CateEbmError as exc:
        raise CateEbmError(f"pipeline stage {stage!r} failed (seed {cfg.seed}): {exc}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cate-ebm",
        description="Low-dimensional covariate representations for CATE estimation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="path to a sectioned key-value config file")
        p.add_argument("--preset", help="named hyperparameter preset")
        p.add_argument("--seed", type=int, help="override the experiment seed")
        p.add_argument("--out", help="output directory")

    p = sub.add_parser("gen-data", help="write seeded train/test CSVs")
    common(p)

    p = sub.add_parser("fit-ebm", help="train the representation model")
    common(p)
    p.add_argument("--train", required=True, help="training CSV")
    p.add_argument("--init-seed", type=int, default=None)

    p = sub.add_parser("transform", help="write standardized representations")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="output representation CSV")

    p = sub.add_parser("fit-cate", help="fit learners and write predictions")
    common(p)
    p.add_argument("--data", required=True, help="dataset CSV with a and y")
    p.add_argument("--features", default=None,
                   help="optional representation CSV; defaults to raw covariates")

    p = sub.add_parser("pipeline", help="end-to-end experiment")
    common(p)
    p.add_argument("--mcc", action="store_true", help="also emit the MCC table")

    p = sub.add_parser("mcc", help="pairwise representation correlation")
    p.add_argument("--models", nargs="+", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "transform":
            return cmd_transform(args.model, args.data, args.out)
        if args.command == "mcc":
            return cmd_mcc(args.models, args.data, args.out)

        cfg = load_config(path=args.config, preset=args.preset,
                          seed_override=args.seed,
                          out_override=getattr(args, "out", None))
        if args.command == "gen-data":
            out = args.out or _exp_dir(cfg)
            os.makedirs(out, exist_ok=True)
            return cmd_gen_data(cfg, out)
        if args.command == "fit-ebm":
            out = args.out or _exp_dir(cfg)
            os.makedirs(out, exist_ok=True)
            return cmd_fit_ebm(cfg, args.train, out, init_seed=args.init_seed)
        if args.command == "fit-cate":
            out = args.out or _exp_dir(cfg)
            os.makedirs(out, exist_ok=True)
            return cmd_fit_cate(cfg, args.data, out, features_path=args.features)
        if args.command == "pipeline":
            return cmd_pipeline(cfg, with_mcc=args.mcc)
        raise ConfigError(f"unknown command {args.command!r}")
    except (ConfigError, CsvFormatError, ModelFileError, TooFewSamplesError,
            FileNotFoundError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (TrainingDivergedError, IllConditionedError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except CateEbmError as exc:
        # pipeline wraps stage failures; classify by the root cause
        cause = exc.__cause__
        if isinstance(cause, (TrainingDivergedError, IllConditionedError)):
            print(f"numeric failure: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
