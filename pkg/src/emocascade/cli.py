"""``emocascade`` command line.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .cascade import train_cascade, train_flat
from .config import load_run_config
from .corpus import SynthSpec, generate_synthetic_corpus, read_wav
from .dataset import (
    features_from_manifest,
    format_features_csv,
    is_features_csv,
    read_features_csv,
)
from .evaluation import compare, evaluate, stratified_split
from .exceptions import ConfigMismatch, EmoCascadeError
from .mfcc import utterance_features
from .persistence import ModelFile, atomic_write_text, load_model, save_model

logger = logging.getLogger("emocascade")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# ---------------------------------------------------------------------------
# argument groups


def _common(p):
    p.add_argument("--config", help="JSON run configuration file")
    p.add_argument("--seed", type=int, help="run seed (splits and learners)")
    p.add_argument("--out", help="output path")
    p.add_argument("-v", "--verbose", action="store_true")


def _mfcc_flags(p):
    g = p.add_argument_group("MFCC")
    g.add_argument("--frame-len-ms", type=float)
    g.add_argument("--hop-ms", type=float)
    g.add_argument("--n-mels", type=int)
    g.add_argument("--n-coeffs", type=int)
    g.add_argument("--exclude-c0", action="store_const", const=False, dest="include_c0")


def _learner_flags(p):
    g = p.add_argument_group("learner")
    g.add_argument("--mode", choices=["cascade", "flat"])
    g.add_argument("--learner", choices=["tree", "forest", "svm"])
    g.add_argument("--n-trees", type=int)
    g.add_argument("--max-depth", type=int)


def _split_flags(p):
    g = p.add_argument_group("split")
    g.add_argument("--test-fraction", type=float)
    g.add_argument("--split-mode", choices=["random", "leave-one-speaker-out"])
    g.add_argument("--holdout-speaker")
    g.add_argument("--exclude", action="append", metavar="LABEL",
                   help="leave a class out of the macro accuracy (repeatable)")


def build_parser():
    parser = _Parser(prog="emocascade", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"emocascade {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate the synthetic labeled corpus")
    _common(p)
    p.add_argument("--per-class", type=int, default=100)
    p.add_argument("--duration", type=float, default=1.0)
    p.add_argument("--sample-rate", type=int, default=16000)

    p = sub.add_parser("features", help="extract pooled MFCC features from a manifest")
    p.add_argument("manifest")
    _common(p)
    _mfcc_flags(p)
    p.add_argument("--skip-errors", action="store_true")

    p = sub.add_parser("train", help="train a cascade or flat model")
    p.add_argument("input", help="manifest CSV or feature CSV")
    _common(p)
    _mfcc_flags(p)
    _learner_flags(p)
    p.add_argument("--skip-errors", action="store_true")

    p = sub.add_parser("predict", help="predict emotions for a WAV file or feature CSV")
    p.add_argument("model")
    p.add_argument("input", help="WAV file or feature CSV")
    _common(p)
    _mfcc_flags(p)

    for name, text in (("evaluate", "split, train a cascade, write stage and end-to-end reports"),
                       ("compare", "split, train cascade and flat models, write a comparison report")):
        p = sub.add_parser(name, help=text)
        p.add_argument("input", help="manifest CSV or feature CSV")
        _common(p)
        _mfcc_flags(p)
        _learner_flags(p)
        _split_flags(p)
        p.add_argument("--skip-errors", action="store_true")
    return parser


# ---------------------------------------------------------------------------
# helpers


def _run_config(args):
    def pick(*names):
        return {n: getattr(args, n) for n in names if getattr(args, n, None) is not None}

    learner_params = pick("n_trees", "max_depth")
    split = pick("test_fraction", "holdout_speaker")
    if getattr(args, "split_mode", None):
        split["mode"] = args.split_mode
    overrides = {
        "mfcc": pick("frame_len_ms", "hop_ms", "n_mels", "n_coeffs", "include_c0"),
        "learner": getattr(args, "learner", None),
        "learner_params": learner_params,
        "split": split,
        "mode": getattr(args, "mode", None),
        "seed": args.seed,
        "exclude": getattr(args, "exclude", None),
    }
    try:
        return load_run_config(args.config, overrides)
    except EmoCascadeError:
        raise
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid configuration: {exc}") from exc


def _load_table(path, cfg, skip_errors=False):
    mfcc = cfg.mfcc_config()
    if is_features_csv(path):
        table = read_features_csv(path)
        if table.X.shape[1] != mfcc.n_features:
            raise ConfigMismatch(f"{path} has {table.X.shape[1]} features; config produces {mfcc.n_features}")
        return table
    table = features_from_manifest(path, mfcc, skip_errors)
    for skipped_path, reason in table.skipped:
        print(f"skipped {skipped_path}: {reason}", file=sys.stderr)
    return table


def _fit(cfg, X, y):
    fingerprint = cfg.mfcc_config().fingerprint(X.shape[1])
    params = cfg.resolved_learner_params()
    if cfg.mode == "cascade":
        return train_cascade(X, y, cfg.learner, params, fingerprint=fingerprint)
    return train_flat(X, y, cfg.learner, params, fingerprint=fingerprint)


def _emit(text, out):
    if out:
        atomic_write_text(out, text)
    else:
        sys.stdout.write(text)


def _split(cfg, table):
    train_idx, test_idx = stratified_split(table.labels, cfg.split_spec(), table.speakers)
    return table.subset(train_idx), table.subset(test_idx)


def _write_reports(out_dir, report, matrices):
    out = Path(out_dir)
    atomic_write_text(out / "report.json", report.to_json())
    atomic_write_text(out / "report.txt", report.render_text())
    for name, cm in matrices.items():
        atomic_write_text(out / f"confusion_{name}.csv", cm.to_csv())


# ---------------------------------------------------------------------------
# commands


def cmd_synth(args):
    kwargs = {"utterances_per_class": args.per_class, "duration_s": args.duration,
              "sample_rate_hz": args.sample_rate}
    if args.seed is not None:
        kwargs["seed"] = args.seed
    manifest = generate_synthetic_corpus(SynthSpec(**kwargs), args.out or "synthetic_corpus")
    print(manifest)


def cmd_features(args):
    cfg = _run_config(args)
    table = _load_table(args.manifest, cfg, args.skip_errors)
    _emit(format_features_csv(table), args.out)


def cmd_train(args):
    cfg = _run_config(args)
    table = _load_table(args.input, cfg, args.skip_errors)
    model = _fit(cfg, table.X, table.labels)
    mf = ModelFile(model=model, mfcc_config=cfg.mfcc_config(), mode=cfg.mode,
                   seeds={"seed": cfg.seed, "learner_params": cfg.resolved_learner_params()})
    save_model(args.out or "model.json", mf)
    logger.info("wrote %s model to %s", cfg.mode, args.out or "model.json")


def _prediction_record(mf, x, source):
    if mf.mode == "cascade":
        record = {"input": source, **mf.model.predict_one(x, mf.feature_fingerprint).to_dict()}
    else:
        scores = mf.model.predict_proba(x[None, :])[0]
        record = {"input": source, "label": str(mf.model.predict(x[None, :])[0]),
                  "scores": {str(c): float(s) for c, s in zip(mf.model.classes_, scores)}}
    return record


def cmd_predict(args):
    cfg = _run_config(args)
    mf = load_model(args.model)
    mfcc = cfg.mfcc_config()
    mf.check_fingerprint(mfcc, mf.model.n_features_in_)
    if is_features_csv(args.input):
        table = read_features_csv(args.input)
        records = [_prediction_record(mf, x, p) for p, x in zip(table.paths, table.X)]
        payload = records
    else:
        x = utterance_features(read_wav(args.input), mfcc)
        payload = _prediction_record(mf, x, args.input)
    _emit(json.dumps(payload, indent=2) + "\n", args.out)


def cmd_evaluate(args):
    cfg = _run_config(args)
    cfg.mode = "cascade"
    table = _load_table(args.input, cfg, args.skip_errors)
    train, test = _split(cfg, table)
    model = _fit(cfg, train.X, train.labels)
    report = evaluate(model, test.X, test.labels, cfg.exclude, cfg.echo())
    _write_reports(args.out or "evaluation", report, {"cascade": report.confusion})
    sys.stdout.write(report.render_text())


def cmd_compare(args):
    cfg = _run_config(args)
    table = _load_table(args.input, cfg, args.skip_errors)
    train, test = _split(cfg, table)
    cfg.mode = "cascade"
    cascade = _fit(cfg, train.X, train.labels)
    cfg.mode = "flat"
    flat = _fit(cfg, train.X, train.labels)
    cfg.mode = "cascade"
    report = compare(cascade, flat, test.X, test.labels, cfg.exclude, cfg.echo())
    _write_reports(args.out or "comparison", report, {"cascade": report.cascade, "flat": report.flat})
    sys.stdout.write(report.render_text())


COMMANDS = {
    "synth": cmd_synth,
    "features": cmd_features,
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "compare": cmd_compare,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"emocascade: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"emocascade: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EmoCascadeError as exc:
        print(f"emocascade: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        logger.exception("internal error")
        print(f"emocascade: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
