#!/usr/bin/env python
#
# pivotal - train classifiers that are pivotal with respect to a nuisance
#           parameter, and report on them.
#
# It is licensed under a liberal MIT/X11 style license;
# see the file "LICENSE" in this directory for details.

"""Command-line front-end to the pivot library.

Subcommands: generate (datasets), train (one run directory), sweep (many
runs over lambda and seeds) and report (figures and summaries).  Every
flag has a config-file key; flags override the file, which overrides the
built-in defaults."""

import argparse
import logging
import os
import sys

from tqdm import tqdm

import pivot
from pivot.config import Config
from pivot.datagen import SurrogateSpec, ToySpec, write_dataset
from pivot.errors import (ConfigurationError, DatasetParseError,
                          EvaluationError, ManifestError, NumericalError,
                          RejectedInputError, ReportError, SchemaError,
                          TrainingError)
from pivot.manifest import RunManifest, dataset_manifest_path, generator_record
from pivot.pipeline import make_report, run_training
from pivot.progress import NullProgressBar, ProgressCallback
from pivot.sweep import read_summary, run_sweep

log = logging.getLogger("pivotal")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_TRAINING = 4
EXIT_EVALUATION = 5
EXIT_CONFIG = 6


#
# progress bar for the library's callbacks
#
class TqdmProgressBar(object):
    """Terminal progress bar with the NullProgressBar interface."""
    def __init__(self, title, msg, max=100):
        self._bar = tqdm(total=max, desc=title, leave=False,
                         bar_format="{desc}: {percentage:3.0f}%|{bar}| "
                                    "{elapsed}<{remaining}")
        self._shown = 0
    def update(self, percent, msg=None):
        step = int(percent) - self._shown
        if step > 0:
            self._bar.update(step)
            self._shown += step
        if msg:
            self._bar.set_postfix_str(msg)
        return True
    def done(self, error=None):
        self._bar.close()
        if error is not None:
            log.error(error)


def progress_factory(bar):
    def make(title):
        return ProgressCallback(title, "", bar)
    return make


#
# argument types
#
def positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("%r is not an integer" % text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer, got %d"
                                         % value)
    return value


def non_negative_float(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("%r is not a number" % text)
    if not value >= 0.0:
        raise argparse.ArgumentTypeError("must be >= 0, got %r" % text)
    return value


def float_list(text):
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("%r is not a list of numbers" % text)
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


# flag dest -> config key, for the flags shared by train and sweep
TRAIN_FLAGS = [
    ("--lambda", "lam", non_negative_float, "adversarial weight lambda"),
    ("--M", "minibatch_size", positive_int, "minibatch size"),
    ("--K", "adversary_steps", positive_int,
     "adversary steps per classifier step"),
    ("--T", "iterations", positive_int, "outer iterations"),
    ("--pretrain-epochs", "pretrain_epochs", int, "classifier pretraining epochs"),
    ("--patience", "pretrain_patience", int,
     "stop pretraining after this many epochs without improvement (0: never)"),
    ("--classifier-lr", "classifier_lr", float, None),
    ("--adversary-lr", "adversary_lr", float, None),
    ("--optimizer", "optimizer", str, "sgd or adam"),
    ("--seed", "seed", int, None),
    ("--conditional-y", "conditional_on_y", int,
     "show the adversary only samples with this label"),
    ("--nominal-z", "nominal_z", float,
     "train the classifier only on samples with this nuisance value"),
    ("--adversary-kind", "adversary_kind", str, "mixture:C or categorical:n"),
    ("--classifier-layers", "classifier_layers", str, "hidden sizes, e.g. 20,20"),
    ("--classifier-activations", "classifier_activations", str,
     "hidden activations, e.g. tanh,relu"),
    ("--adversary-layers", "adversary_layers", str, None),
    ("--adversary-activations", "adversary_activations", str, None),
    ("--eval-fraction", "eval_fraction", float, "held-out fraction"),
    ("--checkpoint-every", "checkpoint_every", positive_int, None),
    ("--snapshot-every", "snapshot_every", int, None),
    ("--density-samples", "density_samples", positive_int,
     "samples per nuisance value for the score densities"),
    ("--entropy-samples", "entropy_samples", positive_int,
     "Monte Carlo samples for H(Y|X)"),
]

GENERATE_FLAGS = [
    ("--n", "n", positive_int, "number of samples"),
    ("--seed", "seed", int, None),
    ("--sigma", "z_prior_sigma", float, "toy: stddev of the nuisance prior"),
    ("--pileup-shift", "pileup_shift", float, "surrogate: pileup feature shift"),
    ("--pileup-noise", "pileup_noise", float, "surrogate: pileup noise scale"),
    ("--n-features", "n_features", positive_int, "surrogate: feature count"),
    ("--signal-fraction", "signal_fraction", float, None),
    ("--s-total", "s_total", float, "surrogate: summed signal weight"),
    ("--b-total", "b_total", float, "surrogate: summed background weight"),
]


def _add_flags(parser, flags):
    parser.add_argument("--config", default=None,
                        help="key = value file read before the flags")
    for flag, key, kind, text in flags:
        parser.add_argument(flag, dest=key, type=kind, default=None, help=text)


def _overrides(args, flags):
    return dict((key, getattr(args, key)) for _, key, _, _ in flags)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pivotal",
        description="Adversarial training of pivotal classifiers.")
    parser.add_argument("--version", action="version",
                        version="%(prog)s " + pivot.__version__)
    noise = parser.add_mutually_exclusive_group()
    noise.add_argument("-v", "--verbose", action="store_true",
                       help="log per-iteration detail")
    noise.add_argument("-q", "--quiet", action="store_true",
                       help="warnings only, no progress bars")
    commands = parser.add_subparsers(dest="command")
    commands.required = True

    gen = commands.add_parser("generate", help="write a synthetic dataset")
    gen.add_argument("kind", choices=("toy", "surrogate"))
    gen.add_argument("--out", required=True, help="dataset file to write")
    _add_flags(gen, GENERATE_FLAGS)
    gen.set_defaults(handler=cmd_generate)

    train = commands.add_parser("train", help="pretrain and train one classifier")
    train.add_argument("dataset")
    train.add_argument("--plain", action="store_true",
                       help="train on the classification loss alone")
    train.add_argument("--out", default=None,
                       help="run directory (default: under the run dir)")
    train.add_argument("--run-dir", dest="run_dir", default=None,
                       help="parent of run directories (default $%s or ./runs)"
                       % "PIVOT_RUN_DIR")
    train.add_argument("--test-dataset", default=None,
                       help="weighted dataset for the AMS evaluation")
    _add_flags(train, TRAIN_FLAGS)
    train.set_defaults(handler=cmd_train)

    sweep = commands.add_parser("sweep", help="repeat training over lambdas")
    sweep.add_argument("dataset")
    sweep.add_argument("--lambdas", type=float_list, default=[0.0, 1.0, 10.0, 500.0],
                       help="comma-separated lambda values")
    sweep.add_argument("--repeats", type=positive_int, default=5)
    sweep.add_argument("--jobs", type=positive_int, default=1,
                       help="members trained in parallel")
    sweep.add_argument("--include-nominal", action="store_true",
                       help="add lambda=0 runs trained at z=0 only")
    sweep.add_argument("--test-dataset", default=None)
    sweep.add_argument("--out", default=None, help="sweep directory")
    sweep.add_argument("--run-dir", dest="run_dir", default=None)
    _add_flags(sweep, TRAIN_FLAGS)
    sweep.set_defaults(handler=cmd_sweep)

    report = commands.add_parser("report", help="figures and summaries")
    report.add_argument("runs", nargs="+", help="run or sweep directories")
    report.set_defaults(handler=cmd_report)
    return parser


def load_config(args, flags):
    cfg = Config(args.config)
    cfg.update(_overrides(args, flags))
    if getattr(args, "run_dir", None):
        cfg.run_dir = args.run_dir
    return cfg


#
# commands
#
def cmd_generate(args, progress):
    cfg = load_config(args, GENERATE_FLAGS)
    if args.kind == "toy":
        spec = ToySpec(n=cfg["n"], z_prior_sigma=cfg["z_prior_sigma"],
                       seed=cfg["seed"])
    else:
        spec = SurrogateSpec(n=cfg["n"], pileup_shift=cfg["pileup_shift"],
                             pileup_noise=cfg["pileup_noise"], seed=cfg["seed"],
                             n_features=cfg["n_features"],
                             affected_features=cfg["affected_features"],
                             signal_fraction=cfg["signal_fraction"],
                             s_total=cfg["s_total"], b_total=cfg["b_total"])
    manifest = RunManifest("generate " + args.kind, cfg.as_dict())
    with manifest.timed("generate"):
        data = spec.generate()
        write_dataset(data, args.out)
    manifest.add_dataset(args.out)
    manifest.extra["generator"] = generator_record(spec)
    manifest.write(dataset_manifest_path(args.out))
    log.info("wrote %d samples to %s", len(data), args.out)
    return EXIT_OK


def _run_name(cfg, plain):
    tc = cfg.train_config()
    if plain:
        return "plain-seed%d" % tc.seed
    return "lam%g-seed%d" % (tc.lam, tc.seed)


def cmd_train(args, progress):
    cfg = load_config(args, TRAIN_FLAGS)
    out = args.out or os.path.join(cfg.run_dir, _run_name(cfg, args.plain))
    headline = run_training(args.dataset, cfg, out, plain=args.plain,
                            command="train", test_dataset=args.test_dataset,
                            progress=progress)
    for key in sorted(headline):
        log.info("%s = %s", key, headline[key])
    return EXIT_OK


def cmd_sweep(args, progress):
    cfg = load_config(args, TRAIN_FLAGS)
    out = args.out or os.path.join(cfg.run_dir, "sweep-seed%d" % cfg["seed"])
    rows, summary = run_sweep(args.dataset, cfg, args.lambdas, args.repeats,
                              out, jobs=args.jobs,
                              include_nominal=args.include_nominal,
                              test_dataset=args.test_dataset,
                              progress=progress("sweep"))
    failures = sum(1 for row in rows if row["status"] != "ok")
    if failures:
        log.warning("%d of %d sweep members failed; see %s", failures,
                    len(rows), os.path.join(out, "sweep.csv"))
    for row in summary:
        log.info("lambda %g%s: best_ams %s +- %s, max_ks %s +- %s",
                 row["lam"], " (nominal)" if row["nominal"] else "",
                 row["best_ams_mean"], row["best_ams_std"],
                 row["max_ks_mean"], row["max_ks_std"])
    return EXIT_OK


def cmd_report(args, progress):
    from pivot import plots
    for run in args.runs:
        summary = os.path.join(run, "sweep_summary.csv")
        if os.path.exists(summary):
            plots.plot_sweep(read_summary(summary),
                             os.path.join(run, "sweep_ams.svg"))
            print("sweep %s: %s" % (run, os.path.join(run, "sweep_ams.svg")))
            continue
        for line in make_report(run):
            print(line)
    return EXIT_OK


#
# main
#
def exit_code(error):
    """Map a failure to the documented exit codes."""
    if isinstance(error, (TrainingError, NumericalError)):
        return EXIT_TRAINING
    if isinstance(error, EvaluationError):
        return EXIT_EVALUATION
    if isinstance(error, (DatasetParseError, SchemaError, ManifestError,
                          ReportError, OSError)):
        return EXIT_IO
    if isinstance(error, (ConfigurationError, RejectedInputError)):
        return EXIT_CONFIG
    raise error


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.INFO
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    logging.basicConfig(level=level,
                        format="%(levelname)s %(name)s: %(message)s")
    bar = NullProgressBar if args.quiet else TqdmProgressBar
    try:
        return args.handler(args, progress_factory(bar))
    except (pivot.PivotError, OSError) as e:
        log.error("%s", e)
        return exit_code(e)


if __name__ == '__main__':
    sys.exit(main())
