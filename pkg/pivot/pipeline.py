# Part of the pivotal adversarial training library (pivot)
#
# It is licensed under a liberal MIT/X11 style license;
# see the file "LICENSE" in this directory for details.

"""Complete runs: a dataset file in, a run directory out.

A run directory holds manifest.json, config.txt, checkpoints/,
metrics.csv, snapshots.csv and report/.  make_report turns a run
directory into figures and a text summary."""

from __future__ import annotations

import logging
import os

import numpy as np

from pivot import adversary, evaluation, nn, plots
from pivot.datagen import SurrogateSpec, ToySpec, read_dataset
from pivot.errors import ConfigurationError, ReportError, TrainingError
from pivot.manifest import MANIFEST_NAME, RunManifest, dataset_generator
from pivot.train import (RunMetrics, adversarial_train, build_classifier,
                         pretrain_classifier, split_holdout, train_classifier)

log = logging.getLogger(__name__)

CONFIG_NAME = "config.txt"
CHECKPOINT_DIR = "checkpoints"
REPORT_DIR = "report"
METRICS_NAME = "metrics.csv"
SNAPSHOTS_NAME = "snapshots.csv"
REPORT_NAME = "report.txt"


def load_dataset(path):
    data = read_dataset(path)
    if len(data) == 0:
        raise ConfigurationError("dataset %s has no samples" % path)
    return data


def build_players(n_features, cfg):
    """Freshly initialized classifier and adversary for a Config."""
    tc = cfg.train_config()
    hidden, acts = cfg.classifier_architecture
    f = build_classifier(n_features, hidden, acts, seed=tc.seed)
    hidden, acts = cfg.adversary_architecture
    r = adversary.build_adversary(tc.adversary_kind, hidden, acts,
                                  seed=tc.seed + 1)
    return f, r


def nuisance_grid(generator):
    """z values the pivotality densities are compared at."""
    if isinstance(generator, ToySpec):
        s = generator.z_prior_sigma
        return (-s, 0.0, s)
    return (0.0, 1.0)


def nuisance_entropy(generator, z):
    """H(Z) from the generator when known, else from the observed z."""
    if isinstance(generator, ToySpec):
        return evaluation.entropy_gaussian(generator.z_prior_sigma)
    values, counts = np.unique(z, return_counts=True)
    if isinstance(generator, SurrogateSpec) or \
            values.size <= evaluation.MAX_DISCRETE_VALUES:
        return adversary.categorical_entropy(counts / float(counts.sum()))
    return evaluation.entropy_gaussian(float(np.std(z)))


def ams_test_set(data, held, test=None):
    """The samples the AMS scan runs on, or None when it cannot run.

    An explicit test set is used as it is.  Otherwise the held-out split
    is rescaled per class so its weights sum to the full dataset's
    totals."""
    samples = held if test is None else test
    if not (np.any(samples.y == 1) and np.any(samples.y == 0)):
        return None
    if test is not None:
        return test
    return held.with_class_totals(*data.class_totals())


def run_training(dataset_path, cfg, run_dir, plain=False, command="train",
                 test_dataset=None, progress=None):
    """Pretrain, then train adversarially (or plainly), then evaluate.

    progress, when given, is called as progress(title) and returns a
    ProgressCallback for each phase.  Returns the headline numbers that
    also go to report/report.txt."""
    run_dir = str(run_dir)
    ckpt_dir = os.path.join(run_dir, CHECKPOINT_DIR)
    report_dir = os.path.join(run_dir, REPORT_DIR)
    for path in (run_dir, ckpt_dir, report_dir):
        if not os.path.isdir(path):
            os.makedirs(path)
    tc = cfg.train_config()
    manifest = RunManifest(command, cfg.as_dict())
    manifest.add_dataset(dataset_path)
    manifest.extra.update({"plain": bool(plain),
                           "conditional_on_y": tc.conditional_on_y,
                           "nominal_z": tc.nominal_z,
                           "lam": tc.lam})
    cfg.write(os.path.join(run_dir, CONFIG_NAME))
    progress = progress or (lambda title: None)

    data = load_dataset(dataset_path)
    f, r = build_players(data.n_features, cfg)
    metrics = None
    try:
        with manifest.timed("pretrain"):
            f = pretrain_classifier(f, data, tc, progress("pretraining"))
        nn.save_checkpoint(f, os.path.join(ckpt_dir, "f_pretrained.ckpt"))
        manifest.checkpoints["f_pretrained"] = os.path.join(
            CHECKPOINT_DIR, "f_pretrained.ckpt")
        if plain:
            with manifest.timed("train"):
                f = train_classifier(f, data, tc, progress("training"))
        else:
            with manifest.timed("train"):
                f, r, metrics = adversarial_train(f, r, data, tc,
                                                  progress("adversarial"),
                                                  checkpoint_dir=ckpt_dir)
    except TrainingError as e:
        manifest.extra["status"] = "failed"
        manifest.extra["error"] = str(e)
        _record_checkpoints(manifest, run_dir)
        manifest.write(os.path.join(run_dir, MANIFEST_NAME))
        raise

    nn.save_checkpoint(f, os.path.join(ckpt_dir, "f_final.ckpt"))
    if not plain:
        nn.save_checkpoint(r, os.path.join(ckpt_dir, "r_final.ckpt"),
                           head=str(tc.adversary_kind))
        metrics.write_csv(os.path.join(run_dir, METRICS_NAME))
        metrics.write_snapshots_csv(os.path.join(run_dir, SNAPSHOTS_NAME))
        manifest.metrics["metrics"] = METRICS_NAME
        manifest.metrics["snapshots"] = SNAPSHOTS_NAME
    _record_checkpoints(manifest, run_dir)

    with manifest.timed("evaluate"):
        headline = evaluate_run(f, data, dataset_path, cfg, report_dir,
                                manifest, test_dataset)
    if metrics is not None:
        headline["loss_f"] = metrics.records[-1].loss_f
        headline["loss_r"] = metrics.records[-1].loss_r
    headline.update({"lam": tc.lam, "plain": bool(plain),
                     "conditional_on_y": tc.conditional_on_y})
    evaluation.write_report(headline, os.path.join(report_dir, REPORT_NAME))
    manifest.metrics["report"] = os.path.join(REPORT_DIR, REPORT_NAME)
    manifest.extra["status"] = "ok"
    manifest.write(os.path.join(run_dir, MANIFEST_NAME))
    log.info("run written to %s", run_dir)
    return headline


def _record_checkpoints(manifest, run_dir):
    ckpt_dir = os.path.join(run_dir, CHECKPOINT_DIR)
    for name in sorted(os.listdir(ckpt_dir)):
        if name.endswith(".ckpt"):
            manifest.checkpoints[name[:-len(".ckpt")]] = os.path.join(
                CHECKPOINT_DIR, name)


def evaluate_run(f, data, dataset_path, cfg, report_dir, manifest,
                 test_dataset=None):
    """Write the report CSVs for a trained classifier; returns headlines."""
    tc = cfg.train_config()
    _, held = split_holdout(data, tc.eval_fraction, tc.seed)
    generator = dataset_generator(dataset_path)
    headline = {"accuracy": evaluation.accuracy(f, held)}

    if generator is not None:
        piv = evaluation.pivotality_report(
            f, generator, nuisance_grid(generator), cfg["density_samples"],
            label=tc.conditional_on_y, seed=tc.seed)
    else:
        piv = evaluation.empirical_pivotality(f, held, label=tc.conditional_on_y)
    headline["max_ks"] = piv.max_ks
    evaluation.write_densities_csv(piv.densities,
                                   os.path.join(report_dir, "densities.csv"))
    evaluation.write_ks_csv(piv, os.path.join(report_dir, "ks.csv"))
    manifest.metrics["densities"] = os.path.join(REPORT_DIR, "densities.csv")
    manifest.metrics["ks"] = os.path.join(REPORT_DIR, "ks.csv")

    test = None
    if test_dataset is not None:
        manifest.add_dataset(test_dataset)
        test = load_dataset(test_dataset)
    test = ams_test_set(data, held, test)
    if test is None:
        log.warning("AMS scan skipped: the %s set lacks one of the classes",
                    "test" if test_dataset else "held-out")
    else:
        scan = evaluation.ams_scan(f, test)
        evaluation.write_ams_csv(scan, os.path.join(report_dir, "ams_scan.csv"))
        manifest.metrics["ams_scan"] = os.path.join(REPORT_DIR, "ams_scan.csv")
        headline["best_ams"] = scan.best_ams
        headline["best_threshold"] = scan.best_threshold

    if f.n_inputs == 2:
        xs, ys, grid = evaluation.decision_surface(f)
        evaluation.write_surface_csv(
            xs, ys, grid, os.path.join(report_dir, "decision_surface.csv"))
        manifest.metrics["decision_surface"] = os.path.join(
            REPORT_DIR, "decision_surface.csv")

    headline["h_z"] = nuisance_entropy(generator, data.z)
    if isinstance(generator, ToySpec):
        est = evaluation.estimate_h_y_given_x(generator, cfg["entropy_samples"],
                                              seed=tc.seed + 1)
        headline["h_y_given_x"] = est.value
    return headline


#
# reports
#
def _read_manifest(run_dir):
    path = os.path.join(str(run_dir), MANIFEST_NAME)
    if not os.path.exists(path):
        raise ReportError("no %s" % MANIFEST_NAME, run_dir)
    return RunManifest.read(path)


def _float_or_none(values, key):
    try:
        return float(values[key])
    except (KeyError, ValueError):
        return None


def make_report(run_dir):
    """Figures and summary.txt for one run directory; returns summary lines."""
    run_dir = str(run_dir)
    manifest = _read_manifest(run_dir)
    report_dir = os.path.join(run_dir, REPORT_DIR)
    if not os.path.isdir(report_dir):
        os.makedirs(report_dir)
    headline = {}
    report_path = os.path.join(report_dir, REPORT_NAME)
    if os.path.exists(report_path):
        headline = evaluation.read_report(report_path)

    if manifest.extra.get("plain"):
        log.warning("%s: plain training run, no training curves", run_dir)
    else:
        metrics_path = os.path.join(run_dir, METRICS_NAME)
        if not os.path.exists(metrics_path):
            raise ReportError("missing %s" % METRICS_NAME, run_dir)
        lam = float(manifest.extra.get("lam", 0.0))
        metrics = RunMetrics.read_csv(metrics_path, lam)
        plots.plot_training_curves(
            metrics, os.path.join(report_dir, "training_curves.svg"),
            h_z=_float_or_none(headline, "h_z"),
            loss_f_floor=_float_or_none(headline, "h_y_given_x"))

    densities_path = os.path.join(report_dir, "densities.csv")
    if os.path.exists(densities_path):
        plots.plot_densities(evaluation.read_densities_csv(densities_path),
                             os.path.join(report_dir, "densities.svg"))

    ams_path = os.path.join(report_dir, "ams_scan.csv")
    if os.path.exists(ams_path):
        plots.plot_ams([(os.path.basename(run_dir),
                         evaluation.read_ams_csv(ams_path))],
                       os.path.join(report_dir, "ams.svg"))
    else:
        log.warning("%s: no AMS evaluation, skipping the AMS plot", run_dir)

    surface_path = os.path.join(report_dir, "decision_surface.csv")
    if os.path.exists(surface_path):
        xs, ys, grid = evaluation.read_surface_csv(surface_path)
        plots.plot_decision_surface(xs, ys, grid,
                                    os.path.join(report_dir,
                                                 "decision_surface.svg"))

    lines = ["run %s" % run_dir] + ["  %s = %s" % (k, headline[k])
                                    for k in sorted(headline)]
    with open(os.path.join(report_dir, "summary.txt"), "w") as handle:
        handle.write("\n".join(lines) + "\n")
    return lines
