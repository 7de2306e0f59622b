# Part of the pivotal adversarial training library (pivot)
#
# It is licensed under a liberal MIT/X11 style license;
# see the file "LICENSE" in this directory for details.

"""Adversarial training of a classifier f against an adversary r.

The value function is E = L_f - lam * L_r, where L_f is the classifier's
binary cross-entropy and L_r the adversary's negative log-likelihood of
the nuisance given the classifier score.  After pretraining f alone, each
outer iteration runs K adversary updates on fresh minibatches with f held
fixed, then one classifier update with r held fixed.  The classifier
gradient of the adversarial term is obtained by pushing the adversary's
score gradient back through f.

Random streams are split by purpose (holdout split, pretraining,
classifier minibatches, adversary minibatches), so a run at lam = 0 draws
exactly the classifier minibatches plain training draws."""

from __future__ import annotations

import logging
import math
import os
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from pivot import adversary, evaluation, nn
from pivot.errors import ConfigurationError, NumericalError, TrainingError
from pivot.optim import ADAM, ASCEND, DESCEND, OPTIMIZERS, new_optimizer, \
    optimizer_step
from pivot.progress import null_progress

log = logging.getLogger(__name__)

# hidden layer sizes and activations used by the experiments
TOY_CLASSIFIER = ((20, 20), (nn.TANH, nn.RELU))
TOY_ADVERSARY = ((20, 20), (nn.RELU, nn.RELU))
PHYSICS_CLASSIFIER = ((64, 64, 64), (nn.TANH, nn.RELU, nn.RELU))
PHYSICS_ADVERSARY = ((64, 64, 64), (nn.RELU, nn.RELU, nn.RELU))

METRICS_COLUMNS = ("iteration", "loss_f", "loss_r", "e_lambda")
SNAPSHOT_COLUMNS = ("iteration", "pivotality", "accuracy")


@dataclass(frozen=True)
class TrainConfig(object):
    """Hyper-parameters of a training run.

    conditional_on_y restricts the adversary to one class; nominal_z
    restricts the classifier to samples at one nuisance value."""
    lam: float = 50.0
    minibatch_size: int = 128
    adversary_steps: int = 500
    iterations: int = 200
    pretrain_epochs: int = 50
    pretrain_patience: int = 5
    classifier_lr: float = 1e-3
    adversary_lr: float = 1e-3
    optimizer: str = ADAM
    seed: int = 0
    conditional_on_y: Optional[int] = None
    adversary_kind: adversary.AdversaryKind = field(
        default_factory=lambda: adversary.mixture(5))
    nominal_z: Optional[float] = None
    eval_fraction: float = 0.1
    checkpoint_every: int = 10
    snapshot_every: int = 10

    def __post_init__(self):
        if not self.lam >= 0.0:
            raise ConfigurationError("lambda must be >= 0, got %r" % (self.lam,))
        for name in ("minibatch_size", "adversary_steps", "iterations",
                     "checkpoint_every"):
            if int(getattr(self, name)) < 1:
                raise ConfigurationError("%s must be >= 1" % name)
        for name in ("pretrain_epochs", "pretrain_patience", "snapshot_every"):
            if int(getattr(self, name)) < 0:
                raise ConfigurationError("%s must be >= 0" % name)
        if not (self.classifier_lr > 0.0 and self.adversary_lr > 0.0):
            raise ConfigurationError("learning rates must be positive")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigurationError("unknown optimizer %r" % self.optimizer)
        if self.conditional_on_y not in (None, 0, 1):
            raise ConfigurationError("conditional_on_y must be 0, 1 or unset")
        if not 0.0 < self.eval_fraction < 1.0:
            raise ConfigurationError("eval_fraction must be in (0, 1)")

    def as_dict(self):
        out = asdict(self)
        out["adversary_kind"] = str(self.adversary_kind)
        return out


class _Streams(object):
    """Independent generators, one per purpose, derived from the seed."""
    def __init__(self, seed):
        split, pretrain, clf, adv = np.random.SeedSequence(seed).spawn(4)
        self.split = np.random.default_rng(split)
        self.pretrain = np.random.default_rng(pretrain)
        self.classifier = np.random.default_rng(clf)
        self.adversary = np.random.default_rng(adv)


#
# metrics
#
@dataclass(frozen=True)
class IterationRecord(object):
    iteration: int
    loss_f: float
    loss_r: float
    e_lambda: float


@dataclass(frozen=True)
class Snapshot(object):
    iteration: int
    pivotality: float
    accuracy: float


class RunMetrics(object):
    """Per-iteration losses plus periodic evaluation snapshots."""

    def __init__(self, lam):
        self.lam = float(lam)
        self.records = []
        self.snapshots = []

    def record(self, iteration, loss_f, loss_r):
        if not (math.isfinite(loss_f) and math.isfinite(loss_r)):
            raise NumericalError("non-finite loss recorded")
        rec = IterationRecord(int(iteration), float(loss_f), float(loss_r),
                              float(loss_f) - self.lam * float(loss_r))
        self.records.append(rec)
        return rec

    def snapshot(self, iteration, pivotality, accuracy):
        snap = Snapshot(int(iteration), float(pivotality), float(accuracy))
        self.snapshots.append(snap)
        return snap

    def __len__(self):
        return len(self.records)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records])

    def tail_mean(self, name, n):
        """Mean of a column over the last n records."""
        return float(np.mean(self.column(name)[-n:]))

    def write_csv(self, path):
        with open(str(path), "w") as handle:
            handle.write(",".join(METRICS_COLUMNS) + "\n")
            for r in self.records:
                handle.write("%d,%r,%r,%r\n" % (r.iteration, r.loss_f,
                                                r.loss_r, r.e_lambda))

    def write_snapshots_csv(self, path):
        with open(str(path), "w") as handle:
            handle.write(",".join(SNAPSHOT_COLUMNS) + "\n")
            for s in self.snapshots:
                handle.write("%d,%r,%r\n" % (s.iteration, s.pivotality,
                                             s.accuracy))

    @classmethod
    def read_csv(cls, path, lam=0.0):
        metrics = cls(lam)
        with open(str(path), "r") as handle:
            header = handle.readline().strip().split(",")
            if tuple(header) != METRICS_COLUMNS:
                raise ConfigurationError("%s: expected columns %s" % (
                    path, ",".join(METRICS_COLUMNS)))
            for line in handle:
                if line.strip():
                    it, lf, lr, e = line.strip().split(",")
                    metrics.records.append(IterationRecord(
                        int(it), float(lf), float(lr), float(e)))
        return metrics


#
# building blocks
#
def build_classifier(n_features, hidden=TOY_CLASSIFIER[0],
                     activations=TOY_CLASSIFIER[1], seed=0):
    """Classifier net ending in a single sigmoid unit."""
    hidden = [int(n) for n in hidden]
    if len(activations) != len(hidden):
        raise ConfigurationError("%d activations for %d hidden layers" % (
            len(activations), len(hidden)))
    return nn.init_params([int(n_features)] + hidden + [1],
                          list(activations) + [nn.SIGMOID], seed)


def _check_classifier(f):
    if f.n_outputs != 1 or f.output_activation != nn.SIGMOID:
        raise ConfigurationError("classifier must end in one sigmoid unit")


def split_holdout(data, fraction, seed):
    """Deterministic (train, held-out) split; held-out gets 'fraction'."""
    n = len(data)
    if n < 2:
        raise ConfigurationError("need at least 2 samples to split, got %d" % n)
    n_eval = min(n - 1, max(1, int(round(n * fraction))))
    order = _Streams(seed).split.permutation(n)
    return data[np.sort(order[n_eval:])], data[np.sort(order[:n_eval])]


def sample_minibatch(data, size, rng, label_filter=None):
    """size samples drawn i.i.d. with replacement, optionally from one class."""
    pool = data if label_filter is None else data.with_label(label_filter)
    if len(pool) == 0:
        raise ConfigurationError("no samples to draw from (label filter %r)" %
                                 (label_filter,))
    return pool[rng.integers(0, len(pool), size=int(size))]


def _classifier_pool(train, config):
    if config.nominal_z is None:
        return train
    pool = train.with_nuisance(config.nominal_z)
    if len(pool) == 0:
        raise ConfigurationError("no training samples at nominal z=%r" %
                                 (config.nominal_z,))
    return pool


def _adversary_pool(data, config, what):
    if config.conditional_on_y is None:
        return data
    pool = data.with_label(config.conditional_on_y)
    if len(pool) == 0:
        raise ConfigurationError("no %s samples with y=%d" % (
            what, config.conditional_on_y))
    return pool


def classifier_objective(f, batch, r, config):
    """E_lam = L_f - lam L_r on a batch with r fixed, and its gradient
    with respect to f's params.

    L_r only covers the samples the adversary sees (one class in
    conditional mode).  Without r, or at lam = 0, this is plain bce."""
    tr = nn.trace(f, batch.x)
    n = len(batch)
    losses, delta = nn.sample_losses(f, tr, batch.y, nn.BCE)
    value = float(np.mean(losses))
    delta = delta / n
    if r is not None and config.lam > 0.0:
        mask = np.ones(n, dtype=bool)
        if config.conditional_on_y is not None:
            mask = batch.y == config.conditional_on_y
        if np.any(mask):
            loss_r, _, grad_s = adversary.adversary_loss(
                r, tr.output[mask, 0], batch.z[mask], config.adversary_kind)
            value -= config.lam * loss_r
            upstream = np.zeros((n, 1))
            upstream[mask, 0] = -config.lam * grad_s
            delta = delta + nn.output_delta(f, tr, upstream)
    grad, _ = nn.backward(f, tr, delta)
    return value, grad


def _classifier_step(f, opt_f, batch, r, config):
    """One descent step on L_f - lam L_r with r fixed."""
    _, grad = classifier_objective(f, batch, r, config)
    return optimizer_step(opt_f, f, grad, DESCEND)


def _adversary_step(f, r, opt_r, batch, kind):
    """One adversary update with f fixed: ascend the log-likelihood."""
    s = evaluation.scores(f, batch.x)
    loss, grad_r, _ = adversary.adversary_loss(r, s, batch.z, kind)
    r, opt_r = optimizer_step(opt_r, r, -grad_r, ASCEND)
    return r, opt_r, loss


def evaluate_losses(f, r, held, held_adv, kind):
    """(L_f, L_r) on the held-out split."""
    loss_f = nn.batch_loss(f, held.x, held.y, nn.BCE)
    s = evaluation.scores(f, held_adv.x).reshape(-1, 1)
    loss_r = nn.batch_loss(r, s, held_adv.z, kind.loss_tag)
    if not (math.isfinite(loss_f) and math.isfinite(loss_r)):
        raise NumericalError("non-finite held-out loss")
    return loss_f, loss_r


#
# training phases
#
def pretrain_classifier(f, data, config, progress=None):
    """Train f on bce alone for up to pretrain_epochs epochs.

    An epoch is ceil(n / M) minibatch steps.  Training stops early once
    the held-out loss has not improved for pretrain_patience epochs (0
    disables that), and the net with the lowest training loss seen,
    the initial one included, is returned."""
    _check_classifier(f)
    if config.pretrain_epochs == 0:
        return f
    train, held = split_holdout(data, config.eval_fraction, config.seed)
    pool = _classifier_pool(train, config)
    rng = _Streams(config.seed).pretrain
    opt = new_optimizer(config.optimizer, config.classifier_lr, f.params.size)
    steps = int(math.ceil(len(pool) / float(config.minibatch_size)))
    best, best_loss = f, nn.batch_loss(f, pool.x, pool.y, nn.BCE)
    best_val, stale = float("inf"), 0
    progress = progress or null_progress()
    progress.start()
    step = 0
    try:
        for epoch in range(1, config.pretrain_epochs + 1):
            for _ in range(steps):
                step += 1
                batch = sample_minibatch(pool, config.minibatch_size, rng)
                f, opt = _classifier_step(f, opt, batch, None, config)
            loss = nn.batch_loss(f, pool.x, pool.y, nn.BCE)
            if not math.isfinite(loss):
                raise NumericalError("non-finite training loss")
            if loss <= best_loss:
                best, best_loss = f, loss
            val = nn.batch_loss(f, held.x, held.y, nn.BCE)
            log.debug("pretrain epoch %d: train %.5f held-out %.5f",
                      epoch, loss, val)
            progress.tick(epoch, config.pretrain_epochs)
            if val < best_val:
                best_val, stale = val, 0
            else:
                stale += 1
                if config.pretrain_patience and stale >= config.pretrain_patience:
                    log.info("pretraining plateaued after %d epochs", epoch)
                    break
    except NumericalError as e:
        progress.end(str(e))
        raise TrainingError(str(e), step, "pretrain", (best, None))
    progress.end()
    log.info("pretrained classifier: bce %.5f", best_loss)
    return best


def train_classifier(f, data, config, progress=None):
    """Plain bce training for 'iterations' minibatch steps.

    Uses the holdout split and classifier stream of adversarial_train,
    so it is the lam = 0 reference run."""
    _check_classifier(f)
    train, _ = split_holdout(data, config.eval_fraction, config.seed)
    pool = _classifier_pool(train, config)
    rng = _Streams(config.seed).classifier
    opt = new_optimizer(config.optimizer, config.classifier_lr, f.params.size)
    progress = progress or null_progress()
    progress.start()
    good = f
    for t in range(1, config.iterations + 1):
        batch = sample_minibatch(pool, config.minibatch_size, rng)
        try:
            f, opt = _classifier_step(f, opt, batch, None, config)
        except NumericalError as e:
            progress.end(str(e))
            raise TrainingError(str(e), t, "classifier", (good, None))
        if t % config.checkpoint_every == 0:
            good = f
        progress.tick(t, config.iterations)
    progress.end()
    return f


def _write_checkpoint(checkpoint_dir, tag, f, r, kind):
    nn.save_checkpoint(f, os.path.join(checkpoint_dir, "f_%s.ckpt" % tag))
    nn.save_checkpoint(r, os.path.join(checkpoint_dir, "r_%s.ckpt" % tag),
                       head=str(kind))


def adversarial_train(f, r, data, config, progress=None, checkpoint_dir=None):
    """Alternate K adversary steps and one classifier step, T times.

    Losses for RunMetrics come from the fixed held-out split.  Every
    checkpoint_every iterations the pair is kept as the last good
    checkpoint (and written to checkpoint_dir when given); a numerical
    failure raises TrainingError carrying it."""
    kind = config.adversary_kind
    _check_classifier(f)
    adversary.check_head(r, kind)
    train, held = split_holdout(data, config.eval_fraction, config.seed)
    clf_pool = _classifier_pool(train, config)
    adv_pool = _adversary_pool(train, config, "training")
    held_adv = _adversary_pool(held, config, "held-out")
    streams = _Streams(config.seed)
    opt_f = new_optimizer(config.optimizer, config.classifier_lr, f.params.size)
    opt_r = new_optimizer(config.optimizer, config.adversary_lr, r.params.size)
    metrics = RunMetrics(config.lam)
    last_good = (f, r)
    progress = progress or null_progress()
    progress.start()
    for t in range(1, config.iterations + 1):
        try:
            for _ in range(config.adversary_steps):
                batch = sample_minibatch(adv_pool, config.minibatch_size,
                                         streams.adversary)
                r, opt_r, _ = _adversary_step(f, r, opt_r, batch, kind)
            batch = sample_minibatch(clf_pool, config.minibatch_size,
                                     streams.classifier)
            f, opt_f = _classifier_step(f, opt_f, batch, r, config)
            rec = metrics.record(t, *evaluate_losses(f, r, held, held_adv, kind))
        except NumericalError as e:
            progress.end(str(e))
            if checkpoint_dir:
                _write_checkpoint(checkpoint_dir, "last_good", last_good[0],
                                  last_good[1], kind)
            raise TrainingError(str(e), t, "adversarial", last_good)
        log.debug("iteration %d: L_f %.5f L_r %.5f E %.5f", t, rec.loss_f,
                  rec.loss_r, rec.e_lambda)
        if config.snapshot_every and (t % config.snapshot_every == 0 or
                                      t == config.iterations):
            piv = evaluation.empirical_pivotality(f, held,
                                                  label=config.conditional_on_y)
            metrics.snapshot(t, piv.max_ks, evaluation.accuracy(f, held))
        if t % config.checkpoint_every == 0:
            last_good = (f, r)
            if checkpoint_dir:
                _write_checkpoint(checkpoint_dir, "iter%04d" % t, f, r, kind)
        progress.tick(t, config.iterations)
    progress.end()
    log.info("adversarial training done: L_f %.5f L_r %.5f",
             metrics.records[-1].loss_f, metrics.records[-1].loss_r)
    return f, r, metrics


def fit_adversary(f, r, data, config, steps, progress=None):
    """Refit r on a frozen classifier for 'steps' updates.

    Returns the fitted adversary and its held-out L_r."""
    kind = config.adversary_kind
    adversary.check_head(r, kind)
    train, held = split_holdout(data, config.eval_fraction, config.seed)
    pool = _adversary_pool(train, config, "training")
    held_adv = _adversary_pool(held, config, "held-out")
    rng = _Streams(config.seed).adversary
    opt = new_optimizer(config.optimizer, config.adversary_lr, r.params.size)
    progress = progress or null_progress()
    progress.start()
    for step in range(1, int(steps) + 1):
        batch = sample_minibatch(pool, config.minibatch_size, rng)
        try:
            r, opt, _ = _adversary_step(f, r, opt, batch, kind)
        except NumericalError as e:
            progress.end(str(e))
            raise TrainingError(str(e), step, "adversary refit", (f, None))
        progress.tick(step, int(steps))
    progress.end()
    s = evaluation.scores(f, held_adv.x).reshape(-1, 1)
    return r, nn.batch_loss(r, s, held_adv.z, kind.loss_tag)
