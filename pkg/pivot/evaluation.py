# Part of the pivotal adversarial training library (pivot)
#
# It is licensed under a liberal MIT/X11 style license;
# see the file "LICENSE" in this directory for details.

"""Everything measured about a trained classifier.

Score densities are histograms over [0, 1] with 50 equal bins, and the
pivotality of a classifier is the largest Kolmogorov-Smirnov distance
between its score densities at different nuisance values.  The module
also has the entropy references the training losses are compared
against, and the approximate median significance (AMS) of a threshold
selection."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.special import expit, logsumexp
from scipy.stats import multivariate_normal

from pivot import nn
from pivot.datagen import generate_toy
from pivot.errors import EvaluationError, RejectedInputError

log = logging.getLogger(__name__)

N_BINS = 50
SCORE_EDGES = np.linspace(0.0, 1.0, N_BINS + 1)
MIN_DENSITY_SAMPLES = 1000
QUADRATURE_ORDER = 64
DEFAULT_THRESHOLDS = np.linspace(0.0, 1.0, 101)
# category counts up to this are treated as discrete nuisance values
MAX_DISCRETE_VALUES = 10


def scores(f, X):
    """Classifier outputs for the rows of X, as a flat vector."""
    return nn.forward_batch(f, X)[:, 0]


def accuracy(f, samples, threshold=0.5):
    if len(samples) == 0:
        raise EvaluationError("accuracy of an empty sample set")
    return float(np.mean((scores(f, samples.x) > threshold) == (samples.y == 1)))


#
# score densities
#
@dataclass(frozen=True, eq=False)
class ConditionalDensity(object):
    """Histogram of classifier scores at one nuisance value."""
    z_value: float
    bin_edges: np.ndarray
    bin_masses: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.bin_edges, dtype=np.float64)
        masses = np.asarray(self.bin_masses, dtype=np.float64)
        if edges.ndim != 1 or masses.size != edges.size - 1:
            raise RejectedInputError("need one mass per bin")
        if np.any(np.diff(edges) <= 0.0):
            raise RejectedInputError("bin edges must increase strictly")
        if np.any(masses < 0.0) or abs(masses.sum() - 1.0) > 1e-9:
            raise RejectedInputError("bin masses must be a probability vector")
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "bin_masses", masses)

    @property
    def cdf(self):
        return np.cumsum(self.bin_masses)


def density_from_scores(values, z_value, edges=SCORE_EDGES):
    values = np.clip(np.asarray(values, dtype=np.float64), edges[0], edges[-1])
    if values.size == 0:
        raise EvaluationError("no scores at z=%r" % (z_value,))
    counts, _ = np.histogram(values, bins=edges)
    return ConditionalDensity(z_value, edges, counts / float(counts.sum()))


def conditional_score_density(f, data_generator, z_value, n_samples,
                              label=None, seed=0):
    """Score histogram over n_samples draws with the nuisance held at z_value.

    data_generator is anything with sample_at(z, n, seed), such as a
    ToySpec or SurrogateSpec.  With a label, only that class is kept and
    further batches are drawn until n_samples of it are in hand."""
    if n_samples < MIN_DENSITY_SAMPLES:
        raise RejectedInputError("need at least %d samples for a density, got %d"
                                 % (MIN_DENSITY_SAMPLES, n_samples))
    samples = data_generator.sample_at(z_value, n_samples, seed)
    if label is None:
        return density_from_scores(scores(f, samples.x), z_value)
    chunks = [samples.with_label(label).x]
    have = len(chunks[0])
    extra = np.random.SeedSequence(seed)
    while have < n_samples:
        more = data_generator.sample_at(z_value, n_samples, extra.spawn(1)[0])
        more = more.with_label(label).x
        if len(more) == 0:
            raise EvaluationError("generator yields no samples with label %d"
                                  % label)
        chunks.append(more)
        have += len(more)
    x = np.concatenate(chunks)[:n_samples]
    return density_from_scores(scores(f, x), z_value)


def ks_distance(a, b):
    """Largest absolute difference between the cumulative bin masses."""
    if not np.array_equal(a.bin_edges, b.bin_edges):
        raise RejectedInputError("densities have different bin edges")
    return float(min(1.0, np.max(np.abs(a.cdf - b.cdf))))


@dataclass(frozen=True)
class PivotalityReport(object):
    """Densities per nuisance value, pairwise KS distances and their max."""
    densities: Tuple[ConditionalDensity, ...]
    ks_pairs: Tuple[Tuple[float, float, float], ...]
    max_ks: float

    def matrix(self):
        n = len(self.densities)
        out = np.zeros((n, n))
        k = 0
        for i in range(n):
            for j in range(i + 1, n):
                out[i, j] = out[j, i] = self.ks_pairs[k][2]
                k += 1
        return out


def _report(densities):
    pairs = []
    for i, a in enumerate(densities):
        for b in densities[i + 1:]:
            pairs.append((a.z_value, b.z_value, ks_distance(a, b)))
    return PivotalityReport(tuple(densities), tuple(pairs),
                            max([p[2] for p in pairs] or [0.0]))


def pivotality_report(f, data_generator, z_grid, n_samples=10000, label=None,
                      seed=0):
    """Densities at every z in z_grid; the headline score is the max KS.

    Every z value uses the same seed, so the densities differ only
    through the nuisance."""
    z_grid = list(z_grid)
    if not z_grid:
        raise RejectedInputError("empty z grid")
    return _report([conditional_score_density(f, data_generator, z, n_samples,
                                              label, seed) for z in z_grid])


def empirical_pivotality(f, samples, label=None, n_groups=3):
    """Pivotality measured on a stored dataset.

    Discrete nuisances are grouped by value; continuous ones by quantile
    bins, each represented by its mean z."""
    if label is not None:
        samples = samples.with_label(label)
    z = samples.z
    if z.size == 0:
        return _report([])
    values = np.unique(z)
    if values.size <= MAX_DISCRETE_VALUES:
        groups = [(float(v), z == v) for v in values]
    else:
        edges = np.quantile(z, np.linspace(0.0, 1.0, n_groups + 1))
        idx = np.clip(np.searchsorted(edges, z, side="right") - 1, 0, n_groups - 1)
        groups = [(float(np.mean(z[idx == g])), idx == g)
                  for g in range(n_groups) if np.any(idx == g)]
    s = scores(f, samples.x)
    return _report([density_from_scores(s[mask], value)
                    for value, mask in groups if np.count_nonzero(mask) > 1])


def decision_surface(f, x_range=(-3.0, 4.0), y_range=(-3.0, 4.0), resolution=50):
    """Scores on a resolution x resolution grid over a 2D input plane.

    Returns (xs, ys, grid) with grid[i, j] the score at (xs[j], ys[i])."""
    if f.n_inputs != 2:
        raise RejectedInputError("decision surface needs a 2-input classifier")
    xs = np.linspace(x_range[0], x_range[1], resolution)
    ys = np.linspace(y_range[0], y_range[1], resolution)
    gx, gy = np.meshgrid(xs, ys)
    points = np.column_stack([gx.ravel(), gy.ravel()])
    return xs, ys, scores(f, points).reshape(resolution, resolution)


#
# entropy references
#
_HALF_LOG_2PI_E = 0.5 * math.log(2.0 * math.pi * math.e)


def entropy_gaussian(sigma):
    """Differential entropy of N(0, sigma^2): ln(sigma * sqrt(2 pi e))."""
    if not sigma > 0.0:
        raise RejectedInputError("sigma must be positive, got %r" % (sigma,))
    return math.log(sigma) + _HALF_LOG_2PI_E


@dataclass(frozen=True)
class EntropyEstimate(object):
    value: float
    stderr: float
    n_mc: int
    warning: Optional[str] = None


def _class_log_densities(spec, x, order):
    """log p(x | y=0) and log p(x | y=1), z integrated out over its prior."""
    nodes, weights = hermgauss(order)
    zs = math.sqrt(2.0) * spec.z_prior_sigma * nodes
    log_w = np.log(weights / math.sqrt(math.pi))
    log_p0 = multivariate_normal.logpdf(x, mean=spec.class0_mean,
                                        cov=spec.class0_cov)
    shift = np.asarray(spec.z_shift, dtype=np.float64)
    per_node = np.column_stack([
        multivariate_normal.logpdf(x, mean=np.asarray(spec.class1_mean) + z * shift,
                                   cov=spec.class1_cov)
        for z in zs])
    return np.atleast_1d(log_p0), logsumexp(per_node + log_w, axis=1)


def estimate_h_y_given_x(toy_spec, n_mc, seed=None, target_stderr=0.01,
                         order=QUADRATURE_ORDER):
    """Monte Carlo estimate of H(Y|X) for the toy problem.

    x is drawn from the toy's marginal; p(y|x) comes from the exact class
    densities with z marginalized by Gauss-Hermite quadrature."""
    n_mc = int(n_mc)
    if n_mc < 2:
        raise RejectedInputError("need at least 2 Monte Carlo samples")
    seed = toy_spec.seed if seed is None else seed
    x = generate_toy(replace(toy_spec, n=n_mc, seed=seed)).x
    log_p0, log_p1 = _class_log_densities(toy_spec, x, order)
    d = log_p1 - log_p0
    # binary entropy written on the log-odds
    h = np.logaddexp(0.0, d) - expit(d) * d
    value = float(np.mean(h))
    stderr = float(np.std(h, ddof=1) / math.sqrt(n_mc))
    warning = None
    if stderr > target_stderr:
        warning = ("standard error %.4g above the requested %.4g; "
                   "increase n_mc" % (stderr, target_stderr))
        log.warning("H(Y|X) estimate: %s", warning)
    return EntropyEstimate(value, stderr, n_mc, warning)


def entropy_bound_gap(loss_f, loss_r, h_y_given_x, h_z, lam=1.0):
    """(L_f - lam L_r) - (H(Y|X) - lam H(Z)); non-negative up to noise."""
    return (loss_f - lam * loss_r) - (h_y_given_x - lam * h_z)


def check_entropy_bound(loss_f, loss_r, h_y_given_x, h_z, lam=1.0,
                        tolerance=0.05):
    return entropy_bound_gap(loss_f, loss_r, h_y_given_x, h_z, lam) >= -tolerance


#
# approximate median significance
#
def ams(s, b):
    """sqrt(2((s + b) ln(1 + s/b) - s)), without a regularization term."""
    if not b > 0.0:
        raise RejectedInputError("background must be positive, got %r" % (b,))
    if not s >= 0.0:
        raise RejectedInputError("signal must be non-negative, got %r" % (s,))
    if s == 0.0:
        return 0.0
    return math.sqrt(max(0.0, 2.0 * ((s + b) * math.log1p(s / b) - s)))


@dataclass(frozen=True, eq=False)
class AmsScanResult(object):
    """AMS at every threshold; undefined cells (no background left) are NaN."""
    thresholds: np.ndarray
    ams_values: np.ndarray
    best_threshold: float
    best_ams: float

    def __post_init__(self):
        if len(self.thresholds) != len(self.ams_values):
            raise RejectedInputError("one AMS value per threshold")


def ams_scan_scores(values, y, weights, thresholds=DEFAULT_THRESHOLDS):
    """AMS of the selection score > t for every t in thresholds."""
    thresholds = np.asarray(thresholds, dtype=np.float64).ravel()
    if thresholds.size == 0:
        raise RejectedInputError("empty threshold grid")
    values = np.asarray(values, dtype=np.float64)
    signal = np.asarray(y) == 1
    weights = np.asarray(weights, dtype=np.float64)
    if not (np.any(signal) and np.any(~signal)):
        raise RejectedInputError("AMS scan needs both classes")
    out = np.full(thresholds.size, np.nan)
    for i, t in enumerate(thresholds):
        selected = values > t
        s = float(np.sum(weights[selected & signal]))
        b = float(np.sum(weights[selected & ~signal]))
        if b > 0.0:
            out[i] = ams(s, b)
    if np.all(np.isnan(out)):
        raise EvaluationError("no threshold leaves any background")
    best = int(np.nanargmax(out))
    return AmsScanResult(thresholds, out, float(thresholds[best]), float(out[best]))


def ams_scan(f, samples, thresholds=DEFAULT_THRESHOLDS):
    """AMS scan of classifier f on weighted test samples."""
    return ams_scan_scores(scores(f, samples.x), samples.y, samples.weight,
                           thresholds)


#
# CSV and text outputs
#
def _write_rows(path, header, rows):
    with open(str(path), "w", newline="") as handle:
        out = csv.writer(handle, lineterminator="\n")
        out.writerow(header)
        out.writerows(rows)


def _read_rows(path, header):
    with open(str(path), "r", newline="") as handle:
        rows = list(csv.reader(handle))
    if not rows or rows[0] != list(header):
        raise EvaluationError("%s: expected columns %s" % (path, ",".join(header)))
    return rows[1:]


def write_densities_csv(densities, path):
    rows = []
    for d in densities:
        for lo, hi, m in zip(d.bin_edges[:-1], d.bin_edges[1:], d.bin_masses):
            rows.append([repr(float(d.z_value)), repr(float(lo)),
                         repr(float(hi)), repr(float(m))])
    _write_rows(path, ["z", "bin_low", "bin_high", "mass"], rows)


def read_densities_csv(path):
    by_z = {}
    for z, lo, hi, m in _read_rows(path, ["z", "bin_low", "bin_high", "mass"]):
        by_z.setdefault(float(z), []).append((float(lo), float(hi), float(m)))
    out = []
    for z, bins in by_z.items():
        edges = [b[0] for b in bins] + [bins[-1][1]]
        out.append(ConditionalDensity(z, edges, [b[2] for b in bins]))
    return out


def write_ks_csv(report, path):
    _write_rows(path, ["z_a", "z_b", "ks"],
                [[repr(float(a)), repr(float(b)), repr(float(k))]
                 for a, b, k in report.ks_pairs])


def write_ams_csv(scan, path):
    _write_rows(path, ["threshold", "ams"],
                [[repr(float(t)), repr(float(a))]
                 for t, a in zip(scan.thresholds, scan.ams_values)])


def read_ams_csv(path):
    rows = _read_rows(path, ["threshold", "ams"])
    t = np.array([float(r[0]) for r in rows])
    a = np.array([float(r[1]) for r in rows])
    if np.all(np.isnan(a)):
        raise EvaluationError("%s has no defined AMS value" % path)
    best = int(np.nanargmax(a))
    return AmsScanResult(t, a, float(t[best]), float(a[best]))


def write_surface_csv(xs, ys, grid, path):
    rows = [[repr(float(x)), repr(float(y)), repr(float(grid[i, j]))]
            for i, y in enumerate(ys) for j, x in enumerate(xs)]
    _write_rows(path, ["x1", "x2", "score"], rows)


def read_surface_csv(path):
    rows = _read_rows(path, ["x1", "x2", "score"])
    xs = np.unique([float(r[0]) for r in rows])
    ys = np.unique([float(r[1]) for r in rows])
    grid = np.array([float(r[2]) for r in rows]).reshape(ys.size, xs.size)
    return xs, ys, grid


def write_report(values, path):
    """Flat 'key = value' headline report, one item per line."""
    with open(str(path), "w") as handle:
        for key, value in values.items():
            if isinstance(value, float):
                value = repr(value)
            handle.write("%s = %s\n" % (key, value))


def read_report(path):
    out = {}
    with open(str(path), "r") as handle:
        for line in handle:
            key, sep, value = line.partition("=")
            if sep:
                out[key.strip()] = value.strip()
    return out
