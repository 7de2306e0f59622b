# Part of the pivotal adversarial training library (pivot)
#
# It is licensed under a liberal MIT/X11 style license;
# see the file "LICENSE" in this directory for details.

"""Dataset generation and dataset files.

Two generators are provided: the 2D gaussian toy problem with a
continuous nuisance shifting the signal mean, and a synthetic surrogate
for a collider classification task with a binary pileup nuisance.  Both
are pure functions of their spec and seed, and both specs can also sample
at a fixed nuisance value, which is what the pivotality evaluation needs.

Datasets are written as headered comma-separated text with the columns
x1..xD, y, z, weight, every float in full repr precision."""

from __future__ import annotations

import csv
import hashlib
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from pivot.errors import DatasetParseError, RejectedInputError, SchemaError

log = logging.getLogger(__name__)

BUFFER_SIZE = 65536


@dataclass(frozen=True, eq=False)
class Sample(object):
    """One observation: features, label, nuisance value and weight."""
    x: np.ndarray
    y: int
    z: float
    weight: float = 1.0

    def __eq__(self, other):
        if not isinstance(other, Sample):
            return NotImplemented
        return (np.array_equal(self.x, other.x) and self.y == other.y and
                self.z == other.z and self.weight == other.weight)

    __hash__ = None


#
# SampleSet holds columns but reads like a list of Samples
#
class SampleSet(object):
    """Column store for samples.

    Indexing with an int gives a Sample; indexing with a slice, mask or
    index array gives another SampleSet."""

    def __init__(self, x, y, z, weight=None):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x.reshape(-1, 1) if x.size else x.reshape(0, 1)
        n = x.shape[0]
        y = np.asarray(y).reshape(-1)
        z = np.asarray(z, dtype=np.float64).reshape(-1)
        if weight is None:
            weight = np.ones(n)
        weight = np.asarray(weight, dtype=np.float64).reshape(-1)
        if not (y.size == z.size == weight.size == n):
            raise SchemaError("column lengths disagree: x %d, y %d, z %d, "
                              "weight %d" % (n, y.size, z.size, weight.size))
        bad = np.flatnonzero((y != 0) & (y != 1))
        if bad.size:
            raise SchemaError("label %r is not 0 or 1" % (y[bad[0]],), row=bad[0])
        bad = np.flatnonzero(~(weight > 0.0) | ~np.isfinite(weight))
        if bad.size:
            raise SchemaError("weight must be positive", row=bad[0])
        bad = np.flatnonzero(~np.all(np.isfinite(x), axis=1) | ~np.isfinite(z))
        if bad.size:
            raise SchemaError("non-finite feature or nuisance", row=bad[0])
        self._x = x
        self._y = y.astype(np.int64)
        self._z = z
        self._w = weight

    @classmethod
    def from_samples(cls, samples, n_features=None):
        samples = list(samples)
        if not samples:
            return cls(np.zeros((0, n_features or 1)), [], [], [])
        return cls(np.array([s.x for s in samples], dtype=np.float64),
                   [s.y for s in samples], [s.z for s in samples],
                   [s.weight for s in samples])

    # column access
    @property
    def x(self):
        return self._x
    @property
    def y(self):
        return self._y
    @property
    def z(self):
        return self._z
    @property
    def weight(self):
        return self._w
    @property
    def n_features(self):
        return self._x.shape[1]

    # support reading like an array
    def __len__(self):
        return self._y.size
    def __getitem__(self, i):
        if isinstance(i, (int, np.integer)):
            return Sample(self._x[i].copy(), int(self._y[i]), float(self._z[i]),
                          float(self._w[i]))
        return SampleSet(self._x[i], self._y[i], self._z[i], self._w[i])
    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other):
        if not isinstance(other, SampleSet):
            return NotImplemented
        return (self._x.shape == other.x.shape and
                np.array_equal(self._x, other.x) and
                np.array_equal(self._y, other.y) and
                np.array_equal(self._z, other.z) and
                np.array_equal(self._w, other.weight))

    __hash__ = None

    def with_label(self, label):
        """Only the samples with y == label."""
        return self[self._y == int(label)]

    def with_nuisance(self, value):
        """Only the samples with z == value."""
        return self[self._z == float(value)]

    def class_totals(self):
        """(summed signal weight, summed background weight)."""
        signal = self._y == 1
        return float(np.sum(self._w[signal])), float(np.sum(self._w[~signal]))

    def with_class_totals(self, s_total, b_total):
        """Copy with each class's weights scaled to sum to the given totals."""
        s, b = self.class_totals()
        if not (s > 0.0 and b > 0.0):
            raise SchemaError("both classes are needed to rescale weights")
        scale = np.where(self._y == 1, s_total / s, b_total / b)
        return SampleSet(self._x, self._y, self._z, self._w * scale)

    def __repr__(self):
        return "SampleSet(n=%d, features=%d)" % (len(self), self.n_features)


#
# the toy problem
#
@dataclass(frozen=True)
class ToySpec(object):
    """2D gaussian toy problem.

    Class 0 is N(class0_mean, class0_cov); class 1 given z is
    N(class1_mean + z * z_shift, class1_cov); z ~ N(0, z_prior_sigma^2)."""
    n: int = 10000
    z_prior_sigma: float = 1.0
    seed: int = 0
    class0_mean: Tuple[float, float] = (0.0, 0.0)
    class0_cov: Tuple[Tuple[float, float], Tuple[float, float]] = \
        ((1.0, -0.5), (-0.5, 1.0))
    class1_mean: Tuple[float, float] = (1.0, 1.0)
    class1_cov: Tuple[Tuple[float, float], Tuple[float, float]] = \
        ((1.0, 0.0), (0.0, 1.0))
    z_shift: Tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        if int(self.n) < 1:
            raise RejectedInputError("toy sample count must be >= 1")
        if not self.z_prior_sigma > 0.0:
            raise RejectedInputError("z prior sigma must be positive")

    def _features(self, rng, y, z):
        n = y.size
        eps = rng.standard_normal((n, 2))
        chol0 = np.linalg.cholesky(np.array(self.class0_cov))
        chol1 = np.linalg.cholesky(np.array(self.class1_cov))
        x0 = np.array(self.class0_mean) + eps @ chol0.T
        x1 = (np.array(self.class1_mean) + np.outer(z, self.z_shift) +
              eps @ chol1.T)
        return np.where((y == 1)[:, None], x1, x0)

    def generate(self):
        return generate_toy(self)

    def sample_at(self, z_value, n, seed):
        """Samples with the nuisance held at z_value (class 0 is unaffected)."""
        rng = np.random.default_rng(seed)
        y = rng.integers(0, 2, size=int(n))
        z = np.full(int(n), float(z_value))
        return SampleSet(self._features(rng, y, z), y, z)


def generate_toy(spec):
    """Equal class priors, z drawn for every sample from the prior."""
    rng = np.random.default_rng(spec.seed)
    y = rng.integers(0, 2, size=spec.n)
    z = rng.normal(0.0, spec.z_prior_sigma, size=spec.n)
    return SampleSet(spec._features(rng, y, z), y, z)


#
# synthetic stand-in for the pileup study
#
DEFAULT_SURROGATE_FEATURES = 8


@dataclass(frozen=True)
class SurrogateSpec(object):
    """Binary-pileup surrogate.

    Background features are N(0, I); signal adds signal_shift.  Pileup
    (z = 1, probability 0.5) adds pileup_shift and gaussian noise of scale
    pileup_noise to the affected features of both classes.  When s_total
    and b_total are given, weights are set so that the summed weights of
    the signal and background samples equal them."""
    n: int = 10000
    pileup_shift: float = 0.5
    pileup_noise: float = 0.5
    seed: int = 0
    n_features: int = DEFAULT_SURROGATE_FEATURES
    affected_features: Tuple[int, ...] = (0, 1, 2, 3)
    signal_shift: Optional[Tuple[float, ...]] = None
    signal_fraction: float = 0.5
    s_total: Optional[float] = None
    b_total: Optional[float] = None

    def __post_init__(self):
        if int(self.n) < 1:
            raise RejectedInputError("surrogate sample count must be >= 1")
        if int(self.n_features) < 1:
            raise RejectedInputError("need at least one feature")
        if any(not 0 <= i < self.n_features for i in self.affected_features):
            raise RejectedInputError("affected feature index out of range")
        if not 0.0 < self.signal_fraction < 1.0:
            raise RejectedInputError("signal fraction must be in (0, 1)")
        if self.pileup_noise < 0.0:
            raise RejectedInputError("pileup noise must be non-negative")
        if (self.s_total is None) != (self.b_total is None):
            raise RejectedInputError("give both s_total and b_total, or neither")
        if self.s_total is not None and not (self.s_total > 0 and
                                             self.b_total > 0):
            raise RejectedInputError("event totals must be positive")
        if self.signal_shift is not None and \
                len(self.signal_shift) != self.n_features:
            raise RejectedInputError("signal_shift needs one entry per feature")

    @property
    def shift_vector(self):
        if self.signal_shift is not None:
            return np.array(self.signal_shift, dtype=np.float64)
        # pileup-affected features carry most of the separation
        shift = np.full(self.n_features, 0.5)
        shift[list(self.affected_features)] = 1.0
        return shift

    def _draw(self, rng, n, z=None):
        y = (rng.random(n) < self.signal_fraction).astype(np.int64)
        if z is None:
            z = rng.integers(0, 2, size=n).astype(np.float64)
        x = rng.standard_normal((n, self.n_features))
        noise = rng.standard_normal((n, len(self.affected_features)))
        x += np.outer(y, self.shift_vector)
        aff = list(self.affected_features)
        x[:, aff] += z[:, None] * (self.pileup_shift + self.pileup_noise * noise)
        return SampleSet(x, y, z, self._weights(y))

    def _weights(self, y):
        if self.s_total is None:
            return np.ones(y.size)
        n_sig = int(np.sum(y == 1))
        n_bkg = y.size - n_sig
        if n_sig == 0 or n_bkg == 0:
            raise RejectedInputError("weighted surrogate needs both classes")
        return np.where(y == 1, self.s_total / n_sig, self.b_total / n_bkg)

    def generate(self):
        return self._draw(np.random.default_rng(self.seed), self.n)

    def sample_at(self, z_value, n, seed):
        """Samples with the pileup indicator held at z_value."""
        n = int(n)
        return self._draw(np.random.default_rng(seed), n,
                          np.full(n, float(z_value)))


def generate_surrogate_physics(n, pileup_shift=0.5, pileup_noise=0.5, seed=0,
                               **options):
    """Surrogate dataset; see SurrogateSpec for the extra options."""
    return SurrogateSpec(n=n, pileup_shift=pileup_shift,
                         pileup_noise=pileup_noise, seed=seed,
                         **options).generate()


#
# dataset files
#
def _header(n_features):
    return ["x%d" % (i + 1) for i in range(n_features)] + ["y", "z", "weight"]


def write_dataset(samples, path):
    """Write samples as headered CSV with full float precision."""
    with open(str(path), "w", newline="") as handle:
        out = csv.writer(handle, lineterminator="\n")
        out.writerow(_header(samples.n_features))
        for x, y, z, w in zip(samples.x, samples.y, samples.z, samples.weight):
            out.writerow([repr(float(v)) for v in x] +
                         [str(int(y)), repr(float(z)), repr(float(w))])
    log.debug("wrote %d samples to %s", len(samples), path)


def _check_header(header):
    if len(header) < 4 or header[-3:] != ["y", "z", "weight"]:
        raise SchemaError("missing columns: need x1..xD, y, z, weight; got %s"
                          % ",".join(header))
    n_features = len(header) - 3
    if header[:n_features] != _header(n_features)[:n_features]:
        raise SchemaError("feature columns must be x1..x%d; got %s" % (
            n_features, ",".join(header[:n_features])))
    return n_features


def read_dataset(path):
    """Read a dataset file written by write_dataset."""
    with open(str(path), "r", newline="") as handle:
        rows = csv.reader(handle)
        header = next(rows, None)
        if header is None:
            raise SchemaError("missing columns: empty file %s" % path)
        n_features = _check_header([h.strip() for h in header])
        xs, ys, zs, ws = [], [], [], []
        for row in rows:
            line = rows.line_num
            if not row:
                continue
            if len(row) != n_features + 3:
                raise DatasetParseError("expected %d fields, got %d" % (
                    n_features + 3, len(row)), line)
            try:
                values = [float(v) for v in row[:n_features]]
                label = float(row[n_features])
                z = float(row[n_features + 1])
                w = float(row[n_features + 2])
            except ValueError as e:
                raise DatasetParseError(str(e), line)
            if label not in (0.0, 1.0):
                raise SchemaError("label %s is not 0 or 1" % row[n_features],
                                  row=line)
            if not w > 0.0:
                raise SchemaError("weight %s is not positive" % row[-1], row=line)
            xs.append(values)
            ys.append(int(label))
            zs.append(z)
            ws.append(w)
    if not ys:
        return SampleSet(np.zeros((0, n_features)), [], [], [])
    return SampleSet(np.array(xs), ys, zs, ws)


def fingerprint(path):
    """sha256 hex digest of a file's contents."""
    chksum = hashlib.sha256()
    with open(str(path), "rb") as handle:
        data = handle.read(BUFFER_SIZE)
        while len(data) > 0:
            chksum.update(data)
            data = handle.read(BUFFER_SIZE)
    return chksum.hexdigest()
