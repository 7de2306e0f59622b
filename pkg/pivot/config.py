# Part of the pivotal adversarial training library (pivot)
#
# It is licensed under a liberal MIT/X11 style license;
# see the file "LICENSE" in this directory for details.

"""Run configuration: defaults, a flat key = value file, and overrides.

Every command-line flag has a key here.  Values are resolved as built-in
defaults, then a config file, then explicit flags; each layer only
replaces the keys it mentions."""

from __future__ import annotations

import logging
import os

from pivot import adversary, nn
from pivot.errors import ConfigurationError
from pivot.train import TrainConfig

log = logging.getLogger(__name__)

RUN_DIR_ENV = "PIVOT_RUN_DIR"
DEFAULT_RUN_DIR = "runs"


#
# value codecs, one per kind of key
#
def _none_or(parse):
    def parser(text):
        if text.lower() == "none":
            return None
        return parse(text)
    return parser


def _int_list(text):
    return tuple(int(v) for v in text.split(",") if v.strip())


def _str_list(text):
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _format(value):
    if value is None:
        return "none"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (tuple, list)):
        return ",".join(str(v) for v in value)
    return str(value)


# key: (default, parser); the TrainConfig keys come first
_KEYS = [
    ("lam", 50.0, float),
    ("minibatch_size", 128, int),
    ("adversary_steps", 500, int),
    ("iterations", 200, int),
    ("pretrain_epochs", 50, int),
    ("pretrain_patience", 5, int),
    ("classifier_lr", 1e-3, float),
    ("adversary_lr", 1e-3, float),
    ("optimizer", "adam", str),
    ("seed", 0, int),
    ("conditional_on_y", None, _none_or(int)),
    ("adversary_kind", "mixture:5", str),
    ("nominal_z", None, _none_or(float)),
    ("eval_fraction", 0.1, float),
    ("checkpoint_every", 10, int),
    ("snapshot_every", 10, int),
    # architectures
    ("classifier_layers", (20, 20), _int_list),
    ("classifier_activations", (nn.TANH, nn.RELU), _str_list),
    ("adversary_layers", (20, 20), _int_list),
    ("adversary_activations", (nn.RELU, nn.RELU), _str_list),
    # dataset generation
    ("n", 10000, int),
    ("z_prior_sigma", 1.0, float),
    ("pileup_shift", 0.5, float),
    ("pileup_noise", 0.5, float),
    ("n_features", 8, int),
    ("affected_features", (0, 1, 2, 3), _int_list),
    ("signal_fraction", 0.5, float),
    ("s_total", None, _none_or(float)),
    ("b_total", None, _none_or(float)),
    # evaluation
    ("density_samples", 10000, int),
    ("entropy_samples", 100000, int),
    ("refit_steps", 500, int),
    ("run_dir", None, _none_or(str)),
]

_PARSERS = dict((key, parse) for key, _, parse in _KEYS)
TRAIN_KEYS = ("lam", "minibatch_size", "adversary_steps", "iterations",
              "pretrain_epochs", "pretrain_patience", "classifier_lr",
              "adversary_lr", "optimizer", "seed", "conditional_on_y",
              "nominal_z", "eval_fraction", "checkpoint_every",
              "snapshot_every")


class Config(object):
    """Configuration for one command.

    Config(path) reads path over the defaults; Config(**overrides) applies
    explicit values on top."""

    def __init__(self, path=None, **overrides):
        self._data = self._getDefaults()
        if path is not None:
            self.read(path)
        self.update(overrides)

    # item access
    def __getitem__(self, key):
        return self._data[key]

    def __setitem__(self, key, value):
        if key not in _PARSERS:
            raise ConfigurationError("unknown configuration key %r" % key)
        # going through the text form keeps every stored value file-exact
        self._data[key] = self._parse(key, _format(value))

    def __eq__(self, other):
        if not isinstance(other, Config):
            return NotImplemented
        return self._data == other._data

    __hash__ = None

    def keys(self):
        return [key for key, _, _ in _KEYS]

    def update(self, values):
        """Apply overrides; None means 'not given' and is skipped."""
        for key, value in values.items():
            if value is not None:
                self[key] = value

    # properties for the items that need interpreting
    @property
    def run_dir(self):
        """Where run directories go: the run_dir key, else $PIVOT_RUN_DIR,
        else ./runs, with ~ expanded."""
        path = self._data["run_dir"] or os.environ.get(RUN_DIR_ENV) or \
            DEFAULT_RUN_DIR
        return os.path.expanduser(path)
    @run_dir.setter
    def run_dir(self, path):
        self["run_dir"] = path

    @property
    def adversary_kind(self):
        return adversary.AdversaryKind.parse(self._data["adversary_kind"])
    @adversary_kind.setter
    def adversary_kind(self, kind):
        self._data["adversary_kind"] = str(kind)

    @property
    def classifier_architecture(self):
        """(hidden sizes, hidden activations) for build_classifier."""
        return (self._data["classifier_layers"],
                self._data["classifier_activations"])

    @property
    def adversary_architecture(self):
        return (self._data["adversary_layers"],
                self._data["adversary_activations"])

    def train_config(self):
        """The TrainConfig these settings describe."""
        values = dict((key, self._data[key]) for key in TRAIN_KEYS)
        return TrainConfig(adversary_kind=self.adversary_kind, **values)

    def as_dict(self):
        """Snapshot as text values; Config.from_dict inverts it exactly."""
        return dict((key, _format(self._data[key])) for key in self.keys())

    @classmethod
    def from_dict(cls, values):
        cfg = cls()
        for key, value in values.items():
            cfg[key] = value
        return cfg

    # methods to access the config file
    def _getDefaults(self):
        return dict((key, default) for key, default, _ in _KEYS)

    def _parse(self, key, text, line=None):
        try:
            return _PARSERS[key](text.strip())
        except ValueError as e:
            where = "" if line is None else "line %d: " % line
            raise ConfigurationError("%sbad value %r for %s: %s" % (
                where, text, key, e))

    def parse_text(self, text, source="<config>"):
        """Merge 'key = value' lines over the current values."""
        for number, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key = key.strip()
            if not sep:
                raise ConfigurationError("%s line %d: expected key = value" % (
                    source, number))
            if key not in _PARSERS:
                raise ConfigurationError("%s line %d: unknown key %r" % (
                    source, number, key))
            self._data[key] = self._parse(key, value, number)

    def to_text(self):
        return "".join("%s = %s\n" % (key, _format(self._data[key]))
                       for key in self.keys())

    def read(self, path):
        """Read a saved configuration, merging it in over the current values."""
        with open(str(path), "r") as handle:
            self.parse_text(handle.read(), str(path))
        log.debug("read configuration from %s", path)

    def write(self, path):
        """Write out the complete configuration."""
        with open(str(path), "w") as handle:
            handle.write(self.to_text())
