# Part of the pivotal adversarial training library (pivot)
#
# It is licensed under a liberal MIT/X11 style license;
# see the file "LICENSE" in this directory for details.

"""Run manifests: what a command was given and what it produced.

A manifest is a JSON file holding the command, the complete configuration
snapshot, content hashes of the datasets read, paths of the checkpoints
and metric files written, the tool version, wall-clock timings and the
versions of the CSV schemas in use.  Relative paths are relative to the
manifest's own directory."""

from __future__ import annotations

import json
import logging
import os
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from typing import Dict, Optional

from pivot.datagen import SurrogateSpec, ToySpec, fingerprint
from pivot.errors import ManifestError

log = logging.getLogger(__name__)

MANIFEST_VERSION = 1
MANIFEST_NAME = "manifest.json"

# bump a version whenever its columns change
CSV_SCHEMAS = {
    "dataset": ("x1..xD,y,z,weight", 1),
    "metrics": ("iteration,loss_f,loss_r,e_lambda", 1),
    "snapshots": ("iteration,pivotality,accuracy", 1),
    "densities": ("z,bin_low,bin_high,mass", 1),
    "ks": ("z_a,z_b,ks", 1),
    "ams_scan": ("threshold,ams", 1),
    "decision_surface": ("x1,x2,score", 1),
    "sweep": ("lam,repeat,seed,nominal,status,best_ams,max_ks,loss_f,loss_r,"
              "error", 1),
    "sweep_summary": ("lam,nominal,runs,failures,best_ams_mean,best_ams_std,"
                      "max_ks_mean,max_ks_std", 1),
}


def _version():
    from pivot import __version__
    return __version__


@dataclass
class RunManifest(object):
    command: str
    config: Dict[str, str] = field(default_factory=dict)
    datasets: Dict[str, str] = field(default_factory=dict)
    checkpoints: Dict[str, str] = field(default_factory=dict)
    metrics: Dict[str, str] = field(default_factory=dict)
    timings: Dict[str, float] = field(default_factory=dict)
    extra: Dict[str, object] = field(default_factory=dict)
    version: str = field(default_factory=_version)
    csv_schemas: Dict[str, object] = field(
        default_factory=lambda: dict((k, list(v)) for k, v in CSV_SCHEMAS.items()))
    manifest_version: int = MANIFEST_VERSION

    def add_dataset(self, path):
        """Record a dataset by absolute path and sha256."""
        self.datasets[os.path.abspath(str(path))] = fingerprint(path)

    @contextmanager
    def timed(self, name):
        """Record the wall-clock seconds spent inside the block."""
        start = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = self.timings.get(name, 0.0) + \
                time.perf_counter() - start

    def referenced_files(self):
        return (list(self.datasets) + list(self.checkpoints.values()) +
                list(self.metrics.values()))

    def write(self, path):
        """Write as JSON; every referenced file must already exist."""
        base = os.path.dirname(os.path.abspath(str(path)))
        missing = [p for p in self.referenced_files()
                   if not os.path.exists(os.path.join(base, p))]
        if missing:
            raise ManifestError("manifest %s references missing files: %s" % (
                path, ", ".join(sorted(missing))))
        with open(str(path), "w") as handle:
            json.dump(asdict(self), handle, indent=2, sort_keys=True)
            handle.write("\n")
        log.debug("wrote manifest %s", path)

    @classmethod
    def read(cls, path):
        try:
            with open(str(path), "r") as handle:
                data = json.load(handle)
        except ValueError as e:
            raise ManifestError("manifest %s is not valid JSON: %s" % (path, e))
        if data.get("manifest_version") != MANIFEST_VERSION:
            raise ManifestError("manifest %s has unsupported version %r" % (
                path, data.get("manifest_version")))
        try:
            return cls(**data)
        except TypeError as e:
            raise ManifestError("manifest %s: %s" % (path, e))


def dataset_manifest_path(dataset_path):
    """Where 'generate' puts the manifest of a dataset file."""
    return str(dataset_path) + ".manifest.json"


#
# data generator specs as plain JSON
#
def _tupled(value):
    if isinstance(value, list):
        return tuple(_tupled(v) for v in value)
    return value


def generator_record(spec):
    """JSON-able description of a ToySpec or SurrogateSpec."""
    kind = "toy" if isinstance(spec, ToySpec) else "surrogate"
    return {"kind": kind, "spec": asdict(spec)}


def generator_from_record(record):
    """Rebuild the spec generator_record described, or None."""
    if not record:
        return None
    cls = {"toy": ToySpec, "surrogate": SurrogateSpec}.get(record.get("kind"))
    if cls is None:
        raise ManifestError("unknown generator kind %r" % record.get("kind"))
    spec = dict((k, _tupled(v)) for k, v in record["spec"].items())
    return cls(**spec)


def dataset_generator(dataset_path) -> Optional[object]:
    """The generator spec recorded next to a dataset file, if there is one."""
    path = dataset_manifest_path(dataset_path)
    if not os.path.exists(path):
        return None
    return generator_from_record(RunManifest.read(path).extra.get("generator"))
