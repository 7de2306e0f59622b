# Part of the pivotal adversarial training library (pivot)
#
# It is licensed under a liberal MIT/X11 style license;
# see the file "LICENSE" in this directory for details.

"""Exceptions raised by the pivot library.

Every error derives from PivotError and from the builtin family a caller
would expect (ValueError for bad input, IOError for files, and so on), so
code that only knows the builtins still catches them."""


class PivotError(Exception):
    """Base class for all library errors."""


class RejectedInputError(PivotError, ValueError):
    """An argument is out of range or has the wrong shape."""


class ConfigurationError(PivotError, ValueError):
    """An architecture, head layout or training configuration is unusable."""


class NumericalError(PivotError, ArithmeticError):
    """A non-finite value showed up during a computation.

    'layer' is the index of the offending layer, or None when the problem
    is not tied to a layer (a gradient handed to an optimizer, say)."""

    def __init__(self, msg, layer=None):
        if layer is not None:
            msg = "%s (layer %d)" % (msg, layer)
        super(NumericalError, self).__init__(msg)
        self.layer = layer


class TrainingError(PivotError, RuntimeError):
    """Training diverged.

    Carries the iteration (or epoch) index, the phase that failed, and the
    last good checkpoint as a (classifier, adversary) pair; either half may
    be None when that player was not involved."""

    def __init__(self, msg, iteration, phase="adversarial", checkpoint=None):
        super(TrainingError, self).__init__(
            "%s: %s at iteration %d" % (phase, msg, iteration))
        self.iteration = iteration
        self.phase = phase
        self.checkpoint = checkpoint


class DatasetParseError(PivotError, ValueError):
    """A dataset file has a malformed line."""

    def __init__(self, msg, line):
        super(DatasetParseError, self).__init__("line %d: %s" % (line, msg))
        self.line = line


class SchemaError(PivotError, ValueError):
    """A dataset violates the column schema or a field invariant."""

    def __init__(self, msg, row=None):
        if row is not None:
            msg = "row %d: %s" % (row, msg)
        super(SchemaError, self).__init__(msg)
        self.row = row


class EvaluationError(PivotError, RuntimeError):
    """An evaluation could not produce a meaningful result."""


class ReportError(PivotError, IOError):
    """A run directory lacks what the report needs."""

    def __init__(self, msg, run):
        super(ReportError, self).__init__("%s: %s" % (run, msg))
        self.run = run


class ManifestError(PivotError, IOError):
    """A manifest is unreadable or references missing files."""
