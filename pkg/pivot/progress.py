#
# progress reporting for long training loops
#
# Part of the pivotal adversarial training library (pivot)
#
# It is licensed under a liberal MIT/X11 style license;
# see the file "LICENSE" in this directory for details.

"""Progress hooks shared by the training loops and sweeps.

A front-end hands the library a bar class; the library drives it through
a ProgressCallback, which throttles updates to every 'frequency' steps
and converts step counts to percentages."""


# create a no-op bar for defaults.
class NullProgressBar(object):
    """The methods a front-end bar class provides."""
    def __init__(self, title, msg, max=100):
        pass
    def update(self, percent, msg=None):
        return True
    def done(self, error=None):
        pass


def percent_done(current, total):
    """current/total as a percentage clamped to [0, 100]; an empty loop is done."""
    if total <= 0:
        return 100.0
    return min(100.0, max(0.0, current * 100.0 / total))


class ProgressCallback(object):
    """Drives one bar through one loop: start, tick per step, end."""
    def __init__(self, title, msg, bar=NullProgressBar, frequency=10):
        self._title = title
        self._msg = msg
        self._bar = bar
        self.frequency = frequency
        self._dialog = None
        self.position = 0

    def start(self):
        """Creates the bar; a second start() replaces it."""
        self._dialog = self._bar(self._title, self._msg, 100)
        self.position = 0

    @property
    def running(self):
        return self._dialog is not None

    def update(self, current, total, msg=None):
        """Reports current out of total right away."""
        self.position = current
        if self._dialog is None:
            return True
        return self._dialog.update(percent_done(current, total), msg)

    def tick(self, current, total, msg=None):
        """update() on every 'frequency'-th step and on the last one."""
        self.position = current
        if current % self._frequency == 0 or current >= total:
            return self.update(current, total, msg)
        return True

    def end(self, error=None):
        """Closes the bar, passing on any failure message; safe to repeat."""
        if self._dialog is None:
            return
        dialog, self._dialog = self._dialog, None
        dialog.done(error)

    @property
    def frequency(self):
        """how many steps between calls to update()."""
        return self._frequency
    @frequency.setter
    def frequency(self, value):
        self._frequency = max(1, int(value))


def null_progress(title="", msg=""):
    """A callback that reports nowhere."""
    return ProgressCallback(title, msg, NullProgressBar)
