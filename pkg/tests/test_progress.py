import pytest

from pivot.progress import ProgressCallback, null_progress, percent_done


class RecordingBar(object):
    instances = []

    def __init__(self, title, msg, max=100):
        self.title = title
        self.updates = []
        self.closed = []
        RecordingBar.instances.append(self)

    def update(self, percent, msg=None):
        self.updates.append((percent, msg))
        return True

    def done(self, error=None):
        self.closed.append(error)


@pytest.fixture(autouse=True)
def fresh_bars():
    RecordingBar.instances = []


@pytest.mark.parametrize("current, total, expected", [
    (0, 10, 0.0), (5, 10, 50.0), (10, 10, 100.0), (12, 10, 100.0), (0, 0, 100.0),
])
def test_percent_done(current, total, expected):
    assert percent_done(current, total) == expected


def test_tick_is_throttled_but_reports_the_last_step():
    progress = ProgressCallback("training", "", RecordingBar, frequency=4)
    progress.start()
    for t in range(1, 11):
        progress.tick(t, 10, "t=%d" % t)
    progress.end()
    bar = RecordingBar.instances[0]
    assert bar.title == "training"
    assert bar.updates == [(40.0, "t=4"), (80.0, "t=8"), (100.0, "t=10")]
    assert bar.closed == [None]
    assert progress.position == 10


def test_end_passes_the_error_once():
    progress = ProgressCallback("pretraining", "", RecordingBar)
    progress.start()
    assert progress.running
    progress.end("diverged")
    progress.end()
    assert RecordingBar.instances[0].closed == ["diverged"]
    assert not progress.running


def test_frequency_is_at_least_one():
    progress = null_progress()
    progress.frequency = 0
    assert progress.frequency == 1
    # ticks before start() are recorded but go nowhere
    assert progress.tick(3, 5)
    assert progress.position == 3
