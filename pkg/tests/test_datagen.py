import numpy as np
import numpy.testing as npt
import pytest

from pivot.datagen import (Sample, SampleSet, SurrogateSpec, ToySpec,
                           fingerprint, generate_surrogate_physics,
                           generate_toy, read_dataset, write_dataset)
from pivot.errors import DatasetParseError, RejectedInputError, SchemaError


def test_toy_is_deterministic():
    a = generate_toy(ToySpec(n=500, seed=1))
    b = generate_toy(ToySpec(n=500, seed=1))
    c = generate_toy(ToySpec(n=500, seed=2))
    assert a == b
    assert a != c
    assert a.n_features == 2 and len(a) == 500


def test_toy_distribution():
    data = generate_toy(ToySpec(n=20000, seed=0))
    assert set(np.unique(data.y)) == {0, 1}
    assert np.mean(data.y) == pytest.approx(0.5, abs=0.02)
    assert np.std(data.z) == pytest.approx(1.0, abs=0.03)
    sig = data.with_label(1)
    # class 1 given z is centred on (1, 1 + z)
    npt.assert_allclose(np.mean(sig.x[:, 0]), 1.0, atol=0.05)
    npt.assert_allclose(np.mean(sig.x[:, 1] - sig.z), 1.0, atol=0.05)
    bkg = data.with_label(0)
    assert np.corrcoef(bkg.x.T)[0, 1] == pytest.approx(-0.5, abs=0.03)


def test_toy_sample_at_holds_the_nuisance():
    spec = ToySpec()
    samples = spec.sample_at(1.5, 300, seed=4)
    assert np.all(samples.z == 1.5)
    assert spec.sample_at(1.5, 300, seed=4) == samples


def test_toy_spec_validation():
    with pytest.raises(RejectedInputError):
        ToySpec(n=0)
    with pytest.raises(RejectedInputError):
        ToySpec(z_prior_sigma=0.0)


def test_surrogate_event_totals():
    data = generate_surrogate_physics(2000, seed=3, s_total=100.0, b_total=1000.0)
    assert np.sum(data.weight[data.y == 1]) == pytest.approx(100.0)
    assert np.sum(data.weight[data.y == 0]) == pytest.approx(1000.0)
    assert set(np.unique(data.z)) == {0.0, 1.0}
    assert data.n_features == 8


def test_surrogate_pileup_only_moves_affected_features():
    spec = SurrogateSpec(n=100, affected_features=(0, 2))
    clean = spec.sample_at(0.0, 400, seed=9)
    piled = spec.sample_at(1.0, 400, seed=9)
    npt.assert_array_equal(clean.y, piled.y)
    untouched = [1, 3, 4, 5, 6, 7]
    npt.assert_array_equal(clean.x[:, untouched], piled.x[:, untouched])
    assert np.mean(piled.x[:, [0, 2]] - clean.x[:, [0, 2]]) == \
        pytest.approx(0.5, abs=0.1)


def test_surrogate_spec_validation():
    with pytest.raises(RejectedInputError):
        SurrogateSpec(s_total=100.0)
    with pytest.raises(RejectedInputError):
        SurrogateSpec(affected_features=(9,))
    with pytest.raises(RejectedInputError):
        SurrogateSpec(signal_shift=(1.0, 2.0))


def test_sample_set_reads_like_a_list():
    data = SampleSet([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]], [0, 1, 1],
                     [0.1, 0.2, 0.3])
    first = data[0]
    assert isinstance(first, Sample)
    assert first == Sample(np.array([1.0, 2.0]), 0, 0.1, 1.0)
    assert len(data[1:]) == 2
    assert len(data.with_label(1)) == 2
    assert len(data.with_nuisance(0.3)) == 1
    assert SampleSet.from_samples(list(data)) == data


def test_sample_set_validation():
    with pytest.raises(SchemaError):
        SampleSet([[1.0], [2.0]], [0, 2], [0.0, 0.0])
    with pytest.raises(SchemaError) as e:
        SampleSet([[1.0], [2.0]], [0, 1], [0.0, 0.0], [1.0, -1.0])
    assert e.value.row == 1
    with pytest.raises(SchemaError):
        SampleSet([[1.0], [2.0]], [0, 1], [0.0])


def test_dataset_file_round_trip(tmp_path):
    data = generate_surrogate_physics(300, seed=5, s_total=10.0, b_total=90.0)
    path = tmp_path / "data.csv"
    write_dataset(data, path)
    assert path.read_text().splitlines()[0] == \
        "x1,x2,x3,x4,x5,x6,x7,x8,y,z,weight"
    assert read_dataset(path) == data


def test_header_only_file_is_empty(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("x1,x2,y,z,weight\n")
    data = read_dataset(path)
    assert len(data) == 0 and data.n_features == 2


@pytest.mark.parametrize("text, error", [
    ("x1,y,z\n1.0,0,0.0\n", SchemaError),
    ("x1,y,z,weight\n1.0,3,0.0,1.0\n", SchemaError),
    ("x1,y,z,weight\n1.0,1,0.0,0.0\n", SchemaError),
    ("x1,y,z,weight\n1.0,1,0.0,1.0\nabc,1,0.0,1.0\n", DatasetParseError),
    ("x1,y,z,weight\n1.0,1,0.0\n", DatasetParseError),
])
def test_bad_dataset_files(tmp_path, text, error):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(error):
        read_dataset(path)


def test_parse_error_names_the_line(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x1,y,z,weight\n1.0,1,0.0,1.0\nabc,1,0.0,1.0\n")
    with pytest.raises(DatasetParseError) as e:
        read_dataset(path)
    assert e.value.line == 3


def test_fingerprint(tmp_path):
    data = generate_toy(ToySpec(n=50, seed=0))
    write_dataset(data, tmp_path / "a.csv")
    write_dataset(data, tmp_path / "b.csv")
    assert fingerprint(tmp_path / "a.csv") == fingerprint(tmp_path / "b.csv")
    assert len(fingerprint(tmp_path / "a.csv")) == 64


def test_toy_nuisance_correlates_with_signal_x2():
    sig = generate_toy(ToySpec(n=40000, seed=1)).with_label(1)
    # x2 = 1 + z + noise, both of unit variance
    assert np.corrcoef(sig.z, sig.x[:, 1])[0, 1] == pytest.approx(
        1.0 / np.sqrt(2.0), abs=0.02)


def test_surrogate_without_pileup_ignores_the_nuisance():
    spec = SurrogateSpec(n=100, pileup_shift=0.0, pileup_noise=0.0)
    clean = spec.sample_at(0.0, 500, seed=2)
    piled = spec.sample_at(1.0, 500, seed=2)
    npt.assert_array_equal(clean.x, piled.x)
    npt.assert_array_equal(clean.y, piled.y)


def test_class_totals_rescaling():
    data = SampleSet([[0.0], [1.0], [2.0], [3.0]], [1, 0, 0, 1], [0, 0, 0, 0],
                     [1.0, 2.0, 2.0, 3.0])
    assert data.class_totals() == (4.0, 4.0)
    scaled = data.with_class_totals(100.0, 1000.0)
    npt.assert_allclose(scaled.weight, [25.0, 500.0, 500.0, 75.0])
    with pytest.raises(SchemaError):
        data.with_label(0).with_class_totals(1.0, 1.0)
