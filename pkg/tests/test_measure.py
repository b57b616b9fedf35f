import math

import numpy as np
import pytest

from ifscub.errors import ValidationError
from ifscub.ifs_core import IFS
from ifscub.measure import MeasureOrigin, MeasureSpec, hausdorff_dimension, hausdorff_weights


@pytest.mark.parametrize(
    "rhos, expected",
    [
        ([1 / 3, 1 / 3], math.log(2) / math.log(3)),
        ([1 / 3] * 5, math.log(5) / math.log(3)),
        ([1 / 2] * 4, 2.0),
        ([1 / 2, 1 / 4], math.log2((1 + math.sqrt(5)) / 2)),
        ([(math.sqrt(5) - 1) / 2] * 3, math.log(3) / math.log(2 / (math.sqrt(5) - 1))),
    ],
)
def test_hausdorff_dimension(rhos, expected: float):
    d = hausdorff_dimension(rhos)
    assert d == pytest.approx(expected, abs=1e-13)
    assert math.fsum(r**d for r in rhos) == pytest.approx(1.0, abs=1e-13)


@pytest.mark.parametrize("rhos", [[0.5], [0.5, 1.0], [0.0, 0.5], []])
def test_hausdorff_dimension_rejects(rhos):
    with pytest.raises(ValidationError):
        hausdorff_dimension(rhos)


def test_hausdorff_weights_of_similitudes():
    ifs = IFS.from_arrays([([[0.5]], [0.0]), ([[0.25]], [0.75])])
    measure = hausdorff_weights(ifs)
    d = math.log2((1 + math.sqrt(5)) / 2)
    np.testing.assert_allclose(measure.weights, [0.5**d, 0.25**d], rtol=1e-13)
    assert measure.origin == MeasureOrigin.HAUSDORFF
    assert measure.dimension == pytest.approx(d)
    assert not measure.formal


def test_hausdorff_weights_are_formal_for_non_similar_maps(caplog):
    ifs = IFS.from_arrays([(np.diag([0.5, 0.25]), [0.0, 0.0]), (np.diag([0.5, 0.5]), [0.5, 0.5])])
    measure = hausdorff_weights(ifs)
    assert measure.formal
    np.testing.assert_allclose(measure.weights, [0.5, 0.5])
    assert "formal" in caplog.text


@pytest.mark.parametrize(
    "values",
    [
        [0.5, 0.4],
        [0.5, 0.6],
        [1.0, 0.0],
        [1.2, -0.2],
        [0.5, math.nan],
        [],
    ],
)
def test_invalid_weights(values):
    with pytest.raises(ValidationError):
        MeasureSpec.explicit(values)


def test_weights_close_to_one_are_renormalised():
    measure = MeasureSpec.explicit([0.2] * 4 + [0.2 + 5e-7])
    assert math.fsum(measure.weights) == pytest.approx(1.0, abs=1e-15)
    assert not measure.weights.flags.writeable


def test_uniform_and_matches():
    measure = MeasureSpec.uniform(5)
    np.testing.assert_allclose(measure.weights, [0.2] * 5)
    assert len(measure) == 5
    ifs = IFS.from_arrays([([[0.5]], [0.0]), ([[0.5]], [0.5])])
    assert not measure.matches(ifs)
    assert MeasureSpec.uniform(2).matches(ifs)


def test_hausdorff_dimension_on_random_factors():
    rng = np.random.default_rng(17)
    for _ in range(1000):
        rhos = rng.uniform(0.01, 0.99, int(rng.integers(2, 9)))
        d = hausdorff_dimension(rhos)
        assert abs(math.fsum(rhos**d) - 1.0) <= 1e-12
        measure = hausdorff_weights(IFS.from_arrays([([[r]], [0.0]) for r in rhos]))
        assert abs(math.fsum(measure.weights) - 1.0) <= 1e-12


def test_hausdorff_dimension_grows_with_every_factor():
    rng = np.random.default_rng(23)
    for _ in range(300):
        rhos = rng.uniform(0.05, 0.95, int(rng.integers(2, 6)))
        d = hausdorff_dimension(rhos)
        index = int(rng.integers(rhos.size))
        larger = rhos.copy()
        larger[index] += (1.0 - larger[index]) * rng.uniform(0.05, 0.5)
        d_larger = hausdorff_dimension(larger)
        # A factor whose power rho^d underflows next to the others cannot move d measurably
        if math.fsum(larger**d) - 1.0 > 1e-9:
            assert d_larger > d
        else:
            assert d_larger >= d - 1e-13
