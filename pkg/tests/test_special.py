import math

import numpy as np
import pytest
from scipy.special import jv

from polaronquench.special import bessel_j_miller, bessel_j_series


@pytest.mark.parametrize("order", [0, 1, 2, 5])
@pytest.mark.parametrize("x", [0.1, math.pi / 2, 3.0, 7.5])
def test_series_matches_reference(order, x):
    assert bessel_j_series(order, x) == pytest.approx(jv(order, x), abs=1e-14)


def test_negative_order_symmetry():
    assert bessel_j_series(-3, 1.2) == pytest.approx(-bessel_j_series(3, 1.2), abs=1e-16)


@pytest.mark.parametrize("x", [1e-6, 0.4, 2.5, 12.0, 40.0, -3.3])
def test_miller_matches_reference(x):
    n = 60
    got = bessel_j_miller(n, x)
    want = jv(np.arange(n + 1), x)
    assert np.max(np.abs(got - want)) < 1e-14


def test_miller_at_zero():
    assert bessel_j_miller(5, 0.0).tolist() == [1.0, 0, 0, 0, 0, 0]


def test_miller_rejects_negative_order():
    with pytest.raises(ValueError):
        bessel_j_miller(-1, 1.0)


def test_two_evaluations_agree():
    got = bessel_j_miller(8, 2.0)
    for p in range(9):
        assert got[p] == pytest.approx(bessel_j_series(p, 2.0), abs=1e-15)
