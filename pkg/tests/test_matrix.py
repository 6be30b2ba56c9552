import numpy as np
import numpy.testing as npt
import pytest

from seqcombine.errors import DimensionMismatch, NotPositiveDefinite
from seqcombine.matrix import chol_decompose, padded_geninverse, quad_form

from conftest import random_spd


def test_chol_identity():
    npt.assert_allclose(chol_decompose(np.eye(3)), np.eye(3))


def test_chol_reconstructs_2x2():
    m = np.array([[4.0, 2.0], [2.0, 3.0]])
    low = chol_decompose(m)
    npt.assert_allclose(low @ low.T, m, atol=1e-12)
    assert np.allclose(np.triu(low, 1), 0.0)


def test_chol_rejects_indefinite():
    with pytest.raises(NotPositiveDefinite):
        chol_decompose(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_chol_rejects_tiny_pivot():
    m = np.array([[1.0, 1.0], [1.0, 1.0 + 1e-14]])
    with pytest.raises(NotPositiveDefinite):
        chol_decompose(m)


def test_chol_rejects_asymmetric():
    with pytest.raises(DimensionMismatch):
        chol_decompose(np.array([[1.0, 0.5], [0.2, 1.0]]))


def test_chol_random_spd_reconstruction():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        dim = rng.integers(2, 9)
        m = random_spd(rng, dim)
        low = chol_decompose(m)
        err = np.linalg.norm(low @ low.T - m) / np.linalg.norm(m)
        assert err < 1e-10


def test_padded_geninverse_identity():
    out = padded_geninverse(np.eye(5), 3)
    expected = np.zeros((5, 5))
    expected[:3, :3] = np.eye(3)
    npt.assert_allclose(out, expected)


def test_padded_geninverse_2x2_closed_form():
    rng = np.random.default_rng(11)
    v = random_spd(rng, 5)
    out = padded_geninverse(v, 2)
    a, b, c = v[0, 0], v[0, 1], v[1, 1]
    det = a * c - b * b
    expected = np.array([[c, -b], [-b, a]]) / det
    npt.assert_allclose(out[:2, :2], expected, rtol=1e-12)
    assert np.all(out[2:, :] == 0.0)
    assert np.all(out[:, 2:] == 0.0)


def test_padded_geninverse_full_block():
    rng = np.random.default_rng(13)
    v = random_spd(rng, 4)
    out = padded_geninverse(v, 4)
    npt.assert_allclose(out @ v @ out, out, atol=1e-10)


def test_padded_geninverse_moore_penrose_identities():
    rng = np.random.default_rng(17)
    for _ in range(1000):
        dim = int(rng.integers(2, 9))
        j = int(rng.integers(1, dim + 1))
        v = random_spd(rng, dim)
        vj = np.zeros_like(v)
        vj[:j, :j] = v[:j, :j]
        g = padded_geninverse(v, j)
        scale = np.linalg.norm(vj)
        assert np.linalg.norm(g @ vj @ g - g) < 1e-10 * np.linalg.norm(g)
        assert np.linalg.norm(vj @ g @ vj - vj) < 1e-10 * scale
        assert np.linalg.norm((vj @ g).T - vj @ g) < 1e-10


def test_quad_form_unit_vector():
    assert quad_form(np.array([1.0, 0.0]), np.eye(2)) == 1.0


def test_quad_form_hand_expansion():
    assert quad_form(np.array([1.0, 1.0]), np.array([[2.0, 1.0], [1.0, 2.0]])) == pytest.approx(6.0)


def test_quad_form_zero_vector():
    assert quad_form(np.zeros(3), np.eye(3)) == 0.0


def test_quad_form_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        quad_form(np.ones(3), np.eye(2))


def test_quad_form_nonnegative_on_spd():
    rng = np.random.default_rng(23)
    for _ in range(200):
        dim = int(rng.integers(1, 9))
        m = random_spd(rng, dim)
        chol_decompose(m)
        v = rng.normal(size=dim)
        assert quad_form(v, m) >= 0.0
