"""Eigensolver checks against the numpy LAPACK wrapper as oracle."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from quasiwork.errors import (
    DimensionMismatchError,
    NotHermitianError,
    WrongDimensionError,
)
from quasiwork.linalg import (
    MAX_DIM,
    HermitianEig,
    as_complex_matrix,
    expm_hermitian,
    hermitian_eig,
    phase_conjugate,
    require_hermitian,
    tensor_product,
)

RNG = np.random.default_rng(20240831)

SQRT_HALF = np.sqrt(0.5)


def random_hermitian(d: int, rng=RNG, scale: float = 1.0) -> np.ndarray:
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * 0.5 * (a + a.conj().T)


def check_decomposition(h: np.ndarray, eig: HermitianEig, tol: float) -> None:
    d = h.shape[0]
    scale = max(1.0, float(np.max(np.abs(h))))
    assert eig.values.dtype == np.float64
    assert np.all(np.diff(eig.values) >= 0.0), "values must be ascending"
    assert_allclose(eig.vectors.conj().T @ eig.vectors, np.eye(d),
                    atol=tol * scale, rtol=0.0)
    assert_allclose(eig.reconstruct(), h, atol=tol * scale, rtol=0.0)


@pytest.mark.parametrize("d", [1, 2, 3, 5, 8, 16])
def test_matches_lapack_spectrum(d):
    for trial in range(5):
        h = random_hermitian(d)
        eig = hermitian_eig(h)
        check_decomposition(h, eig, 1e-13)
        assert_allclose(eig.values, np.linalg.eigvalsh(h), atol=1e-12, rtol=0.0)


def test_half_sigma_x_frozen():
    h = np.array([[0.0, 0.5], [0.5, 0.0]], dtype=complex)
    eig = hermitian_eig(h)
    assert_allclose(eig.values, [-0.5, 0.5], atol=1e-15, rtol=0.0)
    expected = np.array([[SQRT_HALF, SQRT_HALF], [-SQRT_HALF, SQRT_HALF]])
    assert_allclose(eig.vectors, expected, atol=1e-14, rtol=0.0)


def test_gauge_pivot_is_real_positive():
    for trial in range(20):
        h = random_hermitian(4)
        vec = hermitian_eig(h).vectors
        for col in vec.T:
            pivot = col[np.argmax(np.abs(col))]
            assert abs(pivot.imag) <= 1e-14 * abs(pivot)
            assert pivot.real > 0.0


def test_deterministic_bitwise():
    h = random_hermitian(6)
    a = hermitian_eig(h)
    b = hermitian_eig(h)
    assert np.array_equal(a.values, b.values)
    assert np.array_equal(a.vectors, b.vectors)


def test_degenerate_spectrum():
    # two-fold degeneracy rotated away from the computational basis
    q = hermitian_eig(random_hermitian(3)).vectors
    h = (q * np.array([1.0, 1.0, 4.0])) @ q.conj().T
    eig = hermitian_eig(h)
    assert_allclose(eig.values, [1.0, 1.0, 4.0], atol=1e-12, rtol=0.0)
    check_decomposition(h, eig, 1e-12)


def test_identity_and_zero():
    eye = hermitian_eig(np.eye(3))
    assert_allclose(eye.values, np.ones(3), atol=1e-15, rtol=0.0)
    zero = hermitian_eig(np.zeros((2, 2)))
    assert np.array_equal(zero.values, np.zeros(2))
    assert_allclose(zero.vectors, np.eye(2), atol=0.0, rtol=0.0)


def test_tiny_and_large_scales():
    for scale in (1e-9, 1e6):
        h = random_hermitian(4, scale=scale)
        check_decomposition(h, hermitian_eig(h), 1e-12)


@settings(max_examples=40, deadline=None)
@given(d=st.integers(min_value=1, max_value=6), seed=st.integers(0, 2**31))
def test_random_property(d, seed):
    h = random_hermitian(d, rng=np.random.default_rng(seed))
    eig = hermitian_eig(h)
    check_decomposition(h, eig, 1e-12)
    assert_allclose(eig.values, np.linalg.eigvalsh(h), atol=1e-11, rtol=0.0)


def test_rejects_non_hermitian():
    with pytest.raises(NotHermitianError):
        hermitian_eig(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(NotHermitianError):
        require_hermitian(np.array([[0.0, 1e-6j], [0.0, 0.0]]))


def test_rejects_bad_shapes():
    with pytest.raises(WrongDimensionError):
        as_complex_matrix(np.zeros(3))
    with pytest.raises(WrongDimensionError):
        as_complex_matrix(np.zeros((2, 3)))
    with pytest.raises(WrongDimensionError):
        hermitian_eig(np.eye(MAX_DIM + 1))


def test_expm_sigma_z_quarter_turn():
    sigma_z = np.diag([1.0, -1.0]).astype(complex)
    u = expm_hermitian(sigma_z, np.pi / 2)
    assert_allclose(u, np.diag([-1j, 1j]), atol=1e-15, rtol=0.0)


def test_expm_is_unitary_and_reuses_gauge():
    h = random_hermitian(5)
    u = expm_hermitian(h, 0.37)
    assert_allclose(u @ u.conj().T, np.eye(5), atol=1e-13, rtol=0.0)
    eig = hermitian_eig(h)
    assert np.array_equal(u, phase_conjugate(eig, 0.37))


def test_tensor_product_matches_kron():
    a = random_hermitian(2)
    b = random_hermitian(3)
    assert np.array_equal(tensor_product(a, b), np.kron(a, b))
    with pytest.raises(DimensionMismatchError):
        tensor_product(np.eye(8), np.eye(4))
