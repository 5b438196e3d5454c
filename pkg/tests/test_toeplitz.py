import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hrisloc.toeplitz import (
    ToeplitzGenerator,
    TwoLevelToeplitzGenerator,
    project_toeplitz,
    project_toeplitz2,
    toeplitz_from_generator,
)


def test_scalar_generator():
    gen = ToeplitzGenerator(first_col=np.array([1.0]))
    assert np.allclose(gen.matrix(), [[1.0]])


def test_hermitian_fill():
    gen = ToeplitzGenerator(first_col=np.array([2.0, 1j]))
    expected = np.array([[2.0, -1j], [1j, 2.0]])
    assert np.allclose(toeplitz_from_generator(gen), expected)


def test_generator_first_entry_made_real():
    gen = ToeplitzGenerator(first_col=np.array([2.0 + 3.0j, 1.0]))
    assert gen.first_col[0] == 2.0 + 0.0j


def test_round_trip_projection_identity():
    rng = np.random.default_rng(0)
    col = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    col[0] = abs(col[0])
    gen = ToeplitzGenerator(first_col=col)
    back = project_toeplitz(gen.matrix())
    assert np.allclose(back.first_col, gen.first_col, atol=1e-13)


def test_diagonal_mean_projection():
    gen = project_toeplitz(np.array([[1.0, 0.0], [0.0, 3.0]]))
    assert np.allclose(gen.first_col, [2.0, 0.0])


@given(st.integers(2, 8), st.integers(0, 1000))
@settings(max_examples=40, deadline=None)
def test_projection_non_expansive(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    b = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    pa = project_toeplitz(a).matrix()
    pb = project_toeplitz(b).matrix()
    assert np.linalg.norm(pa - pb) <= np.linalg.norm(a - b) + 1e-12


def test_projection_is_least_squares_optimal():
    # The projection beats random Toeplitz competitors in Frobenius distance.
    rng = np.random.default_rng(3)
    a = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
    best = project_toeplitz(a).matrix()
    d0 = np.linalg.norm(a - best)
    for _ in range(50):
        col = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        col[0] = col[0].real
        competitor = ToeplitzGenerator(first_col=col).matrix()
        assert d0 <= np.linalg.norm(a - competitor) + 1e-12


def test_two_level_round_trip():
    rng = np.random.default_rng(1)
    levels = (3, 4)
    table = rng.standard_normal((5, 7)) + 1j * rng.standard_normal((5, 7))
    table = 0.5 * (table + table[::-1, ::-1].conj())
    gen = TwoLevelToeplitzGenerator(table=table, levels=levels)
    mat = gen.matrix()
    assert mat.shape == (12, 12)
    assert np.allclose(mat, mat.conj().T, atol=1e-13)
    back = project_toeplitz2(mat, levels)
    assert np.allclose(back.table, gen.table, atol=1e-13)


def test_two_level_idempotent_projection():
    rng = np.random.default_rng(2)
    a = rng.standard_normal((12, 12)) + 1j * rng.standard_normal((12, 12))
    gen = project_toeplitz2(a, (3, 4))
    again = project_toeplitz2(gen.matrix(), (3, 4))
    assert np.allclose(again.table, gen.table, atol=1e-13)


def test_two_level_matches_kron_structure():
    # A Kronecker product of two Hermitian Toeplitz matrices is two-level
    # Toeplitz with the inner factor as the fast index.
    inner = ToeplitzGenerator(first_col=np.array([2.0, 0.5 + 0.2j, 0.1j])).matrix()
    outer = ToeplitzGenerator(first_col=np.array([1.0, -0.3j])).matrix()
    mat = np.kron(outer, inner)
    gen = project_toeplitz2(mat, (3, 2))
    assert np.allclose(gen.matrix(), mat, atol=1e-13)


def test_shape_validation():
    with pytest.raises(ValueError):
        project_toeplitz(np.ones((2, 3)))
    with pytest.raises(ValueError):
        project_toeplitz2(np.eye(5), (2, 2))
    with pytest.raises(ValueError):
        TwoLevelToeplitzGenerator(table=np.ones((2, 2)), levels=(2, 2))
