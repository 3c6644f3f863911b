import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from btlab.tensor import SymTensor2, omega, q_power, sym_product, vector_power
from conftest import brute_symmetrize, rotate_dense, rotation


def test_omega_values():
    assert omega(1) == pytest.approx(2.0)
    assert omega(2) == pytest.approx(2 * math.pi)
    assert omega(3) == pytest.approx(4 * math.pi)
    with pytest.raises(ValueError):
        omega(0)


def test_component_layout_rank2():
    T = SymTensor2.from_matrix([[3.0, 2.0], [2.0, 5.0]])
    assert T.comps.tolist() == [5.0, 2.0, 3.0]
    assert np.allclose(T.matrix(), [[3.0, 2.0], [2.0, 5.0]])
    assert np.allclose(T.full(), T.matrix())


def test_from_matrix_rejects_asymmetric():
    with pytest.raises(ValueError):
        SymTensor2.from_matrix([[1.0, 2.0], [0.0, 1.0]])


def test_components_are_read_only():
    T = SymTensor2([1.0, 2.0])
    with pytest.raises(ValueError):
        T.comps[0] = 5.0


def test_rank_mismatch_rejected():
    with pytest.raises(ValueError):
        SymTensor2([1.0, 2.0]) + SymTensor2([1.0, 2.0, 3.0])


def test_q_power_small_ranks():
    assert q_power(0).comps.tolist() == [1.0]
    assert q_power(2).comps.tolist() == [1.0, 0.0, 1.0]
    assert np.allclose(q_power(4).comps, [1.0, 0.0, 1.0 / 3.0, 0.0, 1.0])


def test_q_power_rejects_odd():
    with pytest.raises(ValueError):
        q_power(3)


@pytest.mark.parametrize("s", [2, 4, 6])
def test_q_power_matches_brute_symmetrization(s):
    eye = np.eye(2)
    dense = eye
    for _ in range(s // 2 - 1):
        dense = np.multiply.outer(dense, eye)
    expected = brute_symmetrize(dense)
    assert np.allclose(q_power(s).full(), expected, atol=1e-14)


def _random_sym(rng, rank):
    return SymTensor2(rng.normal(size=rank + 1))


@pytest.mark.parametrize("r,s", [(1, 1), (2, 1), (2, 2), (3, 2)])
def test_sym_product_matches_brute_force(rng, r, s):
    a, b = _random_sym(rng, r), _random_sym(rng, s)
    expected = brute_symmetrize(np.multiply.outer(a.full(), b.full()))
    assert np.allclose(sym_product(a, b).full(), expected, atol=1e-12)


def test_vector_power():
    v = np.array([0.3, -0.7])
    dense = np.multiply.outer(np.multiply.outer(v, v), v)
    assert np.allclose(vector_power(v, 3).full(), dense)


def test_rotate_rank2_matches_matrix_conjugation(rng):
    T = _random_sym(rng, 2)
    R = rotation(0.83)
    assert np.allclose(T.rotate(0.83).matrix(), R @ T.matrix() @ R.T, atol=1e-14)


@pytest.mark.parametrize("s", [1, 3, 4, 5])
def test_rotate_matches_dense(rng, s):
    T = _random_sym(rng, s)
    assert np.allclose(T.rotate(-1.1).full(), rotate_dense(T.full(), -1.1), atol=1e-12)


def test_rotate_quarter_turn_maps_e1_to_e2():
    e1 = SymTensor2([0.0, 1.0])  # (e2, e1) components
    assert np.allclose(e1.rotate(math.pi / 2).comps, [1.0, 0.0], atol=1e-15)


def test_trace_contracts_one_index_pair():
    T = q_power(4)
    dense = np.einsum("iikl->kl", T.full())
    assert np.allclose(T.trace().full(), dense)


@given(st.floats(-10, 10), st.floats(-10, 10), st.floats(-10, 10), st.floats(0, 2 * math.pi))
def test_rotation_preserves_trace_and_determinant(a, b, c, theta):
    T = SymTensor2([a, b, c])
    Rt = T.rotate(theta)
    m0, m1 = T.matrix(), Rt.matrix()
    assert np.trace(m1) == pytest.approx(np.trace(m0), abs=1e-9)
    assert np.linalg.det(m1) == pytest.approx(np.linalg.det(m0), abs=1e-7)
