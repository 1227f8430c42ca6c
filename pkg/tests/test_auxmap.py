import numpy as np
import pytest

from qdft.auxmap import (
    AuxHamiltonian,
    KsMatrix,
    aux_to_dense,
    default_padding,
    map_ks_to_aux,
    select_spin_block,
)
from qdft.pauli import PauliSum


def random_symmetric(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n))
    return a + a.T


def test_ks_matrix_validation():
    with pytest.raises(ValueError, match="symmetric"):
        KsMatrix(h=np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(ValueError, match="finite"):
        KsMatrix(h=np.array([[np.inf, 0.0], [0.0, 0.0]]))


def test_ks_matrix_text_roundtrip():
    ks = KsMatrix(h=random_symmetric(3, 0))
    back = KsMatrix.from_text(ks.to_text())
    assert np.array_equal(back.h, ks.h)


def test_select_spin_block_identical_blocks():
    block = random_symmetric(2, 1)
    full = np.block([[block, np.zeros((2, 2))], [np.zeros((2, 2)), block]])
    ks = select_spin_block(KsMatrix(h=full, spin_block="full"))
    assert np.array_equal(ks.h, block)
    assert ks.spin_block == "alpha"


def test_select_spin_block_h8_shape():
    block = random_symmetric(8, 2)
    full = np.block([[block, np.zeros((8, 8))], [np.zeros((8, 8)), block]])
    ks = select_spin_block(KsMatrix(h=full, spin_block="full"))
    assert ks.n == 8
    assert map_ks_to_aux(ks).num_qubits == 3


def test_select_spin_block_rejects_open_shell():
    block = random_symmetric(2, 3)
    other = block.copy()
    other[0, 0] += 1e-3
    full = np.block([[block, np.zeros((2, 2))], [np.zeros((2, 2)), other]])
    with pytest.raises(ValueError, match="open-shell"):
        select_spin_block(KsMatrix(h=full, spin_block="full"))


def test_map_two_level_diagonal():
    ks = KsMatrix(h=np.diag([0.3, -0.7]))
    aux = map_ks_to_aux(ks)
    assert aux.pauli.coefficient("I") == pytest.approx((0.3 - 0.7) / 2)
    assert aux.pauli.coefficient("Z") == pytest.approx((0.3 + 0.7) / 2)


def test_map_padding_eigenvalues():
    ks = KsMatrix(h=np.diag([1.0, 2.0, 3.0]))
    aux = map_ks_to_aux(ks, padding=100.0)
    eigs = np.linalg.eigvalsh(aux_to_dense(aux))
    assert np.allclose(sorted(eigs), [1.0, 2.0, 3.0, 100.0], atol=1e-12)


def test_map_roundtrip_equals_padded_matrix():
    ks = KsMatrix(h=random_symmetric(3, 4))
    aux = map_ks_to_aux(ks, padding=50.0)
    dense = aux_to_dense(aux)
    assert np.max(np.abs(dense[:3, :3] - ks.h)) < 1e-12
    assert dense[3, 3] == pytest.approx(50.0)
    assert np.max(np.abs(dense[3, :3])) < 1e-12


def test_spectrum_preserved_random_sizes():
    for seed, n in enumerate([2, 3, 5, 8, 11, 16]):
        ks = KsMatrix(h=random_symmetric(n, 10 + seed))
        aux = map_ks_to_aux(ks)
        dim = 1 << aux.num_qubits
        expected = np.sort(
            np.concatenate([np.linalg.eigvalsh(ks.h), [aux.padding_value] * (dim - n)])
        )
        got = np.sort(np.linalg.eigvalsh(aux_to_dense(aux)))
        assert np.max(np.abs(got - expected)) < 1e-10


def test_index_map_covariance():
    ks = KsMatrix(h=random_symmetric(4, 5))
    rng = np.random.default_rng(6)
    perm = tuple(rng.permutation(4))
    aux_id = map_ks_to_aux(ks)
    aux_pi = map_ks_to_aux(ks, index_map=perm)
    dense_id = aux_to_dense(aux_id)
    dense_pi = aux_to_dense(aux_pi)
    p = np.zeros((4, 4))
    p[list(perm), np.arange(4)] = 1.0
    assert np.max(np.abs(dense_pi - p @ dense_id @ p.T)) < 1e-12
    assert np.allclose(
        np.sort(np.linalg.eigvalsh(dense_pi)), np.sort(np.linalg.eigvalsh(dense_id)), atol=1e-10
    )


def test_index_map_must_be_permutation():
    ks = KsMatrix(h=random_symmetric(3, 7))
    with pytest.raises(ValueError, match="permutation"):
        map_ks_to_aux(ks, index_map=(0, 1, 1, 2))


def test_low_padding_warns():
    ks = KsMatrix(h=random_symmetric(3, 8))
    with pytest.warns(UserWarning, match="padding"):
        map_ks_to_aux(ks, padding=-100.0)


def test_default_padding_above_spectrum():
    h = random_symmetric(5, 9)
    assert default_padding(h) > np.max(np.linalg.eigvalsh(h))


def test_aux_to_dense_trivial_sums():
    aux = AuxHamiltonian(PauliSum({"Z": 1.0}, 1), n_logical=2, padding_value=0.0, index_map=(0, 1))
    assert np.array_equal(aux_to_dense(aux), np.diag([1.0, -1.0]))
    aux = AuxHamiltonian(PauliSum({"X": 0.5}, 1), n_logical=2, padding_value=0.0, index_map=(0, 1))
    assert np.array_equal(aux_to_dense(aux), np.array([[0.0, 0.5], [0.5, 0.0]]))


def test_dense_guard():
    aux = AuxHamiltonian(
        PauliSum({"I" * 13: 1.0}, 13), n_logical=2**13, padding_value=0.0, index_map=tuple(range(2**13))
    )
    with pytest.raises(ValueError, match="dense"):
        aux_to_dense(aux)
