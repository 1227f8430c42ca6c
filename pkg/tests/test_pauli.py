import itertools

import numpy as np
import pytest

from qdft.pauli import (
    MeasurementGroup,
    PauliString,
    PauliSum,
    decompose_hermitian,
    group_commuting,
    pauli_action,
    projector_pair_to_pauli,
    qubitwise_commutes,
)

SINGLE = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def kron_dense(label):
    """Independent dense builder: qubit 1 is leftmost in the label and least significant."""
    mat = np.eye(1, dtype=complex)
    for c in reversed(label):
        mat = np.kron(mat, SINGLE[c])
    return mat


def ketbra_dense(i, j, m):
    mat = np.zeros((1 << m, 1 << m), dtype=complex)
    mat[i, j] = 1.0
    if i != j:
        mat[j, i] = 1.0
    return mat


def all_labels(m):
    return ["".join(p) for p in itertools.product("IXYZ", repeat=m)]


def test_pauli_action_matches_kron_for_all_labels_up_to_3_qubits():
    for m in (1, 2, 3):
        for label in all_labels(m):
            targets, phases = pauli_action(label)
            dense = np.zeros((1 << m, 1 << m), dtype=complex)
            dense[targets, np.arange(1 << m)] = phases
            assert np.allclose(dense, kron_dense(label), atol=0), label


def test_pauli_string_validation():
    with pytest.raises(ValueError):
        PauliString("XQ")
    with pytest.raises(ValueError):
        PauliString("")
    assert PauliString("XZI").num_qubits == 3


def test_decompose_z():
    psum = decompose_hermitian(np.diag([1.0, -1.0]))
    assert psum.num_terms == 1
    assert psum.coefficient("Z") == pytest.approx(1.0)


def test_decompose_identity():
    for m in (1, 2, 3):
        psum = decompose_hermitian(np.eye(1 << m))
        assert psum.num_terms == 1
        assert psum.coefficient("I" * m) == pytest.approx(1.0)


def test_decompose_random_symmetric_roundtrip():
    rng = np.random.default_rng(7)
    h = rng.normal(size=(8, 8))
    h = h + h.T
    psum = decompose_hermitian(h, tol=0.0)
    rebuilt = psum.to_dense()
    assert np.max(np.abs(rebuilt - h)) < 1e-12


def test_decompose_random_hermitian_roundtrip_small_m():
    rng = np.random.default_rng(11)
    for m in (1, 2, 3, 4):
        dim = 1 << m
        a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        h = a + a.conj().T
        rebuilt = decompose_hermitian(h, tol=0.0).to_dense()
        assert np.max(np.abs(rebuilt - h)) < 1e-12


def test_decompose_rejects_bad_input():
    with pytest.raises(ValueError, match="Hermitian"):
        decompose_hermitian(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(ValueError, match="power of two"):
        decompose_hermitian(np.eye(3))


def test_projector_pair_single_qubit_cases():
    x = projector_pair_to_pauli(0, 1, 1)
    assert x.num_terms == 1
    assert x.coefficient("X") == pytest.approx(1.0)

    p0 = projector_pair_to_pauli(0, 0, 1)
    assert p0.coefficient("I") == pytest.approx(0.5)
    assert p0.coefficient("Z") == pytest.approx(0.5)


def test_projector_pair_two_qubit_example():
    psum = projector_pair_to_pauli(0, 3, 2)
    assert psum.coefficient("XX") == pytest.approx(0.5)
    assert psum.coefficient("YY") == pytest.approx(-0.5)
    assert psum.num_terms == 2
    assert np.allclose(psum.to_dense(), ketbra_dense(0, 3, 2))


def test_projector_pair_rebuilds_exactly_for_all_pairs():
    for m in (1, 2, 3):
        dim = 1 << m
        for i in range(dim):
            for j in range(i, dim):
                dense = projector_pair_to_pauli(i, j, m).to_dense()
                assert np.max(np.abs(dense - ketbra_dense(i, j, m))) == 0.0, (i, j, m)


def test_projector_diagonals_sum_to_identity():
    for m in (1, 2, 3):
        total = projector_pair_to_pauli(0, 0, m)
        for i in range(1, 1 << m):
            total = total + projector_pair_to_pauli(i, i, m)
        assert total.num_terms == 1
        assert total.coefficient("I" * m) == pytest.approx(1.0)


def test_projector_index_out_of_range():
    with pytest.raises(ValueError):
        projector_pair_to_pauli(0, 4, 2)


def test_qubitwise_commutation():
    assert qubitwise_commutes("XI", "IX")
    assert not qubitwise_commutes("XI", "YI")
    assert not qubitwise_commutes("XY", "YX")  # commute globally, not qubit-wise


def test_grouping_all_z_single_group():
    psum = PauliSum({"ZII": 1.0, "IZI": 0.5, "ZZZ": -0.25}, 3)
    groups = group_commuting(psum)
    assert len(groups) == 1
    assert groups[0].basis == ("Z", "Z", "Z")


def test_grouping_x_and_z_two_groups():
    groups = group_commuting(PauliSum({"X": 1.0, "Z": 1.0}, 1))
    assert len(groups) == 2


def test_grouping_is_a_partition():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    psum = decompose_hermitian(a + a.conj().T, tol=0.0)
    groups = group_commuting(psum)
    seen = [s for g in groups for s in g.strings]
    assert sorted(seen) == psum.sorted_labels()
    for g in groups:
        for a_, b_ in itertools.combinations(g.strings, 2):
            assert qubitwise_commutes(a_, b_)


def test_grouping_deterministic():
    psum = PauliSum({"XX": 1.0, "YY": 1.0, "ZZ": 1.0, "XI": 0.5, "IZ": 0.5}, 2)
    g1 = group_commuting(psum)
    g2 = group_commuting(psum)
    assert [g.strings for g in g1] == [g.strings for g in g2]


def test_measurement_group_rejects_incompatible_members():
    with pytest.raises(ValueError):
        MeasurementGroup(strings=(PauliString("X"),), basis=("Z",))


def test_pauli_sum_prunes_small_terms():
    psum = PauliSum({"X": 1e-15, "Z": 1.0}, 1)
    assert psum.num_terms == 1


def test_pauli_sum_text_roundtrip():
    psum = PauliSum({"XZI": 0.5, "ZZZ": -0.125, "III": 2.0}, 3)
    text = psum.to_text()
    assert "0.5 0.0 XZI" in text
    back = PauliSum.from_text(text)
    assert back.num_qubits == 3
    for label, coeff in psum:
        assert back.coefficient(label) == coeff


def test_canonicalized_rejects_imaginary():
    psum = PauliSum({"X": 1.0 + 0.5j}, 1)
    with pytest.raises(ValueError, match="non-Hermitian"):
        psum.canonicalized()
