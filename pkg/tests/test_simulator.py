import math

import numpy as np
import pytest

from qdft.pauli import MeasurementGroup, PauliString, PauliSum, group_commuting
from qdft.simulator import (
    AnsatzSpec,
    ShotBudget,
    StateVector,
    empirical_expectation,
    estimate_expectation_sampled,
    expectation_exact,
    gradient_parameter_shift,
    rotated_probabilities,
    run_ry_ansatz,
    sample_group,
)


def ry_matrix(theta):
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]])


def gate_on_bit(gate, pos, m):
    return np.kron(np.eye(1 << (m - 1 - pos)), np.kron(gate, np.eye(1 << pos)))


def cnot_matrix(control_pos, target_pos, m):
    dim = 1 << m
    mat = np.zeros((dim, dim))
    for j in range(dim):
        out = j ^ (1 << target_pos) if (j >> control_pos) & 1 else j
        mat[out, j] = 1.0
    return mat


def circuit_unitary(m, n_layers, params):
    """Dense oracle built from explicit gate matrices, applied in circuit order."""
    u = np.eye(1 << m)
    for layer in range(n_layers):
        for q in range(m):
            u = gate_on_bit(ry_matrix(params[layer * m + q]), q, m) @ u
        for q in range(m - 1):
            u = cnot_matrix(q, q + 1, m) @ u
    for q in range(m):
        u = gate_on_bit(ry_matrix(params[n_layers * m + q]), q, m) @ u
    return u


def basis_state(i, m):
    amp = np.zeros(1 << m, dtype=complex)
    amp[i] = 1.0
    return StateVector(amplitudes=amp, num_qubits=m)


def test_zero_angles_identity_on_ground_state():
    spec = AnsatzSpec(num_qubits=3, n_layers=4, params=np.zeros(15))
    state = run_ry_ansatz(spec, 0)
    assert state.amplitudes[0] == pytest.approx(1.0)


def test_pi_rotation_flips_qubit():
    spec = AnsatzSpec(num_qubits=1, n_layers=0, params=np.array([math.pi]))
    state = run_ry_ansatz(spec, 0)
    assert abs(state.amplitudes[1]) == pytest.approx(1.0)


def test_ansatz_matches_dense_gate_oracle():
    rng = np.random.default_rng(0)
    for m, n_layers in [(2, 1), (2, 3), (3, 4)]:
        params = rng.uniform(-math.pi, math.pi, size=m * (n_layers + 1))
        u = circuit_unitary(m, n_layers, params)
        for initial in range(1 << m):
            state = run_ry_ansatz(AnsatzSpec(m, n_layers, params), initial)
            assert np.linalg.norm(state.amplitudes) == pytest.approx(1.0, abs=1e-12)
            assert np.max(np.abs(state.amplitudes - u[:, initial])) < 1e-12


def test_param_count_mismatch():
    with pytest.raises(ValueError, match="parameters"):
        AnsatzSpec(num_qubits=3, n_layers=4, params=np.zeros(14))


def test_expectation_trivial_cases():
    assert expectation_exact(basis_state(0, 3), PauliSum({"ZII": 1.0}, 3)) == pytest.approx(1.0)
    plus = StateVector(np.array([1, 1]) / math.sqrt(2), 1)
    assert expectation_exact(plus, PauliSum({"X": 1.0}, 1)) == pytest.approx(1.0)


def test_expectation_matches_dense_quadratic_form():
    rng = np.random.default_rng(1)
    a = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    h = a + a.conj().T
    from qdft.pauli import decompose_hermitian

    op = decompose_hermitian(h, tol=0.0)
    vec = rng.normal(size=8) + 1j * rng.normal(size=8)
    vec /= np.linalg.norm(vec)
    state = StateVector(vec, 3)
    expected = float(np.real(vec.conj() @ h @ vec))
    assert expectation_exact(state, op) == pytest.approx(expected, abs=1e-12)


def test_expectation_linearity():
    rng = np.random.default_rng(2)
    vec = rng.normal(size=4)
    vec /= np.linalg.norm(vec)
    state = StateVector(vec.astype(complex), 2)
    a = PauliSum({"XZ": 0.7, "ZI": -0.3}, 2)
    b = PauliSum({"XZ": -0.2, "YY": 1.1}, 2)
    lhs = expectation_exact(state, a + b)
    rhs = expectation_exact(state, a) + expectation_exact(state, b)
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_expectation_rejects_non_hermitian():
    with pytest.raises(ValueError, match="Hermitian"):
        expectation_exact(basis_state(0, 1), PauliSum({"X": 1j}, 1))


def test_rotated_probabilities_against_dense_rotation():
    rng = np.random.default_rng(3)
    h_gate = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
    sdg = np.diag([1.0, -1j])
    vec = rng.normal(size=8) + 1j * rng.normal(size=8)
    vec /= np.linalg.norm(vec)
    basis = ("X", "Y", "Z")
    rot = np.eye(8, dtype=complex)
    rot = gate_on_bit(h_gate, 0, 3) @ gate_on_bit(h_gate @ sdg, 1, 3) @ rot
    expected = np.abs(rot @ vec) ** 2
    got = rotated_probabilities(StateVector(vec, 3), basis)
    assert np.max(np.abs(got - expected)) < 1e-12


def test_sample_group_deterministic_and_exact_on_eigenstate():
    group = MeasurementGroup((PauliString("Z"),), ("Z",))
    counts = sample_group(basis_state(0, 1), group, 1000, seed=5)
    assert counts == {0: 1000}
    plus = StateVector(np.array([1, 1]) / math.sqrt(2), 1)
    c1 = sample_group(plus, group, 4096, seed=5)
    c2 = sample_group(plus, group, 4096, seed=5)
    assert c1 == c2


def test_sample_group_bernoulli_statistics():
    plus = StateVector(np.array([1, 1]) / math.sqrt(2), 1)
    group = MeasurementGroup((PauliString("Z"),), ("Z",))
    shots = 10**6
    counts = sample_group(plus, group, shots, seed=11)
    # 4 sigma of a fair coin at 1e6 shots
    assert abs(counts[0] / shots - 0.5) < 0.002


def test_empirical_expectation_parity():
    # outcome 0b11 has even parity on ZZ, odd on ZI
    counts = {0b11: 3, 0b01: 1}
    assert empirical_expectation("ZZ", counts) == pytest.approx((3 - 1) / 4)
    assert empirical_expectation("ZI", counts) == pytest.approx((-3 - 1) / 4)
    assert empirical_expectation("II", counts) == pytest.approx(1.0)


def test_estimate_identity_exact():
    state = basis_state(2, 2)
    op = PauliSum.identity(2, coeff=1.375)
    est = estimate_expectation_sampled(state, op, ShotBudget(total_shots=16, seed=0))
    assert est == pytest.approx(1.375)


def test_estimate_z_eigenstate_exact_any_shots():
    op = PauliSum({"Z": 1.0}, 1)
    for shots in (1, 7, 100):
        est = estimate_expectation_sampled(basis_state(0, 1), op, ShotBudget(shots, seed=3))
        assert est == pytest.approx(1.0)


def test_estimate_mean_unbiased():
    # seed-averaged estimate within 5 standard errors of the exact value
    rng = np.random.default_rng(4)
    vec = rng.normal(size=4)
    vec /= np.linalg.norm(vec)
    state = StateVector(vec.astype(complex), 2)
    op = PauliSum({"ZX": 0.8, "XI": -0.4, "ZZ": 0.25, "II": 0.1}, 2)
    exact = expectation_exact(state, op)
    shots = 512
    estimates = [
        estimate_expectation_sampled(state, op, ShotBudget(shots, seed=s)) for s in range(200)
    ]
    mean = float(np.mean(estimates))
    sem = float(np.std(estimates, ddof=1) / math.sqrt(len(estimates)))
    assert abs(mean - exact) < 5 * sem


def test_allocation_per_term_vs_per_group():
    op = PauliSum({"ZZ": 1.0, "ZI": 0.5, "IZ": 0.5, "XX": 1.0}, 2)
    groups = group_commuting(op)
    from qdft.simulator import allocate_shots

    per_group = allocate_shots(groups, ShotBudget(100, allocation="per-group"))
    per_term = allocate_shots(groups, ShotBudget(100, allocation="per-term"))
    assert sum(per_group) == 100
    assert sum(per_term) == 100
    sizes = [len(g.strings) for g in groups]
    assert per_term[sizes.index(max(sizes))] > per_term[sizes.index(min(sizes))]


def test_budget_must_cover_groups():
    op = PauliSum({"X": 1.0, "Z": 1.0}, 1)
    with pytest.raises(ValueError, match="cannot cover"):
        estimate_expectation_sampled(basis_state(0, 1), op, ShotBudget(1, seed=0))


def test_gradient_single_qubit_analytic():
    # E(theta) = <0|Ry(theta)^T Z Ry(theta)|0> = cos(theta); dE/dtheta = -sin(theta)
    op = PauliSum({"Z": 1.0}, 1)
    for theta, expected in [(0.0, 0.0), (math.pi / 2, -1.0)]:
        spec = AnsatzSpec(1, 0, np.array([theta]))
        grad = gradient_parameter_shift(spec, 0, op)
        assert grad[0] == pytest.approx(expected, abs=1e-12)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(6)
    m, n_layers = 3, 2
    params = rng.uniform(-1, 1, size=m * (n_layers + 1))
    from qdft.pauli import decompose_hermitian

    a = rng.normal(size=(8, 8))
    op = decompose_hermitian(a + a.T, tol=0.0)
    spec = AnsatzSpec(m, n_layers, params)
    grad = gradient_parameter_shift(spec, 1, op)

    def energy(p):
        return expectation_exact(run_ry_ansatz(spec.with_params(p), 1), op)

    h = 1e-6
    for j in range(spec.num_params):
        up, dn = params.copy(), params.copy()
        up[j] += h
        dn[j] -= h
        fd = (energy(up) - energy(dn)) / (2 * h)
        assert abs(grad[j] - fd) < 1e-6


def test_state_vector_norm_guard():
    with pytest.raises(ValueError, match="norm"):
        StateVector(np.array([1.0, 1.0]), 1)


def test_state_text_dump():
    text = basis_state(1, 1).to_text()
    assert text.splitlines()[1].startswith("1 1.0")
