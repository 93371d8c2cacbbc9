import numpy as np
import pytest

from paprbound.spectral import aperiodic_corr, b_matrix, build_basis, quartic_sum
from paprbound.waveform import baseband_samples


def random_codewords(k, count, seed):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((count, k)) + 1j * rng.standard_normal((count, k))


def corr_double_loop(c):
    k = len(c)
    return np.array(
        [sum(c[l] * np.conj(c[l + shift]) for l in range(k - shift)) for shift in range(k)]
    )


def test_aperiodic_corr_hand_cases():
    np.testing.assert_allclose(aperiodic_corr(np.ones(4)), [4, 3, 2, 1], atol=1e-14)
    np.testing.assert_allclose(aperiodic_corr(np.array([1.0, 1j])), [2, -1j], atol=1e-14)


def test_aperiodic_corr_matches_double_loop():
    (c,) = random_codewords(16, 1, 0)
    np.testing.assert_allclose(aperiodic_corr(c), corr_double_loop(c), atol=1e-12)


@pytest.mark.parametrize("k", [2, 3, 5, 8])
def test_b_matrix_quadratic_forms(k):
    codewords = random_codewords(k, 100, k)
    for c in codewords[:10]:
        rho = aperiodic_corr(c)
        rho_ext = np.concatenate([rho, [0.0]])
        for shift in range(k):
            tail = np.conj(rho_ext[k - shift])
            q_plus = c.conj() @ b_matrix(k, shift, 1) @ c
            q_minus = c.conj() @ b_matrix(k, shift, -1) @ c
            assert abs(q_plus - (rho[shift] + tail)) < 1e-10
            assert abs(q_minus - (rho[shift] - tail)) < 1e-10


def test_b_matrix_structure():
    np.testing.assert_array_equal(b_matrix(2, 0, 1), np.eye(2))
    np.testing.assert_array_equal(
        b_matrix(3, 1, 1), np.array([[0, 0, 1], [1, 0, 0], [0, 1, 0.0]])
    )
    np.testing.assert_array_equal(
        b_matrix(3, 1, -1), np.array([[0, 0, -1], [1, 0, 0], [0, 1, 0.0]])
    )
    with pytest.raises(ValueError):
        b_matrix(4, 4, 1)
    with pytest.raises(ValueError):
        b_matrix(4, 1, 2)


@pytest.mark.parametrize("k", [2, 3, 8, 16])
def test_basis_unitarity_and_operator_sums(k):
    basis = build_basis(k)
    eye = np.eye(k)
    assert np.linalg.norm(basis.v @ basis.v.conj().T - eye) < 1e-10
    assert np.linalg.norm(basis.v_hat @ basis.v_hat.conj().T - eye) < 1e-10
    c_ops, ch_ops = basis.dense_operators()
    for ops in (c_ops, ch_ops):
        np.testing.assert_allclose(ops.sum(axis=0), eye, atol=1e-10)
        for op in ops:
            np.testing.assert_allclose(op, op.conj().T, atol=1e-12)
            assert abs(np.trace(op) - 1.0) < 1e-10
            eigs = np.linalg.eigvalsh(op)
            assert eigs.min() > -1e-12
            assert (eigs > 1e-10).sum() == 1  # rank one


def test_basis_reconstruction_dense():
    for k in (2, 8):
        basis = build_basis(k)
        for shift in range(k):
            tol = 1e-12 if k == 2 else 1e-10
            plus = basis.v.conj().T @ np.diag(basis.d_phase(shift)) @ basis.v
            minus = (
                basis.v_hat.conj().T @ np.diag(basis.d_phase(shift, hat=True)) @ basis.v_hat
            )
            assert np.linalg.norm(plus - b_matrix(k, shift, 1)) < tol
            assert np.linalg.norm(minus - b_matrix(k, shift, -1)) < tol


def test_shift_zero_phase_is_identity():
    basis = build_basis(9)
    np.testing.assert_allclose(basis.d_phase(0), np.ones(9), atol=1e-15)


def test_large_basis_probe_validation():
    build_basis(128)  # validates via the action path (K > dense cap)
    with pytest.raises(ValueError):
        build_basis(128).dense_operators()


def test_quartic_sum_hand_cases():
    basis = build_basis(2)
    assert abs(quartic_sum(np.array([1.0, 1.0]), basis) - 6.0) < 1e-12
    basis8 = build_basis(8)
    delta = np.zeros(8, complex)
    delta[0] = 1.0
    assert abs(quartic_sum(delta, basis8) - 2.0 / 8.0) < 1e-12


def test_quartic_sum_matches_dense_operators():
    k = 16
    basis = build_basis(k)
    (c,) = random_codewords(k, 1, 4)
    rng = np.random.default_rng(8)
    w, _ = np.linalg.qr(rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k)))
    c_ops, ch_ops = basis.dense_operators()
    u = w @ c
    dense = sum((u.conj() @ op @ u).real ** 2 for op in c_ops) + sum(
        (u.conj() @ op @ u).real ** 2 for op in ch_ops
    )
    fast = quartic_sum(c, basis, w)
    assert abs(fast - dense) < 1e-10 * dense


def test_quartic_sum_batch_and_errors():
    basis = build_basis(4)
    batch = random_codewords(4, 5, 2)
    per_row = np.array([quartic_sum(row, basis) for row in batch])
    np.testing.assert_allclose(quartic_sum(batch, basis), per_row, rtol=1e-12)
    with pytest.raises(ValueError):
        quartic_sum(batch, basis, np.eye(3))
    with pytest.raises(ValueError):
        quartic_sum(random_codewords(5, 1, 0)[0], basis)


@pytest.mark.parametrize("k", [2, 3, 8, 16])
def test_correlation_energy_decomposition(k):
    # |rho(0)|^2 + 2 sum |rho(k)|^2 splits into periodic/odd-periodic halves
    for c in random_codewords(k, 100, 100 + k):
        rho = aperiodic_corr(c)
        rho_ext = np.concatenate([rho, [0.0]])
        lhs = abs(rho[0]) ** 2 + 2.0 * (np.abs(rho[1:]) ** 2).sum()
        tails = np.conj(rho_ext[k - np.arange(k)])
        rhs = 0.5 * (
            (np.abs(rho + tails) ** 2).sum() + (np.abs(rho - tails) ** 2).sum()
        )
        assert abs(lhs - rhs) <= 1e-9 * max(1.0, abs(lhs))


def test_parseval_over_operators():
    for k in (2, 3, 8, 16):
        basis = build_basis(k)
        for c in random_codewords(k, 20, 7 * k):
            power = np.vdot(c, c).real
            alpha = basis.to_alpha(c)
            beta = basis.to_beta(c)
            assert abs((np.abs(alpha) ** 2).sum() - power) < 1e-10 * max(1.0, power)
            assert abs((np.abs(beta) ** 2).sum() - power) < 1e-10 * max(1.0, power)


def test_envelope_and_quartic_bounds_on_dense_grid():
    k = 16
    basis = build_basis(k)
    codewords = random_codewords(k, 50, 12)
    peaks = (np.abs(baseband_samples(codewords, 32)) ** 2).max(axis=1)
    for c, peak in zip(codewords, peaks):
        rho = aperiodic_corr(c)
        envelope_cap = rho[0].real + 2.0 * np.abs(rho[1:]).sum()
        assert peak <= envelope_cap * (1 + 1e-12)
        quartic_cap = k * (2 * k - 1) / 2.0 * quartic_sum(c, basis)
        assert peak**2 <= quartic_cap * (1 + 1e-12)
