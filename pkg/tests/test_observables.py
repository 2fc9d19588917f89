import numpy as np
import pytest

import fmps
from fmps._contract import mpo_from_dense, pair_expectation, right_boundary, site_matrices
from fmps.errors import NonPhysicalRegionError, StateNotCanonicalError
from fmps.imps import window_theta
from fmps.observables import (
    correlation_function,
    correlation_length,
    correlation_length_from_eigs,
    energy_density,
    exact_energy_density,
    exact_energy_density_finite,
    residual_density,
    residual_density_detail,
    transfer_matrix,
)

import oracles


def test_exact_energy_decoupled():
    assert abs(exact_energy_density(0.0) - 0.5) < 1e-14


def test_exact_energy_critical_closed_form():
    assert abs(exact_energy_density(0.5) - np.sqrt(2.0) / np.pi) < 1e-10


def test_exact_energy_matches_large_n_sum():
    for gamma in (0.3, 0.45):
        finite = exact_energy_density_finite(gamma, 10**6)
        assert abs(finite - exact_energy_density(gamma)) < 1e-6


def test_exact_energy_symmetric_and_monotone():
    for gamma in (0.1, 0.3, 0.5):
        assert abs(exact_energy_density(gamma) - exact_energy_density(-gamma)) < 1e-12
    grid = np.linspace(0.0, 0.5, 11)
    vals = [exact_energy_density(g) for g in grid]
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_exact_energy_domain():
    with pytest.raises(NonPhysicalRegionError):
        exact_energy_density(0.6)
    with pytest.raises(NonPhysicalRegionError):
        exact_energy_density(-0.51)


def test_finite_chain_diagonalization_matches_normal_modes():
    """Dense diagonalization of 2- and 3-site chains in the truncated basis
    against the analytic half-sum of mode frequencies."""
    dim_d = 10
    ops = fmps.BasisOperators.build(dim_d)
    for n_sites in (2, 3):
        for gamma in (0.0, 0.2, 0.45):
            ham = oracles.chain_hamiltonian(ops.x_matrix, ops.deriv_matrix, n_sites, gamma)
            ground = np.linalg.eigvalsh(ham)[0]
            assert abs(ground - oracles.normal_mode_energy(gamma, n_sites)) < 1e-6


def test_energy_density_requires_canonical_state():
    psi = fmps.init_product_state(2, 4)
    psi.spectra[0] = psi.spectra[0] * 1.5
    ops = fmps.BasisOperators.build(4)
    h = fmps.build_local_hamiltonian(ops, 2, 0.0)
    with pytest.raises(StateNotCanonicalError):
        energy_density(psi, h)


def test_transfer_matrix_product_state():
    psi = fmps.init_product_state(2, 4)
    tm = transfer_matrix(psi)
    assert tm.span_sites == 2
    assert tm.matrix.shape == (1, 1)
    assert abs(tm.dominant_eigs[0] - 1.0) < 1e-14
    assert correlation_length(psi) == 0.0


def test_correlation_length_from_eigs_examples():
    assert abs(correlation_length_from_eigs(1.0, np.exp(-1.0), 1) - 1.0) < 1e-14
    assert correlation_length_from_eigs(1.0, 0.0, 2) == 0.0


def test_correlation_function_product_state_vanishes():
    psi = fmps.init_product_state(2, 4)
    x = fmps.build_position_matrix(4)
    for r in range(1, 6):
        assert abs(correlation_function(psi, x, r)) < 1e-14
    with pytest.raises(ValueError):
        correlation_function(psi, x, 0)


def test_residual_zero_for_exact_eigenstate():
    psi = fmps.init_product_state(2, 8)
    ops = fmps.BasisOperators.build(8)
    h = fmps.build_local_hamiltonian(ops, 2, 0.0)
    assert abs(residual_density(psi, h)) < 1e-10


def test_mpo_factorization_reconstructs_blocks():
    ops = fmps.BasisOperators.build(4)
    for arity, gamma3 in ((2, 0.0), (3, 0.04)):
        h = fmps.build_local_hamiltonian(ops, arity, 0.42, gamma3)
        cores = mpo_from_dense(h.matrix, arity, 4)
        assert max(c.shape[-1] for c in cores) <= 4
        net = cores[0]
        for core in cores[1:]:
            net = np.tensordot(net, core, axes=(net.ndim - 1, 0))
        net = net[0, ..., 0]
        # interleaved (out, in) pairs back to matrix form
        n_axes = net.ndim
        out_axes = tuple(range(0, n_axes, 2))
        in_axes = tuple(range(1, n_axes, 2))
        rebuilt = net.transpose(out_axes + in_axes).reshape(h.matrix.shape)
        assert np.max(np.abs(rebuilt - h.matrix)) < 1e-12


def test_iterative_paths_match_dense(small_ground_state, monkeypatch):
    """Force the Krylov/GMRES branches and compare against the dense ones."""
    import fmps.observables as obs

    psi = small_ground_state["result"].psi
    h = small_ground_state["h"]
    dense_tm = transfer_matrix(psi)
    dense_res = residual_density(psi, h)
    monkeypatch.setattr(obs, "DENSE_CHI_LIMIT", 0)
    monkeypatch.setattr(obs, "DENSE_SOLVE_LIMIT", 0)
    iter_tm = transfer_matrix(psi)
    iter_res = residual_density(psi, h)
    mags_dense = np.sort(np.abs(dense_tm.dominant_eigs))[::-1][:2]
    mags_iter = np.sort(np.abs(iter_tm.dominant_eigs))[::-1][:2]
    assert np.allclose(mags_dense, mags_iter, atol=1e-10)
    assert abs(dense_res - iter_res) < 1e-9


class TestConvergedState:
    def test_transfer_eigenvalues(self, small_ground_state):
        psi = small_ground_state["result"].psi
        tm = transfer_matrix(psi)
        mags = np.abs(tm.dominant_eigs)
        assert abs(mags[0] - 1.0) < 1e-10
        assert mags[1] < 1.0

    def test_energy_close_to_exact(self, small_ground_state):
        res = small_ground_state["result"]
        exact = exact_energy_density(small_ground_state["gamma"])
        assert abs(res.energy_density - exact) < 1e-4
        # variational bound: never below the exact value beyond tolerance
        assert res.energy_density >= exact - 1e-6

    def test_correlator_matches_quadrature_oracle(self, small_ground_state):
        psi = small_ground_state["result"].psi
        x = small_ground_state["ops"].x_matrix
        for r in (1, 2, 3):
            got = correlation_function(psi, x, r)
            expect = oracles.xx_correlation_quadrature(small_ground_state["gamma"], r)
            assert abs(got / expect - 1.0) < 0.05

    def test_correlator_decay_matches_xi(self, small_ground_state):
        psi = small_ground_state["result"].psi
        x = small_ground_state["ops"].x_matrix
        xi = correlation_length(psi)
        cs = [correlation_function(psi, x, r) for r in range(2, 10)]
        rate = np.log(abs(cs[-2] / cs[-1]))
        assert abs(rate * xi - 1.0) < 0.05

    def test_antiferro_sign(self, small_ground_state):
        psi = small_ground_state["result"].psi
        x = small_ground_state["ops"].x_matrix
        assert correlation_function(psi, x, 1) < 0.0

    def test_residual_nonnegative_and_small(self, small_ground_state):
        res = small_ground_state["result"]
        value, flag = residual_density_detail(res.psi, small_ground_state["h"])
        assert not flag
        assert value > -1e-9
        assert value < 1e-3

    def test_residual_resummation_matches_direct_sum(self, small_ground_state):
        """Geometric tail solve against an explicit truncated separation sum."""
        psi = small_ground_state["result"].psi
        h = small_ground_state["h"]
        a_list = site_matrices(psi)
        cores = mpo_from_dense(h.matrix, 2, psi.dim_d)
        k_cell = psi.cell_k
        exp_h = []
        for w in range(k_cell):
            th = window_theta(psi, w, 2)
            flat = th.reshape(th.shape[0], -1, th.shape[-1])
            hv = np.tensordot(h.matrix, flat, axes=(1, 1)).transpose(1, 0, 2)
            exp_h.append(float(np.sum(flat * hv) / np.sum(flat * flat)))
        direct = 0.0
        for w in range(k_cell):
            for r in range(0, 120):
                w2 = w + r
                raw = pair_expectation(
                    a_list, right_boundary(psi, (w2 + 2) % k_cell),
                    w, cores, w2, cores,
                )
                cov = raw - exp_h[w] * exp_h[w2 % k_cell]
                direct += cov if r == 0 else 2.0 * cov
        solved, _ = residual_density_detail(psi, h)
        assert abs(solved - direct) < 1e-9

    def test_overlapping_pair_against_dense_window(self, small_ground_state):
        """MPO zipper for <h_w h_{w+r}> against a direct window contraction."""
        psi = small_ground_state["result"].psi
        h = small_ground_state["h"]
        a_list = site_matrices(psi)
        cores = mpo_from_dense(h.matrix, 2, psi.dim_d)
        dim_d = psi.dim_d
        for w in (0, 1):
            for r in (0, 1, 2):
                w2 = w + r
                zipped = pair_expectation(
                    a_list, right_boundary(psi, (w2 + 2) % 2), w, cores, w2, cores
                )
                span = 2 + r
                th = window_theta(psi, w, span)
                flat = th.reshape(th.shape[0], dim_d**span, th.shape[-1])
                v2 = np.tensordot(
                    np.kron(np.eye(dim_d**r), h.matrix), flat, axes=(1, 1)
                ).transpose(1, 0, 2)
                v1 = np.tensordot(
                    np.kron(h.matrix, np.eye(dim_d**r)), flat, axes=(1, 1)
                ).transpose(1, 0, 2)
                dense = float(np.sum(v1 * v2) / np.sum(flat * flat))
                assert abs(zipped - dense) < 1e-9
