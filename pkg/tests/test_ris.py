"""Masks, index sets, Cayley maps, SINR evaluation, and the B subproblem."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from bdris.ris import (ArchitectureMask, assemble_a_matrix, b_to_theta,
                       conforms_to_mask, index_sets, is_spanning_tree,
                       make_architecture, pack_susceptance, random_susceptance,
                       sinr_and_rate, solve_b_subproblem, theta_to_b,
                       unpack_susceptance, _row_space_gram)

ALL_KINDS = [("single", None), ("fully", None), ("group", 4),
             ("tree_tridiagonal", None)]


def masks_for(m, kinds=ALL_KINDS):
    return [make_architecture(kind, m, gs) for kind, gs in kinds
            if gs is None or m % gs == 0]


class TestArchitectureMask:
    def test_tridiagonal_band_pattern(self):
        mask = make_architecture("tree_tridiagonal", 4)
        idx = np.arange(4)
        expected = np.abs(idx[:, None] - idx[None, :]) <= 1
        assert np.array_equal(mask.allowed, expected)
        assert mask.n_parameters == 2 * 4 - 1

    def test_single_is_identity_pattern(self):
        mask = make_architecture("single", 3)
        assert np.array_equal(mask.allowed, np.eye(3, dtype=bool))
        assert mask.n_parameters == 3

    def test_group_blocks(self):
        mask = make_architecture("group", 8, group_size=4)
        expected = np.zeros((8, 8), dtype=bool)
        expected[:4, :4] = True
        expected[4:, 4:] = True
        assert np.array_equal(mask.allowed, expected)
        assert mask.n_parameters == 2 * 4 * 5 // 2

    def test_fully_all_true(self):
        mask = make_architecture("fully", 5)
        assert mask.allowed.all()
        assert mask.n_parameters == 15

    def test_group_size_must_divide(self):
        with pytest.raises(ValueError):
            make_architecture("group", 8, group_size=3)

    def test_zero_elements_rejected(self):
        with pytest.raises(ValueError):
            make_architecture("single", 0)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            make_architecture("ring", 4)

    def test_custom_requires_symmetric_pattern(self):
        bad = np.eye(3, dtype=bool)
        bad[0, 1] = True
        with pytest.raises(ValueError):
            make_architecture("custom", 3, allowed=bad)

    def test_custom_requires_full_diagonal(self):
        bad = np.ones((3, 3), dtype=bool)
        bad[1, 1] = False
        with pytest.raises(ValueError):
            make_architecture("custom", 3, allowed=bad)

    def test_spanning_tree_helper(self):
        assert is_spanning_tree(make_architecture("tree_tridiagonal", 6))
        assert not is_spanning_tree(make_architecture("fully", 4))
        assert not is_spanning_tree(make_architecture("single", 4))
        # star graph: a non-tridiagonal spanning tree via a custom mask
        star = np.eye(5, dtype=bool)
        star[0, 1:] = star[1:, 0] = True
        assert is_spanning_tree(make_architecture("custom", 5, allowed=star))
        # tree plus one extra edge: cycle
        cyc = star.copy()
        cyc[1, 2] = cyc[2, 1] = True
        assert not is_spanning_tree(make_architecture("custom", 5, allowed=cyc))


class TestIndexSets:
    def test_fully_m3(self):
        idx = index_sets(make_architecture("fully", 3))
        assert idx.sets == ((0, 1, 2), (1, 2), (2,))
        assert idx.total == 6

    def test_single_m3(self):
        idx = index_sets(make_architecture("single", 3))
        assert idx.sets == ((0,), (1,), (2,))
        assert idx.total == 3

    def test_tridiagonal_m4_sizes(self):
        idx = index_sets(make_architecture("tree_tridiagonal", 4))
        assert tuple(len(s) for s in idx.sets) == (2, 2, 2, 1)
        assert idx.total == 7

    def test_offsets_and_pairs_consistent(self):
        mask = make_architecture("group", 6, group_size=3)
        idx = index_sets(mask)
        assert idx.offsets[0] == 0
        assert idx.total == len(idx.rows) == len(idx.cols)
        assert np.all(idx.cols >= idx.rows)
        # diagonal always free
        for i, s in enumerate(idx.sets):
            assert i in s

    def test_pack_unpack_roundtrip(self):
        rng = np.random.default_rng(5)
        for mask in masks_for(8):
            x = rng.standard_normal(index_sets(mask).total)
            b = unpack_susceptance(x, mask)
            assert np.array_equal(b, b.T)
            assert not b[~mask.allowed].any()
            assert_allclose(pack_susceptance(b, mask), x)


class TestCayleyMap:
    def test_zero_susceptance_is_identity(self):
        for m in (1, 3, 6):
            assert_allclose(b_to_theta(np.zeros((m, m)), 50.0), np.eye(m))

    def test_scalar_map(self):
        # B = 1/Z0 gives (1 - i)/(1 + i) = -i
        z0 = 50.0
        theta = b_to_theta(np.array([[1.0 / z0]]), z0)
        assert_allclose(theta, [[-1j]], atol=1e-14)

    def test_random_unitary_and_symmetric(self):
        rng = np.random.default_rng(11)
        b = random_susceptance(make_architecture("fully", 4), rng, 0.02)
        theta = b_to_theta(b, 50.0)
        assert np.linalg.norm(theta.conj().T @ theta - np.eye(4)) < 1e-10
        assert np.linalg.norm(theta - theta.T) < 1e-10

    @pytest.mark.parametrize("m", [2, 5, 12])
    def test_roundtrip_and_spectral_bound(self, m):
        rng = np.random.default_rng(m)
        for mask in masks_for(m, [("fully", None), ("tree_tridiagonal", None)]):
            for scale in (1e-3, 0.02, 1.0):
                b = random_susceptance(mask, rng, scale)
                theta = b_to_theta(b, 50.0)
                assert_allclose(theta_to_b(theta, 50.0), b, atol=1e-9)
                sv = np.linalg.svd(np.eye(m) + 1j * 50.0 * b,
                                   compute_uv=False)
                assert 1.0 / sv[-1] <= 1.0 + 1e-10

    def test_identity_scattering_inverts_to_zero(self):
        assert_allclose(theta_to_b(np.eye(4), 50.0), np.zeros((4, 4)))

    def test_scalar_inverse(self):
        assert_allclose(theta_to_b(np.array([[-1j]]), 50.0), [[1.0 / 50.0]],
                        atol=1e-14)

    def test_eigenvalue_minus_one_rejected(self):
        with pytest.raises(ValueError):
            theta_to_b(-np.eye(3), 50.0)


class TestSinrAndRate:
    def test_zero_beamformer(self):
        rng = np.random.default_rng(0)
        u = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
        g = rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3))
        sinr, rate = sinr_and_rate(u, np.zeros((3, 2)), g, 1.0)
        assert_allclose(sinr, 0.0)
        assert rate == 0.0

    def test_scalar_case(self):
        sinr, rate = sinr_and_rate(np.array([[1.0]]), np.array([[2.0]]),
                                   np.array([[1.0]]), 1.0)
        assert_allclose(sinr, [4.0])
        assert_allclose(rate, np.log(5.0))

    def test_rejects_nonpositive_noise(self):
        with pytest.raises(ValueError):
            sinr_and_rate(np.ones((1, 1)), np.ones((1, 1)), np.ones((1, 1)), 0.0)

    def test_matches_direct_scattering_evaluation(self):
        rng = np.random.default_rng(21)
        m, n, k, z0 = 6, 3, 2, 50.0
        b = random_susceptance(make_architecture("fully", m), rng, 0.05)
        theta = b_to_theta(b, z0)
        g = rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))
        h = rng.standard_normal((m, k)) + 1j * rng.standard_normal((m, k))
        w = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
        sinr_u, rate_u = sinr_and_rate(theta.conj().T @ h, w, g, 0.7)
        # direct per-user evaluation through Theta
        eff = h.conj().T @ theta @ g @ w
        p = np.abs(eff) ** 2
        sinr_direct = np.diag(p) / (p.sum(axis=1) - np.diag(p) + 0.7)
        assert_allclose(sinr_u, sinr_direct, rtol=1e-10)
        assert_allclose(rate_u, np.log1p(sinr_direct).sum(), rtol=1e-10)


def dense_b_oracle(mmat, gmat, xi, b_prev, mask):
    """Independent minimizer via basis matrices: dense normal equations over
    x with B = sum_p x_p E_p, no shared code with the solver's assembly."""
    idx = index_sets(mask)
    m = mask.m
    basis = []
    for i, j in zip(idx.rows, idx.cols):
        e = np.zeros((m, m))
        e[i, j] = e[j, i] = 1.0
        basis.append(e @ mmat)
    f = np.array([bm.reshape(-1) for bm in basis])       # P x (M*2K)
    hess = 2.0 * (f @ f.T) + xi * np.eye(idx.total)
    rhs = 2.0 * (f @ gmat.reshape(-1)) + xi * pack_susceptance(b_prev, mask)
    return unpack_susceptance(np.linalg.solve(hess, rhs), mask)


class TestBSubproblem:
    def test_scalar_closed_form(self):
        # minimize (b m - g)^2 + (xi/2)(b - b0)^2  ->  (2 m g + xi b0)/(2 m^2 + xi)
        mask = make_architecture("single", 1)
        m, g, xi, b0 = 1.7, -0.4, 0.9, 0.25
        out = solve_b_subproblem(np.array([[m, 0.0]]), np.array([[g, 0.0]]),
                                 xi, np.array([[b0]]), mask)
        assert_allclose(out[0, 0], (2 * m * g + xi * b0) / (2 * m ** 2 + xi),
                        rtol=1e-14)

    def test_residual_identity_and_gram_structure(self):
        rng = np.random.default_rng(3)
        for mask in masks_for(6):
            k = 2
            mmat = rng.standard_normal((6, 2 * k))
            a = assemble_a_matrix(mmat, mask)
            x = rng.standard_normal(index_sets(mask).total)
            gmat = rng.standard_normal((6, 2 * k))
            lhs = np.linalg.norm(unpack_susceptance(x, mask) @ mmat - gmat) ** 2
            rhs = np.linalg.norm(a @ x - gmat.reshape(-1)) ** 2
            assert abs(lhs - rhs) < 1e-10 * (1 + lhs)
            assert_allclose(_row_space_gram(mmat, mask), a @ a.T,
                            rtol=0, atol=1e-12 * max(1, np.abs(a).max()) ** 2)

    @pytest.mark.parametrize("kind,gs", ALL_KINDS)
    def test_stationarity_against_coefficient_matrix(self, kind, gs):
        rng = np.random.default_rng(17)
        m, k = 6, 2
        if gs is not None and m % gs:
            m = 8
        mask = make_architecture(kind, m, gs)
        idx = index_sets(mask)
        mmat = rng.standard_normal((m, 2 * k))
        gmat = rng.standard_normal((m, 2 * k))
        xi = 0.21
        b_prev = unpack_susceptance(rng.standard_normal(idx.total), mask)
        out = solve_b_subproblem(mmat, gmat, xi, b_prev, mask)
        a = assemble_a_matrix(mmat, mask)
        x = pack_susceptance(out, mask)
        resid = ((2 * a.T @ a + xi * np.eye(idx.total)) @ x
                 - 2 * a.T @ gmat.reshape(-1) - xi * pack_susceptance(b_prev, mask))
        bvec = gmat.reshape(-1)
        assert np.linalg.norm(resid) <= 1e-8 * (1 + np.linalg.norm(bvec))

    def test_parameter_and_equation_space_paths_agree(self):
        # fully, m=6, k=1: 21 parameters >= 12 equations -> equation-space
        # path; padding zero columns forces the parameter-space path on the
        # same least-squares problem.
        rng = np.random.default_rng(7)
        mask = make_architecture("fully", 6)
        mmat = rng.standard_normal((6, 2))
        gmat = rng.standard_normal((6, 2))
        b_prev = random_susceptance(mask, rng, 0.3)
        out_eq = solve_b_subproblem(mmat, gmat, 0.05, b_prev, mask)
        pad = np.zeros((6, 6))
        out_par = solve_b_subproblem(np.hstack([mmat, pad]),
                                     np.hstack([gmat, pad]), 0.05, b_prev, mask)
        assert_allclose(out_eq, out_par, atol=1e-9)

    def test_matches_dense_oracle_all_masks(self):
        rng = np.random.default_rng(29)
        for trial in range(10):
            for mask in masks_for(6) + masks_for(4) + masks_for(5):
                k = rng.integers(1, 4)
                mmat = rng.standard_normal((mask.m, 2 * k))
                gmat = rng.standard_normal((mask.m, 2 * k))
                xi = float(rng.uniform(0.01, 2.0))
                b_prev = random_susceptance(mask, rng, 1.0)
                out = solve_b_subproblem(mmat, gmat, xi, b_prev, mask)
                ref = dense_b_oracle(mmat, gmat, xi, b_prev, mask)
                assert_allclose(out, ref, rtol=1e-8, atol=1e-10)

    def test_output_pattern_and_symmetry_exact(self):
        rng = np.random.default_rng(31)
        mask = make_architecture("group", 8, group_size=4)
        out = solve_b_subproblem(rng.standard_normal((8, 4)),
                                 rng.standard_normal((8, 4)), 0.3,
                                 np.zeros((8, 8)), mask)
        assert np.array_equal(out, out.T)
        assert not out[~mask.allowed].any()

    def test_rejects_bad_inputs(self):
        mask = make_architecture("single", 3)
        mmat = np.ones((3, 2))
        with pytest.raises(ValueError):
            solve_b_subproblem(mmat, np.ones((3, 2)), 0.0, np.zeros((3, 3)), mask)
        with pytest.raises(ValueError):
            solve_b_subproblem(mmat, np.ones((3, 4)), 1.0, np.zeros((3, 3)), mask)
        off_pattern = np.zeros((3, 3))
        off_pattern[0, 1] = off_pattern[1, 0] = 1.0
        with pytest.raises(ValueError):
            solve_b_subproblem(mmat, np.ones((3, 2)), 1.0, off_pattern, mask)

    def test_conforms_helper(self):
        mask = make_architecture("single", 2)
        assert conforms_to_mask(np.diag([1.0, 2.0]), mask)
        assert not conforms_to_mask(np.ones((2, 2)), mask)
