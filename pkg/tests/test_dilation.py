import itertools
import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from annulus_lab.calculus import polyval_matrix
from annulus_lab.certify import windowed_matrix
from annulus_lab.dilation import (
    ando_pair,
    build_model,
    egervary_dilation,
    save_model,
    single_carrier_residual,
    verify_model,
    verify_moments,
)
from annulus_lab.errors import (
    BudgetExceeded,
    NotCommuting,
    NotContraction,
    NotContractions,
)
from annulus_lab.linalg import operator_norm, random_unitary, seeded_rng
from annulus_lab.rational import AnnulusRational
from conftest import commuting_contraction_pair, random_function


def word_residual(pair, t1, t2, max_degree):
    """Worst compressed-moment defect over all words up to the given degree."""
    h = t1.shape[0]
    worst = 0.0
    for length in range(max_degree + 1):
        for word in itertools.product((0, 1), repeat=length):
            x = pair.embed
            ref = np.eye(h, dtype=complex)
            for letter in reversed(word):
                x = pair.apply_v1(x) if letter == 0 else pair.apply_v2(x)
                ref = (t1 if letter == 0 else t2) @ ref
            worst = max(worst, operator_norm(pair.embed.conj().T @ x - ref))
    return worst


class TestEgervary:
    def test_unitary_dilates_itself(self):
        lam = np.exp(0.7j)
        u, embed = egervary_dilation(np.array([[lam]]), 3)
        assert u.shape == (1, 1) and u[0, 0] == lam
        assert_allclose(embed, np.eye(1))

    def test_zero_contraction_brute_force(self):
        u, embed = egervary_dilation(np.array([[0.0]]), 2)
        assert u.shape == (3, 3)
        assert operator_norm(u.conj().T @ u - np.eye(3)) <= 1e-14
        for n in (1, 2):
            assert abs(np.linalg.matrix_power(u, n)[0, 0]) <= 1e-14

    def test_seeded_contraction_moments(self):
        t = windowed_matrix(3, 0.5, 5)
        u, embed = egervary_dilation(t, 4)
        assert operator_norm(u.conj().T @ u - np.eye(u.shape[0])) <= 1e-12
        power = np.eye(3, dtype=complex)
        upower = np.eye(u.shape[0], dtype=complex)
        for _ in range(5):
            assert operator_norm(embed.conj().T @ upower @ embed - power) <= 1e-12
            power = power @ t
            upower = upower @ u

    def test_rejects_expansion(self):
        with pytest.raises(NotContraction):
            egervary_dilation(2.0 * np.eye(2), 2)


class TestAndoPair:
    def test_scalar_pair_oracle(self):
        a, b = 0.6, 0.3
        pair = ando_pair(np.array([[a]]), np.array([[b]]), 5)
        for m in range(5):
            for n in range(5 - m):
                x = pair.embed
                for _ in range(n):
                    x = pair.apply_v2(x)
                for _ in range(m):
                    x = pair.apply_v1(x)
                got = (pair.embed.conj().T @ x)[0, 0]
                assert abs(got - a**m * b**n) <= 1e-12

    def test_unitary_pair_moments(self):
        u = random_unitary(2, 3)
        pair = ando_pair(u, u, 4)
        x = pair.embed
        ref = np.eye(2, dtype=complex)
        for _ in range(3):
            x = pair.apply_v1(x)
            ref = u @ ref
        x = pair.apply_v2(x)
        ref = u @ ref
        assert operator_norm(pair.embed.conj().T @ x - ref) <= 1e-12

    def test_mixed_words_on_seeded_pairs(self):
        for seed in range(5):
            t1, t2 = commuting_contraction_pair(3, seed)
            pair = ando_pair(t1, t2, 6)
            assert word_residual(pair, t1, t2, 5) <= 1e-10

    def test_commutator_vanishes_on_budget_blocks(self):
        t1, t2 = commuting_contraction_pair(3, 9)
        pair = ando_pair(t1, t2, 6)
        h = 3
        budget = np.eye(pair.dim, dtype=complex)[:, : h * (4 * (pair.m - 1) + 1)]
        comm = pair.apply_v1(pair.apply_v2(budget)) - pair.apply_v2(pair.apply_v1(budget))
        assert operator_norm(comm) <= 1e-10

    def test_isometry_on_budget_blocks(self):
        t1, t2 = commuting_contraction_pair(2, 4)
        pair = ando_pair(t1, t2, 5)
        h = 2
        budget = np.eye(pair.dim, dtype=complex)[:, : h * (4 * (pair.m - 1) + 1)]
        for image in (pair.apply_v1(budget), pair.apply_v2(budget)):
            gram = image.conj().T @ image
            assert operator_norm(gram - np.eye(budget.shape[1])) <= 1e-12

    def test_operators_are_contractions(self):
        t1, t2 = commuting_contraction_pair(3, 6)
        pair = ando_pair(t1, t2, 4)
        assert operator_norm(pair.v1) <= 1.0 + 1e-12
        assert operator_norm(pair.v2) <= 1.0 + 1e-12

    def test_dense_matrices_match_structured_applies(self):
        t1, t2 = commuting_contraction_pair(2, 7)
        pair = ando_pair(t1, t2, 4)
        rng = seeded_rng(33)
        x = rng.standard_normal((pair.dim, 3)) + 1j * rng.standard_normal((pair.dim, 3))
        assert_allclose(pair.v1 @ x, pair.apply_v1(x), atol=1e-13)
        assert_allclose(pair.v2 @ x, pair.apply_v2(x), atol=1e-13)

    def test_fixup_unitary_intertwines_defect_families(self):
        t1, t2 = commuting_contraction_pair(3, 8)
        pair = ando_pair(t1, t2, 3)
        assert operator_norm(pair.g.conj().T @ pair.g - np.eye(12)) <= 1e-12
        rng = seeded_rng(44)
        h = rng.standard_normal((3, 1)) + 1j * rng.standard_normal((3, 1))
        u_vec = np.vstack([pair.d1 @ t2 @ h, np.zeros((3, 1)), pair.d2 @ h, np.zeros((3, 1))])
        v_vec = np.vstack([pair.d2 @ t1 @ h, np.zeros((3, 1)), pair.d1 @ h, np.zeros((3, 1))])
        assert operator_norm(pair.g @ u_vec - v_vec) <= 1e-10 * max(1.0, operator_norm(u_vec))

    def test_rejects_non_commuting(self):
        a = np.array([[0.0, 0.5], [0.0, 0.0]])
        b = np.array([[0.0, 0.0], [0.5, 0.0]])
        with pytest.raises(NotCommuting):
            ando_pair(a, b, 3)

    def test_rejects_expansive_pair(self):
        with pytest.raises(NotContractions):
            ando_pair(2 * np.eye(2), np.eye(2), 3)


class TestModelStructure:
    def test_flip_is_selfadjoint_involution_exactly(self):
        t = windowed_matrix(2, 0.5, 3)
        model = build_model(t, 0.5, 3)
        f_mat = model.f_matrix
        assert np.array_equal(f_mat, f_mat.conj().T)
        assert np.array_equal(f_mat @ f_mat, np.eye(f_mat.shape[0]))

    def test_flip_swaps_carrier_blocks_exactly(self):
        t = windowed_matrix(2, 0.5, 4)
        model = build_model(t, 0.5, 3)
        n_mat, f_mat = model.n_matrix, model.f_matrix
        fnf = f_mat @ n_mat @ f_mat
        k = model.pair.dim
        assert np.array_equal(fnf[:k, :k], n_mat[k:, k:])
        assert np.array_equal(fnf[k:, k:], n_mat[:k, :k])

    def test_inner_polynomial_flip_identity_exact(self):
        # q2(F N F) = F q2(N) F as dense matrices
        t = windowed_matrix(2, 0.5, 5)
        model = build_model(t, 0.5, 3)
        q2 = (1.0, -0.3, 0.05j)
        n_mat, f_mat = model.n_matrix, model.f_matrix
        lhs = polyval_matrix(q2, f_mat @ n_mat @ f_mat)
        rhs = f_mat @ polyval_matrix(q2, n_mat) @ f_mat
        assert np.array_equal(lhs, rhs)

    def test_embedding_is_isometric(self):
        t = windowed_matrix(3, 0.5, 6)
        model = build_model(t, 0.5, 4)
        v = model.v_matrix
        assert operator_norm(v.conj().T @ v - np.eye(3)) <= 1e-12
        e = model.pair.embed
        assert operator_norm(e.conj().T @ e - np.eye(3)) <= 1e-12


class TestVerifyModel:
    def test_identity_function(self):
        t = windowed_matrix(3, 0.5, 11)
        model = build_model(t, 0.5, 4)
        f = AnnulusRational(r=0.5, p_coeffs=(0.0, 1.0))
        assert verify_model(model, t, f) <= 1e-12

    def test_unitary_exact_regime(self):
        t = random_unitary(3, 21)
        model = build_model(t, 0.5, 24)
        for seed in range(5):
            f = random_function(0.5, 900 + seed, alpha_window=(2.5, 4.0), beta_window_div=(8.0, 4.0))
            residual = verify_model(model, t, f)
            report = model.tail_report(f)
            assert residual <= report["bound"] + 1e-10

    def test_polynomial_function_cross_checked_with_power_dilation(self):
        t = windowed_matrix(3, 0.5, 13)
        model = build_model(t, 0.5, 6)
        f = AnnulusRational(r=0.5, p_coeffs=(0.5, -0.2, 0.1j, 0.3))
        assert verify_model(model, t, f) <= 1e-10
        assert single_carrier_residual(t, 0.5, f, 6) <= 1e-10

    def test_budgeted_regime_within_certified_bound(self):
        for seed in range(5):
            t = windowed_matrix(3, 0.7, 40 + seed)
            model = build_model(t, 0.7, 16)
            f = random_function(
                0.7, 950 + seed, max_roots=2, alpha_window=(3.2, 4.0), beta_window_div=(8.0, 4.0)
            )
            residual = verify_model(model, t, f)
            report = model.tail_report(f)
            assert residual <= report["bound"] + 1e-8

    def test_residual_stabilizes_within_tail_budget(self):
        # re-running at a deeper budget moves the residual by at most the
        # certified bound of the shallow run, across 100 seeded trials
        for seed in range(100):
            t = windowed_matrix(2 + seed % 2, 0.7, 6000 + seed)
            f = random_function(
                0.7, 960 + seed, max_roots=2, alpha_window=(2.5, 4.0), beta_window_div=(8.0, 4.0)
            )
            shallow = build_model(t, 0.7, 10)
            deep = build_model(t, 0.7, 20)
            r_shallow = verify_model(shallow, t, f)
            r_deep = verify_model(deep, t, f)
            assert abs(r_shallow - r_deep) <= shallow.tail_report(f)["bound"] + 1e-12

    def test_budget_gate_raises(self):
        t = windowed_matrix(2, 0.5, 15)
        model = build_model(t, 0.5, 2)
        f = AnnulusRational(r=0.5, p_coeffs=(1.0,), q2_roots=(0.4,))
        with pytest.raises(BudgetExceeded):
            verify_model(model, t, f, budget_tol=1e-10)

    def test_default_budget_rule(self):
        from annulus_lab.dilation import default_budget
        from annulus_lab.rational import laurent_order_for

        f = AnnulusRational(r=0.5, p_coeffs=(1.0,), q1_roots=(3.0,), q2_roots=(0.1,))
        assert default_budget(f) == min(2 * laurent_order_for(f, 1e-10), 24)
        slow = AnnulusRational(r=0.5, p_coeffs=(1.0,), q1_roots=(1.05,))
        assert default_budget(slow) == 24  # capped


class TestVerifyMoments:
    def test_degree_zero(self):
        t = windowed_matrix(2, 0.5, 16)
        model = build_model(t, 0.5, 3)
        assert verify_moments(model, t, 0) <= 1e-14

    def test_scaled_unitary_exact(self):
        t = 0.5 * random_unitary(3, 17)
        model = build_model(t, 0.5, 4)
        assert verify_moments(model, t, 4) <= 1e-11

    def test_windowed_instances(self):
        for seed in range(5):
            t = windowed_matrix(3, 0.7, 70 + seed)
            model = build_model(t, 0.7, 8)
            assert verify_moments(model, t, 8) <= 1e-10

    def test_budget_exceeded(self):
        t = windowed_matrix(2, 0.5, 18)
        model = build_model(t, 0.5, 3)
        with pytest.raises(BudgetExceeded):
            verify_moments(model, t, 4)


class TestSingleCarrier:
    def test_outer_factor_cases(self):
        for seed in range(5):
            t = windowed_matrix(3, 0.5, 80 + seed)
            g = random_function(0.5, 980 + seed, max_roots=2, alpha_window=(2.5, 4.0))
            g = AnnulusRational(r=0.5, p_coeffs=g.p_coeffs, q1_roots=g.q1_roots)
            assert single_carrier_residual(t, 0.5, g, 28) <= 1e-10

    def test_inner_factor_cases(self):
        for seed in range(5):
            t = windowed_matrix(3, 0.5, 85 + seed)
            f = random_function(0.5, 990 + seed, max_roots=2, beta_window_div=(8.0, 4.0))
            f = AnnulusRational(r=0.5, p_coeffs=(1.0,), q2_roots=f.q2_roots)
            assert single_carrier_residual(t, 0.5, f, 28) <= 1e-10

    def test_rejects_mixed_function(self):
        t = windowed_matrix(2, 0.5, 19)
        f = AnnulusRational(r=0.5, p_coeffs=(1.0, 1.0), q1_roots=(2.0,), q2_roots=(0.1,))
        with pytest.raises(ValueError):
            single_carrier_residual(t, 0.5, f, 8)


class TestSaveModel:
    def test_writes_model_directory(self, tmp_path):
        t = windowed_matrix(2, 0.5, 20)
        model = build_model(t, 0.5, 3)
        save_model(model, str(tmp_path / "model"), seed=7)
        meta = json.loads((tmp_path / "model" / "meta.json").read_text())
        assert meta["r"] == 0.5 and meta["d"] == 3 and meta["M"] == 4
        from annulus_lab.linalg import matrix_from_json

        n_mat = matrix_from_json(json.loads((tmp_path / "model" / "N.json").read_text()))
        assert n_mat.shape == (2 * model.pair.dim, 2 * model.pair.dim)
