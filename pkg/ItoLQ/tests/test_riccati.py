import numpy as np
import pytest
from numpy.testing import assert_allclose
import lmi
import matops
import riccati as ricc
import utilities as utils
from conftest import assert_psd


def test_gdre_rhs_zero_weights():
    model = (-np.eye(2), np.ones((2, 1)), np.zeros((2, 2)),
             np.zeros((2, 1)))
    weights = (np.zeros((2, 2)), np.array([[2.0]]), None)
    dP, diag = ricc.gdre_rhs(model, weights, np.zeros((2, 2)))
    assert_allclose(dP, np.zeros((2, 2)))
    assert diag['omega_min'] == pytest.approx(2.0)
    assert diag['reg_defect'] == 0.0


def test_gdre_rhs_zero_model():
    model = (np.zeros((2, 2)), np.zeros((2, 1)), np.zeros((2, 2)),
             np.zeros((2, 1)))
    Q = np.array([[1.0, 0.5], [0.5, 2.0]])
    dP, _ = ricc.gdre_rhs(model, (Q, np.eye(1), None), np.eye(2))
    assert_allclose(dP, -Q)


def test_gdre_rhs_vanishes_at_p_bar(two_mode):
    dP, diag = ricc.gdre_rhs(two_mode['model'], two_mode['weights'],
                             two_mode['p_bar'])
    assert matops.sup_norm(dP) <= 1e-9
    assert diag['omega_min'] == pytest.approx(two_mode['omega'])
    assert_allclose(diag['gain'], two_mode['k_bar'], atol=1e-10)


def test_integrate_gdre_scalar_tanh(scalar_lq):
    gdre = ricc.integrate_gdre(scalar_lq['model'], scalar_lq['weights'],
                               np.zeros((1, 1)), 10.0, step=1e-3)
    assert gdre['grid'][0] == pytest.approx(10.0)
    assert gdre['grid'][-1] == 0.0
    assert gdre['p_of_t'].shape == (10001, 1, 1)
    assert gdre['p_of_t'][-1, 0, 0] == pytest.approx(np.tanh(10.0),
                                                      abs=1e-6)
    t = gdre['grid']
    assert_allclose(gdre['p_of_t'][:, 0, 0], np.tanh(10.0 - t), atol=1e-6)
    assert_allclose(gdre['k_of_t'][:, 0, 0], -np.tanh(10.0 - t), atol=1e-6)


def test_integrate_gdre_zero_weight_stays_zero():
    model = (-np.eye(2), np.ones((2, 1)), 0.1 * np.eye(2),
             np.ones((2, 1)))
    weights = (np.zeros((2, 2)), np.eye(1), None)
    gdre = ricc.integrate_gdre(model, weights, np.zeros((2, 2)), 2.0,
                               step=1e-2)
    assert matops.sup_norm(gdre['p_of_t']) == 0.0


def test_integrate_gdre_stationary_from_p_bar(two_mode):
    gdre = ricc.integrate_gdre(two_mode['model'], two_mode['weights'],
                               two_mode['p_bar'], 5.0, step=1e-2)
    assert_allclose(gdre['p_of_t'][-1], two_mode['p_bar'], atol=1e-8)


def test_integrate_gdre_approaches_p_bar(two_mode, two_mode_solution):
    p_hat = two_mode_solution['feas']['p_hat']
    gdre = ricc.integrate_gdre(two_mode['model'], two_mode['weights'],
                               p_hat, 400.0, step=0.1)
    assert_allclose(gdre['p_of_t'][-1], two_mode['p_bar'], atol=1e-2)


def test_integrate_gdre_breakdown():
    # Omega = -1 at the terminal time
    model = (np.zeros((1, 1)), np.zeros((1, 1)), np.zeros((1, 1)),
             np.ones((1, 1)))
    weights = (np.zeros((1, 1)), -np.ones((1, 1)), None)
    with pytest.raises(utils.GdreBreakdownError) as err:
        ricc.integrate_gdre(model, weights, np.zeros((1, 1)), 1.0,
                            step=0.1)
    assert err.value.time == pytest.approx(1.0)
    assert err.value.min_eig == pytest.approx(-1.0)


def test_integrate_gdre_bad_grid(scalar_lq):
    with pytest.raises(utils.ContractError):
        ricc.integrate_gdre(scalar_lq['model'], scalar_lq['weights'],
                            np.zeros((1, 1)), 0.01, step=0.1)
    with pytest.raises(utils.ContractError):
        ricc.integrate_gdre(scalar_lq['model'], scalar_lq['weights'],
                            np.zeros((1, 1)), 1.0, step=-0.1)


def test_finite_gain(two_mode, scalar_lq):
    K = ricc.finite_gain(two_mode['model'], two_mode['weights'],
                         two_mode['p_bar'])
    assert_allclose(K, [[-0.3916, 0.0]], atol=1e-3)
    assert_allclose(K, two_mode['k_bar'], atol=1e-12)
    K = ricc.finite_gain(scalar_lq['model'], scalar_lq['weights'],
                         np.ones((1, 1)))
    assert_allclose(K, [[-1.0]])


def test_gare_residual(two_mode):
    res, reg_defect, omega_min = ricc.gare_residual(
        two_mode['model'], two_mode['weights'], two_mode['p_bar'])
    assert res <= 1e-9
    assert reg_defect <= 1e-12
    assert omega_min == pytest.approx(7.2015, abs=1e-3)
    res, _, _ = ricc.gare_residual(two_mode['model'], two_mode['weights'],
                                   np.zeros((2, 2)))
    assert res == pytest.approx(1.0)


def test_integrate_sdre_zero_weights():
    model = (-np.eye(2), np.ones((2, 1)), np.zeros((2, 2)),
             np.zeros((2, 1)))
    shifted = {'q_shift': np.zeros((2, 2)), 'l_shift': np.zeros((2, 1)),
               'r_shift': np.eye(1)}
    sdre = ricc.integrate_sdre(model, shifted, 3.0, step=0.1)
    assert matops.sup_norm(sdre['p_of_t']) == 0.0
    assert np.all(sdre['z_min'] == 0.0)


def test_integrate_sdre_at_p_bar_stays_zero(two_mode):
    shifted = lmi.shifted_weights(two_mode['model'], two_mode['weights'],
                                  two_mode['p_bar'])
    sdre = ricc.integrate_sdre(two_mode['model'], shifted, 10.0, step=0.1)
    assert matops.sup_norm(sdre['p_of_t']) <= 1e-8


def test_sdre_rhs_matches_gdre_rhs(corpus):
    rng = np.random.default_rng(12)
    for inst in corpus:
        n = inst['n']
        shifted = lmi.shifted_weights(inst['model'], inst['weights'],
                                      inst['p0'])
        Z = rng.standard_normal((n, n))
        Z = Z @ Z.T
        dZ, _ = ricc.sdre_rhs(inst['model'], shifted, Z)
        dP, _ = ricc.gdre_rhs(inst['model'], inst['weights'],
                              Z + inst['p0'])
        assert_allclose(dZ, dP, atol=1e-8 * max(1.0, matops.sup_norm(dP)))


def test_sdre_monotone_in_horizon(corpus):
    for inst in corpus:
        shifted = lmi.shifted_weights(inst['model'], inst['weights'],
                                      inst['p0'])
        short = ricc.integrate_sdre(inst['model'], shifted, 1.0, step=0.01)
        long = ricc.integrate_sdre(inst['model'], shifted, 2.0, step=0.01)
        assert_psd(short['p_of_t'][-1], 1e-10)
        assert_psd(long['p_of_t'][-1] - short['p_of_t'][-1], 1e-10)


def test_gdre_equals_sdre_plus_p_hat(corpus):
    for inst in corpus:
        model, weights, p0 = inst['model'], inst['weights'], inst['p0']
        shifted = lmi.shifted_weights(model, weights, p0)
        sdre = ricc.integrate_sdre(model, shifted, 2.0, step=0.01)
        gdre = ricc.integrate_gdre(model, weights, p0, 2.0, step=0.01)
        assert_allclose(gdre['grid'], sdre['grid'])
        scale = max(1.0, matops.sup_norm(gdre['p_of_t']))
        assert_allclose(gdre['p_of_t'], sdre['p_of_t'] + p0,
                        atol=1e-6 * scale)


def test_sdre_monotone_in_time(corpus):
    for inst in corpus:
        shifted = lmi.shifted_weights(inst['model'], inst['weights'],
                                      inst['p0'])
        sdre = ricc.integrate_sdre(inst['model'], shifted, 2.0, step=0.01)
        # the grid runs backward from T, so Z grows along it
        for Z_later, Z_earlier in zip(sdre['p_of_t'][:-1],
                                      sdre['p_of_t'][1:]):
            assert_psd(Z_earlier - Z_later, 1e-8)


def test_solve_gare_maximal_over_sampled_members(corpus,
                                                 corpus_solutions):
    rng = np.random.default_rng(31)
    accepted = 0
    for inst, (sol0, _) in zip(corpus, corpus_solutions):
        model, weights, n = inst['model'], inst['weights'], inst['n']
        scale = max(1.0, matops.sup_norm(sol0['p_bar']))
        for size in (0.001, 0.01, 0.05, 0.2, 1.0):
            for _ in range(25):
                perturb = rng.standard_normal((n, n))
                candidate = inst['p0'] + size * 0.5 * (perturb + perturb.T)
                if not lmi.membership(model, weights, candidate)['member']:
                    continue
                accepted += 1
                assert_psd(sol0['p_bar'] - candidate, 1e-7 * scale)
    assert accepted >= 20


def test_solve_gare_two_mode(two_mode, two_mode_solution):
    gare = two_mode_solution['gare']
    assert_allclose(gare['p_bar'], np.diag([20.143, -5.2632]), atol=1e-2)
    assert_allclose(gare['p_bar'], two_mode['p_bar'], atol=1e-5)
    assert gare['residual'] <= 1e-6
    assert gare['regularity_defect'] <= 1e-7
    assert gare['omega_min_eig'] == pytest.approx(7.2015, abs=1e-3)
    assert_allclose(gare['k_gain'], [[-0.3916, 0.0]], atol=1e-3)
    assert_allclose(gare['p_bar'], gare['z_bar'] + gare['p_hat_used'],
                    atol=1e-12)
    assert_psd(gare['z_bar'], 1e-8)


def test_solve_gare_gain_formula(two_mode, two_mode_solution):
    gare = two_mode_solution['gare']
    A, B, C, D = two_mode['model']
    R = two_mode['weights'][1]
    P = gare['p_bar']
    omega = R + D.T @ P @ D
    K = -matops.pinv(omega) @ (B.T @ P + D.T @ P @ C)
    assert_allclose(gare['k_gain'], K, atol=1e-8)


def test_solve_gare_scalar(scalar_lq, noisy_scalar_lq):
    gare = ricc.solve_gare(scalar_lq['model'], scalar_lq['weights'],
                           np.zeros((1, 1)), step=0.01)
    assert gare['p_bar'][0, 0] == pytest.approx(1.0, abs=1e-7)
    assert gare['k_gain'][0, 0] == pytest.approx(-1.0, abs=1e-7)
    gare = ricc.solve_gare(noisy_scalar_lq['model'],
                           noisy_scalar_lq['weights'], np.zeros((1, 1)),
                           step=0.01)
    assert gare['p_bar'][0, 0] == pytest.approx(noisy_scalar_lq['p_bar'],
                                                abs=1e-7)


def test_solve_gare_zero_weight():
    model = (-np.eye(2), np.ones((2, 1)), 0.1 * np.eye(2),
             np.zeros((2, 1)))
    weights = (np.zeros((2, 2)), np.eye(1), None)
    gare = ricc.solve_gare(model, weights, np.zeros((2, 2)), step=0.01)
    assert matops.sup_norm(gare['p_bar']) == 0.0
    assert matops.sup_norm(gare['k_gain']) == 0.0


def test_solve_gare_needs_member(two_mode):
    with pytest.raises(utils.ContractError):
        ricc.solve_gare(two_mode['model'], two_mode['weights'],
                        np.zeros((2, 2)))


def test_solve_gare_unstabilizable():
    # x' = x with no control authority and positive state weight
    model = (np.ones((1, 1)), np.zeros((1, 1)), np.zeros((1, 1)),
             np.zeros((1, 1)))
    weights = (np.ones((1, 1)), np.ones((1, 1)), None)
    with pytest.raises(utils.NonconvergenceError):
        ricc.solve_gare(model, weights, np.zeros((1, 1)), step=0.01,
                        max_horizon=100.0, start_horizon=20.0)


def test_solve_gare_corpus_properties(corpus, corpus_solutions):
    for inst, (sol0, sol1) in zip(corpus, corpus_solutions):
        model, weights = inst['model'], inst['weights']
        scale = max(1.0, matops.sup_norm(sol0['p_bar']))
        # decomposition P_bar = Z_bar + P_hat with Z_bar >= 0
        assert_allclose(sol0['p_bar'], sol0['z_bar'] + inst['p0'],
                        atol=1e-12 * scale)
        assert_psd(sol0['z_bar'], 1e-8)
        # the limit does not depend on the admissible starting point
        assert_allclose(sol0['p_bar'], sol1['p_bar'], atol=1e-6 * scale)
        # the shifted limit solves the original equation
        res, reg_defect, omega_min = ricc.gare_residual(model, weights,
                                                        sol0['p_bar'])
        assert res <= 1e-6 * scale
        assert reg_defect <= 1e-7
        assert omega_min >= -1e-8
        # maximality over the admissible set
        assert_psd(sol0['p_bar'] - inst['p0'], 1e-8)
        if inst['p1'] is not None:
            assert_psd(sol0['p_bar'] - inst['p1'], 1e-8)
        # stationarity of the GDRE at the limit
        dP, _ = ricc.gdre_rhs(model, weights, sol0['p_bar'])
        assert matops.sup_norm(dP) <= 10 * 1e-9 * scale


def test_closedloop_data_trivial():
    model = (-np.eye(2), np.ones((2, 1)), np.zeros((2, 2)),
             np.zeros((2, 1)))
    shifted = {'q_shift': np.zeros((2, 2)), 'l_shift': np.zeros((2, 1)),
               'r_shift': np.eye(1)}
    closed = ricc.closedloop_data(model, shifted, np.zeros((2, 2)))
    assert_allclose(closed['k_shift'], np.zeros((1, 2)))
    assert_allclose(closed['a_cl'], -np.eye(2))
    assert_allclose(closed['q_cl'], np.zeros((2, 2)))
    assert closed['rewrite_residual'] == 0.0


def test_closedloop_data_two_mode(two_mode):
    shifted = lmi.shifted_weights(two_mode['model'], two_mode['weights'],
                                  two_mode['p_bar'])
    closed = ricc.closedloop_data(two_mode['model'], shifted,
                                  np.zeros((2, 2)))
    assert_allclose(closed['k_shift'], [[-0.3916, 0.0]], atol=1e-3)
    assert closed['rewrite_residual'] <= 1e-9
    assert closed['q_cl_min_eig'] >= -1e-9


def test_closedloop_data_scalar(scalar_lq):
    shifted = lmi.shifted_weights(scalar_lq['model'], scalar_lq['weights'],
                                  np.zeros((1, 1)))
    closed = ricc.closedloop_data(scalar_lq['model'], shifted,
                                  np.ones((1, 1)))
    assert_allclose(closed['k_shift'], [[-1.0]])
    assert_allclose(closed['a_cl'], [[-1.0]])
    assert_allclose(closed['q_cl'], [[2.0]])
    assert closed['rewrite_residual'] == pytest.approx(0.0, abs=1e-14)


def test_closedloop_data_inconsistent(scalar_lq):
    shifted = lmi.shifted_weights(scalar_lq['model'], scalar_lq['weights'],
                                  np.zeros((1, 1)))
    with pytest.raises(utils.InconsistencyError):
        ricc.closedloop_data(scalar_lq['model'], shifted,
                             2.0 * np.ones((1, 1)))


def test_closedloop_data_from_solution(two_mode_solution):
    closed = two_mode_solution['closed']
    assert closed['rewrite_residual'] <= 1e-6
    assert closed['q_cl_min_eig'] >= -1e-8
    assert_allclose(closed['k_shift'], two_mode_solution['gare']['k_gain'],
                    atol=1e-6)
