'''
Shared fixtures: the two-mode numerical example, scalar LQ problems and
a seeded corpus of random instances with a known admissible P_hat.
'''
import os
import sys
import numpy as np
import pytest

CUR_PATH = os.path.split(os.path.abspath(__file__))[0]
sys.path.insert(0, os.path.dirname(CUR_PATH))

import lmi  # noqa: E402
import matops  # noqa: E402
import riccati as ricc  # noqa: E402

EXAMPLE_FILE = os.path.join(os.path.dirname(CUR_PATH), 'data',
                            'two_mode_example.json')

# maximal GARE solution of the two-mode example in closed form:
# mode 1 solves 0.0088 p^2 - 0.1785 p + 0.025 = 0 (larger root),
# mode 2 solves -0.19 p = 1
P1_BAR = (0.1785 + np.sqrt(0.1785 ** 2 - 4 * 0.0088 * 0.025)) / \
    (2 * 0.0088)
P2_BAR = -1.0 / 0.19


@pytest.fixture(scope='session')
def example_file():
    return EXAMPLE_FILE


@pytest.fixture(scope='session')
def two_mode():
    A = np.diag([0.01, -0.1])
    B = np.array([[0.2], [0.0]])
    C = np.diag([-0.1, 0.1])
    D = np.array([[0.6], [0.0]])
    Q = np.diag([0.5, -1.0])
    R = np.array([[-0.05]])
    p_bar = np.diag([P1_BAR, P2_BAR])
    omega = R[0, 0] + 0.36 * P1_BAR
    k_bar = np.array([[-0.14 * P1_BAR / omega, 0.0]])

    return {'model': (A, B, C, D), 'weights': (Q, R, None),
            'x0': np.array([-0.01, 0.1]), 'p_bar': p_bar,
            'k_bar': k_bar, 'omega': omega}


@pytest.fixture(scope='session')
def two_mode_solution(two_mode):
    '''
    Admissible P_hat from the feasibility search and the GARE solution
    started from it, at the integration step of the shipped example
    '''
    opts = {'max_iter': 5000, 'step': 1.0, 'tol': 1e-8, 'margin': 1e-2,
            'restarts': 5, 'seed': 0}
    feas = lmi.find_feasible(two_mode['model'], two_mode['weights'], opts)
    assert feas['feasible']
    gare = ricc.solve_gare(two_mode['model'], two_mode['weights'],
                           feas['p_hat'], conv_tol=1e-9, max_horizon=6400,
                           step=0.05)
    shifted = lmi.shifted_weights(two_mode['model'], two_mode['weights'],
                                  feas['p_hat'])
    closed = ricc.closedloop_data(two_mode['model'], shifted,
                                  gare['z_bar'])

    return {'feas': feas, 'gare': gare, 'shifted': shifted,
            'closed': closed}


@pytest.fixture(scope='session')
def scalar_lq():
    '''
    Deterministic scalar LQ a=0, b=1, c=0, d=0, q=r=1, maximal GARE
    solution p = 1
    '''
    model = (np.zeros((1, 1)), np.ones((1, 1)), np.zeros((1, 1)),
             np.zeros((1, 1)))
    weights = (np.ones((1, 1)), np.ones((1, 1)), None)

    return {'model': model, 'weights': weights}


@pytest.fixture(scope='session')
def noisy_scalar_lq():
    '''
    Scalar LQ with state noise c = 0.2; the GARE is p^2 - 0.04 p - 1 = 0
    '''
    model = (np.zeros((1, 1)), np.ones((1, 1)), 0.2 * np.ones((1, 1)),
             np.zeros((1, 1)))
    weights = (np.ones((1, 1)), np.ones((1, 1)), None)
    p_bar = (0.04 + np.sqrt(0.04 ** 2 + 4.0)) / 2.0

    return {'model': model, 'weights': weights, 'p_bar': p_bar}


def make_instance(seed):
    '''
    Random instance (n <= 3) whose LMI block at P0 is
    [[H_xx, L0], [L0', H_uu]] with H_uu >= I and Schur complement
    I + WW', so P0 is strictly admissible
    '''
    rng = np.random.default_rng(1000 + seed)
    n = int(rng.integers(1, 4))
    m = int(rng.integers(1, n + 1))
    A = -3.0 * np.eye(n) + 0.3 * rng.standard_normal((n, n))
    B = rng.standard_normal((n, m))
    C = 0.2 * rng.standard_normal((n, n))
    D = 0.3 * rng.standard_normal((n, m))
    P0 = rng.standard_normal((n, n))
    P0 = 0.5 * (P0 + P0.T)
    L0 = P0 @ B + C.T @ P0 @ D
    G = 0.5 * rng.standard_normal((m, m))
    H_uu = np.eye(m) + G @ G.T
    W = 0.5 * rng.standard_normal((n, n))
    H_xx = L0 @ np.linalg.solve(H_uu, L0.T) + np.eye(n) + W @ W.T
    Q = H_xx - (A.T @ P0 + P0 @ A + C.T @ P0 @ C)
    R = H_uu - D.T @ P0 @ D
    Q = 0.5 * (Q + Q.T)
    R = 0.5 * (R + R.T)
    model = (A, B, C, D)
    weights = (Q, R, None)
    # second admissible point below P0
    P1 = None
    for shift in (0.1, 0.05, 0.02, 0.01, 0.001):
        if lmi.membership(model, weights, P0 - shift * np.eye(n))['member']:
            P1 = P0 - shift * np.eye(n)
            break

    return {'model': model, 'weights': weights, 'p0': P0, 'p1': P1,
            'n': n, 'm': m}


@pytest.fixture(scope='session')
def corpus():
    return [make_instance(seed) for seed in range(10)]


@pytest.fixture(scope='session')
def corpus_solutions(corpus):
    sols = []
    for inst in corpus:
        sol0 = ricc.solve_gare(inst['model'], inst['weights'], inst['p0'],
                               conv_tol=1e-9, step=0.01)
        p1 = inst['p1'] if inst['p1'] is not None else inst['p0']
        sol1 = ricc.solve_gare(inst['model'], inst['weights'], p1,
                               conv_tol=1e-9, step=0.01)
        sols.append((sol0, sol1))

    return sols


def assert_psd(S, tol):
    assert matops.min_eig_sym(S) >= -tol
