'''
------------------------------------------------------------------------
This module contains the mean-square stability certificate, the exact
detectability and exact observability tests, and the Lyapunov
decrease check of the closed loop

    dx = A_cl x dt + C_cl x dw,   A_cl = A + BK,  C_cl = C + DK

The second moment X(t) = E[x(t)x(t)'] solves the linear matrix ODE
dX/dt = A_cl X + X A_cl' + C_cl X C_cl', whose matrix on row-major
vectorized X is matops.moment_lift(A_cl, C_cl).

This Python module imports the following module(s):
    lmi.py (via riccati.py)
    matops.py
    riccati.py
    utilities.py

This Python module defines the following function(s):
    mean_square_stable()
    exact_detectable()
    exact_observable()
    second_moment_path()
    lyapunov_trace()
    detectability_preserved()
------------------------------------------------------------------------
'''
# Import packages
import logging
import numpy as np
import scipy.linalg as la
import matops
import riccati
import utilities as utils

logger = logging.getLogger(__name__)

UNSTABLE_TOL = 1e-9

'''
------------------------------------------------------------------------
    Functions
------------------------------------------------------------------------
'''


def _eig(M):
    try:
        return la.eig(M)
    except (la.LinAlgError, ValueError) as err:
        raise utils.NumericalFailure('ERROR: eigensolver failed: ' +
                                     str(err), matrix=M)


def mean_square_stable(A_cl, C_cl):
    '''
    --------------------------------------------------------------------
    Mean-square stability of the closed loop from the spectrum of the
    second-moment operator
    --------------------------------------------------------------------
    INPUTS:
    A_cl = (n, n) array_like, closed-loop drift matrix
    C_cl = (n, n) array_like, closed-loop diffusion matrix

    OTHER FUNCTIONS AND FILES CALLED BY THIS FUNCTION:
        matops.moment_lift()

    OBJECTS CREATED WITHIN FUNCTION:
    eigvals   = (n**2,) complex vector, moment operator spectrum
    abscissa  = scalar, largest real part of eigvals

    FILES CREATED BY THIS FUNCTION: None

    RETURNS: stab_report = length 3 dict, {spectral_abscissa, stable,
             decay_rate}
    --------------------------------------------------------------------
    '''
    lift = matops.moment_lift(A_cl, C_cl)
    eigvals = _eig(lift)[0]
    abscissa = float(np.max(eigvals.real))
    stable = abscissa < 0.0
    stab_report = {'spectral_abscissa': abscissa, 'stable': bool(stable),
                   'decay_rate': -abscissa if stable else 0.0}

    return stab_report


def _null_space(M, abs_tol):
    '''
    Orthonormal basis of the null space of a complex matrix M: the right
    singular vectors whose singular values are <= abs_tol
    '''
    try:
        _, sing_vals, Vh = la.svd(M, full_matrices=True)
    except (la.LinAlgError, ValueError) as err:
        raise utils.NumericalFailure('ERROR: SVD failed: ' + str(err),
                                     matrix=M)
    rank = int(np.sum(sing_vals > abs_tol))

    return Vh[rank:].conj().T


def _clusters(eigvals, indices, rel_tol=1e-7):
    '''
    Group indices of (numerically) equal eigenvalues
    '''
    order = sorted(indices, key=lambda i: (eigvals[i].real,
                                           eigvals[i].imag))
    groups = []
    for i in order:
        for group in groups:
            lam = eigvals[group[0]]
            if abs(eigvals[i] - lam) <= rel_tol * max(1.0, abs(lam)):
                group.append(i)
                break
        else:
            groups.append([i])

    return groups


def _unseen_eigenmatrix(A, C, q_half, tol, check_all):
    '''
    Search the eigenspaces of the second-moment operator for a nonzero
    symmetric eigen-matrix X with q_half X = 0. Only eigenvalues with
    real part >= -tol are searched unless check_all is True. Returns
    (eigenvalue, X) or None.
    '''
    A = np.atleast_2d(np.asarray(A, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    q_half = np.atleast_2d(np.asarray(q_half, dtype=float))
    n = A.shape[0]
    if q_half.shape[1] != n:
        err_msg = ('ERROR: q_half must have ' + str(n) + ' columns, got ' +
                   str(q_half.shape))
        raise utils.ContractError(err_msg)
    lift = matops.moment_lift(A, C)
    eigvals, eigvecs = _eig(lift)
    if check_all:
        indices = list(range(n * n))
    else:
        indices = [i for i in range(n * n) if eigvals[i].real >= -tol]
    # transpose permutation on row-major vec
    perm = np.eye(n * n)[np.arange(n * n).reshape(n, n).T.ravel()]
    observe = np.kron(q_half, np.eye(n))
    null_tol = 1e-8
    # absolute cutoff, so a one-column block counts as null when it is
    # round-off small compared with q_half
    abs_tol = null_tol * max(1.0, matops.sup_norm(q_half))
    for group in _clusters(eigvals, indices):
        basis = la.orth(eigvecs[:, group], rcond=null_tol)
        stacked = np.vstack((observe @ basis,
                             (np.eye(n * n) - perm) @ basis))
        coeffs = _null_space(stacked, abs_tol)
        if coeffs.shape[1] == 0:
            continue
        X = (basis @ coeffs[:, 0]).reshape(n, n)
        witness = 0.5 * (X + X.conj().T)
        if np.max(np.abs(witness.real)) >= np.max(np.abs(witness.imag)):
            witness = witness.real
        else:
            witness = witness.imag
        witness = 0.5 * (witness + witness.T)
        witness /= np.max(np.abs(witness))
        return complex(eigvals[group[0]]), witness

    return None


def exact_detectable(A, C, q_half, tol=UNSTABLE_TOL):
    '''
    --------------------------------------------------------------------
    Exact detectability of (A, C, q_half): no eigen-matrix X of the
    second-moment operator X -> AX + XA' + CXC' with eigenvalue real
    part >= -tol is invisible to the output, q_half X = 0. Reachable
    second moments E[xx'] evolve under this operator and
    E|q_half x|^2 = tr(q_half X q_half'), so an invisible
    non-decaying eigen-matrix is an unobserved mode that does not decay
    in mean square. Repeated eigenvalues are handled by searching the
    whole (symmetric part of the) eigenspace.
    --------------------------------------------------------------------
    INPUTS:
    A      = (n, n) array_like
    C      = (n, n) array_like
    q_half = (p, n) array_like, output matrix, e.g. sqrt_psd(Q)
    tol    = scalar >= 0, eigenvalues with real part >= -tol count as
             non-decaying

    OTHER FUNCTIONS AND FILES CALLED BY THIS FUNCTION:
        _unseen_eigenmatrix()

    OBJECTS CREATED WITHIN FUNCTION:
    found = None or (eigenvalue, witness)

    FILES CREATED BY THIS FUNCTION: None

    RETURNS: detect_output = length 3 dict, {detectable, eigenvalue,
             witness}; eigenvalue and witness are None when detectable
    --------------------------------------------------------------------
    '''
    found = _unseen_eigenmatrix(A, C, q_half, tol, False)
    if found is None:
        return {'detectable': True, 'eigenvalue': None, 'witness': None}
    logger.debug('Unobserved non-decaying mode, eigenvalue: %s',
                 found[0])

    return {'detectable': False, 'eigenvalue': found[0],
            'witness': found[1]}


def exact_observable(A, C, q_half, tol=UNSTABLE_TOL):
    '''
    Exact observability of (A, C, q_half): the detectability test with
    every eigenvalue of the second-moment operator checked
    '''
    found = _unseen_eigenmatrix(A, C, q_half, tol, True)
    if found is None:
        return {'observable': True, 'eigenvalue': None, 'witness': None}

    return {'observable': False, 'eigenvalue': found[0],
            'witness': found[1]}


def second_moment_path(A_cl, C_cl, X0, dt, T):
    '''
    --------------------------------------------------------------------
    Propagate X(t) = E[x(t)x(t)'] from X(0) = X0 over [0, T] by
    classical RK4 with step dt. The ODE is linear, so one RK4 step is
    the polynomial I + hL + (hL)^2/2 + (hL)^3/6 + (hL)^4/24 of the
    moment-lift matrix L, which is formed once.
    --------------------------------------------------------------------
    INPUTS:
    A_cl = (n, n) array_like, closed-loop drift matrix
    C_cl = (n, n) array_like, closed-loop diffusion matrix
    X0   = (n, n) array_like, initial second moment
    dt   = scalar > 0, RK4 step (shortened so it divides T)
    T    = scalar > 0, final time

    OTHER FUNCTIONS AND FILES CALLED BY THIS FUNCTION:
        matops.moment_lift()

    OBJECTS CREATED WITHIN FUNCTION:
    lift      = (n**2, n**2) array, moment-lift matrix
    propagate = (n**2, n**2) array, one RK4 step

    FILES CREATED BY THIS FUNCTION: None

    RETURNS: (grid, x_of_t) with grid (N+1,) increasing and x_of_t
             (N+1, n, n)
    --------------------------------------------------------------------
    '''
    lift = matops.moment_lift(A_cl, C_cl)
    X0 = np.atleast_2d(np.asarray(X0, dtype=float))
    n = X0.shape[0]
    if lift.shape[0] != n * n:
        raise utils.ContractError('ERROR: X0 dimension does not match ' +
                                  'the closed loop')
    if dt <= 0 or T <= 0:
        raise utils.ContractError('ERROR: dt and T must be positive')
    num_steps = max(1, int(np.ceil(T / dt - 1e-9)))
    h = T / num_steps
    hL = h * lift
    hL2 = hL @ hL
    propagate = (np.eye(n * n) + hL + hL2 / 2.0 + hL2 @ hL / 6.0 +
                 hL2 @ hL2 / 24.0)
    vec_path = np.zeros((num_steps + 1, n * n))
    vec_path[0] = X0.ravel()
    for k in range(num_steps):
        vec_path[k + 1] = propagate @ vec_path[k]
    x_of_t = vec_path.reshape(num_steps + 1, n, n)
    x_of_t = 0.5 * (x_of_t + np.transpose(x_of_t, (0, 2, 1)))
    grid = h * np.arange(num_steps + 1)

    return grid, x_of_t


def lyapunov_trace(model, K, z_matrix, x0, dt, T, tol=1e-8):
    '''
    --------------------------------------------------------------------
    Lyapunov value V(t) = E[x(t)'Z x(t)] = trace(Z X(t)) of the loop
    u = Kx started at x0. For Z = Z_bar and the shifted stationary gain
    dV/dt = -E[x'Q_cl x] <= 0, so V is non-increasing.
    --------------------------------------------------------------------
    INPUTS:
    model    = length 4 tuple, (A, B, C, D)
    K        = (m, n) array_like, feedback gain
    z_matrix = (n, n) array_like, symmetric PSD weight
    x0       = (n,) array_like, initial state
    dt       = scalar > 0, RK4 step
    T        = scalar > 0, final time
    tol      = scalar >= 0, PSD slack for z_matrix

    OTHER FUNCTIONS AND FILES CALLED BY THIS FUNCTION:
        second_moment_path()

    OBJECTS CREATED WITHIN FUNCTION:
    x_of_t = (N+1, n, n) array, second moments

    FILES CREATED BY THIS FUNCTION: None

    RETURNS: lyap_output = length 2 dict, {grid, value}
    --------------------------------------------------------------------
    '''
    A, B, C, D = matops.check_model(model)
    K = np.atleast_2d(np.asarray(K, dtype=float))
    z_matrix = matops.sym_matrix(z_matrix, 'z_matrix')
    if not matops.psd(z_matrix, tol):
        raise utils.NotPsdError('ERROR: lyapunov_trace() needs a PSD ' +
                                'weight', matops.min_eig_sym(z_matrix))
    x0 = np.asarray(x0, dtype=float).ravel()
    grid, x_of_t = second_moment_path(A + B @ K, C + D @ K,
                                      np.outer(x0, x0), dt, T)
    value = np.einsum('ij,kji->k', z_matrix, x_of_t)

    return {'grid': grid, 'value': value}


def detectability_preserved(model, shifted, z_bar, tol=1e-8,
                            rank_tol=None):
    '''
    --------------------------------------------------------------------
    Given exact detectability of (A, C, Q_P^(1/2)), test that the closed
    loop (A_cl, C_cl, Q_cl^(1/2)) of the stationary shifted solution is
    exactly detectable as well. A False return signals a numerical
    inconsistency.
    --------------------------------------------------------------------
    INPUTS:
    model    = length 4 tuple, (A, B, C, D)
    shifted  = length 3 dict, {q_shift, l_shift, r_shift}
    z_bar    = (n, n) array_like, stationary shifted solution
    tol      = scalar >= 0, PSD slack for the square roots
    rank_tol = scalar >= 0 or None, pseudo-inverse cutoff

    OTHER FUNCTIONS AND FILES CALLED BY THIS FUNCTION:
        matops.sqrt_psd()
        exact_detectable()
        riccati.closedloop_data()

    OBJECTS CREATED WITHIN FUNCTION:
    cl_output = dict, closed-loop data

    FILES CREATED BY THIS FUNCTION: None

    RETURNS: preserved, boolean
    --------------------------------------------------------------------
    '''
    A, B, C, D = matops.check_model(model)
    q_tol = tol * max(1.0, matops.sup_norm(shifted['q_shift']))
    open_detect = exact_detectable(
        A, C, matops.sqrt_psd(shifted['q_shift'], q_tol))
    if not open_detect['detectable']:
        err_msg = ('ERROR: detectability_preserved() needs (A, C, ' +
                   'Q_P^(1/2)) exactly detectable')
        raise utils.ContractError(err_msg)
    cl_output = riccati.closedloop_data(model, shifted, z_bar, rank_tol)
    q_tol = tol * max(1.0, matops.sup_norm(cl_output['q_cl']))
    cl_detect = exact_detectable(cl_output['a_cl'], cl_output['c_cl'],
                                 matops.sqrt_psd(cl_output['q_cl'],
                                                 q_tol))
    if not cl_detect['detectable']:
        logger.warning('Closed loop lost exact detectability, ' +
                       'eigenvalue: %s', cl_detect['eigenvalue'])

    return cl_detect['detectable']
