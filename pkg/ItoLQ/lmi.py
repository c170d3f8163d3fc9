'''
------------------------------------------------------------------------
This module defines and searches the set of admissible matrices P_hat:
symmetric P_hat with

    [ A'P_hat + P_hat A + C'P_hat C + Q    P_hat B + C'P_hat D ]
    [ B'P_hat + D'P_hat C                  R + D'P_hat D       ] >= 0

and Ker(R + D'P_hat D) inside Ker(B) and Ker(D). It also builds the
shifted weights (Q_P, L_P, R_P) that drive the shifted Riccati
equations of riccati.py.

This Python module imports the following module(s):
    matops.py
    utilities.py

This Python module defines the following function(s):
    lmi_block()
    membership()
    shifted_weights()
    schur_consequences()
    lmi_gradient()
    find_feasible()
------------------------------------------------------------------------
'''
# Import packages
import logging
import time
import numpy as np
import matops
import utilities as utils

logger = logging.getLogger(__name__)

'''
------------------------------------------------------------------------
    Functions
------------------------------------------------------------------------
'''


def _check_candidate(p_hat, n):
    p_hat = matops.sym_matrix(p_hat, 'p_hat')
    if p_hat.shape != (n, n):
        err_msg = ('ERROR: p_hat has shape ' + str(p_hat.shape) +
                   ', expected (' + str(n) + ', ' + str(n) + ')')
        raise utils.ContractError(err_msg)

    return p_hat


def shifted_weights(model, weights, p_hat):
    '''
    --------------------------------------------------------------------
    Shifted weights of a candidate P_hat
        Q_P = A'P_hat + P_hat A + C'P_hat C + Q
        L_P = P_hat B + C'P_hat D
        R_P = R + D'P_hat D
    --------------------------------------------------------------------
    INPUTS:
    model   = length 4 tuple, (A, B, C, D)
    weights = length 3 tuple, (Q, R, P_T)
    p_hat   = (n, n) array_like, symmetric candidate

    OTHER FUNCTIONS AND FILES CALLED BY THIS FUNCTION:
        matops.check_model()
        matops.check_weights()
        matops.sym_matrix()

    OBJECTS CREATED WITHIN FUNCTION:
    q_shift = (n, n) symmetric array, Q_P
    l_shift = (n, m) array, L_P
    r_shift = (m, m) symmetric array, R_P

    FILES CREATED BY THIS FUNCTION: None

    RETURNS: shifted = length 3 dict, {q_shift, l_shift, r_shift}
    --------------------------------------------------------------------
    '''
    A, B, C, D = matops.check_model(model)
    n, m = B.shape
    Q, R, _ = matops.check_weights(weights, n, m)
    p_hat = _check_candidate(p_hat, n)
    q_shift = matops.sym_matrix(
        A.T @ p_hat + p_hat @ A + C.T @ p_hat @ C + Q, 'Q_P')
    l_shift = p_hat @ B + C.T @ p_hat @ D
    r_shift = matops.sym_matrix(R + D.T @ p_hat @ D, 'R_P')
    shifted = {'q_shift': q_shift, 'l_shift': l_shift,
               'r_shift': r_shift}

    return shifted


def lmi_block(model, weights, p_hat):
    '''
    (n+m) x (n+m) block matrix [[Q_P, L_P], [L_P', R_P]] of a candidate
    '''
    shifted = shifted_weights(model, weights, p_hat)
    block = np.block([[shifted['q_shift'], shifted['l_shift']],
                      [shifted['l_shift'].T, shifted['r_shift']]])

    return 0.5 * (block + block.T)


def membership(model, weights, p_hat, tol=1e-8, rank_tol=None):
    '''
    --------------------------------------------------------------------
    Test a candidate for membership in the admissible set. Infeasibility
    is reported, never raised.
    --------------------------------------------------------------------
    INPUTS:
    model    = length 4 tuple, (A, B, C, D)
    weights  = length 3 tuple, (Q, R, P_T)
    p_hat    = (n, n) array_like, symmetric candidate
    tol      = scalar >= 0, PSD slack of the LMI block and the bound on
               ||B v||, ||D v|| for unit kernel vectors v of R_P
    rank_tol = scalar >= 0 or None, rank cutoff for Ker(R_P)

    OTHER FUNCTIONS AND FILES CALLED BY THIS FUNCTION:
        lmi_block()
        matops.min_eig_sym()
        matops.kernel_basis()
        matops.kernel_included()

    OBJECTS CREATED WITHIN FUNCTION:
    block   = (n+m, n+m) array, LMI block
    min_eig = scalar, smallest eigenvalue of block
    r_shift = (m, m) array, R + D'P_hat D

    FILES CREATED BY THIS FUNCTION: None

    RETURNS: report = length 5 dict, {lmi_min_eig, lmi_psd, kernel_ok,
             kernel_dim, member}
    --------------------------------------------------------------------
    '''
    A, B, C, D = matops.check_model(model)
    n, m = B.shape
    block = lmi_block(model, weights, p_hat)
    min_eig = matops.min_eig_sym(block)
    r_shift = block[n:, n:]
    kernel_dim = matops.kernel_basis(r_shift, rank_tol).shape[1]
    kernel_ok = matops.kernel_included(r_shift, [B, D], tol, rank_tol)
    report = {'lmi_min_eig': min_eig,
              'lmi_psd': bool(min_eig >= -tol),
              'kernel_ok': bool(kernel_ok),
              'kernel_dim': int(kernel_dim)}
    report['member'] = report['lmi_psd'] and report['kernel_ok']

    return report


def schur_consequences(shifted, tol=1e-8, rank_tol=None):
    '''
    --------------------------------------------------------------------
    Schur-complement consequences of membership: R_P >= 0,
    Q_P - L_P R_P^+ L_P' >= 0 and L_P (I - R_P R_P^+) = 0
    --------------------------------------------------------------------
    INPUTS:
    shifted  = length 3 dict, {q_shift, l_shift, r_shift}
    tol      = scalar >= 0, slack of the three tests
    rank_tol = scalar >= 0 or None, pseudo-inverse cutoff

    OTHER FUNCTIONS AND FILES CALLED BY THIS FUNCTION:
        matops.pinv()
        matops.min_eig_sym()
        matops.sup_norm()

    OBJECTS CREATED WITHIN FUNCTION:
    r_pinv = (m, m) array, pseudo-inverse of R_P

    FILES CREATED BY THIS FUNCTION: None

    RETURNS: length 4 dict, {r_min_eig, schur_min_eig, range_defect,
             ok}
    --------------------------------------------------------------------
    '''
    q_shift = shifted['q_shift']
    l_shift = shifted['l_shift']
    r_shift = shifted['r_shift']
    m = r_shift.shape[0]
    r_pinv = matops.pinv(r_shift, rank_tol)
    r_min_eig = matops.min_eig_sym(r_shift)
    schur_min_eig = matops.min_eig_sym(q_shift - l_shift @ r_pinv @
                                       l_shift.T)
    range_defect = matops.sup_norm(
        l_shift @ (np.eye(m) - r_shift @ r_pinv))
    ok = (r_min_eig >= -tol and schur_min_eig >= -tol and
          range_defect <= tol)

    return {'r_min_eig': r_min_eig, 'schur_min_eig': schur_min_eig,
            'range_defect': range_defect, 'ok': bool(ok)}


def lmi_gradient(model, eigvec):
    '''
    --------------------------------------------------------------------
    Gradient with respect to a symmetric P_hat of v' block(P_hat) v for
    a fixed unit vector v = (v_x, v_u). With y = A v_x + B v_u and
    z = C v_x + D v_u the quadratic form is 2 v_x'P_hat y + z'P_hat z,
    whose symmetric gradient is v_x y' + y v_x' + z z'. At the
    eigenvector of the smallest eigenvalue this is a supergradient of
    lambda_min.
    --------------------------------------------------------------------
    INPUTS:
    model  = length 4 tuple, (A, B, C, D)
    eigvec = (n+m,) vector, unit eigenvector

    OTHER FUNCTIONS AND FILES CALLED BY THIS FUNCTION: None

    OBJECTS CREATED WITHIN FUNCTION:
    v_x, v_u = state and control parts of eigvec
    y, z     = (n,) vectors

    FILES CREATED BY THIS FUNCTION: None

    RETURNS: (n, n) symmetric array
    --------------------------------------------------------------------
    '''
    A, B, C, D = model
    n = A.shape[0]
    v_x = eigvec[:n]
    v_u = eigvec[n:]
    y = A @ v_x + B @ v_u
    z = C @ v_x + D @ v_u

    return np.outer(v_x, y) + np.outer(y, v_x) + np.outer(z, z)


def _lambda_min(model, weights, p_hat):
    block = lmi_block(model, weights, p_hat)
    eigvals, eigvecs = np.linalg.eigh(block)

    return eigvals[0], eigvecs[:, 0]


def find_feasible(model, weights, opts):
    '''
    --------------------------------------------------------------------
    Search for a member of the admissible set by projected supergradient
    ascent on lambda_min(block(P_hat)) over symmetric P_hat, starting
    from P_hat = 0. Steps are normalized and diminishing,
        P_hat <- P_hat + step / sqrt(k + 1) * G / ||G||_F,
    and the best iterate is kept. A round ends on success
    (lambda_min >= margin), when its budget runs out, or after
    `patience` iterations without improvement. Each further round
    restarts from a seeded random symmetric perturbation of the best
    point. The kernel condition is checked on the accepted candidate.
    --------------------------------------------------------------------
    INPUTS:
    model   = length 4 tuple, (A, B, C, D)
    weights = length 3 tuple, (Q, R, P_T)
    opts    = dict, search options (missing keys use defaults)
              max_iter = integer >= 1, total iteration budget (5000)
              step     = scalar > 0, initial step length (1.0)
              tol      = scalar >= 0, PSD slack for acceptance (1e-8)
              margin   = scalar >= 0, target lambda_min (1e-2)
              restarts = integer >= 0, number of restarts (5)
              seed     = integer >= 0, restart perturbation seed (0)
              rank_tol = scalar >= 0 or None, kernel rank cutoff

    OTHER FUNCTIONS AND FILES CALLED BY THIS FUNCTION:
        membership()
        lmi_gradient()
        _lambda_min()
        utils.print_time()

    OBJECTS CREATED WITHIN FUNCTION:
    p_best   = (n, n) array, best candidate so far
    lam_best = scalar, lambda_min at p_best
    rng      = numpy Generator, restart perturbations
    budget   = integer >= 1, iterations per round

    FILES CREATED BY THIS FUNCTION: None

    RETURNS: feas_output = dict, {feasible, p_hat, lmi_min_eig,
             violation, kernel_ok, iterations, comp_time}
    --------------------------------------------------------------------
    '''
    start_time = time.perf_counter()
    model = matops.check_model(model)
    A, B, C, D = model
    n, m = B.shape
    max_iter = int(opts.get('max_iter', 5000))
    step = float(opts.get('step', 1.0))
    tol = float(opts.get('tol', 1e-8))
    margin = float(opts.get('margin', 1e-2))
    restarts = int(opts.get('restarts', 5))
    seed = int(opts.get('seed', 0))
    rank_tol = opts.get('rank_tol', None)

    rng = np.random.default_rng(seed)
    budget = max(1, max_iter // (restarts + 1))
    patience = max(50, budget // 5)

    p_best = np.zeros((n, n))
    lam_best, _ = _lambda_min(model, weights, p_best)
    iterations = 0
    report = membership(model, weights, p_best, tol, rank_tol)
    if report['member']:
        logger.info('P_hat = 0 is admissible, lambda_min: %10.4e',
                    lam_best)
    else:
        for rnd in range(restarts + 1):
            if lam_best >= margin:
                break
            if rnd == 0:
                p_hat = p_best.copy()
            else:
                perturb = rng.standard_normal((n, n))
                p_hat = p_best + step * 0.5 * (perturb + perturb.T)
                logger.debug('Feasibility search restart %d', rnd)
            since_best = 0
            for k in range(budget):
                lam, eigvec = _lambda_min(model, weights, p_hat)
                iterations += 1
                if lam > lam_best + 1e-14:
                    lam_best = lam
                    p_best = p_hat.copy()
                    since_best = 0
                else:
                    since_best += 1
                if lam_best >= margin or since_best >= patience:
                    break
                grad = lmi_gradient(model, eigvec)
                grad_norm = np.linalg.norm(grad)
                if grad_norm == 0.0:
                    # block does not depend on P_hat in this direction
                    break
                p_hat = p_hat + step / np.sqrt(k + 1.0) * grad / grad_norm
                p_hat = 0.5 * (p_hat + p_hat.T)
            logger.debug('Feasibility round %d, iter: %d, ' +
                         'lambda_min: %10.4e', rnd, iterations, lam_best)
        report = membership(model, weights, p_best, tol, rank_tol)

    comp_time = time.perf_counter() - start_time
    feas_output = {'feasible': bool(report['member']),
                   'p_hat': p_best,
                   'lmi_min_eig': float(report['lmi_min_eig']),
                   'violation': float(max(0.0, -report['lmi_min_eig'])),
                   'kernel_ok': bool(report['kernel_ok']),
                   'iterations': iterations,
                   'comp_time': comp_time}
    if feas_output['feasible']:
        logger.info('Feasible P_hat found, lambda_min: %10.4e, ' +
                    'iterations: %d', feas_output['lmi_min_eig'],
                    iterations)
    else:
        logger.info('No feasible P_hat found, best lambda_min: %10.4e',
                    feas_output['lmi_min_eig'])
    utils.print_time(comp_time, 'LMI search')

    return feas_output
