'''
------------------------------------------------------------------------
This module contains the functions used to solve the generalized
Riccati equations of the indefinite stochastic LQ problem

    min  E int_0^T (x'Qx + u'Ru) dt + E x(T)'P_T x(T)
    s.t. dx = (Ax + Bu)dt + (Cx + Du)dw

with the unhalved cost convention, so that the optimal value is
x0'P(0)x0.

The generalized differential Riccati equation (GDRE) is

    dP/dt + A'P + PA + C'PC + Q - M'Omega^+ M = 0
    Omega = R + D'PD >= 0,  (I - Omega Omega^+) M = 0,
    M     = B'P + D'PC

and its stationary version is the GARE. Given an admissible P_hat the
shifted equation (SDRE) in Z = P - P_hat starts from Z(T, T) = 0, has
weights (Q_P, L_P, R_P) from lmi.shifted_weights(), and converges
monotonically as the horizon grows to Z_bar. The maximal GARE solution
is P_bar = Z_bar + P_hat and the optimal stationary gain is
K = -Omega^+ M evaluated at P_bar.

Every equation is integrated backward in time with fixed-step
classical Runge-Kutta (RK4). Tolerances are passed as the tuple
tols = (psd_tol, reg_tol, rank_tol).

This Python module imports the following module(s):
    lmi.py
    matops.py
    utilities.py

This Python module defines the following function(s):
    gdre_rhs()
    sdre_rhs()
    rk4_step()
    integrate_gdre()
    integrate_sdre()
    finite_gain()
    solve_gare()
    gare_residual()
    closedloop_data()
------------------------------------------------------------------------
'''
# Import packages
import logging
import time
import numpy as np
import lmi
import matops
import utilities as utils

logger = logging.getLogger(__name__)

DEFAULT_TOLS = (1e-8, 1e-7, None)
BLOWUP = 1e12

'''
------------------------------------------------------------------------
    Functions
------------------------------------------------------------------------
'''


def _riccati_terms(model, q_mat, l_mat, r_mat, X, rank_tol):
    '''
    Common terms of the GDRE and the SDRE for the weights (q, l, r) at
    the point X:
        S     = A'X + XA + C'XC + q
        M     = B'X + D'XC + l'
        Omega = r + D'XD
    Returns (S, M, Omega, Omega^+).
    '''
    A, B, C, D = model
    S = A.T @ X + X @ A + C.T @ X @ C + q_mat
    M = B.T @ X + D.T @ X @ C + l_mat.T
    Omega = r_mat + D.T @ X @ D
    Omega = 0.5 * (Omega + Omega.T)
    Omega_pinv = matops.pinv(Omega, rank_tol)

    return S, M, Omega, Omega_pinv


def _diagnostics(M, Omega, Omega_pinv):
    m = Omega.shape[0]
    omega_min = matops.min_eig_sym(Omega)
    reg_defect = matops.sup_norm((np.eye(m) - Omega @ Omega_pinv) @ M)

    return omega_min, reg_defect


def _rhs(model, q_mat, l_mat, r_mat, X, rank_tol, diagnose):
    S, M, Omega, Omega_pinv = _riccati_terms(model, q_mat, l_mat, r_mat,
                                             X, rank_tol)
    F = S - M.T @ Omega_pinv @ M
    dX = -0.5 * (F + F.T)
    if not diagnose:
        return dX, None
    omega_min, reg_defect = _diagnostics(M, Omega, Omega_pinv)

    return dX, {'omega_min': omega_min, 'reg_defect': reg_defect,
                'gain': -Omega_pinv @ M}


def gdre_rhs(model, weights, P, rank_tol=None):
    '''
    --------------------------------------------------------------------
    Time derivative of the GDRE solution,
        dP/dt = -(A'P + PA + C'PC + Q - M'Omega^+ M),
    together with the constraint diagnostics at P
    --------------------------------------------------------------------
    INPUTS:
    model    = length 4 tuple, (A, B, C, D)
    weights  = length 3 tuple, (Q, R, P_T)
    P        = (n, n) array_like, symmetric point
    rank_tol = scalar >= 0 or None, pseudo-inverse cutoff

    OTHER FUNCTIONS AND FILES CALLED BY THIS FUNCTION:
        matops.check_model()
        matops.check_weights()
        matops.sym_matrix()
        _rhs()

    OBJECTS CREATED WITHIN FUNCTION:
    l_zero = (n, m) zero array, cross weight of the unshifted problem

    FILES CREATED BY THIS FUNCTION: None

    RETURNS: (dP, diag) with diag = length 3 dict, {omega_min,
             reg_defect, gain}
    --------------------------------------------------------------------
    '''
    model = matops.check_model(model)
    n, m = model[1].shape
    Q, R, _ = matops.check_weights(weights, n, m)
    P = matops.sym_matrix(P, 'P')
    l_zero = np.zeros((n, m))

    return _rhs(model, Q, l_zero, R, P, rank_tol, True)


def sdre_rhs(model, shifted, Z, rank_tol=None):
    '''
    Time derivative of the shifted Riccati solution,
        dZ/dt = -(A'Z + ZA + C'ZC + Q_P - M'Omega^+ M),
        M = B'Z + D'ZC + L_P',  Omega = R_P + D'ZD,
    with the regularity diagnostics at Z
    '''
    model = matops.check_model(model)
    Z = matops.sym_matrix(Z, 'Z')

    return _rhs(model, shifted['q_shift'], shifted['l_shift'],
                shifted['r_shift'], Z, rank_tol, True)


def rk4_step(deriv, X, h):
    '''
    --------------------------------------------------------------------
    One classical Runge-Kutta step of length h for the backward-time
    variable s = T - t, where deriv(X) returns dX/dt. Since
    dX/ds = -dX/dt, the step integrates X(t - h) from X(t).
    --------------------------------------------------------------------
    INPUTS:
    deriv = function, X -> dX/dt (symmetric array)
    X     = (n, n) array, value at time t
    h     = scalar > 0, step length

    OTHER FUNCTIONS AND FILES CALLED BY THIS FUNCTION: deriv()

    OBJECTS CREATED WITHIN FUNCTION:
    k1, k2, k3, k4 = (n, n) arrays, RK4 stages of dX/ds

    FILES CREATED BY THIS FUNCTION: None

    RETURNS: (n, n) symmetric array, value at time t - h
    --------------------------------------------------------------------
    '''
    k1 = -deriv(X)
    k2 = -deriv(X + 0.5 * h * k1)
    k3 = -deriv(X + 0.5 * h * k2)
    k4 = -deriv(X + h * k3)
    X_new = X + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    return 0.5 * (X_new + X_new.T)


def _num_steps(horizon, step):
    if step <= 0 or horizon <= 0:
        err_msg = ('ERROR: step and horizon must be positive, got ' +
                   'step=' + str(step) + ', horizon=' + str(horizon))
        raise utils.ContractError(err_msg)
    if horizon < step * (1.0 - 1e-12):
        raise utils.ContractError('ERROR: horizon must be >= step')
    num_steps = max(1, int(np.ceil(horizon / step - 1e-9)))

    return num_steps, horizon / num_steps


def _check_blowup(X, where):
    if not np.all(np.isfinite(X)) or matops.sup_norm(X) > BLOWUP:
        err_msg = 'ERROR: Riccati solution blew up at ' + where
        raise utils.NonconvergenceError(err_msg)


def _integrate_backward(model, q_mat, l_mat, r_mat, terminal, horizon,
                        step, tols, error_class, label):
    '''
    Fixed-step backward RK4 of the (shifted) Riccati equation on the grid
    t_k = T - k h, T = horizon. The constraint diagnostics are checked
    at every grid point.
    '''
    start_time = time.perf_counter()
    psd_tol, reg_tol, rank_tol = tols
    num_steps, h = _num_steps(horizon, step)
    n = model[0].shape[0]
    m = model[1].shape[1]
    grid = horizon - h * np.arange(num_steps + 1)
    grid[-1] = 0.0
    x_of_t = np.zeros((num_steps + 1, n, n))
    k_of_t = np.zeros((num_steps + 1, m, n))
    omega_min = np.zeros(num_steps + 1)
    reg_defect = np.zeros(num_steps + 1)
    x_min = np.zeros(num_steps + 1)

    def deriv(X):
        return _rhs(model, q_mat, l_mat, r_mat, X, rank_tol, False)[0]

    X = terminal.copy()
    for k in range(num_steps + 1):
        if k > 0:
            X = rk4_step(deriv, X, h)
            _check_blowup(X, 't = %10.4e' % grid[k])
        _, diag = _rhs(model, q_mat, l_mat, r_mat, X, rank_tol, True)
        x_of_t[k] = X
        k_of_t[k] = diag['gain']
        omega_min[k] = diag['omega_min']
        reg_defect[k] = diag['reg_defect']
        if label == 'SDRE':
            x_min[k] = matops.min_eig_sym(X)
        if (diag['omega_min'] < -psd_tol or
                diag['reg_defect'] > reg_tol or
                (label == 'SDRE' and x_min[k] < -psd_tol)):
            err_msg = ('ERROR: ' + label + ' constraints violated at t = ' +
                       '%10.4e' % grid[k] + ', min eig of Omega: ' +
                       '%10.4e' % diag['omega_min'] +
                       ', regularity defect: ' +
                       '%10.4e' % diag['reg_defect'])
            if label == 'SDRE':
                err_msg += ', min eig of Z: %10.4e' % x_min[k]
            raise error_class(err_msg, time=float(grid[k]),
                              min_eig=float(diag['omega_min']),
                              reg_defect=float(diag['reg_defect']))

    comp_time = time.perf_counter() - start_time
    solution = {'grid': grid, 'p_of_t': x_of_t, 'k_of_t': k_of_t,
                'omega_min': omega_min, 'reg_defect': reg_defect,
                'horizon': float(horizon), 'step': float(h),
                'comp_time': comp_time}
    if label == 'SDRE':
        solution['z_min'] = x_min
    logger.debug('%s integrated over [0, %g] in %d steps', label,
                 horizon, num_steps)

    return solution


def integrate_gdre(model, weights, terminal, horizon, step=1e-3,
                   tols=DEFAULT_TOLS):
    '''
    --------------------------------------------------------------------
    Integrate the GDRE backward from P(T) = terminal over [0, T] with
    T = horizon by fixed-step RK4. Every grid point must satisfy
    R + D'PD >= -psd_tol and the regularity defect <= reg_tol.
    --------------------------------------------------------------------
    INPUTS:
    model    = length 4 tuple, (A, B, C, D)
    weights  = length 3 tuple, (Q, R, P_T)
    terminal = (n, n) array_like, terminal value P(T)
    horizon  = scalar > 0, horizon T
    step     = scalar > 0, RK4 step (shortened so it divides T)
    tols     = length 3 tuple, (psd_tol, reg_tol, rank_tol)

    OTHER FUNCTIONS AND FILES CALLED BY THIS FUNCTION:
        _integrate_backward()

    OBJECTS CREATED WITHIN FUNCTION: None

    FILES CREATED BY THIS FUNCTION: None

    RETURNS: gdre_output = dict, {grid, p_of_t, k_of_t, omega_min,
             reg_defect, horizon, step, comp_time}. grid decreases from
             T to 0, k_of_t holds the optimal gain K(t).
    --------------------------------------------------------------------
    '''
    model = matops.check_model(model)
    n, m = model[1].shape
    Q, R, _ = matops.check_weights(weights, n, m)
    terminal = matops.sym_matrix(terminal, 'terminal')
    if terminal.shape != (n, n):
        raise utils.ContractError('ERROR: terminal must be (n, n)')

    return _integrate_backward(model, Q, np.zeros((n, m)), R, terminal,
                               horizon, step, tols,
                               utils.GdreBreakdownError, 'GDRE')


def integrate_sdre(model, shifted, horizon, step=1e-3,
                   tols=DEFAULT_TOLS):
    '''
    --------------------------------------------------------------------
    Integrate the shifted Riccati equation backward from Z(T, T) = 0
    over [0, T] with T = horizon. Every grid point must satisfy
    R_P + D'ZD >= -psd_tol, the regularity defect <= reg_tol and
    Z >= -psd_tol.
    --------------------------------------------------------------------
    INPUTS:
    model   = length 4 tuple, (A, B, C, D)
    shifted = length 3 dict, {q_shift, l_shift, r_shift}
    horizon = scalar > 0, horizon T
    step    = scalar > 0, RK4 step
    tols    = length 3 tuple, (psd_tol, reg_tol, rank_tol)

    OTHER FUNCTIONS AND FILES CALLED BY THIS FUNCTION:
        _integrate_backward()

    OBJECTS CREATED WITHIN FUNCTION: None

    FILES CREATED BY THIS FUNCTION: None

    RETURNS: sdre_output = dict, same keys as integrate_gdre() plus
             z_min. p_of_t holds Z(t, T) and k_of_t the shifted gain
             -Omega^+ M.
    --------------------------------------------------------------------
    '''
    model = matops.check_model(model)
    n = model[0].shape[0]

    return _integrate_backward(model, shifted['q_shift'],
                               shifted['l_shift'], shifted['r_shift'],
                               np.zeros((n, n)), horizon, step, tols,
                               utils.SdreBreakdownError, 'SDRE')


def finite_gain(model, weights, P, rank_tol=None):
    '''
    Optimal feedback gain K = -(R + D'PD)^+ (B'P + D'PC) at P
    '''
    A, B, C, D = matops.check_model(model)
    n, m = B.shape
    Q, R, _ = matops.check_weights(weights, n, m)
    P = matops.sym_matrix(P, 'P')
    Omega = R + D.T @ P @ D

    return -matops.pinv(0.5 * (Omega + Omega.T), rank_tol) @ \
        (B.T @ P + D.T @ P @ C)


def gare_residual(model, weights, P, rank_tol=None):
    '''
    --------------------------------------------------------------------
    Residual diagnostics of the GARE at P
    --------------------------------------------------------------------
    INPUTS:
    model    = length 4 tuple, (A, B, C, D)
    weights  = length 3 tuple, (Q, R, P_T)
    P        = (n, n) array_like, symmetric point
    rank_tol = scalar >= 0 or None, pseudo-inverse cutoff

    OTHER FUNCTIONS AND FILES CALLED BY THIS FUNCTION:
        _riccati_terms()
        _diagnostics()

    OBJECTS CREATED WITHIN FUNCTION:
    S, M, Omega = GARE terms at P

    FILES CREATED BY THIS FUNCTION: None

    RETURNS: (res, reg_defect, omega_min) with
             res        = ||A'P + PA + C'PC + Q - M'Omega^+ M||_inf
             reg_defect = ||(Omega Omega^+ - I) M||_inf
             omega_min  = min eigenvalue of Omega
    --------------------------------------------------------------------
    '''
    model = matops.check_model(model)
    n, m = model[1].shape
    Q, R, _ = matops.check_weights(weights, n, m)
    P = matops.sym_matrix(P, 'P')
    S, M, Omega, Omega_pinv = _riccati_terms(model, Q, np.zeros((n, m)),
                                             R, P, rank_tol)
    res = matops.sup_norm(S - M.T @ Omega_pinv @ M)
    omega_min, reg_defect = _diagnostics(M, Omega, Omega_pinv)

    return res, reg_defect, omega_min


def solve_gare(model, weights, p_hat, conv_tol=1e-9, max_horizon=6400.0,
               step=1e-3, tols=DEFAULT_TOLS, start_horizon=50.0):
    '''
    --------------------------------------------------------------------
    Maximal solution of the GARE through the shifted Riccati equation.
    Z is integrated backward from Z(T, T) = 0 and the distance
    ||Z(tau) - Z(tau - 1)||_inf is checked at every unit of elapsed
    horizon tau. Integration continues from the current state when the
    horizon budget is doubled (start_horizon, 2 start_horizon, ...) until
    the distance is below conv_tol or max_horizon is exhausted.
    --------------------------------------------------------------------
    INPUTS:
    model         = length 4 tuple, (A, B, C, D)
    weights       = length 3 tuple, (Q, R, P_T)
    p_hat         = (n, n) array_like, admissible candidate
    conv_tol      = scalar > 0, convergence distance over one time unit
    max_horizon   = scalar > 0, largest horizon tried
    step          = scalar > 0, RK4 step
    tols          = length 3 tuple, (psd_tol, reg_tol, rank_tol)
    start_horizon = scalar > 0, first horizon budget

    OTHER FUNCTIONS AND FILES CALLED BY THIS FUNCTION:
        lmi.shifted_weights()
        lmi.membership()
        rk4_step()
        _rhs()
        finite_gain()
        gare_residual()
        utils.print_time()

    OBJECTS CREATED WITHIN FUNCTION:
    shifted      = length 3 dict, shifted weights of p_hat
    steps_unit   = integer >= 1, RK4 steps per unit of horizon
    Z            = (n, n) array, current shifted solution
    Z_prev       = (n, n) array, shifted solution one unit earlier
    dist         = scalar >= 0, convergence distance
    horizon_lim  = scalar > 0, current horizon budget
    tau          = scalar >= 0, elapsed horizon

    FILES CREATED BY THIS FUNCTION: None

    RETURNS: gare_output = dict, {p_bar, k_gain, z_bar, p_hat_used,
             residual, regularity_defect, omega_min_eig, iterations,
             horizon, comp_time}
    --------------------------------------------------------------------
    '''
    start_time = time.perf_counter()
    model = matops.check_model(model)
    n, m = model[1].shape
    psd_tol, reg_tol, rank_tol = tols
    p_hat = matops.sym_matrix(p_hat, 'p_hat')
    report = lmi.membership(model, weights, p_hat, psd_tol, rank_tol)
    if not report['member']:
        err_msg = ('ERROR: solve_gare() needs an admissible P_hat, ' +
                   'lambda_min of the LMI block: %10.4e, kernel ok: %s'
                   % (report['lmi_min_eig'], report['kernel_ok']))
        raise utils.ContractError(err_msg)
    shifted = lmi.shifted_weights(model, weights, p_hat)
    q_mat = shifted['q_shift']
    l_mat = shifted['l_shift']
    r_mat = shifted['r_shift']

    def deriv(X):
        return _rhs(model, q_mat, l_mat, r_mat, X, rank_tol, False)[0]

    steps_unit, h = _num_steps(1.0, step)
    Z = np.zeros((n, n))
    Z_prev = Z.copy()
    dist = np.inf
    tau = 0.0
    iterations = 0
    horizon_lim = min(float(start_horizon), float(max_horizon))
    while dist >= conv_tol:
        if tau >= horizon_lim - 1e-9:
            if horizon_lim >= max_horizon:
                err_msg = ('ERROR: shifted Riccati equation did not ' +
                           'converge within horizon ' + str(max_horizon) +
                           ', dist: %10.4e' % dist)
                raise utils.NonconvergenceError(err_msg,
                                                horizon=max_horizon)
            horizon_lim = min(2.0 * horizon_lim, float(max_horizon))
            logger.info('Extending SDRE horizon to %g, dist: %10.4e',
                        horizon_lim, dist)
        for k in range(steps_unit):
            Z = rk4_step(deriv, Z, h)
        iterations += steps_unit
        tau += 1.0
        _check_blowup(Z, 'elapsed horizon ' + str(tau))
        _, diag = _rhs(model, q_mat, l_mat, r_mat, Z, rank_tol, True)
        z_min = matops.min_eig_sym(Z)
        if (diag['omega_min'] < -psd_tol or diag['reg_defect'] > reg_tol
                or z_min < -psd_tol):
            err_msg = ('ERROR: SDRE constraints violated at elapsed ' +
                       'horizon ' + str(tau) + ', min eig of Omega: ' +
                       '%10.4e' % diag['omega_min'] +
                       ', regularity defect: %10.4e' % diag['reg_defect'] +
                       ', min eig of Z: %10.4e' % z_min)
            raise utils.SdreBreakdownError(
                err_msg, time=-tau, min_eig=float(diag['omega_min']),
                reg_defect=float(diag['reg_defect']))
        dist = matops.sup_norm(Z - Z_prev)
        Z_prev = Z.copy()
        logger.debug('SDRE horizon: %g, dist: %10.4e', tau, dist)

    z_bar = Z
    p_bar = matops.sym_matrix(z_bar + p_hat, 'P_bar')
    k_gain = finite_gain(model, weights, p_bar, rank_tol)
    res, reg_defect, omega_min = gare_residual(model, weights, p_bar,
                                               rank_tol)
    comp_time = time.perf_counter() - start_time
    gare_output = {'p_bar': p_bar, 'k_gain': k_gain, 'z_bar': z_bar,
                   'p_hat_used': p_hat, 'residual': res,
                   'regularity_defect': reg_defect,
                   'omega_min_eig': omega_min, 'iterations': iterations,
                   'horizon': tau, 'comp_time': comp_time}
    logger.info('GARE converged at horizon %g, dist: %10.4e, ' +
                'residual: %10.4e', tau, dist, res)
    utils.print_time(comp_time, 'GARE')

    return gare_output


def closedloop_data(model, shifted, z_bar, rank_tol=None, tol=1e-6):
    '''
    --------------------------------------------------------------------
    Closed-loop rewrite of the stationary shifted equation. With
        M_P   = B'Z_bar + D'Z_bar C + L_P'
        Om_P  = R_P + D'Z_bar D
        K     = -Om_P^+ M_P
        A_cl  = A + BK,  C_cl = C + DK
        Q_cl  = Q_P + L_P K + K'L_P' + K'R_P K
    the stationary equation reads
        A_cl'Z_bar + Z_bar A_cl + C_cl'Z_bar C_cl + Q_cl = 0
    and Q_cl >= 0.
    --------------------------------------------------------------------
    INPUTS:
    model    = length 4 tuple, (A, B, C, D)
    shifted  = length 3 dict, {q_shift, l_shift, r_shift}
    z_bar    = (n, n) array_like, stationary shifted solution
    rank_tol = scalar >= 0 or None, pseudo-inverse cutoff
    tol      = scalar > 0, relative bound on the rewrite residual

    OTHER FUNCTIONS AND FILES CALLED BY THIS FUNCTION:
        matops.pinv()
        matops.min_eig_sym()
        matops.sup_norm()

    OBJECTS CREATED WITHIN FUNCTION:
    resid = scalar >= 0, sup-norm of the rewritten equation

    FILES CREATED BY THIS FUNCTION: None

    RETURNS: cl_output = dict, {a_cl, c_cl, q_cl, k_shift,
             rewrite_residual, q_cl_min_eig}
    --------------------------------------------------------------------
    '''
    A, B, C, D = matops.check_model(model)
    z_bar = matops.sym_matrix(z_bar, 'z_bar')
    q_shift = shifted['q_shift']
    l_shift = shifted['l_shift']
    r_shift = shifted['r_shift']
    M = B.T @ z_bar + D.T @ z_bar @ C + l_shift.T
    Omega = r_shift + D.T @ z_bar @ D
    k_shift = -matops.pinv(0.5 * (Omega + Omega.T), rank_tol) @ M
    a_cl = A + B @ k_shift
    c_cl = C + D @ k_shift
    q_cl = (q_shift + l_shift @ k_shift + k_shift.T @ l_shift.T +
            k_shift.T @ r_shift @ k_shift)
    q_cl = 0.5 * (q_cl + q_cl.T)
    resid = matops.sup_norm(a_cl.T @ z_bar + z_bar @ a_cl +
                            c_cl.T @ z_bar @ c_cl + q_cl)
    if resid > tol * max(1.0, matops.sup_norm(z_bar)):
        err_msg = ('ERROR: closed-loop rewrite residual %10.4e exceeds ' +
                   'tolerance, z_bar does not solve the stationary ' +
                   'shifted equation') % resid
        raise utils.InconsistencyError(err_msg)
    q_cl_min_eig = matops.min_eig_sym(q_cl)
    if q_cl_min_eig < -tol * max(1.0, matops.sup_norm(q_cl)):
        logger.warning('Closed-loop weight Q_cl is indefinite, min eig: ' +
                       '%10.4e', q_cl_min_eig)
    cl_output = {'a_cl': a_cl, 'c_cl': c_cl, 'q_cl': q_cl,
                 'k_shift': k_shift, 'rewrite_residual': resid,
                 'q_cl_min_eig': q_cl_min_eig}

    return cl_output
