'''
------------------------------------------------------------------------
This module contains the seeded Euler-Maruyama Monte Carlo simulation
of the Ito system under linear feedback u = Kx or u = K(t)x,

    x_{k+1} = x_k + (A x_k + B u_k) dt + (C x_k + D u_k) sqrt(dt) xi_k

the estimation of E[x'(t)x(t)] and of the quadratic cost (unhalved
convention), and the comparison of these estimates with the Riccati
value identities.

Every path p draws its standard normal increments from its own
counter-based Philox stream with key seed * 2**64 + p, so a path's
noise does not depend on how many paths are run or in which order.
Statistics are reduced across paths in path-index order.

Simulation settings are passed as the tuple
    sim_params = (dt, t_end, paths, seed, x0)

This Python module imports the following module(s):
    matops.py
    stability.py
    utilities.py

This Python module defines the following function(s):
    path_generators()
    simulate_closedloop()
    estimate_cost_vs_value()
    simulate_finite_horizon()
------------------------------------------------------------------------
'''
# Import packages
import logging
import time
import numpy as np
import matops
import stability
import utilities as utils

logger = logging.getLogger(__name__)

BLOWUP = 1e12
CHUNK = 1000

'''
------------------------------------------------------------------------
    Functions
------------------------------------------------------------------------
'''


def _check_sim_params(sim_params, n):
    dt, t_end, paths, seed, x0 = sim_params
    if not (dt > 0 and t_end > 0 and dt <= t_end * (1.0 + 1e-12)):
        err_msg = ('ERROR: need 0 < dt <= t_end, got dt=' + str(dt) +
                   ', t_end=' + str(t_end))
        raise utils.ContractError(err_msg)
    if int(paths) < 1:
        raise utils.ContractError('ERROR: paths must be >= 1')
    if int(seed) < 0 or int(seed) >= 2 ** 64:
        raise utils.ContractError('ERROR: seed must be a 64-bit unsigned ' +
                                  'integer')
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.shape != (n,):
        err_msg = ('ERROR: x0 has length ' + str(x0.size) + ', expected ' +
                   str(n))
        raise utils.ContractError(err_msg)
    num_steps = max(1, int(round(t_end / dt)))

    return float(dt), float(t_end), int(paths), int(seed), x0, num_steps


def path_generators(seed, paths):
    '''
    Per-path numpy Generators on counter-based Philox streams keyed by
    (seed, path index)
    '''
    return [np.random.Generator(np.random.Philox(key=seed * 2 ** 64 + p))
            for p in range(paths)]


def _gain_schedule(gain, grid, n, m):
    '''
    Return a function k -> (m, n) gain at grid index k. A time-indexed
    gain is a pair (times, gains) with times ascending covering the
    grid; the gain at the nearest time stamp is used.
    '''
    if isinstance(gain, tuple):
        times, gains = gain
        times = np.asarray(times, dtype=float)
        gains = np.asarray(gains, dtype=float)
        if gains.shape != (times.size, m, n):
            err_msg = ('ERROR: gain table has shape ' + str(gains.shape) +
                       ', expected (' + str(times.size) + ', ' + str(m) +
                       ', ' + str(n) + ')')
            raise utils.ContractError(err_msg)
        slack = 1e-9 * max(1.0, grid[-1])
        if times[0] > grid[0] + slack or times[-1] < grid[-1] - slack:
            err_msg = ('ERROR: gain table covers [' + str(times[0]) +
                       ', ' + str(times[-1]) + '], simulation needs [0, ' +
                       str(grid[-1]) + ']')
            raise utils.ContractError(err_msg)
        right = np.clip(np.searchsorted(times, grid), 1, times.size - 1)
        left = right - 1
        nearest = np.where(np.abs(times[left] - grid) <=
                           np.abs(times[right] - grid), left, right)
        if times.size == 1:
            nearest = np.zeros(grid.size, dtype=int)
        return lambda k: gains[nearest[k]]
    K = np.atleast_2d(np.asarray(gain, dtype=float))
    if K.shape != (m, n):
        err_msg = ('ERROR: gain has shape ' + str(K.shape) +
                   ', expected (' + str(m) + ', ' + str(n) + ')')
        raise utils.ContractError(err_msg)

    return lambda k: K


def _mean_se(samples):
    '''
    Mean and standard error across paths (axis 0)
    '''
    paths = samples.shape[0]
    mean = np.mean(samples, axis=0)
    if paths == 1:
        return mean, np.zeros_like(mean)

    return mean, np.std(samples, axis=0, ddof=1) / np.sqrt(paths)


def simulate_closedloop(model, weights, gain, sim_params, penalty=None):
    '''
    --------------------------------------------------------------------
    Euler-Maruyama simulation of the Ito system under u = Kx (constant
    gain) or u = K(t)x (gain table), with per-path seeded noise
    --------------------------------------------------------------------
    INPUTS:
    model      = length 4 tuple, (A, B, C, D)
    weights    = length 3 tuple, (Q, R, P_T), running cost weights
    gain       = (m, n) array_like, or length 2 tuple (times, gains)
                 with gains (N_t, m, n)
    sim_params = length 5 tuple, (dt, t_end, paths, seed, x0)
    penalty    = None or length 2 tuple (K_ref, Omega); when given the
                 integral of (u - K_ref x)'Omega(u - K_ref x) dt is
                 estimated as well

    OTHER FUNCTIONS AND FILES CALLED BY THIS FUNCTION:
        path_generators()
        _gain_schedule()
        _mean_se()
        utils.print_time()

    OBJECTS CREATED WITHIN FUNCTION:
    X         = (paths, n) array, current states of all paths
    noise     = (chunk, paths) array, increments of the current chunk
    sq_norms  = (N+1, paths) array, x'x along each path
    cost      = (paths,) vector, accumulated running cost
    pen       = (paths,) vector, accumulated penalty

    FILES CREATED BY THIS FUNCTION: None

    RETURNS: traj_stats = dict, {grid, mean_sq, mean_sq_se,
             cost_estimate, cost_se, control_sample, paths, comp_time,
             final_states, path_costs} plus {penalty_estimate,
             penalty_se} when a penalty is requested
    --------------------------------------------------------------------
    '''
    start_time = time.perf_counter()
    A, B, C, D = matops.check_model(model)
    n, m = B.shape
    Q, R, _ = matops.check_weights(weights, n, m)
    dt, t_end, paths, seed, x0, num_steps = _check_sim_params(sim_params,
                                                               n)
    grid = dt * np.arange(num_steps + 1)
    gain_at = _gain_schedule(gain, grid, n, m)
    if penalty is not None:
        K_ref = np.atleast_2d(np.asarray(penalty[0], dtype=float))
        Omega = np.atleast_2d(np.asarray(penalty[1], dtype=float))

    generators = path_generators(seed, paths)
    sqrt_dt = np.sqrt(dt)
    X = np.tile(x0, (paths, 1))
    sq_norms = np.zeros((num_steps + 1, paths))
    sq_norms[0] = np.sum(X ** 2, axis=1)
    control_sample = np.zeros((num_steps + 1, m))
    cost = np.zeros(paths)
    pen = np.zeros(paths)
    logger.info('Simulating %d paths over [0, %g] with dt = %g', paths,
                t_end, dt)
    for chunk_start in range(0, num_steps, CHUNK):
        chunk = min(CHUNK, num_steps - chunk_start)
        noise = np.empty((chunk, paths))
        for p in range(paths):
            noise[:, p] = generators[p].standard_normal(chunk)
        for j in range(chunk):
            k = chunk_start + j
            K = gain_at(k)
            U = X @ K.T
            control_sample[k] = U[0]
            cost += (np.sum((X @ Q) * X, axis=1) +
                     np.sum((U @ R) * U, axis=1)) * dt
            if penalty is not None:
                dev = U - X @ K_ref.T
                pen += np.sum((dev @ Omega) * dev, axis=1) * dt
            drift = X @ A.T + U @ B.T
            diffusion = X @ C.T + U @ D.T
            X = X + drift * dt + diffusion * (sqrt_dt * noise[j])[:, None]
            if not np.all(np.isfinite(X)) or np.max(np.abs(X)) > BLOWUP:
                err_msg = ('ERROR: simulated state diverged at t = ' +
                           '%10.4e' % grid[k + 1])
                raise utils.DivergenceError(err_msg, time=float(grid[k + 1]))
            sq_norms[k + 1] = np.sum(X ** 2, axis=1)
    control_sample[num_steps] = X[0] @ gain_at(num_steps).T

    mean_sq, mean_sq_se = _mean_se(sq_norms.T)
    cost_estimate, cost_se = _mean_se(cost[:, None])
    comp_time = time.perf_counter() - start_time
    traj_stats = {'grid': grid, 'mean_sq': mean_sq,
                  'mean_sq_se': mean_sq_se,
                  'cost_estimate': float(cost_estimate[0]),
                  'cost_se': float(cost_se[0]),
                  'control_sample': control_sample, 'paths': paths,
                  'comp_time': comp_time, 'final_states': X,
                  'path_costs': cost}
    if penalty is not None:
        pen_estimate, pen_se = _mean_se(pen[:, None])
        traj_stats['penalty_estimate'] = float(pen_estimate[0])
        traj_stats['penalty_se'] = float(pen_se[0])
    utils.print_time(comp_time, 'Simulation')

    return traj_stats


def _tail_decay_rate(grid, mean_sq, fallback):
    '''
    Decay rate fitted by least squares to log mean_sq over the last 10
    percent of the grid, or fallback if the fit does not decay
    '''
    start = int(0.9 * (grid.size - 1))
    tail_t = grid[start:]
    tail_v = mean_sq[start:]
    if tail_t.size >= 2 and np.all(tail_v > 0):
        slope = np.polyfit(tail_t, np.log(tail_v), 1)[0]
        if slope < 0:
            return float(-slope)

    return float(fallback)


def estimate_cost_vs_value(model, weights, gain, p_matrix, sim_params,
                           k_opt=None, omega=None):
    '''
    --------------------------------------------------------------------
    Compare the Monte Carlo infinite-horizon cost of u = Kx, truncated
    at t_end, with the value x0'P x0. The truncated tail is bounded by
    ||Q + K'RK||_2 * mean_sq(t_end) / rate, with rate the decay rate of
    mean_sq over the last 10 percent of the grid. When the optimal gain
    k_opt and Omega = R + D'P_bar D are given, the penalty
    E int (u - k_opt x)'Omega(u - k_opt x) dt is estimated too, so that
    cost = value + penalty can be checked for suboptimal gains.
    --------------------------------------------------------------------
    INPUTS:
    model      = length 4 tuple, (A, B, C, D)
    weights    = length 3 tuple, (Q, R, P_T)
    gain       = (m, n) array_like, constant feedback gain
    p_matrix   = (n, n) array_like, value matrix
    sim_params = length 5 tuple, (dt, t_end, paths, seed, x0)
    k_opt      = None or (m, n) array_like, optimal gain
    omega      = None or (m, m) array_like, R + D'P_bar D

    OTHER FUNCTIONS AND FILES CALLED BY THIS FUNCTION:
        stability.mean_square_stable()
        simulate_closedloop()
        _tail_decay_rate()

    OBJECTS CREATED WITHIN FUNCTION:
    stab_report = dict, stability of the closed loop
    traj_stats  = dict, simulation statistics
    target      = scalar, x0'P x0
    tail_bound  = scalar >= 0, truncation tail estimate

    FILES CREATED BY THIS FUNCTION: None

    RETURNS: cost_output = dict, {cost_estimate, cost_se, target,
             tail_bound, difference, spectral_abscissa, traj_stats}
             plus {penalty_estimate, penalty_se} when k_opt is given
    --------------------------------------------------------------------
    '''
    A, B, C, D = matops.check_model(model)
    n, m = B.shape
    Q, R, _ = matops.check_weights(weights, n, m)
    K = np.atleast_2d(np.asarray(gain, dtype=float))
    p_matrix = matops.sym_matrix(p_matrix, 'p_matrix')
    stab_report = stability.mean_square_stable(A + B @ K, C + D @ K)
    if not stab_report['stable']:
        err_msg = ('ERROR: closed loop is not mean-square stable, ' +
                   'spectral abscissa: %10.4e, the infinite-horizon cost ' +
                   'diverges') % stab_report['spectral_abscissa']
        raise utils.DivergenceError(err_msg, time=np.inf)
    penalty = None
    if k_opt is not None:
        if omega is None:
            raise utils.ContractError('ERROR: omega is needed with k_opt')
        penalty = (k_opt, omega)
    traj_stats = simulate_closedloop(model, weights, K, sim_params,
                                     penalty)
    x0 = np.asarray(sim_params[4], dtype=float).ravel()
    target = float(x0 @ p_matrix @ x0)
    rate = _tail_decay_rate(traj_stats['grid'], traj_stats['mean_sq'],
                            stab_report['decay_rate'])
    tail_bound = (np.linalg.norm(Q + K.T @ R @ K, 2) *
                  traj_stats['mean_sq'][-1] / rate)
    if tail_bound > 0.1 * abs(target):
        logger.warning('Truncation tail bound %10.4e is large relative ' +
                       'to the value %10.4e', tail_bound, target)
    cost_output = {'cost_estimate': traj_stats['cost_estimate'],
                   'cost_se': traj_stats['cost_se'], 'target': target,
                   'tail_bound': float(tail_bound),
                   'difference': traj_stats['cost_estimate'] - target,
                   'spectral_abscissa': stab_report['spectral_abscissa'],
                   'traj_stats': traj_stats}
    if penalty is not None:
        cost_output['penalty_estimate'] = traj_stats['penalty_estimate']
        cost_output['penalty_se'] = traj_stats['penalty_se']

    return cost_output


def simulate_finite_horizon(model, weights, gdre, sim_params):
    '''
    --------------------------------------------------------------------
    Simulate the finite-horizon optimal loop u = K(t)x with the gain
    table of a GDRE solution and compare the Monte Carlo cost, running
    cost on [0, t_end] plus the terminal term x(t_end)'P(t_end)x(t_end),
    with x0'P(0)x0
    --------------------------------------------------------------------
    INPUTS:
    model      = length 4 tuple, (A, B, C, D)
    weights    = length 3 tuple, (Q, R, P_T)
    gdre       = dict, output of riccati.integrate_gdre()
    sim_params = length 5 tuple, (dt, t_end, paths, seed, x0); dt must
                 be an integer multiple of the GDRE step and the GDRE
                 grid must cover [0, t_end]

    OTHER FUNCTIONS AND FILES CALLED BY THIS FUNCTION:
        simulate_closedloop()

    OBJECTS CREATED WITHIN FUNCTION:
    times    = (N_t,) vector, ascending GDRE time stamps
    p_end    = (n, n) array, P(t_end) used as terminal weight
    terminal = (paths,) vector, terminal cost of each path

    FILES CREATED BY THIS FUNCTION: None

    RETURNS: fh_output = dict, {cost_estimate, cost_se, target,
             difference, traj_stats}
    --------------------------------------------------------------------
    '''
    A, B, C, D = matops.check_model(model)
    n, m = B.shape
    dt, t_end = float(sim_params[0]), float(sim_params[1])
    times = np.asarray(gdre['grid'], dtype=float)[::-1]
    p_table = np.asarray(gdre['p_of_t'])[::-1]
    k_table = np.asarray(gdre['k_of_t'])[::-1]
    ratio = dt / gdre['step']
    if abs(ratio - round(ratio)) > 1e-6 or round(ratio) < 1:
        err_msg = ('ERROR: dt = ' + str(dt) + ' is not an integer ' +
                   'multiple of the GDRE step ' + str(gdre['step']))
        raise utils.ContractError(err_msg)
    slack = 1e-9 * max(1.0, t_end)
    if times[0] > slack or times[-1] < t_end - slack:
        err_msg = ('ERROR: GDRE grid covers [' + str(times[0]) + ', ' +
                   str(times[-1]) + '], simulation needs [0, ' +
                   str(t_end) + ']')
        raise utils.ContractError(err_msg)
    traj_stats = simulate_closedloop(model, weights, (times, k_table),
                                     sim_params)
    p_end = p_table[int(np.argmin(np.abs(times - traj_stats['grid'][-1])))]
    X = traj_stats['final_states']
    terminal = np.sum((X @ p_end) * X, axis=1)
    cost_estimate, cost_se = _mean_se(
        (traj_stats['path_costs'] + terminal)[:, None])
    x0 = np.asarray(sim_params[4], dtype=float).ravel()
    target = float(x0 @ p_table[0] @ x0)
    fh_output = {'cost_estimate': float(cost_estimate[0]),
                 'cost_se': float(cost_se[0]), 'target': target,
                 'difference': float(cost_estimate[0]) - target,
                 'traj_stats': traj_stats}

    return fh_output
