'''
------------------------------------------------------------------------
This program is the command-line front end of the indefinite stochastic
LQ solver. It reads a JSON problem file (see problem.py), runs the
admissible-set search, the GARE solution with its stability and
detectability checks, and the Monte Carlo simulation, and writes a JSON
report to stdout plus CSV time series.

    python execute.py feasible <file>
    python execute.py solve <file> [--gdre-csv <path>]
    python execute.py simulate <file> --gain {optimal,zero,file}
                               [--gain-file <path>] [--out <dir>]

Exit codes:
    0 success
    1 problem file parse or validation failure, contract violation
    2 no admissible P_hat
    3 GARE solved but the closed loop is not mean-square stable
    4 nonconvergence, Riccati breakdown, inconsistency or numerical
      failure
    5 simulated state diverged

This Python script imports the following module(s):
    lmi.py
    matops.py
    problem.py
    riccati.py
    simulate.py
    stability.py
    utilities.py

This Python script calls the following function(s):
    prob.read_problem()
    lmi.membership()
    lmi.find_feasible()
    lmi.shifted_weights()
    lmi.schur_consequences()
    ricc.solve_gare()
    ricc.closedloop_data()
    ricc.gdre_rhs()
    ricc.integrate_gdre()
    stab.mean_square_stable()
    stab.exact_detectable()
    stab.detectability_preserved()
    sim.simulate_closedloop()
    sim.estimate_cost_vs_value()
    utils.compare_args()

Files created by this script:
    <--gdre-csv path>
    <out>/trajectory.csv
    <out>/report.json
    <out>/gare_vars.pkl
    <out>/gare_args.pkl
------------------------------------------------------------------------
'''
# Import packages
import argparse
import json
import logging
import os
import pickle
import sys
import time
import numpy as np
import pandas as pd
import lmi
import matops
import problem as prob
import riccati as ricc
import simulate as sim
import stability as stab
import utilities as utils

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INFEASIBLE = 2
EXIT_UNSTABLE = 3
EXIT_SOLVER = 4
EXIT_DIVERGED = 5

'''
------------------------------------------------------------------------
    Functions
------------------------------------------------------------------------
'''


def write_csv(data, path):
    '''
    Write a DataFrame with full-precision, locale-independent floats and
    newline-terminated rows
    '''
    data.to_csv(path, index=False, float_format='%.17g',
                lineterminator='\n')


def get_candidate(problem):
    '''
    --------------------------------------------------------------------
    Admissible P_hat of a problem: membership of the supplied p_hat, or
    the result of the feasibility search
    --------------------------------------------------------------------
    INPUTS:
    problem = dict, in-memory problem

    OTHER FUNCTIONS AND FILES CALLED BY THIS FUNCTION:
        lmi.membership()
        lmi.find_feasible()

    OBJECTS CREATED WITHIN FUNCTION:
    hor  = dict, horizon controls
    opts = dict, feasibility search options

    FILES CREATED BY THIS FUNCTION: None

    RETURNS: cand = dict, {feasible, p_hat, lmi_min_eig, kernel_ok,
             source, iterations}
    --------------------------------------------------------------------
    '''
    model = prob.model_of(problem)
    weights = prob.weights_of(problem)
    psd_tol, reg_tol, rank_tol = prob.tols_of(problem)
    if problem['p_hat'] is not None:
        report = lmi.membership(model, weights, problem['p_hat'], psd_tol,
                                rank_tol)
        return {'feasible': report['member'], 'p_hat': problem['p_hat'],
                'lmi_min_eig': report['lmi_min_eig'],
                'kernel_ok': report['kernel_ok'], 'source': 'supplied',
                'iterations': 0}
    hor = problem['horizon']
    opts = {'max_iter': hor['lmi_max_iter'], 'step': hor['lmi_step'],
            'tol': psd_tol, 'margin': hor['lmi_margin'],
            'restarts': hor['lmi_restarts'], 'seed': hor['lmi_seed'],
            'rank_tol': rank_tol}
    feas_output = lmi.find_feasible(model, weights, opts)

    return {'feasible': feas_output['feasible'],
            'p_hat': feas_output['p_hat'],
            'lmi_min_eig': feas_output['lmi_min_eig'],
            'kernel_ok': feas_output['kernel_ok'], 'source': 'search',
            'iterations': feas_output['iterations']}


def cmd_feasible(path):
    '''
    Run the admissible-set search (or test the supplied p_hat). Exit 0
    if an admissible P_hat is found, 2 otherwise.
    '''
    problem = prob.read_problem(path)
    cand = get_candidate(problem)
    report = dict(cand, command='feasible')
    code = EXIT_OK if cand['feasible'] else EXIT_INFEASIBLE
    report['exit_code'] = code

    return code, report


def solve_problem(problem):
    '''
    --------------------------------------------------------------------
    Admissible P_hat, maximal GARE solution, closed-loop stability and
    detectability checks of a problem
    --------------------------------------------------------------------
    INPUTS:
    problem = dict, in-memory problem

    OTHER FUNCTIONS AND FILES CALLED BY THIS FUNCTION:
        get_candidate()
        lmi.shifted_weights()
        lmi.schur_consequences()
        ricc.solve_gare()
        ricc.closedloop_data()
        ricc.gdre_rhs()
        stab.mean_square_stable()
        stab.exact_detectable()
        stab.detectability_preserved()

    OBJECTS CREATED WITHIN FUNCTION:
    cand        = dict, admissible candidate
    shifted     = dict, shifted weights of the candidate
    gare_output = dict, GARE solution
    cl_output   = dict, closed-loop data
    stab_report = dict, stability of A + BK, C + DK

    FILES CREATED BY THIS FUNCTION: None

    RETURNS: (code, report, gare_output); gare_output is None when no
             admissible P_hat exists
    --------------------------------------------------------------------
    '''
    model = prob.model_of(problem)
    weights = prob.weights_of(problem)
    tols = prob.tols_of(problem)
    psd_tol, reg_tol, rank_tol = tols
    hor = problem['horizon']
    A, B, C, D = matops.check_model(model)

    cand = get_candidate(problem)
    report = {'command': 'solve', 'candidate': cand}
    if not cand['feasible']:
        report['exit_code'] = EXIT_INFEASIBLE
        return EXIT_INFEASIBLE, report, None

    shifted = lmi.shifted_weights(model, weights, cand['p_hat'])
    schur = lmi.schur_consequences(shifted, psd_tol, rank_tol)
    if not schur['ok']:
        logger.warning('Schur-complement consequences fail for P_hat: %s',
                       schur)
    gare_output = ricc.solve_gare(model, weights, cand['p_hat'],
                                  problem['tolerances']['conv_tol'],
                                  hor['max_horizon'], hor['step'], tols,
                                  hor['start_horizon'])
    cl_output = ricc.closedloop_data(model, shifted, gare_output['z_bar'],
                                     rank_tol)
    K = gare_output['k_gain']
    stab_report = stab.mean_square_stable(A + B @ K, C + D @ K)
    q_tol = psd_tol * max(1.0, matops.sup_norm(shifted['q_shift']))
    detect = stab.exact_detectable(
        A, C, matops.sqrt_psd(shifted['q_shift'], q_tol))
    if detect['detectable']:
        preserved = stab.detectability_preserved(
            model, shifted, gare_output['z_bar'], psd_tol, rank_tol)
    else:
        preserved = None
    stationarity = matops.sup_norm(
        ricc.gdre_rhs(model, weights, gare_output['p_bar'], rank_tol)[0])

    report.update({'schur': schur, 'p_bar': gare_output['p_bar'],
                   'k_gain': K, 'z_bar': gare_output['z_bar'],
                   'residual': gare_output['residual'],
                   'regularity_defect': gare_output['regularity_defect'],
                   'omega_min_eig': gare_output['omega_min_eig'],
                   'stationarity': stationarity,
                   'horizon': gare_output['horizon'],
                   'iterations': gare_output['iterations'],
                   'closed_loop': {
                       'rewrite_residual': cl_output['rewrite_residual'],
                       'q_cl_min_eig': cl_output['q_cl_min_eig']},
                   'stability': stab_report,
                   'detectable': detect['detectable'],
                   'detectability_preserved': preserved,
                   'value': None, 'shifted_value': None})
    x0 = problem['sim']['x0']
    if x0 is not None:
        report['value'] = float(x0 @ gare_output['p_bar'] @ x0)
        report['shifted_value'] = float(x0 @ gare_output['z_bar'] @ x0)
    code = EXIT_OK if stab_report['stable'] else EXIT_UNSTABLE
    report['exit_code'] = code

    return code, report, gare_output


def write_gdre_csv(problem, gare_output, path):
    '''
    --------------------------------------------------------------------
    Integrate the GDRE from the terminal weight P_T (or from the
    admissible P_hat when P_T is absent) over horizon.gdre_horizon and
    write t, P_ij, K_ij, omega_min, reg_defect to a CSV file
    --------------------------------------------------------------------
    INPUTS:
    problem     = dict, in-memory problem
    gare_output = dict, GARE solution (supplies p_hat_used)
    path        = string, CSV path

    OTHER FUNCTIONS AND FILES CALLED BY THIS FUNCTION:
        ricc.integrate_gdre()
        write_csv()

    OBJECTS CREATED WITHIN FUNCTION:
    gdre_output = dict, GDRE solution
    columns     = dict, CSV columns

    FILES CREATED BY THIS FUNCTION: path

    RETURNS: gdre_output
    --------------------------------------------------------------------
    '''
    model = prob.model_of(problem)
    weights = prob.weights_of(problem)
    terminal = weights[2]
    if terminal is None:
        terminal = gare_output['p_hat_used']
    hor = problem['horizon']
    gdre_output = ricc.integrate_gdre(model, weights, terminal,
                                      hor['gdre_horizon'], hor['step'],
                                      prob.tols_of(problem))
    n = gdre_output['p_of_t'].shape[1]
    m = gdre_output['k_of_t'].shape[1]
    columns = {'t': gdre_output['grid']}
    for i in range(n):
        for j in range(n):
            columns['P_' + str(i + 1) + str(j + 1)] = \
                gdre_output['p_of_t'][:, i, j]
    for i in range(m):
        for j in range(n):
            columns['K_' + str(i + 1) + str(j + 1)] = \
                gdre_output['k_of_t'][:, i, j]
    columns['omega_min'] = gdre_output['omega_min']
    columns['reg_defect'] = gdre_output['reg_defect']
    utils.make_output_dir(os.path.dirname(path) or '.')
    write_csv(pd.DataFrame(columns), path)
    logger.info('GDRE solution written to %s', path)

    return gdre_output


def cmd_solve(path, gdre_csv=None):
    '''
    Solve the GARE of a problem file. Exit 0 on success, 2 if no
    admissible P_hat exists, 3 if the closed loop is not mean-square
    stable.
    '''
    problem = prob.read_problem(path)
    code, report, gare_output = solve_problem(problem)
    if gdre_csv is not None and gare_output is not None:
        write_gdre_csv(problem, gare_output, gdre_csv)
        report['gdre_csv'] = gdre_csv

    return code, report


def load_or_solve(problem, output_dir):
    '''
    --------------------------------------------------------------------
    Reuse the pickled GARE solution in output_dir if it was produced
    from the same problem arguments, otherwise solve and pickle it
    --------------------------------------------------------------------
    INPUTS:
    problem    = dict, in-memory problem
    output_dir = string, folder of gare_vars.pkl and gare_args.pkl

    OTHER FUNCTIONS AND FILES CALLED BY THIS FUNCTION:
        prob.problem_args()
        utils.compare_args()
        solve_problem()

    OBJECTS CREATED WITHIN FUNCTION:
    cur_args   = tuple, current GARE arguments
    gare_args  = tuple, arguments of the pickled solution
    args_same  = boolean, =True if gare_args == cur_args

    FILES CREATED BY THIS FUNCTION:
        <output_dir>/gare_vars.pkl
        <output_dir>/gare_args.pkl

    RETURNS: (code, solve_report, gare_output)
    --------------------------------------------------------------------
    '''
    vars_file = os.path.join(output_dir, 'gare_vars.pkl')
    args_file = os.path.join(output_dir, 'gare_args.pkl')
    cur_args = prob.problem_args(problem)
    if os.path.exists(vars_file) and os.path.exists(args_file):
        with open(args_file, 'rb') as pkl_file:
            gare_args = pickle.load(pkl_file)
        args_same = utils.compare_args(gare_args, cur_args)
        if args_same:
            logger.info('RETRIEVE GARE SOLUTION FROM FILE')
            with open(vars_file, 'rb') as pkl_file:
                return pickle.load(pkl_file)
    code, report, gare_output = solve_problem(problem)
    with open(vars_file, 'wb') as pkl_file:
        pickle.dump((code, report, gare_output), pkl_file)
    with open(args_file, 'wb') as pkl_file:
        pickle.dump(cur_args, pkl_file)

    return code, report, gare_output


def read_gain_file(path, n, m):
    '''
    Read a feedback gain from a JSON file {"gain": [[...]]}
    '''
    try:
        with open(path, 'r', encoding='utf-8') as json_file:
            doc = json.load(json_file)
    except (OSError, ValueError) as err:
        raise utils.ProblemError('ERROR: cannot read gain file ' +
                                 str(path) + ': ' + str(err))
    if not isinstance(doc, dict) or 'gain' not in doc:
        raise utils.ProblemError('ERROR: gain file needs a "gain" field')

    return prob.parse_matrix(doc['gain'], 'gain', (m, n))


def cmd_simulate(path, gain_mode, gain_file=None, out_dir=None):
    '''
    --------------------------------------------------------------------
    Simulate the loop u = Kx for the optimal, zero or file gain and
    write trajectory.csv (t, mean_sq, mean_sq_se, u0 with u0 the first
    control component of path 0) and report.json into out_dir
    --------------------------------------------------------------------
    INPUTS:
    path      = string, problem file
    gain_mode = string, 'optimal', 'zero' or 'file'
    gain_file = string or None, JSON gain file for gain_mode 'file'
    out_dir   = string or None, output folder (default OUTPUT/simulate
                next to this script)

    OTHER FUNCTIONS AND FILES CALLED BY THIS FUNCTION:
        load_or_solve()
        read_gain_file()
        stab.mean_square_stable()
        sim.estimate_cost_vs_value()
        sim.simulate_closedloop()
        write_csv()

    OBJECTS CREATED WITHIN FUNCTION:
    K          = (m, n) array, simulated gain
    traj_stats = dict, simulation statistics

    FILES CREATED BY THIS FUNCTION:
        <out_dir>/trajectory.csv
        <out_dir>/report.json

    RETURNS: (code, report)
    --------------------------------------------------------------------
    '''
    problem = prob.read_problem(path)
    model = prob.model_of(problem)
    weights = prob.weights_of(problem)
    sim_params = prob.sim_params_of(problem)
    A, B, C, D = matops.check_model(model)
    n, m = B.shape
    if out_dir is None:
        cur_path = os.path.split(os.path.abspath(__file__))[0]
        out_dir = os.path.join(cur_path, 'OUTPUT', 'simulate')
    utils.make_output_dir(out_dir)
    report = {'command': 'simulate', 'gain_mode': gain_mode,
              'out_dir': out_dir, 'target': None, 'tail_bound': None,
              'penalty_estimate': None, 'penalty_se': None}

    gare_output = None
    if gain_mode == 'optimal':
        code, solve_report, gare_output = load_or_solve(problem, out_dir)
        if code != EXIT_OK:
            report.update({'solve': solve_report, 'exit_code': code})
            return code, report
        K = gare_output['k_gain']
    elif gain_mode == 'zero':
        K = np.zeros((m, n))
    elif gain_mode == 'file':
        if gain_file is None:
            raise utils.ProblemError('ERROR: --gain file needs ' +
                                     '--gain-file')
        K = read_gain_file(gain_file, n, m)
    else:
        raise utils.ProblemError('ERROR: unknown gain mode ' +
                                 str(gain_mode))
    stab_report = stab.mean_square_stable(A + B @ K, C + D @ K)
    report['gain'] = K
    report['stability'] = stab_report

    try:
        if gare_output is not None:
            P_bar = gare_output['p_bar']
            omega = weights[1] + D.T @ P_bar @ D
            cost_output = sim.estimate_cost_vs_value(
                model, weights, K, P_bar, sim_params, k_opt=K,
                omega=omega)
            traj_stats = cost_output['traj_stats']
            for key in ('target', 'tail_bound', 'penalty_estimate',
                        'penalty_se'):
                report[key] = cost_output[key]
        else:
            traj_stats = sim.simulate_closedloop(model, weights, K,
                                                 sim_params)
    except utils.DivergenceError as err:
        report.update({'diverged': True, 'blowup_time': err.time,
                       'error': str(err), 'exit_code': EXIT_DIVERGED})
        with open(os.path.join(out_dir, 'report.json'), 'w',
                  encoding='utf-8') as json_file:
            prob.dump_report(report, json_file)
        return EXIT_DIVERGED, report

    trajectory = pd.DataFrame({'t': traj_stats['grid'],
                               'mean_sq': traj_stats['mean_sq'],
                               'mean_sq_se': traj_stats['mean_sq_se'],
                               'u0': traj_stats['control_sample'][:, 0]})
    write_csv(trajectory, os.path.join(out_dir, 'trajectory.csv'))
    report.update({'diverged': False,
                   'cost_estimate': traj_stats['cost_estimate'],
                   'cost_se': traj_stats['cost_se'],
                   'paths': traj_stats['paths'],
                   'mean_sq_final': traj_stats['mean_sq'][-1],
                   'exit_code': EXIT_OK})
    with open(os.path.join(out_dir, 'report.json'), 'w',
              encoding='utf-8') as json_file:
        prob.dump_report(report, json_file)

    return EXIT_OK, report


def get_parser():
    parser = argparse.ArgumentParser(
        prog='execute.py',
        description='Indefinite stochastic LQ control of Ito systems')
    parser.add_argument('-v', '--verbose', action='store_true',
                        help='log solver progress at DEBUG level')
    subparsers = parser.add_subparsers(dest='command')
    subparsers.required = True
    p_feas = subparsers.add_parser('feasible',
                                   help='search the admissible set')
    p_feas.add_argument('file')
    p_solve = subparsers.add_parser('solve', help='solve the GARE')
    p_solve.add_argument('file')
    p_solve.add_argument('--gdre-csv', default=None,
                         help='write the finite-horizon GDRE solution')
    p_sim = subparsers.add_parser('simulate',
                                  help='Monte Carlo closed-loop run')
    p_sim.add_argument('file')
    p_sim.add_argument('--gain', required=True,
                       choices=['optimal', 'zero', 'file'])
    p_sim.add_argument('--gain-file', default=None)
    p_sim.add_argument('--out', default=None)

    return parser


def main(argv=None):
    '''
    --------------------------------------------------------------------
    Parse the command line, run the command, print the JSON report to
    stdout and return the exit code
    --------------------------------------------------------------------
    INPUTS:
    argv = list of strings or None, command-line arguments

    OTHER FUNCTIONS AND FILES CALLED BY THIS FUNCTION:
        get_parser()
        cmd_feasible()
        cmd_solve()
        cmd_simulate()
        prob.dump_report()
        utils.print_time()

    OBJECTS CREATED WITHIN FUNCTION:
    args = argparse Namespace
    code = integer in 0..5, exit code

    FILES CREATED BY THIS FUNCTION: see cmd_solve() and cmd_simulate()

    RETURNS: code
    --------------------------------------------------------------------
    '''
    parser = get_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return EXIT_OK if err.code == 0 else EXIT_INPUT
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        stream=sys.stderr, format='%(levelname)s %(name)s: %(message)s')
    start_time = time.perf_counter()
    try:
        if args.command == 'feasible':
            code, report = cmd_feasible(args.file)
        elif args.command == 'solve':
            code, report = cmd_solve(args.file, args.gdre_csv)
        else:
            code, report = cmd_simulate(args.file, args.gain,
                                        args.gain_file, args.out)
    except (utils.ProblemError, utils.ContractError,
            utils.NotPsdError) as err:
        code, report = EXIT_INPUT, {'error': str(err)}
    except (utils.NonconvergenceError, utils.GdreBreakdownError,
            utils.InconsistencyError, utils.NumericalFailure) as err:
        code, report = EXIT_SOLVER, {'error': str(err)}
    except utils.DivergenceError as err:
        code, report = EXIT_DIVERGED, {'error': str(err),
                                       'blowup_time': err.time}
    except OSError as err:
        # output path not writable
        code, report = EXIT_INPUT, {'error': 'ERROR: cannot write ' +
                                    'output: ' + str(err)}
    if 'error' in report:
        logger.error(report['error'])
        report.update({'command': args.command, 'exit_code': code})
    prob.dump_report(report, sys.stdout)
    utils.print_time(time.perf_counter() - start_time, args.command)

    return code


if __name__ == '__main__':
    sys.exit(main())
