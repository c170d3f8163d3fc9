'''
------------------------------------------------------------------------
This module reads, validates and writes the JSON problem file of the
indefinite stochastic LQ solver, and serializes reports.

Problem file schema (matrices are arrays of row arrays):

    {
      "model":      {"A": [[..]], "B": [[..]], "C": [[..]], "D": [[..]]},
      "weights":    {"Q": [[..]], "R": [[..]], "P_T": null | [[..]]},
      "p_hat":      null | [[..]],
      "sim":        {"dt": 1e-3, "t_end": 60, "paths": 2000, "seed": 0,
                     "x0": null | [..]},
      "tolerances": {"psd_tol": 1e-8, "reg_tol": 1e-7,
                     "rank_tol": null, "conv_tol": 1e-9},
      "horizon":    {"step": 1e-3, "max_horizon": 6400,
                     "start_horizon": 50, "gdre_horizon": 10,
                     "lmi_max_iter": 5000, "lmi_step": 1.0,
                     "lmi_margin": 1e-2, "lmi_restarts": 5,
                     "lmi_seed": 0}
    }

Only model.{A,B,C,D} and weights.{Q,R} are required. The environment
variable ILQ_SEED overrides sim.seed.

This Python module imports the following module(s):
    utilities.py

This Python module defines the following function(s):
    read_problem()
    parse_matrix()
    parse_problem()
    write_problem()
    problem_to_dict()
    problem_args()
    model_of()
    weights_of()
    tols_of()
    sim_params_of()
    to_jsonable()
    dump_report()
------------------------------------------------------------------------
'''
# Import packages
import json
import logging
import os
import numpy as np
import utilities as utils

logger = logging.getLogger(__name__)

SIM_DEFAULTS = {'dt': 1e-3, 't_end': 60.0, 'paths': 2000, 'seed': 0,
                'x0': None}
TOL_DEFAULTS = {'psd_tol': 1e-8, 'reg_tol': 1e-7, 'rank_tol': None,
                'conv_tol': 1e-9}
HORIZON_DEFAULTS = {'step': 1e-3, 'max_horizon': 6400.0,
                    'start_horizon': 50.0, 'gdre_horizon': 10.0,
                    'lmi_max_iter': 5000, 'lmi_step': 1.0,
                    'lmi_margin': 1e-2, 'lmi_restarts': 5, 'lmi_seed': 0}
INT_FIELDS = ('paths', 'seed', 'lmi_max_iter', 'lmi_restarts', 'lmi_seed')
SEED_ENV = 'ILQ_SEED'

'''
------------------------------------------------------------------------
    Functions
------------------------------------------------------------------------
'''


def parse_matrix(value, field, shape=None):
    '''
    Parse a list of row lists into a float array, naming the offending
    field on failure. A bare number is read as a 1 x 1 matrix.
    '''
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        value = [[value]]
    if not isinstance(value, list) or len(value) == 0:
        raise utils.ProblemError('ERROR: ' + field + ' must be a ' +
                                 'nonempty array of rows')
    rows = []
    for i, row in enumerate(value):
        if not isinstance(row, list):
            raise utils.ProblemError('ERROR: ' + field + ' row ' + str(i) +
                                     ' is not an array')
        for entry in row:
            if isinstance(entry, bool) or \
                    not isinstance(entry, (int, float)):
                raise utils.ProblemError('ERROR: ' + field + ' row ' +
                                         str(i) + ' has a non-numeric ' +
                                         'entry')
        rows.append(row)
    width = len(rows[0]) if shape is None else shape[1]
    if shape is not None and len(rows) != shape[0]:
        raise utils.ProblemError('ERROR: ' + field + ' has ' +
                                 str(len(rows)) + ' rows, expected ' +
                                 str(shape[0]))
    for i, row in enumerate(rows):
        if len(row) != width:
            raise utils.ProblemError('ERROR: ' + field + ' row ' + str(i) +
                                     ' has length ' + str(len(row)) +
                                     ', expected ' + str(width))
    mat = np.array(rows, dtype=float)
    if not np.all(np.isfinite(mat)):
        raise utils.ProblemError('ERROR: ' + field + ' has non-finite ' +
                                 'entries')

    return mat


def _section(doc, key, defaults, path_name):
    sec = doc.get(key, {})
    if sec is None:
        sec = {}
    if not isinstance(sec, dict):
        raise utils.ProblemError('ERROR: ' + key + ' must be an object')
    unknown = set(sec) - set(defaults)
    if unknown:
        raise utils.ProblemError('ERROR: unknown field(s) ' + key + '.' +
                                 ', '.join(sorted(unknown)) + ' in ' +
                                 path_name)
    out = dict(defaults)
    out.update(sec)

    return out


def _positive(value, field, allow_none=False, integer=False):
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise utils.ProblemError('ERROR: ' + field + ' must be a number')
    if integer:
        if float(value) != int(value):
            raise utils.ProblemError('ERROR: ' + field +
                                     ' must be an integer')
        return int(value)
    if not value > 0 or not np.isfinite(value):
        raise utils.ProblemError('ERROR: ' + field + ' must be positive')

    return float(value)


def parse_problem(doc, path_name='<problem>'):
    '''
    --------------------------------------------------------------------
    Validate a decoded problem document and build the in-memory problem
    --------------------------------------------------------------------
    INPUTS:
    doc       = dict, decoded JSON document
    path_name = string, source name used in messages

    OTHER FUNCTIONS AND FILES CALLED BY THIS FUNCTION:
        parse_matrix()
        _section()
        _positive()

    OBJECTS CREATED WITHIN FUNCTION:
    n, m = integers >= 1, state and control dimensions

    FILES CREATED BY THIS FUNCTION: None

    RETURNS: problem = dict, {model, weights, p_hat, sim, tolerances,
             horizon} with numpy arrays for matrices
    --------------------------------------------------------------------
    '''
    if not isinstance(doc, dict):
        raise utils.ProblemError('ERROR: problem file must hold a JSON ' +
                                 'object')
    unknown = set(doc) - {'model', 'weights', 'p_hat', 'sim',
                          'tolerances', 'horizon'}
    if unknown:
        raise utils.ProblemError('ERROR: unknown field(s) ' +
                                 ', '.join(sorted(unknown)))
    model_doc = doc.get('model')
    weights_doc = doc.get('weights')
    if not isinstance(model_doc, dict):
        raise utils.ProblemError('ERROR: model is missing')
    if not isinstance(weights_doc, dict):
        raise utils.ProblemError('ERROR: weights is missing')
    for key in ('A', 'B', 'C', 'D'):
        if key not in model_doc:
            raise utils.ProblemError('ERROR: model.' + key + ' is missing')
    for key in ('Q', 'R'):
        if key not in weights_doc:
            raise utils.ProblemError('ERROR: weights.' + key +
                                     ' is missing')
    A = parse_matrix(model_doc['A'], 'model.A')
    n = A.shape[0]
    A = parse_matrix(model_doc['A'], 'model.A', (n, n))
    B = parse_matrix(model_doc['B'], 'model.B')
    m = B.shape[1]
    B = parse_matrix(model_doc['B'], 'model.B', (n, m))
    C = parse_matrix(model_doc['C'], 'model.C', (n, n))
    D = parse_matrix(model_doc['D'], 'model.D', (n, m))
    Q = parse_matrix(weights_doc['Q'], 'weights.Q', (n, n))
    R = parse_matrix(weights_doc['R'], 'weights.R', (m, m))
    P_T = weights_doc.get('P_T')
    if P_T is not None:
        P_T = parse_matrix(P_T, 'weights.P_T', (n, n))
    for mat, field in ((Q, 'weights.Q'), (R, 'weights.R'),
                       (P_T, 'weights.P_T')):
        if mat is not None and np.max(np.abs(mat - mat.T)) > \
                1e-12 * max(1.0, np.max(np.abs(mat))):
            raise utils.ProblemError('ERROR: ' + field +
                                     ' is not symmetric')
    p_hat = doc.get('p_hat')
    if p_hat is not None:
        p_hat = parse_matrix(p_hat, 'p_hat', (n, n))
        if np.max(np.abs(p_hat - p_hat.T)) > \
                1e-12 * max(1.0, np.max(np.abs(p_hat))):
            raise utils.ProblemError('ERROR: p_hat is not symmetric')

    sim = _section(doc, 'sim', SIM_DEFAULTS, path_name)
    sim['dt'] = _positive(sim['dt'], 'sim.dt')
    sim['t_end'] = _positive(sim['t_end'], 'sim.t_end')
    sim['paths'] = _positive(sim['paths'], 'sim.paths', integer=True)
    sim['seed'] = _positive(sim['seed'], 'sim.seed', integer=True)
    if sim['paths'] < 1:
        raise utils.ProblemError('ERROR: sim.paths must be >= 1')
    if sim['seed'] < 0 or sim['seed'] >= 2 ** 64:
        raise utils.ProblemError('ERROR: sim.seed must be a 64-bit ' +
                                 'unsigned integer')
    if sim['dt'] > sim['t_end']:
        raise utils.ProblemError('ERROR: sim.dt must be <= sim.t_end')
    if sim['x0'] is not None:
        x0 = parse_matrix([sim['x0']], 'sim.x0', (1, n))
        sim['x0'] = x0.ravel()

    tolerances = _section(doc, 'tolerances', TOL_DEFAULTS, path_name)
    for key in ('psd_tol', 'reg_tol', 'conv_tol'):
        tolerances[key] = _positive(tolerances[key], 'tolerances.' + key)
    tolerances['rank_tol'] = _positive(tolerances['rank_tol'],
                                       'tolerances.rank_tol',
                                       allow_none=True)

    horizon = _section(doc, 'horizon', HORIZON_DEFAULTS, path_name)
    for key in HORIZON_DEFAULTS:
        horizon[key] = _positive(horizon[key], 'horizon.' + key,
                                 integer=key in INT_FIELDS)
    if horizon['start_horizon'] > horizon['max_horizon']:
        raise utils.ProblemError('ERROR: horizon.start_horizon must be ' +
                                 '<= horizon.max_horizon')

    problem = {'model': {'A': A, 'B': B, 'C': C, 'D': D},
               'weights': {'Q': Q, 'R': R, 'P_T': P_T},
               'p_hat': p_hat, 'sim': sim, 'tolerances': tolerances,
               'horizon': horizon}

    return problem


def read_problem(path, use_env=True):
    '''
    --------------------------------------------------------------------
    Read and validate a JSON problem file
    --------------------------------------------------------------------
    INPUTS:
    path    = string, path of the problem file
    use_env = boolean, =True if ILQ_SEED may override sim.seed

    OTHER FUNCTIONS AND FILES CALLED BY THIS FUNCTION:
        parse_problem()

    OBJECTS CREATED WITHIN FUNCTION:
    doc  = dict, decoded JSON document
    seed = string, value of ILQ_SEED

    FILES CREATED BY THIS FUNCTION: None

    RETURNS: problem, dict
    --------------------------------------------------------------------
    '''
    try:
        with open(path, 'r', encoding='utf-8') as json_file:
            doc = json.load(json_file)
    except OSError as err:
        raise utils.ProblemError('ERROR: cannot read problem file ' +
                                 str(path) + ': ' + str(err))
    except ValueError as err:
        raise utils.ProblemError('ERROR: problem file ' + str(path) +
                                 ' is not valid JSON: ' + str(err))
    problem = parse_problem(doc, str(path))
    seed = os.environ.get(SEED_ENV)
    if use_env and seed is not None and seed != '':
        try:
            problem['sim']['seed'] = int(seed)
        except ValueError:
            raise utils.ProblemError('ERROR: ' + SEED_ENV +
                                     ' must be an integer')
        if not 0 <= problem['sim']['seed'] < 2 ** 64:
            raise utils.ProblemError('ERROR: ' + SEED_ENV + ' must be a ' +
                                     '64-bit unsigned integer')
        logger.info('Seed overridden by %s: %d', SEED_ENV,
                    problem['sim']['seed'])

    return problem


def to_jsonable(obj):
    '''
    Convert numpy arrays and scalars inside nested dicts, lists and
    tuples to plain Python objects. Floats are written by json with the
    shortest repr that round-trips exactly (at most 17 significant
    digits). Non-finite floats become None.
    '''
    if isinstance(obj, dict):
        return {str(key): to_jsonable(val) for key, val in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(val) for val in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        obj = float(obj)
        return obj if np.isfinite(obj) else None
    if isinstance(obj, complex):
        return [obj.real, obj.imag]

    return obj


def problem_to_dict(problem):
    '''
    JSON document of an in-memory problem (inverse of parse_problem)
    '''
    return to_jsonable({'model': problem['model'],
                        'weights': problem['weights'],
                        'p_hat': problem['p_hat'],
                        'sim': problem['sim'],
                        'tolerances': problem['tolerances'],
                        'horizon': problem['horizon']})


def write_problem(problem, path):
    '''
    Write an in-memory problem as a JSON problem file
    '''
    with open(path, 'w', encoding='utf-8') as json_file:
        json.dump(problem_to_dict(problem), json_file, indent=2)
        json_file.write('\n')


def model_of(problem):
    mod = problem['model']

    return (mod['A'], mod['B'], mod['C'], mod['D'])


def weights_of(problem):
    wgt = problem['weights']

    return (wgt['Q'], wgt['R'], wgt['P_T'])


def tols_of(problem):
    tol = problem['tolerances']

    return (tol['psd_tol'], tol['reg_tol'], tol['rank_tol'])


def sim_params_of(problem):
    sim = problem['sim']
    if sim['x0'] is None:
        raise utils.ProblemError('ERROR: sim.x0 is needed for this ' +
                                 'command')

    return (sim['dt'], sim['t_end'], sim['paths'], sim['seed'], sim['x0'])


def problem_args(problem):
    '''
    Flat tuple of everything that determines the GARE solution, compared
    with utils.compare_args() before a cached solution is reused
    '''
    tol = problem['tolerances']
    hor = problem['horizon']

    return (model_of(problem), weights_of(problem)[:2], problem['p_hat'],
            tols_of(problem), tol['conv_tol'],
            tuple(hor[key] for key in sorted(hor)))


def dump_report(report, stream):
    '''
    Write a report as one JSON document with sorted keys
    '''
    json.dump(to_jsonable(report), stream, indent=2, sort_keys=True)
    stream.write('\n')
