'''
------------------------------------------------------------------------
This module contains the dense symmetric-matrix utilities that every
other module of the indefinite stochastic LQ solver depends on:
Moore-Penrose pseudo-inverse, positive semi-definiteness tests, kernel
bases, the PSD square root, and the second-moment (Kronecker) lift of
the Ito system

    dx(t) = [Ax(t) + Bu(t)]dt + [Cx(t) + Du(t)]dw(t)

Matrices are numpy arrays. Vectorization is row-major (numpy default),
so that vec(A X B') = kron(A, B) vec(X).

This Python module imports the following module(s):
    utilities.py

This Python module defines the following function(s):
    sym_matrix()
    check_model()
    check_weights()
    sup_norm()
    default_rank_tol()
    pinv()
    min_eig_sym()
    psd()
    kernel_basis()
    kernel_included()
    sqrt_psd()
    moment_lift()
------------------------------------------------------------------------
'''
# Import packages
import logging
import numpy as np
import utilities as utils

logger = logging.getLogger(__name__)

'''
------------------------------------------------------------------------
    Functions
------------------------------------------------------------------------
'''


def sym_matrix(M, name='M'):
    '''
    --------------------------------------------------------------------
    Return the symmetric part (M + M')/2 of a square real matrix as a
    float array. The symmetrization defect is logged at DEBUG level.
    --------------------------------------------------------------------
    INPUTS:
    M    = (n, n) array_like, square real matrix
    name = string, name of the matrix used in error and log messages

    OTHER FUNCTIONS AND FILES CALLED BY THIS FUNCTION:
        sup_norm()

    OBJECTS CREATED WITHIN FUNCTION:
    err_msg = string, error message
    defect  = scalar >= 0, largest absolute entry of M - M'

    FILES CREATED BY THIS FUNCTION: None

    RETURNS: (n, n) symmetric float array
    --------------------------------------------------------------------
    '''
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 1:
        err_msg = ('ERROR: ' + name + ' must be a nonempty square ' +
                   'matrix, got shape ' + str(M.shape))
        raise utils.ContractError(err_msg)
    defect = sup_norm(M - M.T)
    if defect > 0.0:
        logger.debug('%s symmetrized, defect: %10.4e', name, defect)

    return 0.5 * (M + M.T)


def check_model(model):
    '''
    --------------------------------------------------------------------
    Validate the dimensions of the system model and return its matrices
    as float arrays
    --------------------------------------------------------------------
    INPUTS:
    model = length 4 tuple, (A, B, C, D) with A, C (n, n) and B, D
            (n, m)

    OTHER FUNCTIONS AND FILES CALLED BY THIS FUNCTION: None

    OBJECTS CREATED WITHIN FUNCTION:
    n       = integer >= 1, state dimension
    m       = integer >= 1, control dimension
    err_msg = string, error message

    FILES CREATED BY THIS FUNCTION: None

    RETURNS: (A, B, C, D)
    --------------------------------------------------------------------
    '''
    A, B, C, D = (np.atleast_2d(np.asarray(mat, dtype=float))
                  for mat in model)
    n = A.shape[0]
    if A.shape != (n, n) or C.shape != (n, n):
        err_msg = ('ERROR: A and C must be square of equal dimension, ' +
                   'got ' + str(A.shape) + ' and ' + str(C.shape))
        raise utils.ContractError(err_msg)
    if B.ndim != 2 or B.shape[0] != n or B.shape != D.shape:
        err_msg = ('ERROR: B and D must both be (n, m) with n = ' +
                   str(n) + ', got ' + str(B.shape) + ' and ' +
                   str(D.shape))
        raise utils.ContractError(err_msg)
    m = B.shape[1]
    if m < 1:
        raise utils.ContractError('ERROR: control dimension must be >= 1')

    return A, B, C, D


def check_weights(weights, n, m):
    '''
    Validate the cost weights (Q, R, P_T) against the dimensions (n, m)
    and return symmetric float arrays. P_T may be None.
    '''
    Q, R, P_T = weights
    Q = sym_matrix(Q, 'Q')
    R = sym_matrix(R, 'R')
    if Q.shape != (n, n) or R.shape != (m, m):
        err_msg = ('ERROR: weights have shapes Q ' + str(Q.shape) +
                   ', R ' + str(R.shape) + ', expected (' + str(n) +
                   ', ' + str(n) + ') and (' + str(m) + ', ' + str(m) +
                   ')')
        raise utils.ContractError(err_msg)
    if P_T is not None:
        P_T = sym_matrix(P_T, 'P_T')
        if P_T.shape != (n, n):
            raise utils.ContractError('ERROR: P_T must be (n, n)')

    return Q, R, P_T


def sup_norm(M):
    '''
    Largest absolute entry of M, the norm used for every residual,
    regularity defect and convergence distance
    '''
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 0.0

    return float(np.max(np.abs(M)))


def default_rank_tol(M, sing_vals=None):
    '''
    Standard SVD rank cutoff: machine epsilon * max(rows, cols) *
    largest singular value
    '''
    M = np.atleast_2d(M)
    if sing_vals is None:
        sing_vals = np.linalg.svd(M, compute_uv=False)
    s_max = float(np.max(sing_vals)) if np.size(sing_vals) > 0 else 0.0

    return np.finfo(float).eps * max(M.shape) * s_max


def _svd(M, full_matrices=False):
    try:
        return np.linalg.svd(M, full_matrices=full_matrices)
    except np.linalg.LinAlgError as err:
        err_msg = 'ERROR: SVD did not converge: ' + str(err)
        raise utils.NumericalFailure(err_msg, matrix=M)


def pinv(M, rank_tol=None):
    '''
    --------------------------------------------------------------------
    Moore-Penrose pseudo-inverse by singular value decomposition.
    Singular values above rank_tol are inverted, the rest are set to
    zero.
    --------------------------------------------------------------------
    INPUTS:
    M        = (p, q) array_like, real matrix
    rank_tol = scalar >= 0 or None, absolute singular value cutoff.
               None gives default_rank_tol(M)

    OTHER FUNCTIONS AND FILES CALLED BY THIS FUNCTION:
        default_rank_tol()

    OBJECTS CREATED WITHIN FUNCTION:
    U, s, Vt = SVD factors of M
    large    = boolean vector, =True for singular values kept
    s_inv    = vector, inverted singular values (zero where dropped)

    FILES CREATED BY THIS FUNCTION: None

    RETURNS: (q, p) array M_pinv
    --------------------------------------------------------------------
    '''
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if rank_tol is not None and rank_tol < 0:
        raise utils.ContractError('ERROR: rank_tol must be >= 0')
    if not np.all(np.isfinite(M)):
        raise utils.NumericalFailure(
            'ERROR: pinv() called on a matrix with non-finite entries',
            matrix=M)
    U, s, Vt = _svd(M)
    if rank_tol is None:
        rank_tol = default_rank_tol(M, s)
    large = s > rank_tol
    s_inv = np.zeros_like(s)
    s_inv[large] = 1.0 / s[large]
    M_pinv = (Vt.T * s_inv) @ U.T

    return M_pinv


def min_eig_sym(S):
    '''
    Smallest eigenvalue of a symmetric matrix
    '''
    S = np.atleast_2d(np.asarray(S, dtype=float))
    try:
        eigvals = np.linalg.eigvalsh(0.5 * (S + S.T))
    except np.linalg.LinAlgError as err:
        err_msg = 'ERROR: symmetric eigensolver failed: ' + str(err)
        raise utils.NumericalFailure(err_msg, matrix=S)

    return float(eigvals[0])


def psd(S, tol):
    return min_eig_sym(S) >= -tol


def kernel_basis(M, rank_tol=None):
    '''
    --------------------------------------------------------------------
    Orthonormal basis of the null space of M: the right singular
    vectors whose singular values are <= rank_tol (missing singular
    values of a wide matrix count as zero)
    --------------------------------------------------------------------
    INPUTS:
    M        = (p, q) array_like, real matrix
    rank_tol = scalar >= 0 or None, absolute singular value cutoff

    OTHER FUNCTIONS AND FILES CALLED BY THIS FUNCTION:
        default_rank_tol()

    OBJECTS CREATED WITHIN FUNCTION:
    rank = integer >= 0, number of singular values above rank_tol

    FILES CREATED BY THIS FUNCTION: None

    RETURNS: (q, k) array with orthonormal columns, k = q - rank
    --------------------------------------------------------------------
    '''
    M = np.atleast_2d(np.asarray(M, dtype=float))
    U, s, Vt = _svd(M, full_matrices=True)
    if rank_tol is None:
        rank_tol = default_rank_tol(M, s)
    rank = int(np.sum(s > rank_tol))

    return Vt[rank:].T.copy()


def kernel_included(M, targets, tol, rank_tol=None):
    '''
    --------------------------------------------------------------------
    Test Ker(M) inside the intersection of Ker(T) over the targets T.
    For the set of admissible P_hat, M = R + D'P_hat D and the targets
    are B and D.
    --------------------------------------------------------------------
    INPUTS:
    M        = (p, q) array_like
    targets  = list of (r_i, q) arrays
    tol      = scalar >= 0, bound on ||T v|| for unit kernel vectors v
    rank_tol = scalar >= 0 or None, cutoff used for Ker(M)

    OTHER FUNCTIONS AND FILES CALLED BY THIS FUNCTION:
        kernel_basis()

    OBJECTS CREATED WITHIN FUNCTION:
    kern = (q, k) array, orthonormal basis of Ker(M)

    FILES CREATED BY THIS FUNCTION: None

    RETURNS: included, boolean
    --------------------------------------------------------------------
    '''
    M = np.atleast_2d(np.asarray(M, dtype=float))
    targets = [np.atleast_2d(np.asarray(T, dtype=float))
               for T in targets]
    for T in targets:
        if T.shape[1] != M.shape[1]:
            err_msg = ('ERROR: kernel_included() column counts differ: ' +
                       str(M.shape) + ' vs ' + str(T.shape))
            raise utils.ContractError(err_msg)
    kern = kernel_basis(M, rank_tol)
    if kern.shape[1] == 0:
        return True
    for T in targets:
        if np.max(np.linalg.norm(T @ kern, axis=0)) > tol:
            return False

    return True


def sqrt_psd(S, tol=1e-8):
    '''
    --------------------------------------------------------------------
    Unique PSD square root of a symmetric matrix via eigendecomposition.
    Negative eigenvalues within tol are clamped to zero.
    --------------------------------------------------------------------
    INPUTS:
    S   = (n, n) array_like, symmetric matrix
    tol = scalar >= 0, admissible negative eigenvalue magnitude

    OTHER FUNCTIONS AND FILES CALLED BY THIS FUNCTION:
        sym_matrix()

    OBJECTS CREATED WITHIN FUNCTION:
    eigvals = (n,) vector, eigenvalues of S
    eigvecs = (n, n) array, orthonormal eigenvectors of S

    FILES CREATED BY THIS FUNCTION: None

    RETURNS: (n, n) symmetric PSD array
    --------------------------------------------------------------------
    '''
    S = sym_matrix(S, 'S')
    try:
        eigvals, eigvecs = np.linalg.eigh(S)
    except np.linalg.LinAlgError as err:
        raise utils.NumericalFailure(
            'ERROR: symmetric eigensolver failed: ' + str(err), matrix=S)
    if eigvals[0] < -tol:
        err_msg = ('ERROR: sqrt_psd() input is not PSD, min eigenvalue ' +
                   '%10.4e < -%10.4e' % (eigvals[0], tol))
        raise utils.NotPsdError(err_msg, min_eig=float(eigvals[0]))
    eigvals = np.clip(eigvals, 0.0, None)
    root = (eigvecs * np.sqrt(eigvals)) @ eigvecs.T

    return 0.5 * (root + root.T)


def moment_lift(A_cl, C_cl):
    '''
    --------------------------------------------------------------------
    Matrix of the second-moment operator X -> A X + X A' + C X C' on
    row-major vectorized n x n matrices:
        kron(A, I) + kron(I, A) + kron(C, C)
    The closed loop dx = A x dt + C x dw is mean-square stable iff all
    eigenvalues have negative real part.
    --------------------------------------------------------------------
    INPUTS:
    A_cl = (n, n) array_like, closed-loop drift matrix
    C_cl = (n, n) array_like, closed-loop diffusion matrix

    OTHER FUNCTIONS AND FILES CALLED BY THIS FUNCTION: None

    OBJECTS CREATED WITHIN FUNCTION:
    eye_n = (n, n) identity

    FILES CREATED BY THIS FUNCTION: None

    RETURNS: (n**2, n**2) array
    --------------------------------------------------------------------
    '''
    A_cl = np.atleast_2d(np.asarray(A_cl, dtype=float))
    C_cl = np.atleast_2d(np.asarray(C_cl, dtype=float))
    n = A_cl.shape[0]
    if A_cl.shape != (n, n) or C_cl.shape != (n, n):
        err_msg = ('ERROR: moment_lift() needs square matrices of equal ' +
                   'dimension, got ' + str(A_cl.shape) + ' and ' +
                   str(C_cl.shape))
        raise utils.ContractError(err_msg)
    eye_n = np.eye(n)

    return np.kron(A_cl, eye_n) + np.kron(eye_n, A_cl) + \
        np.kron(C_cl, C_cl)
