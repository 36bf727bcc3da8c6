"""Dense complex linear algebra kernel for small matrices (n <= ~64).

All other modules go through these routines so that the numerical
conventions (complex arithmetic, Gram-weighted norms, Hurwitz checks)
live in one place.  Matrix exponentials use scaling-and-squaring with
Pade approximants via `scipy.linalg.expm`; Lyapunov equations are solved
by Kronecker vectorization, which is exact and perfectly adequate at
this scale.
"""

import numpy as np
import scipy.linalg

from .errors import DefinitenessError, DomainError, NotHurwitzError, ShapeError

__all__ = [
    "as_matrix",
    "check_hermitian",
    "cholesky_factor",
    "matexp",
    "zoh_step",
    "hermitian_eig",
    "weighted_operator_norm",
    "solve_lyapunov",
    "spectral_radius",
]

#: relative tolerance for accepting a matrix as Hermitian
HERMITIAN_RTOL = 1e-12


def as_matrix(M, name="matrix", square=False):
    """Coerce to a 2-d complex array, checking finiteness (and squareness)."""
    A = np.asarray(M, dtype=complex)
    if A.ndim != 2:
        raise ShapeError(f"{name} must be 2-dimensional, got ndim={A.ndim}")
    if not np.all(np.isfinite(A)):
        raise ShapeError(f"{name} contains non-finite entries")
    if square and A.shape[0] != A.shape[1]:
        raise ShapeError(f"{name} must be square, got shape {A.shape}")
    return A


def check_hermitian(H, name="matrix"):
    """Validate Hermitian symmetry to HERMITIAN_RTOL (relative) and return H."""
    A = as_matrix(H, name=name, square=True)
    scale = max(1.0, float(np.abs(A).max(initial=0.0)))
    if np.abs(A - A.conj().T).max(initial=0.0) > HERMITIAN_RTOL * scale:
        raise ShapeError(f"{name} is not Hermitian within tolerance")
    return 0.5 * (A + A.conj().T)


def cholesky_factor(G, name="gram"):
    """Upper-triangular L with G = L^H L, raising DefinitenessError if G is not HPD."""
    A = check_hermitian(G, name=name)
    try:
        C = np.linalg.cholesky(A)  # lower, G = C C^H
    except np.linalg.LinAlgError as exc:
        raise DefinitenessError(f"{name} is not positive definite") from exc
    return C.conj().T


def matexp(M):
    """Matrix exponential of a square complex matrix.

    Scaling-and-squaring with Pade approximants (order up to 13); relative
    accuracy is ~1e-12 or better for ||M|| <= 100.
    """
    A = as_matrix(M, name="matexp argument", square=True)
    if A.shape[0] == 0:
        return A.copy()
    return scipy.linalg.expm(A)


def zoh_step(A, Bu, tau):
    """Exact zero-order-hold propagators over an interval of length tau.

    Returns (Phi, Gamma) with Phi = e^{A tau} and
    Gamma = int_0^tau e^{A s} ds @ Bu, computed jointly from the matrix
    exponential of the augmented matrix [[A, Bu], [0, 0]].  The state update
    for x' = A x + Bu (input held constant) is x(tau) = Phi x(0) + Gamma.

    Bu may be a vector (n,) or a matrix (n, m); Gamma matches its shape.
    """
    A = as_matrix(A, name="A", square=True)
    n = A.shape[0]
    B = np.asarray(Bu, dtype=complex)
    vector_input = B.ndim == 1
    if vector_input:
        B = B.reshape(n, 1)
    if B.shape[0] != n:
        raise ShapeError(f"Bu has {B.shape[0]} rows, expected {n}")
    if tau < 0:
        raise DomainError(f"tau must be nonnegative, got {tau}")
    m = B.shape[1]
    aug = np.zeros((n + m, n + m), dtype=complex)
    aug[:n, :n] = A
    aug[:n, n:] = B
    E = matexp(aug * tau)
    Phi = E[:n, :n]
    Gamma = E[:n, n:]
    if vector_input:
        Gamma = Gamma[:, 0]
    return Phi, Gamma


def hermitian_eig(H, eigvectors=False):
    """Eigenvalues (ascending) of a Hermitian matrix, optionally with vectors.

    The input must be Hermitian to HERMITIAN_RTOL; the symmetrized matrix is
    handed to the standard Hermitian eigensolver, whose residuals satisfy
    ||H v - lambda v|| < 1e-10 ||H|| at these sizes.
    """
    A = check_hermitian(H, name="hermitian_eig argument")
    if eigvectors:
        w, V = np.linalg.eigh(A)
        return w, V
    return np.linalg.eigvalsh(A)


def weighted_operator_norm(M, gram_out, gram_in):
    """Operator norm of M between Gram-weighted spaces.

    Returns sup_{x != 0} ||M x||_{gram_out} / ||x||_{gram_in}, evaluated as
    ||L_out M L_in^{-1}||_2 with the Cholesky factors G = L^H L.
    """
    A = as_matrix(M, name="M")
    L_out = cholesky_factor(gram_out, name="gram_out")
    L_in = cholesky_factor(gram_in, name="gram_in")
    if L_out.shape[0] != A.shape[0] or L_in.shape[0] != A.shape[1]:
        raise ShapeError(
            f"incompatible shapes: M {A.shape}, gram_out {L_out.shape}, gram_in {L_in.shape}"
        )
    # A @ L_in^{-1} via a triangular solve on the adjoint system
    C = L_in.conj().T  # lower triangular, G_in = C C^H
    Y = scipy.linalg.solve_triangular(C, A.conj().T, lower=True).conj().T
    return float(np.linalg.norm(L_out @ Y, 2))


def solve_lyapunov(A, Q):
    """Solve A^H P + P A = -Q for Hermitian P, A Hurwitz, Q Hermitian PSD.

    The Hurwitz precondition is checked through the growth of e^{A}: the
    spectral radius of matexp(A) must be strictly below one.  The equation is
    solved by vectorizing the n^2 x n^2 Kronecker system, then symmetrizing.
    """
    A = as_matrix(A, name="A", square=True)
    Qh = check_hermitian(Q, name="Q")
    n = A.shape[0]
    if Qh.shape[0] != n:
        raise ShapeError(f"Q has order {Qh.shape[0]}, expected {n}")
    qscale = max(1.0, float(np.abs(Qh).max(initial=0.0)))
    if float(np.linalg.eigvalsh(Qh).min()) < -1e-10 * qscale:
        raise DefinitenessError("Q must be positive semidefinite")
    growth = spectral_radius(matexp(A))
    if growth >= 1.0:
        raise NotHurwitzError(
            f"A is not Hurwitz: spectral radius of exp(A) is {growth:.6g} >= 1"
        )
    eye = np.eye(n)
    K = np.kron(eye, A.conj().T) + np.kron(A.T, eye)
    p = np.linalg.solve(K, -Qh.flatten(order="F"))
    P = p.reshape((n, n), order="F")
    return 0.5 * (P + P.conj().T)


def spectral_radius(M):
    """Spectral radius max |lambda_i(M)| of a square matrix."""
    A = as_matrix(M, name="spectral_radius argument", square=True)
    if A.shape[0] == 0:
        return 0.0
    return float(np.abs(np.linalg.eigvals(A)).max())
