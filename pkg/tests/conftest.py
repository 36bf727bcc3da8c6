import os

# single-thread BLAS before numpy loads: the suite is all tiny-matrix algebra
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import math

import numpy as np


# ---------------------------------------------------------------------------
# independent oracles (deliberately different algorithms from the package)

def taylor_expm(M, terms=30):
    """Truncated-series matrix exponential; accurate for ||M|| <= ~1."""
    n = M.shape[0]
    out = np.eye(n, dtype=complex)
    term = np.eye(n, dtype=complex)
    for k in range(1, terms + 1):
        term = term @ M / k
        out = out + term
    return out


def rk4_hold(A, bu, x0, tau, step=1e-5):
    """Classic RK4 on x' = A x + bu with constant bu, fixed step."""
    n_steps = int(round(tau / step))
    h = tau / n_steps
    x = np.asarray(x0, dtype=complex).copy()

    def f(v):
        return A @ v + bu

    for _ in range(n_steps):
        k1 = f(x)
        k2 = f(x + 0.5 * h * k1)
        k3 = f(x + 0.5 * h * k2)
        k4 = f(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return x


def simpson_quad(f, a, b, intervals=10000):
    xs = np.linspace(a, b, intervals + 1)
    ys = np.asarray([f(x) for x in xs], dtype=float)
    h = (b - a) / intervals
    return h / 3.0 * (ys[0] + ys[-1] + 4 * ys[1:-1:2].sum() + 2 * ys[2:-1:2].sum())


def char_poly_coeffs(M):
    """Characteristic polynomial by the Faddeev-LeVerrier trace recursion."""
    n = M.shape[0]
    coeffs = np.zeros(n + 1, dtype=complex)
    coeffs[0] = 1.0
    Mk = np.eye(n, dtype=complex)
    for k in range(1, n + 1):
        Mk = M @ Mk
        coeffs[k] = -sum(coeffs[j] * np.trace(np.linalg.matrix_power(M, k - j))
                         for j in range(k)) / k
    return coeffs


def lyapunov_quadrature(A, Q, dt=1e-3, t_end=30.0):
    """Simpson sum of int_0^T e^{A^H t} Q e^{A t} dt (A safely Hurwitz)."""
    import scipy.linalg

    n_steps = int(round(t_end / dt))
    if n_steps % 2:
        n_steps += 1
    E_dt = scipy.linalg.expm(A * dt)
    P = np.zeros_like(np.asarray(Q, dtype=complex))
    E = np.eye(A.shape[0], dtype=complex)
    for k in range(n_steps + 1):
        w = 1.0 if k in (0, n_steps) else (4.0 if k % 2 else 2.0)
        P = P + w * (E.conj().T @ Q @ E)
        E = E @ E_dt
    return P * dt / 3.0


def random_hurwitz(rng, n, margin=0.5, scale=1.0):
    """Random complex matrix with spectrum shifted into Re < -margin."""
    M = scale * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    shift = float(np.linalg.eigvals(M).real.max())
    return M - (shift + margin) * np.eye(n)


def random_hpd(rng, n, spread=1.0):
    Z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return Z @ Z.conj().T + spread * np.eye(n)


# beam eigenstructure in the explicit (deflection, velocity) representation,
# written directly from the defining formulas as an oracle for the builder
def beam_vectors(n_pairs, gamma):
    """(f_vectors, g_vectors, weights); vectors are (2*n_pairs,) over the
    bending basis: first block deflection coefficients, second block velocity.
    The energy inner product is <a, b> = sum_j nu_j^4 a1_j conj(b1_j) + a2_j conj(b2_j).
    """
    beta = math.sqrt(1.0 - gamma * gamma)
    mu_p = complex(-gamma, beta)
    mu_m = complex(-gamma, -beta)
    nus = np.array([(-0.5 + k) * math.pi for k in range(1, n_pairs + 1)])
    fs, gs = [], []
    for k in range(1, n_pairs + 1):
        nu2 = nus[k - 1] ** 2
        lam_p, lam_m = mu_p * nu2, mu_m * nu2
        kap_p = math.sqrt(2.0) / (1.0 - mu_m ** 2)
        kap_m = math.sqrt(2.0) / (1.0 - mu_p ** 2)
        for lam, kap, lam_other in ((lam_m, kap_m, lam_p), (lam_p, kap_p, lam_m)):
            f = np.zeros(2 * n_pairs, dtype=complex)
            f[k - 1] = kap / lam
            f[n_pairs + k - 1] = kap
            fs.append(f)
            g = np.zeros(2 * n_pairs, dtype=complex)
            g[k - 1] = -1.0 / (math.sqrt(2.0) * lam_other)
            g[n_pairs + k - 1] = 1.0 / math.sqrt(2.0)
            gs.append(g)
    weights = np.concatenate([nus ** 4, np.ones(n_pairs)])
    return fs, gs, weights


def beam_inner(a, b, weights):
    return complex(np.sum(weights * a * np.conj(b)))
