"""Stability, threshold and inter-event-time certificates.

Every certificate is reported through `CertificateReport`, which records
the inputs it consumed, the numbers it produced, a Certified /
NotCertified / Inconclusive verdict, and free-text notes (including the
truncation order, since all certificates here are computed on finite
modal truncations).

Certificates:

* `trigger_threshold_bound` / `capped_trigger_decay_rate` -- admissible
  threshold and guaranteed decay rate for the capped sample-relative rule,
  from a growth envelope ||e^{A_cl t}|| <= M e^{-omega t}.
* `lyapunov_trigger_certificate` -- threshold bound and decay rate for the
  current-relative rule from the Lyapunov solution of the closed loop.
* `growth_envelope_constant` -- smallest M with
  e^{omega t} ||e^{A_cl t}|| <= M on t >= 0 (Gram-weighted norm).
* `inter_event_lower_bound` -- a positive lower bound on inter-event times
  of the sample-relative rule from the drift operator norm.
* `semigroup_coercivity` -- the constants of the lower bound
  ||T(s1) x|| >= c1 ||x|| and the induced comparison constant c2.
* `lmi_check` / `lmi_search` / `lmi_max_eps` -- feasibility of the
  plus-part triggering LMIs and the largest certified threshold.
* `decomposed_margin` -- decay margin of the decomposed closed loop.
* `periodic_trigger_certificate` -- power-stability data of the one-period
  transition operator and the induced threshold bound / decay rate.
* `sampling_period_scan`, `cascade_pole_check` -- stability of candidate
  sampling periods and of the cascade's transfer-function poles.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import linalg
from .errors import CertificateError, DomainError, NotHurwitzError, ShapeError
from .model import delta as hold_delta
from .model import flow_matrices

__all__ = [
    "CERTIFIED",
    "NOT_CERTIFIED",
    "INCONCLUSIVE",
    "CertificateReport",
    "trigger_threshold_bound",
    "capped_trigger_decay_rate",
    "growth_envelope_constant",
    "lyapunov_trigger_certificate",
    "inter_event_lower_bound",
    "semigroup_coercivity",
    "LMIWitness",
    "lmi_check",
    "lmi_search",
    "lmi_max_eps",
    "decomposed_margin",
    "periodic_trigger_certificate",
    "periodic_decay_rate",
    "sampling_period_scan",
    "cascade_pole_check",
]

CERTIFIED = "Certified"
NOT_CERTIFIED = "NotCertified"
INCONCLUSIVE = "Inconclusive"


@dataclass
class CertificateReport:
    """Named numeric certificate result with provenance of its hypotheses."""

    name: str
    verdict: str
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    notes: str = ""

    def to_json_dict(self):
        def conv(v):
            if isinstance(v, (bool, str, int)):
                return v
            if isinstance(v, complex):
                return [_sig(v.real), _sig(v.imag)]
            if isinstance(v, np.ndarray):
                return [[conv(complex(x)) if np.iscomplexobj(v) else _sig(float(x))
                         for x in row] for row in np.atleast_2d(v)]
            if isinstance(v, (list, tuple)):
                return [conv(x) for x in v]
            return _sig(float(v))

        return {
            "name": self.name,
            "verdict": self.verdict,
            "inputs": {k: conv(v) for k, v in self.inputs.items()},
            "outputs": {k: conv(v) for k, v in self.outputs.items()},
            "notes": self.notes,
        }

    def to_json(self, indent=2):
        return json.dumps(self.to_json_dict(), indent=indent)


def _sig(x):
    """Round to 12 significant digits for serialization."""
    return float(f"{x:.12g}")


# ---------------------------------------------------------------------------
# Gram-weighted norm helpers (factors computed once per certificate)

def _gram_sqrt_pair(G):
    """(L, L_inv) with G = L^H L, or (None, None) for the identity."""
    if G.shape[0] == 0 or np.array_equal(G, np.eye(G.shape[0])):
        return None, None
    L = linalg.cholesky_factor(G)
    return L, np.linalg.inv(L)


def _wnorm(M, L_out, Linv_in):
    if L_out is not None:
        M = L_out @ M
    if Linv_in is not None:
        M = M @ Linv_in
    return float(np.linalg.norm(M, 2))


def _closed_loop(sys):
    return sys.A_mat + sys.B_mat @ sys.F_mat


def _spectral_abscissa(A):
    if A.shape[0] == 0:
        return -math.inf
    return float(np.linalg.eigvals(A).real.max())


# ---------------------------------------------------------------------------
# capped sample-relative rule: threshold bound and decay rate

def trigger_threshold_bound(M, omega, norm_B):
    """Largest admissible threshold omega / (M ||B||) for the capped rule."""
    if M < 1.0 or omega <= 0.0 or norm_B <= 0.0:
        raise DomainError("need M >= 1, omega > 0, ||B|| > 0")
    return omega / (M * norm_B)


def capped_trigger_decay_rate(eps, M, omega, norm_B, tau_max):
    """Guaranteed decay rate of the capped sample-relative loop.

    With eps0 = eps M ||B|| / omega < 1 the per-interval contraction factor
    is (1 - eps0) e^{-omega tau} + eps0, whose log-rate at tau = tau_max is
    returned.  The rate is positive and strictly below omega.
    """
    if tau_max <= 0.0:
        raise DomainError("tau_max must be positive")
    eps_max = trigger_threshold_bound(M, omega, norm_B)
    if not 0.0 <= eps < eps_max:
        raise CertificateError(
            f"threshold {eps} not below the admissible bound {eps_max:.6g}"
        )
    eps0 = eps * M * norm_B / omega
    return -math.log((1.0 - eps0) * math.exp(-omega * tau_max) + eps0) / tau_max


def capped_trigger_report(eps, M, omega, norm_B, tau_max, m_source="user"):
    inputs = {"epsilon": eps, "M": M, "omega": omega, "norm_B": norm_B,
              "tau_max": tau_max}
    eps_max = trigger_threshold_bound(M, omega, norm_B)
    try:
        gamma = capped_trigger_decay_rate(eps, M, omega, norm_B, tau_max)
    except CertificateError as exc:
        return CertificateReport(
            "capped-trigger-decay", NOT_CERTIFIED, inputs,
            {"eps_max": eps_max}, notes=str(exc))
    return CertificateReport(
        "capped-trigger-decay", CERTIFIED, inputs,
        {"eps_max": eps_max, "gamma": gamma},
        notes=f"growth constant M from {m_source}")


# ---------------------------------------------------------------------------
# growth envelope M = sup_t e^{omega t} ||e^{A_cl t}||

def growth_envelope_constant(sys, omega, t_max=40.0, dt=1e-2, closed_loop=True):
    """Smallest constant M with ||e^{A_cl t}|| <= M e^{-omega t} on [0, t_max].

    The Gram-weighted operator norm is evaluated on a uniform grid (the
    transition matrices are accumulated by repeated multiplication) and the
    grid maximum is refined by golden-section search.  Requires the spectral
    abscissa of the closed loop to be strictly below -omega, otherwise the
    supremum is infinite.
    """
    A = _closed_loop(sys) if closed_loop else np.asarray(sys.A_mat, dtype=complex)
    if omega <= 0.0:
        raise DomainError("omega must be positive")
    abscissa = _spectral_abscissa(A)
    if abscissa >= -omega:
        raise CertificateError(
            f"spectral abscissa {abscissa:.6g} not below -omega = {-omega}; "
            "the envelope supremum is infinite"
        )
    L, Linv = _gram_sqrt_pair(sys.gram)
    M_dt = linalg.matexp(A * dt)
    E = np.eye(A.shape[0], dtype=complex)
    n_steps = int(round(t_max / dt))
    best, t_best = 1.0, 0.0
    t = 0.0
    for _ in range(n_steps):
        E = E @ M_dt
        t += dt
        val = math.exp(omega * t) * _wnorm(E, L, Linv)
        if val > best:
            best, t_best = val, t

    def f(tt):
        return math.exp(omega * tt) * _wnorm(linalg.matexp(A * tt), L, Linv)

    lo, hi = max(0.0, t_best - dt), min(t_max, t_best + dt)
    refined = _golden_max(f, lo, hi, tol=1e-6)
    return max(best, refined)


def _golden_max(f, lo, hi, tol=1e-6, max_iter=200):
    """Golden-section maximization of a unimodal scalar function."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a < tol:
            break
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return max(fc, fd)


# ---------------------------------------------------------------------------
# Lyapunov certificate for the current-relative rule

def lyapunov_trigger_certificate(sys, eps=None, M=None, omega=None,
                                 dt=1e-3, norm_cutoff=1e-8, t_cap=200.0):
    """Threshold bound and decay rate from the closed-loop Lyapunov solution.

    Works in Gram-orthonormal coordinates: P solves A_cl^H P + P A_cl = -I,
    the threshold bound is 1 / (2 ||P B||), and the decay rate at a given
    eps is (1 - 2 eps ||P B||) / (2 * integral of ||e^{A_cl t}||^2).
    The integral is a trapezoid sum up to the first T with
    ||e^{A_cl T}|| < norm_cutoff plus an analytic exponential tail.
    alpha / beta are the extreme eigenvalues of P.  When a growth envelope
    pair (M, omega) is supplied, the cruder bounds eps < omega/(M^2 ||B||)
    and gamma >= (omega - eps M^2 ||B||)/M^2 are reported alongside.
    """
    A_cl = _closed_loop(sys)
    L, Linv = _gram_sqrt_pair(sys.gram)
    LU, LUinv = _gram_sqrt_pair(sys.gram_U)
    At = A_cl if L is None else L @ A_cl @ Linv
    Bt = sys.B_mat if L is None else L @ sys.B_mat
    if LUinv is not None:
        Bt = Bt @ LUinv
    n = At.shape[0]
    inputs = {"truncation_order": sys.truncation_order, "n_state": n}
    if eps is not None:
        inputs["epsilon"] = eps
    try:
        P = linalg.solve_lyapunov(At, np.eye(n))
    except NotHurwitzError as exc:
        return CertificateReport("lyapunov-trigger-decay", NOT_CERTIFIED,
                                 inputs, {}, notes=str(exc))
    residual = float(np.linalg.norm(At.conj().T @ P + P @ At + np.eye(n), 2))
    norm_PB = float(np.linalg.norm(P @ Bt, 2))
    eps_max = 1.0 / (2.0 * norm_PB)
    eigP = linalg.hermitian_eig(P)
    alpha, beta = float(eigP[0]), float(eigP[-1])

    # integral of ||e^{A_cl t}||^2 with trapezoid + analytic tail
    M_dt = linalg.matexp(At * dt)
    E = np.eye(n, dtype=complex)
    prev = 1.0
    integral = 0.0
    t = 0.0
    while True:
        E = E @ M_dt
        t += dt
        cur = float(np.linalg.norm(E, 2))
        integral += 0.5 * dt * (prev * prev + cur * cur)
        prev = cur
        if cur < norm_cutoff:
            break
        if t > t_cap:
            return CertificateReport(
                "lyapunov-trigger-decay", INCONCLUSIVE, inputs,
                {"eps_max": eps_max, "norm_PB": norm_PB},
                notes=f"transition norm still {cur:.3g} at t = {t_cap}")
    abscissa = _spectral_abscissa(At)
    if M is not None and omega is not None:
        tail = M * M * math.exp(-2.0 * omega * t) / (2.0 * omega)
        tail_src = "user (M, omega)"
    else:
        om0 = -0.5 * abscissa
        tail = prev * prev / (2.0 * om0)
        tail_src = "cutoff norm with half the spectral gap"
    integral += tail

    outputs = {
        "P": P,
        "norm_PB": norm_PB,
        "eps_max": eps_max,
        "int_transition_sq": integral,
        "alpha": alpha,
        "beta": beta,
        "lyapunov_residual": residual,
    }
    notes = (f"P in Gram-orthonormal coordinates; integral tail from {tail_src}; "
             f"truncation order {sys.truncation_order}")
    verdict = CERTIFIED
    if M is not None and omega is not None:
        norm_B = float(np.linalg.norm(Bt, 2))
        outputs["crude_eps_max"] = omega / (M * M * norm_B)
        if eps is not None:
            outputs["crude_gamma"] = (omega - eps * M * M * norm_B) / (M * M)
    if eps is not None:
        if eps < eps_max:
            outputs["gamma"] = (1.0 - 2.0 * eps * norm_PB) / (2.0 * integral)
        else:
            verdict = NOT_CERTIFIED
            notes += f"; threshold {eps} not below eps_max {eps_max:.6g}"
    return CertificateReport("lyapunov-trigger-decay", verdict, inputs,
                             outputs, notes=notes)


# ---------------------------------------------------------------------------
# inter-event lower bound of the sample-relative rule

def inter_event_lower_bound(sys, epsilon, tau_max=1.0, dt=1e-4):
    """Largest grid tau with sup_{s <= tau} ||F(e^{As} - I) + F S_s F|| <= epsilon.

    Along any trajectory of the sample-relative rule the feedback drift over
    an interval of length s is bounded by that operator norm times the
    sampled state norm, so the returned theta lower-bounds every inter-event
    time.  theta = 0 with an Inconclusive verdict when even the first grid
    point violates the bound.  The value is truncation-dependent; when F has
    finite modal support the F(e^{As} - I) term is exact on the truncation
    and only the F S_s F term carries truncation error.
    """
    if epsilon <= 0.0:
        raise DomainError("epsilon must be positive")
    n, m = sys.n_state, sys.n_input
    L, Linv = _gram_sqrt_pair(sys.gram)
    LU, _ = _gram_sqrt_pair(sys.gram_U)
    F = sys.F_mat
    aug = np.zeros((n + m, n + m), dtype=complex)
    aug[:n, :n] = sys.A_mat
    aug[:n, n:] = sys.B_mat
    M_dt = linalg.matexp(aug * dt)
    E = np.eye(n + m, dtype=complex)
    eye_n = np.eye(n)
    theta = 0.0
    sup_val = 0.0
    n_steps = int(round(tau_max / dt))
    violated = False
    for j in range(1, n_steps + 1):
        E = E @ M_dt
        Phi = E[:n, :n]
        S = E[:n, n:]
        drift = F @ (Phi - eye_n) + (F @ S) @ F
        if LU is not None:
            drift = LU @ drift
        if Linv is not None:
            drift = drift @ Linv
        val = float(np.linalg.norm(drift, 2))
        sup_val = max(sup_val, val)
        if sup_val > epsilon:
            violated = True
            break
        theta = j * dt
    inputs = {"epsilon": epsilon, "tau_max": tau_max, "dt": dt,
              "truncation_order": sys.truncation_order}
    if violated and theta == 0.0:
        return CertificateReport(
            "inter-event-lower-bound", INCONCLUSIVE, inputs,
            {"theta": 0.0},
            notes="drift norm exceeds epsilon already at the first grid point")
    notes = ("truncation-dependent bound; F(e^{As}-I) exact for finite-support F, "
             "F S_s F carries the truncation error")
    return CertificateReport("inter-event-lower-bound", CERTIFIED, inputs,
                             {"theta": theta, "sup_drift_norm": sup_val},
                             notes=notes)


# ---------------------------------------------------------------------------
# coercivity of the open-loop flow

def semigroup_coercivity(sys, s1, dt=1e-3):
    """Constants of ||e^{A s1} x|| >= c1 ||x|| and the comparison bound c2 = 2M/c1.

    M is the supremum of ||e^{A tau}|| over [0, s1] (grid of step dt).  For
    parabolic truncations c1 decays with the truncation order, so the value
    is meaningful only as a truncation diagnostic; groups have c1 = 1.
    """
    if s1 <= 0.0:
        raise DomainError("s1 must be positive")
    L, Linv = _gram_sqrt_pair(sys.gram)
    A = np.asarray(sys.A_mat, dtype=complex)
    T1 = linalg.matexp(A * s1)
    W = T1 if L is None else L @ T1 @ Linv
    c1 = float(np.linalg.svd(W, compute_uv=False).min())
    M_dt = linalg.matexp(A * dt)
    E = np.eye(A.shape[0], dtype=complex)
    M_sup = 1.0
    for _ in range(int(round(s1 / dt))):
        E = E @ M_dt
        M_sup = max(M_sup, _wnorm(E, L, Linv))
    c2 = 2.0 * M_sup / c1 if c1 > 0.0 else math.inf
    verdict = CERTIFIED if c1 > 0.0 else INCONCLUSIVE
    return CertificateReport(
        "semigroup-coercivity", verdict,
        {"s1": s1, "truncation_order": sys.truncation_order},
        {"c1": c1, "M": M_sup, "c2": c2},
        notes="c1 is truncation-dependent and decreases with the order for "
              "parabolic systems; it is a genuine hypothesis, not a consequence")


# ---------------------------------------------------------------------------
# plus-part triggering LMIs

@dataclass
class LMIWitness:
    P: np.ndarray
    Q: np.ndarray
    kappa: float
    epsilon: float
    gamma_plus: float
    method: str


def _lam_min_h(H):
    return float(np.linalg.eigvalsh(0.5 * (H + H.conj().T)).min())


def lmi_check(A_plus, B_plus, F_plus, gamma_plus, epsilon, P, Q, kappa,
              tol=1e-10):
    """Verify the two plus-part triggering LMIs for a given witness.

    Checks (i) [[Q - eps^2 kappa I, -P B], [-B^H P, kappa I]] >= 0 and
    (ii) A_cl^H P + P A_cl + gamma_plus^2 P + Q <= 0, both up to `tol` on
    the extreme eigenvalues.  Returns "Certified" or "NotCertified".
    """
    A_plus = linalg.as_matrix(A_plus, "A_plus", square=True)
    B_plus = np.atleast_2d(np.asarray(B_plus, dtype=complex))
    if B_plus.shape[0] != A_plus.shape[0]:
        B_plus = B_plus.T
    F_plus = np.atleast_2d(np.asarray(F_plus, dtype=complex))
    P = linalg.check_hermitian(P, "P")
    Q = linalg.check_hermitian(Q, "Q")
    if kappa <= 0.0:
        raise DomainError("kappa must be positive")
    p, m = B_plus.shape
    PB = P @ B_plus
    block = np.zeros((p + m, p + m), dtype=complex)
    block[:p, :p] = Q - epsilon ** 2 * kappa * np.eye(p)
    block[:p, p:] = -PB
    block[p:, :p] = -PB.conj().T
    block[p:, p:] = kappa * np.eye(m)
    ok1 = _lam_min_h(block) >= -tol
    A_cl = A_plus + B_plus @ F_plus
    lhs = A_cl.conj().T @ P + P @ A_cl + gamma_plus ** 2 * P + Q
    ok2 = -_lam_min_h(-lhs) <= tol  # max eigenvalue of lhs
    return CERTIFIED if (ok1 and ok2) else NOT_CERTIFIED


def _schur_margin(W, R, eps, kappa):
    """lambda_min of W - eps^2 kappa I - R / kappa (Schur complement form)."""
    p = W.shape[0]
    return _lam_min_h(W - (eps * eps * kappa) * np.eye(p) - R / kappa)


def _best_kappa_margin(W, R, eps, lo=1e-8, hi=1e8, iters=80):
    """Maximize the Schur margin over kappa by golden section on log kappa."""
    def f(lk):
        return _schur_margin(W, R, eps, math.exp(lk))

    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = math.log(lo), math.log(hi)
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    lk = c if fc >= fd else d
    return math.exp(lk), max(fc, fd)


def lmi_search(A_plus, B_plus, F_plus, gamma_plus, epsilon,
               q_grid=None, refine=True, seed=0):
    """Search for a witness (P, Q, kappa) of the plus-part triggering LMIs.

    First stage pins Q = q I and P to the Lyapunov solution of the shifted
    closed loop A_cl + (gamma_plus^2 / 2) I, which satisfies the decay LMI
    with equality, then optimizes the scalar kappa on the Schur-complement
    condition (scanning q over a log grid; the pinned problem is scale
    invariant in q, so the scan is a cheap robustness sweep).  If that is
    infeasible and `refine` is set, P (and kappa) are optimized directly by
    a Nelder-Mead search over the Hermitian parameters with Q taken as the
    full slack of the decay LMI; every returned witness passes `lmi_check`.

    Returns an LMIWitness or None (e.g. when the shifted closed loop is not
    Hurwitz, i.e. gamma_plus is too large).
    """
    A_plus = linalg.as_matrix(A_plus, "A_plus", square=True)
    B_plus = np.atleast_2d(np.asarray(B_plus, dtype=complex))
    if B_plus.shape[0] != A_plus.shape[0]:
        B_plus = B_plus.T
    F_plus = np.atleast_2d(np.asarray(F_plus, dtype=complex))
    p = A_plus.shape[0]
    A_cl = A_plus + B_plus @ F_plus
    A_shift = A_cl + 0.5 * gamma_plus ** 2 * np.eye(p)
    if _spectral_abscissa(A_shift) >= 0.0:
        return None

    if q_grid is None:
        q_grid = np.logspace(-3, 3, 13)
    for q in q_grid:
        P = linalg.solve_lyapunov(A_shift, q * np.eye(p))
        PB = P @ B_plus
        R = PB @ PB.conj().T
        W = q * np.eye(p)
        kappa, margin = _best_kappa_margin(W, R, epsilon)
        if margin >= 0.0:
            witness = LMIWitness(P, q * np.eye(p), kappa, epsilon, gamma_plus,
                                 method="lyapunov-pinned")
            if lmi_check(A_plus, B_plus, F_plus, gamma_plus, epsilon,
                         witness.P, witness.Q, witness.kappa) == CERTIFIED:
                return witness

    if not refine:
        return None
    return _lmi_refine(A_plus, B_plus, F_plus, A_cl, gamma_plus, epsilon, seed)


def _pack_hermitian(P):
    p = P.shape[0]
    x = [P[i, i].real for i in range(p)]
    for i in range(p):
        for j in range(i + 1, p):
            x += [P[i, j].real, P[i, j].imag]
    return np.array(x)


def _unpack_hermitian(x, p):
    P = np.zeros((p, p), dtype=complex)
    for i in range(p):
        P[i, i] = x[i]
    k = p
    for i in range(p):
        for j in range(i + 1, p):
            P[i, j] = x[k] + 1j * x[k + 1]
            P[j, i] = x[k] - 1j * x[k + 1]
            k += 2
    return P


def _lmi_refine(A_plus, B_plus, F_plus, A_cl, gamma_plus, epsilon, seed):
    """Direct Nelder-Mead search over (P, kappa) with Q the decay-LMI slack."""
    p = A_plus.shape[0]
    eye = np.eye(p)

    def margin_of(params):
        P = _unpack_hermitian(params[:-1], p)
        tr = np.trace(P).real
        if tr <= 0.0:
            return -1e6
        P = P * (p / tr)
        lam_P = _lam_min_h(P)
        if lam_P <= 1e-12:
            return -1e3 + lam_P
        kappa = math.exp(params[-1])
        W = -(A_cl.conj().T @ P + P @ A_cl) - gamma_plus ** 2 * P
        PB = P @ B_plus
        R = PB @ PB.conj().T
        # W >= eps^2 kappa I + R/kappa forces W > 0, so no separate W check
        return _schur_margin(W, R, epsilon, kappa)

    starts = []
    try:
        A_shift = A_cl + 0.5 * gamma_plus ** 2 * eye
        P0 = linalg.solve_lyapunov(A_shift, eye)
        PB0 = P0 @ B_plus
        k0, _ = _best_kappa_margin(-(A_cl.conj().T @ P0 + P0 @ A_cl)
                                   - gamma_plus ** 2 * P0,
                                   PB0 @ PB0.conj().T, epsilon)
        starts.append(np.append(_pack_hermitian(P0 * (p / np.trace(P0).real)),
                                math.log(k0)))
    except (NotHurwitzError, np.linalg.LinAlgError):
        pass
    starts.append(np.append(_pack_hermitian(eye), 0.0))
    rng = np.random.default_rng(seed)
    for _ in range(3):
        Z = rng.standard_normal((p, p)) + 1j * rng.standard_normal((p, p))
        Prand = eye + 0.25 * (Z + Z.conj().T)
        starts.append(np.append(_pack_hermitian(Prand), rng.normal()))

    best_margin, best_params = -math.inf, None
    for x0 in starts:
        res = minimize(lambda x: -margin_of(x), x0, method="Nelder-Mead",
                       options={"maxiter": 4000, "xatol": 1e-10, "fatol": 1e-12})
        if -res.fun > best_margin:
            best_margin, best_params = -res.fun, res.x
        if best_margin > 1e-8:
            break
    if best_params is None or best_margin < 0.0:
        return None
    P = _unpack_hermitian(best_params[:-1], p)
    P = P * (p / np.trace(P).real)
    kappa = math.exp(best_params[-1])
    Q = -(A_cl.conj().T @ P + P @ A_cl) - gamma_plus ** 2 * P
    witness = LMIWitness(P, Q, kappa, epsilon, gamma_plus, method="nelder-mead")
    if lmi_check(A_plus, B_plus, F_plus, gamma_plus, epsilon,
                 witness.P, witness.Q, witness.kappa) == CERTIFIED:
        return witness
    return None


def lmi_max_eps(A_plus, B_plus, F_plus, gamma_plus, tol=1e-3, refine=True,
                eps_hi=None):
    """Largest threshold certified feasible by `lmi_search`, via bisection.

    Bisection tolerance `tol` (default 1e-3).  Returns 0.0 when no positive
    threshold is feasible.
    """
    def feasible(eps):
        return lmi_search(A_plus, B_plus, F_plus, gamma_plus, eps,
                          refine=refine) is not None

    lo = 0.0
    if eps_hi is None:
        hi = 0.25
        while feasible(hi):
            lo, hi = hi, 2.0 * hi
            if hi > 1e6:
                raise CertificateError("threshold bound appears unbounded")
    else:
        hi = eps_hi
        if feasible(hi):
            return hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return lo


def decomposed_margin(gamma_plus, omega_minus):
    """Decay margin min(gamma_plus, -omega_minus) of the decomposed loop."""
    if gamma_plus <= 0.0 or omega_minus >= 0.0:
        raise DomainError("need gamma_plus > 0 and omega_minus < 0")
    return min(gamma_plus, -omega_minus)


# ---------------------------------------------------------------------------
# periodic event-triggering certificate

def periodic_decay_rate(delta_h, eps0, h, ell):
    """f(ell) = -log(delta^ell (1 - eps0) + eps0) / (ell h)."""
    return -math.log(delta_h ** ell * (1.0 - eps0) + eps0) / (ell * h)


def periodic_trigger_certificate(sys, h, ell_max, epsilon=None,
                                 power_cap=512, radius_margin=1e-6):
    """Power-stability data of the one-period transition and the thresholds.

    Computes Delta(h) = e^{Ah} + S_h F, its spectral radius rho, the power
    envelope M_d = max_k ||Delta(h)^k|| / delta^k (Gram-weighted,
    k <= power_cap, delta = rho + radius_margin) and ||S_h||.  The
    admissible threshold is eps* = (1 - delta) / (M_d ||S_h||); for a given
    epsilon < eps* the guaranteed decay rate f(ell_max) is reported.
    NotCertified when rho + margin >= 1 (the sampled loop is not power
    stable at this period).
    """
    if h <= 0.0 or ell_max < 1:
        raise DomainError("need h > 0 and ell_max >= 1")
    D = hold_delta(sys, h)
    rho = linalg.spectral_radius(D)
    delta_h = rho + radius_margin
    inputs = {"h": h, "ell_max": ell_max,
              "truncation_order": sys.truncation_order}
    if epsilon is not None:
        inputs["epsilon"] = epsilon
    if delta_h >= 1.0:
        return CertificateReport(
            "periodic-event-trigger", NOT_CERTIFIED, inputs,
            {"spectral_radius": rho},
            notes=f"one-period transition not power stable at h = {h}")
    L, Linv = _gram_sqrt_pair(sys.gram)
    LU, LUinv = _gram_sqrt_pair(sys.gram_U)
    Dk = np.eye(sys.n_state, dtype=complex)
    M_d = 1.0
    scale = 1.0
    for _ in range(power_cap):
        Dk = Dk @ D
        scale *= delta_h
        M_d = max(M_d, _wnorm(Dk, L, Linv) / scale)
    _, S_h = flow_matrices(sys, h)
    if LUinv is not None:
        S_h = S_h @ LUinv
    norm_S = _wnorm(S_h, L, None)
    eps_star = (1.0 - delta_h) / (M_d * norm_S)
    outputs = {"spectral_radius": rho, "delta": delta_h, "M_d": M_d,
               "norm_S": norm_S, "eps_star": eps_star}
    verdict = CERTIFIED
    notes = f"power envelope over k <= {power_cap}"
    if epsilon is not None:
        if epsilon < eps_star:
            eps0 = epsilon * M_d * norm_S / (1.0 - delta_h)
            outputs["eps0"] = eps0
            outputs["gamma"] = periodic_decay_rate(delta_h, eps0, h, ell_max)
        else:
            verdict = NOT_CERTIFIED
            notes += f"; threshold {epsilon} not below eps* = {eps_star:.6g}"
    return CertificateReport("periodic-event-trigger", verdict, inputs,
                             outputs, notes=notes)


def sampling_period_scan(sys, h_list, margin=1e-6):
    """Spectral radius of the one-period transition for each candidate period.

    The certified set is {h : rho(Delta(h)) < 1 - margin}.
    """
    rows = []
    for h in h_list:
        if h <= 0.0:
            raise DomainError("sampling periods must be positive")
        rho = linalg.spectral_radius(hold_delta(sys, h))
        rows.append((float(h), rho))
    certified = [h for h, r in rows if r < 1.0 - margin]
    report = CertificateReport(
        "sampling-period-scan",
        CERTIFIED if certified else NOT_CERTIFIED,
        {"h_list": [float(h) for h in h_list],
         "truncation_order": sys.truncation_order},
        {"spectral_radii": [r for _, r in rows], "certified_periods": certified},
        notes=f"certified when rho < 1 - {margin}")
    return rows, report


# ---------------------------------------------------------------------------
# cascade pole test

def cascade_pole_check(G, H, f, F2, B_plus):
    """Pole locations of the cascade's two transfer functions.

    The poles of (lambda - B+ (lambda I - G - H F2)^{-1} H f)^{-1} are the
    eigenvalues of the companion block [[0, B+], [H f, G + H F2]]; the inner
    transfer function contributes the eigenvalues of G + H F2.  Stable iff
    every pole has negative real part.
    """
    Gm = np.atleast_2d(np.asarray(G, dtype=complex))
    Hm = np.atleast_2d(np.asarray(H, dtype=complex))
    if Hm.shape[0] != Gm.shape[0]:
        Hm = Hm.T
    fv = np.atleast_1d(np.asarray(f, dtype=complex)).reshape(-1, 1)
    F2m = np.atleast_2d(np.asarray(F2, dtype=complex))
    if F2m.shape[1] != Gm.shape[0]:
        F2m = F2m.T
    Bp = np.atleast_2d(np.asarray(B_plus, dtype=complex))
    if Bp.shape[0] != 1:
        Bp = Bp.T
    M = Gm + Hm @ F2m
    nn = M.shape[0]
    if fv.shape[0] != Hm.shape[1] or Bp.shape[1] != nn:
        raise ShapeError("cascade dimensions are inconsistent")
    block = np.zeros((nn + 1, nn + 1), dtype=complex)
    block[0, 1:] = Bp
    block[1:, :1] = Hm @ fv
    block[1:, 1:] = M
    poles_outer = np.linalg.eigvals(block)
    poles_inner = np.linalg.eigvals(M)
    stable = bool(poles_outer.real.max() < 0.0 and poles_inner.real.max() < 0.0)
    report = CertificateReport(
        "cascade-pole-test",
        CERTIFIED if stable else NOT_CERTIFIED,
        {"G": Gm, "H": Hm, "f": fv.reshape(-1), "F2": F2m, "B_plus": Bp.reshape(-1)},
        {"poles_outer": list(poles_outer), "poles_inner": list(poles_inner),
         "stable": stable},
        notes="stable iff all poles lie in the open left half-plane")
    return poles_outer, poles_inner, stable, report
