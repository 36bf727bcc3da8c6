"""Finite modal representations of the controlled evolution equations.

A `ModalSystem` packs the truncated generator A, control operator B and
feedback operator F together with the Gram matrices that define the state
and input inner products in the chosen coordinates.  Builders are provided
for the three concrete plants used throughout:

* `build_heat_rod`      -- insulated 1-d heat equation, distributed heating,
                           feedback on the constant mode only;
* `build_heat_cascade`  -- the same rod driven through a scalar ODE
                           (actuator dynamics), feedback on the mean
                           temperature and the ODE state;
* `build_beam`          -- damped fourth-order beam with a boundary shear
                           actuator, written in the biorthogonal eigenbasis
                           so that A is diagonal and the non-orthogonality
                           sits entirely in the Gram matrix.

Between input updates the closed loop evolves as x' = A x + B u with u
frozen, so propagation is exact: diagonal systems use the per-mode
closed form, everything else the augmented matrix exponential.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson

from . import linalg
from .errors import (
    DomainError,
    ShapeError,
    SpectralGapError,
    UnsupportedStructureError,
)

__all__ = [
    "ModalSystem",
    "Decomposition",
    "build_heat_rod",
    "build_heat_cascade",
    "build_beam",
    "beam_project_initial",
    "beam_initial_preset",
    "apply_semigroup",
    "flow_matrices",
    "delta",
    "propagate_zoh",
    "state_norm",
    "input_norm",
    "decompose",
    "shift_zeno_sequence",
    "HoldPropagator",
]


@dataclass(frozen=True)
class ModalSystem:
    """Truncated (A, B, F) triple with Gram matrices fixing the inner products.

    Coordinates are modal coefficients; `gram` defines <.,.> on the state
    space and `gram_U` on the input space (identity for orthonormal bases).
    Instances are immutable; the arrays are marked read-only.
    """

    A_mat: np.ndarray
    B_mat: np.ndarray
    F_mat: np.ndarray
    gram: np.ndarray
    gram_U: np.ndarray
    labels: tuple = ()
    truncation_order: int = 0
    name: str = "custom"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        A = linalg.as_matrix(self.A_mat, name="A_mat", square=True)
        n = A.shape[0]
        B = linalg.as_matrix(self.B_mat, name="B_mat")
        F = linalg.as_matrix(self.F_mat, name="F_mat")
        if B.shape[0] != n:
            raise ShapeError(f"B_mat has {B.shape[0]} rows, expected {n}")
        m = B.shape[1]
        if F.shape != (m, n):
            raise ShapeError(f"F_mat has shape {F.shape}, expected {(m, n)}")
        G = linalg.check_hermitian(self.gram, name="gram")
        GU = linalg.check_hermitian(self.gram_U, name="gram_U")
        if G.shape[0] != n or GU.shape[0] != m:
            raise ShapeError("Gram matrix orders do not match A_mat/B_mat")
        for name, mat in (("gram", G), ("gram_U", GU)):
            if mat.shape[0] and float(np.linalg.eigvalsh(mat).min()) <= 1e-12:
                raise ShapeError(f"{name} must be positive definite")
        labels = tuple(self.labels) if self.labels else tuple(f"x{i}" for i in range(n))
        if len(labels) != n:
            raise ShapeError(f"{len(labels)} labels for {n} coordinates")
        diag_A = bool(np.count_nonzero(A - np.diag(np.diag(A))) == 0)
        for key, val in (
            ("A_mat", A),
            ("B_mat", B),
            ("F_mat", F),
            ("gram", G),
            ("gram_U", GU),
            ("labels", labels),
        ):
            object.__setattr__(self, key, val)
        for arr in (A, B, F, G, GU):
            arr.setflags(write=False)
        object.__setattr__(self, "_diagonal_A", diag_A)
        object.__setattr__(self, "_gram_identity", _is_identity(G))
        object.__setattr__(self, "_gram_U_identity", _is_identity(GU))
        object.__setattr__(self, "_flow_cache", {})

    @property
    def n_state(self):
        return self.A_mat.shape[0]

    @property
    def n_input(self):
        return self.B_mat.shape[1]

    @property
    def has_diagonal_A(self):
        return self._diagonal_A

    def as_state(self, coeffs):
        """Validate and coerce modal coefficients to a complex state vector."""
        x = np.asarray(coeffs, dtype=complex).reshape(-1)
        if x.shape[0] != self.n_state:
            raise ShapeError(f"state has length {x.shape[0]}, expected {self.n_state}")
        return x


def _is_identity(G):
    return G.shape[0] == 0 or bool(np.array_equal(G, np.eye(G.shape[0])))


# ---------------------------------------------------------------------------
# builders

def build_heat_rod(n_modes):
    """Insulated heat rod on [0,1] in the cosine eigenbasis, modes 0..n_modes.

    A = diag(-(k pi)^2), distributed heating B = I, and the feedback acts on
    the constant mode only: (F x)_0 = -x_0.
    """
    if n_modes < 0:
        raise DomainError("n_modes must be >= 0")
    n = n_modes + 1
    lam = np.array([-(k * math.pi) ** 2 for k in range(n)], dtype=complex)
    A = np.diag(lam)
    B = np.eye(n, dtype=complex)
    F = np.zeros((n, n), dtype=complex)
    F[0, 0] = -1.0
    labels = tuple(f"phi_{k}" for k in range(n))
    return ModalSystem(
        A, B, F, np.eye(n), np.eye(n),
        labels=labels, truncation_order=n_modes, name="heat_rod",
        meta={"preset": "heat_rod", "n_modes": n_modes},
    )


def indicator_profile_coefficients(n_modes, amplitude, lo, hi):
    """Cosine-basis coefficients of amplitude * 1_[lo,hi] on [0,1], closed form."""
    if not (0.0 <= lo < hi <= 1.0):
        raise DomainError(f"need 0 <= lo < hi <= 1, got [{lo}, {hi}]")
    b = np.empty(n_modes + 1, dtype=complex)
    b[0] = amplitude * (hi - lo)
    for k in range(1, n_modes + 1):
        b[k] = (
            amplitude
            * math.sqrt(2.0)
            * (math.sin(k * math.pi * hi) - math.sin(k * math.pi * lo))
            / (k * math.pi)
        )
    return b


def build_heat_cascade(n_modes, b_amp=5.0, b_lo=0.4, b_hi=0.6,
                       G=0.5, H=1.0, f=-1.0, F2=-2.5):
    """Heat rod driven through a scalar actuator ODE.

    State = (rod modes 0..n_modes, ODE state).  The rod is heated by the
    ODE state through the profile b_amp * 1_[b_lo, b_hi], the input enters
    the ODE only, and the feedback reads the rod's mean temperature and the
    ODE state: u = f * x_0 + F2 * x_ode.
    """
    if n_modes < 1:
        raise DomainError("n_modes must be >= 1")
    n = n_modes + 2
    b = indicator_profile_coefficients(n_modes, b_amp, b_lo, b_hi)
    A = np.zeros((n, n), dtype=complex)
    for k in range(n_modes + 1):
        A[k, k] = -((k * math.pi) ** 2)
    A[: n_modes + 1, n - 1] = b
    A[n - 1, n - 1] = G
    B = np.zeros((n, 1), dtype=complex)
    B[n - 1, 0] = H
    F = np.zeros((1, n), dtype=complex)
    F[0, 0] = f
    F[0, n - 1] = F2
    labels = tuple(f"phi_{k}" for k in range(n_modes + 1)) + ("ode",)
    return ModalSystem(
        A, B, F, np.eye(n), np.eye(1),
        labels=labels, truncation_order=n_modes, name="heat_cascade",
        meta={"preset": "heat_cascade", "n_modes": n_modes, "b_amp": b_amp,
              "b_lo": b_lo, "b_hi": b_hi, "G": G, "H": H, "f": f, "F2": F2},
    )


def _beam_pair_data(n, gamma):
    """Spectral data of the damped beam for mode pair +-n.

    Returns (nu2, lam_minus, lam_plus, kap_minus, kap_plus) where nu2 is the
    square root of the bending eigenvalue, lam the two complex eigenvalues,
    and kap the normalization constants of the corresponding eigenvectors.
    """
    beta = math.sqrt(1.0 - gamma * gamma)
    nu = -0.5 * math.pi + n * math.pi
    nu2 = nu * nu
    mu_plus = complex(-gamma, beta)
    mu_minus = complex(-gamma, -beta)
    lam_plus = mu_plus * nu2
    lam_minus = mu_minus * nu2
    kap_plus = math.sqrt(2.0) / (1.0 - mu_minus ** 2)
    kap_minus = math.sqrt(2.0) / (1.0 - mu_plus ** 2)
    return nu2, lam_minus, lam_plus, kap_minus, kap_plus


def build_beam(n_pairs, gamma, feedback_gain=1.0):
    """Structurally damped beam in its biorthogonal eigenbasis.

    Coordinates are the coefficients <x, g_k> for k in {-1, +1, ..., -n, +n}
    (ordered by pair), which makes A diagonal with eigenvalues
    (-gamma +- i sqrt(1-gamma^2)) nu_n^2.  The shear actuator contributes
    the column (-1)^{n+1} per pair, and the feedback reads the two slowest
    coefficients with gain -(13/4) gamma pi^2 (scaled by feedback_gain).
    The energy inner product of the non-orthogonal eigenvectors is carried
    by the 2x2 block-diagonal Gram matrix.
    """
    if not (0.0 < gamma < 1.0):
        raise DomainError(f"damping must lie in (0, 1), got {gamma}")
    if n_pairs < 1:
        raise DomainError("n_pairs must be >= 1")
    n = 2 * n_pairs
    lam = np.zeros(n, dtype=complex)
    Bcol = np.zeros((n, 1), dtype=complex)
    gram = np.zeros((n, n), dtype=complex)
    labels = []
    for k in range(1, n_pairs + 1):
        i_minus, i_plus = 2 * (k - 1), 2 * (k - 1) + 1
        nu2, lam_m, lam_p, kap_m, kap_p = _beam_pair_data(k, gamma)
        lam[i_minus], lam[i_plus] = lam_m, lam_p
        sign = (-1.0) ** (k + 1)
        Bcol[i_minus, 0] = sign
        Bcol[i_plus, 0] = sign
        nu4 = nu2 * nu2

        def inner(kap_a, lam_a, kap_b, lam_b):
            # energy inner product <f_a, f_b> of two eigenvectors of one pair
            return kap_a * np.conj(kap_b) * (nu4 / (lam_a * np.conj(lam_b)) + 1.0)

        # gram[i, j] = <f_j, f_i> so that ||x||^2 = x^H gram x
        gram[i_minus, i_minus] = inner(kap_m, lam_m, kap_m, lam_m)
        gram[i_plus, i_plus] = inner(kap_p, lam_p, kap_p, lam_p)
        gram[i_minus, i_plus] = inner(kap_p, lam_p, kap_m, lam_m)
        gram[i_plus, i_minus] = inner(kap_m, lam_m, kap_p, lam_p)
        labels += [f"g_-{k}", f"g_+{k}"]
    A = np.diag(lam)
    F = np.zeros((1, n), dtype=complex)
    F[0, 0] = -(13.0 / 4.0) * gamma * math.pi ** 2 * feedback_gain
    F[0, 1] = F[0, 0]
    return ModalSystem(
        A, Bcol, F, gram, np.eye(1),
        labels=tuple(labels), truncation_order=n_pairs, name="beam",
        meta={"preset": "beam", "n_pairs": n_pairs, "gamma": gamma,
              "feedback_gain": feedback_gain},
    )


def beam_project_initial(sys, z0_coeffs, zdot0_coeffs):
    """Biorthogonal beam coordinates of an initial (deflection, velocity) pair.

    `z0_coeffs` and `zdot0_coeffs` are the coefficients of the deflection and
    velocity in the orthonormal bending basis e_n, n = 1..n_pairs.  The
    returned coefficients c_{+-n} = <x0, g_{+-n}> follow from the weighted
    inner product; reconstructing sum c_k f_k reproduces the input exactly.
    """
    if sys.name != "beam" or "gamma" not in sys.meta:
        raise UnsupportedStructureError("beam_project_initial needs a beam system")
    gamma = sys.meta["gamma"]
    n_pairs = sys.meta["n_pairs"]
    a = np.asarray(z0_coeffs, dtype=complex).reshape(-1)
    w = np.asarray(zdot0_coeffs, dtype=complex).reshape(-1)
    if a.shape[0] != n_pairs or w.shape[0] != n_pairs:
        raise ShapeError(f"coefficient vectors must have length {n_pairs}")
    c = np.zeros(2 * n_pairs, dtype=complex)
    root2 = math.sqrt(2.0)
    for k in range(1, n_pairs + 1):
        nu2, lam_m, lam_p, _, _ = _beam_pair_data(k, gamma)
        nu4 = nu2 * nu2
        i_minus, i_plus = 2 * (k - 1), 2 * (k - 1) + 1
        # c_{+-n} = -a_n nu^4 / (sqrt2 conj(lam_{-+n})) + w_n / sqrt2
        c[i_minus] = -a[k - 1] * nu4 / (root2 * np.conj(lam_p)) + w[k - 1] / root2
        c[i_plus] = -a[k - 1] * nu4 / (root2 * np.conj(lam_m)) + w[k - 1] / root2
    return c


_BEAM_PRESETS = {
    # deflection(xi), velocity(xi)
    "paper-ic": (lambda xi: 1.0 - np.cos(math.pi * xi), lambda xi: np.zeros_like(xi)),
}


def beam_bending_coefficients(func, n_pairs, intervals=2048):
    """Bending-basis coefficients <func, e_n> by composite Simpson quadrature."""
    xi = np.linspace(0.0, 1.0, intervals + 1)
    vals = np.asarray(func(xi), dtype=float)
    coeffs = np.empty(n_pairs)
    for k in range(1, n_pairs + 1):
        nu = -0.5 * math.pi + k * math.pi
        coeffs[k - 1] = simpson(vals * math.sqrt(2.0) * np.sin(nu * xi), x=xi)
    return coeffs


def beam_initial_preset(sys, preset="paper-ic"):
    """Named initial state of the beam, projected to biorthogonal coordinates."""
    if preset not in _BEAM_PRESETS:
        raise DomainError(f"unknown beam initial preset {preset!r}")
    zfun, vfun = _BEAM_PRESETS[preset]
    n_pairs = sys.meta["n_pairs"]
    a = beam_bending_coefficients(zfun, n_pairs)
    w = beam_bending_coefficients(vfun, n_pairs)
    return beam_project_initial(sys, a, w)


# ---------------------------------------------------------------------------
# propagation

def _flow_pair(sys, tau):
    """Cached (Phi, S) = (e^{A tau}, int_0^tau e^{A s} B ds), hold-independent."""
    pair = sys._flow_cache.get(tau)
    if pair is None:
        pair = flow_matrices(sys, tau)
        if len(sys._flow_cache) < 4096:
            sys._flow_cache[tau] = pair
    return pair


class HoldPropagator:
    """Exact flow of x' = A x + B u from x0 with the input u held constant.

    Diagonal systems use the per-mode closed form.  Otherwise states come
    from the flow pair (Phi, S) of the elapsed time, x(tau) = Phi x0 + S u;
    the pairs are cached on the system, so repeated widths (monitoring grids,
    bisection levels) cost one matrix exponential each across all holds.
    """

    def __init__(self, sys, x0, u):
        self.sys = sys
        self.x0 = sys.as_state(x0)
        u = np.asarray(u, dtype=complex).reshape(-1)
        if u.shape[0] != sys.n_input:
            raise ShapeError(f"input has length {u.shape[0]}, expected {sys.n_input}")
        self.u = u
        self.bu = sys.B_mat @ u
        self._diag = sys.has_diagonal_A
        if self._diag:
            self._lam = np.diag(sys.A_mat).copy()

    def _diag_states(self, taus, x0=None):
        x0 = self.x0 if x0 is None else x0
        z = np.multiply.outer(np.asarray(taus, dtype=float), self._lam)
        phi = np.exp(z)
        em1 = np.expm1(z)
        lam = self._lam
        with np.errstate(divide="ignore", invalid="ignore"):
            gcoef = np.where(lam == 0, np.asarray(taus, dtype=float)[:, None], em1 / lam)
        return phi * x0[None, :] + gcoef * self.bu[None, :]

    def at(self, tau):
        """State at elapsed time tau >= 0 within the hold interval."""
        return self.advance(self.x0, tau)

    def advance(self, x, tau):
        """State tau >= 0 after an intermediate state x of the same hold."""
        if tau < 0:
            raise DomainError(f"tau must be nonnegative, got {tau}")
        if tau == 0.0:
            return x.copy()
        if self._diag:
            return self._diag_states([tau], x0=x)[0]
        Phi, S = _flow_pair(self.sys, tau)
        return Phi @ x + S @ self.u

    def states_on_grid(self, offset, step, count):
        """States at offset, offset+step, ..., offset+(count-1)*step, shape (count, n).

        Non-diagonal systems fill the grid by doubling in the augmented
        [x; u] space, whose one-step matrix is block [[Phi, S], [0, I]]:
        a short seed segment is stepped explicitly, then each pass maps the
        filled prefix forward by the accumulated power in one batched product.
        """
        if count <= 0:
            return np.zeros((0, self.sys.n_state), dtype=complex)
        if self._diag:
            taus = offset + step * np.arange(count)
            return self._diag_states(taus)
        n, m = self.sys.n_state, self.sys.n_input
        Phi, S = _flow_pair(self.sys, step)
        M = np.zeros((n + m, n + m), dtype=complex)
        M[:n, :n] = Phi
        M[:n, n:] = S
        M[n:, n:] = np.eye(m)
        V = np.empty((count, n + m), dtype=complex)
        V[0] = np.concatenate([self.advance(self.x0, offset), self.u])
        seed = min(count, 32)
        for j in range(1, seed):
            V[j] = M @ V[j - 1]
        filled = seed
        if filled < count:
            P = np.linalg.matrix_power(M, filled)
            while filled < count:
                block = min(filled, count - filled)
                V[filled:filled + block] = V[:block] @ P.T
                filled += block
                if filled < count:
                    P = P @ P
        return V[:, :n]


def flow_matrices(sys, tau):
    """(Phi, S) with Phi = e^{A tau} and S = int_0^tau e^{A s} B ds."""
    if tau < 0:
        raise DomainError(f"tau must be nonnegative, got {tau}")
    n, m = sys.n_state, sys.n_input
    if sys.has_diagonal_A:
        lam = np.diag(sys.A_mat)
        z = lam * tau
        phi = np.exp(z)
        with np.errstate(divide="ignore", invalid="ignore"):
            gcoef = np.where(lam == 0, tau, np.expm1(z) / lam)
        return np.diag(phi), gcoef[:, None] * sys.B_mat
    aug = np.zeros((n + m, n + m), dtype=complex)
    aug[:n, :n] = sys.A_mat
    aug[:n, n:] = sys.B_mat
    E = linalg.matexp(aug * tau)
    return E[:n, :n], E[:n, n:]


def apply_semigroup(sys, x, tau):
    """e^{A tau} x; the open-loop (input-free) evolution over tau >= 0."""
    if tau < 0:
        raise DomainError(f"tau must be nonnegative, got {tau}")
    x = sys.as_state(x)
    if sys.has_diagonal_A:
        return np.exp(np.diag(sys.A_mat) * tau) * x
    return linalg.matexp(sys.A_mat * tau) @ x


def delta(sys, tau):
    """One-hold transition operator e^{A tau} + (int_0^tau e^{A s} B ds) F.

    Maps x(t_k) to x(t_k + tau) while the input is held at F x(t_k);
    delta(sys, 0) is the identity exactly.
    """
    if tau == 0.0:
        return np.eye(sys.n_state, dtype=complex)
    Phi, S = flow_matrices(sys, tau)
    return Phi + S @ sys.F_mat


def propagate_zoh(sys, x, u, tau):
    """State after time tau with the input held at u (exact)."""
    return HoldPropagator(sys, x, u).at(tau)


def state_norm(sys, x):
    """Gram-weighted state norm sqrt(x^H G x)."""
    x = sys.as_state(x)
    if sys._gram_identity:
        return float(np.linalg.norm(x))
    val = np.real(np.vdot(x, sys.gram @ x))
    return math.sqrt(max(val, 0.0))


def input_norm(sys, u):
    """Gram-weighted input norm."""
    u = np.asarray(u, dtype=complex).reshape(-1)
    if u.shape[0] != sys.n_input:
        raise ShapeError(f"input has length {u.shape[0]}, expected {sys.n_input}")
    if sys._gram_U_identity:
        return float(np.linalg.norm(u))
    val = np.real(np.vdot(u, sys.gram_U @ u))
    return math.sqrt(max(val, 0.0))


# ---------------------------------------------------------------------------
# spectral decomposition

@dataclass(frozen=True)
class Decomposition:
    """Index split of a diagonal system at a spectral abscissa.

    `plus_indices` collects the coordinates with Re(lambda) >= alpha (the
    finite "slow/unstable" part targeted by the feedback), `minus_indices`
    the exponentially stable remainder with growth bound `omega_minus`.
    """

    plus_indices: tuple
    minus_indices: tuple
    alpha: float
    omega_minus: float
    stable_minus: bool
    controllable_plus: bool

    @property
    def assumptions_hold(self):
        return self.stable_minus and self.controllable_plus


def decompose(sys, alpha, gap_tol=1e-9, rank_tol=1e-9):
    """Split a diagonal system at Re(lambda) = alpha and check the hypotheses.

    Requires a spectral gap: no eigenvalue within `gap_tol` of the splitting
    line.  Controllability of the plus part is checked per eigenvalue by the
    rank of [lambda I - A_plus, B_plus] via its singular values.
    """
    if not sys.has_diagonal_A:
        raise UnsupportedStructureError("decompose requires a diagonal A")
    lam = np.diag(sys.A_mat)
    re = lam.real
    if np.any(np.abs(re - alpha) < gap_tol):
        raise SpectralGapError(f"eigenvalue within {gap_tol} of Re = {alpha}")
    plus = tuple(int(i) for i in np.nonzero(re >= alpha)[0])
    minus = tuple(int(i) for i in np.nonzero(re < alpha)[0])
    omega_minus = float(re[list(minus)].max()) if minus else -math.inf
    stable_minus = omega_minus < 0.0
    controllable = True
    if plus:
        A_plus = sys.A_mat[np.ix_(plus, plus)]
        B_plus = sys.B_mat[list(plus), :]
        k = len(plus)
        for lv in np.diag(A_plus):
            pencil = np.hstack([lv * np.eye(k) - A_plus, B_plus])
            s = np.linalg.svd(pencil, compute_uv=False)
            if s.size == 0 or s.min() <= rank_tol * max(1.0, s.max()):
                controllable = False
                break
    return Decomposition(
        plus_indices=plus,
        minus_indices=minus,
        alpha=float(alpha),
        omega_minus=omega_minus,
        stable_minus=stable_minus,
        controllable_plus=controllable,
    )


def default_beam_alpha(gamma):
    """Splitting abscissa isolating the slowest beam pair (90% of the gap edge)."""
    return -0.9 * (9.0 * gamma * math.pi ** 2 / 4.0)


# ---------------------------------------------------------------------------
# analytic event-time recurrences for the left-shift counterexample

def shift_zeno_sequence(epsilon, variant, k_max):
    """Event times of the state-error triggers on the unit left shift.

    The finite-energy step profile shortens by t as it is shifted out, so the
    trigger times obey a closed recurrence:

    * ``sample_relative``  : t_{k+1} = t_k + eps^2 (1 - t_k)
    * ``current_relative`` : t_{k+1} = t_k + eps^2/(1+eps^2) (1 - t_k)

    Returns the times t_0 = 0, ..., t_{k_max}; they increase monotonically
    toward 1 with inter-event times shrinking to zero.
    """
    if not (0.0 < epsilon < 1.0):
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")
    if k_max < 1:
        raise DomainError("k_max must be >= 1")
    if variant == "sample_relative":
        rate = epsilon * epsilon
    elif variant == "current_relative":
        rate = epsilon * epsilon / (1.0 + epsilon * epsilon)
    else:
        raise DomainError(f"unknown recurrence variant {variant!r}")
    times = np.empty(k_max + 1)
    t = 0.0
    times[0] = t
    for k in range(1, k_max + 1):
        t = t + rate * (1.0 - t)
        times[k] = t
    return times
