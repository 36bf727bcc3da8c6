"""Event-triggering rules and event-instant detection.

Each rule compares an error signal against a relative threshold,

    g(t) = ||error(t)|| - epsilon * ||reference(t)||,

and fires at the first instant with g > 0 (strict).  The error is either
the feedback drift F x(t) - F x(t_k) measured in the input norm or the
state drift x(t) - x(t_k) in the state norm; the reference is the state
at the last update (sample-relative) or the current state.  The plus-part
variant restricts both signals to the coordinates of a spectral
decomposition.  Capped variants additionally force an update after
`tau_max`; periodic variants test the condition only on the lattice
t_k + l*h, l = 1..ell_max.

Continuous rules are monitored by scanning g on a uniform grid of step
`dt_scan` and bisecting the first sign change down to `tol_event`, which
approximates the exact first-crossing semantics.
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigurationError, DomainError, ZenoSuspected
from .model import HoldPropagator, state_norm

__all__ = [
    "ETMVariant",
    "ETMSpec",
    "EventOutcome",
    "TRIGGERED",
    "CAPPED",
    "HORIZON",
    "control_input",
    "trigger_margin",
    "next_event",
]

#: sampled states with Gram norm below this are treated as zero (the relative
#: trigger can then never fire and only the cap produces updates)
DEGENERATE_NORM = 1e-14

TRIGGERED = "triggered"
CAPPED = "capped"
HORIZON = "horizon"


class ETMVariant(str, Enum):
    SAMPLE_RELATIVE = "sample_relative"
    CURRENT_RELATIVE = "current_relative"
    SAMPLE_RELATIVE_CAPPED = "sample_relative_capped"
    PERIODIC_EVENT = "periodic_event"
    PURE_PERIODIC = "pure_periodic"
    STATE_ERR_SAMPLE_RELATIVE = "state_err_sample_relative"
    STATE_ERR_CURRENT_RELATIVE = "state_err_current_relative"
    PLUS_PART_CURRENT_RELATIVE_CAPPED = "plus_part_current_relative_capped"


_CAPPED = {ETMVariant.SAMPLE_RELATIVE_CAPPED, ETMVariant.PLUS_PART_CURRENT_RELATIVE_CAPPED}
_PERIODIC = {ETMVariant.PERIODIC_EVENT, ETMVariant.PURE_PERIODIC}
_STATE_ERROR = {ETMVariant.STATE_ERR_SAMPLE_RELATIVE, ETMVariant.STATE_ERR_CURRENT_RELATIVE}
_SAMPLE_REF = {
    ETMVariant.SAMPLE_RELATIVE,
    ETMVariant.SAMPLE_RELATIVE_CAPPED,
    ETMVariant.PERIODIC_EVENT,
    ETMVariant.STATE_ERR_SAMPLE_RELATIVE,
}


@dataclass(frozen=True)
class ETMSpec:
    """Parameters of one triggering rule.

    epsilon   relative threshold (> 0; unused by pure_periodic)
    tau_max   forced-update cap of the capped variants [s]
    h         check period of the periodic variants [s]
    ell_max   cap on the number of periods between updates
    dt_scan   monitoring grid step [s]
    dt_min    inter-event guard below which ZenoSuspected is raised [s]
    tol_event bisection tolerance for the event instant [s]
    allow_zeno  disable the dt_min guard (for the pathological analytics)
    """

    variant: ETMVariant
    epsilon: float = None
    tau_max: float = None
    h: float = None
    ell_max: int = None
    dt_scan: float = 1e-3
    dt_min: float = 1e-7
    tol_event: float = 1e-9
    allow_zeno: bool = False

    def __post_init__(self):
        object.__setattr__(self, "variant", ETMVariant(self.variant))
        v = self.variant
        if v is not ETMVariant.PURE_PERIODIC:
            if self.epsilon is None or not self.epsilon > 0.0:
                raise ConfigurationError(f"variant {v.value} requires epsilon > 0")
        if v in _CAPPED:
            if self.tau_max is None or not self.tau_max > 0.0:
                raise ConfigurationError(f"variant {v.value} requires tau_max > 0")
        if v in _PERIODIC:
            if self.h is None or not self.h > 0.0:
                raise ConfigurationError(f"variant {v.value} requires h > 0")
            if v is ETMVariant.PERIODIC_EVENT:
                if self.ell_max is None or self.ell_max < 1:
                    raise ConfigurationError("periodic_event requires ell_max >= 1")
            elif self.ell_max is None:
                object.__setattr__(self, "ell_max", 1)
        if not self.dt_scan > 0.0 or not self.tol_event > 0.0:
            raise ConfigurationError("dt_scan and tol_event must be positive")
        if not self.dt_min < self.dt_scan:
            raise ConfigurationError("dt_min must be smaller than dt_scan")

    @property
    def is_capped(self):
        return self.variant in _CAPPED

    @property
    def is_periodic(self):
        return self.variant in _PERIODIC


@dataclass(frozen=True)
class EventOutcome:
    """Next update instant and why it was scheduled."""

    t_next: float
    reason: str
    trigger_margin_at_t_next: float


def control_input(spec, sys, x_k, plus_indices=None):
    """Held input for the interval starting at the sampled state x_k."""
    x_k = sys.as_state(x_k)
    if spec.variant is ETMVariant.PLUS_PART_CURRENT_RELATIVE_CAPPED:
        if plus_indices is None:
            raise ConfigurationError("plus-part variant needs the decomposition indices")
        idx = list(plus_indices)
        return sys.F_mat[:, idx] @ x_k[idx]
    return sys.F_mat @ x_k


def _vec_norms(E, gram, identity):
    """Row-wise Gram norms of a (T, d) array."""
    if identity:
        return np.linalg.norm(E, axis=1)
    vals = np.einsum("ti,ij,tj->t", E.conj(), gram, E).real
    return np.sqrt(np.maximum(vals, 0.0))


def _margins_on_states(spec, sys, x_k, states, plus_indices):
    """Trigger margins g for a batch of candidate states, shape (T,)."""
    v = spec.variant
    if v is ETMVariant.PURE_PERIODIC:
        raise ConfigurationError("pure_periodic has no trigger margin")
    if v is ETMVariant.PLUS_PART_CURRENT_RELATIVE_CAPPED:
        if plus_indices is None:
            raise ConfigurationError("plus-part variant needs the decomposition indices")
        idx = list(plus_indices)
        F_plus = sys.F_mat[:, idx]
        err = (states[:, idx] - x_k[idx][None, :]) @ F_plus.T
        err_norm = _vec_norms(err, sys.gram_U, sys._gram_U_identity)
        gram_plus = sys.gram[np.ix_(idx, idx)]
        ident = sys._gram_identity
        ref = _vec_norms(states[:, idx], gram_plus, ident)
        return err_norm - spec.epsilon * ref
    if v in _STATE_ERROR:
        err = states - x_k[None, :]
        err_norm = _vec_norms(err, sys.gram, sys._gram_identity)
    else:
        err = (states - x_k[None, :]) @ sys.F_mat.T
        err_norm = _vec_norms(err, sys.gram_U, sys._gram_U_identity)
    if v in _SAMPLE_REF:
        ref = np.full(states.shape[0], state_norm(sys, x_k))
    else:
        ref = _vec_norms(states, sys.gram, sys._gram_identity)
    return err_norm - spec.epsilon * ref


def trigger_margin(spec, sys, x_k, x_t, plus_indices=None):
    """Margin g = ||error|| - epsilon ||reference|| for one candidate state.

    The rule fires when g > 0 (strict); g <= 0 at x_t = x_k by construction.
    """
    x_k = sys.as_state(x_k)
    x_t = sys.as_state(x_t)
    return float(_margins_on_states(spec, sys, x_k, x_t[None, :], plus_indices)[0])


def _zeno_guard(spec, t_k, dt):
    if dt < spec.dt_min and not spec.allow_zeno:
        raise ZenoSuspected(t_k, dt)


def _bisect_crossing(spec, sys, x_k, prop, lo, hi, x_lo, g_hi, plus_indices):
    """First point with positive margin, bracketed to width <= tol_event.

    Invariants: x_lo is the state at lo with margin <= 0 there, and the margin
    at hi is g_hi > 0.  Midpoints are reached by advancing x_lo by the half
    width, so the bracket widths are dyadic fractions of the initial one and
    the flow pairs they need are cached on the system.  Returns (hi, g_hi).
    """
    while hi - lo > spec.tol_event:
        w = 0.5 * (hi - lo)
        x_mid = prop.advance(x_lo, w)
        g_mid = float(_margins_on_states(spec, sys, x_k, x_mid[None, :],
                                         plus_indices)[0])
        if g_mid > 0.0:
            hi, g_hi = lo + w, g_mid
        else:
            lo, x_lo = lo + w, x_mid
    return hi, g_hi


def next_event(spec, sys, x_k, t_k, t_horizon, plus_indices=None):
    """First update instant after t_k along the held-input flow from x_k.

    Continuous variants scan the margin on the dt_scan grid and bisect the
    first point with g > 0; a margin exactly zero at a grid point does not
    fire.  Capped variants return reason "capped" at t_k + tau_max when no
    earlier crossing exists; reaching t_horizon returns reason "horizon".
    Periodic variants test only the lattice t_k + l*h up to l = ell_max.
    Raises ZenoSuspected if the produced inter-event time falls below
    dt_min (unless allow_zeno is set).
    """
    if not t_horizon > t_k:
        raise DomainError(f"t_horizon {t_horizon} must exceed t_k {t_k}")
    x_k = sys.as_state(x_k)
    u_k = control_input(spec, sys, x_k, plus_indices)
    horizon = t_horizon - t_k
    degenerate = state_norm(sys, x_k) < DEGENERATE_NORM

    if spec.is_periodic:
        return _next_event_periodic(spec, sys, x_k, t_k, horizon, u_k,
                                    plus_indices, degenerate)

    cap = spec.tau_max if spec.is_capped else math.inf
    tau_end = min(cap, horizon)
    if degenerate:
        # zero state: the relative rule can never fire, only the cap acts
        if cap <= horizon:
            _zeno_guard(spec, t_k, cap)
            return EventOutcome(t_k + cap, CAPPED, 0.0)
        return EventOutcome(t_k + horizon, HORIZON, 0.0)

    prop = HoldPropagator(sys, x_k, u_k)

    dt = spec.dt_scan
    n_grid = int(math.floor(tau_end / dt + 1e-12))
    taus = dt * np.arange(1, n_grid + 1)
    states = prop.states_on_grid(dt, dt, n_grid)
    if n_grid == 0 or taus[-1] < tau_end - 1e-12 * max(1.0, tau_end):
        # off-grid endpoint (cap or horizon not a multiple of dt_scan)
        taus = np.append(taus, tau_end)
        states = np.vstack([states, prop.at(tau_end)[None, :]])
    margins = _margins_on_states(spec, sys, x_k, states, plus_indices)

    hit = np.nonzero(margins > 0.0)[0]
    if hit.size:
        j = int(hit[0])
        if j == 0:
            lo, x_lo = 0.0, x_k
        else:
            lo, x_lo = float(taus[j - 1]), states[j - 1]
        tau_star, g_star = _bisect_crossing(
            spec, sys, x_k, prop, lo, float(taus[j]), x_lo, float(margins[j]),
            plus_indices)
        _zeno_guard(spec, t_k, tau_star)
        return EventOutcome(t_k + tau_star, TRIGGERED, g_star)

    if cap <= horizon:
        _zeno_guard(spec, t_k, cap)
        return EventOutcome(t_k + cap, CAPPED, float(margins[-1]))
    return EventOutcome(t_k + horizon, HORIZON, float(margins[-1]))


def _next_event_periodic(spec, sys, x_k, t_k, horizon, u_k, plus_indices, degenerate):
    h = spec.h
    ell_max = spec.ell_max
    cap = ell_max * h
    if spec.variant is ETMVariant.PURE_PERIODIC:
        if h <= horizon + 1e-12 * max(1.0, horizon):
            _zeno_guard(spec, t_k, h)
            return EventOutcome(t_k + h, CAPPED, math.nan)
        return EventOutcome(t_k + horizon, HORIZON, math.nan)

    ell_end = min(ell_max, int(math.floor(horizon / h + 1e-12)))
    last_margin = 0.0
    if ell_end >= 1 and not degenerate:
        prop = HoldPropagator(sys, x_k, u_k)
        states = prop.states_on_grid(h, h, ell_end)
        margins = _margins_on_states(spec, sys, x_k, states, plus_indices)
        hit = np.nonzero(margins > 0.0)[0]
        if hit.size:
            ell = int(hit[0]) + 1
            _zeno_guard(spec, t_k, ell * h)
            return EventOutcome(t_k + ell * h, TRIGGERED, float(margins[hit[0]]))
        last_margin = float(margins[-1])
    if cap <= horizon + 1e-12 * max(1.0, horizon):
        _zeno_guard(spec, t_k, cap)
        return EventOutcome(t_k + cap, CAPPED, last_margin)
    return EventOutcome(t_k + horizon, HORIZON, last_margin)
