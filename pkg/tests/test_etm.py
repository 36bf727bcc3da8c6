import math

import numpy as np
import pytest

from etcsim import model
from etcsim.errors import ConfigurationError, DomainError, ZenoSuspected
from etcsim.etm import (
    CAPPED,
    HORIZON,
    TRIGGERED,
    ETMSpec,
    ETMVariant,
    control_input,
    next_event,
    trigger_margin,
)


@pytest.fixture(scope="module")
def rod():
    return model.build_heat_rod(4)


@pytest.fixture(scope="module")
def cascade():
    return model.build_heat_cascade(8)


def basis_state(n, k):
    x = np.zeros(n, dtype=complex)
    x[k] = 1.0
    return x


class TestSpecValidation:
    def test_epsilon_required(self):
        with pytest.raises(ConfigurationError):
            ETMSpec(ETMVariant.SAMPLE_RELATIVE)

    def test_capped_needs_tau_max(self):
        with pytest.raises(ConfigurationError):
            ETMSpec(ETMVariant.SAMPLE_RELATIVE_CAPPED, epsilon=0.3)

    def test_periodic_needs_h_and_ell(self):
        with pytest.raises(ConfigurationError):
            ETMSpec(ETMVariant.PERIODIC_EVENT, epsilon=0.3, ell_max=3)
        with pytest.raises(ConfigurationError):
            ETMSpec(ETMVariant.PERIODIC_EVENT, epsilon=0.3, h=0.1)

    def test_pure_periodic_needs_no_epsilon(self):
        spec = ETMSpec(ETMVariant.PURE_PERIODIC, h=0.25)
        assert spec.ell_max == 1

    def test_guard_ordering(self):
        with pytest.raises(ConfigurationError):
            ETMSpec(ETMVariant.SAMPLE_RELATIVE, epsilon=0.3, dt_min=1e-2,
                    dt_scan=1e-3)


class TestTriggerMargin:
    def test_zero_error_at_sampling_instant(self, rod):
        spec = ETMSpec(ETMVariant.SAMPLE_RELATIVE, epsilon=0.4)
        x = basis_state(5, 1)
        g = trigger_margin(spec, rod, x, x)
        assert abs(g + 0.4 * 1.0) < 1e-14

    def test_zero_sampled_state_fires_on_any_drift(self, rod):
        spec = ETMSpec(ETMVariant.SAMPLE_RELATIVE, epsilon=0.4)
        x_k = np.zeros(5, dtype=complex)
        x_t = basis_state(5, 0)
        g = trigger_margin(spec, rod, x_k, x_t)
        assert abs(g - 1.0) < 1e-14  # ||F x_t|| with zero threshold

    def test_heat_rod_state_error_crossing(self, rod):
        # with a pure bending mode the rule crosses exactly at log(1+eps)/|lam|
        eps = 0.3
        spec = ETMSpec(ETMVariant.STATE_ERR_CURRENT_RELATIVE, epsilon=eps)
        n = 2
        tau_star = math.log(1 + eps) / (n * math.pi) ** 2
        x0 = basis_state(5, n)
        for tau, sign in ((tau_star * 0.999, -1), (tau_star * 1.001, +1)):
            x_t = model.apply_semigroup(rod, x0, tau)
            assert sign * trigger_margin(spec, rod, x0, x_t) > 0

    def test_plus_part_needs_indices(self, rod):
        spec = ETMSpec(ETMVariant.PLUS_PART_CURRENT_RELATIVE_CAPPED,
                       epsilon=0.5, tau_max=1.0)
        with pytest.raises(ConfigurationError):
            trigger_margin(spec, rod, basis_state(5, 0), basis_state(5, 1))

    def test_pure_periodic_has_no_margin(self, rod):
        spec = ETMSpec(ETMVariant.PURE_PERIODIC, h=0.1)
        with pytest.raises(ConfigurationError):
            trigger_margin(spec, rod, basis_state(5, 0), basis_state(5, 1))


class TestNextEvent:
    def test_open_loop_never_triggers(self):
        # stable diagonal system with F = 0: feedback drift is identically zero
        A = np.diag([-1.0, -2.0])
        sys = model.ModalSystem(A, np.eye(2), np.zeros((2, 2)), np.eye(2), np.eye(2))
        spec = ETMSpec(ETMVariant.SAMPLE_RELATIVE, epsilon=0.1)
        out = next_event(spec, sys, np.array([1.0, 1.0]), 0.0, 2.0)
        assert out.reason == HORIZON and out.t_next == 2.0
        spec_c = ETMSpec(ETMVariant.SAMPLE_RELATIVE_CAPPED, epsilon=0.1, tau_max=0.5)
        out = next_event(spec_c, sys, np.array([1.0, 1.0]), 0.0, 2.0)
        assert out.reason == CAPPED and abs(out.t_next - 0.5) < 1e-9

    def test_heat_rod_zeno_time(self, rod):
        eps = 0.3
        spec = ETMSpec(ETMVariant.STATE_ERR_CURRENT_RELATIVE, epsilon=eps)
        out = next_event(spec, rod, basis_state(5, 1), 0.0, 1.0)
        expected = math.log(1.3) / math.pi ** 2
        assert out.reason == TRIGGERED
        assert abs(out.t_next - expected) < 1e-4 * expected
        assert out.trigger_margin_at_t_next > 0

    def test_periodic_grid_semantics(self, cascade):
        # margins on the lattice decide the event; the instant is an exact multiple
        x0 = np.zeros(10, dtype=complex)
        x0[0] = 1.0
        x0[-1] = -1.0
        h = 0.05
        probe = ETMSpec(ETMVariant.SAMPLE_RELATIVE, epsilon=0.3)
        u = control_input(probe, cascade, x0)
        prop = model.HoldPropagator(cascade, x0, u)
        margins = [trigger_margin(probe, cascade, x0, prop.at(ell * h))
                   for ell in range(1, 41)]
        first = next(i for i, g in enumerate(margins) if g > 0) + 1
        spec = ETMSpec(ETMVariant.PERIODIC_EVENT, epsilon=0.3, h=h, ell_max=40)
        out = next_event(spec, cascade, x0, 0.0, 10.0)
        assert out.reason == TRIGGERED
        assert out.t_next == first * h  # exact grid arithmetic
        assert first > 1

    def test_periodic_cap(self, cascade):
        x0 = basis_state(10, 3) * 1e-3
        spec = ETMSpec(ETMVariant.PERIODIC_EVENT, epsilon=10.0, h=0.1, ell_max=4)
        out = next_event(spec, cascade, x0, 0.0, 10.0)
        assert out.reason == CAPPED and abs(out.t_next - 0.4) < 1e-12

    def test_pure_periodic(self, cascade):
        spec = ETMSpec(ETMVariant.PURE_PERIODIC, h=0.25)
        out = next_event(spec, cascade, basis_state(10, 0), 3.0, 10.0)
        assert out.reason == CAPPED and abs(out.t_next - 3.25) < 1e-12
        out = next_event(spec, cascade, basis_state(10, 0), 3.0, 3.1)
        assert out.reason == HORIZON and out.t_next == 3.1

    def test_degenerate_state_relies_on_cap(self, rod):
        x0 = np.zeros(5, dtype=complex)
        spec = ETMSpec(ETMVariant.SAMPLE_RELATIVE_CAPPED, epsilon=0.3, tau_max=0.7)
        out = next_event(spec, rod, x0, 0.0, 5.0)
        assert out.reason == CAPPED and abs(out.t_next - 0.7) < 1e-12
        spec_u = ETMSpec(ETMVariant.SAMPLE_RELATIVE, epsilon=0.3)
        out = next_event(spec_u, rod, x0, 0.0, 5.0)
        assert out.reason == HORIZON

    def test_zeno_guard(self, rod):
        # second bending mode crosses at log(1.3)/(4 pi^2) ~ 6.6e-3 < dt_min
        spec = ETMSpec(ETMVariant.STATE_ERR_CURRENT_RELATIVE, epsilon=0.3,
                       dt_scan=5e-2, dt_min=1e-2)
        with pytest.raises(ZenoSuspected) as info:
            next_event(spec, rod, basis_state(5, 2), 0.0, 1.0)
        assert info.value.inter_event < 1e-2
        spec_ok = ETMSpec(ETMVariant.STATE_ERR_CURRENT_RELATIVE, epsilon=0.3,
                          dt_scan=5e-2, dt_min=1e-2, allow_zeno=True)
        out = next_event(spec_ok, rod, basis_state(5, 2), 0.0, 1.0)
        assert out.reason == TRIGGERED

    def test_first_event_strictly_after_t_k(self, cascade):
        spec = ETMSpec(ETMVariant.SAMPLE_RELATIVE, epsilon=0.2)
        x0 = np.zeros(10, dtype=complex)
        x0[0] = 1.0
        x0[-1] = -1.0
        out = next_event(spec, cascade, x0, 1.5, 8.0)
        assert out.t_next > 1.5 + spec.dt_min

    def test_horizon_precondition(self, rod):
        spec = ETMSpec(ETMVariant.SAMPLE_RELATIVE, epsilon=0.2)
        with pytest.raises(DomainError):
            next_event(spec, rod, basis_state(5, 0), 1.0, 1.0)

    def test_detection_monotone_under_grid_refinement(self, cascade):
        # halving dt_scan never yields a later first event
        rng = np.random.default_rng(42)
        for _ in range(20):
            x0 = rng.standard_normal(10) + 1j * rng.standard_normal(10)
            coarse = ETMSpec(ETMVariant.CURRENT_RELATIVE, epsilon=0.35, dt_scan=2e-3)
            fine = ETMSpec(ETMVariant.CURRENT_RELATIVE, epsilon=0.35, dt_scan=1e-3)
            t_coarse = next_event(coarse, cascade, x0, 0.0, 2.0).t_next
            t_fine = next_event(fine, cascade, x0, 0.0, 2.0).t_next
            assert t_fine <= t_coarse + 1e-9


class TestControlInput:
    def test_full_feedback(self, cascade):
        x = np.zeros(10, dtype=complex)
        x[0] = 2.0
        spec = ETMSpec(ETMVariant.SAMPLE_RELATIVE, epsilon=0.1)
        assert abs(control_input(spec, cascade, x)[0] - (-2.0)) < 1e-14

    def test_plus_part_reads_plus_coordinates_only(self):
        sys = model.build_beam(4, 1.0 / 15.0)
        dec = model.decompose(sys, model.default_beam_alpha(1.0 / 15.0))
        spec = ETMSpec(ETMVariant.PLUS_PART_CURRENT_RELATIVE_CAPPED,
                       epsilon=0.5, tau_max=1.0)
        x = np.ones(8, dtype=complex)
        u_plus = control_input(spec, sys, x, dec.plus_indices)
        x_masked = x.copy()
        x_masked[2:] = 0.0
        assert np.allclose(u_plus, sys.F_mat @ x_masked)
