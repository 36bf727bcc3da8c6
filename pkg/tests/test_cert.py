import json
import math

import numpy as np
import pytest

from etcsim import cert, model, sim
from etcsim.errors import CertificateError, DomainError
from etcsim.etm import ETMSpec, ETMVariant

GAMMA = 1.0 / 15.0


@pytest.fixture(scope="module")
def cascade():
    return model.build_heat_cascade(20)


@pytest.fixture(scope="module")
def beam_plus():
    sys = model.build_beam(15, GAMMA)
    dec = model.decompose(sys, model.default_beam_alpha(GAMMA))
    idx = list(dec.plus_indices)
    return (sys.A_mat[np.ix_(idx, idx)], sys.B_mat[idx, :], sys.F_mat[:, idx],
            7.0 * GAMMA * math.pi ** 2 / 4.0)


class TestThresholdAndDecay:
    def test_threshold_bound_case_study(self):
        val = cert.trigger_threshold_bound(1.571, 0.5, 1.0)
        assert 0.318 < val < 0.319
        assert math.floor(val * 100) / 100 == 0.31

    def test_decay_rate_value(self):
        gam = cert.capped_trigger_decay_rate(0.3, 1.571, 0.5, 1.0, 1.0)
        eps0 = 0.3 * 1.571 / 0.5
        ref = -math.log((1 - eps0) * math.exp(-0.5) + eps0)
        assert abs(gam - ref) < 1e-14
        assert abs(gam - 0.02284) < 5e-5

    def test_zero_threshold_limit(self):
        assert abs(cert.capped_trigger_decay_rate(0.0, 2.0, 0.7, 1.0, 1.3) - 0.7) < 1e-14

    def test_decay_between_zero_and_omega(self):
        eps_max = cert.trigger_threshold_bound(1.571, 0.5, 1.0)
        for eps in np.linspace(1e-4, eps_max * 0.999, 25):
            gam = cert.capped_trigger_decay_rate(eps, 1.571, 0.5, 1.0, 1.0)
            assert 0.0 < gam < 0.5

    def test_inadmissible_threshold(self):
        with pytest.raises(CertificateError):
            cert.capped_trigger_decay_rate(0.35, 1.571, 0.5, 1.0, 1.0)
        rep = cert.capped_trigger_report(0.35, 1.571, 0.5, 1.0, 1.0)
        assert rep.verdict == cert.NOT_CERTIFIED


class TestGrowthEnvelope:
    def test_normal_system_attains_one(self):
        sys = model.ModalSystem(np.diag([-0.5, -1.0]), np.ones((2, 1)),
                                np.zeros((1, 2)), np.eye(2), np.eye(1))
        val = cert.growth_envelope_constant(sys, 0.5, t_max=10.0, closed_loop=False)
        assert abs(val - 1.0) < 1e-9

    def test_case_study_value(self, cascade):
        val = cert.growth_envelope_constant(cascade, 0.5)
        assert val <= 1.5715
        assert abs(val - 1.571) < 0.02

    def test_monotone_in_omega(self, cascade):
        vals = [cert.growth_envelope_constant(cascade, w, t_max=25.0)
                for w in (0.3, 0.4, 0.5)]
        assert vals[0] <= vals[1] <= vals[2]

    def test_rejects_insufficient_margin(self, cascade):
        with pytest.raises(CertificateError):
            cert.growth_envelope_constant(cascade, 1.5)


class TestLyapunovCertificate:
    def test_scalar_closed_forms(self):
        sys = model.ModalSystem(np.array([[0.0]]), np.array([[1.0]]),
                                np.array([[-1.0]]), np.eye(1), np.eye(1))
        rep = cert.lyapunov_trigger_certificate(sys, eps=0.4)
        assert abs(rep.outputs["norm_PB"] - 0.5) < 1e-10
        assert abs(rep.outputs["eps_max"] - 1.0) < 1e-9
        assert abs(rep.outputs["int_transition_sq"] - 0.5) < 1e-5
        assert abs(rep.outputs["alpha"] - 0.5) < 1e-10
        assert abs(rep.outputs["beta"] - 0.5) < 1e-10
        assert abs(rep.outputs["gamma"] - (1.0 - 0.4)) < 1e-4
        assert rep.outputs["lyapunov_residual"] < 1e-10

    def test_case_study_dominates_crude_bound(self, cascade):
        rep = cert.lyapunov_trigger_certificate(cascade, eps=0.3, M=1.571, omega=0.5)
        assert abs(rep.outputs["crude_eps_max"] - 0.5 / 1.571 ** 2) < 1e-12
        assert rep.outputs["eps_max"] >= rep.outputs["crude_eps_max"]
        assert rep.outputs["gamma"] > 0
        assert rep.verdict == cert.CERTIFIED

    def test_not_certified_when_unstable(self):
        sys = model.ModalSystem(np.array([[1.0]]), np.array([[1.0]]),
                                np.array([[0.0]]), np.eye(1), np.eye(1))
        rep = cert.lyapunov_trigger_certificate(sys)
        assert rep.verdict == cert.NOT_CERTIFIED


class TestInterEventLowerBound:
    def test_open_loop_reaches_grid_end(self):
        rod = model.build_heat_rod(3)
        open_sys = model.ModalSystem(rod.A_mat, rod.B_mat,
                                     np.zeros_like(rod.F_mat), rod.gram,
                                     rod.gram_U)
        rep = cert.inter_event_lower_bound(open_sys, 0.3, tau_max=0.5)
        assert rep.outputs["theta"] == 0.5
        assert rep.verdict == cert.CERTIFIED

    def test_inconclusive_for_tiny_threshold(self, cascade):
        rep = cert.inter_event_lower_bound(cascade, 1e-9)
        assert rep.outputs["theta"] == 0.0
        assert rep.verdict == cert.INCONCLUSIVE

    def test_monotone_in_threshold(self, cascade):
        thetas = [cert.inter_event_lower_bound(cascade, e).outputs["theta"]
                  for e in (0.1, 0.2, 0.3)]
        assert 0.0 < thetas[0] <= thetas[1] <= thetas[2]


class TestCoercivity:
    def test_identity_semigroup(self):
        sys = model.ModalSystem(np.zeros((2, 2)), np.eye(2), np.zeros((2, 2)),
                                np.eye(2), np.eye(2))
        rep = cert.semigroup_coercivity(sys, 0.5)
        assert abs(rep.outputs["c1"] - 1.0) < 1e-12
        assert abs(rep.outputs["M"] - 1.0) < 1e-12
        assert abs(rep.outputs["c2"] - 2.0) < 1e-12

    def test_heat_rod_minimum_mode(self):
        rep = cert.semigroup_coercivity(model.build_heat_rod(5), 0.1)
        assert abs(rep.outputs["c1"] - math.exp(-25 * math.pi ** 2 * 0.1)) < 1e-15

    def test_isometric_group(self):
        A = np.array([[0.0, 1.0], [-1.0, 0.0]])  # skew: a rotation group
        sys = model.ModalSystem(A, np.eye(2), np.zeros((2, 2)), np.eye(2), np.eye(2))
        for s1 in (0.3, 1.0, 2.5):
            rep = cert.semigroup_coercivity(sys, s1)
            assert abs(rep.outputs["c1"] - 1.0) < 1e-10


class TestLMI:
    def test_scalar_closed_form(self):
        # A=-1, B=1, F=0, margin 1: optimal kappa gives feasibility iff eps <= 1/2
        val = cert.lmi_max_eps(np.array([[-1.0]]), np.array([[1.0]]),
                               np.array([[0.0]]), 1.0, refine=False)
        assert abs(val - 0.5) < 1e-3

    def test_round_trip_witness(self, beam_plus):
        A_p, B_p, F_p, gp = beam_plus
        w = cert.lmi_search(A_p, B_p, F_p, gp, 0.5)
        assert w is not None
        assert cert.lmi_check(A_p, B_p, F_p, gp, 0.5, w.P, w.Q, w.kappa) == cert.CERTIFIED

    def test_zero_threshold_feasible(self, beam_plus):
        A_p, B_p, F_p, gp = beam_plus
        assert cert.lmi_search(A_p, B_p, F_p, gp, 1e-12, refine=False) is not None

    def test_too_large_margin_not_certified(self, beam_plus):
        A_p, B_p, F_p, _ = beam_plus
        assert cert.lmi_search(A_p, B_p, F_p, 50.0, 0.1) is None

    def test_check_rejects_bad_witness(self, beam_plus):
        A_p, B_p, F_p, gp = beam_plus
        bad = np.eye(2)
        assert cert.lmi_check(A_p, B_p, F_p, gp, 0.5, bad, bad, 1.0) == cert.NOT_CERTIFIED


class TestDecomposedMargin:
    def test_beam_constants(self):
        gp = 7 * GAMMA * math.pi ** 2 / 4
        om = -9 * GAMMA * math.pi ** 2 / 4
        val = cert.decomposed_margin(gp, om)
        assert abs(val - gp) < 1e-12
        assert abs(val - 1.1514) < 1e-4

    def test_simple_cases(self):
        assert cert.decomposed_margin(2.0, -1.0) == 1.0
        assert cert.decomposed_margin(1.0, -1.0) == 1.0
        with pytest.raises(DomainError):
            cert.decomposed_margin(-1.0, -1.0)


class TestPeriodicTrigger:
    def test_scalar_transition(self):
        sys = model.ModalSystem(np.array([[-1.0]]), np.array([[1.0]]),
                                np.array([[-1.0]]), np.eye(1), np.eye(1))
        rep = cert.periodic_trigger_certificate(sys, 0.1, 2)
        expected = 2 * math.exp(-0.1) - 1
        assert abs(rep.outputs["spectral_radius"] - expected) < 1e-12
        assert abs(rep.outputs["M_d"] - 1.0) < 1e-9

    def test_open_loop_diagonal(self):
        A = np.diag([-1.0, -3.0])
        sys = model.ModalSystem(A, np.ones((2, 1)), np.zeros((1, 2)),
                                np.eye(2), np.eye(1))
        rep = cert.periodic_trigger_certificate(sys, 0.2, 2)
        assert abs(rep.outputs["spectral_radius"] - math.exp(-0.2)) < 1e-12
        assert rep.outputs["eps_star"] > 0

    def test_decay_function_monotone_positive(self):
        delta_h, eps0, h = 0.8, 0.05, 0.1
        vals = [cert.periodic_decay_rate(delta_h, eps0, h, ell)
                for ell in range(1, 51)]
        assert all(v > 0 for v in vals)
        assert all(a >= b for a, b in zip(vals, vals[1:]))

    def test_unstable_period_not_certified(self):
        sys = model.ModalSystem(np.array([[1.0]]), np.array([[1.0]]),
                                np.array([[0.0]]), np.eye(1), np.eye(1))
        rep = cert.periodic_trigger_certificate(sys, 0.5, 2)
        assert rep.verdict == cert.NOT_CERTIFIED

    def test_certified_decay_along_runs(self, cascade):
        h, ell_max = 0.4, 3
        rep = cert.periodic_trigger_certificate(cascade, h, ell_max, epsilon=None)
        eps_star = rep.outputs["eps_star"]
        eps = 0.8 * eps_star
        rep2 = cert.periodic_trigger_certificate(cascade, h, ell_max, epsilon=eps)
        gam = rep2.outputs["gamma"]
        M_d = rep2.outputs["M_d"]
        spec = ETMSpec(ETMVariant.PERIODIC_EVENT, epsilon=eps, h=h,
                       ell_max=ell_max)
        rng = np.random.default_rng(17)
        for _ in range(20):
            x0 = rng.standard_normal(22) + 1j * rng.standard_normal(22)
            n0 = model.state_norm(cascade, x0)
            traj, log = sim.simulate(cascade, spec, x0, t_end=4.0, dt_out=0.1)
            for rec in log.records:
                bound = M_d * math.exp(-gam * rec.t) * n0 * (1 + 1e-6)
                assert rec.norm <= bound


class TestSamplingScanAndPoles:
    def test_case_study_periods_stable(self, cascade):
        rows, rep = cert.sampling_period_scan(cascade, [0.4])
        assert rows[0][1] < 1.0
        assert rep.verdict == cert.CERTIFIED
        beam = model.build_beam(15, GAMMA)
        rows, _ = cert.sampling_period_scan(beam, [0.15])
        assert rows[0][1] < 1.0

    def test_small_period_limit(self, cascade):
        rows, _ = cert.sampling_period_scan(cascade, [1e-3, 0.4])
        assert rows[0][1] < 1.0
        assert 1.0 - rows[0][1] < 0.01  # rho -> 1 from below as h -> 0

    def test_cascade_poles_paper_values(self):
        po, pi, stable, rep = cert.cascade_pole_check(0.5, 1.0, -1.0, -2.5, 1.0)
        assert stable
        assert np.allclose(sorted(po.real), [-1.0, -1.0], atol=1e-9)
        assert np.allclose(po.imag, 0.0, atol=1e-9)
        assert np.allclose(pi, [-2.0], atol=1e-12)

    def test_marginal_and_factored_cases(self):
        _, _, stable, _ = cert.cascade_pole_check(0.5, 1.0, 0.0, -2.5, 1.0)
        assert not stable  # B+ H f = 0 leaves a pole at the origin
        po, _, stable, _ = cert.cascade_pole_check(-3.0, 1.0, -2.0, 0.0, 1.0)
        assert stable
        assert np.allclose(sorted(po.real), [-2.0, -1.0], atol=1e-9)


class TestReportSerialization:
    def test_json_round_trip_and_digits(self):
        rep = cert.CertificateReport(
            "demo", cert.CERTIFIED,
            {"x": 1.0 / 3.0},
            {"matrix": np.array([[1.0 + 2.0j, 0.0], [0.0, 1.0 / 7.0]]),
             "flag": True, "seq": [1.0, 2.0]},
            notes="n")
        payload = json.loads(rep.to_json())
        assert payload["name"] == "demo"
        assert payload["inputs"]["x"] == 0.333333333333
        assert payload["outputs"]["matrix"][0][0] == [1.0, 2.0]
        assert payload["outputs"]["flag"] is True
