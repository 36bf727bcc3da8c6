"""Command-line interface: simulate, certify, and reproduce the case studies.

Subcommands
-----------
simulate --config FILE --outdir DIR
    Run the configured closed loop; writes trajectory.csv, events.csv and
    metrics.json into DIR.
certify --config FILE --out FILE.json [--strict]
    Compute the certificate battery appropriate to the configured system.
    With --strict, any NotCertified verdict sets exit code 3.
reproduce NAME --outdir DIR
    One-command regeneration of the bundled studies:
    fig1, fig2, fig3, zeno_shift, zeno_heat, certs.

Exit codes: 0 success, 2 configuration/validation error, 3 certificate
failure under --strict.  Outputs are plot-ready CSV/JSON, byte-identical
across runs with the same seed.  ETCSIM_THREADS caps sweep parallelism.
"""

import argparse
import json
import math
import os
import sys as _sys

# the workload is dense linear algebra on tiny matrices, where BLAS thread
# pools only add overhead; default them off unless the user already chose
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

__all__ = ["main"]


def _sweep_map(fn, items):
    """Map preserving order, optionally threaded via ETCSIM_THREADS."""
    workers = int(os.environ.get("ETCSIM_THREADS", "1"))
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _sig(x):
    return float(f"{x:.12g}")


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _run_configured(cfg):
    import numpy as np

    from . import config, model, sim

    system = config.build_system(cfg)
    spec = config.build_etm_spec(cfg)
    t_end, dt_out, seed = config.sim_params(cfg)
    x0 = config.initial_state(cfg, system)
    plus = None
    from .etm import ETMVariant

    if spec.variant is ETMVariant.PLUS_PART_CURRENT_RELATIVE_CAPPED:
        dec = model.decompose(system, config.splitting_abscissa(cfg, system))
        plus = dec.plus_indices
    traj, log = sim.simulate(system, spec, x0, t_end, dt_out, plus_indices=plus)
    return system, spec, traj, log


def _metrics(system, traj, log):
    from . import sim

    out = {}
    try:
        ts = sim.settling_time(traj)
        out["T_s"] = _sig(ts)
        out["updates"] = sim.count_updates(log, ts)
    except Exception as exc:  # horizon too short is a reportable outcome
        out["T_s"] = None
        out["updates"] = None
        out["note"] = str(exc)
    if len(log) > 1:
        out["min_inter_event"] = _sig(sim.min_inter_event(log))
    out["events_total"] = len(log)
    return out


def cmd_simulate(args):
    from . import config, sim

    cfg = config.load_config(args.config)
    system, spec, traj, log = _run_configured(cfg)
    os.makedirs(args.outdir, exist_ok=True)
    sim.write_trajectory_csv(traj, os.path.join(args.outdir, "trajectory.csv"))
    sim.write_event_log_csv(log, os.path.join(args.outdir, "events.csv"))
    _write_json(os.path.join(args.outdir, "metrics.json"),
                _metrics(system, traj, log))
    print(f"wrote trajectory.csv, events.csv, metrics.json to {args.outdir}")
    return 0


def _certificates_for(cfg):
    import numpy as np

    from . import cert, config, model

    system = config.build_system(cfg)
    eps = cfg.etm.get("epsilon")
    reports = []
    if system.name == "heat_cascade":
        meta = system.meta
        _, _, _, rep_poles = cert.cascade_pole_check(
            meta["G"], meta["H"], meta["f"], meta["F2"],
            meta["b_amp"] * (meta["b_hi"] - meta["b_lo"]))
        reports.append(rep_poles)
        omega = 0.5
        M = cert.growth_envelope_constant(system, omega)
        tau_max = cfg.etm.get("tau_max", 1.0)
        reports.append(cert.capped_trigger_report(
            eps if eps is not None else 0.3, M, omega, 1.0, tau_max,
            m_source=f"growth_envelope_constant(N={system.truncation_order})"))
        reports.append(cert.lyapunov_trigger_certificate(
            system, eps=eps, M=M, omega=omega))
        if eps is not None:
            reports.append(cert.inter_event_lower_bound(system, eps))
        h = cfg.etm.get("h", 0.4)
        _, rep_scan = cert.sampling_period_scan(system, [h])
        reports.append(rep_scan)
        reports.append(cert.periodic_trigger_certificate(
            system, h, cfg.etm.get("ell_max", 3), epsilon=eps))
    elif system.name == "beam":
        gamma = system.meta["gamma"]
        alpha = config.splitting_abscissa(cfg, system)
        dec = model.decompose(system, alpha)
        reports.append(cert.CertificateReport(
            "spectral-decomposition",
            cert.CERTIFIED if dec.assumptions_hold else cert.NOT_CERTIFIED,
            {"alpha": alpha},
            {"plus_indices": list(dec.plus_indices),
             "omega_minus": dec.omega_minus,
             "stable_minus": dec.stable_minus,
             "controllable_plus": dec.controllable_plus},
            notes="finite split of a diagonal truncation"))
        idx = list(dec.plus_indices)
        gamma_plus = 7.0 * gamma * math.pi ** 2 / 4.0
        A_plus = system.A_mat[np.ix_(idx, idx)]
        B_plus = system.B_mat[idx, :]
        F_plus = system.F_mat[:, idx]
        eps_use = eps if eps is not None else 0.70
        witness = cert.lmi_search(A_plus, B_plus, F_plus, gamma_plus, eps_use)
        eps_max = cert.lmi_max_eps(A_plus, B_plus, F_plus, gamma_plus)
        reports.append(cert.CertificateReport(
            "plus-part-lmi",
            cert.CERTIFIED if witness is not None else cert.NOT_CERTIFIED,
            {"gamma_plus": gamma_plus, "epsilon": eps_use},
            {"eps_max": _sig(eps_max),
             "method": "" if witness is None else witness.method},
            notes="threshold bound of the plus-part triggering LMIs"))
        margin = cert.decomposed_margin(gamma_plus, dec.omega_minus)
        reports.append(cert.CertificateReport(
            "decomposed-margin", cert.CERTIFIED,
            {"gamma_plus": gamma_plus, "omega_minus": dec.omega_minus},
            {"margin": margin}))
        h = cfg.etm.get("h", 0.15)
        _, rep_scan = cert.sampling_period_scan(system, [h])
        reports.append(rep_scan)
        reports.append(cert.periodic_trigger_certificate(
            system, h, cfg.etm.get("ell_max", 3), epsilon=None))
    else:
        reports.append(cert.lyapunov_trigger_certificate(system, eps=eps))
        if eps is not None:
            reports.append(cert.inter_event_lower_bound(system, eps))
        reports.append(cert.semigroup_coercivity(system, 0.1))
    return reports


def cmd_certify(args):
    from . import config

    cfg = config.load_config(args.config)
    reports = _certificates_for(cfg)
    payload = [r.to_json_dict() for r in reports]
    _write_json(args.out, payload)
    bad = [r.name for r in reports if r.verdict == "NotCertified"]
    print(f"wrote {len(reports)} certificate reports to {args.out}"
          + (f"; NotCertified: {', '.join(bad)}" if bad else ""))
    if bad and args.strict:
        return 3
    return 0


# ---------------------------------------------------------------------------
# bundled studies

_FIG2_CFG = """\
system.preset = heat_cascade
system.n_modes = 20
etm.variant = sample_relative_capped
etm.epsilon = 0.3
etm.tau_max = 1
sim.t_end = 6
sim.dt_out = 0.01
initial.preset = paper-ic
"""

_FIG3_CFG = """\
system.preset = beam
system.n_modes = 15
etm.variant = plus_part_current_relative_capped
etm.epsilon = 0.7
etm.tau_max = 1
sim.t_end = 6
sim.dt_out = 0.01
initial.preset = paper-ic
"""


def _reproduce_fig1(outdir):
    from . import cert, model

    orders = list(range(2, 41))

    def point(N):
        return cert.growth_envelope_constant(model.build_heat_cascade(N), 0.5)

    values = _sweep_map(point, orders)
    lines = ["N,M_min"] + [f"{N},{v:.12g}" for N, v in zip(orders, values)]
    path = os.path.join(outdir, "fig1_growth_envelope.csv")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return [path]


def _comparison_study(outdir, tag, cfg_text, periodic_h):
    from . import config, sim

    cfg_event = config.parse_config(cfg_text)
    cfg_periodic = config.parse_config(cfg_text)
    cfg_periodic.etm = {"variant": "pure_periodic", "h": periodic_h}

    def leg(item):
        name, cfg = item
        system, spec, traj, log = _run_configured(cfg)
        sim.write_trajectory_csv(traj, os.path.join(outdir, f"{tag}_{name}_trajectory.csv"))
        sim.write_event_log_csv(log, os.path.join(outdir, f"{tag}_{name}_events.csv"))
        return name, _metrics(system, traj, log)

    results = dict(_sweep_map(leg, [("event", cfg_event), ("periodic", cfg_periodic)]))
    metrics = {
        "T_s_event": results["event"]["T_s"],
        "T_s_periodic": results["periodic"]["T_s"],
        "updates_event": results["event"]["updates"],
        "updates_periodic": results["periodic"]["updates"],
        "min_inter_event_event": results["event"].get("min_inter_event"),
    }
    path = os.path.join(outdir, f"{tag}_metrics.json")
    _write_json(path, metrics)
    files = [path] + [os.path.join(outdir, f"{tag}_{n}_{kind}.csv")
                      for n in ("event", "periodic")
                      for kind in ("trajectory", "events")]
    return files


def _reproduce_zeno_shift(outdir):
    import numpy as np

    from . import model

    files = []
    for variant in ("sample_relative", "current_relative"):
        times = model.shift_zeno_sequence(0.5, variant, 50)
        lines = ["k,t_k,inter_event,norm_x_tk"]
        for k, t in enumerate(times):
            gap = f"{times[k + 1] - t:.12g}" if k + 1 < len(times) else ""
            lines.append(f"{k},{t:.12g},{gap},{math.sqrt(1.0 - t):.12g}")
        path = os.path.join(outdir, f"zeno_shift_{variant}.csv")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
        files.append(path)
    return files


def _reproduce_zeno_heat(outdir):
    import numpy as np

    from . import model
    from .etm import ETMSpec, ETMVariant, next_event

    eps = 0.3
    system = model.build_heat_rod(6)
    spec = ETMSpec(ETMVariant.STATE_ERR_CURRENT_RELATIVE, epsilon=eps,
                   dt_scan=1e-4, allow_zeno=True)
    lines = ["n,predicted_t1,simulated_t1"]
    for n in range(1, 6):
        x0 = np.zeros(system.n_state, dtype=complex)
        x0[n] = 1.0
        predicted = math.log(1.0 + eps) / (n * math.pi) ** 2
        outcome = next_event(spec, system, x0, 0.0, 1.0)
        lines.append(f"{n},{predicted:.12g},{outcome.t_next:.12g}")
    path = os.path.join(outdir, "zeno_heat_rod.csv")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return [path]


def _reproduce_certs(outdir):
    from . import config

    files = []
    for tag, cfg_text in (("heat_cascade", _FIG2_CFG), ("beam", _FIG3_CFG)):
        cfg = config.parse_config(cfg_text)
        reports = _certificates_for(cfg)
        path = os.path.join(outdir, f"certificates_{tag}.json")
        _write_json(path, [r.to_json_dict() for r in reports])
        files.append(path)
    return files


_SCENARIOS = {
    "fig1": _reproduce_fig1,
    "fig2": lambda outdir: _comparison_study(outdir, "fig2", _FIG2_CFG, 0.4),
    "fig3": lambda outdir: _comparison_study(outdir, "fig3", _FIG3_CFG, 0.15),
    "zeno_shift": _reproduce_zeno_shift,
    "zeno_heat": _reproduce_zeno_heat,
    "certs": _reproduce_certs,
}


def cmd_reproduce(args):
    os.makedirs(args.outdir, exist_ok=True)
    files = _SCENARIOS[args.scenario](args.outdir)
    print("wrote:")
    for f in files:
        print(f"  {f}")
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="etcsim",
        description="event-triggered control simulator and certificate engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run one configured closed loop")
    p_sim.add_argument("--config", required=True)
    p_sim.add_argument("--outdir", required=True)
    p_sim.set_defaults(fn=cmd_simulate)

    p_cert = sub.add_parser("certify", help="compute certificate reports")
    p_cert.add_argument("--config", required=True)
    p_cert.add_argument("--out", required=True)
    p_cert.add_argument("--strict", action="store_true",
                        help="exit 3 when any certificate is NotCertified")
    p_cert.set_defaults(fn=cmd_certify)

    p_rep = sub.add_parser("reproduce", help="regenerate a bundled study")
    p_rep.add_argument("scenario", choices=sorted(_SCENARIOS))
    p_rep.add_argument("--outdir", required=True)
    p_rep.set_defaults(fn=cmd_reproduce)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except Exception as exc:
        from .errors import EtcsimError

        if isinstance(exc, EtcsimError):
            print(f"error: {exc}", file=_sys.stderr)
            return 2
        raise


if __name__ == "__main__":
    raise SystemExit(main())
