"""Command-line workbench: config ingestion, dispatch, JSON/CSV artifacts.

Subcommands: spectrum | couplings | simulate-gate | calibrate | compile |
verify-cz.  Every command prints a one-line machine-readable JSON summary on
stdout and writes fixed-name artifacts into the output directory, so reruns
with the same config and seed are byte-identical.  Exit codes: 0 success,
1 numeric failure, 2 config error, 3 verification failure.  Set QPW_LOG to a
logging level name (DEBUG/INFO/...) for progress on stderr.
"""

import argparse
import csv
import json
import logging
import math
import os
import sys

import numpy as np

from . import __version__
from .calibration import calibrate, crowding_report
from .circuit import assemble_hamiltonian, coupler_frequency
from .compiler import (VERIFY_THRESHOLD, OptConfig, compile,
                       compose_simulated_cz, convention_scores,
                       schedule_for_composition, verify_appendix_decomposition)
from .config import load_config
from .errors import ConfigError, QpwError
from .operators import EntanglerPair, iswap_pair, qutrit_cz
from .pulses import propagate, to_computational_gate
from .swt import block_diagonalize, resonance_table

log = logging.getLogger("qpw")

PAIR_CHOICES = {"0110": EntanglerPair.ISWAP_0110,
                "1221": EntanglerPair.ISWAP_1221}
DEFAULT_SCHEDULE = ((EntanglerPair.ISWAP_0110, -2.0 * math.pi / 3.0),
                    (EntanglerPair.ISWAP_1221, +2.0 * math.pi / 3.0))


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON-serializable: {type(obj).__name__}")


def _write_json(path: str, doc: dict):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.12g}"
    return value


def _write_csv(path: str, header: tuple, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _apply_jobs(jobs):
    """Cap linear-algebra worker threads (the only internal parallelism)."""
    if jobs is None:
        return
    if jobs < 1:
        raise ConfigError("--jobs must be at least 1")
    try:
        import threadpoolctl
        threadpoolctl.threadpool_limits(limits=jobs)
    except ImportError:  # pragma: no cover - present in the supported env
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ[var] = str(jobs)
        log.warning("threadpoolctl unavailable; thread caps set via env only")


def _resolve(args):
    """Load the config and apply flag overrides; create the artifact dir."""
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "dt", None) is not None:
        if not (math.isfinite(args.dt) and args.dt > 0):
            raise ConfigError("--dt must be a positive number of picoseconds")
        cfg.numerics.dt = args.dt / 1000.0
    outdir = args.out if args.out else cfg.output_dir
    os.makedirs(outdir, exist_ok=True)
    return cfg, outdir


def _pair_label(pair_states: tuple) -> str:
    return "-".join(pair_states)


# --------------------------------------------------------------------------
# subcommands


def cmd_spectrum(cfg, outdir, args) -> dict:
    nm = cfg.numerics
    lab = assemble_hamiltonian(cfg.circuit, args.flux, nm.levels_per_mode,
                               nm.n_max)
    frame = block_diagonalize(lab, cutoff=nm.degeneracy_cutoff)
    bare = np.real(np.diag(lab.h0.entries))
    rows = [("".join(str(n) for n in label), bare[k],
             frame.dressed_energy(label))
            for k, label in enumerate(frame.labels)]
    spectrum_path = os.path.join(outdir, "spectrum.csv")
    _write_csv(spectrum_path, ("label", "bare_GHz", "dressed_GHz"), rows)

    table = resonance_table(cfg.circuit, args.flux, fd_step=nm.fd_step,
                            levels_per_mode=nm.levels_per_mode,
                            n_max=nm.n_max, cutoff=nm.degeneracy_cutoff)
    trans_rows = [(_pair_label(pc.pair), pc.resonance,
                   float(np.real(pc.j_value)), pc.j_flux_derivative,
                   int(pc.degenerate)) for pc in table]
    transitions_path = os.path.join(outdir, "transitions.csv")
    _write_csv(transitions_path,
               ("pair", "resonance_GHz", "J_GHz", "dJ_dPhi_GHz_per_rad",
                "degenerate"), trans_rows)
    return {"command": "spectrum", "flux_rad": args.flux,
            "circuit": cfg.circuit.to_json_dict(),
            "levels": int(nm.levels_per_mode ** 3),
            "transitions": {_pair_label(pc.pair): pc.resonance
                            for pc in table},
            "artifacts": {"spectrum_csv": spectrum_path,
                          "transitions_csv": transitions_path}}


def cmd_couplings(cfg, outdir, args) -> dict:
    nm = cfg.numerics
    if args.points < 1:
        raise ConfigError("--points must be at least 1")
    if not args.flux_min <= args.flux_max:
        raise ConfigError("--flux-min must not exceed --flux-max")
    fluxes = (np.linspace(args.flux_min, args.flux_max, args.points)
              if args.points > 1 else np.array([args.flux_min]))
    rows = []
    for flux in fluxes:
        log.info("couplings sweep: flux = %.4f rad", flux)
        table = {pc.pair: pc for pc in resonance_table(
            cfg.circuit, float(flux), fd_step=nm.fd_step,
            levels_per_mode=nm.levels_per_mode, n_max=nm.n_max,
            cutoff=nm.degeneracy_cutoff)}
        p01 = table[("01", "10")]
        p12 = table[("12", "21")]
        rows.append((float(flux),
                     coupler_frequency(cfg.circuit, float(flux), nm.n_max),
                     float(np.real(p01.j_value)), p01.j_flux_derivative,
                     float(np.real(p12.j_value)), p12.j_flux_derivative))
    path = os.path.join(outdir, "couplings.csv")
    _write_csv(path, ("flux_rad", "omega_c_GHz", "J_0110_GHz",
                      "dJ_0110_dPhi", "J_1221_GHz", "dJ_1221_dPhi"), rows)
    return {"command": "couplings", "points": int(args.points),
            "flux_min_rad": args.flux_min, "flux_max_rad": args.flux_max,
            "circuit": cfg.circuit.to_json_dict(),
            "artifacts": {"couplings_csv": path}}


def cmd_simulate_gate(cfg, outdir, args) -> dict:
    nm = cfg.numerics
    pulse = cfg.pulse
    target = None
    label = "identity"
    if args.pair is not None:
        pair = PAIR_CHOICES[args.pair]
        angle = args.angle_over_pi * math.pi
        target = iswap_pair(pair, angle, args.phase)
        label = f"iswap_{''.join(pair.state_labels)}({angle:+.6f})"
    u_lab = propagate(cfg.circuit, pulse, dt=nm.dt,
                      levels_per_mode=nm.levels_per_mode, n_max=nm.n_max,
                      validate=not args.no_validate)
    frame = block_diagonalize(
        assemble_hamiltonian(cfg.circuit, pulse.theta0, nm.levels_per_mode,
                             nm.n_max), cutoff=nm.degeneracy_cutoff)
    report = to_computational_gate(u_lab, frame, pulse.duration,
                                   target=target, target_label=label,
                                   pulse=pulse)
    report_path = os.path.join(outdir, "gate_report.json")
    _write_json(report_path, report.to_json_dict())
    tomo_rows = [(ri, cj, float(np.real(report.u9.entries[a, b])),
                  float(np.imag(report.u9.entries[a, b])))
                 for a, ri in enumerate(report.u9.labels)
                 for b, cj in enumerate(report.u9.labels)]
    tomo_path = os.path.join(outdir, "tomogram.csv")
    _write_csv(tomo_path, ("row", "col", "re", "im"), tomo_rows)
    return {"command": "simulate-gate", "target": label,
            "fidelity": report.fidelity, "leakage": report.leakage,
            "duration_ns": report.duration,
            "circuit": cfg.circuit.to_json_dict(),
            "artifacts": {"gate_report_json": report_path,
                          "tomogram_csv": tomo_path}}


def cmd_calibrate(cfg, outdir, args) -> dict:
    nm = cfg.numerics
    pair = PAIR_CHOICES[args.pair]
    angle = args.angle_over_pi * math.pi
    result = calibrate(cfg.circuit, (pair, angle), pulse_template=cfg.pulse,
                       window=args.window, dt=nm.dt,
                       levels_per_mode=nm.levels_per_mode, n_max=nm.n_max)
    cal_path = os.path.join(outdir, "calibration.json")
    _write_json(cal_path, result.to_json_dict())
    trace_path = os.path.join(outdir, "calibration_trace.csv")
    _write_csv(trace_path, ("duration_ns", "fidelity"), result.search_trace)
    flagged = crowding_report(cfg.circuit, result.pulse.omega,
                              result.pulse.theta0,
                              levels_per_mode=nm.levels_per_mode,
                              n_max=nm.n_max)
    spectators = [ft.to_json_dict() for ft in flagged
                  if ft.pair != pair.state_labels]
    return {"command": "calibrate",
            "target": result.report.target_label,
            "fidelity": result.report.fidelity,
            "leakage": result.report.leakage,
            "duration_ns": result.pulse.duration,
            "achieved_angle_rad": result.achieved_angle,
            "flagged_spectators": spectators,
            "circuit": cfg.circuit.to_json_dict(),
            "artifacts": {"calibration_json": cal_path,
                          "trace_csv": trace_path}}


def cmd_compile(cfg, outdir, args) -> dict:
    if args.layers < 1:
        raise ConfigError("--layers must be at least 1")
    schedule = [DEFAULT_SCHEDULE[k % len(DEFAULT_SCHEDULE)]
                for k in range(args.layers)]
    opt = OptConfig(restarts=args.restarts, seed=cfg.seed,
                    threshold=args.threshold)
    result = compile(qutrit_cz(), args.layers, schedule, opt,
                     target_label="qutrit_cz")
    path = os.path.join(outdir, "compilation.json")
    _write_json(path, result.to_json_dict())
    return {"command": "compile", "target": "qutrit_cz",
            "layers": int(args.layers), "final_cost": result.final_cost,
            "converged": result.converged,
            "restarts_used": result.restarts_used, "seed": cfg.seed,
            "circuit": cfg.circuit.to_json_dict(),
            "artifacts": {"compilation_json": path}}


def cmd_verify_cz(cfg, outdir, args) -> dict:
    fidelity, convention = verify_appendix_decomposition()
    doc = {"target": "qutrit_cz", "fidelity": fidelity,
           "threshold": VERIFY_THRESHOLD, "passed": True,
           "convention": convention.name, "scores": convention_scores()}
    summary = {"command": "verify-cz", "fidelity": fidelity,
               "passed": True, "convention": convention.name,
               "circuit": cfg.circuit.to_json_dict()}
    if args.simulate:
        nm = cfg.numerics
        reports = []
        for pair, angle in schedule_for_composition(convention):
            log.info("calibrating %s(%+.4f) for composition",
                     pair.name, angle)
            result = calibrate(cfg.circuit, (pair, angle),
                               pulse_template=cfg.pulse, dt=nm.dt,
                               levels_per_mode=nm.levels_per_mode,
                               n_max=nm.n_max)
            reports.append(result.report)
        composed = compose_simulated_cz(reports[0], reports[1])
        composed_path = os.path.join(outdir, "cz_simulated.json")
        _write_json(composed_path, composed.to_json_dict())
        doc["simulated"] = {"fidelity": composed.fidelity,
                            "leakage": composed.leakage,
                            "duration_ns": composed.duration,
                            "entanglers": [r.target_label for r in reports]}
        summary["simulated_fidelity"] = composed.fidelity
        summary["simulated_artifact"] = composed_path
    path = os.path.join(outdir, "verification.json")
    _write_json(path, doc)
    summary["artifacts"] = {"verification_json": path}
    return summary


# --------------------------------------------------------------------------
# parser / entry point


def _add_common(sub):
    sub.add_argument("--config", metavar="PATH",
                     help="JSON run configuration (default: built-in "
                          "reference circuit)")
    sub.add_argument("--out", metavar="DIR",
                     help="artifact directory (default: config output_dir)")
    sub.add_argument("--jobs", type=int, metavar="N",
                     help="cap linear-algebra worker threads")
    sub.add_argument("--seed", type=int, metavar="N",
                     help="override the config seed")
    sub.add_argument("--dt", type=float, metavar="PS",
                     help="time step in picoseconds (overrides numerics)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qpw",
        description="Parametric two-qutrit gate workbench for a "
                    "three-transmon circuit")
    parser.add_argument("--version", action="version",
                        version=f"qpw {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("spectrum",
                        help="dressed/bare level table and key transitions")
    _add_common(p)
    p.add_argument("--flux", type=float, default=0.0, metavar="RAD",
                   help="coupler flux offset in radians (default 0)")
    p.set_defaults(func=cmd_spectrum)

    p = subs.add_parser("couplings",
                        help="flux sweep of exchange couplings and "
                             "their flux derivatives")
    _add_common(p)
    p.add_argument("--flux-min", type=float, default=0.05 * math.pi,
                   metavar="RAD")
    p.add_argument("--flux-max", type=float, default=0.45 * math.pi,
                   metavar="RAD")
    p.add_argument("--points", type=int, default=50, metavar="N")
    p.set_defaults(func=cmd_couplings)

    p = subs.add_parser("simulate-gate",
                        help="propagate the configured pulse and extract "
                             "the computational gate")
    _add_common(p)
    p.add_argument("--pair", choices=sorted(PAIR_CHOICES), default=None,
                   help="exchange pair of the comparison target "
                        "(default: identity)")
    p.add_argument("--angle-over-pi", type=float, default=2.0 / 3.0,
                   metavar="X", help="target rotation angle / pi")
    p.add_argument("--phase", type=float, default=0.0, metavar="RAD",
                   help="target drive phase")
    p.add_argument("--no-validate", action="store_true",
                   help="skip the step-halving convergence check")
    p.set_defaults(func=cmd_simulate_gate)

    p = subs.add_parser("calibrate",
                        help="search the pulse duration for a target "
                             "exchange rotation")
    _add_common(p)
    p.add_argument("--pair", choices=sorted(PAIR_CHOICES), default="0110")
    p.add_argument("--angle-over-pi", type=float, default=2.0 / 3.0,
                   metavar="X", help="rotation angle / pi (default 2/3)")
    p.add_argument("--window", type=float, default=0.15, metavar="F",
                   help="duration search half-width as a fraction")
    p.set_defaults(func=cmd_calibrate)

    p = subs.add_parser("compile",
                        help="multi-start decomposition of qutrit CZ into "
                             "exchange rotations plus local layers")
    _add_common(p)
    p.add_argument("--layers", "-m", type=int, default=2, metavar="M")
    p.add_argument("--restarts", type=int, default=50, metavar="N")
    p.add_argument("--threshold", type=float, default=1e-6, metavar="C",
                   help="stop once a restart reaches this cost")
    p.set_defaults(func=cmd_compile)

    p = subs.add_parser("verify-cz",
                        help="check the published CZ decomposition against "
                             "the ideal gate")
    _add_common(p)
    p.add_argument("--simulate", action="store_true",
                   help="also calibrate both entanglers and compose the "
                        "simulated circuit (slow)")
    p.set_defaults(func=cmd_verify_cz)
    return parser


def _configure_logging():
    name = os.environ.get("QPW_LOG", "WARNING").upper()
    level = getattr(logging, name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        _apply_jobs(args.jobs)
        cfg, outdir = _resolve(args)
        summary = args.func(cfg, outdir, args)
    except QpwError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    print(json.dumps(summary, sort_keys=True, default=_json_default))
    return 0


if __name__ == "__main__":
    sys.exit(main())
