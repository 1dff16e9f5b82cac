"""
Command-line front end: ``vobal qfi``, ``vobal scan``, ``vobal optimal-plane`` and ``vobal crb-sim``.

Axial positions are read and written in units of z_R and informations in 1/z_R^2. ``--w0`` together with
``--wavelength`` fixes a physical geometry; physical values are then added to the output next to the
dimensionless ones.
"""
import argparse
import io
import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone

import numpy as np

from VoBAL import __version__
from VoBAL.beam import BeamGeometry
from VoBAL.CFI import QuadratureConfig, QuadratureConvergenceError, find_optimal_plane, scan_report
from VoBAL.QFI import printed_qfi, qfi_hl_printed, qfi_oracle, qfi_pure
from VoBAL.estimation import EstimationConfig, crb_study
from VoBAL.misc import StateSpecError, format_state_spec, parse_state_spec, sha256_bytes, sha256_file
from VoBAL.oscillator import CutoffTooSmallError, FockState, HLIndex, hl_expand

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 2, 3
DEFAULT_GEOMETRY = BeamGeometry(w0=1.0, k=2.0)


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    """Everything needed to regenerate one output."""
    command: str
    parameters: dict
    version: str = __version__
    seed: object = None
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    checksums: dict = field(default_factory=dict)


def _clean(obj):
    """JSON-ready copy with NaN and infinities as null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if np.isfinite(obj) else None
    return obj


def dumps_json(obj):
    return json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _emit(text, out):
    if out is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return {"<stdout>": sha256_bytes(text.encode("utf-8"))}
    with open(out, "wb") as f:
        f.write(text.encode("utf-8"))
    logger.info("Wrote %s", out)
    return {out: sha256_file(out)}


def _geometry(args):
    if args.w0 is None and args.wavelength is None:
        return DEFAULT_GEOMETRY, False
    if args.w0 is None or args.wavelength is None:
        raise UsageError("--w0 and --wavelength must be given together")
    try:
        return BeamGeometry.from_wavelength(args.w0, args.wavelength), True
    except ValueError as e:
        raise UsageError(str(e)) from e


def _quadrature(args):
    try:
        return QuadratureConfig(n_radial=args.quad_radial, n_azimuthal=args.quad_azimuthal,
                                refine_tolerance=args.tol)
    except ValueError as e:
        raise UsageError(str(e)) from e


def _state(args):
    if args.mode is not None:
        state = parse_state_spec(args.mode)
        if not state.is_pure:
            raise UsageError(f"--mode takes a single mode, got {args.mode!r}; use --superpose")
        return state
    return parse_state_spec(args.superpose)


def cmd_qfi(args):
    if args.hl_theta is not None or args.hl_phi is not None:
        state = _state(args)
        if not state.is_pure:
            raise UsageError("--hl-theta needs a single mode; its occupations (n+, n-) label the sphere mode")
        fock = FockState.from_lg(state.indices[0])
        theta = 0.0 if args.hl_theta is None else args.hl_theta
        idx = HLIndex(fock.n_plus, fock.n_minus, theta, 0.0 if args.hl_phi is None else args.hl_phi)
        oracle = qfi_oracle(hl_expand(idx)).value
        printed = qfi_hl_printed(idx).value
        report = {"state": format_state_spec(state), "n1": idx.n1, "n2": idx.n2, "theta": idx.theta,
                  "phi": idx.phi_s, "oracle": oracle, "printed": printed, "ratio": printed / oracle}
    else:
        state = _state(args)
        oracle = qfi_oracle(state).value
        printed = printed_qfi(state)
        report = {"state": format_state_spec(state), "oracle": oracle,
                  "printed": None if printed is None else printed.value,
                  "printed_source": None if printed is None else printed.source.value,
                  "ratio": None if printed is None else printed.value / oracle}
        if state.is_pure:
            report["pure"] = qfi_pure(state.indices[0]).value
    geom, physical = _geometry(args)
    if physical:
        report["z_R"] = geom.z_R
        report["oracle_physical"] = report["oracle"] / geom.z_R ** 2
    return dumps_json(report)


def cmd_scan(args):
    if args.resolution < 1:
        raise UsageError(f"--resolution must be at least 1, got {args.resolution}")
    if not args.z_min <= args.z_max:
        raise UsageError(f"Empty z range ({args.z_min}, {args.z_max})")
    state = _state(args)
    geom, physical = _geometry(args)
    cfg = _quadrature(args)
    z_grid = np.linspace(args.z_min, args.z_max, args.resolution) * geom.z_R
    report = scan_report(state, geom, z_grid, cfg, n_jobs=args.jobs, progress=not args.quiet)
    if len(report) and not report.converged.any():
        finest = 2 ** cfg.max_refinements
        last = (report.f_total[-1], report.f_radial[-1], report.f_azimuthal[-1])
        raise QuadratureConvergenceError(np.nan, last, (cfg.n_radial * finest, cfg.n_azimuthal * finest))
    df = report.to_dataframe()
    if physical:
        df["z"] = df["z_over_zR"] * geom.z_R
        df["f_total_physical"] = df["f_total"] / geom.z_R ** 2
    buffer = io.StringIO()
    df.to_csv(buffer, index=False, float_format="%.17g", lineterminator="\n")
    return buffer.getvalue()


def cmd_optimal_plane(args):
    state = _state(args)
    geom, physical = _geometry(args)
    cfg = _quadrature(args)
    z_range = (args.z_min * geom.z_R, args.z_max * geom.z_R)
    try:
        z_opt, f_max = find_optimal_plane(state, geom, z_range, cfg, n_coarse=args.n_coarse, n_jobs=args.jobs,
                                          progress=not args.quiet)
    except ValueError as e:
        raise UsageError(str(e)) from e
    q = qfi_oracle(state).value
    printed = printed_qfi(state)
    report = {"z_opt": z_opt / geom.z_R, "f_max": f_max, "q": q, "ratio": f_max / q,
              "q_printed": None if printed is None else printed.value,
              "ratio_printed": None if printed is None else f_max / printed.value}
    if physical:
        report["z_R"] = geom.z_R
        report["z_opt_physical"] = z_opt
    return dumps_json(report)


def cmd_crb_sim(args):
    state = _state(args)
    geom, physical = _geometry(args)
    try:
        cfg = EstimationConfig(n_photons=args.photons, n_trials=args.trials, z_true=args.z_true,
                               search_range=(args.z_min, args.z_max), seed=args.seed, n_coarse=args.n_coarse,
                               n_jobs=args.jobs)
    except ValueError as e:
        raise UsageError(str(e)) from e
    run = crb_study(cfg, state, geom, _quadrature(args), progress=not args.quiet)
    report = run.to_dict(include_estimates=args.estimates)
    report["state"] = format_state_spec(state)
    if physical:
        report["z_R"] = geom.z_R
    return dumps_json(report)


def _add_common(parser):
    state = parser.add_mutually_exclusive_group(required=True)
    state.add_argument("--mode", default=None, help="A single LG mode, e.g. p0l2")
    state.add_argument("--superpose", default=None, help="Comma-separated terms, e.g. p0l2,p0l0 or p0l1*1,p0l-1*0+1i")
    parser.add_argument("--out", default=None, help="Output file (default: standard output)")
    parser.add_argument("--manifest", default=None, help="Write a run manifest to this JSON file")
    parser.add_argument("--seed", type=int, default=0, help="Master random seed")
    parser.add_argument("--quad-radial", type=int, default=256, help="Initial radial quadrature nodes")
    parser.add_argument("--quad-azimuthal", type=int, default=256, help="Initial azimuthal quadrature nodes")
    parser.add_argument("--tol", type=float, default=1e-6, help="Relative quadrature tolerance")
    parser.add_argument("--w0", type=float, default=None, help="Waist radius, for physical output")
    parser.add_argument("--wavelength", type=float, default=None, help="Wavelength, same units as --w0")
    parser.add_argument("--jobs", type=int, default=1, help="Parallel workers")
    parser.add_argument("--quiet", action="store_true", help="Hide progress bars")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")


def build_parser():
    parser = argparse.ArgumentParser(prog="vobal", description="Axial localisation with vortex beams",
                                     formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    qfi = sub.add_parser("qfi", help="Quantum Fisher information of a state",
                         formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    _add_common(qfi)
    qfi.add_argument("--hl-theta", type=float, default=None, help="Rotate the mode onto the Hermite-Laguerre sphere")
    qfi.add_argument("--hl-phi", type=float, default=None, help="Sphere azimuth")
    qfi.set_defaults(handler=cmd_qfi)

    scan = sub.add_parser("scan", help="Classical Fisher information over detection planes (CSV)",
                          formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    _add_common(scan)
    scan.add_argument("--z-min", type=float, default=0.0, help="First plane, z_R units")
    scan.add_argument("--z-max", type=float, default=3.0, help="Last plane, z_R units")
    scan.add_argument("--resolution", type=int, default=61, help="Number of planes")
    scan.set_defaults(handler=cmd_scan)

    plane = sub.add_parser("optimal-plane", help="Best detection plane (JSON)",
                           formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    _add_common(plane)
    plane.add_argument("--z-min", type=float, default=0.02, help="Lower end of the search, z_R units")
    plane.add_argument("--z-max", type=float, default=5.0, help="Upper end of the search, z_R units")
    plane.add_argument("--n-coarse", type=int, default=64, help="Planes in the bracketing scan")
    plane.set_defaults(handler=cmd_optimal_plane)

    crb = sub.add_parser("crb-sim", help="Monte Carlo maximum-likelihood study (JSON)",
                         formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    _add_common(crb)
    crb.add_argument("--photons", type=float, default=1e4, help="Expected photons per frame")
    crb.add_argument("--trials", type=int, default=500, help="Number of frames")
    crb.add_argument("--z-true", type=float, default=1.0, help="True plane, z_R units")
    crb.add_argument("--z-min", type=float, default=0.0, help="Lower end of the search, z_R units")
    crb.add_argument("--z-max", type=float, default=4.0, help="Upper end of the search, z_R units")
    crb.add_argument("--n-coarse", type=int, default=64, help="Likelihood evaluations in the bracketing scan")
    crb.add_argument("--estimates", action="store_true", help="Include every trial estimate")
    crb.set_defaults(handler=cmd_crb_sim)
    return parser


def main(argv=None):
    """
    Run the command line.

    :param list(str) argv: Arguments, without the program name; defaults to ``sys.argv[1:]``.
    :return: Exit code, 0 on success, 2 for usage and parse errors, 3 for numerical failures.
    :rtype: int
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (None, 0) else EXIT_USAGE

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(asctime)s - %(levelname)s - %(message)s", stream=sys.stderr)
    logging.captureWarnings(True)
    try:
        text = args.handler(args)
    except StateSpecError as e:
        print(f"vobal {args.command}: invalid state: {e}", file=sys.stderr)
        return EXIT_USAGE
    except UsageError as e:
        print(f"vobal {args.command}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (QuadratureConvergenceError, CutoffTooSmallError, FloatingPointError) as e:
        print(f"vobal {args.command}: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    checksums = _emit(text, args.out)

    if args.manifest is not None:
        parameters = {k: v for k, v in vars(args).items() if k not in ("handler", "manifest")}
        manifest = RunManifest(command=args.command, parameters=parameters, seed=args.seed, checksums=checksums)
        with open(args.manifest, "w", encoding="utf-8", newline="\n") as f:
            f.write(dumps_json(asdict(manifest)))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
