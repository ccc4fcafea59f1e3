"""Operator command-line tool.

Subcommands: ``sweep`` (analytic gate-width sweep to CSV), ``mc`` (in-process
Monte Carlo end-to-end session), ``serve``/``connect`` (the same session
split across two processes over TCP), ``calibrate`` (fit the unpublished
detector parameters to the anchor observables) and ``init-config`` (write a
commented default configuration).

Exit codes:
    0  success
    2  invalid configuration or arguments
    3  output write failure
    4  key confirmation failure
    5  configuration digest mismatch between peers
    6  link down / peer unreachable
    7  session aborted (error rate above threshold, insufficient sample, ...)
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, SystemConfig, default_config, format_config, parse_config_file
from .link import LinkDown, ProtocolError
from .rate_engine import CalibrationError, calibrate, sweep_gate_width
from .session import (
    DigestMismatch,
    SessionAborted,
    SessionResult,
    run_connector,
    run_in_process,
    run_listener,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_WRITE = 3
EXIT_CONFIRM = 4
EXIT_DIGEST = 5
EXIT_LINKDOWN = 6
EXIT_ABORT = 7

CSV_HEADER = "gate_width_ns,sifted_rate_bps,qber,secret_rate_bps"


def _parse_grid(text: str) -> list[float]:
    """'start:stop:step' in nanoseconds, stop inclusive."""
    try:
        start, stop, step = (float(part) for part in text.split(":"))
    except ValueError:
        raise ConfigError(f"grid must be 'start:stop:step' in ns, got {text!r}") from None
    if step <= 0 or stop < start:
        raise ConfigError(f"grid must be increasing with positive step, got {text!r}")
    n_points = int(round((stop - start) / step)) + 1
    grid = [start + i * step for i in range(n_points)]
    if grid[-1] > stop + 1e-12:
        grid.pop()
    return grid


def _parse_address(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise ConfigError(f"address must be HOST:PORT, got {text!r}")
    return host, int(port)


def _load_config(path: str) -> SystemConfig:
    return parse_config_file(path)


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _session_report(result: SessionResult, transport: str) -> str:
    lines = [
        f"role: {result.role}",
        f"transport: {transport}",
        f"rng: {result.rng_algorithm}  seed: {result.seed}",
        f"pulses: {result.n_pulses}",
        f"detections: {result.n_detections}",
    ]
    if result.detector_counts is not None:
        lines.append(
            "detector clicks (ppm0, ppm1, fsk0, fsk1): "
            + ", ".join(str(c) for c in result.detector_counts)
        )
    lines += [
        f"sifted bits: {result.n_sifted}",
        f"qber estimate: {result.qber_estimate:.6f}  (sample {result.sample_size})",
    ]
    if result.ground_truth_qber is not None:
        lines.append(f"ground-truth qber: {result.ground_truth_qber:.6f}")
    if result.n_corrected is not None:
        lines.append(f"corrected bits: {result.n_corrected}")
    lines += [
        f"reconciliation leakage budget: {result.ec_leakage_bits} bits",
        f"privacy amplification: {result.pa_input_len} -> {result.pa_output_len} bits",
        f"confirmed: {str(result.confirmed).lower()}",
    ]
    if result.confirmed and result.pa_output_len:
        lines.append(f"final key (hex): {result.final_key_hex}")
    return "\n".join(lines) + "\n"


def _cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    grid_ns = _parse_grid(args.grid)
    results = sweep_gate_width(cfg, [g * 1e-9 for g in grid_ns])
    rows = [CSV_HEADER]
    for g_ns, (_, report) in zip(grid_ns, results):
        rows.append(
            f"{g_ns:.9g},{report.sifted_rate:.9g},{report.qber:.9g},{report.secret_rate:.9g}"
        )
    text = "\n".join(rows) + "\n"
    try:
        _write_text(args.out, text)
    except OSError as exc:
        print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
        return EXIT_WRITE
    print(f"wrote {len(results)} sweep points to {args.out}")
    return EXIT_OK


def _finish_session(result: SessionResult, transport: str, out: str | None) -> int:
    report = _session_report(result, transport)
    print(report, end="")
    if out is not None:
        try:
            _write_text(out, report)
        except OSError as exc:
            print(f"error: cannot write {out}: {exc}", file=sys.stderr)
            return EXIT_WRITE
    return EXIT_OK if result.confirmed else EXIT_CONFIRM


def _cmd_mc(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    if args.pulses < 10_000:
        print("error: Monte Carlo sessions need at least 10000 pulses", file=sys.stderr)
        return EXIT_CONFIG
    run = run_in_process(cfg, n_pulses=args.pulses)
    code = _finish_session(run.bob, "in-process", args.out)
    if run.alice.confirmed != run.bob.confirmed or run.alice.final_key_hex != run.bob.final_key_hex:
        print("error: party results diverge", file=sys.stderr)
        return EXIT_CONFIRM
    return code


def _cmd_serve(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    result = run_listener(cfg, _parse_address(args.listen))
    return _finish_session(result, f"tcp listen {args.listen}", None)


def _cmd_connect(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    result = run_connector(cfg, _parse_address(args.peer))
    return _finish_session(result, f"tcp connect {args.peer}", None)


def _cmd_calibrate(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    result = calibrate(cfg)
    print(f"fitted detector efficiency: {result.efficiency:.6g}")
    print(f"fitted noise rate:          {result.noise_rate:.6g} counts/s")
    print(f"anchor residual:            {result.residual:.3e}")
    print(
        f"minimum sweep qber:         {result.min_qber:.4f} "
        f"at gate width {result.min_qber_gate * 1e9:.2f} ns"
    )
    print("apply with:")
    print(f"  detector.efficiency = {result.efficiency!r}")
    print(f"  detector.dark_rate = {result.noise_rate!r}")
    print("  detector.background_rate = 0.0")
    return EXIT_OK


def _cmd_init_config(args: argparse.Namespace) -> int:
    text = (
        "# system configuration (SI units: seconds, hertz, dB, counts/s)\n"
        + format_config(default_config())
    )
    try:
        _write_text(args.out, text)
    except OSError as exc:
        print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
        return EXIT_WRITE
    print(f"wrote default configuration to {args.out}")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tfqkd",
        description="Time-frequency QKD link simulator and key-distillation stack. "
        "Secret rates are intercept/resend estimates, not proven-secure rates.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="analytic gate-width sweep to CSV")
    p.add_argument("--config", required=True, help="configuration file")
    p.add_argument("--grid", required=True, help="gate-width grid 'start:stop:step' in ns")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("mc", help="Monte Carlo end-to-end session, both parties in-process")
    p.add_argument("--config", required=True)
    p.add_argument("--pulses", type=int, required=True, help="number of pulses (>= 10000)")
    p.add_argument("--out", default=None, help="also write the session report here")
    p.set_defaults(func=_cmd_mc)

    p = sub.add_parser("serve", help="run the receiver party, waiting for one peer")
    p.add_argument("--config", required=True)
    p.add_argument("--listen", required=True, metavar="HOST:PORT")
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("connect", help="run the transmitter party against a listening peer")
    p.add_argument("--config", required=True)
    p.add_argument("--peer", required=True, metavar="HOST:PORT")
    p.set_defaults(func=_cmd_connect)

    p = sub.add_parser("calibrate", help="fit detector efficiency and noise rate to the anchors")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("init-config", help="write a commented default configuration file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_init_config)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CalibrationError as exc:
        print(f"calibration failed: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DigestMismatch as exc:
        print(f"abort: {exc}", file=sys.stderr)
        return EXIT_DIGEST
    except SessionAborted as exc:
        print(f"abort: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except LinkDown as exc:
        print(f"link down: {exc}", file=sys.stderr)
        return EXIT_LINKDOWN
    except ProtocolError as exc:
        print(f"protocol error: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except FileNotFoundError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
