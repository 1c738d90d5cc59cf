"""Command-line entry point: figure-ready CSV/JSON for heatmaps, scaling, Bayesian runs and tables.

Exit codes: 0 success, 1 invalid configuration, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import io
import json
import sys
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from pathlib import Path

import numpy as np

from . import fisher
from .exceptions import NumericalError, QecSenseError, SingularMatrixError
from .field import MagneticField
from .protocol import Protocol, ProbeSpec, outcome_model, syndrome_distribution, pec_state_ancilla_free
from .validation import check_positive_int, check_time

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2
_FMT = "{:.12g}"


def fmt(x) -> str:
    """12 significant digits; None and non-finite values become empty fields."""
    if x is None or not np.isfinite(x):
        return ""
    return _FMT.format(float(x))


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# range parsing


def parse_range(spec: str) -> list[Decimal]:
    """'start:stop:step', start inclusive and stop exclusive, in exact decimal arithmetic."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise ConfigError(f"range must look like start:stop:step, got {spec!r}")
    try:
        start, stop, step = (Decimal(p.strip()) for p in parts)
    except InvalidOperation:
        raise ConfigError(f"range has a non-numeric part: {spec!r}") from None
    if step <= 0:
        raise ConfigError(f"range step must be positive, got {step}")
    values = []
    v = start
    while v < stop:
        values.append(v)
        v = start + step * len(values)
    if not values:
        raise ConfigError(f"range {spec!r} is empty")
    return values


def parse_grid(spec: str) -> tuple[np.ndarray, np.ndarray]:
    """One range for both axes, or 'bx_range,bz_range'."""
    pieces = spec.split(",")
    if len(pieces) == 1:
        pieces = pieces * 2
    if len(pieces) != 2:
        raise ConfigError(f"grid must be one range or two comma-separated ranges, got {spec!r}")
    return tuple(np.array([float(v) for v in parse_range(p)]) for p in pieces)


def parse_n_range(spec: str) -> list[int]:
    values = parse_range(spec)
    if any(v != v.to_integral_value() for v in values):
        raise ConfigError(f"N-range must contain integers, got {spec!r}")
    return [check_positive_int(int(v), "N") for v in values]


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class RunConfig:
    command: str
    protocol: Protocol
    n: int | None
    n_range: list | None
    bx: float
    bz: float
    by: float | None
    grid: tuple | None
    t: float
    shots: int
    reps: int
    seed: int
    out: Path | None
    fmt: str

    @property
    def field(self) -> MagneticField:
        return MagneticField(self.bx, self.bz, self.by)

    @classmethod
    def from_args(cls, args) -> "RunConfig":
        protocol = Protocol(args.protocol)
        by = getattr(args, "by", None)
        if protocol is Protocol.THREE_D and by is None:
            by = 0.0
        if by is not None and protocol is not Protocol.THREE_D:
            raise ConfigError("--by is only meaningful with --protocol 3d")
        n_range = parse_n_range(args.n_range) if getattr(args, "n_range", None) else None
        grid = parse_grid(args.grid) if getattr(args, "grid", None) else None
        n = getattr(args, "n", None)
        if n is not None:
            n = check_positive_int(n, "n")
        reps = getattr(args, "reps", 1)
        if reps is not None and reps < 1:
            raise ConfigError(f"--reps must be >= 1, got {reps}")
        shots = getattr(args, "shots", 1)
        if shots is not None and shots < 1:
            raise ConfigError(f"--shots must be >= 1, got {shots}")
        if args.format not in ("csv", "json"):
            raise ConfigError(f"--format must be csv or json, got {args.format}")
        return cls(
            command=args.command,
            protocol=protocol,
            n=n,
            n_range=n_range,
            bx=float(args.bx),
            bz=float(args.bz),
            by=by,
            grid=grid,
            t=check_time(args.t),
            shots=shots,
            reps=reps,
            seed=getattr(args, "seed", 0),
            out=Path(args.out) if args.out else None,
            fmt=args.format,
        )


# ---------------------------------------------------------------------------
# output helpers


def _write(text: str, out: Path | None):
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def _csv(header, rows, footer: dict | None = None) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(row) + "\n")
    if footer is not None:
        buf.write("# " + json.dumps(footer, sort_keys=True) + "\n")
    return buf.getvalue()


def _json_value(x):
    if isinstance(x, (float, np.floating)):
        return float(fmt(x)) if np.isfinite(x) else None
    return x


# ---------------------------------------------------------------------------
# precision helpers shared by heatmap and scaling


def _field_for(config: RunConfig, bx: float, bz: float) -> MagneticField:
    return MagneticField(bx, bz, config.by)


def _cfim(config: RunConfig, n: int, field: MagneticField) -> np.ndarray:
    probes = config.protocol.probes(n)
    if config.protocol is Protocol.THREE_D:
        return fisher.cfim_joint_numeric(probes[0], field, config.t)
    return fisher.cfim_total(probes, field, config.t)


def _qfim(config: RunConfig, n: int, field: MagneticField):
    p = config.protocol
    if p is Protocol.THREE_D:
        return None
    basis = {Protocol.SINGLE_X: "X", Protocol.DUAL: "dual"}.get(p, "Z")
    return fisher.qfim(basis, n, field, config.t, ancilla=p is not Protocol.ANCILLA_FREE_Z)


def _known_components(field: MagneticField):
    """Indices of non-zero components; zero ones are treated as known when the full matrix is singular."""
    values = field.as_array()
    return [i for i, v in enumerate(values) if v != 0.0]


def _trace_inverse(m, field: MagneticField, allow_reduced: bool):
    try:
        return fisher.trace_inverse(m), False
    except SingularMatrixError:
        keep = _known_components(field)
        if not allow_reduced or len(keep) == field.dim:
            raise
        return fisher.reduced_trace_inverse(m, keep), True


# ---------------------------------------------------------------------------
# commands


def cmd_heatmap(config: RunConfig) -> int:
    if config.grid is None:
        raise ConfigError("heatmap needs --grid")
    if config.n is None:
        raise ConfigError("heatmap needs --n")
    bxs, bzs = config.grid
    if np.any(bxs == 0.0) and np.any(bzs == 0.0) and (config.by in (None, 0.0)):
        raise ConfigError("field grid includes the zero field bx = bz = 0")
    rows, records = [], []
    for bx in bxs:
        for bz in bzs:
            field = _field_for(config, bx, bz)
            try:
                value = fisher.trace_inverse(_cfim(config, config.n, field))
            except NumericalError:
                value = None
            rows.append([fmt(bx), fmt(bz), fmt(value)])
            records.append({"bx": _json_value(bx), "bz": _json_value(bz), "trace_inverse": _json_value(value)})
    if config.fmt == "json":
        _write(json.dumps({"protocol": config.protocol.value, "n": config.n, "t": config.t, "points": records}) + "\n", config.out)
    else:
        _write(_csv(["bx", "bz", "trace_inverse"], rows), config.out)
    return EXIT_OK


def cmd_scaling(config: RunConfig) -> int:
    if config.n_range is None or len(config.n_range) < 3:
        raise ConfigError("scaling needs --n-range with at least 3 values")
    field = config.field
    cf_points, q_points, rows, records = [], [], [], []
    reduced_any = False
    for n in config.n_range:
        tr_f, reduced = _trace_inverse(_cfim(config, n, field), field, allow_reduced=True)
        reduced_any |= reduced
        q = _qfim(config, n, field)
        if q is None:
            tr_q = None
        elif reduced:
            # bound on the same parameter subset as the classical column
            tr_q = fisher.reduced_trace_inverse(q, _known_components(field))
        else:
            tr_q = fisher.trace_inverse(q)
        cf_points.append(fisher.PrecisionPoint(n, field, config.t, tr_f))
        if tr_q is not None:
            q_points.append(fisher.PrecisionPoint(n, field, config.t, tr_q))
        rows.append([str(n), fmt(tr_f), fmt(tr_q)])
        records.append({"n": n, "trace_inverse": _json_value(tr_f), "trace_inverse_qfim": _json_value(tr_q)})
    beta_f = fisher.scaling_exponent(cf_points)[0]
    beta_q = fisher.scaling_exponent(q_points)[0] if len(q_points) >= 3 else None
    footer = {
        "protocol": config.protocol.value,
        "beta_cfim": _json_value(beta_f),
        "beta_qfim": _json_value(beta_q),
        "reduced_to_nonzero_components": reduced_any,
    }
    if config.fmt == "json":
        _write(json.dumps({**footer, "rows": records}) + "\n", config.out)
    else:
        _write(_csv(["n", "trace_inverse", "trace_inverse_qfim"], rows, footer), config.out)
    return EXIT_OK


def cmd_bayes(config: RunConfig, args) -> int:
    from .bayes import run_estimation

    if config.protocol not in (Protocol.SINGLE_Z, Protocol.SINGLE_X, Protocol.DUAL):
        raise ConfigError("bayes supports single-z, single-x and dual")
    if config.n is None:
        raise ConfigError("bayes needs --n")
    box = tuple(args.prior_box)
    probes = config.protocol.probes(config.n)
    result = run_estimation(probes, config.field, config.t, config.shots, config.reps, config.seed,
                            box=box, cells=args.cells, beff_points=args.beff_points, band=args.band)
    summary = {k: v for k, v in result.to_dict().items()}
    summary.update(protocol=config.protocol.value, n=config.n, truth=[config.bx, config.bz], seed=config.seed)
    rows = [
        [str(i), fmt(e[0]), fmt(e[1]), str(int(f))]
        for i, (e, f) in enumerate(zip(result.estimates, result.flagged))
    ]
    if config.fmt == "json":
        summary["estimates"] = [[_json_value(x) for x in e] for e in result.estimates]
        summary["flagged"] = result.flagged.tolist()
        _write(json.dumps(summary) + "\n", config.out)
    else:
        _write(_csv(["rep", "bx_est", "bz_est", "flagged"], rows, summary), config.out)
        if config.out is not None:
            config.out.with_suffix(".summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return EXIT_OK


def cmd_table(args) -> int:
    from .oracle import format_table

    n = check_positive_int(args.n, "n", minimum=2)
    if n > 12:
        raise ConfigError(f"table supports at most 12 physical qubits, got {n}")
    text = format_table(n, args.basis) + "\n"
    _write(text, Path(args.out) if args.out else None)
    return EXIT_OK


def _oracle_residuals(n_max_total: int = 8):
    from .oracle import oracle_qfim, simulate_protocol

    fields = [MagneticField(0.3, 0.4), MagneticField(1.1, -0.7), MagneticField(0.2, 0.9)]
    prob_res = state_res = qfim_res = 0.0
    for n in range(1, n_max_total):
        variants = [ProbeSpec(n, "Z"), ProbeSpec(n, "X"), ProbeSpec(n, "Z", dimensionality="3d")]
        if n >= 2:
            variants.append(ProbeSpec(n, "Z", ancilla_assisted=False))
        for probe in variants:
            for f in fields:
                if probe.is_3d:
                    f = MagneticField(f.bx, f.bz, by=0.25)
                sim = simulate_protocol(probe, f, 1.0)
                _, p = syndrome_distribution(probe, f, 1.0)
                prob_res = max(prob_res, float(np.max(np.abs([c.probability for c in sim] - p))))
                model = outcome_model(probe, f, 1.0)
                for c in sim:
                    if c.probability < 1e-14:
                        continue
                    if probe.ancilla_assisted:
                        expected = np.array([1.0, np.exp(1j * model.phi[c.k])]) / np.sqrt(2)
                    else:
                        expected = np.array(pec_state_ancilla_free(probe, f, 1.0, c.k))
                        expected = expected / np.linalg.norm(expected)
                        expected = expected * np.exp(-1j * np.angle(expected[0]))
                    state_res = max(state_res, float(np.max(np.abs(c.amplitudes - expected))))
        for basis in ("Z", "X"):
            f = fields[0]
            q_a, q_o = fisher.qfim(basis, n, f, 1.0), oracle_qfim(basis, n, f, 1.0)
            qfim_res = max(qfim_res, float(np.max(np.abs(q_a - q_o)) / np.max(np.abs(q_a))))
    return {"probabilities": prob_res, "states": state_res, "qfim_relative": qfim_res}


def cmd_oracle_check(args) -> int:
    res = _oracle_residuals()
    for name, value in res.items():
        print(f"{name:<16} {fmt(value)}")
    ok = res["probabilities"] < 1e-10 and res["states"] < 1e-10 and res["qfim_relative"] < 1e-5
    return EXIT_OK if ok else EXIT_NUMERICAL


# ---------------------------------------------------------------------------
# parser


def _common(p: argparse.ArgumentParser, protocol_default: str = "dual"):
    p.add_argument("--protocol", default=protocol_default, choices=[v.value for v in Protocol])
    p.add_argument("--bx", type=float, default=0.3)
    p.add_argument("--bz", type=float, default=0.4)
    p.add_argument("--by", type=float, default=None)
    p.add_argument("--t", type=float, default=1.0, help="evolution time")
    p.add_argument("--out", default=None, help="output path (stdout if omitted)")
    p.add_argument("--format", default="csv", choices=["csv", "json"])


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qecsense", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("heatmap", help="Tr[F^-1] over a (bx, bz) grid")
    _common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--grid", required=True, help="start:stop:step, or bx_range,bz_range")

    p = sub.add_parser("scaling", help="Tr[F^-1] and Tr[Q^-1] versus N with fitted exponents")
    _common(p)
    p.add_argument("--n-range", required=True, help="start:stop:step over N")

    p = sub.add_parser("bayes", help="repeated Bayesian estimation experiments")
    _common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--shots", type=int, default=4000)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--prior-box", type=float, nargs=4, default=[0.05, 1.0, 0.05, 1.0],
                   metavar=("BX_LO", "BX_HI", "BZ_LO", "BZ_HI"))
    p.add_argument("--cells", type=int, default=200)
    p.add_argument("--beff-points", type=int, default=2001)
    p.add_argument("--band", type=float, default=0.99)

    p = sub.add_parser("table", help="decoding lookup table for the bit-flip code")
    p.add_argument("--n", type=int, default=5, help="number of physical qubits")
    p.add_argument("--basis", default="Z", choices=["Z", "X"])
    p.add_argument("--out", default=None)

    sub.add_parser("oracle-check", help="statevector oracle vs closed forms, max residuals")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "table":
            return cmd_table(args)
        if args.command == "oracle-check":
            return cmd_oracle_check(args)
        config = RunConfig.from_args(args)
        if args.command == "heatmap":
            return cmd_heatmap(config)
        if args.command == "scaling":
            return cmd_scaling(config)
        return cmd_bayes(config, args)
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (QecSenseError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
