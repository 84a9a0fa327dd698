"""Command-line tools: analyze, synthesize, verify and the summary table.

Exit codes are a stable contract: 0 success, 2 certificate failure,
3 verification failure, 4 input error.  The operator tolerance defaults
to 1e-8 and can be overridden by the QSPACE_TOL environment variable; an
explicit --tol flag wins over both.  Every command is deterministic, so
there are no seed flags.
"""

import argparse
import dataclasses
import json
import os
import sys
import time

import numpy as np

from . import report as reporting
from .errors import (
    CertificateError,
    InputError,
    SynthesisError,
    VerificationError,
)
from .instruments import instrument_deviation
from .simulator import run
from .solver import build_chain, max_delay, verify_chain
from .stabilizer import (
    StabilizerCode,
    builtin_code,
    builtin_names,
    distillation_instrument,
    parse_code,
)
from .synthesis import circuit_from_json, circuit_to_json, synth_distillation

DEFAULT_TOL = 1e-8

# known-good live widths for the built-in codes; the table command fails
# loudly if analysis stops reproducing them
EXPECTED_WIDTH = {"five_one_three": 4, "steane": 4, "shor": 3}


@dataclasses.dataclass(frozen=True)
class AnalysisReport:
    """Result of the delay analysis on one code.

    levels holds one entry per chain level: the level index, its outcome
    count and projector rank, and the input qubit whose loading it delays.
    Serialization is canonical, so a report round-trips through JSON to the
    byte.
    """

    code_name: str
    n: int
    k: int
    t_star: int
    optimal_qubits: int
    ordering: tuple
    levels: tuple
    seconds: float

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True, indent=1)

    @staticmethod
    def from_json(text: str) -> "AnalysisReport":
        try:
            raw = json.loads(text)
            return AnalysisReport(
                code_name=raw["code_name"],
                n=raw["n"],
                k=raw["k"],
                t_star=raw["t_star"],
                optimal_qubits=raw["optimal_qubits"],
                ordering=tuple(raw["ordering"]),
                levels=tuple(raw["levels"]),
                seconds=raw["seconds"],
            )
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise InputError(
                f"analysis report JSON is malformed: {exc}"
            ) from exc


def analyze_code(code: StabilizerCode, code_name: str,
                 tol: float = DEFAULT_TOL) -> tuple:
    """Full analysis pipeline: deepest feasible delay, chain construction,
    certificate re-validation.  Returns (AnalysisReport, ChainCertificate)."""
    start = time.perf_counter()
    t_star, ordering = max_delay(code)
    cert = build_chain(code, ordering)
    if not verify_chain(code, cert, tol):
        raise CertificateError(
            f"chain certificate for {code_name} failed re-validation"
        )
    levels = []
    for t, povm in enumerate(cert.measurements, start=1):
        rank = int(round(float(np.trace(povm[povm.labels[0]]).real)))
        levels.append({
            "level": t,
            "outcomes": len(povm.labels),
            "rank": rank,
            "qubit": cert.ordering.qubits[t - 1],
        })
    seconds = round(time.perf_counter() - start, 6)
    report = AnalysisReport(
        code_name=code_name,
        n=code.n,
        k=code.k,
        t_star=t_star,
        optimal_qubits=code.n - t_star,
        ordering=tuple(ordering),
        levels=tuple(levels),
        seconds=seconds,
    )
    return report, cert


def _load_code(args) -> tuple:
    if args.code and args.builtin:
        raise InputError("give either --code FILE or --builtin NAME, not both")
    if args.builtin:
        return builtin_code(args.builtin), args.builtin
    if args.code:
        with open(args.code, encoding="utf-8") as fh:
            text = fh.read()
        name = os.path.splitext(os.path.basename(args.code))[0]
        return parse_code(text), name
    raise InputError(
        "one of --code FILE or --builtin NAME is required; "
        f"built-in names: {', '.join(builtin_names())}"
    )


def _level_csv_rows(report: AnalysisReport) -> list:
    return [
        [report.code_name, lv["level"], lv["outcomes"], lv["rank"],
         lv["qubit"]]
        for lv in report.levels
    ]


def cmd_analyze(args) -> int:
    code, name = _load_code(args)
    report, _ = analyze_code(code, name, args.tol)
    print(f"code {report.code_name}: [[{report.n},{report.k}]]")
    print(f"deepest feasible delay T* = {report.t_star}, "
          f"ordering {list(report.ordering)}")
    print(f"optimal live qubits = {report.optimal_qubits}")
    for lv in report.levels:
        print(f"  level {lv['level']}: {lv['outcomes']} outcomes of rank "
              f"{lv['rank']}, delays input qubit {lv['qubit']}")
    print(f"analysis took {report.seconds:.3f} s")
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(report.to_json())
        print(f"wrote report to {args.output}")
    if args.csv:
        reporting.write_csv(
            args.csv,
            ["code", "level", "outcomes", "rank", "qubit"],
            _level_csv_rows(report),
        )
        print(f"wrote level table to {args.csv}")
    if args.plot:
        reporting.render_chain_profile(args.plot, report)
        print(f"wrote chain profile to {args.plot}")
    return 0


def cmd_synthesize(args) -> int:
    code, name = _load_code(args)
    circuit, cert = synth_distillation(code, args.tol)
    with open(args.out_circuit, "w", encoding="utf-8") as fh:
        fh.write(circuit_to_json(circuit))
    print(f"code {name}: width-{circuit.m} circuit, {len(circuit.steps)} "
          f"steps, delayed inputs {cert.T} -> {args.out_circuit}")
    return 0


def cmd_verify(args) -> int:
    code, name = _load_code(args)
    with open(args.circuit, encoding="utf-8") as fh:
        circuit = circuit_from_json(fh.read())
    target = distillation_instrument(code)
    try:
        result = run(circuit, args.tol)
    except InputError:
        raise
    except ValueError as exc:
        print(f"verification failed for {name}: {exc}")
        return 3
    devs = instrument_deviation(result.instrument, target, args.tol)
    if devs is None:
        print(f"verification failed for {name}: realized and target "
              "instruments differ structurally (outcomes or dimensions)")
        return 3
    for label in sorted(devs):
        print(f"  outcome {label}: max deviation {devs[label]:.3e}")
    worst = max(devs.values(), default=0.0)
    if worst > args.tol:
        print(f"verification failed for {name}: worst deviation "
              f"{worst:.3e} > tol {args.tol:g}")
        return 3
    print(f"verification passed for {name}: worst deviation {worst:.3e} "
          f"<= tol {args.tol:g} (peak width {result.peak_width})")
    return 0


def cmd_table1(args) -> int:
    reports = []
    for name in EXPECTED_WIDTH:
        report, _ = analyze_code(builtin_code(name), name, args.tol)
        reports.append(report)
    mismatch = [
        r.code_name for r in reports
        if r.optimal_qubits != EXPECTED_WIDTH[r.code_name]
    ]
    if args.json:
        payload = [
            dict(dataclasses.asdict(r), expected=EXPECTED_WIDTH[r.code_name])
            for r in reports
        ]
        print(json.dumps(payload, sort_keys=True, indent=1))
    else:
        header = ("code", "[[n,k]]", "optimal", "expected", "seconds")
        print(f"{header[0]:<16}{header[1]:<10}{header[2]:<9}"
              f"{header[3]:<10}{header[4]:<8}")
        for r in reports:
            nk = f"[[{r.n},{r.k}]]"
            print(f"{r.code_name:<16}{nk:<10}"
                  f"{r.optimal_qubits:<9}{EXPECTED_WIDTH[r.code_name]:<10}"
                  f"{r.seconds:<8.3f}")
    if args.csv:
        reporting.write_csv(
            args.csv,
            ["code", "n", "k", "t_star", "optimal_qubits", "expected",
             "seconds"],
            [[r.code_name, r.n, r.k, r.t_star, r.optimal_qubits,
              EXPECTED_WIDTH[r.code_name], r.seconds] for r in reports],
        )
        print(f"wrote table to {args.csv}")
    if args.plot:
        reporting.render_width_chart(args.plot, reports, EXPECTED_WIDTH)
        print(f"wrote width chart to {args.plot}")
    if mismatch:
        print(f"optimal width mismatch for: {', '.join(mismatch)}",
              file=sys.stderr)
        return 2
    return 0


class _Parser(argparse.ArgumentParser):
    """Parser whose usage errors follow the exit-code contract (4, not 2)."""

    def error(self, message):
        raise InputError(message)


def _add_code_flags(sub):
    sub.add_argument("--code", metavar="FILE",
                     help="JSON file with n, k and generator strings")
    sub.add_argument("--builtin", metavar="NAME",
                     help=f"one of: {', '.join(builtin_names())}")


def _add_tol_flag(sub):
    sub.add_argument("--tol", type=float, default=None, metavar="EPS",
                     help="operator tolerance (default 1e-8, or QSPACE_TOL)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="qspace",
        description="Measurement-delay analysis and circuit synthesis "
                    "for stabilizer codes.",
    )
    subs = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = subs.add_parser("analyze",
                        help="find the deepest feasible delay and certify it")
    _add_code_flags(p)
    _add_tol_flag(p)
    p.add_argument("--output", metavar="FILE", help="write the report JSON")
    p.add_argument("--csv", metavar="FILE", help="write the level table")
    p.add_argument("--plot", metavar="FILE",
                   help="render the chain profile figure")
    p.set_defaults(func=cmd_analyze)

    p = subs.add_parser("synthesize",
                        help="emit the width-optimal circuit as JSON")
    _add_code_flags(p)
    _add_tol_flag(p)
    p.add_argument("--out-circuit", metavar="FILE", required=True,
                   help="destination for the circuit JSON")
    p.set_defaults(func=cmd_synthesize)

    p = subs.add_parser("verify",
                        help="simulate a circuit file against its code")
    _add_code_flags(p)
    _add_tol_flag(p)
    p.add_argument("--circuit", metavar="FILE", required=True,
                   help="circuit JSON to check")
    p.set_defaults(func=cmd_verify)

    p = subs.add_parser("table1",
                        help="optimal live widths for the built-in codes")
    _add_tol_flag(p)
    p.add_argument("--json", action="store_true",
                   help="emit the table as JSON instead of text")
    p.add_argument("--csv", metavar="FILE", help="write the table as CSV")
    p.add_argument("--plot", metavar="FILE", help="render the width chart")
    p.set_defaults(func=cmd_table1)
    return parser


def _resolve_tol(value) -> float:
    if value is not None:
        return value
    env = os.environ.get("QSPACE_TOL")
    if env is not None:
        try:
            return float(env)
        except ValueError:
            raise InputError(f"QSPACE_TOL is not a number: {env!r}")
    return DEFAULT_TOL


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "func", None):
            parser.print_help()
            return 4
        if hasattr(args, "tol"):
            args.tol = _resolve_tol(args.tol)
        return args.func(args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 4
    except (CertificateError, SynthesisError) as exc:
        print(f"certificate failure: {exc}", file=sys.stderr)
        return 2
    except VerificationError as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
