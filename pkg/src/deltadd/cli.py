"""Command-line entry point.

Subcommands: simulate, sweep, bound, suggest, adversarial, gen.  Every
subcommand is deterministic given its flags (including --seed).  The two
numerically critical parameters default to delta=0 and bits=53 and are
always echoed back so a run's configuration is never silent.

Exit codes: 0 ok, 2 usage or parse error, 3 numeric range error,
4 internal assertion.  DELTADD_WORKERS caps the sweep worker pool.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import analysis, quantum
from .mtbdd import NodeStore, DimensionError, OrderingError
from .numerics import PrecisionError, RangeError, MIN_BITS, MAX_BITS

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_RANGE = 3
EXIT_INTERNAL = 4


class _CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_USAGE):
        super().__init__(message)
        self.code = code


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _nonneg_float(text: str) -> float:
    value = float(text)
    if not value >= 0.0:
        raise argparse.ArgumentTypeError(f"expected a real >= 0, got {text}")
    return value


def _bits(text: str) -> int:
    value = int(text)
    if not MIN_BITS <= value <= MAX_BITS:
        raise argparse.ArgumentTypeError(
            f"bits must be in [{MIN_BITS}, {MAX_BITS}], got {text}"
        )
    return value


def _qubit_range(text: str) -> list[int]:
    """A..B or a single integer."""
    if ".." in text:
        lo_s, hi_s = text.split("..", 1)
        lo, hi = int(lo_s), int(hi_s)
        if hi < lo:
            raise argparse.ArgumentTypeError(f"empty range {text}")
        return list(range(lo, hi + 1))
    return [int(text)]


def _float_list(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok]


def _int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok]


def _family_list(text: str) -> list[str]:
    names = [tok.strip() for tok in text.split(",") if tok.strip()]
    for name in names:
        if name not in quantum.FAMILIES:
            raise argparse.ArgumentTypeError(
                f"unknown family {name!r}; know {sorted(quantum.FAMILIES)}"
            )
    return names


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deltadd",
        description="MTBDD quantum-circuit simulation and numerical error analysis",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a circuit file gate by gate")
    p.add_argument("--circuit", required=True, help="circuit file path")
    p.add_argument("--delta", type=_nonneg_float, default=None,
                   help="merge threshold (default 0)")
    p.add_argument("--bits", type=_bits, default=None,
                   help="significand bits (default 53)")
    p.add_argument("--reference", action="store_true",
                   help="also run the 128-bit delta=0 ground truth and report the max error")
    p.add_argument("--dump-state", metavar="PATH",
                   help="write the final state (dense text for n <= 16, DOT otherwise)")
    p.add_argument("--format", choices=["text", "json", "csv"], default="text")

    p = sub.add_parser("sweep", help="run the case-study grid and write records")
    p.add_argument("--families", type=_family_list, required=True,
                   help="comma list from: " + ",".join(sorted(quantum.FAMILIES)))
    p.add_argument("--qubits", type=_qubit_range, required=True, help="A..B or N")
    p.add_argument("--deltas", type=_float_list, required=True, help="comma list")
    p.add_argument("--bits", type=_int_list, required=True, help="comma list")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv", metavar="PATH", help="write CSV records here")
    p.add_argument("--json", metavar="PATH", help="write a JSON mirror here")
    p.add_argument("--workers", type=_positive_int, default=None,
                   help="worker processes (default: DELTADD_WORKERS or 1)")
    p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("bound", help="evaluate the worst-case error bound")
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--eps", type=_nonneg_float, required=True)
    p.add_argument("--delta", type=_nonneg_float, required=True)
    p.add_argument("--cM", type=_nonneg_float, default=None,
                   help="largest |M_ij| (with --cV: general bound)")
    p.add_argument("--cV", type=_nonneg_float, default=None)

    p = sub.add_parser("suggest", help="suggest a merge threshold for an error budget")
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--eps", type=_nonneg_float, required=True)
    p.add_argument("--allowed-error", type=_nonneg_float, required=True)

    p = sub.add_parser("adversarial", help="run the exponential-error instance")
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--delta", type=_nonneg_float, required=True)
    p.add_argument("--bits", type=_bits, required=True)

    p = sub.add_parser("gen", help="generate a benchmark circuit file")
    p.add_argument("--family", choices=sorted(quantum.FAMILIES), required=True)
    p.add_argument("--qubits", type=_positive_int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--h-as-ry", action="store_true",
                   help="dj only: emit closing Hadamards as Z;RY(pi/2)")
    p.add_argument("--out", metavar="PATH", help="output file (default stdout)")

    return parser


def _defaulted(args) -> tuple[float, int]:
    delta = 0.0 if args.delta is None else args.delta
    bits = 53 if args.bits is None else args.bits
    return delta, bits


def _cmd_simulate(args) -> int:
    try:
        with open(args.circuit) as fh:
            text = fh.read()
    except OSError as exc:
        raise _CliError(f"cannot read circuit: {exc}", EXIT_USAGE) from exc
    circuit = quantum.parse_circuit(text)
    delta, bits = _defaulted(args)

    if args.reference:
        report = analysis.compare_to_reference(circuit, delta, bits)
        payload = {
            "n": circuit.n, "gates": len(circuit.gates),
            "delta": delta, "bits": bits,
            "final_nodes": report.final_nodes, "peak_nodes": report.peak_nodes,
            "max_error": report.max_error, "worst_index": report.worst_index,
            "wall_ms": report.wall_ms,
        }
    else:
        store = NodeStore(bits, delta)
        state = quantum.simulate(store, circuit)
        payload = {
            "n": circuit.n, "gates": len(circuit.gates),
            "delta": delta, "bits": bits,
            "final_nodes": store.count_nodes(state.root),
            "peak_nodes": store.peak_nodes,
        }

    if args.dump_state:
        store = NodeStore(bits, delta)
        state = quantum.simulate(store, circuit)
        with open(args.dump_state, "w") as fh:
            if circuit.n <= 16:
                for i, amp in enumerate(store.to_dense(state.root, circuit.n)):
                    fh.write(f"{i} {amp.re} {amp.im}\n")
            else:
                fh.write(store.to_dot(state.root))
                fh.write("\n")

    _emit(payload, args.format)
    return EXIT_OK


def _cmd_sweep(args) -> int:
    progress = None
    if not args.quiet:
        progress = lambda fam, n: print(f"done {fam} n={n}", file=sys.stderr)
    records = analysis.sweep(
        args.families, args.qubits, args.deltas, args.bits,
        seed=args.seed, workers=args.workers, progress=progress,
    )
    if args.csv:
        analysis.write_csv(records, args.csv)
    if args.json:
        analysis.write_json(records, args.json)
    if not args.csv and not args.json:
        analysis.write_csv(records, "/dev/stdout")
    return EXIT_OK


def _cmd_bound(args) -> int:
    if (args.cM is None) != (args.cV is None):
        raise _CliError("--cM and --cV must be given together")
    if args.cM is not None:
        report = analysis.bound_general(args.n, args.eps, args.delta, args.cM, args.cV)
    else:
        report = analysis.bound_unit(args.n, args.eps, args.delta)
    print(f"n={report.n}  eps={report.eps:g}  delta={report.delta:g}  C<={report.c:g}")
    print(f"  (n+1)*eps*C   = {report.term_fp:.4g}")
    print(f"  delta*2^(n+1) = {report.term_merge:.4g}")
    print(f"  total (first order) = {report.total:.4g}")
    print(f"  higher order: O(eps^2) ~ {report.higher_order_fp:.3g}, "
          f"O(delta*eps*2^n) ~ {report.higher_order_merge:.3g}  [not added]")
    return EXIT_OK


def _cmd_suggest(args) -> int:
    delta = analysis.suggest_delta(args.n, args.eps, args.allowed_error)
    print(f"n={args.n}  eps={args.eps:g}  allowed error={args.allowed_error:g}")
    print(f"  delta < {delta:.4g}")
    if delta > 0:
        print(f"  suggested mantissa bits: b > log2(1/delta), i.e. b >= {analysis.suggest_bits(delta)}")
    return EXIT_OK


def _cmd_adversarial(args) -> int:
    report = analysis.adversarial_run(args.n, args.delta, args.bits)
    predicted = 0.9 * args.delta * 2.0 ** args.n
    print(f"n={args.n}  delta={args.delta:g}  bits={args.bits}")
    print(f"  |y_0 - 1| = {report.max_error:.6g}")
    print(f"  predicted delta'*2^n = {predicted:.6g}")
    print(f"  final_nodes={report.final_nodes}  peak_nodes={report.peak_nodes}")
    return EXIT_OK


def _cmd_gen(args) -> int:
    if args.h_as_ry and args.family != "dj":
        raise _CliError("--h-as-ry only applies to the dj family")
    if args.family == "dj":
        circuit = quantum.gen_dj(args.qubits, h_as_ry=args.h_as_ry)
    elif args.family == "qpeexact":
        circuit = quantum.gen_qpe_exact(args.qubits, args.seed)
    else:
        circuit = quantum.gen_wstate(args.qubits)
    text = quantum.emit_circuit(circuit)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _emit(payload: dict, fmt: str) -> None:
    if fmt == "json":
        print(json.dumps(payload, indent=2))
    elif fmt == "csv":
        keys = list(payload)
        print(",".join(keys))
        print(",".join(str(payload[k]) for k in keys))
    else:
        for key, value in payload.items():
            print(f"{key} = {value}")


_HANDLERS = {
    "simulate": _cmd_simulate,
    "sweep": _cmd_sweep,
    "bound": _cmd_bound,
    "suggest": _cmd_suggest,
    "adversarial": _cmd_adversarial,
    "gen": _cmd_gen,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except _CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except quantum.CircuitSyntaxError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RangeError, PrecisionError, analysis.AdversarialSeedError) as exc:
        print(f"numeric range error: {exc}", file=sys.stderr)
        return EXIT_RANGE
    except (ValueError, DimensionError, OrderingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AssertionError as exc:
        print(f"internal assertion: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
