"""Error-bound evaluation, parameter suggestions, the adversarial instance,
ground-truth comparison, and experiment sweeps.

The worst-case componentwise bound for one MTBDD matrix-vector multiply is
``(n+1)*eps*C + delta*2**(n+1)`` plus higher-order terms ``O(eps^2)`` and
``O(delta*eps*2**n)``, with ``C = max_i sum_j |M_ij V_j|``; probabilistic
and quantum inputs give ``C <= 1``.  Ground truth for measured errors is the
same computation at 128 significand bits with ``delta = 0``; the reported
error is the largest componentwise deviation from it.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, asdict
from fractions import Fraction

import gmpy2

from .mtbdd import MatrixDD, NodeStore, VectorDD, multiply
from .numerics import Complex, REFERENCE_BITS, distance
from .quantum import Circuit, basis_state, gate_matrix, generate, simulate

_HI = gmpy2.context(precision=256, round=gmpy2.RoundToNearest)


class AdversarialSeedError(RuntimeError):
    """The seeded leaf failed to capture the products (delta too small for
    the precision's rounding grid, or an unexpected leaf interfered)."""


# -- bounds and parameter suggestions -------------------------------------------


@dataclass(frozen=True)
class BoundReport:
    """Evaluated first-order error bound for one matrix-vector multiply.

    ``total = term_fp + term_merge``; the higher-order magnitudes are
    reported separately and never added to the total.
    """

    n: int
    eps: float
    delta: float
    c: float
    term_fp: float
    term_merge: float
    total: float
    higher_order_fp: float
    higher_order_merge: float

    def suggested_delta(self, allowed_error: float) -> float:
        return suggest_delta(self.n, self.eps, allowed_error)

    def suggested_bits(self) -> int:
        return suggest_bits(self.delta)


def bound_general(n: int, eps: float, delta: float, c_m: float, c_v: float) -> BoundReport:
    """Bound with the generic envelope C = 2**n * c_M * c_V."""
    if c_m < 0 or c_v < 0:
        raise ValueError("element magnitudes must be nonnegative")
    return _bound(n, eps, delta, (2.0 ** n) * c_m * c_v)


def bound_unit(n: int, eps: float, delta: float) -> BoundReport:
    """Probabilistic/quantum case: C <= 1."""
    return _bound(n, eps, delta, 1.0)


def _bound(n: int, eps: float, delta: float, c: float) -> BoundReport:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if eps < 0 or delta < 0:
        raise ValueError("eps and delta must be nonnegative")
    term_fp = (n + 1) * eps * c
    term_merge = delta * 2.0 ** (n + 1)
    # Higher-order tails, evaluated exactly enough to be meaningful even
    # though they are far below double resolution relative to the heads.
    e = gmpy2.mpfr(eps, precision=256)
    one = gmpy2.mpfr(1, precision=256)
    growth = _HI.sub(
        _HI.exp(_HI.mul(gmpy2.mpfr(n + 1), _HI.log1p(e))), one
    )  # (1+eps)^(n+1) - 1
    ho_fp = float(_HI.mul(_HI.sub(growth, _HI.mul(gmpy2.mpfr(n + 1), e)), gmpy2.mpfr(c)))
    acc = gmpy2.mpfr(0, precision=256)
    for j in range(n + 1):
        gj = _HI.sub(_HI.exp(_HI.mul(gmpy2.mpfr(j), _HI.log1p(e))), one)
        acc = _HI.add(acc, _HI.mul(gmpy2.exp2(j), gj))
    ho_merge = float(_HI.mul(gmpy2.mpfr(delta, precision=256), acc))
    return BoundReport(
        n=n, eps=eps, delta=delta, c=c,
        term_fp=term_fp, term_merge=term_merge, total=term_fp + term_merge,
        higher_order_fp=ho_fp, higher_order_merge=ho_merge,
    )


def suggest_delta(n: int, eps: float, allowed_error: float) -> float:
    """Largest safe merge threshold: (allowed - (n+1)*eps) / 2**(n+1)."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    head = (n + 1) * eps
    if allowed_error < head:
        raise ValueError(
            f"allowed error {allowed_error} is below the rounding floor {head}"
        )
    return (allowed_error - head) / 2.0 ** (n + 1)


def suggest_bits(delta: float) -> int:
    """Smallest significand width b with b > log2(1/delta)."""
    if delta <= 0:
        raise ValueError(f"delta must be > 0, got {delta}")
    fr = Fraction(delta)
    if fr.numerator == 1 and (fr.denominator & (fr.denominator - 1)) == 0:
        # delta is exactly 2**-k: the strict inequality forces k+1.
        return fr.denominator.bit_length()  # == k + 1
    ctx = gmpy2.context(precision=160, round=gmpy2.RoundToNearest)
    l = ctx.log2(gmpy2.mpq(fr.denominator, fr.numerator))
    return int(gmpy2.floor(l)) + 1


# -- measured experiments ----------------------------------------------------------


@dataclass(frozen=True)
class ErrorReport:
    """Outcome of one measured run against the 128-bit ground truth."""

    max_error: float
    worst_index: int
    final_nodes: int
    peak_nodes: int
    wall_ms: float


@dataclass(frozen=True)
class ReferenceState:
    """A finished ground-truth run (b=128, delta=0) kept alive for diffing."""

    store: NodeStore
    state: VectorDD


def hadamard_tensor(store: NodeStore, n: int) -> MatrixDD:
    """H^(x)n as a MatrixDD with entries +/- round_b(2**(-n/2))."""
    ctx = gmpy2.context(
        precision=store.precision.bits, round=gmpy2.RoundToNearest
    )
    amp = ctx.sqrt(gmpy2.exp2(-n))
    pos = store.precision.complex(amp)
    neg = store.precision.cneg(pos)
    memo: dict[tuple[int, int], int] = {}

    def build(level: int, sign: int) -> int:
        key = (level, sign)
        ref = memo.get(key)
        if ref is not None:
            return ref
        if level == n:
            ref = store.make_leaf(pos if sign > 0 else neg)
        else:
            same = build(level + 1, sign)
            flipped = build(level + 1, -sign)
            rvar = level << 1
            cvar = rvar | 1
            ref = store.make_node(rvar, same, store.make_node(cvar, same, flipped))
        memo[key] = ref
        return ref

    return MatrixDD(store, build(0, 1), n)


def uniform_vector(store: NodeStore, n: int) -> VectorDD:
    """The uniform superposition: constant entries round_b(2**(-n/2))."""
    ctx = gmpy2.context(
        precision=store.precision.bits, round=gmpy2.RoundToNearest
    )
    amp = ctx.sqrt(gmpy2.exp2(-n))
    return VectorDD(store, store.make_leaf(store.precision.complex(amp)), n)


def adversarial_run(n: int, delta: float, bits: int) -> ErrorReport:
    """The exponential-error instance: H^(x)n times the uniform vector.

    The exact first output entry is 1.  Before multiplying, the leaf table
    is seeded with round_b(p + 0.9*delta) where p is the implementation's
    actual rounded product of the two 2**(-n/2) amplitudes, so every product
    merges into the seeded leaf and the first entry accumulates an error of
    about 0.9*delta*2**n.  Reports |y_0 - 1|.
    """
    if not 1 <= n <= 24:
        raise ValueError(f"n must be in [1, 24], got {n}")
    start = time.perf_counter()
    store = NodeStore(bits, delta)
    m = hadamard_tensor(store, n)
    v = uniform_vector(store, n)

    amp = store.value(v.root)
    product = store.precision.cmul(amp, amp)
    if delta > 0:
        seed_hi = _HI.add(
            gmpy2.mpfr(product.re, precision=256),
            _HI.mul(gmpy2.mpfr(0.9), gmpy2.mpfr(delta, precision=256)),
        )
        seeded = store.precision.complex(seed_hi)
        offset = abs(float(_HI.sub(gmpy2.mpfr(seeded.re, precision=256),
                                   gmpy2.mpfr(product.re, precision=256))))
        if not 0.0 < offset <= delta:
            raise AdversarialSeedError(
                f"seed offset {offset} outside (0, {delta}]: the rounding grid "
                f"at {bits} bits is too coarse to place the adversarial leaf"
            )
        seeded_ref = store.make_leaf(seeded)
        if store.probe_leaf(product) != seeded_ref:
            raise AdversarialSeedError(
                "the product does not merge into the seeded leaf"
            )

    result = multiply(store, m, v)
    store.note_root(result.root)
    y0 = store.eval(result.root, [0] * n)
    one = Complex(gmpy2.mpfr(1, precision=bits), gmpy2.mpfr(0, precision=bits))
    err = float(distance(y0, one))
    wall_ms = (time.perf_counter() - start) * 1e3
    return ErrorReport(
        max_error=err,
        worst_index=0,
        final_nodes=store.count_nodes(result.root),
        peak_nodes=store.peak_nodes,
        wall_ms=wall_ms,
    )


def make_reference(circuit: Circuit) -> ReferenceState:
    """Ground-truth simulation: 128 significand bits, delta = 0."""
    store = NodeStore(REFERENCE_BITS, 0.0)
    state = simulate(store, circuit)
    return ReferenceState(store, state)


#: Above this size the dense comparison is replaced by a synchronized walk.
DENSE_DIFF_LIMIT = 16


def state_diff(store: NodeStore, state: VectorDD, reference: ReferenceState) -> tuple[float, int]:
    """Largest componentwise |deviation| from the reference and its index."""
    n = state.n
    if n != reference.state.n:
        raise ValueError("states have different qubit counts")
    if n <= DENSE_DIFF_LIMIT:
        ours = store.to_dense(state.root, n)
        theirs = reference.store.to_dense(reference.state.root, n)
        worst = -1.0
        worst_idx = 0
        for i, (a, b) in enumerate(zip(ours, theirs)):
            d = float(distance(a, b))
            if d > worst:
                worst = d
                worst_idx = i
        return worst, worst_idx
    return _walk_diff(store, state.root, reference.store, reference.state.root, n)


def _walk_diff(sa: NodeStore, a: int, sb: NodeStore, b: int, n: int) -> tuple[float, int]:
    memo: dict[tuple[int, int, int], tuple[float, int]] = {}

    def cofactors(store: NodeStore, node: int, level: int) -> tuple[int, int]:
        if not store.is_leaf(node) and store.var(node) == level:
            return store.low(node), store.high(node)
        return node, node

    def rec(x: int, y: int, level: int) -> tuple[float, int]:
        if level == n:
            return float(distance(sa.value(x), sb.value(y))), 0
        key = (x, y, level)
        got = memo.get(key)
        if got is not None:
            return got
        x0, x1 = cofactors(sa, x, level)
        y0, y1 = cofactors(sb, y, level)
        d0, i0 = rec(x0, y0, level + 1)
        d1, i1 = rec(x1, y1, level + 1)
        half = 1 << (n - 1 - level)
        out = (d1, half + i1) if d1 > d0 else (d0, i0)
        memo[key] = out
        return out

    return rec(a, b, 0)


def compare_to_reference(circuit: Circuit, delta: float, bits: int, *,
                         reference: ReferenceState | None = None) -> ErrorReport:
    """Simulate at (delta, bits) and report the deviation from the 128-bit
    delta=0 ground truth.  Wall time covers the measured run only; the
    reference is recomputed unless one is supplied."""
    start = time.perf_counter()
    store = NodeStore(bits, delta)
    state = simulate(store, circuit)
    wall_ms = (time.perf_counter() - start) * 1e3
    if reference is None:
        reference = make_reference(circuit)
    err, idx = state_diff(store, state, reference)
    return ErrorReport(
        max_error=err,
        worst_index=idx,
        final_nodes=store.count_nodes(state.root),
        peak_nodes=store.peak_nodes,
        wall_ms=wall_ms,
    )


def per_gate_bound_check(circuit: Circuit, delta: float, bits: int) -> list[dict]:
    """Instrumented mode: after each gate, compare that single multiply
    against a fresh 128-bit replay with the same (bit-exact) inputs.

    The theorem covers one multiplication on exact inputs, so the reference
    multiplies the same b-bit matrix and state, both embedded losslessly at
    128 bits with delta = 0.  Returns one record per gate with the measured
    error and the first-order bound for C = 1.
    """
    if bits > REFERENCE_BITS:
        raise ValueError("instrumented mode needs bits <= 128 for exact embedding")
    store = NodeStore(bits, delta)
    state = basis_state(store, circuit.n)
    bound = bound_unit(circuit.n, 2.0 ** -bits, delta).total + 2.0 ** (-bits + 4)
    records = []
    for k, gate in enumerate(circuit.gates):
        m = gate_matrix(store, gate, circuit.n)
        new_state = multiply(store, m, state)
        ref_store = NodeStore(REFERENCE_BITS, 0.0)
        m_ref = store.copy_into(ref_store, m.root)
        s_ref = store.copy_into(ref_store, state.root)
        r_ref = ref_store.multiply(m_ref, s_ref, circuit.n)
        err, idx = _walk_diff(store, new_state.root, ref_store, r_ref, circuit.n)
        records.append({
            "gate_index": k,
            "gate": gate.text(),
            "measured": err,
            "worst_index": idx,
            "bound": bound,
            "ok": err <= bound,
        })
        state = new_state
    return records


# -- sweeps -------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRecord:
    """One experiment row; flattens an ErrorReport into the grid point."""

    family: str
    n: int
    delta: float
    bits: int
    seed: int
    max_error: float
    worst_index: int
    final_nodes: int
    peak_nodes: int
    wall_ms: float
    status: str


CSV_FIELDS = [f.name for f in fields(SweepRecord)]

_FAILED_REPORT = ErrorReport(
    max_error=float("nan"), worst_index=-1, final_nodes=-1, peak_nodes=-1, wall_ms=0.0
)


def _sweep_group(family: str, n: int, deltas, bits_list, seed: int) -> list[SweepRecord]:
    """All grid points for one (family, n): the ground truth is computed
    once and shared, which changes nothing observable (it is deterministic
    and independent of delta and bits)."""
    records = []
    try:
        circuit = generate(family, n, seed)
        reference = make_reference(circuit)
    except Exception as exc:  # noqa: BLE001 - per-point failures become rows
        msg = f"failed: {exc}"
        return [
            SweepRecord(family, n, d, b, seed, **asdict(_FAILED_REPORT), status=msg)
            for d in deltas
            for b in bits_list
        ]
    for d in deltas:
        for b in bits_list:
            try:
                report = compare_to_reference(circuit, d, b, reference=reference)
                status = "ok"
            except Exception as exc:  # noqa: BLE001
                report = _FAILED_REPORT
                status = f"failed: {exc}"
            records.append(
                SweepRecord(family, n, d, b, seed, **asdict(report), status=status)
            )
    return records


def sweep(families, n_values, deltas, bits_list, seed: int = 0, *,
          workers: int | None = None, progress=None) -> list[SweepRecord]:
    """Run compare_to_reference over the whole grid in deterministic order
    (family, then n, then delta, then bits).  Failures are recorded in the
    row and the sweep continues.  With workers > 1 the (family, n) groups run
    in separate processes, one store per point either way; output order stays
    the deterministic grid order."""
    families = list(families)
    n_values = list(n_values)
    deltas = list(deltas)
    bits_list = list(bits_list)
    if not families or not n_values or not deltas or not bits_list:
        raise ValueError("sweep grids must be non-empty")
    if workers is None:
        workers = int(os.environ.get("DELTADD_WORKERS", "1"))
    groups = [(f, n) for f in families for n in n_values]
    results: list[list[SweepRecord]] = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_sweep_group, f, n, deltas, bits_list, seed)
                for f, n in groups
            ]
            for (f, n), fut in zip(groups, futures):
                results.append(fut.result())
                if progress is not None:
                    progress(f, n)
    else:
        for f, n in groups:
            results.append(_sweep_group(f, n, deltas, bits_list, seed))
            if progress is not None:
                progress(f, n)
    return [rec for group in results for rec in group]


# -- record serialization ---------------------------------------------------------------


def write_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_FIELDS)
        for r in records:
            w.writerow([getattr(r, name) for name in CSV_FIELDS])


def read_csv(path) -> list[SweepRecord]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_FIELDS:
            raise ValueError(f"unexpected CSV header {reader.fieldnames}")
        for row in reader:
            out.append(SweepRecord(
                family=row["family"],
                n=int(row["n"]),
                delta=float(row["delta"]),
                bits=int(row["bits"]),
                seed=int(row["seed"]),
                max_error=float(row["max_error"]),
                worst_index=int(row["worst_index"]),
                final_nodes=int(row["final_nodes"]),
                peak_nodes=int(row["peak_nodes"]),
                wall_ms=float(row["wall_ms"]),
                status=row["status"],
            ))
    return out


def write_json(records, path) -> None:
    with open(path, "w") as fh:
        json.dump([asdict(r) for r in records], fh, indent=2)
        fh.write("\n")
