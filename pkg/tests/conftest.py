"""Shared test fixtures and independent oracles.

The oracles here are deliberately dense and DD-free: they recompute results
through the numerics layer alone so that agreement with the MTBDD engine is
a genuine two-route check.
"""

from __future__ import annotations

import random

import gmpy2
import pytest

from deltadd.numerics import Complex, Precision


def tree_sum(precision: Precision, values: list[Complex], lo: int, hi: int) -> Complex:
    """Balanced binary-tree rounded summation over [lo, hi): the summation
    shape of the DD's block recursion (split on the top index bit)."""
    if hi - lo == 1:
        return values[lo]
    mid = (lo + hi) // 2
    return precision.cadd(
        tree_sum(precision, values, lo, mid), tree_sum(precision, values, mid, hi)
    )


def normalize_zero(precision: Precision, value: Complex) -> Complex:
    """Model the leaf table's canonical zero (no negative zeros)."""
    re, im = value
    if not re:
        re = precision.value(0)
    if not im:
        im = precision.value(0)
    return Complex(re, im)


def dense_multiply_oracle(precision: Precision, mvals: list[Complex],
                          vvals: list[Complex], n: int) -> list[Complex]:
    """Each output entry as the balanced binary-tree sum of individually
    rounded products; the independent reference for multiply at delta=0."""
    dim = 1 << n
    out = []
    for i in range(dim):
        prods = [
            normalize_zero(precision, precision.cmul(mvals[i * dim + j], vvals[j]))
            for j in range(dim)
        ]
        out.append(_tree_merge(precision, prods, 0, dim))
    return out


def _tree_merge(precision: Precision, values: list[Complex], lo: int, hi: int) -> Complex:
    if hi - lo == 1:
        return values[lo]
    mid = (lo + hi) // 2
    s = precision.cadd(
        _tree_merge(precision, values, lo, mid),
        _tree_merge(precision, values, mid, hi),
    )
    return normalize_zero(precision, s)


def dense_statevector_oracle(precision: Precision, circuit, n: int) -> list[Complex]:
    """Gate-by-gate dense simulation with the same embedded matrices and the
    same binary-tree summation; mirrors simulate at delta=0."""
    from deltadd.quantum import base_matrix

    state = [precision.one()] + [precision.zero()] * ((1 << n) - 1)
    for gate in circuit.gates:
        mvals = embed_gate_dense(precision, gate, n)
        state = dense_multiply_oracle(precision, mvals, state, n)
    return state


def embed_gate_dense(precision: Precision, gate, n: int) -> list[Complex]:
    """Dense n-qubit embedding of a gate (identity on untouched qubits),
    built independently of the DD construction."""
    from deltadd.quantum import base_matrix

    base = base_matrix(gate, precision)
    k = len(gate.targets)
    bdim = 1 << k
    dim = 1 << n
    zero = precision.zero()
    out = []
    for row in range(dim):
        for col in range(dim):
            rsel = csel = 0
            match = True
            for q in range(n):
                rbit = (row >> (n - 1 - q)) & 1
                cbit = (col >> (n - 1 - q)) & 1
                if q in gate.targets:
                    pos = gate.targets.index(q)
                    rsel |= rbit << (k - 1 - pos)
                    csel |= cbit << (k - 1 - pos)
                elif rbit != cbit:
                    match = False
                    break
            out.append(base[rsel * bdim + csel] if match else zero)
    return out


def random_complex(precision: Precision, rng: random.Random,
                   magnitude: float = 1.0) -> Complex:
    return precision.complex(
        rng.uniform(-magnitude, magnitude), rng.uniform(-magnitude, magnitude)
    )


def random_matrix_vector(precision: Precision, rng: random.Random, n: int,
                         alphabet: int | None = None,
                         zero_fraction: float = 0.2) -> tuple[list[Complex], list[Complex]]:
    """Random dense matrix/vector values; a small value alphabet produces
    compact DDs with shared subgraphs and skipped variables."""
    dim = 1 << n
    if alphabet:
        pool = [random_complex(precision, rng) for _ in range(alphabet)]
        pick = lambda: rng.choice(pool)
    else:
        pick = lambda: random_complex(precision, rng)
    zero = precision.zero()
    mvals = [zero if rng.random() < zero_fraction else pick() for _ in range(dim * dim)]
    vvals = [zero if rng.random() < zero_fraction else pick() for _ in range(dim)]
    return mvals, vvals


def l2_normalize(precision: Precision, values: list[Complex]) -> list[Complex]:
    """Scale to unit l2 norm (norm computed at 256 bits, then rounded)."""
    ctx = gmpy2.context(precision=256, round=gmpy2.RoundToNearest)
    acc = gmpy2.mpfr(0, precision=256)
    for v in values:
        acc = ctx.add(acc, ctx.add(ctx.mul(v.re, v.re), ctx.mul(v.im, v.im)))
    norm = ctx.sqrt(acc)
    if not norm:
        raise ValueError("zero vector")
    return [
        precision.complex(ctx.div(v.re, norm), ctx.div(v.im, norm)) for v in values
    ]


def l2_norm(values: list[Complex]) -> gmpy2.mpfr:
    ctx = gmpy2.context(precision=320, round=gmpy2.RoundToNearest)
    acc = gmpy2.mpfr(0, precision=320)
    for v in values:
        acc = ctx.add(acc, ctx.add(ctx.mul(v.re, v.re), ctx.mul(v.im, v.im)))
    return ctx.sqrt(acc)


def l2_norm_deviation(values: list[Complex]) -> float:
    """|l2norm - 1| with the subtraction done at high precision; converting
    the norm to a double first would hide sub-ulp deviations."""
    ctx = gmpy2.context(precision=320, round=gmpy2.RoundToNearest)
    return abs(float(ctx.sub(l2_norm(values), gmpy2.mpfr(1, precision=320))))


@pytest.fixture
def rng():
    return random.Random(0xD17A)
