"""Canonical MTBDD store with a delta-merging leaf table and operation caches.

Nodes live in a single arena and are identified by integer handles.  Internal
nodes branch on a variable index; leaves hold a complex value at the store's
precision.  A unique table keeps internal nodes canonical; the leaf table
reuses an existing leaf whenever its value is within the merge threshold
``delta`` (complex modulus) of the requested value, so a requested value may
be silently replaced by a nearby one.

Vectors of length ``2**n`` use variables ``0..n-1`` with variable 0 selecting
the most significant index bit.  Matrices of size ``2**n x 2**n`` use ``2n``
interleaved variables: even variables are row bits, odd variables are column
bits, which makes the four quadrant cofactors directly addressable.

Stores are single-threaded (mutable tables, deterministic insertion order);
independent stores may run concurrently.  The arena is never garbage
collected: stores are cheap and meant to be discarded between experiments.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import gmpy2

from .numerics import Complex, Precision, PrecisionError, RangeError, exact_fraction

#: Variable sentinel for leaves; larger than any real variable index.
LEAF_VAR = 1 << 30

_PLUS_TAG = 0
_MULT_TAG = 1


class OrderingError(ValueError):
    """Child variable does not come after the parent variable."""


class DimensionError(ValueError):
    """Operands represent objects over different variable sets."""


@dataclass(frozen=True)
class VectorDD:
    """Root of a vector over variables 0..n-1."""

    store: "NodeStore"
    root: int
    n: int


@dataclass(frozen=True)
class MatrixDD:
    """Root of a matrix over 2n interleaved row/column variables."""

    store: "NodeStore"
    root: int
    n: int


class NodeStore:
    """Arena, unique table, delta-merging leaf table and operation caches."""

    def __init__(self, bits: int = 53, delta: float = 0.0, *, cache_enabled: bool = True,
                 check_contracts: bool = False):
        self.precision = Precision(bits)
        delta = float(delta)
        if not delta >= 0.0:
            raise ValueError(f"merge threshold must be >= 0, got {delta}")
        self.delta = delta
        self.check_contracts = check_contracts

        self._bits = bits
        self._var: list[int] = []
        self._low: list[int] = []
        self._high: list[int] = []
        self._val: list[Complex | None] = []
        self._utab: dict[tuple[int, int, int], int] = {}
        self._leaf_exact: dict[Complex, int] = {}
        self._buckets: dict[tuple[int, int], list[int]] = {}
        # Operation caches, one per op tag.
        self._cache_plus: dict[tuple[int, int], int] = {}
        self._cache_mult: dict[tuple[int, int, int], int] = {}
        self._flags = [cache_enabled]
        self._hits = [0]
        self._peak = 0

        self._pzero = self.precision.value(0)
        self._delta_fr = Fraction(delta)
        self._delta_sq_fr = self._delta_fr * self._delta_fr
        # Distance prefilter precision: tight enough that only distances
        # within a hair of delta fall through to the exact rational check.
        pre_bits = max(bits, 64) + 16
        pre_ctx = gmpy2.context(precision=pre_bits, round=gmpy2.RoundToNearest)
        self._pre_ctx = pre_ctx
        d = gmpy2.mpfr(delta, precision=pre_bits)
        d_sq = pre_ctx.mul(d, d)
        one = gmpy2.mpfr(1, precision=pre_bits)
        band = gmpy2.exp2(-pre_bits + 8)
        self._delta_sq_lo = pre_ctx.mul(d_sq, pre_ctx.sub(one, band))
        self._delta_sq_hi = pre_ctx.mul(d_sq, pre_ctx.add(one, band))

        # Leaf grid: cell width max(delta, 2**(-bits-2)); any value within
        # delta of a query is then at most one cell away in each direction.
        # 192-bit quotients keep cell indices exact far beyond any workload.
        self._cell_ctx = gmpy2.context(precision=192, round=gmpy2.RoundToNearest)
        width = gmpy2.mpfr(delta, precision=64)
        ulp_floor = gmpy2.exp2(-bits - 2)
        self._cell_width = width if width > ulp_floor else ulp_floor

        self._plus = _build_plus(self)
        # Sole preexisting leaf: the exact zero (also the multiply shortcut).
        self.zero = self.make_leaf(self.precision.zero())
        assert self.zero == 0

    # -- statistics ---------------------------------------------------------

    @property
    def nodes_created(self) -> int:
        return len(self._var)

    @property
    def cache_hits(self) -> int:
        return self._hits[0]

    @property
    def cache_enabled(self) -> bool:
        return self._flags[0]

    @cache_enabled.setter
    def cache_enabled(self, on: bool) -> None:
        self._flags[0] = bool(on)

    def note_root(self, ref: int) -> int:
        """Record a live root; updates the peak reachable-node statistic."""
        count = self.count_nodes(ref)
        if count > self._peak:
            self._peak = count
        return count

    @property
    def peak_nodes(self) -> int:
        return self._peak

    # -- node introspection ---------------------------------------------------

    def is_leaf(self, ref: int) -> bool:
        return self._var[ref] == LEAF_VAR

    def var(self, ref: int) -> int:
        v = self._var[ref]
        if v == LEAF_VAR:
            raise ValueError(f"node {ref} is a leaf")
        return v

    def low(self, ref: int) -> int:
        return self._low[ref]

    def high(self, ref: int) -> int:
        return self._high[ref]

    def value(self, ref: int) -> Complex:
        v = self._val[ref]
        if v is None:
            raise ValueError(f"node {ref} is not a leaf")
        return v

    # -- leaf table -------------------------------------------------------------

    def _cells(self, value: Complex) -> tuple[int, int]:
        ctx = self._cell_ctx
        w = self._cell_width
        return (
            int(ctx.floor(ctx.div(value.re, w))),
            int(ctx.floor(ctx.div(value.im, w))),
        )

    def _within_delta(self, a: Complex, b: Complex) -> bool:
        ctx = self._pre_ctx
        dr = ctx.sub(a.re, b.re)
        di = ctx.sub(a.im, b.im)
        d2 = ctx.add(ctx.mul(dr, dr), ctx.mul(di, di))
        if d2 > self._delta_sq_hi:
            return False
        if d2 < self._delta_sq_lo:
            return True
        # Boundary band: decide exactly on dyadic rationals.
        dr_fr = exact_fraction(a.re) - exact_fraction(b.re)
        di_fr = exact_fraction(a.im) - exact_fraction(b.im)
        return dr_fr * dr_fr + di_fr * di_fr <= self._delta_sq_fr

    def _find_leaf(self, value: Complex) -> int | None:
        """First existing leaf within delta, probing 3x3 cells row-major.

        An exact-value hit short-circuits the probe: live leaves are pairwise
        more than delta apart (a new leaf is only created when nothing within
        delta exists), so an exact match is the unique in-range candidate and
        the probe order cannot matter.
        """
        exact = self._leaf_exact.get(value)
        if exact is not None or self.delta == 0.0:
            return exact
        ci, cj = self._cells(value)
        buckets = self._buckets
        vals = self._val
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                bucket = buckets.get((ci + di, cj + dj))
                if bucket:
                    for ref in bucket:
                        if self._within_delta(vals[ref], value):
                            return ref
        return None

    def probe_leaf(self, value: Complex) -> int | None:
        """The leaf make_leaf(value) would reuse, without inserting."""
        return self._find_leaf(value)

    def make_leaf(self, value: Complex) -> int:
        """Leaf whose value is within delta of ``value`` (exactly ``value``
        if no existing leaf qualifies).  Deterministic given store history."""
        re, im = value
        bits = self._bits
        if re.precision != bits or im.precision != bits:
            raise PrecisionError(
                f"leaf value at {re.precision}/{im.precision} bits, store has {bits}"
            )
        if not gmpy2.is_finite(re) or not gmpy2.is_finite(im):
            raise RangeError(f"non-finite leaf value {value}")
        if not re:
            re = self._pzero
        if not im:
            im = self._pzero
        value = Complex(re, im)

        found = self._find_leaf(value)
        if found is not None:
            if self.check_contracts:
                self._assert_delta_contract(value, self._val[found])
            return found

        ref = len(self._var)
        self._var.append(LEAF_VAR)
        self._low.append(0)
        self._high.append(0)
        self._val.append(value)
        self._leaf_exact[value] = ref
        if self.delta != 0.0:
            self._buckets.setdefault(self._cells(value), []).append(ref)
        return ref

    def _assert_delta_contract(self, requested: Complex, got: Complex) -> None:
        dr = exact_fraction(requested.re) - exact_fraction(got.re)
        di = exact_fraction(requested.im) - exact_fraction(got.im)
        if dr * dr + di * di > self._delta_sq_fr:
            raise AssertionError(
                f"delta contract violated: |{got} - {requested}| > {self.delta}"
            )

    # -- internal nodes ---------------------------------------------------------

    def make_node(self, var: int, low: int, high: int) -> int:
        """Canonical internal node; collapses to the child when low == high."""
        if low == high:
            return low
        _var = self._var
        if var < 0 or var >= _var[low] or var >= _var[high]:
            raise OrderingError(
                f"variable {var} must precede children "
                f"(low var {_var[low]}, high var {_var[high]})"
            )
        key = (var, low, high)
        ref = self._utab.get(key)
        if ref is None:
            ref = len(_var)
            _var.append(var)
            self._low.append(low)
            self._high.append(high)
            self._val.append(None)
            self._utab[key] = ref
        return ref

    # -- operations ---------------------------------------------------------------

    def plus(self, a: int, b: int) -> int:
        """Elementwise sum (Plus); every created leaf passes make_leaf."""
        return self._plus(a, b)

    def multiply(self, m: int, v: int, n: int) -> int:
        """Matrix-vector product over n levels by quadrant block recursion.

        result|0 = M|00 v|0 + M|01 v|1 and result|1 = M|10 v|0 + M|11 v|1,
        where M|rc fixes the level's row bit to r and column bit to c.  The
        terminal case (all levels consumed) performs one rounded multiply
        followed by make_leaf; partial sums are combined with plus.  An
        exact-zero operand short-circuits to the zero leaf: 0*x and 0+x are
        exact, so no rounding or merging step is skipped that could have
        changed a value.
        """
        var = self._var
        low = self._low
        high = self._high
        val = self._val
        cache = self._cache_mult
        flags = self._flags
        hits = self._hits
        plus = self._plus
        make_leaf = self.make_leaf
        make_node = self.make_node
        cmul = self.precision.cmul

        def rec(m: int, v: int, level: int) -> int:
            if m == 0 or v == 0:
                return 0
            if level == n:
                if var[m] != LEAF_VAR or var[v] != LEAF_VAR:
                    raise DimensionError(
                        "operands have variables beyond the stated level count"
                    )
                return make_leaf(cmul(val[m], val[v]))
            if flags[0]:
                key = (m, v, level)
                r = cache.get(key)
                if r is not None:
                    hits[0] += 1
                    return r
            rv = level << 1
            cv = rv | 1
            if var[m] == rv:
                mr0 = low[m]
                mr1 = high[m]
            else:
                mr0 = mr1 = m
            if var[mr0] == cv:
                m00 = low[mr0]
                m01 = high[mr0]
            else:
                m00 = m01 = mr0
            if var[mr1] == cv:
                m10 = low[mr1]
                m11 = high[mr1]
            else:
                m10 = m11 = mr1
            if var[v] == level:
                v0 = low[v]
                v1 = high[v]
            else:
                v0 = v1 = v
            r00 = rec(m00, v0, level + 1)
            r10 = rec(m10, v0, level + 1)
            r01 = rec(m01, v1, level + 1)
            r11 = rec(m11, v1, level + 1)
            r = make_node(level, plus(r00, r01), plus(r10, r11))
            if flags[0]:
                cache[(m, v, level)] = r
            return r

        return rec(m, v, 0)

    def eval(self, root: int, assignment) -> Complex:
        """Follow low/high edges per assignment bit; skipped variables are
        ignored.  Returns the leaf value reached."""
        if isinstance(assignment, str):
            if not all(c in "01" for c in assignment):
                raise ValueError(f"assignment must be over 0/1, got {assignment!r}")
            bits = [int(c) for c in assignment]
        else:
            bits = list(assignment)
            if not all(b in (0, 1) for b in bits):
                raise ValueError("assignment must be over 0/1")
        var = self._var
        node = root
        while var[node] != LEAF_VAR:
            v = var[node]
            if v >= len(bits):
                raise DimensionError(
                    f"assignment has {len(bits)} bits but variable {v} was reached"
                )
            node = self._high[node] if bits[v] else self._low[node]
        return self._val[node]

    # -- dense conversion -----------------------------------------------------------

    def _coerce(self, v) -> Complex:
        if isinstance(v, Complex):
            if v.re.precision != self._bits:
                raise PrecisionError(
                    f"value at {v.re.precision} bits, store has {self._bits}"
                )
            return v
        if isinstance(v, complex):
            return self.precision.complex(v.real, v.imag)
        if isinstance(v, tuple):
            return self.precision.complex(*v)
        return self.precision.complex(v)

    def from_dense(self, values, n: int) -> int:
        """Bottom-up vector construction through make_leaf/make_node."""
        if len(values) != 1 << n:
            raise DimensionError(f"expected {1 << n} values, got {len(values)}")
        cvals = [self._coerce(v) for v in values]
        make_leaf = self.make_leaf
        make_node = self.make_node

        def build(base: int, level: int) -> int:
            if level == n:
                return make_leaf(cvals[base])
            half = 1 << (n - 1 - level)
            return make_node(level, build(base, level + 1), build(base + half, level + 1))

        return build(0, 0)

    def from_dense_matrix(self, values, n: int) -> int:
        """Row-major dense matrix (length 4**n) to interleaved-variable DD."""
        if len(values) != 1 << (2 * n):
            raise DimensionError(f"expected {1 << (2 * n)} values, got {len(values)}")
        cvals = [self._coerce(v) for v in values]
        dim = 1 << n
        make_leaf = self.make_leaf
        make_node = self.make_node

        def build(level: int, i: int, j: int) -> int:
            if level == 2 * n:
                return make_leaf(cvals[i * dim + j])
            bit = 1 << (n - 1 - (level >> 1))
            if level & 1:
                return make_node(level, build(level + 1, i, j), build(level + 1, i, j | bit))
            return make_node(level, build(level + 1, i, j), build(level + 1, i | bit, j))

        return build(0, 0, 0)

    def to_dense(self, root: int, nvars: int) -> list[Complex]:
        out: list[Complex | None] = [None] * (1 << nvars)
        var = self._var
        low = self._low
        high = self._high
        val = self._val

        def walk(node: int, level: int, base: int) -> None:
            if level == nvars:
                if var[node] != LEAF_VAR:
                    raise DimensionError("node has variables beyond nvars")
                out[base] = val[node]
                return
            half = 1 << (nvars - 1 - level)
            if var[node] == level:
                walk(low[node], level + 1, base)
                walk(high[node], level + 1, base + half)
            else:
                walk(node, level + 1, base)
                walk(node, level + 1, base + half)

        walk(root, 0, 0)
        return out  # type: ignore[return-value]

    def to_dense_matrix(self, root: int, n: int) -> list[list[Complex]]:
        flat = self.to_dense(root, 2 * n)
        dim = 1 << n
        rows: list[list[Complex]] = [[None] * dim for _ in range(dim)]  # type: ignore
        for pos, value in enumerate(flat):
            i = j = 0
            for level in range(2 * n):
                bit = (pos >> (2 * n - 1 - level)) & 1
                if level & 1:
                    j = (j << 1) | bit
                else:
                    i = (i << 1) | bit
            rows[i][j] = value
        return rows

    # -- reachability, export ------------------------------------------------------

    def count_nodes(self, root: int) -> int:
        """Distinct nodes reachable from root, leaves included."""
        seen = {root}
        stack = [root]
        var = self._var
        low = self._low
        high = self._high
        while stack:
            node = stack.pop()
            if var[node] == LEAF_VAR:
                continue
            for child in (low[node], high[node]):
                if child not in seen:
                    seen.add(child)
                    stack.append(child)
        return len(seen)

    def to_dot(self, root: int, name: str = "mtbdd") -> str:
        """DOT text: dashed edge = low, solid = high, boxes = leaf values."""
        order: list[int] = []
        seen = {root}
        stack = [root]
        while stack:
            node = stack.pop()
            order.append(node)
            if self._var[node] == LEAF_VAR:
                continue
            for child in (self._high[node], self._low[node]):
                if child not in seen:
                    seen.add(child)
                    stack.append(child)
        lines = [f"digraph {name} {{"]
        for node in sorted(order):
            if self._var[node] == LEAF_VAR:
                lines.append(f'  n{node} [shape=box, label="{self._val[node]}"];')
            else:
                lines.append(f'  n{node} [shape=circle, label="x{self._var[node]}"];')
        for node in sorted(order):
            if self._var[node] != LEAF_VAR:
                lines.append(f"  n{node} -> n{self._low[node]} [style=dashed];")
                lines.append(f"  n{node} -> n{self._high[node]};")
        lines.append("}")
        return "\n".join(lines)

    def copy_into(self, other: "NodeStore", root: int) -> int:
        """Re-create the DD rooted here inside another store.

        Values are re-rounded to the destination precision and re-merged
        through the destination's make_leaf (lossless when the destination
        has at least as many bits and delta = 0)."""
        memo: dict[int, int] = {}
        coerce = other.precision.complex

        def walk(node: int) -> int:
            got = memo.get(node)
            if got is not None:
                return got
            if self._var[node] == LEAF_VAR:
                val = self._val[node]
                ref = other.make_leaf(coerce(val.re, val.im))
            else:
                low = walk(self._low[node])
                high = walk(self._high[node])
                ref = other.make_node(self._var[node], low, high)
            memo[node] = ref
            return ref

        return walk(root)


def _build_plus(store: NodeStore):
    """Recursion for Plus with the store's tables bound in the closure."""
    var = store._var
    low = store._low
    high = store._high
    val = store._val
    cache = store._cache_plus
    flags = store._flags
    hits = store._hits
    make_node = store.make_node
    make_leaf = store.make_leaf
    cadd = store.precision.cadd

    def plus(a: int, b: int) -> int:
        # Exact-zero shortcuts are value-faithful: fl(0 + x) = x exactly and
        # make_leaf of an existing leaf value returns that same leaf, so the
        # faithful recursion would reproduce the other operand node for node.
        if a == 0:
            return b
        if b == 0:
            return a
        va = var[a]
        vb = var[b]
        if va == LEAF_VAR and vb == LEAF_VAR:
            return make_leaf(cadd(val[a], val[b]))
        if flags[0]:
            key = (a, b)
            r = cache.get(key)
            if r is not None:
                hits[0] += 1
                return r
        # Skipped variables: the node with the larger variable acts as both
        # cofactors of the smaller one.
        if va < vb:
            v, a0, a1, b0, b1 = va, low[a], high[a], b, b
        elif vb < va:
            v, a0, a1, b0, b1 = vb, a, a, low[b], high[b]
        else:
            v, a0, a1, b0, b1 = va, low[a], high[a], low[b], high[b]
        r = make_node(v, plus(a0, b0), plus(a1, b1))
        if flags[0]:
            cache[(a, b)] = r
        return r

    return plus


# -- wrapper-level API ----------------------------------------------------------


def make_leaf(store: NodeStore, value: Complex) -> int:
    return store.make_leaf(value)


def make_node(store: NodeStore, var: int, low: int, high: int) -> int:
    return store.make_node(var, low, high)


def plus(store: NodeStore, a, b):
    """Elementwise sum of two vectors (VectorDDs or raw refs)."""
    if isinstance(a, VectorDD) and isinstance(b, VectorDD):
        if a.store is not b.store or a.store is not store:
            raise ValueError("operands belong to a different store")
        if a.n != b.n:
            raise DimensionError(f"vector sizes differ: 2^{a.n} vs 2^{b.n}")
        return VectorDD(store, store.plus(a.root, b.root), a.n)
    if isinstance(a, int) and isinstance(b, int):
        return store.plus(a, b)
    raise TypeError("plus expects two VectorDDs or two node refs")


def multiply(store: NodeStore, m: MatrixDD, v: VectorDD) -> VectorDD:
    if m.store is not store or v.store is not store:
        raise ValueError("operands belong to a different store")
    if m.n != v.n:
        raise DimensionError(f"matrix is 2^{m.n} x 2^{m.n} but vector is 2^{v.n}")
    return VectorDD(store, store.multiply(m.root, v.root, m.n), m.n)


def eval_dd(store: NodeStore, dd, assignment) -> Complex:
    if isinstance(dd, VectorDD):
        _require_len(assignment, dd.n)
        return store.eval(dd.root, assignment)
    if isinstance(dd, MatrixDD):
        _require_len(assignment, 2 * dd.n)
        return store.eval(dd.root, assignment)
    return store.eval(dd, assignment)


def _require_len(assignment, n: int) -> None:
    if len(assignment) != n:
        raise DimensionError(f"assignment length {len(assignment)}, expected {n}")


def from_dense(store: NodeStore, values, n: int) -> VectorDD:
    return VectorDD(store, store.from_dense(values, n), n)


def from_dense_matrix(store: NodeStore, values, n: int) -> MatrixDD:
    return MatrixDD(store, store.from_dense_matrix(values, n), n)


def to_dense(store: NodeStore, v: VectorDD) -> list[Complex]:
    return store.to_dense(v.root, v.n)


def to_dense_matrix(store: NodeStore, m: MatrixDD) -> list[list[Complex]]:
    return store.to_dense_matrix(m.root, m.n)


def count_nodes(store: NodeStore, root) -> int:
    if isinstance(root, (VectorDD, MatrixDD)):
        root = root.root
    return store.count_nodes(root)


def peak_nodes(store: NodeStore) -> int:
    return store.peak_nodes
