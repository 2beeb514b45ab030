"""Gates, circuits, the circuit-file format, benchmark generators, and
gate-by-gate simulation on MTBDDs.

The gate set is {H, X, Z, CX, CCX, RY, RZ, P, CP}.  Gate matrices are built
as MTBDDs over the interleaved row/column variables without materialising
the dense operator: untouched qubits contribute a constant-size diagonal
node pattern, so an embedded single gate has node count linear in the qubit
count.  All matrix entries pass through the store's make_leaf, so the
precision and merge threshold of the store apply to the operator itself as
well as to the state.

Circuit files are line-oriented with ``//`` comments and ``;`` terminators::

    qreg q[3];
    h q[0];
    cx q[0],q[1];
    cp(-pi/2^2) q[1],q[2];
    ry(0.9553166181245093) q[2];

Angles are decimal literals or rational multiples of pi (``pi/4``,
``-pi/2^3``); they are evaluated once at 128 bits and rounded to the store's
precision at use.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field

import gmpy2
from gmpy2 import mpfr

from . import numerics
from .mtbdd import MatrixDD, NodeStore, VectorDD, multiply
from .numerics import Complex, Precision, REFERENCE_BITS, format_angle, parse_angle


class CircuitSyntaxError(ValueError):
    """Parse failure; carries the 1-based line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class Angle:
    """A gate angle: a verbatim token plus its 128-bit value.

    Keeping the token makes emit/parse round-trips exact; the value is
    rounded to each store's precision when a gate matrix is built.
    """

    __slots__ = ("token", "value128")

    def __init__(self, token: str):
        self.token = token
        self.value128 = parse_angle(token)

    @classmethod
    def from_value(cls, x, digits: int = 40) -> "Angle":
        if not isinstance(x, mpfr):
            x = gmpy2.mpfr(x, precision=REFERENCE_BITS)
        return cls(format_angle(x, digits))

    def __eq__(self, other) -> bool:
        return isinstance(other, Angle) and other.token == self.token

    def __hash__(self) -> int:
        return hash(self.token)

    def __repr__(self) -> str:
        return f"Angle({self.token!r})"


#: kind -> (number of qubits, takes an angle)
GATE_KINDS: dict[str, tuple[int, bool]] = {
    "h": (1, False),
    "x": (1, False),
    "z": (1, False),
    "cx": (2, False),
    "ccx": (3, False),
    "ry": (1, True),
    "rz": (1, True),
    "p": (1, True),
    "cp": (2, True),
}


@dataclass(frozen=True)
class Gate:
    kind: str
    targets: tuple[int, ...]
    angle: Angle | None = None

    def __post_init__(self):
        spec = GATE_KINDS.get(self.kind)
        if spec is None:
            raise ValueError(f"unknown gate {self.kind!r}")
        arity, needs_angle = spec
        if len(self.targets) != arity:
            raise ValueError(f"{self.kind} takes {arity} qubit(s), got {self.targets}")
        if len(set(self.targets)) != len(self.targets):
            raise ValueError(f"{self.kind} targets must be distinct: {self.targets}")
        if any(t < 0 for t in self.targets):
            raise ValueError(f"negative qubit index in {self.targets}")
        if needs_angle != (self.angle is not None):
            raise ValueError(f"{self.kind} {'needs' if needs_angle else 'takes no'} angle")

    def text(self) -> str:
        args = ",".join(f"q[{t}]" for t in self.targets)
        if self.angle is not None:
            return f"{self.kind}({self.angle.token}) {args};"
        return f"{self.kind} {args};"


@dataclass(frozen=True)
class Circuit:
    n: int
    gates: tuple[Gate, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"need at least one qubit, got {self.n}")
        for g in self.gates:
            if max(g.targets) >= self.n:
                raise ValueError(f"gate {g.text()} exceeds {self.n} qubits")

    def text(self) -> str:
        lines = [f"qreg q[{self.n}];"]
        lines.extend(g.text() for g in self.gates)
        return "\n".join(lines) + "\n"


# -- base matrices -------------------------------------------------------------


def base_matrix(gate: Gate, precision: Precision) -> list[Complex]:
    """Dense 2^k x 2^k matrix of the bare gate, row-major.

    The first target qubit is the most significant index bit.  Entries are
    evaluated at the precision's width; angles are first rounded to it.
    """
    one = precision.one()
    zero = precision.zero()
    kind = gate.kind
    if kind == "h":
        s = precision.constant("sqrt_half")
        return [s, s, s, precision.cneg(s)]
    if kind == "x":
        return [zero, one, one, zero]
    if kind == "z":
        return [one, zero, zero, precision.cneg(one)]
    if kind == "cx":
        return _permutation([0, 1, 3, 2], precision)
    if kind == "ccx":
        return _permutation([0, 1, 2, 3, 4, 5, 7, 6], precision)
    theta = gate.angle.value128
    if kind == "ry":
        half = _half(theta)
        c = precision.constant("cos", half)
        s = precision.constant("sin", half)
        return [c, precision.cneg(s), s, c]
    if kind == "rz":
        half = _half(theta)
        neg_half = gmpy2.context(precision=half.precision).minus(half)
        return [
            precision.constant("exp_i", neg_half), zero,
            zero, precision.constant("exp_i", half),
        ]
    if kind == "p":
        return [one, zero, zero, precision.constant("exp_i", theta)]
    if kind == "cp":
        m = _permutation([0, 1, 2, 3], precision)
        m[15] = precision.constant("exp_i", theta)
        return m
    raise ValueError(f"unknown gate {kind!r}")


def _half(theta: mpfr) -> mpfr:
    # Exact halving: binary exponent decrement.
    return gmpy2.context(precision=theta.precision).div(theta, gmpy2.mpfr(2))


def _permutation(image: list[int], precision: Precision) -> list[Complex]:
    dim = len(image)
    one = precision.one()
    zero = precision.zero()
    out = [zero] * (dim * dim)
    for col, row in enumerate(image):
        out[row * dim + col] = one
    return out


# -- gate matrices as MTBDDs -------------------------------------------------------


def gate_matrix(store: NodeStore, gate: Gate, n: int) -> MatrixDD:
    """MTBDD over 2n interleaved variables embedding the gate, identity on
    untouched qubits; built recursively without the dense 4**n matrix."""
    if max(gate.targets) >= n:
        raise ValueError(f"gate {gate.text()} exceeds {n} qubits")
    base = base_matrix(gate, store.precision)
    k = len(gate.targets)
    dim = 1 << k
    pos = {q: i for i, q in enumerate(gate.targets)}
    zero = store.zero
    make_node = store.make_node
    make_leaf = store.make_leaf
    memo: dict[tuple[int, int, int], int] = {}

    def build(level: int, rsel: int, csel: int) -> int:
        if level == n:
            return make_leaf(base[rsel * dim + csel])
        key = (level, rsel, csel)
        ref = memo.get(key)
        if ref is not None:
            return ref
        rvar = level << 1
        cvar = rvar | 1
        i = pos.get(level)
        if i is None:
            # Untouched qubit: identity block, zero off the diagonal.
            sub = build(level + 1, rsel, csel)
            ref = make_node(
                rvar,
                make_node(cvar, sub, zero),
                make_node(cvar, zero, sub),
            )
        else:
            bit = 1 << (k - 1 - i)
            ref = make_node(
                rvar,
                make_node(
                    cvar,
                    build(level + 1, rsel, csel),
                    build(level + 1, rsel, csel | bit),
                ),
                make_node(
                    cvar,
                    build(level + 1, rsel | bit, csel),
                    build(level + 1, rsel | bit, csel | bit),
                ),
            )
        memo[key] = ref
        return ref

    return MatrixDD(store, build(0, 0, 0), n)


def basis_state(store: NodeStore, n: int, index: int = 0) -> VectorDD:
    """The computational basis vector e_index as a chain to leaf 1."""
    if not 0 <= index < (1 << n):
        raise ValueError(f"index {index} out of range for {n} qubits")
    one = store.make_leaf(store.precision.one())
    zero = store.zero
    node = one
    for level in range(n - 1, -1, -1):
        if (index >> (n - 1 - level)) & 1:
            node = store.make_node(level, zero, node)
        else:
            node = store.make_node(level, node, zero)
    return VectorDD(store, node, n)


def simulate(store: NodeStore, circuit: Circuit, *, step_callback=None) -> VectorDD:
    """Gate-by-gate simulation: start from e_0, multiply one gate matrix at a
    time.  Peak node counts are recorded on the store after every step."""
    state = basis_state(store, circuit.n)
    store.note_root(state.root)
    for index, gate in enumerate(circuit.gates):
        m = gate_matrix(store, gate, circuit.n)
        state = multiply(store, m, state)
        store.note_root(state.root)
        if step_callback is not None:
            step_callback(index, gate, state)
    return state


# -- circuit file format ---------------------------------------------------------------

_QREG_RE = re.compile(r"^qreg\s+q\[(\d+)\]$")
_GATE_RE = re.compile(r"^([a-z]+)\s*(?:\(([^()]*)\))?\s+(.+)$")
_OPERAND_RE = re.compile(r"^q\[(\d+)\]$")


def parse_circuit(text: str) -> Circuit:
    """Parse the circuit file format; raises CircuitSyntaxError with the
    offending line number."""
    statements: list[tuple[str, int]] = []
    pending = ""
    pending_line = 1
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("//", 1)[0]
        for ch in line:
            if not pending.strip():
                pending_line = lineno
            if ch == ";":
                statements.append((pending.strip(), pending_line))
                pending = ""
            else:
                pending += ch
    if pending.strip():
        raise CircuitSyntaxError("statement not terminated by ';'", pending_line)

    n: int | None = None
    gates: list[Gate] = []
    for stmt, lineno in statements:
        if not stmt:
            raise CircuitSyntaxError("empty statement", lineno)
        m = _QREG_RE.match(stmt)
        if m:
            if n is not None:
                raise CircuitSyntaxError("duplicate qreg declaration", lineno)
            n = int(m.group(1))
            if n < 1:
                raise CircuitSyntaxError("qreg needs at least one qubit", lineno)
            continue
        if n is None:
            raise CircuitSyntaxError("expected 'qreg q[<n>];' before gates", lineno)
        m = _GATE_RE.match(stmt)
        if m is None:
            raise CircuitSyntaxError(f"cannot parse statement {stmt!r}", lineno)
        kind, angle_token, operands = m.groups()
        spec = GATE_KINDS.get(kind)
        if spec is None:
            raise CircuitSyntaxError(f"unknown gate {kind!r}", lineno)
        arity, needs_angle = spec
        if needs_angle and angle_token is None:
            raise CircuitSyntaxError(f"{kind} needs an angle", lineno)
        if not needs_angle and angle_token is not None:
            raise CircuitSyntaxError(f"{kind} takes no angle", lineno)
        targets = []
        for field_ in operands.split(","):
            om = _OPERAND_RE.match(field_.strip())
            if om is None:
                raise CircuitSyntaxError(f"bad operand {field_.strip()!r}", lineno)
            q = int(om.group(1))
            if q >= n:
                raise CircuitSyntaxError(f"qubit q[{q}] out of range (n={n})", lineno)
            targets.append(q)
        if len(targets) != arity:
            raise CircuitSyntaxError(
                f"{kind} takes {arity} qubit(s), got {len(targets)}", lineno
            )
        if len(set(targets)) != len(targets):
            raise CircuitSyntaxError(f"duplicate qubits in {stmt!r}", lineno)
        angle = None
        if angle_token is not None:
            try:
                angle = Angle(angle_token.strip())
            except ValueError as exc:
                raise CircuitSyntaxError(str(exc), lineno) from exc
        gates.append(Gate(kind, tuple(targets), angle))
    if n is None:
        raise CircuitSyntaxError("missing 'qreg q[<n>];'", 1)
    return Circuit(n, tuple(gates))


def emit_circuit(circuit: Circuit) -> str:
    return circuit.text()


# -- benchmark families ------------------------------------------------------------------

GENERATOR_MIN_QUBITS = 2
GENERATOR_MAX_QUBITS = 30

_HIGH_CTX = gmpy2.context(precision=REFERENCE_BITS + 32, round=gmpy2.RoundToNearest)


def _check_n(n: int) -> None:
    if not GENERATOR_MIN_QUBITS <= n <= GENERATOR_MAX_QUBITS:
        raise ValueError(
            f"qubit count must be in [{GENERATOR_MIN_QUBITS}, {GENERATOR_MAX_QUBITS}],"
            f" got {n}"
        )


def gen_dj(n: int, *, h_as_ry: bool = False) -> Circuit:
    """Deutsch-Jozsa with the all-inputs balanced oracle.

    The ancilla (last qubit) is prepared with X then H; the oracle is a CX
    from every input qubit onto the ancilla; a closing H layer returns the
    inputs to the computational basis.  With ``h_as_ry`` the closing layer's
    Hadamards are emitted as Z followed by RY(pi/2) (an equal matrix), which
    introduces cos(pi/4)/sin(pi/4) constants next to the opening layer's
    1/sqrt(2) ones.
    """
    _check_n(n)
    ancilla = n - 1
    gates: list[Gate] = [Gate("x", (ancilla,))]
    gates.extend(Gate("h", (q,)) for q in range(n))
    gates.extend(Gate("cx", (q, ancilla)) for q in range(n - 1))
    for q in range(n - 1):
        if h_as_ry:
            gates.append(Gate("z", (q,)))
            gates.append(Gate("ry", (q,), Angle("pi/2")))
        else:
            gates.append(Gate("h", (q,)))
    return Circuit(n, tuple(gates))


def gen_qpe_exact(n: int, seed: int = 0, phase_bits: int | None = None) -> Circuit:
    """Exact quantum phase estimation.

    The eigenphase is 2*pi*m/2**t with t = n-1 counting bits and m a seeded
    odd integer, so it is exactly representable in the counting register and
    the exact final state is one-hot.  The controlled-phase ladder carries
    the seeded phase (emitted as decimal literals); the inverse QFT
    contributes CP(-pi/2^k) for every k in 1..n-2.
    """
    _check_n(n)
    t = n - 1
    if phase_bits is None:
        phase_bits = t
    if not 1 <= phase_bits <= t:
        raise ValueError(f"phase_bits must be in [1, {t}], got {phase_bits}")
    rng = random.Random(seed)
    m = rng.randrange(1, 1 << phase_bits, 2)
    target = n - 1

    gates: list[Gate] = [Gate("x", (target,))]
    gates.extend(Gate("h", (q,)) for q in range(t))
    two_pi = _HIGH_CTX.mul(_HIGH_CTX.const_pi(), gmpy2.mpfr(2))
    denom = 1 << phase_bits
    for j in range(t):
        num = (m << j) % denom
        if num == 0:
            continue
        # Representative in (-pi, pi]: matches the negative-angle style of
        # the rest of the phase gates.
        if 2 * num > denom:
            num -= denom
        theta = _HIGH_CTX.div(_HIGH_CTX.mul(two_pi, gmpy2.mpfr(num)), gmpy2.mpfr(denom))
        gates.append(Gate("cp", (j, target), Angle.from_value(theta)))
    # Inverse QFT (no terminal swaps).
    for j in range(t - 1, -1, -1):
        for k in range(t - 1, j, -1):
            gates.append(Gate("cp", (k, j), Angle(f"-pi/2^{k - j}")))
        gates.append(Gate("h", (j,)))
    return Circuit(n, tuple(gates))


def gen_wstate(n: int) -> Circuit:
    """W-state preparation: a cascade of controlled RY rotations (decomposed
    into RY/CX) with rotation angles 2*arccos(sqrt(1/(n-k))), followed by a
    CX that shifts the excitation; angles are emitted as finite-precision
    decimal literals.  The exact final state is the n-qubit W state."""
    _check_n(n)
    gates: list[Gate] = [Gate("x", (0,))]
    one = gmpy2.mpfr(1)
    for k in range(n - 1):
        # Half-angle of the controlled RY(2*arccos(sqrt(1/(n-k)))).
        alpha = _HIGH_CTX.acos(_HIGH_CTX.sqrt(_HIGH_CTX.div(one, gmpy2.mpfr(n - k))))
        tok_pos = Angle.from_value(alpha)
        tok_neg = Angle.from_value(_HIGH_CTX.minus(alpha))
        c, tgt = k, k + 1
        gates.append(Gate("ry", (tgt,), tok_pos))
        gates.append(Gate("cx", (c, tgt)))
        gates.append(Gate("ry", (tgt,), tok_neg))
        gates.append(Gate("cx", (c, tgt)))
        gates.append(Gate("cx", (tgt, c)))
    return Circuit(n, tuple(gates))


FAMILIES = {
    "dj": gen_dj,
    "qpeexact": lambda n, seed=0: gen_qpe_exact(n, seed),
    "wstate": lambda n, seed=0: gen_wstate(n),
}


def generate(family: str, n: int, seed: int = 0) -> Circuit:
    if family == "dj":
        return gen_dj(n)
    if family == "qpeexact":
        return gen_qpe_exact(n, seed)
    if family == "wstate":
        return gen_wstate(n)
    raise ValueError(f"unknown family {family!r}; know {sorted(FAMILIES)}")
