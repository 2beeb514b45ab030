"""Gates, gate-matrix DDs, the circuit format, generators, and simulate."""

import random

import gmpy2
import pytest

from deltadd.mtbdd import NodeStore, count_nodes, multiply, to_dense, to_dense_matrix
from deltadd.numerics import Complex, Precision, distance, modulus, parse_angle
from deltadd.quantum import (
    Angle,
    Circuit,
    CircuitSyntaxError,
    Gate,
    base_matrix,
    basis_state,
    emit_circuit,
    gate_matrix,
    gen_dj,
    gen_qpe_exact,
    gen_wstate,
    parse_circuit,
    simulate,
)

from conftest import dense_statevector_oracle, embed_gate_dense, l2_norm, l2_norm_deviation

HI = gmpy2.context(precision=320, round=gmpy2.RoundToNearest)


def _random_gate(rng: random.Random, n: int) -> Gate:
    arities = {"h": 1, "x": 1, "z": 1, "ry": 1, "rz": 1, "p": 1, "cx": 2, "cp": 2, "ccx": 3}
    kind = rng.choice([k for k, a in arities.items() if a <= n])
    targets = tuple(rng.sample(range(n), arities[kind]))
    angle = None
    if kind in ("ry", "rz", "p", "cp"):
        angle = Angle(f"{rng.uniform(-3.14159, 3.14159):.17g}")
    return Gate(kind, targets, angle)


def _random_circuit(rng: random.Random, n: int, m: int) -> Circuit:
    return Circuit(n, tuple(_random_gate(rng, n) for _ in range(m)))


class TestGateDefinitions:
    def test_x_matrix(self):
        p = Precision(53)
        m = base_matrix(Gate("x", (0,)), p)
        assert [float(c.re) for c in m] == [0, 1, 1, 0]

    def test_h_matrix_entries(self):
        p = Precision(53)
        m = base_matrix(Gate("h", (0,)), p)
        s = p.constant("sqrt_half").re
        assert [c.re for c in m] == [s, s, s, p.neg(s)]

    def test_gate_validation(self):
        with pytest.raises(ValueError):
            Gate("h", (0, 1))
        with pytest.raises(ValueError):
            Gate("cx", (1, 1))
        with pytest.raises(ValueError):
            Gate("ry", (0,))                    # missing angle
        with pytest.raises(ValueError):
            Gate("x", (0,), Angle("pi/2"))      # spurious angle
        with pytest.raises(ValueError):
            Gate("bogus", (0,))

    @pytest.mark.parametrize("seed", [1, 2, 3])
    def test_unitarity_at_128_bits(self, seed):
        # Dense U^dagger U on n <= 4 is the identity within 2**-100.
        rng = random.Random(seed)
        n = rng.randint(2, 4)
        gate = _random_gate(rng, n)
        store = NodeStore(128, 0.0)
        rows = to_dense_matrix(store, gate_matrix(store, gate, n))
        dim = 1 << n
        tol = 2.0 ** -100
        for i in range(dim):
            for j in range(dim):
                acc_re = gmpy2.mpfr(0, precision=320)
                acc_im = gmpy2.mpfr(0, precision=320)
                for k in range(dim):
                    a, b = rows[k][i], rows[k][j]   # conj(column i) . column j
                    acc_re = HI.add(acc_re, HI.add(HI.mul(a.re, b.re), HI.mul(a.im, b.im)))
                    acc_im = HI.add(acc_im, HI.sub(HI.mul(a.re, b.im), HI.mul(a.im, b.re)))
                want = 1.0 if i == j else 0.0
                assert abs(float(acc_re) - want) <= tol
                assert abs(float(acc_im)) <= tol


class TestGateMatrixDD:
    def test_x_on_single_qubit(self):
        s = NodeStore(53, 0.0)
        rows = to_dense_matrix(s, gate_matrix(s, Gate("x", (0,)), 1))
        assert [[float(c.re) for c in row] for row in rows] == [[0, 1], [1, 0]]

    def test_embedding_matches_dense_oracle(self, rng):
        s = NodeStore(53, 0.0)
        for _ in range(12):
            n = rng.randint(2, 4)
            gate = _random_gate(rng, n)
            got = to_dense(s, gate_matrix(s, gate, n)) if False else None
            m = gate_matrix(s, gate, n)
            flat_rows = to_dense_matrix(s, m)
            want = embed_gate_dense(s.precision, gate, n)
            dim = 1 << n
            for i in range(dim):
                for j in range(dim):
                    assert flat_rows[i][j] == want[i * dim + j], (gate, i, j)

    def test_node_count_linear_in_untouched_qubits(self):
        # Identity padding adds a constant number of nodes per qubit.
        counts = []
        for n in range(2, 11):
            s = NodeStore(53, 0.0)
            counts.append(count_nodes(s, gate_matrix(s, Gate("h", (0,)), n)))
        diffs = {b - a for a, b in zip(counts, counts[1:])}
        assert len(diffs) == 1

    def test_invalid_targets(self):
        s = NodeStore(53, 0.0)
        with pytest.raises(ValueError):
            gate_matrix(s, Gate("h", (3,)), 3)


class TestSimulate:
    def test_empty_circuit_is_e0(self):
        for n in (1, 3, 6):
            s = NodeStore(53, 0.0)
            state = simulate(s, Circuit(n))
            dense = to_dense(s, state)
            assert float(dense[0].re) == 1
            assert all(not c.re and not c.im for c in dense[1:])
            # Chain to leaf 1 plus the zero leaf.
            assert count_nodes(s, state) == n + 2

    def test_hadamard_twice_near_identity(self):
        s = NodeStore(53, 0.0)
        state = simulate(s, Circuit(1, (Gate("h", (0,)), Gate("h", (0,)))))
        d = to_dense(s, state)
        one = s.precision.complex(1)
        assert float(distance(d[0], one)) <= 2 * 2.0 ** -53 * 2
        assert float(modulus(d[1])) <= 4 * 2.0 ** -53

    def test_matches_dense_statevector_oracle(self, rng):
        # Bit-exact against the dense gate-by-gate oracle for n <= 5, delta=0.
        for bits in (24, 53):
            for _ in range(6):
                n = rng.randint(1, 5)
                circuit = _random_circuit(rng, n, rng.randint(1, 12))
                s = NodeStore(bits, 0.0)
                got = to_dense(s, simulate(s, circuit))
                want = dense_statevector_oracle(s.precision, circuit, n)
                assert got == want, circuit.text()

    def test_norm_preserved_at_128(self):
        for builder, n in ((gen_dj, 6), (gen_qpe_exact, 6), (gen_wstate, 7)):
            s = NodeStore(128, 0.0)
            state = simulate(s, builder(n))
            assert l2_norm_deviation(to_dense(s, state)) <= 2.0 ** -90

    def test_peak_nodes_recorded(self):
        s = NodeStore(53, 0.0)
        simulate(s, gen_wstate(6))
        assert s.peak_nodes >= 8


class TestCircuitFormat:
    def test_spec_example(self):
        c = parse_circuit("qreg q[2]; h q[0]; cx q[0],q[1];")
        assert c.n == 2
        assert c.gates == (Gate("h", (0,)), Gate("cx", (0, 1)))

    def test_decimal_angle(self):
        c = parse_circuit("qreg q[1];\nry(1.910633236249019) q[0];")
        assert c.gates[0].angle.token == "1.910633236249019"

    def test_comments_and_blank_lines(self):
        text = """
        // header comment
        qreg q[2];

        h q[0];   // trailing comment
        cp(-pi/2^3) q[0],q[1];
        """
        c = parse_circuit(text)
        assert len(c.gates) == 2
        assert c.gates[1].angle.token == "-pi/2^3"

    def test_round_trip_random_circuits(self, rng):
        for _ in range(20):
            n = rng.randint(2, 6)
            circuit = _random_circuit(rng, n, rng.randint(0, 15))
            assert parse_circuit(emit_circuit(circuit)) == circuit

    def test_round_trip_generated_families(self):
        for circuit in (gen_dj(5), gen_qpe_exact(5, seed=9), gen_wstate(5),
                        gen_dj(4, h_as_ry=True)):
            assert parse_circuit(emit_circuit(circuit)) == circuit

    @pytest.mark.parametrize("text,lineno,fragment", [
        ("h q[0];", 1, "qreg"),
        ("qreg q[2];\nfoo q[0];", 2, "unknown gate"),
        ("qreg q[2];\nh q[5];", 2, "out of range"),
        ("qreg q[2];\nh q[0]", 2, "terminated"),
        ("qreg q[2];\ncx q[0],q[0];", 2, "duplicate"),
        ("qreg q[2];\nh(pi/2) q[0];", 2, "takes no angle"),
        ("qreg q[2];\nry q[0];", 2, "needs an angle"),
        ("qreg q[2];\nry(pi) q[0];", 2, "invalid angle"),
        ("qreg q[2];\nqreg q[3];", 2, "duplicate qreg"),
        ("qreg q[2];\ncx q[0] q[1];", 2, ""),
    ])
    def test_syntax_errors_carry_line_numbers(self, text, lineno, fragment):
        with pytest.raises(CircuitSyntaxError) as err:
            parse_circuit(text)
        assert err.value.line == lineno
        assert fragment in str(err.value)


class TestGenerators:
    def test_dj_gate_multiset(self):
        kinds = {g.kind for g in gen_dj(2).gates}
        assert kinds <= {"h", "x", "cx"}

    def test_dj_h_as_ry_constants(self):
        kinds = {g.kind for g in gen_dj(4, h_as_ry=True).gates}
        assert "ry" in kinds and "z" in kinds and "h" in kinds

    def test_qpe_contains_inverse_qft_ladder(self):
        n = 8
        tokens = {g.angle.token for g in gen_qpe_exact(n).gates
                  if g.kind == "cp" and g.angle.token.startswith("-pi")}
        assert tokens == {f"-pi/2^{k}" for k in range(1, n - 1)}

    def test_qpe_seed_determinism(self):
        assert gen_qpe_exact(7, seed=4) == gen_qpe_exact(7, seed=4)
        assert gen_qpe_exact(7, seed=4) != gen_qpe_exact(7, seed=5)

    def test_qpe_final_state_one_hot(self):
        s = NodeStore(128, 0.0)
        d = to_dense(s, simulate(s, gen_qpe_exact(6, seed=2)))
        mags = sorted((float(modulus(c)) for c in d), reverse=True)
        assert abs(mags[0] - 1.0) <= 1e-30
        assert mags[1] <= 1e-30

    def test_wstate_exact_form(self):
        # Unit norm, support exactly the n one-hot indices, all amplitudes
        # within 2**-100 of 1/sqrt(n) at 128 bits.
        for n in (2, 5, 10):
            s = NodeStore(128, 0.0)
            d = to_dense(s, simulate(s, gen_wstate(n)))
            assert l2_norm_deviation(d) <= 2.0 ** -90
            target = HI.sqrt(HI.div(gmpy2.mpfr(1), gmpy2.mpfr(n)))
            support = 0
            for i, amp in enumerate(d):
                m = modulus(amp, 320)
                if bin(i).count("1") == 1:
                    support += 1
                    assert abs(float(HI.sub(m, target))) <= 2.0 ** -100
                else:
                    assert float(m) <= 2.0 ** -100
            assert support == n

    def test_wstate_angles_are_decimal_literals(self):
        for g in gen_wstate(6).gates:
            if g.kind == "ry":
                float(g.angle.token)   # plain decimal, no pi forms

    def test_qubit_count_validation(self):
        for gen in (gen_dj, gen_wstate):
            with pytest.raises(ValueError):
                gen(1)
            with pytest.raises(ValueError):
                gen(31)
        with pytest.raises(ValueError):
            gen_qpe_exact(1)
