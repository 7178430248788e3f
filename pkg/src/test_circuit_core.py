"""Tests for the circuit IR: construction, validation and census."""
import math

import pytest
from hypothesis import given, settings

from circuit_core import (Circuit, ClassicalRegisterDecl, GateCensus, GateKind, Instruction, census,
                          validate)
from conftest import circuits
from errors import CircuitError


def test_bell_census(bell):
    assert census(bell) == GateCensus(n_1q=1, n_2q=1, n_meas=2, n_reset=0, depth=2)
    assert census(bell).n_ops == 4


def test_empty_circuit_census():
    assert census(Circuit.create(3)) == GateCensus()


@pytest.mark.parametrize("k", [1, 2, 5])
def test_resets_count_one_layer_each(k):
    b = Circuit.builder(1).x(0)
    for _ in range(k):
        b.reset(0)
    c = census(b.finish())
    assert c.n_reset == k
    assert c.n_1q == 1
    assert c.depth == k + 1


def test_measure_and_barrier_add_no_depth():
    c = Circuit.builder(2).creg("c", 2).barrier().measure(0, "c", 0).barrier(1).measure(1, "c", 1).finish()
    assert census(c) == GateCensus(n_meas=2)


def test_condx_counts_as_single_qubit_gate_and_waits_for_its_bit():
    c = (Circuit.builder(3).creg("m", 1)
         .h(0).h(0).h(0).measure(0, "m", 0)
         .xif("m", 0, 2)
         .finish())
    got = census(c)
    assert got.n_1q == 4
    assert got.n_meas == 1
    # qubit 2 is idle but the conditional waits for the bit written at layer 3
    assert got.depth == 4


def test_teleportation_census():
    c = (Circuit.builder(3, "teleportation").creg("m", 2).creg("c", 1)
         .u3(math.pi / 3, 0.0, 0.0, 0)
         .h(1).cx(1, 2).cx(0, 1).h(0)
         .measure(0, "m", 0).measure(1, "m", 1)
         .xif("m", 1, 2).h(2).xif("m", 0, 2).h(2)
         .measure(2, "c", 0)
         .finish())
    assert census(c) == GateCensus(n_1q=7, n_2q=2, n_meas=3, n_reset=0, depth=7)


def test_concat_adds_counts_but_not_depth(bell):
    other = Circuit.builder(2).creg("d", 1).x(1).reset(0).measure(1, "d", 0).finish()
    joined, left, right = census(bell.concat(other)), census(bell), census(other)
    assert (joined.n_1q, joined.n_2q, joined.n_meas, joined.n_reset) == (2, 1, 3, 1)
    assert joined.n_ops == left.n_ops + right.n_ops
    assert (left.depth, right.depth, joined.depth) == (2, 1, 3)


def test_valid_circuit_has_no_violations(bell):
    assert validate(bell) == []


@pytest.mark.parametrize("ops,fragment", [
    ([Instruction(GateKind.H, (2,))], "qubit out of range"),
    ([Instruction(GateKind.CX, (0, 0))], "repeated qubit"),
    ([Instruction(GateKind.CX, (0,))], "expects 2 qubit(s)"),
    ([Instruction(GateKind.RZ, (0,))], "expects 1 angle(s)"),
    ([Instruction(GateKind.RZ, (0,), (math.nan,))], "non-finite angle"),
    ([Instruction(GateKind.MEASURE, (0,))], "needs a classical bit"),
    ([Instruction(GateKind.MEASURE, (0,), clbit=("d", 0))], "undeclared register 'd'"),
    ([Instruction(GateKind.MEASURE, (0,), clbit=("c", 1))], "bit out of range"),
    ([Instruction(GateKind.H, (0,), clbit=("c", 0))], "takes no classical bit"),
    ([Instruction(GateKind.BARRIER, ())], "barrier lists no qubits"),
])
def test_validate_reports_op_index(ops, fragment):
    c = Circuit(2, (ClassicalRegisterDecl("c", 1),), (Instruction(GateKind.X, (0,)),) + tuple(ops))
    problems = validate(c)
    assert len(problems) >= 1
    assert problems[0].op_index == 1
    assert fragment in problems[0].message


def test_barrier_always_names_its_qubits():
    with pytest.raises(CircuitError, match="barrier lists no qubits"):
        Circuit.create(2, (), (Instruction(GateKind.BARRIER, ()),))


def test_validate_circuit_level_problems():
    c = Circuit(0, (ClassicalRegisterDecl("c", 1), ClassicalRegisterDecl("c", 2), ClassicalRegisterDecl("z", 0)))
    messages = [p.message for p in validate(c)]
    assert any("width must be >= 1" in m for m in messages)
    assert any("duplicate register 'c'" in m for m in messages)
    assert any("'z' size must be >= 1" in m for m in messages)


def test_create_raises_with_every_violation():
    with pytest.raises(CircuitError) as exc:
        Circuit.create(1, ops=[Instruction(GateKind.H, (3,)), Instruction(GateKind.X, (5,))])
    assert "op 0" in str(exc.value) and "op 1" in str(exc.value)


def test_builder_rejects_undeclared_register():
    with pytest.raises(CircuitError):
        Circuit.builder(1).measure(0, "c", 0).finish()


def test_barrier_defaults_to_every_qubit():
    c = Circuit.builder(3).barrier().finish()
    assert c.ops[0].qubits == (0, 1, 2)


def test_relabel_only_touches_renamed_registers():
    op = Instruction(GateKind.MEASURE, (0,), clbit=("c", 1))
    assert op.relabel({"c": "p0_c"}).clbit == ("p0_c", 1)
    assert op.relabel({"d": "p0_d"}) is op
    h = Instruction(GateKind.H, (0,))
    assert h.relabel({"c": "x"}) is h


def test_concat_merges_registers_and_checks_sizes(bell):
    tail = Circuit.builder(3).creg("c", 2).creg("e", 1).x(2).measure(2, "e", 0).finish()
    joined = bell.concat(tail, label="joined")
    assert joined.width == 3
    assert [r.name for r in joined.cregs] == ["c", "e"]
    assert len(joined.ops) == len(bell.ops) + len(tail.ops)
    assert joined.label == "joined"

    clash = Circuit.builder(1).creg("c", 3).finish()
    with pytest.raises(CircuitError, match="sizes 2 and 3"):
        bell.concat(clash)


def test_structural_equality_ignores_labels_and_tiny_angle_noise():
    a = Circuit.builder(1, "a").rz(0.5, 0).finish()
    b = Circuit.builder(1, "b").rz(0.5 + 1e-12, 0).finish()
    c = Circuit.builder(1, "a").rz(0.5001, 0).finish()
    assert a.structurally_equal(b)
    assert not a.structurally_equal(c)
    assert not a.structurally_equal(a.append(Instruction(GateKind.X, (0,))))


def test_creg_lookup_and_clbit_count(bell):
    assert bell.creg("c") == ClassicalRegisterDecl("c", 2)
    assert bell.creg("missing") is None
    assert bell.n_clbits == 2
    assert bell.with_label("other").label == "other"


def test_gate_kind_arity():
    assert GateKind.CU3.n_qubits == 2 and GateKind.CU3.n_params == 3
    assert GateKind.BARRIER.n_qubits is None
    assert GateKind.CONDX.uses_clbit and not GateKind.RESET.uses_clbit
    assert GateKind.RZ.is_unitary and not GateKind.CONDX.is_unitary


@settings(max_examples=200, deadline=None)
@given(a=circuits(), b=circuits())
def test_gate_counts_add_under_concatenation(a, b):
    # both sides declare c; concat only when sizes agree
    if a.creg("c").size != b.creg("c").size:
        b = Circuit.create(b.width, a.cregs, (op for op in b.ops if op.clbit is None), b.label)
    joined, left, right = census(a.concat(b)), census(a), census(b)
    assert joined.n_ops == left.n_ops + right.n_ops
    assert (joined.n_1q, joined.n_2q, joined.n_meas, joined.n_reset) == \
        (left.n_1q + right.n_1q, left.n_2q + right.n_2q, left.n_meas + right.n_meas, left.n_reset + right.n_reset)
    assert max(left.depth, right.depth) <= joined.depth <= left.depth + right.depth
