"""
Circuit intermediate representation shared by every resetlab module.

Contains:
    - GateKind: the ten instruction kinds (unitaries, Measure, Reset, CondX, Barrier)
    - Instruction: one immutable op (kind, qubits, params, classical bit)
    - ClassicalRegisterDecl / Circuit: the unit that is parsed, simulated, spliced and billed
    - census / validate: the structural queries billing and detectors rely on
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, List, Optional, Sequence, Tuple

from errors import CircuitError


class GateKind(Enum):
    H = "h"
    X = "x"
    RZ = "rz"
    U3 = "u3"
    CX = "cx"
    CU3 = "cu3"
    MEASURE = "measure"
    RESET = "reset"
    CONDX = "xif"
    BARRIER = "barrier"

    @property
    def n_qubits(self) -> Optional[int]:
        """Fixed qubit arity, None for barriers."""
        if self is GateKind.BARRIER:
            return None
        return 2 if self in (GateKind.CX, GateKind.CU3) else 1

    @property
    def n_params(self) -> int:
        if self is GateKind.RZ:
            return 1
        return 3 if self in (GateKind.U3, GateKind.CU3) else 0

    @property
    def is_unitary(self) -> bool:
        return self in _UNITARY

    @property
    def uses_clbit(self) -> bool:
        return self in (GateKind.MEASURE, GateKind.CONDX)


_UNITARY = frozenset({GateKind.H, GateKind.X, GateKind.RZ, GateKind.U3, GateKind.CX, GateKind.CU3})
# CondX executes one X, so it bills and counts depth like a single-qubit gate
_ONE_QUBIT = frozenset({GateKind.H, GateKind.X, GateKind.RZ, GateKind.U3, GateKind.CONDX})
_TWO_QUBIT = frozenset({GateKind.CX, GateKind.CU3})


@dataclass(frozen=True)
class Instruction:
    kind: GateKind
    qubits: Tuple[int, ...]
    params: Tuple[float, ...] = ()
    clbit: Optional[Tuple[str, int]] = None  # Measure destination or CondX condition

    def relabel(self, rename: dict) -> "Instruction":
        if self.clbit is None or self.clbit[0] not in rename:
            return self
        return replace(self, clbit=(rename[self.clbit[0]], self.clbit[1]))


@dataclass(frozen=True)
class ClassicalRegisterDecl:
    name: str
    size: int


@dataclass(frozen=True)
class GateCensus:
    n_1q: int = 0
    n_2q: int = 0
    n_meas: int = 0
    n_reset: int = 0
    depth: int = 0

    @property
    def n_ops(self) -> int:
        return self.n_1q + self.n_2q + self.n_meas + self.n_reset


@dataclass(frozen=True)
class Violation:
    op_index: Optional[int]
    message: str

    def __str__(self) -> str:
        return self.message


@dataclass(frozen=True)
class Circuit:
    """Immutable circuit: width, classical registers, ordered ops and a free-form label."""

    width: int
    cregs: Tuple[ClassicalRegisterDecl, ...] = ()
    ops: Tuple[Instruction, ...] = ()
    label: str = ""

    @classmethod
    def create(cls, width: int, cregs: Iterable[ClassicalRegisterDecl] = (),
               ops: Iterable[Instruction] = (), label: str = "") -> "Circuit":
        """Build a circuit and raise CircuitError listing every violation."""
        circuit = cls(width, tuple(cregs), tuple(ops), label)
        problems = validate(circuit)
        if problems:
            raise CircuitError("; ".join(str(p) for p in problems))
        return circuit

    @staticmethod
    def builder(width: int, label: str = "") -> "CircuitBuilder":
        return CircuitBuilder(width, label)

    @property
    def n_clbits(self) -> int:
        return sum(r.size for r in self.cregs)

    def creg(self, name: str) -> Optional[ClassicalRegisterDecl]:
        for reg in self.cregs:
            if reg.name == name:
                return reg
        return None

    def with_label(self, label: str) -> "Circuit":
        return replace(self, label=label)

    def append(self, op: Instruction) -> "Circuit":
        return replace(self, ops=self.ops + (op,))

    def concat(self, other: "Circuit", label: Optional[str] = None) -> "Circuit":
        """self ++ other on max(width); registers shared by name must agree on size."""
        cregs = list(self.cregs)
        for reg in other.cregs:
            mine = self.creg(reg.name)
            if mine is None:
                cregs.append(reg)
            elif mine.size != reg.size:
                raise CircuitError(f"register '{reg.name}' declared with sizes {mine.size} and {reg.size}")
        return Circuit(
            width=max(self.width, other.width),
            cregs=tuple(cregs),
            ops=self.ops + other.ops,
            label=self.label if label is None else label,
        )

    def structurally_equal(self, other: "Circuit", tol: float = 1e-9) -> bool:
        """Same width, registers and op stream; angles compared within tol, labels ignored."""
        if self.width != other.width or self.cregs != other.cregs or len(self.ops) != len(other.ops):
            return False
        for a, b in zip(self.ops, other.ops):
            if (a.kind, a.qubits, a.clbit) != (b.kind, b.qubits, b.clbit):
                return False
            if len(a.params) != len(b.params):
                return False
            if any(not math.isclose(x, y, rel_tol=0.0, abs_tol=tol) for x, y in zip(a.params, b.params)):
                return False
        return True


class CircuitBuilder:
    """Fluent builder; finish() validates."""

    def __init__(self, width: int, label: str = ""):
        self.width = width
        self.label = label
        self.cregs: List[ClassicalRegisterDecl] = []
        self.ops: List[Instruction] = []

    def creg(self, name: str, size: int) -> "CircuitBuilder":
        self.cregs.append(ClassicalRegisterDecl(name, size))
        return self

    def _add(self, kind: GateKind, qubits: Sequence[int], params: Sequence[float] = (),
             clbit: Optional[Tuple[str, int]] = None) -> "CircuitBuilder":
        self.ops.append(Instruction(kind, tuple(qubits), tuple(float(p) for p in params), clbit))
        return self

    def h(self, q: int) -> "CircuitBuilder": return self._add(GateKind.H, (q,))
    def x(self, q: int) -> "CircuitBuilder": return self._add(GateKind.X, (q,))
    def rz(self, theta: float, q: int) -> "CircuitBuilder": return self._add(GateKind.RZ, (q,), (theta,))
    def cx(self, c: int, t: int) -> "CircuitBuilder": return self._add(GateKind.CX, (c, t))
    def reset(self, q: int) -> "CircuitBuilder": return self._add(GateKind.RESET, (q,))

    def u3(self, theta: float, phi: float, lam: float, q: int) -> "CircuitBuilder":
        return self._add(GateKind.U3, (q,), (theta, phi, lam))

    def cu3(self, theta: float, phi: float, lam: float, c: int, t: int) -> "CircuitBuilder":
        return self._add(GateKind.CU3, (c, t), (theta, phi, lam))

    def cphase(self, lam: float, c: int, t: int) -> "CircuitBuilder":
        """Controlled phase diag(1, 1, 1, e^{i lam}) as CU3(0, 0, lam)."""
        return self.cu3(0.0, 0.0, lam, c, t)

    def measure(self, q: int, reg: str, bit: int) -> "CircuitBuilder":
        return self._add(GateKind.MEASURE, (q,), clbit=(reg, bit))

    def xif(self, reg: str, bit: int, q: int) -> "CircuitBuilder":
        return self._add(GateKind.CONDX, (q,), clbit=(reg, bit))

    def barrier(self, *qubits: int) -> "CircuitBuilder":
        return self._add(GateKind.BARRIER, qubits or tuple(range(self.width)))

    def extend(self, ops: Iterable[Instruction]) -> "CircuitBuilder":
        self.ops.extend(ops)
        return self

    def finish(self) -> Circuit:
        return Circuit.create(self.width, self.cregs, self.ops, self.label)


def validate(c: Circuit) -> List[Violation]:
    """Every invariant violation with its op index; an empty list means ok."""
    problems: List[Violation] = []
    if c.width < 1:
        problems.append(Violation(None, f"width must be >= 1, got {c.width}"))

    sizes = {}
    for reg in c.cregs:
        if reg.name in sizes:
            problems.append(Violation(None, f"duplicate register '{reg.name}'"))
        if reg.size < 1:
            problems.append(Violation(None, f"register '{reg.name}' size must be >= 1"))
        sizes.setdefault(reg.name, reg.size)

    for i, op in enumerate(c.ops):
        arity = op.kind.n_qubits
        if arity is not None and len(op.qubits) != arity:
            problems.append(Violation(i, f"{op.kind.value} expects {arity} qubit(s) at op {i}"))
        elif arity is None and not op.qubits:
            problems.append(Violation(i, f"barrier lists no qubits at op {i}"))
        for q in op.qubits:
            if not 0 <= q < c.width:
                problems.append(Violation(i, f"qubit out of range at op {i}: {q} (width {c.width})"))
        if len(set(op.qubits)) != len(op.qubits):
            problems.append(Violation(i, f"repeated qubit at op {i}"))
        if len(op.params) != op.kind.n_params:
            problems.append(Violation(i, f"{op.kind.value} expects {op.kind.n_params} angle(s) at op {i}"))
        if any(not math.isfinite(p) for p in op.params):
            problems.append(Violation(i, f"non-finite angle at op {i}"))
        if op.kind.uses_clbit:
            if op.clbit is None:
                problems.append(Violation(i, f"{op.kind.value} needs a classical bit at op {i}"))
            elif op.clbit[0] not in sizes:
                problems.append(Violation(i, f"undeclared register '{op.clbit[0]}' at op {i}"))
            elif not 0 <= op.clbit[1] < sizes[op.clbit[0]]:
                problems.append(Violation(i, f"bit out of range at op {i}: {op.clbit[0]}[{op.clbit[1]}]"))
        elif op.clbit is not None:
            problems.append(Violation(i, f"{op.kind.value} takes no classical bit at op {i}"))
    return problems


def census(c: Circuit) -> GateCensus:
    """Gate counts and depth.

    Unitaries, CondX and Reset occupy one layer each; Measure and Barrier occupy none
    (a Measure hands its qubit's layer to the bit it writes, so a later CondX waits for it).
    """
    n_1q = n_2q = n_meas = n_reset = 0
    qubit_layer = [0] * max(c.width, 0)
    bit_layer = {}

    for op in c.ops:
        kind = op.kind
        if kind is GateKind.BARRIER:
            continue
        if kind is GateKind.MEASURE:
            n_meas += 1
            bit_layer[op.clbit] = qubit_layer[op.qubits[0]]
            continue

        if kind in _ONE_QUBIT:
            n_1q += 1
        elif kind in _TWO_QUBIT:
            n_2q += 1
        elif kind is GateKind.RESET:
            n_reset += 1

        start = max(qubit_layer[q] for q in op.qubits)
        if kind is GateKind.CONDX:
            start = max(start, bit_layer.get(op.clbit, 0))
        for q in op.qubits:
            qubit_layer[q] = start + 1

    return GateCensus(n_1q, n_2q, n_meas, n_reset, max(qubit_layer, default=0))
