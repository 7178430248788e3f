"""
Parser and serializer for the line-oriented `.qct` circuit format.

    qubits 2
    creg c 2
    h 0
    cx 0 1
    measure 0 -> c[0]
    measure 1 -> c[1]

One instruction per line, '#' starts a comment, blank lines are skipped,
angles are radians. LF or CRLF on input, LF on output.
"""
from __future__ import annotations

import logging
import math
import re
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from circuit_core import Circuit, ClassicalRegisterDecl, GateKind, Instruction, validate
from errors import ParseError

logger = logging.getLogger(__name__)

_NAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_BIT_REF = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\[([0-9]+)\]$")

# mnemonic -> (kind, number of angles, number of qubits)
_SIMPLE = {
    "h": (GateKind.H, 0, 1),
    "x": (GateKind.X, 0, 1),
    "rz": (GateKind.RZ, 1, 1),
    "u3": (GateKind.U3, 3, 1),
    "cx": (GateKind.CX, 0, 2),
    "cu3": (GateKind.CU3, 3, 2),
    "reset": (GateKind.RESET, 0, 1),
}


class _LineReader:
    """Token access for one source line with column tracking."""

    def __init__(self, number: int, text: str):
        self.number = number
        self.text = text
        self.tokens: List[Tuple[str, int]] = [(m.group(0), m.start() + 1) for m in re.finditer(r"\S+", text)]

    def fail(self, message: str, index: Optional[int] = None) -> ParseError:
        if index is not None and index < len(self.tokens):
            token, column = self.tokens[index]
            return ParseError(self.number, message, column, token)
        column = len(self.text.rstrip()) + 1
        return ParseError(self.number, message, column)

    def expect_count(self, count: int, usage: str) -> None:
        if len(self.tokens) != count:
            index = count if len(self.tokens) > count else None
            raise self.fail(f"expected `{usage}`", index)

    def integer(self, index: int, what: str) -> int:
        token = self.tokens[index][0]
        if not (token.isascii() and token.isdigit()):
            raise self.fail(f"{what} must be a non-negative integer", index)
        return int(token)

    def angle(self, index: int) -> float:
        token = self.tokens[index][0]
        try:
            value = float(token)
        except ValueError:
            raise self.fail("angle must be a real number", index) from None
        if not math.isfinite(value):
            raise self.fail("angle must be finite", index)
        return value


def parse(text: str, label: str = "") -> Circuit:
    """Parse circuit text; every failure is a ParseError naming the first bad line."""
    width: Optional[int] = None
    cregs: List[ClassicalRegisterDecl] = []
    sizes: Dict[str, int] = {}
    ops: List[Instruction] = []

    for number, raw in enumerate(text.replace("\r\n", "\n").split("\n"), start=1):
        line = _LineReader(number, raw.split("#", 1)[0].rstrip("\r"))
        if not line.tokens:
            continue
        mnemonic = line.tokens[0][0].lower()

        if width is None:
            if mnemonic != "qubits":
                raise line.fail("circuit must start with `qubits N`", 0)
            line.expect_count(2, "qubits INT")
            width = line.integer(1, "qubit count")
            if width < 1:
                raise line.fail("qubit count must be >= 1", 1)
            continue

        if mnemonic == "qubits":
            raise line.fail("duplicate `qubits` declaration", 0)

        if mnemonic == "creg":
            if ops:
                raise line.fail("`creg` must precede instructions", 0)
            line.expect_count(3, "creg NAME INT")
            name = line.tokens[1][0]
            if not _NAME.match(name):
                raise line.fail("invalid register name", 1)
            if name in sizes:
                raise line.fail(f"duplicate register '{name}'", 1)
            size = line.integer(2, "register size")
            if size < 1:
                raise line.fail("register size must be >= 1", 2)
            sizes[name] = size
            cregs.append(ClassicalRegisterDecl(name, size))
            continue

        ops.append(_parse_instruction(line, mnemonic, width, sizes))

    if width is None:
        raise ParseError(1, "missing `qubits N` declaration")

    circuit = Circuit(width, tuple(cregs), tuple(ops), label)
    problems = validate(circuit)
    if problems:
        # unreachable for input that passed the checks above
        raise ParseError(1, str(problems[0]))
    logger.debug(f"Parsed circuit '{label}': width={width}, {len(ops)} ops")
    return circuit


def _qubit(line: _LineReader, index: int, width: int) -> int:
    q = line.integer(index, "qubit index")
    if q >= width:
        raise line.fail("qubit out of range", index)
    return q


def _bit_ref(line: _LineReader, index: int, sizes: Dict[str, int]) -> Tuple[str, int]:
    match = _BIT_REF.match(line.tokens[index][0])
    if not match:
        raise line.fail("expected NAME[INT]", index)
    name, bit = match.group(1), int(match.group(2))
    if name not in sizes:
        raise line.fail(f"undeclared register '{name}'", index)
    if bit >= sizes[name]:
        raise line.fail(f"bit out of range for register '{name}'", index)
    return name, bit


def _parse_instruction(line: _LineReader, mnemonic: str, width: int, sizes: Dict[str, int]) -> Instruction:
    if mnemonic in _SIMPLE:
        kind, n_angles, n_qubits = _SIMPLE[mnemonic]
        usage = " ".join([mnemonic] + ["FLOAT"] * n_angles + ["Q"] * n_qubits)
        line.expect_count(1 + n_angles + n_qubits, usage)
        params = tuple(line.angle(1 + i) for i in range(n_angles))
        qubits = tuple(_qubit(line, 1 + n_angles + i, width) for i in range(n_qubits))
        if len(set(qubits)) != len(qubits):
            raise line.fail("control and target must differ", 1 + n_angles + 1)
        return Instruction(kind, qubits, params)

    if mnemonic == "measure":
        line.expect_count(4, "measure Q -> NAME[INT]")
        q = _qubit(line, 1, width)
        if line.tokens[2][0] != "->":
            raise line.fail("expected `->`", 2)
        return Instruction(GateKind.MEASURE, (q,), clbit=_bit_ref(line, 3, sizes))

    if mnemonic == "xif":
        line.expect_count(3, "xif NAME[INT] Q")
        ref = _bit_ref(line, 1, sizes)
        return Instruction(GateKind.CONDX, (_qubit(line, 2, width),), clbit=ref)

    if mnemonic == "barrier":
        qubits = tuple(_qubit(line, i, width) for i in range(1, len(line.tokens)))
        if len(set(qubits)) != len(qubits):
            raise line.fail("repeated qubit in barrier")
        return Instruction(GateKind.BARRIER, qubits or tuple(range(width)))

    raise line.fail(f"unknown instruction '{line.tokens[0][0]}'", 0)


def _angle(value: float) -> str:
    return f"{value:.12f}"


def serialize(c: Circuit) -> str:
    """Circuit text for a valid circuit; parse(serialize(c)) is structurally equal to c."""
    lines = [f"qubits {c.width}"]
    lines.extend(f"creg {reg.name} {reg.size}" for reg in c.cregs)
    for op in c.ops:
        kind = op.kind
        if kind is GateKind.MEASURE:
            lines.append(f"measure {op.qubits[0]} -> {op.clbit[0]}[{op.clbit[1]}]")
        elif kind is GateKind.CONDX:
            lines.append(f"xif {op.clbit[0]}[{op.clbit[1]}] {op.qubits[0]}")
        else:
            fields = [kind.value] + [_angle(p) for p in op.params] + [str(q) for q in op.qubits]
            lines.append(" ".join(fields))
    return "\n".join(lines) + "\n"


def load(path: Union[str, Path]) -> Circuit:
    """Parse a `.qct` file; the file stem becomes the circuit label."""
    path = Path(path)
    raw = path.read_bytes()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        line_start = raw.rfind(b"\n", 0, e.start) + 1
        raise ParseError(raw.count(b"\n", 0, e.start) + 1, "file is not valid UTF-8",
                         column=e.start - line_start + 1, token=raw[e.start:e.end].hex()) from e
    return parse(text, label=path.stem)


def dump(c: Circuit, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_text(serialize(c), encoding="utf-8", newline="\n")
    return path
