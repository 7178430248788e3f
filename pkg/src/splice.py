"""
The reset-splice attack: many circuits in one billable shot.

Parts are concatenated in order with k rounds of resets on EVERY composite qubit
between consecutive parts (none before the first or after the last). Each part's
registers are renamed `p<i>_<name>` so the composite record can be split back
into one counts table per part.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

from circuit_core import Circuit, ClassicalRegisterDecl, GateKind, Instruction, validate
from config import config
from errors import SpliceError
from sim_engine import CountsTable

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SpliceSpec:
    parts: Tuple[Circuit, ...]
    k_resets: int = config.default_resets
    prefixes: Optional[Tuple[str, ...]] = None
    label: str = ""

    def prefix(self, i: int) -> str:
        return self.prefixes[i] if self.prefixes is not None else f"p{i}_"


@dataclass(frozen=True)
class PartSpan:
    """Where one part's registers landed in the composite record."""

    index: int
    label: str
    prefix: str
    registers: Tuple[Tuple[str, int, int], ...]  # (composite name, start bit, stop bit)

    @property
    def cregs(self) -> Tuple[str, ...]:
        return tuple(name for name, _, _ in self.registers)

    @property
    def spans(self) -> Tuple[Tuple[int, int], ...]:
        return tuple((start, stop) for _, start, stop in self.registers)

    @property
    def n_bits(self) -> int:
        return sum(stop - start for _, start, stop in self.registers)

    def original_layout(self) -> Tuple[Tuple[str, int], ...]:
        return tuple((_strip(name, self.prefix), stop - start) for name, start, stop in self.registers)


def _strip(name: str, prefix: str) -> str:
    return name[len(prefix):] if prefix and name.startswith(prefix) else name


@dataclass(frozen=True)
class SpliceMap:
    parts: Tuple[PartSpan, ...]
    total_bits: int

    @property
    def effective_shots_factor(self) -> int:
        return len(self.parts)

    def effective_shots(self, shots: int) -> int:
        return shots * len(self.parts)


def _check_spec(spec: SpliceSpec) -> None:
    if not spec.parts:
        raise SpliceError("splice needs at least one part")
    if spec.k_resets < 0:
        raise SpliceError(f"k_resets must be >= 0, got {spec.k_resets}")
    if spec.prefixes is not None and len(spec.prefixes) != len(spec.parts):
        raise SpliceError(f"{len(spec.prefixes)} prefixes for {len(spec.parts)} parts")
    for i, part in enumerate(spec.parts):
        problems = validate(part)
        if problems:
            raise SpliceError(f"part {i} ('{part.label}') is invalid: {problems[0]}")
        # a part of only resets and barriers would fuse with the separators around it
        if all(op.kind in (GateKind.RESET, GateKind.BARRIER) for op in part.ops):
            raise SpliceError(f"part {i} ('{part.label}') has no ops besides resets and barriers")


def _layout_spans(index: int, label: str, prefix: str, cregs: Sequence[ClassicalRegisterDecl],
                  offset: int) -> Tuple[PartSpan, int]:
    registers = []
    for reg in cregs:
        registers.append((reg.name, offset, offset + reg.size))
        offset += reg.size
    return PartSpan(index, label, prefix, tuple(registers)), offset


def splice(spec: SpliceSpec) -> Tuple[Circuit, SpliceMap]:
    """Composite circuit plus the map that splits its record back into parts."""
    _check_spec(spec)

    if len(spec.parts) == 1:
        part = spec.parts[0]
        span, total = _layout_spans(0, part.label, "", part.cregs, 0)
        return part, SpliceMap((span,), total)

    width = max(part.width for part in spec.parts)
    separator = tuple(
        Instruction(GateKind.RESET, (q,)) for _ in range(spec.k_resets) for q in range(width)
    )

    cregs: List[ClassicalRegisterDecl] = []
    ops: List[Instruction] = []
    spans: List[PartSpan] = []
    seen: Dict[str, int] = {}
    offset = 0

    for i, part in enumerate(spec.parts):
        prefix = spec.prefix(i)
        rename = {reg.name: prefix + reg.name for reg in part.cregs}
        renamed = [ClassicalRegisterDecl(rename[reg.name], reg.size) for reg in part.cregs]
        for reg in renamed:
            if reg.name in seen:
                raise SpliceError(f"duplicate register '{reg.name}' after relabeling (parts {seen[reg.name]} and {i})")
            seen[reg.name] = i
        cregs.extend(renamed)

        if i > 0:
            ops.extend(separator)
        ops.extend(op.relabel(rename) for op in part.ops)

        span, offset = _layout_spans(i, part.label, prefix, renamed, offset)
        spans.append(span)

    label = spec.label or f"splice{len(spec.parts)}_k{spec.k_resets}"
    composite = Circuit(width, tuple(cregs), tuple(ops), label)
    logger.info(f"Spliced {len(spec.parts)} parts with k={spec.k_resets}: width={width}, "
                f"{len(separator) * (len(spec.parts) - 1)} separator resets")
    return composite, SpliceMap(tuple(spans), offset)


def splice_copies(part: Circuit, copies: int, k_resets: int = config.default_resets) -> Tuple[Circuit, SpliceMap]:
    """The repetition attack: `copies` identical parts in one shot."""
    if copies < 1:
        raise SpliceError(f"copies must be >= 1, got {copies}")
    return splice(SpliceSpec((part,) * copies, k_resets, label=f"{part.label or 'part'}x{copies}_k{k_resets}"))


def split_counts(counts: CountsTable, splice_map: SpliceMap) -> List[CountsTable]:
    """One table per part, each marginalising the composite record onto that part's bits."""
    if counts.counts and counts.width != splice_map.total_bits:
        raise SpliceError(f"counts have {counts.width} bits, map expects {splice_map.total_bits}")
    return [counts.project(part.spans, part.original_layout()) for part in splice_map.parts]


def format_map(splice_map: SpliceMap) -> str:
    """Sidecar text: PART_INDEX<TAB>LABEL<TAB>name=start:stop,..."""
    lines = []
    for part in splice_map.parts:
        spans = ",".join(f"{name}={start}:{stop}" for name, start, stop in part.registers)
        label = part.label.replace("\t", " ") or "-"
        lines.append(f"{part.index}\t{label}\t{spans}")
    return "\n".join(lines) + "\n"


def parse_map(text: str) -> SpliceMap:
    parts, total = [], 0
    for number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            index, label, span_list = line.split("\t")
            registers = []
            for item in filter(None, span_list.split(",")):
                name, bits = item.split("=")
                start, stop = bits.split(":")
                registers.append((name, int(start), int(stop)))
        except ValueError:
            raise SpliceError(f"map line {number}: expected PART_INDEX<TAB>LABEL<TAB>BITSPAN_LIST") from None
        prefix = f"p{int(index)}_"
        if not all(name.startswith(prefix) for name, _, _ in registers):
            prefix = ""
        parts.append(PartSpan(int(index), "" if label == "-" else label, prefix, tuple(registers)))
        total = max([total] + [stop for _, _, stop in registers])
    return SpliceMap(tuple(parts), total)


def write_map(splice_map: SpliceMap, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_text(format_map(splice_map), encoding="utf-8", newline="\n")
    return path


def read_map(path: Union[str, Path]) -> SpliceMap:
    return parse_map(Path(path).read_text(encoding="utf-8"))
