"""
Rule-based screening of submitted circuits for reset-splice abuse.

Three checks, all on the instruction stream (no state analysis):
- a window of resets that touches every qubit of the circuit (a "cut"),
- segments between cuts that are the same circuit up to register names,
- a billed amount far below what per-gate pricing would charge.

Circuits that return their ancillas to |0> by uncomputation instead of Reset
ops pass all three; the checks are heuristics, not a proof of honest use.
"""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from decimal import Decimal
from enum import Enum
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from billing import Money, PerGate, PricingModel, TaskReceipt, price
from circuit_core import Circuit, GateKind, census
from config import config
from errors import GuardrailError

logger = logging.getLogger(__name__)


class FindingKind(Enum):
    FULL_RESET_CUT = "FullResetCut"
    REPEATED_SEGMENT = "RepeatedSegment"
    UNDERPRICED_TASK = "UnderpricedTask"


@dataclass(frozen=True)
class AbuseFinding:
    kind: FindingKind
    span: Tuple[int, int]  # half-open op indices
    detail: str
    segments: int = 0

    def to_line(self) -> str:
        return f"{self.kind.value}\t{self.span[0]}-{self.span[1]}\t{self.detail}"


def quote_per_gate(c: Circuit, model: PricingModel) -> Money:
    """Pre-execution quote: what the circuit costs under per-gate pricing."""
    if not isinstance(model, PerGate):
        raise GuardrailError(f"per-gate quote needs a per_gate model, got {model.kind}")
    return price(model, TaskReceipt(shots=1, census=census(c)))


def _reset_windows(c: Circuit) -> List[Tuple[int, int, int]]:
    """Maximal runs of Reset ops (barriers allowed inside) covering every qubit: (start, stop, n_resets)."""
    windows = []
    everyone = set(range(c.width))
    i, n_ops = 0, len(c.ops)
    while i < n_ops:
        if c.ops[i].kind is not GateKind.RESET:
            i += 1
            continue
        start, touched, n_resets, stop = i, set(), 0, i
        while i < n_ops and c.ops[i].kind in (GateKind.RESET, GateKind.BARRIER):
            if c.ops[i].kind is GateKind.RESET:
                touched.update(c.ops[i].qubits)
                n_resets += 1
                stop = i + 1
            i += 1
        if touched == everyone:
            windows.append((start, stop, n_resets))
    return windows


def _has_work(c: Circuit, start: int, stop: int) -> bool:
    return any(op.kind is not GateKind.BARRIER for op in c.ops[start:stop])


def detect_full_reset_cuts(c: Circuit) -> List[AbuseFinding]:
    """All-qubit reset windows with work on both sides; segment count = cuts + 1.

    A window at the very start or end of the circuit separates nothing and is not a cut.
    """
    windows = [(a, b, n) for a, b, n in _reset_windows(c)
               if _has_work(c, 0, a) and _has_work(c, b, len(c.ops))]
    segments = len(windows) + 1
    findings = [
        AbuseFinding(FindingKind.FULL_RESET_CUT, (a, b),
                     f"{n} resets cover all {c.width} qubits", segments)
        for a, b, n in windows
    ]
    if findings:
        logger.info(f"'{c.label}': {len(findings)} full reset cut(s), {segments} segments")
    return findings


def _segment_key(c: Circuit, start: int, stop: int) -> str:
    # register names erased, qubit and bit indices kept
    canon = [
        (op.kind.value, op.qubits, tuple(round(p, 12) for p in op.params),
         None if op.clbit is None else op.clbit[1])
        for op in c.ops[start:stop]
        if op.kind is not GateKind.BARRIER
    ]
    return hashlib.sha256(repr(canon).encode()).hexdigest()[:16]


def segments(c: Circuit, cuts: Optional[List[AbuseFinding]] = None) -> List[Tuple[int, int]]:
    """Op-index spans between consecutive cuts."""
    cuts = detect_full_reset_cuts(c) if cuts is None else cuts
    bounds, start = [], 0
    for cut in cuts:
        bounds.append((start, cut.span[0]))
        start = cut.span[1]
    bounds.append((start, len(c.ops)))
    return bounds


def detect_repetition(c: Circuit, cuts: Optional[List[AbuseFinding]] = None) -> List[AbuseFinding]:
    cuts = detect_full_reset_cuts(c) if cuts is None else cuts
    if not cuts:
        return []
    groups: Dict[str, List[Tuple[int, int]]] = {}
    for span in segments(c, cuts):
        groups.setdefault(_segment_key(c, *span), []).append(span)

    findings = []
    for key, spans in groups.items():
        if len(spans) < 2:
            continue
        findings.append(AbuseFinding(
            FindingKind.REPEATED_SEGMENT, (spans[0][0], spans[-1][1]),
            f"segment {key} repeats {len(spans)} times", len(spans)))
    if findings:
        logger.info(f"'{c.label}': {len(findings)} repeated segment group(s)")
    return findings


def audit(c: Circuit, billed: Money, fair: PricingModel,
          threshold: Optional[float] = None) -> List[AbuseFinding]:
    """UnderpricedTask when billed < threshold * per-gate quote; threshold 0 never fires."""
    threshold = config.audit_threshold if threshold is None else threshold
    if threshold < 0:
        raise GuardrailError(f"audit threshold must be >= 0, got {threshold}")
    quote = quote_per_gate(c, fair)
    if billed.currency != quote.currency:
        raise GuardrailError(f"billed in {billed.currency}, fair model quotes {quote.currency}")
    floor = quote.exact * Fraction(Decimal(str(threshold)))
    if billed.exact >= floor:
        return []
    logger.info(f"'{c.label}': billed {billed} against per-gate quote {quote}")
    return [AbuseFinding(FindingKind.UNDERPRICED_TASK, (0, len(c.ops)),
                         f"billed {billed} < {threshold} x per-gate quote {quote}")]


def scan(c: Circuit, billed: Optional[Money] = None, fair: Optional[PricingModel] = None,
         threshold: Optional[float] = None) -> List[AbuseFinding]:
    """Every detector; the audit only runs when both a billed amount and a fair model are given."""
    cuts = detect_full_reset_cuts(c)
    findings = cuts + detect_repetition(c, cuts)
    if billed is not None and fair is not None:
        findings += audit(c, billed, fair, threshold)
    return findings


def format_findings(findings: List[AbuseFinding]) -> str:
    """KIND<TAB>SPAN<TAB>DETAIL lines plus a summary comment."""
    lines = [f.to_line() for f in findings]
    lines.append(f"# findings={len(findings)}")
    return "\n".join(lines) + "\n"
