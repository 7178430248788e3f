"""
Pricing models, exact money arithmetic and the savings tables.

Money is integer micro-units plus a currency tag; no float ever touches a price.
Per-shot costs and percentages are kept as exact fractions and only rounded
(half-up) when displayed: 6 decimals for cost per shot, 2 for percentages and money.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from decimal import Decimal, InvalidOperation
from fractions import Fraction
from functools import total_ordering
from pathlib import Path
from typing import ClassVar, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from circuit_core import Circuit, GateCensus, census
from config import config
from errors import BillingError, CatalogError, ReceiptError

logger = logging.getLogger(__name__)

MICROS = 1_000_000
CURRENCIES = ("USD", "credits")
UNDEFINED = "undefined"

TARGET_MACHINE = "target_machine"
TARGET_PER_GATE = "target_per_gate"


def round_half_up(value: Fraction, places: int) -> Decimal:
    scaled = Fraction(value) * 10 ** places
    magnitude = (2 * abs(scaled.numerator) + scaled.denominator) // (2 * scaled.denominator)
    return Decimal(-magnitude if scaled < 0 else magnitude).scaleb(-places)


def format_fixed(value: Optional[Fraction], places: int) -> str:
    if value is None:
        return UNDEFINED
    return f"{round_half_up(value, places):f}"


@total_ordering
@dataclass(frozen=True)
class Money:
    micros: int
    currency: str = "credits"

    def __post_init__(self):
        if isinstance(self.micros, bool) or not isinstance(self.micros, int):
            raise BillingError(f"money must be integer micro-units, got {self.micros!r}")
        if self.currency not in CURRENCIES:
            raise BillingError(f"unknown currency '{self.currency}' (expected one of {', '.join(CURRENCIES)})")

    @classmethod
    def parse(cls, text: str, currency: str = "credits") -> "Money":
        """Exact decimal string, at most 6 fractional digits: '0.001500' -> 1500 micros."""
        try:
            amount = Decimal(str(text).strip())
        except InvalidOperation:
            raise BillingError(f"not a decimal amount: {text!r}") from None
        if not amount.is_finite():
            raise BillingError(f"not a finite amount: {text!r}")
        scaled = amount.scaleb(6)
        if scaled != scaled.to_integral_value():
            raise BillingError(f"{text!r} is finer than one micro-unit")
        return cls(int(scaled), currency)

    @classmethod
    def zero(cls, currency: str = "credits") -> "Money":
        return cls(0, currency)

    def _same(self, other: "Money") -> None:
        if not isinstance(other, Money):
            raise BillingError(f"cannot combine Money with {type(other).__name__}")
        if other.currency != self.currency:
            raise BillingError(f"currency mismatch: {self.currency} vs {other.currency}")

    def __add__(self, other: "Money") -> "Money":
        self._same(other)
        return Money(self.micros + other.micros, self.currency)

    def __sub__(self, other: "Money") -> "Money":
        self._same(other)
        return Money(self.micros - other.micros, self.currency)

    def __mul__(self, factor: int) -> "Money":
        if isinstance(factor, bool) or not isinstance(factor, int):
            raise BillingError("money can only be scaled by an integer")
        return Money(self.micros * factor, self.currency)

    __rmul__ = __mul__

    def __neg__(self) -> "Money":
        return Money(-self.micros, self.currency)

    def __lt__(self, other: "Money") -> bool:
        self._same(other)
        return self.micros < other.micros

    @property
    def exact(self) -> Fraction:
        return Fraction(self.micros, MICROS)

    def per(self, count: int) -> Fraction:
        """Exact share of this amount over `count` units."""
        if count <= 0:
            raise BillingError("cannot divide money over a non-positive count")
        return Fraction(self.micros, MICROS * count)

    def amount_text(self) -> str:
        """Shortest exact decimal, as written in catalogs: 300000 micros -> '0.3'."""
        return f"{Decimal(self.micros).scaleb(-6).normalize():f}"

    def format(self, places: int = 2) -> str:
        return format_fixed(self.exact, places)

    def __str__(self) -> str:
        return f"{self.format(2 if self.micros % 10_000 == 0 else 6)} {self.currency}"


class PricingModel(ABC):
    """A provider's way of turning a task receipt into a charge."""

    kind: ClassVar[str]

    @property
    @abstractmethod
    def currency(self) -> str:
        pass

    @abstractmethod
    def charge(self, receipt: "TaskReceipt") -> Money:
        pass

    @abstractmethod
    def catalog_fields(self) -> List[str]:
        pass

    def _check_prices(self, *prices: Money) -> None:
        for p in prices:
            if p.micros < 0:
                raise BillingError(f"{self.kind}: prices must be >= 0, got {p}")
            if p.currency != prices[0].currency:
                raise BillingError(f"{self.kind}: mixed currencies {prices[0].currency} and {p.currency}")


@dataclass(frozen=True)
class PerTaskPerShot(PricingModel):
    per_task: Money
    per_shot: Money
    kind: ClassVar[str] = "per_task_per_shot"

    def __post_init__(self):
        self._check_prices(self.per_task, self.per_shot)

    @property
    def currency(self) -> str:
        return self.per_task.currency

    def charge(self, receipt: "TaskReceipt") -> Money:
        return self.per_task + self.per_shot * receipt.shots

    def catalog_fields(self) -> List[str]:
        return [self.per_task.amount_text(), self.per_shot.amount_text()]


@dataclass(frozen=True)
class TimeBased(PricingModel):
    per_second: Money
    granularity_seconds: int = 1
    kind: ClassVar[str] = "time_based"

    def __post_init__(self):
        self._check_prices(self.per_second)
        if isinstance(self.granularity_seconds, bool) or not isinstance(self.granularity_seconds, int) \
                or self.granularity_seconds < 1:
            raise BillingError(f"granularity must be an integer >= 1, got {self.granularity_seconds!r}")

    @property
    def currency(self) -> str:
        return self.per_second.currency

    def charge(self, receipt: "TaskReceipt") -> Money:
        g = self.granularity_seconds
        billed_seconds = -(-receipt.wall_time_seconds // g) * g
        return self.per_second * billed_seconds

    def catalog_fields(self) -> List[str]:
        return [self.per_second.amount_text(), str(self.granularity_seconds)]


@dataclass(frozen=True)
class PerGate(PricingModel):
    per_task: Money
    per_1q: Money
    per_2q: Money
    per_meas: Money
    per_reset: Money
    kind: ClassVar[str] = "per_gate"

    def __post_init__(self):
        self._check_prices(self.per_task, self.per_1q, self.per_2q, self.per_meas, self.per_reset)

    @property
    def currency(self) -> str:
        return self.per_task.currency

    def charge(self, receipt: "TaskReceipt") -> Money:
        c = receipt.census
        return (self.per_task + self.per_1q * c.n_1q + self.per_2q * c.n_2q
                + self.per_meas * c.n_meas + self.per_reset * c.n_reset)

    def without_task_fee(self) -> "PerGate":
        return replace(self, per_task=Money.zero(self.currency))

    def resets_as_primitives(self) -> "PerGate":
        """Bill each reset as the measurement plus X it is made of."""
        return replace(self, per_reset=self.per_meas + self.per_1q)

    def catalog_fields(self) -> List[str]:
        prices = (self.per_task, self.per_1q, self.per_2q, self.per_meas, self.per_reset)
        return [p.amount_text() for p in prices]


@dataclass(frozen=True)
class TaskReceipt:
    shots: int
    wall_time_seconds: int = 0
    census: GateCensus = field(default_factory=GateCensus)
    parts: int = 1

    def __post_init__(self):
        if self.shots < 1:
            raise BillingError(f"receipt shots must be >= 1, got {self.shots}")
        if not isinstance(self.wall_time_seconds, int) or self.wall_time_seconds < 0:
            raise BillingError(f"receipt wall time must be whole seconds >= 0, got {self.wall_time_seconds!r}")
        if self.parts < 1:
            raise BillingError(f"receipt parts must be >= 1, got {self.parts}")

    @property
    def effective_shots(self) -> int:
        return effective_shots(self.shots, self.parts)


def effective_shots(shots: int, parts: int) -> int:
    return shots * parts


def receipt_for(circuit: Circuit, shots: int, wall_time_seconds: int = 0, parts: int = 1) -> TaskReceipt:
    return TaskReceipt(shots, wall_time_seconds, census(circuit), parts)


def price(model: PricingModel, receipt: TaskReceipt, currency: Optional[str] = None) -> Money:
    """Charge for one task; `currency` pins the expected output currency."""
    if currency is not None and currency != model.currency:
        raise BillingError(f"{model.kind} model bills in {model.currency}, {currency} requested")
    return model.charge(receipt)


def avoided_cost(parts: int, shots: int, per_shot: Money) -> Money:
    """What the splicer does not pay: (N - 1) * S * per_shot."""
    if parts < 1:
        raise BillingError(f"parts must be >= 1, got {parts}")
    return per_shot * ((parts - 1) * shots)


@dataclass(frozen=True)
class SavingsReport:
    """Attack cost against the one-circuit-per-shot baseline.

    The three percentages follow the three conventions in circulation and are all
    exact; None means undefined (zero attack cost, or zero free computation).
    """

    cost: Money
    baseline_cost: Money
    shots: int
    parts: int
    cost_per_shot: Fraction
    baseline_cost_per_shot: Fraction
    excess_pct: Optional[Fraction]
    ratio_pct: Optional[Fraction]
    free_fraction_pct: Optional[Fraction]

    @property
    def effective_shots(self) -> int:
        return effective_shots(self.shots, self.parts)

    @property
    def free_computation(self) -> Money:
        return self.baseline_cost - self.cost


def savings(cost: Money, baseline_cost: Optional[Money], shots: int, parts: int,
            baseline_per_shot: Optional[Money] = None) -> SavingsReport:
    """Savings of a spliced task that produced shots * parts effective shots.

    Without an explicit baseline cost the baseline is effective shots times the
    baseline per-shot price (configured, 0.001500 credits by default).
    """
    eff = effective_shots(shots, parts)
    if eff < 1:
        raise BillingError("shots and parts must be >= 1")
    if baseline_per_shot is not None:
        base_rate = baseline_per_shot.exact
        if baseline_cost is None:
            baseline_cost = baseline_per_shot * eff
    elif baseline_cost is not None:
        base_rate = baseline_cost.per(eff)
    else:
        per_shot = Money.parse(config.baseline_cost_per_shot, cost.currency)
        base_rate = per_shot.exact
        baseline_cost = per_shot * eff

    attack_rate = cost.per(eff)
    free = baseline_cost - cost

    ratio = excess = free_fraction = None
    if attack_rate != 0:
        ratio = base_rate / attack_rate * 100
        excess = ratio - 100
    if free.micros != 0:
        free_fraction = Fraction((free - cost).micros, free.micros) * 100

    return SavingsReport(cost, baseline_cost, shots, parts, attack_rate, base_rate, excess, ratio, free_fraction)


@dataclass(frozen=True)
class TimeEstimator:
    """Piecewise-linear wall time (seconds) as a function of spliced parts, clamped at the ends."""

    parts: Tuple[float, ...]
    seconds: Tuple[float, ...]

    def __call__(self, parts: float) -> float:
        return float(np.interp(parts, self.parts, self.seconds))

    def whole_seconds(self, parts: float) -> int:
        return math.ceil(round(self(parts), 9))


def fit_time_model(calibration: Sequence[Tuple[float, float]]) -> TimeEstimator:
    if len(calibration) < 2:
        raise BillingError("time model needs at least 2 calibration points")
    parts = tuple(float(p) for p, _ in calibration)
    seconds = tuple(float(s) for _, s in calibration)
    if any(b <= a for a, b in zip(parts, parts[1:])):
        raise BillingError("calibration parts must be strictly increasing (unsorted or duplicate entry)")
    if any(s < 0 for s in seconds) or any(b < a for a, b in zip(seconds, seconds[1:])):
        raise BillingError("calibration times must be >= 0 and non-decreasing")
    return TimeEstimator(parts, seconds)


# Pricing catalog: one model per line.
#   NAME per_task_per_shot TASK SHOT CCY
#   NAME time_based PER_SECOND GRANULARITY CCY
#   NAME per_gate TASK P1Q P2Q PMEAS PRESET CCY

_CATALOG_ARITY = {PerTaskPerShot.kind: 2, TimeBased.kind: 2, PerGate.kind: 5}


def _catalog_entry(number: int, fields: List[str]) -> Tuple[str, PricingModel]:
    if len(fields) < 2:
        raise CatalogError(number, "expected NAME KIND FIELDS... CCY")
    name, kind = fields[0], fields[1]
    if kind not in _CATALOG_ARITY:
        raise CatalogError(number, f"unknown pricing kind '{kind}'")
    values, currency = fields[2:-1], fields[-1] if len(fields) > 2 else ""
    if len(values) != _CATALOG_ARITY[kind]:
        raise CatalogError(number, f"{kind} takes {_CATALOG_ARITY[kind]} values and a currency")
    try:
        if kind == TimeBased.kind:
            if not (values[1].isascii() and values[1].isdigit()):
                raise BillingError(f"granularity must be an integer, got {values[1]!r}")
            return name, TimeBased(Money.parse(values[0], currency), int(values[1]))
        prices = [Money.parse(v, currency) for v in values]
        if kind == PerTaskPerShot.kind:
            return name, PerTaskPerShot(*prices)
        return name, PerGate(*prices)
    except BillingError as e:
        raise CatalogError(number, str(e)) from None


def parse_catalog(text: str) -> Dict[str, PricingModel]:
    models: Dict[str, PricingModel] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        fields = raw.split("#", 1)[0].split()
        if not fields:
            continue
        name, model = _catalog_entry(number, fields)
        if name in models:
            raise CatalogError(number, f"duplicate model '{name}'")
        models[name] = model
    return models


def load_catalog(path: Union[str, Path, None] = None) -> Dict[str, PricingModel]:
    path = Path(path or config.catalog_path)
    models = parse_catalog(path.read_text(encoding="utf-8"))
    logger.info(f"Loaded {len(models)} pricing models from {path}")
    return models


def format_catalog(models: Dict[str, PricingModel]) -> str:
    lines = [" ".join([name, model.kind, *model.catalog_fields(), model.currency])
             for name, model in models.items()]
    return "\n".join(lines) + "\n"


class ReceiptRow(BaseModel):
    """One line of a receipts CSV: what a provider billed for one task."""

    model_config = ConfigDict(frozen=True, extra="ignore", str_strip_whitespace=True)

    label: str = Field(min_length=1)
    parts: int = Field(ge=1)
    resets: int = Field(ge=0)
    shots: int = Field(ge=1)
    wall_time_s: int = Field(ge=0)

    def receipt(self) -> TaskReceipt:
        return TaskReceipt(self.shots, self.wall_time_s, GateCensus(), self.parts)


RECEIPT_COLUMNS = ("label", "parts", "resets", "shots", "wall_time_s")

REPORT_COLUMNS = (
    "label", "parts", "resets", "shots", "eff_shots", "time_s", "cost", "cost_per_shot",
    "baseline_cost", "free_computation", "excess_pct", "ratio_pct", "free_fraction_pct",
)


def read_receipts(text: str) -> List[ReceiptRow]:
    """Parse a receipts CSV; row numbers in errors count the header as row 1."""
    reader = csv.DictReader(io.StringIO(text))
    missing = [c for c in RECEIPT_COLUMNS if c not in (reader.fieldnames or [])]
    if missing:
        raise ReceiptError(1, f"missing column(s): {', '.join(missing)}")
    rows = []
    for row in reader:
        if None in row or any(row.get(c) is None for c in RECEIPT_COLUMNS):
            raise ReceiptError(reader.line_num, "wrong number of fields")
        try:
            rows.append(ReceiptRow(**{c: row[c].strip() for c in RECEIPT_COLUMNS}))
        except ValidationError as e:
            error = e.errors()[0]
            column = str(error["loc"][0]) if error["loc"] else None
            raise ReceiptError(reader.line_num, f"{column}: {error['msg']}", column) from None
    return rows


def report_row(row: ReceiptRow, model: PricingModel, baseline_per_shot: Optional[Money] = None) -> Dict[str, str]:
    receipt = row.receipt()
    cost = price(model, receipt)
    report = savings(cost, None, row.shots, row.parts, baseline_per_shot)
    return {
        "label": row.label,
        "parts": str(row.parts),
        "resets": str(row.resets),
        "shots": str(row.shots),
        "eff_shots": str(report.effective_shots),
        "time_s": str(row.wall_time_s),
        "cost": cost.format(2),
        "cost_per_shot": format_fixed(report.cost_per_shot, 6),
        "baseline_cost": report.baseline_cost.format(2),
        "free_computation": report.free_computation.format(2),
        "excess_pct": format_fixed(report.excess_pct, 2),
        "ratio_pct": format_fixed(report.ratio_pct, 2),
        "free_fraction_pct": format_fixed(report.free_fraction_pct, 2),
    }


def format_report(rows: Iterable[ReceiptRow], model: PricingModel,
                  baseline_per_shot: Optional[Money] = None) -> str:
    out = io.StringIO()
    writer = csv.DictWriter(out, fieldnames=REPORT_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(report_row(row, model, baseline_per_shot))
    return out.getvalue()
