"""Outcome distributions and total variation distance."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, List, Mapping, Sequence, Tuple, Union

import numpy as np

from errors import MetricsError
from sim_engine import CountsTable

SUM_TOLERANCE = 1e-9


@dataclass(frozen=True)
class OutcomeDistribution:
    probs: Mapping[str, float]

    def __post_init__(self):
        for outcome, p in self.probs.items():
            if not 0.0 <= p <= 1.0:
                raise MetricsError(f"P({outcome})={p} outside [0, 1]")
        total = math.fsum(self.probs.values())
        if abs(total - 1.0) > SUM_TOLERANCE:
            raise MetricsError(f"probabilities sum to {total}, not 1")
        object.__setattr__(self, "probs", dict(sorted(self.probs.items())))

    def __getitem__(self, outcome: str) -> float:
        return self.probs.get(outcome, 0.0)

    @property
    def support(self) -> Tuple[str, ...]:
        return tuple(x for x, p in self.probs.items() if p > 0.0)


Distribution = Union[OutcomeDistribution, Mapping[str, float]]


def normalize(counts: CountsTable) -> OutcomeDistribution:
    total = sum(counts.counts.values())
    if total <= 0:
        raise MetricsError("cannot normalize an empty counts table")
    return OutcomeDistribution({x: n / total for x, n in counts.counts.items()})


def _probs(d: Distribution) -> Mapping[str, float]:
    return d.probs if isinstance(d, OutcomeDistribution) else d


def tvd(p: Distribution, q: Distribution) -> float:
    """Half the L1 distance; outcomes missing from one side count as probability 0."""
    p, q = _probs(p), _probs(q)
    keys = set(p) | set(q)
    distance = 0.5 * math.fsum(abs(p.get(x, 0.0) - q.get(x, 0.0)) for x in keys)
    return min(1.0, distance)


def tvd_counts(a: CountsTable, b: CountsTable) -> float:
    return tvd(normalize(a), normalize(b))


def tvd_per_part(parts: Sequence[CountsTable], reference: Union[CountsTable, Sequence[CountsTable]]) -> List[float]:
    """TVD of every split part against one shared reference or a reference per part."""
    refs = [reference] * len(parts) if isinstance(reference, CountsTable) else list(reference)
    if len(refs) != len(parts):
        raise MetricsError(f"{len(parts)} parts but {len(refs)} references")
    return [tvd_counts(part, ref) for part, ref in zip(parts, refs)]


def tvd_summary(per_copy: Iterable[float]) -> Tuple[float, float]:
    """(mean, max) over the per-copy distances of one spliced run."""
    values = np.asarray(list(per_copy), dtype=float)
    if values.size == 0:
        raise MetricsError("no distances to summarize")
    return float(values.mean()), float(values.max())
