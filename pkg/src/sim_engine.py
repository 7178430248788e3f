"""
Seeded statevector simulator with mid-circuit measurement, reset and readout noise.

Shots are simulated as trajectories: every shot holds its own pure state, and a
block of shots is advanced together as one (B, 2, ..., 2) array so that each op
is a single vectorised numpy call.

Noise channels:
- readout assignment error: the record is flipped with eps_read_1to0 / eps_read_0to1,
  the qubit itself collapses to the true outcome unless apply_readout_to_state is set
- conditional X failure: a triggered CondX acts as identity with probability eps_condx
- reset = measure into a hidden scratch bit + CondX on that bit, with the same channels

Classical bits start at 0; the most recent write to a bit wins.
"""
from __future__ import annotations

import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from math import cos, sin, sqrt
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from circuit_core import Circuit, GateKind, Instruction, validate
from config import config
from errors import SimulationError
from rng import RNG_NAME, ShotRng

logger = logging.getLogger(__name__)

NORM_TOLERANCE = 1e-9
SHOT_BLOCK = 1024
AMPLITUDE_BUDGET = 1 << 22  # complex amplitudes held by one block

Probability = Union[float, Tuple[float, ...]]


# Gate matrices, acting on the (|0>, |1>) basis of one qubit
def u3_matrix(theta: float, phi: float, lam: float) -> np.ndarray:
    c, s = cos(theta / 2), sin(theta / 2)
    return np.array(
        [[c, -np.exp(1j * lam) * s],
         [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c]],
        dtype=complex,
    )


def rz_matrix(theta: float) -> np.ndarray:
    return np.array([[np.exp(-0.5j * theta), 0], [0, np.exp(0.5j * theta)]], dtype=complex)


_X = np.array([[0, 1], [1, 0]], dtype=complex)
_H = np.array([[1, 1], [1, -1]], dtype=complex) / sqrt(2)  # == u3_matrix(pi/2, 0, pi)


def gate_matrix(op: Instruction) -> np.ndarray:
    """2x2 matrix of a unitary op; for CX/CU3 the matrix applied to the target."""
    kind = op.kind
    if kind is GateKind.H:
        return _H
    if kind in (GateKind.X, GateKind.CX):
        return _X
    if kind is GateKind.RZ:
        return rz_matrix(op.params[0])
    if kind in (GateKind.U3, GateKind.CU3):
        return u3_matrix(*op.params)
    raise SimulationError(f"{kind.value} is not a unitary gate")


class NoiseModel(BaseModel):
    """Readout assignment and conditional-X error probabilities.

    Each probability is either one float shared by every qubit or a per-qubit tuple.
    """

    model_config = ConfigDict(frozen=True)

    eps_read_1to0: Probability = Field(default_factory=lambda: config.eps_read)
    eps_read_0to1: Probability = Field(default_factory=lambda: config.eps_read)
    eps_condx: Probability = Field(default_factory=lambda: config.eps_condx)
    apply_readout_to_state: bool = False
    user_readout_noise: bool = True

    @field_validator("eps_read_1to0", "eps_read_0to1", "eps_condx")
    @classmethod
    def _check_probability(cls, value: Probability) -> Probability:
        values = value if isinstance(value, tuple) else (value,)
        if not values:
            raise ValueError("per-qubit probabilities must not be empty")
        for p in values:
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probability {p} outside [0, 1]")
        return value

    @classmethod
    def noiseless(cls) -> "NoiseModel":
        return cls(eps_read_1to0=0.0, eps_read_0to1=0.0, eps_condx=0.0)

    @classmethod
    def from_fidelities(cls, readout_fidelity: float, condx_fidelity: float, **kwargs) -> "NoiseModel":
        eps_read = 1.0 - readout_fidelity
        return cls(eps_read_1to0=eps_read, eps_read_0to1=eps_read, eps_condx=1.0 - condx_fidelity, **kwargs)

    def per_qubit(self, name: str, width: int) -> np.ndarray:
        value = getattr(self, name)
        if not isinstance(value, tuple):
            return np.full(width, float(value))
        if len(value) < width:
            raise SimulationError(f"{name} lists {len(value)} qubits, circuit has {width}")
        return np.asarray(value[:width], dtype=float)

    @property
    def is_noiseless(self) -> bool:
        fields = (self.eps_read_1to0, self.eps_read_0to1, self.eps_condx)
        return all(max(v) == 0.0 if isinstance(v, tuple) else v == 0.0 for v in fields)


@dataclass(frozen=True)
class StateVector:
    """n-qubit pure state; amplitude index reads qubit 0 as the most significant bit."""

    n: int
    amp: np.ndarray

    @classmethod
    def zero(cls, n: int) -> "StateVector":
        amp = np.zeros(2 ** n, dtype=complex)
        amp[0] = 1.0
        return cls(n, amp)

    def norm(self) -> float:
        return float(np.sum(np.abs(self.amp) ** 2))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amp) ** 2


@dataclass(frozen=True)
class ShotRecord:
    """Final bit values of each declared register, in declaration order."""

    registers: Tuple[Tuple[str, Tuple[int, ...]], ...]

    def __getitem__(self, name: str) -> Tuple[int, ...]:
        for reg, bits in self.registers:
            if reg == name:
                return bits
        raise KeyError(name)

    @property
    def bitstring(self) -> str:
        return "".join(str(b) for _, bits in self.registers for b in bits)


@dataclass(frozen=True)
class CountsTable:
    """Outcome bitstring -> count over `shots` shots, plus provenance metadata."""

    counts: Mapping[str, int]
    shots: int
    seed: Optional[int] = None
    rng: str = RNG_NAME
    layout: Tuple[Tuple[str, int], ...] = ()

    def __post_init__(self):
        total = sum(self.counts.values())
        if total != self.shots:
            raise SimulationError(f"counts sum to {total}, expected {self.shots} shots")
        if any(v < 0 for v in self.counts.values()):
            raise SimulationError("negative count")
        if len({len(k) for k in self.counts}) > 1:
            raise SimulationError("outcome bitstrings have different widths")
        object.__setattr__(self, "counts", dict(sorted(self.counts.items())))

    @property
    def width(self) -> int:
        return len(next(iter(self.counts), ""))

    def probability(self, outcome: str) -> float:
        return self.counts.get(outcome, 0) / self.shots

    def register_span(self, name: str) -> Tuple[int, int]:
        start = 0
        for reg, size in self.layout:
            if reg == name:
                return start, start + size
            start += size
        raise SimulationError(f"register '{name}' not in counts layout")

    def project(self, spans: Sequence[Tuple[int, int]], layout: Tuple[Tuple[str, int], ...] = ()) -> "CountsTable":
        """Marginal over the concatenation of the given half-open bit spans."""
        width = self.width
        for start, stop in spans:
            if not 0 <= start <= stop <= width:
                raise SimulationError(f"bit span {start}:{stop} outside width {width}")
        projected: Counter = Counter()
        for outcome, n in self.counts.items():
            projected["".join(outcome[a:b] for a, b in spans)] += n
        return CountsTable(dict(projected), self.shots, self.seed, self.rng, layout)

    def marginal(self, register: str) -> "CountsTable":
        start, stop = self.register_span(register)
        return self.project([(start, stop)], ((register, stop - start),))

    def bit_marginals(self) -> List[float]:
        """P(bit i == 1) for every bit position."""
        ones = [0] * self.width
        for outcome, n in self.counts.items():
            for i, b in enumerate(outcome):
                if b == "1":
                    ones[i] += n
        return [c / self.shots for c in ones]

    def merge(self, other: "CountsTable") -> "CountsTable":
        if self.counts and other.counts and self.width != other.width:
            raise SimulationError("cannot merge counts of different widths")
        merged = Counter(self.counts)
        merged.update(other.counts)
        return CountsTable(dict(merged), self.shots + other.shots, None, self.rng, self.layout)

    def to_text(self) -> str:
        seed = "-" if self.seed is None else str(self.seed)
        lines = [f"# shots={self.shots} seed={seed} rng={self.rng}"]
        lines.extend(f"{outcome}\t{n}" for outcome, n in self.counts.items())
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "CountsTable":
        header, counts = {}, {}
        for number, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            if line.startswith("#"):
                header.update(part.split("=", 1) for part in line[1:].split() if "=" in part)
                continue
            try:
                outcome, n = line.split("\t")
                counts[outcome] = int(n)
            except ValueError:
                raise SimulationError(f"counts line {number}: expected BITSTRING<TAB>COUNT") from None
        try:
            shots = int(header.get("shots", sum(counts.values())))
            seed = None if header.get("seed", "-") == "-" else int(header["seed"])
        except ValueError:
            raise SimulationError("counts header: bad shots or seed") from None
        return cls(counts, shots, seed, header.get("rng", RNG_NAME))


def write_counts(counts: CountsTable, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_text(counts.to_text(), encoding="utf-8", newline="\n")
    return path


def read_counts(path: Union[str, Path]) -> CountsTable:
    return CountsTable.from_text(Path(path).read_text(encoding="utf-8"))


# Batched kernels. psi has shape (B, 2, ..., 2); qubit q lives on axis q + 1.
def _on_axis(psi: np.ndarray, matrix: np.ndarray, axis: int) -> np.ndarray:
    out = np.tensordot(matrix, psi, axes=([1], [axis]))
    return np.moveaxis(out, 0, axis)


def _apply_unitary(psi: np.ndarray, op: Instruction) -> np.ndarray:
    matrix = gate_matrix(op)
    if op.kind.n_qubits == 1:
        return _on_axis(psi, matrix, op.qubits[0] + 1)
    control, target = op.qubits
    out = psi.copy()
    index = [slice(None)] * psi.ndim
    index[control + 1] = 1
    index = tuple(index)
    # the control axis is gone from the slice, so later axes shift down by one
    target_axis = target + 1 if target < control else target
    out[index] = _on_axis(psi[index], matrix, target_axis)
    return out


def _row_mask(mask: np.ndarray, ndim: int) -> np.ndarray:
    return mask.reshape((-1,) + (1,) * (ndim - 1))


def _flip_rows(psi: np.ndarray, qubit: int, rows: np.ndarray) -> np.ndarray:
    """Apply X on `qubit` for the shots selected by the boolean `rows`."""
    if not rows.any():
        return psi
    return np.where(_row_mask(rows, psi.ndim), np.flip(psi, axis=qubit + 1), psi)


def _measure(psi: np.ndarray, qubit: int, gen: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Born-rule sample per shot; returns the collapsed, renormalised state and outcomes."""
    axis = qubit + 1
    batch = psi.shape[0]
    excited = np.take(psi, 1, axis=axis)
    p1 = np.sum(np.abs(excited.reshape(batch, -1)) ** 2, axis=1)
    outcome = gen.random(batch) < p1

    selector = np.stack([~outcome, outcome], axis=1).astype(float)
    shape = [batch] + [1] * (psi.ndim - 1)
    shape[axis] = 2
    psi = psi * selector.reshape(shape)

    norms = np.sqrt(np.sum(np.abs(psi.reshape(batch, -1)) ** 2, axis=1))
    norms[norms == 0.0] = 1.0
    return psi / _row_mask(norms, psi.ndim), outcome


class _Trajectories:
    """One chunk of shots advanced op by op."""

    def __init__(self, circuit: Circuit, noise: NoiseModel, gen: np.random.Generator, batch: int):
        n = circuit.width
        self.circuit = circuit
        self.noise = noise
        self.gen = gen
        self.batch = batch
        self.psi = np.zeros((batch,) + (2,) * n, dtype=complex)
        self.psi[(slice(None),) + (0,) * n] = 1.0
        self.bits: Dict[str, np.ndarray] = {
            reg.name: np.zeros((batch, reg.size), dtype=np.uint8) for reg in circuit.cregs
        }
        self.e10 = noise.per_qubit("eps_read_1to0", n)
        self.e01 = noise.per_qubit("eps_read_0to1", n)
        self.ecx = noise.per_qubit("eps_condx", n)

    def _readout(self, qubit: int, noisy: bool) -> np.ndarray:
        self.psi, true = _measure(self.psi, qubit, self.gen)
        if not noisy:
            return true
        flip = self.gen.random(self.batch) < np.where(true, self.e10[qubit], self.e01[qubit])
        if self.noise.apply_readout_to_state:
            self.psi = _flip_rows(self.psi, qubit, flip)
        return true ^ flip

    def _conditional_x(self, qubit: int, fire: np.ndarray) -> None:
        failed = self.gen.random(self.batch) < self.ecx[qubit]
        self.psi = _flip_rows(self.psi, qubit, fire & ~failed)

    def run(self) -> "_Trajectories":
        for op in self.circuit.ops:
            kind = op.kind
            if kind is GateKind.BARRIER:
                continue
            q = op.qubits[0]
            if kind is GateKind.MEASURE:
                recorded = self._readout(q, self.noise.user_readout_noise)
                reg, bit = op.clbit
                self.bits[reg][:, bit] = recorded
            elif kind is GateKind.CONDX:
                reg, bit = op.clbit
                self._conditional_x(q, self.bits[reg][:, bit] == 1)
            elif kind is GateKind.RESET:
                # hidden scratch bit, never part of the record
                scratch = self._readout(q, True)
                self._conditional_x(q, scratch)
            else:
                self.psi = _apply_unitary(self.psi, op)

        drift = np.abs(np.sum(np.abs(self.psi.reshape(self.batch, -1)) ** 2, axis=1) - 1.0)
        if drift.size and drift.max() > NORM_TOLERANCE:
            logger.warning(f"Statevector norm drifted by {drift.max():.3e}")
            raise SimulationError("statevector norm drifted")
        return self

    def bit_matrix(self) -> np.ndarray:
        if not self.bits:
            return np.zeros((self.batch, 0), dtype=np.uint8)
        return np.concatenate([self.bits[reg.name] for reg in self.circuit.cregs], axis=1)


def _generator(rng) -> np.random.Generator:
    if isinstance(rng, ShotRng):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    raise SimulationError(f"expected ShotRng or numpy Generator, got {type(rng).__name__}")


def _require_valid(circuit: Circuit) -> None:
    problems = validate(circuit)
    if problems:
        raise SimulationError(f"invalid circuit '{circuit.label}': {problems[0]}")
    if circuit.width > config.max_width:
        raise SimulationError(f"'{circuit.label}' has {circuit.width} qubits, the simulator "
                              f"takes at most {config.max_width} (RESETLAB_MAX_WIDTH)")


def apply_gate(state: StateVector, g: Instruction, noise: Optional[NoiseModel] = None, rng=None) -> StateVector:
    """Matrix action of one unitary op.

    noise and rng are accepted so every op shares one signature; no unitary noise
    channel is modelled, so neither is consulted.
    """
    if not g.kind.is_unitary:
        raise SimulationError(f"apply_gate handles unitaries only, got {g.kind.value}")
    if any(not 0 <= q < state.n for q in g.qubits):
        raise SimulationError(f"qubit index out of range for {state.n}-qubit state")
    psi = state.amp.reshape((1,) + (2,) * state.n)
    amp = _apply_unitary(psi, g).reshape(-1)
    new = StateVector(state.n, amp)
    if abs(new.norm() - 1.0) > NORM_TOLERANCE:
        raise SimulationError("statevector norm drifted")
    return new


def run_shot(c: Circuit, noise: NoiseModel, rng) -> ShotRecord:
    """Execute one shot and return the final value of every declared register."""
    _require_valid(c)
    shot = _Trajectories(c, noise, _generator(rng), 1).run()
    return ShotRecord(tuple((reg.name, tuple(int(b) for b in shot.bits[reg.name][0])) for reg in c.cregs))


def _chunk_counts(c: Circuit, noise: NoiseModel, stream: ShotRng, size: int) -> Dict[str, int]:
    matrix = _Trajectories(c, noise, stream.generator, size).run().bit_matrix()
    if matrix.shape[1] == 0:
        return {"": size}
    rows, counts = np.unique(matrix, axis=0, return_counts=True)
    return {"".join(str(b) for b in row): int(n) for row, n in zip(rows, counts)}


def seed_block(width: int) -> int:
    """Shots drawn from one child stream; depends on the circuit width only."""
    return max(1, min(SHOT_BLOCK, AMPLITUDE_BUDGET >> width))


def run_shots(c: Circuit, noise: NoiseModel, shots: int, seed: int,
              chunk_size: Optional[int] = None, workers: Optional[int] = None) -> CountsTable:
    """Aggregate `shots` independent shots; identical inputs give identical tables.

    Shots are cut into blocks of `seed_block(c.width)`; block i draws from the i-th
    child of the seed's stream and blocks are folded in index order. `chunk_size`
    and `workers` only decide how blocks are handed out, never what they draw.
    """
    if isinstance(shots, bool) or not isinstance(shots, (int, np.integer)) or shots < 1:
        raise SimulationError(f"shot count must be >= 1, got {shots!r}")
    _require_valid(c)
    root = ShotRng(seed)
    chunk_size = chunk_size or config.chunk_size
    workers = workers or config.workers
    if chunk_size < 1:
        raise SimulationError("chunk size must be >= 1")

    block = seed_block(c.width)
    sizes = [block] * (shots // block)
    if shots % block:
        sizes.append(shots % block)
    streams = root.spawn(len(sizes))
    per_task = max(1, chunk_size // block)
    tasks = [range(i, min(i + per_task, len(sizes))) for i in range(0, len(sizes), per_task)]
    logger.debug(f"Running {shots} shots of '{c.label}' in {len(sizes)} block(s) of {block}, "
                 f"{len(tasks)} task(s), {workers} worker(s)")

    def work(task: range) -> Counter:
        partial: Counter = Counter()
        for i in task:
            partial.update(_chunk_counts(c, noise, streams[i], sizes[i]))
        return partial

    if workers > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            partials = list(pool.map(work, tasks))
    else:
        partials = [work(task) for task in tasks]

    total: Counter = Counter()
    for partial in partials:
        total.update(partial)
    layout = tuple((reg.name, reg.size) for reg in c.cregs)
    return CountsTable(dict(total), int(shots), root.seed, RNG_NAME, layout)
