"""
Generators for the common user circuits, the reset-test circuit and benchmark mixes.

Every kind measures all of its qubits; registers are declared before use and the
noiseless output of each kind is known in closed form (see the kind docstrings).
"""
from __future__ import annotations

import math
import re
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import ClassVar, Dict, List, Optional, Sequence, Tuple, Union

from circuit_core import Circuit, CircuitBuilder
from config import config
from errors import BenchError, SimulationError
from rng import ShotRng
from sim_engine import NoiseModel, run_shots
from splice import SpliceMap, SpliceSpec, splice

RESET_TEST_MAX = 31


def _measure_all(b: CircuitBuilder, qubits: Sequence[int], reg: str) -> CircuitBuilder:
    for i, q in enumerate(qubits):
        b.measure(q, reg, i)
    return b


def _swap(b: CircuitBuilder, a: int, c: int) -> CircuitBuilder:
    return b.cx(a, c).cx(c, a).cx(a, c)


class BenchKind(ABC):
    """A parameterised benchmark circuit."""

    name: ClassVar[str]
    title: ClassVar[str]

    def check(self) -> None:
        pass

    @abstractmethod
    def _circuit(self) -> Circuit:
        pass

    def build(self) -> Circuit:
        self.check()
        return self._circuit()


@dataclass(frozen=True)
class Bell(BenchKind):
    """H then CX: 00 and 11 with probability 1/2 each."""

    name: ClassVar[str] = "bell"
    title: ClassVar[str] = "Bell"

    def _circuit(self) -> Circuit:
        b = Circuit.builder(2, self.name).creg("c", 2).h(0).cx(0, 1)
        return _measure_all(b, range(2), "c").finish()


@dataclass(frozen=True)
class GHZ(BenchKind):
    """0^n and 1^n with probability 1/2 each."""

    n: int = 3
    name: ClassVar[str] = "ghz"
    title: ClassVar[str] = "GHZ"

    def check(self) -> None:
        if not 2 <= self.n <= 5:
            raise BenchError(f"GHZ needs 2..5 qubits, got {self.n}")

    def _circuit(self) -> Circuit:
        b = Circuit.builder(self.n, self.name).creg("c", self.n).h(0)
        for q in range(self.n - 1):
            b.cx(q, q + 1)
        return _measure_all(b, range(self.n), "c").finish()


@dataclass(frozen=True)
class QFT(BenchKind):
    """Fourier transform of a basis state (qubit 0 most significant): uniform over 2^n outcomes."""

    n: int = 3
    basis_input: int = 1
    name: ClassVar[str] = "qft"
    title: ClassVar[str] = "Quantum Fourier Transform"

    def check(self) -> None:
        if not 2 <= self.n <= 5:
            raise BenchError(f"QFT needs 2..5 qubits, got {self.n}")
        if not 0 <= self.basis_input < 2 ** self.n:
            raise BenchError(f"basis input {self.basis_input} does not fit in {self.n} qubits")

    def _circuit(self) -> Circuit:
        n = self.n
        b = Circuit.builder(n, self.name).creg("c", n)
        for q in range(n):
            if (self.basis_input >> (n - 1 - q)) & 1:
                b.x(q)
        for j in range(n):
            b.h(j)
            for k in range(j + 1, n):
                b.cphase(math.pi / 2 ** (k - j), k, j)
        for q in range(n // 2):
            _swap(b, q, n - 1 - q)
        return _measure_all(b, range(n), "c").finish()


@dataclass(frozen=True)
class Teleportation(BenchKind):
    """Moves U3(theta, 0, 0)|0> from qubit 0 to qubit 2: P(c = 1) = sin^2(theta / 2).

    Corrections are classically conditioned; Z is applied as H, conditional X, H.
    """

    theta: float = math.pi / 3
    name: ClassVar[str] = "teleportation"
    title: ClassVar[str] = "Teleportation"

    def check(self) -> None:
        if not math.isfinite(self.theta):
            raise BenchError("teleportation angle must be finite")

    def _circuit(self) -> Circuit:
        b = Circuit.builder(3, self.name).creg("m", 2).creg("c", 1)
        b.u3(self.theta, 0.0, 0.0, 0)
        b.h(1).cx(1, 2)
        b.cx(0, 1).h(0)
        b.measure(0, "m", 0).measure(1, "m", 1)
        b.xif("m", 1, 2)
        b.h(2).xif("m", 0, 2).h(2)
        return b.measure(2, "c", 0).finish()


@dataclass(frozen=True)
class VariationalAnsatz(BenchKind):
    """Layers of U3(theta, 0, 0) on every qubit followed by a CX chain."""

    n_qubits: int = 2
    layers: int = 2
    angles: Tuple[float, ...] = (0.35, 1.2, 0.8, 2.1)
    name: ClassVar[str] = "variational"
    title: ClassVar[str] = "Variational Ansatz"

    def check(self) -> None:
        if not 2 <= self.n_qubits <= 5:
            raise BenchError(f"ansatz needs 2..5 qubits, got {self.n_qubits}")
        if not 1 <= self.layers <= 4:
            raise BenchError(f"ansatz needs 1..4 layers, got {self.layers}")
        if len(self.angles) != self.n_qubits * self.layers:
            raise BenchError(f"ansatz needs {self.n_qubits * self.layers} angles, got {len(self.angles)}")
        if not all(math.isfinite(a) for a in self.angles):
            raise BenchError("ansatz angles must be finite")

    def _circuit(self) -> Circuit:
        n = self.n_qubits
        b = Circuit.builder(n, self.name).creg("c", n)
        for layer in range(self.layers):
            for q in range(n):
                b.u3(self.angles[layer * n + q], 0.0, 0.0, q)
            for q in range(n - 1):
                b.cx(q, q + 1)
        return _measure_all(b, range(n), "c").finish()


@dataclass(frozen=True)
class Grover2Q(BenchKind):
    """One Grover iteration on 2 qubits, which is exact: the marked state with probability 1."""

    marked: str = "11"
    name: ClassVar[str] = "grover"
    title: ClassVar[str] = "Grover"

    def check(self) -> None:
        if self.marked not in ("00", "01", "10", "11"):
            raise BenchError(f"marked state must be a 2-bit string, got {self.marked!r}")

    def _circuit(self) -> Circuit:
        b = Circuit.builder(2, self.name).creg("c", 2).h(0).h(1)
        flips = [q for q, bit in enumerate(self.marked) if bit == "0"]
        for q in flips:
            b.x(q)
        b.h(1).cx(0, 1).h(1)  # CZ
        for q in flips:
            b.x(q)
        b.h(0).h(1).x(0).x(1)
        b.h(1).cx(0, 1).h(1)
        b.x(0).x(1).h(0).h(1)
        return _measure_all(b, range(2), "c").finish()


@dataclass(frozen=True)
class PhaseEstimation(BenchKind):
    """Estimates phi for U = RZ(2 pi phi) (up to global phase) on a target prepared in |1>.

    Counting qubit 0 is the most significant bit; phi = m / 2^n_counting reads out m
    with probability 1. The target is measured last and always reads 1.
    """

    n_counting: int = 2
    phase: float = 0.25
    name: ClassVar[str] = "qpe"
    title: ClassVar[str] = "Phase Estimation"

    def check(self) -> None:
        if not 1 <= self.n_counting <= 4:
            raise BenchError(f"phase estimation needs 1..4 counting qubits, got {self.n_counting}")
        if not 0.0 <= self.phase < 1.0:
            raise BenchError(f"phase must be in [0, 1), got {self.phase}")

    def _circuit(self) -> Circuit:
        t = self.n_counting
        b = Circuit.builder(t + 1, self.name).creg("c", t + 1).x(t)
        for j in range(t):
            b.h(j)
        for j in range(t):
            b.cphase(2 * math.pi * self.phase * 2 ** (t - 1 - j), j, t)
        # inverse QFT on the counting register
        for q in range(t // 2):
            _swap(b, q, t - 1 - q)
        for j in reversed(range(t)):
            for k in reversed(range(j + 1, t)):
                b.cphase(-2 * math.pi / 2 ** (k - j + 1), k, j)
            b.h(j)
        return _measure_all(b, range(t + 1), "c").finish()


def _h_all(b: CircuitBuilder, n: int) -> CircuitBuilder:
    for q in range(n + 1):
        b.h(q)
    return b


@dataclass(frozen=True)
class BernsteinVazirani(BenchKind):
    """Register c reads the hidden string with probability 1; the ancilla is returned to |0>."""

    hidden: str = "101"
    name: ClassVar[str] = "bv"
    title: ClassVar[str] = "Bernstein-Vazirani"

    def check(self) -> None:
        if not 1 <= len(self.hidden) <= 4 or set(self.hidden) - {"0", "1"}:
            raise BenchError(f"hidden string must be 1..4 bits, got {self.hidden!r}")

    def _circuit(self) -> Circuit:
        n = len(self.hidden)
        b = Circuit.builder(n + 1, self.name).creg("c", n).creg("anc", 1).x(n)
        _h_all(b, n)
        for i, bit in enumerate(self.hidden):
            if bit == "1":
                b.cx(i, n)
        _h_all(b, n).x(n)
        _measure_all(b, range(n), "c")
        return b.measure(n, "anc", 0).finish()


@dataclass(frozen=True)
class DeutschJozsa(BenchKind):
    """Constant oracle reads 0^n, balanced oracle (CX fan onto the ancilla) reads 1^n."""

    n: int = 2
    balanced: bool = True
    title: ClassVar[str] = "Deutsch-Jozsa"

    @property
    def name(self) -> str:
        return "dj_balanced" if self.balanced else "dj_constant"

    def check(self) -> None:
        if not 1 <= self.n <= 4:
            raise BenchError(f"Deutsch-Jozsa needs 1..4 input qubits, got {self.n}")

    def _circuit(self) -> Circuit:
        n = self.n
        b = Circuit.builder(n + 1, self.name).creg("c", n).creg("anc", 1).x(n)
        _h_all(b, n)
        if self.balanced:
            for i in range(n):
                b.cx(i, n)
        _h_all(b, n).x(n)
        _measure_all(b, range(n), "c")
        return b.measure(n, "anc", 0).finish()


def build(kind: BenchKind) -> Circuit:
    return kind.build()


def build_reset_test(k: int) -> Circuit:
    """X, then k rounds of (barrier, measure into c[i], conditional X on c[i])."""
    if isinstance(k, bool) or not isinstance(k, int) or not 1 <= k <= RESET_TEST_MAX:
        raise BenchError(f"reset test takes 1..{RESET_TEST_MAX} resets, got {k!r}")
    b = Circuit.builder(1, f"reset_test_{k}").creg("c", k).x(0)
    for i in range(k):
        b.barrier(0).measure(0, "c", i).xif("c", i, 0)
    return b.finish()


def reset_fidelity_curve(k: int, noise: NoiseModel, shots: int, seed: int) -> List[float]:
    """Measured P(bit i == 1) of the reset test, i = 0..k-1."""
    return run_shots(build_reset_test(k), noise, shots, seed).bit_marginals()


# Registry: short names and the display names used in mix tables.

KINDS: Dict[str, BenchKind] = {
    kind.name: kind
    for kind in (Bell(), GHZ(), QFT(), Teleportation(), VariationalAnsatz(), Grover2Q(),
                 PhaseEstimation(), BernsteinVazirani(), DeutschJozsa(), DeutschJozsa(balanced=False))
}

_DISPLAY_NAMES = {
    "bell": "bell", "bell state": "bell",
    "ghz": "ghz",
    "qft": "qft", "quantum fourier transform": "qft",
    "teleportation": "teleportation", "quantum teleportation": "teleportation",
    "variational ansatz": "variational", "variational": "variational",
    "grover": "grover", "grover's oracle": "grover",
    "phase estimation": "qpe", "qpe": "qpe",
    "bernstein-vazirani": "bv", "bv": "bv",
    "deutsch-jozsa (balanced)": "dj_balanced", "dj_balanced": "dj_balanced",
    "deutsch-jozsa (constant)": "dj_constant", "dj_constant": "dj_constant",
}

# the eight common user circuits; mixes of 8 or more also draw GHZ
COMMON_POOL: Tuple[BenchKind, ...] = tuple(
    KINDS[n] for n in ("qft", "dj_balanced", "bell", "teleportation", "qpe", "variational", "bv", "grover")
)
EXTENDED_POOL: Tuple[BenchKind, ...] = COMMON_POOL + (KINDS["ghz"],)


def lookup(name: str) -> BenchKind:
    key = re.sub(r"\s+", " ", name.strip().lower().replace("–", "-").replace("’", "'"))
    if key not in _DISPLAY_NAMES:
        raise BenchError(f"unknown benchmark '{name}'")
    return KINDS[_DISPLAY_NAMES[key]]


@dataclass(frozen=True)
class MixSpec:
    pool: Tuple[BenchKind, ...]
    count: int
    seed: int

    def __post_init__(self):
        if not self.pool:
            raise BenchError("mix pool is empty")
        if self.count < 1:
            raise BenchError(f"mix count must be >= 1, got {self.count}")


def generate_mix(spec: MixSpec) -> List[BenchKind]:
    """`count` uniform draws with replacement from the pool, fixed by the seed."""
    try:
        gen = ShotRng(spec.seed).generator
    except SimulationError as e:
        raise BenchError(str(e)) from None
    return [spec.pool[i] for i in gen.integers(len(spec.pool), size=spec.count)]


# mix size -> seed
MIX_PRESETS: Dict[int, int] = {4: 4, 8: 8, 16: 16, 32: 32, 48: 48, 64: 64, 80: 80}


def preset_mix(size: int) -> MixSpec:
    if size not in MIX_PRESETS:
        raise BenchError(f"no preset for mix size {size} (have {sorted(MIX_PRESETS)})")
    pool = EXTENDED_POOL if size >= 8 else COMMON_POOL
    return MixSpec(pool, size, MIX_PRESETS[size])


def _mixes_path(path: Union[str, Path, None]) -> Path:
    return Path(path) if path is not None else Path(config.fixtures_dir) / "mixes.txt"


def load_mixes(path: Union[str, Path, None] = None) -> Dict[str, Tuple[BenchKind, ...]]:
    """Read `NAME: KIND, KIND, ...` lines."""
    mixes: Dict[str, Tuple[BenchKind, ...]] = {}
    for number, raw in enumerate(_mixes_path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        name, sep, body = line.partition(":")
        if not sep or not body.strip():
            raise BenchError(f"mixes line {number}: expected `NAME: KIND, KIND, ...`")
        try:
            mixes[name.strip()] = tuple(lookup(item) for item in body.split(","))
        except BenchError as e:
            raise BenchError(f"mixes line {number}: {e}") from None
    return mixes


def load_mix(name: str, path: Union[str, Path, None] = None) -> Tuple[BenchKind, ...]:
    mixes = load_mixes(path)
    if name not in mixes:
        raise BenchError(f"unknown mix '{name}'")
    return mixes[name]


def mix_label(name: str) -> str:
    return re.sub(r"\W+", "_", name.strip().lower()).strip("_")


def build_mix(mix: Union[str, Sequence[BenchKind]], k_resets: int = config.default_resets,
              path: Union[str, Path, None] = None, label: Optional[str] = None) -> Tuple[Circuit, SpliceMap]:
    """Splice a mix (by fixture name or as a list of kinds) into one composite circuit."""
    if isinstance(mix, str):
        label = label or mix_label(mix)
        mix = load_mix(mix, path)
    parts = tuple(build(kind) for kind in mix)
    return splice(SpliceSpec(parts, k_resets, label=label or f"mix_{len(parts)}"))
