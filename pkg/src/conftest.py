"""Shared pytest fixtures: repo paths and a few small circuits."""
import sys
from pathlib import Path

import pytest
from hypothesis import strategies as st

SRC = Path(__file__).resolve().parent
REPO = SRC.parent
FIXTURES = REPO / "fixtures"
CATALOG = REPO / "data" / "pricing_catalog.txt"

if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from circuit_core import Circuit  # noqa: E402
from sim_engine import NoiseModel  # noqa: E402


@pytest.fixture
def bell() -> Circuit:
    return Circuit.builder(2, "bell").creg("c", 2).h(0).cx(0, 1).measure(0, "c", 0).measure(1, "c", 1).finish()


@pytest.fixture
def noiseless() -> NoiseModel:
    return NoiseModel.noiseless()


@pytest.fixture
def in_repo(monkeypatch):
    """Run from the repo root so configured relative paths resolve."""
    monkeypatch.chdir(REPO)
    return REPO


_ONE_QUBIT = ("h", "x", "rz", "u3", "reset")
_TWO_QUBIT = ("cx", "cu3")
_ANGLES = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False)


@st.composite
def circuits(draw, max_width: int = 4, max_ops: int = 20) -> Circuit:
    """Random valid circuits over every instruction kind."""
    width = draw(st.integers(min_value=1, max_value=max_width))
    n_bits = draw(st.integers(min_value=1, max_value=3))
    b = Circuit.builder(width).creg("c", n_bits)
    qubit = st.integers(min_value=0, max_value=width - 1)
    bit = st.integers(min_value=0, max_value=n_bits - 1)
    kinds = _ONE_QUBIT + ("measure", "xif", "barrier") + (_TWO_QUBIT if width > 1 else ())
    for kind in draw(st.lists(st.sampled_from(kinds), max_size=max_ops)):
        q = draw(qubit)
        if kind in ("h", "x", "reset"):
            getattr(b, kind)(q)
        elif kind == "rz":
            b.rz(draw(_ANGLES), q)
        elif kind == "u3":
            b.u3(draw(_ANGLES), draw(_ANGLES), draw(_ANGLES), q)
        elif kind == "measure":
            b.measure(q, "c", draw(bit))
        elif kind == "xif":
            b.xif("c", draw(bit), q)
        elif kind == "barrier":
            b.barrier(q)
        else:
            t = draw(qubit.filter(lambda other: other != q))
            if kind == "cx":
                b.cx(q, t)
            else:
                b.cu3(draw(_ANGLES), draw(_ANGLES), draw(_ANGLES), q, t)
    return b.finish()
