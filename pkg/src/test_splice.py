"""Tests for splicing parts into one composite and splitting the record back."""
import pytest

from circuit_core import Circuit, GateKind, census
from dist_metrics import tvd_counts
from errors import SpliceError
from sim_engine import CountsTable, run_shots
from splice import (SpliceSpec, format_map, parse_map, read_map, splice, splice_copies, split_counts,
                    write_map)


@pytest.fixture
def ghz3() -> Circuit:
    b = Circuit.builder(3, "ghz").creg("c", 3).h(0).cx(0, 1).cx(1, 2)
    for q in range(3):
        b.measure(q, "c", q)
    return b.finish()


@pytest.fixture
def one_bit() -> Circuit:
    return Circuit.builder(1, "one").creg("r", 1).x(0).measure(0, "r", 0).finish()


def test_two_parts_layout(bell, ghz3):
    composite, smap = splice(SpliceSpec((bell, ghz3), k_resets=2))
    assert composite.label == "splice2_k2"
    assert composite.width == 3
    assert [(r.name, r.size) for r in composite.cregs] == [("p0_c", 2), ("p1_c", 3)]

    ops = composite.ops
    assert ops[:len(bell.ops)] == tuple(op.relabel({"c": "p0_c"}) for op in bell.ops)
    separator = ops[len(bell.ops):len(bell.ops) + 6]
    assert all(op.kind is GateKind.RESET for op in separator)
    assert [op.qubits[0] for op in separator] == [0, 1, 2, 0, 1, 2]
    assert ops[-1].clbit == ("p1_c", 2)
    assert census(composite).n_reset == 6

    assert smap.total_bits == 5
    assert smap.parts[0].registers == (("p0_c", 0, 2),)
    assert smap.parts[1].registers == (("p1_c", 2, 5),)
    assert smap.parts[1].original_layout() == (("c", 3),)


def test_no_resets_before_first_or_after_last_part(bell):
    composite, _ = splice(SpliceSpec((bell, bell, bell), k_resets=1))
    assert composite.ops[0].kind is GateKind.H
    assert composite.ops[-1].kind is GateKind.MEASURE
    assert census(composite).n_reset == 2 * 2


def test_zero_resets_still_renames(bell):
    composite, smap = splice(SpliceSpec((bell, bell), k_resets=0))
    assert census(composite).n_reset == 0
    assert [r.name for r in composite.cregs] == ["p0_c", "p1_c"]
    assert smap.effective_shots_factor == 2


def test_single_part_is_unchanged(bell):
    composite, smap = splice(SpliceSpec((bell,), k_resets=4))
    assert composite is bell
    assert smap.parts[0].prefix == ""
    assert smap.parts[0].registers == (("c", 0, 2),)


def test_custom_prefixes_and_label(bell, one_bit):
    composite, smap = splice(SpliceSpec((bell, one_bit), 1, prefixes=("a_", "b_"), label="custom"))
    assert composite.label == "custom"
    assert [r.name for r in composite.cregs] == ["a_c", "b_r"]
    assert smap.parts[1].original_layout() == (("r", 1),)


def test_register_collision_after_prefixing(bell):
    with pytest.raises(SpliceError, match="duplicate register 'x_c'"):
        splice(SpliceSpec((bell, bell), 1, prefixes=("x_", "x_")))


@pytest.mark.parametrize("spec,fragment", [
    (SpliceSpec(()), "at least one part"),
    (SpliceSpec((Circuit.create(1),), k_resets=-1), "k_resets must be >= 0"),
    (SpliceSpec((Circuit.create(1), Circuit.create(1)), prefixes=("a_",)), "1 prefixes for 2 parts"),
])
def test_bad_specs(spec, fragment):
    with pytest.raises(SpliceError, match=fragment):
        splice(spec)


def test_invalid_part_is_rejected(bell):
    broken = Circuit(1, (), bell.ops[:2], "broken")  # cx 0 1 on a single qubit
    with pytest.raises(SpliceError, match="part 1"):
        splice(SpliceSpec((bell, broken)))


@pytest.mark.parametrize("filler", [
    Circuit.create(2, label="empty"),
    Circuit.builder(2, "wipe").reset(0).barrier().reset(1).finish(),
])
def test_part_with_nothing_to_run_is_rejected(bell, filler):
    with pytest.raises(SpliceError, match="part 0 .* no ops besides resets"):
        splice(SpliceSpec((filler, bell, bell), 1))
    with pytest.raises(SpliceError, match="part 1"):
        splice(SpliceSpec((bell, filler, bell), 1))


def test_copies(bell):
    composite, smap = splice_copies(bell, 8, k_resets=4)
    assert composite.label == "bellx8_k4"
    assert census(composite).n_reset == 7 * 4 * 2
    assert smap.effective_shots(1000) == 8000
    with pytest.raises(SpliceError):
        splice_copies(bell, 0)


def test_split_counts_restores_each_part(bell, one_bit, noiseless):
    composite, smap = splice(SpliceSpec((one_bit, bell, one_bit), k_resets=1))
    counts = run_shots(composite, noiseless, 2000, seed=17)
    first, middle, last = split_counts(counts, smap)
    assert first.counts == {"1": 2000}
    assert last.counts == {"1": 2000}
    assert set(middle.counts) == {"00", "11"}
    assert middle.layout == (("c", 2),)
    assert middle.marginal("c").counts == middle.counts


def test_split_rejects_width_mismatch(bell):
    _, smap = splice(SpliceSpec((bell, bell)))
    with pytest.raises(SpliceError, match="map expects 4"):
        split_counts(CountsTable({"00": 1}, 1), smap)


@pytest.mark.slow
def test_eight_bell_round_trip_matches_direct_runs(bell, noiseless):
    shots = 50_000
    composite, smap = splice_copies(bell, 8, k_resets=1)
    assert smap.effective_shots(shots) == 400_000
    direct = run_shots(bell, noiseless, shots, seed=1)
    parts = split_counts(run_shots(composite, noiseless, shots, seed=2), smap)
    assert len(parts) == 8
    for part in parts:
        assert tvd_counts(part, direct) <= 0.02


def test_map_text_round_trip(tmp_path, bell, one_bit):
    _, smap = splice(SpliceSpec((bell, one_bit), 1))
    text = format_map(smap)
    assert text == "0\tbell\tp0_c=0:2\n1\tone\tp1_r=2:3\n"
    assert parse_map(text) == smap
    assert read_map(write_map(smap, tmp_path / "m.map")) == smap


def test_map_without_label():
    text = "0\t-\tp0_c=0:2\n"
    assert parse_map(text).parts[0].label == ""


def test_malformed_map():
    with pytest.raises(SpliceError, match="map line 2"):
        parse_map("0\tbell\tp0_c=0:2\nnot a map line\n")
