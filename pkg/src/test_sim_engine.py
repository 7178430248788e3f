"""Tests for the trajectory simulator, noise channels and counts tables."""
import math

import numpy as np
import pytest
from pydantic import ValidationError

from circuit_core import Circuit, GateKind, Instruction
from config import config
from errors import SimulationError
from reset_analytics import ResetChannel, residual_after_k
from rng import ShotRng
from sim_engine import (AMPLITUDE_BUDGET, SHOT_BLOCK, CountsTable, NoiseModel, StateVector, apply_gate, gate_matrix,
                        read_counts, run_shot, run_shots, seed_block, u3_matrix, write_counts)


def _reset_chain(k: int) -> Circuit:
    b = Circuit.builder(1, f"x_reset{k}").creg("c", 1).x(0)
    for _ in range(k):
        b.reset(0)
    return b.measure(0, "c", 0).finish()


def test_noiseless_bell_is_perfectly_correlated(bell, noiseless):
    counts = run_shots(bell, noiseless, 100_000, seed=11)
    assert set(counts.counts) == {"00", "11"}
    assert counts.shots == 100_000
    assert abs(counts.probability("00") - 0.5) <= 0.005


def test_same_seed_same_table(bell):
    noise = NoiseModel()
    a = run_shots(bell, noise, 5000, seed=3)
    b = run_shots(bell, noise, 5000, seed=3)
    assert a == b
    assert a.to_text() == b.to_text()


def test_different_seed_different_table(bell):
    a = run_shots(bell, NoiseModel(), 5000, seed=3)
    b = run_shots(bell, NoiseModel(), 5000, seed=4)
    assert a.counts != b.counts


def test_worker_count_does_not_change_results(bell):
    one = run_shots(bell, NoiseModel(), 3000, seed=5, chunk_size=250, workers=1)
    four = run_shots(bell, NoiseModel(), 3000, seed=5, chunk_size=250, workers=4)
    assert one == four


@pytest.mark.parametrize("chunk_size", [1, 700, 8192])
def test_chunk_size_does_not_change_results(bell, chunk_size):
    reference = run_shots(bell, NoiseModel(), 2000, seed=7, chunk_size=100_000)
    assert run_shots(bell, NoiseModel(), 2000, seed=7, chunk_size=chunk_size).to_text() == reference.to_text()


def test_seed_block_shrinks_with_width():
    assert seed_block(2) == SHOT_BLOCK
    assert seed_block(16) * 2 ** 16 <= AMPLITUDE_BUDGET
    assert seed_block(40) == 1


def test_circuit_wider_than_limit_is_rejected(monkeypatch):
    monkeypatch.setattr(config, "max_width", 4)
    wide = Circuit.builder(5).h(0).finish()
    with pytest.raises(SimulationError, match="at most 4"):
        run_shots(wide, NoiseModel(), 1, seed=0)
    with pytest.raises(SimulationError, match="at most 4"):
        run_shot(wide, NoiseModel(), ShotRng(0))


def test_counts_header_and_order(bell, noiseless):
    text = run_shots(bell, noiseless, 10, seed=42).to_text()
    lines = text.splitlines()
    assert lines[0] == "# shots=10 seed=42 rng=PCG64"
    outcomes = [line.split("\t")[0] for line in lines[1:]]
    assert outcomes == sorted(outcomes)
    assert sum(int(line.split("\t")[1]) for line in lines[1:]) == 10


def test_bitstring_follows_register_declaration_order(noiseless):
    c = (Circuit.builder(2).creg("a", 1).creg("b", 2)
         .x(1).measure(0, "a", 0).measure(1, "b", 1).finish())
    counts = run_shots(c, noiseless, 50, seed=1)
    assert counts.counts == {"001": 50}
    assert counts.layout == (("a", 1), ("b", 2))
    assert counts.marginal("b").counts == {"01": 50}


def test_last_write_to_a_bit_wins(noiseless):
    c = Circuit.builder(1).creg("c", 1).x(0).measure(0, "c", 0).x(0).measure(0, "c", 0).finish()
    assert run_shots(c, noiseless, 20, seed=1).counts == {"0": 20}


def test_circuit_without_registers(noiseless):
    c = Circuit.builder(1).h(0).finish()
    counts = run_shots(c, noiseless, 7, seed=0)
    assert counts.counts == {"": 7}


def test_readout_error_flips_only_the_record():
    c = Circuit.builder(1).creg("c", 2).x(0).measure(0, "c", 0).measure(0, "c", 1).finish()
    noise = NoiseModel(eps_read_1to0=0.2, eps_read_0to1=0.0, eps_condx=0.0)
    counts = run_shots(c, noise, 40_000, seed=9)
    # the qubit stays in |1>, so the two records flip independently
    assert abs(counts.probability("11") - 0.64) < 0.015
    assert counts.probability("01") > 0.1 and counts.probability("10") > 0.1


def test_readout_error_applied_to_state_keeps_records_consistent():
    c = Circuit.builder(1).creg("c", 2).x(0).measure(0, "c", 0).measure(0, "c", 1).finish()
    noise = NoiseModel(eps_read_1to0=0.2, eps_read_0to1=0.0, eps_condx=0.0, apply_readout_to_state=True)
    counts = run_shots(c, noise, 40_000, seed=9)
    # a flipped qubit is read as 0 from then on, so 0 is never followed by 1
    assert "01" not in counts.counts
    assert abs(counts.probability("00") - 0.2) < 0.015
    assert abs(counts.probability("10") - 0.16) < 0.015


def test_user_readout_noise_can_be_switched_off():
    c = Circuit.builder(1).creg("c", 1).x(0).measure(0, "c", 0).finish()
    noise = NoiseModel(eps_read_1to0=0.5, eps_read_0to1=0.5, user_readout_noise=False)
    assert run_shots(c, noise, 1000, seed=2).counts == {"1": 1000}


def test_conditional_x_failure_rate():
    c = (Circuit.builder(1).creg("c", 2)
         .x(0).measure(0, "c", 0).xif("c", 0, 0).measure(0, "c", 1).finish())
    noise = NoiseModel(eps_read_1to0=0.0, eps_read_0to1=0.0, eps_condx=0.25)
    counts = run_shots(c, noise, 40_000, seed=13)
    assert set(counts.counts) <= {"10", "11"}
    assert abs(counts.probability("11") - 0.25) < 0.015


def test_conditional_x_does_not_fire_on_zero(noiseless):
    c = Circuit.builder(2).creg("c", 2).measure(0, "c", 0).xif("c", 0, 1).measure(1, "c", 1).finish()
    assert run_shots(c, noiseless, 100, seed=0).counts == {"00": 100}


@pytest.mark.parametrize("k", [1, 3])
def test_noiseless_reset_returns_to_ground(noiseless, k):
    b = Circuit.builder(1).creg("c", 1).h(0)
    for _ in range(k):
        b.reset(0)
    counts = run_shots(b.measure(0, "c", 0).finish(), noiseless, 500, seed=1)
    assert counts.counts == {"0": 500}


@pytest.mark.slow
@pytest.mark.parametrize("k,shots,n_sigma", [(1, 1_000_000, 3), (2, 200_000, 4), (4, 200_000, 4), (8, 200_000, 4)])
def test_reset_residual_matches_closed_form(k, shots, n_sigma):
    noise = NoiseModel(user_readout_noise=False)
    counts = run_shots(_reset_chain(k), noise, shots, seed=100 + k)
    expected = residual_after_k(ResetChannel.from_noise(noise, k))
    sigma = math.sqrt(expected * (1 - expected) / shots)
    assert abs(counts.probability("1") - expected) <= n_sigma * sigma


def test_per_qubit_noise():
    c = (Circuit.builder(2).creg("c", 2)
         .x(0).x(1).measure(0, "c", 0).measure(1, "c", 1).finish())
    noise = NoiseModel(eps_read_1to0=(0.0, 1.0), eps_read_0to1=0.0, eps_condx=0.0)
    assert run_shots(c, noise, 100, seed=4).counts == {"10": 100}


def test_per_qubit_noise_must_cover_the_circuit(bell):
    noise = NoiseModel(eps_read_1to0=(0.1,))
    with pytest.raises(SimulationError, match="lists 1 qubits"):
        run_shots(bell, noise, 10, seed=0)


@pytest.mark.parametrize("bad", [-0.1, 1.5, ()])
def test_noise_probabilities_are_validated(bad):
    with pytest.raises(ValidationError):
        NoiseModel(eps_condx=bad)


def test_noise_model_helpers():
    assert NoiseModel.noiseless().is_noiseless
    assert not NoiseModel().is_noiseless
    noise = NoiseModel.from_fidelities(0.95, 0.99)
    assert noise.eps_read_1to0 == pytest.approx(0.05)
    assert noise.eps_condx == pytest.approx(0.01)


@pytest.mark.parametrize("shots", [0, -3, 2.5, True])
def test_shot_count_must_be_positive_integer(bell, shots):
    with pytest.raises(SimulationError):
        run_shots(bell, NoiseModel(), shots, seed=0)


def test_invalid_circuit_is_rejected():
    broken = Circuit(1, (), (Instruction(GateKind.H, (4,)),), "broken")
    with pytest.raises(SimulationError, match="broken"):
        run_shots(broken, NoiseModel(), 10, seed=0)


def test_run_shot_record(noiseless):
    c = Circuit.builder(2).creg("a", 1).creg("b", 1).x(0).measure(0, "a", 0).measure(1, "b", 0).finish()
    record = run_shot(c, noiseless, ShotRng(0))
    assert record["a"] == (1,)
    assert record["b"] == (0,)
    assert record.bitstring == "10"
    with pytest.raises(KeyError):
        record["z"]


def test_apply_gate_uses_qubit_zero_as_msb():
    state = StateVector.zero(2)
    state = apply_gate(state, Instruction(GateKind.X, (0,)))
    assert np.argmax(np.abs(state.amp)) == 2
    # control on qubit 0, target below it
    state = apply_gate(state, Instruction(GateKind.CX, (0, 1)))
    assert np.argmax(np.abs(state.amp)) == 3
    assert state.norm() == pytest.approx(1.0)


def test_apply_gate_control_above_target():
    state = apply_gate(StateVector.zero(2), Instruction(GateKind.X, (1,)))
    state = apply_gate(state, Instruction(GateKind.CX, (1, 0)))
    assert np.argmax(np.abs(state.amp)) == 3


def test_apply_gate_hadamard_amplitudes():
    state = apply_gate(StateVector.zero(1), Instruction(GateKind.H, (0,)))
    np.testing.assert_allclose(state.probabilities(), [0.5, 0.5])


def test_apply_gate_rejects_non_unitaries():
    with pytest.raises(SimulationError):
        apply_gate(StateVector.zero(1), Instruction(GateKind.RESET, (0,)))
    with pytest.raises(SimulationError):
        apply_gate(StateVector.zero(1), Instruction(GateKind.X, (1,)))


def test_u3_special_cases():
    np.testing.assert_allclose(u3_matrix(math.pi / 2, 0.0, math.pi), gate_matrix(Instruction(GateKind.H, (0,))),
                               atol=1e-12)
    np.testing.assert_allclose(u3_matrix(math.pi, 0.0, math.pi), gate_matrix(Instruction(GateKind.X, (0,))),
                               atol=1e-12)


def test_counts_table_validation():
    with pytest.raises(SimulationError, match="expected 3 shots"):
        CountsTable({"0": 1}, 3)
    with pytest.raises(SimulationError, match="different widths"):
        CountsTable({"0": 1, "01": 1}, 2)


def test_counts_projection_and_marginals():
    table = CountsTable({"010": 3, "111": 1}, 4, layout=(("a", 1), ("b", 2)))
    assert table.register_span("b") == (1, 3)
    assert table.marginal("a").counts == {"0": 3, "1": 1}
    assert table.project([(0, 1), (2, 3)]).counts == {"00": 3, "11": 1}
    assert table.bit_marginals() == [0.25, 1.0, 0.25]
    with pytest.raises(SimulationError):
        table.register_span("z")
    with pytest.raises(SimulationError):
        table.project([(2, 5)])


def test_counts_merge():
    a = CountsTable({"0": 2, "1": 1}, 3, seed=1)
    b = CountsTable({"1": 4}, 4, seed=2)
    merged = a.merge(b)
    assert merged.counts == {"0": 2, "1": 5}
    assert merged.shots == 7 and merged.seed is None


def test_counts_file_round_trip(tmp_path, bell, noiseless):
    counts = run_shots(bell, noiseless, 64, seed=8)
    back = read_counts(write_counts(counts, tmp_path / "bell.counts"))
    assert back.counts == counts.counts
    assert (back.shots, back.seed, back.rng) == (64, 8, "PCG64")


def test_malformed_counts_text():
    with pytest.raises(SimulationError, match="line 2"):
        CountsTable.from_text("# shots=1 seed=0 rng=PCG64\n0 1\n")


@pytest.mark.parametrize("seed", [-1, 2 ** 64, "7", True])
def test_seed_range(seed):
    with pytest.raises(SimulationError):
        ShotRng(seed)


def test_spawned_streams_are_reproducible():
    a = [s.generator.random() for s in ShotRng(123).spawn(3)]
    b = [s.generator.random() for s in ShotRng(123).spawn(3)]
    assert a == b
    assert len(set(a)) == 3
