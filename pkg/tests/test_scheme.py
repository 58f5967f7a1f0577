import io
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import const_model
from gamechain.model import InnovationLaw, model_preset
from gamechain.scheme import (DiscretePath, block_partition, coarse_path, coarse_states,
                              coupled_pair, coupled_sup_errors, read_batch, run_chain,
                              simulate_batch, simulate_path, step, write_batch)


# ---- one step and whole chains ----------------------------------------------------

def test_step_zero_coefficients_is_identity():
    x = np.array([[0.3], [-1.2]])
    assert np.array_equal(step(x, np.array([[1.0], [-1.0]]), const_model(0.0, 0.0), 7), x)


def test_step_hand_values():
    assert step(np.zeros(1), np.ones(1), const_model(1.0, 0.0), 4)[0] == pytest.approx(0.5)
    assert step(np.ones(1), -np.ones(1), const_model(2.0, 1.0, L=2.0), 100)[0] == \
        pytest.approx(0.81, abs=1e-15)


def test_zero_model_constant_path():
    p = simulate_path(const_model(0.0, 0.0, x0=0.7), InnovationLaw.rademacher(1), 10, 1)
    assert np.all(p.states == 0.7)


def test_hand_recursion_two_steps():
    states = run_chain(const_model(1.0, 0.0, x0=0.25), np.array([[[1.0], [-1.0]]]), 2)
    assert np.allclose(states[0, :, 0], [0.25, 0.25 + 1 / math.sqrt(2), 0.25], atol=1e-15)


def test_piecewise_constant_extension():
    p = DiscretePath(4, np.arange(5.0)[:, None])
    assert p.value_at(0.0)[0] == 0.0
    assert p.value_at(0.49)[0] == 1.0
    assert p.value_at(0.5)[0] == 2.0
    assert p.value_at(1.0)[0] == 4.0
    with pytest.raises(ValueError):
        p.value_at(1.5)


def test_mean_and_variance_by_simulation():
    m = const_model(0.3, 0.1, x0=0.2)
    law = InnovationLaw.rademacher(1)
    finals = np.concatenate([simulate_batch(m, law, 256, 25_000, 4, start=s)[0][:, -1, 0]
                             for s in range(0, 100_000, 25_000)])
    R = len(finals)
    mean, var = finals.mean(), finals.var(ddof=1)
    assert abs(mean - 0.3) < 4 * finals.std(ddof=1) / math.sqrt(R)
    # se of the sample variance from the fourth central moment
    m4 = np.mean((finals - mean) ** 4)
    assert abs(var - 0.09) < 4 * math.sqrt((m4 - var ** 2) / R)


def test_simulation_reproducible_and_batch_independent():
    m, law = model_preset("tanh-1d"), InnovationLaw.rademacher(1)
    whole = simulate_batch(m, law, 32, 10, 9)[0]
    parts = np.concatenate([simulate_batch(m, law, 32, 4, 9, start=0)[0],
                            simulate_batch(m, law, 32, 6, 9, start=4)[0]])
    assert np.array_equal(whole, parts)
    assert np.array_equal(simulate_path(m, law, 32, 9, 7).states, whole[7])


def test_atom_index_matches_innovations():
    law = InnovationLaw.trinomial()
    p = simulate_path(model_preset("tanh-1d"), law, 20, 2)
    assert np.array_equal(law.atoms[p.atom_index], p.innovations)


# ---- serialisation ----------------------------------------------------------------

def test_csv_round_trip_is_exact():
    p = simulate_path(model_preset("sine-1d"), InnovationLaw.rademacher(1), 17, 3)
    q = DiscretePath.from_csv(p.to_csv())
    assert q.n_steps == 17
    assert np.array_equal(q.states, p.states)
    assert np.array_equal(q.innovations, p.innovations)
    assert p.to_csv().startswith("# gamechain-path v1")


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.integers(1, 12), st.integers(1, 4), st.booleans(),
       st.integers(0, 2 ** 32 - 1))
def test_binary_batch_round_trip(d, N, count, with_xi, seed):
    g = np.random.default_rng(seed)
    paths = [DiscretePath(N, g.normal(size=(N + 1, d)), g.normal(size=(N, d)) if with_xi else None)
             for _ in range(count)]
    buf = io.BytesIO()
    write_batch(paths, buf)
    buf.seek(0)
    back = read_batch(buf)
    assert len(back) == count
    for a, b in zip(paths, back):
        assert np.array_equal(a.states, b.states)
        if with_xi:
            assert np.array_equal(a.innovations, b.innovations)
        else:
            assert b.innovations is None


def test_binary_rejects_bad_magic():
    with pytest.raises(ValueError):
        read_batch(io.BytesIO(b"XXXX" + bytes(20)))


# ---- block partition and coarse process -------------------------------------------

def test_partition_16():
    p = block_partition(16)
    assert (p.q, p.k_N, p.k_max) == (2, 8, 8)
    assert p.block_ends == tuple(range(0, 17, 2))
    assert p.delta == Fraction(1, 8)
    assert not p.has_tail


def test_partition_17_has_tail():
    p = block_partition(17)
    assert (p.q, p.k_N, p.k_max) == (2, 8, 9)
    assert p.block_ends[-1] == 16
    assert p.decision_times[-1] == 17


@given(st.integers(1, 10 ** 6))
def test_partition_invariants(N):
    p = block_partition(N)
    assert p.q ** 4 <= N < (p.q + 1) ** 4
    assert p.decision_times[0] == 0 and p.decision_times[-1] == N
    assert all(b - a == p.q for a, b in zip(p.block_ends, p.block_ends[1:]))
    assert N - p.block_ends[-1] < p.q


def test_coarse_equals_chain_when_q_is_one():
    m = model_preset("sine-1d")
    for N in (1, 10, 15):
        p = simulate_path(m, InnovationLaw.rademacher(1), N, 5)
        assert np.array_equal(coarse_path(p, m).states, p.states)


def test_coarse_equals_chain_for_constant_coefficients():
    m = const_model(0.7, -0.2)
    states, xi, _ = simulate_batch(m, InnovationLaw.rademacher(1), 100, 20, 1)
    assert np.array_equal(coarse_states(m, states, xi, block_partition(100)), states)


def test_coarse_differs_for_state_dependent_sigma():
    m = model_preset("sine-1d")
    p = simulate_path(m, InnovationLaw.rademacher(1), 256, 5)
    c = coarse_path(p, m)
    blocks = block_partition(256).block_ends
    assert not np.array_equal(c.states, p.states)
    # the coarse process restarts nowhere; it only freezes coefficients
    assert c.states[0, 0] == p.states[0, 0]
    assert len(blocks) == 65


# ---- coupled pairs ----------------------------------------------------------------

def test_constant_coefficients_same_grid_coincide():
    pair = coupled_pair(const_model(0.5, 0.1), 16, 16, seed=2)
    assert pair.grid_discrepancy() == 0.0


def test_ode_sup_error_is_one_over_n():
    for N in (4, 100):
        pair = coupled_pair(model_preset("ode-1d"), N, 8 * N, seed=0)
        assert math.sqrt(pair.sup_error_sq()) == pytest.approx(1 / N, rel=1e-12)


def test_coupled_pair_deterministic():
    m = model_preset("tanh-1d")
    a, b = coupled_pair(m, 8, 64, 3, 5), coupled_pair(m, 8, 64, 3, 5)
    assert np.array_equal(a.chain.states, b.chain.states)
    assert np.array_equal(a.reference, b.reference)


def test_bridge_increments_sum_to_chain_increments():
    pair = coupled_pair(const_model(1.0, 0.0), 8, 64, 1)
    sums = pair.increments.reshape(8, 8, 1).sum(axis=1)
    assert np.allclose(sums, pair.chain.innovations / math.sqrt(8), atol=1e-14)


def test_sup_errors_independent_of_jobs():
    m = model_preset("tanh-1d")
    a = coupled_sup_errors(m, 16, 256, 40, 3, jobs=1)
    b = coupled_sup_errors(m, 16, 256, 40, 3, jobs=3)
    assert np.array_equal(a, b)
