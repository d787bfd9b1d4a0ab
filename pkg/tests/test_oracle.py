from __future__ import annotations

import itertools
import json
import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from ffstlab.chain import DisorderModel, build_coupling_matrix, make_uniform_spec, sample_disorder
from ffstlab.errors import InvalidArgument, SizeCapExceeded
from ffstlab.fermions import analyze_modes, infidelity_bound, plan_transfer
from ffstlab.oracle import (
    PAULI,
    ChannelMatrix,
    Ensemble,
    ProtocolResult,
    _outputs_from_ptm,
    average_fidelity,
    effective_gate_check,
    encoded_transfer,
    fock_state,
    graph_state_check,
    jw_spectrum_check,
    predicted_gate,
    ptm_from_outputs,
    single_transfer_channel,
    subset_sums,
)
from ffstlab.spin import build_spin_hamiltonian

from _dense import dense_xx, reduced_qubit, site_op

OCTAHEDRON = [
    np.array(v, dtype=complex) / np.linalg.norm(v)
    for v in ([1, 0], [0, 1], [1, 1], [1, -1], [1, 1j], [1, -1j])
]


def probe_fidelity(channel_fn):
    """Average fidelity as the mean over the six Pauli eigenstates (a qubit 2-design)."""
    return np.mean([np.vdot(v, channel_fn(np.outer(v, v.conj())) @ v).real for v in OCTAHEDRON])


def test_fidelity_of_reference_channels():
    assert average_fidelity(np.eye(4)) == pytest.approx(1.0)
    assert average_fidelity(np.diag([1.0, 0, 0, 0])) == pytest.approx(0.5)  # fully depolarizing
    assert average_fidelity(np.diag([1.0, 0, 0, 1])) == pytest.approx(2 / 3)  # full dephasing
    assert isinstance(average_fidelity(np.eye(4)), float)


@given(st.lists(st.floats(-1, 1), min_size=16, max_size=16))
def test_ptm_output_round_trip(entries):
    R = np.array(entries).reshape(4, 4)
    assert np.allclose(ptm_from_outputs(_outputs_from_ptm(R)), R, atol=1e-12)


def test_choi_of_identity_and_channel_serialization():
    ch = ChannelMatrix(np.eye(4))
    assert np.allclose(np.linalg.eigvalsh(ch.choi()), [0, 0, 0, 2])
    assert ch.is_trace_preserving() and ch.is_completely_positive()
    transposer = ChannelMatrix(np.diag([1.0, 1, -1, 1]))  # transpose map: positive, not CP
    assert transposer.min_choi_eigenvalue() == pytest.approx(-1.0)
    assert not transposer.is_completely_positive()
    back = ChannelMatrix.from_dict(json.loads(json.dumps(ch.to_dict())))
    assert np.array_equal(back.ptm, ch.ptm) and back.members == ch.members


@pytest.mark.parametrize("g,delta,tau", [(0.3, 0.0, 7.4), (0.1, 0.0, 22.2), (0.5, 0.2, 3.0)])
def test_single_transfer_matches_density_matrix_reference(g, delta, tau):
    spec = make_uniform_spec(1, 1.0, g, delta=delta)
    H = dense_xx(3, [(0, 1, g), (1, 2, g)], [delta, 0.0, delta])
    U = scipy.linalg.expm(-1j * H * tau)
    down = np.diag([1.0, 0.0])

    def reference(rho_in):
        rho = np.kron(down, np.kron(np.eye(2) / 2, rho_in))  # right end, chain, left end
        return reduced_qubit(U @ rho @ U.conj().T, 2, 3)

    channel = single_transfer_channel(spec, tau)
    assert channel.exhaustive and channel.members == 2
    assert average_fidelity(channel) == pytest.approx(probe_fidelity(reference), abs=1e-12)
    for j in range(4):
        out = reference(PAULI[j])
        assert np.allclose([0.5 * np.trace(PAULI[i] @ out).real for i in range(4)], channel.ptm[:, j], atol=1e-12)


def test_decoupled_ends_give_half_fidelity():
    spec = make_uniform_spec(3, 1.0, 0.0)
    assert average_fidelity(single_transfer_channel(spec, 10.0)) == pytest.approx(0.5, abs=1e-12)


def test_unencoded_transfer_loses_coherence():
    spec = make_uniform_spec(3, 1.0, 0.01)
    channel = single_transfer_channel(spec, plan_transfer(spec).tau)
    assert average_fidelity(channel) == pytest.approx(2 / 3, abs=0.01)
    assert channel.is_trace_preserving() and channel.is_completely_positive()


def encoded_reference(g, tau):
    """Dense five-site model of the encoded protocol for a single chain site."""
    n = 5  # a, chain, b, a', b'
    fields = [0.0] * n
    U1 = scipy.linalg.expm(-1j * tau * dense_xx(n, [(0, 1, g), (1, 2, g)], fields))
    U2 = scipy.linalg.expm(-1j * tau * dense_xx(n, [(3, 1, g), (1, 4, g)], fields))
    P1 = site_op(np.diag([0.0, 1.0]), 2, n)
    cnot = (np.eye(2**n) - P1) + P1 @ site_op(np.array([[0, 1], [1, 0]]), 4, n)
    W = cnot @ U2 @ U1

    def raw(rho_in, chain):
        # encode a -> (a, a'): |0> -> |00>, |1> -> |11>
        enc = np.zeros((2**n, 2), dtype=complex)
        base = chain << 1
        enc[base, 0] = 1.0
        enc[base | 1 | (1 << 3), 1] = 1.0
        rho = enc @ rho_in @ enc.conj().T
        return reduced_qubit(W @ rho @ W.conj().T, 2, n)

    vac = raw(np.full((2, 2), 0.5), 0)
    theta = -np.angle(vac[0, 1])
    D = np.diag([1.0, np.exp(-1j * theta)])

    def channel(rho_in):
        return sum(D @ raw(rho_in, c) @ D.conj().T for c in (0, 1)) / 2

    return channel


@pytest.mark.parametrize("g", [0.05, 0.2])
def test_encoded_transfer_matches_dense_reference(g):
    spec = make_uniform_spec(1, 1.0, g)
    tau = plan_transfer(spec).tau
    result = encoded_transfer(spec, tau)
    assert result.average_fidelity == pytest.approx(probe_fidelity(encoded_reference(g, tau)), abs=1e-12)


def test_encoded_transfer_restores_coherence():
    spec = make_uniform_spec(3, 1.0, 0.01)
    tau = plan_transfer(spec).tau
    bound = infidelity_bound(analyze_modes(build_coupling_matrix(spec)), 2)
    result = encoded_transfer(spec, tau)
    assert result.exhaustive and result.chain_states == 8
    assert result.average_fidelity >= 1 - 2 * bound
    assert result.channel.is_trace_preserving() and result.channel.is_completely_positive()
    assert result.diagnostics["max_phase_deviation"] < 1e-6
    undecoded = encoded_transfer(spec, tau, decode=False)
    assert undecoded.average_fidelity == pytest.approx(2 / 3, abs=0.01)
    back = ProtocolResult.from_dict(json.loads(result.to_json()))
    assert back.average_fidelity == result.average_fidelity
    assert np.array_equal(back.channel.ptm, result.channel.ptm)


def test_sampled_ensemble_is_deterministic():
    spec = make_uniform_spec(5, 1.0, 0.05)
    tau = plan_transfer(spec).tau
    a = single_transfer_channel(spec, tau, Ensemble.sampled(12, seed=3))
    b = single_transfer_channel(spec, tau, Ensemble.sampled(12, seed=3), threads=3)
    assert np.array_equal(a.ptm, b.ptm)
    assert not a.exhaustive and a.members == 12 and a.fidelity_stderr > 0
    with pytest.raises(InvalidArgument):
        Ensemble.sampled(0)


def test_threads_do_not_change_exhaustive_results():
    spec = make_uniform_spec(3, 1.0, 0.05)
    tau = plan_transfer(spec).tau
    assert np.array_equal(encoded_transfer(spec, tau).channel.ptm, encoded_transfer(spec, tau, threads=4).channel.ptm)


def test_oracle_size_caps():
    with pytest.raises(SizeCapExceeded):
        encoded_transfer(make_uniform_spec(13, 1.0, 0.01), 1.0)
    with pytest.raises(SizeCapExceeded):
        effective_gate_check(make_uniform_spec(9, 1.0, 0.01), 1.0)


def test_subset_sums():
    assert np.allclose(subset_sums([1.0, -2.0, 0.5]), sorted([0, 1, -2, 0.5, -1, 1.5, -1.5, -0.5]))


@given(st.integers(0, 2**32), st.integers(1, 7))
@settings(max_examples=15, deadline=None)
def test_jordan_wigner_spectrum_with_fields(seed, N):
    spec = sample_disorder(make_uniform_spec(N, 1.0, 0.1), DisorderModel(kind="both", strength=0.5, seed=seed), 0)
    check = jw_spectrum_check(spec)
    assert check.passed and check.max_deviation < 1e-10


def test_fock_states_are_eigenstates():
    spec = make_uniform_spec(4, 1.0, 0.0)
    H = build_spin_hamiltonian(spec).to_sparse()
    energies = analyze_modes(build_coupling_matrix(spec)).energies
    for occupied in [(), (1,), (2, 4), (1, 2, 3, 4)]:
        psi = fock_state(spec, occupied)
        assert np.linalg.norm(psi) == pytest.approx(1.0)
        assert np.allclose(H @ psi, sum(energies[k - 1] for k in occupied) * psi, atol=1e-12)


def test_predicted_gate_is_signed_swap():
    for n_z in (0, 1):
        G = predicted_gate(n_z)
        assert np.allclose(G @ G.T, np.eye(4))
        assert np.array_equal(np.abs(G), np.eye(4)[[0, 2, 1, 3]])
    assert np.array_equal(predicted_gate(1), -predicted_gate(0))


def test_gate_structure_weak_and_strong_coupling():
    weak = make_uniform_spec(3, 1.0, 0.01)
    check = effective_gate_check(weak, plan_transfer(weak).tau)
    assert len(check.per_state) == 8
    assert check.process_fidelity >= 0.99
    # the n_z-dependent sign must be the one predicted, not its opposite
    assert all(overlap > 0.99 for _, _, overlap in check.per_state)
    strong = make_uniform_spec(3, 1.0, 0.2)
    assert effective_gate_check(strong, plan_transfer(strong).tau).process_fidelity < 0.99


def test_graph_state_phases():
    spec = make_uniform_spec(3, 1.0, 0.01)
    tau = plan_transfer(spec).tau
    plus = (1 / math.sqrt(2), 1 / math.sqrt(2))
    for occupied in [(), (2,), (1, 3)]:
        assert graph_state_check(spec, tau, plus, plus, occupied).overlap >= 0.999
    assert graph_state_check(spec, tau / 2, plus, plus).overlap < 0.9


def test_fock_occupations_enumerated():
    combos = [c for r in range(4) for c in itertools.combinations(range(1, 4), r)]
    check = effective_gate_check(make_uniform_spec(3, 1.0, 0.01), 1.0, chain_states=combos[:3])
    assert [s[0] for s in check.per_state] == [(), (1,), (2,)]


def test_decoupled_ends_give_replacement_channel():
    spec = make_uniform_spec(3, 1.0, 0.0)
    R = single_transfer_channel(spec, 5.0).ptm
    expected = np.zeros((4, 4))
    expected[0, 0] = expected[3, 0] = 1.0  # every input mapped to spin down
    assert np.allclose(R, expected, atol=1e-12)
    assert encoded_transfer(spec, 5.0).average_fidelity == pytest.approx(0.5, abs=1e-12)


def test_decoding_is_necessary_for_n5():
    spec = make_uniform_spec(5, 1.0, 0.01)
    tau = plan_transfer(spec).tau
    decoded = encoded_transfer(spec, tau).average_fidelity
    undecoded = encoded_transfer(spec, tau, decode=False).average_fidelity
    assert undecoded == pytest.approx(2 / 3, abs=0.01) and undecoded < decoded
    plain = single_transfer_channel(spec, tau)
    assert plain.ptm[3, 3] > 0.99  # populations transfer
    assert max(abs(plain.ptm[1, 1]), abs(plain.ptm[2, 2])) < 0.01  # coherences average out


def test_gate_vacuum_and_zero_mode_sign():
    spec = make_uniform_spec(3, 1.0, 0.01)
    tau = plan_transfer(spec).tau
    check = effective_gate_check(spec, tau, chain_states=[(), (2,)])
    (_, f_vac, o_vac), (_, f_z, o_z) = check.per_state
    assert f_vac >= 0.999 and f_z >= 0.999
    assert o_vac > 0.999 and o_z > 0.999  # both follow predicted_gate(n_z) with their own n_z


def test_graph_state_down_input_with_vacuum():
    spec = make_uniform_spec(3, 1.0, 0.01)
    assert graph_state_check(spec, plan_transfer(spec).tau, (1.0, 0.0), (1.0, 0.0)).overlap >= 0.999
