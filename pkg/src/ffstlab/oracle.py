"""Brute-force ground truth for free-fermion state transfer.

Everything here evolves full many-body spin states, so it is exponential in
the number of sites and meant for short chains.  The intermediate chain is at
infinite temperature, which for observables linear in the density matrix is
exactly the uniform average over chain computational basis states.

Qubit conventions: ``|0>`` is spin down (bit 0), ``|1>`` is spin up, and the
Pauli matrices are the standard ones in that computational basis.  Pauli
transfer matrices use ``R[i, j] = Tr[s_i E(s_j)] / 2`` with ``s = (I, X, Y, Z)``.
"""

from __future__ import annotations

import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.optimize

from .chain import ChainSpec, build_coupling_matrix, disorder_rng
from .errors import InvalidArgument, SizeCapExceeded
from .fermions import analyze_modes, pick_resonant_mode
from .spin import (
    DEFAULT_SITE_CAP,
    SpinHamiltonian,
    build_chain_hamiltonian,
    build_spin_hamiltonian,
    evolve_state,
    popcount,
)

PAULI = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)

# the six pure inputs used to probe a channel: |0>, |1>, |+>, |->, |+i>, |-i>
_PROBES = np.array(
    [[1, 0], [0, 1], [1, 1], [1, -1], [1, 1j], [1, -1j]],
    dtype=complex,
) / np.array([1, 1, math.sqrt(2), math.sqrt(2), math.sqrt(2), math.sqrt(2)])[:, None]

GATE_SITE_CAP = 9


# ---------------------------------------------------------------------------
# channels


@dataclass(frozen=True)
class ChannelMatrix:
    """Single-qubit channel in the Pauli transfer representation."""

    ptm: np.ndarray
    members: int = 1
    exhaustive: bool = True
    fidelity_stderr: float = 0.0

    def choi(self) -> np.ndarray:
        """Choi matrix ``sum_ab |a><b| (x) E(|a><b|)``."""
        outputs = _outputs_from_ptm(self.ptm)
        J = np.zeros((4, 4), dtype=complex)
        for a, b in itertools.product(range(2), repeat=2):
            J[2 * a : 2 * a + 2, 2 * b : 2 * b + 2] = outputs[a, b]
        return J

    def trace_defect(self) -> float:
        return float(np.max(np.abs(self.ptm[0] - np.array([1.0, 0.0, 0.0, 0.0]))))

    def min_choi_eigenvalue(self) -> float:
        return float(np.min(np.linalg.eigvalsh(self.choi())))

    def is_trace_preserving(self, tol: float = 1e-10) -> bool:
        return self.trace_defect() < tol

    def is_completely_positive(self, floor: float = -1e-9) -> bool:
        return self.min_choi_eigenvalue() >= floor

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "ptm": [float(x) for x in np.asarray(self.ptm).ravel()],
            "members": self.members,
            "exhaustive": self.exhaustive,
            "fidelity_stderr": self.fidelity_stderr,
        }

    @classmethod
    def from_dict(cls, data: dict) -> ChannelMatrix:
        return cls(
            ptm=np.asarray(data["ptm"], dtype=float).reshape(4, 4),
            members=int(data["members"]),
            exhaustive=bool(data["exhaustive"]),
            fidelity_stderr=float(data["fidelity_stderr"]),
        )


def _outputs_from_ptm(R: np.ndarray) -> np.ndarray:
    """``E(|a><b|)`` for a, b in {0, 1}, rebuilt from the transfer matrix."""
    out = np.zeros((2, 2, 2, 2), dtype=complex)
    for a, b in itertools.product(range(2), repeat=2):
        # |a><b| = 1/2 sum_j (s_j)_{ba} s_j  and  E(s_j) = sum_i R_ij s_i
        coeffs = 0.5 * PAULI[:, b, a]
        out[a, b] = np.einsum("j,ij,ikl->kl", coeffs, R, PAULI)
    return out


def ptm_from_outputs(outputs: np.ndarray) -> np.ndarray:
    """Pauli transfer matrix from ``outputs[a, b] = E(|a><b|)``.

    The channel is probed on the six Pauli eigenstates, whose outputs follow
    from the operator-basis outputs by linearity.
    """
    probe_out = np.einsum("pa,pb,abkl->pkl", _PROBES, _PROBES.conj(), outputs)
    image = np.array(
        [
            probe_out[0] + probe_out[1],
            probe_out[2] - probe_out[3],
            probe_out[4] - probe_out[5],
            probe_out[0] - probe_out[1],
        ]
    )
    return 0.5 * np.einsum("ikl,jlk->ij", PAULI, image).real


def average_fidelity(channel: ChannelMatrix | np.ndarray) -> float:
    """Average fidelity ``1/2 + 1/12 sum_i Tr[s_i E(s_i)]`` over the Bloch sphere."""
    R = channel.ptm if isinstance(channel, ChannelMatrix) else np.asarray(channel)
    return float(0.5 + (R[1, 1] + R[2, 2] + R[3, 3]) / 6.0)


def _qubit_block(psi_a: np.ndarray, psi_b: np.ndarray, qubit: int) -> np.ndarray:
    """``Tr_rest |psi_a><psi_b|`` restricted to one qubit."""
    dim = psi_a.size
    rest = np.arange(dim, dtype=np.int64)
    rest = rest[(rest >> qubit) & 1 == 0]
    amp_a = np.stack([psi_a[rest], psi_a[rest | (1 << qubit)]])
    amp_b = np.stack([psi_b[rest], psi_b[rest | (1 << qubit)]])
    return amp_a @ amp_b.conj().T


def _operator_outputs(final: Sequence[np.ndarray], qubit: int) -> np.ndarray:
    out = np.zeros((2, 2, 2, 2), dtype=complex)
    for a, b in itertools.product(range(2), repeat=2):
        out[a, b] = _qubit_block(final[a], final[b], qubit)
    return out


# ---------------------------------------------------------------------------
# ensembles


@dataclass(frozen=True)
class Ensemble:
    """Chain computational basis states standing in for the infinite-temperature state.

    ``Ensemble()`` enumerates all ``2^N`` states; ``Ensemble.sampled(m, seed)``
    draws ``m`` states uniformly with replacement.
    """

    samples: int | None = None
    seed: int = 0

    @classmethod
    def sampled(cls, m: int, seed: int = 0) -> Ensemble:
        if m < 1:
            raise InvalidArgument("sampled ensemble needs at least one member")
        return cls(samples=int(m), seed=int(seed))

    @property
    def exhaustive(self) -> bool:
        return self.samples is None

    def chain_states(self, n_chain: int) -> np.ndarray:
        if self.exhaustive:
            return np.arange(1 << n_chain, dtype=np.int64)
        rng = disorder_rng(self.seed, 0)
        return rng.integers(0, 1 << n_chain, size=self.samples, dtype=np.int64)


def _map_ordered(fn, items: Iterable, threads: int) -> list:
    items = list(items)
    if threads == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads or None) as pool:
        return list(pool.map(fn, items))


def _average_channel(ptms: list[np.ndarray], ensemble: Ensemble) -> ChannelMatrix:
    stack = np.array(ptms)
    mean = stack.sum(axis=0) / len(ptms)
    fids = np.array([average_fidelity(R) for R in stack])
    stderr = 0.0 if ensemble.exhaustive or len(ptms) < 2 else float(fids.std(ddof=1) / math.sqrt(len(ptms)))
    return ChannelMatrix(ptm=mean, members=len(ptms), exhaustive=ensemble.exhaustive, fidelity_stderr=stderr)


# ---------------------------------------------------------------------------
# single transfer


def _evolve_basis_state(H: SpinHamiltonian, state: int, t: float) -> np.ndarray:
    sec = H.sector(popcount(state))
    out = np.zeros(H.dim, dtype=complex)
    out[sec.states] = sec.evolve_basis([state], t)[:, 0]
    return out


def single_transfer_channel(
    spec: ChainSpec,
    tau: float,
    ensemble: Ensemble = Ensemble(),
    site_cap: int = DEFAULT_SITE_CAP,
    threads: int = 1,
) -> ChannelMatrix:
    """Channel from the left end qubit to the right end qubit after one transfer.

    The right end starts in ``|0>`` (spin down) and the chain is averaged over
    the ensemble; everything but the right end is traced out.
    """
    H = build_spin_hamiltonian(spec, site_cap=site_cap)
    right = spec.n_chain + 1

    def member(s: int) -> np.ndarray:
        start = int(s) << 1
        final = [_evolve_basis_state(H, start, tau), _evolve_basis_state(H, start | 1, tau)]
        return ptm_from_outputs(_operator_outputs(final, right))

    return _average_channel(_map_ordered(member, ensemble.chain_states(spec.n_chain), threads), ensemble)


# ---------------------------------------------------------------------------
# two-qubit encoded transfer


@dataclass(frozen=True)
class ProtocolResult:
    average_fidelity: float
    infidelity: float
    channel: ChannelMatrix | None
    exhaustive: bool
    chain_states: int
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "average_fidelity": self.average_fidelity,
            "infidelity": self.infidelity,
            "channel": None if self.channel is None else self.channel.to_dict(),
            "exhaustive": self.exhaustive,
            "chain_states": self.chain_states,
            "diagnostics": self.diagnostics,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> ProtocolResult:
        channel = data.get("channel")
        return cls(
            average_fidelity=float(data["average_fidelity"]),
            infidelity=float(data["infidelity"]),
            channel=None if channel is None else ChannelMatrix.from_dict(channel),
            exhaustive=bool(data["exhaustive"]),
            chain_states=int(data["chain_states"]),
            diagnostics=dict(data.get("diagnostics", {})),
        )


def _encoded_hamiltonians(spec: ChainSpec, site_cap: int) -> tuple[SpinHamiltonian, SpinHamiltonian, dict]:
    N = spec.n_chain
    n = N + 4
    if n > site_cap:
        raise SizeCapExceeded(f"encoded protocol needs {n} sites, cap is {site_cap}")
    sites = {"a": 0, "b": N + 1, "a2": N + 2, "b2": N + 3}
    chain = [(j, j + 1, k) for j, k in enumerate(spec.kappa, start=1)]
    fields = np.concatenate([[spec.delta], spec.onsite, [spec.delta, spec.delta, spec.delta]])
    first = SpinHamiltonian(n, chain + [(sites["a"], 1, spec.g_left), (N, sites["b"], spec.g_right)], fields, site_cap)
    second = SpinHamiltonian(n, chain + [(sites["a2"], 1, spec.g_left), (N, sites["b2"], spec.g_right)], fields, site_cap)
    return first, second, sites


def encoded_transfer(
    spec: ChainSpec,
    tau: float,
    ensemble: Ensemble = Ensemble(),
    decode: bool = True,
    site_cap: int = DEFAULT_SITE_CAP,
    threads: int = 1,
) -> ProtocolResult:
    """Two-qubit encoded transfer from ``(a, a')`` to ``(b, b')`` through the chain.

    Logical states ``|0> = |00>_{aa'}`` and ``|1> = |11>_{aa'}``.  The chain
    mediates ``a -> b`` for ``tau`` with ``a', b'`` decoupled, then ``a' -> b'``
    for ``tau`` with ``a, b`` decoupled; a CNOT (control ``b``, target ``b'``)
    decodes onto ``b``.  A z-phase correction on ``b`` is calibrated once from
    the chain vacuum and applied unchanged to every chain state.
    """
    first, second, sites = _encoded_hamiltonians(spec, site_cap)
    logical_one = (1 << sites["a"]) | (1 << sites["a2"])
    cnot_control, cnot_target = 1 << sites["b"], 1 << sites["b2"]
    index = np.arange(first.dim, dtype=np.int64)
    cnot = np.where(index & cnot_control, index ^ cnot_target, index)

    def outputs_for(s: int) -> np.ndarray:
        start = int(s) << 1
        final = []
        for logical in (start, start | logical_one):
            sec1 = first.sector(popcount(logical))
            sec2 = second.sector(popcount(logical))
            psi = sec2.evolve(sec1.evolve_basis([logical], tau)[:, 0], tau)
            full = np.zeros(first.dim, dtype=complex)
            full[sec1.states] = psi
            if decode:
                full = full[cnot]  # permutation is an involution
            final.append(full)
        return _operator_outputs(final, sites["b"])

    vacuum = outputs_for(0)
    coherence = vacuum[0, 1][0, 1]
    theta = -float(np.angle(coherence)) if abs(coherence) > 1e-9 else 0.0
    # D rho D^dagger with D = diag(1, e^{-i theta}) scales rho[c, d] by e^{-i theta (c - d)}
    phase = np.exp(-1j * theta * (np.arange(2)[:, None] - np.arange(2)[None, :]))

    states = ensemble.chain_states(spec.n_chain)
    raw = _map_ordered(outputs_for, states, threads)
    ptms, phases = [], []
    for out in raw:
        ptms.append(ptm_from_outputs(out * phase))
        c = out[0, 1][0, 1]
        if abs(c) > 1e-6:
            phases.append(float(np.angle(c * np.exp(1j * theta))))
    channel = _average_channel(ptms, ensemble)
    F = average_fidelity(channel)
    diagnostics = {
        "phase_correction": theta,
        "max_phase_deviation": max((abs(p) for p in phases), default=0.0),
        "decoded": decode,
        "fidelity_stderr": channel.fidelity_stderr,
    }
    return ProtocolResult(
        average_fidelity=F,
        infidelity=1.0 - F,
        channel=channel,
        exhaustive=ensemble.exhaustive,
        chain_states=len(states),
        diagnostics=diagnostics,
    )


# ---------------------------------------------------------------------------
# gate structure checks


def _create(vec: np.ndarray, site: int) -> np.ndarray:
    """Jordan-Wigner fermion creation operator on ``site`` (string over lower sites)."""
    index = np.arange(vec.size, dtype=np.int64)
    empty = (index >> site) & 1 == 0
    sign = 1 - 2 * (popcount(index & ((1 << site) - 1)) & 1)
    out = np.zeros_like(vec)
    src = index[empty]
    out[src | (1 << site)] = sign[empty] * vec[src]
    return out


def _raise_spin(vec: np.ndarray, site: int) -> np.ndarray:
    index = np.arange(vec.size, dtype=np.int64)
    src = index[(index >> site) & 1 == 0]
    out = np.zeros_like(vec)
    out[src | (1 << site)] = vec[src]
    return out


def fock_state(spec: ChainSpec, occupied: Iterable[int]) -> np.ndarray:
    """Chain Slater determinant on the ``N+2``-site register, ends empty.

    ``occupied`` lists 1-based mode labels; the state is a joint eigenstate of
    the chain particle number and of every mode occupation.
    """
    modes = analyze_modes(build_coupling_matrix(spec))
    psi = np.zeros(1 << (spec.n_chain + 2), dtype=complex)
    psi[0] = 1.0
    for k in sorted(set(occupied), reverse=True):
        phi = modes.vector(k)
        psi = sum(phi[j - 1] * _create(psi, j) for j in range(1, spec.n_chain + 1))
    return psi


def _gate_setup(spec: ChainSpec, site_cap: int):
    if spec.n_chain + 2 > site_cap:
        raise SizeCapExceeded(f"gate checks are limited to {site_cap} sites, got {spec.n_chain + 2}")
    modes = analyze_modes(build_coupling_matrix(spec))
    z = pick_resonant_mode(modes, spec.delta).k
    H = build_spin_hamiltonian(spec, site_cap=site_cap)
    return modes, z, H


def predicted_gate(n_z: int) -> np.ndarray:
    """``(-1)^(n_0 + n_R + n_z) (-1)^(n_0 n_R) SWAP`` on the basis ``|n_0 n_R>`` (index ``2 n_0 + n_R``)."""
    G = np.zeros((4, 4))
    for n0, nr in itertools.product(range(2), repeat=2):
        G[2 * nr + n0, 2 * n0 + nr] = (-1) ** (n0 + nr + n_z + n0 * nr)
    return G


@dataclass(frozen=True)
class GateCheck:
    process_fidelity: float  # worst case over tested chain states
    per_state: tuple  # (occupied labels, process fidelity, Re Tr(G^dag V)/4)


def effective_gate_check(
    spec: ChainSpec,
    tau: float,
    chain_states: Iterable[Sequence[int]] | None = None,
    site_cap: int = GATE_SITE_CAP,
) -> GateCheck:
    """Compare the end-qubit process, conditioned on chain Fock states, with the ideal fermionic gate.

    The end fermions are ``c_0`` and ``s c_{N+1}`` where ``s`` is the relative
    sign of the resonant mode at the two chain ends; dynamical phases of the
    chain state and of the end detuning are removed before comparing.
    Defaults to every Fock state of the chain.
    """
    modes, z, H = _gate_setup(spec, site_cap)
    N = spec.n_chain
    s = float(np.sign(modes.t_left[z - 1] * modes.t_right[z - 1])) or 1.0
    if chain_states is None:
        labels = range(1, N + 1)
        chain_states = [c for r in range(N + 1) for c in itertools.combinations(labels, r)]

    results = []
    for occupied in chain_states:
        occupied = tuple(sorted(occupied))
        chi = fock_state(spec, occupied)
        basis = []
        for n0, nr in itertools.product(range(2), repeat=2):
            v = s * _create(chi, N + 1) if nr else chi
            basis.append(_create(v, 0) if n0 else v)
        energy = sum(modes.energy(k) for k in occupied)
        V = np.zeros((4, 4), dtype=complex)
        for col, vec in enumerate(basis):
            evolved = evolve_state(H, vec, tau)
            for row, ref in enumerate(basis):
                n_end = (row >> 1) + (row & 1)
                V[row, col] = np.vdot(ref, evolved) * np.exp(1j * (energy + spec.delta * n_end) * tau)
        n_z = int(z in occupied)
        overlap = np.trace(predicted_gate(n_z).T @ V) / 4.0
        results.append((occupied, float(abs(overlap) ** 2), float(overlap.real)))
    return GateCheck(process_fidelity=min(r[1] for r in results), per_state=tuple(results))


@dataclass(frozen=True)
class GraphStateCheck:
    overlap: float
    phases: tuple[float, float]


def _max_over_z_phases(blocks: np.ndarray) -> tuple[float, tuple[float, float]]:
    """Maximise ``|sum_ab e^{i(a t0 + b tR)} blocks[a, b]|^2`` over the two phases."""

    def value(th):
        return abs(blocks[0, 0] + blocks[1, 0] * np.exp(1j * th[0]) + blocks[0, 1] * np.exp(1j * th[1])
                   + blocks[1, 1] * np.exp(1j * (th[0] + th[1]))) ** 2

    grid = np.linspace(0, 2 * np.pi, 24, endpoint=False)
    start = max(itertools.product(grid, grid), key=value)
    res = scipy.optimize.minimize(lambda th: -value(th), np.array(start), method="Nelder-Mead",
                                  options={"xatol": 1e-10, "fatol": 1e-14})
    best = res.x if -res.fun >= value(start) else np.array(start)
    return float(value(best)), (float(best[0]), float(best[1]))


def graph_state_check(
    spec: ChainSpec,
    tau: float,
    left: Sequence[complex] = (1.0, 0.0),
    right: Sequence[complex] = (1.0, 0.0),
    occupied: Iterable[int] = (),
    site_cap: int = GATE_SITE_CAP,
) -> GraphStateCheck:
    """Overlap of the evolved state with ``prod_j CP_0j CP_Rj  CP_0R  SWAP_0R`` applied to the input.

    ``left``/``right`` are the ``(alpha, beta)`` amplitudes of the end qubits
    on ``(|down>, |up>)`` and ``occupied`` selects the chain Fock state.  The
    overlap is maximised over z-phases on the two end qubits only.
    """
    _, _, H = _gate_setup(spec, site_cap)
    N = spec.n_chain
    R = N + 1
    left = np.asarray(left, dtype=complex) / np.linalg.norm(left)
    right = np.asarray(right, dtype=complex) / np.linalg.norm(right)
    chi = fock_state(spec, occupied)
    psi = np.zeros_like(chi)
    for n0, nr in itertools.product(range(2), repeat=2):
        v = _raise_spin(chi, R) if nr else chi
        psi = psi + left[n0] * right[nr] * (_raise_spin(v, 0) if n0 else v)

    numeric = evolve_state(H, psi, tau)

    index = np.arange(psi.size, dtype=np.int64)
    b0, bR = index & 1, (index >> R) & 1
    swapped = index ^ np.where(b0 != bR, 1 | (1 << R), 0)
    analytic = psi[swapped]
    chain_up = popcount((index >> 1) & ((1 << N) - 1))
    analytic = analytic * (-1.0) ** (b0 * bR + (b0 + bR) * chain_up)

    blocks = np.zeros((2, 2), dtype=complex)
    for n0, nr in itertools.product(range(2), repeat=2):
        mask = (b0 == n0) & (bR == nr)
        blocks[n0, nr] = np.vdot(analytic[mask], numeric[mask])
    overlap, phases = _max_over_z_phases(blocks)
    return GraphStateCheck(overlap=overlap, phases=phases)


# ---------------------------------------------------------------------------
# Jordan-Wigner spectral equivalence


def subset_sums(energies: Sequence[float]) -> np.ndarray:
    """Sorted many-body energies of free fermions: every sum over a subset of modes."""
    energies = np.asarray(energies, dtype=float)
    masks = np.arange(1 << energies.size, dtype=np.int64)
    occupied = (masks[:, None] >> np.arange(energies.size)) & 1
    return np.sort(occupied @ energies)


@dataclass(frozen=True)
class SpectralCheck:
    n_chain: int
    max_deviation: float
    passed: bool


def jw_spectrum_check(spec: ChainSpec, tol: float = 1e-9, site_cap: int = DEFAULT_SITE_CAP) -> SpectralCheck:
    """Compare the chain's full spin spectrum with subset sums of its single-particle energies."""
    many_body = build_chain_hamiltonian(spec, site_cap=site_cap).spectrum()
    single = analyze_modes(build_coupling_matrix(spec)).energies
    deviation = float(np.max(np.abs(many_body - subset_sums(single))))
    return SpectralCheck(n_chain=spec.n_chain, max_deviation=deviation, passed=deviation < tol)
