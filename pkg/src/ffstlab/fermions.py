"""Single-particle (free-fermion) analysis of the transfer chain.

Mode labels follow the dispersion ``E_k = 2 kappa cos(k pi / (N+1))``: modes are
sorted by *descending* energy and labelled ``k = 1..N``, so for a clean chain
label ``k`` is exactly the sine mode ``sin(j k pi / (N+1))``.  Every function
taking a mode label expects this 1-based label.

Each mode vector is normalised and carries a non-negative amplitude on the
first chain site (ties broken toward a non-negative last-site amplitude).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .chain import ChainSpec, build_coupling_matrix
from .errors import DarkMode, DegenerateResonance, InvalidArgument, NumericFailure, ResonanceCollision

RESONANCE_TOL = 1e-9
DARK_TOL = 1e-12


@dataclass(frozen=True)
class ModeAnalysis:
    energies: np.ndarray  # (N,) descending
    modes: np.ndarray  # (N, N); modes[k-1] is the chain vector of label k
    t_left: np.ndarray
    t_right: np.ndarray
    participation: np.ndarray
    g_left: float
    g_right: float
    energy_scale: float

    @property
    def n_chain(self) -> int:
        return self.energies.size

    def energy(self, k: int) -> float:
        return float(self.energies[self._index(k)])

    def vector(self, k: int) -> np.ndarray:
        return self.modes[self._index(k)]

    def _index(self, k: int) -> int:
        if not 1 <= k <= self.n_chain:
            raise InvalidArgument(f"mode label {k} outside 1..{self.n_chain}")
        return int(k) - 1


@dataclass(frozen=True)
class Resonance:
    k: int
    detuning: float  # E_k - delta
    gap: float  # distance of the runner-up mode from delta minus that of mode k


@dataclass(frozen=True)
class TransferPlan:
    mode_index: int
    tau: float
    g_left: float
    g_right: float
    delta: float
    t_z: float


@dataclass(frozen=True)
class CouplingLimit:
    g_max: float  # geometric mean of the rescaled end couplings
    tau_min: float
    g_left: float
    g_right: float
    scale: float  # factor applied to the couplings the modes were computed with


@dataclass(frozen=True)
class SpectrumReport:
    is_symmetric: bool
    zero_mode_gap: float


def _energy_scale(K: np.ndarray) -> float:
    N = K.shape[0] - 2
    if N < 2:
        return 1.0
    return float(np.mean(np.diag(K, 1)[1:N]))


def analyze_modes(K: np.ndarray) -> ModeAnalysis:
    """Eigenmodes of the interior chain block of ``K`` and their end couplings."""
    K = np.asarray(K, dtype=float)
    N = K.shape[0] - 2
    if N < 1 or K.shape != (N + 2, N + 2):
        raise InvalidArgument(f"coupling matrix must be square with at least 3 sites, got {K.shape}")
    diag = np.diag(K)[1 : N + 1].copy()
    off = np.diag(K, 1)[1:N].copy()
    try:
        if N == 1:
            energies, vectors = diag.copy(), np.ones((1, 1))
        else:
            energies, vectors = scipy.linalg.eigh_tridiagonal(diag, off)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericFailure(
            f"chain eigensolver failed for N={N}: diag range [{diag.min()}, {diag.max()}], "
            f"coupling range [{off.min() if off.size else 0}, {off.max() if off.size else 0}]"
        ) from exc
    order = np.argsort(-energies, kind="stable")
    energies = energies[order]
    modes = vectors[:, order].T.copy()

    first, last = modes[:, 0], modes[:, -1]
    flip = np.where(np.abs(first) > DARK_TOL, first < 0, last < 0)
    modes[flip] *= -1.0

    g_left, g_right = float(K[0, 1]), float(K[N, N + 1])
    result = ModeAnalysis(
        energies=energies,
        modes=modes,
        t_left=g_left * modes[:, 0],
        t_right=g_right * modes[:, -1],
        participation=1.0 / np.sum(modes**4, axis=1),
        g_left=g_left,
        g_right=g_right,
        energy_scale=_energy_scale(K),
    )
    for arr in (result.energies, result.modes, result.t_left, result.t_right, result.participation):
        arr.setflags(write=False)
    return result


def pick_resonant_mode(modes: ModeAnalysis, delta: float) -> Resonance:
    """Mode whose energy is closest to the end-qubit detuning."""
    distance = np.abs(modes.energies - delta)
    order = np.argsort(distance, kind="stable")
    best = int(order[0])
    gap = math.inf if distance.size == 1 else float(distance[order[1]] - distance[best])
    if gap < RESONANCE_TOL * modes.energy_scale:
        raise DegenerateResonance(
            f"modes {best + 1} and {int(order[1]) + 1} are equally detuned from delta={delta} (gap {gap:.3e})"
        )
    return Resonance(k=best + 1, detuning=float(modes.energies[best] - delta), gap=gap)


def _end_couplings(modes: ModeAnalysis, k: int) -> tuple[float, float]:
    i = modes._index(k)
    tl, tr = abs(float(modes.t_left[i])), abs(float(modes.t_right[i]))
    floor = DARK_TOL * modes.energy_scale
    if tl < floor or tr < floor:
        raise DarkMode(f"mode {k} is dark: |t_L|={tl:.3e}, |t_R|={tr:.3e}")
    return tl, tr


def tunneling_rate(modes: ModeAnalysis, k: int) -> float:
    """Geometric mean of the end couplings of mode ``k``."""
    tl, tr = _end_couplings(modes, k)
    return math.sqrt(tl * tr)


def transfer_time(modes: ModeAnalysis, k: int) -> float:
    """Full-swap time ``pi / (sqrt(2) t_k)`` of the resonant three-level system."""
    return math.pi / (math.sqrt(2.0) * tunneling_rate(modes, k))


def plan_transfer(spec: ChainSpec) -> TransferPlan:
    modes = analyze_modes(build_coupling_matrix(spec))
    k = pick_resonant_mode(modes, spec.delta).k
    return TransferPlan(
        mode_index=k,
        tau=transfer_time(modes, k),
        g_left=spec.g_left,
        g_right=spec.g_right,
        delta=spec.delta,
        t_z=tunneling_rate(modes, k),
    )


def propagator(K: np.ndarray, t: float) -> np.ndarray:
    """``exp(-i K t)`` via the eigendecomposition of the real symmetric ``K``."""
    if t < 0:
        raise InvalidArgument("propagation time must be non-negative")
    if t == 0.0:
        return np.eye(np.shape(K)[0], dtype=complex)
    try:
        w, W = np.linalg.eigh(np.asarray(K, dtype=float))
    except np.linalg.LinAlgError as exc:
        raise NumericFailure(f"eigendecomposition of {np.shape(K)} coupling matrix failed") from exc
    return (W * np.exp(-1j * w * t)) @ W.T


def end_to_end_amplitude(U: np.ndarray) -> complex:
    """Single-particle amplitude for moving from the left end to the right end."""
    return complex(U[-1, 0])


def transfer_amplitude(K: np.ndarray, t: float) -> complex:
    """``exp(-iKt)[N+1, 0]`` without forming the full propagator."""
    w, W = np.linalg.eigh(np.asarray(K, dtype=float))
    return complex(np.sum(W[-1] * W[0] * np.exp(-1j * w * t)))


def leakage(K: np.ndarray, t: float) -> float:
    """Probability that a single excitation launched at the left end misses the right end."""
    return 1.0 - abs(transfer_amplitude(K, t)) ** 2


def _off_resonant_ratios(modes: ModeAnalysis, z: int) -> tuple[np.ndarray, np.ndarray]:
    iz = modes._index(z)
    detuning = modes.energies - modes.energies[iz]
    others = np.arange(modes.n_chain) != iz
    if np.any(np.abs(detuning[others]) < RESONANCE_TOL * modes.energy_scale):
        raise ResonanceCollision(f"an off-resonant mode is degenerate with mode {z}")
    t = np.sqrt(np.abs(modes.t_left * modes.t_right))
    ratio_sq = np.where(others, (t / np.where(others, detuning, 1.0)) ** 2, 0.0)
    return ratio_sq, detuning


def analytic_infidelity(modes: ModeAnalysis, z: int, tau: float) -> float:
    """Perturbative infidelity ``sum_{k!=z} 5/3 (t_k/E_k)^2 [1 + (-1)^(k+z) cos(E_k tau)]``.

    Energies are measured from ``E_z`` so the expression also applies to a
    detuned resonance.  The parity sign counts labels in energy order.
    """
    ratio_sq, detuning = _off_resonant_ratios(modes, z)
    labels = np.arange(1, modes.n_chain + 1)
    parity = np.where((labels + z) % 2 == 0, 1.0, -1.0)
    return float(np.sum(5.0 / 3.0 * ratio_sq * (1.0 + parity * np.cos(detuning * tau))))


def infidelity_bound(modes: ModeAnalysis, z: int) -> float:
    """Upper envelope ``sum_{k!=z} 10/3 (t_k/E_k)^2`` of the analytic infidelity."""
    ratio_sq, _ = _off_resonant_ratios(modes, z)
    return float(10.0 / 3.0 * np.sum(ratio_sq))


def max_coupling(modes: ModeAnalysis, z: int, epsilon0: float) -> CouplingLimit:
    """Largest end couplings whose infidelity bound stays at ``epsilon0``.

    The bound is exactly quadratic in the end couplings, so ``modes`` may be
    computed at any reference coupling; both ends are rescaled by one factor.
    """
    if not 0 < epsilon0 < 1:
        raise InvalidArgument(f"epsilon0 must lie in (0, 1), got {epsilon0}")
    tau_ref = transfer_time(modes, z)
    bound_ref = infidelity_bound(modes, z)
    scale = math.sqrt(epsilon0 / bound_ref)
    g_left, g_right = scale * modes.g_left, scale * modes.g_right
    return CouplingLimit(
        g_max=math.sqrt(g_left * g_right),
        tau_min=tau_ref / scale,
        g_left=g_left,
        g_right=g_right,
        scale=scale,
    )


def compensate_asymmetry(
    modes: ModeAnalysis, z: int, g_target: float, max_ratio: float = 10.0
) -> tuple[float, float]:
    """End couplings that make mode ``z`` couple equally to both ends.

    The product ``g_left * g_right`` is kept at ``g_target**2``, so the
    tunneling rate matches a symmetric mode with the geometric-mean end
    amplitude.  If either coupling would exceed ``max_ratio * g_target`` both
    are scaled down together.
    """
    phi = modes.vector(z)
    a, b = abs(float(phi[0])), abs(float(phi[-1]))
    if a < DARK_TOL or b < DARK_TOL:
        raise DarkMode(f"mode {z} has a vanishing end amplitude ({a:.3e}, {b:.3e})")
    g_left = g_target * math.sqrt(b / a)
    g_right = g_target * math.sqrt(a / b)
    largest = max(g_left, g_right)
    if largest > max_ratio * g_target:
        shrink = max_ratio * g_target / largest
        g_left, g_right = g_left * shrink, g_right * shrink
    return g_left, g_right


def ph_spectrum_check(modes: ModeAnalysis) -> SpectrumReport:
    """Particle-hole pairing ``E <-> -E`` of the chain spectrum and distance of the nearest level to zero."""
    e = modes.energies  # descending, so -e[::-1] is descending too
    symmetric = bool(np.all(np.abs(e + e[::-1]) <= RESONANCE_TOL * modes.energy_scale))
    return SpectrumReport(is_symmetric=symmetric, zero_mode_gap=float(np.min(np.abs(e))))
