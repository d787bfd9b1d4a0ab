"""Full-Hilbert-space XX Hamiltonians, block-diagonal in total magnetization.

Basis convention: computational basis on ``n`` sites, site 0 is the least
significant bit and an up spin is bit value 1 (an occupied fermion site).
The Hamiltonian is

    H = sum_bonds c_ij (S_i^+ S_j^- + S_i^- S_j^+) + sum_j h_j n_j

with ``n_j = S_j^+ S_j^-``.  Sectors are labelled by the number of up spins
``M``; within a sector the basis states are sorted ascending.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg
import scipy.sparse

from .chain import ChainSpec
from .errors import InvalidArgument, NumericFailure, SizeCapExceeded

DEFAULT_SITE_CAP = 16
DENSE_SECTOR_LIMIT = 4096
KRYLOV_TOL = 1e-10


def popcount(x: np.ndarray | int) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    return np.bitwise_count(x).astype(np.int64) if hasattr(np, "bitwise_count") else _popcount_slow(x)


def _popcount_slow(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    y = x.copy()
    while np.any(y):
        out += y & 1
        y >>= 1
    return out


@dataclass
class Sector:
    M: int
    states: np.ndarray  # sorted basis states with M up spins
    block: scipy.sparse.csr_matrix
    _eigh: tuple[np.ndarray, np.ndarray] | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.states.size

    def local_index(self, states) -> np.ndarray:
        states = np.asarray(states, dtype=np.int64)
        idx = np.searchsorted(self.states, states)
        if np.any(idx >= self.dim) or np.any(self.states[np.minimum(idx, self.dim - 1)] != states):
            raise InvalidArgument(f"states are not in magnetization sector {self.M}")
        return idx

    def eigh(self) -> tuple[np.ndarray, np.ndarray]:
        if self._eigh is None:
            try:
                self._eigh = np.linalg.eigh(self.block.toarray())
            except np.linalg.LinAlgError as exc:
                raise NumericFailure(f"dense eigensolver failed in sector M={self.M} (dim {self.dim})") from exc
        return self._eigh

    def evolve(self, vectors: np.ndarray, t: float) -> np.ndarray:
        """``exp(-i H t)`` applied to sector vectors (one per column if 2-D)."""
        vectors = np.asarray(vectors, dtype=complex)
        if t == 0.0 or self.block.nnz == 0:
            return vectors.copy()
        if self.dim <= DENSE_SECTOR_LIMIT:
            w, W = self.eigh()
            phase = np.exp(-1j * w * t)
            coeff = W.T @ vectors
            coeff = coeff * (phase if coeff.ndim == 1 else phase[:, None])
            return W @ coeff
        if vectors.ndim == 1:
            return krylov_expm(self.block, vectors, t)
        return np.column_stack([krylov_expm(self.block, v, t) for v in vectors.T])

    def evolve_basis(self, states, t: float) -> np.ndarray:
        """Evolved basis states as columns of a ``(dim, len(states))`` array."""
        idx = self.local_index(states)
        if self.dim <= DENSE_SECTOR_LIMIT and t != 0.0:
            w, W = self.eigh()
            return W @ (np.exp(-1j * w * t)[:, None] * W[idx].T)
        start = np.zeros((self.dim, idx.size), dtype=complex)
        start[idx, np.arange(idx.size)] = 1.0
        return self.evolve(start, t)


class SpinHamiltonian:
    """XX spin Hamiltonian stored as magnetization-sector blocks."""

    def __init__(self, n_sites: int, bonds, fields, site_cap: int = DEFAULT_SITE_CAP):
        if n_sites < 1:
            raise InvalidArgument("need at least one site")
        if n_sites > site_cap:
            raise SizeCapExceeded(f"{n_sites} sites exceed the oracle cap of {site_cap}")
        self.n_sites = int(n_sites)
        self.bonds = tuple((int(i), int(j), float(c)) for i, j, c in bonds)
        for i, j, _ in self.bonds:
            if not (0 <= i < n_sites and 0 <= j < n_sites and i != j):
                raise InvalidArgument(f"invalid bond ({i}, {j}) on {n_sites} sites")
        self.fields = np.asarray(fields, dtype=float)
        if self.fields.shape != (n_sites,):
            raise InvalidArgument(f"need {n_sites} on-site fields, got shape {self.fields.shape}")

    @property
    def dim(self) -> int:
        return 1 << self.n_sites

    @cached_property
    def _all_states(self) -> np.ndarray:
        return np.arange(self.dim, dtype=np.int64)

    @cached_property
    def magnetization(self) -> np.ndarray:
        """Number of up spins of every basis state."""
        return popcount(self._all_states)

    def _build_sector(self, M: int) -> Sector:
        states = self._all_states[self.magnetization == M]
        bits = (states[:, None] >> np.arange(self.n_sites)) & 1
        diag = bits @ self.fields
        rows, cols, vals = [np.arange(states.size)], [np.arange(states.size)], [diag]
        for i, j, c in self.bonds:
            if c == 0.0:
                continue
            flip = bits[:, i] != bits[:, j]
            src = np.nonzero(flip)[0]
            dst = np.searchsorted(states, states[src] ^ ((1 << i) | (1 << j)))
            rows.append(dst)
            cols.append(src)
            vals.append(np.full(src.size, c))
        block = scipy.sparse.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(states.size, states.size),
        )
        block.eliminate_zeros()
        return Sector(M=M, states=states, block=block)

    @cached_property
    def sectors(self) -> dict[int, Sector]:
        return {M: self._build_sector(M) for M in range(self.n_sites + 1)}

    def sector(self, M: int) -> Sector:
        return self.sectors[int(M)]

    def to_sparse(self) -> scipy.sparse.csr_matrix:
        """Full ``2^n x 2^n`` matrix in the computational basis."""
        rows, cols, vals = [], [], []
        for sec in self.sectors.values():
            coo = sec.block.tocoo()
            rows.append(sec.states[coo.row])
            cols.append(sec.states[coo.col])
            vals.append(coo.data)
        return scipy.sparse.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(self.dim, self.dim)
        )

    def spectrum(self) -> np.ndarray:
        """All ``2^n`` eigenvalues, sorted."""
        return np.sort(np.concatenate([np.linalg.eigvalsh(s.block.toarray()) for s in self.sectors.values()]))


def build_spin_hamiltonian(spec: ChainSpec, site_cap: int = DEFAULT_SITE_CAP) -> SpinHamiltonian:
    """End qubit, chain, end qubit on ``N+2`` sites (site 0 left, site ``N+1`` right)."""
    N = spec.n_chain
    if N + 2 > site_cap:
        raise SizeCapExceeded(f"{N + 2} sites exceed the oracle cap of {site_cap}")
    bonds = [(0, 1, spec.g_left), (N, N + 1, spec.g_right)]
    bonds += [(j, j + 1, k) for j, k in enumerate(spec.kappa, start=1)]
    fields = np.concatenate([[spec.delta], spec.onsite, [spec.delta]])
    return SpinHamiltonian(N + 2, bonds, fields, site_cap=site_cap)


def build_chain_hamiltonian(spec: ChainSpec, site_cap: int = DEFAULT_SITE_CAP) -> SpinHamiltonian:
    """The intermediate chain alone, on ``N`` sites (chain site ``j`` is bit ``j-1``)."""
    bonds = [(j, j + 1, k) for j, k in enumerate(spec.kappa)]
    return SpinHamiltonian(spec.n_chain, bonds, spec.onsite, site_cap=site_cap)


def evolve_state(H: SpinHamiltonian, psi: np.ndarray, t: float) -> np.ndarray:
    """Evolve a full state vector sector by sector; sectors never mix."""
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (H.dim,):
        raise InvalidArgument(f"state has shape {psi.shape}, expected ({H.dim},)")
    out = np.zeros_like(psi)
    for M, sec in H.sectors.items():
        part = psi[sec.states]
        if np.any(part):
            out[sec.states] = sec.evolve(part, t)
    return out


def _lanczos(A, v: np.ndarray, m: int):
    """Lanczos with full reorthogonalisation; returns basis, diagonal, off-diagonal, residual norm."""
    n = v.size
    m = min(m, n)
    V = np.zeros((n, m), dtype=complex)
    alpha = np.zeros(m)
    beta = np.zeros(m)
    V[:, 0] = v / np.linalg.norm(v)
    for j in range(m):
        w = A @ V[:, j]
        alpha[j] = np.vdot(V[:, j], w).real
        w -= V[:, : j + 1] @ (V[:, : j + 1].conj().T @ w)
        w -= V[:, : j + 1] @ (V[:, : j + 1].conj().T @ w)
        beta[j] = np.linalg.norm(w)
        if j + 1 == m or beta[j] < 1e-14:
            return V[:, : j + 1], alpha[: j + 1], beta[:j], beta[j]
        V[:, j + 1] = w / beta[j]
    raise AssertionError("unreachable")


def krylov_expm(A, v: np.ndarray, t: float, tol: float = KRYLOV_TOL, m: int = 40) -> np.ndarray:
    """``exp(-i A t) v`` for Hermitian sparse ``A`` by adaptive Lanczos time stepping.

    The local error of each step is estimated from the last Lanczos residual
    and held below ``tol * dt / t`` so the accumulated error stays below ``tol``.
    """
    w = np.asarray(v, dtype=complex).copy()
    norm = np.linalg.norm(w)
    if norm == 0.0 or t == 0.0:
        return w
    elapsed, dt = 0.0, t
    while elapsed < t:
        dt = min(dt, t - elapsed)
        V, a, b, resid = _lanczos(A, w, m)
        evals, evecs = scipy.linalg.eigh_tridiagonal(a, b) if a.size > 1 else (a, np.ones((1, 1)))
        while True:
            y = evecs @ (np.exp(-1j * evals * dt) * evecs[0]) * np.linalg.norm(w)
            err = resid * abs(y[-1])
            if err <= tol * max(dt / t, 1e-3) or resid < 1e-14:
                break
            dt *= 0.5
            if dt < t * 1e-10:
                raise NumericFailure(f"Krylov propagation stalled at t={elapsed:.6g}, residual {err:.3e}")
        w = V @ y
        elapsed += dt
        dt *= 1.5
    return w * (norm / np.linalg.norm(w))
