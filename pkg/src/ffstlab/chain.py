"""Physical system definition: chain parameters, coupling matrix, disorder sampling.

Site labels follow the transfer geometry: site 0 is the left end qubit, sites
1..N form the intermediate chain and site N+1 is the right end qubit.

Sign convention: every chain coupling is stored positive.  The model is
bipartite, so a local phase flip maps any sign pattern onto the positive one.

Detuning convention: the end detuning and on-site fields enter the coupling
matrix diagonal as ``delta * n`` (occupation number).  The constant ``-delta/2``
per site that appears when rewriting ``delta * S^z`` is a global phase and is
dropped everywhere, including the many-body oracle.

Disorder streams use numpy's counter-based Philox generator keyed by the
128-bit value ``seed | (realization_index << 64)``; a realization is therefore
reproducible on any platform without replaying earlier ones.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Literal

import numpy as np

from .errors import InvalidArgument

DisorderKind = Literal["coupling", "onsite", "both"]
DisorderDistribution = Literal["uniform-relative", "gaussian-relative"]

_U64 = 2**64


def _as_float_tuple(values) -> tuple[float, ...]:
    return tuple(float(v) for v in values)


@dataclass(frozen=True)
class ChainSpec:
    """Full parameterization of the end-qubit / chain / end-qubit system."""

    n_chain: int
    kappa: tuple[float, ...]
    onsite: tuple[float, ...]
    g_left: float
    g_right: float
    delta: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kappa", _as_float_tuple(self.kappa))
        object.__setattr__(self, "onsite", _as_float_tuple(self.onsite))
        for name in ("g_left", "g_right", "delta"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if isinstance(self.n_chain, bool) or int(self.n_chain) != self.n_chain or self.n_chain < 1:
            raise InvalidArgument(f"n_chain must be a positive integer, got {self.n_chain!r}")
        object.__setattr__(self, "n_chain", int(self.n_chain))
        if len(self.kappa) != self.n_chain - 1:
            raise InvalidArgument(
                f"kappa needs {self.n_chain - 1} entries for n_chain={self.n_chain}, got {len(self.kappa)}"
            )
        if len(self.onsite) != self.n_chain:
            raise InvalidArgument(
                f"onsite needs {self.n_chain} entries for n_chain={self.n_chain}, got {len(self.onsite)}"
            )
        if any(not k > 0 for k in self.kappa):
            raise InvalidArgument("all chain couplings must be strictly positive")
        if not (self.g_left >= 0 and self.g_right >= 0):
            raise InvalidArgument("end couplings must be non-negative")
        values = self.kappa + self.onsite + (self.g_left, self.g_right, self.delta)
        if not all(math.isfinite(v) for v in values):
            raise InvalidArgument("chain parameters must be finite")

    @property
    def n_sites(self) -> int:
        """Number of sites including both end qubits."""
        return self.n_chain + 2

    @property
    def mean_coupling(self) -> float:
        """Mean chain coupling; the energy unit for tolerances (1.0 for a single-site chain)."""
        return float(np.mean(self.kappa)) if self.kappa else 1.0

    def with_couplings(self, g_left: float, g_right: float) -> ChainSpec:
        return replace(self, g_left=g_left, g_right=g_right)

    # -- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "n_chain": self.n_chain,
            "kappa": list(self.kappa),
            "onsite": list(self.onsite),
            "g_left": self.g_left,
            "g_right": self.g_right,
            "delta": self.delta,
        }

    @classmethod
    def from_dict(cls, data: dict) -> ChainSpec:
        missing = {"n_chain", "kappa", "onsite", "g_left", "g_right", "delta"} - set(data)
        if missing:
            raise InvalidArgument(f"ChainSpec is missing fields: {sorted(missing)}")
        return cls(
            n_chain=data["n_chain"],
            kappa=data["kappa"],
            onsite=data["onsite"],
            g_left=data["g_left"],
            g_right=data["g_right"],
            delta=data["delta"],
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> ChainSpec:
        return cls.from_dict(json.loads(text))

    def to_keyvalue(self) -> str:
        """Line-oriented ``key = value`` form; lists are comma separated."""
        lines = [
            f"n_chain = {self.n_chain}",
            "kappa = " + ", ".join(repr(k) for k in self.kappa),
            "onsite = " + ", ".join(repr(h) for h in self.onsite),
            f"g_left = {self.g_left!r}",
            f"g_right = {self.g_right!r}",
            f"delta = {self.delta!r}",
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_keyvalue(cls, text: str) -> ChainSpec:
        data: dict = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise InvalidArgument(f"line {lineno}: expected 'key = value', got {raw!r}")
            key, _, value = (part.strip() for part in line.partition("="))
            try:
                if key in ("kappa", "onsite"):
                    data[key] = [float(v) for v in value.split(",") if v.strip()]
                elif key == "n_chain":
                    data[key] = int(value)
                elif key in ("g_left", "g_right", "delta"):
                    data[key] = float(value)
                else:
                    raise InvalidArgument(f"line {lineno}: unknown key {key!r}")
            except ValueError as exc:
                if isinstance(exc, InvalidArgument):
                    raise
                raise InvalidArgument(f"line {lineno}: cannot parse {key!r}: {exc}") from exc
        return cls.from_dict(data)


def make_uniform_spec(N: int, kappa: float, g: float, delta: float = 0.0) -> ChainSpec:
    """Clean chain with identical couplings and symmetric end couplings."""
    if isinstance(N, bool) or int(N) != N or N < 1:
        raise InvalidArgument(f"N must be a positive integer, got {N!r}")
    if not kappa > 0:
        raise InvalidArgument(f"kappa must be positive, got {kappa!r}")
    N = int(N)
    return ChainSpec(
        n_chain=N,
        kappa=(float(kappa),) * (N - 1),
        onsite=(0.0,) * N,
        g_left=g,
        g_right=g,
        delta=delta,
    )


def build_coupling_matrix(spec: ChainSpec) -> np.ndarray:
    """Single-particle matrix K with ``H = sum_ij K_ij S_i^+ S_j^-``.

    Returns a read-only ``(N+2, N+2)`` array, symmetric to exact equality.
    """
    N = spec.n_chain
    K = np.zeros((N + 2, N + 2))
    idx = np.arange(1, N)
    K[idx, idx + 1] = spec.kappa
    K[0, 1] = spec.g_left
    K[N, N + 1] = spec.g_right
    K = K + K.T
    K[np.arange(1, N + 1), np.arange(1, N + 1)] = spec.onsite
    K[0, 0] = K[N + 1, N + 1] = spec.delta
    K.setflags(write=False)
    return K


@dataclass(frozen=True)
class DisorderModel:
    """Random perturbation of the chain.

    Coupling disorder multiplies each coupling by ``1 + strength * xi``; on-site
    disorder adds ``strength * mean_coupling * xi`` to each field.  ``xi`` is
    uniform on [-1, 1] or standard normal depending on ``distribution``.
    """

    kind: DisorderKind = "coupling"
    distribution: DisorderDistribution = "uniform-relative"
    strength: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ("coupling", "onsite", "both"):
            raise InvalidArgument(f"unknown disorder kind {self.kind!r}")
        if self.distribution not in ("uniform-relative", "gaussian-relative"):
            raise InvalidArgument(f"unknown disorder distribution {self.distribution!r}")
        if not (math.isfinite(self.strength) and self.strength >= 0):
            raise InvalidArgument("disorder strength must be finite and non-negative")
        if self.distribution == "uniform-relative" and self.strength >= 1:
            raise InvalidArgument("uniform-relative disorder needs strength < 1 to keep couplings positive")
        if isinstance(self.seed, bool) or int(self.seed) != self.seed or not 0 <= self.seed < _U64:
            raise InvalidArgument("seed must be an unsigned 64-bit integer")
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "strength", float(self.strength))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "distribution": self.distribution, "strength": self.strength, "seed": self.seed}

    @classmethod
    def from_dict(cls, data: dict) -> DisorderModel:
        return cls(**{k: data[k] for k in ("kind", "distribution", "strength", "seed") if k in data})


def disorder_rng(seed: int, realization_index: int) -> np.random.Generator:
    """Philox stream for one realization."""
    if realization_index < 0:
        raise InvalidArgument("realization_index must be non-negative")
    key = int(seed) | (int(realization_index) << 64)
    return np.random.Generator(np.random.Philox(key=key))


def _draw(rng: np.random.Generator, distribution: str, size: int) -> np.ndarray:
    if distribution == "uniform-relative":
        return rng.uniform(-1.0, 1.0, size)
    return rng.standard_normal(size)


def sample_disorder(base: ChainSpec, model: DisorderModel, realization_index: int) -> ChainSpec:
    """One disorder realization of ``base``; end couplings and detuning are untouched."""
    if model.strength == 0.0:
        return base
    rng = disorder_rng(model.seed, realization_index)
    kappa = np.asarray(base.kappa)
    onsite = np.asarray(base.onsite)
    if model.kind in ("coupling", "both"):
        # abs(): gaussian multipliers may cross zero; the sign is a gauge choice
        kappa = np.abs(kappa * (1.0 + model.strength * _draw(rng, model.distribution, kappa.size)))
        kappa = np.maximum(kappa, np.finfo(float).tiny)
    if model.kind in ("onsite", "both"):
        onsite = onsite + model.strength * base.mean_coupling * _draw(rng, model.distribution, onsite.size)
    return replace(base, kappa=tuple(kappa), onsite=tuple(onsite))
