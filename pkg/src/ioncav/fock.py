"""Truncated ion-phonon-photon Hilbert space and state-vector utilities.

Basis states are |s, m, n> with s the internal state of the two-level ion
(g or e), m the vibrational phonon number and n the cavity photon number.
Amplitudes are stored flat, spin-major:

    index(s, m, n) = s * (m_max+1) * (n_max+1) + m * (n_max+1) + n

which keeps the two internal-state blocks contiguous for the sigma+/sigma-
couplings.  States never renormalize silently; ``renormalized`` exists for
callers that explicitly want it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidArgument, OutOfCutoff

SPIN_LABELS = ("g", "e")

_NORM_SANITY = 1e-6  # constructor sanity bound, looser than any op contract


@dataclass(frozen=True)
class FockCutoffs:
    """Truncation bounds for the phonon and photon ladders.

    ``leak_tol`` is the total probability an evolution may push against
    the cutoff before it is treated as an error.
    """

    m_max: int = 32
    n_max: int = 4
    leak_tol: float = 1e-8

    def __post_init__(self):
        if self.m_max < 1:
            raise InvalidArgument(f"m_max must be >= 1, got {self.m_max}")
        if self.n_max < 0:
            raise InvalidArgument(f"n_max must be >= 0, got {self.n_max}")
        if not 0.0 < self.leak_tol < 1.0:
            raise InvalidArgument(f"leak_tol must be in (0, 1), got {self.leak_tol}")

    @property
    def dim(self) -> int:
        return 2 * (self.m_max + 1) * (self.n_max + 1)

    def index(self, s: int, m: int, n: int) -> int:
        """Flat index of |s, m, n> (s as 0 for g, 1 for e)."""
        n1 = self.n_max + 1
        return (s * (self.m_max + 1) + m) * n1 + n

    def label(self, index: int) -> "BasisLabel":
        """Inverse of :meth:`index`."""
        if not 0 <= index < self.dim:
            raise OutOfCutoff(f"flat index {index} outside dimension {self.dim}")
        n1 = self.n_max + 1
        index, n = divmod(index, n1)
        s, m = divmod(index, self.m_max + 1)
        return BasisLabel(SPIN_LABELS[s], m, n)

    def same_space(self, other: "FockCutoffs") -> bool:
        return self.m_max == other.m_max and self.n_max == other.n_max


@dataclass(frozen=True)
class BasisLabel:
    """One basis state |s, m, n>."""

    s: str
    m: int
    n: int

    def __post_init__(self):
        if self.s not in SPIN_LABELS:
            raise InvalidArgument(f"internal state must be 'g' or 'e', got {self.s!r}")
        if self.m < 0 or self.n < 0:
            raise InvalidArgument("phonon and photon numbers must be >= 0")

    @property
    def spin_index(self) -> int:
        return SPIN_LABELS.index(self.s)


class SystemState:
    """Normalized complex amplitude vector over the truncated basis.

    Immutable after construction: the amplitude array is copied in and
    marked read-only.  All evolution operations return new states.
    """

    __slots__ = ("amplitudes", "cutoffs")

    def __init__(self, amplitudes: np.ndarray, cutoffs: FockCutoffs):
        amps = np.asarray(amplitudes, dtype=np.complex128).copy()
        if amps.shape != (cutoffs.dim,):
            raise DimensionMismatch(
                f"amplitude vector has shape {amps.shape}, expected ({cutoffs.dim},)"
            )
        nrm = float(np.linalg.norm(amps))
        if abs(nrm - 1.0) > _NORM_SANITY:
            raise InvalidArgument(f"state norm {nrm} is not within {_NORM_SANITY} of 1")
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "cutoffs", cutoffs)

    def __setattr__(self, name, value):
        raise AttributeError("SystemState is immutable")

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def renormalized(self) -> "SystemState":
        """Explicit renormalization; never done implicitly."""
        return SystemState(self.amplitudes / self.norm(), self.cutoffs)

    def amplitude(self, label: BasisLabel) -> complex:
        _check_label(label, self.cutoffs)
        return complex(self.amplitudes[self.cutoffs.index(label.spin_index, label.m, label.n)])

    def blocks(self) -> np.ndarray:
        """Read-only view shaped (2, m_max+1, n_max+1)."""
        c = self.cutoffs
        return self.amplitudes.reshape(2, c.m_max + 1, c.n_max + 1)

    def phonon_distribution(self) -> np.ndarray:
        """Probability per phonon number m."""
        p = np.abs(self.blocks()) ** 2
        return p.sum(axis=(0, 2))

    def photon_distribution(self) -> np.ndarray:
        """Probability per photon number n."""
        p = np.abs(self.blocks()) ** 2
        return p.sum(axis=(0, 1))


def _check_label(label: BasisLabel, cutoffs: FockCutoffs):
    if label.m > cutoffs.m_max or label.n > cutoffs.n_max:
        raise OutOfCutoff(
            f"|{label.s},{label.m},{label.n}> outside cutoffs "
            f"(m_max={cutoffs.m_max}, n_max={cutoffs.n_max})"
        )


def make_basis_state(label: BasisLabel, cutoffs: FockCutoffs) -> SystemState:
    """Unit vector with a single amplitude 1 at ``label``."""
    _check_label(label, cutoffs)
    amps = np.zeros(cutoffs.dim, dtype=np.complex128)
    amps[cutoffs.index(label.spin_index, label.m, label.n)] = 1.0
    return SystemState(amps, cutoffs)


def fidelity(a: SystemState, b: SystemState) -> float:
    """|<a|b>|^2; symmetric and insensitive to global phase."""
    if not a.cutoffs.same_space(b.cutoffs):
        raise DimensionMismatch(
            f"states live in different spaces: {a.cutoffs} vs {b.cutoffs}"
        )
    return float(abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)


def leak_probability(state: SystemState, margin: int = 1) -> float:
    """Probability within ``margin`` phonon levels of the cutoff, or at the
    top photon level.

    Counts the probability mass on the set {m > m_max - margin} union
    {n == n_max} (union, so nothing is double counted).  The photon part
    is only meaningful when n_max >= 1 and is skipped for n_max == 0.
    Used to certify that a truncation was adequate for a propagation.
    """
    c = state.cutoffs
    if not 0 < margin <= c.m_max + 1:
        raise InvalidArgument(f"margin must be in [1, m_max+1], got {margin}")
    p = np.abs(state.blocks()) ** 2
    mask = np.zeros(p.shape, dtype=bool)
    mask[:, c.m_max + 1 - margin:, :] = True
    if c.n_max >= 1:
        mask[:, :, c.n_max] = True
    return float(p[mask].sum())
