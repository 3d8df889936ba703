"""Product basis (field Fock state ⊗ symmetric atomic occupations) organised
into exact finite excitation sectors.

A state is |n⟩ ⊗ |m_1, ..., m_N⟩ with n photons and m_k identical atoms in
level k (fully symmetric collective states).  The total excitation
N̂ = a†a + Σ_j μ_j S_z^{j,j+1} with μ_j = j(N−j) is conserved by every
cascade Hamiltonian built downstream, so the Hilbert space splits into
finite sectors labelled by the N̂ eigenvalue.  Eigenvalues are half-integers
and are kept as exact :class:`fractions.Fraction` objects: sector identity
is never trusted to floating point.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Union

ExcitationLike = Union[int, float, str, Fraction]


class BasisError(ValueError):
    """Invalid basis construction or state lookup."""


@dataclass(frozen=True, order=True)
class BasisState:
    """One product state |n⟩ ⊗ |m_1..m_N⟩.

    ``photon_n`` is the Fock occupation of the field mode; ``occupations[k]``
    counts the atoms sitting in level k+1, summed over all identical atoms.
    Ordering of states is lexicographic in (photon_n, occupations).
    """

    photon_n: int
    occupations: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.photon_n < 0:
            raise BasisError(f"negative photon number {self.photon_n}")
        if any(m < 0 for m in self.occupations):
            raise BasisError(f"negative occupation in {self.occupations}")

    @property
    def n_levels(self) -> int:
        return len(self.occupations)

    @property
    def n_atoms(self) -> int:
        return sum(self.occupations)

    def __str__(self) -> str:
        occ = ",".join(str(m) for m in self.occupations)
        return f"|n={self.photon_n};{occ}⟩"


def excitation_number(state: BasisState, n_levels: int) -> Fraction:
    """Exact N̂ eigenvalue n + Σ_j μ_j (m_{j+1} − m_j)/2 with μ_j = j(N−j)."""
    if state.n_levels != n_levels:
        raise BasisError(
            f"state has {state.n_levels} occupation slots, expected {n_levels}"
        )
    total = Fraction(state.photon_n)
    for j in range(1, n_levels):
        mu = j * (n_levels - j)
        total += Fraction(mu * (state.occupations[j] - state.occupations[j - 1]), 2)
    return total


def atomic_weight(occupations: tuple[int, ...]) -> Fraction:
    """N̂ contribution of the atomic occupations alone (photonless)."""
    return excitation_number(BasisState(0, tuple(occupations)), len(occupations))


def as_excitation(value: ExcitationLike) -> Fraction:
    """Coerce an excitation label to an exact Fraction."""
    try:
        return Fraction(value)
    except (ValueError, TypeError) as exc:
        raise BasisError(f"cannot read excitation value {value!r}") from exc


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    """All tuples of `parts` nonnegative integers summing to `total`,
    in lexicographic order."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


@dataclass(frozen=True)
class SectorBasis:
    """All basis states sharing one exact N̂ eigenvalue, in a fixed order."""

    excitation: Fraction
    n_levels: int
    n_atoms: int
    states: tuple[BasisState, ...]
    index: dict[BasisState, int] = field(compare=False, repr=False, default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "index", {state: k for k, state in enumerate(self.states)}
        )

    @property
    def dim(self) -> int:
        return len(self.states)

    @property
    def tag(self) -> str:
        return f"N={self.n_levels} A={self.n_atoms} E={self.excitation}"

    def position(self, state: BasisState) -> int:
        try:
            return self.index[state]
        except KeyError:
            raise BasisError(f"{state} is not in sector {self.tag}") from None

    def __len__(self) -> int:
        return self.dim

    def __iter__(self) -> Iterator[BasisState]:
        return iter(self.states)


def build_sector(n_levels: int, n_atoms: int, excitation: ExcitationLike) -> SectorBasis:
    """Enumerate every state with the given N̂ eigenvalue.

    The result may be empty (a valid outcome).  Ordering is deterministic:
    ascending in (photon_n, occupations).
    """
    if n_levels < 2:
        raise BasisError(f"need at least 2 levels, got {n_levels}")
    if n_atoms < 1:
        raise BasisError(f"need at least 1 atom, got {n_atoms}")
    target = as_excitation(excitation)
    states = []
    for occ in _compositions(n_atoms, n_levels):
        photon = target - atomic_weight(occ)
        if photon.denominator == 1 and photon >= 0:
            states.append(BasisState(int(photon), occ))
    states.sort()
    return SectorBasis(target, n_levels, n_atoms, tuple(states))


def min_excitation(n_levels: int, n_atoms: int) -> Fraction:
    """Smallest N̂ eigenvalue: zero photons, all atoms in the bottom level."""
    bottom = (n_atoms,) + (0,) * (n_levels - 1)
    return atomic_weight(bottom)


@dataclass(frozen=True)
class FullBasis:
    """Ordered collection of all sectors up to an excitation cutoff."""

    n_levels: int
    n_atoms: int
    max_excitation: Fraction
    sectors: tuple[SectorBasis, ...]

    @property
    def dim(self) -> int:
        return sum(sec.dim for sec in self.sectors)

    @property
    def tag(self) -> str:
        return f"N={self.n_levels} A={self.n_atoms} E<={self.max_excitation}"

    def sector(self, excitation: ExcitationLike) -> SectorBasis:
        target = as_excitation(excitation)
        for sec in self.sectors:
            if sec.excitation == target:
                return sec
        raise BasisError(f"no sector with excitation {target} in {self.tag}")

    def offsets(self) -> list[int]:
        """Start index of each sector block in the flattened ordering."""
        offs, pos = [], 0
        for sec in self.sectors:
            offs.append(pos)
            pos += sec.dim
        return offs

    def __iter__(self) -> Iterator[SectorBasis]:
        return iter(self.sectors)


def build_full_basis(
    n_levels: int, n_atoms: int, max_excitation: ExcitationLike
) -> FullBasis:
    """All sectors with N̂ eigenvalue between the minimum and the cutoff.

    Possible eigenvalues form the lattice E_min, E_min+1, ...; every lattice
    point at or above E_min is populated.
    """
    cutoff = as_excitation(max_excitation)
    lowest = min_excitation(n_levels, n_atoms)
    if cutoff < lowest:
        raise BasisError(
            f"cutoff {cutoff} lies below the minimal excitation {lowest}: empty basis"
        )
    sectors = []
    value = lowest
    while value <= cutoff:
        sectors.append(build_sector(n_levels, n_atoms, value))
        value += 1
    return FullBasis(n_levels, n_atoms, cutoff, tuple(sectors))
