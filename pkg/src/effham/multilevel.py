"""Cascade N-level atoms coupled to a single quantised field mode.

Builds the interaction Hamiltonian h₀ + V with h₀ = Σ_j Δ_j S^{jj} and
V = Σ_j g_j (a S₊^{j,j+1} + a† S₋^{j,j+1}), the perturbative coupling
ladder (α_j^(1), ψ_j^(k), α_j^(2), β_ij), the rotation generators that
eliminate one- and two-photon transitions, and the closed-form effective
Hamiltonians surviving at a (N−1)-photon resonance, dynamical Stark shifts
included.

Sign and prefactor conventions are fixed by the exact conjugation
U H U† = H + [T, H] + ½[T,[T,H]] + ...; every closed form here reproduces
the numerically conjugated Hamiltonian order by order (the test-suite
enforces this against the exact-diagonalisation oracle).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Union

import numpy as np

from effham.basis import (
    BasisState,
    FullBasis,
    SectorBasis,
    as_excitation,
    build_full_basis,
)
from effham.operators import Operator

BasisLike = Union[SectorBasis, FullBasis]

ALPHA_WARN_DEFAULT = 0.2
ALPHA_ERROR_DEFAULT = 0.5


class ResonanceError(ValueError):
    """A denominator that must stay finite vanished (unwanted resonance),
    or a required resonance condition is violated."""


@dataclass(frozen=True)
class CascadeModelSpec:
    """N cascade levels, A identical atoms, couplings g_1..g_{N−1}.

    Either ``detunings`` (Δ_1..Δ_N, with Δ_1 = 0 by convention: level 1 is
    the energy reference) or ``level_frequencies`` together with
    ``field_frequency`` must be given.  The cascade ordering requires
    strictly increasing level frequencies.
    """

    n_levels: int
    n_atoms: int
    g: tuple[float, ...]
    detunings_in: tuple[float, ...] | None = None
    field_frequency: float | None = None
    level_frequencies: tuple[float, ...] | None = None
    max_excitation: Fraction | None = None

    def __post_init__(self) -> None:
        if self.n_levels < 2:
            raise ValueError(f"need at least 2 levels, got {self.n_levels}")
        if self.n_atoms < 1:
            raise ValueError(f"need at least 1 atom, got {self.n_atoms}")
        if len(self.g) != self.n_levels - 1:
            raise ValueError(
                f"expected {self.n_levels - 1} couplings, got {len(self.g)}"
            )
        has_freq = self.level_frequencies is not None
        if has_freq != (self.field_frequency is not None):
            raise ValueError("level_frequencies and field_frequency go together")
        if (self.detunings_in is None) == (not has_freq):
            raise ValueError("give either detunings or level frequencies, not both")
        if has_freq:
            omega = self.level_frequencies
            if len(omega) != self.n_levels:
                raise ValueError(
                    f"expected {self.n_levels} level frequencies, got {len(omega)}"
                )
            if any(b <= a for a, b in zip(omega, omega[1:])):
                raise ValueError("cascade ordering requires increasing frequencies")
        else:
            delta = self.detunings_in
            if len(delta) != self.n_levels:
                raise ValueError(
                    f"expected {self.n_levels} detunings, got {len(delta)}"
                )
            if delta[0] != 0.0:
                raise ValueError(
                    "detunings[0] must be 0: level 1 is the energy reference"
                )
        values = list(self.g)
        if self.detunings_in is not None:
            values += list(self.detunings_in)
        if self.level_frequencies is not None:
            values += list(self.level_frequencies) + [self.field_frequency]
        if not all(math.isfinite(v) for v in values):
            raise ValueError("model parameters must be finite")
        if self.max_excitation is not None:
            object.__setattr__(
                self, "max_excitation", as_excitation(self.max_excitation)
            )

    @property
    def mid_frequency(self) -> float:
        """(ω_N + ω_1)/2, defined only when frequencies were given."""
        if self.level_frequencies is None:
            raise ValueError("mid frequency needs explicit level frequencies")
        return 0.5 * (self.level_frequencies[-1] + self.level_frequencies[0])


def detunings(spec: CascadeModelSpec, require_resonance: bool = False) -> np.ndarray:
    """Δ_j = ω_j − ω_1 − (j−1)ω_f, or the detunings given directly.

    With ``require_resonance`` the last detuning must vanish (the field in
    (N−1)-photon resonance with the 1↔N transition).
    """
    if spec.detunings_in is not None:
        delta = np.array(spec.detunings_in, dtype=float)
    else:
        omega = np.array(spec.level_frequencies, dtype=float)
        steps = np.arange(spec.n_levels, dtype=float)
        delta = omega - omega[0] - steps * spec.field_frequency
    if require_resonance:
        scale = max(1.0, float(np.max(np.abs(delta))))
        if abs(delta[-1]) > 1e-12 * scale:
            raise ResonanceError(
                f"detuning of the top level is {delta[-1]:.3e}, but the "
                f"{spec.n_levels - 1}-photon resonance requires it to vanish"
            )
    return delta


# ---------------------------------------------------------------------------
# coupling ladder
# ---------------------------------------------------------------------------


def alpha1(
    spec: CascadeModelSpec,
    warn_above: float = ALPHA_WARN_DEFAULT,
    error_above: float = ALPHA_ERROR_DEFAULT,
) -> np.ndarray:
    """First-order rotation amplitudes α_j = g_j / (Δ_{j+1} − Δ_j)."""
    delta = detunings(spec)
    gaps = np.diff(delta)
    scale = max(1.0, float(np.max(np.abs(delta))))
    for j, gap in enumerate(gaps, start=1):
        if abs(gap) <= 1e-12 * scale:
            raise ResonanceError(
                f"one-photon resonance at transition {j}↔{j + 1}: "
                f"Δ_{j + 1} − Δ_{j} = {gap:.3e}"
            )
    alpha = np.array(spec.g) / gaps
    worst = float(np.max(np.abs(alpha)))
    if worst > error_above:
        raise ValueError(
            f"max|α| = {worst:.3f} exceeds {error_above}: the rotation "
            "expansion is meaningless at this coupling"
        )
    if worst > warn_above:
        warnings.warn(
            f"max|α| = {worst:.3f} above {warn_above}: expect slow convergence",
            stacklevel=2,
        )
    return alpha


def psi_ladder(spec: CascadeModelSpec) -> list[np.ndarray]:
    """Effective k-photon coupling constants from the recurrence
    ψ_j^(k+1) = α_{j+k} ψ_j^(k) − α_j ψ_{j+1}^(k), seeded by ψ_j^(1) = g_j.

    Entry [k−1][j−1] is ψ_j^(k); at order k the index j runs 1..N−k so the
    k-photon operator S₊^{j,j+k} exists.
    """
    alpha = alpha1(spec)
    ladder = [np.array(spec.g, dtype=float)]
    for k in range(1, spec.n_levels - 1):
        prev = ladder[-1]
        nxt = np.array(
            [alpha[j + k] * prev[j] - alpha[j] * prev[j + 1] for j in range(len(prev) - 1)]
        )
        ladder.append(nxt)
    return ladder


def alpha2(spec: CascadeModelSpec) -> np.ndarray:
    """Second-order amplitudes α_j^(2) = ψ_j^(2) / (Δ_{j+2} − Δ_j).

    Requires every two-photon transition to be off resonance."""
    delta = detunings(spec)
    psi2 = psi_ladder(spec)[1]
    scale = max(1.0, float(np.max(np.abs(delta))))
    out = np.zeros(len(psi2))
    for j in range(len(psi2)):
        gap = delta[j + 2] - delta[j]
        if abs(gap) <= 1e-12 * scale:
            raise ResonanceError(
                f"two-photon resonance at transition {j + 1}↔{j + 3}: "
                f"Δ_{j + 3} − Δ_{j + 1} = {gap:.3e}"
            )
        out[j] = psi2[j] / gap
    return out


def beta(spec: CascadeModelSpec) -> np.ndarray:
    """Exchange amplitudes β_ij = α_i g_j / (Δ_{i+1} − Δ_i + Δ_j − Δ_{j+1}).

    Defined for i ≠ j only; the i = j denominator vanishes identically and
    those terms are population-diagonal, handled by the diagonal correction.
    The diagonal of the returned matrix is zero.
    """
    delta = detunings(spec)
    alpha = alpha1(spec)
    n = spec.n_levels - 1
    scale = max(1.0, float(np.max(np.abs(delta))))
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            den = delta[i + 1] - delta[i] + delta[j] - delta[j + 1]
            if abs(den) <= 1e-12 * scale:
                raise ResonanceError(
                    f"exchange resonance between transitions {i + 1}↔{i + 2} "
                    f"and {j + 1}↔{j + 2}: denominator {den:.3e}"
                )
            out[i, j] = alpha[i] * spec.g[j] / den
    return out


@dataclass(frozen=True)
class CouplingLadder:
    """Perturbative constants with their order bookkeeping.

    ``psi[k-1][j-1]`` is ψ_j^(k) (so psi[0] echoes the bare couplings);
    ``alpha2``/``beta`` are None when the model is resonant at that order.
    """

    alpha1: np.ndarray
    psi: list[np.ndarray]
    alpha2: np.ndarray | None = None
    beta: np.ndarray | None = field(default=None)


def coupling_ladder(spec: CascadeModelSpec, second_order: bool = True) -> CouplingLadder:
    """Assemble every derived coupling constant for the model."""
    a1 = alpha1(spec)
    psi = psi_ladder(spec)
    a2 = b = None
    if second_order:
        a2 = alpha2(spec)
        b = beta(spec)
    return CouplingLadder(alpha1=a1, psi=psi, alpha2=a2, beta=b)


# ---------------------------------------------------------------------------
# Hamiltonian and generator builders
# ---------------------------------------------------------------------------


def _assemble(basis: BasisLike, builder: Callable[[SectorBasis], np.ndarray]) -> Operator:
    """Apply a per-sector matrix builder to a sector or, block by block, to a
    full basis."""
    if isinstance(basis, SectorBasis):
        return Operator(builder(basis), basis.tag)
    blocks = [builder(sec) for sec in basis.sectors]
    total = sum(b.shape[0] for b in blocks)
    out = np.zeros((total, total), dtype=complex)
    pos = 0
    for block in blocks:
        d = block.shape[0]
        out[pos : pos + d, pos : pos + d] = block
        pos += d
    return Operator(out, basis.tag)


def _k_photon_raise(sector: SectorBasis, j: int, k: int) -> np.ndarray:
    """Matrix of a^k S₊^{j,j+k}: absorb k photons, lift one atom j → j+k.

    Amplitude √(n(n−1)...(n−k+1)) · √((m_{j+k}+1) m_j); conserves the
    sector by construction.
    """
    mat = np.zeros((sector.dim, sector.dim), dtype=complex)
    for col, state in enumerate(sector.states):
        occ = state.occupations
        if state.photon_n < k or occ[j - 1] == 0:
            continue
        amp = 1.0
        for step in range(k):
            amp *= state.photon_n - step
        amp = math.sqrt(amp * (occ[j + k - 1] + 1) * occ[j - 1])
        new_occ = list(occ)
        new_occ[j - 1] -= 1
        new_occ[j + k - 1] += 1
        target = BasisState(state.photon_n - k, tuple(new_occ))
        mat[sector.position(target), col] = amp
    return mat


def _pair_exchange(sector: SectorBasis, i: int, j: int) -> np.ndarray:
    """Matrix of S₊^{i,i+1} S₋^{j,j+1}: one atom up at transition i, one atom
    down at transition j.  Photons untouched; conserves the sector."""
    mat = np.zeros((sector.dim, sector.dim), dtype=complex)
    for col, state in enumerate(sector.states):
        occ = list(state.occupations)
        if occ[j] == 0:
            continue
        amp = math.sqrt((occ[j - 1] + 1) * occ[j])
        occ[j] -= 1
        occ[j - 1] += 1
        if occ[i - 1] == 0:
            continue
        amp *= math.sqrt((occ[i] + 1) * occ[i - 1])
        occ[i - 1] -= 1
        occ[i] += 1
        target = BasisState(state.photon_n, tuple(occ))
        mat[sector.position(target), col] = amp
    return mat


def _check_basis(spec: CascadeModelSpec, basis: BasisLike) -> None:
    if (basis.n_levels, basis.n_atoms) != (spec.n_levels, spec.n_atoms):
        raise ValueError(
            f"basis is for N={basis.n_levels}, A={basis.n_atoms} but the model "
            f"has N={spec.n_levels}, A={spec.n_atoms}"
        )


def build_full_h(
    spec: CascadeModelSpec, basis: BasisLike, include_free_part: bool = False
) -> Operator:
    """Interaction Hamiltonian h₀ + V, block-diagonal over sectors.

    ``include_free_part`` adds the sector-constant ω_f·N̂ + ω·A (needs
    explicit frequencies); it never affects in-sector dynamics.
    """
    _check_basis(spec, basis)
    delta = detunings(spec)
    if include_free_part and spec.level_frequencies is None:
        raise ValueError("free part needs explicit level frequencies")

    def builder(sector: SectorBasis) -> np.ndarray:
        mat = np.zeros((sector.dim, sector.dim), dtype=complex)
        for idx, state in enumerate(sector.states):
            mat[idx, idx] = sum(
                delta[lvl] * state.occupations[lvl] for lvl in range(spec.n_levels)
            )
        for j in range(1, spec.n_levels):
            block = _k_photon_raise(sector, j, 1)
            mat += spec.g[j - 1] * (block + block.conj().T)
        if include_free_part:
            shift = spec.field_frequency * float(sector.excitation)
            shift += spec.mid_frequency * spec.n_atoms
            mat += shift * np.eye(sector.dim)
        return mat

    return _assemble(basis, builder)


def h0_reference(spec: CascadeModelSpec, basis: BasisLike) -> Operator:
    """Diagonal reference h₀ = Σ_j Δ_j S^{jj} (the split used by the engine)."""
    _check_basis(spec, basis)
    delta = detunings(spec)

    def builder(sector: SectorBasis) -> np.ndarray:
        diag = [
            sum(delta[lvl] * st.occupations[lvl] for lvl in range(spec.n_levels))
            for st in sector.states
        ]
        return np.diag(np.asarray(diag, dtype=complex))

    return _assemble(basis, builder)


def excitation_operator(basis: BasisLike) -> Operator:
    """Diagonal N̂ (photons plus weighted atomic inversion)."""
    from effham.basis import excitation_number

    def builder(sector: SectorBasis) -> np.ndarray:
        diag = [
            float(excitation_number(st, sector.n_levels)) for st in sector.states
        ]
        return np.diag(np.asarray(diag, dtype=complex))

    return _assemble(basis, builder)


def t1_generator(spec: CascadeModelSpec, basis: BasisLike) -> Operator:
    """Anti-Hermitian T₁ = Σ_j α_j (a S₊^{j,j+1} − a† S₋^{j,j+1}), the one
    rotation that cancels every one-photon coupling: [T₁, h₀] = −V."""
    _check_basis(spec, basis)
    alpha = alpha1(spec)

    def builder(sector: SectorBasis) -> np.ndarray:
        mat = np.zeros((sector.dim, sector.dim), dtype=complex)
        for j in range(1, spec.n_levels):
            block = _k_photon_raise(sector, j, 1)
            mat += alpha[j - 1] * (block - block.conj().T)
        return mat

    return _assemble(basis, builder)


def h_diag_first(spec: CascadeModelSpec, basis: BasisLike) -> Operator:
    """Leading diagonal correction generated by the T₁ rotation.

    Per transition j this is the diagonal part of ½[T₁, V]:
    g_j α_j [S_z^{j,j+1}(2a†a+1) + ½{S₊^{j,j+1}, S₋^{j,j+1}}], evaluated
    state by state in the occupation basis.  Next corrections are two orders
    down in α.
    """
    _check_basis(spec, basis)
    alpha = alpha1(spec)

    def builder(sector: SectorBasis) -> np.ndarray:
        diag = np.zeros(sector.dim)
        for idx, state in enumerate(sector.states):
            n = state.photon_n
            occ = state.occupations
            value = 0.0
            for j in range(1, spec.n_levels):
                mj, mj1 = occ[j - 1], occ[j]
                sz = 0.5 * (mj1 - mj)
                anticomm = mj1 * (mj + 1) + mj * (mj1 + 1)
                value += spec.g[j - 1] * alpha[j - 1] * (
                    sz * (2 * n + 1) + 0.5 * anticomm
                )
            diag[idx] = value
        return np.diag(diag.astype(complex))

    return _assemble(basis, builder)


def h_nondiag(spec: CascadeModelSpec, basis: BasisLike) -> Operator:
    """Off-diagonal atomic exchange terms generated by the T₁ rotation:
    ½ Σ_{i≠j} α_i g_j (S₊^{i,i+1} S₋^{j,j+1} + S₊^{j,j+1} S₋^{i,i+1})."""
    _check_basis(spec, basis)
    alpha = alpha1(spec)

    def builder(sector: SectorBasis) -> np.ndarray:
        mat = np.zeros((sector.dim, sector.dim), dtype=complex)
        for i in range(1, spec.n_levels):
            for j in range(1, spec.n_levels):
                if i == j:
                    continue
                block = _pair_exchange(sector, i, j)
                mat += 0.5 * alpha[i - 1] * spec.g[j - 1] * (block + block.conj().T)
        return mat

    return _assemble(basis, builder)


def t2_generators(
    spec: CascadeModelSpec, basis: BasisLike
) -> tuple[Operator, Operator]:
    """Second-stage generators.

    The first removes the two-photon couplings:
    T₂' = ½ Σ_j α_j^(2) (a² S₊^{j,j+2} − a†² S₋^{j,j+2}).
    The second removes the atomic exchange terms; the anti-Hermitian
    combination T₂'' = ½ Σ_{i≠j} β_ij (S₊^i S₋^j − S₊^j S₋^i) satisfies
    [T₂'', h₀] = −h_nondiag (a symmetric combination could not generate a
    unitary at all).
    """
    _check_basis(spec, basis)
    a2 = alpha2(spec)
    b = beta(spec)

    def builder_photon(sector: SectorBasis) -> np.ndarray:
        mat = np.zeros((sector.dim, sector.dim), dtype=complex)
        for j in range(1, spec.n_levels - 1):
            block = _k_photon_raise(sector, j, 2)
            mat += 0.5 * a2[j - 1] * (block - block.conj().T)
        return mat

    def builder_exchange(sector: SectorBasis) -> np.ndarray:
        mat = np.zeros((sector.dim, sector.dim), dtype=complex)
        for i in range(1, spec.n_levels):
            for j in range(1, spec.n_levels):
                if i == j:
                    continue
                block = _pair_exchange(sector, i, j)
                mat += 0.5 * b[i - 1, j - 1] * (block - block.conj().T)
        return mat

    return _assemble(basis, builder_photon), _assemble(basis, builder_exchange)


# ---------------------------------------------------------------------------
# closed-form effective Hamiltonians
# ---------------------------------------------------------------------------


def _projector_empty_levels(sector: SectorBasis, levels: tuple[int, ...]) -> np.ndarray:
    keep = np.array(
        [all(st.occupations[lvl - 1] == 0 for lvl in levels) for st in sector.states]
    )
    return np.diag(keep.astype(complex))


def effective_two_photon(
    spec: CascadeModelSpec, basis: BasisLike, assume_level2_empty: bool = True
) -> Operator:
    """Effective Hamiltonian of a three-level cascade at two-photon resonance.

    h₀ + (diagonal Stark correction) + ½ψ₁^(2)(a²S₊^{13} + a†²S₋^{13}).
    With ``assume_level2_empty`` the operator is projected onto states with
    no population in level 2 (zero rows/columns elsewhere); h₀ then vanishes
    identically and only the two-photon block plus the dynamical Stark shift
    survive.
    """
    if spec.n_levels != 3:
        raise ValueError(f"two-photon form needs N=3, got N={spec.n_levels}")
    _check_basis(spec, basis)
    detunings(spec, require_resonance=True)
    psi2 = psi_ladder(spec)[1][0]
    h0 = h0_reference(spec, basis)
    hd = h_diag_first(spec, basis)

    def builder(sector: SectorBasis) -> np.ndarray:
        block = _k_photon_raise(sector, 1, 2)
        return 0.5 * psi2 * (block + block.conj().T)

    out = h0 + hd + _assemble(basis, builder)
    if assume_level2_empty:
        proj = _assemble(basis, lambda sec: _projector_empty_levels(sec, (2,)))
        out = proj @ out @ proj
    return out


def effective_three_photon(
    spec: CascadeModelSpec, basis: BasisLike, keep_order3_terms: bool = False
) -> Operator:
    """Effective Hamiltonian of a four-level cascade at three-photon
    resonance, projected onto states with levels 2 and 3 empty.

    The surviving interaction is (1/3)ψ₁^(3)(a³S₊^{14} + a†³S₋^{14}); the
    diagonal carries the dynamical Stark shifts −α₁g₁·a†a on level 1 and
    α₃g₃·(a†a+1) on level 4.  The interaction is one order (in 1/Δ) smaller
    than the Stark terms.  ``keep_order3_terms`` retains the next-order
    diagonal remnants of the second-stage rotations (the α^(2)ψ^(2) photon
    polynomials and the level-1·level-4 exchange term), each derived from
    ½[T, ·] of its own generator.
    """
    if spec.n_levels != 4:
        raise ValueError(f"three-photon form needs N=4, got N={spec.n_levels}")
    _check_basis(spec, basis)
    detunings(spec, require_resonance=True)
    alpha = alpha1(spec)
    psi = psi_ladder(spec)
    psi3 = psi[2][0]
    g = spec.g

    extra_a2 = extra_b = None
    if keep_order3_terms:
        a2 = alpha2(spec)
        b = beta(spec)
        psi2 = psi[1]
        extra_a2 = (a2[0] * psi2[0], a2[1] * psi2[1])
        # ½[T₂'', h_nondiag] projected: only the {1,3} transition pair keeps a
        # diagonal piece, ∝ S^{11}S^{44}.
        extra_b = -0.25 * (b[0, 2] - b[2, 0]) * (alpha[0] * g[2] + alpha[2] * g[0])

    def builder(sector: SectorBasis) -> np.ndarray:
        mat = np.zeros((sector.dim, sector.dim), dtype=complex)
        block = _k_photon_raise(sector, 1, 3)
        mat += (psi3 / 3.0) * (block + block.conj().T)
        for idx, state in enumerate(sector.states):
            n = state.photon_n
            m1, m4 = state.occupations[0], state.occupations[3]
            stark = -alpha[0] * g[0] * m1 * n + alpha[2] * g[2] * m4 * (n + 1)
            if keep_order3_terms:
                stark += 0.25 * (
                    -extra_a2[0] * n * (n - 1) * m1
                    + extra_a2[1] * (n + 1) * (n + 2) * m4
                )
                stark += extra_b * m1 * m4
            mat[idx, idx] += stark
        return mat

    out = _assemble(basis, builder)
    proj = _assemble(basis, lambda sec: _projector_empty_levels(sec, (2, 3)))
    return proj @ out @ proj


# ---------------------------------------------------------------------------
# convenience
# ---------------------------------------------------------------------------


def default_basis(spec: CascadeModelSpec) -> FullBasis:
    """Full basis up to the spec's excitation cutoff."""
    if spec.max_excitation is None:
        raise ValueError("model spec has no max_excitation")
    return build_full_basis(spec.n_levels, spec.n_atoms, spec.max_excitation)


def product_state(sector: SectorBasis, photon_n: int, level: int) -> np.ndarray:
    """Unit vector for |photon_n⟩ ⊗ (all atoms in ``level``) inside a sector."""
    occ = [0] * sector.n_levels
    occ[level - 1] = sector.n_atoms
    state = BasisState(photon_n, tuple(occ))
    vec = np.zeros(sector.dim, dtype=complex)
    vec[sector.position(state)] = 1.0
    return vec


def sector_of_product_state(
    spec: CascadeModelSpec, photon_n: int, level: int
) -> SectorBasis:
    """The sector containing |photon_n⟩ ⊗ (all atoms in ``level``)."""
    from effham.basis import build_sector, excitation_number

    occ = [0] * spec.n_levels
    occ[level - 1] = spec.n_atoms
    exc = excitation_number(BasisState(photon_n, tuple(occ)), spec.n_levels)
    return build_sector(spec.n_levels, spec.n_atoms, exc)
