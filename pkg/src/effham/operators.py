"""Dense complex operator algebra over sector bases.

Provides the field/atomic operator builders (a, a†, S^{ij}), commutators, a
cyclic-Jacobi Hermitian eigensolver, the matrix exponential of
anti-Hermitian generators, unitary conjugation and Frobenius/off-diagonal
norms.  Everything is a plain dense complex matrix tagged with the basis it
acts on; mixing operators from different bases is an error, not a silent
bug.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from effham.basis import SectorBasis

# Hermiticity / anti-Hermiticity checks: relative Frobenius tolerance with an
# absolute floor so that near-zero matrices do not trip the relative test.
HERMITICITY_RTOL = 1e-10
HERMITICITY_FLOOR = 1e-14


class BasisMismatchError(ValueError):
    """Binary operation between operators living on different bases."""


class HermiticityError(ValueError):
    """Operator fails a required (anti-)Hermiticity or unitarity check."""


@dataclass(frozen=True)
class Operator:
    """Dense complex matrix mapping states of ``domain_tag`` to ``basis_tag``.

    Square operators have equal tags; standalone ladder operators such as a
    or S^{ij} (i ≠ j) change the excitation and therefore map between two
    different sector bases.
    """

    matrix: np.ndarray
    basis_tag: str
    domain_tag: str = ""

    def __post_init__(self) -> None:
        mat = np.asarray(self.matrix, dtype=complex)
        if mat.ndim != 2:
            raise ValueError(f"operator matrix must be 2-D, got shape {mat.shape}")
        object.__setattr__(self, "matrix", mat)
        if not self.domain_tag:
            object.__setattr__(self, "domain_tag", self.basis_tag)
        if self.is_square and mat.shape[0] != mat.shape[1]:
            raise ValueError(
                f"operator on a single basis must be square, got {mat.shape}"
            )

    @property
    def is_square(self) -> bool:
        return self.basis_tag == self.domain_tag

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def dag(self) -> "Operator":
        return Operator(self.matrix.conj().T, self.domain_tag, self.basis_tag)

    def __add__(self, other: "Operator") -> "Operator":
        _require_same_basis(self, other)
        return Operator(self.matrix + other.matrix, self.basis_tag, self.domain_tag)

    def __sub__(self, other: "Operator") -> "Operator":
        _require_same_basis(self, other)
        return Operator(self.matrix - other.matrix, self.basis_tag, self.domain_tag)

    def __mul__(self, scalar: complex) -> "Operator":
        return Operator(self.matrix * scalar, self.basis_tag, self.domain_tag)

    __rmul__ = __mul__

    def __neg__(self) -> "Operator":
        return Operator(-self.matrix, self.basis_tag, self.domain_tag)

    def __matmul__(self, other: "Operator") -> "Operator":
        if self.domain_tag != other.basis_tag:
            raise BasisMismatchError(
                f"cannot compose: {self.domain_tag!r} != {other.basis_tag!r}"
            )
        return Operator(self.matrix @ other.matrix, self.basis_tag, other.domain_tag)


def _require_same_basis(x: Operator, y: Operator) -> None:
    if x.basis_tag != y.basis_tag or x.domain_tag != y.domain_tag:
        raise BasisMismatchError(
            f"operators live on different bases: "
            f"({x.basis_tag!r}, {x.domain_tag!r}) vs ({y.basis_tag!r}, {y.domain_tag!r})"
        )


# ---------------------------------------------------------------------------
# operator builders
# ---------------------------------------------------------------------------


def annihilation_op(src: SectorBasis, dst: SectorBasis) -> Operator:
    """Field operator a between sectors: ⟨n−1, m|a|n, m⟩ = √n.

    The destination sector must sit one excitation below the source.
    """
    _check_sector_pair(src, dst, src.excitation - 1)
    mat = np.zeros((dst.dim, src.dim), dtype=complex)
    for col, state in enumerate(src.states):
        if state.photon_n == 0:
            continue
        from effham.basis import BasisState

        target = BasisState(state.photon_n - 1, state.occupations)
        if target in dst.index:
            mat[dst.index[target], col] = math.sqrt(state.photon_n)
    return Operator(mat, dst.tag, src.tag)


def creation_op(src: SectorBasis, dst: SectorBasis) -> Operator:
    """Field operator a† between sectors (adjoint of annihilation)."""
    return annihilation_op(dst, src).dag()


def photon_number_op(basis: SectorBasis) -> Operator:
    """Diagonal a†a within one sector."""
    return Operator(
        np.diag([float(s.photon_n) for s in basis.states]).astype(complex), basis.tag
    )


def transition_op(src: SectorBasis, dst: SectorBasis, i: int, j: int) -> Operator:
    """Collective atomic operator S^{ij} moving one atom from level j to i.

    Symmetric-representation (bosonic) matrix elements:
    S^{ij}|.., m_i, .., m_j, ..⟩ = √((m_i+1) m_j) |.., m_i+1, .., m_j−1, ..⟩,
    and S^{ii} is the diagonal population m_i.  Levels are 1-based.
    """
    n = src.n_levels
    if not (1 <= i <= n and 1 <= j <= n):
        raise ValueError(f"level indices ({i}, {j}) out of range 1..{n}")
    _check_sector_pair(src, dst, src.excitation + (i - j))
    mat = np.zeros((dst.dim, src.dim), dtype=complex)
    from effham.basis import BasisState

    for col, state in enumerate(src.states):
        occ = state.occupations
        if i == j:
            mat[dst.index[state], col] = occ[i - 1]
            continue
        if occ[j - 1] == 0:
            continue
        new_occ = list(occ)
        new_occ[j - 1] -= 1
        new_occ[i - 1] += 1
        target = BasisState(state.photon_n, tuple(new_occ))
        if target in dst.index:
            mat[dst.index[target], col] = math.sqrt((occ[i - 1] + 1) * occ[j - 1])
    return Operator(mat, dst.tag, src.tag)


def _check_sector_pair(src: SectorBasis, dst: SectorBasis, expected) -> None:
    if (src.n_levels, src.n_atoms) != (dst.n_levels, dst.n_atoms):
        raise BasisMismatchError(
            f"sectors belong to different systems: {src.tag!r} vs {dst.tag!r}"
        )
    if dst.excitation != expected:
        raise BasisMismatchError(
            f"destination sector has excitation {dst.excitation}, expected {expected}"
        )


# ---------------------------------------------------------------------------
# algebra
# ---------------------------------------------------------------------------


def commutator(x: Operator, y: Operator) -> Operator:
    """XY − YX on a shared basis."""
    _require_same_basis(x, y)
    return Operator(
        x.matrix @ y.matrix - y.matrix @ x.matrix, x.basis_tag, x.domain_tag
    )


def frobenius_norm(x: Operator | np.ndarray) -> float:
    mat = x.matrix if isinstance(x, Operator) else np.asarray(x)
    return float(np.linalg.norm(mat))


def hermiticity_defect(mat: np.ndarray) -> float:
    return float(np.linalg.norm(mat - mat.conj().T))


def is_hermitian(mat: np.ndarray, rtol: float = HERMITICITY_RTOL) -> bool:
    return hermiticity_defect(mat) <= max(rtol * np.linalg.norm(mat), HERMITICITY_FLOOR)


def degenerate_blocks(
    energies: Sequence[float], resonance_tol: float
) -> list[tuple[int, ...]]:
    """Group indices whose reference energies chain together within the
    tolerance.  Returns all blocks (singletons included), sorted."""
    order = sorted(range(len(energies)), key=lambda k: (energies[k], k))
    blocks: list[list[int]] = []
    for idx in order:
        if blocks and abs(energies[idx] - energies[blocks[-1][-1]]) <= resonance_tol:
            blocks[-1].append(idx)
        else:
            blocks.append([idx])
    return sorted(tuple(sorted(b)) for b in blocks)


def offdiag_norm(
    x: Operator | np.ndarray, blocks: Sequence[Sequence[int]] | None = None
) -> float:
    """Frobenius norm of the content outside the block-diagonal projection.

    ``blocks`` lists index sets that count as 'diagonal' (degenerate blocks
    whose couplings cannot be rotated away).  With no blocks, every
    off-diagonal entry counts.
    """
    mat = x.matrix if isinstance(x, Operator) else np.asarray(x, dtype=complex)
    keep = np.eye(mat.shape[0], dtype=bool)
    if blocks is not None:
        for block in blocks:
            idx = np.asarray(tuple(block), dtype=int)
            keep[np.ix_(idx, idx)] = True
    return float(np.linalg.norm(mat[~keep]))


# ---------------------------------------------------------------------------
# eigensolver (cyclic Jacobi, complex Hermitian)
# ---------------------------------------------------------------------------

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 60


@dataclass(frozen=True)
class EigenDecomposition:
    """Ascending eigenvalues and the matching unitary column eigenvectors."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        q = self.eigenvectors
        return (q * self.eigenvalues) @ q.conj().T


def _jacobi_hermitian(mat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Diagonalise a complex Hermitian matrix by cyclic Jacobi rotations.

    Sweeps until the off-diagonal Frobenius mass falls below
    JACOBI_TOL × ‖A‖_F.  Adequate up to a few hundred rows, which covers
    every sector this package produces.
    """
    a = np.array(mat, dtype=complex)
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    if n == 1:
        return a.real.diagonal().copy(), v
    scale = float(np.linalg.norm(a))
    if scale == 0.0:
        return np.zeros(n), v
    offdiag_mask = ~np.eye(n, dtype=bool)
    for _ in range(JACOBI_MAX_SWEEPS):
        # norm taken entry-wise: a sum-minus-diagonal shortcut would cancel
        # catastrophically once the off-diagonal mass falls below √eps·‖A‖
        off = float(np.linalg.norm(a[offdiag_mask]))
        if off <= JACOBI_TOL * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                absapq = abs(apq)
                if absapq <= 1e-300:
                    continue
                phase = apq / absapq
                tau = (a[q, q].real - a[p, p].real) / (2.0 * absapq)
                t = (1.0 if tau >= 0 else -1.0) / (
                    abs(tau) + math.sqrt(1.0 + tau * tau)
                )
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                colp, colq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * colp - s * np.conj(phase) * colq
                a[:, q] = s * phase * colp + c * colq
                rowp, rowq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * rowp - s * phase * rowq
                a[q, :] = s * np.conj(phase) * rowp + c * rowq
                a[p, q] = 0.0
                a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * np.conj(phase) * vq
                v[:, q] = s * phase * vp + c * vq
    else:
        raise ArithmeticError("Jacobi eigensolver did not converge")
    w = a.diagonal().real.copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def hermitian_eig(h: Operator) -> EigenDecomposition:
    """Exact-diagonalisation oracle: eigenvalues ascending, unitary Q."""
    mat = h.matrix
    defect = hermiticity_defect(mat)
    if defect > max(HERMITICITY_RTOL * np.linalg.norm(mat), HERMITICITY_FLOOR):
        raise HermiticityError(
            f"matrix is not Hermitian: ‖H − H†‖ = {defect:.3e}"
        )
    w, v = _jacobi_hermitian(mat)
    return EigenDecomposition(w, v)


def expm_antihermitian(t: Operator) -> Operator:
    """Unitary exp(T) for anti-Hermitian T, via the eigensolver of iT."""
    mat = t.matrix
    defect = float(np.linalg.norm(mat + mat.conj().T))
    if defect > max(HERMITICITY_RTOL * np.linalg.norm(mat), HERMITICITY_FLOOR):
        raise HermiticityError(
            f"generator is not anti-Hermitian: ‖T + T†‖ = {defect:.3e}"
        )
    w, v = _jacobi_hermitian(1j * mat)
    u = (v * np.exp(-1j * w)) @ v.conj().T
    return Operator(u, t.basis_tag, t.domain_tag)


def unitarity_defect(u: Operator | np.ndarray) -> float:
    mat = u.matrix if isinstance(u, Operator) else np.asarray(u)
    return float(np.linalg.norm(mat.conj().T @ mat - np.eye(mat.shape[0])))


def un_rule_residual(sector: SectorBasis) -> float:
    """Worst-case residual of the u(N) commutation rule on one sector.

    Checks [S^{ij}, S^{km}] = δ_{jk} S^{im} − δ_{im} S^{kj} for every index
    combination, composing the sector-pair transition operators through the
    neighbouring sectors they map into.  The collective operators act only
    on the atomic occupations, so no truncation enters: sectors at every
    intermediate excitation are complete.
    """
    from effham.basis import build_sector

    n = sector.n_levels
    cache: dict = {sector.excitation: sector}

    def sec(excitation):
        if excitation not in cache:
            cache[excitation] = build_sector(n, sector.n_atoms, excitation)
        return cache[excitation]

    def op(src_excitation, i: int, j: int) -> Operator:
        src = sec(src_excitation)
        return transition_op(src, sec(src_excitation + (i - j)), i, j)

    base = sector.excitation
    worst = 0.0
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            for k in range(1, n + 1):
                for m in range(1, n + 1):
                    left = op(base + (k - m), i, j) @ op(base, k, m)
                    right = op(base + (i - j), k, m) @ op(base, i, j)
                    comm = (left - right).matrix
                    rhs = np.zeros_like(comm)
                    if j == k:
                        rhs = rhs + op(base, i, m).matrix
                    if i == m:
                        rhs = rhs - op(base, k, j).matrix
                    worst = max(worst, float(np.linalg.norm(comm - rhs)))
    return worst


def conjugate(u: Operator, h: Operator) -> Operator:
    """U H U† (checked unitary U): the exact similarity transformation."""
    _require_same_basis(u, h)
    defect = unitarity_defect(u)
    if defect > 1e-10 * math.sqrt(u.dim) + 1e-12:
        raise HermiticityError(f"matrix is not unitary: ‖U†U − I‖ = {defect:.3e}")
    return Operator(
        u.matrix @ h.matrix @ u.matrix.conj().T, h.basis_tag, h.domain_tag
    )
