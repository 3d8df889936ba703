"""Time evolution, fidelity benchmarks, observables and error-scaling fits.

Evolution is spectral: ψ(t) = Q e^{−iΛt} Q† ψ₀ from the exact-
diagonalisation oracle, so norms are preserved to solver accuracy at
arbitrary times.  Fidelity between exact and effective dynamics supports a
frame correction: when the effective Hamiltonian lives in a rotated frame
U H U†, the comparison state is U† e^{−iH_eff t} U ψ₀.  Omitting the frame
('bare' mode) exposes the first-order fidelity floor the rotation implies.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from effham.basis import SectorBasis
from effham.operators import Operator, hermitian_eig

FIDELITY_SLACK = 1e-12


@dataclass(frozen=True)
class TimeGrid:
    """Strictly ascending, nonnegative sample times (units 1/energy)."""

    times: np.ndarray

    def __post_init__(self) -> None:
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or len(t) == 0:
            raise ValueError("time grid must be a nonempty 1-D array")
        if t[0] < 0 or np.any(np.diff(t) <= 0):
            raise ValueError("times must be nonnegative and strictly ascending")
        object.__setattr__(self, "times", t)

    @classmethod
    def linspace(cls, t_max: float, points: int) -> "TimeGrid":
        return cls(np.linspace(0.0, t_max, points))

    def __len__(self) -> int:
        return len(self.times)


def evolve(h: Operator, psi0: np.ndarray, grid: TimeGrid) -> np.ndarray:
    """States ψ(t) for every grid time, shape (len(grid), dim)."""
    psi0 = np.asarray(psi0, dtype=complex)
    if abs(np.linalg.norm(psi0) - 1.0) > 1e-10:
        raise ValueError(f"initial state not normalised: ‖ψ₀‖ = {np.linalg.norm(psi0)}")
    eig = hermitian_eig(h)
    amplitudes = eig.eigenvectors.conj().T @ psi0
    phases = np.exp(-1j * np.outer(grid.times, eig.eigenvalues))
    return (phases * amplitudes) @ eig.eigenvectors.T


@dataclass(frozen=True)
class FidelityReport:
    """|⟨ψ_exact(t)|ψ_eff(t)⟩|² along the grid."""

    times: np.ndarray
    fidelity: np.ndarray
    min_fidelity: float


def fidelity_series(
    h_exact: Operator,
    h_eff: Operator,
    psi0: np.ndarray,
    grid: TimeGrid,
    frame: Operator | None = None,
) -> FidelityReport:
    """Fidelity between exact and effective evolutions of the same ψ₀.

    With ``frame`` = U (the accumulated small rotation), the effective path
    is U† e^{−iH_eff t} U ψ₀ so that F(0) = 1 exactly.  Without it the
    comparison is done in the bare frame.
    """
    if h_exact.basis_tag != h_eff.basis_tag:
        raise ValueError(
            f"Hamiltonians on different bases: {h_exact.basis_tag!r} vs "
            f"{h_eff.basis_tag!r}"
        )
    psi0 = np.asarray(psi0, dtype=complex)
    exact_states = evolve(h_exact, psi0, grid)
    if frame is not None:
        start = frame.matrix @ psi0
        eff_states = evolve(h_eff, start, grid) @ frame.matrix.conj()
        # right-multiplying row-states by conj(U) applies U† to each column state
    else:
        eff_states = evolve(h_eff, psi0, grid)
    overlaps = np.abs(np.sum(exact_states.conj() * eff_states, axis=1)) ** 2
    if np.any(overlaps > 1.0 + FIDELITY_SLACK):
        raise AssertionError(f"fidelity exceeded 1: max = {overlaps.max()}")
    fid = np.minimum(overlaps, 1.0)
    return FidelityReport(grid.times.copy(), fid, float(fid.min()))


@dataclass(frozen=True)
class ObservableSeries:
    """Photon number, level populations and the 1↔N inversion over time."""

    photon: np.ndarray
    populations: np.ndarray
    inversion_1n: np.ndarray


def observables(states: np.ndarray, basis: SectorBasis) -> ObservableSeries:
    """Diagonal expectation values per time point; populations sum to A."""
    probs = np.abs(np.asarray(states, dtype=complex)) ** 2
    photon_diag = np.array([st.photon_n for st in basis.states], dtype=float)
    pop_diag = np.array([st.occupations for st in basis.states], dtype=float)
    photon = probs @ photon_diag
    populations = probs @ pop_diag
    inversion = 0.5 * (populations[:, -1] - populations[:, 0])
    return ObservableSeries(photon, populations, inversion)


@dataclass(frozen=True)
class EigenvalueErrors:
    """Per-state spectral errors after max-overlap pairing."""

    pairs: tuple[tuple[int, int], ...]
    errors: np.ndarray
    max_error: float
    rms_error: float
    ambiguous: tuple[tuple[int, int, float], ...]


def effective_support(h: Operator) -> np.ndarray:
    """Indices of states the operator actually touches (nonzero row)."""
    mat = h.matrix
    return np.where(np.any(np.abs(mat) > 0.0, axis=1))[0]


def eigenvalue_compare(
    h_exact: Operator,
    h_eff: Operator,
    support: Sequence[int] | None = None,
) -> EigenvalueErrors:
    """Pair effective eigenstates with exact ones by largest overlap and
    report the absolute eigenvalue errors.

    ``support`` restricts the comparison to a subspace (for effective
    operators embedded with zero rows on projected-out states).  Pairings
    whose best overlap is below 0.5 are reported as ambiguous.
    """
    if h_exact.basis_tag != h_eff.basis_tag:
        raise ValueError("operators live on different bases")
    exact = hermitian_eig(h_exact)
    eff = hermitian_eig(h_eff)
    dim = h_exact.dim
    if support is None:
        keep = np.arange(dim)
    else:
        keep = np.asarray(sorted(support), dtype=int)
    # effective eigenvectors restricted to the support subspace
    proj = np.zeros(dim, dtype=bool)
    proj[keep] = True
    weights = np.sum(np.abs(eff.eigenvectors[proj, :]) ** 2, axis=0)
    eff_indices = [k for k in np.argsort(-weights)[: len(keep)]]
    overlap = np.abs(exact.eigenvectors.conj().T @ eff.eigenvectors) ** 2

    candidates = sorted(
        ((overlap[ex, ef], ex, ef) for ef in eff_indices for ex in range(dim)),
        reverse=True,
    )
    paired_ex: set[int] = set()
    paired_ef: set[int] = set()
    pairs: list[tuple[int, int]] = []
    ambiguous: list[tuple[int, int, float]] = []
    for ov, ex, ef in candidates:
        if ex in paired_ex or ef in paired_ef:
            continue
        paired_ex.add(ex)
        paired_ef.add(ef)
        pairs.append((ef, ex))
        if ov < 0.5:
            ambiguous.append((ef, ex, float(ov)))
        if len(pairs) == len(eff_indices):
            break
    errors = np.array(
        [abs(eff.eigenvalues[ef] - exact.eigenvalues[ex]) for ef, ex in pairs]
    )
    return EigenvalueErrors(
        pairs=tuple(pairs),
        errors=errors,
        max_error=float(errors.max()) if len(errors) else 0.0,
        rms_error=float(np.sqrt(np.mean(errors**2))) if len(errors) else 0.0,
        ambiguous=tuple(ambiguous),
    )


@dataclass(frozen=True)
class ScalingStudy:
    """Error against a small parameter, with the fitted log–log slope."""

    epsilons: np.ndarray
    errors: np.ndarray
    fitted_exponent: float
    fit_residual_rms: float


def scaling_study(
    epsilons: Sequence[float], error_metric: Callable[[float], float]
) -> ScalingStudy:
    """Evaluate an error metric over a family of small parameters and fit
    error ∝ ε^slope by unweighted least squares on the log–log points."""
    eps = np.asarray(sorted(epsilons, reverse=True), dtype=float)
    if len(eps) < 3:
        raise ValueError(f"need at least 3 epsilon values, got {len(eps)}")
    if np.any(eps <= 0) or len(set(eps)) != len(eps):
        raise ValueError("epsilon values must be positive and distinct")
    errors = np.array([float(error_metric(e)) for e in eps])
    if np.any(errors <= 0):
        raise ValueError("error metric must return positive values")
    slope, intercept = np.polyfit(np.log(eps), np.log(errors), 1)
    fitted = slope * np.log(eps) + intercept
    rms = float(np.sqrt(np.mean((np.log(errors) - fitted) ** 2)))
    return ScalingStudy(eps, errors, float(slope), rms)
