"""Iterative small-rotation engine.

Split a Hamiltonian into a diagonal reference h₀ plus a perturbation V,
solve the generator equation [T, h₀] = −V entry by entry for the
off-resonant part (T_mn = V_mn / (h₀_m − h₀_n)), conjugate exactly by
exp(T), and repeat.  Entries whose reference energies coincide form resonant
blocks that no rotation can remove: they survive as the effective couplings.
Because every step is an exact unitary conjugation, the spectrum is
preserved to solver accuracy no matter how many steps run.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from effham.operators import (
    Operator,
    conjugate,
    degenerate_blocks,
    expm_antihermitian,
    hermiticity_defect,
    offdiag_norm,
)

DEFAULT_RESONANCE_REL_TOL = 1e-6
DIVERGENCE_GROWTH = 1.10


class ConvergenceError(RuntimeError):
    """The off-resonant residual grew between steps (perturbation not small)."""


@dataclass(frozen=True)
class SplitHamiltonian:
    """H = h₀ + V with h₀ diagonal (real entries) in the working basis."""

    h0: Operator
    v: Operator
    resonance_tol: float

    @property
    def reference_energies(self) -> np.ndarray:
        return self.h0.matrix.diagonal().real


def resolve_resonance_tol(h0_diag: np.ndarray, resonance_tol: float | None) -> float:
    """Default tolerance: 1e−6 × max|h₀|, overridable by the caller."""
    if resonance_tol is not None:
        return float(resonance_tol)
    scale = float(np.max(np.abs(h0_diag))) if len(h0_diag) else 0.0
    return DEFAULT_RESONANCE_REL_TOL * max(scale, 1.0)


def split(
    h: Operator, diagonal_reference: Operator, resonance_tol: float | None = None
) -> SplitHamiltonian:
    """Split H into the given diagonal reference and the remainder."""
    ref = diagonal_reference.matrix
    off = ref - np.diag(ref.diagonal())
    scale = max(float(np.linalg.norm(ref)), 1.0)
    if np.linalg.norm(off) > 1e-14 * scale:
        raise ValueError("diagonal reference has off-diagonal entries")
    if np.max(np.abs(ref.diagonal().imag)) > 1e-12 * scale:
        raise ValueError("diagonal reference has complex entries")
    v = h - diagonal_reference
    return SplitHamiltonian(
        diagonal_reference, v, resolve_resonance_tol(ref.diagonal().real, resonance_tol)
    )


@dataclass(frozen=True)
class GeneratorStep:
    """One anti-Hermitian generator plus bookkeeping of what it removed."""

    t: Operator
    order_label: int
    eliminated_norm: float
    resonant_pairs: tuple[tuple[int, int], ...]


def solve_generator(
    sh: SplitHamiltonian,
    order_label: int = 1,
    pinned_blocks: list[tuple[int, ...]] | None = None,
) -> GeneratorStep:
    """T_mn = V_mn/(h₀_m − h₀_n) off resonance, zero on resonant pairs.

    Pairs inside ``pinned_blocks`` are always skipped.  A skipped pair that
    was *not* pinned (an accidental near-degeneracy) triggers a warning
    naming the small denominator.
    """
    vmat = sh.v.matrix
    if hermiticity_defect(vmat) > 1e-10 * max(np.linalg.norm(vmat), 1e-4):
        raise ValueError("perturbation V must be Hermitian")
    energies = sh.reference_energies
    n = len(energies)
    pinned = np.zeros((n, n), dtype=bool)
    if pinned_blocks is not None:
        for block in pinned_blocks:
            idx = np.asarray(block, dtype=int)
            pinned[np.ix_(idx, idx)] = True
    t = np.zeros_like(vmat)
    skipped: list[tuple[int, int]] = []
    vscale = max(float(np.linalg.norm(vmat)), 1e-30)
    eliminated = 0.0
    for m in range(n):
        for k in range(m + 1, n):
            gap = energies[m] - energies[k]
            if abs(gap) <= sh.resonance_tol or pinned[m, k]:
                if abs(vmat[m, k]) > 1e-14 * vscale:
                    skipped.append((m, k))
                    if not pinned[m, k]:
                        warnings.warn(
                            f"near-degenerate pair ({m}, {k}) outside declared "
                            f"resonant blocks: denominator {gap:.3e}",
                            stacklevel=2,
                        )
                continue
            t[m, k] = vmat[m, k] / gap
            t[k, m] = vmat[k, m] / (-gap)
            eliminated += 2.0 * abs(vmat[m, k]) ** 2
    return GeneratorStep(
        t=Operator(t, sh.v.basis_tag, sh.v.domain_tag),
        order_label=order_label,
        eliminated_norm=float(np.sqrt(eliminated)),
        resonant_pairs=tuple(skipped),
    )


def step(h: Operator, gs: GeneratorStep) -> Operator:
    """exp(T) H exp(−T) by exact matrix exponential and conjugation."""
    return conjugate(expm_antihermitian(gs.t), h)


@dataclass(frozen=True)
class TransformReport:
    """Outcome of the iterated rotation pipeline."""

    steps: tuple[GeneratorStep, ...]
    final_h: Operator
    residual_offdiag: float
    resonant_blocks: tuple[tuple[int, ...], ...]
    converged: bool


def iterate(
    h: Operator,
    diagonal_reference: Operator,
    resonance_tol: float | None = None,
    max_steps: int = 40,
    target_residual: float | None = None,
) -> TransformReport:
    """Rotate away off-resonant couplings until the residual meets target.

    Resonant blocks are pinned once, from the *initial* reference energies:
    later diagonal drift (Stark shifts) must not unpin a physical resonance.
    Denominators always come from the current diagonal, which is the more
    accurate split once corrections accumulate.  Divergence (residual growth
    beyond 10%) aborts with the worst offending ratio named.
    """
    if max_steps < 1:
        raise ValueError(f"max_steps must be at least 1, got {max_steps}")
    sh0 = split(h, diagonal_reference, resonance_tol)
    blocks = degenerate_blocks(sh0.reference_energies, sh0.resonance_tol)
    multi = tuple(b for b in blocks if len(b) > 1)
    target = (
        target_residual
        if target_residual is not None
        else 1e-12 * max(float(np.linalg.norm(h.matrix)), 1.0)
    )

    current = h
    steps: list[GeneratorStep] = []
    residual = offdiag_norm(current, blocks)
    converged = residual <= target
    for k in range(1, max_steps + 1):
        if converged:
            break
        diag = Operator(
            np.diag(current.matrix.diagonal().real).astype(complex),
            current.basis_tag,
            current.domain_tag,
        )
        sh = split(current, diag, sh0.resonance_tol)
        gs = solve_generator(sh, order_label=k, pinned_blocks=list(blocks))
        candidate = step(current, gs)
        new_residual = offdiag_norm(candidate, blocks)
        if new_residual > DIVERGENCE_GROWTH * residual and new_residual > target:
            worst = _largest_ratio(sh)
            raise ConvergenceError(
                f"off-resonant residual grew from {residual:.3e} to "
                f"{new_residual:.3e} at step {k}; largest |V/Δh₀| = {worst:.3e} "
                "(perturbation is not small)"
            )
        steps.append(gs)
        current = candidate
        residual = new_residual
        converged = residual <= target
    return TransformReport(
        steps=tuple(steps),
        final_h=current,
        residual_offdiag=residual,
        resonant_blocks=multi,
        converged=converged,
    )


def _largest_ratio(sh: SplitHamiltonian) -> float:
    energies = sh.reference_energies
    vmat = sh.v.matrix
    worst = 0.0
    for m in range(len(energies)):
        for k in range(len(energies)):
            if m == k:
                continue
            gap = energies[m] - energies[k]
            if abs(gap) > sh.resonance_tol:
                worst = max(worst, abs(vmat[m, k]) / abs(gap))
    return worst
