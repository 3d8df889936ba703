"""Finite lowest-weight modules of polynomially deformed su(2) ladders.

The algebra keeps [X₃, X±] = ±X± but replaces [X₊, X₋] by a polynomial
P(X₃).  Everything is encoded by the structural function Φ with
X₊X₋ = Φ(X₃): ladder amplitudes are √Φ and P = Φ(X₃) − Φ(X₃+1).  For a
Hamiltonian Δ·X₃ + g(X₊+X₋) with small ε = g/Δ, a single small rotation
exp(ε(X₊−X₋)) pushes the coupling into a diagonal correction plus terms that
shrink order by order in ε; the truncated series through ε³ is available in
closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from effham.operators import (
    Operator,
    commutator,
    expm_antihermitian,
    frobenius_norm,
)


@dataclass(frozen=True)
class StructuralPolynomial:
    """Polynomial Φ in the X₃ eigenvalue, with optional named parameters.

    ``coefficients`` are ascending powers.  ``parameters`` records the
    conserved quantities that entered the coefficients (bookkeeping only).
    """

    coefficients: tuple[float, ...]
    parameters: dict[str, float] = field(default_factory=dict)

    def __call__(self, m: float) -> float:
        value = 0.0
        for coeff in reversed(self.coefficients):
            value = value * m + coeff
        return value

    def forward_difference(self, m: float, order: int = 1) -> float:
        """∇^k Φ(m) with the forward convention ∇f(m) = f(m+1) − f(m)."""
        if order == 0:
            return self(m)
        return self.forward_difference(m + 1, order - 1) - self.forward_difference(
            m, order - 1
        )


def spin_structural(j: float) -> StructuralPolynomial:
    """Ordinary su(2) spin-j: Φ(m) = (j+m)(j−m+1), vanishing at both ends."""
    return StructuralPolynomial((j * j + j, 1.0, -1.0), {"j": float(j)})


def boson_structural() -> StructuralPolynomial:
    """Heisenberg limit: Φ(m) = m, so [X₊, X₋] = −1."""
    return StructuralPolynomial((0.0, 1.0))


def cubic_structural(dim: int, shift: float = 1.0) -> StructuralPolynomial:
    """Cubic deformation Φ(m) = m(dim−m)(m+shift) on a module at m₀ = 0.

    Positive on 0 < m < dim for shift > 0 and zero at both ends, so the
    dim-dimensional module represents the algebra exactly.
    """
    # m(dim−m)(m+shift) = dim·shift·m + dim·m² − shift·m² − m³... expanded:
    c1 = dim * shift
    c2 = dim - shift
    c3 = -1.0
    return StructuralPolynomial((0.0, float(c1), float(c2), c3), {"dim": float(dim)})


@dataclass(frozen=True)
class DeformedModule:
    """Lowest-weight ladder: X₃ = diag(m₀..m₀+dim−1), X₋|m₀⟩ = 0."""

    m0: float
    dim: int
    phi: StructuralPolynomial
    x3: Operator
    xp: Operator
    xm: Operator

    @property
    def weights(self) -> np.ndarray:
        return self.m0 + np.arange(self.dim, dtype=float)

    @property
    def tag(self) -> str:
        return self.x3.basis_tag

    def phi_values(self, offset: int = 0) -> np.ndarray:
        return np.array([self.phi(m + offset) for m in self.weights])

    def ladder_polynomial(self) -> np.ndarray:
        """Diagonal of P(X₃) = Φ(X₃) − Φ(X₃+1)."""
        return self.phi_values() - self.phi_values(1)

    def diag(self, values: np.ndarray) -> Operator:
        return Operator(np.diag(np.asarray(values, dtype=complex)), self.tag)


def build_module(phi: StructuralPolynomial, m0: float, dim: int) -> DeformedModule:
    """Construct the module matrices from Φ.

    Requires Φ(m₀) = 0 (lowest weight annihilated) and Φ > 0 strictly above
    it, up to the top rung.  The top of the ladder is truncated: the
    commutator defect this creates sits in the (top, top) corner and equals
    Φ(m₀ + dim); see :func:`verify_algebra`.
    """
    if dim < 1:
        raise ValueError(f"module dimension must be positive, got {dim}")
    interior = [phi(m0 + k) for k in range(1, dim)]
    scale = max(1.0, max((abs(v) for v in interior), default=0.0), abs(phi(m0)))
    if abs(phi(m0)) > 1e-12 * scale:
        raise ValueError(
            f"Φ(m₀) = {phi(m0):.3e} must vanish at the lowest weight m₀ = {m0}"
        )
    for k, value in enumerate(interior, start=1):
        if value <= 0:
            raise ValueError(
                f"Φ({m0 + k}) = {value:.3e} is not positive inside the module"
            )
    tag = (
        f"dsu2[m0={m0}, dim={dim}, phi={tuple(round(c, 12) for c in phi.coefficients)}]"
    )
    x3 = np.diag(m0 + np.arange(dim, dtype=float)).astype(complex)
    xm = np.zeros((dim, dim), dtype=complex)
    for k in range(1, dim):
        xm[k - 1, k] = math.sqrt(interior[k - 1])
    xp = xm.conj().T
    return DeformedModule(
        float(m0),
        dim,
        phi,
        Operator(x3, tag),
        Operator(xp, tag),
        Operator(xm, tag),
    )


@dataclass(frozen=True)
class AlgebraReport:
    """Frobenius residuals of the defining commutation relations.

    ``ladder_residual`` excludes the top corner, where finite truncation
    forces a defect equal to Φ(m₀+dim); that defect is reported separately
    against its analytic value."""

    raise_residual: float
    lower_residual: float
    ladder_residual: float
    corner_defect: float
    corner_expected: float

    @property
    def max_residual(self) -> float:
        return max(
            self.raise_residual,
            self.lower_residual,
            self.ladder_residual,
            abs(self.corner_defect - self.corner_expected),
        )


def verify_algebra(module: DeformedModule) -> AlgebraReport:
    """Check [X₃, X±] = ±X± and [X₊, X₋] = Φ(X₃) − Φ(X₃+1)."""
    r_raise = frobenius_norm(commutator(module.x3, module.xp) - module.xp)
    r_lower = frobenius_norm(commutator(module.x3, module.xm) + module.xm)
    ladder = commutator(module.xp, module.xm).matrix - np.diag(
        module.ladder_polynomial().astype(complex)
    )
    top = module.dim - 1
    corner = ladder[top, top].real
    ladder[top, top] = 0.0
    return AlgebraReport(
        raise_residual=r_raise,
        lower_residual=r_lower,
        ladder_residual=float(np.linalg.norm(ladder)),
        corner_defect=float(corner),
        corner_expected=float(module.phi(module.m0 + module.dim)),
    )


@dataclass(frozen=True)
class Su2HamiltonianSpec:
    """Δ·X₃ + g(X₊+X₋) on a deformed module, with ε = g/Δ."""

    delta: float
    g: float
    module: DeformedModule

    def __post_init__(self) -> None:
        if not (math.isfinite(self.delta) and math.isfinite(self.g)):
            raise ValueError("delta and g must be finite")
        if self.delta == 0.0:
            raise ValueError("delta must be nonzero (ε = g/Δ would diverge)")

    @property
    def epsilon(self) -> float:
        return self.g / self.delta


def interaction_hamiltonian(spec: Su2HamiltonianSpec) -> Operator:
    """Δ·X₃ + g(X₊ + X₋); Hermitian and tridiagonal."""
    mod = spec.module
    return spec.delta * mod.x3 + spec.g * (mod.xp + mod.xm)


def small_rotation(spec: Su2HamiltonianSpec) -> Operator:
    """U = exp(ε (X₊ − X₋)), the near-identity rotation that removes the
    coupling to leading order."""
    mod = spec.module
    return expm_antihermitian(spec.epsilon * (mod.xp - mod.xm))


def effective_order1(spec: Su2HamiltonianSpec) -> Operator:
    """Diagonal effective Hamiltonian Δ·X₃ + (g²/Δ)(Φ(X₃) − Φ(X₃+1))."""
    mod = spec.module
    diag = spec.delta * mod.weights + (spec.g**2 / spec.delta) * (
        mod.ladder_polynomial()
    )
    return mod.diag(diag)


def effective_series(spec: Su2HamiltonianSpec, order: int) -> Operator:
    """Rotated Hamiltonian truncated at ε^order (order 1, 2 or 3).

    Order 1 is the diagonal result of :func:`effective_order1`; order 2 adds
    the single-rung coupling (2g/3)ε² [X₊∇²Φ + ∇²Φ X₋]; order 3 adds the
    two-rung coupling and the diagonal −(g/4)ε³·2∇[Φ(X₃)∇²Φ(X₃−1)], where ∇
    acts on the whole product as a function of the weight.
    """
    if order not in (1, 2, 3):
        raise ValueError(f"order must be 1, 2 or 3, got {order}")
    mod, eps, g = spec.module, spec.epsilon, spec.g
    m = mod.weights
    phi = mod.phi
    h = spec.delta * np.diag(m).astype(complex)
    h -= np.diag(eps * g * np.array([phi.forward_difference(v, 1) for v in m])).astype(
        complex
    )
    if order >= 2:
        d2 = np.diag([phi.forward_difference(v, 2) for v in m]).astype(complex)
        h += (2.0 * g / 3.0) * eps**2 * (mod.xp.matrix @ d2 + d2 @ mod.xm.matrix)
    if order >= 3:
        d3 = np.diag([phi.forward_difference(v, 3) for v in m]).astype(complex)
        xp2 = mod.xp.matrix @ mod.xp.matrix
        xm2 = mod.xm.matrix @ mod.xm.matrix

        def product(v: float) -> float:
            return phi(v) * phi.forward_difference(v - 1, 2)

        grad = np.array([product(v + 1) - product(v) for v in m])
        h -= (
            (g / 4.0)
            * eps**3
            * (xp2 @ d3 + d3 @ xm2 + 2.0 * np.diag(grad).astype(complex))
        )
    return Operator(h, mod.tag)


def eigenstate_correction(
    spec: Su2HamiltonianSpec, m_index: int, order: int
) -> np.ndarray:
    """Perturbed eigenstate attached to ladder level ``m_index``.

    |Ψ⟩ = |m⟩ − ε(X₊−X₋)|m⟩ (order 1)
        + (ε²/2){(X₊² + X₋²) − [Φ(X₃) + Φ(X₃+1)]}|m⟩ (order 2),
    normalised after truncation.
    """
    mod = spec.module
    if not 0 <= m_index < mod.dim:
        raise IndexError(f"state index {m_index} outside module of dim {mod.dim}")
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    eps = spec.epsilon
    vec = np.zeros(mod.dim, dtype=complex)
    vec[m_index] = 1.0
    t = mod.xp.matrix - mod.xm.matrix
    out = vec - eps * (t @ vec)
    if order >= 2:
        quad = mod.xp.matrix @ mod.xp.matrix + mod.xm.matrix @ mod.xm.matrix
        quad = quad - np.diag(mod.phi_values() + mod.phi_values(1)).astype(complex)
        out = out + 0.5 * eps**2 * (quad @ vec)
    return out / np.linalg.norm(out)
