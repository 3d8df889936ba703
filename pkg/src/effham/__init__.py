"""Exact sector bases, deformed su(2) ladders and small-rotation effective
Hamiltonians for cascade multilevel atom-field models, validated against an
exact-diagonalisation oracle."""

__version__ = "0.1.0"

from effham.basis import (
    BasisError,
    BasisState,
    FullBasis,
    SectorBasis,
    build_full_basis,
    build_sector,
    excitation_number,
)
from effham.deformed import (
    AlgebraReport,
    DeformedModule,
    StructuralPolynomial,
    Su2HamiltonianSpec,
    boson_structural,
    build_module,
    cubic_structural,
    effective_order1,
    effective_series,
    eigenstate_correction,
    interaction_hamiltonian,
    small_rotation,
    spin_structural,
    verify_algebra,
)
from effham.dynamics import (
    FidelityReport,
    ScalingStudy,
    TimeGrid,
    eigenvalue_compare,
    evolve,
    fidelity_series,
    observables,
    scaling_study,
)
from effham.lietransform import (
    ConvergenceError,
    GeneratorStep,
    SplitHamiltonian,
    TransformReport,
    iterate,
    solve_generator,
    split,
    step,
)
from effham.multilevel import (
    CascadeModelSpec,
    CouplingLadder,
    ResonanceError,
    alpha1,
    alpha2,
    beta,
    build_full_h,
    coupling_ladder,
    detunings,
    effective_three_photon,
    effective_two_photon,
    excitation_operator,
    h0_reference,
    h_diag_first,
    h_nondiag,
    product_state,
    psi_ladder,
    sector_of_product_state,
    t1_generator,
    t2_generators,
)
from effham.operators import (
    BasisMismatchError,
    EigenDecomposition,
    HermiticityError,
    Operator,
    annihilation_op,
    commutator,
    conjugate,
    creation_op,
    degenerate_blocks,
    expm_antihermitian,
    frobenius_norm,
    hermitian_eig,
    offdiag_norm,
    photon_number_op,
    transition_op,
    un_rule_residual,
)
