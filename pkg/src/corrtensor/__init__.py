"""Finite-dimensional C*-correspondences, tensor algebras and Morita transforms of their representations."""
from .algebra import StarAlgebra, commutant, operator_norm, star_algebra_from_generators
from .correspondence import (
    Correspondence,
    CorrespondenceMap,
    EquivalenceBimodule,
    algebra_as_module,
    check_correspondence_axioms,
    check_correspondence_isomorphism,
    check_equivalence_bimodule,
    column_bimodule,
    dual_bimodule,
    internal_tensor,
    scalar_module,
)
from .fock import (
    TensorPolynomial,
    TruncatedFock,
    build_truncated_fock,
    creation_operator,
    fock_norm,
    phi_infty,
    polynomial_to_operator,
    right_shift,
)
from .representation import (
    CovariantPair,
    InducedSpace,
    Representation,
    SigmaDual,
    check_covariant,
    induce_representation,
    induce_space,
    integrated_form,
    sigma_dual,
)
from .morita import (
    MoritaContext,
    StabilizationResult,
    canonical_stabilization,
    morita_transform,
    popescu_form,
    reconstruction_operator,
    verify_functor,
)
from .accontinuity import (
    ACSubspace,
    CPMap,
    ac_subspace,
    cp_map_from_point,
    is_pure_superharmonic,
    is_superharmonic,
    verify_ac_transform,
    verify_cp_induction,
)

__version__ = "0.1.0"
