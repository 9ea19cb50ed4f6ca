"""Exact symbolic algebra of trees, coproducts and renormalisation maps."""
from .coproduct import (
    antipode, character_value, counit, delta, delta_plus, gamma_g, integrate_lin,
)
from .lincomb import LinComb, TensorComb, lc
from .renorm import (
    antipode_identity_sides, check_integration_identity, check_coproduct_identity, check_identity_antipode,
    delta_M, hat_delta_M, hat_M, integration_identity_indices, integration_identity_sides, coproduct_identity_sides,
    renorm_M,
)
from .sector import (
    F_star, H0_plus_generators, generate_model_set, is_positive, negative_sector, p_plus,
    positive_members_F0, sector_F0, sector_F_minus,
)
from .syntax import lincomb_to_ascii, parse, sector_to_json, tensor_to_ascii, to_ascii
from .trees import (
    DEFAULT, ONE, XI, Homogeneity, Structure, Tree, canonicalize, csym, homogeneity,
    hom_value, integ, poly, power, prod, psi, x,
)
