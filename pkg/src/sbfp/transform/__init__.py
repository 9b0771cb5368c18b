from .functional import (Moments, TransformContext, phi_nu, phi_transform,
                         restricted_moments)
from .lst import (GammaKind, LstParams, PsiComponents, d_du_psi_rational, delta0_lst,
                  delta_lst, gamma_fn, psi_components, psi_rational, psi_transform)
from .numeric import lc_inverse_adaptive, lc_inverse_numeric
from .rational import ExpPoly, RationalFn, lc_inverse_expsum, lc_inverse_rational
