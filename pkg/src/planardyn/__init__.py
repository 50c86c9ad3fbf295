"""planardyn: numerical dynamics of planar maps near homoclinic tangencies.

Map families live in :mod:`planardyn.maps`, single-round periodic solutions
in :mod:`planardyn.orbits`, manifold and tangency machinery in
:mod:`planardyn.manifolds`, basin rasters and critical curves in
:mod:`planardyn.basins`, bifurcation sequences and scaling laws in
:mod:`planardyn.unfolding`, and saddle normal forms in
:mod:`planardyn.normalform`.
"""

from .maps import (GrhtMap, HenonMap, QuadFixtureMap, PreimageSet,
                   blend_weight, neutral_saddle_alpha, params_to_text,
                   params_from_text)
from .orbits import (StabilityClass, SrSolution, classify, monodromy,
                     discriminant, tau_delta_limits, psi_pair,
                     sr_closed_form, sr_newton, u1_fixed_points,
                     grht_invariant_check)
from .manifolds import (SaddleFrame, ManifoldBranch, saddle_frame,
                        grow_unstable, grow_stable,
                        homoclinic_intersections, tangency_bisection,
                        estimate_d1, find_fixed_point)
from .basins import (BasinGrid, ImplicitCurve, compute_basin, detect_period,
                     trace_implicit, curve_image, cusp_locate,
                     classify_regions, DIVERGED, UNRESOLVED)
from .normalform import (ResonanceReport, QuadraticCoeffs, OrderNTermTable,
                         PolyChange, detect_resonances, eliminate_quadratic,
                         eliminate_order_n, verify_conjugacy,
                         t0k_expansion_residual)
from .unfolding import (Delta0Params, delta0, UnfoldingRay, BifurcationKind,
                        BifurcationEvent, ScalingModel, ScalingFit,
                        analytic_sn_pd_mu1, scan_ray, stability_window,
                        scaling_fit, overlap_count)
from .presets import get_preset, preset_names

__version__ = "0.1.0"
