"""Numerical laboratory for front propagation in nonlocal dispersal
equations: u_t = J*u - u + f(t,x,u)."""

from .fields import FieldState
from .kernels import Kernel, convolve, convolve_derivative, validate_h1
from .reactions import Heterogeneous, Homogeneous, Modulation
from .evolution import Trajectory, check_comparison, evolve, make_initial, step
from .fronts import (FrontTrace, check_bounded_width, extract_trace,
                     fit_propagation_bounds, interface_locations,
                     interface_width)
from .waves import WaveProfile, kpp_speed, solve_wave, solve_wave_kpp, \
    wave_residual
from .envelope import (EnvelopeParams, SmoothInterface,
                       continuous_modification, smooth_modification,
                       verify_envelope)
from .regularity import (DifferenceField, RegularityContext, compute_regions,
                         difference_fields, exact_decay_check, gamma_ratio,
                         harnack_check, lower_bound_left, ux_integral,
                         ux_profile)
from .ignition_bounds import (SqueezeParams, build_cutoff, build_squeeze,
                              select_parameters, verify_squeeze,
                              verify_subsolution, verify_supersolution)

__version__ = "0.1.0"
