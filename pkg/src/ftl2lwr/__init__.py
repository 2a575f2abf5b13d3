"""Follow-the-Leader traffic, its continuum density and the LWR entropy solution."""
from .discretizer import InitialDensity, InitialLayout, initial_positions, normalize
from .ftl_sim import FtlState, Trajectory, check_lemma1, rhs, simulate, step
from .lwr_ref import godunov_flux, godunov_solve, riemann_exact
from .reconstruct import (BumpTestFunction, StepFunction, density_field, kruzkov_residual,
                          l1_distance, total_variation, velocity_field)
from .velocity import VelocityModel, flux, get_model, greenshields, quadratic, v_of_rho, V_of_y

__version__ = "0.1.0"
