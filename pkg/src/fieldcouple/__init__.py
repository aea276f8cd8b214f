"""Couplings of stationary Gaussian fields built from their spectral measures."""
from .lattice import CapacityError, LatticeShell, enumerate_shell, is_representable, representable_sequence, shell_count
from .spectral import (GridDensity, SpectralMeasure, arithmetic_measure, covariance_kernel, moment,
                       two_atom_measure, uniform_sphere_discretization)
from .transport import (CouplingCostReport, TransportPlan, exact_plan, partition_plan, perturbation_coupling_sigma,
                        plan_cost, product_plan, smooth_coupling_sigma)
from .discrepancy import UniformSphere, build_partition, rate_table, reference_rate, theorem_r_choice, w2_bound
from .fieldsim import EvaluationGrid, analytic_variance, ball_grid, sample_coupled, sample_field, sample_shared
from .bounds import ck_norm, corollary_bound, empirical_tail, sigma_R, tail_bound

__version__ = "0.1.0"
