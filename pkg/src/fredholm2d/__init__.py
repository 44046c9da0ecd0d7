"""Meshless Nystrom solvers for 2D Fredholm equations of the second kind.

Solves ``lam u(x) - int_Omega k(x, y) u(y) dy = f(x)`` on scattered nodes,
either classically (solution on the quadrature nodes) or decoupled
(solution nodes X, quadrature nodes Y, bridged by an MLS reconstruction).

Typical use::

    from fredholm2d import (named_domain, generate_nodes, fitted_rule, build_mls,
                            gaussian, assemble_decoupled, solve_linear, interpolate)

    dom = named_domain("unit_square")
    Y = generate_nodes(dom, 0.05, seed=0)
    X = generate_nodes(dom, 0.1, seed=1)
    rule = fitted_rule(dom, Y, degree=3)
    R = build_mls(X, Y, degree=1)
    sol = solve_linear(assemble_decoupled(1.0, gaussian(0.5), 1.0, rule, R))
    u = interpolate(sol, [[0.5, 0.5]])
"""
from ._backend import NAME as BACKEND
from .errors import *  # noqa: F401,F403
from .geometry import (Difference, Disk, Domain, Intersection, Rectangle, Union, annulus,
                       l_shape, named_domain, square_with_hole, unit_disk, unit_square)
from .kernels import (Kernel, constant, effective_support_radius, gaussian, make_kernel,
                      operator_norm_estimate, oscillatory, poly_decay, separable, zero)
from .nodes import NodeSet, fill_distance, generate_nodes, load_nodes, save_nodes
from .problems import (FredholmProblem, LogisticSource, ManufacturedCase, build_dirichlet,
                       build_neumann, dirichlet_square, logistic_disk, manufacture,
                       manufactured_smooth, neumann_disk, neumann_s, normalize_static)
from .quadrature import (QuadratureRule, apply_rule, compute_moments, fitted_rule,
                         moment_fit_weights, reference_rule, stability_l1)
from .reconstruction import (ReconstructionOperator, apply, build_mls, identity_operator,
                             inf_norm, reconstruction_error)
from .solver import (DiscreteSolution, assemble_classical, assemble_decoupled, condition_inf,
                     interpolate, solve_linear, solve_nonlinear)
from .study import (ConvergenceReport, StudyConfig, cost_comparison, estimate_eoc,
                    report_csv, run_study)

__version__ = "0.1.0"
