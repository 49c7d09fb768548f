"""Sketched finite element solver for many-query elliptic problems.

Offline, a Laplacian eigenbasis and a leverage-score sampling distribution
are built once per mesh; online, each parameter field is solved in the
reduced space from a small random sample of gradient rows.
"""

__version__ = "0.1.0"

from .assembly import (LoadVector, ParameterField, assemble_load,
                       assemble_stiffness, reduced_load, scaling_vector)
from .bundle_io import load_bundle, save_bundle
from .diagnostics import (BenchmarkResult, ErrorReport, beta_quality,
                          condition_number, epsilon_for, projection_error,
                          reference_solve, report_csv, run_benchmark,
                          sketch_deviation, theorem_bounds)
from .errors import (BundleFormatError, ConfigError, FingerprintMismatchError,
                     MeshFormatError, NumericalError, RankDeficiencyError,
                     SketchFemError, SketchSingularError, ValidationError)
from .fields import (FieldSpec, ball_forcing, discontinuous_field,
                     forcing_field, generate_field, lognormal_field,
                     matern_covariance, uniform_field)
from .mesh import (GradientOperator, Mesh, element_volumes, gradient_operator,
                   load_mesh, mesh_from_arrays, parse_mesh, write_mesh)
from .meshes import (cube_mesh, disk_mesh, graded_cube, jittered_square_mesh,
                     square_mesh)
from .reduction import (OfflineBundle, build_offline_bundle, compute_basis,
                        cross_leverage_matrix, laplacian, leverage_scores,
                        reweighted_leverage, sampling_distribution,
                        validate_bundle)
from .sketch import (AliasSampler, QueryResult, SampleTab, SketchSystem,
                     build_sampling_table, build_sketch, draw_samples,
                     plan_sample_size, query, solve_reduced, tabulate)

__all__ = [name for name in dir() if not name.startswith("_")]
