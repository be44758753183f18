"""fklab: a random-cluster (FK) model laboratory.

Exact enumeration on small graphs, cluster Monte Carlo at desk scale, planar
duality maps, crossing/circuit events, sharp-threshold machinery and critical
points of the square, triangular and hexagonal lattices.
"""

from .configuration import (BCKind, BoundaryCondition, Configuration,
                            ConnectionEvent, cluster_structure, connected,
                            dual_configuration, hamming_to_connection,
                            read_snapshot, write_snapshot)
from .critical import (CriticalSolution, dual_parameter, hexagonal_critical,
                       self_dual_point, star_triangle_check, triangular_critical)
from .events import (AnnulusCircuitEvent, AnnulusSpec, CrossingEvent,
                     DualCrossingEvent, RectSpec, annulus_circuit_event,
                     has_crossing, has_dual_crossing, topmost_crossing, two_point)
from .exact import (ENUMERATION_CAP, ExactResult, Params, check_bc_comparison,
                    check_fkg, edge_influence, event_probability,
                    partition_function, russo_derivative)
from .lattice import (DualMap, Family, Lattice, build_lattice, dual_map,
                      rectangle_vertices, square_box, square_torus, triangular,
                      triangular_torus)
from .sampler import (ChainState, MCEstimate, UpdateSchedule, cluster_update,
                      estimate, estimate_pairs, heatbath_edge_update,
                      potts_from_fk)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
