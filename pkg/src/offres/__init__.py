"""Cancelling off-resonant leakage in driven multilevel qubits."""

from .algebra import (AlternatingSchedule, ClosureResult, alternating_search, constraint_count,
                      lie_closure)
from .errors import (BadDimension, BlockNotUnitary, CouplingUnsupported, DegenerateDenominator,
                     DimensionOverflow, NoConvergence, NoValidT0, OffresError, OrderUnsupported,
                     SearchFailed, UnitarityLost)
from .model import (IndexMap, LevelSystem, Pulse, PulseSequence, TwoQubitMapping, TwoQubitSpec,
                    ValidationReport, embed_bipartite_index_map, map_two_qubits, select_t0,
                    validate_system)
from .propagate import (IntegratorConfig, LeakageReport, PropagatorMatrix, StateVector, dyson_term,
                        evolve, evolve_sequence, interaction_hamiltonian, leakage_of, oracle_evolve)
from .synth import (CONVENTION_FACTOR, CorrectiveCoefficientSeries, EffectiveMapReport,
                    SynthesisResult, corrective_first_order, effective_two_level_map,
                    first_order_leakage, refine, synthesize_sequence)

__version__ = "0.1.0"
