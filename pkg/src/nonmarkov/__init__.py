"""Non-Markovianity of qubit amplitude damping through the entanglement of
formation / accessible information duality."""

from .dynamics import BathSpec, gamma_of_t, intermediate_map, p_of_t
from .info import accessible_info_bruteforce, accessible_info_kw, concurrence, eof, von_neumann_entropy
from .linalg import DensityOperator, PureState, hermitian_eig, partial_trace, tensor
from .measure import InitialStateSpec, measure_from_series, purify, trajectory

__version__ = "0.1.0"
