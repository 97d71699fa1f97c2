"""thermolens: how thermal are blocks of a thermal quantum Ising chain?

Reduced states of spin blocks are compared with Gibbs states of the block
Hamiltonian, at the global temperature or at an optimized local one.
Pair states of the infinite chain come from exact free-fermion
correlators; larger blocks come from purified matrix product states.
"""
__version__ = "0.1.0"

from .errors import (
    CapacityError,
    DimensionError,
    NotHermitianError,
    NotPSDError,
    QuadratureError,
    ThermolensError,
)
from .qstate import fidelity, partial_trace, pauli_expectation, trace_distance
from .hamiltonians import (
    SpinChain,
    build_dense,
    classical_block_marginal,
    gibbs_dense,
    local_block_hamiltonian,
)
from .exact_ising import build_pair_rdm, correlator_table
from .mps_thermal import block_rdm, thermal_state
from .thermometry import (
    ExactBackend,
    MPSBackend,
    distant_pair_fidelity,
    fidelity_derivative_h,
    intensive_fidelity,
    local_beta_derivative_h,
    neighbor_fidelity,
    optimize_local_beta,
)
