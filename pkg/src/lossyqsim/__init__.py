"""State-vector quantum circuit simulation with error-bounded lossy slice compression."""

from .circuits import Circuit, Gate, build_grover, build_qft, gate_count, parse_circuit, render
from .codec import CodecConfig, compress_plane, decompress_plane
from .engine import EngineConfig, RunMetrics, gather_state, measure_overhead, run
from .reference import DenseState, ref_run, success_probability
from .statevec import StateVector, fidelity, global_sq_norm, init_basis_state, inner_product

__version__ = "0.1.0"
