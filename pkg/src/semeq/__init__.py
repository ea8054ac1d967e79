"""Frame-based semantic channel equalization and a queue-driven resource allocator."""
from .frames import AnalysisOperator, FrameBounds, FrameError, frame_bounds, whiten_to_parseval
from .equalize import EqualizerPair, build_equalizer, build_fe, build_pfe, build_upe, quantize
from .world import AccuracyTable, LatentWorld, generate_world
from .lyapunov import QueueState, update_queues
from .allocator import AllocatorParams, exhaustive_select, greedy_select
from .sim import ScenarioConfig, run_simulation, sweep

__version__ = "0.1.0"
