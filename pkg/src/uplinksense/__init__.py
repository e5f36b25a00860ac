"""Multiuser uplink OFDMA sensing with cross-user delay-structure sharing.

Pipeline: synthesize asynchronous multi-user CSI -> calibrate per-packet
timing offsets off the known LoS delay -> recover sparse delay supports
jointly across users (cluster-coupled SBL) or per user (baseline) ->
refine delays and estimate Doppler/AoA/gains -> score against truth.
"""

from .config import SparsityConfig, SystemConfig, validate_configs

__version__ = "0.1.0"

__all__ = ["SystemConfig", "SparsityConfig", "validate_configs", "__version__"]
