"""Analytical barrier of the pursuit-evasion game of two identical cars."""
from .barrier import BarrierModel, Family, PieceId, build_model, eval_piece, sample_slice
from .kinematics import ControlPair, Costate, State

__all__ = [
    "BarrierModel", "ControlPair", "Costate", "Family", "PieceId", "State",
    "build_model", "eval_piece", "sample_slice",
]
