"""Forward kinematics of the simulated arm.

The body is a 3-segment planar arm rotating in a horizontal plane above the
floor. Motor states are 4-vectors in [-1, 1]^4: the first three components
command the joints (angle = angle_gain * value, applied cumulatively so each
joint is relative to the previous segment), the fourth is a distractor wired
to nothing. The sensor (camera) sits on the end effector; its egocentric
position is the 2D point returned by :func:`forward`.

Motor states and positions are plain numpy arrays, shape ``(4,)`` / ``(2,)``,
or batched ``(n, 4)`` / ``(n, 2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

MOTOR_DIM = 4
ACTIVE_JOINTS = 3


@dataclass(frozen=True)
class ArmGeometry:
    """Segment lengths (length units) and the motor-to-angle gain (rad per unit)."""

    lengths: tuple[float, float, float] = (0.5, 0.5, 0.5)
    angle_gain: float = math.pi

    def __post_init__(self):
        if len(self.lengths) != ACTIVE_JOINTS or any(l <= 0 for l in self.lengths):
            raise DomainError(f"segment lengths must be {ACTIVE_JOINTS} positive values, got {self.lengths}")
        if self.angle_gain <= 0:
            raise DomainError(f"angle gain must be positive, got {self.angle_gain}")

    @property
    def reach(self) -> float:
        return float(sum(self.lengths))


DEFAULT_GEOMETRY = ArmGeometry()


def as_motor(m) -> np.ndarray:
    """Validate and convert a motor state (or batch) to a float64 array.

    Raises DomainError if the shape is not (..., 4) or any component leaves [-1, 1].
    """
    arr = np.asarray(m, dtype=np.float64)
    if arr.shape[-1] != MOTOR_DIM:
        raise DomainError(f"motor state must have {MOTOR_DIM} components, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("motor state contains non-finite components")
    if np.any(np.abs(arr) > 1.0):
        raise DomainError(f"motor components must lie in [-1, 1], got min={arr.min()} max={arr.max()}")
    return arr


def forward(m, geom: ArmGeometry = DEFAULT_GEOMETRY) -> np.ndarray:
    """Map motor state(s) to the egocentric sensor position(s).

    The cumulative joint angles are a_k = gain * (m_1 + ... + m_k) for
    k = 1..3 and the position is sum_k l_k * (cos a_k, sin a_k). The
    distractor component m_4 is ignored.
    """
    arr = as_motor(m)
    angles = geom.angle_gain * np.cumsum(arr[..., :ACTIVE_JOINTS], axis=-1)
    lengths = np.asarray(geom.lengths, dtype=np.float64)
    x = np.sum(lengths * np.cos(angles), axis=-1)
    y = np.sum(lengths * np.sin(angles), axis=-1)
    return np.stack([x, y], axis=-1)


def displacement(m_a, m_b, geom: ArmGeometry = DEFAULT_GEOMETRY) -> np.ndarray:
    """Planar displacement forward(m_b) - forward(m_a)."""
    return forward(m_b, geom) - forward(m_a, geom)
