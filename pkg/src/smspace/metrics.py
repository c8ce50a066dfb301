"""Geometry evaluation of a learned motor representation.

The learned 3D representation is compared with the ground-truth 2D sensor
positions it is supposed to mirror. Positions are first embedded into
representation space with a least-squares linear map, then the two point
sets are compared with the dissimilarity

    D_alpha = 2 / (N^2 - N) * sum_{i<j} |d(h_i, h_j) - d(q_i, q_j)|
              * exp(-alpha * d(q_i, q_j)),

where d normalizes each set's pairwise Euclidean distances by that set's
own maximum and q = A p are the aligned positions. D_0 probes the global
metric agreement; D_10 down-weights distant pairs and probes local
(topological) agreement, so D_alpha is non-increasing in alpha.

:func:`dissimilarity` is the vectorized production route;
:func:`dissimilarity_naive` is the O(N^2) double-loop oracle kept for
verification. Sums use numpy's pairwise summation, so results are
reproducible to well below 1e-12.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .errors import DegenerateInputError, DomainError
from .kinematics import ArmGeometry, DEFAULT_GEOMETRY, MOTOR_DIM, forward
from .neuralnet import Mlp, encode

GRID_POINTS_PER_DIM = 10
DEFAULT_ALPHAS = (0.0, 10.0)


@dataclass
class RepresentationSample:
    """Paired representations ``hs`` (n, 3) and positions ``ps`` (n, 2)."""

    hs: np.ndarray
    ps: np.ndarray
    grid_spec: str

    def __len__(self) -> int:
        return len(self.hs)


@dataclass
class AlignmentMap:
    """Least-squares map A (3, 2) embedding positions into representation space."""

    matrix: np.ndarray
    residual: float


@dataclass
class DissimilarityReport:
    alpha: float
    value: float
    n: int
    mode: str = ""
    seed: int = -1


def motor_grid() -> np.ndarray:
    """Regular evaluation grid over the active motor dimensions.

    Ten values per dimension at the centers of equal subintervals of
    [-1, 1] (-0.9, -0.7, ..., 0.9), the distractor pinned to 0. Points
    iterate in row-major order (m1 slowest, m3 fastest), n = 1000.
    """
    c = -0.9 + 0.2 * np.arange(GRID_POINTS_PER_DIM)
    g1, g2, g3 = np.meshgrid(c, c, c, indexing="ij")
    grid = np.zeros((c.size ** 3, MOTOR_DIM))
    grid[:, 0] = g1.ravel()
    grid[:, 1] = g2.ravel()
    grid[:, 2] = g3.ravel()
    return grid


def sample_grid(net1, geom: ArmGeometry = DEFAULT_GEOMETRY) -> RepresentationSample:
    """Evaluate the encoder and the true forward model on the motor grid.

    ``net1`` may be an :class:`Mlp` or any callable mapping (n, 4) motor
    arrays to (n, k) representations (used by the exact-encoder sanity
    checks).
    """
    grid = motor_grid()
    hs = encode(net1, grid) if isinstance(net1, Mlp) else np.asarray(net1(grid), dtype=np.float64)
    if hs.ndim != 2 or len(hs) != len(grid):
        raise DomainError(f"encoder output shape {hs.shape} does not pair with {len(grid)} grid points")
    ps = forward(grid, geom)
    return RepresentationSample(hs=hs, ps=ps, grid_spec=f"{GRID_POINTS_PER_DIM}^3 centers, m4=0")


def align(sample: RepresentationSample) -> AlignmentMap:
    """Ordinary least squares of representations on positions.

    Fits h ~ A p + b via SVD-based lstsq (LAPACK gelsd) on the design
    matrix [p | 1]; the intercept is discarded since only pairwise
    distances matter downstream. Raises DegenerateInputError when the
    positions do not span the plane (collinear or duplicated points).
    """
    hs = np.asarray(sample.hs, dtype=np.float64)
    ps = np.asarray(sample.ps, dtype=np.float64)
    n = len(ps)
    if n < 4:
        raise DegenerateInputError(f"need at least 4 samples to align, got {n}")
    design = np.hstack([ps, np.ones((n, 1))])
    coef, _, rank, _ = np.linalg.lstsq(design, hs, rcond=None)
    if rank < 3:
        raise DegenerateInputError(f"position matrix is rank deficient (rank {rank} of 3)")
    fitted = design @ coef
    residual = float(np.mean((hs - fitted) ** 2))
    return AlignmentMap(matrix=coef[:2, :].T.copy(), residual=residual)


def _normalized_pdist(points: np.ndarray, what: str) -> np.ndarray:
    d = pdist(np.asarray(points, dtype=np.float64))
    dmax = d.max(initial=0.0)
    if dmax <= 0.0:
        raise DegenerateInputError(f"{what} has zero spread; normalized distances are undefined")
    return d / dmax


def dissimilarity(hs, qs, alpha: float) -> float:
    """Weighted mean absolute difference of normalized pairwise distances.

    ``hs`` are representations, ``qs`` the aligned positions; the
    exponential weight uses the normalized position distances.
    """
    hs = np.asarray(hs, dtype=np.float64)
    qs = np.asarray(qs, dtype=np.float64)
    if len(hs) != len(qs):
        raise DomainError(f"point sets differ in length: {len(hs)} vs {len(qs)}")
    if len(hs) < 2:
        raise DomainError(f"need at least two points, got {len(hs)}")
    if alpha < 0:
        raise DomainError(f"alpha must be non-negative, got {alpha}")
    dh = _normalized_pdist(hs, "representation set")
    dq = _normalized_pdist(qs, "position set")
    n = len(hs)
    return float(2.0 / (n * n - n) * np.sum(np.abs(dh - dq) * np.exp(-alpha * dq)))


def dissimilarity_naive(hs, qs, alpha: float) -> float:
    """Literal double-summation reference for :func:`dissimilarity`."""
    hs = np.asarray(hs, dtype=np.float64)
    qs = np.asarray(qs, dtype=np.float64)
    n = len(hs)
    if n != len(qs) or n < 2:
        raise DomainError("point sets must pair up with at least two points")
    max_h = 0.0
    max_q = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            max_h = max(max_h, float(np.linalg.norm(hs[i] - hs[j])))
            max_q = max(max_q, float(np.linalg.norm(qs[i] - qs[j])))
    if max_h <= 0.0 or max_q <= 0.0:
        raise DegenerateInputError("a point set has zero spread")
    total = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            dh = float(np.linalg.norm(hs[i] - hs[j])) / max_h
            dq = float(np.linalg.norm(qs[i] - qs[j])) / max_q
            total += abs(dh - dq) * np.exp(-alpha * dq)
    return 2.0 / (n * n - n) * total


def evaluate(net1, alphas=DEFAULT_ALPHAS, geom: ArmGeometry = DEFAULT_GEOMETRY,
             mode: str = "", seed: int = -1) -> list[DissimilarityReport]:
    """Full evaluation: grid sample, alignment, one report per alpha."""
    sample = sample_grid(net1, geom)
    amap = align(sample)
    qs = sample.ps @ amap.matrix.T
    return [
        DissimilarityReport(
            alpha=float(a),
            value=dissimilarity(sample.hs, qs, float(a)),
            n=len(sample),
            mode=mode,
            seed=seed,
        )
        for a in alphas
    ]


def write_report_csv(reports, path) -> None:
    """Report rows as ``mode,seed,alpha,D,N``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mode", "seed", "alpha", "D", "N"])
        for r in reports:
            writer.writerow([r.mode, r.seed, f"{r.alpha:g}", f"{r.value:.17g}", r.n])
