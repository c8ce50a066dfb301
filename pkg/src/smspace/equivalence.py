"""Executable checks of the motor equivalence-class structure.

Two families of motor equivalences make sensorimotor prediction solvable:
states reaching the same sensor position produce the same image in any
fixed room, and motor pairs realizing the same planar displacement
produce matching sensory transitions once the room is shifted to make
the first images agree. This module certifies both numerically against
the simulator: class membership is never assumed, it is measured (the
``displacement_error`` carried by every pair), and image agreement is
checked per channel with pixels on disk boundaries excluded, since
point-sampled rendering is discontinuous exactly there.

The inverse-kinematics solver is a damped Gauss-Newton iteration on the
2D position residual over the three active joints (damping 1e-3, at most
200 iterations, random restarts). The three redundant joints make any
solution on the self-motion manifold acceptable. Joint values wrap
modulo 2 (full circles), so iterates always stay in [-1, 1].
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DomainError, InfeasibleTargetError
from .kinematics import ACTIVE_JOINTS, ArmGeometry, DEFAULT_GEOMETRY, displacement, forward
from .world import (
    EnvironmentSpec,
    ROOM_SIDE,
    boundary_mask,
    channel_mask,
    generate_environment,
    render,
    shift_environment,
)

POSITION_CLASS_TOL = 1e-9
PAIR_ERROR_TOL = 1e-10
IK_RESIDUAL_TOL = 1e-12
BOUNDARY_TOL = 1e-7
BASE_IMAGE_TOL = 1e-6


@dataclass(frozen=True)
class EquivalentPair:
    """Motor pairs certified to realize the same planar displacement.

    ``displacement_error`` is the measured norm of
    displacement(m_a2, m_b2) - displacement(m_a, m_b); it is recorded,
    never assumed zero.
    """

    m_a: np.ndarray
    m_b: np.ndarray
    m_a2: np.ndarray
    m_b2: np.ndarray
    displacement_error: float


@dataclass
class PositionClassResult:
    passed: bool
    sensory_distance: float


@dataclass
class MetricClassResult:
    passed: bool
    first_distance: float
    second_distance: float
    boundary_pixels: int
    tolerance: float
    delta: np.ndarray


@dataclass
class VerificationRow:
    """One line of the verification report CSV."""

    suite: str
    trial: int
    seed: int
    displacement_error: float
    image_distance: float
    boundary_pixels: int
    passed: bool


@dataclass
class CompensabilitySummary:
    trials: int
    max_deviation: float
    boundary_pixels: int
    passed: bool


@dataclass
class MetricClassSummary:
    pair_trials: int
    pair_pass_fraction: float
    distractor_bit_exact: bool
    matched_mean_distance: float
    negative_mean_distance: float
    negative_ratio: float
    kappa: float
    passed: bool


def _wrap_joints(x: np.ndarray) -> np.ndarray:
    # Joint commands are 2-periodic (full circles); wrapping keeps
    # iterates inside [-1, 1] without excluding any configuration.
    return np.mod(x + 1.0, 2.0) - 1.0


def _active_jacobian(joints: np.ndarray, geom: ArmGeometry) -> np.ndarray:
    """d position / d (m1, m2, m3), shape (2, 3)."""
    angles = geom.angle_gain * np.cumsum(joints)
    lengths = np.asarray(geom.lengths)
    lx = -lengths * np.sin(angles) * geom.angle_gain
    ly = lengths * np.cos(angles) * geom.angle_gain
    jac = np.empty((2, ACTIVE_JOINTS))
    for j in range(ACTIVE_JOINTS):
        jac[0, j] = lx[j:].sum()
        jac[1, j] = ly[j:].sum()
    return jac


def _active_forward(joints: np.ndarray, geom: ArmGeometry) -> np.ndarray:
    angles = geom.angle_gain * np.cumsum(joints)
    lengths = np.asarray(geom.lengths)
    return np.array([np.sum(lengths * np.cos(angles)), np.sum(lengths * np.sin(angles))])


def solve_position(target, rng: np.random.Generator, geom: ArmGeometry = DEFAULT_GEOMETRY,
                   tol: float = IK_RESIDUAL_TOL, max_iter: int = 200, damping: float = 1e-3,
                   restarts: int = 50) -> np.ndarray:
    """Find joints (3,) with ||forward - target|| <= tol, or raise.

    Each restart draws a fresh random start from ``rng``; a restart is
    triggered on iteration exhaustion or a stalled residual.
    """
    target = np.asarray(target, dtype=np.float64).reshape(2)
    if np.linalg.norm(target) > geom.reach:
        raise InfeasibleTargetError(
            f"target {target} at distance {np.linalg.norm(target):.6f} "
            f"exceeds reach {geom.reach}"
        )
    eye2 = np.eye(2)
    for _ in range(restarts):
        x = rng.uniform(-1.0, 1.0, ACTIVE_JOINTS)
        stall_ref = np.inf
        for it in range(max_iter):
            r = target - _active_forward(x, geom)
            rn = float(np.linalg.norm(r))
            if rn <= tol:
                return x
            if it % 25 == 24:
                if rn > 0.5 * stall_ref:
                    break
                stall_ref = rn
            jac = _active_jacobian(x, geom)
            step = jac.T @ np.linalg.solve(jac @ jac.T + damping * eye2, r)
            x = _wrap_joints(x + step)
    raise ConvergenceError(f"no solution for target {target} within {restarts} restarts")


def find_position_equivalent(m, seed: int, geom: ArmGeometry = DEFAULT_GEOMETRY) -> np.ndarray:
    """A fresh motor state in the position class of ``m`` (same sensor position)."""
    m = np.asarray(m, dtype=np.float64).reshape(-1)
    rng = np.random.default_rng(int(seed))
    joints = solve_position(forward(m, geom), rng, geom)
    return np.concatenate([joints, rng.uniform(-1.0, 1.0, 1)])


def find_equivalent_pair(m_a, m_b, seed: int, geom: ArmGeometry = DEFAULT_GEOMETRY,
                         restarts: int = 50) -> EquivalentPair:
    """Construct a distinct motor pair realizing the same displacement.

    Draw order per attempt: m_a2 (4 values), the solver's restart starts,
    then m_b2's distractor component. Attempts whose implied target falls
    outside the reachable disk are resampled within the same budget.
    """
    m_a = np.asarray(m_a, dtype=np.float64).reshape(-1)
    m_b = np.asarray(m_b, dtype=np.float64).reshape(-1)
    delta = displacement(m_a, m_b, geom)
    margin = 1e-9
    if np.linalg.norm(delta) > 2.0 * geom.reach - margin:
        raise InfeasibleTargetError(
            f"displacement magnitude {np.linalg.norm(delta):.6f} is infeasible "
            f"(limit {2.0 * geom.reach})"
        )
    rng = np.random.default_rng(int(seed))
    last_error: Exception | None = None
    for _ in range(restarts):
        m_a2 = rng.uniform(-1.0, 1.0, 4)
        target = forward(m_a2, geom) + delta
        if np.linalg.norm(target) > geom.reach:
            continue
        try:
            joints = solve_position(target, rng, geom, restarts=4)
        except ConvergenceError as exc:
            last_error = exc
            continue
        m_b2 = np.concatenate([joints, rng.uniform(-1.0, 1.0, 1)])
        error = float(np.linalg.norm(displacement(m_a2, m_b2, geom) - delta))
        if error <= PAIR_ERROR_TOL:
            return EquivalentPair(m_a, m_b, m_a2, m_b2, error)
    raise ConvergenceError(f"no equivalent pair within {restarts} restarts ({last_error})")


def distractor_pair(m_a, m_b, m4_a: float, m4_b: float) -> EquivalentPair:
    """The exact-membership subclass: only the distractor component changes."""
    m_a = np.asarray(m_a, dtype=np.float64).reshape(-1)
    m_b = np.asarray(m_b, dtype=np.float64).reshape(-1)
    m_a2 = m_a.copy()
    m_a2[3] = m4_a
    m_b2 = m_b.copy()
    m_b2[3] = m4_b
    error = float(np.linalg.norm(displacement(m_a2, m_b2) - displacement(m_a, m_b)))
    return EquivalentPair(m_a, m_b, m_a2, m_b2, error)


def verify_position_class(env: EnvironmentSpec, base, m, m2,
                          geom: ArmGeometry = DEFAULT_GEOMETRY) -> PositionClassResult:
    """Render both states and compare; caller guarantees class membership."""
    gap = float(np.linalg.norm(forward(m2, geom) - forward(m, geom)))
    if gap > POSITION_CLASS_TOL:
        raise DomainError(f"position gap {gap:.3e} exceeds class tolerance {POSITION_CLASS_TOL}")
    img = render(env, base, forward(m, geom))
    img2 = render(env, base, forward(m2, geom))
    dist = float(np.abs(img - img2).max())
    return PositionClassResult(passed=dist <= POSITION_CLASS_TOL, sensory_distance=dist)


def measure_render_lipschitz(env: EnvironmentSpec, base, seed: int = 0, probes: int = 32,
                             step: float = 1e-6, geom: ArmGeometry = DEFAULT_GEOMETRY) -> float:
    """Empirical image change per unit sensor displacement, off boundaries.

    Point-sampled images are piecewise constant in the sensor position,
    so away from disk edges this is essentially zero; it is measured
    rather than assumed and recorded in reports for audit. Pixels within
    ``step + BOUNDARY_TOL`` of an edge in either probe are excluded.
    """
    rng = np.random.default_rng(int(seed))
    kappa = 0.0
    exclusion = step + BOUNDARY_TOL
    for _ in range(probes):
        p = forward(rng.uniform(-1.0, 1.0, 4), geom)
        angle = rng.uniform(0.0, 2.0 * np.pi)
        p2 = p + step * np.array([np.cos(angle), np.sin(angle)])
        excluded = boundary_mask(env, base, p, exclusion) | boundary_mask(env, base, p2, exclusion)
        keep = ~channel_mask(excluded)
        if not keep.any():
            continue
        diff = float(np.abs(render(env, base, p) - render(env, base, p2))[keep].max())
        kappa = max(kappa, diff / step)
    return kappa


def verify_metric_class(env: EnvironmentSpec, pair: EquivalentPair, base,
                        geom: ArmGeometry = DEFAULT_GEOMETRY, kappa: float = 0.0,
                        check_displacement: bool = True) -> MetricClassResult:
    """Check the displacement-class implication in the simulator.

    Shifts the room by delta = f(m_a) - f(m_a2), which makes the primed
    frame sensorily match at the first state, then requires both image
    pairs to agree per channel within 1e-6 + kappa * displacement_error,
    excluding boundary pixels. ``check_displacement=False`` admits
    deliberately corrupted pairs for negative controls.
    """
    if check_displacement and pair.displacement_error > PAIR_ERROR_TOL:
        raise DomainError(
            f"displacement error {pair.displacement_error:.3e} exceeds {PAIR_ERROR_TOL}"
        )
    p_a = forward(pair.m_a, geom)
    p_b = forward(pair.m_b, geom)
    p_a2 = forward(pair.m_a2, geom)
    p_b2 = forward(pair.m_b2, geom)
    delta = p_a - p_a2
    shifted = shift_environment(env, delta)

    tol = BASE_IMAGE_TOL + kappa * pair.displacement_error
    mask_a = boundary_mask(env, base, p_a) | boundary_mask(shifted, base, p_a2)
    mask_b = boundary_mask(env, base, p_b) | boundary_mask(shifted, base, p_b2)
    keep_a = ~channel_mask(mask_a)
    keep_b = ~channel_mask(mask_b)

    diff_a = np.abs(render(env, base, p_a) - render(shifted, base, p_a2))
    diff_b = np.abs(render(env, base, p_b) - render(shifted, base, p_b2))
    dist_a = float(diff_a[keep_a].max()) if keep_a.any() else 0.0
    dist_b = float(diff_b[keep_b].max()) if keep_b.any() else 0.0
    return MetricClassResult(
        passed=dist_a <= tol and dist_b <= tol,
        first_distance=dist_a,
        second_distance=dist_b,
        boundary_pixels=int(mask_a.sum() + mask_b.sum()),
        tolerance=tol,
        delta=delta,
    )


def verify_compensability_suite(seeds, trials: int) -> tuple[list[VerificationRow], CompensabilitySummary]:
    """Sample (room, base, position, shift) and compare the two render routes.

    Per trial stream ``SeedSequence([seed, trial])`` draws, in order: the
    room seed, the base, a motor state (mapped to the sensor position),
    and the shift (uniform over [-room/2, room/2)^2).
    """
    if trials < 1:
        raise DomainError(f"trials must be positive, got {trials}")
    rows = []
    max_dev = 0.0
    boundary_total = 0
    index = 0
    for seed in seeds:
        for trial in range(trials):
            rng = np.random.default_rng(np.random.SeedSequence([int(seed), trial]))
            env = generate_environment(int(rng.integers(0, 2 ** 63)))
            base = rng.uniform(0.0, ROOM_SIDE, 2)
            p = forward(rng.uniform(-1.0, 1.0, 4))
            delta = rng.uniform(-ROOM_SIDE / 2, ROOM_SIDE / 2, 2)

            moved = render(env, base + delta, p)
            shifted = render(shift_environment(env, delta), base, p)
            excluded = boundary_mask(env, base + delta, p) | boundary_mask(
                shift_environment(env, delta), base, p
            )
            keep = ~channel_mask(excluded)
            dev = float(np.abs(moved - shifted)[keep].max()) if keep.any() else 0.0
            n_boundary = int(excluded.sum())
            rows.append(VerificationRow(
                suite="compensability",
                trial=index,
                seed=int(seed),
                displacement_error=float(np.linalg.norm(delta)),
                image_distance=dev,
                boundary_pixels=n_boundary,
                passed=dev <= POSITION_CLASS_TOL,
            ))
            max_dev = max(max_dev, dev)
            boundary_total += n_boundary
            index += 1
    summary = CompensabilitySummary(
        trials=index,
        max_deviation=max_dev,
        boundary_pixels=boundary_total,
        passed=max_dev <= POSITION_CLASS_TOL,
    )
    return rows, summary


def run_position_class_suite(seed: int, trials: int) -> tuple[list[VerificationRow], bool]:
    """IK-refined and distractor-flipped members of random position classes."""
    rows = []
    for trial in range(trials):
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), trial]))
        env = generate_environment(int(rng.integers(0, 2 ** 63)))
        base = rng.uniform(0.0, ROOM_SIDE, 2)
        m = rng.uniform(-1.0, 1.0, 4)
        m2 = find_position_equivalent(m, int(rng.integers(0, 2 ** 63)))
        gap = float(np.linalg.norm(forward(m2) - forward(m)))
        res = verify_position_class(env, base, m, m2)
        rows.append(VerificationRow("position-class", trial, int(seed), gap,
                                    res.sensory_distance, 0, res.passed))

        flipped = m.copy()
        flipped[3] = -m[3]
        res2 = verify_position_class(env, base, m, flipped)
        rows.append(VerificationRow("position-class-distractor", trial, int(seed), 0.0,
                                    res2.sensory_distance, 0,
                                    res2.passed and res2.sensory_distance == 0.0))
    return rows, all(r.passed for r in rows)


def run_metric_class_suite(seed: int, trials: int) -> tuple[list[VerificationRow], MetricClassSummary]:
    """IK pairs, exact distractor pairs, and corrupted negative controls.

    The negative controls deliberately violate the displacement
    precondition (mismatch >= 0.05) and must show image distances far
    above the matched cases.
    """
    rng0 = np.random.default_rng(np.random.SeedSequence([int(seed), 0xC0]))
    env = generate_environment(int(rng0.integers(0, 2 ** 63)))
    base = rng0.uniform(0.0, ROOM_SIDE, 2)
    kappa = measure_render_lipschitz(env, base, seed=int(rng0.integers(0, 2 ** 63)))

    rows = []
    matched_dists = []
    pass_count = 0
    for trial in range(trials):
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), 1, trial]))
        m_a = rng.uniform(-1.0, 1.0, 4)
        m_b = rng.uniform(-1.0, 1.0, 4)
        pair = find_equivalent_pair(m_a, m_b, int(rng.integers(0, 2 ** 63)))
        res = verify_metric_class(env, pair, base, kappa=kappa)
        rows.append(VerificationRow("metric-class", trial, int(seed), pair.displacement_error,
                                    res.second_distance, res.boundary_pixels, res.passed))
        matched_dists.append(res.second_distance)
        pass_count += res.passed

    distractor_exact = True
    for trial in range(trials):
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), 2, trial]))
        m_a = rng.uniform(-1.0, 1.0, 4)
        m_b = rng.uniform(-1.0, 1.0, 4)
        pair = distractor_pair(m_a, m_b, *rng.uniform(-1.0, 1.0, 2))
        res = verify_metric_class(env, pair, base, kappa=kappa)
        bit_exact = res.first_distance == 0.0 and res.second_distance == 0.0
        distractor_exact = distractor_exact and bit_exact
        rows.append(VerificationRow("metric-class-distractor", trial, int(seed),
                                    pair.displacement_error, res.second_distance,
                                    res.boundary_pixels, bit_exact))

    negative_dists = []
    n_negative = max(1, trials // 4)
    for trial in range(n_negative):
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), 3, trial]))
        m_a = rng.uniform(-1.0, 1.0, 4)
        m_b = rng.uniform(-1.0, 1.0, 4)
        pair = find_equivalent_pair(m_a, m_b, int(rng.integers(0, 2 ** 63)))
        corrupted = pair.m_b2.copy()
        error = 0.0
        while error < 0.05:
            corrupted[:3] = _wrap_joints(pair.m_b2[:3] + rng.uniform(-0.3, 0.3, 3))
            error = float(np.linalg.norm(
                displacement(pair.m_a2, corrupted) - displacement(pair.m_a, pair.m_b)
            ))
        bad = EquivalentPair(pair.m_a, pair.m_b, pair.m_a2, corrupted, error)
        res = verify_metric_class(env, bad, base, kappa=kappa, check_displacement=False)
        negative_dists.append(res.second_distance)
        rows.append(VerificationRow("metric-class-negative", trial, int(seed), error,
                                    res.second_distance, res.boundary_pixels,
                                    not res.passed))

    matched_mean = float(np.mean(matched_dists))
    negative_mean = float(np.mean(negative_dists))
    ratio = negative_mean / matched_mean if matched_mean > 0 else np.inf
    fraction = pass_count / trials
    summary = MetricClassSummary(
        pair_trials=trials,
        pair_pass_fraction=fraction,
        distractor_bit_exact=distractor_exact,
        matched_mean_distance=matched_mean,
        negative_mean_distance=negative_mean,
        negative_ratio=ratio,
        kappa=kappa,
        passed=fraction >= 0.99 and distractor_exact and ratio >= 10.0,
    )
    return rows, summary


def write_verification_csv(rows, path) -> None:
    """Rows as ``suite,trial,seed,displacement_error,image_distance,boundary_pixels,pass``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["suite", "trial", "seed", "displacement_error",
                         "image_distance", "boundary_pixels", "pass"])
        for r in rows:
            writer.writerow([r.suite, r.trial, r.seed, f"{r.displacement_error:.17g}",
                             f"{r.image_distance:.17g}", r.boundary_pixels, int(r.passed)])
