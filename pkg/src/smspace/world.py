"""Procedural rooms and the downward-facing toroidal camera.

An environment is a square room of side ``ROOM_SIDE`` tiled with colored
disks lying on the floor, one per cell of a jittered ``GRID_CELLS`` x
``GRID_CELLS`` grid. The camera hangs above the floor pointing straight
down, so the image depends only on the planar world point above which it
sits. The floor pattern wraps toroidally: hopping the base never runs out
of room and sensory statistics are stationary.

Generation draw order (one ``numpy.random.default_rng(seed)`` stream):

1. background color, ``uniform(0, 1, 3)``
2. center jitters, ``uniform(-cell/2, cell/2, (n, 2))``
3. radii, ``uniform(0.1, 0.3, n)``
4. colors, ``uniform(0, 1, (n, 3))``
5. z-orders, ``permutation(n)``

Object ``k`` sits in grid cell ``(k % GRID_CELLS, k // GRID_CELLS)``.

Camera model: with base pose ``b`` and egocentric sensor position ``p``,
pixel ``(u, v)`` (``u, v`` in 0..15) samples the floor point

    w = b + p + FOOTPRINT * ((u + 0.5)/16 - 0.5, (v + 0.5)/16 - 0.5)

wrapped toroidally into ``[0, ROOM_SIDE)^2``. Its color is the color of
the highest-z-order disk containing the point (closed disks, toroidal
distance, ties broken by larger object index), else the background. The
flat sensory vector stores channel ``c`` of pixel ``(u, v)`` at index
``3 * (16 * u + v) + c``. All color math is float64; images are pure
functions of their inputs.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError, FormatError

ROOM_SIDE = 10.0
GRID_CELLS = 20
RADIUS_RANGE = (0.1, 0.3)
IMAGE_SIDE = 16
FOOTPRINT = 1.0
PIXEL_COUNT = IMAGE_SIDE * IMAGE_SIDE
SENSORY_DIM = 3 * PIXEL_COUNT

ENV_MAGIC = b"SMEV"
ENV_VERSION = 1

# Pixel sample offsets in camera frame, row-major over (u, v): index u*16+v.
_uv = (np.arange(IMAGE_SIDE, dtype=np.float64) + 0.5) / IMAGE_SIDE - 0.5
PIXEL_OFFSETS = FOOTPRINT * np.stack(
    [np.repeat(_uv, IMAGE_SIDE), np.tile(_uv, IMAGE_SIDE)], axis=1
)


@dataclass(frozen=True)
class SceneObject:
    """A colored disk on the floor; larger z_order draws on top."""

    cx: float
    cy: float
    radius: float
    color: tuple[float, float, float]
    z_order: int


@dataclass(frozen=True)
class EnvironmentSpec:
    """Immutable room description; ``seed`` records the generating stream."""

    seed: int
    room_side: float
    objects: tuple[SceneObject, ...]
    background: tuple[float, float, float]


def _background_from_seed(seed: int) -> tuple[float, float, float]:
    # First draw of the generation stream; load_environment replays it.
    rgb = np.random.default_rng(seed).uniform(0.0, 1.0, 3)
    return (float(rgb[0]), float(rgb[1]), float(rgb[2]))


def generate_environment(seed: int) -> EnvironmentSpec:
    """Deterministically generate the room for ``seed`` (draw order above)."""
    seed = int(seed)
    if seed < 0:
        raise DomainError(f"environment seed must be unsigned, got {seed}")
    rng = np.random.default_rng(seed)
    n = GRID_CELLS * GRID_CELLS
    cell = ROOM_SIDE / GRID_CELLS

    background = rng.uniform(0.0, 1.0, 3)
    jitter = rng.uniform(-cell / 2, cell / 2, (n, 2))
    radii = rng.uniform(RADIUS_RANGE[0], RADIUS_RANGE[1], n)
    colors = rng.uniform(0.0, 1.0, (n, 3))
    z_orders = rng.permutation(n)

    k = np.arange(n)
    cx = (k % GRID_CELLS + 0.5) * cell + jitter[:, 0]
    cy = (k // GRID_CELLS + 0.5) * cell + jitter[:, 1]
    objects = tuple(
        SceneObject(
            cx=float(cx[i]),
            cy=float(cy[i]),
            radius=float(radii[i]),
            color=(float(colors[i, 0]), float(colors[i, 1]), float(colors[i, 2])),
            z_order=int(z_orders[i]),
        )
        for i in range(n)
    )
    return EnvironmentSpec(
        seed=seed,
        room_side=ROOM_SIDE,
        objects=objects,
        background=(float(background[0]), float(background[1]), float(background[2])),
    )


def shift_environment(env: EnvironmentSpec, delta) -> EnvironmentSpec:
    """Translate every object center by ``-delta`` and wrap (the state eps - delta)."""
    delta = np.asarray(delta, dtype=np.float64)
    if delta.shape != (2,):
        raise DomainError(f"delta must be a planar vector, got shape {delta.shape}")
    moved = tuple(
        SceneObject(
            cx=float(np.mod(o.cx - delta[0], env.room_side)),
            cy=float(np.mod(o.cy - delta[1], env.room_side)),
            radius=o.radius,
            color=o.color,
            z_order=o.z_order,
        )
        for o in env.objects
    )
    return EnvironmentSpec(env.seed, env.room_side, moved, env.background)


class _EnvArrays:
    """Struct-of-arrays view of an environment plus an optional cell index.

    The index bins object centers into a G x G grid with cell size >= the
    largest radius, so every disk containing a point has its center inside
    the point's 3 x 3 cell neighborhood.
    """

    def __init__(self, env: EnvironmentSpec):
        k = len(env.objects)
        self.room = env.room_side
        self.count = k
        self.background = np.asarray(env.background, dtype=np.float64)
        self.centers = np.array([[o.cx, o.cy] for o in env.objects], dtype=np.float64).reshape(k, 2)
        self.radii = np.array([o.radius for o in env.objects], dtype=np.float64)
        self.colors = np.array([o.color for o in env.objects], dtype=np.float64).reshape(k, 3)
        z = np.array([o.z_order for o in env.objects], dtype=np.int64)
        self.z = z
        # Draw-priority key: z-order first, object index breaks ties.
        self.priority = (z - (z.min() if k else 0)) * np.int64(k) + np.arange(k, dtype=np.int64)

        self.grid_n = 0
        self.index_margin = np.inf
        if k >= 64:
            r_max = float(self.radii.max(initial=0.0))
            if r_max > 0:
                # Cell size must exceed r_max so a 3x3 neighborhood covers
                # containment, with slack for boundary-proximity queries.
                g = min(64, int(self.room / (r_max + 1e-3)))
                if g >= 3:
                    self.grid_n = g
                    self.cell = self.room / g
                    self.index_margin = self.cell - r_max
                    ix = np.minimum((self.centers[:, 0] // self.cell).astype(np.int64), g - 1)
                    iy = np.minimum((self.centers[:, 1] // self.cell).astype(np.int64), g - 1)
                    cell_ids = ix * g + iy
                    order = np.argsort(cell_ids, kind="stable")
                    counts = np.bincount(cell_ids, minlength=g * g)
                    max_occ = int(counts.max(initial=0))
                    table = np.full((g * g, max_occ), -1, dtype=np.int64)
                    slot = np.zeros(g * g, dtype=np.int64)
                    for obj in order:
                        c = cell_ids[obj]
                        table[c, slot[c]] = obj
                        slot[c] += 1
                    self.cell_table = table


@lru_cache(maxsize=16)
def _env_arrays(env: EnvironmentSpec) -> _EnvArrays:
    return _EnvArrays(env)


_NEIGHBOR_OFFSETS = np.array([(dx, dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1)], dtype=np.int64)


def _candidates(ea: _EnvArrays, pts: np.ndarray):
    """Candidate object indices per point: (P, C) indices and a validity mask."""
    if ea.grid_n:
        g = ea.grid_n
        ix = np.minimum((pts[:, 0] // ea.cell).astype(np.int64), g - 1)
        iy = np.minimum((pts[:, 1] // ea.cell).astype(np.int64), g - 1)
        nx = (ix[:, None] + _NEIGHBOR_OFFSETS[:, 0]) % g
        ny = (iy[:, None] + _NEIGHBOR_OFFSETS[:, 1]) % g
        cand = ea.cell_table[nx * g + ny].reshape(len(pts), -1)
        valid = cand >= 0
        return np.maximum(cand, 0), valid
    cand = np.broadcast_to(np.arange(ea.count, dtype=np.int64), (len(pts), ea.count))
    return cand, np.ones(cand.shape, dtype=bool)


def _containment(ea: _EnvArrays, pts: np.ndarray, cand: np.ndarray, valid: np.ndarray):
    """Toroidal squared distances point-to-candidate-center and the inside mask."""
    room = ea.room
    dx = np.abs(pts[:, 0, None] - ea.centers[cand, 0])
    dx = np.minimum(dx, room - dx)
    dy = np.abs(pts[:, 1, None] - ea.centers[cand, 1])
    dy = np.minimum(dy, room - dy)
    d2 = dx * dx + dy * dy
    inside = (d2 <= ea.radii[cand] ** 2) & valid
    return d2, inside


def _render_points(env: EnvironmentSpec, pts: np.ndarray) -> np.ndarray:
    """Color (P, 3) of arbitrary floor points, wrapped into the room."""
    ea = _env_arrays(env)
    pts = np.mod(pts, ea.room)
    out = np.broadcast_to(ea.background, (len(pts), 3)).copy()
    if ea.count == 0:
        return out
    cand, valid = _candidates(ea, pts)
    _, inside = _containment(ea, pts, cand, valid)
    # Priority keys are >= 0, so shift by +1 and use 0 as "background".
    keys = np.where(inside, ea.priority[cand] + 1, 0)
    best = np.argmax(keys, axis=1)
    rows = np.arange(len(pts))
    hit = keys[rows, best] > 0
    out[hit] = ea.colors[cand[rows[hit], best[hit]]]
    return out


def render(env: EnvironmentSpec, base, p) -> np.ndarray:
    """Render the flat 768-vector image of the camera above ``base + p``."""
    return render_batch(env, np.asarray(base, dtype=np.float64).reshape(1, 2),
                        np.asarray(p, dtype=np.float64).reshape(1, 2))[0]


def render_batch(env: EnvironmentSpec, bases, ps) -> np.ndarray:
    """Render many images at once; returns (T, 768) float64.

    Equivalent to stacking :func:`render` per row (each point's color is
    independent, so chunking cannot change results).
    """
    bases = np.asarray(bases, dtype=np.float64).reshape(-1, 2)
    ps = np.asarray(ps, dtype=np.float64).reshape(-1, 2)
    if len(bases) != len(ps):
        raise DomainError(f"base/position counts differ: {len(bases)} vs {len(ps)}")
    t = len(bases)
    ea = _env_arrays(env)
    cand_width = 9 * ea.cell_table.shape[1] if ea.grid_n else max(ea.count, 1)
    images_per_chunk = max(1, int(4e6) // (PIXEL_COUNT * cand_width))
    out = np.empty((t, SENSORY_DIM), dtype=np.float64)
    for lo in range(0, t, images_per_chunk):
        hi = min(t, lo + images_per_chunk)
        pts = (bases[lo:hi, None, :] + ps[lo:hi, None, :] + PIXEL_OFFSETS[None, :, :]).reshape(-1, 2)
        out[lo:hi] = _render_points(env, pts).reshape(hi - lo, SENSORY_DIM)
    return out


def boundary_mask(env: EnvironmentSpec, base, p, tol: float = 1e-7) -> np.ndarray:
    """Per-pixel mask (256,) of sample points within ``tol`` of any disk edge.

    Point-sampled rendering is discontinuous exactly on disk boundaries;
    comparisons exclude these pixels. Occluded edges count too.
    """
    ea = _env_arrays(env)
    if ea.grid_n and tol > ea.index_margin:
        raise DomainError(f"boundary tolerance {tol} exceeds index slack {ea.index_margin}")
    pts = np.mod(
        np.asarray(base, dtype=np.float64).reshape(2)
        + np.asarray(p, dtype=np.float64).reshape(2)
        + PIXEL_OFFSETS,
        ea.room,
    )
    if ea.count == 0:
        return np.zeros(PIXEL_COUNT, dtype=bool)
    cand, valid = _candidates(ea, pts)
    d2, _ = _containment(ea, pts, cand, valid)
    near = (np.abs(np.sqrt(d2) - ea.radii[cand]) <= tol) & valid
    return np.any(near, axis=1)


def channel_mask(pixel_mask: np.ndarray) -> np.ndarray:
    """Expand a (256,) pixel mask to the flat (768,) channel layout."""
    return np.repeat(pixel_mask, 3)


def save_environment(env: EnvironmentSpec, path) -> None:
    """Write the SMEV binary layout (little-endian).

    Header: magic "SMEV", version u32=1, seed u64, room_side f64,
    object count u32; then per object cx f64, cy f64, radius f64,
    rgb 3xf64, z_order u32. The background is not stored; it is
    re-derived from the seed on load.
    """
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sIQdI", ENV_MAGIC, ENV_VERSION, env.seed, env.room_side, len(env.objects)))
        for o in env.objects:
            fh.write(struct.pack("<6dI", o.cx, o.cy, o.radius, *o.color, o.z_order))


def load_environment(path) -> EnvironmentSpec:
    """Read an SMEV file; raises FormatError naming the offending byte offset."""
    with open(path, "rb") as fh:
        data = fh.read()
    head = struct.Struct("<4sIQdI")
    if len(data) < head.size:
        raise FormatError(f"truncated header: {len(data)} bytes, need {head.size}")
    magic, version, seed, room_side, count = head.unpack_from(data, 0)
    if magic != ENV_MAGIC:
        raise FormatError(f"bad magic at offset 0: {magic!r}")
    if version != ENV_VERSION:
        raise FormatError(f"unsupported version {version} at offset 4")
    rec = struct.Struct("<6dI")
    expected = head.size + count * rec.size
    if len(data) != expected:
        raise FormatError(f"object records end at offset {len(data)}, expected {expected}")
    objects = []
    for i in range(count):
        cx, cy, radius, r, g, b, z = rec.unpack_from(data, head.size + i * rec.size)
        objects.append(SceneObject(cx, cy, radius, (r, g, b), z))
    return EnvironmentSpec(seed, room_side, tuple(objects), _background_from_seed(seed))
