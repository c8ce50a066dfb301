"""Transition collection under the three exploration modes.

A transition is (m_t, s_t, m_next, s_next). Per environment the base
either stays put within the transition (nominal), hops between the two
postures (dynamic), or never moves at all (static, parked at the room
center). The learner only ever sees the raw motor and sensory vectors;
base poses are logged in a separate provenance structure for auditing.

Seeding: environment ``e`` of a collection uses
``SeedSequence([master_seed, e]).generate_state(2, uint64)`` — the first
word seeds the room generator, the second the sampling stream. Within an
environment, draws happen as whole arrays in a fixed order (bases, then
all m_t, then all m_next), so collections are bit-reproducible and
environments can be produced independently in any order.

Motor samples are rounded to float32 immediately and that rounded value
drives the renderer, so stored datasets re-render exactly.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, FormatError
from .kinematics import MOTOR_DIM, forward
from .world import ROOM_SIDE, SENSORY_DIM, generate_environment, render_batch

DATASET_MAGIC = b"SMDS"
DATASET_VERSION = 1
PROVENANCE_MAGIC = b"SMPR"
PROVENANCE_VERSION = 1

_RECORD_FLOATS = 2 * MOTOR_DIM + 2 * SENSORY_DIM


class ExplorationMode(enum.IntEnum):
    """Wire values match the SMDS mode byte."""

    NOMINAL = 0
    DYNAMIC = 1
    STATIC = 2

    @classmethod
    def parse(cls, name: str) -> "ExplorationMode":
        try:
            return cls[name.upper()]
        except KeyError:
            raise DomainError(f"unknown exploration mode {name!r}") from None


@dataclass(frozen=True)
class Transition:
    """One training record; vectors are numpy arrays of length 4/768/4/768."""

    m_t: np.ndarray
    s_t: np.ndarray
    m_next: np.ndarray
    s_next: np.ndarray


@dataclass
class Dataset:
    """Column-stored transitions plus collection provenance.

    ``bases_t`` / ``bases_next`` are the hidden base poses used to render
    each sensory state (equal rows outside dynamic mode). They are audit
    data, never learner input.
    """

    mode: ExplorationMode
    master_seed: int
    env_seeds: tuple[int, ...]
    per_env: int
    m_t: np.ndarray
    s_t: np.ndarray
    m_next: np.ndarray
    s_next: np.ndarray
    bases_t: np.ndarray
    bases_next: np.ndarray

    def __len__(self) -> int:
        return len(self.m_t)

    def transition(self, i: int) -> Transition:
        return Transition(self.m_t[i], self.s_t[i], self.m_next[i], self.s_next[i])


def _env_streams(master_seed: int, env_index: int):
    words = np.random.SeedSequence([int(master_seed), int(env_index)]).generate_state(2, np.uint64)
    return int(words[0]), int(words[1])


def collect(mode: ExplorationMode, env_count: int, per_env: int, master_seed: int) -> Dataset:
    """Collect ``env_count * per_env`` transitions under ``mode``.

    Nominal: per transition, one base uniform on the room, two motor
    states uniform on [-1, 1]^4, both images rendered at that base.
    Dynamic: two independent bases, one per image. Static: the base is
    parked at the room center for the whole environment.
    """
    mode = ExplorationMode(mode)
    if env_count < 1 or per_env < 1:
        raise DomainError(f"env_count and per_env must be >= 1, got {env_count}, {per_env}")

    n = env_count * per_env
    m_t = np.empty((n, MOTOR_DIM), dtype=np.float32)
    s_t = np.empty((n, SENSORY_DIM), dtype=np.float32)
    m_next = np.empty((n, MOTOR_DIM), dtype=np.float32)
    s_next = np.empty((n, SENSORY_DIM), dtype=np.float32)
    bases_t = np.empty((n, 2), dtype=np.float64)
    bases_next = np.empty((n, 2), dtype=np.float64)
    env_seeds = []

    for e in range(env_count):
        env_seed, stream_seed = _env_streams(master_seed, e)
        env_seeds.append(env_seed)
        env = generate_environment(env_seed)
        rng = np.random.default_rng(stream_seed)

        if mode is ExplorationMode.NOMINAL:
            b_t = rng.uniform(0.0, ROOM_SIDE, (per_env, 2))
            b_next = b_t
        elif mode is ExplorationMode.DYNAMIC:
            b_t = rng.uniform(0.0, ROOM_SIDE, (per_env, 2))
            b_next = rng.uniform(0.0, ROOM_SIDE, (per_env, 2))
        else:
            center = np.full((per_env, 2), ROOM_SIDE / 2.0)
            b_t = center
            b_next = center

        mt = rng.uniform(-1.0, 1.0, (per_env, MOTOR_DIM)).astype(np.float32)
        mn = rng.uniform(-1.0, 1.0, (per_env, MOTOR_DIM)).astype(np.float32)

        lo = e * per_env
        hi = lo + per_env
        m_t[lo:hi] = mt
        m_next[lo:hi] = mn
        bases_t[lo:hi] = b_t
        bases_next[lo:hi] = b_next
        s_t[lo:hi] = render_batch(env, b_t, forward(mt.astype(np.float64)))
        s_next[lo:hi] = render_batch(env, b_next, forward(mn.astype(np.float64)))

    return Dataset(
        mode=mode,
        master_seed=int(master_seed),
        env_seeds=tuple(env_seeds),
        per_env=per_env,
        m_t=m_t,
        s_t=s_t,
        m_next=m_next,
        s_next=s_next,
        bases_t=bases_t,
        bases_next=bases_next,
    )


def save_dataset(dataset: Dataset, path) -> None:
    """Write the SMDS layout: header then n records of
    (m_t 4xf32, s_t 768xf32, m_next 4xf32, s_next 768xf32), little-endian."""
    n = len(dataset)
    header = struct.pack(
        "<4sIBQQII",
        DATASET_MAGIC,
        DATASET_VERSION,
        int(dataset.mode),
        dataset.master_seed,
        n,
        MOTOR_DIM,
        SENSORY_DIM,
    )
    records = np.hstack([dataset.m_t, dataset.s_t, dataset.m_next, dataset.s_next]).astype("<f4")
    with open(path, "wb") as fh:
        fh.write(header)
        records.tofile(fh)


def load_dataset(path) -> Dataset:
    """Read an SMDS file; base poses are not stored here (see provenance)."""
    with open(path, "rb") as fh:
        data = fh.read()
    head = struct.Struct("<4sIBQQII")
    if len(data) < head.size:
        raise FormatError(f"truncated header: {len(data)} bytes, need {head.size}")
    magic, version, mode_byte, master_seed, n, motor_dim, sensory_dim = head.unpack_from(data, 0)
    if magic != DATASET_MAGIC:
        raise FormatError(f"bad magic at offset 0: {magic!r}")
    if version != DATASET_VERSION:
        raise FormatError(f"unsupported version {version} at offset 4")
    if mode_byte not in (0, 1, 2):
        raise FormatError(f"invalid mode byte {mode_byte} at offset 8")
    if motor_dim != MOTOR_DIM or sensory_dim != SENSORY_DIM:
        raise FormatError(f"dimension mismatch at offset 25: {motor_dim}/{sensory_dim}")
    expected = head.size + n * _RECORD_FLOATS * 4
    if len(data) != expected:
        raise FormatError(f"records end at offset {len(data)}, expected {expected}")
    flat = np.frombuffer(data, dtype="<f4", offset=head.size).reshape(n, _RECORD_FLOATS)
    # The file does not carry the environment split; per_env=0 marks it unknown.
    return Dataset(
        mode=ExplorationMode(mode_byte),
        master_seed=master_seed,
        env_seeds=(),
        per_env=0,
        m_t=flat[:, :MOTOR_DIM].copy(),
        s_t=flat[:, MOTOR_DIM:MOTOR_DIM + SENSORY_DIM].copy(),
        m_next=flat[:, MOTOR_DIM + SENSORY_DIM:2 * MOTOR_DIM + SENSORY_DIM].copy(),
        s_next=flat[:, 2 * MOTOR_DIM + SENSORY_DIM:].copy(),
        bases_t=np.empty((0, 2)),
        bases_next=np.empty((0, 2)),
    )


def save_provenance(dataset: Dataset, path) -> None:
    """Write the SMPR sidecar: per-record base poses (two f64 pairs each)."""
    n = len(dataset)
    header = struct.pack(
        "<4sIBQQB", PROVENANCE_MAGIC, PROVENANCE_VERSION, int(dataset.mode), dataset.master_seed, n, 2
    )
    poses = np.hstack([dataset.bases_t, dataset.bases_next]).astype("<f8")
    with open(path, "wb") as fh:
        fh.write(header)
        poses.tofile(fh)


def load_provenance(path) -> tuple[ExplorationMode, int, np.ndarray, np.ndarray]:
    """Read an SMPR sidecar; returns (mode, master_seed, bases_t, bases_next)."""
    with open(path, "rb") as fh:
        data = fh.read()
    head = struct.Struct("<4sIBQQB")
    if len(data) < head.size:
        raise FormatError(f"truncated header: {len(data)} bytes, need {head.size}")
    magic, version, mode_byte, master_seed, n, per_record = head.unpack_from(data, 0)
    if magic != PROVENANCE_MAGIC:
        raise FormatError(f"bad magic at offset 0: {magic!r}")
    if version != PROVENANCE_VERSION:
        raise FormatError(f"unsupported version {version} at offset 4")
    if per_record != 2:
        raise FormatError(f"expected 2 poses per record at offset 25, got {per_record}")
    expected = head.size + n * 4 * 8
    if len(data) != expected:
        raise FormatError(f"poses end at offset {len(data)}, expected {expected}")
    poses = np.frombuffer(data, dtype="<f8", offset=head.size).reshape(n, 4)
    return ExplorationMode(mode_byte), master_seed, poses[:, :2].copy(), poses[:, 2:].copy()
