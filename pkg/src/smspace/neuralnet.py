"""From-scratch dense networks for sensorimotor prediction.

Two MLPs are chained: an encoder (4 -> 150 -> 100 -> 50 -> 3) maps a motor
state to a 3-vector representation, and a predictor (774 -> 200 -> 150 ->
100 -> 768) maps the concatenation (h_t, h_next, s_t) to the predicted
next image. Hidden layers are rectified, outputs are linear, and both
networks train jointly under a single Adam optimizer on the MSE loss
averaged over batch and output components.

Everything is float64 numpy. All gradients are exact analytic
derivatives; :func:`numeric_gradient` provides the independent
finite-difference route used to check them (it only ever calls the
forward-pass loss).

Checkpoints use the SMNN layout: magic "SMNN", version u32=1, network
count u8=2, then per network a layer count u8, the dims as u32, and per
layer the row-major float32 weights followed by the float32 biases, all
little-endian.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, FormatError, TrainingFault
from .kinematics import MOTOR_DIM, as_motor

NET1_DIMS = (4, 150, 100, 50, 3)
NET2_DIMS = (774, 200, 150, 100, 768)
REPRESENTATION_DIM = 3

CHECKPOINT_MAGIC = b"SMNN"
CHECKPOINT_VERSION = 1

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class Mlp:
    """Dense network with rectified hidden layers and a linear output.

    ``weights[k]`` has shape (dims[k+1], dims[k]); ``biases[k]`` has shape
    (dims[k+1],).
    """

    dims: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def in_dim(self) -> int:
        return self.dims[0]

    @property
    def out_dim(self) -> int:
        return self.dims[-1]

    def parameter_count(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))


def init_mlp(dims, rng: np.random.Generator) -> Mlp:
    """Uniform +-sqrt(6/(fan_in+fan_out)) weights, zero biases.

    One rng draw per layer, in layer order, shape (out, in).
    """
    dims = tuple(int(d) for d in dims)
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise DomainError(f"invalid layer dims {dims}")
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        lim = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-lim, lim, (fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Mlp(dims, weights, biases)


def build_networks(seed: int) -> tuple[Mlp, Mlp]:
    """Seeded construction of (encoder, predictor); encoder layers draw first."""
    rng = np.random.default_rng(int(seed))
    return init_mlp(NET1_DIMS, rng), init_mlp(NET2_DIMS, rng)


def _mlp_forward(mlp: Mlp, x: np.ndarray, want_cache: bool):
    """Batched forward pass; cache holds per-layer inputs and ReLU masks."""
    if x.shape[1] != mlp.in_dim:
        raise DomainError(f"input dim {x.shape[1]} does not match network dim {mlp.in_dim}")
    inputs = [x] if want_cache else None
    masks = [] if want_cache else None
    a = x
    last = len(mlp.weights) - 1
    for k, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        z = a @ w.T + b
        if k < last:
            mask = z > 0
            a = z * mask
            if want_cache:
                masks.append(mask)
                inputs.append(a)
        else:
            a = z
    return (a, (inputs, masks)) if want_cache else a


def _mlp_backward(mlp: Mlp, cache, d_out: np.ndarray):
    """Exact gradients for one MLP; returns (dWs, dbs, d_input)."""
    inputs, masks = cache
    d_ws = [None] * len(mlp.weights)
    d_bs = [None] * len(mlp.biases)
    dz = d_out
    for k in range(len(mlp.weights) - 1, -1, -1):
        d_ws[k] = dz.T @ inputs[k]
        d_bs[k] = dz.sum(axis=0)
        if k > 0:
            dz = (dz @ mlp.weights[k]) * masks[k - 1]
    return d_ws, d_bs, dz @ mlp.weights[0]


def encode(net1: Mlp, m) -> np.ndarray:
    """Motor state(s) -> representation(s); accepts (4,) or (n, 4)."""
    arr = as_motor(m)
    single = arr.ndim == 1
    out = _mlp_forward(net1, arr.reshape(-1, MOTOR_DIM), want_cache=False)
    return out[0] if single else out


def predict(net2: Mlp, h_t, h_next, s_t) -> np.ndarray:
    """Predicted next image from (h_t, h_next, s_t), concatenated in that order."""
    single = np.asarray(s_t).ndim == 1
    h_t = np.atleast_2d(np.asarray(h_t, dtype=np.float64))
    h_next = np.atleast_2d(np.asarray(h_next, dtype=np.float64))
    s_t = np.atleast_2d(np.asarray(s_t, dtype=np.float64))
    if h_t.shape != h_next.shape:
        raise DomainError(f"representation shapes differ: {h_t.shape} vs {h_next.shape}")
    if 2 * h_t.shape[1] + s_t.shape[1] != net2.in_dim:
        raise DomainError(
            f"concatenated input dim {2 * h_t.shape[1] + s_t.shape[1]} "
            f"does not match network dim {net2.in_dim}"
        )
    out = _mlp_forward(net2, np.hstack([h_t, h_next, s_t]), want_cache=False)
    return out[0] if single else out


def _as_batch(batch) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Normalize a batch (list of Transition or 4-tuple of arrays) to float64 matrices."""
    if isinstance(batch, (tuple, list)) and len(batch) == 4 and all(
        isinstance(a, np.ndarray) for a in batch
    ):
        m_t, s_t, m_next, s_next = batch
    else:
        m_t = np.stack([t.m_t for t in batch])
        s_t = np.stack([t.s_t for t in batch])
        m_next = np.stack([t.m_next for t in batch])
        s_next = np.stack([t.s_next for t in batch])
    arrays = tuple(np.asarray(a, dtype=np.float64) for a in (m_t, s_t, m_next, s_next))
    if len(arrays[0]) == 0:
        raise DomainError("batch is empty")
    return arrays


def _chained_forward(net1: Mlp, net2: Mlp, m_t, s_t, m_next, want_cache: bool):
    if net2.in_dim != 2 * net1.out_dim + s_t.shape[1]:
        raise DomainError(
            f"predictor input dim {net2.in_dim} does not match "
            f"2*{net1.out_dim} + {s_t.shape[1]}"
        )
    if want_cache:
        h_t, cache_t = _mlp_forward(net1, m_t, True)
        h_next, cache_next = _mlp_forward(net1, m_next, True)
        z = np.hstack([h_t, h_next, s_t])
        pred, cache2 = _mlp_forward(net2, z, True)
        return pred, (cache_t, cache_next, cache2)
    h_t = _mlp_forward(net1, m_t, False)
    h_next = _mlp_forward(net1, m_next, False)
    return _mlp_forward(net2, np.hstack([h_t, h_next, s_t]), False)


def loss_forward(nets: tuple[Mlp, Mlp], batch) -> float:
    """Prediction loss via forward passes only (the finite-difference route)."""
    net1, net2 = nets
    m_t, s_t, m_next, s_next = _as_batch(batch)
    pred = _chained_forward(net1, net2, m_t, s_t, m_next, want_cache=False)
    if pred.shape != s_next.shape:
        raise DomainError(f"prediction shape {pred.shape} does not match targets {s_next.shape}")
    diff = pred - s_next
    return float(np.mean(diff * diff))


def gradient(nets: tuple[Mlp, Mlp], batch):
    """Analytic gradients of the batch loss for both networks.

    Returns ``((dW1, db1), (dW2, db2)), loss``. The loss is the squared
    error averaged over the batch and over output components; encoder
    gradients accumulate contributions from both encode calls.
    """
    net1, net2 = nets
    m_t, s_t, m_next, s_next = _as_batch(batch)
    pred, (cache_t, cache_next, cache2) = _chained_forward(net1, net2, m_t, s_t, m_next, True)
    if pred.shape != s_next.shape:
        raise DomainError(f"prediction shape {pred.shape} does not match targets {s_next.shape}")
    diff = pred - s_next
    loss = float(np.mean(diff * diff))
    if not np.isfinite(loss):
        raise TrainingFault(
            f"non-finite activations: loss={loss}, batch size {len(m_t)}, "
            f"max |prediction| {np.abs(pred).max()}"
        )
    d_pred = (2.0 / diff.size) * diff
    d_w2, d_b2, d_z = _mlp_backward(net2, cache2, d_pred)
    r = net1.out_dim
    d_w1a, d_b1a, _ = _mlp_backward(net1, cache_t, d_z[:, :r])
    d_w1b, d_b1b, _ = _mlp_backward(net1, cache_next, d_z[:, r:2 * r])
    d_w1 = [a + b for a, b in zip(d_w1a, d_w1b)]
    d_b1 = [a + b for a, b in zip(d_b1a, d_b1b)]
    return ((d_w1, d_b1), (d_w2, d_b2)), loss


def numeric_gradient(nets: tuple[Mlp, Mlp], batch, step: float = 1e-5):
    """Central finite differences of the loss over every parameter.

    Independent oracle for :func:`gradient`: touches parameters in place,
    evaluates :func:`loss_forward` twice per entry, and restores them.
    """
    grads = []
    for net in nets:
        d_ws, d_bs = [], []
        for arrays, grad_list in ((net.weights, d_ws), (net.biases, d_bs)):
            for arr in arrays:
                g = np.zeros_like(arr)
                flat = arr.reshape(-1)
                gf = g.reshape(-1)
                for i in range(flat.size):
                    orig = flat[i]
                    flat[i] = orig + step
                    up = loss_forward(nets, batch)
                    flat[i] = orig - step
                    down = loss_forward(nets, batch)
                    flat[i] = orig
                    gf[i] = (up - down) / (2.0 * step)
                grad_list.append(g)
        grads.append((d_ws, d_bs))
    return tuple(grads)


def random_toy_instance(rng: np.random.Generator, kink_margin: float = 1e-3):
    """Random small chained networks plus a batch, for gradient checking.

    Instances are redrawn until every hidden pre-activation sits at least
    ``kink_margin`` from zero: central differences are invalid across a
    rectifier kink, and the check's 1e-5 step perturbs pre-activations by
    far less than the margin.
    """
    for _ in range(200):
        r = int(rng.integers(2, 4))
        s_dim = int(rng.integers(3, 9))
        net1 = init_mlp((MOTOR_DIM, int(rng.integers(3, 7)), r), rng)
        net2 = init_mlp((2 * r + s_dim, int(rng.integers(3, 7)), s_dim), rng)
        for net in (net1, net2):
            for w in net.weights:
                w *= rng.uniform(0.5, 1.5)
            for b in net.biases:
                b += rng.uniform(-0.5, 0.5, b.shape)
        bsz = int(rng.integers(2, 5))
        batch = (
            rng.uniform(-1.0, 1.0, (bsz, MOTOR_DIM)),
            rng.uniform(0.0, 1.0, (bsz, s_dim)),
            rng.uniform(-1.0, 1.0, (bsz, MOTOR_DIM)),
            rng.uniform(0.0, 1.0, (bsz, s_dim)),
        )
        m_t, s_t, m_next, _ = batch
        clear = True
        for x, net in (((m_t), net1), ((m_next), net1)):
            _, (inputs, _) = _mlp_forward(net, x, True)
            for k, w in enumerate(net.weights[:-1]):
                z = inputs[k] @ w.T + net.biases[k]
                clear = clear and bool(np.abs(z).min() > kink_margin)
        h_t = _mlp_forward(net1, m_t, False)
        h_next = _mlp_forward(net1, m_next, False)
        z2 = np.hstack([h_t, h_next, s_t])
        _, (inputs2, _) = _mlp_forward(net2, z2, True)
        for k, w in enumerate(net2.weights[:-1]):
            z = inputs2[k] @ w.T + net2.biases[k]
            clear = clear and bool(np.abs(z).min() > kink_margin)
        if clear:
            return (net1, net2), batch
    raise RuntimeError("could not draw a kink-free toy instance")


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 128
    learning_rate: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1 or self.learning_rate <= 0:
            raise DomainError(f"invalid training config {self}")


@dataclass
class AdamState:
    """First/second moment accumulators mirroring a flat parameter list."""

    learning_rate: float
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def _flat_params(nets: tuple[Mlp, Mlp]) -> list[np.ndarray]:
    out = []
    for net in nets:
        for w, b in zip(net.weights, net.biases):
            out.append(w)
            out.append(b)
    return out


def _flat_grads(grads) -> list[np.ndarray]:
    out = []
    for d_ws, d_bs in grads:
        for w, b in zip(d_ws, d_bs):
            out.append(w)
            out.append(b)
    return out


def adam_init(nets: tuple[Mlp, Mlp], learning_rate: float) -> AdamState:
    params = _flat_params(nets)
    return AdamState(
        learning_rate=learning_rate,
        m=[np.zeros_like(p) for p in params],
        v=[np.zeros_like(p) for p in params],
    )


def adam_step(state: AdamState, nets: tuple[Mlp, Mlp], grads) -> None:
    """One in-place Adam update over all parameters of both networks."""
    state.step += 1
    t = state.step
    scale = state.learning_rate * np.sqrt(1.0 - state.beta2 ** t) / (1.0 - state.beta1 ** t)
    for p, g, m, v in zip(_flat_params(nets), _flat_grads(grads), state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= scale * m / (np.sqrt(v) + state.eps)


def train(dataset, config: TrainConfig) -> tuple[Mlp, Mlp, list[float]]:
    """Joint training of both networks; fully determined by (dataset, config).

    ``SeedSequence(config.seed)`` yields two words: the first seeds
    initialization, the second the per-epoch shuffles. Batches run in
    shuffle order and the final partial batch is used. The returned curve
    holds one mean per-sample loss per epoch.
    """
    n = len(dataset.m_t)
    if n == 0:
        raise DomainError("dataset is empty")
    init_seed, shuffle_seed = np.random.SeedSequence(int(config.seed)).generate_state(2, np.uint64)
    nets = build_networks(int(init_seed))
    rng = np.random.default_rng(int(shuffle_seed))
    state = adam_init(nets, config.learning_rate)
    curve = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        for lo in range(0, n, config.batch_size):
            idx = order[lo:lo + config.batch_size]
            batch = (
                dataset.m_t[idx].astype(np.float64),
                dataset.s_t[idx].astype(np.float64),
                dataset.m_next[idx].astype(np.float64),
                dataset.s_next[idx].astype(np.float64),
            )
            try:
                grads, loss = gradient(nets, batch)
            except TrainingFault as exc:
                raise TrainingFault(f"epoch {epoch}, batch {lo // config.batch_size}: {exc}") from None
            if not np.isfinite(loss):
                raise TrainingFault(f"NaN loss at epoch {epoch}, batch {lo // config.batch_size}")
            adam_step(state, nets, grads)
            total += loss * len(idx)
        curve.append(total / n)
    return nets[0], nets[1], curve


def save_networks(nets: tuple[Mlp, Mlp], path) -> None:
    """Write the SMNN checkpoint (float32 parameters, little-endian)."""
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sIB", CHECKPOINT_MAGIC, CHECKPOINT_VERSION, len(nets)))
        for net in nets:
            fh.write(struct.pack("<B", len(net.dims)))
            fh.write(np.asarray(net.dims, dtype="<u4").tobytes())
            for w, b in zip(net.weights, net.biases):
                fh.write(w.astype("<f4").tobytes())
                fh.write(b.astype("<f4").tobytes())


def load_networks(path) -> tuple[Mlp, ...]:
    """Read an SMNN checkpoint; raises FormatError naming the byte offset."""
    with open(path, "rb") as fh:
        data = fh.read()
    head = struct.Struct("<4sIB")
    if len(data) < head.size:
        raise FormatError(f"truncated header: {len(data)} bytes, need {head.size}")
    magic, version, count = head.unpack_from(data, 0)
    if magic != CHECKPOINT_MAGIC:
        raise FormatError(f"bad magic at offset 0: {magic!r}")
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"unsupported version {version} at offset 4")
    offset = head.size
    nets = []
    for _ in range(count):
        if offset + 1 > len(data):
            raise FormatError(f"truncated layer count at offset {offset}")
        (k,) = struct.unpack_from("<B", data, offset)
        offset += 1
        if offset + 4 * k > len(data):
            raise FormatError(f"truncated dims at offset {offset}")
        dims = tuple(int(d) for d in np.frombuffer(data, dtype="<u4", count=k, offset=offset))
        offset += 4 * k
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            need = 4 * (fan_in * fan_out + fan_out)
            if offset + need > len(data):
                raise FormatError(f"truncated parameters at offset {offset}")
            w = np.frombuffer(data, dtype="<f4", count=fan_in * fan_out, offset=offset)
            offset += 4 * fan_in * fan_out
            b = np.frombuffer(data, dtype="<f4", count=fan_out, offset=offset)
            offset += 4 * fan_out
            weights.append(w.reshape(fan_out, fan_in).astype(np.float64))
            biases.append(b.astype(np.float64))
        nets.append(Mlp(dims, weights, biases))
    if offset != len(data):
        raise FormatError(f"trailing {len(data) - offset} bytes at offset {offset}")
    return tuple(nets)
