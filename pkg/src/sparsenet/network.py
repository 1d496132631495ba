"""Masked multilayer perceptron trained with minibatch SGD and Nesterov momentum.

Each weight layer keeps only the edges of its bipartite topology, stored as a
CSR matrix of shape (fan_out, fan_in); absent connections never exist, so
they cannot receive gradient. Activations are sigmoids everywhere, the loss
is mean squared error against one-hot targets.

Arrays flowing through the network are column stacks: a minibatch of B
inputs is a (features, B) array.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from sparsenet import topology as topo
from sparsenet.dataset import Dataset, one_hot_matrix
from sparsenet.linalg import CsrMatrix, DimensionMismatch, csr_from_topology, sp_outer, spmv, spmv_transpose
from sparsenet.topology import BipartiteTopology, ConstructionSpec, Kind

EVAL_CHUNK = 2048


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class NetworkConfig:
    layer_sizes: Tuple[int, ...]
    topologies: Tuple[ConstructionSpec, ...] = ()
    learning_rate: float = 0.01
    momentum: float = 0.9
    batch_size: int = 32
    epochs: int = 50
    # drop probability applied to the input of each weight layer; None disables dropout
    dropout_rates: Optional[Tuple[float, ...]] = None
    init_seed: int = 0
    glorot_fans: str = "full"

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        specs = tuple(self.topologies) or tuple(
            ConstructionSpec(Kind.FULLY_CONNECTED) for _ in range(len(sizes) - 1)
        )
        object.__setattr__(self, "topologies", specs)
        if self.dropout_rates is not None:
            object.__setattr__(self, "dropout_rates", tuple(float(r) for r in self.dropout_rates))
        self.validate()

    def validate(self):
        if len(self.layer_sizes) < 2 or min(self.layer_sizes) < 1:
            raise ConfigError("need at least an input and an output layer of positive size")
        if len(self.topologies) != len(self.layer_sizes) - 1:
            raise ConfigError(
                f"{len(self.layer_sizes) - 1} weight layers but {len(self.topologies)} topology specs"
            )
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        if not 0 <= self.momentum < 1:
            raise ConfigError("momentum must lie in [0, 1)")
        if self.batch_size < 1 or self.epochs < 0:
            raise ConfigError("batch_size must be >= 1 and epochs >= 0")
        if self.dropout_rates is not None:
            if len(self.dropout_rates) != len(self.topologies):
                raise ConfigError("one dropout rate per weight layer")
            if any(not 0 <= r < 1 for r in self.dropout_rates):
                raise ConfigError("dropout rates must lie in [0, 1)")
        if self.glorot_fans not in ("full", "degree"):
            raise ConfigError("glorot_fans is 'full' or 'degree'")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["layer_sizes"] = list(self.layer_sizes)
        d["topologies"] = [
            {"kind": s.kind.value, "k": s.k, "seed": s.seed} for s in self.topologies
        ]
        d["dropout_rates"] = None if self.dropout_rates is None else list(self.dropout_rates)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        d = dict(d)
        d["topologies"] = tuple(ConstructionSpec(**s) for s in d.get("topologies", ()))
        d["layer_sizes"] = tuple(d["layer_sizes"])
        if d.get("dropout_rates") is not None:
            d["dropout_rates"] = tuple(d["dropout_rates"])
        return cls(**d)


@dataclass
class SparseLayer:
    weights: CsrMatrix
    bias: np.ndarray
    topology: BipartiteTopology
    velocity_w: np.ndarray = None
    velocity_b: np.ndarray = None

    def __post_init__(self):
        if self.velocity_w is None:
            self.velocity_w = np.zeros(self.weights.nnz)
        if self.velocity_b is None:
            self.velocity_b = np.zeros(self.weights.rows)

    @property
    def fan_in(self) -> int:
        return self.weights.cols

    @property
    def fan_out(self) -> int:
        return self.weights.rows


@dataclass
class Network:
    config: NetworkConfig
    layers: List[SparseLayer]

    @property
    def input_size(self) -> int:
        return self.config.layer_sizes[0]

    @property
    def output_size(self) -> int:
        return self.config.layer_sizes[-1]

    def parameter_count(self) -> int:
        return sum(l.weights.nnz + l.bias.size for l in self.layers)


@dataclass
class ForwardPass:
    activations: List[np.ndarray]  # a0 = x, then sigmoid output of each layer
    inputs: List[np.ndarray]  # what each weight layer consumed (after dropout)
    keep_scales: List[Optional[np.ndarray]]  # dropout mask scaled by 1/(1 - rate), or None

    @property
    def output(self) -> np.ndarray:
        return self.activations[-1]


@dataclass
class Gradients:
    weights: List[CsrMatrix]
    biases: List[np.ndarray]


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    test_accuracy: float


@dataclass
class LayerStats:
    max: float
    min: float
    std: float


@dataclass
class TrainRecord:
    initial_loss: float
    initial_accuracy: float
    epochs: List[EpochRecord] = field(default_factory=list)
    weight_stats: List[LayerStats] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def final_accuracy(self) -> float:
        return self.epochs[-1].test_accuracy if self.epochs else self.initial_accuracy

    def to_dict(self) -> dict:
        return asdict(self)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "train_loss", "test_accuracy"])
            w.writerow([0, repr(self.initial_loss), repr(self.initial_accuracy)])
            for e in self.epochs:
                w.writerow([e.epoch, repr(e.train_loss), repr(e.test_accuracy)])


def sigmoid(z):
    # exp(-|z|) never overflows; the two branches keep full relative precision
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def layer_topologies(cfg: NetworkConfig) -> List[BipartiteTopology]:
    """Topology of each weight layer, left side = the layer feeding it."""
    sizes = cfg.layer_sizes
    return [topo.build(spec, sizes[l], sizes[l + 1]) for l, spec in enumerate(cfg.topologies)]


def init_network(cfg: NetworkConfig) -> Network:
    """Glorot-normal weights on the stored edges, zero biases and velocities."""
    try:
        topologies = layer_topologies(cfg)
    except topo.TopologyError as exc:
        raise ConfigError(str(exc)) from exc
    rng = np.random.Generator(np.random.PCG64(cfg.init_seed))
    layers = []
    for t in topologies:
        fan_in, fan_out = t.n, t.m
        if cfg.glorot_fans == "degree" and t.edge_count:
            fan_in, fan_out = t.edge_count / t.m, t.edge_count / t.n
        sigma = math.sqrt(2.0 / (fan_in + fan_out))
        weights = csr_from_topology(t.transpose(), lambda nnz: rng.normal(0.0, sigma, nnz))
        layers.append(SparseLayer(weights, np.zeros(t.m), t))
    return Network(cfg, layers)


def _columns(x, size: int, what: str) -> Tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] != size:
        raise DimensionMismatch(f"{what} has shape {x.shape}, expected leading dimension {size}")
    return x, single


def forward(net: Network, x, mode: str = "eval", dropout_seed=None, rng=None) -> ForwardPass:
    """Run the network on one input vector or a (features, B) stack.

    In ``"train"`` mode the configured dropout is applied with inverted
    scaling, using ``rng`` or a generator seeded from ``dropout_seed``.
    """
    rates = net.config.dropout_rates if mode == "train" else None
    if rates is not None and rng is None:
        rng = np.random.Generator(np.random.PCG64(0 if dropout_seed is None else dropout_seed))
    x, single = _columns(x, net.input_size, "x")
    fp = _forward(net, x, rates, rng)
    return _squeeze(fp) if single else fp


def _squeeze(fp: ForwardPass) -> ForwardPass:
    col = lambda a: None if a is None else a[:, 0]
    return ForwardPass([col(a) for a in fp.activations], [col(a) for a in fp.inputs], [col(s) for s in fp.keep_scales])


def _unsqueeze(fp: ForwardPass) -> ForwardPass:
    col = lambda a: a if a is None or a.ndim == 2 else a[:, None]
    return ForwardPass([col(a) for a in fp.activations], [col(a) for a in fp.inputs], [col(s) for s in fp.keep_scales])


def _forward(net: Network, a: np.ndarray, rates, rng) -> ForwardPass:
    activations, inputs, scales = [a], [], []
    for l, layer in enumerate(net.layers):
        scale = None
        if rates is not None and rates[l] > 0:
            keep = rng.random(a.shape) >= rates[l]
            scale = keep / (1.0 - rates[l])
            a = a * scale
        inputs.append(a)
        scales.append(scale)
        z = spmv(layer.weights, a) + layer.bias[:, None]
        a = sigmoid(z)
        activations.append(a)
    return ForwardPass(activations, inputs, scales)


def mse(output: np.ndarray, target: np.ndarray) -> float:
    return float(np.mean((output - target) ** 2))


def backward(net: Network, x, target, fp: Optional[ForwardPass] = None) -> Tuple[float, Gradients]:
    """Loss and its gradient, averaged over outputs and over the columns of ``x``.

    ``fp`` reuses a forward pass (needed to backpropagate through a dropout
    draw); by default an eval-mode pass is computed.
    """
    x, _ = _columns(x, net.input_size, "x")
    fp = _forward(net, x, None, None) if fp is None else _unsqueeze(fp)
    t, _ = _columns(target, net.output_size, "target")
    out = fp.output
    if t.shape != out.shape:
        raise DimensionMismatch(f"target {t.shape} does not match output {out.shape}")
    loss = mse(out, t)
    delta = (2.0 / out.size) * (out - t) * out * (1.0 - out)
    w_grads: List[CsrMatrix] = [None] * len(net.layers)
    b_grads: List[np.ndarray] = [None] * len(net.layers)
    for l in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[l]
        w_grads[l] = layer.weights.with_values(sp_outer(layer.weights, delta, fp.inputs[l]))
        b_grads[l] = delta.sum(axis=1)
        if l == 0:
            break
        back = spmv_transpose(layer.weights, delta)
        if fp.keep_scales[l] is not None:
            back = back * fp.keep_scales[l]
        a = fp.activations[l]
        delta = back * a * (1.0 - a)
    return loss, Gradients(w_grads, b_grads)


def sgd_nesterov_step(net: Network, x, target, rng=None, cfg: Optional[NetworkConfig] = None) -> float:
    """One Nesterov momentum step on a minibatch; returns the batch loss at the lookahead point.

    g = grad L(theta + mu v);  v <- mu v - lr g;  theta <- theta + v
    """
    cfg = cfg or net.config
    mu, lr = cfg.momentum, cfg.learning_rate
    saved = []
    for layer in net.layers:
        saved.append((layer.weights.values.copy(), layer.bias.copy()))
        layer.weights.values[:] = layer.weights.values + mu * layer.velocity_w
        layer.bias[:] = layer.bias + mu * layer.velocity_b
    x, _ = _columns(x, net.input_size, "x")
    fp = _forward(net, x, cfg.dropout_rates, rng)
    loss, grads = backward(net, x, target, fp)
    for layer, (w0, b0), gw, gb in zip(net.layers, saved, grads.weights, grads.biases):
        layer.velocity_w[:] = mu * layer.velocity_w - lr * gw.values
        layer.velocity_b[:] = mu * layer.velocity_b - lr * gb
        layer.weights.values[:] = w0 + layer.velocity_w
        layer.bias[:] = b0 + layer.velocity_b
    return loss


def predict(net: Network, features: np.ndarray) -> np.ndarray:
    """Class index per row of ``features``; ties go to the lowest index."""
    out = []
    for start in range(0, features.shape[0], EVAL_CHUNK):
        chunk = features[start : start + EVAL_CHUNK].T
        out.append(np.argmax(forward(net, chunk).output, axis=0))
    return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)


def evaluate(net: Network, data: Dataset) -> float:
    if len(data) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    return float(np.mean(predict(net, data.features) == data.labels))


def dataset_loss(net: Network, data: Dataset) -> float:
    total = 0.0
    for start in range(0, len(data), EVAL_CHUNK):
        x = data.features[start : start + EVAL_CHUNK].T
        t = one_hot_matrix(data.labels[start : start + EVAL_CHUNK], net.output_size)
        total += float(np.sum((forward(net, x).output - t) ** 2))
    return total / (len(data) * net.output_size)


def weight_statistics(net: Network) -> List[LayerStats]:
    """Max, min and population std of the stored weights of each layer."""
    stats = []
    for layer in net.layers:
        v = layer.weights.values
        if v.size == 0:
            stats.append(LayerStats(0.0, 0.0, 0.0))
        else:
            stats.append(LayerStats(float(v.max()), float(v.min()), float(v.std())))
    return stats


def epoch_generators(init_seed: int, epoch: int):
    """Shuffle and dropout generators for one epoch, derived from (init_seed, epoch)."""
    ss = np.random.SeedSequence([init_seed & 0xFFFFFFFFFFFFFFFF, epoch])
    shuffle_ss, dropout_ss = ss.spawn(2)
    return np.random.Generator(np.random.PCG64(shuffle_ss)), np.random.Generator(np.random.PCG64(dropout_ss))


def train(
    net: Network,
    train_set: Dataset,
    test_set: Dataset,
    cfg: Optional[NetworkConfig] = None,
    on_epoch=None,
) -> TrainRecord:
    """Shuffle, minibatch and step for ``cfg.epochs`` epochs, scoring the test set after each."""
    cfg = cfg or net.config
    if len(train_set) == 0 or len(test_set) == 0:
        raise ValueError("training and test sets must be non-empty")
    if train_set.input_dim != net.input_size or test_set.input_dim != net.input_size:
        raise DimensionMismatch("dataset dimension does not match the input layer")
    if train_set.class_count > net.output_size:
        raise DimensionMismatch("more classes than output units")
    start = time.perf_counter()
    record = TrainRecord(dataset_loss(net, train_set), evaluate(net, test_set))
    targets = one_hot_matrix(train_set.labels, net.output_size)
    features = train_set.features
    n = len(train_set)
    for epoch in range(1, cfg.epochs + 1):
        shuffle_rng, dropout_rng = epoch_generators(cfg.init_seed, epoch)
        order = shuffle_rng.permutation(n)
        total = 0.0
        for b in range(0, n, cfg.batch_size):
            idx = order[b : b + cfg.batch_size]
            loss = sgd_nesterov_step(net, features[idx].T, targets[:, idx], dropout_rng, cfg)
            total += loss * idx.size
        record.epochs.append(EpochRecord(epoch, total / n, evaluate(net, test_set)))
        if on_epoch is not None:
            on_epoch(record.epochs[-1])
    record.weight_stats = weight_statistics(net)
    record.seconds = time.perf_counter() - start
    return record
