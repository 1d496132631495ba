"""Plain-text experiment configuration (INI sections, ``key = value`` lines).

Example sweep file::

    [dataset]
    kind = mnist                 ; or: synthetic
    path = /data/mnist           ; directory holding the four IDX files
    train_per_class = 1000       ; optional class-balanced subsample
    test_per_class = 200

    [network]
    layer_sizes = 784, 100, 10
    learning_rate = 0.01
    momentum = 0.9
    batch_size = 32
    epochs = 10
    dropout = 0.2, 0.5           ; drop rate on the input of each weight layer
    glorot_fans = full

    [sweep]
    label = fig2
    constructions = RegularRotating, FullyConnected
    degrees = 10, 30             ; or: densities = 0.1, 0.3
    degree_mode = tied           ; or: grid (one degree per sparse layer)
    sparse_layers = hidden       ; hidden | all | explicit indices "0, 1"
    repeats = 3
    base_seed = 0

A synthetic dataset uses ``classes``, ``dim``, ``per_class``,
``test_per_class``, ``separation`` and ``seed`` instead of ``path``.

A single-network file for ``train`` has ``[dataset]`` and ``[network]``
plus ``topologies = RegularRotating:30, FullyConnected`` (``Kind:k:seed``
per weight layer) and ``init_seed`` in ``[network]``.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Tuple, Union

from sparsenet.network import NetworkConfig
from sparsenet.topology import ConstructionSpec, Kind

PROFILES = {
    "desk": {"epochs": 10, "train_per_class": 1000, "test_per_class": 200},
    "paper": {"epochs": 50, "train_per_class": None, "test_per_class": None},
}


class ConfigFileError(ValueError):
    pass


@dataclass(frozen=True)
class DatasetSpec:
    kind: str = "mnist"
    path: Optional[str] = None
    train_per_class: Optional[int] = None
    test_per_class: Optional[int] = None
    classes: int = 2
    dim: int = 2
    per_class: int = 100
    separation: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("mnist", "synthetic"):
            raise ConfigFileError(f"dataset kind must be mnist or synthetic, not {self.kind!r}")
        if self.kind == "mnist" and not self.path:
            raise ConfigFileError("an mnist dataset needs a path")


@dataclass(frozen=True)
class TrainingSpec:
    layer_sizes: Tuple[int, ...] = (784, 100, 10)
    learning_rate: float = 0.01
    momentum: float = 0.9
    batch_size: int = 32
    epochs: int = 10
    dropout_rates: Optional[Tuple[float, ...]] = None
    glorot_fans: str = "full"


@dataclass(frozen=True)
class SweepSpec:
    dataset: DatasetSpec
    training: TrainingSpec
    constructions: Tuple[Kind, ...]
    degrees: Tuple[int, ...] = ()
    densities: Tuple[float, ...] = ()
    degree_mode: str = "tied"
    sparse_layers: Union[str, Tuple[int, ...]] = "hidden"
    repeats: int = 1
    base_seed: int = 0
    label: str = "sweep"

    def __post_init__(self):
        if not self.constructions:
            raise ConfigFileError("at least one construction is required")
        if bool(self.degrees) == bool(self.densities):
            raise ConfigFileError("give exactly one of degrees or densities")
        if self.repeats < 1:
            raise ConfigFileError("repeats must be >= 1")
        if self.degree_mode not in ("tied", "grid"):
            raise ConfigFileError("degree_mode is tied or grid")
        if any(not 0 < d <= 1 for d in self.densities):
            raise ConfigFileError("densities must lie in (0, 1]")

    def resolved_sparse_layers(self) -> Tuple[int, ...]:
        count = len(self.training.layer_sizes) - 1
        if self.sparse_layers == "all":
            return tuple(range(count))
        if self.sparse_layers == "hidden":
            # the last layer stays fully connected, except in a single-layer net
            return tuple(range(max(count - 1, 1)))
        layers = tuple(self.sparse_layers)
        if any(not 0 <= l < count for l in layers):
            raise ConfigFileError(f"sparse layer index outside [0, {count})")
        return layers


@dataclass(frozen=True)
class TrainSpec:
    dataset: DatasetSpec
    network: NetworkConfig


def _ints(text: str) -> Tuple[int, ...]:
    return tuple(int(v) for v in _items(text))


def _floats(text: str) -> Tuple[float, ...]:
    return tuple(float(v) for v in _items(text))


def _items(text: str):
    return [v.strip() for v in text.replace(";", ",").split(",") if v.strip()]


def _parser(text: str) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigFileError(str(exc)) from exc
    return cp


def _dataset(cp, profile: Optional[str]) -> DatasetSpec:
    if not cp.has_section("dataset"):
        raise ConfigFileError("missing [dataset] section")
    s = cp["dataset"]
    kw = {"kind": s.get("kind", "mnist").strip().lower()}
    for key in ("path",):
        if key in s:
            kw[key] = s[key]
    for key in ("train_per_class", "test_per_class", "classes", "dim", "per_class", "seed"):
        if key in s:
            kw[key] = None if s[key].strip().lower() in ("", "none", "all") else s.getint(key)
    if "separation" in s:
        kw["separation"] = s.getfloat("separation")
    if profile:
        for key in ("train_per_class", "test_per_class"):
            if kw["kind"] == "mnist":
                kw[key] = PROFILES[profile][key]
    elif kw["kind"] == "mnist":
        for key in ("train_per_class", "test_per_class"):
            kw.setdefault(key, PROFILES["desk"][key])
    return DatasetSpec(**kw)


def _training(cp, profile: Optional[str]) -> TrainingSpec:
    s = cp["network"] if cp.has_section("network") else {}
    kw = {}
    if "layer_sizes" in s:
        kw["layer_sizes"] = _ints(s["layer_sizes"])
    for key in ("learning_rate", "momentum"):
        if key in s:
            kw[key] = float(s[key])
    for key in ("batch_size", "epochs"):
        if key in s:
            kw[key] = int(s[key])
    if profile:
        kw["epochs"] = PROFILES[profile]["epochs"]
    if "dropout" in s and s["dropout"].strip().lower() not in ("", "none"):
        kw["dropout_rates"] = _floats(s["dropout"])
    if "glorot_fans" in s:
        kw["glorot_fans"] = s["glorot_fans"].strip()
    return TrainingSpec(**kw)


def parse_sweep(source: str, profile: Optional[str] = None, base_seed: Optional[int] = None) -> SweepSpec:
    """Parse sweep config text. An explicit profile overrides epochs and subsample sizes."""
    if profile is not None and profile not in PROFILES:
        raise ConfigFileError(f"unknown profile {profile!r}")
    cp = _parser(source)
    if not cp.has_section("sweep"):
        raise ConfigFileError("missing [sweep] section")
    s = cp["sweep"]
    sparse = s.get("sparse_layers", "hidden").strip().lower()
    spec = SweepSpec(
        dataset=_dataset(cp, profile),
        training=_training(cp, profile),
        constructions=tuple(Kind.parse(v) for v in _items(s.get("constructions", ""))),
        degrees=_ints(s.get("degrees", "")),
        densities=_floats(s.get("densities", "")),
        degree_mode=s.get("degree_mode", "tied").strip().lower(),
        sparse_layers=sparse if sparse in ("hidden", "all") else _ints(sparse),
        repeats=s.getint("repeats", 1),
        base_seed=s.getint("base_seed", 0),
        label=s.get("label", "sweep").strip(),
    )
    if base_seed is not None:
        spec = replace(spec, base_seed=base_seed)
    return spec


def parse_construction(token: str) -> ConstructionSpec:
    parts = [p.strip() for p in token.split(":")]
    kind = Kind.parse(parts[0])
    k = int(parts[1]) if len(parts) > 1 and parts[1] else None
    seed = int(parts[2].removeprefix("seed=")) if len(parts) > 2 else None
    return ConstructionSpec(kind, k, seed)


def parse_train(source: str, profile: Optional[str] = None, base_seed: Optional[int] = None) -> TrainSpec:
    cp = _parser(source)
    if not cp.has_section("network"):
        raise ConfigFileError("missing [network] section")
    t = _training(cp, profile)
    s = cp["network"]
    count = len(t.layer_sizes) - 1
    tokens = _items(s.get("topologies", ""))
    specs = tuple(parse_construction(tok) for tok in tokens) or tuple(
        ConstructionSpec(Kind.FULLY_CONNECTED) for _ in range(count)
    )
    seed = s.getint("init_seed", 0) if base_seed is None else base_seed
    net = NetworkConfig(
        layer_sizes=t.layer_sizes,
        topologies=specs,
        learning_rate=t.learning_rate,
        momentum=t.momentum,
        batch_size=t.batch_size,
        epochs=t.epochs,
        dropout_rates=t.dropout_rates,
        init_seed=seed,
        glorot_fans=t.glorot_fans,
    )
    return TrainSpec(_dataset(cp, profile), net)


def load_sweep(path, profile: Optional[str] = None, base_seed: Optional[int] = None) -> SweepSpec:
    return parse_sweep(Path(path).read_text(encoding="utf-8"), profile, base_seed)


def load_train(path, profile: Optional[str] = None, base_seed: Optional[int] = None) -> TrainSpec:
    return parse_train(Path(path).read_text(encoding="utf-8"), profile, base_seed)
