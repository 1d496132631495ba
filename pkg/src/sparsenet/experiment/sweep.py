"""Construction x degree sweeps with resumable, deterministic CSV output.

Every cell (construction, degree, repeat) gets a 64-bit seed from
:func:`cell_seed`: the first 8 bytes (little-endian) of
``sha256("{base_seed}|{construction}|{degree}|{repeat}")``. Layer topology
and initialisation seeds are derived from it the same way, so adding degrees
or repeats to a sweep never changes the cells that already exist.

Rows are appended to ``sweep.partial.csv`` as cells finish (in whatever order
they finish); when all cells are present ``sweep.csv`` is written in cell
order. Rerunning with the same spec and output directory skips finished
cells. Wall-clock times go to ``timings.csv`` so that ``sweep.csv`` is
byte-for-byte reproducible.
"""

from __future__ import annotations

import csv
import hashlib
import io
import itertools
import json
import logging
import multiprocessing
import os
import time
from concurrent.futures import FIRST_COMPLETED, ProcessPoolExecutor, wait
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from sparsenet import dataset as ds
from sparsenet import network as nn
from sparsenet import spectral
from sparsenet.experiment.config import DatasetSpec, SweepSpec
from sparsenet.topology import ConstructionSpec, Kind, build

log = logging.getLogger(__name__)

PARTIAL_NAME = "sweep.partial.csv"
FINAL_NAME = "sweep.csv"
TIMINGS_NAME = "timings.csv"
SPEC_NAME = "sweep.spec.json"

LAYER_FIELDS = (
    "construction",
    "n",
    "m",
    "k",
    "seed",
    "edges",
    "density",
    "components",
    "lambda2",
    "second_largest_nonzero",
    "largest_nonzero",
    "w_max",
    "w_min",
    "w_std",
)


class SweepError(RuntimeError):
    pass


def derive_seed(*parts) -> int:
    text = "|".join(str(p) for p in parts)
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "little")


def cell_seed(base_seed: int, construction: str, degree: str, repeat: int) -> int:
    return derive_seed(base_seed, construction, degree, repeat)


@dataclass(frozen=True)
class Cell:
    index: int
    construction: Kind
    degree: str  # "30", "d0.3" or "30/10" in grid mode
    repeat: int
    seed: int


def degree_tokens(spec: SweepSpec) -> List[str]:
    values = [str(k) for k in spec.degrees] or [f"d{d!r}" for d in spec.densities]
    if spec.degree_mode == "tied":
        return values
    width = len(spec.resolved_sparse_layers())
    return ["/".join(combo) for combo in itertools.product(values, repeat=width)]


def cells(spec: SweepSpec) -> List[Cell]:
    out = []
    for kind in spec.constructions:
        for token in degree_tokens(spec):
            for r in range(spec.repeats):
                out.append(Cell(len(out), kind, token, r, cell_seed(spec.base_seed, kind.value, token, r)))
    return out


def _layer_k(token: str, m: int) -> int:
    if token.startswith("d"):
        return max(1, int(round(float(token[1:]) * m)))
    return int(token)


def cell_network_config(spec: SweepSpec, cell: Cell) -> nn.NetworkConfig:
    t = spec.training
    sizes = t.layer_sizes
    sparse = spec.resolved_sparse_layers()
    tokens = cell.degree.split("/")
    if len(tokens) == 1:
        tokens = tokens * len(sparse)
    specs = []
    for l in range(len(sizes) - 1):
        if l not in sparse or cell.construction is Kind.FULLY_CONNECTED:
            specs.append(ConstructionSpec(Kind.FULLY_CONNECTED))
            continue
        k = _layer_k(tokens[sparse.index(l)], sizes[l + 1])
        seed = derive_seed(cell.seed, "layer", l) if cell.construction.is_random else None
        specs.append(ConstructionSpec(cell.construction, k, seed))
    return nn.NetworkConfig(
        layer_sizes=sizes,
        topologies=tuple(specs),
        learning_rate=t.learning_rate,
        momentum=t.momentum,
        batch_size=t.batch_size,
        epochs=t.epochs,
        dropout_rates=t.dropout_rates,
        init_seed=derive_seed(cell.seed, "init"),
        glorot_fans=t.glorot_fans,
    )


def columns(spec: SweepSpec) -> List[str]:
    cols = ["cell", "label", "layer_sizes", "dropout", "construction", "degree", "repeat", "cell_seed"]
    cols += ["status", "error", "network_density"]
    for l in range(len(spec.training.layer_sizes) - 1):
        cols += [f"l{l}_{f}" for f in LAYER_FIELDS]
    cols += ["initial_accuracy"]
    cols += [f"loss_e{e}" for e in range(1, spec.training.epochs + 1)]
    cols += [f"acc_e{e}" for e in range(1, spec.training.epochs + 1)]
    cols += ["final_accuracy"]
    return cols


@lru_cache(maxsize=256)
def _spectral_cached(kind: str, k, seed, n: int, m: int) -> spectral.SpectralReport:
    return spectral.analyze(build(ConstructionSpec(Kind(kind), k, seed), n, m))


def layer_spectral(spec: ConstructionSpec, n: int, m: int) -> spectral.SpectralReport:
    k = None if spec.kind is Kind.FULLY_CONNECTED else spec.k
    return _spectral_cached(spec.kind.value, k, spec.seed, n, m)


@lru_cache(maxsize=8)
def load_dataset(dspec: DatasetSpec, sample_seed: int) -> Tuple[ds.Dataset, ds.Dataset]:
    if dspec.kind == "synthetic":
        test_pc = dspec.test_per_class or max(1, dspec.per_class // 4)
        full = ds.synthetic_blobs(
            dspec.classes, dspec.dim, dspec.per_class + test_pc, dspec.separation, dspec.seed
        )
        train_idx, test_idx = [], []
        for c in range(dspec.classes):
            idx = np.flatnonzero(full.labels == c)
            train_idx.append(idx[: dspec.per_class])
            test_idx.append(idx[dspec.per_class :])
        return full.take(np.sort(np.concatenate(train_idx))), full.take(np.sort(np.concatenate(test_idx)))
    train = ds.load_mnist(dspec.path, "train")
    test = ds.load_mnist(dspec.path, "test")
    if dspec.train_per_class:
        train = ds.subsample(train, dspec.train_per_class, derive_seed(sample_seed, "train"))
    if dspec.test_per_class:
        test = ds.subsample(test, dspec.test_per_class, derive_seed(sample_seed, "test"))
    return train, test


def load_data(spec: SweepSpec) -> Tuple[ds.Dataset, ds.Dataset]:
    return load_dataset(spec.dataset, spec.base_seed)


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


def run_cell(spec: SweepSpec, cell: Cell) -> Tuple[Dict[str, str], float]:
    """Train one cell; failures are captured in the row rather than raised."""
    start = time.perf_counter()
    sizes = spec.training.layer_sizes
    row = {
        "cell": cell.index,
        "label": spec.label,
        "layer_sizes": "-".join(str(s) for s in sizes),
        "dropout": "none" if not spec.training.dropout_rates else "/".join(repr(r) for r in spec.training.dropout_rates),
        "construction": cell.construction.value,
        "degree": cell.degree,
        "repeat": cell.repeat,
        "cell_seed": cell.seed,
        "status": "ok",
        "error": "",
    }
    try:
        cfg = cell_network_config(spec, cell)
        train, test = load_data(spec)
        net = nn.init_network(cfg)
        total_edges = 0
        for l, layer in enumerate(net.layers):
            t = layer.topology
            tspec = cfg.topologies[l]
            rep = layer_spectral(tspec, t.n, t.m)
            total_edges += t.edge_count
            row.update(
                {
                    f"l{l}_construction": t.construction,
                    f"l{l}_n": t.n,
                    f"l{l}_m": t.m,
                    f"l{l}_k": t.k,
                    f"l{l}_seed": t.seed,
                    f"l{l}_edges": t.edge_count,
                    f"l{l}_density": t.edge_count / (t.n * t.m),
                    f"l{l}_components": rep.component_count,
                    f"l{l}_lambda2": rep.algebraic_connectivity_standard,
                    f"l{l}_second_largest_nonzero": rep.second_largest_nonzero,
                    f"l{l}_largest_nonzero": rep.largest_nonzero,
                }
            )
        row["network_density"] = total_edges / sum(a * b for a, b in zip(sizes[:-1], sizes[1:]))
        record = nn.train(net, train, test, cfg)
        for l, st in enumerate(record.weight_stats):
            row.update({f"l{l}_w_max": st.max, f"l{l}_w_min": st.min, f"l{l}_w_std": st.std})
        row["initial_accuracy"] = record.initial_accuracy
        for e in record.epochs:
            row[f"loss_e{e.epoch}"] = e.train_loss
            row[f"acc_e{e.epoch}"] = e.test_accuracy
        row["final_accuracy"] = record.final_accuracy
    except Exception as exc:  # recorded in-row; one bad cell must not sink the sweep
        log.warning("cell %d failed: %s", cell.index, exc)
        row["status"] = "error"
        row["error"] = f"{type(exc).__name__}: {exc}".replace("\n", " ")
    return {k: _fmt(v) for k, v in row.items()}, time.perf_counter() - start


@dataclass
class SweepResult:
    columns: List[str]
    rows: List[Dict[str, str]] = field(default_factory=list)

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=self.columns, lineterminator="\n", restval="")
        w.writeheader()
        for r in self.rows:
            w.writerow(r)
        return buf.getvalue()

    @classmethod
    def from_csv_text(cls, text: str) -> "SweepResult":
        reader = csv.DictReader(io.StringIO(text))
        return cls(list(reader.fieldnames or []), [dict(r) for r in reader])

    @classmethod
    def read_csv(cls, path) -> "SweepResult":
        return cls.from_csv_text(Path(path).read_text(encoding="utf-8"))

    @classmethod
    def concat(cls, results: Sequence["SweepResult"]) -> "SweepResult":
        cols: List[str] = []
        for r in results:
            cols += [c for c in r.columns if c not in cols]
        return cls(cols, [row for r in results for row in r.rows])


def spec_fingerprint(spec: SweepSpec) -> str:
    return json.dumps(asdict(spec), sort_keys=True, default=str)


def _read_partial(path: Path, cols: List[str]) -> Dict[int, Dict[str, str]]:
    if not path.exists():
        return {}
    text = path.read_text(encoding="utf-8")
    if not text.endswith("\n"):
        # a write was cut off; drop the torn line
        text = text[: text.rfind("\n") + 1]
    if not text:
        return {}
    result = SweepResult.from_csv_text(text)
    if result.columns != cols:
        raise SweepError(f"{path} was written by a different sweep layout")
    done = {}
    for row in result.rows:
        if row.get("cell", "") != "" and None not in row.values():
            done[int(row["cell"])] = row
    return done


def completed_cells(spec: SweepSpec, out_dir) -> int:
    """Number of cells already recorded in ``out_dir`` for this sweep."""
    return len(_read_partial(Path(out_dir) / PARTIAL_NAME, columns(spec)))


def _rewrite_partial(path: Path, cols: List[str], rows) -> None:
    tmp = path.with_suffix(".tmp")
    tmp.write_text(SweepResult(cols, list(rows)).to_csv_text(), encoding="utf-8")
    os.replace(tmp, path)


def _worker(args):
    spec, cell = args
    return cell.index, run_cell(spec, cell)


def run_sweep(
    spec: SweepSpec,
    out_dir,
    workers: int = 1,
    on_cell: Optional[Callable[[Dict[str, str]], None]] = None,
) -> SweepResult:
    """Run (or resume) every cell of ``spec``, writing CSVs into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fingerprint = spec_fingerprint(spec)
    spec_path = out / SPEC_NAME
    if spec_path.exists() and spec_path.read_text(encoding="utf-8") != fingerprint:
        raise SweepError(f"{out} holds a different sweep; use a fresh output directory")
    spec_path.write_text(fingerprint, encoding="utf-8")

    cols = columns(spec)
    all_cells = cells(spec)
    partial_path = out / PARTIAL_NAME
    done = _read_partial(partial_path, cols)
    # normalise the partial file so appends start on a clean line
    _rewrite_partial(partial_path, cols, [done[i] for i in sorted(done)])
    pending = [c for c in all_cells if c.index not in done]
    log.info("sweep %s: %d cells, %d already done", spec.label, len(all_cells), len(done))

    timings_path = out / TIMINGS_NAME
    new_timings = not timings_path.exists()
    with open(partial_path, "a", newline="", encoding="utf-8") as fh, open(
        timings_path, "a", newline="", encoding="utf-8"
    ) as th:
        writer = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n", restval="")
        if new_timings:
            th.write("cell,seconds\n")

        def record(index, row, seconds):
            writer.writerow(row)
            fh.flush()
            os.fsync(fh.fileno())
            th.write(f"{index},{seconds!r}\n")
            th.flush()
            done[index] = row
            if on_cell is not None:
                on_cell(row)

        if workers <= 1 or len(pending) <= 1:
            for cell in pending:
                row, seconds = run_cell(spec, cell)
                record(cell.index, row, seconds)
        else:
            # spawn, not fork: the service runs sweeps from a background thread
            ctx = multiprocessing.get_context("spawn")
            with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
                futures = {pool.submit(_worker, (spec, c)) for c in pending}
                try:
                    while futures:
                        finished, futures = wait(futures, return_when=FIRST_COMPLETED)
                        for fut in sorted(finished, key=lambda f: f.result()[0]):
                            index, (row, seconds) = fut.result()
                            record(index, row, seconds)
                except BaseException:
                    for fut in futures:
                        fut.cancel()
                    raise

    result = SweepResult(cols, [done[c.index] for c in all_cells])
    (out / FINAL_NAME).write_text(result.to_csv_text(), encoding="utf-8")
    return result
