"""HTTP service wrapping topology construction, spectral analysis, training and sweeps.

Sweeps are long-running, so ``POST /sweeps`` returns a job immediately and
the sweep runs on a background thread; poll ``GET /sweeps/{id}``.
"""

from __future__ import annotations

import logging
import threading
import uuid
from contextlib import asynccontextmanager
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict

from fastapi import FastAPI, HTTPException

from sparsenet import __version__, checkpoint, spectral
from sparsenet import network as nn
from sparsenet import topology as topo
from sparsenet.api import schemas
from sparsenet.experiment import config as cfgmod
from sparsenet.experiment import report as reportmod
from sparsenet.experiment import sweep as sweepmod
from sparsenet.experiment.sweep import SweepResult

log = logging.getLogger(__name__)


class JobManager:
    def __init__(self, max_jobs: int = 2):
        self._pool = ThreadPoolExecutor(max_workers=max_jobs, thread_name_prefix="sweep")
        self._jobs: Dict[str, schemas.SweepJob] = {}
        self._lock = threading.Lock()

    def get(self, job_id: str) -> schemas.SweepJob:
        with self._lock:
            job = self._jobs.get(job_id)
            return None if job is None else job.model_copy()

    def _update(self, job_id: str, **changes):
        with self._lock:
            job = self._jobs[job_id]
            self._jobs[job_id] = job.model_copy(update=changes)

    def submit(self, spec: cfgmod.SweepSpec, out_dir: str, workers: int) -> schemas.SweepJob:
        job_id = uuid.uuid4().hex[:12]
        job = schemas.SweepJob(
            id=job_id,
            state="queued",
            label=spec.label,
            cells_total=len(sweepmod.cells(spec)),
            cells_done=0,
            out_dir=out_dir,
        )
        with self._lock:
            self._jobs[job_id] = job
        self._pool.submit(self._run, job_id, spec, out_dir, workers)
        return job.model_copy()

    def _run(self, job_id, spec, out_dir, workers):
        done = 0

        def progress(_row):
            nonlocal done
            done += 1
            self._update(job_id, cells_done=done)

        self._update(job_id, state="running")
        try:
            done = sweepmod.completed_cells(spec, out_dir)
            self._update(job_id, cells_done=done)
            sweepmod.run_sweep(spec, out_dir, workers=workers, on_cell=progress)
        except Exception as exc:
            log.exception("sweep %s failed", job_id)
            self._update(job_id, state="failed", error=f"{type(exc).__name__}: {exc}")
            return
        self._update(
            job_id, state="done", csv_path=str(Path(out_dir) / sweepmod.FINAL_NAME), cells_done=done
        )

    def shutdown(self):
        self._pool.shutdown(wait=False, cancel_futures=True)


def _bad_request(exc: Exception) -> HTTPException:
    return HTTPException(status_code=422, detail=f"{type(exc).__name__}: {exc}")


def _build_topology(req: schemas.TopologyRequest) -> topo.BipartiteTopology:
    try:
        return topo.build(topo.ConstructionSpec(req.kind, req.k, req.seed), req.n, req.m)
    except topo.TopologyError as exc:
        raise _bad_request(exc)


def create_app() -> FastAPI:
    jobs = JobManager()

    @asynccontextmanager
    async def lifespan(_app):
        yield
        jobs.shutdown()

    app = FastAPI(title="sparsenet", version=__version__, lifespan=lifespan)
    app.state.jobs = jobs

    @app.get("/health", response_model=schemas.Health)
    def health():
        return schemas.Health(status="ok", version=__version__)

    @app.post("/topologies", response_model=schemas.TopologyResponse)
    def make_topology(req: schemas.TopologyRequest):
        t = _build_topology(req)
        return schemas.TopologyResponse(
            n=t.n,
            m=t.m,
            construction=t.construction,
            k=t.k,
            seed=t.seed,
            edge_count=t.edge_count,
            density=topo.density(t),
            edgelist=topo.dumps(t),
        )

    @app.post("/spectral", response_model=schemas.SpectralResponse)
    def analyze(req: schemas.AnalyzeRequest):
        if req.edgelist is not None:
            try:
                t = topo.loads(req.edgelist)
            except (topo.TopologyError, ValueError) as exc:
                raise _bad_request(exc)
        else:
            t = _build_topology(req.topology)
        try:
            rep = spectral.analyze(t)
        except spectral.EigenError as exc:
            raise HTTPException(status_code=500, detail=str(exc))
        row = spectral.report_csv_row(t, rep)
        return schemas.SpectralResponse(
            construction=t.construction,
            n=t.n,
            m=t.m,
            k=t.k,
            seed=t.seed,
            component_count=rep.component_count,
            lambda2=rep.algebraic_connectivity_standard,
            second_largest_nonzero=rep.second_largest_nonzero,
            largest_nonzero=rep.largest_nonzero,
            zero_tolerance=rep.zero_tolerance,
            eigenvalues=list(rep.eigenvalues) if req.include_eigenvalues else None,
            csv_header=",".join(spectral.REPORT_CSV_COLUMNS),
            csv_row=",".join(str(row[c]) for c in spectral.REPORT_CSV_COLUMNS),
        )

    @app.post("/train", response_model=schemas.TrainResponse)
    def train(req: schemas.TrainRequest):
        try:
            spec = cfgmod.parse_train(req.config, req.profile, req.base_seed)
            net = nn.init_network(spec.network)
        except (cfgmod.ConfigFileError, nn.ConfigError) as exc:
            raise _bad_request(exc)
        train_set, test_set = sweepmod.load_dataset(spec.dataset, spec.network.init_seed)
        record = nn.train(net, train_set, test_set)
        out = Path(req.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        ckpt, rec = out / "network.snn", out / "train_record.csv"
        checkpoint.save(net, ckpt)
        record.write_csv(rec)
        return schemas.TrainResponse(
            initial_loss=record.initial_loss,
            initial_accuracy=record.initial_accuracy,
            final_accuracy=record.final_accuracy,
            epochs=[schemas.EpochModel(**vars(e)) for e in record.epochs],
            weight_stats=[schemas.LayerStatsModel(**vars(s)) for s in record.weight_stats],
            seconds=record.seconds,
            checkpoint_path=str(ckpt),
            record_path=str(rec),
        )

    @app.post("/sweeps", response_model=schemas.SweepJob, status_code=202)
    def start_sweep(req: schemas.SweepRequest):
        try:
            spec = cfgmod.parse_sweep(req.config, req.profile, req.base_seed)
        except cfgmod.ConfigFileError as exc:
            raise _bad_request(exc)
        return jobs.submit(spec, req.out_dir, req.workers)

    @app.get("/sweeps/{job_id}", response_model=schemas.SweepJob)
    def sweep_status(job_id: str):
        job = jobs.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"no sweep job {job_id}")
        return job

    @app.post("/reports", response_model=schemas.ReportResponse)
    def make_report(req: schemas.ReportRequest):
        try:
            result = SweepResult.concat([SweepResult.read_csv(p) for p in req.csv_paths])
        except OSError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        paths = reportmod.write_report(result, req.out_dir, req.label)
        corr = reportmod.correlation_report(result, label=req.label)
        return schemas.ReportResponse(
            tables={k: str(v) for k, v in paths.items()},
            correlations=[
                schemas.CorrelationModel(
                    degree=c.degree, metric=c.metric, samples=c.samples, pearson_r=c.r, status=c.status
                )
                for c in corr
            ],
        )

    return app


app = create_app()
