"""Thin HTTP client for the sparsenet service.

With a base URL it talks to a running server over httpx; without one it
drives the same FastAPI app in-process, so the CLI works with no server.
"""

from __future__ import annotations

import time
import warnings
from typing import Any, Callable, Dict, List, Optional

import httpx


class ServiceError(RuntimeError):
    def __init__(self, status: int, detail: Any):
        super().__init__(f"service returned {status}: {detail}")
        self.status = status
        self.detail = detail


class Client:
    def __init__(self, server: Optional[str] = None, timeout: float = 3600.0):
        if server:
            self._http: httpx.Client = httpx.Client(base_url=server.rstrip("/"), timeout=timeout)
        else:
            with warnings.catch_warnings():
                # starlette nags about its httpx backend; harmless in-process
                warnings.simplefilter("ignore")
                from fastapi.testclient import TestClient

            from sparsenet.api.app import create_app

            self._http = TestClient(create_app())

    def close(self):
        self._http.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _call(self, method: str, path: str, body: Optional[dict] = None) -> Dict[str, Any]:
        resp = self._http.request(method, path, json=body)
        if resp.status_code >= 400:
            try:
                detail = resp.json().get("detail")
            except ValueError:
                detail = resp.text
            raise ServiceError(resp.status_code, detail)
        return resp.json()

    def health(self) -> Dict[str, Any]:
        return self._call("GET", "/health")

    def topology(self, kind: str, n: int, m: int, k: Optional[int] = None, seed: Optional[int] = None):
        return self._call("POST", "/topologies", {"kind": kind, "n": n, "m": m, "k": k, "seed": seed})

    def analyze(self, edgelist: str, include_eigenvalues: bool = False) -> Dict[str, Any]:
        return self._call("POST", "/spectral", {"edgelist": edgelist, "include_eigenvalues": include_eigenvalues})

    def train(self, config: str, out_dir: str, profile=None, base_seed=None) -> Dict[str, Any]:
        body = {"config": config, "out_dir": out_dir, "profile": profile, "base_seed": base_seed}
        return self._call("POST", "/train", body)

    def start_sweep(self, config: str, out_dir: str, workers: int = 1, profile=None, base_seed=None):
        body = {
            "config": config,
            "out_dir": out_dir,
            "workers": workers,
            "profile": profile,
            "base_seed": base_seed,
        }
        return self._call("POST", "/sweeps", body)

    def sweep_status(self, job_id: str) -> Dict[str, Any]:
        return self._call("GET", f"/sweeps/{job_id}")

    def wait_sweep(
        self,
        job_id: str,
        poll: float = 0.5,
        on_progress: Optional[Callable[[Dict[str, Any]], None]] = None,
    ) -> Dict[str, Any]:
        last = None
        while True:
            job = self.sweep_status(job_id)
            if on_progress is not None and job["cells_done"] != last:
                on_progress(job)
                last = job["cells_done"]
            if job["state"] in ("done", "failed"):
                return job
            time.sleep(poll)

    def report(self, csv_paths: List[str], out_dir: str, label: Optional[str] = None) -> Dict[str, Any]:
        return self._call("POST", "/reports", {"csv_paths": csv_paths, "out_dir": out_dir, "label": label})
