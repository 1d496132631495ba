"""Command-line front end: ``sparsenet sweep|analyze|train|report|serve``.

Every subcommand except ``serve`` is a request to the service. Pass
``--server URL`` to use a running server; otherwise the app runs in-process.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from sparsenet.client import Client, ServiceError


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--out", default=".", metavar="DIR", help="output directory (default: .)")
    p.add_argument("--workers", type=int, default=1, metavar="N", help="parallel sweep cells")
    p.add_argument("--profile", choices=("desk", "paper"), help="override epochs and subsample sizes")
    p.add_argument("--base-seed", type=int, metavar="S", help="override the config's seed")
    p.add_argument("--server", metavar="URL", help="use a running service instead of in-process")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="sparsenet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("sweep", parents=[common], help="run a construction x degree sweep")
    p.add_argument("config", help="sweep config file")
    p = sub.add_parser("analyze", parents=[common], help="spectral report for one topology file")
    p.add_argument("topology", help="edge-list topology file")
    p.add_argument("--eigenvalues", action="store_true", help="also print the full spectrum")
    p = sub.add_parser("train", parents=[common], help="train one network and save a checkpoint")
    p.add_argument("config", help="train config file")
    p = sub.add_parser("report", parents=[common], help="figure tables and correlations from sweep CSVs")
    p.add_argument("csv", nargs="+", help="sweep.csv file(s)")
    p.add_argument("--label", help="only rows with this sweep label")
    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    return parser


def _abs(path: str) -> str:
    return str(Path(path).resolve())


def _sweep(client: Client, args) -> int:
    config = Path(args.config).read_text(encoding="utf-8")
    job = client.start_sweep(config, _abs(args.out), args.workers, args.profile, args.base_seed)
    print(f"sweep {job['label']}: {job['cells_total']} cells -> {job['out_dir']}", file=sys.stderr)

    def progress(j):
        print(f"  {j['cells_done']}/{j['cells_total']} cells", file=sys.stderr)

    job = client.wait_sweep(job["id"], on_progress=progress)
    if job["state"] == "failed":
        print(f"sweep failed: {job['error']}", file=sys.stderr)
        return 1
    print(job["csv_path"])
    return 0


def _analyze(client: Client, args) -> int:
    text = Path(args.topology).read_text(encoding="utf-8")
    rep = client.analyze(text, include_eigenvalues=args.eigenvalues)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_text = rep["csv_header"] + "\n" + rep["csv_row"] + "\n"
    (out / f"{Path(args.topology).stem}.spectral.csv").write_text(csv_text, encoding="utf-8")
    sys.stdout.write(csv_text)
    if args.eigenvalues:
        for v in rep["eigenvalues"]:
            print(repr(v))
    return 0


def _train(client: Client, args) -> int:
    config = Path(args.config).read_text(encoding="utf-8")
    res = client.train(config, _abs(args.out), args.profile, args.base_seed)
    print(f"initial accuracy {res['initial_accuracy']:.4f}")
    for e in res["epochs"]:
        print(f"epoch {e['epoch']:3d}  loss {e['train_loss']:.6f}  accuracy {e['test_accuracy']:.4f}")
    print(f"checkpoint {res['checkpoint_path']}")
    print(f"record {res['record_path']}")
    return 0


def _report(client: Client, args) -> int:
    res = client.report([_abs(p) for p in args.csv], _abs(args.out), args.label)
    for name, path in res["tables"].items():
        print(f"{name}: {path}")
    for c in res["correlations"]:
        r = "" if c["pearson_r"] is None else f"{c['pearson_r']:.4f}"
        print(f"  degree {c['degree']:>6}  {c['metric']:<24} n={c['samples']:<3} r={r:<8} {c['status']}")
    return 0


def _serve(args) -> int:
    import uvicorn

    uvicorn.run("sparsenet.api.app:app", host=args.host, port=args.port)
    return 0


COMMANDS = {"sweep": _sweep, "analyze": _analyze, "train": _train, "report": _report}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        return _serve(args)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    if args.workers < 1:
        print("--workers must be >= 1", file=sys.stderr)
        return 2
    try:
        with Client(args.server) as client:
            return COMMANDS[args.command](client, args)
    except ServiceError as exc:
        print(f"error: {exc.detail}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
