"""Command-line client for the service API.

Every subcommand is a thin wrapper around one endpoint.  By default the
app is driven in-process; --server points the same requests at a running
instance instead.  Exit codes: 0 success, 2 config, 3 io, 4 numeric,
5 inconclusive.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Any

EXIT_CODES = {"config": 2, "io": 3, "numeric": 4, "inconclusive": 5}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seivote",
        description="Specific emitter identification by sequential voting on bispectrum features",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, output_dir=True):
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--seed", type=int, help="override the root seed")
        p.add_argument("--preset", choices=["desk", "paper"], help="configuration preset")
        p.add_argument("--threshold", type=float, help="override the acceptable error threshold")
        p.add_argument("--rule", choices=["preponderance", "favored"], help="stopping rule")
        p.add_argument("--server", help="base URL of a running service (default: in-process)")
        if output_dir:
            p.add_argument("--output-dir", default="seivote_out", help="where results are written")

    common(sub.add_parser("generate", help="synthesize per-case iq32 recordings"))
    common(sub.add_parser("featurize", help="build the train/val/test feature dataset"))

    p = sub.add_parser("train", help="train the softmax baseline on a dataset")
    common(p)
    p.add_argument("--dataset-dir", required=True)

    p = sub.add_parser("identify", help="identify the emitter behind a signal file")
    common(p)
    p.add_argument("--model", required=True, help="trained model file")
    p.add_argument("--signal", required=True, help="iq32 signal file")

    for name in ("sweep-accuracy", "sweep-certainty"):
        p = sub.add_parser(name, help=f"run the {name.split('-')[1]} sweep")
        common(p)
        p.add_argument(
            "--voter",
            choices=["confusion", "model"],
            default="confusion",
            help="synthetic confusion voter or trained model over the test split",
        )
        p.add_argument("--model", help="model file (voter=model)")
        p.add_argument("--dataset-dir", help="dataset directory (voter=model)")

    p = sub.add_parser("report", help="summarize sweep results and fit votes vs log10 error")
    common(p)
    p.add_argument("--results-dir", required=True)

    return parser


def _load_config(path: str | None) -> dict[str, Any]:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise SystemExit(_fail("io", f"config file not found: {path}"))
    except json.JSONDecodeError as exc:
        raise SystemExit(_fail("config", f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}"))


def _fail(category: str, message: str) -> int:
    print(f"error [{category}]: {message}", file=sys.stderr)
    return EXIT_CODES.get(category, 1)


def _client(server: str | None):
    import httpx

    if server:
        return httpx.Client(base_url=server, timeout=None)
    # In-process mode: drive the ASGI app directly.
    from fastapi.testclient import TestClient

    from .service.app import create_app

    return TestClient(create_app(), raise_server_exceptions=False)


def _post(args, endpoint: str, payload: dict[str, Any]) -> dict[str, Any]:
    payload.setdefault("config", _load_config(args.config))
    for key in ("seed", "preset", "threshold", "rule"):
        value = getattr(args, key, None)
        if value is not None:
            payload[key] = value
    with _client(args.server) as client:
        response = client.post(endpoint, json=payload)
        body = response.json()
        if response.status_code != 200:
            detail = body.get("detail", {})
            if isinstance(detail, dict) and "category" in detail:
                raise SystemExit(_fail(detail["category"], detail["message"]))
            raise SystemExit(_fail("config", json.dumps(detail)))
        return body


def _print_rows(rows: list[dict]) -> None:
    print("threshold     trials  wrong  inconclusive  max_votes  mean_votes")
    for r in rows:
        print(
            f"{r['threshold']:<12.6g} {r['trials']:>6}  {r['wrong']:>5}  "
            f"{r['inconclusive']:>12}  {r['max_votes_used']:>9}  {r['mean_votes_used']:>10.3f}"
        )


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)

    if args.command == "generate":
        body = _post(args, "/signals/generate", {"output_dir": args.output_dir})
        print(f"wrote {len(body['signal_paths'])} signals; manifest: {body['manifest_path']}")
    elif args.command == "featurize":
        body = _post(args, "/dataset/build", {"output_dir": args.output_dir})
        counts = ", ".join(f"{k}={v}" for k, v in body["counts"].items())
        print(f"dataset at {body['dataset_dir']} ({counts})")
    elif args.command == "train":
        body = _post(
            args,
            "/model/train",
            {"dataset_dir": args.dataset_dir, "output_dir": args.output_dir},
        )
        per_class = ", ".join(f"{a:.3f}" for a in body["per_class_accuracy"])
        print(f"model: {body['model_path']}")
        print(f"validation accuracy: {body['validation_accuracy']:.4f} (per class: {per_class})")
    elif args.command == "identify":
        body = _post(
            args,
            "/identify",
            {"model_path": args.model, "signal_path": args.signal, "output_dir": args.output_dir},
        )
        status = "conclusive" if body["conclusive"] else "inconclusive"
        print(
            f"winner: emitter {body['winner']} ({status}, rule={body['rule']}, "
            f"votes={body['votes_used']}, certainty={body['achieved_certainty']:.9f})"
        )
        if not body["conclusive"]:
            return _fail(
                "inconclusive",
                f"no category reached certainty {1 - body['acceptable_error']} "
                f"within {body['votes_used']} votes",
            )
    elif args.command in ("sweep-accuracy", "sweep-certainty"):
        endpoint = "/sweep/accuracy" if args.command == "sweep-accuracy" else "/sweep/certainty"
        body = _post(
            args,
            endpoint,
            {
                "output_dir": args.output_dir,
                "voter": args.voter,
                "model_path": args.model,
                "dataset_dir": args.dataset_dir,
            },
        )
        _print_rows(body["rows"])
        print(f"csv: {body['csv_path']}")
    elif args.command == "report":
        body = _post(
            args, "/report", {"results_dir": args.results_dir, "output_dir": args.output_dir}
        )
        for line in body["lines"]:
            print(line)
    return 0


if __name__ == "__main__":
    sys.exit(main())
