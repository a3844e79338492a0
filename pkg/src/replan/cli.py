"""Command line front end: train, serve, simulate, oracle-check, gen-data.

Each subcommand is a thin wrapper over the library; all randomness flows
from explicit seeds so repeated invocations produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .classifier import TrainConfig, checkpoint_text, train_ensemble
from .schema import dump_schema, emit_csv, ingest_csv, parse_schema
from .session import Mode, Submode


def _cmd_train(args: argparse.Namespace) -> int:
    schema = parse_schema(Path(args.schema).read_text(encoding="utf-8"))
    dataset = ingest_csv(Path(args.data).read_text(encoding="utf-8"), schema)
    cfg = TrainConfig(
        learning_rate=args.learning_rate,
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=args.seed,
    )
    ensemble = train_ensemble(dataset, cfg)
    Path(args.out).write_text(checkpoint_text(ensemble), encoding="utf-8")
    from .classifier import dataset_matrix

    x, y = dataset_matrix(dataset)
    acc = float((ensemble.predict_batch(x) == y).mean())
    print(f"trained 2-member ensemble on {len(dataset)} rows; "
          f"training accuracy {acc:.4f}; checkpoint -> {args.out}")
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app, load_config

    config_path = args.config or os.environ.get("REPLAN_CONFIG")
    if not config_path:
        print("serve: no config given (use --config or REPLAN_CONFIG)",
              file=sys.stderr)
        return 1
    config = load_config(config_path)
    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
    return 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    from .fixtures import benchmark_profiles, build_bundle
    from .simulation import BenchmarkConfig, run_benchmark

    bundle = build_bundle(args.scale)
    profiles = benchmark_profiles(bundle)
    cfg = BenchmarkConfig(
        seeds=tuple(range(args.seed_base, args.seed_base + args.seeds)),
        rounds=args.rounds,
        mode=Mode(args.mode),
        submode=Submode(args.submode),
        beta=args.beta,
        rollouts=args.rollouts,
        stop_on_accept=args.stop_on_accept,
    )
    report = run_benchmark(cfg, bundle.context, profiles)
    Path(args.out).write_text(report.to_csv(), encoding="utf-8")
    print(report.summary_text())
    print(f"wrote {len(report.rows)} rows -> {args.out}")
    return 0


def _cmd_oracle_check(args: argparse.Namespace) -> int:
    from .simulation import oracle_check

    report = oracle_check(
        instances=args.instances, rollouts=args.rollouts, seed=args.seed
    )
    print(report.text(), end="")
    return 0 if report.pass_rate >= 0.95 and report.dominance_ok == report.instances else 2


def _cmd_gen_data(args: argparse.Namespace) -> int:
    from .simulation import LinearLabelRule, SyntheticDataSpec, gen_dataset

    spec_doc = json.loads(Path(args.spec).read_text(encoding="utf-8"))
    schema_path = spec_doc["schema_path"]
    if not Path(schema_path).is_absolute():
        schema_path = str(Path(args.spec).resolve().parent / schema_path)
    schema = parse_schema(Path(schema_path).read_text(encoding="utf-8"))
    rule = LinearLabelRule(
        weights=tuple(spec_doc["weights"]) if "weights" in spec_doc else None,
        threshold=spec_doc.get("threshold"),
    )
    dataset = gen_dataset(
        SyntheticDataSpec(
            schema=schema,
            n_rows=int(spec_doc["n_rows"]),
            label_rule=rule,
            label_noise=float(spec_doc.get("label_noise", 0.0)),
            seed=int(spec_doc.get("seed", 0)),
        )
    )
    Path(args.out).write_text(emit_csv(dataset), encoding="utf-8")
    positives = sum(dataset.labels)
    print(f"generated {len(dataset)} rows ({positives} positive) -> {args.out}")
    return 0


def _cmd_init_demo(args: argparse.Namespace) -> int:
    from .fixtures import build_bundle

    bundle = build_bundle(args.scale, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "schema.json").write_text(dump_schema(bundle.schema), encoding="utf-8")
    (out / "data.csv").write_text(emit_csv(bundle.dataset), encoding="utf-8")
    (out / "model.json").write_text(
        checkpoint_text(bundle.classifier), encoding="utf-8"
    )
    personas = [
        {"name": p.name, "narrative": p.narrative, "profile": dict(p.profile.values)}
        for p in bundle.personas
    ]
    (out / "personas.json").write_text(
        json.dumps(personas, indent=2), encoding="utf-8"
    )
    config = {
        "schema_path": "schema.json",
        "checkpoint_path": "model.json",
        "personas_path": "personas.json",
        "log_dir": "session-logs",
        "host": "127.0.0.1",
        "port": args.port,
        "guided_submode": "rate",
        "root_seed": args.seed,
    }
    (out / "config.json").write_text(json.dumps(config, indent=2), encoding="utf-8")
    print(f"demo assets ({args.scale} scale) -> {out}")
    print(f"start the server with: replan serve --config {out / 'config.json'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="replan",
        description="Interactive algorithmic recourse with preference elicitation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train the 2-member MLP ensemble")
    p.add_argument("--schema", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=40)
    p.add_argument("--learning-rate", type=float, default=0.25)
    p.add_argument("--batch-size", type=int, default=32)
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--config", default=None)
    p.set_defaults(fn=_cmd_serve)

    p = sub.add_parser("simulate", help="run the simulated-user benchmark")
    p.add_argument("--seeds", type=int, required=True)
    p.add_argument("--rounds", type=int, required=True)
    p.add_argument("--mode", choices=["guided", "exploratory"], required=True)
    p.add_argument("--submode", choices=["rate", "choice"], default="choice")
    p.add_argument("--out", required=True)
    p.add_argument("--scale", choices=["desk", "study"], default="desk")
    p.add_argument("--seed-base", type=int, default=0)
    p.add_argument("--beta", type=float, default=10.0)
    p.add_argument("--rollouts", type=int, default=400)
    p.add_argument("--stop-on-accept", action="store_true")
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("oracle-check", help="MCTS vs brute-force oracle suite")
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--rollouts", type=int, default=20000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_oracle_check)

    p = sub.add_parser("gen-data", help="generate a synthetic dataset CSV")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_gen_data)

    p = sub.add_parser("init-demo", help="write demo assets and a server config")
    p.add_argument("--out", required=True)
    p.add_argument("--scale", choices=["desk", "study"], default="study")
    p.add_argument("--seed", type=int, default=11)
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(fn=_cmd_init_demo)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
