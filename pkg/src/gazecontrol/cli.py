"""Command-line entry points.

Exit codes: 0 success, 1 usage error, 2 data error (malformed or inconsistent
input files), 3 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3


class _UsageError(SystemExit):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise _UsageError(EXIT_USAGE)


class DataError(ValueError):
    pass


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, ValueError) as exc:
        raise DataError(f"config {path}: {exc}")
    if not isinstance(cfg, dict):
        raise DataError(f"config {path}: expected a JSON object")
    return cfg


def _enumerate(variant: str):
    from . import scene
    return scene.enumerate_situations_2d() if variant == "2d" else scene.enumerate_situations_3d()


def cmd_scenarios(args) -> int:
    from . import scene
    specs = _enumerate(args.variant)
    if args.count_only:
        print(len(specs))
        return EXIT_OK
    if args.out_timeline:
        timeline = scene.compile_timeline(specs, fps=args.fps)
        scene.write_timeline_jsonl(timeline, args.out_timeline)
        print(f"wrote {len(timeline.frames)} frames ({timeline.duration_s:.0f} s) to {args.out_timeline}")
    else:
        counts = {}
        for s in specs:
            n = sum(p.present for p in s.character_specs)
            counts[n] = counts.get(n, 0) + 1
        print(f"{len(specs)} situations, by present characters: "
              + ", ".join(f"{k}: {v}" for k, v in sorted(counts.items())))
    return EXIT_OK


def cmd_synth(args) -> int:
    from . import features, oracle, scene
    specs = _enumerate(args.variant)
    timeline = scene.compile_timeline(specs)
    if args.personas_file:
        try:
            with open(args.personas_file) as fh:
                personas = oracle.personas_from_json(fh.read())
        except (OSError, ValueError, TypeError) as exc:
            raise DataError(f"{args.personas_file}: {exc}")
    else:
        personas = oracle.make_default_personas(
            args.personas, seed=args.seed, deterministic=args.deterministic,
            form=args.form, noise_rate=args.noise_rate, variation=args.variation,
            latency_ticks=args.latency)
    if args.save_personas:
        with open(args.save_personas, "w") as fh:
            fh.write(oracle.personas_to_json(personas))
    ds = oracle.synth_corpus(timeline, personas, m=args.m, step=args.step,
                             stagger=args.stagger)
    ds.meta["seed"] = args.seed
    features.write_dataset_jsonl(ds, args.out)
    print(f"wrote {len(ds)} examples to {args.out}")
    return EXIT_OK


def _read_dataset(path: str):
    from . import features
    errors = features.validate_dataset_jsonl(path)
    if errors:
        raise DataError(f"{path}: " + "; ".join(errors[:3]))
    return features.read_dataset_jsonl(path)


def _build_model(arch: str, m: int, L: int, C: int, seed: int):
    from . import models
    if arch == "lstm":
        return models.build_lstm(models.LstmConfig(m=m, L=L, C=C), seed=seed)
    return models.build_transformer(models.TransformerConfig(m=m, L=L, C=C), seed=seed)


def cmd_train(args) -> int:
    from . import features, models, train
    ds = _read_dataset(args.data)
    if args.eval:
        eval_ds = _read_dataset(args.eval)
        train_ds = ds
    else:
        try:
            plan = features.plan_folds(ds, k=10, seed=args.seed)
            train_idx, test_idx = features.fold_split(ds, plan, 0)
        except features.TooFewSituations:
            # short recordings: fall back to a seeded 80/20 example split
            rng = np.random.default_rng(args.seed)
            perm = rng.permutation(len(ds))
            cut = max(1, len(ds) // 5)
            test_idx, train_idx = perm[:cut], perm[cut:]
        train_ds, eval_ds = ds.subset(train_idx), ds.subset(test_idx)
        if len(train_ds) == 0 or len(eval_ds) == 0:
            raise DataError(f"{args.data}: not enough examples to split for eval")
    model = _build_model(args.arch, ds.m, ds.L, len(ds.label_names), args.seed)
    config = train.TrainConfig(lr=args.lr, batch_size=args.batch_size,
                               patience=args.patience, max_epochs=args.max_epochs,
                               seed=args.seed)
    model, history = train.fit(model, train_ds, eval_ds, config)
    models.save_checkpoint(model, args.out)
    if args.history:
        with open(args.history, "w") as fh:
            fh.write(history.to_csv())
    print(f"best epoch {history.best_epoch}: eval top-1 {history.best_eval_acc:.4f} "
          f"({history.stop_reason}); checkpoint at {args.out}")
    return EXIT_OK


def cmd_kfold(args) -> int:
    from . import features, metrics, train
    ds = _read_dataset(args.data)
    plan = features.plan_folds(ds, k=args.k, seed=args.seed)
    config = train.TrainConfig(lr=args.lr, batch_size=args.batch_size,
                               patience=args.patience, max_epochs=args.max_epochs,
                               seed=args.seed)
    builder = lambda seed: _build_model(args.arch, ds.m, ds.L, len(ds.label_names), seed)
    result = train.run_kfold(ds, plan, builder, config)
    for fold in result.folds:
        accs = " ".join(f"top{n}={fold.accuracies['test'][n]:.4f}"
                        for n in sorted(fold.accuracies["test"]))
        print(f"fold {fold.fold}: {accs} "
              f"(train {fold.train_examples}, test {fold.test_examples})")
    rows = metrics.build_report([result.report_input()])
    with open(args.out_prefix + ".json", "w") as fh:
        fh.write(json.dumps(result.report_input(), indent=2, sort_keys=True) + "\n")
    with open(args.out_prefix + ".csv", "w") as fh:
        fh.write(metrics.report_to_csv(rows))
    for fold in result.folds:
        with open(f"{args.out_prefix}.fold{fold.fold}.csv", "w") as fh:
            fh.write(fold.history.to_csv())
    mean, std = result.mean_std("test", 1)
    print(f"test top-1 mean {mean:.4f} +- {std:.4f}; report at {args.out_prefix}.csv")
    return EXIT_OK


def cmd_fit_baseline(args) -> int:
    from . import baselines
    ds = _read_dataset(args.data)
    config = baselines.GaConfig(pop=args.pop, generations=args.generations,
                                seed=args.seed)
    cue_mask = baselines.SUM_QUOTED_CUES if args.quoted_cues else None
    result = baselines.fit_ga(ds, args.kind, config, cue_mask=cue_mask)
    with open(args.out, "w") as fh:
        fh.write(result.weights.to_json() + "\n")
    if args.report:
        # report-input shape so `eval` can join baseline and neural rows
        entry = {"arch": f"ea-{args.kind}", "variant": ds.variant, "m": ds.m,
                 "folds": [{"train": {"1": result.train_accuracy},
                            "test": {"1": result.holdout_accuracy}}]}
        with open(args.report, "w") as fh:
            fh.write(json.dumps(entry, indent=2, sort_keys=True) + "\n")
    print(f"{args.kind} model: train {result.train_accuracy:.4f}, "
          f"holdout {result.holdout_accuracy:.4f}; weights at {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from . import metrics
    inputs = []
    for path in args.inputs:
        try:
            with open(path) as fh:
                inputs.append(json.load(fh))
        except (OSError, ValueError) as exc:
            raise DataError(f"{path}: {exc}")
    rows = metrics.build_report(inputs)
    if args.out_csv:
        with open(args.out_csv, "w") as fh:
            fh.write(metrics.report_to_csv(rows))
    if args.out_json:
        with open(args.out_json, "w") as fh:
            fh.write(metrics.report_to_json(rows))
    if args.out_plot:
        with open(args.out_plot, "w") as fh:
            fh.write(metrics.report_to_plot_data(rows))
    for r in rows:
        print(f"{r.arch} {r.variant} m={r.m} {r.split} top-{r.n}: "
              f"{r.mean:.4f} +- {r.std:.4f}")
    return EXIT_OK


def _make_predictor(args, variant: str, m: int):
    from . import baselines, controller, models
    if args.checkpoint:
        model = models.load_checkpoint(args.checkpoint)
        return controller.ModelPredictor(model)
    with open(args.weights) as fh:
        weights = baselines.HeuristicWeights.from_json(fh.read())
    return controller.BaselinePredictor(weights, variant, m)


def cmd_run(args) -> int:
    from . import controller, scene
    cfg = _load_config(args.config)
    timeline = scene.read_timeline_jsonl(args.timeline)
    m = args.m
    predictor = _make_predictor(args, timeline.variant, m or 1)
    if hasattr(predictor, "model"):
        m = predictor.model.config.m
    policy = controller.ControllerPolicy(**{
        k: float(v) for k, v in cfg.get("policy", {}).items()})
    ctl = controller.GazeController(predictor, timeline.variant, policy)
    with open(args.out, "w") as fh:
        commands = controller.run_stream(timeline, ctl, sink=fh, realtime=args.realtime)
    print(f"wrote {len(commands)} commands to {args.out}")
    return EXIT_OK


def cmd_serve(args) -> int:
    from . import controller, service
    cfg = _load_config(args.config)
    predictor = _make_predictor(args, args.variant, args.m or 1)
    if hasattr(predictor, "model"):
        variant = "2d" if predictor.model.config.L == 28 else "3d"
    else:
        variant = args.variant
    policy_kwargs = {k: float(v) for k, v in cfg.get("policy", {}).items()}

    def make_controller():
        return controller.GazeController(
            predictor, variant, controller.ControllerPolicy(**policy_kwargs))

    svc = service.SessionService(make_controller, variant, port=args.port,
                                 ws_port=args.ws_port, tick_s=args.tick_s,
                                 record_dir=args.record_dir)
    print(f"listening on tcp {svc.port}"
          + (f", ws {svc.ws_port}" if svc.ws_port else ""), flush=True)
    svc.serve_forever()
    return EXIT_OK


def cmd_validate(args) -> int:
    from . import features, models, scene
    failures = []
    if args.dataset:
        errors = features.validate_dataset_jsonl(args.dataset)
        if errors:
            failures.extend(f"{args.dataset}: {e}" for e in errors)
        else:
            print(f"{args.dataset}: OK")
    if args.checkpoint:
        try:
            model = models.load_checkpoint(args.checkpoint)
            print(f"{args.checkpoint}: OK ({model.arch}, {model.param_count()} parameters)")
        except (models.CorruptFile, models.VersionMismatch, models.ArchMismatch, OSError) as exc:
            failures.append(f"{args.checkpoint}: {exc}")
    if args.timeline:
        try:
            timeline = scene.read_timeline_jsonl(args.timeline)
            print(f"{args.timeline}: OK ({len(timeline.frames)} frames)")
        except (OSError, ValueError, KeyError) as exc:
            failures.append(f"{args.timeline}: {exc}")
    for f in failures:
        print(f, file=sys.stderr)
    return EXIT_DATA if failures else EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="gazecontrol",
                     description="Gaze-target prediction and head-pan control toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scenarios", help="enumerate social situations / compile timelines")
    p.add_argument("--variant", choices=["2d", "3d"], required=True)
    p.add_argument("--count-only", action="store_true")
    p.add_argument("--out-timeline", help="write the compiled timeline JSONL here")
    p.add_argument("--fps", type=int, default=None)
    p.set_defaults(func=cmd_scenarios)

    p = sub.add_parser("synth", help="generate a synthetic gaze corpus")
    p.add_argument("--variant", choices=["2d", "3d"], required=True)
    p.add_argument("--personas", type=int, default=15)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--step", type=int, default=1)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--deterministic", action="store_true")
    p.add_argument("--noise-rate", type=float, default=0.05)
    p.add_argument("--form", choices=["product", "sum"], default="product")
    p.add_argument("--variation", type=float, default=0.1,
                   help="relative spread of planted weights across personas")
    p.add_argument("--latency", type=int, default=None,
                   help="shared reaction delay in ticks")
    p.add_argument("--stagger", action="store_true",
                   help="offset each persona's window grid (denser coverage)")
    p.add_argument("--personas-file", help="JSON persona list to use instead of defaults")
    p.add_argument("--save-personas", help="write the personas used as JSON")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="fit one model on a dataset file")
    p.add_argument("--data", required=True)
    p.add_argument("--arch", choices=["lstm", "transformer"], required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--eval", help="eval dataset file (default: situation split)")
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--batch-size", type=int, default=20)
    p.add_argument("--patience", type=int, default=10)
    p.add_argument("--max-epochs", type=int, default=200)
    p.add_argument("--history", help="write per-epoch CSV here")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("kfold", help="situation-partitioned cross-validation")
    p.add_argument("--data", required=True)
    p.add_argument("--arch", choices=["lstm", "transformer"], required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--batch-size", type=int, default=20)
    p.add_argument("--patience", type=int, default=10)
    p.add_argument("--max-epochs", type=int, default=200)
    p.set_defaults(func=cmd_kfold)

    p = sub.add_parser("fit-baseline", help="fit a heuristic attention model with the GA")
    p.add_argument("--data", required=True)
    p.add_argument("--kind", choices=["product", "sum"], required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--pop", type=int, default=60)
    p.add_argument("--generations", type=int, default=200)
    p.add_argument("--quoted-cues", action="store_true",
                   help="restrict the sum model to talking/waving/entering/leaving")
    p.add_argument("--report", help="also write a report-input JSON for `eval`")
    p.set_defaults(func=cmd_fit_baseline)

    p = sub.add_parser("eval", help="aggregate k-fold outputs into a report")
    p.add_argument("--inputs", nargs="+", required=True)
    p.add_argument("--out-csv")
    p.add_argument("--out-json")
    p.add_argument("--out-plot", help="accuracy-vs-n series as JSON")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("run", help="replay a timeline through the controller")
    p.add_argument("--timeline", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--checkpoint")
    group.add_argument("--weights")
    p.add_argument("--m", type=int, help="window length for baseline predictors")
    p.add_argument("--out", required=True)
    p.add_argument("--realtime", action="store_true")
    p.add_argument("--config", help="JSON config file (policy defaults)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("serve", help="run the interactive session service")
    p.add_argument("--variant", choices=["2d", "3d"], default="2d")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--checkpoint")
    group.add_argument("--weights")
    p.add_argument("--m", type=int, help="window length for baseline predictors")
    p.add_argument("--port", type=int, default=7060)
    p.add_argument("--ws-port", type=int, default=None)
    p.add_argument("--tick-s", type=float, default=None)
    p.add_argument("--record-dir", default=".")
    p.add_argument("--config", help="JSON config file (policy defaults)")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("validate", help="check dataset / checkpoint / timeline files")
    p.add_argument("--dataset")
    p.add_argument("--checkpoint")
    p.add_argument("--timeline")
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        return exc.code
    try:
        return args.func(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except KeyboardInterrupt:
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
