"""Command-line lifecycle driver: generate, train, evaluate, export, serve.

One executable with verb subcommands. Every run resolves a flat RunConfig
(defaults <- config file <- --set overrides <- dedicated flags), echoes it
into the output directory for provenance, and emits progress as JSON lines
on stdout. Exit code 0 only on full success.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from mmforecast.config import ConfigError, RunConfig, apply_overrides, load_config, render_config
from mmforecast.corpus import MotionCorpus, load_corpus, save_corpus
from mmforecast.embedding import export_density
from mmforecast.manifest import check_manifest, write_manifest
from mmforecast.mining import (
    MultimodalGTIndex,
    load_index,
    mine_against,
    mine_multimodal_gt,
    save_index,
    split_by_sequence,
    window_corpus,
)
from mmforecast.motionmap import heatmap_to_pgm, heatmap_to_tsv
from mmforecast.pipeline import (
    evaluate,
    forecast,
    load_models,
    new_models,
    run_training,
    save_models,
)
from mmforecast.service import build_session, make_server
from mmforecast.synthetic import generate_synthetic_corpus


def _emit(record: dict) -> None:
    print(json.dumps(record, sort_keys=True))


def _echo_config(config: RunConfig) -> None:
    config.out_path.mkdir(parents=True, exist_ok=True)
    (config.out_path / "config_resolved.txt").write_text(
        render_config(config), encoding="utf-8"
    )


def _index_path(config: RunConfig, name: str) -> Path:
    return config.out_path / f"index_{name}.mmindex"


def _datasets(config: RunConfig, corpus: MotionCorpus):
    samples = window_corpus(
        corpus, config.observed_frames, config.future_frames, config.window_stride
    )
    train, test = split_by_sequence(corpus, samples, config.test_fraction)
    return samples, train, test


def cmd_generate(config: RunConfig) -> int:
    config.validate()
    config.out_path.mkdir(parents=True, exist_ok=True)
    corpus = generate_synthetic_corpus(config.generator_config(), config.seed)
    save_corpus(corpus, config.corpus_path)
    samples, train, test = _datasets(config, corpus)
    _emit(
        {
            "stage": "generate",
            "sequences": len(corpus.sequences),
            "samples": len(samples),
            "train": len(train),
            "test": len(test),
        }
    )
    index_train = mine_multimodal_gt(train, corpus.topology, config.tau)
    save_index(index_train, _index_path(config, "train"))
    members_tm = mine_against(test, train, corpus.topology, config.tau, ensure_nonempty=True)
    save_index(
        MultimodalGTIndex(tau=config.tau, members=members_tm),
        _index_path(config, "eval_train-mined"),
    )
    members_em = mine_against(test, test, corpus.topology, config.tau, ensure_nonempty=True)
    save_index(
        MultimodalGTIndex(tau=config.tau, members=members_em),
        _index_path(config, "eval_test-mined"),
    )
    _emit(
        {
            "stage": "mine",
            "train_members_mean": sum(len(v) for v in index_train.members.values())
            / max(len(index_train.members), 1),
        }
    )
    _echo_config(config)
    return 0


def _load_models_for(config: RunConfig, require_complete: bool):
    if not config.checkpoint_path.is_file():
        raise FileNotFoundError(
            f"no checkpoint at {config.checkpoint_path}; run 'train' first"
        )
    models = load_models(config.checkpoint_path)
    if require_complete:
        models.require_complete()
    return models


def cmd_train(config: RunConfig, resume: bool) -> int:
    config.validate()
    corpus = load_corpus(config.corpus_path)
    _, train, _ = _datasets(config, corpus)
    index = load_index(_index_path(config, "train"))
    if resume and config.checkpoint_path.is_file():
        models = load_models(config.checkpoint_path)
        _emit({"stage": "resume", "completed": models.completed_stages})
    else:
        models = new_models(
            config.autoencoder_config(),
            config.heatmap_config(),
            config.map_config(),
            corpus.topology,
            fps=config.fps,
        )
    fresh_digest = new_models(
        config.autoencoder_config(),
        config.heatmap_config(),
        config.map_config(),
        corpus.topology,
        fps=config.fps,
    ).digest()
    if models.digest() != fresh_digest:
        raise ConfigError("checkpoint configuration does not match the resolved config")
    run_training(
        models,
        train,
        index,
        config.training_params(),
        checkpoint_path=config.checkpoint_path,
        progress=lambda stage, payload: _emit({"stage": stage, **payload}),
    )
    save_models(config.checkpoint_path, models, extra_meta={"run_config": render_config(config)})
    _echo_config(config)
    _emit({"stage": "train_complete", "checkpoint": str(config.checkpoint_path)})
    return 0


def cmd_evaluate(config: RunConfig) -> int:
    config.validate()
    models = _load_models_for(config, require_complete=True)
    corpus = load_corpus(config.corpus_path)
    _, train, test = _datasets(config, corpus)
    pool = train if config.protocol == "train-mined" else test
    index = load_index(_index_path(config, f"eval_{config.protocol}"))
    report = evaluate(models, test, pool, index, config.budget, config.protocol)
    config.report_path("txt").write_text(report.render_text(), encoding="utf-8")
    config.report_path("jsonl").write_text(report.to_records(), encoding="utf-8")
    _echo_config(config)
    sys.stdout.write(report.render_text())
    return 0


def cmd_export(config: RunConfig, what: str) -> int:
    config.validate()
    models = _load_models_for(config, require_complete=True)
    corpus = load_corpus(config.corpus_path)
    _, train, test = _datasets(config, corpus)
    export_dir = config.export_dir
    export_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    base_cmd = f"mmforecast export --out {config.out_dir}"

    if what in ("density", "all"):
        labels = [s.action_label for s in train]
        name = "density.tsv"
        (export_dir / name).write_text(
            export_density(models.embedding, labels), encoding="utf-8"
        )
        entries.append(
            {
                "export": name,
                "analogue": "latent-density-map",
                "command": f"{base_cmd} --what density",
            }
        )

    if what in ("overlays", "all"):
        for sample in test[:3]:
            heatmap = models.heatmap.predict(sample.x)
            pgm = f"overlay_{sample.id}.pgm"
            (export_dir / pgm).write_text(heatmap_to_pgm(heatmap), encoding="utf-8")
            entries.append(
                {
                    "export": pgm,
                    "analogue": "motionmap-mode-overlay",
                    "command": f"{base_cmd} --what overlays",
                }
            )
            tsv = f"overlay_{sample.id}_modes.tsv"
            ranked = forecast(models, sample.x, config.budget)
            lines = ["rank\trow\tcol\tconfidence"] + [
                f"{r.rank}\t{r.mode.cell[0]}\t{r.mode.cell[1]}\t{r.mode.confidence:.6f}"
                for r in ranked
            ]
            (export_dir / tsv).write_text("\n".join(lines) + "\n", encoding="utf-8")
            entries.append(
                {
                    "export": tsv,
                    "analogue": "motionmap-mode-overlay",
                    "command": f"{base_cmd} --what overlays",
                }
            )

    if what in ("forecasts", "all") and test:
        sample = test[0]
        for ranked in forecast(models, sample.x, config.budget):
            name = f"forecast_{sample.id}_rank{ranked.rank}.tsv"
            (export_dir / name).write_text(
                heatmap_to_tsv(
                    ranked.forecast.frames.reshape(ranked.forecast.frame_count, -1)
                ),
                encoding="utf-8",
            )
            entries.append(
                {
                    "export": name,
                    "analogue": "ranked-forecast-dump",
                    "command": f"{base_cmd} --what forecasts",
                }
            )

    write_manifest(export_dir, entries)
    problems = check_manifest(entries, export_dir)
    _echo_config(config)
    if problems:
        for problem in problems:
            _emit({"stage": "export", "problem": problem})
        return 1
    _emit({"stage": "export", "files": len(entries)})
    return 0


def cmd_serve(config: RunConfig, static_dir: str | None) -> int:
    config.validate()
    models = _load_models_for(config, require_complete=True)
    corpus = load_corpus(config.corpus_path)
    samples, _, _ = _datasets(config, corpus)
    if static_dir is None and Path("frontend/dist").is_dir():
        static_dir = "frontend/dist"
    state = build_session(models, samples, static_dir=static_dir)
    server = make_server(state, config.port)
    _emit(
        {
            "stage": "serve",
            "host": server.server_address[0],
            "port": server.server_address[1],
            "static": static_dir,
        }
    )
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def _parse_set(pairs: list[str]) -> dict[str, str]:
    overrides = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"--set expects key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        overrides[key.strip()] = value
    return overrides


def _resolve_config(args) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    config = apply_overrides(config, _parse_set(args.set))
    direct = {}
    for flag in ("seed", "budget", "protocol", "port"):
        value = getattr(args, flag, None)
        if value is not None:
            direct[flag] = str(value)
    if getattr(args, "out", None) is not None:
        direct["out_dir"] = args.out
    return apply_overrides(config, direct)


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="path to a key = value config file")
    sub.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override any config field (repeatable)",
    )
    sub.add_argument("--seed", type=int, help="override the run seed")
    sub.add_argument("--out", help="override the output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmforecast",
        description="multimodal human pose forecasting on a synthetic motion corpus",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("generate", help="generate the corpus and mine indices")
    _add_common(gen)

    train = commands.add_parser("train", help="run all training stages")
    _add_common(train)
    train.add_argument("--resume", action="store_true", help="continue from the checkpoint")

    ev = commands.add_parser("evaluate", help="compute the metrics report")
    _add_common(ev)
    ev.add_argument("--budget", type=int, help="prediction budget k")
    ev.add_argument("--protocol", choices=("train-mined", "test-mined"))

    exp = commands.add_parser("export", help="write figure-support artifacts")
    _add_common(exp)
    exp.add_argument(
        "--what",
        choices=("density", "overlays", "forecasts", "all"),
        default="all",
    )

    serve = commands.add_parser("serve", help="start the explorer HTTP service")
    _add_common(serve)
    serve.add_argument("--port", type=int, help="listen port")
    serve.add_argument("--budget", type=int, help=argparse.SUPPRESS)
    serve.add_argument(
        "--static",
        help="explorer UI asset directory served at / (default: frontend/dist if present)",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _resolve_config(args)
        if args.command == "generate":
            return cmd_generate(config)
        if args.command == "train":
            return cmd_train(config, resume=args.resume)
        if args.command == "evaluate":
            return cmd_evaluate(config)
        if args.command == "export":
            return cmd_export(config, args.what)
        if args.command == "serve":
            return cmd_serve(config, args.static)
        raise AssertionError(f"unhandled command {args.command}")
    except (ConfigError, FileNotFoundError, RuntimeError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
