"""Pipeline entry point.

Each subcommand reads the shared config file (flags override), runs one
stage, and prints a machine-readable JSON summary with counts, the seed,
and sha256 digests of everything it wrote. Exit codes: 0 ok, 2 config
error, 3 data error, 4 client error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from . import clients, evalqa, evaluate, genqa, ingest, mixer, render, stats
from .config import load_config
from .errors import ClientError, ConfigError, DataError, VqakitError
from .store import CandidateStore


def _digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _summary(command: str, seed, counts: dict, outputs: list) -> dict:
    return {
        "command": command,
        "seed": seed,
        "counts": counts,
        "outputs": [str(p) for p in outputs],
        "digests": {str(p): _digest(p) for p in outputs if Path(p).is_file()},
    }


def _out_dir(cfg: dict, args) -> Path:
    out = Path(getattr(args, "out_dir", None) or cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _seed(cfg: dict, args) -> int:
    return args.seed if args.seed is not None else int(cfg["seed"])


def _load_records(path: str | Path) -> list:
    return [ingest.CanonicalQA.from_dict(d) for d in render.read_jsonl(path)]


def _make_clients(cfg: dict, args, records=None, seed: int = 0):
    client_cfg = dict(cfg["client"])
    mode = getattr(args, "client", None) or client_cfg["mode"]
    cache = clients.ResponseCache(client_cfg["cache_dir"]) if client_cfg.get("cache_dir") else None
    if mode == "mock":
        negative = clients.MockVisionClient(
            records or [], seed=seed, error_rate=float(client_cfg.get("error_rate", 0.0)), cache=cache
        )
        feedback = clients.MockFeedbackClient(
            seed=seed, error_rate=float(client_cfg.get("error_rate", 0.0)), cache=cache
        )
        return negative, feedback
    if mode == "http":
        if not client_cfg.get("endpoint"):
            raise ConfigError("client.endpoint is required for --client http")
        def http(model_key: str, supports_images: bool):
            return clients.HttpChatClient(
                endpoint=client_cfg["endpoint"],
                model_id=client_cfg[model_key],
                api_key_env=client_cfg["api_key_env"],
                supports_images=supports_images,
                max_attempts=int(client_cfg.get("max_attempts", 4)),
                cache=cache,
            )
        return http("negative_model", client_cfg.get("supports_images", True)), http("feedback_model", False)
    raise ConfigError(f"unknown client mode {mode!r}")


# ---------------------------------------------------------------------------
# subcommand handlers

def cmd_ingest(cfg: dict, args) -> dict:
    sources = cfg["sources"]
    if args.source:
        sources = [{"path": p, "format": args.format, "split": args.split} for p in args.source]
    if not sources:
        raise ConfigError("no sources configured; set `sources:` in the config or pass --source")
    out_dir = _out_dir(cfg, args)
    records_path = out_dir / "canonical.jsonl"
    issues_path = out_dir / "ingest_issues.jsonl"
    issues: list[ingest.ParseIssue] = []
    records = []
    for source in sources:
        for record in ingest.parse_source(
            source["path"],
            source.get("format", "canonical"),
            split=source.get("split", "train"),
            on_error=issues.append,
        ):
            records.append(record)
    render.write_jsonl((r.to_dict() for r in records), records_path)
    render.write_jsonl((i.to_dict() for i in issues), issues_path)
    if args.strict and issues:
        raise DataError(f"{len(issues)} malformed entries (see {issues_path})")
    return _summary(
        "ingest",
        _seed(cfg, args),
        {"records": len(records), "issues": len(issues), "sources": len(sources)},
        [records_path, issues_path],
    )


def cmd_genqa(cfg: dict, args) -> dict:
    seed = _seed(cfg, args)
    out_dir = _out_dir(cfg, args)
    genqa_cfg = cfg["genqa"]
    if args.plan:
        if not genqa_cfg.get("quotas"):
            raise ConfigError("genqa.quotas must be configured for --plan")
        manifest = genqa.plan_quotas(genqa_cfg["quotas"])
        manifest_path = out_dir / "genqa_plan.json"
        manifest_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
        return _summary("genqa", seed, manifest["tasks"] | {"total": manifest["total"]}, [manifest_path])

    records = _load_records(args.records or out_dir / "canonical.jsonl")
    pool = genqa.PromptPool.from_file(cfg["prompts"]) if cfg.get("prompts") else genqa.PromptPool.default()
    quotas = genqa_cfg.get("quotas")
    flat_quotas = None
    if quotas:
        flat_quotas = {task: (sum(v.values()) if isinstance(v, dict) else int(v)) for task, v in quotas.items()}
    samples, manifest = genqa.build_corpus(
        records,
        pool,
        seed=seed,
        quotas=flat_quotas,
        max_answer_words=int(genqa_cfg.get("max_answer_words", 200)),
        max_turns=int(genqa_cfg.get("max_turns", 10)),
    )
    samples_path = out_dir / "genqa.jsonl"
    render.write_samples((s.to_instruction_sample() for s in samples), samples_path)
    manifest_path = out_dir / "genqa_manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return _summary("genqa", seed, manifest["tasks"] | {"total": manifest["total"]}, [samples_path, manifest_path])


def _store(cfg: dict, args) -> CandidateStore:
    data_dir = getattr(args, "data_dir", None) or cfg["evalqa"].get("data_dir") or (Path(cfg["out_dir"]) / "evalqa_store")
    return CandidateStore(data_dir)


def cmd_evalqa(cfg: dict, args) -> dict:
    seed = _seed(cfg, args)
    out_dir = _out_dir(cfg, args)
    store = _store(cfg, args)
    stage = args.stage
    counts: dict = {}
    outputs: list = []

    if stage in ("generate", "all"):
        records = _load_records(args.records or out_dir / "canonical.jsonl")
        negative_client, _ = _make_clients(cfg, args, records=records, seed=seed)
        counts["generated"] = evalqa.generate_candidates(
            records, negative_client, store,
            model_id=cfg["client"]["negative_model"],
            concurrency=int(cfg["client"].get("concurrency", 4)),
        )
    if stage in ("filter", "all"):
        counts.update(evalqa.filter_candidates(store, seed))
    if stage in ("feedback", "all"):
        _, feedback_client = _make_clients(cfg, args, records=[], seed=seed)
        counts.update(
            evalqa.generate_feedback(
                store, feedback_client,
                model_id=cfg["client"]["feedback_model"],
                max_words=int(cfg["evalqa"].get("max_feedback_words", 50)),
                concurrency=int(cfg["client"].get("concurrency", 4)),
            )
        )
    if stage in ("assemble", "all"):
        if args.auto_approve or cfg["evalqa"].get("auto_approve", True):
            counts["approved"] = evalqa.auto_approve(store)
        approved = store.candidates(status="Approved")
        sizes = {k: int(v) for k, v in cfg["evalqa"]["sizes"].items()}
        splits = evalqa.assemble_splits(
            approved, sizes, seed=seed, by_source_split=bool(cfg["evalqa"].get("by_source_split", False))
        )
        for split, samples in splits.items():
            path = out_dir / f"evalqa_{split}.jsonl"
            render.write_jsonl((s.to_dict() for s in samples), path)
            counts[f"{split}_samples"] = len(samples)
            outputs.append(path)
        report = evalqa.funnel_report(store.candidates())
        report.validate()
        funnel_path = out_dir / "evalqa_funnel.json"
        funnel_path.write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
        outputs.append(funnel_path)
        counts["funnel"] = report.to_dict()
    store.compact()
    return _summary(f"evalqa {stage}", seed, counts, outputs)


def cmd_mix(cfg: dict, args) -> dict:
    seed = _seed(cfg, args)
    if args.inputs:
        inputs = [mixer.MixInput.parse(spec) for spec in args.inputs]
    else:
        inputs = [mixer.MixInput(path=i["path"], quota=i.get("quota")) for i in cfg["mix"]["inputs"]]
    if not inputs:
        raise ConfigError("no mix inputs configured")
    out_path = args.out or cfg["mix"].get("out")
    if not out_path:
        raise ConfigError("mix needs an output path (--out or mix.out)")
    if args.plan:
        manifest = mixer.plan(inputs)
        return _summary("mix", seed, {"total": manifest["total"]}, [])
    manifest_path = cfg["mix"].get("manifest") or str(Path(out_path).with_suffix(".manifest.json"))
    manifest = mixer.mix(inputs, out_path, seed=seed, manifest_path=manifest_path)
    return _summary("mix", seed, {"total": manifest["total"]}, [out_path, manifest_path])


def cmd_render(cfg: dict, args) -> dict:
    seed = _seed(cfg, args)
    out_path = Path(args.out)
    if args.kind == "genqa":
        samples = list(render.read_samples(args.infile))
    elif args.kind == "canonical":
        samples = [
            render.InstructionSample(
                id=r.record_id, image=r.image, instruction=r.question, response=r.answer, task_tag="VQA"
            )
            for r in _load_records(args.infile)
        ]
    elif args.kind == "evalqa":
        yes_feedback = bool(cfg["evalqa"].get("yes_feedback", True))
        samples = []
        for d in render.read_jsonl(args.infile):
            sample = evalqa.EvalQASample.from_dict(d)
            response = sample.feedback if (sample.label == "No" or yes_feedback) else "Yes"
            samples.append(
                render.InstructionSample(
                    id=sample.sample_id,
                    image=sample.image,
                    instruction=render.render_evalqa_instruction(sample.question, sample.answer_under_test),
                    response=response,
                    task_tag="EvalQA",
                )
            )
    else:
        raise ConfigError(f"unknown render kind {args.kind!r}")

    if args.format == "jsonl":
        count = render.write_jsonl((render.to_conversation(s).to_dict() for s in samples), out_path)
    else:
        count = render.write_jsonl(({"id": s.id, "text": render.render_unified(s)} for s in samples), out_path)
    return _summary("render", seed, {"rendered": count, "kind": args.kind, "format": args.format}, [out_path])


def cmd_evaluate(cfg: dict, args) -> dict:
    seed = _seed(cfg, args)
    testset = args.testset or cfg["evaluate"].get("testset")
    if not testset:
        raise ConfigError("evaluate needs --testset or evaluate.testset")
    out_path = args.out or cfg["evaluate"].get("out") or str(Path(cfg["out_dir"]) / "report.json")
    mode = args.client or "mock"
    cache = clients.ResponseCache(cfg["client"]["cache_dir"]) if cfg["client"].get("cache_dir") else None
    if mode == "mock":
        client = clients.OracleClient(cache=cache)
    elif mode == "flip":
        client = clients.FlipClient(flip_rate=args.flip_rate, seed=seed, cache=cache)
    elif mode == "http":
        if not cfg["client"].get("endpoint"):
            raise ConfigError("client.endpoint is required for --client http")
        client = clients.HttpChatClient(
            endpoint=cfg["client"]["endpoint"],
            model_id=cfg["client"]["eval_model"],
            api_key_env=cfg["client"]["api_key_env"],
            max_attempts=int(cfg["client"].get("max_attempts", 4)),
            cache=cache,
        )
    else:
        raise ConfigError(f"unknown evaluate client {mode!r}")
    report = evaluate.run_eval(
        client,
        testset,
        out_path=out_path,
        concurrency=int(cfg["client"].get("concurrency", 4)),
        policy=args.policy or cfg["evaluate"].get("policy", "error"),
        model_id=cfg["client"]["eval_model"],
    )
    counts = {
        "accuracy": report.accuracy,
        "precision": report.precision,
        "f1": report.f1,
        "no_pct": report.no_pct,
        "invalid": report.matrix.invalid,
        "total": report.matrix.total,
    }
    outputs = [out_path, str(Path(out_path).with_suffix(".predictions.jsonl"))]
    return _summary("evaluate", seed, counts, outputs)


def cmd_stats(cfg: dict, args) -> dict:
    seed = _seed(cfg, args)
    rows: list[dict]
    records = list(render.read_jsonl(args.infile))
    if args.report == "types":
        types = [d.get("question_type") or d.get("type") or "Other" for d in records]
        rows = stats.type_distribution(types)
    else:
        texts = [str(d.get(args.field, "")) for d in records]
        if args.report == "tokens":
            rows = [{"token": t, "count": c} for t, c in stats.token_frequency(texts, args.top_k)]
        elif args.report == "nouns":
            rows = [{"token": t, "count": c} for t, c in stats.pos_frequency(texts, args.top_k, "noun")]
        elif args.report == "verbs":
            rows = [{"token": t, "count": c} for t, c in stats.pos_frequency(texts, args.top_k, "verb")]
        elif args.report == "lengths":
            rows = [
                {"bucket": bucket, "count": count}
                for bucket, count in stats.length_histogram(texts, args.bucket).items()
            ]
        else:
            raise ConfigError(f"unknown stats report {args.report!r}")
    stats.write_rows(rows, args.out)
    return _summary("stats", seed, {"rows": len(rows), "report": args.report}, [args.out])


def cmd_review_serve(cfg: dict, args) -> dict:
    from . import review

    review.serve(
        data_dir=args.data_dir,
        port=args.port,
        host=args.host,
        image_root=args.image_root,
        token=args.token,
        ui_dist=args.ui_dist,
    )
    return _summary("review-serve", _seed(cfg, args), {}, [])


# ---------------------------------------------------------------------------
# argument parsing

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vqakit", description=__doc__)
    parser.add_argument("--config", help="YAML config file")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--out-dir", dest="out_dir", default=None, help="override the output directory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse source files into canonical records")
    p.add_argument("--source", action="append", default=[], help="source file (repeatable)")
    p.add_argument("--format", default="canonical", help="format tag for --source files")
    p.add_argument("--split", default="train", choices=["train", "val", "test"])
    p.add_argument("--strict", action="store_true", help="fail on any malformed entry")
    p.set_defaults(handler=cmd_ingest)

    p = sub.add_parser("genqa", help="build question-asking training samples")
    p.add_argument("--records", default=None, help="canonical records JSONL (default: out/canonical.jsonl)")
    p.add_argument("--plan", action="store_true", help="quota arithmetic only, no data generation")
    p.set_defaults(handler=cmd_genqa)

    p = sub.add_parser("evalqa", help="build assessment data")
    p.add_argument("stage", choices=["generate", "filter", "feedback", "assemble", "all"])
    p.add_argument("--records", default=None)
    p.add_argument("--data-dir", dest="data_dir", default=None, help="candidate store directory")
    p.add_argument("--client", choices=["mock", "http"], default=None)
    p.add_argument("--auto-approve", action="store_true", help="approve every candidate passing invariants")
    p.set_defaults(handler=cmd_evalqa)

    p = sub.add_parser("mix", help="combine sample files into one shuffled corpus")
    p.add_argument("--inputs", nargs="*", default=[], help="path[:quota] entries (else mix.inputs from config)")
    p.add_argument("--out", default=None)
    p.add_argument("--plan", action="store_true", help="quota arithmetic only")
    p.set_defaults(handler=cmd_mix)

    p = sub.add_parser("render", help="render samples into training formats")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--kind", choices=["canonical", "genqa", "evalqa"], default="genqa")
    p.add_argument("--format", choices=["jsonl", "flat"], default="jsonl")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_render)

    p = sub.add_parser("evaluate", help="score a model over an assessment testset")
    p.add_argument("--testset", default=None)
    p.add_argument("--client", choices=["mock", "flip", "http"], default=None)
    p.add_argument("--flip-rate", dest="flip_rate", type=float, default=0.2)
    p.add_argument("--policy", choices=["error", "exclude"], default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("stats", help="emit corpus statistics")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--report", choices=["types", "tokens", "lengths", "nouns", "verbs"], required=True)
    p.add_argument("--field", default="feedback", help="text field for token/length reports")
    p.add_argument("--top-k", dest="top_k", type=int, default=30)
    p.add_argument("--bucket", type=int, default=5)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_stats)

    p = sub.add_parser("review-serve", help="serve the human review queue over HTTP")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--data-dir", dest="data_dir", required=True)
    p.add_argument("--image-root", dest="image_root", default=None)
    p.add_argument("--token", default=None)
    p.add_argument("--ui-dist", dest="ui_dist", default=None)
    p.set_defaults(handler=cmd_review_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        summary = args.handler(cfg, args)
    except VqakitError as exc:
        print(json.dumps({"command": args.command, "error": str(exc), "kind": type(exc).__name__}))
        return exc.exit_code
    print(json.dumps(summary, ensure_ascii=False))
    return 0


if __name__ == "__main__":
    sys.exit(main())
