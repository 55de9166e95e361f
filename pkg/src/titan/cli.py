"""Command line interface.

Subcommands: ``gen`` (synthesize task files), ``run`` (evaluate instances
against a backend), ``report`` (accuracy table with optional baseline
deltas), and ``record-replay`` (live run that also captures a replay file).

Exit codes: 0 success, 1 usage or configuration problem, 2 runtime failure.
Records are flushed line by line so an interrupted run keeps everything it
finished; the run manifest is a separate file and marks the run
``interrupted`` in that case. Secrets never live in config files: only the
name of the environment variable holding the API key does.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
import uuid
from typing import Optional

from . import backend as backend_mod
from . import pipeline, prompts, scoring, taskgen

COST_GUARD_REQUESTS = 200

_make_backend = backend_mod.make_backend

_RUN_KEYS = {
    "mode",
    "temperature",
    "samples_k",
    "exec_timeout_s",
    "concurrency",
    "case_sensitive",
    "system_prompt",
    "phase_parallel",
}
_BACKEND_KEYS = {
    "backend_kind",
    "endpoint_url",
    "model",
    "api_key_env",
    "timeout_s",
    "max_retries",
    "replay_path",
}
_OTHER_KEYS = {"templates_dir"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _load_config_file(path: Optional[str]) -> dict:
    if not path:
        return {}
    if not os.path.isfile(path):
        raise UsageError(f"config file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise UsageError("config file must hold a flat JSON object")
    unknown = set(raw) - _RUN_KEYS - _BACKEND_KEYS - _OTHER_KEYS
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return raw


def _merge(file_cfg: dict, args) -> tuple:
    """Config file first, then flags on top. Unset flags are None."""
    merged = dict(file_cfg)
    flag_map = {
        "mode": args.mode,
        "temperature": args.temperature,
        "samples_k": args.samples,
        "exec_timeout_s": args.exec_timeout_s,
        "concurrency": args.concurrency,
        "case_sensitive": args.case_sensitive,
        "system_prompt": args.system_prompt,
        "phase_parallel": (False if args.sequential_phases else None),
        "backend_kind": args.backend,
        "endpoint_url": args.endpoint_url,
        "model": args.model,
        "api_key_env": args.api_key_env,
        "timeout_s": args.request_timeout_s,
        "max_retries": args.max_retries,
        "replay_path": args.replay,
        "templates_dir": args.templates_dir,
    }
    for key, value in flag_map.items():
        if value is not None:
            merged[key] = value

    run_kwargs = {k: merged[k] for k in _RUN_KEYS if k in merged}
    backend_kwargs = {
        k if k != "backend_kind" else "kind": merged[k]
        for k in _BACKEND_KEYS
        if k in merged
    }
    try:
        run_config = pipeline.RunConfig(**run_kwargs)
        run_config.validate()
        backend_config = backend_mod.BackendConfig(**backend_kwargs)
    except (TypeError, pipeline.ConfigError) as exc:
        raise UsageError(str(exc)) from None
    return run_config, backend_config, merged.get("templates_dir")


def _load_instances(path: str):
    if not os.path.isfile(path):
        raise UsageError(f"instances file not found: {path}")
    return taskgen.read_jsonl(path)


def _read_records(path: str) -> "list[dict]":
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def _ensure_parent(path: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def _now_iso() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())


# --- gen ---------------------------------------------------------------


def cmd_gen(args) -> int:
    datasets = list(taskgen.DATASETS) if args.dataset == "all" else [args.dataset]
    manifest = taskgen.default_manifest()

    if args.words or args.sentences:
        if not (args.words and args.sentences):
            raise UsageError("--words and --sentences must be given together")
        corpus = taskgen.WordCorpus.from_paths(args.words, args.sentences)
    else:
        corpus = taskgen.WordCorpus.bundled()

    if args.dataset == "all":
        os.makedirs(args.out, exist_ok=True)

    for dataset in datasets:
        count = args.count if args.count is not None else manifest.get(dataset)
        if not count or count < 1:
            raise UsageError(f"count for {dataset} must be >= 1")
        try:
            instances = taskgen.generate(dataset, count, args.seed, corpus)
        except taskgen.GenerationError as exc:
            raise UsageError(str(exc)) from None
        if args.dataset == "all":
            out_path = os.path.join(args.out, f"{dataset}.jsonl")
        else:
            out_path = args.out
            _ensure_parent(out_path)
        taskgen.write_jsonl(instances, out_path)
        per_template: "dict[str, int]" = {}
        for instance in instances:
            per_template[instance.template_id] = (
                per_template.get(instance.template_id, 0) + 1
            )
        print(f"{dataset}: {len(instances)} instances -> {out_path}")
        for template_id in taskgen.DATASET_TEMPLATES[dataset]:
            print(f"  {template_id}: {per_template.get(template_id, 0)}")
    return 0


# --- run / record-replay -----------------------------------------------


def _write_manifest(path, manifest: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _run_common(args, recording_path: Optional[str]) -> int:
    file_cfg = _load_config_file(args.config)
    run_config, backend_config, templates_dir = _merge(file_cfg, args)

    if recording_path is not None and backend_config.kind != "http":
        raise UsageError("record-replay requires an http backend")

    try:
        library = prompts.load_templates(templates_dir)
    except prompts.TemplateError as exc:
        raise UsageError(str(exc)) from None

    instances = _load_instances(args.instances)

    out_path = args.out
    _ensure_parent(out_path)
    manifest_path = args.manifest or out_path + ".manifest.json"

    done_ids = set()
    if args.resume and os.path.isfile(out_path):
        for record in _read_records(out_path):
            done_ids.add(record.get("instance_id"))
    pending = [i for i in instances if i.id not in done_ids]

    estimated = (
        len(pending) * pipeline.PHASES_PER_MODE[run_config.mode] * run_config.samples_k
    )
    if backend_config.kind == "http" and estimated > COST_GUARD_REQUESTS and not args.yes:
        raise UsageError(
            f"this run would issue about {estimated} live requests "
            f"(> {COST_GUARD_REQUESTS}); pass --yes to confirm"
        )

    try:
        backend = _make_backend(backend_config)
    except backend_mod.BackendError as exc:
        raise UsageError(str(exc)) from None
    if recording_path is not None:
        _ensure_parent(recording_path)
        backend = backend_mod.RecordingBackend(backend, recording_path)

    manifest = {
        "run_id": uuid.uuid4().hex[:12],
        "created_at": _now_iso(),
        "finished_at": None,
        "status": "running",
        "instances_path": os.path.abspath(args.instances),
        "records_path": os.path.abspath(out_path),
        "replay_recording_path": (
            os.path.abspath(recording_path) if recording_path else None
        ),
        "total_instances": len(instances),
        "skipped_existing": len(instances) - len(pending),
        "completed": 0,
        "correct": 0,
        "failures": {},
        "config": {
            "run": {
                "mode": run_config.mode,
                "temperature": run_config.temperature,
                "samples_k": run_config.samples_k,
                "exec_timeout_s": run_config.exec_timeout_s,
                "concurrency": run_config.concurrency,
                "case_sensitive": run_config.case_sensitive,
                "system_prompt": run_config.system_prompt,
                "phase_parallel": run_config.phase_parallel,
            },
            "backend": {
                "kind": backend_config.kind,
                "endpoint_url": backend_config.endpoint_url,
                "model": backend_config.model,
                "api_key_env": backend_config.api_key_env,
                "timeout_s": backend_config.timeout_s,
                "max_retries": backend_config.max_retries,
                "replay_path": backend_config.replay_path,
            },
            "templates_dir": templates_dir,
        },
    }
    _write_manifest(manifest_path, manifest)

    file_mode = "a" if (args.resume and done_ids) else "w"
    status = "completed"
    try:
        with open(out_path, file_mode, encoding="utf-8") as fh:
            for record in pipeline.run_many(pending, backend, run_config, library):
                fh.write(
                    json.dumps(
                        record.to_json_dict(), sort_keys=True, ensure_ascii=False
                    )
                )
                fh.write("\n")
                fh.flush()
                manifest["completed"] += 1
                if record.correct:
                    manifest["correct"] += 1
                if record.failure_class != "none":
                    manifest["failures"][record.failure_class] = (
                        manifest["failures"].get(record.failure_class, 0) + 1
                    )
    except KeyboardInterrupt:
        status = "interrupted"
    manifest["status"] = status
    manifest["finished_at"] = _now_iso()
    _write_manifest(manifest_path, manifest)

    print(
        f"{status}: {manifest['completed']}/{len(pending)} instances "
        f"({manifest['correct']} correct) -> {out_path}"
    )
    if manifest["failures"]:
        parts = ", ".join(f"{k}={v}" for k, v in sorted(manifest["failures"].items()))
        print(f"failures: {parts}")
    return 0 if status == "completed" else 2


def cmd_run(args) -> int:
    return _run_common(args, recording_path=None)


def cmd_record_replay(args) -> int:
    return _run_common(args, recording_path=args.replay_out)


# --- report ------------------------------------------------------------


def cmd_report(args) -> int:
    if not os.path.isfile(args.records):
        raise UsageError(f"records file not found: {args.records}")
    records = _read_records(args.records)
    baseline_report = None
    if args.baseline:
        if not os.path.isfile(args.baseline):
            raise UsageError(f"baseline file not found: {args.baseline}")
        baseline_report = scoring.aggregate(_read_records(args.baseline))
    report = scoring.aggregate(records, baseline=baseline_report)
    print(scoring.render_table(report))
    if args.out:
        _ensure_parent(args.out)
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(report.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


# --- parser ------------------------------------------------------------


def _add_run_flags(sub) -> None:
    sub.add_argument("--instances", required=True, help="task JSONL to evaluate")
    sub.add_argument("--out", required=True, help="records JSONL to write")
    sub.add_argument("--manifest", help="manifest path (default: <out>.manifest.json)")
    sub.add_argument("--config", help="flat JSON config file")
    sub.add_argument("--mode", choices=pipeline.MODES)
    sub.add_argument("--temperature", type=float)
    sub.add_argument("--samples", type=int, help="self-consistency sample count")
    sub.add_argument("--exec-timeout-s", type=float)
    sub.add_argument("--concurrency", type=int)
    sub.add_argument("--case-sensitive", action="store_true", default=None)
    sub.add_argument("--system-prompt")
    sub.add_argument(
        "--sequential-phases",
        action="store_true",
        default=None,
        help="disable concurrent auxiliary phases",
    )
    sub.add_argument("--backend", choices=("http", "replay"))
    sub.add_argument("--endpoint-url")
    sub.add_argument("--model")
    sub.add_argument("--api-key-env")
    sub.add_argument("--request-timeout-s", type=float)
    sub.add_argument("--max-retries", type=int)
    sub.add_argument("--replay", help="replay JSONL to serve completions from")
    sub.add_argument("--templates-dir")
    sub.add_argument("--resume", action="store_true")
    sub.add_argument("--yes", action="store_true", help="confirm large live runs")


def build_parser() -> _Parser:
    parser = _Parser(prog="titan", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)

    gen = subs.add_parser("gen", help="generate synthetic task files")
    gen.add_argument(
        "--dataset", required=True, choices=taskgen.DATASETS + ("all",)
    )
    gen.add_argument("--count", type=int, help="instances (default: manifest count)")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="output file (directory for all)")
    gen.add_argument("--words", help="override word list path")
    gen.add_argument("--sentences", help="override sentence list path")
    gen.set_defaults(fn=cmd_gen)

    run = subs.add_parser("run", help="evaluate instances against a backend")
    _add_run_flags(run)
    run.set_defaults(fn=cmd_run)

    rec = subs.add_parser(
        "record-replay", help="live run that also captures a replay file"
    )
    _add_run_flags(rec)
    rec.add_argument("--replay-out", required=True, help="replay JSONL to record")
    rec.set_defaults(fn=cmd_record_replay)

    rep = subs.add_parser("report", help="accuracy table from records")
    rep.add_argument("--records", required=True)
    rep.add_argument("--baseline", help="records JSONL to diff against")
    rep.add_argument("--out", help="also write the report as JSON")
    rep.set_defaults(fn=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, backend_mod.BackendError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    raise SystemExit(main())
