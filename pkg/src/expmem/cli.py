"""Command-line entry point: ``expmem run | suite | memory | replay``.

Exit codes: 0 success, 1 task failure, 2 usage or configuration error,
3 backend failure, 4 replay divergence.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Callable, Sequence, TextIO

from expmem.embedding import Embedder, LocalEmbedder, RemoteEmbedder
from expmem.errors import BackendError, InvalidInput, ProtocolViolation, StoreParseError
from expmem.memory import MemoryStore
from expmem.orchestrator import Backends, EpisodeConfig, render_transcript, run_episode
from expmem.sim.fillers import seed_fillers
from expmem.sim.scenario import load_scenario, reset
from expmem.sim.world import execute
from expmem.suite import PRESETS, run_preset
from expmem.vlm.backend import Backend
from expmem.vlm.remote import DEFAULT_CHAT_MODEL, RemoteBackend
from expmem.vlm.scripted import ScriptedBackend
from expmem.vlm.types import Action

EXIT_OK, EXIT_TASK_FAILED, EXIT_USAGE, EXIT_BACKEND, EXIT_DIVERGED = 0, 1, 2, 3, 4

BACKENDS = (
    "scripted-naive",
    "scripted-reflective",
    "scripted-memory-aware",
    "scripted-target-only",
    "remote",
)
MEMORY_FLAGS = {"none": "none", "stm": "stm_only", "stm+ltm": "stm_and_ltm"}
RETRIEVAL_FLAGS = {"rag": "rag", "random": "random_k", "all": "all", "none": "none"}

logger = logging.getLogger("expmem")


class UsageError(Exception):
    pass


def _make_backend(name: str, model: str) -> Backend:
    if name == "remote":
        return RemoteBackend(model=model)
    return ScriptedBackend(name.removeprefix("scripted-").replace("-", "_"))


def _make_embedder(name: str) -> Embedder:
    return RemoteEmbedder() if name == "remote" else LocalEmbedder()


def _load_store(path: str | None, must_exist: bool = False) -> MemoryStore:
    if path is None:
        raise UsageError("--store is required")
    p = Path(path)
    if p.exists():
        return MemoryStore.load(p)
    if must_exist:
        raise UsageError(f"store {path} does not exist")
    return MemoryStore()


def _write_jsonl(path: Path, records: list[dict]) -> None:
    path.write_text("".join(json.dumps(r, ensure_ascii=False) + "\n" for r in records), encoding="utf-8")


def cmd_run(args: argparse.Namespace, out: TextIO, prompt: Callable[[str], str]) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except FileNotFoundError as exc:
        raise UsageError(str(exc)) from exc
    memory_mode = MEMORY_FLAGS[args.memory]
    config = EpisodeConfig(
        memory_mode=memory_mode,
        retrieval_mode=RETRIEVAL_FLAGS[args.retrieval],
        k=args.k,
        context_cap=args.context_cap,
        max_steps=args.max_steps,
        attempts_allowed=args.attempts,
        seed=args.seed,
        write_back=args.write_back,
    )
    store = _load_store(args.store) if memory_mode == "stm_and_ltm" else None
    backend = _make_backend(args.backend, args.model)
    backends = Backends(backend, _make_embedder(args.embedder))

    on_step = None
    if args.interactive:
        def on_step(episode, record):
            out.write(f"step {record.step}: {record.action.call_text()} -> {record.effect.kind}\n")
            note = prompt("operator note (blank to continue): ").strip()
            if note:
                episode.inject_operator_note(note)

    result = run_episode(scenario, config, backends, store, on_step)
    transcript = render_transcript(result)
    out.write(transcript + "\n")
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_jsonl(out_dir / "episode.jsonl", result.log_records(backend.name, config))
        (out_dir / "transcript.txt").write_text(transcript + "\n", encoding="utf-8")
    if store is not None and result.record_id is not None:
        store.save(args.store)
    return EXIT_OK if result.completed else EXIT_TASK_FAILED


def cmd_suite(args: argparse.Namespace, out: TextIO) -> int:
    store = _load_store(args.store, must_exist=True) if args.store else None
    table = run_preset(
        args.suite, LocalEmbedder(), store, args.trials, args.seed, args.k, args.context_cap, args.workers
    )
    text = table.render_text()
    out.write(text + "\n")
    for c in table.conditions:
        s, n = table.totals()[c]
        out.write(f"{c}: {s}/{n} = {table.rate(c):.3f}\n")
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / f"{args.suite}.txt").write_text(text + "\n", encoding="utf-8")
        (out_dir / f"{args.suite}.jsonl").write_text(table.to_jsonl(), encoding="utf-8")
    return EXIT_OK


def cmd_memory(args: argparse.Namespace, out: TextIO) -> int:
    store = _load_store(args.store)
    if args.action == "ls":
        for r in store:
            out.write(f"{r.id}\t{r.key.instruction}\t{r.summary[:60]}\n")
    elif args.action == "show":
        try:
            r = store.get(args.id)
        except KeyError:
            raise UsageError(f"no record with id {args.id}") from None
        row = {
            "id": r.id,
            "instruction": r.key.instruction,
            "scene": r.key.scene_description,
            "summary": r.summary,
            "lesson": r.lesson,
            "episode_id": r.episode_id,
            "created_at": r.created_at.isoformat(),
            "dimension": len(r.embedding),
        }
        out.write(json.dumps(row, indent=2, ensure_ascii=False) + "\n")
    elif args.action == "export":
        store.save(args.path)
        out.write(f"exported {len(store)} records to {args.path}\n")
    else:
        ids = seed_fillers(store, args.n, LocalEmbedder(), args.seed)
        store.save(args.store)
        out.write(f"appended {len(ids)} filler records; store now holds {len(store)}\n")
    return EXIT_OK


def cmd_replay(args: argparse.Namespace, out: TextIO) -> int:
    try:
        lines = Path(args.log).read_text(encoding="utf-8").splitlines()
        records = [json.loads(line) for line in lines if line.strip()]
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read log {args.log}: {exc}") from exc
    if not records or records[0].get("type") != "header":
        raise UsageError(f"{args.log} is not an episode log")
    logged_name = records[0]["scenario"]
    try:
        scenario = load_scenario(args.scenario or logged_name)
    except FileNotFoundError as exc:
        raise UsageError(str(exc)) from exc
    if scenario.name != logged_name:
        raise UsageError(f"log was recorded on {logged_name}, not {scenario.name}")

    world = reset(scenario)
    for rec in records:
        if rec.get("type") != "step":
            continue
        try:
            action = Action(**rec["action"])
        except (TypeError, InvalidInput) as exc:
            out.write(f"step {rec['step']} diverged: logged action is not valid ({exc})\n")
            return EXIT_DIVERGED
        world, effect = execute(world, action, rec["label"])
        got = effect.to_dict()
        if got != rec["effect"]:
            out.write(f"step {rec['step']} diverged: logged {rec['effect']['kind']}, replayed {got['kind']}\n")
            return EXIT_DIVERGED
        out.write(f"step {rec['step']}: {action.call_text()} -> {effect.kind} (match)\n")
        if rec.get("reset"):
            world = reset(scenario)
    out.write("replay matches the log\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="expmem", description="Experience-memory robot task loop on a tabletop simulator.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one episode")
    run.add_argument("--scenario", required=True, help="scenario file or bundled name, e.g. stm/apple_plate_container")
    run.add_argument("--backend", choices=BACKENDS, default="scripted-reflective")
    run.add_argument("--memory", choices=list(MEMORY_FLAGS), default="stm")
    run.add_argument("--retrieval", choices=list(RETRIEVAL_FLAGS), default="rag")
    run.add_argument("--store", help="long-term store (JSONL); needed with --memory stm+ltm")
    run.add_argument("--write-back", action="store_true", help="summarize a completed episode into the store")
    run.add_argument("--k", type=int, default=5)
    run.add_argument("--context-cap", type=int, default=5)
    run.add_argument("--max-steps", type=int, default=10)
    run.add_argument("--attempts", type=int, default=None, help="override the scenario's attempt budget")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--embedder", choices=("local", "remote"), default="local")
    run.add_argument("--model", default=DEFAULT_CHAT_MODEL, help="chat model for --backend remote")
    run.add_argument("--out", help="directory for episode.jsonl and transcript.txt")
    run.add_argument("--interactive", action="store_true", help="pause after each step for an operator note")

    suite = sub.add_parser("suite", help="run a preset batch")
    suite.add_argument("--suite", choices=PRESETS, required=True)
    suite.add_argument("--store", help="existing store; default builds the 100-record reference store")
    suite.add_argument("--trials", type=int, default=None)
    suite.add_argument("--k", type=int, default=5)
    suite.add_argument("--context-cap", type=int, default=5)
    suite.add_argument("--seed", type=int, default=0)
    suite.add_argument("--workers", type=int, default=1)
    suite.add_argument("--out", help="directory for the results table")

    mem = sub.add_parser("memory", help="inspect or extend a store")
    mem.add_argument("--store", required=True)
    msub = mem.add_subparsers(dest="action", required=True)
    msub.add_parser("ls")
    show = msub.add_parser("show")
    show.add_argument("id", type=int)
    export = msub.add_parser("export")
    export.add_argument("path")
    fill = msub.add_parser("seed-fillers")
    fill.add_argument("n", type=int)
    fill.add_argument("--seed", type=int, default=0)

    replay = sub.add_parser("replay", help="re-execute a logged episode and compare effects")
    replay.add_argument("log")
    replay.add_argument("--scenario", help="scenario to replay against (default: the one named in the log)")
    return parser


def main(argv: Sequence[str] | None = None, out: TextIO | None = None, prompt: Callable[[str], str] = input) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            return cmd_run(args, out, prompt)
        if args.command == "suite":
            return cmd_suite(args, out)
        if args.command == "memory":
            return cmd_memory(args, out)
        return cmd_replay(args, out)
    except (BackendError, ProtocolViolation) as exc:
        print(f"expmem: backend failure: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except (UsageError, InvalidInput, StoreParseError, OSError) as exc:
        print(f"expmem: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
