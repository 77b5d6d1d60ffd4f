"""Command-line interface: translate, reduce, simulate, ablate, library."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import harness
from .action_library import ActionLibrary, cache_key
from .action_reduction import Reducer, build_prompt
from .core import AblationMode, ActionDescription, default_primitive_set, load_recipe
from .kitchen_sim import builtin_tasks, get_task, load_task, run_task
from .llm_client import HttpLLM, MockLLM
from .ltl import render
from .pipeline import Cook2LTL

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _mode(text: str) -> AblationMode:
    try:
        return AblationMode.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _modes(text: str) -> list[AblationMode]:
    return [_mode(t) for t in text.split(",") if t.strip()]


def _llm_args(p: argparse.ArgumentParser):
    p.add_argument("--llm", choices=["mock", "http"], default="mock")
    p.add_argument("--fixtures", help="mock fixture JSON (verb[/noun] -> body)")
    p.add_argument("--latency-ms", type=int, default=0, help="latency injected by the mock backend")
    p.add_argument("--base-url", default="https://api.openai.com", help="HTTP backend base URL")
    p.add_argument("--model", default="gpt-3.5-turbo")


def _make_client(args):
    if args.llm == "http":
        return HttpLLM(args.base_url, args.model)
    path = args.fixtures or harness.demo_fixtures_path()
    return MockLLM.from_file(path, args.latency_ms)


def _load_library(path: Optional[str]) -> Optional[ActionLibrary]:
    if path and Path(path).exists():
        return ActionLibrary.load(path)
    return None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cook2ltl", description="Translate recipe steps into LTL over robot primitives.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("translate", help="print the LTL formulas of a recipe")
    p.add_argument("--recipe", required=True, help="recipe JSON, or text with one step per line")
    p.add_argument("--mode", type=_mode, default=AblationMode.AR_LIB)
    p.add_argument("--library", help="library JSON to load (if present) and save")
    p.add_argument("--out", help="write formulas as JSON here")
    p.add_argument("--unicode", action="store_true")
    _llm_args(p)

    p = sub.add_parser("reduce", help="reduce one action to primitive calls")
    p.add_argument("--action", required=True, help="e.g. \"boil(what='the eggs')\"")
    p.add_argument("--mode", type=_mode, default=AblationMode.AR_LIB)
    p.add_argument("--library", help="library JSON to load (if present) and save")
    p.add_argument("--verbose", action="store_true", help="also print the prompt")
    _llm_args(p)

    p = sub.add_parser("simulate", help="run kitchen tasks end to end")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--task", help=f"one of {', '.join(t.name for t in builtin_tasks())}, or 'all'")
    group.add_argument("--task-file")
    p.add_argument("--mode", type=_mode, default=AblationMode.AR_LIB)
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--variant", choices=["correct", "corrupted"], default="correct",
                   help="bundled simulator fixture set (ignored with --fixtures)")
    p.add_argument("--report", help="write one RunReport JSON per line here")
    _llm_args(p)

    p = sub.add_parser("ablate", help="metrics for each mode over a corpus")
    p.add_argument("--corpus", help="directory of recipe files (default: bundled demo corpus)")
    p.add_argument("--modes", type=_modes, default=list(harness.MODE_ORDER))
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--report", required=True, help="CSV report path; a .summary.csv sidecar is written next to it")
    p.add_argument("--library", help="starting library for ar-lib runs")
    p.add_argument("--workers", type=int, default=1)
    _llm_args(p)

    p = sub.add_parser("library", help="inspect or edit a library file")
    p.add_argument("action", choices=["inspect", "invalidate"])
    p.add_argument("--path", required=True)
    p.add_argument("--key")
    return parser


def cmd_translate(args) -> int:
    recipe = load_recipe(args.recipe)
    pipeline = Cook2LTL(_make_client(args), args.mode, _load_library(args.library))
    result = pipeline.translate_recipe(recipe)
    out = {"recipe": recipe.id, "steps": [], "formula": render(result.formula)}
    for st in result.steps:
        text = render(st.formula, args.unicode)
        print(f"[{st.step.index}] {st.step.text}")
        print(f"    {text}")
        out["steps"].append({"index": st.step.index, "text": st.step.text, "initial": render(st.initial),
                             "formula": render(st.formula)})
    print(render(result.formula, args.unicode))
    if args.out:
        Path(args.out).write_text(json.dumps(out, indent=1) + "\n", encoding="utf-8")
    if args.library and args.mode is AblationMode.AR_LIB:
        pipeline.library.persist(args.library)
    return EXIT_OK


def cmd_reduce(args) -> int:
    action = ActionDescription.from_call_string(args.action)
    pset = default_primitive_set()
    lib = _load_library(args.library) or ActionLibrary.seeded(pset)
    reducer = Reducer(lib, pset, _make_client(args))
    if args.verbose:
        print(build_prompt(action, lib, pset, reducer.exemplars).render())
    outcome = reducer.reduce(action, args.mode)
    print(f"key: {cache_key(action)}  origin: {outcome.policy.origin.value}  llm_called: {outcome.llm_called}")
    for call in outcome.policy.calls:
        print(f"    {call.render()}")
    for line, reason in outcome.rejected_lines:
        print(f"    rejected {line!r}: {reason}")
    print(f"admissible fraction: {outcome.admissible_fraction:.3f}")
    if args.library and args.mode is AblationMode.AR_LIB:
        lib.persist(args.library)
    return EXIT_OK


def _sim_fixtures(args) -> dict:
    if args.fixtures:
        return json.loads(Path(args.fixtures).read_text(encoding="utf-8"))
    data = json.loads((harness.data_dir() / "sim_fixtures.json").read_text(encoding="utf-8"))
    return data[args.variant]


def cmd_simulate(args) -> int:
    if args.task_file:
        tasks = [load_task(args.task_file)]
    elif args.task == "all":
        tasks = builtin_tasks()
    else:
        tasks = [get_task(args.task)]
    if args.llm == "http":
        client = HttpLLM(args.base_url, args.model)
    else:
        client = MockLLM(_sim_fixtures(args), args.latency_ms)
    lines = []
    all_ok = True
    for task in tasks:
        pipeline = Cook2LTL(client, args.mode)
        reports = [run_task(task, pipeline) for _ in range(args.runs)]
        ok = sum(r.success for r in reports)
        all_ok &= ok == len(reports)
        print(f"{task.name}: {ok}/{len(reports)} succeeded, llm calls per run {[r.llm_calls for r in reports]}")
        for failure in sorted({r.failure for r in reports if r.failure}):
            print(f"    failure: {failure}")
        lines.extend(r.to_json() for r in reports)
    if args.report:
        Path(args.report).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return EXIT_OK if all_ok else EXIT_RUNTIME


def cmd_ablate(args) -> int:
    corpus = harness.load_corpus(args.corpus) if args.corpus else harness.demo_corpus()
    if args.llm == "http":
        factory = lambda: HttpLLM(args.base_url, args.model)  # noqa: E731
    else:
        fixtures = json.loads(Path(args.fixtures or harness.demo_fixtures_path()).read_text(encoding="utf-8"))
        factory = lambda: MockLLM(fixtures, args.latency_ms)  # noqa: E731
    config = harness.HarnessConfig(factory, library=_load_library(args.library), workers=args.workers)
    rows = harness.ablate(corpus, args.modes, args.runs, config)
    harness.emit_report(rows, args.report)
    harness.emit_summary(rows, harness.summary_path(args.report))
    for r in rows:
        print(f"{r.mode.value:7s} run {r.run_index}: llm_calls={r.llm_calls} executability={r.executability:.4f} "
              f"cost=${r.cost_usd:.6f} wall={r.wall_time_ms}ms")
    return EXIT_OK


def cmd_library(args) -> int:
    lib = ActionLibrary.load(args.path)
    if args.action == "inspect":
        entries = lib.entries()
        if args.key:
            entries = [p for p in entries if p.key == args.key]
            if not entries:
                print(f"no entry {args.key!r}", file=sys.stderr)
                return EXIT_RUNTIME
        for p in entries:
            print(f"{p.key} [{p.origin.value}]: {'; '.join(c.render() for c in p.calls)}")
        return EXIT_OK
    if not args.key:
        print("invalidate needs --key", file=sys.stderr)
        return EXIT_USAGE
    if not lib.invalidate(args.key):
        print(f"no entry {args.key!r}", file=sys.stderr)
        return EXIT_RUNTIME
    lib.persist(args.path)
    print(f"removed {args.key}")
    return EXIT_OK


COMMANDS = {"translate": cmd_translate, "reduce": cmd_reduce, "simulate": cmd_simulate, "ablate": cmd_ablate,
            "library": cmd_library}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except KeyboardInterrupt:
        return EXIT_RUNTIME
    except Exception as exc:
        print(f"cook2ltl {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
