"""Ablation harness: run corpora under each reduction mode and report metrics."""

from __future__ import annotations

import csv
import json
import logging
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from decimal import Decimal
from importlib import resources
from pathlib import Path
from typing import Callable, Optional, Sequence

from .action_library import ActionLibrary, cache_key
from .action_reduction import identity_policy
from .core import AblationMode, Recipe, default_primitive_set, load_recipe
from .llm_client import CostModel, LLMClient, MockLLM
from .pipeline import Cook2LTL, RecipeTranslation
from .preprocess import preprocess_recipe
from .semantic_parser import parse_step

log = logging.getLogger(__name__)

REPORT_HEADER = ["mode", "recipes", "actions_total", "actions_admissible", "executability", "llm_calls",
                 "prompt_tokens", "completion_tokens", "cost_usd", "wall_time_ms", "run_index"]
MODE_ORDER = [AblationMode.AR_STAR, AblationMode.AR, AblationMode.AR_LIB]


@dataclass(frozen=True)
class MetricsRow:
    mode: AblationMode
    recipes: int
    actions_total: int
    actions_admissible: int
    executability: float
    llm_calls: int
    prompt_tokens: int
    completion_tokens: int
    cost_usd: Decimal
    wall_time_ms: int
    run_index: int = 0

    def __post_init__(self):
        for name in ("recipes", "actions_total", "actions_admissible", "llm_calls", "prompt_tokens",
                     "completion_tokens", "wall_time_ms", "run_index"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.actions_admissible > self.actions_total:
            raise ValueError("more admissible actions than actions")

    def to_record(self) -> list[str]:
        return [self.mode.value, str(self.recipes), str(self.actions_total), str(self.actions_admissible),
                repr(self.executability), str(self.llm_calls), str(self.prompt_tokens), str(self.completion_tokens),
                format(self.cost_usd, "f"), str(self.wall_time_ms), str(self.run_index)]

    @classmethod
    def from_record(cls, rec: dict) -> "MetricsRow":
        ints = {k: int(rec[k]) for k in REPORT_HEADER if k not in ("mode", "executability", "cost_usd")}
        return cls(mode=AblationMode(rec["mode"]), executability=float(rec["executability"]),
                   cost_usd=Decimal(rec["cost_usd"]), **ints)


def executability(admissible: int, total: int) -> float:
    if total == 0:
        log.warning("no plan actions produced; executability reported as 0")
        return 0.0
    return admissible / total


@dataclass
class HarnessConfig:
    client_factory: Callable[[], LLMClient]
    cost_model: CostModel = field(default_factory=CostModel)
    library: Optional[ActionLibrary] = None
    workers: int = 1
    key_granularity: str = "verb+noun"


@dataclass
class CorpusRun:
    row: MetricsRow
    action_instances: int
    non_identity_instances: int
    distinct_non_identity_keys: int
    failures: dict[str, str]
    translations: dict[str, RecipeTranslation]
    library: ActionLibrary


def corpus_statistics(corpus: Sequence[Recipe], key_granularity: str = "verb+noun") -> tuple[int, int, int]:
    """(action instances, non-identity instances, distinct non-identity keys)."""
    pset = default_primitive_set()
    total = non_identity = 0
    keys = set()
    for recipe in corpus:
        for step in preprocess_recipe(recipe):
            for action in parse_step(step).actions:
                total += 1
                if identity_policy(action, pset) is None:
                    non_identity += 1
                    keys.add(cache_key(action, key_granularity))
    return total, non_identity, len(keys)


def run_corpus_detailed(corpus: Sequence[Recipe], mode: AblationMode, config: HarnessConfig,
                        run_index: int = 0) -> CorpusRun:
    mode = AblationMode(mode)
    pset = default_primitive_set()
    if config.library is not None:
        library = ActionLibrary.from_json(config.library.to_json())
    else:
        library = ActionLibrary.seeded(pset)
    pipeline = Cook2LTL(config.client_factory(), mode, library, pset, key_granularity=config.key_granularity)
    failures: dict[str, str] = {}
    translations: dict[str, RecipeTranslation] = {}

    def one(recipe: Recipe):
        try:
            return recipe.id, pipeline.translate_recipe(recipe), None
        except Exception as exc:  # recorded per recipe, the corpus run continues
            return recipe.id, None, f"{type(exc).__name__}: {exc}"

    start = time.perf_counter()
    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            results = list(pool.map(one, corpus))
    else:
        results = [one(r) for r in corpus]
    wall_ms = int((time.perf_counter() - start) * 1000)

    total = admissible = 0
    for rid, tr, err in results:
        if err is not None:
            log.warning("recipe %s failed: %s", rid, err)
            failures[rid] = err
            continue
        translations[rid] = tr
        for o in tr.outcomes:
            total += o.total_calls
            admissible += o.admissible_calls
    usage = pipeline.meter.report(config.cost_model)
    row = MetricsRow(mode, len(corpus), total, admissible, executability(admissible, total), usage.calls,
                     usage.prompt_tokens, usage.completion_tokens, usage.cost_usd, wall_ms, run_index)
    instances, non_identity, distinct = corpus_statistics(corpus, config.key_granularity)
    return CorpusRun(row, instances, non_identity, distinct, failures, translations, library)


def run_corpus(corpus: Sequence[Recipe], mode: AblationMode, config: HarnessConfig, run_index: int = 0) -> MetricsRow:
    return run_corpus_detailed(corpus, mode, config, run_index).row


def ablate(corpus: Sequence[Recipe], modes: Sequence[AblationMode], runs: int, config: HarnessConfig) -> list[MetricsRow]:
    """Rows ordered by mode (as given) then run index."""
    return [run_corpus(corpus, m, config, i) for m in modes for i in range(runs)]


def emit_report(rows: Sequence[MetricsRow], path: str | Path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_HEADER)
        for row in rows:
            writer.writerow(row.to_record())


def read_report(path: str | Path) -> list[MetricsRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [MetricsRow.from_record(rec) for rec in csv.DictReader(fh)]


SUMMARY_HEADER = ["mode", "runs", "executability_mean", "executability_std", "llm_calls_mean", "llm_calls_std",
                  "cost_usd_mean", "cost_usd_std", "wall_time_ms_mean", "wall_time_ms_std"]


def emit_summary(rows: Sequence[MetricsRow], path: str | Path):
    """Per-mode mean and sample standard deviation across runs."""
    modes = list(dict.fromkeys(r.mode for r in rows))

    def stats(values):
        values = [float(v) for v in values]
        return statistics.fmean(values), (statistics.stdev(values) if len(values) > 1 else 0.0)

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_HEADER)
        for mode in modes:
            sel = [r for r in rows if r.mode is mode]
            record = [mode.value, len(sel)]
            for attr in ("executability", "llm_calls", "cost_usd", "wall_time_ms"):
                mean, std = stats(getattr(r, attr) for r in sel)
                record += [f"{mean:.6g}", f"{std:.6g}"]
            writer.writerow(record)


def summary_path(report: str | Path) -> Path:
    p = Path(report)
    return p.with_name(p.stem + ".summary" + (p.suffix or ".csv"))


# -- corpora -------------------------------------------------------------

def load_corpus(directory: str | Path) -> list[Recipe]:
    d = Path(directory)
    if not d.is_dir():
        raise FileNotFoundError(f"corpus directory {d} does not exist")
    files = sorted(p for p in d.iterdir() if p.suffix in (".json", ".txt"))
    return [load_recipe(p) for p in files]


def data_dir() -> Path:
    return Path(str(resources.files("cook2ltl.data")))


def demo_dir() -> Path:
    return data_dir() / "demo"


def demo_corpus() -> list[Recipe]:
    return load_corpus(demo_dir() / "recipes")


def demo_fixtures_path() -> Path:
    return demo_dir() / "fixtures.json"


def mock_config(fixtures_path: str | Path, latency_ms: int = 0, **kwargs) -> HarnessConfig:
    fixtures = json.loads(Path(fixtures_path).read_text(encoding="utf-8"))
    return HarnessConfig(lambda: MockLLM(fixtures, latency_ms), **kwargs)
