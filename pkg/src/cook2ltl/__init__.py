"""Recipe instructions to LTL task specifications over robot primitive actions."""

from .action_library import ActionLibrary, cache_key
from .action_reduction import Reducer, ReductionOutcome, build_prompt, parse_llm_plan, reduce, wait_extraction
from .core import (AblationMode, ActionDescription, InstructionStep, PrimitiveCall, PrimitiveSet, Recipe,
                   ReductionPolicy, default_primitive_set)
from .llm_client import CostModel, HttpLLM, MockLLM
from .ltl import evaluate, linearize, parse, render, sequenced_visit, translate
from .pipeline import Cook2LTL

__version__ = "0.1.0"

__all__ = ["ActionLibrary", "cache_key", "Reducer", "ReductionOutcome", "build_prompt", "parse_llm_plan", "reduce",
           "wait_extraction", "AblationMode", "ActionDescription", "InstructionStep", "PrimitiveCall", "PrimitiveSet",
           "Recipe", "ReductionPolicy", "default_primitive_set", "CostModel", "HttpLLM", "MockLLM", "evaluate",
           "linearize", "parse", "render", "sequenced_visit", "translate", "Cook2LTL"]
