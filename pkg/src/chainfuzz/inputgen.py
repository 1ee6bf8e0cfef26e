"""Reachable seed generation: script synthesis, sandboxed execution, and
coverage-verified reachability with trace-driven retries."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

from .callgraph import FunctionRef
from .conditions import ConditionSet, render_conditions_text
from .errors import (
    OutputMissing,
    OutputTooLarge,
    ReachabilityExhausted,
    ScriptCrash,
    ScriptTimeout,
)
from .gateway import BUILTIN_TEMPLATES, LlmGateway, render
from .harness import HarnessArtifact
from .ragrepair import extract_code_block
from .sandbox import SandboxConfig, execute_seed_script
from .tracing import CoverageTrace, Tracer

log = logging.getLogger(__name__)

DEFAULT_MAX_ATTEMPTS = 5


@dataclass(frozen=True)
class SeedScript:
    body: str
    attempt: int
    language_tag: str = "python-script"

    def __post_init__(self):
        if self.attempt < 1:
            raise ValueError("attempt numbers are 1-based")


@dataclass(frozen=True)
class SeedInput:
    data: bytes
    producer: SeedScript
    verified_reachable: bool
    trace: CoverageTrace
    crashed: bool = False


@dataclass
class InputGenLimits:
    max_attempts: int = DEFAULT_MAX_ATTEMPTS
    script_timeout_s: float = 30.0
    output_cap: int = 16 * 1024 * 1024


def generate_seed_script(
    conditions: ConditionSet,
    harness_source: str,
    gateway: LlmGateway,
    feedback: str | None = None,
    attempt: int = 1,
) -> SeedScript:
    """One script-generation round; retries carry the prior failure summary."""
    feedback_text = f"Prior-attempt feedback:\n{feedback}" if feedback else ""
    prompt = render(
        BUILTIN_TEMPLATES["input_generation"],
        {
            "execution_conditions": render_conditions_text(conditions),
            "harness_source": harness_source,
            "attempt": str(attempt),
            "feedback": feedback_text,
        },
    )
    response = gateway.complete(prompt)
    body = extract_code_block(response, "python") or response
    return SeedScript(body=body, attempt=attempt)


def verify_reachability(harness: HarnessArtifact, data: bytes, target: FunctionRef) -> tuple[bool, CoverageTrace]:
    """Run the instrumented harness on the input; reachability is exactly
    'target appears in the trace'.  A crash that reaches the target counts
    as reachable (and is an immediate exploit candidate), never an error."""
    result = Tracer(harness.binary).run_on_input(data)
    return target.name in result.trace.functions_hit, result.trace


def deepest_chain_function(conditions: ConditionSet, trace: CoverageTrace) -> tuple[str | None, int]:
    """(deepest chain function reached, index of the first unmet edge).

    Edge i connects chain.functions[i] -> functions[i+1]; when the deepest
    reached function is functions[i], edge i is the one that failed.
    """
    deepest = None
    deepest_idx = -1
    for i, name in enumerate(conditions.chain.names):
        if name in trace.functions_hit:
            deepest = name
            deepest_idx = i
    if deepest_idx < 0:
        return None, 0
    last_edge = max(conditions.chain.length - 2, 0)
    return deepest, min(deepest_idx, last_edge)


def _failure_feedback(conditions: ConditionSet, attempt: int, trace: CoverageTrace | None, note: str) -> str:
    if trace is None:
        return f"Attempt {attempt}: {note}. Produce a simpler, deterministic script."
    deepest, unmet = deepest_chain_function(conditions, trace)
    chain = conditions.chain
    if deepest is None:
        return (
            f"Attempt {attempt}: execution reached no function on the chain. "
            f"Start from edge 0 ({chain.names[0]} -> {chain.names[1] if chain.length > 1 else chain.names[0]}) "
            "and satisfy its constraints first."
        )
    if unmet < chain.length - 1 or deepest != chain.names[-1]:
        caller = chain.names[unmet]
        callee = chain.names[unmet + 1] if unmet + 1 < chain.length else chain.names[-1]
        return (
            f"Attempt {attempt}: the deepest chain function reached was {deepest}. "
            f"Edge {unmet} ({caller} -> {callee}) was not satisfied; revisit its constraints."
        )
    return f"Attempt {attempt}: {note}."


def reachable_input_loop(
    conditions: ConditionSet,
    harness: HarnessArtifact,
    gateway: LlmGateway,
    limits: InputGenLimits | None = None,
) -> SeedInput:
    """generate -> execute -> verify until a seed's trace contains the
    target; each failed attempt feeds its trace summary into the next
    prompt.  Bounded by limits.max_attempts."""
    limits = limits or InputGenLimits()
    if limits.max_attempts < 1:
        raise ValueError("limits.max_attempts must be >= 1")
    target = conditions.chain.target
    sandbox = SandboxConfig(timeout_s=limits.script_timeout_s, output_cap=limits.output_cap)
    history: list[tuple[int, str | None, str]] = []
    feedback: str | None = None

    for attempt in range(1, limits.max_attempts + 1):
        script = generate_seed_script(conditions, harness.source, gateway, feedback=feedback, attempt=attempt)
        try:
            data = execute_seed_script(script.body, sandbox)
        except (ScriptCrash, ScriptTimeout, OutputMissing, OutputTooLarge) as exc:
            note = f"script execution failed: {exc}"
            log.info("seed attempt %d: %s", attempt, note)
            history.append((attempt, None, note))
            feedback = _failure_feedback(conditions, attempt, None, note)
            continue
        result = Tracer(harness.binary).run_on_input(data)
        reached = target.name in result.trace.functions_hit
        if reached:
            if result.crashed:
                log.warning(
                    "seed attempt %d reached %s and crashed (signal %s): immediate exploit candidate",
                    attempt,
                    target.name,
                    result.signal,
                )
            return SeedInput(
                data=data,
                producer=script,
                verified_reachable=True,
                trace=result.trace,
                crashed=result.crashed,
            )
        deepest, _ = deepest_chain_function(conditions, result.trace)
        history.append((attempt, deepest, "target not reached"))
        feedback = _failure_feedback(conditions, attempt, result.trace, "target not reached")

    raise ReachabilityExhausted(history)


def persist_seed(seed: SeedInput, seeds_dir) -> Path:
    """Write seed bytes, producing script, and trace into the workspace."""
    import json

    seeds_dir = Path(seeds_dir)
    seeds_dir.mkdir(parents=True, exist_ok=True)
    seed_path = seeds_dir / "seed.bin"
    seed_path.write_bytes(seed.data)
    (seeds_dir / "seed_script.py").write_text(seed.producer.body, encoding="utf-8")
    (seeds_dir / "trace.json").write_text(
        json.dumps(
            {
                "functions_hit": sorted(seed.trace.functions_hit),
                "verified_reachable": seed.verified_reachable,
                "crashed": seed.crashed,
                "attempt": seed.producer.attempt,
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    return seed_path
