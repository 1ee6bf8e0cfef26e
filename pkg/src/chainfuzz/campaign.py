"""Campaign execution and the reported metrics: static-analysis time,
time-to-reach, time-to-exploit, and the target-function hit rate."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .callgraph import FunctionRef
from .engine import (
    DEFAULT_SEED_INPUT,
    BuiltinEngine,
    CrashRecord,
    EngineResult,
    ExternalEngineAdapter,
    ExternalEngineConfig,
    QueueEntry,
)
from .errors import BudgetZero, EmptyQueue
from .harness import HarnessArtifact
from .inputgen import SeedInput
from .mutatorgen import MutatorArtifact
from .tracing import PhaseTimings, Tracer

log = logging.getLogger(__name__)

STATIC_PHASES = ("callgraph_build", "chain_enumeration", "chain_selection")
IE_THRESHOLD_S = 60.0
REPORT_SCHEMA = "chainfuzz-report-v1"


@dataclass
class AblationFlags:
    disable_reachable_input: bool = False
    disable_mutator: bool = False

    @classmethod
    def from_name(cls, name: str) -> "AblationFlags":
        table = {
            "none": cls(),
            "without-input": cls(disable_reachable_input=True),
            "without-mutator": cls(disable_mutator=True),
            "harness-only": cls(disable_reachable_input=True, disable_mutator=True),
        }
        if name not in table:
            raise ValueError(f"unknown ablation {name!r}; choose from {sorted(table)}")
        return table[name]


@dataclass
class CampaignConfig:
    harness: HarnessArtifact
    target: FunctionRef
    budget_s: float
    rng_seed: int
    seed: SeedInput | None = None
    mutator: MutatorArtifact | None = None
    engine: str = "builtin"
    ablation: AblationFlags = field(default_factory=AblationFlags)
    stop_on_exploit: bool = True
    max_execs: int | None = None
    exec_timeout_s: float = 2.0
    max_input_size: int = 1 << 16
    external: ExternalEngineConfig | None = None
    workspace: Path | None = None

    def __post_init__(self):
        if self.budget_s <= 0:
            raise BudgetZero(f"campaign budget must be positive, got {self.budget_s}")


@dataclass
class HitRate:
    hits: int
    total: int

    def __post_init__(self):
        if self.total <= 0:
            raise ValueError("hit rate needs a non-empty queue")
        if not 0 <= self.hits <= self.total:
            raise ValueError("hits must satisfy 0 <= hits <= total")

    @property
    def rate(self) -> float:
        return self.hits / self.total

    @property
    def formatted(self) -> str:
        return format_hit_rate(self.hits, self.total)


def format_hit_rate(hits: int, total: int) -> str:
    """Percent truncated to two decimals, e.g. 38/48 -> '79.16%(38/48)'."""
    basis = hits * 10000 // total
    return f"{basis // 100}.{basis % 100:02d}%({hits}/{total})"


@dataclass
class CampaignResult:
    queue: list[QueueEntry]
    crashes: list[CrashRecord]
    ts: float
    ttr: float | None
    tte: float | None
    budget_s: float
    executions: int
    engine: str
    rng_seed: int
    stopped_on_exploit: bool
    elapsed: float

    def __post_init__(self):
        if self.tte is not None:
            if not any(c.discovered_at == self.tte for c in self.crashes):
                raise ValueError("tte must match a recorded crash time")
            if self.ttr is not None and self.ttr > self.tte:
                raise ValueError("ttr must not exceed tte")

    @property
    def exploited(self) -> bool:
        return self.tte is not None


def run_campaign(config: CampaignConfig, ts: float = 0.0) -> CampaignResult:
    """Execute the fuzzing phase and assemble the measured result."""
    ablation = config.ablation
    if ablation.disable_reachable_input or config.seed is None:
        seed_bytes = DEFAULT_SEED_INPUT
    else:
        seed_bytes = config.seed.data
    mutator_path = None
    if not ablation.disable_mutator and config.mutator is not None and config.mutator.binary is not None:
        mutator_path = config.mutator.binary

    if config.engine == "builtin":
        engine = BuiltinEngine(
            harness_binary=config.harness.binary,
            target_name=config.target.name,
            rng_seed=config.rng_seed,
            budget_s=config.budget_s,
            stop_on_exploit=config.stop_on_exploit,
            mutator_path=mutator_path,
            max_input_size=config.max_input_size,
            exec_timeout=config.exec_timeout_s,
            max_execs=config.max_execs,
        )
        outcome = engine.run(seed_bytes)
    elif config.engine == "external":
        if config.external is None:
            raise ValueError("external engine requires an ExternalEngineConfig")
        adapter = ExternalEngineAdapter(
            config=config.external,
            harness_binary=config.harness.fast_binary or config.harness.binary,
            budget_s=config.budget_s,
            mutator_path=mutator_path,
        )
        outcome = adapter.run(seed_bytes, config.workspace or Path.cwd())
        _attribute_external(outcome, config)
    else:
        raise ValueError(f"unknown engine {config.engine!r}")

    result = CampaignResult(
        queue=outcome.queue,
        crashes=outcome.crashes,
        ts=ts,
        ttr=outcome.first_reach_time,
        tte=outcome.first_target_crash_time,
        budget_s=config.budget_s,
        executions=outcome.executions,
        engine=config.engine,
        rng_seed=config.rng_seed,
        stopped_on_exploit=outcome.stopped_on_exploit,
        elapsed=outcome.elapsed,
    )
    if config.workspace is not None:
        persist_campaign(result, config.workspace, target_name=config.target.name)
    return result


def _attribute_external(outcome: EngineResult, config: CampaignConfig) -> None:
    """Replay externally discovered inputs under the instrumented binary to
    attribute crashes and timestamps to the target."""
    tracer = Tracer(config.harness.binary, timeout=config.exec_timeout_s)
    for entry in outcome.queue:
        run = tracer.run_on_input(entry.data)
        entry.hits_target = config.target.name in run.trace.functions_hit
        if entry.hits_target and (outcome.first_reach_time is None or entry.discovered_at < outcome.first_reach_time):
            outcome.first_reach_time = entry.discovered_at
    for crash in outcome.crashes:
        run = tracer.run_on_input(crash.data)
        crash.hits_target = config.target.name in run.trace.functions_hit
        if crash.hits_target:
            if outcome.first_reach_time is None or crash.discovered_at < outcome.first_reach_time:
                outcome.first_reach_time = crash.discovered_at
            if outcome.first_target_crash_time is None or crash.discovered_at < outcome.first_target_crash_time:
                outcome.first_target_crash_time = crash.discovered_at


def compute_hit_rate(queue: list[QueueEntry], harness: HarnessArtifact, target: FunctionRef) -> HitRate:
    """Replay every queue entry under the instrumented binary and count the
    entries whose trace includes the target.  Pure: same queue, same result."""
    if not queue:
        raise EmptyQueue("hit rate needs at least one queue entry")
    tracer = Tracer(harness.binary)
    hits = 0
    for entry in queue:
        run = tracer.run_on_input(entry.data)
        entry.hits_target = target.name in run.trace.functions_hit
        if entry.hits_target:
            hits += 1
    return HitRate(hits=hits, total=len(queue))


def measure_ts(timings: PhaseTimings) -> float:
    """Static-analysis wall time: graph build + enumeration + selection,
    gateway latency excluded."""
    return timings.total(STATIC_PHASES)


# --- persistence and reporting ------------------------------------------------


def persist_campaign(result: CampaignResult, workspace, target_name: str = "") -> None:
    workspace = Path(workspace)
    queue_dir = workspace / "queue"
    crash_dir = workspace / "crashes"
    queue_dir.mkdir(parents=True, exist_ok=True)
    crash_dir.mkdir(parents=True, exist_ok=True)
    for entry in result.queue:
        (queue_dir / f"id_{entry.id:06d}.bin").write_bytes(entry.data)
    for i, crash in enumerate(result.crashes):
        (crash_dir / f"crash_{i:04d}.bin").write_bytes(crash.data)
    (workspace / "campaign_raw.json").write_text(
        json.dumps(campaign_to_json(result, target_name), indent=2) + "\n", encoding="utf-8"
    )


def campaign_to_json(result: CampaignResult, target_name: str = "") -> dict:
    return {
        "schema": "chainfuzz-campaign-v1",
        "target": target_name,
        "engine": result.engine,
        "rng_seed": result.rng_seed,
        "budget_s": result.budget_s,
        "elapsed": result.elapsed,
        "executions": result.executions,
        "ts": result.ts,
        "ttr": result.ttr,
        "tte": result.tte,
        "stopped_on_exploit": result.stopped_on_exploit,
        "queue": [
            {"id": e.id, "discovered_at": e.discovered_at, "hits_target": e.hits_target, "size": len(e.data)}
            for e in result.queue
        ],
        "crashes": [
            {"discovered_at": c.discovered_at, "signature": c.signature, "hits_target": c.hits_target, "size": len(c.data)}
            for c in result.crashes
        ],
    }


def status_label(tte: float | None, budget_s: float) -> str:
    """Table legend: immediate exploits within a minute, timeouts at budget,
    otherwise the exploit time in hours."""
    if tte is None:
        return "T.O."
    if tte <= IE_THRESHOLD_S:
        return "I.E."
    return f"{tte / 3600:.2f}h"


def report_to_json(result: CampaignResult, target_name: str, hit_rate: HitRate | None) -> dict:
    return {
        "schema": REPORT_SCHEMA,
        "target": target_name,
        "engine": result.engine,
        "rng_seed": result.rng_seed,
        "budget_s": result.budget_s,
        "status": status_label(result.tte, result.budget_s),
        "ts_seconds": result.ts,
        "ttr_seconds": result.ttr,
        "tte_seconds": result.tte,
        "hit_rate": None
        if hit_rate is None
        else {"hits": hit_rate.hits, "total": hit_rate.total, "formatted": hit_rate.formatted},
        "queue_entries": len(result.queue),
        "executions": result.executions,
        "crashes": [
            {"at_seconds": c.discovered_at, "signature": c.signature, "hits_target": c.hits_target}
            for c in result.crashes
        ],
    }


def report_table(report: dict) -> str:
    """Human-readable rendering of the same report numbers."""
    rows = [
        ("target", report["target"]),
        ("engine", report["engine"]),
        ("status", report["status"]),
        ("TS (s)", _num(report["ts_seconds"])),
        ("TTR (s)", _num(report["ttr_seconds"])),
        ("TTE (s)", _num(report["tte_seconds"])),
        ("hit rate", report["hit_rate"]["formatted"] if report["hit_rate"] else "-"),
        ("queue entries", str(report["queue_entries"])),
        ("crashes", str(len(report["crashes"]))),
        ("budget (s)", _num(report["budget_s"])),
    ]
    width = max(len(k) for k, _ in rows)
    lines = [f"{k.ljust(width)}  {v}" for k, v in rows]
    for crash in report["crashes"]:
        lines.append(f"{'crash'.ljust(width)}  t={crash['at_seconds']:.2f}s {crash['signature']}")
    return "\n".join(lines) + "\n"


def _num(value) -> str:
    return "-" if value is None else f"{value:.2f}"


def write_report(report: dict, workspace) -> Path:
    path = Path(workspace) / "report.json"
    path.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    return path
