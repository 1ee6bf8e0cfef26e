"""End-to-end pipeline orchestration with idempotent, resumable stages.

Every stage persists its artifact into the workspace before the next stage
starts; a stage whose artifact already exists is loaded instead of re-run,
so an interrupted run resumes where it stopped.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import callgraph as cg
from .campaign import (
    CampaignConfig,
    CampaignResult,
    compute_hit_rate,
    measure_ts,
    report_to_json,
    run_campaign,
    write_report,
)
from .conditions import ConditionSet, analyze_chain, deserialize_condition_set, serialize_condition_set
from .config import PipelineConfig
from .engine import CrashRecord, QueueEntry
from .errors import IncompleteWorkspace
from .gateway import LlmGateway
from .harness import HarnessArtifact, HarnessSpec, RepairLimits, build_harness
from .inputgen import InputGenLimits, SeedInput, SeedScript, persist_seed, reachable_input_loop
from .mutatorgen import (
    MutatorArtifact,
    MutatorSpec,
    ValidationReport,
    build_mutator,
    default_api_docs,
    persist_mutator,
    validate_mutator,
)
from .ragrepair import IndexBase, build_index, load_index, save_index
from .tracing import CoverageTrace, PhaseTimings, Tracer

log = logging.getLogger(__name__)

STAGE_ORDER = ("analyze", "conditions", "harness", "seed", "mutator", "fuzz", "report")


@dataclass
class Pipeline:
    config: PipelineConfig
    gateway: LlmGateway | None = None
    timings: PhaseTimings = field(default_factory=PhaseTimings)
    _graph: cg.CallGraph | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.config.workspace.mkdir(parents=True, exist_ok=True)
        if self.gateway is None:
            self.gateway = LlmGateway(config=self.config.gateway)

    # --- shared state -----------------------------------------------------

    @property
    def ws(self) -> Path:
        return self.config.workspace

    def graph(self) -> cg.CallGraph:
        if self._graph is None:
            start = time.perf_counter()
            self._graph = cg.build_call_graph(self.config.source_root, self.config.header_globs)
            self.timings.record("callgraph_build", time.perf_counter() - start)
        return self._graph

    def target_ref(self) -> cg.FunctionRef:
        graph = self.graph()
        if self.config.target_function not in graph.functions:
            raise cg.TargetNotInGraph(self.config.target_function)
        return graph.functions[self.config.target_function]

    def _save_timings(self) -> None:
        (self.ws / "timings.json").write_text(
            json.dumps(self.timings.to_json(), indent=2) + "\n", encoding="utf-8"
        )

    def _load_timings(self) -> PhaseTimings:
        path = self.ws / "timings.json"
        timings = PhaseTimings()
        if path.exists():
            for row in json.loads(path.read_text()):
                timings.record(row["phase"], row["seconds"])
        return timings

    # --- stages -------------------------------------------------------------

    def stage_analyze(self) -> cg.CallChain:
        chains_path = self.ws / "chains.json"
        graph = self.graph()
        if chains_path.exists():
            doc = json.loads(chains_path.read_text())
            if doc.get("target") == self.config.target_function and doc.get("selected"):
                log.info("analyze: reusing %s", chains_path)
                return cg.CallChain(tuple(graph.functions[name] for name in doc["selected"]))
        target = self.target_ref()

        start = time.perf_counter()
        chains = cg.enumerate_call_chains(graph, target, self.config.limits.max_depth)
        self.timings.record("chain_enumeration", time.perf_counter() - start)
        start = time.perf_counter()
        selected = cg.select_available_chain(chains, graph)
        self.timings.record("chain_selection", time.perf_counter() - start)

        cg.dump_json(cg.graph_to_json(graph), self.ws / "graph.json")
        cg.dump_json(cg.chains_to_json(target, self.config.limits.max_depth, chains, selected), chains_path)
        self._save_timings()
        return selected

    def stage_conditions(self, chain: cg.CallChain) -> ConditionSet:
        path = self.ws / "conditions.json"
        if path.exists():
            log.info("conditions: reusing %s", path)
            return deserialize_condition_set(path.read_text())
        graph = self.graph()
        sources = {name: cg.extract_function_source(graph, name) for name in chain.names}
        cset = analyze_chain(chain, sources, self.gateway)
        path.write_text(serialize_condition_set(cset), encoding="utf-8")
        return cset

    def _knowledge_index(self) -> IndexBase:
        index_path = self.ws / "rag_index.json"
        if index_path.exists():
            return load_index(index_path)
        files = sorted(
            {p for pattern in self.config.knowledge_globs for p in self.config.source_root.glob(pattern) if p.is_file()}
        )
        index = build_index(files)
        save_index(index, index_path)
        return index

    def stage_harness(self, chain: cg.CallChain, conditions: ConditionSet) -> HarnessArtifact:
        hdir = self.ws / "harness"
        meta_path = hdir / "meta.json"
        if meta_path.exists() and (hdir / "harness.inst").exists():
            log.info("harness: reusing %s", hdir)
            meta = json.loads(meta_path.read_text())
            return HarnessArtifact(
                source=(hdir / "harness.c").read_text(),
                binary=hdir / "harness.inst",
                fast_binary=hdir / "harness.fast" if (hdir / "harness.fast").exists() else None,
                instrumentation=True,
                build_log=(hdir / "build.log").read_text(),
                repair_rounds_used=meta.get("repair_rounds_used", 0),
            )
        graph = self.graph()
        entry, template_file = cg.resolve_entry(chain, graph)
        template_source = ""
        template_path = Path(self.config.source_root) / template_file
        if template_path.exists():
            template_source = template_path.read_text(encoding="utf-8", errors="replace")
        spec = HarnessSpec(
            target_description=self.config.target_description or f"reach and trigger {chain.target.name}",
            chain=chain,
            conditions=conditions,
            entry=entry,
            template_file=template_file,
            template_source=template_source,
            function_sources={name: cg.extract_function_source(graph, name) for name in chain.names},
        )
        limits = RepairLimits(
            max_rounds=self.config.limits.repair_rounds,
            similarity=self.config.limits.similarity,
            top_k=self.config.limits.top_k,
        )
        artifact = build_harness(spec, self.gateway, self._knowledge_index(), self.config.build, hdir, limits)
        meta_path.write_text(json.dumps({"repair_rounds_used": artifact.repair_rounds_used}) + "\n", encoding="utf-8")
        return artifact

    def stage_seed(self, conditions: ConditionSet, harness: HarnessArtifact) -> SeedInput | None:
        if self.config.campaign.ablation_flags().disable_reachable_input:
            log.info("seed: skipped by ablation")
            return None
        sdir = self.ws / "seeds"
        trace_path = sdir / "trace.json"
        if trace_path.exists() and (sdir / "seed.bin").exists():
            log.info("seed: reusing %s", sdir)
            meta = json.loads(trace_path.read_text())
            return SeedInput(
                data=(sdir / "seed.bin").read_bytes(),
                producer=SeedScript(body=(sdir / "seed_script.py").read_text(), attempt=meta.get("attempt", 1)),
                verified_reachable=meta.get("verified_reachable", False),
                trace=CoverageTrace(frozenset(meta.get("functions_hit", []))),
                crashed=meta.get("crashed", False),
            )
        limits = InputGenLimits(
            max_attempts=self.config.limits.input_attempts,
            script_timeout_s=self.config.limits.script_timeout_s,
            output_cap=self.config.limits.output_cap,
        )
        seed = reachable_input_loop(conditions, harness, self.gateway, limits)
        persist_seed(seed, sdir)
        return seed

    def stage_mutator(self, chain: cg.CallChain, harness: HarnessArtifact, seed: SeedInput | None) -> MutatorArtifact | None:
        if self.config.campaign.ablation_flags().disable_mutator:
            log.info("mutator: skipped by ablation")
            return None
        mdir = self.ws / "mutator"
        validation_path = mdir / "validation.json"
        if validation_path.exists() and (mdir / "mutator.so").exists():
            log.info("mutator: reusing %s", mdir)
            meta = json.loads(validation_path.read_text())
            return MutatorArtifact(
                analysis=(mdir / "analysis.md").read_text(),
                strategy=(mdir / "strategy.md").read_text(),
                source=(mdir / "mutator.c").read_text(),
                binary=mdir / "mutator.so",
                validation=ValidationReport(
                    sample_duration=meta["sample_duration"],
                    executions=meta["executions"],
                    execs_per_sec=meta["execs_per_sec"],
                    engine_stable=meta["engine_stable"],
                    mutated_outputs_nonempty=meta["mutated_outputs_nonempty"],
                    baseline_execs_per_sec=meta.get("baseline_execs_per_sec"),
                    notes=meta.get("notes", ""),
                ),
            )
        graph = self.graph()
        spec = MutatorSpec(
            target_description=self.config.target_description or f"reach and trigger {chain.target.name}",
            target_source=cg.extract_function_source(graph, chain.target.name),
            seed_script=seed.producer.body if seed is not None else "(engine default seed; no script)",
            api_docs=default_api_docs(),
            examples="Follow the skeleton in the interface documentation above.",
        )
        analysis, strategy, source, binary = build_mutator(
            spec, self.gateway, self.config.build, mdir, max_rounds=self.config.limits.mutator_rounds
        )
        seed_bytes = seed.data if seed is not None else b"seed\n"
        validation = validate_mutator(binary, harness, seed_bytes, sample_duration=0.5)
        artifact = MutatorArtifact(
            analysis=analysis, strategy=strategy, source=source, binary=binary, validation=validation
        )
        persist_mutator(artifact, mdir)
        if not validation.engine_stable:
            log.error("mutator failed validation (unstable); campaign will run without it")
            return None
        return artifact

    def stage_fuzz(
        self,
        harness: HarnessArtifact,
        seed: SeedInput | None,
        mutator: MutatorArtifact | None,
    ) -> CampaignResult:
        raw_path = self.ws / "campaign_raw.json"
        if raw_path.exists():
            log.info("fuzz: reusing %s", raw_path)
            return self._load_campaign(raw_path)
        ts = measure_ts(self._load_timings() if not self.timings.records else self.timings)

        if seed is not None and seed.crashed:
            # the verified seed already crashes inside the target: report immediately
            log.warning("reachable seed crashes the target on its own; skipping the fuzzing phase")
            run = Tracer(harness.binary).run_on_input(seed.data)
            signature = f"sig{run.signal or 0}:target"
            result = CampaignResult(
                queue=[],
                crashes=[CrashRecord(data=seed.data, discovered_at=0.0, signature=signature, hits_target=True)],
                ts=ts,
                ttr=0.0,
                tte=0.0,
                budget_s=self.config.campaign.budget_s,
                executions=1,
                engine=self.config.campaign.engine,
                rng_seed=self.config.campaign.rng_seed,
                stopped_on_exploit=True,
                elapsed=run.duration,
            )
            from .campaign import persist_campaign

            persist_campaign(result, self.ws, target_name=self.config.target_function)
            return result

        settings = self.config.campaign
        config = CampaignConfig(
            harness=harness,
            target=self.target_ref(),
            budget_s=settings.budget_s,
            rng_seed=settings.rng_seed,
            seed=seed,
            mutator=mutator,
            engine=settings.engine,
            ablation=settings.ablation_flags(),
            stop_on_exploit=settings.stop_on_exploit,
            max_execs=settings.max_execs,
            exec_timeout_s=settings.exec_timeout_s,
            max_input_size=settings.max_input_size,
            external=settings.external,
            workspace=self.ws,
        )
        return run_campaign(config, ts=ts)

    def _load_campaign(self, raw_path: Path) -> CampaignResult:
        doc = json.loads(raw_path.read_text())
        queue_dir = self.ws / "queue"
        crash_dir = self.ws / "crashes"
        queue = [
            QueueEntry(
                id=row["id"],
                data=(queue_dir / f"id_{row['id']:06d}.bin").read_bytes(),
                discovered_at=row["discovered_at"],
                hits_target=row.get("hits_target"),
            )
            for row in doc["queue"]
        ]
        crashes = [
            CrashRecord(
                data=(crash_dir / f"crash_{i:04d}.bin").read_bytes(),
                discovered_at=row["discovered_at"],
                signature=row["signature"],
                hits_target=row.get("hits_target", False),
            )
            for i, row in enumerate(doc["crashes"])
        ]
        return CampaignResult(
            queue=queue,
            crashes=crashes,
            ts=doc["ts"],
            ttr=doc["ttr"],
            tte=doc["tte"],
            budget_s=doc["budget_s"],
            executions=doc["executions"],
            engine=doc["engine"],
            rng_seed=doc["rng_seed"],
            stopped_on_exploit=doc["stopped_on_exploit"],
            elapsed=doc["elapsed"],
        )

    def stage_report(self, result: CampaignResult, harness: HarnessArtifact) -> dict:
        hit_rate = None
        if result.queue:
            hit_rate = compute_hit_rate(result.queue, harness, self.target_ref())
            # refresh the stored queue labels with the replay-authoritative values
            from .campaign import persist_campaign

            persist_campaign(result, self.ws, target_name=self.config.target_function)
        report = report_to_json(result, self.config.target_function, hit_rate)
        write_report(report, self.ws)
        return report

    # --- full run -------------------------------------------------------------

    def run_all(self) -> tuple[dict, CampaignResult]:
        chain = self.stage_analyze()
        conditions = self.stage_conditions(chain)
        harness = self.stage_harness(chain, conditions)
        seed = self.stage_seed(conditions, harness)
        mutator = self.stage_mutator(chain, harness, seed)
        result = self.stage_fuzz(harness, seed, mutator)
        report = self.stage_report(result, harness)
        return report, result


def rerender_report(workspace) -> dict:
    """Re-render the report from persisted campaign data without re-running
    the campaign.  Hit labels come from the stored queue metadata."""
    from .campaign import HitRate

    workspace = Path(workspace)
    raw_path = workspace / "campaign_raw.json"
    if not raw_path.exists():
        raise IncompleteWorkspace(workspace, "campaign_raw.json")
    doc = json.loads(raw_path.read_text())
    queue = [
        QueueEntry(id=row["id"], data=b"", discovered_at=row["discovered_at"], hits_target=row.get("hits_target"))
        for row in doc["queue"]
    ]
    crashes = [
        CrashRecord(
            data=b"",
            discovered_at=row["discovered_at"],
            signature=row["signature"],
            hits_target=row.get("hits_target", False),
        )
        for row in doc["crashes"]
    ]
    result = CampaignResult(
        queue=queue,
        crashes=crashes,
        ts=doc["ts"],
        ttr=doc["ttr"],
        tte=doc["tte"],
        budget_s=doc["budget_s"],
        executions=doc["executions"],
        engine=doc["engine"],
        rng_seed=doc["rng_seed"],
        stopped_on_exploit=doc["stopped_on_exploit"],
        elapsed=doc["elapsed"],
    )
    hit_rate = None
    labeled = [e for e in queue if e.hits_target is not None]
    if labeled:
        hit_rate = HitRate(hits=sum(1 for e in labeled if e.hits_target), total=len(labeled))
    report = report_to_json(result, doc.get("target", ""), hit_rate)
    write_report(report, workspace)
    return report
