"""chainfuzz: directed greybox fuzzing campaigns derived from a target
function — call-chain selection, execution-condition analysis, generated
harnesses and seeds, target-specific mutators, and measured campaigns."""

__version__ = "0.1.0"

from .callgraph import (  # noqa: F401
    CallChain,
    CallGraph,
    CallSite,
    FunctionRef,
    build_call_graph,
    enumerate_call_chains,
    resolve_entry,
    select_available_chain,
)
from .campaign import (  # noqa: F401
    AblationFlags,
    CampaignConfig,
    CampaignResult,
    HitRate,
    compute_hit_rate,
    format_hit_rate,
    measure_ts,
    run_campaign,
)
from .conditions import (  # noqa: F401
    CallEdgeCondition,
    ConditionSet,
    Constraint,
    analyze_chain,
    analyze_edge,
    parse_condition_response,
)
from .config import PipelineConfig, load_config  # noqa: F401
from .gateway import Cassette, GatewayConfig, LlmGateway, PromptTemplate, render  # noqa: F401
from .harness import HarnessArtifact, HarnessSpec, build_harness, compile_harness, generate_harness  # noqa: F401
from .inputgen import SeedInput, SeedScript, reachable_input_loop, verify_reachability  # noqa: F401
from .mutatorgen import MutatorArtifact, MutatorSpec, ValidationReport, generate_mutator, validate_mutator  # noqa: F401
from .pipeline import Pipeline  # noqa: F401
from .ragrepair import IndexBase, KnowledgeChunk, build_index, build_query, repair_harness, retrieve_chunks  # noqa: F401
