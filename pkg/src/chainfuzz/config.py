"""Pipeline configuration: one TOML file, every CLI flag an override.

Relative paths in the file resolve against the config file's directory so a
checked-in config reproduces the same run from anywhere.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .build import BuildConfig
from .campaign import AblationFlags
from .engine import ExternalEngineConfig
from .gateway import DEFAULT_MAX_TOKENS, DEFAULT_TEMPERATURE, GatewayConfig


@dataclass
class Limits:
    max_depth: int = 12
    similarity: float = 0.3
    top_k: int = 5
    repair_rounds: int = 5
    input_attempts: int = 5
    mutator_rounds: int = 3
    script_timeout_s: float = 30.0
    output_cap: int = 16 * 1024 * 1024

    def __post_init__(self):
        for name in ("max_depth", "top_k", "repair_rounds", "input_attempts", "mutator_rounds"):
            if getattr(self, name) < 1:
                raise ValueError(f"limit {name} must be positive")
        if self.script_timeout_s <= 0 or self.output_cap <= 0:
            raise ValueError("script_timeout_s and output_cap must be positive")


@dataclass
class CampaignSettings:
    budget_s: float = 600.0
    rng_seed: int = 1
    engine: str = "builtin"
    ablation: str = "none"
    stop_on_exploit: bool = True
    max_execs: int | None = None
    exec_timeout_s: float = 2.0
    max_input_size: int = 1 << 16
    external: ExternalEngineConfig | None = None

    def ablation_flags(self) -> AblationFlags:
        return AblationFlags.from_name(self.ablation)


@dataclass
class PipelineConfig:
    target_function: str
    source_root: Path
    workspace: Path
    target_description: str = ""
    header_globs: tuple[str, ...] = ("*.h", "**/*.h")
    knowledge_globs: tuple[str, ...] = ("**/*.c", "**/*.h")
    build: BuildConfig = field(default_factory=BuildConfig)
    gateway: GatewayConfig = field(default_factory=GatewayConfig)
    limits: Limits = field(default_factory=Limits)
    campaign: CampaignSettings = field(default_factory=CampaignSettings)

    def __post_init__(self):
        if not self.target_function:
            raise ValueError("target_function is required")
        self.source_root = Path(self.source_root)
        self.workspace = Path(self.workspace)


def _resolve(base: Path, value: str) -> str:
    p = Path(value)
    return str(p if p.is_absolute() else (base / p))


def load_config(path, overrides: dict | None = None) -> PipelineConfig:
    """Parse a TOML config file and apply flat override keys (CLI flags)."""
    path = Path(path)
    with path.open("rb") as fh:
        doc = tomllib.load(fh)
    base = path.parent.resolve()
    overrides = dict(overrides or {})

    target = doc.get("target", {})
    build_doc = doc.get("build", {})
    gateway_doc = doc.get("gateway", {})
    limits_doc = doc.get("limits", {})
    campaign_doc = doc.get("campaign", {})
    knowledge_doc = doc.get("knowledge", {})
    workspace_doc = doc.get("workspace", {})

    def take(key, *, default=None):
        return overrides.pop(key) if key in overrides else default

    target_function = take("target_function", default=target.get("function", ""))
    source_root = take("source_root", default=target.get("source_root", ""))
    if not source_root:
        raise ValueError("target.source_root is required")
    workspace = take("workspace", default=workspace_doc.get("path", "workspace"))

    build = BuildConfig(
        cc=build_doc.get("cc", "gcc"),
        base_flags=tuple(build_doc.get("base_flags", ("-O1", "-g"))),
        include_dirs=tuple(_resolve(base, d) for d in build_doc.get("include_dirs", ())),
        libraries=tuple(_resolve(base, p) for p in build_doc.get("libraries", ())),
        command=tuple(build_doc.get("command", BuildConfig.command)),
        timeout_s=float(build_doc.get("timeout_s", 120.0)),
    )

    cassette = take("cassette", default=gateway_doc.get("cassette", ""))
    gateway = GatewayConfig(
        mode=take("mode", default=gateway_doc.get("mode", "replay")),
        cassette_path=_resolve(base, cassette) if cassette else None,
        endpoint=gateway_doc.get("endpoint", ""),
        model=gateway_doc.get("model", "offline"),
        temperature=float(gateway_doc.get("temperature", DEFAULT_TEMPERATURE)),
        max_tokens=int(gateway_doc.get("max_tokens", DEFAULT_MAX_TOKENS)),
    )

    limits = Limits(
        max_depth=int(limits_doc.get("max_depth", 12)),
        similarity=float(limits_doc.get("similarity", 0.3)),
        top_k=int(limits_doc.get("top_k", 5)),
        repair_rounds=int(limits_doc.get("repair_rounds", 5)),
        input_attempts=int(limits_doc.get("input_attempts", 5)),
        mutator_rounds=int(limits_doc.get("mutator_rounds", 3)),
        script_timeout_s=float(limits_doc.get("script_timeout_s", 30.0)),
        output_cap=int(limits_doc.get("output_cap", 16 * 1024 * 1024)),
    )

    external = None
    if "external" in campaign_doc:
        ext = campaign_doc["external"]
        external = ExternalEngineConfig(
            command=tuple(ext["command"]),
            out_dir=_resolve(base, ext["out_dir"]),
            queue_subdir=ext.get("queue_subdir", "default/queue"),
            crashes_subdir=ext.get("crashes_subdir", "default/crashes"),
            poll_interval_s=float(ext.get("poll_interval_s", 1.0)),
        )

    max_execs = take("max_execs", default=campaign_doc.get("max_execs", 0))
    campaign = CampaignSettings(
        budget_s=float(take("budget_s", default=campaign_doc.get("budget_s", 600.0))),
        rng_seed=int(take("rng_seed", default=campaign_doc.get("rng_seed", 1))),
        engine=take("engine", default=campaign_doc.get("engine", "builtin")),
        ablation=take("ablation", default=campaign_doc.get("ablation", "none")),
        stop_on_exploit=bool(campaign_doc.get("stop_on_exploit", True)),
        max_execs=int(max_execs) or None,
        exec_timeout_s=float(campaign_doc.get("exec_timeout_s", 2.0)),
        max_input_size=int(campaign_doc.get("max_input_size", 1 << 16)),
        external=external,
    )

    if overrides:
        raise ValueError(f"unknown override keys: {sorted(overrides)}")

    return PipelineConfig(
        target_function=target_function,
        source_root=Path(_resolve(base, source_root)),
        workspace=Path(_resolve(base, str(workspace))),
        target_description=target.get("description", ""),
        header_globs=tuple(target.get("header_globs", ("*.h", "**/*.h"))),
        knowledge_globs=tuple(knowledge_doc.get("globs", ("**/*.c", "**/*.h"))),
        build=build,
        gateway=gateway,
        limits=limits,
        campaign=campaign,
    )
