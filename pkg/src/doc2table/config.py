"""Run configuration: provider wiring, retrieval and generation knobs.

Loaded from a JSON file; endpoints and credentials can be overridden by
environment variables (``DOC2TABLE_CHAT_ENDPOINT``,
``DOC2TABLE_REWRITER_ENDPOINT``, ``DOC2TABLE_EMBEDDER_ENDPOINT``, and the
variable named by each provider's ``api_key_env``). Relative transcript
and data paths resolve against the config file's directory. Nothing
touches the network unless a provider's mode is ``live`` or ``record``.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

from .providers import (
    ChatProvider,
    HashingEmbedder,
    HttpEmbedder,
    HttpProvider,
    IdentityRewriteBackend,
    RecordingProvider,
    ReplayProvider,
    Rewriter,
    Transcript,
)

CHAT_MODES = ("live", "replay", "record")
REWRITER_MODES = ("identity", "live", "replay", "record")
EMBEDDER_MODES = ("hashing", "live")


@dataclass
class ProviderSpec:
    mode: str
    endpoint: str = ""
    transcript: str = ""  # path, for replay/record modes
    api_key_env: str = ""

    @classmethod
    def from_dict(cls, obj: dict, base: Path | None = None) -> ProviderSpec:
        spec = cls(
            mode=obj.get("mode", ""),
            endpoint=obj.get("endpoint", ""),
            transcript=obj.get("transcript", ""),
            api_key_env=obj.get("api_key_env", ""),
        )
        if base is not None and spec.transcript and not Path(spec.transcript).is_absolute():
            spec.transcript = str(base / spec.transcript)
        return spec


@dataclass
class RunConfig:
    chat: ProviderSpec = field(default_factory=lambda: ProviderSpec("replay"))
    rewriter: ProviderSpec = field(default_factory=lambda: ProviderSpec("identity"))
    embedder: ProviderSpec = field(default_factory=lambda: ProviderSpec("hashing"))
    k: int = 30
    merge: str = "round_robin"
    rewrite_docs: bool = True
    fill_batch_size: int | None = None  # None: one batch per body row
    max_retries: int = 1
    parallel: int = 1
    oneshot: bool = False
    temperature: float = 0.0
    max_tokens: int = 2048
    out_dir: str = "out"
    seed: int = 0
    docs: str = ""  # pipeline inputs
    questions: str = ""

    def validate(self) -> None:
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.fill_batch_size is not None and self.fill_batch_size < 1:
            raise ValueError(f"fill_batch_size must be >= 1, got {self.fill_batch_size}")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.merge not in ("round_robin", "max_score"):
            raise ValueError(f"unknown merge strategy {self.merge!r}")
        if self.chat.mode not in CHAT_MODES:
            raise ValueError(f"chat mode must be one of {CHAT_MODES}, got {self.chat.mode!r}")
        if self.rewriter.mode not in REWRITER_MODES:
            raise ValueError(f"rewriter mode must be one of {REWRITER_MODES}")
        if self.embedder.mode not in EMBEDDER_MODES:
            raise ValueError(f"embedder mode must be one of {EMBEDDER_MODES}")

    @classmethod
    def from_file(cls, path: str | Path) -> RunConfig:
        path = Path(path)
        obj = json.loads(path.read_text(encoding="utf-8"))
        base = path.parent
        config = cls()
        for role in ("chat", "rewriter", "embedder"):
            if role in obj:
                setattr(config, role, ProviderSpec.from_dict(obj[role], base))
        for name in (
            "k", "merge", "rewrite_docs", "fill_batch_size", "max_retries",
            "parallel", "oneshot", "temperature", "max_tokens", "out_dir",
            "seed", "docs", "questions",
        ):
            if name in obj:
                setattr(config, name, obj[name])
        for name in ("out_dir", "docs", "questions"):
            value = getattr(config, name)
            if value and not Path(value).is_absolute():
                setattr(config, name, str(base / value))
        config.apply_env_overrides()
        config.validate()
        return config

    def apply_env_overrides(self) -> None:
        for role in ("chat", "rewriter", "embedder"):
            endpoint = os.environ.get(f"DOC2TABLE_{role.upper()}_ENDPOINT")
            if endpoint:
                setattr(self, role, replace(getattr(self, role), endpoint=endpoint))


@dataclass
class BuiltProviders:
    """Ready-to-call providers plus any transcripts to flush after a run."""

    chat: ChatProvider | None
    rewriter: Rewriter | None
    embedder: object
    pending_transcripts: list[tuple[Transcript, str]]


def _backend_for(spec: ProviderSpec, pending: list[tuple[Transcript, str]]):
    if spec.mode == "replay":
        if not spec.transcript:
            raise ValueError("replay mode needs a transcript path")
        return ReplayProvider(Transcript.load(spec.transcript))
    if spec.mode in ("live", "record"):
        if not spec.endpoint:
            raise ValueError(f"{spec.mode} mode needs an endpoint")
        api_key = os.environ.get(spec.api_key_env) if spec.api_key_env else None
        backend = HttpProvider(spec.endpoint, api_key=api_key)
        if spec.mode == "record":
            if not spec.transcript:
                raise ValueError("record mode needs a transcript path to write")
            transcript = Transcript()
            pending.append((transcript, spec.transcript))
            return RecordingProvider(backend, transcript)
        return backend
    raise ValueError(f"unsupported provider mode {spec.mode!r}")


def build_providers(
    config: RunConfig, roles: tuple[str, ...] = ("chat", "rewriter", "embedder")
) -> BuiltProviders:
    pending: list[tuple[Transcript, str]] = []

    chat = None
    if "chat" in roles:
        chat = ChatProvider(
            _backend_for(config.chat, pending),
            temperature=config.temperature,
            max_tokens=config.max_tokens,
        )

    rewriter = None
    if "rewriter" in roles:
        if config.rewriter.mode == "identity":
            rewriter = Rewriter(IdentityRewriteBackend())
        else:
            rewriter = Rewriter(_backend_for(config.rewriter, pending))

    embedder = None
    if "embedder" in roles:
        if config.embedder.mode == "hashing":
            embedder = HashingEmbedder()
        else:
            embedder = HttpEmbedder(_backend_for(config.embedder, pending))

    return BuiltProviders(chat, rewriter, embedder, pending)


def flush_transcripts(built: BuiltProviders) -> None:
    for transcript, path in built.pending_transcripts:
        transcript.save(path)
