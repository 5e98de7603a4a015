"""Host configuration.

Every verb must be explicitly configured: either a model identifier
(``heuristic`` or ``hf:<model-id>``) or ``disabled``. Disabled verbs
answer HTTP 501. Decoding is greedy by default so responses are
idempotent under a fixed seed; sampling is opt-in per request.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

VERBS = ("qg_ans", "qg_ent", "describe", "fill_mask", "perplexity")
OPTIONAL_VERBS = ("qdmr2q",)

DISABLED = "disabled"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class HostConfig:
    bind: str = "127.0.0.1"
    port: int = 8100
    models: dict[str, str] = field(default_factory=dict)
    max_input_tokens: int = 512
    decode_seed: int = 0

    def __post_init__(self):
        if self.max_input_tokens < 1:
            raise ConfigError("max_input_tokens must be positive")
        missing = [v for v in VERBS if v not in self.models]
        if missing:
            raise ConfigError(
                f"every verb needs a model or 'disabled'; missing: {', '.join(missing)}"
            )
        for verb, model in self.models.items():
            if verb not in VERBS + OPTIONAL_VERBS:
                raise ConfigError(f"unknown verb {verb!r}")
            if model != DISABLED and model != "heuristic" and not model.startswith("hf:"):
                raise ConfigError(f"unknown model spec {model!r} for verb {verb!r}")

    def enabled_verbs(self) -> list[str]:
        return [v for v in VERBS + OPTIONAL_VERBS
                if self.models.get(v, DISABLED) != DISABLED]

    @classmethod
    def default(cls) -> "HostConfig":
        models = {v: "heuristic" for v in VERBS + OPTIONAL_VERBS}
        return cls(models=models)

    @classmethod
    def from_file(cls, path: str | Path) -> "HostConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load config {path}: {exc}") from exc
        return cls(
            bind=data.get("bind", "127.0.0.1"),
            port=int(data.get("port", 8100)),
            models=dict(data.get("models", {})),
            max_input_tokens=int(data.get("max_input_tokens", 512)),
            decode_seed=int(data.get("decode_seed", 0)),
        )
