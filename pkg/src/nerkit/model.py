"""Core value types: mentions, model descriptors, run settings."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Union

from .categories import Category, normalize_category
from .errors import ConfigError

ModelId = str

NATIVE_PREFIX = "native/"


@dataclass(frozen=True)
class RawMention:
    """A recognizer hit before context is attached."""

    surface: str
    category: Category
    start: int
    end: int
    score: float = 1.0

    @property
    def span(self):
        return self.start, self.end


@dataclass(frozen=True)
class EntityMention:
    surface: str
    category: Category
    start: int
    end: int
    context: str
    model_id: ModelId
    score: Optional[float] = None

    @property
    def span(self):
        return self.start, self.end

    def to_dict(self) -> dict:
        d = {
            "surface": self.surface,
            "category": self.category.value,
            "start": self.start,
            "end": self.end,
            "context": self.context,
        }
        if self.score is not None:
            d["score"] = self.score
        return d

    @classmethod
    def from_dict(cls, d: Mapping, model_id: ModelId) -> "EntityMention":
        return cls(
            surface=d["surface"],
            category=Category.parse(d["category"]),
            start=int(d["start"]),
            end=int(d["end"]),
            context=d["context"],
            model_id=model_id,
            score=d.get("score"),
        )


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok


def validate_mention(doc, m) -> ValidationReport:
    """Check a mention's span, surface and context against the document text.

    ``doc`` may be a DocumentRecord or a plain string. Violations are
    returned as data; nothing is raised.
    """
    text = doc if isinstance(doc, str) else doc.text
    problems = []
    if m.start < 0:
        problems.append("start is negative")
    if m.end <= m.start:
        problems.append("empty or inverted span")
    if m.end > len(text):
        problems.append("end exceeds length")
    if text[max(m.start, 0):m.end] != m.surface:
        problems.append("slice mismatch")
    context = getattr(m, "context", None)
    if context is not None and m.surface not in context:
        problems.append("context does not contain surface")
    score = getattr(m, "score", None)
    if score is not None and not 0.0 <= score <= 1.0:
        problems.append("score outside [0, 1]")
    return ValidationReport(tuple(problems))


# -- model registry ---------------------------------------------------------

@dataclass(frozen=True)
class ModelDescriptor:
    model_id: ModelId
    kind: str  # "native" | "external"
    endpoint: Optional[str] = None
    alias_map: Mapping[str, Category] = field(default_factory=dict)
    enabled: bool = True

    def __post_init__(self):
        if self.kind not in ("native", "external"):
            raise ValueError(f"bad model kind {self.kind!r}")
        if self.kind == "external" and not self.endpoint:
            raise ValueError(f"external model {self.model_id} needs an endpoint")
        if self.kind == "native" and self.endpoint:
            raise ValueError(f"native model {self.model_id} cannot have an endpoint")
        if self.kind == "native" and not self.model_id.startswith(NATIVE_PREFIX):
            raise ValueError(f"native model ids start with {NATIVE_PREFIX!r}")

    @property
    def tool(self) -> str:
        return self.model_id.split("/", 1)[0]

    @property
    def remote_name(self) -> str:
        return self.model_id.split("/", 1)[1]

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "kind": self.kind,
            "endpoint": self.endpoint,
            "alias_map": {k: v.value for k, v in sorted(self.alias_map.items())},
            "enabled": self.enabled,
        }


# tool -> (model names, label aliases beyond the defaults)
EXTERNAL_MODELS = {
    "nltk": (("ne_chunk",), {"ORGANIZATION": "ORG", "GSP": "GPE", "FACILITY": "FAC"}),
    "spacy": (("en_core_web_sm", "en_core_web_md", "en_core_web_lg"), {}),
    "stanford": (("3-class", "4-class", "7-class"), {"ORGANIZATION": "ORG"}),
    "stanza": (("ner",), {}),
    "flair": (("ner", "ner-fast", "ner-pooled", "ner-ontonotes", "ner-ontonotes-fast"), {}),
    "allennlp": (("elmo-ner", "fine-grained-ner"), {"U-PER": "PERSON", "U-LOC": "LOCATION",
                                                     "U-ORG": "ORG", "U-MISC": "MISCELLANEOUS"}),
    "polyglot": (("ner",), {"I-PER": "PERSON", "I-LOC": "LOCATION", "I-ORG": "ORG"}),
    "deeppavlov": (("ner_conll2003", "ner_ontonotes", "ner_conll2003_bert",
                    "ner_ontonotes_bert"), {}),
    "bert": (("ner",), {}),
}

NATIVE_MODELS = ("native/patterns", "native/gazetteer", "native/combined")

DEFAULT_BACKEND_URL = "http://127.0.0.1:8765"


def default_registry(backend_url: Optional[str] = None,
                     endpoints: Optional[Mapping[str, str]] = None) -> dict:
    """Build the model registry: the 21 external models plus native ones.

    External endpoints default to ``{backend_url}/{tool}``; ``endpoints``
    overrides individual model ids.
    """
    base = (backend_url or os.environ.get("NERKIT_BACKEND_URL") or DEFAULT_BACKEND_URL).rstrip("/")
    endpoints = dict(endpoints or {})
    reg = {}
    for tool, (names, aliases) in EXTERNAL_MODELS.items():
        amap = {k: normalize_category(v, strict=True) for k, v in aliases.items()}
        for name in names:
            mid = f"{tool}/{name}"
            reg[mid] = ModelDescriptor(mid, "external", endpoints.pop(mid, f"{base}/{tool}"), amap)
    for mid in NATIVE_MODELS:
        reg[mid] = ModelDescriptor(mid, "native")
    if endpoints:
        raise ConfigError(f"endpoints given for unknown models: {sorted(endpoints)}")
    return reg


# -- run settings -----------------------------------------------------------

@dataclass(frozen=True)
class ProcessingBlock:
    block_id: str
    model_ids: tuple

    def __post_init__(self):
        object.__setattr__(self, "model_ids", tuple(self.model_ids))
        if not self.model_ids:
            raise ConfigError(f"block {self.block_id!r} has no models")
        dupes = {m for m in self.model_ids if self.model_ids.count(m) > 1}
        if dupes:
            raise ConfigError(f"block {self.block_id!r} repeats {sorted(dupes)}")

    def check(self, registry: Mapping[str, ModelDescriptor]):
        missing = [m for m in self.model_ids if m not in registry]
        if missing:
            raise ConfigError(f"block {self.block_id!r}: unknown model ids {missing}")


@dataclass(frozen=True)
class StoreConnection:
    base_url: str
    database: str
    credentials: Optional[tuple] = None
    timeout: float = 30.0
    # injectable httpx transport (mock stores); not part of the config
    transport: object = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not self.base_url.startswith(("http://", "https://")):
            raise ConfigError(f"store url must be http(s): {self.base_url!r}")
        if not self.database:
            raise ConfigError("store database name is empty")
        if self.timeout <= 0:
            raise ConfigError("store timeout must be positive")
        if self.credentials is not None:
            object.__setattr__(self, "credentials", tuple(self.credentials))

    def to_dict(self) -> dict:
        d = {"base_url": self.base_url, "database": self.database, "timeout": self.timeout}
        if self.credentials:
            d["user"], d["password"] = self.credentials
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "StoreConnection":
        creds = (d["user"], d.get("password", "")) if d.get("user") else None
        return cls(d["base_url"], d["database"], creds, float(d.get("timeout", 30.0)))


@dataclass(frozen=True)
class FilesInput:
    paths: tuple
    format: str = "auto"  # "text" | "record" | "auto"

    def __post_init__(self):
        object.__setattr__(self, "paths", tuple(str(p) for p in self.paths))
        if self.format not in ("text", "record", "auto"):
            raise ConfigError(f"unknown input format {self.format!r}")


@dataclass(frozen=True)
class StoreInput:
    connection: StoreConnection


@dataclass(frozen=True)
class DirectoryOutput:
    path: str


@dataclass(frozen=True)
class StoreOutput:
    connection: StoreConnection


@dataclass(frozen=True)
class ContextPolicy:
    kind: str = "sentence"  # "sentence" | "window"
    chars: Optional[int] = None
    # sentence contexts longer than this fall back to a window
    max_sentence: int = 500
    fallback_chars: int = 100

    def __post_init__(self):
        if self.kind == "window":
            if self.chars is None or self.chars <= 0:
                raise ConfigError("window context needs chars > 0")
        elif self.kind != "sentence":
            raise ConfigError(f"unknown context policy {self.kind!r}")

    @classmethod
    def window(cls, chars: int) -> "ContextPolicy":
        return cls("window", chars)

    def to_dict(self) -> dict:
        return {"kind": "window", "chars": self.chars} if self.kind == "window" else {"kind": "sentence"}


InputSpec = Union[FilesInput, StoreInput]
OutputSpec = Union[DirectoryOutput, StoreOutput]


@dataclass(frozen=True)
class RunSettings:
    input: InputSpec
    blocks: tuple
    output: OutputSpec
    context_policy: ContextPolicy = ContextPolicy()
    strict_labels: bool = False
    gazetteers: tuple = ("builtin",)
    endpoints: Mapping[str, str] = field(default_factory=dict)
    # directory relative paths are resolved against; not serialized
    base_dir: Optional[str] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        object.__setattr__(self, "gazetteers", tuple(self.gazetteers))
        if not self.blocks:
            raise ConfigError("settings need at least one processing block")
        ids = [b.block_id for b in self.blocks]
        if len(set(ids)) != len(ids):
            raise ConfigError("block ids must be unique")

    @property
    def model_ids(self) -> list:
        return [m for b in self.blocks for m in b.model_ids]

    def resolve(self, p: str) -> Path:
        path = Path(p)
        if not path.is_absolute() and self.base_dir:
            path = Path(self.base_dir) / path
        return path

    def to_dict(self) -> dict:
        if isinstance(self.input, FilesInput):
            inp = {"kind": "files", "paths": list(self.input.paths), "format": self.input.format}
        else:
            inp = {"kind": "store", **self.input.connection.to_dict()}
        if isinstance(self.output, DirectoryOutput):
            out = {"kind": "directory", "path": self.output.path}
        else:
            out = {"kind": "store", **self.output.connection.to_dict()}
        return {
            "input": inp,
            "blocks": [{"block_id": b.block_id, "models": list(b.model_ids)} for b in self.blocks],
            "output": out,
            "context_policy": self.context_policy.to_dict(),
            "strict_labels": self.strict_labels,
            "gazetteers": list(self.gazetteers),
            "endpoints": dict(sorted(self.endpoints.items())),
        }

    @classmethod
    def from_dict(cls, d: Mapping, base_dir: Optional[str] = None) -> "RunSettings":
        try:
            inp = d["input"]
            if inp["kind"] == "files":
                input_spec = FilesInput(tuple(inp["paths"]), inp.get("format", "auto"))
            elif inp["kind"] == "store":
                input_spec = StoreInput(StoreConnection.from_dict(inp))
            else:
                raise ConfigError(f"unknown input kind {inp['kind']!r}")
            out = d["output"]
            if out["kind"] == "directory":
                output_spec = DirectoryOutput(out["path"])
            elif out["kind"] == "store":
                output_spec = StoreOutput(StoreConnection.from_dict(out))
            else:
                raise ConfigError(f"unknown output kind {out['kind']!r}")
            cp = d.get("context_policy") or {"kind": "sentence"}
            policy = ContextPolicy(cp["kind"], cp.get("chars"))
            blocks = [ProcessingBlock(b["block_id"], tuple(b["models"])) for b in d["blocks"]]
            return cls(
                input=input_spec,
                blocks=blocks,
                output=output_spec,
                context_policy=policy,
                strict_labels=bool(d.get("strict_labels", False)),
                gazetteers=tuple(d.get("gazetteers", ("builtin",))),
                endpoints=dict(d.get("endpoints", {})),
                base_dir=base_dir,
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed settings: {exc!r}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def from_json(cls, s: str, base_dir: Optional[str] = None) -> "RunSettings":
        try:
            return cls.from_dict(json.loads(s), base_dir)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"settings are not valid JSON: {exc}") from exc

    def check(self, registry: Mapping[str, ModelDescriptor]):
        for b in self.blocks:
            b.check(registry)


def load_settings(path) -> RunSettings:
    """Read a settings file; relative paths inside it resolve against its folder."""
    path = Path(path)
    return RunSettings.from_json(path.read_text(encoding="utf-8"), base_dir=str(path.parent))


def fingerprint_settings(s: RunSettings) -> str:
    """SHA-256 over the key-sorted canonical form (credentials excluded)."""
    d = s.to_dict()
    for side in ("input", "output"):
        d[side].pop("password", None)
    canonical = json.dumps(d, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

