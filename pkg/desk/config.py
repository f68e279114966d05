# desk/config.py
import hashlib
import json
import os
from pathlib import Path
from typing import Literal, Optional

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError, model_validator

from .domain import EffectiveDate, Horizon, Seniority, StrategyName
from .errors import ConfigError

load_dotenv()

BASE_DIR = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
DATA_DIR = os.path.join(BASE_DIR, "data")


class Config:
    CACHE_DIR = os.getenv("DESK_CACHE_DIR", os.path.join(DATA_DIR, "cache"))
    OUTPUT_DIR = os.getenv("DESK_OUTPUT_DIR", os.path.join(BASE_DIR, "runs"))
    WORKERS = int(os.getenv("DESK_WORKERS", 4))
    LOG_LEVEL = os.getenv("DESK_LOG_LEVEL", "INFO")
    DATA_DIR = DATA_DIR


REPORT_KINDS = ("decisions", "consistency", "crosstab", "approval", "market")


class SamplingConfig(BaseModel):
    # never stated for the original runs; 0 keeps hosted models as repeatable as they get
    temperature: float = Field(0.0, ge=0)
    max_output: int = Field(512, gt=0)


class RetryConfig(BaseModel):
    max_attempts: int = Field(5, ge=1)
    initial_delay: float = Field(1.0, ge=0)
    backoff_factor: float = Field(2.0, ge=1)
    max_delay: float = Field(60.0, ge=0)


class ScriptRule(BaseModel):
    match: str = ""
    regex: bool = False
    reply: str


class BackendConfig(BaseModel):
    name: str = Field(min_length=1)
    kind: Literal["scripted", "chat_completions", "generate_content"]
    base_url: Optional[str] = None
    model: Optional[str] = None
    api_key_env: Optional[str] = None
    requests_per_minute: Optional[float] = Field(None, gt=0)
    timeout: float = Field(60.0, gt=0)
    script: list[ScriptRule] = Field(default_factory=list)

    @model_validator(mode="after")
    def _remote_fields(self):
        if self.kind != "scripted":
            missing = [f for f in ("base_url", "model", "api_key_env") if not getattr(self, f)]
            if missing:
                raise ValueError(f"backend '{self.name}' ({self.kind}) needs {', '.join(missing)}")
        return self


class StrategyConfig(BaseModel):
    kind: StrategyName
    trader: str
    trader_b: Optional[str] = None
    head: Optional[str] = None
    analyst: Optional[str] = None
    horizons: list[Horizon] = Field(default_factory=lambda: [Horizon.SHORT_TERM])
    seniorities: list[Seniority] = Field(default_factory=lambda: [Seniority.JUNIOR])

    @model_validator(mode="after")
    def _roles(self):
        if self.kind is not StrategyName.SINGLE_TRADER and not self.analyst:
            self.analyst = self.trader
        if self.kind in (StrategyName.HO, StrategyName.HOM) and not self.head:
            self.head = self.trader
        if self.kind is StrategyName.HOM:
            if not self.trader_b:
                raise ValueError("hom strategy needs trader_b")
            if self.trader_b == self.trader:
                raise ValueError(f"hom traders must use distinct backends, both are '{self.trader}'")
        if not self.horizons or not self.seniorities:
            raise ValueError("horizons and seniorities must not be empty")
        return self

    def backend_names(self):
        return [b for b in (self.trader, self.trader_b, self.head, self.analyst) if b]


class CorpusConfig(BaseModel):
    news: Optional[Path] = None
    trading_records: Optional[Path] = None
    prices: Optional[Path] = None
    calendar: Optional[Path] = None


class RunConfig(BaseModel):
    run_name: str = "run"
    corpus: CorpusConfig = Field(default_factory=CorpusConfig)
    backends: list[BackendConfig] = Field(default_factory=list)
    strategies: list[StrategyConfig] = Field(default_factory=list)
    sampling: SamplingConfig = Field(default_factory=SamplingConfig)
    retry: RetryConfig = Field(default_factory=RetryConfig)
    workers: int = Field(Config.WORKERS, ge=1)
    cache_dir: Path = Path(Config.CACHE_DIR)
    output_dir: Path = Path(Config.OUTPUT_DIR)
    offline: bool = False
    effective_date: EffectiveDate = EffectiveDate.PUBLISHED
    trader_input: Literal["news_and_analysis", "analysis"] = "news_and_analysis"
    label_ties: Literal["exclude", "raise"] = "exclude"
    reports: list[str] = Field(default_factory=lambda: list(REPORT_KINDS))
    market_horizons: list[int] = Field(default_factory=lambda: [1, 5])

    @model_validator(mode="after")
    def _references(self):
        names = [b.name for b in self.backends]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise ValueError(f"duplicate backend names: {dupes}")
        for s in self.strategies:
            unknown = [n for n in s.backend_names() if n not in names]
            if unknown:
                raise ValueError(f"strategy '{s.kind.value}' references undeclared backend(s) {unknown}")
        bad = [k for k in self.reports if k not in REPORT_KINDS]
        if bad:
            raise ValueError(f"unknown report kinds {bad}; choose from {list(REPORT_KINDS)}")
        if any(h < 1 for h in self.market_horizons):
            raise ValueError("market_horizons must be >= 1")
        return self

    def digest(self):
        payload = json.dumps(self.model_dump(mode="json"), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _set_dotted(tree, dotted, value):
    keys = dotted.split(".")
    node = tree
    for key in keys[:-1]:
        if isinstance(node, list):
            node = node[int(key)]
            continue
        node = node.setdefault(key, {})
    last = keys[-1]
    if isinstance(node, list):
        node[int(last)] = value
    else:
        node[last] = value


def _resolve_paths(cfg: RunConfig, root: Path):
    def fix(p):
        if p is None:
            return None
        p = Path(p)
        return p if p.is_absolute() else (root / p)

    corpus = cfg.corpus
    for field in ("news", "trading_records", "prices", "calendar"):
        setattr(corpus, field, fix(getattr(corpus, field)))
    cfg.cache_dir = fix(cfg.cache_dir)
    cfg.output_dir = fix(cfg.output_dir)
    return cfg


def load_config(path=None, overrides=None, data=None):
    """
    Read the YAML run file, apply `dotted.key=value` overrides field-wise
    and validate. Relative paths resolve against the config file's folder.
    """
    raw = dict(data or {})
    root = Path.cwd()
    if path is not None:
        path = Path(path)
        try:
            with open(path, encoding="utf-8") as fh:
                raw = yaml.safe_load(fh) or {}
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except yaml.YAMLError as e:
            raise ConfigError(f"config file {path} is not valid YAML: {e}")
        if not isinstance(raw, dict):
            raise ConfigError(f"config file {path} must hold a mapping")
        root = path.resolve().parent

    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override '{item}' is not of the form key=value")
        key, _, value = item.partition("=")
        try:
            _set_dotted(raw, key.strip(), yaml.safe_load(value))
        except (IndexError, ValueError, TypeError, AttributeError) as e:
            raise ConfigError(f"cannot apply override '{item}': {e}")

    try:
        cfg = RunConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"invalid run configuration:\n{e}")
    return _resolve_paths(cfg, root)


def check_credentials(cfg: RunConfig, backend_names=None):
    """Fail fast when a remote backend's key variable is unset."""
    wanted = set(backend_names) if backend_names is not None else {b.name for b in cfg.backends}
    missing = []
    for b in cfg.backends:
        if b.name in wanted and b.kind != "scripted" and not os.getenv(b.api_key_env or ""):
            missing.append(f"{b.name} (${b.api_key_env})")
    if missing and not cfg.offline:
        raise ConfigError("missing credentials for: " + ", ".join(missing))
