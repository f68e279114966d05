# desk/__init__.py
import os
import re
from dataclasses import dataclass

__version__ = "0.3.0"


@dataclass
class Desk:
    config: object
    gateway: object
    forge: object
    agency: object
    engine: object


def _build_backend(cfg, session=None):
    from .gateway import ChatCompletionsBackend, GenerateContentBackend, ScriptedBackend

    if cfg.kind == "scripted":
        rules = [(re.compile(r.match) if r.regex else r.match, r.reply) for r in cfg.script]
        return ScriptedBackend(cfg.name, rules)
    api_key = os.getenv(cfg.api_key_env, "")
    cls = ChatCompletionsBackend if cfg.kind == "chat_completions" else GenerateContentBackend
    return cls(cfg.name, cfg.base_url, cfg.model, api_key, timeout=cfg.timeout, session=session)


def create_desk(config, session=None, sleep=None):
    """Build gateway, backends, prompt forge and strategy engine for one run config."""
    from .agents import Agency
    from .config import check_credentials
    from .gateway import LLMGateway, ResponseCache, RetryPolicy, Sampling
    from .prompts import PromptForge
    from .strategies import StrategyEngine

    used = sorted({name for s in config.strategies for name in s.backend_names()})
    check_credentials(config, used)

    os.makedirs(config.cache_dir, exist_ok=True)
    retry = RetryPolicy(**config.retry.model_dump())
    kwargs = {"sleep": sleep} if sleep is not None else {}
    gateway = LLMGateway(ResponseCache(config.cache_dir), retry, offline=config.offline, **kwargs)
    for b in config.backends:
        gateway.register(_build_backend(b, session), b.requests_per_minute)

    forge = PromptForge()
    sampling = Sampling(config.sampling.temperature, config.sampling.max_output)
    agency = Agency(gateway, forge, sampling, config.trader_input)
    return Desk(config, gateway, forge, agency, StrategyEngine(agency))
