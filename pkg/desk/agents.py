# desk/agents.py
"""
One agent step = render a prompt, make one gateway call, parse the reply.

Replies follow the prompt's response template:
    [Action]: long | short | neither            (traders)
    [Action]: Follow | Not Follow               (head trader, one suggestion)
    [Action]: Follow Trader A | B | Not Follow  (head trader, two suggestions)
    [Thoughts]: free text
Anything outside that vocabulary is a typed parse error, never a default.
"""
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .domain import AgentAction, NewsArticle, PromptVariant, is_actionable
from .errors import ArticleSkipped, GatewayError, MissingSlot, ParseError, UnparsableAction, UnparsableVerdict
from .gateway import CompletionRequest, LLMGateway, Sampling
from .prompts import PromptForge, Role

logger = logging.getLogger(__name__)

_ACTION_MARKER = re.compile(r"\[\s*action\s*\]", re.IGNORECASE)
_THOUGHTS_MARKER = re.compile(r"\[\s*thoughts?\s*\]", re.IGNORECASE)
_LEAD_NOISE = re.compile(r"^[\s:：\-–—=>*_`'\"“”‘’(\[]*")
_WORD = re.compile(r"[a-z]+")


class Verdict(str, Enum):
    FOLLOW = "follow"
    NOT_FOLLOW = "not_follow"
    FOLLOW_TRADER_A = "follow_trader_a"
    FOLLOW_TRADER_B = "follow_trader_b"

    @property
    def approves(self) -> bool:
        return self is not Verdict.NOT_FOLLOW


@dataclass(frozen=True)
class AgentCall:
    """Transcript of one agent call: (prompt, raw response, parsed result)."""

    role: str
    backend: str
    cache_key: str
    prompt: str
    raw: str
    parsed: str


@dataclass(frozen=True)
class AnalystReport:
    article_id: str
    text: str
    backend: str = ""

    def __post_init__(self):
        if not self.text:
            raise ValueError("analyst report text must be non-empty")


@dataclass(frozen=True)
class TraderSuggestion:
    action: AgentAction
    thoughts: str
    backend: str
    raw: str

    def as_prompt_text(self) -> str:
        # what the head trader is shown: the decision and rationale, nothing else
        text = f"[Action]: {self.action.value}"
        if self.thoughts:
            text += f"\n[Thoughts]: {self.thoughts}"
        return text


@dataclass(frozen=True)
class HeadTraderVerdict:
    verdict: Verdict
    thoughts: str
    raw: str
    backend: str = ""


@dataclass
class StepResult:
    value: object
    calls: list = field(default_factory=list)


def _after_marker(raw: str, marker: re.Pattern) -> Optional[str]:
    m = marker.search(raw)
    if m is None:
        return None
    return raw[m.end():]


def _action_segment(raw: str) -> Optional[str]:
    """Text between the first [Action] marker and the end of its line or the [Thoughts] marker."""
    rest = _after_marker(raw, _ACTION_MARKER)
    if rest is None:
        return None
    cut = _THOUGHTS_MARKER.search(rest)
    if cut:
        rest = rest[:cut.start()]
    rest = _LEAD_NOISE.sub("", rest)
    return rest.split("\n", 1)[0]


def _thoughts(raw: str) -> str:
    rest = _after_marker(raw, _THOUGHTS_MARKER)
    if rest is None:
        return ""
    return _LEAD_NOISE.sub("", rest).strip()


def parse_trader_reply(raw: str) -> tuple:
    """(AgentAction, thoughts) from a trader reply; UnparsableAction otherwise."""
    segment = _action_segment(raw or "")
    if segment is None:
        raise UnparsableAction("no [Action] marker", raw)
    token = _WORD.search(segment.lower())
    if token is None:
        raise UnparsableAction("empty [Action] field", raw)
    try:
        action = AgentAction(token.group(0))
    except ValueError:
        raise UnparsableAction(f"'{token.group(0)}' is not one of long/short/neither", raw)
    return action, _thoughts(raw)


def parse_head_trader_reply(raw: str, context: str = "single") -> HeadTraderVerdict:
    """context: 'single' (Follow / Not Follow) or 'dual' (Follow Trader A / B / Not Follow)."""
    if context not in ("single", "dual"):
        raise ValueError(f"context must be 'single' or 'dual', got {context!r}")
    segment = _action_segment(raw or "")
    if segment is None:
        raise UnparsableVerdict("no [Action] marker", raw)
    words = " ".join(_WORD.findall(segment.lower()))
    thoughts = _thoughts(raw)
    # the longer phrase first: "not follow" contains "follow"
    if re.match(r"not follow\b", words):
        return HeadTraderVerdict(Verdict.NOT_FOLLOW, thoughts, raw)
    if context == "single":
        if re.match(r"follow\b", words):
            return HeadTraderVerdict(Verdict.FOLLOW, thoughts, raw)
        raise UnparsableVerdict(f"expected Follow / Not Follow, got '{segment.strip()}'", raw)
    m = re.match(r"follow (?:trader )?([ab])\b", words)
    if m is None:
        raise UnparsableVerdict(f"expected Follow Trader A / B or Not Follow, got '{segment.strip()}'", raw)
    verdict = Verdict.FOLLOW_TRADER_A if m.group(1) == "a" else Verdict.FOLLOW_TRADER_B
    return HeadTraderVerdict(verdict, thoughts, raw)


class Agency:
    """Runs analyst, trader and head-trader steps against one gateway."""

    def __init__(self, gateway: LLMGateway, forge: PromptForge, sampling: Sampling = None,
                 trader_input: str = "news_and_analysis"):
        if trader_input not in ("news_and_analysis", "analysis"):
            raise ValueError(f"unknown trader_input {trader_input!r}")
        self.gateway = gateway
        self.forge = forge
        self.sampling = sampling or Sampling()
        self.trader_input = trader_input

    def _call(self, stage, role, variant, bindings, backend):
        try:
            prompt = self.forge.render(role, variant, bindings)
            resp = self.gateway.complete(CompletionRequest(backend, prompt, self.sampling))
        except (GatewayError, MissingSlot) as e:
            raise ArticleSkipped(stage, e)
        return prompt, resp

    @staticmethod
    def _news_bindings(article: NewsArticle):
        return {
            "company": article.company_name,
            "news_title": article.title,
            "news_content": article.content,
        }

    def run_analyst(self, article: NewsArticle, backend: str) -> StepResult:
        prompt, resp = self._call("analyst", Role.ANALYST, PromptVariant(), self._news_bindings(article), backend)
        report = AnalystReport(article.article_id, resp.text, backend)
        call = AgentCall(Role.ANALYST.value, backend, resp.cache_key, prompt, resp.text, "report")
        return StepResult(report, [call])

    def trader_role(self, analysis: Optional[AnalystReport]) -> Role:
        if analysis is None:
            return Role.TRADER_FROM_NEWS
        if self.trader_input == "analysis":
            return Role.TRADER_FROM_ANALYSIS
        return Role.TRADER_FROM_BOTH

    def run_trader(self, article: NewsArticle, analysis: Optional[AnalystReport],
                   variant: PromptVariant, backend: str) -> StepResult:
        role = self.trader_role(analysis)
        bindings = self._news_bindings(article)
        if analysis is not None:
            bindings["analysis"] = analysis.text
        prompt, resp = self._call("trader", role, variant, bindings, backend)
        try:
            action, thoughts = parse_trader_reply(resp.text)
        except ParseError as e:
            failed = AgentCall(role.value, backend, resp.cache_key, prompt, resp.text, type(e).__name__)
            raise ArticleSkipped("trader", e, [failed])
        suggestion = TraderSuggestion(action, thoughts, backend, resp.text)
        call = AgentCall(role.value, backend, resp.cache_key, prompt, resp.text, action.value)
        return StepResult(suggestion, [call])

    def run_head_trader(self, article: NewsArticle, analysis: AnalystReport, suggestions,
                        variant: PromptVariant, backend: str) -> StepResult:
        suggestions = list(suggestions)
        if len(suggestions) not in (1, 2):
            raise ValueError("the head trader reviews one or two suggestions")
        if not all(is_actionable(s.action) for s in suggestions):
            raise ValueError("only long/short suggestions reach the head trader")
        bindings = self._news_bindings(article)
        bindings["analysis"] = analysis.text
        if len(suggestions) == 1:
            role, context = Role.HEAD_TRADER, "single"
            bindings["suggestion"] = suggestions[0].as_prompt_text()
        else:
            role, context = Role.HEAD_TRADER_DUAL, "dual"
            bindings["suggestion_a"] = suggestions[0].as_prompt_text()
            bindings["suggestion_b"] = suggestions[1].as_prompt_text()
        prompt, resp = self._call("head_trader", role, variant, bindings, backend)
        try:
            parsed = parse_head_trader_reply(resp.text, context)
        except ParseError as e:
            failed = AgentCall(role.value, backend, resp.cache_key, prompt, resp.text, type(e).__name__)
            raise ArticleSkipped("head_trader", e, [failed])
        verdict = HeadTraderVerdict(parsed.verdict, parsed.thoughts, parsed.raw, backend)
        call = AgentCall(role.value, backend, resp.cache_key, prompt, resp.text, verdict.verdict.value)
        return StepResult(verdict, [call])
