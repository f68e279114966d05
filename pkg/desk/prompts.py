# desk/prompts.py
"""
Prompt forge: loads the role templates shipped in desk/templates and renders
them for one PromptVariant. The variant only ever touches two spans, the
trader's objective sentence and the head trader's seniority word.
"""
import hashlib
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import jinja2
import yaml
from jinja2 import meta

from .domain import PromptVariant
from .errors import ConfigError, MissingSlot

TEMPLATE_DIR = Path(__file__).parent / "templates"
VARIANT_VARS = ("objective", "seniority")


class Role(str, Enum):
    ANALYST = "analyst"
    TRADER_FROM_NEWS = "trader_from_news"
    TRADER_FROM_ANALYSIS = "trader_from_analysis"
    TRADER_FROM_BOTH = "trader_from_both"
    HEAD_TRADER = "head_trader"
    HEAD_TRADER_DUAL = "head_trader_dual"


@dataclass(frozen=True)
class PromptTemplate:
    role: Role
    body: str
    slots: tuple
    digest: str


class PromptForge:
    def __init__(self, template_dir=TEMPLATE_DIR):
        self.template_dir = Path(template_dir)
        with open(self.template_dir / "manifest.yaml", encoding="utf-8") as fh:
            self.manifest = yaml.safe_load(fh)
        self.env = jinja2.Environment(
            undefined=jinja2.StrictUndefined,
            autoescape=False,
        )
        self.slot_labels = self.manifest.get("slot_labels", {})
        self.objectives = self.manifest["variants"]["objective"]
        self.seniority_words = self.manifest["variants"]["seniority"]
        self.templates = {role: self._load(role) for role in Role}
        self._compiled = {role: self.env.from_string(tpl.body) for role, tpl in self.templates.items()}

    def _load(self, role: Role) -> PromptTemplate:
        entry = self.manifest["roles"].get(role.value)
        if entry is None:
            raise ConfigError(f"template manifest has no entry for role '{role.value}'")
        path = self.template_dir / entry["file"]
        body = path.read_text(encoding="utf-8")
        declared = set(entry["slots"])
        found = meta.find_undeclared_variables(self.env.parse(body)) - set(VARIANT_VARS)
        if found != declared:
            raise ConfigError(f"{path.name}: placeholders {sorted(found)} != manifest slots {sorted(declared)}")
        unknown = declared - set(self.slot_labels)
        if unknown:
            raise ConfigError(f"{path.name}: unknown slots {sorted(unknown)}")
        return PromptTemplate(role, body, tuple(entry["slots"]), hashlib.sha256(body.encode("utf-8")).hexdigest())

    def template(self, role) -> PromptTemplate:
        return self.templates[Role(role)]

    def digests(self):
        return {role.value: tpl.digest for role, tpl in self.templates.items()}

    def render(self, role, variant: PromptVariant, bindings: dict) -> str:
        tpl = self.template(role)
        for slot in tpl.slots:
            value = bindings.get(slot)
            if value is None or not str(value).strip():
                raise MissingSlot(slot, tpl.role.value)
        context = {slot: str(bindings[slot]) for slot in tpl.slots}
        context["objective"] = self.objectives[variant.horizon.value]
        context["seniority"] = self.seniority_words[variant.seniority.value]
        try:
            return self._compiled[tpl.role].render(**context)
        except jinja2.UndefinedError as e:
            raise MissingSlot(str(e), tpl.role.value)


_default_forge = None


def default_forge() -> PromptForge:
    global _default_forge
    if _default_forge is None:
        _default_forge = PromptForge()
    return _default_forge


def render(template, variant: PromptVariant, bindings: dict) -> str:
    """render(role or PromptTemplate, variant, slot -> text) with the shipped templates."""
    role = template.role if isinstance(template, PromptTemplate) else template
    return default_forge().render(role, variant, bindings)
