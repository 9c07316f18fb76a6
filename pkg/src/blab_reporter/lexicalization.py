"""Template-based verbalization with Portuguese gender and number agreement.

Grammar file format (UTF-8, `#` comments):

    template <PREDICATE> weight=<w>
        <pattern line>
    lexicon <attribute_key> <surface> <masc|fem>
    gloss <attribute_key> <notation value> => <surface>

Pattern tokens:

    {slot}                  rendered attribute value
    {slot@masc|fem}         form chosen by the gender of the slot's noun
    {slot#singular|plural}  plural iff the numeric value is not 1
    {slot?yes|no}           form chosen by a boolean value
    «ENTITY:slot»           entity tag, left for referring expression generation

Alternation forms may embed plain `{slot}` tokens.
"""
import logging
import random
import re
from dataclasses import dataclass, field
from datetime import datetime
from decimal import Decimal, InvalidOperation
from enum import Enum
from typing import Optional

from .clock import local
from .errors import GrammarError, MissingAttribute, MissingLexiconEntry, MissingTemplate
from .selection import REQUIRED_ATTRIBUTES, AttrKind, AttrValue, IntentMessage, Predicate

logger = logging.getLogger(__name__)

ENTITY_TAG = re.compile(r"«ENTITY:([A-Za-z][A-Za-z0-9_]*)»")
SLOT_NAME = re.compile(r"[a-z][a-z0-9_]*")


class Gender(str, Enum):
    MASC = "masc"
    FEM = "fem"


@dataclass(frozen=True)
class Token:
    """One pattern piece: literal text, a slot, an alternation or an entity tag"""
    kind: str
    text: str = ""
    slot: str = ""
    forms: tuple[tuple["Token", ...], ...] = ()


@dataclass(frozen=True)
class Template:
    predicate: Predicate
    pattern: str
    weight: Decimal = Decimal(1)
    line: Optional[int] = field(default=None, compare=False)
    tokens: tuple[Token, ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        if not self.tokens:
            object.__setattr__(self, "tokens", tokenize(self.pattern))

    def slots(self) -> set[str]:
        return _slots(self.tokens)


@dataclass(frozen=True)
class LexiconEntry:
    surface: str
    gender: Gender
    attribute_key: str


@dataclass
class Grammar:
    templates: dict[Predicate, list[Template]] = field(default_factory=dict)
    lexicon: list[LexiconEntry] = field(default_factory=list)
    glosses: dict[tuple[str, str], str] = field(default_factory=dict)

    def templates_for(self, predicate: Predicate) -> list[Template]:
        found = self.templates.get(predicate)
        if not found:
            raise MissingTemplate(f"no template for {predicate.value}")
        return found

    def gender_of(self, slot: str, surface: str) -> Gender:
        for entry in self.lexicon:
            if entry.attribute_key == slot and entry.surface == surface:
                return entry.gender
        raise MissingLexiconEntry(f"no gender for {slot}={surface!r}")


def _split_forms(body: str, line: Optional[int]) -> list[str]:
    forms, depth, current = [], 0, []
    for char in body:
        if char == "{":
            depth += 1
        elif char == "}":
            depth -= 1
        if char == "|" and depth == 0:
            forms.append("".join(current))
            current = []
        else:
            current.append(char)
    forms.append("".join(current))
    if len(forms) != 2:
        raise GrammarError(f"alternation needs exactly two forms, got {len(forms)}", line=line)
    return forms


def tokenize(pattern: str, line: Optional[int] = None, nested: bool = False) -> tuple[Token, ...]:
    tokens: list[Token] = []
    literal: list[str] = []
    pos = 0

    def flush():
        if literal:
            tokens.append(Token("text", text="".join(literal)))
            literal.clear()

    while pos < len(pattern):
        char = pattern[pos]
        if char == "«":
            match = ENTITY_TAG.match(pattern, pos)
            if not match:
                raise GrammarError(f"malformed entity tag at column {pos + 1}", line=line)
            flush()
            tokens.append(Token("entity", slot=match.group(1)))
            pos = match.end()
        elif char == "{":
            depth, end = 0, pos
            while end < len(pattern):
                if pattern[end] == "{":
                    depth += 1
                elif pattern[end] == "}":
                    depth -= 1
                    if depth == 0:
                        break
                end += 1
            if depth != 0:
                raise GrammarError(f"unbalanced brace at column {pos + 1}", line=line)
            body = pattern[pos + 1:end]
            flush()
            tokens.append(_slot_token(body, line, nested))
            pos = end + 1
        elif char == "}":
            raise GrammarError(f"unbalanced brace at column {pos + 1}", line=line)
        else:
            literal.append(char)
            pos += 1
    flush()
    return tuple(tokens)


def _slot_token(body: str, line: Optional[int], nested: bool) -> Token:
    match = re.match(r"([a-z][a-z0-9_]*)(?:([@#?])(.*))?$", body, re.DOTALL)
    if not match:
        raise GrammarError(f"malformed slot {{{body}}}", line=line)
    slot, marker, rest = match.groups()
    if marker is None:
        return Token("slot", slot=slot)
    if nested:
        raise GrammarError(f"alternations cannot nest: {{{body}}}", line=line)
    kind = {"@": "gender", "#": "number", "?": "boolean"}[marker]
    forms = tuple(tokenize(form, line, nested=True) for form in _split_forms(rest, line))
    return Token(kind, slot=slot, forms=forms)


def _slots(tokens: tuple[Token, ...]) -> set[str]:
    found = set()
    for token in tokens:
        if token.kind != "text":
            found.add(token.slot)
        for form in token.forms:
            found |= _slots(form)
    return found


# Value rendering

UNIT_WORDS = {"meters": ("metro", "metros"), "days": ("dia", "dias")}
NO_SPACE_UNITS = {"ºC", "°C", "%"}


def decimal_comma(value: Decimal) -> str:
    text = format(value.normalize(), "f")
    return ("0" if text == "-0" else text).replace(".", ",")


def render_attr(value: AttrValue, slot: str, grammar: Grammar) -> str:
    """pt-BR surface form of an attribute value"""
    if value.kind == AttrKind.TEXT:
        return grammar.glosses.get((slot, value.value), value.value)
    if value.kind == AttrKind.BOOLEAN:
        return grammar.glosses.get((slot, "yes" if value.value else "no"), "sim" if value.value else "não")
    if value.kind == AttrKind.ENTITY:
        return f"«ENTITY:{value.value}»"
    if value.kind == AttrKind.TIMESTAMP:
        stamp = value.value
        if isinstance(stamp, datetime):
            stamp = local(stamp)
            return f"{stamp:%d/%m/%Y} às {stamp:%H}h{stamp:%M}"
        return f"{stamp:%d/%m/%Y}"
    number = decimal_comma(value.value)
    if not value.unit:
        return number
    if value.unit in NO_SPACE_UNITS:
        return number + value.unit
    singular, plural = UNIT_WORDS.get(value.unit, (value.unit, value.unit))
    return f"{number} {singular if abs(value.value) == 1 else plural}"


def _number_of(value: AttrValue, slot: str) -> Decimal:
    if value.kind == AttrKind.NUMBER:
        return value.value
    try:
        return Decimal(str(value.value))
    except (InvalidOperation, ValueError) as e:
        raise MissingAttribute(f"number agreement on non-numeric slot {slot}") from e


def _render(tokens: tuple[Token, ...], message: IntentMessage, grammar: Grammar) -> str:
    out = []
    for token in tokens:
        if token.kind == "text":
            out.append(token.text)
            continue
        if token.kind == "entity" and token.slot not in message.attributes and not token.slot.islower():
            # Literal entity id in the template
            out.append(f"«ENTITY:{token.slot}»")
            continue
        value = message.attributes.get(token.slot)
        if value is None:
            raise MissingAttribute(f"{message.predicate.value} has no attribute {token.slot}")
        if token.kind == "slot":
            out.append(render_attr(value, token.slot, grammar))
        elif token.kind == "entity":
            entity_id = value.value if value.kind == AttrKind.ENTITY else str(value.value)
            out.append(f"«ENTITY:{entity_id}»")
        elif token.kind == "gender":
            gender = grammar.gender_of(token.slot, render_attr(value, token.slot, grammar))
            out.append(_render(token.forms[0 if gender == Gender.MASC else 1], message, grammar))
        elif token.kind == "number":
            plural = abs(_number_of(value, token.slot)) != 1
            out.append(_render(token.forms[1 if plural else 0], message, grammar))
        elif token.kind == "boolean":
            if value.kind != AttrKind.BOOLEAN:
                raise MissingAttribute(f"boolean alternation on non-boolean slot {token.slot}")
            out.append(_render(token.forms[0 if value.value else 1], message, grammar))
    return "".join(out)


def fill(template: Template, message: IntentMessage, grammar: Grammar) -> str:
    """Sentence with slots rendered and entity tags left for REG"""
    return _render(template.tokens, message, grammar)


def choose_template(grammar: Grammar, predicate: Predicate, rng: random.Random) -> Template:
    """Weighted random choice; deterministic for a seeded generator"""
    candidates = grammar.templates_for(predicate)
    if len(candidates) == 1:
        return candidates[0]
    return rng.choices(candidates, weights=[float(t.weight) for t in candidates], k=1)[0]


# Loading

TEMPLATE_LINE = re.compile(r"template\s+(\S+)(?:\s+weight=(\S+))?\s*$")
LEXICON_LINE = re.compile(r"lexicon\s+([a-z][a-z0-9_]*)\s+(.+?)\s+(masc|fem)\s*$")
GLOSS_LINE = re.compile(r"gloss\s+([a-z][a-z0-9_]*)\s+(.+?)\s*=>\s*(.+?)\s*$")


@dataclass
class GrammarLoad:
    grammar: Grammar
    diagnostics: list[GrammarError]


def lint_grammar(text: str, source: Optional[str] = None, require_coverage: bool = True) -> GrammarLoad:
    """Parse a grammar, collecting every violation instead of stopping at the first"""
    grammar = Grammar()
    diagnostics: list[GrammarError] = []
    pending: Optional[tuple[Predicate, Decimal, int]] = None
    agreement_uses: list[tuple[str, int]] = []
    lexicon_keys: set[tuple[str, str]] = set()

    def report(message: str, line: int):
        diagnostics.append(GrammarError(message, line=line, source=source))

    lines = text.splitlines()
    for lineno, raw in enumerate(lines, start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if raw[:1].isspace():
            if pending is None:
                report("pattern line without a template header", lineno)
                continue
            predicate, weight, header_line = pending
            pending = None
            try:
                template = Template(predicate, stripped, weight, line=lineno,
                                    tokens=tokenize(stripped, lineno))
            except GrammarError as e:
                report(e.message, lineno)
                continue
            allowed = set(REQUIRED_ATTRIBUTES[predicate])
            for slot in sorted(template.slots()):
                if slot not in allowed and not _is_literal_entity(template, slot):
                    report(f"slot {{{slot}}} is not an attribute of {predicate.value}", lineno)
            agreement_uses.extend((slot, lineno) for slot in _agreement_slots(template.tokens))
            grammar.templates.setdefault(predicate, []).append(template)
            continue
        if pending is not None:
            report("template header without a pattern line", pending[2])
            pending = None
        if match := TEMPLATE_LINE.fullmatch(stripped):
            predicate = Predicate.lookup(match.group(1))
            if predicate is None:
                report(f"unknown predicate {match.group(1)}", lineno)
                continue
            try:
                weight = Decimal(match.group(2) or "1")
                if not weight.is_finite() or weight <= 0:
                    raise InvalidOperation
            except InvalidOperation:
                report(f"weight must be a positive number, got {match.group(2)}", lineno)
                continue
            pending = (predicate, weight, lineno)
        elif match := LEXICON_LINE.fullmatch(stripped):
            key, surface, gender = match.groups()
            if (key, surface) in lexicon_keys:
                report(f"duplicate lexicon entry {key} {surface}", lineno)
                continue
            lexicon_keys.add((key, surface))
            grammar.lexicon.append(LexiconEntry(surface, Gender(gender), key))
        elif match := GLOSS_LINE.fullmatch(stripped):
            key, value, surface = match.groups()
            grammar.glosses[(key, value)] = surface
        else:
            report(f"unrecognized line: {stripped}", lineno)
    if pending is not None:
        report("template header without a pattern line", pending[2])

    covered = {entry.attribute_key for entry in grammar.lexicon}
    for slot, lineno in agreement_uses:
        if slot not in covered:
            report(f"gender agreement on {{{slot}}} has no lexicon entry", lineno)
    if require_coverage:
        for predicate in Predicate:
            if not grammar.templates.get(predicate):
                report(f"no template for {predicate.value}", len(lines) or 1)
    return GrammarLoad(grammar, diagnostics)


def _is_literal_entity(template: Template, slot: str) -> bool:
    return not slot.islower() and any(t.kind == "entity" and t.slot == slot for t in template.tokens)


def _agreement_slots(tokens: tuple[Token, ...]) -> list[str]:
    return [token.slot for token in tokens if token.kind == "gender"]


def load_grammar(text: str, source: Optional[str] = None, require_coverage: bool = True) -> Grammar:
    """Parse grammar text; raises the first GrammarError found"""
    loaded = lint_grammar(text, source, require_coverage)
    if loaded.diagnostics:
        raise loaded.diagnostics[0]
    logger.debug("Loaded grammar with %d templates", sum(len(t) for t in loaded.grammar.templates.values()))
    return loaded.grammar
