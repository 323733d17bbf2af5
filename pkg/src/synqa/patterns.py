"""A small tree-pattern language for constituency trees.

Rules are written one per ``rule NAME: ...`` statement; ``#`` starts a line
comment.  A rule body is one or more parenthesized child sequences
("branches") separated by ``|``; the first symbol inside a branch is the
matcher for the node itself, the rest describe its ordered children::

    rule GS: (S _* ?GS:_%SBJ _* VP _*)

Matcher syntax:

================  =====================================================
``_``             any category
``NP``            literal category (function tags are ignored)
``'.'``           quoted literal, for categories that collide with
                  punctuation in the grammar (e.g. ``':'``)
``_%SBJ``         any category carrying the SBJ function tag
``NP%SBJ``        literal category carrying the tag
``NP%``           literal category carrying *no* function tags
``VB@``           part-of-speech family (``VB@`` = the VB-prefixed verb
                  tags VB, VBD, VBG, VBN, VBP, VBZ)
``A|B``           alternation (either side)
``!X``            negation
``(A|B)``         grouping, e.g. ``(RB|ADVP)*``
``&NAME``         the child subtree must match rule NAME
================  =====================================================

Item syntax (inside a branch, after the root matcher):

================  =====================================================
``X*``            the matcher repeated over zero or more siblings
``?name:X``       capture the matched child under ``name``
``X(...)``        nested child sequence; the parenthesis must be
                  attached, e.g. ``VP(VBG|VBN _*)``
``@self``         recursion point: the child must match this rule again
================  =====================================================

A rule may be anchored on its parent with ``^`` before the first branch
(``^!VP`` = the matched node's parent is not a VP; the tree root
satisfies any negated anchor).  A rule containing ``@self`` is recursive
and must also have a branch without ``@self`` (the base case).  In a
recursive rule the first item of every branch is the level's head; the
heads collected along the recursion, top-down, form the binding's chain.

Matching enumerates every way a child sequence can be consumed
(backtracking over star splits, shortest first), deduplicates
assignments by their capture spans, and is pure: rule sets are
immutable after compilation and safe to share across threads.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence, Union

from .treebank import NodeLabel, TreeNode

VERB_FAMILY = frozenset({"VB", "VBD", "VBG", "VBN", "VBP", "VBZ"})

_FAMILIES = {"VB": VERB_FAMILY}


class PatternError(ValueError):
    pass


class PatternSyntaxError(PatternError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} at line {line}, column {col}")
        self.line = line
        self.col = col


class PatternSemanticsError(PatternError):
    def __init__(self, message: str, rule: str):
        super().__init__(f"rule {rule}: {message}")
        self.rule = rule


# ---------------------------------------------------------------------------
# Matchers

@dataclass(frozen=True)
class Wildcard:
    pass


@dataclass(frozen=True)
class Literal:
    category: str


@dataclass(frozen=True)
class FunctionTag:
    tag: str


@dataclass(frozen=True)
class PosFamily:
    prefix: str


@dataclass(frozen=True)
class Untagged:
    """Matches labels that carry no function tags (coindex is ignored)."""


@dataclass(frozen=True)
class Negation:
    inner: "Matcher"


@dataclass(frozen=True)
class Alternation:
    options: tuple["Matcher", ...]


@dataclass(frozen=True)
class Conjunction:
    parts: tuple["Matcher", ...]


@dataclass(frozen=True)
class SelfRef:
    pass


@dataclass(frozen=True)
class RuleRef:
    name: str


Matcher = Union[Wildcard, Literal, FunctionTag, PosFamily, Untagged,
                Negation, Alternation, Conjunction]


def label_matches(matcher: Matcher, label: NodeLabel) -> bool:
    """Decide whether a single node label satisfies a matcher."""
    if isinstance(matcher, Wildcard):
        return True
    if isinstance(matcher, Literal):
        return label.category == matcher.category
    if isinstance(matcher, FunctionTag):
        return matcher.tag in label.function_tags
    if isinstance(matcher, PosFamily):
        family = _FAMILIES.get(matcher.prefix)
        if family is not None:
            return label.category in family
        return label.category.startswith(matcher.prefix)
    if isinstance(matcher, Untagged):
        return not label.function_tags
    if isinstance(matcher, Negation):
        return not label_matches(matcher.inner, label)
    if isinstance(matcher, Alternation):
        return any(label_matches(opt, label) for opt in matcher.options)
    if isinstance(matcher, Conjunction):
        return all(label_matches(part, label) for part in matcher.parts)
    raise TypeError(f"not a label matcher: {matcher!r}")


def _accepts_missing_parent(matcher: Matcher) -> bool:
    # "not under X" is satisfiable at the tree root; a positive anchor is not.
    return isinstance(matcher, Negation)


# ---------------------------------------------------------------------------
# Compiled rules

@dataclass(frozen=True)
class ChildItem:
    matcher: Union[Matcher, SelfRef, RuleRef]
    star: bool = False
    capture: Optional[str] = None
    nested: Optional[tuple["ChildItem", ...]] = None


@dataclass(frozen=True)
class Branch:
    root: Matcher
    items: tuple[ChildItem, ...]

    @property
    def is_recursive(self) -> bool:
        return any(isinstance(i.matcher, SelfRef) for i in self.items)


@dataclass(frozen=True)
class PatternRule:
    name: str
    branches: tuple[Branch, ...]
    parent_constraint: Optional[Matcher] = None

    @property
    def recursive(self) -> bool:
        return any(b.is_recursive for b in self.branches)


@dataclass(frozen=True)
class MatchBinding:
    """One successful rule application.

    ``node`` is the matched subtree root, ``captures`` maps capture names
    to nodes, ``chain`` holds the per-level head leaves of a recursive
    match (empty for non-recursive rules), and ``branch`` is the index of
    the branch that matched at the top level.
    """

    rule: str
    node: TreeNode
    captures: dict[str, TreeNode]
    chain: tuple[TreeNode, ...] = ()
    branch: int = 0


@dataclass(frozen=True)
class PatternRuleSet:
    rules: dict[str, PatternRule]

    def __iter__(self) -> Iterator[PatternRule]:
        return iter(self.rules.values())

    def __getitem__(self, name: str) -> PatternRule:
        if name not in self.rules:
            raise KeyError(f"unknown rule {name!r}")
        return self.rules[name]

    def match(self, name: str, root: TreeNode) -> list[MatchBinding]:
        return match_rule(self, name, root)


# ---------------------------------------------------------------------------
# Matching engine

@dataclass(frozen=True)
class _Partial:
    captures: tuple[tuple[str, TreeNode], ...] = ()
    chain: tuple[TreeNode, ...] = ()

    def merged(self, other: "_Partial") -> "_Partial":
        return _Partial(self.captures + other.captures, self.chain + other.chain)


def _item_matches_label(item: ChildItem, child: TreeNode, rules: Optional[PatternRuleSet],
                        rule: Optional[PatternRule]) -> bool:
    if isinstance(item.matcher, SelfRef):
        raise PatternError("@self outside a rule context")
    if isinstance(item.matcher, RuleRef):
        if rules is None:
            raise PatternError("rule reference requires a rule set")
        return bool(_match_at(rules[item.matcher.name], child, rules))
    return label_matches(item.matcher, child.label)


def _star_child_ok(item: ChildItem, child: TreeNode, rules: Optional[PatternRuleSet],
                   rule: Optional[PatternRule]) -> bool:
    if not _item_matches_label(item, child, rules, rule):
        return False
    if item.nested is None:
        return True
    return any(True for _ in _sequence(item.nested, child.children, rules, rule))


def _single_item(item: ChildItem, child: TreeNode, rules: Optional[PatternRuleSet],
                 rule: Optional[PatternRule]) -> Iterator[_Partial]:
    """All ways one (non-star, non-self) item can accept one child."""
    if not _item_matches_label(item, child, rules, rule):
        return
    own = ((item.capture, child),) if item.capture else ()
    if item.nested is None:
        yield _Partial(own)
        return
    for sub in _sequence(item.nested, child.children, rules, rule):
        yield _Partial(own + sub.captures, sub.chain)


def _sequence(items: Sequence[ChildItem], children: Sequence[TreeNode],
              rules: Optional[PatternRuleSet], rule: Optional[PatternRule],
              ) -> Iterator[_Partial]:
    """Enumerate every assignment of a child sequence to an item sequence."""

    def go(i: int, j: int) -> Iterator[_Partial]:
        if i == len(items):
            if j == len(children):
                yield _Partial()
            return
        item = items[i]
        if isinstance(item.matcher, SelfRef):
            if rule is None or rules is None:
                raise PatternError("@self outside a rule context")
            if j < len(children):
                for sub in _match_at(rule, children[j], rules):
                    for rest in go(i + 1, j + 1):
                        yield sub.merged(rest)
            return
        if item.star:
            jj = j
            while True:
                yield from go(i + 1, jj)
                if jj < len(children) and _star_child_ok(item, children[jj], rules, rule):
                    jj += 1
                else:
                    return
        if j < len(children):
            for own in _single_item(item, children[j], rules, rule):
                for rest in go(i + 1, j + 1):
                    yield own.merged(rest)

    return go(0, 0)


@dataclass(frozen=True)
class _MatchResult(_Partial):
    branch: int = 0

    def merged(self, other: _Partial) -> _Partial:  # recursion drops branch ids
        return _Partial(self.captures + other.captures, self.chain + other.chain)


def _match_at(rule: PatternRule, node: TreeNode, rules: PatternRuleSet,
              ) -> list[_MatchResult]:
    """Match a rule at a specific node (no parent anchor), all branches."""
    results: list[_MatchResult] = []
    for bi, branch in enumerate(rule.branches):
        if not label_matches(branch.root, node.label):
            continue
        for res in _sequence(branch.items, node.children, rules, rule):
            chain = res.chain
            if rule.recursive:
                # The first branch item is the level head by construction.
                chain = (node.children[0],) + chain
            results.append(_MatchResult(res.captures, chain, bi))
    return results


def match_rule(rules: PatternRuleSet, name: str, root: TreeNode) -> list[MatchBinding]:
    """Apply a rule to every node of a tree, in pre-order.

    Bindings are deduplicated by (node, capture spans, chain spans) and
    returned in a deterministic order.  Recursive rules yield one binding
    per admissible recursion depth at each matching node.
    """
    rule = rules[name]
    bindings: list[MatchBinding] = []
    seen: set = set()

    def walk(node: TreeNode, parent: Optional[TreeNode]) -> None:
        if _parent_ok(rule, parent):
            for res in _match_at(rule, node, rules):
                key = (
                    id(node),
                    tuple(sorted((k, v.span) for k, v in res.captures)),
                    tuple(n.span for n in res.chain),
                )
                if key in seen:
                    continue
                seen.add(key)
                bindings.append(MatchBinding(
                    rule=name,
                    node=node,
                    captures=dict(res.captures),
                    chain=res.chain,
                    branch=res.branch,
                ))
        for child in node.children:
            walk(child, node)

    walk(root, None)
    return bindings


def _parent_ok(rule: PatternRule, parent: Optional[TreeNode]) -> bool:
    if rule.parent_constraint is None:
        return True
    if parent is None:
        return _accepts_missing_parent(rule.parent_constraint)
    return label_matches(rule.parent_constraint, parent.label)


def match_children(items: Sequence[ChildItem], children: Sequence[TreeNode],
                   rules: Optional[PatternRuleSet] = None) -> list[dict[str, TreeNode]]:
    """All ways an item sequence can consume a child list.

    Returns one capture map per distinct assignment (distinct by capture
    spans).  ``@self`` items are rejected: recursion only makes sense
    through :func:`match_rule`.
    """
    out: list[dict[str, TreeNode]] = []
    seen: set = set()
    for res in _sequence(items, children, rules, None):
        key = tuple(sorted((k, v.span) for k, v in res.captures))
        if key in seen:
            continue
        seen.add(key)
        out.append(dict(res.captures))
    return out


# ---------------------------------------------------------------------------
# Compiler

_WORD_BREAK = set("()|*!%^?:&' \t\r\n")


@dataclass(frozen=True)
class _Token:
    kind: str  # word, quoted, or a single punctuation character
    text: str
    line: int
    col: int
    attached: bool  # no whitespace between this token and the previous one


def _lex(source: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col = 1, 1
    i, n = 0, len(source)
    attached = False
    while i < n:
        c = source[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            attached = False
            continue
        if c in " \t\r":
            i += 1
            col += 1
            attached = False
            continue
        if c == "#":
            while i < n and source[i] != "\n":
                i += 1
            continue
        if c == "'":
            j = source.find("'", i + 1)
            if j < 0:
                raise PatternSyntaxError("unterminated quoted label", line, col)
            tokens.append(_Token("quoted", source[i + 1:j], line, col, attached))
            col += j + 1 - i
            i = j + 1
            attached = True
            continue
        if c in "()|*!%^?:&":
            tokens.append(_Token(c, c, line, col, attached))
            i += 1
            col += 1
            attached = True
            continue
        j = i
        while j < n and source[j] not in _WORD_BREAK and source[j] != "#":
            j += 1
        tokens.append(_Token("word", source[i:j], line, col, attached))
        col += j - i
        i = j
        attached = True
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> Optional[_Token]:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self) -> _Token:
        tok = self.peek()
        if tok is None:
            last = self.tokens[-1] if self.tokens else _Token("", "", 1, 1, False)
            raise PatternSyntaxError("unexpected end of input", last.line, last.col)
        self.pos += 1
        return tok

    def expect(self, kind: str) -> _Token:
        tok = self.next()
        if tok.kind != kind:
            raise PatternSyntaxError(f"expected {kind!r}, found {tok.text!r}", tok.line, tok.col)
        return tok

    def error(self, message: str) -> PatternSyntaxError:
        tok = self.peek() or self.tokens[-1]
        return PatternSyntaxError(message, tok.line, tok.col)

    # grammar ---------------------------------------------------------

    def parse_rules(self) -> list[PatternRule]:
        rules = []
        while self.peek() is not None:
            rules.append(self.parse_rule())
        return rules

    def parse_rule(self) -> PatternRule:
        kw = self.expect("word")
        if kw.text != "rule":
            raise PatternSyntaxError("expected 'rule'", kw.line, kw.col)
        name = self.expect("word").text
        self.expect(":")
        parent = None
        if self.peek() and self.peek().kind == "^":
            self.next()
            parent, _ = self.parse_unary()
        branches = [self.parse_branch()]
        while self.peek() and self.peek().kind == "|":
            self.next()
            branches.append(self.parse_branch())
        return PatternRule(name=name, branches=tuple(branches), parent_constraint=parent)

    def parse_branch(self) -> Branch:
        self.expect("(")
        root = self.parse_alt()
        items = []
        while self.peek() and self.peek().kind != ")":
            items.append(self.parse_item())
        self.expect(")")
        return Branch(root=root, items=tuple(items))

    def parse_item(self) -> ChildItem:
        capture = None
        if self.peek().kind == "?":
            self.next()
            capture = self.expect("word").text
            self.expect(":")
        tok = self.peek()
        if tok.kind == "word" and tok.text == "@self":
            self.next()
            if capture is not None:
                raise PatternSyntaxError("@self cannot be captured", tok.line, tok.col)
            return ChildItem(matcher=SelfRef())
        matcher, nested = self.parse_alt(allow_nested=True)
        star = False
        if self.peek() and self.peek().kind == "*":
            self.next()
            star = True
        return ChildItem(matcher=matcher, star=star, capture=capture, nested=nested)

    def parse_alt(self, allow_nested: bool = False):
        """Parse ``unary (| unary)*``; with ``allow_nested`` returns
        ``(matcher, nested-items-or-None)``."""
        first, nested = self.parse_unary(allow_nested=allow_nested)
        options = [first]
        while self.peek() and self.peek().kind == "|":
            if nested is not None:
                raise self.error("a nested sequence must be the item's only matcher")
            self.next()
            nxt, _ = self.parse_unary(allow_nested=False)
            options.append(nxt)
        matcher = options[0] if len(options) == 1 else Alternation(tuple(options))
        if allow_nested:
            return matcher, nested
        return matcher

    def parse_unary(self, allow_nested: bool = False) -> tuple:
        tok = self.peek()
        if tok is None:
            raise self.error("unexpected end of input")
        if tok.kind == "!":
            self.next()
            inner, _ = self.parse_unary(allow_nested=False)
            return Negation(inner), None
        return self.parse_primary(allow_nested=allow_nested)

    def parse_primary(self, allow_nested: bool = False):
        tok = self.next()
        nested = None
        if tok.kind == "(":
            matcher = self.parse_alt()
            self.expect(")")
            return matcher, nested
        if tok.kind == "&":
            name = self.expect("word").text
            return RuleRef(name), nested
        if tok.kind == "quoted":
            matcher: Matcher = Literal(tok.text)
        elif tok.kind == "word":
            word = tok.text
            if word == "_":
                matcher = Wildcard()
            elif word.endswith("@") and len(word) > 1:
                matcher = PosFamily(word[:-1])
            elif word == "@self":
                raise PatternSyntaxError("@self is not allowed here", tok.line, tok.col)
            else:
                matcher = Literal(word)
        else:
            raise PatternSyntaxError(f"unexpected {tok.text!r}", tok.line, tok.col)
        # attached % introduces a function-tag constraint; a bare % means
        # "no function tags at all"
        nxt = self.peek()
        if nxt is not None and nxt.kind == "%" and nxt.attached:
            self.next()
            tag_tok = self.peek()
            if tag_tok is not None and tag_tok.kind == "word" and tag_tok.attached:
                self.next()
                constraint: Matcher = FunctionTag(tag_tok.text)
            else:
                constraint = Untagged()
            if isinstance(matcher, Wildcard):
                matcher = constraint
            else:
                matcher = Conjunction((matcher, constraint))
        if allow_nested:
            nxt = self.peek()
            if nxt is not None and nxt.kind == "(" and nxt.attached:
                self.next()
                items = []
                while self.peek() and self.peek().kind != ")":
                    items.append(self.parse_item())
                self.expect(")")
                nested = tuple(items)
        return matcher, nested


def _validate(rules: list[PatternRule]) -> PatternRuleSet:
    by_name: dict[str, PatternRule] = {}
    for rule in rules:
        if rule.name in by_name:
            raise PatternSemanticsError("duplicate rule name", rule.name)
        by_name[rule.name] = rule
    for rule in rules:
        recursive = rule.recursive
        has_base = any(not b.is_recursive for b in rule.branches)
        if recursive and not has_base:
            raise PatternSemanticsError("recursion lacks a base case", rule.name)
        for branch in rule.branches:
            names: set[str] = set()
            self_count = 0
            for idx, item in enumerate(branch.items):
                if isinstance(item.matcher, SelfRef):
                    self_count += 1
                    if item.star:
                        raise PatternSemanticsError("@self cannot be starred", rule.name)
                    if item.nested is not None:
                        raise PatternSemanticsError("@self cannot nest", rule.name)
                if item.star and item.capture:
                    raise PatternSemanticsError("capture on a starred item", rule.name)
                if item.star and item.nested and _nested_captures(item.nested):
                    raise PatternSemanticsError(
                        "captures inside a starred item would repeat", rule.name)
                for cap in _item_captures(item):
                    if cap in names:
                        raise PatternSemanticsError(f"duplicate capture {cap!r}", rule.name)
                    names.add(cap)
                _check_refs(item, by_name, rule.name)
            if self_count > 1:
                raise PatternSemanticsError("more than one @self in a branch", rule.name)
            if recursive:
                if not branch.items:
                    raise PatternSemanticsError(
                        "a recursive rule's branch needs a head item", rule.name)
                first = branch.items[0]
                if first.star or isinstance(first.matcher, SelfRef):
                    raise PatternSemanticsError(
                        "a recursive rule's branch must start with a single head item",
                        rule.name)
                if branch.is_recursive and names:
                    raise PatternSemanticsError(
                        "captures in a recursive step branch would repeat", rule.name)
    return PatternRuleSet(dict(by_name))


def _item_captures(item: ChildItem) -> list[str]:
    out = [item.capture] if item.capture else []
    out.extend(_nested_captures(item.nested or ()))
    return out


def _nested_captures(items: Sequence[ChildItem]) -> list[str]:
    out: list[str] = []
    for item in items:
        out.extend(_item_captures(item))
    return out


def _check_refs(item: ChildItem, by_name: dict[str, PatternRule], rule: str) -> None:
    if isinstance(item.matcher, RuleRef) and item.matcher.name not in by_name:
        raise PatternSemanticsError(f"unknown rule reference &{item.matcher.name}", rule)
    for sub in item.nested or ():
        if isinstance(sub.matcher, SelfRef):
            raise PatternSemanticsError("@self inside a nested sequence", rule)
        _check_refs(sub, by_name, rule)


def compile_pattern(source: str) -> PatternRuleSet:
    """Compile rule text into a validated, immutable rule set."""
    parser = _Parser(_lex(source))
    return _validate(parser.parse_rules())


def load_rules(path: str) -> PatternRuleSet:
    with open(path, encoding="utf-8") as fh:
        return compile_pattern(fh.read())
