"""Penn-Treebank-style bracketed constituency trees.

Reads ``.mrg``-style files (one or more bracketed trees, whitespace
insensitive, optionally wrapped in an extra outer pair of parentheses),
splits node labels into category / function tags / coindex, assigns token
spans, and offers the small set of navigation helpers the rest of the
pipeline needs.  All types are immutable after construction and safe to
share across threads.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Iterator, Optional


class TreebankError(ValueError):
    """Malformed bracketed input; ``offset`` is the byte position."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


@dataclass(frozen=True)
class NodeLabel:
    """A node label split into category, function tags, and coindex.

    ``NP-SBJ-1`` becomes category ``NP``, tags ``("SBJ",)``, coindex ``1``.
    Labels whose raw form begins with ``-`` (``-NONE-``, ``-LRB-``) are
    atomic categories with no tags.
    """

    category: str
    function_tags: tuple[str, ...] = ()
    coindex: Optional[int] = None

    @staticmethod
    def parse(raw: str) -> "NodeLabel":
        if raw.startswith("-"):
            return NodeLabel(raw)
        parts = raw.split("-")
        category = parts[0]
        rest = parts[1:]
        # PTB uses "=N" for gapping indices; fold it into the coindex slot.
        coindex: Optional[int] = None
        if "=" in category:
            category, _, gap = category.partition("=")
            if gap.isdigit():
                coindex = int(gap)
        tags = []
        for part in rest:
            if "=" in part:
                part, _, gap = part.partition("=")
                if gap.isdigit() and coindex is None:
                    coindex = int(gap)
            if not part:
                continue
            if part.isdigit():
                if coindex is None:
                    coindex = int(part)
            else:
                tags.append(part)
        return NodeLabel(category, tuple(tags), coindex)

    def render(self) -> str:
        out = self.category + "".join(f"-{t}" for t in self.function_tags)
        if self.coindex is not None:
            out += f"-{self.coindex}"
        return out


@dataclass(frozen=True)
class TreeNode:
    """One constituency-tree node; a leaf iff ``token`` is present."""

    label: NodeLabel
    children: tuple["TreeNode", ...] = ()
    token: Optional[str] = None
    span: tuple[int, int] = (0, 0)

    @property
    def is_leaf(self) -> bool:
        return self.token is not None

    def leaves(self) -> Iterator["TreeNode"]:
        if self.is_leaf:
            yield self
        else:
            for child in self.children:
                yield from child.leaves()

    def descendants(self) -> Iterator["TreeNode"]:
        """Pre-order traversal including self."""
        yield self
        for child in self.children:
            yield from child.descendants()

    def render(self) -> str:
        """Canonical single-line bracketed form."""
        if self.is_leaf:
            return f"({self.label.render()} {self.token})"
        inner = " ".join(c.render() for c in self.children)
        return f"({self.label.render()} {inner})"


@dataclass(frozen=True)
class Sentence:
    id: str
    root: TreeNode
    tokens: tuple[str, ...]

    def phrase(self, span: tuple[int, int]) -> str:
        return phrase_text(self, span)


def phrase_text(sentence: Sentence, span: tuple[int, int]) -> str:
    """Surface words of a half-open token span, joined by single spaces."""
    start, end = span
    if not (0 <= start <= end <= len(sentence.tokens)):
        raise IndexError(f"span {span} out of range for {len(sentence.tokens)} tokens")
    return " ".join(sentence.tokens[start:end])


# ---------------------------------------------------------------------------
# Parsing

@dataclass
class _RawNode:
    label: str
    offset: int
    children: list["_RawNode"] = field(default_factory=list)
    token: Optional[str] = None


def _tokenize(text: str) -> Iterator[tuple[str, int]]:
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
        elif c in "()":
            yield c, i
            i += 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "()":
                j += 1
            yield text[i:j], i
            i = j


def _parse_raw(text: str) -> list[_RawNode]:
    roots: list[_RawNode] = []
    stack: list[_RawNode] = []
    pending_word: Optional[tuple[str, int]] = None
    for tok, off in _tokenize(text):
        if tok == "(":
            node = _RawNode(label="", offset=off)
            if stack:
                if pending_word is not None:
                    raise TreebankError("word followed by subtree in the same node", off)
                stack[-1].children.append(node)
            else:
                roots.append(node)
            stack.append(node)
        elif tok == ")":
            if not stack:
                raise TreebankError("unmatched ')'", off)
            node = stack.pop()
            if pending_word is not None:
                node.token = pending_word[0]
                pending_word = None
            if node.token is None and not node.children:
                raise TreebankError("empty node", node.offset)
        else:
            if not stack:
                raise TreebankError(f"stray token {tok!r} outside any tree", off)
            node = stack[-1]
            if not node.label:
                node.label = tok
            elif node.children:
                raise TreebankError("word followed by subtree in the same node", off)
            elif pending_word is not None:
                raise TreebankError("multiple words under one preterminal", off)
            else:
                pending_word = (tok, off)
    if stack:
        raise TreebankError("unmatched '('", stack[-1].offset)
    return roots


def _build(raw: _RawNode, counter: list[int]) -> TreeNode:
    if raw.token is not None:
        if not raw.label:
            raise TreebankError("empty label", raw.offset)
        start = counter[0]
        counter[0] += 1
        return TreeNode(NodeLabel.parse(raw.label), (), raw.token, (start, start + 1))
    if not raw.label:
        raise TreebankError("empty label", raw.offset)
    children = tuple(_build(c, counter) for c in raw.children)
    span = (children[0].span[0], children[-1].span[1])
    return TreeNode(NodeLabel.parse(raw.label), children, None, span)


def parse_bracketed(text: str, source: str = "<text>") -> list[Sentence]:
    """Parse bracketed-treebank text into one Sentence per top-level tree.

    Extra outer parentheses around a tree (the usual ``.mrg`` convention,
    ``( (S ...) )``) are silently unwrapped.  Raises :class:`TreebankError`
    with a byte offset on unbalanced input or empty labels.
    """
    sentences = []
    for i, raw in enumerate(_parse_raw(text)):
        if not raw.label and raw.token is None:
            if len(raw.children) != 1:
                raise TreebankError("unlabeled node with multiple children", raw.offset)
            raw = raw.children[0]
        counter = [0]
        root = _build(raw, counter)
        tokens = tuple(leaf.token for leaf in root.leaves())
        sentences.append(Sentence(id=f"{source}#{i}", root=root, tokens=tokens))
    return sentences


def parse_file(path: str) -> list[Sentence]:
    with open(path, encoding="utf-8") as fh:
        return parse_bracketed(fh.read(), source=os.path.basename(path))


# ---------------------------------------------------------------------------
# Empty-element removal

NULL_ELEMENT = "-NONE-"


def _strip(node: TreeNode) -> Optional[TreeNode]:
    if node.is_leaf:
        return None if node.label.category == NULL_ELEMENT else node
    kept = tuple(c for c in (_strip(child) for child in node.children) if c is not None)
    if not kept:
        return None
    return TreeNode(node.label, kept, None, (0, 0))


def _respan(node: TreeNode, counter: list[int]) -> TreeNode:
    if node.is_leaf:
        start = counter[0]
        counter[0] += 1
        return TreeNode(node.label, (), node.token, (start, start + 1))
    children = tuple(_respan(c, counter) for c in node.children)
    return TreeNode(node.label, children, None, (children[0].span[0], children[-1].span[1]))


def strip_empty_elements(root: TreeNode) -> Optional[TreeNode]:
    """Remove ``-NONE-`` leaves and any internal nodes this empties.

    Returns ``None`` when the whole tree consists of empty elements;
    callers must skip such sentences.  Spans are recomputed over the
    reduced yield.
    """
    stripped = _strip(root)
    if stripped is None:
        return None
    return _respan(stripped, [0])


def strip_sentence(sentence: Sentence) -> Optional[Sentence]:
    root = strip_empty_elements(sentence.root)
    if root is None:
        return None
    tokens = tuple(leaf.token for leaf in root.leaves())
    return Sentence(sentence.id, root, tokens)
