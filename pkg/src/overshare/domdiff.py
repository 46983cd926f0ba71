"""DOM tree parsing and comparison.

The detector's oracle is whether a page changed.  That decision is made
here: serialized HTML is parsed into a canonical tree (elements with
ordered attributes and children; strings as leaf nodes) and two trees are
walked pairwise.  A mismatch in tag name, attribute count or child count
makes the pages structurally different; a mismatch in attribute values or
string content makes them content-different; otherwise they are
identical.

Pages are allowed a controlled amount of run-time randomness (session
tokens in attributes, clocks in text).  Replaying the very same recorded
traffic a few times and diffing the resulting trees yields an
:class:`IgnoreMask` of text-node addresses and attribute slots to skip in
later comparisons.  Randomness that changes the tree *structure* (ads
injected at random positions, say) cannot be masked and makes the page
untestable: :func:`build_ignore_mask` raises ``TargetNondeterministic``.

All types are immutable; everything here is safe to share across worker
threads.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from html.parser import HTMLParser
from typing import Union

Address = tuple  # root-to-node path of child indices, () is the root


class EmptyDocument(ValueError):
    """The HTML contained no element at all."""


class TargetNondeterministic(RuntimeError):
    """Identical replays produced structurally different pages."""

    def __init__(self, divergence: DivergencePoint, replay_index: int):
        super().__init__(
            f"replay {replay_index} diverged structurally at "
            f"{format_address(divergence.address)}: {divergence.detail}"
        )
        self.divergence = divergence
        self.replay_index = replay_index


class Verdict(str, enum.Enum):
    IDENTICAL = "identical"
    STRUCTURALLY_DIFFERENT = "structurally-different"
    CONTENT_DIFFERENT = "content-different"


class DivergenceKind(str, enum.Enum):
    """What property of a node pair disagreed."""

    TAG_NAME = "tag-name"                    # structural
    ATTRIBUTE_COUNT = "attribute-count"      # structural
    CHILD_COUNT = "child-count"              # structural
    ATTRIBUTE_KEYS = "attribute-keys"        # content, but unmaskable
    ATTRIBUTE_VALUE = "attribute-value"      # content
    TEXT = "text"                            # content


_STRUCTURAL = {
    DivergenceKind.TAG_NAME,
    DivergenceKind.ATTRIBUTE_COUNT,
    DivergenceKind.CHILD_COUNT,
}


@dataclass(frozen=True)
class Text:
    content: str


@dataclass(frozen=True)
class Element:
    tag: str
    attributes: tuple = ()  # ordered (key, value) pairs, keys unique
    children: tuple = ()

    def attribute_map(self) -> dict:
        return dict(self.attributes)


DomNode = Union[Element, Text]


@dataclass(frozen=True)
class DomTree:
    root: Element


@dataclass(frozen=True)
class DivergencePoint:
    address: Address
    kind: DivergenceKind
    detail: str

    def to_json(self) -> dict:
        return {
            "address": format_address(self.address),
            "kind": self.kind.value,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class ComparisonResult:
    verdict: Verdict
    first_divergence: DivergencePoint | None = None

    @property
    def is_identical(self) -> bool:
        return self.verdict is Verdict.IDENTICAL


@dataclass(frozen=True)
class IgnoreMask:
    """Addresses excluded from content comparison.

    ``ignored_text_nodes`` holds addresses of string children whose
    content varies across replays; ``ignored_attributes`` holds
    (element address, attribute key) slots whose value varies.
    """

    ignored_text_nodes: frozenset = field(default_factory=frozenset)
    ignored_attributes: frozenset = field(default_factory=frozenset)

    @classmethod
    def empty(cls) -> "IgnoreMask":
        return cls()

    def __len__(self) -> int:
        return len(self.ignored_text_nodes) + len(self.ignored_attributes)

    def union(self, other: "IgnoreMask") -> "IgnoreMask":
        return IgnoreMask(
            self.ignored_text_nodes | other.ignored_text_nodes,
            self.ignored_attributes | other.ignored_attributes,
        )

    def to_json(self) -> dict:
        return {
            "text_nodes": sorted(format_address(a) for a in self.ignored_text_nodes),
            "attributes": sorted(
                f"{format_address(a)}@{key}" for a, key in self.ignored_attributes
            ),
        }


def format_address(address: Address) -> str:
    return "/" + "/".join(str(i) for i in address)


# ---------------------------------------------------------------------------
# parsing

_VOID_ELEMENTS = {
    "area", "base", "br", "col", "embed", "hr", "img", "input",
    "link", "meta", "param", "source", "track", "wbr",
}


class _Open:
    __slots__ = ("tag", "attributes", "children")

    def __init__(self, tag: str, attributes: tuple):
        self.tag = tag
        self.attributes = attributes
        self.children: list = []


class _TreeBuilder(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.stack = [_Open("#document", ())]

    def _attrs(self, attrs) -> tuple:
        seen = set()
        out = []
        for key, value in attrs:
            if key in seen:  # duplicate attribute: first occurrence wins
                continue
            seen.add(key)
            out.append((key, value if value is not None else ""))
        return tuple(out)

    def handle_starttag(self, tag, attrs):
        node = _Open(tag, self._attrs(attrs))
        if tag in _VOID_ELEMENTS:
            self.stack[-1].children.append(node)
        else:
            self.stack.append(node)

    def handle_startendtag(self, tag, attrs):
        self.stack[-1].children.append(_Open(tag, self._attrs(attrs)))

    def handle_endtag(self, tag):
        if tag in _VOID_ELEMENTS:
            return
        # close the innermost matching element; implicitly close the rest
        for depth in range(len(self.stack) - 1, 0, -1):
            if self.stack[depth].tag == tag:
                while len(self.stack) > depth:
                    closed = self.stack.pop()
                    self.stack[-1].children.append(closed)
                return
        # stray end tag with no matching open: drop it

    def handle_data(self, data):
        self.stack[-1].children.append(data)

    def finish(self) -> _Open:
        while len(self.stack) > 1:
            closed = self.stack.pop()
            self.stack[-1].children.append(closed)
        return self.stack[0]


def _freeze(node: _Open) -> Element:
    children: list = []
    pending_text: list = []

    def flush():
        if pending_text:
            text = "".join(pending_text).strip()
            if text:
                children.append(Text(text))
            pending_text.clear()

    for child in node.children:
        if isinstance(child, str):
            pending_text.append(child)
        else:
            flush()
            children.append(_freeze(child))
    flush()
    return Element(node.tag, node.attributes, tuple(children))


def parse_html(html: str) -> DomTree:
    """Parse serialized HTML into a comparable tree.

    Comments and the doctype are dropped, tag and attribute names are
    lowercased (the parser does this), whitespace-only strings between
    elements are dropped and other strings are trimmed.  The first
    top-level element becomes the root.
    """
    builder = _TreeBuilder()
    builder.feed(html)
    builder.close()
    document = _freeze(builder.finish())
    for child in document.children:
        if isinstance(child, Element):
            return DomTree(root=child)
    raise EmptyDocument("no element found in document")


def node_at(tree: DomTree, address: Address) -> DomNode:
    node: DomNode = tree.root
    for index in address:
        node = node.children[index]
    return node


# ---------------------------------------------------------------------------
# comparison

def _shorten(text: str, limit: int = 60) -> str:
    return text if len(text) <= limit else text[: limit - 3] + "..."


def _node_pairs(origin: Element, mutated: Element):
    """Pre-order walk over corresponding node pairs.

    Yields (address, origin node, mutated node); descends only where both
    sides are elements with equal child counts, so every yielded pair has
    a well-defined correspondence.
    """
    stack = [((), origin, mutated)]
    while stack:
        address, a, b = stack.pop()
        yield address, a, b
        if (
            isinstance(a, Element)
            and isinstance(b, Element)
            and len(a.children) == len(b.children)
        ):
            for i in range(len(a.children) - 1, -1, -1):
                stack.append((address + (i,), a.children[i], b.children[i]))


def _diverge(address: Address, a: DomNode, b: DomNode, mask: IgnoreMask):
    """First divergence at this node pair, or None.  Does not recurse."""
    if isinstance(a, Text) or isinstance(b, Text):
        if isinstance(a, Text) != isinstance(b, Text):
            tag = a.tag if isinstance(a, Element) else b.tag
            return DivergencePoint(
                address,
                DivergenceKind.TAG_NAME,
                f"element <{tag}> vs string node",
            )
        if a.content != b.content and address not in mask.ignored_text_nodes:
            return DivergencePoint(
                address,
                DivergenceKind.TEXT,
                f"{_shorten(a.content)!r} vs {_shorten(b.content)!r}",
            )
        return None
    if a.tag != b.tag:
        return DivergencePoint(
            address, DivergenceKind.TAG_NAME, f"<{a.tag}> vs <{b.tag}>"
        )
    if len(a.attributes) != len(b.attributes):
        return DivergencePoint(
            address,
            DivergenceKind.ATTRIBUTE_COUNT,
            f"{len(a.attributes)} vs {len(b.attributes)} attributes on <{a.tag}>",
        )
    if len(a.children) != len(b.children):
        return DivergencePoint(
            address,
            DivergenceKind.CHILD_COUNT,
            f"{len(a.children)} vs {len(b.children)} children of <{a.tag}>",
        )
    a_attrs, b_attrs = a.attribute_map(), b.attribute_map()
    if set(a_attrs) != set(b_attrs):
        missing = set(a_attrs).symmetric_difference(b_attrs)
        return DivergencePoint(
            address,
            DivergenceKind.ATTRIBUTE_KEYS,
            f"attribute keys differ on <{a.tag}>: {sorted(missing)}",
        )
    for key, a_value in a.attributes:
        if a_value != b_attrs[key] and (address, key) not in mask.ignored_attributes:
            return DivergencePoint(
                address,
                DivergenceKind.ATTRIBUTE_VALUE,
                f"{key}={_shorten(a_value)!r} vs {_shorten(b_attrs[key])!r} on <{a.tag}>",
            )
    return None


def compare(
    origin: DomTree, mutated: DomTree, mask: IgnoreMask | None = None
) -> ComparisonResult:
    """Decide whether two pages are the same, skipping masked slots.

    The first divergence in document order is reported; structural
    mismatches win over content mismatches at the same node.
    """
    mask = mask if mask is not None else IgnoreMask.empty()
    for address, a, b in _node_pairs(origin.root, mutated.root):
        divergence = _diverge(address, a, b, mask)
        if divergence is None:
            continue
        if divergence.kind in _STRUCTURAL:
            return ComparisonResult(Verdict.STRUCTURALLY_DIFFERENT, divergence)
        return ComparisonResult(Verdict.CONTENT_DIFFERENT, divergence)
    return ComparisonResult(Verdict.IDENTICAL)


def build_ignore_mask(baseline: DomTree, replays: list) -> IgnoreMask:
    """Diff identical-input replays against the baseline into a mask.

    Text and attribute-value flutter is recorded as ignorable; any
    structural flutter (including attribute key churn, which no slot
    mask can absorb) raises :class:`TargetNondeterministic`.
    """
    if not replays:
        raise ValueError("need at least one replay to build a mask")
    text_nodes = set()
    attributes = set()
    for replay_index, replay in enumerate(replays):
        for address, a, b in _node_pairs(baseline.root, replay.root):
            divergence = _diverge(address, a, b, IgnoreMask.empty())
            if divergence is None:
                continue
            if divergence.kind is DivergenceKind.TEXT:
                text_nodes.add(address)
            elif divergence.kind is DivergenceKind.ATTRIBUTE_VALUE:
                _mask_attribute_slots(address, a, b, attributes)
            else:
                raise TargetNondeterministic(divergence, replay_index)
    return IgnoreMask(frozenset(text_nodes), frozenset(attributes))


def _mask_attribute_slots(address: Address, a: Element, b: Element, out: set):
    b_attrs = b.attribute_map()
    for key, value in a.attributes:
        if value != b_attrs[key]:
            out.add((address, key))
