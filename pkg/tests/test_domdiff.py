"""DOM parsing and comparison tests.

The render oracle below serializes generated trees with its own escaping
logic, so parse_html is checked against an independent inverse.  Planted
single divergences give known-answer fixtures for the comparison walk.
"""

from __future__ import annotations

import html as html_mod
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from overshare.domdiff import (
    ComparisonResult,
    DivergenceKind,
    DomTree,
    Element,
    EmptyDocument,
    IgnoreMask,
    TargetNondeterministic,
    Text,
    Verdict,
    build_ignore_mask,
    compare,
    format_address,
    node_at,
    parse_html,
)

# --- oracles -----------------------------------------------------------

_TAGS = ["div", "span", "p", "ul", "li", "section", "a", "em"]
_ATTR_KEYS = ["id", "class", "title", "href", "data-k"]
_WORDS = ["alpha", "42", "b&b", "<tag>", "it's", 'q"q', "omega"]


def render(node) -> str:
    """Independent HTML serializer used as the parse oracle."""
    if isinstance(node, Text):
        return html_mod.escape(node.content)
    attrs = "".join(
        f' {k}="{html_mod.escape(v, quote=True)}"' for k, v in node.attributes
    )
    inner = "".join(render(c) for c in node.children)
    return f"<{node.tag}{attrs}>{inner}</{node.tag}>"


def random_text(rng: random.Random) -> Text:
    return Text(" ".join(rng.choice(_WORDS) for _ in range(rng.randint(1, 3))))


def random_element(rng: random.Random, depth: int = 0) -> Element:
    keys = rng.sample(_ATTR_KEYS, rng.randint(0, 3))
    attrs = tuple((k, rng.choice(_WORDS)) for k in keys)
    kids: list = []
    for _ in range(rng.randint(0, 4)):
        # no adjacent string children: they would coalesce when re-parsed
        text_ok = not kids or isinstance(kids[-1], Element)
        if text_ok and rng.random() < 0.4:
            kids.append(random_text(rng))
        elif depth < 3:
            kids.append(random_element(rng, depth + 1))
    return Element(rng.choice(_TAGS), attrs, tuple(kids))


def random_page(rng: random.Random) -> Element:
    body = random_element(rng, depth=1)
    return Element("html", (), (Element("head", (), ()), Element("body", (), (body,))))


def addresses_where(node, pred, prefix=()):
    out = [prefix] if pred(node) else []
    if isinstance(node, Element):
        for i, child in enumerate(node.children):
            out.extend(addresses_where(child, pred, prefix + (i,)))
    return out


def replace_at(node, address, fn):
    if not address:
        return fn(node)
    kids = list(node.children)
    kids[address[0]] = replace_at(kids[address[0]], address[1:], fn)
    return Element(node.tag, node.attributes, tuple(kids))


# planted single-divergence mutations: each returns
# (mutated root, expected address, expected kind, expected verdict) or None


def plant_tag_rename(rng, root):
    sites = addresses_where(root, lambda n: isinstance(n, Element))
    addr = rng.choice(sites)
    fn = lambda e: Element("swapped", e.attributes, e.children)
    return (
        replace_at(root, addr, fn),
        addr,
        DivergenceKind.TAG_NAME,
        Verdict.STRUCTURALLY_DIFFERENT,
    )


def plant_attr_added(rng, root):
    sites = addresses_where(root, lambda n: isinstance(n, Element))
    addr = rng.choice(sites)
    fn = lambda e: Element(e.tag, e.attributes + (("zz-extra", "1"),), e.children)
    return (
        replace_at(root, addr, fn),
        addr,
        DivergenceKind.ATTRIBUTE_COUNT,
        Verdict.STRUCTURALLY_DIFFERENT,
    )


def plant_attr_value_change(rng, root):
    sites = addresses_where(
        root, lambda n: isinstance(n, Element) and len(n.attributes) > 0
    )
    if not sites:
        return None
    addr = rng.choice(sites)

    def fn(e):
        i = rng.randrange(len(e.attributes))
        key, value = e.attributes[i]
        attrs = list(e.attributes)
        attrs[i] = (key, value + "~")
        return Element(e.tag, tuple(attrs), e.children)

    return (
        replace_at(root, addr, fn),
        addr,
        DivergenceKind.ATTRIBUTE_VALUE,
        Verdict.CONTENT_DIFFERENT,
    )


def plant_attr_key_rename(rng, root):
    sites = addresses_where(
        root, lambda n: isinstance(n, Element) and len(n.attributes) > 0
    )
    if not sites:
        return None
    addr = rng.choice(sites)

    def fn(e):
        i = rng.randrange(len(e.attributes))
        _, value = e.attributes[i]
        attrs = list(e.attributes)
        attrs[i] = ("zz-renamed", value)
        return Element(e.tag, tuple(attrs), e.children)

    return (
        replace_at(root, addr, fn),
        addr,
        DivergenceKind.ATTRIBUTE_KEYS,
        Verdict.CONTENT_DIFFERENT,
    )


def plant_child_dropped(rng, root):
    sites = addresses_where(
        root, lambda n: isinstance(n, Element) and len(n.children) > 0
    )
    if not sites:
        return None
    addr = rng.choice(sites)

    def fn(e):
        kids = list(e.children)
        kids.pop(rng.randrange(len(kids)))
        return Element(e.tag, e.attributes, tuple(kids))

    return (
        replace_at(root, addr, fn),
        addr,
        DivergenceKind.CHILD_COUNT,
        Verdict.STRUCTURALLY_DIFFERENT,
    )


def plant_text_change(rng, root):
    sites = addresses_where(root, lambda n: isinstance(n, Text))
    if not sites:
        return None
    addr = rng.choice(sites)
    fn = lambda t: Text(t.content + "~")
    return (
        replace_at(root, addr, fn),
        addr,
        DivergenceKind.TEXT,
        Verdict.CONTENT_DIFFERENT,
    )


_PLANTS = [
    plant_tag_rename,
    plant_attr_added,
    plant_attr_value_change,
    plant_attr_key_rename,
    plant_child_dropped,
    plant_text_change,
]


# --- parsing -----------------------------------------------------------


def test_parse_basic_document():
    tree = parse_html("<html><head></head><body><p>hi</p></body></html>")
    assert tree.root == Element(
        "html",
        (),
        (
            Element("head", (), ()),
            Element("body", (), (Element("p", (), (Text("hi"),)),)),
        ),
    )


def test_parse_trims_text():
    tree = parse_html("<p> spaced </p>")
    assert tree.root.children == (Text("spaced"),)


def test_parse_drops_whitespace_only_text():
    tree = parse_html("<div>\n  <p>a</p>\n  <p>b</p>\n</div>")
    assert [c.tag for c in tree.root.children] == ["p", "p"]


def test_parse_drops_comments_and_doctype():
    tree = parse_html("<!DOCTYPE html><!-- note --><div>x</div>")
    assert tree.root == Element("div", (), (Text("x"),))


def test_parse_void_elements_do_not_swallow_siblings():
    tree = parse_html('<div>a<br>b<img src="x.png"></div>')
    kinds = [(n.tag if isinstance(n, Element) else n.content) for n in tree.root.children]
    assert kinds == ["a", "br", "b", "img"]


def test_parse_decodes_entities():
    tree = parse_html("<p>a &amp; b &lt;c&gt;</p>")
    assert tree.root.children == (Text("a & b <c>"),)


def test_parse_duplicate_attribute_keeps_first():
    tree = parse_html('<div id="a" id="b"></div>')
    assert tree.root.attributes == (("id", "a"),)


def test_parse_bare_attribute_value_is_empty_string():
    tree = parse_html("<input disabled>")
    assert tree.root.attributes == (("disabled", ""),)


def test_parse_recovers_from_misnested_end_tag():
    tree = parse_html("<div><b>x</div>")
    assert tree.root.tag == "div"
    assert tree.root.children[0] == Element("b", (), (Text("x"),))


@pytest.mark.parametrize("doc", ["", "   \n ", "<!-- only a comment -->"])
def test_parse_rejects_documents_without_elements(doc):
    with pytest.raises(EmptyDocument):
        parse_html(doc)


def test_parse_container_page_shape():
    doc = (
        "<html><head><title>shop</title></head>"
        '<body><div class="container">'
        "<h1>Results</h1><ul><li>one</li><li>two</li></ul>"
        "</div></body></html>"
    )
    tree = parse_html(doc)
    assert tree.root.tag == "html"
    assert [c.tag for c in tree.root.children] == ["head", "body"]
    container = tree.root.children[1].children[0]
    assert container.attribute_map() == {"class": "container"}
    assert [c.tag for c in container.children] == ["h1", "ul"]
    assert container.children[1].children == (
        Element("li", (), (Text("one"),)),
        Element("li", (), (Text("two"),)),
    )


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_parse_inverts_rendering(seed):
    root = random_page(random.Random(seed))
    assert parse_html(render(root)).root == root


# --- comparison --------------------------------------------------------


def _trees(a: str, b: str):
    return parse_html(a), parse_html(b)


def test_identical_documents_compare_identical():
    a, b = _trees("<div><p>x</p></div>", "<div><p>x</p></div>")
    result = compare(a, b)
    assert result == ComparisonResult(Verdict.IDENTICAL)
    assert result.is_identical
    assert result.first_divergence is None


def test_tag_mismatch_is_structural():
    a, b = _trees("<p>x</p>", "<div>x</div>")
    result = compare(a, b)
    assert result.verdict is Verdict.STRUCTURALLY_DIFFERENT
    assert result.first_divergence.kind is DivergenceKind.TAG_NAME
    assert result.first_divergence.address == ()


def test_attribute_count_mismatch_is_structural():
    a, b = _trees('<div id="a"></div>', '<div id="a" class="b"></div>')
    result = compare(a, b)
    assert result.verdict is Verdict.STRUCTURALLY_DIFFERENT
    assert result.first_divergence.kind is DivergenceKind.ATTRIBUTE_COUNT


def test_child_count_mismatch_is_structural():
    a, b = _trees("<ul><li>a</li></ul>", "<ul><li>a</li><li>b</li></ul>")
    result = compare(a, b)
    assert result.verdict is Verdict.STRUCTURALLY_DIFFERENT
    assert result.first_divergence.kind is DivergenceKind.CHILD_COUNT
    assert result.first_divergence.address == ()


def test_attribute_key_mismatch_is_content_level():
    a, b = _trees('<div id="a"></div>', '<div class="a"></div>')
    result = compare(a, b)
    assert result.verdict is Verdict.CONTENT_DIFFERENT
    assert result.first_divergence.kind is DivergenceKind.ATTRIBUTE_KEYS


def test_attribute_value_mismatch_is_content_level():
    a, b = _trees('<div class="a"><p>x</p></div>', '<div class="b"><p>x</p></div>')
    result = compare(a, b)
    assert result.verdict is Verdict.CONTENT_DIFFERENT
    assert result.first_divergence.kind is DivergenceKind.ATTRIBUTE_VALUE
    assert result.first_divergence.address == ()


def test_text_mismatch_is_content_level():
    a, b = _trees("<span>85</span>", "<span>0</span>")
    result = compare(a, b)
    assert result.verdict is Verdict.CONTENT_DIFFERENT
    assert result.first_divergence.kind is DivergenceKind.TEXT
    assert result.first_divergence.address == (0,)


def test_element_versus_string_child_is_structural():
    a, b = _trees("<div><p>a</p></div>", "<div>a</div>")
    result = compare(a, b)
    assert result.verdict is Verdict.STRUCTURALLY_DIFFERENT
    assert result.first_divergence.kind is DivergenceKind.TAG_NAME
    assert result.first_divergence.address == (0,)


def test_masked_attribute_difference_is_ignored():
    a, b = _trees('<div class="r1"><p>x</p></div>', '<div class="r2"><p>x</p></div>')
    mask = IgnoreMask(ignored_attributes=frozenset({((), "class")}))
    assert compare(a, b, mask).is_identical
    assert not compare(a, b).is_identical


def test_masked_text_difference_is_ignored():
    a, b = _trees("<div><span>12:00</span></div>", "<div><span>12:01</span></div>")
    mask = IgnoreMask(ignored_text_nodes=frozenset({(0, 0)}))
    assert compare(a, b, mask).is_identical


def test_mask_at_wrong_address_does_not_hide_difference():
    a, b = _trees("<span>85</span>", "<span>0</span>")
    mask = IgnoreMask(ignored_text_nodes=frozenset({(1,)}))
    assert compare(a, b, mask).verdict is Verdict.CONTENT_DIFFERENT


def test_first_divergence_is_earliest_in_document_order():
    a = parse_html("<html><head><title>a</title></head><body><p>b</p></body></html>")
    b = parse_html("<html><head><title>a2</title></head><body><p>b2</p></body></html>")
    result = compare(a, b)
    assert result.first_divergence.address == (0, 0, 0)


def test_structural_beats_content_at_same_node():
    a, b = _trees(
        '<div class="a"><p>x</p></div>', '<div class="b"><p>x</p><p>y</p></div>'
    )
    result = compare(a, b)
    assert result.first_divergence.kind is DivergenceKind.CHILD_COUNT


def test_node_at_resolves_addresses():
    tree = parse_html("<div><p>a</p><span>b</span></div>")
    assert node_at(tree, ()).tag == "div"
    assert node_at(tree, (1,)).tag == "span"
    assert node_at(tree, (1, 0)) == Text("b")
    assert format_address((1, 0)) == "/1/0"


# --- mask construction -------------------------------------------------


def test_identical_replays_give_empty_mask():
    trees = [parse_html("<div><p>x</p></div>") for _ in range(4)]
    mask = build_ignore_mask(trees[0], trees[1:])
    assert len(mask) == 0


def test_attribute_flutter_is_masked_and_generalizes():
    baseline = parse_html('<div><p class="r1">x</p></div>')
    replays = [parse_html(f'<div><p class="r{i}">x</p></div>') for i in (2, 3, 4)]
    mask = build_ignore_mask(baseline, replays)
    assert mask.ignored_attributes == {((0,), "class")}
    unseen = parse_html('<div><p class="r99">x</p></div>')
    assert compare(baseline, unseen, mask).is_identical


def test_text_flutter_is_masked():
    baseline = parse_html("<div><span>12:00:01</span><p>fixed</p></div>")
    replays = [
        parse_html(f"<div><span>12:00:0{i}</span><p>fixed</p></div>") for i in (2, 3)
    ]
    mask = build_ignore_mask(baseline, replays)
    assert mask.ignored_text_nodes == {(0, 0)}
    assert mask.ignored_attributes == frozenset()


def test_flutter_union_accumulates_across_replays():
    baseline = parse_html('<div data-k="a"><span>t1</span></div>')
    replay_attr = parse_html('<div data-k="b"><span>t1</span></div>')
    replay_text = parse_html('<div data-k="a"><span>t2</span></div>')
    mask = build_ignore_mask(baseline, [replay_attr, replay_text])
    assert mask.ignored_attributes == {((), "data-k")}
    assert mask.ignored_text_nodes == {(0, 0)}


def test_structural_flutter_aborts_mask_construction():
    baseline = parse_html("<div><p>x</p></div>")
    with_ad = parse_html('<div><p>x</p><aside class="ad">buy</aside></div>')
    with pytest.raises(TargetNondeterministic) as exc:
        build_ignore_mask(baseline, [baseline, with_ad])
    assert exc.value.replay_index == 1
    assert exc.value.divergence.kind is DivergenceKind.CHILD_COUNT


def test_attribute_key_churn_aborts_mask_construction():
    baseline = parse_html('<div data-a="1"></div>')
    churned = parse_html('<div data-b="1"></div>')
    with pytest.raises(TargetNondeterministic):
        build_ignore_mask(baseline, [churned])
    with pytest.raises(ValueError):
        build_ignore_mask(baseline, [])


def test_mask_reports_sizes_and_json_shape():
    mask = IgnoreMask(
        ignored_text_nodes=frozenset({(0, 1)}),
        ignored_attributes=frozenset({((0,), "class")}),
    )
    assert len(mask) == 2
    assert mask.to_json() == {"text_nodes": ["/0/1"], "attributes": ["/0@class"]}


# --- properties --------------------------------------------------------


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_compare_is_reflexive_under_any_mask(seed):
    rng = random.Random(seed)
    root = random_page(rng)
    texts = addresses_where(root, lambda n: isinstance(n, Text))
    mask = IgnoreMask(
        ignored_text_nodes=frozenset(rng.sample(texts, min(2, len(texts)))),
        ignored_attributes=frozenset({((0,), "class")}),
    )
    assert compare(DomTree(root), DomTree(root), mask).is_identical


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_verdict_is_symmetric_with_empty_mask(seed):
    rng = random.Random(seed)
    a = DomTree(random_page(rng))
    planted = rng.choice(_PLANTS)(rng, a.root)
    b = DomTree(planted[0]) if planted else DomTree(random_page(rng))
    assert compare(a, b).verdict is compare(b, a).verdict


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_planted_divergence_is_found_at_its_address(seed):
    rng = random.Random(seed)
    root = random_page(rng)
    planted = rng.choice(_PLANTS)(rng, root)
    if planted is None:
        return
    mutated, address, kind, verdict = planted
    result = compare(DomTree(root), DomTree(mutated))
    assert result.verdict is verdict
    assert result.first_divergence.kind is kind
    assert result.first_divergence.address == address


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_growing_the_mask_never_unmasks(seed):
    rng = random.Random(seed)
    root = random_page(rng)
    planted = rng.choice([plant_attr_value_change, plant_text_change])(rng, root)
    if planted is None:
        return
    mutated, address, kind, _ = planted
    if kind is DivergenceKind.TEXT:
        mask = IgnoreMask(ignored_text_nodes=frozenset({address}))
    else:
        keys = dict(node_at(DomTree(root), address).attributes)
        changed = dict(node_at(DomTree(mutated), address).attributes)
        key = next(k for k in keys if keys[k] != changed[k])
        mask = IgnoreMask(ignored_attributes=frozenset({(address, key)}))
    a, b = DomTree(root), DomTree(mutated)
    assert compare(a, b, mask).is_identical
    texts = addresses_where(root, lambda n: isinstance(n, Text))
    extra = IgnoreMask(
        ignored_text_nodes=frozenset(rng.sample(texts, min(3, len(texts)))),
        ignored_attributes=frozenset({((0,), "id"), ((1,), "class")}),
    )
    assert compare(a, b, mask.union(extra)).is_identical
