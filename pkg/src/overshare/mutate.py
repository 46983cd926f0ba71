"""Leaf-field enumeration and single-deletion mutation of JSON API bodies.

The recorded target response is held as a parsed JSON tree.  Every scalar
value (string, number, boolean, null) and every empty object/array is a
deletable leaf; deleting one leaf yields one mutant body.  The number of
leaves is therefore the exact number of test cases a campaign will run.

Everything in this module is pure: no I/O, no randomness, no shared state.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Iterable

_KEY_ESCAPES = {"\\": "\\\\", ".": "\\.", "[": "\\[", "]": "\\]"}


class UnsupportedContentType(ValueError):
    """The target body is not parseable JSON (e.g. XML or HTML)."""


class PathNotFound(KeyError):
    """A field path does not resolve to a node in the given tree."""

    def __init__(self, path: "FieldPath"):
        super().__init__(path.text())
        self.path = path

    def __str__(self) -> str:
        return f"no such field: {self.path.text()}"


class FieldPathSyntaxError(ValueError):
    """A canonical path string could not be parsed back into segments."""


@dataclass(frozen=True)
class FieldPath:
    """Address of one node in a JSON tree.

    Segments are object keys (str) or array indices (int).  The canonical
    text form joins keys with '.' and brackets indices, e.g.
    ``stores[0].products[1].available``.  Keys containing '.', '[', ']' or
    '\\' are backslash-escaped so the text form parses back unambiguously;
    an empty key is spelled ``\\0``.
    """

    segments: tuple  # of str | int

    def __post_init__(self):
        if not self.segments:
            raise ValueError("a field path needs at least one segment")
        for seg in self.segments:
            if not isinstance(seg, (str, int)) or isinstance(seg, bool):
                raise ValueError(f"bad path segment: {seg!r}")

    def text(self) -> str:
        parts = []
        for i, seg in enumerate(self.segments):
            if isinstance(seg, int):
                parts.append(f"[{seg}]")
            else:
                # an empty key has no natural spelling; '\0' stands for it
                key = "".join(_KEY_ESCAPES.get(ch, ch) for ch in seg) if seg else "\\0"
                parts.append(key if i == 0 else "." + key)
        return "".join(parts)

    @classmethod
    def parse(cls, text: str) -> "FieldPath":
        if not text:
            raise FieldPathSyntaxError("empty path")
        n = len(text)
        segments: list = []

        def scan_key(i: int) -> tuple[str, int]:
            buf = []
            while i < n and text[i] not in ".[":
                if text[i] == "\\":
                    if i + 1 >= n:
                        raise FieldPathSyntaxError("trailing backslash")
                    nxt = text[i + 1]
                    if nxt != "0":  # '\0' is the empty-key marker
                        buf.append(nxt)
                    i += 2
                else:
                    buf.append(text[i])
                    i += 1
            return "".join(buf), i

        i = 0
        if text[0] != "[":
            key, i = scan_key(0)
            segments.append(key)
        while i < n:
            if text[i] == "[":
                j = text.find("]", i + 1)
                if j < 0:
                    raise FieldPathSyntaxError(f"unterminated index at offset {i}")
                digits = text[i + 1 : j]
                if not digits.isdigit():
                    raise FieldPathSyntaxError(f"non-numeric index {digits!r}")
                segments.append(int(digits))
                i = j + 1
            elif text[i] == ".":
                key, i = scan_key(i + 1)
                segments.append(key)
            else:
                raise FieldPathSyntaxError(
                    f"expected '.' or '[' at offset {i}, got {text[i]!r}"
                )
        return cls(tuple(segments))

    def __str__(self) -> str:
        return self.text()


class ApiResponseTree:
    """The target API body, parsed once and kept alongside its exact bytes."""

    def __init__(self, root: Any, source_bytes: bytes):
        self.root = root
        self.source_bytes = source_bytes

    @classmethod
    def from_bytes(cls, body: bytes) -> "ApiResponseTree":
        try:
            root = json.loads(body.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise UnsupportedContentType(f"target body is not JSON: {exc}") from exc
        return cls(root, body)

    def serialize(self) -> bytes:
        """Re-serialize the unmutated tree (key order preserved, compact)."""
        return _dump(self.root)


def _dump(value: Any) -> bytes:
    return json.dumps(value, ensure_ascii=False, separators=(",", ":")).encode("utf-8")


def _is_leaf(value: Any) -> bool:
    if isinstance(value, (dict, list)):
        return len(value) == 0
    return True


def enumerate_leaves(tree: ApiResponseTree) -> list[FieldPath]:
    """Every deletable field of the body, in depth-first document order.

    Leaves are scalars and empty containers; the root value itself is never
    a leaf (there is no enclosing container to delete it from), so an empty
    or scalar body yields zero test cases.
    """
    found: list[FieldPath] = []

    def walk(value: Any, prefix: tuple):
        if isinstance(value, dict):
            for key, child in value.items():
                path = prefix + (key,)
                if _is_leaf(child):
                    found.append(FieldPath(path))
                else:
                    walk(child, path)
        elif isinstance(value, list):
            for idx, child in enumerate(value):
                path = prefix + (idx,)
                if _is_leaf(child):
                    found.append(FieldPath(path))
                else:
                    walk(child, path)

    walk(tree.root, ())
    return found


def resolve(tree: ApiResponseTree, path: FieldPath) -> Any:
    """Return the value addressed by ``path``; raise PathNotFound otherwise."""
    node = tree.root
    for seg in path.segments:
        if isinstance(seg, str):
            if not isinstance(node, dict) or seg not in node:
                raise PathNotFound(path)
            node = node[seg]
        else:
            if not isinstance(node, list) or not (0 <= seg < len(node)):
                raise PathNotFound(path)
            node = node[seg]
    return node


def apply_deletion(tree: ApiResponseTree, path: FieldPath) -> bytes:
    """Serialize the body with exactly the node at ``path`` removed.

    Object members are removed key-and-value; array elements are removed and
    later indices shift down (JSON has no holes).  All remaining content
    keeps its document order.
    """
    return apply_all_deletions(tree, [path])


def apply_all_deletions(tree: ApiResponseTree, paths: Iterable[FieldPath]) -> bytes:
    """Remove a whole set of nodes in one pass.

    The result is independent of the order of ``paths`` and, for leaf sets,
    equals applying the single deletions one at a time in reverse document
    order.
    """
    doomed = set()
    for path in paths:
        resolve(tree, path)  # raises PathNotFound before any work happens
        doomed.add(path.segments)
    if not doomed:
        return tree.serialize()

    def rebuild(value: Any, prefix: tuple) -> Any:
        if isinstance(value, dict):
            return {
                key: rebuild(child, prefix + (key,))
                for key, child in value.items()
                if prefix + (key,) not in doomed
            }
        if isinstance(value, list):
            return [
                rebuild(child, prefix + (idx,))
                for idx, child in enumerate(value)
                if prefix + (idx,) not in doomed
            ]
        return value

    return _dump(rebuild(tree.root, ()))
