"""Tolerant HTML parsing: titles, DOM features, sections, tag-path n-grams,
and input simplification for token-limited consumers.

The parser never fails; real phishing HTML is frequently malformed, so it
autocloses browser-style and treats stray end tags as noise.
"""

from __future__ import annotations

import html as _html
import re
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from html.parser import HTMLParser
from importlib import resources
from pathlib import Path

VOID_TAGS = {"area", "base", "br", "col", "embed", "hr", "img", "input", "link",
             "meta", "param", "source", "track", "wbr"}

# an opening tag on the left implicitly closes an open tag on the right
_AUTOCLOSE = {
    "p": {"p"},
    "li": {"li"},
    "option": {"option"},
    "tr": {"tr", "td", "th"},
    "td": {"td", "th"},
    "th": {"td", "th"},
    "dt": {"dt", "dd"},
    "dd": {"dt", "dd"},
}

_WS = re.compile(r"\s+")


class DomNode:
    """Element or text node of the lightweight parse tree."""

    __slots__ = ("tag", "attrs", "children", "parent", "text", "start", "end")

    def __init__(self, tag=None, attrs=None, parent=None, text=None, start=0):
        self.tag = tag
        self.attrs = attrs or {}
        self.children: list[DomNode] = []
        self.parent = parent
        self.text = text
        self.start = start
        self.end = start

    def is_text(self) -> bool:
        return self.tag is None

    def iter(self):
        """Depth-first over this node's descendants (self excluded)."""
        stack = list(reversed(self.children))
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def __repr__(self):  # pragma: no cover
        return f"<DomNode {self.tag or 'text'!r}>"


class _TreeBuilder(HTMLParser):
    def __init__(self, source: str):
        super().__init__(convert_charrefs=True)
        self.source = source
        self.root = DomNode(tag="document")
        self.stack = [self.root]
        self._line_starts = [0]
        for m in re.finditer("\n", source):
            self._line_starts.append(m.end())

    def _abs(self) -> int:
        line, col = self.getpos()
        return self._line_starts[line - 1] + col

    def _open(self, tag, attrs, closed=False):
        closers = _AUTOCLOSE.get(tag)
        if closers:
            while len(self.stack) > 1 and self.stack[-1].tag in closers:
                self.stack[-1].end = self._abs()
                self.stack.pop()
        start = self._abs()
        node = DomNode(tag=tag, attrs={k: (v if v is not None else "") for k, v in attrs},
                       parent=self.stack[-1], start=start)
        raw = self.get_starttag_text() or ""
        node.end = start + len(raw)
        self.stack[-1].children.append(node)
        if not closed and tag not in VOID_TAGS:
            self.stack.append(node)

    def handle_starttag(self, tag, attrs):
        self._open(tag, attrs, closed=False)

    def handle_startendtag(self, tag, attrs):
        self._open(tag, attrs, closed=True)

    def handle_endtag(self, tag):
        for i in range(len(self.stack) - 1, 0, -1):
            if self.stack[i].tag == tag:
                pos = self._abs()
                gt = self.source.find(">", pos)
                end = (gt + 1) if gt >= 0 else pos
                for node in self.stack[i:]:
                    node.end = end
                del self.stack[i:]
                return
        # stray end tag: ignore

    def handle_data(self, data):
        if not data.strip():
            return
        node = DomNode(parent=self.stack[-1], text=data, start=self._abs())
        node.end = node.start + len(data)
        self.stack[-1].children.append(node)

    def finalize(self):
        for node in self.stack[1:]:
            node.end = len(self.source)
        del self.stack[1:]


def parse_html(source: str) -> DomNode:
    """Parse into a tree rooted at a synthetic "document" node. Never raises."""
    builder = _TreeBuilder(source)
    try:
        builder.feed(source)
        builder.close()
    except Exception:
        pass  # salvage whatever tree was built
    builder.finalize()
    return builder.root


@dataclass(frozen=True)
class HtmlFeatures:
    html_length: int
    head_length_sum: int
    img_length_sum: int
    script_length_sum: int
    dom_nodes: int
    dom_edges: int


@dataclass
class HtmlSections:
    visible_text: str = ""
    tags: list = field(default_factory=list)
    scripts: str = ""
    links: list = field(default_factory=list)
    image_sources: list = field(default_factory=list)
    embedded_image_data: list = field(default_factory=list)


def extract_title(source: str) -> str | None:
    """Text of the first <title>, whitespace collapsed; None when absent."""
    root = parse_html(source)
    for node in root.iter():
        if node.tag == "title":
            text = " ".join(child.text for child in node.children if child.is_text())
            return _WS.sub(" ", text).strip()
    return None


DEFAULT_BAD_TITLE_KEYWORDS = (
    "400", "403", "404", "410", "found", "encontrada", "forbidden", "error",
    "suspended", "bad request", "cloudflare", "just a moment",
    "warning! | there might be a problem", "url shortener, branded short", "denied",
)


@lru_cache(maxsize=1)
def _packaged_keywords() -> tuple[str, ...]:
    text = resources.files("phishbench.data").joinpath("bad_title_keywords.txt").read_text("utf-8")
    return tuple(_parse_keyword_lines(text.splitlines()))


def _parse_keyword_lines(lines):
    return [ln.strip().lower() for ln in lines if ln.strip() and not ln.lstrip().startswith("#")]


def load_keywords(path: str | Path) -> tuple[str, ...]:
    """Keyword list from a plain-text file, one keyword per line."""
    return tuple(_parse_keyword_lines(Path(path).read_text("utf-8").splitlines()))


def is_bad_title(title: str, keywords=None) -> bool:
    """True iff the lowercased title contains any keyword as a substring."""
    low = title.lower()
    return any(kw in low for kw in (keywords if keywords is not None else _packaged_keywords()))


def html_features(source: str) -> HtmlFeatures:
    root = parse_html(source)
    nodes = list(root.iter())
    dom_nodes = len(nodes)
    dom_edges = dom_nodes - len(root.children)
    head_sum = img_sum = script_sum = 0
    html_extent = None
    for node in nodes:
        if node.is_text():
            continue
        extent = max(0, node.end - node.start)
        if node.tag == "html" and html_extent is None:
            html_extent = extent
        elif node.tag == "head":
            head_sum += extent
        elif node.tag == "img":
            img_sum += extent
        elif node.tag == "script":
            script_sum += extent
    if html_extent is None:
        html_extent = len(source)
    return HtmlFeatures(
        html_length=html_extent,
        head_length_sum=head_sum,
        img_length_sum=img_sum,
        script_length_sum=script_sum,
        dom_nodes=dom_nodes,
        dom_edges=dom_edges,
    )


_INVISIBLE = {"script", "style", "head", "noscript", "template"}


def extract_sections(source: str) -> HtmlSections:
    """Deterministic split of a page into the feature-bearing sections."""
    root = parse_html(source)
    sections = HtmlSections()
    text_parts: list[str] = []
    script_parts: list[str] = []

    def walk(node: DomNode, invisible: bool):
        for child in node.children:
            if child.is_text():
                if invisible:
                    if node.tag == "script":
                        script_parts.append(child.text)
                else:
                    text_parts.append(child.text)
                continue
            sections.tags.append(child.tag)
            if child.tag == "a" and child.attrs.get("href"):
                sections.links.append(child.attrs["href"])
            elif child.tag == "img" and child.attrs.get("src"):
                src = child.attrs["src"]
                if src.startswith("data:"):
                    sections.embedded_image_data.append(src)
                else:
                    sections.image_sources.append(src)
            walk(child, invisible or child.tag in _INVISIBLE)

    walk(root, False)
    sections.visible_text = _WS.sub(" ", " ".join(text_parts)).strip()
    sections.scripts = "\n".join(part.strip() for part in script_parts).strip()
    return sections


def xpath_ngrams(source: str, n: int) -> Counter:
    """Tag-level n-grams over every root-to-leaf tag path.

    Paths start at the synthetic "document" root; each gram is rendered
    "<tag>/.../<tag>". Multiset semantics (counts kept).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    root = parse_html(source)
    grams: Counter = Counter()

    def walk(node: DomNode, path: list[str]):
        children = [c for c in node.children if not c.is_text()]
        if not children:
            for i in range(len(path) - n + 1):
                grams["/".join(f"<{t}>" for t in path[i:i + n])] += 1
            return
        for child in children:
            path.append(child.tag)
            walk(child, path)
            path.pop()

    walk(root, ["document"])
    return grams


# --- simplification for token-limited consumers ---------------------------

_CONTENT_TAGS = {"p", "a", "img", "h1", "h2", "h3", "h4", "h5", "h6", "ul", "ol", "li"}
_KEPT_ATTRS = {"a": ("href",), "img": ("src", "alt")}
_URL_PREFIX = re.compile(r"^https?://(www\.)?|^www\.", re.IGNORECASE)


class _SElem:
    __slots__ = ("tag", "attrs", "children")

    def __init__(self, tag, attrs, children):
        self.tag = tag
        self.attrs = attrs
        self.children = children


def _simplify_children(node: DomNode) -> list:
    out: list = []

    def push_text(text: str):
        text = _WS.sub(" ", text).strip()
        if not text:
            return
        if out and isinstance(out[-1], str):
            out[-1] = out[-1] + " " + text
        else:
            out.append(text)

    for child in node.children:
        if child.is_text():
            push_text(child.text)
        elif child.tag in ("script", "style"):
            continue
        elif child.tag in _CONTENT_TAGS:
            attrs = {}
            for name in _KEPT_ATTRS.get(child.tag, ()):
                value = child.attrs.get(name)
                if value:
                    attrs[name] = _URL_PREFIX.sub("", value) if name in ("href", "src") else value
            out.append(_SElem(child.tag, attrs, _simplify_children(child)))
        else:
            for item in _simplify_children(child):
                if isinstance(item, str):
                    push_text(item)
                else:
                    out.append(item)
    return out


def _has_content(item) -> bool:
    if isinstance(item, str):
        return bool(item)
    if item.tag == "img":
        return True
    return any(_has_content(c) for c in item.children)


def _prune_textless(items: list) -> list:
    kept = []
    for item in items:
        if isinstance(item, str):
            kept.append(item)
        elif _has_content(item):
            item.children = _prune_textless(item.children)
            kept.append(item)
    return kept


def _serialize_item(item) -> str:
    if isinstance(item, str):
        return _html.escape(item, quote=False)
    attrs = "".join(f' {k}="{_html.escape(v, quote=True)}"' for k, v in item.attrs.items())
    if item.tag == "img":
        return f"<img{attrs}>"
    inner = _join_pieces([_serialize_item(c) for c in item.children])
    return f"<{item.tag}{attrs}>{inner}</{item.tag}>"


def _join_pieces(pieces: list[str]) -> str:
    """Single-space joins keep word boundaries, so whitespace token counts
    reflect the actual content."""
    return " ".join(pieces)


def _token_count(text: str) -> int:
    return len(text.split())


def _remove_one(items: list, state: dict) -> bool:
    """Drop one unit (an element, or a word of a lone text run), center-out."""
    if not items:
        return False
    if len(items) == 1:
        item = items[0]
        if isinstance(item, str):
            words = item.split()
            if len(words) <= 1:
                items.pop()
            else:
                words.pop(len(words) // 2)
                items[0] = " ".join(words)
            return True
        if item.children:
            _remove_one(item.children, state)
            if not item.children:
                items.pop()
            return True
        items.pop()
        return True
    idx = len(items) // 2 if state["after"] else max(0, (len(items) - 1) // 2)
    state["after"] = not state["after"]
    items.pop(idx)
    return True


def simplify_html(source: str, html_token_limit: int = 2500) -> str:
    """Reduce a page for token-limited input.

    In order: (1) drop comments, <style>, <script>; (2) keep only the
    content tags p, a, img, h1-h6, ul, ol, li (others are unwrapped);
    (3) drop kept tags with no text content (img exempt); (4) strip
    "http(s)://" and "www." from link/image targets; (5) while the
    whitespace-token count still exceeds the limit, remove elements from
    the center outward, alternating just-after and just-before the
    midpoint. Idempotent at a fixed limit.
    """
    if html_token_limit < 1:
        raise ValueError("html_token_limit must be >= 1")
    items = _prune_textless(_simplify_children(parse_html(source)))
    state = {"after": True}
    while _token_count(_join_pieces([_serialize_item(i) for i in items])) > html_token_limit:
        if not _remove_one(items, state):
            break
    return _join_pieces([_serialize_item(i) for i in items])


# --- sanitized previews ----------------------------------------------------

_STRIP_TAGS = {"script", "style", "iframe", "frame", "frameset", "object",
               "embed", "applet", "link", "meta", "base", "noscript"}
_SAFE_ATTRS = {"alt", "title", "width", "height", "colspan", "rowspan",
               "type", "placeholder", "value", "name"}


def sanitize_html(source: str) -> str:
    """Inert copy of a page for human preview.

    Scripts, styles, frames, and every attribute that could execute code or
    trigger an external request are removed; embedded data: images are kept.
    """
    root = parse_html(source)

    def render(node: DomNode) -> str:
        pieces = []
        for child in node.children:
            if child.is_text():
                pieces.append(_html.escape(child.text, quote=False))
                continue
            if child.tag in _STRIP_TAGS:
                continue
            attrs = {}
            for name, value in child.attrs.items():
                lname = name.lower()
                if lname.startswith("on") or ":" in lname:
                    continue
                if lname == "src" and child.tag == "img" and value.startswith("data:"):
                    attrs["src"] = value
                elif lname in _SAFE_ATTRS and not value.lower().lstrip().startswith(("javascript:", "vbscript:", "data:")):
                    attrs[lname] = value
            rendered_attrs = "".join(f' {k}="{_html.escape(v, quote=True)}"' for k, v in sorted(attrs.items()))
            if child.tag in VOID_TAGS:
                pieces.append(f"<{child.tag}{rendered_attrs}>")
            else:
                pieces.append(f"<{child.tag}{rendered_attrs}>{render(child)}</{child.tag}>")
        return "".join(pieces)

    return render(root)
