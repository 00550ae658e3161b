"""Trees, forests, alphabets and the text serialization shared by every module.

Nodes are identified by their pre-order (document order) index, so document
order comparison is plain integer comparison.  Values are immutable after
construction.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

__all__ = [
    "ParseError",
    "RankedAlphabet",
    "UnrankedAlphabet",
    "Term",
    "RankedTree",
    "Forest",
    "parse_term",
    "render",
    "enc",
    "dec",
    "encp",
    "decp",
    "tmark",
    "fl",
    "split_label",
    "make_label",
    "label_base",
    "mark_alphabet",
    "color_alphabet",
    "encp_alphabet",
    "enc_alphabet",
]


class ParseError(ValueError):
    """Syntax or arity error; carries the byte offset of the problem."""

    def __init__(self, message, offset):
        super().__init__("%s (at byte %d)" % (message, offset))
        self.offset = offset


_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*|@")


def split_label(label):
    """Split "base#bits%{c1,c2}" into (base, bits or None, colors or None)."""
    base = label
    bits = None
    colors = None
    if "%{" in base:
        base, _, rest = base.partition("%{")
        if not rest.endswith("}"):
            raise ValueError("malformed colored label: %r" % label)
        inner = rest[:-1]
        colors = frozenset(inner.split(",")) if inner else frozenset()
    if "#" in base:
        base, _, bits = base.partition("#")
    return base, bits, colors


def make_label(base, bits=None, colors=None):
    out = base
    if bits is not None:
        out += "#" + bits
    if colors is not None:
        out += "%{" + ",".join(sorted(colors)) + "}"
    return out


def label_base(label):
    return split_label(label)[0]


@dataclass(frozen=True)
class RankedAlphabet:
    """Finite map from symbol name to rank."""

    symbols: dict

    def __post_init__(self):
        for name, rank in self.symbols.items():
            if not name:
                raise ValueError("empty symbol name")
            if rank < 0:
                raise ValueError("negative rank for %r" % name)

    def rank(self, name):
        return self.symbols[name]

    @property
    def max_rank(self):
        return max(self.symbols.values(), default=0)

    def __contains__(self, name):
        return name in self.symbols

    def __iter__(self):
        return iter(sorted(self.symbols))

    def with_symbols(self, extra):
        merged = dict(self.symbols)
        for name, rank in extra.items():
            if merged.get(name, rank) != rank:
                raise ValueError("rank clash for %r" % name)
            merged[name] = rank
        return RankedAlphabet(merged)


@dataclass(frozen=True)
class UnrankedAlphabet:
    """Symbol set for forest output alphabets; no rank constraints."""

    symbols: frozenset

    def __contains__(self, name):
        return name in self.symbols

    def __iter__(self):
        return iter(sorted(self.symbols))


class Term:
    """Shared node-table representation of ranked trees and forests.

    labels[u], parent[u], kids[u], childno[u] are indexed by the pre-order
    NodeId u.  Roots of a forest have parent None and child number 0 for the
    first root; sibling order among roots is explicit in `roots`.
    """

    __slots__ = ("labels", "parent", "kids", "childno", "roots")

    def __init__(self, labels, parent, kids, childno, roots):
        self.labels = tuple(labels)
        self.parent = tuple(parent)
        self.kids = tuple(tuple(k) for k in kids)
        self.childno = tuple(childno)
        self.roots = tuple(roots)

    @classmethod
    def from_nested(cls, nested_roots):
        """Build from [(label, [children...]), ...] nested lists."""
        labels, parent, kids, childno = [], [], [], []

        def walk(node, par, cno):
            label, children = node
            u = len(labels)
            labels.append(label)
            parent.append(par)
            childno.append(cno)
            kids.append([])
            for i, ch in enumerate(children):
                v = walk(ch, u, i + 1)
                kids[u].append(v)
            return u

        roots = []
        for node in nested_roots:
            # the paper gives every root child number 0; only the sibling
            # order in `roots` distinguishes them
            roots.append(walk(node, None, 0))
        return cls(labels, parent, kids, childno, roots)

    def __len__(self):
        return len(self.labels)

    @property
    def size(self):
        return len(self.labels)

    def label(self, u):
        return self.labels[u]

    def rank_of(self, u):
        return len(self.kids[u])

    def is_valid_node(self, u):
        return 0 <= u < len(self.labels)

    def child(self, u, i):
        """1-based i-th child, or None."""
        ks = self.kids[u]
        return ks[i - 1] if 1 <= i <= len(ks) else None

    def next_sibling(self, u):
        p = self.parent[u]
        if p is None:
            idx = self.roots.index(u)
            return self.roots[idx + 1] if idx + 1 < len(self.roots) else None
        ks = self.kids[p]
        idx = self.childno[u] - 1
        return ks[idx + 1] if idx + 1 < len(ks) else None

    def prev_sibling(self, u):
        p = self.parent[u]
        if p is None:
            idx = self.roots.index(u)
            return self.roots[idx - 1] if idx > 0 else None
        ks = self.kids[p]
        idx = self.childno[u] - 1
        return ks[idx - 1] if idx > 0 else None

    def is_first_sibling(self, u):
        return self.prev_sibling(u) is None

    def is_last_sibling(self, u):
        return self.next_sibling(u) is None

    def is_root(self, u):
        return self.parent[u] is None

    def is_leaf(self, u):
        return not self.kids[u]

    def nodes(self):
        return range(len(self.labels))

    def subtree_nodes(self, u):
        """Descendants of u including u, in pre-order."""
        out = [u]
        stack = list(reversed(self.kids[u]))
        while stack:
            v = stack.pop()
            out.append(v)
            stack.extend(reversed(self.kids[v]))
        return out

    def nested(self, u):
        def build(v):
            return (self.labels[v], [build(w) for w in self.kids[v]])

        return build(u)

    def subtree(self, u):
        """Subtree rooted at u as a fresh RankedTree (re-indexed)."""
        return RankedTree.from_nested([self.nested(u)])

    def relabel(self, fn):
        """Same shape with labels fn(u, old_label)."""
        labels = [fn(u, lab) for u, lab in enumerate(self.labels)]
        return type(self)(labels, self.parent, self.kids, self.childno, self.roots)

    def _key(self):
        return (self.labels, self.parent, self.childno, self.roots)

    def __eq__(self, other):
        return type(self) is type(other) and self._key() == other._key()

    def __hash__(self):
        return hash((type(self).__name__, self._key()))

    def __repr__(self):
        return "%s(%r)" % (type(self).__name__, render(self))


class RankedTree(Term):
    def __init__(self, labels, parent, kids, childno, roots):
        super().__init__(labels, parent, kids, childno, roots)
        if len(self.roots) != 1:
            raise ValueError("a tree has exactly one root")

    @property
    def root(self):
        return 0

    def check_alphabet(self, alphabet):
        for u in self.nodes():
            lab = self.labels[u]
            if lab not in alphabet.symbols:
                raise ValueError("unknown symbol %r" % lab)
            if alphabet.rank(lab) != len(self.kids[u]):
                raise ValueError(
                    "symbol %r has %d children, rank is %d"
                    % (lab, len(self.kids[u]), alphabet.rank(lab))
                )
        return self


class Forest(Term):
    def as_trees(self):
        return [self.subtree(r) for r in self.roots]

    @classmethod
    def concat(cls, forests):
        nested = []
        for f in forests:
            nested.extend(f.nested(r) for r in f.roots)
        return cls.from_nested(nested)


def tree(label, *children):
    """Convenience constructor: tree("sig", tree("a"), tree("b"))."""
    def nest(t):
        return t.nested(t.roots[0]) if isinstance(t, Term) else t

    return RankedTree.from_nested([(label, [nest(c) for c in children])])


def _parse_label(text, pos):
    m = _NAME_RE.match(text, pos)
    if not m:
        raise ParseError("expected a name", pos)
    label = m.group(0)
    pos = m.end()
    if pos < len(text) and text[pos] == "#":
        pos += 1
        start = pos
        while pos < len(text) and text[pos] in "01":
            pos += 1
        if pos == start:
            raise ParseError("expected mark bits after '#'", pos)
        label += "#" + text[start:pos]
    if text.startswith("%{", pos):
        pos += 2
        colors = []
        while True:
            m = _NAME_RE.match(text, pos)
            if not m:
                raise ParseError("expected a color name", pos)
            colors.append(m.group(0))
            pos = m.end()
            if pos < len(text) and text[pos] == ",":
                pos += 1
                continue
            break
        if pos >= len(text) or text[pos] != "}":
            raise ParseError("expected '}'", pos)
        pos += 1
        label += "%{" + ",".join(sorted(colors)) + "}"
    return label, pos


def _skip_ws(text, pos):
    while pos < len(text) and text[pos].isspace():
        pos += 1
    return pos


def _parse_node(text, pos, alphabet):
    at = pos
    label, pos = _parse_label(text, pos)
    children = []
    mark = _skip_ws(text, pos)
    if mark < len(text) and text[mark] == "(":
        pos = mark + 1
        while True:
            child, pos = _parse_node(text, _skip_ws(text, pos), alphabet)
            pos = _skip_ws(text, pos)
            if pos < len(text) and text[pos] == ",":
                pos += 1
                children.append(child)
                continue
            children.append(child)
            break
        if pos >= len(text) or text[pos] != ")":
            raise ParseError("expected ')' or ','", pos)
        pos += 1
    if alphabet is not None:
        if label not in alphabet.symbols:
            raise ParseError("unknown symbol %r" % label, at)
        if alphabet.rank(label) != len(children):
            raise ParseError(
                "symbol %r used with %d children, rank is %d"
                % (label, len(children), alphabet.rank(label)),
                at,
            )
    return (label, children), pos


def parse_term(text, mode="tree", alphabet=None):
    """Parse the term syntax; mode 'tree' or 'forest'.

    The empty string is the empty forest in forest mode.  With an alphabet,
    arities are checked (rank mismatch raises ParseError at the offending
    label's offset).
    """
    pos = 0
    nested = []
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        node, pos = _parse_node(text, pos, alphabet)
        nested.append(node)
    if mode == "tree":
        if len(nested) != 1:
            raise ParseError("expected exactly one tree", pos)
        return RankedTree.from_nested(nested)
    if mode == "forest":
        return Forest.from_nested(nested)
    raise ValueError("mode must be 'tree' or 'forest'")


def render(value):
    """Canonical text form; inverse of parse_term up to whitespace."""

    def rend(u):
        lab = value.labels[u]
        if not value.kids[u]:
            return lab
        return lab + "(" + ",".join(rend(v) for v in value.kids[u]) + ")"

    return " ".join(rend(r) for r in value.roots)


def enc(f):
    """Binary first-child/next-sibling encoding with explicit nil leaf e."""

    def encode(items):
        # items: list of nested (label, children) pairs
        if not items:
            return ("e", [])
        (label, children), rest = items[0], items[1:]
        return (label, [encode(children), encode(rest)])

    return RankedTree.from_nested([encode([f.nested(r) for r in f.roots])])


def dec(t):
    """Inverse of enc.  Every non-e label must be binary, e nullary."""

    def decode(u):
        lab = t.labels[u]
        if lab == "e":
            if t.kids[u]:
                raise ValueError("label e with nonzero arity")
            return []
        if len(t.kids[u]) != 2:
            raise ValueError("label %r must be binary in an enc tree" % lab)
        first, rest = t.kids[u]
        return [(lab, decode(first))] + decode(rest)

    return Forest.from_nested(decode(0))


_SUP_RE = re.compile(r"^(.*?)(0|1)(0|1)$")


def encp(f):
    """Node-count-preserving encoding enc'; requires a nonempty forest.

    The result reuses the NodeIds of f: the pre-order of enc'(f) coincides
    with the document order of f.
    """
    if not f.roots:
        raise ValueError("encp is undefined on the empty forest")
    n = len(f)
    labels = [None] * n
    parent = [None] * n
    kids = [[] for _ in range(n)]
    childno = [0] * n

    def attach(child, par):
        parent[child] = par
        kids[par].append(child)
        childno[child] = len(kids[par])

    for u in f.nodes():
        has_child = 1 if f.kids[u] else 0
        has_next = 1 if f.next_sibling(u) is not None else 0
        labels[u] = f.labels[u] + str(has_child) + str(has_next)
        if f.kids[u]:
            attach(f.kids[u][0], u)
        nxt = f.next_sibling(u)
        if nxt is not None:
            attach(nxt, u)
    childno[0] = 0
    return RankedTree(labels, parent, kids, childno, [0])


def decp(t):
    """Inverse of encp; labels must carry the two-superscript suffix."""

    def decode(u):
        m = _SUP_RE.match(t.labels[u])
        if not m:
            raise ValueError("malformed superscripted label %r" % t.labels[u])
        base, has_child, has_next = m.group(1), m.group(2), m.group(3)
        expect = int(has_child) + int(has_next)
        if len(t.kids[u]) != expect:
            raise ValueError(
                "label %r must have %d children" % (t.labels[u], expect)
            )
        ks = list(t.kids[u])
        children = decode(ks.pop(0)) if has_child == "1" else []
        rest = decode(ks.pop(0)) if has_next == "1" else []
        return [(base, children)] + rest

    return Forest.from_nested(decode(0))


def tmark(value, us):
    """Append one mark bit per tracked node to every label."""
    for u in us:
        if not value.is_valid_node(u):
            raise ValueError("invalid NodeId %d" % u)

    def mark(u, lab):
        base, bits, colors = split_label(lab)
        new = "".join("1" if u == v else "0" for v in us)
        return make_label(base, (bits or "") + new, colors)

    return value.relabel(mark)


def fl(t):
    """Flatten a tree over Delta∪{@:2,e:0} (Delta unary) to a forest."""

    def flat(u):
        lab = t.labels[u]
        if lab == "@":
            if len(t.kids[u]) != 2:
                raise ValueError("@ must be binary")
            return flat(t.kids[u][0]) + flat(t.kids[u][1])
        if lab == "e":
            if t.kids[u]:
                raise ValueError("e must be nullary")
            return []
        if len(t.kids[u]) != 1:
            raise ValueError("symbol %r must be unary under fl" % lab)
        return [(lab, flat(t.kids[u][0]))]

    return Forest.from_nested(flat(0))


def mark_alphabet(alphabet, n):
    """Sigma x {0,1}^n as a ranked alphabet of suffixed labels."""
    out = {}
    for name, rank in alphabet.symbols.items():
        base, bits, colors = split_label(name)
        for i in range(2 ** n):
            vec = format(i, "0%db" % n) if n else ""
            out[make_label(base, (bits or "") + vec, colors)] = rank
    return RankedAlphabet(out)


def color_alphabet(alphabet, colors):
    """Sigma x 2^C as a ranked alphabet of %{...}-suffixed labels."""
    colors = sorted(colors)
    subsets = [[]]
    for c in colors:
        subsets += [s + [c] for s in subsets]
    out = {}
    for name, rank in alphabet.symbols.items():
        base, bits, old = split_label(name)
        if old is not None:
            raise ValueError("label %r is already colored" % name)
        for s in subsets:
            out[make_label(base, bits, frozenset(s))] = rank
    return RankedAlphabet(out)


def enc_alphabet(alphabet):
    """Sigma∪{e} with every symbol binary, for enc images."""
    out = {name: 2 for name in alphabet.symbols}
    out["e"] = 0
    return RankedAlphabet(out)


def encp_alphabet(alphabet):
    """Sigma' of superscripted symbols, for encp images."""
    out = {}
    for name in alphabet.symbols:
        out[name + "11"] = 2
        out[name + "10"] = 1
        out[name + "01"] = 1
        out[name + "00"] = 0
    return RankedAlphabet(out)
