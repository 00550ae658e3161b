"""Regular tree grammars and bottom-up tree automata.

Dbta is the total deterministic workhorse: the representation of types,
sites, trips and patterns.  A Dbta may be table-backed or backed by a lazy
transition callable (the typechecker produces automata whose full state
space is never enumerated); all the boolean/decision operations below work
on either, exploring reachable states only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .terms import Forest, RankedAlphabet, RankedTree, render

__all__ = [
    "Nbta",
    "Dbta",
    "Rtg",
    "ForestCfg",
    "determinize",
    "complement",
    "product",
    "is_empty",
    "member",
    "rtg_to_nbta",
    "nbta_to_rtg",
    "cfg_expand_singleton",
    "rtg_expand_singleton",
    "SINK",
]

SINK = "__sink__"


@dataclass(frozen=True)
class Nbta:
    """Nondeterministic bottom-up tree automaton.

    delta maps (label, tuple of child states) to a frozenset of targets.
    """

    alphabet: RankedAlphabet
    states: frozenset
    final: frozenset
    delta: dict

    def __post_init__(self):
        for (label, children), _targets in self.delta.items():
            if self.alphabet.rank(label) != len(children):
                raise ValueError(
                    "transition arity mismatch for %r" % (label,)
                )

    def targets(self, label, children):
        return self.delta.get((label, tuple(children)), frozenset())

    def run(self, t):
        """Set of states reachable at each node, bottom-up."""
        out = [None] * len(t)
        for u in reversed(range(len(t))):
            lab = t.label(u)
            if lab not in self.alphabet.symbols:
                raise ValueError("unknown symbol %r" % lab)
            kid_sets = [out[v] for v in t.kids[u]]
            states = set()
            for combo in _product_sets(kid_sets):
                states |= self.targets(lab, combo)
            out[u] = frozenset(states)
        return out

    def accepts(self, t):
        return bool(self.run(t)[0] & self.final)


def _product_sets(sets):
    if not sets:
        yield ()
        return
    head, rest = sets[0], sets[1:]
    for h in head:
        for r in _product_sets(rest):
            yield (h,) + r


class Dbta:
    """Total deterministic bottom-up tree automaton.

    Either table-backed (delta dict) or lazy (delta_fn callable); states are
    arbitrary hashables.  Lazy automata expose only the reachable part.
    """

    def __init__(self, alphabet, final=None, delta=None, delta_fn=None,
                 is_final_fn=None, states=None, name=""):
        self.alphabet = alphabet
        self._delta = dict(delta) if delta is not None else None
        self._delta_fn = delta_fn
        self._final = frozenset(final) if final is not None else None
        self._is_final_fn = is_final_fn
        self.states = frozenset(states) if states is not None else None
        self.name = name
        self._memo = {}
        if self._delta is None and self._delta_fn is None:
            raise ValueError("need delta or delta_fn")

    def step(self, label, children):
        key = (label, tuple(children))
        if self._delta is not None:
            if key not in self._delta:
                raise ValueError("Dbta not total at %r" % (key,))
            return self._delta[key]
        if key not in self._memo:
            self._memo[key] = self._delta_fn(label, tuple(children))
        return self._memo[key]

    def is_final(self, state):
        if self._final is not None:
            return state in self._final
        return self._is_final_fn(state)

    def run(self, t):
        out = [None] * len(t)
        for u in reversed(range(len(t))):
            lab = t.label(u)
            if lab not in self.alphabet.symbols:
                raise ValueError("unknown symbol %r" % lab)
            out[u] = self.step(lab, tuple(out[v] for v in t.kids[u]))
        return out

    def state_of(self, t):
        if len(t) == 0:
            raise ValueError("Dbta runs on trees, not empty forests")
        return self.run(t)[0]

    def accepts(self, t):
        return self.is_final(self.state_of(t))

    def as_nbta(self):
        """Reachable part as an explicit Nbta (for conversions)."""
        states, delta = reachable_table(self)
        final = frozenset(s for s in states if self.is_final(s))
        nd = {key: frozenset([q]) for key, q in delta.items()}
        return Nbta(self.alphabet, frozenset(states), final, nd)


def reachable_table(a):
    """Explore a Dbta's reachable states; returns (states, delta dict)."""
    states = set()
    delta = {}
    frontier = True
    by_rank = {}
    for name, rank in a.alphabet.symbols.items():
        by_rank.setdefault(rank, []).append(name)
    while frontier:
        frontier = False
        known = sorted(states, key=repr)
        for rank, names in by_rank.items():
            for combo in _tuples(known, rank):
                for name in names:
                    key = (name, combo)
                    if key in delta:
                        continue
                    q = a.step(name, combo)
                    delta[key] = q
                    if q not in states:
                        states.add(q)
                        frontier = True
    return states, delta


def _tuples(items, n):
    if n == 0:
        yield ()
        return
    for head in items:
        for rest in _tuples(items, n - 1):
            yield (head,) + rest


def member(a, t):
    """Bottom-up membership for Dbta or Nbta."""
    return a.accepts(t)


def determinize(a):
    """Subset construction; the result is total (empty set is the sink)."""
    if isinstance(a, Rtg):
        a = rtg_to_nbta(a)

    def step(label, children):
        targets = set()
        for combo in _product_sets([sorted(c) for c in children]):
            targets |= a.targets(label, combo)
        return frozenset(targets)

    d = Dbta(
        a.alphabet,
        delta_fn=step,
        is_final_fn=lambda s: bool(s & a.final),
        name="det(%s)" % getattr(a, "name", ""),
    )
    states, delta = reachable_table(d)
    return Dbta(
        a.alphabet,
        final=frozenset(s for s in states if bool(s & a.final)),
        delta=delta,
        states=states,
    )


def complement(a):
    """Flip final states of a total deterministic automaton."""
    if a._final is not None and a.states is not None:
        return Dbta(
            a.alphabet,
            final=a.states - a._final,
            delta=a._delta,
            delta_fn=a._delta_fn,
            states=a.states,
        )
    return Dbta(
        a.alphabet,
        delta=a._delta,
        delta_fn=a._delta_fn if a._delta is None else None,
        is_final_fn=lambda s: not a.is_final(s),
        name="not(%s)" % a.name,
    )


def product(a, b, op="and"):
    """Pairwise product of two Dbtas over the same alphabet."""
    if a.alphabet.symbols != b.alphabet.symbols:
        raise ValueError("alphabet mismatch")
    combine = {
        "and": lambda x, y: x and y,
        "or": lambda x, y: x or y,
    }[op]

    def step(label, children):
        return (
            a.step(label, tuple(c[0] for c in children)),
            b.step(label, tuple(c[1] for c in children)),
        )

    return Dbta(
        a.alphabet,
        delta_fn=step,
        is_final_fn=lambda s: combine(a.is_final(s[0]), b.is_final(s[1])),
        name="(%s %s %s)" % (a.name, op, b.name),
    )


def is_empty(a):
    """Emptiness with witness extraction.

    Returns (True, None) when the language is empty, else (False, witness)
    where the witness is the lexicographically least tree of minimal height
    (ties broken by the rendered term string).
    """
    if isinstance(a, Rtg):
        a = rtg_to_nbta(a)
    if isinstance(a, Nbta):
        return _is_empty_nbta(a)
    return _is_empty_dbta(a)


def _better(x, y):
    # witness preference: smaller height, then smaller rendered form
    return x if (x[0], x[1]) <= (y[0], y[1]) else y


def _is_empty_nbta(a):
    best = {}
    changed = True
    while changed:
        changed = False
        for (label, children), targets in sorted(
            a.delta.items(), key=lambda kv: (kv[0][0], repr(kv[0][1]))
        ):
            if not all(c in best for c in children):
                continue
            height = 1 + max((best[c][0] for c in children), default=0)
            text = label
            if children:
                text += "(" + ",".join(best[c][1] for c in children) + ")"
            cand = (height, text)
            for q in targets:
                if q not in best:
                    best[q] = cand
                    changed = True
                elif _better(best[q], cand) is cand and cand != best[q]:
                    best[q] = cand
                    changed = True
    hits = [best[q] for q in a.final if q in best]
    if not hits:
        return True, None
    from .terms import parse_term

    witness = min(hits)
    return False, parse_term(witness[1])


def _is_empty_dbta(a):
    # lazily explore inhabited states with minimal witnesses
    best = {}
    by_rank = {}
    for name, rank in a.alphabet.symbols.items():
        by_rank.setdefault(rank, []).append(name)
    for rank in by_rank:
        by_rank[rank].sort()
    changed = True
    while changed:
        changed = False
        known = sorted(best, key=repr)
        for rank, names in sorted(by_rank.items()):
            for combo in _tuples(known, rank):
                for name in names:
                    q = a.step(name, combo)
                    height = 1 + max((best[c][0] for c in combo), default=0)
                    text = name
                    if combo:
                        text += "(" + ",".join(best[c][1] for c in combo) + ")"
                    cand = (height, text)
                    if q not in best or (
                        _better(best[q], cand) is cand and cand != best[q]
                    ):
                        best[q] = cand
                        changed = True
    hits = [v for q, v in best.items() if a.is_final(q)]
    if not hits:
        return True, None
    from .terms import parse_term

    witness = min(hits)
    return False, parse_term(witness[1])


@dataclass(frozen=True)
class Rtg:
    """Regular tree grammar: rules X0 -> sigma(X1...Xm)."""

    alphabet: RankedAlphabet
    nonterminals: frozenset
    initial: object
    rules: tuple  # of (lhs, label, tuple of rhs nonterminals)

    def __post_init__(self):
        for (_lhs, label, children) in self.rules:
            if self.alphabet.rank(label) != len(children):
                raise ValueError("rule arity mismatch for %r" % label)


def rtg_to_nbta(g):
    delta = {}
    for (lhs, label, children) in g.rules:
        key = (label, tuple(children))
        delta.setdefault(key, set()).add(lhs)
    delta = {k: frozenset(v) for k, v in delta.items()}
    return Nbta(
        g.alphabet, frozenset(g.nonterminals), frozenset([g.initial]), delta
    )


def nbta_to_rtg(a):
    start = ("S0",)
    rules = []
    for (label, children), targets in a.delta.items():
        for q in targets:
            rules.append((q, label, tuple(children)))
            if q in a.final:
                rules.append((start, label, tuple(children)))
    return Rtg(
        a.alphabet,
        frozenset(a.states) | {start},
        start,
        tuple(rules),
    )


class GrammarEmpty(Exception):
    """The grammar generates no value at all."""


class GrammarAmbiguous(Exception):
    """Two derivations produce different values."""


class GrammarOverflow(Exception):
    """The unique generated value exceeds the size cap."""


@dataclass(frozen=True)
class ForestCfg:
    """Forest-generating context-free grammar.

    Rule shapes: ("node", X0, sigma, X1, X2) for X0 -> sigma(X1)X2,
    ("eps", X) for X -> epsilon, and ("cat", X0, X1, X2) for the general
    concatenation X0 -> X1 X2 that deterministic transducer outputs need.
    """

    nonterminals: frozenset
    initial: object
    rules: tuple

    def rules_for(self, x):
        return [r for r in self.rules if r[1] == x]


def _productive(rules_by_lhs, leaf_rule, parts_of):
    """Fixpoint of nonterminals that derive at least one value."""
    productive = set()
    changed = True
    while changed:
        changed = False
        for lhs, rules in rules_by_lhs.items():
            if lhs in productive:
                continue
            for rule in rules:
                if all(p in productive for p in parts_of(rule)):
                    productive.add(lhs)
                    changed = True
                    break
    return productive


def cfg_expand_singleton(g, size_cap=10 ** 6):
    """Expand a singleton forest grammar into the forest it generates.

    Raises GrammarEmpty when nothing is generated, GrammarAmbiguous when two
    derivations give different forests, GrammarOverflow past size_cap.
    """
    rules_by_lhs = {}
    for r in g.rules:
        rules_by_lhs.setdefault(r[1], []).append(r)

    def parts_of(rule):
        if rule[0] == "eps":
            return ()
        if rule[0] == "node":
            return (rule[3], rule[4])
        return (rule[2], rule[3])

    productive = _productive(rules_by_lhs, None, parts_of)
    if g.initial not in productive:
        raise GrammarEmpty()

    # size DP first so the cap triggers before anything huge materializes
    sizes = {}

    def size_of(x, stack):
        if x in sizes:
            return sizes[x]
        if x in stack:
            raise GrammarAmbiguous("cycle through %r" % (x,))
        stack = stack | {x}
        value = None
        for rule in rules_by_lhs.get(x, []):
            if not all(p in productive for p in parts_of(rule)):
                continue
            if rule[0] == "eps":
                value = 0
            elif rule[0] == "node":
                value = 1 + size_of(rule[3], stack) + size_of(rule[4], stack)
            else:
                value = size_of(rule[2], stack) + size_of(rule[3], stack)
            break
        sizes[x] = value
        return value

    import sys

    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, 100000))
    try:
        if size_of(g.initial, frozenset()) > size_cap:
            raise GrammarOverflow()

        forests = {}

        def expand(x, stack):
            if x in forests:
                return forests[x]
            if x in stack:
                raise GrammarAmbiguous("cycle through %r" % (x,))
            stack = stack | {x}
            value = None
            for rule in rules_by_lhs.get(x, []):
                if not all(p in productive for p in parts_of(rule)):
                    continue
                if rule[0] == "eps":
                    cand = ()
                elif rule[0] == "node":
                    _k, _x0, label, x1, x2 = rule
                    cand = ((label, expand(x1, stack)),) + expand(x2, stack)
                else:
                    _k, _x0, x1, x2 = rule
                    cand = expand(x1, stack) + expand(x2, stack)
                if value is None:
                    value = cand
                elif value != cand:
                    raise GrammarAmbiguous("two forests from %r" % (x,))
            forests[x] = value
            return value

        value = expand(g.initial, frozenset())
    finally:
        sys.setrecursionlimit(old)
    return Forest.from_nested(_to_lists(value))


def _to_lists(value):
    return [(label, _to_lists(kids)) for (label, kids) in value]


def rtg_expand_singleton(g, size_cap=10 ** 6):
    """Expand a singleton regular tree grammar into its unique tree."""
    rules_by_lhs = {}
    for r in g.rules:
        rules_by_lhs.setdefault(r[0], []).append(r)

    productive = _productive(
        rules_by_lhs, None, lambda rule: rule[2]
    )
    if g.initial not in productive:
        raise GrammarEmpty()

    sizes = {}

    def size_of(x, stack):
        if x in sizes:
            return sizes[x]
        if x in stack:
            raise GrammarAmbiguous("cycle through %r" % (x,))
        stack = stack | {x}
        value = None
        for (_lhs, _label, children) in rules_by_lhs.get(x, []):
            if not all(c in productive for c in children):
                continue
            value = 1 + sum(size_of(c, stack) for c in children)
            break
        sizes[x] = value
        return value

    trees = {}

    def expand(x, stack):
        if x in trees:
            return trees[x]
        if x in stack:
            raise GrammarAmbiguous("cycle through %r" % (x,))
        stack = stack | {x}
        value = None
        for (_lhs, label, children) in rules_by_lhs.get(x, []):
            if not all(c in productive for c in children):
                continue
            cand = (label, tuple(expand(c, stack) for c in children))
            if value is None:
                value = cand
            elif value != cand:
                raise GrammarAmbiguous("two trees from %r" % (x,))
        trees[x] = value
        return value

    import sys

    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, 100000))
    try:
        if size_of(g.initial, frozenset()) > size_cap:
            raise GrammarOverflow()
        value = expand(g.initial, frozenset())
    finally:
        sys.setrecursionlimit(old)
    return RankedTree.from_nested(_to_lists((value,)))


def complete_dbta(alphabet, final, delta):
    """Totalize a partial table-backed Dbta by adding a sink state."""
    states = set()
    for (label, children), q in delta.items():
        states.update(children)
        states.add(q)
    states.update(final)
    need_sink = False
    full = dict(delta)
    for name, rank in alphabet.symbols.items():
        for combo in _tuples(sorted(states, key=repr), rank):
            if (name, combo) not in full:
                need_sink = True
    if need_sink:
        states.add(SINK)
    for name, rank in alphabet.symbols.items():
        for combo in _tuples(sorted(states, key=repr), rank):
            full.setdefault((name, combo), SINK)
    return Dbta(alphabet, final=frozenset(final), delta=full,
                states=frozenset(states))


def dbta_to_json(a):
    states, delta = reachable_table(a)
    naming = {s: s if isinstance(s, str) else "s%d" % i
              for i, s in enumerate(sorted(states, key=repr))}
    return {
        "alphabet": dict(a.alphabet.symbols),
        "states": sorted(naming.values()),
        "final": sorted(naming[s] for s in states if a.is_final(s)),
        "delta": [
            {"label": label, "children": [naming[c] for c in children],
             "to": naming[q]}
            for (label, children), q in sorted(
                delta.items(), key=lambda kv: (kv[0][0], repr(kv[0][1]))
            )
        ],
    }


def dbta_from_json(doc):
    alphabet = RankedAlphabet(dict(doc["alphabet"]))
    delta = {}
    for entry in doc["delta"]:
        key = (entry["label"], tuple(entry["children"]))
        if key in delta:
            raise ValueError("duplicate transition for %r" % (key,))
        delta[key] = entry["to"]
    return complete_dbta(alphabet, frozenset(doc["final"]), delta)


def nbta_from_json(doc):
    alphabet = RankedAlphabet(dict(doc["alphabet"]))
    delta = {}
    for entry in doc["delta"]:
        key = (entry["label"], tuple(entry["children"]))
        delta.setdefault(key, set()).add(entry["to"])
    states = set(doc.get("states", []))
    for (label, children), targets in delta.items():
        states.update(children)
        states.update(targets)
    return Nbta(
        alphabet,
        frozenset(states),
        frozenset(doc["final"]),
        {k: frozenset(v) for k, v in delta.items()},
    )


def nbta_to_json(a):
    return {
        "alphabet": dict(a.alphabet.symbols),
        "states": sorted(a.states, key=repr),
        "final": sorted(a.final, key=repr),
        "delta": [
            {"label": label, "children": list(children), "to": q}
            for (label, children), targets in sorted(
                a.delta.items(), key=lambda kv: (kv[0][0], repr(kv[0][1]))
            )
            for q in sorted(targets, key=repr)
        ],
    }


def rtg_from_json(doc):
    alphabet = RankedAlphabet(dict(doc["alphabet"]))
    rules = tuple(
        (r["lhs"], r["label"], tuple(r["children"])) for r in doc["rules"]
    )
    nts = set(doc.get("nonterminals", []))
    nts.add(doc["initial"])
    for (lhs, _label, children) in rules:
        nts.add(lhs)
        nts.update(children)
    return Rtg(alphabet, frozenset(nts), doc["initial"], rules)


def rtg_to_json(g):
    return {
        "alphabet": dict(g.alphabet.symbols),
        "nonterminals": sorted(g.nonterminals, key=repr),
        "initial": g.initial,
        "rules": [
            {"lhs": lhs, "label": label, "children": list(children)}
            for (lhs, label, children) in g.rules
        ],
    }
