"""Pebble tree/forest automata and transducers: syntax, validation, and
machine-to-machine normalizations (stack-test elimination, normal form,
bottom-up automaton embedding)."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace

from .regular import Dbta, dbta_from_json, dbta_to_json
from .terms import RankedAlphabet, UnrankedAlphabet

__all__ = [
    "Machine",
    "Rule",
    "GuardTest",
    "NormalFormMeta",
    "validate",
    "is_deterministic",
    "eliminate_stack_tests",
    "dbta_to_ipta",
    "normal_form",
    "is_normal_form",
    "split_compound",
    "expand_search",
    "machine_to_json",
    "machine_from_json",
    "EMPTY_STACK",
]

# stack-test value meaning "the pebble stack is empty"
EMPTY_STACK = ""

MOVE_ATOMS = ("stay", "up", "down")
PEBBLE_ATOMS = ("drop", "lift")
SEARCH_ATOMS = ("totop", "tocolor")


@dataclass(frozen=True)
class GuardTest:
    """MSO test attached to rules by name.

    scope 'head':       site Dbta over tmark_1(Sigma); only the head marked.
    scope 'visible':    site Dbta over tmark_1(Sigma x 2^C); visible pebbles
                        appear as label colors.
    scope 'observable': like 'visible' plus the topmost pebble's color.
    scope 'marks':      Dbta over tmark_n(Sigma); mark i sits on the node
                        named by sources[i], one of ("head",), ("top",), or
                        ("vis", color).  Undefined sources fail the test.
    """

    scope: str
    dbta: Dbta
    sources: tuple = ()

    def __post_init__(self):
        if self.scope not in ("head", "visible", "observable", "marks"):
            raise ValueError("bad guard scope %r" % self.scope)


@dataclass(frozen=True)
class Rule:
    state: object
    label: str
    childno: int
    pebbles: frozenset
    rhs: tuple
    stack_top: object = None  # None: no test; "": empty stack; else a color
    guard: object = None  # None or (name, negated)

    def lhs_key(self):
        return (self.state, self.label, self.childno, self.pebbles,
                self.stack_top)


def move(state, *atoms):
    return ("move", state, tuple(atoms))


def out_tree(label, *branches):
    return ("output", label, tuple(branches))


def out_fnode(label, state):
    return ("fnode", label, state)


def out_fconcat(left, right):
    return ("fconcat", left, right)


def out_fempty():
    return ("fempty",)


class Machine:
    """A pta / ptt / pft rule system.

    Rules with childno None are wildcard sugar and get expanded here.
    States and colors may be arbitrary hashables; JSON dumping names them.
    """

    def __init__(self, kind, input_alphabet, output_alphabet, states,
                 initial, rules, final=(), visible_colors=(),
                 invisible_colors=(), k=0, guards=None, strong_visible=False,
                 strong_invisible=False, name=""):
        if kind not in ("pta", "ptt", "pft"):
            raise ValueError("kind must be pta, ptt or pft")
        self.kind = kind
        self.input_alphabet = input_alphabet
        self.output_alphabet = output_alphabet
        self.states = frozenset(states)
        self.initial = frozenset(initial)
        self.final = frozenset(final)
        self.visible_colors = frozenset(visible_colors)
        self.invisible_colors = frozenset(invisible_colors)
        self.k = k
        self.guards = dict(guards or {})
        self.strong_visible = strong_visible
        self.strong_invisible = strong_invisible
        self.name = name
        self.rules = tuple(self._expand(rules))
        self._index = {}
        for rule in self.rules:
            self._index.setdefault(
                (rule.state, rule.label, rule.childno), []
            ).append(rule)

    def _expand(self, rules):
        max_j = self.input_alphabet.max_rank
        for rule in rules:
            if rule.childno is None:
                for j in range(max_j + 1):
                    yield replace(rule, childno=j)
            else:
                yield rule

    @property
    def colors(self):
        return self.visible_colors | self.invisible_colors

    def rules_at(self, state, label, childno):
        return self._index.get((state, label, childno), ())

    def replace(self, **kw):
        args = dict(
            kind=self.kind,
            input_alphabet=self.input_alphabet,
            output_alphabet=self.output_alphabet,
            states=self.states,
            initial=self.initial,
            rules=self.rules,
            final=self.final,
            visible_colors=self.visible_colors,
            invisible_colors=self.invisible_colors,
            k=self.k,
            guards=self.guards,
            strong_visible=self.strong_visible,
            strong_invisible=self.strong_invisible,
            name=self.name,
        )
        args.update(kw)
        return Machine(**args)

    def __repr__(self):
        return "Machine(%s %r, %d states, %d rules)" % (
            self.kind, self.name, len(self.states), len(self.rules))


def rhs_states(rhs):
    if rhs[0] == "move":
        return (rhs[1],)
    if rhs[0] == "output":
        return tuple(rhs[2])
    if rhs[0] == "fnode":
        return (rhs[2],)
    if rhs[0] == "fconcat":
        return (rhs[1], rhs[2])
    return ()


def map_rhs_states(rhs, fn):
    if rhs[0] == "move":
        return ("move", fn(rhs[1]), rhs[2])
    if rhs[0] == "output":
        return ("output", rhs[1], tuple(fn(q) for q in rhs[2]))
    if rhs[0] == "fnode":
        return ("fnode", rhs[1], fn(rhs[2]))
    if rhs[0] == "fconcat":
        return ("fconcat", fn(rhs[1]), fn(rhs[2]))
    return rhs


def validate(m):
    """Return a list of violation strings; empty iff well-formed."""
    report = []
    say = report.append
    if m.visible_colors & m.invisible_colors:
        say("visible and invisible colors overlap: %s"
            % sorted(m.visible_colors & m.invisible_colors, key=repr))
    if m.kind == "pta":
        if m.output_alphabet is not None:
            say("pta has no output alphabet")
    else:
        if m.output_alphabet is None:
            say("%s needs an output alphabet" % m.kind)
        if m.final:
            say("only pta machines have final states")
    if m.strong_invisible:
        say("strong invisible pebbles break regularity; only the "
            "brute-force engine may run this machine")
    if not m.initial <= m.states:
        say("initial states not declared")
    if not m.final <= m.states:
        say("final states not declared")
    max_j = m.input_alphabet.max_rank
    for idx, rule in enumerate(m.rules):
        where = "rule %d" % idx

        def bad(msg):
            say("%s: %s" % (where, msg))

        if rule.state not in m.states:
            bad("undeclared state %r" % (rule.state,))
        if rule.label not in m.input_alphabet.symbols:
            bad("unknown input symbol %r" % rule.label)
            continue
        rank = m.input_alphabet.rank(rule.label)
        if not (0 <= rule.childno <= max_j):
            bad("child number %r out of range" % (rule.childno,))
        if not rule.pebbles <= m.colors:
            bad("undeclared colors in pebble set")
        if len(rule.pebbles & m.visible_colors) > m.k:
            bad("pebble set observes more than k visible colors")
        if len(rule.pebbles & m.invisible_colors) > 1:
            bad("pebble set observes more than one invisible color")
        if rule.stack_top not in (None, EMPTY_STACK) and \
                rule.stack_top not in m.colors:
            bad("undeclared stack-test color %r" % (rule.stack_top,))
        if rule.guard is not None:
            gname, neg = rule.guard
            if gname not in m.guards:
                bad("unregistered guard %r" % gname)
            elif not isinstance(neg, bool):
                bad("guard polarity must be a bool")
        rhs = rule.rhs
        for q in rhs_states(rhs):
            if q not in m.states:
                bad("undeclared target state %r" % (q,))
        if rhs[0] == "move":
            atoms = rhs[2]
            if not 1 <= len(atoms) <= 2:
                bad("instruction sequences have one or two atoms")
            moved = False
            for pos, atom in enumerate(atoms):
                op = atom[0]
                if op == "stay":
                    pass
                elif op == "up":
                    if not moved and rule.childno == 0:
                        bad("up at child number 0")
                elif op == "down":
                    if not moved and not 1 <= atom[1] <= rank:
                        bad("down_%d exceeds rank of %r"
                            % (atom[1], rule.label))
                elif op == "drop":
                    if atom[1] not in m.colors:
                        bad("drop of undeclared color %r" % (atom[1],))
                elif op == "lift":
                    if atom[1] not in m.colors:
                        bad("lift of undeclared color %r" % (atom[1],))
                    elif pos == 0 and not (
                        m.strong_visible and atom[1] in m.visible_colors
                    ) and atom[1] not in rule.pebbles:
                        bad("lift of unobserved color %r" % (atom[1],))
                elif op in SEARCH_ATOMS:
                    bad("search pseudo-instruction %r must be expanded"
                        % (op,))
                else:
                    bad("unknown instruction atom %r" % (atom,))
                if op in ("up", "down"):
                    moved = True
        elif rhs[0] == "output":
            if m.kind == "pft":
                bad("tree output rule in a pft")
            elif m.kind == "ptt":
                label = rhs[1]
                if label not in m.output_alphabet.symbols:
                    bad("unknown output symbol %r" % label)
                elif m.output_alphabet.rank(label) != len(rhs[2]):
                    bad("output arity mismatch for %r" % label)
            else:
                # pta: output = "halt in final state" encoding not used;
                # pta rules must be moves
                bad("pta rules cannot produce output")
        elif rhs[0] in ("fnode", "fconcat", "fempty"):
            if m.kind != "pft":
                bad("forest output rule in a %s" % m.kind)
            elif rhs[0] == "fnode" and rhs[1] not in m.output_alphabet.symbols:
                bad("unknown output symbol %r" % (rhs[1],))
        else:
            bad("unknown rhs %r" % (rhs,))
    return report


def is_deterministic(m):
    """One initial state, no final lhs state, no two rules sharing an lhs
    (a rule pair guarded by a test and its negation does not clash)."""
    if len(m.initial) != 1:
        return False
    groups = {}
    for rule in m.rules:
        if rule.state in m.final:
            return False
        groups.setdefault(rule.lhs_key(), []).append(rule)
    for rules in groups.values():
        if len(rules) == 1:
            continue
        if len(rules) == 2:
            g1, g2 = rules[0].guard, rules[1].guard
            if (
                g1 is not None
                and g2 is not None
                and g1[0] == g2[0]
                and g1[1] != g2[1]
            ):
                continue
        return False
    return True


def split_compound(m):
    """Break two-atom instruction sequences into single-atom rules.

    The second atom runs from a fresh state that accepts any situation, so
    sequences must never fail after their first atom (true for every
    construction in this package).
    """
    rules = []
    states = set(m.states)
    fresh = itertools.count()
    max_j = m.input_alphabet.max_rank

    def feasible_pebsets():
        vis = sorted(m.visible_colors, key=repr)
        inv = sorted(m.invisible_colors, key=repr)
        for r in range(min(m.k, len(vis)) + 1):
            for vs in itertools.combinations(vis, r):
                yield frozenset(vs)
                for c in inv:
                    yield frozenset(vs) | {c}

    pebsets = list(feasible_pebsets())
    for rule in m.rules:
        if rule.rhs[0] != "move" or len(rule.rhs[2]) == 1:
            rules.append(rule)
            continue
        a1, a2 = rule.rhs[2]
        target = rule.rhs[1]
        mid = ("__seq%d" % next(fresh), target)
        states.add(mid)
        rules.append(Rule(rule.state, rule.label, rule.childno, rule.pebbles,
                          ("move", mid, (a1,)), rule.stack_top, rule.guard))
        for label in m.input_alphabet.symbols:
            rank = m.input_alphabet.rank(label)
            for j in range(max_j + 1):
                if a2[0] == "up" and j == 0:
                    continue
                if a2[0] == "down" and a2[1] > rank:
                    continue
                for b in pebsets:
                    if a2[0] == "lift" and a2[1] not in b and not (
                        m.strong_visible and a2[1] in m.visible_colors
                    ):
                        continue
                    rules.append(Rule(mid, label, j, b,
                                      ("move", target, (a2,))))
    return m.replace(states=states, rules=rules)


def expand_search(m):
    """Expand totop / tocolor pseudo-instructions into walk subroutines.

    totop: move the head to the node of the topmost pebble (invisible colors
    only); tocolor c: move to the unique node where color c is observable.
    Realized as a walk to the root followed by a depth-first search.
    """
    rules = []
    states = set(m.states)
    needed = set()  # (target_state, color or None)

    for rule in m.rules:
        if rule.rhs[0] != "move":
            rules.append(rule)
            continue
        atoms = rule.rhs[2]
        hits = [a for a in atoms if a[0] in SEARCH_ATOMS]
        if not hits:
            rules.append(rule)
            continue
        if atoms[-1][0] not in SEARCH_ATOMS or len(hits) != 1:
            raise ValueError("search atom must come last")
        color = atoms[-1][1] if atoms[-1][0] == "tocolor" else None
        target = rule.rhs[1]
        needed.add((target, color))
        entry = ("__root", target, color)
        prefix = atoms[:-1]
        rules.append(Rule(rule.state, rule.label, rule.childno, rule.pebbles,
                          ("move", entry, prefix or (("stay",),)),
                          rule.stack_top, rule.guard))

    max_j = m.input_alphabet.max_rank
    vis = sorted(m.visible_colors, key=repr)
    inv = sorted(m.invisible_colors, key=repr)
    pebsets = []
    for r in range(min(m.k, len(vis)) + 1):
        for vs in itertools.combinations(vis, r):
            pebsets.append(frozenset(vs))
            for c in inv:
                pebsets.append(frozenset(vs) | {c})

    def found(b, color):
        if color is None:
            return bool(b & m.invisible_colors)
        return color in b

    for (target, color) in needed:
        root_q = ("__root", target, color)
        scan_q = ("__scan", target, color)
        nexts = {i: ("__next", target, color, i) for i in range(1, max_j + 1)}
        states.add(root_q)
        states.add(scan_q)
        states.update(nexts.values())
        for label in m.input_alphabet.symbols:
            rank = m.input_alphabet.rank(label)
            for j in range(max_j + 1):
                for b in pebsets:
                    if found(b, color):
                        # arrived: the wanted pebble is observable here
                        for st in [root_q, scan_q, *nexts.values()]:
                            rules.append(Rule(st, label, j, b,
                                              ("move", target,
                                               (("stay",),))))
                        continue
                    if j == 0:
                        rules.append(Rule(root_q, label, 0, b,
                                          ("move", scan_q, (("stay",),))))
                    else:
                        rules.append(Rule(root_q, label, j, b,
                                          ("move", root_q, (("up",),))))
                    if rank >= 1:
                        rules.append(Rule(scan_q, label, j, b,
                                          ("move", scan_q, (("down", 1),))))
                    elif j != 0:
                        rules.append(Rule(scan_q, label, j, b,
                                          ("move", nexts[j], (("up",),))))
                    # after finishing the subtree of child i, move on
                    for i, nxt in nexts.items():
                        if rank > i:
                            rules.append(Rule(nxt, label, j, b,
                                              ("move", scan_q,
                                               (("down", i + 1),))))
                        elif j != 0:
                            rules.append(Rule(nxt, label, j, b,
                                              ("move", nexts[j], (("up",),))))
    return m.replace(states=states, rules=rules)


def eliminate_stack_tests(m):
    """Compile away lhs stack tests: colors become (color, below) pairs and
    states (state, top-or-empty) pairs; language/transduction preserved."""
    for g in m.guards.values():
        if g.scope != "head":
            raise ValueError(
                "stack-test elimination would change the colors a "
                "%r-scope guard sees" % g.scope)
    m = split_compound(m)
    eps = EMPTY_STACK
    gammas = [eps] + sorted(m.colors, key=repr)

    def st(q, g):
        return ("g", q, g)

    states = {st(q, g) for q in m.states for g in gammas}
    initial = {st(q, eps) for q in m.initial}
    final = {st(q, g) for q in m.final for g in gammas}
    vis = {(c, g) for c in m.visible_colors for g in gammas}
    inv = {(c, g) for c in m.invisible_colors for g in gammas}

    rules = []
    for rule in m.rules:
        tests = gammas if rule.stack_top is None else [rule.stack_top]
        for gamma in tests:
            for values in itertools.product(
                gammas, repeat=len(rule.pebbles)
            ):
                mapping = dict(zip(sorted(rule.pebbles, key=repr), values))
                bp = frozenset(mapping.items())
                rhs = rule.rhs
                if rhs[0] == "move" and rhs[2][0][0] == "drop":
                    c = rhs[2][0][1]
                    new = ("move", st(rhs[1], c), (("drop", (c, gamma)),))
                elif rhs[0] == "move" and rhs[2][0][0] == "lift":
                    c = rhs[2][0][1]
                    if gamma != c or c not in mapping:
                        continue
                    gp = mapping[c]
                    new = ("move", st(rhs[1], gp), (("lift", (c, gp)),))
                else:
                    new = map_rhs_states(rhs, lambda q: st(q, gamma))
                rules.append(Rule(st(rule.state, gamma), rule.label,
                                  rule.childno, bp, new, None, rule.guard))
    return Machine(
        m.kind, m.input_alphabet, m.output_alphabet, states, initial, rules,
        final=final, visible_colors=vis, invisible_colors=inv, k=m.k,
        guards=m.guards, strong_visible=m.strong_visible,
        name="nostack(%s)" % m.name,
    )


def dbta_to_ipta(a):
    """Post-order evaluation of a total deterministic bottom-up automaton by
    a deterministic i-pta; pebble colors are state strings of length <= max
    rank."""
    from .regular import reachable_table

    states, delta = reachable_table(a)
    sigma = a.input_alphabet if hasattr(a, "input_alphabet") else a.alphabet
    max_rank = sigma.max_rank
    P = sorted(states, key=repr)

    colors = [()]
    for _ in range(max_rank):
        colors += [c + (p,) for c in colors if len(c) == _ for p in P]

    q0, qmain, qyes, qno = "q0", "qo", "qyes", "qno"
    mstates = {q0, qmain, qyes, qno} | {("bar", p) for p in P}
    rules = []
    for label, rank in sigma.symbols.items():
        rules.append(Rule(q0, label, 0, frozenset(),
                          ("move", qmain, (("drop", ()),))))
        for j in range(max_rank + 1):
            for color in colors:
                m_len = len(color)
                if m_len < rank:
                    rules.append(Rule(
                        qmain, label, j, frozenset([color]),
                        ("move", qmain,
                         (("down", m_len + 1), ("drop", ()))),
                    ))
                    for p in P:
                        rules.append(Rule(
                            ("bar", p), label, j, frozenset([color]),
                            ("move", qmain,
                             (("lift", color), ("drop", color + (p,)))),
                        ))
                elif m_len == rank:
                    p = delta[(label, color)]
                    if j != 0:
                        rules.append(Rule(
                            qmain, label, j, frozenset([color]),
                            ("move", ("bar", p),
                             (("lift", color), ("up",))),
                        ))
                    else:
                        tgt = qyes if a.is_final(p) else qno
                        rules.append(Rule(
                            qmain, label, 0, frozenset([color]),
                            ("move", tgt, (("stay",),)),
                        ))
    return Machine(
        "pta", sigma, None, mstates, {q0}, rules, final={qyes},
        invisible_colors=colors, k=0, name="ipta(dbta)",
    )


BEAD_UP = ("bead", "up")
ROOT_PEBBLE = ("bead", "root")


def _bead_down(i):
    return ("bead", "down", i)


@dataclass(frozen=True)
class NormalFormMeta:
    """Direction function: color -> move locating the next topmost pebble
    after a lift."""

    direction: dict


def normal_form(m):
    """Normal form for i-ptt / i-pft (k = 0): the head always sits on the
    topmost pebble; moves are fused with drops/lifts; a direction function
    locates the next pebble after a lift."""
    if m.k != 0 or m.visible_colors:
        raise ValueError("normal form requires k = 0")
    for g in m.guards.values():
        if g.scope != "head":
            raise ValueError(
                "normal form would change the colors a %r-scope guard sees"
                % g.scope)
    for rule in m.rules:
        if rule.stack_top is not None:
            raise ValueError("eliminate stack tests before normal form")
    m = split_compound(m)
    max_j = m.input_alphabet.max_rank
    beads = [BEAD_UP] + [_bead_down(i) for i in range(1, max_j + 1)]
    markers = beads + [ROOT_PEBBLE]

    qin = ("nf", "init")
    states = set(m.states) | {qin}
    rules = []
    for label in m.input_alphabet.symbols:
        for q0 in sorted(m.initial, key=repr):
            rules.append(Rule(qin, label, 0, frozenset(),
                              ("move", q0, (("drop", ROOT_PEBBLE),))))

    for rule in m.rules:
        rhs = rule.rhs
        b = rule.pebbles
        if rhs[0] == "move" and rhs[2][0][0] == "up":
            q2 = rhs[1]
            if not b:
                rules.append(Rule(rule.state, rule.label, rule.childno,
                                  frozenset([BEAD_UP]),
                                  ("move", q2, (("lift", BEAD_UP), ("up",))),
                                  None, rule.guard))
                for i in range(1, max_j + 1):
                    rules.append(Rule(
                        rule.state, rule.label, rule.childno,
                        frozenset([_bead_down(i)]),
                        ("move", q2,
                         (("up",), ("drop", _bead_down(rule.childno)))),
                        None, rule.guard))
            else:
                rules.append(Rule(
                    rule.state, rule.label, rule.childno, b,
                    ("move", q2,
                     (("up",), ("drop", _bead_down(rule.childno)))),
                    None, rule.guard))
        elif rhs[0] == "move" and rhs[2][0][0] == "down":
            q2, i = rhs[1], rhs[2][0][1]
            if not b:
                rules.append(Rule(
                    rule.state, rule.label, rule.childno,
                    frozenset([_bead_down(i)]),
                    ("move", q2, (("lift", _bead_down(i)), ("down", i))),
                    None, rule.guard))
                for mu in [BEAD_UP, ROOT_PEBBLE] + [
                    _bead_down(k) for k in range(1, max_j + 1) if k != i
                ]:
                    rules.append(Rule(
                        rule.state, rule.label, rule.childno,
                        frozenset([mu]),
                        ("move", q2, (("down", i), ("drop", BEAD_UP))),
                        None, rule.guard))
            else:
                rules.append(Rule(
                    rule.state, rule.label, rule.childno, b,
                    ("move", q2, (("down", i), ("drop", BEAD_UP))),
                    None, rule.guard))
        else:
            # stay moves, drops, lifts, and output rules keep their shape
            if not b:
                for mu in markers:
                    rules.append(Rule(rule.state, rule.label, rule.childno,
                                      frozenset([mu]), rhs, None, rule.guard))
            else:
                rules.append(rule)

    direction = {c: ("stay",) for c in m.colors}
    direction[BEAD_UP] = ("up",)
    direction[ROOT_PEBBLE] = ("stay",)
    for i in range(1, max_j + 1):
        direction[_bead_down(i)] = ("down", i)

    out = Machine(
        m.kind, m.input_alphabet, m.output_alphabet, states, {qin}, rules,
        invisible_colors=set(m.invisible_colors) | set(markers), k=0,
        guards=m.guards, name="nf(%s)" % m.name,
    )
    return out, NormalFormMeta(direction)


def is_normal_form(m):
    """Check the five normal-form requirements, including the existence of a
    consistent direction function."""
    if m.k != 0 or m.visible_colors:
        return False
    for rule in m.rules:
        for q in rhs_states(rule.rhs):
            if q in m.initial:
                return False  # (1)
    constraints = {}

    def constrain(c, mu):
        if constraints.setdefault(c, mu) != mu:
            raise ValueError

    try:
        for rule in m.rules:
            rhs = rule.rhs
            if rule.state in m.initial:
                if rule.childno != 0 or rule.pebbles:
                    return False  # (2)
                if rhs[0] != "move" or len(rhs[2]) != 1 or \
                        rhs[2][0][0] != "drop" or rhs[1] in m.initial:
                    return False
                continue
            if len(rule.pebbles) != 1:
                return False  # (3)
            if rhs[0] != "move":
                continue
            atoms = rhs[2]
            if len(atoms) == 1:
                a = atoms[0]
                if a[0] == "stay":
                    continue
                if a[0] == "drop":
                    constrain(a[1], ("stay",))  # stay;drop
                    continue
                if a[0] == "lift":
                    constrain(a[1], ("stay",))  # lift;stay
                    continue
                return False  # (4): bare moves not allowed
            a1, a2 = atoms
            if a1[0] == "lift" and a2[0] in ("up", "down", "stay"):
                constrain(a1[1], a2 if a2[0] == "down" else (a2[0],))
            elif a2[0] == "drop" and a1[0] in ("up", "down", "stay"):
                if a1[0] == "up":
                    constrain(a2[1], ("down", rule.childno))
                elif a1[0] == "stay":
                    constrain(a2[1], ("stay",))
                else:
                    constrain(a2[1], ("up",))
            else:
                return False  # (4)
    except ValueError:
        return False  # (5): no consistent direction function
    return True


def _namer(values, prefix):
    named = {}
    for v in sorted(values, key=repr):
        named[v] = v if isinstance(v, str) else "%s%d" % (prefix, len(named))
    return named


def _guard_to_json(g):
    doc = {"scope": g.scope, "dbta": dbta_to_json(g.dbta)}
    if g.scope == "marks":
        doc["sources"] = [list(s) for s in g.sources]
    return doc


def _guard_from_json(doc):
    sources = tuple(tuple(s) for s in doc.get("sources", []))
    return GuardTest(doc["scope"], dbta_from_json(doc["dbta"]), sources)


def machine_to_json(m):
    qname = _namer(m.states, "q")
    cname = _namer(m.colors, "c")

    def atom_json(atom):
        if atom[0] in ("drop", "lift"):
            return [atom[0], cname[atom[1]]]
        if atom[0] == "down":
            return ["down", atom[1]]
        return [atom[0]]

    def rhs_json(rhs):
        if rhs[0] == "move":
            return {"type": "move", "state": qname[rhs[1]],
                    "instr": [atom_json(a) for a in rhs[2]]}
        if rhs[0] == "output":
            return {"type": "output", "label": rhs[1],
                    "branches": [qname[q] for q in rhs[2]]}
        if rhs[0] == "fnode":
            return {"type": "fnode", "label": rhs[1], "state": qname[rhs[2]]}
        if rhs[0] == "fconcat":
            return {"type": "fconcat", "left": qname[rhs[1]],
                    "right": qname[rhs[2]]}
        return {"type": "fempty"}

    doc = {
        "kind": m.kind,
        "input_alphabet": dict(m.input_alphabet.symbols),
        "states": sorted(qname.values()),
        "initial": sorted(qname[q] for q in m.initial),
        "visible_colors": sorted(cname[c] for c in m.visible_colors),
        "invisible_colors": sorted(cname[c] for c in m.invisible_colors),
        "k": m.k,
        "strong_visible": m.strong_visible,
        "tests": {name: _guard_to_json(g) for name, g in m.guards.items()},
        "rules": [
            {
                "state": qname[r.state],
                "label": r.label,
                "childno": r.childno,
                "pebbles": sorted(cname[c] for c in r.pebbles),
                "stack_top": (None if r.stack_top is None
                              else cname.get(r.stack_top, r.stack_top)),
                "guard": r.guard[0] if r.guard else None,
                "negated": bool(r.guard[1]) if r.guard else False,
                "rhs": rhs_json(r.rhs),
            }
            for r in m.rules
        ],
    }
    if m.kind == "pta":
        doc["final"] = sorted(qname[q] for q in m.final)
    elif m.kind == "ptt":
        doc["output_alphabet"] = dict(m.output_alphabet.symbols)
    else:
        doc["output_alphabet"] = sorted(m.output_alphabet.symbols)
    if m.strong_invisible:
        doc["strong_invisible"] = True
    return doc


def machine_from_json(doc):
    kind = doc["kind"]
    input_alphabet = RankedAlphabet(dict(doc["input_alphabet"]))
    if kind == "pta":
        output_alphabet = None
    elif kind == "ptt":
        output_alphabet = RankedAlphabet(dict(doc["output_alphabet"]))
    else:
        output_alphabet = UnrankedAlphabet(frozenset(doc["output_alphabet"]))

    states = set(doc["states"])
    extra_rules = []

    def parse_atom(a):
        op = a[0]
        if op in ("drop", "lift"):
            return (op, a[1])
        if op == "down":
            return ("down", int(a[1]))
        if op in ("stay", "up", "totop"):
            return (op,)
        if op == "tocolor":
            return ("tocolor", a[1])
        raise ValueError("unknown instruction atom %r" % (a,))

    def parse_branch(entry, ctx):
        # the shortcut <q_i, non-stay instruction> desugars into a state
        if isinstance(entry, str):
            return entry
        state = entry["state"]
        atoms = tuple(parse_atom(a) for a in entry["instr"])
        fresh = "__br%d" % len(states)
        states.add(fresh)
        label, childno = ctx
        extra_rules.append(Rule(fresh, label, childno, frozenset(),
                               ("move", state, atoms)))
        return fresh

    rules = []
    for r in doc["rules"]:
        body = r["rhs"]
        childno = r.get("childno")
        ctx = (r["label"], childno)
        if body["type"] == "move":
            rhs = ("move", body["state"],
                   tuple(parse_atom(a) for a in body["instr"]))
        elif body["type"] == "output":
            rhs = ("output", body["label"],
                   tuple(parse_branch(b, ctx) for b in body["branches"]))
        elif body["type"] == "fnode":
            rhs = ("fnode", body["label"], body["state"])
        elif body["type"] == "fconcat":
            rhs = ("fconcat", body["left"], body["right"])
        elif body["type"] == "fempty":
            rhs = ("fempty",)
        else:
            raise ValueError("unknown rhs type %r" % body["type"])
        guard = None
        if r.get("guard"):
            guard = (r["guard"], bool(r.get("negated", False)))
        rules.append(Rule(r["state"], r["label"], childno,
                          frozenset(r.get("pebbles", ())), rhs,
                          r.get("stack_top"), guard))
    rules.extend(extra_rules)

    guards = {name: _guard_from_json(g)
              for name, g in doc.get("tests", {}).items()}
    return Machine(
        kind, input_alphabet, output_alphabet, states, doc["initial"], rules,
        final=doc.get("final", ()),
        visible_colors=doc.get("visible_colors", ()),
        invisible_colors=doc.get("invisible_colors", ()),
        k=doc.get("k", 0),
        guards=guards,
        strong_visible=doc.get("strong_visible", False),
        strong_invisible=doc.get("strong_invisible", False),
    )
