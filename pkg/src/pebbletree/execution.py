"""Operational semantics: brute-force stepping, pushdown-saturation
acceptance and trips, output-grammar construction, and runtime guard
evaluation.

Configurations are (state, node, stack) with the stack a tuple of
(node, color) pairs, last = top.  The saturation engine is a standard
post* construction over a finite automaton of stack symbols whose control
states are (state, node, visible-map) triples.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .machines import EMPTY_STACK, GuardTest
from .regular import ForestCfg, Rtg
from .terms import (
    Forest,
    RankedTree,
    color_alphabet,
    make_label,
    split_label,
    tmark,
)

__all__ = [
    "EvalContext",
    "eval_guard",
    "step",
    "enumerate_outputs",
    "accepts",
    "trips",
    "brute_accepts",
    "run_deterministic",
    "run_bounded",
    "expocom_bound",
    "Caps",
    "EnumerationIncomplete",
]

BOTTOM = ("__bottom__",)
FINAL = "__acc__"


@dataclass
class Caps:
    steps: int = 10 ** 6
    stack_depth: int = 10 ** 4
    outputs: int = 10 ** 4


class EnumerationIncomplete(Exception):
    """Raised by callers that require a complete enumeration."""


class EvalContext:
    """Per-query memo tables (guards, colored trees)."""

    def __init__(self, m, t):
        self.m = m
        self.t = t
        self.guard_memo = {}
        self.colored_memo = {}

    def colored_tree(self, coloring):
        """Input tree with a {node: frozenset(colors)} coloring."""
        key = frozenset(coloring.items())
        if key not in self.colored_memo:
            def paint(u, lab):
                base, bits, old = split_label(lab)
                return make_label(base, bits, coloring.get(u, frozenset()))

            self.colored_memo[key] = self.t.relabel(paint)
        return self.colored_memo[key]


def visible_map(m, pi):
    """Partial map color -> node for the visible pebbles on the stack."""
    out = {}
    for (v, c) in pi:
        if c in m.visible_colors:
            out[c] = v
    return out


def observable_set(m, u, pi):
    b = set()
    for (v, c) in pi:
        if c in m.visible_colors and v == u:
            b.add(c)
    if pi:
        v, c = pi[-1]
        if c in m.invisible_colors and v == u:
            b.add(c)
    return frozenset(b)


def eval_guard(ctx, guard, u, gamma, top):
    """Evaluate a GuardTest at head u with visible map gamma and stack top.

    gamma: dict color -> node; top: (node, color) or None.  Memoized on
    (guard identity, u, gamma, top).
    """
    key = (id(guard), u, tuple(sorted(gamma.items(), key=repr)), top)
    if key in ctx.guard_memo:
        return ctx.guard_memo[key]
    t = ctx.t
    if guard.scope == "head":
        result = guard.dbta.accepts(tmark(t, [u]))
    elif guard.scope in ("visible", "observable"):
        colors = {}
        for c, v in gamma.items():
            colors.setdefault(v, set()).add(c)
        if guard.scope == "observable" and top is not None:
            v, c = top
            if c in ctx.m.invisible_colors:
                colors.setdefault(v, set()).add(c)
        coloring = frozenset(
            (v, frozenset(cs)) for v, cs in colors.items()
        )
        painted = ctx.colored_tree(dict(coloring))
        result = guard.dbta.accepts(tmark(painted, [u]))
    elif guard.scope == "marks":
        nodes = []
        ok = True
        for source in guard.sources:
            if source[0] == "head":
                nodes.append(u)
            elif source[0] == "top":
                if top is None:
                    ok = False
                    break
                nodes.append(top[0])
            else:  # ("vis", color)
                if source[1] not in gamma:
                    ok = False
                    break
                nodes.append(gamma[source[1]])
        result = ok and guard.dbta.accepts(tmark(t, nodes))
    else:
        raise ValueError("bad guard scope %r" % guard.scope)
    ctx.guard_memo[key] = result
    return result


def _relevant(ctx, rule, u, b, gamma, top):
    """Relevance: label, child number, observable set, stack test, guard.

    gamma is the visible map, top the topmost (node, color) pair or None.
    """
    t = ctx.t
    if rule.label != t.label(u) or rule.childno != t.childno[u]:
        return False
    if rule.pebbles != b:
        return False
    if rule.stack_top is not None:
        if rule.stack_top == EMPTY_STACK:
            if top is not None:
                return False
        elif top is None or top[1] != rule.stack_top:
            return False
    if rule.guard is not None:
        name, negated = rule.guard
        if eval_guard(ctx, ctx.m.guards[name], u, gamma, top) == negated:
            return False
    return True


def rule_reads_ok(ctx, rule, u, pi):
    m = ctx.m
    return _relevant(
        ctx, rule, u, observable_set(m, u, pi), visible_map(m, pi),
        pi[-1] if pi else None,
    )


def apply_atoms(ctx, u, pi, atoms):
    """Execute an instruction sequence; None when inapplicable."""
    m, t = ctx.m, ctx.t
    for atom in atoms:
        op = atom[0]
        if op == "stay":
            continue
        if op == "up":
            p = t.parent[u]
            if p is None:
                return None
            u = p
        elif op == "down":
            v = t.child(u, atom[1])
            if v is None:
                return None
            u = v
        elif op == "drop":
            c = atom[1]
            if c in m.visible_colors:
                seen = [cc for (_v, cc) in pi if cc in m.visible_colors]
                if c in seen or len(seen) >= m.k:
                    return None
            pi = pi + ((u, c),)
        elif op == "lift":
            c = atom[1]
            if not pi:
                return None
            v, cc = pi[-1]
            if cc != c:
                return None
            if v != u:
                strong = (m.strong_visible and c in m.visible_colors) or (
                    m.strong_invisible and c in m.invisible_colors
                )
                if not strong:
                    return None
            pi = pi[:-1]
        else:
            raise ValueError("engine got unexpanded atom %r" % (atom,))
    return u, pi


def config_moves(ctx, q, u, pi):
    """All one-step successors of a configuration via move rules."""
    out = []
    t = ctx.t
    for rule in ctx.m.rules_at(q, t.label(u), t.childno[u]):
        if rule.rhs[0] != "move":
            continue
        if not rule_reads_ok(ctx, rule, u, pi):
            continue
        hit = apply_atoms(ctx, u, pi, rule.rhs[2])
        if hit is not None:
            out.append((rule.rhs[1], hit[0], hit[1]))
    return out


def config_outputs(ctx, q, u, pi):
    """Applicable output rules at a configuration."""
    out = []
    t = ctx.t
    for rule in ctx.m.rules_at(q, t.label(u), t.childno[u]):
        if rule.rhs[0] == "move":
            continue
        if rule_reads_ok(ctx, rule, u, pi):
            out.append(rule.rhs)
    return out


# ---------------------------------------------------------------------------
# brute-force stepping over output forms


def initial_forms(m, t):
    return [("cfg", q0, t.roots[0] if t.roots else 0, ())
            for q0 in sorted(m.initial, key=repr)]


def _form_leaves(form, path=()):
    """Yield (path, cfg) for every configuration leaf of an output form."""
    if isinstance(form, tuple) and form and form[0] == "cfg":
        yield path, form
        return
    if isinstance(form, tuple) and form and form[0] == "node":
        for i, child in enumerate(form[2]):
            yield from _form_leaves(child, path + (i,))
        return
    # a pft output form is a tuple of trees
    for i, item in enumerate(form):
        yield from _form_leaves(item, path + (i,))


def _splice(form, path, repl, forest_level):
    """Replace the subform at path; repl is a list for forest splices."""
    if not path:
        return repl[0] if not forest_level else tuple(repl)
    if isinstance(form, tuple) and form and form[0] == "node":
        kids = list(form[2])
        if len(path) == 1 and forest_level:
            kids[path[0]: path[0] + 1] = repl
        else:
            kids[path[0]] = _splice(kids[path[0]], path[1:], repl,
                                    forest_level)
        return ("node", form[1], tuple(kids))
    items = list(form)
    if len(path) == 1 and forest_level:
        items[path[0]: path[0] + 1] = repl
    else:
        items[path[0]] = _splice(items[path[0]], path[1:], repl, forest_level)
    return tuple(items)


def step(m, t, form, ctx=None):
    """All one-step successors of an output form (ptt: tree form; pft:
    forest form, i.e. a tuple of trees)."""
    ctx = ctx or EvalContext(m, t)
    is_forest = m.kind == "pft"
    out = []
    for path, (_tag, q, u, pi) in _form_leaves(form):
        for (q2, u2, pi2) in config_moves(ctx, q, u, pi):
            out.append(_splice(form, path, [("cfg", q2, u2, pi2)], is_forest))
        for rhs in config_outputs(ctx, q, u, pi):
            if rhs[0] == "output":
                repl = [("node", rhs[1],
                         tuple(("cfg", b, u, pi) for b in rhs[2]))]
            elif rhs[0] == "fnode":
                repl = [("node", rhs[1], (("cfg", rhs[2], u, pi),))]
            elif rhs[0] == "fconcat":
                repl = [("cfg", rhs[1], u, pi), ("cfg", rhs[2], u, pi)]
            else:  # fempty
                repl = []
            out.append(_splice(form, path, repl, is_forest))
    return out


def _pure(form):
    if isinstance(form, tuple) and form and form[0] == "cfg":
        return False
    if isinstance(form, tuple) and form and form[0] == "node":
        return all(_pure(c) for c in form[2])
    return all(_pure(c) for c in form)


def _to_term(m, form):
    def nested(f):
        return (f[1], [nested(c) for c in f[2]])

    if m.kind == "pft":
        return Forest.from_nested([nested(x) for x in form])
    return RankedTree.from_nested([nested(form)])


def enumerate_outputs(m, t, caps=None):
    """All outputs reachable within caps, with a completeness flag.

    Works per configuration: distinct configuration leaves of an output form
    never interact, so out(c) is the least fixpoint of the rule system and
    the full output set is assembled compositionally.
    """
    caps = caps or Caps()
    ctx = EvalContext(m, t)
    is_forest = m.kind == "pft"
    complete = True

    if len(t) == 0:
        raise ValueError("machines run on trees, not empty forests")

    out = {}
    succs = {}
    discovered = []

    def discover(cfg):
        if cfg in out:
            return
        out[cfg] = set()
        discovered.append(cfg)
        q, u, pi = cfg
        if len(pi) > caps.stack_depth:
            nonlocal complete
            complete = False
            succs[cfg] = []
            return
        entries = []
        for nxt in config_moves(ctx, q, u, pi):
            entries.append(("move", nxt))
        for rhs in config_outputs(ctx, q, u, pi):
            entries.append((rhs[0], rhs, u, pi))
        succs[cfg] = entries

    initial = [(q0, t.roots[0], ()) for q0 in sorted(m.initial, key=repr)]
    for cfg in initial:
        discover(cfg)

    steps = 0
    changed = True
    while changed:
        changed = False
        idx = 0
        while idx < len(discovered):
            cfg = discovered[idx]
            idx += 1
            current = out[cfg]
            if len(current) > caps.outputs:
                complete = False
                continue
            adds = set()
            for entry in succs[cfg]:
                steps += 1
                if steps > caps.steps:
                    complete = False
                    break
                kind = entry[0]
                if kind == "move":
                    discover(entry[1])
                    adds |= out[entry[1]]
                elif kind == "output":
                    _o, rhs, u, pi = entry
                    branch = [(b, u, pi) for b in rhs[2]]
                    for c in branch:
                        discover(c)
                    for combo in itertools.product(
                        *(sorted(out[c]) for c in branch)
                    ):
                        adds.add(("node", rhs[1], tuple(combo)))
                elif kind == "fnode":
                    _o, rhs, u, pi = entry
                    c = (rhs[2], u, pi)
                    discover(c)
                    for f in out[c]:
                        adds.add((("node", rhs[1], f),))
                elif kind == "fconcat":
                    _o, rhs, u, pi = entry
                    c1, c2 = (rhs[1], u, pi), (rhs[2], u, pi)
                    discover(c1)
                    discover(c2)
                    for f1 in out[c1]:
                        for f2 in out[c2]:
                            adds.add(f1 + f2)
                else:  # fempty
                    adds.add(())
            if steps > caps.steps:
                break
            new = adds - current
            if new:
                if len(current) + len(new) > caps.outputs:
                    complete = False
                    new = set(sorted(new)[: caps.outputs - len(current)])
                current |= new
                if new:
                    changed = True
        if steps > caps.steps:
            complete = False
            break

    results = set()
    for cfg in initial:
        for value in out[cfg]:
            if is_forest:
                results.add(_to_term(m, value))
            else:
                results.add(_to_term(m, value))
    return results, complete


# ---------------------------------------------------------------------------
# pushdown saturation (post*)


def _abstract_obs(m, u, gamma, top):
    b = {c for c, v in gamma.items() if v == u}
    if top is not None and top != BOTTOM:
        v, c = top
        if c in m.invisible_colors and v == u:
            b.add(c)
    return frozenset(b)


def _pds_moves(ctx, control, top):
    """PDS successor rules at (control, stack top symbol).

    control = (state, node, frozen visible map); top is a (node, color)
    pair or BOTTOM.  Yields (kind, control', symbol') with kind one of
    "state", "push", "pop", "replace".
    """
    m, t = ctx.m, ctx.t
    q, u, gamma_f = control
    gamma = dict(gamma_f)
    real_top = None if top == BOTTOM else top
    b = _abstract_obs(m, u, gamma, top)
    for rule in m.rules_at(q, t.label(u), t.childno[u]):
        if rule.rhs[0] != "move":
            continue
        if not _relevant(ctx, rule, u, b, gamma, real_top):
            continue
        q2 = rule.rhs[1]
        u2 = u
        g2 = dict(gamma)
        pushed = None
        popped = False
        ok = True
        for atom in rule.rhs[2]:
            op = atom[0]
            if op == "stay":
                continue
            if op == "up":
                par = t.parent[u2]
                if par is None:
                    ok = False
                    break
                u2 = par
            elif op == "down":
                v = t.child(u2, atom[1])
                if v is None:
                    ok = False
                    break
                u2 = v
            elif op == "drop":
                c = atom[1]
                if pushed is not None:
                    ok = False  # at most one stack action per rule
                    break
                if c in m.visible_colors:
                    if c in g2 or len(g2) >= m.k:
                        ok = False
                        break
                    g2[c] = u2
                pushed = (u2, c)
            elif op == "lift":
                c = atom[1]
                if popped or pushed is not None or real_top is None:
                    ok = False
                    break
                v, cc = real_top
                if cc != c:
                    ok = False
                    break
                if v != u2 and not (
                    m.strong_visible and c in m.visible_colors
                ):
                    ok = False
                    break
                if c in m.visible_colors:
                    g2.pop(c, None)
                popped = True
            else:
                raise ValueError("engine got unexpanded atom %r" % (atom,))
        if not ok:
            continue
        c2 = (q2, u2, frozenset(g2.items()))
        if popped and pushed is not None:
            yield ("replace", c2, pushed)
        elif popped:
            yield ("pop", c2, None)
        elif pushed is not None:
            yield ("push", c2, pushed)
        else:
            yield ("state", c2, None)


class Saturator:
    """post* of a pushdown system over the machine's stepping relation.

    The reachable configuration set is represented by a finite automaton:
    transitions (p, X, q) where p is a control or auxiliary state and
    stack words are read top-first ending at FINAL.
    """

    def __init__(self, ctx):
        self.ctx = ctx
        if ctx.m.strong_invisible:
            raise ValueError(
                "saturation cannot summarize strong invisible pebbles")
        self.rel = set()
        self.by_source = {}
        self.eps_by_target = {}
        self.epsrel = set()
        self.work = []
        self.controls_seen = set()

    def add_initial_config(self, control, stack):
        """Initial configuration with a concrete stack (bottom excluded)."""
        word = [BOTTOM] + list(stack)  # bottom-first
        src = control
        for depth in range(len(word) - 1, -1, -1):
            dst = FINAL if depth == 0 else ("init", tuple(word[:depth]))
            self._push(src, word[depth], dst)
            src = dst

    def _push(self, p, x, q):
        t = (p, x, q)
        if t not in self.rel and t not in self.work:
            self.work.append(t)

    def _add_eps(self, p, q):
        if (p, q) in self.epsrel:
            return
        self.epsrel.add((p, q))
        self.eps_by_target.setdefault(q, set()).add(p)
        for (y, r) in self.by_source.get(q, ()):
            self._push(p, y, r)

    def saturate(self):
        ctx = self.ctx
        while self.work:
            p, x, q = self.work.pop()
            if (p, x, q) in self.rel:
                continue
            self.rel.add((p, x, q))
            self.by_source.setdefault(p, set()).add((x, q))
            for pred in self.eps_by_target.get(p, ()):
                self._push(pred, x, q)
            if isinstance(p, tuple) and len(p) == 3 and not (
                p and p[0] in ("aux", "init")
            ):
                # p is a control state: expand PDS rules on (p, x)
                self.controls_seen.add(p)
                for kind, c2, sym in _pds_moves(ctx, p, x):
                    if kind == "state":
                        self._push(c2, x, q)
                    elif kind == "replace":
                        self._push(c2, sym, q)
                    elif kind == "pop":
                        self._add_eps(c2, q)
                    else:  # push
                        s = ("aux", c2, sym)
                        self._push(c2, sym, s)
                        self._push(s, x, q)
        return self

    def reachable_controls(self):
        out = set()
        for (p, _x, _q) in self.rel:
            if isinstance(p, tuple) and len(p) == 3 and p[0] not in (
                "aux", "init"
            ):
                out.add(p)
        for (p, _q) in self.epsrel:
            out.add(p)
        return out

    def stacks_from(self, control, max_len):
        """Accepted stacks of length <= max_len at a control (top first)."""
        out = []

        def walk(state, acc):
            if len(acc) > max_len + 1:
                return
            if state == FINAL:
                if acc and acc[-1] == BOTTOM:
                    out.append(tuple(reversed(acc[:-1])))
                return
            for (y, r) in self.by_source.get(state, ()):
                walk(r, acc + [y])
            # epsilon pairs never start mid-path; nothing else to do

        walk(control, [])
        return out

    def has_long_stack(self, control, first, min_len):
        """Is there an accepted stack from control, starting with symbol
        `first`, of length > min_len (bottom excluded)?"""
        # lengths saturate at min_len + 1
        cap = min_len + 1
        memo = {}

        def lengths(state):
            if state in memo:
                return memo[state]
            memo[state] = set()
            result = set()
            stack = [(state, 0)]
            seen = set()
            while stack:
                s, d = stack.pop()
                d = min(d, cap + 1)
                if (s, d) in seen:
                    continue
                seen.add((s, d))
                if s == FINAL:
                    result.add(d)
                    continue
                for (y, r) in self.by_source.get(s, ()):
                    bump = 0 if y == BOTTOM else 1
                    stack.append((r, min(d + bump, cap + 1)))
            memo[state] = result
            return result

        for (y, r) in self.by_source.get(control, ()):
            if y != first:
                continue
            for length in lengths(r):
                if length + 1 > min_len:
                    return True
        return False


def saturate_from(ctx, control, stack=()):
    sat = Saturator(ctx)
    sat.add_initial_config(control, tuple(stack))
    return sat.saturate()


def _initial_control(m, q0, u):
    return (q0, u, frozenset())


def accepts(m, t):
    """PTA acceptance via forward saturation from the initial config."""
    if m.kind != "pta":
        raise ValueError("accepts runs pta machines")
    ctx = EvalContext(m, t)
    sat = Saturator(ctx)
    for q0 in m.initial:
        sat.add_initial_config(_initial_control(m, q0, t.roots[0]), ())
    sat.saturate()
    return any(p[0] in m.final for p in sat.reachable_controls())


def trips(m, t):
    """All (u, v) pairs with a computation from <q0,u,empty> to a final
    configuration at v."""
    if m.kind != "pta":
        raise ValueError("trips runs pta machines")
    ctx = EvalContext(m, t)
    out = set()
    for u in t.nodes():
        sat = Saturator(ctx)
        for q0 in m.initial:
            sat.add_initial_config(_initial_control(m, q0, u), ())
        sat.saturate()
        for (q, v, _g) in sat.reachable_controls():
            if q in m.final:
                out.add((u, v))
    return out


def brute_accepts(m, t, caps=None):
    """Acceptance by explicit configuration search (supports strong
    invisible pebbles); returns (accepted, complete)."""
    caps = caps or Caps()
    ctx = EvalContext(m, t)
    seen = set()
    work = [(q0, t.roots[0], ()) for q0 in m.initial]
    complete = True
    steps = 0
    while work:
        cfg = work.pop()
        if cfg in seen:
            continue
        seen.add(cfg)
        q, u, pi = cfg
        if q in m.final:
            return True, complete
        if len(pi) >= caps.stack_depth:
            complete = False
            continue
        steps += 1
        if steps > caps.steps:
            return False, False
        work.extend(config_moves(ctx, q, u, pi))
    return False, complete


def final_configurations(m, t, caps=None):
    """Reachable final configurations by explicit search (test helper)."""
    caps = caps or Caps()
    ctx = EvalContext(m, t)
    seen = set()
    finals = set()
    work = [(q0, t.roots[0], ()) for q0 in m.initial]
    steps = 0
    while work:
        cfg = work.pop()
        if cfg in seen:
            continue
        seen.add(cfg)
        q, u, pi = cfg
        if q in m.final:
            finals.add(cfg)
            continue
        steps += 1
        if steps > caps.steps or len(pi) >= caps.stack_depth:
            raise EnumerationIncomplete()
        work.extend(config_moves(ctx, q, u, pi))
    return finals


def expocom_bound(m, t):
    """Stack bound N for a deterministic machine's successful run."""
    n = max(1, len(t))
    return (
        len(m.states)
        * (len(m.colors) + 1) ** (m.k + 1)
        * n ** (m.k + 2)
    )


def _grammar_from_sources(m, t, ctx, outreach):
    """Build the output grammar given a per-source OUTREACH oracle.

    outreach(cfg) yields (rhs, u', pi') pairs: output rules applicable at
    configurations reachable from cfg by move steps.
    """
    sources = [(q0, t.roots[0], ()) for q0 in sorted(m.initial, key=repr)]
    rules = []
    seen = set(sources)
    work = list(sources)
    eps_nt = ("eps",)
    need_eps = False
    while work:
        cfg = work.pop()
        for rhs, u2, pi2 in outreach(cfg):
            if rhs[0] == "output":
                branches = tuple((b, u2, pi2) for b in rhs[2])
                rules.append((cfg, rhs[1], branches))
            elif rhs[0] == "fnode":
                branch = (rhs[2], u2, pi2)
                rules.append(("node", cfg, rhs[1], branch, eps_nt))
                need_eps = True
                branches = (branch,)
            elif rhs[0] == "fconcat":
                b1, b2 = (rhs[1], u2, pi2), (rhs[2], u2, pi2)
                rules.append(("cat", cfg, b1, b2))
                branches = (b1, b2)
            else:
                rules.append(("eps", cfg))
                branches = ()
            for b in branches:
                if b not in seen:
                    seen.add(b)
                    work.append(b)

    start = ("start",)
    if m.kind == "pft":
        cfg_rules = list(rules)
        if need_eps:
            cfg_rules.append(("eps", eps_nt))
        for cfg in sources:
            cfg_rules.append(("cat", start, cfg, eps_nt))
            need_eps = True
        if need_eps and ("eps", eps_nt) not in cfg_rules:
            cfg_rules.append(("eps", eps_nt))
        nts = {start, eps_nt} | seen
        return ForestCfg(frozenset(nts), start, tuple(cfg_rules))
    # ptt: regular tree grammar
    g_rules = []
    for (lhs, label, branches) in rules:
        g_rules.append((lhs, label, branches))
    for cfg in sources:
        for (lhs, label, branches) in list(g_rules):
            if lhs == cfg:
                g_rules.append((start, label, branches))
    nts = {start} | seen
    return Rtg(m.output_alphabet, frozenset(nts), start, tuple(g_rules))


class BoundednessViolation(Exception):
    """An output rule fires above the declared stack bound."""


def run_deterministic(m, t):
    """Output grammar of a deterministic machine on t (singleton or empty).

    Grammar nonterminals are configurations; every one reachable in the
    grammar keeps its stack below the expocom bound N.
    """
    from .machines import is_deterministic

    if not is_deterministic(m):
        raise ValueError("run_deterministic requires a deterministic machine")
    ctx = EvalContext(m, t)
    bound = expocom_bound(m, t)

    def outreach(cfg):
        q, u, pi = cfg
        seen = {(q, u, pi)}
        while True:
            outs = config_outputs(ctx, q, u, pi)
            if outs:
                return [(outs[0], u, pi)]
            moves = config_moves(ctx, q, u, pi)
            if not moves:
                return []
            q, u, pi = moves[0]
            if (q, u, pi) in seen or len(pi) > bound:
                return []
            seen.add((q, u, pi))

    return _grammar_from_sources(m, t, ctx, outreach)


def run_bounded(m, t, bound):
    """Output grammar of a (possibly nondeterministic) bounded machine.

    Reachability between configurations goes through post* saturation, so
    intermediate stacks of any depth are summarized; output rules must only
    fire at stack depth <= bound (BoundednessViolation otherwise).
    """
    ctx = EvalContext(m, t)

    def outreach(cfg):
        q, u, pi = cfg
        control = (q, u, frozenset(visible_map(m, pi).items()))
        sat = saturate_from(ctx, control, pi)
        result = []
        for ctl in sorted(sat.reachable_controls(), key=repr):
            q2, u2, g2 = ctl
            gamma = dict(g2)
            stacks = sorted(set(sat.stacks_from(ctl, bound)))
            tops_seen = set()
            for stack in stacks:
                top = stack[-1] if stack else None
                b = _abstract_obs(m, u2, gamma, top if top else BOTTOM)
                for rule in m.rules_at(q2, t.label(u2), t.childno[u2]):
                    if rule.rhs[0] == "move":
                        continue
                    if _relevant(ctx, rule, u2, b, gamma, top):
                        result.append((rule.rhs, u2, stack))
                if top is not None:
                    tops_seen.add(top)
            # boundedness check: an applicable output rule on a deeper stack
            for (x, _r) in sat.by_source.get(ctl, ()):
                if x == BOTTOM:
                    continue
                b = _abstract_obs(m, u2, gamma, x)
                for rule in m.rules_at(q2, t.label(u2), t.childno[u2]):
                    if rule.rhs[0] == "move":
                        continue
                    if _relevant(ctx, rule, u2, b, gamma, x) and \
                            sat.has_long_stack(ctl, x, bound):
                        raise BoundednessViolation(
                            "output rule fires above depth %d" % bound)
        return result

    return _grammar_from_sources(m, t, ctx, outreach)


def run_to_term(m, t, size_cap=10 ** 6):
    """Run a deterministic machine and expand the grammar; None when t is
    outside the domain."""
    from .regular import (
        GrammarEmpty,
        cfg_expand_singleton,
        rtg_expand_singleton,
    )

    g = run_deterministic(m, t)
    try:
        if m.kind == "pft":
            return cfg_expand_singleton(g, size_cap)
        return rtg_expand_singleton(g, size_cap)
    except GrammarEmpty:
        return None
