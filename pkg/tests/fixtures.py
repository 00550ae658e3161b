"""Machines used across the test suite: the Trans-Siberian itinerary
transducer, the double-exponential forest transducer, identity machines,
and small builders."""

import itertools

from pebbletree.machines import Machine, Rule
from pebbletree.terms import RankedAlphabet, UnrankedAlphabet, parse_term

# Table 1 input: intermediate stops small, small, large, small
SIB_STOPS = [
    ("moscow", 1),   # initial stop; treated as large
    ("stop2", 0),
    ("stop3", 0),
    ("stop4", 1),    # LargeStop 4
    ("stop5", 0),
    ("vlad", None),  # final stop, rank 0
]

SIB_INPUT = "moscow(stop2(stop3(stop4(stop5(vlad)))))"

SIB_ITINERARIES = [
    ["moscow", "stop3", "stop4", "stop5"],
    ["moscow", "stop2", "stop4", "stop5"],
    ["moscow", "stop4", "stop5"],
    ["moscow", "stop5"],
    ["moscow", "stop3", "stop4"],
    ["moscow", "stop2", "stop4"],
    ["moscow", "stop4"],
    ["moscow", "stop3"],
    ["moscow", "stop2"],
    ["moscow"],
]


def sib_expected_output():
    term = "e"
    for stops in reversed(SIB_ITINERARIES):
        chain = "vlad"
        for stop in reversed(stops):
            chain = "%s(%s)" % (stop, chain)
        term = "r(%s,%s)" % (chain, term)
    return parse_term(term)


class MB:
    """Small machine builder with output-branch desugaring."""

    def __init__(self, kind, input_alphabet, output_alphabet=None, k=0,
                 visible=(), invisible=(), name=""):
        self.kind = kind
        self.ia = input_alphabet
        self.oa = output_alphabet
        self.k = k
        self.visible = set(visible)
        self.invisible = set(invisible)
        self.name = name
        self.rules = []
        self.states = set()
        self.initial = set()
        self.final = set()
        self.guards = {}
        self._fresh = itertools.count()

    def state(self, *qs, initial=False, final=False):
        for q in qs:
            self.states.add(q)
            if initial:
                self.initial.add(q)
            if final:
                self.final.add(q)

    def move(self, q, label, j, b, q2, *atoms, stack_top=None, guard=None):
        self.state(q, q2)
        self.rules.append(Rule(q, label, j, frozenset(b),
                               ("move", q2, tuple(atoms)), stack_top, guard))

    def _branch(self, entry, label, j, b):
        # the branch keeps the host rule's situation, so its desugared rule
        # reads the same observable set
        if isinstance(entry, tuple) and entry and isinstance(entry[0], str) \
                and entry[0] == "br":
            _tag, q2, atoms = entry
            fresh = "_b%d" % next(self._fresh)
            self.state(fresh, q2)
            self.rules.append(Rule(fresh, label, j, frozenset(b),
                                   ("move", q2, tuple(atoms))))
            return fresh
        self.state(entry)
        return entry

    def out(self, q, label, j, b, out_label, branches, stack_top=None,
            guard=None):
        self.state(q)
        bs = tuple(self._branch(x, label, j, b) for x in branches)
        self.rules.append(Rule(q, label, j, frozenset(b),
                               ("output", out_label, bs), stack_top, guard))

    def fnode(self, q, label, j, b, out_label, q2):
        self.state(q, q2)
        self.rules.append(Rule(q, label, j, frozenset(b),
                               ("fnode", out_label, q2)))

    def fconcat(self, q, label, j, b, e1, e2):
        self.state(q)
        b1 = self._branch(e1, label, j, b)
        b2 = self._branch(e2, label, j, b)
        self.rules.append(Rule(q, label, j, frozenset(b),
                               ("fconcat", b1, b2)))

    def fempty(self, q, label, j, b):
        self.state(q)
        self.rules.append(Rule(q, label, j, frozenset(b), ("fempty",)))

    def build(self, strong_visible=False, strong_invisible=False):
        return Machine(
            self.kind, self.ia, self.oa, self.states, self.initial,
            self.rules, final=self.final, visible_colors=self.visible,
            invisible_colors=self.invisible, k=self.k, guards=self.guards,
            strong_visible=strong_visible, strong_invisible=strong_invisible,
            name=self.name,
        )


def br(state, *atoms):
    """Output-branch shortcut <state, instruction>."""
    return ("br", state, tuple(atoms))


def build_msib(stops=SIB_STOPS):
    """The Trans-Siberian itinerary i-ptt."""
    sigma = {}
    large = {}
    for (label, is_large) in stops:
        sigma[label] = 0 if is_large is None else 1
        large[label] = is_large
    ia = RankedAlphabet(sigma)
    oa = RankedAlphabet(dict(sigma, r=2, e=0))
    mb = MB("ptt", ia, oa, invisible=["p0", "p1"], name="M_sib")
    mb.state("qstart", initial=True)
    rank1 = [s for s, r in sigma.items() if r == 1]
    rank0 = [s for s, r in sigma.items() if r == 0]
    for s1 in rank1:
        for j in (0, 1):
            mb.move("qstart", s1, j, (), "qstart", ("down", 1))
    for s0 in rank0:
        mb.move("qstart", s0, 1, (), "q1", ("up",))
    for lam in rank1:
        for c in (0, 1):
            if large[lam] == 0 and c == 0:
                # small city after a small city: skip
                mb.move("q0", lam, 1, (), "q0", ("up",))
            else:
                mb.move("q%d" % c, lam, 1, (), "q%d" % large[lam],
                        ("drop", "p%d" % c), ("up",))
        for c in (0, 1):
            mb.out("q%d" % c, lam, 0, (), "r",
                   ["qout", br("qnext", ("down", 1))])
        mb.out("qout", lam, 0, (), lam, [br("qout", ("down", 1))])
        mb.move("qout", lam, 1, (), "qout", ("down", 1))
        for c in (0, 1):
            mb.out("qout", lam, 1, ["p%d" % c], lam,
                   [br("qout", ("lift", "p%d" % c), ("down", 1))])
        mb.move("qnext", lam, 1, (), "qnext", ("down", 1))
        for c in (0, 1):
            mb.move("qnext", lam, 1, ["p%d" % c], "q%d" % c,
                    ("lift", "p%d" % c), ("up",))
    for s0 in rank0:
        mb.out("qout", s0, 1, (), s0, [])
        mb.out("qnext", s0, 1, (), "e", [])
    return mb.build()


def build_m2exp():
    """The double-exponential forest transducer (all cities large)."""
    ia = RankedAlphabet({"s": 1, "z": 0})
    oa = UnrankedAlphabet(frozenset(["e"]))
    mb = MB("pft", ia, oa, invisible=["c"], name="M_2exp")
    mb.state("qstart", initial=True)
    for j in (0, 1):
        mb.move("qstart", "s", j, (), "qstart", ("down", 1))
    mb.move("qstart", "z", 1, (), "q1", ("up",))
    mb.move("q1", "s", 1, (), "q1", ("drop", "c"), ("up",))
    mb.fconcat("q1", "s", 0, (), br("qnext", ("down", 1)),
               br("qnext", ("down", 1)))
    mb.move("qnext", "s", 1, (), "qnext", ("down", 1))
    mb.move("qnext", "s", 1, ["c"], "q1", ("lift", "c"), ("up",))
    mb.fnode("qnext", "z", 1, (), "e", "halt")
    mb.fempty("halt", "z", 1, ())
    return mb.build()


def m2exp_input(n):
    term = "z"
    for _ in range(n + 1):
        term = "s(%s)" % term
    return parse_term(term)


def identity_tt(alphabet):
    """Pebble-free transducer copying its input."""
    mb = MB("ptt", alphabet, alphabet, name="id")
    mb.state("q", initial=True)
    for label, rank in alphabet.symbols.items():
        for j in range(alphabet.max_rank + 1):
            mb.out("q", label, j, (), label,
                   [br("q", ("down", i + 1)) for i in range(rank)])
    return mb.build()


def anbn_strong_machine():
    """The a^n#b^n acceptor with strong invisible pebbles (brute engine
    only)."""
    ia = RankedAlphabet({"a": 1, "h": 1, "b": 1, "z": 0})
    mb = MB("pta", ia, None, invisible=["c"], name="anbn")
    mb.state("w1", initial=True)
    mb.state("acc", final=True)
    for j in (0, 1):
        mb.move("w1", "a", j, (), "w1", ("down", 1))
    mb.move("w1", "h", 1, (), "w2", ("drop", "c"), ("up",))
    mb.move("w1", "h", 0, (), "w3", ("drop", "c"))
    mb.move("w2", "a", 1, (), "w2", ("drop", "c"), ("up",))
    mb.move("w2", "a", 0, (), "w3", ("drop", "c"))
    for lab in ("a", "h", "b"):
        for j in (0, 1):
            for b in ((), ("c",)):
                mb.move("w3", lab, j, b, "w3", ("down", 1))
    mb.move("w3", "z", 1, (), "w4", ("up",))
    mb.move("w4", "b", 1, (), "w4", ("lift", "c"), ("up",))
    mb.move("w4", "h", 1, ("c",), "acc", ("stay",))
    mb.move("w4", "h", 0, ("c",), "acc", ("stay",))
    return mb.build(strong_invisible=True)


def anbn_input(n, m):
    term = "z"
    for _ in range(m):
        term = "b(%s)" % term
    term = "h(%s)" % term
    for _ in range(n):
        term = "a(%s)" % term
    return parse_term(term)
