import json

import pytest

from pebbletree.execution import (
    accepts,
    brute_accepts,
    enumerate_outputs,
    run_to_term,
    trips,
)
from pebbletree.machines import (
    Machine,
    Rule,
    dbta_to_ipta,
    eliminate_stack_tests,
    expand_search,
    is_deterministic,
    is_normal_form,
    machine_from_json,
    machine_to_json,
    normal_form,
    split_compound,
    validate,
)
from pebbletree.regular import Dbta, determinize
from pebbletree.terms import RankedAlphabet, parse_term, render
from fixtures import MB, br, build_msib, sib_expected_output, SIB_INPUT
from util import SIG2, SIG3, all_trees, random_tree, seeded
from test_regular import dbta_all, dbta_even_a_leaves, nbta_some_a_leaf


def test_validate_color_overlap():
    mb = MB("pta", SIG2, None, k=1, visible=["c"], invisible=["c"])
    mb.state("q", initial=True)
    report = validate(mb.build())
    assert any("overlap" in line for line in report)


def test_validate_undeclared_drop():
    mb = MB("pta", SIG2, None)
    mb.state("q", initial=True)
    mb.move("q", "a", 0, (), "q", ("drop", "nope"))
    report = validate(mb.build())
    assert any("undeclared color" in line for line in report)


def test_wildcard_childno_expansion():
    mb = MB("pta", SIG2, None)
    mb.state("q", initial=True)
    mb.move("q", "sig", None, (), "q", ("stay",))
    m = mb.build()
    assert len(m.rules) == 3  # j in {0, 1, 2}


def test_split_compound_preserves_outputs():
    m = build_msib()
    t = parse_term(SIB_INPUT)
    split = split_compound(m)
    outs1, c1 = enumerate_outputs(m, t)
    outs2, c2 = enumerate_outputs(split, t)
    assert c1 and c2 and outs1 == outs2


def test_expand_search_reaches_top_pebble():
    # drop at a leaf, wander to the root, then search for the pebble
    alpha = RankedAlphabet({"sig": 2, "tau": 1, "a": 0, "b": 0})
    mb = MB("pta", alpha, None, invisible=["c"])
    mb.state("q0", initial=True)
    mb.state("acc", final=True)
    for lab, rank in alpha.symbols.items():
        for j in range(3):
            if rank:
                mb.move("q0", lab, j, (), "q0", ("down", 1))
            elif j != 0:
                mb.move("q0", lab, j, (), "back", ("drop", "c"), ("up",))
    for lab in ("sig", "tau"):
        for j in (1, 2):
            mb.move("back", lab, j, (), "back", ("up",))
        mb.move("back", lab, 0, (), "go", ("stay",))
    for lab, rank in alpha.symbols.items():
        for j in range(3):
            for b in ((), ("c",)):
                mb.move("go", lab, j, b, "found", ("totop",))
    for lab in ("a", "b"):
        for j in range(3):
            mb.move("found", lab, j, ("c",), "acc", ("lift", "c"))
    m = expand_search(mb.build())
    assert validate(m) == []
    for t in all_trees(alpha, 5):
        # q0 walks down the leftmost path and pebbles its leaf; the search
        # must find that leaf again (single-node trees never drop)
        assert accepts(m, t) == (len(t) >= 2)


def stack_empty_at_root_pta():
    """2-state i-pta accepting a tree iff it can verify the stack is empty
    back at the root after a down-drop-up-lift excursion."""
    alpha = RankedAlphabet({"s": 1, "z": 0})
    mb = MB("pta", alpha, None, invisible=["c"])
    mb.state("q0", initial=True)
    mb.state("acc", final=True)
    mb.move("q0", "s", 0, (), "q1", ("down", 1), ("drop", "c"))
    mb.move("q1", "s", 1, ("c",), "q2", ("lift", "c"), ("up",))
    mb.move("q1", "z", 1, ("c",), "q2", ("lift", "c"), ("up",))
    # stack test: only accept with an empty stack and at the root
    mb.move("q2", "s", 0, (), "acc", ("stay",), stack_top="")
    return mb.build()


def test_eliminate_stack_tests_equivalence():
    m = stack_empty_at_root_pta()
    m2 = eliminate_stack_tests(m)
    assert validate(m2) == []
    for rule in m2.rules:
        assert rule.stack_top is None
    alpha = m.input_alphabet
    trees = [parse_term("s(" * n + "z" + ")" * n) for n in range(6)]
    for t in trees:
        a1, c1 = brute_accepts(m, t)
        a2, c2 = brute_accepts(m2, t)
        assert c1 and c2 and a1 == a2
        assert a2 == accepts(m2, t)


def test_eliminate_stack_tests_no_gamma_isomorphic():
    m = build_msib()
    m2 = eliminate_stack_tests(m)
    t = parse_term(SIB_INPUT)
    outs1, _ = enumerate_outputs(m, t)
    outs2, _ = enumerate_outputs(m2, t)
    assert outs1 == outs2
    assert is_deterministic(m2)


def test_eliminate_stack_tests_rule_count():
    m = stack_empty_at_root_pta()
    m2 = eliminate_stack_tests(m)
    m_split = split_compound(m)
    bound = len(m_split.rules) * (len(m.colors) + 1) * 2 ** (m.k + 1)
    assert len(m2.rules) <= bound


def test_dbta_to_ipta_all_accepting():
    a = dbta_all(SIG3)
    m = dbta_to_ipta(a)
    assert validate(m) == []
    assert is_deterministic(m)
    for t in all_trees(SIG3, 5):
        assert accepts(m, t)


def test_dbta_to_ipta_even_a_leaves():
    a = dbta_even_a_leaves(SIG3)
    m = dbta_to_ipta(a)
    rng = seeded(31)
    for _ in range(500):
        t = random_tree(rng, SIG3, 8)
        assert accepts(m, t) == a.accepts(t)


def test_dbta_to_ipta_leaves_pebble_on_root():
    from pebbletree.execution import final_configurations

    a = dbta_even_a_leaves(SIG3)
    m = dbta_to_ipta(a)
    for t in all_trees(SIG3, 4):
        for (q, u, pi) in final_configurations(m, t):
            assert len(pi) == 1
            assert pi[0][0] == t.roots[0]


def test_normal_form_msib():
    m = build_msib()
    nf, meta = normal_form(m)
    assert is_normal_form(nf)
    assert not is_normal_form(m)
    assert is_deterministic(nf)
    t = parse_term(SIB_INPUT)
    outs, complete = enumerate_outputs(nf, t)
    assert complete
    assert outs == {sib_expected_output()}
    assert run_to_term(nf, t) == sib_expected_output()


def random_iptt(rng, n_states=3):
    """Random small i-ptt over SIG2 with drops/lifts and outputs."""
    states = ["q%d" % i for i in range(n_states)]
    mb = MB("ptt", SIG2, SIG2, invisible=["c", "d"], name="rand")
    mb.state(states[0], initial=True)
    for q in states:
        for lab, rank in SIG2.symbols.items():
            for j in range(3):
                for b in [(), ("c",), ("d",)]:
                    roll = rng.random()
                    q2 = rng.choice(states)
                    if roll < 0.3 and rank:
                        mb.out(q, lab, j, b, lab,
                               [br(rng.choice(states), ("down", i + 1))
                                for i in range(rank)])
                    elif roll < 0.45:
                        out_lab = rng.choice(["a", "b"])
                        mb.out(q, lab, j, b, out_lab, [])
                    elif roll < 0.6 and b:
                        mb.move(q, lab, j, b, q2, ("lift", b[0]), ("up",)
                                if j else ("stay",))
                    elif roll < 0.75:
                        mb.move(q, lab, j, b, q2,
                                ("drop", rng.choice(["c", "d"])))
                    elif roll < 0.9:
                        if rank:
                            mb.move(q, lab, j, b, q2, ("down", 1))
                        elif j:
                            mb.move(q, lab, j, b, q2, ("up",))
    return mb.build()


def test_normal_form_random_machines():
    rng = seeded(32)
    trees = all_trees(SIG2, 5)
    done = 0
    while done < 5:
        m = random_iptt(rng)
        nf, _meta = normal_form(m)
        assert is_normal_form(nf)
        checked = 0
        for t in trees:
            o1, c1 = enumerate_outputs(m, t)
            o2, c2 = enumerate_outputs(nf, t)
            if not (c1 and c2):
                continue
            assert o1 == o2, render(t)
            checked += 1
        if checked >= 10:
            done += 1


def test_normal_form_direction_consistency():
    mb = MB("ptt", SIG2, SIG2, invisible=["c"])
    mb.state("q", initial=True)
    mb.move("q", "sig", 0, (), "q2", ("down", 1), ("drop", "c"))
    mb.move("q2", "a", 1, ("c",), "q3", ("lift", "c"), ("up",))
    mb.out("q3", "sig", 0, (), "a", [])
    m = mb.build()
    nf, meta = normal_form(m)
    assert is_normal_form(nf)
    # every original color got a direction
    assert all(c in meta.direction for c in m.colors)


def test_machine_json_roundtrip():
    m = build_msib()
    doc = machine_to_json(m)
    m2 = machine_from_json(json.loads(json.dumps(doc)))
    assert validate(m2) == []
    t = parse_term(SIB_INPUT)
    assert run_to_term(m2, t) == sib_expected_output()
    # dump -> load -> dump is a fixpoint
    assert machine_to_json(machine_from_json(doc)) == \
        machine_to_json(machine_from_json(machine_to_json(m2)))


def test_json_output_branch_shortcut():
    doc = {
        "kind": "ptt",
        "input_alphabet": {"s": 1, "z": 0},
        "output_alphabet": {"s": 1, "z": 0},
        "states": ["q"],
        "initial": ["q"],
        "visible_colors": [],
        "invisible_colors": [],
        "k": 0,
        "rules": [
            {"state": "q", "label": "s", "childno": None, "pebbles": [],
             "rhs": {"type": "output", "label": "s",
                     "branches": [{"state": "q", "instr": [["down", 1]]}]}},
            {"state": "q", "label": "z", "childno": None, "pebbles": [],
             "rhs": {"type": "output", "label": "z", "branches": []}},
        ],
    }
    m = machine_from_json(doc)
    assert validate(m) == []
    t = parse_term("s(s(z))")
    assert run_to_term(m, t) == t
