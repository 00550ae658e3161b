"""Shared test helpers: random generators and exhaustive enumerators."""

import itertools
import random

from pebbletree.terms import Forest, RankedAlphabet, RankedTree

SIG2 = RankedAlphabet({"sig": 2, "a": 0, "b": 0})
SIG3 = RankedAlphabet({"sig": 2, "tau": 1, "a": 0, "b": 0})


def random_tree(rng, alphabet, max_nodes):
    """Random ranked tree with at most max_nodes nodes (best effort)."""
    nullary = [s for s, r in alphabet.symbols.items() if r == 0]
    rest = [s for s, r in alphabet.symbols.items() if r > 0]

    def grow(budget):
        # budget is the remaining node allowance for this subtree
        if budget <= 1 or not rest or rng.random() < 0.3:
            return (rng.choice(nullary), []), 1
        sym = rng.choice(rest)
        m = alphabet.rank(sym)
        used = 1
        children = []
        for i in range(m):
            share = max(1, (budget - used) // (m - i))
            child, n = grow(share)
            children.append(child)
            used += n
        return (sym, children), used

    nested, _ = grow(max_nodes)
    return RankedTree.from_nested([nested])


def random_forest(rng, labels, max_nodes, allow_empty=True):
    """Random unranked forest over the given label list."""
    budget = rng.randint(0 if allow_empty else 1, max_nodes)

    def grow(n):
        # returns (list of nested trees, nodes used)
        trees, used = [], 0
        while used < n:
            width = rng.randint(1, n - used)
            kids, k = grow((width - 1) if width > 1 else 0)
            trees.append((rng.choice(labels), kids))
            used += 1 + k
            if rng.random() < 0.4:
                break
        return trees, used

    trees, _ = grow(budget)
    return Forest.from_nested(trees)


def all_trees(alphabet, max_nodes):
    """Every ranked tree over the alphabet with at most max_nodes nodes."""
    by_size = {0: []}

    def trees_of(n):
        if n in by_size:
            return by_size[n]
        out = []
        for sym, rank in sorted(alphabet.symbols.items()):
            if rank == 0:
                if n == 1:
                    out.append((sym, []))
                continue
            if n < rank + 1:
                continue
            for split in compositions(n - 1, rank):
                for kids in itertools.product(
                    *(trees_of(k) for k in split)
                ):
                    out.append((sym, list(kids)))
        by_size[n] = out
        return out

    result = []
    for n in range(1, max_nodes + 1):
        result.extend(RankedTree.from_nested([t]) for t in trees_of(n))
    return result


def compositions(total, parts):
    """All ways to write total as an ordered sum of `parts` positive ints."""
    if parts == 1:
        yield (total,)
        return
    for first in range(1, total - parts + 2):
        for rest in compositions(total - first, parts - 1):
            yield (first,) + rest


def seeded(seed=0):
    return random.Random(seed)
