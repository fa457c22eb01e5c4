"""Rooted trees with harmonic labels.

A tree is stored in canonical form as a nested tuple ``(nu, children)``
where ``nu`` is the node harmonic (a tuple of ints) and ``children`` is a
tuple of subtrees in a fixed canonical order. The root line joins the
first node to the (virtual) root and carries the total current.

All traversals are iterative so that deep chains do not hit the Python
recursion limit.
"""

from __future__ import annotations

import json
import math
import os
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

from .core import FourierSeries, FrequencyVector, GaussianRational, harmonic_norm
from .errors import OrderTooLarge, PreconditionViolated, ZeroCurrentLine

__all__ = [
    "LabeledTree",
    "DEFAULT_BUDGET",
    "budget",
    "count_canonical_trees",
    "enumerate_trees",
    "line_currents",
    "kepler_tree_value",
    "lindstedt_tree_value",
    "lindstedt_tree_vector",
    "is_restricted",
    "siegel_census",
    "siegel_bound",
    "siegel_scan",
    "siegel_scan_bruteforce",
]

DEFAULT_BUDGET = 10**7


def budget(default: int = DEFAULT_BUDGET) -> int:
    """Enumeration budget, overridable by ``HAMILTONIA_BUDGET``."""
    raw = os.environ.get("HAMILTONIA_BUDGET")
    return int(float(raw)) if raw else default


def _flatten(root: tuple) -> list[tuple[tuple, int]]:
    """Preorder list of ``(nu, parent_index)``; the first node has parent -1."""
    out: list[tuple[tuple, int]] = []
    stack = [(root, -1)]
    while stack:
        node, parent = stack.pop()
        idx = len(out)
        out.append((node[0], parent))
        for child in reversed(node[1]):
            stack.append((child, idx))
    return out


def _nodes(root: tuple) -> Iterator[tuple]:
    stack = [root]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(node[1])


@dataclass(frozen=True)
class LabeledTree:
    """Canonical labeled rooted tree.

    Attributes
    ----------
    root : tuple
        Nested ``(nu, children)`` encoding of the first node.
    """

    root: tuple

    @cached_property
    def flat(self) -> list[tuple[tuple, int]]:
        return _flatten(self.root)

    @property
    def order(self) -> int:
        return len(self.flat)

    @property
    def dim(self) -> int:
        return len(self.root[0])

    @cached_property
    def symmetry(self) -> int:
        """Order of the automorphism group (identical sibling subtrees permute)."""
        s = 1
        for node in _nodes(self.root):
            for m in Counter(node[1]).values():
                s *= math.factorial(m)
        return s

    @property
    def multiplicity(self) -> int:
        """Number of line labelings represented: ``k! / |Aut|``."""
        return math.factorial(self.order) // self.symmetry

    @cached_property
    def currents(self) -> list[tuple]:
        """Current on the line above each node, in preorder."""
        flat = self.flat
        cur = [list(nu) for nu, _ in flat]
        for i in range(len(flat) - 1, 0, -1):
            p = flat[i][1]
            ci, cp = cur[i], cur[p]
            for j in range(len(cp)):
                cp[j] += ci[j]
        return [tuple(c) for c in cur]

    @property
    def root_current(self) -> tuple:
        return self.currents[0]

    def to_dict(self) -> dict:
        flat = self.flat
        dicts = [{"nu": list(nu), "children": []} for nu, _ in flat]
        for i in range(1, len(flat)):
            dicts[flat[i][1]]["children"].append(dicts[i])
        return dicts[0]

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "LabeledTree":
        # rebuild bottom-up in postorder
        order = []
        stack = [d]
        while stack:
            x = stack.pop()
            order.append(x)
            stack.extend(x["children"])
        built = {}
        for x in reversed(order):
            kids = tuple(sorted((built[id(c)] for c in x["children"]), key=repr))
            built[id(x)] = (tuple(x["nu"]), kids)
        return cls(built[id(d)])

    @classmethod
    def chain(cls, labels: Sequence[Sequence[int]]) -> "LabeledTree":
        """Chain whose first node (next to the root) carries ``labels[0]``."""
        node = None
        for nu in reversed(labels):
            node = (tuple(nu), () if node is None else (node,))
        return cls(node)


def line_currents(tree: LabeledTree) -> list[tuple]:
    """Currents on every line (preorder; entry 0 is the root line)."""
    return tree.currents


# ---------------------------------------------------------------------------
# enumeration
# ---------------------------------------------------------------------------


def count_canonical_trees(k: int, alphabet_size: int) -> list[int]:
    """Numbers of canonical node-colored rooted trees with 1..k nodes.

    Uses the Euler transform recurrence for rooted trees with
    ``alphabet_size`` node colors.
    """
    t = [0] * (k + 1)
    f = [0] * (k + 1)  # forests (multisets of trees) by total size
    f[0] = 1
    for n in range(1, k + 1):
        t[n] = alphabet_size * f[n - 1]
        # f[n] = (1/n) sum_{j=1..n} (sum_{d|j} d t[d]) f[n-j]
        acc = 0
        for j in range(1, n + 1):
            s = sum(d * t[d] for d in range(1, j + 1) if j % d == 0)
            acc += s * f[n - j]
        f[n] = acc // n
    return t[1:]


class _Catalog:
    """Canonical trees of every size below the target, in size order."""

    def __init__(self, alphabet: list[tuple], kmax: int):
        self.alphabet = alphabet
        self.items: list[tuple[tuple, int]] = []
        self.end = [0]  # end[s] = number of catalog items of size <= s
        for s in range(1, kmax):
            new = list(self._trees(s))
            self.items.extend((t, s) for t in new)
            self.end.append(len(self.items))

    def forests(self, m: int, start: int = 0) -> Iterator[tuple]:
        if m == 0:
            yield ()
            return
        stop = self.end[min(m, len(self.end) - 1)]
        for p in range(start, stop):
            node, s = self.items[p]
            r = m - s
            if r and r < s:
                continue
            for rest in self.forests(r, p):
                yield (node,) + rest

    def _trees(self, s: int) -> Iterator[tuple]:
        for nu in self.alphabet:
            for kids in self.forests(s - 1):
                yield (nu, kids)


def enumerate_trees(
    order: int, alphabet: Sequence[Sequence[int]], max_trees: int | None = None
) -> Iterator[LabeledTree]:
    """Yield every canonical labeled tree of the given order once.

    Parameters
    ----------
    order : int
        Number of nodes ``k >= 1``.
    alphabet : sequence of harmonic vectors
        Allowed node labels.
    max_trees : int, optional
        Budget on the number of canonical trees; defaults to
        :func:`budget`.

    Raises
    ------
    OrderTooLarge
        If the canonical tree count exceeds the budget.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    alpha = sorted({tuple(int(x) for x in nu) for nu in alphabet})
    if not alpha:
        raise ValueError("alphabet must be nonempty")
    cap = budget() if max_trees is None else max_trees
    counts = count_canonical_trees(order, len(alpha))
    if sum(counts) > cap:
        raise OrderTooLarge(
            f"{counts[-1]} canonical trees of order {order} exceed budget {cap}"
        )
    cat = _Catalog(alpha, order)
    for node in cat._trees(order):
        yield LabeledTree(node)


# ---------------------------------------------------------------------------
# tree values
# ---------------------------------------------------------------------------

_KEPLER_C = {(1,): Fraction(1, 2), (-1,): Fraction(1, 2)}


def kepler_tree_value(tree: LabeledTree) -> GaussianRational:
    """Exact Kepler tree value ``(-i/k!) prod(nu_v' nu_v) prod c_nu``.

    The root line uses ``nu_v' = 1``; ``c_{+-1} = 1/2`` and zero otherwise.
    """
    flat = tree.flat
    k = len(flat)
    val = Fraction(1, math.factorial(k))
    for nu, parent in flat:
        c = _KEPLER_C.get(nu)
        if c is None:
            return GaussianRational(0)
        up = 1 if parent < 0 else flat[parent][0][0]
        val *= c * up * nu[0]
    return GaussianRational(0, -val)


def _lindstedt_factors(tree: LabeledTree, omega: FrequencyVector, f: FourierSeries):
    flat = tree.flat
    cur = tree.currents
    k = len(flat)
    prod = complex(1.0)
    for i, (nu, parent) in enumerate(flat):
        fv = f[nu]
        if not fv:
            return 0j, flat
        d = omega.dot(cur[i])
        if harmonic_norm(cur[i]) == 0:
            raise ZeroCurrentLine(f"zero current on line above node {i}")
        prod *= complex(fv) / (d * d)
        if parent >= 0:
            prod *= float(np.dot(flat[parent][0], nu))
    pref = -1j * (-1) ** k / math.factorial(k)
    return pref * prod, flat


def lindstedt_tree_value(
    tree: LabeledTree, omega: FrequencyVector, f: FourierSeries, u: Sequence[float]
) -> complex:
    """Lindstedt tree value with the root-line vector replaced by ``u``.

    Raises
    ------
    ZeroCurrentLine
        If any line current vanishes.
    """
    base, flat = _lindstedt_factors(tree, omega, f)
    return base * float(np.dot(u, flat[0][0]))


def lindstedt_tree_vector(tree: LabeledTree, omega: FrequencyVector, f: FourierSeries) -> np.ndarray:
    """Vector of :func:`lindstedt_tree_value` over the unit basis ``u = e_j``."""
    base, flat = _lindstedt_factors(tree, omega, f)
    return base * np.asarray(flat[0][0], dtype=float)


# ---------------------------------------------------------------------------
# Siegel census
# ---------------------------------------------------------------------------


def is_restricted(tree: LabeledTree) -> bool:
    """True if currents are nonzero and no two lines on one root path agree."""
    flat = tree.flat
    cur = tree.currents
    for i in range(len(flat)):
        if not any(cur[i]):
            return False
        p = flat[i][1]
        while p >= 0:
            if cur[p] == cur[i]:
                return False
            p = flat[p][1]
    return True


def siegel_census(tree: LabeledTree, omega: FrequencyVector, n: int, N: int) -> int:
    """Number of lines with ``2^-n < C|omega.nu(l)| <= 2^(-n+1)``.

    Raises
    ------
    PreconditionViolated
        If the tree is not restricted or a node harmonic exceeds ``N``.
    """
    if n < 1:
        raise ValueError("scale n must be >= 1")
    if any(harmonic_norm(nu) > N for nu, _ in tree.flat):
        raise PreconditionViolated("node harmonic exceeds N")
    if not is_restricted(tree):
        raise PreconditionViolated("repeated current on a root path")
    return sum(1 for c in tree.currents if omega.scale(c) == n)


def siegel_bound(N: int, k: int, n: int, tau: float) -> float:
    """Census bound ``4 N k 2^(-n/tau)``."""
    return 4.0 * N * k * 2.0 ** (-n / tau)


def _alphabet(N: int, dim: int) -> list[tuple]:
    rng = range(-N, N + 1)
    grid = np.array(np.meshgrid(*([rng] * dim), indexing="ij")).reshape(dim, -1).T
    return [tuple(int(x) for x in v) for v in grid if 0 < np.abs(v).sum() <= N]


def siegel_scan(omega: FrequencyVector, k_max: int, N: int) -> dict:
    """Exhaustive census over all restricted trees of order ``<= k_max``.

    Dynamic programming over subtree states ``(root current, set of
    currents in the subtree)``; for each state the maximum number of lines
    at each scale is kept. Maxima are exact because the census of a tree
    is the sum of the censuses of its branches plus the root line, and the
    restriction only depends on the state. Currents are encoded as
    integers (linear in the components) and sets as bitmasks.

    Returns
    -------
    dict
        ``max_counts[k][n]``, ``bound[k][n]``, ``violations`` and the number
        of DP states visited.
    """
    dim = omega.dim
    alpha = _alphabet(N, dim)
    R = k_max * N
    base = 2 * R + 1
    weights = [base**i for i in range(dim)]

    def code(c):
        return sum(w * x for w, x in zip(weights, c))

    everything = _alphabet(R, dim)
    bit = {code(c): 1 << i for i, c in enumerate(everything)}
    scale_of = {code(c): omega.scale(c) for c in everything}
    nmax = max(scale_of.values())
    width = nmax + 1
    acodes = [code(nu) for nu in alpha]

    def vmax(a, b):
        return tuple(max(x, y) for x, y in zip(a, b))

    zeros = (0,) * width
    trees: list[dict] = [dict()]
    forests: list[dict] = [{(0, 0): zeros}]
    result = {"max_counts": {}, "bound": {}, "violations": [], "states": 0, "nmax": nmax}
    for s in range(1, k_max + 1):
        tdict: dict = {}
        best = zeros
        for (sc, S), cnt in forests[s - 1].items():
            for a in acodes:
                c = a + sc
                b = bit.get(c)
                if b is None or S & b:
                    continue
                n = scale_of[c]
                if n:
                    val = cnt[:n] + (cnt[n] + 1,) + cnt[n + 1:]
                else:
                    val = cnt
                key = (c, S | b)
                old = tdict.get(key)
                tdict[key] = val if old is None else vmax(old, val)
        for val in tdict.values():
            best = vmax(best, val)
        trees.append(tdict)
        result["states"] += len(tdict)
        result["max_counts"][s] = {n: best[n] for n in range(1, width)}
        result["bound"][s] = {n: siegel_bound(N, s, n, omega.tau) for n in range(1, width)}
        for n in range(1, width):
            if best[n] > result["bound"][s][n]:
                result["violations"].append((s, n, best[n]))
        if s == k_max:
            break
        fdict: dict = {}
        for t in range(1, s + 1):
            rest = forests[s - t]
            for (c1, S1), v1 in trees[t].items():
                for (c2, S2), v2 in rest.items():
                    key = (c1 + c2, S1 | S2)
                    old = fdict.get(key)
                    val = v1 if not any(v2) else tuple(x + y for x, y in zip(v1, v2))
                    fdict[key] = val if old is None else vmax(old, val)
        forests.append(fdict)
        result["states"] += len(fdict)
    return result


def siegel_scan_bruteforce(omega: FrequencyVector, k_max: int, N: int) -> dict:
    """Census maxima by direct enumeration of canonical trees (small orders)."""
    alpha = _alphabet(N, omega.dim)
    out = {}
    for k in range(1, k_max + 1):
        best: dict[int, int] = {}
        for tree in enumerate_trees(k, alpha):
            if not is_restricted(tree):
                continue
            for c in tree.currents:
                s = omega.scale(c)
                if s:
                    best[s] = best.get(s, 0)
            counts = Counter(omega.scale(c) for c in tree.currents)
            for s, m in counts.items():
                if s:
                    best[s] = max(best.get(s, 0), m)
        out[k] = best
    return out
