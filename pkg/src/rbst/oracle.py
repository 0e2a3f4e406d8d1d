"""Reference implementations used as ground truth.

oracle_build lays a tree out directly from its recursive definition: the
block of a subtree holds the keys with the smallest priorities, the
fan-out rule picks how many of them separate the remaining keys, and a
fan-out of one degenerates to a chain of priority waves.  No partial
rebuilds, no I/O accounting, plain recursion.  Everything the dynamic
side produces is compared byte-for-byte against images built here.

The enumerators are exact: full iteration over permutations or integer
compositions with Fraction arithmetic, never floating point.
"""

from __future__ import annotations

import math
from fractions import Fraction
from itertools import permutations

from .blocks import BlockNode, ChildRef
from .core import Params, Tree, fanout_bound
from .errors import ConfigError, EnumerationLimitError
from .priority import ExplicitPriority, HashedPriority
from .store import BlockStore, ImageHeader

ENUMERATION_LIMIT = 9


def oracle_blocks(keys, prio, params: Params) -> tuple[int | None, dict[int, BlockNode]]:
    """Lay out a tree over `keys`; returns (root label, label -> block)."""
    out: dict[int, BlockNode] = {}
    alpha = params.alpha

    def build(subkeys: list[int], parent: int | None, depth: int) -> int | None:
        # subkeys sorted ascending by key
        n = len(subkeys)
        if n == 0:
            return None
        by_pi = sorted(subkeys, key=prio.priority)
        d = fanout_bound(n, params)
        if d <= 1 and n > alpha:
            return build_chain(by_pi, parent, depth, n)
        arr = sorted(by_pi[:alpha]) if n > alpha else list(subkeys)
        label = by_pi[0]
        children: list[ChildRef | None] = [None] * (alpha + 1)
        if n > alpha:
            seps = sorted(by_pi[: d - 1])
            rest = set(by_pi[alpha:])
            sections: list[list[int]] = [[] for _ in range(d)]
            bounds = seps + [None]
            i = 0
            for key in subkeys:
                if key not in rest:
                    continue
                while bounds[i] is not None and key > bounds[i]:
                    i += 1
                sections[i].append(key)
            for j, sec in enumerate(sections):
                sub = build(sec, label, depth + 1)
                if sub is not None:
                    children[j] = ChildRef(sub, len(sec))
        out[label] = BlockNode(arr, children, parent, depth, d, label)
        return label

    def build_chain(by_pi: list[int], parent: int | None, depth: int, n: int) -> int:
        head = None
        prev: BlockNode | None = None
        for off in range(0, n, alpha):
            wave = by_pi[off: off + alpha]
            label = wave[0]
            node = BlockNode(sorted(wave), [None] * (alpha + 1), parent, depth, 1, label)
            if prev is None:
                head = label
            else:
                prev.children[0] = ChildRef(label, n - off)
            out[label] = node
            prev, parent, depth = node, label, depth + 1
        return head

    root = build(sorted(keys), None, 0)
    return root, out


def oracle_tree(keys, prio, params: Params) -> Tree:
    """Populated live tree; the store's counters start at zero."""
    root, blocks = oracle_blocks(keys, prio, params)
    store = BlockStore(params.alpha)
    store.blocks = blocks
    return Tree(store, params, prio, root, len(set(keys)))


def oracle_build(keys, prio, params: Params) -> bytes:
    """Reference store image over a key set: the UR ground truth."""
    root, blocks = oracle_blocks(keys, prio, params)
    store = BlockStore(params.alpha)
    store.blocks = blocks
    header = ImageHeader(
        alpha=params.alpha,
        rho=params.rho if params.buffering else 0,
        seed=getattr(prio, "seed_tag", 0),
        n=len(set(keys)),
        root=root,
    )
    return store.image_bytes(header)


# ---------------------------------------------------------------------------
# treap degeneration
# ---------------------------------------------------------------------------


class TreapNode:
    __slots__ = ("key", "left", "right")

    def __init__(self, key, left=None, right=None):
        self.key = key
        self.left = left
        self.right = right


def treap_reference(keys, prio) -> TreapNode | None:
    """Classic treap: search tree by key, heap by priority."""
    def build(subkeys: list[int]) -> TreapNode | None:
        if not subkeys:
            return None
        top = min(subkeys, key=prio.priority)
        i = subkeys.index(top)
        return TreapNode(top, build(subkeys[:i]), build(subkeys[i + 1:]))

    return build(sorted(keys))


def treap_shape_of_tree(tree: Tree) -> TreapNode | None:
    """Binary shape of an alpha=1, unbuffered tree, for isomorphism checks."""
    if tree.params.alpha != 1 or tree.params.buffering:
        raise ConfigError("treap comparison requires alpha=1 without buffering")
    store = tree.store

    def conv(label: int | None) -> TreapNode | None:
        if label is None:
            return None
        node = store.peek(label)
        left, right = node.children[0], node.children[1]
        return TreapNode(
            node.keys[0],
            conv(left.label if left else None),
            conv(right.label if right else None),
        )

    return conv(tree.root)


def treap_isomorphic(a: TreapNode | None, b: TreapNode | None) -> bool:
    if a is None or b is None:
        return a is b or (a is None and b is None)
    return (
        a.key == b.key
        and treap_isomorphic(a.left, b.left)
        and treap_isomorphic(a.right, b.right)
    )


# ---------------------------------------------------------------------------
# exact enumerators
# ---------------------------------------------------------------------------


def _count_blocks(keys: tuple[int, ...], ranks: tuple[int, ...], params: Params) -> tuple[int, int]:
    """(blocks, full blocks) of the layout; avoids materialising nodes."""
    alpha = params.alpha
    rank_of = dict(zip(keys, ranks))

    def count(subkeys: list[int]) -> tuple[int, int]:
        n = len(subkeys)
        if n == 0:
            return 0, 0
        if n <= alpha:
            return 1, 1 if n == alpha else 0
        d = fanout_bound(n, params)
        if d <= 1:
            q, r = divmod(n, alpha)
            return q + (1 if r else 0), q
        by_pi = sorted(subkeys, key=lambda k: rank_of[k])
        seps = sorted(by_pi[: d - 1])
        rest = sorted(by_pi[alpha:])
        blocks, full = 1, 1
        bounds = seps + [None]
        i = 0
        sec: list[int] = []
        for key in rest:
            while bounds[i] is not None and key > bounds[i]:
                b, f = count(sec)
                blocks, full, sec = blocks + b, full + f, []
                i += 1
            sec.append(key)
        b, f = count(sec)
        return blocks + b, full + f

    return count(sorted(keys))


def exact_expected_size(n: int, params: Params) -> tuple[Fraction, Fraction, Fraction]:
    """Exact (E[S], E[F], E[E]) over all n! permutations.

    S counts blocks, F full blocks, E = S - F non-full blocks.
    """
    if n > ENUMERATION_LIMIT:
        raise EnumerationLimitError(f"n={n} above enumeration limit {ENUMERATION_LIMIT}")
    keys = tuple(range(1, n + 1))
    total_s = total_f = 0
    count = 0
    for ranks in permutations(range(1, n + 1)):
        s, f = _count_blocks(keys, ranks, params)
        total_s += s
        total_f += f
        count += 1
    return (
        Fraction(total_s, count),
        Fraction(total_f, count),
        Fraction(total_s - total_f, count),
    )


def compositions(total: int, parts: int):
    """All length-`parts` tuples of non-negative integers summing to `total`."""
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for tail in compositions(total - head, parts - 1):
            yield (head,) + tail


def section_tail_prob(n: int, alpha: int, t: int) -> Fraction:
    """Pr[one section below a full root holds >= t keys], exact.

    The section loads are a uniform composition of n - alpha keys into
    alpha + 1 parts, so the tail is C(n-t, alpha) / C(n, alpha).
    """
    if not 0 <= t <= n - alpha:
        raise ConfigError(f"t={t} outside 0..{n - alpha}")
    return Fraction(math.comb(n - t, alpha), math.comb(n, alpha))


def section_tail_by_enumeration(n: int, alpha: int, t: int) -> list[Fraction]:
    """Per-section Pr[X_k >= t] by composition counting; all entries equal."""
    parts = alpha + 1
    total = n - alpha
    counts = [0] * parts
    denom = 0
    for comp in compositions(total, parts):
        denom += 1
        for k, x in enumerate(comp):
            if x >= t:
                counts[k] += 1
    return [Fraction(c, denom) for c in counts]


def section_distribution_checks(n: int, m: int, t: int) -> tuple[Fraction, Fraction, Fraction]:
    """(exact, lower, upper) for Pr[X_i >= t] with X_1+..+X_m = n uniform.

    exact = C(n-t+m-1, m-1) / C(n+m-1, m-1), bracketed by
    (1 - t/(n+1))^(m-1) and (1 - t/(n+m-1))^(m-1); all exact rationals.
    """
    if m < 2:
        raise ConfigError("m must be >= 2")
    if not 0 <= t <= n:
        raise ConfigError(f"t={t} outside 0..{n}")
    exact = Fraction(math.comb(n - t + m - 1, m - 1), math.comb(n + m - 1, m - 1))
    lower = (1 - Fraction(t, n + 1)) ** (m - 1)
    upper = (1 - Fraction(t, n + m - 1)) ** (m - 1)
    return exact, lower, upper


def buffer_nonfull_census(n: int, params: Params, trials: int | None = None,
                          seed_base: int = 0):
    """Expected non-full blocks: exact for n <= 9, Monte Carlo otherwise.

    Exact mode returns a Fraction; Monte Carlo returns (mean, half_ci).
    """
    if trials is None:
        if n > ENUMERATION_LIMIT:
            raise EnumerationLimitError(
                f"n={n} above enumeration limit {ENUMERATION_LIMIT}; pass trials"
            )
        _, _, e = exact_expected_size(n, params)
        return e
    total = 0.0
    totsq = 0.0
    keys = list(range(1, n + 1))
    for t in range(trials):
        prio = HashedPriority(seed_base + t)
        _, blocks = oracle_blocks(keys, prio, params)
        e = sum(1 for b in blocks.values() if len(b.keys) < params.alpha)
        total += e
        totsq += e * e
    mean = total / trials
    var = max(0.0, totsq / trials - mean * mean)
    half_ci = 1.96 * math.sqrt(var / trials) if trials > 1 else float("inf")
    return mean, half_ci


def enumerate_images(n: int, params: Params, keys=None) -> dict[bytes, int]:
    """Image -> multiplicity over all permutations of the key set."""
    if n > ENUMERATION_LIMIT:
        raise EnumerationLimitError(f"n={n} above enumeration limit {ENUMERATION_LIMIT}")
    keys = list(range(1, n + 1)) if keys is None else sorted(keys)
    seen: dict[bytes, int] = {}
    for order in permutations(keys):
        prio = ExplicitPriority.from_order(order)
        img = oracle_build(keys, prio, params)
        seen[img] = seen.get(img, 0) + 1
    return seen
