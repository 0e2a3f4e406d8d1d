"""Dynamic insert and delete via greedy top-down partial rebuilds.

The search for an update key walks down from the root and stops at the
first block that either must take the key into its array (its priority
falls below the block's maximum) or must change its fan-out.  Around that
anchor only the separator intervals whose key content changes are laid
out again; every other child subtree is re-linked untouched.  Rebuilt
sections are assembled into auxiliary storage with range-limited scans
of the old subtrees and promoted to the UR region in one atomic commit.
Chain blocks (fan-out one) are rewritten in a single linear pass instead.

Ancestor blocks on the search path keep their layout but carry a child
weight that changed by one; those are in-place field rewrites, applied
bottom-up after all commits, and reported separately in the receipt.

Main-memory discipline: scans and rebuild recursion are driven through
parent references with a cursor, so the number of simultaneously pinned
blocks stays constant regardless of tree size.
"""

from __future__ import annotations

from bisect import bisect_right, insort
from dataclasses import dataclass, field

from .blocks import BlockNode, ChildRef
from .core import (
    NEG_INF, POS_INF, Tree, active_separators, fanout_bound, scan_keys, successor,
)
from .errors import ConfigError, DuplicateKeyError, MissingKeyError
from .store import AuxHandle

MASK64 = (1 << 64) - 1

CASE_LIST_NEW_BLOCK = "list-new-block"
CASE_LIST_INSERT = "list-insert"
CASE_LIST_DELETE = "list-delete"
CASE_FANOUT_INCREASE = "fanout-increase"
CASE_FANOUT_DECREASE = "fanout-decrease"
CASE_IN_ARRAY_ACTIVE = "in-array-active"
CASE_IN_ARRAY_INACTIVE = "in-array-inactive"
CASE_IN_ARRAY_DELETE = "in-array-delete"


@dataclass
class PlanSection:
    lo: int
    hi: int
    weight: int
    sources: list[ChildRef]
    include: list[int] = field(default_factory=list)
    exclude: list[int] = field(default_factory=list)
    reuse: ChildRef | None = None


@dataclass
class RebuildPlan:
    op: str
    key: int
    case: str
    anchor: int | None
    depth: int
    interval: tuple[int, int]
    sections: list[PlanSection]
    carry: int | None = None
    descends_into: int | None = None   # old child label the update continues into


@dataclass
class UpdateReceipt:
    op: str
    key: int
    m: int              # obsolete blocks plus in-place rewrites (old-side change)
    m_prime: int        # staged blocks plus in-place rewrites (new-side change)
    staged: int         # freshly written blocks
    freed: int          # blocks removed
    rewritten: int      # in-place field rewrites (ancestor weights, parent fixes)
    reads: int
    writes: int
    d_prime: int        # height of the rebuilt region, in levels
    cases: list[str]
    staged_labels: frozenset = frozenset()
    freed_labels: frozenset = frozenset()
    rewritten_labels: frozenset = frozenset()


class _Ctx:
    """Per-update bookkeeping: staged/freed/rewritten labels and path fixes."""

    def __init__(self, tree: Tree):
        self.tree = tree
        self.store = tree.store
        self.prio = tree.prio
        self.params = tree.params
        self.alpha = tree.params.alpha
        self.staged: dict[int, int] = {}      # label -> depth
        self.freed: dict[int, int] = {}
        self.rewritten: set[int] = set()
        self.relabels: dict[int, int] = {}
        self.path: list[tuple[int, int | None, int]] = []
        self.cases: list[str] = []
        self._site_handles: list[AuxHandle] = []
        self._site_obsolete: dict[int, int] = {}

    # -- staging ------------------------------------------------------

    def stage(self, node: BlockNode) -> None:
        handle = self.store.write_aux(node)
        self._site_handles.append(handle)
        self.staged[node.label] = node.depth

    def mark_obsolete(self, label: int, depth: int) -> None:
        self._site_obsolete[label] = depth

    def obsolete_recorder(self):
        def on_block(label: int, node: BlockNode) -> None:
            self._site_obsolete[label] = node.depth
        return on_block

    def collect_subtree(self, root_label: int) -> None:
        scan_keys(self.store, self.prio, root_label, NEG_INF, POS_INF,
                  on_block=self.obsolete_recorder())

    def commit_site(self) -> None:
        self.store.commit_rebuild(set(self._site_obsolete), self._site_handles)
        self.freed.update(self._site_obsolete)
        self._site_handles = []
        self._site_obsolete = {}

    def rewrite(self, label: int, node: BlockNode) -> None:
        self.store.rewrite(label, node)
        self.rewritten.add(label)

    # -- receipts -----------------------------------------------------

    def receipt(self, op: str, key: int, before) -> UpdateReceipt:
        after = self.store.stats()
        changed_depths = list(self.staged.values()) + list(self.freed.values())
        if changed_depths:
            d_prime = max(changed_depths) - min(changed_depths) + 1
        else:
            d_prime = 0
        old_side = set(self.freed) | self.rewritten
        new_side = set(self.staged) | self.rewritten
        return UpdateReceipt(
            op=op,
            key=key,
            m=len(old_side),
            m_prime=len(new_side),
            staged=len(self.staged),
            freed=len(self.freed),
            rewritten=len(self.rewritten),
            reads=after.reads - before.reads,
            writes=after.writes - before.writes,
            d_prime=d_prime,
            cases=self.cases,
            staged_labels=frozenset(self.staged),
            freed_labels=frozenset(self.freed),
            rewritten_labels=frozenset(self.rewritten),
        )


# ---------------------------------------------------------------------------
# range-limited scans over the old tree
# ---------------------------------------------------------------------------


def _top_pass(ctx: _Ctx, sources, lo: int, hi: int, k: int,
              floor=None, exclude=(), record=False, forbid=None):
    """k smallest-priority stored keys in (lo, hi) plus the total count.

    Scans each source subtree once; with `record`, every visited block is
    marked obsolete.  Keys with priority <= floor and excluded keys are
    skipped.
    """
    prio = ctx.prio
    cands: list[tuple] = []
    total = 0

    def on_key(key: int) -> None:
        nonlocal total
        if forbid is not None and key == forbid:
            raise DuplicateKeyError(f"key {key} already present")
        total += 1
        p = prio.priority(key)
        if len(cands) < k:
            insort(cands, (p, key))
        elif p < cands[-1][0]:
            insort(cands, (p, key))
            cands.pop()

    on_block = ctx.obsolete_recorder() if record else None
    for src in sources:
        scan_keys(ctx.store, prio, src, lo, hi, on_key=on_key,
                  on_block=on_block, pi_floor=floor, exclude=exclude)
    return cands, total


def _count_pass(ctx: _Ctx, source: int, lo: int, hi: int, exclude=(), record=False) -> int:
    count = 0

    def on_key(_key: int) -> None:
        nonlocal count
        count += 1

    on_block = ctx.obsolete_recorder() if record else None
    scan_keys(ctx.store, ctx.prio, source, lo, hi, on_key=on_key,
              on_block=on_block, exclude=exclude)
    return count


def _bin_pass(ctx: _Ctx, sources, lo: int, hi: int, bounds: list[int],
              skip: set[int], floor=None, exclude=()):
    """Counts and minimum-priority key per section between `bounds` keys.

    bounds: active separators (ascending); defines len(bounds)+1 bins over
    (lo, hi).  Keys in `skip` (the new array) and `exclude` are ignored,
    as are keys at or below the priority floor.
    """
    prio = ctx.prio
    nbins = len(bounds) + 1
    counts = [0] * nbins
    min_pi: list[tuple | None] = [None] * nbins

    def on_key(key: int) -> None:
        if key in skip:
            return
        i = bisect_right(bounds, key)
        counts[i] += 1
        p = prio.priority(key)
        if min_pi[i] is None or p < min_pi[i]:
            min_pi[i] = p

    for src in sources:
        scan_keys(ctx.store, prio, src, lo, hi, on_key=on_key,
                  pi_floor=floor, exclude=exclude)
    return counts, min_pi


# ---------------------------------------------------------------------------
# fresh subtree construction (staged into auxiliary storage)
# ---------------------------------------------------------------------------


class _BuildState:
    __slots__ = ("sources", "include", "exclude", "floor", "specs", "idx")

    def __init__(self, sources, include, exclude, floor, specs):
        self.sources = sources
        self.include = include
        self.exclude = exclude
        self.floor = floor      # priority of the block's own array maximum
        self.specs = specs      # (slot, lo, hi, weight) pending child sections
        self.idx = 0


def _assemble(ctx: _Ctx, lo: int, hi: int, weight: int, sources, include, exclude,
              floor, parent: int | None, depth: int):
    """Build one block for a fresh section; returns (node, child section specs).

    The stored keys of the section are exactly those in (lo, hi) whose
    priority exceeds `floor` (keys at or below it sit in staged ancestor
    arrays already).
    """
    alpha = ctx.alpha
    prio = ctx.prio
    cands, total = _top_pass(ctx, sources, lo, hi, alpha,
                             floor=floor, exclude=exclude, record=True)
    merged = sorted(cands + [(prio.priority(k), k) for k in include])
    assert total + len(include) == weight, "section weight drifted"
    arr_pi = merged[:alpha]
    arr = sorted(k for _, k in arr_pi)
    label = arr_pi[0][1]
    d = fanout_bound(weight, ctx.params)
    node = BlockNode(arr, [None] * (alpha + 1), parent, depth, d, label)
    if weight <= len(arr):
        return node, []
    seps = sorted(k for _, k in arr_pi[: d - 1])
    arr_set = set(arr)
    counts, min_pi = _bin_pass(ctx, sources, lo, hi, seps, arr_set,
                               floor=floor, exclude=exclude)
    for k in include:
        if k in arr_set:
            continue
        p = prio.priority(k)
        i = bisect_right(seps, k)
        counts[i] += 1
        if min_pi[i] is None or p < min_pi[i]:
            min_pi[i] = p
    bounds = [lo] + seps + [hi]
    specs = []
    for i, cnt in enumerate(counts):
        if cnt == 0:
            continue
        node.children[i] = ChildRef(min_pi[i][1], cnt)
        specs.append((i, bounds[i], bounds[i + 1], cnt))
    assert len(arr) + sum(counts) == weight
    return node, specs


def _build_chain(ctx: _Ctx, lo: int, hi: int, weight: int, sources, include, exclude,
                 floor, parent: int | None, depth: int) -> int:
    """Stage a chain of priority waves covering (lo, hi); returns the head label."""
    alpha = ctx.alpha
    prio = ctx.prio
    inc = sorted((prio.priority(k), k) for k in include)
    remaining = weight
    head = None
    first = True
    while remaining > 0:
        take = min(alpha, remaining)
        cands, _ = _top_pass(ctx, sources, lo, hi, take + 1,
                             floor=floor, exclude=exclude, record=first)
        pool = sorted(cands + [p for p in inc if floor is None or p[0] > floor])[: take + 1]
        wave = pool[:take]
        label = wave[0][1]
        node = BlockNode(sorted(k for _, k in wave), [None] * (alpha + 1),
                         parent, depth, 1, label)
        if remaining > take:
            node.children[0] = ChildRef(pool[take][1], remaining - take)
        ctx.stage(node)
        if head is None:
            head = label
        floor = wave[-1][0]
        parent, depth, remaining, first = label, depth + 1, remaining - take, False
    return head


def _build_fresh(ctx: _Ctx, lo: int, hi: int, weight: int, sources, include, exclude,
                 parent: int | None, depth: int, floor=None) -> int | None:
    """Stage a complete subtree for (lo, hi); cursor-driven, returns root label."""
    if weight == 0:
        for src in sources:
            ctx.collect_subtree(src)
        return None
    alpha = ctx.alpha
    prio = ctx.prio
    if weight > alpha and fanout_bound(weight, ctx.params) <= 1:
        return _build_chain(ctx, lo, hi, weight, sources, include, exclude,
                            floor, parent, depth)
    root_node, specs = _assemble(ctx, lo, hi, weight, sources, include, exclude,
                                 floor, parent, depth)
    ctx.stage(root_node)
    root_floor = max(prio.priority(k) for k in root_node.keys)
    root_node.aux_bounds = _BuildState(sources, include, exclude, root_floor, specs)
    index = {root_node.label: root_node}
    cur = root_node
    while True:
        st: _BuildState = cur.aux_bounds
        if st.idx < len(st.specs):
            slot, slo, shi, w = st.specs[st.idx]
            st.idx += 1
            inc_child = [k for k in st.include
                         if slo < k < shi and prio.priority(k) > st.floor]
            want = cur.children[slot].label
            if w > alpha and fanout_bound(w, ctx.params) <= 1:
                got = _build_chain(ctx, slo, shi, w, st.sources, inc_child, st.exclude,
                                   st.floor, cur.label, cur.depth + 1)
                assert got == want, "chain head label drifted from the parent slot"
                continue
            child, child_specs = _assemble(ctx, slo, shi, w, st.sources, inc_child,
                                           st.exclude, st.floor, cur.label, cur.depth + 1)
            assert child.label == want, "child label drifted from the parent slot"
            ctx.stage(child)
            child_floor = max(prio.priority(k) for k in child.keys)
            child.aux_bounds = _BuildState(st.sources, inc_child, st.exclude,
                                           child_floor, child_specs)
            index[child.label] = child
            cur = child
        else:
            cur.aux_bounds = None
            if cur is root_node:
                break
            cur = index[cur.parent]
    return root_node.label


# ---------------------------------------------------------------------------
# section diff around an anchor
# ---------------------------------------------------------------------------


def _old_sections(node: BlockNode, prio, lo: int, hi: int):
    """(lo, hi, child) triples of the block's current partition."""
    if node.fanout <= 1:
        return [(lo, hi, node.children[0])]
    seps = active_separators(node, prio)
    bounds = [lo] + seps + [hi]
    return [
        (bounds[i], bounds[i + 1], node.children[i])
        for i in range(len(seps) + 1)
    ]


def _new_bounds(prio, new_arr: list[int], new_fanout: int, lo: int, hi: int) -> list[int]:
    if new_fanout <= 1 or len(new_arr) == 0:
        return [lo, hi]
    take = min(new_fanout - 1, len(new_arr))
    seps = sorted(sorted(new_arr, key=prio.priority)[:take])
    return [lo] + seps + [hi]


def _diff_sections(ctx: _Ctx, node: BlockNode, lo: int, hi: int,
                   new_arr: list[int], new_fanout: int,
                   adds: list[int], removes: list[int]) -> list[PlanSection]:
    """Map the old partition onto the new one.

    A new section is reused when exactly one non-empty old section
    overlaps it, that section's interval is contained in the new one, and
    no key moves in or out; everything else is scheduled for rebuilding.
    """
    old = _old_sections(node, ctx.prio, lo, hi)
    bounds = _new_bounds(ctx.prio, new_arr, new_fanout, lo, hi)
    out: list[PlanSection] = []
    for j in range(len(bounds) - 1):
        a, b = bounds[j], bounds[j + 1]
        over = [(olo, ohi, ref) for (olo, ohi, ref) in old if olo < b and ohi > a]
        nonempty = [(olo, ohi, ref) for (olo, ohi, ref) in over if ref is not None]
        inc = [k for k in adds if a < k < b]
        exc = [k for k in removes if a < k < b]
        if (not inc and not exc and len(nonempty) == 1
                and nonempty[0][0] >= a and nonempty[0][1] <= b):
            ref = nonempty[0][2]
            out.append(PlanSection(a, b, ref.weight, [ref], reuse=ref))
            continue
        w = len(inc)
        for olo, ohi, ref in nonempty:
            if olo >= a and ohi <= b:
                w += ref.weight - sum(1 for k in exc if olo < k < ohi)
            else:
                w += _count_pass(ctx, ref.label, a, b, exclude=exc)
        out.append(PlanSection(a, b, w, [r for _, _, r in nonempty],
                               include=inc, exclude=exc))
    return out


# ---------------------------------------------------------------------------
# anchor execution
# ---------------------------------------------------------------------------


def _run_anchor(ctx: _Ctx, node: BlockNode, lo: int, hi: int, n_new: int,
                new_arr: list[int], adds: list[int], removes: list[int],
                key_below: int | None, op: str):
    """Rebuild around one anchor block.

    Returns (child_ref, sec_lo, sec_hi) when the update continues deeper,
    else None.  new_arr is the anchor's array after the update; adds are
    keys pushed down into sections, removes keys leaving them; key_below
    is the update key when it is not part of new_arr.
    """
    prio = ctx.prio
    alpha = ctx.alpha
    if not new_arr:
        ctx.mark_obsolete(node.label, node.depth)
        ctx.commit_site()
        return None
    d_new = fanout_bound(n_new, ctx.params)
    label_new = min(new_arr, key=prio.priority)
    sections = _diff_sections(ctx, node, lo, hi, new_arr, d_new, adds, removes)
    continue_into = None
    if key_below is not None:
        bounds = _new_bounds(prio, new_arr, d_new, lo, hi)
        j = bisect_right(bounds[1:-1], key_below)
        sec = sections[j]
        if sec.reuse is not None:
            continue_into = (sec.reuse, sec.lo, sec.hi)
        elif op == "insert":
            sec.include.append(key_below)
            sec.weight += 1
        else:
            sec.exclude.append(key_below)
            sec.weight -= 1
    children: list[ChildRef | None] = [None] * (alpha + 1)
    for j, sec in enumerate(sections):
        if sec.reuse is not None:
            children[j] = ChildRef(sec.reuse.label, sec.reuse.weight)
            continue
        sub = _build_fresh(ctx, sec.lo, sec.hi, sec.weight,
                           [r.label for r in sec.sources],
                           sec.include, sec.exclude, label_new, node.depth + 1)
        if sub is not None:
            children[j] = ChildRef(sub, sec.weight)
    anchor = BlockNode(sorted(new_arr), children, node.parent, node.depth, d_new, label_new)
    ctx.mark_obsolete(node.label, node.depth)
    ctx.stage(anchor)
    ctx.commit_site()
    if label_new != node.label:
        ctx.relabels[node.label] = label_new
        for j, sec in enumerate(sections):
            if sec.reuse is None:
                continue
            child = ctx.store.peek(sec.reuse.label).copy()
            child.parent = label_new
            ctx.rewrite(sec.reuse.label, child)
    return continue_into


# ---------------------------------------------------------------------------
# chain linear passes
# ---------------------------------------------------------------------------


def _list_insert(ctx: _Ctx, head_label: int, key: int) -> None:
    """One linear pass over a chain: emplace the key at its priority wave."""
    store, prio, alpha = ctx.store, ctx.prio, ctx.alpha
    pi_x = prio.priority(key)
    cur = head_label
    while True:
        node = store.read(cur)
        store.release(cur)
        p_max = max(prio.priority(k) for k in node.keys)
        nxt = node.children[0]
        if pi_x < p_max or nxt is None:
            break
        ctx.path.append((cur, nxt.label, key))
        cur = nxt.label
    # rewrite from the wave block onward
    carry = (pi_x, key)
    parent = node.parent
    depth = node.depth
    while True:
        pool = sorted([(prio.priority(k), k) for k in node.keys] + [carry])
        nxt = node.children[0]
        if len(pool) <= alpha and nxt is None:
            new = BlockNode(sorted(k for _, k in pool), [None] * (alpha + 1),
                            parent, depth, 1, pool[0][1])
            ctx.mark_obsolete(node.label, node.depth)
            if new.label != node.label:
                ctx.relabels[node.label] = new.label
            ctx.stage(new)
            break
        wave, displaced = pool[:alpha], pool[alpha]
        if nxt is not None:
            link = min(displaced, (prio.priority(nxt.label), nxt.label))
            weight = nxt.weight + 1
        else:
            link = displaced
            weight = 1
        new = BlockNode(sorted(k for _, k in wave), [None] * (alpha + 1),
                        parent, depth, 1, wave[0][1])
        new.children[0] = ChildRef(link[1], weight)
        ctx.mark_obsolete(node.label, node.depth)
        if new.label != node.label:
            ctx.relabels[node.label] = new.label
        ctx.stage(new)
        parent, depth, carry = new.label, depth + 1, displaced
        if nxt is None:
            tail = BlockNode([carry[1]], [None] * (alpha + 1), parent, depth, 1, carry[1])
            ctx.stage(tail)
            break
        node = store.read(nxt.label)
        store.release(nxt.label)
    ctx.commit_site()


def _list_delete(ctx: _Ctx, head_label: int, key: int) -> None:
    """One linear pass over a chain: remove the key, pulling waves up."""
    store, prio, alpha = ctx.store, ctx.prio, ctx.alpha
    cur = head_label
    while True:
        node = store.read(cur)
        store.release(cur)
        if key in node.keys:
            break
        nxt = node.children[0]
        if nxt is None:
            raise MissingKeyError(f"key {key} not present")
        ctx.path.append((cur, nxt.label, key))
        cur = nxt.label
    removed = key
    parent = node.parent
    depth = node.depth
    while True:
        keys = [k for k in node.keys if k != removed]
        nxt = node.children[0]
        if nxt is None:
            ctx.mark_obsolete(node.label, node.depth)
            if keys:
                new = BlockNode(sorted(keys), [None] * (alpha + 1), parent, depth, 1,
                                min(keys, key=prio.priority))
                if new.label != node.label:
                    ctx.relabels[node.label] = new.label
                ctx.stage(new)
            else:
                ctx.relabels[node.label] = None
            break
        nxt_node = store.read(nxt.label)
        store.release(nxt.label)
        pulled = nxt.label        # the next wave's minimum-priority key
        keys.append(pulled)
        new = BlockNode(sorted(keys), [None] * (alpha + 1), parent, depth, 1,
                        min(keys, key=prio.priority))
        if len(nxt_node.keys) == 1 and nxt_node.children[0] is None:
            pass                  # the tail empties out: chain shortens
        else:
            rest = [k for k in nxt_node.keys if k != pulled]
            nxt_label_new = min(rest, key=prio.priority) if rest else nxt_node.children[0].label
            new.children[0] = ChildRef(nxt_label_new, nxt.weight - 1)
        ctx.mark_obsolete(node.label, node.depth)
        if new.label != node.label:
            ctx.relabels[node.label] = new.label
        ctx.stage(new)
        parent, depth, removed, node = new.label, depth + 1, pulled, nxt_node
    ctx.commit_site()


# ---------------------------------------------------------------------------
# drivers
# ---------------------------------------------------------------------------


def _check_key(key: int) -> None:
    if not 0 <= key <= MASK64:
        raise ConfigError(f"key {key} outside the u64 universe")


def _apply_path_fixes(ctx: _Ctx, delta: int) -> None:
    for parent_label, old_child, key in reversed(ctx.path):
        node = ctx.store.peek(parent_label).copy()
        if old_child is None:
            seps = active_separators(node, ctx.prio)
            slot = bisect_right(seps, key) if node.fanout > 1 else 0
            ref = node.children[slot]
            assert ref is None
            node.children[slot] = ChildRef(key, delta)
        else:
            slot = next(
                i for i, c in enumerate(node.children)
                if c is not None and c.label == old_child
            )
            ref = node.children[slot]
            new_label = ctx.relabels.get(old_child, old_child)
            new_w = ref.weight + delta
            if new_w <= 0 or new_label is None:
                node.children[slot] = None
            else:
                node.children[slot] = ChildRef(new_label, new_w)
        ctx.rewrite(parent_label, node)


def _finish(ctx: _Ctx, op: str, key: int, before, delta: int) -> UpdateReceipt:
    _apply_path_fixes(ctx, delta)
    tree = ctx.tree
    if tree.root is not None and tree.root in ctx.relabels:
        tree.root = ctx.relabels[tree.root]
    tree.n += delta
    if tree.n == 0:
        tree.root = None
    return ctx.receipt(op, key, before)


def insert(tree: Tree, key: int) -> UpdateReceipt:
    """Insert a key; the resulting image equals a fresh build of the new set."""
    _check_key(key)
    if tree.root is not None and successor(tree, key) == key:
        raise DuplicateKeyError(f"key {key} already present")
    before = tree.store.stats()
    ctx = _Ctx(tree)
    prio, alpha = tree.prio, tree.params.alpha
    if tree.root is None:
        leaf = BlockNode([key], [None] * (alpha + 1), None, 0,
                         fanout_bound(1, tree.params), key)
        ctx.stage(leaf)
        ctx.commit_site()
        ctx.cases.append(CASE_LIST_NEW_BLOCK)
        tree.root = key
        tree.n = 1
        return ctx.receipt("insert", key, before)
    pi_x = prio.priority(key)
    cur, n_sub, lo, hi = tree.root, tree.n, NEG_INF, POS_INF
    while True:
        node = tree.store.read(cur)
        tree.store.release(cur)
        d_old = node.fanout
        d_new = fanout_bound(n_sub + 1, tree.params)
        p_max = max(prio.priority(k) for k in node.keys)
        in_array = n_sub < alpha or pi_x < p_max
        if in_array and not (d_old <= 1 and d_new <= 1):
            y = max(node.keys, key=prio.priority) if n_sub >= alpha else None
            new_arr = [k for k in node.keys if k != y] + [key]
            seps_new = _new_bounds(prio, new_arr, d_new, lo, hi)[1:-1]
            ctx.cases.append(
                CASE_IN_ARRAY_ACTIVE if key in seps_new else CASE_IN_ARRAY_INACTIVE
            )
            _run_anchor(ctx, node, lo, hi, n_sub + 1, new_arr,
                        adds=[y] if y is not None else [], removes=[],
                        key_below=None, op="insert")
            break
        if not in_array and d_new > d_old:
            ctx.cases.append(CASE_FANOUT_INCREASE)
            cont = _run_anchor(ctx, node, lo, hi, n_sub + 1, list(node.keys),
                               adds=[], removes=[], key_below=key, op="insert")
            if cont is None:
                break
            ref, slo, shi = cont
            ctx.path.append((node.label, ref.label, key))
            cur, n_sub, lo, hi = ref.label, ref.weight, slo, shi
            continue
        if d_old <= 1:
            ctx.cases.append(CASE_LIST_INSERT)
            _list_insert(ctx, cur, key)
            break
        seps = active_separators(node, prio)
        j = bisect_right(seps, key)
        child = node.children[j]
        if child is None:
            leaf = BlockNode([key], [None] * (alpha + 1), node.label, node.depth + 1,
                             fanout_bound(1, tree.params), key)
            ctx.stage(leaf)
            ctx.commit_site()
            ctx.path.append((node.label, None, key))
            ctx.cases.append(CASE_LIST_NEW_BLOCK)
            break
        bounds = [lo] + seps + [hi]
        ctx.path.append((node.label, child.label, key))
        cur, n_sub, lo, hi = child.label, child.weight, bounds[j], bounds[j + 1]
    return _finish(ctx, "insert", key, before, +1)


def delete(tree: Tree, key: int) -> UpdateReceipt:
    """Delete a key; the resulting image equals a fresh build of the new set."""
    _check_key(key)
    if tree.root is None or successor(tree, key) != key:
        raise MissingKeyError(f"key {key} not present")
    before = tree.store.stats()
    ctx = _Ctx(tree)
    prio, alpha = tree.prio, tree.params.alpha
    cur, n_sub, lo, hi = tree.root, tree.n, NEG_INF, POS_INF
    while True:
        node = tree.store.read(cur)
        tree.store.release(cur)
        d_old = node.fanout
        d_new = fanout_bound(n_sub - 1, tree.params)
        if d_old <= 1:
            ctx.cases.append(CASE_LIST_DELETE)
            _list_delete(ctx, cur, key)
            break
        if key in node.keys:
            ctx.cases.append(CASE_IN_ARRAY_DELETE)
            child_labels = [c.label for c in node.children if c is not None]
            z = min(child_labels, key=prio.priority) if child_labels else None
            new_arr = [k for k in node.keys if k != key] + ([z] if z is not None else [])
            if not new_arr:
                ctx.relabels[node.label] = None
            _run_anchor(ctx, node, lo, hi, n_sub - 1, new_arr,
                        adds=[], removes=[z] if z is not None else [],
                        key_below=None, op="delete")
            break
        if d_new < d_old:
            ctx.cases.append(CASE_FANOUT_DECREASE)
            cont = _run_anchor(ctx, node, lo, hi, n_sub - 1, list(node.keys),
                               adds=[], removes=[], key_below=key, op="delete")
            if cont is None:
                break
            ref, slo, shi = cont
            ctx.path.append((node.label, ref.label, key))
            cur, n_sub, lo, hi = ref.label, ref.weight, slo, shi
            continue
        seps = active_separators(node, prio)
        j = bisect_right(seps, key)
        child = node.children[j]
        if child is None:
            raise MissingKeyError(f"key {key} not present")
        bounds = [lo] + seps + [hi]
        ctx.path.append((node.label, child.label, key))
        cur, n_sub, lo, hi = child.label, child.weight, bounds[j], bounds[j + 1]
    return _finish(ctx, "delete", key, before, -1)


# ---------------------------------------------------------------------------
# public planning and range probes
# ---------------------------------------------------------------------------


def top(tree: Tree, k: int, root_label: int, lo: int, hi: int):
    """k smallest-priority keys of the subtree's keys in open (lo, hi).

    Returns (keys in ascending priority order, leftover counts per gap
    between the reported keys in key order); the counts sum to the number
    of unreported keys in range.
    """
    if not 1 <= k <= tree.params.alpha:
        raise ConfigError(f"k={k} outside 1..alpha")
    ctx = _Ctx(tree)
    cands, total = _top_pass(ctx, [root_label], lo, hi, k)
    keys_by_pi = [key for _, key in cands]
    reported = sorted(keys_by_pi)
    gaps = [0] * (len(reported) + 1)

    def on_key(key: int) -> None:
        gaps[bisect_right(reported, key)] += 1

    scan_keys(tree.store, tree.prio, root_label, lo, hi,
              on_key=on_key, exclude=set(reported))
    assert sum(gaps) == total - len(reported)
    return keys_by_pi, gaps




def _rebuilt_sections(secs: list[PlanSection]) -> list[PlanSection]:
    """Sections that change content: not reused and not empty no-ops."""
    return [s for s in secs
            if s.reuse is None and (s.weight > 0 or s.sources)]

def locate_rebuild(tree: Tree, key: int, op: str = "insert") -> RebuildPlan:
    """Dry-run descent: the first anchor the update for `key` would rebuild."""
    _check_key(key)
    if op not in ("insert", "delete"):
        raise ConfigError(f"op {op!r} not insert/delete")
    present = tree.root is not None and successor(tree, key) == key
    if op == "insert" and present:
        raise DuplicateKeyError(f"key {key} already present")
    if op == "delete" and not present:
        raise MissingKeyError(f"key {key} not present")
    ctx = _Ctx(tree)
    prio, alpha = tree.prio, tree.params.alpha
    if tree.root is None:
        return RebuildPlan(op, key, CASE_LIST_NEW_BLOCK, None, 0,
                           (NEG_INF, POS_INF), [])
    pi_x = prio.priority(key)
    cur, n_sub, lo, hi, depth = tree.root, tree.n, NEG_INF, POS_INF, 0
    while True:
        node = tree.store.read(cur)
        tree.store.release(cur)
        d_old = node.fanout
        n_next = n_sub + 1 if op == "insert" else n_sub - 1
        d_new = fanout_bound(n_next, tree.params)
        p_max = max(prio.priority(k) for k in node.keys)
        if op == "insert":
            in_array = n_sub < alpha or pi_x < p_max
            if in_array and not (d_old <= 1 and d_new <= 1):
                y = max(node.keys, key=prio.priority) if n_sub >= alpha else None
                new_arr = [k for k in node.keys if k != y] + [key]
                seps_new = _new_bounds(prio, new_arr, d_new, lo, hi)[1:-1]
                case = CASE_IN_ARRAY_ACTIVE if key in seps_new else CASE_IN_ARRAY_INACTIVE
                secs = _diff_sections(ctx, node, lo, hi, new_arr, d_new,
                                      [y] if y is not None else [], [])
                return RebuildPlan(op, key, case, cur, depth, (lo, hi),
                                   _rebuilt_sections(secs), carry=y)
            if not in_array and d_new > d_old:
                secs = _diff_sections(ctx, node, lo, hi, list(node.keys), d_new, [], [])
                rebuilds = _rebuilt_sections(secs)
                descends = None
                bounds = _new_bounds(prio, list(node.keys), d_new, lo, hi)
                j = bisect_right(bounds[1:-1], key)
                if secs[j].reuse is not None:
                    descends = secs[j].reuse.label
                return RebuildPlan(op, key, CASE_FANOUT_INCREASE, cur, depth, (lo, hi),
                                   rebuilds, carry=None if descends else key,
                                   descends_into=descends)
            if d_old <= 1:
                return RebuildPlan(op, key, CASE_LIST_INSERT, cur, depth, (lo, hi), [])
        else:
            if d_old <= 1:
                return RebuildPlan(op, key, CASE_LIST_DELETE, cur, depth, (lo, hi), [])
            if key in node.keys:
                child_labels = [c.label for c in node.children if c is not None]
                z = min(child_labels, key=prio.priority) if child_labels else None
                new_arr = [k for k in node.keys if k != key] + ([z] if z else [])
                secs = _diff_sections(ctx, node, lo, hi, new_arr, d_new, [],
                                      [z] if z is not None else [])
                return RebuildPlan(op, key, CASE_IN_ARRAY_DELETE, cur, depth, (lo, hi),
                                   _rebuilt_sections(secs), carry=z)
            if d_new < d_old:
                secs = _diff_sections(ctx, node, lo, hi, list(node.keys), d_new, [], [])
                rebuilds = _rebuilt_sections(secs)
                descends = None
                bounds = _new_bounds(prio, list(node.keys), d_new, lo, hi)
                j = bisect_right(bounds[1:-1], key)
                if secs[j].reuse is not None:
                    descends = secs[j].reuse.label
                return RebuildPlan(op, key, CASE_FANOUT_DECREASE, cur, depth, (lo, hi),
                                   rebuilds, carry=None if descends else key,
                                   descends_into=descends)
        seps = active_separators(node, prio)
        j = bisect_right(seps, key)
        child = node.children[j]
        if child is None:
            return RebuildPlan(op, key, CASE_LIST_NEW_BLOCK, cur, depth, (lo, hi), [])
        bounds = [lo] + seps + [hi]
        cur, n_sub, lo, hi, depth = child.label, child.weight, bounds[j], bounds[j + 1], depth + 1
