"""Uniquely represented randomized block search trees over a simulated block store."""

from .blocks import BlockNode, ChildRef
from .core import (
    Params, Tree, check_invariants, fanout_bound, range_count, range_report,
    select_kth, successor,
)
from .oracle import oracle_build, oracle_tree, treap_reference
from .priority import ExplicitPriority, HashedPriority, priority_of
from .store import BlockStore, ImageHeader, IoStats, load_image, save_image
from .update import RebuildPlan, UpdateReceipt, delete, insert, locate_rebuild, top

__all__ = [
    "BlockNode", "BlockStore", "ChildRef", "ExplicitPriority", "HashedPriority",
    "ImageHeader", "IoStats", "Params", "RebuildPlan", "Tree", "UpdateReceipt",
    "check_invariants", "delete", "fanout_bound", "insert", "load_image",
    "locate_rebuild", "oracle_build", "oracle_tree", "priority_of",
    "range_count", "range_report", "save_image", "select_kth", "successor",
    "top", "treap_reference",
]
