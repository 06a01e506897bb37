"""Iterative-averaging (IA) bipartition and maximal hierarchical grouping.

A similarity matrix is transformed cycle by cycle until its off-diagonal
entries read as two complete groups separated by the midpoint threshold.
Recursing on each side (with the *original* similarities restricted to that
side) until groups of at most two labels remain gives the grouping tree, which
is rendered as a canonical signature such as ``"A - (B)(CDr)"``.

The engine runs on stacks of matrices ``(N, n, n)``.  Every operation is
elementwise across the stack axis, so a matrix gets the same result alone or
inside any batch.
"""
from __future__ import annotations

import math
from collections import defaultdict
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .metrics import SquareMatrix, Semantics

DEGENERATE_MARK = "⊥"
ROOT_SEP = " - "

UpdateRule = Callable[[np.ndarray, float], "tuple[np.ndarray, np.ndarray]"]


class TieError(ArithmeticError):
    """Off-diagonal similarities collapsed to a single value."""


@lru_cache(maxsize=None)
def _upper(n: int):
    return np.triu_indices(n, 1)


def snap_ties(values: np.ndarray, eps: float) -> np.ndarray:
    """Merge off-diagonal values that chain together within ``eps``.

    Each chain of sorted values with consecutive gaps below ``eps`` is replaced
    by its smallest member, so mathematically equal entries that picked up
    different rounding stay exactly equal.
    """
    values = np.asarray(values, dtype=float)
    stack = values.reshape((-1,) + values.shape[-2:])
    n = stack.shape[-1]
    iu, ju = _upper(n)
    v = stack[:, iu, ju]
    order = np.argsort(v, axis=1, kind="stable")
    sv = np.take_along_axis(v, order, axis=1)
    start = np.ones(sv.shape, dtype=bool)
    start[:, 1:] = np.diff(sv, axis=1) >= eps
    head = np.where(start, np.arange(sv.shape[1]), 0)
    head = np.maximum.accumulate(head, axis=1)
    snapped = np.empty_like(v)
    np.put_along_axis(snapped, order, np.take_along_axis(sv, head, axis=1), axis=1)
    out = stack.copy()
    out[:, iu, ju] = snapped
    out[:, ju, iu] = snapped
    return out.reshape(values.shape)


def _off_range(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = values.shape[-1]
    off = ~np.eye(n, dtype=bool)
    lo = np.where(off, values, np.inf).min(axis=(-2, -1))
    hi = np.where(off, values, -np.inf).max(axis=(-2, -1))
    return lo, hi


def profile_agreement_cycle(values: np.ndarray, tie_epsilon: float):
    """Default update rule: profile agreement followed by contrast rescaling.

    ``T(i,j) = 1 - mean_k |S(i,k) - S(j,k)|``, then off-diagonal entries are
    mapped affinely onto [0, 1] and the diagonal reset to 1.  Returns the new
    stack and a boolean tie mask (off-diagonal range below ``tie_epsilon``).
    """
    values = np.asarray(values, dtype=float)
    n = values.shape[-1]
    acc = np.zeros_like(values)
    for k in range(n):
        col = values[..., :, k]
        acc += np.abs(col[..., :, None] - col[..., None, :])
    t = snap_ties(1.0 - acc / n, tie_epsilon)
    lo, hi = _off_range(t)
    span = hi - lo
    tie = span < tie_epsilon
    span = np.where(tie, 1.0, span)
    out = (t - lo[..., None, None]) / span[..., None, None]
    out[..., np.arange(n), np.arange(n)] = 1.0
    return out, tie


@dataclass(frozen=True)
class IASettings:
    max_cycles: int = 10_000
    tie_epsilon: float = 1e-13
    update: UpdateRule = profile_agreement_cycle

    def __post_init__(self):
        if self.max_cycles < 1:
            raise ValueError("max_cycles must be >= 1")
        if not self.tie_epsilon > 0:
            raise ValueError("tie_epsilon must be > 0")


def ia_cycle(S: SquareMatrix, settings: IASettings = IASettings()) -> SquareMatrix:
    if S.semantics is not Semantics.SIMILARITY:
        raise ValueError("IA runs on similarity matrices")
    if S.n < 3:
        raise ValueError("IA needs at least three objects")
    out, tie = settings.update(S.values[None], settings.tie_epsilon)
    if tie[0]:
        raise TieError("off-diagonal similarities are all equal")
    return SquareMatrix(S.names, out[0], Semantics.SIMILARITY)


def readable_split(values: np.ndarray):
    """Midpoint-threshold readability test on a stack.

    Returns ``(ok, side)`` where ``side[m]`` marks the group of label 0.  A
    matrix is readable when the relation ``S > (min + max) / 2`` is an
    equivalence with exactly two classes.
    """
    n = values.shape[-1]
    lo, hi = _off_range(values)
    above = values > ((lo + hi) / 2.0)[:, None, None]
    above[:, np.arange(n), np.arange(n)] = True
    side = above[:, 0, :]
    expect = np.where(side[:, :, None], side[:, None, :], ~side[:, None, :])
    ok = np.all(above == expect, axis=(1, 2)) & np.any(~side, axis=1)
    return ok, side


@dataclass(frozen=True)
class StackSplit:
    """Bipartitions of a stack; ``side`` marks the group holding ``lowest``."""

    side: np.ndarray
    cycles: np.ndarray
    log_omega: np.ndarray
    degenerate: np.ndarray
    inverted: np.ndarray


def intergroup_log_omega(log_values: np.ndarray, side: np.ndarray):
    """ln of (most similar cross pair / least similar within pair), clamped at 0.

    Returns ``(log_omega, inverted)``; ``inverted`` flags stacks whose raw
    ratio exceeded one before clamping.
    """
    n = side.shape[-1]
    same = side[:, :, None] == side[:, None, :]
    off = ~np.eye(n, dtype=bool)
    cross_max = np.where(~same, log_values, -np.inf).max(axis=(1, 2))
    within_min = np.where(same & off, log_values, np.inf).min(axis=(1, 2))
    raw = cross_max - within_min
    return np.minimum(raw, 0.0), raw > 0.0


def bipartition_stack(
    values: np.ndarray,
    settings: IASettings = IASettings(),
    log_values: np.ndarray | None = None,
    lowest: int = 0,
) -> StackSplit:
    """Run IA to the first readable cycle for every matrix of a stack."""
    values = np.asarray(values, dtype=float)
    N, n, _ = values.shape
    if n < 3:
        raise ValueError("IA needs at least three objects")
    if log_values is None:
        log_values = np.log(values)
    eps = settings.tie_epsilon
    S = snap_ties(values, eps)
    side = np.zeros((N, n), dtype=bool)
    cycles = np.zeros(N, dtype=np.int64)
    degenerate = np.zeros(N, dtype=bool)
    active = np.arange(N)
    c = 0
    while active.size and c < settings.max_cycles:
        c += 1
        cur = S[active]
        nxt, tie = settings.update(cur, eps)
        ok, grp = readable_split(nxt)
        ok &= ~tie
        stalled = ~ok & (np.abs(nxt - cur).max(axis=(1, 2)) < eps)
        done = ok | tie | stalled
        cycles[active[done]] = c
        side[active[ok]] = grp[ok]
        degenerate[active[done & ~ok]] = True
        S[active] = nxt
        active = active[~done]
    cycles[active] = c
    degenerate[active] = True
    # group of label 0 -> group of `lowest`; fallback isolates `lowest`
    flip = ~side[np.arange(N), lowest]
    side[flip] = ~side[flip]
    side[degenerate] = False
    side[degenerate, lowest] = True
    log_omega, inverted = intergroup_log_omega(log_values, side)
    return StackSplit(side, cycles, log_omega, degenerate, inverted)


# -- trees -------------------------------------------------------------------


@dataclass(frozen=True)
class Bipartition:
    group_low: frozenset[str]
    group_high: frozenset[str]
    cycles: int
    log_omega: float
    degenerate: bool = False
    inverted_contrast: bool = False

    @property
    def omega(self) -> float:
        return max(math.exp(self.log_omega), math.ulp(0.0))


def neg_ln_omega(b: Bipartition) -> float:
    return -b.log_omega if b.log_omega else 0.0


@dataclass(frozen=True)
class GroupingTree:
    labels: frozenset[str]
    split: Bipartition | None = None
    children: tuple["GroupingTree", ...] = ()

    @property
    def is_leaf(self) -> bool:
        return self.split is None

    @property
    def root_omega(self) -> float:
        return self.split.omega if self.split else 1.0

    @property
    def degenerate(self) -> bool:
        if self.split is None:
            return False
        return self.split.degenerate or any(c.degenerate for c in self.children)

    def depth(self) -> int:
        return 0 if self.is_leaf else 1 + max(c.depth() for c in self.children)

    def leaves(self) -> list[frozenset[str]]:
        if self.is_leaf:
            return [self.labels]
        return [leaf for c in self.children for leaf in c.leaves()]


@dataclass
class _Table:
    points: list = field(default_factory=list)
    side: list = field(default_factory=list)
    cycles: list = field(default_factory=list)
    log_omega: list = field(default_factory=list)
    degenerate: list = field(default_factory=list)
    inverted: list = field(default_factory=list)

    def freeze(self):
        pts = np.concatenate(self.points)
        order = np.argsort(pts, kind="stable")
        self.points = pts[order]
        for name in ("side", "cycles", "log_omega", "degenerate", "inverted"):
            setattr(self, name, np.concatenate(getattr(self, name))[order])

    def row(self, p: int) -> int:
        return int(np.searchsorted(self.points, p))


def _bits(mask: int) -> list[int]:
    return [i for i in range(mask.bit_length()) if mask >> i & 1]


def split_tables(
    values: np.ndarray,
    names: Sequence[str],
    settings: IASettings = IASettings(),
    log_values: np.ndarray | None = None,
) -> dict[int, _Table]:
    """Recursive grouping for a stack, as per-subset tables of splits.

    Subsets are bitmasks over label positions.  Each table lists the stack
    members whose tree contains that subset as an internal node.
    """
    values = np.asarray(values, dtype=float)
    if log_values is None:
        log_values = np.log(values)
    N, n, _ = values.shape
    rank = np.argsort(np.argsort(np.array(names, dtype=object), kind="stable"), kind="stable")
    tables: dict[int, _Table] = defaultdict(_Table)
    queue: list[tuple[int, np.ndarray]] = [((1 << n) - 1, np.arange(N))]
    while queue:
        mask, pts = queue.pop()
        idx = _bits(mask)
        sel = np.ix_(pts, idx, idx)
        lowest = int(np.argmin(rank[idx]))
        res = bipartition_stack(values[sel], settings, log_values[sel], lowest)
        weights = np.array([1 << i for i in idx], dtype=np.int64)
        low = (res.side * weights).sum(axis=1)
        tab = tables[mask]
        tab.points.append(pts)
        tab.side.append(low)
        tab.cycles.append(res.cycles)
        tab.log_omega.append(res.log_omega)
        tab.degenerate.append(res.degenerate)
        tab.inverted.append(res.inverted)
        for child in (low, mask ^ low):
            for cm in np.unique(child):
                if int(cm).bit_count() >= 3:
                    queue.append((int(cm), pts[child == cm]))
    for tab in tables.values():
        tab.freeze()
    return dict(tables)


def _tree_from_tables(tables, names, p: int, mask: int) -> GroupingTree:
    labels = frozenset(names[i] for i in _bits(mask))
    if mask.bit_count() <= 2:
        return GroupingTree(labels)
    tab = tables[mask]
    r = tab.row(p)
    low = int(tab.side[r])
    split = Bipartition(
        group_low=frozenset(names[i] for i in _bits(low)),
        group_high=frozenset(names[i] for i in _bits(mask ^ low)),
        cycles=int(tab.cycles[r]),
        log_omega=float(tab.log_omega[r]),
        degenerate=bool(tab.degenerate[r]),
        inverted_contrast=bool(tab.inverted[r]),
    )
    kids = (
        _tree_from_tables(tables, names, p, low),
        _tree_from_tables(tables, names, p, mask ^ low),
    )
    return GroupingTree(labels, split, kids)


def build_trees_stack(values, names, settings=IASettings(), log_values=None):
    tables = split_tables(values, names, settings, log_values)
    full = (1 << len(names)) - 1
    return [_tree_from_tables(tables, names, p, full) for p in range(len(values))]


def run_bipartition(
    S: SquareMatrix, settings: IASettings = IASettings(), log_values: np.ndarray | None = None
) -> Bipartition:
    if S.semantics is not Semantics.SIMILARITY:
        raise ValueError("IA runs on similarity matrices")
    if S.n < 3:
        raise ValueError("IA needs at least three objects")
    lv = None if log_values is None else np.asarray(log_values, dtype=float)[None]
    lowest = S.names.index(min(S.names))
    res = bipartition_stack(S.values[None], settings, lv, lowest)
    side = res.side[0]
    return Bipartition(
        group_low=frozenset(nm for nm, s in zip(S.names, side) if s),
        group_high=frozenset(nm for nm, s in zip(S.names, side) if not s),
        cycles=int(res.cycles[0]),
        log_omega=float(res.log_omega[0]),
        degenerate=bool(res.degenerate[0]),
        inverted_contrast=bool(res.inverted[0]),
    )


def build_grouping_tree(
    S: SquareMatrix, settings: IASettings = IASettings(), log_values: np.ndarray | None = None
) -> GroupingTree:
    if S.semantics is not Semantics.SIMILARITY:
        raise ValueError("IA runs on similarity matrices")
    if S.n < 3:
        raise ValueError("IA needs at least three objects")
    lv = None if log_values is None else np.asarray(log_values, dtype=float)[None]
    return build_trees_stack(S.values[None], S.names, settings, lv)[0]


# -- signatures ----------------------------------------------------------------


def _order(parts: Iterable[tuple[str, bool]]) -> list[str]:
    # the drifter's side goes last; otherwise lexicographic
    return [s for s, _ in sorted(parts, key=lambda sp: (sp[1], sp[0]))]


def _render(node, drifter: str | None, root: bool) -> tuple[str, bool]:
    labels, kids = node
    has_dr = drifter in labels
    if not kids:
        return "".join(sorted(labels)), has_dr
    a, b = _order(_render(k, drifter, False) for k in kids)
    if root:
        return f"{a}{ROOT_SEP}{b}", has_dr
    return f"({a})({b})", has_dr


def _nodes(tree: GroupingTree):
    return tree.labels, tuple(_nodes(c) for c in tree.children)


def canonical_signature(tree: GroupingTree, drifter: str | None = "Dr") -> str:
    """Render a tree: root groups joined by ``" - "``, deeper splits in parentheses.

    Children are ordered so the group holding ``drifter`` comes last, other
    groups lexicographically.  Trees with a tie anywhere get the ``"⊥"`` prefix.
    """
    if tree.is_leaf:
        text = "".join(sorted(tree.labels))
    else:
        text, _ = _render(_nodes(tree), drifter, True)
    return DEGENERATE_MARK + text if tree.degenerate else text


def is_degenerate(signature: str) -> bool:
    return signature.startswith(DEGENERATE_MARK)


def _split_leaf(text: str, labels: Sequence[str]) -> frozenset[str]:
    by_len = sorted(labels, key=len, reverse=True)
    out, pos = [], 0
    while pos < len(text):
        for lab in by_len:
            if text.startswith(lab, pos):
                out.append(lab)
                pos += len(lab)
                break
        else:
            raise ValueError(f"cannot tokenize {text!r} at offset {pos}")
    return frozenset(out)


def _parse_part(text: str, pos: int, labels):
    if text[pos] != "(":
        end = pos
        while end < len(text) and text[end] not in "()" and not text.startswith(ROOT_SEP, end):
            end += 1
        return (_split_leaf(text[pos:end], labels), ()), end
    kids = []
    for _ in range(2):
        if text[pos] != "(":
            raise ValueError(f"expected '(' at offset {pos} in {text!r}")
        node, pos = _parse_part(text, pos + 1, labels)
        if text[pos] != ")":
            raise ValueError(f"expected ')' at offset {pos} in {text!r}")
        pos += 1
        kids.append(node)
    return (kids[0][0] | kids[1][0], tuple(kids)), pos


def parse_signature(signature: str, labels: Sequence[str]):
    """Parse a signature into ``(degenerate, node)``; nodes are ``(labels, children)``."""
    degenerate = is_degenerate(signature)
    text = signature[len(DEGENERATE_MARK):] if degenerate else signature
    if ROOT_SEP not in text:
        return degenerate, (_split_leaf(text, labels), ())
    left, pos = _parse_part(text, 0, labels)
    if not text.startswith(ROOT_SEP, pos):
        raise ValueError(f"expected {ROOT_SEP!r} at offset {pos} in {signature!r}")
    right, end = _parse_part(text, pos + len(ROOT_SEP), labels)
    if end != len(text):
        raise ValueError(f"trailing text in {signature!r}")
    return degenerate, (left[0] | right[0], (left, right))


def root_groups(signature: str, labels: Sequence[str]) -> tuple[frozenset[str], ...]:
    _, node = parse_signature(signature, labels)
    return tuple(k[0] for k in node[1]) or (node[0],)


def relabel_signature(signature: str, mapping: dict[str, str], drifter: str | None = "Dr") -> str:
    """Apply a label permutation to a signature and re-canonicalize it."""
    degenerate, node = parse_signature(signature, list(mapping))

    def remap(nd):
        labs, kids = nd
        return frozenset(mapping[x] for x in labs), tuple(remap(k) for k in kids)

    node = remap(node)
    text = _render(node, drifter, True)[0] if node[1] else "".join(sorted(node[0]))
    return DEGENERATE_MARK + text if degenerate else text


# -- fast classification for scans ------------------------------------------------


@dataclass(frozen=True)
class Classification:
    """Per-member results of grouping a stack: root split data plus signature."""

    signatures: list[str]
    log_omega: np.ndarray
    cycles: np.ndarray
    degenerate: np.ndarray


def classify_stack(
    values: np.ndarray,
    log_values: np.ndarray,
    names: Sequence[str],
    drifter: str | None,
    settings: IASettings = IASettings(),
) -> Classification:
    names = tuple(names)
    N, n, _ = np.shape(values)
    tables = split_tables(values, names, settings, log_values)
    full = (1 << n) - 1
    rendered: dict = {}

    def structure(p: int, mask: int):
        if mask.bit_count() <= 2:
            return mask, False
        tab = tables[mask]
        r = tab.row(p)
        low = int(tab.side[r])
        a, da = structure(p, low)
        b, db = structure(p, mask ^ low)
        return (mask, a, b), bool(tab.degenerate[r]) or da or db

    def to_node(st):
        if isinstance(st, int):
            return frozenset(names[i] for i in _bits(st)), ()
        mask, a, b = st
        return frozenset(names[i] for i in _bits(mask)), (to_node(a), to_node(b))

    sigs = []
    deg = np.zeros(N, dtype=bool)
    root = tables[full]
    for p in range(N):
        st, d = structure(p, full)
        key = (st, d)
        if key not in rendered:
            text = _render(to_node(st), drifter, True)[0]
            rendered[key] = DEGENERATE_MARK + text if d else text
        sigs.append(rendered[key])
        deg[p] = d
    return Classification(sigs, root.log_omega.copy(), root.cycles.copy(), deg)
