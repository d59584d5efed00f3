"""Incremental 3-D KD-tree over obstacle points.

Points are inserted one by one and removed by axis-aligned box. Removal
tombstones nodes; tombstones are purged whenever a subtree is rebuilt.
Subtrees are rebuilt (median split) when a child holds more than
``alpha_bal`` of the subtree's nodes, or when more than ``delete_ratio`` of
them are tombstones. Nearest queries are exact.

Writers (``insert``/``remove``) are expected to be serialized by the caller.
Readers that need to run concurrently with later mutations take a
:meth:`IncrementalKdTree.snapshot`, an immutable batch-query index over the
live points at that moment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

INF = math.inf


class _Node:
    __slots__ = ("point", "axis", "left", "right", "size", "live", "deleted", "lo", "hi")

    def __init__(self, point, axis):
        self.point = point
        self.axis = axis
        self.left = None
        self.right = None
        self.size = 1
        self.live = 1
        self.deleted = False
        self.lo = list(point)
        self.hi = list(point)

    def pull(self):
        """Recompute counters and bounding box from the children."""
        size = 1
        live = 0 if self.deleted else 1
        lo = list(self.point)
        hi = list(self.point)
        for ch in (self.left, self.right):
            if ch is not None:
                size += ch.size
                live += ch.live
                for a in range(3):
                    if ch.lo[a] < lo[a]:
                        lo[a] = ch.lo[a]
                    if ch.hi[a] > hi[a]:
                        hi[a] = ch.hi[a]
        self.size, self.live, self.lo, self.hi = size, live, lo, hi


def _size(node):
    return 0 if node is None else node.size


def _box_dist2(lo, hi, p):
    d2 = 0.0
    for a in range(3):
        x = p[a]
        if x < lo[a]:
            d2 += (lo[a] - x) ** 2
        elif x > hi[a]:
            d2 += (x - hi[a]) ** 2
    return d2


@dataclass(frozen=True)
class DistanceFieldQuery:
    query: tuple
    distance: float
    nearest: tuple | None


class IncrementalKdTree:
    def __init__(self, points=None, alpha_bal: float = 0.7, delete_ratio: float = 0.5,
                 dedup_tol: float = 1e-9):
        if not 0.5 < alpha_bal < 1.0:
            raise ValueError("alpha_bal must lie in (0.5, 1)")
        self.alpha_bal = alpha_bal
        self.delete_ratio = delete_ratio
        self.dedup_tol = dedup_tol
        self.root = None
        self.rebuilds = 0
        if points is not None and len(points):
            self.insert(points)

    # -- bookkeeping ---------------------------------------------------------

    def __len__(self):
        return 0 if self.root is None else self.root.live

    @property
    def physical_size(self) -> int:
        return _size(self.root)

    def depth(self) -> int:
        def d(n):
            return 0 if n is None else 1 + max(d(n.left), d(n.right))
        return d(self.root)

    def _collect(self, node, out, include_deleted=False):
        stack = [node]
        while stack:
            n = stack.pop()
            if n is None:
                continue
            if include_deleted or not n.deleted:
                out.append(n.point)
            stack.append(n.left)
            stack.append(n.right)
        return out

    def live_points(self) -> np.ndarray:
        pts = self._collect(self.root, [])
        return np.array(pts, float).reshape(-1, 3)

    def _build(self, pts: list):
        if not pts:
            return None
        if len(pts) <= 16:
            return self._build_small(pts)
        return self._build_array(np.asarray(pts, float))

    def _build_small(self, pts: list):
        if not pts:
            return None
        spread = [max(q[a] for q in pts) - min(q[a] for q in pts) for a in range(3)]
        axis = spread.index(max(spread))
        order = sorted(pts, key=lambda q: q[axis])
        m = len(order) // 2
        node = _Node(order[m], axis)
        node.left = self._build_small(order[:m])
        node.right = self._build_small(order[m + 1:])
        node.pull()
        return node

    def _build_array(self, arr: np.ndarray):
        if len(arr) <= 16:
            return self._build_small([tuple(r) for r in arr.tolist()])
        lo, hi = arr.min(axis=0), arr.max(axis=0)
        axis = int(np.argmax(hi - lo))
        order = arr[np.argsort(arr[:, axis], kind="stable")]
        m = len(order) // 2
        node = _Node(tuple(order[m].tolist()), axis)
        node.left = self._build_array(order[:m])
        node.right = self._build_array(order[m + 1:])
        node.size = node.live = len(arr)
        node.lo, node.hi = lo.tolist(), hi.tolist()
        return node

    def _rebuild(self, node):
        self.rebuilds += 1
        return self._build(self._collect(node, []))

    def _unbalanced(self, node) -> bool:
        if node.size <= 2:
            return False
        return max(_size(node.left), _size(node.right)) > self.alpha_bal * node.size

    def _dead_heavy(self, node) -> bool:
        return node.size > 4 and (node.size - node.live) > self.delete_ratio * node.size

    # -- mutation ------------------------------------------------------------

    def _has_duplicate(self, p) -> bool:
        tol = self.dedup_tol
        tol2 = tol * tol
        stack = [self.root]
        while stack:
            n = stack.pop()
            if n is None or n.live == 0 or _box_dist2(n.lo, n.hi, p) > tol2:
                continue
            if not n.deleted:
                q = n.point
                if (q[0] - p[0]) ** 2 + (q[1] - p[1]) ** 2 + (q[2] - p[2]) ** 2 <= tol2:
                    return True
            stack.append(n.left)
            stack.append(n.right)
        return False

    def _insert_one(self, p, dirty=None):
        """Insert one point; with ``dirty`` given, record the path and defer balancing."""
        if self.root is None:
            self.root = _Node(p, 0)
            return
        if self._has_duplicate(p):
            return
        path = []
        node = self.root
        while True:
            path.append(node)
            a = node.axis
            if p[a] < node.point[a]:
                if node.left is None:
                    node.left = _Node(p, (a + 1) % 3)
                    break
                node = node.left
            else:
                if node.right is None:
                    node.right = _Node(p, (a + 1) % 3)
                    break
                node = node.right
        for n in reversed(path):
            n.pull()
        if dirty is not None:
            dirty.update(id(n) for n in path)
            return
        for k, n in enumerate(path):
            if self._unbalanced(n):
                new = self._rebuild(n)
                if k == 0:
                    self.root = new
                else:
                    parent = path[k - 1]
                    if parent.left is n:
                        parent.left = new
                    else:
                        parent.right = new
                    for m in reversed(path[:k]):
                        m.pull()
                break

    def insert(self, points) -> "IncrementalKdTree":
        pts = np.atleast_2d(np.asarray(points, float))
        if pts.size == 0:
            return self
        if pts.shape[1] != 3:
            raise ValueError("points must be (n, 3)")
        if not np.all(np.isfinite(pts)):
            raise ValueError("non-finite obstacle coordinates")
        rows = [tuple(r) for r in pts.tolist()]
        if len(rows) == 1:
            self._insert_one(rows[0])
            return self
        if len(rows) < max(len(self), 64):
            dirty = set()
            for row in rows:
                self._insert_one(row, dirty)
            self.root = self._rebalance(self.root, dirty)
            return self
        # a batch at least as large as the tree: one rebuild beats many scapegoat rebuilds
        fresh = [r for r in rows if self.root is None or not self._has_duplicate(r)]
        keep = self._dedup_in_order(fresh)
        self.rebuilds += 1
        self.root = self._build(self._collect(self.root, []) + keep)
        return self

    def _rebalance(self, node, dirty):
        """Rebuild the topmost unbalanced node on every path touched by a batch."""
        if node is None or id(node) not in dirty:
            return node
        if self._unbalanced(node):
            return self._rebuild(node)
        node.left = self._rebalance(node.left, dirty)
        node.right = self._rebalance(node.right, dirty)
        node.pull()
        return self._rebuild(node) if self._unbalanced(node) else node

    def _dedup_in_order(self, rows: list) -> list:
        """Drop each row within ``dedup_tol`` of an earlier kept row."""
        if len(rows) < 2:
            return rows
        tol2 = self.dedup_tol ** 2
        partners = [[] for _ in rows]
        for i, j in cKDTree(np.asarray(rows)).query_pairs(2 * self.dedup_tol + 1e-12):
            partners[max(i, j)].append(min(i, j))
        kept = [False] * len(rows)
        for j, p in enumerate(rows):
            kept[j] = not any(kept[i] and sum((a - b) ** 2 for a, b in zip(rows[i], p)) <= tol2
                              for i in partners[j])
        return [r for r, k in zip(rows, kept) if k]

    def remove(self, lo, hi) -> int:
        """Tombstone every live point inside the box ``[lo, hi]``; returns the count."""
        lo = [float(v) for v in lo]
        hi = [float(v) for v in hi]
        if any(l > h for l, h in zip(lo, hi)):
            raise ValueError("box lower corner exceeds upper corner")
        removed = [0]

        def visit(n):
            if n is None or n.live == 0:
                return n
            if any(n.hi[a] < lo[a] or n.lo[a] > hi[a] for a in range(3)):
                return n
            if not n.deleted and all(lo[a] <= n.point[a] <= hi[a] for a in range(3)):
                n.deleted = True
                removed[0] += 1
            n.left = visit(n.left)
            n.right = visit(n.right)
            n.pull()
            if n.live == 0 and n.size > 4:
                self.rebuilds += 1
                return None
            if self._dead_heavy(n) or self._unbalanced(n):
                return self._rebuild(n)
            return n

        self.root = visit(self.root)
        return removed[0]

    # -- queries -------------------------------------------------------------

    def nearest(self, p) -> tuple[float, tuple | None]:
        p = tuple(float(v) for v in p)
        best = [INF, None]

        def search(n):
            if n is None or n.live == 0:
                return
            if _box_dist2(n.lo, n.hi, p) >= best[0]:
                return
            if not n.deleted:
                q = n.point
                d2 = (q[0] - p[0]) ** 2 + (q[1] - p[1]) ** 2 + (q[2] - p[2]) ** 2
                if d2 < best[0]:
                    best[0], best[1] = d2, q
            if p[n.axis] < n.point[n.axis]:
                search(n.left)
                search(n.right)
            else:
                search(n.right)
                search(n.left)

        search(self.root)
        return math.sqrt(best[0]), best[1]

    def snapshot(self) -> "DistanceField":
        return DistanceField(self.live_points())

    # -- audit ---------------------------------------------------------------

    def check_invariants(self) -> None:
        """Raise AssertionError if ordering, counters, or boxes are inconsistent."""

        def walk(n):
            if n is None:
                return []
            left = walk(n.left)
            right = walk(n.right)
            a = n.axis
            assert all(q[a] <= n.point[a] for q in left), "left subtree ordering"
            assert all(q[a] >= n.point[a] for q in right), "right subtree ordering"
            assert n.size == 1 + _size(n.left) + _size(n.right), "size counter"
            live = (0 if n.deleted else 1) + (n.left.live if n.left else 0) + (n.right.live if n.right else 0)
            assert n.live == live, "live counter"
            pts = left + right + [n.point]
            for k in range(3):
                assert n.lo[k] == min(q[k] for q in pts) and n.hi[k] == max(q[k] for q in pts), "bbox"
            return pts

        walk(self.root)

    def dump(self) -> list[dict]:
        """Node list (pre-order) for debugging."""
        out = []
        ids = {}

        def visit(n):
            if n is None:
                return None
            nid = len(out)
            ids[id(n)] = nid
            rec = {"id": nid, "point": list(n.point), "axis": n.axis, "size": n.size,
                   "live": n.live, "deleted": n.deleted, "left": None, "right": None}
            out.append(rec)
            rec["left"] = visit(n.left)
            rec["right"] = visit(n.right)
            return nid

        visit(self.root)
        return out


def nearest_distance(tree: IncrementalKdTree, p) -> DistanceFieldQuery:
    d, q = tree.nearest(p)
    return DistanceFieldQuery(tuple(float(v) for v in p), d, q)


class DistanceField:
    """Immutable nearest-obstacle lookup over a fixed point set.

    ``query`` accepts ``(m, 3)`` (or ``(m, 2)`` for points on the z = 0 plane)
    and returns distances and nearest obstacle points; an empty field reports
    ``inf`` distances and NaN points.
    """

    def __init__(self, points):
        pts = np.asarray(points, float).reshape(-1, 3)
        self.points = pts
        self.points.setflags(write=False)
        self._index = cKDTree(pts) if len(pts) else None

    def __len__(self):
        return len(self.points)

    def query(self, p) -> tuple[np.ndarray, np.ndarray]:
        p = np.asarray(p, float)
        if p.ndim != 2 or p.shape[1] != 3:
            p = np.atleast_2d(p)
            if p.shape[1] == 2:
                p = np.column_stack([p, np.zeros(len(p))])
        if self._index is None:
            return np.full(len(p), INF), np.full((len(p), 3), np.nan)
        d, idx = self._index.query(p)
        return d, self.points[idx]

    def distance(self, p) -> np.ndarray:
        return self.query(p)[0]
