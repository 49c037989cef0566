"""Lazy rootless directed trees and their generation combinatorics.

A tree kernel answers two local questions: the ordered children of a vertex
and its parent.  Everything else (iterated maps, the shells A(v, n), windows,
bilateral paths) is derived here.  Kernels are lazy: the trees are infinite
and vertices are produced on demand.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

from .errors import MalformedTreeError, ResourceCapError, UnknownVertexError

DEFAULT_VERTEX_CAP = 10**6


def vertex_cap() -> int:
    """Resource cap on enumerated vertices, overridable via WOLDLAB_MAX_VERTICES."""
    raw = os.environ.get("WOLDLAB_MAX_VERTICES")
    if raw is None:
        return DEFAULT_VERTEX_CAP
    try:
        cap = int(raw)
    except ValueError:
        raise ValueError(
            f"WOLDLAB_MAX_VERTICES must be a positive integer, got {raw!r}"
        ) from None
    if cap <= 0:
        raise ValueError("WOLDLAB_MAX_VERTICES must be a positive integer")
    return cap


class Budget:
    """Counts vertices touched by one logical operation against the cap."""

    def __init__(self, cap: int | None = None) -> None:
        self.cap = vertex_cap() if cap is None else cap
        self.used = 0

    def charge(self, k: int = 1) -> None:
        self.used += k
        if self.used > self.cap:
            raise ResourceCapError(
                f"enumeration touched more than {self.cap} vertices"
            )


class TreeKernel:
    """Base class for tree kernels.

    Subclasses implement `children` (finite, ordered, deterministic) and
    `parent`.  Both must be pure: same vertex in, same answer out, so that
    kernels can be shared freely.
    """

    name = "abstract"
    params: dict = {}

    def children(self, v):
        raise NotImplementedError

    def parent(self, v):
        raise NotImplementedError

    def default_base(self):
        raise NotImplementedError

    def parse_vertex(self, text: str):
        raise NotImplementedError

    def format_vertex(self, v) -> str:
        raise NotImplementedError

    def generation_span(self, v) -> int | None:
        """Largest n with A(v, n) nonempty, when known structurally.

        Returns None when the kernel cannot certify a bound; series code then
        falls back to heuristics.  A return value of s means A(v, n) is empty
        for every n > s.
        """
        return None


def _parse_int_pair(text: str) -> tuple[int, int]:
    parts = text.split(",")
    if len(parts) != 2:
        raise ValueError(f"expected vertex as 'n,m', got {text!r}")
    return int(parts[0]), int(parts[1])


class ZPathKernel(TreeKernel):
    """The bilateral path: vertices are integers, m -> m+1."""

    name = "zpath"
    params: dict = {}

    def children(self, v):
        self._check(v)
        return (v + 1,)

    def parent(self, v):
        self._check(v)
        return v - 1

    def default_base(self):
        return 0

    def parse_vertex(self, text):
        return int(text)

    def format_vertex(self, v):
        return str(v)

    def generation_span(self, v):
        return 0

    @staticmethod
    def _check(v):
        if not isinstance(v, int):
            raise UnknownVertexError(f"zpath vertices are integers, got {v!r}")


class TkInfKernel(TreeKernel):
    """A bilateral spine (m, 0), m <= 0, with k rays glued below (0, 0).

    Ray vertices are (m, j) with m >= 1 and 1 <= j <= k.
    """

    name = "tkinf"

    def __init__(self, k: int) -> None:
        if k < 1:
            raise ValueError("tkinf needs k >= 1")
        self.k = k
        self.params = {"k": k}

    def _check(self, v):
        if not (isinstance(v, tuple) and len(v) == 2):
            raise UnknownVertexError(f"tkinf vertices are integer pairs, got {v!r}")
        m, j = v
        if m <= 0:
            if j != 0:
                raise UnknownVertexError(f"{v!r} is not a tkinf spine vertex")
        elif not 1 <= j <= self.k:
            raise UnknownVertexError(f"{v!r} is outside the {self.k} rays")

    def children(self, v):
        self._check(v)
        m, j = v
        if m < 0:
            return ((m + 1, 0),)
        if m == 0:
            return tuple((1, i) for i in range(1, self.k + 1))
        return ((m + 1, j),)

    def parent(self, v):
        self._check(v)
        m, j = v
        if m <= 0:
            return (m - 1, 0)
        if m == 1:
            return (0, 0)
        return (m - 1, j)

    def default_base(self):
        return (0, 0)

    def parse_vertex(self, text):
        return _parse_int_pair(text)

    def format_vertex(self, v):
        return f"{v[0]},{v[1]}"

    def generation_span(self, v):
        self._check(v)
        m, _ = v
        # Spine vertices sit alone in their generation; a ray vertex (m, j)
        # meets its k-1 cousins at shell index m and nothing later.
        return 0 if m <= 0 else m


class TqbKernel(TreeKernel):
    """Bilateral spine (0, m) with a copy of the unary tree glued at each m.

    Children of (0, m) are (0, m-1) and (1, m); above n >= 1 the rays are
    unary.  Generations are infinite, so no span is certified.
    """

    name = "tqb"
    params: dict = {}

    @staticmethod
    def _check(v):
        if not (isinstance(v, tuple) and len(v) == 2):
            raise UnknownVertexError(f"tqb vertices are integer pairs, got {v!r}")
        if v[0] < 0:
            raise UnknownVertexError(f"{v!r} has negative ray coordinate")

    def children(self, v):
        self._check(v)
        n, m = v
        if n == 0:
            return ((0, m - 1), (1, m))
        return ((n + 1, m),)

    def parent(self, v):
        self._check(v)
        n, m = v
        if n == 0:
            return (0, m + 1)
        return (n - 1, m)

    def default_base(self):
        return (0, 0)

    def parse_vertex(self, text):
        v = _parse_int_pair(text)
        self._check(v)
        return v

    def format_vertex(self, v):
        return f"{v[0]},{v[1]}"


class AdjacencyKernel(TreeKernel):
    """Finite window of a tree loaded from an adjacency description.

    Vertices are opaque string tokens.  Vertices on the declared boundary
    have truncated information (unknown children, or an unknown parent);
    querying past the boundary raises UnknownVertexError.
    """

    name = "file"

    def __init__(self, children_map, boundary, order):
        self._children = children_map
        self._boundary = frozenset(boundary)
        self._order = tuple(order)
        self._parent = {}
        for v, kids in children_map.items():
            for c in kids:
                self._parent[c] = v
        self.params = {"vertices": len(order), "boundary": sorted(self._boundary)}

    def children(self, v):
        if v in self._children:
            return self._children[v]
        if v in self._boundary:
            raise UnknownVertexError(f"children of boundary vertex {v!r} are not declared")
        raise UnknownVertexError(f"unknown vertex {v!r}")

    def parent(self, v):
        if v in self._parent:
            return self._parent[v]
        if v in self._boundary:
            raise UnknownVertexError(f"parent of boundary vertex {v!r} is not declared")
        raise UnknownVertexError(f"unknown vertex {v!r}")

    def default_base(self):
        return self._order[0]

    def parse_vertex(self, text):
        if text not in self._children and text not in self._boundary:
            raise UnknownVertexError(f"unknown vertex {text!r}")
        return text

    def format_vertex(self, v):
        return str(v)


def load_adjacency(text: str) -> AdjacencyKernel:
    """Parse the line-oriented adjacency format into a kernel.

    Each line reads `<vertex>: <child> <child> ...`; a header line
    `#boundary: <v> ...` declares the truncation boundary.  The loader
    enforces the tree contract: no self-loops, a unique parent per vertex,
    no cycles, and no leaves or missing parents away from the boundary.
    """
    children_map: dict[str, tuple[str, ...]] = {}
    boundary: set[str] = set()
    order: list[str] = []
    ordered: set[str] = set()
    seen_children: set[str] = set()

    def note(token: str) -> None:
        if token not in ordered:
            ordered.add(token)
            order.append(token)

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#boundary:"):
            boundary.update(line[len("#boundary:"):].split())
            continue
        if line.startswith("#"):
            continue
        if ":" not in line:
            raise MalformedTreeError(f"line {lineno}: expected '<vertex>: children'")
        head, _, tail = line.partition(":")
        v = head.strip()
        if not v:
            raise MalformedTreeError(f"line {lineno}: empty vertex token")
        kids = tuple(tail.split())
        if v in children_map:
            raise MalformedTreeError(f"line {lineno}: duplicate declaration of {v!r}")
        for c in kids:
            if c == v:
                raise MalformedTreeError(f"line {lineno}: self-loop at {v!r}")
            if c in seen_children:
                raise MalformedTreeError(
                    f"line {lineno}: {c!r} already has a parent (trees have unique parents)"
                )
            seen_children.add(c)
        if len(set(kids)) != len(kids):
            raise MalformedTreeError(f"line {lineno}: repeated child under {v!r}")
        children_map[v] = kids
        note(v)
        for c in kids:
            note(c)

    if not children_map:
        raise MalformedTreeError("adjacency text declares no vertices")

    declared = set(children_map)
    mentioned = declared | seen_children
    for v in boundary:
        if v not in mentioned:
            raise MalformedTreeError(f"boundary vertex {v!r} never appears in the tree")

    # Leafless away from the boundary: every mentioned vertex needs children.
    for v in sorted(mentioned - declared):
        if v not in boundary:
            raise MalformedTreeError(f"leaf detected at non-boundary vertex {v!r}")
    for v, kids in children_map.items():
        if not kids and v not in boundary:
            raise MalformedTreeError(f"leaf detected at non-boundary vertex {v!r}")

    # Rootless away from the boundary: every declared vertex needs a parent.
    for v in children_map:
        if v not in seen_children and v not in boundary:
            raise MalformedTreeError(f"vertex {v!r} has no parent and is not on the boundary")

    # Acyclic: following parents from any vertex must leave the finite window.
    parent_of = {}
    for v, kids in children_map.items():
        for c in kids:
            parent_of[c] = v
    for start in children_map:
        cur, steps = start, 0
        while cur in parent_of:
            cur = parent_of[cur]
            steps += 1
            if steps > len(mentioned):
                raise MalformedTreeError(f"parent chain from {start!r} never terminates (cycle)")

    # Order stays deterministic: first-mention order from the file.
    return AdjacencyKernel(children_map, boundary, order)


BUILTIN_TREES = ("zpath", "tkinf", "tqb")


def make_kernel(spec: str) -> TreeKernel:
    """Build a builtin kernel from a spec string like 'tqb' or 'tkinf:k=3'."""
    name, _, rest = spec.partition(":")
    name = name.strip()
    if name == "zpath":
        return ZPathKernel()
    if name == "tqb":
        return TqbKernel()
    if name == "tkinf":
        arg = rest.strip()
        if arg.startswith("k="):
            arg = arg[2:]
        if not arg:
            raise ValueError("tkinf needs a ray count, e.g. tkinf:k=3")
        return TkInfKernel(int(arg))
    raise ValueError(f"unknown tree {name!r} (builtins: {', '.join(BUILTIN_TREES)})")


# ---------------------------------------------------------------------------
# iterated maps and generation shells


def child_n(kernel: TreeKernel, v, n: int, budget: Budget | None = None):
    """Chi^n(v) as an ordered tuple; n = 0 gives (v,)."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    budget = budget or Budget()
    frontier = (v,)
    for _ in range(n):
        nxt = []
        for u in frontier:
            nxt.extend(kernel.children(u))
        budget.charge(len(nxt))
        frontier = tuple(nxt)
    return frontier


def par_n(kernel: TreeKernel, v, n: int):
    """par^n(v); n = 0 gives v."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    for _ in range(n):
        v = kernel.parent(v)
    return v


def enum_A(kernel: TreeKernel, v, n: int, budget: Budget | None = None):
    """The shell A(v, n), via the child-of-previous-shell recursion.

    A(v, 1) = Chi(par(v)) minus v, and A(v, n) = Chi(A(par(v), n-1)); the
    unrolled form walks n steps up, drops the one branch leading back down
    to v, and expands the rest n-1 steps.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n == 0:
        return (v,)
    budget = budget or Budget()
    top = v
    for _ in range(n - 1):
        top = kernel.parent(top)
    anchor = kernel.parent(top)
    frontier = [c for c in kernel.children(anchor) if c != top]
    budget.charge(len(frontier))
    for _ in range(n - 1):
        nxt = []
        for u in frontier:
            nxt.extend(kernel.children(u))
        budget.charge(len(nxt))
        frontier = nxt
    return tuple(frontier)


def enum_A_definitional(kernel: TreeKernel, v, n: int, budget: Budget | None = None):
    """A(v, n) straight from the definition: Chi^n(par^n(v)) minus Chi^(n-1)(par^(n-1)(v)).

    Kept as an independent oracle for the recursive route above.
    """
    if n == 0:
        return (v,)
    budget = budget or Budget()
    big = child_n(kernel, par_n(kernel, v, n), n, budget)
    small = set(child_n(kernel, par_n(kernel, v, n - 1), n - 1, budget))
    return tuple(u for u in big if u not in small)


def same_generation(kernel: TreeKernel, u, v, n_max: int = 64) -> int | None:
    """Least n with par^n(u) = par^n(v), or None if not found by n_max.

    The relation is only semi-decidable on a lazy kernel, so the negative
    answer is bounded.  On file-backed kernels a walk that crosses the
    declared boundary also yields None: the data cannot certify a match.
    """
    a, b = u, v
    for n in range(n_max + 1):
        if a == b:
            return n
        try:
            a = kernel.parent(a)
            b = kernel.parent(b)
        except UnknownVertexError:
            return None
    return None


# ---------------------------------------------------------------------------
# windows and paths


@dataclass(frozen=True)
class Window:
    """Anchored finite patch: depth_up parent steps, then a subtree sweep.

    The vertex set is every u reachable as Chi^j(par^i(base)) with
    i <= depth_up and j <= i + depth_down, which works out to the full
    subtree of depth depth_up + depth_down below par^depth_up(base).
    """

    base: object
    depth_up: int
    depth_down: int

    def __post_init__(self):
        if self.depth_up < 0 or self.depth_down < 0:
            raise ValueError("window depths must be nonnegative")


def window_vertices(kernel: TreeKernel, w: Window, budget: Budget | None = None):
    """Deterministic enumeration of the window: BFS from the top anchor."""
    budget = budget or Budget()
    top = par_n(kernel, w.base, w.depth_up)
    out = [top]
    budget.charge()
    level = [top]
    for _ in range(w.depth_up + w.depth_down):
        nxt = []
        for u in level:
            nxt.extend(kernel.children(u))
        budget.charge(len(nxt))
        out.extend(nxt)
        level = nxt
    return out


def window_depth_classes(kernel: TreeKernel, w: Window, budget: Budget | None = None):
    """Window vertices grouped by depth below the top anchor.

    Inside a window all members of one generation sit at equal depth, so
    these classes refine generations exactly.
    """
    budget = budget or Budget()
    top = par_n(kernel, w.base, w.depth_up)
    classes = [[top]]
    budget.charge()
    level = [top]
    for _ in range(w.depth_up + w.depth_down):
        nxt = []
        for u in level:
            nxt.extend(kernel.children(u))
        budget.charge(len(nxt))
        classes.append(nxt)
        level = nxt
    return classes


class BilateralPath:
    """Canonical two-sided path with v_0 = anchor.

    Forward steps take the least child under the vertex order (a fixed,
    reproducible stand-in for an arbitrary choice); backward steps take
    parents.  Vertices are memoized as the path grows.
    """

    def __init__(self, kernel: TreeKernel, anchor, chooser=None):
        self.kernel = kernel
        self.anchor = anchor
        self._chooser = chooser or min
        self._fwd = [anchor]
        self._back: list = []

    def __getitem__(self, m: int):
        if m >= 0:
            while len(self._fwd) <= m:
                self._fwd.append(self._chooser(self.kernel.children(self._fwd[-1])))
            return self._fwd[m]
        while len(self._back) < -m:
            prev = self._back[-1] if self._back else self.anchor
            self._back.append(self.kernel.parent(prev))
        return self._back[-m - 1]

    def range(self, m_lo: int, m_hi: int) -> list:
        if m_lo > m_hi:
            raise ValueError("m_lo must not exceed m_hi")
        return [self[m] for m in range(m_lo, m_hi + 1)]


def bilateral_path(kernel: TreeKernel, v0, m_lo: int, m_hi: int) -> list:
    """The canonical path segment (v_m) for m_lo <= m <= m_hi."""
    if not m_lo <= 0 <= m_hi:
        raise ValueError("path range must contain 0")
    return BilateralPath(kernel, v0).range(m_lo, m_hi)
