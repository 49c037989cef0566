"""Weight systems on trees: moments, shift-power norms, the Cauchy dual,
balancedness and boundedness diagnostics, and the builtin families.

All weight products are carried in log space; a moment over hundreds of
generations would otherwise leave the double range.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

from .errors import DegenerateNormError, MissingWeightError
from .tree_core import (Budget, TkInfKernel, TreeKernel, Window, same_generation,
                        window_depth_classes, window_vertices)


class WeightSystem:
    """Positive weight per vertex, plus family metadata.

    Subclasses implement `weight`; `log_weight` may be overridden when a
    closed form in log space is cheaper or more accurate.
    """

    name = "custom"
    params: dict = {}
    dual_depth = 0

    def weight(self, v) -> float:
        raise NotImplementedError

    def log_weight(self, v) -> float:
        w = self.weight(v)
        if w <= 0.0 or math.isnan(w):
            raise ValueError(f"weight at {v!r} must be positive, got {w!r}")
        return math.log(w)


class ConstantWeights(WeightSystem):
    name = "constant"

    def __init__(self, c: float) -> None:
        c = float(c)
        if c <= 0.0:
            raise ValueError("constant weight must be positive")
        self.c = c
        self.params = {"c": c}
        self._log = math.log(c)

    def weight(self, v) -> float:
        return self.c

    def log_weight(self, v) -> float:
        return self._log


class FunctionWeights(WeightSystem):
    """Weights given by an arbitrary function; mainly for custom scenarios."""

    def __init__(self, fn, name: str = "custom", params: dict | None = None) -> None:
        self._fn = fn
        self.name = name
        self.params = dict(params or {})

    def weight(self, v) -> float:
        w = float(self._fn(v))
        if w <= 0.0 or math.isnan(w):
            raise ValueError(f"weight at {v!r} must be positive, got {w!r}")
        return w


class PolyRule:
    """Rule m -> positive coefficient: a constant, or a table with a default.

    The default doubles as the eventual value, which lets series code
    integrate tails once the table entries are exhausted.
    """

    def __init__(self, default: float, table: dict[int, float] | None = None) -> None:
        self.default = float(default)
        self.table = {int(k): float(v) for k, v in (table or {}).items()}
        if self.default <= 0.0 or any(v <= 0.0 for v in self.table.values()):
            raise ValueError("polynomial coefficients must be positive")

    def __call__(self, m: int) -> float:
        return self.table.get(m, self.default)

    def settled_after(self) -> int | None:
        """Index past which the rule equals its default; None for constants."""
        return max(self.table) if self.table else None

    def spec(self) -> str:
        if not self.table:
            return f"const:{self.default!r}"
        entries = ",".join(f"{k}={self.table[k]!r}" for k in sorted(self.table))
        return f"table:{entries},default={self.default!r}"

    @classmethod
    def parse(cls, text: str) -> "PolyRule":
        kind, _, rest = text.partition(":")
        if kind == "const":
            return cls(float(rest))
        if kind == "table":
            default = None
            table: dict[int, float] = {}
            for item in rest.split(","):
                key, _, val = item.partition("=")
                if not val:
                    raise ValueError(f"bad table entry {item!r}")
                if key.strip() == "default":
                    default = float(val)
                else:
                    table[int(key)] = float(val)
            if default is None:
                raise ValueError("table rule needs a default entry")
            return cls(default, table)
        raise ValueError(f"unknown rule {text!r} (use const:<x> or table:m=x,...,default=<x>)")


class Prop51Weights(WeightSystem):
    """The quadratic-polynomial weight family on the quasi-Brownian tree.

    p_m(x) = 1 + a_m x + b_m x^2 with positive coefficient rules a, b.
    Weights:

        (n, m), n >= 2       sqrt(p_m(n-1) / p_m(n-2))
        (0, m), m >= 1       sqrt(m / (m+1))
        (1, m), m >= 1       1 / sqrt(m)
        (0|1, m), m < 1      1
    """

    name = "prop51"

    def __init__(self, a: PolyRule, b: PolyRule, label: str | None = None) -> None:
        self.a = a
        self.b = b
        if label:
            self.name = label
        self.params = {"a": a.spec(), "b": b.spec()}

    def p(self, m: int, x: float) -> float:
        return 1.0 + self.a(m) * x + self.b(m) * x * x

    def weight(self, v) -> float:
        n, m = v
        if n >= 2:
            return math.sqrt(self.p(m, n - 1) / self.p(m, n - 2))
        if m >= 1:
            return math.sqrt(m / (m + 1.0)) if n == 0 else 1.0 / math.sqrt(m)
        return 1.0

    def log_weight(self, v) -> float:
        n, m = v
        if n >= 2:
            return 0.5 * (math.log(self.p(m, n - 1)) - math.log(self.p(m, n - 2)))
        if m >= 1:
            if n == 0:
                return 0.5 * (math.log(m) - math.log(m + 1.0))
            return -0.5 * math.log(m)
        return 0.0

    def sample_certificate(self, ms) -> dict:
        """Window-sampled stand-ins for the family's global hypotheses.

        Suprema/infima over all of Z are not decidable from samples; callers
        must treat these numbers as window-certified only.
        """
        avals = [self.a(m) for m in ms]
        bvals = [self.b(m) for m in ms]
        return {
            "sup_a_sampled": max(avals),
            "sup_b_sampled": max(bvals),
            "inf_b_sampled": min(bvals),
            "sampled_ms": [min(ms), max(ms)],
        }


def ex52_weights() -> Prop51Weights:
    """The all-ones polynomial instance: p_m(x) = 1 + x + x^2 for every m."""
    return Prop51Weights(PolyRule(1.0), PolyRule(1.0), label="ex52")


class TkinfIsometricWeights(WeightSystem):
    """On the k-ray tree: 1/sqrt(k) entering each ray, 1 elsewhere.

    Every one-step norm is 1, so the shift is an exact isometry.
    """

    name = "tkinf-isometric"

    def __init__(self, k: int) -> None:
        if k < 1:
            raise ValueError("need k >= 1")
        self.k = k
        self.params = {"k": k}

    def weight(self, v) -> float:
        m, _ = v
        return 1.0 / math.sqrt(self.k) if m == 1 else 1.0

    def log_weight(self, v) -> float:
        m, _ = v
        return -0.5 * math.log(self.k) if m == 1 else 0.0


class CsvWeights(WeightSystem):
    name = "csv"

    def __init__(self, mapping: dict, source: str = "<memory>") -> None:
        self._mapping = mapping
        self.params = {"source": source, "entries": len(mapping)}

    def weight(self, v) -> float:
        try:
            return self._mapping[v]
        except KeyError:
            raise MissingWeightError(f"no weight on file for vertex {v!r}") from None


def load_weight_csv(text: str, kernel: TreeKernel, source: str = "<memory>") -> CsvWeights:
    """Parse `vertex,weight` rows; vertices in the kernel's CLI syntax."""
    mapping: dict = {}
    reader = csv.reader(io.StringIO(text))
    for row in reader:
        if not row or row[0].strip().startswith("#"):
            continue
        if [c.strip().lower() for c in row[:2]] == ["vertex", "weight"]:
            continue
        if len(row) < 2:
            raise ValueError(f"weight row needs two fields, got {row!r}")
        v = kernel.parse_vertex(row[0].strip())
        w = float(row[1])
        if w <= 0.0:
            raise ValueError(f"weight for {row[0]!r} must be positive")
        mapping[v] = w
    if not mapping:
        raise ValueError("weight file is empty")
    return CsvWeights(mapping, source)


# ---------------------------------------------------------------------------
# moments and norms


@dataclass(frozen=True)
class MomentValue:
    """log of the n-step ancestor weight product ending at u."""

    u: object
    n: int
    log_value: float

    @property
    def value(self) -> float:
        return math.exp(self.log_value)


def moment_log(ws: WeightSystem, kernel: TreeKernel, u, n: int) -> float:
    """log lambda^(n)(u) = sum of log weights along u, par(u), ..., par^(n-1)(u)."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    total = 0.0
    x = u
    for _ in range(n):
        total += ws.log_weight(x)
        x = kernel.parent(x)
    return total


def moment(ws: WeightSystem, kernel: TreeKernel, u, n: int) -> MomentValue:
    return MomentValue(u, n, moment_log(ws, kernel, u, n))


def shift_norm_sq(ws: WeightSystem, kernel: TreeKernel, u, n: int = 1,
                  budget: Budget | None = None) -> float:
    """Squared norm of the n-th shift power applied to the basis vector at u.

    Equals the sum over Chi^n(u) of the squared n-step moments; accumulated
    with exact summation over the expanded frontier.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n == 0:
        return 1.0
    budget = budget or Budget()
    frontier = [(u, 0.0)]
    for _ in range(n):
        nxt = []
        for x, acc in frontier:
            for c in kernel.children(x):
                nxt.append((c, acc + ws.log_weight(c)))
        budget.charge(len(nxt))
        frontier = nxt
    return math.fsum(math.exp(2.0 * acc) for _, acc in frontier)


# ---------------------------------------------------------------------------
# Cauchy dual


class CauchyDualWeights(WeightSystem):
    """The dual system: each weight divided by the one-step squared norm at
    its parent.  Norms are memoized per parent vertex."""

    def __init__(self, primal: WeightSystem, kernel: TreeKernel, eps: float = 1e-12) -> None:
        self.primal = primal
        self.kernel = kernel
        self.eps = eps
        self.dual_depth = primal.dual_depth + 1
        self.name = primal.name
        self.params = {"dual_of": primal.name, "dual_depth": self.dual_depth, **primal.params}
        self._norm_cache: dict = {}

    def _parent_norm_sq(self, v) -> float:
        u = self.kernel.parent(v)
        hit = self._norm_cache.get(u)
        if hit is None:
            hit = shift_norm_sq(self.primal, self.kernel, u, 1)
            if hit < self.eps:
                raise DegenerateNormError(
                    f"one-step norm at {u!r} fell below {self.eps}; dual undefined"
                )
            self._norm_cache[u] = hit
        return hit

    def weight(self, v) -> float:
        return self.primal.weight(v) / self._parent_norm_sq(v)

    def log_weight(self, v) -> float:
        return self.primal.log_weight(v) - math.log(self._parent_norm_sq(v))


def cauchy_dual(ws: WeightSystem, kernel: TreeKernel, eps: float = 1e-12) -> CauchyDualWeights:
    """Dual weight system.  Applying it twice recomputes the original
    numerically; the round trip is a checked property, not a shortcut."""
    return CauchyDualWeights(ws, kernel, eps)


def family_root(ws: WeightSystem) -> tuple[WeightSystem, int]:
    """Unwrap dual layers: (underlying primal system, number of layers)."""
    depth = 0
    while isinstance(ws, CauchyDualWeights):
        ws = ws.primal
        depth += 1
    return ws, depth


# ---------------------------------------------------------------------------
# window diagnostics


@dataclass(frozen=True)
class BalancedReport:
    verdict: str                 # "balanced" | "not_balanced" | "inconclusive"
    witness: tuple | None        # (u, v, norm_sq_u, norm_sq_v)
    class_count: int
    n_max: int
    tol: float


def is_balanced(ws: WeightSystem, kernel: TreeKernel, window: Window,
                n_max: int = 64, tol: float = 1e-10) -> BalancedReport:
    """Compare one-step norms within each generation class of the window.

    Classes come from the window's depth structure and are certified pairwise
    with `same_generation`; if the bound n_max is too small to certify the
    window's deepest class, the positive answer degrades to "inconclusive"
    (a negative witness is definitive either way).
    """
    classes = window_depth_classes(kernel, window)
    certified = True
    for cls in classes:
        for u, v in zip(cls, cls[1:]):
            if same_generation(kernel, u, v, n_max) is None:
                certified = False
    norm_classes = [[(v, shift_norm_sq(ws, kernel, v, 1)) for v in cls] for cls in classes]
    for cls in norm_classes:
        lead_v, lead = cls[0]
        for v, val in cls[1:]:
            if abs(val - lead) > tol:
                return BalancedReport("not_balanced", (lead_v, v, lead, val),
                                      len(classes), n_max, tol)
    verdict = "balanced" if certified else "inconclusive"
    return BalancedReport(verdict, None, len(classes), n_max, tol)


@dataclass(frozen=True)
class NormIncreasingReport:
    verdict: str                 # "norm_increasing" | "not_norm_increasing"
    witness: tuple | None        # (v, norm_sq)
    min_norm_sq: float
    tol: float


def is_norm_increasing(ws: WeightSystem, kernel: TreeKernel, window: Window,
                       tol: float = 1e-9) -> NormIncreasingReport:
    """Check 1 - ||S e_v||^2 <= tol at every window vertex."""
    worst_v, worst = None, math.inf
    for v in window_vertices(kernel, window):
        val = shift_norm_sq(ws, kernel, v, 1)
        if val < worst:
            worst_v, worst = v, val
    if worst < 1.0 - tol:
        return NormIncreasingReport("not_norm_increasing", (worst_v, worst), worst, tol)
    return NormIncreasingReport("norm_increasing", None, worst, tol)


def boundedness_estimate(ws: WeightSystem, kernel: TreeKernel, window: Window) -> float:
    """Largest one-step squared norm over the window.

    A boundedness certificate for the sampled window only; nothing global
    can be concluded from a finite sample.
    """
    return max(shift_norm_sq(ws, kernel, v, 1) for v in window_vertices(kernel, window))


# ---------------------------------------------------------------------------
# family construction from CLI-style specs


def make_weights(spec: str, kernel: TreeKernel,
                 a_rule: str | None = None, b_rule: str | None = None) -> WeightSystem:
    """Build a weight system from a spec string.

    Forms: `constant:<c>`, `ex52`, `prop51` (rules from a_rule/b_rule),
    `tkinf-isometric[:k=<int>]` (k defaults to the kernel's ray count),
    `csv:<path>`.
    """
    name, _, rest = spec.partition(":")
    name = name.strip()
    if name == "constant":
        val = rest[2:] if rest.startswith("c=") else rest
        if not val:
            raise ValueError("constant weights need a value, e.g. constant:1")
        return ConstantWeights(float(val))
    if name == "ex52":
        return ex52_weights()
    if name == "prop51":
        if not (a_rule and b_rule):
            raise ValueError("prop51 needs coefficient rules (--a and --b)")
        return Prop51Weights(PolyRule.parse(a_rule), PolyRule.parse(b_rule))
    if name == "tkinf-isometric":
        arg = rest[2:] if rest.startswith("k=") else rest
        if arg:
            k = int(arg)
        elif isinstance(kernel, TkInfKernel):
            k = kernel.k
        else:
            raise ValueError("tkinf-isometric needs k, e.g. tkinf-isometric:k=3")
        return TkinfIsometricWeights(k)
    if name == "csv":
        if not rest:
            raise ValueError("csv weights need a path, e.g. csv:weights.csv")
        with open(rest, "r", encoding="utf-8") as fh:
            return load_weight_csv(fh.read(), kernel, source=rest)
    raise ValueError(f"unknown weight family {name!r}")
