"""The branch-ratio series: partial sums, convergence verdicts, hyper-range
vectors, and the range criterion.

The series attached to a vertex v sums, over the shells A(v, n), the squared
ratios of n-step moments against the moment of v itself.  Convergence of this
series is the pivot the decomposition verdict turns on.  Numerically a series
has three possible answers, not two; verdicts carry their evidence and an
honest method tag.  Exact answers exist only where structure provides them:
kernels that certify finite generations, and builtin families whose term laws
are verified in-run before being extrapolated.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import asdict, dataclass, field

from .errors import DivergentSeriesError, UndecidedSeriesError
from .numerics import NeumaierSum, quadratic_tail_integral
from .operator import SparseVector, apply_power, apply_shift
from .tree_core import (Budget, TqbKernel, TreeKernel, BilateralPath, child_n,
                        par_n, same_generation)
from .weights import (ConstantWeights, Prop51Weights, WeightSystem, family_root,
                      moment_log, shift_norm_sq)


@dataclass
class SeriesConfig:
    n_max: int = 10_000          # generations examined by the heuristic
    threshold: float = 1e6       # partial-sum divergence cutoff
    window: int = 50             # nonzero terms used for ratio fitting
    delta: float = 0.05          # dead zone around ratio 1
    term_floor: float = 1e-2     # lower bound that certifies divergence
    analytic_terms: int = 2000   # closed-form terms summed by plugins
    use_plugins: bool = True
    premise_tol: float = 1e-9    # closed-form agreement required of plugins

    def to_json(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# term stream and partial sums


def generation_stream(ws: WeightSystem, kernel: TreeKernel, v):
    """Yield (n, [(u, rel_log)]) for n = 0, 1, 2, ...

    rel_log is log of the moment ratio lambda^(n)(u) / lambda^(n)(v) for
    u in A(v, n).  Each generation enumerates within its own resource budget;
    per-generation cost grows with n because fresh branches must be walked
    down from the ancestor line.
    """
    yield 0, [(v, 0.0)]
    top = v          # par^(n-1)(v) while producing generation n
    base_log = 0.0   # log moment of v at order n, updated incrementally
    n = 1
    while True:
        budget = Budget()
        base_log += ws.log_weight(top)
        anchor = kernel.parent(top)
        fresh = [(c, ws.log_weight(c)) for c in kernel.children(anchor) if c != top]
        budget.charge(len(fresh) + 1)
        for _ in range(n - 1):
            nxt = []
            for u, acc in fresh:
                for c in kernel.children(u):
                    nxt.append((c, acc + ws.log_weight(c)))
            budget.charge(len(nxt))
            fresh = nxt
        yield n, [(u, acc - base_log) for u, acc in fresh]
        top = anchor
        n += 1


def _term_value(members) -> float:
    total = 0.0
    for _, rel_log in members:
        e = 2.0 * rel_log
        total += math.inf if e > 700.0 else math.exp(e)
    return total


def alpha_terms(ws: WeightSystem, kernel: TreeKernel, v):
    """Yield (n, t_n) with t_n the n-th generation's squared-ratio sum."""
    for n, members in generation_stream(ws, kernel, v):
        yield n, _term_value(members)


@dataclass
class AlphaPartial:
    """Terms and partial sums of the series at v, up to generation N."""

    v: object
    N: int
    terms: list
    partials: list
    error_bound: float

    @property
    def value(self) -> float:
        return self.partials[-1]

    def to_rows(self):
        return [(n, self.terms[n], self.partials[n]) for n in range(self.N + 1)]


def alpha_partial(ws: WeightSystem, kernel: TreeKernel, v, N: int) -> AlphaPartial:
    if N < 0:
        raise ValueError("N must be nonnegative")
    acc = NeumaierSum()
    terms, partials = [], []
    for n, t in alpha_terms(ws, kernel, v):
        if n > N:
            break
        acc.add(t)
        terms.append(t)
        partials.append(acc.value)
    return AlphaPartial(v, N, terms, partials, acc.error_bound)


# ---------------------------------------------------------------------------
# verdicts


@dataclass
class SeriesVerdict:
    vertex: object
    kind: str                    # "converged" | "diverged" | "inconclusive"
    method: str                  # "analytic" | "heuristic"
    value: float | None = None
    tail_bound: float | None = None
    evidence: dict = field(default_factory=dict)
    n_used: int = 0

    @classmethod
    def converged(cls, vertex, value, tail_bound, method, evidence, n_used):
        if tail_bound is None or tail_bound < 0:
            raise ValueError("a convergence verdict needs a nonnegative tail bound")
        return cls(vertex, "converged", method, value, tail_bound, evidence, n_used)

    @classmethod
    def diverged(cls, vertex, method, evidence, n_used):
        if not evidence:
            raise ValueError("a divergence verdict needs explicit evidence")
        return cls(vertex, "diverged", method, None, None, evidence, n_used)

    @classmethod
    def inconclusive(cls, vertex, evidence, n_used):
        return cls(vertex, "inconclusive", "heuristic", None, None, evidence, n_used)

    @property
    def definitive(self) -> bool:
        return self.kind != "inconclusive" and self.method == "analytic"

    def to_json(self, kernel: TreeKernel) -> dict:
        return {
            "vertex": kernel.format_vertex(self.vertex),
            "verdict": self.kind,
            "value": self.value,
            "tail_bound": self.tail_bound,
            "evidence": {**self.evidence, "n_used": self.n_used},
            "method": self.method,
        }


def alpha_verdict(ws: WeightSystem, kernel: TreeKernel, v,
                  config: SeriesConfig | None = None) -> SeriesVerdict:
    """Three-valued convergence decision for the series at v.

    Resolution order: structural finite-generation bounds (exact), then
    family plugins (exact laws, verified in-run against the term stream and
    abandoned on mismatch), then the sampling heuristic.
    """
    cfg = config or SeriesConfig()
    span = kernel.generation_span(v)
    if span is not None:
        return _finite_generation_verdict(ws, kernel, v, span)
    if cfg.use_plugins:
        for plugin in PLUGINS:
            out = plugin(ws, kernel, v, cfg)
            if out is not None:
                return out
    return _heuristic_verdict(ws, kernel, v, cfg)


def _finite_generation_verdict(ws, kernel, v, span) -> SeriesVerdict:
    acc = NeumaierSum()
    for n, t in alpha_terms(ws, kernel, v):
        if n > span:
            break
        acc.add(t)
    evidence = {"rule": "finite-generation", "span": span}
    return SeriesVerdict.converged(v, acc.value, acc.error_bound, "analytic",
                                   evidence, span)


def _heuristic_verdict(ws, kernel, v, cfg: SeriesConfig) -> SeriesVerdict:
    acc = NeumaierSum()
    recent: deque = deque(maxlen=cfg.window)   # (n, t) for nonzero t
    empty_run = 0
    n_seen = 0
    for n, t in alpha_terms(ws, kernel, v):
        n_seen = n
        if not math.isfinite(t):
            return SeriesVerdict.diverged(
                v, "heuristic", {"rule": "overflow", "n": n}, n)
        acc.add(t)
        if acc.value > cfg.threshold:
            return SeriesVerdict.diverged(
                v, "heuristic",
                {"rule": "threshold", "partial": acc.value, "threshold": cfg.threshold, "n": n}, n)
        if t == 0.0:
            empty_run += 1
            if empty_run >= cfg.window:
                # A window-long run of empty generations with a finite total:
                # treated as an exhausted (finite) generation.  Kernels that
                # can actually certify exhaustion never reach this code path,
                # so the tag stays heuristic.
                return SeriesVerdict.converged(
                    v, acc.value, acc.error_bound, "heuristic",
                    {"rule": "empty-run", "run": empty_run, "n": n}, n)
        else:
            empty_run = 0
            recent.append((n, t))
        if n >= cfg.n_max:
            break

    if len(recent) < cfg.window:
        return SeriesVerdict.inconclusive(
            v, {"rule": "insufficient-terms", "nonzero_terms": len(recent)}, n_seen)

    slopes = []
    pairs = list(recent)
    for (n0, t0), (n1, t1) in zip(pairs, pairs[1:]):
        slopes.append((math.log(t1) - math.log(t0)) / (n1 - n0))
    mean = math.fsum(slopes) / len(slopes)
    sigma = math.sqrt(math.fsum((s - mean) ** 2 for s in slopes) / len(slopes))
    ratio = math.exp(mean)
    n_last, t_last = pairs[-1]

    if ratio > 1.0 + cfg.delta:
        return SeriesVerdict.diverged(
            v, "heuristic", {"rule": "growth", "ratio": ratio, "sigma": sigma}, n_seen)
    if ratio < 1.0 - cfg.delta:
        r_hi = min(math.exp(mean + 2.0 * sigma), 1.0 - cfg.delta / 2.0)
        r_lo = max(math.exp(mean - 2.0 * sigma), 0.0)
        tail = t_last * ratio / (1.0 - ratio)
        spread = t_last * (r_hi / (1.0 - r_hi) - r_lo / (1.0 - r_lo))
        return SeriesVerdict.converged(
            v, acc.value + tail, abs(spread) + acc.error_bound, "heuristic",
            {"rule": "geometric-ratio", "ratio": ratio, "sigma": sigma, "tail": tail},
            n_seen)
    floor = min(t for _, t in pairs)
    if floor >= cfg.term_floor:
        return SeriesVerdict.diverged(
            v, "heuristic", {"rule": "term-floor", "floor": floor}, n_seen)
    return SeriesVerdict.inconclusive(
        v, {"rule": "undecided", "ratio": ratio, "sigma": sigma}, n_seen)


# ---------------------------------------------------------------------------
# analytic plugins: exact term laws, verified against the stream before use


def _sampled_terms(ws, kernel, v, upto):
    out = []
    for n, t in alpha_terms(ws, kernel, v):
        if n > upto:
            break
        out.append(t)
    return out


def _plugin_prop51(ws, kernel, v, cfg: SeriesConfig):
    """Term laws for the polynomial family on the quasi-Brownian tree.

    Primal: terms grow like the quadratic p itself; divergence.  Dual: past
    the vertex's ray depth the terms obey t_l = K / p_{mu(l)}(l-1) with a
    constant K; the plugin fits K, verifies constancy, sums the closed form,
    and brackets the tail by an integral.
    """
    if not isinstance(kernel, TqbKernel):
        return None
    root, depth = family_root(ws)
    if not isinstance(root, Prop51Weights) or depth > 1:
        return None
    n0, m0 = v

    if depth == 0:
        upto = max(40, n0 + 24)
        terms = _sampled_terms(ws, kernel, v, upto)
        fit_lo = max(n0 + 1, upto - 16)
        ks = []
        for l in range(fit_lo, upto + 1):
            mu = m0 + l - n0
            ks.append(terms[l] / root.p(mu, l - 1))
        k_fit = math.fsum(ks) / len(ks)
        if k_fit <= 0.0 or not math.isfinite(k_fit):
            return None
        rel_resid = max(abs(k - k_fit) for k in ks) / k_fit
        if rel_resid > cfg.premise_tol:
            return None
        evidence = {"rule": "quadratic-minorant", "K": k_fit,
                    "fit_residual": rel_resid, "sampled_upto": upto}
        return SeriesVerdict.diverged(v, "analytic", evidence, upto)

    # Dual layer: fit the tail law on stream terms, then extrapolate.
    pre = max(60, n0 + 24)
    terms = _sampled_terms(ws, kernel, v, pre)
    fit_lo = max(n0 + 1, pre - 16)
    ks = []
    for l in range(fit_lo, pre + 1):
        mu = m0 + l - n0
        ks.append(terms[l] * root.p(mu, l - 1))
    k_fit = math.fsum(ks) / len(ks)
    if k_fit <= 0.0 or not math.isfinite(k_fit):
        return None
    rel_resid = max(abs(k - k_fit) for k in ks) / k_fit
    if rel_resid > cfg.premise_tol:
        return None

    a_tail, b_tail = root.a.default, root.b.default
    settles = [s for s in (root.a.settled_after(), root.b.settled_after())
               if s is not None]
    settle = max(settles) if settles else None
    n_terms = max(cfg.analytic_terms, pre + 10)
    if settle is not None:
        n_terms = max(n_terms, settle + n0 - m0 + 10)

    acc = NeumaierSum()
    for t in terms:
        acc.add(t)
    for l in range(pre + 1, n_terms + 1):
        mu = m0 + l - n0
        acc.add(k_fit / root.p(mu, l - 1))

    upper = k_fit * quadratic_tail_integral(a_tail, b_tail, float(n_terms - 1))
    lower = k_fit * quadratic_tail_integral(a_tail, b_tail, float(n_terms))
    value = acc.value + 0.5 * (upper + lower)
    tail_bound = 0.5 * (upper - lower) + acc.error_bound + rel_resid * value
    evidence = {"rule": "polynomial-tail", "K": k_fit, "fit_residual": rel_resid,
                "terms": n_terms, "tail_window": [lower, upper]}
    return SeriesVerdict.converged(v, value, tail_bound, "analytic", evidence, n_terms)


def _plugin_constant(ws, kernel, v, cfg: SeriesConfig):
    """Constant weights on the quasi-Brownian tree.

    Primal terms count the singleton shells (eventually exactly 1 per
    generation); the dual terms grow by a factor 4 per generation whatever
    the constant is.  Both diverge.
    """
    if not isinstance(kernel, TqbKernel):
        return None
    root, depth = family_root(ws)
    if not isinstance(root, ConstantWeights) or depth > 1:
        return None
    n0, _ = v
    upto = max(30, n0 + 12)
    terms = _sampled_terms(ws, kernel, v, upto)
    tail = terms[n0 + 1:]

    if depth == 0:
        if not tail or any(abs(t - 1.0) > cfg.premise_tol for t in tail):
            return None
        evidence = {"rule": "counting", "term": 1.0, "sampled_upto": upto}
        return SeriesVerdict.diverged(v, "analytic", evidence, upto)

    ratios = [b / a for a, b in zip(tail, tail[1:]) if a > 0.0]
    if len(ratios) < 6 or any(abs(r - 4.0) > 4.0 * cfg.premise_tol for r in ratios):
        return None
    evidence = {"rule": "geometric-growth", "ratio": 4.0, "sampled_upto": upto}
    return SeriesVerdict.diverged(v, "analytic", evidence, upto)


PLUGINS = (_plugin_prop51, _plugin_constant)


# ---------------------------------------------------------------------------
# cross-vertex consistency


@dataclass
class GenerationInvarianceReport:
    u: object
    v: object
    verdict_u: SeriesVerdict
    verdict_v: SeriesVerdict
    consistent: bool
    note: str = ""


def generation_invariance_check(ws, kernel, u, v, config=None,
                                n_max: int = 64) -> GenerationInvarianceReport:
    """Same-generation vertices must agree on convergence.

    A converged/diverged split between them is flagged as an internal
    inconsistency (the theory forbids it, so the numerics are at fault);
    inconclusive pairs pass vacuously.
    """
    if same_generation(kernel, u, v, n_max) is None:
        raise ValueError(f"{u!r} and {v!r} are not provably in the same generation")
    a = alpha_verdict(ws, kernel, u, config)
    b = alpha_verdict(ws, kernel, v, config)
    kinds = {a.kind, b.kind}
    consistent = not ({"converged", "diverged"} <= kinds)
    note = "" if consistent else "bug-level inconsistency: convergence split a generation"
    return GenerationInvarianceReport(u, v, a, b, consistent, note)


# ---------------------------------------------------------------------------
# hyper-range vectors


@dataclass
class HyperRangeVector:
    """Truncation of the basis vector spanning the m-th hyper-range line."""

    m: int
    vertex: object
    vector: SparseVector
    N: int
    gen_support: list
    tail_mass: float
    alpha_value: float | None
    verdict: SeriesVerdict

    @property
    def is_zero(self) -> bool:
        return len(self.vector) == 0


def g_vector(ws: WeightSystem, kernel: TreeKernel, path: BilateralPath, m: int,
             N: int, config: SeriesConfig | None = None) -> HyperRangeVector:
    """Truncated coefficients of g_m along the path, with a tail-mass bound.

    When the series at v_m diverges the vector is zero by definition; an
    inconclusive verdict refuses to guess.
    """
    v = path[m]
    verdict = alpha_verdict(ws, kernel, v, config)
    if verdict.kind == "diverged":
        return HyperRangeVector(m, v, SparseVector({}), N, [], 0.0, None, verdict)
    if verdict.kind == "inconclusive":
        raise UndecidedSeriesError(
            f"series verdict at {v!r} is inconclusive; cannot build g_{m}")
    entries: dict = {}
    gen_support = []
    partial = NeumaierSum()
    for n, members in generation_stream(ws, kernel, v):
        if n > N:
            break
        gen_support.append(tuple(u for u, _ in members))
        for u, rel_log in members:
            c = math.exp(rel_log)
            entries[u] = c
            partial.add(c * c)
    tail_mass = max(verdict.value - partial.value, 0.0) + verdict.tail_bound
    return HyperRangeVector(m, v, SparseVector(entries), N, gen_support,
                            tail_mass, verdict.value, verdict)


@dataclass
class RecurrenceReport:
    m: int
    residual: float
    tail_allowance: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.residual <= self.tol + self.tail_allowance


def hyperrange_recurrence_check(ws: WeightSystem, kernel: TreeKernel,
                                path: BilateralPath, m: int, N: int,
                                tol: float = 1e-10,
                                config: SeriesConfig | None = None) -> RecurrenceReport:
    """Residual of S g_m = lambda_{v_{m+1}} g_{m+1} on the common truncation.

    The shifted vector reaches one generation past g_{m+1}'s truncation;
    the comparison drops that frontier and budgets both tails.
    """
    g_m = g_vector(ws, kernel, path, m, N, config)
    g_next = g_vector(ws, kernel, path, m + 1, N, config)
    if g_m.is_zero or g_next.is_zero:
        raise DivergentSeriesError("recurrence check needs finite series on the path")
    lam = ws.weight(path[m + 1])
    shifted = apply_shift(ws, kernel, g_m.vector)
    common = set()
    for gen in g_next.gen_support:
        common.update(gen)
    diff = shifted.add(g_next.vector, -lam).restrict(common)
    s_sup = math.sqrt(shift_norm_sq(ws, kernel, path[m], 1))
    allowance = s_sup * math.sqrt(g_m.tail_mass) + lam * math.sqrt(g_next.tail_mass)
    return RecurrenceReport(m, diff.norm(), allowance, tol)


# ---------------------------------------------------------------------------
# range criterion


@dataclass
class RangeMembershipReport:
    verdict: str                  # "member" | "not_member" | "inconclusive"
    n: int
    deviation: float
    witness: tuple | None
    preimage: SparseVector | None
    roundtrip_residual: float | None


def range_membership_check(ws: WeightSystem, kernel: TreeKernel, f: SparseVector,
                           n: int, tol: float = 1e-10) -> RangeMembershipReport:
    """Decide whether f lies in the range of the n-th shift power.

    f belongs to the range exactly when f/moment is constant on each full
    sibling shell Chi^n(a); the constant at each anchor a is the preimage
    coefficient.  The roundtrip S^n(preimage) is reported as a residual.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n == 0 or len(f) == 0:
        return RangeMembershipReport("member", n, 0.0, None, f, 0.0)
    budget = Budget()
    anchors = []
    seen = set()
    for u in f.support():
        a = par_n(kernel, u, n)
        if a not in seen:
            seen.add(a)
            anchors.append(a)
    worst = 0.0
    witness = None
    pre: dict = {}
    for a in anchors:
        shell = child_n(kernel, a, n, budget)
        ratios = [(u, f.get(u) / math.exp(moment_log(ws, kernel, u, n))) for u in shell]
        vals = [r for _, r in ratios]
        lo, hi = min(vals), max(vals)
        scale = max(abs(lo), abs(hi), 1e-300)
        dev = (hi - lo) / scale
        if dev > worst:
            u_lo = min(ratios, key=lambda p: p[1])[0]
            u_hi = max(ratios, key=lambda p: p[1])[0]
            worst, witness = dev, (a, u_lo, u_hi)
        pre[a] = math.fsum(vals) / len(vals)
    if worst <= tol:
        g = SparseVector(pre)
        resid = apply_power(ws, kernel, g, n).add(f, -1.0).norm()
        return RangeMembershipReport("member", n, worst, None, g, resid)
    if worst > 10.0 * tol:
        return RangeMembershipReport("not_member", n, worst, witness, None, None)
    return RangeMembershipReport("inconclusive", n, worst, witness, None, None)
