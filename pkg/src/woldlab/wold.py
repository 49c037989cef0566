"""The decomposition verdict and its supporting reports.

The shift either restricts to a unitary on its hyper-range with the
complement swept out by the wandering subspace, or it does not.  Which way
it goes is decided by two series verdicts, a weight relation along parents,
and balancedness.  The verdict here is four-valued: the two positive cases,
a definitive no, and an honest "the numerics cannot tell".  A definitive
answer is only ever assembled from definitive ingredients.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from .errors import DegenerateNormError, PreconditionError, UnknownVertexError
from .operator import (apply_adjoint, apply_shift, inner,
                       ker_adjoint_local_basis)
from .series import (SeriesConfig, SeriesVerdict, alpha_verdict, g_vector,
                     hyperrange_recurrence_check)
from .tree_core import BilateralPath, TreeKernel, Window, window_vertices
from .weights import (WeightSystem, boundedness_estimate, cauchy_dual,
                      is_balanced, shift_norm_sq)


# ---------------------------------------------------------------------------
# weight relation


@dataclass
class WeightRelationReport:
    max_residual: float
    witness: object | None
    tol: float
    max_allowance: float
    checked: int
    skipped: int = 0

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tol + self.max_allowance


def case_ii_weight_relation(ws: WeightSystem, kernel: TreeKernel, window: Window,
                            alpha_values: dict, tol: float = 1e-9) -> WeightRelationReport:
    """Residuals of lambda_v = sqrt(alpha(par v) / alpha(v)) over the window.

    alpha_values maps vertices (window members and their parents) to converged
    series verdicts.  Tail bounds of the two alpha values are propagated into
    a per-vertex allowance added to tol.
    """
    worst = 0.0
    allowance_at_worst = 0.0
    witness = None
    checked = skipped = 0
    for v in window_vertices(kernel, window):
        try:
            p = kernel.parent(v)
        except UnknownVertexError:
            skipped += 1
            continue
        try:
            a_par, a_v = alpha_values[p], alpha_values[v]
        except KeyError as exc:
            raise ValueError(f"missing alpha value for {exc.args[0]!r}") from exc
        if a_par.kind != "converged" or a_v.kind != "converged":
            raise ValueError(f"weight relation needs converged alpha at {v!r}")
        A, B = a_par.value, a_v.value
        predicted = math.sqrt(A / B)
        resid = abs(ws.weight(v) - predicted)
        dA, dB = a_par.tail_bound, a_v.tail_bound
        allowance = dA / (2.0 * math.sqrt(A * B)) + math.sqrt(A) * dB / (2.0 * B ** 1.5)
        checked += 1
        if resid - allowance > worst - allowance_at_worst:
            worst, allowance_at_worst, witness = resid, allowance, v
    return WeightRelationReport(worst, witness, tol, allowance_at_worst, checked, skipped)


# ---------------------------------------------------------------------------
# the verdict


_CASE = {"HasWold_case_i": "i", "HasWold_case_ii": "ii",
         "NoWold": "none", "Inconclusive": "unknown"}


@dataclass
class WoldVerdict:
    vertex: object
    outcome: str                 # HasWold_case_i | HasWold_case_ii | NoWold | Inconclusive
    method: str                  # "analytic" | "heuristic"
    evidence: dict = field(default_factory=dict)
    witnesses: list = field(default_factory=list)
    note: str = ""

    @property
    def case(self) -> str:
        return _CASE[self.outcome]

    @property
    def definitive(self) -> bool:
        return self.outcome != "Inconclusive" and self.method == "analytic"

    def to_json(self, kernel: TreeKernel) -> dict:
        return {
            "vertex": kernel.format_vertex(self.vertex),
            "verdict": self.outcome,
            "value": None,
            "tail_bound": None,
            "evidence": {**self.evidence,
                         "witnesses": [kernel.format_vertex(w) for w in self.witnesses]},
            "method": self.method,
            "case": self.case,
            "note": self.note,
        }


def wold_verdict(ws: WeightSystem, kernel: TreeKernel, window: Window,
                 config: SeriesConfig | None = None, seed: int = 0,
                 tol: float = 1e-9) -> WoldVerdict:
    """Decide the decomposition question on a window.

    The case split runs at the window base: a divergent series sends the
    decision to the dual series (both divergent: case (i); dual convergent:
    no decomposition); a convergent one sends it to the weight relation and
    balancedness (case (ii)).  The base verdict is then spot-checked at up
    to 8 seeded random window vertices, since convergence is a property of
    the whole tree, not of the vertex; a definitive disagreement means the
    numerics cannot be trusted and the answer degrades to Inconclusive.
    """
    cfg = config or SeriesConfig()
    verts = window_vertices(kernel, window)
    floor = min(shift_norm_sq(ws, kernel, v) for v in verts)
    if floor < 1e-12:
        raise DegenerateNormError(
            f"one-step norm floor {floor:.3e} on the window; shift is not left-invertible")
    base = window.base
    primal = alpha_verdict(ws, kernel, base, cfg)
    evidence: dict = {"alpha_primal": primal.to_json(kernel)}
    witnesses: list = []
    note = ""
    dual_verdict = None

    if primal.kind == "inconclusive":
        outcome, method = "Inconclusive", "heuristic"
        note = "primal series undecided"
    elif primal.kind == "diverged":
        dual_ws = cauchy_dual(ws, kernel)
        dual_verdict = alpha_verdict(dual_ws, kernel, base, cfg)
        evidence["alpha_dual"] = dual_verdict.to_json(kernel)
        both_definitive = primal.definitive and dual_verdict.definitive
        if dual_verdict.kind == "diverged":
            if both_definitive:
                outcome, method = "HasWold_case_i", "analytic"
            else:
                outcome, method = "Inconclusive", "heuristic"
                note = "likely HasWold_case_i (heuristic series evidence)"
        elif dual_verdict.kind == "converged":
            # analytic dual without the wandering property: no decomposition
            if both_definitive:
                outcome, method = "NoWold", "analytic"
                witnesses.append(base)
            else:
                outcome, method = "Inconclusive", "heuristic"
                note = "likely NoWold (heuristic series evidence)"
        else:
            outcome, method = "Inconclusive", "heuristic"
            note = "dual series undecided"
    else:
        outcome, method, note, extra = _case_ii_branch(
            ws, kernel, window, verts, primal, cfg, tol, witnesses)
        evidence.update(extra)

    checks, downgrade, clash = _spot_checks(ws, kernel, verts, base, primal,
                                            dual_verdict, cfg, seed)
    evidence["spot_checks"] = checks
    if downgrade and outcome != "Inconclusive":
        outcome, method = "Inconclusive", "heuristic"
        note = f"downgraded: definitive series disagreement at {clash!r}"
        witnesses.append(clash)
    return WoldVerdict(base, outcome, method, evidence, witnesses, note)


def _case_ii_branch(ws, kernel, window, verts, primal, cfg, tol, witnesses):
    need = set(verts)
    for v in verts:
        try:
            need.add(kernel.parent(v))
        except UnknownVertexError:
            pass
    alpha_values = {v: alpha_verdict(ws, kernel, v, cfg) for v in need}
    kinds = {a.kind for a in alpha_values.values()}
    extra = {
        "alpha_window": {kernel.format_vertex(v): a.to_json(kernel)
                         for v, a in sorted(alpha_values.items(),
                                            key=lambda kv: kernel.format_vertex(kv[0]))},
    }
    if "inconclusive" in kinds:
        return "Inconclusive", "heuristic", "some window series undecided", extra
    if "diverged" in kinds:
        bad = next(v for v, a in alpha_values.items() if a.kind == "diverged")
        witnesses.append(bad)
        return ("Inconclusive", "heuristic",
                "bug-level inconsistency: convergence split across the window", extra)

    rel = case_ii_weight_relation(ws, kernel, window, alpha_values, tol)
    bal = is_balanced(ws, kernel, window)
    extra["weight_relation"] = {
        "max_residual": rel.max_residual, "tol": rel.tol,
        "allowance": rel.max_allowance, "checked": rel.checked,
        "witness": kernel.format_vertex(rel.witness) if rel.witness is not None else None,
    }
    extra["balanced"] = {"verdict": bal.verdict, "n_max": bal.n_max, "tol": bal.tol}

    all_analytic = (primal.definitive
                    and all(a.definitive for a in alpha_values.values()))
    if rel.passed and bal.verdict == "balanced":
        if all_analytic:
            return "HasWold_case_ii", "analytic", "", extra
        return ("Inconclusive", "heuristic",
                "likely HasWold_case_ii (heuristic series evidence)", extra)
    if not rel.passed:
        witnesses.append(rel.witness)
        if all_analytic:
            return "NoWold", "analytic", "weight relation fails", extra
        return ("Inconclusive", "heuristic",
                "likely NoWold (weight relation fails on heuristic values)", extra)
    if bal.verdict == "not_balanced":
        witnesses.extend(bal.witness[:2])
        if all_analytic:
            return "NoWold", "analytic", "not balanced", extra
        return ("Inconclusive", "heuristic",
                "likely NoWold (unbalanced, heuristic series evidence)", extra)
    return "Inconclusive", "heuristic", "balancedness undecided", extra


def _spot_checks(ws, kernel, verts, base, primal, dual_verdict, cfg, seed):
    rng = random.Random(seed)
    pool = [v for v in verts if v != base]
    picks = rng.sample(pool, min(8, len(pool)))
    dual_ws = cauchy_dual(ws, kernel) if dual_verdict is not None else None
    checks = []
    downgrade, clash = False, None

    def clashes(a: SeriesVerdict, b: SeriesVerdict) -> bool:
        return {a.kind, b.kind} == {"converged", "diverged"}

    for v in picks:
        s = alpha_verdict(ws, kernel, v, cfg)
        row = {"vertex": kernel.format_vertex(v), "kind": s.kind,
               "method": s.method, "agree": not clashes(s, primal)}
        if clashes(s, primal) and s.definitive and primal.definitive:
            downgrade, clash = True, v
        if dual_ws is not None:
            sd = alpha_verdict(dual_ws, kernel, v, cfg)
            row["dual_kind"] = sd.kind
            row["dual_agree"] = not clashes(sd, dual_verdict)
            if clashes(sd, dual_verdict) and sd.definitive and dual_verdict.definitive:
                downgrade, clash = True, v
        checks.append(row)
    return checks, downgrade, clash


# ---------------------------------------------------------------------------
# decomposition report


@dataclass
class DecompositionReport:
    window: Window
    n_max: int
    N: int
    tol: float
    reduction: list           # per-step recurrence and adjoint residuals
    unitarity: list           # per-m norm preservation residuals
    coverage: dict            # Gram diagnostics, reported not asserted

    @property
    def passed(self) -> bool:
        ok_red = all(r["recurrence_ok"] and r["adjoint_ok"] for r in self.reduction)
        ok_uni = all(u["ok"] for u in self.unitarity)
        return ok_red and ok_uni

    def to_json(self, kernel: TreeKernel) -> dict:
        return {
            "base": kernel.format_vertex(self.window.base),
            "n_max": self.n_max, "N": self.N, "tol": self.tol,
            "reduction": self.reduction, "unitarity": self.unitarity,
            "coverage": self.coverage, "passed": self.passed,
        }


def decomposition_report(ws: WeightSystem, kernel: TreeKernel, window: Window,
                         n_max: int = 4, tol: float = 1e-10,
                         config: SeriesConfig | None = None) -> DecompositionReport:
    """Check the decomposition structure itself in a case (ii) scenario.

    (a) the shift and its adjoint move each truncated g_m along the ladder
    with the predicted constants (adjoint constant cross-checked through the
    independent norm-ratio route); (b) the restriction to the g-span
    preserves norms; (c) a Gram matrix over the window of the g family plus
    the shifted kernel vectors, with its off-diagonal mass and rank deficit
    reported rather than asserted, since truncation to a window clips
    boundary vectors.
    """
    verdict = wold_verdict(ws, kernel, window, config)
    if verdict.outcome != "HasWold_case_ii":
        raise PreconditionError(
            f"decomposition report needs HasWold_case_ii, got {verdict.outcome}")
    cfg = config or SeriesConfig()
    path = BilateralPath(kernel, window.base)
    N = max(8, 2 * n_max)
    gs = {m: g_vector(ws, kernel, path, m, N, cfg) for m in range(-n_max, n_max + 1)}
    s_sup = math.sqrt(boundedness_estimate(ws, kernel, window))

    reduction = []
    for m in range(-n_max, n_max):
        rec = hyperrange_recurrence_check(ws, kernel, path, m, N, tol, cfg)
        row = {"m": m, "recurrence_residual": rec.residual,
               "recurrence_allowance": rec.tail_allowance,
               "recurrence_ok": rec.passed}
        g_m, g_prev = gs[m + 1], gs[m]
        lam = ws.weight(path[m + 1])
        c_a = shift_norm_sq(ws, kernel, path[m], 1) / lam
        c_b = (g_m.alpha_value / g_prev.alpha_value) * lam
        back = apply_adjoint(ws, kernel, g_m.vector)
        keep = set()
        for gen in g_prev.gen_support[:N]:
            keep.update(gen)
        resid = back.add(g_prev.vector, -c_a).restrict(keep).norm()
        allowance = s_sup * math.sqrt(g_m.tail_mass) + abs(c_a) * math.sqrt(g_prev.tail_mass)
        row.update({"adjoint_constant": c_a, "adjoint_constant_alt": c_b,
                    "constant_mismatch": abs(c_a - c_b),
                    "adjoint_residual": resid, "adjoint_allowance": allowance,
                    "adjoint_ok": resid <= tol + allowance
                    and abs(c_a - c_b) <= tol + allowance})
        reduction.append(row)

    unitarity = []
    for m in range(-n_max, n_max + 1):
        g = gs[m]
        a = apply_shift(ws, kernel, g.vector).norm()
        b = g.vector.norm()
        allowance = (s_sup + 1.0) * math.sqrt(g.tail_mass)
        unitarity.append({"m": m, "residual": abs(a - b),
                          "allowance": allowance,
                          "ok": abs(a - b) <= tol + allowance})

    coverage = _coverage_gram(ws, kernel, window, gs, n_max, tol)
    return DecompositionReport(window, n_max, N, tol, reduction, unitarity, coverage)


def _coverage_gram(ws, kernel, window, gs, n_max, tol):
    import numpy as np

    win = set(window_vertices(kernel, window))
    members = []
    for m, g in sorted(gs.items()):
        r = g.vector.restrict(win)
        if r.norm_sq() > 0.0:
            members.append((("g", m), r.scale(1.0 / r.norm())))
    for v in sorted(win, key=kernel.format_vertex):
        for idx, f in enumerate(ker_adjoint_local_basis(ws, kernel, v)):
            vec = f
            for j in range(n_max + 1):
                r = vec.restrict(win)
                if r.norm_sq() > 0.0:
                    members.append((("w", kernel.format_vertex(v), idx, j),
                                    r.scale(1.0 / r.norm())))
                vec = apply_shift(ws, kernel, vec)
    dim = len(members)
    gram = np.eye(dim)
    for i in range(dim):
        for j in range(i + 1, dim):
            gram[i, j] = gram[j, i] = inner(members[i][1], members[j][1])
    off = float(np.max(np.abs(gram - np.eye(dim)))) if dim else 0.0
    rank = int(np.linalg.matrix_rank(gram, tol=1e-8)) if dim else 0
    return {"vectors": dim, "window_dim": len(win),
            "gram_offdiag_max": off, "rank": rank,
            "deficit": len(win) - rank,
            "labels": [list(map(str, lab)) if isinstance(lab, tuple) else str(lab)
                       for lab, _ in members]}
