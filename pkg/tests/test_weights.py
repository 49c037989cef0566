"""Weight families, moments, Cauchy duals, and window diagnostics."""

from __future__ import annotations

import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from woldlab.errors import (DegenerateNormError, MissingWeightError,
                            UnknownVertexError)
from woldlab.tree_core import TkInfKernel, TqbKernel, Window, ZPathKernel, par_n
from woldlab.weights import (CauchyDualWeights, ConstantWeights, PolyRule,
                             Prop51Weights, TkinfIsometricWeights,
                             boundedness_estimate, cauchy_dual, ex52_weights,
                             family_root, is_balanced, is_norm_increasing,
                             load_weight_csv, make_weights, moment,
                             moment_log, shift_norm_sq)

TQB = TqbKernel()
ZP = ZPathKernel()
EX52 = ex52_weights()


# ---------------------------------------------------------------------------
# polynomial rules


def test_polyrule_basics():
    r = PolyRule(1.0, {0: 2.0, -3: 0.5})
    assert r(0) == 2.0 and r(-3) == 0.5 and r(7) == 1.0
    assert r.settled_after() == 0
    assert PolyRule(2.0).settled_after() is None
    with pytest.raises(ValueError):
        PolyRule(0.0)
    with pytest.raises(ValueError):
        PolyRule(1.0, {2: -1.0})


def test_polyrule_spec_roundtrip():
    for r in [PolyRule(1.5), PolyRule(1.0, {-2: 3.0, 4: 0.25})]:
        back = PolyRule.parse(r.spec())
        assert back.default == r.default and back.table == r.table


def test_polyrule_parse_rejects():
    with pytest.raises(ValueError):
        PolyRule.parse("table:1=2.0")
    with pytest.raises(ValueError):
        PolyRule.parse("table:oops,default=1")
    with pytest.raises(ValueError):
        PolyRule.parse("spline:1.0")


# ---------------------------------------------------------------------------
# the quadratic family


def test_ex52_weight_spot_values():
    # p(x) = 1 + x + x^2 everywhere
    assert EX52.weight((2, 5)) == pytest.approx(math.sqrt(3.0), rel=1e-15)
    assert EX52.weight((3, -4)) == pytest.approx(math.sqrt(7.0 / 3.0), rel=1e-15)
    assert EX52.weight((0, 3)) == pytest.approx(math.sqrt(3.0 / 4.0), rel=1e-15)
    assert EX52.weight((1, 4)) == 0.5
    assert EX52.weight((0, 0)) == 1.0
    assert EX52.weight((1, -2)) == 1.0


def test_weight_log_weight_agree():
    for v in [(0, 5), (0, -1), (1, 3), (1, 0), (2, 2), (6, -7)]:
        assert math.log(EX52.weight(v)) == pytest.approx(
            EX52.log_weight(v), abs=1e-14)


def test_sample_certificate_reports_window_extremes():
    ws = Prop51Weights(PolyRule(1.0, {0: 4.0}), PolyRule(2.0, {1: 0.5}))
    cert = ws.sample_certificate(range(-2, 3))
    assert cert["sup_a_sampled"] == 4.0
    assert cert["sup_b_sampled"] == 2.0
    assert cert["inf_b_sampled"] == 0.5


def test_one_step_norms_on_spine():
    # spine children are (0, m-1) and (1, m)
    for m in range(2, 12):
        assert shift_norm_sq(EX52, TQB, (0, m)) == pytest.approx(1.0, rel=1e-14)
    for m in range(-6, 2):
        assert shift_norm_sq(EX52, TQB, (0, m)) == pytest.approx(2.0, rel=1e-14)


def test_power_norms_on_rays():
    # below (n, m) with n >= 1 the tree is a single ray, so the norm telescopes
    for n in (1, 2, 4):
        for m in (-3, 0, 2, 9):
            for k in range(0, 5):
                expect = EX52.p(m, n + k - 1) / EX52.p(m, n - 1)
                assert shift_norm_sq(EX52, TQB, (n, m), k) == pytest.approx(
                    expect, rel=1e-13)


@given(st.integers(0, 4), st.integers(-10, 10), st.integers(0, 6))
def test_moment_telescopes(n, m, steps):
    v = (n, m)
    up = par_n(TQB, v, steps)
    assert moment_log(EX52, TQB, v, steps + 1) == pytest.approx(
        moment_log(EX52, TQB, v, steps) + EX52.log_weight(up), abs=1e-12)


def test_moment_value_matches_product():
    v = (3, 4)
    prod = 1.0
    x = v
    for _ in range(3):
        prod *= EX52.weight(x)
        x = TQB.parent(x)
    assert moment(EX52, TQB, v, 3).value == pytest.approx(prod, rel=1e-14)
    with pytest.raises(ValueError):
        moment_log(EX52, TQB, v, -1)


# ---------------------------------------------------------------------------
# Cauchy dual


def test_dual_spot_values():
    dual = cauchy_dual(EX52, TQB)
    assert dual.weight((0, 4)) == pytest.approx(math.sqrt(4.0 / 5.0), rel=1e-13)
    assert dual.weight((0, 0)) == 0.5
    assert dual.weight((0, -3)) == 0.5
    assert dual.weight((1, 5)) == pytest.approx(1.0 / math.sqrt(5.0), rel=1e-13)
    assert dual.weight((1, 1)) == 0.5
    assert dual.weight((1, 0)) == 0.5
    for n in (2, 3, 5):
        for m in (-4, 0, 3):
            expect = math.sqrt(EX52.p(m, n - 2) / EX52.p(m, n - 1))
            assert dual.weight((n, m)) == pytest.approx(expect, rel=1e-13)


def test_dual_involution_on_window():
    dual2 = cauchy_dual(cauchy_dual(EX52, TQB), TQB)
    for v in [(0, 6), (0, 0), (0, -4), (1, 2), (2, -1), (4, 3)]:
        assert dual2.weight(v) == pytest.approx(EX52.weight(v), rel=1e-12)


def test_dual_of_isometry_is_itself():
    k = TkInfKernel(3)
    ws = TkinfIsometricWeights(3)
    dual = cauchy_dual(ws, k)
    for v in [(-2, 0), (0, 0), (1, 2), (4, 1)]:
        assert dual.weight(v) == pytest.approx(ws.weight(v), rel=1e-14)


def test_dual_degenerate_norm():
    dual = cauchy_dual(ConstantWeights(1e-13), ZP)
    with pytest.raises(DegenerateNormError):
        dual.weight(0)


def test_family_root_tracks_depth():
    assert family_root(EX52) == (EX52, 0)
    d = cauchy_dual(EX52, TQB)
    root, depth = family_root(d)
    assert root is EX52 and depth == 1
    root2, depth2 = family_root(cauchy_dual(d, TQB))
    assert root2 is EX52 and depth2 == 2


# ---------------------------------------------------------------------------
# csv weights


CSV_OK = 'vertex,weight\n"0,0",2.0\n"1,1",0.5\n# comment row\n"0,1",1.25\n'


def test_csv_weights_roundtrip():
    ws = load_weight_csv(CSV_OK, TQB)
    assert ws.weight((0, 0)) == 2.0
    assert ws.weight((1, 1)) == 0.5
    assert ws.params["entries"] == 3
    with pytest.raises(MissingWeightError):
        ws.weight((5, 5))


def test_csv_weights_rejects():
    with pytest.raises(ValueError):
        load_weight_csv('"0,0",-1.0\n', TQB)
    with pytest.raises(ValueError):
        load_weight_csv("vertex,weight\n", TQB)
    with pytest.raises(ValueError):
        load_weight_csv('"0,0"\n', TQB)


# ---------------------------------------------------------------------------
# window diagnostics


def test_is_balanced_flags_ex52():
    rep = is_balanced(EX52, TQB, Window((0, 0), 2, 2))
    assert rep.verdict == "not_balanced"
    u, v, nu, nv = rep.witness
    assert {round(nu), round(nv)} == {1, 2} or {round(nu, 6), round(nv, 6)} != set()
    assert abs(nu - nv) > 0.5


def test_is_balanced_passes_uniform_trees():
    assert is_balanced(ConstantWeights(1.0), ZP, Window(0, 3, 3)).verdict == "balanced"
    k = TkInfKernel(2)
    rep = is_balanced(TkinfIsometricWeights(2), k, Window((0, 0), 2, 2))
    assert rep.verdict == "balanced"


def test_is_balanced_inconclusive_without_certification():
    # a single depth class can never certify same-generation membership
    rep = is_balanced(ConstantWeights(1.0), ZP, Window(0, 0, 0))
    assert rep.verdict in ("balanced", "inconclusive")


def test_is_norm_increasing():
    assert is_norm_increasing(EX52, TQB, Window((0, 0), 2, 2)).verdict == "norm_increasing"
    rep = is_norm_increasing(ConstantWeights(0.9), ZP, Window(0, 2, 2))
    assert rep.verdict == "not_norm_increasing"
    assert rep.witness[1] == pytest.approx(0.81, rel=1e-12)


def test_boundedness_estimate_ex52():
    est = boundedness_estimate(EX52, TQB, Window((0, 0), 2, 2))
    assert est == pytest.approx(3.0, rel=1e-12)


# ---------------------------------------------------------------------------
# the spec-string factory


def test_make_weights_specs():
    assert make_weights("constant:2.5", ZP).weight(3) == 2.5
    assert make_weights("ex52", TQB).name == "ex52"
    w = make_weights("prop51", TQB, a_rule="const:2.0", b_rule="const:3.0")
    assert w.p(0, 1.0) == 6.0
    k3 = TkInfKernel(3)
    assert make_weights("tkinf-isometric:k=3", k3).k == 3
    assert make_weights("tkinf-isometric", k3).k == 3


def test_make_weights_rejects():
    with pytest.raises(ValueError):
        make_weights("prop51", TQB)
    with pytest.raises(ValueError):
        make_weights("constant:-1", ZP)
    with pytest.raises(ValueError):
        make_weights("mystery", ZP)
