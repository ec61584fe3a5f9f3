import dataclasses
import itertools
import math

import pytest

import carpetquant as cq
from carpetquant import Word


def test_upsilon_j0(desk1, consts2, upsilon):
    ups = upsilon(0)
    assert ups.psi == 2
    assert ups.words == (Word((), (0,)), Word((), (1,)))
    assert ups.log_weights[0] == pytest.approx(math.log(0.4 * 0.25), rel=1e-12)


def test_upsilon_weight_band(desk1, consts2, upsilon):
    log_eta = math.log(consts2.eta_lo)
    for j in range(0, 6):
        ups = upsilon(j)
        for lw in ups.log_weights:
            assert (j + 1) * log_eta <= lw < j * log_eta


def test_upsilon_mass_partition(desk1, consts2, upsilon):
    log_m = math.log(desk1.m)
    for j in range(0, 6):
        ups = upsilon(j)
        mass = math.fsum(
            math.exp(lw + cq.order(w) * 2.0 * log_m)
            for w, lw in zip(ups.words, ups.log_weights)
        )
        assert mass == pytest.approx(1.0, abs=1e-12)


def test_upsilon_energy_bound(desk1, consts2, upsilon):
    for j in range(0, 6):
        ups = upsilon(j)
        total = math.fsum(math.exp(consts2.t_r * lw) for lw in ups.log_weights)
        assert total <= consts2.H1


def test_upsilon_is_antichain(desk1, upsilon):
    ups = upsilon(3)
    for w1, w2 in itertools.combinations(ups.words, 2):
        assert cq.compare(desk1, w1, w2) is cq.Relation.INCOMPARABLE


def test_upsilon_growth(upsilon, desk1, consts2):
    grow = float(desk1.m * desk1.n) ** consts2.H1
    for j in range(0, 5):
        a, b = upsilon(j).psi, upsilon(j + 1).psi
        assert a <= b <= grow * a


def test_upsilon_rejects_negative_j(desk1, consts2):
    with pytest.raises(ValueError):
        cq.build_upsilon(desk1, consts2, -1)


def test_upsilon_cap(desk1, consts2):
    with pytest.raises(cq.CapExceeded) as err:
        cq.build_upsilon(desk1, consts2, 4, cap=100)
    assert err.value.cap == 100
    assert err.value.at_least > 100


def test_slices(desk1, upsilon):
    ups = upsilon(2)
    sl = cq.slices(ups)
    assert (sl.k1, sl.k2) == (3, 4)
    orders = sorted({cq.order(w) for w in ups.words})
    assert [k for k, _ in sl.by_order] == orders
    assert sum(len(ws) for _, ws in sl.by_order) == ups.psi
    assert all(cq.order(w) == k for k, ws in sl.by_order for w in ws)


def test_s2_family_contains_anchor_and_respects_bounds(desk1, consts2):
    anchors = [Word((), (0,)), Word(((1, 1),), (0, 1)), Word(((2, 1), (0, 0)), (1,))]
    for sigma in anchors:
        fam = cq.s2_family(desk1, consts2, sigma)
        assert sigma in fam
        e_sigma = cq.energy(desk1, consts2, sigma)
        total = math.fsum(cq.energy(desk1, consts2, w) for w in fam)
        assert total <= consts2.H3 * e_sigma
        assert max(cq.order(w) for w in fam) - cq.order(sigma) <= consts2.M
        # every member's energy clears the cut, and every member descends from sigma
        for w in fam:
            assert cq.energy(desk1, consts2, w) >= e_sigma / consts2.H2 * (1 - 1e-11)
            assert w == sigma or cq.compare(desk1, sigma, w) is cq.Relation.PRECEDES


def test_gamma_tau_partition(desk1, consts2, pw2, upsilon):
    ups = upsilon(2)
    sl = cq.slices(ups)
    lam = set(sl.at(sl.k1))
    checked = 0
    for tau in cq.all_words(desk1, sl.k1):
        if tau in lam:
            continue
        fam = cq.build_gamma_tau(desk1, consts2, pw2, 2, sl.k1, tau)
        assert fam.partition_defect() <= 1e-12
        assert len(fam.pairs) == len(set(fam.pairs))
        checked += 1
    assert checked > 0


def test_gamma_tau_rejects_bad_anchor(desk1, consts2, pw2, upsilon):
    ups = upsilon(2)
    sl = cq.slices(ups)
    with pytest.raises(cq.BadTau):
        wrong_order = Word((), (0,))
        cq.build_gamma_tau(desk1, consts2, pw2, 2, sl.k1, wrong_order)
    with pytest.raises(cq.BadTau):
        below = sl.at(sl.k1)[0]  # an antichain member is already below threshold
        cq.build_gamma_tau(desk1, consts2, pw2, 2, sl.k1, below)


def test_glue_orders(desk1, consts2, pw2, upsilon):
    ups = upsilon(2)
    sl = cq.slices(ups)
    lam = set(sl.at(sl.k1))
    tau = next(t for t in cq.all_words(desk1, sl.k1) if t not in lam)
    fam = cq.build_gamma_tau(desk1, consts2, pw2, 2, sl.k1, tau)
    for pair in fam.pairs:
        glued = cq.glue(tau, pair)
        assert cq.order(glued) == sl.k1 + cq.pair_order(pair)
        cq.validate_word(desk1, glued)


def test_l1_l2_structure(desk1, consts2, upsilon):
    res = cq.build_l1_l2(desk1, consts2, upsilon(2))
    assert res.k1 == 3
    assert len(res.l1) == 32
    assert res.phi == 30
    assert res.l1_distinct
    assert set(res.l2) <= set(res.l1)
    assert max(res.gamma_defects) <= 1e-12
    for w in res.l1:
        cq.validate_word(desk1, w)


def test_l2_pairwise_non_overlapping(desk1, consts2, upsilon):
    for j in (2, 3):
        res = cq.build_l1_l2(desk1, consts2, upsilon(j))
        squares = [cq.rect(desk1, w) for w in res.l2]
        for s1, s2 in itertools.combinations(squares, 2):
            assert not s1.overlaps_interior(s2)


def test_l2_energy_and_count_bands(desk1, consts2, upsilon):
    t = consts2.t_r
    log_eta = math.log(consts2.eta_lo)
    for j in (2, 3, 4):
        res = cq.build_l1_l2(desk1, consts2, upsilon(j))
        total = math.fsum(
            cq.energy(desk1, consts2, w) for w in res.l2
        )
        assert total >= consts2.Q / (consts2.H3 * consts2.P)
        assert total <= 1.0
        assert res.phi >= consts2.H5 * math.exp(-j * t * log_eta) * (1 - 1e-11)
        assert res.phi <= consts2.H4 * math.exp(-(j + 1) * t * log_eta) * (1 + 1e-11)


def test_certify_all_pass(desk1, consts2):
    report = cq.certify(desk1, consts2, range(0, 7))
    assert report.all_pass
    assert report.failures == ()
    names = {c.name for jc in report.certificates for c in jc.checks}
    assert {
        "weight-band-lower",
        "weight-band-upper",
        "mass-partition",
        "energy-sum",
        "s1-mass",
        "s2-mass",
        "l1-shape",
        "l2-antichain",
        "count-band-lower",
        "count-band-upper",
    } <= names
    cross = {c.name for c in report.cross_checks}
    assert {"psi-monotone", "psi-growth", "phi-growth-strict", "phi-growth-cap"} <= cross


def test_certify_reports_tampered_constants(desk1, consts2):
    # shrinking H1 to 1 must trip the overlap-mass certificate at j=2
    broken = dataclasses.replace(consts2, H1=1)
    report = cq.certify(desk1, broken, [2])
    assert not report.all_pass
    failed = {c.name for c in report.failures}
    assert "s1-mass" in failed
    s1 = next(c for c in report.failures if c.name == "s1-mass")
    assert s1.witness != ""


def test_certify_reports_tampered_count_band(desk1, consts2):
    broken = dataclasses.replace(consts2, H4=1e-9)
    report = cq.certify(desk1, broken, [2])
    failed = {c.name for c in report.failures}
    assert "count-band-upper" in failed


def test_certificate_accessor(desk1, consts2):
    report = cq.certify(desk1, consts2, [2])
    cert = report.certificates[0]
    chk = cert.check("energy-sum")
    assert chk.passed and chk.value == pytest.approx(cert.sum_energy)
    with pytest.raises(KeyError):
        cert.check("no-such-check")
