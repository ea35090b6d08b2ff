import math
from types import SimpleNamespace

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from budgetsvm import BudgetedModel, DegenerateWeights, InsufficientSVs
from budgetsvm import merge
from budgetsvm.merge import (
    budget_maintain,
    golden_section_merge,
    golden_section_merge_batch,
    mm_bsgd_merge,
    mm_gd_gradient,
    mm_gd_merge,
    mm_gd_objective,
    objective_along_line,
    rank_partners,
    remove_smallest,
    select_first,
)

# frozen oracle values (50-digit mpmath, 1e5-point grids, scipy Nelder-Mead)
F_HALF = 1.5576015661428098  # 2 exp(-1/4)
GRID_02_10 = (0.07939, 1.0794120584394584, 0.022021384564068214)  # h, f, degradation
CASCADE_012 = (0.640085, 1.6846698970277332)  # z, alpha_z for {0}, {1}, {2}
MMGD_2D_MIN = 0.023794639909744758


def grid_merge(ai, aj, d_sq, gamma, n=100001):
    lo, hi = (0.0, 1.0) if ai * aj > 0 else (-1.0, 2.0)
    h = np.linspace(lo, hi, n)
    a = gamma * d_sq
    f = ai * np.exp(-a * (1 - h) ** 2) + aj * np.exp(-a * h * h)
    k = int(np.argmax(np.abs(f)))
    return h[k], f[k], ai * ai + aj * aj + 2 * ai * aj * math.exp(-a) - f[k] ** 2


def gram_degradation(points, alphas, z, alpha_z, gamma, dps=50):
    """||sum a_i phi(x_i) - a_z phi(z)||^2 from the full Gram matrix in high precision."""
    with mpmath.workdps(dps):
        P = [[mpmath.mpf(float(v)) for v in np.atleast_1d(p)] for p in points] + [
            [mpmath.mpf(float(v)) for v in np.atleast_1d(z)]
        ]
        c = [mpmath.mpf(float(a)) for a in alphas] + [-mpmath.mpf(float(alpha_z))]
        g = mpmath.mpf(gamma)
        total = mpmath.mpf(0)
        for i in range(len(P)):
            for j in range(len(P)):
                d = sum((u - v) ** 2 for u, v in zip(P[i], P[j]))
                total += c[i] * c[j] * mpmath.exp(-g * d)
        return float(total)


def model_with(centers, alphas, gamma=1.0, budget=None):
    centers = np.asarray(centers, dtype=float)
    if centers.ndim == 1:
        centers = centers[:, None]
    m = BudgetedModel(centers.shape[1], budget or len(alphas), gamma)
    for c, a in zip(centers, alphas):
        m.add_sv(c, a)
    return m


def cfg(strategy="mm-bsgd", mergees=2, **kw):
    base = dict(
        strategy=strategy, mergees=mergees, gs_tol=merge.GS_TOL, gs_max_iter=merge.GS_MAX_ITER,
        gd_tol=merge.GD_TOL, gd_max_iter=merge.GD_MAX_ITER, gd_refine=False,
    )
    base.update(kw)
    return SimpleNamespace(**base)


# binary merge -------------------------------------------------------------------

def test_objective_along_line_examples():
    assert objective_along_line(0.3, 0.7, 2.0, 0.5, 1.0) == 0.3 + 0.7 * math.exp(-1.0)
    for h in (-1.0, 0.2, 0.9):
        assert objective_along_line(0.3, -0.7, 0.0, 5.0, h) == pytest.approx(-0.4, rel=1e-15)
    assert objective_along_line(1.0, 1.0, 1.0, 1.0, 0.5) == pytest.approx(F_HALF, rel=1e-15)


def test_f_half_oracle():
    with mpmath.workdps(50):
        assert float(2 * mpmath.exp(mpmath.mpf(-0.25))) == F_HALF


def test_coincident_points():
    assert golden_section_merge(0.4, -1.1, 0.0, 3.0) == (0.5, 0.4 - 1.1, 0.0)


# beyond gamma d^2 = 2 the midpoint turns into a local minimum of f
@pytest.mark.parametrize("a", [0.1, 1.0, 1.5])
@pytest.mark.parametrize("alpha", [0.3, -2.0])
def test_equal_coefficients_merge_at_midpoint(a, alpha):
    h, _, _ = golden_section_merge(alpha, alpha, a, 1.0)
    assert abs(h - 0.5) <= merge.GS_TOL


def test_grid_oracle_example():
    h, f, deg = golden_section_merge(0.2, 1.0, 1.0, 1.0)
    gh, gf, gdeg = GRID_02_10
    assert abs(f - gf) <= 1e-6
    assert abs(h - gh) <= 1e-3
    assert deg == pytest.approx(gdeg, abs=1e-6)


def test_grid_oracle_reproduces_frozen_values():
    assert tuple(float(v) for v in grid_merge(0.2, 1.0, 1.0, 1.0)) == pytest.approx(GRID_02_10, rel=1e-12)


def random_instances(n, seed):
    rng = np.random.default_rng(seed)
    for k in range(n):
        ai, aj = rng.uniform(-2, 2, size=2)
        yield ai, aj, rng.uniform(0, 10), (0.01, 1.0, 32.0)[k % 3]


def test_golden_section_against_grid_and_gram():
    for ai, aj, d_sq, gamma in random_instances(150, 11):
        h, f, deg = golden_section_merge(ai, aj, d_sq, gamma)
        _, gf, _ = grid_merge(ai, aj, d_sq, gamma)
        assert abs(abs(f) - abs(gf)) <= 1e-6
        assert f == pytest.approx(objective_along_line(ai, aj, d_sq, gamma, h), rel=1e-12)
        oracle = gram_degradation([0.0, math.sqrt(d_sq)], [ai, aj], (1 - h) * math.sqrt(d_sq), f, gamma)
        assert deg == pytest.approx(max(oracle, 0.0), rel=1e-10, abs=1e-300)


@pytest.mark.parametrize("log_a", [-9, -6, -4, -2, -1, math.log10(0.49), math.log10(0.51)])
def test_degradation_accurate_for_nearby_points(log_a):
    # the degradation is O(a^2) while the raw terms are O(a)
    rng = np.random.default_rng(3)
    for _ in range(40):
        ai, aj = rng.uniform(-2, 2, size=2)
        d_sq = 10.0 ** log_a
        h, f, deg = golden_section_merge(ai, aj, d_sq, 1.0)
        oracle = gram_degradation([0.0, math.sqrt(d_sq)], [ai, aj], (1 - h) * math.sqrt(d_sq), f, 1.0, dps=80)
        assert deg == pytest.approx(oracle, rel=1e-10, abs=1e-300)


@pytest.mark.parametrize("x", [0.0, 1e-12, 1e-6, 3e-3, 0.0099, 0.01, 0.3, 5.0])
def test_expm1_tail(x):
    with mpmath.workdps(50):
        exact = float(mpmath.mpf(x) + mpmath.expm1(-mpmath.mpf(x)))
    assert merge._expm1_tail(x) == pytest.approx(exact, rel=1e-13, abs=0.0)
    assert merge._expm1_tail(np.array([x]))[0] == pytest.approx(exact, rel=1e-13, abs=0.0)


@settings(max_examples=200, deadline=None)
@given(
    st.floats(-2, 2).filter(lambda v: abs(v) > 1e-6),
    st.floats(-2, 2).filter(lambda v: abs(v) > 1e-6),
    st.floats(0, 10),
    st.sampled_from([0.01, 1.0, 32.0]),
)
def test_merge_never_worse_than_removal(ai, aj, d_sq, gamma):
    h, f, deg = golden_section_merge(ai, aj, d_sq, gamma)
    assert deg >= 0.0
    assert deg <= min(ai * ai, aj * aj) * (1 + 1e-12) + 1e-15
    if ai * aj > 0:
        assert 0.0 <= h <= 1.0


def test_batch_matches_scalar_exactly():
    rng = np.random.default_rng(5)
    aj = rng.uniform(-2, 2, size=300)
    d_sq = rng.uniform(0, 10, size=300)
    d_sq[:5] = 0.0
    for ai, gamma in ((0.7, 1.0), (-0.05, 32.0), (1.3, 0.01)):
        H, F, E = golden_section_merge_batch(ai, aj, d_sq, gamma)
        for k in range(aj.size):
            h, f, e = golden_section_merge(ai, aj[k], d_sq[k], gamma)
            # vectorized and scalar expm1 may differ in the last bit
            assert H[k] == pytest.approx(h, abs=1e-12)
            assert F[k] == pytest.approx(f, rel=1e-13)
            assert E[k] == pytest.approx(e, rel=1e-12, abs=1e-16)


# selection ----------------------------------------------------------------------

def test_select_first():
    assert select_first(model_with([0, 1, 2], [0.5, -0.1, 0.3])) == 1
    assert select_first(model_with([0, 1], [0.2, 0.2])) == 0
    assert select_first(model_with([4], [-3.0])) == 0
    with pytest.raises(InsufficientSVs):
        select_first(BudgetedModel(1, 2, 1.0))


def test_rank_partners_brute_force():
    rng = np.random.default_rng(8)
    m = model_with(rng.normal(size=(20, 3)), rng.uniform(-1, 1, size=20), gamma=0.5)
    m.rescale(0.6)
    i = select_first(m)
    eff = m.effective_alpha
    degs = []
    for j in range(m.size):
        if j != i:
            d_sq = float(((m.centers[i] - m.centers[j]) ** 2).sum())
            degs.append((grid_merge(eff[i], eff[j], d_sq, 0.5)[2], j))
    expected = [j for _, j in sorted(degs)[:3]]
    cands = rank_partners(m, i, 4)
    assert [c.partner for c in cands] == expected
    assert [c.degradation_sq for c in cands] == sorted(c.degradation_sq for c in cands)
    assert rank_partners(m, i, 2)[0].partner == expected[0]


def test_rank_partners_identical_centers():
    m = model_with(np.zeros((3, 2)), [1.0, 2.0, 3.0])
    cands = rank_partners(m, 0, 3)
    assert [c.partner for c in cands] == [1, 2]
    assert all(c.degradation_sq == 0.0 for c in cands)
    with pytest.raises(InsufficientSVs):
        rank_partners(m, 0, 4)


# multi-merge --------------------------------------------------------------------

def test_cascade_two_is_binary_merge():
    m = model_with([[0.0, 1.0], [1.0, 0.5], [3.0, 3.0]], [0.4, 0.9, -0.2])
    i = select_first(m)
    cands = rank_partners(m, i, 2)
    z, az = mm_bsgd_merge(m, i, cands)
    j = cands[0].partner
    d_sq = float(((m.centers[i] - m.centers[j]) ** 2).sum())
    h, f, _ = golden_section_merge(m.effective_alpha[i], m.effective_alpha[j], d_sq, 1.0)
    assert az == f
    assert np.array_equal(z, h * m.centers[i] + (1 - h) * m.centers[j])


def test_cascade_identical_centers():
    m = model_with(np.ones((3, 2)), [1.0, 1.0, 1.0])
    z, az = mm_bsgd_merge(m, 0, rank_partners(m, 0, 3))
    assert z.tolist() == [1.0, 1.0] and az == 3.0


def test_cascade_collinear_against_grid_cascade():
    m = model_with([0.0, 1.0, 2.0], [1.0, 1.0, 1.0])
    cands = rank_partners(m, select_first(m), 3)
    z, az = mm_bsgd_merge(m, 0, cands)
    assert [c.partner for c in cands] == [1, 2]
    assert z[0] == pytest.approx(CASCADE_012[0], abs=1e-4)
    assert az == pytest.approx(CASCADE_012[1], abs=1e-6)


def test_mm_gd_objective_examples():
    x = np.array([[0.3, -1.0]])
    assert mm_gd_objective(x, [0.7], x[0], 0.7, 2.0) == 0.0
    P = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]])
    A = np.array([0.5, -0.2, 0.9])
    K = np.exp(-((P[:, None] - P[None]) ** 2).sum(-1))
    assert mm_gd_objective(P, A, np.zeros(2), 0.0, 1.0) == pytest.approx(A @ K @ A, rel=1e-13)
    z = np.array([0.2, 0.4])
    got = mm_gd_objective(P, A, z, 1.1, 1.0)
    assert got == pytest.approx(gram_degradation(P, A, z, 1.1, 1.0), rel=1e-12)


def finite_difference(P, A, z, az, gamma, step=1e-5):
    g = np.zeros_like(z)
    for k in range(z.size):
        e = np.zeros_like(z)
        e[k] = step
        g[k] = (mm_gd_objective(P, A, z + e, az, gamma) - mm_gd_objective(P, A, z - e, az, gamma)) / (2 * step)
    return g


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(21)
    for _ in range(100):
        M, d = rng.integers(2, 7), rng.integers(1, 11)
        P = rng.normal(size=(M, d))
        A = rng.uniform(-1, 1, size=M)
        z = rng.normal(size=d) * 0.5
        gamma = rng.choice([0.1, 0.5, 1.0])
        az = rng.uniform(0.2, 2.0)
        g = mm_gd_gradient(P, A, z, az, gamma)
        fd = finite_difference(P, A, z, az, gamma)
        assert np.linalg.norm(g - fd) <= 1e-4 * max(np.linalg.norm(fd), 1e-8)


def test_mm_gd_identical_points():
    P = np.tile([[1.0, -2.0]], (3, 1))
    z, az, trace = mm_gd_merge(P, [0.2, 0.3, 0.5], 1.0)
    assert z.tolist() == [1.0, -2.0] and az == pytest.approx(1.0, rel=1e-15)
    assert trace == [pytest.approx(0.0, abs=1e-15)]


def test_mm_gd_symmetric_line():
    z, az, _ = mm_gd_merge(np.array([[-1.0], [0.0], [1.0]]), [1.0, 1.0, 1.0], 1.0)
    assert z[0] == pytest.approx(0.0, abs=1e-12)
    assert az == pytest.approx(1.0 + 2.0 * math.exp(-1.0), rel=1e-12)


def test_mm_gd_against_2d_grid_oracle():
    P = np.array([[0.0, 0.0], [1.0, 0.5], [0.3, 1.2]])
    z, az, trace = mm_gd_merge(P, [0.1, 0.2, 0.3], 1.0, tol=1e-12, max_iter=1000)
    assert trace[-1] == pytest.approx(MMGD_2D_MIN, abs=1e-6)
    assert all(b <= a for a, b in zip(trace, trace[1:]))


def test_mm_gd_descent_on_random_instances():
    rng = np.random.default_rng(2)
    for _ in range(50):
        M = rng.integers(2, 8)
        P = rng.normal(size=(M, 4))
        A = rng.uniform(0.1, 1, size=M) * rng.choice([-1, 1])
        z, az, trace = mm_gd_merge(P, A, 0.3)
        assert all(b <= a for a, b in zip(trace, trace[1:]))
        assert trace[-1] == pytest.approx(mm_gd_objective(P, A, z, az, 0.3), rel=1e-9, abs=1e-14)


def test_mm_gd_degenerate_weights():
    with pytest.raises(DegenerateWeights):
        mm_gd_merge(np.array([[0.0], [1.0]]), [1.0, -1.0], 1.0)


def test_refined_gd_not_worse_than_cascade():
    rng = np.random.default_rng(4)
    for _ in range(30):
        m = model_with(rng.normal(size=(8, 3)), rng.uniform(0.1, 1.0, size=8), gamma=0.5)
        i = select_first(m)
        cands = rank_partners(m, i, 3)
        members = [i] + [c.partner for c in cands]
        P, A = m.centers[members], m.effective_alpha[members]
        zc, ac = mm_bsgd_merge(m, i, cands)
        fc = mm_gd_objective(P, A, zc, ac, 0.5)
        _, _, trace = mm_gd_merge(P, A, 0.5, z0=zc)
        assert trace[-1] <= fc + 1e-8
        zg, ag, tg = mm_gd_merge(P, A, 0.5)
        # both approaches land within the same order of magnitude
        assert tg[-1] <= 10 * fc + 1e-6 and fc <= 10 * tg[-1] + 1e-6


# removal and dispatch -------------------------------------------------------------

def test_remove_smallest():
    m = model_with([0.0], [0.4])
    assert remove_smallest(m) == pytest.approx(0.16) and m.size == 0
    m = model_with([0.0, 1.0], [1.0, 0.01])
    assert remove_smallest(m) == pytest.approx(1e-4, rel=1e-12)
    assert m.effective_alpha.tolist() == [1.0]
    m = model_with([0, 1, 2, 3], [5.0, -0.1, 2.0, 0.3])
    for _ in range(3):
        remove_smallest(m)
        assert 5.0 in m.effective_alpha


@pytest.mark.parametrize("strategy, M, left", [("mm-bsgd", 5, 7), ("mm-gd", 5, 7), ("merge", 2, 10), ("removal", 2, 10)])
def test_budget_maintain_counts(strategy, M, left):
    rng = np.random.default_rng(M)
    m = model_with(rng.normal(size=(11, 2)), rng.uniform(0.1, 1, size=11), budget=10)
    res = budget_maintain(m, cfg(strategy, M))
    assert m.size == left
    assert res.removed == 11 - left


def test_realized_degradation_matches_gram():
    rng = np.random.default_rng(6)
    for strategy in ("merge", "mm-bsgd", "mm-gd"):
        for _ in range(10):
            M = 2 if strategy == "merge" else 4
            m = model_with(rng.normal(size=(9, 2)), rng.uniform(-1, 1, size=9), gamma=0.7, budget=8)
            m.rescale(0.3)
            before = m.copy()
            res = budget_maintain(m, cfg(strategy, M))
            removed = [k for k in range(before.size) if not any(np.array_equal(before.centers[k], c) for c in m.centers)]
            new = [k for k in range(m.size) if not any(np.array_equal(m.centers[k], c) for c in before.centers)]
            assert len(removed) == M and len(new) <= 1
            z = m.centers[new[0]] if new else np.zeros(2)
            az = m.effective_alpha[new[0]] if new else 0.0
            oracle = gram_degradation(before.centers[removed], before.effective_alpha[removed], z, az, 0.7)
            assert res.degradation_sq == pytest.approx(max(oracle, 0.0), rel=1e-10, abs=1e-15)


def test_merge_equals_cascade_with_two():
    rng = np.random.default_rng(9)
    a = model_with(rng.normal(size=(7, 3)), rng.uniform(-1, 1, size=7), budget=6)
    b = a.copy()
    ra = budget_maintain(a, cfg("merge", 2))
    rb = budget_maintain(b, cfg("mm-bsgd", 2))
    assert a.dumps() == b.dumps() and ra.degradation_sq == rb.degradation_sq


def test_mm_gd_falls_back_on_cancelling_weights():
    m = model_with([[0.0], [0.1], [5.0]], [1.0, -1.0, 3.0], budget=2)
    res = budget_maintain(m, cfg("mm-gd", 2))
    assert m.size == 2
    assert res.gd_trace == []


def test_insufficient_svs():
    m = model_with([0.0, 1.0], [1.0, 1.0])
    with pytest.raises(InsufficientSVs):
        budget_maintain(m, cfg("mm-bsgd", 3))
