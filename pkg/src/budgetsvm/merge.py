"""Budget maintenance: removal, binary merging and multi-merging.

Merging two weighted Gaussians ``a_i phi(x_i) + a_j phi(x_j)`` into
``a_z phi(z)`` with ``z = h x_i + (1 - h) x_j`` leaves the squared error

    E(h) = a_i^2 + a_j^2 + 2 a_i a_j k_ij - f(h)^2,
    f(h) = a_i exp(-g (1-h)^2 d) + a_j exp(-g h^2 d),

with ``a_z = f(h)`` optimal for fixed ``h``. All errors are evaluated through
``u = 1 - k = -expm1(-g d)`` so that nearly coincident points do not lose
every significant digit to cancellation.

All coefficients handled here are *effective* ones (already multiplied by the
model's global scale).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DegenerateWeights, InsufficientSVs
from .kernel import DENOM_EPSILON, squared_distance_rows

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0

GS_TOL = 1e-5
GS_MAX_ITER = 200
GD_TOL = 1e-6
GD_MAX_ITER = 100
GD_MAX_HALVINGS = 40

STRATEGIES = ("removal", "merge", "mm-bsgd", "mm-gd")


@dataclass(frozen=True)
class MergeCandidate:
    partner: int
    h_opt: float
    alpha_z: float
    degradation_sq: float


@dataclass
class MaintenanceResult:
    degradation_sq: float
    removed: int
    gd_trace: list = field(default_factory=list)


# binary merge ---------------------------------------------------------------

def objective_along_line(alpha_i, alpha_j, d_sq, gamma, h):
    """Optimal merged coefficient ``f(h)`` for the point ``h x_i + (1-h) x_j``."""
    a = gamma * d_sq
    return alpha_i * math.exp(-a * (1.0 - h) ** 2) + alpha_j * math.exp(-a * h * h)


# x + expm1(-x) = x^2/2 - x^3/6 + ..., Horner coefficients for small x
_TAIL_COEFFS = tuple((-1.0) ** k / math.factorial(k + 2) for k in range(8))[::-1]
SMALL_A = 0.5


def _expm1_tail(x):
    """``x + expm1(-x)`` without cancellation for small ``x``."""
    if isinstance(x, np.ndarray):
        poly = np.zeros_like(x)
        for c in _TAIL_COEFFS:
            poly = poly * x + c
        return np.where(x < 1e-2, x * x * poly, x + np.expm1(-x))
    if x < 1e-2:
        poly = 0.0
        for c in _TAIL_COEFFS:
            poly = poly * x + c
        return x * x * poly
    return x + math.expm1(-x)


def _line_terms(ai, aj, a, u_ij, h):
    # works for floats and numpy arrays alike; returns (f(h), E(h))
    p, q = a * (1.0 - h) ** 2, a * h * h
    if isinstance(h, np.ndarray):
        u_iz, u_jz = -np.expm1(-p), -np.expm1(-q)
    else:
        u_iz, u_jz = -math.expm1(-p), -math.expm1(-q)
    s = ai + aj
    r = ai * u_iz + aj * u_jz
    if isinstance(h, np.ndarray):
        small = a < SMALL_A
        e = np.where(small, 0.0, 2.0 * s * r - r * r - 2.0 * ai * aj * u_ij)
        if small.any():
            e = np.where(small, _small_a_error(ai, aj, a, h, p, q, s, r), e)
        return s - r, e
    if a < SMALL_A:
        return s - r, _small_a_error(ai, aj, a, h, p, q, s, r)
    return s - r, 2.0 * s * r - r * r - 2.0 * ai * aj * u_ij


def _small_a_error(ai, aj, a, h, p, q, s, r):
    # E(h) with the first-order terms in a cancelled by hand; with
    # u(x) = x - tail(x) the O(a) part collapses to 2a (a_i(1-h) - a_j h)^2
    w = ai * (1.0 - h) - aj * h
    return (2.0 * a * w * w - 2.0 * s * (ai * _expm1_tail(p) + aj * _expm1_tail(q))
            + 2.0 * ai * aj * _expm1_tail(a) - r * r)


def _iterations(width, tol, max_iter):
    n = 0
    while width > tol and n < max_iter:
        width *= INV_PHI
        n += 1
    return n


def golden_section_merge(alpha_i, alpha_j, d_sq, gamma, tol=GS_TOL, max_iter=GS_MAX_ITER):
    """Best line parameter for merging two support vectors.

    Returns ``(h_opt, alpha_z, degradation_sq)``. The search bracket is
    [0, 1] for equal signs and [-1, 2] otherwise; h = 0 and h = 1 are always
    evaluated too, since the objective is bimodal for large ``gamma * d_sq``.
    """
    if d_sq <= 0.0:
        return 0.5, alpha_i + alpha_j, 0.0
    a = gamma * d_sq
    u_ij = -math.expm1(-a)
    lo, hi = (0.0, 1.0) if alpha_i * alpha_j > 0 else (-1.0, 2.0)

    neg_a, two_s = -a, 2.0 * (alpha_i + alpha_j)

    def err(h):
        # E(h) up to a constant; same arithmetic as _batch_error
        r = -(alpha_i * math.expm1((1.0 - h) * (1.0 - h) * neg_a) + alpha_j * math.expm1(h * h * neg_a))
        return (two_s - r) * r

    x1 = hi - INV_PHI * (hi - lo)
    x2 = lo + INV_PHI * (hi - lo)
    e1, e2 = err(x1), err(x2)
    for _ in range(_iterations(hi - lo, tol, max_iter)):
        if e1 < e2:
            hi, x2, e2 = x2, x1, e1
            x1 = hi - INV_PHI * (hi - lo)
            e1 = err(x1)
        else:
            lo, x1, e1 = x1, x2, e2
            x2 = lo + INV_PHI * (hi - lo)
            e2 = err(x2)
    best_h = 0.5 * (lo + hi)
    best_f, best_e = _line_terms(alpha_i, alpha_j, a, u_ij, best_h)
    for h in (1.0, 0.0):
        f, e = _line_terms(alpha_i, alpha_j, a, u_ij, h)
        if e < best_e:
            best_h, best_f, best_e = h, f, e
    return best_h, best_f, max(best_e, 0.0)


def _batch_error(ai, bj, neg_a, two_s, h):
    # E(h) up to a per-pair constant, in place where possible
    t1 = 1.0 - h
    t1 *= t1
    t1 *= neg_a
    np.expm1(t1, out=t1)
    t2 = h * h
    t2 *= neg_a
    np.expm1(t2, out=t2)
    t1 *= ai
    t2 *= bj
    t1 += t2
    np.negative(t1, out=t1)  # r = a_i u_iz + a_j u_jz
    t2 = two_s - t1
    t2 *= t1
    return t2


def golden_section_merge_batch(alpha_i, alpha_j, d_sq, gamma, tol=GS_TOL, max_iter=GS_MAX_ITER):
    """Vectorized ``golden_section_merge`` of one coefficient against many.

    ``alpha_i`` is a scalar; ``alpha_j`` and ``d_sq`` are arrays. Each pair
    follows exactly the scalar iteration, so results do not depend on the
    other pairs in the batch.
    """
    aj = np.asarray(alpha_j, dtype=np.float64)
    d_sq = np.asarray(d_sq, dtype=np.float64)
    h = np.empty_like(aj)
    f = np.empty_like(aj)
    e = np.empty_like(aj)
    same = aj * alpha_i > 0
    for mask, lo0, hi0 in ((same, 0.0, 1.0), (~same, -1.0, 2.0)):
        idx = np.flatnonzero(mask)
        if idx.size == 0:
            continue
        bj = aj[idx]
        a = gamma * d_sq[idx]
        neg_a = -a
        two_s = 2.0 * (alpha_i + bj)
        lo = np.full(idx.size, lo0)
        hi = np.full(idx.size, hi0)
        x1 = hi - INV_PHI * (hi - lo)
        x2 = lo + INV_PHI * (hi - lo)
        e1 = _batch_error(alpha_i, bj, neg_a, two_s, x1)
        e2 = _batch_error(alpha_i, bj, neg_a, two_s, x2)
        for _ in range(_iterations(hi0 - lo0, tol, max_iter)):
            left = e1 < e2
            lo = np.where(left, lo, x1)
            hi = np.where(left, x2, hi)
            xn = np.where(left, hi - INV_PHI * (hi - lo), lo + INV_PHI * (hi - lo))
            en = _batch_error(alpha_i, bj, neg_a, two_s, xn)
            x1, x2 = np.where(left, xn, x2), np.where(left, x1, xn)
            e1, e2 = np.where(left, en, e2), np.where(left, e1, en)
        u_ij = -np.expm1(-a)
        bh = 0.5 * (lo + hi)
        bf, be = _line_terms(alpha_i, bj, a, u_ij, bh)
        for end in (1.0, 0.0):
            ef, ee = _line_terms(alpha_i, bj, a, u_ij, np.full(idx.size, end))
            better = ee < be
            bh = np.where(better, end, bh)
            bf = np.where(better, ef, bf)
            be = np.where(better, ee, be)
        coincident = d_sq[idx] <= 0.0
        if coincident.any():
            bh[coincident] = 0.5
            bf[coincident] = alpha_i + bj[coincident]
            be[coincident] = 0.0
        h[idx], f[idx], e[idx] = bh, bf, np.maximum(be, 0.0)
    return h, f, e


# partner selection ------------------------------------------------------------

def select_first(model):
    """Index of the support vector with the smallest ``|alpha|`` (first on ties)."""
    if model.size == 0:
        raise InsufficientSVs("model has no support vectors")
    return int(np.argmin(np.abs(model.alpha)))


def rank_partners(model, i, M, tol=GS_TOL, max_iter=GS_MAX_ITER):
    """The ``M - 1`` best merge partners of SV ``i``, by increasing degradation."""
    if model.size < M:
        raise InsufficientSVs(f"need {M} support vectors, have {model.size}")
    eff = model.effective_alpha
    others = np.delete(np.arange(model.size), i)
    d_sq = squared_distance_rows(
        model.centers[others], model.center_sq[others], model.centers[i], model.center_sq[i]
    )
    h, f, e = golden_section_merge_batch(eff[i], eff[others], d_sq, model.gamma, tol, max_iter)
    order = np.argsort(e, kind="stable")[: M - 1]
    return [
        MergeCandidate(int(others[k]), float(h[k]), float(f[k]), float(e[k]))
        for k in order
    ]


# multi-merge ---------------------------------------------------------------------

def mm_bsgd_merge(model, i, candidates, tol=GS_TOL, max_iter=GS_MAX_ITER):
    """Cascade of binary merges: SV ``i`` with each candidate in turn.

    The first step reuses the line search done during ranking. Returns the
    merged center (dense) and its effective coefficient; the model is not
    modified.
    """
    if not candidates:
        raise ValueError("need at least one merge partner")
    eff = model.effective_alpha
    first = candidates[0]
    h = first.h_opt
    z = h * model.centers[i] + (1.0 - h) * model.centers[first.partner]
    alpha_z = first.alpha_z
    for cand in candidates[1:]:
        x = model.centers[cand.partner]
        diff = z - x
        h, alpha_z, _ = golden_section_merge(alpha_z, eff[cand.partner], float(diff @ diff), model.gamma, tol, max_iter)
        z = x + h * diff
    return z, alpha_z


class _MultiMergeProblem:
    """``||sum_i a_i phi(x_i) - a_z phi(z)||^2`` for fixed points and weights."""

    def __init__(self, points, alphas, gamma):
        self.points = np.asarray(points, dtype=np.float64)
        self.alphas = np.asarray(alphas, dtype=np.float64)
        self.gamma = float(gamma)
        self.sq = np.einsum("ij,ij->i", self.points, self.points)
        self.total = float(self.alphas.sum())
        D = self.sq[:, None] + self.sq[None, :] - 2.0 * (self.points @ self.points.T)
        np.maximum(D, 0.0, out=D)
        # sum_ij a_i a_j (1 - k_ij), computed once per problem
        self.gram_u = float(self.alphas @ (-np.expm1(-self.gamma * D)) @ self.alphas)

    def kernel_u(self, z):
        d = squared_distance_rows(self.points, self.sq, z, float(z @ z))
        return -np.expm1(-self.gamma * d)

    def objective(self, z, alpha_z, u=None):
        if u is None:
            u = self.kernel_u(z)
        s = self.total
        return (s - alpha_z) ** 2 - self.gram_u + 2.0 * alpha_z * float(self.alphas @ u)

    def gradient(self, z, alpha_z, u=None):
        if u is None:
            u = self.kernel_u(z)
        w = self.alphas * (1.0 - u)
        return -4.0 * self.gamma * alpha_z * (w @ self.points - w.sum() * z)

    def best_alpha(self, z, u=None):
        if u is None:
            u = self.kernel_u(z)
        return float(self.alphas @ (1.0 - u))


def mm_gd_objective(points, alphas, z, alpha_z, gamma):
    """Squared feature-space error of replacing the weighted points by ``alpha_z phi(z)``."""
    return _MultiMergeProblem(points, alphas, gamma).objective(np.asarray(z, dtype=np.float64), alpha_z)


def mm_gd_gradient(points, alphas, z, alpha_z, gamma):
    """Analytic gradient of ``mm_gd_objective`` with respect to ``z``."""
    return _MultiMergeProblem(points, alphas, gamma).gradient(np.asarray(z, dtype=np.float64), alpha_z)


def mm_gd_merge(points, alphas, gamma, tol=GD_TOL, max_iter=GD_MAX_ITER, z0=None):
    """Merge M weighted points into one by gradient descent on the center.

    Starts at the coefficient-weighted mean with ``alpha_z = sum(alphas)``
    (or at ``z0`` with the optimal coefficient). Each iteration takes a
    backtracking step along the gradient, scaled so that a unit step is the
    fixed-point pre-image update, then re-optimizes ``alpha_z`` in closed form.
    Stops when the decrease falls to ``tol * max(1, f)``.

    Returns ``(z, alpha_z, trace)`` where ``trace`` lists the objective at the
    start and after every iteration (non-increasing).
    """
    prob = _MultiMergeProblem(points, alphas, gamma)
    if z0 is None:
        amax = float(np.abs(prob.alphas).max())
        if abs(prob.total) <= DENOM_EPSILON * amax:
            raise DegenerateWeights(f"coefficient sum {prob.total!r} is numerically zero")
        z = (prob.alphas @ prob.points) / prob.total
        alpha_z = prob.total
        u = prob.kernel_u(z)
    else:
        z = np.array(z0, dtype=np.float64)
        u = prob.kernel_u(z)
        alpha_z = prob.best_alpha(z, u)
    f = prob.objective(z, alpha_z, u)
    trace = [f]
    for _ in range(max_iter):
        w = prob.alphas * (1.0 - u)
        wsum = float(w.sum())
        grad = -4.0 * prob.gamma * alpha_z * (w @ prob.points - wsum * z)
        curvature = 4.0 * prob.gamma * abs(alpha_z * wsum)
        if curvature == 0.0 or not np.any(grad):
            break
        direction = grad / curvature
        step = 1.0
        for _ in range(GD_MAX_HALVINGS):
            z_new = z - step * direction
            u_new = prob.kernel_u(z_new)
            f_new = prob.objective(z_new, alpha_z, u_new)
            if f_new < f:
                break
            step *= 0.5
        else:
            break
        a_new = prob.best_alpha(z_new, u_new)
        f_opt = prob.objective(z_new, a_new, u_new)
        if f_opt <= f_new:
            alpha_z, f_new = a_new, f_opt
        z, u = z_new, u_new
        f_prev, f = f, f_new
        trace.append(f)
        if f_prev - f <= tol * max(1.0, f_prev):
            break
    # a start that is already stationary in z still gets the optimal coefficient
    a_best = prob.best_alpha(z, u)
    f_best = prob.objective(z, a_best, u)
    if f_best < f:
        alpha_z = a_best
        trace.append(f_best)
    return z, alpha_z, trace


def realized_degradation(points, alphas, z, alpha_z, gamma):
    return max(mm_gd_objective(points, alphas, z, alpha_z, gamma), 0.0)


# dispatch ---------------------------------------------------------------------

def remove_smallest(model):
    """Drop the SV with the smallest ``|alpha|``; returns the squared degradation."""
    i = select_first(model)
    a = float(model.effective_alpha[i])
    model.remove([i])
    return a * a


def budget_maintain(model, config):
    """Shrink an over-budget model; returns a MaintenanceResult.

    ``config`` supplies ``strategy``, ``mergees`` and the search tolerances
    (see ``sgd.TrainConfig``). Merging strategies leave
    ``size - (mergees - 1)`` support vectors, removal leaves ``size - 1``.
    """
    strategy = config.strategy
    if strategy == "removal":
        return MaintenanceResult(remove_smallest(model), 1)
    M = 2 if strategy == "merge" else config.mergees
    if model.size < M:
        raise InsufficientSVs(f"need {M} support vectors, have {model.size}")
    tol, max_iter = config.gs_tol, config.gs_max_iter
    i = select_first(model)
    cands = rank_partners(model, i, M, tol, max_iter)
    members = [i] + [c.partner for c in cands]
    points = model.centers[members].copy()
    alphas = model.effective_alpha[members]
    trace = []
    if strategy == "merge":
        best = cands[0]
        h = best.h_opt
        z = h * model.centers[i] + (1.0 - h) * model.centers[best.partner]
        alpha_z = best.alpha_z
    elif strategy == "mm-bsgd":
        z, alpha_z = mm_bsgd_merge(model, i, cands, tol, max_iter)
    elif strategy == "mm-gd":
        z0 = None
        if config.gd_refine:
            z0, _ = mm_bsgd_merge(model, i, cands, tol, max_iter)
        try:
            z, alpha_z, trace = mm_gd_merge(points, alphas, model.gamma, config.gd_tol, config.gd_max_iter, z0)
        except DegenerateWeights:
            z, alpha_z = mm_bsgd_merge(model, i, cands, tol, max_iter)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    degradation = realized_degradation(points, alphas, z, alpha_z, model.gamma)
    model.remove(members)
    if alpha_z != 0.0:
        model.add_sv(z, alpha_z)
    return MaintenanceResult(degradation, len(members) - 1, trace)
