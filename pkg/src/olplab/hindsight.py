"""Exact offline optima: hindsight LP value, hindsight dual, and the
expected-LP dual oracle for finite supports.

The workhorse is a dense bounded-variable revised simplex on the primal
(basis is only m x m).  A presolve groups duplicate (reward, request)
columns, which collapses finite-support instances to K variables, nonbasic
variables move between bounds in cheap flip steps between true pivots, and
large ungrouped instances solve on a sifted working set of columns, so
desk-scale horizons (T ~ 1e5, m <= 10) take fractions of a second to a few
seconds.  Every solve validates strong duality and complementary slackness
internally before returning.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .distributions import FiniteSupport

__all__ = [
    "OfflineSolution", "DualFace", "SimplexError", "SimplexOptions",
    "solve_knapsack_m1", "solve_simplex", "solve_expected_dual_finite",
    "format_instance_dump",
]

# Documented solver constants; override per solve via SimplexOptions.
PIVOT_TOL = 1e-10
FEAS_TOL = 1e-9
CHECK_TOL = 1e-8
DEGENERATE_STREAK = 30
SIFT_THRESHOLD = 12000


@dataclass(frozen=True)
class SimplexOptions:
    pivot_tol: float = PIVOT_TOL
    feas_tol: float = FEAS_TOL
    check_tol: float = CHECK_TOL
    max_pivots: Optional[int] = None


@dataclass(frozen=True)
class DualFace:
    """Polyhedral description {y : eq_lhs y = eq_rhs, ineq_lhs y <= ineq_rhs}
    of the optimal dual set, anchored at one optimal vertex."""

    vertex: np.ndarray
    eq_lhs: np.ndarray
    eq_rhs: np.ndarray
    ineq_lhs: np.ndarray
    ineq_rhs: np.ndarray

    def distance(self, y0: np.ndarray, tol: float = 1e-9) -> float:
        """Euclidean distance from y0 to the face.

        Projects onto the affine hull by least squares first; if that point
        violates an inequality, falls back to Dykstra iterations over the
        halfspaces (each has a closed-form projection).
        """
        y0 = np.asarray(y0, dtype=np.float64)
        proj = self._affine_project(y0)
        if self._feasible(proj, tol):
            return float(np.linalg.norm(y0 - proj))
        proj = self._dykstra(y0, tol)
        return float(np.linalg.norm(y0 - proj))

    def _affine_project(self, y0):
        if len(self.eq_rhs) == 0:
            return y0.copy()
        lam, *_ = np.linalg.lstsq(
            self.eq_lhs @ self.eq_lhs.T, self.eq_lhs @ y0 - self.eq_rhs, rcond=None)
        return y0 - self.eq_lhs.T @ lam

    def _feasible(self, y, tol):
        if len(self.eq_rhs) and np.max(np.abs(self.eq_lhs @ y - self.eq_rhs)) > tol:
            return False
        return not len(self.ineq_rhs) or np.max(self.ineq_lhs @ y - self.ineq_rhs) <= tol

    def _dykstra(self, y0, tol, max_cycles=20000):
        sets = [("eq", None)] if len(self.eq_rhs) else []
        sets += [("half", i) for i in range(len(self.ineq_rhs))]
        y = y0.copy()
        incr = {k: np.zeros_like(y0) for k in range(len(sets))}
        for _ in range(max_cycles):
            shift = 0.0
            for k, (kind, i) in enumerate(sets):
                v = y + incr[k]
                if kind == "eq":
                    p = self._affine_project(v)
                else:
                    g, h = self.ineq_lhs[i], self.ineq_rhs[i]
                    ex = g @ v - h
                    p = v - g * (ex / (g @ g)) if ex > 0 else v
                incr[k] = v - p
                shift = max(shift, float(np.max(np.abs(p - y))))
                y = p
            if shift < 1e-13 and self._feasible(y, tol):
                break
        return y


@dataclass(frozen=True)
class OfflineSolution:
    """Optimal primal/dual pair of one bounded-variable LP.

    ``value`` is the primal objective; for the expected dual of a finite
    support it is the per-period optimum f(y*).  ``basis`` is the optimal
    basis certificate and ``face``, when built, describes the full optimal
    dual set (nonempty interior only under degeneracy).
    """

    value: float
    x: np.ndarray
    y: np.ndarray
    status: str
    basis: np.ndarray
    face: Optional[DualFace] = None


class SimplexError(RuntimeError):
    """Numerical failure after the pivot cap; carries an instance dump."""


def format_instance_dump(rewards, requests, b, upper=None) -> str:
    """Plain-text instance dump: 'T m' header, budget row, then c a rows."""
    requests = np.atleast_2d(requests)
    lines = [f"{len(rewards)} {requests.shape[1]}",
             " ".join(repr(float(v)) for v in np.atleast_1d(b))]
    if upper is not None:
        lines.append("upper " + " ".join(repr(float(v)) for v in upper))
    for cj, aj in zip(rewards, requests):
        lines.append(" ".join(repr(float(v)) for v in (cj, *aj)))
    return "\n".join(lines)


def solve_knapsack_m1(rewards: np.ndarray, requests: np.ndarray, budget: float) -> OfflineSolution:
    """Exact greedy solution of the single-resource relaxed knapsack.

    Items sort by reward/request ratio (zero-request positive-reward items
    first, ties broken by earlier index); at most one item is fractional.
    The dual price is the ratio at the breakpoint, 0 if the budget is slack.
    """
    c = np.asarray(rewards, dtype=np.float64)
    a = np.asarray(np.ravel(requests), dtype=np.float64)
    if np.any(a < 0):
        raise ValueError("knapsack path requires nonnegative requests")
    if budget < 0:
        raise ValueError("budget must be nonnegative")
    n = len(c)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(a > 0, c / np.where(a > 0, a, 1.0), np.where(c > 0, np.inf, -np.inf))
    ratio = np.where(c > 0, ratio, -np.inf)
    order = np.lexsort((np.arange(n), -ratio))
    eligible = ratio[order] > -np.inf
    cum = np.cumsum(np.where(eligible, a[order], 0.0))

    x = np.zeros(n)
    y = 0.0
    if not np.any(eligible):
        k = 0
    else:
        last = int(np.max(np.nonzero(eligible)[0])) + 1
        k = int(np.searchsorted(cum[:last], budget, side="right"))
        x[order[:k]] = np.where(eligible[:k], 1.0, 0.0)
        if k < last:
            j = order[k]
            if eligible[k] and a[j] > 0:
                used = cum[k - 1] if k > 0 else 0.0
                x[j] = min(1.0, max(0.0, (budget - used) / a[j]))
            y = max(0.0, float(ratio[j]))
    value = float(c @ x)
    yvec = np.array([y])
    _validate(c, a.reshape(-1, 1), np.array([budget]), np.ones(n), x, yvec, value)
    return OfflineSolution(value, x, yvec, "optimal", np.array([], dtype=np.int64))


def solve_simplex(
    rewards: np.ndarray,
    requests: np.ndarray,
    b: np.ndarray,
    upper: Optional[np.ndarray] = None,
    options: SimplexOptions = SimplexOptions(),
    with_face: bool = False,
    warm_price: Optional[np.ndarray] = None,
) -> OfflineSolution:
    """Bounded-variable revised primal simplex on max c.x, Ax <= b, 0 <= x <= u.

    Dantzig pricing with batched bound flips between pivots; switches to
    Bland's rule after a streak of degenerate pivots to rule out cycling.
    Raises SimplexError with a plain-text instance dump if the pivot cap is
    hit.
    """
    c0 = np.asarray(rewards, dtype=np.float64)
    a0 = np.asarray(requests, dtype=np.float64)
    if a0.ndim == 1:
        a0 = a0.reshape(-1, 1)
    b = np.atleast_1d(np.asarray(b, dtype=np.float64))
    n0 = len(c0)
    u0 = np.ones(n0) if upper is None else np.asarray(upper, dtype=np.float64)
    if np.any(b < 0):
        raise ValueError("b must be nonnegative (x = 0 is the feasible anchor)")

    # Presolve 1: drop columns that can never help (c <= 0 with a >= 0).
    keep = (c0 > 0) | np.any(a0 < 0, axis=1)
    keep &= u0 > 0
    # Presolve 2: merge duplicate (reward, request) columns.
    cols = np.column_stack([c0[keep], a0[keep]])
    uniq, inverse = np.unique(cols, axis=0, return_inverse=True)
    ug = np.zeros(len(uniq))
    np.add.at(ug, inverse, u0[keep])
    cg, ag = uniq[:, 0].copy(), uniq[:, 1:].copy()

    amat = np.ascontiguousarray(ag.T)
    if len(cg) > SIFT_THRESHOLD:
        xg, y, basis = _sifted_simplex(cg, amat, b, ug, options, warm_price)
    else:
        warm = None if warm_price is None else (cg - ag @ warm_price) > 0
        xg, y, basis = _bounded_simplex(cg, amat, b, ug, options, c0, a0, u0,
                                        warm_accept=warm)

    # Expand grouped values back to original columns (greedy fill by index).
    x = np.zeros(n0)
    kept_idx = np.nonzero(keep)[0]
    counts = np.bincount(inverse, minlength=len(uniq))
    single = counts[inverse] == 1
    x[kept_idx[single]] = xg[inverse[single]]
    for g in np.nonzero(counts > 1)[0]:
        members = kept_idx[inverse == g]
        cum = np.cumsum(u0[members])
        nfull = int(np.searchsorted(cum, xg[g], side="right"))
        x[members[:nfull]] = u0[members[:nfull]]
        if nfull < len(members):
            used = cum[nfull - 1] if nfull > 0 else 0.0
            x[members[nfull]] = min(u0[members[nfull]], max(0.0, xg[g] - used))
    value = float(c0 @ x)
    _validate(c0, a0, b, u0, x, y, value, options.check_tol)
    face = _dual_face(c0, a0, b, u0, x, y, options.check_tol) if with_face else None
    return OfflineSolution(value, x, y, "optimal", basis, face)


def solve_expected_dual_finite(support: FiniteSupport, d: np.ndarray) -> OfflineSolution:
    """Optimal dual y* of the expected LP of a finite support.

    Solves the probability-weighted acceptance LP and reports the dual
    vertex, the per-period optimum f(y*) as ``value``, the atom acceptance
    fractions as ``x``, and the optimal-face description for distance
    diagnostics.
    """
    d = np.atleast_1d(np.asarray(d, dtype=np.float64))
    cw = support.probs * support.rewards
    aw = support.probs[:, None] * support.requests
    sol = solve_simplex(cw, aw, d, with_face=True)
    f_star = float(d @ sol.y) + float(
        support.probs @ np.maximum(support.rewards - support.requests @ sol.y, 0.0))
    return OfflineSolution(f_star, sol.x, sol.y, sol.status, sol.basis, sol.face)


def _warm_price(c, a, b, u, sample=2000):
    """Near-optimal dual price from an exact solve of a stride subsample.

    The subsample LP keeps the per-period resource rate of the full
    instance, so its dual converges to the full-instance dual.  Only used
    to seed the sifting band; correctness never depends on its accuracy.
    """
    m, n = a.shape
    step = max(1, n // sample)
    idx = np.arange(0, n, step)
    share = u[idx].sum() / u.sum()
    opts = SimplexOptions()
    _, y, _ = _bounded_simplex(
        c[idx], np.ascontiguousarray(a[:, idx]), b * share, u[idx],
        opts, c[idx], a[:, idx].T, u[idx])
    return y


def _sifted_simplex(c, a, b, u, options, warm_price=None):
    """Exact solve via a working band of columns around a warm dual price.

    Columns far on the accept side are fixed at their upper bound, far
    rejects are fixed at zero, and the simplex runs on the ambiguous band.
    Any fixed column whose sign disagrees with the sub-solve's dual price is
    unfixed and the band re-solved, so the result is the true optimum; the
    band only grows, which bounds the number of passes.
    """
    m, n = a.shape
    kbase = min(n, max(768, 256 * m))

    def build_band(price):
        """Working set sized so the sub-LP reproduces the binding structure.

        Grows the most-ambiguous-first band until the fixed accepts fit the
        budget and the band itself carries enough consumption mass to let
        every coordinate the price calls binding actually bind.
        """
        red = c - a.T @ price
        order = np.argsort(np.abs(red), kind="stable")
        k = kbase
        while True:
            in_band = np.zeros(n, dtype=bool)
            in_band[order[:k]] = True
            fixed_up = ~in_band & (red > 0)
            b_eff = b - a[:, fixed_up] @ u[fixed_up]
            if k >= n:
                return in_band, fixed_up, red
            if np.all(b_eff >= 0):
                mass = a[:, in_band] @ u[in_band]
                binding = price > options.feas_tol
                if not np.any(binding & (mass < 1.5 * b_eff + 0.01 * b)):
                    return in_band, fixed_up, red
            k = min(n, 2 * k)

    if warm_price is None:
        warm_price = _warm_price(c, a, b, u)
    in_band, fixed_up, red = build_band(warm_price)
    recenters = 3
    for _ in range(60):
        band = np.nonzero(in_band)[0]
        b_eff = b - a[:, fixed_up] @ u[fixed_up]
        xb_band, y, basis = _bounded_simplex(
            c[band], np.ascontiguousarray(a[:, band]), b_eff, u[band],
            options, c[band], a[:, band].T, u[band],
            warm_accept=red[band] > 0)
        red = c - a.T @ y
        bad = (~in_band) & ((fixed_up & (red < -options.pivot_tol))
                            | (~fixed_up & (red > options.pivot_tol)))
        if not bad.any():
            x = np.where(fixed_up, u, 0.0)
            x[band] = xb_band
            return x, y, basis
        if recenters > 0 and bad.sum() > len(band) // 8:
            # Sub-solve's price is a much better center; rebuild the band.
            in_band, fixed_up, red = build_band(y)
            recenters -= 1
        else:
            in_band |= bad
            fixed_up &= ~bad
    # Band kept growing without settling: fall back to the dense solve.
    return _bounded_simplex(c, a, b, u, options, c, a.T, u)  # pragma: no cover


def _bounded_simplex(c, a, b, u, options, c_dump, a_dump, u_dump, warm_accept=None):
    m, n = a.shape
    ncols = n + m
    max_pivots = options.max_pivots if options.max_pivots is not None else 50 * ncols + 10000
    ptol, ftol = options.pivot_tol, options.feas_tol

    basis = np.arange(n, ncols)
    in_basis = np.zeros(ncols, dtype=bool)
    in_basis[basis] = True
    at_upper = np.zeros(ncols, dtype=bool)
    cfull = np.concatenate([c, np.zeros(m)])
    ufull = np.concatenate([u, np.full(m, np.inf)])

    def col(j):
        if j < n:
            return a[:, j]
        e = np.zeros(m)
        e[j - n] = 1.0
        return e

    col_norms = np.concatenate([
        np.maximum(np.linalg.norm(a, axis=0), 1e-12), np.ones(m)])

    if warm_accept is not None and warm_accept.any():
        # Start nonbasics at the caller's guessed accept set; the simplex
        # then only repairs the disagreement with the true optimum.  Demote
        # the least valuable accepts until the slack basis stays feasible.
        at_upper[:n] = warm_accept
        acc = np.nonzero(warm_accept)[0]
        cons = a[:, acc] @ u[acc]
        if np.any(cons > b):
            order = acc[np.argsort(c[acc] / col_norms[acc], kind="stable")]
            removed = np.cumsum(a[:, order] * u[order][None, :], axis=1)
            fits = np.all(cons[:, None] - removed <= b[:, None], axis=0)
            k = int(np.argmax(fits)) + 1 if fits.any() else len(order)
            at_upper[order[:k]] = False

    def refactor():
        bmat = np.empty((m, m))
        for i, j in enumerate(basis):
            bmat[:, i] = col(j)
        try:
            y = np.linalg.solve(bmat.T, cfull[basis])
            binv = np.linalg.inv(bmat)
        except np.linalg.LinAlgError:  # pragma: no cover - guarded by pivot rule
            raise SimplexError("singular basis\n" + format_instance_dump(c_dump, a_dump, b, u_dump))
        rhs = b.copy()
        up_x = np.nonzero(at_upper[:n])[0]
        if len(up_x):
            rhs -= a[:, up_x] @ u[up_x]
        return y, binv, binv @ rhs

    pivots = 0
    degen_streak = 0
    bland = False
    while True:
        # Full pricing pass: reduced costs for every column at the current
        # basis; basic values are recomputed from statuses (no drift).
        y, binv, xb = refactor()
        ub_basic = ufull[basis]
        bland = degen_streak > DEGENERATE_STREAK
        dx = c - a.T @ y
        dall = np.concatenate([dx, -y])
        favorable = np.where(
            in_basis, False,
            np.where(at_upper, dall < -ptol, dall > ptol))
        cand = np.nonzero(favorable)[0]
        if len(cand) == 0:
            break
        if bland:
            cand = np.sort(cand)
        else:
            # Normalized (steepest-edge style) ordering: for single-resource
            # instances this walks columns by reward/consumption ratio and
            # avoids the Dantzig zigzag on knapsack-like columns.
            gain = np.abs(dall[cand]) / col_norms[cand]
            cand = cand[np.argsort(-gain, kind="stable")]
            # Bulk bound flips: take the sorted x-columns while every basic
            # variable stays within bounds; prices are unchanged by flips.
            bulk = cand[cand < n]
            if len(bulk) > 8:
                w_bulk = binv @ a[:, bulk]
                step = np.where(at_upper[bulk], -u[bulk], u[bulk])
                path = xb[:, None] - np.cumsum(w_bulk * step[None, :], axis=1)
                ok = np.all(path >= -ftol, axis=0)
                fin = np.isfinite(ub_basic)
                if fin.any():
                    ok &= np.all(path[fin] <= ub_basic[fin, None] + ftol, axis=0)
                nflip = int(np.argmin(ok)) if not ok.all() else len(bulk)
                if nflip > 0:
                    flips = bulk[:nflip]
                    xb = path[:, nflip - 1]
                    at_upper[flips] = ~at_upper[flips]

        # Walk the priced list.  The order is allowed to go stale after a
        # pivot, but each candidate's reduced cost is recomputed exactly, so
        # only the selection heuristic degrades, never correctness.  Bland
        # mode re-prices after every pivot (anti-cycling).
        walk_pivots = 0
        for e in cand:
            if in_basis[e]:
                continue
            d_e = (c[e] - a[:, e] @ y) if e < n else -y[e - n]
            good = (d_e < -ptol) if at_upper[e] else (d_e > ptol)
            if not good:
                continue
            direction = -1.0 if at_upper[e] else 1.0
            w = binv @ col(e)
            dw = direction * w
            span = ufull[e]
            dmax = span
            blocking = -1
            block_up = False
            for i in range(m):
                if dw[i] > ptol:
                    lim = xb[i] / dw[i]
                    to_up = False
                elif dw[i] < -ptol and np.isfinite(ub_basic[i]):
                    lim = (ub_basic[i] - xb[i]) / (-dw[i])
                    to_up = True
                else:
                    continue
                lim = max(lim, 0.0)
                better = lim < dmax - ftol or (
                    bland and blocking >= 0 and lim < dmax + ftol and basis[i] < basis[blocking])
                if better:
                    dmax = lim
                    blocking = i
                    block_up = to_up
            if blocking < 0:
                if not np.isfinite(span):
                    raise SimplexError(
                        "unbounded ray\n" + format_instance_dump(c_dump, a_dump, b, u_dump))
                # Bound flip: basis and prices unchanged, keep walking.
                xb -= dw * span
                at_upper[e] = not at_upper[e]
                continue
            # True pivot: entering replaces the blocking basic variable.
            xb -= dw * dmax
            enter_val = dmax if direction > 0 else ufull[e] - dmax
            leave = basis[blocking]
            at_upper[leave] = block_up
            in_basis[leave] = False
            basis[blocking] = e
            in_basis[e] = True
            at_upper[e] = False
            xb[blocking] = enter_val
            degen_streak = degen_streak + 1 if dmax <= ftol else 0
            pivots += 1
            walk_pivots += 1
            if pivots > max_pivots:
                raise SimplexError(
                    f"pivot cap {max_pivots} exceeded\n"
                    + format_instance_dump(c_dump, a_dump, b, u_dump))
            if degen_streak > DEGENERATE_STREAK and not bland:
                bland = True
                break
            if bland or walk_pivots >= 512:
                break
            bmat = np.empty((m, m))
            for i, j in enumerate(basis):
                bmat[:, i] = col(j)
            try:
                y = np.linalg.solve(bmat.T, cfull[basis])
                binv = np.linalg.inv(bmat)
            except np.linalg.LinAlgError:  # pragma: no cover
                raise SimplexError(
                    "singular basis\n" + format_instance_dump(c_dump, a_dump, b, u_dump))
            ub_basic = ufull[basis]

    x = np.where(at_upper[:n], u, 0.0)
    for i, j in enumerate(basis):
        if j < n:
            x[j] = min(max(xb[i], 0.0), u[j])
    y = np.maximum(y, 0.0)
    return x, y, basis.copy()


def _validate(c, a, b, u, x, y, value, tol=CHECK_TOL):
    """Strong duality plus the primal optimality conditions, every solve."""
    dual = float(b @ y) + float(u @ np.maximum(c - a @ y, 0.0))
    scale = max(1.0, abs(value))
    if abs(dual - value) > tol * scale:
        raise SimplexError(
            f"duality gap {dual - value!r} exceeds {tol} (primal {value!r}, dual {dual!r})\n"
            + format_instance_dump(c, a, b, u))
    red = c - a @ y
    if np.any(x[red < -tol] > tol) or np.any((u - x)[red > tol] > tol * np.maximum(u[red > tol], 1.0)):
        raise SimplexError("complementary slackness violated\n" + format_instance_dump(c, a, b, u))
    slack = b - x @ a
    if np.any(slack < -tol * scale) or np.any(slack[y > tol] > tol * scale):
        raise SimplexError("primal feasibility/slackness violated\n" + format_instance_dump(c, a, b, u))


def _dual_face(c, a, b, u, x, y, tol):
    """Optimal dual set from complementary slackness with the primal optimum."""
    m = a.shape[1]
    interior = (x > tol * np.maximum(u, 1.0)) & (x < u - tol * np.maximum(u, 1.0))
    at_up = x >= u - tol * np.maximum(u, 1.0)
    at_lo = ~interior & ~at_up
    eq_lhs = [a[j] for j in np.nonzero(interior)[0]]
    eq_rhs = [c[j] for j in np.nonzero(interior)[0]]
    ineq_lhs = []
    ineq_rhs = []
    for j in np.nonzero(at_up)[0]:
        ineq_lhs.append(a[j])          # priced cost stays below the reward
        ineq_rhs.append(c[j])
    for j in np.nonzero(at_lo)[0]:
        ineq_lhs.append(-a[j])         # priced cost stays above the reward
        ineq_rhs.append(-c[j])
    slack = b - x @ a
    for i in range(m):
        row = np.zeros(m)
        row[i] = 1.0
        if slack[i] > tol * max(1.0, abs(b[i])):
            eq_lhs.append(row)         # slack resource forces price 0
            eq_rhs.append(0.0)
        ineq_lhs.append(-row)          # prices stay nonnegative
        ineq_rhs.append(0.0)
    return DualFace(
        vertex=np.asarray(y, dtype=np.float64).copy(),
        eq_lhs=np.array(eq_lhs) if eq_lhs else np.zeros((0, m)),
        eq_rhs=np.array(eq_rhs),
        ineq_lhs=np.array(ineq_lhs) if ineq_lhs else np.zeros((0, m)),
        ineq_rhs=np.array(ineq_rhs),
    )
