"""Convex geometry kernel: AABBs, centroids, and hull-to-hull distance.

Hull distance comes in two independent implementations:

* :func:`hull_distance` — a support-function minimization in the Minkowski
  difference (GJK-style).  It never builds an explicit hull mesh; each step
  queries one support point and re-solves a <=4-point min-norm subproblem in
  closed form.  Termination is certified by the sandwich bound
  ``||v|| - <v, w>/||v|| <= eps``: the current iterate is an upper bound and
  the support plane gives a lower bound, so a returned distance is always
  within tolerance of the true value.
* :func:`hull_distance_oracle` — an accelerated projected-gradient method on
  the product of two probability simplices, stopped by the same style of
  support-plane certificate.  It shares no code with the GJK path and exists
  so the two can cross-check each other.

Both treat a point set's convex hull implicitly; intersecting hulls yield a
distance of exactly 0.0.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import sqrt

import numpy as np

from .errors import DegenerateInputError, NotConvergedError

DEFAULT_TOL = 1e-9


def as_coords(points) -> np.ndarray:
    """Coerce a PointSet-like object or array to a validated (n, 3) float64 array."""
    coords = getattr(points, "coords", points)
    arr = np.ascontiguousarray(coords, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise DegenerateInputError(f"expected (n, 3) coordinates, got shape {arr.shape}")
    if arr.shape[0] < 1:
        raise DegenerateInputError("point set is empty")
    if not np.all(np.isfinite(arr)):
        raise DegenerateInputError("coordinates contain non-finite values")
    return arr


# ---------------------------------------------------------------------------
# Axis-aligned bounding boxes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Aabb:
    min_corner: tuple[float, float, float]
    max_corner: tuple[float, float, float]

    @property
    def extents(self) -> tuple[float, float, float]:
        return (
            self.max_corner[0] - self.min_corner[0],
            self.max_corner[1] - self.min_corner[1],
            self.max_corner[2] - self.min_corner[2],
        )

    def contains(self, point, slack: float = 0.0) -> bool:
        return all(
            self.min_corner[i] - slack <= point[i] <= self.max_corner[i] + slack
            for i in range(3)
        )


def aabb(points) -> Aabb:
    arr = as_coords(points)
    lo = arr.min(axis=0)
    hi = arr.max(axis=0)
    return Aabb(tuple(float(c) for c in lo), tuple(float(c) for c in hi))


def aabb_volume(box: Aabb) -> float:
    ex, ey, ez = box.extents
    return ex * ey * ez


def centroid(points) -> tuple[float, float, float]:
    arr = as_coords(points)
    c = arr.mean(axis=0)
    return (float(c[0]), float(c[1]), float(c[2]))


def support_value(points, direction) -> float:
    """Value of the support function max_p <p, direction> over the point set."""
    arr = as_coords(points)
    d = np.asarray(direction, dtype=np.float64)
    return float(np.max(arr @ d))


def bounding_diagonal(a, b) -> float:
    """Diagonal of the AABB enclosing both point sets; the tolerance scale."""
    arr_a, arr_b = as_coords(a), as_coords(b)
    lo = np.minimum(arr_a.min(axis=0), arr_b.min(axis=0))
    hi = np.maximum(arr_a.max(axis=0), arr_b.max(axis=0))
    return float(np.linalg.norm(hi - lo))


# ---------------------------------------------------------------------------
# GJK-style hull distance
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HullDistanceResult:
    """Certified hull distance with witness points on each hull.

    ``coeffs_a`` / ``coeffs_b`` give the convex weights over input-point
    indices that realize the witnesses, so callers can audit that each witness
    truly lies in its hull.
    """

    distance: float
    witness_a: tuple[float, float, float]
    witness_b: tuple[float, float, float]
    converged: bool
    iterations: int
    coeffs_a: dict[int, float]
    coeffs_b: dict[int, float]


def _dot(u, v) -> float:
    return u[0] * v[0] + u[1] * v[1] + u[2] * v[2]


def _combo(ws, idxs, lam):
    x = y = z = 0.0
    for i, l in zip(idxs, lam):
        w = ws[i]
        x += l * w[0]
        y += l * w[1]
        z += l * w[2]
    return (x, y, z)


# Subsets that contain the most recently added point, sizes ascending.  After
# a support point is appended at index n-1, the improved min-norm point (if
# any) must use it; older subsets were already covered by the previous iterate.
_SUBSETS_WITH_LAST = {
    1: ((0,),),
    2: ((1,), (0, 1)),
    3: ((2,), (0, 2), (1, 2), (0, 1, 2)),
    4: ((3,), (0, 3), (1, 3), (2, 3), (0, 1, 3), (0, 2, 3), (1, 2, 3), (0, 1, 2, 3)),
}

_LAMBDA_FEASIBLE = -1e-12


def _solve_subset(ws, idxs):
    """Min-norm point of the affine hull of ``ws[idxs]``; None if infeasible.

    Returns (lam, v, n2) with lam clamped to the simplex, so v is always a
    true convex combination (a valid upper-bound witness) even when the
    unconstrained affine solve was slightly outside.
    """
    k = len(idxs)
    if k == 1:
        w = ws[idxs[0]]
        return (1.0,), w, _dot(w, w)
    if k == 2:
        y1, y2 = ws[idxs[0]], ws[idxs[1]]
        d = (y1[0] - y2[0], y1[1] - y2[1], y1[2] - y2[2])
        den = _dot(d, d)
        if den <= 0.0:
            return None
        t = _dot(y1, d) / den
        lam = (1.0 - t, t)
    elif k == 3:
        y1, y2, y3 = (ws[i] for i in idxs)
        u = (y2[0] - y1[0], y2[1] - y1[1], y2[2] - y1[2])
        w3 = (y3[0] - y1[0], y3[1] - y1[1], y3[2] - y1[2])
        g11, g12, g22 = _dot(u, u), _dot(u, w3), _dot(w3, w3)
        det = g11 * g22 - g12 * g12
        if det <= 0.0:
            return None
        b1, b2 = -_dot(y1, u), -_dot(y1, w3)
        s = (b1 * g22 - b2 * g12) / det
        t = (g11 * b2 - g12 * b1) / det
        lam = (1.0 - s - t, s, t)
    else:
        y1, y2, y3, y4 = (ws[i] for i in idxs)
        u = (y2[0] - y1[0], y2[1] - y1[1], y2[2] - y1[2])
        w3 = (y3[0] - y1[0], y3[1] - y1[1], y3[2] - y1[2])
        x = (y4[0] - y1[0], y4[1] - y1[1], y4[2] - y1[2])
        # Cramer on [u w3 x] z = -y1 via scalar triple products.
        cx = (w3[1] * x[2] - w3[2] * x[1],
              w3[2] * x[0] - w3[0] * x[2],
              w3[0] * x[1] - w3[1] * x[0])
        det = _dot(u, cx)
        if det == 0.0:
            return None
        m = (-y1[0], -y1[1], -y1[2])
        s = _dot(m, cx) / det
        cx2 = (m[1] * x[2] - m[2] * x[1],
               m[2] * x[0] - m[0] * x[2],
               m[0] * x[1] - m[1] * x[0])
        t = _dot(u, cx2) / det
        cx3 = (w3[1] * m[2] - w3[2] * m[1],
               w3[2] * m[0] - w3[0] * m[2],
               w3[0] * m[1] - w3[1] * m[0])
        r = _dot(u, cx3) / det
        lam = (1.0 - s - t - r, s, t, r)

    if any(l < _LAMBDA_FEASIBLE for l in lam):
        return None
    total = 0.0
    clamped = []
    for l in lam:
        l = l if l > 0.0 else 0.0
        clamped.append(l)
        total += l
    if total <= 0.0:
        return None
    lam = tuple(l / total for l in clamped)
    v = _combo(ws, idxs, lam)
    return lam, v, _dot(v, v)


def hull_distance(a, b, tol: float = DEFAULT_TOL,
                  max_iterations: int | None = None) -> HullDistanceResult:
    """Distance between the convex hulls of two point sets.

    ``tol`` is relative to the bounding diagonal of the union of both sets.
    Raises :class:`NotConvergedError` if the iteration cap (default
    ``10 * (len(a) + len(b)) + 100``) is hit before the sandwich bound closes;
    intersecting hulls return distance 0.0 with ``converged`` True.
    """
    arr_a, arr_b = as_coords(a), as_coords(b)
    na, nb = arr_a.shape[0], arr_b.shape[0]

    lo = np.minimum(arr_a.min(axis=0), arr_b.min(axis=0))
    hi = np.maximum(arr_a.max(axis=0), arr_b.max(axis=0))
    diag = float(np.linalg.norm(hi - lo))
    eps = tol * diag if diag > 0.0 else tol
    cap = max_iterations if max_iterations is not None else 10 * (na + nb) + 100

    pts_a = [tuple(row) for row in arr_a]
    pts_b = [tuple(row) for row in arr_b]

    w0 = (pts_a[0][0] - pts_b[0][0],
          pts_a[0][1] - pts_b[0][1],
          pts_a[0][2] - pts_b[0][2])
    simplex_w = [w0]
    simplex_ij = [(0, 0)]
    lam = (1.0,)
    v = w0
    n2 = _dot(v, v)
    best_lb = 0.0

    def _result(distance: float, iterations: int) -> HullDistanceResult:
        coeffs_a: dict[int, float] = {}
        coeffs_b: dict[int, float] = {}
        wa = [0.0, 0.0, 0.0]
        wb = [0.0, 0.0, 0.0]
        for (ia, ib), l in zip(simplex_ij, lam):
            if l == 0.0:
                continue
            coeffs_a[ia] = coeffs_a.get(ia, 0.0) + l
            coeffs_b[ib] = coeffs_b.get(ib, 0.0) + l
            pa, pb = pts_a[ia], pts_b[ib]
            for c in range(3):
                wa[c] += l * pa[c]
                wb[c] += l * pb[c]
        return HullDistanceResult(
            distance=distance,
            witness_a=(wa[0], wa[1], wa[2]),
            witness_b=(wb[0], wb[1], wb[2]),
            converged=True,
            iterations=iterations,
            coeffs_a=coeffs_a,
            coeffs_b=coeffs_b,
        )

    gap = float("inf")
    for iteration in range(1, cap + 1):
        vn = sqrt(n2)
        if vn <= eps:
            return _result(0.0, iteration)

        proj_a = arr_a @ v
        proj_b = arr_b @ v
        ia = int(np.argmin(proj_a))
        ib = int(np.argmax(proj_b))
        pa, pb = pts_a[ia], pts_b[ib]
        w = (pa[0] - pb[0], pa[1] - pb[1], pa[2] - pb[2])

        lb = _dot(v, w) / vn
        if lb > best_lb:
            best_lb = lb
        gap = vn - best_lb
        if gap <= eps:
            return _result(vn, iteration)

        if (ia, ib) in simplex_ij:
            # The best support point is already in the simplex: no further
            # progress is possible, yet the bound has not closed.
            raise NotConvergedError(
                f"support stalled after {iteration} iterations (gap {gap:.3e})",
                iterations=iteration, gap=gap,
            )

        simplex_w.append(w)
        simplex_ij.append((ia, ib))
        best = None
        for idxs in _SUBSETS_WITH_LAST[len(simplex_w)]:
            sol = _solve_subset(simplex_w, idxs)
            if sol is None:
                continue
            cand_lam, cand_v, cand_n2 = sol
            if best is None or cand_n2 < best[2]:
                best = (idxs, cand_lam, cand_n2, cand_v)
        if best is None or best[2] >= n2:
            raise NotConvergedError(
                f"no descent after {iteration} iterations (gap {gap:.3e})",
                iterations=iteration, gap=gap,
            )
        idxs, lam, n2, v = best
        keep_w, keep_ij, keep_lam = [], [], []
        for i, l in zip(idxs, lam):
            if l > 0.0:
                keep_w.append(simplex_w[i])
                keep_ij.append(simplex_ij[i])
                keep_lam.append(l)
        simplex_w, simplex_ij, lam = keep_w, keep_ij, tuple(keep_lam)

    raise NotConvergedError(
        f"iteration cap {cap} reached (gap {gap:.3e})", iterations=cap, gap=gap
    )


# ---------------------------------------------------------------------------
# Independent oracle: accelerated projected gradient on the simplex product
# ---------------------------------------------------------------------------


def _project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, v.shape[0] + 1)
    cond = u - css / ind > 0
    rho = ind[cond][-1]
    theta = css[rho - 1] / rho
    return np.maximum(v - theta, 0.0)


def _certificate(arr_a: np.ndarray, arr_b: np.ndarray, x: np.ndarray):
    """Upper bound ||x|| and support-plane lower bound along x/||x||."""
    ub = float(np.linalg.norm(x))
    if ub == 0.0:
        return 0.0, 0.0
    u = x / ub
    lb = float(np.min(arr_a @ u) - np.max(arr_b @ u))
    return ub, lb


def _polish(D: np.ndarray, m: int, z: np.ndarray, active_tol: float = 1e-10):
    """Equality-constrained least-squares refit on the current active set.

    Solves the KKT system restricted to coordinates with meaningful weight; if
    the refit stays (nearly) feasible it is clamped back onto the simplices
    and returned, else None.
    """
    active = np.flatnonzero(z > active_tol)
    ka = int(np.sum(active < m))
    if ka == 0 or ka == active.shape[0]:
        return None
    k = active.shape[0]
    R = D[active]
    kkt = np.zeros((k + 2, k + 2))
    kkt[:k, :k] = R @ R.T
    kkt[:k, k] = np.where(np.arange(k) < ka, 1.0, 0.0)
    kkt[:k, k + 1] = np.where(np.arange(k) >= ka, 1.0, 0.0)
    kkt[k, :k] = kkt[:k, k]
    kkt[k + 1, :k] = kkt[:k, k + 1]
    rhs = np.zeros(k + 2)
    rhs[k] = 1.0
    rhs[k + 1] = 1.0
    try:
        sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    except np.linalg.LinAlgError:  # pragma: no cover - lstsq rarely fails
        return None
    zr = sol[:k]
    if np.any(zr < -1e-7):
        return None
    zr = np.maximum(zr, 0.0)
    sa, sb = float(np.sum(zr[:ka])), float(np.sum(zr[ka:]))
    if sa <= 0.0 or sb <= 0.0:
        return None
    zr[:ka] /= sa
    zr[ka:] /= sb
    out = np.zeros_like(z)
    out[active] = zr
    return out


def hull_distance_oracle(a, b, tol: float = DEFAULT_TOL,
                         max_iterations: int = 20000,
                         check_every: int = 25) -> float:
    """Hull distance via accelerated projected gradient; cross-check oracle.

    Minimizes ``||A^T lam - B^T mu||`` over the product of probability
    simplices.  Completely separate algorithm and code path from
    :func:`hull_distance`; stops only when a support-plane certificate bounds
    the error below ``tol`` times the bounding diagonal.
    """
    arr_a, arr_b = as_coords(a), as_coords(b)
    m, n = arr_a.shape[0], arr_b.shape[0]

    lo = np.minimum(arr_a.min(axis=0), arr_b.min(axis=0))
    hi = np.maximum(arr_a.max(axis=0), arr_b.max(axis=0))
    diag = float(np.linalg.norm(hi - lo))
    if diag == 0.0:
        return 0.0
    atol = tol * diag

    D = np.concatenate([arr_a, -arr_b], axis=0)
    L = float(np.linalg.norm(D, 2)) ** 2
    if L == 0.0:
        return 0.0
    step = 1.0 / L

    # Warm start: uniform weights blended with the closest vertex pair.
    diff2 = np.sum((arr_a[:, None, :] - arr_b[None, :, :]) ** 2, axis=2)
    ia, ib = np.unravel_index(int(np.argmin(diff2)), diff2.shape)
    z = np.concatenate([np.full(m, 0.5 / m), np.full(n, 0.5 / n)])
    z[ia] += 0.5
    z[m + ib] += 0.5

    y = z.copy()
    t_mom = 1.0
    f_prev = float("inf")

    for iteration in range(1, max_iterations + 1):
        grad = D @ (D.T @ y)
        z_new = y - step * grad
        z_new[:m] = _project_simplex(z_new[:m])
        z_new[m:] = _project_simplex(z_new[m:])
        t_new = 0.5 * (1.0 + sqrt(1.0 + 4.0 * t_mom * t_mom))
        y = z_new + ((t_mom - 1.0) / t_new) * (z_new - z)
        z, t_mom = z_new, t_new

        if iteration % check_every == 0 or iteration == max_iterations:
            x = D.T @ z
            ub, lb = _certificate(arr_a, arr_b, x)
            if ub <= atol or ub - lb <= atol:
                return ub
            f_now = 0.5 * ub * ub
            if f_now > f_prev:
                # Momentum overshoot: restart acceleration from the iterate.
                y = z.copy()
                t_mom = 1.0
            f_prev = f_now
            refined = _polish(D, m, z)
            if refined is not None:
                x_ref = D.T @ refined
                ub_ref = float(np.linalg.norm(x_ref))
                if ub_ref < ub:
                    z = refined
                    y = z.copy()
                    t_mom = 1.0
                    ub2, lb2 = _certificate(arr_a, arr_b, x_ref)
                    if ub2 <= atol or ub2 - lb2 <= atol:
                        return ub2
                    f_prev = 0.5 * ub2 * ub2

    raise NotConvergedError(
        f"oracle failed to certify within {max_iterations} iterations",
        iterations=max_iterations,
    )
