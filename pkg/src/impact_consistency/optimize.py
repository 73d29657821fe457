"""Bracketed golden-section maximisation over share counts, vectorised over a batch.

The search runs in log-size space: objectives here are power laws in the
size, so a log grid brackets them evenly from one share up to 10^10.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

INV_PHI = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass
class MaxResult:
    x: np.ndarray
    fx: np.ndarray
    at_lower: np.ndarray
    at_upper: np.ndarray
    multimodal: np.ndarray

    def scalar(self):
        return MaxResult(*(v.item() if np.ndim(v) == 0 else v for v in
                           (self.x, self.fx, self.at_lower, self.at_upper, self.multimodal)))


def _safe(v):
    v = np.asarray(v, dtype=float)
    return np.where(np.isnan(v), -np.inf, v)


def maximize_log(f, lo, hi, *, grid=48, tol=1e-11, snap=1e-9, max_iter=200, polish=False) -> MaxResult:
    """Maximise ``f`` on ``[lo, hi]`` elementwise over a batch.

    ``f`` is called with sizes of shape ``batch + (k,)``; anything it closes
    over must broadcast against that (expand batch parameters with ``[..., None]``).
    A coarse log grid of ``grid`` points picks the bracket, golden-section
    refines it to ``tol`` in log-size. Maxima within ``snap`` of a bound
    are returned exactly at the bound.

    Golden-section stalls where ``f`` is flat to rounding, about ``sqrt(eps)``
    from the true argmax. ``polish=True`` then bisects on a central-difference
    slope of ``f``, which pins interior maxima to near rounding level.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    lo, hi = np.broadcast_arrays(lo, hi)
    if np.any(lo < 1) or np.any(hi < lo):
        raise ValueError("need 1 <= lo <= hi")
    ulo, uhi = np.log(lo), np.log(hi)
    t = np.linspace(0.0, 1.0, grid)
    U = ulo[..., None] + (uhi - ulo)[..., None] * t
    U[..., 0] = ulo
    U[..., -1] = uhi
    V = _safe(f(np.exp(U)))
    V = np.broadcast_to(V, U.shape)
    i = np.argmax(V, axis=-1)

    inner = V[..., 1:-1]
    peaks = (inner > V[..., :-2]) & (inner >= V[..., 2:])
    multimodal = peaks.sum(axis=-1) > 1

    take = lambda A, j: np.take_along_axis(A, j[..., None], -1)[..., 0]
    a = take(U, np.maximum(i - 1, 0))
    b = take(U, np.minimum(i + 1, grid - 1))
    ev = lambda u: _safe(f(np.exp(u)[..., None]))[..., 0] if u.ndim else _safe(f(np.exp(u)[None]))[0]

    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = ev(c), ev(d)
    for _ in range(max_iter):
        if np.all(b - a <= tol):
            break
        left = fc > fd
        a = np.where(left, a, c)
        b = np.where(left, d, b)
        new = np.where(left, b - INV_PHI * (b - a), a + INV_PHI * (b - a))
        fnew = ev(new)
        c, d, fc, fd = (np.where(left, new, d), np.where(left, c, new),
                        np.where(left, fnew, fd), np.where(left, fc, fnew))
    u = 0.5 * (a + b)
    fu = ev(u)

    if polish:
        u, fu = _polish(ev, u, fu, ulo, uhi)

    ub, vb = take(U, i), take(V, i)
    use_grid = vb > fu
    u = np.where(use_grid, ub, u)
    fu = np.where(use_grid, vb, fu)
    at_lower = u - ulo <= snap
    at_upper = uhi - u <= snap
    x = np.where(at_lower, lo, np.where(at_upper, hi, np.exp(u)))
    fx = np.where(at_lower, take(V, np.zeros_like(i)), np.where(at_upper, take(V, np.full_like(i, grid - 1)), fu))
    return MaxResult(x=x, fx=fx, at_lower=at_lower, at_upper=at_upper & ~at_lower, multimodal=multimodal)


def _polish(ev, u, fu, ulo, uhi, w=1e-6, h=1e-5, iters=60):
    slope = lambda x: ev(x + h) - ev(x - h)
    inside = (u - w - h > ulo) & (u + w + h < uhi)
    # elements not polished are probed at a harmless point above the lower bound
    c = np.where(inside, u, ulo + 2 * (w + h))
    a, b = c - w, c + w
    sa, sb = slope(a), slope(b)
    ok = inside & (sa > 0) & (sb < 0)
    for _ in range(iters):
        m = 0.5 * (a + b)
        up = slope(m) > 0
        a = np.where(ok & up, m, a)
        b = np.where(ok & ~up, m, b)
    m = 0.5 * (a + b)
    fm = ev(m)
    better = ok & (fm >= fu - 1e-12 * np.abs(fu))
    return np.where(better, m, u), np.where(better, fm, fu)
