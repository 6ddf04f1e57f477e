"""Limited-memory BFGS on complex arrays viewed as real variables.

Inner products use a diagonal metric ``weight`` (the lumped product mass),
so the search direction is built from the Riesz gradient ``g / weight``.
The line search is scipy's strong-Wolfe search, with an approximate-Wolfe
unit step as fallback near convergence.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import line_search

log = logging.getLogger(__name__)


@dataclass
class LbfgsResult:
    x: np.ndarray
    energy: float
    grad_norm: float
    iterations: int
    converged: bool
    message: str
    trace: list = field(default_factory=list)


def _rdot(X, Y):
    return float(np.vdot(X, Y).real)


def _approximate_wolfe(f_real, g_real, xr, dr, f0, dphi0, delta=0.1, sigma=0.9, eps=1e-10):
    """Unit step accepted under the approximate Wolfe conditions (Hager-Zhang).

    These test the directional derivative instead of the energy decrease, so
    they stay meaningful once energy differences fall below rounding error.
    """
    x1 = xr + dr
    dphi1 = g_real(x1) @ dr
    if (2 * delta - 1) * dphi0 >= dphi1 >= sigma * dphi0 and f_real(x1) <= f0 + eps * abs(f0):
        return 1.0
    return None


def lbfgs(fun, x0, weight=None, memory=10, gtol=1e-5, maxiter=1000, callback=None):
    """Minimize ``fun(x) -> (f, g)`` over complex arrays ``x``.

    ``g`` must be the gradient for the real inner product ``Re sum(conj(a) b)``.
    Stops when the weighted norm of the Riesz gradient, ``sqrt(sum |g|^2 / weight)``,
    is below ``gtol``.  On a line-search failure the memory is cleared and a
    steepest-descent step is tried once; a second consecutive failure ends the run.
    """
    shape = x0.shape
    sw = np.ones(shape) if weight is None else np.sqrt(np.broadcast_to(weight, shape))
    cache = {}

    def evaluate(xr):
        key = xr.tobytes()
        if cache.get("key") != key:
            f, g = fun(xr.view(complex).reshape(shape))
            cache.update(key=key, f=f, g=g)
        return cache["f"], cache["g"]

    def f_real(xr):
        return evaluate(xr)[0]

    def g_real(xr):
        return np.ascontiguousarray(evaluate(xr)[1]).view(float).ravel()

    # curvature pairs live in scaled coordinates sqrt(w) x, where the metric is Euclidean
    x = np.array(x0, dtype=complex)
    f, g = fun(x)
    gh = g / sw
    gn = np.sqrt(_rdot(gh, gh))
    trace = [(0, f, gn)]
    S, Y, RHO = [], [], []
    failures = 0
    gamma = None
    message = "maximum iterations reached"
    converged = gn < gtol
    it = 0
    while not converged and it < maxiter:
        q = gh.copy()
        alphas = []
        for s, y, rho in zip(reversed(S), reversed(Y), reversed(RHO)):
            a = rho * _rdot(s, q)
            alphas.append(a)
            q -= a * y
        if S:
            gamma = _rdot(S[-1], Y[-1]) / _rdot(Y[-1], Y[-1])
        # after a reset the last curvature scale is kept
        q *= gamma if gamma is not None else 1.0 / max(gn, 1e-300)
        for (s, y, rho), a in zip(zip(S, Y, RHO), reversed(alphas)):
            b = rho * _rdot(y, q)
            q += (a - b) * s
        d = -q / sw
        xr = x.view(float).ravel()
        gr = np.ascontiguousarray(g).view(float).ravel()
        dr = d.view(float).ravel()
        if gr @ dr >= 0:
            d = -gh / sw * (gamma if gamma is not None else 1.0 / max(gn, 1e-300))
            dr = d.view(float).ravel()
            S, Y, RHO = [], [], []
        cache.update(key=xr.tobytes(), f=f, g=g)
        step = line_search(f_real, g_real, xr, dr, gfk=gr, old_fval=f, c1=1e-4, c2=0.9, maxiter=40)[0]
        if step is None:
            step = _approximate_wolfe(f_real, g_real, xr, dr, f, gr @ dr)
        if step is None:
            failures += 1
            if failures > 1 or not S:
                message = "line search failed"
                log.warning("L-BFGS: line search failed at iteration %d (f=%.6g, |g|=%.3g)", it, f, gn)
                break
            # retry once from a steepest-descent direction
            S, Y, RHO = [], [], []
            continue
        failures = 0
        x_new = x + step * d
        f_new, g_new = evaluate(x_new.view(float).ravel())
        gh_new = g_new / sw
        s = (step * d) * sw
        y = gh_new - gh
        sy = _rdot(s, y)
        if sy > 1e-300:
            S.append(s)
            Y.append(y)
            RHO.append(1.0 / sy)
            if len(S) > memory:
                S.pop(0)
                Y.pop(0)
                RHO.pop(0)
        x, f, g, gh = x_new, f_new, g_new, gh_new
        it += 1
        gn = np.sqrt(_rdot(gh, gh))
        trace.append((it, f, gn))
        if callback is not None:
            callback(it, x, f, gn)
        if gn < gtol:
            converged = True
            message = "gradient tolerance reached"
    return LbfgsResult(x=x, energy=f, grad_norm=gn, iterations=it, converged=converged,
                       message=message, trace=trace)
