"""Lambda selection, eigenvector initialization and annealed minimization."""

import csv
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import NumericalError
from ..product import gl_energy_and_gradient, slicewise_laplacian_apply
from .optimizer import lbfgs
from .eigensolver import lobpcg

log = logging.getLogger(__name__)


@dataclass
class SolverConfig:
    schedule: tuple = (100.0,)
    lbfgs_memory: int = 10
    gtol: float = 1e-5
    maxiter: int = 1000
    eig_tol: float = 1e-8
    eig_maxiter: int = 2000
    block_size: int = 4
    init_block_size: int = 1
    precond_modes: int = 100
    seed: int = 0
    fd_check: bool = True

    def __post_init__(self):
        t = np.asarray(self.schedule, dtype=float)
        if len(t) == 0 or np.any(t <= 0) or np.any(np.diff(t) < 0):
            raise ValueError("schedule must be nonempty, positive and nondecreasing: %r" % (self.schedule,))


@dataclass
class StageTrace:
    t: float
    lam: float
    rows: list = field(default_factory=list)     # (iter, energy, grad_norm)
    converged: bool = False
    message: str = ""
    fd_error: float = float("nan")


def _start_block(n, k, rng):
    return rng.normal(size=(n, k)) + 1j * rng.normal(size=(n, k))


def smallest_eigenvalue(ops, config=None):
    """Smallest generalized eigenvalue of (L, M) for one surface."""
    config = config or SolverConfig()
    rng = np.random.default_rng(config.seed)
    n = ops.L.shape[0]
    k = min(config.block_size, max(1, n // 3))
    res = lobpcg(lambda X: ops.L @ X, _start_block(n, k, rng), B=lambda X: ops.M @ X,
                 tol=config.eig_tol, maxiter=config.eig_maxiter)
    if not res.converged:
        raise NumericalError("eigensolver did not converge: relative residual %.3g after %d iterations"
                             % (res.residuals[0], res.iterations))
    return float(res.values[0])


def base_eigenvalue(opsA, opsB, config=None):
    """lambda_0: sum of the two surfaces' smallest connection-Laplacian eigenvalues."""
    return smallest_eigenvalue(opsA, config) + smallest_eigenvalue(opsB, config)


def lowest_modes(ops, k):
    """k smallest eigenpairs of (L, diag(mass)), eigenvectors mass-orthonormal."""
    n = ops.L.shape[0]
    k = max(1, min(k, n - 2))
    if n <= 4 * k + 200:
        w, U = sla.eigh(ops.L.toarray(), np.diag(ops.mass), subset_by_index=[0, k - 1])
    else:
        w, U = spla.eigsh(ops.L.tocsc(), k=k, M=sp.diags(ops.mass).tocsc(), sigma=0.0, which="LM")
        order = np.argsort(w)
        w, U = w[order], U[:, order]
        U = U / np.sqrt(np.einsum("ij,i,ij->j", U.conj(), ops.mass, U).real)
    return w, U


def two_level_preconditioner(opsA, opsB, k=100):
    """Approximate inverse of ``L_A x D_B + D_A x L_B`` on (|V_A|*|V_B|, m) blocks.

    Exact on the span of products of the lowest ``k`` modes of each surface;
    a scalar multiple of ``D^-1`` on the complement.
    """
    wA, UA = lowest_modes(opsA, k)
    wB, UB = lowest_modes(opsB, k)
    na, nb = len(opsA.mass), len(opsB.mass)
    D = opsA.mass[:, None] * opsB.mass[None, :]
    den = wA[:, None] + wB[None, :]
    mu = min(wA[-1] + wB[0], wA[0] + wB[-1])
    UAh, UBc = UA.conj().T, UB.conj()

    def T(Rb):
        out = np.empty_like(Rb)
        for c in range(Rb.shape[1]):
            R = Rb[:, c].reshape(na, nb)
            W = UAh @ R @ UBc
            out[:, c] = (UA @ (W / den - W / mu) @ UB.T + R / (D * mu)).ravel()
        return out

    return T


def min_eigenvector_init(sc, config=None, return_result=False, ops=None):
    """Smallest eigenvector of the slicewise operator against the lumped product mass.

    ``ops = (opsA, opsB)`` enables the two-level preconditioner.  Normalized
    so that ``max |Z| = 1``.  Non-convergence is logged and the best iterate
    is returned.
    """
    config = config or SolverConfig()
    na, nb = len(sc.massA), len(sc.massB)
    rng = np.random.default_rng(config.seed)

    def A(X):
        out = np.empty_like(X)
        for c in range(X.shape[1]):
            out[:, c] = slicewise_laplacian_apply(sc, X[:, c].reshape(na, nb)).ravel()
        return out

    T = two_level_preconditioner(*ops, k=config.precond_modes) if ops is not None else None
    w = (sc.massA[:, None] * sc.massB[None, :]).ravel()
    res = lobpcg(A, _start_block(na * nb, config.init_block_size, rng), B=lambda X: w[:, None] * X,
                 tol=config.eig_tol, maxiter=config.eig_maxiter, T=T)
    if not res.converged:
        log.warning("initialization eigensolver stopped at relative residual %.3g", res.residuals[0])
    Z = res.vectors[:, 0].reshape(na, nb)
    # fix the global phase for determinism, then scale
    k = np.argmax(np.abs(Z))
    Z = Z * (np.abs(Z.flat[k]) / Z.flat[k])
    Z = Z / np.abs(Z).max()
    return (Z, res) if return_result else Z


def random_init(shape, seed=0):
    """Entries uniform in the complex unit disk."""
    rng = np.random.default_rng(seed)
    r = np.sqrt(rng.uniform(size=shape))
    return r * np.exp(2j * np.pi * rng.uniform(size=shape))


def gradient_check(fun, Z, n_dirs=3, h=1e-5, seed=0):
    """Largest relative error of directional derivatives vs central differences."""
    rng = np.random.default_rng(seed)
    _, G = fun(Z)
    worst = 0.0
    for _ in range(n_dirs):
        W = rng.normal(size=Z.shape) + 1j * rng.normal(size=Z.shape)
        fd = (fun(Z + h * W)[0] - fun(Z - h * W)[0]) / (2 * h)
        an = float(np.vdot(G, W).real)
        worst = max(worst, abs(fd - an) / max(abs(an), abs(fd), 1e-300))
    return worst


def minimize(opsA, opsB, Z0, config=None, V=None, lam0=None):
    """Annealed L-BFGS over the stages ``lambda = t * lambda_0``.

    Returns ``(Z, traces)``, one :class:`StageTrace` per stage.
    """
    config = config or SolverConfig()
    if lam0 is None:
        lam0 = base_eigenvalue(opsA, opsB, config)
    if not np.all(np.isfinite(Z0)):
        raise NumericalError("initial section has non-finite entries")
    weight = opsA.mass[:, None] * opsB.mass[None, :]
    Z = np.array(Z0, dtype=complex)
    traces = []
    for stage, t in enumerate(config.schedule):
        lam = t * lam0
        fun = lambda X, lam=lam: gl_energy_and_gradient(opsA, opsB, X, lam, V)
        tr = StageTrace(t=float(t), lam=lam)
        if config.fd_check:
            tr.fd_error = gradient_check(fun, Z, seed=config.seed + stage)
            if tr.fd_error > 1e-4:
                log.warning("stage %d: gradient spot check error %.3g", stage, tr.fd_error)
        res = lbfgs(fun, Z, weight=weight, memory=config.lbfgs_memory, gtol=config.gtol,
                    maxiter=config.maxiter)
        Z = res.x
        tr.rows = res.trace
        tr.converged = res.converged
        tr.message = res.message
        log.info("stage %d (t=%g): %d iterations, E=%.6g, |g|=%.3g, %s",
                 stage, t, res.iterations, res.energy, res.grad_norm, res.message)
        traces.append(tr)
    return Z, traces


def collapse_check(Z, threshold=1e-2):
    """True when the section has collapsed to (near) zero."""
    return bool(np.abs(Z).max() < threshold)


def write_trace_csv(path, traces):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["stage", "iter", "energy", "grad_norm"])
        for s, tr in enumerate(traces):
            for it, e, g in tr.rows:
                w.writerow([s, it, repr(float(e)), repr(float(g))])
