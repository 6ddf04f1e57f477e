"""Block LOBPCG for the smallest eigenpairs of a Hermitian pencil, matrix-free."""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla


@dataclass
class EigResult:
    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    iterations: int
    converged: bool
    history: list = field(default_factory=list)


def _svqb(V, AV, BV, drop=1e-12):
    """B-orthonormalize the block V, transforming AV and BV consistently."""
    G = V.conj().T @ BV
    G = 0.5 * (G + G.conj().T)
    d = np.real(np.diag(G))
    d = np.where(d > 0, d, 1.0) ** -0.5
    w, U = np.linalg.eigh(G * d[:, None] * d[None, :])
    keep = w > drop * max(w.max(), 1e-300)
    T = (d[:, None] * U[:, keep]) / np.sqrt(w[keep])
    return V @ T, (AV @ T if AV is not None else None), BV @ T


def lobpcg(A, X0, B=None, tol=1e-8, maxiter=2000, nev=1, callback=None, T=None):
    """Smallest eigenpairs of ``A x = theta B x`` by locally optimal block iteration.

    ``A`` and ``B`` map (n, k) blocks to (n, k) blocks (``B`` defaults to the
    identity).  ``T`` is an optional preconditioner applied to residual
    blocks.  Convergence requires the
    relative residual ``||A x - theta B x|| / ||A x||`` of the first ``nev``
    Ritz vectors to drop below ``tol``.  ``history`` holds the smallest Ritz
    value after every iteration.
    """
    if B is None:
        B = lambda X: X
    X = np.array(X0, dtype=complex)
    k = X.shape[1]
    BX = B(X)
    X, _, BX = _svqb(X, None, BX)
    AX = A(X)
    theta, C = _rr(X, AX, BX)
    X, AX, BX = X @ C, AX @ C, BX @ C
    P = AP = BP = None
    history = [theta[0]]
    res = np.full(k, np.inf)
    it = 0
    for it in range(1, maxiter + 1):
        R = AX - BX * theta
        res = np.linalg.norm(R, axis=0) / np.maximum(np.linalg.norm(AX, axis=0), 1e-300)
        if np.all(res[:nev] < tol):
            it -= 1
            break
        W = T(R) if T is not None else R
        W = W - X @ (BX.conj().T @ W)
        W, _, BW = _svqb(W, None, B(W))
        W = W - X @ (BX.conj().T @ W)
        W, _, BW = _svqb(W, None, B(W))
        AW = A(W)
        blocks = [(X, AX, BX), (W, AW, BW)]
        if P is not None:
            c1 = BX.conj().T @ P
            c2 = BW.conj().T @ P
            P = P - X @ c1 - W @ c2
            AP = AP - AX @ c1 - AW @ c2
            BP = BP - BX @ c1 - BW @ c2
            if P.shape[1]:
                P, AP, BP = _svqb(P, AP, BP)
            if P.shape[1]:
                blocks.append((P, AP, BP))
        S = np.hstack([b[0] for b in blocks])
        AS = np.hstack([b[1] for b in blocks])
        BS = np.hstack([b[2] for b in blocks])
        try:
            theta_all, C = _rr(S, AS, BS)
        except np.linalg.LinAlgError:
            # restart without the search directions
            P = None
            continue
        C = C[:, :k]
        theta = theta_all[:k]
        X, AX, BX = S @ C, AS @ C, BS @ C
        Cp = C.copy()
        Cp[:k] = 0
        P, AP, BP = S @ Cp, AS @ Cp, BS @ Cp
        history.append(theta[0])
        if callback is not None:
            callback(it, theta, res)
    converged = bool(np.all(res[:nev] < tol))
    return EigResult(values=np.real(theta), vectors=X, residuals=res, iterations=it,
                     converged=converged, history=history)


def _rr(S, AS, BS):
    HA = S.conj().T @ AS
    HB = S.conj().T @ BS
    HA = 0.5 * (HA + HA.conj().T)
    HB = 0.5 * (HB + HB.conj().T)
    w, C = sla.eigh(HA, HB)
    return w, C
