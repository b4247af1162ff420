"""Stationary distributions of the state chain, restricted to what the initial state reaches."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import breadth_first_order, connected_components
from scipy.sparse.linalg import spsolve

from .dynamics import DegenerateStateError

RESIDUAL_TOL = 1e-12


class AmbiguousStationaryError(RuntimeError):
    """More than one closed class is reachable from the initial state."""


def reachable(P: sp.csr_matrix, start: int) -> np.ndarray:
    order = breadth_first_order(P, start, directed=True, return_predecessors=False)
    return np.sort(order)


def closed_classes(P: sp.csr_matrix) -> list[np.ndarray]:
    n_comp, labels = connected_components(P, directed=True, connection="strong")
    coo = P.tocoo()
    leaving = labels[coo.row] != labels[coo.col]
    open_comp = np.zeros(n_comp, dtype=bool)
    open_comp[labels[coo.row[leaving & (coo.data > 0)]]] = True
    return [np.flatnonzero(labels == c) for c in range(n_comp) if not open_comp[c]]


def solve_closed_class(Q: sp.csr_matrix) -> np.ndarray:
    """Stationary vector of an irreducible stochastic matrix by a direct sparse solve."""
    n = Q.shape[0]
    if n == 1:
        return np.ones(1)
    A = (Q.T - sp.identity(n, format="csr")).tolil()
    A[n - 1, :] = np.ones(n)
    b = np.zeros(n)
    b[n - 1] = 1.0
    v = spsolve(A.tocsc(), b)
    v = np.clip(v, 0.0, None)
    v /= v.sum()
    # a few power steps polish away solver round-off
    for _ in range(50):
        if np.abs(v @ Q - v).max() < RESIDUAL_TOL:
            break
        v = v @ Q
        v /= v.sum()
    return v


def stationary_distribution(chain, start: int | None = None) -> np.ndarray:
    """Stationary law over all states (zero outside the recurrent class)."""
    P = chain.P if hasattr(chain, "P") else sp.csr_matrix(chain)
    if start is None:
        start = chain.tables.init if hasattr(chain, "tables") else 0
    reach = reachable(P, start)
    if hasattr(chain, "degenerate_states"):
        bad = np.intersect1d(reach, chain.degenerate_states)
        if bad.size:
            raise DegenerateStateError(f"degenerate states reachable: {bad[:10].tolist()}")
    sub = P[reach][:, reach]
    classes = closed_classes(sub)
    if len(classes) != 1:
        raise AmbiguousStationaryError(
            f"{len(classes)} closed classes reachable: "
            + "; ".join(str(reach[c][:5].tolist()) for c in classes))
    members = reach[classes[0]]
    v = np.zeros(P.shape[0])
    v[members] = solve_closed_class(P[members][:, members])
    return v


def stationary_residual(P, v) -> float:
    return float(np.abs(v @ P - v).max())
