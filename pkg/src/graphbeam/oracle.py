"""Independent discretizations of the system operator.

The collocation pencil cross-validates eigenvalues and multiplicities.
Each edge carries the samples of ``u_j = w_j''''`` on a Lobatto grid, the
four Taylor data ``w_j(0), w_j'(0), w_j''(0), w_j'''(0)`` and the samples of
``v_j``. Writing ``w_j`` as the fourfold integral of ``u_j`` plus a cubic
keeps every matrix entry O(1); the vertex and end conditions are bordering
rows of the pencil ``A z = lam B z``.

The Galerkin system drives the time integrator. It uses per-edge Chebyshev
coefficients, a null-space basis for ``w_j(1) = 0`` and continuity, and the
energy bilinear forms, and is returned in coordinates where the energy is
the Euclidean norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from numpy.polynomial import chebyshev as C

from . import _cheb
from .exponents import NetworkParams
from .rootfinding import SpectrumReport
from .state import StateVector

COND_LIMIT = 1e12
RESOLUTION_TOL = 1e-6
_INF_CUT = 1e-13


class ConditioningError(RuntimeError):
    """The assembled matrix is too ill-conditioned; use a smaller N."""


class ResolutionError(RuntimeError):
    """Too few eigenvalues agree between the two resolutions."""


@dataclass
class DiscretizedOperator:
    """Collocation pencil ``A z = lam B z`` for the system operator.

    Attributes
    ----------
    N : int
        Nodes per edge.
    size : int
        ``6 N + 12`` unknowns: per edge ``N`` samples of ``w''''``, four
        Taylor coefficients at s = 0 and ``N`` samples of ``v``.
    A, B : ndarray
        Row-equilibrated pencil. The last 12 rows of ``B`` are zero and
        hold the end, continuity, moment and force-balance conditions.
    grid : ndarray
        Lobatto nodes of each edge.
    condition_estimate : float
        2-norm condition number of ``A``.
    """

    N: int
    size: int
    A: np.ndarray
    B: np.ndarray
    grid: np.ndarray
    condition_estimate: float
    params: NetworkParams

    def u_slice(self, j: int) -> slice:
        return slice(j * self.N, (j + 1) * self.N)

    def taylor_index(self, j: int, k: int) -> int:
        return 3 * self.N + 4 * j + k

    def v_slice(self, j: int) -> slice:
        return slice(3 * self.N + 12 + j * self.N, 3 * self.N + 12 + (j + 1) * self.N)

    @property
    def condition_rows(self) -> slice:
        return slice(6 * self.N, 6 * self.N + 12)

    def lift(self, x: StateVector) -> np.ndarray:
        """Pencil vector of a sampled state on the same grid."""
        if x.N != self.N:
            raise ValueError(f"state has N={x.N}, operator has N={self.N}")
        z = np.zeros(self.size, dtype=complex)
        w4 = x.derivative("w", 4)
        taylor = np.stack([x.at("w", np.array([0.0]), k)[:, 0] for k in range(4)], axis=1)
        for j in range(3):
            z[self.u_slice(j)] = w4[j]
            z[[self.taylor_index(j, k) for k in range(4)]] = taylor[j]
            z[self.v_slice(j)] = x.v[j]
        return z

    def unlift(self, z: np.ndarray) -> StateVector:
        """Sampled state ``(w, v)`` from a pencil vector."""
        N, s = self.N, self.grid
        J4 = _cheb.integration_matrix(N, 4)
        w = np.empty((3, N), dtype=complex)
        v = np.empty((3, N), dtype=complex)
        for j in range(3):
            c = z[[self.taylor_index(j, k) for k in range(4)]]
            w[j] = J4 @ z[self.u_slice(j)] + c[0] + c[1] * s + c[2] * s**2 / 2 + c[3] * s**3 / 6
            v[j] = z[self.v_slice(j)]
        return StateVector(w, v)


def assemble(params: NetworkParams, N: int = 64, cond_limit: float = COND_LIMIT) -> DiscretizedOperator:
    """Assemble the collocation pencil.

    Raises
    ------
    ValueError
        If ``N < 16``.
    ConditioningError
        If the condition estimate exceeds ``cond_limit``.
    """
    if N < 16:
        raise ValueError("need N >= 16")
    g, al, be = params.gamma, params.alpha, params.beta
    s = _cheb.lobatto_nodes(N)
    J = {k: _cheb.integration_matrix(N, k) for k in (2, 4)}
    d1_0 = _cheb.endpoint_derivative_row(N, 1, 0.0)
    n = 6 * N + 12
    A = np.zeros((n, n))
    B = np.zeros((n, n))
    I = np.eye(N)
    cubic = [np.ones(N), s, s**2 / 2, s**3 / 6]
    op = DiscretizedOperator(N, n, A, B, s, 0.0, params)
    for j in range(3):
        U, V = op.u_slice(j), op.v_slice(j)
        tk = [op.taylor_index(j, k) for k in range(4)]
        # lam w = v
        r = slice(j * N, (j + 1) * N)
        B[r, U] = J[4]
        for k in range(4):
            B[r, tk[k]] = cubic[k]
        A[r, V] = I
        # lam v = -w'''' + gamma w''
        r = slice(3 * N + j * N, 3 * N + (j + 1) * N)
        B[r, V] = I
        A[r, U] = -I + g * J[2]
        A[r, tk[2]] = g
        A[r, tk[3]] = g * s
    row = 6 * N
    for j in range(3):
        U, V = op.u_slice(j), op.v_slice(j)
        tk = [op.taylor_index(j, k) for k in range(4)]
        # w(1) = 0
        A[row, U] = J[4][-1]
        A[row, tk] = [1.0, 1.0, 0.5, 1.0 / 6.0]
        row += 1
        # w''(1) = 0
        A[row, U] = J[2][-1]
        A[row, tk[2]] = 1.0
        A[row, tk[3]] = 1.0
        row += 1
        # w''(0) - alpha w'(0) - beta v'(0) = 0
        A[row, tk[2]] = 1.0
        A[row, tk[1]] = -al
        A[row, V] = -be * d1_0
        row += 1
    # continuity of w at the vertex
    A[row, op.taylor_index(0, 0)] = 1.0
    A[row, op.taylor_index(1, 0)] = -1.0
    row += 1
    A[row, op.taylor_index(1, 0)] = 1.0
    A[row, op.taylor_index(2, 0)] = -1.0
    row += 1
    # sum_j (w_j'''(0) - gamma w_j'(0)) = 0
    for j in range(3):
        A[row, op.taylor_index(j, 3)] = 1.0
        A[row, op.taylor_index(j, 1)] = -g
    scale = 1.0 / np.abs(A).max(axis=1)
    A *= scale[:, None]
    B *= scale[:, None]
    cond = float(np.linalg.cond(A))
    if cond > cond_limit:
        raise ConditioningError(f"condition estimate {cond:.2e} exceeds {cond_limit:.0e}; try a smaller N")
    op.condition_estimate = cond
    return op


def pencil_eigenvalues(op: DiscretizedOperator) -> np.ndarray:
    """Finite eigenvalues of the pencil via ``eig(A^{-1} B)``, ``lam = 1/mu``."""
    try:
        mu = sla.eigvals(sla.solve(op.A, op.B))
    except (sla.LinAlgError, ValueError) as exc:
        raise RuntimeError(f"eigensolve failed: {exc}") from exc
    mu = mu[np.abs(mu) > _INF_CUT]
    return 1.0 / mu


def _order(vals: np.ndarray) -> np.ndarray:
    # ties in |Im| put the upper half first, so a cut at k keeps upper values
    return vals[np.lexsort((vals.real, -vals.imag, np.abs(vals.imag)))]


def oracle_spectrum(
    params: NetworkParams, N: int = 64, k: int = 12, tol: float = RESOLUTION_TOL, return_all: bool = False
):
    """``k`` resolved eigenvalues of smallest ``|Im|``.

    Eigenvalues at ``N`` nodes are kept only if one computed at ``3N/2``
    lies within ``tol``.

    Raises
    ------
    ValueError
        If ``k > N/2``.
    ResolutionError
        If fewer than ``k`` eigenvalues pass the two-resolution test.
    """
    if k > N // 2:
        raise ValueError(f"k={k} exceeds N/2={N // 2}")
    coarse = _order(pencil_eigenvalues(assemble(params, N)))
    fine = pencil_eigenvalues(assemble(params, (3 * N) // 2))
    used = np.zeros(fine.size, dtype=bool)
    kept, moved = [], []
    for lam in coarse:
        d = np.abs(fine - lam)
        d[used] = np.inf
        i = int(np.argmin(d))
        if d[i] <= tol:
            used[i] = True
            kept.append(complex(lam))
            moved.append(float(d[i]))
        if len(kept) == k:
            break
    if len(kept) < k:
        raise ResolutionError(f"only {len(kept)} of {k} eigenvalues agree to {tol:g} between N={N} and N={3 * N // 2}")
    return (kept, moved) if return_all else kept


@dataclass
class MatchReport:
    """Pairing of root-finder eigenvalues with oracle eigenvalues.

    Root-finder eigenvalues enter once per unit of multiplicity, so an
    H-branch root pairs with two oracle values.
    """

    pairs: list = field(default_factory=list)
    unmatched_roots: list = field(default_factory=list)
    unmatched_oracle: list = field(default_factory=list)
    multiplicity_clusters: list = field(default_factory=list)
    tol: float = 0.0

    def cluster_size(self, z: complex) -> int:
        """Size of the oracle cluster whose center is nearest ``z``."""
        if not self.multiplicity_clusters:
            return 0
        centers = np.array([c for c, _ in self.multiplicity_clusters])
        return self.multiplicity_clusters[int(np.argmin(np.abs(centers - z)))][1]

    @property
    def max_distance(self) -> float:
        return max((d for _, _, d in self.pairs), default=0.0)

    def to_dict(self) -> dict:
        enc = lambda z: [z.real, z.imag]  # noqa: E731
        return {
            "tol": self.tol,
            "pairs": [{"root": enc(r), "oracle": enc(o), "distance": d} for r, o, d in self.pairs],
            "unmatched_roots": [enc(z) for z in self.unmatched_roots],
            "unmatched_oracle": [enc(z) for z in self.unmatched_oracle],
            "multiplicity_clusters": [{"center": enc(c), "size": n} for c, n in self.multiplicity_clusters],
        }


def clusters(values, gap: float) -> list:
    """Single-linkage clusters of points closer than ``gap``.

    Returns ``(center, size)`` tuples ordered like :func:`oracle_spectrum`.
    """
    vals = [complex(v) for v in values]
    parent = list(range(len(vals)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(vals)):
        for j in range(i + 1, len(vals)):
            if abs(vals[i] - vals[j]) < gap:
                parent[find(i)] = find(j)
    groups: dict = {}
    for i, v in enumerate(vals):
        groups.setdefault(find(i), []).append(v)
    out = [(complex(np.mean(g)), len(g)) for g in groups.values()]
    order = _order(np.array([c for c, _ in out])) if out else []
    return [next(o for o in out if o[0] == c) for c in order]


def cross_validate(report: SpectrumReport | list, oracle: list, tol: float) -> MatchReport:
    """Greedy nearest-neighbor pairing within ``tol``.

    Only root-finder eigenvalues with ``|Im|`` inside the oracle's range
    take part. Clusters use the gap threshold ``100 tol``.
    """
    evs = report.eigenvalues if isinstance(report, SpectrumReport) else list(report)
    top = max((abs(z.imag) for z in oracle), default=0.0)
    roots = []
    for ev in evs:
        val = complex(getattr(ev, "value", ev))
        if abs(val.imag) <= top + max(tol, 0.0):
            roots += [val] * int(getattr(ev, "multiplicity", 1))
    orc = [complex(z) for z in oracle]
    cand = sorted(
        ((abs(r - o), i, j) for i, r in enumerate(roots) for j, o in enumerate(orc)),
        key=lambda t: t[0],
    )
    ru, ou = set(), set()
    pairs = []
    for d, i, j in cand:
        if tol <= 0 or d > tol:
            break
        if i in ru or j in ou:
            continue
        ru.add(i)
        ou.add(j)
        pairs.append((roots[i], orc[j], float(d)))
    return MatchReport(
        pairs=pairs,
        unmatched_roots=[r for i, r in enumerate(roots) if i not in ru],
        unmatched_oracle=[o for j, o in enumerate(orc) if j not in ou],
        multiplicity_clusters=clusters(orc, 100 * tol) if tol > 0 else [(z, 1) for z in orc],
        tol=tol,
    )


# --- Galerkin system for time stepping ------------------------------------


@dataclass
class GalerkinSystem:
    """Second-order system ``M q'' + C q' + K q = 0`` in energy coordinates.

    The state is ``u = (Omega y, p)`` with ``y`` the modal displacement and
    ``p`` the modal velocity, so that ``|u|^2`` is the energy norm and
    ``u' = G u`` with ``G = [[0, Omega], [-Omega, -Cm]]``.

    Attributes
    ----------
    N : int
        Lobatto nodes per edge; polynomials of degree ``N - 1``.
    Z : ndarray
        Orthonormal null-space basis of ``w_j(1) = 0`` and continuity.
    R : ndarray
        Cholesky factor of the reduced mass matrix.
    Q, omega : ndarray
        Modal vectors and frequencies of the undamped problem.
    Cm : ndarray
        Damping in modal coordinates, ``beta`` times a rank-3 matrix.
    G : ndarray
        Generator in energy coordinates.
    slope_map : ndarray, shape (3, n)
        Maps the modal velocity ``p`` to ``v_j'(0)``.
    vel_proj : ndarray
        L2-orthogonal projection of velocity coefficients onto ``p``.
    """

    N: int
    params: NetworkParams
    Z: np.ndarray
    R: np.ndarray
    Q: np.ndarray
    omega: np.ndarray
    Cm: np.ndarray
    G: np.ndarray
    slope_map: np.ndarray
    vel_proj: np.ndarray

    @property
    def dim(self) -> int:
        return self.G.shape[0]

    def coords(self, x: StateVector) -> np.ndarray:
        """Energy coordinates of the polynomial interpolant of ``x``.

        ``w`` must satisfy the end and continuity conditions; ``v`` is
        projected in L2 onto the velocities that do.
        """
        if x.N != self.N:
            raise ValueError(f"state has N={x.N}, system has N={self.N}")
        cw = _cheb.values_to_coeffs(x.w).reshape(-1)
        cv = _cheb.values_to_coeffs(x.v).reshape(-1)
        y = self.Q.T @ (self.R @ (self.Z.T @ cw))
        p = self.vel_proj @ cv
        return np.concatenate([self.omega * y, p])

    def state(self, u: np.ndarray) -> StateVector:
        """Sampled state from energy coordinates."""
        n = self.omega.size
        y, p = u[:n] / self.omega, u[n:]
        back = lambda z: (self.Z @ sla.solve_triangular(self.R, self.Q @ z)).reshape(3, self.N)  # noqa: E731
        s = _cheb.lobatto_nodes(self.N)
        return StateVector(_cheb.evaluate(back(y), s), _cheb.evaluate(back(p), s))

    def slopes(self, u: np.ndarray) -> np.ndarray:
        """``v_j'(0)`` for each edge."""
        return self.slope_map @ u[self.omega.size:]


def _edge_factors(N: int, n_gl: int):
    """Square-root-weighted Gauss values of ``T_k``, ``T_k'``, ``T_k''`` and ``T_k'(0)``."""
    x, wts = _cheb.gauss_legendre(n_gl)
    eye = np.eye(N)
    t = 2 * x - 1
    sw = np.sqrt(wts)[:, None]
    F = [sw * C.chebval(t, C.chebder(eye, m=k, scl=2.0) if k else eye).T for k in range(3)]
    d1_0 = C.chebval(-1.0, C.chebder(eye, m=1, scl=2.0))
    return F[0], F[1], F[2], d1_0


def assemble_galerkin(params: NetworkParams, N: int = 48) -> GalerkinSystem:
    """Energy-coordinate Galerkin system on polynomials of degree ``N - 1``.

    Mass and stiffness enter through their factors (QR and SVD), so the
    frequencies keep relative accuracy although the stiffness matrix itself
    has norm ~1e13 at N = 48.
    """
    if N < 8:
        raise ValueError("need N >= 8")
    g, al, be = params.gamma, params.alpha, params.beta
    F0, F1, F2, d1 = _edge_factors(N, max(_cheb.GL_NODES, N + 8))
    blk = lambda m: sla.block_diag(m, m, m)  # noqa: E731
    M = blk(F0.T @ F0)
    D = blk(np.outer(d1, d1))
    # constraints: w_j(1) = sum_k c_k = 0, w_j(0) = w_1(0) with T_k(-1) = (-1)^k
    at0 = (-1.0) ** np.arange(N)
    rows = []
    for j in range(3):
        r = np.zeros(3 * N)
        r[j * N:(j + 1) * N] = 1.0
        rows.append(r)
    for j in (1, 2):
        r = np.zeros(3 * N)
        r[j * N:(j + 1) * N] = at0
        r[:N] = -at0
        rows.append(r)
    Z = sla.null_space(np.array(rows))
    # R^T R = Z^T M Z with a positive diagonal
    R = sla.qr(blk(F0) @ Z, mode="r")[0][: Z.shape[1]]
    R *= np.sign(np.diag(R))[:, None]
    Ri = sla.solve_triangular(R, np.eye(R.shape[0]))
    stiff = np.vstack([blk(F2), math.sqrt(g) * blk(F1), math.sqrt(al) * blk(d1[None, :])])
    _, sv, Vt = sla.svd(stiff @ Z @ Ri, full_matrices=False)
    if sv[-1] <= 0:
        raise RuntimeError("stiffness form is not positive definite")
    omega, Q = sv[::-1].copy(), Vt[::-1].T.copy()
    slope_map = (blk(d1[None, :]) @ Z @ Ri @ Q)
    Dt = Q.T @ Ri.T @ (Z.T @ D @ Z) @ Ri @ Q
    Cm = be * (Dt + Dt.T) / 2
    n = omega.size
    G = np.zeros((2 * n, 2 * n))
    G[:n, n:] = np.diag(omega)
    G[n:, :n] = -np.diag(omega)
    G[n:, n:] = -Cm
    # p = Q^T R q with M_z q = Z^T M c
    vel_proj = Q.T @ Ri.T @ (Z.T @ M)
    return GalerkinSystem(N, params, Z, R, Q, omega, Cm, G, slope_map, vel_proj)
