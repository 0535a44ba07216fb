"""P1 finite elements on an interval realizing V in H in V* and the map iota: V -> U.

A discrete function is a plain coefficient vector over the free nodes of a
:class:`Space`; dual vectors hold pairings against the nodal basis. The
:func:`scalar_space` factory builds the one-dimensional case V = H = U = R
used for closed-form checks.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class ConvergenceError(RuntimeError):
    """An iterative solver stopped before reaching its tolerance."""


def gauss_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@dataclass(frozen=True)
class SpatialMesh:
    nodes: np.ndarray
    bc: str = "dirichlet"

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or len(nodes) < 2 or nodes[0] != 0.0 or np.any(np.diff(nodes) <= 0):
            raise ValueError("mesh nodes must increase strictly from 0")
        if self.bc not in ("dirichlet", "natural"):
            raise ValueError(f"unknown boundary condition {self.bc!r}")
        if self.bc == "dirichlet" and len(nodes) < 3:
            raise ValueError("a Dirichlet mesh needs at least one interior node")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def uniform(cls, L: float, M_elements: int, bc: str = "dirichlet") -> "SpatialMesh":
        if not L > 0 or M_elements < 1:
            raise ValueError("mesh needs L > 0 and at least one element")
        return cls(np.linspace(0.0, L, M_elements + 1), bc)

    @property
    def length(self) -> float:
        return float(self.nodes[-1])

    @property
    def h(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def free(self) -> np.ndarray:
        n = len(self.nodes)
        return np.arange(1, n - 1) if self.bc == "dirichlet" else np.arange(n)


@dataclass(frozen=True)
class EmbeddingSpec:
    """How V maps into U.

    ``source``: U = L^2 over the interval with nodal quadrature, iota = identity.
    ``boundary``: U = R^2, iota = endpoint trace (natural boundary conditions).
    """

    mode: str = "source"
    iota_norm_bound: float | None = None
    p_map_norm_bound: float | None = None

    def __post_init__(self):
        if self.mode not in ("source", "boundary"):
            raise ValueError(f"unknown embedding mode {self.mode!r}")
        if self.mode == "boundary" and self.p_map_norm_bound is not None:
            raise ValueError("boundary mode has no map H -> U to bound")


def _interp_matrix(nodes: np.ndarray, rule: tuple[np.ndarray, np.ndarray]):
    """Values of the P1 nodal basis at a per-element quadrature rule."""
    xr, wr = rule
    h = np.diff(nodes)
    ne, nq = len(h), len(xr)
    rows = np.arange(ne * nq)
    elem = np.repeat(np.arange(ne), nq)
    s = np.tile(xr, ne)
    Q = sp.csr_matrix(
        (np.concatenate([1.0 - s, s]), (np.concatenate([rows, rows]), np.concatenate([elem, elem + 1]))),
        shape=(ne * nq, len(nodes)),
    )
    x = nodes[elem] + s * h[elem]
    w = np.tile(wr, ne) * h[elem]
    return Q, x, w


class Space:
    """Discrete evolution triple with exponent p.

    Norm conventions: in Dirichlet mode ||v|| = ||v'||_{L^p}; in natural mode
    ||v||^p = ||v'||^p_{L^p} + ||v||^p_{L^p}, the second term by 2-point Gauss.
    """

    def __init__(self, *, p, D, hD, Q2, w2, Q3, x3, w3, natural, iota, u_weights,
                 mesh=None, embedding=None, Q4=None, x4=None, w4=None):
        if not p > 1:
            raise ValueError(f"p must exceed 1, got {p}")
        self.p = float(p)
        self.q = self.p / (self.p - 1.0)
        self.mesh = mesh
        self.embedding = embedding or EmbeddingSpec()
        self.D, self.hD = D, hD
        self.Q2, self.w2 = Q2, w2
        self.Q3, self.x3, self.w3 = Q3, x3, w3
        self.Q4, self.x4, self.w4 = Q4, x4, w4
        self.natural = natural
        self.iota = sp.csr_matrix(iota)
        self.u_weights = np.asarray(u_weights, dtype=float)
        self.n = D.shape[1]
        self.mass = sp.csc_matrix(Q2.T @ sp.diags(w2) @ Q2)
        self.stiffness = sp.csc_matrix(D.T @ sp.diags(hD) @ D)
        self.gram = self.stiffness + self.mass if natural else self.stiffness
        self._gram_solve = spla.factorized(sp.csc_matrix(self.gram))
        self._mass_solve = spla.factorized(self.mass)

    # -- H = L^2 ---------------------------------------------------------
    def _check(self, *vs):
        for v in vs:
            if np.shape(v)[-1] != self.n:
                raise ValueError(f"vector of length {np.shape(v)[-1]} does not live on this space (n={self.n})")

    def h_inner(self, u, v) -> float:
        self._check(u, v)
        return float(np.dot(u, self.mass @ v))

    def h_norm(self, u) -> float:
        return float(np.sqrt(max(self.h_inner(u, u), 0.0)))

    # -- V ---------------------------------------------------------------
    def power_terms(self):
        """(matrix, weights) pairs with ||v||^p = sum w |A v|^p."""
        terms = [(self.D, self.hD)]
        if self.natural:
            terms.append((self.Q2, self.w2))
        return terms

    def v_norm_p(self, u) -> float:
        self._check(u)
        return float(sum(np.dot(w, np.abs(A @ u) ** self.p) for A, w in self.power_terms()))

    def v_norm(self, u) -> float:
        return self.v_norm_p(u) ** (1.0 / self.p)

    # -- V* --------------------------------------------------------------
    def riesz(self, g) -> np.ndarray:
        """Solve gram @ y = g (the p = 2 Riesz representative)."""
        return self._gram_solve(np.asarray(g, dtype=float))

    def dual_norm(self, g, tol: float = 1e-8, max_iter: int = 500) -> float:
        """sup of <g, v> over discrete v with ||v|| <= 1."""
        g = np.asarray(g, dtype=float)
        self._check(g)
        if not np.any(g):
            return 0.0
        if self.p == 2.0:
            return float(np.sqrt(max(np.dot(g, self.riesz(g)), 0.0)))
        return self._dual_norm_ascent(g, tol, max_iter)

    def _dual_norm_ascent(self, g, tol, max_iter):
        # maximize <g, v> - ||v||^p / p; at the optimum ||g||_* = <g, v>/||v||
        p = self.p
        scale = np.abs(g).max()  # max-abs scaling cannot underflow
        g = g / scale
        v = self.riesz(g)
        c = (np.dot(g, v) / self.v_norm_p(v)) ** (1.0 / (p - 1.0))
        v = c * v
        terms = self.power_terms()

        def objective(v):
            return self.v_norm_p(v) / p - np.dot(g, v)

        phi = objective(v)
        for _ in range(max_iter):
            grad = -g.copy()
            diag_blocks = []
            for A, w in terms:
                a = A @ v
                grad += A.T @ (w * np.abs(a) ** (p - 1) * np.sign(a))
                floor = 1e-12 * max(np.abs(a).max(), 1e-300)
                curv = (p - 1.0) * w * (a * a + floor * floor) ** ((p - 2.0) / 2.0)
                diag_blocks.append(A.T @ sp.diags(curv) @ A)
            H = sum(diag_blocks)
            H = H + 1e-13 * H.diagonal().mean() * sp.identity(self.n)
            d = spla.spsolve(sp.csc_matrix(H), -grad)
            decrement = -np.dot(grad, d)
            if decrement <= 1e-3 * tol * abs(phi):
                return float(scale * np.dot(g, v) / self.v_norm(v))
            step = 1.0
            while step > 2.0 ** -30:
                trial = v + step * d
                phi_trial = objective(trial)
                if phi_trial <= phi - 1e-4 * step * decrement:
                    break
                step *= 0.5
            else:
                # no descent left at machine precision: the current point is optimal
                return float(scale * np.dot(g, v) / self.v_norm(v))
            v, phi = trial, phi_trial
        raise ConvergenceError(f"dual norm ascent did not converge in {max_iter} iterations")

    # -- U and iota ------------------------------------------------------
    @property
    def u_dim(self) -> int:
        return self.iota.shape[0]

    def iota_apply(self, u) -> np.ndarray:
        self._check(u)
        return self.iota @ u

    def iota_adjoint(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        if xi.shape[-1] != self.u_dim:
            raise ValueError(f"U-element of length {xi.shape[-1]}, expected {self.u_dim}")
        return self.iota.T @ (self.u_weights * xi)

    def u_pair(self, xi, u) -> float:
        return float(np.dot(self.u_weights * xi, u))

    def u_norm(self, u) -> float:
        return float(np.sqrt(np.dot(self.u_weights, np.asarray(u) ** 2)))

    @functools.cached_property
    def _embedding_norm_p2(self) -> float:
        B = (self.iota.T @ sp.diags(self.u_weights) @ self.iota).toarray()
        top = sla.eigh(B, self.gram.toarray(), eigvals_only=True, subset_by_index=[self.n - 1, self.n - 1])
        return float(np.sqrt(top[0]))

    def embedding_norm(self) -> float:
        """Operator norm of iota from V to U."""
        if self.p == 2.0:
            return self._embedding_norm_p2
        if self.embedding.iota_norm_bound is None:
            raise ValueError("p != 2: supply iota_norm_bound in the embedding spec")
        return float(self.embedding.iota_norm_bound)

    @functools.cached_property
    def p_map_norm(self) -> float:
        """Norm of the map H -> U factoring iota (source mode only)."""
        if self.embedding.mode != "source":
            raise ValueError("no continuous map H -> U factors the trace in boundary mode")
        if self.embedding.p_map_norm_bound is not None:
            return float(self.embedding.p_map_norm_bound)
        B = (self.iota.T @ sp.diags(self.u_weights) @ self.iota).toarray()
        top = sla.eigh(B, self.mass.toarray(), eigvals_only=True, subset_by_index=[self.n - 1, self.n - 1])
        return float(np.sqrt(top[0]))

    # -- data ------------------------------------------------------------
    def load(self, fun) -> np.ndarray:
        """Pairings <fun, phi_i> for a pointwise function x -> value (3-point Gauss)."""
        return self.Q3.T @ (self.w3 * np.asarray(fun(self.x3), dtype=float))

    def l2_project(self, fun) -> np.ndarray:
        return self._mass_solve(self.load(fun))

    def full(self, c) -> np.ndarray:
        """Nodal values including the Dirichlet boundary."""
        if self.mesh is None or self.mesh.bc == "natural":
            return np.asarray(c, dtype=float)
        return np.concatenate([[0.0], c, [0.0]])

    def h_error(self, c, fun) -> float:
        """||c - fun||_{L^2} by 4-point Gauss per element."""
        if self.Q4 is None:
            return float(abs(c[0] - fun(np.zeros(1))[0]))
        diff = self.Q4 @ self.full(c) - fun(self.x4)
        return float(np.sqrt(np.dot(self.w4, diff * diff)))


def interval_space(mesh: SpatialMesh, p: float = 2.0, embedding: EmbeddingSpec | None = None) -> Space:
    embedding = embedding or EmbeddingSpec()
    if embedding.mode == "boundary" and mesh.bc != "natural":
        raise ValueError("boundary embedding needs natural boundary conditions")
    nodes, free = mesh.nodes, mesh.free
    h = mesh.h
    ne = len(h)
    D = sp.csr_matrix(
        (np.concatenate([-1.0 / h, 1.0 / h]),
         (np.concatenate([np.arange(ne)] * 2), np.concatenate([np.arange(ne), np.arange(ne) + 1]))),
        shape=(ne, len(nodes)),
    )
    Q2, _, w2 = _interp_matrix(nodes, gauss_rule(2))
    Q3, x3, w3 = _interp_matrix(nodes, gauss_rule(3))
    Q4, x4, w4 = _interp_matrix(nodes, gauss_rule(4))
    if embedding.mode == "source":
        lumped = np.zeros(len(nodes))
        lumped[:-1] += 0.5 * h
        lumped[1:] += 0.5 * h
        iota = sp.identity(len(free), format="csr")
        u_weights = lumped[free]
    else:
        iota = sp.csr_matrix(([1.0, 1.0], ([0, 1], [0, len(nodes) - 1])), shape=(2, len(nodes)))
        u_weights = np.ones(2)
    return Space(
        p=p, D=sp.csr_matrix(D[:, free]), hD=h, Q2=sp.csr_matrix(Q2[:, free]), w2=w2,
        Q3=sp.csr_matrix(Q3[:, free]), x3=x3, w3=w3, natural=mesh.bc == "natural",
        iota=iota, u_weights=u_weights, mesh=mesh, embedding=embedding, Q4=Q4, x4=x4, w4=w4,
    )


def scalar_space(p: float = 2.0, iota_norm_bound: float | None = None,
                 p_map_norm_bound: float | None = None) -> Space:
    """V = H = U = R with every norm the absolute value."""
    one = sp.csr_matrix(np.ones((1, 1)))
    w = np.ones(1)
    return Space(
        p=p, D=one, hD=w, Q2=one, w2=w, Q3=one, x3=np.zeros(1), w3=w, natural=False,
        iota=one, u_weights=w, embedding=EmbeddingSpec("source", iota_norm_bound, p_map_norm_bound),
    )
