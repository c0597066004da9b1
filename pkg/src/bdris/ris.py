"""BD-RIS circuit-topology model.

An M-element beyond-diagonal RIS is an M-port lossless reciprocal impedance
network with purely imaginary admittance Y = iB.  The circuit topology
(which element pairs are interconnected) is a symmetric boolean mask on the
real susceptance matrix B; the scattering matrix follows from the Cayley-type
map Theta = (I + iZ0*B)^-1 (I - iZ0*B), which is unitary and symmetric for
every real symmetric B.  This module holds the masks, the map and its
inverse, the SINR/rate evaluation, and the masked proximal least-squares
step shared by both ADMM solvers.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

ARCHITECTURE_KINDS = ("single", "fully", "group", "tree_tridiagonal", "custom")


@dataclass(frozen=True)
class ArchitectureMask:
    """Symmetric boolean pattern of permitted susceptance interconnections.

    ``allowed[i, j]`` is True when an impedance may connect ports i and j;
    the diagonal (each port's own load) is always permitted.
    """

    m: int
    allowed: np.ndarray
    kind: str
    group_size: int | None = None

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("element count must be at least 1")
        allowed = np.array(self.allowed, dtype=bool, copy=True)
        if allowed.shape != (self.m, self.m):
            raise ValueError(f"allowed must be {self.m}x{self.m}")
        if not np.array_equal(allowed, allowed.T):
            raise ValueError("allowed pattern must be symmetric")
        if not allowed.diagonal().all():
            raise ValueError("diagonal entries must all be permitted")
        allowed.setflags(write=False)
        object.__setattr__(self, "allowed", allowed)

    @property
    def n_parameters(self) -> int:
        """Number of free susceptance parameters (upper triangle incl. diagonal)."""
        return self.m + int(np.triu(self.allowed, k=1).sum())


@dataclass(frozen=True)
class IndexSets:
    """Ordered upper-triangular column indices of the free entries per row.

    ``sets[i]`` lists the columns j >= i with ``allowed[i, j]``; ``rows`` and
    ``cols`` are the same pairs flattened row-major, which fixes the packing
    order of the free-parameter vector.
    """

    sets: tuple[tuple[int, ...], ...]
    offsets: tuple[int, ...]
    total: int
    rows: np.ndarray
    cols: np.ndarray


def make_architecture(kind: str, m: int, group_size: int | None = None,
                      allowed: np.ndarray | None = None) -> ArchitectureMask:
    """Build the interconnection mask for a named architecture.

    Kinds: ``single`` (diagonal only), ``fully`` (every pair), ``group``
    (block-diagonal with blocks of ``group_size``), ``tree_tridiagonal``
    (path graph, band |i - j| <= 1), ``custom`` (explicit ``allowed``).
    """
    if m < 1:
        raise ValueError("element count must be at least 1")
    if kind == "single":
        pattern = np.eye(m, dtype=bool)
    elif kind == "fully":
        pattern = np.ones((m, m), dtype=bool)
    elif kind == "group":
        if group_size is None:
            raise ValueError("group architecture requires group_size")
        if group_size < 1 or m % group_size != 0:
            raise ValueError(f"group_size {group_size} must divide m={m}")
        pattern = np.zeros((m, m), dtype=bool)
        for s in range(0, m, group_size):
            pattern[s:s + group_size, s:s + group_size] = True
    elif kind == "tree_tridiagonal":
        idx = np.arange(m)
        pattern = np.abs(idx[:, None] - idx[None, :]) <= 1
    elif kind == "custom":
        if allowed is None:
            raise ValueError("custom architecture requires an allowed pattern")
        pattern = np.asarray(allowed, dtype=bool)
    else:
        raise ValueError(f"unknown architecture kind {kind!r}")
    gs = group_size if kind == "group" else None
    return ArchitectureMask(m=m, allowed=pattern, kind=kind, group_size=gs)


def index_sets(mask: ArchitectureMask) -> IndexSets:
    """Free-parameter index sets of a mask, in row-major packing order.

    Cached on the mask: the ADMM solvers pack and unpack every iteration.
    """
    cached = getattr(mask, "_index_sets", None)
    if cached is not None:
        return cached
    iu, ju = np.triu_indices(mask.m)
    keep = mask.allowed[iu, ju]
    rows = np.ascontiguousarray(iu[keep])
    cols = np.ascontiguousarray(ju[keep])
    sets = tuple(tuple(int(j) for j in cols[rows == i]) for i in range(mask.m))
    counts = [len(s) for s in sets]
    offsets = tuple(int(v) for v in np.concatenate([[0], np.cumsum(counts)[:-1]]))
    rows.setflags(write=False)
    cols.setflags(write=False)
    idx = IndexSets(sets=sets, offsets=offsets, total=int(rows.size),
                    rows=rows, cols=cols)
    object.__setattr__(mask, "_index_sets", idx)
    return idx


def is_spanning_tree(mask: ArchitectureMask) -> bool:
    """True when the off-diagonal pattern is a spanning tree of the ports.

    Helper for validating custom tree topologies: exactly m - 1 undirected
    edges that connect all ports.
    """
    m = mask.m
    iu, ju = np.triu_indices(m, k=1)
    edges = np.flatnonzero(mask.allowed[iu, ju])
    if edges.size != m - 1:
        return False
    parent = list(range(m))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e in edges:
        a, b = find(int(iu[e])), find(int(ju[e]))
        if a == b:
            return False  # cycle
        parent[a] = b
    return True


def conforms_to_mask(b: np.ndarray, mask: ArchitectureMask) -> bool:
    """Exact symmetry and exact zeros outside the permitted pattern."""
    b = np.asarray(b)
    return (b.shape == (mask.m, mask.m)
            and np.array_equal(b, b.T)
            and not np.any(b[~mask.allowed]))


def random_susceptance(mask: ArchitectureMask, rng: np.random.Generator,
                       scale: float = 1.0) -> np.ndarray:
    """Random symmetric susceptance matrix conforming to the mask."""
    idx = index_sets(mask)
    x = rng.standard_normal(idx.total) * scale
    return unpack_susceptance(x, mask)


def pack_susceptance(b: np.ndarray, mask: ArchitectureMask) -> np.ndarray:
    """Free upper-triangular entries of ``b`` in mask packing order."""
    idx = index_sets(mask)
    return np.asarray(b, dtype=float)[idx.rows, idx.cols].copy()


def unpack_susceptance(x: np.ndarray, mask: ArchitectureMask) -> np.ndarray:
    """Inverse of :func:`pack_susceptance`; output is exactly symmetric."""
    idx = index_sets(mask)
    x = np.asarray(x, dtype=float)
    if x.shape != (idx.total,):
        raise ValueError(f"expected {idx.total} parameters, got {x.shape}")
    b = np.zeros((mask.m, mask.m))
    b[idx.rows, idx.cols] = x
    b[idx.cols, idx.rows] = x
    return b


def b_to_theta(b: np.ndarray, z0: float) -> np.ndarray:
    """Scattering matrix of a purely susceptive network: (I+iZ0 B)^-1 (I-iZ0 B).

    Computed as a linear solve, never an explicit inverse.  I + iZ0*B is
    invertible for every real symmetric B, so the only failure mode is
    conditioning, which is reported as a warning when the solve residual is
    larger than expected.
    """
    b = np.asarray(b, dtype=float)
    m = b.shape[0]
    izb = 1j * z0 * b
    lhs = np.eye(m) + izb
    rhs = np.eye(m) - izb
    theta = np.linalg.solve(lhs, rhs)
    resid = np.linalg.norm(lhs @ theta - rhs)
    if resid > 1e-8 * max(1.0, np.linalg.norm(rhs)):
        warnings.warn(
            f"large Cayley solve residual {resid:.3e}; susceptance matrix is "
            "badly conditioned", RuntimeWarning, stacklevel=2)
    return theta


def theta_to_b(theta: np.ndarray, z0: float) -> np.ndarray:
    """Susceptance matrix recovering ``theta``: solves iZ0 B = (I+Theta)^-1 (I-Theta).

    Fails when Theta has an eigenvalue at -1 (open-circuit limit), where the
    susceptance parameterization has no finite representative.
    """
    theta = np.asarray(theta, dtype=complex)
    m = theta.shape[0]
    lhs = np.eye(m) + theta
    sv = np.linalg.svd(lhs, compute_uv=False)
    if sv[-1] <= m * np.finfo(float).eps * sv[0]:
        raise ValueError("I + Theta is singular (eigenvalue of Theta at -1); "
                         "no finite susceptance matrix exists")
    x = np.linalg.solve(lhs, np.eye(m) - theta)  # equals iZ0*B for valid input
    b = x.imag / z0
    return (b + b.T) / 2.0


def sinr_and_rate(u: np.ndarray, w: np.ndarray, g: np.ndarray,
                  sigma2: float) -> tuple[np.ndarray, float]:
    """Per-user SINR and sum rate (nats) for effective reflected channels u.

    SINR_k = |u_k^H G w_k|^2 / (sum_{j != k} |u_k^H G w_j|^2 + sigma2).
    """
    if sigma2 <= 0:
        raise ValueError("noise power must be positive")
    s = u.conj().T @ g @ w  # s[k, j] = u_k^H G w_j
    p = np.abs(s) ** 2
    signal = np.diag(p)
    interference = p.sum(axis=1) - signal
    sinr = signal / (interference + sigma2)
    return sinr, float(np.log1p(sinr).sum())


def assemble_a_matrix(mmat: np.ndarray, mask: ArchitectureMask) -> np.ndarray:
    """Dense coefficient matrix A with ||B M - G||_F^2 = ||A x - vec(G^T)||^2.

    Column p corresponds to the packed free parameter B[i, j] (j >= i) and
    carries row m_j in row-block i plus, when i != j, row m_i in row-block j.
    Used by the small-parameter solve path and by oracle tests; the
    large-parameter path applies A through its block structure instead.
    """
    mmat = np.asarray(mmat, dtype=float)
    m, c = mmat.shape
    idx = index_sets(mask)
    a3 = np.zeros((m, c, idx.total))
    cols = np.arange(idx.total)
    a3[idx.rows, :, cols] = mmat[idx.cols]
    off = idx.rows != idx.cols
    a3[idx.cols[off], :, cols[off]] = mmat[idx.rows[off]]
    return a3.reshape(m * c, idx.total)


def _row_space_gram(mmat: np.ndarray, mask: ArchitectureMask) -> np.ndarray:
    """A A^T assembled from the block structure in O(M^2 K^2).

    Block (r, s), r != s, is outer(m_s, m_r) when ports r and s may be
    interconnected and zero otherwise; block (r, r) sums outer(m_q, m_q)
    over the ports q connected to r (including r itself).
    """
    m, c = mmat.shape
    q = np.ascontiguousarray(mmat).reshape(-1)
    gram = np.outer(q, q)                                  # [(s,u), (r,v)]
    gram = gram.reshape(m, c, m, c).transpose(2, 1, 0, 3)  # [(r,u), (s,v)]
    gram = np.ascontiguousarray(gram).reshape(m * c, m * c)
    gram *= _kron_mask(mask, c)
    maskf = mask.allowed.astype(float)
    outers = mmat[:, :, None] * mmat[:, None, :]           # (M, 2K, 2K)
    diag = (maskf @ outers.reshape(m, c * c)).reshape(m, c, c)
    g4 = gram.reshape(m, c, m, c)
    g4[np.arange(m), :, np.arange(m), :] = diag
    return gram


def _kron_mask(mask: ArchitectureMask, c: int) -> np.ndarray:
    """allowed pattern expanded to c x c blocks, cached per block size."""
    cache = getattr(mask, "_kron_masks", None)
    if cache is None:
        cache = {}
        object.__setattr__(mask, "_kron_masks", cache)
    if c not in cache:
        cache[c] = np.kron(mask.allowed.astype(float), np.ones((c, c)))
    return cache[c]


def _param_space_rhs(ymat: np.ndarray, mmat: np.ndarray,
                     idx: IndexSets) -> np.ndarray:
    """A^T applied to vec(Y^T) through the block structure."""
    s = ymat @ mmat.T
    out = s[idx.rows, idx.cols].copy()
    off = idx.rows != idx.cols
    out[off] += s[idx.cols[off], idx.rows[off]]
    return out


def solve_b_subproblem(mmat: np.ndarray, gmat: np.ndarray, xi: float,
                       b_prev: np.ndarray, mask: ArchitectureMask) -> np.ndarray:
    """Masked symmetric proximal least squares shared by both solvers.

    Returns the unique minimizer of

        ||B M - G||_F^2 + (xi / 2) * ||x - x_prev||^2

    over symmetric B conforming to ``mask``, where x packs the free upper
    triangular entries of B (each counted once).  Writing the residual as
    A x - b, the solution satisfies (2 A^T A + xi I) x = 2 A^T b + xi x_prev.

    Two equivalent closed forms are used: normal equations in the packed
    parameter space when the parameter count is below the number of scalar
    equations (2 M K), and a matrix-inversion-lemma form in equation space
    otherwise, which caps the factorization at size 2 M K for densely
    connected masks.
    """
    mmat = np.asarray(mmat, dtype=float)
    gmat = np.asarray(gmat, dtype=float)
    if xi <= 0:
        raise ValueError("proximal weight must be positive")
    if mmat.shape != gmat.shape or mmat.shape[0] != mask.m:
        raise ValueError(f"shape mismatch: {mmat.shape} vs {gmat.shape} "
                         f"for m={mask.m}")
    if not conforms_to_mask(b_prev, mask):
        raise ValueError("previous susceptance does not conform to the mask")

    if index_sets(mask).total < mmat.size:
        return solve_b_parameter_space(mmat, gmat, xi, b_prev, mask)
    return solve_b_equation_space(mmat, gmat, xi, b_prev, mask)


def _proximal_rhs(mmat, gmat, xi, b_prev, mask, idx):
    xh = 0.5 * xi  # weight entering the normal equations
    x_prev = np.asarray(b_prev, dtype=float)[idx.rows, idx.cols]
    return _param_space_rhs(gmat, mmat, idx) + xh * x_prev, xh


def solve_b_parameter_space(mmat, gmat, xi, b_prev, mask) -> np.ndarray:
    """Closed form via normal equations over the packed parameters;
    factorization size equals the free-parameter count."""
    idx = index_sets(mask)
    v, xh = _proximal_rhs(mmat, gmat, xi, b_prev, mask, idx)
    a = assemble_a_matrix(mmat, mask)
    ata = a.T @ a
    ata[np.diag_indices_from(ata)] += xh
    factor = cho_factor(ata, overwrite_a=True, check_finite=False)
    return unpack_susceptance(cho_solve(factor, v, check_finite=False), mask)


def solve_b_equation_space(mmat, gmat, xi, b_prev, mask) -> np.ndarray:
    """Equivalent closed form through the matrix inversion lemma;
    factorization size equals the equation count 2 M K."""
    idx = index_sets(mask)
    v, xh = _proximal_rhs(mmat, gmat, xi, b_prev, mask, idx)
    aat = _row_space_gram(mmat, mask)
    aat[np.diag_indices_from(aat)] += xh
    av = (unpack_susceptance(v, mask) @ mmat).reshape(-1)
    factor = cho_factor(aat, overwrite_a=True, check_finite=False)
    t = cho_solve(factor, av, check_finite=False)
    x = (v - _param_space_rhs(t.reshape(mask.m, -1), mmat, idx)) / xh
    return unpack_susceptance(x, mask)
