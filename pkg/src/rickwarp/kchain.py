"""k-chain values, k-positivity and the block eigenvalue criterion.

A self-adjoint ``A`` on the exterior square of an inner product space ``V``
is stored as a dense symmetric matrix in the orthonormal basis
``e_a ^ e_b`` (``a < b``, lexicographic order). Operators whose eigenspaces
are the products ``V_i ^ V_j`` of an orthogonal splitting
``V = V_1 + V_2 + V_3`` are described compactly by :class:`BlockOperator`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import InputError, NumericalInconsistencyError

TAU_UNIT = 1e-9
TAU_NUM = 1e-9


# ---------------------------------------------------------------------------
# exterior square plumbing
# ---------------------------------------------------------------------------

def wedge_pairs(n: int) -> np.ndarray:
    """Index pairs ``(a, b)``, ``a < b``, labelling the basis of the exterior square."""
    return np.array(list(itertools.combinations(range(n), 2)), dtype=int).reshape(-1, 2)


def wedge(x, y) -> np.ndarray:
    """Coordinates of ``x ^ y`` in the ``e_a ^ e_b`` basis."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    pairs = wedge_pairs(x.shape[-1])
    a, b = pairs[:, 0], pairs[:, 1]
    return x[..., a] * y[..., b] - x[..., b] * y[..., a]


def wedge_matrix(v) -> np.ndarray:
    """Matrix of ``x -> v ^ x``; accepts a single vector or a stack of shape (S, n)."""
    v = np.asarray(v, dtype=float)
    single = v.ndim == 1
    V = np.atleast_2d(v)
    S, n = V.shape
    pairs = wedge_pairs(n)
    W = np.zeros((S, len(pairs), n))
    rows = np.arange(len(pairs))
    W[:, rows, pairs[:, 1]] += V[:, pairs[:, 0]]
    W[:, rows, pairs[:, 0]] -= V[:, pairs[:, 1]]
    return W[0] if single else W


def induced_rotation(Q) -> np.ndarray:
    """The map induced on the exterior square by an orthogonal ``Q``."""
    Q = np.asarray(Q, dtype=float)
    pairs = wedge_pairs(Q.shape[0])
    c, d = pairs[:, 0][:, None], pairs[:, 1][:, None]
    a, b = pairs[:, 0][None, :], pairs[:, 1][None, :]
    return Q[c, a] * Q[d, b] - Q[d, a] * Q[c, b]


def _check_symmetric(A, n=None) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InputError("operator must be a square matrix")
    if n is not None and A.shape[0] != n * (n - 1) // 2:
        raise InputError(f"operator has size {A.shape[0]}, expected {n * (n - 1) // 2}")
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    if np.max(np.abs(A - A.T), initial=0.0) > TAU_NUM * scale:
        raise InputError("operator is not self-adjoint")
    return 0.5 * (A + A.T)


def _dim_from_operator(A) -> int:
    N = A.shape[0]
    n = int(round((1 + np.sqrt(1 + 8 * N)) / 2))
    if n * (n - 1) // 2 != N:
        raise InputError(f"size {N} is not the dimension of an exterior square")
    return n


def random_rotation(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random orthogonal matrix."""
    Z = rng.standard_normal((n, n))
    Q, R = np.linalg.qr(Z)
    return Q * np.sign(np.diag(R))


# ---------------------------------------------------------------------------
# block operators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BlockOperator:
    """Operator with eigenspaces ``V_i ^ V_j`` and eigenvalues ``lam[i, j]``.

    ``lam`` is a symmetric 3x3 table (0-based indices). The diagonal entry of a
    one-dimensional block is absent, stored as NaN, because that eigenspace is
    zero-dimensional.
    """

    dims: tuple
    lam: np.ndarray = field(repr=False)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 3 or min(dims) < 1:
            raise InputError(f"dims must be three positive integers, got {self.dims}")
        if sum(dims) < 3:
            raise InputError("dim V must be at least 3")
        lam = np.array(self.lam, dtype=float).reshape(3, 3)
        for i in range(3):
            if dims[i] == 1:
                lam[i, i] = np.nan
            elif not np.isfinite(lam[i, i]):
                raise InputError(f"block {i + 1} has dimension {dims[i]} but lambda_{i + 1}{i + 1} is missing")
        off = ~np.eye(3, dtype=bool)
        if not np.all(np.isfinite(lam[off])):
            raise InputError("off-diagonal eigenvalues must be finite")
        if np.max(np.abs(lam[off] - lam.T[off])) > 0.0:
            raise InputError("eigenvalue table must be symmetric")
        lam.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "lam", lam)

    @classmethod
    def from_values(cls, dims, l12, l13, l23, l11=None, l22=None, l33=None):
        nan = np.nan
        lam = [[nan if l11 is None else l11, l12, l13],
               [l12, nan if l22 is None else l22, l23],
               [l13, l23, nan if l33 is None else l33]]
        return cls(tuple(dims), np.array(lam, dtype=float))

    @property
    def dim(self) -> int:
        return sum(self.dims)

    def offdiag(self):
        """``(lambda_12, lambda_13, lambda_23)``."""
        L = self.lam
        return L[0, 1], L[0, 2], L[1, 2]

    def block_slices(self):
        starts = np.cumsum((0,) + self.dims[:2])
        return [slice(int(s), int(s) + d) for s, d in zip(starts, self.dims)]

    def block_of(self) -> np.ndarray:
        """Block label (0, 1, 2) of each standard basis vector of V."""
        return np.repeat(np.arange(3), self.dims)

    def diagonal(self) -> np.ndarray:
        """Eigenvalue attached to each ``e_a ^ e_b`` basis bivector."""
        labels = self.block_of()
        pairs = wedge_pairs(self.dim)
        return self.lam[labels[pairs[:, 0]], labels[pairs[:, 1]]]

    def dense(self, rotation=None) -> np.ndarray:
        """Assemble the operator; with ``rotation=Q`` block ``i`` spans ``Q @ e_j`` for ``j`` in block ``i``."""
        D = np.diag(self.diagonal())
        if rotation is None:
            return D
        L = induced_rotation(rotation)
        return L @ D @ L.T

    def relabel(self, perm) -> "BlockOperator":
        """New operator whose block ``i`` is this operator's block ``perm[i]``."""
        perm = list(perm)
        if sorted(perm) != [0, 1, 2]:
            raise InputError(f"not a permutation of (0, 1, 2): {perm}")
        dims = tuple(self.dims[j] for j in perm)
        lam = self.lam[np.ix_(perm, perm)]
        return BlockOperator(dims, lam)

    def to_dict(self) -> dict:
        lam = [[None if not np.isfinite(x) else float(x) for x in row] for row in self.lam]
        return {"dims": list(self.dims), "lambda": lam}

    @classmethod
    def from_dict(cls, d) -> "BlockOperator":
        lam = [[np.nan if x is None else float(x) for x in row] for row in d["lambda"]]
        return cls(tuple(d["dims"]), np.array(lam))


@dataclass(frozen=True)
class ChainProfile:
    """A base block ``i`` (0-based) and how many chain vectors come from each block."""

    base: int
    counts: tuple

    def value(self, block: BlockOperator) -> float:
        row = block.lam[self.base]
        return float(sum(n * row[j] for j, n in enumerate(self.counts) if n))

    def chain(self, block: BlockOperator, rotation=None) -> np.ndarray:
        """An orthonormal frame ``(v_0, ..., v_k)`` realising this profile."""
        n = block.dim
        E = np.eye(n) if rotation is None else np.asarray(rotation, dtype=float)
        sl = block.block_slices()
        cols = [sl[self.base].start]
        for j, c in enumerate(self.counts):
            start = sl[j].start + (1 if j == self.base else 0)
            cols.extend(range(start, start + c))
        return E[:, cols].T

    def to_dict(self) -> dict:
        return {"base_block": self.base + 1, "counts": list(self.counts)}


@dataclass(frozen=True)
class UnitDirection:
    """Coefficients of a unit vector ``v = mu_1 v_1 + mu_2 v_2 + mu_3 v_3``."""

    mu: tuple

    def __post_init__(self):
        mu = tuple(float(x) for x in self.mu)
        if len(mu) != 3:
            raise InputError("mu must have three components")
        if abs(sum(x * x for x in mu) - 1.0) > TAU_UNIT:
            raise InputError(f"mu is not a unit direction: |mu|^2 = {sum(x * x for x in mu)!r}")
        object.__setattr__(self, "mu", mu)

    @property
    def weights(self) -> np.ndarray:
        return np.square(np.array(self.mu))


@dataclass(frozen=True)
class AvSpectrum:
    """Spectrum of ``A_v``: the ``a_i`` (multiplicity ``d_i - 1``), ``lambda_+-`` and 0."""

    a: tuple
    multiplicity: tuple
    lambda_plus: float
    lambda_minus: float

    def perp_eigenvalues(self) -> np.ndarray:
        """Sorted spectrum of ``A_v`` restricted to the orthogonal complement of ``v``."""
        vals = [self.lambda_plus, self.lambda_minus]
        for ai, m in zip(self.a, self.multiplicity):
            vals.extend([ai] * m)
        return np.sort(np.array(vals))

    def eigenvalues(self) -> np.ndarray:
        return np.sort(np.append(self.perp_eigenvalues(), 0.0))


# ---------------------------------------------------------------------------
# chain values and A_v
# ---------------------------------------------------------------------------

def chain_value(A, basis, tau_unit: float = TAU_UNIT) -> float:
    """Sum of ``<A(v_0 ^ v_i), v_0 ^ v_i>`` over ``i = 1..k`` for the frame ``basis``."""
    A = np.asarray(A, dtype=float)
    n = _dim_from_operator(A)
    B = np.atleast_2d(np.asarray(basis, dtype=float))
    if B.shape[1] != n:
        raise InputError(f"frame vectors have length {B.shape[1]}, expected {n}")
    if B.shape[0] < 2 or B.shape[0] > n:
        raise InputError("frame must contain between 2 and dim V vectors")
    if np.max(np.abs(B @ B.T - np.eye(B.shape[0]))) > tau_unit:
        raise InputError("frame is not orthonormal")
    W = wedge(B[0][None, :], B[1:])
    return float(np.einsum("ip,pq,iq->", W, A, W))


def build_av(A, v, tau_unit: float = TAU_UNIT) -> np.ndarray:
    """The operator ``A_v`` on V defined by ``<A_v x, y> = <A(v ^ x), v ^ y>``."""
    A = np.asarray(A, dtype=float)
    n = _dim_from_operator(A)
    v = np.asarray(v, dtype=float)
    if v.shape != (n,):
        raise InputError(f"v must have shape ({n},)")
    if abs(float(v @ v) - 1.0) > tau_unit:
        raise InputError("v is not a unit vector")
    W = wedge_matrix(v)
    Av = W.T @ A @ W
    return 0.5 * (Av + Av.T)


def _av_batch(A, V) -> np.ndarray:
    W = wedge_matrix(V)
    T = np.einsum("pq,sqj->spj", A, W, optimize=True)
    Av = np.einsum("spi,spj->sij", W, T, optimize=True)
    return 0.5 * (Av + np.swapaxes(Av, 1, 2))


def _perp_restrict(M, V) -> np.ndarray:
    """Restrict a stack of operators ``M[s]`` to the complement of ``V[s]`` (Householder)."""
    S, n = V.shape
    sign = np.where(V[:, 0] >= 0, 1.0, -1.0)
    u = V.copy()
    u[:, 0] += sign
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    H = np.eye(n)[None] - 2.0 * u[:, :, None] * u[:, None, :]
    R = H @ M @ H
    return R[:, 1:, 1:]


def chain_minima(A, k: int, directions) -> np.ndarray:
    """Minimum k-chain value with base ``v`` for every row ``v`` of ``directions``.

    Computed as the sum of the ``k`` smallest eigenvalues of ``A_v`` on the
    complement of ``v``.
    """
    A = _check_symmetric(A)
    n = _dim_from_operator(A)
    V = np.atleast_2d(np.asarray(directions, dtype=float))
    if not 1 <= k <= n - 1:
        raise InputError(f"k must lie in [1, {n - 1}]")
    norms = np.linalg.norm(V, axis=1)
    if np.any(np.abs(norms - 1.0) > TAU_UNIT):
        raise InputError("directions must be unit vectors")
    out = np.empty(len(V))
    for lo in range(0, len(V), 4096):
        Vc = V[lo:lo + 4096]
        R = _perp_restrict(_av_batch(A, Vc), Vc)
        ev = np.linalg.eigvalsh(R)
        out[lo:lo + 4096] = ev[:, :k].sum(axis=1)
    return out


def min_chain_value_bruteforce(A, k: int, samples: int = 10_000, seed: int = 0,
                               directions=None) -> float:
    """Smallest k-chain value over random (or supplied) unit base vectors."""
    A = _check_symmetric(A)
    n = _dim_from_operator(A)
    if directions is None:
        if samples < 1:
            raise InputError("samples must be at least 1")
        rng = np.random.default_rng(seed)
        V = rng.standard_normal((samples, n))
        V /= np.linalg.norm(V, axis=1, keepdims=True)
    else:
        V = np.atleast_2d(np.asarray(directions, dtype=float))
    return float(np.min(chain_minima(A, k, V)))


# ---------------------------------------------------------------------------
# closed-form spectrum of A_v for block operators
# ---------------------------------------------------------------------------

def sqrt_expr(l12, l13, l23, w1, w2, w3):
    """The rearranged discriminant of the reduced 3x3 matrix, in squared weights ``w_i = mu_i^2``."""
    d1 = l12 - l13
    d2 = l12 - l23
    d3 = l13 - l23
    return (w1 * w1 * d1 * d1 + w2 * w2 * d2 * d2 + w3 * w3 * d3 * d3
            + 2 * w1 * w2 * d1 * d2 - 2 * w1 * w3 * d1 * d3 + 2 * w2 * w3 * d2 * d3)


def _trace_s(l12, l13, l23, w1, w2, w3):
    return w1 * (l12 + l13) + w2 * (l12 + l23) + w3 * (l13 + l23)


def _clamp_discriminant(E, scale, tau_num):
    E = np.asarray(E, dtype=float)
    floor = -tau_num * np.maximum(1.0, scale * scale)
    if np.any(E < floor):
        raise NumericalInconsistencyError(f"discriminant {np.min(E)!r} is negative beyond round-off")
    return np.maximum(E, 0.0)


def av_spectrum(block: BlockOperator, mu, tau_num: float = TAU_NUM) -> AvSpectrum:
    """Closed-form spectrum of ``A_v`` for ``v = sum mu_i v_i``."""
    if not isinstance(mu, UnitDirection):
        mu = UnitDirection(tuple(mu))
    w = mu.weights
    l12, l13, l23 = block.offdiag()
    L = block.lam
    a = []
    for i in range(3):
        if block.dims[i] == 1:
            a.append(float("nan"))
        else:
            a.append(float(w @ L[i]))
    S = _trace_s(l12, l13, l23, *w)
    E = sqrt_expr(l12, l13, l23, *w)
    scale = max(abs(l12), abs(l13), abs(l23))
    root = float(np.sqrt(_clamp_discriminant(E, scale, tau_num)))
    return AvSpectrum(a=tuple(a), multiplicity=tuple(d - 1 for d in block.dims),
                      lambda_plus=0.5 * (S + root), lambda_minus=0.5 * (S - root))


def sort_block_labels(block: BlockOperator):
    """Relabel blocks so that ``lambda_12 >= lambda_13 >= lambda_23``.

    Returns ``(perm, relabeled)`` with ``relabeled = block.relabel(perm)``;
    relabeled block ``i`` is original block ``perm[i]``.
    """
    pairs = {(0, 1): block.lam[0, 1], (0, 2): block.lam[0, 2], (1, 2): block.lam[1, 2]}
    order = sorted(pairs, key=lambda p: (-pairs[p], p))
    hi, lo = set(order[0]), set(order[2])
    (shared,) = hi & lo
    first = (hi - {shared}).pop()
    last = (lo - {shared}).pop()
    perm = (first, shared, last)
    return perm, block.relabel(perm)


def sqrt_expr_bounds(lambdas: Sequence[float], mu, tau_num: float = TAU_NUM):
    """``(lower, E, upper)`` sandwiching the discriminant for sorted eigenvalues.

    ``lambdas`` is ``(lambda_12, lambda_13, lambda_23)`` with
    ``lambda_12 >= lambda_13 >= lambda_23``.
    """
    l12, l13, l23 = (float(x) for x in lambdas)
    if not (l12 >= l13 >= l23):
        raise InputError("eigenvalues must satisfy lambda_12 >= lambda_13 >= lambda_23; relabel first")
    if not isinstance(mu, UnitDirection):
        mu = UnitDirection(tuple(mu))
    w1, w2, w3 = mu.weights
    E = float(sqrt_expr(l12, l13, l23, w1, w2, w3))
    lower = (w1 * (l12 - l13) + w3 * (l23 - l13)) ** 2
    upper = (w1 * (l12 - l13) + w2 * (l12 - l23) + w3 * (l13 - l23)) ** 2
    return float(lower), E, float(upper)


# ---------------------------------------------------------------------------
# k-positivity and the profile hypothesis
# ---------------------------------------------------------------------------

def k_positive(eigs, k: int, threshold: float = 0.0) -> bool:
    """True iff every ``k`` of the eigenvalues sum to more than ``threshold``."""
    e = np.sort(np.asarray(eigs, dtype=float).ravel())
    if not 1 <= k <= e.size:
        raise InputError(f"k={k} out of range for {e.size} eigenvalues")
    return bool(e[:k].sum() > threshold)


def admissible_profiles(dims, k: int) -> Iterator[ChainProfile]:
    """Every ``(i, n_1, n_2, n_3)`` allowed in the hypothesis, in a fixed order."""
    dims = tuple(dims)
    for i in range(3):
        caps = [d - 1 if j == i else d for j, d in enumerate(dims)]
        for n1 in range(min(caps[0], k) + 1):
            for n2 in range(min(caps[1], k - n1) + 1):
                n3 = k - n1 - n2
                if 0 <= n3 <= caps[2]:
                    yield ChainProfile(i, (n1, n2, n3))


@dataclass(frozen=True)
class ProfileCheck:
    """Outcome of :func:`check_profile_hypothesis`.

    ``margin`` is the smallest profile sum minus the threshold; ``witness`` is
    the first profile attaining the smallest sum when the check fails.
    """

    holds: bool
    min_value: float
    margin: float
    witness: Optional[ChainProfile]

    def __bool__(self):
        return self.holds

    def to_dict(self) -> dict:
        return {"holds": self.holds, "min_value": self.min_value, "margin": self.margin,
                "witness": None if self.witness is None else self.witness.to_dict()}


def check_profile_hypothesis(block: BlockOperator, k: int, threshold: float = 0.0) -> ProfileCheck:
    """Test ``n_1 lam_i1 + n_2 lam_i2 + n_3 lam_i3 > threshold`` over all admissible profiles."""
    if not 1 <= k <= block.dim - 1:
        raise InputError(f"k must lie in [1, {block.dim - 1}], got {k}")
    best, worst = np.inf, None
    for prof in admissible_profiles(block.dims, k):
        val = prof.value(block)
        if val < best:
            best, worst = val, prof
    holds = bool(best > threshold)
    return ProfileCheck(holds, float(best), float(best - threshold), None if holds else worst)


def simplex_grid(resolution: int) -> np.ndarray:
    """Uniform triangular grid on the simplex ``w_1 + w_2 + w_3 = 1`` plus edge midpoints."""
    if resolution < 1:
        raise InputError("resolution must be positive")
    R = int(resolution)
    i, j = np.meshgrid(np.arange(R + 1), np.arange(R + 1), indexing="ij")
    keep = i + j <= R
    pts = np.stack([i[keep], j[keep], R - i[keep] - j[keep]], axis=1) / R
    extra = np.array([[0.5, 0.5, 0.0], [0.5, 0.0, 0.5], [0.0, 0.5, 0.5]])
    return np.unique(np.vstack([pts, extra]), axis=0)


def perp_spectra(block: BlockOperator, weights, tau_num: float = TAU_NUM) -> np.ndarray:
    """Sorted spectra of ``A_v`` on the complement of ``v``, one row per weight vector ``mu^2``."""
    w = np.atleast_2d(np.asarray(weights, dtype=float))
    w1, w2, w3 = w[:, 0], w[:, 1], w[:, 2]
    l12, l13, l23 = block.offdiag()
    S = _trace_s(l12, l13, l23, w1, w2, w3)
    E = _clamp_discriminant(sqrt_expr(l12, l13, l23, w1, w2, w3),
                            max(abs(l12), abs(l13), abs(l23)), tau_num)
    root = np.sqrt(E)
    cols = [0.5 * (S + root), 0.5 * (S - root)]
    L = np.nan_to_num(block.lam, nan=0.0)
    for i in range(3):
        ai = w @ L[i]
        cols.extend([ai] * (block.dims[i] - 1))
    return np.sort(np.stack(cols, axis=1), axis=1)


def min_chain_value_analytic(block: BlockOperator, k: int, resolution: int = 200,
                             return_weights: bool = False):
    """Minimum k-chain value sampled over directions ``mu`` on a simplex grid of ``mu^2``."""
    if not 1 <= k <= block.dim - 1:
        raise InputError(f"k must lie in [1, {block.dim - 1}], got {k}")
    w = simplex_grid(resolution)
    vals = perp_spectra(block, w)[:, :k].sum(axis=1)
    i = int(np.argmin(vals))
    if return_weights:
        return float(vals[i]), w[i]
    return float(vals[i])


def directions_from_weights(block: BlockOperator, weights, rotation=None) -> np.ndarray:
    """Unit vectors ``sum sqrt(w_i) v_i`` with ``v_i`` the first basis vector of block ``i``."""
    w = np.atleast_2d(np.asarray(weights, dtype=float))
    E = np.eye(block.dim) if rotation is None else np.asarray(rotation, dtype=float)
    firsts = [s.start for s in block.block_slices()]
    return np.sqrt(w) @ E[:, firsts].T


def random_block(rng: np.random.Generator, dims, low: float = -1.0, high: float = 2.0) -> BlockOperator:
    """Block operator with eigenvalues uniform on ``[low, high]``."""
    vals = rng.uniform(low, high, size=6)
    lam = np.array([[vals[0], vals[3], vals[4]],
                    [vals[3], vals[1], vals[5]],
                    [vals[4], vals[5], vals[2]]])
    return BlockOperator(tuple(dims), lam)
