"""Collections of subspaces of R^d and their pairwise geometry.

A collection holds N subspaces, each represented by a d x k matrix with
orthonormal columns. Projections P_j = U_j U_j^T are materialized only on
demand; everything pairwise (coherence, principal angles, spectral distance,
packing diameter) is computed from the small k x k products U_i^T U_j.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    IndexOutOfRangeError,
    InvalidAngleError,
    InvalidDimsError,
    NonpositiveWeightError,
    OrthonormalityError,
    RankDeficientError,
    SameIndexError,
    SchemaError,
    ShapeMismatchError,
    SingleSubspaceError,
    TooManySubspacesError,
)

ORTHONORMALITY_TOL = 1e-10


def _orthonormalize(basis: np.ndarray) -> np.ndarray:
    """Thin QR factor with nonnegative R diagonal (deterministic sign choice)."""
    q, r = np.linalg.qr(basis)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class SubspaceCollection:
    """N subspaces of R^d, each stored as a basis with orthonormal columns.

    Direct construction validates orthonormality but does not repair it; use
    :func:`build_collection` to orthonormalize arbitrary full-rank input.
    Subspace dimensions may differ; ``block_dim`` reports the largest.
    """

    bases: tuple[np.ndarray, ...]
    label: str = ""

    def __post_init__(self):
        if len(self.bases) < 1:
            raise InvalidDimsError("a collection needs at least one subspace")
        bases = tuple(_freeze(u) for u in self.bases)
        object.__setattr__(self, "bases", bases)
        d = bases[0].shape[0]
        for j, u in enumerate(bases):
            if u.ndim != 2:
                raise InvalidDimsError(f"basis {j} is not a matrix")
            if u.shape[0] != d:
                raise ShapeMismatchError(
                    f"basis {j} has ambient dimension {u.shape[0]}, expected {d}"
                )
            k_j = u.shape[1]
            if not 1 <= k_j <= d:
                raise InvalidDimsError(f"basis {j} has {k_j} columns, ambient {d}")
            gram = u.T @ u
            err = np.max(np.abs(gram - np.eye(k_j)))
            if err > ORTHONORMALITY_TOL:
                raise OrthonormalityError(
                    f"basis {j} deviates from orthonormality by {err:.3e}"
                )

    @property
    def ambient_dim(self) -> int:
        return self.bases[0].shape[0]

    @property
    def block_dim(self) -> int:
        return max(u.shape[1] for u in self.bases)

    @property
    def block_dims(self) -> tuple[int, ...]:
        return tuple(u.shape[1] for u in self.bases)

    @property
    def size(self) -> int:
        return len(self.bases)

    def projection(self, j: int) -> np.ndarray:
        """Orthogonal projection onto subspace j, materialized as d x d."""
        u = self.bases[j]
        return u @ u.T

    def __len__(self) -> int:
        return len(self.bases)

    def __repr__(self) -> str:  # pragma: no cover
        return (
            f"SubspaceCollection(d={self.ambient_dim}, k={self.block_dim}, "
            f"N={self.size}, label={self.label!r})"
        )


@dataclass(frozen=True)
class CoherenceReport:
    """Largest pairwise subspace overlap and where it is attained.

    ``pairwise_sigma[i, j]`` is the largest singular value of U_i^T U_j for
    i != j (NaN on the diagonal); ``lambda_`` is its maximum and equals the
    cosine of the smallest principal angle over all pairs.
    """

    lambda_: float
    argmax_pair: tuple[int, int]
    pairwise_sigma: np.ndarray
    min_principal_angle: float


@dataclass(frozen=True)
class FrameBounds:
    """Extreme eigenvalues of the weighted sum of subspace projections."""

    lower: float
    upper: float
    weights: tuple[float, ...]


def build_collection(bases, label: str = "") -> SubspaceCollection:
    """Orthonormalize full-rank bases into a validated collection.

    Each input matrix is replaced by the thin QR factor of its column span
    (R diagonal made nonnegative), so already-orthonormal input is returned
    unchanged up to roundoff.

    Raises
    ------
    ShapeMismatchError
        If the matrices do not all share one d x k shape.
    RankDeficientError
        If some matrix has column rank below k.
    """
    mats = [np.asarray(b, dtype=float) for b in bases]
    if not mats:
        raise InvalidDimsError("need at least one basis")
    shape = mats[0].shape
    for j, m in enumerate(mats):
        if m.ndim != 2:
            raise InvalidDimsError(f"basis {j} is not a matrix")
        if m.shape != shape:
            raise ShapeMismatchError(f"basis {j} has shape {m.shape}, expected {shape}")
    ortho = []
    for j, m in enumerate(mats):
        if np.linalg.matrix_rank(m) < m.shape[1]:
            raise RankDeficientError(j)
        ortho.append(_orthonormalize(m))
    return SubspaceCollection(tuple(ortho), label=label)


def random_collection(d: int, k: int, N: int, seed: int, label: str | None = None) -> SubspaceCollection:
    """Draw N independent uniformly random k-dimensional subspaces of R^d.

    Each basis is the orthonormalized d x k standard Gaussian matrix, which
    makes the span Haar-distributed on the Grassmannian. Deterministic for a
    fixed seed.
    """
    if k > d:
        raise InvalidDimsError(f"k={k} exceeds ambient dimension d={d}")
    if N < 1 or k < 1:
        raise InvalidDimsError("need N >= 1 and k >= 1")
    rng = np.random.default_rng(seed)
    bases = tuple(_orthonormalize(rng.standard_normal((d, k))) for _ in range(N))
    if label is None:
        label = f"random(d={d},k={k},N={N},seed={seed})"
    return SubspaceCollection(bases, label=label)


def orthogonal_collection(d: int, k: int, N: int) -> SubspaceCollection:
    """N mutually orthogonal coordinate-block subspaces; requires N*k <= d."""
    if k > d or k < 1 or N < 1:
        raise InvalidDimsError(f"invalid dimensions d={d}, k={k}, N={N}")
    if N * k > d:
        raise TooManySubspacesError(
            f"cannot fit {N} orthogonal {k}-dimensional subspaces in R^{d}"
        )
    bases = []
    for j in range(N):
        u = np.zeros((d, k))
        for c in range(k):
            u[j * k + c, c] = 1.0
        bases.append(u)
    return SubspaceCollection(tuple(bases), label=f"orthogonal(d={d},k={k},N={N})")


def angle_family(k: int, N: int, theta: float) -> SubspaceCollection:
    """Collection with analytically known coherence sin^2(theta).

    Lives in d = k*(N+1) dimensions: subspace j is spanned by
    cos(theta) * E_j + sin(theta) * F, where E_j is the j-th coordinate block
    and F the shared (N+1)-th block. Every cross product U_i^T U_j equals
    sin^2(theta) * I_k, so theta sweeps coherence from 0 to 1.
    """
    if not 0.0 <= theta <= math.pi / 2 + 1e-15:
        raise InvalidAngleError(f"theta={theta} outside [0, pi/2]")
    if N < 1 or k < 1:
        raise InvalidDimsError("need N >= 1 and k >= 1")
    d = k * (N + 1)
    c, s = math.cos(theta), math.sin(theta)
    bases = []
    for j in range(N):
        u = np.zeros((d, k))
        for col in range(k):
            u[j * k + col, col] = c
            u[N * k + col, col] = s
        bases.append(u)
    return SubspaceCollection(tuple(bases), label=f"angle(k={k},N={N},theta={theta})")


def _pair_singular_values(collection: SubspaceCollection, i: int, j: int) -> np.ndarray:
    """Singular values of U_i^T U_j, clamped to [0, 1], descending."""
    g = collection.bases[i].T @ collection.bases[j]
    sv = np.linalg.svd(g, compute_uv=False)
    return np.clip(sv, 0.0, 1.0)


def _check_pair(collection: SubspaceCollection, i: int, j: int):
    n = collection.size
    for idx in (i, j):
        if not 0 <= idx < n:
            raise IndexOutOfRangeError(f"index {idx} outside [0, {n})")
    if i == j:
        raise SameIndexError(f"need two distinct subspaces, got ({i}, {j})")


def coherence(collection: SubspaceCollection) -> CoherenceReport:
    """Largest pairwise overlap max_{i != j} sigma_max(U_i^T U_j).

    Equals the operator norm of P_i P_j for the worst pair; 0 means all
    subspaces are mutually orthogonal, 1 means two of them intersect.
    """
    n = collection.size
    if n < 2:
        raise SingleSubspaceError("coherence needs at least two subspaces")
    sigma = np.full((n, n), np.nan)
    best = -1.0
    argmax = (0, 1)
    for i in range(n):
        for j in range(i + 1, n):
            s = float(_pair_singular_values(collection, i, j)[0])
            sigma[i, j] = sigma[j, i] = s
            if s > best:
                best = s
                argmax = (i, j)
    sigma.flags.writeable = False
    return CoherenceReport(
        lambda_=best,
        argmax_pair=argmax,
        pairwise_sigma=sigma,
        min_principal_angle=float(np.arccos(best)),
    )


def principal_angles(collection: SubspaceCollection, i: int, j: int) -> np.ndarray:
    """Canonical angles between subspaces i and j, ascending, in radians."""
    _check_pair(collection, i, j)
    sv = _pair_singular_values(collection, i, j)
    # sv is descending, arccos is decreasing, so the angles come out ascending
    return np.arccos(sv)


def spectral_distance(collection: SubspaceCollection, i: int, j: int) -> float:
    """Sine of the smallest principal angle between subspaces i and j."""
    _check_pair(collection, i, j)
    smax = float(_pair_singular_values(collection, i, j)[0])
    return math.sqrt(max(0.0, 1.0 - smax * smax))


def packing_diameter(collection: SubspaceCollection) -> float:
    """Smallest pairwise spectral distance; sqrt(1 - coherence^2)."""
    n = collection.size
    if n < 2:
        raise SingleSubspaceError("packing diameter needs at least two subspaces")
    return min(
        spectral_distance(collection, i, j)
        for i in range(n)
        for j in range(i + 1, n)
    )


def fusion_frame_bounds(collection: SubspaceCollection, weights) -> FrameBounds:
    """Extreme eigenvalues of S = sum_j v_j^2 U_j U_j^T.

    The collection is a fusion frame with the given weights exactly when the
    lower bound is positive.
    """
    w = np.asarray(weights, dtype=float)
    if w.shape != (collection.size,):
        raise ShapeMismatchError(
            f"need {collection.size} weights, got shape {w.shape}"
        )
    if np.any(w <= 0):
        raise NonpositiveWeightError("weights must be strictly positive")
    d = collection.ambient_dim
    s = np.zeros((d, d))
    for v, u in zip(w, collection.bases):
        s += (v * v) * (u @ u.T)
    eig = np.linalg.eigvalsh(s)
    return FrameBounds(
        lower=float(max(eig[0], 0.0)),
        upper=float(eig[-1]),
        weights=tuple(float(v) for v in w),
    )


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def collection_to_dict(collection: SubspaceCollection) -> dict:
    """JSON-ready dict; requires all subspaces to share one dimension k."""
    dims = set(collection.block_dims)
    if len(dims) != 1:
        raise InvalidDimsError("only equal-dimension collections serialize to JSON")
    return {
        "version": 1,
        "d": collection.ambient_dim,
        "k": collection.block_dim,
        "N": collection.size,
        "bases": [u.ravel().tolist() for u in collection.bases],
        "label": collection.label,
    }


def collection_from_dict(doc: dict) -> SubspaceCollection:
    """Rebuild a collection from its JSON dict, re-validating orthonormality."""
    for key in ("version", "d", "k", "N", "bases"):
        if key not in doc:
            raise SchemaError(key, "missing field")
    if doc["version"] != 1:
        raise SchemaError("version", f"unsupported version {doc['version']!r}")
    d, k, n = doc["d"], doc["k"], doc["N"]
    for name, v in (("d", d), ("k", k), ("N", n)):
        if not isinstance(v, int) or v < 1:
            raise SchemaError(name, "must be a positive integer")
    raw = doc["bases"]
    if not isinstance(raw, list) or len(raw) != n:
        raise SchemaError("bases", f"expected {n} bases")
    bases = []
    for j, flat in enumerate(raw):
        arr = np.asarray(flat, dtype=float)
        if arr.shape != (d * k,):
            raise SchemaError("bases", f"basis {j} has {arr.size} entries, expected {d * k}")
        bases.append(arr.reshape(d, k))
    return SubspaceCollection(tuple(bases), label=str(doc.get("label", "")))


def save_collection(collection: SubspaceCollection, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(collection_to_dict(collection), fh)


def load_collection(path) -> SubspaceCollection:
    with open(path, "r", encoding="utf-8") as fh:
        return collection_from_dict(json.load(fh))
