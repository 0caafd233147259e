"""Joint spectral embedding: normalized Laplacian, Jacobi eigensolver, JSED."""

import warnings
from dataclasses import dataclass, field

import numpy as np

from spectralmatch.errors import ConvergenceError, InputError, MatchWarning
from spectralmatch.graph import JointGraph

TRIVIAL_EIGENVALUE = 1e-10
MAX_SWEEPS = 50


@dataclass(frozen=True)
class SpectralEmbedding:
    n1: int
    n2: int
    eigenvalues: np.ndarray = field(repr=False)  # (m,), ascending
    coords: np.ndarray = field(repr=False)  # (n1 + n2, m), column k is an eigenvector

    @property
    def m(self) -> int:
        return self.coords.shape[1]

    @property
    def coords_a(self):
        return self.coords[: self.n1]

    @property
    def coords_b(self):
        return self.coords[self.n1:]


def _round_robin(n: int):
    """Rounds of disjoint index pairs covering every (p, q) once per sweep."""
    size = n + (n % 2)
    players = list(range(size))
    rounds = []
    for _ in range(size - 1):
        pairs = [(players[i], players[size - 1 - i]) for i in range(size // 2)]
        pairs = [(min(a, b), max(a, b)) for a, b in pairs if a < n and b < n]
        if pairs:
            p, q = np.array(pairs, dtype=np.intp).T
            rounds.append((p, q))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def canonical_signs(vectors: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Flip columns so the largest-magnitude entry (lowest index on ties) is positive."""
    v = np.array(vectors, dtype=np.float64)
    mags = np.abs(v)
    for k in range(v.shape[1]):
        col = mags[:, k]
        lead = int(np.flatnonzero(col >= col.max() - tol)[0])
        if v[lead, k] < 0:
            v[:, k] = -v[:, k]
    return v


def eig_sym(M, tol: float = 1e-15, max_sweeps: int = MAX_SWEEPS):
    """Eigendecomposition of a real symmetric matrix by cyclic Jacobi rotations.

    Rotations are applied in round-robin order, each round annihilating a set
    of disjoint (p, q) pairs at once. The sweep order is fixed, so results are
    deterministic. Returns ascending eigenvalues and orthonormal eigenvectors
    (columns) with the canonical sign convention.
    """
    A = np.array(M, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InputError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InputError("matrix has non-finite entries")
    if np.max(np.abs(A - A.T), initial=0.0) > 1e-10 * (1.0 + np.max(np.abs(A), initial=0.0)):
        raise InputError("matrix is not symmetric")
    A = 0.5 * (A + A.T)
    n = A.shape[0]
    V = np.eye(n)
    scale = np.linalg.norm(A)
    rounds = _round_robin(n)
    off_mask = ~np.eye(n, dtype=bool)

    converged = n < 2 or scale == 0.0
    sweeps = 0
    while not converged:
        if sweeps >= max_sweeps:
            raise ConvergenceError(f"Jacobi eigensolver did not converge in {max_sweeps} sweeps")
        for p, q in rounds:
            apq = A[p, q]
            active = apq != 0.0
            if not active.any():
                continue
            with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
                theta = np.where(active, (A[q, q] - A[p, p]) / (2.0 * np.where(active, apq, 1.0)), 0.0)
                t = np.where(theta >= 0, 1.0, -1.0) / (np.abs(theta) + np.sqrt(1.0 + theta * theta))
            t = np.where(np.isfinite(t) & active, t, 0.0)
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c

            rp, rq = A[p, :].copy(), A[q, :].copy()
            A[p, :] = c[:, None] * rp - s[:, None] * rq
            A[q, :] = s[:, None] * rp + c[:, None] * rq
            cp, cq = A[:, p].copy(), A[:, q].copy()
            A[:, p] = cp * c - cq * s
            A[:, q] = cp * s + cq * c
            A[p, q] = 0.0
            A[q, p] = 0.0
            vp, vq = V[:, p].copy(), V[:, q].copy()
            V[:, p] = vp * c - vq * s
            V[:, q] = vp * s + vq * c
        sweeps += 1
        off = np.sqrt(np.sum(A[off_mask] ** 2))
        converged = off <= tol * scale

    values = np.diag(A).copy()
    order = np.argsort(values, kind="stable")
    return values[order], canonical_signs(V[:, order])


def normalized_laplacian(graph: JointGraph) -> np.ndarray:
    """``I - D^-1/2 W D^-1/2`` for the joint affinity matrix."""
    W = graph.W
    inv_sqrt = 1.0 / np.sqrt(W.sum(axis=1))
    L = np.eye(graph.n) - inv_sqrt[:, None] * W * inv_sqrt[None, :]
    return 0.5 * (L + L.T)


def spectral_embedding(graph: JointGraph, m: int = 8) -> SpectralEmbedding:
    """Coordinates in the ``m`` smallest non-trivial Laplacian eigenvectors."""
    if m < 1 or m > graph.n - 1:
        raise InputError(f"embedding dimension m={m} outside [1, {graph.n - 1}]")
    values, vectors = eig_sym(normalized_laplacian(graph))
    keep = values >= TRIVIAL_EIGENVALUE
    trivial = int((~keep).sum())
    if trivial > 1:
        warnings.warn(
            f"{trivial} near-zero Laplacian eigenvalues; joint graph looks disconnected",
            MatchWarning,
            stacklevel=2,
        )
    values, vectors = values[keep], vectors[:, keep]
    if m > values.size:
        raise InputError(f"embedding dimension m={m} exceeds {values.size} non-trivial eigenpairs")
    return SpectralEmbedding(graph.n1, graph.n2, values[:m], vectors[:, :m])


def jsed(embedding: SpectralEmbedding, i: int, j: int) -> float:
    """Euclidean distance between joint nodes ``i`` and ``j`` in embedding space."""
    n = embedding.coords.shape[0]
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"joint node index out of range [0, {n})")
    diff = embedding.coords[i] - embedding.coords[j]
    return float(np.sqrt(np.sum(diff * diff)))


def cross_jsed(embedding: SpectralEmbedding) -> np.ndarray:
    """(n1, n2) matrix of JSED between every image-1 and image-2 node."""
    diff = embedding.coords_a[:, None, :] - embedding.coords_b[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def format_spectrum(embedding: SpectralEmbedding, label: str = "") -> str:
    """Decimal dump, one block per eigenpair: header line then one coordinate per node."""
    out = []
    if label:
        out.append(f"# {label}")
    out.append(f"# n1={embedding.n1} n2={embedding.n2} m={embedding.m}")
    for k in range(embedding.m):
        out.append(f"eigenpair {k + 1} {float(embedding.eigenvalues[k])!r}")
        out.extend(repr(float(v)) for v in embedding.coords[:, k])
        out.append("")
    return "\n".join(out)
