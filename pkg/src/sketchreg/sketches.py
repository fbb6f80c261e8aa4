"""Random compressions S (k x n) and their fast application to data.

Supported kinds:

* ``gaussian``: iid N(0, 1/k) entries, O(ndk).
* ``hadamard``: S = Phi H D / sqrt(k) with a Sylvester Hadamard matrix H of
  order n' = next power of two (data zero-padded), random signs D and k rows
  of H sampled with replacement by Phi. Applied with the fast Walsh-Hadamard
  transform in O(n' d log n').
* ``clarkson_woodruff``: one random +-1 per column of S, applied as a single
  streaming pass over the rows of A in O(nd).
* ``uniform`` / ``leverage_aware``: with-replacement row sampling with
  probabilities pi, rows rescaled by 1/sqrt(k pi_j) (Hansen-Hurwitz).

Each kind consumes its random stream in a fixed order, shared by the fast
path and by :func:`materialize_sketch`, so ``apply_sketch(A, spec)`` equals
``materialize_sketch(spec, n) @ A`` for the same seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, leverage_scores
from .errors import DataError
from .rng import generator

KINDS = ("gaussian", "hadamard", "clarkson_woodruff", "uniform", "leverage_aware")
ALIASES = {
    "cw": "clarkson_woodruff",
    "countsketch": "clarkson_woodruff",
    "srht": "hadamard",
    "leverage": "leverage_aware",
}
OBLIVIOUS = ("gaussian", "hadamard", "clarkson_woodruff")

# Rows of A are streamed in blocks of this size; the block size is part of the
# random-stream layout and must not change between apply and materialize.
BLOCK = 8192
MATERIALIZE_LIMIT = 10**7
WEIGHT_TOL = 1e-8


def canonical_kind(kind: str) -> str:
    kind = ALIASES.get(kind, kind)
    if kind not in KINDS:
        raise ValueError(f"unknown sketch kind {kind!r}; choose from {', '.join(KINDS)}")
    return kind


@dataclass(frozen=True)
class SketchSpec:
    """Sketch family, target size and seed. Fully determines S for a given n."""

    kind: str
    k: int
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", canonical_kind(self.kind))
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"sketch size k must be a positive integer, got {self.k!r}")
        object.__setattr__(self, "k", int(self.k))
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "seed", int(self.seed))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "k": self.k, "seed": self.seed}


@dataclass(frozen=True, eq=False)
class SketchedData:
    """Sketched response and design plus a link back to the spec and source."""

    y_tilde: np.ndarray
    x_tilde: np.ndarray
    spec: SketchSpec
    source_fingerprint: str
    n: int

    def __post_init__(self):
        k = self.spec.k
        if self.y_tilde.shape != (k,) or self.x_tilde.ndim != 2 or self.x_tilde.shape[0] != k:
            raise DataError(
                f"sketched shapes {self.y_tilde.shape}, {self.x_tilde.shape} do not match k={k}"
            )

    @property
    def k(self) -> int:
        return self.spec.k

    @property
    def p(self) -> int:
        return self.x_tilde.shape[1]

    @property
    def A_tilde(self) -> np.ndarray:
        return np.column_stack([self.y_tilde, self.x_tilde])


def next_pow2(n: int) -> int:
    return 1 << max(n - 1, 0).bit_length()


def _as_matrix(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    if A.ndim != 2 or A.shape[0] < 1:
        raise DataError(f"expected a non-empty 2-d array, got shape {A.shape}")
    return A


def _check_kind(spec: SketchSpec, *kinds: str) -> None:
    if spec.kind not in kinds:
        raise ValueError(f"spec.kind is {spec.kind!r}, expected one of {kinds}")


def _blocks(n: int):
    for start in range(0, n, BLOCK):
        yield start, min(start + BLOCK, n)


# -- Walsh-Hadamard --------------------------------------------------------


def fwht(v) -> np.ndarray:
    """Unnormalized fast Walsh-Hadamard transform along axis 0.

    Returns H @ v for the Sylvester Hadamard matrix of order len(v), which
    must be a power of two. Works on vectors and on matrices column-wise.
    """
    x = np.array(v, dtype=float)
    n = x.shape[0]
    if n < 1 or n & (n - 1):
        raise ValueError(f"length must be a power of two, got {n}")
    shape = x.shape
    x = x.reshape(n, -1)
    m = x.shape[1]
    h = 1
    while h < n:
        y = x.reshape(n // (2 * h), 2, h, m)
        top = y[:, 0].copy()
        y[:, 0] += y[:, 1]
        y[:, 1] *= -1.0
        y[:, 1] += top
        h *= 2
    return x.reshape(shape)


def hadamard_rows(rows, order: int) -> np.ndarray:
    """Selected rows of the Sylvester Hadamard matrix, H_ij = (-1)^popcount(i & j)."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.arange(order, dtype=np.int64)
    bits = rows[:, None] & cols[None, :]
    parity = np.zeros(bits.shape, dtype=np.int64)
    while np.any(bits):
        parity ^= bits & 1
        bits >>= 1
    return 1.0 - 2.0 * parity


# -- random stream layouts -------------------------------------------------


def _gaussian_columns(rng, n, k):
    """Yield (start, stop, S[:, start:stop].T * sqrt(k)) block by block."""
    for start, stop in _blocks(n):
        yield start, stop, rng.standard_normal((stop - start, k))


def _hadamard_draws(rng, n, k):
    n2 = next_pow2(n)
    signs = 2.0 * rng.integers(0, 2, size=n2) - 1.0
    rows = rng.integers(0, n2, size=k)
    return n2, signs, rows


def _cw_hash(rng, n, k):
    """Yield (start, stop, bucket, sign) blocks; row i goes to bucket[i] with sign[i]."""
    for start, stop in _blocks(n):
        b = stop - start
        z = rng.integers(0, k, size=b)
        r = 2.0 * rng.integers(0, 2, size=b) - 1.0
        yield start, stop, z, r


def _subsample_draws(rng, spec: SketchSpec, n: int, weights: np.ndarray | None):
    if spec.kind == "uniform":
        rows = rng.integers(0, n, size=spec.k)
        scale = np.full(spec.k, math.sqrt(n / spec.k))
    else:
        rows = rng.choice(n, size=spec.k, p=weights)
        scale = 1.0 / np.sqrt(spec.k * weights[rows])
    return rows, scale


def check_weights(weights, n: int) -> np.ndarray:
    """Validate sampling probabilities: length n, strictly positive, summing to 1."""
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.shape != (n,):
        raise DataError(f"weights must have length {n}, got {w.shape[0]}")
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise DataError("sampling weights must be strictly positive")
    total = float(np.sum(w))
    if abs(total - 1.0) > WEIGHT_TOL:
        raise DataError(f"sampling weights must sum to 1 (got {total:.10g})")
    return w / total


def leverage_weights(A) -> np.ndarray:
    """Leverage scores of A divided by their sum (the rank)."""
    lev = leverage_scores(A, "A")
    return lev / lev.sum()


# -- application -----------------------------------------------------------


def apply_gaussian(A, spec: SketchSpec) -> np.ndarray:
    _check_kind(spec, "gaussian")
    A = _as_matrix(A)
    n, d = A.shape
    out = np.zeros((spec.k, d))
    for start, stop, st in _gaussian_columns(generator(spec.seed), n, spec.k):
        out += st.T @ A[start:stop]
    return out / math.sqrt(spec.k)


def apply_hadamard(A, spec: SketchSpec) -> np.ndarray:
    _check_kind(spec, "hadamard")
    A = _as_matrix(A)
    n, d = A.shape
    n2, signs, rows = _hadamard_draws(generator(spec.seed), n, spec.k)
    padded = np.zeros((n2, d))
    padded[:n] = A * signs[:n, None]
    return fwht(padded)[rows] / math.sqrt(spec.k)


def apply_clarkson_woodruff(A, spec: SketchSpec) -> np.ndarray:
    _check_kind(spec, "clarkson_woodruff")
    A = _as_matrix(A)
    n, d = A.shape
    k = spec.k
    out = np.zeros((k, d))
    for start, stop, z, r in _cw_hash(generator(spec.seed), n, k):
        signed = A[start:stop] * r[:, None]
        for j in range(d):
            out[:, j] += np.bincount(z, weights=signed[:, j], minlength=k)
    return out


def apply_subsample(A, spec: SketchSpec, weights=None) -> np.ndarray:
    """Hansen-Hurwitz row sampling; ``weights`` only matter for leverage_aware."""
    _check_kind(spec, "uniform", "leverage_aware")
    A = _as_matrix(A)
    n = A.shape[0]
    w = _resolve_weights(spec, A, n, weights)
    rows, scale = _subsample_draws(generator(spec.seed), spec, n, w)
    return A[rows] * scale[:, None]


def _resolve_weights(spec, A, n, weights):
    if spec.kind == "uniform":
        if weights is not None:
            w = check_weights(weights, n)
            if not np.allclose(w, 1.0 / n, rtol=0, atol=WEIGHT_TOL):
                raise DataError("uniform sketch uses weights 1/n; pass kind='leverage_aware' for others")
        return None
    if weights is None:
        if A is None:
            raise DataError("leverage_aware sketch needs explicit weights when A is not given")
        return leverage_weights(A)
    return check_weights(weights, n)


def apply_sketch(A, spec: SketchSpec, weights=None) -> np.ndarray:
    """Compute S @ A for any sketch kind."""
    if spec.kind == "gaussian":
        return apply_gaussian(A, spec)
    if spec.kind == "hadamard":
        return apply_hadamard(A, spec)
    if spec.kind == "clarkson_woodruff":
        return apply_clarkson_woodruff(A, spec)
    return apply_subsample(A, spec, weights)


def sketch_dataset(data: Dataset, spec: SketchSpec, weights=None) -> SketchedData:
    """Sketch A = [y, X] in one pass and split the result."""
    At = apply_sketch(data.A, spec, weights)
    return SketchedData(
        y_tilde=At[:, 0].copy(),
        x_tilde=At[:, 1:].copy(),
        spec=spec,
        source_fingerprint=data.fingerprint,
        n=data.n,
    )


def materialize_sketch(spec: SketchSpec, n: int, weights=None) -> np.ndarray:
    """Dense S with apply_sketch(A, spec) == S @ A (zero-padded A for hadamard).

    For ``hadamard`` the result has next_pow2(n) columns. ``leverage_aware``
    needs explicit ``weights`` since the data are not available here.
    """
    k = spec.k
    width = next_pow2(n) if spec.kind == "hadamard" else n
    if k * width > MATERIALIZE_LIMIT:
        raise DataError(f"dense sketch {k}x{width} exceeds the {MATERIALIZE_LIMIT} entry limit")
    rng = generator(spec.seed)
    if spec.kind == "gaussian":
        st = np.vstack([blk for _, _, blk in _gaussian_columns(rng, n, k)])
        return st.T / math.sqrt(k)
    if spec.kind == "hadamard":
        n2, signs, rows = _hadamard_draws(rng, n, k)
        return hadamard_rows(rows, n2) * signs[None, :] / math.sqrt(k)
    S = np.zeros((k, width))
    if spec.kind == "clarkson_woodruff":
        for start, stop, z, r in _cw_hash(rng, n, k):
            S[z, np.arange(start, stop)] = r
        return S
    w = _resolve_weights(spec, None, n, weights)
    rows, scale = _subsample_draws(rng, spec, n, w)
    S[np.arange(k), rows] = scale
    return S


# -- sketch size guidance --------------------------------------------------


def recommend_sketch_size(kind: str, d: int, n: int, epsilon: float, delta: float) -> int:
    """Order-of-magnitude k for an epsilon-subspace embedding w.p. 1 - delta.

    Uses the standard complexity orders with every constant set to one, so the
    result is advisory only.
    """
    kind = canonical_kind(kind)
    if not 0 < epsilon <= 1 or not 0 < delta < 1:
        raise ValueError("need epsilon in (0, 1] and delta in (0, 1)")
    if d < 1 or n < 1:
        raise ValueError("d and n must be positive")
    if kind == "gaussian":
        k = (d + math.log(1 / delta)) / epsilon**2
    elif kind == "hadamard":
        k = (math.sqrt(d) + math.sqrt(math.log(n))) ** 2 * math.log(d / delta) / epsilon**2
    elif kind == "clarkson_woodruff":
        k = d**2 / (delta * epsilon**2)
    else:
        raise ValueError(f"no sketch-size rule for data-aware kind {kind!r}")
    # round() strips representation noise such as 4000.0000000000005
    return max(1, math.ceil(round(k, 9)))


def sketch_size_table(d: int, n: int, epsilon: float, delta: float) -> dict:
    return {
        "advisory": "advisory - unit constants",
        "epsilon": epsilon,
        "delta": delta,
        "k": {kind: recommend_sketch_size(kind, d, n, epsilon, delta) for kind in OBLIVIOUS},
    }
