"""Measurement ensembles, binary signals and noisy observations.

Designs are stored row-compressed (CSR arrays ``indptr``, ``indices``,
``values``) for every ensemble, dense included, so that one code path
serves all of them. Every draw is a pure function of its seed.
"""

import dataclasses
import struct
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from ._random import generator
from ._validation import check_int, check_real
from .exceptions import ParameterError, UsageError

ENSEMBLES = ("dense", "sparse", "sparsified")


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """Row-compressed random measurement matrix.

    Parameters
    ----------
    n, p : int
        Row and column counts.
    indptr, indices, values : ndarray
        CSR storage. Row ``i`` holds ``indices[indptr[i]:indptr[i+1]]``
        (strictly increasing) and the matching ``values``.
    ensemble : {'dense', 'sparse', 'sparsified'}
    d : int
        Density parameter; each entry is kept with probability ``d / p``.
        Equal to ``p`` for dense designs.
    gen_seed : int
        Seed the matrix was generated from.
    """

    n: int
    p: int
    indptr: np.ndarray = field(repr=False)
    indices: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    ensemble: str = "dense"
    d: int = 0
    gen_seed: int = 0

    def __post_init__(self):
        if self.ensemble not in ENSEMBLES:
            raise ParameterError("unknown ensemble %r" % (self.ensemble,))
        for name in ("indptr", "indices", "values"):
            arr = getattr(self, name)
            arr.setflags(write=False)
        if self.indptr.shape != (self.n + 1,):
            raise ParameterError("indptr must have length n + 1")

    @classmethod
    def from_dense(cls, array, ensemble="dense", d=None, gen_seed=0):
        """Compress a dense array, dropping exact zeros unless ``ensemble='dense'``."""
        array = np.asarray(array, dtype=np.float64)
        if array.ndim != 2:
            raise ParameterError("design must be two-dimensional")
        n, p = array.shape
        if ensemble == "dense":
            keep = np.ones(array.shape, dtype=bool)
        else:
            keep = array != 0.0
        return cls._from_mask(array, keep, ensemble, p if d is None else d, gen_seed)

    @classmethod
    def _from_mask(cls, array, keep, ensemble, d, gen_seed):
        n, p = array.shape
        counts = keep.sum(axis=1)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        rows, cols = np.nonzero(keep)
        return cls(n=n, p=p, indptr=indptr, indices=cols.astype(np.int64),
                   values=array[rows, cols].astype(np.float64),
                   ensemble=ensemble, d=int(d), gen_seed=int(gen_seed))

    @property
    def shape(self):
        return (self.n, self.p)

    @property
    def nnz(self):
        return int(self.indptr[-1])

    def row_counts(self):
        return np.diff(self.indptr)

    def row(self, i):
        """``(indices, values)`` stored for row ``i``."""
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.values[lo:hi]

    @property
    def rows(self):
        return [self.row(i) for i in range(self.n)]

    def toarray(self):
        out = np.zeros((self.n, self.p), dtype=np.float64)
        rows = np.repeat(np.arange(self.n), self.row_counts())
        out[rows, self.indices] = self.values
        return out

    def __array__(self, dtype=None, copy=None):
        out = self.toarray()
        return out if dtype is None else out.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, DesignMatrix):
            return NotImplemented
        return (self.shape == other.shape and self.ensemble == other.ensemble
                and self.d == other.d and self.gen_seed == other.gen_seed
                and np.array_equal(self.indptr, other.indptr)
                and np.array_equal(self.indices, other.indices)
                and np.array_equal(self.values, other.values))

    __hash__ = None


@dataclass(frozen=True)
class SupportSet:
    """Strictly increasing index set inside ``range(p)``."""

    indices: Tuple[int, ...]
    p: int

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        object.__setattr__(self, "indices", idx)
        check_int(self.p, "p", minimum=0)
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ParameterError("support indices must be strictly increasing: %r" % (idx,))
        if idx and (idx[0] < 0 or idx[-1] >= self.p):
            raise ParameterError("support indices must lie in [0, %d)" % self.p)

    @classmethod
    def from_iterable(cls, indices, p):
        idx = [int(i) for i in indices]
        if len(set(idx)) != len(idx):
            raise ParameterError("duplicate support indices in %r" % (idx,))
        return cls(tuple(sorted(idx)), p)

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, j):
        return j in set(self.indices)

    def indicator(self):
        out = np.zeros(self.p, dtype=np.float64)
        out[list(self.indices)] = 1.0
        return out


@dataclass(frozen=True, eq=False)
class Sparsified:
    mask: np.ndarray = field(repr=False)
    x_tilde: DesignMatrix = field(repr=False)
    y_tilde: np.ndarray = field(repr=False)
    d: int = 0


@dataclass(frozen=True, eq=False)
class Instance:
    """A planted support together with its design and observations."""

    design: DesignMatrix
    beta_support: SupportSet
    sigma: float
    y: np.ndarray = field(repr=False)
    sparsified: Optional[Sparsified] = None

    def __post_init__(self):
        self.y.setflags(write=False)
        if self.y.shape != (self.design.n,):
            raise ParameterError("y must have length n = %d" % self.design.n)
        if self.beta_support.p != self.design.p:
            raise ParameterError("support and design disagree on p")


def support_row_sums(X, indices):
    """Row sums of ``X`` restricted to ``indices``.

    Each row's selected entries are sorted before summation, so the result
    depends only on the multiset of values. Two supports picking identical
    columns therefore produce bit-identical sums.
    """
    X = np.asarray(X)
    idx = np.asarray(list(indices), dtype=np.intp)
    if idx.size == 0:
        return np.zeros(X.shape[0], dtype=np.float64)
    cols = np.sort(X[:, idx], axis=1)
    return cols.sum(axis=1)


def sample_design(n, p, ensemble="sparse", d=None, seed=0):
    """Draw a dense or sparse Gaussian design.

    The sparse ensemble multiplies i.i.d. Bernoulli(d/p) masks with
    independent standard normals; the dense ensemble keeps every entry.
    """
    n = check_int(n, "n", minimum=1)
    p = check_int(p, "p", minimum=1)
    if ensemble not in ("dense", "sparse"):
        raise ParameterError("sample_design draws 'dense' or 'sparse', got %r" % (ensemble,))
    if d is None:
        d = p
    d = check_int(d, "d")
    if d < 0 or d > p:
        raise ParameterError("d must satisfy 0 <= d <= p, got d=%d, p=%d" % (d, p))
    rng = generator(seed)
    if ensemble == "dense":
        values = rng.standard_normal((n, p))
        keep = np.ones((n, p), dtype=bool)
        d = p
    else:
        keep = rng.random((n, p)) < d / p
        values = rng.standard_normal((n, p))
    return DesignMatrix._from_mask(values, keep, ensemble, d, seed)


def sample_signal(p, s, seed=0):
    """Uniformly random size-``s`` support in ``range(p)``."""
    p = check_int(p, "p", minimum=1)
    s = check_int(s, "s")
    if s < 0 or s > p:
        raise ParameterError("s must satisfy 0 <= s <= p, got s=%d, p=%d" % (s, p))
    rng = generator(seed)
    chosen = rng.permutation(p)[:s]
    return SupportSet(tuple(sorted(int(j) for j in chosen)), p)


def observe(design, support, sigma, seed=0):
    """``y = X 1_S + sigma * Z`` with standard normal ``Z``."""
    if support.p != design.p:
        raise ParameterError("support has p=%d but design has p=%d" % (support.p, design.p))
    sigma = check_real(sigma, "sigma", low=0.0, error=ParameterError)
    signal = support_row_sums(design.toarray(), support.indices)
    noise = generator(seed).standard_normal(design.n)
    return signal + sigma * noise


def make_instance(design, support, sigma, seed=0):
    y = observe(design, support, sigma, seed)
    return Instance(design=design, beta_support=support, sigma=float(sigma), y=y)


def sparsify_and_rescale(instance, d, seed=0):
    """Mask a dense design with Bernoulli(d/p) entries and rescale ``y`` by ``d/p``.

    The original design and observations are kept; the sparsified pair is
    attached as ``instance.sparsified``.
    """
    design = instance.design
    if design.ensemble != "dense":
        raise UsageError("sparsification applies to dense designs, got %r" % design.ensemble)
    d = check_int(d, "d")
    if d < 0 or d > design.p:
        raise ParameterError("d must satisfy 0 <= d <= p, got d=%d, p=%d" % (d, design.p))
    q = d / design.p
    mask = generator(seed).random(design.shape) < q
    x_tilde = DesignMatrix._from_mask(design.toarray(), mask, "sparsified", d, seed)
    y_tilde = q * instance.y
    y_tilde.setflags(write=False)
    mask.setflags(write=False)
    sp = Sparsified(mask=mask, x_tilde=x_tilde, y_tilde=y_tilde, d=d)
    return dataclasses.replace(instance, sparsified=sp)


def sym_diff_size(a, b):
    """``|a Δ b|``."""
    if a.p != b.p:
        raise ParameterError("supports live in different dimensions (%d vs %d)" % (a.p, b.p))
    return len(set(a.indices).symmetric_difference(b.indices))


def in_signal_class(beta, s, lam=1.0):
    """Membership in ``{beta : |supp beta| = s, min_{i in supp} |beta_i| >= lam}``."""
    beta = np.asarray(beta, dtype=np.float64)
    nz = beta[beta != 0.0]
    return nz.size == s and bool(np.all(np.abs(nz) >= lam))


# -- binary snapshot ---------------------------------------------------------

MAGIC = b"SRLB1"
_HEADER = struct.Struct("<5sQQQQdQB")
_ENSEMBLE_CODE = {"dense": 0, "sparse": 1, "sparsified": 2}


def _write_design(fh, design):
    fh.write(struct.pack("<BQQ", _ENSEMBLE_CODE[design.ensemble], design.d, design.gen_seed))
    fh.write(design.row_counts().astype("<u4").tobytes())
    fh.write(design.indices.astype("<u4").tobytes())
    fh.write(design.values.astype("<f8").tobytes())


def _read_exact(fh, size):
    data = fh.read(size)
    if len(data) != size:
        raise ParameterError("truncated snapshot")
    return data


def _read_design(fh, n, p):
    code, d, gen_seed = struct.unpack("<BQQ", _read_exact(fh, 17))
    ensemble = {v: k for k, v in _ENSEMBLE_CODE.items()}[code]
    counts = np.frombuffer(_read_exact(fh, 4 * n), dtype="<u4").astype(np.int64)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    nnz = int(indptr[-1])
    indices = np.frombuffer(_read_exact(fh, 4 * nnz), dtype="<u4").astype(np.int64)
    values = np.frombuffer(_read_exact(fh, 8 * nnz), dtype="<f8").astype(np.float64)
    return DesignMatrix(n=n, p=p, indptr=indptr, indices=indices, values=values,
                        ensemble=ensemble, d=int(d), gen_seed=int(gen_seed))


def dump_instance(instance, path):
    """Write ``instance`` as a little-endian ``SRLB1`` record.

    Layout: header (magic, n, p, s, d, sigma, gen_seed, has_sparsified),
    support indices (u32), y (f64), design rows (per-row counts u32, then
    indices u32, then values f64) and, if present, the sparsified design
    in the same row format followed by ``y_tilde``.
    """
    design = instance.design
    support = instance.beta_support
    sp = instance.sparsified
    d = sp.d if sp is not None else design.d
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, design.n, design.p, len(support), d,
                              float(instance.sigma), design.gen_seed, int(sp is not None)))
        fh.write(np.asarray(support.indices, dtype="<u4").tobytes())
        fh.write(np.asarray(instance.y, dtype="<f8").tobytes())
        _write_design(fh, design)
        if sp is not None:
            _write_design(fh, sp.x_tilde)
            fh.write(np.asarray(sp.y_tilde, dtype="<f8").tobytes())


def load_instance(path):
    with open(path, "rb") as fh:
        magic, n, p, s, d, sigma, _, has_sp = _HEADER.unpack(_read_exact(fh, _HEADER.size))
        if magic != MAGIC:
            raise ParameterError("%s is not an SRLB1 snapshot" % path)
        support = SupportSet(tuple(np.frombuffer(_read_exact(fh, 4 * s), dtype="<u4").tolist()), p)
        y = np.frombuffer(_read_exact(fh, 8 * n), dtype="<f8").astype(np.float64)
        design = _read_design(fh, n, p)
        sparsified = None
        if has_sp:
            x_tilde = _read_design(fh, n, p)
            y_tilde = np.frombuffer(_read_exact(fh, 8 * n), dtype="<f8").astype(np.float64)
            mask = np.zeros((n, p), dtype=bool)
            mask[np.repeat(np.arange(n), x_tilde.row_counts()), x_tilde.indices] = True
            sparsified = Sparsified(mask=mask, x_tilde=x_tilde, y_tilde=y_tilde, d=int(d))
    return Instance(design=design, beta_support=support, sigma=float(sigma), y=y,
                    sparsified=sparsified)
