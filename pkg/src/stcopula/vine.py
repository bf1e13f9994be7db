"""D-vine copulas: sequential estimation, density and (conditional) sampling.

Variables are arranged along a path given by ``order``.  Tree ``j`` (1-based)
holds ``m - j`` pair copulas; edge ``i`` of tree ``j`` couples the variables
in path positions ``i`` and ``i + j`` conditionally on the positions strictly
between them.  Each pair copula takes the lower path position as its first
argument.

Internally two arrays of conditional distribution values are propagated
from tree to tree::

    fwd[j][i] = F(x_i     | x_{i+1}, ..., x_{i+j-1})
    bwd[j][i] = F(x_{i+j} | x_{i+1}, ..., x_{i+j-1})

and edge ``(j, i)`` is evaluated at ``(fwd[j][i], bwd[j][i])``.
"""
import json
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DomainError, FitError
from .pair import ALL_CANDIDATES, EPS, PairCopula, clamp, h_function, h_inverse, log_density, select_pair_family


@dataclass(frozen=True)
class DVineModel:
    """Fitted D-vine.

    ``pairs[j - 1][i]`` is the copula of tree ``j``, edge ``i``.
    """

    order: tuple
    pairs: tuple
    loglik: float = float("nan")
    edge_logliks: tuple = field(default=(), compare=False)

    def __post_init__(self):
        m = len(self.order)
        if sorted(self.order) != list(range(m)):
            raise DomainError(f"order {self.order} is not a permutation of 0..{m - 1}")
        if len(self.pairs) != m - 1:
            raise DomainError(f"a D-vine on {m} variables has {m - 1} trees, got {len(self.pairs)}")
        for j, tree in enumerate(self.pairs, start=1):
            if len(tree) != m - j:
                raise DomainError(f"tree {j} must have {m - j} edges, got {len(tree)}")

    @property
    def dim(self):
        return len(self.order)

    def pair(self, tree, edge):
        return self.pairs[tree - 1][edge]

    def families(self):
        return [[c.family for c in tree] for tree in self.pairs]

    def to_dict(self):
        return {
            "order": list(self.order),
            "loglik": self.loglik,
            "trees": [[c.to_dict() for c in tree] for tree in self.pairs],
        }

    @classmethod
    def from_dict(cls, d):
        pairs = tuple(tuple(PairCopula.from_dict(c) for c in tree) for tree in d["trees"])
        return cls(tuple(d["order"]), pairs, float(d.get("loglik", float("nan"))))

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def loads(cls, text):
        return cls.from_dict(json.loads(text))


def _edge_name(model_order, j, i):
    a, b = model_order[i], model_order[i + j]
    cond = [model_order[k] for k in range(i + 1, i + j)]
    return f"{a},{b}|{','.join(map(str, cond))}" if cond else f"{a},{b}"


def fit_dvine(u, order=None, candidates=ALL_CANDIDATES):
    """Sequential (tree-by-tree) maximum likelihood fit of a D-vine.

    Parameters
    ----------
    u : ndarray, shape (n, m)
        Pseudo-observations; column ``v`` holds variable ``v``.
    order : sequence of int, optional
        Path order of the variables; defaults to ``0..m-1``.
    candidates : sequence of str
        Pair-copula families tried on each edge (AIC selection).
    """
    u = np.asarray(u, dtype=float)
    if u.ndim != 2:
        raise FitError("data must be a matrix")
    n, m = u.shape
    order = tuple(range(m)) if order is None else tuple(int(o) for o in order)
    if len(order) != m:
        raise FitError(f"order has {len(order)} entries for {m} columns")
    if n < 100:
        raise FitError(f"a D-vine fit needs at least 100 rows, got {n}")
    x = clamp(u[:, list(order)])
    fwd = [x[:, i] for i in range(m - 1)]
    bwd = [x[:, i + 1] for i in range(m - 1)]
    pairs, edge_ll = [], []
    for j in range(1, m):
        tree, tree_ll = [], []
        for i in range(m - j):
            for arr in (fwd[i], bwd[i]):
                if np.ptp(arr) < 1e-10:
                    raise FitError(f"degenerate pseudo-observations on edge {_edge_name(order, j, i)}")
            fit = select_pair_family(fwd[i], bwd[i], candidates)
            tree.append(fit.copula)
            tree_ll.append(fit.loglik)
        pairs.append(tuple(tree))
        edge_ll.append(tuple(tree_ll))
        if j < m - 1:
            new_fwd = [clamp(h_function(tree[i], fwd[i], bwd[i])) for i in range(m - j - 1)]
            new_bwd = [clamp(h_function(tree[i + 1], bwd[i + 1], fwd[i + 1])) for i in range(m - j - 1)]
            fwd, bwd = new_fwd, new_bwd
    return DVineModel(order, tuple(pairs), float(sum(map(sum, edge_ll))), tuple(edge_ll))


def dvine_log_density(model, u):
    u = np.atleast_2d(np.asarray(u, dtype=float))
    m = model.dim
    if u.shape[1] != m:
        raise DomainError(f"expected {m} coordinates, got {u.shape[1]}")
    if not np.all((u > 0.0) & (u < 1.0)):
        raise DomainError("pseudo-observations must lie strictly inside (0, 1)")
    x = clamp(u[:, list(model.order)])
    fwd = [x[:, i] for i in range(m - 1)]
    bwd = [x[:, i + 1] for i in range(m - 1)]
    total = np.zeros(u.shape[0])
    for j in range(1, m):
        tree = model.pairs[j - 1]
        for i in range(m - j):
            total += log_density(tree[i], fwd[i], bwd[i])
        if j < m - 1:
            new_fwd = [clamp(h_function(tree[i], fwd[i], bwd[i])) for i in range(m - j - 1)]
            new_bwd = [clamp(h_function(tree[i + 1], bwd[i + 1], fwd[i + 1])) for i in range(m - j - 1)]
            fwd, bwd = new_fwd, new_bwd
    return total


def dvine_density(model, u):
    """Vine density at one point (1-d input) or at each row of a matrix."""
    out = np.exp(dvine_log_density(model, u))
    return out[0] if np.ndim(u) == 1 else out


def _cascade(model, w, prefix):
    """Inverse-h cascade in path order.

    ``w`` holds uniforms for the free positions; ``prefix`` (possibly empty)
    pins the first ``len(prefix)`` positions.  Returns the path-ordered
    sample matrix.
    """
    n = w.shape[0]
    m = model.dim
    k0 = len(prefix)
    x = np.empty((n, m))
    fwd = {}  # (j, i) -> F(x_i | x_{i+1..i+j-1})
    for k in range(m):
        bwd = {}
        if k < k0:
            b = np.full(n, prefix[k])
            bwd[1] = b
            for j in range(1, k + 1):
                b = clamp(h_function(model.pair(j, k - j), b, fwd[(j, k - j)]))
                bwd[j + 1] = b
        else:
            b = w[:, k - k0]
            bwd[1] = b
            for j in range(k, 0, -1):
                b = h_inverse(model.pair(j, k - j), b, fwd[(j, k - j)])
                bwd[j] = b
        x[:, k] = bwd[1]
        fwd[(1, k)] = bwd[1]
        if k < m - 1:
            for j in range(1, min(k, m - 2) + 1):
                if k - j <= m - 2 - j:
                    fwd[(j + 1, k - j)] = clamp(
                        h_function(model.pair(j, k - j), fwd[(j, k - j)], bwd[j])
                    )
    return x


def sample_dvine(model, n, rng):
    """Draw ``n`` vectors; column ``v`` holds variable ``v``."""
    rng = np.random.default_rng(rng)
    w = rng.random((n, model.dim))
    x = _cascade(model, w, ())
    out = np.empty_like(x)
    out[:, list(model.order)] = x
    return out


def conditional_sample_dvine(model, fixed_prefix, n, rng):
    """Sample path positions ``k..m-1`` given the first ``k`` path positions.

    Parameters
    ----------
    fixed_prefix : array_like, shape (k,)
        Pseudo-observations of the variables ``order[0], ..., order[k-1]``.

    Returns
    -------
    ndarray, shape (n, m - k)
        Column ``c`` holds variable ``order[k + c]``.
    """
    prefix = np.asarray(fixed_prefix, dtype=float).ravel()
    k = prefix.size
    m = model.dim
    if not 1 <= k < m:
        raise DomainError(f"prefix length must be in [1, {m - 1}], got {k}")
    if not np.all((prefix > 0.0) & (prefix < 1.0)):
        raise DomainError("prefix must lie strictly inside (0, 1)")
    rng = np.random.default_rng(rng)
    w = rng.random((n, m - k))
    x = _cascade(model, w, tuple(np.clip(prefix, EPS, 1 - EPS)))
    return x[:, k:]
