"""Scattering matrices, vertex disorder, and assembly of the walk unitary.

The walk acts on the directed edges of a graph: the column of a directed edge
(s, t) carries amplitudes to the edges (t, w) leaving t, weighted by the
scattering matrix sitting at t and a random phase attached to t.  Columns of
U therefore only feed edges whose source is the column's target, which is the
support rule every assembly here preserves exactly (entries outside it are
never written, so they are exact zeros, not small ones).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .graphs import ConsistentSubset, Digraph, distances_from, sphere_vertices

DENSE_DIMENSION_CAP = 4096

TWO_PI = 2.0 * math.pi


def rng_stream(seed, *key) -> np.random.Generator:
    """Deterministic generator for (seed, key...); the key tuple is the
    documented (estimator index, realization index) derivation."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key)))


class ScatteringFamily:
    """One unitary matrix per vertex, indexed by the vertex's neighbor order.

    matrices[x] has shape (d_x, d_x); row = position of the outgoing neighbor,
    column = position of the incoming neighbor, both in the ascending neighbor
    list of x.
    """

    unitarity_tol = 1e-12

    def __init__(self, g: Digraph, matrices, kind="custom"):
        if len(matrices) != g.vertex_count:
            raise ValueError("need one scattering matrix per vertex")
        mats = []
        for x, m in enumerate(matrices):
            m = np.asarray(m, dtype=complex)
            d = g.degrees[x]
            if m.shape != (d, d):
                raise ValueError(f"scattering matrix at vertex {x} has shape {m.shape}, expected {(d, d)}")
            defect = np.linalg.norm(m.conj().T @ m - np.eye(d), 2)
            if defect > self.unitarity_tol:
                raise ValueError(f"scattering matrix at vertex {x} is not unitary (defect {defect:.2e})")
            mats.append(m)
        self.graph = g
        self.matrices = mats
        self.kind = kind

    @property
    def is_identity(self):
        return self.kind == "identity"

    def __getitem__(self, x):
        return self.matrices[x]


def make_family(g: Digraph, kind: str, strength=None, seed=None) -> ScatteringFamily:
    """Build a named scattering family on g.

    Kinds:
    - "identity": S(x) = I, the fully localized reference point.
    - "near-identity": S(x) = exp(i t H_x) with H_x a seeded random Hermitian
      of unit operator norm, drawn once per vertex from (seed, x) so the same
      seed gives the same family at every strength; t is scaled so the largest
      Hilbert-Schmidt deviation from the identity is at most `strength`.
    - "haar": independent Haar-distributed unitaries, one per vertex.
    - "grover": (2/d) J - I.
    - "dft": discrete Fourier matrix of size d.
    """
    if kind == "identity":
        return ScatteringFamily(g, [np.eye(d) for d in g.degrees], kind)
    if kind == "near-identity":
        if strength is None or strength < 0:
            raise ValueError("near-identity family needs strength >= 0")
        if seed is None:
            raise ValueError("near-identity family needs a seed")
        hams = []
        for x in range(g.vertex_count):
            d = g.degrees[x]
            rng = rng_stream(seed, x)
            a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
            h = (a + a.conj().T) / 2.0
            h /= np.linalg.norm(h, 2)
            hams.append(h)
        hs_cap = max(np.linalg.norm(h, "fro") for h in hams)
        t = strength / hs_cap
        # ||exp(itH) - I||_HS <= t ||H||_HS, so the sup over vertices is <= strength
        mats = [sla.expm(1j * t * h) for h in hams]
        return ScatteringFamily(g, mats, kind)
    if kind == "haar":
        if seed is None:
            raise ValueError("haar family needs a seed")
        mats = []
        for x in range(g.vertex_count):
            d = g.degrees[x]
            rng = rng_stream(seed, x)
            a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
            q, r = np.linalg.qr(a)
            ph = np.diagonal(r)
            mats.append(q * (ph / np.abs(ph)))
        return ScatteringFamily(g, mats, kind)
    if kind == "grover":
        mats = [2.0 / d * np.ones((d, d)) - np.eye(d) for d in g.degrees]
        return ScatteringFamily(g, mats, kind)
    if kind == "dft":
        mats = []
        for d in g.degrees:
            j = np.arange(d)
            mats.append(np.exp(2j * np.pi * np.outer(j, j) / d) / math.sqrt(d))
        return ScatteringFamily(g, mats, kind)
    raise ValueError(f"unknown scattering family kind {kind!r}")


def scattering_distance(fam_a: ScatteringFamily, fam_b: ScatteringFamily) -> float:
    """sup over vertices of the Hilbert-Schmidt deviation ||S(x) - S'(x)||_HS.

    This dominates the operator norm of the difference of the two walk
    unitaries (which equals the sup of the per-vertex operator-norm
    deviations), so it is the deviation gauge used by every smallness
    hypothesis here.
    """
    if fam_a.graph is not fam_b.graph and fam_a.graph.edges != fam_b.graph.edges:
        raise ValueError("families live on different graphs")
    return max(np.linalg.norm(a - b, "fro") for a, b in zip(fam_a.matrices, fam_b.matrices))


class DisorderSpec:
    """Distribution of the i.i.d. per-vertex phases.

    kind = "uniform" (flat on [0, 2pi)), "point-mass" (all mass at theta0), or
    "table" (piecewise-constant density on equal-width bins of [0, 2pi); the
    bin values must be nonnegative and integrate to 1).
    """

    def __init__(self, kind="uniform", theta0=None, values=None):
        self.kind = kind
        self.theta0 = None
        self.values = None
        if kind == "uniform":
            pass
        elif kind == "point-mass":
            if theta0 is None:
                raise ValueError("point-mass disorder needs theta0")
            self.theta0 = float(theta0) % TWO_PI
        elif kind == "table":
            v = np.asarray(values, dtype=float)
            if v.ndim != 1 or v.size == 0:
                raise ValueError("density table must be a nonempty vector")
            if (v < 0).any():
                raise ValueError("density table has negative entries")
            total = v.sum() * (TWO_PI / v.size)
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"density table integrates to {total!r}, not 1")
            self.values = v
        else:
            raise ValueError(f"unknown disorder kind {kind!r}")

    @property
    def sup_density(self):
        """Essential sup of the phase density; infinite for a point mass."""
        if self.kind == "uniform":
            return 1.0 / TWO_PI
        if self.kind == "point-mass":
            return math.inf
        return float(self.values.max())

    def density(self, theta):
        """Density evaluated pointwise (vectorized); point mass has none."""
        if self.kind == "uniform":
            return np.full_like(np.asarray(theta, dtype=float), 1.0 / TWO_PI)
        if self.kind == "table":
            th = np.asarray(theta, dtype=float) % TWO_PI
            bins = np.minimum((th / TWO_PI * self.values.size).astype(int), self.values.size - 1)
            return self.values[bins]
        raise ValueError("point-mass disorder has no density")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "uniform":
            return rng.uniform(0.0, TWO_PI, size)
        if self.kind == "point-mass":
            return np.full(size, self.theta0)
        m = self.values.size
        probs = self.values * (TWO_PI / m)
        probs = probs / probs.sum()
        cum = np.cumsum(probs)
        bins = np.searchsorted(cum, rng.random(size), side="right")
        bins = np.minimum(bins, m - 1)
        return (bins + rng.random(size)) * (TWO_PI / m)


def sample_disorder(g: Digraph, spec: DisorderSpec, seed, index) -> np.ndarray:
    """One per-vertex phase vector, reproducible from (seed, index); index may
    be an int or a tuple (estimator index, realization index)."""
    key = index if isinstance(index, tuple) else (index,)
    rng = rng_stream(seed, *key)
    return spec.sample(rng, g.vertex_count)


@dataclass
class WalkOperator:
    """Dense walk unitary on an edge basis, with enough metadata to trace it.

    `edges` is the ordered basis; for the full walk it is graph.edges, for a
    restriction it is the member list of the consistent subset.
    """

    matrix: np.ndarray
    graph: Digraph
    edges: tuple
    family_kind: str
    omega: np.ndarray
    label: str = "full"
    edge_index: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.edge_index:
            self.edge_index = {e: i for i, e in enumerate(self.edges)}

    @property
    def dimension(self):
        return self.matrix.shape[0]

    def index(self, edge):
        return self.edge_index[tuple(edge)]

    def basis_vector(self, edge):
        v = np.zeros(self.dimension, dtype=complex)
        v[self.index(edge)] = 1.0
        return v

    def dump(self, fh):
        """Text dump of the nonzero entries, one 'row_edge col_edge re im' line each."""
        mat = self.matrix
        rows, cols = np.nonzero(mat)
        for r, c in zip(rows.tolist(), cols.tolist()):
            re_, im_ = mat[r, c].real, mat[r, c].imag
            fh.write(f"{_fmt_edge(self.edges[r])} {_fmt_edge(self.edges[c])} {re_:.17g} {im_:.17g}\n")


def _fmt_edge(e):
    return f"{e[0]}->{e[1]}"


def _check_cap(dim):
    if dim > DENSE_DIMENSION_CAP:
        raise ValueError(f"edge basis dimension {dim} exceeds the dense cap {DENSE_DIMENSION_CAP}")


def build_unitary(g: Digraph, family: ScatteringFamily, omega) -> WalkOperator:
    """Assemble the disordered walk U = D_omega U_S on the full edge basis.

    The block of columns entering vertex t and rows leaving t is exactly
    e^{i omega_t} S(t) in the neighbor order of t; everything outside these
    blocks stays an exact zero.
    """
    omega = np.asarray(omega, dtype=float)
    if omega.shape != (g.vertex_count,):
        raise ValueError("need one phase per vertex")
    n = g.edge_count
    _check_cap(n)
    mat = np.zeros((n, n), dtype=complex)
    for t in range(g.vertex_count):
        ns = g.neighbors[t]
        cols = [g.edge_index[(s, t)] for s in ns]
        rows = [g.edge_index[(t, w)] for w in ns]
        mat[np.ix_(rows, cols)] = np.exp(1j * omega[t]) * family[t]
    return WalkOperator(mat, g, g.edges, family.kind, omega.copy(), "full")


def restrict(g: Digraph, family: ScatteringFamily, omega, subset: ConsistentSubset):
    """Walk restricted to a consistent edge subset and to its complement.

    Interior vertices keep their scattering matrix; at boundary vertices the
    walk backscatters (identity block on the surviving neighbor positions).
    Each block is unitary on its own edge basis, and each block reads only the
    phases of vertices its edges touch, so it is measurable with respect to
    that side's randomness.
    """
    omega = np.asarray(omega, dtype=float)
    if omega.shape != (g.vertex_count,):
        raise ValueError("need one phase per vertex")
    return (_restricted_block(g, family, omega, subset),
            _restricted_block(g, family, omega, subset.complement()))


def _restricted_block(g, family, omega, subset: ConsistentSubset):
    edges = subset.edges
    n = len(edges)
    _check_cap(n)
    mat = np.zeros((n, n), dtype=complex)
    idx = subset.edge_index
    for t in range(g.vertex_count):
        ns_all = g.neighbors[t]
        ns = subset.neighbors_within(t)
        if not ns:
            continue
        cols = [idx[(s, t)] for s in ns]
        rows = [idx[(t, w)] for w in ns]
        if len(ns) == len(ns_all):
            block = family[t]
        else:
            block = np.eye(len(ns))
        mat[np.ix_(rows, cols)] = np.exp(1j * omega[t]) * block
    return WalkOperator(mat, g, edges, family.kind, omega.copy(),
                        label=f"restricted[{n}]", edge_index=dict(idx))


def embed(op: WalkOperator, g: Digraph) -> np.ndarray:
    """Zero-padded copy of a restricted operator on the full edge basis."""
    n = g.edge_count
    out = np.zeros((n, n), dtype=complex)
    pos = [g.edge_index[e] for e in op.edges]
    out[np.ix_(pos, pos)] = op.matrix
    return out


def boundary_operator(u_full: WalkOperator, u_sub: WalkOperator, u_co: WalkOperator) -> np.ndarray:
    """T = U - (U_F + U_{F^c}) on the full edge basis.

    Nonzero only in columns of edges entering a boundary vertex; its entry
    moduli do not depend on the disorder (the phases factor out), so a single
    realization already determines every coupling modulus.
    """
    g = u_full.graph
    return u_full.matrix - embed(u_sub, g) - embed(u_co, g)


def sphere_reflected_family(g: Digraph, family: ScatteringFamily, center: int, radius: int) -> ScatteringFamily:
    """Replace the scattering matrix by the identity at every vertex of the
    sphere of the given radius, leaving all other vertices untouched.  The
    resulting full-space walk leaves the span of edges with both endpoints in
    the ball invariant, as well as its orthogonal complement."""
    sph = set(sphere_vertices(g, center, radius))
    mats = [np.eye(g.degrees[x]) if x in sph else family[x] for x in range(g.vertex_count)]
    kind = family.kind if not sph else f"{family.kind}+reflect"
    return ScatteringFamily(g, mats, kind)


def ball_edge_mask(g: Digraph, center: int, radius) -> np.ndarray:
    """Boolean mask over g.edges for the edges with both endpoints in the ball."""
    dist = distances_from(g, center)
    return np.array([dist[s] <= radius and dist[t] <= radius for (s, t) in g.edges])
