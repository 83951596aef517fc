"""Exact spectral data of walk unitaries and the correlators built on it.

Everything here is deterministic linear algebra on one operator: the complex
Schur form (numerically normal for unitary input, so the Schur basis is an
orthonormal eigenbasis to ~1e-13), eigenvalue clusters, spectral measures,
eigenfunction correlators and their interpolated family, resolvent and
Cayley-transform elements, the finite-horizon dynamical probe, and the
finite-volume weak-convergence scan.

Cluster weights whose modulus falls below WEIGHT_FLOOR are treated as exact
zeros: they sit below what the eigensolver can resolve, and fractional powers
would otherwise amplify rounding noise into the interpolated correlators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .graphs import Digraph, distances_from, edge_ball
from .walk import WalkOperator, build_unitary, embed, restrict

TWO_PI = 2.0 * math.pi

WEIGHT_FLOOR = 1e-13

RESOLVENT_GUARD = 1e-6


class ArcSet:
    """Open arcs on the unit circle, counterclockwise (start, end) pairs.

    Arcs are normalized mod 2pi and merged when they overlap, so the stored
    arcs are disjoint.  Membership is strict and excludes a 1e-12 collar at
    every endpoint, so a point has to sit decisively inside an arc to count.
    ArcSet.full() is the whole circle (every point is a member).
    """

    endpoint_tol = 1e-12

    def __init__(self, arcs, _full=False):
        self.is_full = bool(_full)
        if self.is_full:
            self.arcs = ((0.0, TWO_PI),)
            return
        cleaned = []
        for a, b in arcs:
            a = float(a) % TWO_PI
            span = (float(b) - float(a)) % TWO_PI
            if span == 0.0:
                raise ValueError("arc endpoints coincide; use ArcSet.full() for the whole circle")
            cleaned.append((a, span))
        cleaned.sort()
        merged = [cleaned[0]]
        for a, span in cleaned[1:]:
            pa, pspan = merged[-1]
            if a <= pa + pspan:
                merged[-1] = (pa, max(pspan, a + span - pa))
            else:
                merged.append((a, span))
        # wraparound overlap between the last arc and the first
        if len(merged) > 1:
            a0, s0 = merged[0]
            al, sl = merged[-1]
            if al + sl - TWO_PI >= a0:
                merged[0] = (al, min(TWO_PI, sl + s0 + (a0 - (al + sl - TWO_PI))))
                merged.pop()
        if any(s >= TWO_PI for _, s in merged):
            self.is_full = True
            self.arcs = ((0.0, TWO_PI),)
            return
        self.arcs = tuple((a, s) for a, s in merged)

    @classmethod
    def full(cls):
        return cls((), _full=True)

    @property
    def length(self):
        return TWO_PI if self.is_full else sum(s for _, s in self.arcs)

    def contains(self, theta):
        """Strict membership of angle(s); vectorized over arrays."""
        theta = np.asarray(theta, dtype=float)
        if self.is_full:
            return np.ones(theta.shape, dtype=bool)
        inside = np.zeros(theta.shape, dtype=bool)
        for a, span in self.arcs:
            rel = (theta - a) % TWO_PI
            inside |= (rel > self.endpoint_tol) & (rel < span - self.endpoint_tol)
        return inside

    def endpoint_margin(self, theta):
        """Smallest angular distance from theta (array ok) to any arc endpoint;
        infinite for the full circle (it has no endpoints)."""
        theta = np.asarray(theta, dtype=float)
        if self.is_full:
            return np.full(theta.shape, np.inf)
        margins = []
        for a, span in self.arcs:
            for end in (a, a + span):
                rel = np.abs((theta - end + math.pi) % TWO_PI - math.pi)
                margins.append(rel)
        return np.min(margins, axis=0)

    def grid(self, per_arc):
        """Midpoint nodes and weights for integrating over the arc set;
        weights sum to length / 2pi (the normalized measure of the set)."""
        if per_arc < 1:
            raise ValueError("need at least one node per arc")
        nodes, weights = [], []
        for a, span in self.arcs:
            step = span / per_arc
            for j in range(per_arc):
                nodes.append((a + (j + 0.5) * step) % TWO_PI)
                weights.append(step / TWO_PI)
        return np.array(nodes), np.array(weights)

    def __repr__(self):
        if self.is_full:
            return "ArcSet.full()"
        return f"ArcSet({[(a, (a + s) % TWO_PI) for a, s in self.arcs]})"


@dataclass
class EigenSystem:
    """Orthonormal eigendata of a walk unitary with clustered eigenvalues.

    eigenvalues/vectors come from the complex Schur form; clusters group
    eigenvalues whose sorted angular gaps stay below the clustering tolerance
    (with wraparound), and cluster_values are the unit-modulus means.  The
    cluster projectors, not individual vectors, are the well-defined objects
    when eigenvalues collide.
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray
    clusters: tuple
    cluster_values: np.ndarray
    unitarity_defect: float

    @property
    def dimension(self):
        return self.eigenvalues.size

    @property
    def cluster_angles(self):
        return np.angle(self.cluster_values) % TWO_PI


def eigendecompose(op, cluster_tol=1e-8) -> EigenSystem:
    """Eigendata of a unitary via the complex Schur form.

    Rejects input whose unitarity defect exceeds 1e-8.  The returned basis is
    orthonormal and diagonalizes the operator to ~1e-13; the internal
    consistency checks run at 1e-10 (scaled up only if the input itself is
    rougher than 1e-12).
    """
    mat = op.matrix if isinstance(op, WalkOperator) else np.asarray(op, dtype=complex)
    n = mat.shape[0]
    if mat.shape != (n, n):
        raise ValueError("operator must be square")
    defect = np.linalg.norm(mat.conj().T @ mat - np.eye(n), 2)
    if defect > 1e-8:
        raise ValueError(f"matrix is not unitary (defect {defect:.2e})")
    t, zmat = sla.schur(mat, output="complex")
    lam = np.diagonal(t).copy()
    tol = max(1e-10, 20.0 * defect)
    if np.abs(np.abs(lam) - 1.0).max() > tol:
        raise RuntimeError("eigenvalues strayed from the unit circle")
    if np.linalg.norm(zmat.conj().T @ zmat - np.eye(n), 2) > tol:
        raise RuntimeError("eigenbasis lost orthonormality")
    if np.linalg.norm(mat @ zmat - zmat * lam, 2) > tol:
        raise RuntimeError("Schur basis does not diagonalize the operator")

    order = np.argsort(np.angle(lam) % TWO_PI)
    angles = np.angle(lam[order]) % TWO_PI
    clusters = []
    current = [0]
    for i in range(1, n):
        if angles[i] - angles[i - 1] <= cluster_tol:
            current.append(i)
        else:
            clusters.append(current)
            current = [i]
    clusters.append(current)
    # wraparound: the gap from the last angle through 2pi to the first
    if len(clusters) > 1 and (angles[0] + TWO_PI - angles[-1]) <= cluster_tol:
        clusters[0] = clusters.pop() + clusters[0]
    cluster_idx = tuple(np.array([order[i] for i in c]) for c in clusters)
    means = np.array([lam[c].mean() for c in cluster_idx])
    means = means / np.abs(means)
    return EigenSystem(lam, zmat, cluster_idx, means, defect)


@dataclass
class SpectralMeasure:
    """Cluster-resolved matrix elements <psi|P_a phi> of a pair of states."""

    cluster_values: np.ndarray
    weights: np.ndarray        # <psi|P_a phi>
    diagonals: np.ndarray      # <psi|P_a psi>, nonnegative

    @property
    def angles(self):
        return np.angle(self.cluster_values) % TWO_PI


def _as_state(eig: EigenSystem, psi):
    v = np.asarray(psi, dtype=complex)
    if v.shape != (eig.dimension,):
        raise ValueError("state has the wrong dimension")
    nrm = np.linalg.norm(v)
    if abs(nrm - 1.0) > 1e-10:
        raise ValueError(f"state is not normalized (norm {nrm!r})")
    return v


def spectral_measure(eig: EigenSystem, psi, phi) -> SpectralMeasure:
    psi = _as_state(eig, psi)
    phi = _as_state(eig, phi)
    a = eig.vectors.conj().T @ psi
    b = a if phi is psi else eig.vectors.conj().T @ phi
    weights = np.array([np.vdot(a[c], b[c]) for c in eig.clusters])
    diagonals = np.array([float(np.vdot(a[c], a[c]).real) for c in eig.clusters])
    total = diagonals.sum()
    if abs(total - 1.0) > 1e-10:
        raise RuntimeError(f"diagonal weights sum to {total!r}, not the state norm")
    return SpectralMeasure(eig.cluster_values.copy(), weights, diagonals)


def _floored(measure: SpectralMeasure):
    w = measure.weights.copy()
    w[np.abs(w) <= WEIGHT_FLOOR] = 0.0
    d = measure.diagonals.copy()
    d[d <= WEIGHT_FLOOR ** 2] = 0.0
    return w, d


def ec(eig: EigenSystem, psi, phi, arcs: ArcSet) -> float:
    """Eigenfunction correlator: total cluster weight |<psi|P_a phi>| over the
    clusters whose eigenvalue angle lies inside the arc set."""
    m = spectral_measure(eig, psi, phi)
    w, _ = _floored(m)
    inside = arcs.contains(m.angles)
    return float(np.abs(w[inside]).sum())


def interpolated_ec(eig: EigenSystem, psi, phi, arcs: ArcSet, beta) -> float:
    """Interpolated correlator sum_a <psi|P_a psi>^(1-beta) |<psi|P_a phi>|^beta.

    beta = 0 reduces to the diagonal correlator of psi, beta = 1 to the plain
    correlator; clusters with zero diagonal weight contribute nothing for
    beta in (0, 1].
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"interpolation exponent must lie in [0, 1], got {beta!r}")
    m = spectral_measure(eig, psi, phi)
    w, d = _floored(m)
    inside = arcs.contains(m.angles)
    w, d = np.abs(w[inside]), d[inside]
    if beta == 0.0:
        return float(d.sum())
    if beta == 1.0:
        return float(w.sum())
    live = (d > 0.0) & (w > 0.0)
    return float((d[live] ** (1.0 - beta) * w[live] ** beta).sum())


def resolvent_element(op, e_index, f_index, z) -> complex:
    """<e|(U - z)^{-1}|f> by a dense linear solve.

    z must keep |.|z| - 1| above the guard band; the trivial bound
    |value| <= 1 / |1 - |z|| then caps the conditioning.
    """
    mat = op.matrix if isinstance(op, WalkOperator) else np.asarray(op, dtype=complex)
    z = complex(z)
    if abs(abs(z) - 1.0) <= RESOLVENT_GUARD:
        raise ValueError(f"|z| = {abs(z)!r} is inside the guard band around the unit circle")
    n = mat.shape[0]
    rhs = np.zeros(n, dtype=complex)
    rhs[f_index] = 1.0
    x = np.linalg.solve(mat - z * np.eye(n), rhs)
    return complex(x[e_index])


def resolvent_row(op, e_index, z) -> np.ndarray:
    """The whole row <e|(U - z)^{-1}|.> from one adjoint solve."""
    mat = op.matrix if isinstance(op, WalkOperator) else np.asarray(op, dtype=complex)
    z = complex(z)
    if abs(abs(z) - 1.0) <= RESOLVENT_GUARD:
        raise ValueError(f"|z| = {abs(z)!r} is inside the guard band around the unit circle")
    n = mat.shape[0]
    rhs = np.zeros(n, dtype=complex)
    rhs[e_index] = 1.0
    y = np.linalg.solve(mat.conj().T - np.conj(z) * np.eye(n), rhs)
    return y.conj()


def cayley_real_diag(op, e_index, z) -> float:
    """Diagonal element <e| Re((U + z)(U - z)^{-1}) |e> for |z| < 1.

    Uses (U + z)(U - z)^{-1} = 1 + 2 z (U - z)^{-1}; the result is the
    harmonic extension of the spectral measure of e, so it is nonnegative on
    the open disk and exactly 1 at z = 0.
    """
    z = complex(z)
    if abs(z) >= 1.0:
        raise ValueError(f"|z| = {abs(z)!r} is not inside the open unit disk")
    mat = op.matrix if isinstance(op, WalkOperator) else np.asarray(op, dtype=complex)
    if z == 0:
        return 1.0
    n = mat.shape[0]
    rhs = np.zeros(n, dtype=complex)
    rhs[e_index] = 1.0
    x = np.linalg.solve(mat - z * np.eye(n), rhs)
    return float(1.0 + 2.0 * (z * x[e_index]).real)


def dynamical_probe(eig: EigenSystem, psi, phi, arcs: ArcSet, n_max: int) -> float:
    """sup over |n| <= n_max of |<psi| U^n P_I(U) |phi>|, from exact eigendata.

    Bounded by the eigenfunction correlator over the same arcs for every
    horizon, and monotone in the horizon.
    """
    if n_max < 0:
        raise ValueError("horizon must be nonnegative")
    m = spectral_measure(eig, psi, phi)
    w, _ = _floored(m)
    inside = arcs.contains(m.angles)
    w = w[inside]
    if w.size == 0:
        return 0.0
    theta = m.angles[inside]
    powers = np.arange(-n_max, n_max + 1)
    vals = np.exp(1j * np.outer(powers, theta)) @ w
    return float(np.abs(vals).max())


@dataclass
class WeakConvergenceReport:
    """Per-radius comparison of the full walk against its decoupled cut.

    The correlator comparison is a statement about the tail of the exhausting
    sequence: radii at most `support_radius` can cut between e and f (or pin
    the boundary on their supports), so only radii strictly beyond it belong
    in the "large L" minimum.
    """

    radii: tuple
    monomial_errors: np.ndarray      # max over |k| <= k_max per radius
    support_radius: int
    ec_full: float = None
    ec_cut: np.ndarray = None
    margin_full: float = None        # spectral distance to the arc endpoints
    margin_cut: np.ndarray = None

    def large_radii(self):
        return np.array([r > self.support_radius for r in self.radii])


def weak_convergence_scan(g: Digraph, family, omega, e, f, center, radii,
                          k_max=6, arcs: ArcSet = None) -> WeakConvergenceReport:
    """Compare monomials <e|U^k f> of the full walk against the walk decoupled
    across each edge ball E_L, by repeated multiplication on both sides.

    Both chains run through the same dense matvec, so once the ball swallows
    the k-step neighborhood of e and f the two value sequences agree bitwise
    and the reported error is exactly 0.0.  If `arcs` is given, the plain
    correlators Q(e, f; arcs) of the full and the decoupled walks are also
    reported, along with how far each spectrum stays from the arc endpoints.
    """
    u_full = build_unitary(g, family, omega)
    ei, fi = g.edge_index[tuple(e)], g.edge_index[tuple(f)]
    dist = distances_from(g, center)
    support_radius = int(max(dist[v] for v in (*e, *f)))
    vec_e = np.zeros(g.edge_count, complex)
    vec_e[ei] = 1.0
    vec_f = np.zeros(g.edge_count, complex)
    vec_f[fi] = 1.0

    def monomials(mat):
        """<e|U^k f> for k = -k_max..k_max via forward chains from f and e."""
        vals = {0: complex(vec_e @ vec_f)}
        v = vec_f.copy()
        w = vec_e.copy()
        for k in range(1, k_max + 1):
            v = mat @ v
            w = mat @ w
            vals[k] = complex(np.vdot(vec_e, v))
            vals[-k] = complex(np.vdot(w, vec_f))
        return vals

    full_vals = monomials(u_full.matrix)
    errors = []
    ec_cut = []
    margin_cut = []
    eig_full = None
    ec_full = margin_full = None
    if arcs is not None:
        eig_full = eigendecompose(u_full)
        ec_full = ec(eig_full, vec_e, vec_f, arcs)
        margin_full = float(arcs.endpoint_margin(np.angle(eig_full.eigenvalues) % TWO_PI).min())
    for radius in radii:
        sub = edge_ball(g, center, radius)
        uf, uc = restrict(g, family, omega, sub)
        cut = embed(uf, g) + embed(uc, g)
        cut_vals = monomials(cut)
        errors.append(max(abs(full_vals[k] - cut_vals[k]) for k in full_vals))
        if arcs is not None:
            eig_cut = eigendecompose(cut)
            ec_cut.append(ec(eig_cut, vec_e, vec_f, arcs))
            margin_cut.append(float(arcs.endpoint_margin(
                np.angle(eig_cut.eigenvalues) % TWO_PI).min()))
    return WeakConvergenceReport(
        radii=tuple(radii),
        monomial_errors=np.array(errors),
        support_radius=support_radius,
        ec_full=ec_full,
        ec_cut=np.array(ec_cut) if arcs is not None else None,
        margin_full=margin_full,
        margin_cut=np.array(margin_cut) if arcs is not None else None,
    )
