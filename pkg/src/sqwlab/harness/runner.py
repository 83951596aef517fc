"""Experiment orchestration and result persistence.

Every output CSV starts with the config hash and carries only deterministic
bytes; wall times live in the JSON sidecar next to it.  The exit status is 0
when every asserted bound held, 1 when one failed beyond its slack, and the
CLI reserves 2 for usage and config errors.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .. import __version__
from ..estimators import (
    MCEstimate,
    ZGrid,
    _indexed,
    check_fmec_bound,
    check_geometric_resolvent,
    decay_experiment,
    dynloc_experiment,
    gap_probability,
    mc_fractional_moment,
    mc_spectral_average,
)
from ..graphs import distances_from, edge_ball
from ..spectral import ArcSet, eigendecompose, interpolated_ec, spectral_measure
from ..walk import build_unitary, sample_disorder
from .config import SCHEMA_VERSION, ExperimentConfig

# stream indices for the harness-level estimators (the rest live in estimators)
EST_BUILD = 0
EST_SPECTRUM = 9
EST_EC = 10
EST_GEOM_CHECK = 11


@dataclass(frozen=True)
class ResultRecord:
    experiment: str
    estimator: str
    key: str
    value: float
    std_error: float
    n_samples: int
    wall_time: float
    config_hash: str


def _arcset(pairs):
    return ArcSet.full() if pairs is None else ArcSet(pairs)


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def _write_csv(path: Path, columns, rows, cfg_hash):
    with open(path, "w") as fh:
        fh.write(f"# config_hash = {cfg_hash}\n")
        fh.write(f"# schema = {SCHEMA_VERSION}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


class _Context:
    def __init__(self, config: ExperimentConfig, out: Path, threads: int, quiet: bool):
        self.config = config
        self.out = out
        self.threads = threads
        self.quiet = quiet
        self.hash = config.hash()
        self.graph = config.graph()
        self.disorder = config.disorder()

    def family(self, strength=None):
        return self.config.family(self.graph, strength=strength)

    def say(self, text):
        if not self.quiet:
            print(text)


def _records(ctx, name, rows, wall):
    out = []
    for key, value, se, n in rows:
        out.append(ResultRecord(experiment=name, estimator=name, key=key,
                                value=float(value), std_error=float(se),
                                n_samples=int(n), wall_time=wall,
                                config_hash=ctx.hash))
    return out


def _run_build(ctx, p):
    g = ctx.graph
    om = sample_disorder(g, ctx.disorder, ctx.config.seed, (EST_BUILD, p["realization"]))
    u = build_unitary(g, ctx.family(), om)
    _write_csv(ctx.out / "graph.csv", ("source", "target"), list(g.edges), ctx.hash)
    with open(ctx.out / "operator.txt", "w") as fh:
        fh.write(f"# config_hash = {ctx.hash}\n")
        u.dump(fh)
    return ["graph.csv", "operator.txt"], [("dimension", u.dimension, 0.0, 1)], []


def _run_spectrum(ctx, p):
    g = ctx.graph
    om = sample_disorder(g, ctx.disorder, ctx.config.seed, (EST_SPECTRUM, p["realization"]))
    u = build_unitary(g, ctx.family(), om)
    eig = eigendecompose(u)
    psi = u.basis_vector(p["e"])
    phi = u.basis_vector(p["f"])
    sm = spectral_measure(eig, psi, phi)
    rows = [(lam.real, lam.imag, abs(w), d)
            for lam, w, d in zip(sm.cluster_values, sm.weights, sm.diagonals)]
    _write_csv(ctx.out / "spectrum.csv",
               ("lambda_re", "lambda_im", "weight_abs", "diag_weight"), rows, ctx.hash)
    return ["spectrum.csv"], [("clusters", len(rows), 0.0, 1)], []


def _run_ec(ctx, p):
    g = ctx.graph
    arcs = _arcset(p["arcs"])
    fam = ctx.family()
    betas = (0.0, p["beta"], 1.0)
    ve = np.zeros(g.edge_count, complex)
    ve[g.edge_index[tuple(p["e"])]] = 1.0
    vf = np.zeros(g.edge_count, complex)
    vf[g.edge_index[tuple(p["f"])]] = 1.0

    def one(i):
        om = sample_disorder(g, ctx.disorder, ctx.config.seed, (EST_EC, i))
        eig = eigendecompose(build_unitary(g, fam, om))
        return [interpolated_ec(eig, ve, vf, arcs, b) for b in betas]

    samples = np.array(_indexed(one, p["n_samples"], ctx.threads))
    rows, recs = [], []
    for j, beta in enumerate(betas):
        est = MCEstimate.from_samples(samples[:, j])
        rows.append((beta, est.mean, est.std_error, est.n_samples, ctx.config.seed))
        recs.append((f"beta={beta:g}", est.mean, est.std_error, est.n_samples))
    _write_csv(ctx.out / "ec.csv",
               ("beta", "mean", "std_error", "n_samples", "seed"), rows, ctx.hash)
    return ["ec.csv"], recs, []


def _run_fracmom(ctx, p):
    grid = ZGrid(tuple(p["radii"]), p["angles"])
    rep = mc_fractional_moment(ctx.graph, ctx.family(), ctx.disorder,
                               tuple(p["e"]), tuple(p["f"]), p["s"], grid,
                               p["n_samples"], ctx.config.seed, threads=ctx.threads)
    rows = [(z.real, z.imag, est.mean, est.std_error, est.n_samples, ctx.config.seed)
            for z, est in zip(rep.zs, rep.estimates)]
    _write_csv(ctx.out / "fracmom.csv",
               ("z_re", "z_im", "mean", "std_error", "n_samples", "seed"), rows, ctx.hash)
    ctx.say(f"fracmom grid-sup (lower bound of true sup) {rep.grid_sup:.6g} "
            f"at z = {rep.grid_sup_z:.6g}")
    recs = [("grid_sup", rep.grid_sup, 0.0, p["n_samples"])]
    return ["fracmom.csv"], recs, []


def _run_specavg(ctx, p):
    rows, recs, fails = [], [], []
    for zr, zi in p["zs"]:
        z = complex(zr, zi)
        rep = mc_spectral_average(ctx.graph, ctx.family(), ctx.disorder,
                                  tuple(p["e"]), z, p["n_samples"], ctx.config.seed,
                                  quad_nodes=p["quad_nodes"], threads=ctx.threads)
        est = rep.estimate
        rows.append((z.real, z.imag, est.mean, est.std_error, est.n_samples,
                     ctx.config.seed, rep.min_integrand))
        recs.append((f"z={z:.6g}", est.mean, est.std_error, est.n_samples))
        if rep.min_integrand < -1e-12:
            fails.append(f"specavg z={z:.6g}: integrand dips to {rep.min_integrand:.3e}")
    _write_csv(ctx.out / "specavg.csv",
               ("z_re", "z_im", "mean", "std_error", "n_samples", "seed", "min_integrand"),
               rows, ctx.hash)
    return ["specavg.csv"], recs, fails


def _run_gapprob(ctx, p):
    rows, recs, fails = [], [], []
    for zr, zi in p["zs"]:
        z = complex(zr, zi)
        for eta in p["etas"]:
            rep = gap_probability(ctx.graph, ctx.disorder, p["center"], p["radius"],
                                  z, eta, p["n_samples"], ctx.config.seed,
                                  threads=ctx.threads)
            est = rep.estimate
            rows.append((z.real, z.imag, eta, est.mean, est.std_error, est.n_samples,
                         ctx.config.seed, rep.bound, rep.bound_applicable))
            key = f"z={z:.6g} eta={eta:g}"
            recs.append((key, est.mean, est.std_error, est.n_samples))
            if rep.bound_applicable and est.mean > rep.bound + p["slack_sigmas"] * est.std_error:
                fails.append(f"gapprob {key}: estimate {est.mean:.6g} exceeds "
                             f"bound {rep.bound:.6g} beyond {p['slack_sigmas']:g} sigma")
    _write_csv(ctx.out / "gapprob.csv",
               ("z_re", "z_im", "eta", "mean", "std_error", "n_samples", "seed",
                "bound", "bound_applicable"), rows, ctx.hash)
    return ["gapprob.csv"], recs, fails


def _fit_row(fit):
    if fit is None:
        return (math.nan, math.nan, math.nan, math.nan, 0)
    return (fit.prefactor, fit.rate, fit.g_stderr, fit.r_squared, fit.n_points)


def _run_decay(ctx, p):
    rep = decay_experiment(ctx.graph, ctx.disorder, tuple(p["e"]), p["s"],
                           complex(*p["z"]), ctx.config.strengths(),
                           p["n_samples"], ctx.config.seed,
                           family_seed=ctx.config.family_spec["seed"],
                           min_fit_distance=p["min_fit_distance"], threads=ctx.threads)
    files, recs, summary = [], [], []
    for curve in rep.curves:
        fit_c, fit_g, fit_se, fit_r2, fit_n = _fit_row(curve.fit)
        rows = [(int(d), est.mean, est.std_error, est.n_samples, ctx.config.seed,
                 curve.strength, fit_c, fit_g, fit_se, fit_r2)
                for d, est in zip(curve.distances, curve.estimates)]
        name = f"decay_phi{curve.strength:g}.csv"
        _write_csv(ctx.out / name,
                   ("distance", "mean", "std_error", "n_samples", "seed", "strength",
                    "fit_c", "fit_g", "fit_g_stderr", "fit_r2"), rows, ctx.hash)
        files.append(name)
        summary.append((curve.strength, fit_c, fit_g, fit_se, fit_r2, fit_n))
        recs.append((f"phi={curve.strength:g} g", fit_g, fit_se, p["n_samples"]))
        ctx.say(f"decay phi={curve.strength:g}: g = {fit_g:.4g} +- {fit_se:.2g}, "
                f"R^2 = {fit_r2:.4f}")
    _write_csv(ctx.out / "decay_summary.csv",
               ("strength", "fit_c", "fit_g", "fit_g_stderr", "fit_r2", "n_points"),
               summary, ctx.hash)
    files.append("decay_summary.csv")
    return files, recs, []


def _run_dynloc(ctx, p):
    rep = dynloc_experiment(ctx.graph, ctx.disorder, tuple(p["e"]), _arcset(p["arcs"]),
                            p["horizon"], ctx.config.strengths(),
                            p["n_samples"], ctx.config.seed,
                            family_seed=ctx.config.family_spec["seed"],
                            min_fit_distance=p["min_fit_distance"], threads=ctx.threads)
    files, recs, summary = [], [], []
    for curve in rep.curves:
        fit_c, fit_g, fit_se, fit_r2, fit_n = _fit_row(curve.fit)
        rows = [(int(d), pe.mean, pe.std_error, ee.mean, ee.std_error, pe.n_samples,
                 ctx.config.seed, curve.strength)
                for d, pe, ee in zip(curve.distances, curve.probe_estimates,
                                     curve.ec_estimates)]
        name = f"dynloc_phi{curve.strength:g}.csv"
        _write_csv(ctx.out / name,
                   ("distance", "probe_mean", "probe_std_error", "ec_mean",
                    "ec_std_error", "n_samples", "seed", "strength"), rows, ctx.hash)
        files.append(name)
        summary.append((curve.strength, fit_c, fit_g, fit_se, fit_r2, fit_n,
                        curve.envelope_margin))
        recs.append((f"phi={curve.strength:g} g", fit_g, fit_se, p["n_samples"]))
    _write_csv(ctx.out / "dynloc_summary.csv",
               ("strength", "fit_c", "fit_g", "fit_g_stderr", "fit_r2", "n_points",
                "envelope_margin"), summary, ctx.hash)
    files.append("dynloc_summary.csv")
    return files, recs, []


def _run_check_identities(ctx, p):
    g = ctx.graph
    fam = ctx.family()
    zs = [complex(zr, zi) for zr, zi in p["zs"]]
    rows, recs, fails = [], [], []
    for i in range(p["n_instances"]):
        om = sample_disorder(g, ctx.disorder, ctx.config.seed, (EST_GEOM_CHECK, i))
        z = zs[i % len(zs)]
        rep = check_geometric_resolvent(g, fam, om, z, p["radius"], p["center"])
        rows.append((i, z.real, z.imag, rep.residual, rep.invariance_leak,
                     rep.screened_leak, rep.spectral_distance))
        key = f"instance={i} z={z:.6g}"
        recs.append((key, rep.residual, 0.0, 1))
        if rep.residual > p["residual_tol"]:
            fails.append(f"check_identities {key}: residual {rep.residual:.3e} "
                         f"exceeds {p['residual_tol']:g}")
        if max(rep.invariance_leak, rep.screened_leak) > p["leak_tol"]:
            fails.append(f"check_identities {key}: vanishing-term leak "
                         f"{max(rep.invariance_leak, rep.screened_leak):.3e} "
                         f"exceeds {p['leak_tol']:g}")
    _write_csv(ctx.out / "check_identities.csv",
               ("realization", "z_re", "z_im", "residual", "invariance_leak",
                "screened_leak", "spectral_distance"), rows, ctx.hash)
    return ["check_identities.csv"], recs, fails


def _default_fmec_edges(g, center, radius):
    sub = edge_ball(g, center, radius)
    if len(sub) == 0:
        raise ValueError("the edge ball is empty; enlarge the radius")
    dist = distances_from(g, center)
    f = sub.edges[0]
    for e in g.edges:
        if dist[e[0]] > radius:
            return e, f
    raise ValueError("no edge with source outside the ball; shrink the radius")


def _run_check_fmec(ctx, p):
    g = ctx.graph
    e, f = p["e"], p["f"]
    if e is None or f is None:
        de, df = _default_fmec_edges(g, p["center"], p["radius"])
        e = de if e is None else tuple(e)
        f = df if f is None else tuple(f)
    rep = check_fmec_bound(g, ctx.family(), ctx.disorder, p["center"], p["radius"],
                           tuple(e), tuple(f), _arcset(p["arcs"]), p["s"], p["beta"],
                           p["n_samples"], ctx.config.seed,
                           theta_nodes=p["theta_nodes"],
                           delta_grid=tuple(p["delta_grid"]),
                           proxy_samples=p["proxy_samples"],
                           proxy_quad=p["proxy_quad"], threads=ctx.threads)
    combined = math.hypot(rep.lhs.std_error, rep.rhs_stderr)
    broken = rep.lhs.mean > rep.rhs + p["slack_sigmas"] * combined
    rows = [(rep.lhs.mean, rep.lhs.std_error, rep.rhs, rep.rhs_stderr, rep.cw_proxy,
             rep.coupling_total, broken, rep.lhs.n_samples, ctx.config.seed)]
    _write_csv(ctx.out / "check_fmec.csv",
               ("lhs_mean", "lhs_std_error", "rhs", "rhs_std_error", "cw_proxy",
                "coupling_total", "violation", "n_samples", "seed"), rows, ctx.hash)
    recs = [("lhs", rep.lhs.mean, rep.lhs.std_error, rep.lhs.n_samples),
            ("rhs", rep.rhs, rep.rhs_stderr, rep.lhs.n_samples)]
    fails = []
    if broken:
        fails.append(f"check_fmec: correlator {rep.lhs.mean:.6g} exceeds the "
                     f"moment bound {rep.rhs:.6g} beyond {p['slack_sigmas']:g} sigma")
    return ["check_fmec.csv"], recs, fails


_RUNNERS = {
    "build": _run_build,
    "spectrum": _run_spectrum,
    "ec": _run_ec,
    "fracmom": _run_fracmom,
    "specavg": _run_specavg,
    "gapprob": _run_gapprob,
    "decay": _run_decay,
    "dynloc": _run_dynloc,
    "check_identities": _run_check_identities,
    "check_fmec": _run_check_fmec,
}


def run(config: ExperimentConfig, only=None, out_dir=None, seed=None, threads=None,
        quiet=False) -> int:
    """Execute the selected estimators, write CSVs and sidecars, return the
    exit status (0 pass, 1 an asserted check failed beyond its slack)."""
    if seed is not None:
        config = replace(config, seed=int(seed))
    names = (only,) if only else config.estimators
    for name in names:
        if name not in _RUNNERS:
            raise ValueError(f"unknown estimator {name!r}")
    width = threads if threads is not None else config.threads
    if not width:
        width = os.cpu_count() or 1
    out = Path(out_dir if out_dir is not None else config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    ctx = _Context(config, out, int(width), quiet)
    all_failures = []
    for name in names:
        start = time.perf_counter()
        try:
            files, recs, fails = _RUNNERS[name](ctx, config.params[name])
        except RuntimeError as err:
            files, recs = [], []
            fails = [f"{name}: {err}"]
        wall = time.perf_counter() - start
        records = _records(ctx, name, recs, wall)
        sidecar = {
            "schema": SCHEMA_VERSION,
            "estimator": name,
            "seed": config.seed,
            "config_hash": ctx.hash,
            "library_version": __version__,
            "config": config.resolved(),
            "outputs": files,
            "records": [asdict(r) for r in records],
            "failures": fails,
            "wall_time_s": wall,
        }
        with open(out / f"{name}.json", "w") as fh:
            json.dump(sidecar, fh, sort_keys=True, indent=2)
            fh.write("\n")
        for fname in files:
            ctx.say(f"wrote {out / fname}")
        for fail in fails:
            print(f"FAIL {fail}")
        all_failures.extend(fails)
    return 1 if all_failures else 0


def verify_run(out_dir) -> list:
    """Cross-check every sidecar in a results directory against its outputs.

    Returns a list of mismatch descriptions: a sidecar whose stored hash does
    not match its own config, or an output file stamped with a different hash.
    """
    out = Path(out_dir)
    problems = []
    for sidecar_path in sorted(out.glob("*.json")):
        with open(sidecar_path) as fh:
            sidecar = json.load(fh)
        stored = sidecar.get("config_hash", "")
        blob = json.dumps(sidecar.get("config", {}), sort_keys=True, separators=(",", ":"))
        if hashlib.sha256(blob.encode()).hexdigest() != stored:
            problems.append(f"{sidecar_path.name}: sidecar config does not match its hash")
        for fname in sidecar.get("outputs", ()):
            fpath = out / fname
            if not fpath.exists():
                problems.append(f"{sidecar_path.name}: missing output {fname}")
                continue
            with open(fpath) as fh:
                first = fh.readline().strip()
            if first != f"# config_hash = {stored}":
                problems.append(f"{fname}: config hash does not match sidecar "
                                f"{sidecar_path.name}")
    return problems
