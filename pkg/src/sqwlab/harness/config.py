"""Experiment configuration: strict TOML parsing with defaults and validation.

Unknown keys are rejected, never ignored; every violation names the offending
key, and all violations found in one file are reported together.  The parsed
config resolves every default, so its canonical JSON form (and hence the hash
stamped on every output) pins the experiment completely.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from ..estimators import DEFAULT_DELTA_GRID, DEFAULT_RADII
from ..graphs import Digraph, build_graph
from ..spectral import RESOLVENT_GUARD, ArcSet
from ..walk import DisorderSpec, ScatteringFamily, make_family

SCHEMA_VERSION = 1

ESTIMATOR_NAMES = ("build", "spectrum", "ec", "fracmom", "specavg", "gapprob",
                   "decay", "dynloc", "check_identities", "check_fmec")

TOP_KEYS = {"schema", "seed", "threads", "estimators", "graph", "family",
            "disorder", "output"} | set(ESTIMATOR_NAMES)

FAMILY_KINDS = ("identity", "near-identity", "haar", "grover", "dft")


class ConfigError(ValueError):
    """One or more config violations; str() lists them all."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class _Section:
    """One config table plus a violation sink; typed getters consume keys."""

    def __init__(self, name, table, errors):
        self.name = name
        self.table = dict(table)
        self.errors = errors

    def _label(self, key):
        return f"[{self.name}] {key}" if self.name else key

    def take(self, key, default, conv):
        if key not in self.table:
            return default
        raw = self.table.pop(key)
        try:
            return conv(raw)
        except (TypeError, ValueError) as err:
            self.errors.append(f"{self._label(key)}: {err}")
            return default

    def finish(self):
        for key in self.table:
            self.errors.append(f"unknown key {key!r} in section [{self.name}]"
                               if self.name else f"unknown key {key!r}")


def _int(raw):
    if isinstance(raw, bool) or not isinstance(raw, int):
        raise ValueError(f"expected an integer, got {raw!r}")
    return raw


def _float(raw):
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ValueError(f"expected a number, got {raw!r}")
    return float(raw)


def _str(raw):
    if not isinstance(raw, str):
        raise ValueError(f"expected a string, got {raw!r}")
    return raw


def _edge(raw):
    if not (isinstance(raw, (list, tuple)) and len(raw) == 2):
        raise ValueError(f"expected an edge [source, target], got {raw!r}")
    return (_int(raw[0]), _int(raw[1]))


def _floats(raw):
    if not isinstance(raw, (list, tuple)) or not raw:
        raise ValueError(f"expected a nonempty list of numbers, got {raw!r}")
    return tuple(_float(v) for v in raw)


def _strs(raw):
    if not isinstance(raw, (list, tuple)):
        raise ValueError(f"expected a list of names, got {raw!r}")
    return tuple(_str(v) for v in raw)


def _complexes(raw):
    if not isinstance(raw, (list, tuple)) or not raw:
        raise ValueError(f"expected a nonempty list of [re, im] pairs, got {raw!r}")
    out = []
    for item in raw:
        if not (isinstance(item, (list, tuple)) and len(item) == 2):
            raise ValueError(f"expected [re, im], got {item!r}")
        out.append(complex(_float(item[0]), _float(item[1])))
    return tuple(out)


def _arcs(raw):
    if not isinstance(raw, (list, tuple)) or not raw:
        raise ValueError(f"expected a nonempty list of [start, end] arcs, got {raw!r}")
    pairs = []
    for item in raw:
        if not (isinstance(item, (list, tuple)) and len(item) == 2):
            raise ValueError(f"expected [start, end], got {item!r}")
        pairs.append((_float(item[0]), _float(item[1])))
    return tuple(pairs)


@dataclass
class ExperimentConfig:
    seed: int
    threads: int
    output_dir: str
    graph_spec: dict
    family_spec: dict
    disorder_spec: dict
    estimators: tuple
    params: dict

    def graph(self) -> Digraph:
        spec = dict(self.graph_spec)
        kind = spec.pop("kind")
        return build_graph(kind, **spec)

    def disorder(self) -> DisorderSpec:
        spec = self.disorder_spec
        if spec["kind"] == "point-mass":
            return DisorderSpec("point-mass", theta0=spec["theta0"])
        if spec["kind"] == "table":
            return DisorderSpec("table", values=spec["values"])
        return DisorderSpec("uniform")

    def family(self, g: Digraph, strength=None) -> ScatteringFamily:
        spec = self.family_spec
        if spec["kind"] == "near-identity":
            phi = spec["strengths"][0] if strength is None else strength
            return make_family(g, "near-identity", strength=phi, seed=spec["seed"])
        if spec["kind"] == "haar":
            return make_family(g, "haar", seed=spec["seed"])
        return make_family(g, spec["kind"])

    def strengths(self):
        return self.family_spec.get("strengths") or (0.0,)

    def resolved(self) -> dict:
        """Canonical dict of everything that can influence output bytes."""
        return {
            "schema": SCHEMA_VERSION,
            "seed": self.seed,
            "graph": self.graph_spec,
            "family": self.family_spec,
            "disorder": self.disorder_spec,
            "estimators": list(self.estimators),
            "params": self.params,
        }

    def hash(self) -> str:
        blob = json.dumps(self.resolved(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _check_z(z, errors, label):
    if abs(abs(z) - 1.0) <= RESOLVENT_GUARD:
        errors.append(f"{label}: z = {z!r} sits inside the guard band")


def _check_arcs(pairs, angles, errors, label):
    if pairs is None:
        return ArcSet.full()
    try:
        arcs = ArcSet(pairs)
    except ValueError as err:
        errors.append(f"{label}: {err}")
        return None
    for pair in pairs:
        for end in pair:
            for lam in angles:
                gap = abs((end - lam + math.pi) % (2.0 * math.pi) - math.pi)
                if gap < 1e-6:
                    errors.append(f"{label}: arc endpoint {end!r} sits within 1e-6 "
                                  f"of declared eigenvalue angle {lam!r}")
    return arcs


def parse_config(path) -> ExperimentConfig:
    """Parse and fully validate a TOML experiment file.

    Returns the resolved config or raises ConfigError listing every violation
    found, each naming its key.
    """
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"malformed config: {err}") from None

    errors = []
    top = _Section("", {k: v for k, v in data.items() if not isinstance(v, dict)}, errors)
    schema = top.take("schema", None, _int)
    if schema != SCHEMA_VERSION:
        errors.append(f"schema must be {SCHEMA_VERSION}, got {schema!r}")
    seed = top.take("seed", 0, _int)
    threads = top.take("threads", 0, _int)
    estimators = top.take("estimators", None, _strs)
    top.finish()

    for key in data:
        if key not in TOP_KEYS:
            errors.append(f"unknown key {key!r}" if not isinstance(data[key], dict)
                          else f"unknown section [{key}]")

    # graph
    gsec = data.get("graph", {"kind": "cycle", "size": 16})
    if not isinstance(gsec, dict) or "kind" not in gsec:
        errors.append("[graph] needs a kind")
        gsec = {"kind": "cycle", "size": 16}
    graph_spec = dict(gsec)
    g = None
    try:
        spec = dict(graph_spec)
        g = build_graph(spec.pop("kind"), **spec)
    except (ValueError, TypeError) as err:
        errors.append(f"[graph]: {err}")

    # family
    fsec = _Section("family", data.get("family", {}), errors)
    fkind = fsec.take("kind", "identity", _str)
    if fkind not in FAMILY_KINDS:
        errors.append(f"[family] kind: unknown family {fkind!r}")
        fkind = "identity"
    fseed = fsec.take("seed", 1, _int)
    strength = fsec.take("strength", None, _float)
    strengths = fsec.take("strengths", None, _floats)
    fsec.finish()
    if strengths is None:
        strengths = (strength,) if strength is not None else None
    elif strength is not None:
        errors.append("[family] give strength or strengths, not both")
    if fkind == "near-identity":
        if strengths is None:
            errors.append("[family] near-identity needs strength or strengths")
            strengths = (0.1,)
        if any(phi < 0 for phi in strengths):
            errors.append("[family] strengths must be >= 0")
    elif strengths is not None:
        errors.append(f"[family] strengths only apply to near-identity, not {fkind!r}")
        strengths = None
    family_spec = {"kind": fkind, "seed": fseed}
    if strengths is not None:
        family_spec["strengths"] = list(strengths)

    # disorder
    dsec = _Section("disorder", data.get("disorder", {}), errors)
    dkind = dsec.take("kind", "uniform", _str)
    theta0 = dsec.take("theta0", None, _float)
    values = dsec.take("values", None, _floats)
    dsec.finish()
    disorder_spec = {"kind": dkind}
    try:
        if dkind == "point-mass":
            DisorderSpec("point-mass", theta0=theta0 if theta0 is not None else 0.0)
            disorder_spec["theta0"] = theta0 if theta0 is not None else 0.0
        elif dkind == "table":
            DisorderSpec("table", values=values)
            disorder_spec["values"] = list(values or ())
        elif dkind == "uniform":
            pass
        else:
            raise ValueError(f"unknown disorder kind {dkind!r}")
    except ValueError as err:
        errors.append(f"[disorder]: {err}")

    # output
    osec = _Section("output", data.get("output", {}), errors)
    output_dir = osec.take("directory", "results", _str)
    osec.finish()

    def default_edge(reverse=False):
        if g is None or not g.edges:
            return (0, 1)
        s, t = g.edges[0]
        return (t, s) if reverse else (s, t)

    def check_edge(edge, label):
        if g is not None and edge not in g.edge_index:
            errors.append(f"{label}: edge {edge!r} is not in the graph")
        return edge

    params = {}

    sec = _Section("build", data.get("build", {}), errors)
    params["build"] = {"realization": sec.take("realization", 0, _int)}
    sec.finish()

    sec = _Section("spectrum", data.get("spectrum", {}), errors)
    params["spectrum"] = {
        "e": check_edge(sec.take("e", default_edge(), _edge), "[spectrum] e"),
        "f": check_edge(sec.take("f", default_edge(reverse=True), _edge), "[spectrum] f"),
        "realization": sec.take("realization", 0, _int),
    }
    sec.finish()

    sec = _Section("ec", data.get("ec", {}), errors)
    beta = sec.take("beta", 0.5, _float)
    if not 0.0 <= beta <= 1.0:
        errors.append("[ec] beta must lie in [0, 1]")
    arc_pairs = sec.take("arcs", None, _arcs)
    eigenangles = sec.take("test_eigenvalue_angles", (), _floats)
    _check_arcs(arc_pairs, eigenangles, errors, "[ec] arcs")
    params["ec"] = {
        "e": check_edge(sec.take("e", default_edge(), _edge), "[ec] e"),
        "f": check_edge(sec.take("f", default_edge(reverse=True), _edge), "[ec] f"),
        "beta": beta,
        "arcs": None if arc_pairs is None else [list(p) for p in arc_pairs],
        "n_samples": sec.take("n_samples", 200, _int),
    }
    sec.finish()

    sec = _Section("fracmom", data.get("fracmom", {}), errors)
    s_fm = sec.take("s", 0.2, _float)
    if not 0.0 < s_fm < 1.0:
        errors.append("[fracmom] s must lie in (0, 1)")
    radii = sec.take("radii", DEFAULT_RADII, _floats)
    for r in radii:
        if r <= 0 or abs(r - 1.0) <= RESOLVENT_GUARD:
            errors.append(f"[fracmom] radii: radius {r!r} invalid or inside the guard band")
    params["fracmom"] = {
        "e": check_edge(sec.take("e", default_edge(), _edge), "[fracmom] e"),
        "f": check_edge(sec.take("f", default_edge(reverse=True), _edge), "[fracmom] f"),
        "s": s_fm,
        "radii": list(radii),
        "angles": sec.take("angles", 64, _int),
        "n_samples": sec.take("n_samples", 1000, _int),
    }
    sec.finish()

    sec = _Section("specavg", data.get("specavg", {}), errors)
    zs = sec.take("zs", (0j, 0.5 + 0j, 0.9j), _complexes)
    for z in zs:
        if abs(z) >= 1.0:
            errors.append(f"[specavg] zs: |z| must be < 1, got {z!r}")
    params["specavg"] = {
        "e": check_edge(sec.take("e", default_edge(), _edge), "[specavg] e"),
        "zs": [[z.real, z.imag] for z in zs],
        "n_samples": sec.take("n_samples", 200, _int),
        "quad_nodes": sec.take("quad_nodes", 64, _int),
    }
    sec.finish()

    sec = _Section("gapprob", data.get("gapprob", {}), errors)
    etas = sec.take("etas", (0.003, 0.01, 0.03), _floats)
    if any(eta <= 0 for eta in etas):
        errors.append("[gapprob] etas must be positive")
    gzs = sec.take("zs", (0.99 + 0j, 1.01 + 0j, 1.01j), _complexes)
    for z in gzs:
        _check_z(z, errors, "[gapprob] zs")
    params["gapprob"] = {
        "center": sec.take("center", 0, _int),
        "radius": sec.take("radius", 4, _int),
        "etas": list(etas),
        "zs": [[z.real, z.imag] for z in gzs],
        "n_samples": sec.take("n_samples", 10000, _int),
        "slack_sigmas": sec.take("slack_sigmas", 3.0, _float),
    }
    sec.finish()

    sec = _Section("decay", data.get("decay", {}), errors)
    s_decay = sec.take("s", 0.2, _float)
    if not 0.0 < s_decay < 1.0 / 3.0:
        errors.append("[decay] s must be < 1/3")
    zd = sec.take("z", 1.01 + 0j, lambda raw: _complexes([raw])[0])
    _check_z(zd, errors, "[decay] z")
    params["decay"] = {
        "e": check_edge(sec.take("e", default_edge(), _edge), "[decay] e"),
        "s": s_decay,
        "z": [zd.real, zd.imag],
        "n_samples": sec.take("n_samples", 2000, _int),
        "min_fit_distance": sec.take("min_fit_distance", 1, _int),
    }
    sec.finish()

    sec = _Section("dynloc", data.get("dynloc", {}), errors)
    arc_pairs = sec.take("arcs", None, _arcs)
    eigenangles = sec.take("test_eigenvalue_angles", (), _floats)
    _check_arcs(arc_pairs, eigenangles, errors, "[dynloc] arcs")
    params["dynloc"] = {
        "e": check_edge(sec.take("e", default_edge(), _edge), "[dynloc] e"),
        "arcs": None if arc_pairs is None else [list(p) for p in arc_pairs],
        "horizon": sec.take("horizon", 1000, _int),
        "n_samples": sec.take("n_samples", 400, _int),
        "min_fit_distance": sec.take("min_fit_distance", 1, _int),
    }
    sec.finish()

    sec = _Section("check_identities", data.get("check_identities", {}), errors)
    izs = sec.take("zs", tuple(r * complex(math.cos(a), math.sin(a))
                               for r in (0.9, 1.1) for a in (0.0, 2.0, 4.0)), _complexes)
    for z in izs:
        _check_z(z, errors, "[check_identities] zs")
    params["check_identities"] = {
        "center": sec.take("center", 0, _int),
        "radius": sec.take("radius", 4, _int),
        "n_instances": sec.take("n_instances", 50, _int),
        "zs": [[z.real, z.imag] for z in izs],
        "residual_tol": sec.take("residual_tol", 1e-9, _float),
        "leak_tol": sec.take("leak_tol", 1e-12, _float),
    }
    sec.finish()

    sec = _Section("check_fmec", data.get("check_fmec", {}), errors)
    s_fmec = sec.take("s", 0.3, _float)
    beta_default = s_fmec / (1.0 + s_fmec) - 1e-3
    beta_fmec = sec.take("beta", beta_default, _float)
    if not 0.0 < s_fmec < 1.0:
        errors.append("[check_fmec] s must lie in (0, 1)")
    elif not 0.0 < beta_fmec < s_fmec:
        errors.append("[check_fmec] beta must lie in (0, s)")
    elif beta_fmec > 1.0 - beta_fmec / s_fmec:
        errors.append("[check_fmec] beta must satisfy beta <= 1 - beta/s")
    arc_pairs = sec.take("arcs", None, _arcs)
    _check_arcs(arc_pairs, (), errors, "[check_fmec] arcs")
    deltas = sec.take("delta_grid", DEFAULT_DELTA_GRID, _floats)
    for d in deltas:
        if not 0.0 < d < 1.0 or abs(d - 1.0) <= RESOLVENT_GUARD:
            errors.append(f"[check_fmec] delta_grid: {d!r} must sit in (0, 1) outside the guard band")
    fmec_e = sec.take("e", None, _edge)
    fmec_f = sec.take("f", None, _edge)
    if fmec_e is not None:
        check_edge(fmec_e, "[check_fmec] e")
    if fmec_f is not None:
        check_edge(fmec_f, "[check_fmec] f")
    params["check_fmec"] = {
        "center": sec.take("center", 0, _int),
        "radius": sec.take("radius", 2, _int),
        "e": fmec_e,
        "f": fmec_f,
        "s": s_fmec,
        "beta": beta_fmec,
        "arcs": None if arc_pairs is None else [list(p) for p in arc_pairs],
        "delta_grid": list(deltas),
        "n_samples": sec.take("n_samples", 100, _int),
        "theta_nodes": sec.take("theta_nodes", 16, _int),
        "proxy_samples": sec.take("proxy_samples", 24, _int),
        "proxy_quad": sec.take("proxy_quad", 64, _int),
        "slack_sigmas": sec.take("slack_sigmas", 3.0, _float),
    }
    sec.finish()

    for name in ("ec", "fracmom", "specavg", "gapprob", "decay", "dynloc",
                 "check_identities", "check_fmec"):
        n = params[name]["n_samples"] if "n_samples" in params[name] else \
            params[name].get("n_instances", 2)
        if n < 2:
            errors.append(f"[{name}] needs at least 2 samples")

    if estimators is None:
        estimators = tuple(name for name in ESTIMATOR_NAMES if name in data)
        if not estimators:
            errors.append("no estimator selected: give an estimators list or a section")
    else:
        for name in estimators:
            if name not in ESTIMATOR_NAMES:
                errors.append(f"estimators: unknown estimator {name!r}")

    if ("decay" in estimators or "dynloc" in estimators) and fkind != "near-identity":
        errors.append("[family] decay and dynloc ladders need the near-identity family")

    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(seed=seed, threads=threads, output_dir=output_dir,
                            graph_spec=graph_spec, family_spec=family_spec,
                            disorder_spec=disorder_spec, estimators=estimators,
                            params=params)
