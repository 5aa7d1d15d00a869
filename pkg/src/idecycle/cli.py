"""Command-line pipeline: prove, assess and export.

Every stage writes JSON artifacts into the output directory.  Each artifact
records the SHA-256 of the artifacts it was computed from, and downstream
stages refuse inputs whose recorded hash no longer matches.
"""

import argparse
import copy
import json
import logging
import os
import sys
import time

import numpy as np
from threadpoolctl import threadpool_limits

from . import bvp as bv
from . import evans as ev
from . import manifold as mf
from . import model as md
from . import twocycle as tc
from .exceptions import (DomainError, IdecycleError, InconclusiveError, ProofError,
                         SolverError, StaleArtifactError, UnsupportedRigorError)
from .prover import ProofCertificate, certify_bvp, certify_manifold, sha256_of

EXIT_OK = 0
EXIT_PROOF = 2
EXIT_SOLVER = 3
EXIT_CONFIG = 4

# per-growth defaults for entries left as ``None``
GROWTH_DEFAULTS = {
    "logistic": {"bvp.N": 500, "evans.eps1": 0.1, "evans.eps2": 0.1},
    "ricker": {"bvp.N": 160, "evans.eps1": 0.3, "evans.eps2": 0.3},
}

DEFAULT_CONFIG = {
    "model": {"growth": "logistic", "rho": 2.2, "sigma": 10.0},
    "manifold": {"N": 30, "newton_tol": 1e-12, "max_iter": 50},
    "bvp": {"N": None, "nu": 1.05, "r_star": 1e-5, "seed": "shooting", "seed_path": None,
            "newton_tol": 1e-11, "max_iter": 50},
    "evans": {"eps1": None, "eps2": None, "L": 8.0, "mesh": 0.05},
    "twocycle": {"grid_min": -3.0, "grid_max": 3.0, "grid_n": 200},
    "out": "runs",
}

FILES = {
    "manifold": "manifold.json",
    "manifold_cert": "manifold_certificate.json",
    "bvp": "bvp.json",
    "bvp_cert": "bvp_certificate.json",
    "twocycle": "twocycle.json",
    "evans": "evans.json",
    "contour": "evans_contour.csv",
    "profiles": "profiles.csv",
    "surface": "manifold_surface.csv",
}

log = logging.getLogger("idecycle")


class ConfigError(IdecycleError, ValueError):
    """The run configuration is malformed or inconsistent."""


class _JsonLines(logging.Formatter):
    def format(self, record):
        doc = {"t": round(record.created, 3), "level": record.levelname, "msg": record.getMessage()}
        doc.update(getattr(record, "data", {}))
        return json.dumps(doc, default=str)


def _event(msg, **data):
    log.info(msg, extra={"data": data})


# configuration

def _set_path(cfg, key, value):
    parts = key.split(".")
    node = cfg
    for p in parts[:-1]:
        if p not in node or not isinstance(node[p], dict):
            raise ConfigError(f"unknown configuration block {p!r} in {key!r}")
        node = node[p]
    if parts[-1] not in node:
        raise ConfigError(f"unknown configuration key {key!r}")
    node[parts[-1]] = value


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _merge(base, update, prefix=""):
    for k, v in update.items():
        if k not in base:
            raise ConfigError(f"unknown configuration key {prefix + k!r}")
        if isinstance(base[k], dict):
            if not isinstance(v, dict):
                raise ConfigError(f"{prefix + k!r} must be an object")
            _merge(base[k], v, prefix + k + ".")
        else:
            base[k] = v


def load_config(path=None, overrides=(), out=None):
    """Defaults, then the JSON file, then ``--set`` overrides; validated."""
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f"configuration file {path!r} not found")
        with open(path) as fh:
            try:
                _merge(cfg, json.load(fh))
            except json.JSONDecodeError as exc:
                raise ConfigError(f"configuration file is not valid JSON: {exc}") from None
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        _set_path(cfg, k.strip(), _parse_value(v.strip()))
    if out is not None:
        cfg["out"] = out
    growth = cfg["model"]["growth"]
    if growth not in GROWTH_DEFAULTS:
        raise ConfigError(f"unknown growth model {growth!r}")
    for key, val in GROWTH_DEFAULTS[growth].items():
        block, name = key.split(".")
        if cfg[block][name] is None:
            cfg[block][name] = val
    _validate(cfg)
    return cfg


def _validate(cfg):
    m = cfg["model"]
    try:
        rho, sigma = float(m["rho"]), float(m["sigma"])
    except (TypeError, ValueError):
        raise ConfigError("rho and sigma must be numbers") from None
    if not sigma > 0:
        raise ConfigError("sigma must be positive")
    if m["growth"] == "logistic" and not rho > 2:
        raise ConfigError(f"no 2-cycle: the logistic map needs rho > 2 (got {rho})")
    for block in ("manifold", "bvp"):
        if not int(cfg[block]["N"]) >= 2:
            raise ConfigError(f"{block}.N must be at least 2")
    if not float(cfg["bvp"]["nu"]) >= 1:
        raise ConfigError("bvp.nu must be at least 1")
    seed = cfg["bvp"]["seed"]
    if seed not in ("shooting", "file"):
        raise ConfigError("bvp.seed must be 'shooting' or 'file'")
    if seed == "file":
        p = cfg["bvp"]["seed_path"]
        if not p or not os.path.exists(p):
            raise ConfigError(f"bvp.seed_path {p!r} does not exist")
    e = cfg["evans"]
    if not (float(e["mesh"]) > 0 and float(e["L"]) > 0):
        raise ConfigError("evans.mesh and evans.L must be positive")


def _model(cfg):
    m = cfg["model"]
    return md.GrowthModel(m["growth"], float(m["rho"]), float(m["sigma"]))


# artifact persistence

def _path(cfg, key):
    return os.path.join(cfg["out"], FILES[key])


def _write_json(path, doc):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _read_artifact(cfg, key, stage):
    path = _path(cfg, key)
    if not os.path.exists(path):
        raise StaleArtifactError(f"{FILES[key]} is missing; rerun upstream stage {stage!r}")
    with open(path) as fh:
        return json.load(fh)


def _check(doc, field_name, expected, stage):
    got = doc.get("inputs", {}).get(field_name)
    if got != expected:
        raise StaleArtifactError(f"{field_name} does not match; rerun upstream stage {stage!r}")


def _config_hash(cfg, *blocks):
    return sha256_of({b: cfg[b] for b in blocks})


def _load_manifold(cfg):
    doc = _read_artifact(cfg, "manifold", "prove-manifold")
    _check(doc, "config_sha256", _config_hash(cfg, "model", "manifold"), "prove-manifold")
    coeffs = mf.ManifoldCoeffs.from_json(doc["coeffs"])
    return coeffs, sha256_of(doc["coeffs"])


def _load_bvp(cfg, coeffs, manifold_hash):
    doc = _read_artifact(cfg, "bvp", "prove-bvp")
    _check(doc, "manifold_sha256", manifold_hash, "prove-bvp")
    _check(doc, "config_sha256", _config_hash(cfg, "model", "bvp"), "prove-bvp")
    x = bv.BvpUnknowns.from_json(doc["solution"])
    prob = bv.BvpProblem(coeffs, x.N, x.nu)
    return prob, x, sha256_of(doc["solution"])


def _load_cert(cfg, key, solution_hash, stage):
    path = _path(cfg, key)
    if not os.path.exists(path):
        return None
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("input_sha256") != solution_hash:
        raise StaleArtifactError(f"{FILES[key]} does not match its solution; rerun {stage!r}")
    return ProofCertificate.from_json(doc)


def _bound_table(title, cert):
    b = cert.bounds
    rows = [("Y0", b.Y0), ("Z0", b.Z0), ("Z1", b.Z1), ("Z2", b.Z2),
            ("r_min", cert.r_interval[0]), ("r_max", cert.r_interval[1]),
            ("certified radius", cert.certified_radius)]
    lines = [title] + [f"  {k:<17} {v:.15e}" for k, v in rows]
    return "\n".join(lines)


# stages

def cmd_prove_manifold(cfg, float_only=False):
    model = _model(cfg)
    mc = cfg["manifold"]
    t0 = time.time()
    prob = mf.ManifoldProblem(model, int(mc["N"]))
    coeffs, history = mf.newton_solve(prob, tol=float(mc["newton_tol"]), max_iter=int(mc["max_iter"]))
    _event("manifold solved", residuals=history, seconds=time.time() - t0)
    doc = {"inputs": {"config_sha256": _config_hash(cfg, "model", "manifold")},
           "coeffs": coeffs.to_json(), "newton_history": history}
    _write_json(_path(cfg, "manifold"), doc)
    if float_only:
        print("manifold: float solution written (certification skipped)")
        return EXIT_OK
    cert = certify_manifold(coeffs)
    _write_json(_path(cfg, "manifold_cert"), cert.to_json())
    _event("manifold certified", radius=cert.certified_radius, seconds=time.time() - t0)
    print(_bound_table("manifold bounds", cert))
    return EXIT_OK


def cmd_prove_bvp(cfg, float_only=False):
    coeffs, mhash = _load_manifold(cfg)
    bc = cfg["bvp"]
    t0 = time.time()
    prob = bv.BvpProblem(coeffs, int(bc["N"]), float(bc["nu"]))
    if bc["seed"] == "file":
        with open(bc["seed_path"]) as fh:
            start, defect = bv.BvpUnknowns.from_json(json.load(fh)), None
    else:
        start, defect = bv.seed_from_shooting(prob)
    x, history = bv.newton_solve_bvp(prob, start, tol=float(bc["newton_tol"]),
                                     max_iter=int(bc["max_iter"]))
    _event("bvp solved", seed_defect=defect, residuals=history, L=x.L, seconds=time.time() - t0)
    doc = {"inputs": {"manifold_sha256": mhash,
                      "config_sha256": _config_hash(cfg, "model", "bvp")},
           "solution": x.to_json(), "newton_history": history, "seed_defect": defect}
    _write_json(_path(cfg, "bvp"), doc)
    print(f"bvp: L = {float(x.L)!r}, theta = ({float(x.theta[0])!r}, {float(x.theta[1])!r})")
    if float_only:
        print("bvp: certification skipped")
        return EXIT_OK
    mcert = _load_cert(cfg, "manifold_cert", mhash, "prove-manifold")
    if mcert is None:
        raise StaleArtifactError("manifold certificate missing; rerun upstream stage 'prove-manifold'")
    cert = certify_bvp(prob, x, mcert.certified_radius, r_star=float(bc["r_star"]),
                       manifold_sha256=mhash)
    _write_json(_path(cfg, "bvp_cert"), cert.to_json())
    _event("bvp certified", radius=cert.certified_radius, seconds=time.time() - t0)
    print(_bound_table("bvp bounds", cert))
    return EXIT_OK


def _cycle(cfg):
    coeffs, mhash = _load_manifold(cfg)
    prob, x, bhash = _load_bvp(cfg, coeffs, mhash)
    return coeffs, prob, x, mhash, bhash


def cmd_prove_twocycle(cfg, float_only=False):
    coeffs, prob, x, mhash, bhash = _cycle(cfg)
    r_uniform = r_manif = r_bvp = None
    if not float_only:
        mcert = _load_cert(cfg, "manifold_cert", mhash, "prove-manifold")
        bcert = _load_cert(cfg, "bvp_cert", bhash, "prove-bvp")
        if mcert is None or bcert is None:
            raise StaleArtifactError("certificates missing; rerun upstream stages without --float-only")
        if bcert.extra.get("manifold_sha256") != mhash:
            raise StaleArtifactError("bvp certificate refers to another manifold; rerun 'prove-bvp'")
        r_manif, r_bvp = mcert.certified_radius, bcert.certified_radius
        mu_u1 = bv.default_mu(prob.model)[3]
        r_uniform = tc.uniform_bound(r_bvp, r_manif, mu_u1)
    cycle = tc.TwoCycle(coeffs, x, r_uniform)
    t = cfg["twocycle"]
    grid = np.linspace(float(t["grid_min"]), float(t["grid_max"]), int(t["grid_n"]))
    res_N, res_M = tc.ide_residual(cycle, grid)
    eig = tc.eigen_translation_check(cycle)
    doc = {"inputs": {"manifold_sha256": mhash, "bvp_sha256": bhash},
           "r_manif": r_manif, "r_bvp": r_bvp, "r_uniform": r_uniform,
           "ide_residual_N": res_N, "ide_residual_M": res_M,
           "translation_mode_defect": eig,
           "n_minus": cycle.n_minus, "n_plus": cycle.n_plus, "L": x.L}
    _write_json(_path(cfg, "twocycle"), doc)
    span = 2 * x.L + 30.0 / prob.model.sigma
    tc.export_profiles(cycle, np.linspace(-span, span, 801), _path(cfg, "profiles"))
    _event("two-cycle assembled", **{k: v for k, v in doc.items() if k != "inputs"})
    print("two-cycle")
    for k in ("r_manif", "r_bvp", "r_uniform", "ide_residual_N", "ide_residual_M",
              "translation_mode_defect"):
        v = doc[k]
        print(f"  {k:<24} {'n/a' if v is None else format(v, '.6e')}")
    return EXIT_OK


def _twocycle_hash(cfg):
    doc = _read_artifact(cfg, "twocycle", "prove-twocycle")
    return doc, sha256_of(doc)


def cmd_evans(cfg, float_only=False):
    coeffs, prob, x, mhash, bhash = _cycle(cfg)
    tdoc, thash = _twocycle_hash(cfg)
    _check(tdoc, "bvp_sha256", bhash, "prove-twocycle")
    _check(tdoc, "manifold_sha256", mhash, "prove-twocycle")
    cycle = tc.TwoCycle(coeffs, x)
    e = cfg["evans"]
    t0 = time.time()
    est = ev.EvansStability(float(e["eps1"]), float(e["eps2"]), float(e["L"]), float(e["mesh"]))
    est.fit(cycle)
    report = est.report()
    report["inputs"] = {"twocycle_sha256": thash}
    report["n_samples"] = int(est.contour_.s.size)
    _write_json(_path(cfg, "evans"), report)
    est.contour_.to_csv(_path(cfg, "contour"))
    _event("evans", seconds=time.time() - t0, **{k: v for k, v in report.items() if k != "inputs"})
    print("evans")
    print(f"  mu        {report['mu']:.6f}")
    print(f"  product   {report['product']:.6f}")
    print(f"  winding   {report['winding']}")
    print(f"  E_L(1)    {report['EL_at_1'][0]:.6e} {report['EL_at_1'][1]:+.6e}i")
    return EXIT_OK


def manifold_surface(coeffs, n_radius=11, n_angle=48):
    """Rows ``(theta1, theta2, x1, x2, x3, x4)`` on a polar grid of the unit disc."""
    r = np.linspace(0.0, 1.0, n_radius)
    a = np.linspace(0.0, 2 * np.pi, n_angle, endpoint=False)
    R, A = np.meshgrid(r, a, indexing="ij")
    t1, t2 = (R * np.cos(A)).ravel(), (R * np.sin(A)).ravel()
    P = mf.eval_P(coeffs.a, (t1, t2))
    return np.column_stack([t1, t2, P.T])


def cmd_export(cfg, float_only=False):
    coeffs, prob, x, mhash, bhash = _cycle(cfg)
    cycle = tc.TwoCycle(coeffs, x)
    span = 2 * x.L + 30.0 / prob.model.sigma
    tc.export_profiles(cycle, np.linspace(-span, span, 801), _path(cfg, "profiles"))
    surf = manifold_surface(coeffs)
    with open(_path(cfg, "surface"), "w") as fh:
        fh.write("theta1,theta2,x1,x2,x3,x4\n")
        for row in surf:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    written = [FILES["profiles"], FILES["surface"]]
    if os.path.exists(_path(cfg, "evans")):
        tdoc, thash = _twocycle_hash(cfg)
        with open(_path(cfg, "evans")) as fh:
            edoc = json.load(fh)
        _check(edoc, "twocycle_sha256", thash, "evans")
        written.append(FILES["contour"])
    print("export: " + ", ".join(written))
    return EXIT_OK


def cmd_all(cfg, float_only=False):
    for fn in (cmd_prove_manifold, cmd_prove_bvp, cmd_prove_twocycle, cmd_evans, cmd_export):
        code = fn(cfg, float_only)
        if code != EXIT_OK:
            return code
    return EXIT_OK


COMMANDS = {
    "prove-manifold": cmd_prove_manifold,
    "prove-bvp": cmd_prove_bvp,
    "prove-twocycle": cmd_prove_twocycle,
    "evans": cmd_evans,
    "export": cmd_export,
    "all": cmd_all,
}


def build_parser():
    p = argparse.ArgumentParser(prog="idecycle", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="JSON configuration file")
    p.add_argument("--out", help="output directory (overrides the configuration)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="K=V",
                   help="override a configuration entry, e.g. --set model.rho=2.3")
    p.add_argument("--threads", type=int, default=None, help="BLAS thread limit")
    p.add_argument("--float-only", action="store_true", help="skip interval certification")
    p.add_argument("--log-level", default="WARNING", help="level of the JSON log on stderr")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(_JsonLines())
    log.handlers[:] = [handler]
    log.setLevel(args.log_level.upper())
    try:
        cfg = load_config(args.config, args.overrides, args.out)
        if cfg["model"]["growth"] != "logistic" and not args.float_only \
                and args.command not in ("evans", "export"):
            raise ConfigError("certification is available for the logistic model only; "
                              "use --float-only")
        with threadpool_limits(limits=args.threads):
            return COMMANDS[args.command](cfg, args.float_only)
    except (ConfigError, DomainError, UnsupportedRigorError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StaleArtifactError as exc:
        print(f"stale artifact: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ProofError as exc:
        print(f"proof failed at stage {exc.stage}: {exc}", file=sys.stderr)
        return EXIT_PROOF
    except (SolverError, InconclusiveError) as exc:
        print(f"solver failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
