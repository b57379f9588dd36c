"""Command line entry point: ``vortexlab <subcommand> [--config FILE] [--out DIR] ...``.

Every subcommand writes a JSON report (sorted keys, shortest round-trip
floats) into the output directory and prints it.  Failures print an error
object and exit nonzero.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import os
import re
import sys
import traceback
from pathlib import Path

SUBCOMMANDS = ("solve", "energy", "gaugefix", "verify-bounds", "sobolev-check", "sequence", "constants")

DEFAULTS = {
    "lattice": {"N": "16", "L": "1.0", "extent": ""},
    "model": {"representation": "u1:1", "tau": "0", "twist": ""},
    "solver": {
        "eps": "1e-6",
        "max_iter": "20000",
        "objective": "alternate",
        "check_every": "10",
        "grad_tol": "1e-9",
        "init": "smooth",
        "seed": "0",
    },
    "input": {"snapshot": ""},
    "gaugefix": {"tol": "1e-10", "max_iter": "100", "trials": "0"},
    "sobolev": {"trials": "1000", "N": "8", "kmax": "2", "safety": "1.25"},
    "constants": {"samples": "100000", "safety": "1.25"},
    "sequence": {"manifest": "", "synthetic": "", "N": "32", "epsilon": "1.0"},
}


class ConfigError(ValueError):
    pass


_NUM = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)?\s*\*?\s*(pi)?\s*$")


def parse_number(text: str) -> float:
    """Float, optionally times pi: '3', '-2.5e-1', '6*pi', '2 pi', 'pi'."""
    m = _NUM.match(text)
    if not m or (m.group(1) is None and m.group(2) is None):
        raise ConfigError(f"not a number: {text!r}")
    val = float(m.group(1)) if m.group(1) is not None else 1.0
    return val * math.pi if m.group(2) else val


def parse_twist(text: str):
    from .fields import TwistData

    entries = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        key, _, val = item.partition("=")
        key = key.strip()
        if not re.fullmatch(r"m[0-3][0-3]", key) or key[1] >= key[2]:
            raise ConfigError(f"bad twist entry {item!r}; use m01=1, m23=2, ...")
        entries[key] = int(val)
    return TwistData.from_planes(**entries)


def load_config(path=None, overrides=None) -> configparser.ConfigParser:
    cfg = configparser.ConfigParser()
    cfg.optionxform = str
    cfg.read_dict(DEFAULTS)
    if path:
        if not Path(path).exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            cfg.read(path)
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from None
    for (section, key), val in (overrides or {}).items():
        cfg[section][key] = str(val)
    return cfg


def config_dict(cfg) -> dict:
    return {s: dict(cfg[s]) for s in cfg.sections()}


class Run:
    """Parsed configuration plus derived objects."""

    def __init__(self, cfg):
        from .algebra import CentralParameter, parse_representation
        from .lattice import KaehlerTorus

        self.cfg = cfg
        lat = cfg["lattice"]
        try:
            self.N = int(lat["N"])
            self.L = parse_number(lat["L"])
            ext = tuple(int(v) for v in lat["extent"].split(",")) if lat["extent"].strip() else None
            self.torus = KaehlerTorus(self.N, self.L, ext)
            self.rep = parse_representation(cfg["model"]["representation"])
            vals = tuple(parse_number(v) for v in cfg["model"]["tau"].split(","))
            self.tau = CentralParameter(self.rep, vals)
            self.twist = parse_twist(cfg["model"]["twist"])
            s = cfg["solver"]
            self.seed = int(s["seed"])
            self.eps = float(s["eps"])
        except (ValueError, KeyError) as exc:
            raise ConfigError(str(exc)) from None


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, default=_default, allow_nan=True) + "\n"


def _default(o):
    import numpy as np

    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not serialisable: {type(o)}")


# ---------------------------------------------------------------------------
# snapshots


def initial_pair(torus, rep, twist, seed: int, kind: str = "smooth"):
    """Starting pair: A = 0 and phi either 0, a smooth field constant along z2, or noise."""
    import numpy as np

    from .fields import Pair, band_limited
    from .lattice import KaehlerTorus

    rng = np.random.default_rng(seed)
    A = np.zeros((4,) + torus.shape + (rep.group.dim,))
    if kind == "zero":
        return Pair(torus, rep, A, np.zeros(torus.shape + (rep.dim,), complex), twist)
    if kind == "random":
        phi = rng.standard_normal(torus.shape + (rep.dim,)) + 1j * rng.standard_normal(torus.shape + (rep.dim,))
        return Pair(torus, rep, A, phi, twist)
    if kind != "smooth":
        raise ConfigError(f"unknown init {kind!r}")
    slab = KaehlerTorus(torus.N, torus.L, torus.shape[:2] + (1, 1))
    g = band_limited(slab, (rep.dim,), 1, rng) + 1j * band_limited(slab, (rep.dim,), 1, rng)
    g = g / max(np.abs(g).max(), 1e-300)
    base = np.ones(rep.dim) / math.sqrt(rep.dim)
    phi = np.broadcast_to(base + 0.25 * g, torus.shape + (rep.dim,)).astype(complex)
    return Pair(torus, rep, A, phi, twist)


def write_snapshot(directory, pair, tau):
    from .lattice import write_form

    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_form(d / "A.vxlf", pair.A_form)
    write_form(d / "phi.vxlf", pair.phi_form)
    meta = {
        "representation": getattr(pair.rep, "descriptor", None),
        "twist": [list(r) for r in pair.twist.m],
        "tau": list(tau.values),
    }
    (d / "meta.json").write_text(dumps(meta))


def read_snapshot(directory):
    from .algebra import CentralParameter, parse_representation
    from .fields import Pair, TwistData
    from .lattice import read_form

    d = Path(directory)
    if not (d / "meta.json").exists():
        raise ConfigError(f"not a snapshot directory: {directory}")
    meta = json.loads((d / "meta.json").read_text())
    rep = parse_representation(meta["representation"])
    A = read_form(d / "A.vxlf")
    phi = read_form(d / "phi.vxlf")
    twist = TwistData(tuple(tuple(r) for r in meta["twist"]))
    pair = Pair(A.torus, rep, A.data, phi.data[0], twist)
    return pair, CentralParameter(rep, tuple(meta["tau"]))


def _snapshot_or_solve(run, out):
    snap = run.cfg["input"]["snapshot"].strip()
    if snap:
        return read_snapshot(snap)
    res = _solve(run, out, write=False)
    return res.pair, run.tau


# ---------------------------------------------------------------------------
# subcommands


def _solve(run, out, write=True):
    from .energy import MinimizeOptions, minimize

    s = run.cfg["solver"]
    opts = MinimizeOptions(
        max_iter=int(s["max_iter"]),
        eps=run.eps,
        objective=s["objective"],
        check_every=int(s["check_every"]),
        grad_tol=float(s["grad_tol"]),
    )
    p0 = initial_pair(run.torus, run.rep, run.twist, run.seed, s["init"])
    return minimize(p0, run.tau, opts)


def cmd_solve(run, out):
    import numpy as np

    from . import plotting
    from .analysis import existence_threshold, phi_l2_identity
    from .fields import ymh_density
    from .lattice import write_csv

    res = _solve(run, out)
    pair = res.pair
    thr = existence_threshold(pair, run.tau)
    linf = float(np.sqrt(np.max(np.sum(np.abs(pair.phi) ** 2, axis=-1))))
    report = {
        "status": res.status,
        "iterations": res.iterations,
        "residuals": res.residuals,
        "gradient_norm": res.gradient_norm,
        "energy": res.report.as_dict(),
        "threshold": thr,
        "branch": "phi_zero" if thr <= 0 else "vortex",
        "phi_linf": linf,
        "warnings": res.warnings,
    }
    if res.status == "vortex" and abs(run.tau.weight) > 0:
        report["phi_l2_identity"] = phi_l2_identity(pair, run.tau, eps=run.eps).as_dict()
    (out / "trace.jsonl").write_text(res.trace_jsonl())
    write_snapshot(out / "fields", pair, run.tau)
    dens = ymh_density(pair, run.tau)
    write_csv(out / "density.csv", pair.torus.scalar(dens))
    plotting.density_slice(dens, out / "density.png", h=pair.torus.h)
    if res.trace:
        plotting.convergence(res.trace, out / "convergence.png")
    return report


def cmd_energy(run, out):
    from .energy import ymh_total
    from .fields import vortex_residuals

    pair, tau = _snapshot_or_solve(run, out)
    return {"energy": ymh_total(pair, tau).as_dict(), "residuals": vortex_residuals(pair, tau).as_dict()}


def cmd_gaugefix(run, out):
    import numpy as np

    from . import plotting
    from .fields import ymh_density
    from .gaugefix import coulomb_gauge, estimate_coulomb_constant

    g = run.cfg["gaugefix"]
    pair, tau = _snapshot_or_solve(run, out)
    res = coulomb_gauge(pair, tol=float(g["tol"]), max_iter=int(g["max_iter"]))
    inv = float(np.max(np.abs(ymh_density(res.pair, tau) - ymh_density(pair, tau))))
    report = {"coulomb": res.as_dict(), "density_invariance": inv}
    trials = int(g["trials"])
    if trials:
        est = estimate_coulomb_constant(pair.torus, pair.rep, trials=trials, seed=run.seed)
        report["constant"] = est
        plotting.ratio_histogram(est["ratios"], est["constant"], out / "coulomb_ratios.png", "||A||_{L^2_1} / ||F||")
    write_snapshot(out / "fields", res.pair, tau)
    return report


def cmd_verify_bounds(run, out):
    from .algebra import AdmissibilityError
    from .analysis import phi_l2_identity, phi_pointwise_bound_check
    from .gaugefix import coulomb_gauge, estimate_coulomb_constant, local_energy_bound_check

    pair, tau = _snapshot_or_solve(run, out)
    report = {
        "phi_l2_identity": phi_l2_identity(pair, tau, eps=run.eps).as_dict(),
        "pointwise": phi_pointwise_bound_check(pair, tau, eps=run.eps).as_dict(),
    }
    fixed = coulomb_gauge(pair, tol=1e-10, max_iter=200).pair
    est = estimate_coulomb_constant(pair.torus, pair.rep, trials=int(run.cfg["gaugefix"]["trials"]) or 10, seed=run.seed)
    try:
        report["local_bound"] = local_energy_bound_check(fixed, tau, est["constant"]).as_dict()
    except AdmissibilityError as exc:
        report["local_bound"] = {"error": str(exc)}
    report["coulomb_constant"] = est["constant"]
    return report


def cmd_sobolev(run, out):
    from .analysis import SobolevIndex, embedding_check, multiplication_check
    from .lattice import KaehlerTorus

    s = run.cfg["sobolev"]
    torus = KaehlerTorus(int(s["N"]), run.L)
    kw = dict(trials=int(s["trials"]), seeds=(run.seed + 1, run.seed + 2), torus=torus, kmax=int(s["kmax"]), safety=float(s["safety"]))
    emb = embedding_check(SobolevIndex(1, 2), SobolevIndex(0, 4), **kw)
    mul = multiplication_check(SobolevIndex(1, 2), SobolevIndex(1, 2), SobolevIndex(0, 2), **kw)
    return {"embedding": emb.as_dict(), "multiplication": mul.as_dict()}


def cmd_sequence(run, out):
    from . import plotting
    from .compactness import ball_masses, bubbling_family, density_measure, dyadic_radii, sequence_limit
    from .lattice import KaehlerTorus, write_csv

    s = run.cfg["sequence"]
    eps = float(s["epsilon"])
    if s["manifest"].strip():
        base = Path(s["manifest"]).parent
        entries = [ln.strip() for ln in Path(s["manifest"]).read_text().splitlines() if ln.strip() and not ln.startswith("#")]
        loaded = [read_snapshot(base / e) for e in entries]
        seq = [p for p, _ in loaded]
        tau = loaded[0][1]
    elif s["synthetic"].strip():
        from .algebra import CentralParameter, parse_representation

        torus = KaehlerTorus(int(s["N"]), run.L)
        kind = s["synthetic"].strip()
        if kind == "single":
            bumps = [((0.5 * run.L,) * 4, 1)]
        elif kind == "double":
            bumps = [((0.25 * run.L,) * 4, 1), ((0.75 * run.L,) * 4, 2)]
        else:
            raise ConfigError(f"unknown synthetic family {kind!r}")
        seq = bubbling_family(torus, bumps, seed=run.seed)
        rep = parse_representation("u1:1")
        tau = CentralParameter.scalar(rep, 0.0)
    else:
        raise ConfigError("sequence needs [sequence] manifest or synthetic")
    ideal = sequence_limit(seq, tau, eps)
    last = density_measure(ideal.pair, tau)
    write_csv(out / "density_last.csv", last.torus.scalar(last.density))
    radii = dyadic_radii(last.torus)
    profiles = []
    for point, n in ideal.atoms:
        site = tuple(int(round(x / last.torus.h)) % e for x, e in zip(point, last.torus.shape))
        profiles.append((f"n={n}", radii, [float(ball_masses(last, r)[0][site]) for r in radii]))
    if profiles:
        plotting.ball_mass_profiles(profiles, out / "ball_masses.png")
        index = tuple(int(round(ideal.atoms[0][0][i] / last.torus.h)) % last.torus.shape[i] for i in (2, 3))
    else:
        index = (0, 0)
    plotting.density_slice(last.density, out / "density_last.png", h=last.torus.h, index=index)
    return {"ideal_pair": ideal.as_dict(), "frames": len(seq)}


def cmd_constants(run, out):
    from .algebra import bound_violations, estimate_bound_constant

    c = run.cfg["constants"]
    n = int(c["samples"])
    est = estimate_bound_constant(run.rep, run.tau, samples=n, seed=run.seed, safety=float(c["safety"]))
    viol = bound_violations(run.rep, run.tau, est, samples=n, seed=run.seed + 1)
    return {"constant": est, "violations": viol, "samples": n, "seeds": [run.seed, run.seed + 1]}


COMMANDS = {
    "solve": cmd_solve,
    "energy": cmd_energy,
    "gaugefix": cmd_gaugefix,
    "verify-bounds": cmd_verify_bounds,
    "sobolev-check": cmd_sobolev,
    "sequence": cmd_sequence,
    "constants": cmd_constants,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vortexlab", description="Lattice vortex laboratory on the flat Kaehler 4-torus.")
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", help="INI-style configuration file")
    ap.add_argument("--out", default="vortexlab-out", help="output directory")
    ap.add_argument("--seed", type=int, help="override [solver] seed")
    ap.add_argument("--target-eps", type=float, help="override [solver] eps")
    ap.add_argument("--threads", type=int, help="worker threads (also VORTEXLAB_THREADS)")
    ap.add_argument("--tol", type=float, help="gaugefix tolerance")
    ap.add_argument("--max-iter", type=int, help="gaugefix iteration cap")
    ap.add_argument("--snapshot", help="input snapshot directory")
    return ap


def _set_threads(n):
    if n:
        os.environ["VORTEXLAB_THREADS"] = str(n)
    n = os.environ.get("VORTEXLAB_THREADS")
    if n and "jax" not in sys.modules:
        flag = f"--xla_cpu_multi_thread_eigen={'true' if int(n) > 1 else 'false'}"
        os.environ["XLA_FLAGS"] = (os.environ.get("XLA_FLAGS", "") + " " + flag).strip()
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(int(n))


def run(subcommand: str, cfg, out) -> dict:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    r = Run(cfg)
    report = COMMANDS[subcommand](r, out)
    report = {"subcommand": subcommand, "seed": r.seed, "config": config_dict(cfg), **report}
    (out / "report.json").write_text(dumps(report))
    return report


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _set_threads(args.threads)
    overrides = {}
    if args.seed is not None:
        overrides[("solver", "seed")] = args.seed
    if args.target_eps is not None:
        overrides[("solver", "eps")] = args.target_eps
    if args.tol is not None:
        overrides[("gaugefix", "tol")] = args.tol
    if args.max_iter is not None:
        overrides[("gaugefix", "max_iter")] = args.max_iter
    if args.snapshot:
        overrides[("input", "snapshot")] = args.snapshot
    try:
        cfg = load_config(args.config, overrides)
        report = run(args.subcommand, cfg, args.out)
    except Exception as exc:  # report every failure as JSON
        err = {
            "subcommand": args.subcommand,
            "error": type(exc).__name__,
            "message": str(exc),
            "kind": "config" if isinstance(exc, ConfigError) else "runtime",
            "traceback": traceback.format_exc().splitlines()[-3:],
        }
        try:
            Path(args.out).mkdir(parents=True, exist_ok=True)
            (Path(args.out) / "error.json").write_text(dumps(err))
        except OSError:
            pass
        sys.stdout.write(dumps(err))
        return 2 if isinstance(exc, ConfigError) else 1
    sys.stdout.write(dumps(report))
    return 0


if __name__ == "__main__":
    sys.exit(main())
