"""Command-line entry point.

One JSON config document per run with a command-specific section; outputs
land in a directory together with a manifest that is written last (its
presence marks a completed run).  Exit codes: 0 success, 1 usage/config
error, 2 divergence, 3 verification failure, 4 contraction failure.

All randomness flows from one top-level seed through numpy's splittable
SeedSequence; sub-seeds are recorded in the reports.  Results are
byte-identical for identical config + seed regardless of the thread cap
(reductions are deterministic); --threads only caps library worker pools.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time

__all__ = ["main"]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DIVERGENCE = 2
EXIT_VERIFY = 3
EXIT_CONTRACT = 4


class ConfigError(ValueError):
    pass


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _load_config(path: str) -> dict:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    return doc


def _initial_pair(spec: dict, n_max: int, seeds):
    from .fields import Gauge, SpectralPair, make_field, random_field
    kind = spec.get("type", "random")
    if kind == "random":
        s = float(spec.get("s", 1.0))
        amp = float(spec.get("amplitude", 0.1))
        su, sv = seeds
        return SpectralPair(random_field(su, n_max, s, amp),
                            random_field(sv, n_max, s, amp),
                            Gauge.INTERACTION, 0.0), (su, sv)
    if kind == "modes":
        u = make_field(n_max, [(int(k), complex(re, im)) for k, re, im in spec["u"]])
        v = make_field(n_max, [(int(k), complex(re, im)) for k, re, im in spec["v"]])
        return SpectralPair(u, v, Gauge.INTERACTION, 0.0), None
    raise ConfigError(f"unknown initial type {kind!r}")


def _write_manifest(outdir: str, command: str, config_path: str, seed: int,
                    t_start: float) -> None:
    from . import __version__
    manifest = {
        "command": command,
        "config_path": os.path.abspath(config_path),
        "output_dir": os.path.abspath(outdir),
        "seed": seed,
        "tool_version": __version__,
        "wall_time_s": time.monotonic() - t_start,
    }
    with open(os.path.join(outdir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=1)


def _summary(status: str, **kv) -> None:
    parts = [f"status={status}"]
    parts += [f"{k}={v}" for k, v in kv.items()]
    print(" ".join(parts))


def _seed_pair(seed: int, n: int):
    import numpy as np
    ss = np.random.SeedSequence(seed)
    return [int(s.generate_state(1)[0]) for s in ss.spawn(n)]


# ---------------------------------------------------------------------------
# commands

def cmd_simulate(cfg: dict, outdir: str, seed: int) -> int:
    from .dynamics import (SimulationConfig, StabilityError, DivergenceError,
                           integrate, save_trajectory, stability_bound)
    sec = cfg.get("simulate")
    if not isinstance(sec, dict):
        raise ConfigError("missing 'simulate' section")
    n_max = int(sec["n_max"])
    t_end = float(sec["t_end"])
    if t_end <= 0:
        raise ConfigError("t_end must be positive")
    initial, sub = _initial_pair(sec.get("initial", {}), n_max, _seed_pair(seed, 2))
    bound = stability_bound(n_max, initial)
    dt = sec.get("dt")
    dt = bound if dt is None else float(dt)
    if dt > bound:
        raise ConfigError(f"dt = {dt:.6g} violates the stability rule; "
                          f"computed bound is {bound:.6g}")
    sim = SimulationConfig(n_max=n_max, dt=dt, t_end=t_end, initial=initial,
                           n_cut=sec.get("n_cut"),
                           diagnostic_every=int(sec.get("diagnostic_every", 1)),
                           record_every=int(sec.get("record_every", 1)))
    try:
        traj, diags = integrate(sim)
    except DivergenceError as exc:
        _summary("fail", command="simulate", error="divergence", step=exc.step)
        return EXIT_DIVERGENCE
    save_trajectory(traj, diags, outdir)
    drift = abs(diags[-1].energy_cal - diags[0].energy_cal) / max(diags[0].energy_cal, 1e-300)
    import numpy as np
    n_steps = max(1, int(np.ceil(t_end / dt - 1e-9)))
    _summary("ok", command="simulate", steps=n_steps, energy_drift=f"{drift:.3e}")
    return EXIT_OK


def cmd_verify(cfg: dict, outdir: str, seed: int) -> int:
    from .verify import split_identities, dbp_identity
    from .dynamics import SimulationConfig, integrate
    sec = cfg.get("verify")
    if not isinstance(sec, dict):
        raise ConfigError("missing 'verify' section")
    suite = sec.get("suite", "all")
    if suite not in ("identities", "residuals", "all"):
        raise ConfigError(f"unknown suite {suite!r}")
    n_max = int(sec.get("n_max", 16))
    n_cut = int(sec.get("n_cut", max(1, n_max // 2)))
    rows = []
    ok = True
    report: dict = {"seed": seed, "suite": suite, "checks": []}
    if suite in ("identities", "all"):
        rep = split_identities(n_max, n_cut,
                               tuple(sec.get("t_values", (0.0, 0.37, 2.0))),
                               int(sec.get("samples", 10)), seed,
                               corrupt=bool(sec.get("inject_corruption", False)))
        for c in rep.checks:
            rows.append(("identities", c.name, c.max_rel_err, c.tol, c.passed))
            report["checks"].append({"suite": "identities", "name": c.name,
                                     "max_rel_err": c.max_rel_err, "tol": c.tol,
                                     "passed": c.passed})
        ok = ok and rep.all_passed
    if suite in ("residuals", "all"):
        # the second form's bracket is very smooth, so its centered-difference
        # residual reaches the dt^2 regime only at small truncations
        rn_max = int(sec.get("residual_n_max", 8))
        rn_cut = int(sec.get("residual_n_cut", max(1, rn_max // 2)))
        initial, _ = _initial_pair(sec.get("initial", {"type": "random",
                                                       "s": 1.0, "amplitude": 0.25}),
                                   rn_max, _seed_pair(seed + 1, 2))
        dt = float(sec.get("dt", 5e-4))
        steps = int(sec.get("steps", 16))
        lo_band, hi_band = sec.get("ratio_band", (3.5, 4.5))
        residuals = {}
        for h in (dt, dt / 2):
            traj, _ = integrate(SimulationConfig(n_max=rn_max, dt=h, t_end=steps * dt,
                                                 initial=initial))
            rep = dbp_identity(traj, rn_cut)
            for c in rep.checks:
                residuals.setdefault(c.name, []).append(c.max_rel_err)
        for form, (coarse, fine) in residuals.items():
            ratio = coarse / max(fine, 1e-300)
            passed = lo_band <= ratio <= hi_band
            ok = ok and passed
            rows.append(("residuals", form, ratio, f"[{lo_band},{hi_band}]", passed))
            report["checks"].append({"suite": "residuals", "name": form,
                                     "ratio": ratio, "coarse": coarse, "fine": fine,
                                     "band": [lo_band, hi_band], "passed": passed})
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "verify_report.json"), "w") as fh:
        json.dump(report, fh, indent=1)
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["suite", "check", "value", "criterion", "passed"])
    for row in rows:
        w.writerow(row)
    with open(os.path.join(outdir, "verify_summary.csv"), "w", newline="") as fh:
        fh.write(buf.getvalue())
    _summary("ok" if ok else "fail", command="verify", suite=suite,
             checks=len(rows), failed=sum(1 for r in rows if not r[-1]))
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_contract(cfg: dict, outdir: str, seed: int) -> int:
    from .contraction import (ContractionConfig, estimate_lipschitz,
                              solve_by_contraction, solver_report)
    sec = cfg.get("contract")
    if not isinstance(sec, dict):
        raise ConfigError("missing 'contract' section")
    n_max = int(sec["n_max"])
    ccfg = ContractionConfig(
        n_max=n_max, n_cut=int(sec["n_cut"]), t_star=float(sec["t_star"]),
        radius_a=float(sec.get("radius_a", 1.0)), s=float(sec.get("s", 1.0)),
        which=sec.get("which", "first_form"), m_grid=int(sec.get("m_grid", 65)),
        tol=float(sec.get("tol", 1e-10)), max_iter=int(sec.get("max_iter", 60)))
    initial, _ = _initial_pair(sec.get("initial", {}), n_max, _seed_pair(seed, 2))
    result = solve_by_contraction(initial, ccfg)
    lip = None
    n_lip = int(sec.get("lipschitz_samples", 0))
    if n_lip > 0 and not result.escaped:
        lip = estimate_lipschitz(initial, ccfg, n_lip, seed + 7)
    os.makedirs(outdir, exist_ok=True)
    doc = solver_report(result, ccfg, lip)
    doc["seed"] = seed
    doc["regime"] = result.regime
    doc["deltas"] = list(result.deltas)
    with open(os.path.join(outdir, "contract_report.json"), "w") as fh:
        json.dump(doc, fh, indent=1)
    status_ok = result.converged and not result.escaped
    _summary("ok" if status_ok else "fail", command="contract",
             iterations=result.iterations, final_delta=f"{result.final_delta:.3e}",
             escaped=result.escaped)
    return EXIT_OK if status_ok else EXIT_CONTRACT


def cmd_bounds(cfg: dict, outdir: str, seed: int) -> int:
    from .verify import lemma_bound
    sec = cfg.get("bounds")
    if not isinstance(sec, dict):
        raise ConfigError("missing 'bounds' section")
    runs = sec.get("runs")
    if runs is None:
        runs = [sec]
    rows = []
    docs = []
    any_fail = False
    for i, run in enumerate(runs):
        n_values = tuple(int(n) for n in run.get("n_values", ()))
        if len(n_values) < 4:
            raise ConfigError("bounds runs need at least 4 cutoff values for the fit")
        try:
            est = lemma_bound(run["op"], float(run.get("s", 0.0)),
                              run.get("extra"), n_values,
                              int(run.get("samples", 20)), seed + i)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        verdict = est.verdict
        expect = run.get("expect")
        if verdict == "ok" and expect is not None:
            lo = float(expect["exponent"]) - float(expect["tol"])
            hi = float(expect["exponent"]) + float(expect["tol"])
            if not (lo <= est.fitted_exponent <= hi):
                verdict = "fail"
                any_fail = True
        for n in est.n_values:
            rows.append([est.op.value, est.s, json.dumps(est.extra, sort_keys=True),
                         n, _fmt(est.sup_ratio[n]), _fmt(est.fitted_exponent),
                         _fmt(est.fit_residual), verdict])
        docs.append({"op": est.op.value, "s": est.s, "extra": est.extra,
                     "n_values": list(est.n_values),
                     "sup_ratio": {str(n): est.sup_ratio[n] for n in est.n_values},
                     "fitted_exponent": est.fitted_exponent,
                     "fit_residual": est.fit_residual, "samples": est.samples,
                     "seed": est.seed, "verdict": verdict})
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "bounds.json"), "w") as fh:
        json.dump({"seed": seed, "runs": docs}, fh, indent=1)
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["op", "s", "extra", "n", "sup_ratio", "fitted_exponent",
                "fit_residual", "verdict"])
    w.writerows(rows)
    with open(os.path.join(outdir, "bounds.csv"), "w", newline="") as fh:
        fh.write(buf.getvalue())
    _summary("ok" if not any_fail else "fail", command="bounds", runs=len(docs),
             failed=sum(1 for d in docs if d["verdict"] == "fail"))
    return EXIT_OK if not any_fail else EXIT_VERIFY


def cmd_converge(cfg: dict, outdir: str, seed: int) -> int:
    from .dynamics import SimulationConfig, convergence_study
    sec = cfg.get("converge")
    if not isinstance(sec, dict):
        raise ConfigError("missing 'converge' section")
    n_list = tuple(int(n) for n in sec.get("n_list", ()))
    if not n_list:
        raise ConfigError("empty n_list")
    n_max = int(sec["n_max"])
    initial, _ = _initial_pair(sec.get("initial", {"type": "random", "s": 2.0,
                                                   "amplitude": 0.1}),
                               n_max, _seed_pair(seed, 2))
    base = SimulationConfig(n_max=n_max, dt=float(sec["dt"]),
                            t_end=float(sec["t_end"]), initial=initial,
                            diagnostic_every=10 ** 9, record_every=10 ** 9)
    report = convergence_study(base, n_list)
    decreasing = all(b < a for a, b in zip(report.errors, report.errors[1:]))
    require = bool(sec.get("require_decreasing", True))
    ok = decreasing or not require
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "converge.json"), "w") as fh:
        json.dump({"seed": seed, "n_values": list(report.n_values),
                   "errors": list(report.errors), "ref_cutoff": report.ref_cutoff,
                   "t_end": report.t_end, "decreasing": decreasing}, fh, indent=1)
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["n", "error"])
    for n, e in zip(report.n_values, report.errors):
        w.writerow([n, _fmt(e)])
    with open(os.path.join(outdir, "converge.csv"), "w", newline="") as fh:
        fh.write(buf.getvalue())
    _summary("ok" if ok else "fail", command="converge",
             errors=",".join(f"{e:.3e}" for e in report.errors))
    return EXIT_OK if ok else EXIT_VERIFY


_COMMANDS = {
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "contract": cmd_contract,
    "bounds": cmd_bounds,
    "converge": cmd_converge,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ckdv",
        description="Spectral Galerkin solver and operator checks for the "
                    "coupled KdV system")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="JSON config file")
    parser.add_argument("--out", default="ckdv-out", help="output directory")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config's top-level seed")
    parser.add_argument("--threads", type=int, default=None,
                        help="cap library worker pools (determinism holds regardless)")
    parser.add_argument("--quiet", action="store_true",
                        help="suppress progress messages on stderr")
    args = parser.parse_args(argv)
    if args.threads is not None:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(max(1, args.threads))
    t_start = time.monotonic()
    try:
        cfg = _load_config(args.config)
        if cfg.get("command") not in (None, args.command):
            raise ConfigError(f"config is for command {cfg.get('command')!r}, "
                              f"not {args.command!r}")
        seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
        os.makedirs(args.out, exist_ok=True)
        if not args.quiet:
            print(f"[ckdv] {args.command} -> {args.out} (seed {seed})",
                  file=sys.stderr)
        code = _COMMANDS[args.command](cfg, args.out, seed)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        _summary("fail", command=args.command, error="config")
        return EXIT_CONFIG
    except (KeyError, TypeError, ValueError) as exc:
        print(f"error: invalid config: {exc!r}", file=sys.stderr)
        _summary("fail", command=args.command, error="config")
        return EXIT_CONFIG
    _write_manifest(args.out, args.command, args.config, seed, t_start)
    return code


if __name__ == "__main__":
    sys.exit(main())
