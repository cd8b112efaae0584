"""Command line entry point.

``adhesion run <config> --out <dir>`` executes a scenario and writes
``trajectories.csv``, ``shock_<t>.svg``, ``report.json`` and
``manifest.json``; ``adhesion verify <suite> --seed <n>`` runs a seeded
property suite.  Exit codes: 0 ok, 1 invariant failure, 2 configuration
error.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import (
    ConfigError,
    ScenarioConfig,
    TimeSpec,
    build_model,
    initial_potential,
    load_config,
)

__all__ = ["CSV_VERSION", "main", "run_scenario"]

CSV_VERSION = 1
EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

log = logging.getLogger("adhesion")


def _dumps(obj) -> str:
    from .suites import _plain

    return json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n"


def _time_label(t: float) -> str:
    return repr(float(t)).replace("-", "m")


def _trajectories_csv(trajs, dim: int) -> str:
    buf = io.StringIO()
    buf.write(f"# adhesion trajectories v{CSV_VERSION}: one row per particle and time sample; "
              "on_shock is 1 once the particle has reached a shock\n")
    cols = ["t", "particle_id"] + [f"x{i}" for i in range(dim)] + [f"v{i}" for i in range(dim)] + ["on_shock"]
    buf.write(",".join(cols) + "\n")
    for pid, tr in enumerate(trajs):
        for t, x, v, m in zip(tr.times, tr.positions, tr.velocities, tr.merge_flags):
            row = [repr(float(t)), str(pid)] + [repr(float(a)) for a in x] + [repr(float(a)) for a in v]
            buf.write(",".join(row + ["1" if m else "0"]) + "\n")
    return buf.getvalue()


def _shock_svg(cfg: ScenarioConfig, model, t: float, trajs) -> str:
    from .limit_potential import LocalLinearModel
    from .render import Scene, render_svg
    from .shock_geometry import family_diagram, shock_diagram

    if isinstance(model, LocalLinearModel):
        tau = t - model.t_star
        cx = shock_diagram(model, tau)
        origin = model.x_star
    else:
        R = 2.0 * max(float(np.linalg.norm(m.momentum)) for m in model.members) * max(abs(t), 1.0) + 1.0
        cx = family_diagram(model, t, (-R, R, -R, R))
        origin = np.zeros(2)
    particles = []
    for tr in trajs:
        if tr.times[0] <= t <= tr.times[-1]:
            k = int(np.argmin(np.abs(tr.times - t)))
            particles.append((tr.positions[k] - origin, tr.velocities[k]))
    return render_svg(Scene.from_complex(cx, particles))


def _report(cfg: ScenarioConfig, model, trajs, step: float, tol: float | None) -> tuple[dict, list]:
    """Kind-specific results and the list of violated invariants."""
    from .limit_potential import a3_shock_halfplane, a3_tangent_check

    rep: dict = {"kind": cfg.kind, "name": cfg.name, "step": step,
                 "time": {"t0": cfg.time.t0, "T": cfg.time.T}}
    rep["particles"] = [{"id": i, "start": tr.positions[0], "end": tr.end, "merge_time": tr.merge_time}
                        for i, tr in enumerate(trajs)]
    failures: list[str] = []
    if cfg.kind == "HopfLax1D":
        rep["shocks_at_T"] = model.find_shocks_1d(cfg.time.T) if cfg.time.T > 0 else []
    elif cfg.kind == "LocalModel":
        rep.update(_local_model_report(model, cfg))
    elif cfg.kind == "FiniteMinFamily":
        res = 0.0
        for tr in trajs:
            for t, x in zip(tr.times, tr.positions):
                res = max(res, model.hj_residual(x, t))
        bound = 1e-9 if tol is None else tol
        rep["max_hj_residual"] = res
        if res > bound:
            failures.append(f"branches solve the Hamilton-Jacobi equation (residual {res:.3e} > {bound:.1e})")
    elif cfg.kind == "A3":
        tc = a3_tangent_check(model, 1e-6 if tol is None else tol)
        H = a3_shock_halfplane(model)
        inside = all(H.contains(model.local_coords(x, t))
                     for tr in trajs for x, t in zip(tr.positions, tr.times) if t > model.t_star
                     and np.allclose(tr.positions[0], model.x_star))
        rep["tangent_check"] = {"ok": tc.ok, "message": tc.message, "alpha": tc.alpha, "beta": tc.beta,
                                "gamma": tc.gamma, "determinant": tc.determinant}
        rep["endpoint_trajectories_inside_shock"] = inside
        if not tc.ok:
            failures.append(f"A3 tangent condition: {tc.message}")
        if not inside:
            failures.append("trajectory from the end point stays inside the shock half-hyperplane")
    elif cfg.kind == "ConvergenceStudy":
        from .suites import convergence_table, strictly_decreasing, trajectory_convergence

        phi0 = initial_potential(cfg)
        table = convergence_table(phi0, cfg.nu_list, cfg.time.T, cfg.grid_points)
        rep["convergence_table"] = table
        rep["sup_diff_decreasing"] = strictly_decreasing(r["sup_diff"] for r in table)
        if not rep["sup_diff_decreasing"]:
            failures.append("sup-difference decreases along nu_list")
        if cfg.particles and cfg.time.t0 == 0:
            tc = trajectory_convergence(phi0, [p[0] for p in cfg.particles], cfg.nu_list, cfg.time.T, step)
            rep["trajectory_convergence"] = tc
            if not tc["decreasing"]:
                failures.append("viscous trajectory distances decrease along nu_list")
    rep["violations"] = failures
    return rep, failures


def _local_model_report(model, cfg: ScenarioConfig) -> dict:
    from .shock_geometry import classify_configuration, detect_cluster_events, shock_diagram

    out: dict = {}
    if model.dim != 2 or len(model.momenta) < 2:
        return out
    for label, tau in (("before", -1.0), ("after", 1.0)):
        cx = shock_diagram(model, tau)
        out[f"nodes_{label}"] = [{"indices": list(n.indices), "kind": n.kind.value,
                                  "node_velocity": n.classification.node_velocity,
                                  "particle_velocity": n.classification.particle_velocity}
                                 for n in cx.nodes]
    if len(model.momenta) == 4:
        c = classify_configuration(model.momenta)
        out["configuration"] = {"class": c.config.value, "transition": c.transition.value,
                                "cluster": c.cluster.value, "support_size": c.support_size,
                                "hull_size": c.hull_size}
        evs = detect_cluster_events(model, (cfg.time.t0, cfg.time.T), cfg.time.step)
        out["events"] = [e.to_dict() for e in evs]
    return out


def run_scenario(cfg: ScenarioConfig, out_dir, step: float | None = None, tol: float | None = None
                 ) -> tuple[int, dict]:
    """Execute a scenario and write its artifacts; returns the exit status and manifest."""
    from .limit_potential import GenericityError, InvalidModelError
    from .trajectory import integrate

    if step is not None:
        if not step > 0:
            raise ConfigError("--step", "must be positive")
        cfg = replace(cfg, time=TimeSpec(cfg.time.t0, cfg.time.T, step))
    try:
        model = build_model(cfg)
    except (GenericityError, InvalidModelError, ValueError) as exc:
        raise ConfigError("potential", str(exc)) from None
    h = cfg.time.step
    trajs = [integrate(model, np.array(x0), cfg.time.t0, cfg.time.T, h) for x0 in cfg.particles]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files: dict[str, bytes] = {}
    failures: list[str] = []
    for o in cfg.outputs:
        if o.kind == "csv":
            files["trajectories.csv"] = _trajectories_csv(trajs, max(1, cfg.dim)).encode()
        elif o.kind == "svg":
            for t in o.times:
                try:
                    files[f"shock_{_time_label(t)}.svg"] = _shock_svg(cfg, model, t, trajs).encode()
                except GenericityError as exc:
                    raise ConfigError("outputs", f"shock picture at t={t}: {exc}") from None
                except ValueError as exc:
                    raise ConfigError("outputs", f"shock picture at t={t}: {exc}") from None
        elif o.kind == "report":
            rep, failures = _report(cfg, model, trajs, h, tol)
            files["report.json"] = _dumps(rep).encode()
    for name, data in files.items():
        (out / name).write_bytes(data)
    manifest = {
        "version": 1,
        "files": [{"name": n, "bytes": len(files[n]), "sha256": hashlib.sha256(files[n]).hexdigest()}
                  for n in sorted(files)],
    }
    (out / "manifest.json").write_text(_dumps(manifest))
    for msg in failures:
        log.error("invariant violated: %s", msg)
    return (EXIT_FAIL if failures else EXIT_OK), manifest


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="adhesion", description="Adhesion-model scenarios and verification suites.")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario file")
    r.add_argument("config", help="YAML scenario file")
    r.add_argument("--out", required=True, help="output directory")
    v = sub.add_parser("verify", help="run a seeded property suite")
    from .suites import SUITES

    v.add_argument("suite", choices=sorted(SUITES))
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out", help="write the JSON report here instead of stdout")
    for p in (r, v):
        p.add_argument("--step", type=float, default=None, help="override the integration step")
        p.add_argument("--tol", type=float, default=None, help="override the suite tolerance")
    return ap


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s", stream=sys.stderr)
    args = _parser().parse_args(argv)
    if args.command == "run":
        try:
            cfg = load_config(args.config)
            status, manifest = run_scenario(cfg, args.out, args.step, args.tol)
        except ConfigError as exc:
            log.error("config error: %s", exc)
            return EXIT_CONFIG
        log.info("wrote %d files to %s", len(manifest["files"]) + 1, args.out)
        return status
    from .suites import run_suite

    if args.step is not None and not args.step > 0:
        log.error("config error: --step: must be positive")
        return EXIT_CONFIG
    res = run_suite(args.suite, args.seed, args.step, args.tol)
    text = res.to_json()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if not res.passed:
        log.error("suite %s failed; counterexamples:", args.suite)
        for c in res.counterexamples[:5]:
            log.error("%s", json.dumps(json.loads(_dumps(c))))
        return EXIT_FAIL
    log.info("suite %s passed", args.suite)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
