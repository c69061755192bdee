"""Command-line front end.

Verbs: stability-table, wavemode, bifurcation, simulate, sweep, verify.
Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 verification failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures as cf
import csv
import hashlib
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

import numpy as np

from . import __version__
from .config import RunConfig, dumps, load
from .errors import ConfigError, UrbanCrimeError
from .kinetics import Variant
from .nonlinear import branch_coefficients, classify_branch, compute_K2
from .oracles import ORACLE_FUNCS
from .patterns import analyze, default_modes, fit_power_law
from .solver import FieldPair, Mesh, Outcome, perturbed_state, run_to_steady
from .spectral import DomainKind, EigenMode
from .stability import bifurcation_table, bifurcation_value, check_bifurcation_conditions, select_wavemode

log = logging.getLogger("urbancrime")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VERIFY = 0, 2, 3, 4


# ---------------------------------------------------------------- writers


def fmt(x: Any) -> str:
    """Full round-trip precision for floats (17 significant digits)."""
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


class Artifacts:
    """Collects written files so the manifest can be emitted last."""

    def __init__(self, out: Path):
        self.out = out
        self.files: list[dict] = []
        out.mkdir(parents=True, exist_ok=True)

    def _record(self, path: Path, kind: str, meta: Optional[dict] = None):
        entry = {"path": str(path.relative_to(self.out)), "kind": kind}
        if meta:
            entry.update(meta)
        self.files.append(entry)

    def csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]], kind: str = "table", meta=None) -> Path:
        path = self.out / name
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([fmt(v) for v in row])
        self._record(path, kind, meta)
        return path

    def grid(self, name: str, header: str, arr: np.ndarray, meta=None) -> Path:
        """2D field: header line, then one row per y index with values along x."""
        path = self.out / name
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w") as fh:
            fh.write(header + "\n")
            for row in np.asarray(arr).T:
                fh.write(",".join(fmt(v) for v in row) + "\n")
        self._record(path, "grid", meta)
        return path

    def json(self, name: str, obj: Any, kind: str = "summary") -> Path:
        path = self.out / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")
        self._record(path, kind)
        return path

    def text(self, name: str, text: str, kind: str) -> Path:
        path = self.out / name
        path.write_text(text)
        self._record(path, kind)
        return path

    def manifest(self, verb: str, extra: Optional[dict] = None) -> Path:
        for entry in self.files:
            if entry["kind"] != "summary":  # summaries carry wall times
                entry["sha256"] = hashlib.sha256((self.out / entry["path"]).read_bytes()).hexdigest()
        doc = {"verb": verb, "version": __version__, "files": self.files}
        if extra:
            doc.update(extra)
        path = self.out / "manifest.json"
        path.write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")
        return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def _mode_cols(index) -> list:
    return list(index) if isinstance(index, tuple) else [index]


def _mode_header(cfg: RunConfig) -> list[str]:
    return ["m", "n"] if cfg.domain.kind is DomainKind.SQUARE else ["k"]


def _L_values(cfg: RunConfig) -> list[float]:
    return list(cfg.table.L_values) or [cfg.domain.L]


# ---------------------------------------------------------------- stability table


def cmd_stability_table(cfg: RunConfig, art: Artifacts) -> int:
    kin = cfg.kinetics()
    rows, rounded, wave_rows = [], [], []
    for variant in cfg.variants():
        p = cfg.params(variant)
        for L in _L_values(cfg):
            dom = cfg.domain_spec(L)
            if dom.kind is DomainKind.SQUARE and cfg.table.grid > 0:
                g = cfg.table.grid
                modes = [EigenMode(dom, (m, n)) for m in range(g) for n in range(g) if (m, n) != (0, 0)]
                table = [(m, float(bifurcation_value(p, kin, m.sigma))) for m in modes]
                _write_grid_table(art, variant, L, g, table)
            else:
                table = bifurcation_table(p, kin, dom, cfg.table.modes)
            best = max(v for _, v in table)
            for mode, v in table:
                flag = abs(v - best) <= 1e-12 * abs(best)
                rows.append([variant.value, L, *_mode_cols(mode.index), mode.sigma, v, int(flag)])
            winners, wbest = _winners(table)
            wave_rows.append([variant.value, L, " ".join(_idx_str(m.index) for m in winners), wbest])
            # rounded view limited to the modes of a listed table (first modes, or the grid)
            for mode, v in table[: (cfg.table.modes or len(table))]:
                rounded.append([variant.value, L, *_mode_cols(mode.index), f"{v:.4f}"])
    head = ["variant", "L", *_mode_header(cfg)]
    art.csv("stability_table.csv", head + ["sigma", "eps_bar", "argmax"], rows)
    art.csv("stability_table_rounded.csv", head + ["eps_bar_4dp"], rounded, kind="view")
    art.csv("wavemodes.csv", ["variant", "L", "modes", "eps_bar_max"], wave_rows)
    art.manifest("stability-table")
    return EXIT_OK


def _winners(table):
    best = max(v for _, v in table)
    return [m for m, v in table if abs(v - best) <= 1e-12 * abs(best)], best


def _idx_str(index) -> str:
    return "(%d,%d)" % index if isinstance(index, tuple) else str(index)


def _write_grid_table(art: Artifacts, variant: Variant, L: float, g: int, table):
    vals = {m.index: v for m, v in table}
    rows = []
    for m in range(g):
        row = [m]
        for n in range(g):
            row.append("undefined" if (m, n) == (0, 0) else vals[(m, n)])
        rows.append(row)
    art.csv(f"stability_grid_{variant.value}_L{L:g}.csv", ["m\\n", *range(g)], rows)


# ---------------------------------------------------------------- wavemode


def cmd_wavemode(cfg: RunConfig, art: Artifacts) -> int:
    kin = cfg.kinetics()
    out, rows = [], []
    for variant in cfg.variants():
        p = cfg.params(variant)
        for L in _L_values(cfg):
            winners, best = select_wavemode(p, kin, cfg.domain_spec(L), cfg.table.modes)
            idx = [m.index for m in winners]
            out.append({"variant": variant.value, "L": L, "modes": idx, "eps_bar_max": best,
                        "homogeneous_unstable": p.eps < best})
            rows.append([variant.value, L, " ".join(_idx_str(i) for i in idx), best, int(p.eps < best)])
    art.csv("wavemodes.csv", ["variant", "L", "modes", "eps_bar_max", "homogeneous_unstable"], rows)
    art.json("wavemode.json", out)
    art.manifest("wavemode")
    return EXIT_OK


# ---------------------------------------------------------------- bifurcation


def cmd_bifurcation(cfg: RunConfig, art: Artifacts) -> int:
    kin = cfg.kinetics()
    dom = cfg.domain_spec()
    reports = []
    status = EXIT_OK
    for variant in cfg.variants():
        p = cfg.params(variant)
        winners, best = select_wavemode(p, kin, dom, cfg.table.modes)
        mode = EigenMode(dom, cfg.bifurcation.mode) if cfg.bifurcation.mode is not None else winners[0]
        point = check_bifurcation_conditions(p, kin, mode, cfg.table.modes)
        rep: dict[str, Any] = {
            "variant": variant.value,
            "mode": mode.index,
            "sigma": point.sigma,
            "eps_bar": point.eps_bar,
            "Qk": point.Qk,
            "conditions": point.conditions,
            "details": point.details,
            "extra": point.extra,
            "principal": abs(point.eps_bar - best) <= 1e-12 * abs(best),
        }
        try:
            if cfg.bifurcation.method != "auto":
                bc = compute_K2(point, p, kin, method=cfg.bifurcation.method)
            else:
                bc = branch_coefficients(point, p, kin)
            kind, verdict = classify_branch(bc, rep["principal"])
            rep.update({
                "K1": bc.K1,
                "K2": bc.K2,
                "first_order_integrals": bc.first_order_integrals,
                "second_order_integrals": bc.second_order_integrals,
                "projections": bc.projections,
                "residuals": bc.residuals,
                "condition_number": bc.condition_number,
                "method": bc.method,
                "classification": kind,
                "stability": verdict,
            })
        except UrbanCrimeError as exc:
            rep["error"] = f"{type(exc).__name__}: {exc}"
            status = EXIT_NUMERIC
        reports.append(rep)
    art.json("bifurcation.json", reports)
    art.manifest("bifurcation")
    return status


# ---------------------------------------------------------------- simulate


def _initial_state(cfg: RunConfig, p, mesh: Mesh) -> FieldPair:
    return perturbed_state(p, mesh, modes_A=cfg.ic.A, modes_rho=cfg.ic.rho, noise=cfg.ic.noise, seed=cfg.run.seed)


def _write_snapshot(art: Artifacts, mesh: Mesh, snap: FieldPair, i: int, prefix: str = ""):
    meta = {"t": float(snap.t), "index": i}
    if mesh.dim == 1:
        rows = zip(mesh.x, snap.A, snap.rho)
        art.csv(f"{prefix}snapshots/snap_{i:05d}.csv", ["x", "A", "rho"], rows, kind="snapshot", meta=meta)
    else:
        n = mesh.n
        header = f"{n} {n} {fmt(mesh.domain.L)} {fmt(float(snap.t))}"
        art.grid(f"{prefix}snapshots/snap_{i:05d}_A.csv", header, snap.A, meta={**meta, "field": "A"})
        art.grid(f"{prefix}snapshots/snap_{i:05d}_rho.csv", header, snap.rho, meta={**meta, "field": "rho"})


def simulate_run(cfg: RunConfig, art: Artifacts, prefix: str = "", variant: Optional[Variant] = None) -> dict:
    """One simulation; writes snapshots as they arrive and the summary at the end."""
    kin = cfg.kinetics()
    p = cfg.params(variant)
    mesh = Mesh(cfg.domain_spec(), cfg.grid.n)
    state = _initial_state(cfg, p, mesh)
    counter = [0]

    def on_snapshot(snap: FieldPair):
        if cfg.output.snapshots:
            _write_snapshot(art, mesh, snap, counter[0], prefix)
        counter[0] += 1

    res = run_to_steady(state, p, kin, mesh, cfg.solve_config(), on_snapshot=on_snapshot)
    modes = default_modes(mesh, cfg.analysis.max_mode)
    rep = analyze(res.final, mesh, modes, cfg.analysis.prominence_frac, cfg.analysis.include_boundary, res.snapshots)
    top = sorted(rep.mode_spectrum.items(), key=lambda kv: -abs(kv[1]))[:8]
    summary = {
        "variant": p.variant.value,
        "eps": p.eps,
        "L": mesh.domain.L,
        "n": mesh.n,
        "domain": mesh.domain.kind.value,
        "outcome": res.outcome.value,
        "message": res.message,
        "t_final": float(res.final.t),
        "steps": res.steps,
        "rhs_evals": res.rhs_evals,
        "residual": res.residual,
        "dominant_mode": rep.dominant_mode,
        "top_modes": [[k, v] for k, v in top],
        "spike_count": rep.spike_count,
        "spike_locations": rep.spike_locations,
        "amplitude": rep.amplitude,
        "monotone": rep.monotone,
        "event_log": [{"t": e.t, "before": e.before, "after": e.after, "kind": e.kind} for e in rep.event_log],
        "wall_time": res.wall_time,
    }
    if mesh.dim == 1:
        art.csv(f"{prefix}final.csv", ["x", "A", "rho"], zip(mesh.x, res.final.A, res.final.rho), kind="final")
    else:
        header = f"{mesh.n} {mesh.n} {fmt(mesh.domain.L)} {fmt(float(res.final.t))}"
        art.grid(f"{prefix}final_A.csv", header, res.final.A)
        art.grid(f"{prefix}final_rho.csv", header, res.final.rho)
    art.json(f"{prefix}summary.json", summary)
    return summary


def cmd_simulate(cfg: RunConfig, art: Artifacts) -> int:
    art.text("config.txt", dumps(cfg), kind="config")
    summaries = []
    variants = cfg.variants()
    for v in variants:
        prefix = "" if len(variants) == 1 else f"{v.value}/"
        summaries.append(simulate_run(cfg, art, prefix, v))
    art.manifest("simulate", {"outcomes": [s["outcome"] for s in summaries]})
    return EXIT_NUMERIC if any(s["outcome"] == Outcome.BLOWUP.value for s in summaries) else EXIT_OK


# ---------------------------------------------------------------- sweep


def _sweep_config(cfg: RunConfig, value: float) -> RunConfig:
    key = "domain.L" if cfg.sweep.param == "L" else f"model.{cfg.sweep.param}"
    return cfg.replace(key, float(value))


def _sweep_worker(args) -> tuple[int, list[dict], list[dict]]:
    i, text, out = args
    from .config import loads

    cfg = loads(text)
    art = Artifacts(Path(out))
    rows = []
    for v in cfg.variants():
        prefix = f"run_{i:03d}/" if len(cfg.variants()) == 1 else f"run_{i:03d}/{v.value}/"
        rows.append(simulate_run(cfg, art, prefix, v))
    return i, rows, art.files


def cmd_sweep(cfg: RunConfig, art: Artifacts, threads: int = 1) -> int:
    if not cfg.sweep.values:
        raise ConfigError("sweep.values is empty", key="sweep.values")
    art.text("config.txt", dumps(cfg), kind="config")
    jobs = [(i, dumps(_sweep_config(cfg, v)), str(art.out)) for i, v in enumerate(cfg.sweep.values)]
    results: dict[int, tuple[list[dict], list[dict]]] = {}
    if threads > 1:
        with cf.ProcessPoolExecutor(max_workers=threads) as pool:
            for i, rows, files in pool.map(_sweep_worker, jobs):
                results[i] = (rows, files)
    else:
        for job in jobs:
            i, rows, files = _sweep_worker(job)
            results[i] = (rows, files)
    table = []
    for i in sorted(results):
        rows, files = results[i]
        art.files.extend(files)
        for s in rows:
            table.append([i, cfg.sweep.values[i], s["variant"], s["outcome"], _idx_str(s["dominant_mode"]) if s["dominant_mode"] is not None else "",
                          s["spike_count"], s["amplitude"], s["residual"], s["t_final"]])
    art.csv("sweep.csv", ["run", cfg.sweep.param, "variant", "outcome", "dominant_mode", "spike_count", "amplitude", "residual", "t_final"], table)
    status = EXIT_OK
    if cfg.sweep.fit:
        status = _sweep_fit(cfg, art, table)
    art.manifest("sweep", {"runs": len(jobs)})
    if any(r[3] == Outcome.BLOWUP.value for r in table):
        return EXIT_NUMERIC
    return status


def _sweep_fit(cfg: RunConfig, art: Artifacts, table) -> int:
    if cfg.sweep.param != "eps":
        raise ConfigError("sweep.fit needs sweep.param = eps", key="sweep.fit")
    kin = cfg.kinetics()
    fits = []
    for variant in cfg.variants():
        winners, eps_bar = select_wavemode(cfg.params(variant), kin, cfg.domain_spec(), cfg.table.modes)
        pts = [(r[1], r[6]) for r in table if r[2] == variant.value and r[3] == Outcome.STEADY_STATE.value and r[1] < eps_bar and r[6] > 1e-6]
        entry = {"variant": variant.value, "eps_bar": eps_bar, "eps": [e for e, _ in pts], "amplitudes": [a for _, a in pts]}
        try:
            p, c = fit_power_law([eps_bar - e for e, _ in pts], [a for _, a in pts])
            entry.update({"exponent": p, "prefactor": c})
        except UrbanCrimeError as exc:
            entry["error"] = str(exc)
        fits.append(entry)
    art.json("fit.json", fits, kind="fit")
    return EXIT_OK


# ---------------------------------------------------------------- verify


def cmd_verify(cfg: RunConfig, art: Artifacts) -> int:
    v = cfg.verify
    kwargs = {
        "mms": {"ns": v.mms_n, "ns_2d": v.mms_n_2d, "L_2d": v.mms_L_2d},
        "scaling": {"eps_list": v.scaling_eps, "n": v.scaling_n},
        "conservation": {"seed": cfg.run.seed},
        "variant_agreement": {"seed": cfg.run.seed},
    }
    results = []
    for name in v.oracles:
        res = ORACLE_FUNCS[name](**kwargs.get(name, {}))
        log.info("%s: %s (measured %s, tolerance %s)", name, "pass" if res.passed else "FAIL", res.measured, res.tolerance)
        results.append(res.as_dict())
    ok = all(r["passed"] for r in results)
    art.json("verify.json", {"passed": ok, "oracles": results})
    art.manifest("verify", {"passed": ok})
    return EXIT_OK if ok else EXIT_VERIFY


# ---------------------------------------------------------------- entry point

VERBS = {
    "stability-table": cmd_stability_table,
    "wavemode": cmd_wavemode,
    "bifurcation": cmd_bifurcation,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="urbancrime", description=__doc__.splitlines()[0])
    ap.add_argument("verb", choices=sorted(VERBS))
    ap.add_argument("--config", help="run configuration file (section.key = value lines)")
    ap.add_argument("--out", help="output directory (overrides output.dir)")
    ap.add_argument("--threads", type=int, default=1, help="worker processes for sweeps")
    ap.add_argument("--seed", type=int, help="random seed for noise initial conditions (overrides run.seed)")
    ap.add_argument("-v", "--verbose", action="store_true")
    ap.add_argument("--version", action="version", version=__version__)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load(args.config) if args.config else RunConfig()
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("--seed must be an unsigned 64-bit integer", key="run.seed")
            cfg = cfg.replace("run.seed", args.seed)
        if args.out:
            cfg = cfg.replace("output.dir", args.out)
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1", key="threads")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    art = Artifacts(Path(cfg.output.dir))
    try:
        if args.verb == "sweep":
            return cmd_sweep(cfg, art, args.threads)
        return VERBS[args.verb](cfg, art)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (UrbanCrimeError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
