"""Scenario-driven command-line front end.

Scenario files are strict JSON (unknown keys rejected, schema versioned);
``run`` dispatches the scans and classifications and writes CSV/JSON data
files plus a manifest with content hashes.  Exit codes: 0 success, 2 partial
per-row failures, 1 fatal error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .certify import (
    Thresholds,
    classify,
    scan_mirror_index,
    scan_table_csv,
    xray_mode_report,
)
from .errors import ConfigurationError, ModeCertError
from .layered import (
    EmitterSpec,
    LayerStack,
    Material,
    VACUUM,
    WaveProblem,
    build_fabry_perot,
    default_material_table_path,
    load_material_table,
    reflection,
)
from .pfm import PfmParams, diagonalize, levshift_matrix
from .qnm import ScanRegion, build_expansion
from .witness import levshift_curve

SCHEMA_VERSION = 1

DEFAULT_SWEEP = [4.0, 5.0, 6.0, 8.0, 12.0, 20.0]


# ---------------------------------------------------------------------------
# scenario schema
# ---------------------------------------------------------------------------

@dataclass
class Scenario:
    """Validated scenario with every default filled in (echoed on serialize)."""

    kind: str
    fabry_perot: dict
    xray: dict
    custom_stack: dict | None
    synthetic_pfm: dict
    scan: dict
    region: dict | None
    thresholds: dict
    output: dict

    def to_dict(self) -> dict:
        return {
            "version": SCHEMA_VERSION,
            "kind": self.kind,
            "fabry_perot": self.fabry_perot,
            "xray": self.xray,
            "custom_stack": self.custom_stack,
            "synthetic_pfm": self.synthetic_pfm,
            "scan": self.scan,
            "region": self.region,
            "thresholds": self.thresholds,
            "output": self.output,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def make_thresholds(self) -> Thresholds:
        t = self.thresholds
        window = self.scan.get("window")
        return Thresholds(residue_phase_tol=t["residue_phase_tol"],
                          convergence_tol=t["convergence_tol"],
                          shift_tol=t["shift_tol"],
                          window=tuple(window) if window else None)

    def make_region(self) -> ScanRegion | None:
        if self.region is None:
            return None
        r = self.region
        return ScanRegion(r["omega_lo"], r["omega_hi"], r["depth"],
                          im_top=r["im_top"])


def _reject_unknown(obj: dict, allowed: dict, path: str):
    for key in obj:
        if key not in allowed:
            raise ConfigurationError(f"unknown key {key!r} at {path or '/'}")


def _merged(defaults: dict, given: dict, path: str) -> dict:
    _reject_unknown(given, defaults, path)
    out = dict(defaults)
    out.update(given)
    return out


def parse_scenario(source) -> Scenario:
    """Parse and validate a scenario (file path, JSON text, or dict).

    Unknown keys are rejected with their location; missing optional sections
    get explicit defaults so that parse -> serialize -> parse is the identity.
    """
    if isinstance(source, (str, Path)) and os.path.exists(str(source)):
        with open(source, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    elif isinstance(source, str):
        data = json.loads(source)
    else:
        data = dict(source)

    top_allowed = {"version": None, "kind": None, "fabry_perot": None, "xray": None,
                   "custom_stack": None, "synthetic_pfm": None, "scan": None,
                   "region": None, "thresholds": None, "output": None}
    _reject_unknown(data, top_allowed, "")

    if data.get("version", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise ConfigurationError(
            f"scenario schema version {data.get('version')} != {SCHEMA_VERSION}")
    kind = data.get("kind")
    if kind not in ("fabry_perot", "xray", "custom_stack", "synthetic_pfm"):
        raise ConfigurationError(f"unknown scenario kind {kind!r} at /kind")

    fp = _merged({"L": 1.0, "n_mirror": 20.0, "gamma": 1.0},
                 data.get("fabry_perot", {}), "/fabry_perot")
    xr = _merged({"material_table": None, "mode_index": 4, "gamma": None,
                  "spectrum_halfwidth": 40.0},
                 data.get("xray", {}), "/xray")
    sp = _merged({"n_modes": 3, "seed": 7, "n_freq": 50, "tol": 1e-11},
                 data.get("synthetic_pfm", {}), "/synthetic_pfm")
    scan = _merged({"window": None, "n_mirror_values": DEFAULT_SWEEP,
                    "n_points": 2001},
                   data.get("scan", {}), "/scan")
    th = _merged({"residue_phase_tol": 0.05, "convergence_tol": 0.05,
                  "shift_tol": 0.02},
                 data.get("thresholds", {}), "/thresholds")
    out = _merged({"dir": "out"}, data.get("output", {}), "/output")

    region = data.get("region")
    if region is not None:
        region = _merged({"omega_lo": None, "omega_hi": None, "depth": None,
                          "im_top": 0.0}, region, "/region")
        for k in ("omega_lo", "omega_hi", "depth"):
            if region[k] is None:
                raise ConfigurationError(f"missing required key {k!r} at /region")

    custom = data.get("custom_stack")
    if custom is not None:
        custom = _merged({"left": None, "layers": None, "right": None,
                          "emitter": None, "k_par": 0.0}, custom, "/custom_stack")
        if kind == "custom_stack":
            for k in ("layers", "emitter"):
                if custom[k] is None:
                    raise ConfigurationError(f"missing required key {k!r} at /custom_stack")
    elif kind == "custom_stack":
        raise ConfigurationError("kind custom_stack requires a /custom_stack section")

    return Scenario(kind=kind, fabry_perot=fp, xray=xr, custom_stack=custom,
                    synthetic_pfm=sp, scan=scan, region=region, thresholds=th,
                    output=out)


def _material_from_dict(d: dict, path: str) -> Material:
    allowed = {"name": None, "n_re": None, "n_im": None}
    _reject_unknown(d, allowed, path)
    return Material.constant(d.get("name", "custom"),
                             complex(d.get("n_re", 1.0), d.get("n_im", 0.0)))


def _problem_from_scenario(scn: Scenario) -> WaveProblem:
    if scn.kind == "fabry_perot":
        fp = scn.fabry_perot
        return WaveProblem(build_fabry_perot(fp["L"], fp["n_mirror"],
                                             gamma=fp["gamma"]))
    if scn.kind == "custom_stack":
        c = scn.custom_stack
        left = _material_from_dict(c["left"] or {}, "/custom_stack/left")
        right = _material_from_dict(c["right"] or {}, "/custom_stack/right")
        layers = tuple(
            (_material_from_dict(l["material"], f"/custom_stack/layers/{i}/material"),
             float(l["thickness"]))
            for i, l in enumerate(c["layers"]))
        em = c["emitter"]
        emitter = EmitterSpec(x_a=float(em["x_a"]), omega_a=float(em["omega_a"]),
                              gamma=float(em["gamma"]))
        return WaveProblem(LayerStack(left, layers, right, emitter),
                           k_par=float(c["k_par"]))
    raise ConfigurationError(f"no wave problem for scenario kind {scn.kind!r}")


# ---------------------------------------------------------------------------
# artifact writing
# ---------------------------------------------------------------------------

class _Artifacts:
    """Serialized writer for the output directory plus the content manifest."""

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.entries = []

    def write(self, name: str, text: str, role: str) -> Path:
        path = self.out_dir / name
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
        digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
        self.entries.append({"path": name, "sha256": digest, "role": role})
        return path

    def finish(self) -> Path:
        manifest = json.dumps(sorted(self.entries, key=lambda e: e["path"]),
                              indent=2, sort_keys=True)
        path = self.out_dir / "manifest.json"
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(manifest)
        return path


def _reflectance_csv(problem: WaveProblem, window, n: int) -> str:
    om = np.linspace(window[0], window[1], n)
    r = reflection(problem, om)
    lines = ["omega,r_re,r_im,reflectance"]
    for w, z in zip(om, r):
        lines.append(f"{w!r},{z.real!r},{z.imag!r},{abs(z)**2!r}")
    return "\n".join(lines) + "\n"


def _run_classify(scn: Scenario, art: _Artifacts) -> int:
    thresholds = scn.make_thresholds()
    if scn.kind == "xray":
        table = scn.xray["material_table"] or default_material_table_path()
        report, spectrum = xray_mode_report(table, int(scn.xray["mode_index"]),
                                            thresholds=thresholds,
                                            gamma=scn.xray["gamma"],
                                            spectrum_halfwidth=scn.xray["spectrum_halfwidth"])
        lines = ["omega,r_re,r_im,reflectance"]
        for w, z, r2 in zip(spectrum["omega"], spectrum["r_total"],
                            spectrum["reflectance"]):
            lines.append(f"{w!r},{z.real!r},{z.imag!r},{r2!r}")
        art.write("nuclear_spectrum.csv", "\n".join(lines) + "\n", "spectrum")
        art.write("report.json", report.to_json() + "\n", "report")
        art.write("report.txt", report.to_text() + "\n", "report")
        return 0

    problem = _problem_from_scenario(scn)
    report = classify(problem, thresholds=thresholds, region=scn.make_region())
    window = thresholds.window or (report.omega_min - 0.5, report.omega_min + 0.5)
    curve = levshift_curve(problem, window, n=scn.scan["n_points"])
    art.write("levelshift.csv", curve.to_csv(), "curve")
    art.write("levelshift.json", curve.to_json() + "\n", "curve")
    art.write("reflectance.csv",
              _reflectance_csv(problem, window, scn.scan["n_points"]), "curve")
    art.write("report.json", report.to_json() + "\n", "report")
    art.write("report.txt", report.to_text() + "\n", "report")
    return 0


def _run_sweep(scn: Scenario, art: _Artifacts, threads: int) -> int:
    thresholds = scn.make_thresholds()
    values = scn.scan["n_mirror_values"]
    L = scn.fabry_perot["L"]
    gamma = scn.fabry_perot["gamma"]

    def one(n):
        try:
            stack = build_fabry_perot(L, float(n), gamma=gamma)
            return (float(n), classify(WaveProblem(stack), thresholds=thresholds))
        except ModeCertError as exc:
            return (float(n), exc)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, values))
    else:
        rows = [one(n) for n in values]

    art.write("sweep.csv", scan_table_csv(rows), "scan")
    failures = 0
    for n, res in rows:
        if isinstance(res, Exception):
            failures += 1
            continue
        art.write(f"report_n{n:g}.json", res.to_json() + "\n", "report")
    return 2 if failures else 0


def _run_poles(scn: Scenario, art: _Artifacts) -> int:
    problem = _problem_from_scenario(scn)
    region = scn.make_region()
    if region is None:
        raise ConfigurationError("poles command requires an explicit /region")
    expansion = build_expansion(problem, problem.stack.emitter, region)
    art.write("poles.csv", expansion.pole_table_csv(), "poles")
    art.write("expansion.json",
              json.dumps(expansion.to_dict(), indent=2, sort_keys=True) + "\n",
              "poles")
    return 0


def _run_spectrum(scn: Scenario, art: _Artifacts) -> int:
    if scn.kind == "xray":
        return _run_classify(scn, art)
    problem = _problem_from_scenario(scn)
    window = scn.scan["window"]
    if window is None:
        scale = math.pi / scn.fabry_perot["L"] if scn.kind == "fabry_perot" else 1.0
        window = (0.25 * scale, 3.25 * scale)
    art.write("reflectance.csv",
              _reflectance_csv(problem, window, scn.scan["n_points"]), "curve")
    curve = levshift_curve(problem, window, n=scn.scan["n_points"])
    art.write("levelshift.csv", curve.to_csv(), "curve")
    return 0


def _run_pfm_check(scn: Scenario, art: _Artifacts, seed=None) -> int:
    cfg = scn.synthetic_pfm
    rng = np.random.default_rng(seed if seed is not None else cfg["seed"])
    n = int(cfg["n_modes"])
    a = rng.normal(size=(n, n))
    model = PfmParams(omega_matrix=0.5 * (a + a.T) + 10.0 * np.eye(n),
                      kappa=rng.uniform(0.1, 1.0, n),
                      g=rng.normal(size=n) + 1j * rng.normal(size=n))
    basis = diagonalize(model)
    oms = rng.uniform(5.0, 15.0, int(cfg["n_freq"]))
    direct = levshift_matrix(model, oms)
    summed = basis.pole_sum(oms)
    err = float(np.max(np.abs(direct - summed) / np.maximum(1.0, np.abs(direct))))
    ok = err < float(cfg["tol"])
    art.write("pfm_model.json", model.to_json() + "\n", "model")
    art.write("pfm_check.json", json.dumps({
        "n_modes": n, "n_freq": int(cfg["n_freq"]),
        "max_relative_error": err, "tolerance": float(cfg["tol"]),
        "passed": bool(ok),
        "poles": [{"re": p.omega_pole.real, "im": p.omega_pole.imag,
                   "res_re": p.residue.real, "res_im": p.residue.imag}
                  for p in basis.poles],
    }, indent=2, sort_keys=True) + "\n", "report")
    return 0 if ok else 2


def run(scenario: Scenario, command: str = "classify", out_dir=None,
        threads: int = 1, seed=None) -> int:
    """Execute a scenario; returns the process exit code.

    Writes all artifacts plus ``manifest.json`` (path, sha256, role per file)
    into the output directory.  The MODECERT_OUT environment variable
    overrides the output directory.
    """
    out = os.environ.get("MODECERT_OUT") or out_dir or scenario.output["dir"]
    art = _Artifacts(Path(out))
    art.write("scenario.json", scenario.to_json() + "\n", "config")
    try:
        if command == "classify":
            code = _run_classify(scenario, art)
        elif command == "sweep":
            code = _run_sweep(scenario, art, threads)
        elif command == "poles":
            code = _run_poles(scenario, art)
        elif command == "spectrum":
            code = _run_spectrum(scenario, art)
        elif command == "pfm-check":
            code = _run_pfm_check(scenario, art, seed=seed)
        else:
            raise ConfigurationError(f"unknown command {command!r}")
    except ModeCertError as exc:
        art.write("error.txt", f"{type(exc).__name__}: {exc}\n", "error")
        art.finish()
        return 1
    art.finish()
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="modecert",
        description="Certify multi-mode light-matter effects in lossy 1D resonators.")
    parser.add_argument("--scenario", type=str, default=None,
                        help="scenario JSON file")
    parser.add_argument("--out", type=str, default=None, help="output directory")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads for scans (1 = sequential reference run)")
    parser.add_argument("--seed", type=int, default=None,
                        help="seed override for synthetic scenarios")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (("classify", "run the decision tree on one scenario"),
                      ("sweep", "classify across the mirror-index list"),
                      ("poles", "pole/residue table over the scenario region"),
                      ("spectrum", "reflectance and level-shift curves"),
                      ("pfm-check", "matrix-vs-diagonalized consistency check")):
        sub.add_parser(name, help=doc)
    args = parser.parse_args(argv)

    if args.scenario is None:
        parser.error("--scenario PATH is required")
    try:
        scenario = parse_scenario(args.scenario)
    except (ConfigurationError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    code = run(scenario, command=args.command, out_dir=args.out,
               threads=args.threads, seed=args.seed)
    if code == 0:
        print("ok")
    elif code == 2:
        print("completed with per-row failures", file=sys.stderr)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
