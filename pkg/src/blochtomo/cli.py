"""Command line front end: ``blochtomo <command> --config FILE [--seed N] [--out DIR]``.

All angles are in radians and eta is dimensionless.  Every command writes a
``manifest-<command>.json`` next to its artifacts holding the SHA-256 of the
validated configuration, the seed, and the SHA-256 of each file, so a run can
be checked bit for bit.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .calibration import calibrate_delta_dichroic, calibrate_delta_plain, calibrate_eta
from .errors import BlochTomoError, ConfigError, GridError
from .polarimetry import (
    ImageGeometry,
    NoiseConfig,
    PolarimetrySet,
    ingest_images,
    read_images,
    render_images,
    synthesize_dataset,
    write_images,
)
from .pt import classify_phase, rotate_hamiltonian
from .spectral import (
    ModelParams,
    bloch_bands,
    canonical_from_operator,
    effective_hamiltonian,
    eigensystem,
    hopping_from_params,
    operator_fidelities,
    step_operator,
    step_operators,
    stokes,
)
from .tomography import BZReconstruction, SolverConfig, reconstruct_bz
from .topology import find_exceptional_points, phase_diagram, save_ep_records, sublattice_residual, winding_number

OUT_ENV = "BLOCHTOMO_OUT"
COMMANDS = ("simulate", "reconstruct", "analyze", "phase-diagram", "calibrate", "pipeline")


def load_schema(name):
    return json.loads(resources.files("blochtomo").joinpath("schemas", name).read_text())


def config_hash(config) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _clean(obj):
    # strict JSON: non-finite floats become null
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj) if np.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, obj):
    Path(path).write_text(json.dumps(_clean(obj), indent=1, allow_nan=False) + "\n")


@dataclass
class RunConfig:
    raw: dict
    base_dir: Path
    seed: int
    out: Path
    sha256: str = ""
    artifacts: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path, seed=None, out=None):
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(raw, path.parent, seed, out)

    @classmethod
    def from_dict(cls, raw, base_dir=".", seed=None, out=None):
        try:
            jsonschema.validate(raw, load_schema("config.schema.json"))
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"invalid config at {where}: {exc.message}") from exc
        if seed is None:
            seed = raw.get("noise", {}).get("seed", 0)
        base_dir = Path(base_dir)
        if out is None:
            out = raw.get("outputs", {}).get("directory") or os.environ.get(OUT_ENV) or "blochtomo-out"
            out = base_dir / out if "directory" in raw.get("outputs", {}) else Path(out)
        return cls(raw, base_dir, int(seed), Path(out), config_hash(raw))

    def section(self, name):
        return self.raw.get(name, {})

    def path(self, value):
        p = Path(value)
        return p if p.is_absolute() else self.base_dir / p

    @property
    def model(self):
        m = self.raw.get("model")
        if m is None:
            return None
        if "plates" in m:
            return ModelParams.cascade([pl["delta"] for pl in m["plates"]], [pl["eta"] for pl in m["plates"]])
        return ModelParams(m["delta"], m["eta"])

    def require_model(self):
        p = self.model
        if p is None:
            raise ConfigError("this command needs a 'model' section")
        return p

    @property
    def n_q(self):
        return self.section("grid").get("n_q", 90)

    @property
    def noise(self):
        n = self.section("noise")
        return NoiseConfig(n.get("gaussian_sigma", 0.0), n.get("photon_budget"), self.seed)

    def solver(self):
        s = dict(self.section("solver"))
        s.pop("segments", None)
        s["seed"] = self.seed
        return SolverConfig(**s) if self.noise.noiseless else SolverConfig.noisy(**s)

    def emit(self, name, writer):
        """Create ``out/name`` via ``writer(path)`` and record its hash."""
        self.out.mkdir(parents=True, exist_ok=True)
        target = self.out / name
        target.parent.mkdir(parents=True, exist_ok=True)
        writer(target)
        self.artifacts[name] = hashlib.sha256(target.read_bytes()).hexdigest()
        return target

    def write_manifest(self, command):
        manifest = {
            "command": command,
            "config_sha256": self.sha256,
            "seed": self.seed,
            "version": __version__,
            "artifacts": dict(sorted(self.artifacts.items())),
        }
        self.out.mkdir(parents=True, exist_ok=True)
        path = self.out / f"manifest-{command}.json"
        write_json(path, manifest)
        return path


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(cfg: RunConfig):
    p = cfg.require_model()
    sim = cfg.section("simulate")
    if sim.get("dataset", True):
        data = synthesize_dataset(p, cfg.n_q, cfg.noise)
        cfg.emit("dataset.json", data.save)
    if "images" in sim:
        geometry = ImageGeometry(**sim["images"])
        images = render_images(p, geometry, cfg.noise)
        meta = {"config_sha256": cfg.sha256, "seed": cfg.seed, "delta": p.delta, "eta": p.eta}
        write_images(images, cfg.out / "images", meta)
        for f in sorted((cfg.out / "images").iterdir()):
            cfg.artifacts[f"images/{f.name}"] = hashlib.sha256(f.read_bytes()).hexdigest()


def _load_measurements(cfg: RunConfig):
    sec = cfg.section("reconstruct")
    if "images" in sec:
        directory = cfg.path(sec["images"])
        images = read_images(directory)
        n_columns = next(iter(images.values())).meta.get("n_columns", 90)
        return ingest_images(images, n_columns=n_columns)
    src = cfg.path(sec["dataset"]) if "dataset" in sec else cfg.out / "dataset.json"
    try:
        return PolarimetrySet.load(src)
    except OSError as exc:
        raise ConfigError(f"cannot read dataset {src}: {exc}") from exc


def cmd_reconstruct(cfg: RunConfig, data=None):
    data = data if data is not None else _load_measurements(cfg)
    segments = cfg.section("solver").get("segments", 1)
    rec = reconstruct_bz(data, cfg.solver(), segments=segments)
    cfg.emit("reconstruction.json", rec.save)
    return rec


def pt_record(p: ModelParams, q_c):
    cs = canonical_from_operator(step_operator(hopping_from_params(p), q_c))
    out = classify_phase(rotate_hamiltonian(effective_hamiltonian(cs))).to_dict()
    return {"delta": p.delta, "eta": p.eta, "q_c": float(q_c), **out}


def _winding_or_none(n):
    try:
        w = winding_number(n)
    except GridError:
        return None
    return [w.real, w.imag]


def _nearest_pixels(q, q_c, count=3):
    d = np.abs(np.angle(np.exp(1j * (q - q_c))))
    return [int(k) for k in np.argsort(d, kind="stable")[:count]]


def analyze_reconstruction(rec: BZReconstruction, p: ModelParams | None, eta_sweep=None):
    """Everything ``analyze`` writes, as in-memory tables."""
    u_rec = rec.operators()
    bands = []
    closed_E = np.full(len(rec.q), np.nan + 0j)
    fid = np.full(len(rec.q), np.nan)
    if p is not None:
        closed_E, _ = bloch_bands(p, rec.q)
        fid = operator_fidelities(step_operators(p, rec.q), u_rec)
    infid = rec.infidelity()
    for k, q in enumerate(rec.q):
        s = [np.nan] * 3
        if not rec.dark[k]:
            try:
                s = list(stokes(eigensystem(rec.results[k].canonical).psi1))
            except BlochTomoError:
                pass
        n = rec.n[k]
        bands.append(
            [q, rec.E[k].real, rec.E[k].imag]
            + [c for z in n for c in (z.real, z.imag)]
            + [infid[k], *s, closed_E[k].real, closed_E[k].imag, fid[k]]
        )

    summary = {
        "n_q": len(rec.q),
        "winding": _winding_or_none(rec.n),
        "ep_suspect_pixels": [int(k) for k in np.flatnonzero(rec.ep_suspect)],
        "converged_fraction": float(np.mean(rec.converged)),
        "sublattice_residual": sublattice_residual(rec.n),
    }
    ep, pt = [], []
    if p is not None:
        _, n_closed = bloch_bands(p, rec.q)
        summary.update(
            delta=p.delta,
            eta=p.eta,
            winding_closed_form=_winding_or_none(n_closed),
            mean_fidelity=float(np.nanmean(fid)),
            min_fidelity=float(np.nanmin(fid)),
        )
        try:
            ep = find_exceptional_points(p.delta)
        except BlochTomoError as exc:
            summary["ep_error"] = exc.to_dict()
        if ep:
            q_c = ep[0].q_c
            pt = [pt_record(ModelParams(p.delta, e), q_c) for e in (eta_sweep or [p.eta])]
            local = []
            for k in _nearest_pixels(rec.q, q_c):
                if rec.dark[k]:
                    continue
                try:
                    h = effective_hamiltonian(rec.results[k].canonical)
                    local.append(classify_phase(rotate_hamiltonian(h, expect_sublattice=False)).order_parameter)
                except BlochTomoError:
                    pass
            summary["order_parameter_near_q_c"] = float(np.mean(local)) if local else None
    return bands, summary, ep, pt


def cmd_analyze(cfg: RunConfig, rec=None):
    if rec is None:
        sec = cfg.section("analyze")
        src = cfg.path(sec["reconstruction"]) if "reconstruction" in sec else cfg.out / "reconstruction.json"
        try:
            rec = BZReconstruction.load(src)
        except OSError as exc:
            raise ConfigError(f"cannot read reconstruction {src}: {exc}") from exc
    bands, summary, ep, pt = analyze_reconstruction(rec, cfg.model, cfg.section("analyze").get("eta_sweep"))
    columns = load_schema("csv_columns.json")["bands.csv"]

    def write_bands(path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for row in bands:
                w.writerow(["nan" if not np.isfinite(v) else repr(float(v)) for v in row])

    cfg.emit("bands.csv", write_bands)
    cfg.emit("ep.json", lambda path: save_ep_records(ep, path))
    cfg.emit("pt_scan.json", lambda path: write_json(path, pt))
    summary.update(config_sha256=cfg.sha256, seed=cfg.seed)
    cfg.emit("summary.json", lambda path: write_json(path, summary))
    return summary


def cmd_phase_diagram(cfg: RunConfig):
    sec = cfg.section("phase_diagram")
    pd = phase_diagram(
        tuple(sec.get("delta_range", (0.0, 2 * np.pi))),
        tuple(sec.get("eta_range", (0.0, 1.4))),
        sec.get("resolution", 64),
        sec.get("n_q", cfg.n_q),
    )
    cfg.emit("phase_diagram.csv", pd.to_csv)
    return pd


def cmd_calibrate(cfg: RunConfig):
    r = cfg.section("calibrate")
    if not r:
        raise ConfigError("calibrate needs a 'calibrate' section with readings")
    out = {"delta_plain": calibrate_delta_plain(r["i_ll"], r["i_lr"]) if r["i_ll"] > 0 else None}
    if "i_ord" in r or "i_ext" in r:
        if not ("i_ord" in r and "i_ext" in r):
            raise ConfigError("i_ord and i_ext must be given together")
        eta = calibrate_eta(r["i_ord"], r["i_ext"])
    else:
        eta = 0.0
    out.update(eta=eta, delta=calibrate_delta_dichroic(r["i_ll"], r["i_lr"], eta))
    out.update(config_sha256=cfg.sha256, seed=cfg.seed)
    cfg.emit("calibration.json", lambda path: write_json(path, out))
    return out


def cmd_pipeline(cfg: RunConfig):
    p = cfg.require_model()
    data = synthesize_dataset(p, cfg.n_q, cfg.noise)
    cfg.emit("dataset.json", data.save)
    rec = cmd_reconstruct(cfg, data)
    return cmd_analyze(cfg, rec)


HANDLERS = {
    "simulate": cmd_simulate,
    "reconstruct": cmd_reconstruct,
    "analyze": cmd_analyze,
    "phase-diagram": cmd_phase_diagram,
    "calibrate": cmd_calibrate,
    "pipeline": cmd_pipeline,
}


def run(command, cfg: RunConfig):
    if command not in HANDLERS:
        raise ConfigError(f"unknown command {command!r}")
    HANDLERS[command](cfg)
    return cfg.write_manifest(command)


def build_parser():
    ap = argparse.ArgumentParser(
        prog="blochtomo",
        description="Simulate, reconstruct and analyze non-Hermitian quantum-walk tomography. "
        "Angles in radians; eta (dichroism) is dimensionless.",
    )
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--seed", type=int, default=None, help="overrides noise.seed (default 0)")
    ap.add_argument("--out", default=None, help=f"output directory (default: outputs.directory, ${OUT_ENV}, ./blochtomo-out)")
    ap.add_argument("--version", action="version", version=f"blochtomo {__version__}")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.seed is not None and args.seed < 0:
            raise ConfigError("--seed must be non-negative")
        cfg = RunConfig.load(args.config, seed=args.seed, out=args.out)
        manifest = run(args.command, cfg)
    except BlochTomoError as exc:
        print(json.dumps(exc.to_dict()), file=sys.stderr)
        return 2 if isinstance(exc, ConfigError) else 1
    except ValueError as exc:
        print(json.dumps({"error": "invalid_value", "message": str(exc)}), file=sys.stderr)
        return 1
    except OSError as exc:
        print(json.dumps({"error": "io_error", "message": str(exc)}), file=sys.stderr)
        return 1
    print(json.dumps({"command": args.command, "manifest": str(manifest)}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
