"""Command-line front end: construct, verify, export-mesh, report."""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from . import assemble as asm
from .mesh import mesh_and_euler
from .verify import MUTATIONS, SCHEMA, SUITES, Construction, RunConfig, run_all


def _config(args: argparse.Namespace) -> RunConfig:
    only = tuple(s for s in args.only.split(",") if s) if getattr(args, "only", None) else None
    return RunConfig(
        variant=args.variant,
        epsilon=args.epsilon,
        N=args.big_n,
        K=args.necks,
        z_min=args.zmin,
        mesh_resolution=args.resolution,
        quad_rtol=args.quad_tol,
        seed=args.seed,
        out=args.out,
        only=only,
        mutate=getattr(args, "mutate", None),
    ).validate()


def _outdir(config: RunConfig) -> Path:
    path = Path(config.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _dump(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _complex_list(values) -> list[list[float]]:
    return [[float(complex(v).real), float(complex(v).imag)] for v in values]


def atlas_document(config: RunConfig, atlas: asm.SurfaceAtlas) -> dict:
    """Serializable description: patch domains, named map primitives with parameters, neck specs."""
    patches = []
    for p in atlas.patches():
        entry = {"name": p.name, "zone": p.zone, "domain": [list(d) for d in p.domain], "scale": p.scale, "weight": p.weight}
        if p.zone == "seed":
            entry["map"] = {"primitive": "seed_map", "alpha": atlas.cfg.alpha, "variant": atlas.cfg.variant.value,
                            "curve": {"r": atlas.curve.r, "mu": atlas.curve.mu}}
        elif p.zone == "hole":
            spec = atlas.specs[p.neck - 1]
            br = spec.point.branches[p.branch]
            entry["map"] = {"primitive": "rescaled_seed_graph", "neck": p.neck, "branch": p.branch, "L": spec.L,
                            "graph_series": _complex_list(br.graph_series)}
        elif p.zone == "collar":
            c = atlas.collar(p.neck, p.branch)
            entry["map"] = {"primitive": "glued_graph", "neck": p.neck, "branch": p.branch, "eta": c.input.eta,
                            "sigma": c.input.sigma, "N": c.input.N, "frame": _complex_list(c.branch.frame.ravel())}
        else:
            spec = atlas.specs[p.neck - 1]
            entry["map"] = {"primitive": "neck_annulus", "neck": p.neck, "eta": spec.eta, "L": spec.L}
        patches.append(entry)
    return {
        "schema": SCHEMA,
        "config": config.payload(),
        "necks": [s.to_json() for s in atlas.specs],
        "patches": patches,
    }


def cmd_construct(config: RunConfig) -> int:
    atlas = Construction(config).atlas
    _dump(_outdir(config) / "atlas.json", atlas_document(config, atlas))
    print(f"constructed {len(atlas.specs)} necks, {len(atlas.patches())} patches")
    return 0


def _summary(doc: dict) -> list[str]:
    lines = []
    for c in doc["certificates"]:
        flag = "PASS" if c["passed"] else "FAIL"
        lines.append(f"{flag} {c['name']:<26} residual {c['residual']} tolerance {c['tolerance']}")
    return lines


def cmd_verify(config: RunConfig) -> int:
    report = run_all(config)
    path = _outdir(config) / "report.json"
    path.write_text(report.to_json())
    for line in _summary(report.payload()):
        print(line)
    if report.failed:
        print("failed: " + ", ".join(report.failed))
    return 0 if report.passed else 1


def cmd_export_mesh(config: RunConfig) -> int:
    atlas = Construction(config).atlas
    mesh = mesh_and_euler(atlas, config.mesh_resolution)
    out = _outdir(config)
    mesh.write(out / "surface.mesh")
    (out / "chi.txt").write_text(mesh.chi_text())
    print(mesh.chi_text().strip().replace("\n", ", "))
    return 0


def cmd_report(config: RunConfig) -> int:
    path = Path(config.out) / "report.json"
    doc = json.loads(path.read_text())
    for line in _summary(doc):
        print(line)
    return 0 if doc["passed"] else 1


COMMANDS = {"construct": cmd_construct, "verify": cmd_verify, "export-mesh": cmd_export_mesh, "report": cmd_report}


def parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="calibrated-necks", description="Calibrated surfaces with necks: construction and certificates.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--variant", choices=["quadratic", "branched"], default="quadratic")
    p.add_argument("--epsilon", type=float, default=1e-2)
    p.add_argument("--big-n", type=int, default=2, help="derivative order N")
    p.add_argument("--necks", type=int, default=3, help="number of necks K")
    p.add_argument("--zmin", type=float, default=math.exp(-2 * math.pi))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out")
    p.add_argument("--only", default=None, help=f"comma-separated suites from {','.join(SUITES)}")
    p.add_argument("--mutate", choices=sorted(MUTATIONS), default=None)
    p.add_argument("--resolution", type=int, default=2, help="mesh resolution")
    p.add_argument("--quad-tol", type=float, default=1e-7, help="relative quadrature refinement tolerance")
    return p


def main(argv: list[str] | None = None) -> int:
    args = parser().parse_args(argv)
    try:
        config = _config(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](config)
    except asm.AssemblyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
