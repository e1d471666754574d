"""``pdmpkit`` command line.

Every command writes its outputs plus ``manifest.json`` into ``--out``.
``pdmpkit replay manifest.json`` re-runs the recorded command; CSV outputs
are byte-identical for the same toolkit version.

Exit codes: 0 success, 2 parse/validation error, 3 numerical failure,
4 inconclusive classification.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..analytic import NonIntegrable, stationary_switch
from ..classify import MethodConfig, classify, closed_form_face, invasion_table
from ..families import figure_model
from ..geometry import bracket_span_rank, direct_detM, expl2d_detM, pp_detM
from ..model import ModelError, RateBoundError, SubspaceIndex, restrict
from ..simulate import IntegratorError, SimConfig, Trajectory, simulate, simulate_ensemble
from .modelfile import format_model, parse_model_file
from .svg import PALETTE, Plot

EXIT_OK, EXIT_PARSE, EXIT_NUMERIC, EXIT_INCONCLUSIVE = 0, 2, 3, 4

# figure configurations: model, start, horizon, sampling, replicates
FIGURES = {
    "fig1": dict(x0=[1.0], t_max=100.0, record_dt=0.05, replicates=1),
    "fig2a": dict(x0=[1.0], t_max=100.0, record_dt=0.05, replicates=1),
    "fig2b": dict(x0=[1.0], t_max=100.0, record_dt=0.05, replicates=1),
    "fig3a": dict(x0=[1.0, 1.0], t_max=5000.0, record_dt=5.0, replicates=100),
    "fig3b": dict(x0=[50.0, 100.0], t_max=5000.0, record_dt=5.0, replicates=100),
}


@dataclass
class RunManifest:
    command: str
    argv: list[str]
    config_path: str | None
    parameters: dict
    seed: int | None
    version: str
    outputs: list[str] = field(default_factory=list)
    model_fingerprint: str | None = None
    started: str = ""
    wall_clock: float = 0.0

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2) + "\n")

    @classmethod
    def read(cls, path) -> "RunManifest":
        return cls(**json.loads(Path(path).read_text()))


class Outputs:
    """Collects written files for the manifest."""

    def __init__(self, root: Path):
        self.root = root
        self.root.mkdir(parents=True, exist_ok=True)
        self.files: list[str] = []

    def path(self, name: str) -> Path:
        p = self.root / name
        p.parent.mkdir(parents=True, exist_ok=True)
        self.files.append(str(p))
        return p


# --------------------------------------------------------------------------
# CSV writers


def _num(v: float) -> str:
    return repr(float(v))


def write_trajectory_csv(traj: Trajectory, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"x{i}" for i in range(1, traj.n + 1)] + ["k"])
        x = traj.x
        for t, row, k in zip(traj.t, x, traj.k):
            w.writerow([_num(t)] + [_num(v) for v in row] + [int(k)])


def write_jumps_csv(traj: Trajectory, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "from", "to"] + [f"x{i}" for i in range(1, traj.n + 1)])
        for t, a, b, y in zip(traj.jump_t, traj.jump_from, traj.jump_to, traj.jump_logx):
            w.writerow([_num(t), int(a), int(b)] + [_num(v) for v in np.exp(y)])


def write_endpoints_csv(trajs, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        n = trajs[0].n
        w.writerow(["replicate"] + [f"x{i}" for i in range(1, n + 1)]
                   + [f"logx{i}" for i in range(1, n + 1)] + ["k"])
        for tr in trajs:
            w.writerow([tr.replicate] + [_num(v) for v in tr.final_x]
                       + [_num(v) for v in tr.logx[-1]] + [int(tr.k[-1])])


def _env_bands(traj: Trajectory, env: int = 2) -> list[tuple[float, float]]:
    bands, start = [], 0.0 if traj.k[0] == env else None
    for t, a, b in zip(traj.jump_t, traj.jump_from, traj.jump_to):
        if b == env:
            start = float(t)
        elif a == env and start is not None:
            bands.append((start, float(t)))
            start = None
    if start is not None:
        bands.append((start, traj.t_max))
    return bands


def _thin(traj: Trajectory, limit: int = 4000) -> slice:
    step = max(1, len(traj.t) // limit)
    return slice(None, None, step)


# --------------------------------------------------------------------------
# argument helpers


def _vector(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _load_model(args):
    if getattr(args, "model", None):
        return parse_model_file(args.model)
    if getattr(args, "figure_model", None):
        return figure_model(args.figure_model)
    raise ModelError("give --model FILE or --figure-model NAME")


def _sim_config(args, **over) -> SimConfig:
    kw = dict(t_max=args.tmax, seed=args.seed, record_dt=args.record_dt,
              rtol=args.rtol, atol=args.atol)
    kw.update(over)
    return SimConfig(**kw)


def _start(model, args) -> list[float]:
    x0 = args.x0 if args.x0 is not None else [1.0] * model.n
    if len(x0) != model.n:
        raise ModelError(f"--x0 needs {model.n} components")
    return x0


# --------------------------------------------------------------------------
# commands


def cmd_simulate(args, out: Outputs, man: RunManifest) -> int:
    model = _load_model(args)
    man.model_fingerprint = model.fingerprint()
    traj = simulate(model, _start(model, args), args.k0, _sim_config(args))
    write_trajectory_csv(traj, out.path("trajectory.csv"))
    write_jumps_csv(traj, out.path("jumps.csv"))
    out.path("model.ini").write_text(_model_text(model))
    return EXIT_OK


def cmd_ensemble(args, out: Outputs, man: RunManifest) -> int:
    model = _load_model(args)
    man.model_fingerprint = model.fingerprint()
    trajs = simulate_ensemble(model, _start(model, args), args.k0, _sim_config(args),
                              args.replicates, workers=args.workers)
    write_endpoints_csv(trajs, out.path("endpoints.csv"))
    if args.paths:
        for tr in trajs:
            write_trajectory_csv(tr, out.path(f"paths/trajectory_{tr.replicate:04d}.csv"))
    return EXIT_OK


def cmd_density(args, out: Outputs, man: RunManifest) -> int:
    model = _load_model(args)
    man.model_fingerprint = model.fingerprint()
    species = args.species if args.species is not None else 1
    d = closed_form_face(model, species)
    if d is None:
        raise ModelError(f"no closed-form density for the species-{species} axis of this model")
    d.to_json(out.path("density.json"))
    d.to_csv(out.path("density.csv"), count=args.points)
    print(json.dumps(d.describe()))
    return EXIT_OK


def _method_config(args) -> MethodConfig:
    faces = None
    if args.faces:
        faces = tuple(tuple(int(v) for v in f.split(",") if v.strip()) for f in args.faces.split(";"))
    return MethodConfig(mc_t_max=args.mc_tmax, mc_seed=args.seed,
                        prefer="MonteCarlo" if args.monte_carlo else "auto", faces=faces)


def cmd_invade(args, out: Outputs, man: RunManifest) -> int:
    model = _load_model(args)
    man.model_fingerprint = model.fingerprint()
    table = invasion_table(model, _method_config(args))
    doc = table.to_dict()
    out.path("invasion.json").write_text(json.dumps(doc, indent=2) + "\n")
    with open(out.path("invasion.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["subspace", "exists", "method"] + [f"lambda{j}" for j in range(1, model.n + 1)]
                   + [f"se{j}" for j in range(1, model.n + 1)])
        for r in table.rows:
            w.writerow([" ".join(map(str, sorted(r.subspace.members))) or "0", int(r.exists),
                        r.method or ""] + [_num(v) for v in r.lambdas] + [_num(v) for v in r.se])
    for r in table.rows:
        vals = ", ".join("nan" if not np.isfinite(v) else f"{v:.6g}" for v in r.lambdas)
        print(f"{r.subspace!r:>10} exists={r.exists!s:5} method={r.method} lambda=({vals}) {r.note}")
    return EXIT_OK


def cmd_classify(args, out: Outputs, man: RunManifest) -> int:
    model = _load_model(args)
    man.model_fingerprint = model.fingerprint()
    verdict = classify(model, _method_config(args))
    verdict.to_json(out.path("verdict.json"))
    print(verdict.describe())
    return EXIT_INCONCLUSIVE if verdict.outcome == "Inconclusive" else EXIT_OK


def cmd_brackets(args, out: Outputs, man: RunManifest) -> int:
    model = _load_model(args)
    man.model_fingerprint = model.fingerprint()
    x = np.asarray(args.point if args.point is not None else [1.0] * model.n)
    if x.size != model.n:
        raise ModelError(f"--point needs {model.n} components")
    basis = bracket_span_rank(model, x, args.depth)
    if model.n == 2 and model.n0 == 2:
        basis.det["direct"] = direct_detM(model, x)
        if model.family == "PredPrey":
            basis.det["closed_form"] = pp_detM(model.param_dict, x)
        elif model.family == "Expl2D":
            basis.det["closed_form"] = expl2d_detM(model.param_dict, x)
    basis.to_json(out.path("brackets.json"))
    print(f"rank {basis.rank} of {model.n} at depth {basis.depth}: "
          f"{'holds' if basis.holds else 'fails'}")
    return EXIT_OK


def cmd_figure(args, out: Outputs, man: RunManifest) -> int:
    name = args.name
    spec = FIGURES[name]
    model = figure_model(name)
    man.model_fingerprint = model.fingerprint()
    t_max = args.tmax if args.tmax is not None else spec["t_max"]
    reps = args.replicates if args.replicates is not None else spec["replicates"]
    cfg = SimConfig(t_max=t_max, seed=args.seed, record_dt=spec["record_dt"])
    nu = stationary_switch(model.switch.rates(np.zeros(model.n)))
    if model.n == 1:
        lam = float(sum(nu[k] * model.fitness(np.zeros(1), k + 1)[0] for k in range(model.n0)))
        print(f"lambda(delta_0 x nu) = {lam:.6g}")
    trajs = simulate_ensemble(model, spec["x0"], 1, cfg, reps, workers=args.workers)
    plot = Plot(title=name, xlabel="t", ylabel="X", logy=model.n > 1)
    if reps == 1:
        tr = trajs[0]
        write_trajectory_csv(tr, out.path(f"{name}.csv"))
        write_jumps_csv(tr, out.path(f"{name}_jumps.csv"))
        s = _thin(tr)
        for i in range(tr.n):
            plot.line(tr.t[s], tr.x[s, i], color=PALETTE[i], label=f"X{i + 1}")
        plot.bands = _env_bands(tr)
        plot.band_label = "r(t) = 2"
    else:
        write_endpoints_csv(trajs, out.path(f"{name}.csv"))
        with open(out.path(f"{name}_paths.csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["replicate", "t"] + [f"x{i}" for i in range(1, model.n + 1)] + ["k"])
            for tr in trajs:
                for t, row, k in zip(tr.t, tr.x, tr.k):
                    w.writerow([tr.replicate, _num(t)] + [_num(v) for v in row] + [int(k)])
        for tr in trajs:
            for i in range(tr.n):
                plot.line(tr.t, np.maximum(tr.x[:, i], 1e-300), color=PALETTE[i], width=0.6,
                          opacity=0.35, label=f"X{i + 1}" if tr.replicate == 0 else None)
        final = np.array([tr.final_x for tr in trajs])
        print(f"paths with min(x) > 0.01: {int(np.sum(final.min(axis=1) > 0.01))}/{reps}")
        print(f"paths with x2 < 1e-3: {int(np.sum(final[:, 1] < 1e-3))}/{reps}")
        print(f"median final x2: {float(np.median(final[:, 1])):.3g}")
    plot.save(out.path(f"{name}.svg"))
    return EXIT_OK


def _model_text(model) -> str:
    try:
        return format_model(model)
    except ModelError as exc:
        return f"# not serializable: {exc}\n"


def cmd_replay(args) -> int:
    man = RunManifest.read(args.manifest)
    argv = list(man.argv)
    if args.out is not None:
        argv = _replace_out(argv, args.out)
    return main(argv)


def _replace_out(argv: list[str], out: str) -> list[str]:
    res, skip = [], False
    for i, a in enumerate(argv):
        if skip:
            skip = False
            continue
        if a == "--out":
            skip = True
            continue
        if a.startswith("--out="):
            continue
        res.append(a)
    return res + ["--out", out]


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pdmpkit", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"pdmpkit {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, model=True, sim=False):
        if model:
            sp.add_argument("--model", help="model file")
            sp.add_argument("--figure-model", choices=sorted(FIGURES),
                            help="use a built-in figure configuration instead of a file")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", default="out", help="output directory")
        if sim:
            sp.add_argument("--tmax", type=float, default=100.0)
            sp.add_argument("--x0", type=_vector, default=None)
            sp.add_argument("--k0", type=int, default=1)
            sp.add_argument("--record-dt", type=float, default=0.1)
            sp.add_argument("--rtol", type=float, default=1e-8)
            sp.add_argument("--atol", type=float, default=1e-10)

    sp = sub.add_parser("simulate", help="one trajectory")
    common(sp, sim=True)
    sp = sub.add_parser("ensemble", help="independent replicates")
    common(sp, sim=True)
    sp.add_argument("--replicates", type=int, default=10)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--paths", action="store_true", help="also write every trajectory")
    sp = sub.add_parser("density", help="closed-form stationary density on a species axis")
    common(sp)
    sp.add_argument("--species", type=int, default=None)
    sp.add_argument("--points", type=int, default=400)
    for name in ("invade", "classify"):
        sp = sub.add_parser(name, help="invasion-rate table" if name == "invade" else "verdict")
        common(sp)
        sp.add_argument("--mc-tmax", type=float, default=2e4)
        sp.add_argument("--monte-carlo", action="store_true", help="skip closed forms")
        sp.add_argument("--faces", help="face lattice for custom models, e.g. '1;2;1,2'")
    sp = sub.add_parser("brackets", help="bracket span rank at a point")
    common(sp)
    sp.add_argument("--point", type=_vector, default=None)
    sp.add_argument("--depth", type=int, default=3)
    sp = sub.add_parser("figure", help="reproduce a figure configuration")
    sp.add_argument("name", choices=sorted(FIGURES))
    common(sp, model=False)
    sp.add_argument("--tmax", type=float, default=None)
    sp.add_argument("--replicates", type=int, default=None)
    sp.add_argument("--workers", type=int, default=1)
    sp = sub.add_parser("replay", help="re-run a manifest")
    sp.add_argument("manifest")
    sp.add_argument("--out", default=None)
    return p


COMMANDS = {
    "simulate": cmd_simulate, "ensemble": cmd_ensemble, "density": cmd_density,
    "invade": cmd_invade, "classify": cmd_classify, "brackets": cmd_brackets,
    "figure": cmd_figure,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    if args.command == "replay":
        return cmd_replay(args)
    out = Outputs(Path(args.out))
    params = {k: v for k, v in vars(args).items() if k != "command"}
    man = RunManifest(args.command, argv, getattr(args, "model", None), params,
                      getattr(args, "seed", None), __version__,
                      started=time.strftime("%Y-%m-%dT%H:%M:%S%z"))
    t0 = time.perf_counter()
    try:
        code = COMMANDS[args.command](args, out, man)
    except (ModelError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (IntegratorError, NonIntegrable, RateBoundError, FloatingPointError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    man.wall_clock = time.perf_counter() - t0
    man.outputs = list(out.files) + [str(out.root / "manifest.json")]
    man.write(out.root / "manifest.json")
    return code


if __name__ == "__main__":
    sys.exit(main())
