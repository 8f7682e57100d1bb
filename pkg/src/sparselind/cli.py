"""Command-line experiment runner.

Exit codes: 0 on success, 2 for invalid input, 3 when a numerical invariant
fails (the failing check name is printed).
"""
from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .applications import (
    WalkSpec,
    stationary_state,
    stochastic_walk_generator,
    trajectory_csv,
    walk_trajectory,
)
from .classes import (
    DenseDiagonalSpec,
    DiagonalSpec,
    IdenticalCoordinateSpec,
    OneKetSparseSpec,
    Strongly1SparseSpec,
    d_sparse_diagonal_channel,
    decompose_d_sparse,
    dense_diagonal_gate_sequence,
    identical_coordinate_channel,
    one_ket_sparse_channel,
    strongly_1sparse_channel,
)
from .decompose import SparseLindbladOpSpec, permutation_cover
from .errors import InvariantError, ValidationError
from .io import (
    LocalModel,
    complex_to_pairs,
    dumps,
    load_json,
    parse_json_text,
    parse_model,
)
from .lindblad import (
    LindbladModel,
    OvercompleteGKS,
    QuantumChannel,
    Superoperator,
    choi_distance,
    exact_channel,
    gks_superop_matrix,
    hamiltonian_superop,
    lindblad_ops_from_gks,
)
from .nff import ParityInstance, parity_run, tail_bound_check
from .product import GeneratorList, fit_slope, rows_to_csv, strang_step
from .shorttime import (
    approximate_isometry,
    isometry_defect,
    normalize,
    short_time_map,
    sparse_op_evolution,
)
from .stinespring import (
    embed_local_model,
    local_lindbladian_channel,
    pattern_from_sets,
    stinespring_pipeline,
    verify_two_stage,
)

METHODS = ("exact", "class", "stinespring-pipeline", "trotter", "short-time")
SUPPORT_TOL = 1e-10


@dataclass
class ExperimentConfig:
    command: str
    model: object = None
    t: float = 1.0
    method: str = "exact"
    grid: list = field(default_factory=list)
    out: str | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValidationError(f"method must be one of {METHODS}")
        if not np.isfinite(self.t) or self.t < 0:
            raise ValidationError(f"t must be finite and nonnegative, got {self.t}")
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ValidationError("grid must be strictly ascending")


def timestamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def parse_grid(text: str | None, integer: bool = False, allow_zero: bool = False) -> list:
    if not text:
        return []
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ValidationError(f"grid {text!r} must be a comma-separated list of numbers") from None
    if integer:
        if any(v != int(v) or v < 1 for v in vals):
            raise ValidationError(f"grid {text!r} must contain positive integers")
        return [int(v) for v in vals]
    if any(v < 0 or (v == 0 and not allow_zero) for v in vals):
        raise ValidationError(f"grid {text!r} must contain positive values")
    return vals


def load_model(source: str | None):
    if source is None:
        raise ValidationError("--model is required")
    data = parse_json_text(source, "<inline>") if source.lstrip().startswith("{") else load_json(source)
    try:
        return parse_model(data)
    except (TypeError, KeyError, IndexError) as exc:
        raise ValidationError(f"malformed model: {exc}") from None


# ---------------------------------------------------------------- model dispatch


def model_kind(model) -> str:
    return type(model).__name__


def generator_of(model):
    """Something ``liouvillian`` accepts, acting on the full system."""
    if isinstance(model, (LindbladModel, OvercompleteGKS)):
        return model
    if isinstance(model, LocalModel):
        return embed_local_model(model.model, model.c, model.n)
    if isinstance(model, SparseLindbladOpSpec):
        return LindbladModel(model.dim, None, [model.matrix()])
    if isinstance(model, WalkSpec):
        return stochastic_walk_generator(model)
    return model.gks()


def as_lindblad_model(model) -> LindbladModel:
    gen = generator_of(model)
    if isinstance(gen, LindbladModel):
        return gen
    if isinstance(gen, OvercompleteGKS):
        return lindblad_ops_from_gks(gen)
    raise ValidationError(f"{model_kind(model)} has no Lindblad-operator form")


def split_generators(model) -> GeneratorList:
    """Terms for the product formula."""
    if isinstance(model, (DiagonalSpec, DenseDiagonalSpec)):
        spec = model if isinstance(model, DiagonalSpec) else as_diagonal(model)
        pieces = decompose_d_sparse(spec)
        gens = [p.gks() for p in pieces] or [spec.gks()]
        return GeneratorList(gens, [f"piece{i}" for i in range(len(gens))])
    if isinstance(model, WalkSpec):
        n = model.vertices
        scale_h, scale_l = (1.0, 1.0) if model.mix is None else (1 - model.mix, model.mix)
        Hs = Superoperator(n, scale_h * hamiltonian_superop(model.hamiltonian_matrix()))
        Ls = Superoperator(n, scale_l * gks_superop_matrix(model.dissipative_spec().gks().dense(), n))
        return GeneratorList([Hs, Ls], ["hamiltonian", "dissipator"])
    try:
        lm = as_lindblad_model(model)
    except (ValidationError, InvariantError):
        # coefficient tables that are not PSD still define valid evolutions here
        return GeneratorList([generator_of(model)], ["generator"])
    N = lm.dim
    gens, labels = [], []
    if np.any(lm.hamiltonian != 0):
        gens.append(LindbladModel(N, lm.hamiltonian, []))
        labels.append("hamiltonian")
    for j, L in enumerate(lm.lindblad_ops):
        gens.append(LindbladModel(N, None, [L]))
        labels.append(f"L{j}")
    if not gens:
        gens, labels = [LindbladModel(N)], ["zero"]
    return GeneratorList(gens, labels)


def as_diagonal(spec: DenseDiagonalSpec) -> DiagonalSpec:
    return DiagonalSpec(spec.dim, np.repeat(spec.a[:, None], spec.dim, axis=1), d=spec.dim)


def single_sparse_op(model) -> SparseLindbladOpSpec:
    if isinstance(model, SparseLindbladOpSpec):
        return model
    lm = as_lindblad_model(model)
    if np.any(lm.hamiltonian != 0) or len(lm.lindblad_ops) != 1:
        raise ValidationError("the short-time method needs exactly one Lindblad operator and no Hamiltonian")
    return permutation_cover(lm.lindblad_ops[0])


def class_channel(model, t: float, r: int) -> QuantumChannel:
    if isinstance(model, IdenticalCoordinateSpec):
        return identical_coordinate_channel(model, t)
    if isinstance(model, Strongly1SparseSpec):
        return strongly_1sparse_channel(model, t)
    if isinstance(model, DiagonalSpec):
        return d_sparse_diagonal_channel(model, t, r)
    if isinstance(model, DenseDiagonalSpec):
        return dense_diagonal_gate_sequence(model, t).channel()
    if isinstance(model, OneKetSparseSpec):
        return one_ket_sparse_channel(model, t)
    if isinstance(model, LocalModel):
        return local_lindbladian_channel(model.model, model.c, model.n, t)
    raise ValidationError(f"no class construction for {model_kind(model)}")


def infer_pattern(channel: QuantumChannel, tol: float = SUPPORT_TOL):
    """Orbits are the connected components of the channel's support."""
    N = channel.dim_in
    parent = list(range(N))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    J = np.abs(channel.choi).reshape(N, N, N, N)  # [a, x, b, y]
    scale = max(1.0, J.max())
    for a, x, b, y in zip(*np.nonzero(J > tol * scale)):
        parent[find(a)] = find(x)
        parent[find(b)] = find(y)
    comps: dict = {}
    for x in range(N):
        comps.setdefault(find(x), []).append(x)
    return pattern_from_sets(sorted(comps.values()), N)


def pipeline_channel(model, t: float) -> QuantumChannel:
    ref = exact_channel(generator_of(model), t)
    return stinespring_pipeline(ref, infer_pattern(ref)).channel


def build_channel(model, cfg: ExperimentConfig, r: int, n: int) -> QuantumChannel:
    m = cfg.method
    if m == "exact":
        return exact_channel(generator_of(model), cfg.t)
    if m == "class":
        return class_channel(model, cfg.t, r)
    if m == "stinespring-pipeline":
        return pipeline_channel(model, cfg.t)
    if m == "trotter":
        return strang_step(split_generators(model), cfg.t, r)
    return sparse_op_evolution(single_sparse_op(model), cfg.t, n)


def dim_of(model) -> int:
    if isinstance(model, WalkSpec):
        return model.vertices
    if isinstance(model, LocalModel):
        return 2 ** model.n
    return model.dim


# ---------------------------------------------------------------- commands


def emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def cmd_simulate(cfg: ExperimentConfig, args) -> str:
    model = cfg.model
    ch = build_channel(model, cfg, args.r, args.n)
    ref = ch if cfg.method == "exact" else exact_channel(generator_of(model), cfg.t)
    dist = choi_distance(ch, ref)
    report = {
        "generated": timestamp(),
        "command": "simulate",
        "method": cfg.method,
        "model": model_kind(model),
        "dim": dim_of(model),
        "t": cfg.t,
        "r": args.r,
        "n": args.n,
        "choi_lower": dist.lower,
        "choi_upper": dist.upper,
        "cp_violation": ch.cp_violation(),
        "tp_error": ch.tp_error(),
        "choi": complex_to_pairs(ch.choi),
    }
    return dumps(report) + "\n"


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def cmd_convergence(cfg: ExperimentConfig, args) -> str:
    model, t = cfg.model, cfg.t
    if not cfg.grid:
        raise ValidationError("convergence needs --grid")
    axis = args.axis or {"trotter": "r", "class": "r", "short-time": "n"}.get(cfg.method)
    if axis is None:
        raise ValidationError(f"method {cfg.method!r} has no convergence parameter")
    header = {"generated": timestamp(), "command": "convergence", "method": cfg.method,
              "model": model_kind(model), "t": format(t, ".17g"), "axis": axis}
    columns = (axis, "error_lower", "error_upper", "wall_seconds")
    rows, extra = [], {}
    if axis == "eps":
        if cfg.method != "short-time":
            raise ValidationError("the eps axis belongs to the short-time method")
        unit, factor = normalize(single_sparse_op(model))
        gen = LindbladModel(unit.dim, None, [unit.matrix()])
        columns = ("eps", "error_lower", "error_upper", "defect", "wall_seconds")
        for eps in cfg.grid:
            def step(eps=eps):
                approx = short_time_map(unit, eps)
                return choi_distance(approx, exact_channel(gen, eps, check=False))
            dist, wall = _timed(step)
            defect = isometry_defect(approximate_isometry(unit, eps)) if unit.k > 1 else 0.0
            rows.append({"eps": eps, "error_lower": dist.lower, "error_upper": dist.upper,
                         "defect": defect, "wall_seconds": wall})
        slope = fit_slope(cfg.grid, [r["error_lower"] for r in rows])
        dslope = fit_slope(cfg.grid, [r["defect"] for r in rows])
        extra["defect_slope"] = "none" if dslope is None else format(dslope, ".17g")
        header["rescale_factor"] = format(factor, ".17g")
    else:
        grid = [int(v) for v in cfg.grid]
        if any(v != g or v < 1 for v, g in zip(grid, cfg.grid)):
            raise ValidationError(f"the {axis} axis needs positive integers")
        ref = exact_channel(generator_of(model), t, check=False)
        for v in grid:
            if axis == "r":
                if cfg.method == "class":
                    build = lambda v=v: class_channel(model, t, v)
                else:
                    gens = split_generators(model)
                    build = lambda v=v, gens=gens: strang_step(gens, t, v)
            elif axis == "n":
                spec = single_sparse_op(model)
                build = lambda v=v, spec=spec: sparse_op_evolution(spec, t, v)
            else:
                raise ValidationError(f"unknown axis {axis!r}")
            ch, wall = _timed(build)
            dist = choi_distance(ch, ref)
            rows.append({axis: v, "error_lower": dist.lower, "error_upper": dist.upper, "wall_seconds": wall})
        slope = fit_slope(grid, [r["error_lower"] for r in rows])
    text = rows_to_csv(rows, header, columns)
    text += f"# slope: {'none' if slope is None else format(slope, '.17g')}\n"
    for k, v in extra.items():
        text += f"# {k}: {v}\n"
    return text


def cmd_decompose(cfg: ExperimentConfig, args) -> str:
    model = cfg.model
    report = {"generated": timestamp(), "command": "decompose", "model": model_kind(model)}
    if isinstance(model, (DiagonalSpec, DenseDiagonalSpec)):
        spec = model if isinstance(model, DiagonalSpec) else as_diagonal(model)
        pieces = decompose_d_sparse(spec)
        total = sum((p.rate_matrix() for p in pieces), np.zeros((spec.dim, spec.dim)))
        report.update({
            "dim": spec.dim,
            "d": spec.d,
            "piece_bound": 3 * spec.d ** 2 + 1,
            "count": len(pieces),
            "reconstruction_error": float(np.max(np.abs(total - spec.a))),
            "pieces": [{"nu": list(p.nu), "off": p.off, "diag": p.diag} for p in pieces],
        })
    else:
        specs = [model] if isinstance(model, SparseLindbladOpSpec) else [
            permutation_cover(L) for L in as_lindblad_model(model).lindblad_ops]
        report["dim"] = dim_of(model)
        report["operators"] = [{
            "k": s.k,
            "perms": s.perms,
            "coeffs": complex_to_pairs(s.coeffs),
            "max_entry": s.max_entry(),
        } for s in specs]
    return dumps(report) + "\n"


def cmd_verify_gram(cfg: ExperimentConfig, args) -> str:
    model = cfg.model
    ref = exact_channel(generator_of(model), cfg.t)
    pattern = infer_pattern(ref)
    res = stinespring_pipeline(ref, pattern)
    norm_err, orth_err = res.gram.trace_constraint_errors()
    dist = choi_distance(res.channel, ref)
    checks = []
    for orb in pattern.orbits():
        checks.append(verify_two_stage(res.isometry, orb[0], check_unitarity=len(orb) > 1))
    report = {
        "generated": timestamp(),
        "command": "verify-gram",
        "model": model_kind(model),
        "dim": pattern.dim,
        "t": cfg.t,
        "nu": list(pattern.nu),
        "d": pattern.d,
        "orbits": pattern.orbits(),
        "gram_psd_violation": res.gram.psd_violation(),
        "gram_normalization_error": norm_err,
        "gram_orthogonality_error": orth_err,
        "anc_dim": res.ancilla.anc_dim,
        "isometry_error": res.isometry.isometry_error(),
        "choi_lower": dist.lower,
        "choi_upper": dist.upper,
        "two_stage": checks,
        "pass": bool(all(c["pass"] for c in checks)),
    }
    return dumps(report) + "\n"


def cmd_walk(cfg: ExperimentConfig, args) -> str:
    model = cfg.model
    if not isinstance(model, WalkSpec):
        raise ValidationError("walk needs a graph model {vertices, edges, hamiltonian}")
    if args.mode == "stationary":
        res = stationary_state(stochastic_walk_generator(model))
        report = {
            "generated": timestamp(),
            "command": "walk",
            "mode": "stationary",
            "vertices": model.vertices,
            "nullity": res.nullity,
            "unique": res.unique,
            "residual": res.residual,
            "state": None if res.state is None else complex_to_pairs(res.state),
        }
        return dumps(report) + "\n"
    times = parse_grid(args.times, allow_zero=True) if args.times else [cfg.t]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ValidationError("--times must be strictly ascending")
    if not 0 <= args.start < model.vertices:
        raise ValidationError(f"--start must lie in [0, {model.vertices})")
    rho0 = np.zeros((model.vertices, model.vertices), dtype=complex)
    rho0[args.start, args.start] = 1
    states = walk_trajectory(model, rho0, times)
    return f"# generated: {timestamp()}\n" + trajectory_csv(times, states)


def cmd_nff(cfg: ExperimentConfig, args) -> str:
    N = args.N
    if N < 1:
        raise ValidationError("--N must be at least 1")
    inst = ParityInstance(N, args.s) if args.s is not None else ParityInstance.random(N, cfg.seed)
    run = parity_run(inst, args.t)
    tail = tail_bound_check(range(1, max(N, 20) + 1))
    report = {"generated": timestamp(), "command": "nff", "seed": cfg.seed, **run,
              "success_threshold": 63 / 64, "success_pass": run["success_prob"] >= 63 / 64, "tail": tail}
    return dumps(report) + "\n"


COMMANDS = {
    "simulate": cmd_simulate,
    "convergence": cmd_convergence,
    "decompose": cmd_decompose,
    "verify-gram": cmd_verify_gram,
    "walk": cmd_walk,
    "nff": cmd_nff,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sparselind", description="Simulate sparse Lindbladians through sparse Stinespring isometries.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, t_default=1.0, model=True):
        if model:
            sp.add_argument("--model", help="model JSON file or inline JSON object")
        sp.add_argument("--t", type=float, default=t_default, help="evolution time")
        sp.add_argument("--out", help="output file (default: stdout)")
        sp.add_argument("--seed", type=int, default=None, help="random seed")

    s = sub.add_parser("simulate", help="build a channel and compare it with the exact exponential")
    common(s)
    s.add_argument("--method", choices=METHODS, default="exact")
    s.add_argument("--r", type=int, default=8, help="product-formula steps")
    s.add_argument("--n", type=int, default=64, help="short-time steps")

    c = sub.add_parser("convergence", help="error against a grid of step counts")
    common(c)
    c.add_argument("--method", choices=("trotter", "class", "short-time"), default="trotter")
    c.add_argument("--grid", required=True, help="comma-separated ascending grid")
    c.add_argument("--axis", choices=("r", "n", "eps"), default=None)

    d = sub.add_parser("decompose", help="dump the sparse decomposition of a model")
    common(d)

    v = sub.add_parser("verify-gram", help="run the Gram/isometry pipeline and report each check")
    common(v)

    w = sub.add_parser("walk", help="quantum stochastic walk trajectory or stationary state")
    common(w)
    w.add_argument("--mode", choices=("trajectory", "stationary"), default="stationary")
    w.add_argument("--times", help="comma-separated times for a trajectory")
    w.add_argument("--start", type=int, default=0, help="initial vertex")

    n = sub.add_parser("nff", help="parity demonstration and Poisson tail check")
    common(n, t_default=None, model=False)
    n.add_argument("--N", type=int, default=7)
    n.add_argument("--s", default=None, help="hidden bit string (default: random from --seed)")
    return p


def make_config(args) -> ExperimentConfig:
    needs_model = args.command != "nff"
    integer = getattr(args, "axis", None) != "eps" and args.command == "convergence"
    grid = parse_grid(getattr(args, "grid", None), integer=integer)
    return ExperimentConfig(
        command=args.command,
        model=load_model(args.model) if needs_model else None,
        t=1.0 if args.t is None else args.t,
        method=getattr(args, "method", "exact"),
        grid=grid,
        out=args.out,
        seed=args.seed,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = make_config(args)
        text = COMMANDS[args.command](cfg, args)
        emit(text, cfg.out)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InvariantError as exc:
        print(f"invariant check failed: {exc.check}", file=sys.stderr)
        print(str(exc), file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
