"""Command-line experiment runner.

Every subcommand reads an optional TOML config (flat ``key = value`` pairs),
applies command-line overrides, validates the result and writes one CSV.
Unknown keys are rejected so that typos in sweep files fail loudly.

Exit codes: 0 on success, 2 on configuration errors, 1 on any other error.
``GP_THREADS`` caps the worker threads used to run seeds concurrently.
"""

import argparse
import csv
import math
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from contextlib import contextmanager

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .bayesopt import (BanditInstance, BOConfig, RegretTrace, bandit_random_sim, bandit_ucb_sim,
                       run_bo)
from .errors import ConfigError, InvalidEdge, ParseError, PathGPError
from .exact_gp import FitConfig, GpModel, fit_hyperparameters, posterior_moments
from .graph import WeightedGraph, graph_gp_regress, graph_kernel_matrix, graph_spectrum
from .kernels import Family, StationaryKernelSpec
from .manifold import Manifold, ManifoldKernel
from .numerics import RandomSource
from .pathwise import (StarvationReport, evaluate_path, pathwise_condition, sample_exact_prior,
                       variance_starvation_report)
from .spectral import (FourierFeatureMap, build_fem1d_prior, sample_basis_prior,
                       sample_fem1d_prior)

# ---------------------------------------------------------------- config schema


@dataclass(frozen=True)
class Option:
    name: str
    kind: type
    default: object
    help: str
    choices: tuple = None
    required: bool = False


def _common():
    return [Option("seed", int, 0, "base random seed"),
            Option("output", str, "-", "output CSV path ('-' for stdout)")]


def _grid(lo=0.0, hi=1.0, num=51):
    return [Option("grid_lo", float, lo, "grid start"),
            Option("grid_hi", float, hi, "grid end"),
            Option("grid_num", int, num, "number of grid points")]


def _kernel(kappa=0.2):
    return [Option("family", str, "matern52", "kernel family",
                   tuple(f.value for f in Family)),
            Option("kappa", float, kappa, "length scale"),
            Option("variance", float, 1.0, "kernel variance")]


def _data():
    return [Option("data", str, None, "CSV with columns x,y (one input dimension)",
                   required=True),
            Option("noise_variance", float, 1e-3, "observation noise variance")]


SCHEMAS = {
    "kernel-eval": _common() + _kernel() + [
        Option("reference", float, 0.0, "second argument of the kernel")] + _grid(),
    "sample-prior": _common() + _kernel() + [
        Option("method", str, "rff", "prior construction", ("rff", "exact")),
        Option("num_features", int, 1024, "Fourier features (rff)"),
        Option("num_samples", int, 3, "number of paths")] + _grid(),
    "fit": _common() + _kernel() + _data() + [
        Option("max_iters", int, 100, "gradient ascent iterations"),
        Option("learning_rate", float, 0.1, "initial step in log space")],
    "posterior": _common() + _kernel() + _data() + [
        Option("method", str, "exact", "posterior construction", ("exact", "pathwise")),
        Option("num_features", int, 1024, "Fourier features for pathwise draws"),
        Option("num_samples", int, 3, "pathwise draws")] + _grid(),
    "bo-run": [Option("output", str, "-", "output CSV path ('-' for stdout)"),
               Option("seeds", list, [0], "list of seeds"),
               Option("target", str, "rff", "objective", ("ackley", "levy", "rosenbrock", "rff")),
               Option("domain", str, "box", "search space", ("box", "sphere2")),
               Option("dim", int, 2, "box dimension"),
               Option("lower", float, 0.0, "box lower bound"),
               Option("upper", float, 1.0, "box upper bound"),
               Option("family", str, "matern52", "kernel family",
                      tuple(f.value for f in Family)),
               Option("kappa", float, None, "length scale (default sqrt(d/100))"),
               Option("variance", float, 1.0, "kernel variance"),
               Option("noise_variance", float, 1e-3, "observation noise variance"),
               Option("num_features", int, 1024, "Fourier features per Thompson draw"),
               Option("batch_size", int, 1, "points per round"),
               Option("num_evals", int, 64, "total evaluations"),
               Option("acquisition", str, "ts", "acquisition", ("ts", "ucb", "ei", "random")),
               Option("num_candidates", int, 4096, "uniform candidates per round"),
               Option("refine_steps", int, 50, "finite-difference refinement steps"),
               Option("refit", bool, True, "refit hyperparameters after each round"),
               Option("ucb_c", float, 2.0, "GP-UCB width multiplier")],
    "graph-interp": _common() + [
        Option("edges", str, None, "edge list CSV i,j,weight", required=True),
        Option("observations", str, None, "CSV node,value", required=True),
        Option("family", str, "matern", "graph kernel", ("matern", "se")),
        Option("nu", float, 1.5, "Matérn smoothness"),
        Option("kappa", float, 1.0, "length scale"),
        Option("variance", float, 1.0, "mean prior variance"),
        Option("noise_variance", float, 1e-3, "observation noise variance"),
        Option("normalized", bool, False, "use the symmetric normalized Laplacian")],
    "manifold-kernel": _common() + [
        Option("manifold", str, "sphere2", "manifold", tuple(m.value for m in Manifold)),
        Option("family", str, "matern", "kernel", ("matern", "se")),
        Option("nu", float, 2.5, "Matérn smoothness"),
        Option("kappa", float, 0.5, "length scale"),
        Option("variance", float, 1.0, "kernel variance"),
        Option("levels", int, None, "truncation level (default: adaptive)")]
    + _grid(0.0, math.pi, 61),
    "variance-starve": _common() + [
        Option("n", int, 10, "training points, uniform on [0, 1]"),
        Option("family", str, "matern52", "kernel family", tuple(f.value for f in Family)),
        Option("kappa", float, 0.1, "length scale"),
        Option("variance", float, 1.0, "kernel variance"),
        Option("noise_variance", float, 1e-3, "observation noise variance"),
        Option("num_features", int, 100, "Fourier features"),
        Option("num_paths", int, 2048, "pathwise draws"),
        Option("moment_matched", bool, True, "whiten the Monte Carlo draws")]
    + _grid(0.0, 3.0, 31),
    "bandit-sim": _common() + [
        Option("arms", int, 10, "number of arms (means drawn uniformly if not given)"),
        Option("means", list, None, "explicit Bernoulli means"),
        Option("horizon", int, 10000, "rounds T"),
        Option("runs", int, 50, "independent runs"),
        Option("policy", str, "ucb", "policy", ("ucb", "random")),
        Option("stride", int, 100, "emit every stride-th round (and the last)")],
    "fem-prior": _common() + [
        Option("domain_lo", float, 0.0, "interval start"),
        Option("domain_hi", float, 1.0, "interval end"),
        Option("n_nodes", int, 65, "mesh nodes"),
        Option("kappa", float, 0.1, "length scale"),
        Option("num_samples", int, 3, "number of paths")] + _grid(),
}

POSITIVE = {"kappa", "variance", "num_features", "num_samples", "grid_num", "max_iters",
            "learning_rate", "dim", "batch_size", "num_candidates", "nu", "n", "num_paths",
            "arms", "horizon", "runs", "stride", "levels"}
NONNEGATIVE = {"noise_variance", "num_evals", "refine_steps", "ucb_c"}


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    values: dict

    def __getattr__(self, name):
        try:
            return self.values[name]
        except KeyError:
            raise AttributeError(name) from None


def _key_lines(text):
    lines = {}
    for i, line in enumerate(text.splitlines(), start=1):
        m = re.match(r"\s*([A-Za-z0-9_\-\"']+)\s*=", line)
        if m:
            lines.setdefault(m.group(1).strip("\"'"), i)
    return lines


def _coerce(opt, value, line=None):
    def fail(msg):
        raise ConfigError(msg, field=opt.name, line=line)

    if value is None:
        return None
    if opt.kind is bool:
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "false", "1", "0", "yes", "no"):
            return value.lower() in ("true", "1", "yes")
        fail(f"expected a boolean, got {value!r}")
    if opt.kind is int:
        if isinstance(value, bool):
            fail("expected an integer")
        if isinstance(value, str):
            try:
                return int(value)
            except ValueError:
                fail(f"expected an integer, got {value!r}")
        if isinstance(value, float) and not value.is_integer():
            fail(f"expected an integer, got {value!r}")
        return int(value)
    if opt.kind is float:
        if isinstance(value, bool):
            fail("expected a number")
        try:
            out = float(value)
        except (TypeError, ValueError):
            fail(f"expected a number, got {value!r}")
        if not math.isfinite(out):
            fail("must be finite")
        return out
    if opt.kind is list:
        if isinstance(value, str):
            value = [v for v in value.split(",") if v.strip()]
        if not isinstance(value, (list, tuple)):
            fail("expected a list")
        try:
            nums = [float(v) for v in value]
        except (TypeError, ValueError):
            fail(f"expected a list of numbers, got {value!r}")
        return nums
    if not isinstance(value, str):
        fail(f"expected a string, got {value!r}")
    value = value.lower() if opt.choices else value
    if opt.choices and value not in opt.choices:
        fail(f"must be one of {', '.join(opt.choices)}")
    return value


def _validate(command, values, lines):
    for name, v in values.items():
        line = lines.get(name)
        if v is None:
            continue
        if name in POSITIVE and not v > 0:
            raise ConfigError(f"{name} must be positive, got {v}", field=name, line=line)
        if name in NONNEGATIVE and v < 0:
            raise ConfigError(f"{name} must be nonnegative, got {v}", field=name, line=line)
    for opt in SCHEMAS[command]:
        if opt.required and values.get(opt.name) is None:
            raise ConfigError(f"{opt.name} is required", field=opt.name)
    if "grid_lo" in values and not values["grid_lo"] < values["grid_hi"]:
        raise ConfigError("grid_hi must exceed grid_lo", field="grid_hi", line=lines.get("grid_hi"))
    for name in ("num_features",):
        if name in values and values[name] % 2:
            raise ConfigError(f"{name} must be even", field=name, line=lines.get(name))
    if command == "bo-run":
        seeds = values["seeds"]
        if not seeds or any(not float(s).is_integer() or s < 0 for s in seeds):
            raise ConfigError("seeds must be nonnegative integers", field="seeds",
                              line=lines.get("seeds"))
        values["seeds"] = [int(s) for s in seeds]
        _bo_config(values).validate()
    if command == "bandit-sim":
        means = values["means"]
        if means is not None:
            if not means or any(not 0.0 <= m <= 1.0 for m in means):
                raise ConfigError("means must lie in [0, 1]", field="means",
                                  line=lines.get("means"))
            values["arms"] = len(means)
        if values["horizon"] < values["arms"]:
            raise ConfigError("horizon must be at least the number of arms", field="horizon",
                              line=lines.get("horizon"))
    if command == "fem-prior":
        if values["n_nodes"] < 3:
            raise ConfigError("n_nodes must be at least 3", field="n_nodes")
        if not values["domain_lo"] < values["domain_hi"]:
            raise ConfigError("domain_hi must exceed domain_lo", field="domain_hi")
    if command == "variance-starve" and values["n"] < 1:
        raise ConfigError("n must be positive", field="n")
    return values


def parse_config(command, path=None, overrides=None):
    """Merge defaults, a TOML file and overrides into a validated config.

    Raises
    ------
    ConfigError
        On unknown keys, wrong types or values violating a precondition;
        the offending field and, for files, the line are attached.
    """
    if command not in SCHEMAS:
        raise ConfigError(f"unknown command {command!r}")
    schema = {o.name: o for o in SCHEMAS[command]}
    values = {name: o.default for name, o in schema.items()}
    lines = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                raw = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        text = raw.decode("utf-8", errors="replace")
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            m = re.search(r"line (\d+)", str(exc))
            line = getattr(exc, "lineno", None) or (int(m.group(1)) if m else None)
            if line is None and "end of document" in str(exc):
                line = max(1, len(text.splitlines()))
            raise ConfigError(f"malformed config: {exc}", line=line) from exc
        lines = _key_lines(text)
        for key, value in data.items():
            key_norm = key.replace("-", "_")
            if key_norm not in schema:
                raise ConfigError(f"unknown key {key!r}", field=key, line=lines.get(key))
            values[key_norm] = _coerce(schema[key_norm], value, lines.get(key))
            if key != key_norm:
                lines[key_norm] = lines.get(key)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in schema:
            raise ConfigError(f"unknown key {key!r}", field=key)
        values[key] = _coerce(schema[key], value)
        lines.pop(key, None)
    if command == "bo-run" and values["kappa"] is not None and not values["kappa"] > 0:
        raise ConfigError("kappa must be positive", field="kappa", line=lines.get("kappa"))
    return ExperimentConfig(command, _validate(command, values, lines))


# ---------------------------------------------------------------- inputs


def _csv_rows(path):
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            yield lineno, [t.strip() for t in text.split(",")]


def _is_header(parts):
    try:
        [float(p) for p in parts]
        return False
    except ValueError:
        return all(re.fullmatch(r"[A-Za-z_][A-Za-z0-9_ ]*", p) for p in parts)


def load_graph_edgelist(path):
    """Read ``i,j,weight`` lines into a :class:`WeightedGraph`.

    Blank lines, ``#`` comments and a leading header are skipped. Reversed
    duplicates collapse onto one edge; a duplicate with a different weight,
    a self-loop, a negative index or a non-positive weight is rejected.
    """
    edges = {}
    first = True
    for lineno, parts in _csv_rows(path):
        if first and _is_header(parts):
            first = False
            continue
        first = False
        if len(parts) != 3:
            raise ParseError("expected i,j,weight", line=lineno)
        try:
            i, j, w = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise ParseError(f"cannot parse {','.join(parts)!r}",
                             line=lineno) from None
        if i == j:
            raise InvalidEdge(f"self-loop at node {i}", line=lineno)
        if i < 0 or j < 0:
            raise InvalidEdge("negative node index", line=lineno)
        if not (math.isfinite(w) and w > 0):
            raise InvalidEdge(f"weight must be positive, got {w}", line=lineno)
        key = (min(i, j), max(i, j))
        if key in edges and edges[key] != w:
            raise InvalidEdge(f"edge {key} repeated with weight {w} "
                              f"(was {edges[key]})", line=lineno)
        edges.setdefault(key, w)
    n = 1 + max((max(k) for k in edges), default=-1)
    return WeightedGraph(n, tuple((i, j, w) for (i, j), w in edges.items()))


def load_table(path, ncols=None):
    """Numeric CSV as a 2-D array; an optional header line is skipped."""
    rows = []
    first = True
    for lineno, parts in _csv_rows(path):
        if first and _is_header(parts):
            first = False
            continue
        first = False
        try:
            row = [float(p) for p in parts]
        except ValueError:
            raise ParseError("non-numeric field", line=lineno) from None
        if ncols is not None and len(row) != ncols:
            raise ParseError(f"expected {ncols} columns", line=lineno)
        if rows and len(row) != len(rows[0]):
            raise ParseError("ragged row", line=lineno)
        rows.append(row)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return np.array(rows)


# ---------------------------------------------------------------- output


@dataclass(frozen=True)
class Table:
    header: tuple
    rows: list


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return repr(float(v))


def bo_table(traces):
    traces = [traces] if isinstance(traces, RegretTrace) else list(traces)
    d = traces[0].points.shape[1] if traces else 1
    xs = ("x",) if d == 1 else tuple(f"x{i}" for i in range(d))
    rows = []
    for tr in traces:
        simple, cum = tr.simple_regret, tr.cumulative_regret
        for t in range(len(tr)):
            rows.append((tr.seed, t, *tr.points[t], tr.values[t], simple[t], cum[t]))
    return Table(("seed", "iter") + xs + ("f", "simple_regret", "cum_regret"), rows)


def starvation_table(report):
    return Table(("x", "pathwise_std", "weightspace_std", "exact_std"), list(report.rows()))


@contextmanager
def _open_out(path):
    if path in (None, "-"):
        yield sys.stdout
        sys.stdout.flush()
    else:
        with open(path, "w", newline="", buffering=1) as fh:
            yield fh


def emit_csv(table, path):
    """Write a :class:`Table` (or BO traces) with a fixed header and row order."""
    if isinstance(table, StarvationReport):
        table = starvation_table(table)
    elif not isinstance(table, Table):
        table = bo_table(table)
    with _open_out(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(table.header)
        for row in table.rows:
            w.writerow([_fmt(v) for v in row])


# ---------------------------------------------------------------- commands


def _grid_points(cfg):
    return np.linspace(cfg.grid_lo, cfg.grid_hi, cfg.grid_num)[:, None]


def _spec(cfg, dim=1):
    return StationaryKernelSpec(cfg.family, cfg.variance, cfg.kappa, dim)


def _model(cfg):
    data = load_table(cfg.data, ncols=2)
    return GpModel(_spec(cfg), cfg.noise_variance, data[:, :1], data[:, 1])


def _sample_header(k):
    return tuple(f"sample_{i}" for i in range(k))


def cmd_kernel_eval(cfg):
    X = _grid_points(cfg)
    k = _spec(cfg).matrix(X, np.array([[cfg.reference]]))[:, 0]
    return Table(("x", "k"), list(zip(X[:, 0], k)))


def cmd_sample_prior(cfg):
    rs = RandomSource(cfg.seed)
    X = _grid_points(cfg)
    spec = _spec(cfg)
    if cfg.method == "rff":
        fmap = FourierFeatureMap.sample(spec, cfg.num_features, rs)
        vals = sample_basis_prior(fmap, rs, cfg.num_samples)(X)
    else:
        vals = sample_exact_prior(spec, np.zeros((0, 1)), X, rs, cfg.num_samples)(X)
    return Table(("x",) + _sample_header(cfg.num_samples),
                 [(x, *v) for x, v in zip(X[:, 0], vals)])


def cmd_fit(cfg):
    model = _model(cfg)
    fitted = fit_hyperparameters(model, FitConfig(cfg.max_iters, cfg.learning_rate))
    trace = fitted.fit_trace or (float("nan"),)
    rows = [("variance", fitted.kernel.variance), ("kappa", fitted.kernel.lengthscale),
            ("noise_variance", fitted.noise_variance), ("lml", trace[-1]),
            ("iterations", len(trace) - 1)]
    return Table(("param", "value"), rows)


def cmd_posterior(cfg):
    model = _model(cfg)
    X = _grid_points(cfg)
    mean, var = posterior_moments(model, X, full_cov=False)
    header = ("x", "mean", "std")
    cols = [X[:, 0], mean, np.sqrt(np.maximum(var, 0.0))]
    if cfg.method == "pathwise":
        rs = RandomSource(cfg.seed)
        fmap = FourierFeatureMap.sample(model.kernel, cfg.num_features, rs)
        prior = sample_basis_prior(fmap, rs, cfg.num_samples)
        paths = evaluate_path(pathwise_condition(model, prior, rs), X)
        header += _sample_header(cfg.num_samples)
        cols += list(paths.T)
    return Table(header, list(zip(*cols)))


def _bo_config(v):
    return BOConfig(target=v["target"], dim=v["dim"], domain=v["domain"], lower=v["lower"],
                    upper=v["upper"], family=v["family"], variance=v["variance"],
                    lengthscale=v["kappa"], noise_variance=v["noise_variance"],
                    num_features=v["num_features"], batch_size=v["batch_size"],
                    num_evals=v["num_evals"], acquisition=v["acquisition"],
                    seeds=tuple(int(s) for s in v["seeds"]),
                    num_candidates=v["num_candidates"], refine_steps=v["refine_steps"],
                    refit=v["refit"], ucb_c=v["ucb_c"])


def worker_count(jobs):
    cap = os.environ.get("GP_THREADS")
    try:
        cap = int(cap) if cap else os.cpu_count() or 1
    except ValueError:
        raise ConfigError(f"GP_THREADS must be an integer, got {cap!r}",
                          field="GP_THREADS") from None
    return max(1, min(cap, jobs))


def cmd_bo_run(cfg):
    bo = _bo_config(cfg.values)
    workers = worker_count(len(bo.seeds))
    if workers == 1:
        traces = run_bo(bo)
    else:
        with ThreadPoolExecutor(workers) as ex:
            traces = run_bo(bo, executor=ex)
    if not traces or bo.num_evals == 0:
        d = 3 if bo.domain == "sphere2" else bo.dim
        return bo_table([RegretTrace(0, np.zeros((0, d)), np.zeros(0), np.zeros(0), 0.0)])
    return bo_table(traces)


def cmd_graph_interp(cfg):
    g = load_graph_edgelist(cfg.edges)
    obs = load_table(cfg.observations, ncols=2)
    nodes = obs[:, 0]
    if np.any(nodes != np.round(nodes)) or np.any(nodes < 0) or np.any(nodes >= g.node_count):
        raise ParseError("observation node indices must be integers within the graph")
    spec = graph_spectrum(g, normalized=cfg.normalized)
    K = graph_kernel_matrix(spec, cfg.family, cfg.nu, cfg.kappa, cfg.variance)
    observed = [(int(i), v) for i, v in obs]
    mean, std = graph_gp_regress(K, observed, cfg.noise_variance)
    flag = np.zeros(g.node_count, dtype=bool)
    flag[[i for i, _ in observed]] = True
    return Table(("node", "mean", "std", "observed"),
                 [(i, mean[i], std[i], bool(flag[i])) for i in range(g.node_count)])


def cmd_manifold_kernel(cfg):
    man = Manifold(cfg.manifold)
    k = ManifoldKernel(man, cfg.family, nu=cfg.nu, lengthscale=cfg.kappa,
                       variance=cfg.variance, levels=cfg.levels,
                       auto_truncate=cfg.levels is None)
    t = np.linspace(cfg.grid_lo, cfg.grid_hi, cfg.grid_num)
    # points along a geodesic from a base point
    if man is Manifold.CIRCLE:
        X, base = t[:, None], np.zeros((1, 1))
    elif man is Manifold.TORUS2:
        X, base = np.column_stack([t, np.zeros_like(t)]), np.zeros((1, 2))
    else:
        X = np.column_stack([np.sin(t), np.zeros_like(t), np.cos(t)])
        base = np.array([[0.0, 0.0, 1.0]])
    return Table(("t", "k"), list(zip(t, k.matrix(X, base)[:, 0])))


def cmd_variance_starve(cfg):
    rs = RandomSource(cfg.seed)
    data_rs, rff_rs = rs.spawn(2)
    spec = StationaryKernelSpec(cfg.family, cfg.variance, cfg.kappa, 1)
    X = np.sort(data_rs.uniform(0.0, 1.0, size=(cfg.n, 1)), axis=0)
    f = sample_exact_prior(spec, np.zeros((0, 1)), X, data_rs)(X)
    y = f + np.sqrt(cfg.noise_variance) * data_rs.standard_normal(cfg.n)
    model = GpModel(spec, cfg.noise_variance, X, y)
    report = variance_starvation_report(model, cfg.num_features, _grid_points(cfg), rff_rs,
                                        cfg.num_paths, cfg.moment_matched)
    return starvation_table(report)


def cmd_bandit_sim(cfg):
    rs = RandomSource(cfg.seed)
    means = cfg.means
    if means is None:
        means = rs.uniform(size=cfg.arms)
    b = BanditInstance(np.asarray(means))
    sim = bandit_ucb_sim if cfg.policy == "ucb" else bandit_random_sim
    T = cfg.horizon
    keep = np.unique(np.r_[np.arange(cfg.stride, T + 1, cfg.stride), T]) - 1
    rows = []
    for run, child in enumerate(rs.spawn(cfg.runs)):
        regret, _ = sim(b, T, child)
        rows.extend((run, t + 1, regret[t]) for t in keep)
    return Table(("run", "t", "regret"), rows)


def cmd_fem_prior(cfg):
    rs = RandomSource(cfg.seed)
    prior = build_fem1d_prior((cfg.domain_lo, cfg.domain_hi), cfg.n_nodes, cfg.kappa)
    X = _grid_points(cfg)
    vals = sample_fem1d_prior(prior, rs, cfg.num_samples)(X)
    return Table(("x",) + _sample_header(cfg.num_samples),
                 [(x, *v) for x, v in zip(X[:, 0], vals)])


COMMANDS = {
    "kernel-eval": (cmd_kernel_eval, "evaluate a stationary kernel along a 1-D grid"),
    "sample-prior": (cmd_sample_prior, "draw prior paths on a 1-D grid"),
    "fit": (cmd_fit, "fit hyperparameters by maximizing the log evidence"),
    "posterior": (cmd_posterior, "posterior mean, std and optional pathwise draws"),
    "bo-run": (cmd_bo_run, "Bayesian optimization regret traces"),
    "graph-interp": (cmd_graph_interp, "GP interpolation over the nodes of a graph"),
    "manifold-kernel": (cmd_manifold_kernel, "manifold kernel along a geodesic"),
    "variance-starve": (cmd_variance_starve, "pathwise vs weight-space posterior std"),
    "bandit-sim": (cmd_bandit_sim, "Bernoulli bandit regret curves"),
    "fem-prior": (cmd_fem_prior, "finite element Matérn-3/2 prior samples"),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="pathgp", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, desc) in COMMANDS.items():
        p = sub.add_parser(name, help=desc, description=desc)
        p.add_argument("--config", help="TOML file of key = value pairs")
        for opt in SCHEMAS[name]:
            flag = "--" + opt.name.replace("_", "-")
            text = f"{opt.help} (default: {opt.default})"
            if opt.choices:
                text += f"; one of {', '.join(opt.choices)}"
            if opt.kind is bool:
                p.add_argument(flag, dest=opt.name, action=argparse.BooleanOptionalAction,
                               default=None, help=text)
            else:
                p.add_argument(flag, dest=opt.name, default=None, help=text)
    return parser


def run(argv=None):
    """Parse arguments and execute; returns the output table."""
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command")
    path = args.pop("config")
    cfg = parse_config(command, path, args)
    table = COMMANDS[command][0](cfg)
    emit_csv(table, cfg.output)
    return table


def main(argv=None):
    try:
        run(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (PathGPError, ValueError, OSError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
