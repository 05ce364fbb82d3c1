"""Single runs and parameter sweeps driven by a flat configuration."""

from __future__ import annotations

import itertools
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

from .baselines import RESERVED, f_greedy, greedy_unfair, per_group_adapt
from .bigreedy import AdaptiveConfig, GreedyConfig, bigreedy, bigreedy_plus
from .dataset import (
    Dataset,
    FairnessSpec,
    balanced_bounds,
    err,
    exact_bounds,
    free_bounds,
    generate_anticorrelated,
    group_counts,
    load_csv,
    normalize,
    proportional_bounds,
)
from .intcov import intcov
from .report import DatasetInfo, Metrics, Params, RunReport, SolutionInfo, SpecInfo, flatten
from .utility import Exact2DEvaluator, NetEvaluator, sample_net

SEED_ENV = "FAIRHMS_SEED"
REPORT_NET_TAG = 15485863
ALGORITHMS = ("intcov", "bigreedy", "bigreedy+", "fgreedy", "g-greedy", "greedy")
FAIR_ALGORITHMS = ("intcov", "bigreedy", "bigreedy+", "fgreedy", "g-greedy")
SWEEP_AXES = ("k", "C", "n", "d", "m", "epsilon", "lambda")


def default_seed() -> int:
    return int(os.environ.get(SEED_ENV, "0"))


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce one solve.

    Data comes from ``data`` (CSV path) or ``gen`` ("anticor:n=..,d=..,C=..").
    ``bounds`` is "exact:l1,l2,...", "prop:alpha=x", "bal:alpha=x" or "free".
    """

    alg: str = "bigreedy"
    k: int = 10
    bounds: str = "prop:alpha=0.1"
    data: str | None = None
    gen: str | None = None
    group: str | None = None
    columns: tuple[str, ...] | None = None
    id_column: str | None = None
    normalize: str = "minmax"
    m: int | None = None
    delta: float | None = None
    epsilon: float = 0.02
    lam: float = 0.04
    m0: int | None = None
    M: int | None = None
    seed: int = field(default_factory=default_seed)
    relaxed: bool = False
    eval_m: int = 10_000
    time_all: bool = False


_GEN_RE = re.compile(r"^anticor:(.*)$")


def parse_gen(text: str) -> dict:
    m = _GEN_RE.match(text.strip())
    if not m:
        raise ValueError(f"generator spec must look like 'anticor:n=100,d=2,C=2', got {text!r}")
    out = {"n": 1000, "d": 2, "C": 2, "seed": None}
    for part in filter(None, m.group(1).split(",")):
        key, _, val = part.partition("=")
        key = key.strip()
        if key not in out:
            raise ValueError(f"unknown generator option {key!r}")
        out[key] = int(val)
    return out


def format_gen(opts: dict) -> str:
    body = ",".join(f"{k}={opts[k]}" for k in ("n", "d", "C"))
    if opts.get("seed") is not None:
        body += f",seed={opts['seed']}"
    return f"anticor:{body}"


def parse_bounds(text: str, ds: Dataset, k: int) -> FairnessSpec:
    kind, _, rest = text.strip().partition(":")
    if kind == "exact":
        quotas = [int(x) for x in rest.split(",") if x.strip()]
        return exact_bounds(k, quotas).check(ds)
    if kind in ("prop", "bal"):
        key, _, val = rest.partition("=")
        if key.strip() != "alpha":
            raise ValueError(f"bounds {text!r}: expected alpha=<value>")
        make = proportional_bounds if kind == "prop" else balanced_bounds
        return make(ds, k, float(val))
    if kind == "free":
        return free_bounds(ds, k).check(ds)
    raise ValueError(f"unknown bounds {text!r}; use exact:..., prop:alpha=..., bal:alpha=... or free")


_DATA_CACHE: dict = {}
_CACHE_LOCK = threading.Lock()


def _gen_source(cfg: RunConfig) -> str:
    opts = parse_gen(cfg.gen)
    if opts["seed"] is None:
        opts["seed"] = cfg.seed
    return format_gen(opts)


def load_dataset(cfg: RunConfig) -> Dataset:
    """Load or generate, then normalize; results are cached per source."""
    if (cfg.data is None) == (cfg.gen is None):
        raise ValueError("give exactly one of a data file or a generator spec")
    if cfg.gen is not None:
        opts = parse_gen(_gen_source(cfg))
        key = ("gen", opts["n"], opts["d"], opts["C"], opts["seed"], cfg.normalize)
    else:
        key = ("csv", cfg.data, cfg.group, cfg.columns, cfg.id_column, cfg.normalize,
               os.path.getmtime(cfg.data) if os.path.exists(cfg.data) else None)
    with _CACHE_LOCK:
        if key in _DATA_CACHE:
            return _DATA_CACHE[key]
    if cfg.gen is not None:
        raw = generate_anticorrelated(opts["n"], opts["d"], opts["C"], key[4])
    else:
        raw = load_csv(cfg.data, cfg.columns, cfg.group, cfg.id_column)
    ds = raw if cfg.normalize == "none" else normalize(raw, cfg.normalize)
    with _CACHE_LOCK:
        if len(_DATA_CACHE) > 16:
            _DATA_CACHE.clear()
        _DATA_CACHE[key] = ds
    return ds


def report_evaluator(ds: Dataset, cfg: RunConfig):
    if ds.d == 2:
        return Exact2DEvaluator(ds)
    return NetEvaluator(ds, sample_net(ds.d, cfg.eval_m, [cfg.seed, REPORT_NET_TAG]))


def solve(ds: Dataset, spec: FairnessSpec, cfg: RunConfig):
    """Dispatch to one algorithm; returns (Solution, params)."""
    alg = cfg.alg.lower()
    if alg in RESERVED:
        raise NotImplementedError(f"algorithm {alg!r} is reserved for external results and is not implemented")
    if alg == "intcov":
        return intcov(ds, spec), Params(seed=cfg.seed, normalize=cfg.normalize)
    if alg == "bigreedy":
        gc = GreedyConfig(cfg.epsilon, cfg.m, cfg.delta, not cfg.relaxed, cfg.seed)
        sol = bigreedy(ds, spec, gc)
        return sol, Params(m=sol.info["m"], delta=cfg.delta, epsilon=cfg.epsilon, seed=cfg.seed,
                           feasible_mode=not cfg.relaxed, normalize=cfg.normalize)
    if alg == "bigreedy+":
        ac = AdaptiveConfig(cfg.epsilon, None, cfg.delta, not cfg.relaxed, cfg.seed, cfg.lam, cfg.M or cfg.m, cfg.m0)
        sol = bigreedy_plus(ds, spec, ac)
        return sol, Params(m=sol.info["m"], delta=cfg.delta, epsilon=cfg.epsilon, lam=cfg.lam,
                           m0=sol.info["m0"], M=sol.info["M"], seed=cfg.seed,
                           feasible_mode=not cfg.relaxed, normalize=cfg.normalize)
    m = GreedyConfig(cfg.epsilon, cfg.m, cfg.delta).net_size(spec.k, ds.d)
    net = sample_net(ds.d, m, [cfg.seed, 0])
    params = Params(m=m, delta=cfg.delta, seed=cfg.seed, normalize=cfg.normalize)
    if alg == "fgreedy":
        return f_greedy(ds, spec, net), params
    if alg == "g-greedy":
        return per_group_adapt(ds, spec, net), params
    if alg == "greedy":
        return greedy_unfair(ds, spec.k, net), params
    raise ValueError(f"unknown algorithm {cfg.alg!r}; choose from {', '.join(ALGORITHMS)}")


def run(cfg: RunConfig) -> RunReport:
    t0 = time.perf_counter()
    ds = load_dataset(cfg)
    spec = parse_bounds(cfg.bounds, ds, cfg.k)
    t1 = time.perf_counter()
    sol, params = solve(ds, spec, cfg)
    t2 = time.perf_counter()
    S = list(sol.indices)
    evaluator = report_evaluator(ds, cfg)
    info = dict(sol.info)
    info.pop("mhr", None)
    info.pop("eval_method", None)
    return RunReport(
        algorithm=cfg.alg.lower(),
        dataset=DatasetInfo(
            source=ds.source if cfg.gen is None else _gen_source(cfg),
            n=ds.n, d=ds.d, C=ds.C, group_names=ds.group_names,
            skyline_sizes=tuple(int(x) for x in ds.skyline_sizes()),
        ),
        spec=SpecInfo(spec.k, spec.kind, spec.alpha, spec.lower, spec.upper),
        params=params,
        solution=SolutionInfo(tuple(ds.ids[i] for i in S), tuple(int(x) for x in group_counts(S, ds))),
        metrics=Metrics(
            mhr=evaluator(S),
            eval_method=evaluator.tag,
            err=err(S, ds, spec),
            size=len(S),
            wall_ms=1000.0 * ((t2 - t0) if cfg.time_all else (t2 - t1)),
        ),
        diagnostics=info,
    )


_AXIS_FIELD = {"k": "k", "m": "m", "epsilon": "epsilon", "lambda": "lam"}


def parse_axis(text: str) -> tuple[str, list]:
    """'k=2..10', 'k=2..10..2' or 'epsilon=0.01,0.02' -> (name, values)."""
    name, _, spec = text.partition("=")
    name = name.strip()
    if name not in SWEEP_AXES:
        raise ValueError(f"cannot sweep {name!r}; choose from {', '.join(SWEEP_AXES)}")
    cast = float if name in ("epsilon", "lambda") else int
    if ".." in spec:
        parts = [int(p) for p in spec.split("..")]
        lo, hi = parts[0], parts[1]
        step = parts[2] if len(parts) > 2 else 1
        values = list(range(lo, hi + 1, step))
    else:
        values = [cast(v) for v in spec.split(",") if v.strip()]
    if not values:
        raise ValueError(f"axis {name!r} has no values")
    return name, values


def _with_axis(cfg: RunConfig, name: str, value) -> RunConfig:
    if name in _AXIS_FIELD:
        return replace(cfg, **{_AXIS_FIELD[name]: value})
    if cfg.gen is None:
        raise ValueError(f"axis {name!r} needs a generated dataset (--gen)")
    opts = parse_gen(cfg.gen)
    opts[name] = value
    return replace(cfg, gen=format_gen(opts))


def sweep(
    base: RunConfig,
    axes: dict[str, list],
    algorithms: list[str] | None = None,
    pof: bool = False,
    jobs: int = 1,
) -> list[dict]:
    """Cross product of one or two axes and the algorithm list; one row per run.

    Failures become rows with an ``error`` column. With ``pof`` each fair run
    is paired with an unconstrained run of the same algorithm and the MHR
    drop is reported as ``price_of_fairness``.
    """
    if not 1 <= len(axes) <= 2:
        raise ValueError("sweep exactly one or two axes")
    algorithms = algorithms or [base.alg]
    names = list(axes)
    configs = []
    for combo in itertools.product(*(axes[n] for n in names)):
        for alg in algorithms:
            cfg = replace(base, alg=alg)
            for name, value in zip(names, combo):
                cfg = _with_axis(cfg, name, value)
            configs.append((dict(zip(names, combo)), cfg))

    def one(item):
        point, cfg = item
        row = dict(point)
        try:
            rep = run(cfg)
            row.update(flatten(rep))
            row.update(point)  # keep the grid coordinate even for algorithms that ignore the axis
            if pof:
                free = run(replace(cfg, bounds="free"))
                row["mhr_unconstrained"] = free.metrics.mhr
                row["price_of_fairness"] = free.metrics.mhr - rep.metrics.mhr
            row["error"] = ""
        except Exception as exc:  # recorded per row, the sweep carries on
            row.update(algorithm=cfg.alg)
            row["error"] = f"{type(exc).__name__}: {exc}"
        return row

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(one, configs))
    else:
        rows = [one(item) for item in configs]
    return rows


SWEEP_COLUMNS_FIXED = (
    "algorithm", "k", "bounds", "n", "d", "C", "m", "epsilon", "lambda", "seed",
    "mhr", "eval_method", "err", "size", "group_counts", "wall_ms",
)


def sweep_columns(axes: list[str], pof: bool) -> list[str]:
    cols = list(axes) + [c for c in SWEEP_COLUMNS_FIXED if c not in axes]
    if pof:
        cols += ["mhr_unconstrained", "price_of_fairness"]
    return cols + ["ids", "error"]
