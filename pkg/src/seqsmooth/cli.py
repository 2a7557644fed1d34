"""Command-line front end for the experiments.

Settings come from three layers, later ones winning: per-command
defaults, an optional JSON config file (``--config``), and flags.  The
config file mirrors this layout (every key optional)::

    {
      "kernel": "gaussian", "degree": 1, "workers": 1,
      "bandwidth": {"c": 0.3, "k": 0.2},          # or {"c": 0.3, "d": 2}
      "grid": {"lo": 0.0, "hi": 1.0, "count": 201},
      "sim": {"function": "f2", "n": 150, "sigma2": 0.5, "seed": 0,
              "reps": 100, "warmup": 50, "ns": [200, 500]},
      "mixing": {"C": [0.05, 0.1], "D": [1, 2], "eta": null, "A": 4},
      "additive": {"tol": 1e-6, "max_iter": 20}
    }

For ``fig1`` the list ``mixing.C`` is the candidate constant set; for
``fig2`` ``mixing.D`` holds the Holder exponents and ``bandwidth.c`` the
shared constant.  Every run writes ``manifest.json`` next to its CSVs.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__
from . import experiments as ex
from .grid import EvaluationGrid
from .kernels import get_kernel
from .sim import get_function, rate_slope

__all__ = ["ConfigError", "ExperimentConfig", "build_config", "run_experiment", "main"]

COMMANDS = ("fig1", "fig2", "rate-kde", "rate-locpoly", "backfit-demo", "bench-update-cost")
OUT_ENV = "SEQSMOOTH_OUT"
FIG1_FUNCTIONS = ("f1", "f2", "f3", "f4")


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


@dataclass
class ExperimentConfig:
    command: str
    out: str = "."
    kernel: str = "gaussian"
    degree: int = 1
    c: float = 0.3
    k: float = 0.2
    grid_lo: float = 0.0
    grid_hi: float = 1.0
    grid_count: int = 201
    function: str | None = None
    n: int = 150
    sigma2: float = 0.5
    seed: int = 0
    reps: int = 100
    warmup: int = 50
    ns: list[int] = field(default_factory=lambda: list(ex.RATE_LADDER))
    C: list[float] = field(default_factory=lambda: list(ex.FIG1_CONSTANTS))
    D: list[float] = field(default_factory=lambda: list(ex.FIG2_ALPHAS))
    eta: float | None = None
    A: float = 4.0
    tol: float = 1e-6
    max_iter: int = 20
    cv: bool = True
    workers: int = 1
    svg: bool = False

    @property
    def grid(self) -> EvaluationGrid:
        return EvaluationGrid(self.grid_lo, self.grid_hi, self.grid_count)

    def manifest_fields(self) -> dict:
        """Everything that determines the outputs (the output path excluded)."""
        d = dataclasses.asdict(self)
        d.pop("out")
        return d


_DEFAULTS: dict[str, dict[str, Any]] = {
    "fig1": dict(k=0.2, degree=1, n=150, sigma2=0.5, reps=100, warmup=50),
    "fig2": dict(c=0.4, n=150, sigma2=0.01, reps=200),
    "rate-kde": dict(c=0.05, k=0.2, reps=50),
    "rate-locpoly": dict(c=0.3, k=0.2, degree=1, function="f2", sigma2=0.5, reps=50),
    "backfit-demo": dict(c=0.3, k=0.2, degree=1, n=2000, sigma2=0.0),
    "bench-update-cost": dict(c=0.5, degree=2, kernel="epanechnikov", ns=[100, 10_000]),
}

# (section, key) in the config file -> ExperimentConfig field
_FILE_KEYS = {
    (None, "kernel"): "kernel", (None, "degree"): "degree", (None, "workers"): "workers",
    (None, "cv"): "cv",
    ("bandwidth", "c"): "c",
    ("grid", "lo"): "grid_lo", ("grid", "hi"): "grid_hi", ("grid", "count"): "grid_count",
    ("sim", "function"): "function", ("sim", "n"): "n", ("sim", "sigma2"): "sigma2",
    ("sim", "seed"): "seed", ("sim", "reps"): "reps", ("sim", "warmup"): "warmup",
    ("sim", "ns"): "ns",
    ("mixing", "C"): "C", ("mixing", "D"): "D", ("mixing", "eta"): "eta", ("mixing", "A"): "A",
    ("additive", "tol"): "tol", ("additive", "max_iter"): "max_iter",
}


def _exponent(k, d, where: str) -> float | None:
    if k is not None and d is not None:
        raise ConfigError(f"{where}: give exactly one of bandwidth k or d")
    if d is not None:
        if int(d) != d or d < 1:
            raise ConfigError(f"{where}: d must be a positive integer")
        return 1.0 / (2 * int(d) + 1)
    return None if k is None else float(k)


def _from_file(data: dict) -> dict[str, Any]:
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    out: dict[str, Any] = {}
    for key, value in data.items():
        if isinstance(value, dict):
            for sub, v in value.items():
                if key == "bandwidth" and sub in ("k", "d"):
                    continue
                name = _FILE_KEYS.get((key, sub))
                if name is None:
                    raise ConfigError(f"unknown config key {key}.{sub}")
                out[name] = v
        else:
            name = _FILE_KEYS.get((None, key))
            if name is None:
                raise ConfigError(f"unknown config key {key}")
            out[name] = value
    bw = data.get("bandwidth", {})
    k = _exponent(bw.get("k"), bw.get("d"), "config")
    if k is not None:
        out["k"] = k
    return out


def build_config(command: str, file_data: dict | None = None, **flags) -> ExperimentConfig:
    """Merge defaults, file settings and flags (``None`` flags are ignored)."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    values: dict[str, Any] = dict(_DEFAULTS[command])
    if file_data:
        values.update(_from_file(file_data))
    full = flags.pop("full", False)
    k = _exponent(flags.pop("k", None), flags.pop("d", None), "flags")
    if k is not None:
        values["k"] = k
    values.update({key: v for key, v in flags.items() if v is not None})
    if full and command == "fig2" and flags.get("reps") is None:
        values["reps"] = 1000
    if "out" not in values:
        values["out"] = os.environ.get(OUT_ENV, ".")
    names = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(values) - names
    if unknown:
        raise ConfigError(f"unknown settings: {sorted(unknown)}")
    cfg = ExperimentConfig(command=command, **values)
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    try:
        get_kernel(cfg.kernel)
        if cfg.function is not None and cfg.command != "fig2":
            get_function(cfg.function)
        cfg.grid  # noqa: B018 - constructing validates the bounds
    except (KeyError, ValueError) as err:
        raise ConfigError(str(err)) from err
    if not cfg.c > 0 or not 0 < cfg.k < 1:
        raise ConfigError("need bandwidth c > 0 and 0 < k < 1")
    checks = [
        (cfg.n >= 1, "n must be positive"),
        (cfg.reps >= 1, "reps must be positive"),
        (cfg.sigma2 >= 0, "sigma2 must be nonnegative"),
        (0 <= cfg.warmup < cfg.n or cfg.command != "fig1", "need 0 <= warmup < n"),
        (int(cfg.degree) == cfg.degree and 0 <= cfg.degree <= 5, "degree must be in 0..5"),
        (len(cfg.C) > 0 and all(c > 0 for c in cfg.C), "mixing.C must hold positive constants"),
        (len(cfg.D) > 0 and all(d > 0 for d in cfg.D), "mixing.D must hold positive values"),
        (cfg.A > 0, "mixing.A must be positive"),
        (cfg.eta is None or cfg.eta > 0, "mixing.eta must be positive"),
        (cfg.tol > 0 and cfg.max_iter >= 1, "need tol > 0 and max_iter >= 1"),
        (len(cfg.ns) > 0 and all(int(n) == n and n >= 1 for n in cfg.ns), "ns must be positive integers"),
        (cfg.workers >= 1, "workers must be positive"),
    ]
    for ok, msg in checks:
        if not ok:
            raise ConfigError(msg)
    if cfg.command == "rate-kde" and len(set(cfg.ns)) < 3:
        raise ConfigError("rate runs need at least three sample sizes")
    if cfg.command == "rate-locpoly" and len(set(cfg.ns)) < 3:
        raise ConfigError("rate runs need at least three sample sizes")


# -- running ---------------------------------------------------------------

def _rate_outputs(cfg: ExperimentConfig, report, out: Path, stem: str) -> list[Path]:
    slope = rate_slope(report)
    paths = [report.to_csv(out / f"{stem}.csv")]
    summary = out / f"{stem}_slope.csv"
    with summary.open("w", newline="") as fh:
        fh.write("estimator_label,metric,n_points,slope\n")
        fh.write(f"{report.estimator_label},{report.metric},{len(report.rows)},{slope!r}\n")
    paths.append(summary)
    print(f"{stem}: slope {slope:.4f}")
    return paths


def _plot(kind: str, payload, path: Path) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "seqsmooth"
    fig, ax = plt.subplots(figsize=(5, 3.5))
    if kind == "fig1":
        ax.plot(payload.t, payload.seq_curves[payload.best_seq_index], label="sequential")
        ax.plot(payload.t, payload.batch_curves[payload.best_batch_index], label="batch")
        if payload.cv_curve is not None:
            ax.plot(payload.t, payload.cv_curve, label="batch CV")
        ax.set_xlabel("t")
        ax.set_ylabel("average loss")
    elif kind == "fig2":
        for j, lab in enumerate(payload.labels + ["mixture"]):
            ax.plot(payload.ns, payload.risk_mean[:, j], label=lab)
        ax.set_xlabel("n")
        ax.set_ylabel("risk at x0")
    else:
        ax.loglog(payload.ns, payload.risks, "o-", label=payload.estimator_label)
        ax.set_xlabel("n")
        ax.set_ylabel(payload.metric)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def run_experiment(cfg: ExperimentConfig,
                   replicate: Callable[[int], np.ndarray] | None = None) -> tuple[list[Path], list]:
    """Run one configured experiment.

    Returns the written files and a list of ``(item, message)`` failures.
    ``replicate`` overrides the per-replication simulation of rate runs.
    """
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        raise ConfigError(f"cannot create output directory {out}: {err}") from err
    if not os.access(out, os.W_OK):
        raise ConfigError(f"output directory {out} is not writable")

    paths: list[Path] = []
    failures: list[tuple[str, str]] = []
    grid = cfg.grid
    common = dict(seed=cfg.seed, workers=cfg.workers)

    if cfg.command == "fig1":
        funcs = [cfg.function] if cfg.function else list(FIG1_FUNCTIONS)
        for name in funcs:
            try:
                res = ex.fig1(name, cfg.C, cfg.n, cfg.sigma2, cfg.reps, warmup=cfg.warmup,
                              degree=cfg.degree, k=cfg.k, kernel=cfg.kernel, grid=grid, cv=cfg.cv,
                              **common)
                paths += res.write(out)
                if cfg.svg:
                    paths.append(_plot("fig1", res, out / f"fig1_{name}.svg"))
                print(f"fig1 {name}: best sequential {res.best_seq_loss:.4f}, "
                      f"best batch {res.best_batch_loss:.4f}")
            except Exception as err:  # per-item failure row
                failures.append((name, f"{type(err).__name__}: {err}"))
    elif cfg.command == "fig2":
        alphas = [float(cfg.function.removeprefix("holder"))] if cfg.function else list(cfg.D)
        for a in alphas:
            try:
                res = ex.fig2(a, cfg.D, cfg.c, cfg.n, cfg.sigma2, cfg.reps, kernel=cfg.kernel,
                              grid=grid, clip_bound=cfg.A, eta=cfg.eta, **common)
                paths += res.write(out)
                if cfg.svg:
                    paths.append(_plot("fig2", res, out / f"fig2_alpha_{a:g}.svg"))
                print(f"fig2 alpha={a:g}: lowest-risk expert alpha'={res.best_expert:g}")
            except Exception as err:
                failures.append((f"alpha={a:g}", f"{type(err).__name__}: {err}"))
    elif cfg.command == "rate-kde":
        report = ex.rate_kde(cfg.ns, cfg.reps, cfg.c, cfg.k, kernel=cfg.kernel, grid=grid,
                             replicate=replicate, **common)
        paths += _rate_outputs(cfg, report, out, "rate_kde")
        if cfg.svg:
            paths.append(_plot("rate", report, out / "rate_kde.svg"))
    elif cfg.command == "rate-locpoly":
        report = ex.rate_locpoly(cfg.ns, cfg.reps, cfg.c, cfg.k, cfg.degree, cfg.function or "f2",
                                 cfg.sigma2, kernel=cfg.kernel, grid=grid, replicate=replicate,
                                 **common)
        paths += _rate_outputs(cfg, report, out, "rate_locpoly")
        if cfg.svg:
            paths.append(_plot("rate", report, out / "rate_locpoly.svg"))
    elif cfg.command == "backfit-demo":
        res = ex.backfit_demo(cfg.n, cfg.sigma2, cfg.c, cfg.degree, cfg.tol, cfg.max_iter,
                              cfg.seed, grid, cfg.kernel)
        paths += res.write(out)
        print(f"backfit-demo: interior ISE {res.ise:.5f}, "
              f"non-converged steps {res.model.nonconverged_steps}")
    elif cfg.command == "bench-update-cost":
        res = ex.bench_update_cost(cfg.ns, c=cfg.c, degree=cfg.degree, kernel=cfg.kernel,
                                   grid=grid, seed=cfg.seed)
        paths += res.write(out)
        print(f"bench-update-cost: sequential ratio {res.ratio():.2f}, "
              f"batch ratio {res.ratio('batch'):.1f}")

    if failures:
        err_path = out / "errors.csv"
        with err_path.open("w", newline="") as fh:
            fh.write("item,error\n")
            for item, msg in failures:
                fh.write(f"{item},\"{msg.replace(chr(34), chr(39))}\"\n")
        paths.append(err_path)
    manifest = {
        "tool": "seqsmooth",
        "version": __version__,
        "config": cfg.manifest_fields(),
        "outputs": sorted(p.name for p in paths),
        "failures": [list(f) for f in failures],
    }
    man = out / "manifest.json"
    man.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    paths.append(man)
    return paths, failures


# -- argument parsing ------------------------------------------------------------

def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="seqsmooth", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", type=Path, help="JSON config file")
        s.add_argument("--out", help=f"output directory (default ${OUT_ENV} or .)")
        s.add_argument("--seed", type=int)
        s.add_argument("--reps", type=int)
        s.add_argument("--workers", type=int, help="processes for replications (default 1)")
        s.add_argument("--kernel")
        s.add_argument("--degree", type=int)
        s.add_argument("--c", type=float, help="bandwidth constant")
        group = s.add_mutually_exclusive_group()
        group.add_argument("--k", type=float, help="bandwidth exponent")
        group.add_argument("--d", type=int, help="smoothness order, k = 1/(2d+1)")
        s.add_argument("--n", type=int)
        s.add_argument("--sigma2", type=float)
        s.add_argument("--function")
        s.add_argument("--grid-count", dest="grid_count", type=int)
        s.add_argument("--svg", action="store_true", default=None, help="also write SVG charts")
        if name in ("rate-kde", "rate-locpoly", "bench-update-cost"):
            s.add_argument("--ns", type=_ints, help="comma-separated sample sizes")
        if name == "fig1":
            s.add_argument("--warmup", type=int)
            s.add_argument("--constants", dest="C", type=_floats)
            s.add_argument("--no-cv", dest="cv", action="store_false", default=None)
        if name == "fig2":
            s.add_argument("--alphas", dest="D", type=_floats)
            s.add_argument("--eta", type=float)
            s.add_argument("--A", type=float, help="clip bound")
            s.add_argument("--full", action="store_true", help="run 1000 replications")
        if name == "backfit-demo":
            s.add_argument("--tol", type=float)
            s.add_argument("--max-iter", dest="max_iter", type=int)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = vars(_parser().parse_args(argv))
    command = args.pop("command")
    cfg_path = args.pop("config")
    try:
        data = None
        if cfg_path is not None:
            try:
                data = json.loads(Path(cfg_path).read_text())
            except (OSError, json.JSONDecodeError) as err:
                raise ConfigError(f"cannot read config {cfg_path}: {err}") from err
        cfg = build_config(command, data, **args)
        _, failures = run_experiment(cfg)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except Exception as err:  # any runtime failure must surface as a nonzero exit
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 1
    if failures:
        for item, msg in failures:
            print(f"error: {item}: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
