"""Batch driver: convergence, projection, CFL, energy and slice studies.

Usage::

    sgcdg convergence [--config FILE] [--threads N] [key=value ...]

Configuration is flat ``key=value`` text (``#`` starts a comment); keys given
on the command line override the file. The ``SGCDG_CONFIG`` environment
variable replaces the config path and nothing else. Output is CSV with
``#``-prefixed metadata lines and six significant digits.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import logging
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

log = logging.getLogger("sgcdg")

ENV_CONFIG = "SGCDG_CONFIG"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
MACHINE_FLOOR = 5e-12

_RUN_KEYS = {
    "rk_order": "3", "cfl_safety": "0.1", "dt_rule": "auto", "tau_max_rule": "default",
    "outflow_trace": "opposite", "output": "-",
}
DEFAULTS = {
    "convergence": {"problem": "linear-advection", "d": "", "k": "2", "N_min": "3", "N_max": "5",
                    "boundary": "periodic", "T": "", "error": "auto", **_RUN_KEYS},
    "projection": {"d": "2", "k": "1", "N_min": "3", "N_max": "7", "points": "table",
                   "output": "-"},
    "cfl": {"schemes": "cdg,sparse-cdg", "k": "1,2,3", "nu": "2,3,4", "d": "2", "N": "4",
            "N_full": "3", "tau": "dt", "output": "-"},
    "energy": {"problem": "linear-advection", "d": "2", "k": "1", "N": "5", "T": "100",
               "samples": "100", **{**_RUN_KEYS, "dt_rule": "cfl"}},
    "slice": {"problem": "deformational-flow", "d": "", "k": "3", "N": "7", "t": "0.75",
              "plane": "", "resolution": "101", "component": "0", **_RUN_KEYS},
}


class ConfigError(ValueError):
    pass


# -- configuration ------------------------------------------------------------------

def parse_config_text(text: str) -> dict[str, str]:
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {n}: empty key")
        out[key] = value
    return out


def resolve_config(command: str, path: str | None, overrides: list[str]) -> dict[str, str]:
    """Defaults, then the config file, then command-line overrides."""
    cfg = dict(DEFAULTS[command])
    path = os.environ.get(ENV_CONFIG) or path
    given = {}
    if path:
        try:
            given.update(parse_config_text(Path(path).read_text(encoding="utf-8")))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    given.update(parse_config_text("\n".join(overrides)))
    unknown = sorted(set(given) - set(cfg))
    if unknown:
        raise ConfigError(f"unknown keys for '{command}': {', '.join(unknown)}; "
                          f"valid keys: {', '.join(sorted(cfg))}")
    cfg.update(given)
    return cfg


def _int(cfg, key, lo=None, hi=None):
    try:
        v = int(cfg[key])
    except ValueError:
        raise ConfigError(f"{key} must be an integer, got {cfg[key]!r}") from None
    if (lo is not None and v < lo) or (hi is not None and v > hi):
        raise ConfigError(f"{key}={v} outside [{lo}, {hi}]")
    return v


def _float(cfg, key, positive=True):
    try:
        v = float(cfg[key])
    except ValueError:
        raise ConfigError(f"{key} must be a number, got {cfg[key]!r}") from None
    if positive and not v > 0:
        raise ConfigError(f"{key} must be positive")
    return v


def _choice(cfg, key, options):
    if cfg[key] not in options:
        raise ConfigError(f"{key} must be one of {', '.join(options)}, got {cfg[key]!r}")
    return cfg[key]


def _int_list(cfg, key):
    try:
        return [int(s) for s in cfg[key].split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"{key} must be a comma-separated list of integers") from None


# -- simulation -----------------------------------------------------------------------

@dataclass(frozen=True)
class RunSettings:
    N: int
    k: int
    rk_order: int = 3
    cfl_safety: float = 0.1
    dt_rule: str = "auto"  # auto | cfl | h43
    tau_max: float | None = None
    outflow_trace: str = "opposite"
    T: float | None = None


@dataclass
class RunOutput:
    state: object
    spaces: tuple
    op: object
    dt: float
    dt_label: str
    steps: int
    tau_max: float
    seconds: float


def time_step(problem, s: RunSettings) -> tuple[float, str]:
    from .time_integration import default_dt, select_dt

    h = 2.0 ** (-s.N)
    if s.dt_rule == "auto":
        return default_dt(problem.speeds, h, s.k, s.cfl_safety)
    if s.dt_rule == "cfl":
        return select_dt(problem.speeds, h, c=s.cfl_safety), f"dt={s.cfl_safety:g}/sum(c_i/h)"
    if s.dt_rule == "h43":
        return select_dt(problem.speeds, h, c=s.cfl_safety, rule="h43"), f"dt={s.cfl_safety:g}*h^(4/3)"
    raise ConfigError(f"dt_rule must be auto, cfl or h43, got {s.dt_rule!r}")


def prepare(problem, s: RunSettings):
    """Spaces, assembled operator, projected initial state and time step."""
    from .cdg_operator import assemble, default_tau_max, make_spaces
    from .problems import initial_state

    spaces = make_spaces(problem.system, s.N, s.k)
    tau = s.tau_max if s.tau_max is not None else default_tau_max(s.N, s.k)
    op = assemble(problem.system, spaces, tau, 0.0, outflow_trace=s.outflow_trace)
    dt, label = time_step(problem, s)
    return spaces, op, initial_state(problem, spaces), dt, label


def simulate(problem, s: RunSettings, callback=None, prepared=None) -> RunOutput:
    """Project the initial data, assemble, and integrate to T."""
    from .cdg_operator import rhs
    from .time_integration import integrate

    t0 = time.perf_counter()
    spaces, op, state, dt, label = prepared or prepare(problem, s)
    T = problem.T if s.T is None else s.T
    res = integrate(state, T, dt, lambda st: rhs(st, op), s.rk_order, callback)
    return RunOutput(res.state, spaces, op, dt, label, res.steps, op.tau_max,
                     time.perf_counter() - t0)


def solution_error(problem, state, spaces, convention: str = "auto") -> float:
    """L2 error at state.t.

    ``primal``: error of the primal copy (summed over components).
    ``paper``: sqrt(e_u^2 + e_v^2) with the dual error measured on primal
    cells (:data:`TABLE2_ERROR_POINTS` points), which reproduces the
    published nonperiodic tables.
    ``rms``: sqrt((e_u^2 + e_v^2) / 2) with accurate rules on both meshes.
    ``auto``: ``primal`` for periodic problems, ``paper`` otherwise.
    """
    import numpy as np

    from .projection import TABLE2_ERROR_POINTS, l2_error

    t = state.t

    def f_exact(x):
        return problem.exact_values(t, x)

    if convention == "auto":
        convention = "primal" if problem.system.boundary == "periodic" else "paper"
    P, D = spaces
    eu = l2_error(state.u, P, f_exact)
    if convention == "primal":
        return eu
    if convention == "paper":
        ev = l2_error(state.v, D, f_exact, TABLE2_ERROR_POINTS.get(P.d), cells="primal")
        return float(np.hypot(eu, ev))
    if convention == "rms":
        ev = l2_error(state.v, D, f_exact)
        return float(np.sqrt((eu ** 2 + ev ** 2) / 2))
    raise ConfigError(f"error must be auto, primal, paper or rms, got {convention!r}")


def _settings(cfg, N, k) -> RunSettings:
    rule = cfg["tau_max_rule"]
    if rule == "default":
        tau = None
    else:
        try:
            tau = float(rule)
        except ValueError:
            raise ConfigError("tau_max_rule must be 'default' or a positive number") from None
        if not tau > 0:
            raise ConfigError("tau_max_rule must be positive")
    T = cfg.get("T", "")
    return RunSettings(N=N, k=k, rk_order=_int(cfg, "rk_order", 2, 4),
                       cfl_safety=_float(cfg, "cfl_safety"),
                       dt_rule=_choice(cfg, "dt_rule", ("auto", "cfl", "h43")), tau_max=tau,
                       outflow_trace=_choice(cfg, "outflow_trace", ("opposite", "own")),
                       T=float(T) if T else None)


def _problem(cfg):
    from .problems import get_problem

    try:
        d = int(cfg["d"]) if cfg.get("d") else None
        return get_problem(cfg["problem"], d, cfg.get("boundary", "periodic"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


# -- studies ----------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return f"{x:.5e}"


def build_id() -> str:
    """Hash of the package sources, stable across runs of the same code."""
    h = hashlib.sha1()
    for p in sorted(Path(__file__).parent.glob("*.py")):
        h.update(p.name.encode())
        h.update(p.read_bytes())
    return h.hexdigest()[:12]


def run_convergence(cfg: dict[str, str]):
    from .projection import order_table

    problem = _problem(cfg)
    k = _int(cfg, "k", 0, 5)
    lo, hi = _int(cfg, "N_min", 1, 12), _int(cfg, "N_max", 1, 12)
    if hi < lo:
        raise ConfigError("N_max < N_min")
    convention = _choice(cfg, "error", ("auto", "primal", "paper", "rms"))
    rows, errors, meta = [], [], {}
    for N in range(lo, hi + 1):
        s = _settings(cfg, N, k)
        out = simulate(problem, s)
        if not problem.has_exact(out.state.t):
            raise ConfigError(f"{problem.name} has no exact solution at t={out.state.t}")
        e = solution_error(problem, out.state, out.spaces, convention)
        errors.append(e)
        log.info("N=%d error=%.3e steps=%d %.1fs", N, e, out.steps, out.seconds)
        meta[f"N{N}"] = f"dt={out.dt:.6e} steps={out.steps} tau_max={out.tau_max:.6e}"
        meta["dt_rule"] = out.dt_label
    orders = [""] + [f"{o:.2f}" for o in order_table(errors)] if len(errors) > 1 else [""]
    for i, N in enumerate(range(lo, hi + 1)):
        rows.append([str(N), _fmt(2.0 ** -N), _fmt(errors[i]), orders[i]])
    meta.update({"tau_max": "h/(2k+1)" if cfg["tau_max_rule"] == "default" else cfg["tau_max_rule"],
                 "quadrature": "Gauss, k+3 points per finest cell"
                 + ("; dual on primal cells" if problem.system.boundary != "periodic" else ""),
                 "T": f"{problem.T if not cfg['T'] else float(cfg['T']):.6g}"})
    return ["N", "h_N", "L2_error", "order"], rows, meta


@dataclass
class StudyResult:
    key: str
    levels: list
    errors: list
    seconds: list
    steps: list

    @property
    def order(self) -> float:
        from .projection import lsq_order
        return lsq_order(self.levels[-3:], self.errors[-3:])

    def as_dict(self) -> dict:
        return {"key": self.key, "levels": self.levels, "errors": self.errors,
                "seconds": self.seconds, "steps": self.steps}


def run_study(study, settings: dict | None = None, callback=None) -> StudyResult:
    """Run one convergence study (a :class:`~sgcdg.problems.Study`) with default settings."""
    from .problems import get_problem

    problem = get_problem(study.name, study.d, study.boundary)
    res = StudyResult(study.key, [], [], [], [])
    for N in study.levels:
        out = simulate(problem, RunSettings(N=N, k=study.k, **(settings or {})))
        res.levels.append(N)
        res.errors.append(solution_error(problem, out.state, out.spaces))
        res.seconds.append(out.seconds)
        res.steps.append(out.steps)
        if callback is not None:
            callback(res)
    return res


def exp_product(d: int):
    """exp(prod_i x_i), the projection test function."""
    import numpy as np

    def f(x):
        p = 1.0
        for xi in x:
            p = p * np.asarray(xi, dtype=float)
        return np.exp(p)

    return f


def run_projection(cfg: dict[str, str]):
    from .projection import TABLE2_ERROR_POINTS, l2_error, order_table, project
    from .sparse_space import enumerate_space

    d, k = _int(cfg, "d", 1, 3), _int(cfg, "k", 0, 5)
    lo, hi = _int(cfg, "N_min", 1, 10), _int(cfg, "N_max", 1, 10)
    if hi < lo:
        raise ConfigError("N_max < N_min")
    if cfg["points"] == "table":
        npts, cells = TABLE2_ERROR_POINTS.get(d), "primal"
        if npts is None:
            raise ConfigError(f"no published measurement rule for d={d}; use points=own")
    elif cfg["points"] == "own":
        npts, cells = None, "own"
    else:
        raise ConfigError("points must be 'table' or 'own'")
    f = exp_product(d)
    errors = []
    for N in range(lo, hi + 1):
        S = enumerate_space(d, N, k, ("dual", "nonperiodic"))
        errors.append(l2_error(project(f, S), S, f, npts, cells))
    orders = [""] + [f"{o:.2f}" for o in order_table(errors)] if len(errors) > 1 else [""]
    rows = []
    for i, N in enumerate(range(lo, hi + 1)):
        note = "near machine floor" if errors[i] < MACHINE_FLOOR else ""
        rows.append([str(N), _fmt(2.0 ** -N), _fmt(errors[i]), orders[i], note])
    meta = {"function": "exp(prod x_i)", "space": "dual nonperiodic",
            "quadrature": (f"{npts} Gauss points per primal cell" if cells == "primal"
                           else "k+3 Gauss points per own finest cell")}
    return ["N", "h_N", "L2_error", "order", "note"], rows, meta


def run_cfl(cfg: dict[str, str]):
    from .cfl_analysis import SCHEMES, TABLE1, build_dense_operator, max_cfl

    schemes = [s.strip() for s in cfg["schemes"].split(",") if s.strip()]
    for s in schemes:
        if s not in SCHEMES:
            raise ConfigError(f"unknown scheme {s!r}; known: {', '.join(SCHEMES)}")
    ks, nus = _int_list(cfg, "k"), _int_list(cfg, "nu")
    if any(nu not in (2, 3, 4) for nu in nus):
        raise ConfigError("nu values must be 2, 3 or 4")
    d, N, N_full = _int(cfg, "d", 1, 3), _int(cfg, "N", 1, 8), _int(cfg, "N_full", 1, 8)
    tau = cfg["tau"]
    if tau not in ("dt", "fixed"):
        tau = str(_float(cfg, "tau"))
    rows = []
    for scheme in schemes:
        for k in ks:
            level = N if scheme.startswith("sparse") else N_full
            L = build_dense_operator(scheme, d, level, k)
            for nu in nus:
                if d == 2 and (k, nu) not in TABLE1[scheme]:
                    continue
                c = max_cfl(L, nu, L.h, L.speeds, tau=tau if tau in ("dt", "fixed") else float(tau), k=k)
                pub = TABLE1[scheme].get((k, nu)) if d == 2 else None
                rows.append([scheme, str(k), str(nu), str(level), f"{c:.2f}",
                             f"{pub:.2f}" if pub is not None else ""])
    meta = {"tau": tau, "speeds": "1 in every direction", "criterion": "|R_nu(dt lambda)| <= 1+1e-10"}
    return ["scheme", "k", "nu", "N", "cfl", "published"], rows, meta


def run_energy(cfg: dict[str, str]):
    from .cdg_operator import energy

    problem = _problem({**cfg, "boundary": "periodic"})
    k, N = _int(cfg, "k", 0, 5), _int(cfg, "N", 1, 10)
    s = _settings(cfg, N, k)
    samples = _int(cfg, "samples", 1)
    T = s.T if s.T is not None else problem.T
    prepared = prepare(problem, s)
    op, dt = prepared[1], prepared[3]
    every = max(1, int(round(T / dt / samples)))
    e0 = energy(prepared[2], op)
    series = [(0.0, e0)]

    def record(state, n):
        if n % every == 0 or abs(state.t - T) < 1e-12:
            series.append((state.t, energy(state, op)))

    out = simulate(problem, s, record, prepared)
    rows = [[_fmt(t), _fmt(e), _fmt(e - e0)] for t, e in series]
    meta = {"dt_rule": out.dt_label, "dt": f"{out.dt:.6e}", "steps": str(out.steps),
            "tau_max": f"{out.tau_max:.6e}"}
    return ["t", "energy", "drift"], rows, meta


def run_slice(cfg: dict[str, str]):
    import numpy as np

    problem = _problem({**cfg, "boundary": "periodic"})
    k, N = _int(cfg, "k", 0, 5), _int(cfg, "N", 1, 10)
    t = _float(cfg, "t", positive=False)
    if t < 0:
        raise ConfigError("t must be non-negative")
    s = _settings({**cfg, "T": str(t)}, N, k)
    res = _int(cfg, "resolution", 2, 4001)
    comp = _int(cfg, "component", 0, problem.m - 1)
    plane = parse_plane(cfg["plane"], problem.d)
    if t == 0:
        spaces, _, state, _, _ = prepare(problem, s)
    else:
        out = simulate(problem, s)
        state, spaces = out.state, out.spaces
    axes, grid = export_slice(state.u[comp], spaces[0], plane, res)
    xs = np.linspace(0.0, 1.0, res)
    rows = [[_fmt(xs[i]), _fmt(xs[j]), _fmt(grid[i, j])] for i in range(res) for j in range(res)]
    meta = {"plane": cfg["plane"] or "x1-x2", "t": f"{t:.6g}", "component": str(comp)}
    return [f"x{axes[0] + 1}", f"x{axes[1] + 1}", "u"], rows, meta


def parse_plane(text: str, d: int) -> dict[int, float]:
    """'x3=0.5' -> {2: 0.5}: fixed coordinates; the two free axes form the raster."""
    fixed = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        if "=" not in part or not part.startswith("x"):
            raise ConfigError(f"plane entries look like x3=0.5, got {part!r}")
        key, value = part.split("=", 1)
        try:
            axis, val = int(key[1:]) - 1, float(value)
        except ValueError:
            raise ConfigError(f"bad plane entry {part!r}") from None
        if not 0 <= axis < d or not 0 <= val <= 1:
            raise ConfigError(f"plane entry {part!r} outside the domain")
        fixed[axis] = val
    if d - len(fixed) != 2:
        raise ConfigError(f"plane must fix exactly {d - 2} coordinate(s) for d={d}")
    return fixed


def export_slice(c, space, fixed: dict[int, float], resolution: int):
    """Values of sum_s c_s v_s on a uniform raster of a 2D coordinate plane."""
    import numpy as np

    from .projection import evaluate_grid

    xs = np.linspace(0.0, 1.0, resolution)
    grids = [np.array([fixed[i]]) if i in fixed else xs for i in range(space.d)]
    vals = evaluate_grid(c, space, grids)
    free = tuple(i for i in range(space.d) if i not in fixed)
    return free, vals.reshape(resolution, resolution)


RUNNERS = {"convergence": run_convergence, "projection": run_projection, "cfl": run_cfl,
           "energy": run_energy, "slice": run_slice}


def render_csv(command: str, cfg: dict[str, str], header, rows, meta) -> str:
    buf = io.StringIO()
    buf.write(f"# sgcdg {command}\n")
    buf.write(f"# build_id={build_id()}\n")
    for key in sorted(cfg):
        buf.write(f"# config.{key}={cfg[key]}\n")
    for key, value in meta.items():
        buf.write(f"# {key}={value}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _set_threads(n: int | None):
    if n is None:
        return
    if n < 1:
        raise ConfigError("--threads must be >= 1")
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="sgcdg", description=__doc__.split("\n\n")[0])
    parser.add_argument("command", choices=sorted(RUNNERS))
    parser.add_argument("overrides", nargs="*", metavar="key=value")
    parser.add_argument("--config", help=f"key=value file (the {ENV_CONFIG} variable wins)")
    parser.add_argument("--threads", type=int, default=None, help="cap BLAS worker threads")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        # thread caps only take effect before numpy is first imported
        _set_threads(args.threads)
        cfg = resolve_config(args.command, args.config, args.overrides)
        header, rows, meta = RUNNERS[args.command](cfg)
        text = render_csv(args.command, cfg, header, rows, meta)
    except ValueError as exc:
        # ConfigError and the libraries' input validation errors
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    out = cfg["output"]
    if out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
