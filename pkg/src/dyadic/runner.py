"""Declarative scenario runner.

A scenario is an INI file (see README for the full grammar)::

    [model]
    type = scalar
    beta = 1
    N = 30
    t_end = 5
    s = 1
    samples = 0

    [g]
    family = linear

    [phi]
    variant = constant
    value = 1

    [x0]
    kind = unit_mode
    n = 1

    [control]
    rtol = 1e-8

    [checks]
    names = energy_equality, envelope

    [output]
    dir = out/conjecture

Running it writes ``trajectory.csv``, ``energy.csv``, ``envelope.json``,
``report.json`` and ``plots/*.svg`` into the output directory.
"""

import configparser
import csv
import json
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import diagnostics, envelope, svg
from .integrator import StepControl, SuspectedBlowUp, integrate
from .shell_model import (
    PHI_REGISTRY,
    AveragedState,
    ModelParams,
    PhiSpec,
    ShellState,
    g_table,
    reduce_averaged_to_scalar,
    sobolev_norm,
)

logger = logging.getLogger(__name__)

OUTPUT_ROOT_ENV = "DYADIC_OUTPUT_ROOT"

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_CHECK_FAILED = 2
EXIT_BLOWUP = 3


class ConfigError(ValueError):
    pass


def _floats(text):
    return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]


@dataclass
class ScenarioConfig:
    model: str = "scalar"
    beta: float = 1.0
    N: int = 30
    t_end: float = 1.0
    s: float = 1.0
    samples: int = 0
    g_family: str = "constant"
    g_args: dict = field(default_factory=dict)
    monotone_g: bool = True
    phi: PhiSpec = field(default_factory=PhiSpec.constant)
    x0_kind: str = "unit_mode"
    x0_args: dict = field(default_factory=dict)
    alpha: float = 1.0
    gamma: float = 1.0
    constants: tuple = (0.0, 0.0, 0.0, 0.0, 0.0)
    control: StepControl = field(default_factory=StepControl)
    checks: list = field(default_factory=list)
    check_options: dict = field(default_factory=dict)
    output_dir: Path = Path("out")
    name: str = "scenario"

    # -- construction -------------------------------------------------------

    @classmethod
    def from_file(cls, path):
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        return cls.from_string(path.read_text(encoding="utf-8"), base=path.parent, name=path.stem)

    @classmethod
    def from_string(cls, text, base=Path("."), name="scenario"):
        cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}") from exc
        try:
            return cls._from_parser(cp, Path(base), name)
        except (KeyError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    @classmethod
    def _from_parser(cls, cp, base, name):
        known = {"model", "g", "phi", "x0", "averaged", "control", "checks", "output"}
        unknown = set(cp.sections()) - known
        if unknown:
            raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")
        m = cp["model"] if cp.has_section("model") else {}
        cfg = cls(name=name)
        cfg.model = m.get("type", "scalar").strip()
        if cfg.model not in ("scalar", "averaged"):
            raise ConfigError(f"model type must be scalar or averaged, got {cfg.model!r}")
        cfg.beta = float(m.get("beta", 1.0))
        cfg.N = int(m.get("N", 30))
        cfg.t_end = float(m.get("t_end", 1.0))
        cfg.s = float(m.get("s", 1.0))
        cfg.samples = int(m.get("samples", 0))
        for label, v in (("beta", cfg.beta), ("t_end", cfg.t_end), ("s", cfg.s)):
            if not v > 0:
                raise ConfigError(f"{label} must be positive")
        if cfg.N < 3:
            raise ConfigError("N must be >= 3")

        g = cp["g"] if cp.has_section("g") else {}
        cfg.g_family = g.get("family", "constant").strip()
        cfg.monotone_g = g.get("monotone", "true").strip().lower() in ("1", "true", "yes")
        args = {}
        for key, val in g.items():
            if key in ("family", "monotone"):
                continue
            if key == "values":
                args[key] = _floats(val)
            elif key in ("n1", "levels"):
                args[key] = int(val)
            else:
                args[key] = float(val)
        if cfg.g_family not in ("constant", "sqrt", "linear", "nlogn", "custom", "counterexample"):
            raise ConfigError(f"unknown g family {cfg.g_family!r}")
        cfg.g_args = args

        p = cp["phi"] if cp.has_section("phi") else {}
        variant = p.get("variant", "constant").strip()
        if variant == "constant":
            cfg.phi = PhiSpec.constant(float(p.get("value", 1.0)))
        elif variant == "per_shell":
            cfg.phi = PhiSpec.per_shell(_floats(p["values"]))
        elif variant == "windowed":
            cb = p.get("callback", "").strip()
            if cb not in PHI_REGISTRY:
                raise ConfigError(f"unknown phi callback {cb!r}")
            cfg.phi = PhiSpec.windowed(cb, int(p.get("m", 1)), float(p.get("sup_bound", 1.0)))
        else:
            raise ConfigError(f"unknown phi variant {variant!r}")

        x = cp["x0"] if cp.has_section("x0") else {}
        cfg.x0_kind = x.get("kind", "unit_mode").strip()
        if cfg.x0_kind not in ("unit_mode", "geometric", "sobolev", "custom", "random"):
            raise ConfigError(f"unknown x0 kind {cfg.x0_kind!r}")
        cfg.x0_args = {k: v for k, v in x.items() if k != "kind"}

        if cp.has_section("averaged"):
            a = cp["averaged"]
            cfg.alpha = float(a.get("alpha", 1.0))
            cfg.gamma = float(a.get("gamma", 1.0))
            if "constants" in a:
                cfg.constants = tuple(_floats(a["constants"]))
            elif "seed" in a:
                rng = np.random.default_rng(int(a["seed"]))
                cfg.constants = tuple(rng.uniform(-1.0, 1.0, 5))
            if len(cfg.constants) != 5:
                raise ConfigError("averaged constants must list C1..C5")

        c = cp["control"] if cp.has_section("control") else {}
        defaults = StepControl()
        cfg.control = StepControl(
            dt_init=float(c.get("dt_init", defaults.dt_init)),
            rtol=float(c.get("rtol", defaults.rtol)),
            atol=float(c.get("atol", defaults.atol)),
            dt_min=float(c.get("dt_min", defaults.dt_min)),
            dt_max=float(c.get("dt_max", defaults.dt_max)),
            max_steps=int(c.get("max_steps", defaults.max_steps)),
        )

        ch = cp["checks"] if cp.has_section("checks") else {}
        names = [n.strip() for n in ch.get("names", "").split(",") if n.strip()]
        bad = [n for n in names if n not in CHECKS]
        if bad:
            raise ConfigError(f"unknown check(s): {', '.join(bad)}")
        cfg.checks = names
        cfg.check_options = {k: float(v) for k, v in ch.items() if k != "names"}

        o = cp["output"] if cp.has_section("output") else {}
        out = Path(o.get("dir", f"out/{name}"))
        root = os.environ.get(OUTPUT_ROOT_ENV)
        if root:
            out = Path(root) / (out if not out.is_absolute() else out.name)
        elif not out.is_absolute():
            out = base / out
        cfg.output_dir = out
        return cfg

    # -- derived objects ----------------------------------------------------

    def params(self, N=None):
        N = self.N if N is None else N
        return ModelParams.from_family(
            self.beta, N, self.g_family, phi=self.phi, alpha=self.alpha, gamma=self.gamma,
            s=self.s, monotone_g=self.monotone_g, **self.g_args,
        )

    def initial_vector(self, N=None):
        N = self.N if N is None else N
        a = self.x0_args
        n = np.arange(1, N + 1)
        if self.x0_kind == "unit_mode":
            k = int(a.get("n", 1))
            if not 1 <= k <= N:
                raise ConfigError(f"unit_mode n={k} outside 1..{N}")
            x = np.zeros(N)
            x[k - 1] = float(a.get("amplitude", 1.0))
        elif self.x0_kind == "geometric":
            rho = float(a.get("rho", 0.25))
            support = int(a.get("support", self.N // 2))
            x = float(a.get("amplitude", 1.0)) * rho ** (n - 1.0)
            x[n > support] = 0.0
        elif self.x0_kind == "sobolev":
            # 2^{-s n} n^{-p}: in H^s exactly when p > 1/2
            x = float(a.get("amplitude", 1.0)) * np.exp2(-float(a.get("s", 1.0)) * n) \
                * n ** -float(a.get("p", 1.0))
        elif self.x0_kind == "custom":
            vals = _floats(a["values"])
            x = np.zeros(N)
            x[: min(N, len(vals))] = vals[:N]
        else:
            rng = np.random.default_rng(int(a.get("seed", 0)))
            scale = float(a.get("scale", 0.1))
            support = int(a.get("support", self.N // 2))
            shape = (4, N) if self.model == "averaged" else (N,)
            x = scale * rng.uniform(-1.0, 1.0, shape)
            x[..., n > support] = 0.0
            return x
        if self.model == "averaged":
            # energy placed in the first component
            return np.vstack([x, np.zeros((3, N))])
        return x

    def initial_state(self, N=None):
        x = self.initial_vector(N)
        if self.model == "averaged":
            return AveragedState(0.0, x, np.array(self.constants))
        return ShellState(0.0, x)

    def t_out(self):
        if self.samples > 0:
            return np.linspace(0.0, self.t_end, self.samples + 1)[1:]
        return None

    def to_dict(self):
        return {
            "name": self.name, "model": self.model, "beta": self.beta, "N": self.N,
            "t_end": self.t_end, "s": self.s, "samples": self.samples,
            "g_family": self.g_family, "g_args": self.g_args, "phi": self.phi.to_dict(),
            "x0_kind": self.x0_kind, "x0_args": self.x0_args,
            "alpha": self.alpha, "gamma": self.gamma, "constants": list(self.constants),
            "control": {f: getattr(self.control, f) for f in self.control.__dataclass_fields__},
            "checks": self.checks,
        }


# -- checks -------------------------------------------------------------------

def verdict(name, passed, measured, bound, slack=0.0, **extra):
    out = {"name": name, "pass": bool(passed), "measured": _num(measured),
           "bound": _num(bound), "slack": _num(slack)}
    out.update(extra)
    return out


def _num(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else str(v)


@dataclass
class RunContext:
    cfg: ScenarioConfig
    params: ModelParams
    traj: object
    _cache: dict = field(default_factory=dict)

    def energy(self):
        if "energy" not in self._cache:
            eps = self.cfg.check_options.get("equality_tol", 100.0 * self.cfg.control.rtol)
            self._cache["energy"] = diagnostics.energy_report(self.traj, eps_tol=eps)
        return self._cache["energy"]

    def bounding(self):
        if "bs" not in self._cache:
            self._cache["bs"] = envelope.bounding_sequence(self.cfg.initial_vector(), self.params)
        return self._cache["bs"]

    def opt(self, key, default):
        return self.cfg.check_options.get(key, default)


def _require_scalar(ctx, name):
    if ctx.cfg.model != "scalar":
        raise ConfigError(f"check {name!r} needs a scalar model")


def check_energy_inequality(ctx):
    rep = ctx.energy()
    e0 = max(rep.E[0], ctx.cfg.control.atol)
    measured = float(np.max(rep.residual)) / e0
    return verdict("energy_inequality", measured <= rep.eps_tol, measured, rep.eps_tol)


def check_energy_equality(ctx):
    rep = ctx.energy()
    e0 = max(rep.E[0], ctx.cfg.control.atol)
    measured = rep.max_abs_residual / e0
    return verdict("energy_equality", measured <= rep.eps_tol, measured, rep.eps_tol,
                   l3w_integral=float(rep.l3w_integral[-1]))


def check_energy_monotone(ctx):
    rep = ctx.energy()
    tol = rep.eps_tol * max(rep.E[0], ctx.cfg.control.atol)
    growth = float(np.max(np.diff(rep.E), initial=0.0))
    return verdict("energy_monotone", growth <= tol, growth, 0.0, tol)


def check_envelope(ctx):
    _require_scalar(ctx, "envelope")
    slack = ctx.opt("envelope_slack", 1e-8)
    rep = envelope.envelope_dominates(ctx.traj, ctx.bounding(), slack)
    return verdict("envelope", rep.passed, rep.max_excess, 0.0, slack,
                   n_violations=len(rep.violations))


def check_dn_recursion(ctx):
    _require_scalar(ctx, "dn_recursion")
    slack = ctx.opt("dn_slack", 1e-6)
    exc = envelope.dn_recursion_excess(ctx.traj)
    m = float(np.max(exc))
    return verdict("dn_recursion", m <= slack, m, 0.0, slack)


def check_decay_ladder(ctx):
    s = ctx.opt("ladder_s", ctx.cfg.s)
    lp, sub, rep = envelope.auto_ladder(ctx.bounding(), s, eta=ctx.opt("ladder_eta", 0.25))
    ctx._cache["ladder"] = (lp, sub, rep)
    return verdict("decay_ladder", rep.passed, -rep.min_margin, 0.0, 0.0,
                   levels=len(rep.levels), n0=lp.n0, theta=lp.theta)


def check_adjacent_pairs(ctx):
    s = ctx.opt("subseq_s", ctx.cfg.s)
    length = int(ctx.opt("subseq_length", 100_000))
    family = ctx.cfg.g_family
    g = g_table(family, length, **ctx.cfg.g_args) if family != "custom" else ctx.params.g
    rep = envelope.adjacent_pairs_growth(
        g, int(ctx.opt("subseq_n0", 1)), ctx.opt("subseq_theta", 1.0), s)
    ok = rep["status"] == "ok" and rep["monotone"] and rep["at_least_one"]
    counts = rep["counts"]
    return verdict("adjacent_pairs", ok, min(counts.values(), default=0), 1, 0.0,
                   status=rep["status"], counts={str(k): v for k, v in counts.items()})


def check_summability(ctx):
    s = ctx.opt("ladder_s", ctx.cfg.s)
    rep = envelope.summability_report(ctx.bounding(), s)
    bound = ctx.opt("share_bound", 1e-2)
    ok = rep["last_quarter_share"] < bound and rep["c_decreasing"]
    return verdict("summability", ok, rep["last_quarter_share"], bound,
                   c_decreasing=rep["c_decreasing"], decay_constant=_num(rep["decay_constant"]))


def check_window_balance(ctx):
    _require_scalar(ctx, "window_balance")
    res = diagnostics.window_balance(ctx.traj, 1, ctx.params.N - 1)
    tol = ctx.opt("fd_tol", 1e-4)
    scale = max(float(ctx.energy().E[0]), ctx.cfg.control.atol)
    m = float(np.max(np.abs(res))) / scale
    return verdict("window_balance", m <= tol, m, tol)


def check_tao_audit(ctx):
    _require_scalar(ctx, "tao_audit")
    worst = 0.0
    for st in ctx.traj:
        q = diagnostics.tao_quantities(st, ctx.params, ctx.cfg.s)
        a = q.audit(ctx.params)
        worst = max(worst, a["L_ratio"], a["H_ratio"])
    return verdict("tao_audit", worst <= 1.0 + 1e-12, worst, 1.0)


def smoothing_sup(traj, s1, s2):
    """sup over stored times of phi(t) ||X(t)||_{H^{s2}} with phi = 1/psi."""
    best = 0.0
    for st in traj:
        val = diagnostics.smoothing_psi(st.t, s1, s2, traj.params, warn=False)
        best = max(best, val.phi * sobolev_norm(st.x, s2))
    return best


def check_smoothing(ctx):
    _require_scalar(ctx, "smoothing")
    s1 = ctx.opt("s1", 1.2 * ctx.cfg.beta)
    s2 = ctx.opt("s2", 1.5 * ctx.cfg.beta)
    a = smoothing_sup(ctx.traj, s1, s2)
    cfg2 = ScenarioConfig(**{**ctx.cfg.__dict__, "N": 2 * ctx.cfg.N})
    traj2 = integrate(cfg2.initial_state(), cfg2.params(), cfg2.t_end, cfg2.control, cfg2.t_out())
    b = smoothing_sup(traj2, s1, s2)
    rel = abs(b - a) / a if a > 0 else 0.0
    tol = ctx.opt("smoothing_tol", 0.05)
    return verdict("smoothing", math.isfinite(a) and rel <= tol, rel, tol,
                   sup_N=a, sup_2N=b)


def check_averaged_reduction(ctx):
    if ctx.cfg.model != "averaged":
        raise ConfigError("check 'averaged_reduction' needs an averaged model")
    red = reduce_averaged_to_scalar(ctx.traj, ctx.params)
    m = float(np.max(np.abs(red.residual)))
    tol = ctx.opt("reduction_tol", 1e-8)
    return verdict("averaged_reduction", m <= tol, m, tol)


CHECKS = {
    "energy_inequality": check_energy_inequality,
    "energy_equality": check_energy_equality,
    "energy_monotone": check_energy_monotone,
    "envelope": check_envelope,
    "dn_recursion": check_dn_recursion,
    "decay_ladder": check_decay_ladder,
    "adjacent_pairs": check_adjacent_pairs,
    "summability": check_summability,
    "window_balance": check_window_balance,
    "tao_audit": check_tao_audit,
    "smoothing": check_smoothing,
    "averaged_reduction": check_averaged_reduction,
}

# checks that only need the bounding sequence
ENVELOPE_CHECKS = ("decay_ladder", "adjacent_pairs", "summability")


# -- artifacts ----------------------------------------------------------------

def _fmt(v):
    return format(float(v), ".17g")


def write_trajectory_csv(path, traj):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        N = traj.params.N
        if traj.model == "averaged":
            w.writerow(["t"] + [f"X{i}_{n}" for i in range(1, 5) for n in range(1, N + 1)])
            for t, x in zip(traj.t, traj.x):
                w.writerow([_fmt(t)] + [_fmt(v) for v in x.ravel()])
        else:
            w.writerow(["t"] + [f"X{n}" for n in range(1, N + 1)])
            for t, x in zip(traj.t, traj.x):
                w.writerow([_fmt(t)] + [_fmt(v) for v in x])


def write_energy_csv(path, traj, rep):
    rate = (2.0 * (traj.params.averaged_decay_rates if traj.model == "averaged"
                   else traj.params.decay_rates) * traj.shell_energies).sum(axis=1)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "E", "residual", "dissipation_rate", "dissipated"])
        for row in zip(rep.t, rep.E, rep.residual, rate, rep.dissipation):
            w.writerow([_fmt(v) for v in row])


def read_csv_table(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], np.array([[float(v) for v in r] for r in rows[1:]])
    return header, data


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _plots(outdir, traj, rep):
    pdir = outdir / "plots"
    pdir.mkdir(parents=True, exist_ok=True)
    svg.line_plot(pdir / "energy.svg", [("E(t)", rep.t, rep.E)],
                  title="Energy decay", xlabel="t", ylabel="E", logy=True)
    n = np.arange(1, traj.params.N + 1)
    X2 = traj.shell_energies
    picks = sorted({0, len(traj) // 4, len(traj) // 2, len(traj) - 1})
    svg.line_plot(pdir / "spectrum.svg",
                  [(f"t={traj.t[i]:.3g}", n, X2[i]) for i in picks],
                  title="Shell spectrum", xlabel="n", ylabel="X_n^2", logy=True)
    if traj.model == "scalar":
        flux, diss = diagnostics.flux_profile(traj.state(len(traj) // 2), traj.params)
        svg.line_plot(pdir / "flux.svg",
                      [("|Pi_n|", n, np.abs(flux)), ("delta_n", n, diss)],
                      title=f"Flux profile at t={traj.t[len(traj) // 2]:.3g}",
                      xlabel="n", ylabel="rate", logy=True)


# -- entry points -------------------------------------------------------------

def run_scenario(cfg):
    """Integrate, run the requested checks and write all artifacts.

    Returns ``(exit_code, report_dict)``.
    """
    outdir = Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    params = cfg.params()
    report = {"scenario": cfg.to_dict(), "checks": [], "status": "ok"}
    try:
        traj = integrate(cfg.initial_state(), params, cfg.t_end, cfg.control, cfg.t_out())
    except SuspectedBlowUp as exc:
        report["status"] = "suspected_blowup"
        report["blowup"] = {"reason": exc.reason, "t": exc.last_state.t, "stats": exc.stats,
                            "last_state": np.asarray(exc.last_state.x).tolist()}
        _write_json(outdir / "report.json", report)
        logger.warning("%s: %s", cfg.name, exc)
        return EXIT_BLOWUP, report

    ctx = RunContext(cfg, params, traj)
    rep = ctx.energy()
    write_trajectory_csv(outdir / "trajectory.csv", traj)
    write_energy_csv(outdir / "energy.csv", traj, rep)
    report["run"] = {"accepted": traj.accepted, "rejected": traj.rejected,
                     "nfev": traj.nfev, "stored": len(traj)}
    for name in cfg.checks:
        report["checks"].append(CHECKS[name](ctx))

    env = {}
    if cfg.model == "scalar":
        bs = ctx.bounding()
        env = {"y": bs.y.tolist(), "c": [_num(v) for v in bs.c], "h": bs.h.tolist()}
        dom = envelope.envelope_dominates(traj, bs, ctx.opt("envelope_slack", 1e-8))
        env["domination"] = dom.to_dict()
        if "ladder" in ctx._cache:
            lp, sub, lrep = ctx._cache["ladder"]
            env["n_k"] = sub.indices.tolist()
            env["ladder"] = {"n0": lp.n0, "theta": lp.theta, "eta": lp.eta, **lrep.to_dict()}
    _write_json(outdir / "envelope.json", env)
    _plots(outdir, traj, rep)

    failed = [c["name"] for c in report["checks"] if not c["pass"]]
    report["status"] = "checks_failed" if failed else "ok"
    report["files"] = ["trajectory.csv", "energy.csv", "envelope.json", "report.json",
                       "plots/energy.svg", "plots/spectrum.svg"]
    if cfg.model == "scalar":
        report["files"].append("plots/flux.svg")
    _write_json(outdir / "report.json", report)
    return (EXIT_CHECK_FAILED if failed else EXIT_OK), report


def run_envelope(cfg):
    """Bounding sequence and envelope-only checks, no integration."""
    params = cfg.params()
    ctx = RunContext(cfg, params, traj=None)
    bs = ctx.bounding()
    out = {"y": bs.y.tolist(), "f": bs.f.tolist(), "h": bs.h.tolist(),
           "c": [_num(v) for v in bs.c], "checks": []}
    for name in cfg.checks:
        if name in ENVELOPE_CHECKS:
            out["checks"].append(CHECKS[name](ctx))
    if "ladder" in ctx._cache:
        lp, sub, lrep = ctx._cache["ladder"]
        out["n_k"] = sub.indices.tolist()
        out["ladder"] = {"n0": lp.n0, "theta": lp.theta, **lrep.to_dict()}
    failed = any(not c["pass"] for c in out["checks"])
    return (EXIT_CHECK_FAILED if failed else EXIT_OK), out


def subsequence_table(cfg, n0=1, theta=1.0, K=20, length=100_000):
    """Rows (k, n_k, gap, threshold) of the index ladder for the config's g family."""
    g = g_table(cfg.g_family, length, **cfg.g_args) if cfg.g_family != "custom" else cfg.params().g
    try:
        sub = envelope.special_subsequence(g, n0, theta, cfg.s, K)
        idx, status = sub.indices, "ok"
    except envelope.SubsequenceExhausted as exc:
        idx, status = exc.indices, f"exhausted at level {exc.level} (hypothesis violated)"
    rows = []
    for k, nk in enumerate(idx):
        gap = int(idx[k] - idx[k - 1]) if k else None
        rows.append({"k": k, "n_k": int(nk), "gap": gap,
                     "threshold": 2.0 ** (-cfg.s * (k - 1)) * theta if k else None})
    return rows, status


def compare_runs(report_a, report_b):
    """Sup differences between two runs, read from the CSVs next to their reports."""
    ra, rb = Path(report_a), Path(report_b)
    meta_a = json.loads(ra.read_text(encoding="utf-8"))
    meta_b = json.loads(rb.read_text(encoding="utf-8"))
    if meta_a["scenario"]["model"] != meta_b["scenario"]["model"]:
        raise ValueError("cannot compare runs of different models")
    ha, ta = read_csv_table(ra.parent / "trajectory.csv")
    hb, tb = read_csv_table(rb.parent / "trajectory.csv")
    _, ea = read_csv_table(ra.parent / "energy.csv")
    _, eb = read_csv_table(rb.parent / "energy.csv")
    if meta_a["scenario"]["model"] == "averaged" and ha != hb:
        raise ValueError("averaged runs must have the same shell count")
    na, nb = ta.shape[1] - 1, tb.shape[1] - 1
    n = max(na, nb)
    xa = np.zeros((ta.shape[0], n))
    xb = np.zeros((tb.shape[0], n))
    xa[:, :na], xb[:, :nb] = ta[:, 1:], tb[:, 1:]
    same_grid = ta.shape[0] == tb.shape[0] and np.array_equal(ta[:, 0], tb[:, 0])
    t = ta[:, 0]
    if same_grid:
        xb_on_a, eb_on_a = xb, eb[:, 1]
    else:
        lo, hi = max(ta[0, 0], tb[0, 0]), min(ta[-1, 0], tb[-1, 0])
        keep = (t >= lo) & (t <= hi)
        t, xa, ea = t[keep], xa[keep], ea[keep]
        xb_on_a = np.column_stack([np.interp(t, tb[:, 0], xb[:, j]) for j in range(n)])
        eb_on_a = np.interp(t, tb[:, 0], eb[:, 1])
    shell = np.max(np.abs(xa - xb_on_a), axis=0)
    fa = np.zeros(n)
    fb = np.zeros(n)
    fa[:na], fb[:nb] = ta[-1, 1:], tb[-1, 1:]
    return {
        "same_grid": bool(same_grid),
        "samples": int(t.size),
        "energy_sup_diff": float(np.max(np.abs(ea[:, 1] - eb_on_a))),
        "shell_sup_diff": shell.tolist(),
        "state_sup_diff": float(np.max(shell)),
        "final_state_diff": float(np.max(np.abs(fa - fb))),
        "final_state_scale": float(max(np.max(np.abs(fa)), np.max(np.abs(fb)))),
    }
