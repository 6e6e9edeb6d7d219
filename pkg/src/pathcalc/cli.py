"""Command line experiments writing CSV tables.

Exit codes: 0 when the computed verdict converged, 2 when it diverged and 1
when the command could not run (bad arguments, unparsable specs, failed
preconditions).
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import asdict, dataclass

import numpy as np

from ._spec import SpecError, parse_range
from .functional import Constant, parse_functional_spec
from .identities import (
    demo_compare_iii,
    demo_prop11,
    demo_U_discontinuity,
    fair_game_probe,
    harmonic_check,
    kw_check,
    one_form_identity_check,
)
from .integrate import cov_C12, cov_class_S, pathwise_integral
from .partition import parse_partition_spec
from .path import parse_path_spec
from .quadvar import qv_estimate

__all__ = ["ExperimentConfig", "run", "main"]

EXIT_OK, EXIT_USAGE, EXIT_DIVERGED = 0, 1, 2
DEFAULT_PARTITION = "dyadic:T=1,levels=4..14"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class ExperimentConfig:
    """Parsed command line; every spec string is parsed before computing."""

    subcommand: str
    path: str | None
    functional: str | None
    partition: str
    levels: str | None
    horizon: float
    tol: float
    out: str | None
    seed: int | None
    eps: float = 0.5
    alpha: str | None = None
    sigma: float = 1.0
    demo: str | None = None

    def echo(self):
        items = [f"{k}={v}" for k, v in asdict(self).items() if v is not None and k != "out"]
        return "# " + " ".join(items)


def fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if np.isnan(v):
            return "nan"
        return format(v, ".17g")
    return str(v)


def write_csv(header, rows, cfg, stream):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    buf.write(cfg.echo() + "\n")
    stream.write(buf.getvalue())


def build_parser():
    p = _Parser(prog="pathcalc", description="Pathwise calculus experiments with CSV output.")
    sub = p.add_subparsers(dest="subcommand", required=True)

    def common(sp, path=True, functional=False, functional_required=False, default_tol=1e-3):
        if path:
            sp.add_argument("--path", required=True, help="path spec, e.g. fs:levels=14,seed=42")
        if functional:
            sp.add_argument("--functional", required=functional_required,
                            help="functional spec, e.g. eval:f=square")
        sp.add_argument("--partition", default=DEFAULT_PARTITION, help="partition spec")
        sp.add_argument("--levels", help="override levels, a..b")
        sp.add_argument("--tol", type=float, default=default_tol)
        sp.add_argument("--out", help="output CSV file (stdout by default)")
        sp.add_argument("--seed", type=int, help="seed for random path specs")

    common(sub.add_parser("qv", help="quadratic sums per level"), default_tol=5e-2)
    sp = sub.add_parser("integrate", help="left Riemann integral of the vertical gradient of a functional")
    common(sp, functional=True, functional_required=True, default_tol=5e-2)
    sp = sub.add_parser("cov", help="change-of-variable breakdown per level")
    common(sp, functional=True, functional_required=True)
    sp.add_argument("--class-s", action="store_true", help="use the first-order formula")
    sp = sub.add_parser("kw", help="product rule for pathwise integrals")
    common(sp, functional=True)
    sp = sub.add_parser("oneform", help="identity for the path-dependent 1-form")
    common(sp, functional=True)
    sp = sub.add_parser("harmonic", help="PDE and representation of a harmonic functional")
    common(sp, functional=True, functional_required=True, default_tol=1e-2)
    sp.add_argument("--sigma", type=float, default=1.0, help="constant quadratic variation density")
    sp = sub.add_parser("fairgame", help="fair-game perturbation certificate")
    common(sp, functional=True, functional_required=True, default_tol=1e-10)
    sp.add_argument("--eps", type=float, default=0.5)
    sp = sub.add_parser("counterexample", help="counterexample demos")
    sp.add_argument("demo", choices=["prop11", "ucont", "compare"])
    sp.add_argument("--path", default=None)
    sp.add_argument("--alpha", default=None, help="jump time (prop11, default 1/pi) or t0 (compare, default 1/3)")
    sp.add_argument("--partition", default=None)
    sp.add_argument("--levels", default=None)
    sp.add_argument("--tol", type=float, default=None)
    sp.add_argument("--out", default=None)
    sp.add_argument("--seed", type=int, default=None)
    return p


_DEMO_PARTITIONS = {
    "prop11": "dyadic:T=1,levels=1..20",
    "ucont": "dyadic:T=1,levels=8..14",
    "compare": "dyadic:T=1,levels=4..14",
}


_DEMO_ALPHA = {"prop11": "0.3183098861837907", "compare": "1/3"}


def parse_config(argv):
    ns = build_parser().parse_args(argv)
    sub = ns.subcommand
    demo = getattr(ns, "demo", None)
    partition = ns.partition or _DEMO_PARTITIONS.get(demo, DEFAULT_PARTITION)
    tol = ns.tol
    if tol is None:
        tol = {"prop11": 2.0**-19, "ucont": 0.05, "compare": 1e-6}[demo]
    cfg = ExperimentConfig(
        subcommand=sub if demo is None else f"{sub} {demo}",
        path=ns.path,
        functional=getattr(ns, "functional", None),
        partition=partition,
        levels=ns.levels,
        horizon=1.0,
        tol=float(tol),
        out=ns.out,
        seed=ns.seed,
        eps=getattr(ns, "eps", 0.5),
        alpha=ns.alpha if demo in ("prop11", "compare") else None,
        sigma=getattr(ns, "sigma", 1.0),
        demo=demo,
    )
    if demo == "ucont" and cfg.path is None:
        cfg.path = "fs:levels=14,seed=42"
    if cfg.alpha is None and demo in _DEMO_ALPHA:
        cfg.alpha = _DEMO_ALPHA[demo]
    seq = parse_partition_spec(cfg.partition)
    if cfg.levels is not None:
        seq = seq.with_levels(parse_range(cfg.levels, cfg.levels, 0))
    cfg.horizon = seq.horizon
    x = parse_path_spec(cfg.path, seed=cfg.seed, horizon=seq.horizon) if cfg.path else None
    if x is not None and x.horizon != seq.horizon:
        raise SpecError("path horizon differs from the partition horizon", cfg.path, cfg.path, 0)
    F = parse_functional_spec(cfg.functional) if cfg.functional else None
    return ns, cfg, seq, x, F


# subcommands -------------------------------------------------------------------


def _exit(ok):
    return EXIT_OK if ok else EXIT_DIVERGED


def cmd_qv(ns, cfg, seq, x, F):
    res = qv_estimate(x, seq, tol=cfg.tol)
    m = x.dim
    cols = ["q_T"] if m == 1 else [f"q_T_{i + 1}{j + 1}" for i in range(m) for j in range(m)]
    rows = []
    prev = None
    for k, n in enumerate(res.levels):
        q = np.atleast_1d(np.asarray(res.q(n), dtype=float)).ravel()
        dprev = float(np.max(np.abs(q - prev))) if prev is not None else np.nan
        dj1 = res.cauchy_diags[k - 1] if k else np.nan
        rows.append([n, *q, dprev, dj1])
        prev = q
    return ["level", *cols, "delta_prev", "dJ1_prev"], rows, _exit(res.converged)


def cmd_integrate(ns, cfg, seq, x, F):
    if F.grad is None:
        raise UsageError(f"functional {cfg.functional} has no analytic vertical gradient to integrate")
    _, rep = pathwise_integral(F.grad, x, seq, tol=cfg.tol)
    rows = [[n, v, d, j] for n, v, d, j in zip(rep.levels, rep.values, rep.diffs, rep.j1)]
    return ["level", "value", "delta_prev", "dJ1_prev"], rows, _exit(rep.converged)


def cmd_cov(ns, cfg, seq, x, F):
    fn = cov_class_S if ns.class_s else cov_C12
    b = fn(F, x, seq, tol=cfg.tol)
    return ["level", "lhs", "time", "integral", "qv", "jump", "residual"], list(b.rows()), _exit(b.converged)


def _integrand(F):
    if F is None:
        return Constant(1.0)
    if F.grad is None:
        raise UsageError("functional has no analytic vertical gradient")
    return F.grad


def cmd_kw(ns, cfg, seq, x, F):
    phi = _integrand(F)
    r = kw_check(phi, phi, x, seq, tol=cfg.tol)
    rows = [[n, r.lhs[k], r.rhs["qv"][k], r.rhs["bracket"][k], r.residual[k]] for k, n in enumerate(r.levels)]
    return ["level", "lhs", "qv", "bracket", "residual"], rows, _exit(r.converged)


def cmd_oneform(ns, cfg, seq, x, F):
    fs = getattr(F, "fnames", ["identity"])
    r = one_form_identity_check(fs, x, seq, tol=cfg.tol)
    rows = [[n, r.lhs[k], r.rhs["drift"][k], r.rhs["qv"][k], r.residual[k]] for k, n in enumerate(r.levels)]
    return ["level", "lhs", "drift", "qv", "residual"], rows, _exit(r.converged)


def cmd_harmonic(ns, cfg, seq, x, F):
    h = harmonic_check(F, cfg.sigma, x, seq, tol=cfg.tol)
    r = h.representation
    rows = [[n, r.lhs[k], r.rhs["integral"][k], r.residual[k], h.pde_max] for k, n in enumerate(r.levels)]
    ok = r.converged and h.pde_max <= cfg.tol
    return ["level", "lhs", "integral", "residual", "pde_residual_max"], rows, _exit(ok)


def cmd_fairgame(ns, cfg, seq, x, F):
    r = fair_game_probe(F, x, seq, eps=cfg.eps)
    t = np.nan if r.t_star is None else r.t_star
    rows = [[r.level, t, r.value, r.reverified, r.verdict]]
    return ["level", "t_star", "value", "reverified", "verdict"], rows, _exit(r.verdict != "failed")


def cmd_counterexample(ns, cfg, seq, x, F):
    if cfg.demo == "prop11":
        d = demo_prop11(cfg.alpha, seq)
        rows = []
        for k, n in enumerate(d["levels"]):
            rows.append([n, d["membership"][n], d["j1"][k - 1] if k else np.nan])
        ok = not any(d["membership"].values()) and d["qv"].converged
        return ["level", "member", "dJ1_prev"], rows, _exit(ok)
    if cfg.demo == "ucont":
        d = demo_U_discontinuity(x, seq)
        if not d["applicable"]:
            return ["level", "applicable"], [[n, False] for n in d["levels"]], EXIT_DIVERGED
        rows = [[n, s, q, g] for n, s, q, g in zip(d["levels"], d["sup_distance"], d["qv_gap"], d["G_gap"])]
        ok = d["sup_distance"][-1] < cfg.tol and d["qv_gap"][-1] > 0.5 * d["qv"]
        return ["level", "sup_distance", "qv_gap", "G_gap"], rows, _exit(ok)
    d = demo_compare_iii(seq, t0=cfg.alpha, x=x, tol=cfg.tol)
    rep = d["report"]
    rows = [[c, r.status, r.deviations[-1]] for c, r in rep.criteria.items()]
    rows.append(["u_probe", "pass" if d["u_continuous"] else "fail", d["u_probe"]["deviation"][-1]])
    return ["criterion", "status", "deviation_top"], rows, _exit(d["u_continuous"] and d["fails_2c"])


COMMANDS = {
    "qv": cmd_qv,
    "integrate": cmd_integrate,
    "cov": cmd_cov,
    "kw": cmd_kw,
    "oneform": cmd_oneform,
    "harmonic": cmd_harmonic,
    "fairgame": cmd_fairgame,
    "counterexample": cmd_counterexample,
}


def run(argv=None, stdout=None, stderr=None):
    """Run one experiment; returns the exit code."""
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        ns, cfg, seq, x, F = parse_config(argv)
        header, rows, code = COMMANDS[ns.subcommand](ns, cfg, seq, x, F)
    except (UsageError, SpecError, ValueError) as exc:
        stderr.write(f"pathcalc: error: {exc}\n")
        return EXIT_USAGE
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            write_csv(header, rows, cfg, fh)
    else:
        write_csv(header, rows, cfg, stdout)
    return code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
