"""Command-line front end: ``graphbeam <command> [options]``.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 numerical failure (a diagnostic ``error.json`` is written).
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .eigenfunctions import (
    adjoint_pairing,
    adjoint_pairing_closed_form,
    energy_inner,
    energy_norm,
    modes_for,
    residuals,
)
from .exponents import DegenerateExponentsError, NetworkParams
from .oracle import ConditioningError, ResolutionError, cross_validate, oracle_spectrum
from .resolvent import (
    SingularSystemError,
    apply_S,
    apply_T,
    apply_Tinv,
    numerical_rank,
    sampled_singular_values,
)
from .rootfinding import (
    BRANCHES,
    Box,
    CountMismatchError,
    NewtonError,
    WindingError,
    asymptotic_deviations,
    compute_spectrum,
    count_zeros,
    fitted_constant,
)
from .simulator import Simulator, decay_fit, init_state, simulate
from .state import DomainError, random_state

log = logging.getLogger("graphbeam")

NUMERICAL_ERRORS = (
    CountMismatchError,
    NewtonError,
    WindingError,
    ResolutionError,
    ConditioningError,
    SingularSystemError,
    DegenerateExponentsError,
    np.linalg.LinAlgError,
)


class ConfigError(ValueError):
    """Invalid command-line or file configuration."""


def _sine(s):
    return np.sin(np.pi * s)


PRESETS = {
    "sine": ([_sine] * 3, [lambda s: 0 * s] * 3),
    "poly": (
        [lambda s: (1 - s) * (1 + s), lambda s: (1 - s) * (1 - 2 * s**2), lambda s: (1 - s) * (1 + 3 * s)],
        [lambda s: (1 - s) * s] * 3,
    ),
    "bump": (
        [lambda s: (1 - s) ** 2 * np.cos(3 * s)] * 2 + [lambda s: (1 - s) * (1 + s**3)],
        [lambda s: np.sin(2 * np.pi * s)] * 3,
    ),
}

DEFAULTS = {
    "spectrum": {"n_max": 30},
    "asymptotics": {"n_min": 10, "n_max": 30},
    "modes": {"n_max": 5, "grid": 101},
    "simulate": {"N": 48, "dt": 1e-4, "T_final": 20.0, "record_every": 100},
    "oracle": {"N": 64, "k": 12, "tol": 1e-6},
    "verify": {"n_max": 8, "seed": 0, "skip": []},
}


# --- argument handling ---------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="graphbeam", description="Spectral toolkit for a beam network on a 3-edge star.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command")

    def common(p):
        p.add_argument("--gamma", type=float)
        p.add_argument("--alpha", type=float)
        p.add_argument("--beta", type=float)
        p.add_argument("--config", type=Path, help="JSON RunConfig file; flags override it")
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")

    p = sub.add_parser("spectrum", help="eigenvalues of both branches")
    common(p)
    p.add_argument("--n-max", type=int, dest="n_max")

    p = sub.add_parser("asymptotics", help="deviation from the leading asymptotics")
    common(p)
    p.add_argument("--n-min", type=int, dest="n_min")
    p.add_argument("--n-max", type=int, dest="n_max")

    p = sub.add_parser("modes", help="eigenfunction profiles")
    common(p)
    p.add_argument("--n-max", type=int, dest="n_max")
    p.add_argument("--grid", type=int)

    p = sub.add_parser("simulate", help="energy trace and decay fit")
    common(p)
    p.add_argument("--preset", help=f"initial data: {', '.join(PRESETS)}")
    p.add_argument("--N", type=int, dest="N")
    p.add_argument("--dt", type=float)
    p.add_argument("--T-final", type=float, dest="T_final")
    p.add_argument("--record-every", type=int, dest="record_every")

    p = sub.add_parser("oracle", help="collocation cross-check")
    common(p)
    p.add_argument("--N", type=int, dest="N")
    p.add_argument("--k", type=int)
    p.add_argument("--tol", type=float)

    p = sub.add_parser("verify", help="run the invariant suite")
    common(p)
    p.add_argument("--n-max", type=int, dest="n_max")
    p.add_argument("--seed", type=int)
    p.add_argument("--skip", action="append", help="name of a check to skip (repeatable)")
    return ap


def config_from_args(ns: argparse.Namespace) -> io.RunConfig:
    """Merge defaults, an optional config file and explicit flags."""
    cmd = ns.command
    opts = dict(DEFAULTS[cmd])
    params = {"gamma": 1.0, "alpha": 1.0, "beta": 1.0}
    preset = "sine" if cmd == "simulate" else None
    if ns.config is not None:
        try:
            base = io.RunConfig.from_json(ns.config.read_text())
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"cannot read config {ns.config}: {exc}") from exc
        if base.command != cmd:
            raise ConfigError(f"config is for {base.command!r}, not {cmd!r}")
        params.update(base.params.to_dict())
        opts.update(base.options)
        preset = base.preset or preset
    for k in ("gamma", "alpha", "beta"):
        if getattr(ns, k) is not None:
            params[k] = getattr(ns, k)
    for k in DEFAULTS[cmd]:
        v = getattr(ns, k, None)
        if v is not None:
            opts[k] = v
    if getattr(ns, "preset", None) is not None:
        preset = ns.preset
    if cmd == "simulate" and preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    try:
        p = NetworkParams(**params)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return io.RunConfig(cmd, p, opts, preset)


# --- commands ----------------------------------------------------------


def cmd_spectrum(cfg: io.RunConfig, out: Path) -> int:
    t0 = time.perf_counter()
    rep = compute_spectrum(cfg.params, int(cfg.options["n_max"]))
    io.write_spectrum_csv(rep, out / "spectrum.csv")
    doc = io.write_json(out / "spectrum.json", io.spectrum_summary(rep), cfg, time.perf_counter() - t0)
    print(f"{doc['count']} eigenvalues, interlacing_ok={doc['interlacing_ok']}")
    return 0


def cmd_asymptotics(cfg: io.RunConfig, out: Path) -> int:
    t0 = time.perf_counter()
    lo, hi = int(cfg.options["n_min"]), int(cfg.options["n_max"])
    rep = compute_spectrum(cfg.params, hi)
    rows = asymptotic_deviations(rep, lo, hi)
    table = [
        [r.branch, r.n, r.value.real, r.value.imag, r.seed.real, r.seed.imag, r.deviation, r.scaled] for r in rows
    ]
    io.write_table_csv(table, ["branch", "n", "re", "im", "seed_re", "seed_im", "deviation", "n2_deviation"], out / "asymptotics.csv")
    C = fitted_constant(rows)
    io.write_json(out / "asymptotics.json", {"fitted_C": C, "rows": len(rows)}, cfg, time.perf_counter() - t0)
    print(f"fitted C = {C:.6g} over n in [{lo}, {hi}]")
    return 0


def cmd_modes(cfg: io.RunConfig, out: Path) -> int:
    t0 = time.perf_counter()
    rep = compute_spectrum(cfg.params, int(cfg.options["n_max"]))
    s = np.linspace(0.0, 1.0, int(cfg.options["grid"]))
    summary = []
    for ev in rep.upper():
        for k, m in enumerate(modes_for(ev, cfg.params)):
            name = f"mode_{ev.branch}{ev.label.replace('+', 'p').replace('-', 'm')}_{k}.csv"
            m.to_csv(out / name, s)
            r = residuals(m)
            summary.append({"file": name, "branch": ev.branch, "label": ev.label, "lambda": ev.value,
                            "ode": r.ode_residual, "bc": r.bc_residual, "connectivity": r.connectivity_residual})
    io.write_json(out / "modes.json", {"modes": summary}, cfg, time.perf_counter() - t0)
    print(f"wrote {len(summary)} mode profiles")
    return 0


def cmd_simulate(cfg: io.RunConfig, out: Path) -> int:
    t0 = time.perf_counter()
    o = cfg.options
    g, h = PRESETS[cfg.preset]
    x0 = init_state(g, h, int(o["N"]), cfg.params)
    trace = simulate(x0, cfg.params, float(o["dt"]), float(o["T_final"]), int(o["record_every"]))
    fit = decay_fit(trace)
    io.write_trace_csv(trace, out / "trace.csv")
    payload = {"initial_tag": x0.tag, "filtered_share": trace.filtered_share, "decay": {k: getattr(fit, k) for k in fit.__dataclass_fields__}}
    io.write_json(out / "simulate.json", payload, cfg, time.perf_counter() - t0)
    if fit.decaying:
        print(f"delta = {fit.delta:.6g} (r^2 = {fit.r_squared:.4f})")
    else:
        print(f"no decay: {fit.reason}")
    return 0


def cmd_oracle(cfg: io.RunConfig, out: Path) -> int:
    t0 = time.perf_counter()
    o = cfg.options
    vals = oracle_spectrum(cfg.params, int(o["N"]), int(o["k"]))
    top = max(abs(z.imag) for z in vals)
    n_max = 0
    while ((n_max + 0.875) * np.pi) ** 2 < top + 1:
        n_max += 1
    rep = compute_spectrum(cfg.params, n_max)
    match = cross_validate(rep, vals, float(o["tol"]))
    io.write_spectrum_csv(vals, out / "oracle.csv")
    io.write_json(out / "match.json", match.to_dict(), cfg, time.perf_counter() - t0)
    print(f"{len(match.pairs)} pairs, {len(match.unmatched_roots)} unmatched roots, {len(match.unmatched_oracle)} unmatched oracle values")
    return 0


def run_checks(params: NetworkParams, n_max: int = 8, seed: int = 0, skip=()) -> list:
    """Invariant suite; returns ``(name, passed, detail)`` tuples."""
    results = []

    def check(name, fn):
        if name in skip:
            return
        try:
            ok, detail = fn()
        except NUMERICAL_ERRORS + (DomainError, ValueError) as exc:
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append((name, bool(ok), detail))

    rep = compute_spectrum(params, n_max)
    check("interlacing", lambda: (rep.interlacing_ok, rep.interlacing_detail))

    def location():
        if params.beta == 0:
            worst = max(abs(e.value.real) for e in rep.eigenvalues)
            return worst <= 1e-8, f"imaginary-axis spectrum check: max |Re| = {worst:.2e}"
        top = rep.region.im_max
        box = Box(0.0, 10.0, -top, top)
        counts = {b: count_zeros(b, box, params) for b in BRANCHES}
        return all(c == 0 for c in counts.values()), f"zeros in Re >= 0: {counts}"

    check("spectrum_location", location)

    def modes():
        worst, orth, pair, eq31 = 0.0, 0.0, np.inf, 0.0
        for ev in rep.eigenvalues:
            ms = modes_for(ev, params)
            worst = max([worst] + [residuals(m).worst for m in ms])
            for m in ms:
                pa = adjoint_pairing(ev, m, params)
                pair = min(pair, abs(pa))
                if ev.branch == "D":
                    eq31 = max(eq31, abs(adjoint_pairing_closed_form(m) - pa) / abs(pa))
            if len(ms) == 2:
                orth = max(orth, abs(energy_inner(ms[0], ms[1], params)))
        ok = worst <= 1e-8 and orth <= 1e-10 and pair > 1e-6 and eq31 <= 1e-8
        return ok, f"residual {worst:.1e}, pair orthogonality {orth:.1e}, min |pairing| {pair:.2e}, closed-form gap {eq31:.1e}"

    check("eigenfunctions", modes)
    rng = np.random.default_rng(seed)
    N = 40

    def inverse():
        worst = 0.0
        for _ in range(5):
            xt = random_state(rng, N)
            worst = max(worst, energy_norm(apply_T(apply_Tinv(xt, params), params) - xt, params) / energy_norm(xt, params))
        return worst <= 1e-7, f"max relative |T T^-1 x - x| = {worst:.1e}"

    check("inverse", inverse)

    def dissipation():
        worst = 0.0
        for _ in range(5):
            x = random_state(rng, N, params, domain=True)
            Tx = apply_T(x, params)
            vp = x.at("v", np.array([0.0]), 1)[:, 0]
            gap = energy_inner(Tx, x, params).real + params.beta * np.sum(np.abs(vp) ** 2)
            worst = max(worst, abs(gap) / (energy_norm(x, params) * energy_norm(Tx, params)))
        return worst <= 1e-8, f"max relative dissipation gap = {worst:.1e}"

    check("dissipation", dissipation)

    def s_rank():
        states = [random_state(rng, N) for _ in range(40)]
        sv = sampled_singular_values(lambda x: apply_S(x, params), states, params)
        r = numerical_rank(sv)
        return r == 2, f"numerical rank {r}, sigma_3/sigma_1 = {sv[2] / sv[0]:.2e}"

    check("s_rank", s_rank)

    def oracle():
        top = rep.region.im_max
        k = min(24, sum(e.multiplicity for e in rep.eigenvalues if abs(e.value.imag) < 0.5 * top))
        vals = oracle_spectrum(params, 64, k)
        m = cross_validate(rep, vals, 1e-6)
        bad = [p for p in m.pairs if m.cluster_size(p[1]) not in (1, 2)]
        return not m.unmatched_oracle and not bad, f"{len(m.pairs)} pairs, max distance {m.max_distance:.1e}"

    check("oracle", oracle)

    def dynamics():
        x0 = init_state(*PRESETS["poly"], 48)
        sim = Simulator(params, 48, 1e-4)
        tr = sim.run(x0, 0.1, 1)
        if params.beta == 0:
            drift = float(np.max(np.abs(tr.energy / tr.energy[0] - 1)))
            return drift <= 1e-6, f"energy drift over 1000 steps {drift:.1e}"
        grow = float(np.max(np.diff(tr.energy) / tr.energy[:-1]))
        return grow <= 1e-12, f"max relative energy increase per step {grow:.1e}"

    check("dynamics", dynamics)
    return results


def cmd_verify(cfg: io.RunConfig, out: Path) -> int:
    t0 = time.perf_counter()
    o = cfg.options
    res = run_checks(cfg.params, int(o["n_max"]), int(o["seed"]), tuple(o.get("skip") or ()))
    for name, ok, detail in res:
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    passed = all(ok for _, ok, _ in res)
    payload = {"passed": passed, "checks": [{"name": n, "passed": ok, "detail": d} for n, ok, d in res]}
    io.write_json(out / "verify.json", payload, cfg, time.perf_counter() - t0)
    return 0 if passed else 1


COMMANDS = {
    "spectrum": cmd_spectrum,
    "asymptotics": cmd_asymptotics,
    "modes": cmd_modes,
    "simulate": cmd_simulate,
    "oracle": cmd_oracle,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    ap = build_parser()
    try:
        ns = ap.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if ns.command is None:
        ap.print_help(sys.stderr)
        return 2
    try:
        cfg = config_from_args(ns)
        if ns.command == "verify" and cfg.options.get("skip") is None:
            cfg.options["skip"] = []
        ns.out.mkdir(parents=True, exist_ok=True)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return COMMANDS[ns.command](cfg, ns.out)
    except NUMERICAL_ERRORS as exc:
        diag = {"error": type(exc).__name__, "message": str(exc)}
        box = getattr(exc, "box", None)
        if box is not None:
            diag["box"] = box.to_dict()
        io.write_json(ns.out / "error.json", diag, cfg)
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
