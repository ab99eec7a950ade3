"""Command-line front end: config parsing, subcommands, CSV reports.

Configurations are flat INI-style text: ``[section]`` headers, ``key=value``
pairs, ``#`` comments.  Unknown sections or keys are errors so typos never
pass silently.  Example::

    [market]
    r=0.02
    mu=0.1
    sigma=0.3
    [preferences]
    p=0.55
    [discount]
    kind=type1
    lambda=0.998
    rho1=0.088901
    rho2=0.068901

Subcommands:

    coeffs              print the HJB coupling coefficients (stdout CSV)
    solve-finite        backward (f, g) solve -> <out>/finite.csv
    solve-infinite      equilibrium enumeration -> <out>/infinite.csv
    baseline            Merton growth conditions (stdout CSV)
    verify              all verification checks -> <out>/verify.csv
    demo-inconsistency  naive plans drawn at t in {0, T/4, T/2}
                        -> <out>/demo_inconsistency.csv

Exit status: 0 success, 1 parse/validation error, 2 when verify records
any failed check, 3 on numerical blow-up.  Identical config and seed give
byte-identical CSV output for any worker count (``--workers`` flag or the
MERTONEQ_WORKERS environment variable).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, replace
from pathlib import Path

from . import discounting, finite_horizon, infinite_horizon, verification
from .discounting import DiscountSpec, Exponential, TypeI, TypeII
from .errors import BlowUpError, ConfigParseError, MertonEqError, ValidationError
from .preferences import CrraPreferences, MarketParams
from .verification import SimConfig

DEFAULT_FG_STEPS = 400
DEFAULT_SIM = {"x0": 1.0, "n_paths": 20000, "n_steps": 400, "horizon": 40.0, "seed": 12345}
DEFAULT_OUTPUT_DIR = "out"

_SECTIONS = {
    "market": {"r", "mu", "sigma"},
    "preferences": {"p", "terminal"},
    "discount": {"kind", "delta", "lambda", "rho", "rho1", "rho2"},
    "horizon": {"T", "steps"},
    "simulation": {"x0", "n_paths", "n_steps", "horizon", "seed"},
    "output": {"dir"},
}

_KIND_KEYS = {
    "exponential": {"delta"},
    "type1": {"lambda", "rho1", "rho2"},
    "type2": {"lambda", "rho"},
}


@dataclass(frozen=True)
class RunConfig:
    """Everything a run needs; constructed values are already validated."""

    market: MarketParams
    preferences: CrraPreferences
    discount: DiscountSpec
    horizon_T: float | None
    fg_steps: int
    sim: SimConfig
    output_dir: str


def _parse_raw(text: str) -> dict[str, dict[str, tuple[str, int]]]:
    raw: dict[str, dict[str, tuple[str, int]]] = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if body.startswith("["):
            if not body.endswith("]"):
                raise ConfigParseError("unterminated section header", lineno)
            name = body[1:-1].strip()
            if name not in _SECTIONS:
                raise ConfigParseError(f"unknown section [{name}]", lineno)
            if name in raw:
                raise ConfigParseError(f"duplicate section [{name}]", lineno)
            raw[name] = {}
            section = name
            continue
        if "=" not in body:
            raise ConfigParseError(f"expected key=value, got {body!r}", lineno)
        if section is None:
            raise ConfigParseError("key=value before any [section]", lineno)
        key, value = (part.strip() for part in body.split("=", 1))
        if key not in _SECTIONS[section]:
            raise ConfigParseError(f"unknown key {key!r} in [{section}]", lineno)
        if key in raw[section]:
            raise ConfigParseError(f"duplicate key {key!r} in [{section}]", lineno)
        raw[section][key] = (value, lineno)
    return raw


def _take(raw, section, key, convert, default=None, required=False):
    entry = raw.get(section, {}).get(key)
    if entry is None:
        if required:
            raise ConfigParseError(f"missing required key {key!r} in [{section}]")
        return default
    value, lineno = entry
    try:
        return convert(value)
    except ConfigParseError:
        raise
    except (TypeError, ValueError):
        raise ConfigParseError(f"bad value for {section}.{key}: {value!r}", lineno)


def _to_bool(value: str) -> bool:
    low = value.lower()
    if low in ("true", "false"):
        return low == "true"
    raise ValueError(value)


def _build_discount(raw) -> DiscountSpec:
    kind_entry = raw.get("discount", {}).get("kind")
    if kind_entry is None:
        raise ConfigParseError("missing required key 'kind' in [discount]")
    kind, lineno = kind_entry
    if kind not in _KIND_KEYS:
        raise ConfigParseError(f"unknown discount kind {kind!r}", lineno)
    for key, (_, key_line) in raw.get("discount", {}).items():
        if key != "kind" and key not in _KIND_KEYS[kind]:
            raise ConfigParseError(f"key {key!r} does not apply to kind {kind!r}", key_line)
    if kind == "exponential":
        spec: DiscountSpec = Exponential(
            delta=_take(raw, "discount", "delta", float, required=True)
        )
    elif kind == "type1":
        spec = TypeI(
            lam=_take(raw, "discount", "lambda", float, required=True),
            rho1=_take(raw, "discount", "rho1", float, required=True),
            rho2=_take(raw, "discount", "rho2", float, required=True),
        )
    else:
        spec = TypeII(
            lam=_take(raw, "discount", "lambda", float, required=True),
            rho=_take(raw, "discount", "rho", float, required=True),
        )
    discounting.validate(spec)
    return spec


def parse_config(text: str) -> RunConfig:
    """Parse and validate a configuration; all domain invariants are enforced."""
    raw = _parse_raw(text)
    market = MarketParams(
        r=_take(raw, "market", "r", float, required=True),
        mu=_take(raw, "market", "mu", float, required=True),
        sigma=_take(raw, "market", "sigma", float, required=True),
    )
    prefs = CrraPreferences(
        p=_take(raw, "preferences", "p", float, required=True),
        include_terminal=_take(raw, "preferences", "terminal", _to_bool, default=True),
    )
    discount = _build_discount(raw)
    horizon_T = _take(raw, "horizon", "T", float, default=None)
    fg_steps = _take(raw, "horizon", "steps", int, default=DEFAULT_FG_STEPS)
    sim = SimConfig(
        x0=_take(raw, "simulation", "x0", float, default=DEFAULT_SIM["x0"]),
        n_paths=_take(raw, "simulation", "n_paths", int, default=DEFAULT_SIM["n_paths"]),
        n_steps=_take(raw, "simulation", "n_steps", int, default=DEFAULT_SIM["n_steps"]),
        horizon=_take(raw, "simulation", "horizon", float, default=DEFAULT_SIM["horizon"]),
        seed=_take(raw, "simulation", "seed", int, default=DEFAULT_SIM["seed"]),
    )
    output_dir = _take(raw, "output", "dir", str, default=DEFAULT_OUTPUT_DIR)
    if horizon_T is not None and not horizon_T > 0.0:
        raise ValidationError(f"horizon T must be > 0, got {horizon_T}")
    return RunConfig(
        market=market,
        preferences=prefs,
        discount=discount,
        horizon_T=horizon_T,
        fg_steps=fg_steps,
        sim=sim,
        output_dir=output_dir,
    )


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):  # includes numpy float64 scalars
        return repr(float(value))
    return str(value)


def serialize_config(config: RunConfig) -> str:
    """Canonical text form; parse_config(serialize_config(c)) == c."""
    lines = ["[market]"]
    lines += [f"r={_fmt(config.market.r)}", f"mu={_fmt(config.market.mu)}",
              f"sigma={_fmt(config.market.sigma)}"]
    lines += ["[preferences]", f"p={_fmt(config.preferences.p)}",
              f"terminal={_fmt(config.preferences.include_terminal)}"]
    lines.append("[discount]")
    d = config.discount
    if isinstance(d, Exponential):
        lines += ["kind=exponential", f"delta={_fmt(d.delta)}"]
    elif isinstance(d, TypeI):
        lines += ["kind=type1", f"lambda={_fmt(d.lam)}",
                  f"rho1={_fmt(d.rho1)}", f"rho2={_fmt(d.rho2)}"]
    else:
        lines += ["kind=type2", f"lambda={_fmt(d.lam)}", f"rho={_fmt(d.rho)}"]
    lines.append("[horizon]")
    if config.horizon_T is not None:
        lines.append(f"T={_fmt(config.horizon_T)}")
    lines.append(f"steps={config.fg_steps}")
    lines += ["[simulation]", f"x0={_fmt(config.sim.x0)}",
              f"n_paths={config.sim.n_paths}", f"n_steps={config.sim.n_steps}",
              f"horizon={_fmt(config.sim.horizon)}", f"seed={config.sim.seed}"]
    lines += ["[output]", f"dir={config.output_dir}"]
    return "\n".join(lines) + "\n"


def apply_overrides(text: str, overrides: list[str]) -> str:
    """Fold --set section.key=value pairs into raw config text."""
    extra = []
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigParseError(f"--set expects section.key=value, got {item!r}")
        target, value = item.split("=", 1)
        section, key = target.split(".", 1)
        extra.append((section.strip(), key.strip(), value.strip()))
    # rebuild: parse raw, substitute, serialize back to raw lines
    raw = _parse_raw(text)
    for section, key, value in extra:
        if section not in _SECTIONS:
            raise ConfigParseError(f"unknown section [{section}] in --set")
        if key not in _SECTIONS[section]:
            raise ConfigParseError(f"unknown key {key!r} in [{section}] (--set)")
        raw.setdefault(section, {})[key] = (value, 0)
    lines = []
    for section, entries in raw.items():
        lines.append(f"[{section}]")
        lines += [f"{key}={value}" for key, (value, _) in entries.items()]
    return "\n".join(lines) + "\n"


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    text = ",".join(header) + "\n"
    for row in rows:
        text += ",".join(_fmt(cell) for cell in row) + "\n"
    path.write_text(text, newline="")


def _candidate_row(cand: infinite_horizon.EquilibriumCandidate) -> list:
    return [cand.z, cand.k, cand.k_tilde, cand.positive, cand.integrable,
            cand.transversal, cand.merton_transversal, cand.accepted]


def dispatch(subcommand: str, config: RunConfig, workers: int | None = None) -> int:
    """Run one subcommand; returns the process exit status."""
    out = Path(config.output_dir)
    market, prefs, discount = config.market, config.preferences, config.discount

    if subcommand == "coeffs":
        cm = discounting.hjb_coefficients(discount)
        sys.stdout.write("alpha1,alpha2,beta1,beta2\n")
        sys.stdout.write(
            ",".join(_fmt(v) for v in (cm.alpha1, cm.alpha2, cm.beta1, cm.beta2)) + "\n"
        )
        return 0

    if subcommand == "solve-finite":
        if config.horizon_T is None:
            raise ValidationError("solve-finite needs [horizon] T")
        sol = finite_horizon.solve_fg(
            market, prefs, discount, config.horizon_T, config.fg_steps
        )
        pol = finite_horizon.policy(sol, market, prefs)
        rows = [
            [t, f, g, c]
            for t, f, g, c in zip(sol.times, sol.f, sol.g, pol.consumption)
        ]
        _write_csv(out / "finite.csv", ["t", "f", "g", "c_star"], rows)
        return 0

    if subcommand == "solve-infinite":
        report = infinite_horizon.enumerate_equilibria(market, prefs, discount)
        _write_csv(
            out / "infinite.csv",
            ["z", "k", "k_tilde", "positive", "integrable", "transversal",
             "merton_transversal", "accepted"],
            [_candidate_row(c) for c in report.candidates],
        )
        return 0

    if subcommand == "baseline":
        base = infinite_horizon.merton_baseline(
            market, prefs, discounting.dominant_rate(discount)
        )
        sys.stdout.write(
            "z,k,k_tilde,weak_transversality,merton_transversality,regime\n"
        )
        c = base.candidate
        sys.stdout.write(
            ",".join(
                _fmt(v)
                for v in (c.z, c.k, c.k_tilde, base.weak_transversality,
                          base.merton_transversality, base.regime)
            )
            + "\n"
        )
        return 0

    if subcommand == "verify":
        rows = verification.run_verification(
            market, prefs, discount, config.sim,
            fg_horizon=config.horizon_T, fg_steps=config.fg_steps, workers=workers,
        )
        _write_csv(
            out / "verify.csv",
            ["check", "target", "estimate", "error", "pass"],
            [[r.check, r.target, r.estimate, r.error, r.passed] for r in rows],
        )
        return 0 if all(r.passed for r in rows) else 2

    if subcommand == "demo-inconsistency":
        if config.horizon_T is None:
            raise ValidationError("demo-inconsistency needs [horizon] T")
        steps = config.fg_steps
        if steps % 4 != 0:
            raise ValidationError("demo-inconsistency needs [horizon] steps divisible by 4")
        T = config.horizon_T
        dt = T / steps
        rows = []
        for node in (0, steps // 4, steps // 2):
            t = node * dt
            curve = finite_horizon.naive_consumption_fraction(
                market, prefs, discount, T, t, steps - node
            )
            rows += [[t, s, c] for s, c in zip(curve.times, curve.consumption)]
        _write_csv(out / "demo_inconsistency.csv", ["t", "s", "c_naive"], rows)
        return 0

    raise ValidationError(f"unknown subcommand {subcommand!r}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mertoneq",
        description="Time-consistent investment and consumption under "
        "pseudo-exponential discounting: solvers and verification.",
    )
    parser.add_argument(
        "subcommand",
        choices=["coeffs", "solve-finite", "solve-infinite", "baseline",
                 "verify", "demo-inconsistency"],
    )
    parser.add_argument("-c", "--config", required=True, help="path to config file")
    parser.add_argument(
        "--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
        help="override one config key (repeatable)",
    )
    parser.add_argument("--output-dir", help="override [output] dir")
    parser.add_argument("--workers", type=int, help="worker threads for simulation")
    args = parser.parse_args(argv)
    try:
        text = Path(args.config).read_text()
        if args.set:
            text = apply_overrides(text, args.set)
        config = parse_config(text)
        if args.output_dir:
            config = replace(config, output_dir=args.output_dir)
        return dispatch(args.subcommand, config, workers=args.workers)
    except BlowUpError as exc:
        print(f"mertoneq: blow-up: {exc}", file=sys.stderr)
        return 3
    except (ConfigParseError, ValidationError) as exc:
        print(f"mertoneq: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"mertoneq: {exc}", file=sys.stderr)
        return 1
    except MertonEqError as exc:
        print(f"mertoneq: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
