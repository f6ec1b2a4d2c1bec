"""Command-line entry point: ``periodic-asep {identities,cdf,pmf,simulate,compare}``.

Exit codes: 0 success, 1 an identity or comparison failed, 2 bad configuration.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction

from . import oracle, quadrature, simulator
from .errors import ASEPError, ConfigError
from .kernel import GeneralRhoProfile, RhoProfile
from .scalars import ModelParams, SiteSet, to_fraction

log = logging.getLogger(__name__)

MODES = ("identities", "cdf", "pmf", "simulate", "compare")
FORMATS = ("json", "csv")

COLUMNS = {
    "identities": ["identity", "trial", "equal", "left", "right"],
    "cdf": ["l", "x", "value", "imag_residual", "tail_estimate", "series_converged",
            "quadrature_converged", "quadrature_delta"],
    "pmf": ["l", "x", "pmf", "cdf", "converged"],
    "simulate": ["l", "x", "hits", "trials", "p_hat", "stderr"],
    "compare": ["l", "x", "formula", "converged", "p_hat", "stderr", "discrepancy", "pass"],
}


def _rational(value, name) -> str:
    try:
        return str(to_fraction(value))
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise ConfigError(name, f"not a rational: {value!r}") from exc


def _int(value, name, minimum=None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(name, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(name, f"must be >= {minimum}, got {value}")
    return value


def _float(value, name, positive=False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(name, f"expected a number, got {value!r}")
    if positive and not value > 0:
        raise ConfigError(name, f"must be positive, got {value}")
    return float(value)


def _section(data, name):
    value = data.get(name, {})
    if not isinstance(value, dict):
        raise ConfigError(name, "expected an object")
    return value


def _reject_unknown(raw: dict, cls, name):
    known = {f.name for f in fields(cls)}
    extra = set(raw) - known
    if extra:
        raise ConfigError(f"{name}.{sorted(extra)[0]}", "unknown key")


@dataclass
class ModelSection:
    p: str | None = None
    q: str | None = None

    @classmethod
    def parse(cls, raw):
        _reject_unknown(raw, cls, "model")
        p = _rational(raw["p"], "model.p") if "p" in raw else None
        q = _rational(raw["q"], "model.q") if "q" in raw else None
        if p is None and q is not None:
            p = str(1 - Fraction(q))
        if p is not None and q is None:
            q = str(1 - Fraction(p))
        if p is not None:
            if Fraction(p) + Fraction(q) != 1:
                raise ConfigError("model.q", f"p + q must equal 1, got {p} + {q}")
            if not 0 <= Fraction(p) <= 1:
                raise ConfigError("model.p", f"must lie in [0, 1], got {p}")
        return cls(p, q)


@dataclass
class ProfileSection:
    type: str | None = None
    rho: list | None = None
    m: int | None = None
    Y: list | None = None

    @classmethod
    def parse(cls, raw):
        _reject_unknown(raw, cls, "profile")
        kind = raw.get("type")
        if kind is None:
            return cls()
        if kind not in ("periodic", "general", "deterministic"):
            raise ConfigError("profile.type", f"unknown profile type {kind!r}")
        rho = m = Y = None
        if kind in ("periodic", "general"):
            if not isinstance(raw.get("rho"), list) or not raw["rho"]:
                raise ConfigError("profile.rho", "expected a non-empty list of rationals")
            rho = [_rational(v, f"profile.rho[{i}]") for i, v in enumerate(raw["rho"])]
            for i, v in enumerate(rho):
                if not 0 <= Fraction(v) <= 1:
                    raise ConfigError(f"profile.rho[{i}]", f"must lie in [0, 1], got {v}")
            if kind == "periodic":
                m = raw.get("m", len(rho))
                if _int(m, "profile.m", 1) != len(rho):
                    raise ConfigError("profile.m", f"period {m} but {len(rho)} rho values")
                if not any(Fraction(v) for v in rho):
                    raise ConfigError("profile.rho", "profile is identically zero")
        else:
            if not isinstance(raw.get("Y"), list) or not raw["Y"]:
                raise ConfigError("profile.Y", "expected a non-empty list of sites")
            Y = [_int(v, f"profile.Y[{i}]", 1) for i, v in enumerate(raw["Y"])]
            if sorted(set(Y)) != Y:
                raise ConfigError("profile.Y", "sites must be strictly increasing")
        return cls(kind, rho, m, Y)

    def build(self):
        if self.type == "periodic":
            return RhoProfile.parse(self.rho)
        if self.type == "general":
            return GeneralRhoProfile([Fraction(v) for v in self.rho])
        return SiteSet(self.Y)


@dataclass
class EvalSection:
    l: list = field(default_factory=lambda: [1])
    t: str | None = None
    x_range: list | None = None
    k_max: int | None = None
    tolerance: float = 1e-8
    points: int = 48
    radius: float | None = None
    abs_slack: float = 1e-3
    check_quadrature: bool = True

    @classmethod
    def parse(cls, raw):
        _reject_unknown(raw, cls, "eval")
        out = cls()
        if "l" in raw:
            ls = raw["l"] if isinstance(raw["l"], list) else [raw["l"]]
            if not ls:
                raise ConfigError("eval.l", "empty particle list")
            out.l = [_int(v, "eval.l", 1) for v in ls]
        if raw.get("t") is not None:
            out.t = _rational(raw["t"], "eval.t")
            if Fraction(out.t) < 0:
                raise ConfigError("eval.t", "time must be non-negative")
        if raw.get("x_range") is not None:
            xr = raw["x_range"]
            if not (isinstance(xr, list) and len(xr) == 2):
                raise ConfigError("eval.x_range", "expected [lo, hi]")
            lo, hi = _int(xr[0], "eval.x_range"), _int(xr[1], "eval.x_range")
            if lo > hi:
                raise ConfigError("eval.x_range", f"lo={lo} exceeds hi={hi}")
            out.x_range = [lo, hi]
        if raw.get("k_max") is not None:
            out.k_max = _int(raw["k_max"], "eval.k_max", 1)
            if out.k_max < max(out.l):
                raise ConfigError("eval.k_max", f"must be >= largest l ({max(out.l)})")
        if "tolerance" in raw:
            out.tolerance = _float(raw["tolerance"], "eval.tolerance", positive=True)
        if "points" in raw:
            out.points = _int(raw["points"], "eval.points", 8)
        if raw.get("radius") is not None:
            out.radius = _float(raw["radius"], "eval.radius", positive=True)
        if "abs_slack" in raw:
            out.abs_slack = _float(raw["abs_slack"], "eval.abs_slack")
        if "check_quadrature" in raw:
            if not isinstance(raw["check_quadrature"], bool):
                raise ConfigError("eval.check_quadrature", "expected true or false")
            out.check_quadrature = raw["check_quadrature"]
        return out

    @property
    def xs(self):
        return list(range(self.x_range[0], self.x_range[1] + 1))


@dataclass
class SimSection:
    trials: int = 10000
    L: int | None = None
    seed: int = 0

    @classmethod
    def parse(cls, raw):
        _reject_unknown(raw, cls, "sim")
        out = cls()
        if "trials" in raw:
            out.trials = _int(raw["trials"], "sim.trials", 1)
        if raw.get("L") is not None:
            out.L = _int(raw["L"], "sim.L", 1)
        if "seed" in raw:
            out.seed = _int(raw["seed"], "sim.seed", 0)
        return out


@dataclass
class IdentitySection:
    k_max: int = 4
    m_max: int = 4
    n_max: int = 12

    @classmethod
    def parse(cls, raw):
        _reject_unknown(raw, cls, "identities")
        out = cls()
        for name in ("k_max", "m_max", "n_max"):
            if name in raw:
                setattr(out, name, _int(raw[name], f"identities.{name}", 1))
        if out.n_max > oracle.MAX_DOUBLE_SUM_HORIZON:
            raise ConfigError("identities.n_max", f"at most {oracle.MAX_DOUBLE_SUM_HORIZON}")
        if out.k_max > oracle.MAX_DOUBLE_SUM_K:
            raise ConfigError("identities.k_max", f"at most {oracle.MAX_DOUBLE_SUM_K}")
        return out


@dataclass
class OutputSection:
    path: str | None = None
    format: str = "json"

    @classmethod
    def parse(cls, raw):
        _reject_unknown(raw, cls, "output")
        out = cls(raw.get("path"), raw.get("format", "json"))
        if out.format not in FORMATS:
            raise ConfigError("output.format", f"expected one of {FORMATS}")
        return out


@dataclass
class RunConfig:
    mode: str
    model: ModelSection = field(default_factory=ModelSection)
    profile: ProfileSection = field(default_factory=ProfileSection)
    eval: EvalSection = field(default_factory=EvalSection)
    sim: SimSection = field(default_factory=SimSection)
    identities: IdentitySection = field(default_factory=IdentitySection)
    output: OutputSection = field(default_factory=OutputSection)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config", "expected a JSON object")
        unknown = set(data) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown key")
        mode = data.get("mode")
        if mode not in MODES:
            raise ConfigError("mode", f"expected one of {MODES}, got {mode!r}")
        cfg = cls(
            mode=mode,
            model=ModelSection.parse(_section(data, "model")),
            profile=ProfileSection.parse(_section(data, "profile")),
            eval=EvalSection.parse(_section(data, "eval")),
            sim=SimSection.parse(_section(data, "sim")),
            identities=IdentitySection.parse(_section(data, "identities")),
            output=OutputSection.parse(_section(data, "output")),
        )
        cfg.check_required()
        return cfg

    def to_dict(self) -> dict:
        return asdict(self)

    def check_required(self):
        if self.mode == "identities":
            return
        if self.model.p is None:
            raise ConfigError("model.p", f"required for mode {self.mode}")
        if self.profile.type is None:
            raise ConfigError("profile.type", f"required for mode {self.mode}")
        if self.eval.t is None:
            raise ConfigError("eval.t", f"required for mode {self.mode}")
        if self.eval.x_range is None:
            raise ConfigError("eval.x_range", f"required for mode {self.mode}")
        if self.mode != "simulate":
            try:
                ModelParams(Fraction(self.model.p), Fraction(self.model.q))
            except ASEPError as exc:
                raise ConfigError("model.p", str(exc)) from exc
            if self.profile.type == "deterministic" and len(self.profile.Y) < max(self.eval.l):
                raise ConfigError("profile.Y", "fewer sites than the largest particle index")

    def params(self) -> ModelParams:
        return ModelParams(Fraction(self.model.p), Fraction(self.model.q))


# -- mode runners --------------------------------------------------------------

def _requests(cfg: RunConfig):
    profile = cfg.profile.build()
    params = cfg.params()
    for l in cfg.eval.l:
        yield quadrature.EvalRequest(
            l=l, x=cfg.eval.x_range[0], t=float(Fraction(cfg.eval.t)), profile=profile,
            params=params, k_max=cfg.eval.k_max, tolerance=cfg.eval.tolerance,
            points=cfg.eval.points, radius=cfg.eval.radius)


def _sim_config(cfg: RunConfig) -> simulator.SimConfig:
    return simulator.SimConfig(
        p=float(Fraction(cfg.model.p)), t=float(Fraction(cfg.eval.t)),
        profile=cfg.profile.build(), trials=cfg.sim.trials, seed=cfg.sim.seed,
        l_max=max(cfg.eval.l), x_window=tuple(cfg.eval.x_range), L=cfg.sim.L)


def run_identities(cfg):
    reports = oracle.run_identity_suite(cfg.sim.seed, cfg.sim.trials, cfg.identities.k_max,
                                        cfg.identities.m_max, cfg.identities.n_max)
    rows = [asdict(r) for r in reports]
    for row in rows:
        row["trial"] = row["instance"]["trial"]
    return rows, all(r.equal for r in reports)


def run_cdf(cfg):
    rows = []
    for req in _requests(cfg):
        for res in quadrature.evaluate_cdf_window(req, cfg.eval.xs, cfg.eval.check_quadrature):
            rows.append(res.to_dict())
    return rows, True


def run_pmf(cfg):
    rows = []
    for req in _requests(cfg):
        for x, mass, res in quadrature.evaluate_pmf_window(req, cfg.eval.xs, cfg.eval.check_quadrature):
            rows.append({"l": req.l, "x": x, "pmf": mass, "cdf": res.value,
                         "converged": res.converged})
    return rows, True


def run_simulate(cfg):
    est = simulator.estimate_cdf(_sim_config(cfg))
    return list(est.rows()), True


@dataclass
class CompareRow:
    l: int
    x: int
    formula: float
    converged: bool
    p_hat: float
    stderr: float
    discrepancy: float
    passed: bool
    diagnostics: dict

    def to_dict(self):
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d


def compare_rows(cdf_results, empirical, abs_slack):
    """Pair formula values with empirical estimates; pass iff ``|delta| <= 3 stderr + abs_slack``."""
    rows = []
    for res in cdf_results:
        p_hat, se = empirical.lookup(res.l, res.x)
        delta = abs(res.value - float(p_hat))
        rows.append(CompareRow(res.l, res.x, res.value, res.converged, float(p_hat), float(se),
                               delta, bool(delta <= 3 * se + abs_slack), res.to_dict()))
    return rows


def run_compare(cfg):
    empirical = simulator.estimate_cdf(_sim_config(cfg))
    results = []
    for req in _requests(cfg):
        results.extend(quadrature.evaluate_cdf_window(req, cfg.eval.xs, cfg.eval.check_quadrature))
    rows = compare_rows(results, empirical, cfg.eval.abs_slack)
    return [r.to_dict() for r in rows], all(r.passed for r in rows)


RUNNERS = {"identities": run_identities, "cdf": run_cdf, "pmf": run_pmf,
           "simulate": run_simulate, "compare": run_compare}


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render(cfg: RunConfig, rows, ok: bool) -> str:
    if cfg.output.format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        cols = COLUMNS[cfg.mode]
        writer.writerow(cols)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in cols])
        return buf.getvalue()
    if cfg.mode == "identities":
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in rows)
    return json.dumps({"config": cfg.to_dict(), "ok": ok, "results": rows},
                      sort_keys=True, indent=1) + "\n"


def run(cfg: RunConfig) -> int:
    """Execute a parsed configuration and write its output; returns the exit code."""
    try:
        rows, ok = RUNNERS[cfg.mode](cfg)
    except ASEPError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    text = render(cfg, rows, ok)
    if cfg.output.path:
        with open(cfg.output.path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if not ok:
        log.warning("%s run reported failures", cfg.mode)
    return 0 if ok else 1


def _apply_threads():
    n = os.environ.get("PERIODIC_ASEP_THREADS")
    if not n:
        return
    import numba
    try:
        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))
    except ValueError:
        log.warning("ignoring PERIODIC_ASEP_THREADS=%r", n)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="periodic-asep",
        description="Exact and Monte Carlo distribution of x_l(t) for ASEP with periodic step Bernoulli data.")
    parser.add_argument("mode", nargs="?", choices=MODES, help="overrides the config's mode")
    parser.add_argument("--config", help="JSON run configuration")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--kmax", type=int)
    parser.add_argument("--trials", type=int)
    parser.add_argument("--out")
    parser.add_argument("--format", choices=FORMATS)
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def load_config(args) -> RunConfig:
    data = {}
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError("--config", str(exc)) from exc
        except json.JSONDecodeError as exc:
            raise ConfigError("--config", f"invalid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config", "expected a JSON object")
    if args.mode:
        data["mode"] = args.mode
    overrides = {("sim", "seed"): args.seed, ("sim", "trials"): args.trials,
                 ("eval", "k_max"): args.kmax, ("output", "path"): args.out,
                 ("output", "format"): args.format}
    for (section, key), value in overrides.items():
        if value is not None:
            data.setdefault(section, {})
            if not isinstance(data[section], dict):
                raise ConfigError(section, "expected an object")
            data[section][key] = value
    return RunConfig.from_dict(data)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    _apply_threads()
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
