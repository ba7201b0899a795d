"""Experiment orchestration and command-line front end.

One JSON config describes a full experiment: decay system, generator
exponents, Galerkin cutoff, force (explicit coefficients or manufactured
from target coefficients), solver horizon and verification requests.  The
pipeline is lattice -> coefficients -> simulate -> verify; all artifacts
(report.json, lattice/coefficient dumps, per-N remainder CSVs, the trace
CSV) land in the output directory, and runs are bit-reproducible for a
fixed config and seed.

Configs are versioned and validated fail-closed: unknown keys are errors,
so archived experiment files keep meaning exactly what they meant.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np

from .expansion import (
    Expansion,
    compute_coefficients,
    compute_coefficients_discrete,
    evaluate_expansion,
    normalize_force,
)
from .lattice import ExponentLattice, closure
from .solver import ForceSpec, SimulationTrace, energy_budget, integrate_nse
from .spectral import GevreyIndex, SpectralField, random_solenoidal_field
from .systems import DecaySystem, system_from_json
from .verify import fit_decay_order, manufacture_force, remainder_series

__all__ = ["ConfigError", "ExperimentConfig", "ExperimentResult",
           "run_experiment", "emit_report", "main"]

SCHEMA_VERSION = 1
COEFF_FLOOR = 1e-13  # below this (relative) a coefficient counts as zero


class ConfigError(ValueError):
    pass


_TOP_KEYS = {"schema", "system", "cutoff", "lattice_cutoff", "generators",
             "force", "solver", "verification", "seed"}
_SYSTEM_KEYS = {"kind", "params"}
_FORCE_KEYS = {"type", "terms"}
_TERM_KEYS = {"exponent", "field"}
_SOLVER_KEYS = {"t0", "t1", "tol", "sample_ratio", "step_growth", "u0"}
_VERIF_KEYS = {"orders", "gevrey", "window", "order_tolerance", "falsify"}
_FALSIFY_KEYS = {"n", "relative", "max_order_fraction"}
_FIELD_KEYS = {"modes", "random"}
_RANDOM_KEYS = {"amplitude", "radius", "order"}


def _reject_unknown(data: dict, allowed: set, where: str) -> None:
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {where}")


@dataclass(frozen=True)
class ExperimentConfig:
    raw: dict
    system: DecaySystem
    cutoff: int
    lattice_cutoff: float
    generators: list
    force_type: str
    force_terms: list          # [(exponent spec, field spec)]
    t0: float
    t1: float
    tol: float
    sample_ratio: float
    step_growth: float
    u0_spec: object
    orders: list[int]
    gevrey: list[GevreyIndex]
    window: tuple[float, float]
    order_tolerance: float
    falsify: Optional[dict]
    seed: int

    @classmethod
    def from_json(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        _reject_unknown(data, _TOP_KEYS, "config")
        if data.get("schema") != SCHEMA_VERSION:
            raise ConfigError(f"config schema must be {SCHEMA_VERSION}, "
                              f"got {data.get('schema')!r}")
        for key in ("system", "cutoff", "lattice_cutoff", "generators", "force", "solver"):
            if key not in data:
                raise ConfigError(f"config is missing required key {key!r}")
        _reject_unknown(data["system"], _SYSTEM_KEYS, "config.system")
        try:
            system = system_from_json(data["system"])
        except Exception as exc:
            raise ConfigError(f"config.system: {exc}") from exc
        cutoff = data["cutoff"]
        if not isinstance(cutoff, int) or not 1 <= cutoff <= 16:
            raise ConfigError("config.cutoff must be an integer in [1, 16]")
        lattice_cutoff = float(data["lattice_cutoff"])
        if lattice_cutoff <= 0:
            raise ConfigError("config.lattice_cutoff must be positive")
        if not isinstance(data["generators"], list) or not data["generators"]:
            raise ConfigError("config.generators must be a nonempty list")

        force = data["force"]
        _reject_unknown(force, _FORCE_KEYS, "config.force")
        ftype = force.get("type")
        if ftype not in ("explicit", "manufactured"):
            raise ConfigError("config.force.type must be 'explicit' or 'manufactured'")
        terms = force.get("terms")
        if not isinstance(terms, list) or not terms:
            raise ConfigError("config.force.terms must be a nonempty list")
        for i, term in enumerate(terms):
            _reject_unknown(term, _TERM_KEYS, f"config.force.terms[{i}]")
            if "exponent" not in term or "field" not in term:
                raise ConfigError(f"config.force.terms[{i}] needs 'exponent' and 'field'")
            fld = term["field"]
            if isinstance(fld, dict):
                _reject_unknown(fld, _FIELD_KEYS, f"config.force.terms[{i}].field")
                if "random" in fld:
                    _reject_unknown(fld["random"], _RANDOM_KEYS,
                                    f"config.force.terms[{i}].field.random")

        sol = data["solver"]
        _reject_unknown(sol, _SOLVER_KEYS, "config.solver")
        t0, t1 = float(sol["t0"]), float(sol["t1"])
        tol = float(sol.get("tol", 1e-8))
        if not (t1 > t0 and tol > 0):
            raise ConfigError("config.solver needs t1 > t0 and tol > 0")
        sample_ratio = float(sol.get("sample_ratio", 1.1))
        step_growth = float(sol.get("step_growth", 0.08))
        u0_spec = sol.get("u0", "expansion" if ftype == "manufactured" else "zero")

        verif = data.get("verification", {})
        _reject_unknown(verif, _VERIF_KEYS, "config.verification")
        orders = [int(n) for n in verif.get("orders", [])]
        if any(n < 0 for n in orders):
            raise ConfigError("config.verification.orders must be nonnegative")
        gevrey = [GevreyIndex(float(a), float(s)) for a, s in verif.get("gevrey", [[0.0, 0.0]])]
        window = verif.get("window")
        window = (t0, t1) if window is None else (float(window[0]), float(window[1]))
        order_tolerance = float(verif.get("order_tolerance", 0.1))
        falsify = verif.get("falsify")
        if falsify is not None:
            _reject_unknown(falsify, _FALSIFY_KEYS, "config.verification.falsify")
            if int(falsify.get("n", 0)) < 1:
                raise ConfigError("config.verification.falsify.n must be >= 1")
        seed = int(data.get("seed", 0))
        return cls(data, system, cutoff, lattice_cutoff, data["generators"], ftype,
                   [(t["exponent"], t["field"]) for t in terms],
                   t0, t1, tol, sample_ratio, step_growth, u0_spec,
                   orders, gevrey, window, order_tolerance, falsify, seed)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def _exponent_spec(sys: DecaySystem, spec):
    if isinstance(spec, dict):
        if set(spec) != {"pair"}:
            raise ConfigError(f"exponent spec {spec} not understood")
        (an, ad), (bn, bd) = spec["pair"]
        return sys.exponent((Fraction(an, ad), Fraction(bn, bd)))
    return sys.exponent(float(spec))


def _field_spec(spec, cutoff: int, rng: np.random.Generator) -> SpectralField:
    if isinstance(spec, dict) and "random" in spec:
        params = spec["random"]
        return random_solenoidal_field(
            cutoff, rng, amplitude=float(params.get("amplitude", 0.1)),
            radius=float(params.get("radius", 0.4)),
            order=float(params.get("order", 2.0)))
    if isinstance(spec, dict) and "modes" in spec:
        # config-supplied coefficients pass through the projection, so hand
        # written modes need not be exactly solenoidal
        modes = {}
        for m in spec["modes"]:
            k = tuple(int(x) for x in m["k"])
            modes[k] = np.array(m["re"], dtype=float) + 1j * np.array(m["im"], dtype=float)
        return SpectralField.from_modes(cutoff, modes)
    raise ConfigError(f"field spec {spec!r} not understood")


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    lattice: ExponentLattice
    coefficients: Expansion
    reference: Expansion      # expansion the remainders are measured against
    force: ForceSpec
    trace: SimulationTrace
    remainders: dict          # (N, label) -> list[(t, r)]
    checks: list[dict]

    @property
    def ok(self) -> bool:
        return all(c["pass"] for c in self.checks)

    def report_json(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "config": self.config.raw,
            "lattice_size": len(self.lattice),
            "pass": self.ok,
            "checks": self.checks,
        }


def _check(case, prop, expected, measured, passed) -> dict:
    return {"case": case, "property": prop,
            "expected": None if expected is None else float(expected),
            "measured": None if measured is None else float(measured),
            "pass": bool(passed)}


def _next_nonzero_exponent(exp: Expansion, N: int) -> Optional[float]:
    scale = max((f.l2() for f in exp.fields), default=0.0)
    for n in range(N + 1, len(exp) + 1):
        if exp.field(n).l2() > COEFF_FLOOR * scale:
            return exp.exponent(n).value
    return None


def run_experiment(cfg: ExperimentConfig, seed: Optional[int] = None) -> ExperimentResult:
    """Lattice -> coefficients -> simulate -> verify, no files written."""
    sys_ = cfg.system
    seed = cfg.seed if seed is None else seed
    rng = np.random.default_rng(seed)

    gens = [_exponent_spec(sys_, g) for g in cfg.generators]
    term_exps = [_exponent_spec(sys_, e) for e, _ in cfg.force_terms]
    lat = closure(sys_, gens + term_exps, cfg.lattice_cutoff)

    raw_terms = [(exp, _field_spec(fld, cfg.cutoff, rng))
                 for exp, (_, fld) in zip(term_exps, cfg.force_terms)]
    compute = compute_coefficients_discrete if sys_.discrete else compute_coefficients
    checks: list[dict] = []

    verifying = bool(cfg.orders) or cfg.falsify is not None
    if cfg.force_type == "manufactured":
        target = normalize_force(raw_terms, lat)
        n_terms = max(lat.index_of(e) for e, _ in raw_terms)
        force = manufacture_force(target, n_terms)
        coeffs = compute(force.expansion)
        reference = target
        if verifying:
            # the recursion must reproduce the targets from the force expansion
            worst = 0.0
            scale = max(f.l2() for f in target.fields)
            for n in range(1, len(lat) + 1):
                worst = max(worst, (coeffs.field(n) - target.field(n)).l2() / scale)
            checks.append(_check("manufactured", "round_trip_residual", 1e-10, worst,
                                 worst <= 1e-10))
    else:
        force_exp = normalize_force(raw_terms, lat)
        force = ForceSpec(force_exp)
        coeffs = compute(force_exp)
        reference = coeffs

    if cfg.u0_spec == "zero":
        u0 = SpectralField.zero(cfg.cutoff)
    elif cfg.u0_spec == "expansion":
        u0 = evaluate_expansion(reference, cfg.t0)
    else:
        u0 = _field_spec(cfg.u0_spec, cfg.cutoff, rng)

    trace = integrate_nse(u0, force, cfg.t0, cfg.t1, cfg.tol,
                          sample_ratio=cfg.sample_ratio, step_growth=cfg.step_growth,
                          norm_indices=cfg.gevrey)

    remainders: dict = {}
    for N in cfg.orders:
        for idx in cfg.gevrey:
            series = remainder_series(trace, reference, N, idx)
            remainders[(N, idx.label())] = series
            case = f"remainder[N={N},{idx.label()}]"
            expected = _next_nonzero_exponent(reference, N)
            solution_scale = max(trace.norms[idx]) if idx in trace.norms else max(trace.l2)
            noise = 100.0 * cfg.tol * solution_scale
            if expected is None or max(r for _, r in series) <= noise:
                # manufactured-exact case: remainder must sit at the noise floor
                worst = max(r for _, r in series)
                checks.append(_check(case, "noise_floor", noise, worst, worst <= noise))
                continue
            fit = fit_decay_order(series, sys_, cfg.window)
            floor = expected * (1.0 - cfg.order_tolerance)
            checks.append(_check(case, "fitted_order_at_least", floor, fit.slope,
                                 fit.slope >= floor))

    if cfg.falsify is not None:
        n = int(cfg.falsify["n"])
        rel = float(cfg.falsify.get("relative", 0.01))
        frac = float(cfg.falsify.get("max_order_fraction", 0.7))
        expected = _next_nonzero_exponent(reference, n)
        if expected is None:
            raise ConfigError(f"falsify: no nonzero coefficient beyond n = {n}")
        fields = list(reference.fields)
        fields[n - 1] = (1.0 + rel) * fields[n - 1]
        perturbed = Expansion(reference.lattice, tuple(fields), reference.gevrey)
        idx = cfg.gevrey[0]
        fit = fit_decay_order(remainder_series(trace, perturbed, n, idx), sys_, cfg.window)
        cap = frac * expected
        checks.append(_check(f"falsify[n={n}]", "perturbed_order_at_most",
                             cap, fit.slope, fit.slope <= cap))

    if verifying:
        primary = {"energy_identity": "max_rel_residual",
                   "apriori_energy_bound": "worst_margin",
                   "force_envelope_convolution": "worst_margin",
                   "advective_energy_orthogonality": "max_rel",
                   "dissipation_monotone": "worst_drop"}
        for item in energy_budget(trace).to_json():
            measured = item["measured"].get(primary.get(item["name"], ""), None)
            checks.append(_check("energy", item["name"],
                                 item["measured"].get("threshold"), measured, item["pass"]))

    return ExperimentResult(cfg, lat, coeffs, reference, force, trace, remainders, checks)


def emit_report(result: ExperimentResult, outdir) -> list[Path]:
    """Write report.json, dumps, remainder CSVs and the trace CSV."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def dump(name: str, payload) -> None:
        path = out / name
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        written.append(path)

    dump("report.json", result.report_json())
    dump("lattice.json", result.lattice.to_json())
    dump("coefficients.json", result.coefficients.to_json())
    for (N, label), series in result.remainders.items():
        path = out / f"remainder_N{N}_{label}.csv"
        with open(path, "w") as fh:
            fh.write("t,r\n")
            for t, r in series:
                fh.write(f"{t:.17g},{r:.17g}\n")
        written.append(path)
    trace_path = out / "trace.csv"
    result.trace.to_csv(trace_path)
    written.append(trace_path)
    dump("states.json", result.trace.states_json())
    return written


# ---------------------------------------------------------------------------
# command line
# ---------------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="nsasym",
        description="Decay-system expansions and Galerkin runs for the "
                    "forced incompressible equations on the torus")
    sub = p.add_subparsers(dest="command", required=True)
    for name, desc in (
        ("lattice", "build and print the exponent lattice"),
        ("coeffs", "compute and print the expansion coefficients"),
        ("simulate", "run the solver and write the trace"),
        ("verify", "full pipeline, report only"),
        ("run", "full pipeline with all artifacts"),
    ):
        q = sub.add_parser(name, help=desc)
        q.add_argument("--config", required=True, help="experiment config JSON")
        q.add_argument("--out", default=None, help="output directory")
        q.add_argument("--seed", type=int, default=None, help="override the config seed")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.load(args.config)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    if args.command == "lattice":
        sys_ = cfg.system
        gens = [_exponent_spec(sys_, g) for g in cfg.generators]
        gens += [_exponent_spec(sys_, e) for e, _ in cfg.force_terms]
        lat = closure(sys_, gens, cfg.lattice_cutoff)
        payload = lat.to_json()
        text = json.dumps(payload, indent=2, sort_keys=True)
        if args.out:
            Path(args.out).mkdir(parents=True, exist_ok=True)
            (Path(args.out) / "lattice.json").write_text(text + "\n")
        print(text)
        return 0

    result = run_experiment(cfg, seed=args.seed)
    if args.command == "coeffs":
        text = json.dumps(result.coefficients.to_json(), indent=2, sort_keys=True)
        if args.out:
            Path(args.out).mkdir(parents=True, exist_ok=True)
            (Path(args.out) / "coefficients.json").write_text(text + "\n")
        print(text)
        return 0
    if args.command == "simulate":
        outdir = Path(args.out or "out")
        outdir.mkdir(parents=True, exist_ok=True)
        result.trace.to_csv(outdir / "trace.csv")
        with open(outdir / "states.json", "w") as fh:
            json.dump(result.trace.states_json(), fh, indent=2, sort_keys=True)
        print(f"trace written to {outdir}")
        return 0

    if args.command == "run":
        emit_report(result, args.out or "out")
    else:  # verify
        outdir = Path(args.out or "out")
        outdir.mkdir(parents=True, exist_ok=True)
        with open(outdir / "report.json", "w") as fh:
            json.dump(result.report_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    for c in result.checks:
        status = "PASS" if c["pass"] else "FAIL"
        print(f"{status} {c['case']}: {c['property']} measured={c['measured']} "
              f"expected={c['expected']}")
    return 0 if result.ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
