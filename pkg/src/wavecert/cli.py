"""Batch command line front end.

Subcommands: certify, min-time, regional, simulate, recover, sweep.  Each
takes a JSON config file; outputs are JSON on stdout plus optional CSV/JSON
files.  All floats are printed with 17 significant digits so emitted
documents round-trip losslessly, and every code path is deterministic:
identical inputs give byte-identical outputs (--jobs only changes wall time).

Exit codes: 0 success/feasible, 2 infeasible or not converged (a valid
negative result), 1 error (bad config, missing file, numeric blow-up).
"""

import argparse
import json
import math
import sys
from dataclasses import replace

import numpy as np

from . import pde
from .certificates import (DEFAULT_LAMBDA0_1D, DEFAULT_MARGIN,
                           CertificateError, DecisionVars, ProblemParams,
                           certificate_from_dict, certificate_to_dict,
                           check_observability, check_stability,
                           compute_regional_radius, json_dumps,
                           make_certificate)
from .observer import RecoveryConfig, recover, run_to_json
from .search import (Infeasible, SearchConfig, find_feasible_vars,
                     maximize_regional_radius, minimal_observability_time,
                     sweep)

MODES = ("certify", "min-time", "regional", "simulate", "recover", "sweep")

CONFIG_KEYS = {"mode", "problem", "problems", "search", "sim", "seed",
               "certificate"}
SIM_KEYS = {"dim", "points_per_axis", "horizon", "cfl", "mode", "k", "chi",
            "nonlinearity", "initial", "convergence_threshold"}
NONLINEARITY_FORMS = ("linear", "quadratic", "sine")
IC_KINDS = ("preset", "polynomial", "fourier-sine")
PRESETS = ("paper-example2",)


class CliError(Exception):
    """Bad input or environment; reported on stderr with exit code 1."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors, which this tool reserves
    # for valid negative results; route usage problems to exit code 1 instead
    def error(self, message):
        raise CliError("%s: %s" % (self.prog, message))


# ------------------------------------------------------------- config loading


def _read_text(path):
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise CliError(str(exc))


def _load_json(path):
    text = _read_text(path)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError("%s:%d:%d: %s" % (path, exc.lineno, exc.colno, exc.msg))


def _check_keys(section, dct, allowed):
    if not isinstance(dct, dict):
        raise CliError("%s must be a JSON object" % section)
    unknown = set(dct) - allowed
    if unknown:
        raise CliError("unknown %s key(s): %s"
                       % (section, ", ".join(sorted(unknown))))


def load_config(path, mode):
    doc = _load_json(path)
    _check_keys("config", doc, CONFIG_KEYS)
    if "mode" in doc and doc["mode"] != mode:
        raise CliError("config mode %r does not match subcommand %r"
                       % (doc["mode"], mode))
    seed = doc.get("seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int)):
        raise CliError("seed must be an integer")
    return doc


def parse_problem(doc, required=True):
    problem = doc.get("problem")
    if problem is None:
        if required:
            raise CliError("this mode requires a problem section")
        return None
    if not isinstance(problem, dict):
        raise CliError("problem must be a JSON object")
    return ProblemParams.from_dict(problem)


def parse_search(doc):
    section = doc.get("search")
    if section is None:
        return SearchConfig()
    if not isinstance(section, dict):
        raise CliError("search must be a JSON object")
    return SearchConfig.from_dict(section)


def parse_sim(doc, require_initial=False):
    sim = doc.get("sim")
    if sim is None:
        raise CliError("this mode requires a sim section")
    _check_keys("sim", sim, SIM_KEYS)
    for key in ("points_per_axis", "horizon"):
        if key not in sim:
            raise CliError("sim requires %s" % key)
    if require_initial and "initial" not in sim:
        raise CliError("sim requires an initial section here")
    return sim


def build_grid(sim, mode=None):
    if mode is None:
        mode = sim.get("mode", "plant")
    try:
        return pde.make_grid(sim.get("dim", 1), sim["points_per_axis"],
                             sim["horizon"], mode=mode, k=sim.get("k", 0.0),
                             cfl=sim.get("cfl"))
    except ValueError as exc:
        raise CliError("sim: %s" % exc)


def build_nonlinearity(spec):
    """Nonlinearity from {"form", "coeff", "fz_bound", "local_radius"}.

    fz_bound defaults to |coeff| for the globally Lipschitz forms (linear,
    sine) and must be supplied explicitly for quadratic, whose slope bound
    holds only on |z| <= local_radius.
    """
    if spec is None:
        return pde.ZERO_F
    _check_keys("nonlinearity", spec, {"form", "coeff", "fz_bound",
                                       "local_radius"})
    form = spec.get("form")
    if form not in NONLINEARITY_FORMS:
        raise CliError("nonlinearity form must be one of: %s"
                       % ", ".join(NONLINEARITY_FORMS))
    coeff = spec.get("coeff", 1.0)
    if isinstance(coeff, bool) or not isinstance(coeff, (int, float)):
        raise CliError("nonlinearity coeff must be a number")
    coeff = float(coeff)
    if form == "linear":
        f = lambda z, x, t: coeff * z
        default_bound = abs(coeff)
    elif form == "quadratic":
        f = lambda z, x, t: coeff * z * z
        default_bound = 0.0
    else:
        f = lambda z, x, t: coeff * np.sin(z)
        default_bound = abs(coeff)
    radius = spec.get("local_radius")
    try:
        return pde.Nonlinearity(f, fz_bound=float(spec.get("fz_bound",
                                                           default_bound)),
                                local_radius=math.inf if radius is None
                                else float(radius))
    except (TypeError, ValueError) as exc:
        raise CliError("nonlinearity: %s" % exc)


def _fourier_sum(coeffs, grid):
    # coefficient j (1-based) weights the Dirichlet-compliant mode
    # sin((j - 1/2) pi x); 2-D takes a matrix over mode products
    a = np.asarray(coeffs, dtype=float)
    if grid.dim == 1:
        if a.ndim != 1:
            raise CliError("fourier-sine coefficients must be a flat list")
        x = grid.axis()
        out = np.zeros_like(x)
        for j in range(a.size):
            out += a[j] * np.sin((j + 0.5) * math.pi * x)
        return out
    if a.ndim != 2:
        raise CliError("fourier-sine coefficients must be a matrix for dim 2")
    x1, x2 = grid.coords()
    out = np.zeros_like(x1)
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            out += (a[i, j] * np.sin((i + 0.5) * math.pi * x1)
                    * np.sin((j + 0.5) * math.pi * x2))
    return out


def build_initial(spec, grid):
    _check_keys("initial", spec, set(IC_KINDS))
    given = [kind for kind in IC_KINDS if kind in spec]
    if len(given) != 1:
        raise CliError("initial requires exactly one of: %s"
                       % ", ".join(IC_KINDS))
    kind = given[0]
    try:
        if kind == "preset":
            name = spec["preset"]
            if name not in PRESETS:
                raise CliError("unknown preset %r (known: %s)"
                               % (name, ", ".join(PRESETS)))
            if grid.dim != 1:
                raise CliError("preset %s is one-dimensional" % name)
            x = grid.axis()
            z = 0.2733 * x * (1 - x / 2)
            return pde.WaveField(z, z.copy())
        sub = spec[kind]
        _check_keys(kind, sub, {"z", "zt"})
        if "z" not in sub:
            raise CliError("%s requires z coefficients" % kind)
        if kind == "polynomial":
            if grid.dim != 1:
                raise CliError("polynomial initial data is one-dimensional")
            x = grid.axis()
            z = np.polynomial.polynomial.polyval(x, np.asarray(sub["z"],
                                                               dtype=float))
            zt = (np.polynomial.polynomial.polyval(
                x, np.asarray(sub["zt"], dtype=float))
                if "zt" in sub else np.zeros_like(x))
            return pde.WaveField(z, zt)
        z = _fourier_sum(sub["z"], grid)
        zt = (_fourier_sum(sub["zt"], grid) if "zt" in sub
              else np.zeros_like(z))
        return pde.WaveField(z, zt)
    except ValueError as exc:
        raise CliError("initial: %s" % exc)


def _write(path, text):
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise CliError(str(exc))


# ----------------------------------------------------------------- subcommands


def _load_vars(path):
    """(params or None, vars) from a vars file.

    Accepts a bare decision-variables object, a full certificate document,
    or min-time stdout (certificate under a "certificate" key); a document
    carrying params re-verifies with them.
    """
    doc = _load_json(path)
    if not isinstance(doc, dict):
        raise CliError("vars file must hold a JSON object")
    if "certificate" in doc:
        doc = doc["certificate"]
        if not isinstance(doc, dict):
            raise CliError("certificate entry must be a JSON object")
    if "vars" in doc:
        cert = certificate_from_dict(doc)
        return cert.params, cert.vars
    return None, DecisionVars.from_dict(doc)


def cmd_certify(args):
    doc = load_config(args.config, "certify")
    params = parse_problem(doc)
    vars = None
    if args.vars is not None:
        cert_params, vars = _load_vars(args.vars)
        if cert_params is not None:
            same = (cert_params.n == params.n and cert_params.k == params.k
                    and cert_params.g1 == params.g1)
            if not same:
                raise CliError("vars file was certified for a different "
                               "problem (n, k, g1 disagree with the config)")
            # the document's params carry the searched delta and t_star
            params = cert_params
    if vars is None:
        vars = find_feasible_vars(params, parse_search(doc))
    if vars.lambda0 is None and params.n == 1:
        vars = replace(vars, lambda0=DEFAULT_LAMBDA0_1D)
    observability = params.t_star is not None and vars.lambda2 is not None
    check = check_observability if observability else check_stability
    report = check(params, vars, args.margin)
    out = {"feasible": report["feasible"], "params": params.to_dict(),
           "vars": vars.to_dict()}
    if report["feasible"]:
        cert = make_certificate(params, vars, margin=args.margin)
        out["alpha"] = cert.alpha
        out["beta"] = cert.beta
        if cert.q is not None:
            out["q"] = cert.q
        if cert.d0 is not None:
            out["d0"] = cert.d0
        out["margins"] = report["margins"]
        print(json_dumps(out))
        return 0
    names = ("phi0", "psi1", "psi2", "phi_obs")
    out["failing"] = [n for n in names if not report.get(n + "_ok", True)]
    out["margins"] = report["margins"]
    print(json_dumps(out))
    return 2


def cmd_min_time(args):
    doc = load_config(args.config, "min-time")
    params = parse_problem(doc)
    if params.t_star is not None:
        raise CliError("min-time searches t_star; drop it from the problem")
    config = parse_search(doc)
    if args.tol is not None:
        if not args.tol > 0:
            raise CliError("--tol must be > 0")
        config = replace(config, tstar_tol=args.tol)
    t_star, delta, cert = minimal_observability_time(params, config)
    payload = {"feasible": True, "t_star": t_star, "delta": delta,
               "certificate": certificate_to_dict(cert)}
    print(json_dumps(payload))
    if args.out is not None:
        _write(args.out, json_dumps(certificate_to_dict(cert)) + "\n")
    return 0


def cmd_regional(args):
    doc = load_config(args.config, "regional")
    params = parse_problem(doc)
    d0, cert = maximize_regional_radius(params, parse_search(doc))
    radius = compute_regional_radius(cert.params, cert.vars)
    payload = {"feasible": True, "d0": d0}
    if math.isfinite(radius.t_max):
        payload["t_max"] = radius.t_max
    payload["binding"] = radius.binding
    payload["certificate"] = certificate_to_dict(cert)
    print(json_dumps(payload))
    if args.out is not None:
        _write(args.out, json_dumps(certificate_to_dict(cert)) + "\n")
    return 0


def cmd_simulate(args):
    doc = load_config(args.config, "simulate")
    sim = parse_sim(doc, require_initial=True)
    grid = build_grid(sim)
    nonlinearity = build_nonlinearity(sim.get("nonlinearity"))
    field = build_initial(sim["initial"], grid)
    horizon = float(sim["horizon"])
    chi = sim.get("chi")
    trace_in = None
    if grid.mode != "plant":
        # no measurement source on the command line: observer modes run the
        # autonomous damped (or anti-damped) dynamics against a zero trace
        steps = int(round(horizon / grid.dt))
        shape = (steps + 1,) if grid.dim == 1 else (
            steps + 1, pde.boundary_node_count(grid))
        trace_in = pde.BoundaryTrace(np.zeros(shape), grid.dt)
    final, trace, series = pde.run(field, horizon, grid, nonlinearity,
                                   trace_in=trace_in, chi=chi)
    if chi is None:
        energies, lyap = series, None
    else:
        energies, lyap = series
    _write(args.out, pde.trajectory_csv(trace, energies, lyap))
    print(json_dumps({"steps": trace.steps, "dt": trace.dt,
                      "energy_initial": float(energies[0]),
                      "energy_final": float(energies[-1])}))
    return 0


def cmd_recover(args):
    doc = load_config(args.config, "recover")
    sim = parse_sim(doc)
    if args.iterations < 1:
        raise CliError("--iterations must be >= 1")
    try:
        trace, _, _ = pde.read_trajectory_csv(_read_text(args.trace))
    except ValueError as exc:
        raise CliError("%s: %s" % (args.trace, exc))
    grid = build_grid(sim, mode="plant")
    certificate = None
    if "certificate" in doc:
        certificate = certificate_from_dict(doc["certificate"])
    try:
        config = RecoveryConfig(
            k=sim.get("k", 0.0), horizon=sim["horizon"],
            m_max=args.iterations, grid=grid,
            nonlinearity=build_nonlinearity(sim.get("nonlinearity")),
            convergence_threshold=sim.get("convergence_threshold", 1e-3),
            certificate=certificate)
        run = recover(trace, config)
    except ValueError as exc:
        raise CliError(str(exc))
    text = run_to_json(run)
    _write(args.out, text + "\n")
    print(text)
    if run.converged:
        return 0
    why = "diverged" if run.diverged else "not converged"
    print("recover: %s after %d iterations" % (why, len(run.records)),
          file=sys.stderr)
    return 2


def cmd_sweep(args):
    doc = load_config(args.config, "sweep")
    if args.jobs < 1:
        raise CliError("--jobs must be >= 1")
    if "problems" in doc and "problem" in doc:
        raise CliError("give either problem or problems, not both")
    if "problems" in doc:
        rows = doc["problems"]
        if not isinstance(rows, list) or not rows:
            raise CliError("problems must be a nonempty list")
        problems = [ProblemParams.from_dict(row) for row in rows]
    else:
        problems = [parse_problem(doc)]
    result = sweep(problems, parse_search(doc), worker_count=args.jobs)
    _write(args.out, result.to_csv())
    feasible = sum(1 for row in result.rows if row.feasible)
    print(json_dumps({"rows": len(result.rows), "feasible_rows": feasible}))
    return 0 if feasible else 2


# ----------------------------------------------------------------------- main


def build_parser():
    parser = _Parser(prog="wavecert",
                     description="LMI certification and observer-based "
                                 "recovery for boundary-observed wave "
                                 "equations")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("certify",
                       help="check the LMIs at a given decision point")
    p.add_argument("--config", required=True,
                   help="JSON config with a problem section")
    p.add_argument("--vars",
                   help="JSON decision variables or certificate document; "
                        "omit to search for a feasible point")
    p.add_argument("--margin", type=float, default=DEFAULT_MARGIN,
                   help="feasibility slack on every LMI eigenvalue")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("min-time",
                       help="minimal certified observation time")
    p.add_argument("--config", required=True)
    p.add_argument("--tol", type=float,
                   help="absolute tolerance on t_star")
    p.add_argument("--out", help="write the certificate JSON here")
    p.set_defaults(func=cmd_min_time)

    p = sub.add_parser("regional",
                       help="largest certified regional radius d0")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="write the certificate JSON here")
    p.set_defaults(func=cmd_regional)

    p = sub.add_parser("simulate",
                       help="integrate one run and write the trajectory CSV")
    p.add_argument("--config", required=True,
                   help="JSON config with a sim section")
    p.add_argument("--out", required=True, help="trajectory CSV path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("recover",
                       help="iterative initial-state recovery from a trace")
    p.add_argument("--config", required=True)
    p.add_argument("--trace", required=True,
                   help="trajectory CSV holding the measured trace")
    p.add_argument("--iterations", type=int, required=True,
                   help="iteration budget m_max")
    p.add_argument("--out", required=True, help="recovery report JSON path")
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("sweep", help="batch feasibility/min-time over rows")
    p.add_argument("--config", required=True,
                   help="JSON config with a problems list")
    p.add_argument("--jobs", type=int, default=1,
                   help="worker processes (results never depend on this)")
    p.add_argument("--out", required=True, help="result CSV path")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except CliError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1
    except Infeasible as exc:
        print(json_dumps({"feasible": False, "reason": str(exc)}))
        return 2
    except (ValueError, RuntimeError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
