"""LMI assembly and certificate constants for the boundary-observed semilinear
wave equation on the unit hypercube.

The matrices built here decide, for one set of problem parameters and decision
variables, whether the damped error dynamics are exponentially stable with rate
delta (stability LMIs), whether the system is exactly observable in time T*
(observability LMI), and what the derived constants alpha, beta, q, gamma and
the regional radius d0 are.  One margin parameter serves as the strictness
threshold for the strict LMIs and as slack for the non-strict ones.
"""

import json
import math
from dataclasses import dataclass, field, replace

from .smallmat import SymMatrix, eigenvalues

PI2 = math.pi * math.pi
DEFAULT_MARGIN = 1e-9
# the 1-D reduction has no lambda0; this value reproduces the sharp 1-D
# alpha = 1 - 2 chi to well past four decimals while keeping the 3x3 form
DEFAULT_LAMBDA0_1D = 1e-6


class CertificateError(ValueError):
    """Invalid parameters, missing variables, or a certificate that fails re-checking."""


def _wq(n):
    # Wirtinger constant 4 / (pi^2 n)
    return 4.0 / (PI2 * n)


def _scalar(name, v, positive=True, nonneg=False):
    v = float(v)
    if not math.isfinite(v):
        raise CertificateError("%s must be finite" % name)
    if positive and not v > 0:
        raise CertificateError("%s must be > 0, got %r" % (name, v))
    if nonneg and v < 0:
        raise CertificateError("%s must be >= 0, got %r" % (name, v))
    return v


@dataclass(frozen=True)
class ProblemParams:
    """Physical and tuning scalars defining one certification problem.

    n: spatial dimension; k: boundary injection gain; g1: Lipschitz bound on
    f_z; delta: decay rate (may be left unset for minimal-time searches, where
    it is the quantity being optimized); t_star: observability time; t_total:
    observation horizon; d: local Lipschitz radius for regional problems.
    """

    n: int
    k: float
    g1: float = 0.0
    delta: float = None
    t_star: float = None
    t_total: float = None
    d: float = None

    def __post_init__(self):
        n = self.n
        if isinstance(n, float):
            if not n.is_integer():
                raise CertificateError("n must be an integer >= 1")
            n = int(n)
        if not isinstance(n, int) or isinstance(n, bool) or n < 1:
            raise CertificateError("n must be an integer >= 1")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "k", _scalar("k", self.k))
        object.__setattr__(self, "g1", _scalar("g1", self.g1, positive=False, nonneg=True))
        if self.delta is not None:
            # delta = 0 is the marginal "no decay demanded" case; the decay
            # matrix is still well defined there, so only negatives are out.
            object.__setattr__(
                self, "delta", _scalar("delta", self.delta, positive=False, nonneg=True)
            )
        for name in ("t_star", "t_total", "d"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, _scalar(name, v))
        if self.t_total is not None and self.t_star is not None and self.t_total < self.t_star:
            raise CertificateError("t_total must be >= t_star")

    def to_dict(self):
        out = {"n": self.n, "k": self.k, "g1": self.g1}
        for name in ("delta", "t_star", "t_total", "d"):
            v = getattr(self, name)
            if v is not None:
                out[name] = v
        return out

    @classmethod
    def from_dict(cls, dct):
        allowed = {"n", "k", "g1", "delta", "t_star", "t_total", "d"}
        unknown = set(dct) - allowed
        if unknown:
            raise CertificateError("unknown problem keys: %s" % ", ".join(sorted(unknown)))
        if "n" not in dct or "k" not in dct:
            raise CertificateError("problem requires at least n and k")
        return cls(**dct)


@dataclass(frozen=True)
class DecisionVars:
    """S-procedure and Lyapunov multipliers witnessing LMI feasibility.

    chi weights the cross term of the Lyapunov function (chi = 0 collapses V
    to the plain energy, which some degenerate checks rely on); the lambdas
    are the multipliers of the three matrix inequalities; r and gamma only
    appear in the input-to-state-stability block.
    """

    chi: float
    lambda0: float = None
    lambda1: float = None
    lambda2: float = None
    r: float = None
    gamma: float = None

    def __post_init__(self):
        object.__setattr__(self, "chi", _scalar("chi", self.chi, positive=False, nonneg=True))
        for name in ("lambda0", "lambda1", "lambda2", "r", "gamma"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, _scalar(name, v))

    def to_dict(self):
        out = {"chi": self.chi}
        for name in ("lambda0", "lambda1", "lambda2", "r", "gamma"):
            v = getattr(self, name)
            if v is not None:
                out[name] = v
        return out

    @classmethod
    def from_dict(cls, dct):
        allowed = {"chi", "lambda0", "lambda1", "lambda2", "r", "gamma"}
        unknown = set(dct) - allowed
        if unknown:
            raise CertificateError("unknown variable keys: %s" % ", ".join(sorted(unknown)))
        if "chi" not in dct:
            raise CertificateError("variables require chi")
        return cls(**dct)


def _lambda0(params, vars):
    if vars.lambda0 is not None:
        return vars.lambda0
    if params.n == 1:
        return DEFAULT_LAMBDA0_1D
    raise CertificateError("lambda0 is required for n >= 2")


def _require(vars, *names):
    for name in names:
        if getattr(vars, name) is None:
            raise CertificateError("decision variable %s is required here" % name)


# ------------------------------------------------------------------ builders


def build_phi0(params, vars):
    """3x3 matrix whose positive definiteness bounds V between alpha E and beta E."""
    n, chi = params.n, vars.chi
    lam0 = _lambda0(params, vars)
    rn = math.sqrt(n)
    return SymMatrix(
        3,
        [
            0.5 - lam0 * _wq(n), rn * chi, 0.0,
            0.5, (n - 1) * chi / 2.0,
            lam0,
        ],
    )


def build_phi1(params, vars):
    """Phi0 shifted by diag(lambda0 4/(pi^2 n), 0, 0); its largest eigenvalue enters beta."""
    m = build_phi0(params, vars)
    lam0 = _lambda0(params, vars)
    ent = list(m.entries)
    ent[0] += lam0 * _wq(params.n)
    return SymMatrix(3, ent)


def build_psi1(params, vars):
    """Scalar boundary condition -k + (1 + k^2 n) chi; must be <= 0."""
    _require(vars, "chi")
    k, n = params.k, params.n
    return -k + (1.0 + k * k * n) * vars.chi


def build_psi2(params, vars):
    """3x3 decay matrix; negative semidefiniteness certifies rate delta."""
    _require(vars, "chi", "lambda1")
    if params.delta is None:
        raise CertificateError("delta is required to build the decay matrix")
    n, k, g1, delta = params.n, params.k, params.g1, params.delta
    chi, lam1 = vars.chi, vars.lambda1
    rn = math.sqrt(n)
    p = -chi + delta * (1.0 + chi * k * (n - 1)) + lam1 * _wq(n)
    return SymMatrix(
        3,
        [
            p, 2.0 * delta * rn * chi, rn * g1 * chi,
            -chi + delta, 0.5 * g1 + delta * (n - 1) * chi,
            -lam1 + g1 * (n - 1) * chi,
        ],
    )


def build_phi_obs(params, vars):
    """3x3 observability matrix at time t_star; negative definiteness certifies
    recoverability of the initial state."""
    _require(vars, "chi", "lambda2")
    if params.delta is None or params.t_star is None:
        raise CertificateError("delta and t_star are required to build the observability matrix")
    n, chi, lam2 = params.n, vars.chi, vars.lambda2
    es = math.exp(-2.0 * params.delta * params.t_star)
    a = 0.5 * (1.0 - es)
    rn = math.sqrt(n)
    return SymMatrix(
        3,
        [
            -a + lam2 * _wq(n), rn * (1.0 + es) * chi, 0.0,
            -a, 0.5 * (n - 1) * (1.0 + es) * chi,
            -lam2,
        ],
    )


# ------------------------------------------------------------------ checks


def _check_margin(margin):
    if not (margin >= 0.0) or not math.isfinite(margin):
        raise CertificateError("margin must be a finite scalar >= 0")
    return float(margin)


def check_stability(params, vars, margin=DEFAULT_MARGIN):
    """Feasibility report for the exponential-stability LMIs.

    phi0 must be positive definite beyond the margin (strict inequality);
    psi1 and psi2 are non-strict, so the same margin acts as slack.  The
    margins dict records the decisive eigenvalue of each matrix: lambda_min
    for phi0, the scalar itself for psi1, lambda_max for psi2.
    """
    margin = _check_margin(margin)
    _require(vars, "chi", "lambda1")
    lam_min_phi0 = eigenvalues(build_phi0(params, vars))[0]
    psi1 = build_psi1(params, vars)
    lam_max_psi2 = eigenvalues(build_psi2(params, vars))[-1]
    report = {
        "phi0_ok": lam_min_phi0 > margin,
        "psi1_ok": psi1 <= margin,
        "psi2_ok": lam_max_psi2 <= margin,
        "margins": {"phi0": lam_min_phi0, "psi1": psi1, "psi2": lam_max_psi2},
    }
    report["feasible"] = report["phi0_ok"] and report["psi1_ok"] and report["psi2_ok"]
    return report


def check_observability(params, vars, margin=DEFAULT_MARGIN):
    """Stability report extended with the strict observability LMI at t_star."""
    report = check_stability(params, vars, margin)
    lam_max_phi = eigenvalues(build_phi_obs(params, vars))[-1]
    report["phi_obs_ok"] = lam_max_phi < -margin
    report["margins"]["phi_obs"] = lam_max_phi
    report["feasible"] = report["feasible"] and report["phi_obs_ok"]
    return report


def compute_alpha_beta(params, vars, sharp=None):
    """Energy envelope constants with alpha E <= V <= beta E.

    General n uses the eigenvalues of phi0/phi1.  For n = 1 the default mode
    returns the sharp pair (1 - 2 chi, 1 + 2 chi) of the one-dimensional
    reduction; pass sharp=False to force the general formula.
    """
    if sharp is None:
        sharp = params.n == 1
    phi0 = build_phi0(params, vars)
    lam_phi0 = eigenvalues(phi0)
    if not lam_phi0[0] > 0.0:
        raise CertificateError("phi0 is not positive definite; alpha would not be positive")
    if sharp:
        if params.n != 1:
            raise CertificateError("the sharp alpha/beta pair is defined only for n = 1")
        chi = vars.chi
        return 1.0 - 2.0 * chi, 1.0 + 2.0 * chi
    n, k, chi = params.n, params.k, vars.chi
    alpha = 2.0 * lam_phi0[0]
    lam_phi1 = eigenvalues(build_phi1(params, vars))
    beta = 2.0 * (1.0 + 2.0 / (PI2 * n)) * lam_phi1[-1] + chi * k * (n - 1)
    return alpha, beta


def _golden_min(f, lo, hi, tol=1e-12, iters=200):
    # golden-section minimization; f need only be unimodal on [lo, hi]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if b - a < tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def compute_iss_gain(params, vars, margin=DEFAULT_MARGIN):
    """Smallest reportable input-to-state gain (r, gamma) for boundary perturbations.

    Requires psi1 < 0 strictly and psi2 negative definite with the margin.
    gamma is the Schur-complement infimum of the 2x2 perturbation block plus
    the margin; r is chosen to minimize that infimum subject to the rank-one
    perturbation of psi2 staying negative definite.  For n = 1 every r-term
    vanishes and the closed form is returned (r is reported as 0).
    """
    margin = _check_margin(margin)
    _require(vars, "chi", "lambda1")
    n, k, chi = params.n, params.k, vars.chi
    psi1 = build_psi1(params, vars)
    if not psi1 < 0.0:
        raise CertificateError("psi1 must be strictly negative for the ISS gain")
    psi2 = build_psi2(params, vars)
    if not eigenvalues(psi2)[-1] < -margin:
        raise CertificateError("psi2 must be strictly negative definite for the ISS gain")
    b = chi * (0.5 + k * k * n)
    if n == 1:
        gamma = chi * k * k + b * b / (-psi1) + margin
        return 0.0, gamma

    def gamma_inf(r):
        return chi * k * k * n + chi * (n - 1) * r / 2.0 + b * b / (-psi1)

    def block1_top(r):
        ent = list(psi2.entries)
        ent[0] += chi * (n - 1) / (2.0 * r)
        return eigenvalues(SymMatrix(3, ent))[-1]

    def objective(u):
        r = 10.0 ** u
        violation = block1_top(r) + margin
        pen = 1e6 * violation if violation > 0.0 else 0.0
        return gamma_inf(r) + pen

    u = _golden_min(objective, -6.0, 6.0)
    r = 10.0 ** u
    if block1_top(r) + margin > 0.0:
        # walk right until the rank-one perturbation is absorbed
        while r < 1e6 and block1_top(r) + margin > 0.0:
            r *= 2.0
        if block1_top(r) + margin > 0.0:
            raise CertificateError("no r <= 1e6 absorbs the perturbation of psi2")
    gamma = gamma_inf(r) + margin
    return r, gamma


@dataclass(frozen=True)
class RegionalRadius:
    """Regional observability radius d0 with the horizon t_max up to which the
    decay term (rather than the nonlinear growth term) is the binding one.
    Iterates as the pair (d0, t_max); the binding term is an attribute."""

    d0: float
    t_max: float
    binding: str

    def __iter__(self):
        return iter((self.d0, self.t_max))


def compute_regional_radius(params, vars):
    """Radius d0 of the initial-data ball on which recovery is certified (n = 1).

    d0 = (d/2) min{exp(-(g1/pi) T), sqrt((1-2chi)/(1+2chi)) exp(-delta t_star)}
    evaluated at T = t_total when set, else T = t_star.  t_max solves the
    equality of the two terms; it is infinite when g1 = 0.
    """
    if params.n != 1:
        raise CertificateError("the regional radius is only defined for n = 1")
    if params.t_star is None or params.d is None or params.delta is None:
        raise CertificateError("regional radius requires delta, t_star and d")
    chi = vars.chi
    if chi >= 0.5:
        raise CertificateError("chi must be < 1/2 (alpha = 1 - 2 chi must stay positive)")
    decay = math.sqrt((1.0 - 2.0 * chi) / (1.0 + 2.0 * chi)) * math.exp(
        -params.delta * params.t_star
    )
    horizon = params.t_total if params.t_total is not None else params.t_star
    growth = math.exp(-(params.g1 / math.pi) * horizon)
    d0 = 0.5 * params.d * min(growth, decay)
    binding = "growth" if growth < decay else "decay"
    if params.g1 == 0.0:
        t_max = math.inf
    else:
        t_max = -(math.pi / params.g1) * math.log(decay)
    return RegionalRadius(d0, t_max, binding)


# ------------------------------------------------------------------ certificates


@dataclass(frozen=True)
class Certificate:
    """A verified feasibility record plus the derived constants."""

    params: ProblemParams
    vars: DecisionVars
    alpha: float
    beta: float
    q: float = None
    d0: float = None
    margins: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "alpha", _scalar("alpha", self.alpha))
        object.__setattr__(self, "beta", _scalar("beta", self.beta))
        if self.alpha > self.beta:
            raise CertificateError("alpha must not exceed beta")
        if self.q is not None:
            q = _scalar("q", self.q)
            if q > 1.0:
                raise CertificateError("q must lie in (0, 1]")
            object.__setattr__(self, "q", q)
        if self.d0 is not None:
            object.__setattr__(self, "d0", _scalar("d0", self.d0))
        object.__setattr__(self, "margins", dict(self.margins))


def make_certificate(params, vars, margin=DEFAULT_MARGIN, require_feasible=True):
    """Assemble a certificate: run the checks, then derive alpha, beta, q, d0.

    With require_feasible (the default) an infeasible point raises; pass
    False to still collect margins and constants for a point that is being
    inspected rather than certified.
    """
    vars = replace(vars, lambda0=_lambda0(params, vars))
    if params.t_star is not None and vars.lambda2 is not None:
        report = check_observability(params, vars, margin)
    else:
        report = check_stability(params, vars, margin)
    if require_feasible and not report["feasible"]:
        failing = [name for name in ("phi0", "psi1", "psi2", "phi_obs")
                   if not report.get(name + "_ok", True)]
        raise CertificateError("LMIs infeasible at this point: %s" % ", ".join(failing))
    alpha, beta = compute_alpha_beta(params, vars)
    q = None
    if params.t_total is not None and params.t_star is not None and params.delta is not None:
        q = math.exp(-4.0 * params.delta * (params.t_total - params.t_star))
    d0 = None
    if (params.n == 1 and params.d is not None and params.t_star is not None
            and params.delta is not None and vars.chi < 0.5):
        d0 = compute_regional_radius(params, vars).d0
    return Certificate(params, vars, alpha, beta, q, d0, report["margins"])


def certificate_to_dict(cert):
    out = {"params": cert.params.to_dict(), "vars": cert.vars.to_dict(),
           "alpha": cert.alpha, "beta": cert.beta}
    if cert.q is not None:
        out["q"] = cert.q
    if cert.d0 is not None:
        out["d0"] = cert.d0
    margins = {}
    for name in ("phi0", "psi1", "psi2", "phi_obs"):
        if name in cert.margins:
            margins[name] = cert.margins[name]
    out["margins"] = margins
    return out


def certificate_from_dict(dct):
    allowed = {"params", "vars", "alpha", "beta", "q", "d0", "margins"}
    unknown = set(dct) - allowed
    if unknown:
        raise CertificateError("unknown certificate keys: %s" % ", ".join(sorted(unknown)))
    for key in ("params", "vars", "alpha", "beta"):
        if key not in dct:
            raise CertificateError("certificate missing %s" % key)
    margins = dct.get("margins", {})
    bad = set(margins) - {"phi0", "psi1", "psi2", "phi_obs"}
    if bad:
        raise CertificateError("unknown margin keys: %s" % ", ".join(sorted(bad)))
    return Certificate(
        ProblemParams.from_dict(dct["params"]),
        DecisionVars.from_dict(dct["vars"]),
        dct["alpha"],
        dct["beta"],
        dct.get("q"),
        dct.get("d0"),
        {k: float(v) for k, v in margins.items()},
    )


# ------------------------------------------------------------------ text emission

# every float the toolkit writes (JSON and CSV alike) goes through this so
# that outputs are lossless on round-trip and byte-stable across runs


def fmt_float(x):
    return "%.17g" % float(x)


def _emit(obj, pieces):
    if obj is None:
        pieces.append("null")
    elif obj is True:
        pieces.append("true")
    elif obj is False:
        pieces.append("false")
    elif isinstance(obj, float):
        pieces.append(fmt_float(obj))
    elif isinstance(obj, int):
        pieces.append(str(obj))
    elif isinstance(obj, str):
        pieces.append(json.dumps(obj))
    elif isinstance(obj, dict):
        pieces.append("{")
        for i, (key, val) in enumerate(obj.items()):
            if i:
                pieces.append(", ")
            pieces.append(json.dumps(str(key)))
            pieces.append(": ")
            _emit(val, pieces)
        pieces.append("}")
    elif isinstance(obj, (list, tuple)):
        pieces.append("[")
        for i, val in enumerate(obj):
            if i:
                pieces.append(", ")
            _emit(val, pieces)
        pieces.append("]")
    else:
        raise TypeError("cannot serialize %r" % type(obj))
    return pieces


def json_dumps(obj):
    """JSON text with every float printed to 17 significant digits."""
    return "".join(_emit(obj, []))
