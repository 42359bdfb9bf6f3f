"""Dirichlet forms, Poincare and log-Sobolev constants, and mixing times."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize

from .chains import GLAUBER, JS, ChainSpec, TransitionKernel, transition_kernel
from .graph import bits, popcount
from .model import (DEFAULT_CAP, ExactDistribution, MonomerDimerModel, Pinning,
                    enumerate_matchings, feasible_pinnings, format_fraction)

EIG_TOL = 1e-9


class SpectralError(ValueError):
    pass


@dataclass(frozen=True)
class QuadraticForm:
    """Symmetric matrix with value f -> f^T A f."""

    matrix: np.ndarray
    label: str
    exact: dict | None = field(default=None, repr=False, compare=False)

    def value(self, f) -> float:
        f = np.asarray(f, dtype=float)
        return float(f @ self.matrix @ f)

    def exact_value(self, f) -> Fraction:
        if self.exact is None:
            raise SpectralError("no exact matrix attached")
        f = [Fraction(v) for v in f]
        total = Fraction(0)
        for (i, j), a in self.exact.items():
            total += a * f[i] * f[j]
        return total


def dirichlet_matrix(kernel: TransitionKernel) -> QuadraticForm:
    """A = diag(mu)(I - Q), symmetric for reversible kernels."""
    if not kernel.is_reversible():
        raise SpectralError("kernel is not reversible")
    mu = kernel.states.probabilities
    exact: dict = {}
    for i, row in enumerate(kernel.rows):
        out = Fraction(0)
        for j, q in row.items():
            if i != j and q:
                exact[(i, j)] = -mu[i] * q
                out += q
        if out:
            exact[(i, i)] = mu[i] * out
    n = len(kernel.rows)
    A = np.zeros((n, n))
    for (i, j), a in exact.items():
        A[i, j] = float(a)
    A = 0.5 * (A + A.T)
    return QuadraticForm(A, "dirichlet", exact)


def dirichlet_value(kernel: TransitionKernel, f) -> Fraction:
    """The Dirichlet form straight from its definition, in exact arithmetic."""
    mu = kernel.states.probabilities
    f = [Fraction(v) for v in f]
    total = Fraction(0)
    for i, row in enumerate(kernel.rows):
        for j, q in row.items():
            total += mu[i] * q * (f[i] - f[j]) ** 2
    return total / 2


def variance_form(dist: ExactDistribution) -> QuadraticForm:
    p = dist.probs
    return QuadraticForm(np.diag(p) - np.outer(p, p), "variance")


def _edge_split(dist: ExactDistribution, e: int):
    occ = dist.occupancy(e).astype(bool)
    p = dist.probs
    p1 = float(p[occ].sum())
    return occ, p, 1.0 - p1, p1


def local_variance_form(model: MonomerDimerModel, pinning: Pinning | None = None,
                        dist: ExactDistribution | None = None) -> QuadraticForm:
    """B with f^T B f = sum over free e of Var(E[F | X_e])."""
    pinning = pinning if pinning is not None else Pinning.empty(model.graph)
    dist = dist or enumerate_matchings(model, pinning)
    n = len(dist)
    B = np.zeros((n, n))
    for e in bits(pinning.free):
        occ, p, p0, p1 = _edge_split(dist, e)
        if p0 <= 0 or p1 <= 0:
            continue
        a = np.where(occ, -p / p1, p / p0)
        B += p0 * p1 * np.outer(a, a)
    return QuadraticForm(B, "local_variance_sum")


def _sym_transition(kernel: TransitionKernel) -> tuple[np.ndarray, np.ndarray]:
    P = kernel.dense()
    mu = kernel.states.probs
    s = np.sqrt(mu)
    S = (s[:, None] * P) / s[None, :]
    return 0.5 * (S + S.T), mu


def poincare_constant(kernel: TransitionKernel) -> float:
    """Spectral gap of the reversible kernel."""
    n = len(kernel)
    if n < 2:
        raise SpectralError("spectral gap undefined on a single state")
    if not kernel.is_reversible():
        raise SpectralError("kernel is not reversible")
    if not kernel.is_irreducible():
        raise SpectralError("kernel is reducible")
    S, _ = _sym_transition(kernel)
    ev = np.linalg.eigvalsh(np.eye(n) - S)
    return float(ev[1])


def _complement_basis(n: int) -> np.ndarray:
    # orthonormal basis of the vectors orthogonal to the constants
    q, _ = np.linalg.qr(np.column_stack([np.ones(n), np.eye(n)[:, : n - 1]]))
    return q[:, 1:]


def generalized_max_ratio(num: np.ndarray, den: np.ndarray) -> float:
    """max over nonconstant f of (f^T num f) / (f^T den f), den positive on 1-perp."""
    n = num.shape[0]
    if n < 2:
        return 0.0
    U = _complement_basis(n)
    N = U.T @ num @ U
    D = U.T @ den @ U
    ev = sla.eigh(0.5 * (N + N.T), 0.5 * (D + D.T), eigvals_only=True)
    return float(ev[-1])


def local_poincare_constant(model: MonomerDimerModel, pinning: Pinning | None = None,
                            kernel: TransitionKernel | None = None) -> float:
    """Largest alpha with alpha * sum_e Var(E[F|X_e]) <= E(f, f); inf when the local form vanishes."""
    pinning = pinning if pinning is not None else Pinning.empty(model.graph)
    kernel = kernel or transition_kernel(model, pinning, JS)
    dist = kernel.states
    if len(dist) < 2:
        return math.inf
    A = dirichlet_matrix(kernel).matrix
    B = local_variance_form(model, pinning, dist).matrix
    if not kernel.is_irreducible():
        raise SpectralError("kernel is reducible")
    top = generalized_max_ratio(B, A)
    if top <= 1e-12:
        return math.inf
    return 1.0 / top


# -- entropy functionals ------------------------------------------------------

def _bregman(r: np.ndarray) -> np.ndarray:
    """r log r - r + 1, accurate near r = 1."""
    t = r - 1.0
    out = np.empty_like(r)
    small = np.abs(t) < 1e-3
    ts = t[small]
    out[small] = ts * ts * (0.5 - ts * (1 / 6 - ts * (1 / 12 - ts / 20)))
    rb = r[~small]
    with np.errstate(divide="ignore", invalid="ignore"):
        out[~small] = np.where(rb > 0, rb * np.log(np.where(rb > 0, rb, 1.0)), 0.0) - rb + 1.0
    return out


def entropy(mu: np.ndarray, w: np.ndarray) -> float:
    """Ent_mu(w) for w >= 0 with 0 log 0 = 0.

    Written as E * sum mu (r log r - r + 1) with r = w/E, which is a sum of
    nonnegative terms and stays accurate when w is nearly constant.
    """
    mu = np.asarray(mu, dtype=float)
    w = np.asarray(w, dtype=float)
    E = float(mu @ w)
    if E <= 0:
        return 0.0
    return E * float(mu @ _bregman(w / E))


def _ent_grad(mu, w):
    E = float(mu @ w)
    return mu * np.log(np.maximum(w, 1e-300) / E)


class _Quotient:
    """E(f,f) / denominator(f^2) parametrised by f = exp(s).

    The Dirichlet form is evaluated edge by edge as sum W_ij (f_i - f_j)^2 so
    that nearly constant f does not lose precision.
    """

    def __init__(self, A: np.ndarray, mu: np.ndarray, local: list | None = None):
        iu, ju = np.triu_indices(A.shape[0], k=1)
        wts = -A[iu, ju]
        keep = wts > 0
        self.I, self.J, self.W = iu[keep], ju[keep], wts[keep]
        self.n = A.shape[0]
        self.mu = mu
        self.local = local  # list of (occupancy mask, p0, p1) for the local variant

    def dirichlet(self, f):
        d = f[self.I] - f[self.J]
        val = float(self.W @ (d * d))
        g = 2.0 * self.W * d
        grad = np.bincount(self.I, g, self.n) - np.bincount(self.J, g, self.n)
        return val, grad

    def denominator(self, w):
        if self.local is None:
            return entropy(self.mu, w), _ent_grad(self.mu, w)
        mu = self.mu
        G = float(mu @ w)
        total = 0.0
        grad = np.zeros_like(w)
        for occ, p0, p1 in self.local:
            g1 = float(mu[occ] @ w[occ]) / p1
            g0 = float(mu[~occ] @ w[~occ]) / p0
            total += G * float(np.array([p0, p1]) @ _bregman(np.array([g0, g1]) / G))
            grad += mu * np.where(occ, math.log(max(g1, 1e-300) / G), math.log(max(g0, 1e-300) / G))
        return total, grad

    def value(self, f):
        f = np.asarray(f, dtype=float)
        num, _ = self.dirichlet(f)
        den, _ = self.denominator(f * f)
        return num / den if den > 0 else math.inf

    def __call__(self, s):
        # the quotient is invariant under s -> s + c, so shifting by the max
        # changes neither value nor gradient and keeps exp(s) <= 1
        s = s - float(s.max())
        f = np.exp(s)
        w = f * f
        num, dnum_df = self.dirichlet(f)
        den, dden_dw = self.denominator(w)
        if den <= 1e-300:
            return 1e300, np.zeros_like(s)
        val = num / den
        grad = (dnum_df * f - val * dden_dw * 2.0 * w) / den
        return val, grad


def _minimise(q: _Quotient, n: int, restarts: int, rng: np.random.Generator, tol: float):
    best = math.inf
    best_s = None
    starts = []
    # bumps on the lightest states, where extremal test functions tend to live
    for i in np.argsort(q.mu, kind="stable")[: max(restarts // 2, 1)]:
        s = np.zeros(n)
        s[i] = 2.0
        starts.append(s)
    while len(starts) < max(restarts, 1):
        scale = (0.1, 0.5, 1.5, 3.0)[len(starts) % 4]
        starts.append(rng.normal(scale=scale, size=n))
    for s0 in starts:
        res = minimize(q, s0, jac=True, method="L-BFGS-B", bounds=[(-40.0, 40.0)] * n,
                       options={"maxiter": 2000, "ftol": tol, "gtol": 1e-10})
        val = float(res.fun)
        # endpoints that collapsed onto a constant only reproduce the
        # small-perturbation limit, which callers add analytically
        if np.ptp(res.x) < 1e-4:
            continue
        if np.isfinite(val) and val < best:
            best, best_s = val, res.x
    return best, best_s


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def log_sobolev_floor(gamma: float, mu_min: float) -> float:
    """gamma * (1 - 2p) / log(1/p - 1), with its limit gamma/2 at p = 1/2."""
    return gamma * two_point_factor(mu_min)


def two_point_factor(p: float) -> float:
    p = float(p)
    if abs(p - 0.5) < 1e-12:
        return 0.5
    return (1 - 2 * p) / math.log(1 / p - 1)


def log_sobolev_constant(kernel: TransitionKernel, restarts: int = 12, tol: float = 1e-12,
                         seed=0) -> tuple[float, float]:
    """(floor, upper estimate) for the log-Sobolev constant.

    The upper value is the best quotient found by multistart L-BFGS over
    f = exp(s), together with gamma/2 (the limit as f tends to a constant).
    """
    gamma = poincare_constant(kernel)
    mu = kernel.states.probs
    A = dirichlet_matrix(kernel).matrix
    q = _Quotient(A, mu)
    best, _ = _minimise(q, len(mu), restarts, _rng(seed), tol)
    upper = min(best, gamma / 2)
    lower = log_sobolev_floor(gamma, float(kernel.states.mu_min))
    if not upper > 0:
        raise SpectralError(f"non-positive log-Sobolev estimate {upper}")
    return lower, upper


def lsi_quotient(kernel: TransitionKernel, f, local: bool = False) -> float:
    """E(f,f)/Ent(f^2), or the local variant with sum_e Ent(E[F^2|X_e])."""
    mu = kernel.states.probs
    A = dirichlet_matrix(kernel).matrix
    return _Quotient(A, mu, _local_terms(kernel.states) if local else None).value(f)


def _local_terms(dist: ExactDistribution):
    terms = []
    for e in bits(dist.pinning.free):
        occ, _, p0, p1 = _edge_split(dist, e)
        if p0 > 0 and p1 > 0:
            terms.append((occ, p0, p1))
    return terms


def local_log_sobolev_constant(model: MonomerDimerModel, pinning: Pinning | None = None,
                               kernel: TransitionKernel | None = None, restarts: int = 12,
                               tol: float = 1e-12, seed=0) -> float:
    """Upper estimate of the best alpha in alpha * sum_e Ent(E[F^2|X_e]) <= E(f,f)."""
    pinning = pinning if pinning is not None else Pinning.empty(model.graph)
    kernel = kernel or transition_kernel(model, pinning, JS)
    dist = kernel.states
    terms = _local_terms(dist)
    if len(dist) < 2 or not terms:
        return math.inf
    A = dirichlet_matrix(kernel).matrix
    q = _Quotient(A, dist.probs, terms)
    best, _ = _minimise(q, len(dist), restarts, _rng(seed), tol)
    # near-constant f gives the local Poincare constant over two
    return min(best, local_poincare_constant(model, pinning, kernel) / 2)


# -- mixing time --------------------------------------------------------------

class StepCapError(RuntimeError):
    pass


def _tv_to_stationary(Pt: np.ndarray, mu: np.ndarray) -> float:
    return float(0.5 * np.abs(Pt - mu[None, :]).sum(axis=1).max())


def mixing_time_scan(kernel: TransitionKernel, eps: float, max_steps: int = 1_000_000) -> int:
    """Least t with worst-start TV distance <= eps, by stepping one power at a time."""
    P = kernel.dense()
    mu = kernel.states.probs
    Pt = np.eye(len(mu))
    for t in range(max_steps + 1):
        if _tv_to_stationary(Pt, mu) <= eps:
            return t
        Pt = Pt @ P
    raise StepCapError(f"mixing time exceeds {max_steps}")


def mixing_time_exact(kernel: TransitionKernel, eps: float, max_steps: int = 1_000_000) -> int:
    """Bracket t by repeated squaring, then scan linearly inside the bracket."""
    P = kernel.dense()
    mu = kernel.states.probs
    n = len(mu)
    if _tv_to_stationary(np.eye(n), mu) <= eps:
        return 0
    lo, Plo = 0, np.eye(n)
    t, Pt = 1, P
    while _tv_to_stationary(Pt, mu) > eps:
        if t > max_steps:
            raise StepCapError(f"mixing time exceeds {max_steps}")
        lo, Plo = t, Pt
        t, Pt = 2 * t, Pt @ Pt
    # d(lo) > eps >= d(t); d is non-increasing in t
    s, Ps = lo, Plo
    while True:
        s += 1
        Ps = Ps @ P
        if _tv_to_stationary(Ps, mu) <= eps:
            return s


# -- identity and inequality checks --------------------------------------------

def verify_one_step_decomposition(model: MonomerDimerModel, pinning: Pinning | None, f,
                                  rtol: float = 1e-12, dist: ExactDistribution | None = None) -> bool:
    """Averaged law of total variance and chain rule for entropy over the free edges."""
    pinning = pinning if pinning is not None else Pinning.empty(model.graph)
    dist = dist or enumerate_matchings(model, pinning)
    f = np.asarray(f, dtype=float)
    mu = dist.probs
    free = list(bits(pinning.free))
    if not free:
        return True
    k = len(free)

    def mean(w, mask):
        pm = mu[mask].sum()
        return float(mu[mask] @ w[mask]) / pm if pm > 0 else 0.0

    var = float(mu @ f**2) - float(mu @ f) ** 2
    g = f * f
    ent = entropy(mu, g)
    v_between = v_within = e_between = e_within = 0.0
    for e in free:
        occ = dist.occupancy(e).astype(bool)
        for mask in (occ, ~occ):
            pm = float(mu[mask].sum())
            if pm == 0:
                continue
            m1 = mean(f, mask)
            v_within += pm * (mean(f * f, mask) - m1 * m1)
            e_within += pm * entropy(mu[mask] / pm, g[mask])
        cond = np.where(occ, mean(f, occ), mean(f, ~occ))
        v_between += float(mu @ cond**2) - float(mu @ cond) ** 2
        gcond = np.where(occ, mean(g, occ), mean(g, ~occ))
        e_between += entropy(mu, gcond)
    ok_var = math.isclose(var, (v_between + v_within) / k, rel_tol=rtol, abs_tol=1e-15)
    ok_ent = math.isclose(ent, (e_between + e_within) / k, rel_tol=rtol, abs_tol=1e-15)
    return ok_var and ok_ent


@dataclass
class LocalToGlobalReport:
    gamma: float
    alphas: dict  # k -> (alpha_k, argmin pinning description)
    bound: float
    holds: bool
    slack: float
    pinnings_checked: int

    def to_csv(self) -> str:
        lines = ["k,alpha_k,argmin_pinning"]
        for k in sorted(self.alphas):
            a, arg = self.alphas[k]
            lines.append(f"{k},{a!r},{arg}")
        return "\n".join(lines) + "\n"


def _alpha_for(args):
    model, fixed, ones = args
    pin_ = Pinning(model.graph, fixed, ones)
    return local_poincare_constant(model, pin_)


def verify_local_to_global(model: MonomerDimerModel, tol: float = 1e-9,
                           max_edges: int = 7, workers: int = 1) -> LocalToGlobalReport:
    """Sweep every feasible pinning, take alpha_k as the worst local constant at |free| = k,
    and compare the spectral gap with (sum_k 1/(k alpha_k))^-1."""
    g = model.graph
    m = g.m
    if m > max_edges:
        raise SpectralError(f"pinning sweep limited to {max_edges} edges (graph has {m})")
    full = enumerate_matchings(model)
    gamma = poincare_constant(transition_kernel(model, None, JS, dist=full))
    jobs = []
    for free in range(1, 1 << m):
        for p in feasible_pinnings(full, free):
            jobs.append((popcount(free), p))
    args = [(model, p.fixed_mask, p.ones) for _, p in jobs]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(workers) as ex:
            values = list(ex.map(_alpha_for, args, chunksize=16))
    else:
        values = [_alpha_for(a) for a in args]
    alphas: dict = {}
    for (k, p), a in zip(jobs, values):
        cur = alphas.get(k)
        if cur is None or a < cur[0]:
            alphas[k] = (a, p.describe())
    s = sum(1.0 / (k * a) for k, (a, _) in alphas.items() if a != math.inf)
    bound = 1.0 / s if s > 0 else math.inf
    holds = gamma >= bound - tol
    return LocalToGlobalReport(gamma, alphas, bound, bool(holds), gamma - bound, len(jobs))


@dataclass
class ConcavityReport:
    holds: bool
    transitions_checked: int
    worst_ratio: float
    form_holds: bool


def verify_concavity(model: MonomerDimerModel, pinning: Pinning | None = None,
                     n_functions: int = 5, seed=0) -> ConcavityReport:
    """Exact transition-level check of the averaged pinned kernels against Q^tau.

    Only pairs alpha != beta are compared; the diagonal does not enter the
    Dirichlet form.
    """
    pinning = pinning if pinning is not None else Pinning.empty(model.graph)
    kernel = transition_kernel(model, pinning, JS)
    dist = kernel.states
    free = list(bits(pinning.free))
    k = len(free)
    lhs: dict = {}
    sub_forms = []
    for e in free:
        for c in (0, 1):
            sub = pinning.extend(e, c)
            if not sub.is_feasible():
                continue
            sk = transition_kernel(model, sub, JS)
            sub_forms.append((e, c, sk))
            for i, j, q in sk.off_diagonal():
                a = dist.index[sk.states.support[i]]
                b = dist.index[sk.states.support[j]]
                lhs[(a, b)] = lhs.get((a, b), Fraction(0)) + q / k
    holds = True
    worst = 0.0
    for (a, b), val in lhs.items():
        rhs = kernel.rows[a].get(b, Fraction(0))
        holds &= val <= rhs
        worst = max(worst, float(val / rhs) if rhs else math.inf)
    # the implied Dirichlet-form inequality on random test functions
    rng = _rng(seed)
    form_ok = True
    if k:
        A = dirichlet_matrix(kernel).matrix
        for _ in range(n_functions):
            f = rng.normal(size=len(dist))
            rhs = float(f @ A @ f)
            avg = 0.0
            for e, c, sk in sub_forms:
                p_c = float(dist.marginal(e)[c])
                idx = [dist.index[x] for x in sk.states.support]
                As = dirichlet_matrix(sk).matrix
                fs = f[idx]
                avg += p_c * float(fs @ As @ fs)
            avg /= k
            form_ok &= avg <= rhs * (1 + 1e-9) + 1e-15
    return ConcavityReport(bool(holds), len(lhs), worst, bool(form_ok))


@dataclass
class ComparisonReport:
    factor_checked: Fraction
    min_eig: float
    holds: bool


def compare_js_glauber(model: MonomerDimerModel, tol: float = 1e-9,
                       dist: ExactDistribution | None = None) -> ComparisonReport:
    dist = dist or enumerate_matchings(model)
    a_js = dirichlet_matrix(transition_kernel(model, None, JS, dist=dist)).matrix
    a_gd = dirichlet_matrix(transition_kernel(model, None, GLAUBER, dist=dist)).matrix
    factor = 4 * model.graph.max_degree * (model.lam_bar + 1)
    diff = float(factor) * a_gd - a_js
    min_eig = float(np.linalg.eigvalsh(0.5 * (diff + diff.T))[0])
    return ComparisonReport(Fraction(factor), min_eig, bool(min_eig >= -tol))


@dataclass
class ConstantsReport:
    gamma: float
    rho_lower: float
    rho_upper: float
    alpha_local_pi: float
    alpha_local_lsi_upper: float
    alpha_local_lsi_lower: float | None = None
    alpha_k: dict | None = None
    chain: str = JS

    def to_json(self) -> dict:
        def num(v):
            if v is None:
                return None
            return "inf" if v == math.inf else float(v)

        out = {
            "chain": self.chain,
            "gamma": num(self.gamma),
            "rho_lower": num(self.rho_lower),
            "rho_upper": num(self.rho_upper),
            "alpha_local_pi": num(self.alpha_local_pi),
            "alpha_local_lsi_upper": num(self.alpha_local_lsi_upper),
            "alpha_local_lsi_lower": num(self.alpha_local_lsi_lower),
        }
        if self.alpha_k is not None:
            out["alpha_k"] = {str(k): {"alpha": num(a), "argmin_pinning": arg}
                              for k, (a, arg) in sorted(self.alpha_k.items())}
        return out

    def alpha_k_csv(self) -> str:
        lines = ["k,alpha_k,argmin_pinning"]
        for k, (a, arg) in sorted((self.alpha_k or {}).items()):
            lines.append(f"{k},{a!r},{arg}")
        return "\n".join(lines) + "\n"


def constants_report(model: MonomerDimerModel, chain: str = JS, restarts: int = 12, seed=0,
                     with_alpha_k: bool = False, cap: int = DEFAULT_CAP) -> ConstantsReport:
    spec = ChainSpec(chain, Pinning.empty(model.graph))
    kernel = transition_kernel(model, None, spec, cap=cap)
    gamma = poincare_constant(kernel)
    lo, hi = log_sobolev_constant(kernel, restarts=restarts, seed=seed)
    a_pi = local_poincare_constant(model, None, kernel)
    a_lsi = local_log_sobolev_constant(model, None, kernel, restarts=restarts, seed=seed)
    table = None
    if with_alpha_k:
        table = verify_local_to_global(model).alphas
    return ConstantsReport(gamma, lo, hi, a_pi, a_lsi, None, table, spec.kind)


__all__ = [
    "ComparisonReport", "ConcavityReport", "ConstantsReport", "LocalToGlobalReport",
    "QuadraticForm", "SpectralError", "StepCapError", "compare_js_glauber", "constants_report",
    "dirichlet_matrix", "dirichlet_value", "entropy", "generalized_max_ratio",
    "local_log_sobolev_constant", "local_poincare_constant", "local_variance_form",
    "log_sobolev_constant", "log_sobolev_floor", "lsi_quotient", "mixing_time_exact",
    "mixing_time_scan", "poincare_constant", "two_point_factor", "variance_form",
    "verify_concavity", "verify_local_to_global", "verify_one_step_decomposition",
    "format_fraction",
]
