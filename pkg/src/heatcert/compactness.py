"""Desk-scale certificates for relative compactness of potential
perturbations.

Everything here is a checkable inequality: the Hilbert-Schmidt identity and
its control-function bound, the 2 -> alpha smoothing bound, the Laplace
representation of the resolvent, Kato domination between bundle and scalar
operators, truncation convergence, and stabilization of the singular values
of W (H + a)^{-1} along an exhaustion. The report never claims compactness
of an infinite-volume operator; it states which hypotheses were verified
and how far the finite spectra drifted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .bundle import EndomorphismField
from .control import ControlPair, F2Family, check_integrability
from .graph import Exhaustion, Measure, lq_norm, weak_vanishing_profile
from .heat import HeatKernel, semigroup
from .operators import OperatorMatrix, dirichlet_restriction, multiplication_operator, resolvent

HS_IDENTITY_RTOL = 1e-8
DOMINATION_TOL = 1e-9
ASCENT_TOL = 1e-8


@dataclass
class LedgerRow:
    """One verified inequality: name, both sides, slack = rhs - lhs."""

    name: str
    lhs: float
    rhs: float
    tol: float = 0.0
    detail: dict = field(default_factory=dict)

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def ok(self) -> bool:
        return self.lhs <= self.rhs + self.tol

    def to_dict(self) -> dict:
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs,
                "slack": self.slack, "pass": self.ok, **self.detail}


def resolvent_via_laplace(H: OperatorMatrix, a: float, nodes: int = 320) -> np.ndarray:
    """(H + a)^{-1} from the Laplace representation, by Gauss-Laguerre
    quadrature on integral of e^{-at} e^{-tH} dt (substituting s = a t).

    The node count trades off against the spectral spread: convergence is
    geometric in nodes with a rate set by lambda_max / a. 320 nodes keep
    the relative error below 1e-6 for spectra reaching into the hundreds;
    the Golub-Welsch rule stays numerically finite at this order.
    """
    if a <= 0:
        raise ValueError("shift must be positive")
    s_nodes, weights = special.roots_laguerre(nodes)
    out = np.zeros((H.dim, H.dim), dtype=complex)
    for s, w in zip(s_nodes, weights):
        out += w * semigroup(H, s / a)
    return out / a


def check_resolvent_laplace(H: OperatorMatrix, a: float, rtol: float = 1e-6) -> LedgerRow:
    direct = resolvent(H, a)
    quad = resolvent_via_laplace(H, a)
    rel = float(np.linalg.norm(quad - direct) / np.linalg.norm(direct))
    return LedgerRow("resolvent-laplace-crosscheck", rel, rtol,
                     detail={"a": a})


def _scalar_values(W, vertices) -> np.ndarray:
    """Vertex function |W| as a vector: scalar fields give |w(x)|, matrix
    fields the fiber operator norm (Euclidean; orthonormal coordinates)."""
    if isinstance(W, EndomorphismField):
        return np.array([float(np.linalg.norm(W.get(v), 2)) for v in vertices])
    return np.array([abs(W[v]) for v in vertices], dtype=float)


def hs_norm_weighted(mat: np.ndarray, weights: np.ndarray) -> float:
    """Hilbert-Schmidt norm of an operator on the weighted L^2 space."""
    s = np.sqrt(weights)
    return float(np.linalg.norm((s[:, None] * mat) / s[None, :], "fro"))


def check_hs_bound(W1, k: HeatKernel, cp: ControlPair, t: float) -> list[LedgerRow]:
    """Two rows: the HS identity ||W P_t||_HS^2 = sum |W|^2 p(2t, x, x) rho,
    and the control bound against F2(2t) ||W||^2 in the F1-weighted L^2."""
    if cp.q != 1:
        raise ValueError("the HS route is the q = 1 path")
    p2t = k.at(2 * t)
    pt = k.at(t)
    rho = k.rho
    w = _scalar_values(W1, k.vertices)
    # direct: matrix of W P_t acting on coordinate vectors
    mat = w[:, None] * (np.real(pt) * rho[None, :])
    hs_direct_sq = hs_norm_weighted(mat, rho) ** 2
    diag_sq = float(np.sum(w ** 2 * np.real(np.diagonal(p2t)) * rho))
    scale = max(hs_direct_sq, diag_sq, 1e-300)
    identity = LedgerRow("hs-identity-relerr",
                         abs(hs_direct_sq - diag_sq) / scale, HS_IDENTITY_RTOL,
                         detail={"t": t, "hs_sq": hs_direct_sq, "diag_sq": diag_sq})
    f1 = np.array([cp.F1[v] for v in k.vertices])
    norm_sq = float(np.sum(w ** 2 * f1 * rho))
    bound = LedgerRow("hs-step1-bound", diag_sq, cp.F2(2 * t) * norm_sq,
                      tol=1e-12 * max(1.0, norm_sq), detail={"t": t})
    return [identity, bound]


def check_2to2_bound(W, H: OperatorMatrix, cp: ControlPair, t: float) -> LedgerRow:
    """Semigroup operator-norm bound on the q > 1 route (F1 identically 1):

        ||W P_t||_{2->2} <= F2(t)^{1/(2q)} ||W||_{mu, 2q}.
    """
    if cp.q <= 1:
        raise ValueError("the 2->2 semigroup route is the q > 1 path")
    w_op = multiplication_operator(_as_endo(W, H), H.vertices, H.measure)
    mat = w_op.matrix @ semigroup(H, t)
    lhs = float(_weighted_singular_values(mat, H.measure_weights())[0])
    w_map = dict(zip(H.vertices, _scalar_values(W, H.vertices)))
    rhs = cp.F2(t) ** (1.0 / (2.0 * cp.q)) * lq_norm(w_map, 2 * cp.q, H.measure)
    return LedgerRow("step2-semigroup-norm-bound", lhs, rhs,
                     tol=1e-10 * max(1.0, rhs), detail={"t": t, "q": cp.q})


def check_resolvent_bound(W, H: OperatorMatrix, cp: ControlPair, a: float) -> LedgerRow:
    """Resolvent operator-norm bound on the q > 1 route:

        sigma_1(W (H + a)^{-1}) <= ||W||_{mu, 2q} * integral of
        e^{-a t} F2(t)^{1/(2q)} dt  (quadrature value).
    """
    if cp.q <= 1:
        raise ValueError("the resolvent norm route is the q > 1 path")
    w_op = multiplication_operator(_as_endo(W, H), H.vertices, H.measure)
    mat = w_op.matrix @ resolvent(H, a)
    lhs = float(_weighted_singular_values(mat, H.measure_weights())[0])
    w_map = dict(zip(H.vertices, _scalar_values(W, H.vertices)))
    quad = laplace_weight_integral(cp.F2, cp.q, a)
    rhs = lq_norm(w_map, 2 * cp.q, H.measure) * quad
    return LedgerRow("step3-resolvent-norm-bound", lhs, rhs,
                     tol=1e-10 * max(1.0, rhs),
                     detail={"a": a, "q": cp.q, "quadrature_integral": quad})


def sup_kernel_on(k: HeatKernel, U, t: float) -> float:
    """C_U(t) = sup over x in U, all y, of p(t, x, y)."""
    idx = [i for i, v in enumerate(k.vertices) if v in set(U)]
    if not idx:
        return 0.0
    return float(np.max(np.real(k.at(t))[idx, :]))


def estimate_2a_norm(k: HeatKernel, U, t: float, alpha: float,
                     rng: np.random.Generator, restarts: int = 20,
                     iters: int = 200) -> float:
    """Lower-bound estimate of ||1_U P_t||_{2 -> alpha} by projected
    gradient ascent on the unit sphere of the weighted L^2 space.

    The kernel has nonnegative entries, so nonnegative maximizers suffice.
    """
    if alpha <= 2:
        raise ValueError("alpha must exceed 2")
    idx = np.array([v in set(U) for v in k.vertices])
    if not idx.any():
        return 0.0
    rho = k.rho
    B = np.real(k.at(t)) * rho[None, :]
    B[~idx, :] = 0.0

    def value_grad(f):
        u = B @ f
        au = np.abs(u)
        phi = float(np.sum(rho * au ** alpha) ** (1.0 / alpha))
        if phi == 0.0:
            return 0.0, np.zeros_like(f)
        grad = phi ** (1 - alpha) * (B.T @ (rho * au ** (alpha - 1) * np.sign(u)))
        return phi, grad

    best = 0.0
    n = len(rho)
    for _ in range(restarts):
        f = np.abs(rng.standard_normal(n))
        f /= np.sqrt(np.sum(rho * f ** 2))
        val, grad = value_grad(f)
        step = 1.0
        for _ in range(iters):
            cand = np.clip(f + step * grad, 0.0, None)
            nrm = np.sqrt(np.sum(rho * cand ** 2))
            if nrm == 0.0:
                break
            cand /= nrm
            cval, cgrad = value_grad(cand)
            if cval > val + 1e-15:
                f, val, grad = cand, cval, cgrad
                step *= 1.3
            else:
                step *= 0.5
                if step < 1e-12:
                    break
        best = max(best, val)
    return best


def check_2a_bound(U, k: HeatKernel, t: float, alpha: float,
                   rng: np.random.Generator) -> LedgerRow:
    """One-sided smoothing check: ascent lower bound on ||1_U P_t||_{2->alpha}
    against the upper bound C_U(t)^((alpha-2)/(2 alpha))."""
    cu = sup_kernel_on(k, U, t)
    lower = estimate_2a_norm(k, U, t, alpha, rng)
    rhs = cu ** ((alpha - 2.0) / (2.0 * alpha)) if cu > 0 else 0.0
    return LedgerRow("two-to-alpha-bound", lower, rhs, tol=ASCENT_TOL,
                     detail={"t": t, "alpha": alpha, "C_U": cu,
                             "subset_size": len(set(U))})


def _block_norms(f: np.ndarray, rank: int) -> np.ndarray:
    blocks = f.reshape(-1, rank)
    return np.sqrt(np.sum(np.abs(blocks) ** 2, axis=1))


def check_domination(H_cov: OperatorMatrix, H_scal: OperatorMatrix,
                     times, a_values, trials: int,
                     rng: np.random.Generator) -> list[LedgerRow]:
    """Kato domination of the scalar operator by the bundle operator:

    (i)  |e^{-t T} f(x)| <= (e^{-t S} |f|)(x)   pointwise,
    (ii) |(T + a)^{-1} f(x)| <= ((S + a)^{-1} |f|)(x)  pointwise,

    plus the spectral consequence lambda_min(T) >= lambda_min(S).
    Sections tested: every fiber-coordinate basis section and `trials`
    random complex sections.
    """
    if H_cov.vertices != H_scal.vertices:
        raise ValueError("operators live over different vertex sets")
    if H_scal.rank != 1:
        raise ValueError("the dominated operator must be scalar")
    d = H_cov.rank
    n = len(H_cov.vertices)
    sections = [np.eye(n * d, dtype=complex)[:, j] for j in range(n * d)]
    for _ in range(trials):
        sections.append(rng.standard_normal(n * d) + 1j * rng.standard_normal(n * d))
    rows = []
    worst_i = -np.inf
    worst_i_at = None
    for t in times:
        pt_cov = semigroup(H_cov, t)
        pt_scal = np.real(semigroup(H_scal, t))
        for si, f in enumerate(sections):
            lhs = _block_norms(pt_cov @ f, d)
            rhs = pt_scal @ _block_norms(f, d)
            gap = float(np.max(lhs - rhs))
            if gap > worst_i:
                worst_i, worst_i_at = gap, {"t": t, "section": si}
    rows.append(LedgerRow("kato-domination-semigroup", worst_i, 0.0,
                          tol=DOMINATION_TOL, detail={"worst_at": worst_i_at}))
    worst_ii = -np.inf
    worst_ii_at = None
    for a in a_values:
        r_cov = resolvent(H_cov, a)
        r_scal = np.real(resolvent(H_scal, a))
        for si, f in enumerate(sections):
            lhs = _block_norms(r_cov @ f, d)
            rhs = r_scal @ _block_norms(f, d)
            gap = float(np.max(lhs - rhs))
            if gap > worst_ii:
                worst_ii, worst_ii_at = gap, {"a": a, "section": si}
    rows.append(LedgerRow("kato-domination-resolvent", worst_ii, 0.0,
                          tol=DOMINATION_TOL, detail={"worst_at": worst_ii_at}))
    rows.append(LedgerRow("kato-spectral-ordering",
                          H_scal.lambda_min(), H_cov.lambda_min(),
                          tol=DOMINATION_TOL))
    return rows


@dataclass(frozen=True)
class PotentialDecomposition:
    """W = W1 + W2 with the membership certificates the bounds need:
    the F1-weighted L^{2q} norm of |W1| and the weak-vanishing profile of
    |W2| (finite level-set measures at every threshold)."""

    W: EndomorphismField | dict
    W1: EndomorphismField | dict
    W2: EndomorphismField | dict
    q: float
    w1_l2q_f1: float
    w2_profile: dict[float, float]

    @staticmethod
    def build(W, W1, W2, cp: ControlPair, measure: Measure,
              thresholds=(1.0, 0.1, 0.01)) -> "PotentialDecomposition":
        vertices = list(measure.weights)
        w1v = _scalar_values(W1, vertices)
        w2v = _scalar_values(W2, vertices)
        if isinstance(W, EndomorphismField):
            for v in vertices:
                if np.max(np.abs(W.get(v) - W1.get(v) - W2.get(v))) > 1e-12:
                    raise ValueError(f"W1 + W2 != W at {v}")
        else:
            for v in vertices:
                if abs(W[v] - W1[v] - W2[v]) > 1e-12:
                    raise ValueError(f"W1 + W2 != W at {v}")
        f1_measure = Measure({v: cp.F1[v] * measure.weights[v] for v in vertices})
        w1_map = dict(zip(vertices, w1v))
        norm = lq_norm(w1_map, 2 * cp.q, f1_measure)
        profile = weak_vanishing_profile(dict(zip(vertices, w2v)),
                                         measure, thresholds)
        return PotentialDecomposition(W, W1, W2, cp.q, float(norm), profile)


@dataclass
class CompactnessReport:
    a: float
    levels: list[int]                       # scalar dimension per level
    singular_values: dict[int, list[float]]  # full sigma list of W R per level
    top_k: int
    drift: dict[str, float]                 # per transition: max top-k drift
    bounds: list[LedgerRow]
    verdict: str

    def to_dict(self) -> dict:
        return {
            "a": self.a,
            "levels": self.levels,
            "singular_values": {str(k): v for k, v in self.singular_values.items()},
            "top_k": self.top_k,
            "drift": self.drift,
            "bounds": [r.to_dict() for r in self.bounds],
            "verdict": self.verdict,
        }


def _weighted_singular_values(mat: np.ndarray, weights: np.ndarray) -> np.ndarray:
    s = np.sqrt(weights)
    return np.linalg.svd((s[:, None] * mat) / s[None, :], compute_uv=False)


def laplace_weight_integral(F2: F2Family, q: float, a: float,
                            time_scale: float = 1.0) -> float:
    """integral of e^{-a t} F2(time_scale * t)^{1/(2q)} dt, by the
    singularity-aware quadrature from the integrability checker."""
    C, gamma = F2.effective_power()
    # F2(k t) = C ((k t)^-gamma + 1) = C k^-gamma (t^-gamma + k^gamma)
    # bounded above by (C k^-gamma)(t^-gamma + 1) only when k >= 1; evaluate
    # exactly instead by folding the scale into a shifted family.
    from scipy import integrate

    def integrand(t):
        return np.exp(-a * t) * F2(time_scale * t) ** (1.0 / (2.0 * q))

    s_exp = gamma / (2.0 * q)
    if s_exp >= 1.0:
        raise ValueError("integral diverges at t = 0")
    if s_exp > 0:
        pexp = 1.0 / (1.0 - s_exp)
        left, _ = integrate.quad(
            lambda u: integrand(u ** pexp) * pexp * u ** (pexp - 1.0),
            0.0, 1.0, epsabs=1e-10, limit=200)
    else:
        left, _ = integrate.quad(integrand, 0.0, 1.0, epsabs=1e-10, limit=200)
    right, _ = integrate.quad(integrand, 1.0, np.inf, epsabs=1e-10, limit=200)
    return left + right


def certify_compactness(pd: PotentialDecomposition, H: OperatorMatrix,
                        cp: ControlPair, ex: Exhaustion, a: float,
                        k_top: int = 5) -> CompactnessReport:
    """Per exhaustion level: singular values of W (H|_level + a)^{-1},
    the resolvent operator-norm bound with its quadrature constant, the
    truncation surrogate for the bounded tail, and level-to-level drift
    of the top singular values."""
    verdict_fail = None
    integrability = check_integrability(cp.F2, cp.q)
    if not integrability.convergent:
        raise ValueError(f"control pair not integrable: {integrability.reason}")
    bounds: list[LedgerRow] = []
    singular: dict[int, list[float]] = {}
    dims: list[int] = []
    top_lists: list[np.ndarray] = []
    # the quantitative resolvent bound: q = 1 uses the HS route with
    # F2(2t) (stated for a >= 2), q > 1 the 2->2 route with F2(t) (a >= 1)
    if cp.q == 1:
        quad_value = laplace_weight_integral(cp.F2, cp.q, a, time_scale=2.0)
        bound_name = "step1-resolvent-hs-bound"
        quantitative = a >= 2
    else:
        quad_value = laplace_weight_integral(cp.F2, cp.q, a, time_scale=1.0)
        bound_name = "step3-resolvent-norm-bound"
        quantitative = a >= 1
    rhs = pd.w1_l2q_f1 * quad_value
    for lv in ex.levels:
        Hn = dirichlet_restriction(H, lv)
        weights = Hn.measure_weights()
        R = resolvent(Hn, a)
        w_full = multiplication_operator(_as_endo(pd.W, Hn), Hn.vertices, Hn.measure)
        sv = _weighted_singular_values(w_full.matrix @ R, weights)
        singular[Hn.dim] = [float(x) for x in sv]
        dims.append(Hn.dim)
        top_lists.append(sv[:k_top])
        w1_op = multiplication_operator(_as_endo(pd.W1, Hn), Hn.vertices, Hn.measure)
        sigma1 = float(_weighted_singular_values(w1_op.matrix @ R, weights)[0])
        row = LedgerRow(bound_name, sigma1, rhs, tol=1e-10,
                        detail={"level_dim": Hn.dim, "a": a,
                                "quadrature_integral": quad_value,
                                "quantitative": quantitative})
        if not quantitative:
            row.detail["note"] = ("bound stated by the resolvent route only for "
                                  "larger shifts; row is informational here")
        bounds.append(row)
        if quantitative and not row.ok and verdict_fail is None:
            verdict_fail = bound_name
    # truncation surrogate: the tail of W2 below 1/n has sup norm <= 1/n
    w2v = _scalar_values(pd.W2, H.vertices)
    for n in range(1, len(ex.levels) + 1):
        tail = w2v[w2v < 1.0 / n]
        sup_tail = float(tail.max()) if tail.size else 0.0
        row = LedgerRow("step7-truncation-tail", sup_tail, 1.0 / n,
                        detail={"n": n})
        bounds.append(row)
        if not row.ok and verdict_fail is None:
            verdict_fail = "step7-truncation-tail"
    drift = {}
    for i, (sa, sb) in enumerate(zip(top_lists, top_lists[1:])):
        m = min(len(sa), len(sb))
        drift[f"{dims[i]}->{dims[i+1]}"] = float(np.max(np.abs(sb[:m] - sa[:m]))) if m else 0.0
    verdict = "hypotheses-verified" if verdict_fail is None else f"hypothesis-failed:{verdict_fail}"
    return CompactnessReport(a, dims, singular, k_top, drift, bounds, verdict)


def _as_endo(W, Hn: OperatorMatrix) -> EndomorphismField:
    """Restrict W (scalar map or endo field) to the level's vertices."""
    if isinstance(W, EndomorphismField):
        return EndomorphismField(W.rank, {v: W.get(v) for v in Hn.vertices},
                                 self_adjoint=W.self_adjoint)
    return EndomorphismField(
        Hn.rank, {v: complex(W[v]) * np.eye(Hn.rank) for v in Hn.vertices})
