import numpy as np
import pytest

from heatcert.bundle import EndomorphismField, UnitaryConnection
from heatcert.compactness import (
    LedgerRow,
    PotentialDecomposition,
    certify_compactness,
    check_2a_bound,
    check_2to2_bound,
    check_domination,
    check_hs_bound,
    check_resolvent_bound,
    check_resolvent_laplace,
    estimate_2a_norm,
    laplace_weight_integral,
    resolvent_via_laplace,
    sup_kernel_on,
)
from heatcert.control import ControlPair, F2Family, fit_control
from heatcert.graph import Measure, build_exhaustion, make_graph, path_graph, random_graph
from heatcert.heat import DEFAULT_TIMES, kernel_from_semigroup, semigroup
from heatcert.operators import (
    add_potential,
    assemble_covariant,
    assemble_laplacian,
    multiplication_operator,
    resolvent,
)


def two_vertex(beta=1.0, rho=(1.0, 1.0)):
    return make_graph(["1", "2"], {"1": rho[0], "2": rho[1]},
                      [("1", "2", beta)])


def graph_pair(g, kernel, q=1.0):
    pair, cert = fit_control(kernel, "graph", q)
    assert cert.ok
    return pair


def random_unitary(rng, d):
    z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    qm, r = np.linalg.qr(z)
    return qm * (np.diagonal(r) / np.abs(np.diagonal(r))).conj()[None, :]


def random_connection(g, d, rng):
    phi = {}
    for pair in g.b:
        u, v = tuple(pair)
        m = random_unitary(rng, d)
        phi[(u, v)] = m
        phi[(v, u)] = np.linalg.inv(m)
    return UnitaryConnection(d, phi)


class TestLedgerRow:
    def test_slack_and_pass(self):
        row = LedgerRow("x", 1.0, 2.0)
        assert row.slack == 1.0 and row.ok

    def test_tolerance_band(self):
        assert LedgerRow("x", 1.0 + 1e-12, 1.0, tol=1e-10).ok
        assert not LedgerRow("x", 1.1, 1.0, tol=1e-10).ok


class TestResolventLaplace:
    def test_single_vertex_value(self):
        g = make_graph(["x"], {"x": 1.0}, [])
        H = assemble_laplacian(g)
        assert resolvent_via_laplace(H, 2.0)[0, 0] == pytest.approx(0.5, abs=1e-10)

    def test_two_vertex_analytic(self):
        H = assemble_laplacian(two_vertex(1.0))
        quad = np.real(resolvent_via_laplace(H, 1.0))
        expected = 0.5 * np.array([[1 + 1 / 3, 1 - 1 / 3], [1 - 1 / 3, 1 + 1 / 3]])
        np.testing.assert_allclose(quad, expected, atol=1e-9)

    def test_crosscheck_random_50(self):
        rng = np.random.default_rng(0)
        g = random_graph(50, rng)
        H = assemble_laplacian(g)
        row = check_resolvent_laplace(H, 1.0)
        assert row.ok
        assert row.lhs < 1e-6

    def test_rejects_nonpositive_shift(self):
        H = assemble_laplacian(two_vertex())
        with pytest.raises(ValueError):
            resolvent_via_laplace(H, 0.0)


class TestHsBound:
    def test_zero_potential(self):
        g = two_vertex()
        H = assemble_laplacian(g)
        k = kernel_from_semigroup(H, (0.5, 1.0))
        cp = graph_pair(g, k)
        rows = check_hs_bound({"1": 0.0, "2": 0.0}, k, cp, t=0.5)
        assert rows[0].detail["hs_sq"] == 0.0
        assert rows[0].detail["diag_sq"] == 0.0
        assert all(r.ok for r in rows)

    def test_two_vertex_analytic_diagonal(self):
        g = two_vertex(1.0)
        H = assemble_laplacian(g)
        k = kernel_from_semigroup(H, (0.5, 1.0))
        cp = graph_pair(g, k)
        rows = check_hs_bound({"1": 1.0, "2": 0.0}, k, cp, t=0.5)
        identity, bound = rows
        # ||W P_t||_HS^2 = p(2t, 1, 1) = (1 + e^{-2}) / 2 at t = 1/2
        assert identity.detail["hs_sq"] == pytest.approx((1 + np.exp(-2)) / 2,
                                                         abs=1e-12)
        assert identity.ok and bound.ok

    def test_sweep_random_graphs(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            g = random_graph(int(rng.integers(5, 40)), rng)
            H = assemble_laplacian(g)
            k = kernel_from_semigroup(H, (0.25, 0.5, 1.0))
            cp = graph_pair(g, k)
            for _ in range(20):
                W = {v: float(rng.standard_normal()) for v in g.vertices}
                for t in (0.25, 0.5):
                    rows = check_hs_bound(W, k, cp, t)
                    assert all(r.ok for r in rows), [r.to_dict() for r in rows]

    def test_rejects_q_above_one(self):
        g = two_vertex()
        k = kernel_from_semigroup(assemble_laplacian(g), (0.5, 1.0))
        cp = ControlPair({v: 1.0 for v in g.vertices}, F2Family.constant(1.0), 2.0)
        with pytest.raises(ValueError):
            check_hs_bound({"1": 1.0, "2": 0.0}, k, cp, t=0.5)


class TestStep2Step3:
    def test_bounds_hold_on_sweep(self):
        rng = np.random.default_rng(2)
        for _ in range(5):
            g = random_graph(25, rng)
            H = assemble_laplacian(g)
            k = kernel_from_semigroup(H, DEFAULT_TIMES)
            W = {v: float(rng.standard_normal()) for v in g.vertices}
            for q in (1.5, 2.0, 3.0):
                cp = graph_pair(g, k, q)
                for t in (0.01, 0.5, 2.0):
                    assert check_2to2_bound(W, H, cp, t).ok
                for a in (1.0, 2.0, 4.0):
                    assert check_resolvent_bound(W, H, cp, a).ok

    def test_single_vertex_resolvent_equality(self):
        g = make_graph(["x"], {"x": 1.0}, [])
        H = assemble_laplacian(g)
        cp = ControlPair({"x": 1.0}, F2Family.constant(1.0), 2.0)
        row = check_resolvent_bound({"x": -3.0}, H, cp, a=1.0)
        # H = 0: sole singular value |w|/(0 + 1); quadrature constant 1
        assert row.lhs == pytest.approx(3.0, abs=1e-12)
        assert row.rhs == pytest.approx(3.0, abs=1e-8)
        assert row.ok

    def test_sigma1_nonincreasing_in_a(self):
        rng = np.random.default_rng(3)
        g = random_graph(20, rng)
        H = assemble_laplacian(g)
        cp = ControlPair({v: 1.0 for v in g.vertices}, F2Family.constant(1.0), 2.0)
        W = {v: float(rng.standard_normal()) for v in g.vertices}
        sigmas = [check_resolvent_bound(W, H, cp, a).lhs
                  for a in (0.5, 1.0, 2.0, 4.0)]
        for lo, hi in zip(sigmas[1:], sigmas):
            assert lo <= hi + 1e-12

    def test_rejects_q_equal_one(self):
        g = two_vertex()
        H = assemble_laplacian(g)
        cp = ControlPair({v: 1.0 for v in g.vertices}, F2Family.constant(1.0), 1.0)
        with pytest.raises(ValueError):
            check_2to2_bound({"1": 1.0, "2": 0.0}, H, cp, 0.5)
        with pytest.raises(ValueError):
            check_resolvent_bound({"1": 1.0, "2": 0.0}, H, cp, 1.0)


class TestLaplaceWeightIntegral:
    def test_constant_family_unit(self):
        val = laplace_weight_integral(F2Family.constant(1.0), 1.0, 1.0)
        assert val == pytest.approx(1.0, abs=1e-9)

    def test_shift_scaling(self):
        val = laplace_weight_integral(F2Family.constant(1.0), 1.0, 2.0)
        assert val == pytest.approx(0.5, abs=1e-9)

    def test_time_scale_on_power_family(self):
        # with F2 = t^-1 + 1 and q = 1 the scaled integrand is exact:
        # int e^{-t} sqrt((2t)^-1 + 1) dt, oracle by dense quadrature
        fam = F2Family.power(1.0, 1.0)
        val = laplace_weight_integral(fam, 1.0, 1.0, time_scale=2.0)
        # graded composite Gauss-Legendre oracle (panels shrink toward the
        # t^{-1/2} endpoint singularity)
        nodes, weights = np.polynomial.legendre.leggauss(16)
        edges = [60.0 * (0.5 ** k) for k in range(600)] + [0.0]
        oracle = 0.0
        for lo, hi in zip(edges[::-1], edges[::-1][1:]):
            mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
            t = mid + half * nodes
            oracle += half * float(np.sum(
                weights * np.exp(-t) * np.sqrt(1.0 / (2 * t) + 1.0)))
        assert val == pytest.approx(oracle, abs=1e-7)

    def test_divergent_exponent_raises(self):
        with pytest.raises(ValueError):
            laplace_weight_integral(F2Family.power(1.0, 2.0), 1.0, 1.0)


class TestTwoAlpha:
    def test_empty_subset(self):
        g = path_graph(4)
        k = kernel_from_semigroup(assemble_laplacian(g), (1.0,))
        rng = np.random.default_rng(0)
        row = check_2a_bound([], k, 1.0, 4.0, rng)
        assert row.lhs == 0.0 and row.ok

    def test_single_vertex_unit_saturation(self):
        g = make_graph(["x"], {"x": 1.0}, [])
        k = kernel_from_semigroup(assemble_laplacian(g), (1.0,))
        rng = np.random.default_rng(0)
        row = check_2a_bound(["x"], k, 1.0, 4.0, rng)
        # H = 0, rho = 1: operator norm 1 against C_U^{1/4} = 1
        assert row.lhs == pytest.approx(1.0, abs=1e-9)
        assert row.rhs == pytest.approx(1.0)
        assert row.ok

    def test_two_vertex_reported_constant(self):
        g = two_vertex(1.0)
        k = kernel_from_semigroup(assemble_laplacian(g), (1.0,))
        rng = np.random.default_rng(1)
        row = check_2a_bound(["1"], k, 1.0, 4.0, rng)
        assert row.detail["C_U"] == pytest.approx((1 + np.exp(-2)) / 2, abs=1e-12)
        assert row.ok

    def test_random_instances(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            g = random_graph(int(rng.integers(4, 25)), rng)
            k = kernel_from_semigroup(assemble_laplacian(g), (0.1, 1.0))
            size = int(rng.integers(1, g.n + 1))
            U = list(rng.choice(g.vertices, size=size, replace=False))
            t = float(rng.choice([0.1, 1.0]))
            alpha = float(rng.choice([3.0, 4.0, 8.0]))
            assert check_2a_bound(U, k, t, alpha, rng).ok

    def test_rejects_alpha_at_most_two(self):
        g = path_graph(3)
        k = kernel_from_semigroup(assemble_laplacian(g), (1.0,))
        with pytest.raises(ValueError):
            estimate_2a_norm(k, ["v0"], 1.0, 2.0, np.random.default_rng(0))

    def test_sup_kernel_matches_max(self):
        g = path_graph(5)
        k = kernel_from_semigroup(assemble_laplacian(g), (0.5,))
        full = sup_kernel_on(k, g.vertices, 0.5)
        assert full == pytest.approx(float(np.max(np.real(k.at(0.5)))))


class TestDomination:
    def test_trivial_connection_equality(self):
        rng = np.random.default_rng(5)
        g = random_graph(10, rng)
        H = assemble_laplacian(g)
        Hc = assemble_covariant(g, 1, UnitaryConnection.trivial(g, 1))
        rows = check_domination(Hc, H, (0.5, 1.0), (1.0,), 10, rng)
        assert all(r.ok for r in rows)
        # T = S: nonnegative sections saturate (i), so worst gap is ~0
        semi = next(r for r in rows if r.name == "kato-domination-semigroup")
        assert abs(semi.lhs) < 1e-10

    def test_magnetic_two_vertex_analytic(self):
        g = two_vertex(1.0)
        conn = UnitaryConnection.from_edge_phases(g, {("1", "2"): np.pi / 2})
        Hc = assemble_covariant(g, 1, conn)
        H = assemble_laplacian(g)
        t = 1.0
        delta = np.array([1.0, 0.0], dtype=complex)
        lhs = np.abs(semigroup(Hc, t) @ delta)
        rhs = np.real(semigroup(H, t)) @ np.abs(delta)
        # off-diagonal equality for a delta section
        assert lhs[1] == pytest.approx(rhs[1], abs=1e-12)
        assert lhs[1] == pytest.approx((1 - np.exp(-2 * t)) / 2, abs=1e-12)
        # strict inequality for the constant section
        ones = np.ones(2, dtype=complex)
        lhs1 = np.abs(semigroup(Hc, t) @ ones)
        rhs1 = np.real(semigroup(H, t)) @ np.abs(ones)
        assert np.all(lhs1 < rhs1 - 1e-3)

    def test_random_sweep_rank2_with_potential(self):
        rng = np.random.default_rng(6)
        for _ in range(5):
            g = random_graph(8, rng)
            conn = random_connection(g, 2, rng)
            Hc = assemble_covariant(g, 2, conn)
            vals = {}
            for v in g.vertices:
                z = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
                vals[v] = z @ z.conj().T
            V = EndomorphismField(2, vals, self_adjoint=True)
            Hc = add_potential(Hc, V)
            H = assemble_laplacian(g)
            rows = check_domination(Hc, H, (0.1, 1.0), (0.5, 2.0), 50, rng)
            assert all(r.ok for r in rows), [r.to_dict() for r in rows]

    def test_spectral_ordering_row(self):
        rng = np.random.default_rng(7)
        g = random_graph(12, rng)
        conn = random_connection(g, 2, rng)
        Hc = assemble_covariant(g, 2, conn)
        H = assemble_laplacian(g)
        rows = check_domination(Hc, H, (1.0,), (1.0,), 5, rng)
        spectral = next(r for r in rows if r.name == "kato-spectral-ordering")
        assert spectral.ok
        assert spectral.lhs == pytest.approx(H.lambda_min(), abs=1e-12)

    def test_rejects_vertex_mismatch(self):
        g1, g2 = path_graph(3), path_graph(4)
        H1 = assemble_laplacian(g1)
        H2c = assemble_covariant(g2, 1, UnitaryConnection.trivial(g2, 1))
        with pytest.raises(ValueError):
            check_domination(H2c, H1, (1.0,), (1.0,), 1, np.random.default_rng(0))


class TestPotentialDecompositionBuild:
    def test_split_mismatch_raises(self):
        g = path_graph(2)
        cp = ControlPair({v: 1.0 for v in g.vertices}, F2Family.constant(1.0), 1.0)
        with pytest.raises(ValueError, match="W1"):
            PotentialDecomposition.build({"v0": 1.0, "v1": 0.0},
                                         {"v0": 0.5, "v1": 0.0},
                                         {"v0": 0.0, "v1": 0.0},
                                         cp, Measure.from_rho(g))

    def test_norm_and_profile(self):
        g = path_graph(3)
        cp = ControlPair({v: 1.0 for v in g.vertices}, F2Family.constant(1.0), 1.0)
        pd = PotentialDecomposition.build(
            {"v0": 3.0, "v1": 0.5, "v2": 0.0},
            {"v0": 3.0, "v1": 0.0, "v2": 0.0},
            {"v0": 0.0, "v1": 0.5, "v2": 0.0},
            cp, Measure.from_rho(g), thresholds=(0.25, 1.0))
        assert pd.w1_l2q_f1 == pytest.approx(3.0)
        assert pd.w2_profile[0.25] == 1.0
        assert pd.w2_profile[1.0] == 0.0


def build_decomposition(g, W_map, threshold, cp):
    W1 = {v: (w if abs(w) > threshold else 0.0) for v, w in W_map.items()}
    W2 = {v: W_map[v] - W1[v] for v in W_map}
    return PotentialDecomposition.build(W_map, W1, W2, cp, Measure.from_rho(g))


class TestCertify:
    def test_zero_potential_all_zero(self):
        g = path_graph(8)
        H = assemble_laplacian(g)
        cp = ControlPair({v: 1.0 / g.rho[v] for v in g.vertices},
                         F2Family.constant(1.0), 1.0)
        pd = build_decomposition(g, {v: 0.0 for v in g.vertices}, 0.1, cp)
        ex = build_exhaustion(g, "v0", [3, 7])
        rep = certify_compactness(pd, H, cp, ex, a=2.0)
        assert rep.verdict == "hypotheses-verified"
        for sv in rep.singular_values.values():
            assert max(sv) == 0.0

    def test_single_vertex_equality_case(self):
        g = make_graph(["x"], {"x": 1.0}, [])
        H = assemble_laplacian(g)
        cp = ControlPair({"x": 1.0}, F2Family.constant(1.0), 1.0)
        pd = build_decomposition(g, {"x": 2.0}, 0.1, cp)
        ex = build_exhaustion(g, "x", [1])
        rep = certify_compactness(pd, H, cp, ex, a=1.0)
        # sole singular value |w| / (0 + 1)
        assert rep.singular_values[1][0] == pytest.approx(2.0, abs=1e-12)
        row = next(r for r in rep.bounds if "resolvent" in r.name)
        # quadrature RHS |w| * int e^{-t} dt = |w|, an equality case
        assert row.rhs == pytest.approx(2.0, abs=1e-8)
        assert row.ok

    def test_quantitative_flag_depends_on_shift(self):
        g = path_graph(6)
        H = assemble_laplacian(g)
        cp = ControlPair({v: 1.0 for v in g.vertices}, F2Family.constant(1.0), 1.0)
        pd = build_decomposition(g, {v: 1.0 for v in g.vertices}, 0.1, cp)
        ex = build_exhaustion(g, "v0", [5])
        rep1 = certify_compactness(pd, H, cp, ex, a=1.0)
        rep2 = certify_compactness(pd, H, cp, ex, a=2.0)
        row1 = next(r for r in rep1.bounds if "resolvent" in r.name)
        row2 = next(r for r in rep2.bounds if "resolvent" in r.name)
        assert not row1.detail["quantitative"]
        assert row2.detail["quantitative"] and row2.ok

    def test_path_stabilization(self):
        n = 400
        g = path_graph(n)
        H = assemble_laplacian(g)
        cp = ControlPair({v: 1.0 for v in g.vertices}, F2Family.constant(1.0), 1.0)
        W = {f"v{j}": 1.0 / (1.0 + j * j) for j in range(n)}
        pd = build_decomposition(g, W, 0.1, cp)
        ex = build_exhaustion(g, "v0", [50, 100, 200, 399])
        rep = certify_compactness(pd, H, cp, ex, a=2.0, k_top=5)
        assert rep.verdict == "hypotheses-verified"
        assert rep.levels == [51, 101, 201, 400]
        last = rep.drift["201->400"]
        assert last < 1e-3

    def test_singular_values_sorted_descending(self):
        rng = np.random.default_rng(8)
        g = random_graph(15, rng)
        H = assemble_laplacian(g)
        cp = ControlPair({v: 1.0 for v in g.vertices}, F2Family.constant(1.0), 1.0)
        W = {v: float(rng.standard_normal()) for v in g.vertices}
        pd = build_decomposition(g, W, 0.5, cp)
        ex = build_exhaustion(g, g.vertices[0], [2, 50])
        rep = certify_compactness(pd, H, cp, ex, a=2.0)
        for sv in rep.singular_values.values():
            assert all(a >= b >= 0 for a, b in zip(sv, sv[1:]))

    def test_truncation_tail_rows(self):
        g = path_graph(10)
        H = assemble_laplacian(g)
        cp = ControlPair({v: 1.0 for v in g.vertices}, F2Family.constant(1.0), 1.0)
        W = {f"v{j}": 1.0 / (j + 2.0) for j in range(10)}
        pd = build_decomposition(g, W, 1.0, cp)  # all of W lands in W2
        ex = build_exhaustion(g, "v0", [3, 6, 9])
        rep = certify_compactness(pd, H, cp, ex, a=2.0)
        tails = [r for r in rep.bounds if r.name == "step7-truncation-tail"]
        assert len(tails) == 3
        assert all(r.ok for r in tails)
        sups = [r.lhs for r in tails]
        assert sups == sorted(sups, reverse=True)

    def test_divergent_pair_hard_error(self):
        g = path_graph(4)
        H = assemble_laplacian(g)
        cp = ControlPair({v: 1.0 for v in g.vertices}, F2Family.power(1.0, 3.0), 1.0)
        pd = build_decomposition(g, {v: 1.0 for v in g.vertices}, 0.1, cp)
        ex = build_exhaustion(g, "v0", [3])
        with pytest.raises(ValueError, match="integrable"):
            certify_compactness(pd, H, cp, ex, a=2.0)


def test_truncation_operator_norm_converges_exactly():
    # W_n = 1_{X_n} min(n, |W|) sgn(W): once n exceeds max |W| and the level
    # covers the support, the 2->2 gap is exactly zero on a finite host
    rng = np.random.default_rng(9)
    g = random_graph(12, rng)
    W = {v: float(3.0 * rng.standard_normal()) for v in g.vertices}
    ex = build_exhaustion(g, g.vertices[0], [1, 2, 50])
    m = Measure.from_rho(g)
    gaps = []
    base = int(np.ceil(max(abs(w) for w in W.values())))
    for n, level in enumerate(ex.levels, start=base):
        Wn = {v: (np.sign(W[v]) * min(n, abs(W[v])) if v in level else 0.0)
              for v in g.vertices}
        diff = EndomorphismField.scalar({v: W[v] - Wn[v] for v in g.vertices})
        gaps.append(multiplication_operator(diff, g.vertices, m).norm_2to2())
    assert gaps[-1] == 0.0
    assert gaps[0] >= gaps[-1]
