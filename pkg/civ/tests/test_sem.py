"""
Tests for linear SEM arithmetic, random models and sampling
"""

import itertools
import math
import unittest

import networkx as nx
import numpy as np

from ..models.civ_models import ErrorFamily, SemConfig
from ..services.admg_core import load_graph, parse_graph, random_admg
from ..services.msep import m_separated
from ..services.sem import (
    CovModel, LinearSem, canonical_sem, conditional_cov, expanded_covariance, implied_covariance,
    linear_sem_to_dict, load_linear_sem, marginal_linear_sem, random_sem, regression_coef, sample, total_effect
)
from ..utils.errors import NotPositiveDefiniteError, OverlapError, SemSpecError, UnknownNodeError


def chain_sem(text, coefs, error_var=None):
    g = parse_graph(text)
    params = {
        "edges": [{"from": a, "to": b, "coef_or_cov": v} for (a, b), v in coefs.items()],
        "error_var": error_var or {n: 1.0 for n in g.nodes},
    }
    return load_linear_sem(params, g)


class TestCovarianceArithmetic(unittest.TestCase):
    """Test cases for implied covariance, conditioning and regression"""

    def test_implied_covariance_of_single_edge(self):
        m = chain_sem("X -> Y\n", {("X", "Y"): 1.0})
        np.testing.assert_allclose(implied_covariance(m).sigma, [[1.0, 1.0], [1.0, 2.0]])

    def test_bidirected_edge_is_error_covariance(self):
        g = parse_graph("X <-> Y\n")
        m = load_linear_sem({"edges": [{"from": "X", "to": "Y", "kind": "bidirected", "coef_or_cov": 0.5}],
                             "error_var": {"X": 1.0, "Y": 1.0}}, g)
        np.testing.assert_allclose(implied_covariance(m).sigma, [[1.0, 0.5], [0.5, 1.0]])

    def test_total_effect_multiplies_along_paths(self):
        m = chain_sem("A -> B\nB -> C\n", {("A", "B"): 2.0, ("B", "C"): 3.0})
        self.assertAlmostEqual(total_effect(m, "A", "C"), 6.0)

    def test_total_effect_sums_parallel_paths(self):
        m = chain_sem("X -> M\nM -> Y\nX -> Y\n", {("X", "M"): 2.0, ("M", "Y"): 3.0, ("X", "Y"): 1.0})
        self.assertAlmostEqual(total_effect(m, "X", "Y"), 7.0)
        self.assertAlmostEqual(total_effect(m, "Y", "X"), 0.0, places=12)

    def test_markov_spot_checks(self):
        cov = implied_covariance(marginal_linear_sem(random_sem(load_graph("g2a"), 4)))
        self.assertAlmostEqual(conditional_cov(cov, ["A"], ["X"], ["D"])[0, 0], 0.0, places=10)
        self.assertAlmostEqual(cov.block(["B"], ["D"])[0, 0], 0.0, places=12)
        self.assertNotAlmostEqual(cov.block(["A"], ["X"])[0, 0], 0.0, places=6)

    def test_regression_coefficient_is_ratio_of_conditional_covariances(self):
        cov = implied_covariance(marginal_linear_sem(random_sem(load_graph("g1b"), 12)))
        for s, t, w in (("Y", "X", []), ("Y", "X", ["C"]), ("X", "D", ["A", "B"])):
            expected = conditional_cov(cov, [s], [t], w)[0, 0] / conditional_cov(cov, [t], [t], w)[0, 0]
            self.assertAlmostEqual(regression_coef(cov, [s], [t], w)[0, 0], expected, places=10)

    def test_regression_requires_disjoint_regressors(self):
        cov = implied_covariance(marginal_linear_sem(random_sem(load_graph("g1b"), 1)))
        with self.assertRaises(OverlapError):
            regression_coef(cov, ["Y"], ["X"], ["X"])

    def test_cov_model_rejects_indefinite_matrix(self):
        with self.assertRaises(NotPositiveDefiniteError):
            CovModel(("A", "B"), np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_block_keeps_label_order_for_sets(self):
        cov = CovModel(("A", "B", "C"), np.diag([1.0, 2.0, 3.0]))
        np.testing.assert_allclose(cov.block({"C", "A"}, {"C", "A"}), np.diag([1.0, 3.0]))
        with self.assertRaises(UnknownNodeError):
            cov.block(["Q"], ["A"])


class TestRandomModelProperties(unittest.TestCase):
    """Identities every compatible model must satisfy"""

    def _random_models(self, count: int, seed: int, max_nodes: int = 8):
        rng = np.random.default_rng(seed)
        for _ in range(count):
            g = random_admg(int(rng.integers(3, max_nodes)), p_directed=float(rng.uniform(0.3, 0.6)),
                            p_bidirected=float(rng.uniform(0.1, 0.3)), seed=int(rng.integers(2 ** 32)))
            yield g, marginal_linear_sem(random_sem(g, int(rng.integers(2 ** 32))))

    def test_regression_coefficient_recursion(self):
        # beta_ab.c = beta_ab.cd + beta_ad.bc * beta_db.c
        g = load_graph("g1b")
        for seed in range(10):
            cov = implied_covariance(marginal_linear_sem(random_sem(g, 100 + seed)))
            for a, b, d in itertools.permutations(g.nodes, 3):
                rest = [n for n in g.nodes if n not in (a, b, d)]
                for c in [[]] + [[n] for n in rest]:
                    lhs = regression_coef(cov, [a], [b], c)[0, 0]
                    rhs = (regression_coef(cov, [a], [b], c + [d])[0, 0]
                           + regression_coef(cov, [a], [d], c + [b])[0, 0] * regression_coef(cov, [d], [b], c)[0, 0])
                    self.assertAlmostEqual(lhs, rhs, delta=1e-10 * max(1.0, abs(lhs)), msg=f"{a} {b} {d} | {c}")

    def test_total_effect_is_sum_over_causal_paths(self):
        checked = 0
        for g, m in self._random_models(60, 41):
            for x, y in itertools.combinations(g.nodes, 2):
                products = [math.prod(m.coef(t, h) for t, h in zip(path, path[1:]))
                            for path in nx.all_simple_paths(g.dag, x, y)]
                scale = max(1.0, sum(abs(p) for p in products))
                self.assertAlmostEqual(total_effect(m, x, y), sum(products), delta=1e-12 * scale)
                self.assertAlmostEqual(total_effect(m, y, x), 0.0, places=12)
                checked += 1
        self.assertGreater(checked, 300)

    def test_markov_property(self):
        checked = 0
        for g, m in self._random_models(40, 43, max_nodes=7):
            cov = implied_covariance(m)
            for a, b in itertools.combinations(g.nodes, 2):
                rest = [n for n in g.nodes if n not in (a, b)]
                scale = math.sqrt(cov.block([a], [a])[0, 0] * cov.block([b], [b])[0, 0])
                for size in range(3):
                    for w in itertools.combinations(rest, size):
                        if m_separated(g, [a], [b], w):
                            partial = conditional_cov(cov, [a], [b], list(w))[0, 0]
                            self.assertLess(abs(partial), 1e-10 * scale, f"{g.edges} {a} {b} | {w}")
                            checked += 1
        self.assertGreater(checked, 50)


class TestParameterFiles(unittest.TestCase):

    def test_missing_edge(self):
        with self.assertRaises(SemSpecError):
            chain_sem("X -> Y\n", {("Y", "X"): 1.0})

    def test_missing_error_variance(self):
        with self.assertRaises(SemSpecError):
            chain_sem("X -> Y\n", {("X", "Y"): 1.0}, error_var={"X": 1.0})

    def test_coefficient_on_missing_edge(self):
        g = parse_graph("X -> Y\nnode Z\n")
        coeffs = np.zeros((3, 3))
        coeffs[2, 0] = 1.0
        with self.assertRaises(SemSpecError):
            LinearSem(g, coeffs, np.eye(3))

    def test_dict_form_reloads(self):
        g = load_graph("g2b")
        m = marginal_linear_sem(canonical_sem(g))
        again = load_linear_sem(linear_sem_to_dict(m), g)
        np.testing.assert_allclose(again.coeffs, m.coeffs)
        np.testing.assert_allclose(again.err_cov, m.err_cov)


class TestRandomSem(unittest.TestCase):
    """Test cases for random model generation and latent marginalization"""

    def setUp(self):
        self.g1b = load_graph("g1b")

    def test_deterministic_for_seed(self):
        a, b = random_sem(self.g1b, 5), random_sem(self.g1b, 5)
        np.testing.assert_array_equal(a.coeffs, b.coeffs)
        np.testing.assert_array_equal(a.error_var, b.error_var)
        self.assertEqual(a.family, b.family)
        self.assertFalse(np.array_equal(a.coeffs, random_sem(self.g1b, 6).coeffs))

    def test_parameter_ranges(self):
        config = SemConfig()
        for seed in range(20):
            m = random_sem(self.g1b, seed)
            nonzero = np.abs(m.coeffs[m.coeffs != 0])
            self.assertTrue(np.all(nonzero >= config.coef_low) and np.all(nonzero <= config.coef_high))
            self.assertTrue(np.all(m.error_var >= config.var_low) and np.all(m.error_var <= config.var_high))

    def test_latent_expansion(self):
        m = random_sem(self.g1b, 0)
        # one latent per bidirected edge
        self.assertEqual(len(m.expanded_graph.nodes), len(self.g1b.nodes) + 2)
        self.assertEqual(len(m.latents), 2)
        self.assertEqual(m.observed, self.g1b.nodes)
        self.assertEqual(len(m.expanded_graph.bidirected_edges), 0)

    def test_fixed_family(self):
        m = random_sem(self.g1b, 3, SemConfig(family=ErrorFamily.UNIFORM))
        self.assertEqual(m.family, ErrorFamily.UNIFORM)

    def test_marginal_matches_expanded_covariance(self):
        for seed in range(10):
            m = random_sem(self.g1b, seed)
            marginal = implied_covariance(marginal_linear_sem(m))
            expanded = expanded_covariance(m).restrict(self.g1b.nodes)
            np.testing.assert_allclose(marginal.sigma, expanded.sigma, rtol=1e-10, atol=1e-12)

    def test_marginal_error_covariance_follows_bidirected_pattern(self):
        m = marginal_linear_sem(random_sem(self.g1b, 2))
        g = self.g1b
        self.assertEqual(m.err_cov[g.index("A"), g.index("B")], 0.0)
        self.assertNotEqual(m.err_cov[g.index("X"), g.index("Y")], 0.0)

    def test_canonical_sem_rejects_unknown_edge(self):
        with self.assertRaises(SemSpecError):
            canonical_sem(self.g1b, coef={("Y", "X"): 1.0})


class TestSampling(unittest.TestCase):

    def test_sample_moments_match_implied_covariance(self):
        g = load_graph("g2a")
        for family in ErrorFamily:
            m = random_sem(g, 21, SemConfig(family=family))
            sigma = implied_covariance(marginal_linear_sem(m)).sigma
            data = sample(m, 200000, 7)
            self.assertEqual(data.labels, g.nodes)
            empirical = np.cov(data.values, rowvar=False)
            scale = np.sqrt(np.outer(np.diag(sigma), np.diag(sigma)))
            self.assertTrue(np.all(np.abs(empirical - sigma) <= 0.02 * scale), family)

    def test_single_observation(self):
        data = sample(canonical_sem(load_graph("g1b")), 1, 0)
        self.assertEqual(data.n, 1)
        self.assertEqual(data.values.shape, (1, 6))

    def test_sample_size_must_be_positive(self):
        with self.assertRaises(SemSpecError):
            sample(canonical_sem(load_graph("g1b")), 0, 0)

    def test_sampling_is_deterministic_for_seed(self):
        m = random_sem(load_graph("g1b"), 1)
        np.testing.assert_array_equal(sample(m, 50, 9).values, sample(m, 50, 9).values)

    def test_frame_columns(self):
        frame = sample(canonical_sem(load_graph("g2b")), 5, 1).to_frame()
        self.assertEqual(list(frame.columns), ["X", "Y", "A", "B", "C"])


if __name__ == "__main__":
    unittest.main()
