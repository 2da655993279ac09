"""
Tests for validity, adjustment, enumeration and the graphical comparison of tuples
"""

import itertools
import unittest
from typing import Dict, List

import numpy as np

from ..models.civ_models import CondInstrumentSet, Verdict
from ..services.admg_core import (
    Admg, descendants, forbidden_nodes, load_graph, parse_graph, random_admg, reduce_for_estimation
)
from ..services.avar import AvarQuery, avar_new_formula, instrument_strength
from ..services.criteria import (
    compare_cis, conditioning_is_safe, dominance_conditions, enumerate_valid_cis, is_valid_adjustment,
    is_valid_cis, suggests_instrument_over_conditioning
)
from ..services.sem import implied_covariance, marginal_linear_sem, random_sem, total_effect
from ..utils.errors import (
    EnumerationCapError, InvalidTupleError, OverlapError, PreconditionError, UnknownNodeError,
    UnreducedGraphError
)


def cis(z="", w="") -> CondInstrumentSet:
    return CondInstrumentSet.of([n for n in z.split(",") if n], [n for n in w.split(",") if n])


def random_avars(g: Admg, tuples: List[CondInstrumentSet], seed: int) -> Dict[CondInstrumentSet, float]:
    """Asymptotic variance of every tuple under one random compatible model; None when the instrument is weak"""
    model = marginal_linear_sem(random_sem(g, seed))
    cov = implied_covariance(model)
    tau = total_effect(model, "X", "Y")
    sigma_xx = cov.block(["X"], ["X"])[0, 0]
    result = {}
    for t in tuples:
        q = AvarQuery(cov, tau, "X", "Y", t)
        result[t] = avar_new_formula(q) if instrument_strength(q) / sigma_xx > 1e-6 else None
    return result


class TestValidity(unittest.TestCase):
    """Test cases for is_valid_cis"""

    def setUp(self):
        self.g1b = load_graph("g1b")

    def test_valid_tuple(self):
        report = is_valid_cis(self.g1b, "X", "Y", cis("B", "C"))
        self.assertTrue(report.valid)
        self.assertEqual(report.to_dict(), {"valid": True, "conditions": {"i": True, "ii": True, "iii": True}})

    def test_instrument_blocked_from_treatment(self):
        report = is_valid_cis(self.g1b, "X", "Y", cis("A", "B,C"))
        self.assertFalse(report.valid)
        self.assertFalse(report.cond_ii)
        self.assertTrue(report.cond_i)
        self.assertTrue(report.cond_iii)
        # conditioning on D opens the path through the collider
        self.assertTrue(is_valid_cis(self.g1b, "X", "Y", cis("A", "B,C,D")).valid)

    def test_instrument_with_direct_effect_on_outcome(self):
        report = is_valid_cis(self.g1b, "X", "Y", cis("C"))
        self.assertFalse(report.valid)
        self.assertFalse(report.cond_iii)
        self.assertTrue(report.cond_ii)

    def test_forbidden_node(self):
        report = is_valid_cis(load_graph("g1a"), "X", "Y", cis("B", "C,M"))
        self.assertFalse(report.cond_i)
        self.assertFalse(report.valid)

    def test_empty_instrument_set_is_invalid(self):
        report = is_valid_cis(self.g1b, "X", "Y", cis("", "C"))
        self.assertFalse(report.valid)
        self.assertFalse(report.cond_ii)

    def test_overlap_and_unknown_nodes(self):
        with self.assertRaises(OverlapError):
            is_valid_cis(self.g1b, "X", "Y", cis("B", "B,C"))
        with self.assertRaises(UnknownNodeError):
            is_valid_cis(self.g1b, "X", "Y", cis("Q"))
        with self.assertRaises(PreconditionError):
            is_valid_cis(self.g1b, "X", "Y", cis("B", "Y"))


class TestAdjustment(unittest.TestCase):
    """Test cases for is_valid_adjustment"""

    def test_confounded_pair_has_no_adjustment_set(self):
        g = load_graph("g3app")
        self.assertFalse(is_valid_adjustment(g, "V4", "V6", ["V1"]))

    def test_unconfounded_pair(self):
        g = parse_graph("node V1 V2 V3 V4 V5 V6 V7\nV2 -> V1\nV1 -> V4\nV2 -> V3\nV3 -> V6\n"
                        "V4 -> V5\nV5 -> V6\nV6 -> V7\n")
        for w in (["V2"], ["V1"], ["V3"], ["V1", "V2", "V3"]):
            self.assertTrue(is_valid_adjustment(g, "V4", "V6", w))
        self.assertFalse(is_valid_adjustment(g, "V4", "V6", []))
        self.assertFalse(is_valid_adjustment(g, "V4", "V6", ["V2", "V5"]))


class TestEnumeration(unittest.TestCase):
    """Golden enumerations on the fixture graphs"""

    def test_g1b_has_21_tuples(self):
        tuples = enumerate_valid_cis(load_graph("g1b"), "X", "Y")
        self.assertEqual(len(tuples), 21)
        self.assertIn(cis("A,B,D", "C"), tuples)
        self.assertIn(cis("D", "B"), tuples)
        self.assertFalse(any("C" in t.z for t in tuples))
        # B may be conditioned on C, {A,C}, {C,D} or {A,C,D}
        self.assertEqual({t.w for t in tuples if t.z == frozenset({"B"})},
                         {frozenset(w) for w in (["C"], ["A", "C"], ["C", "D"], ["A", "C", "D"])})

    def test_unreduced_graph_gives_same_tuples(self):
        self.assertEqual(enumerate_valid_cis(load_graph("g1a"), "X", "Y"),
                         enumerate_valid_cis(load_graph("g1b"), "X", "Y"))

    def test_g2b_has_5_tuples(self):
        tuples = enumerate_valid_cis(load_graph("g2b"), "X", "Y")
        self.assertEqual(tuples, [cis("A"), cis("A", "B"), cis("A", "B,C"), cis("B"), cis("A,B")])

    def test_appendix_graph_has_5_tuples(self):
        tuples = enumerate_valid_cis(load_graph("g3app"), "V4", "V6")
        self.assertEqual(set(tuples), {
            cis("V1", "V2"), cis("V1", "V3"), cis("V1,V2", "V3"), cis("V1", "V2,V3"), cis("V2", "V3"),
        })

    def test_g2a_has_34_tuples(self):
        tuples = enumerate_valid_cis(load_graph("g2a"), "X", "Y")
        self.assertEqual(len(tuples), 34)
        self.assertIn(cis("B,D", "C"), tuples)
        self.assertIn(cis("D", "A"), tuples)
        self.assertIn(cis("A,B,D", "C"), tuples)

    def test_deterministic_order(self):
        tuples = enumerate_valid_cis(load_graph("g1b"), "X", "Y")
        sizes = [len(t.z) for t in tuples]
        self.assertEqual(sizes, sorted(sizes))
        self.assertEqual(tuples, enumerate_valid_cis(load_graph("g1b"), "X", "Y"))

    def test_candidates_restrict_the_search(self):
        tuples = enumerate_valid_cis(load_graph("g1b"), "X", "Y", candidates=["B", "C"])
        self.assertEqual(tuples, [cis("B", "C")])

    def test_cap(self):
        with self.assertRaises(EnumerationCapError):
            enumerate_valid_cis(load_graph("g1b"), "X", "Y", cap=3)


class TestComparison(unittest.TestCase):
    """Test cases for conditions (a)-(d) and compare_cis"""

    def setUp(self):
        self.g1b = load_graph("g1b")
        self.g2a = load_graph("g2a")

    def test_harmful_conditioning(self):
        self.assertEqual(dominance_conditions(self.g2a, "X", "Y", cis("D", "A"), cis("D")), (True, True, True, True))
        result = compare_cis(self.g2a, "X", "Y", cis("D", "A"), cis("D"))
        self.assertEqual(result.verdict, Verdict.SECOND_AT_MOST_FIRST)

    def test_beneficial_conditioning(self):
        conditions = dominance_conditions(self.g2a, "X", "Y", cis("D"), cis("D", "C"))
        self.assertTrue(conditions[2])
        self.assertEqual(compare_cis(self.g2a, "X", "Y", cis("D"), cis("D", "C")).verdict,
                         Verdict.SECOND_AT_MOST_FIRST)
        self.assertEqual(compare_cis(self.g2a, "X", "Y", cis("D", "C"), cis("D")).verdict,
                         Verdict.FIRST_AT_MOST_SECOND)

    def test_neutral_conditioning(self):
        result = compare_cis(self.g2a, "X", "Y", cis("D", "A,C"), cis("D", "A,B,C"))
        self.assertEqual(result.verdict, Verdict.EQUAL)
        self.assertTrue(all(result.forward_conditions) and all(result.reverse_conditions))

    def test_inconclusive(self):
        conditions = dominance_conditions(self.g1b, "X", "Y", cis("D", "C"), cis("D", "B,C"))
        self.assertFalse(conditions[2])
        result = compare_cis(self.g1b, "X", "Y", cis("D", "C"), cis("D", "B,C"))
        self.assertEqual(result.verdict, Verdict.INCONCLUSIVE)
        self.assertEqual(result.to_dict()["verdict"], "Inconclusive")

    def test_invalid_tuple(self):
        with self.assertRaises(InvalidTupleError):
            compare_cis(self.g1b, "X", "Y", cis("C"), cis("B", "C"))

    def test_unreduced_graph(self):
        with self.assertRaises(UnreducedGraphError):
            compare_cis(load_graph("g1a"), "X", "Y", cis("B", "C"), cis("D", "B"))


class TestComparisonShortcuts(unittest.TestCase):
    """Test cases for the instrument-over-conditioning and conditioning rules"""

    def test_suggests_instrument_over_conditioning(self):
        g1b = load_graph("g1b")
        self.assertTrue(suggests_instrument_over_conditioning(g1b, "X", "Y", ["B", "D"], ["C"], ["A"]))
        self.assertTrue(suggests_instrument_over_conditioning(load_graph("g2b"), "X", "Y", ["A"], [], ["B"]))
        self.assertTrue(suggests_instrument_over_conditioning(g1b, "X", "Y", ["B"], ["C"], []))
        # C can never be an instrument
        self.assertFalse(suggests_instrument_over_conditioning(g1b, "X", "Y", ["B"], [], ["C"]))

    def test_suggests_requires_valid_conditioning_tuple(self):
        with self.assertRaises(PreconditionError):
            suggests_instrument_over_conditioning(load_graph("g1b"), "X", "Y", ["A"], [], ["B"])
        with self.assertRaises(OverlapError):
            suggests_instrument_over_conditioning(load_graph("g1b"), "X", "Y", ["B"], ["C"], ["C"])

    def test_conditioning_is_safe(self):
        g1b = load_graph("g1b")
        self.assertTrue(conditioning_is_safe(g1b, "X", "Y", ["D"], ["B"], "C"))
        self.assertFalse(conditioning_is_safe(load_graph("g2a"), "X", "Y", ["D"], [], "B"))

    def test_conditioning_is_safe_preconditions(self):
        g1b = load_graph("g1b")
        # (B, {}) is not valid in this graph
        with self.assertRaises(PreconditionError):
            conditioning_is_safe(g1b, "X", "Y", ["B"], [], "C")
        with self.assertRaises(PreconditionError):
            conditioning_is_safe(g1b, "X", "Y", ["B"], ["C"], "C")


class TestRandomGraphProperties(unittest.TestCase):
    """Projection invariance of validity and the adjustment property on random graphs"""

    def _cases(self, count: int, seed: int):
        rng = np.random.default_rng(seed)
        produced = 0
        while produced < count:
            g = random_admg(int(rng.integers(4, 8)), p_directed=0.4, p_bidirected=0.25,
                            seed=int(rng.integers(2 ** 32)))
            x = g.nodes[int(rng.integers(0, len(g.nodes) - 1))]
            later = sorted(descendants(g, [x]) - {x}, key=g.index)
            if not later:
                continue
            y = later[int(rng.integers(0, len(later)))]
            produced += 1
            yield g, x, y

    @staticmethod
    def _assignments(nodes):
        for assignment in itertools.product((0, 1, 2), repeat=len(nodes)):
            z = [n for n, a in zip(nodes, assignment) if a == 1]
            w = [n for n, a in zip(nodes, assignment) if a == 2]
            if z:
                yield CondInstrumentSet.of(z, w)

    def test_validity_survives_forbidden_projection(self):
        for g, x, y in self._cases(100, 7):
            reduced = reduce_for_estimation(g, x, y)
            kept = [n for n in reduced.nodes if n not in (x, y)]
            for t in self._assignments(kept):
                self.assertEqual(is_valid_cis(g, x, y, t).valid, is_valid_cis(reduced, x, y, t).valid,
                                 f"{g.edges} ({x},{y}) {t}")

    def test_descendant_of_treatment_implies_adjustment(self):
        checked = 0
        for g, x, y in self._cases(300, 8):
            de_x = descendants(g, [x])
            pool = [n for n in g.nodes if n not in (x, y) and n not in forbidden_nodes(g, x, y)]
            for t in self._assignments(pool):
                if not (t.nodes & de_x) or not is_valid_cis(g, x, y, t).valid:
                    continue
                self.assertTrue(is_valid_adjustment(g, x, y, t.w), f"{g.edges} ({x},{y}) {t}")
                checked += 1
        self.assertGreater(checked, 0)


class TestNumericSoundness(unittest.TestCase):
    """Graphical verdicts must be respected by the asymptotic variances of random models"""

    def _check_graph(self, name: str, seeds: range):
        g = load_graph(name)
        tuples = enumerate_valid_cis(g, "X", "Y")
        verdicts = {}
        for t1, t2 in itertools.combinations(tuples, 2):
            verdict = compare_cis(g, "X", "Y", t1, t2).verdict
            if verdict != Verdict.INCONCLUSIVE:
                verdicts[(t1, t2)] = verdict
        self.assertTrue(verdicts)

        for seed in seeds:
            avars = random_avars(g, tuples, seed)
            for (t1, t2), verdict in verdicts.items():
                a1, a2 = avars[t1], avars[t2]
                if a1 is None or a2 is None:
                    continue
                slack = 1e-8 * max(a1, a2)
                if verdict in (Verdict.SECOND_AT_MOST_FIRST, Verdict.EQUAL):
                    self.assertLessEqual(a2, a1 + slack, f"{name} seed {seed}: {t1} vs {t2}")
                if verdict in (Verdict.FIRST_AT_MOST_SECOND, Verdict.EQUAL):
                    self.assertLessEqual(a1, a2 + slack, f"{name} seed {seed}: {t1} vs {t2}")

    def test_g1b(self):
        self._check_graph("g1b", range(200))

    def test_g2a(self):
        self._check_graph("g2a", range(200))

    def test_larger_instrument_set_with_same_conditioning(self):
        for name in ("g1b", "g2a"):
            g = load_graph(name)
            tuples = enumerate_valid_cis(g, "X", "Y")
            pairs = [(t1, t2) for t1, t2 in itertools.permutations(tuples, 2) if t1.w == t2.w and t1.z < t2.z]
            self.assertTrue(pairs)
            for t1, t2 in pairs:
                self.assertIn(compare_cis(g, "X", "Y", t1, t2).verdict, (Verdict.SECOND_AT_MOST_FIRST, Verdict.EQUAL))
            for seed in range(400, 500):
                avars = random_avars(g, tuples, seed)
                for t1, t2 in pairs:
                    if avars[t1] is not None and avars[t2] is not None:
                        self.assertLessEqual(avars[t2], avars[t1] * (1 + 1e-8), f"{name} seed {seed}: {t1} vs {t2}")

    def test_conditioning_vignettes_on_g2a(self):
        g2a = load_graph("g2a")
        for seed in range(200, 300):
            subsets = [[], ["B"], ["C"], ["B", "C"]]
            tuples = [cis("D", ",".join(w)) for w in subsets] + [cis("D", ",".join(["A"] + w)) for w in subsets]
            tuples += [cis("D", ",".join(w + ["C"])) for w in ([], ["A"], ["B"], ["A", "B"])]
            avars = random_avars(g2a, list(dict.fromkeys(tuples)), seed)
            for w in subsets:
                plain, with_a = avars[cis("D", ",".join(w))], avars[cis("D", ",".join(["A"] + w))]
                if plain is not None and with_a is not None:
                    self.assertGreaterEqual(with_a, plain * (1 - 1e-8))
            for w in ([], ["A"], ["B"], ["A", "B"]):
                plain, with_c = avars[cis("D", ",".join(w))], avars[cis("D", ",".join(w + ["C"]))]
                if plain is not None and with_c is not None:
                    self.assertLessEqual(with_c, plain * (1 + 1e-8))


if __name__ == "__main__":
    unittest.main()
