import json
import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from qbug.corpus import Issue
from qbug.evaluation import (
    AnnotatedIssue,
    AnnotationFormatError,
    ConfusionMatrix,
    EvaluationError,
    betainc,
    cohens_kappa,
    confusion,
    default_label_codes,
    evaluate,
    kappa_band,
    load_annotations,
    paired_t_test,
    stratified_sample,
    t_cdf,
    t_two_sided_p,
    weighted_metrics,
)

from oracles import confusion_oracle, metrics_oracle, t_two_sided_quad


class TestConfusion:
    def test_identity(self):
        cm = confusion(["A", "B"], ["A", "B"])
        assert cm.counts == ((1, 0), (0, 1))

    def test_off_diagonal(self):
        cm = confusion(["A", "A"], ["B", "B"], ["A", "B"])
        assert cm.counts == ((0, 2), (0, 0))

    def test_hand_tally(self):
        truth = ["A", "A", "B", "C", "C", "C"]
        pred = ["A", "B", "B", "C", "A", "C"]
        cm = confusion(truth, pred, ["A", "B", "C"])
        assert cm.counts == ((1, 1, 0), (0, 1, 0), (1, 0, 2))
        assert cm.total == 6

    def test_errors(self):
        with pytest.raises(ValueError):
            confusion(["A"], ["A", "B"])
        with pytest.raises(ValueError):
            confusion([], [])

    def test_unlisted_labels_appended(self):
        assert confusion(["z", "a"], ["a", "a"], ["a"]).labels == ("a", "z")


class TestMetrics:
    def test_perfect(self):
        assert weighted_metrics(confusion(list("ABCA"), list("ABCA"))) == (1, 1, 1, 1)

    def test_binary_half(self):
        cm = ConfusionMatrix(("A", "B"), ((1, 1), (1, 1)))
        assert weighted_metrics(cm) == pytest.approx((0.5, 0.5, 0.5, 0.5))

    def test_accuracy_formula_with_constructed_matrix(self):
        # 7873 correct of 10000 pairs, spread over four classes
        cm = ConfusionMatrix(
            ("Low", "Medium", "High", "Critical"),
            ((4000, 500, 100, 27), (600, 2000, 200, 0), (300, 200, 1500, 0), (100, 100, 0, 373)),
        )
        assert cm.total == 10000
        assert round(weighted_metrics(cm).accuracy, 4) == 0.7873

    def test_zero_denominators(self):
        cm = ConfusionMatrix(("A", "B"), ((2, 0), (2, 0)))
        m = weighted_metrics(cm)
        assert m.accuracy == 0.5 and m.recall == 0.5
        assert m.precision == pytest.approx(0.25)

    def test_empty_matrix(self):
        with pytest.raises(ValueError):
            weighted_metrics(ConfusionMatrix(("A",), ((0,),)))


class TestKappa:
    def test_perfect(self):
        assert cohens_kappa(confusion(list("AABB"), list("AABB"))) == 1.0

    def test_chance(self):
        assert cohens_kappa(confusion(list("AABB"), list("ABAB"))) == pytest.approx(0.0)

    def test_hand_value(self):
        cm = ConfusionMatrix(("A", "B"), ((20, 5), (10, 15)))
        assert cohens_kappa(cm) == pytest.approx(0.40, abs=1e-12)

    def test_degenerate_expected_agreement(self):
        assert cohens_kappa(confusion(["A"] * 3, ["A"] * 3)) == 1.0

    @pytest.mark.parametrize(
        "k,band",
        [(0.162, "slight"), (0.696, "substantial"), (0.826, "almost perfect"), (-0.1, "poor"),
         (0.0, "slight"), (0.2, "slight"), (0.3, "fair"), (0.5, "moderate"), (0.8, "substantial"), (1.0, "almost perfect")],
    )
    def test_bands(self, k, band):
        assert kappa_band(k) == band


@st.composite
def matrices(draw):
    k = draw(st.integers(1, 6))
    cells = draw(st.lists(st.integers(0, 12), min_size=k * k, max_size=k * k))
    if sum(cells) == 0:
        cells[0] = 1
    return ConfusionMatrix(tuple(f"L{i}" for i in range(k)), tuple(tuple(cells[i * k:(i + 1) * k]) for i in range(k)))


class TestMetricProperties:
    @settings(max_examples=300)
    @given(matrices())
    def test_recall_equals_accuracy(self, cm):
        m = weighted_metrics(cm)
        assert m.recall == pytest.approx(m.accuracy, abs=1e-12)

    @settings(max_examples=300)
    @given(matrices(), st.randoms())
    def test_permutation_invariance(self, cm, rnd):
        k = len(cm.labels)
        perm = list(range(k))
        rnd.shuffle(perm)
        permuted = ConfusionMatrix(
            tuple(cm.labels[p] for p in perm), tuple(tuple(cm.counts[a][b] for b in perm) for a in perm)
        )
        assert weighted_metrics(permuted) == pytest.approx(weighted_metrics(cm), abs=1e-12)
        assert cohens_kappa(permuted) == pytest.approx(cohens_kappa(cm), abs=1e-12)

    @settings(max_examples=300)
    @given(matrices())
    def test_kappa_one_iff_diagonal(self, cm):
        k = len(cm.labels)
        diagonal = all(cm.counts[i][j] == 0 for i in range(k) for j in range(k) if i != j)
        rows, cols = cm.row_sums(), cm.col_sums()
        pe = sum(r * c for r, c in zip(rows, cols)) / cm.total ** 2
        if pe < 1:
            assert (abs(cohens_kappa(cm) - 1) < 1e-12) == diagonal
        assert -1 <= cohens_kappa(cm) <= 1

    @settings(max_examples=200)
    @given(st.lists(st.tuples(st.sampled_from("ABC"), st.sampled_from("ABC")), min_size=1, max_size=40))
    def test_confusion_matches_oracle(self, pairs):
        truth, pred = zip(*pairs)
        cm = confusion(truth, pred, ["A", "B", "C"])
        assert [list(r) for r in cm.counts] == confusion_oracle(truth, pred, ["A", "B", "C"])
        acc, p, r, f, kappa = metrics_oracle([list(r) for r in cm.counts])
        assert weighted_metrics(cm) == pytest.approx((acc, p, r, f), abs=1e-9)
        assert cohens_kappa(cm) == pytest.approx(kappa, abs=1e-9)


class TestStudentT:
    def test_hand_example(self):
        res = paired_t_test([0, 0, 0, 0], [1, 1, 1, -1])
        assert res.t == pytest.approx(1.0)
        assert res.df == 3
        assert res.p == pytest.approx(0.391, abs=5e-4)

    def test_identical(self):
        x = [0, 1, 2, 3, 1]
        assert tuple(paired_t_test(x, x))[:3] == (0.0, 1.0, 4)

    def test_n_one(self):
        with pytest.raises(ValueError):
            paired_t_test([1], [2])

    def test_zero_variance_nonzero_mean(self):
        res = paired_t_test([0, 0, 0], [1, 1, 1])
        assert res.t == math.inf and res.p == 0.0 and res.degenerate
        assert paired_t_test([1, 1], [0, 0]).t == -math.inf

    def test_known_values(self):
        assert t_two_sided_p(2.0, 1) == pytest.approx(1 - 2 * math.atan(2) / math.pi, abs=1e-14)
        assert t_two_sided_p(0.0, 7) == 1.0
        assert t_cdf(0.0, 5) == 0.5
        assert t_cdf(1.3, 4) + t_cdf(-1.3, 4) == pytest.approx(1.0, abs=1e-15)

    def test_betainc_edges(self):
        assert betainc(2, 3, 0.0) == 0.0
        assert betainc(2, 3, 1.0) == 1.0
        assert betainc(1, 1, 0.3) == pytest.approx(0.3, abs=1e-15)
        with pytest.raises(ValueError):
            betainc(1, 1, 1.5)

    @pytest.mark.parametrize("df", range(1, 31))
    def test_against_quadrature(self, df):
        for t in [0.01, 0.5, 1.0, 1.96, 2.5, 4.0, 7.5, 10.0]:
            assert abs(t_two_sided_p(t, df) - t_two_sided_quad(t, df)) <= 1e-8
            assert abs(t_two_sided_p(-t, df) - t_two_sided_quad(t, df)) <= 1e-8


def _corpus(sizes):
    issues, preds, n = [], {}, 0
    for label, size in sizes.items():
        for _ in range(size):
            n += 1
            issue = Issue("o/r", n)
            issues.append(issue)
            preds[issue.key] = {"bug_type": label, "quantum_subtype": None}
    return issues, preds


class TestSampling:
    def test_full(self):
        issues, preds = _corpus({"Quantum": 5, "Classical": 3})
        out = stratified_sample(list(reversed(issues)), preds, 1.0, ["bug_type"], 1)
        assert out == sorted(issues, key=lambda i: i.key)

    def test_proportional(self):
        issues, preds = _corpus({"Quantum": 80, "Classical": 20})
        out = stratified_sample(issues, preds, 0.5, ["bug_type"], 7)
        counts = {"Quantum": 0, "Classical": 0}
        for i in out:
            counts[preds[i.key]["bug_type"]] += 1
        assert counts == {"Quantum": 40, "Classical": 10}

    def test_deterministic(self):
        issues, preds = _corpus({"Quantum": 30, "Classical": 17})
        a = stratified_sample(issues, preds, 0.3, ["bug_type"], 42)
        assert a == stratified_sample(list(reversed(issues)), preds, 0.3, ["bug_type"], 42)
        assert a != stratified_sample(issues, preds, 0.3, ["bug_type"], 43)

    def test_largest_remainder_total(self):
        issues, preds = _corpus({"A": 3, "B": 3, "C": 3})
        out = stratified_sample(issues, preds, 0.5, ["bug_type"], 0)
        assert len(out) == 5  # round(4.5) = 5, three remainders of .5 compete

    def test_missing_stratum_value_ineligible(self):
        issues, preds = _corpus({"Quantum": 10})
        preds[issues[0].key] = {"bug_type": "Quantum", "quantum_subtype": "Quantum Gate Errors"}
        out = stratified_sample(issues, preds, 1.0, ["quantum_subtype"], 0)
        assert out == [issues[0]]

    def test_errors(self):
        issues, preds = _corpus({"Quantum": 2})
        with pytest.raises(ValueError):
            stratified_sample([], {}, 0.5, ["bug_type"], 0)
        for bad in (0, -0.1, 1.5):
            with pytest.raises(ValueError):
                stratified_sample(issues, preds, bad, ["bug_type"], 0)

    @settings(max_examples=200)
    @given(st.lists(st.integers(1, 40), min_size=1, max_size=5), st.floats(0.01, 1.0), st.integers(0, 10**6))
    def test_sizes(self, sizes, fraction, seed):
        issues, preds = _corpus({f"S{i}": n for i, n in enumerate(sizes)})
        out = stratified_sample(issues, preds, fraction, ["bug_type"], seed)
        assert len(out) == math.floor(fraction * sum(sizes) + 0.5)
        assert len({i.key for i in out}) == len(out)
        for i, n in enumerate(sizes):
            got = sum(1 for x in out if preds[x.key]["bug_type"] == f"S{i}")
            assert abs(got - fraction * n) < 1 + 1e-9


VOCAB = {
    "bug_type": ("Quantum", "Classical", "Uncategorized"),
    "category": ("Functional", "Uncategorized"),
    "quality_attribute": ("Reliability", "Miscellaneous"),
    "severity": ("Low", "Medium", "High", "Critical"),
    "quantum_subtype": ("Gate", "Unclassified"),
}


class TestEvaluate:
    def test_identical(self):
        ann = [AnnotatedIssue(("o/r", n), {"bug_type": bt, "severity": sv})
               for n, (bt, sv) in enumerate([("Quantum", "Low"), ("Classical", "High"), ("Quantum", "Medium")], 1)]
        preds = {a.issue_key: dict(a.truth) for a in ann}
        rep = evaluate(ann, preds, default_label_codes(VOCAB), VOCAB)
        assert set(rep.dimensions) == {"bug_type", "severity"}
        for d in rep.dimensions.values():
            assert (d.accuracy, d.precision, d.recall, d.f1, d.kappa) == (1, 1, 1, 1, 1)
            assert d.t_statistic == 0.0 and d.p_value == 1.0

    def test_single_dimension(self):
        ann = [AnnotatedIssue(("o/r", 1), {"category": "Functional"}), AnnotatedIssue(("o/r", 2), {"category": "Functional"})]
        preds = {a.issue_key: {"category": "Uncategorized"} for a in ann}
        rep = evaluate(ann, preds, default_label_codes(VOCAB), VOCAB)
        assert list(rep.dimensions) == ["category"]
        assert "nominal-coding" in rep.dimensions["category"].notes

    def test_unknown_issue(self):
        ann = [AnnotatedIssue(("o/r", 99), {"severity": "Low"})]
        with pytest.raises(EvaluationError, match="o/r#99"):
            evaluate(ann, {}, default_label_codes(VOCAB))

    def test_missing_subtype_prediction_skipped(self):
        ann = [AnnotatedIssue(("o/r", n), {"quantum_subtype": "Gate"}) for n in (1, 2, 3)]
        preds = {("o/r", 1): {"quantum_subtype": "Gate"}, ("o/r", 2): {"quantum_subtype": None},
                 ("o/r", 3): {"quantum_subtype": "Gate"}}
        d = evaluate(ann, preds, default_label_codes(VOCAB), VOCAB).dimensions["quantum_subtype"]
        assert d.n == 2 and d.skipped == 1

    def test_ordinal_sign(self):
        ann = [AnnotatedIssue(("o/r", n), {"severity": "Low"}) for n in (1, 2, 3)]
        preds = {("o/r", 1): {"severity": "High"}, ("o/r", 2): {"severity": "Medium"}, ("o/r", 3): {"severity": "Low"}}
        d = evaluate(ann, preds, default_label_codes(VOCAB), VOCAB).dimensions["severity"]
        assert d.t_statistic > 0  # differences are predicted minus annotated
        assert d.notes == ()

    def test_json_serializable(self):
        ann = [AnnotatedIssue(("o/r", n), {"severity": "Low"}) for n in (1, 2)]
        preds = {a.issue_key: {"severity": "High"} for a in ann}
        rep = evaluate(ann, preds, default_label_codes(VOCAB), VOCAB)
        data = json.loads(rep.to_json())
        assert data["dimensions"][0]["t_statistic"] == "inf"
        assert "zero-variance" in data["dimensions"][0]["notes"]

    def test_annotated_issue_invariants(self):
        with pytest.raises(ValueError):
            AnnotatedIssue(("o/r", 1), {})
        with pytest.raises(ValueError):
            AnnotatedIssue(("o/r", 1), {"colour": "red"})


class TestLoadAnnotations:
    def test_unknown_label_line(self, tmp_path):
        p = tmp_path / "a.ndjson"
        p.write_text('{"repo": "o/r", "number": 1, "severity": "Low"}\n'
                     '{"repo": "o/r", "number": 2, "severity": "Blocker"}\n')
        with pytest.raises(AnnotationFormatError) as exc:
            load_annotations(p, VOCAB)
        assert exc.value.line == 2 and "Blocker" in str(exc.value)

    def test_bundled(self, synthetic_annotations_path, lexicon):
        ann = load_annotations(synthetic_annotations_path, lexicon.vocabularies())
        assert len(ann) == 40
        assert sum(1 for a in ann if "quantum_subtype" in a.truth) == 22
