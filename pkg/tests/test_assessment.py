import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pbrnn import assessment as am, core_math, reference_matrices as rm
from pbrnn.errors import ShapeError, UndefinedStatisticError
from pbrnn.sampling import NODATA_LABEL, LabelMap


def small_matrix(counts, names=None):
    counts = np.asarray(counts)
    names = names or tuple(f"c{i}" for i in range(counts.shape[0]))
    return am.ErrorMatrix(counts=counts, class_names=names)


class TestOverallAccuracy:
    def test_pb_rnn_table(self):
        m = rm.PUBLISHED["pb-rnn"].matrix()
        assert m.n == 931
        assert round(100 * am.overall_accuracy(m), 2) == 97.21

    def test_pixel_single_table(self):
        m = rm.PUBLISHED["pixel-nn-single"].matrix()
        assert round(100 * am.overall_accuracy(m), 2) == 64.74

    def test_identity(self):
        assert am.overall_accuracy(small_matrix([[5, 0], [0, 5]])) == 1.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            am.overall_accuracy(small_matrix([[0, 0], [0, 0]]))


class TestOverallKappa:
    def test_pb_rnn_cross_product_sum(self):
        m = rm.PUBLISHED["pb-rnn"].matrix()
        assert int(np.dot(m.row_totals, m.col_totals)) == 128615
        assert am.overall_kappa(m) == pytest.approx(713940 / 738146, abs=1e-12)
        assert round(am.overall_kappa(m), 3) == 0.967

    def test_pixel_rnn_kappa(self):
        m = rm.PUBLISHED["pixel-rnn"].matrix()
        assert round(am.overall_kappa(m), 3) == 0.855

    def test_perfect_balanced(self):
        assert am.overall_kappa(small_matrix([[5, 0], [0, 5]])) == 1.0

    def test_degenerate_denominator(self):
        with pytest.raises(UndefinedStatisticError):
            am.overall_kappa(small_matrix([[7, 0], [0, 0]]))


class TestPerClass:
    def test_pb_rnn_high_intensity_urban(self):
        m = rm.PUBLISHED["pb-rnn"].matrix()
        pa, ua = am.producer_user_accuracy(m, 0)
        assert round(100 * pa, 2) == 97.47
        assert round(100 * ua, 2) == 97.47

    def test_pb_rnn_barren_land(self):
        m = rm.PUBLISHED["pb-rnn"].matrix()
        pa, ua = am.producer_user_accuracy(m, 2)
        assert round(100 * pa, 2) == 98.04
        assert ua == 1.0
        assert am.conditional_kappa(m, 2) == 1.0

    def test_pb_rnn_conditional_kappas(self):
        m = rm.PUBLISHED["pb-rnn"].matrix()
        assert am.conditional_kappa(m, 0) == pytest.approx(118410 / 122134, abs=1e-12)
        assert am.conditional_kappa(m, 1) == pytest.approx(68947 / 73602, abs=1e-12)
        assert round(am.conditional_kappa(m, 0), 2) == 0.97
        assert round(am.conditional_kappa(m, 1), 2) == 0.94

    def test_diagonal_matrix_all_ones(self):
        m = small_matrix(np.diag([3, 4, 5]))
        for i in range(3):
            pa, ua = am.producer_user_accuracy(m, i)
            assert pa == ua == 1.0

    def test_zero_totals_give_none(self):
        m = small_matrix([[2, 1, 0], [0, 3, 0], [0, 0, 0]])
        pa, ua = am.producer_user_accuracy(m, 2)
        assert pa is None and ua is None
        with pytest.raises(UndefinedStatisticError):
            am.conditional_kappa(m, 2)


class TestFullReport:
    def test_pb_rnn_summary(self):
        report = am.full_report(rm.PUBLISHED["pb-rnn"].matrix())
        assert round(100 * report.overall_accuracy, 2) == 97.21
        assert round(report.overall_kappa, 3) == 0.967
        assert round(report.mean_conditional_kappa, 2) == 0.97
        assert round(report.std_conditional_kappa, 2) == 0.02

    def test_patch_multi_summary(self):
        report = am.full_report(rm.PUBLISHED["patch-nn-multi"].matrix())
        assert round(100 * report.overall_accuracy, 2) == 77.63
        assert round(report.overall_kappa, 3) == 0.737

    def test_pixel_multi_summary(self):
        report = am.full_report(rm.PUBLISHED["pixel-nn-multi"].matrix())
        assert round(100 * report.overall_accuracy, 2) == 66.40
        assert round(report.overall_kappa, 3) == 0.602

    def test_format_report_mentions_all_classes(self):
        report = am.full_report(rm.PUBLISHED["pb-rnn"].matrix())
        text = am.format_report(report)
        for name in rm.CLASS_NAMES:
            assert name in text
        assert "97.21" in text and "0.967" in text


class TestPublishedVerification:
    def test_all_tables_reproduce(self):
        results = rm.verify_published_tables()
        assert set(results) == set(rm.PUBLISHED)
        for name, diffs in results.items():
            assert diffs == [], f"{name}: {[str(d) for d in diffs]}"

    def test_perturbed_count_detected(self):
        pub = rm.PUBLISHED["pb-rnn"]
        counts = [list(row) for row in pub.counts]
        counts[2][0] += 1  # Barren Land: published user's accuracy is exactly 100%
        perturbed = rm.PublishedAssessment(
            system=pub.system, counts=tuple(tuple(r) for r in counts),
            oa_percent=pub.oa_percent, kappa=pub.kappa,
            producer_percent=pub.producer_percent, user_percent=pub.user_percent,
            conditional_kappa=pub.conditional_kappa,
            mean_kappa=pub.mean_kappa, kappa_sd=pub.kappa_sd)
        assert rm.check_table(perturbed)


class TestMatrixInvariants:
    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.lists(st.integers(0, 50), min_size=3, max_size=3),
                    min_size=3, max_size=3))
    def test_kappa_at_most_one_and_diagonal_iff_one(self, rows):
        counts = np.array(rows)
        m = small_matrix(counts)
        if m.n == 0:
            return
        try:
            kappa = am.overall_kappa(m)
        except UndefinedStatisticError:
            return
        assert kappa <= 1.0 + 1e-12
        off_diagonal = m.n - np.trace(counts)
        if kappa == pytest.approx(1.0, abs=1e-12):
            assert off_diagonal == 0
        if off_diagonal == 0:
            assert kappa == pytest.approx(1.0, abs=1e-12)

    def test_permutation_equivariance(self):
        m = rm.PUBLISHED["pixel-rnn"].matrix()
        perm = np.array([3, 1, 7, 0, 6, 2, 5, 4])
        permuted = am.ErrorMatrix(counts=m.counts[np.ix_(perm, perm)],
                                  class_names=tuple(m.class_names[i] for i in perm))
        base = am.full_report(m)
        other = am.full_report(permuted)
        assert other.overall_accuracy == pytest.approx(base.overall_accuracy, abs=1e-15)
        assert other.overall_kappa == pytest.approx(base.overall_kappa, abs=1e-15)
        for new_idx, old_idx in enumerate(perm):
            assert other.conditional_kappa[new_idx] == pytest.approx(
                base.conditional_kappa[old_idx], abs=1e-15)
            assert other.producer_accuracy[new_idx] == pytest.approx(
                base.producer_accuracy[old_idx], abs=1e-15)

    @given(st.integers(2, 9))
    def test_count_scaling_invariance(self, factor):
        m = rm.PUBLISHED["patch-nn-single"].matrix()
        scaled = am.ErrorMatrix(counts=m.counts * factor, class_names=m.class_names)
        assert am.overall_accuracy(scaled) == pytest.approx(am.overall_accuracy(m), abs=1e-12)
        assert am.overall_kappa(scaled) == pytest.approx(am.overall_kappa(m), abs=1e-12)
        for i in range(m.k):
            assert am.conditional_kappa(scaled, i) == pytest.approx(
                am.conditional_kappa(m, i), abs=1e-12)


class TestStratifiedSampling:
    def test_identical_maps_give_diagonal(self):
        labels = (np.arange(400) % 4).reshape(20, 20).astype(np.uint8)
        lm = LabelMap(labels=labels)
        design = am.StratifiedDesign(per_stratum={i: 30 for i in range(4)}, seed=3)
        m = am.build_error_matrix(lm, lm, design, [f"c{i}" for i in range(4)])
        assert np.trace(m.counts) == m.n == 120
        assert np.all(m.counts == np.diag(np.diag(m.counts)))

    def test_grand_total_bounded_by_design(self):
        rng = core_math.make_rng(4)
        labels = rng.integers(0, 8, size=(40, 40)).astype(np.uint8)
        lm = LabelMap(labels=labels)
        design = am.StratifiedDesign(per_stratum={i: 50 for i in range(8)}, seed=5)
        m = am.build_error_matrix(lm, lm, design, [f"c{i}" for i in range(8)])
        assert m.n <= 400
        assert np.all(m.row_totals <= 50)

    def test_population_shortfall_takes_all(self, caplog):
        labels = np.zeros((10, 10), dtype=np.uint8)
        labels[0, :3] = 1  # only 3 pixels of class 1
        lm = LabelMap(labels=labels)
        design = am.StratifiedDesign(per_stratum={0: 20, 1: 50}, seed=6)
        with caplog.at_level("WARNING"):
            m = am.build_error_matrix(lm, lm, design, ["a", "b"])
        assert m.row_totals[1] == 3
        assert any("taking all" in r.getMessage() for r in caplog.records)

    def test_known_confusion_rate_recovered(self):
        # two-class map with 10% of each class flipped: off-diagonal fraction
        # lands within 3 points of 10% at 500 samples per stratum
        rng = core_math.make_rng(7)
        reference = (rng.uniform(size=(120, 120)) < 0.5).astype(np.uint8)
        classified = reference.copy()
        flip = rng.uniform(size=classified.shape) < 0.10
        classified[flip] = 1 - classified[flip]
        design = am.StratifiedDesign(per_stratum={0: 500, 1: 500}, seed=8)
        m = am.build_error_matrix(LabelMap(labels=classified), LabelMap(labels=reference),
                                  design, ["a", "b"])
        off_fraction = 1.0 - np.trace(m.counts) / m.n
        assert abs(off_fraction - 0.10) < 0.03

    def test_area_proportional_allocation_with_floor(self):
        sizes = am.allocate_stratum_sizes({0: 9000, 1: 900, 2: 100},
                                          am.StratifiedDesign(total_target=1000,
                                                              min_per_stratum=50))
        assert sizes[0] == 900
        assert sizes[1] == 90
        assert sizes[2] == 50  # floored

    def test_nodata_excluded(self):
        labels = np.zeros((10, 10), dtype=np.uint8)
        reference = labels.copy()
        reference[:5] = NODATA_LABEL
        design = am.StratifiedDesign(per_stratum={0: 40}, seed=9)
        m = am.build_error_matrix(LabelMap(labels=labels), LabelMap(labels=reference),
                                  design, ["a"])
        assert m.n == 40  # only the 50 valid pixels were eligible

    def test_deterministic_given_seed(self):
        rng = core_math.make_rng(10)
        classified = rng.integers(0, 3, size=(30, 30)).astype(np.uint8)
        reference = rng.integers(0, 3, size=(30, 30)).astype(np.uint8)
        design = am.StratifiedDesign(per_stratum={i: 40 for i in range(3)}, seed=11)
        names = ["a", "b", "c"]
        m1 = am.build_error_matrix(LabelMap(labels=classified), LabelMap(labels=reference),
                                   design, names)
        m2 = am.build_error_matrix(LabelMap(labels=classified), LabelMap(labels=reference),
                                   design, names)
        assert np.array_equal(m1.counts, m2.counts)

    def test_map_shape_mismatch(self):
        with pytest.raises(ShapeError):
            am.build_error_matrix(LabelMap(labels=np.zeros((3, 3), dtype=np.uint8)),
                                  LabelMap(labels=np.zeros((4, 3), dtype=np.uint8)),
                                  am.StratifiedDesign(), ["a"])


class TestMatrixIO:
    def test_tsv_round_trip(self, tmp_path):
        m = rm.PUBLISHED["pb-rnn"].matrix()
        path = tmp_path / "matrix.tsv"
        am.save_error_matrix(path, m)
        back = am.load_error_matrix(path)
        assert np.array_equal(back.counts, m.counts)
        assert back.class_names == m.class_names

    def test_ragged_rejected(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("h\ta\tb\na\t1\t2\nb\t3\n", encoding="utf-8")
        with pytest.raises(Exception):
            am.load_error_matrix(path)
