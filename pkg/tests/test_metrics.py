"""Metric contracts, checked against independent brute-force oracles."""

import numpy as np
import pytest

from hsiseg import (
    INVALID_LABEL,
    ConfigurationError,
    LabelMap,
    SegmentationMask,
    StructuralError,
    class_boundary,
    dsc,
    evaluate_image,
    nsd,
)

from oracles import boundary_oracle, dsc_oracle, nsd_oracle


def _mask(array) -> SegmentationMask:
    return SegmentationMask(np.asarray(array, dtype=np.uint8))


def _random_pair(g, h, w, classes, invalid_fraction=0.15):
    pred = g.integers(0, classes, size=(h, w)).astype(np.uint8)
    ref = g.integers(0, classes, size=(h, w)).astype(np.uint8)
    ref[g.random((h, w)) < invalid_fraction] = INVALID_LABEL
    return pred, ref


class TestBoundary:
    def test_hand_case(self):
        # 3x3 solid block inside 5x5: interior pixel is not boundary.
        member = np.zeros((5, 5), dtype=bool)
        member[1:4, 1:4] = True
        expected = member.copy()
        expected[2, 2] = False
        assert np.array_equal(class_boundary(member), expected)

    def test_image_edge_counts_as_boundary(self):
        member = np.ones((3, 4), dtype=bool)
        boundary = class_boundary(member)
        assert boundary[0].all() and boundary[-1].all()
        assert boundary[:, 0].all() and boundary[:, -1].all()
        assert not boundary[1, 1]

    def test_matches_oracle_on_random_sets(self):
        g = np.random.default_rng(10)
        for _ in range(200):
            member = g.random((g.integers(1, 20), g.integers(1, 20))) < 0.4
            assert np.array_equal(class_boundary(member), boundary_oracle(member))


class TestDsc:
    def test_identity_is_one(self):
        m = _mask([[0, 1], [1, 0]])
        assert dsc(m, m, 1) == 1.0

    def test_disjoint_equal_sets_zero(self):
        pred = _mask([[1, 1], [0, 0]])
        ref = _mask([[0, 0], [1, 1]])
        assert dsc(pred, ref, 1) == 0.0

    def test_hand_value(self):
        # |P| = |R| = 4, overlap 2 -> 0.5
        pred = _mask([[1, 1, 1, 1, 0, 0]])
        ref = _mask([[0, 0, 1, 1, 1, 1]])
        assert dsc(pred, ref, 1) == 0.5

    def test_worked_prediction_example(self):
        # |P| = |R| = 20, overlap 17 -> 2*17/40 = 0.85 exactly
        pred = np.zeros((5, 8), dtype=np.uint8)
        ref = np.zeros((5, 8), dtype=np.uint8)
        pred.flat[:20] = 1
        ref.flat[3:23] = 1
        assert dsc(_mask(pred), _mask(ref), 1) == 0.85

    def test_absent_from_both_gives_none(self):
        m = _mask([[0, 0]])
        assert dsc(m, m, 3) is None

    def test_symmetry(self):
        g = np.random.default_rng(11)
        for _ in range(50):
            pred, ref = _random_pair(g, 9, 9, 3, invalid_fraction=0.0)
            for label in range(3):
                assert dsc(_mask(pred), _mask(ref), label) == dsc(_mask(ref), _mask(pred), label)

    def test_invalid_reference_excluded_from_both(self):
        pred = _mask([[1, 1]])
        ref = _mask([[1, INVALID_LABEL]])
        # Second column is excluded even though pred claims class 1 there.
        assert dsc(pred, ref, 1) == 1.0

    def test_shape_mismatch(self):
        with pytest.raises(StructuralError):
            dsc(_mask([[0]]), _mask([[0, 0]]), 0)


class TestNsd:
    def test_identity_is_one(self):
        m = _mask([[0, 1, 0], [1, 1, 1], [0, 1, 0]])
        assert nsd(m, m, 1, 1.0) == 1.0

    def test_far_boundaries_zero(self):
        pred = np.zeros((3, 20), dtype=np.uint8)
        ref = np.zeros((3, 20), dtype=np.uint8)
        pred[:, :2] = 1
        ref[:, -2:] = 1
        assert nsd(_mask(pred), _mask(ref), 1, 3.0) == 0.0

    def test_one_pixel_translation_tau_one(self):
        # A square shifted by one pixel: every boundary pixel within 1 px.
        pred = np.zeros((8, 8), dtype=np.uint8)
        ref = np.zeros((8, 8), dtype=np.uint8)
        pred[2:5, 2:5] = 1
        ref[2:5, 3:6] = 1
        value = nsd(_mask(pred), _mask(ref), 1, 1.0)
        assert value == 1.0
        assert value == nsd_oracle(pred, ref, 1, 1.0)

    def test_tau_validation(self):
        m = _mask([[1]])
        with pytest.raises(ConfigurationError):
            nsd(m, m, 1, 0.0)

    def test_absent_from_both_gives_none(self):
        m = _mask([[0]])
        assert nsd(m, m, 2, 1.0) is None

    def test_one_sided_presence_defined(self):
        pred = _mask([[1, 0]])
        ref = _mask([[0, 0]])
        assert nsd(pred, ref, 1, 1.0) == 0.0

    def test_symmetry(self):
        g = np.random.default_rng(12)
        for _ in range(25):
            pred, ref = _random_pair(g, 10, 10, 3, invalid_fraction=0.0)
            for label in range(3):
                a = nsd(_mask(pred), _mask(ref), label, 2.0)
                b = nsd(_mask(ref), _mask(pred), label, 2.0)
                assert a == b

    def test_matches_oracle_exactly(self):
        g = np.random.default_rng(13)
        for _ in range(100):
            h, w = int(g.integers(2, 20)), int(g.integers(2, 20))
            pred, ref = _random_pair(g, h, w, 4)
            tau = float(g.choice([1.0, 2.0, 3.0]))
            for label in range(4):
                expected = nsd_oracle(pred, ref, label, tau)
                actual = nsd(_mask(pred), _mask(ref), label, tau)
                assert actual == expected

    def test_translation_invariance(self):
        g = np.random.default_rng(14)
        pred, ref = _random_pair(g, 10, 10, 3, invalid_fraction=0.0)
        pad_pred = np.zeros((14, 14), dtype=np.uint8)
        pad_ref = np.zeros((14, 14), dtype=np.uint8)
        # Content placed away from the frame so edges don't change boundaries;
        # embed at two offsets and compare.
        for dy, dx in ((1, 1), (3, 2)):
            pad_pred[:] = 2  # constant surround, same class everywhere
            pad_ref[:] = 2
            pad_pred[dy : dy + 10, dx : dx + 10] = pred
            pad_ref[dy : dy + 10, dx : dx + 10] = ref
            if (dy, dx) == (1, 1):
                first = [
                    (dsc(_mask(pad_pred), _mask(pad_ref), l), nsd(_mask(pad_pred), _mask(pad_ref), l, 2.0))
                    for l in (0, 1)
                ]
            else:
                second = [
                    (dsc(_mask(pad_pred), _mask(pad_ref), l), nsd(_mask(pad_pred), _mask(pad_ref), l, 2.0))
                    for l in (0, 1)
                ]
        assert first == second


class TestEvaluateImage:
    def test_identical_three_class_masks_give_six_ones(self, labelmap5):
        m = _mask([[0, 1, 2], [2, 1, 0]])
        records = evaluate_image(m, m, labelmap5, image_id="x", subject_id="P01", scenario="original")
        assert len(records) == 6
        assert all(r.value == 1.0 for r in records)
        assert {r.metric for r in records} == {"DSC", "NSD"}
        assert records[0].image_id == "x"
        assert records[0].subject_id == "P01"
        assert records[0].scenario == "original"

    def test_class_missing_from_pred_scores_zero_dsc(self, labelmap5):
        pred = _mask([[0, 0]])
        ref = _mask([[0, 1]])
        records = evaluate_image(pred, ref, labelmap5)
        dsc_records = {r.class_name: r.value for r in records if r.metric == "DSC"}
        assert dsc_records["liver"] == 0.0

    def test_all_invalid_reference_empty(self, labelmap5):
        pred = _mask([[1, 2]])
        ref = _mask([[INVALID_LABEL, INVALID_LABEL]])
        assert evaluate_image(pred, ref, labelmap5) == []

    def test_support_is_reference_pixel_count(self, labelmap5):
        pred = _mask([[1, 1, 1]])
        ref = _mask([[1, 1, 0]])
        records = evaluate_image(pred, ref, labelmap5)
        by_class = {(r.class_name, r.metric): r.support for r in records}
        assert by_class[("liver", "DSC")] == 2
        assert by_class[("background", "DSC")] == 1

    def test_unknown_label_rejected(self):
        lm = LabelMap.from_names(["background", "liver"])
        m = _mask([[5]])
        with pytest.raises(StructuralError, match="label"):
            evaluate_image(m, m, lm)

    def test_uses_per_class_thresholds(self):
        from hsiseg import LabelClass

        lm = LabelMap(
            [
                LabelClass(0, "background", is_background=True, nsd_threshold=1.0),
                LabelClass(1, "liver", nsd_threshold=10.0),
            ]
        )
        pred = np.zeros((6, 6), dtype=np.uint8)
        ref = np.zeros((6, 6), dtype=np.uint8)
        pred[0, 0] = 1
        ref[5, 5] = 1
        records = {r.metric: r.value for r in evaluate_image(_mask(pred), _mask(ref), lm) if r.class_name == "liver"}
        # distance ~7.07 < 10 so the generous class threshold scores 1.0
        assert records["NSD"] == 1.0


class TestDscNsdRandomizedOracle:
    def test_dsc_matches_set_formula(self):
        g = np.random.default_rng(15)
        for _ in range(100):
            pred, ref = _random_pair(g, int(g.integers(1, 16)), int(g.integers(1, 16)), 5)
            for label in range(5):
                assert dsc(_mask(pred), _mask(ref), label) == dsc_oracle(pred, ref, label)
