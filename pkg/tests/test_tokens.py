import numpy as np
import pytest

from segcond.errors import UnknownEntityIdError
from segcond.tokens import (
    assign_labels,
    build_token_layout,
    caption_token_counts,
    patchify_labels,
    patchify_to_grid,
)

from conftest import make_instruction, random_layout


class TestAssignLabels:
    def test_no_entities(self):
        assert not assign_labels(make_instruction(4, 4, [])).any()

    def test_disjoint_entities(self):
        a = np.zeros((4, 4), dtype=bool)
        a[0, :] = True
        b = np.zeros((4, 4), dtype=bool)
        b[3, :] = True
        labels = assign_labels(make_instruction(4, 4, [a, b]))
        assert (labels[0] == 1).all() and (labels[3] == 2).all()
        assert (labels[1:3] == 0).all()

    def test_smaller_area_wins_overlap(self):
        big = np.ones((4, 4), dtype=bool)  # area 16
        small = np.zeros((4, 4), dtype=bool)
        small[0, 0:2] = True  # area 2, overlaps big everywhere it is set
        labels = assign_labels(make_instruction(4, 4, [big, small]))
        assert (labels[0, 0:2] == 2).all()
        assert (labels[big & ~small] == 1).all()

    def test_tie_breaks_to_lower_id(self):
        a = np.zeros((4, 4), dtype=bool)
        a[0, 0] = True
        b = a.copy()
        labels = assign_labels(make_instruction(4, 4, [a, b]))
        assert labels[0, 0] == 1


class TestPatchifyLabels:
    def test_identity_at_f1(self, rng):
        labels = rng.integers(0, 4, size=(5, 7))
        assert np.array_equal(patchify_labels(labels, 1), labels)

    def test_majority(self):
        labels = np.zeros((4, 4), dtype=np.int32)
        labels[0, :4] = 1  # 4 entity pixels vs 12 background
        assert patchify_labels(labels, 4)[0, 0] == 0

    def test_tie_goes_to_lower_label(self):
        labels = np.zeros((4, 4), dtype=np.int32)
        labels[:2, :] = 1  # 8 vs 8
        assert patchify_labels(labels, 4)[0, 0] == 0

    def test_truncated_edges(self):
        labels = np.ones((5, 5), dtype=np.int32)
        out = patchify_labels(labels, 4)
        assert out.shape == (2, 2)
        assert (out == 1).all()

    def test_shrinking_mask_never_grows_token_set(self, rng):
        def entity_token_count(mask, f):
            labels = assign_labels(make_instruction(12, 12, [mask]))
            return int((patchify_labels(labels, f) == 1).sum())

        for _ in range(30):
            big = rng.random((12, 12)) < 0.6
            small = big & (rng.random((12, 12)) < 0.7)
            f = int(rng.integers(2, 5))
            assert entity_token_count(small, f) <= entity_token_count(big, f)


class TestPatchifyToGrid:
    def test_exact_grid(self, rng):
        labels = rng.integers(0, 3, size=(13, 9))
        out = patchify_to_grid(labels, 4, 3)
        assert out.shape == (4, 3)

    def test_matches_patchify_on_even_split(self, rng):
        labels = rng.integers(0, 3, size=(8, 8))
        assert np.array_equal(patchify_to_grid(labels, 4, 4), patchify_labels(labels, 2))


class TestBuildTokenLayout:
    def test_worked_example(self):
        layout = build_token_layout(np.array([[0, 1]]), [2, 1])
        assert layout.text_sets[0].tolist() == [0, 1]
        assert layout.text_sets[1].tolist() == [2]
        assert layout.image_sets[0].tolist() == [3]
        assert layout.image_sets[1].tolist() == [4]
        assert layout.positions[3].tolist() == [0, 0]
        assert layout.positions[4].tolist() == [0, 1]

    def test_global_only(self):
        layout = build_token_layout(np.array([[0]]), [3])
        assert layout.text_sets[0].tolist() == [0, 1, 2]
        assert layout.image_sets[0].tolist() == [3]

    def test_entity_empty_at_token_scale(self):
        layout = build_token_layout(np.zeros((2, 2), dtype=int), [1, 1])
        assert layout.image_sets[1].size == 0
        assert layout.image_sets[0].size == 4

    def test_unknown_entity_id(self):
        with pytest.raises(UnknownEntityIdError):
            build_token_layout(np.array([[0, 7]]), [1, 1])

    def test_partition_property(self, rng):
        for _ in range(50):
            layout = random_layout(rng)
            all_imgs = np.concatenate(layout.image_sets)
            assert len(all_imgs) == layout.L_img
            assert len(np.unique(all_imgs)) == len(all_imgs)
            assert all_imgs.min() >= layout.L_text
            assert all_imgs.max() < layout.size
            all_text = np.concatenate(layout.text_sets)
            assert sorted(all_text.tolist()) == list(range(layout.L_text))

    def test_text_positions_are_origin(self, rng):
        layout = random_layout(rng)
        assert not layout.positions[:layout.L_text].any()


def test_caption_token_counts_cap():
    instr = make_instruction(4, 4, [], global_caption=" ".join(["w"] * 100))
    assert caption_token_counts(instr) == [77]
    assert caption_token_counts(instr, cap=10) == [10]
