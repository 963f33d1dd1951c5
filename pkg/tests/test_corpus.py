import json

import pytest

from capeval.corpus import (
    CaptionInstance,
    CorrelationKind,
    Dataset,
    DatasetError,
    DatasetName,
    PairInstance,
    aggregate_cf_ratings,
    apply_overlap_policy,
    filter_reformulations,
    load_dataset,
    save_dataset,
    select_composite_records,
)


def write_jsonl(path, records):
    path.write_text("\n".join(json.dumps(r) for r in records) + "\n")


def rating_rec(i, image=None, cand="a dog runs", refs=("a dog running",),
               rating=2.0, split="unsplit"):
    return {
        "instance_id": f"i{i}", "image_id": image or f"img{i}",
        "candidate": cand, "references": list(refs),
        "rating": rating, "split": split,
    }


def pair_rec(i, cat="HC", va=30, vb=18, refs=("ref one", "ref two"),
             a="caption a", b="caption b"):
    return {
        "pair_id": f"p{i}", "image_id": f"img{i}",
        "candidate_a": a, "candidate_b": b, "references": list(refs),
        "preferred": None, "category": cat, "votes_a": va, "votes_b": vb,
    }


class TestLoadSave:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "d.jsonl"
        write_jsonl(path, [rating_rec(0), rating_rec(1, rating=3.5)])
        ds = load_dataset(path, DatasetName.COMPOSITE)
        assert ds.name is DatasetName.COMPOSITE
        assert ds.correlation_kind is CorrelationKind.TAU_C
        assert ds.rating_range == (1.0, 5.0)
        assert len(ds.instances) == 2

        out = tmp_path / "out.jsonl"
        save_dataset(ds, out)
        assert load_dataset(out, DatasetName.COMPOSITE) == ds

    def test_pair_round_trip(self, tmp_path):
        path = tmp_path / "p.jsonl"
        write_jsonl(path, [pair_rec(0), pair_rec(1, cat="MM", va=24, vb=24)])
        ds = load_dataset(path, DatasetName.PASCAL50S)
        assert ds.is_pair_dataset
        assert ds.correlation_kind is CorrelationKind.PAIRWISE_ONLY
        out = tmp_path / "out.jsonl"
        save_dataset(ds, out)
        assert load_dataset(out, DatasetName.PASCAL50S) == ds

    def test_string_name_accepted(self, tmp_path):
        path = tmp_path / "d.jsonl"
        write_jsonl(path, [rating_rec(0, rating=0.5)])
        ds = load_dataset(path, "Flickr8kCF")
        assert ds.name is DatasetName.FLICKR8K_CF
        assert ds.correlation_kind is CorrelationKind.TAU_B

    def test_kind_assignments(self):
        expected = {
            DatasetName.FLICKR8K_EXPERT: CorrelationKind.TAU_C,
            DatasetName.FLICKR8K_CF: CorrelationKind.TAU_B,
            DatasetName.COMPOSITE: CorrelationKind.TAU_C,
            DatasetName.THUMB: CorrelationKind.PEARSON,
            DatasetName.POLARIS: CorrelationKind.TAU_C,
            DatasetName.PASCAL50S: CorrelationKind.PAIRWISE_ONLY,
            DatasetName.REFORMULATIONS: CorrelationKind.PAIRWISE_ONLY,
        }
        from capeval.corpus import _DATASET_SPECS
        for name, kind in expected.items():
            assert _DATASET_SPECS[name][1] is kind

    def test_duplicate_instance_id(self, tmp_path):
        path = tmp_path / "d.jsonl"
        write_jsonl(path, [rating_rec(0), rating_rec(0)])
        with pytest.raises(DatasetError, match="duplicate instance_id"):
            load_dataset(path, DatasetName.CUSTOM)

    def test_rating_out_of_range(self, tmp_path):
        path = tmp_path / "d.jsonl"
        write_jsonl(path, [rating_rec(0, rating=9.0)])
        with pytest.raises(DatasetError, match="line 1.*outside declared range"):
            load_dataset(path, DatasetName.FLICKR8K_EXPERT)

    def test_invalid_json_reports_line(self, tmp_path):
        path = tmp_path / "d.jsonl"
        path.write_text(json.dumps(rating_rec(0)) + "\nnot json\n")
        with pytest.raises(DatasetError, match="line 2"):
            load_dataset(path, DatasetName.CUSTOM)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "d.jsonl"
        path.write_text("\n")
        with pytest.raises(DatasetError, match="no records"):
            load_dataset(path, DatasetName.CUSTOM)

    def test_unknown_split(self, tmp_path):
        path = tmp_path / "d.jsonl"
        write_jsonl(path, [rating_rec(0, split="dev")])
        with pytest.raises(DatasetError, match="unknown split"):
            load_dataset(path, DatasetName.CUSTOM)

    def test_bad_pair_category(self, tmp_path):
        path = tmp_path / "p.jsonl"
        write_jsonl(path, [pair_rec(0, cat="XX")])
        with pytest.raises(DatasetError, match="category"):
            load_dataset(path, DatasetName.PASCAL50S)

    def test_reformulations_category_enforced(self, tmp_path):
        path = tmp_path / "p.jsonl"
        write_jsonl(path, [pair_rec(0, cat="HC")])
        with pytest.raises(DatasetError, match="REF"):
            load_dataset(path, DatasetName.REFORMULATIONS)

    def test_dataset_cannot_hold_both(self):
        with pytest.raises(DatasetError):
            Dataset(
                name=DatasetName.CUSTOM,
                instances=(CaptionInstance("i", "m", "c", ("r",)),),
                pairs=(PairInstance("p", "m", "a", "b", ("r",)),),
            )


class TestOverlapPolicy:
    def _expert(self, instances):
        return Dataset(name=DatasetName.FLICKR8K_EXPERT,
                       instances=tuple(instances), rating_range=(1.0, 4.0),
                       correlation_kind=CorrelationKind.TAU_C)

    def test_candidate_side_removal(self):
        shared = "A dog runs in the park."
        ds = self._expert([
            CaptionInstance("i0", "img", shared, ("ref a", shared), 3.0),
            CaptionInstance("i1", "img", "something else", ("ref a", shared), 2.0),
        ])
        out = apply_overlap_policy(ds)
        assert [i.instance_id for i in out.instances] == ["i1"]
        # reference lists untouched on candidate-side datasets
        assert out.instances[0].references == ("ref a", shared)

    def test_candidate_side_matches_whitespace_variants(self):
        ds = self._expert([
            CaptionInstance("i0", "img", "a  dog \t runs", ("a dog runs",), 3.0),
        ])
        assert apply_overlap_policy(ds).instances == ()

    def test_reference_side_removal(self):
        shared = "a dog runs"
        ds = Dataset(
            name=DatasetName.THUMB,
            instances=(
                CaptionInstance("i0", "img", shared, ("other ref", shared), 3.0),
                CaptionInstance("i1", "img", "different", ("other ref", shared), 2.0),
            ),
            rating_range=(0.0, 5.0),
            correlation_kind=CorrelationKind.PEARSON,
        )
        out = apply_overlap_policy(ds)
        assert len(out.instances) == 2
        # the candidate sentence disappears from every reference list of the image
        for inst in out.instances:
            assert shared not in inst.references
            assert "other ref" in inst.references

    def test_reference_side_drops_zero_reference_instances(self):
        ds = Dataset(
            name=DatasetName.FLICKR8K_CF,
            instances=(
                CaptionInstance("i0", "img", "only ref", ("only ref",), 0.5),
            ),
            rating_range=(0.0, 1.0),
            correlation_kind=CorrelationKind.TAU_B,
        )
        assert apply_overlap_policy(ds).instances == ()

    def test_idempotent(self):
        shared = "a dog runs"
        ds = Dataset(
            name=DatasetName.COMPOSITE,
            instances=(
                CaptionInstance("i0", "img", shared, ("keep me", shared), 3.0),
            ),
            rating_range=(1.0, 5.0),
            correlation_kind=CorrelationKind.TAU_C,
        )
        once = apply_overlap_policy(ds)
        assert apply_overlap_policy(once) == once

    def test_pair_and_custom_datasets_untouched(self, tmp_path):
        path = tmp_path / "p.jsonl"
        write_jsonl(path, [pair_rec(0)])
        ds = load_dataset(path, DatasetName.PASCAL50S)
        assert apply_overlap_policy(ds) == ds

        ds2 = Dataset(
            name=DatasetName.CUSTOM,
            instances=(CaptionInstance("i0", "img", "x", ("x",), None),),
        )
        assert apply_overlap_policy(ds2) == ds2


class TestHelpers:
    def test_aggregate_cf_ratings(self):
        assert aggregate_cf_ratings([1, 0, 1]) == pytest.approx(2 / 3)
        assert aggregate_cf_ratings([0, 0]) == 0.0
        with pytest.raises(DatasetError):
            aggregate_cf_ratings([])
        with pytest.raises(DatasetError):
            aggregate_cf_ratings([1, 2])

    def test_select_composite_records(self):
        raw = {
            "imgA": [
                {"candidate": f"cand {k}", "references": ["r1", "r2"],
                 "correctness": k + 1, "thoroughness": 5}
                for k in range(4)
            ],
            "imgB": [
                {"candidate": f"cand {k}", "references": ["r"],
                 "correctness": 2, "thoroughness": 1}
                for k in range(3)
            ],
        }
        out = select_composite_records(raw)
        # fourth candidate of imgA discarded; rating = correctness
        assert len(out) == 6
        a = [i for i in out if i.image_id == "imgA"]
        assert [i.rating for i in a] == [1.0, 2.0, 3.0]
        assert all("cand 3" != i.candidate for i in a)

    def test_select_composite_rejects_bad_count(self):
        with pytest.raises(DatasetError, match="3 or 4"):
            select_composite_records({"img": [{"candidate": "c",
                                               "correctness": 1}] * 5})

    def test_filter_reformulations(self):
        keep = PairInstance("p0", "m", "a cat", "a dog", ("r",), category="REF")
        drop = PairInstance("p1", "m", "same  text", "same text", ("r",),
                            category="REF")
        assert filter_reformulations([keep, drop]) == [keep]
