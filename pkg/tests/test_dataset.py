import json

import numpy as np
import pytest

from layoutkit.dataset import (
    CATEGORIES,
    CATEGORY_ABBREVS,
    COLLECTIONS,
    DocumentRecord,
    ManifestError,
    RegionInstance,
    generate_anchors,
    load_manifest,
    repeat_factors,
    save_manifest,
    split_stats,
)


def write_lines(path, lines):
    path.write_text("\n".join(json.dumps(obj) for obj in lines) + "\n", encoding="utf-8")


def doc_obj(doc_id="d1", collection="PIH", split="train", regions=None):
    return {
        "document_id": doc_id,
        "collection": collection,
        "split": split,
        "height": 100,
        "width": 200,
        "regions": regions if regions is not None else [],
    }


def region_obj(cat="CLS", points=None, score=None):
    obj = {
        "category_abbrev": cat,
        "points": points if points is not None else [[1, 1], [20, 1], [20, 10], [1, 10]],
    }
    if score is not None:
        obj["score"] = score
    return obj


class TestCategoryTable:
    def test_exactly_nine_entries(self):
        assert len(CATEGORIES) == 9

    def test_abbreviations_unique(self):
        assert len(set(CATEGORY_ABBREVS)) == 9

    def test_names(self):
        names = dict(CATEGORIES)
        assert names["CLS"] == "Character Line Segment"
        assert names["CC"] == "Character Component"
        assert names["Hv"] == "Hole Virtual"
        assert names["Hp"] == "Hole Physical"
        assert names["PB"] == "Page Boundary"
        assert names["LM"] == "Library Marker"
        assert names["DP"] == "Decorator/Picture"
        assert names["PD"] == "Physical Degradation"
        assert names["BL"] == "Boundary Line"


class TestLoadManifest:
    def test_empty_file(self, tmp_path):
        path = tmp_path / "m.jsonl"
        path.write_text("", encoding="utf-8")
        assert load_manifest(path) == []

    def test_basic_roundtrip_is_identity(self, tmp_path):
        records = [
            DocumentRecord(
                "a", "PIH", "train", 100, 200,
                [RegionInstance("a", "PIH", "CLS", [[1, 2], [30, 2], [30, 9], [1, 9]], None)],
            ),
            DocumentRecord(
                "b", "Jain", "test", 80, 150,
                [RegionInstance("b", "Jain", "PB", [[0.5, 1.5], [100, 2], [50, 70]], 0.75)],
            ),
        ]
        path = tmp_path / "m.jsonl"
        save_manifest(records, path)
        loaded = load_manifest(path)
        assert len(loaded) == 2
        for orig, back in zip(records, loaded):
            assert back.document_id == orig.document_id
            assert back.collection == orig.collection
            assert back.split == orig.split
            assert (back.height, back.width) == (orig.height, orig.width)
            assert len(back.regions) == len(orig.regions)
            for r0, r1 in zip(orig.regions, back.regions):
                assert r1.category == r0.category
                assert np.array_equal(r1.polygon, r0.polygon)
                assert r1.score == r0.score

    def test_two_vertex_polygon_rejected(self, tmp_path):
        path = tmp_path / "m.jsonl"
        write_lines(path, [doc_obj(regions=[region_obj(points=[[0, 0], [5, 5]])])])
        with pytest.raises(ManifestError, match="3"):
            load_manifest(path)

    def test_unknown_category_lists_valid_abbreviations(self, tmp_path):
        path = tmp_path / "m.jsonl"
        write_lines(path, [doc_obj(regions=[region_obj(cat="XYZ")])])
        with pytest.raises(ManifestError) as err:
            load_manifest(path)
        for abbrev in CATEGORY_ABBREVS:
            assert abbrev in str(err.value)

    def test_invalid_json_reports_line(self, tmp_path):
        path = tmp_path / "m.jsonl"
        path.write_text('{"document_id": "a"\n', encoding="utf-8")
        with pytest.raises(ManifestError, match=r"m\.jsonl:1"):
            load_manifest(path)

    def test_duplicate_document_id(self, tmp_path):
        path = tmp_path / "m.jsonl"
        write_lines(path, [doc_obj("same"), doc_obj("same")])
        with pytest.raises(ManifestError, match="duplicate"):
            load_manifest(path)

    def test_unknown_collection_and_split(self, tmp_path):
        path = tmp_path / "m.jsonl"
        write_lines(path, [doc_obj(collection="Nope")])
        with pytest.raises(ManifestError, match="collection"):
            load_manifest(path)
        write_lines(path, [doc_obj(split="dev")])
        with pytest.raises(ManifestError, match="split"):
            load_manifest(path)

    def test_missing_score_rejected_when_required(self, tmp_path):
        path = tmp_path / "m.jsonl"
        write_lines(path, [doc_obj(regions=[region_obj()])])
        load_manifest(path)  # fine without scores
        with pytest.raises(ManifestError, match="score"):
            load_manifest(path, require_scores=True)

    def test_score_range_validated(self, tmp_path):
        path = tmp_path / "m.jsonl"
        write_lines(path, [doc_obj(regions=[region_obj(score=1.5)])])
        with pytest.raises(ManifestError, match="score"):
            load_manifest(path)

    def test_out_of_bounds_polygon_clamped_with_warning(self, tmp_path):
        path = tmp_path / "m.jsonl"
        write_lines(
            path,
            [doc_obj(regions=[region_obj(points=[[-5, 10], [250, 10], [100, 150]])])],
        )
        with pytest.warns(UserWarning, match="clamped"):
            records = load_manifest(path)
        poly = records[0].regions[0].polygon
        assert poly[:, 0].min() >= 0 and poly[:, 0].max() <= 200
        assert poly[:, 1].min() >= 0 and poly[:, 1].max() <= 100


class TestSplitStats:
    def test_empty_input_all_zero(self):
        stats = split_stats([])
        assert stats.grand_total() == 0
        assert all(
            stats.region_counts[c][cat] == 0 for c in COLLECTIONS for cat in CATEGORY_ABBREVS
        )

    def test_order_invariance(self, tmp_path):
        rng = np.random.default_rng(0)
        records = []
        for i in range(40):
            coll = COLLECTIONS[int(rng.integers(0, 4))]
            split = ("train", "validation", "test")[int(rng.integers(0, 3))]
            rec = DocumentRecord(f"d{i}", coll, split, 50, 50)
            for _ in range(int(rng.integers(0, 5))):
                cat = CATEGORY_ABBREVS[int(rng.integers(0, 9))]
                rec.regions.append(
                    RegionInstance(rec.document_id, coll, cat, [[0, 0], [5, 0], [5, 5]])
                )
            records.append(rec)
        forward = split_stats(records)
        shuffled = list(records)
        rng.shuffle(shuffled)
        backward = split_stats(shuffled)
        assert forward.doc_counts == backward.doc_counts
        assert forward.region_counts == backward.region_counts

    def test_fixture_manifest_pins_published_counts(self, fixtures_dir):
        records = load_manifest(fixtures_dir / "stats_manifest.jsonl")
        assert len(records) == 1275
        stats = split_stats(records)
        assert stats.doc_counts["PIH"] == {"train": 285, "validation": 70, "test": 94}
        assert stats.doc_total("Bhoomi") == 576
        assert stats.combined_region_count("CLS") == 12994


class TestRepeatFactors:
    def make(self, cats_per_doc, split="train"):
        records = []
        for i, cats in enumerate(cats_per_doc):
            rec = DocumentRecord(f"d{i}", "PIH", split, 50, 50)
            for cat in cats:
                rec.regions.append(
                    RegionInstance(rec.document_id, "PIH", cat, [[0, 0], [5, 0], [5, 5]])
                )
            records.append(rec)
        return records

    def test_all_frequent_categories_give_unit_factor(self):
        records = self.make([["CLS"], ["CLS"], ["CLS", "PB"], ["PB"]])
        factors = repeat_factors(records, threshold=0.2)
        assert all(f == 1.0 for f in factors.values())

    def test_rare_category_factor(self):
        # f(CLS) = 1, f(PB) = 1/16 = t/4 with t = 0.25 -> r(PB) = 2
        docs = [["CLS"]] * 15 + [["PB"]]
        factors = repeat_factors(self.make(docs), threshold=0.25)
        assert factors["d15"] == pytest.approx(2.0)
        assert factors["d0"] == 1.0

    def test_document_takes_max_over_categories(self):
        docs = [["CLS"]] * 15 + [["PB", "CLS"]]
        factors = repeat_factors(self.make(docs), threshold=0.25)
        assert factors["d15"] == pytest.approx(2.0)

    def test_factors_at_least_one(self):
        rng = np.random.default_rng(1)
        docs = [
            [CATEGORY_ABBREVS[int(rng.integers(0, 9))] for _ in range(int(rng.integers(0, 3)))]
            for _ in range(30)
        ]
        factors = repeat_factors(self.make(docs), threshold=0.5)
        assert all(f >= 1.0 for f in factors.values())

    def test_threshold_domain(self):
        records = self.make([["CLS"]])
        with pytest.raises(ValueError):
            repeat_factors(records, threshold=0.0)
        with pytest.raises(ValueError):
            repeat_factors(records, threshold=1.5)

    def test_requires_train_split(self):
        records = self.make([["CLS"]], split="test")
        with pytest.raises(ValueError, match="train"):
            repeat_factors(records)

    def test_monotone_non_increasing_in_category_frequency(self):
        # adding more documents containing PB raises f(PB), never the factor
        previous = np.inf
        for n_pb in (1, 2, 4, 8):
            docs = [["CLS"]] * 16 + [["PB"]] * n_pb
            factors = repeat_factors(self.make(docs), threshold=0.5)
            current = factors["d16"]  # a PB document
            assert current <= previous
            previous = current


class TestGenerateAnchors:
    def test_default_count(self):
        assert generate_anchors().shape == (15, 2)

    def test_square_case(self):
        anchors = generate_anchors(sizes=(32,), ratios=(1.0,))
        assert anchors[0] == pytest.approx([32.0, 32.0])

    def test_wide_case(self):
        anchors = generate_anchors(sizes=(32,), ratios=(0.5,))
        w, h = anchors[0]
        assert w == pytest.approx(45.254834, abs=1e-6)
        assert h == pytest.approx(22.627417, abs=1e-6)
        assert w * h == pytest.approx(1024.0, rel=1e-6)

    def test_area_preserved_for_all(self):
        anchors = generate_anchors()
        sizes = np.repeat([32, 64, 128, 256, 512], 3).astype(float)
        areas = anchors[:, 0] * anchors[:, 1]
        assert np.allclose(areas, sizes**2, rtol=1e-6)

    def test_ratio_convention_is_height_over_width(self):
        anchors = generate_anchors(sizes=(100,), ratios=(2.0,))
        w, h = anchors[0]
        assert h / w == pytest.approx(2.0, rel=1e-12)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            generate_anchors(sizes=(0,))
        with pytest.raises(ValueError):
            generate_anchors(ratios=(-1.0,))
