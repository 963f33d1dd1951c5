import numpy as np
import pytest

from capeval.scores import (
    MetricDescriptor,
    ScoreError,
    ScoreMatrix,
    ingest_external,
    join,
    lookup_metric,
    registry,
)


def wide_csv(tmp_path, name, header, rows, comments=()):
    path = tmp_path / name
    lines = list(comments) + [",".join(header)] + [",".join(map(str, r)) for r in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


class TestRegistry:
    def test_known_metrics(self):
        polos = lookup_metric("Polos")
        assert isinstance(polos, MetricDescriptor)
        assert polos.taxonomy_category == "Human rating prediction"
        assert lookup_metric("CIDEr").declared_range == (0.0, 10.0)
        assert lookup_metric("CIDEr").provider == "native"
        assert lookup_metric("BLIP2Score").provider == "external"

    def test_unknown_metric(self):
        assert lookup_metric("NotAMetric") is None

    def test_registry_order_is_stable(self):
        names = [d.name for d in registry()]
        assert names.index("BLEU1") < names.index("CIDEr") < names.index("Polos")
        assert len(names) == len(set(names)) == 20

    def test_categories_cover_taxonomy(self):
        cats = {d.taxonomy_category for d in registry()}
        assert cats == {
            "Lexical similarity",
            "Phrase semantic similarity",
            "Sentence semantic similarity",
            "Image similarity",
            "Multiple source similarity",
            "Human rating prediction",
        }


class TestScoreMatrix:
    def test_missing_cells_and_finalize(self):
        m = ScoreMatrix.empty(["i0", "i1"], ["BLEU1"])
        assert m.missing_cells() == [("i0", "BLEU1"), ("i1", "BLEU1")]
        with pytest.raises(ScoreError, match="missing cell"):
            m.finalize()
        m.set(0, 0, 0.5)
        m.set(1, 0, 0.7)
        assert m.finalize() is m
        assert m.get("i1", "BLEU1") == 0.7
        assert list(m.column("BLEU1")) == [0.5, 0.7]
        assert m.row("i0") == {"BLEU1": 0.5}

    def test_duplicate_ids_rejected(self):
        with pytest.raises(ScoreError):
            ScoreMatrix.empty(["i0", "i0"], ["BLEU1"])
        with pytest.raises(ScoreError):
            ScoreMatrix.empty(["i0"], ["BLEU1", "BLEU1"])

    def test_save_round_trip_17_digits(self, tmp_path):
        vals = np.array([[1 / 3, 0.1], [np.pi / 10, 1e-17]])
        m = ScoreMatrix(["i0", "i1"], ["BLEU1", "ROUGE"], vals)
        path = tmp_path / "s.csv"
        m.save(path)
        back = ingest_external(path)
        assert back.instance_ids == m.instance_ids
        assert back.metric_names == m.metric_names
        assert np.array_equal(back.values, m.values)  # bit-exact


class TestIngest:
    def test_wide_form(self, tmp_path):
        path = wide_csv(tmp_path, "w.csv", ["instance_id", "BLEU1", "CIDEr"],
                        [["i0", 0.5, 3.0], ["i1", 0.25, 0.0]])
        m = ingest_external(path)
        assert m.shape == (2, 2)
        assert m.get("i1", "CIDEr") == 0.0

    def test_long_form(self, tmp_path):
        path = wide_csv(tmp_path, "l.csv", ["instance_id", "metric", "score"],
                        [["i0", "CIDEr", 3.0], ["i0", "BLEU1", 0.5],
                         ["i1", "BLEU1", 0.1], ["i1", "CIDEr", 1.0]])
        m = ingest_external(path)
        # long-form columns come out in canonical registry order
        assert m.metric_names == ["BLEU1", "CIDEr"]
        assert m.get("i0", "CIDEr") == 3.0

    def test_comment_header_lines_skipped(self, tmp_path):
        path = wide_csv(tmp_path, "c.csv", ["instance_id", "BLEU1"],
                        [["i0", 0.5]], comments=["# model: x", "# rev: 1"])
        assert ingest_external(path).get("i0", "BLEU1") == 0.5

    def test_unknown_metric_rejected_unless_allowed(self, tmp_path):
        path = wide_csv(tmp_path, "u.csv", ["instance_id", "MadeUp"],
                        [["i0", 0.5]])
        with pytest.raises(ScoreError, match="unknown metric"):
            ingest_external(path)
        m = ingest_external(path, allow_unknown=True)
        assert m.metric_names == ["MadeUp"]

    def test_duplicate_cell(self, tmp_path):
        path = wide_csv(tmp_path, "d.csv", ["instance_id", "metric", "score"],
                        [["i0", "BLEU1", 0.5], ["i0", "BLEU1", 0.6]])
        with pytest.raises(ScoreError, match="duplicate cell"):
            ingest_external(path)

    def test_non_numeric(self, tmp_path):
        path = wide_csv(tmp_path, "n.csv", ["instance_id", "BLEU1"],
                        [["i0", "abc"]])
        with pytest.raises(ScoreError, match="non-numeric"):
            ingest_external(path)

    def test_range_enforced(self, tmp_path):
        path = wide_csv(tmp_path, "r.csv", ["instance_id", "BLEU1"],
                        [["i0", 1.5]])
        with pytest.raises(ScoreError, match="outside"):
            ingest_external(path)
        path2 = wide_csv(tmp_path, "r2.csv", ["instance_id", "CIDEr"],
                         [["i0", 9.9]])
        assert ingest_external(path2).get("i0", "CIDEr") == 9.9

    def test_no_declared_range_warns(self, tmp_path, caplog):
        path = wide_csv(tmp_path, "f.csv", ["instance_id", "Fuzzy NO"],
                        [["i0", 42.0]])
        with caplog.at_level("WARNING"):
            ingest_external(path)
        assert any("no range" in r.message for r in caplog.records)

    def test_first_column_must_be_instance_id(self, tmp_path):
        path = wide_csv(tmp_path, "b.csv", ["id", "BLEU1"], [["i0", 0.5]])
        with pytest.raises(ScoreError, match="instance_id"):
            ingest_external(path)


class TestJoin:
    def _m(self, ids, names, vals):
        return ScoreMatrix(ids, names, np.array(vals, dtype=float))

    def test_disjoint_columns_intersected_rows(self):
        a = self._m(["i0", "i1", "i2"], ["BLEU1"], [[0.1], [0.2], [0.3]])
        b = self._m(["i2", "i1"], ["CIDEr"], [[3.0], [2.0]])
        j = join([a, b])
        # first input's order wins on the intersection
        assert j.instance_ids == ["i1", "i2"]
        assert j.metric_names == ["BLEU1", "CIDEr"]
        assert j.get("i1", "CIDEr") == 2.0

    def test_name_collision(self):
        a = self._m(["i0"], ["BLEU1"], [[0.1]])
        b = self._m(["i0"], ["BLEU1"], [[0.2]])
        with pytest.raises(ScoreError, match="collision"):
            join([a, b])

    def test_empty_intersection(self):
        a = self._m(["i0"], ["BLEU1"], [[0.1]])
        b = self._m(["i1"], ["CIDEr"], [[0.2]])
        with pytest.raises(ScoreError, match="intersection"):
            join([a, b])

    def test_sixteen_column_assembly(self):
        # the candidate pool for ensembling: 16 metric columns over shared ids
        names = [d.name for d in registry()][:16]
        ids = [f"i{k}" for k in range(4)]
        parts = [
            self._m(ids, names[j:j + 4],
                    np.full((4, 4), 0.1 * (j + 1)))
            for j in range(0, 16, 4)
        ]
        j = join(parts)
        assert j.shape == (4, 16)
        assert j.metric_names == names

    def test_associativity(self):
        a = self._m(["i0", "i1"], ["BLEU1"], [[0.1], [0.2]])
        b = self._m(["i0", "i1"], ["CIDEr"], [[1.0], [2.0]])
        c = self._m(["i0", "i1"], ["ROUGE"], [[0.3], [0.4]])
        left = join([join([a, b]), c])
        right = join([a, join([b, c])])
        assert left.instance_ids == right.instance_ids
        assert left.metric_names == right.metric_names
        assert np.array_equal(left.values, right.values)
