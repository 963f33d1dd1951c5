import json

import pytest

from capeval.cli import EXIT_CONFIG, EXIT_DATA, EXIT_OK, main


def write_jsonl(path, records):
    path.write_text("\n".join(json.dumps(r) for r in records) + "\n")
    return path


@pytest.fixture
def rating_dataset(tmp_path):
    recs = []
    sents = [
        ("a dog runs in the park", ["a dog running in a park", "the dog runs"]),
        ("a cat sits on a table", ["a cat on the table", "a small cat sits"]),
        ("a man rides a bike", ["a man riding a bicycle", "a person on a bike"]),
        ("two boys play with a ball", ["boys playing ball", "two kids and a ball"]),
        ("a train near the station", ["a train at a station", "the train arrives"]),
        ("an old bus on the street", ["a bus in the street", "an old bus drives"]),
    ]
    variants = ["", " today", " outside", " again"]
    k = 0
    for cand, refs in sents:
        for suffix in variants:
            recs.append({
                "instance_id": f"i{k}", "image_id": f"img{k}",
                "candidate": cand + suffix, "references": refs,
                "rating": float(k % 4), "split": "train" if k % 4 else "test",
            })
            k += 1
    return write_jsonl(tmp_path / "ratings.jsonl", recs)


@pytest.fixture
def pascal_dataset(tmp_path):
    recs = []
    k = 0
    for cat in ("HC", "HI", "HM", "MM"):
        for i in range(3):
            va, vb = (30, 18) if i % 2 == 0 else (18, 30)
            recs.append({
                "pair_id": f"p{k}", "image_id": f"img{k}",
                "candidate_a": f"a dog runs in the park {k}",
                "candidate_b": f"totally unrelated words here {k}",
                "references": [f"a dog runs in the park number {j}"
                               for j in range(48)],
                "preferred": None, "category": cat,
                "votes_a": va, "votes_b": vb,
            })
            k += 1
    return write_jsonl(tmp_path / "pascal.jsonl", recs)


@pytest.fixture
def reformulations_dataset(tmp_path):
    recs = [
        {"pair_id": "p0", "image_id": "m0",
         "candidate_a": "a dog runs in the park",
         "candidate_b": "unrelated words entirely",
         "references": ["a dog runs in the park fast"],
         "preferred": "A", "category": "REF", "votes_a": None, "votes_b": None},
        {"pair_id": "p1", "image_id": "m1",
         "candidate_a": "same  sentence", "candidate_b": "same sentence",
         "references": ["whatever"], "preferred": "A", "category": "REF",
         "votes_a": None, "votes_b": None},
    ]
    return write_jsonl(tmp_path / "reform.jsonl", recs)


class TestScoreCommand:
    def test_writes_wide_csv(self, rating_dataset, tmp_path):
        out = tmp_path / "scores.csv"
        code = main(["score", "--dataset", str(rating_dataset),
                     "--metrics", "bleu1,bleu4,rouge,cider,meteor",
                     "--out", str(out)])
        assert code == EXIT_OK
        header = out.read_text().splitlines()[0]
        assert header == "instance_id,BLEU1,BLEU4,ROUGE,CIDEr,METEOR"
        assert len(out.read_text().splitlines()) == 25  # header + 24 rows

    def test_unknown_metric_exit_2(self, rating_dataset, tmp_path, capsys):
        code = main(["score", "--dataset", str(rating_dataset),
                     "--metrics", "bleu9", "--out", str(tmp_path / "x.csv")])
        assert code == EXIT_CONFIG
        assert "BLEU1" in capsys.readouterr().err  # lists valid names

    def test_missing_file_exit_3(self, tmp_path):
        code = main(["score", "--dataset", str(tmp_path / "nope.jsonl"),
                     "--metrics", "bleu1", "--out", str(tmp_path / "x.csv")])
        assert code == EXIT_DATA

    def test_rerun_byte_identical(self, rating_dataset, tmp_path):
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        for out in (out1, out2):
            assert main(["score", "--dataset", str(rating_dataset),
                         "--metrics", "cider,meteor", "--out", str(out)]) == 0
        assert out1.read_bytes() == out2.read_bytes()


class TestCorrelateCommand:
    def _scores(self, rating_dataset, tmp_path):
        out = tmp_path / "scores.csv"
        assert main(["score", "--dataset", str(rating_dataset),
                     "--metrics", "bleu1,rouge", "--out", str(out)]) == 0
        return out

    def test_reports_written(self, rating_dataset, tmp_path):
        scores = self._scores(rating_dataset, tmp_path)
        out = tmp_path / "report.json"
        code = main(["correlate", "--dataset", str(rating_dataset),
                     "--scores", str(scores), "--out", str(out)])
        assert code == EXIT_OK
        payload = json.loads(out.read_text())
        assert payload["kind"] == "TauC"  # Custom default
        assert {r["metric"] for r in payload["reports"]} <= {"BLEU1", "ROUGE"}

    def test_incomplete_coverage_exit_3(self, rating_dataset, tmp_path, capsys):
        scores = tmp_path / "partial.csv"
        scores.write_text("instance_id,BLEU1\ni0,0.5\n")
        code = main(["correlate", "--dataset", str(rating_dataset),
                     "--scores", str(scores)])
        assert code == EXIT_DATA
        assert "i1" in capsys.readouterr().err

    def test_csv_format(self, rating_dataset, tmp_path, capsys):
        scores = self._scores(rating_dataset, tmp_path)
        code = main(["--format", "csv", "correlate",
                     "--dataset", str(rating_dataset), "--scores", str(scores)])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert out.splitlines()[0] == "metric,kind,value,n"


class TestPairwiseCommand:
    def test_pascal_report(self, pascal_dataset, tmp_path):
        out = tmp_path / "pw.json"
        code = main(["--seed", "7", "pairwise", "--dataset", str(pascal_dataset),
                     "--name", "Pascal50S", "--metrics", "rouge",
                     "--out", str(out)])
        assert code == EXIT_OK
        payload = json.loads(out.read_text())
        assert payload["seed"] == 7
        result = payload["results"][0]
        assert set(result["per_category"]) == {"HC", "HI", "HM", "MM"}
        assert result["seeds"] == [7, 8, 9, 10, 11]

    def test_pascal_determinism(self, pascal_dataset, tmp_path):
        outs = []
        for name in ("a.json", "b.json"):
            out = tmp_path / name
            assert main(["--seed", "3", "pairwise",
                         "--dataset", str(pascal_dataset),
                         "--name", "Pascal50S", "--metrics", "cider,meteor",
                         "--out", str(out)]) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_reformulations_filters_identical(self, reformulations_dataset,
                                              tmp_path):
        out = tmp_path / "ref.json"
        code = main(["pairwise", "--dataset", str(reformulations_dataset),
                     "--name", "Reformulations", "--metrics", "rouge",
                     "--out", str(out)])
        assert code == EXIT_OK
        result = json.loads(out.read_text())["results"][0]
        assert result["n"] == 1  # the identical pair was filtered
        assert result["accuracy"] == 1.0

    def test_rating_dataset_rejected(self, rating_dataset):
        code = main(["pairwise", "--dataset", str(rating_dataset),
                     "--name", "Custom", "--metrics", "rouge"])
        assert code == EXIT_CONFIG


class TestTrainCommand:
    def _scores(self, rating_dataset, tmp_path):
        out = tmp_path / "scores.csv"
        assert main(["score", "--dataset", str(rating_dataset),
                     "--metrics", "bleu1,bleu4,rouge,cider,meteor",
                     "--out", str(out)]) == 0
        return out

    def test_train_writes_model(self, rating_dataset, tmp_path):
        scores = self._scores(rating_dataset, tmp_path)
        out = tmp_path / "model.json"
        code = main(["train", "--dataset", str(rating_dataset),
                     "--name", "Custom", "--scores", str(scores),
                     "--split", "train", "--folds", "2", "--out", str(out)])
        assert code == EXIT_OK
        model = json.loads(out.read_text())
        assert model["metrics"]
        assert model["meta"]["split"] == "train"

    def test_leakage_guard(self, rating_dataset, tmp_path, capsys):
        scores = self._scores(rating_dataset, tmp_path)
        code = main(["train", "--dataset", str(rating_dataset),
                     "--name", "Custom", "--scores", str(scores),
                     "--split", "test", "--folds", "2",
                     "--out", str(tmp_path / "m.json")])
        assert code == EXIT_CONFIG
        assert "refusing" in capsys.readouterr().err

    def test_train_determinism(self, rating_dataset, tmp_path):
        scores = self._scores(rating_dataset, tmp_path)
        models = []
        for name in ("m1.json", "m2.json"):
            out = tmp_path / name
            assert main(["train", "--dataset", str(rating_dataset),
                         "--name", "Custom", "--scores", str(scores),
                         "--split", "train", "--folds", "2",
                         "--out", str(out)]) == 0
            models.append(out.read_bytes())
        assert models[0] == models[1]


class TestReportCommand:
    def test_json_to_csv(self, tmp_path, capsys):
        payload = {
            "dataset": "Custom", "kind": "TauC", "n": 4,
            "reports": [{"metric": "BLEU1", "kind": "TauC",
                         "value": 0.585, "n": 4}],
            "errors": {},
        }
        src = tmp_path / "r.json"
        src.write_text(json.dumps(payload))
        code = main(["--format", "csv", "report", "--input", str(src)])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "BLEU1,TauC,58.5,4" in out

    def test_bad_input_exit_3(self, tmp_path):
        src = tmp_path / "bad.json"
        src.write_text("{not json")
        assert main(["report", "--input", str(src)]) == EXIT_DATA
