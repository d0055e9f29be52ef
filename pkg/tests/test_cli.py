import json

import pytest

from expnet_kit.cli import main
from expnet_kit.baseline_adapter import ScoreRecord, write_scores
from expnet_kit.trace import write_traces

from conftest import simple_trace
from synth import build_experiment_files, make_dataset, make_vocab


@pytest.fixture
def good_traces(tmp_path):
    path = tmp_path / "good.jsonl"
    write_traces([simple_trace(example_id="a"), simple_trace(example_id="b")], path)
    return path


@pytest.fixture
def broken_traces(tmp_path, good_traces):
    obj = json.loads(good_traces.read_text().splitlines()[0])
    obj["attn_task_to_token"][0][0] = 0.0  # breaks the row sum
    path = tmp_path / "broken.jsonl"
    path.write_text(json.dumps(obj) + "\n")
    return path


class TestValidateCommand:
    def test_good_fixture_exit_zero(self, good_traces, capsys):
        assert main(["validate", str(good_traces)]) == 0
        assert "OK (2 traces)" in capsys.readouterr().out

    def test_broken_fixture_exit_one_names_invariant(self, broken_traces, capsys):
        assert main(["validate", str(broken_traces)]) == 1
        assert "row-stochastic" in capsys.readouterr().err

    def test_missing_file_is_runtime_error(self, tmp_path, capsys):
        assert main(["validate", str(tmp_path / "nope.jsonl")]) == 2

    def test_unknown_flag_exit_two(self, good_traces, capsys):
        assert main(["validate", "--frobnicate", str(good_traces)]) == 2

    def test_unknown_command_exit_two(self, capsys):
        assert main(["explode"]) == 2


@pytest.fixture(scope="module")
def experiment(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli-exp")
    config_path, context = build_experiment_files(
        root, n_train=25, n_test=20, bootstrap_iterations=50, output_dir=str(root / "run")
    )
    return root, config_path, context


class TestPipelineCommands:
    def test_evaluate_then_report(self, experiment, capsys):
        root, config_path, _ = experiment
        assert main(["evaluate", str(config_path)]) == 0
        out = capsys.readouterr().out
        assert "expnet" in out and "random" in out
        table_path = root / "run" / "reports" / "results_table.json"
        table = json.loads(table_path.read_text())
        assert {row["method_id"] for row in table["rows"]} == {"expnet", "random"}
        before = table_path.read_bytes()

        assert main(["report", str(root / "run")]) == 0
        assert table_path.read_bytes() == before
        assert (root / "run" / "html" / "index.html").is_file()

    def test_train_then_explain(self, experiment, tmp_path, capsys):
        root, config_path, context = experiment
        model_path = tmp_path / "m.json"
        assert main(["train", str(config_path), "--out", str(model_path)]) == 0
        assert model_path.is_file()

        traces_path = root / "synth_c" / "synth_c.test.jsonl"
        out_path = tmp_path / "expl.jsonl"
        assert main(["explain", str(model_path), str(traces_path), "--out", str(out_path)]) == 0
        lines = [json.loads(l) for l in out_path.read_text().splitlines()]
        assert all(sum(obj["word_mask"]) >= 1 for obj in lines)

    def test_explain_to_stdout(self, experiment, tmp_path, capsys):
        root, config_path, _ = experiment
        model_path = root / "run" / "model.json"
        traces_path = root / "synth_c" / "synth_c.test.jsonl"
        assert main(["explain", str(model_path), str(traces_path)]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert json.loads(lines[0])["method_id"] == "expnet"

    def test_seed_override_changes_model(self, experiment, tmp_path):
        _, config_path, _ = experiment
        a, b, c = tmp_path / "a.json", tmp_path / "b.json", tmp_path / "c.json"
        assert main(["train", str(config_path), "--out", str(a), "--seed", "1"]) == 0
        assert main(["train", str(config_path), "--out", str(b), "--seed", "1"]) == 0
        assert main(["train", str(config_path), "--out", str(c), "--seed", "2"]) == 0
        assert a.read_bytes() == b.read_bytes()
        assert a.read_bytes() != c.read_bytes()


class TestBinarizeCommand:
    def test_binarize_writes_masks(self, tmp_path, good_traces):
        scores = tmp_path / "scores.jsonl"
        write_scores(
            [
                ScoreRecord("a", "m", [0.5, 0.25], "word"),
                ScoreRecord("b", "m", [0.25, 0.5], "word"),
            ],
            scores,
        )
        out = tmp_path / "masks.jsonl"
        code = main(
            ["binarize", str(scores), "--k", "1", "--traces", str(good_traces), "--out", str(out)]
        )
        assert code == 0
        lines = [json.loads(l) for l in out.read_text().splitlines()]
        assert lines[0]["word_mask"] == [1, 0]
        assert lines[1]["word_mask"] == [0, 1]

    def test_binarize_rejects_mismatched_scores(self, tmp_path, good_traces, capsys):
        scores = tmp_path / "scores.jsonl"
        write_scores([ScoreRecord("a", "m", [0.5], "word")], scores)
        code = main(["binarize", str(scores), "--k", "1", "--traces", str(good_traces)])
        assert code == 1


class TestAgreementCommand:
    def test_perfect_agreement(self, tmp_path, capsys):
        path = tmp_path / "t.jsonl"
        write_traces([simple_trace(example_id="a")], path)
        trace = simple_trace(example_id="a")
        trace.rationales[1].mask = list(trace.rationales[0].mask)
        write_traces([trace], path)
        assert main(["agreement", str(path)]) == 0
        out = capsys.readouterr().out
        assert "krippendorff_alpha: 1.000000" in out

    def test_mixed_agreement_runs(self, tmp_path, rng, capsys):
        vocab = make_vocab("w")
        train, test = make_dataset("d", vocab, 10, 0, seed=5)
        # flip one annotator's bits on some examples to create disagreement
        for t in train[:5]:
            t.rationales[1].mask = [1 - b for b in t.rationales[1].mask]
        path = tmp_path / "t.jsonl"
        write_traces(train, path)
        assert main(["agreement", str(path)]) == 0
        out = capsys.readouterr().out
        assert "annotators: 2" in out
