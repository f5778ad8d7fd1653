"""Tests de la CLI : codes de sortie, sorties JSON-lines et journaux revérifiables."""

import json

import pytest

from src.cli import EXIT_ERROR, EXIT_FAILED, EXIT_OK, main

CLASS = "instances 4\n+---\n++--\n+++-\n++++\n"
PERTURBATION = "instances 4\nu 0 : 0 1\nu 1 : 1 2\nu 2 : 2 3\nu 3 : 3\n"
DISTRIBUTION = "atom 0 +1 0.5\natom 3 -1 0.5\n"


@pytest.fixture
def problem(tmp_path):
    """Seuils H_4, U(x) = {x, x+1}, D réalisable par h = '++--'."""
    paths = {}
    for name, text in (("class", CLASS), ("perturbation", PERTURBATION), ("distribution", DISTRIBUTION)):
        path = tmp_path / f"{name}.txt"
        path.write_text(text, encoding="utf-8")
        paths[name] = str(path)
    return [paths["class"], paths["perturbation"], paths["distribution"]]


def read_jsonl(path) -> list[dict]:
    return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line]


class TestInspectionCommands:
    def test_dims(self, problem, capsys):
        assert main(["dims", problem[0]]) == EXIT_OK
        report = json.loads(capsys.readouterr().out)
        assert (report["vc"], report["littlestone"], report["threshold"]) == (1, 2, 4)

    def test_online_game(self, problem, tmp_path, capsys):
        sequence = tmp_path / "seq.txt"
        sequence.write_text("ex 3 -1\nex 0 +1\nex 1 +1\n", encoding="utf-8")
        assert main(["online-game", problem[0], str(sequence)]) == EXIT_OK
        record = json.loads(capsys.readouterr().out)
        assert record["length"] == 3
        assert record["count"] <= 2

    def test_malformed_class_file(self, tmp_path, capsys):
        path = tmp_path / "bad.txt"
        path.write_text("instances 3\n+-\n", encoding="utf-8")
        assert main(["dims", str(path)]) == EXIT_ERROR
        assert "error: line 2" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["dims", str(tmp_path / "absent.txt")]) == EXIT_ERROR

    def test_mismatched_files(self, problem, tmp_path):
        small = tmp_path / "u3.txt"
        small.write_text("instances 3\nu 0 : 0\nu 1 : 1\nu 2 : 2\n", encoding="utf-8")
        assert main(["cyclerobust", problem[0], str(small), problem[2]]) == EXIT_ERROR

    def test_invalid_config_value(self, problem):
        assert main(["cyclerobust", *problem, "--m", "0"]) == EXIT_ERROR


class TestTrialCommands:
    def test_cyclerobust_with_verified_log(self, problem, tmp_path):
        out, log = tmp_path / "rows.jsonl", tmp_path / "queries.jsonl"
        code = main(["cyclerobust", *problem, "--m", "20", "--trials", "3", "--seed", "4",
                     "--out", str(out), "--log-out", str(log)])

        assert code == EXIT_OK
        rows = read_jsonl(out)
        assert [row["trial"] for row in rows] == [0, 1, 2]
        assert all(row["compression_size"] <= 2 and not row["hard_violation"] for row in rows)
        assert main(["attack-check", problem[1], str(log)]) == EXIT_OK

    def test_tampered_log_fails_attack_check(self, problem, tmp_path):
        log = tmp_path / "queries.jsonl"
        main(["cyclerobust", *problem, "--m", "10", "--log-out", str(log), "--out", str(tmp_path / "rows.jsonl")])
        entries = read_jsonl(log)
        entries[0]["counterexample"] = 3 if entries[0]["instance"] == 0 else 0
        log.write_text("\n".join(json.dumps(entry) for entry in entries) + "\n", encoding="utf-8")

        assert main(["attack-check", problem[1], str(log)]) == EXIT_FAILED

    def test_same_seed_same_rows(self, problem, tmp_path):
        first, second = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        args = ["wm", *problem, "--T", "12", "--trials", "3", "--seed", "9"]
        main([*args, "--out", str(first)])
        main([*args, "--out", str(second), "--jobs", "3"])
        assert first.read_text() == second.read_text()

    def test_wm_experts(self, problem, tmp_path):
        out = tmp_path / "wm.jsonl"
        assert main(["wm", *problem, "--T", "8", "--experts", "--expert-mode", "materialized", "--out", str(out)]) == EXIT_OK
        row = read_jsonl(out)[0]
        assert row["extra"]["experts"] is True
        assert row["mistakes"] <= row["bound"] + 1e-9

    def test_game(self, problem, tmp_path):
        out, transcript = tmp_path / "game.jsonl", tmp_path / "transcript.jsonl"
        code = main(["game", *problem, "--T", "50", "--attacker", "greedy",
                     "--out", str(out), "--log-out", str(transcript)])
        assert code == EXIT_OK
        assert read_jsonl(out)[0]["mistakes"] <= 2
        assert len(read_jsonl(transcript)) == 50
        assert main(["attack-check", problem[1], str(transcript)]) == EXIT_OK

    def test_lowerbound(self, tmp_path):
        out = tmp_path / "lb.jsonl"
        assert main(["lowerbound", "--d", "9", "--reps", "4", "--out", str(out)]) == EXIT_OK
        rows = read_jsonl(out)
        assert len(rows) == 4
        assert all(row["queries"] == 3 for row in rows)

    def test_lowerbound_online(self, tmp_path):
        out = tmp_path / "lb.jsonl"
        assert main(["lowerbound", "--online", "--d", "9", "--reps", "2", "--out", str(out)]) == EXIT_OK
        assert all(row["extra"]["rounds"] == 36 for row in read_jsonl(out))

    def test_imperfect(self, problem, tmp_path):
        out = tmp_path / "imperfect.jsonl"
        assert main(["imperfect", *problem, "--eps", "0.3", "--attacker", "eps-blind", "--out", str(out)]) == EXIT_OK
        row = read_jsonl(out)[0]
        assert row["mistakes"] <= 2

    @pytest.mark.slow
    def test_rlua(self, problem, tmp_path):
        out = tmp_path / "rlua.jsonl"
        assert main(["rlua", *problem, "--m", "6", "--n", "3", "--out", str(out)]) == EXIT_OK
        row = read_jsonl(out)[0]
        assert row["opt"] == 0.0
        assert "failed" in row["extra"] or row["compression_size"] == 3 * row["extra"]["N"]
        if "failed" not in row["extra"]:
            assert {"pool_size", "dset_size", "T"} <= row["extra"].keys()
            assert row["violation"] == (row["risk"] > row["bound"])


class TestAccept:
    def test_single_suite(self, tmp_path):
        rows, report = tmp_path / "rows.jsonl", tmp_path / "report.json"
        code = main(["accept", "dimensions", "--trials", "6", "--out", str(rows), "--report", str(report)])
        assert code == EXIT_OK
        assert len(read_jsonl(rows)) == 6
        assert read_jsonl(report)[0]["verdict"] == "pass"

    def test_config_file(self, tmp_path, capsys):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"seed": 3, "trials": 4}), encoding="utf-8")
        code = main(["accept", "dimensions", "--config", str(config), "--out", str(tmp_path / "rows.jsonl")])
        assert code == EXIT_OK
        report = json.loads(capsys.readouterr().out)
        assert report["seed"] == 3
        assert report["trials"] == 4

    def test_unknown_suite_is_a_usage_error(self):
        with pytest.raises(SystemExit):
            main(["accept", "nope"])
