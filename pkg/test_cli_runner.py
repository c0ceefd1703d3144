"""
Тестирование командного раннера: коды выхода, содержимое отчётов, детерминизм
"""
import csv
import json
import logging
from pathlib import Path

import numpy as np
import pytest

import cli_runner
from cli_runner import RunConfig, main, parse_inline_frames
from exceptions import ConfigError
from report_writer import payload_digest
from utils.decorators import (
    EXIT_CONFIG_ERROR, EXIT_CONTRACT_FAILURE, EXIT_PASS, get_usage_runtime, get_usage_stats,
    reset_usage_stats,
)


@pytest.fixture(autouse=True)
def isolated_reports(tmp_path, monkeypatch):
    monkeypatch.setattr(cli_runner, "REPORT_DIR", tmp_path / "reports")
    monkeypatch.setattr(cli_runner, "REPORT_DB_PATH", tmp_path / "runs.db")
    reset_usage_stats()
    yield tmp_path
    reset_usage_stats()


def _run(tmp_path, *args, name="report.json"):
    out = tmp_path / name
    code = main([*args, "--out", str(out)])
    return code, out


def _load(path):
    return json.loads(path.read_text(encoding="utf-8"))


def _by_name(report, name):
    return [r for r in report["records"] if r["name"] == name]


def _write_frames(path, *frames):
    blocks = ["\n".join(" ".join(repr(float(x)) for x in row) for row in frame) for frame in frames]
    path.write_text("\n\n".join(blocks) + "\n", encoding="utf-8")
    return path


def _tilted_frames(theta=np.pi / 6):
    P = [[np.cos(theta), 0.0, np.sin(theta), 0.0], [0.0, 1.0, 0.0, 0.0]]
    Q0 = [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]]
    return P, Q0


# === INLINE INPUT ===

def test_parse_inline_frames(tmp_path):
    P, Q0 = _tilted_frames()
    frames = parse_inline_frames(_write_frames(tmp_path / "pair.txt", P, Q0))
    assert len(frames) == 2
    assert frames[0].shape == (2, 4)
    assert np.allclose(frames[1], Q0)


def test_parse_inline_frames_errors(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("1 0 x\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        parse_inline_frames(bad)
    ragged = tmp_path / "ragged.txt"
    ragged.write_text("1 0 0\n0 1\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        parse_inline_frames(ragged)
    empty = tmp_path / "empty.txt"
    empty.write_text("\n\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        parse_inline_frames(empty)
    with pytest.raises(ConfigError):
        parse_inline_frames(tmp_path / "missing.txt")


# === ANGLES / WFUN ===

def test_wfun_on_random_pair(tmp_path):
    code, out = _run(tmp_path, "--command", "wfun", "--seed", "3")
    assert code == EXIT_PASS
    report = _load(out)
    assert set(report) >= {"command", "config", "versions", "records", "extremal", "pass", "timestamp"}
    assert "runtime_s" not in report
    assert report["command"] == "wfun" and report["pass"] is True
    assert report["extremal"]["source"] == "random"
    assert _by_name(report, "w")[0]["pair_dims"] == [4, 4]
    assert set(report["versions"]) == {"toolkit", "report_schema", "numpy", "scipy"}
    assert "out" not in report["config"] and "workers" not in report["config"]


def test_angles_on_inline_pair(tmp_path):
    pair = _write_frames(tmp_path / "pair.txt", *_tilted_frames())
    code, out = _run(tmp_path, "--command", "angles", "--inline", str(pair))
    assert code == EXIT_PASS
    report = _load(out)
    clusters = _by_name(report, "cluster")
    assert sorted(c["multiplicity"] for c in clusters) == [1, 1]
    assert max(c["value"] for c in clusters) == pytest.approx(np.pi / 6, abs=1e-12)
    assert _by_name(report, "symmetry")[0]["value"] == []
    assert _by_name(report, "aligned_bases")[0]["r"] == 1
    assert _by_name(report, "aligned_bases")[0]["exists"] is True
    assert _by_name(report, "oracle_deviation")[0]["pass"]


def test_angles_on_orthogonal_pair(tmp_path):
    """Кластер π/2 даёт w = 0: согласованных базисов нет, но команда не падает"""
    a = np.pi / 3
    pair = _write_frames(
        tmp_path / "orthogonal.txt",
        [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]],
        [[0.0, 0.0, 1.0, 0.0], [0.0, np.cos(a), 0.0, np.sin(a)]],
    )
    code, out = _run(tmp_path, "--command", "angles", "--inline", str(pair))
    assert code == EXIT_PASS
    report = _load(out)
    assert sorted(c["value"] for c in _by_name(report, "cluster")) == pytest.approx([a, np.pi / 2], abs=1e-12)
    bases = _by_name(report, "aligned_bases")[0]
    assert bases["exists"] is False
    assert abs(bases["w"]) <= 1e-12
    assert _by_name(report, "oracle_deviation")[0]["pass"]


def test_angles_on_orthogonal_random_rotation(tmp_path):
    """То же после поворота: w порядка машинного нуля"""
    rng = np.random.default_rng(11)
    rotation, _ = np.linalg.qr(rng.standard_normal((4, 4)))
    P = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]]) @ rotation.T
    Q0 = np.array([[0.0, 0.0, 1.0, 0.0], [0.0, 0.6, 0.0, 0.8]]) @ rotation.T
    pair = _write_frames(tmp_path / "rotated.txt", P, Q0)
    code, out = _run(tmp_path, "--command", "angles", "--inline", str(pair))
    assert code == EXIT_PASS
    assert _by_name(_load(out), "aligned_bases")[0]["exists"] is False


def test_wfun_inline_single_angle(tmp_path):
    pair = _write_frames(tmp_path / "lines.txt", [[1.0, 0.0]], [[0.5, np.sqrt(3.0) / 2.0]])
    code, out = _run(tmp_path, "--command", "wfun", "--inline", str(pair))
    assert code == EXIT_PASS
    report = _load(out)
    assert report["extremal"]["w"] == pytest.approx(0.5, abs=1e-15)
    assert _by_name(report, "v")[0]["value"] == pytest.approx(2.0, abs=1e-14)


def test_mismatched_inline_pair_fails_with_report(tmp_path):
    pair = _write_frames(tmp_path / "pair.txt", [[1.0, 0.0, 0.0, 0.0]], [[1.0, 0.0, 0.0]])
    code, out = _run(tmp_path, "--command", "angles", "--inline", str(pair))
    assert code == EXIT_CONTRACT_FAILURE
    report = _load(out)
    assert report["pass"] is False
    assert report["records"][0]["error"] == "DimensionMismatch"


# === CERTIFICATES ===

def test_certify_III_does_not_depend_on_workers(tmp_path):
    digests = []
    for workers in ("1", "4"):
        code, out = _run(tmp_path, "--command", "certify-III", "--samples", "5000", "--seed", "42",
                         "--workers", workers, name=f"iii-{workers}.json")
        assert code == EXIT_PASS
        digests.append(payload_digest(_load(out)))
    assert digests[0] == digests[1]


def test_certify_III_report(tmp_path):
    code, out = _run(tmp_path, "--command", "certify-III", "--samples", "3000", "--seed", "1")
    report = _load(out)
    assert code == EXIT_PASS
    record = report["records"][0]
    assert record["lemma"] == "III" and record["samples"] == 3000
    assert record["extremal_value"] > 0.0
    assert report["extremal"]["min"] == record["extremal_value"]


def test_certify_II(tmp_path):
    code, out = _run(tmp_path, "--command", "certify-II", "--density", "20", "--samples", "2000")
    assert code == EXIT_PASS
    assert _load(out)["records"][0]["pass"]


def test_scan_f(tmp_path):
    code, out = _run(tmp_path, "--command", "scan-f", "--density", "50")
    assert code == EXIT_PASS
    record = _load(out)["records"][0]
    assert record["value"] <= 5.0 / 6.0 + 1e-6
    assert record["uvw"] > 0.0


def test_estimate_eps0_single_rank(tmp_path):
    code, out = _run(tmp_path, "--command", "estimate-eps0", "--r", "2", "--density", "20")
    assert code == EXIT_PASS
    records = _load(out)["records"]
    assert [r["r"] for r in records] == [2]
    assert records[0]["value"] > 0.0


def test_certify_prop35(tmp_path):
    code, out = _run(tmp_path, "--command", "certify-prop35", "--samples", "1500", "--seed", "7")
    assert code == EXIT_PASS
    report = _load(out)
    assert _by_name(report, "case_b_value")[0]["pass"]
    classification = _by_name(report, "case_b_classification")[0]
    assert classification["value"] == "CaseB"
    assert classification["theta0"] == pytest.approx(np.arctan(np.sqrt(2.0)), abs=1e-9)


# === IMMERSIONS ===

def test_check_immersion_lawson_osserman(tmp_path):
    code, out = _run(tmp_path, "--command", "check-immersion", "--object", "lawson-osserman")
    assert code == EXIT_PASS
    report = _load(out)
    assert report["extremal"]["w"] == pytest.approx(1.0 / 9.0, abs=1e-6)
    assert _by_name(report, "conelike_variation")[0]["value"] <= 1e-9
    assert _by_name(report, "w")[0]["q0_reversed"] is False
    w_record = _by_name(report, "w")[0]
    assert w_record["pass"] is True
    assert w_record["expected"] == pytest.approx(1.0 / 9.0)
    assert w_record["tolerance"] == pytest.approx(1e-6)


def test_check_immersion_clifford_cone_reverses_q0(tmp_path):
    code, out = _run(tmp_path, "--command", "check-immersion", "--object", "clifford-cone")
    assert code == EXIT_PASS
    report = _load(out)
    assert _by_name(report, "w")[0]["q0_reversed"] is True
    assert report["extremal"]["w"] > 0.0
    probe = _by_name(report, "bernstein_probe")[0]
    assert len(probe["value"]) == 8


@pytest.mark.parametrize("name", ["paraboloid", "sphere", "small-circle-cone"])
def test_check_immersion_non_minimal_objects(tmp_path, name):
    code, out = _run(tmp_path, "--command", "check-immersion", "--object", name)
    assert code == EXIT_PASS
    assert _by_name(_load(out), "mean_curvature")[0]["expected"] == "non-minimal"


def test_bridge_check(tmp_path):
    code, out = _run(tmp_path, "--command", "bridge-check", "--object", "lawson-osserman")
    assert code == EXIT_PASS
    records = _by_name(_load(out), "bridge")
    assert [r["step"] for r in records] == pytest.approx([1e-3, 2e-3])
    assert all(r["v"] == pytest.approx(9.0, abs=1e-3) for r in records)
    ratio = _by_name(_load(out), "step_halving_ratio")[0]
    assert ratio["informative"] is False and ratio["pass"] is True


def test_bridge_check_on_clifford_cone(tmp_path):
    code, out = _run(tmp_path, "--command", "bridge-check", "--object", "clifford-cone")
    assert code == EXIT_PASS
    report = _load(out)
    assert all(r["value"] <= 1e-3 for r in _by_name(report, "bridge"))
    ratio = _by_name(report, "step_halving_ratio")[0]
    assert ratio["informative"] is True
    assert ratio["value"] >= 3.0 and ratio["pass"] is True
    assert report["extremal"]["ratio"] == ratio["value"]


# === CONFIG ERRORS ===

@pytest.mark.parametrize("args", [
    ["--command", "check-immersion", "--object", "torus"],
    ["--command", "check-immersion"],
    ["--command", "wfun", "--fd-step", "-1e-4"],
    ["--command", "wfun", "--q0", "inline"],
    ["--command", "scan-f", "--density", "5"],
    ["--command", "estimate-eps0", "--r", "7"],
    ["--command", "wfun", "--format", "xml"],
    ["--command", "wfun", "--workers", "0"],
])
def test_config_errors_exit_two(tmp_path, args):
    code, out = _run(tmp_path, *args)
    assert code == EXIT_CONFIG_ERROR
    assert not out.exists()


def test_unknown_command_is_rejected_by_parser():
    with pytest.raises(SystemExit) as exc:
        main(["--command", "certify-V"])
    assert exc.value.code == 2


def test_inline_file_with_three_frames(tmp_path):
    frames = _write_frames(tmp_path / "three.txt", [[1.0, 0.0]], [[0.0, 1.0]], [[1.0, 1.0]])
    code, _ = _run(tmp_path, "--command", "wfun", "--inline", str(frames))
    assert code == EXIT_CONFIG_ERROR


def test_numerical_config_keeps_only_numerical_fields():
    config = RunConfig(command="wfun", out="x.json", workers=3)
    data = config.numerical_config()
    assert data["command"] == "wfun" and data["seed"] == config.seed
    assert not {"out", "format", "archive", "workers"} & set(data)


# === OUTPUT / ARCHIVE ===

def test_default_report_path(isolated_reports):
    assert main(["--command", "wfun"]) == EXIT_PASS
    assert (isolated_reports / "reports" / "wfun.json").exists()


def test_csv_report(tmp_path):
    code, out = _run(tmp_path, "--command", "wfun", "--format", "csv", name="wfun.csv")
    assert code == EXIT_PASS
    with open(out, encoding="utf-8", newline="") as f:
        rows = list(csv.DictReader(f))
    assert [row["name"] for row in rows][:3] == ["w", "angle_product", "orientation_flip"]
    assert all(row["command"] == "wfun" for row in rows)


def test_archive_accepts_repeated_run(tmp_path):
    args = ["--command", "certify-III", "--samples", "2000", "--seed", "5", "--archive"]
    assert _run(tmp_path, *args, name="a.json")[0] == EXIT_PASS
    assert _run(tmp_path, *args, "--workers", "2", name="b.json")[0] == EXIT_PASS
    assert (tmp_path / "runs.db").exists()


def test_usage_is_tracked(tmp_path):
    _run(tmp_path, "--command", "wfun")
    _run(tmp_path, "--command", "wfun", "--seed", "1")
    assert get_usage_stats() == {"wfun": 2}
    assert get_usage_runtime("wfun") > 0.0
    assert get_usage_runtime("angles") == 0.0


def test_rerun_is_byte_identical_apart_from_timestamp(tmp_path):
    texts = []
    for name in ("first.json", "second.json"):
        code, out = _run(tmp_path, "--command", "certify-III", "--samples", "2000", "--seed", "9", name=name)
        assert code == EXIT_PASS
        lines = out.read_text(encoding="utf-8").splitlines()
        texts.append([line for line in lines if not line.lstrip().startswith('"timestamp"')])
    assert texts[0] == texts[1]


def test_runtime_and_usage_go_to_log(tmp_path, caplog):
    caplog.set_level(logging.INFO, logger="cli_runner")
    code, out = _run(tmp_path, "--command", "wfun", "--archive")
    assert code == EXIT_PASS
    assert "runtime_s" not in _load(out)
    assert any("usage={'wfun': 1}" in message for message in caplog.messages)


def test_readme_is_utf8():
    data = (Path(__file__).parent / "README.md").read_bytes()
    text = data.decode("utf-8")
    assert "\x00" not in text
    assert text.startswith("# bernstein-lab")
