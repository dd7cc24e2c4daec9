import subprocess
import sys

import pytest

from klab import scene
from klab.cli import main, run


def records(text):
    out = []
    for line in text.splitlines():
        assert line.startswith("#R ")
        out.append(line[3:])
    return out


def test_validate_strip_reports_a_maximality_witness():
    code, text = run(["validate", "EX-STRIP"])
    assert code == 2
    line = next(r for r in records(text) if "check=maximality" in r)
    assert "verdict=CERTIFIED-FAIL" in line and "witness.change=" in line


def test_validate_control_passes():
    code, text = run(["validate", "EX-Z2"])
    assert code == 0
    assert records(text)[-1] == "status=PASS failures=0"


def test_validate_gcs_scene_probes_before_and_after_shrinking():
    code, text = run(["validate", "EX-FIG8", "--shrink-k", "3"])
    recs = records(text)
    assert any("stage=before_shrink" in r and "CERTIFIED-FAIL" in r for r in recs)
    assert any("stage=after_shrink" in r and "verdict=PASS" in r for r in recs)
    assert code == 2


def test_count_writes_the_zero_set(tmp_path):
    code, text = run(["count", "EX-Z2", "--csv", "--out-dir", str(tmp_path), "--oracle"])
    assert code == 0
    assert "count=2" in text and "oracle_match=true" in text
    csv = (tmp_path / "EX-Z2-zeros-seed0.csv").read_text()
    assert csv.startswith("chart_id,coords,sign,weight,stabilizer,branches,counted_at")


def test_seed_falls_back_to_the_environment(monkeypatch):
    monkeypatch.setenv("KLAB_SEED", "5")
    _, text = run(["count", "EX-SYM"])
    assert "seed=5" in text
    assert "count=1/2" in text


def test_radii_flag_is_parsed():
    code, text = run(["count", "EX-Z2", "--radii", "o=1/2"])
    assert code == 0 and "radii={o:1/2}" in text


def test_gallery_writes_a_loadable_scene(tmp_path):
    code, text = run(["gallery", "EX-CHAIN", "--out-dir", str(tmp_path)])
    assert code == 0
    path = tmp_path / "EX-CHAIN.json"
    assert scene.dumps(scene.load(path)) == path.read_text(encoding="utf-8")
    code, text = run(["count", str(path)])
    assert code == 0 and "count=1" in text


def test_scene_file_with_a_syntax_error(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"schema": 1,\n "charts": ]}')
    code, text = run(["validate", str(bad)])
    assert code == 1
    assert "error=ParseError" in text and "detail.line=2" in text and "detail.column=12" in text


def test_unknown_gallery_is_an_error():
    code, text = run(["count", "EX-NOPE"])
    assert code == 1
    assert "error=UnknownGallery stage=cli" in text


def test_pipeline_errors_carry_their_stage():
    code, text = run(["count", "EX-DISKS"])
    assert code == 1
    assert "error=IterationBudgetExceeded stage=shrink" in text


def test_triple_lists_the_family():
    code, text = run(["triple", "EX-JUMP", "--csv", "--out-dir", "/tmp/klab-cli-test"])
    assert code == 0
    assert "members=[{q},{p},{q,p}]" in text and "oracle_match=true" in text


def test_fp_synthetic_records_dimension_ten():
    code, text = run(["fp", "synthetic-662"])
    assert code == 0
    assert "subset=y dim.E1=6 dim.E2=6 dim.E_min=2 dim.actual=10 dim.formula=10" in text


def test_fp_count_of_stabilized_z2_is_two():
    code, text = run(["fp", "EX-Z2", "--stabilize", "2", "--count"])
    assert code == 0 and "#R fp_count=2\n" in text


def test_fp_count_stops_on_non_axis_changes():
    code, text = run(["fp", "EX-CHAIN", "--count"])
    assert code == 1 and "error=NonAxisMap stage=level1" in text


def test_fp_jump_reports_the_hypothesis_violation():
    code, text = run(["fp", "EX-JUMP"])
    assert code == 1 and "error=HypothesisViolation" in text


@pytest.mark.parametrize("argv", [["validate", "EX-DISKS"], ["count", "EX-JUMP", "--seed", "3"]])
def test_reports_are_byte_identical_across_runs(argv):
    assert run(argv) == run(argv)


def test_console_entry_point(capsys):
    assert main(["gallery", "--list"]) == 0
    out = capsys.readouterr().out
    assert "EX-STRIP" in out


def test_module_invocation_exit_code():
    proc = subprocess.run([sys.executable, "-m", "klab.cli", "validate", "EX-PUNCT"], capture_output=True, text=True)
    assert proc.returncode == 2
    assert "check=matching verdict=CERTIFIED-FAIL" in proc.stdout
