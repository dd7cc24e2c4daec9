from fractions import Fraction

from klab.report import EXIT_FAIL, EXIT_PASS, Report, fmt
from klab.results import failed, passed


def test_value_formatting():
    assert fmt(Fraction(1, 2)) == "1/2"
    assert fmt(True) == "true"
    assert fmt((1, "a")) == "[1,a]"
    assert fmt({"b": 1, "a": 2}) == "{a:2,b:1}"
    assert fmt("two words") == '"two words"'
    assert fmt("") == '""'


def test_report_lines_and_exit_code():
    rep = Report("demo", grid=Fraction(1, 20))
    rep.check(passed("alpha"))
    assert rep.exit_code == EXIT_PASS
    rep.check(failed("beta", point=(Fraction(1, 3), 0)))
    rep.status()
    text = rep.text()
    assert all(line.startswith("#R ") for line in text.splitlines())
    assert "check=beta verdict=CERTIFIED-FAIL witness.point=[1/3,0]" in text
    assert text.splitlines()[-1] == "#R status=CERTIFIED-FAIL failures=1"
    assert rep.exit_code == EXIT_FAIL
