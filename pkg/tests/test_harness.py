import numpy as np
import pytest

from fdelab import harness
from fdelab.harness import ConfigError, load_config, parse_config

SMALL = """
[suite]
name = small
output = out-from-config

[scenario tiny]
m = 0.7
d = 3
data = bump
R = 1.0
domain = 4.0
R0 = 3.0
n_cells = 60
checks = flux_lemma, critical_time, structural
flux_lemma.s = 0, 0.1

[scenario vss]
m = 0.25
d = 4
data = vss-sample
T = 1.0
centers = 2
checks = smoothing_offcenter
"""


@pytest.fixture(scope="module")
def small_bundle():
    return harness.run_scenarios(parse_config(SMALL))


# ----------------------------------------------------------------- parsing


def test_parse_defaults_and_grids():
    suite = parse_config(SMALL)
    assert suite.name == "small" and suite.output == "out-from-config"
    tiny, vss = suite.scenarios
    assert tiny.solver.n_cells == 60
    assert tiny.grids[("flux_lemma", "s")] == (0.0, 0.1)
    assert tiny.geometry.lam == pytest.approx(4.0)
    assert vss.data == "vss-sample" and vss.data_args["centers"] == "2"
    assert len(suite.text_hash) == 64


def test_grid_override():
    suite = parse_config(SMALL, grid=24)
    assert all(sc.solver.n_cells == 24 for sc in suite.scenarios)


@pytest.mark.parametrize(
    "text, line, fragment",
    [
        ("[suite]\nname = a\nbogus line\n", 3, "expected 'key = value'"),
        ("x = 1\n", 1, "outside of any section"),
        ("[scenario a]\nm = 0.5\nd = 3\nwhat = 1\n", 4, "unknown key 'what'"),
        ("[scenario a]\nm = 0.5\nd = 3\nchecks = nope\n", 4, "unknown check 'nope'"),
        ("[scenario a]\nm = 0.5\nm = 0.6\n", 3, "duplicate key"),
        ("[scenario a]\nm = half\nd = 3\n", 2, "bad value for 'm'"),
        ("[scenario a]\nm = 0.5\nd = 3\nnope.t = 1\n", 4, "unknown check 'nope'"),
        ("[scenario a]\nm = 0.5\nd = 3\nsmoothing.t = 1, x\n", 4, "bad number list"),
        ("[scenario a\n", 1, "malformed section"),
        ("[suite]\ncolour = red\n", 2, "unknown suite key"),
        ("[scenario a]\nm = 0.5\nd = 3\ndata = gaussian\n", 4, "unknown data family"),
    ],
)
def test_parse_errors_carry_line_numbers(text, line, fragment):
    with pytest.raises(ConfigError) as info:
        parse_config(text, "cfg.txt")
    assert info.value.line == line
    assert str(info.value).startswith(f"cfg.txt:{line}:")
    assert fragment in str(info.value)


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("[scenario a]\nd = 3\n", "missing 'm'"),
        ("[scenario a]\nm = 0.5\nd = 3\n[scenario a]\nm = 0.5\nd = 3\n", "duplicate scenario"),
        ("[other]\n", "unknown section"),
        ("[scenario a]\nm = 1.5\nd = 3\n", "m"),
        ("[scenario a]\nm = 0.5\nd = 3\nsupport = 2\n", "support exceeds R"),
        ("[scenario a]\nm = 0.5\nd = 3\nR0 = 9\ndomain = 6\n", "R0 exceeds"),
    ],
)
def test_semantic_config_errors(text, fragment):
    with pytest.raises(ConfigError, match=fragment):
        parse_config(text)


def test_missing_file():
    with pytest.raises(ConfigError, match="not found"):
        load_config("/nonexistent/suite.cfg")


def test_bundled_config_loads():
    suite = load_config(harness.bundled_config_path())
    ids = [sc.id for sc in suite.scenarios]
    assert ids == ["good-range", "subcritical", "negative", "separable", "vss"]
    assert all(c in harness.KNOWN_CHECKS for sc in suite.scenarios for c in sc.checks)


# ------------------------------------------------------------ initial data


def test_bump_data_sits_on_boundary_value():
    sc = parse_config("[scenario a]\nm = -0.5\nd = 3\nboundary = 1\nheight = 2\n").scenarios[0]
    u0 = harness.initial_data(sc)
    assert u0(np.array([0.0]))[0] == pytest.approx(3.0)
    assert u0(np.array([1.0, 5.0])).tolist() == [1.0, 1.0]


def test_custom_table_data(tmp_path):
    (tmp_path / "u0.csv").write_text("# r,u\n0,2\n0.5,1\n1,0\n")
    cfg = tmp_path / "s.cfg"
    cfg.write_text("[scenario t]\nm = 0.5\nd = 3\ndata = custom-table\nfile = u0.csv\n")
    suite = load_config(cfg)
    u0 = harness.initial_data(suite.scenarios[0], suite.base_dir)
    assert u0(np.array([0.25, 0.75, 2.0])).tolist() == [1.5, 0.5, 0.0]
    cfg.write_text("[scenario t]\nm = 0.5\nd = 3\ndata = custom-table\nfile = missing.csv\n")
    suite = load_config(cfg)
    with pytest.raises(ConfigError, match="not found"):
        harness.initial_data(suite.scenarios[0], suite.base_dir)


def test_separable_data_profile():
    sc = parse_config("[scenario s]\nm = 0.5\nd = 3\ndata = separable\nR0 = 1\ndomain = 1\n").scenarios[0]
    u0 = harness.initial_data(sc)
    r = np.linspace(0, 1, 11)
    vals = u0(r)
    assert vals[-1] == 0 and vals[0] > 0 and np.all(np.diff(vals) <= 1e-12)


# ----------------------------------------------------------------- running


def test_small_run_counts_and_provenance(small_bundle):
    c = small_bundle.counts
    assert c["failed"] == 0 and c["skipped"] == 0
    assert c["checked"] == c["held"] == len(small_bundle.reports) > 0
    assert small_bundle.provenance["grids"] == {"tiny": 60, "vss": 0}
    names = {rep.name for _, rep in small_bundle.reports}
    assert {"flux_lemma", "critical_time", "smoothing_upper", "structural"} <= names
    flux = [rep for sid, rep in small_bundle.reports if rep.name == "flux_lemma"]
    assert len(flux) == 2


def test_tolerances_come_from_coarse_companion(small_bundle):
    for _, rep in small_bundle.reports:
        if rep.name in harness.FIXED_THRESHOLD_CHECKS:
            continue
        assert rep.tolerance >= 1e-8
    bc = [rep for _, rep in small_bundle.reports if rep.variant == "benilan-crandall"]
    assert bc and all(rep.tolerance == 0 for rep in bc)


def test_failed_preconditions_become_skips():
    text = "[scenario a]\nm = 0.7\nd = 3\ndomain = 4\nn_cells = 40\nchecks = ac_lower, flux_lemma\nac_lower.t = 1e9\n"
    bundle = harness.run_scenarios(parse_config(text))
    skipped = {s.check for s in bundle.skipped}
    assert "ac_lower" in skipped
    assert bundle.counts["skipped"] == len(bundle.skipped)
    assert bundle.counts["checked"] == bundle.counts["held"] + bundle.counts["failed"] + len(skipped)


def test_workers_do_not_change_results():
    suite = parse_config(SMALL, grid=30)
    serial = harness.reports_csv_text(harness.run_scenarios(suite, workers=1))
    parallel = harness.reports_csv_text(harness.run_scenarios(suite, workers=2))
    assert serial == parallel


# -------------------------------------------------------------------- emit


def test_csv_is_deterministic_and_round_trips(small_bundle, tmp_path):
    text = harness.reports_csv_text(small_bundle)
    assert text == harness.reports_csv_text(small_bundle)
    assert text.splitlines()[0] == ",".join(harness.CSV_COLUMNS)
    (path,) = harness.emit(small_bundle, "csv", tmp_path)
    rows = harness.read_reports_csv(path)
    assert len(rows) == len(small_bundle.reports)
    for row, (_, rep) in zip(rows, small_bundle.reports):
        assert row["lhs"] == rep.lhs and row["margin"] == rep.margin and row["holds"] == rep.holds
    again = harness.emit_rows(rows, "csv", tmp_path / "copy")
    assert again[0].read_text() == text


def test_read_reports_rejects_foreign_csv(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError, match="header"):
        harness.read_reports_csv(path)


def test_table_and_empty_bundle(small_bundle, tmp_path):
    (path,) = harness.emit(small_bundle, "table", tmp_path)
    text = path.read_text()
    assert "worst margin" in text and "tiny" in text and "flux_lemma" in text
    empty = harness.ReportBundle(())
    with pytest.raises(ValueError):
        harness.emit(empty, "table", tmp_path)
    with pytest.raises(ValueError):
        harness.table_text([])
    with pytest.raises(ValueError):
        harness.emit(small_bundle, "xml", tmp_path)


def test_plotdata_and_figures(small_bundle, tmp_path):
    written = harness.emit(small_bundle, "plotdata", tmp_path)
    csvs = [p for p in written if p.suffix == ".csv"]
    pngs = [p for p in written if p.suffix == ".png"]
    assert (tmp_path / "plotdata" / "tiny__profiles.csv").exists()
    assert any("flux_lemma" in p.name for p in csvs)
    assert pngs and all(p.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n" for p in pngs)
    no_fig = harness.emit(small_bundle, "plotdata", tmp_path / "nofig", figures=False)
    assert not any(p.suffix == ".png" for p in no_fig)


def test_output_dir_precedence(monkeypatch):
    monkeypatch.delenv(harness.OUT_ENV, raising=False)
    assert str(harness.resolve_output_dir(None, "cfg")) == "cfg"
    assert str(harness.resolve_output_dir(None, None)) == "fde-lab-out"
    monkeypatch.setenv(harness.OUT_ENV, "env")
    assert str(harness.resolve_output_dir(None, "cfg")) == "env"
    assert str(harness.resolve_output_dir("cli", "cfg")) == "cli"
