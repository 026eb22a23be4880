import numpy as np
import pytest

from mfmsbo.errors import ParseError, ValidationError
from mfmsbo.simulator.runlog import HEADER, RunLog, emit_runlog, ingest_runlog, synthesize_runlog
from mfmsbo.simulator.surface import acceptance_surface
from mfmsbo.space import DEFAULT_SCALES

METRIC_COLUMNS = len(HEADER) - 7


@pytest.fixture(scope="module")
def log100():
    return synthesize_runlog(acceptance_surface(0), 100, seed=3)


def _row(w, m=10**9, z=19700):
    return ",".join([*(str(x) for x in w), str(m), str(z), *(["2.5"] * METRIC_COLUMNS)])


def test_round_trip_is_identity(tmp_path, log100):
    emit_runlog(log100, tmp_path / "log.csv")
    back = ingest_runlog(tmp_path / "log.csv")
    assert back == log100
    assert len(back) == 100


def test_header_only_gives_empty_log(tmp_path):
    (tmp_path / "e.csv").write_text(",".join(HEADER) + "\n")
    assert len(ingest_runlog(tmp_path / "e.csv")) == 0


def test_empty_file_and_bad_header(tmp_path):
    (tmp_path / "none.csv").write_text("")
    with pytest.raises(ParseError) as info:
        ingest_runlog(tmp_path / "none.csv")
    assert info.value.line == 1
    (tmp_path / "hdr.csv").write_text("a,b,c\n")
    with pytest.raises(ParseError):
        ingest_runlog(tmp_path / "hdr.csv")


def test_off_simplex_row_names_its_index(tmp_path):
    text = ",".join(HEADER) + "\n" + _row([0.2] * 5) + "\n" + _row([0.2, 0.2, 0.2, 0.2, 0.1]) + "\n"
    (tmp_path / "bad.csv").write_text(text)
    with pytest.raises(ValidationError) as info:
        ingest_runlog(tmp_path / "bad.csv")
    assert info.value.row == 1


def test_malformed_row_reports_line_number(tmp_path):
    text = ",".join(HEADER) + "\n" + _row([0.2] * 5) + "\n" + _row([0.2] * 5).replace("2.5", "oops", 1) + "\n"
    (tmp_path / "m.csv").write_text(text)
    with pytest.raises(ParseError) as info:
        ingest_runlog(tmp_path / "m.csv")
    assert info.value.line == 3
    (tmp_path / "short.csv").write_text(",".join(HEADER) + "\n1,2,3\n")
    with pytest.raises(ParseError) as info:
        ingest_runlog(tmp_path / "short.csv")
    assert info.value.line == 2


def test_undeclared_scale_rejected(tmp_path):
    (tmp_path / "s.csv").write_text(",".join(HEADER) + "\n" + _row([0.2] * 5, m=123) + "\n")
    with pytest.raises(ValidationError):
        ingest_runlog(tmp_path / "s.csv")
    assert len(ingest_runlog(tmp_path / "s.csv", scales=None)) == 1


def test_synthesized_log_structure(log100):
    assert set(log100.model_scale) <= set(DEFAULT_SCALES)
    assert np.allclose(log100.W.sum(axis=1), 1.0)
    ids = log100.run_ids()
    # each run contributes one row per grid step, cycling through scales
    assert np.bincount(ids)[:-1].tolist() == [3] * (ids.max())
    assert log100 == synthesize_runlog(acceptance_surface(0), 100, seed=3)


def test_inconsistent_columns_rejected():
    with pytest.raises(ValidationError):
        RunLog(np.full((2, 5), 0.2), [1, 2], [1], np.zeros((2, 11)))
