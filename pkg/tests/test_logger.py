import io

from app.models.schemas import ProgressRecord
from app.utils.logger import PROGRESS_COLUMNS, ProgressLogger, progress_row


def _record(generation, sigma=None):
    return ProgressRecord(method="GEP", benchmark="Nguyen6", trial=1, generation=generation,
                          best=0.5, mean=float("inf"), sigma=sigma)


def test_progress_row_formats():
    assert progress_row(_record(2)) == ["GEP", "Nguyen6", "1", "2", "0.5", "inf", ""]
    assert progress_row(_record(2, sigma=0.1))[-1] == "0.1"


def test_recent_records_are_bounded():
    logger = ProgressLogger(max_records=3)
    logger.extend([_record(g) for g in range(1, 6)])
    assert [r.generation for r in logger.get_recent(10)] == [3, 4, 5]
    assert [r.generation for r in logger.get_recent(1)] == [5]
    assert logger.get_recent(0) == []
    logger.clear()
    assert logger.get_recent() == []


def test_stream_writes_csv_rows():
    stream = io.StringIO()
    logger = ProgressLogger()
    logger.attach_stream(stream)
    logger.record(_record(1))
    logger.detach_stream()
    logger.record(_record(2))
    lines = stream.getvalue().splitlines()
    assert lines[0] == ",".join(PROGRESS_COLUMNS)
    assert lines[1] == "GEP,Nguyen6,1,1,0.5,inf,"
    assert len(lines) == 2
