from __future__ import annotations

from pathlib import Path

import pytest

from memstream.timebase import Interval

DATA_DIR = Path(__file__).parent / "data"


def iv(start_s: float, end_s: float) -> Interval:
    return Interval.from_seconds(start_s, end_s)


@pytest.fixture
def data_dir() -> Path:
    return DATA_DIR
