import os
import pathlib

import pytest


@pytest.fixture
def fixtures():
    default = pathlib.Path(__file__).resolve().parents[1] / "fixtures"
    return pathlib.Path(os.environ.get("EVALLM_FIXTURES", default))
