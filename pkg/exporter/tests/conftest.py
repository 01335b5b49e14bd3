from __future__ import annotations

import pytest
from mock_pipeline import MockDiTPipeline


@pytest.fixture
def pipeline() -> MockDiTPipeline:
    return MockDiTPipeline()
