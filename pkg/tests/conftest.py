from pathlib import Path

import pytest

from cavcross import IntersectionLayout, VehicleParams

REPO_ROOT = Path(__file__).resolve().parent.parent
REFERENCE_SCENARIO = REPO_ROOT / "scenarios" / "reference.yaml"


@pytest.fixture
def layout() -> IntersectionLayout:
    return IntersectionLayout()


@pytest.fixture
def params() -> VehicleParams:
    return VehicleParams()


@pytest.fixture
def reference_path() -> Path:
    return REFERENCE_SCENARIO
