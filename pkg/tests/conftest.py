from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parent.parent


@pytest.fixture
def repo_tracks() -> Path:
    return REPO_ROOT / "tracks"
