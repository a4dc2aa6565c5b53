import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

REPO_ROOT = Path(__file__).resolve().parent.parent
SCENARIO_DIR = REPO_ROOT / "scenarios"
DATA_DIR = Path(__file__).resolve().parent / "data"


@pytest.fixture(scope="session")
def scenario_dir() -> Path:
    return SCENARIO_DIR


@pytest.fixture(scope="session")
def canonical_cfg() -> dict:
    from fleetsim.scenario import load_config

    return load_config(SCENARIO_DIR / "canonical.yaml")


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture(scope="session")
def mini_catalog_dir(tmp_path_factory) -> Path:
    """Small fast scenario catalog for protocol and concurrency tests."""
    d = tmp_path_factory.mktemp("catalog")
    (d / "mini.yaml").write_text(
        "name: mini\n"
        "seed: 0\n"
        "net_rows: 4\n"
        "net_cols: 4\n"
        "net_spacing_miles: 0.5\n"
        "net_speed_mpm: 0.25\n"
        "n_x: 2\n"
        "n_y: 2\n"
        "x_min: -0.25\n"
        "x_max: 1.75\n"
        "y_min: -0.25\n"
        "y_max: 1.75\n"
        "total_trips: 12\n"
        "hourly_profile: [1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0,"
        " 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]\n"
        "hotspots:\n"
        "  - {cell: [1, 1], weight: 1.0, dest_weight: 1.0}\n"
        "  - {cell: [2, 2], weight: 1.0, dest_weight: 1.0}\n"
        "fleet_size: 4\n"
        "dt_rebalance: 60\n"
        "horizon_steps: 120\n"
    )
    return d
