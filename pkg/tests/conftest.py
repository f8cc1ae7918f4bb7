import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hiercert.hierarchy import hierarchy_from_dict


def vehicle_chain_doc():
    """bus -> vehicle -> dynamic_obstacle chain plus siblings and a chainless road."""
    return {
        "levels": 3,
        "vertices": [
            {"id": 0, "name": "road", "level": 0, "parent": None},
            {"id": 1, "name": "car", "level": 0, "parent": 5},
            {"id": 2, "name": "truck", "level": 0, "parent": 5},
            {"id": 3, "name": "bus", "level": 0, "parent": 5},
            {"id": 4, "name": "person", "level": 0, "parent": 6},
            {"id": 5, "name": "vehicle", "level": 1, "parent": 7},
            {"id": 6, "name": "human", "level": 1, "parent": 7},
            {"id": 7, "name": "dynamic_obstacle", "level": 2, "parent": None},
        ],
    }


@pytest.fixture
def vehicle_chain():
    return hierarchy_from_dict(vehicle_chain_doc())


@pytest.fixture
def flat_two_classes():
    return hierarchy_from_dict({
        "levels": 1,
        "vertices": [
            {"id": 0, "name": "a", "level": 0, "parent": None},
            {"id": 1, "name": "b", "level": 0, "parent": None},
        ],
    })
