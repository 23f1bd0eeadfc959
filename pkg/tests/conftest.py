import pytest

from contact_fronts.config import RunConfig
from contact_fronts.events import EventLog, ObjectKey
from contact_fronts.lattice import Configuration


@pytest.fixture
def hand_log():
    """Fertile 0->1 at 0.5, healing at 0 at 0.8, on [0, 1]."""
    return EventLog.scripted(
        {
            ObjectKey.fertile(0, 1): [0.5],
            ObjectKey.healing(0): [0.8],
        }
    )


@pytest.fixture
def sterility_log():
    """Arrows under which inherited sterility fails to be monotone."""
    return EventLog.scripted(
        {
            ObjectKey.blocking(1, 2): [0.1],
            ObjectKey.fertile(0, 1): [0.2],
            ObjectKey.fertile(1, 2): [0.3],
        },
        p=0.5,
    )


@pytest.fixture
def single_site():
    return Configuration(0, [1])


@pytest.fixture
def pair_sites():
    return Configuration(0, [1, 1])


@pytest.fixture
def small_config(tmp_path):
    """Quick run settings writing into a temporary directory."""
    config = RunConfig.from_dict(
        {
            "kind": "spont",
            "lambda": 4.0,
            "p": 0.9,
            "horizon": 2.0,
            "trials": 4,
            "seed": 11,
            "guard": 0.5,
            "output_dir": str(tmp_path / "results"),
            "progress": False,
        }
    )
    return config
