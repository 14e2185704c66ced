import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from teamplan.env import WorldSpec, generate_demonstrations
from teamplan.motion import DiffusionConfig, DiffusionPolicy, LibraryPolicy, train

CACHE_DIR = Path(__file__).parent / "_cache"


@pytest.fixture(scope="session")
def world():
    return WorldSpec.load()


@pytest.fixture(scope="session")
def demos(world):
    return generate_demonstrations(world, 120, np.random.default_rng(0))


@pytest.fixture(scope="session")
def policy(world, demos):
    """Trained diffusion policy, cached on disk across test sessions."""
    cfg = DiffusionConfig(seed=0)
    key = hashlib.sha256(
        json.dumps(cfg.to_jsonable(), sort_keys=True).encode()).hexdigest()[:12]
    path = CACHE_DIR / f"policy_{key}.tpz"
    if not path.exists():
        CACHE_DIR.mkdir(exist_ok=True)
        pol = train(demos, cfg, goals=np.asarray(world.objects),
                    walls=world.wall_array(), bounds=world.bounds)
        pol.save(path)
    return DiffusionPolicy.load(path)


@pytest.fixture()
def library_policy(demos):
    return LibraryPolicy({t: demos[t][:12] for t in demos})


@pytest.fixture(scope="session")
def policy_path(policy) -> str:
    """Disk path of the cached session policy (for subprocess workers)."""
    cfg = DiffusionConfig(seed=0)
    key = hashlib.sha256(
        json.dumps(cfg.to_jsonable(), sort_keys=True).encode()).hexdigest()[:12]
    return str(CACHE_DIR / f"policy_{key}.tpz")
