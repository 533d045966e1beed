import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "slow_ok",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("slow_ok")


@pytest.fixture
def tiny_env():
    from roommem.env import EnvConfig

    # 6 humans over 6 locations keeps every episode cheap but non-trivial
    return EnvConfig(
        n_humans=6,
        n_objects=5,
        n_object_locations=6,
        episode_length=16,
        seed=3,
        kb_seed=7,
    )


@pytest.fixture
def small_kb():
    from roommem.kb import generate_synthetic_kb

    return generate_synthetic_kb(7, 5, 6)
