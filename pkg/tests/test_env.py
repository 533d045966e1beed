import dataclasses

import pytest

from roommem.env import ConfigError, EnvConfig, EnvError, RoomEnv, SnapshotError
from roommem.kb import generate_synthetic_kb, write_kb
from roommem.memory import strip_owner


def run_full_episode(env, answer_fn):
    """Drive one episode; answer_fn(env, question) -> answer string or None."""
    obs, q = env.reset()
    total = 0
    stream = [(obs, q)]
    done = False
    while not done:
        obs, q, r, done = env.step(answer_fn(env, stream[-1][1]))
        total += r
        if not done:
            stream.append((obs, q))
    return total, stream


def test_reset_delivers_step_zero(tiny_env):
    env = RoomEnv(tiny_env)
    obs, q = env.reset()
    assert obs.timestamp == 0
    assert obs.relation == "AtLocation"
    owner, obj = strip_owner(obs.head)
    assert owner == env.human_names[0]
    assert obj == env.object_of[owner]
    # only one human observed so far, the question can only be about them
    q_owner, _ = strip_owner(q.head)
    assert q_owner == owner


def test_observations_are_round_robin(tiny_env):
    cfg = dataclasses.replace(tiny_env, episode_length=2 * tiny_env.n_humans)
    env = RoomEnv(cfg)
    obs, _ = env.reset()
    owners = [strip_owner(obs.head)[0]]
    done = False
    while not done:
        obs, _, _, done = env.step(None)
        if obs is not None:
            owners.append(strip_owner(obs.head)[0])
    expected = list(env.human_names) * 2
    assert owners == expected[: len(owners)]
    assert len(owners) == cfg.episode_length


def test_observation_timestamps_count_up(tiny_env):
    env = RoomEnv(tiny_env)
    obs, _ = env.reset()
    stamps = [obs.timestamp]
    done = False
    while not done:
        obs, _, _, done = env.step(None)
        if obs is not None:
            stamps.append(obs.timestamp)
    assert stamps == list(range(tiny_env.episode_length))


def test_questions_only_about_observed_humans(tiny_env):
    env = RoomEnv(tiny_env)
    _, q = env.reset()
    seen = 1
    done = False
    while not done:
        owner, obj = strip_owner(q.head)
        assert owner in env.human_names[:seen]
        assert obj == env.object_of[owner]
        _, q, _, done = env.step(None)
        if not done:
            seen = min(seen + 1, tiny_env.n_humans)


def test_ledger_oracle_scores_full_marks(tiny_env):
    """Answering from the grading ledger is exactly right every step."""
    env = RoomEnv(tiny_env)
    total, _ = run_full_episode(
        env, lambda e, q: e.last_observed_location(strip_owner(q.head)[0]))
    assert total == tiny_env.episode_length


def test_wrong_and_missing_answers_score_zero(tiny_env):
    env = RoomEnv(tiny_env)
    total, _ = run_full_episode(env, lambda e, q: "no-such-place")
    assert total == 0
    env = RoomEnv(tiny_env)
    total, _ = run_full_episode(env, lambda e, q: None)
    assert total == 0


def test_reward_is_binary(tiny_env):
    env = RoomEnv(tiny_env)
    env.reset()
    done = False
    while not done:
        _, _, r, done = env.step(None)
        assert r in (0, 1)


def test_done_protocol(tiny_env):
    cfg = dataclasses.replace(tiny_env, episode_length=3)
    env = RoomEnv(cfg)
    env.reset()
    steps = 0
    done = False
    while not done:
        obs, q, r, done = env.step(None)
        steps += 1
    assert steps == 3
    assert obs is None and q is None
    with pytest.raises(EnvError):
        env.step(None)


def test_step_before_reset_raises(tiny_env):
    env = RoomEnv(tiny_env)
    with pytest.raises(EnvError):
        env.step(None)


def test_last_observed_location_tracks_reobservation(tiny_env):
    cfg = dataclasses.replace(tiny_env, episode_length=4 * tiny_env.n_humans)
    env = RoomEnv(cfg)
    obs, _ = env.reset()
    first = env.human_names[0]
    locs = [obs.tail]
    done = False
    while not done:
        obs, _, _, done = env.step(None)
        if obs is not None and strip_owner(obs.head)[0] == first:
            locs.append(obs.tail)
        if obs is not None:
            assert env.last_observed_location(first) == locs[-1]


def test_last_observed_location_unknown_human(tiny_env):
    env = RoomEnv(tiny_env)
    env.reset()
    with pytest.raises(EnvError):
        env.last_observed_location(env.human_names[-1])  # not yet observed


def test_same_seed_same_episode(tiny_env):
    streams = []
    for _ in range(2):
        env = RoomEnv(tiny_env)
        _, stream = run_full_episode(env, lambda e, q: None)
        streams.append(stream)
    assert streams[0] == streams[1]


def test_different_seed_different_episode(tiny_env):
    env1 = RoomEnv(tiny_env)
    env2 = RoomEnv(dataclasses.replace(tiny_env, seed=tiny_env.seed + 1))
    _, s1 = run_full_episode(env1, lambda e, q: None)
    _, s2 = run_full_episode(env2, lambda e, q: None)
    assert s1 != s2


def test_snapshot_restore_resumes_identically(tiny_env):
    cfg = dataclasses.replace(tiny_env, episode_length=24)
    env = RoomEnv(cfg)
    env.reset()
    for _ in range(7):
        env.step(None)
    blob = env.snapshot()
    clone = RoomEnv.restore(blob)
    done = False
    while not done:
        a = env.step(None)
        b = clone.step(None)
        assert a == b
        done = a[3]


def test_snapshot_before_reset_raises(tiny_env):
    with pytest.raises(EnvError):
        RoomEnv(tiny_env).snapshot()


def test_restore_rejects_garbage():
    with pytest.raises(SnapshotError):
        RoomEnv.restore(b"not a snapshot")
    with pytest.raises(SnapshotError):
        RoomEnv.restore(b"ROOMMEMENV1\n\x00\x01garbage")


def test_kb_path_is_used(tmp_path, tiny_env):
    from roommem.kb import load_kb

    kb = generate_synthetic_kb(99, tiny_env.n_objects, tiny_env.n_object_locations)
    path = str(tmp_path / "kb.tsv")
    write_kb(kb, path)
    env = RoomEnv(dataclasses.replace(tiny_env, kb_path=path))
    env.reset()
    assert env.kb == load_kb(path)
    assert env.kb.edges == kb.edges


def test_kb_path_overrides_config_counts(tmp_path, tiny_env):
    """With a file-backed knowledge base the file defines the vocabulary;
    the config's object/location counts are not consulted."""
    kb = generate_synthetic_kb(99, tiny_env.n_objects + 2, tiny_env.n_object_locations + 3)
    path = str(tmp_path / "kb.tsv")
    write_kb(kb, path)
    env = RoomEnv(dataclasses.replace(tiny_env, kb_path=path))
    env.reset()
    assert len(env.kb.objects) == tiny_env.n_objects + 2


def test_kb_path_with_one_location_raises(tmp_path, tiny_env):
    path = tmp_path / "kb.tsv"
    path.write_text("bowl\tkitchen\t2.0\n")
    env = RoomEnv(dataclasses.replace(tiny_env, kb_path=str(path)))
    with pytest.raises(ConfigError):
        env.reset()


def test_kb_seed_decoupled_from_env_seed(tiny_env):
    env1 = RoomEnv(tiny_env)
    env2 = RoomEnv(dataclasses.replace(tiny_env, seed=tiny_env.seed + 5))
    env1.reset()
    env2.reset()
    assert env1.kb == env2.kb


@pytest.mark.parametrize("field,value", [
    ("n_humans", 0),
    ("n_objects", 0),
    ("n_object_locations", 1),
    ("p_commonsense", 1.5),
    ("episode_length", 0),
    ("seed", -1),
    ("location_capacity", 0),
    ("routine_segments", (0, 2)),
    ("routine_durations", (2, 1)),
])
def test_config_validation(tiny_env, field, value):
    cfg = dataclasses.replace(tiny_env, **{field: value})
    with pytest.raises(ConfigError):
        RoomEnv(cfg)
