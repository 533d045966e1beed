"""Partially observable room environment.

Each step the agent receives one observation quadruple (where one human's
object is right now) and one question about a previously observed human; the
answer given for the question is graded on the next step against that
human's location at its most recent observation.  Humans are observed in
fixed round-robin order, questions are sampled uniformly over everything
observed so far.
"""
from __future__ import annotations

import pickle
from dataclasses import asdict, dataclass, replace

import numpy as np

from .des import RoomState, Routine, Human, build_room, tick, true_location
from .kb import KbError, KnowledgeBase, generate_synthetic_kb, load_kb
from .memory import RELATION, format_head
from .seeding import ROLE_DES, ROLE_QUESTIONS, derive_rng, derive_seed

__all__ = [
    "ConfigError",
    "EnvError",
    "SnapshotError",
    "EnvConfig",
    "Observation",
    "Question",
    "RoomEnv",
]

_SNAPSHOT_MAGIC = b"ROOMMEMENV1\n"


class ConfigError(ValueError):
    """Invalid configuration value or combination."""


class EnvError(RuntimeError):
    """Environment used out of protocol (step before reset, step after done)."""


class SnapshotError(ValueError):
    """Snapshot blob is corrupt or from an incompatible version."""


@dataclass(frozen=True)
class EnvConfig:
    n_humans: int = 64
    n_objects: int = 16
    n_object_locations: int = 28
    p_commonsense: float = 0.5
    episode_length: int = 128
    seed: int = 0
    # world-knowledge source: a file, or a synthetic knowledge base drawn from
    # kb_seed.  kb_seed is separate from seed so that train/validation/test
    # environments with different seeds share one world.  With kb_path set,
    # the file defines the object/location vocabulary and n_objects /
    # n_object_locations are not consulted.
    kb_path: str | None = None
    kb_seed: int = 13
    location_capacity: int = 8
    routine_segments: tuple[int, int] = (2, 5)
    routine_durations: tuple[int, int] = (1, 4)

    def validate(self) -> None:
        if self.n_humans < 1:
            raise ConfigError("n_humans must be at least 1")
        if self.n_objects < 1:
            raise ConfigError("n_objects must be at least 1")
        if self.n_object_locations < 2:
            raise ConfigError("n_object_locations must be at least 2")
        if not 0.0 <= self.p_commonsense <= 1.0:
            raise ConfigError("p_commonsense must be in [0, 1]")
        if self.episode_length < 1:
            raise ConfigError("episode_length must be at least 1")
        if self.seed < 0 or self.kb_seed < 0:
            raise ConfigError("seeds must be non-negative")
        if self.location_capacity < 1:
            raise ConfigError("location_capacity must be at least 1")
        s_lo, s_hi = self.routine_segments
        d_lo, d_hi = self.routine_durations
        if not (1 <= s_lo <= s_hi and 1 <= d_lo <= d_hi):
            raise ConfigError("invalid routine ranges")


@dataclass(frozen=True)
class Observation:
    head: str        # "Bob's laptop"
    relation: str    # always "AtLocation"
    tail: str        # location name
    timestamp: int   # environment step that produced this observation


@dataclass(frozen=True)
class Question:
    head: str        # "Bob's laptop"
    relation: str


class RoomEnv:
    """Gym-style wrapper around the room simulation.

    Usage: env = RoomEnv(config); obs, q = env.reset();
    obs, q, reward, done = env.step(answer).  After `episode_length` graded
    answers, step returns (None, None, reward, True).
    """

    def __init__(self, config: EnvConfig):
        config.validate()
        self.config = config
        self._started = False

    # -- lifecycle -----------------------------------------------------------

    def reset(self) -> tuple[Observation, Question]:
        """(Re)build everything from the config and deliver step 0."""
        cfg = self.config
        if cfg.kb_path is not None:
            kb = load_kb(cfg.kb_path)
            if len(kb.locations) < 2:
                raise ConfigError(
                    f"knowledge base {cfg.kb_path!r} has fewer than 2 locations")
        else:
            kb = generate_synthetic_kb(cfg.kb_seed, cfg.n_objects, cfg.n_object_locations)
        self.kb = kb
        self._room = build_room(
            kb, cfg.n_humans, cfg.p_commonsense,
            seed=derive_seed(cfg.seed, ROLE_DES),
            location_capacity=cfg.location_capacity,
            segment_range=cfg.routine_segments,
            duration_range=cfg.routine_durations,
        )
        self.human_names = tuple(h.name for h in self._room.humans)
        self.object_of = {h.name: h.obj for h in self._room.humans}
        self._qrng = derive_rng(cfg.seed, ROLE_QUESTIONS)
        self._obs_count = 0
        self._grades = 0
        self._observed: list[str] = []
        self._observed_set: set[str] = set()
        self._ledger: dict[str, str] = {}
        self._done = False
        self._started = True
        tick(self._room)
        obs = self._observe_next()
        question = self._sample_question()
        return obs, question

    def step(self, answer: str | None) -> tuple[Observation | None, Question | None, int, bool]:
        """Grade `answer` for the pending question, then advance the room."""
        if not self._started:
            raise EnvError("call reset() before step()")
        if self._done:
            raise EnvError("episode is done")
        reward = int(answer == self._ledger[self._pending_human])
        self._grades += 1
        if self._grades >= self.config.episode_length:
            self._done = True
            return None, None, reward, True
        tick(self._room)
        obs = self._observe_next()
        question = self._sample_question()
        return obs, question, reward, False

    # -- internals -----------------------------------------------------------

    def _observe_next(self) -> Observation:
        room = self._room
        h = room.humans[self._obs_count % len(room.humans)]
        loc = true_location(room, h.name)
        obs = Observation(format_head(h.name, h.obj), RELATION, loc, self._obs_count)
        self._obs_count += 1
        self._ledger[h.name] = loc
        if h.name not in self._observed_set:
            self._observed_set.add(h.name)
            self._observed.append(h.name)
        return obs

    def _sample_question(self) -> Question:
        i = int(self._qrng.integers(len(self._observed)))
        human = self._observed[i]
        self._pending_human = human
        return Question(format_head(human, self.object_of[human]), RELATION)

    # -- oracles -------------------------------------------------------------

    def last_observed_location(self, human: str) -> str:
        """Grading ledger: where the human's object was at its most recent
        observation.  This, not the live room, is what answers are graded on."""
        try:
            return self._ledger[human]
        except KeyError:
            raise EnvError(f"human {human!r} has not been observed yet") from None

    def room_location(self, human: str) -> str:
        """Live ground truth, for diagnostics only."""
        return true_location(self._room, human)

    # -- snapshot / restore --------------------------------------------------

    def snapshot(self) -> bytes:
        """Opaque versioned blob capturing enough to resume the episode."""
        if not self._started:
            raise EnvError("nothing to snapshot before reset()")
        room = self._room
        payload = {
            "version": 1,
            "config": asdict(self.config),
            "kb": {
                "objects": self.kb.objects,
                "locations": self.kb.locations,
                "edges": self.kb.edges,
            },
            "humans": [
                (h.name, h.obj, h.routine.segments, h.seg, h.steps_in_seg)
                for h in room.humans
            ],
            "current_location": dict(room.current_location),
            "occupancy": dict(room.occupancy),
            "location_capacity": room.location_capacity,
            "timestep": room.timestep,
            "qrng": self._qrng.bit_generator.state,
            "obs_count": self._obs_count,
            "grades": self._grades,
            "observed": list(self._observed),
            "ledger": dict(self._ledger),
            "pending_human": self._pending_human,
            "done": self._done,
        }
        return _SNAPSHOT_MAGIC + pickle.dumps(payload, protocol=4)

    @classmethod
    def restore(cls, blob: bytes) -> "RoomEnv":
        if not isinstance(blob, (bytes, bytearray)) or not blob.startswith(_SNAPSHOT_MAGIC):
            raise SnapshotError("not a room environment snapshot")
        try:
            payload = pickle.loads(bytes(blob[len(_SNAPSHOT_MAGIC):]))
        except Exception as exc:
            raise SnapshotError(f"corrupt snapshot blob: {exc}") from None
        if not isinstance(payload, dict) or payload.get("version") != 1:
            raise SnapshotError("unsupported snapshot version")
        cfg_dict = dict(payload["config"])
        cfg_dict["routine_segments"] = tuple(cfg_dict["routine_segments"])
        cfg_dict["routine_durations"] = tuple(cfg_dict["routine_durations"])
        env = cls(EnvConfig(**cfg_dict))
        env.kb = KnowledgeBase(
            tuple(payload["kb"]["objects"]),
            tuple(payload["kb"]["locations"]),
            tuple(tuple(e) for e in payload["kb"]["edges"]),
        )
        humans = [
            Human(name, obj, Routine(tuple(tuple(s) for s in segs)), seg, steps)
            for name, obj, segs, seg, steps in payload["humans"]
        ]
        env._room = RoomState(
            humans,
            dict(payload["current_location"]),
            dict(payload["occupancy"]),
            payload["location_capacity"],
            payload["timestep"],
        )
        env.human_names = tuple(h.name for h in humans)
        env.object_of = {h.name: h.obj for h in humans}
        env._qrng = np.random.default_rng()
        env._qrng.bit_generator.state = payload["qrng"]
        env._obs_count = payload["obs_count"]
        env._grades = payload["grades"]
        env._observed = list(payload["observed"])
        env._observed_set = set(env._observed)
        env._ledger = dict(payload["ledger"])
        env._pending_human = payload["pending_human"]
        env._done = payload["done"]
        env._started = True
        return env
