from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from gdrf.errors import ContractViolation, IngestionError
from gdrf.schemas.world import World


class Observation(NamedTuple):
    """学習データの最小単位: 位置と単語インデックスの組"""

    location: tuple[float, ...]
    word: int


@dataclass(frozen=True, eq=False)
class Observations:
    """観測の集合（同一地点の重複観測もそのまま保持する多重集合）"""

    locations: np.ndarray  # N×D float64
    words: np.ndarray  # N int64

    def __post_init__(self):
        locations = np.asarray(self.locations, dtype=np.float64)
        words = np.asarray(self.words, dtype=np.int64)
        if locations.ndim == 1:
            locations = locations.reshape(-1, 1)
        if locations.ndim != 2 or words.ndim != 1 or len(locations) != len(words):
            raise ContractViolation(
                f"locations {locations.shape} and words {words.shape} do not line up"
            )
        locations.setflags(write=False)
        words.setflags(write=False)
        object.__setattr__(self, "locations", locations)
        object.__setattr__(self, "words", words)

    @classmethod
    def from_records(cls, records: list[Observation], dim: int | None = None) -> "Observations":
        if not records:
            return cls.empty(dim or 1)
        return cls(
            locations=np.array([r.location for r in records], dtype=np.float64),
            words=np.array([r.word for r in records], dtype=np.int64),
        )

    @classmethod
    def empty(cls, dim: int) -> "Observations":
        return cls(locations=np.zeros((0, dim)), words=np.zeros(0, dtype=np.int64))

    def __len__(self) -> int:
        return len(self.words)

    def __iter__(self) -> Iterator[Observation]:
        for loc, w in zip(self.locations, self.words):
            yield Observation(tuple(float(v) for v in loc), int(w))

    @property
    def dim(self) -> int:
        return self.locations.shape[1]

    def subset(self, mask: np.ndarray) -> "Observations":
        return Observations(self.locations[mask], self.words[mask])

    def validate(self, world: World, vocab_size: int) -> None:
        """全観測が境界内・語彙内にあることを確認する（違反は全件まとめて報告）"""
        if self.dim != world.dim:
            raise IngestionError(
                f"observations have {self.dim} dims but the world has {world.dim}"
            )
        problems = []
        outside = np.flatnonzero(~world.contains(self.locations))
        for i in outside[:100]:
            problems.append(f"observation {i}: location {self.locations[i].tolist()} out of bounds")
        bad_words = np.flatnonzero((self.words < 0) | (self.words >= vocab_size))
        for i in bad_words[:100]:
            problems.append(f"observation {i}: word {self.words[i]} not in [0, {vocab_size})")
        if problems:
            raise IngestionError(
                f"{len(outside)} out-of-bounds locations, {len(bad_words)} invalid words",
                lines=sorted(set(outside.tolist()) | set(bad_words.tolist())),
                problems=problems,
            )
