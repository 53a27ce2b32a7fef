"""Gibbsサンプラーのカウント行列

カウントは常に整数で保持する（Gibbsの除外ステップは正確な減算が前提）。
単一書き込みスレッド前提で、内部ロックは持たない。
"""

from dataclasses import dataclass

import numpy as np

from gdrf.errors import ContractViolation

UNASSIGNED = -1


@dataclass(eq=False)
class CountMatrices:
    word_topic: np.ndarray  # K×W: n_j^w
    topic_total: np.ndarray  # K: n_j^·
    assignments: np.ndarray  # N: z_i（未割当は -1）

    @classmethod
    def zeros(cls, n_topics: int, vocab_size: int, n_obs: int = 0) -> "CountMatrices":
        return cls(
            word_topic=np.zeros((n_topics, vocab_size), dtype=np.int64),
            topic_total=np.zeros(n_topics, dtype=np.int64),
            assignments=np.full(n_obs, UNASSIGNED, dtype=np.int64),
        )

    @classmethod
    def from_assignments(
        cls, words: np.ndarray, assignments: np.ndarray, n_topics: int, vocab_size: int
    ) -> "CountMatrices":
        words = np.asarray(words, dtype=np.int64)
        assignments = np.asarray(assignments, dtype=np.int64)
        if len(words) != len(assignments):
            raise ContractViolation("words and assignments differ in length")
        if len(words) and (assignments.min() < 0 or assignments.max() >= n_topics):
            raise ContractViolation("assignment out of topic range")
        if len(words) and (words.min() < 0 or words.max() >= vocab_size):
            raise ContractViolation("word out of vocabulary range")
        word_topic = np.zeros((n_topics, vocab_size), dtype=np.int64)
        np.add.at(word_topic, (assignments, words), 1)
        return cls(
            word_topic=word_topic,
            topic_total=word_topic.sum(axis=1),
            assignments=assignments.copy(),
        )

    @property
    def n_topics(self) -> int:
        return self.word_topic.shape[0]

    @property
    def vocab_size(self) -> int:
        return self.word_topic.shape[1]

    def _check_index(self, word: int, topic: int) -> None:
        if not (0 <= word < self.vocab_size):
            raise ContractViolation(f"word {word} not in [0, {self.vocab_size})")
        if not (0 <= topic < self.n_topics):
            raise ContractViolation(f"topic {topic} not in [0, {self.n_topics})")

    def increment(self, word: int, topic: int) -> "CountMatrices":
        self._check_index(word, topic)
        self.word_topic[topic, word] += 1
        self.topic_total[topic] += 1
        return self

    def decrement(self, word: int, topic: int) -> "CountMatrices":
        self._check_index(word, topic)
        if self.word_topic[topic, word] < 1:
            raise ContractViolation(
                f"decrement below zero: word_topic[{topic}][{word}] is 0"
            )
        self.word_topic[topic, word] -= 1
        self.topic_total[topic] -= 1
        return self

    def check(self) -> None:
        """不変条件の検証: topic_total[j] = Σ_w word_topic[j][w]、負値なし"""
        if (self.word_topic < 0).any() or (self.topic_total < 0).any():
            raise ContractViolation("negative counts")
        if not np.array_equal(self.word_topic.sum(axis=1), self.topic_total):
            raise ContractViolation("topic_total does not match word_topic row sums")

    def copy(self) -> "CountMatrices":
        return CountMatrices(
            word_topic=self.word_topic.copy(),
            topic_total=self.topic_total.copy(),
            assignments=self.assignments.copy(),
        )


def word_topic_posterior(counts: CountMatrices, beta: float) -> np.ndarray:
    """Φ の事後平均: Φ̂[j][w] = (n_j^w + β) / (n_j^· + Wβ)"""
    if not beta > 0:
        raise ContractViolation(f"beta must be > 0, got {beta}")
    numerator = counts.word_topic.astype(np.float64) + beta
    # 行和 = n_j^· + Wβ
    return numerator / numerator.sum(axis=1, keepdims=True)
