"""シード分割

1つのマスターシード（64bit符号なし整数）から、用途ごとの乱数生成器を決定的に導出する。

分割規則:
    sub_seed = master XOR PURPOSES[purpose]
    generator = Philox(key = sub_seed + counter * 2**64)

Philox はカウンタベースの生成器なので、同じ (master, purpose, counter) からは
常に同じ系列が得られ、他の用途の乱数消費に影響されない。
"""

import numpy as np

MASK64 = (1 << 64) - 1

# 用途ごとの固定定数（値を変えると全ての再現結果が変わる）
PURPOSES = {
    "simulate.fields": 0x9E3779B97F4A7C15,
    "simulate.phi": 0xBF58476D1CE4E5B9,
    "simulate.observations": 0x94D049BB133111EB,
    "fit.init": 0x2545F4914F6CDD1D,
    "fit.sweep": 0x5851F42D4C957F2D,
    "fit.svi": 0x14057B7EF767814F,
    "rost.init": 0xD6E8FEB86659FD93,
    "rost.sweep": 0xA0761D6478BD642F,
    "recovery.run": 0xE7037ED1A0B428DB,
    "test": 0x8EBC6AF09C88C6E3,
}


def derive_seed(master: int, purpose: str) -> int:
    if purpose not in PURPOSES:
        raise KeyError(f"unknown seed purpose: {purpose}")
    return (int(master) & MASK64) ^ PURPOSES[purpose]


def generator(master: int, purpose: str, counter: int = 0) -> np.random.Generator:
    key = derive_seed(master, purpose) + (int(counter) << 64)
    return np.random.Generator(np.random.Philox(key=key))


def as_generator(seed: int | np.random.Generator, purpose: str) -> np.random.Generator:
    """シード値なら導出し、生成器ならそのまま使う"""
    if isinstance(seed, np.random.Generator):
        return seed
    return generator(seed, purpose)
