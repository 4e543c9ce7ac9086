"""
命名随机数流
由运行种子派生、互相独立的 Philox（计数器型）生成器；初始化、dropout、数据划分各用一条流
"""
import zlib
from typing import Dict

import numpy as np


class RngStreams:
    def __init__(self, seed: int):
        self.seed = int(seed)
        self._streams: Dict[str, np.random.Generator] = {}

    @staticmethod
    def _key(name: str) -> int:
        return zlib.crc32(name.encode("utf-8"))

    def generator(self, name: str) -> np.random.Generator:
        """同名流在同一个 RngStreams 内共享状态"""
        if name not in self._streams:
            self._streams[name] = self.fresh(name)
        return self._streams[name]

    def fresh(self, name: str) -> np.random.Generator:
        """每次调用都从流的起点重新开始"""
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=(self._key(name),))
        return np.random.Generator(np.random.Philox(seq))

    def split(self, name: str) -> "RngStreams":
        """派生子流族（例如每个 bootstrap 迭代一族）"""
        return RngStreams((self.seed * 1_000_003 + self._key(name)) % (2 ** 63))
