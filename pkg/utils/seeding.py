"""
可复现随机数。

所有随机性都来自 numpy 的 PCG64 生成器；子种子由主种子和一串标签
经 MurmurHash3 (mmh3, 32 位无符号) 派生，因此每个检查、每批样本、
每次多起点重试都有自己命名的随机流，且与调度顺序无关。
"""
from typing import Union

import mmh3
import numpy as np

Label = Union[str, int]


def derive_seed(seed: int, *labels: Label) -> int:
    key = ":".join([str(int(seed))] + [str(label) for label in labels])
    return mmh3.hash(key, seed=0x5EED, signed=False)


def rng(seed: int, *labels: Label) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(seed, *labels)))
