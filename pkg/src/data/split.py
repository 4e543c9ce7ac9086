"""
患者级数据划分
验证 / 测试集大小四舍五入，余数归训练集；给定种子结果确定
"""
import json
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple

from ..autodiff.rng import RngStreams
from ..errors import ConfigError, DataFormatError


@dataclass(frozen=True)
class DatasetSplit:
    train: Tuple[str, ...]
    validation: Tuple[str, ...]
    test: Tuple[str, ...]

    def sizes(self) -> Tuple[int, int, int]:
        return len(self.train), len(self.validation), len(self.test)

    def to_dict(self) -> dict:
        return {"train": list(self.train), "validation": list(self.validation), "test": list(self.test)}


def split_patients(patient_ids: Sequence[str], fractions: Tuple[float, float, float] = (0.8, 0.1, 0.1),
                   seed: int = 1) -> DatasetSplit:
    if len(fractions) != 3 or any(f < 0 for f in fractions):
        raise ConfigError(f"fractions must be three nonnegative numbers, got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError(f"fractions must sum to 1, got {sum(fractions)}")
    ids = sorted(set(patient_ids))
    if len(ids) != len(patient_ids):
        raise ConfigError("patient ids must be unique")

    n = len(ids)
    n_val = int(round(fractions[1] * n))
    n_test = int(round(fractions[2] * n))
    n_train = n - n_val - n_test
    if min(n_train, n_val, n_test) <= 0:
        raise ConfigError(f"split of {n} patients with fractions {fractions} leaves an empty part "
                          f"({n_train}/{n_val}/{n_test})")

    order = RngStreams(seed).fresh("split").permutation(n)
    shuffled = [ids[i] for i in order]
    return DatasetSplit(
        train=tuple(sorted(shuffled[:n_train])),
        validation=tuple(sorted(shuffled[n_train:n_train + n_val])),
        test=tuple(sorted(shuffled[n_train + n_val:])),
    )


def write_split(path: str, split: DatasetSplit) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(split.to_dict(), indent=2), encoding="utf-8")


def load_split(path: str) -> DatasetSplit:
    p = Path(path)
    if not p.exists():
        raise DataFormatError(str(path), 0, "<file>", "file does not exist")
    try:
        payload = json.loads(p.read_text(encoding="utf-8"))
        parts: List[Tuple[str, ...]] = [tuple(payload[k]) for k in ("train", "validation", "test")]
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise DataFormatError(str(path), 0, "<split>", f"not a valid split file ({e})") from e
    seen = set()
    for part in parts:
        if seen & set(part):
            raise DataFormatError(str(path), 0, "<split>", "parts overlap")
        seen |= set(part)
    return DatasetSplit(*parts)
