"""
检查点：参数数组 (npz) + 结构超参数与运行配置 (内嵌 JSON)
"""
import json
import zipfile
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
from pydantic import ValidationError

from ..errors import CheckpointError, GraphDiffMedError
from ..utils.logger import model_logger as logger
from .graphdiffmed import ModelHyper, ModelState

_META_KEY = "__meta__"


def save_checkpoint(path: str, state: ModelState, run_config: Optional[dict] = None,
                    extra: Optional[dict] = None) -> None:
    meta = {"hyper": state.hyper.model_dump(mode="json"), "run_config": run_config or {}, "extra": extra or {}}
    arrays = state.to_arrays()
    arrays[_META_KEY] = np.array(json.dumps(meta, sort_keys=True))
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with p.open("wb") as f:
        np.savez(f, **arrays)
    logger.info(f"💾 检查点已保存: {path}")


def load_checkpoint(path: str) -> Tuple[ModelState, dict]:
    """返回 (ModelState, meta)；任何读取 / 结构问题都转换为 CheckpointError"""
    p = Path(path)
    if not p.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        with np.load(p, allow_pickle=False) as data:
            arrays = {k: data[k] for k in data.files}
    except (OSError, ValueError, EOFError, zipfile.BadZipFile) as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e

    if _META_KEY not in arrays:
        raise CheckpointError(f"{path}: missing metadata")
    try:
        meta = json.loads(str(arrays.pop(_META_KEY)))
        hyper = ModelHyper.model_validate(meta["hyper"])
    except (json.JSONDecodeError, KeyError, ValidationError) as e:
        raise CheckpointError(f"{path}: invalid metadata ({e})") from e

    state = ModelState.init(hyper, seed=0)
    try:
        state.load_arrays(arrays)
    except GraphDiffMedError as e:
        raise CheckpointError(f"{path}: parameters do not match the stored structure ({e})") from e
    return state, meta
