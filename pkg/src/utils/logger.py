import logging
import os
import sys
from typing import List

from dotenv import load_dotenv

load_dotenv()

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

# 第三方库的调试输出太吵
_QUIET = ("matplotlib", "PIL", "langgraph", "httpx")


def configure_logging(level: str = None, log_file: str = None) -> None:
    """按 .env 配置根 logger：GRAPHDIFFMED_LOG_LEVEL 控制级别，GRAPHDIFFMED_LOG_FILE 额外写文件"""
    level = (level or os.getenv("GRAPHDIFFMED_LOG_LEVEL", "INFO")).upper()
    log_file = log_file or os.getenv("GRAPHDIFFMED_LOG_FILE")
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stdout)]
    if log_file:
        handlers.append(logging.FileHandler(log_file, encoding="utf-8"))
    logging.basicConfig(level=level, format=LOG_FORMAT, datefmt='%H:%M:%S', handlers=handlers)
    for name in _QUIET:
        logging.getLogger(name).setLevel(logging.WARNING)


def get_logger(name: str) -> logging.Logger:
    return logging.getLogger(name)


configure_logging()

workflow_logger = get_logger("workflow")
data_logger = get_logger("data")
generator_logger = get_logger("generator")
model_logger = get_logger("model")
trainer_logger = get_logger("trainer")
evaluator_logger = get_logger("evaluator")
report_logger = get_logger("reporter")
