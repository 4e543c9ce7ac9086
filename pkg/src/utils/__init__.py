# Utils module
from .logger import (get_logger, workflow_logger, data_logger, generator_logger,
                     model_logger, trainer_logger, evaluator_logger, report_logger)
