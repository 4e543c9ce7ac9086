from .state import OverallState, WorkerState, ArmTask, ArmResult
