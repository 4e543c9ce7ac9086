# Training module
from .objective import DdiTracker, bce_loss, beta_anneal, ddi_loss, l2_regularization, total_loss, visit_loss
from .trainer import EpochLog, Trainer, TrainResult
from .pipeline import RunOutcome, corpus_for_run, evaluate_run, load_model, train_and_evaluate, train_run
