# Autodiff engine
from .tensor import Tensor, Node, ComputeGraph, backward, as_tensor
from .optim import Adam, AdamState, adam_step
from .gradcheck import grad_check, grad_check_params
from .rng import RngStreams
from . import ops
