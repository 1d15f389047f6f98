from .networks import (
    MLPParams,
    ModelParams,
    count_params,
    flatten_params,
    init_model,
    mlp_forward,
    softmax,
    unflatten_params,
)
from .a2c import (
    A2CHyper,
    A2CLearner,
    AdvantageEstimate,
    DivergenceError,
    Trajectory,
    compute_advantages,
    local_train,
    sample_action,
    scalar_loss,
    scalar_loss_grad,
)
from .centralized import CentralizedLearner
from .a2c import action_probs
from .checkpoint import load_model, save_model

__all__ = [
    "MLPParams",
    "ModelParams",
    "count_params",
    "flatten_params",
    "init_model",
    "mlp_forward",
    "softmax",
    "unflatten_params",
    "A2CHyper",
    "A2CLearner",
    "AdvantageEstimate",
    "DivergenceError",
    "Trajectory",
    "compute_advantages",
    "local_train",
    "sample_action",
    "scalar_loss",
    "scalar_loss_grad",
    "CentralizedLearner",
    "action_probs",
    "load_model",
    "save_model",
]
