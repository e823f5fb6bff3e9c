from src.diffcore.tensor import (DiffArray, as_array, backward, no_grad,
                                 grad_enabled)
from src.diffcore.store import ParamStore, AdamWState
from src.diffcore.optim import AdamW, adamw_step, clip_grad_norm
from src.diffcore.checkpoint import (save_checkpoint, load_checkpoint,
                                     read_checkpoint, load_param_store)

__all__ = [
    'DiffArray', 'as_array', 'backward', 'no_grad', 'grad_enabled',
    'ParamStore', 'AdamWState', 'AdamW', 'adamw_step', 'clip_grad_norm',
    'save_checkpoint', 'load_checkpoint', 'read_checkpoint',
    'load_param_store',
]
