from .network import (LstmState, backward, bdlstm_forward, draw_dropout_masks,
                      edlstm_forward, forward, lstm_cell_forward, lstm_forward,
                      mask_shapes, predict, predict_batch)
from .params import (Checkpoint, DenseParams, LstmLayerParams, ModelParams,
                     ModelSpec, load_checkpoint, save_checkpoint,
                     zero_gradients)

__all__ = [
    "LstmState", "backward", "bdlstm_forward", "draw_dropout_masks",
    "edlstm_forward", "forward", "lstm_cell_forward", "lstm_forward",
    "mask_shapes", "predict", "predict_batch",
    "Checkpoint", "DenseParams", "LstmLayerParams", "ModelParams",
    "ModelSpec", "load_checkpoint", "save_checkpoint", "zero_gradients",
]
