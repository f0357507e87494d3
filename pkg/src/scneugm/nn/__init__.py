from .autograd import Tensor, no_grad
from .layers import DenseSpec, LstmSpec, dense_forward, init_dense, init_lstm, lstm_forward
from .params import LayoutMismatch, ParamVector, gaussian_sample, sgd_step

__all__ = ["Tensor", "no_grad", "DenseSpec", "LstmSpec", "dense_forward", "init_dense",
           "init_lstm", "lstm_forward", "LayoutMismatch", "ParamVector", "gaussian_sample",
           "sgd_step"]
