"""Small numpy network engine: layers, losses, optimizers, gradient checks."""

from .layers import (LSTM, Conv, Dense, Dropout, Flatten, Layer, PairNormalize, Pool, ReLU,
                     Reshape, Sequential, Sigmoid, Softmax, Upsample)
from .losses import loss
from .optim import Optimizer, OptimizerSpec, optimizer_step
from .train import compute_gradients, fit, predict
