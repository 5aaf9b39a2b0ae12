"""Hand-written numpy neural-network core: layers, losses, Adam, gradient checks."""

from .functional import (batchnorm_backward, batchnorm_forward, conv2d_backward, conv2d_forward,
                         se_backward, se_forward, sigmoid)
from .gradcheck import grad_check, numeric_grad, rel_error
from .layers import (BatchNorm2d, Conv2d, Dense, GlobalAvgPool, HighPass, Layer, ReLU, SEBlock, Sequential,
                     Sigmoid, Upsample2x, he_uniform)
from .losses import bce, masked_mse
from .optim import Adam
