"""Bridge a segmentation model to the certification engine: perturb one
input image with Gaussian noise, run inference repeatedly, and emit the
sampled outputs as one HCS1 stream over stdout."""

__version__ = "0.1.0"

from .models import ArgmaxModel, ConstantModel, load_model
from .protocol import Handshake, serve
