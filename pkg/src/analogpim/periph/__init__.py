from .model import ApproximatorModel, instantiate_conductances  # noqa: F401
from .train import TrainConfig, groundtruth_sa, train_sa  # noqa: F401
from .vtc import VTCModel, vtc_eval  # noqa: F401
