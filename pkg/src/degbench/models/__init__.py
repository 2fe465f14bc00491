"""Layer configs, capsule machinery, networks and training."""
from degbench.models.builders import (
    DESK_CAPSNET, DESK_VCAPSNET, NTT_FILTER_SIZES, attach_ntt, build_capsnet, build_named, build_small_cnn,
    build_vcapsnet_mini, ntt_filter_size, strip_ntt,
)
from degbench.models.capsules import MarginLossParams, RoutingResult, dynamic_routing, margin_loss, squash
from degbench.models.config import (
    ClassCaps, ConfigError, Conv, Decoder, Dense, Dropout, MaxPool, ModelConfig, Ntt, PrimaryCaps,
    infer_shapes,
)
from degbench.models.network import ForwardResult, Network, count_parameters, feature_extract, predict
from degbench.models.train import Hyperparams, NumericError, TrainResult, overfit, train
