"""Split machine learning over reciprocal MIMO channels, in simulation.

The channel computes: an inter-node dense (or channel-mixing convolutional)
layer is realized by precoding, physical propagation and combining, summed
over a handful of transmissions.  Training needs no channel estimation; the
backward pass rides the reverse direction of the same channel.
"""

from .linalg import (DecompositionError, crandn, kron, make_rng, matrix_rank,
                     pinv, require_finite, spectral_norm, svd)
from .channel import (NOISELESS, ChannelState, NoiseModel, PathSet,
                      build_matrix, channel_from_dict, channel_snr,
                      channel_to_dict, evolve_channel, load_channel,
                      sample_channel, save_channel, steering_vector,
                      transmit_backward, transmit_forward, wrap_angle)
from .nn import (Adam, AvgPool2d, ComplexBatchNorm, ComplexNet, Conv2d, CRelu,
                 Dense, Flatten, Sgd, finite_difference_gradient,
                 load_checkpoint, modulus_softmax_loss, numerical_gradient,
                 save_checkpoint)
from .oac import (ALL_DESIGNS, ChannelRankError, FeasibilityError,
                  FeasibilityWarning, OacBackwardResult, OacConvLayer,
                  OacDesign, OacLayer, SnrReport, Transcript, decompose_weight,
                  equivalent_weight, feasible, ideal_matrices,
                  layer_from_weight, mix_channels, mix_kernels,
                  oac_conv_forward, oac_fc_backward, oac_fc_forward,
                  power_normalize, snr_report)
from .runtime import (BatchMetrics, CommLossConfig, CovarianceTracker,
                      RegretConfig, RegretResult, SplitLink, SplitSystem,
                      comm_loss_gradients, covariance_update, evaluate,
                      regret_experiment, train_batch)
from .bench import (CentralizedSystem, ConfigError, CostComparisonRow, CostRow,
                    DataConfig, Dataset, ExperimentConfig, LayerSpec,
                    TrainConfig, as_images, build_system, config_from_dict,
                    config_to_dict, cost_comparison, cost_report,
                    generate_dataset, link_snr, load_dataset, preset,
                    run_experiment, save_dataset)
from .verify import verify_all

__version__ = "0.1.0"
