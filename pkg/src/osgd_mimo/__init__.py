"""Continual-learning laboratory for ANN-assisted MIMO detection: an
orthogonal-projection stochastic optimizer, a from-scratch dense network,
Rician channel simulation, an exhaustive-search reference detector, and a
Monte-Carlo BER harness with experiment presets."""

from .channel import (
    ModulationScheme,
    ReceivedBlock,
    RicianModel,
    TransmitBlock,
    demap,
    ebn0_to_noise_var,
    modulate,
    qpsk,
    rician_pdf,
    sample_channel,
    sample_channels,
    transmit,
    transmit_blocks,
)
from .checkpoint import (
    Checkpoint,
    CheckpointFormatError,
    CheckpointVersionError,
    load_checkpoint,
    load_model,
    save_model,
)
from .config import ConfigError, RunConfig, echo_config, parse_config
from .detectors import (
    DetectionResult,
    build_features,
    candidate_set,
    count_bit_errors,
    feature_length,
    features_from_gram,
    gram,
    matched_filter,
    mlsd,
)
from .harness import (
    BerPoint,
    EvalGrid,
    ExperimentResult,
    MlsdDetector,
    NeuralDetector,
    TrainingTask,
    TrainResult,
    ber_at,
    curve,
    evaluate_ber,
    gap_to_mlsd,
    generate_batch,
    read_ber_csv,
    read_loss_csv,
    run_experiment_1,
    run_experiment_2,
    run_experiment_3,
    snr_at_ber,
    train,
    write_ber_csv,
    write_loss_csv,
)
from .network import (
    ForwardTrace,
    LayerGrads,
    LayerParams,
    NetworkSpec,
    backward,
    bce_loss,
    detector_spec,
    forward,
    init_network,
    predict_bits,
    sigmoid,
)
from .optimizers import (
    OptimizerConfig,
    OptimizerState,
    OsgdLayerState,
    StepReport,
    adam_step,
    batch_projector,
    init_state,
    lr_schedule,
    osgd_step,
    project_gradient,
    psi_update,
    sgd_step,
)

__version__ = "0.1.0"
