from .dml import (
    DmlLogProb,
    DmlParams,
    class_to_value,
    class_values,
    classes_to_int16,
    component_log_probs,
    dml_log_prob,
    dml_log_prob_tensor,
    dml_loss,
    dml_pmf,
    dml_sample,
    int16_to_classes,
    select_positions,
    value_to_class,
)
from .generate import IncrementalWaveNet, forced_params, generate
from .model import (
    DmlOutput,
    Upsampler,
    WaveNet,
    WaveNetBlock,
    WaveNetConfig,
    gated_block,
    wavenet_teacher_forced,
)
