from .acoustic import (
    METRIC_COLUMNS,
    AcousticTrainConfig,
    AcousticTrainer,
    critic_grad_norm_mean,
    evaluate_dml,
    evaluate_mse,
)
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .data import TrainingItem, build_item, build_items, fit_normalizers, random_crop
from .losses import (
    CriticLoss,
    GeneratorLoss,
    LossTermError,
    LossWeights,
    adv_loss_generator,
    critic_loss_gan,
    critic_loss_wgan_gp,
    generator_total_loss,
    gradient_penalty,
    interpolate_samples,
    loss_mse,
)
from .optim import EMA, SGD, Adam, ema_update, sgd_step, warmup_lr
from .vocoder import NumericFailure, VocoderTrainConfig, VocoderTrainer, load_vocoder, mean_nll
