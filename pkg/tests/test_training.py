import numpy as np
import pytest

from advtts.autograd import no_grad
from advtts.dsp import ConfigurationError
from advtts.nets.module import Parameter
from advtts.training.acoustic import AcousticTrainConfig, AcousticTrainer
from advtts.training.checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from advtts.training.losses import adv_loss_generator, loss_mse
from advtts.training.optim import EMA, SGD, Adam, ema_update, sgd_step, warmup_lr
from advtts.training.vocoder import VocoderTrainConfig, VocoderTrainer, load_vocoder, mean_nll
from advtts.wavenet import WaveNetConfig

from conftest import small_wavenet


def tiny_config(**kw):
    base = dict(mode="wgan-gp", n1=1, n2=2, n3=3, batch_size=2, max_frames=10, hidden=6, layers=2,
                critic_width=6, critic_layers=2, gamma_w=1e-4, seed=3)
    return AcousticTrainConfig(**{**base, **kw})


def tiny_vocoder_config():
    return WaveNetConfig(blocks=2, residual_channels=4, skip_channels=4)


# -- optimizers ------------------------------------------------------------------

def test_sgd_hand_step():
    p = Parameter(np.array([1.0]))
    p.grad = np.array([2.0])
    SGD([p], 0.1).step()
    assert p.data[0] == pytest.approx(0.8, abs=1e-15)
    q = Parameter(np.array([1.0]))
    sgd_step([q], [np.array([2.0])], 0.1)
    assert q.data[0] == p.data[0]


def test_sgd_decay_by_epoch():
    opt = SGD([], 0.01, 0.95)
    assert opt.set_epoch(1) == 0.01
    assert opt.set_epoch(3) == pytest.approx(0.01 * 0.95 ** 2, rel=1e-15)


def test_adam_first_step_hand_formula():
    p = Parameter(np.array([0.5, -1.0]))
    g = np.array([0.3, -2.0])
    p.grad = g
    Adam([p], lr0=0.01).step()
    m, v = 0.1 * g / 0.1, 0.001 * g * g / 0.001
    assert np.allclose(p.data, np.array([0.5, -1.0]) - 0.01 * m / (np.sqrt(v) + 1e-8), atol=1e-15)


def test_warmup_schedule_shape():
    assert warmup_lr(1.0, 5, 10) == 0.5
    assert warmup_lr(1.0, 10, 10) == 1.0
    assert warmup_lr(1.0, 40, 10) == 0.5
    assert warmup_lr(1.0, 3, 0) == 1.0


def test_default_rates_and_decay():
    cfg = AcousticTrainConfig()
    assert (cfg.lr_g, cfg.lr_d, cfg.lr_decay) == (0.01, 0.001, 0.95)
    assert VocoderTrainConfig().ema_decay == 0.9999


def test_ema_zero_decay_copies():
    shadow = {"w": np.zeros(3)}
    ema_update(shadow, {"w": np.arange(3.0)}, 0.0)
    assert np.array_equal(shadow["w"], np.arange(3.0))


def test_ema_geometric_convergence():
    net = small_wavenet(blocks=1, channels=2)
    ema = EMA(net, 0.9)
    start = {k: v.copy() for k, v in ema.shadow.items()}
    target = {k: v + 1.0 for k, v in net.state_dict().items()}
    net.load_state_dict(target)
    for _ in range(20):
        ema.update()
    for k in target:
        gap = start[k] - target[k]
        assert np.allclose(ema.shadow[k] - target[k], 0.9 ** 20 * gap, atol=1e-12)


# -- checkpoints -----------------------------------------------------------------

def test_checkpoint_round_trip_and_errors(tmp_path, rng):
    groups = {"a": {"w": rng.normal(size=(2, 3))}, "b": {"x": np.arange(4.0)}}
    save_checkpoint(tmp_path / "c.zip", {"epoch": 4}, groups)
    meta, back = load_checkpoint(tmp_path / "c.zip")
    assert meta["epoch"] == 4
    assert np.array_equal(back["a"]["w"], groups["a"]["w"])
    (tmp_path / "junk.zip").write_bytes(b"not a zip")
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "junk.zip")
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "missing.zip")


# -- acoustic trainer ------------------------------------------------------------

def test_stage_boundaries():
    cfg = AcousticTrainConfig(n1=2, n2=4, n3=6)
    assert [cfg.stage(e) for e in range(1, 7)] == ["warmup"] * 2 + ["adversarial"] * 2 + ["finetune"] * 2
    with pytest.raises(ConfigurationError):
        AcousticTrainConfig(n1=3, n2=2, n3=4)
    with pytest.raises(ConfigurationError):
        AcousticTrainConfig(mode="lsgan")


def test_finetune_needs_a_vocoder(tiny_items):
    with pytest.raises(ConfigurationError):
        AcousticTrainer(tiny_config(), tiny_items)
    AcousticTrainer(tiny_config(gamma_w=0.0), tiny_items)


def test_adversarial_weight_is_ratio_of_means(tiny_items):
    tr = AcousticTrainer(tiny_config(gamma_w=0.0), tiny_items)
    tr.run_epoch()
    mse, adv = [], []
    with no_grad():
        for it in tiny_items:
            y_hat = tr.generator(it.bundle)
            mse.append(loss_mse(it.mel, y_hat).item())
            adv.append(abs(adv_loss_generator(y_hat, it.code, tr.critic).item()))
    expected = np.mean(mse) / np.mean(adv)
    row = tr.run_epoch()
    assert row["stage"] == "adversarial"
    assert abs(row["gamma_D"] - expected) <= 1e-9 * expected


def test_metrics_columns_follow_stages(tiny_items):
    tr = AcousticTrainer(tiny_config(), tiny_items, small_wavenet(blocks=2, channels=4))
    rows = tr.train()
    assert [r["stage"] for r in rows] == ["warmup", "adversarial", "finetune"]
    assert rows[0]["L_ADV"] is None and rows[0]["L_D"] is None
    assert rows[1]["L_ADV"] is not None and rows[1]["L_DML"] is None
    assert rows[2]["L_DML"] is not None
    assert rows[1]["lr_G"] == pytest.approx(0.01 * 0.95, rel=1e-15)
    header = tr.metrics_csv().splitlines()[0]
    assert header == "epoch,stage,L_MSE,L_ADV,L_DML,L_D,grad_penalty,gamma_D,lr_G,lr_D,wall_seconds"


def test_baseline_has_no_critic(tiny_items):
    tr = AcousticTrainer(tiny_config(mode="mse-baseline"), tiny_items)
    rows = tr.train()
    assert tr.critic is None
    assert all(r["L_ADV"] is None and r["L_DML"] is None for r in rows)


def test_training_is_deterministic(tiny_items):
    def run():
        tr = AcousticTrainer(tiny_config(), tiny_items, small_wavenet(blocks=2, channels=4))
        tr.train()
        return tr.metrics_csv(include_wall=False), tr.generator.state_dict()

    (csv_a, ga), (csv_b, gb) = run(), run()
    assert csv_a == csv_b
    assert all(np.array_equal(ga[k], gb[k]) for k in ga)


def test_resume_is_bit_exact(tiny_items, tmp_path):
    wn = small_wavenet(blocks=2, channels=4)
    full = AcousticTrainer(tiny_config(), tiny_items, wn)
    full.train()
    part = AcousticTrainer(tiny_config(), tiny_items, wn)
    part.train(until=2)
    part.save(tmp_path / "mid.zip")
    resumed = AcousticTrainer.load(tmp_path / "mid.zip", tiny_items, wn)
    assert resumed.epoch == 2
    resumed.train()
    assert resumed.metrics_csv(False) == full.metrics_csv(False)
    a, b = resumed.generator.state_dict(), full.generator.state_dict()
    assert all(np.array_equal(a[k], b[k]) for k in a)


def test_vocoder_stays_frozen(tiny_items):
    wn = small_wavenet(blocks=2, channels=4)
    before = wn.state_dict()
    AcousticTrainer(tiny_config(), tiny_items, wn).train()
    after = wn.state_dict()
    assert all(np.array_equal(before[k], after[k]) for k in before)


def test_run_dir_outputs(tiny_items, tmp_path):
    AcousticTrainer(tiny_config(), tiny_items, small_wavenet(blocks=2, channels=4), tmp_path).train()
    names = sorted(p.name for p in (tmp_path / "checkpoints").iterdir())
    assert names == ["adversarial_epoch0002.zip", "finetune_epoch0003.zip", "latest.zip",
                     "warmup_epoch0001.zip"]
    assert len((tmp_path / "metrics.csv").read_text().splitlines()) == 4


# -- vocoder trainer -------------------------------------------------------------

def vocoder_trainer(steps=4):
    return VocoderTrainer(tiny_vocoder_config(), VocoderTrainConfig(steps=steps, max_frames=3, lr=5e-3, seed=2))


def test_vocoder_training_is_deterministic(tiny_items):
    a, b = vocoder_trainer(), vocoder_trainer()
    assert a.train(tiny_items) == b.train(tiny_items)


def test_vocoder_resume_is_bit_exact(tiny_items, tmp_path):
    full = vocoder_trainer(6)
    full.train(tiny_items)
    part = vocoder_trainer(6)
    part.train(tiny_items, steps=3)
    part.save(tmp_path / "v.zip")
    resumed = VocoderTrainer.load(tmp_path / "v.zip")
    resumed.train(tiny_items)
    assert resumed.losses == full.losses
    for k, v in full.ema.shadow.items():
        assert np.array_equal(resumed.ema.shadow[k], v)


def test_vocoder_loads_averaged_weights(tiny_items, tmp_path):
    tr = vocoder_trainer()
    tr.train(tiny_items)
    tr.save(tmp_path / "v.zip")
    model = load_vocoder(tmp_path / "v.zip")
    assert all(np.array_equal(model.state_dict()[k], v) for k, v in tr.ema.shadow.items())
    assert all(not p.requires_grad for p in model.parameters())
    assert mean_nll(tr.model, tiny_items[:1], tr.ema.shadow) == pytest.approx(
        mean_nll(model, tiny_items[:1]), rel=1e-12)


def test_vocoder_learns_on_repeated_data(tiny_items):
    tr = VocoderTrainer(tiny_vocoder_config(), VocoderTrainConfig(steps=60, max_frames=3, lr=1e-2, seed=0))
    before = mean_nll(tr.model, tiny_items[:2])
    tr.train(tiny_items[:2])
    assert mean_nll(tr.model, tiny_items[:2]) < before
