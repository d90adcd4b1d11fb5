import numpy as np
import pytest
from hypothesis import given, strategies as st

from advtts.autograd import DimensionError, Tensor, backward, no_grad
from advtts.autograd.gradcheck import gradcheck
from advtts.dsp import ConditioningBundle, speaker_code
from advtts.nets import (
    BiSru,
    Critic,
    CriticConfig,
    Generator,
    GeneratorConfig,
    SruLayer,
    critic_forward,
    generator_forward,
    sru_cell_step,
    sru_layer,
    sru_scan,
)
from advtts.training.losses import loss_mse


def naive_sru(layer, seq, c0=None):
    """Step-by-step reference written directly from the recurrence."""
    W = layer.weight.data
    H = layer.hidden
    sig = lambda z: 1 / (1 + np.exp(-z))  # noqa: E731
    c = np.zeros(H) if c0 is None else c0
    out = []
    for x in seq:
        u = x @ W
        f = sig(u[H:2 * H] + layer.bias_f.data)
        r = sig(u[2 * H:] + layer.bias_r.data)
        c = f * c + (1 - f) * u[:H]
        hw = x @ layer.highway.data if layer.highway is not None else x
        out.append(r * np.maximum(c, 0) + (1 - r) * hw)
    return np.array(out)


def bundle(rng, T, spk=0, gender=0):
    return ConditioningBundle(rng.uniform(size=(T, 381)), speaker_code(spk, gender))


# -- SRU -------------------------------------------------------------------------

def test_forget_gate_open_carries_state(rng):
    layer = SruLayer(rng, 4, 4)
    layer.bias_f.data[:] = 1e3
    c_prev = Tensor(rng.normal(size=4))
    _, c = sru_cell_step(Tensor(rng.normal(size=4)), c_prev, layer)
    assert np.array_equal(c.data, c_prev.data)


def test_forget_gate_closed_resets_to_candidate(rng):
    layer = SruLayer(rng, 4, 4)
    layer.bias_f.data[:] = -1e3
    x = rng.normal(size=4)
    _, c = sru_cell_step(Tensor(x), Tensor(rng.normal(size=4)), layer)
    assert np.array_equal(c.data, x @ layer.weight.data[:, :4])


def test_cell_step_gradients_match_differences(rng):
    layer = SruLayer(rng, 3, 5)
    xs = [Tensor(rng.normal(size=3)) for _ in range(5)]

    def run():
        c = Tensor(np.zeros(5))
        total = None
        for x in xs:
            h, c = sru_cell_step(x, c, layer)
            total = h.sum() if total is None else total + h.sum()
        return total

    assert gradcheck(run, layer.parameters()).rel_error < 1e-6


def test_length_one_sequence_equals_single_step(rng):
    layer = SruLayer(rng, 6, 6)
    x = rng.normal(size=6)
    h, _ = sru_cell_step(Tensor(x), Tensor(np.zeros(6)), layer)
    assert np.array_equal(sru_layer(Tensor(x[None]), layer).data[0], h.data)


@given(st.integers(1, 12), st.integers(0, 2 ** 31))
def test_scan_layer_matches_stepwise_reference(T, seed):
    r = np.random.default_rng(seed)
    layer = SruLayer(r, 5, 3)
    seq = r.normal(size=(T, 5))
    # batched and per-row BLAS products round differently, hence not bit-exact
    assert np.abs(sru_layer(Tensor(seq), layer).data - naive_sru(layer, seq)).max() <= 1e-12


def test_backward_direction_is_reversed_forward(rng):
    layer = SruLayer(rng, 4, 4, "forward")
    seq = rng.normal(size=(9, 4))
    fwd_on_reversed = sru_layer(Tensor(seq[::-1].copy()), layer, "forward").data
    bwd = sru_layer(Tensor(seq), layer, "backward").data
    assert np.array_equal(fwd_on_reversed, bwd[::-1])


def test_gates_ignore_the_initial_state(rng):
    layer = SruLayer(rng, 4, 4)
    seq = Tensor(rng.normal(size=(6, 4)))
    _, f1, r1, _ = layer.gates(seq)
    layer.run(seq, Tensor(rng.normal(size=4)))
    _, f2, r2, _ = layer.gates(seq)
    assert np.array_equal(f1.data, f2.data) and np.array_equal(r1.data, r2.data)


def test_scan_gradients_match_differences(rng):
    f = Tensor(rng.uniform(0.1, 0.9, size=(7, 3)), requires_grad=True)
    x = Tensor(rng.normal(size=(7, 3)), requires_grad=True)
    c0 = Tensor(rng.normal(size=3), requires_grad=True)
    assert gradcheck(lambda: (sru_scan(f, x, c0) ** 2).sum(), [f, x, c0]).rel_error < 1e-6


def test_cell_step_dimension_error(rng):
    with pytest.raises(DimensionError):
        sru_cell_step(Tensor(np.zeros(3)), Tensor(np.zeros(4)), SruLayer(rng, 4, 4))


def test_bidirectional_concatenates(rng):
    out = BiSru(rng, 5, 3)(Tensor(rng.normal(size=(4, 5))))
    assert out.shape == (4, 6)


# -- generator -------------------------------------------------------------------

@given(st.integers(1, 15))
def test_generator_output_shape_and_finiteness(T):
    r = np.random.default_rng(T)
    gen = Generator(r, GeneratorConfig(hidden=8, layers=2))
    with no_grad():
        out = generator_forward(bundle(r, T), gen)
    assert out.shape == (T, 80)
    assert np.isfinite(out.data).all()


def test_generator_depends_on_speaker_code(rng):
    gen = Generator(rng, GeneratorConfig(hidden=8, layers=2))
    ling = rng.uniform(size=(5, 381))
    a = gen(ConditioningBundle(ling, speaker_code(0, 0))).data
    b = gen(ConditioningBundle(ling, speaker_code(1, 1))).data
    assert not np.array_equal(a, b)


def test_generator_mse_gradient_on_sampled_parameters(rng):
    gen = Generator(rng, GeneratorConfig(hidden=6, layers=2))
    b = bundle(rng, 4)
    y = rng.normal(size=(4, 80))
    params = gen.parameters()
    # about 1% of the largest tensor; smaller tensors are probed in full
    probes = max(3, max(p.size for p in params) // 100)
    res = gradcheck(lambda: loss_mse(y, gen(b)), params, max_probes=probes, rng=rng)
    assert res.rel_error < 1e-5


def test_generator_layer_count_and_widths():
    gen = Generator(np.random.default_rng(0), GeneratorConfig(hidden=10, layers=6))
    assert len(gen.layers) == 6
    assert gen.input_proj.weight.shape == (388, 20)
    assert gen.output.weight.shape == (20, 80)


# -- critic ----------------------------------------------------------------------

def test_wgan_score_scales_with_output_layer(rng):
    critic = Critic(rng, CriticConfig(width=6, layers=3))
    y, code = rng.normal(size=(5, 80)), speaker_code(1, 1)
    s = critic(y, code).item()
    critic.layers[-1].weight.data *= 2
    critic.layers[-1].bias.data *= 2
    assert critic(y, code).item() == pytest.approx(2 * s, rel=1e-12)


def test_gan_score_is_a_probability(rng):
    critic = Critic(rng, CriticConfig(width=6, mode="gan"))
    for scale in (1e-3, 1.0, 50.0):
        p = critic_forward(rng.normal(size=(4, 80)) * scale, speaker_code(0, 0), critic).item()
        assert 0.0 < p < 1.0


def test_utterance_score_is_mean_of_frame_scores(rng):
    critic = Critic(rng, CriticConfig(width=6))
    y, code = rng.normal(size=(7, 80)), speaker_code(0, 0)
    frames = critic.frame_scores(y, code).data
    assert frames.shape == (7, 1)
    assert abs(frames.mean() - critic(y, code).item()) <= 1e-12


def test_speaker_code_enters_every_layer(rng):
    critic = Critic(rng, CriticConfig(width=6, layers=3))
    assert [l.weight.shape[0] for l in critic.layers] == [87, 13, 13]


def test_critic_gradient_reaches_features(rng):
    critic = Critic(rng, CriticConfig(width=6))
    y = Tensor(rng.normal(size=(3, 80)), requires_grad=True)
    backward(critic(y, speaker_code(0, 0)))
    assert np.abs(y.grad).sum() > 0


def test_unknown_critic_mode_is_rejected(rng):
    with pytest.raises(ValueError):
        Critic(rng, CriticConfig(mode="hinge"))
