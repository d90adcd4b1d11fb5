"""Property suites behind ``advtts verify``: gradient checks, normalization, causality.

Every check yields a :class:`Check` carrying the measured value and the
tolerance it was held to, so the report is machine readable.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np
from scipy.special import expit

from . import autograd as ag
from .autograd import Function, Tensor, grad, no_grad
from .autograd.gradcheck import gradcheck
from .autograd.ops import Scatter
from .dsp.corpus import N_LINGUISTIC, ConditioningBundle, speaker_code
from .dsp.features import HOP, N_MELS, MelStats, normalize
from .nets.critic import Critic, CriticConfig
from .nets.generator import Generator, GeneratorConfig
from .nets.sru import SruScan
from .training.losses import critic_loss_wgan_gp, loss_mse
from .wavenet.dml import (
    DmlLogProb,
    DmlParams,
    class_values,
    dml_pmf,
    dml_sample,
)
from .wavenet.model import WaveNet, WaveNetConfig, gated_block

SIMPLE_TOL = 1e-6
COMPOSITE_TOL = 1e-4
SUITES = ("gradcheck", "normalization", "causality")


@dataclass
class Check:
    suite: str
    name: str
    measured: float
    tolerance: float
    passed: bool

    def __post_init__(self):
        self.measured, self.tolerance, self.passed = float(self.measured), float(self.tolerance), bool(self.passed)

    def as_dict(self) -> dict:
        return asdict(self)


# -- op registry ----------------------------------------------------------------

def _away_from(x: np.ndarray, points, margin: float = 0.05) -> np.ndarray:
    """Push entries off kinks so finite differences never straddle one."""
    for p in points:
        near = np.abs(x - p) < margin
        x = np.where(near, p + np.where(x >= p, margin, -margin) * 2, x)
    return x


@dataclass
class OpCase:
    name: str
    build: Callable  # rng -> (callable producing the op output, list of input tensors)
    double: bool = True


def _leaf(data) -> Tensor:
    return Tensor(np.asarray(data, dtype=np.float64), requires_grad=True)


def _unary(fn, domain=None):
    def build(rng):
        x = rng.normal(size=(3, 4))
        x = domain(x) if domain else x
        t = _leaf(x)
        return (lambda: fn(t)), [t]
    return build


def _binary(fn, b_shape=(3, 4), b_domain=None):
    def build(rng):
        a = _leaf(rng.normal(size=(3, 4)))
        b_data = rng.normal(size=b_shape)
        b = _leaf(b_domain(b_data) if b_domain else b_data)
        return (lambda: fn(a, b)), [a, b]
    return build


def _positive(x):
    return np.abs(x) + 0.5


def _build_getitem(rng):
    x = _leaf(rng.normal(size=(5, 4)))
    return (lambda: ag.getitem(x, (np.array([0, 2, 2, 4]), slice(1, 3)))), [x]


def _build_scatter(rng):
    x = _leaf(rng.normal(size=(4, 2)))
    index = (np.array([0, 2, 2, 4]), slice(1, 3))
    return (lambda: Scatter.apply(x, shape=(5, 4), index=index)), [x]


def _build_concat(rng):
    a, b = _leaf(rng.normal(size=(3, 2))), _leaf(rng.normal(size=(3, 4)))
    return (lambda: ag.concat([a, b], axis=1)), [a, b]


def _build_conv(rng):
    x, w = _leaf(rng.normal(size=(3, 9))), _leaf(rng.normal(size=(2, 3, 2)))
    return (lambda: ag.conv1d_causal(x, w, 2)), [x, w]


def _build_convt(rng):
    x, w = _leaf(rng.normal(size=(3, 4))), _leaf(rng.normal(size=(3, 2, 4)))
    return (lambda: ag.conv_transpose1d(x, w, stride=2)), [x, w]


def _build_sru_scan(rng):
    f = _leaf(rng.uniform(0.1, 0.9, size=(5, 3)))
    x, c0 = _leaf(rng.normal(size=(5, 3))), _leaf(rng.normal(size=3))
    return (lambda: SruScan.apply(f, x, c0)), [f, x, c0]


def _build_dml(rng):
    N, K, n_classes = 6, 3, 256
    logits, means = _leaf(rng.normal(size=(N, K))), _leaf(rng.uniform(-200, 200, size=(N, K)))
    log_scales = _leaf(rng.uniform(-5, -2, size=(N, K)))
    classes = np.array([0, 255, 3, 128, 200, 60])
    return (lambda: DmlLogProb.apply(logits, means, log_scales, classes=classes, n_classes=n_classes)), \
        [logits, means, log_scales]


OP_CASES = [
    OpCase("add", _binary(ag.add, (4,))),
    OpCase("sub", _binary(ag.sub, (3, 1))),
    OpCase("mul", _binary(ag.mul)),
    OpCase("div", _binary(ag.div, b_domain=_positive)),
    OpCase("neg", _unary(ag.neg)),
    OpCase("exp", _unary(ag.exp)),
    OpCase("log", _unary(ag.log, _positive)),
    OpCase("sigmoid", _unary(ag.sigmoid)),
    OpCase("tanh", _unary(ag.tanh)),
    OpCase("relu", _unary(ag.relu, lambda x: _away_from(x, [0.0]))),
    OpCase("leaky_relu", _unary(lambda x: ag.leaky_relu(x, 0.2), lambda x: _away_from(x, [0.0]))),
    OpCase("clip", _unary(lambda x: ag.clip(x, -0.5, 0.5), lambda x: _away_from(x, [-0.5, 0.5]))),
    OpCase("pow", _unary(lambda x: ag.pow(x, 1.5), _positive)),
    OpCase("sum", _unary(lambda x: ag.sum(x, axis=0))),
    OpCase("sum_to", _unary(lambda x: ag.sum_to(x, (1, 4)))),
    OpCase("broadcast_to", _unary(lambda x: ag.broadcast_to(x[0:1], (3, 4)))),
    OpCase("reshape", _unary(lambda x: ag.reshape(x, (2, 6)))),
    OpCase("transpose", _unary(ag.transpose)),
    OpCase("getitem", _build_getitem),
    OpCase("scatter", _build_scatter),
    OpCase("concat", _build_concat),
    OpCase("matmul", _binary(ag.matmul, (4, 2))),
    OpCase("conv1d_causal", _build_conv, double=False),
    OpCase("conv_transpose1d", _build_convt, double=False),
    OpCase("sru_scan", _build_sru_scan, double=False),
    OpCase("dml_log_prob", _build_dml, double=False),
]


def function_classes() -> set[str]:
    """Names of every concrete recorded operation, for coverage checks."""
    seen, stack = set(), list(Function.__subclasses__())
    while stack:
        cls = stack.pop()
        stack.extend(cls.__subclasses__())
        if not cls.__name__.startswith("_"):
            seen.add(cls.name)
    return seen


def _first_order(case: OpCase, rng) -> Check:
    op, inputs = case.build(rng)
    w = rng.normal(size=op().shape)
    res = gradcheck(lambda: (op() * w).sum(), inputs, tolerance=SIMPLE_TOL, name=case.name)
    return Check("gradcheck", case.name, res.rel_error, SIMPLE_TOL, res.passed)


def _second_order(case: OpCase, rng) -> Check:
    """``sum(c * d/dx0 sum(w * op)) + sum(w2 * op)`` checked against finite differences."""
    op, inputs = case.build(rng)
    shape = op().shape
    w, w2 = rng.normal(size=shape), rng.normal(size=shape)
    c = rng.normal(size=inputs[0].shape)

    def fn():
        out = op()
        g = grad((out * w).sum(), [inputs[0]], create_graph=True, allow_unused=True)[0]
        total = (out * w2).sum()
        return total + (g * c).sum() if g is not None else total

    name = f"{case.name} (double backward)"
    res = gradcheck(fn, inputs, tolerance=COMPOSITE_TOL, name=name, record=True)
    return Check("gradcheck", name, res.rel_error, COMPOSITE_TOL, res.passed)


# -- composite paths ---------------------------------------------------------------

def _bundle(rng, T: int) -> ConditioningBundle:
    return ConditioningBundle(rng.uniform(0, 1, size=(T, N_LINGUISTIC)), speaker_code(1, 0))


def composite_mse_generator(rng) -> Check:
    gen = Generator(rng, GeneratorConfig(hidden=6, layers=2))
    bundle, target = _bundle(rng, 5), rng.normal(size=(5, N_MELS))
    res = gradcheck(lambda: loss_mse(target, gen(bundle)), gen.parameters(), tolerance=COMPOSITE_TOL,
                    name="mse -> generator", max_probes=12, rng=rng)
    return Check("gradcheck", res.name, res.rel_error, COMPOSITE_TOL, res.passed)


def composite_critic_penalty(rng) -> Check:
    critic = Critic(rng, CriticConfig(width=8, layers=3, activation="tanh"))
    y, y_hat = rng.normal(size=(4, N_MELS)), rng.normal(size=(4, N_MELS))
    code = speaker_code(0, 1)
    res = gradcheck(lambda: critic_loss_wgan_gp(y, y_hat, code, critic, 10.0, eps=0.3).total,
                    critic.parameters(), tolerance=COMPOSITE_TOL, name="critic with penalty -> critic",
                    max_probes=12, rng=rng, record=True)
    return Check("gradcheck", res.name, res.rel_error, COMPOSITE_TOL, res.passed)


def composite_dml_mel(rng) -> Check:
    cfg = WaveNetConfig(blocks=4, residual_channels=6, skip_channels=6, mixtures=2)
    net = WaveNet(rng, cfg)
    T = 2
    mel = _leaf(rng.normal(size=(T, N_MELS)))
    classes = rng.integers(0, cfg.n_classes, size=T * HOP)
    code = speaker_code(0, 0)
    inputs = [mel] + net.upsampler.parameters()
    res = gradcheck(lambda: net.nll(classes, mel, code), inputs, tolerance=COMPOSITE_TOL,
                    name="dml -> wavenet -> upsampler -> mel", max_probes=20, rng=rng)
    return Check("gradcheck", res.name, res.rel_error, COMPOSITE_TOL, res.passed)


def run_gradcheck(seed: int = 0) -> list[Check]:
    rng = np.random.default_rng(seed)
    out = []
    for case in OP_CASES:
        out.append(_first_order(case, rng))
        if case.double:
            out.append(_second_order(case, rng))
    out += [composite_mse_generator(rng), composite_critic_penalty(rng), composite_dml_mel(rng)]
    return out


# -- normalization --------------------------------------------------------------------

def random_dml_params(rng, K: int, n_classes: int) -> DmlParams:
    return DmlParams(rng.normal(size=K), rng.uniform(-n_classes, n_classes, size=K),
                     rng.uniform(-7.0, 0.0, size=K))


def direct_pmf(params: DmlParams, n_classes: int) -> np.ndarray:
    """Reference table from plain sigmoid differences at explicit bin edges."""
    v = class_values(n_classes)
    hi = np.append(v[:-1] + 1.0, np.inf)[:, None]
    lo = np.insert(v[1:] - 1.0, 0, -np.inf)[:, None]
    s = np.exp(params.log_scales) * n_classes
    with np.errstate(over="ignore"):
        mass = expit((hi - params.means) / s) - expit((lo - params.means) / s)
    return mass @ params.weights


def run_normalization(seed: int = 0, n_params: int = 100, n_classes: int = 256,
                      n_samples: int = 100_000) -> list[Check]:
    rng = np.random.default_rng(seed)
    worst_sum = worst_edge = 0.0
    for _ in range(n_params):
        p = random_dml_params(rng, int(rng.integers(1, 11)), n_classes)
        pmf = dml_pmf(p, n_classes)
        worst_sum = max(worst_sum, abs(pmf.sum() - 1.0))
        ref = direct_pmf(p, n_classes)
        worst_edge = max(worst_edge, abs(pmf[0] - ref[0]), abs(pmf[-1] - ref[-1]),
                         np.max(np.abs(pmf - ref)))
    checks = [
        Check("normalization", "dml pmf sums to one", worst_sum, 1e-6, worst_sum <= 1e-6),
        Check("normalization", "dml pmf matches direct cdf differences (edges included)",
              worst_edge, 1e-9, worst_edge <= 1e-9),
    ]
    # a mixture about as sharp as a trained vocoder's; very broad ones push the
    # finite-sample noise floor of the distance itself toward the tolerance
    p = DmlParams(np.array([0.3, -0.2, 0.5]), np.array([-60.0, 10.0, 90.0]), np.array([-4.0, -5.0, -3.5]))
    draws = dml_sample(DmlParams(*(np.broadcast_to(a, (n_samples, 3)) for a in
                                   (p.logits, p.means, p.log_scales))), n_classes, rng)
    empirical = np.bincount(draws, minlength=n_classes) / n_samples
    tv = 0.5 * np.abs(empirical - dml_pmf(p, n_classes)).sum()
    checks.append(Check("normalization", "dml sampling total variation", tv, 0.02, tv < 0.02))
    mels = [rng.normal(2.0, 3.0, size=(40, N_MELS)) for _ in range(3)]
    stats = MelStats.fit(mels)
    z = np.concatenate([normalize(m, stats) for m in mels])
    dev = max(np.max(np.abs(z.mean(axis=0))), np.max(np.abs(z.var(axis=0) - 1.0)))
    checks.append(Check("normalization", "mel z-normalization mean 0 variance 1", dev, 1e-9, dev < 1e-9))
    return checks


# -- causality --------------------------------------------------------------------------

def _block_causality(net: WaveNet, rng, N: int) -> float:
    """Worst change at or before-the-perturbation times, over every block (should be exactly 0)."""
    R = net.config.residual_channels
    cond = Tensor(rng.normal(size=(N_MELS, N)))
    emb = Tensor(rng.normal(size=(net.config.speaker_embedding, 1)))
    worst = 0.0
    with no_grad():
        for block in net.blocks:
            state = rng.normal(size=(R, N))
            base_res, base_skip = gated_block(Tensor(state), cond, emb, block)
            j = N // 2
            bumped = state.copy()
            bumped[:, j] += 1.0
            res, skip = gated_block(Tensor(bumped), cond, emb, block)
            worst = max(worst, np.max(np.abs(res.data[:, :j] - base_res.data[:, :j])),
                        np.max(np.abs(skip.data[:, :j] - base_skip.data[:, :j])))
    return float(worst)


def stack_influence(net: WaveNet, rng, N: int, j: int) -> np.ndarray:
    """Per-output max change after perturbing the stack input at time ``j``."""
    cond = Tensor(rng.normal(size=(N_MELS, N)))
    emb = Tensor(rng.normal(size=(net.config.speaker_embedding, 1)))
    x = rng.uniform(-1, 1, size=(1, N))
    with no_grad():
        base = net.stack(Tensor(x), cond, emb).data
        bumped = x.copy()
        bumped[0, j] += 0.5
        out = net.stack(Tensor(bumped), cond, emb).data
    return np.max(np.abs(out - base), axis=0)


def gradient_reach(net: WaveNet, rng, N: int) -> int:
    """Span of stack inputs with a nonzero gradient into the last output.

    Uses the gradient rather than output differences: the longest-lag path runs
    through every block and its contribution can be far below the rounding
    error of the output itself.
    """
    cond = Tensor(rng.normal(size=(N_MELS, N)))
    emb = Tensor(rng.normal(size=(net.config.speaker_embedding, 1)))
    x = Tensor(rng.uniform(-1, 1, size=(1, N)), requires_grad=True)
    out = net.stack(x, cond, emb)
    g = grad((out[:, N - 1] * rng.normal(size=out.shape[0])).sum(), [x])[0].data[0]
    return int(N - np.nonzero(g)[0].min())


def run_causality(seed: int = 0) -> list[Check]:
    rng = np.random.default_rng(seed)
    checks = []
    for label, cfg in (("desk", WaveNetConfig(residual_channels=8, skip_channels=16, mixtures=2)),
                       ("24-block", WaveNetConfig(blocks=24, residual_channels=8, skip_channels=16,
                                                        mixtures=2))):
        net = WaveNet(rng, cfg)
        rf = cfg.receptive_field
        N, j = rf + 200, 60
        worst = _block_causality(net, rng, N)
        checks.append(Check("causality", f"{label}: every block ignores future inputs", worst, 0.0,
                            worst == 0.0))
        infl = stack_influence(net, rng, N, j)
        past = float(np.max(infl[:j]))
        beyond = float(np.max(infl[j + rf:]))
        reach = gradient_reach(net, rng, rf + 40)
        checks.append(Check("causality", f"{label}: stack ignores future inputs", past, 0.0, past == 0.0))
        checks.append(Check("causality", f"{label}: no influence beyond the receptive field", beyond, 0.0,
                            beyond == 0.0))
        checks.append(Check("causality", f"{label}: measured reach equals receptive field {rf}",
                            abs(reach - rf), 0.0, reach == rf))
    rf24 = WaveNetConfig(blocks=24).receptive_field
    checks.append(Check("causality", "24-block receptive field is 253", abs(rf24 - 253), 0.0, rf24 == 253))
    return checks


RUNNERS = {"gradcheck": run_gradcheck, "normalization": run_normalization, "causality": run_causality}


def run_suite(suite: str, seed: int = 0) -> list[Check]:
    if suite == "all":
        return [c for s in SUITES for c in RUNNERS[s](seed)]
    if suite not in RUNNERS:
        raise ValueError(f"unknown suite {suite!r}; choose from {SUITES + ('all',)}")
    return RUNNERS[suite](seed)


def report(checks: list[Check]) -> dict:
    return {
        "passed": bool(checks) and all(c.passed for c in checks),
        "n_checks": len(checks),
        "failures": [c.name for c in checks if not c.passed],
        "checks": [c.as_dict() for c in checks],
    }
