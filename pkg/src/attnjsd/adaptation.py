"""Sign-gradient test-time adaptation of a latent trajectory.

The loop runs a model for ``total_steps`` denoising steps.  During the
first ``update_steps`` of them the latent is first nudged against the
objective: the model is invoked once to obtain the current attention
logits, the objective gradient is pulled back to the latent, and the
latent moves one signed step of size ``alpha`` per coordinate,

    x' = x - alpha * sign(dL/dx),        sign(0) = 0.

The denoising call then proceeds from the nudged latent.  The extra
model invocation is a genuine second call per optimized step, so the
per-run model cost is ``total_steps + update_steps`` evaluations
(times the configured inner iteration count).  Updates happen at steps
t = 0 .. update_steps - 1, giving exactly ``min(update_steps,
total_steps)`` latent updates per run at the default inner count.

Each applied update's delta vector has entries exactly in
{ -alpha, 0, +alpha } by construction; deltas are recorded on the
result so the contract can be checked without re-deriving displacements
from rounded coordinates.

A synthetic attention model is provided for experiments: each map is a
Gaussian blob on a grid, parameterized by center, log-scale, and
amplitude, rendered to logits; the denoiser contracts parameters toward
a shared entangled equilibrium plus per-step noise that depends only on
(seed, t), so repeated evaluation at the same step is reproducible.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import DataError, NumericalError
from .objective import (
    LossConfig,
    PromptSpec,
    SubjectGroup,
    jedi_value_and_grad,
    logits_breakdown,
    nt_xent_value_and_grad,
)

__all__ = [
    "LatentState",
    "LoopConfig",
    "ModelInterface",
    "SyntheticAttentionModel",
    "TraceEntry",
    "AdaptationResult",
    "SweepEntry",
    "fgsm_update",
    "run_adaptation",
    "alpha_sweep",
    "write_trace_csv",
]

LOSS_NAMES = ("jedi", "nt_xent")


@dataclass(frozen=True)
class LatentState:
    """A latent vector together with its timestep index."""

    x: np.ndarray
    t: int

    def __post_init__(self) -> None:
        arr = np.asarray(self.x, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise NumericalError("latent state contains non-finite values")
        if self.t < 0:
            raise DataError(f"timestep must be >= 0, got {self.t}")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "x", arr)
        object.__setattr__(self, "t", int(self.t))


@dataclass(frozen=True)
class LoopConfig:
    """Adaptation loop settings.

    ``update_steps`` (K) counts optimized timesteps out of
    ``total_steps`` (T); ``inner_iterations`` applies that many signed
    updates within each optimized timestep.  ``alpha`` of 0 is accepted
    and makes every update a no-op, which the step-size sweep uses as a
    control setting.
    """

    alpha: float = 3e-3
    update_steps: int = 18
    total_steps: int = 28
    loss: str = "jedi"
    loss_config: LossConfig = LossConfig()
    temperature: float = 0.5
    inner_iterations: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if not math.isfinite(self.alpha) or self.alpha < 0.0:
            raise DataError(f"alpha must be finite and >= 0, got {self.alpha!r}")
        if self.total_steps < 1:
            raise DataError(f"total_steps must be >= 1, got {self.total_steps}")
        if not 0 <= self.update_steps <= self.total_steps:
            raise DataError(
                f"update_steps must lie in [0, total_steps], got {self.update_steps}"
            )
        if self.inner_iterations < 1:
            raise DataError(f"inner_iterations must be >= 1, got {self.inner_iterations}")
        if self.loss not in LOSS_NAMES:
            raise DataError(f"unknown loss {self.loss!r}, expected one of {LOSS_NAMES}")


class ModelInterface(ABC):
    """What the adaptation loop needs from a generative model.

    Attention is exposed as raw logits, one row per attention map; the
    softmax that turns a row into a probability field is applied by the
    objective.  ``step`` must be a pure function of ``(x, t)`` so that
    the loop's double invocation per optimized step is well defined.
    """

    @property
    @abstractmethod
    def num_maps(self) -> int:
        """Number of attention maps exposed per step."""

    @property
    @abstractmethod
    def field_dim(self) -> int:
        """Cells per attention map."""

    @property
    def grid_shape(self) -> tuple[int, int] | None:
        """Spatial layout of a map, when one exists."""
        return None

    @abstractmethod
    def initial_latent(self, seed: int) -> np.ndarray:
        """Draw the starting latent for a run."""

    @abstractmethod
    def step(self, x: np.ndarray, t: int) -> tuple[np.ndarray, np.ndarray]:
        """Advance one denoising step.

        Returns ``(x_next, logits)`` where ``logits`` has shape
        ``(num_maps, field_dim)`` and reflects the attention at the
        *input* latent.
        """

    @abstractmethod
    def attention_pullback(
        self, x: np.ndarray, t: int, cotangent: np.ndarray
    ) -> np.ndarray:
        """Pull a logit-space gradient back to the latent.

        ``cotangent`` is dL/dlogits at ``step(x, t)``'s attention output;
        the result is dL/dx with ``x``'s shape.
        """


@dataclass(frozen=True)
class TraceEntry:
    """Objective metrics observed at one denoising step."""

    t: int
    intra: float
    inter: float
    diversity: float
    total: float
    intergroup_jsd: float


@dataclass
class AdaptationResult:
    """Final latent, per-step metrics, and the applied update deltas."""

    final: LatentState
    trace: list[TraceEntry]
    update_deltas: list[np.ndarray]

    @property
    def updates_applied(self) -> int:
        return len(self.update_deltas)


def fgsm_update(state: LatentState, grad: np.ndarray, alpha: float) -> LatentState:
    """One signed-gradient step: x - alpha * sign(grad), sign(0) = 0.

    The applied delta has entries exactly in {-alpha, 0, +alpha}.
    Raises ``NumericalError`` on a non-finite gradient and ``DataError``
    on shape mismatch or negative alpha.
    """
    g = np.asarray(grad, dtype=np.float64)
    if g.shape != state.x.shape:
        raise DataError(f"gradient shape {g.shape} does not match latent {state.x.shape}")
    if not np.all(np.isfinite(g)):
        raise NumericalError("gradient contains non-finite values")
    if not math.isfinite(alpha) or alpha < 0.0:
        raise DataError(f"alpha must be finite and >= 0, got {alpha!r}")
    delta = -alpha * np.sign(g)
    return LatentState(state.x + delta, state.t)


def _trace_entry(
    spec: PromptSpec, logits: np.ndarray, t: int, cfg: LossConfig
) -> TraceEntry:
    breakdown, intergroup = logits_breakdown(spec, logits, cfg)
    return TraceEntry(
        t=t,
        intra=breakdown.intra,
        inter=breakdown.inter,
        diversity=breakdown.diversity,
        total=breakdown.total,
        intergroup_jsd=intergroup,
    )


def run_adaptation(
    model: ModelInterface, prompt: PromptSpec, config: LoopConfig | None = None
) -> AdaptationResult:
    """Run the adaptation loop and record per-step objective metrics.

    The trace has one entry per denoising step (so ``total_steps``
    entries), computed from the attention returned by that step's
    denoising call; at optimized steps this reflects the just-nudged
    latent.  A model failure mid-run propagates after the partial trace
    is attached to the raised exception as ``partial_trace``.
    """
    cfg = config if config is not None else LoopConfig()
    if prompt.max_index() >= model.num_maps:
        raise DataError(
            f"prompt references map {prompt.max_index()} but model exposes {model.num_maps}"
        )
    x = np.asarray(model.initial_latent(cfg.seed), dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise NumericalError("initial latent contains non-finite values")

    trace: list[TraceEntry] = []
    deltas: list[np.ndarray] = []
    try:
        for t in range(cfg.total_steps):
            if t < cfg.update_steps:
                for _ in range(cfg.inner_iterations):
                    _, logits = model.step(x, t)
                    if cfg.loss == "jedi":
                        _, grad_logits = jedi_value_and_grad(prompt, logits, cfg.loss_config)
                    else:
                        _, grad_logits = nt_xent_value_and_grad(
                            prompt, logits, cfg.temperature
                        )
                    grad_x = np.asarray(model.attention_pullback(x, t, grad_logits))
                    updated = fgsm_update(LatentState(x, t), grad_x, cfg.alpha)
                    delta = -cfg.alpha * np.sign(grad_x)
                    deltas.append(delta)
                    x = np.asarray(updated.x)
            x_next, logits = model.step(x, t)
            trace.append(_trace_entry(prompt, logits, t, cfg.loss_config))
            x = np.asarray(x_next, dtype=np.float64)
            if not np.all(np.isfinite(x)):
                raise NumericalError(f"model produced non-finite latent at step {t}")
    except Exception as exc:
        exc.partial_trace = trace  # type: ignore[attr-defined]
        raise
    return AdaptationResult(LatentState(x, cfg.total_steps), trace, deltas)


def write_trace_csv(trace: Sequence[TraceEntry], path: str) -> None:
    """Write a trace as CSV with one row per denoising step.

    Floats are rendered with ``repr`` so values round-trip exactly.
    """
    lines = ["timestep,intra,inter,diversity,total,intergroup_jsd"]
    for e in trace:
        lines.append(
            ",".join(
                [str(e.t)]
                + [repr(float(v)) for v in (e.intra, e.inter, e.diversity, e.total, e.intergroup_jsd)]
            )
        )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


@dataclass(frozen=True)
class SweepEntry:
    """Summary of one step-size setting against the shared-seed baseline."""

    alpha: float
    final_total: float
    final_intergroup_jsd: float
    displacement_inf: float


def alpha_sweep(
    model: ModelInterface,
    prompt: PromptSpec,
    config: LoopConfig,
    alphas: Sequence[float],
) -> list[SweepEntry]:
    """Re-run the loop across step sizes against a no-update baseline.

    Every run reuses the configured seed; the baseline sets
    ``update_steps`` to 0.  Displacement is the max-norm distance between
    each run's final latent and the baseline's, bounded by
    ``update_steps * inner_iterations * alpha`` when the denoiser is
    1-Lipschitz in the latent.
    """
    if len(alphas) == 0:
        raise DataError("alpha sweep needs at least one step size")
    baseline = run_adaptation(model, prompt, replace(config, update_steps=0))
    base_x = baseline.final.x
    entries: list[SweepEntry] = []
    for alpha in alphas:
        result = run_adaptation(model, prompt, replace(config, alpha=float(alpha)))
        last = result.trace[-1]
        disp = float(np.max(np.abs(result.final.x - base_x)))
        entries.append(SweepEntry(float(alpha), last.total, last.intergroup_jsd, disp))
    return entries


# ---------------------------------------------------------------------------
# synthetic model

class SyntheticAttentionModel(ModelInterface):
    """Gaussian-blob attention with contracting latent dynamics.

    The latent packs one ``(cx, cy, log_scale, amplitude)`` quadruple per
    map; a map's logits are ``amp * exp(-r^2 / (2 s^2))`` over cell
    centers of an ``(h, w)`` grid in the unit square.  All maps start
    near the grid center, so subject mixtures begin heavily entangled.
    The denoiser pulls parameters toward that shared equilibrium at rate
    ``drift_rate`` and adds noise drawn deterministically from
    ``(seed, t)``, so each step is a pure function of its inputs.
    """

    def __init__(
        self,
        num_subjects: int = 2,
        maps_per_subject: int = 2,
        grid: tuple[int, int] = (16, 16),
        seed: int = 0,
        blob_scale: float = 0.14,
        blob_amplitude: float = 8.0,
        center_jitter: float = 0.02,
        drift_rate: float = 0.05,
        drift_noise: float = 0.004,
    ) -> None:
        if num_subjects < 1 or maps_per_subject < 1:
            raise DataError("need at least one subject and one map per subject")
        h, w = grid
        if h < 2 or w < 2:
            raise DataError(f"grid must be at least 2x2, got {grid}")
        self.num_subjects = int(num_subjects)
        self.maps_per_subject = int(maps_per_subject)
        self.grid = (int(h), int(w))
        self.seed = int(seed)
        self.blob_scale = float(blob_scale)
        self.blob_amplitude = float(blob_amplitude)
        self.center_jitter = float(center_jitter)
        self.drift_rate = float(drift_rate)
        self.drift_noise = float(drift_noise)

        cols, rows = np.meshgrid(np.arange(w), np.arange(h))
        self._cell_x = ((cols + 0.5) / w).reshape(-1)
        self._cell_y = ((rows + 0.5) / h).reshape(-1)
        eq = np.zeros((self.num_maps, 4))
        eq[:, 0] = 0.5
        eq[:, 1] = 0.5
        eq[:, 2] = math.log(self.blob_scale)
        eq[:, 3] = self.blob_amplitude
        self._equilibrium = eq.reshape(-1)

    @property
    def num_maps(self) -> int:
        return self.num_subjects * self.maps_per_subject

    @property
    def field_dim(self) -> int:
        return self.grid[0] * self.grid[1]

    @property
    def grid_shape(self) -> tuple[int, int]:
        return self.grid

    @property
    def latent_dim(self) -> int:
        return 4 * self.num_maps

    def prompt_spec(self) -> PromptSpec:
        """Consecutive maps grouped per subject."""
        groups = []
        for s in range(self.num_subjects):
            start = s * self.maps_per_subject
            groups.append(
                SubjectGroup(
                    f"subject_{s}", tuple(range(start, start + self.maps_per_subject))
                )
            )
        return PromptSpec(tuple(groups))

    def initial_latent(self, seed: int) -> np.ndarray:
        rng = np.random.default_rng([101, self.seed, int(seed)])
        params = self._equilibrium.reshape(self.num_maps, 4).copy()
        params[:, 0:2] += self.center_jitter * rng.standard_normal((self.num_maps, 2))
        params[:, 2] += 0.05 * rng.standard_normal(self.num_maps)
        params[:, 3] += 0.1 * rng.standard_normal(self.num_maps)
        return params.reshape(-1)

    def _blob_terms(self, x: np.ndarray) -> tuple[np.ndarray, ...]:
        params = np.asarray(x, dtype=np.float64).reshape(self.num_maps, 4)
        cx = params[:, 0][:, None]
        cy = params[:, 1][:, None]
        s2 = np.exp(2.0 * params[:, 2])[:, None]
        amp = params[:, 3][:, None]
        dx = self._cell_x[None, :] - cx
        dy = self._cell_y[None, :] - cy
        r2 = dx * dx + dy * dy
        bump = np.exp(-r2 / (2.0 * s2))
        return params, dx, dy, r2, s2, amp, bump

    def render_logits(self, x: np.ndarray) -> np.ndarray:
        """Attention logits (num_maps, field_dim) at latent ``x``."""
        *_, amp, bump = self._blob_terms(x)
        return amp * bump

    def step(self, x: np.ndarray, t: int) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.latent_dim,):
            raise DataError(f"latent must have shape ({self.latent_dim},), got {x.shape}")
        if t < 0:
            raise DataError(f"timestep must be >= 0, got {t}")
        logits = self.render_logits(x)
        rng = np.random.default_rng([202, self.seed, int(t)])
        noise = self.drift_noise * rng.standard_normal(self.latent_dim)
        x_next = x + self.drift_rate * (self._equilibrium - x) + noise
        return x_next, logits

    def attention_pullback(
        self, x: np.ndarray, t: int, cotangent: np.ndarray
    ) -> np.ndarray:
        g = np.asarray(cotangent, dtype=np.float64)
        if g.shape != (self.num_maps, self.field_dim):
            raise DataError(
                f"cotangent must have shape ({self.num_maps}, {self.field_dim}), got {g.shape}"
            )
        _, dx, dy, r2, s2, amp, bump = self._blob_terms(x)
        logit = amp * bump
        grad = np.zeros((self.num_maps, 4))
        grad[:, 0] = (g * logit * dx / s2).sum(axis=1)
        grad[:, 1] = (g * logit * dy / s2).sum(axis=1)
        grad[:, 2] = (g * logit * r2 / s2).sum(axis=1)
        grad[:, 3] = (g * bump).sum(axis=1)
        return grad.reshape(-1)
