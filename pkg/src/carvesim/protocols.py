"""Carving protocols as exact quantum channels plus a trajectory Monte Carlo.

A carving pulse is a weak coherent state reflected off the cavity. Tracing
the reflected light, the scattered photons and the lost population out of the
joint state multiplies every register coherence (b, b') by a Gaussian overlap
of the environment records of the two branches, while a click on the
d-polarization detector (or a dark count) heralds. carve_step evaluates this
exactly by Schur-multiplying the density matrix with the herald multiplier;
monte_carlo_run samples the same statistics trajectory by trajectory.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .cavity import CavityParams, ReflectionModel
from .states import (
    ATOM1_UP,
    ATOM2_UP,
    BASIS_INDEX,
    N_UP,
    BellKind,
    NullBranchError,
    RotationSpec,
    TwoAtomState,
    bell_vector,
    global_rotation,
    renormalize,
    single_qubit_unitary,
)


class NeverHeraldsError(RuntimeError):
    """The requested pulse has zero probability of producing a herald."""


PREP_KINDS = ("down_down", "antiparallel", "pure_uu", "pure_ud", "pure_du", "pure_dd")

_PREP_DEFAULT_FIDELITY = {"down_down": 0.99, "antiparallel": 0.86}


@dataclass(frozen=True)
class PulseConfig:
    """Coherent carving pulse: photon number, detector and mode matching."""

    nbar: float = 0.33
    dark_prob: float = 0.011
    det_eff: float = 1.0 / 3.0
    mode_match: float = 0.9

    def __post_init__(self):
        if not self.nbar >= 0:
            raise ValueError("nbar must be >= 0")
        if not 0 <= self.dark_prob < 1:
            raise ValueError("dark_prob must be in [0, 1)")
        if not 0 < self.det_eff <= 1:
            raise ValueError("det_eff must be in (0, 1]")
        if not 0 < self.mode_match <= 1:
            raise ValueError("mode_match must be in (0, 1]")


@dataclass(frozen=True)
class PreparationSpec:
    """Initial register state: target kind plus a preparation fidelity.

    The default fidelity depends on the kind (0.99 for down_down, 0.86 for
    the antiparallel mixture, 1 for the pure_* diagnostics states); the
    infidelity is spread uniformly over the full two-atom space.
    """

    kind: str = "down_down"
    prep_fidelity: float | None = None

    def __post_init__(self):
        if self.kind not in PREP_KINDS:
            raise ValueError(f"unknown preparation kind {self.kind!r}")
        if self.prep_fidelity is None:
            object.__setattr__(
                self, "prep_fidelity", _PREP_DEFAULT_FIDELITY.get(self.kind, 1.0)
            )
        if not 0 <= self.prep_fidelity <= 1:
            raise ValueError("prep_fidelity must be in [0, 1]")


def prepare(spec: PreparationSpec) -> TwoAtomState:
    """Initial density matrix for a preparation spec (always diagonal)."""
    base = np.zeros((4, 4))
    if spec.kind == "down_down":
        base[BASIS_INDEX["dd"], BASIS_INDEX["dd"]] = 1.0
    elif spec.kind == "antiparallel":
        base[BASIS_INDEX["ud"], BASIS_INDEX["ud"]] = 0.5
        base[BASIS_INDEX["du"], BASIS_INDEX["du"]] = 0.5
    else:
        label = spec.kind.removeprefix("pure_")
        base[BASIS_INDEX[label], BASIS_INDEX[label]] = 1.0
    f = spec.prep_fidelity
    return TwoAtomState(f * base + (1.0 - f) * np.eye(4) / 4.0)


@dataclass(frozen=True)
class NoiseModel:
    """Quasi-static Gaussian qubit-frequency noise, common and differential.

    Sigmas are standard deviations in kHz (2pi x kHz angular); the common
    mode shifts both qubits together and dephases the uu-dd coherence, the
    differential mode dephases ud-du. Defaults are calibrated to coherence
    lifetimes of 90 us (common) and 134 us (differential).
    """

    sigma_common_2pi_khz: float = None  # type: ignore[assignment]
    sigma_diff_2pi_khz: float = None  # type: ignore[assignment]

    def __post_init__(self):
        if self.sigma_common_2pi_khz is None:
            object.__setattr__(self, "sigma_common_2pi_khz", sigma_for_lifetime(90.0))
        if self.sigma_diff_2pi_khz is None:
            object.__setattr__(self, "sigma_diff_2pi_khz", sigma_for_lifetime(134.0))
        if self.sigma_common_2pi_khz < 0 or self.sigma_diff_2pi_khz < 0:
            raise ValueError("noise sigmas must be >= 0")


def sigma_for_lifetime(tau_us: float) -> float:
    """Frequency spread (2pi kHz) whose Gaussian dephasing has 1/e time tau.

    A two-up-flip coherence under spread sigma decays as exp(-2 w^2 t^2) with
    w = 2pi sigma; solving exp(-t^2/tau^2) gives sigma = 1 / (2 pi sqrt(2) tau)
    in cycles, converted to kHz for tau in us.
    """
    if not tau_us > 0:
        raise ValueError("tau must be > 0")
    return 1.0e3 / (2.0 * np.pi * np.sqrt(2.0) * tau_us)


def wait_evolution(
    state: TwoAtomState, t_us: float, noise: NoiseModel | None = None
) -> TwoAtomState:
    """Free evolution for t_us microseconds under the dephasing model.

    Averaging exp(-i phi) over the Gaussian detuning ensemble multiplies each
    coherence (b, b') by exp(-(wc^2 dn^2 + wd^2 dm^2) t^2 / 2), where dn is
    the difference in total up-count (common mode) and dm the difference in
    up-count imbalance between the atoms (differential mode). Populations are
    untouched; ud-du coherences see only the differential noise.
    """
    if t_us < 0:
        raise ValueError("t must be >= 0")
    noise = noise or NoiseModel()
    wc = 2.0 * np.pi * noise.sigma_common_2pi_khz * 1e-3  # rad / us
    wd = 2.0 * np.pi * noise.sigma_diff_2pi_khz * 1e-3
    n = N_UP.astype(float)
    m = (ATOM1_UP - ATOM2_UP).astype(float)
    dn = n[:, None] - n[None, :]
    dm = m[:, None] - m[None, :]
    decay = np.exp(-0.5 * (wc**2 * dn**2 + wd**2 * dm**2) * t_us**2)
    return TwoAtomState(state.rho * decay)


def scattering_event(state: TwoAtomState, atom: int) -> TwoAtomState:
    """Project the given atom (1 or 2) onto up and renormalize.

    A spontaneously scattered photon carries which-atom information, so the
    environment effectively measures that the scattering atom was up.
    """
    if atom not in (1, 2):
        raise ValueError("atom must be 1 or 2")
    up = ATOM1_UP if atom == 1 else ATOM2_UP
    mask = np.outer(up, up).astype(float)
    return renormalize(TwoAtomState(state.rho * mask))


def scattering_channel(state: TwoAtomState, expected_scatter: float) -> TwoAtomState:
    """Mix over a Poisson number of scattering events, each on a random atom.

    The event count is not observed, so the channel is an average of the
    k-event conditional states weighted by the Poisson distribution; branches
    that cannot scatter at all are left unchanged. For a Psi+ input this
    gives fidelity 1/2 + exp(-expected_scatter) / 2 exactly.
    """
    if expected_scatter < 0:
        raise ValueError("expected_scatter must be >= 0")
    if expected_scatter == 0:
        return state
    masks = [np.outer(u, u).astype(float) for u in (ATOM1_UP, ATOM2_UP)]
    out = np.zeros((4, 4), dtype=complex)
    current = state.rho
    k = 0
    weight = math.exp(-expected_scatter)
    cumulative = 0.0
    last_norm = state.rho
    while True:
        tr = current.trace().real
        last_norm = current / tr if tr >= 1e-15 else state.rho
        out += weight * last_norm
        cumulative += weight
        if 1.0 - cumulative < 1e-14 or k > 400:
            break
        current = 0.5 * (current * masks[0] + current * masks[1])
        k += 1
        weight *= expected_scatter / k
    out += (1.0 - cumulative) * last_norm
    return TwoAtomState(out)


@dataclass(frozen=True)
class HeraldOutcome:
    """Result of one carving pulse, conditioned on the herald.

    herald_prob is the unconditional probability of a d click (including dark
    counts); d_fraction is the probability that a detection event was a d
    event, i.e. herald_prob divided by the probability of any click at all.
    branch_log maps the number of detected d photons (0 = dark count only) to
    its relative weight within the herald.
    """

    state: TwoAtomState
    herald_prob: float
    d_fraction: float
    branch_log: dict[int, float]
    any_prob: float
    no_herald_state: TwoAtomState | None

    def __post_init__(self):
        if not -1e-12 <= self.herald_prob <= 1 + 1e-12:
            raise ValueError("herald_prob out of [0, 1]")
        if not -1e-12 <= self.d_fraction <= 1 + 1e-12:
            raise ValueError("d_fraction out of [0, 1]")

    @property
    def no_herald_prob(self) -> float:
        return 1.0 - self.herald_prob


class _PulseTables:
    """Precomputed per-branch record amplitudes and Schur multipliers."""

    __slots__ = (
        "delta",
        "keep",
        "records",
        "overlap",
        "herald_mult",
        "no_herald_mult",
        "p_no_d",
        "p_no_a",
        "eta",
        "dark",
    )

    def __init__(self, model: ReflectionModel, pulse: PulseConfig):
        nu = pulse.nbar * pulse.mode_match
        nu_unmatched = pulse.nbar * (1.0 - pulse.mode_match)
        eta = pulse.det_eff
        dark = pulse.dark_prob
        root = np.sqrt(nu)

        delta = model.d_amp * root
        keep = model.a_amp * root
        # which-atom scattering records: the s(N) budget of a branch is split
        # evenly over its coupled atoms
        per_atom = np.where(N_UP > 0, model.scatter / np.maximum(N_UP, 1), 0.0) * nu
        u1 = np.sqrt(per_atom) * ATOM1_UP
        u2 = np.sqrt(per_atom) * ATOM2_UP
        # passive mirror loss; clamped because s(1) can slightly exceed the
        # single-up branch loss (second-mirror bookkeeping)
        passive = np.sqrt(np.clip(model.loss - model.scatter, 0.0, None) * nu)

        def sqdiff(x):
            return (x[:, None] - x[None, :]) ** 2

        # coherent-state environment overlaps for all traced-out records: the
        # undetected d fraction, the a polarization, per-atom scattering and
        # passive loss
        log_g = -0.5 * (
            (1.0 - eta) * sqdiff(delta)
            + sqdiff(keep)
            + sqdiff(u1)
            + sqdiff(u2)
            + sqdiff(passive)
        )
        overlap = np.exp(log_g)
        quad = np.exp(-0.5 * eta * (delta[:, None] ** 2 + delta[None, :] ** 2))
        no_click = np.exp(-0.5 * eta * sqdiff(delta))
        self.delta = delta
        self.keep = keep
        self.records = (u1, u2, passive)
        self.overlap = overlap
        self.herald_mult = overlap * (no_click - (1.0 - dark) * quad)
        self.no_herald_mult = overlap * (1.0 - dark) * quad
        self.p_no_d = (1.0 - dark) * np.exp(-eta * delta**2)
        self.p_no_a = np.exp(-eta * (keep**2 + nu_unmatched))
        self.eta = eta
        self.dark = dark

    def count_mult(self, n: int) -> np.ndarray:
        """Multiplier conditioned on exactly n detected d photons."""
        quad = np.exp(-0.5 * self.eta * (self.delta[:, None] ** 2 + self.delta[None, :] ** 2))
        amp = self.eta * np.outer(self.delta, self.delta)
        return self.overlap * quad * amp**n / math.factorial(n)


def _as_model(cavity) -> ReflectionModel:
    if cavity is None:
        return ReflectionModel.from_params(CavityParams())
    if isinstance(cavity, CavityParams):
        return ReflectionModel.from_params(cavity)
    if isinstance(cavity, ReflectionModel):
        return cavity
    raise TypeError(f"expected CavityParams or ReflectionModel, got {type(cavity)!r}")


def carve_step(
    state: TwoAtomState,
    pulse: PulseConfig | None = None,
    cavity: CavityParams | ReflectionModel | None = None,
) -> HeraldOutcome:
    """One carving pulse conditioned on a d-detector herald.

    The returned state is exact: the coherent pulse is treated photon by
    photon, all undetected records are traced out, and the state is
    conditioned on at least one detected d photon or a dark count.
    """
    if abs(state.trace_weight - 1.0) > 1e-9:
        raise ValueError("carve_step needs a normalized input state")
    pulse = pulse or PulseConfig()
    tables = _PulseTables(_as_model(cavity), pulse)
    diag = state.rho.diagonal().real
    herald_prob = float(diag @ tables.herald_mult.diagonal().real)
    if herald_prob < 1e-15:
        raise NeverHeraldsError(
            "this pulse never heralds on the given state "
            "(no d amplitude and no dark counts)"
        )
    heralded = TwoAtomState(state.rho * tables.herald_mult / herald_prob)
    any_prob = float(diag @ (1.0 - tables.p_no_d * tables.p_no_a))
    d_fraction = herald_prob / any_prob if any_prob > 0 else 1.0

    branch_log: dict[int, float] = {}
    branch_log[0] = tables.dark * float(diag @ tables.count_mult(0).diagonal()) / herald_prob
    n = 1
    logged = branch_log[0] * herald_prob
    while n < 80:
        w = float(diag @ tables.count_mult(n).diagonal())
        branch_log[n] = w / herald_prob
        logged += w
        if herald_prob - logged < 1e-14:
            break
        n += 1

    no_herald_prob = 1.0 - herald_prob
    no_herald_state = None
    if no_herald_prob >= 1e-15:
        no_herald_state = TwoAtomState(state.rho * tables.no_herald_mult / no_herald_prob)
    return HeraldOutcome(
        state=heralded,
        herald_prob=herald_prob,
        d_fraction=d_fraction,
        branch_log=branch_log,
        any_prob=any_prob,
        no_herald_state=no_herald_state,
    )


def final_rotation_for(target: BellKind) -> RotationSpec | None:
    """Last rotation of the carving sequence needed to reach a Bell target."""
    if target is BellKind.PHI_MINUS:
        return RotationSpec("y", np.pi / 2)
    if target is BellKind.PHI_PLUS:
        return RotationSpec("x", np.pi / 2)
    return None


@dataclass(frozen=True)
class ProtocolResult:
    """Heralded protocol output with success bookkeeping.

    success_prob multiplies the per-step d_fractions (herald per detection
    event); efficiency multiplies the unconditional per-step herald
    probabilities (herald per attempt).
    """

    outcome: HeraldOutcome
    success_prob: float
    efficiency: float
    steps: tuple[HeraldOutcome, ...]
    eta_ideal: float | None = None
    f_ideal: float | None = None

    @property
    def state(self) -> TwoAtomState:
        return self.outcome.state


def _rotated_outcome(step: HeraldOutcome, spec: RotationSpec | None) -> HeraldOutcome:
    if spec is None:
        return step
    return HeraldOutcome(
        state=global_rotation(step.state, spec),
        herald_prob=step.herald_prob,
        d_fraction=step.d_fraction,
        branch_log=step.branch_log,
        any_prob=step.any_prob,
        no_herald_state=step.no_herald_state,
    )


def double_carving(
    prep: PreparationSpec | None = None,
    pulse: PulseConfig | None = None,
    cavity: CavityParams | ReflectionModel | None = None,
    final_rotation: RotationSpec | None = None,
) -> ProtocolResult:
    """Two-pulse carving: R_y(pi/2), carve, R_y(pi), carve, optional rotation.

    From down-down preparation the sequence heralds Psi+, which the final
    rotation can convert into Phi- (R_y(pi/2)) or Phi+ (R_x(pi/2)); from the
    antiparallel mixture it heralds the singlet Psi-.
    """
    prep = prep or PreparationSpec("down_down")
    rho = prepare(prep)
    rho = global_rotation(rho, RotationSpec("y", np.pi / 2))
    step1 = carve_step(rho, pulse, cavity)
    rho = global_rotation(step1.state, RotationSpec("y", np.pi))
    step2 = carve_step(rho, pulse, cavity)
    outcome = _rotated_outcome(step2, final_rotation)
    return ProtocolResult(
        outcome=outcome,
        success_prob=step1.d_fraction * step2.d_fraction,
        efficiency=step1.herald_prob * step2.herald_prob,
        steps=(step1, step2),
    )


def single_carving_eta_ideal(alpha: float) -> float:
    """Ideal herald efficiency 1 - cos^4(alpha/2) of single carving."""
    return 1.0 - np.cos(alpha / 2.0) ** 4


def single_carving_f_ideal(alpha: float) -> float:
    """Ideal Psi+ fidelity 4 cos^2(alpha/2) / (3 + cos(alpha)) after carving."""
    return 4.0 * np.cos(alpha / 2.0) ** 2 / (3.0 + np.cos(alpha))


def single_carving(
    alpha: float,
    pulse: PulseConfig | None = None,
    cavity: CavityParams | ReflectionModel | None = None,
    final_rotation: RotationSpec | None = None,
) -> ProtocolResult:
    """One-pulse carving after a weak R_y(alpha) excitation from down-down.

    Carving away the down-down component of the product state leaves a state
    close to Psi+ (exactly Psi+ as alpha -> 0) at herald efficiency
    eta_ideal; the efficiency/fidelity trade-off is the point of this scheme.
    """
    if not 0 <= alpha <= np.pi:
        raise ValueError("alpha must be in [0, pi]")
    rho = prepare(PreparationSpec("pure_dd"))
    rho = global_rotation(rho, RotationSpec("y", alpha))
    step = carve_step(rho, pulse, cavity)
    outcome = _rotated_outcome(step, final_rotation)
    return ProtocolResult(
        outcome=outcome,
        success_prob=step.d_fraction,
        efficiency=step.herald_prob,
        steps=(step,),
        eta_ideal=float(single_carving_eta_ideal(alpha)),
        f_ideal=float(single_carving_f_ideal(alpha)),
    )


@dataclass(frozen=True)
class ProtocolSpec:
    """Descriptor of a carving protocol run.

    scheme is "double" or "single"; the preparation defaults to down_down
    except for the double-carving singlet target, which needs the
    antiparallel mixture. Single carving starts from a perfect down-down
    state and cannot reach the singlet at all.
    """

    scheme: str = "double"
    target: BellKind = BellKind.PSI_PLUS
    alpha: float = np.pi / 2
    prep: PreparationSpec | None = None

    def __post_init__(self):
        if self.scheme not in ("double", "single"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.scheme == "single" and self.target is BellKind.PSI_MINUS:
            raise ValueError(
                "single carving cannot target the singlet; the carved state "
                "lives in the symmetric subspace"
            )
        if not 0 <= self.alpha <= np.pi:
            raise ValueError("alpha must be in [0, pi]")
        if self.prep is None:
            kind = (
                "antiparallel"
                if self.scheme == "double" and self.target is BellKind.PSI_MINUS
                else "down_down"
            )
            object.__setattr__(self, "prep", PreparationSpec(kind))

    @property
    def n_pulses(self) -> int:
        return 2 if self.scheme == "double" else 1


def run_protocol(
    spec: ProtocolSpec,
    pulse: PulseConfig | None = None,
    cavity: CavityParams | ReflectionModel | None = None,
) -> ProtocolResult:
    """Exact-channel evaluation of a protocol descriptor."""
    final = final_rotation_for(spec.target)
    if spec.scheme == "double":
        return double_carving(spec.prep, pulse, cavity, final)
    return single_carving(spec.alpha, pulse, cavity, final)


def _build_ops(spec: ProtocolSpec) -> list:
    """Sequence of ("rotate", U2) and ("pulse",) ops for a protocol."""
    if spec.scheme == "double":
        ops = [
            ("rotate", RotationSpec("y", np.pi / 2)),
            ("pulse",),
            ("rotate", RotationSpec("y", np.pi)),
            ("pulse",),
        ]
        prep = spec.prep
    else:
        ops = [("rotate", RotationSpec("y", spec.alpha)), ("pulse",)]
        prep = PreparationSpec("pure_dd")
    final = final_rotation_for(spec.target)
    if final is not None:
        ops.append(("rotate", final))
    return prep, ops


@dataclass(frozen=True)
class MonteCarloResult:
    """Empirical protocol statistics from sampled trajectories.

    records holds per-trial arrays ("herald", "any_event", "n_d" with one
    column per pulse, and "fidelity", nan where the trial was not heralded);
    summaries are computed from them, so identical records mean identical
    summaries.
    """

    trials: int
    seed: int
    heralded: int
    success_rate: float
    efficiency: float
    mean_fidelity: float
    fidelity_stderr: float
    step_reached: tuple[int, ...]
    step_any_event: tuple[int, ...]
    step_heralds: tuple[int, ...]
    records: dict[str, np.ndarray]


def _mc_chunk(draws, diag0, ops, tables, pmf_d, t_stack, target_vec):
    """Simulate one contiguous block of trials; pure function of its inputs."""
    n = draws.shape[0]
    n_pulses = sum(1 for op in ops if op[0] == "pulse")
    cdf0 = np.cumsum(diag0)
    b0 = np.sum(cdf0[None, :] < draws[:, 0][:, None], axis=1).clip(0, 3)
    states = np.zeros((n, 4, 4), dtype=complex)
    states[np.arange(n), b0, b0] = 1.0

    heralds = np.zeros((n, n_pulses), dtype=bool)
    any_event = np.zeros((n, n_pulses), dtype=bool)
    n_d = np.zeros((n, n_pulses), dtype=np.int64)
    col = 1
    pulse_idx = 0
    n_max = pmf_d.shape[1] - 1
    for op in ops:
        if op[0] == "rotate":
            u = single_qubit_unitary(op[1])
            u2 = np.kron(u, u)
            states = np.einsum("ab,nbc,dc->nad", u2, states, u2.conj())
            continue
        diag = np.einsum("nii->ni", states).real.clip(min=0.0)
        mix = diag @ pmf_d  # (n, n_max + 1)
        cdf = np.cumsum(mix, axis=1)
        nd = np.sum(cdf < draws[:, col][:, None], axis=1).clip(0, n_max)
        dark = draws[:, col + 1] < tables.dark
        herald = (nd >= 1) | dark
        w = diag * pmf_d[:, nd].T  # branch weights given the d count
        wsum = w.sum(axis=1)
        p_no_a = (w @ tables.p_no_a) / np.where(wsum > 0, wsum, 1.0)
        a_click = draws[:, col + 2] < 1.0 - p_no_a
        heralds[:, pulse_idx] = herald
        any_event[:, pulse_idx] = herald | a_click
        n_d[:, pulse_idx] = nd
        states = states * t_stack[nd]
        tr = np.einsum("nii->n", states).real
        states = states / np.maximum(tr, 1e-300)[:, None, None]
        col += 3
        pulse_idx += 1
    fid = np.einsum("a,nab,b->n", target_vec.conj(), states, target_vec).real
    return heralds, any_event, n_d, fid


def monte_carlo_run(
    protocol: ProtocolSpec,
    trials: int,
    seed: int,
    pulse: PulseConfig | None = None,
    cavity: CavityParams | ReflectionModel | None = None,
    workers: int | None = None,
) -> MonteCarloResult:
    """Trajectory simulation of a protocol, deterministic in (seed, trial).

    Every trial consumes a fixed row of counter-based uniform draws, so the
    result is byte-identical for any worker count; workers only split the
    rows into blocks evaluated concurrently.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    pulse = pulse or PulseConfig()
    model = _as_model(cavity)
    tables = _PulseTables(model, pulse)
    prep, ops = _build_ops(protocol)
    n_pulses = sum(1 for op in ops if op[0] == "pulse")

    diag0 = prepare(prep).rho.diagonal().real
    max_rate = float(np.max(tables.eta * tables.delta**2))
    n_max = max(8, int(math.ceil(max_rate + 12.0 * math.sqrt(max_rate + 1.0))))
    counts = np.arange(n_max + 1)
    t_stack = np.stack([tables.count_mult(n) for n in counts])
    pmf_d = t_stack[:, np.arange(4), np.arange(4)].T.real.copy()  # (4, n_max + 1)
    target_vec = bell_vector(protocol.target)

    gen = np.random.Generator(np.random.Philox(key=seed))
    draws = gen.random((trials, 1 + 3 * n_pulses))

    n_workers = workers or 1
    bounds = np.linspace(0, trials, n_workers + 1).astype(int)
    blocks = [(draws[lo:hi],) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
    def run(block):
        return _mc_chunk(block[0], diag0, ops, tables, pmf_d, t_stack, target_vec)

    if n_workers == 1 or len(blocks) == 1:
        parts = [run(b) for b in blocks]
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            parts = list(pool.map(run, blocks))
    heralds = np.concatenate([p[0] for p in parts])
    any_event = np.concatenate([p[1] for p in parts])
    n_d = np.concatenate([p[2] for p in parts])
    fid = np.concatenate([p[3] for p in parts])

    alive = np.ones(trials, dtype=bool)
    step_reached, step_any, step_her = [], [], []
    for p in range(n_pulses):
        step_reached.append(int(alive.sum()))
        step_any.append(int((any_event[:, p] & alive).sum()))
        step_her.append(int((heralds[:, p] & alive).sum()))
        alive &= heralds[:, p]
    heralded = int(alive.sum())
    success = 1.0
    for a, h in zip(step_any, step_her):
        success *= h / a if a > 0 else np.nan
    fid = np.where(alive, fid, np.nan)
    kept = fid[alive]
    mean_f = float(kept.mean()) if heralded else float("nan")
    stderr = float(kept.std(ddof=1) / math.sqrt(heralded)) if heralded > 1 else float("nan")
    return MonteCarloResult(
        trials=trials,
        seed=seed,
        heralded=heralded,
        success_rate=float(success),
        efficiency=heralded / trials,
        mean_fidelity=mean_f,
        fidelity_stderr=stderr,
        step_reached=tuple(step_reached),
        step_any_event=tuple(step_any),
        step_heralds=tuple(step_her),
        records={"herald": heralds, "any_event": any_event, "n_d": n_d, "fidelity": fid},
    )
