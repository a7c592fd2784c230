"""Tomography and diagnostics for carved states.

Covers the parity-oscillation route to the Bell coherences, fidelity
reconstruction from populations plus coherences, Husimi Q distributions with
Mollweide map coordinates, Gaussian lifetime fits of dephasing curves, and
the two-window (transmission then fluorescence) state-detection classifier.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit

from .states import BellKind, RotationSpec, TwoAtomState, bell_vector, global_rotation

DETECTION_CLASSES = ("down_down", "antiparallel", "up_up")


class UnderdeterminedScanError(ValueError):
    """The parity scan does not constrain all three coherences."""


class FitFailedError(RuntimeError):
    """A least-squares fit did not converge."""


def parity_of(state: TwoAtomState, phi: float) -> float:
    """Parity after the analysis pulse with axis phase phi.

    Operational definition: rotate both atoms by pi/2 about the equatorial
    axis at azimuth pi/2 - phi (phi = 0 is the y axis), then measure
    P_uu + P_dd - P_ud - P_du. Equal to parity_closed_form by construction.
    """
    if abs(state.trace_weight - 1.0) > 1e-9:
        raise ValueError("parity needs a normalized state")
    rotated = global_rotation(state, RotationSpec(np.pi / 2 - phi, np.pi / 2))
    d = rotated.rho.diagonal().real
    return float(d[0] + d[3] - d[1] - d[2])


def parity_closed_form(state: TwoAtomState, phi: float) -> float:
    """2 Re rho_ud,du + 2 Im rho_uu,dd sin(2 phi) + 2 Re rho_uu,dd cos(2 phi)."""
    inner = state.element("ud", "du")
    outer = state.element("uu", "dd")
    return float(
        2.0 * inner.real
        + 2.0 * outer.imag * np.sin(2.0 * phi)
        + 2.0 * outer.real * np.cos(2.0 * phi)
    )


@dataclass(frozen=True)
class ParityScan:
    """Sampled parity curve: phases (radians, strictly increasing), values."""

    phases: np.ndarray
    parities: np.ndarray
    errors: np.ndarray | None = None

    def __post_init__(self):
        phases = np.asarray(self.phases, dtype=float)
        parities = np.asarray(self.parities, dtype=float)
        if phases.ndim != 1 or phases.shape != parities.shape:
            raise ValueError("phases and parities must be 1d arrays of equal length")
        if np.any(np.diff(phases) <= 0):
            raise ValueError("phases must be strictly increasing")
        errors = self.errors
        if errors is not None:
            errors = np.asarray(errors, dtype=float)
            if errors.shape != phases.shape or np.any(errors <= 0):
                raise ValueError("errors must be positive and match phases")
        object.__setattr__(self, "phases", phases)
        object.__setattr__(self, "parities", parities)
        object.__setattr__(self, "errors", errors)

    @classmethod
    def of_state(cls, state: TwoAtomState, n_phases: int = 16) -> "ParityScan":
        phases = np.linspace(0.0, 2.0 * np.pi, n_phases, endpoint=False)
        values = np.array([parity_of(state, p) for p in phases])
        return cls(phases, values)


@dataclass(frozen=True)
class CoherenceFit:
    """Coherences extracted from a parity scan.

    re_updn_dnup is half the fitted offset, the other two are half the
    2-phi quadrature amplitudes; residual is the rms misfit.
    """

    re_updn_dnup: float
    im_upup_dndn: float
    re_upup_dndn: float
    residual: float

    def __post_init__(self):
        for value in (self.re_updn_dnup, self.im_upup_dndn, self.re_upup_dndn):
            if abs(value) > 0.5 + 0.05:
                raise ValueError(f"fitted coherence {value!r} is unphysically large")


def fit_parity(scan: ParityScan) -> CoherenceFit:
    """Linear least squares of the parity curve on {1, sin 2phi, cos 2phi}."""
    phases = scan.phases
    design = np.column_stack(
        [np.ones_like(phases), np.sin(2.0 * phases), np.cos(2.0 * phases)]
    )
    target = scan.parities
    if scan.errors is not None:
        design = design / scan.errors[:, None]
        target = target / scan.errors
    if len(phases) < 3 or np.linalg.matrix_rank(design, tol=1e-10) < 3:
        raise UnderdeterminedScanError(
            "underdetermined scan: need at least 3 samples at 3 distinct phases mod pi"
        )
    coeffs, _, _, _ = np.linalg.lstsq(design, target, rcond=None)
    misfit = design @ coeffs - target
    residual = float(np.sqrt(np.mean(misfit**2)))
    return CoherenceFit(
        re_updn_dnup=float(coeffs[0] / 2.0),
        im_upup_dndn=float(coeffs[1] / 2.0),
        re_upup_dndn=float(coeffs[2] / 2.0),
        residual=residual,
    )


def bell_fidelity(
    populations: tuple[float, float, float], fit: CoherenceFit, target: BellKind
) -> float:
    """Bell fidelity from the measured population triple and fitted coherences.

    populations is (P_uu, P_dd, P_mixed) as returned by states.populations.
    """
    p_uu, p_dd, p_mixed = populations
    total = p_uu + p_dd + p_mixed
    if abs(total - 1.0) > 0.02:
        raise ValueError(f"populations sum to {total!r}, expected 1 within 0.02")
    if target is BellKind.PSI_PLUS:
        return 0.5 * p_mixed + fit.re_updn_dnup
    if target is BellKind.PSI_MINUS:
        return 0.5 * p_mixed - fit.re_updn_dnup
    if target is BellKind.PHI_PLUS:
        return 0.5 * (p_uu + p_dd) + fit.re_upup_dndn
    return 0.5 * (p_uu + p_dd) - fit.re_upup_dndn


def coherent_spin_vector(theta: float, phi: float) -> np.ndarray:
    """Product state of both atoms pointing along (theta, phi)."""
    single = np.array(
        [np.cos(theta / 2.0), -np.exp(1j * phi) * np.sin(theta / 2.0)], dtype=complex
    )
    return np.kron(single, single)


def husimi_q(state: TwoAtomState, theta: float, phi: float) -> float:
    """Husimi Q value (3 / 4 pi) <theta,phi| rho |theta,phi>."""
    v = coherent_spin_vector(theta, phi)
    return float(3.0 / (4.0 * np.pi) * np.real(v.conj() @ state.rho @ v))


def symmetric_projector() -> np.ndarray:
    """Projector onto the symmetric subspace (everything but the singlet)."""
    singlet = bell_vector(BellKind.PSI_MINUS)
    return np.eye(4, dtype=complex) - np.outer(singlet, singlet.conj())


@dataclass(frozen=True)
class HusimiGrid:
    """Husimi Q on a theta x phi grid with Mollweide map coordinates.

    theta holds cell-midpoint colatitudes, phi the azimuth samples; q, x and
    y are (n_theta, n_phi) arrays. integral is the quadrature sum of Q dOmega,
    which equals the symmetric-subspace weight of the state.
    """

    theta: np.ndarray
    phi: np.ndarray
    q: np.ndarray
    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    integral: float = 0.0

    def __post_init__(self):
        if np.min(self.q) < -1e-12:
            raise ValueError("Husimi Q must be nonnegative")
        # midpoint quadrature overshoots by O(dtheta^2) on coarse grids
        dtheta = np.pi / max(len(self.theta), 1)
        if not -1e-12 <= self.integral <= 1.0 + max(1e-3, 0.5 * dtheta**2):
            raise ValueError(f"Husimi integral {self.integral!r} out of range")


def husimi_grid(state: TwoAtomState, n_theta: int, n_phi: int) -> HusimiGrid:
    """Evaluate Q on midpoint colatitudes x uniform azimuths."""
    if n_theta < 2 or n_phi < 2:
        raise ValueError("grid resolution must be at least 2 x 2")
    theta = (np.arange(n_theta) + 0.5) * np.pi / n_theta
    phi = np.arange(n_phi) * 2.0 * np.pi / n_phi
    c = np.cos(theta / 2.0)
    s = -np.exp(1j * phi[None, :]) * np.sin(theta / 2.0)[:, None]
    vec = np.empty((n_theta, n_phi, 4), dtype=complex)
    vec[:, :, 0] = (c**2)[:, None]
    vec[:, :, 1] = c[:, None] * s
    vec[:, :, 2] = vec[:, :, 1]
    vec[:, :, 3] = s**2
    q = 3.0 / (4.0 * np.pi) * np.einsum(
        "tpa,ab,tpb->tp", vec.conj(), state.rho, vec
    ).real
    q = np.where(np.abs(q) < 1e-300, 0.0, q)
    weights = np.sin(theta)[:, None] * (np.pi / n_theta) * (2.0 * np.pi / n_phi)
    integral = float(np.sum(q * weights))
    theta_grid = np.broadcast_to(theta[:, None], q.shape)
    phi_grid = np.broadcast_to(phi[None, :], q.shape)
    x, y = mollweide(theta_grid, phi_grid)
    return HusimiGrid(theta=theta, phi=phi, q=q, x=x, y=y, integral=integral)


def mollweide(theta, phi):
    """Mollweide map coordinates for colatitude theta and azimuth phi.

    Latitude is pi/2 - theta, longitude phi - pi, so the map is centered on
    (theta, phi) = (pi/2, pi). The auxiliary angle t solves
    2 t + sin 2 t = pi sin(latitude) by Newton iteration to 1e-10.
    """
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    lat = np.pi / 2.0 - theta
    lon = phi - np.pi
    t = lat.copy()
    polar = np.abs(lat) >= np.pi / 2.0 - 1e-9
    t = np.where(polar, np.sign(lat) * np.pi / 2.0, t)
    rhs = np.pi * np.sin(lat)
    for _ in range(50):
        f = 2.0 * t + np.sin(2.0 * t) - rhs
        step = np.where(polar, 0.0, f / np.maximum(2.0 + 2.0 * np.cos(2.0 * t), 1e-12))
        t = t - step
        if np.max(np.abs(step)) < 1e-10:
            break
    x = 2.0 * np.sqrt(2.0) / np.pi * lon * np.cos(t)
    y = np.sqrt(2.0) * np.sin(t)
    if x.ndim == 0:
        return float(x), float(y)
    return x, y


def gaussian_lifetime_fit(times, fidelities, baseline: float = 0.5) -> float:
    """1/e time of F(t) = baseline + (F0 - baseline) exp(-t^2 / tau^2).

    The baseline is fixed at the fully dephased fidelity of the target state
    (1/2 for Bell states losing only coherence). Constant input data has no
    decay scale and returns an infinite tau sentinel.
    """
    times = np.asarray(times, dtype=float)
    fids = np.asarray(fidelities, dtype=float)
    if times.ndim != 1 or times.shape != fids.shape or len(times) < 3:
        raise ValueError("need at least 3 (time, fidelity) samples")
    if len(np.unique(times)) != len(times):
        raise ValueError("times must be distinct")
    if np.ptp(fids) < 1e-9 or abs(fids[np.argmax(times)] - fids[np.argmin(times)]) < 1e-12:
        return float("inf")

    amp0 = fids[np.argmin(times)] - baseline
    rel = (fids - baseline) / amp0 if amp0 != 0 else np.zeros_like(fids)
    usable = (rel > 1e-6) & (rel < 1.0) & (times > 0)
    if np.any(usable):
        slope = np.polyfit(times[usable] ** 2, np.log(rel[usable]), 1)[0]
        tau0 = 1.0 / math.sqrt(-slope) if slope < 0 else float(np.max(times))
    else:
        tau0 = float(np.max(times)) or 1.0

    def model(t, f0, tau):
        return baseline + (f0 - baseline) * np.exp(-(t / tau) ** 2)

    try:
        popt, _ = curve_fit(
            model, times, fids, p0=[fids[np.argmin(times)], tau0], maxfev=10000
        )
    except RuntimeError as exc:
        raise FitFailedError(f"lifetime fit failed: {exc}") from exc
    tau = abs(float(popt[1]))
    if abs(popt[0] - baseline) < 1e-9:
        return float("inf")
    return tau


@dataclass(frozen=True)
class DetectionRates:
    """Poisson count means per true class for the two detection windows.

    Class order is (down_down, antiparallel, up_up). The transmission window
    probes cavity transmission (high only for uncoupled down_down); the
    fluorescence window follows a global pi pulse, so down_down fluoresces
    brightly, antiparallel dimly and up_up not at all.
    """

    transmission_means: tuple[float, float, float] = (9.0, 1.0, 0.3)
    fluorescence_means: tuple[float, float, float] = (6.0, 3.0, 0.03)
    transmission_threshold: int = 3
    fluorescence_threshold: int = 0

    def __post_init__(self):
        for mean in (*self.transmission_means, *self.fluorescence_means):
            if mean < 0:
                raise ValueError("count means must be >= 0")
        for thr in (self.transmission_threshold, self.fluorescence_threshold):
            if not isinstance(thr, int) or thr < 0:
                raise ValueError("thresholds must be nonnegative integers")

    def means_for(self, true_class: str) -> tuple[float, float]:
        idx = DETECTION_CLASSES.index(true_class)
        return self.transmission_means[idx], self.fluorescence_means[idx]


def simulate_detection(
    true_class: str, rates: DetectionRates, seed: int
) -> tuple[int, int]:
    """Sample one (transmission, fluorescence) count pair for a true class."""
    if true_class not in DETECTION_CLASSES:
        raise ValueError(f"unknown class {true_class!r}")
    t_mean, f_mean = rates.means_for(true_class)
    gen = np.random.Generator(np.random.Philox(key=seed))
    return int(gen.poisson(t_mean)), int(gen.poisson(f_mean))


def classify(t_count: int, f_count: int, rates: DetectionRates) -> str:
    """Two-window decision tree over the count pair.

    High transmission plus fluorescence is down_down; low transmission with
    no fluorescence is up_up (the pi pulse moved it to down_down, which stays
    dark); low transmission with fluorescence is antiparallel. High
    transmission with no fluorescence contradicts itself.
    """
    t_high = t_count > rates.transmission_threshold
    f_high = f_count > rates.fluorescence_threshold
    if t_high and f_high:
        return "down_down"
    if t_high:
        return "inconsistent"
    if f_high:
        return "antiparallel"
    return "up_up"


def confusion_matrix(rates: DetectionRates, trials: int, seed: int) -> np.ndarray:
    """(3, 4) matrix of P(assigned | true), last column = inconsistent.

    Rows follow DETECTION_CLASSES order; each row sums to exactly 1.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    gen = np.random.Generator(np.random.Philox(key=seed))
    matrix = np.zeros((3, 4))
    for i, cls in enumerate(DETECTION_CLASSES):
        t_mean, f_mean = rates.means_for(cls)
        t = gen.poisson(t_mean, size=trials)
        f = gen.poisson(f_mean, size=trials)
        t_high = t > rates.transmission_threshold
        f_high = f > rates.fluorescence_threshold
        assigned = np.where(
            t_high & f_high, 0, np.where(t_high, 3, np.where(f_high, 1, 2))
        )
        matrix[i] = np.bincount(assigned, minlength=4) / trials
    return matrix
