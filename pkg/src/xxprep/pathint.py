"""Real-time path-integral propagation with a finite-memory influence functional.

The reduced density matrix of the driven three-level ladder is evolved
exactly (up to time discretization and memory truncation) under linear
coupling of the level occupations to a harmonic bath.  Paths are labelled
by pairs of electronic states on the forward/backward branches; history
indices are merged into bath-coupling classes, which shrinks the
augmented density matrix whenever coupling weights coincide.

The bath enters through the correlation function

    C(t) = int_0^inf dw J(w) [coth(hbar w / 2 kT) cos(wt) - i sin(wt)]

and the influence coefficients eta_k, the double integrals of C over
pairs of dt-cells k steps apart (triangular half-cell for k = 0).

A polaron counter-term hbar*lambda*diag(nu^2) is added to the rotating
frame Hamiltonian during propagation so that stated detunings refer to
the observed (phonon-shifted) two-photon resonance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .constants import HBAR_MEV_PS, KB_MEV_PER_K
from .model import (
    DotParameters,
    PhononBath,
    PulseSpec,
    envelope,
    reorganization_shift,
    rotating_frame_hamiltonian,
    spectral_density,
)


class SolverError(RuntimeError):
    """Base class for solver failures."""


class QuadratureError(SolverError):
    """Adaptive quadrature failed to reach the requested accuracy."""

    def __init__(self, what: str, estimate: float, value: float):
        super().__init__(
            f"{what}: quadrature error estimate {estimate:.3e} "
            f"too large for value {value:.3e}"
        )
        self.estimate = estimate


class MemoryBudgetError(SolverError):
    """The augmented density matrix would exceed the memory budget."""

    def __init__(self, required: int, available: int):
        super().__init__(
            f"augmented density matrix needs {required / 1e6:.0f} MB "
            f"but the budget is {available / 1e6:.0f} MB"
        )
        self.required = required
        self.available = available


@dataclass(frozen=True)
class TimeGrid:
    """Uniform propagation grid with memory length n_c (in steps)."""

    dt: float  # ps
    n_steps: int
    n_c: int
    t_start: float = 0.0  # ps

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if not 1 <= self.n_c <= self.n_steps:
            raise ValueError("need 1 <= n_c <= n_steps")

    @property
    def t_end(self) -> float:
        return self.t_start + self.dt * self.n_steps

    @property
    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.n_steps + 1)

    @classmethod
    def for_pulse(
        cls, pulse: PulseSpec, dt: float = 0.8, n_c: int = 6, padding: float = 3.0
    ) -> "TimeGrid":
        """Grid spanning pulse.center +- padding * fwhm."""
        half = padding * pulse.fwhm
        n_steps = max(n_c, int(math.ceil(2.0 * half / dt)))
        return cls(dt=dt, n_steps=n_steps, n_c=n_c, t_start=pulse.center - half)


@dataclass(frozen=True)
class InfluenceKernel:
    """Discretized influence coefficients eta_k for lags 0..n_c."""

    eta: np.ndarray
    dt: float
    n_c: int
    bath_key: str = ""

    def __post_init__(self):
        if len(self.eta) != self.n_c + 1:
            raise ValueError("kernel must hold n_c + 1 coefficients")
        if not np.all(np.isfinite(self.eta)):
            raise ValueError("kernel coefficients must be finite")

    def is_zero(self) -> bool:
        return bool(np.all(self.eta == 0))


@dataclass(frozen=True)
class PropagationResult:
    """Time series of trace-normalized reduced density matrices."""

    times: np.ndarray  # (n_steps+1,)
    matrices: np.ndarray  # (n_steps+1, 3, 3)
    trace_drift: np.ndarray  # |tr - 1| per step before normalization
    grid: TimeGrid

    @property
    def populations(self) -> np.ndarray:
        return np.real(np.einsum("tii->ti", self.matrices))

    @property
    def final_matrix(self) -> np.ndarray:
        return self.matrices[-1]

    @property
    def max_trace_drift(self) -> float:
        return float(np.max(self.trace_drift))


@dataclass(frozen=True)
class ConvergenceReport:
    grid: TimeGrid
    occupations: tuple[float, float, float]
    converged: bool
    eps_history: tuple[float, ...] = field(default_factory=tuple)


_QUAD_OPTS = dict(limit=400, epsabs=1e-13, epsrel=1e-11)


def _coth(x):
    """coth(x) for x > 0, stable against overflow."""
    return 1.0 / np.tanh(np.minimum(x, 500.0))


def _thermal_weight(bath: PhononBath, omega):
    """coth(hbar w / 2 kT), -> 1 at T = 0; finite limit w -> 0 not needed
    because every integrand carries at least one extra power of w."""
    if bath.temperature == 0:
        return np.ones_like(np.asarray(omega, dtype=float))
    x = HBAR_MEV_PS * np.asarray(omega, dtype=float) / (
        2.0 * KB_MEV_PER_K * bath.temperature
    )
    return _coth(x)


def _omega_upper(bath: PhononBath) -> float:
    """Frequency beyond which J is negligible (1/ps)."""
    if bath.material is None:
        return 8.0 * bath.cutoff_freq
    m = bath.material
    scale = m.sound_velocity / (min(m.radius_e, m.radius_h) * 1e3)  # 1/ps
    return 18.0 * scale


def _checked_quad(fn, lo, hi, what, **kw):
    val, err = quad(fn, lo, hi, **_QUAD_OPTS, **kw)[:2]
    if err > 1e-9 + 1e-6 * abs(val):
        raise QuadratureError(what, err, val)
    return val


def bath_correlation(bath: PhononBath, t: float) -> complex:
    """Bath correlation function C(t) in 1/ps^2, t >= 0."""
    if t < 0:
        raise ValueError("t must be >= 0")
    if not bath.is_coupled():
        return 0.0 + 0.0j
    wmax = _omega_upper(bath)

    def j_coth(w):
        if w <= 0:
            return 0.0
        return spectral_density(bath, w) * _thermal_weight(bath, w)

    def j_plain(w):
        if w <= 0:
            return 0.0
        return spectral_density(bath, w)

    if t == 0:
        re = _checked_quad(j_coth, 0.0, wmax, "C(0)")
        return complex(re, 0.0)
    re = _checked_quad(j_coth, 0.0, wmax, "Re C(t)", weight="cos", wvar=t)
    im = _checked_quad(j_plain, 0.0, wmax, "Im C(t)", weight="sin", wvar=t)
    return complex(re, -im)


def _bath_key(bath: PhononBath) -> str:
    parts = [bath.temperature.hex(), bath.alpha.hex(), bath.cutoff.hex()]
    if bath.material is not None:
        m = bath.material
        parts += [
            m.deformation_e.hex(),
            m.deformation_h.hex(),
            m.mass_density.hex(),
            m.sound_velocity.hex(),
            m.radius_e.hex(),
            m.radius_h.hex(),
        ]
    return "|".join(parts)


_KERNEL_MEMO: dict[tuple, InfluenceKernel] = {}


def compute_kernel(bath: PhononBath, grid: TimeGrid) -> InfluenceKernel:
    """Influence coefficients for (bath, grid.dt, grid.n_c), memoized.

    eta_k reduces exactly to one-dimensional frequency integrals: the
    double integral of C over a lag-k cell pair equals the tent-weighted
    integral of C, whose cosine/sine transforms are analytic.
    """
    key = (_bath_key(bath), grid.dt.hex(), grid.n_c)
    hit = _KERNEL_MEMO.get(key)
    if hit is not None:
        return hit
    n_c, dt = grid.n_c, grid.dt
    if not bath.is_coupled():
        kernel = InfluenceKernel(
            eta=np.zeros(n_c + 1, dtype=complex), dt=dt, n_c=n_c, bath_key=key[0]
        )
        _KERNEL_MEMO[key] = kernel
        return kernel

    wmax = _omega_upper(bath)

    def f_coth(w):
        if w <= 0:
            return 0.0
        return spectral_density(bath, w) / w**2 * _thermal_weight(bath, w)

    def f_plain(w):
        if w <= 0:
            return 0.0
        return spectral_density(bath, w) / w**2

    # cosine / sine transforms of J coth / w^2 and J / w^2 at lags m*dt
    qc = np.empty(n_c + 2)
    qs = np.empty(n_c + 2)
    qc[0] = _checked_quad(f_coth, 0.0, wmax, "kernel Qc(0)")
    qs[0] = 0.0
    for m in range(1, n_c + 2):
        qc[m] = _checked_quad(
            f_coth, 0.0, wmax, f"kernel Qc({m})", weight="cos", wvar=m * dt
        )
        qs[m] = _checked_quad(
            f_plain, 0.0, wmax, f"kernel Qs({m})", weight="sin", wvar=m * dt
        )
    lam = reorganization_shift(bath) / HBAR_MEV_PS  # 1/ps

    eta = np.empty(n_c + 1, dtype=complex)
    eta[0] = (qc[0] - qc[1]) - 1j * (dt * lam - qs[1])
    for k in range(1, n_c + 1):
        re = 2.0 * qc[k] - qc[k + 1] - qc[k - 1]
        im = 2.0 * qs[k] - qs[k + 1] - qs[k - 1]
        eta[k] = re - 1j * im
    kernel = InfluenceKernel(eta=eta, dt=dt, n_c=n_c, bath_key=key[0])
    _KERNEL_MEMO[key] = kernel
    return kernel


def effective_hamiltonian(
    dot: DotParameters, pulse: PulseSpec, bath: PhononBath, t: float
) -> np.ndarray:
    """Rotating-frame Hamiltonian plus the polaron counter-term (meV)."""
    h = rotating_frame_hamiltonian(dot, pulse, t)
    if bath.is_coupled():
        lam_mev = reorganization_shift(bath)
        nu = dot.coupling_weights()
        h = h + np.diag(lam_mev * nu**2)
    return h


def _step_unitary(h: np.ndarray, dt: float) -> np.ndarray:
    """Exact exp(-i H dt / hbar) of a 3x3 Hermitian matrix."""
    vals, vecs = np.linalg.eigh(h)
    phases = np.exp(-1j * vals * dt / HBAR_MEV_PS)
    return (vecs * phases) @ vecs.conj().T


def _coupling_classes(nu: np.ndarray, kernel_zero: bool):
    """Merge forward/backward coupling-value pairs into classes.

    Returns (kappa_of_pair, nu_fwd, nu_bwd) where the latter hold the
    coupling values of each class representative.  With a vanishing
    kernel every pair behaves identically and collapses to one class.
    """
    if kernel_zero:
        return np.zeros(9, dtype=int), np.zeros(1), np.zeros(1)
    pair_vals = [(nu[p // 3], nu[p % 3]) for p in range(9)]
    classes: list[tuple[float, float]] = []
    kappa = np.empty(9, dtype=int)
    for p, pv in enumerate(pair_vals):
        for ci, cv in enumerate(classes):
            if cv == pv:
                kappa[p] = ci
                break
        else:
            kappa[p] = len(classes)
            classes.append(pv)
    nu_fwd = np.array([c[0] for c in classes])
    nu_bwd = np.array([c[1] for c in classes])
    return kappa, nu_fwd, nu_bwd


def _adm_bytes(n_kappa: int, n_c: int) -> int:
    # ADM + new ADM + one working copy, complex128
    return 3 * 16 * 9 * n_kappa ** max(n_c - 1, 0)


def propagate(
    dot: DotParameters,
    pulse: PulseSpec,
    bath: PhononBath,
    grid: TimeGrid,
    initial: np.ndarray | None = None,
    kernel: InfluenceKernel | None = None,
    mem_budget_bytes: int = 3 << 30,
) -> PropagationResult:
    """Iterative influence-functional propagation over the grid.

    Each step applies the exact midpoint coherent propagator to every
    path pair, multiplies the influence weights
    exp(-(nu_k - nu'_k)(eta_{k-k'} nu_{k'} - eta*_{k-k'} nu'_{k'})) over
    the retained history and truncates memory beyond n_c steps.  States
    are trace-normalized; the pre-normalization drift is recorded.
    """
    _check_window(pulse, grid)
    if kernel is None:
        kernel = compute_kernel(bath, grid)
    elif kernel.dt != grid.dt or kernel.n_c < grid.n_c:
        raise ValueError("kernel does not match the grid")

    rho0 = np.array([[1, 0, 0], [0, 0, 0], [0, 0, 0]], dtype=complex)
    if initial is not None:
        rho0 = np.asarray(initial, dtype=complex).copy()
        if rho0.shape != (3, 3):
            raise ValueError("initial state must be 3x3")

    nu = dot.coupling_weights()
    eta = kernel.eta
    n_c, dt, n_steps = grid.n_c, grid.dt, grid.n_steps
    kappa, nu_f, nu_b = _coupling_classes(nu, kernel.is_zero())
    n_kappa = len(nu_f)

    required = _adm_bytes(n_kappa, n_c)
    if required > mem_budget_bytes:
        raise MemoryBudgetError(required, mem_budget_bytes)

    # phi[j, c]: influence phase of class c at lag j; dnu per current pair
    phi = eta[:, None] * nu_f[None, :] - np.conj(eta)[:, None] * nu_b[None, :]
    dnu_pair = np.array([nu[p // 3] - nu[p % 3] for p in range(9)])
    dvals, d_of_pair = np.unique(dnu_pair, return_inverse=True)
    n_d = len(dvals)
    # ew[j, d, c] = exp(-dvals[d] * phi[j, c])
    ew = np.exp(-dvals[None, :, None] * phi[:, None, :])
    i0 = np.exp(-dnu_pair * phi[0][kappa])  # self term per current pair
    i1 = ew[1][:, kappa] if n_c >= 1 else None  # lag-1 weight [d, p]

    lam_mev = reorganization_shift(bath) if bath.is_coupled() else 0.0
    h_shift = np.diag(lam_mev * nu**2)

    times = grid.times
    states = np.empty((n_steps + 1, 3, 3), dtype=complex)
    drift = np.zeros(n_steps + 1)
    tr0 = np.trace(rho0).real
    states[0] = rho0 / tr0 if tr0 != 0 else rho0
    drift[0] = abs(np.trace(rho0) - 1.0)

    def step_propagator(k: int) -> np.ndarray:
        t_mid = times[k] + 0.5 * dt
        h = rotating_frame_hamiltonian(dot, pulse, t_mid) + h_shift
        u = _step_unitary(h, dt)
        return np.kron(u, u.conj())

    # growth-phase mid-axis weights are rebuilt as the ADM lengthens
    def mid_weight(d: int, j_hi: int) -> np.ndarray:
        """Outer product of ew[j, d] for j = 2..j_hi (shape kappa^(j_hi-1))."""
        w = np.ones(1, dtype=complex)
        for j in range(2, j_hi + 1):
            w = np.multiply.outer(w, ew[j, d])
        return w

    adm = None  # axes: [current pair (9), class lag1, class lag2, ...]
    m = 0  # number of path points held
    for k in range(n_steps):
        g = step_propagator(k)
        if m == 0:
            adm = (g @ rho0.reshape(9)) * i0
            m = 1
        elif n_c == 1:
            adm = _nc1_step(adm, g, i0, i1, d_of_pair, kappa)
        else:
            full = m == n_c
            rest = adm.shape[1:]
            if full:
                # contract oldest axis, grouped by distinct dnu of the new pair
                vband = ew[n_c].T  # (kappa, d)
                y = adm.reshape(-1, n_kappa) @ vband
                y = y.reshape((9,) + rest[:-1] + (n_d,))
                j_hi = n_c - 1
            else:
                y = adm
                j_hi = m
            new_rest = rest[:-1] if full else rest
            out = np.zeros((9, n_kappa) + new_rest, dtype=complex)
            wmid = [mid_weight(d, j_hi) for d in range(n_d)]
            for a in range(9):
                d = d_of_pair[a]
                za = y[..., d] if full else y
                za = za * wmid[d][None, ...]
                coeff = g[a] * i0[a] * i1[d]  # (9,) over current pairs
                for p in range(9):
                    out[a, kappa[p]] += coeff[p] * za[p]
            adm = out
            m = min(m + 1, n_c)

        rho_flat = adm.reshape(9, -1).sum(axis=1)
        tr = (rho_flat[0] + rho_flat[4] + rho_flat[8]).real
        drift[k + 1] = abs(tr - 1.0)
        if tr != 0:
            adm = adm / tr
            rho_flat = rho_flat / tr
        states[k + 1] = rho_flat.reshape(3, 3)

    return PropagationResult(times=times, matrices=states, trace_drift=drift, grid=grid)


def _nc1_step(adm, g, i0, i1, d_of_pair, kappa):
    """Single-step memory: sum the only axis with its lag-1 weight."""
    gt = g * i0[:, None] * i1[d_of_pair]
    return gt @ adm


def _check_window(pulse: PulseSpec, grid: TimeGrid) -> None:
    if pulse.area == 0:
        return
    sigma = pulse.sigma
    if pulse.gdd:
        tau0 = sigma * math.sqrt(2.0)
        sigma = sigma * math.sqrt(1.0 + (pulse.gdd / tau0**2) ** 2)
    need = 6.0 * sigma - 1e-9
    if pulse.center - grid.t_start < need or grid.t_end - pulse.center < need:
        raise ValueError(
            "time grid must cover at least 6 sigma of the pulse on both sides"
        )


def final_occupations(
    dot: DotParameters,
    pulse: PulseSpec,
    bath: PhononBath,
    grid: TimeGrid,
    **kwargs,
) -> tuple[float, float, float]:
    """Terminal (P_g, P_x, P_xx); they sum to one after normalization."""
    result = propagate(dot, pulse, bath, grid, **kwargs)
    pops = result.populations[-1]
    return float(pops[0]), float(pops[1]), float(pops[2])


def converge(
    dot: DotParameters,
    pulse: PulseSpec,
    bath: PhononBath,
    target_eps: float,
    grid: TimeGrid | None = None,
    max_refinements: int = 3,
    mem_budget_bytes: int = 3 << 30,
) -> ConvergenceReport:
    """Refine (dt/2, n_c+1) until terminal occupations move < target_eps.

    Returns the finest grid reached; ``converged`` is False when the
    refinement budget (count or memory) runs out first.
    """
    if not target_eps > 0:
        raise ValueError("target_eps must be > 0")
    if grid is None:
        grid = TimeGrid.for_pulse(pulse)
    occ = np.array(final_occupations(dot, pulse, bath, grid,
                                     mem_budget_bytes=mem_budget_bytes))
    history: list[float] = []
    for _ in range(max_refinements):
        nxt = TimeGrid(
            dt=grid.dt / 2.0,
            n_steps=grid.n_steps * 2,
            n_c=grid.n_c + 1,
            t_start=grid.t_start,
        )
        nu = dot.coupling_weights()
        kernel_zero = not bath.is_coupled()
        _, nu_f, _ = _coupling_classes(nu, kernel_zero)
        if _adm_bytes(len(nu_f), nxt.n_c) > mem_budget_bytes:
            return ConvergenceReport(grid, tuple(occ), False, tuple(history))
        occ_next = np.array(final_occupations(dot, pulse, bath, nxt,
                                              mem_budget_bytes=mem_budget_bytes))
        eps = float(np.max(np.abs(occ_next - occ)))
        history.append(eps)
        grid, occ = nxt, occ_next
        if eps < target_eps:
            return ConvergenceReport(grid, tuple(occ), True, tuple(history))
    return ConvergenceReport(grid, tuple(occ), False, tuple(history))
