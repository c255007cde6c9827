"""Dot, pulse and bath definitions plus the rotating-frame Hamiltonian.

Conventions
-----------
* Energies in meV, times in ps, (angular) frequencies in 1/ps.
* The dot is a three-level ladder |g>, |x>, |xx| (ground, exciton,
  biexciton) with biexciton energy 2*exciton_energy - binding_energy.
* The laser detuning is measured from the two-photon biexciton
  resonance (TPBR): detuning = photon energy - biexciton energy / 2.
* ``fwhm`` is the full width at half maximum of the *field* envelope of
  the unchirped pulse; the pulse area is the time integral of the
  instantaneous Rabi coupling of the unchirped envelope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import EV_TO_JOULE, HBAR_MEV_PS, HBAR_SI

# basis order used for every 3x3 matrix in the package
STATE_LABELS = ("g", "x", "xx")

_FWHM_TO_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))


@dataclass(frozen=True)
class DotParameters:
    """Electronic level scheme of the dot.

    dipole_ratio is the x<->xx coupling strength over the g<->x one;
    phonon_coupling_ratio is the biexciton-to-exciton bath coupling
    (2 for a biexciton built from two excitons with equal envelopes).
    """

    exciton_energy: float = 1421.2  # meV
    binding_energy: float = 2.3  # meV, > 0 for a bound biexciton
    dipole_ratio: float = 1.0
    phonon_coupling_ratio: float = 2.0

    def __post_init__(self):
        if not self.binding_energy > 0:
            raise ValueError("binding_energy must be > 0")
        if not self.dipole_ratio > 0:
            raise ValueError("dipole_ratio must be > 0")

    @property
    def biexciton_energy(self) -> float:
        return 2.0 * self.exciton_energy - self.binding_energy

    def coupling_weights(self) -> np.ndarray:
        """Diagonal of the bath-coupling operator, in exciton units."""
        return np.array([0.0, 1.0, self.phonon_coupling_ratio])


@dataclass(frozen=True)
class PulseSpec:
    """Shaped Gaussian excitation pulse.

    area is in radians (time integral of the unchirped Rabi coupling),
    gdd is the group-delay dispersion producing a linear chirp.
    """

    area: float  # rad
    fwhm: float  # ps, field-envelope FWHM of the unchirped pulse
    detuning: float = 0.0  # meV from the TPBR
    gdd: float = 0.0  # ps^2
    center: float = 0.0  # ps

    def __post_init__(self):
        if self.area < 0:
            raise ValueError("area must be >= 0")
        if not self.fwhm > 0:
            raise ValueError("fwhm must be > 0")

    @property
    def sigma(self) -> float:
        """Gaussian width of the unchirped field envelope (ps)."""
        return self.fwhm / _FWHM_TO_SIGMA


@dataclass(frozen=True)
class MaterialParams:
    """Deformation-potential parametrization of the acoustic bath."""

    deformation_e: float = 7.0  # eV
    deformation_h: float = -3.5  # eV
    mass_density: float = 5370.0  # kg/m^3
    sound_velocity: float = 5110.0  # m/s
    radius_e: float = 5.0  # nm
    radius_h: float = 5.0  # nm

    def __post_init__(self):
        if self.mass_density <= 0 or self.sound_velocity <= 0:
            raise ValueError("mass_density and sound_velocity must be > 0")
        if self.radius_e <= 0 or self.radius_h <= 0:
            raise ValueError("confinement radii must be > 0")


@dataclass(frozen=True)
class PhononBath:
    """Acoustic-phonon bath: temperature plus super-Ohmic coupling.

    alpha = 0 switches every solver to phonon-free dynamics.  If
    ``material`` is given the deformation-potential spectral density is
    used instead of the (alpha, cutoff) form.
    """

    temperature: float = 4.2  # K
    alpha: float = 0.027  # ps^2
    cutoff: float = 1.45  # meV (hbar * omega_c)
    material: MaterialParams | None = None

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if not self.cutoff > 0:
            raise ValueError("cutoff must be > 0")

    @property
    def cutoff_freq(self) -> float:
        """Cutoff as an angular frequency (1/ps)."""
        return self.cutoff / HBAR_MEV_PS

    def is_coupled(self) -> bool:
        return self.material is not None or self.alpha > 0


@dataclass(frozen=True)
class DressedSpectrum:
    """Instantaneous eigensystem of the rotating-frame Hamiltonian.

    ``eigenvectors[:, i]`` is the i-th dressed state; eigenvalues are
    ascending in meV.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    time: float


def envelope(pulse: PulseSpec, t):
    """Complex instantaneous Rabi coupling f(t) in 1/ps.

    Unchirped: f(t) = area/(sigma sqrt(2 pi)) * exp(-(t-t0)^2/(2 sigma^2)),
    so the time integral equals the pulse area.  A nonzero gdd stretches
    the envelope and adds a linear frequency sweep: with tau0 = sigma*sqrt(2)
    the stretched width is tau0*sqrt(1+(gdd/tau0^2)^2), the temporal chirp
    rate is a = gdd/(gdd^2+tau0^4) entering exp(i a (t-t0)^2 / 2), and the
    peak is rescaled to preserve the pulse energy (integral of |f|^2).
    """
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise ValueError("time must be finite")
    sigma = pulse.sigma
    dt = t - pulse.center
    peak = pulse.area / (sigma * math.sqrt(2.0 * math.pi))
    if pulse.gdd == 0.0:
        out = peak * np.exp(-(dt**2) / (2.0 * sigma**2)) + 0.0j
    else:
        tau0 = sigma * math.sqrt(2.0)
        stretch = math.sqrt(1.0 + (pulse.gdd / tau0**2) ** 2)
        tau_ch = tau0 * stretch
        rate = pulse.gdd / (pulse.gdd**2 + tau0**4)
        amp = peak / math.sqrt(stretch)  # keeps integral of |f|^2 fixed
        out = amp * np.exp(-(dt**2) / tau_ch**2 + 0.5j * rate * dt**2)
    return out if out.ndim else complex(out)


def rotating_frame_hamiltonian(
    dot: DotParameters, pulse: PulseSpec, t: float
) -> np.ndarray:
    """3x3 Hermitian Hamiltonian (meV) in the frame rotating at the laser.

    Diagonal (0, E_B/2 - detuning, -2 detuning) for (|g>, |x>, |xx>);
    the drive couples g<->x with hbar f/2 and x<->xx with
    dipole_ratio * hbar f/2.
    """
    f = envelope(pulse, t)
    h = np.zeros((3, 3), dtype=complex)
    h[1, 1] = 0.5 * dot.binding_energy - pulse.detuning
    h[2, 2] = -2.0 * pulse.detuning
    gx = 0.5 * HBAR_MEV_PS * f
    h[0, 1] = gx
    h[1, 0] = np.conj(gx)
    xxx = dot.dipole_ratio * gx
    h[1, 2] = xxx
    h[2, 1] = np.conj(xxx)
    return h


def dressed_states(dot: DotParameters, pulse: PulseSpec, t: float) -> DressedSpectrum:
    """Instantaneous eigendecomposition with a deterministic phase.

    Each eigenvector is rotated so its largest-magnitude component is
    real and positive (ties resolved by the lowest index).
    """
    h = rotating_frame_hamiltonian(dot, pulse, t)
    vals, vecs = np.linalg.eigh(h)
    vecs = fix_eigenvector_phases(vecs)
    return DressedSpectrum(eigenvalues=vals, eigenvectors=vecs, time=float(t))


def fix_eigenvector_phases(vecs: np.ndarray) -> np.ndarray:
    """Rotate column phases so the largest-|.| entry is real positive."""
    out = vecs.copy()
    for i in range(out.shape[1]):
        col = out[:, i]
        j = int(np.argmax(np.abs(col)))
        c = col[j]
        out[:, i] = col * (np.conj(c) / abs(c))
    return out


def spectral_density(bath: PhononBath, omega):
    """Super-Ohmic bath spectral density J(omega) in 1/ps.

    omega is an angular frequency (1/ps), omega >= 0.  The (alpha,
    cutoff) form is alpha * omega^3 * exp(-omega^2/omega_c^2); with a
    material parametrization the deformation-potential form
    omega^3/(4 pi^2 rho hbar c_s^5) (D_e e^{-w^2 a_e^2/4c_s^2} -
    D_h e^{-w^2 a_h^2/4c_s^2})^2 is evaluated in SI and converted.
    """
    omega = np.asarray(omega, dtype=float)
    if np.any(omega < 0):
        raise ValueError("omega must be >= 0")
    if bath.material is None:
        wc = bath.cutoff_freq
        out = bath.alpha * omega**3 * np.exp(-((omega / wc) ** 2))
    else:
        m = bath.material
        w_si = omega * 1e12  # 1/s
        de = m.deformation_e * EV_TO_JOULE
        dh = m.deformation_h * EV_TO_JOULE
        ae = m.radius_e * 1e-9
        ah = m.radius_h * 1e-9
        cs = m.sound_velocity
        pref = w_si**3 / (4.0 * math.pi**2 * m.mass_density * HBAR_SI * cs**5)
        form = de * np.exp(-(w_si**2) * ae**2 / (4.0 * cs**2)) - dh * np.exp(
            -(w_si**2) * ah**2 / (4.0 * cs**2)
        )
        out = pref * form**2 * 1e-12  # 1/s -> 1/ps
    return out if out.ndim else float(out)


def spectral_density_peak(bath: PhononBath) -> float:
    """Angular frequency (1/ps) at which J(omega) is maximal."""
    if bath.material is None:
        return bath.cutoff_freq * math.sqrt(1.5)
    from scipy.optimize import minimize_scalar

    wc = 3.0 * bath.material.sound_velocity / (
        min(bath.material.radius_e, bath.material.radius_h) * 1e3
    )  # rough 1/ps scale set by confinement
    res = minimize_scalar(
        lambda w: -spectral_density(bath, w), bounds=(1e-6, 10.0 * wc), method="bounded"
    )
    return float(res.x)


def reorganization_shift(bath: PhononBath) -> float:
    """Polaron shift hbar * integral J(w)/w dw of a unit-coupling level (meV).

    For the (alpha, cutoff) form this is analytic:
    alpha * sqrt(pi)/4 * omega_c^3.
    """
    if bath.material is None:
        lam = bath.alpha * math.sqrt(math.pi) / 4.0 * bath.cutoff_freq**3
    else:
        from scipy.integrate import quad

        wmax = 40.0  # 1/ps, well beyond any acoustic cutoff
        lam = quad(
            lambda w: spectral_density(bath, w) / w, 1e-12, wmax, limit=200
        )[0]
    return HBAR_MEV_PS * lam


def pulse_area_axis(first_resonant_max: float) -> float:
    """Scale that places the first resonant biexciton maximum at pi.

    Multiplying bare areas by the returned factor yields the
    renormalized pulse-area axis used for reporting.
    """
    if not first_resonant_max > 0:
        raise ValueError("first_resonant_max must be > 0")
    return math.pi / first_resonant_max
