"""Cole-Cole constitutive layer.

Evaluates the complex permittivity of a dispersive conducting medium

    eps_c(omega) = eps0 * [eps_inf + delta_eps / (1 + (j omega tau)^(1-alpha))
                           - j sigma / (omega eps0)]

under the e^{j omega t} convention, together with its five closed-form
parameter derivatives, the dimensionless contrast sensitivities, and the
exact versus first-order electromagnetic contrast of a perturbed state.

All evaluation cores broadcast over numpy arrays; the dataclass wrappers
provide the scalar single-point interface.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .constants import EPSILON_0
from .errors import DomainError, SingularBackgroundError

PARAMETER_NAMES = ("eps_inf", "delta_eps", "tau", "alpha", "sigma")

#: Absolute finite-difference steps used when a parameter is exactly zero
#: (matched to the natural scale of each channel).
FD_STEP_FLOORS = np.array([1e-5, 1e-5, 1e-17, 1e-5, 1e-9])

#: Relative-error denominators are floored here so exactly-zero channels
#: report zero error instead of 0/0.
DENOMINATOR_FLOOR = 1e-30

#: Exact contrast evaluation refuses perturbed relaxation times at or below
#: this fraction of the background value instead of silently clamping.
TAU_FLOOR_FRACTION = 1e-3


@dataclasses.dataclass(frozen=True)
class ColeColeParams:
    """One Cole-Cole parameter state (eps_inf, delta_eps, tau, alpha, sigma).

    ``tau`` is in seconds, ``sigma`` in S/m, the rest dimensionless. The
    constructor only enforces evaluability (finite values, tau > 0);
    background states additionally satisfy :meth:`validate_background`.
    Perturbed states may carry small negative ``delta_eps`` or ``alpha``
    excursions and remain evaluable.
    """

    eps_inf: float
    delta_eps: float
    tau: float
    alpha: float
    sigma: float

    def __post_init__(self):
        values = self.as_array()
        if not np.all(np.isfinite(values)):
            bad = PARAMETER_NAMES[int(np.flatnonzero(~np.isfinite(values))[0])]
            raise DomainError(f"non-finite Cole-Cole parameter {bad!r}")
        if self.tau <= 0.0:
            raise DomainError(f"relaxation time tau must be positive, got {self.tau!r}")

    def validate_background(self) -> "ColeColeParams":
        """Enforce the stricter invariants of a background (unperturbed) state."""
        if self.eps_inf <= 0.0:
            raise DomainError(f"background eps_inf must be positive, got {self.eps_inf!r}")
        if self.delta_eps < 0.0:
            raise DomainError(f"background delta_eps must be nonnegative, got {self.delta_eps!r}")
        if not 0.0 <= self.alpha < 1.0:
            raise DomainError(f"background alpha must lie in [0, 1), got {self.alpha!r}")
        if self.sigma < 0.0:
            raise DomainError(f"background sigma must be nonnegative, got {self.sigma!r}")
        return self

    def as_array(self) -> np.ndarray:
        return np.array([self.eps_inf, self.delta_eps, self.tau, self.alpha, self.sigma])

    @classmethod
    def from_array(cls, values) -> "ColeColeParams":
        values = np.asarray(values, dtype=float)
        if values.shape != (5,):
            raise DomainError(f"expected 5 Cole-Cole parameters, got shape {values.shape}")
        return cls(*values.tolist())

    def perturbed(self, delta_mu) -> "ColeColeParams":
        """Return the state shifted by a physical perturbation vector."""
        return ColeColeParams.from_array(self.as_array() + np.asarray(delta_mu, dtype=float))


@dataclasses.dataclass(frozen=True)
class ComplexPermittivity:
    """Absolute complex permittivity (F/m) evaluated at one angular frequency."""

    value: complex
    omega: float

    @property
    def relative(self) -> complex:
        """Permittivity relative to vacuum, eps_c / eps0."""
        return self.value / EPSILON_0


@dataclasses.dataclass(frozen=True)
class SensitivityVector:
    """Contrast sensitivities psi_q = (1/eps_b) dF/dmu_q, one per parameter.

    Each entry is the dimensionless contrast produced by a unit physical
    perturbation of the corresponding Cole-Cole parameter.
    """

    psi: np.ndarray
    omega: float

    def __post_init__(self):
        psi = np.asarray(self.psi, dtype=complex)
        if psi.shape != (5,):
            raise DomainError(f"sensitivity vector must have 5 entries, got {psi.shape}")
        psi.flags.writeable = False
        object.__setattr__(self, "psi", psi)


def complex_permittivity(eps_inf, delta_eps, tau, alpha, sigma, omega) -> np.ndarray:
    """Broadcasting core of the Cole-Cole law. Returns eps_c in F/m.

    The fractional power uses the principal branch; with omega*tau > 0 the
    base j*omega*tau has argument pi/2, so the branch is smooth over the
    whole admissible alpha range.
    """
    omega = np.asarray(omega, dtype=float)
    u = (1j * omega * np.asarray(tau)) ** (1.0 - np.asarray(alpha))
    relative = eps_inf + delta_eps / (1.0 + u) - 1j * np.asarray(sigma) / (omega * EPSILON_0)
    return EPSILON_0 * relative


def eval_permittivity(params: ColeColeParams, omega: float) -> ComplexPermittivity:
    """Evaluate the Cole-Cole permittivity of one state at omega (rad/s)."""
    if omega <= 0.0:
        raise DomainError(f"angular frequency must be positive, got {omega!r}")
    value = complex(complex_permittivity(*params.as_array(), omega))
    if not np.isfinite(value):
        culprit = _nonfinite_culprit(params, omega)
        raise DomainError(
            f"permittivity overflow at omega={omega!r}; offending parameter {culprit!r}"
        )
    return ComplexPermittivity(value=value, omega=float(omega))


def _nonfinite_culprit(params: ColeColeParams, omega: float) -> str:
    if not np.isfinite(omega * params.tau):
        return "tau"
    u = (1j * omega * params.tau) ** (1.0 - params.alpha)
    if not np.isfinite(u):
        return "alpha"
    if not np.isfinite(params.sigma / (omega * EPSILON_0)):
        return "sigma"
    return "delta_eps"


def sensitivity_components(eps_inf, delta_eps, tau, alpha, sigma, omega) -> np.ndarray:
    """Broadcasting core for the five contrast sensitivities.

    Returns an array with a leading axis of length 5 ordered as
    ``PARAMETER_NAMES``. The derivatives of the Cole-Cole law are, with
    u = (j omega tau)^(1-alpha) and Log the principal branch:

        dF/deps_inf   = eps0
        dF/ddelta_eps = eps0 / (1 + u)
        dF/dtau       = -eps0 delta_eps (1-alpha) u / (tau (1+u)^2)
        dF/dalpha     =  eps0 delta_eps u Log(j omega tau) / (1+u)^2
        dF/dsigma     = -j / omega

    and psi_q = (1/eps_b) dF/dmu_q.
    """
    omega = np.asarray(omega, dtype=float)
    tau = np.asarray(tau)
    eps_b = complex_permittivity(eps_inf, delta_eps, tau, alpha, sigma, omega)
    if np.any(eps_b == 0.0):
        raise SingularBackgroundError("background permittivity is zero")
    u = (1j * omega * tau) ** (1.0 - np.asarray(alpha))
    log_base = np.log(1j * omega * tau)
    one_plus_u_sq = (1.0 + u) ** 2
    shape = np.broadcast(u, omega).shape
    components = np.empty((5,) + shape, dtype=complex)
    components[0] = EPSILON_0
    components[1] = EPSILON_0 / (1.0 + u)
    components[2] = -EPSILON_0 * delta_eps * (1.0 - alpha) * u / (tau * one_plus_u_sq)
    components[3] = EPSILON_0 * delta_eps * u * log_base / one_plus_u_sq
    components[4] = -1j / omega
    return components / eps_b


def eval_sensitivities(params: ColeColeParams, omega: float) -> SensitivityVector:
    """Analytic contrast sensitivities of one background state at omega."""
    if omega <= 0.0:
        raise DomainError(f"angular frequency must be positive, got {omega!r}")
    psi = sensitivity_components(*params.as_array(), omega)
    return SensitivityVector(psi=psi.reshape(5), omega=float(omega))


def finite_difference_check(
    params: ColeColeParams,
    omega: float,
    rel_step: float = 1e-5,
    analytic_bias: float = 0.0,
) -> np.ndarray:
    """Relative error of each analytic sensitivity against central differences.

    The step for channel q is ``rel_step * |mu_q|``, falling back to
    ``FD_STEP_FLOORS[q]`` when the parameter is exactly zero. The difference
    quotient divides by the actually realized step (x_plus - x_minus) so that
    affine channels are exact up to arithmetic rounding. Channels where both
    the analytic and the differenced derivative vanish report zero.

    ``analytic_bias`` scales the analytic values by (1 + bias); it exists
    only so the harness can prove the check is able to fail.
    """
    if not 0.0 < rel_step <= 1e-2:
        raise DomainError(f"rel_step must lie in (0, 1e-2], got {rel_step!r}")
    base = params.as_array()
    eps_b = eval_permittivity(params, omega).value
    psi = eval_sensitivities(params, omega).psi * (1.0 + analytic_bias)
    errors = np.empty(5)
    for q in range(5):
        step = rel_step * abs(base[q]) if base[q] != 0.0 else FD_STEP_FLOORS[q]
        plus, minus = base.copy(), base.copy()
        plus[q] += step
        minus[q] -= step
        f_plus = eval_permittivity(ColeColeParams.from_array(plus), omega).value
        f_minus = eval_permittivity(ColeColeParams.from_array(minus), omega).value
        psi_fd = (f_plus - f_minus) / ((plus[q] - minus[q]) * eps_b)
        errors[q] = abs(psi[q] - psi_fd) / max(abs(psi_fd), DENOMINATOR_FLOOR)
    return errors


def exact_contrast(background: ColeColeParams, delta_mu, omega: float) -> complex:
    """Exact electromagnetic contrast (F(mu_b + delta_mu) - eps_b) / eps_b."""
    delta_mu = np.asarray(delta_mu, dtype=float)
    perturbed_tau = background.tau + delta_mu[2]
    if perturbed_tau <= TAU_FLOOR_FRACTION * background.tau:
        raise DomainError(
            "perturbed tau fell to "
            f"{perturbed_tau!r} (floor {TAU_FLOOR_FRACTION * background.tau!r}); "
            "perturbation scale too large for channel 'tau'"
        )
    eps_b = eval_permittivity(background, omega).value
    eps_perturbed = eval_permittivity(background.perturbed(delta_mu), omega).value
    return (eps_perturbed - eps_b) / eps_b


def exact_contrast_field(background: ColeColeParams, delta_mu: np.ndarray, omega) -> np.ndarray:
    """Vectorized exact contrast for stacked perturbations.

    ``delta_mu`` has shape (5, ...) with the parameter channel leading;
    ``omega`` broadcasts against the trailing shape. Raises DomainError with
    the flat offending index if any perturbed tau hits the hard floor.
    """
    delta_mu = np.asarray(delta_mu, dtype=float)
    perturbed_tau = background.tau + delta_mu[2]
    floor = TAU_FLOOR_FRACTION * background.tau
    if np.any(perturbed_tau <= floor):
        index = np.unravel_index(int(np.argmax(perturbed_tau <= floor)), perturbed_tau.shape)
        raise DomainError(
            f"perturbed tau at index {index} fell below its floor; "
            "perturbation scale too large for channel 'tau'"
        )
    base = background.as_array()
    eps_b = complex_permittivity(*base, omega)
    eps_perturbed = complex_permittivity(
        base[0] + delta_mu[0],
        base[1] + delta_mu[1],
        perturbed_tau,
        base[3] + delta_mu[3],
        base[4] + delta_mu[4],
        omega,
    )
    return (eps_perturbed - eps_b) / eps_b


def linear_contrast(psi: SensitivityVector, delta_mu) -> complex:
    """First-order contrast: the inner product sum_q psi_q delta_mu_q."""
    delta_mu = np.asarray(delta_mu, dtype=float)
    return complex(np.dot(psi.psi, delta_mu))
