"""Scalar background propagation kernels and the Born observation operator.

The background is a homogeneous dispersive whole space, so both the
transmit and the receive kernel reduce to the scalar Green function

    g(r; omega) = exp(-j k_b(omega) r) / (4 pi r),
    k_b = omega sqrt(mu0 eps_b(omega)),  Im k_b <= 0,

with the square-root branch chosen so fields decay with distance under the
e^{j omega t} convention. The receive functional is a point sample, and the
transmit amplitude factor is one for every channel. The kernel is kept
behind this module's small surface so a layered half-space response can be
swapped in without touching the covariance layer.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .constants import MU_0
from .constitutive import ColeColeParams, complex_permittivity, sensitivity_components
from .errors import AssemblyError, ConfigError, NearSingularityError
from .scene import Scenario, SceneGeometry

#: Kernel evaluations closer than this to the source are refused.
MIN_SEPARATION = 1e-6

#: Identifier recorded in persisted metadata.
KERNEL_NAME = "homogeneous-dispersive-scalar"

N_PARAMS = 5


def background_wavenumber(background: ColeColeParams, omega: float) -> complex:
    """Complex background wavenumber with the decaying branch (Im k <= 0)."""
    eps_b = complex_permittivity(*background.as_array(), omega)
    k = omega * np.sqrt(MU_0 * eps_b)
    if k.imag > 0.0:
        k = -k
    return complex(k)


def green_kernel(src, dst, omega: float, background: ColeColeParams) -> complex:
    """Scalar whole-space Green response between two points."""
    src = np.asarray(src, dtype=float)
    dst = np.asarray(dst, dtype=float)
    r = float(np.linalg.norm(dst - src))
    if r < MIN_SEPARATION:
        raise NearSingularityError(
            f"separation {r!r} m below the {MIN_SEPARATION} m kernel minimum"
        )
    k = background_wavenumber(background, omega)
    return complex(np.exp(-1j * k * r) / (4.0 * np.pi * r))


def _kernel_block(points_a: np.ndarray, points_b: np.ndarray, k: complex) -> np.ndarray:
    """Green kernel between two point sets, shape (len(a), len(b))."""
    diff = points_a[:, None, :] - points_b[None, :, :]
    r = np.sqrt(np.sum(diff * diff, axis=-1))
    if np.any(r < MIN_SEPARATION):
        ia, ib = np.unravel_index(int(np.argmin(r)), r.shape)
        raise NearSingularityError(
            f"separation {r[ia, ib]!r} m between points {ia} and {ib} "
            f"below the {MIN_SEPARATION} m kernel minimum"
        )
    return np.exp(-1j * k * r) / (4.0 * np.pi * r)


def born_kernel_tensor(background: ColeColeParams, geometry: SceneGeometry) -> np.ndarray:
    """Two-way channel kernels including the cell volume, shape (N, M, P).

    Entry (n, m, p) is g(rx_m, cell_p; omega_n) * g(cell_p, tx_n; omega_n)
    * cell volume: the Born integrand of channel (m, n) at cell p with the
    contrast factored out. Shared by forward assembly and the exact-contrast
    snapshot synthesizer so both use identical kernels and discretization.
    """
    n_tx, n_rx, n_cells = geometry.n_tx, geometry.n_rx, geometry.n_cells
    kernels = np.empty((n_tx, n_rx, n_cells), dtype=complex)
    for n in range(n_tx):
        omega = 2.0 * np.pi * geometry.frequencies[n]
        k = background_wavenumber(background, omega)
        g_rx = _kernel_block(geometry.rx_positions, geometry.cell_centers, k)
        g_tx = _kernel_block(geometry.tx_positions[n:n + 1], geometry.cell_centers, k)[0]
        kernels[n] = g_rx * g_tx[None, :] * geometry.cell_volume
    return kernels


@dataclasses.dataclass(frozen=True)
class ForwardMatrix:
    """The stacked Born observation operator, shape (M N, 5 P).

    Row (m, n) -> n * M + m; column (q, p) -> q * P + p, i.e. channels are
    stacked transmit-major and columns parameter-block major. Entries carry
    units of m^3 per physical unit of the corresponding parameter channel.
    """

    entries: np.ndarray
    n_tx: int
    n_rx: int
    n_cells: int
    scenario_id: str
    geometry_fingerprint: str

    def __post_init__(self):
        expected = (self.n_tx * self.n_rx, N_PARAMS * self.n_cells)
        if self.entries.shape != expected:
            raise AssemblyError(f"forward matrix shape {self.entries.shape} != {expected}")
        self.entries.flags.writeable = False

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def row_index(self, m: int, n: int) -> int:
        """Row of receive element m, transmit element n (0-indexed)."""
        return n * self.n_rx + m

    def col_index(self, q: int, p: int) -> int:
        """Column of parameter channel q, cell p (0-indexed)."""
        return q * self.n_cells + p

    def channel_block(self, q: int) -> np.ndarray:
        """The (M N, P) block of parameter channel q."""
        return self.entries[:, q * self.n_cells:(q + 1) * self.n_cells]

    def channel_blocks(self) -> np.ndarray:
        """All parameter blocks, shape (5, M N, P)."""
        mn = self.n_tx * self.n_rx
        return self.entries.reshape(mn, N_PARAMS, self.n_cells).transpose(1, 0, 2)


@dataclasses.dataclass(frozen=True)
class SteeringVector:
    """Unit-norm two-way channel response of a point target."""

    values: np.ndarray
    target_position: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        norm = np.linalg.norm(values)
        if abs(norm - 1.0) > 1e-12:
            raise AssemblyError(f"steering vector norm {norm!r} deviates from 1")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        target = np.asarray(self.target_position, dtype=float).copy()
        target.flags.writeable = False
        object.__setattr__(self, "target_position", target)


def assemble_forward(scenario: Scenario, geometry: SceneGeometry) -> ForwardMatrix:
    """Assemble the Born observation operator for one scenario.

    Entry at row (m, n), column (q, p) is the receive kernel times the
    contrast sensitivity psi_q(omega_n) times the transmit kernel times the
    cell volume. The background is homogeneous, so psi_q depends only on
    the channel frequency.
    """
    kernels = born_kernel_tensor(scenario.background, geometry)
    n_tx, n_rx, n_cells = geometry.n_tx, geometry.n_rx, geometry.n_cells
    omegas = 2.0 * np.pi * geometry.frequencies
    psi = sensitivity_components(*scenario.background.as_array(), omegas)  # (5, N)

    entries = np.empty((n_rx * n_tx, N_PARAMS * n_cells), dtype=complex)
    for n in range(n_tx):
        rows = slice(n * n_rx, (n + 1) * n_rx)
        for q in range(N_PARAMS):
            cols = slice(q * n_cells, (q + 1) * n_cells)
            entries[rows, cols] = psi[q, n] * kernels[n]

    if not np.all(np.isfinite(entries)):
        flat = int(np.flatnonzero(~np.isfinite(entries.ravel()))[0])
        row, col = divmod(flat, N_PARAMS * n_cells)
        n, m = divmod(row, n_rx)
        q, p = divmod(col, n_cells)
        raise AssemblyError(f"non-finite forward entry at (m={m}, n={n}, q={q}, p={p})")

    return ForwardMatrix(
        entries=entries,
        n_tx=n_tx,
        n_rx=n_rx,
        n_cells=n_cells,
        scenario_id=scenario.id,
        geometry_fingerprint=geometry.fingerprint(),
    )


def steering_vector(geometry: SceneGeometry, scenario: Scenario, target) -> SteeringVector:
    """Unit-norm steering vector of a point target below the surface."""
    target = np.asarray(target, dtype=float)
    if target.shape != (3,):
        raise ConfigError(f"target must be a 3D point, got shape {target.shape}")
    if target[2] <= 0.0:
        raise ConfigError(f"target depth must be positive, got z={target[2]!r}")
    n_tx, n_rx = geometry.n_tx, geometry.n_rx
    values = np.empty(n_rx * n_tx, dtype=complex)
    point = target[None, :]
    for n in range(n_tx):
        omega = 2.0 * np.pi * geometry.frequencies[n]
        k = background_wavenumber(scenario.background, omega)
        g_rx = _kernel_block(geometry.rx_positions, point, k)[:, 0]
        g_tx = _kernel_block(geometry.tx_positions[n:n + 1], point, k)[0, 0]
        values[n * n_rx:(n + 1) * n_rx] = g_rx * g_tx
    return SteeringVector(values=values / np.linalg.norm(values), target_position=target)


def forward_discrepancy(candidate: ForwardMatrix, reference: ForwardMatrix) -> float:
    """Relative Frobenius discrepancy ||candidate - reference|| / ||reference||.

    The second argument sets the normalization. For a medium change S -> S'
    the convention is forward_discrepancy(A_{S'}, A_S): the discrepancy of
    the destination operator measured against the starting one.
    """
    if candidate.shape != reference.shape:
        raise AssemblyError(
            f"shape mismatch {candidate.shape} vs {reference.shape}"
        )
    return float(
        np.linalg.norm(candidate.entries - reference.entries)
        / np.linalg.norm(reference.entries)
    )
