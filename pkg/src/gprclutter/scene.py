"""Scenario registry, array/FDA geometry, and perturbation scaling.

Coordinates are (x, y, z) in meters with z the depth axis: array elements
sit on the surface line z = 0, grid cells strictly below it. The 2.5-D
convention enters only through the strip width, which multiplies the cell
cross-section to give the integration volume per cell.
"""

from __future__ import annotations

import dataclasses
import hashlib

import numpy as np

from .constitutive import ColeColeParams
from .errors import ConfigError

#: Default relative perturbation scale per Cole-Cole parameter channel.
SCALE_RELATIVE_RATE = 0.005

#: Absolute floors for the perturbation scales of eps_inf, delta_eps and
#: sigma; tau always scales relatively, alpha uses a fixed absolute scale
#: (it is dimensionless and drives most of the constitutive curvature).
SCALE_FLOOR_EPS_INF = 0.005
SCALE_FLOOR_DELTA_EPS = 0.005
SCALE_ALPHA = 0.001
SCALE_FLOOR_SIGMA = 5e-7


def default_perturbation_scales(background: ColeColeParams) -> np.ndarray:
    """Diagonal of the standardized perturbation scaling for one background.

    One unit of standardized perturbation in channel q corresponds to a
    physical perturbation of d_q in that parameter. The defaults keep the
    full amplitude scan inside the weak-fluctuation regime for every
    registry scenario (worst 95th-percentile linearization error stays
    well below the 0.05 admissibility threshold).
    """
    return np.array([
        max(SCALE_RELATIVE_RATE * abs(background.eps_inf), SCALE_FLOOR_EPS_INF),
        max(SCALE_RELATIVE_RATE * abs(background.delta_eps), SCALE_FLOOR_DELTA_EPS),
        SCALE_RELATIVE_RATE * background.tau,
        SCALE_ALPHA,
        max(SCALE_RELATIVE_RATE * abs(background.sigma), SCALE_FLOOR_SIGMA),
    ])


@dataclasses.dataclass(frozen=True)
class Scenario:
    """A named background medium plus its perturbation scaling diagonal."""

    id: str
    label: str
    background: ColeColeParams
    d_mu: np.ndarray

    def __post_init__(self):
        d_mu = np.asarray(self.d_mu, dtype=float)
        if d_mu.shape != (5,) or not np.all(d_mu > 0.0):
            raise ConfigError(f"d_mu must be 5 positive scales, got {d_mu!r}")
        d_mu = d_mu.copy()
        d_mu.flags.writeable = False
        object.__setattr__(self, "d_mu", d_mu)
        self.background.validate_background()

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "label": self.label,
            "background": dataclasses.asdict(self.background),
            "d_mu": self.d_mu.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        return cls(
            id=data["id"],
            label=data["label"],
            background=ColeColeParams(**data["background"]),
            d_mu=np.asarray(data["d_mu"], dtype=float),
        )


def _scenario(id_: str, label: str, *values: float) -> Scenario:
    background = ColeColeParams(*values)
    return Scenario(id=id_, label=label, background=background,
                    d_mu=default_perturbation_scales(background))


def scenario_registry() -> dict[str, Scenario]:
    """The six named background scenarios, keyed by id."""
    rows = (
        _scenario("S1", "Lunar regolith", 3.0285, 0.0, 1e-12, 0.0, 1e-5),
        _scenario("S2", "Dry basalt/lava", 9.0, 0.0, 1e-12, 0.0, 1e-5),
        _scenario("S3", "Pure ice", 3.16, 88.34, 2.1e-5, 0.0, 1e-5),
        _scenario("S4", "Moist sandy-loam soil", 21.60, 30.49, 3.60e-8, 0.45, 1.95e-2),
        _scenario("S_syn", "Synthetic reference", 4.0, 2.0, 1.0610e-9, 0.25, 5e-3),
        _scenario("S_balance", "Balanced synthetic case",
                  5.43374, 0.110543, 6.12549e-6, 0.49, 6.89221e-5),
    )
    return {s.id: s for s in rows}


def get_scenario(scenario_id: str) -> Scenario:
    registry = scenario_registry()
    try:
        return registry[scenario_id]
    except KeyError:
        known = ", ".join(registry)
        raise ConfigError(f"unknown scenario {scenario_id!r} (known: {known})") from None


def coerce_float(value, name: str) -> float:
    """Parse a numeric config value; YAML 1.1 reads 1.0e8 as a string."""
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number, got {value!r}") from None


def coerce_int(value, name: str) -> int:
    number = coerce_float(value, name)
    if number != int(number):
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    return int(number)


@dataclasses.dataclass(frozen=True)
class GeometryConfig:
    """Knobs defining the array line, FDA ladder, and image grid."""

    n_tx: int = 8
    n_rx: int = 8
    f0: float = 100e6
    delta_f: float = 20e6
    element_spacing: float = 0.05
    n_x: int = 25
    n_z: int = 21
    dx: float = 0.05
    dz: float = 0.025
    strip_width: float = 1.0

    def __post_init__(self):
        for name in ("n_tx", "n_rx", "n_x", "n_z"):
            object.__setattr__(self, name, coerce_int(getattr(self, name), name))
        for name in ("f0", "delta_f", "element_spacing", "dx", "dz", "strip_width"):
            object.__setattr__(self, name, coerce_float(getattr(self, name), name))
        if self.n_tx < 1 or self.n_rx < 1:
            raise ConfigError("need at least one transmit and one receive element")
        if self.n_x < 1 or self.n_z < 1:
            raise ConfigError("grid dimensions must be positive")
        if min(self.dx, self.dz, self.strip_width, self.element_spacing) <= 0.0:
            raise ConfigError("spacings and strip width must be positive")
        if self.f0 <= 0.0 or self.delta_f < 0.0:
            raise ConfigError("need f0 > 0 and delta_f >= 0")


@dataclasses.dataclass(frozen=True)
class SceneGeometry:
    """Element positions, transmit frequencies, and the discretized grid.

    Row p of ``cell_centers`` is cell (ix, iz) with p = ix * n_z + iz; the
    x axis is the fast outer index. ``cell_volume`` is dx * dz * strip
    width, identical for all cells.
    """

    tx_positions: np.ndarray
    rx_positions: np.ndarray
    frequencies: np.ndarray
    cell_centers: np.ndarray
    cell_volume: float
    grid_dims: tuple[int, int]

    def __post_init__(self):
        for name in ("tx_positions", "rx_positions", "frequencies", "cell_centers"):
            value = np.asarray(getattr(self, name), dtype=float).copy()
            value.flags.writeable = False
            object.__setattr__(self, name, value)
        n_x, n_z = self.grid_dims
        if self.cell_centers.shape != (n_x * n_z, 3):
            raise ConfigError(
                f"cell count {self.cell_centers.shape} inconsistent with grid dims {self.grid_dims}"
            )
        if self.cell_volume <= 0.0:
            raise ConfigError("cell volume must be positive")
        if np.any(self.cell_centers[:, 2] <= 0.0):
            raise ConfigError("all cells must lie strictly below the surface")
        if np.any(self.tx_positions[:, 2] != 0.0) or np.any(self.rx_positions[:, 2] != 0.0):
            raise ConfigError("array elements must lie on the surface line z = 0")
        df = np.diff(self.frequencies)
        if df.size and df.max() > 0 and np.any(df <= 0):
            raise ConfigError("frequencies must be strictly increasing when delta_f > 0")

    @property
    def n_tx(self) -> int:
        return len(self.tx_positions)

    @property
    def n_rx(self) -> int:
        return len(self.rx_positions)

    @property
    def n_cells(self) -> int:
        return len(self.cell_centers)

    @property
    def n_channels(self) -> int:
        return self.n_tx * self.n_rx

    def fingerprint(self) -> str:
        digest = hashlib.sha256()
        for arr in (self.tx_positions, self.rx_positions, self.frequencies, self.cell_centers):
            digest.update(np.ascontiguousarray(arr).tobytes())
        digest.update(np.float64(self.cell_volume).tobytes())
        digest.update(repr(self.grid_dims).encode())
        return digest.hexdigest()[:16]


def build_default_geometry(config: GeometryConfig | None = None) -> SceneGeometry:
    """Construct the surface array and subsurface grid from a config.

    Transmit elements are centered over the grid with the configured
    spacing; receive elements are the same line shifted by half a spacing,
    interleaving the two arrays. Grid cell centers start half a cell below
    the surface.
    """
    cfg = config or GeometryConfig()
    tx_x = (np.arange(cfg.n_tx) - (cfg.n_tx - 1) / 2.0) * cfg.element_spacing
    rx_x = (np.arange(cfg.n_rx) - (cfg.n_rx - 1) / 2.0) * cfg.element_spacing \
        + cfg.element_spacing / 2.0
    tx = np.column_stack([tx_x, np.zeros(cfg.n_tx), np.zeros(cfg.n_tx)])
    rx = np.column_stack([rx_x, np.zeros(cfg.n_rx), np.zeros(cfg.n_rx)])

    frequencies = cfg.f0 + cfg.delta_f * np.arange(cfg.n_tx)

    xs = (np.arange(cfg.n_x) - (cfg.n_x - 1) / 2.0) * cfg.dx
    zs = cfg.dz / 2.0 + np.arange(cfg.n_z) * cfg.dz
    grid_x, grid_z = np.meshgrid(xs, zs, indexing="ij")
    cells = np.column_stack([
        grid_x.ravel(), np.zeros(cfg.n_x * cfg.n_z), grid_z.ravel(),
    ])

    return SceneGeometry(
        tx_positions=tx,
        rx_positions=rx,
        frequencies=frequencies,
        cell_centers=cells,
        cell_volume=cfg.dx * cfg.dz * cfg.strip_width,
        grid_dims=(cfg.n_x, cfg.n_z),
    )
