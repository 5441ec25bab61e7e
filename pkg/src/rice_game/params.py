"""Model constants, initial conditions and exogenous signal paths.

The geophysical and regional constants form the default 12-region
calibration (5-year periods starting in 2020). Exogenous paths are inputs:
either loaded from the CSV schema documented in the README or produced by
:func:`generate_exogenous`, whose defaults are calibration placeholders.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, SchemaError

REGION_NAMES = ("US", "EU", "JN", "RS", "EUR", "CN", "IN", "ME", "AF", "LA", "OHI", "OA")

# 0-based indices of the developed cluster (US, EU, JN, OHI); the rest are developing.
DEVELOPED = (0, 1, 2, 10)
DEVELOPING = (3, 4, 5, 6, 7, 8, 9, 11)


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GeophysParams:
    phi: np.ndarray
    xi2: float
    zeta: np.ndarray
    xi1: float
    eta: float
    m_at_1750: float

    def __post_init__(self):
        object.__setattr__(self, "phi", _frozen_array(self.phi))
        object.__setattr__(self, "zeta", _frozen_array(self.zeta))
        if self.phi.shape != (2, 2) or self.zeta.shape != (3, 3):
            raise ConfigError("phi must be 2x2 and zeta 3x3")
        for name in ("phi", "zeta"):
            m = getattr(self, name)
            if np.any(m < 0) or np.any(m > 1):
                raise ConfigError(f"{name} entries must lie in [0, 1]")
        colsum = self.zeta.sum(axis=0)
        if np.any(np.abs(colsum - 1.0) > 1e-6):
            raise ConfigError(f"zeta columns must sum to 1 within 1e-6, got {colsum.tolist()}")
        if not (self.eta > 0 and self.xi1 > 0 and self.m_at_1750 > 0):
            raise ConfigError("eta, xi1 and m_at_1750 must be positive")


class RegionRow(NamedTuple):
    name: str
    delta_k: float
    a1: float
    a2: float
    a3: float
    theta2: float
    gamma: float
    pb: float
    delta_pb: float
    alpha: float
    rho: float
    c: float


_REGION_FIELDS = RegionRow._fields[1:]


@dataclass(frozen=True, eq=False)
class RegionParams:
    """Per-region economic constants stored as length-n arrays.

    Index by position or by region name to get a :class:`RegionRow`.
    """

    names: tuple
    delta_k: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    a3: np.ndarray
    theta2: np.ndarray
    gamma: np.ndarray
    pb: np.ndarray
    delta_pb: np.ndarray
    alpha: np.ndarray
    rho: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        n = len(self.names)
        for name in _REGION_FIELDS:
            arr = _frozen_array(getattr(self, name))
            if arr.shape != (n,):
                raise ConfigError(f"region parameter {name} must have {n} entries")
            object.__setattr__(self, name, arr)
        if np.any(self.alpha <= 0) or np.any(self.alpha == 1):
            raise ConfigError("alpha must be positive and different from 1")
        if np.any(self.rho < 0):
            raise ConfigError("rho must be nonnegative")
        if np.any(self.gamma <= 0) or np.any(self.gamma >= 1):
            raise ConfigError("gamma must lie in (0, 1)")
        if np.any(self.theta2 <= 1):
            raise ConfigError("theta2 must exceed 1")
        if np.any(self.delta_k < 0) or np.any(self.delta_k >= 1):
            raise ConfigError("delta_k must lie in [0, 1)")
        if np.any(self.c < 0):
            raise ConfigError("Negishi weights must be nonnegative")

    @property
    def n(self) -> int:
        return len(self.names)

    def index(self, key) -> int:
        if isinstance(key, str):
            try:
                return self.names.index(key)
            except ValueError:
                raise KeyError(key) from None
        return int(key)

    def __getitem__(self, key) -> RegionRow:
        i = self.index(key)
        return RegionRow(self.names[i], *(float(getattr(self, f)[i]) for f in _REGION_FIELDS))

    def subset(self, indices: Sequence[int]) -> "RegionParams":
        idx = list(indices)
        return RegionParams(
            names=tuple(self.names[i] for i in idx),
            **{f: getattr(self, f)[idx] for f in _REGION_FIELDS},
        )

    def with_values(self, **overrides) -> "RegionParams":
        return replace(self, **overrides)


@dataclass(frozen=True)
class HorizonConfig:
    T: int = 120
    delta_years: int = 5
    year0: int = 2020

    def __post_init__(self):
        if self.T < 0:
            raise ConfigError("T must be nonnegative")
        if self.delta_years != 5:
            raise ConfigError("the model is calibrated for 5-year periods")


@dataclass(frozen=True, eq=False)
class InitialState:
    t_at0: float
    t_lo0: float
    m_at0: float
    m_up0: float
    m_lo0: float
    k0: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "k0", _frozen_array(self.k0))
        if min(self.m_at0, self.m_up0, self.m_lo0) <= 0:
            raise ConfigError("initial carbon masses must be positive")
        if np.any(self.k0 <= 0):
            raise ConfigError("initial capital must be positive in every region")


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Everything the dynamics need apart from the exogenous paths.

    ``s_max`` caps the saving rate and ``c_floor`` is the smooth consumption
    floor (trillion USD) that keeps utility finite.
    """

    geophys: GeophysParams
    regions: RegionParams
    horizon: HorizonConfig
    initial: InitialState
    s_max: float = 0.99
    c_floor: float = 1e-6

    def __post_init__(self):
        if self.initial.k0.shape != (self.regions.n,):
            raise ConfigError("initial capital vector does not match the region count")
        if not 0 < self.s_max <= 1:
            raise ConfigError("s_max must lie in (0, 1]")
        if self.c_floor <= 0:
            raise ConfigError("c_floor must be positive")

    def __iter__(self) -> Iterator:
        return iter((self.geophys, self.regions, self.horizon, self.initial))

    @property
    def n(self) -> int:
        return self.regions.n

    @property
    def T(self) -> int:
        return self.horizon.T

    def with_horizon(self, T: int) -> "ModelParams":
        return replace(self, horizon=replace(self.horizon, T=T))

    def subset(self, indices: Sequence[int]) -> "ModelParams":
        idx = list(indices)
        init = replace(self.initial, k0=self.initial.k0[idx])
        return replace(self, regions=self.regions.subset(idx), initial=init)

    def replace(self, **changes) -> "ModelParams":
        return replace(self, **changes)


def default_params(T: int = 120) -> ModelParams:
    """Return the default calibration (horizon overridable)."""
    geophys = GeophysParams(
        phi=[[0.871810629, 0.008844], [0.025, 0.975]],
        xi2=0.1005,
        zeta=[[0.88, 0.196, 0.0], [0.12, 0.797, 0.001465], [0.0, 0.007, 0.99853488]],
        xi1=5 * 0.27272727,
        eta=3.6813,
        m_at_1750=588.0,
    )
    n = len(REGION_NAMES)
    regions = RegionParams(
        names=REGION_NAMES,
        delta_k=[0.1] * n,
        a1=[0, 0, 0, 0, 0, 0.0008, 0.0044, 0.0028, 0.0034, 0.0006, 0, 0.0018],
        a2=[0.0014, 0.0016, 0.0016, 0.0011, 0.0013, 0.0013, 0.0017, 0.0016, 0.0020, 0.0014, 0.0016, 0.0017],
        a3=[2] * n,
        theta2=[2.6] * n,
        gamma=[0.141, 0.159, 0.162, 0.115, 0.130, 0.126, 0.169, 0.159, 0.198, 0.135, 0.156, 0.173],
        pb=[1051, 1635, 1635, 701, 701, 817, 1284, 1167, 1284, 1518, 1284, 1401],
        delta_pb=[0.025] * n,
        alpha=[1.45] * n,
        rho=[0.015] * n,
        c=[0.2010, 0.1030, 0.1300, 0.0300, 0.0080, 0.0040, 0.0020, 0.0156, 0.0013, 0.0157, 0.1187, 0.0031],
    )
    initial = InitialState(
        t_at0=1.15,
        t_lo0=0.05,
        m_at0=979.0,
        m_up0=485.0,
        m_lo0=1741.0,
        k0=[36.59, 37.11, 9.60, 4.96, 2.61, 28.47, 11.94, 14.46, 6.81, 17.49, 11.61, 11.09],
    )
    return ModelParams(geophys, regions, HorizonConfig(T=T), initial)


def year_of(t: int, cfg: HorizonConfig) -> int:
    if not 0 <= t <= cfg.T:
        raise IndexError(f"step {t} outside 0..{cfg.T}")
    return cfg.year0 + cfg.delta_years * t


# --------------------------------------------------------------------------
# exogenous paths
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ExogenousPaths:
    """Exogenous signals; regional arrays have shape (n, n_steps)."""

    L: np.ndarray
    A: np.ndarray
    sigma: np.ndarray
    e_land: np.ndarray
    f_ex: np.ndarray
    names: tuple = REGION_NAMES

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        for name in ("L", "A", "sigma", "e_land"):
            arr = _frozen_array(getattr(self, name))
            if arr.ndim != 2:
                raise SchemaError(f"{name} must be a 2-d (region, t) array")
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "f_ex", _frozen_array(self.f_ex))
        shape = self.L.shape
        if shape[0] != len(self.names):
            raise SchemaError(f"expected {len(self.names)} regions, got {shape[0]}")
        for name in ("A", "sigma", "e_land"):
            if getattr(self, name).shape != shape:
                raise SchemaError(f"{name} shape {getattr(self, name).shape} != L shape {shape}")
        if self.f_ex.shape != (shape[1],):
            raise SchemaError(f"f_ex must have {shape[1]} entries")
        for name in ("L", "A", "sigma"):
            bad = np.argwhere(~(getattr(self, name) > 0))
            if bad.size:
                i, t = bad[0]
                raise SchemaError(f"{name} must be positive (region {self.names[i]}, t={t})")
        bad = np.argwhere(~(self.e_land >= 0))
        if bad.size:
            i, t = bad[0]
            raise SchemaError(f"e_land must be nonnegative (region {self.names[i]}, t={t})")
        if not np.all(np.isfinite(self.f_ex)):
            raise SchemaError("f_ex must be finite")

    @property
    def n(self) -> int:
        return self.L.shape[0]

    @property
    def n_steps(self) -> int:
        return self.L.shape[1]

    def extended(self, n_steps: int) -> "ExogenousPaths":
        """Copy covering ``n_steps`` steps, holding the last values constant."""
        if n_steps <= self.n_steps:
            return self
        pad = n_steps - self.n_steps

        def ext(a):
            return np.concatenate([a, np.repeat(a[..., -1:], pad, axis=-1)], axis=-1)

        return ExogenousPaths(ext(self.L), ext(self.A), ext(self.sigma), ext(self.e_land),
                              ext(self.f_ex), self.names)

    def subset(self, indices: Sequence[int]) -> "ExogenousPaths":
        idx = list(indices)
        return ExogenousPaths(self.L[idx], self.A[idx], self.sigma[idx], self.e_land[idx],
                              self.f_ex, tuple(self.names[i] for i in idx))

    def truncated(self, n_steps: int) -> "ExogenousPaths":
        return ExogenousPaths(self.L[:, :n_steps], self.A[:, :n_steps], self.sigma[:, :n_steps],
                              self.e_land[:, :n_steps], self.f_ex[:n_steps], self.names)

    def replace(self, **changes) -> "ExogenousPaths":
        return replace(self, **changes)


@dataclass(frozen=True)
class GeneratorConfig:
    """Parametric exogenous-path recursions (placeholder calibration).

    Population moves toward ``l_asym`` by ``L' = L (l_asym / L)^pop_adj``;
    productivity grows by ``A' = A / (1 - ga)`` with ``ga`` decaying at
    ``delta_a`` per year; carbon intensity follows
    ``sigma' = sigma exp(5 g_sigma)`` with ``g_sigma`` compounding at
    ``delta_sigma`` per year; land emissions shrink by ``land_decline`` per
    period; non-CO2 forcing ramps linearly from ``f_ex0`` to ``f_ex1`` over
    ``f_ex_periods`` periods and then stays flat.
    """

    names: tuple = REGION_NAMES
    l0: tuple = (331, 510, 126, 146, 150, 1410, 1380, 420, 1340, 650, 180, 1100)
    l_asym: tuple = (400, 480, 100, 120, 160, 1200, 1700, 700, 3800, 750, 200, 1500)
    pop_adj: float = 0.134
    a0: tuple = (32.678, 21.818, 20.847, 18.722, 13.796, 11.656, 4.529, 10.173, 3.516, 9.864, 20.302, 7.314)
    ga0: tuple = (0.05, 0.05, 0.05, 0.07, 0.07, 0.09, 0.10, 0.07, 0.09, 0.07, 0.05, 0.09)
    delta_a: float = 0.005
    sigma0: tuple = (0.24, 0.165, 0.2, 0.42, 0.3, 0.46, 0.28, 0.36, 0.23, 0.17, 0.27, 0.21)
    g_sigma0: float = -0.0152
    delta_sigma: float = -0.001
    e_land0: tuple = (0.1, 0.1, 0.0, 0.1, 0.1, 0.3, 0.2, 0.1, 0.9, 1.0, 0.1, 0.6)
    land_decline: float = 0.115
    f_ex0: float = 0.5
    f_ex1: float = 1.0
    f_ex_periods: int = 17

    def __post_init__(self):
        n = len(self.names)
        for name in ("l0", "l_asym", "a0", "ga0", "sigma0", "e_land0"):
            value = tuple(float(v) for v in getattr(self, name))
            if len(value) != n:
                raise ConfigError(f"generator field {name} must have {n} entries")
            object.__setattr__(self, name, value)
        object.__setattr__(self, "names", tuple(self.names))
        for name in ("l0", "l_asym", "a0", "sigma0"):
            if min(getattr(self, name)) <= 0:
                raise ConfigError(f"generator field {name} must be positive")
        if min(self.e_land0) < 0:
            raise ConfigError("e_land0 must be nonnegative")
        if not all(0 <= g < 1 for g in self.ga0):
            raise ConfigError("ga0 must lie in [0, 1)")
        if not 0 <= self.land_decline < 1:
            raise ConfigError("land_decline must lie in [0, 1)")
        if self.f_ex_periods < 1:
            raise ConfigError("f_ex_periods must be at least 1")


def generate_exogenous(gen: GeneratorConfig, cfg: HorizonConfig) -> ExogenousPaths:
    n, steps = len(gen.names), cfg.T + 1
    dy = cfg.delta_years
    L = np.empty((n, steps))
    A = np.empty((n, steps))
    sigma = np.empty((n, steps))
    L[:, 0] = gen.l0
    A[:, 0] = gen.a0
    sigma[:, 0] = gen.sigma0
    l_asym = np.array(gen.l_asym)
    ga0 = np.array(gen.ga0)
    g_sigma = gen.g_sigma0
    for t in range(steps - 1):
        L[:, t + 1] = L[:, t] * (l_asym / L[:, t]) ** gen.pop_adj
        ga = ga0 * math.exp(-gen.delta_a * dy * t)
        A[:, t + 1] = A[:, t] / (1.0 - ga)
        sigma[:, t + 1] = sigma[:, t] * math.exp(g_sigma * dy)
        g_sigma *= (1.0 + gen.delta_sigma) ** dy
    ts = np.arange(steps)
    e_land = np.outer(gen.e_land0, (1.0 - gen.land_decline) ** ts)
    ramp = np.minimum(ts, gen.f_ex_periods) / gen.f_ex_periods
    f_ex = gen.f_ex0 + (gen.f_ex1 - gen.f_ex0) * ramp
    return ExogenousPaths(L, A, sigma, e_land, f_ex, gen.names)


# --------------------------------------------------------------------------
# CSV schema
# --------------------------------------------------------------------------

REGIONAL_HEADER = ["t", "region", "L", "A", "sigma", "e_land"]
FORCING_HEADER = ["t", "f_ex"]


def forcing_path_for(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + "_forcing" + path.suffix)


def write_exogenous(exo: ExogenousPaths, path, forcing_path=None) -> tuple:
    path = Path(path)
    forcing_path = Path(forcing_path) if forcing_path else forcing_path_for(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REGIONAL_HEADER)
        for t in range(exo.n_steps):
            for i, name in enumerate(exo.names):
                w.writerow([t, name, repr(float(exo.L[i, t])), repr(float(exo.A[i, t])),
                            repr(float(exo.sigma[i, t])), repr(float(exo.e_land[i, t]))])
    with open(forcing_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FORCING_HEADER)
        for t in range(exo.n_steps):
            w.writerow([t, repr(float(exo.f_ex[t]))])
    return path, forcing_path


def _read_rows(path: Path, header: list) -> list:
    if not path.exists():
        raise SchemaError(f"{path}: file not found")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            got = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        got = [h.strip() for h in got]
        missing = [h for h in header if h not in got]
        if missing:
            raise SchemaError(f"{path}: missing columns {missing}")
        cols = [got.index(h) for h in header]
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append((lineno, [row[c].strip() for c in cols]))
            except IndexError:
                raise SchemaError(f"{path}:{lineno}: too few fields") from None
    return rows


def _parse_float(path, lineno, column, text) -> float:
    try:
        return float(text)
    except ValueError:
        raise SchemaError(f"{path}:{lineno}: column {column}: not a number: {text!r}") from None


def load_exogenous(path, cfg: HorizonConfig, names: Sequence[str] = REGION_NAMES,
                   forcing_path=None) -> ExogenousPaths:
    """Read the two-file CSV schema and validate it against ``cfg`` and ``names``."""
    path = Path(path)
    forcing_path = Path(forcing_path) if forcing_path else forcing_path_for(path)
    names = tuple(names)
    steps = cfg.T + 1
    rows = _read_rows(path, REGIONAL_HEADER)

    seen_regions = []
    for _, row in rows:
        if row[1] not in seen_regions:
            seen_regions.append(row[1])
    unknown = [r for r in seen_regions if r not in names]
    if unknown or len(seen_regions) != len(names):
        raise SchemaError(f"{path}: expected regions {list(names)}, found {seen_regions}")

    data = np.full((4, len(names), steps), np.nan)
    for lineno, row in rows:
        try:
            t = int(row[0])
        except ValueError:
            raise SchemaError(f"{path}:{lineno}: column t: not an integer: {row[0]!r}") from None
        if not 0 <= t < steps:
            raise SchemaError(f"{path}:{lineno}: column t: {t} outside 0..{steps - 1}")
        i = names.index(row[1])
        for k, col in enumerate(REGIONAL_HEADER[2:]):
            value = _parse_float(path, lineno, col, row[2 + k])
            if col in ("L", "A", "sigma") and not value > 0:
                raise SchemaError(f"{path}:{lineno}: column {col}: must be positive, got {value}")
            if col == "e_land" and not value >= 0:
                raise SchemaError(f"{path}:{lineno}: column {col}: must be nonnegative, got {value}")
            data[k, i, t] = value
    holes = np.argwhere(np.isnan(data[0]))
    if holes.size:
        i, t = holes[0]
        raise SchemaError(f"{path}: length mismatch, no row for region {names[i]} at t={t} "
                          f"(need t=0..{steps - 1})")

    f_ex = np.full(steps, np.nan)
    for lineno, row in _read_rows(forcing_path, FORCING_HEADER):
        try:
            t = int(row[0])
        except ValueError:
            raise SchemaError(f"{forcing_path}:{lineno}: column t: not an integer") from None
        if not 0 <= t < steps:
            raise SchemaError(f"{forcing_path}:{lineno}: column t: {t} outside 0..{steps - 1}")
        f_ex[t] = _parse_float(forcing_path, lineno, "f_ex", row[1])
    if np.any(np.isnan(f_ex)):
        t = int(np.argmax(np.isnan(f_ex)))
        raise SchemaError(f"{forcing_path}: length mismatch, no f_ex row for t={t}")
    return ExogenousPaths(data[0], data[1], data[2], data[3], f_ex, names)


# --------------------------------------------------------------------------
# config file (YAML)
# --------------------------------------------------------------------------


def params_to_dict(params: ModelParams, gen: GeneratorConfig | None = None) -> dict:
    g, r, h, x0 = params
    out = {
        "horizon": {"T": h.T, "delta_years": h.delta_years, "year0": h.year0},
        "geophys": {
            "phi": g.phi.tolist(), "xi2": g.xi2, "zeta": g.zeta.tolist(),
            "xi1": g.xi1, "eta": g.eta, "m_at_1750": g.m_at_1750,
        },
        "regions": {"names": list(r.names), **{f: getattr(r, f).tolist() for f in _REGION_FIELDS}},
        "initial": {
            "t_at0": x0.t_at0, "t_lo0": x0.t_lo0, "m_at0": x0.m_at0,
            "m_up0": x0.m_up0, "m_lo0": x0.m_lo0, "k0": x0.k0.tolist(),
        },
        "numerics": {"s_max": params.s_max, "c_floor": params.c_floor},
    }
    if gen is not None:
        out["generator"] = {f.name: (list(getattr(gen, f.name))
                                     if isinstance(getattr(gen, f.name), tuple)
                                     else getattr(gen, f.name))
                            for f in fields(gen)}
    return out


def params_from_dict(d: dict) -> tuple:
    """Build ``(ModelParams, GeneratorConfig)`` from a config mapping.

    Missing sections or keys fall back to the defaults.
    """
    if not isinstance(d, dict):
        raise ConfigError("config root must be a mapping")
    base = default_params()
    known = {"horizon", "geophys", "regions", "initial", "numerics", "generator"}
    extra = set(d) - known
    if extra:
        raise ConfigError(f"unknown config sections: {sorted(extra)}")

    def merged(section, obj):
        values = d.get(section) or {}
        if not isinstance(values, dict):
            raise ConfigError(f"config section {section!r} must be a mapping")
        allowed = {f.name for f in fields(obj)}
        bad = set(values) - allowed
        if bad:
            raise ConfigError(f"unknown keys in {section!r}: {sorted(bad)}")
        try:
            return replace(obj, **values)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{section}: {exc}") from exc

    try:
        horizon = merged("horizon", base.horizon)
        geophys = merged("geophys", base.geophys)
        regions = merged("regions", base.regions)
        initial = merged("initial", base.initial)
        gen = merged("generator", GeneratorConfig())
        numerics = d.get("numerics") or {}
        bad = set(numerics) - {"s_max", "c_floor"}
        if bad:
            raise ConfigError(f"unknown keys in 'numerics': {sorted(bad)}")
        params = ModelParams(geophys, regions, horizon, initial, **numerics)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return params, gen


def load_config(path) -> tuple:
    import yaml

    if path in (None, "default"):
        return default_params(), GeneratorConfig()
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"{path}: config file not found")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return params_from_dict(data)


def dump_config(params: ModelParams, gen: GeneratorConfig | None = None) -> str:
    import yaml

    return yaml.safe_dump(params_to_dict(params, gen), sort_keys=False)
