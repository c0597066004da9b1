"""Seedable generation of the simulation scenario: geometry, path loss, Rician fading."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

import numpy as np

from .ris import ArchitectureMask, make_architecture

# Pinned in every provenance record so results replicate across platforms.
RNG_ALGORITHM = "numpy.random.default_rng (PCG64)"


@dataclass
class ScenarioConfig:
    """Geometry, fading, and power parameters of one simulated deployment.

    All users sit at the same RIS distance ``d_iu``; user angles would only
    rotate the line-of-sight phase under a steering-vector model and are
    inert under the rank-one all-ones component used here, so they are not
    drawn.  ``d_bu`` is reserved for a future direct BS-user link and must
    stay None: the direct channel is taken as zero.
    """

    n: int = 4
    k: int = 4
    m: int = 32
    mask_kind: str = "fully"
    group_size: int | None = None
    d_bi: float = 50.0
    d_iu: float = 2.5
    zeta0_db: float = -30.0
    alpha: float = 2.2
    kappa_db: float = 2.0
    sigma2_dbm: float = -80.0
    z0: float = 50.0
    p_t_dbm: float = 30.0
    gamma_db: float | list[float] = 2.0
    seed: int = 0
    d_bu: float | None = None

    def validate(self) -> None:
        if min(self.n, self.k, self.m) < 1:
            raise ValueError("n, k, m must all be at least 1")
        if self.d_bi <= 0 or self.d_iu <= 0:
            raise ValueError("distances must be positive")
        gs = np.atleast_1d(np.asarray(self.gamma_db, dtype=float))
        if gs.size not in (1, self.k):
            raise ValueError(f"gamma_db must be scalar or length k={self.k}")
        if self.mask_kind == "group" and self.group_size is None:
            raise ValueError("group mask requires group_size")
        if self.d_bu is not None:
            raise NotImplementedError("direct BS-user channel is not modeled")

    def gamma_linear(self) -> np.ndarray:
        gs = np.atleast_1d(np.asarray(self.gamma_db, dtype=float))
        if gs.size == 1:
            gs = np.full(self.k, gs[0])
        return 10.0 ** (gs / 10.0)

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ScenarioConfig":
        return cls.from_dict(json.loads(text))

    @classmethod
    def from_dict(cls, doc: dict) -> "ScenarioConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown scenario fields: {sorted(unknown)}")
        return cls(**doc)


@dataclass(frozen=True)
class Scenario:
    """Realized channels and linear-unit parameters for one run."""

    g: np.ndarray       # (M, N) BS -> RIS
    h: np.ndarray       # (M, K) RIS -> users, columns h_k
    p_t: float          # transmit power budget, watts
    sigma2: float       # noise power, watts
    gamma: np.ndarray   # (K,) linear SINR thresholds
    z0: float           # reference impedance, ohms
    mask: ArchitectureMask

    def __post_init__(self):
        for name in ("g", "h", "gamma"):
            arr = np.array(getattr(self, name), copy=True)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"non-finite entries in {name}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.p_t <= 0 or self.sigma2 <= 0:
            raise ValueError("p_t and sigma2 must be positive")
        if np.any(self.gamma <= 0):
            raise ValueError("SINR thresholds must be positive")


def dbm_to_watt(x_dbm: float) -> float:
    return 10.0 ** ((x_dbm - 30.0) / 10.0)


def db_to_linear(x_db) -> np.ndarray:
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def pathloss(d: float, zeta0_db: float, alpha: float) -> float:
    """Distance-dependent linear power gain 10^(zeta0_db/10) * d^-alpha."""
    if d <= 0:
        raise ValueError("distance must be positive")
    return 10.0 ** (zeta0_db / 10.0) * d ** (-alpha)


def gen_rician(rows: int, cols: int, kappa_db: float, seed) -> np.ndarray:
    """Rician-faded matrix with unit average power per entry.

    sqrt(kappa/(1+kappa)) * ones + sqrt(1/(1+kappa)) * H_w with kappa the
    linear Rician factor and H_w i.i.d. circular complex Gaussian of unit
    variance.  ``seed`` may be an int or a ``numpy.random.Generator``; the
    same seed reproduces the matrix bit for bit.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    kappa = 10.0 ** (kappa_db / 10.0)
    nlos = (rng.standard_normal((rows, cols))
            + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2.0)
    return (np.sqrt(kappa / (1.0 + kappa)) * np.ones((rows, cols))
            + np.sqrt(1.0 / (1.0 + kappa)) * nlos)


def build_scenario(cfg: ScenarioConfig) -> Scenario:
    """Draw the channels of a config; identical config gives identical output.

    G picks up the BS-RIS path loss, each user column of H the RIS-user
    path loss (all users share ``d_iu``).
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    g = np.sqrt(pathloss(cfg.d_bi, cfg.zeta0_db, cfg.alpha)) * gen_rician(
        cfg.m, cfg.n, cfg.kappa_db, rng)
    h = np.sqrt(pathloss(cfg.d_iu, cfg.zeta0_db, cfg.alpha)) * gen_rician(
        cfg.m, cfg.k, cfg.kappa_db, rng)
    mask = make_architecture(cfg.mask_kind, cfg.m, cfg.group_size)
    return Scenario(g=g, h=h, p_t=dbm_to_watt(cfg.p_t_dbm),
                    sigma2=dbm_to_watt(cfg.sigma2_dbm),
                    gamma=cfg.gamma_linear(), z0=cfg.z0, mask=mask)


def normalized_copy(scenario: Scenario) -> tuple[Scenario, float, float]:
    """Rescale channels to unit RMS entry without changing the problem.

    Returns (scenario', alpha, beta) with g' = g/alpha, h' = h/beta and
    sigma2' = sigma2/(alpha*beta)^2.  Every SINR, rate, and beamformer power
    is invariant under this substitution (u' = u/beta absorbs the h scaling),
    so solvers can iterate on O(1) data regardless of path-loss magnitudes.
    """
    alpha = float(np.sqrt(np.mean(np.abs(scenario.g) ** 2))) or 1.0
    beta = float(np.sqrt(np.mean(np.abs(scenario.h) ** 2))) or 1.0
    scaled = Scenario(g=scenario.g / alpha, h=scenario.h / beta,
                      p_t=scenario.p_t,
                      sigma2=scenario.sigma2 / (alpha * beta) ** 2,
                      gamma=scenario.gamma, z0=scenario.z0,
                      mask=scenario.mask)
    return scaled, alpha, beta
