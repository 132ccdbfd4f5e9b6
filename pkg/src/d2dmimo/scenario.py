"""Scenario generation: cell geometry and large-scale link gains.

Conventions used throughout the package:
  * all powers are linear milliwatts (helpers below convert from dBm),
  * all distances are meters,
  * large-scale gains are unitless linear power gains,
  * randomness is derived from one root seed via purpose-keyed substreams
    so each stage (topology, shadowing, fading, noise) can be re-run
    independently and deterministically.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, asdict, field, replace

import numpy as np

# substream purposes
TOPOLOGY, SHADOWING, FADING, NOISE, TRIAL = 0, 1, 2, 3, 4


def db_to_lin(db):
    """dB -> linear ratio."""
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def dbm_to_mw(dbm):
    """dBm -> milliwatts."""
    return 10.0 ** (np.asarray(dbm, dtype=float) / 10.0)


def mw_to_dbm(mw):
    return 10.0 * np.log10(np.asarray(mw, dtype=float))


def substream(seed, *key):
    """Independent generator keyed by (seed, purpose, ...)."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key)))


def trial_seed(root_seed, trial):
    """64-bit child seed for one Monte Carlo trial, independent of sweep value."""
    ss = np.random.SeedSequence(root_seed, spawn_key=(TRIAL, int(trial)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass
class SystemConfig:
    """All scalar system parameters.

    Defaults give the desk-scale working point: a 1000 m square cell,
    5 cellular users, 20 D2D pairs, 128 BS antennas, 8 D2D-Rx antennas,
    17 dBm power caps, -100 dBm noise, and a 5 dB cellular SINR target.
    """

    n_cu: int = 5                 # N, cellular users
    n_d2d: int = 20               # K, D2D pairs
    bs_antennas: int = 128        # B
    d2drx_antennas: int = 8       # M
    pilot_len: int = 10           # tau, symbols == number of pilots
    coherence_len: int = 50       # T, symbols per fading block
    noise_power: float = 1e-10    # N0 mW (-100 dBm)
    max_power_cu: float = dbm_to_mw(17.0).item()   # Q_n mW
    max_power_d2d: float = dbm_to_mw(17.0).item()  # P_k mW
    sinr_target: float = db_to_lin(5.0).item()     # gamma_n, linear
    pzf_bs: tuple = (4, 5)        # (b_c, b_d) cancelled at BS
    pzf_d2d: tuple = (1, 2)       # (m_c, m_d) cancelled at each D2D-Rx
    cell_side: float = 1000.0     # m
    d2d_max_dist: float = 100.0   # D_max m
    pathloss_exp: float = 3.7
    shadow_sigma_db: float = 8.0
    min_dist: float = 1.0         # m, clamp against the d->0 singularity
    tol_power: float = 1e-3       # rho
    tol_wmmse: float = 1e-3       # rho_1
    rng_seed: int = 12345

    def __post_init__(self):
        self.pzf_bs = tuple(int(x) for x in self.pzf_bs)
        self.pzf_d2d = tuple(int(x) for x in self.pzf_d2d)
        self.validate()

    def validate(self):
        n, k, b, m = self.n_cu, self.n_d2d, self.bs_antennas, self.d2drx_antennas
        tau, t = self.pilot_len, self.coherence_len
        if min(n, k, b, m) < 1:
            raise ValueError("n_cu, n_d2d, bs_antennas, d2drx_antennas must all be >= 1")
        if t < tau:
            raise ValueError(f"coherence_len must be >= pilot_len (got T={t} < tau={tau})")
        if not (n < tau <= n + k):
            raise ValueError(f"pilot_len must satisfy n_cu < pilot_len <= n_cu + n_d2d (got tau={tau}, N={n}, K={k})")
        bc, bd = self.pzf_bs
        if bc < 0 or bc > n - 1:
            raise ValueError(f"pzf_bs[0] must satisfy 0 <= b_c <= N-1 (got b_c={bc}, N={n})")
        if bd < 0 or bd > tau - n:
            raise ValueError(f"pzf_bs[1] must satisfy 0 <= b_d <= tau-N (got b_d={bd}, tau-N={tau - n})")
        if bc + bd > b - 1:
            raise ValueError(f"pzf_bs must satisfy b_c+b_d <= B-1 (got {bc}+{bd} > {b - 1})")
        mc, md = self.pzf_d2d
        if mc < 0 or mc > n:
            raise ValueError(f"pzf_d2d[0] must satisfy 0 <= m_c <= N (got m_c={mc}, N={n})")
        if md < 0 or md > tau - n - 1:
            raise ValueError(f"pzf_d2d[1] must satisfy 0 <= m_d <= tau-N-1 (got m_d={md}, tau-N-1={tau - n - 1})")
        if mc + md > m - 1:
            raise ValueError(f"pzf_d2d must satisfy m_c+m_d <= M-1 (got {mc}+{md} > {m - 1})")
        for name in ("noise_power", "max_power_cu", "max_power_d2d", "sinr_target",
                     "cell_side", "d2d_max_dist", "min_dist"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.tol_power <= 0 or self.tol_wmmse <= 0:
            raise ValueError("tol_power and tol_wmmse must be strictly positive")

    def to_dict(self):
        d = asdict(self)
        d["pzf_bs"] = list(self.pzf_bs)
        d["pzf_d2d"] = list(self.pzf_d2d)
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config fields: {sorted(extra)}")
        return cls(**d)


@dataclass
class Topology:
    """Positions in meters inside the cell square."""

    bs_pos: np.ndarray       # (2,)
    cu_pos: np.ndarray       # (N, 2)
    d2d_tx_pos: np.ndarray   # (K, 2)
    d2d_rx_pos: np.ndarray   # (K, 2)

    def to_dict(self):
        return {k: np.asarray(v).tolist() for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: np.asarray(v, dtype=float) for k, v in d.items()})


@dataclass
class LargeScale:
    """Large-scale link gains (path loss x shadowing), linear power units.

    v_c[n, k] is the gain CU n -> D2D-Rx k; v_d[i, k] is D2D-Tx i -> D2D-Rx k,
    so the diagonal of v_d holds each pair's own link.
    """

    u_c: np.ndarray   # (N,)  CU -> BS
    u_d: np.ndarray   # (K,)  D2D-Tx -> BS
    v_c: np.ndarray   # (N, K)
    v_d: np.ndarray   # (K, K)

    def __post_init__(self):
        for name in ("u_c", "u_d", "v_c", "v_d"):
            a = getattr(self, name)
            if not np.all(np.isfinite(a)) or np.any(a <= 0):
                raise ValueError(f"{name} entries must be strictly positive and finite")

    def to_dict(self):
        return {k: np.asarray(v).tolist() for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: np.asarray(v, dtype=float) for k, v in d.items()})


def generate_topology(config, rng=None):
    """Drop the BS at the cell center, users uniformly in the square.

    Each D2D-Rx is placed at uniform distance in [min_dist, d2d_max_dist]
    and uniform angle from its Tx; placements falling outside the square
    are rejected and redrawn (fresh distance and angle each attempt).
    """
    if rng is None:
        rng = substream(config.rng_seed, TOPOLOGY)
    side = config.cell_side
    bs = np.array([side / 2.0, side / 2.0])
    cu = rng.uniform(0.0, side, size=(config.n_cu, 2))
    tx = rng.uniform(0.0, side, size=(config.n_d2d, 2))
    rx = np.empty_like(tx)
    for k in range(config.n_d2d):
        for _ in range(10000):
            d = rng.uniform(config.min_dist, config.d2d_max_dist)
            ang = rng.uniform(0.0, 2.0 * np.pi)
            cand = tx[k] + d * np.array([np.cos(ang), np.sin(ang)])
            if 0.0 <= cand[0] <= side and 0.0 <= cand[1] <= side:
                rx[k] = cand
                break
        else:
            raise RuntimeError(f"could not place D2D-Rx {k} inside the cell after 10000 draws")
    return Topology(bs_pos=bs, cu_pos=cu, d2d_tx_pos=tx, d2d_rx_pos=rx)


def _gain(dist, config, rng):
    d = np.maximum(dist, config.min_dist)
    shadow_db = rng.normal(0.0, config.shadow_sigma_db, size=np.shape(d))
    return d ** (-config.pathloss_exp) * 10.0 ** (shadow_db / 10.0)


def compute_large_scale(topology, config, rng=None):
    """Path-loss/shadowing gains for every link; shadowing i.i.d. per link."""
    if rng is None:
        rng = substream(config.rng_seed, SHADOWING)
    d_cu_bs = np.linalg.norm(topology.cu_pos - topology.bs_pos, axis=1)
    d_tx_bs = np.linalg.norm(topology.d2d_tx_pos - topology.bs_pos, axis=1)
    # (N, K): CU n to Rx k; (K, K): Tx i to Rx k
    d_cu_rx = np.linalg.norm(topology.cu_pos[:, None, :] - topology.d2d_rx_pos[None, :, :], axis=2)
    d_tx_rx = np.linalg.norm(topology.d2d_tx_pos[:, None, :] - topology.d2d_rx_pos[None, :, :], axis=2)
    return LargeScale(
        u_c=_gain(d_cu_bs, config, rng),
        u_d=_gain(d_tx_bs, config, rng),
        v_c=_gain(d_cu_rx, config, rng),
        v_d=_gain(d_tx_rx, config, rng),
    )


def pair_distances(topology):
    return np.linalg.norm(topology.d2d_tx_pos - topology.d2d_rx_pos, axis=1)


def save_scenario(path, config, topology=None, large_scale=None):
    """Write a scenario (config plus optional realization) as one JSON document."""
    doc = {"config": config.to_dict()}
    if topology is not None:
        doc["topology"] = topology.to_dict()
    if large_scale is not None:
        doc["large_scale"] = large_scale.to_dict()
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)


def load_scenario(path):
    with open(path) as fh:
        doc = json.load(fh)
    config = SystemConfig.from_dict(doc["config"])
    topology = Topology.from_dict(doc["topology"]) if "topology" in doc else None
    large_scale = LargeScale.from_dict(doc["large_scale"]) if "large_scale" in doc else None
    return config, topology, large_scale
