"""Fast fading, pilot-phase simulation, and MMSE channel estimation.

Two estimation paths are provided and cross-validated by the test suite:
a Monte Carlo path (simulate pilots, apply the linear MMSE estimator) and
an analytic path (closed-form estimation-quality coefficients).  The
analytic coefficients are the source of truth for the optimizers; the
Monte Carlo path exists to validate the rate bounds.

Pilot indexing is 1-based to match the system description: CU n uses
pilot n (n = 1..N), D2D pairs reuse pilots N+1..tau.  The pilot basis is
the tau x tau identity, which is unitary; nothing downstream depends on
the particular choice.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import substream, FADING, NOISE


@dataclass
class PilotAssignment:
    """Map from D2D pair to pilot index.

    pilot_of[k] in {n_cu+1, ..., pilot_len}; pairs sharing a value form a
    pilot group and contaminate each other's estimates.
    """

    pilot_of: np.ndarray
    n_cu: int
    pilot_len: int

    def __post_init__(self):
        self.pilot_of = np.asarray(self.pilot_of, dtype=int)
        if self.pilot_of.ndim != 1:
            raise ValueError("pilot_of must be a 1-D vector")
        lo, hi = self.n_cu + 1, self.pilot_len
        if self.pilot_of.size and (self.pilot_of.min() < lo or self.pilot_of.max() > hi):
            raise ValueError(f"pilot indices must lie in [{lo}, {hi}]")

    @property
    def n_d2d(self):
        return self.pilot_of.size

    def d2d_pilots(self):
        """All pilot indices available to D2D pairs."""
        return np.arange(self.n_cu + 1, self.pilot_len + 1)

    def group_of(self, k):
        """X_k: indices of all pairs sharing pair k's pilot (includes k)."""
        return np.flatnonzero(self.pilot_of == self.pilot_of[k])

    def members(self, pilot):
        return np.flatnonzero(self.pilot_of == pilot)

    def to_matrix(self):
        """Binary reuse-pattern matrix, shape (tau - n_cu, n_d2d)."""
        o = np.zeros((self.pilot_len - self.n_cu, self.n_d2d), dtype=int)
        o[self.pilot_of - self.n_cu - 1, np.arange(self.n_d2d)] = 1
        return o

    def to_json(self):
        return list(int(p) for p in self.pilot_of)


@dataclass
class PowerProfile:
    """Pilot and data transmit powers, milliwatts.

    Pilot powers are energy budgets over the pilot_len symbols, hence the
    tau-scaled caps.
    """

    q_p: np.ndarray   # (N,) CU pilot powers
    p_p: np.ndarray   # (K,) D2D pilot powers
    q_s: np.ndarray   # (N,) CU data powers
    p_s: np.ndarray   # (K,) D2D data powers

    def __post_init__(self):
        for name in ("q_p", "p_p", "q_s", "p_s"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        if np.any(self.q_p < 0) or np.any(self.p_p < 0) or np.any(self.q_s < 0) or np.any(self.p_s < 0):
            raise ValueError("powers must be nonnegative")

    @classmethod
    def max_power(cls, config):
        """Max pilot energy (tau * cap) and max data power on every link."""
        tau = config.pilot_len
        return cls(
            q_p=np.full(config.n_cu, tau * config.max_power_cu),
            p_p=np.full(config.n_d2d, tau * config.max_power_d2d),
            q_s=np.full(config.n_cu, config.max_power_cu),
            p_s=np.full(config.n_d2d, config.max_power_d2d),
        )

    def validate_caps(self, config):
        tau = config.pilot_len
        if np.any(self.q_s > config.max_power_cu * (1 + 1e-12)):
            raise ValueError("q_s exceeds max_power_cu")
        if np.any(self.p_s > config.max_power_d2d * (1 + 1e-12)):
            raise ValueError("p_s exceeds max_power_d2d")
        if np.any(self.q_p > tau * config.max_power_cu * (1 + 1e-12)):
            raise ValueError("q_p exceeds pilot energy budget tau * max_power_cu")
        if np.any(self.p_p > tau * config.max_power_d2d * (1 + 1e-12)):
            raise ValueError("p_p exceeds pilot energy budget tau * max_power_d2d")


@dataclass
class ChannelRealization:
    """One block-fading draw; every entry is standard complex normal.

    g_d[k, :, i] is the fast-fading vector D2D-Tx i -> D2D-Rx k;
    g_c[k, :, n] is CU n -> D2D-Rx k.
    """

    h_c: np.ndarray   # (B, N)
    h_d: np.ndarray   # (B, K)
    g_d: np.ndarray   # (K, M, K)
    g_c: np.ndarray   # (K, M, N)


@dataclass
class EstimatedChannels:
    """MMSE estimates, same layout as ChannelRealization."""

    h_c: np.ndarray
    h_d: np.ndarray
    g_d: np.ndarray
    g_c: np.ndarray


@dataclass
class PilotObservation:
    y_bs: np.ndarray   # (B, tau)
    y_rx: np.ndarray   # (K, M, tau)


@dataclass
class EstimationCoeffs:
    """Estimation-quality coefficients (estimate variance delta/mu, error
    variance eps = 1 - delta).

    mu_d[i, k] refers to the link D2D-Tx i -> D2D-Rx k; its denominator
    sums the received pilot power of pair i's own pilot group at Rx k,
    which is what makes mu the per-entry variance of the estimate.
    """

    delta_c: np.ndarray   # (N,)
    eps_c: np.ndarray
    delta_d: np.ndarray   # (K,)
    eps_d: np.ndarray
    mu_d: np.ndarray      # (K, K)
    eps_dd: np.ndarray
    mu_c: np.ndarray      # (N, K)
    eps_cd: np.ndarray

    def to_json(self):
        return {k: np.asarray(getattr(self, k)).tolist() for k in
                ("delta_c", "eps_c", "delta_d", "eps_d", "mu_d", "eps_dd", "mu_c", "eps_cd")}


def _cn(rng, shape):
    """i.i.d. CN(0, 1) samples."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def draw_fast_fading(config, rng=None):
    if rng is None:
        rng = substream(config.rng_seed, FADING)
    b, n = config.bs_antennas, config.n_cu
    k, m = config.n_d2d, config.d2drx_antennas
    return ChannelRealization(
        h_c=_cn(rng, (b, n)),
        h_d=_cn(rng, (b, k)),
        g_d=_cn(rng, (k, m, k)),
        g_c=_cn(rng, (k, m, n)),
    )


def estimation_coeffs(ls, pa, pp, n0):
    """Closed-form estimate/error variances for every estimated link."""
    for a in (ls.u_c, ls.u_d, ls.v_c, ls.v_d):
        if not np.all(np.isfinite(a)):
            raise ValueError("large-scale gains must be finite")
    n, k = ls.u_c.size, ls.u_d.size

    sc = pp.q_p * ls.u_c
    delta_c = sc / (sc + n0)

    pilots = pa.d2d_pilots()
    # received pilot-group power at the BS, per pilot
    den_bs = {t: float(np.sum(pp.p_p[pa.members(t)] * ls.u_d[pa.members(t)])) + n0 for t in pilots}
    delta_d = np.array([pp.p_p[i] * ls.u_d[i] / den_bs[pa.pilot_of[i]] for i in range(k)])

    # received pilot-group power at each Rx, per pilot: den_rx[t][k]
    mu_d = np.zeros((k, k))
    for t in pilots:
        mem = pa.members(t)
        den = pp.p_p[mem] @ ls.v_d[mem, :] + n0          # (K,) over receivers
        mu_d[mem, :] = (pp.p_p[mem, None] * ls.v_d[mem, :]) / den[None, :]

    scd = pp.q_p[:, None] * ls.v_c
    mu_c = scd / (scd + n0)

    return EstimationCoeffs(
        delta_c=delta_c, eps_c=1.0 - delta_c,
        delta_d=delta_d, eps_d=1.0 - delta_d,
        mu_d=mu_d, eps_dd=1.0 - mu_d,
        mu_c=mu_c, eps_cd=1.0 - mu_c,
    )


def simulate_pilot_phase(real, ls, pa, pp, config, rng=None):
    """Received pilot matrices at the BS and every D2D-Rx.

    Uses the identity pilot basis; noise entries are i.i.d. CN(0, N0).
    """
    if rng is None:
        rng = substream(config.rng_seed, NOISE)
    b, m = config.bs_antennas, config.d2drx_antennas
    n, k, tau = config.n_cu, config.n_d2d, config.pilot_len
    n0 = config.noise_power

    y_bs = np.zeros((b, tau), dtype=complex)
    for a in range(n):
        y_bs[:, a] += np.sqrt(pp.q_p[a] * ls.u_c[a]) * real.h_c[:, a]
    for i in range(k):
        y_bs[:, pa.pilot_of[i] - 1] += np.sqrt(pp.p_p[i] * ls.u_d[i]) * real.h_d[:, i]
    y_bs += np.sqrt(n0) * _cn(rng, (b, tau))

    y_rx = np.zeros((k, m, tau), dtype=complex)
    for r in range(k):
        for a in range(n):
            y_rx[r, :, a] += np.sqrt(pp.q_p[a] * ls.v_c[a, r]) * real.g_c[r, :, a]
        for i in range(k):
            y_rx[r, :, pa.pilot_of[i] - 1] += np.sqrt(pp.p_p[i] * ls.v_d[i, r]) * real.g_d[r, :, i]
    y_rx += np.sqrt(n0) * _cn(rng, (k, m, tau))

    return PilotObservation(y_bs=y_bs, y_rx=y_rx)


def mmse_estimate(obs, ls, pa, pp, config):
    """Linear MMSE estimates of every channel from the pilot observations.

    Estimates of same-pilot D2D channels at the BS are scaled versions of
    one observation column, hence exactly collinear.
    """
    n, k = config.n_cu, config.n_d2d
    n0 = config.noise_power
    pilots = pa.d2d_pilots()

    sc = pp.q_p * ls.u_c
    h_c = (np.sqrt(sc) / (sc + n0))[None, :] * obs.y_bs[:, :n]

    den_bs = {t: float(np.sum(pp.p_p[pa.members(t)] * ls.u_d[pa.members(t)])) + n0 for t in pilots}
    h_d = np.zeros((config.bs_antennas, k), dtype=complex)
    for i in range(k):
        t = pa.pilot_of[i]
        h_d[:, i] = np.sqrt(pp.p_p[i] * ls.u_d[i]) / den_bs[t] * obs.y_bs[:, t - 1]

    g_d = np.zeros((k, config.d2drx_antennas, k), dtype=complex)
    g_c = np.zeros((k, config.d2drx_antennas, n), dtype=complex)
    for r in range(k):
        for t in pilots:
            mem = pa.members(t)
            den = float(np.sum(pp.p_p[mem] * ls.v_d[mem, r])) + n0
            for i in mem:
                g_d[r, :, i] = np.sqrt(pp.p_p[i] * ls.v_d[i, r]) / den * obs.y_rx[r, :, t - 1]
        scd = pp.q_p * ls.v_c[:, r]
        g_c[r] = (np.sqrt(scd) / (scd + n0))[None, :] * obs.y_rx[r, :, :n]

    return EstimatedChannels(h_c=h_c, h_d=h_d, g_d=g_d, g_c=g_c)
