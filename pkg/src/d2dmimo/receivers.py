"""Partial zero-forcing reception and achievable-rate evaluation.

The receive filter for a target link is the normalized projection of the
target's channel estimate onto the orthogonal complement of the cancelled
interferers' estimates.  Same-pilot D2D estimates at a common receiver are
collinear, so each cancelled pilot group costs exactly one degree of
freedom regardless of its size; cancellation sets therefore track pilot
groups, not individual pairs, on the D2D side.

Two rate evaluations are provided: instantaneous post-filter SINRs from a
concrete channel/estimate draw (Monte Carlo path) and closed-form ergodic
lower bounds from the estimation-quality coefficients (analytic path).
The package-level tests verify that Monte Carlo mean rates dominate the
closed-form bounds.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class FeasibilityError(ValueError):
    """A cancellation budget violates its feasibility window."""


class DegenerateSpanError(RuntimeError):
    """Target estimate lies (numerically) inside the cancelled span."""


@dataclass
class CancellationSets:
    """Which interferers each receiver spends degrees of freedom on.

    bs_cancel_cu[n] lists the CUs cancelled when detecting CU n (b_c of
    them); bs_cancel_groups is the global list of D2D pilot groups
    cancelled at the BS (b_d pilot indices).  rx_cancel_cu[k] and
    rx_cancel_groups[k] are the per-receiver analogues (m_c CUs, m_d
    foreign pilot groups; a receiver never cancels its own group).
    """

    bs_cancel_cu: np.ndarray        # (N, b_c) int
    bs_cancel_groups: np.ndarray    # (b_d,) pilot indices
    rx_cancel_cu: np.ndarray        # (K, m_c) int
    rx_cancel_groups: np.ndarray    # (K, m_d) pilot indices

    def bs_kept_cu(self, n, n_cu):
        """Boolean mask of CUs left uncancelled when detecting CU n (self kept)."""
        kept = np.ones(n_cu, dtype=bool)
        kept[self.bs_cancel_cu[n]] = False
        return kept

    def bs_kept_pairs(self, pa):
        """Boolean mask over pairs whose pilot group survives at the BS."""
        return ~np.isin(pa.pilot_of, self.bs_cancel_groups)

    def rx_kept_cu(self, k, n_cu):
        kept = np.ones(n_cu, dtype=bool)
        kept[self.rx_cancel_cu[k]] = False
        return kept

    def rx_kept_pairs(self, k, pa):
        return ~np.isin(pa.pilot_of, self.rx_cancel_groups[k])


@dataclass
class RateCoeffs:
    """Aggregated coefficients of the closed-form SINR lower bounds.

    varphi_c[a, n] weights CU a's data power in CU n's denominator;
    psi_d[i, k] weights pair i's data power in pair k's denominator.
    sigma_c / sigma_d are the cross-service-plus-noise terms evaluated at
    the power profile passed to rate_coeffs; they can be refreshed for new
    data powers via sigma_c_of / sigma_d_of since varphi_d and
    cu_to_rx_weight capture the structure.
    """

    phi_c: np.ndarray            # (N,)
    varphi_c: np.ndarray         # (N, N)
    varphi_d: np.ndarray         # (K,)
    sigma_c: float
    phi_d: np.ndarray            # (K,)
    psi_d: np.ndarray            # (K, K)
    sigma_d: np.ndarray          # (K,)
    cu_to_rx_weight: np.ndarray  # (N, K)
    noise_power: float


def sigma_c_of(rc, p_s):
    """Cross-service-plus-noise term of the cellular bound for data powers p_s."""
    return float(np.asarray(p_s) @ rc.varphi_d + rc.noise_power)


def sigma_d_of(rc, q_s):
    """Cellular-plus-noise terms of the D2D bounds for data powers q_s."""
    return np.asarray(q_s) @ rc.cu_to_rx_weight + rc.noise_power


def _strongest(values, count, exclude=()):
    """Indices of the `count` largest values, ties broken by lowest index."""
    order = np.argsort(-np.asarray(values, dtype=float), kind="stable")
    order = order[~np.isin(order, exclude)]
    return np.sort(order[:count])


def select_cancellation(ls, pa, config):
    """Pick cancellation targets by largest large-scale gain.

    At the BS each CU cancels the b_c strongest other CUs, plus b_d pilot
    groups ranked by the summed BS gain of their members (shared across
    CUs).  Each D2D-Rx cancels its m_c strongest CUs and the m_d strongest
    foreign pilot groups by summed gain at that receiver.
    """
    n, k = ls.u_c.size, ls.u_d.size
    b_c, b_d = config.pzf_bs
    m_c, m_d = config.pzf_d2d
    tau = config.pilot_len
    if not (0 <= b_c <= n - 1):
        raise FeasibilityError(f"b_c must satisfy 0 <= b_c <= N-1 (got b_c={b_c}, N={n})")
    if not (0 <= b_d <= tau - n):
        raise FeasibilityError(f"b_d must satisfy 0 <= b_d <= tau-N (got b_d={b_d}, tau-N={tau - n})")
    if b_c + b_d > config.bs_antennas - 1:
        raise FeasibilityError(f"b_c+b_d must be <= B-1 (got {b_c + b_d} > {config.bs_antennas - 1})")
    if not (0 <= m_c <= n):
        raise FeasibilityError(f"m_c must satisfy 0 <= m_c <= N (got m_c={m_c}, N={n})")
    if not (0 <= m_d <= tau - n - 1):
        raise FeasibilityError(f"m_d must satisfy 0 <= m_d <= tau-N-1 (got m_d={m_d}, tau-N-1={tau - n - 1})")
    if m_c + m_d > config.d2drx_antennas - 1:
        raise FeasibilityError(f"m_c+m_d must be <= M-1 (got {m_c + m_d} > {config.d2drx_antennas - 1})")

    pilots = pa.d2d_pilots()
    group_gain_bs = np.array([ls.u_d[pa.members(t)].sum() for t in pilots])

    bs_cancel_cu = np.empty((n, b_c), dtype=int)
    for a in range(n):
        bs_cancel_cu[a] = _strongest(ls.u_c, b_c, exclude=[a])
    bs_cancel_groups = pilots[_strongest(group_gain_bs, b_d)]

    rx_cancel_cu = np.empty((k, m_c), dtype=int)
    rx_cancel_groups = np.empty((k, m_d), dtype=int)
    for r in range(k):
        rx_cancel_cu[r] = _strongest(ls.v_c[:, r], m_c)
        own = np.flatnonzero(pilots == pa.pilot_of[r])
        group_gain_rx = np.array([ls.v_d[pa.members(t), r].sum() for t in pilots])
        rx_cancel_groups[r] = pilots[_strongest(group_gain_rx, m_d, exclude=own)]

    return CancellationSets(
        bs_cancel_cu=bs_cancel_cu,
        bs_cancel_groups=bs_cancel_groups,
        rx_cancel_cu=rx_cancel_cu,
        rx_cancel_groups=rx_cancel_groups,
    )


def _project_out(target, cancelled):
    """Unit-norm projection of target onto the complement of span(cancelled)."""
    resid = target.astype(complex)
    cols = [c for c in cancelled if np.linalg.norm(c) > 0.0]
    if cols:
        q, _ = np.linalg.qr(np.column_stack(cols))
        resid = resid - q @ (q.conj().T @ resid)
    norm = np.linalg.norm(resid)
    if norm < 1e-12 * max(1.0, np.linalg.norm(target)):
        raise DegenerateSpanError("target estimate is inside the cancelled span")
    return resid / norm


def _group_representatives(est_matrix, pa, groups):
    """One estimate column per nonempty cancelled pilot group (lowest index)."""
    reps = []
    for t in groups:
        mem = pa.members(t)
        if mem.size:
            reps.append(est_matrix[:, mem[0]])
    return reps


def pzf_filter(est, sets, pa, target):
    """Unit-norm PZF receive filter for `target`.

    target is ("cu", n) for BS-side detection of CU n, or ("d2d", k) for
    detection of pair k at its own receiver.  The filter has exact zeros
    (up to rounding) on every cancelled estimate; cancelled same-pilot
    estimates are zeroed through their shared direction.
    """
    kind, idx = target
    if kind == "cu":
        cancelled = [est.h_c[:, a] for a in sets.bs_cancel_cu[idx]]
        cancelled += _group_representatives(est.h_d, pa, sets.bs_cancel_groups)
        return _project_out(est.h_c[:, idx], cancelled)
    if kind == "d2d":
        cancelled = [est.g_c[idx][:, a] for a in sets.rx_cancel_cu[idx]]
        cancelled += _group_representatives(est.g_d[idx], pa, sets.rx_cancel_groups[idx])
        return _project_out(est.g_d[idx][:, idx], cancelled)
    raise ValueError(f"unknown target kind {kind!r}")


@dataclass
class SinrTerms:
    signal: float
    interf_cell: float
    interf_d2d: float
    error_noise: float

    @property
    def sinr(self):
        return self.signal / (self.interf_cell + self.interf_d2d + self.error_noise)


def cell_sinr_terms(n, est, coeffs, ls, pa, pp, sets, config):
    """Post-filter signal/interference breakdown for cellular link n."""
    beta = pzf_filter(est, sets, pa, ("cu", n))
    proj_c = np.abs(beta.conj() @ est.h_c) ** 2
    proj_d = np.abs(beta.conj() @ est.h_d) ** 2

    kept_cu = sets.bs_kept_cu(n, config.n_cu)
    kept_cu[n] = False
    kept_d = sets.bs_kept_pairs(pa)

    signal = pp.q_s[n] * ls.u_c[n] * proj_c[n]
    i_cc = float(np.sum(pp.q_s[kept_cu] * ls.u_c[kept_cu] * proj_c[kept_cu]))
    i_dc = float(np.sum(pp.p_s[kept_d] * ls.u_d[kept_d] * proj_d[kept_d]))
    alpha = float(np.sum(pp.q_s * ls.u_c * coeffs.eps_c)
                  + np.sum(pp.p_s * ls.u_d * coeffs.eps_d)
                  + config.noise_power)
    return SinrTerms(signal=signal, interf_cell=i_cc, interf_d2d=i_dc, error_noise=alpha)


def d2d_sinr_terms(k, est, coeffs, ls, pa, pp, sets, config):
    """Post-filter breakdown for D2D link k; same-pilot interference stays."""
    beta = pzf_filter(est, sets, pa, ("d2d", k))
    proj_d = np.abs(beta.conj() @ est.g_d[k]) ** 2
    proj_c = np.abs(beta.conj() @ est.g_c[k]) ** 2

    kept_d = sets.rx_kept_pairs(k, pa)
    kept_d[k] = False
    kept_cu = sets.rx_kept_cu(k, config.n_cu)

    signal = pp.p_s[k] * ls.v_d[k, k] * proj_d[k]
    i_dd = float(np.sum(pp.p_s[kept_d] * ls.v_d[kept_d, k] * proj_d[kept_d]))
    i_cd = float(np.sum(pp.q_s[kept_cu] * ls.v_c[kept_cu, k] * proj_c[kept_cu]))
    alpha = float(np.sum(pp.p_s * ls.v_d[:, k] * coeffs.eps_dd[:, k])
                  + np.sum(pp.q_s * ls.v_c[:, k] * coeffs.eps_cd[:, k])
                  + config.noise_power)
    return SinrTerms(signal=signal, interf_cell=i_cd, interf_d2d=i_dd, error_noise=alpha)


def instantaneous_sinr_cell(n, est, coeffs, ls, pa, pp, sets, config):
    return cell_sinr_terms(n, est, coeffs, ls, pa, pp, sets, config).sinr


def instantaneous_sinr_d2d(k, est, coeffs, ls, pa, pp, sets, config):
    return d2d_sinr_terms(k, est, coeffs, ls, pa, pp, sets, config).sinr


def rate_coeffs(ls, pa, coeffs, sets, pp, config):
    """Closed-form lower-bound coefficients for every link.

    Requires strictly positive array-gain factors, i.e. B > b_c+b_d+1 and
    M > m_c+m_d+1.
    """
    n, k = ls.u_c.size, ls.u_d.size
    b_c, b_d = config.pzf_bs
    m_c, m_d = config.pzf_d2d
    dof_bs = config.bs_antennas - b_c - b_d - 1
    dof_rx = config.d2drx_antennas - m_c - m_d - 1
    if dof_bs <= 0:
        raise FeasibilityError(f"need bs_antennas > b_c+b_d+1 (got B={config.bs_antennas}, b_c+b_d={b_c + b_d})")
    if dof_rx <= 0:
        raise FeasibilityError(f"need d2drx_antennas > m_c+m_d+1 (got M={config.d2drx_antennas}, m_c+m_d={m_c + m_d})")

    phi_c = dof_bs * ls.u_c * coeffs.delta_c

    varphi_c = np.empty((n, n))
    for col in range(n):
        w = ls.u_c.copy()
        attenuated = ~sets.bs_kept_cu(col, n)   # cancelled CUs
        attenuated[col] = True                  # self term carries only the error
        w[attenuated] = ls.u_c[attenuated] * coeffs.eps_c[attenuated]
        varphi_c[:, col] = w

    kept_d = sets.bs_kept_pairs(pa)
    varphi_d = np.where(kept_d, ls.u_d, ls.u_d * coeffs.eps_d)
    sigma_c = float(pp.p_s @ varphi_d + config.noise_power)

    phi_d = dof_rx * np.diag(ls.v_d) * np.diag(coeffs.mu_d)

    psi_d = np.empty((k, k))
    for col in range(k):
        v = ls.v_d[:, col]
        w = v.copy()                                       # kept foreign groups
        cancelled = ~sets.rx_kept_pairs(col, pa)
        w[cancelled] = v[cancelled] * coeffs.eps_dd[cancelled, col]
        w[col] = v[col] * coeffs.eps_dd[col, col]          # self error
        same = pa.group_of(col)
        same = same[same != col]
        w[same] = dof_rx * v[same] * coeffs.mu_d[same, col] + v[same] * coeffs.eps_dd[same, col]
        psi_d[:, col] = w

    cu_to_rx = np.empty((n, k))
    for col in range(k):
        kept = sets.rx_kept_cu(col, n)
        cu_to_rx[:, col] = np.where(kept, ls.v_c[:, col], ls.v_c[:, col] * coeffs.eps_cd[:, col])
    sigma_d = pp.q_s @ cu_to_rx + config.noise_power

    return RateCoeffs(
        phi_c=phi_c, varphi_c=varphi_c, varphi_d=varphi_d, sigma_c=sigma_c,
        phi_d=phi_d, psi_d=psi_d, sigma_d=sigma_d,
        cu_to_rx_weight=cu_to_rx, noise_power=config.noise_power,
    )


def bound_sinrs(rc, q_s, p_s):
    """Lower-bound SINRs of all links at the given data powers."""
    q_s = np.asarray(q_s, dtype=float)
    p_s = np.asarray(p_s, dtype=float)
    sigma_c = sigma_c_of(rc, p_s)
    sigma_d = sigma_d_of(rc, q_s)
    eta_c = q_s * rc.phi_c / (q_s @ rc.varphi_c + sigma_c)
    eta_d = p_s * rc.phi_d / (p_s @ rc.psi_d + sigma_d)
    return eta_c, eta_d


def rate_lower_bounds(rc, pp, config):
    """Per-link ergodic rate lower bounds, bits/s/Hz."""
    eta_c, eta_d = bound_sinrs(rc, pp.q_s, pp.p_s)
    prefactor = 1.0 - config.pilot_len / config.coherence_len
    return prefactor * np.log2(1.0 + eta_c), prefactor * np.log2(1.0 + eta_d)
