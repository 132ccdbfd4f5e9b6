"""Pilot scheduling for D2D pairs and pilot power optimization.

The scheduling objective is the total channel-estimation MSE of the D2D
direct links.  Besides the greedy scheduler this module provides the two
brackets used to judge it (exhaustive enumeration below, uniform random
assignment above) and the parametric solver for the pilot-power
subproblem, a sum-of-linear-ratios program whose per-iteration power
update is a bang-bang rule.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .channel import PilotAssignment, PowerProfile, estimation_coeffs
from .scenario import substream


class InstanceTooLargeError(ValueError):
    """Exhaustive enumeration would exceed the search-space guard."""


class NonConvergenceError(RuntimeError):
    def __init__(self, message, residual):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual


def interference_metric(ls):
    """Symmetric pairwise interference strength between D2D pairs.

    chi[i, k] = ln(1 + (v_ik/v_kk)^2 + (v_ki/v_ii)^2), zero diagonal.
    """
    own = np.diag(ls.v_d)
    ratio = ls.v_d / own[None, :]
    chi = np.log1p(ratio ** 2 + ratio.T ** 2)
    np.fill_diagonal(chi, 0.0)
    return chi


def sum_mse(pa, coeffs, m_antennas):
    """Total estimation MSE of the D2D direct links: M * sum_k eps_kk."""
    return float(m_antennas * np.sum(np.diag(coeffs.eps_dd)))


def _direct_link_mse_total(pilot_of, p_p, v_d, n0, m_antennas):
    """sum_mse evaluated directly from an assignment vector (fast path)."""
    k = pilot_of.size
    total = 0.0
    for i in range(k):
        mem = pilot_of == pilot_of[i]
        den = float(p_p[mem] @ v_d[mem, i]) + n0
        total += 1.0 - p_p[i] * v_d[i, i] / den
    return m_antennas * total


def sum_mse_objective(ls, config, p_p=None):
    """Closure mapping a PilotAssignment to its sum MSE at fixed pilot power.

    Defaults to the maximum pilot energy tau * max_power_d2d per pair.
    """
    if p_p is None:
        p_p = np.full(config.n_d2d, config.pilot_len * config.max_power_d2d)
    p_p = np.asarray(p_p, dtype=float)

    def objective(pa):
        return _direct_link_mse_total(pa.pilot_of, p_p, ls.v_d, config.noise_power,
                                      config.d2drx_antennas)

    return objective


def psa(ls, config):
    """Greedy pilot scheduler.

    Pairs are served in decreasing order of total interference involvement;
    each is given the pilot whose current assignees interfere with it
    least (an empty pilot scores zero).  Ties break to the lowest index.
    """
    k = config.n_d2d
    pilots = np.arange(config.n_cu + 1, config.pilot_len + 1)
    chi = interference_metric(ls)
    involvement = chi.sum(axis=0)

    pilot_of = np.zeros(k, dtype=int)
    assigned = np.zeros(k, dtype=bool)
    for _ in range(k):
        cand = np.flatnonzero(~assigned)
        kk = cand[np.argmax(involvement[cand])]   # argmax keeps first (lowest) on ties
        scores = np.array([chi[pilot_of == t, kk].sum() for t in pilots])
        tt = pilots[np.argmin(scores)]
        pilot_of[kk] = tt
        assigned[kk] = True
    return PilotAssignment(pilot_of=pilot_of, n_cu=config.n_cu, pilot_len=config.pilot_len)


def random_assignment(config, rng=None):
    """Uniform i.i.d. pilot choice per pair."""
    if rng is None:
        rng = substream(config.rng_seed, 5)
    pilot_of = rng.integers(config.n_cu + 1, config.pilot_len + 1, size=config.n_d2d)
    return PilotAssignment(pilot_of=pilot_of, n_cu=config.n_cu, pilot_len=config.pilot_len)


def exhaustive_search(ls, config, objective=None, guard=10_000_000):
    """Globally optimal assignment by enumeration; first minimizer in
    lexicographic assignment order wins ties."""
    n_pilots = config.pilot_len - config.n_cu
    k = config.n_d2d
    if n_pilots ** k > guard:
        raise InstanceTooLargeError(
            f"search space (tau-N)^K = {n_pilots}^{k} exceeds the guard {guard}")
    if objective is None:
        objective = sum_mse_objective(ls, config)
    pilots = range(config.n_cu + 1, config.pilot_len + 1)
    best, best_pa = np.inf, None
    for combo in product(pilots, repeat=k):
        pa = PilotAssignment(pilot_of=np.array(combo), n_cu=config.n_cu,
                             pilot_len=config.pilot_len)
        val = objective(pa)
        if val < best:
            best, best_pa = val, pa
    return best_pa


@dataclass
class ParametricPowerResult:
    p_p: np.ndarray          # (K,) pilot powers
    xi: np.ndarray           # converged ratio parameters
    kappa: np.ndarray        # converged scale parameters
    bang_bang_flags: np.ndarray   # True where the pair was driven to zero power
    iterations: int
    residual: float          # max_k |U_k - xi_k V_k| at exit


def pilot_power_parametric(pa, ls, config, max_iter=500):
    """Pilot-power optimizer for a fixed assignment.

    Alternates the parameter update xi_k = U_k/V_k, kappa_k = 1/V_k with
    the bang-bang power update p_k = tau*P_k when
    kappa_k v_kk >= sum_{i in X_k} kappa_i xi_i v_ki, else 0, starting
    from full power.  Stops when both parameter vectors move less than
    tol_power; pairs ending at zero power are flagged so the caller can
    enlarge the pilot set.
    """
    k = config.n_d2d
    v = ls.v_d
    n0 = config.noise_power
    p_max = config.pilot_len * config.max_power_d2d
    tol = config.tol_power

    groups = [pa.group_of(i) for i in range(k)]
    own = np.diag(v)

    def ratios(p):
        u = p * own
        vv = np.array([float(p[groups[i]] @ v[groups[i], i]) + n0 for i in range(k)])
        return u, vv

    p = np.full(k, p_max)
    xi = np.zeros(k)
    kappa = np.zeros(k)
    for it in range(1, max_iter + 1):
        u, vv = ratios(p)
        xi_new, kappa_new = u / vv, 1.0 / vv
        # xi is unitless; kappa is a scale parameter, so measure it relatively
        change = max(float(np.max(np.abs(xi_new - xi))),
                     float(np.max(np.abs(kappa_new - kappa) / kappa_new)))
        xi, kappa = xi_new, kappa_new
        # linear-program step: positive reduced profit -> full power
        gain = np.array([kappa[i] * own[i] - float(kappa[groups[i]] * xi[groups[i]] @ v[i, groups[i]])
                         for i in range(k)])
        p = np.where(gain >= 0.0, p_max, 0.0)
        if it > 1 and change < tol:
            u, vv = ratios(p)
            return ParametricPowerResult(
                p_p=p, xi=xi, kappa=kappa,
                bang_bang_flags=(p == 0.0),
                iterations=it,
                residual=float(np.max(np.abs(u - xi * vv))),
            )
    u, vv = ratios(p)
    raise NonConvergenceError(f"parametric pilot-power solver did not converge in {max_iter} iterations",
                              float(np.max(np.abs(u - xi * vv))))


def scheduling_coeffs(ls, pa, config, p_p=None):
    """Estimation coefficients under a given assignment at max pilot power."""
    if p_p is None:
        pp = PowerProfile.max_power(config)
    else:
        pp = PowerProfile(
            q_p=np.full(config.n_cu, config.pilot_len * config.max_power_cu),
            p_p=p_p,
            q_s=np.full(config.n_cu, config.max_power_cu),
            p_s=np.full(config.n_d2d, config.max_power_d2d),
        )
    return estimation_coeffs(ls, pa, pp, config.noise_power)
