"""ADMM solver for transmit-power minimization under per-user SINR targets.

The QoS constraints are decoupled from the beamformer through the auxiliary
matrix Y = U^H G W: after rotating each beamformer column so the diagonal of
Y is real, each SINR target becomes the second-order-cone condition
Y_kk >= sqrt(Gamma_k (sum_{j != k} |Y_kj|^2 + sigma2)), a set with a cheap
row-wise Euclidean projection.  The scattering constraint enters as the same
bilinear equation as in the rate solver.  One sweep updates Y (projection),
W and U (Hermitian positive definite solves), B (shared masked least-squares
step with a proximal term), and the two multipliers.
"""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve as lin_solve

from .channel import Scenario, normalized_copy
from .report import RunReport, check_finite
from .ris import (b_to_theta, conforms_to_mask, sinr_and_rate,
                  solve_b_subproblem)
from .sumrate import _start_candidates, bilinear_residual


@dataclass
class PowerMinParams:
    """Penalties, proximal weight, stopping rules, and the QoS certificate slack.

    Convergence theory wants the bilinear penalty to dominate the coupling
    penalty, so ``rho_lambda >= rho_mu`` is enforced.  Defaults are tuned
    configuration, not literature values.
    """

    rho_lambda: float = 10.0
    rho_mu: float = 1.0
    xi: float = 1e-2
    max_iters: int = 5000
    tol_residual: float = 1e-5
    tol_change: float = 1e-5
    tol_qos: float = 1e-4
    diagnostics: bool = False
    n_starts: int = 1
    explore_iters: int = 300
    start_seed: int = 0

    def validate(self) -> None:
        if min(self.rho_lambda, self.rho_mu, self.xi) <= 0:
            raise ValueError("penalties and xi must be positive")
        if self.rho_lambda < self.rho_mu:
            raise ValueError("rho_lambda must be at least rho_mu")
        if min(self.tol_residual, self.tol_change, self.tol_qos) <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.n_starts < 1 or self.explore_iters < 1:
            raise ValueError("n_starts and explore_iters must be at least 1")


@dataclass
class PowerMinState:
    """Primal blocks, the two multipliers, and the current weights."""

    y: np.ndarray        # (K, K) complex, rows constrained to the QoS cone
    w: np.ndarray        # (N, K) complex beamformer
    b: np.ndarray        # (M, M) real symmetric masked susceptance
    u: np.ndarray        # (M, K) complex effective channels
    lam: np.ndarray      # (M, K) multiplier of the bilinear constraint
    mu: np.ndarray       # (K, K) multiplier of Y = U^H G W
    rho_lambda: float
    rho_mu: float
    xi: float


def _project_qos_magnitudes(a: np.ndarray, k: int, gamma: float,
                            sigma2: float) -> tuple[np.ndarray, float]:
    """Projection of the magnitude vector onto the squared QoS cone slice.

    Minimizes sum_j (r_j - a_j)^2 subject to
    r_k^2 >= gamma (sum_{j != k} r_j^2 + sigma2), r_k >= 0.  The KKT
    multiplier eta of the cone constraint falls in one of four regimes:
    0 when the input already satisfies the constraint, exactly 1 when
    a_k = 0, in (0, 1) when 0 < a_k < threshold, and in (1, inf) when
    a_k < 0.  In the root-finding regimes eta is the unique bracketed zero of

        gamma*S/(1 + gamma*eta)^2 - a_k^2/(1 - eta)^2 + gamma*sigma2,

    with S the off-diagonal energy; the magnitudes follow as
    r_k = a_k/(1 - eta) and r_j = a_j/(1 + gamma*eta).  Returns (r, eta).
    """
    a = np.asarray(a, dtype=float)
    akk = a[k]
    off = np.ones(a.size, dtype=bool)
    off[k] = False
    s_off = float((a[off] ** 2).sum())
    scale = akk ** 2 + gamma * (s_off + sigma2)

    if akk >= np.sqrt(gamma * (s_off + sigma2)):
        return a.copy(), 0.0
    # Underflow guard: a diagonal this tiny behaves exactly like zero.
    if akk != 0.0 and akk ** 2 < 1e-300 * max(scale, 1.0):
        akk = 0.0
    if akk == 0.0:
        r = a / (1.0 + gamma)
        r[k] = np.sqrt(gamma * s_off / (1.0 + gamma) ** 2 + gamma * sigma2)
        return r, 1.0

    def phi(eta):
        return (gamma * s_off / (1.0 + gamma * eta) ** 2
                - akk ** 2 / (1.0 - eta) ** 2 + gamma * sigma2)

    if akk > 0:
        lo, flo = 0.0, phi(0.0)          # > 0 since akk < threshold
        hi = 1.0 - 2.0 ** -8
        while phi(hi) > 0:
            hi = 1.0 - (1.0 - hi) / 16.0
    else:
        lo = 1.0 + 2.0 ** -8
        while phi(lo) > 0:
            lo = 1.0 + (lo - 1.0) / 16.0
        flo = phi(lo)                    # < 0 near 1+, rises to gamma*sigma2
        hi = 2.0
        while phi(hi) <= 0:
            hi *= 2.0

    eta = 0.5 * (lo + hi)
    for _ in range(200):
        eta = 0.5 * (lo + hi)
        val = phi(eta)
        if abs(val) <= 1e-14 * max(scale, 1.0) or hi - lo <= 1e-15 * (1.0 + eta):
            break
        if (val > 0) == (flo > 0):
            lo = eta
        else:
            hi = eta
    r = a / (1.0 + gamma * eta)
    r[k] = akk / (1.0 - eta)
    return r, eta


def project_qos_row(row: np.ndarray, k: int, gamma_k: float,
                    sigma2: float) -> np.ndarray:
    """Euclidean projection of row k of Y onto its QoS cone.

    Off-diagonal phases are preserved (the constraint sees only magnitudes);
    the diagonal entry is projected through its real part and returned real.
    """
    if gamma_k <= 0 or sigma2 <= 0:
        raise ValueError("gamma_k and sigma2 must be positive")
    row = np.asarray(row, dtype=complex)
    a = np.abs(row)
    a[k] = row[k].real
    r, _ = _project_qos_magnitudes(a, k, gamma_k, sigma2)
    out = r * np.exp(1j * np.angle(row))
    out[k] = r[k]
    return out


def project_qos(mat: np.ndarray, gamma: np.ndarray, sigma2: float) -> np.ndarray:
    """Row-wise QoS projection of a K x K coupling matrix."""
    out = np.empty_like(np.asarray(mat, dtype=complex))
    for k in range(out.shape[0]):
        out[k] = project_qos_row(mat[k], k, float(gamma[k]), sigma2)
    return out


def update_y_pm(state: PowerMinState, scenario: Scenario) -> np.ndarray:
    """Project U^H G W - mu/rho_mu onto the QoS set, row by row."""
    target = state.u.conj().T @ (scenario.g @ state.w) - state.mu / state.rho_mu
    return project_qos(target, scenario.gamma, scenario.sigma2)


def update_w_pm(state: PowerMinState, scenario: Scenario) -> np.ndarray:
    """Beamformer step: (2 I + rho_mu G^H U U^H G) W = G^H U (mu + rho_mu Y)."""
    gu = scenario.g.conj().T @ state.u
    n = gu.shape[0]
    lhs = 2.0 * np.eye(n) + state.rho_mu * (gu @ gu.conj().T)
    rhs = gu @ (state.mu + state.rho_mu * state.y)
    return lin_solve(lhs, rhs, assume_a="pos", overwrite_a=True,
                     check_finite=False)


def update_b_pm(state: PowerMinState, scenario: Scenario) -> np.ndarray:
    """Susceptance step; same structured subproblem as the rate solver,
    with the multiplier folded into the target as lambda/rho_lambda."""
    z0 = scenario.z0
    su = 1j * z0 * (state.u + scenario.h)
    tgt = state.u - scenario.h + state.lam / state.rho_lambda
    mmat = np.concatenate([su.real, su.imag], axis=1)
    gmat = np.concatenate([tgt.real, tgt.imag], axis=1)
    return solve_b_subproblem(mmat, gmat, state.xi / state.rho_lambda, state.b,
                              scenario.mask)


def update_u_pm(state: PowerMinState, scenario: Scenario) -> np.ndarray:
    """Effective-channel step, one Hermitian positive definite solve.

    [rho_lambda (I + Z0^2 B^2) + rho_mu G W W^H G^H] U =
        -(I + iZ0 B) lambda + rho_lambda (I + iZ0 B)^2 H
        + G W mu^H + rho_mu G W Y^H.
    """
    m = scenario.mask.m
    zb = scenario.z0 * state.b
    cplus = np.eye(m) + 1j * zb
    gw = scenario.g @ state.w
    lhs = (state.rho_lambda * (np.eye(m) + zb @ zb)
           + state.rho_mu * (gw @ gw.conj().T))
    rhs = (-(cplus @ state.lam)
           + state.rho_lambda * (cplus @ (cplus @ scenario.h))
           + gw @ state.mu.conj().T
           + state.rho_mu * (gw @ state.y.conj().T))
    return lin_solve(lhs, rhs, assume_a="pos", overwrite_a=True,
                     check_finite=False)


def coupling_residual(state: PowerMinState, scenario: Scenario) -> np.ndarray:
    """Y - U^H G W."""
    return state.y - state.u.conj().T @ (scenario.g @ state.w)


def update_duals(state: PowerMinState,
                 scenario: Scenario) -> tuple[np.ndarray, np.ndarray]:
    """Multiplier ascent on both constraints."""
    lam = state.lam + state.rho_lambda * bilinear_residual(
        state.b, state.u, scenario.h, scenario.z0)
    mu = state.mu + state.rho_mu * coupling_residual(state, scenario)
    return lam, mu


def lagrangian_pm(state: PowerMinState, scenario: Scenario) -> float:
    """Augmented Lagrangian ||W||^2 + <lam, r1> + (rho_l/2)||r1||^2
    + <mu, r2> + (rho_m/2)||r2||^2 (minimized)."""
    r1 = bilinear_residual(state.b, state.u, scenario.h, scenario.z0)
    r2 = coupling_residual(state, scenario)
    val = float(np.linalg.norm(state.w) ** 2)
    val += float(np.real(np.sum(np.conj(state.lam) * r1)))
    val += 0.5 * state.rho_lambda * float(np.linalg.norm(r1) ** 2)
    val += float(np.real(np.sum(np.conj(state.mu) * r2)))
    val += 0.5 * state.rho_mu * float(np.linalg.norm(r2) ** 2)
    return val


def multiplier_identity_residual_pm(state: PowerMinState,
                                    scenario: Scenario) -> float:
    """Relative residual of (I + iZ0 B) lam = G W mu^H after a full sweep."""
    rhs = (scenario.g @ state.w) @ state.mu.conj().T
    lhs = state.lam + 1j * scenario.z0 * (state.b @ state.lam)
    return float(np.linalg.norm(lhs - rhs) / (1.0 + np.linalg.norm(rhs)))


def init_state(scenario: Scenario, params: PowerMinParams,
               b0: np.ndarray | None = None) -> PowerMinState:
    """B0 = 0 unless given; U0 exactly feasible; W0 the unit-power matched
    filter; Y0 the projection of the implied coupling matrix; zero duals."""
    m, k = scenario.h.shape
    if b0 is None:
        b = np.zeros((m, m))
    else:
        b = np.array(b0, dtype=float, copy=True)
        if not conforms_to_mask(b, scenario.mask):
            raise ValueError("initial susceptance does not conform to the mask")
    izb = 1j * scenario.z0 * b
    u = np.linalg.solve(np.eye(m) - izb, scenario.h + izb @ scenario.h)
    gu = scenario.g.conj().T @ u
    w = gu / np.linalg.norm(gu)
    state = PowerMinState(y=np.zeros((k, k), dtype=complex), w=w, b=b, u=u,
                          lam=np.zeros((m, k), dtype=complex),
                          mu=np.zeros((k, k), dtype=complex),
                          rho_lambda=params.rho_lambda, rho_mu=params.rho_mu,
                          xi=params.xi)
    state.y = project_qos(u.conj().T @ (scenario.g @ w), scenario.gamma,
                          scenario.sigma2)
    return state


def _rel_change(new: np.ndarray, old: np.ndarray) -> float:
    return float(np.linalg.norm(new - old) / (1.0 + np.linalg.norm(new)))


def _run_sweeps(sc: Scenario, params: PowerMinParams, init: np.ndarray | None,
                max_iters: int):
    """Iterate the block sweep on an already normalized scenario."""
    state = init_state(sc, params, init)
    h_norm = np.linalg.norm(sc.h)
    hist: dict[str, list[float]] = {k: [] for k in (
        "power", "residual_bilinear_rel", "residual_coupling_rel",
        "residual_abs", "change_max", "change_y", "change_w", "change_b",
        "change_u", "time_s", "sigma_min_gu",
        "norm_w", "norm_u", "norm_lambda", "norm_mu")}
    if params.diagnostics:
        hist["descent_max"] = []
        hist["identity_rel"] = []
    converged = False
    iters = 0

    for it in range(max_iters):
        t0 = time.perf_counter()
        prev = (state.y, state.w, state.b, state.u)
        margins = []

        def _step(name, value):
            if params.diagnostics:
                before = lagrangian_pm(state, sc)
                setattr(state, name, value)
                margins.append(lagrangian_pm(state, sc) - before)
            else:
                setattr(state, name, value)

        _step("y", update_y_pm(state, sc))
        _step("w", update_w_pm(state, sc))
        _step("b", update_b_pm(state, sc))
        _step("u", update_u_pm(state, sc))
        r1 = bilinear_residual(state.b, state.u, sc.h, sc.z0)
        r2 = coupling_residual(state, sc)
        state.lam = state.lam + state.rho_lambda * r1
        state.mu = state.mu + state.rho_mu * r2

        iters = it + 1
        r1_rel = float(np.linalg.norm(r1)) / h_norm
        r2_rel = float(np.linalg.norm(r2) / (1.0 + np.linalg.norm(state.y)))
        changes = [_rel_change(n, o) for n, o in zip(
            (state.y, state.w, state.b, state.u), prev)]
        change = max(changes)
        for name, value in zip(("y", "w", "b", "u"), changes):
            hist["change_" + name].append(value)
        gu = sc.g.conj().T @ state.u
        hist["power"].append(float(np.linalg.norm(state.w) ** 2))
        hist["residual_bilinear_rel"].append(r1_rel)
        hist["residual_coupling_rel"].append(r2_rel)
        hist["residual_abs"].append(float(np.hypot(np.linalg.norm(r1),
                                                   np.linalg.norm(r2))))
        hist["change_max"].append(change)
        hist["time_s"].append(time.perf_counter() - t0)
        hist["sigma_min_gu"].append(float(np.linalg.svd(gu, compute_uv=False)[-1]))
        hist["norm_w"].append(float(np.linalg.norm(state.w)))
        hist["norm_u"].append(float(np.linalg.norm(state.u)))
        hist["norm_lambda"].append(float(np.linalg.norm(state.lam)))
        hist["norm_mu"].append(float(np.linalg.norm(state.mu)))
        if params.diagnostics:
            hist["descent_max"].append(max(margins))
            hist["identity_rel"].append(multiplier_identity_residual_pm(state, sc))

        check_finite(it, y=state.y, w=state.w, b=state.b, u=state.u,
                     lam=state.lam, mu=state.mu)
        if max(r1_rel, r2_rel) < params.tol_residual and change < params.tol_change:
            converged = True
            break
    return state, hist, converged, iters


def _pick_start(sc: Scenario, params: PowerMinParams) -> np.ndarray | None:
    """Race the zero start against random susceptance starts for a few
    sweeps; prefer near-feasible candidates of lowest power, otherwise the
    best margin.  Used when ``n_starts`` > 1."""
    explore = dataclasses.replace(params, diagnostics=False)
    candidates = _start_candidates(sc.mask, sc.z0, params.n_starts,
                                   params.start_seed)
    scored = []
    for pos, b0 in enumerate(candidates):
        state, _, _, _ = _run_sweeps(sc, explore, b0, params.explore_iters)
        theta = b_to_theta(state.b, sc.z0)
        sinr, _ = sinr_and_rate(theta.conj().T @ sc.h, state.w, sc.g, sc.sigma2)
        margin = float(np.min(sinr / sc.gamma))
        power = float(np.linalg.norm(state.w) ** 2)
        scored.append((margin >= 0.99, margin if margin < 0.99 else -power, pos))
    scored.sort(reverse=True)
    return candidates[scored[0][2]]


def solve_powermin(scenario: Scenario, params: PowerMinParams | None = None,
                   init: np.ndarray | None = None) -> RunReport:
    """Run the sweep Y, W, B, U, duals until both constraint residuals and
    the block changes fall below tolerance or ``max_iters`` is reached.

    Channels are rescaled internally to unit RMS entry (equivalent problem;
    SINRs and powers unchanged).  The returned report carries a feasibility
    certificate computed through the reconstructed scattering matrix: if the
    worst SINR margin min_k SINR_k / Gamma_k falls short of 1 - tol_qos the
    status is ``infeasible_solution`` rather than an error, since ADMM on a
    nonconvex problem may stall; restarting from a random susceptance
    (``n_starts`` > 1) is the documented remedy.
    """
    params = params or PowerMinParams()
    params.validate()
    sc, _alpha, beta = normalized_copy(scenario)
    if params.n_starts > 1 and init is None:
        init = _pick_start(sc, params)
    state, hist, converged, iters = _run_sweeps(sc, params, init,
                                                params.max_iters)

    # Certificate in physical units through the reconstructed scattering matrix.
    state.u = state.u * beta
    theta = b_to_theta(state.b, scenario.z0)
    sinr, _ = sinr_and_rate(theta.conj().T @ scenario.h, state.w, scenario.g,
                            scenario.sigma2)
    margin = float(np.min(sinr / scenario.gamma))
    power = float(np.linalg.norm(state.w) ** 2)
    if margin < 1.0 - params.tol_qos:
        status = "infeasible_solution"
    else:
        status = "converged" if converged else "max_iters"
    return RunReport(
        mode="powermin", iterations=iters, converged=converged, status=status,
        history=hist, final_state=state, theta=theta,
        objective=power, sinr=sinr,
        diagnostics={
            "qos_margin": margin,
            "channel_scale_beta": beta,
        })
