"""Self-check suites: closed forms against brute-force or finite-difference references.

Each suite returns an :class:`OracleResult`; ``swan-isac check`` runs them all.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .channels import assemble_channels, swan_array
from .geometry import Scenario, SwanLayout, project_rpa, project_tpa
from .gradients import fd_gradient, grad_crlb, grad_rate
from .manifold import ProductPoint, TangentVector, retract, tangency_residual, transport
from .metrics import echo_derivatives, evaluate, fim_blocks
from .rbfgs import MemoryBuffer, MemoryEntry, two_loop_direction


@dataclass
class OracleResult:
    name: str
    passed: bool
    worst: float
    tolerance: float
    seconds: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"[{status}] {self.name}: worst {self.worst:.3e} (tol {self.tolerance:.1e}), "
                f"{self.seconds:.2f} s{'; ' + self.detail if self.detail else ''}")


def random_instance(rng: np.random.Generator, M=3, N=2, kc=2, kt=2, area_x=60.0, latent_scale=3.0):
    """Random layout, scenario and on-manifold point for the oracle suites."""
    layout = SwanLayout.for_area(M, N, area_x)
    half_y = layout.area_y / 2
    scenario = Scenario(
        cu_positions=np.column_stack([rng.uniform(0, area_x, kc), rng.uniform(-half_y, half_y, kc)]),
        target_positions=np.column_stack([rng.uniform(0, area_x, kt), rng.uniform(-half_y, half_y, kt)]),
    )
    W = rng.standard_normal((M, kc + kt)) + 1j * rng.standard_normal((M, kc + kt))
    W *= np.sqrt(scenario.power_budget) / np.linalg.norm(W)
    point = ProductPoint(W, rng.uniform(-latent_scale, latent_scale, M * N),
                         rng.uniform(-latent_scale, latent_scale, M))
    return layout, scenario, point


def _rel(a, b) -> float:
    den = np.linalg.norm(b)
    return float(np.linalg.norm(a - b) / den) if den > 0 else float(np.linalg.norm(a))


def gradient_oracle(instances: int = 20, seed: int = 1, w_tol: float = 1e-5, pos_tol: float = 1e-4) -> OracleResult:
    """Closed-form rate and CRLB gradients against central differences."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst_w = worst_p = 0.0
    for _ in range(instances):
        layout, scenario, point = random_instance(rng)
        array = swan_array(layout)
        w_step = 1e-6 * np.sqrt(scenario.power_budget)
        objectives = [(grad_crlb(layout, scenario, point, array),
                       lambda p: evaluate(layout, scenario, p, array).crlb)]
        for k in range(scenario.num_cus):
            objectives.append((grad_rate(layout, scenario, point, k, array),
                               lambda p, k=k: evaluate(layout, scenario, p, array).rates[k]))
        for closed, f in objectives:
            fd = fd_gradient(f, point, step=1e-6, w_step=w_step)
            worst_w = max(worst_w, _rel(closed.g_W, fd.g_W))
            pos_closed = np.concatenate([closed.g_psi, closed.g_phi])
            pos_fd = np.concatenate([fd.g_psi, fd.g_phi])
            worst_p = max(worst_p, _rel(pos_closed, pos_fd))
    passed = worst_w <= w_tol and worst_p <= pos_tol
    return OracleResult("gradients vs finite differences", passed, max(worst_w, worst_p), pos_tol,
                        time.perf_counter() - t0, f"W {worst_w:.2e} (tol {w_tol:.0e}), positions {worst_p:.2e}")


def fim_by_finite_differences(layout: SwanLayout, scenario: Scenario, point: ProductPoint,
                              rel_step: float = 1e-6) -> np.ndarray:
    """FIM from central differences of ``vec(sum_k H_k X)`` with ``X = [W, ..., W]`` (T copies).

    Channels come from the scalar reference formulas, so this shares no code
    with the vectorised engine.
    """
    psi = project_tpa(layout, point.psi_tilde)
    phi = project_rpa(layout, point.phi_tilde)
    X = np.tile(point.W, (1, scenario.samples))
    h = rel_step * layout.wavelength
    tg = scenario.target_positions
    kt = len(tg)

    def psi_vec(targets):
        ch = assemble_channels(layout, scenario.with_(target_positions=targets), psi, phi)
        H = sum(a * np.outer(ch.h_r[k].conj(), ch.h_t[k].conj()) for k, a in enumerate(scenario.rcs))
        return (H @ X).reshape(-1)

    cols = []
    for coord in (0, 1):
        for k in range(kt):
            plus, minus = tg.copy(), tg.copy()
            plus[k, coord] += h
            minus[k, coord] -= h
            cols.append((psi_vec(plus) - psi_vec(minus)) / (2 * h))
    D = np.array(cols)
    return 2.0 / scenario.noise_sense * (D.conj() @ D.T).real


def fim_oracle(instances: int = 20, seed: int = 2, tol: float = 1e-4) -> OracleResult:
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        layout, scenario, point = random_instance(rng)
        psi = project_tpa(layout, point.psi_tilde)
        phi = project_rpa(layout, point.phi_tilde)
        F_xx, F_xy, F_yy = fim_blocks(echo_derivatives(layout, scenario, psi, phi), point.W,
                                      scenario.samples, scenario.noise_sense)
        closed = np.block([[F_xx, F_xy], [F_xy.T, F_yy]])
        worst = max(worst, _rel(closed, fim_by_finite_differences(layout, scenario, point)))
    return OracleResult("FIM vs finite differences of the echo mean", worst <= tol, worst, tol,
                        time.perf_counter() - t0)


def _random_point(rng, M, K, npsi, nphi, power):
    W = rng.standard_normal((M, K)) + 1j * rng.standard_normal((M, K))
    W *= np.sqrt(power) / np.linalg.norm(W)
    return ProductPoint(W, rng.standard_normal(npsi), rng.standard_normal(nphi))


def _random_tangent(rng, dims):
    M, K, npsi, nphi = dims
    return TangentVector.from_parts(rng.standard_normal((M, K)) + 1j * rng.standard_normal((M, K)),
                                    rng.standard_normal(npsi), rng.standard_normal(nphi))


def manifold_oracle(cases: int = 1000, seed: int = 3) -> OracleResult:
    """Retraction stays on the sphere, transport is a tangent projection, retraction is first order."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst = {"retraction": 0.0, "tangency": 0.0, "idempotence": 0.0}
    min_slope = np.inf
    for _ in range(cases):
        M, K = rng.integers(1, 6, size=2)
        power = 10.0 ** rng.uniform(-3, 1)
        x = _random_point(rng, M, K, int(rng.integers(0, 8)), int(rng.integers(0, 4)), power)
        v = _random_tangent(rng, x.dims)
        step = 10.0 ** rng.uniform(-3, 1)
        y = retract(x, step, v)
        worst["retraction"] = max(worst["retraction"], abs(y.power - power) / power)
        tv = transport(x, v)
        scale = np.linalg.norm(x.W) * np.linalg.norm(v.z_W)
        worst["tangency"] = max(worst["tangency"], tangency_residual(x, tv) / scale)
        worst["idempotence"] = max(worst["idempotence"], (transport(x, tv) - tv).norm() / max(tv.norm(), 1e-300))
        # ||R(eps d) - (x + eps d)|| should shrink like eps^2 for a tangent d
        d = tv * (np.linalg.norm(x.W) / np.linalg.norm(tv.z_W))
        errs = []
        for eps in (1e-2, 5e-3):
            r = retract(x, eps, d)
            errs.append(np.linalg.norm(r.W - (x.W + eps * d.z_W)))
        min_slope = min(min_slope, float(np.log2(errs[0] / errs[1])))
    passed = (worst["retraction"] <= 1e-10 and worst["tangency"] <= 1e-9
              and worst["idempotence"] <= 1e-12 and min_slope >= 1.9)
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f", slope {min_slope:.3f}"
    return OracleResult("manifold invariants", passed, max(worst.values()), 1e-9, time.perf_counter() - t0, detail)


def dense_inverse_hessian(pairs, n: int) -> np.ndarray:
    """Explicit BFGS inverse-Hessian recursion from a scaled identity (oldest pair first)."""
    if not pairs:
        return np.eye(n)
    s_new, y_new = pairs[-1]
    H = (s_new @ y_new) / (y_new @ y_new) * np.eye(n)
    for s, y in pairs:
        rho = 1.0 / (s @ y)
        V = np.eye(n) - rho * np.outer(y, s)
        H = V.T @ H @ V + rho * np.outer(s, s)
    return H


def two_loop_oracle(memory_sizes=(0, 1, 3, 30), seed: int = 4, tol: float = 1e-10, repeats: int = 5) -> OracleResult:
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for m in memory_sizes:
        for _ in range(repeats):
            dims = (3, 4, 6, 3)
            n = 2 * dims[0] * dims[1] + dims[2] + dims[3]
            A = rng.standard_normal((n, n))
            A = A @ A.T + n * np.eye(n)
            buf = MemoryBuffer(max(m, 1), dims)
            pairs = []
            for _ in range(m):
                s = rng.standard_normal(n)
                y = A @ s
                pairs.append((s, y))
                buf.push(MemoryEntry(TangentVector(s, dims), TangentVector(y, dims), 1.0 / (s @ y)))
            g = rng.standard_normal(n)
            d = two_loop_direction(TangentVector(g, dims), buf).data
            ref = -dense_inverse_hessian(pairs, n) @ g
            worst = max(worst, _rel(d, ref))
    return OracleResult("two-loop recursion vs dense BFGS", worst <= tol, worst, tol, time.perf_counter() - t0,
                        f"memory sizes {list(memory_sizes)}")


def scaling_oracle(instances: int = 20, seed: int = 5, tol: float = 1e-10) -> OracleResult:
    """CRLB(cW) = CRLB(W) / c^2."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        layout, scenario, point = random_instance(rng)
        base = evaluate(layout, scenario, point).crlb
        for c in (0.1, 0.5, 2.0, 10.0):
            scaled = ProductPoint(c * point.W, point.psi_tilde, point.phi_tilde)
            worst = max(worst, abs(evaluate(layout, scenario, scaled).crlb * c * c - base) / base)
    return OracleResult("CRLB power scaling", worst <= tol, worst, tol, time.perf_counter() - t0)


SUITES = {
    "gradients": gradient_oracle,
    "fim": fim_oracle,
    "manifold": manifold_oracle,
    "two-loop": two_loop_oracle,
    "scaling": scaling_oracle,
}


def run_all() -> list:
    return [suite() for suite in SUITES.values()]
