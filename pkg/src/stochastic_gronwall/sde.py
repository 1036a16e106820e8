"""Drift-implicit (backward) Euler-Maruyama integration for coercive SDEs.

The scheme advances Y^{j+1} = Y^j + h f(Y^{j+1}) + g(Y^j) dW^{j+1} with
equidistant steps. Registered problems must satisfy the coercivity
condition <f(x), x> + |g(x)|^2/2 <= L(1+|x|^2) (spot-checked on random
states) and a one-sided Lipschitz condition on the drift, which makes
the implicit step uniquely solvable for h below the Lipschitz threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .errors import ContractViolationError, SolverError

COERCIVITY_POINTS = 10_000
COERCIVITY_RADIUS = 100.0
#: Slack for the coercivity spot-check, relative to L*(1+|x|^2) scale.
COERCIVITY_RTOL = 1e-9


@dataclass(frozen=True)
class SolverConfig:
    """Implicit-step solver settings (Newton with bisection fallback)."""

    tol: float = 1e-12
    max_iter: int = 50
    fd_eps_scale: float = 1e-7

    def __post_init__(self):
        if not self.tol > 0.0:
            raise ContractViolationError(f"solver tolerance must be > 0, got {self.tol}")
        if self.max_iter < 1:
            raise ContractViolationError(f"max_iter must be >= 1, got {self.max_iter}")


@dataclass
class SdeProblem:
    """Autonomous SDE dX = f(X) dt + g(X) dW with deterministic X_0.

    ``drift`` maps a (d,) state to a (d,) vector and ``diffusion`` maps
    it to a (d, m) matrix. ``L`` is the registered coercivity constant,
    ``one_sided_c`` the one-sided Lipschitz constant of the drift (None
    when unknown). ``kernel_id``/``kernel_params`` point scalar zoo
    problems at the batch stepping kernel; ``zoo_spec`` allows worker
    processes to rebuild the problem from plain data.
    """

    label: str
    d: int
    m: int
    drift: Callable[[np.ndarray], np.ndarray]
    diffusion: Callable[[np.ndarray], np.ndarray]
    x0: np.ndarray
    L: float
    one_sided_c: float | None = None
    drift_jacobian: Callable[[np.ndarray], np.ndarray] | None = None
    kernel_id: int | None = None
    kernel_params: np.ndarray | None = None
    zoo_spec: tuple | None = None

    def __post_init__(self):
        self.x0 = np.atleast_1d(np.asarray(self.x0, dtype=np.float64))
        if self.x0.shape != (self.d,):
            raise ContractViolationError(
                f"x0 must have shape ({self.d},), got {self.x0.shape}"
            )
        if self.L < 0.0:
            raise ContractViolationError(f"L must be >= 0, got {self.L}")

    def x0_norm_sq(self) -> float:
        return float(np.dot(self.x0, self.x0))

    def g_x0_norm_sq(self) -> float:
        g0 = np.asarray(self.diffusion(self.x0), dtype=np.float64)
        return float(np.sum(g0 * g0))


def check_coercivity(
    problem: SdeProblem,
    n_points: int = COERCIVITY_POINTS,
    radius: float = COERCIVITY_RADIUS,
    seed: int = 2024,
) -> None:
    """Spot-check <f(x),x> + |g(x)|^2/2 <= L(1+|x|^2) on random states.

    Draws points uniformly in a ball of the given radius (plus the
    origin and x0) and raises on the first violation found.
    """
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    directions = rng.standard_normal((n_points, problem.d))
    norms = np.linalg.norm(directions, axis=1)
    norms[norms == 0.0] = 1.0
    radii = radius * rng.random(n_points) ** (1.0 / problem.d)
    points = directions / norms[:, None] * radii[:, None]
    points = np.vstack([points, np.zeros(problem.d), problem.x0])
    for x in points:
        fx = np.asarray(problem.drift(x), dtype=np.float64)
        gx = np.asarray(problem.diffusion(x), dtype=np.float64)
        lhs = float(np.dot(fx, x)) + 0.5 * float(np.sum(gx * gx))
        rhs = problem.L * (1.0 + float(np.dot(x, x)))
        if lhs > rhs + COERCIVITY_RTOL * max(1.0, abs(rhs)):
            raise ContractViolationError(
                f"problem {problem.label!r} fails coercivity with L={problem.L} "
                f"at |x|={float(np.linalg.norm(x)):.3g}: lhs={lhs:.6g} > rhs={rhs:.6g}"
            )


@dataclass(frozen=True)
class BemConfig:
    """Step size, cap, horizon, and solver settings for one run.

    N_h is the largest integer with N_h*h <= T; configurations with
    N_h = 0 are rejected. The coercivity constraint 2*h0*L < 1 is
    checked against the problem at simulation time.
    """

    h: float
    h0: float
    T: float
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if not 0.0 < self.h < self.h0:
            raise ContractViolationError(
                f"need 0 < h < h0, got h={self.h}, h0={self.h0}"
            )
        if self.h >= 1.0:
            raise ContractViolationError(f"step size must be < 1, got {self.h}")
        if not self.T > 0.0:
            raise ContractViolationError(f"T must be > 0, got {self.T}")
        if self.n_steps < 1:
            raise ContractViolationError(
                f"h={self.h} exceeds the horizon T={self.T} (no steps fit)"
            )

    @property
    def n_steps(self) -> int:
        n = int(math.floor(self.T / self.h))
        while (n + 1) * self.h <= self.T:
            n += 1
        while n > 0 and n * self.h > self.T:
            n -= 1
        return n

    def validate_for(self, problem: SdeProblem) -> None:
        if not 2.0 * self.h0 * problem.L < 1.0:
            raise ContractViolationError(
                f"need 2*h0*L < 1, got {2.0 * self.h0 * problem.L} "
                f"for problem {problem.label!r}"
            )


@dataclass
class BemTrajectory:
    """One realized trajectory with its verification payload.

    ``z_increments`` are the centered noise terms
    Z^{j+1} = |g(Y^j) dW|^2 - h|g(Y^j)|^2 + 2<g(Y^j) dW, Y^j>, and
    ``sup_functional_p`` maps each requested exponent p to the realized
    sup_j (|Y^j|^2 + h |g(Y^j)|^2)^p.
    """

    states: np.ndarray
    d_w: np.ndarray
    z_increments: np.ndarray
    sup_functional_p: dict
    solver_iterations: np.ndarray


def z_increment(y, g_y, d_w, h: float) -> float:
    """Centered noise term of the squared-norm recursion at one step."""
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    g_y = np.atleast_2d(np.asarray(g_y, dtype=np.float64))
    d_w = np.atleast_1d(np.asarray(d_w, dtype=np.float64))
    if g_y.shape != (y.size, d_w.size):
        raise ContractViolationError(
            f"diffusion shape {g_y.shape} does not match state {y.size} "
            f"and increment {d_w.size}"
        )
    noise = g_y @ d_w
    return (
        float(np.dot(noise, noise))
        - h * float(np.sum(g_y * g_y))
        + 2.0 * float(np.dot(noise, y))
    )


def _fd_jacobian(drift, z: np.ndarray, eps_scale: float) -> np.ndarray:
    eps = eps_scale * (1.0 + float(np.linalg.norm(z)))
    d = z.size
    jac = np.empty((d, d))
    for i in range(d):
        step = np.zeros(d)
        step[i] = eps
        jac[:, i] = (
            np.asarray(drift(z + step), dtype=np.float64)
            - np.asarray(drift(z - step), dtype=np.float64)
        ) / (2.0 * eps)
    return jac


def _bisect_step(drift, h: float, b: float, tol: float):
    """Scalar bisection for z - h*f(z) = b on a geometrically grown bracket."""
    span = 1.0 + 2.0 * abs(b)
    lo, hi = -span, span
    grew = 0
    while lo - h * float(drift(np.array([lo]))[0]) - b > 0.0 and grew < 600:
        lo *= 2.0
        grew += 1
    while hi - h * float(drift(np.array([hi]))[0]) - b < 0.0 and grew < 600:
        hi *= 2.0
        grew += 1
    if grew >= 600:
        raise SolverError("bisection failed to bracket the implicit step root")
    iters = 0
    for _ in range(300):
        mid = 0.5 * (lo + hi)
        r = mid - h * float(drift(np.array([mid]))[0]) - b
        iters += 1
        if abs(r) <= tol:
            return mid, iters
        if r < 0.0:
            lo = mid
        else:
            hi = mid
    raise SolverError("bisection stalled above tolerance", residual=abs(r), iterations=iters)


def bem_step(
    problem: SdeProblem,
    y,
    d_w,
    h: float,
    solver: SolverConfig | None = None,
):
    """One implicit step: solve Y' = y + h f(Y') + g(y) dW.

    Newton iteration from the explicit predictor, using the analytic
    drift Jacobian when the problem carries one and central finite
    differences otherwise; scalar problems fall back to safeguarded
    bisection if Newton stalls. Returns (y_next, iterations) with the
    residual norm at or below the solver tolerance.
    """
    solver = solver or SolverConfig()
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    d_w = np.atleast_1d(np.asarray(d_w, dtype=np.float64))
    g_y = np.atleast_2d(np.asarray(problem.diffusion(y), dtype=np.float64))
    b = y + g_y @ d_w

    z = b.copy()
    iters = 0
    residual = math.inf
    eye = np.eye(problem.d)
    for _ in range(solver.max_iter):
        r = z - h * np.asarray(problem.drift(z), dtype=np.float64) - b
        residual = float(np.linalg.norm(r))
        if residual <= solver.tol:
            return z, iters
        if problem.drift_jacobian is not None:
            jac = np.atleast_2d(np.asarray(problem.drift_jacobian(z), dtype=np.float64))
        else:
            jac = _fd_jacobian(problem.drift, z, solver.fd_eps_scale)
        try:
            delta = np.linalg.solve(eye - h * jac, r)
        except np.linalg.LinAlgError:
            break
        z = z - delta
        iters += 1
        if not np.all(np.isfinite(z)):
            break

    if problem.d == 1:
        root, extra = _bisect_step(problem.drift, h, float(b[0]), solver.tol)
        return np.array([root]), iters + extra
    raise SolverError(
        f"implicit step did not converge after {iters} Newton iterations",
        residual=residual,
        iterations=iters,
    )


def simulate_trajectory(
    problem: SdeProblem,
    cfg: BemConfig,
    p_list: Sequence[float],
    rng_stream: np.random.Generator,
) -> BemTrajectory:
    """Integrate one path, recording states, noise terms, and functionals.

    Increments dW^{j+1} are N(0, h I_m) draws from the supplied stream.
    Solver failures propagate as :class:`SolverError` with the step index.
    """
    cfg.validate_for(problem)
    for p in p_list:
        if not 0.0 < p < 1.0:
            raise ContractViolationError(f"every p must lie in (0,1), got {p}")
    n = cfg.n_steps
    d_w = rng_stream.standard_normal((n, problem.m)) * math.sqrt(cfg.h)

    states = np.empty((n + 1, problem.d))
    states[0] = problem.x0
    z_vals = np.empty(n)
    iter_counts = np.empty(n, dtype=np.int64)
    func_vals = np.empty(n + 1)

    y = problem.x0.copy()
    g_y = np.atleast_2d(np.asarray(problem.diffusion(y), dtype=np.float64))
    func_vals[0] = float(np.dot(y, y)) + cfg.h * float(np.sum(g_y * g_y))
    for j in range(n):
        z_vals[j] = z_increment(y, g_y, d_w[j], cfg.h)
        try:
            y, iter_counts[j] = bem_step(problem, y, d_w[j], cfg.h, cfg.solver)
        except SolverError as exc:
            raise SolverError(
                f"step {j + 1} of {n} failed for problem {problem.label!r}: {exc}",
                residual=exc.residual,
                iterations=exc.iterations,
            ) from exc
        states[j + 1] = y
        g_y = np.atleast_2d(np.asarray(problem.diffusion(y), dtype=np.float64))
        func_vals[j + 1] = float(np.dot(y, y)) + cfg.h * float(np.sum(g_y * g_y))

    sup_val = float(func_vals.max())
    sup_p = {float(p): sup_val ** float(p) for p in p_list}
    return BemTrajectory(states, d_w, z_vals, sup_p, iter_counts)


@dataclass(frozen=True)
class RecursionCheckReport:
    """Outcome of the pathwise squared-norm recursion check."""

    passed: bool
    first_violation: int | None
    max_excess: float


def pathwise_recursion_check(
    traj: BemTrajectory, problem: SdeProblem, cfg: BemConfig, rtol: float = 1e-8
) -> RecursionCheckReport:
    """Check the iterated squared-norm inequality along one trajectory:

        (1-2hL)|Y^n|^2 + h|g(Y^n)|^2
            <= (1-2hL)|Y^0|^2 + h|g(Y^0)|^2 + 2L t_n
               + sum_{j<n} Z^{j+1} + 2hL sum_{j<n} |Y^j|^2

    for every n up to N_h, with relative slack ``rtol``.
    """
    h, L = cfg.h, problem.L
    states = traj.states
    norms_sq = np.sum(states * states, axis=1)
    g_norms_sq = np.array(
        [float(np.sum(np.square(np.asarray(problem.diffusion(s))))) for s in states]
    )
    n_total = states.shape[0] - 1
    t = h * np.arange(n_total + 1)
    lhs = (1.0 - 2.0 * h * L) * norms_sq + h * g_norms_sq
    z_cum = np.concatenate(([0.0], np.cumsum(traj.z_increments)))
    y_cum = np.concatenate(([0.0], np.cumsum(norms_sq[:-1])))
    rhs = lhs[0] + 2.0 * L * t + z_cum + 2.0 * h * L * y_cum
    excess = lhs - rhs - rtol * np.maximum(1.0, np.abs(rhs))
    bad = np.nonzero(excess > 0.0)[0]
    max_excess = float(np.max(lhs - rhs))
    if bad.size:
        return RecursionCheckReport(False, int(bad[0]), max_excess)
    return RecursionCheckReport(True, None, max_excess)


# ---------------------------------------------------------------------------
# Problem zoo


def make_linear(lam: float = 1.0, sigma: float = 0.0, x0=1.0, L: float | None = None) -> SdeProblem:
    """Scalar linear problem f(x) = -lam*x, g(x) = sigma*x.

    The registered envelope L = max(lam, sigma^2/2) always dominates
    (-lam + sigma^2/2) x^2 <= L (1 + x^2); pass L explicitly to tighten
    or to exercise the coercivity check.
    """
    if lam < 0.0:
        raise ContractViolationError(f"lambda must be >= 0, got {lam}")
    if L is None:
        L = max(lam, 0.5 * sigma * sigma)
    problem = SdeProblem(
        label="linear",
        d=1,
        m=1,
        drift=lambda x: -lam * x,
        diffusion=lambda x: np.array([[sigma * x[0]]]),
        x0=np.atleast_1d(np.asarray(x0, dtype=np.float64)),
        L=L,
        one_sided_c=-lam,
        drift_jacobian=lambda x: np.array([[-lam]]),
        kernel_id=kernels.KERNEL_LINEAR,
        kernel_params=np.array([lam, sigma]),
        zoo_spec=("linear", {"lam": lam, "sigma": sigma, "x0": float(np.atleast_1d(x0)[0]), "L": L}),
    )
    check_coercivity(problem)
    return problem


def make_ginzburg_landau(sigma: float = 0.5, x0=1.0, L: float | None = None) -> SdeProblem:
    """Scalar Ginzburg-Landau problem f(x) = x - x^3, g(x) = sigma*x.

    x^2 - x^4 + sigma^2 x^2 / 2 <= (1 + sigma^2/2)(1 + x^2), so
    L = 1 + sigma^2/2 suffices. The drift is one-sided Lipschitz with
    constant 1, which keeps the implicit step monotone for h < 1.
    """
    if L is None:
        L = 1.0 + 0.5 * sigma * sigma
    problem = SdeProblem(
        label="ginzburg-landau",
        d=1,
        m=1,
        drift=lambda x: x - x**3,
        diffusion=lambda x: np.array([[sigma * x[0]]]),
        x0=np.atleast_1d(np.asarray(x0, dtype=np.float64)),
        L=L,
        one_sided_c=1.0,
        drift_jacobian=lambda x: np.array([[1.0 - 3.0 * x[0] * x[0]]]),
        kernel_id=kernels.KERNEL_GINZBURG_LANDAU,
        kernel_params=np.array([sigma]),
        zoo_spec=("ginzburg-landau", {"sigma": sigma, "x0": float(np.atleast_1d(x0)[0]), "L": L}),
    )
    check_coercivity(problem)
    return problem


def make_bounded_rotation(
    omega: float = 1.0, kappa: float = 0.0, sigma: float = 0.5, x0=(1.0, 0.0), L: float | None = None
) -> SdeProblem:
    """Planar rotation with damping and constant diffusion.

    f(x) = omega*(-x2, x1) - kappa*x contributes nothing (rotation) or
    a negative amount (damping) to <f(x), x>, and g = sigma*I_2 is
    bounded, so L = sigma^2 suffices. The drift is linear, hence the
    implicit step is a constant 2x2 solve.
    """
    if kappa < 0.0:
        raise ContractViolationError(f"kappa must be >= 0, got {kappa}")
    if L is None:
        L = sigma * sigma

    def drift(x):
        return np.array([-omega * x[1] - kappa * x[0], omega * x[0] - kappa * x[1]])

    jac = np.array([[-kappa, -omega], [omega, -kappa]])
    problem = SdeProblem(
        label="bounded-rotation",
        d=2,
        m=2,
        drift=drift,
        diffusion=lambda x: sigma * np.eye(2),
        x0=np.asarray(x0, dtype=np.float64),
        L=L,
        one_sided_c=-kappa,
        drift_jacobian=lambda x: jac,
        zoo_spec=(
            "bounded-rotation",
            {"omega": omega, "kappa": kappa, "sigma": sigma,
             "x0": tuple(float(v) for v in np.asarray(x0, dtype=np.float64)), "L": L},
        ),
    )
    check_coercivity(problem)
    return problem


_ZOO = {
    "linear": make_linear,
    "ginzburg-landau": make_ginzburg_landau,
    "bounded-rotation": make_bounded_rotation,
}


def zoo_labels() -> tuple:
    return tuple(sorted(_ZOO))


def make_problem(label: str, **params) -> SdeProblem:
    """Build a registered problem by label; see :func:`zoo_labels`."""
    try:
        factory = _ZOO[label]
    except KeyError:
        raise ContractViolationError(
            f"unknown problem {label!r}; registered: {', '.join(zoo_labels())}"
        ) from None
    return factory(**params)
