"""Otto-cycle orchestration, work/heat bookkeeping and efficiency statistics.

One cycle, starting from a state equilibrated at T_h in the trap omega_h:

1. expansion: GPE with omega ramped linearly omega_h -> omega_c over tau_ec
2. cold isochoric: SGLE at T_c, trap omega_c, until stationary
3. compression: GPE with omega_c -> omega_h over tau_ec
4. hot isochoric: SGLE at T_h, trap omega_h, until stationary

Energies are volume averages of the Hamiltonian.  Works are counted as
extracted (positive when the gas loses energy during a stroke).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, fields, replace
from typing import Callable, Sequence

import numpy as np

from .diagnostics import energy_breakdown, total_energy
from .gpe import (EnergySeries, NumericalAbort, PhysicalParams, Recorder, StrokeSchedule,
                  WaveFunction, run_adiabatic_stroke)
from .sgle import (BathParams, StationarityCriterion, StrokeLimit, ThermalTrace, Thermalizer,
                   density_mean_in_trap, make_rng, thomas_fermi_state)
from .spectral import SpectralGrid, continued_radius, make_grid

__all__ = [
    "CycleConfig",
    "CycleRecord",
    "CycleState",
    "EfficiencyDistribution",
    "EnsembleResult",
    "SimulationContext",
    "collision_time_ratio",
    "detect_transition",
    "ensemble_run",
    "fit_through_origin",
    "ground_state",
    "mc_efficiency_distribution",
    "otto_reference",
    "power_estimate",
    "prepare_hot_state",
    "run_cycle",
    "tlambda_sweep",
    "work_heat",
]

log = logging.getLogger(__name__)

MASS_POLICIES = ("fixed-total-mass", "fixed-central-density")

#: k_B T_lambda in code units, from `tlambda_sweep` on the default trap
#: (rho_m = 0.0125, omega_c, alpha = 1).  Classical-field T_lambda depends on
#: the mode cutoff, hence one entry per resolution.
T_LAMBDA_CALIBRATION = {32: 3.0e-4, 64: 1.5e-4}


def default_t_lambda(N: int) -> float:
    if N in T_LAMBDA_CALIBRATION:
        return T_LAMBDA_CALIBRATION[N]
    # thermal depletion ~ T k_max, so T_lambda ~ 1/N at fixed trap and mass
    log.warning("no T_lambda calibration for N=%d; scaling the N=32 value by 32/N", N)
    return T_LAMBDA_CALIBRATION[32] * 32.0 / N


@dataclass
class CycleConfig:
    """Everything needed to run cycles on one parameter point.

    Temperatures ``T_c`` and ``T_h`` are in units of T_lambda; ``t_lambda``
    converts them to code units (None selects the calibrated value for N).
    """

    omega_c: float = 0.334638
    omega_h: float = 0.337613
    T_c: float = 0.003
    T_h: float = 0.012
    tau_ec: float = 30.0
    alpha: float = 1.0
    mass_policy: str = "fixed-total-mass"
    n_cycles: int = 4
    seed: int = 0
    N: int = 64
    L: float = 1.0
    dt: float = 2.5e-3
    dt_sgle: float = 5e-3
    rho_m: float = 0.0125
    gamma: float = 2.0
    t_lambda: float | None = None
    xi0: float = 0.0707
    c0: float = 1.0
    stationarity_window: int = 2000
    stationarity_tol: float = 1e-3
    stationarity_stride: int = 10
    min_steps: int = 20000
    max_steps: int = 400000
    record_stride: int = 10
    initial_relax_steps: int = 20000

    def validate(self) -> "CycleConfig":
        """Raise ValueError naming the first violated invariant."""
        checks = [
            (self.omega_c > 0, "omega_c > 0"),
            (self.omega_h > self.omega_c, "omega_h > omega_c"),
            (self.T_c >= 0, "T_c >= 0"),
            (self.T_h > self.T_c, "T_h > T_c"),
            (self.tau_ec > 0, "tau_ec > 0"),
            (0 < self.alpha <= 1, "0 < alpha <= 1"),
            (self.mass_policy in MASS_POLICIES, f"mass_policy in {MASS_POLICIES}"),
            (self.n_cycles >= 1, "n_cycles >= 1"),
            (self.N >= 8 and self.N % 2 == 0, "N even and >= 8"),
            (self.L > 0, "L > 0"),
            (self.dt > 0, "dt > 0"),
            (self.dt <= self.tau_ec, "dt <= tau_ec"),
            (self.dt_sgle > 0, "dt_sgle > 0"),
            (self.rho_m > 0, "rho_m > 0"),
            (self.gamma >= 0, "gamma >= 0"),
            (self.t_lambda is None or self.t_lambda > 0, "t_lambda > 0"),
            (self.stationarity_window >= 2, "stationarity_window >= 2"),
            (self.stationarity_tol > 0, "stationarity_tol > 0"),
            (self.stationarity_stride >= 1, "stationarity_stride >= 1"),
            (self.max_steps >= max(1, self.min_steps), "max_steps >= min_steps"),
            (self.record_stride >= 1, "record_stride >= 1"),
        ]
        for ok, name in checks:
            if not ok:
                raise ValueError(f"invalid configuration: requires {name}")
        return self

    @property
    def t_lambda_code(self) -> float:
        return self.t_lambda if self.t_lambda is not None else default_t_lambda(self.N)

    def with_(self, **kw) -> "CycleConfig":
        return replace(self, **kw)

    def criterion(self) -> StationarityCriterion:
        return StationarityCriterion(window=self.stationarity_window, rel_slope_tol=self.stationarity_tol,
                                     min_steps=self.min_steps, max_steps=self.max_steps,
                                     stride=self.stationarity_stride)


@dataclass
class SimulationContext:
    """Grid, physical constants and trap shape shared by all strokes of a run."""

    grid: SpectralGrid
    params: PhysicalParams
    trap_r2: np.ndarray

    @classmethod
    def from_config(cls, config: CycleConfig) -> "SimulationContext":
        grid = make_grid(config.N, config.L)
        params = PhysicalParams(alpha=config.alpha, c0=config.c0, xi0=config.xi0)
        return cls(grid=grid, params=params, trap_r2=continued_radius(grid) ** 2)

    def potential(self, omega: float) -> np.ndarray:
        return 0.5 * self.params.m * omega**2 * self.trap_r2

    def energy(self, wf: WaveFunction, omega: float) -> float:
        return total_energy(wf, self.potential(omega), self.params)


@dataclass
class CycleState:
    """Wave function plus the chemical potential carried between baths."""

    wf: WaveFunction
    mu: float
    rho_m: float


@dataclass
class CycleRecord:
    """Endpoint energies of one cycle and the derived works and heat."""

    E_e_i: float
    E_e_f: float
    E_c_i: float
    E_c_f: float
    cycle_id: int = 0
    failed: bool = False
    stationary: bool = True
    expansion: EnergySeries | None = field(default=None, repr=False)
    compression: EnergySeries | None = field(default=None, repr=False)
    cold_trace: ThermalTrace | None = field(default=None, repr=False)
    hot_trace: ThermalTrace | None = field(default=None, repr=False)

    @property
    def W_e(self) -> float:
        return self.E_e_i - self.E_e_f

    @property
    def W_c(self) -> float:
        return self.E_c_i - self.E_c_f

    @property
    def W(self) -> float:
        return self.W_c + self.W_e

    @property
    def Q_h(self) -> float:
        return work_heat(self)[3]

    @property
    def Q_c_signed(self) -> float:
        """Energy gained by the gas in the cold isochoric (normally negative)."""
        return self.E_c_i - self.E_e_f

    @property
    def eta(self) -> float:
        q = self.Q_h
        return self.W / q if q != 0 else math.nan

    CSV_COLUMNS = ("cycle_id", "E_e_i", "E_e_f", "E_c_i", "E_c_f", "W_e", "W_c", "W", "Q_h", "eta")

    def csv_row(self) -> list:
        return [getattr(self, c) for c in self.CSV_COLUMNS]


def work_heat(record: CycleRecord, convention: str = "default") -> tuple[float, float, float, float]:
    """(W_e, W_c, W, Q_h) of a cycle record.

    ``convention="default"`` takes Q_h as the energy gained over the hot
    isochoric, E_e_i - E_c_f.  ``convention="literal"`` returns
    E_e_f - E_c_i instead, the difference across the cold isochoric.
    """
    W_e = record.E_e_i - record.E_e_f
    W_c = record.E_c_i - record.E_c_f
    if convention == "default":
        Q_h = record.E_e_i - record.E_c_f
    elif convention == "literal":
        Q_h = record.E_e_f - record.E_c_i
    else:
        raise ValueError(f"unknown heat convention {convention!r}")
    return W_e, W_c, W_e + W_c, Q_h


def otto_reference(omega_c: float, omega_h: float) -> float:
    """Ideal Otto efficiency 1 - omega_c/omega_h."""
    if not 0 < omega_c <= omega_h:
        raise ValueError("need 0 < omega_c <= omega_h")
    return 1.0 - omega_c / omega_h


def collision_time_ratio(alpha: float) -> float:
    """tau_0/tau ~ (g/g0)^2 = alpha^2: relative thermalization speed."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    return alpha * alpha


def power_estimate(W: float, alpha: float, tau_therm0: float = 1.0) -> float:
    """Power ~ W / (2 tau_therm) with tau_therm = tau_therm0 / alpha^2."""
    return W * collision_time_ratio(alpha) / (2.0 * tau_therm0)


# ---------------------------------------------------------------------------
# Stroke drivers


def _bath(config: CycleConfig, T_rel: float, rho_m: float, mu: float, seed: int) -> BathParams:
    return BathParams(T=T_rel * config.t_lambda_code, mu0=mu, gamma=config.gamma,
                      rho_target=rho_m, dt=config.dt_sgle, seed=seed)


def isochoric(state: CycleState, omega: float, T_rel: float, config: CycleConfig,
              ctx: SimulationContext, rng: np.random.Generator,
              criterion: StationarityCriterion | StrokeLimit | None = None) -> tuple[CycleState, ThermalTrace]:
    bath = _bath(config, T_rel, state.rho_m, state.mu, config.seed)
    th = Thermalizer(state.wf, omega, ctx.params, bath, rng=rng, trap_r2=ctx.trap_r2, mu=state.mu)
    trace = th.run(criterion or config.criterion())
    if not trace.stationary and not isinstance(criterion, StrokeLimit):
        log.warning("isochoric stroke at T=%g T_lambda not stationary after %d steps",
                    T_rel, config.max_steps)
    return CycleState(th.state(), th.mu, state.rho_m), trace


def adiabatic(state: CycleState, omega_start: float, omega_end: float, config: CycleConfig,
              ctx: SimulationContext) -> tuple[CycleState, EnergySeries]:
    sched = StrokeSchedule(omega_start, omega_end, config.tau_ec, config.dt)
    wf, series = run_adiabatic_stroke(state.wf, sched, ctx.params, Recorder(stride=config.record_stride))
    return CycleState(wf, state.mu, state.rho_m), series


def ground_state(config: CycleConfig, ctx: SimulationContext, omega: float, rho_m: float,
                 steps: int | None = None) -> CycleState:
    """Zero-temperature relaxation from a Thomas-Fermi guess (fixed mean density)."""
    wf, mu = thomas_fermi_state(ctx.grid, omega, ctx.params, rho_m)
    state = CycleState(wf, mu, rho_m)
    crit = StrokeLimit(max_steps=steps or config.initial_relax_steps, stride=100)
    state, _ = isochoric(state, omega, 0.0, config, ctx, make_rng(config.seed), crit)
    return state


def central_density_target(config: CycleConfig, r0: float = 0.5) -> float:
    """Trap-centre density of the alpha = 1 ground state at omega_h."""
    ref = config.with_(alpha=1.0)
    ctx = SimulationContext.from_config(ref)
    st = ground_state(ref, ctx, ref.omega_h, ref.rho_m)
    return density_mean_in_trap(st.wf, r0=r0)


def match_central_density(config: CycleConfig, ctx: SimulationContext, target: float,
                          r0: float = 0.5, iterations: int = 4) -> CycleState:
    """Find rho_m so the T = 0 state at omega_h has the target centre density.

    Starts from the Thomas-Fermi scaling rho_m ~ alpha^{3/2} and refines by
    secant steps on log(centre density) vs log(rho_m).
    """
    x0 = math.log(config.rho_m * config.alpha**1.5)
    st = ground_state(config, ctx, config.omega_h, math.exp(x0))
    y0 = math.log(density_mean_in_trap(st.wf, r0=r0))
    x1 = x0 + (math.log(target) - y0) / 0.6
    for _ in range(iterations):
        st = ground_state(config, ctx, config.omega_h, math.exp(x1))
        y1 = math.log(density_mean_in_trap(st.wf, r0=r0))
        if abs(y1 - math.log(target)) < 1e-3:
            break
        slope = (y1 - y0) / (x1 - x0) if x1 != x0 else 0.6
        slope = min(max(slope, 0.1), 2.0)
        x0, y0 = x1, y1
        x1 = x1 + (math.log(target) - y1) / slope
    return st


def prepare_hot_state(config: CycleConfig, ctx: SimulationContext | None = None,
                      rng: np.random.Generator | None = None,
                      central_target: float | None = None) -> CycleState:
    """Fresh thermalization at T_h in the omega_h trap (first cycle's input)."""
    config.validate()
    ctx = ctx or SimulationContext.from_config(config)
    rng = rng or make_rng(config.seed)
    if config.mass_policy == "fixed-central-density" and config.alpha != 1.0:
        target = central_density_target(config) if central_target is None else central_target
        state = match_central_density(config, ctx, target)
    else:
        state = ground_state(config, ctx, config.omega_h, config.rho_m)
    state, trace = isochoric(state, config.omega_h, config.T_h, config, ctx, rng)
    return state


def run_cycle(state: CycleState, config: CycleConfig, ctx: SimulationContext,
              rng: np.random.Generator, cycle_id: int = 0,
              on_stroke: Callable[[str, CycleState], None] | None = None) -> tuple[CycleRecord, CycleState]:
    """Run the four strokes from a hot equilibrium and return (record, final state).

    A numerical abort in any stroke yields a record flagged ``failed`` and
    the last good state.
    """
    E_e_i = ctx.energy(state.wf, config.omega_h)
    try:
        s1, exp_series = adiabatic(state, config.omega_h, config.omega_c, config, ctx)
        if on_stroke:
            on_stroke("expansion", s1)
        E_e_f = ctx.energy(s1.wf, config.omega_c)
        s2, cold = isochoric(s1, config.omega_c, config.T_c, config, ctx, rng)
        if on_stroke:
            on_stroke("cold", s2)
        E_c_i = ctx.energy(s2.wf, config.omega_c)
        s3, comp_series = adiabatic(s2, config.omega_c, config.omega_h, config, ctx)
        if on_stroke:
            on_stroke("compression", s3)
        E_c_f = ctx.energy(s3.wf, config.omega_h)
        s4, hot = isochoric(s3, config.omega_h, config.T_h, config, ctx, rng)
        if on_stroke:
            on_stroke("hot", s4)
    except NumericalAbort as exc:
        log.error("cycle %d aborted: %s", cycle_id, exc)
        rec = CycleRecord(E_e_i, math.nan, math.nan, math.nan, cycle_id=cycle_id, failed=True)
        good = exc.state if exc.state is not None else state.wf
        return rec, CycleState(good, state.mu, state.rho_m)
    rec = CycleRecord(E_e_i, E_e_f, E_c_i, E_c_f, cycle_id=cycle_id,
                      stationary=cold.stationary and hot.stationary,
                      expansion=exp_series, compression=comp_series, cold_trace=cold, hot_trace=hot)
    return rec, s4


@dataclass
class EnsembleResult:
    config: CycleConfig
    records: list
    initial_state: CycleState | None = None
    final_state: CycleState | None = None

    @property
    def completed(self) -> list:
        return [r for r in self.records if not r.failed]

    def W(self) -> np.ndarray:
        return np.array([r.W for r in self.completed])

    def Q_h(self, convention: str = "default") -> np.ndarray:
        return np.array([work_heat(r, convention)[3] for r in self.completed])

    def eta(self) -> np.ndarray:
        return np.array([r.eta for r in self.completed])

    @property
    def eta_O(self) -> float:
        return otto_reference(self.config.omega_c, self.config.omega_h)


def ensemble_run(config: CycleConfig, member: int = 0, state: CycleState | None = None,
                 on_stroke: Callable[[int, str, CycleState], None] | None = None) -> EnsembleResult:
    """Run ``n_cycles`` chained cycles; cycle n+1 starts from cycle n's final state."""
    config.validate()
    ctx = SimulationContext.from_config(config)
    rng = make_rng(config.seed, member)
    if state is None:
        state = prepare_hot_state(config, ctx, rng)
    if on_stroke:
        on_stroke(-1, "initial", state)
    initial = state
    records = []
    for i in range(config.n_cycles):
        cb = (lambda name, st, i=i: on_stroke(i, name, st)) if on_stroke else None
        rec, state = run_cycle(state, config, ctx, rng, cycle_id=i, on_stroke=cb)
        records.append(rec)
        log.info("cycle %d: W=%.6g Q_h=%.6g eta=%.6g", i, rec.W, rec.Q_h, rec.eta)
    return EnsembleResult(config, records, initial, state)


# ---------------------------------------------------------------------------
# Statistics


@dataclass
class EfficiencyDistribution:
    samples: np.ndarray = field(repr=False)
    mean: float
    std: float
    min: float
    max: float
    n_mc: int
    n_rejected: int = 0

    def histogram(self, bins: int = 50) -> tuple[np.ndarray, np.ndarray]:
        if self.max > self.min:
            return np.histogram(self.samples, bins=bins, density=True)
        return np.array([1.0]), np.array([self.min - 0.5, self.min + 0.5])

    @property
    def std_error(self) -> float:
        return self.std / math.sqrt(self.n_mc)


def mc_efficiency_distribution(records, n_mc: int = 100_000, rng: np.random.Generator | None = None,
                               guard: float = 1e-3, convention: str = "default") -> EfficiencyDistribution:
    """Monte Carlo distribution of eta = W/Q_h from Gaussian fits to the records.

    ``records`` is a sequence of :class:`CycleRecord` or a pair of arrays
    ``(W, Q_h)``.  Independent normals are fitted to W and Q_h (sample mean
    and ddof=1 standard deviation); draws with ``|Q_h| < guard |mean Q_h|``
    are redrawn and counted in ``n_rejected``.
    """
    if isinstance(records, tuple) and len(records) == 2 and not isinstance(records[0], CycleRecord):
        W, Q = (np.asarray(a, dtype=float) for a in records)
    else:
        recs = [r for r in records if not r.failed]
        W = np.array([r.W for r in recs])
        Q = np.array([work_heat(r, convention)[3] for r in recs])
    if W.size < 2 or Q.size != W.size:
        raise ValueError("need at least two completed cycles for statistics")
    rng = rng or np.random.default_rng()
    mw, sw = float(W.mean()), float(W.std(ddof=1))
    mq, sq = float(Q.mean()), float(Q.std(ddof=1))
    if sq == 0.0 and mq == 0.0:
        raise ValueError("Q_h has zero mean and zero variance")
    thresh = guard * abs(mq)
    w = rng.normal(mw, sw, n_mc) if sw > 0 else np.full(n_mc, mw)
    q = rng.normal(mq, sq, n_mc) if sq > 0 else np.full(n_mc, mq)
    rejected = 0
    bad = np.abs(q) < thresh
    while bad.any():
        nb = int(bad.sum())
        rejected += nb
        if rejected > 100 * n_mc:
            raise ValueError("Q_h distribution concentrated below the guard threshold")
        q[bad] = rng.normal(mq, sq, nb)
        bad = np.abs(q) < thresh
    eta = w / q
    return EfficiencyDistribution(samples=eta, mean=float(eta.mean()), std=float(eta.std()),
                                  min=float(eta.min()), max=float(eta.max()), n_mc=n_mc,
                                  n_rejected=rejected)


def fit_through_origin(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """Least-squares slope of y = s x and its R^2 (uncentred)."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    s = float(x @ y / (x @ x))
    ss_res = float(np.sum((y - s * x) ** 2))
    ss_tot = float(np.sum(y * y))
    return s, 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0


# ---------------------------------------------------------------------------
# Transition temperature


@dataclass
class TLambdaPoint:
    T: float
    order_parameter: float
    stationary: bool
    rho_bar: float = math.nan


def tlambda_sweep(temperatures: Sequence[float], config: CycleConfig, r0: float = 0.5,
                  n_average: int = 200, average_stride: int = 50,
                  ctx: SimulationContext | None = None) -> list[TLambdaPoint]:
    """Time-averaged trap-centre density vs temperature at fixed omega_c.

    ``temperatures`` are in units of ``config.t_lambda_code`` and must be
    ascending; each point starts from the previous equilibrium.
    """
    temps = list(temperatures)
    if any(b < a for a, b in zip(temps, temps[1:])):
        raise ValueError("temperatures must be sorted ascending")
    config.validate()
    ctx = ctx or SimulationContext.from_config(config)
    rng = make_rng(config.seed)
    state = ground_state(config, ctx, config.omega_c, config.rho_m)
    out = []
    for T in temps:
        state, trace = isochoric(state, config.omega_c, T, config, ctx, rng)
        bath = _bath(config, T, state.rho_m, state.mu, config.seed)
        th = Thermalizer(state.wf, config.omega_c, ctx.params, bath, rng=rng,
                         trap_r2=ctx.trap_r2, mu=state.mu)
        samples, rhos = [], []

        def sample(th, n):
            samples.append(density_mean_in_trap(th.psi, th.grid, r0=r0))
            rhos.append(th.rho_bar)

        th.run(StrokeLimit(max_steps=n_average * average_stride, stride=average_stride), callback=sample)
        state = CycleState(th.state(), th.mu, state.rho_m)
        out.append(TLambdaPoint(T, float(np.mean(samples)), trace.stationary, float(np.mean(rhos))))
        log.info("T=%g T_lambda: order parameter %.6g (stationary=%s)", T, out[-1].order_parameter,
                 trace.stationary)
    return out


@dataclass
class Transition:
    T_break: float
    slope_below: float
    slope_above: float
    sse: float


def detect_transition(T: Sequence[float], op: Sequence[float], n_grid: int = 400) -> Transition:
    """Continuous two-segment linear fit; the breakpoint minimizes the residual.

    Candidate breakpoints are scanned on a fine grid between the second and
    second-to-last temperatures.
    """
    T, op = np.asarray(T, float), np.asarray(op, float)
    if T.size < 4:
        raise ValueError("need at least four points")
    best = None
    for tb in np.linspace(T[1], T[-2], n_grid):
        A = np.column_stack([np.ones_like(T), np.minimum(T - tb, 0.0), np.maximum(T - tb, 0.0)])
        coef, *_ = np.linalg.lstsq(A, op, rcond=None)
        sse = float(np.sum((A @ coef - op) ** 2))
        if best is None or sse < best.sse:
            best = Transition(float(tb), float(coef[1]), float(coef[2]), sse)
    return best
