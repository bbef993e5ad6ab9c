"""Time stepping for the truncated stochastic Burgers dynamics.

The mild-form step treats the linear part exactly.  Over a jump-free substep
of length h the update per mode k (rate alpha_k = (pi k)^2) is

    a_k  <-  e^(-alpha_k h) a_k
           + phi_k(h) [B(x) + compensator]_k
           + e^(-alpha_k h) beta_k sqrt(h) xi_k,

with phi_k(h) = (1 - e^(-alpha_k h)) / alpha_k, the exact integral of the
semigroup against a drift held constant on the substep.  Holding the drift
constant is the only discretisation: with the advection term off and a
state-independent jump direction the scheme reproduces the closed-form
piecewise mild solution to roundoff, which the tests exploit as an oracle.

Jump events are placed at their exact sampled times by splitting the
enclosing step at each event; the displacement G(x-) u is applied to the
pre-event state.  Event times and marks are drawn up front from a dedicated
stream, so the Gaussian stream ordering never depends on where events land.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .spectral import SpectralField, mode_rates, _quadratic_term
from .noise import GaussianSpec, JumpSpec, sample_jump_times

__all__ = [
    "BlowUpError",
    "BlowUp",
    "SimConfig",
    "JumpEvent",
    "Trajectory",
    "step",
    "simulate",
    "ensemble",
    "derive_seed",
]

BLOWUP_NORM = 1e6


class BlowUpError(RuntimeError):
    """Trajectory norm left the trust region; carries time and norm."""

    def __init__(self, time: float, norm: float):
        super().__init__(f"||x||_H = {norm:.3e} at t = {time:.6g} "
                         f"exceeds {BLOWUP_NORM:.0e}")
        self.time = time
        self.norm = norm


@dataclass(frozen=True)
class BlowUp:
    """Per-trajectory blow-up record returned by ensemble runs."""

    index: int
    time: float
    norm: float


@dataclass(frozen=True)
class JumpEvent:
    time: float
    mark: float
    pre_norm_h: float


@dataclass(frozen=True)
class SimConfig:
    """Model and discretisation parameters for one trajectory.

    t_end must be an integer multiple of dt_save, and dt_save of dt.
    x0 = None starts from the zero field.
    """

    n_modes: int = 32
    dt: float = 1e-3
    t_end: float = 1.0
    dt_save: float = 1e-2
    gaussian: GaussianSpec | None = None
    jumps: JumpSpec | None = None
    nonlinearity_on: bool = True
    seed: int = 0
    x0: SpectralField | None = None

    def __post_init__(self):
        if self.n_modes < 1:
            raise ValueError("n_modes must be >= 1")
        if not (0 < self.dt <= self.dt_save <= self.t_end):
            raise ValueError("need 0 < dt <= dt_save <= t_end")
        if not _is_multiple(self.dt_save, self.dt):
            raise ValueError("dt_save must be an integer multiple of dt")
        if not _is_multiple(self.t_end, self.dt_save):
            raise ValueError("t_end must be an integer multiple of dt_save")
        if self.gaussian is not None and self.gaussian.n_modes != self.n_modes:
            raise ValueError("gaussian spec length does not match n_modes")
        if self.x0 is not None and self.x0.n_modes != self.n_modes:
            raise ValueError("x0 length does not match n_modes")


def _is_multiple(big: float, small: float) -> bool:
    r = big / small
    return abs(r - round(r)) < 1e-9 * max(1.0, abs(r))


@dataclass(frozen=True)
class Trajectory:
    """Snapshots of one simulated path on the uniform save grid."""

    times: np.ndarray            # (n_snap,)
    coeffs: np.ndarray           # (n_snap, n_modes)
    jump_log: tuple              # JumpEvent records in time order
    seed: int
    config: SimConfig = field(repr=False)

    @property
    def n_snapshots(self) -> int:
        return self.times.size

    @property
    def n_modes(self) -> int:
        return self.coeffs.shape[1]

    def state(self, i: int) -> SpectralField:
        return SpectralField(self.coeffs[i])

    def norm_h(self) -> np.ndarray:
        return np.sqrt(np.sum(self.coeffs ** 2, axis=1))

    def norm_v(self) -> np.ndarray:
        rates = mode_rates(self.n_modes)
        return np.sqrt(self.coeffs ** 2 @ rates)


class _Kernel:
    """Precomputed per-config arrays for the inner loop."""

    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        self.alpha = mode_rates(cfg.n_modes)
        self.decay_dt = np.exp(-self.alpha * cfg.dt)
        self.phi_dt = (1.0 - self.decay_dt) / self.alpha
        self.betas = cfg.gaussian.betas if cfg.gaussian is not None else None
        if self.betas is not None and not np.any(self.betas):
            self.betas = None
        jumps = cfg.jumps
        self.jumps = jumps
        if jumps is not None and jumps.direction.state_independent:
            g = jumps.direction.field_at(np.zeros(cfg.n_modes))
            if g.size != cfg.n_modes:
                raise ValueError("jump direction length does not match n_modes")
            self.const_compensator = -jumps.intensity * jumps.marks.mean * g
        else:
            self.const_compensator = None

    def drift(self, a: np.ndarray) -> np.ndarray | None:
        out = None
        if self.cfg.nonlinearity_on:
            out = _quadratic_term(a)
        if self.jumps is not None:
            comp = self.const_compensator
            if comp is None:
                g = self.jumps.direction.field_at(a)
                comp = -self.jumps.intensity * self.jumps.marks.mean * g
            out = comp if out is None else out + comp
        return out

    def substep(self, a: np.ndarray, h: float,
                rng: np.random.Generator) -> np.ndarray:
        if h == 0.0:
            return a
        if h == self.cfg.dt:
            decay, phi = self.decay_dt, self.phi_dt
        else:
            decay = np.exp(-self.alpha * h)
            phi = (1.0 - decay) / self.alpha
        d = self.drift(a)
        out = decay * a if d is None else decay * a + phi * d
        if self.betas is not None:
            out = out + decay * (self.betas * math.sqrt(h)
                                 * rng.standard_normal(a.size))
        return out


def step(x: SpectralField, dt: float, cfg: SimConfig,
         rng: np.random.Generator) -> SpectralField:
    """One jump-free mild-form step of length dt from state x.

    Inside simulate, steps containing events are split at each event time
    and the displacement is added there; a public step is always jump-free.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if x.n_modes != cfg.n_modes:
        raise ValueError("state length does not match config")
    kern = _Kernel(cfg)
    out = kern.substep(x.coeffs, float(dt), rng)
    return SpectralField(out)


def simulate(cfg: SimConfig) -> Trajectory:
    """Integrate one path on [0, t_end] and record the save-grid snapshots.

    Returns a Trajectory with snapshots every dt_save (including t = 0) and
    the full event log.  Raises BlowUpError if ||x||_H exceeds 1e6 or any
    coefficient stops being finite.
    """
    kern = _Kernel(cfg)
    n = cfg.n_modes
    root = np.random.SeedSequence(cfg.seed)
    jump_ss, wiener_ss = root.spawn(2)
    rng_w = np.random.default_rng(wiener_ss)

    if cfg.jumps is not None:
        events = sample_jump_times(cfg.jumps, cfg.t_end,
                                   np.random.default_rng(jump_ss))
    else:
        events = []

    n_steps = int(round(cfg.t_end / cfg.dt))
    save_every = int(round(cfg.dt_save / cfg.dt))
    n_saves = n_steps // save_every

    a = np.zeros(n) if cfg.x0 is None else cfg.x0.coeffs.copy()
    snaps = np.empty((n_saves + 1, n))
    snaps[0] = a
    log = []

    ev = 0
    n_events = len(events)
    for i in range(n_steps):
        t0 = i * cfg.dt
        t1 = (i + 1) * cfg.dt
        seg = t0
        while ev < n_events and events[ev][0] <= t1:
            t_ev, mark = events[ev]
            a = kern.substep(a, t_ev - seg, rng_w)
            pre_norm = float(np.sqrt(np.sum(a * a)))
            a = a + kern.jumps.direction.field_at(a) * mark
            log.append(JumpEvent(t_ev, mark, pre_norm))
            seg = t_ev
            ev += 1
        a = kern.substep(a, t1 - seg, rng_w)
        nrm = float(np.sqrt(np.sum(a * a)))
        if not np.isfinite(nrm) or nrm > BLOWUP_NORM:
            raise BlowUpError(t1, nrm)
        if (i + 1) % save_every == 0:
            snaps[(i + 1) // save_every] = a

    times = np.arange(n_saves + 1) * cfg.dt_save
    return Trajectory(times=times, coeffs=snaps, jump_log=tuple(log),
                      seed=cfg.seed, config=cfg)


def derive_seed(seed: int, index: int) -> int:
    """Stable per-trajectory sub-seed from (ensemble seed, index)."""
    ss = np.random.SeedSequence([int(seed), int(index)])
    return int(ss.generate_state(1, np.uint64)[0])


def _run_one(args):
    cfg, index, reducer = args
    sub = replace(cfg, seed=derive_seed(cfg.seed, index))
    try:
        traj = simulate(sub)
    except BlowUpError as e:
        return BlowUp(index=index, time=e.time, norm=e.norm)
    return reducer(traj)


def ensemble(cfg: SimConfig, n_traj: int, reducer, n_workers: int = 1) -> list:
    """Run n_traj independent trajectories and reduce each one.

    Trajectory i uses the sub-seed derive_seed(cfg.seed, i), so results are
    identical for any n_workers.  A trajectory that blows up contributes a
    BlowUp record at its index instead of a reducer value; siblings are
    unaffected.

    Parameters
    ----------
    reducer : callable Trajectory -> picklable value.  With n_workers > 1 it
        must be importable (module level) for the process pool.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    jobs = [(cfg, i, reducer) for i in range(n_traj)]
    if n_workers <= 1:
        return [_run_one(j) for j in jobs]
    from concurrent.futures import ProcessPoolExecutor
    with ProcessPoolExecutor(max_workers=n_workers) as ex:
        return list(ex.map(_run_one, jobs, chunksize=max(1, n_traj // (4 * n_workers))))
