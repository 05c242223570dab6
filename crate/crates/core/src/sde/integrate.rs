use rand::Rng;

use super::system::{PathSample, SlowFastSystem};
use crate::error::{Error, Result};
use crate::stable_noise::{IncrementSampler, StableSpec};

/// Knobs shared by every integrator.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    /// Drift vectors are clamped to this Euclidean norm.
    pub drift_cap: f64,
    /// Enforce `dt <= ε·min(0.1, 1/(2 Lip f))`.
    pub stability_guard: bool,
    /// Keep every `record_stride`-th point of the path (the final point is
    /// always kept).
    pub record_stride: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { drift_cap: 1e6, stability_guard: true, record_stride: 1 }
    }
}

/// Source of driving increments over a fixed step.
pub trait NoiseStream {
    fn dim(&self) -> usize;
    fn next_increment(&mut self, out: &mut [f64]) -> Result<()>;
}

/// Fresh exact α-stable increments.
pub struct StableStream<'r, R: Rng + ?Sized> {
    sampler: IncrementSampler,
    rng: &'r mut R,
}

impl<'r, R: Rng + ?Sized> StableStream<'r, R> {
    pub fn new(spec: StableSpec, dt: f64, rng: &'r mut R) -> Result<Self> {
        Ok(Self { sampler: IncrementSampler::new(spec, dt)?, rng })
    }
}

impl<R: Rng + ?Sized> NoiseStream for StableStream<'_, R> {
    fn dim(&self) -> usize {
        self.sampler.spec().dim
    }

    fn next_increment(&mut self, out: &mut [f64]) -> Result<()> {
        self.sampler.fill(self.rng, out);
        Ok(())
    }
}

/// Wraps a stream and keeps every increment it hands out.
pub struct RecordingStream<S> {
    inner: S,
    pub recorded: Vec<Vec<f64>>,
}

impl<S: NoiseStream> RecordingStream<S> {
    pub fn new(inner: S) -> Self {
        Self { inner, recorded: Vec::new() }
    }

    pub fn into_replay(self) -> ReplayStream {
        ReplayStream::new(self.recorded)
    }
}

impl<S: NoiseStream> NoiseStream for RecordingStream<S> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn next_increment(&mut self, out: &mut [f64]) -> Result<()> {
        self.inner.next_increment(out)?;
        self.recorded.push(out.to_vec());
        Ok(())
    }
}

/// Replays a fixed list of increments.
pub struct ReplayStream {
    increments: Vec<Vec<f64>>,
    pos: usize,
}

impl ReplayStream {
    pub fn new(increments: Vec<Vec<f64>>) -> Self {
        Self { increments, pos: 0 }
    }
}

impl NoiseStream for ReplayStream {
    fn dim(&self) -> usize {
        self.increments.first().map_or(0, |v| v.len())
    }

    fn next_increment(&mut self, out: &mut [f64]) -> Result<()> {
        let inc = self
            .increments
            .get(self.pos)
            .ok_or_else(|| Error::Config(format!("noise stream exhausted after {} increments", self.pos)))?;
        out.copy_from_slice(inc);
        self.pos += 1;
        Ok(())
    }
}

/// Uniform grid on `[0, t_end]` with step as close to `dt` as possible
/// without exceeding it.
pub fn time_steps(t_end: f64, dt: f64) -> Result<(usize, f64)> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Parameter(format!("dt must be positive, got {dt}")));
    }
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::Parameter(format!("horizon must be >= 0, got {t_end}")));
    }
    if t_end == 0.0 {
        return Ok((0, dt));
    }
    let ratio = t_end / dt;
    let n = if (ratio - ratio.round()).abs() < 1e-9 * ratio.max(1.0) { ratio.round() } else { ratio.ceil() };
    let n = (n as usize).max(1);
    Ok((n, t_end / n as f64))
}

/// Largest admissible step for the fast component at scale `epsilon`.
pub fn stability_limit(system: &SlowFastSystem, epsilon: f64) -> f64 {
    let lip = system.regularity.lip_f.unwrap_or(0.0);
    let by_lip = if lip > 0.0 { 1.0 / (2.0 * lip) } else { f64::INFINITY };
    epsilon * 0.1f64.min(by_lip)
}

fn check_step(system: &SlowFastSystem, dt: f64, epsilon: f64, cfg: &IntegratorConfig) -> Result<()> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::Parameter(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    if dt > epsilon * (1.0 + 1e-12) {
        return Err(Error::Config(format!("dt = {dt} exceeds epsilon = {epsilon}")));
    }
    let limit = stability_limit(system, epsilon);
    if cfg.stability_guard && dt > limit * (1.0 + 1e-9) {
        return Err(Error::Config(format!(
            "dt = {dt} above the stability limit {limit} (disable the guard to override)"
        )));
    }
    Ok(())
}

/// Clamp `v` to norm `cap`; true if clamped.
#[inline]
pub(crate) fn clamp_norm(v: &mut [f64], cap: f64) -> bool {
    let n2: f64 = v.iter().map(|x| x * x).sum();
    if n2 > cap * cap {
        let s = cap / n2.sqrt();
        v.iter_mut().for_each(|x| *x *= s);
        true
    } else {
        false
    }
}

/// `out += scale · M v` for row-major square `M`.
#[inline]
pub(crate) fn add_matvec(out: &mut [f64], m: &[f64], v: &[f64], scale: f64) {
    let d = v.len();
    for (i, o) in out.iter_mut().enumerate() {
        let row = &m[i * d..(i + 1) * d];
        *o += scale * row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// One explicit Euler step of the slow-fast pair with supplied increments.
/// Holds scratch buffers so inner loops do not allocate.
pub struct SlowFastStepper<'s> {
    system: &'s SlowFastSystem,
    dt: f64,
    epsilon: f64,
    fast_noise_scale: f64,
    cap: f64,
    bx: Vec<f64>,
    m1: Vec<f64>,
    fy: Vec<f64>,
    m2: Vec<f64>,
    pub clipped: u64,
}

impl<'s> SlowFastStepper<'s> {
    pub fn new(system: &'s SlowFastSystem, dt: f64, epsilon: f64, cap: f64) -> Self {
        Self {
            system,
            dt,
            epsilon,
            fast_noise_scale: epsilon.powf(-1.0 / system.alpha2),
            cap,
            bx: vec![0.0; system.d1],
            m1: vec![0.0; system.d1 * system.d1],
            fy: vec![0.0; system.d2],
            m2: vec![0.0; system.d2 * system.d2],
            clipped: 0,
        }
    }

    #[inline]
    pub fn advance(&mut self, t: f64, x: &mut [f64], y: &mut [f64], dl1: &[f64], dl2: &[f64]) {
        let s = self.system;
        (s.b)(t, x, y, &mut self.bx);
        s.delta1.eval(t, x, y, &mut self.m1);
        (s.f)(x, y, &mut self.fy);
        (s.delta2)(x, y, &mut self.m2);
        let c1 = clamp_norm(&mut self.bx, self.cap);
        let c2 = clamp_norm(&mut self.fy, self.cap);
        if c1 || c2 {
            self.clipped += 1;
        }
        for (xi, bi) in x.iter_mut().zip(&self.bx) {
            *xi += bi * self.dt;
        }
        add_matvec(x, &self.m1, dl1, 1.0);
        let fast_dt = self.dt / self.epsilon;
        for (yi, fi) in y.iter_mut().zip(&self.fy) {
            *yi += fi * fast_dt;
        }
        add_matvec(y, &self.m2, dl2, self.fast_noise_scale);
    }
}

/// Euler step of the frozen equation `dY = f(x,Y)dt + δ₂(x,Y)dL²`.
pub struct FrozenStepper<'s> {
    system: &'s SlowFastSystem,
    dt: f64,
    cap: f64,
    fy: Vec<f64>,
    m2: Vec<f64>,
    pub clipped: u64,
}

impl<'s> FrozenStepper<'s> {
    pub fn new(system: &'s SlowFastSystem, dt: f64, cap: f64) -> Self {
        Self { system, dt, cap, fy: vec![0.0; system.d2], m2: vec![0.0; system.d2 * system.d2], clipped: 0 }
    }

    #[inline]
    pub fn advance(&mut self, x: &[f64], y: &mut [f64], dl2: &[f64]) {
        (self.system.f)(x, y, &mut self.fy);
        (self.system.delta2)(x, y, &mut self.m2);
        if clamp_norm(&mut self.fy, self.cap) {
            self.clipped += 1;
        }
        for (yi, fi) in y.iter_mut().zip(&self.fy) {
            *yi += fi * self.dt;
        }
        add_matvec(y, &self.m2, dl2, 1.0);
    }
}

/// `(t, x, out)` coefficient of the averaged equation.
pub type AveragedFn<'a> = &'a (dyn Fn(f64, &[f64], &mut [f64]) + Sync);

/// Euler step of `dX̄ = b̄(t,X̄)dt + δ̄₁(t,X̄)dL¹`.
pub struct AveragedStepper<'a> {
    b_bar: AveragedFn<'a>,
    delta1_bar: AveragedFn<'a>,
    dt: f64,
    cap: f64,
    bx: Vec<f64>,
    m1: Vec<f64>,
    pub clipped: u64,
}

impl<'a> AveragedStepper<'a> {
    pub fn new(d1: usize, b_bar: AveragedFn<'a>, delta1_bar: AveragedFn<'a>, dt: f64, cap: f64) -> Self {
        Self { b_bar, delta1_bar, dt, cap, bx: vec![0.0; d1], m1: vec![0.0; d1 * d1], clipped: 0 }
    }

    #[inline]
    pub fn advance(&mut self, t: f64, x: &mut [f64], dl1: &[f64]) {
        (self.b_bar)(t, x, &mut self.bx);
        (self.delta1_bar)(t, x, &mut self.m1);
        if clamp_norm(&mut self.bx, self.cap) {
            self.clipped += 1;
        }
        for (xi, bi) in x.iter_mut().zip(&self.bx) {
            *xi += bi * self.dt;
        }
        add_matvec(x, &self.m1, dl1, 1.0);
    }
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// State `(t, x, y)` of the slow-fast pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SlowFastState {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

fn noise_specs(system: &SlowFastSystem) -> Result<(StableSpec, StableSpec)> {
    let s1 = StableSpec::new(system.alpha1, system.d1, 1.0)?;
    let s2 = StableSpec::new(system.alpha2, system.d2, 1.0)?;
    s1.validate_for_simulation()?;
    s2.validate_for_simulation()?;
    Ok((s1, s2))
}

/// Single Euler step `(t, x, y) → (t+dt, x', y')` with fresh increments.
pub fn step_slow_fast<R: Rng + ?Sized>(
    system: &SlowFastSystem,
    state: &SlowFastState,
    dt: f64,
    epsilon: f64,
    rng: &mut R,
) -> Result<SlowFastState> {
    system.validate()?;
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::Parameter(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    let (s1, s2) = noise_specs(system)?;
    let (l1, l2) = (IncrementSampler::new(s1, dt)?, IncrementSampler::new(s2, dt)?);
    let mut dl1 = vec![0.0; system.d1];
    let mut dl2 = vec![0.0; system.d2];
    l1.fill(rng, &mut dl1);
    l2.fill(rng, &mut dl2);
    let mut next = state.clone();
    SlowFastStepper::new(system, dt, epsilon, IntegratorConfig::default().drift_cap).advance(
        state.t,
        &mut next.x,
        &mut next.y,
        &dl1,
        &dl2,
    );
    next.t += dt;
    if !all_finite(&next.x) || !all_finite(&next.y) {
        return Err(Error::Divergence { step: 0 });
    }
    Ok(next)
}

/// Slow-fast path on `[0, t_end]` with fresh increments from `rng`
/// (`L¹` drawn before `L²` at every step).
#[allow(clippy::too_many_arguments)]
pub fn simulate_slow_fast<R: Rng + ?Sized>(
    system: &SlowFastSystem,
    x0: &[f64],
    y0: &[f64],
    t_end: f64,
    dt: f64,
    epsilon: f64,
    rng: &mut R,
    cfg: &IntegratorConfig,
) -> Result<PathSample> {
    let (s1, s2) = noise_specs(system)?;
    let (_, h) = time_steps(t_end, dt)?;
    let l1 = IncrementSampler::new(s1, h)?;
    let l2 = IncrementSampler::new(s2, h)?;
    let mut joint = JointStream { l1, l2, rng };
    simulate_slow_fast_with(system, x0, y0, t_end, dt, epsilon, &mut joint, cfg)
}

/// Draws `(ΔL¹, ΔL²)` in a fixed order from one generator.
struct JointStream<'r, R: Rng + ?Sized> {
    l1: IncrementSampler,
    l2: IncrementSampler,
    rng: &'r mut R,
}

/// Slow-fast path with increments from caller-supplied streams. `noise`
/// yields `ΔL¹` and `ΔL²` alternately through [`PairedNoise`].
#[allow(clippy::too_many_arguments)]
pub fn simulate_slow_fast_with(
    system: &SlowFastSystem,
    x0: &[f64],
    y0: &[f64],
    t_end: f64,
    dt: f64,
    epsilon: f64,
    noise: &mut dyn PairedNoise,
    cfg: &IntegratorConfig,
) -> Result<PathSample> {
    system.validate()?;
    check_step(system, dt, epsilon, cfg)?;
    if x0.len() != system.d1 || y0.len() != system.d2 {
        return Err(Error::Parameter("initial state has wrong dimension".into()));
    }
    let (n, h) = time_steps(t_end, dt)?;
    let stride = cfg.record_stride.max(1);
    let mut stepper = SlowFastStepper::new(system, h, epsilon, cfg.drift_cap);
    let (mut x, mut y) = (x0.to_vec(), y0.to_vec());
    let mut dl1 = vec![0.0; system.d1];
    let mut dl2 = vec![0.0; system.d2];
    let mut path = PathSample {
        times: vec![0.0],
        x_path: vec![x.clone()],
        y_path: vec![y.clone()],
        seed: 0,
        clipped_steps: 0,
    };
    for k in 0..n {
        let t = k as f64 * h;
        noise.next_pair(&mut dl1, &mut dl2)?;
        stepper.advance(t, &mut x, &mut y, &dl1, &dl2);
        if !all_finite(&x) || !all_finite(&y) {
            return Err(Error::Divergence { step: k + 1 });
        }
        if (k + 1) % stride == 0 || k + 1 == n {
            path.times.push((k + 1) as f64 * h);
            path.x_path.push(x.clone());
            path.y_path.push(y.clone());
        }
    }
    path.clipped_steps = stepper.clipped;
    Ok(path)
}

/// Pair of driving streams for the slow-fast system.
pub trait PairedNoise {
    fn next_pair(&mut self, dl1: &mut [f64], dl2: &mut [f64]) -> Result<()>;
}

impl<R: Rng + ?Sized> PairedNoise for JointStream<'_, R> {
    fn next_pair(&mut self, dl1: &mut [f64], dl2: &mut [f64]) -> Result<()> {
        self.l1.fill(self.rng, dl1);
        self.l2.fill(self.rng, dl2);
        Ok(())
    }
}

/// Two independent [`NoiseStream`]s used as a pair.
pub struct SplitNoise<'a> {
    pub slow: &'a mut dyn NoiseStream,
    pub fast: &'a mut dyn NoiseStream,
}

impl PairedNoise for SplitNoise<'_> {
    fn next_pair(&mut self, dl1: &mut [f64], dl2: &mut [f64]) -> Result<()> {
        self.slow.next_increment(dl1)?;
        self.fast.next_increment(dl2)
    }
}

/// Frozen path `dY = f(x,Y)dt + δ₂(x,Y)dL²` with `x` held fixed.
#[allow(clippy::too_many_arguments)]
pub fn simulate_frozen<R: Rng + ?Sized>(
    system: &SlowFastSystem,
    x: &[f64],
    y0: &[f64],
    t_end: f64,
    dt: f64,
    rng: &mut R,
    cfg: &IntegratorConfig,
) -> Result<PathSample> {
    system.validate()?;
    let (_, s2) = noise_specs(system)?;
    let (_, h) = time_steps(t_end, dt)?;
    let mut stream = StableStream::new(s2, h, rng)?;
    simulate_frozen_with(system, x, y0, t_end, dt, &mut stream, cfg)
}

/// Frozen path driven by a caller-supplied stream (synchronous coupling of
/// several starting points uses a shared replay).
pub fn simulate_frozen_with(
    system: &SlowFastSystem,
    x: &[f64],
    y0: &[f64],
    t_end: f64,
    dt: f64,
    noise: &mut dyn NoiseStream,
    cfg: &IntegratorConfig,
) -> Result<PathSample> {
    system.validate()?;
    check_step(system, dt, 1.0, cfg)?;
    if x.len() != system.d1 || y0.len() != system.d2 {
        return Err(Error::Parameter("frozen parameter or initial state has wrong dimension".into()));
    }
    let (n, h) = time_steps(t_end, dt)?;
    let stride = cfg.record_stride.max(1);
    let mut stepper = FrozenStepper::new(system, h, cfg.drift_cap);
    let mut y = y0.to_vec();
    let mut dl2 = vec![0.0; system.d2];
    let mut path = PathSample { times: vec![0.0], x_path: Vec::new(), y_path: vec![y.clone()], seed: 0, clipped_steps: 0 };
    for k in 0..n {
        noise.next_increment(&mut dl2)?;
        stepper.advance(x, &mut y, &dl2);
        if !all_finite(&y) {
            return Err(Error::Divergence { step: k + 1 });
        }
        if (k + 1) % stride == 0 || k + 1 == n {
            path.times.push((k + 1) as f64 * h);
            path.y_path.push(y.clone());
        }
    }
    path.clipped_steps = stepper.clipped;
    Ok(path)
}

/// Averaged path `dX̄ = b̄(t,X̄)dt + δ̄₁(t,X̄)dL¹`. Supplying the same `L¹`
/// stream as a slow-fast run couples the two pathwise.
#[allow(clippy::too_many_arguments)]
pub fn simulate_averaged(
    x0: &[f64],
    t_end: f64,
    dt: f64,
    b_bar: AveragedFn<'_>,
    delta1_bar: AveragedFn<'_>,
    alpha1: f64,
    noise: &mut dyn NoiseStream,
    cfg: &IntegratorConfig,
) -> Result<PathSample> {
    StableSpec::new(alpha1, x0.len().max(1), 1.0)?.validate_for_simulation()?;
    if noise.dim() != x0.len() {
        return Err(Error::Parameter(format!(
            "noise stream dimension {} does not match state dimension {}",
            noise.dim(),
            x0.len()
        )));
    }
    let (n, h) = time_steps(t_end, dt)?;
    let stride = cfg.record_stride.max(1);
    let mut stepper = AveragedStepper::new(x0.len(), b_bar, delta1_bar, h, cfg.drift_cap);
    let mut x = x0.to_vec();
    let mut dl1 = vec![0.0; x0.len()];
    let mut path = PathSample { times: vec![0.0], x_path: vec![x.clone()], y_path: Vec::new(), seed: 0, clipped_steps: 0 };
    for k in 0..n {
        let t = k as f64 * h;
        noise.next_increment(&mut dl1)?;
        stepper.advance(t, &mut x, &dl1);
        if !all_finite(&x) {
            return Err(Error::Divergence { step: k + 1 });
        }
        if (k + 1) % stride == 0 || k + 1 == n {
            path.times.push((k + 1) as f64 * h);
            path.x_path.push(x.clone());
        }
    }
    path.clipped_steps = stepper.clipped;
    Ok(path)
}
