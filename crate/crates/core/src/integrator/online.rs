//! Streaming estimator: a correction worker thread refines the bias while
//! the caller's thread integrates frame by frame.

use std::collections::BTreeMap;
use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use nalgebra::Vector3;

use crate::correction::{
    knot_frames_between, solve_window, Constraint, CorrectionFilter, CorrectionKnots, CorrectionProblem,
    ResidualMode, DEFAULT_LAMBDA, KNOT_SPACING,
};
use crate::error::IntegratorError;
use crate::features::{stabilized_channels, window_feature, CHANNELS, FEATURE_DIM};
use crate::frame::{Vec3, World};
use crate::ingest::{GaussianKernel, SmoothingConfig};
use crate::integrator::trajectory::{step, IntegrationOptions, State, Trajectory};
use crate::regression::VelocityRegressor;
use crate::sequence::{SensorFrame, Sequence, WINDOW_FRAMES};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OnlineConfig {
    /// Frames between correction jobs.
    pub correction_period: usize,
    /// Frames covered by each job.
    pub correction_window: usize,
    /// Frames between velocity regressions.
    pub regression_stride: usize,
    pub knot_spacing: usize,
    /// Frames after submission at which a job's result is applied.
    pub publish_latency: usize,
    /// Frames over which the output moves onto a new estimate.
    pub blend_frames: usize,
    /// Knots averaged into the bias used past the newest constraint.
    pub hold_knots: usize,
    pub lambda: f64,
    pub mode: ResidualMode,
    pub sigma_imu: f64,
    /// Smooth features with a trailing half kernel so no frame waits on the future.
    pub causal_smoothing: bool,
    pub integration: IntegrationOptions,
}

impl Default for OnlineConfig {
    fn default() -> Self {
        Self {
            correction_period: 200,
            correction_window: 1000,
            regression_stride: 50,
            knot_spacing: KNOT_SPACING,
            publish_latency: 20,
            blend_frames: 50,
            hold_knots: 8,
            lambda: DEFAULT_LAMBDA,
            mode: ResidualMode::Full3D,
            sigma_imu: SmoothingConfig::default().sigma_imu,
            causal_smoothing: false,
            integration: IntegrationOptions::default(),
        }
    }
}

impl OnlineConfig {
    pub fn validate(&self) -> Result<(), IntegratorError> {
        let bad = |m: &str| Err(IntegratorError::Config(m.to_string()));
        if self.correction_period == 0 || self.regression_stride == 0 || self.knot_spacing == 0 {
            return bad("period, stride and knot spacing must be positive");
        }
        if self.correction_window < self.correction_period {
            return bad("correction window must be at least the correction period");
        }
        if !self.correction_window.is_multiple_of(self.knot_spacing) {
            return bad("correction window must be a multiple of the knot spacing");
        }
        if self.publish_latency >= self.correction_period {
            return bad("publish latency must be shorter than the correction period");
        }
        if self.blend_frames == 0 {
            return bad("blend length must be at least one frame");
        }
        if self.hold_knots == 0 {
            return bad("hold must average at least one knot");
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be finite and positive");
        }
        if !(self.sigma_imu > 0.0 && self.sigma_imu.is_finite()) {
            return bad("smoothing sigma must be positive");
        }
        Ok(())
    }
}

/// Output for one frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Emitted {
    pub timestamp: f64,
    pub position: Vec3<crate::frame::World>,
    pub velocity: Vec3<crate::frame::World>,
}

struct Job {
    /// Frame the worker's summary currently sits at; `frames[0]` is this frame.
    from: usize,
    start: usize,
    end: usize,
    frames: Vec<SensorFrame>,
    constraint_frames: Vec<usize>,
    raw_start: usize,
    raw: Vec<[f64; CHANNELS]>,
}

struct JobResult {
    knot_frames: Vec<usize>,
    values: Vec<Vector3<f64>>,
    /// World velocity at the window start implied by the solution.
    start_velocity: Vector3<f64>,
    /// Last constraint frame in the window.
    last_constraint: usize,
    regressions: usize,
}

struct Worker {
    model: Arc<dyn VelocityRegressor>,
    kernel: GaussianKernel,
    cfg: OnlineConfig,
    dt: f64,
    cache: BTreeMap<usize, Vec3<crate::frame::Stabilized>>,
    filter: CorrectionFilter,
}

impl Worker {
    fn feature(&self, raw: &[[f64; CHANNELS]], at: usize) -> Result<Vec<f64>, IntegratorError> {
        if self.cfg.causal_smoothing {
            let mut out = Vec::with_capacity(FEATURE_DIM);
            for j in at + 1 - WINDOW_FRAMES..=at {
                out.extend_from_slice(&self.kernel.smooth_causal_at(raw, j));
            }
            Ok(out)
        } else {
            Ok(window_feature(raw, &self.kernel, at)?)
        }
    }

    fn run(&mut self, job: Job) -> Result<JobResult, IntegratorError> {
        let mut regressions = 0;
        let mut constraints = Vec::with_capacity(job.constraint_frames.len());
        for &c in &job.constraint_frames {
            let v = match self.cache.get(&c) {
                Some(v) => *v,
                None => {
                    let feature = self.feature(&job.raw, c - job.raw_start)?;
                    let ([vx, vz], _) = self.model.predict(&feature)?;
                    regressions += 1;
                    let v = Vec3::new(vx, 0.0, vz);
                    self.cache.insert(c, v);
                    v
                }
            };
            constraints.push(Constraint { frame: c, velocity: v });
        }
        debug_assert_eq!(self.filter.frame(), job.from);
        self.filter.advance(&job.frames, job.start, &constraints)?;
        self.cache = self.cache.split_off(&(job.start + 1));
        let window: Vec<Constraint> = constraints.into_iter().filter(|c| c.frame > job.start).collect();
        let last_constraint = window.last().map_or(job.start, |c| c.frame);
        let problem = CorrectionProblem::from_frames(
            &job.frames[job.start - job.from..],
            job.start,
            self.dt,
            self.filter.raw_velocity(),
            window,
            knot_frames_between(job.start, job.end, self.cfg.knot_spacing),
            self.cfg.lambda,
            self.cfg.mode,
        )?;
        let sol = solve_window(&problem, self.filter.prior())?;
        Ok(JobResult {
            knot_frames: sol.knots.frames().to_vec(),
            values: sol.knots.values().iter().map(|v| *v.raw()).collect(),
            start_velocity: self.filter.raw_velocity() + sol.velocity_correction,
            last_constraint,
            regressions,
        })
    }
}

/// Incremental estimator. Feed frames with [`push`](Self::push), then call
/// [`finish`](Self::finish).
pub struct OnlineEstimator {
    cfg: OnlineConfig,
    dt: f64,
    radius: usize,
    frames: Vec<SensorFrame>,
    raw: Vec<[f64; CHANNELS]>,
    refined: Vec<State>,
    emitted: Trajectory,
    knot_values: Vec<Vector3<f64>>,
    solved_last: Option<usize>,
    /// Frames from here on reuse one bias value: knots past the last
    /// constraint carry no information.
    hold: Option<(usize, Vector3<f64>)>,
    offset: State,
    blend_left: usize,
    /// Output state just before the latest correction, emitted unchanged on the next frame.
    blend_from: Option<State>,
    last_sent: Option<usize>,
    summary_at: usize,
    pending: Option<(usize, usize)>,
    jobs: Sender<Job>,
    results: Receiver<Result<JobResult, IntegratorError>>,
    handle: Option<JoinHandle<()>>,
    regressions: usize,
    corrections: usize,
    worker_time: Duration,
}

impl OnlineEstimator {
    pub fn new(
        model: Arc<dyn VelocityRegressor>,
        sample_rate: f64,
        cfg: OnlineConfig,
    ) -> Result<Self, IntegratorError> {
        cfg.validate()?;
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(IntegratorError::Config("sample rate must be positive".into()));
        }
        let kernel = GaussianKernel::new(cfg.sigma_imu)
            .map_err(|e| IntegratorError::Config(e.to_string()))?;
        let radius = kernel.radius();
        let dt = 1.0 / sample_rate;
        let (job_tx, job_rx) = channel::<Job>();
        let (res_tx, res_rx) = channel();
        let mut worker = Worker {
            model,
            kernel,
            cfg,
            dt,
            cache: BTreeMap::new(),
            filter: CorrectionFilter::new(cfg.knot_spacing, cfg.lambda, cfg.mode, dt)?,
        };
        let handle = std::thread::Builder::new()
            .name("bias-correction".into())
            .spawn(move || {
                for job in job_rx {
                    if res_tx.send(worker.run(job)).is_err() {
                        break;
                    }
                }
            })
            .map_err(|_| IntegratorError::WorkerGone)?;
        Ok(Self {
            cfg,
            dt,
            radius,
            frames: Vec::new(),
            raw: Vec::new(),
            refined: vec![State::default()],
            emitted: Trajectory::default(),
            knot_values: Vec::new(),
            solved_last: None,
            hold: None,
            offset: State::default(),
            blend_left: 0,
            blend_from: None,
            last_sent: None,
            summary_at: 0,
            pending: None,
            jobs: job_tx,
            results: res_rx,
            handle: Some(handle),
            regressions: 0,
            corrections: 0,
            worker_time: Duration::ZERO,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Bias at frame `f` from the latest published knots.
    pub fn bias(&self, f: usize) -> Vector3<f64> {
        let Some(last) = self.solved_last else {
            return Vector3::zeros();
        };
        if let Some((from, v)) = self.hold {
            if f >= from {
                return v;
            }
        }
        let sp = self.cfg.knot_spacing;
        let k = f / sp;
        if k >= last {
            return self.knot_values[last];
        }
        let w = (f - k * sp) as f64 / sp as f64;
        if w == 0.0 {
            return self.knot_values[k];
        }
        self.knot_values[k] * (1.0 - w) + self.knot_values[k + 1] * w
    }

    /// Consumes one frame and returns the output state at that frame.
    pub fn push(&mut self, frame: SensorFrame) -> Result<Emitted, IntegratorError> {
        if let Some(prev) = self.frames.last() {
            if !(frame.timestamp > prev.timestamp) {
                return Err(IntegratorError::OutOfOrder {
                    previous: prev.timestamp,
                    got: frame.timestamp,
                });
            }
        }
        let f = self.frames.len();
        self.raw
            .push(stabilized_channels(&frame.gyro, &frame.linacc, &frame.gravity, f)?);
        self.frames.push(frame);

        if let Some((_, due)) = self.pending {
            if f >= due {
                self.apply_pending(true)?;
            }
        }

        let s = self.refined[f];
        let (p, v) = if let Some(b) = self.blend_from.take() {
            self.blend_left -= 1;
            (b.p, b.v)
        } else if self.blend_left > 0 {
            let w = self.blend_left as f64 / self.cfg.blend_frames as f64;
            self.blend_left -= 1;
            (s.p + self.offset.p * w, s.v + self.offset.v * w)
        } else {
            (s.p, s.v)
        };
        let out = Emitted {
            timestamp: frame.timestamp,
            position: Vec3::from_raw(p),
            velocity: Vec3::from_raw(v),
        };
        self.emitted.push(out.timestamp, out.position, out.velocity);

        let next = step(&s, &frame, &self.bias(f), self.dt, &self.cfg.integration);
        self.refined.push(next);

        let n = f + 1;
        if n.is_multiple_of(self.cfg.correction_period) {
            self.submit(n, false)?;
        }
        Ok(out)
    }

    fn window_start(&self, n: usize) -> usize {
        let sp = self.cfg.knot_spacing;
        n.saturating_sub(self.cfg.correction_window) / sp * sp
    }

    fn submit(&mut self, n: usize, final_flush: bool) -> Result<bool, IntegratorError> {
        let start = self.window_start(n);
        let stride = self.cfg.regression_stride;
        let first = WINDOW_FRAMES.div_ceil(stride) * stride;
        let ready = |c: usize| final_flush || self.cfg.causal_smoothing || c + self.radius < n;
        let from = self.summary_at;
        let constraint_frames: Vec<usize> = (first..n)
            .step_by(stride)
            .filter(|&c| c > from && ready(c))
            .collect();
        if !constraint_frames.iter().any(|&c| c > start) {
            return Ok(false);
        }
        let fresh: Vec<usize> = constraint_frames
            .iter()
            .copied()
            .filter(|&c| self.last_sent.is_none_or(|l| c > l))
            .collect();
        let raw_start = fresh
            .first()
            .map_or(n, |&c| (c + 1 - WINDOW_FRAMES).saturating_sub(self.radius));
        self.last_sent = constraint_frames.last().copied();
        let job = Job {
            from,
            start,
            end: n,
            frames: self.frames[from..n].to_vec(),
            constraint_frames,
            raw_start,
            raw: self.raw[raw_start..n].to_vec(),
        };
        self.jobs.send(job).map_err(|_| IntegratorError::WorkerGone)?;
        self.summary_at = start;
        self.pending = Some((start, n - 1 + self.cfg.publish_latency));
        Ok(true)
    }

    fn apply_pending(&mut self, hold: bool) -> Result<(), IntegratorError> {
        let Some((start, _)) = self.pending.take() else {
            return Ok(());
        };
        let waited = Instant::now();
        let res = self.results.recv().map_err(|_| IntegratorError::WorkerGone)??;
        self.worker_time += waited.elapsed();
        self.regressions += res.regressions;
        self.corrections += 1;

        let sp = self.cfg.knot_spacing;
        let last = *res.knot_frames.last().expect("non-empty knots") / sp;
        if self.knot_values.len() <= last {
            self.knot_values.resize(last + 1, Vector3::zeros());
        }
        for (&kf, v) in res.knot_frames.iter().zip(&res.values) {
            self.knot_values[kf / sp] = *v;
        }
        self.solved_last = Some(last);
        self.hold = None;
        if hold {
            let hi = (res.last_constraint / sp).saturating_sub(1).max(start / sp);
            let lo = (hi + 1).saturating_sub(self.cfg.hold_knots).max(start / sp);
            let v = (lo..=hi).map(|k| self.knot_values[k]).sum::<Vector3<f64>>() / (hi + 1 - lo) as f64;
            self.hold = Some((res.last_constraint, v));
        }

        // The next emitted frame is the last one received.
        let f = self.frames.len() - 1;
        let w = self.blend_left as f64 / self.cfg.blend_frames as f64;
        let old = self.refined[f];
        let before = State {
            p: old.p + self.offset.p * w,
            v: old.v + self.offset.v * w,
        };
        let mut v0 = res.start_velocity;
        if self.cfg.integration.zero_vertical {
            v0.y = 0.0;
        }
        self.refined[start].v = v0;
        for g in start..f {
            self.refined[g + 1] = step(
                &self.refined[g],
                &self.frames[g],
                &self.bias(g),
                self.dt,
                &self.cfg.integration,
            );
        }
        let new = self.refined[f];
        self.offset = State {
            p: before.p - new.p,
            v: before.v - new.v,
        };
        self.blend_left = self.cfg.blend_frames;
        self.blend_from = Some(before);
        Ok(())
    }

    /// Ends the stream: applies outstanding work and a final solve over the
    /// last window.
    pub fn finish(mut self) -> Result<OnlineResult, IntegratorError> {
        self.apply_pending(true)?;
        let n = self.frames.len();
        if n > 0 && self.submit(n, true)? {
            self.apply_pending(false)?;
            let g = n - 1;
            self.refined[n] = step(
                &self.refined[g],
                &self.frames[g],
                &self.bias(g),
                self.dt,
                &self.cfg.integration,
            );
        }
        let mut refined = Trajectory::with_capacity(n);
        for (fr, s) in self.frames.iter().zip(&self.refined) {
            refined.push(fr.timestamp, Vec3::from_raw(s.p), Vec3::from_raw(s.v));
        }
        let knots = match self.solved_last {
            Some(last) => CorrectionKnots::new(
                (0..=last).map(|k| k * self.cfg.knot_spacing).collect(),
                self.knot_values[..=last].iter().map(|v| Vec3::from_raw(*v)).collect(),
            )?,
            None => CorrectionKnots::zeros(n.max(1)),
        };
        Ok(OnlineResult {
            trajectory: std::mem::take(&mut self.emitted),
            refined,
            knots,
            regressions: self.regressions,
            corrections: self.corrections,
            worker_wait: self.worker_time,
        })
    }
}

impl Drop for OnlineEstimator {
    fn drop(&mut self) {
        let (tx, _) = channel();
        drop(std::mem::replace(&mut self.jobs, tx));
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

#[derive(Clone, Debug)]
pub struct OnlineResult {
    /// States as emitted while streaming.
    pub trajectory: Trajectory,
    /// History after the final correction.
    pub refined: Trajectory,
    pub knots: CorrectionKnots,
    /// Number of velocity regressions evaluated.
    pub regressions: usize,
    /// Number of correction results applied.
    pub corrections: usize,
    /// Time the integrating thread spent blocked on the worker.
    pub worker_wait: Duration,
}

impl OnlineResult {
    /// Position after the end-of-stream correction.
    pub fn final_position(&self) -> Option<Vec3<World>> {
        self.refined.last_position()
    }
}

/// Throughput of one streaming run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Throughput {
    pub frames: usize,
    pub elapsed: Duration,
    pub frames_per_second: f64,
    /// Real-time factor at the sequence's own rate.
    pub realtime_factor: f64,
}

/// Streams a recorded sequence through an [`OnlineEstimator`].
pub fn run_online(
    seq: &Sequence,
    model: Arc<dyn VelocityRegressor>,
    cfg: &OnlineConfig,
) -> Result<(OnlineResult, Throughput), IntegratorError> {
    if seq.len() < WINDOW_FRAMES {
        return Err(IntegratorError::TooShort {
            len: seq.len(),
            needed: WINDOW_FRAMES,
        });
    }
    let t0 = Instant::now();
    let mut est = OnlineEstimator::new(model, seq.sample_rate(), *cfg)?;
    for fr in seq.frames() {
        est.push(*fr)?;
    }
    let res = est.finish()?;
    let elapsed = t0.elapsed();
    let fps = seq.len() as f64 / elapsed.as_secs_f64().max(1e-9);
    Ok((
        res,
        Throughput {
            frames: seq.len(),
            elapsed,
            frames_per_second: fps,
            realtime_factor: fps / seq.sample_rate(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::RegressionError;
    use crate::sequence::Placement;
    use crate::synth::suite::{random_script, ScriptMix};
    use crate::synth::{synthesize, NoiseSpec};
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Mock {
        calls: AtomicUsize,
    }

    impl VelocityRegressor for Mock {
        fn predict(&self, feature: &[f64]) -> Result<([f64; 2], Placement), RegressionError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            let ax: f64 = feature.iter().skip(3).step_by(CHANNELS).sum::<f64>() / WINDOW_FRAMES as f64;
            Ok(([1.0 + 0.2 * ax, 0.1], Placement::Hand))
        }
    }

    /// Returns ground-truth velocity for features it has seen.
    struct Lookup {
        table: std::collections::HashMap<Vec<u64>, [f64; 2]>,
    }

    impl Lookup {
        fn new(seq: &Sequence) -> Self {
            let signals = crate::features::StabilizedSignals::compute(seq, 2.0).unwrap();
            let gt = crate::features::ground_truth_velocity(seq).unwrap();
            let table = (WINDOW_FRAMES - 1..seq.len())
                .map(|f| {
                    let key = signals.feature(f).unwrap().iter().map(|x| x.to_bits()).collect();
                    (key, gt[f])
                })
                .collect();
            Self { table }
        }
    }

    impl VelocityRegressor for Lookup {
        fn predict(&self, feature: &[f64]) -> Result<([f64; 2], Placement), RegressionError> {
            let key: Vec<u64> = feature.iter().map(|x| x.to_bits()).collect();
            Ok((self.table[&key], Placement::Hand))
        }
    }

    fn walk(secs: f64) -> Sequence {
        let script = random_script("w", Placement::Hand, secs, &ScriptMix::default(), 3);
        synthesize(&script, &NoiseSpec::default()).unwrap().sequence
    }

    #[test]
    fn regression_count_matches_constraint_grid() {
        let seq = walk(20.0);
        let mock = Arc::new(Mock { calls: AtomicUsize::new(0) });
        let (res, _) = run_online(&seq, mock.clone(), &OnlineConfig::default()).unwrap();
        let expected = (seq.len() - 200).div_ceil(50);
        assert_eq!(res.regressions, expected);
        assert_eq!(mock.calls.load(Ordering::SeqCst), expected);
        assert_eq!(res.trajectory.len(), seq.len());
    }

    #[test]
    fn runs_are_bit_identical() {
        let seq = walk(12.0);
        let run = || {
            let m = Arc::new(Mock { calls: AtomicUsize::new(0) });
            run_online(&seq, m, &OnlineConfig::default()).unwrap().0
        };
        let a = run();
        let b = run();
        assert_eq!(a.trajectory, b.trajectory);
        assert_eq!(a.refined, b.refined);
    }

    #[test]
    fn output_is_continuous() {
        let seq = walk(15.0);
        let m = Arc::new(Lookup::new(&seq));
        let (res, _) = run_online(&seq, m, &OnlineConfig::default()).unwrap();
        let dt = seq.dt();
        for w in res.trajectory.positions.windows(2) {
            assert!((w[1] - w[0]).norm() <= 5.0 * dt);
        }
    }

    #[test]
    fn rejects_out_of_order_frames() {
        let seq = walk(10.0);
        let m = Arc::new(Mock { calls: AtomicUsize::new(0) });
        let mut est = OnlineEstimator::new(m, 200.0, OnlineConfig::default()).unwrap();
        est.push(seq.frames()[1]).unwrap();
        let err = est.push(seq.frames()[0]).unwrap_err();
        assert!(matches!(err, IntegratorError::OutOfOrder { .. }));
    }

    #[test]
    fn rejects_bad_config() {
        let bad = [
            OnlineConfig { correction_window: 100, ..Default::default() },
            OnlineConfig { correction_window: 1010, ..Default::default() },
            OnlineConfig { publish_latency: 200, ..Default::default() },
            OnlineConfig { blend_frames: 0, ..Default::default() },
        ];
        for cfg in bad {
            assert!(matches!(cfg.validate(), Err(IntegratorError::Config(_))));
        }
    }

    #[test]
    fn before_first_correction_output_is_raw_integration() {
        let seq = walk(10.0);
        let m = Arc::new(Mock { calls: AtomicUsize::new(0) });
        let (res, _) = run_online(&seq, m, &OnlineConfig::default()).unwrap();
        let raw = crate::integrator::baseline_raw(&seq);
        for f in 0..=419 {
            assert_eq!(res.trajectory.positions[f], raw.positions[f]);
        }
        assert_ne!(res.trajectory.positions[421], raw.positions[421]);
    }
}
