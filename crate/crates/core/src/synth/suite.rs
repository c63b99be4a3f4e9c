//! Seeded script generators for training and evaluation suites.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::sequence::Placement;

use super::script::{MotionScript, Segment};

/// Which motions a random script may contain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScriptMix {
    /// Start facing forward, sideways or backward at random.
    pub facing: bool,
    /// Exact initial facing, rad; overrides `facing` and the yaw offset.
    pub facing_angle: Option<f64>,
    /// Allow facing changes in the middle of the walk.
    pub face_changes: bool,
    /// Allow stops in the middle of the walk.
    pub stops: bool,
    /// Speed range for cruising segments, m/s.
    pub speed: (f64, f64),
    /// Random fixed yaw offset magnitude, rad.
    pub yaw_offset: f64,
}

impl Default for ScriptMix {
    fn default() -> Self {
        Self {
            facing: true,
            facing_angle: None,
            face_changes: false,
            stops: true,
            speed: (0.5, 2.0),
            yaw_offset: 0.5,
        }
    }
}

struct Builder {
    segments: Vec<Segment>,
    speed: f64,
    face: f64,
    elapsed: f64,
}

impl Builder {
    fn new() -> Self {
        Self {
            segments: Vec::new(),
            speed: 0.0,
            face: 0.0,
            elapsed: 0.0,
        }
    }

    fn push(&mut self, seg: Segment) {
        self.elapsed += seg.duration();
        match seg {
            Segment::Straight { speed, .. } => self.speed = speed,
            Segment::Pause { .. } => self.speed = 0.0,
            Segment::SpeedRamp { to, .. } => self.speed = to,
            Segment::Face { offset, .. } => self.face = offset,
            Segment::Turn { .. } => {}
        }
        self.segments.push(seg);
    }

    fn ramp_to(&mut self, to: f64, duration: f64) {
        self.push(Segment::SpeedRamp {
            from: self.speed,
            to,
            duration,
        });
    }

    fn cruise(&mut self, duration: f64) {
        if self.speed == 0.0 {
            self.push(Segment::Pause { duration });
        } else {
            self.push(Segment::Straight {
                speed: self.speed,
                duration,
            });
        }
    }

    /// Cuts the script at exactly `total` seconds.
    fn finish(mut self, total: f64) -> Vec<Segment> {
        while self.elapsed > total + 1e-9 {
            let last = self.segments.pop().expect("non-empty");
            let d = last.duration();
            self.elapsed -= d;
            let keep = total - self.elapsed;
            if keep > 1e-9 {
                // ramps keep their shape; a truncated ramp is replaced by cruising at its start speed
                let seg = match last {
                    Segment::Straight { speed, .. } => Segment::Straight { speed, duration: keep },
                    Segment::Turn { rate, .. } => Segment::Turn { rate, duration: keep },
                    Segment::Pause { .. } => Segment::Pause { duration: keep },
                    Segment::SpeedRamp { from, .. } if from == 0.0 => Segment::Pause { duration: keep },
                    Segment::SpeedRamp { from, .. } => Segment::Straight { speed: from, duration: keep },
                    Segment::Face { .. } => {
                        let speed = self.current_speed();
                        if speed == 0.0 {
                            Segment::Pause { duration: keep }
                        } else {
                            Segment::Straight { speed, duration: keep }
                        }
                    }
                };
                self.segments.push(seg);
                self.elapsed += keep;
            }
        }
        if self.elapsed < total - 1e-9 {
            let speed = self.current_speed();
            let d = total - self.elapsed;
            self.segments.push(if speed == 0.0 {
                Segment::Pause { duration: d }
            } else {
                Segment::Straight { speed, duration: d }
            });
        }
        self.segments
    }

    fn current_speed(&self) -> f64 {
        let mut s = 0.0;
        for seg in &self.segments {
            match *seg {
                Segment::Straight { speed, .. } => s = speed,
                Segment::Pause { .. } => s = 0.0,
                Segment::SpeedRamp { to, .. } => s = to,
                _ => {}
            }
        }
        s
    }
}

/// A random walk that starts from rest.
pub fn random_script(
    name: impl Into<String>,
    placement: Placement,
    duration: f64,
    mix: &ScriptMix,
    seed: u64,
) -> MotionScript {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = Builder::new();
    b.push(Segment::Pause {
        duration: rng.random_range(0.5..1.5),
    });
    let choices = [0.0, FRAC_PI_2, -FRAC_PI_2, PI];
    if let Some(offset) = mix.facing_angle {
        b.push(Segment::Face { offset, duration: 0.5 });
    } else if mix.facing {
        let offset = choices[rng.random_range(0..choices.len())] + rng.random_range(-0.3..0.3);
        b.push(Segment::Face { offset, duration: 0.5 });
    }
    let v = rng.random_range(mix.speed.0..=mix.speed.1);
    b.ramp_to(v, rng.random_range(1.5..3.0));
    while b.elapsed < duration {
        let roll: f64 = rng.random();
        if roll < 0.3 {
            b.cruise(rng.random_range(2.0..6.0));
        } else if roll < 0.55 {
            let rate = rng.random_range(0.3..0.9) * if rng.random::<bool>() { 1.0 } else { -1.0 };
            b.push(Segment::Turn {
                rate,
                duration: rng.random_range(1.5..4.0),
            });
        } else if roll < 0.75 {
            let v = rng.random_range(mix.speed.0..=mix.speed.1);
            b.ramp_to(v, rng.random_range(1.5..3.5));
        } else if roll < 0.9 && mix.face_changes {
            let target = choices[rng.random_range(0..choices.len())] + rng.random_range(-0.3..0.3);
            if (target - b.face).abs() > 0.2 {
                b.push(Segment::Face {
                    offset: target,
                    duration: rng.random_range(1.5..3.0),
                });
            }
        } else if mix.stops {
            b.ramp_to(0.0, rng.random_range(1.5..2.5));
            b.cruise(rng.random_range(1.0..3.0));
            let v = rng.random_range(mix.speed.0..=mix.speed.1);
            b.ramp_to(v, rng.random_range(1.5..3.0));
        }
    }
    let mut s = MotionScript::new(name, placement, b.finish(duration));
    let yaw = rng.random_range(-mix.yaw_offset..=mix.yaw_offset);
    if mix.facing_angle.is_none() {
        s.yaw_offset = yaw;
    }
    s
}

/// Holds slow (0.6 m/s) and fast (1.8 m/s) walking for several seconds each, with gentle turns.
pub fn speed_varying_script(name: impl Into<String>, placement: Placement, duration: f64, seed: u64) -> MotionScript {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = Builder::new();
    b.push(Segment::Pause { duration: 1.0 });
    b.ramp_to(0.6, 1.5);
    let mut fast = true;
    while b.elapsed < duration {
        if rng.random::<f64>() < 0.5 {
            let rate = rng.random_range(0.1..0.3) * if rng.random::<bool>() { 1.0 } else { -1.0 };
            b.push(Segment::Turn {
                rate,
                duration: rng.random_range(5.0..10.0),
            });
        } else {
            b.cruise(rng.random_range(5.0..10.0));
        }
        b.ramp_to(if fast { 1.8 } else { 0.6 }, rng.random_range(1.5..2.5));
        fast = !fast;
    }
    MotionScript::new(name, placement, b.finish(duration))
}

/// Walks forward for the first 12 s, then alternates backward and forward stretches.
pub fn backward_script(name: impl Into<String>, placement: Placement, duration: f64, seed: u64) -> MotionScript {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = Builder::new();
    b.push(Segment::Pause { duration: 1.0 });
    b.ramp_to(rng.random_range(0.8..1.2), 2.0);
    b.cruise(9.0);
    let mut backward = true;
    while b.elapsed < duration {
        b.push(Segment::Face {
            offset: if backward { PI } else { 0.0 },
            duration: 1.0,
        });
        let hold = if backward { rng.random_range(8.0..12.0) } else { rng.random_range(3.0..5.0) };
        let rate = rng.random_range(0.1..0.3) * if rng.random::<bool>() { 1.0 } else { -1.0 };
        b.push(Segment::Turn { rate, duration: hold });
        backward = !backward;
    }
    MotionScript::new(name, placement, b.finish(duration))
}

/// `per_placement` random scripts for each placement, seeds derived from `seed`.
/// Initial facings are spread evenly around the circle.
pub fn training_scripts(per_placement: usize, duration: f64, seed: u64) -> Vec<MotionScript> {
    let mut out = Vec::new();
    for p in Placement::ALL {
        for i in 0..per_placement {
            let s = seed
                .wrapping_mul(1_000_003)
                .wrapping_add((p.index() * 1000 + i) as u64);
            out.push(random_script(
                format!("train-{p}-{i}"),
                p,
                duration,
                &ScriptMix {
                    facing_angle: Some(TAU * (i as f64 + 0.5) / per_placement as f64 - PI),
                    ..ScriptMix::default()
                },
                s,
            ));
        }
    }
    out
}

/// Default training suite: scripts per placement and their length in seconds.
pub const TRAIN_PER_PLACEMENT: usize = 48;
pub const TRAIN_DURATION: f64 = 20.0;

/// Two 60 s random walks per placement.
pub fn evaluation_scripts(seed: u64) -> Vec<MotionScript> {
    evaluation_scripts_with(2, 60.0, seed)
}

pub fn evaluation_scripts_with(per_placement: usize, duration: f64, seed: u64) -> Vec<MotionScript> {
    let mut out = Vec::new();
    for p in Placement::ALL {
        for i in 0..per_placement {
            let s = seed
                .wrapping_mul(7_919)
                .wrapping_add(0xE0A1 + (p.index() * 10 + i) as u64);
            out.push(random_script(format!("eval-{p}-{i}"), p, duration, &ScriptMix::default(), s));
        }
    }
    out
}

/// Named script families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SuiteKind {
    Train,
    Eval,
    Speed,
    Backward,
}

impl SuiteKind {
    pub const ALL: [SuiteKind; 4] = [SuiteKind::Train, SuiteKind::Eval, SuiteKind::Speed, SuiteKind::Backward];

    pub fn name(self) -> &'static str {
        match self {
            SuiteKind::Train => "train",
            SuiteKind::Eval => "eval",
            SuiteKind::Speed => "speed",
            SuiteKind::Backward => "backward",
        }
    }

    /// `per_placement` scripts of `duration` seconds for every placement.
    /// Scripts per placement and seconds per script when not given.
    pub fn default_size(self) -> (usize, f64) {
        match self {
            SuiteKind::Train => (TRAIN_PER_PLACEMENT, TRAIN_DURATION),
            _ => (2, 60.0),
        }
    }

    pub fn scripts(self, per_placement: usize, duration: f64, seed: u64) -> Vec<MotionScript> {
        match self {
            SuiteKind::Train => training_scripts(per_placement, duration, seed),
            SuiteKind::Eval => evaluation_scripts_with(per_placement, duration, seed),
            SuiteKind::Speed | SuiteKind::Backward => {
                let mut out = Vec::new();
                for p in Placement::ALL {
                    for i in 0..per_placement {
                        let s = seed
                            .wrapping_mul(104_729)
                            .wrapping_add((p.index() * 1000 + i) as u64);
                        let name = format!("{}-{p}-{i}", self.name());
                        out.push(if self == SuiteKind::Speed {
                            speed_varying_script(name, p, duration, s)
                        } else {
                            backward_script(name, p, duration, s)
                        });
                    }
                }
                out
            }
        }
    }
}

impl fmt::Display for SuiteKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SuiteKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| format!("unknown suite {s:?} (expected train, eval, speed or backward)"))
    }
}
