use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use pdr_core::integrator::{run_offline, run_online, OnlineConfig};
use pdr_core::regression::{load_model, CascadeModel, VelocityRegressor};
use pdr_core::Sequence;

use crate::config::{sidecar, RunConfig};
use crate::data;
use crate::usage;

/// Loads the model at `path`; a missing file is a usage error.
pub fn model(path: Option<&PathBuf>) -> anyhow::Result<CascadeModel> {
    let path = path.ok_or_else(|| usage("needs --model FILE"))?;
    if !path.is_file() {
        return Err(usage(format!("{}: model file not found", path.display())));
    }
    load_model(path).with_context(|| format!("loading {}", path.display()))
}

pub fn existing(path: Option<&PathBuf>, flag: &str) -> anyhow::Result<PathBuf> {
    let path = path.ok_or_else(|| usage(format!("needs --{flag} PATH")))?;
    if !path.exists() {
        return Err(usage(format!("{}: no such file or directory", path.display())));
    }
    Ok(path.clone())
}

pub fn check_rate(seq: &Sequence, model: &dyn VelocityRegressor, path: &Path) -> anyhow::Result<()> {
    if (seq.sample_rate() - model.sample_rate()).abs() > 1e-9 {
        bail!(
            "{}: sequence is sampled at {} Hz but the model expects {} Hz",
            path.display(),
            seq.sample_rate(),
            model.sample_rate()
        );
    }
    Ok(())
}

pub fn run(cfg: &mut RunConfig) -> anyhow::Result<()> {
    let model = model(cfg.model.as_ref())?;
    let input = existing(cfg.input.as_ref(), "input")?;
    let out = cfg.out.clone().ok_or_else(|| usage("run needs --out CSV"))?;
    if cfg.online && cfg.lambda <= 0.0 {
        return Err(usage("online mode needs a positive lambda"));
    }
    let seq = data::load(&input, cfg.sample_rate)?;
    check_rate(&seq, &model, &input)?;

    let end = if cfg.online {
        let online = OnlineConfig {
            lambda: cfg.lambda,
            ..OnlineConfig::default()
        };
        let (res, speed) = run_online(&seq, Arc::new(model), &online)?;
        res.trajectory.write_csv(&out)?;
        let refined = sidecar(&out, "refined.csv");
        res.refined.write_csv(&refined)?;
        println!(
            "online: {} frames, {} corrections, {:.0} frames/s ({:.0}x real time)",
            speed.frames, res.corrections, speed.frames_per_second, speed.realtime_factor
        );
        println!("refined history written to {}", refined.display());
        res.final_position()
    } else {
        let res = run_offline(&seq, &model, cfg.lambda)?;
        res.trajectory.write_csv(&out)?;
        res.trajectory.last_position()
    };
    cfg.write(&sidecar(&out, "config.toml"))?;
    if let Some(p) = end {
        println!("final position x={:.3} z={:.3} m", p.x(), p.z());
    }
    println!("trajectory written to {}", out.display());
    Ok(())
}
