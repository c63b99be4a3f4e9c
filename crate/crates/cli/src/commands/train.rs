use std::fmt::Write as _;
use std::fs;

use anyhow::{bail, Context};
use log::info;
use pdr_core::features::{make_samples, TrainingSample};
use pdr_core::regression::{save_model, CascadeModel, TrainConfig, TrainReport};

use crate::config::{sidecar, RunConfig};
use crate::data::{self, sequence_files};
use crate::usage;

fn train_config(cfg: &RunConfig) -> TrainConfig {
    TrainConfig {
        kernel: cfg.kernel,
        gamma: cfg.gamma,
        classifier_c: cfg.classifier_c,
        pool_per_placement: cfg.pool,
        seed: cfg.seed(),
        grid_search: cfg.grid_search,
        folds: cfg.folds,
        ..TrainConfig::default()
    }
}

fn load_samples(cfg: &RunConfig) -> anyhow::Result<Vec<TrainingSample>> {
    let dir = cfg.data.as_ref().ok_or_else(|| usage("training needs --data DIR"))?;
    let mut samples = Vec::new();
    for path in sequence_files(dir)? {
        let seq = data::load(&path, cfg.sample_rate)?;
        if seq.placement.is_none() {
            bail!("{}: no placement label (expected a '# placement: leg|bag|hand|body' line)", path.display());
        }
        let s = make_samples(&seq, cfg.stride).with_context(|| format!("building features for {}", path.display()))?;
        info!("{}: {} samples", path.display(), s.len());
        samples.extend(s);
    }
    Ok(samples)
}

fn fit(cfg: &mut RunConfig) -> anyhow::Result<(CascadeModel, TrainReport)> {
    cfg.seed = Some(cfg.seed());
    let samples = load_samples(cfg)?;
    let (model, report) = CascadeModel::train(&samples, &train_config(cfg))?;
    Ok((model, report))
}

pub fn report_table(report: &TrainReport) -> String {
    let mut out = format!(
        "classifier accuracy {:.1}% over {} samples ({} pooled)\n{:<9} {:<4} {:>8} {:>8} {:>8} {:>10} {:>10}\n",
        100.0 * report.classifier_accuracy,
        report.samples,
        report.pooled,
        "placement",
        "axis",
        "C",
        "epsilon",
        "support",
        "train MSE",
        "CV MSE"
    );
    for r in &report.regressors {
        let cv = r.cv_mse.map_or_else(|| "-".to_string(), |m| format!("{m:.5}"));
        let _ = writeln!(
            out,
            "{:<9} {:<4} {:>8} {:>8} {:>8} {:>10.5} {:>10}",
            r.placement, r.axis, r.hyperparams.c, r.hyperparams.epsilon, r.support, r.train_mse, cv
        );
    }
    out
}

pub fn run(cfg: &mut RunConfig) -> anyhow::Result<()> {
    let out = cfg.out.clone().ok_or_else(|| usage("train needs --out MODEL"))?;
    let (model, report) = fit(cfg)?;
    save_model(&model, &out)?;
    let report_path = sidecar(&out, "report.toml");
    fs::write(&report_path, toml::to_string(&report)?).with_context(|| format!("writing {}", report_path.display()))?;
    cfg.write(&sidecar(&out, "config.toml"))?;
    print!("{}", report_table(&report));
    println!("model written to {}", out.display());
    Ok(())
}

/// Grid search only: every cell's cross-validated MSE per placement and axis.
pub fn gridsearch(cfg: &mut RunConfig) -> anyhow::Result<()> {
    let out = cfg.out.clone().ok_or_else(|| usage("gridsearch needs --out CSV"))?;
    cfg.grid_search = true;
    let (_, report) = fit(cfg)?;
    let mut csv = String::from("placement,axis,C,epsilon,cv_mse,selected\n");
    for r in &report.regressors {
        let grid = r.grid.as_ref().context("grid search produced no table")?;
        for cell in &grid.cells {
            let _ = writeln!(
                csv,
                "{},{},{},{},{:.6},{}",
                r.placement,
                r.axis,
                cell.hp.c,
                cell.hp.epsilon,
                cell.mse,
                u8::from(cell.hp == grid.best)
            );
        }
    }
    fs::write(&out, csv).with_context(|| format!("writing {}", out.display()))?;
    cfg.write(&sidecar(&out, "config.toml"))?;
    print!("{}", report_table(&report));
    println!("grid written to {}", out.display());
    Ok(())
}
