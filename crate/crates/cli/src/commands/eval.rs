use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use pdr_core::eval::{
    evaluate_sequence, evaluate_trajectory, lambda_sweep, overlay_svg, report_csv, report_table, Baseline, EvalReport,
    ReportRow,
};
use pdr_core::integrator::{OfflineConfig, Trajectory};

use super::run::{check_rate, existing, model};
use crate::config::RunConfig;
use crate::data;
use crate::usage;

/// Frames a trajectory may differ from its ground truth by; the longer one is cut.
pub const LENGTH_TOLERANCE: usize = 2;

pub fn run(cfg: &mut RunConfig) -> anyhow::Result<()> {
    match (&cfg.trajectory, &cfg.model) {
        (Some(_), Some(_)) => Err(usage("give either --trajectory or --model, not both")),
        (None, None) => Err(usage(
            "eval needs --trajectory FILE --ground-truth FILE, or --model FILE --input PATH",
        )),
        (Some(_), None) => compare(cfg),
        (None, Some(_)) => pipeline(cfg),
    }
}

fn truncate(t: &mut Trajectory, n: usize) {
    t.timestamps.truncate(n);
    t.positions.truncate(n);
    t.velocities.truncate(n);
}

fn compare(cfg: &mut RunConfig) -> anyhow::Result<()> {
    let traj_path = existing(cfg.trajectory.as_ref(), "trajectory")?;
    let gt_path = existing(cfg.ground_truth.as_ref(), "ground-truth")?;
    let mut traj = Trajectory::read_csv(&traj_path).with_context(|| format!("reading {}", traj_path.display()))?;
    let mut gt = data::ground_truth(&gt_path, cfg.sample_rate)?;
    if traj.len().abs_diff(gt.len()) > LENGTH_TOLERANCE {
        bail!(
            "{} has {} frames but the ground truth {} has {}",
            traj_path.display(),
            traj.len(),
            gt_path.display(),
            gt.len()
        );
    }
    let n = traj.len().min(gt.len());
    truncate(&mut traj, n);
    truncate(&mut gt, n);
    let report = evaluate_trajectory(&traj, &gt, &data::stem(&traj_path))?;
    let rows = vec![ReportRow {
        sequence: data::stem(&gt_path),
        report,
    }];
    print!("{}", report_table(&rows));
    if let Some(out) = cfg.out.clone() {
        let t = rows[0].report.transform;
        let svg = overlay_svg(&rows[0].sequence, &gt, &[(rows[0].report.baseline.as_str(), &traj, t)]);
        write_outputs(cfg, &out, &rows, &[(rows[0].sequence.clone(), svg)], None)?;
    }
    Ok(())
}

/// RIDI first, then the requested baselines in canonical order.
fn methods(cfg: &RunConfig) -> Vec<Baseline> {
    Baseline::ALL
        .into_iter()
        .filter(|b| *b == Baseline::Ridi || cfg.baselines.contains(b))
        .collect()
}

fn pipeline(cfg: &mut RunConfig) -> anyhow::Result<()> {
    let model = model(cfg.model.as_ref())?;
    let input = existing(cfg.input.as_ref(), "input")?;
    let methods = methods(cfg);
    let offline = OfflineConfig {
        lambda: cfg.lambda,
        ..OfflineConfig::default()
    };
    let mut rows = Vec::new();
    let mut plots = Vec::new();
    let mut sweep: Vec<(String, Vec<(f64, EvalReport)>)> = Vec::new();
    for path in data::inputs(&input)? {
        let name = data::stem(&path);
        let seq = data::load(&path, cfg.sample_rate)?;
        check_rate(&seq, &model, &path)?;
        if !seq.has_ground_truth() {
            bail!("{}: sequence has no ground-truth positions", path.display());
        }
        let results = evaluate_sequence(&seq, &model, &methods, &offline).with_context(|| format!("evaluating {name}"))?;
        if cfg.out.is_some() {
            let gt = Trajectory::ground_truth(&seq).expect("checked above");
            let est: Vec<_> = results.iter().map(|(r, t)| (r.baseline.as_str(), t, r.transform)).collect();
            plots.push((name.clone(), overlay_svg(&name, &gt, &est)));
        }
        rows.extend(results.into_iter().map(|(report, _)| ReportRow {
            sequence: name.clone(),
            report,
        }));
        if !cfg.lambda_sweep.is_empty() {
            let s = lambda_sweep(&seq, &model, &cfg.lambda_sweep).with_context(|| format!("sweeping {name}"))?;
            sweep.push((name, s));
        }
    }
    print!("{}", report_table(&rows));
    print!("{}", mean_table(&rows, &methods));
    if !sweep.is_empty() {
        print!("{}", sweep_table(&cfg.lambda_sweep, &sweep));
    }
    if let Some(out) = cfg.out.clone() {
        let sweep = (!sweep.is_empty()).then_some(sweep.as_slice());
        write_outputs(cfg, &out, &rows, &plots, sweep)?;
    }
    Ok(())
}

/// Mean MPE ratio per method over all sequences.
fn mean_table(rows: &[ReportRow], methods: &[Baseline]) -> String {
    let mut out = String::from("mean MPE (%)");
    for m in methods {
        let r: Vec<f64> = rows.iter().filter(|r| r.report.baseline == m.name()).map(|r| r.report.ratio).collect();
        if !r.is_empty() {
            let _ = write!(out, "  {}: {:.2}", m, 100.0 * r.iter().sum::<f64>() / r.len() as f64);
        }
    }
    out.push('\n');
    out
}

/// One column per λ, one row per sequence plus the mean, MPE in percent.
pub fn sweep_table(lambdas: &[f64], sweep: &[(String, Vec<(f64, EvalReport)>)]) -> String {
    let width = sweep.iter().map(|(n, _)| n.len()).max().unwrap_or(4).max(6);
    let mut out = format!("{:<width$}", "λ");
    for l in lambdas {
        let _ = write!(out, " {:>9}", format!("{l:e}"));
    }
    out.push('\n');
    let mut sums = vec![0.0; lambdas.len()];
    for (name, reports) in sweep {
        let _ = write!(out, "{name:<width$}");
        for (i, (_, r)) in reports.iter().enumerate() {
            sums[i] += r.ratio;
            let _ = write!(out, " {:>8.2}%", 100.0 * r.ratio);
        }
        out.push('\n');
    }
    let _ = write!(out, "{:<width$}", "mean");
    for s in sums {
        let _ = write!(out, " {:>8.2}%", 100.0 * s / sweep.len() as f64);
    }
    out.push('\n');
    out
}

fn sweep_csv(sweep: &[(String, Vec<(f64, EvalReport)>)]) -> String {
    let mut out = String::from("sequence,lambda,mpe_m,mpe_ratio\n");
    for (name, reports) in sweep {
        for (l, r) in reports {
            let _ = writeln!(out, "{name},{l:e},{:.6},{:.6}", r.mpe, r.ratio);
        }
    }
    out
}

fn write_outputs(
    cfg: &RunConfig,
    out: &Path,
    rows: &[ReportRow],
    plots: &[(String, String)],
    sweep: Option<&[(String, Vec<(f64, EvalReport)>)]>,
) -> anyhow::Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let write = |name: &str, text: &str| -> anyhow::Result<PathBuf> {
        let p = out.join(name);
        fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?;
        Ok(p)
    };
    write("report.csv", &report_csv(rows))?;
    write("report.txt", &report_table(rows))?;
    for (name, svg) in plots {
        write(&format!("{name}.svg"), svg)?;
    }
    if let Some(s) = sweep {
        write("lambda_sweep.csv", &sweep_csv(s))?;
        write("lambda_sweep.txt", &sweep_table(&cfg.lambda_sweep, s))?;
    }
    cfg.write(&out.join("config.toml"))?;
    println!("report written to {}", out.display());
    Ok(())
}
