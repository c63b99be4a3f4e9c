use std::fs;

use anyhow::Context;
use pdr_core::eval::path_length;
use pdr_core::ingest::write_sequence_csv;
use pdr_core::integrator::Trajectory;
use pdr_core::synth::{synthesize, write_bias_csv, NoiseSpec, SynthManifest};
use pdr_core::SAMPLE_RATE_HZ;

use crate::config::RunConfig;
use crate::usage;

pub fn run(cfg: &mut RunConfig) -> anyhow::Result<()> {
    let out = cfg.out.clone().ok_or_else(|| usage("synth needs --out DIR"))?;
    if cfg.sample_rate != SAMPLE_RATE_HZ {
        return Err(usage(format!("synthetic recordings are {SAMPLE_RATE_HZ} Hz; got sample_rate = {}", cfg.sample_rate)));
    }
    let manifest = match (&cfg.manifest, cfg.suite) {
        (Some(_), Some(_)) => return Err(usage("give either --manifest or --suite, not both")),
        (None, None) => return Err(usage("synth needs --manifest FILE or --suite NAME")),
        (Some(path), None) => {
            let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            let mut m: SynthManifest = toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            if let Some(seed) = cfg.seed {
                m.seed = seed;
            }
            m
        }
        (None, Some(kind)) => {
            let (per, duration) = kind.default_size();
            let per = cfg.per_placement.unwrap_or(per);
            let duration = cfg.duration.unwrap_or(duration);
            SynthManifest::new(cfg.seed(), NoiseSpec::default(), kind.scripts(per, duration, cfg.seed()))
        }
    };
    manifest.validate().map_err(usage)?;
    cfg.seed = Some(manifest.seed);

    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    for (i, script) in manifest.scripts.iter().enumerate() {
        let rec = synthesize(script, &manifest.noise_for(i)).with_context(|| format!("synthesizing {}", script.name))?;
        let seq = &rec.sequence;
        let path = out.join(format!("{}.csv", script.name));
        write_sequence_csv(seq, &path).with_context(|| format!("writing {}", path.display()))?;
        let bias_path = out.join(format!("{}.bias.csv", script.name));
        write_bias_csv(&bias_path, &seq.timestamps(), &rec.bias).with_context(|| format!("writing {}", bias_path.display()))?;
        let length = Trajectory::ground_truth(seq).map_or(0.0, |t| path_length(&t.planar()));
        println!("{:<24} {:<5} {:>7} frames {:>8.1} m", script.name, script.placement, seq.len(), length);
    }
    let manifest_path = out.join("manifest.toml");
    fs::write(&manifest_path, toml::to_string(&manifest)?).with_context(|| format!("writing {}", manifest_path.display()))?;
    cfg.write(&out.join("config.toml"))?;
    println!("wrote {} sequences to {}", manifest.scripts.len(), out.display());
    Ok(())
}
