use pdr_core::correction::{knot_frames, CorrectionKnots, Constraint, CorrectionProblem, ResidualMode};
use pdr_core::eval::{evaluate_sequence, Baseline};
use pdr_core::features::make_samples;
use pdr_core::integrator::{run_offline, OfflineConfig};
use pdr_core::regression::{load_model, save_model, CascadeModel, TrainConfig};
use pdr_core::synth::suite::{random_script, training_scripts, ScriptMix};
use pdr_core::synth::{synthesize, NoiseSpec, SynthManifest};
use pdr_core::{Placement, Vec3};
use nalgebra::Vector3;
use proptest::prelude::*;

#[test]
fn synthesized_walks_train_and_reconstruct() {
    let manifest = SynthManifest::new(11, NoiseSpec::default(), training_scripts(8, 20.0, 11));
    let mut samples = Vec::new();
    for rec in manifest.synthesize().unwrap() {
        samples.extend(make_samples(&rec.sequence, 10).unwrap());
    }
    let cfg = TrainConfig {
        pool_per_placement: 200,
        ..TrainConfig::default()
    };
    let (model, report) = CascadeModel::train(&samples, &cfg).unwrap();
    assert!(report.classifier_accuracy > 0.8, "{}", report.classifier_accuracy);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.pdr");
    save_model(&model, &path).unwrap();
    let loaded = load_model(&path).unwrap();
    assert_eq!(model.predict(&samples[0].feature).unwrap(), loaded.predict(&samples[0].feature).unwrap());

    let test = synthesize(
        &random_script("held-out", Placement::Hand, 40.0, &ScriptMix::default(), 99),
        &NoiseSpec::default().with_seed(99),
    )
    .unwrap()
    .sequence;
    let out = run_offline(&test, &loaded, 0.1).unwrap();
    assert_eq!(out.trajectory.len(), test.len());
    let res = evaluate_sequence(&test, &loaded, &[Baseline::Ridi, Baseline::Raw], &OfflineConfig::default()).unwrap();
    let (ridi, raw) = (res[0].0.ratio, res[1].0.ratio);
    assert!(ridi < 0.1, "RIDI {ridi}");
    assert!(raw > ridi, "RAW {raw} vs RIDI {ridi}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// The solved knots minimize the objective: any perturbation raises it.
    #[test]
    fn solution_is_a_minimum(seed in 0u64..1000, lambda in 1e-3f64..10.0, dir in prop::array::uniform3(-1.0f64..1.0)) {
        let seq = synthesize(
            &random_script("min", Placement::Bag, 12.0, &ScriptMix::default(), seed),
            &NoiseSpec::default().with_seed(seed),
        )
        .unwrap()
        .sequence;
        let frames = &seq.frames()[..800];
        let constraints = (1..8)
            .map(|k| Constraint { frame: 100 * k, velocity: Vec3::new(0.5, 0.0, -0.2 * k as f64) })
            .collect();
        let p = CorrectionProblem::from_frames(
            frames, 0, seq.dt(), Vector3::zeros(), constraints, knot_frames(800, 50), lambda, ResidualMode::Full3D,
        )
        .unwrap();
        let best = p.solve().unwrap();
        let f0 = p.objective(&best).unwrap();
        let mut values = best.values().to_vec();
        let k = values.len() / 2;
        values[k] = Vec3::from_raw(values[k].raw() + Vector3::from(dir) * 1e-3);
        let moved = CorrectionKnots::new(best.frames().to_vec(), values).unwrap();
        prop_assert!(p.objective(&moved).unwrap() >= f0 - 1e-12 * f0.max(1.0));
    }
}
