use amff::dataio::{synth_generate, Dataset, SynthConfig};
use amff::scoring::{ModelParams, Similarity};
use amff::tensor::{ParamBlocks, SeededRng};
use amff::trainer::{adamw_step, params_checksum, train, OptimizerState, TrainConfig};
use proptest::prelude::*;

fn small_params(seed: u64) -> ModelParams {
    ModelParams::init(8, 6, Similarity::Cosine, &mut SeededRng::new(seed))
}

fn planted(n: usize) -> Dataset {
    let cfg = SynthConfig {
        n,
        dim: 16,
        noise_sigma: 0.01,
        generators: 2,
    };
    synth_generate(&cfg, &mut SeededRng::new(42)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn checksum_changes_iff_gradient_or_decay(
        seed in 0u64..1000,
        block in 0usize..12,
        grad in prop_oneof![Just(0.0), -1.0f64..1.0],
        wd in prop_oneof![Just(0.0), 1e-3f64..1e-1],
    ) {
        let mut p = small_params(seed);
        let before = params_checksum(&p);
        let mut g = p.zeros_like();
        {
            let mut blocks = g.blocks_mut();
            let target = &mut blocks[block].1;
            target[0] = grad;
        }
        let mut state = OptimizerState::new(&p);
        adamw_step(&mut p, &g, &mut state, 1e-2, wd).unwrap();
        let changed = params_checksum(&p) != before;
        prop_assert_eq!(changed, grad != 0.0 || wd > 0.0);
    }
}

#[test]
fn identical_seeds_give_identical_reports() {
    let ds = planted(96);
    let cfg = TrainConfig {
        max_epochs: 4,
        aff_hidden: 16,
        seed: 5,
        ..TrainConfig::default()
    };
    let (_, a) = train(&ds, &cfg).unwrap();
    let (_, b) = train(&ds, &cfg).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());

    let (_, c) = train(&ds, &TrainConfig { seed: 6, ..cfg }).unwrap();
    assert_ne!(a.params_checksum, c.params_checksum);
}

#[test]
fn training_lowers_validation_error() {
    let ds = planted(256);
    let cfg = TrainConfig {
        max_epochs: 30,
        aff_hidden: 32,
        seed: 1,
        ..TrainConfig::default()
    };
    let (_, report) = train(&ds, &cfg).unwrap();
    let first = report.epochs.first().unwrap();
    let best = report.best_val_srcc;
    assert!(best >= first.val_mean_srcc);
    assert!(report.epochs.last().unwrap().loss < first.loss);
    assert!(best > 0.8, "{best}");
}
