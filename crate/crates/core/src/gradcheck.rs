//! Finite-difference verification of every hand-written gradient, on small
//! random problems.

use serde::Serialize;

use crate::aff::{aff_backward, aff_forward, AffParams};
use crate::dataio::FeatureBundle;
use crate::error::Result;
use crate::losses::{fidelity_loss, mse_loss, BatchScores};
use crate::scoring::{similarity_score, AblationFlags, ModelParams, Similarity};
use crate::tensor::{dot, finite_diff_check, ParamBlocks, SeededRng, DEFAULT_EPS};
use crate::trainer::{batch_gradient, BatchTargets};

pub const TOLERANCE: f64 = 1e-4;
pub const DEFAULT_SEEDS: [u64; 3] = [0, 1, 2];

const DIM: usize = 12;
const AFF_HIDDEN: usize = 10;
const BATCH: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradcheckEntry {
    pub component: &'static str,
    pub block: String,
    pub seed: u64,
    pub size: usize,
    pub max_rel_err: f64,
}

impl GradcheckEntry {
    pub fn passed(&self) -> bool {
        self.max_rel_err < TOLERANCE
    }
}

fn randn(rng: &mut SeededRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.normal()).collect()
}

fn entry(component: &'static str, block: impl Into<String>, seed: u64, size: usize, max_rel_err: f64) -> GradcheckEntry {
    GradcheckEntry {
        component,
        block: block.into(),
        seed,
        size,
        max_rel_err,
    }
}

/// Runs every check for each seed.
pub fn gradcheck_suite(seeds: &[u64]) -> Result<Vec<GradcheckEntry>> {
    let mut out = Vec::new();
    for &seed in seeds {
        let mut rng = SeededRng::new(seed);
        check_aff(&mut rng, seed, &mut out)?;
        check_model(&mut rng, seed, &mut out)?;
        check_similarity(&mut rng, seed, &mut out)?;
        check_losses(&mut rng, seed, &mut out)?;
    }
    Ok(out)
}

/// The fusion block alone, under the scalar objective `r . fused`.
fn check_aff(rng: &mut SeededRng, seed: u64, out: &mut Vec<GradcheckEntry>) -> Result<()> {
    let p = AffParams::init(DIM, AFF_HIDDEN, rng);
    let inputs = [randn(rng, DIM), randn(rng, DIM), randn(rng, DIM)];
    let r = randn(rng, DIM);
    let objective = |p: &AffParams, i: &[Vec<f64>; 3]| -> f64 {
        let (fused, _) = aff_forward(&i[0], &i[1], &i[2], p).expect("shapes are fixed");
        dot(&r, &fused)
    };
    let (_, cache) = aff_forward(&inputs[0], &inputs[1], &inputs[2], &p)?;
    let g = aff_backward(&cache, &p, &r)?;

    let analytic = g.params.blocks();
    for (b, (name, x)) in p.blocks().into_iter().enumerate() {
        let err = finite_diff_check(
            |v| {
                let mut q = p.clone();
                q.blocks_mut()[b].1.copy_from_slice(v);
                objective(&q, &inputs)
            },
            x,
            analytic[b].1,
            DEFAULT_EPS,
        )?;
        out.push(entry("aff", name, seed, x.len(), err));
    }
    for (k, (name, d)) in [("aff.f_05", &g.d_05), ("aff.f_10", &g.d_10), ("aff.f_15", &g.d_15)].into_iter().enumerate() {
        let err = finite_diff_check(
            |v| {
                let mut i = inputs.clone();
                i[k].copy_from_slice(v);
                objective(&p, &i)
            },
            &inputs[k],
            d,
            DEFAULT_EPS,
        )?;
        out.push(entry("aff", name, seed, DIM, err));
    }
    Ok(())
}

/// Whole model under the training objective: both heads, the fusion block
/// and the cosine consistency score, through fidelity and MSE losses.
fn check_model(rng: &mut SeededRng, seed: u64, out: &mut Vec<GradcheckEntry>) -> Result<()> {
    let p = ModelParams::init(DIM, AFF_HIDDEN, Similarity::Cosine, rng);
    let bundles: Vec<FeatureBundle> = (0..BATCH)
        .map(|_| FeatureBundle::new(randn(rng, DIM), randn(rng, DIM), randn(rng, DIM), randn(rng, DIM)))
        .collect::<Result<_>>()?;
    let features: Vec<&FeatureBundle> = bundles.iter().collect();
    let targets = BatchTargets {
        q_c: Some((0..BATCH).map(|_| rng.uniform(0.0, 1.0)).collect()),
        q_v: Some((0..BATCH).map(|_| rng.uniform(0.0, 1.0)).collect()),
        q_a: Some((0..BATCH).map(|_| rng.uniform(0.0, 1.0)).collect()),
    };
    let flags = AblationFlags::default();
    let (_, grads) = batch_gradient(&p, flags, &features, &targets)?;
    let analytic = grads.blocks();
    for (b, (name, x)) in p.blocks().into_iter().enumerate() {
        let err = finite_diff_check(
            |v| {
                let mut q = p.clone();
                q.blocks_mut()[b].1.copy_from_slice(v);
                batch_gradient(&q, flags, &features, &targets).expect("shapes are fixed").0.total
            },
            x,
            analytic[b].1,
            DEFAULT_EPS,
        )?;
        let component = if name.starts_with("head_") { "heads" } else { "model" };
        out.push(entry(component, name, seed, x.len(), err));
    }
    Ok(())
}

fn check_similarity(rng: &mut SeededRng, seed: u64, out: &mut Vec<GradcheckEntry>) -> Result<()> {
    let img = randn(rng, DIM);
    let text = randn(rng, DIM);
    for kind in Similarity::ALL {
        let (_, g) = similarity_score(&img, &text, kind)?;
        let err = finite_diff_check(
            |v| similarity_score(v, &text, kind).expect("shapes are fixed").0,
            &img,
            &g,
            DEFAULT_EPS,
        )?;
        out.push(entry("similarity", kind.name(), seed, DIM, err));
    }
    Ok(())
}

fn check_losses(rng: &mut SeededRng, seed: u64, out: &mut Vec<GradcheckEntry>) -> Result<()> {
    let n = 5;
    let preds = randn(rng, n);
    let gts = randn(rng, n);
    type LossFn = fn(&BatchScores) -> Result<(f64, Vec<f64>)>;
    for (name, f) in [("fidelity", fidelity_loss as LossFn), ("mse", mse_loss as LossFn)] {
        let (_, g) = f(&BatchScores::new(preds.clone(), gts.clone())?)?;
        let err = finite_diff_check(
            |v| f(&BatchScores::new(v.to_vec(), gts.clone()).expect("finite")).expect("n >= 2").0,
            &preds,
            &g,
            DEFAULT_EPS,
        )?;
        out.push(entry("loss", name, seed, n, err));
    }
    Ok(())
}
