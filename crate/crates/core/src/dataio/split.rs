use std::collections::HashMap;

use super::Dataset;
use crate::error::{Error, Result};
use crate::tensor::SeededRng;

/// `floor(fraction * n + 0.5)`.
pub fn round_half_up(fraction: f64, n: usize) -> usize {
    (fraction * n as f64 + 0.5).floor() as usize
}

fn check_fraction(train_fraction: f64) -> Result<()> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    Ok(())
}

/// Returns (train, test) index lists, both in ascending dataset order.
fn partition(indices: &mut [usize], train_fraction: f64, rng: &mut SeededRng, what: &str) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = indices.len();
    if n < 2 {
        return Err(Error::TooSmall(format!("{what} has {n} sample(s); need at least 2")));
    }
    let n_train = round_half_up(train_fraction, n);
    if n_train == 0 || n_train == n {
        return Err(Error::TooSmall(format!(
            "{what}: fraction {train_fraction} of {n} leaves an empty side"
        )));
    }
    rng.shuffle(indices);
    let mut train = indices[..n_train].to_vec();
    let mut test = indices[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Random train/test partition with `|train| = round_half_up(f * n)`.
pub fn split_random(dataset: &Dataset, train_fraction: f64, rng: &mut SeededRng) -> Result<(Dataset, Dataset)> {
    check_fraction(train_fraction)?;
    let mut idx: Vec<usize> = (0..dataset.len()).collect();
    let (train, test) = partition(&mut idx, train_fraction, rng, "dataset")?;
    Ok((dataset.subset(&train)?, dataset.subset(&test)?))
}

/// Applies the fraction independently inside every generator group. Groups
/// are visited in order of first appearance so the rng stream is stable.
pub fn split_per_generator(dataset: &Dataset, train_fraction: f64, rng: &mut SeededRng) -> Result<(Dataset, Dataset)> {
    check_fraction(train_fraction)?;
    let mut slot: HashMap<&str, usize> = HashMap::new();
    let mut groups: Vec<(&str, Vec<usize>)> = Vec::new();
    for (i, s) in dataset.samples().iter().enumerate() {
        if s.generator_id.is_empty() {
            return Err(Error::InvalidArgument(format!("sample {i} has no generator id")));
        }
        let k = *slot.entry(&s.generator_id).or_insert_with(|| {
            groups.push((&s.generator_id, Vec::new()));
            groups.len() - 1
        });
        groups[k].1.push(i);
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (name, mut members) in groups {
        let (tr, te) = partition(&mut members, train_fraction, rng, &format!("generator {name:?}"))?;
        train.extend(tr);
        test.extend(te);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((dataset.subset(&train)?, dataset.subset(&test)?))
}
