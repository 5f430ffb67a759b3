//! Images plus a prompt manifest to feature records, via the toy encoder.
//!
//! Manifest columns: `id,generator,prompt,file,q_v,q_a,q_c`. `file` is
//! relative to the image directory; an empty label cell means unlabelled.

use std::path::Path;

use amff::dataio::{Dataset, FeatureBundle, Labels, Sample};
use amff::encoder::{read_pnm, toy_encode, toy_encode_text, MultiScaleImage};
use amff::Error;
use rayon::prelude::*;
use serde::Deserialize;

use crate::error::CliResult;

#[derive(Debug, Deserialize)]
struct Row {
    id: String,
    generator: String,
    prompt: String,
    file: String,
    q_v: Option<f64>,
    q_a: Option<f64>,
    q_c: Option<f64>,
}

fn read_manifest(path: &Path) -> CliResult<Vec<Row>> {
    let mut reader = csv::Reader::from_path(path).map_err(Error::from)?;
    let mut rows = Vec::new();
    for (i, row) in reader.deserialize().enumerate() {
        let row: Row = row.map_err(|e| Error::Format {
            index: i,
            reason: format!("manifest {}: {e}", path.display()),
        })?;
        rows.push(row);
    }
    Ok(rows)
}

fn encode(row: &Row, images: &Path, dim: usize) -> amff::Result<Sample> {
    let img = read_pnm(&images.join(&row.file))?;
    let feats = toy_encode(&MultiScaleImage::from_image(img)?, dim)?;
    Ok(Sample {
        id: row.id.clone(),
        prompt: row.prompt.clone(),
        generator_id: row.generator.clone(),
        features: FeatureBundle::new(toy_encode_text(&row.prompt, dim)?, feats.f_05, feats.f_10, feats.f_15)?,
        labels: Labels {
            q_v: row.q_v,
            q_a: row.q_a,
            q_c: row.q_c,
        },
    })
}

pub fn extract(images: &Path, manifest: &Path, dim: usize) -> CliResult<Dataset> {
    let rows = read_manifest(manifest)?;
    let samples = rows
        .par_iter()
        .map(|row| encode(row, images, dim))
        .collect::<amff::Result<Vec<_>>>()?;
    Ok(Dataset::new(samples)?)
}
