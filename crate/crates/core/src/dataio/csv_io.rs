//! CSV alternative to the binary records:
//! `id,generator,prompt,q_v,q_a,q_c,ftext_0..,f05_0..,f10_0..,f15_0..`,
//! empty cell = absent label.

use std::path::Path;

use super::{Dataset, FeatureBundle, Labels, Sample};
use crate::error::{Error, Result};

const BLOCKS: [&str; 4] = ["ftext", "f05", "f10", "f15"];

pub fn write_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let dim = dataset.dim();
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = ["id", "generator", "prompt", "q_v", "q_a", "q_c"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for block in BLOCKS {
        header.extend((0..dim).map(|i| format!("{block}_{i}")));
    }
    w.write_record(&header)?;

    let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for s in dataset.samples() {
        let mut row = vec![
            s.id.clone(),
            s.generator_id.clone(),
            s.prompt.clone(),
            cell(s.labels.q_v),
            cell(s.labels.q_a),
            cell(s.labels.q_c),
        ];
        let f = &s.features;
        for v in [&f.f_text, &f.f_05, &f.f_10, &f.f_15] {
            row.extend(v.iter().map(|x| x.to_string()));
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<Dataset> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    if header.len() < 10 || (header.len() - 6) % 4 != 0 {
        return Err(Error::Header(format!("unexpected column count {}", header.len())));
    }
    if &header[0] != "id" || &header[3] != "q_v" || &header[5] != "q_c" {
        return Err(Error::Header("unexpected header".into()));
    }
    let dim = (header.len() - 6) / 4;
    for (b, block) in BLOCKS.iter().enumerate() {
        if header[6 + b * dim] != format!("{block}_0") {
            return Err(Error::Header(format!("expected column {block}_0")));
        }
    }

    let mut samples = Vec::new();
    for (index, rec) in r.records().enumerate() {
        let rec = rec?;
        let num = |s: &str| -> Result<f64> {
            let v: f64 = s.trim().parse().map_err(|_| Error::Format {
                index,
                reason: format!("not a number: {s:?}"),
            })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Format {
                    index,
                    reason: "non-finite value".into(),
                })
            }
        };
        let label = |s: &str| -> Result<Option<f64>> {
            if s.trim().is_empty() {
                Ok(None)
            } else {
                num(s).map(Some)
            }
        };
        let block = |b: usize| -> Result<Vec<f64>> {
            (0..dim).map(|i| num(&rec[6 + b * dim + i])).collect()
        };
        samples.push(Sample {
            id: rec[0].to_string(),
            generator_id: rec[1].to_string(),
            prompt: rec[2].to_string(),
            labels: Labels {
                q_v: label(&rec[3])?,
                q_a: label(&rec[4])?,
                q_c: label(&rec[5])?,
            },
            features: FeatureBundle {
                f_text: block(0)?,
                f_05: block(1)?,
                f_10: block(2)?,
                f_15: block(3)?,
            },
        });
    }
    Dataset::new(samples)
}
