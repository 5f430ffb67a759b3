use amff::dataio::{split_per_generator, split_random, synth_generate, synth_generate_with_latents, Dataset, SynthConfig, Task};
use amff::experiment::{split_dataset, SplitSpec};
use amff::tensor::{dot, norm2, SeededRng};

fn synth(n: usize, dim: usize, noise: f64, generators: usize, seed: u64) -> Dataset {
    let cfg = SynthConfig {
        n,
        dim,
        noise_sigma: noise,
        generators,
    };
    synth_generate(&cfg, &mut SeededRng::new(seed)).unwrap()
}

/// Ordinary least squares by normal equations and Gauss-Jordan elimination.
fn least_squares(rows: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let p = rows[0].len();
    let mut a = vec![vec![0.0; p + 1]; p];
    for (r, &t) in rows.iter().zip(y) {
        for i in 0..p {
            for j in 0..p {
                a[i][j] += r[i] * r[j];
            }
            a[i][p] += r[i] * t;
        }
    }
    for c in 0..p {
        let piv = (c..p).max_by(|&i, &j| a[i][c].abs().partial_cmp(&a[j][c].abs()).unwrap()).unwrap();
        a.swap(c, piv);
        for r in 0..p {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..=p {
                    a[r][k] -= f * a[c][k];
                }
            }
        }
    }
    (0..p).map(|i| a[i][p] / a[i][i]).collect()
}

#[test]
fn quality_is_linearly_recoverable() {
    let ds = synth(512, 64, 0.01, 4, 3);
    let rows: Vec<Vec<f64>> = ds
        .samples()
        .iter()
        .map(|s| {
            let mut r = s.features.f_10.clone();
            r.push(1.0);
            r
        })
        .collect();
    for task in [Task::Quality, Task::Authenticity] {
        let y: Vec<f64> = ds.samples().iter().map(|s| s.labels.get(task).unwrap()).collect();
        let beta = least_squares(&rows, &y);
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let ss_res: f64 = rows.iter().zip(&y).map(|(r, t)| (t - dot(r, &beta)).powi(2)).sum();
        let ss_tot: f64 = y.iter().map(|t| (t - mean).powi(2)).sum();
        let r2 = 1.0 - ss_res / ss_tot;
        assert!(r2 > 0.99, "{task}: R^2 {r2}");
    }
}

#[test]
fn latents_explain_quality_at_zero_noise() {
    let cfg = SynthConfig {
        n: 400,
        dim: 16,
        noise_sigma: 0.0,
        generators: 2,
    };
    let (ds, latents) = synth_generate_with_latents(&cfg, &mut SeededRng::new(21)).unwrap();
    let rows: Vec<Vec<f64>> = latents.iter().map(|z| z.iter().copied().chain([1.0]).collect()).collect();
    let y: Vec<f64> = ds.samples().iter().map(|s| s.labels.q_v.unwrap()).collect();
    let beta = least_squares(&rows, &y);
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_res: f64 = rows.iter().zip(&y).map(|(r, t)| (t - dot(r, &beta)).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|t| (t - mean).powi(2)).sum();
    assert!(1.0 - ss_res / ss_tot > 0.99);
}

#[test]
fn noiseless_labels_are_functions_of_features() {
    let cfg = SynthConfig {
        n: 64,
        dim: 32,
        noise_sigma: 0.0,
        generators: 2,
    };
    let (ds, latents) = synth_generate_with_latents(&cfg, &mut SeededRng::new(8)).unwrap();
    for s in ds.samples() {
        let f = &s.features;
        let cos = dot(&f.f_text, &f.f_10) / (norm2(&f.f_text) * norm2(&f.f_10));
        assert!((cos - s.labels.q_c.unwrap()).abs() < 1e-6);
        // the two side scales average back to the original one
        for i in 0..32 {
            let mean = (f.f_05[i] + f.f_15[i]) / 2.0;
            assert!((mean - f.f_10[i]).abs() < 1e-6);
        }
    }
    // identical latents give identical labels: labels depend on z alone
    let mut seen = std::collections::HashMap::new();
    for (s, z) in ds.samples().iter().zip(&latents) {
        let key: Vec<u64> = z.iter().map(|v| v.to_bits()).collect();
        let labels = (s.labels.q_v, s.labels.q_a);
        assert_eq!(*seen.entry(key).or_insert(labels), labels);
    }
    let norms: Vec<f64> = ds.samples().iter().map(|s| norm2(&s.features.f_10)).collect();
    let mean_norm = norms.iter().sum::<f64>() / norms.len() as f64;
    assert!(mean_norm > 0.5 && mean_norm < 2.0, "{mean_norm}");
}

#[test]
fn split_counts_match_protocol_sizes() {
    let big = synth(2982, 8, 0.01, 6, 1);
    let (tr, te) = split_random(&big, 0.8, &mut SeededRng::new(0)).unwrap();
    assert_eq!((tr.len(), te.len()), (2386, 596));

    let pku = synth(1600, 8, 0.01, 4, 2);
    let (tr, te) = split_per_generator(&pku, 0.75, &mut SeededRng::new(0)).unwrap();
    assert_eq!((tr.len(), te.len()), (1200, 400));
    for g in 0..4 {
        let name = format!("gen{g}");
        let count = |d: &Dataset| d.samples().iter().filter(|s| s.generator_id == name).count();
        assert_eq!((count(&tr), count(&te)), (300, 100));
    }

    let (tr, te) = split_dataset(&pku, SplitSpec::PerGenerator(0.75), 9).unwrap();
    assert_eq!((tr.len(), te.len()), (1200, 400));
}

#[test]
fn splits_partition_the_dataset() {
    let ds = synth(300, 8, 0.01, 3, 4);
    for spec in [SplitSpec::Random(0.8), SplitSpec::PerGenerator(0.75)] {
        let (tr, te) = split_dataset(&ds, spec, 5).unwrap();
        let mut ids: Vec<&str> = tr.samples().iter().chain(te.samples()).map(|s| s.id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), 300);
    }
}
