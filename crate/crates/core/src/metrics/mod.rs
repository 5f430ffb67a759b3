//! Evaluation: rank and linear correlation, the logistic mapping used before
//! PLCC, median aggregation over trials, and report emitters.

mod correlation;
mod logistic;

pub use correlation::{fractional_ranks, krcc, pearson, srcc};
pub use logistic::{logistic_fit, plcc, LogisticFit, LogisticParams, MAX_ITERATIONS, REL_TOLERANCE};

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataio::Task;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskMetrics {
    pub task: Task,
    pub srcc: f64,
    pub plcc: f64,
    pub krcc: f64,
    pub n: usize,
    pub logistic: LogisticParams,
    pub logistic_fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalResult {
    pub tasks: Vec<TaskMetrics>,
}

impl EvalResult {
    pub fn get(&self, task: Task) -> Option<&TaskMetrics> {
        self.tasks.iter().find(|t| t.task == task)
    }

    pub fn mean_srcc(&self) -> Option<f64> {
        if self.tasks.is_empty() {
            return None;
        }
        Some(self.tasks.iter().map(|t| t.srcc).sum::<f64>() / self.tasks.len() as f64)
    }
}

/// Scores one task. Returns the metrics and the logistic-mapped predictions.
pub fn evaluate_task(task: Task, preds: &[f64], gts: &[f64]) -> Result<(TaskMetrics, Vec<f64>)> {
    let s = srcc(preds, gts)?;
    let k = krcc(preds, gts)?;
    let (p, fit) = plcc(preds, gts)?;
    let mapped = preds.iter().map(|&v| fit.map(v)).collect();
    Ok((
        TaskMetrics {
            task,
            srcc: s,
            plcc: p,
            krcc: k,
            n: preds.len(),
            logistic: fit.params,
            logistic_fallback: fit.fallback,
        },
        mapped,
    ))
}

/// Middle element, or the mean of the middle two for even counts.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("median of an empty list".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Ok(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / 2.0 })
}

/// Per-task, per-metric median across trials. Every trial must cover the
/// same tasks in the same order.
pub fn median_of_trials(results: &[EvalResult]) -> Result<EvalResult> {
    let first = results
        .first()
        .ok_or_else(|| Error::InvalidArgument("median_of_trials needs at least one trial".into()))?;
    for r in results {
        let same = r.tasks.len() == first.tasks.len() && r.tasks.iter().zip(&first.tasks).all(|(a, b)| a.task == b.task);
        if !same {
            return Err(Error::InvalidArgument("trials cover different tasks".into()));
        }
    }
    let mut tasks = Vec::with_capacity(first.tasks.len());
    for (i, t0) in first.tasks.iter().enumerate() {
        let col = |f: &dyn Fn(&TaskMetrics) -> f64| -> Result<f64> {
            median(&results.iter().map(|r| f(&r.tasks[i])).collect::<Vec<_>>())
        };
        tasks.push(TaskMetrics {
            task: t0.task,
            srcc: col(&|t| t.srcc)?,
            plcc: col(&|t| t.plcc)?,
            krcc: col(&|t| t.krcc)?,
            n: col(&|t| t.n as f64)?.round() as usize,
            logistic: LogisticParams {
                k1: col(&|t| t.logistic.k1)?,
                k2: col(&|t| t.logistic.k2)?,
                k3: col(&|t| t.logistic.k3)?,
                k4: col(&|t| t.logistic.k4)?,
            },
            logistic_fallback: results.iter().any(|r| r.tasks[i].logistic_fallback),
        });
    }
    Ok(EvalResult { tasks })
}

/// Aligned plain-text table, one row per task.
pub fn format_table(result: &EvalResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<14} {:>8} {:>8} {:>8} {:>6}", "task", "SRCC", "PLCC", "KRCC", "n");
    for t in &result.tasks {
        let _ = writeln!(
            out,
            "{:<14} {:>8.4} {:>8.4} {:>8.4} {:>6}",
            t.task.name(),
            t.srcc,
            t.plcc,
            t.krcc,
            t.n
        );
    }
    out
}

#[derive(Serialize)]
struct JsonLine<'a> {
    task: &'a str,
    srcc: f64,
    plcc: f64,
    krcc: f64,
    n: usize,
}

/// One JSON object per task: `{task, srcc, plcc, krcc, n}`.
pub fn format_jsonl(result: &EvalResult) -> Result<String> {
    let mut out = String::new();
    for t in &result.tasks {
        let line = serde_json::to_string(&JsonLine {
            task: t.task.name(),
            srcc: t.srcc,
            plcc: t.plcc,
            krcc: t.krcc,
            n: t.n,
        })?;
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}

/// Whitespace-separated `pred gt mapped_pred` lines for external plotting.
pub fn format_scatter(preds: &[f64], gts: &[f64], mapped: &[f64]) -> String {
    let mut out = String::from("# pred gt mapped_pred\n");
    for ((p, g), m) in preds.iter().zip(gts).zip(mapped) {
        let _ = writeln!(out, "{p} {g} {m}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tm(task: Task, s: f64) -> TaskMetrics {
        TaskMetrics {
            task,
            srcc: s,
            plcc: s,
            krcc: s,
            n: 10,
            logistic: LogisticParams { k1: 1.0, k2: 0.0, k3: 0.0, k4: -1.0 },
            logistic_fallback: false,
        }
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[0.1, 0.9, 0.2]).unwrap(), 0.2);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]).unwrap(), 2.5);
        assert!(median(&[]).is_err());
        let one = EvalResult { tasks: vec![tm(Task::Quality, 0.7)] };
        assert_eq!(median_of_trials(std::slice::from_ref(&one)).unwrap(), one);
        let trials: Vec<EvalResult> = [0.1, 0.2, 0.9]
            .iter()
            .map(|&s| EvalResult { tasks: vec![tm(Task::Quality, s)] })
            .collect();
        assert_eq!(median_of_trials(&trials).unwrap().tasks[0].srcc, 0.2);
        assert!(median_of_trials(&[]).is_err());
    }

    #[test]
    fn mismatched_trials_rejected() {
        let a = EvalResult { tasks: vec![tm(Task::Quality, 0.5)] };
        let b = EvalResult { tasks: vec![tm(Task::Consistency, 0.5)] };
        assert!(median_of_trials(&[a, b]).is_err());
    }

    #[test]
    fn emitters() {
        let r = EvalResult {
            tasks: vec![tm(Task::Quality, 0.5), tm(Task::Consistency, -0.25)],
        };
        let table = format_table(&r);
        assert_eq!(table.lines().count(), 3);
        let widths: Vec<usize> = table.lines().map(str::len).collect();
        assert!(widths.iter().all(|&w| w == widths[0]));
        let jsonl = format_jsonl(&r).unwrap();
        let first: serde_json::Value = serde_json::from_str(jsonl.lines().next().unwrap()).unwrap();
        assert_eq!(first["task"], "quality");
        assert_eq!(first["n"], 10);
        assert_eq!(format_scatter(&[1.0], &[2.0], &[1.5]), "# pred gt mapped_pred\n1 2 1.5\n");
    }
}
