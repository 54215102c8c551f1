//! Regression metrics and report tables.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What MAPE does with zero actuals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZeroPolicy {
    #[default]
    Error,
    /// Skip zero actuals and report how many were skipped.
    Exclude,
}

fn check_pair(actual: &[f64], predicted: &[f64]) -> Result<()> {
    if actual.len() != predicted.len() {
        return Err(Error::Contract(format!(
            "{} actual values vs {} predictions",
            actual.len(),
            predicted.len()
        )));
    }
    if actual.is_empty() {
        return Err(Error::Contract("metrics need at least one value".into()));
    }
    Ok(())
}

pub fn mae(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_pair(actual, predicted)?;
    Ok(actual.iter().zip(predicted).map(|(a, p)| (a - p).abs()).sum::<f64>() / actual.len() as f64)
}

pub fn mse(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_pair(actual, predicted)?;
    Ok(actual.iter().zip(predicted).map(|(a, p)| (a - p) * (a - p)).sum::<f64>() / actual.len() as f64)
}

pub fn rmse(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    Ok(mse(actual, predicted)?.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mape {
    /// Mean absolute percentage error as a fraction (0.1 means 10%).
    pub value: f64,
    pub excluded: usize,
}

pub fn mape(actual: &[f64], predicted: &[f64], policy: ZeroPolicy) -> Result<Mape> {
    check_pair(actual, predicted)?;
    let mut sum = 0.0;
    let mut used = 0usize;
    let mut excluded = 0usize;
    for (i, (a, p)) in actual.iter().zip(predicted).enumerate() {
        if *a == 0.0 {
            match policy {
                ZeroPolicy::Error => {
                    return Err(Error::Domain(format!("MAPE undefined: actual value {i} is zero")))
                }
                ZeroPolicy::Exclude => {
                    excluded += 1;
                    continue;
                }
            }
        }
        sum += ((a - p) / a).abs();
        used += 1;
    }
    if used == 0 {
        return Err(Error::Domain("MAPE undefined: every actual value is zero".into()));
    }
    Ok(Mape {
        value: sum / used as f64,
        excluded,
    })
}

pub fn r_squared(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_pair(actual, predicted)?;
    if actual.len() < 2 {
        return Err(Error::Contract("R² needs at least two values".into()));
    }
    let mean = actual.iter().sum::<f64>() / actual.len() as f64;
    let ss_tot: f64 = actual.iter().map(|a| (a - mean) * (a - mean)).sum();
    if ss_tot == 0.0 {
        return Err(Error::Domain("R² undefined for constant actual values".into()));
    }
    let ss_res: f64 = actual.iter().zip(predicted).map(|(a, p)| (a - p) * (a - p)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskMetrics {
    pub task: String,
    pub mae: f64,
    pub rmse: f64,
    pub mape: f64,
    pub mape_excluded: usize,
    #[serde(rename = "r2")]
    pub r_squared: f64,
    pub count: usize,
}

impl TaskMetrics {
    pub fn compute(task: &str, actual: &[f64], predicted: &[f64], policy: ZeroPolicy) -> Result<Self> {
        let m = mape(actual, predicted, policy)?;
        Ok(Self {
            task: task.to_string(),
            mae: mae(actual, predicted)?,
            rmse: rmse(actual, predicted)?,
            mape: m.value,
            mape_excluded: m.excluded,
            r_squared: r_squared(actual, predicted)?,
            count: actual.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: String,
    pub tasks: Vec<TaskMetrics>,
}

impl MetricsReport {
    pub fn task(&self, name: &str) -> Option<&TaskMetrics> {
        self.tasks.iter().find(|t| t.task == name)
    }

    /// Average of each metric over tasks.
    pub fn summary(&self) -> SummaryRow {
        let n = self.tasks.len().max(1) as f64;
        let avg = |f: fn(&TaskMetrics) -> f64| self.tasks.iter().map(f).sum::<f64>() / n;
        SummaryRow {
            method: self.method.clone(),
            mae: avg(|t| t.mae),
            rmse: avg(|t| t.rmse),
            mape: avg(|t| t.mape),
            r_squared: avg(|t| t.r_squared),
        }
    }

    /// Per-task mean across several reports with the same task list.
    pub fn mean(method: &str, reports: &[MetricsReport]) -> Result<Self> {
        let first = reports
            .first()
            .ok_or_else(|| Error::EmptyInput("no reports to average".into()))?;
        let n = reports.len() as f64;
        let mut tasks = Vec::with_capacity(first.tasks.len());
        for (i, t) in first.tasks.iter().enumerate() {
            let mut acc = TaskMetrics {
                task: t.task.clone(),
                mae: 0.0,
                rmse: 0.0,
                mape: 0.0,
                mape_excluded: 0,
                r_squared: 0.0,
                count: 0,
            };
            for r in reports {
                let o = r
                    .tasks
                    .get(i)
                    .filter(|o| o.task == t.task)
                    .ok_or_else(|| Error::Contract("reports have different task lists".into()))?;
                acc.mae += o.mae / n;
                acc.rmse += o.rmse / n;
                acc.mape += o.mape / n;
                acc.r_squared += o.r_squared / n;
                acc.mape_excluded += o.mape_excluded;
                acc.count += o.count;
            }
            tasks.push(acc);
        }
        Ok(Self {
            method: method.to_string(),
            tasks,
        })
    }
}

/// One row of a comparison table, averaged over tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    #[serde(rename = "Methods")]
    pub method: String,
    #[serde(rename = "MAE")]
    pub mae: f64,
    #[serde(rename = "RMSE")]
    pub rmse: f64,
    #[serde(rename = "MAPE")]
    pub mape: f64,
    #[serde(rename = "R²")]
    pub r_squared: f64,
}

pub const TABLE_HEADER: [&str; 5] = ["Methods", "MAE", "RMSE", "MAPE", "R²"];

/// Comparison table as CSV text, values to three decimals.
pub fn table_csv(rows: &[SummaryRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TABLE_HEADER)?;
    for r in rows {
        w.write_record([
            r.method.clone(),
            format!("{:.3}", r.mae),
            format!("{:.3}", r.rmse),
            format!("{:.3}", r.mape),
            format!("{:.3}", r.r_squared),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_table_csv(rows: &[SummaryRow], path: &Path) -> Result<()> {
    std::fs::write(path, table_csv(rows)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_values() {
        assert!((mae(&[1.0, 2.0, 3.0], &[1.0, 2.0, 5.0]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-15);
        let m = mape(&[100.0, 200.0], &[110.0, 180.0], ZeroPolicy::Error).unwrap();
        assert!((m.value - 0.10).abs() < 1e-15);
        assert_eq!(r_squared(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap(), 0.0);
        assert_eq!(r_squared(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap(), 0.5);
        assert_eq!(mae(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap(), 2.0 / 3.0);
        assert!((r_squared(&[1.0, 2.0, 3.0], &[1.5, 2.0, 2.5]).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn perfect_prediction() {
        let a = [1.0, 4.0, 9.0];
        assert_eq!(mae(&a, &a).unwrap(), 0.0);
        assert_eq!(rmse(&a, &a).unwrap(), 0.0);
        assert_eq!(mape(&a, &a, ZeroPolicy::Error).unwrap().value, 0.0);
        assert_eq!(r_squared(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn undefined_cases() {
        assert!(matches!(r_squared(&[2.0, 2.0], &[1.0, 3.0]), Err(Error::Domain(_))));
        assert!(matches!(mape(&[0.0, 1.0], &[1.0, 1.0], ZeroPolicy::Error), Err(Error::Domain(_))));
        let m = mape(&[0.0, 2.0], &[1.0, 1.0], ZeroPolicy::Exclude).unwrap();
        assert_eq!(m.excluded, 1);
        assert!((m.value - 0.5).abs() < 1e-15);
        assert!(matches!(mae(&[], &[]), Err(Error::Contract(_))));
        assert!(matches!(mae(&[1.0], &[1.0, 2.0]), Err(Error::Contract(_))));
        assert!(matches!(r_squared(&[1.0], &[1.0]), Err(Error::Contract(_))));
    }

    #[test]
    fn table_formatting() {
        let rows = vec![SummaryRow {
            method: "Proposed method".into(),
            mae: 0.12345,
            rmse: 1.0,
            mape: 0.05,
            r_squared: 0.9876,
        }];
        let csv = table_csv(&rows).unwrap();
        assert_eq!(csv, "Methods,MAE,RMSE,MAPE,R²\nProposed method,0.123,1.000,0.050,0.988\n");
    }

    #[test]
    fn mean_of_reports() {
        let r = |v: f64| MetricsReport {
            method: "m".into(),
            tasks: vec![TaskMetrics {
                task: "close".into(),
                mae: v,
                rmse: v,
                mape: v,
                mape_excluded: 0,
                r_squared: v,
                count: 10,
            }],
        };
        let m = MetricsReport::mean("avg", &[r(1.0), r(3.0)]).unwrap();
        assert_eq!(m.tasks[0].r_squared, 2.0);
        assert_eq!(m.tasks[0].count, 20);
    }

    fn pairs() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..40).prop_flat_map(|n| {
            (
                prop::collection::vec(0.5f64..100.0, n),
                prop::collection::vec(-100.0f64..100.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn rmse_dominates_mae((a, p) in pairs()) {
            prop_assert!(rmse(&a, &p).unwrap() >= mae(&a, &p).unwrap() - 1e-12);
        }

        #[test]
        fn scale_equivariance((a, p) in pairs(), c in 0.1f64..50.0) {
            let ac: Vec<f64> = a.iter().map(|x| x * c).collect();
            let pc: Vec<f64> = p.iter().map(|x| x * c).collect();
            let tol = 1e-9 * (1.0 + mae(&a, &p).unwrap() * c);
            prop_assert!((mae(&ac, &pc).unwrap() - c * mae(&a, &p).unwrap()).abs() < tol);
            prop_assert!((rmse(&ac, &pc).unwrap() - c * rmse(&a, &p).unwrap()).abs() < tol);
            let m0 = mape(&a, &p, ZeroPolicy::Error).unwrap().value;
            let m1 = mape(&ac, &pc, ZeroPolicy::Error).unwrap().value;
            prop_assert!((m0 - m1).abs() < 1e-9 * (1.0 + m0));
        }

        #[test]
        fn order_invariance((a, p) in pairs(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut idx: Vec<usize> = (0..a.len()).collect();
            idx.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a2: Vec<f64> = idx.iter().map(|&i| a[i]).collect();
            let p2: Vec<f64> = idx.iter().map(|&i| p[i]).collect();
            prop_assert!((mae(&a, &p).unwrap() - mae(&a2, &p2).unwrap()).abs() < 1e-9);
            prop_assert!((rmse(&a, &p).unwrap() - rmse(&a2, &p2).unwrap()).abs() < 1e-9);
            if a.len() > 1 && a.iter().any(|x| *x != a[0]) {
                let r1 = r_squared(&a, &p).unwrap();
                let r2 = r_squared(&a2, &p2).unwrap();
                prop_assert!((r1 - r2).abs() < 1e-9 * (1.0 + r1.abs()));
            }
        }
    }
}
