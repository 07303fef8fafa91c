use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::records::{AnalyzedRecord, TextType};

/// The per-record values aggregation looks at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub record_id: String,
    pub source: String,
    pub task: String,
    pub text_type: TextType,
    pub condition: String,
    pub overlap_rate: f64,
    pub max_reproduction_len: usize,
}

impl From<&AnalyzedRecord> for Observation {
    fn from(a: &AnalyzedRecord) -> Self {
        Observation {
            record_id: a.record.record_id.clone(),
            source: a.record.source.clone(),
            task: a.record.task.clone(),
            text_type: a.record.text_type,
            condition: a.record.system_prompt_condition.to_string(),
            overlap_rate: a.overlap_rate,
            max_reproduction_len: a.max_reproduction_len,
        }
    }
}

/// How per-record rates are weighted when averaging a group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Balancing {
    /// Mean per task, then unweighted mean of task means per text type, then
    /// unweighted mean of text-type means.
    #[default]
    TasksThenTypes,
    /// Mean per text type, then unweighted mean of text-type means.
    TypesOnly,
    /// Plain mean over records.
    Unbalanced,
}

/// Neumaier-compensated mean; `None` for no values.
pub fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut comp, mut n) = (0.0f64, 0.0f64, 0usize);
    for v in values {
        let t = sum + v;
        comp += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
        n += 1;
    }
    (n > 0).then(|| (sum + comp) / n as f64)
}

/// Median of the values, averaging the middle pair for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    })
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BalancedMeans {
    /// Plain mean per (text type, task).
    pub per_task: BTreeMap<(TextType, String), f64>,
    pub per_text_type: BTreeMap<TextType, f64>,
    pub overall: Option<f64>,
}

pub fn balanced_means(obs: &[Observation], balancing: Balancing) -> BalancedMeans {
    let mut by_task: BTreeMap<(TextType, String), Vec<f64>> = BTreeMap::new();
    let mut by_type: BTreeMap<TextType, Vec<f64>> = BTreeMap::new();
    for o in obs {
        by_task
            .entry((o.text_type, o.task.clone()))
            .or_default()
            .push(o.overlap_rate);
        by_type.entry(o.text_type).or_default().push(o.overlap_rate);
    }
    let per_task: BTreeMap<_, _> = by_task
        .into_iter()
        .filter_map(|(k, v)| mean(v).map(|m| (k, m)))
        .collect();
    let per_text_type: BTreeMap<TextType, f64> = match balancing {
        Balancing::TasksThenTypes => by_type
            .keys()
            .filter_map(|&ty| {
                let task_means = per_task.iter().filter(|((t, _), _)| *t == ty).map(|(_, &m)| m);
                mean(task_means).map(|m| (ty, m))
            })
            .collect(),
        Balancing::TypesOnly | Balancing::Unbalanced => by_type
            .into_iter()
            .filter_map(|(k, v)| mean(v).map(|m| (k, m)))
            .collect(),
    };
    let overall = match balancing {
        Balancing::Unbalanced => mean(obs.iter().map(|o| o.overlap_rate)),
        _ => mean(per_text_type.values().copied()),
    };
    if overall.is_none() {
        log::warn!("no records to average; group omitted");
    }
    BalancedMeans {
        per_task,
        per_text_type,
        overall,
    }
}

pub fn balanced_mean(obs: &[Observation], balancing: Balancing) -> Option<f64> {
    balanced_means(obs, balancing).overall
}

pub const DEFAULT_LENGTH_GRID: [usize; 13] =
    [10, 20, 30, 50, 100, 200, 300, 500, 1000, 2000, 3000, 5000, 10000];

/// 0, 0.05, ..., 1.
pub fn default_rate_grid() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 20.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LengthPoint {
    pub min_length: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub min_rate: f64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TailCurves {
    /// Fraction of texts whose longest reproduction is at least `min_length`.
    pub length_curve: Vec<LengthPoint>,
    /// Fraction of texts whose overlap rate is at least `min_rate`.
    pub rate_curve: Vec<RatePoint>,
}

fn fraction(n: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        n as f64 / total as f64
    }
}

pub fn tail_curves(obs: &[Observation], length_grid: &[usize], rate_grid: &[f64]) -> TailCurves {
    let total = obs.len();
    TailCurves {
        length_curve: length_grid
            .iter()
            .map(|&l| LengthPoint {
                min_length: l,
                fraction: fraction(obs.iter().filter(|o| o.max_reproduction_len >= l).count(), total),
            })
            .collect(),
        rate_curve: rate_grid
            .iter()
            .map(|&r| RatePoint {
                min_rate: r,
                fraction: fraction(obs.iter().filter(|o| o.overlap_rate >= r).count(), total),
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn obs(task: &str, ty: TextType, rate: f64, max_len: usize) -> Observation {
        Observation {
            record_id: format!("{task}-{rate}-{max_len}"),
            source: "m".into(),
            task: task.into(),
            text_type: ty,
            condition: "none".into(),
            overlap_rate: rate,
            max_reproduction_len: max_len,
        }
    }

    #[test]
    fn task_balancing_example() {
        let o = [
            obs("A", TextType::Creative, 0.1, 0),
            obs("A", TextType::Creative, 0.3, 0),
            obs("B", TextType::Creative, 0.6, 0),
        ];
        let m = balanced_means(&o, Balancing::TasksThenTypes);
        assert_eq!(m.per_text_type[&TextType::Creative], 0.4);
        assert_eq!(m.overall, Some(0.4));
        let naive = balanced_mean(&o, Balancing::Unbalanced).unwrap();
        assert!((naive - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn single_task_equals_plain_mean_and_zero_stays_zero() {
        let o = [obs("A", TextType::Expository, 0.2, 0), obs("A", TextType::Expository, 0.5, 0)];
        assert_eq!(balanced_mean(&o, Balancing::TasksThenTypes), mean([0.2, 0.5]));
        let z = [obs("A", TextType::Creative, 0.0, 0), obs("B", TextType::Argumentative, 0.0, 0)];
        assert_eq!(balanced_mean(&z, Balancing::TasksThenTypes), Some(0.0));
        assert_eq!(balanced_mean(&[], Balancing::TasksThenTypes), None);
    }

    #[test]
    fn types_only_balancing() {
        let o = [
            obs("A", TextType::Creative, 0.1, 0),
            obs("A", TextType::Creative, 0.3, 0),
            obs("B", TextType::Creative, 0.6, 0),
            obs("C", TextType::Expository, 0.0, 0),
        ];
        let m = balanced_means(&o, Balancing::TypesOnly);
        assert!((m.per_text_type[&TextType::Creative] - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.overall.unwrap() - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
    }

    #[test]
    fn tail_examples() {
        let o = [
            obs("A", TextType::Creative, 0.0, 30),
            obs("A", TextType::Creative, 0.1, 60),
            obs("A", TextType::Creative, 0.5, 100),
        ];
        let c = tail_curves(&o, &[0, 50, 101], &[0.0, 0.1, 0.6]);
        let l: Vec<f64> = c.length_curve.iter().map(|p| p.fraction).collect();
        assert_eq!(l, vec![1.0, 2.0 / 3.0, 0.0]);
        let r: Vec<f64> = c.rate_curve.iter().map(|p| p.fraction).collect();
        assert_eq!(r, vec![1.0, 2.0 / 3.0, 0.0]);
    }

    #[test]
    fn default_grids() {
        for l in [30, 50, 100, 1000] {
            assert!(DEFAULT_LENGTH_GRID.contains(&l));
        }
        let r = default_rate_grid();
        assert_eq!((r.len(), r[0], r[20], r[3]), (21, 0.0, 1.0, 0.15));
    }
}
