use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::config::RiskMode;
use super::run::{EvalRow, CSV_HEADER};
use crate::envs::EnvPreset;
use crate::error::{Error, Result};

/// Spread of one metric across seeds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spread {
    pub mean: f64,
    /// Sample standard deviation; zero for a single seed.
    pub std: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

impl Spread {
    pub fn of(xs: &[f64]) -> Self {
        assert!(!xs.is_empty(), "spread of an empty sample");
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std = if xs.len() > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            std,
            median: median(xs),
            min: xs.iter().copied().fold(f64::INFINITY, f64::min),
            max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub env: EnvPreset,
    pub risk_mode: RiskMode,
    pub seeds: usize,
    pub final_step: u64,
    pub final_return: Spread,
    pub final_win_rate: Spread,
}

/// Final evaluation row of every seed, grouped by `(env, risk mode)`.
pub fn final_rows(rows: &[EvalRow]) -> BTreeMap<(String, String), Vec<&EvalRow>> {
    let mut last: BTreeMap<(String, String, u64), &EvalRow> = BTreeMap::new();
    for r in rows {
        let key = (r.env.to_string(), r.risk_mode.to_string(), r.seed);
        match last.get(&key) {
            Some(prev) if prev.train_step >= r.train_step => {}
            _ => {
                last.insert(key, r);
            }
        }
    }
    let mut groups: BTreeMap<(String, String), Vec<&EvalRow>> = BTreeMap::new();
    for ((env, mode, _), r) in last {
        groups.entry((env, mode)).or_default().push(r);
    }
    groups
}

pub fn summarize(rows: &[EvalRow]) -> Vec<SummaryRow> {
    final_rows(rows)
        .into_values()
        .map(|group| {
            let returns: Vec<f64> = group.iter().map(|r| r.mean_return).collect();
            let wins: Vec<f64> = group.iter().map(|r| r.win_rate).collect();
            SummaryRow {
                env: group[0].env,
                risk_mode: group[0].risk_mode,
                seeds: group.len(),
                final_step: group.iter().map(|r| r.train_step).max().unwrap_or(0),
                final_return: Spread::of(&returns),
                final_win_rate: Spread::of(&wins),
            }
        })
        .collect()
}

const SUMMARY_HEADER: [&str; 14] = [
    "env",
    "risk_mode",
    "seeds",
    "final_step",
    "return_mean",
    "return_std",
    "return_median",
    "return_min",
    "return_max",
    "win_rate_mean",
    "win_rate_std",
    "win_rate_median",
    "win_rate_min",
    "win_rate_max",
];

fn summary_record(s: &SummaryRow) -> Vec<String> {
    let mut rec = vec![
        s.env.to_string(),
        s.risk_mode.to_string(),
        s.seeds.to_string(),
        s.final_step.to_string(),
    ];
    for sp in [s.final_return, s.final_win_rate] {
        rec.extend([sp.mean, sp.std, sp.median, sp.min, sp.max].map(|x| x.to_string()));
    }
    rec
}

pub fn write_summary_csv(path: &Path, summary: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(SUMMARY_HEADER).map_err(|e| Error::csv(path, e))?;
    for s in summary {
        w.write_record(summary_record(s)).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn summary_table(summary: &[SummaryRow]) -> String {
    let header = [
        "env", "risk_mode", "seeds", "step", "return", "±std", "median", "win_rate", "±std",
    ];
    let body: Vec<[String; 9]> = summary
        .iter()
        .map(|s| {
            [
                s.env.to_string(),
                s.risk_mode.to_string(),
                s.seeds.to_string(),
                s.final_step.to_string(),
                format!("{:.3}", s.final_return.mean),
                format!("{:.3}", s.final_return.std),
                format!("{:.3}", s.final_return.median),
                format!("{:.3}", s.final_win_rate.mean),
                format!("{:.3}", s.final_win_rate.std),
            ]
        })
        .collect();
    let mut widths = header.map(|h| h.chars().count());
    for row in &body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &[&str]| {
        let mut l = String::new();
        for (i, (cell, w)) in cells.iter().zip(widths).enumerate() {
            if i > 0 {
                l.push_str("  ");
            }
            // Text columns left-aligned, numbers right-aligned.
            if i < 2 {
                let _ = write!(l, "{cell:<w$}");
            } else {
                let _ = write!(l, "{cell:>w$}");
            }
        }
        out.push_str(l.trim_end());
        out.push('\n');
    };
    line(&header);
    for row in &body {
        line(&row.each_ref().map(String::as_str));
    }
    out
}

pub fn read_results_csv(path: &Path) -> Result<Vec<EvalRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let headers = r.headers().map_err(|e| Error::csv(path, e))?.clone();
    if headers.iter().ne(CSV_HEADER) {
        return Err(Error::Config(format!("{}: unexpected CSV header", path.display())));
    }
    let mut rows = Vec::new();
    for (n, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let bad = |field: &str| {
            Error::Config(format!("{}: row {}: bad `{field}`", path.display(), n + 1))
        };
        let f = |i: usize| -> Result<f64> { rec[i].parse().map_err(|_| bad(CSV_HEADER[i])) };
        let u = |i: usize| -> Result<u64> { rec[i].parse().map_err(|_| bad(CSV_HEADER[i])) };
        rows.push(EvalRow {
            env: rec[0].parse()?,
            risk_mode: rec[1].parse()?,
            seed: u(2)?,
            train_step: u(3)?,
            mean_return: f(4)?,
            win_rate: f(5)?,
            damage_per_step: f(6)?,
            travel_per_step: f(7)?,
            alpha: f(8)?,
            beta: f(9)?,
            epsilon: f(10)?,
        });
    }
    Ok(rows)
}

/// Per-step median across seeds of `metric`, ordered by step.
pub fn median_curve(rows: &[EvalRow], metric: impl Fn(&EvalRow) -> f64) -> Vec<(u64, f64)> {
    let mut by_step: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for r in rows {
        by_step.entry(r.train_step).or_default().push(metric(r));
    }
    by_step.into_iter().map(|(t, xs)| (t, median(&xs))).collect()
}

/// First step at which `curve` reaches `threshold`.
pub fn steps_to_reach(curve: &[(u64, f64)], threshold: f64) -> Option<u64> {
    curve.iter().find(|&&(_, v)| v >= threshold).map(|&(t, _)| t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(mode: RiskMode, seed: u64, step: u64, ret: f64, win: f64) -> EvalRow {
        EvalRow {
            env: EnvPreset::Kiting,
            risk_mode: mode,
            seed,
            train_step: step,
            mean_return: ret,
            win_rate: win,
            damage_per_step: 0.0,
            travel_per_step: 0.0,
            alpha: 0.0,
            beta: 1.0,
            epsilon: 0.05,
        }
    }

    #[test]
    fn single_run_summary_is_its_final_row() {
        let rows = [
            row(RiskMode::StaticNeutral, 0, 100, 1.0, 0.0),
            row(RiskMode::StaticNeutral, 0, 200, 4.5, 0.75),
        ];
        let s = summarize(&rows);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].final_step, 200);
        assert_eq!(s[0].final_return.mean, 4.5);
        assert_eq!(s[0].final_return.std, 0.0);
        assert_eq!(s[0].final_win_rate.median, 0.75);
    }

    #[test]
    fn hand_computed_means() {
        let rows = [
            row(RiskMode::SchedNeutral, 0, 10, 1.0, 0.0),
            row(RiskMode::SchedNeutral, 1, 10, 2.0, 1.0),
            row(RiskMode::SchedNeutral, 2, 10, 6.0, 0.5),
            row(RiskMode::StaticNeutral, 0, 10, -1.0, 0.0),
        ];
        let s = summarize(&rows);
        assert_eq!(s.len(), 2);
        let sched = s.iter().find(|r| r.risk_mode == RiskMode::SchedNeutral).unwrap();
        assert_eq!(sched.seeds, 3);
        assert_eq!(sched.final_return.mean, 3.0);
        assert_eq!(sched.final_return.median, 2.0);
        assert_eq!(sched.final_return.std, 7.0f64.sqrt());
        assert_eq!((sched.final_return.min, sched.final_return.max), (1.0, 6.0));
        assert_eq!(sched.final_win_rate.mean, 0.5);
        let table = summary_table(&s);
        assert_eq!(table.lines().count(), 3);
        assert!(table.contains("sched-neutral"));
    }

    #[test]
    fn curves_and_thresholds() {
        let rows = [
            row(RiskMode::StaticNeutral, 0, 10, 1.0, 0.0),
            row(RiskMode::StaticNeutral, 1, 10, 3.0, 0.0),
            row(RiskMode::StaticNeutral, 0, 20, 5.0, 0.0),
            row(RiskMode::StaticNeutral, 1, 20, 7.0, 0.0),
        ];
        let c = median_curve(&rows, |r| r.mean_return);
        assert_eq!(c, vec![(10, 2.0), (20, 6.0)]);
        assert_eq!(steps_to_reach(&c, 2.0), Some(10));
        assert_eq!(steps_to_reach(&c, 2.5), Some(20));
        assert_eq!(steps_to_reach(&c, 7.0), None);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let rows = vec![
            row(RiskMode::SchedAverse, 2, 10, -0.125, 0.25),
            row(RiskMode::SchedAverse, 2, 20, 1.0 / 3.0, 1.0),
        ];
        super::super::run::write_results_csv(&path, &rows).unwrap();
        assert_eq!(read_results_csv(&path).unwrap(), rows);
        std::fs::write(&path, "a,b\n1,2\n").unwrap();
        assert!(read_results_csv(&path).is_err());
    }
}
