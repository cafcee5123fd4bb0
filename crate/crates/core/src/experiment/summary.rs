//! Per-trial result tables and the `x mean std` summary files.

use std::fmt::Write as _;
use std::path::Path;

use crate::data::Scenario;
use crate::error::{Error, Result};
use crate::fsutil::read_to_string;

/// One finished (or failed) trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub scenario: Scenario,
    pub tuple_proportion: f64,
    pub train_fraction: f64,
    pub trial: usize,
    pub seed: u64,
    /// `None` when the trial aborted.
    pub test_nll: Option<f64>,
    pub best_val_nll: Option<f64>,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub fingerprint: String,
    pub error: Option<String>,
}

impl TrialResult {
    pub fn succeeded(&self) -> bool {
        self.test_nll.is_some()
    }
}

const TRIALS_HEADER: &str =
    "scenario\ttuple_proportion\ttrain_fraction\ttrial\tseed\tstatus\ttest_nll\tbest_val_nll\tbest_epoch\tepochs_run\tfingerprint\terror";

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:?}"))
}

/// Tab-separated table, one row per trial, floats in round-trip form.
pub fn format_trials(results: &[TrialResult]) -> String {
    let mut out = String::from(TRIALS_HEADER);
    out.push('\n');
    for r in results {
        let error = r.error.as_deref().unwrap_or("").replace(['\t', '\n'], " ");
        writeln!(
            out,
            "{}\t{:?}\t{:?}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.scenario,
            r.tuple_proportion,
            r.train_fraction,
            r.trial,
            r.seed,
            if r.succeeded() { "ok" } else { "failed" },
            opt(r.test_nll),
            opt(r.best_val_nll),
            r.best_epoch,
            r.epochs_run,
            r.fingerprint,
            error,
        )
        .unwrap();
    }
    out
}

pub fn parse_trials(text: &str, path: &Path) -> Result<Vec<TrialResult>> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_owned(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == TRIALS_HEADER => {}
        _ => return Err(err(1, "missing trials header".into())),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 12 {
            return Err(err(line_no, format!("expected 12 fields, found {}", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| err(line_no, format!("bad number `{s}`")));
        let int = |s: &str| s.parse::<u64>().map_err(|_| err(line_no, format!("bad integer `{s}`")));
        let opt_num = |s: &str| if s.is_empty() { Ok(None) } else { num(s).map(Some) };
        out.push(TrialResult {
            scenario: f[0].parse()?,
            tuple_proportion: num(f[1])?,
            train_fraction: num(f[2])?,
            trial: int(f[3])? as usize,
            seed: int(f[4])?,
            test_nll: opt_num(f[6])?,
            best_val_nll: opt_num(f[7])?,
            best_epoch: int(f[8])? as usize,
            epochs_run: int(f[9])? as usize,
            fingerprint: f[10].to_owned(),
            error: (f[5] != "ok").then(|| f[11].to_owned()),
        });
    }
    Ok(out)
}

pub fn read_trials(path: &Path) -> Result<Vec<TrialResult>> {
    parse_trials(&read_to_string(path)?, path)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryRow {
    pub x: f64,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Aggregates `(x, values)` groups into rows sorted by `x`. Empty groups are
/// dropped with a warning.
pub fn summarize_groups(groups: &[(f64, Vec<f64>)]) -> Vec<SummaryRow> {
    let mut rows: Vec<SummaryRow> = groups
        .iter()
        .filter_map(|(x, values)| {
            if values.is_empty() {
                log::warn!("summary group at x = {x} has no successful trials; omitted");
                return None;
            }
            let (mean, std) = mean_std(values);
            Some(SummaryRow { x: *x, mean, std })
        })
        .collect();
    rows.sort_by(|a, b| a.x.total_cmp(&b.x));
    rows
}

/// `x mean std` per line; `mean` and `std` use round-trip float formatting.
pub fn emit_summary(rows: &[SummaryRow]) -> String {
    let mut out = String::new();
    for r in rows {
        writeln!(out, "{} {:?} {:?}", r.x, r.mean, r.std).unwrap();
    }
    out
}

pub fn parse_summary(text: &str) -> Result<Vec<SummaryRow>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<f64> = line
                .split_whitespace()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Config(format!("summary line {}: {e}", i + 1)))?;
            match f[..] {
                [x, mean, std] => Ok(SummaryRow { x, mean, std }),
                _ => Err(Error::Config(format!("summary line {}: expected 3 columns", i + 1))),
            }
        })
        .collect()
}

/// Percent value with float noise removed (`0.1 → 10`).
pub fn percent(fraction: f64) -> f64 {
    (fraction * 100.0 * 1e9).round() / 1e9
}

/// A named summary file's rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable {
    pub file_name: String,
    pub rows: Vec<SummaryRow>,
}

/// Two families of tables per scenario: test NLL against tuple proportion
/// (one table per training fraction) and against training fraction (one per
/// tuple proportion). `x` is in percent.
pub fn summary_tables(results: &[TrialResult]) -> Vec<SummaryTable> {
    let mut scenarios: Vec<Scenario> = results.iter().map(|r| r.scenario).collect();
    scenarios.sort_by_key(|s| s.as_str());
    scenarios.dedup();

    let distinct = |values: Vec<f64>| {
        let mut v = values;
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let mut tables = Vec::new();
    for scenario in scenarios {
        let rs: Vec<&TrialResult> = results.iter().filter(|r| r.scenario == scenario).collect();
        let props = distinct(rs.iter().map(|r| r.tuple_proportion).collect());
        let fracs = distinct(rs.iter().map(|r| r.train_fraction).collect());

        let group = |fixed: &dyn Fn(&TrialResult) -> bool, axis: &dyn Fn(&TrialResult) -> f64, xs: &[f64]| {
            let groups: Vec<(f64, Vec<f64>)> = xs
                .iter()
                .map(|&x| {
                    let vals = rs
                        .iter()
                        .filter(|r| fixed(r) && axis(r) == x)
                        .filter_map(|r| r.test_nll)
                        .collect();
                    (percent(x), vals)
                })
                .collect();
            summarize_groups(&groups)
        };
        for &f in &fracs {
            tables.push(SummaryTable {
                file_name: format!("summary_{scenario}_tuples_train{}.txt", percent(f)),
                rows: group(&|r| r.train_fraction == f, &|r| r.tuple_proportion, &props),
            });
        }
        for &p in &props {
            tables.push(SummaryTable {
                file_name: format!("summary_{scenario}_train_tuples{}.txt", percent(p)),
                rows: group(&|r| r.tuple_proportion == p, &|r| r.train_fraction, &fracs),
            });
        }
    }
    tables
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial(p: f64, f: f64, k: usize, nll: Option<f64>) -> TrialResult {
        TrialResult {
            scenario: Scenario::Random,
            tuple_proportion: p,
            train_fraction: f,
            trial: k,
            seed: k as u64,
            test_nll: nll,
            best_val_nll: nll,
            best_epoch: 3,
            epochs_run: 53,
            fingerprint: "abc".into(),
            error: nll.is_none().then(|| "training aborted".into()),
        }
    }

    #[test]
    fn mean_and_population_std() {
        let rows = summarize_groups(&[(50.0, vec![1.0, 3.0])]);
        assert_eq!(emit_summary(&rows), "50 2.0 1.0\n");
        let rows = summarize_groups(&[(10.0, vec![4.25])]);
        assert_eq!(rows[0].std, 0.0);
    }

    #[test]
    fn rows_sorted_and_empty_groups_dropped() {
        let rows = summarize_groups(&[(100.0, vec![1.0]), (0.0, vec![2.0]), (50.0, vec![])]);
        assert_eq!(rows.iter().map(|r| r.x).collect::<Vec<_>>(), vec![0.0, 100.0]);
    }

    #[test]
    fn summary_reparses_exactly() {
        let rows = summarize_groups(&[(25.0, vec![0.1, 0.2, 0.7]), (75.0, vec![1e-9, 3.3])]);
        assert_eq!(parse_summary(&emit_summary(&rows)).unwrap(), rows);
    }

    #[test]
    fn trials_roundtrip() {
        let rs = vec![trial(0.5, 0.8, 0, Some(12.5)), trial(1.0, 0.8, 1, None)];
        let text = format_trials(&rs);
        assert_eq!(parse_trials(&text, Path::new("t")).unwrap(), rs);
    }

    #[test]
    fn tables_cover_both_axes() {
        let rs = vec![
            trial(0.0, 0.5, 0, Some(3.0)),
            trial(1.0, 0.5, 0, Some(2.0)),
            trial(0.0, 0.8, 0, Some(2.5)),
            trial(1.0, 0.8, 0, None),
        ];
        let t = summary_tables(&rs);
        let names: Vec<&str> = t.iter().map(|t| t.file_name.as_str()).collect();
        assert_eq!(
            names,
            vec![
                "summary_random_tuples_train50.txt",
                "summary_random_tuples_train80.txt",
                "summary_random_train_tuples0.txt",
                "summary_random_train_tuples100.txt",
            ]
        );
        assert_eq!(t[1].rows.len(), 1);
        assert_eq!(
            t[3].rows,
            vec![SummaryRow {
                x: 50.0,
                mean: 2.0,
                std: 0.0
            }]
        );
    }
}
