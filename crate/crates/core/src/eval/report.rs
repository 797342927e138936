//! Per-participant tables, per-model summaries and pairwise comparisons.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::MetricSet;
use super::stats::{bonferroni, kruskal_wallis, levene, shapiro_wilk, wilcoxon_signed_rank, LeveneCenter, TestResult};
use crate::error::{Error, Result};
use crate::io::write_atomic;

/// One model's outcome on one held-out participant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantResult {
    pub participant: String,
    pub model: String,
    pub metrics: MetricSet,
    pub memory_kb: f64,
}

/// Sample mean and standard deviation (n - 1 denominator; 0 when n = 1).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub model: String,
    pub n: usize,
    pub f1: MeanStd,
    pub macro_f1: MeanStd,
    pub precision: MeanStd,
    pub macro_precision: MeanStd,
    pub recall: MeanStd,
    pub macro_recall: MeanStd,
    pub memory_kb: MeanStd,
}

/// A comparison between two models (or all models, for the omnibus test).
/// `result` is `None` when the test is undefined for the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseRow {
    pub group1: String,
    pub group2: String,
    pub method: String,
    pub result: Option<TestResult>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatReport {
    pub participants: Vec<String>,
    pub models: Vec<String>,
    /// Participant-major, models in first-seen order.
    pub rows: Vec<ParticipantResult>,
    pub summary: Vec<SummaryRow>,
    pub tests: Vec<PairwiseRow>,
    /// Assumption checks on fall F1: Shapiro-Wilk per model, then Levene
    /// across models.
    pub screening: Vec<PairwiseRow>,
    /// Human-readable notes about undefined metrics or tests.
    pub flags: Vec<String>,
}

fn first_seen<'a>(it: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for s in it {
        if !out.iter().any(|o| o == s) {
            out.push(s.to_string());
        }
    }
    out
}

/// Validates completeness and computes summaries plus fall-F1 comparisons:
/// Kruskal-Wallis across all models, then paired Wilcoxon for every pair of
/// models with Bonferroni adjustment over the pairs.
pub fn build_report(results: &[ParticipantResult]) -> Result<StatReport> {
    build_report_with(results, LeveneCenter::Mean)
}

/// [`build_report`] with a choice of Levene centering for the screen.
pub fn build_report_with(results: &[ParticipantResult], center: LeveneCenter) -> Result<StatReport> {
    if results.is_empty() {
        return Err(Error::InvalidArgument("no results to report".into()));
    }
    let participants = first_seen(results.iter().map(|r| r.participant.as_str()));
    let models = first_seen(results.iter().map(|r| r.model.as_str()));
    let mut cells: HashMap<(&str, &str), &ParticipantResult> = HashMap::new();
    for r in results {
        if cells.insert((&r.participant, &r.model), r).is_some() {
            return Err(Error::Data(format!(
                "duplicate result for participant `{}` and model `{}`",
                r.participant, r.model
            )));
        }
    }
    let mut rows = Vec::with_capacity(participants.len() * models.len());
    for p in &participants {
        for m in &models {
            let cell = cells.get(&(p.as_str(), m.as_str())).ok_or_else(|| Error::MissingCell {
                participant: p.clone(),
                model: m.clone(),
            })?;
            rows.push((*cell).clone());
        }
    }
    let mut flags = Vec::new();
    for r in &rows {
        if !r.metrics.undefined.is_empty() {
            flags.push(format!(
                "participant {} model {}: undefined {} reported as 0",
                r.participant,
                r.model,
                r.metrics.undefined.join(", ")
            ));
        }
    }

    let column = |model: &str, f: &dyn Fn(&ParticipantResult) -> f64| -> Vec<f64> {
        rows.iter().filter(|r| r.model == model).map(f).collect()
    };
    let summary = models
        .iter()
        .map(|m| SummaryRow {
            model: m.clone(),
            n: participants.len(),
            f1: MeanStd::of(&column(m, &|r| r.metrics.f1)),
            macro_f1: MeanStd::of(&column(m, &|r| r.metrics.macro_f1)),
            precision: MeanStd::of(&column(m, &|r| r.metrics.precision)),
            macro_precision: MeanStd::of(&column(m, &|r| r.metrics.macro_precision)),
            recall: MeanStd::of(&column(m, &|r| r.metrics.recall)),
            macro_recall: MeanStd::of(&column(m, &|r| r.metrics.macro_recall)),
            memory_kb: MeanStd::of(&column(m, &|r| r.memory_kb)),
        })
        .collect();

    let f1s: BTreeMap<&str, Vec<f64>> = models
        .iter()
        .map(|m| (m.as_str(), column(m, &|r| r.metrics.f1)))
        .collect();
    let mut screening = Vec::new();
    for m in &models {
        screening.push(row(m, "", "shapiro_wilk", shapiro_wilk(&f1s[m.as_str()]), &mut flags));
    }
    let mut tests = Vec::new();
    if models.len() >= 2 {
        let groups: Vec<Vec<f64>> = models.iter().map(|m| f1s[m.as_str()].clone()).collect();
        screening.push(row("all", "all", "levene", levene(&groups, center), &mut flags));
        let groups: Vec<Vec<f64>> = models.iter().map(|m| f1s[m.as_str()].clone()).collect();
        tests.push(row("all", "all", "kruskal_wallis", kruskal_wallis(&groups), &mut flags));
        let mut pairs = Vec::new();
        for i in 0..models.len() {
            for j in i + 1..models.len() {
                let r = wilcoxon_signed_rank(&f1s[models[i].as_str()], &f1s[models[j].as_str()]);
                pairs.push(row(&models[i], &models[j], "wilcoxon", r, &mut flags));
            }
        }
        let defined: Vec<f64> = pairs
            .iter()
            .filter_map(|p| p.result.as_ref().map(|r| r.p_value))
            .collect();
        if !defined.is_empty() {
            let adjusted = bonferroni(&defined)?;
            let mut it = adjusted.into_iter();
            for p in pairs.iter_mut() {
                if let Some(r) = p.result.as_mut() {
                    r.adjusted_p = it.next();
                }
            }
        }
        tests.extend(pairs);
    }
    Ok(StatReport {
        participants,
        models,
        rows,
        summary,
        tests,
        screening,
        flags,
    })
}

fn row(g1: &str, g2: &str, method: &str, r: Result<TestResult>, flags: &mut Vec<String>) -> PairwiseRow {
    match r {
        Ok(result) => PairwiseRow {
            group1: g1.into(),
            group2: g2.into(),
            method: result.method.as_str().into(),
            result: Some(result),
            note: None,
        },
        Err(e) => {
            flags.push(format!("{method} {g1} vs {g2} undefined: {e}"));
            PairwiseRow {
                group1: g1.into(),
                group2: g2.into(),
                method: method.into(),
                result: None,
                note: Some(e.to_string()),
            }
        }
    }
}

pub const PER_PARTICIPANT_HEADER: [&str; 9] = [
    "participant",
    "model",
    "f1",
    "macro_f1",
    "precision",
    "macro_precision",
    "recall",
    "macro_recall",
    "memory_kb",
];

pub const PAIRWISE_HEADER: [&str; 6] = ["group1", "group2", "method", "statistic", "p", "adjusted_p"];

fn to_csv(header: &[&str], records: Vec<Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in records {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| Error::Data(format!("csv buffer: {e}")))
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Per-participant rows in the `per_participant.csv` layout.
pub fn results_csv(rows: &[ParticipantResult]) -> Result<Vec<u8>> {
    let records = rows
        .iter()
        .map(|r| {
            let m = &r.metrics;
            vec![
                r.participant.clone(),
                r.model.clone(),
                m.f1.to_string(),
                m.macro_f1.to_string(),
                m.precision.to_string(),
                m.macro_precision.to_string(),
                m.recall.to_string(),
                m.macro_recall.to_string(),
                r.memory_kb.to_string(),
            ]
        })
        .collect();
    to_csv(&PER_PARTICIPANT_HEADER, records)
}

/// Parses rows written by [`results_csv`]. Undefined-metric flags are not
/// part of the CSV and come back empty.
pub fn read_results_csv<R: std::io::Read>(reader: R) -> Result<Vec<ParticipantResult>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != PER_PARTICIPANT_HEADER {
        return Err(Error::Schema {
            row: 0,
            reason: format!("expected header {}", PER_PARTICIPANT_HEADER.join(",")),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let num = |k: usize| -> Result<f64> {
            let v: f64 = rec[k].trim().parse().map_err(|_| Error::Schema {
                row: i + 1,
                reason: format!("column {} is not a number: `{}`", PER_PARTICIPANT_HEADER[k], &rec[k]),
            })?;
            if !v.is_finite() {
                return Err(Error::Schema {
                    row: i + 1,
                    reason: format!("column {} is not finite", PER_PARTICIPANT_HEADER[k]),
                });
            }
            Ok(v)
        };
        rows.push(ParticipantResult {
            participant: rec[0].to_string(),
            model: rec[1].to_string(),
            metrics: MetricSet {
                f1: num(2)?,
                macro_f1: num(3)?,
                precision: num(4)?,
                macro_precision: num(5)?,
                recall: num(6)?,
                macro_recall: num(7)?,
                undefined: Vec::new(),
            },
            memory_kb: num(8)?,
        });
    }
    Ok(rows)
}

fn test_rows_csv(tests: &[PairwiseRow]) -> Result<Vec<u8>> {
    let records = tests
        .iter()
        .map(|t| {
            vec![
                t.group1.clone(),
                t.group2.clone(),
                t.method.clone(),
                opt(t.result.as_ref().map(|r| r.statistic)),
                opt(t.result.as_ref().map(|r| r.p_value)),
                opt(t.result.as_ref().and_then(|r| r.adjusted_p)),
            ]
        })
        .collect();
    to_csv(&PAIRWISE_HEADER, records)
}

impl StatReport {
    pub fn per_participant_csv(&self) -> Result<Vec<u8>> {
        results_csv(&self.rows)
    }

    pub fn summary_csv(&self) -> Result<Vec<u8>> {
        let mut header = vec!["model".to_string(), "n".to_string()];
        for name in &PER_PARTICIPANT_HEADER[2..] {
            header.push(format!("{name}_mean"));
            header.push(format!("{name}_std"));
        }
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let records = self
            .summary
            .iter()
            .map(|s| {
                let mut rec = vec![s.model.clone(), s.n.to_string()];
                for v in [
                    s.f1,
                    s.macro_f1,
                    s.precision,
                    s.macro_precision,
                    s.recall,
                    s.macro_recall,
                    s.memory_kb,
                ] {
                    rec.push(v.mean.to_string());
                    rec.push(v.std.to_string());
                }
                rec
            })
            .collect();
        to_csv(&header, records)
    }

    pub fn pairwise_csv(&self) -> Result<Vec<u8>> {
        test_rows_csv(&self.tests)
    }

    pub fn screening_csv(&self) -> Result<Vec<u8>> {
        test_rows_csv(&self.screening)
    }

    /// Writes `per_participant.csv`, `summary.csv`, `pairwise_tests.csv`,
    /// `screening_tests.csv` and `report.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_atomic(&dir.join("per_participant.csv"), &self.per_participant_csv()?)?;
        write_atomic(&dir.join("summary.csv"), &self.summary_csv()?)?;
        write_atomic(&dir.join("pairwise_tests.csv"), &self.pairwise_csv()?)?;
        write_atomic(&dir.join("screening_tests.csv"), &self.screening_csv()?)?;
        let json = serde_json::to_vec_pretty(self).map_err(|e| Error::Data(format!("report json: {e}")))?;
        write_atomic(&dir.join("report.json"), &json)
    }
}
