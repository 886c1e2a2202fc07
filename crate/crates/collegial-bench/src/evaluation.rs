//! Scoring and agreement statistics for prison-term predictions.
//!
//! Predictions are scored with a normalized log distance over months, so a
//! miss of a few months near the gold term costs little while a miss of
//! years costs a lot. Performance is the complement of that distance. Human
//! quality annotations (legality / logicality / morality) are aggregated by
//! majority vote and checked for inter-rater agreement with Cohen's kappa.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default ceiling for the prediction/gold difference: 300 months, the
/// 25-year fixed-term maximum under combined punishment.
pub const DEFAULT_MAX_DIFF: u32 = 300;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("max_diff must be at least 1")]
    InvalidMaxDiff,
    #[error("empty input")]
    EmptyInput,
    #[error("rating vectors have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("annotation matrix incomplete: case {case_id} missing rater {rater_id}")]
    IncompleteMatrix { case_id: String, rater_id: String },
    #[error("duplicate annotation for case {case_id} by rater {rater_id}")]
    DuplicateAnnotation { case_id: String, rater_id: String },
    #[error("need at least two raters, found {0}")]
    TooFewRaters(usize),
}

/// Score record for one case.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricResult {
    pub case_id: String,
    pub predicted_months: Option<u32>,
    pub gold_months: u32,
    pub distance: f64,
    pub performance: f64,
}

impl MetricResult {
    pub fn compute(
        case_id: impl Into<String>,
        predicted: Option<u32>,
        gold: u32,
        max_diff: u32,
    ) -> Result<Self, EvalError> {
        let distance = match predicted {
            Some(p) => nlog_distance(p, gold, max_diff)?,
            None => 1.0,
        };
        Ok(Self {
            case_id: case_id.into(),
            predicted_months: predicted,
            gold_months: gold,
            distance,
            performance: 1.0 - distance,
        })
    }
}

/// One rater's binary quality ratings for one case.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QualityAnnotation {
    pub case_id: String,
    pub rater_id: String,
    pub legality: bool,
    pub logicality: bool,
    pub morality: bool,
}

/// The three quality criteria rated by the human panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    Legality,
    Logicality,
    Morality,
}

impl Criterion {
    pub const ALL: [Criterion; 3] = [
        Criterion::Legality,
        Criterion::Logicality,
        Criterion::Morality,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Criterion::Legality => "legality",
            Criterion::Logicality => "logicality",
            Criterion::Morality => "morality",
        }
    }

    fn of(&self, ann: &QualityAnnotation) -> bool {
        match self {
            Criterion::Legality => ann.legality,
            Criterion::Logicality => ann.logicality,
            Criterion::Morality => ann.morality,
        }
    }
}

/// Aggregated figures for one (model, method) run, one row of the
/// comparison report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub method: String,
    pub model: String,
    pub mean_performance_pct: f64,
    pub legality_pct: Option<f64>,
    pub logicality_pct: Option<f64>,
    pub morality_pct: Option<f64>,
    pub cases: usize,
    pub unparsed: usize,
}

/// Normalized log distance between a predicted and gold term in months:
/// `log(min(|predicted - gold|, max_diff) + 1) / log(max_diff + 1)`,
/// clamped to [0, 1]. The value is independent of the logarithm base.
pub fn nlog_distance(predicted: u32, gold: u32, max_diff: u32) -> Result<f64, EvalError> {
    if max_diff < 1 {
        return Err(EvalError::InvalidMaxDiff);
    }
    let diff = predicted.abs_diff(gold).min(max_diff);
    let d = (f64::from(diff) + 1.0).ln() / (f64::from(max_diff) + 1.0).ln();
    Ok(d.clamp(0.0, 1.0))
}

/// Performance of a prediction: `1 - nlog_distance`, or 0 when the
/// prediction is missing or unparseable.
pub fn performance_score(
    predicted: Option<u32>,
    gold: u32,
    max_diff: u32,
) -> Result<f64, EvalError> {
    match predicted {
        Some(p) => Ok(1.0 - nlog_distance(p, gold, max_diff)?),
        None => {
            if max_diff < 1 {
                return Err(EvalError::InvalidMaxDiff);
            }
            Ok(0.0)
        }
    }
}

/// Mean performance over a run, as a percentage.
pub fn aggregate_performance(results: &[MetricResult]) -> Result<f64, EvalError> {
    if results.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let sum: f64 = results.iter().map(|r| r.performance).sum();
    Ok(sum / results.len() as f64 * 100.0)
}

/// Cohen's kappa between two aligned binary rating vectors.
///
/// `κ = (p_o − p_e) / (1 − p_e)` with `p_o` the observed agreement rate and
/// `p_e` the chance agreement from the raters' marginals. When `p_e = 1`
/// (both raters constant in the same direction) the convention is κ = 1 for
/// perfect agreement, else 0.
pub fn cohens_kappa(ratings_a: &[bool], ratings_b: &[bool]) -> Result<f64, EvalError> {
    if ratings_a.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    if ratings_a.len() != ratings_b.len() {
        return Err(EvalError::LengthMismatch(ratings_a.len(), ratings_b.len()));
    }
    let n = ratings_a.len() as f64;
    let agree = ratings_a
        .iter()
        .zip(ratings_b)
        .filter(|(a, b)| a == b)
        .count() as f64;
    let a_true = ratings_a.iter().filter(|v| **v).count() as f64 / n;
    let b_true = ratings_b.iter().filter(|v| **v).count() as f64 / n;
    let p_o = agree / n;
    let p_e = a_true * b_true + (1.0 - a_true) * (1.0 - b_true);
    if (1.0 - p_e).abs() < 1e-12 {
        return Ok(if (1.0 - p_o).abs() < 1e-12 { 1.0 } else { 0.0 });
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// Per-rater annotation rows aligned over the sorted case ids.
type AlignedAnnotations<'a> = BTreeMap<String, Vec<&'a QualityAnnotation>>;

/// Groups annotations into per-rater vectors aligned over the sorted case
/// ids, requiring every case to be rated by every rater exactly once.
fn annotation_matrix(
    annotations: &[QualityAnnotation],
) -> Result<(Vec<String>, AlignedAnnotations<'_>), EvalError> {
    if annotations.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut case_ids: Vec<String> = annotations.iter().map(|a| a.case_id.clone()).collect();
    case_ids.sort();
    case_ids.dedup();

    let mut by_rater: BTreeMap<String, BTreeMap<&str, &QualityAnnotation>> = BTreeMap::new();
    for ann in annotations {
        let slot = by_rater.entry(ann.rater_id.clone()).or_default();
        if slot.insert(ann.case_id.as_str(), ann).is_some() {
            return Err(EvalError::DuplicateAnnotation {
                case_id: ann.case_id.clone(),
                rater_id: ann.rater_id.clone(),
            });
        }
    }

    let mut aligned: AlignedAnnotations<'_> = BTreeMap::new();
    for (rater, cases) in &by_rater {
        let mut row = Vec::with_capacity(case_ids.len());
        for case_id in &case_ids {
            match cases.get(case_id.as_str()) {
                Some(ann) => row.push(*ann),
                None => {
                    return Err(EvalError::IncompleteMatrix {
                        case_id: case_id.clone(),
                        rater_id: rater.clone(),
                    })
                }
            }
        }
        aligned.insert(rater.clone(), row);
    }
    Ok((case_ids, aligned))
}

/// Mean Cohen's kappa over all rater pairs for one criterion.
pub fn pairwise_mean_kappa(
    annotations: &[QualityAnnotation],
    criterion: Criterion,
) -> Result<f64, EvalError> {
    let (_, matrix) = annotation_matrix(annotations)?;
    let raters: Vec<&String> = matrix.keys().collect();
    if raters.len() < 2 {
        return Err(EvalError::TooFewRaters(raters.len()));
    }
    let vector =
        |rater: &String| -> Vec<bool> { matrix[rater].iter().map(|a| criterion.of(a)).collect() };
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..raters.len() {
        for j in (i + 1)..raters.len() {
            sum += cohens_kappa(&vector(raters[i]), &vector(raters[j]))?;
            pairs += 1;
        }
    }
    Ok(sum / pairs as f64)
}

/// Percentage of cases rated true per criterion, by strict majority vote
/// across raters.
pub fn quality_rates(
    annotations: &[QualityAnnotation],
) -> Result<BTreeMap<String, f64>, EvalError> {
    let (case_ids, matrix) = annotation_matrix(annotations)?;
    let raters: Vec<&String> = matrix.keys().collect();
    let mut rates = BTreeMap::new();
    for criterion in Criterion::ALL {
        let mut voted_true = 0usize;
        for (idx, _) in case_ids.iter().enumerate() {
            let votes = raters
                .iter()
                .filter(|r| criterion.of(matrix[**r][idx]))
                .count();
            if votes * 2 > raters.len() {
                voted_true += 1;
            }
        }
        rates.insert(
            criterion.name().to_string(),
            voted_true as f64 / case_ids.len() as f64 * 100.0,
        );
    }
    Ok(rates)
}

/// Output layout for [`render_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    TableText,
    Delimited,
}

fn fmt_opt_pct(value: Option<f64>) -> String {
    value.map(|v| format!("{v:.2}")).unwrap_or_default()
}

/// Renders one row per (model, method) with performance and any available
/// quality columns. Rows are sorted by model then method regardless of
/// input order.
pub fn render_report(summaries: &[RunSummary], format: ReportFormat) -> Result<String, EvalError> {
    if summaries.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut rows: Vec<&RunSummary> = summaries.iter().collect();
    rows.sort_by(|a, b| (&a.model, &a.method).cmp(&(&b.model, &b.method)));

    let header = [
        "Model",
        "Method",
        "Performance (%)",
        "Legality (%)",
        "Logicality (%)",
        "Morality (%)",
        "Cases",
        "Unparsed",
    ];
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|s| {
            vec![
                s.model.clone(),
                s.method.clone(),
                format!("{:.2}", s.mean_performance_pct),
                fmt_opt_pct(s.legality_pct),
                fmt_opt_pct(s.logicality_pct),
                fmt_opt_pct(s.morality_pct),
                s.cases.to_string(),
                s.unparsed.to_string(),
            ]
        })
        .collect();

    match format {
        ReportFormat::Delimited => {
            let mut writer = csv::Writer::from_writer(Vec::new());
            writer.write_record(header).expect("csv write");
            for row in &cells {
                writer.write_record(row).expect("csv write");
            }
            let bytes = writer.into_inner().expect("csv flush");
            Ok(String::from_utf8(bytes).expect("csv utf8"))
        }
        ReportFormat::TableText => {
            let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
            for row in &cells {
                for (i, cell) in row.iter().enumerate() {
                    widths[i] = widths[i].max(cell.len());
                }
            }
            let mut out = String::new();
            let render_row = |row: &[String]| -> String {
                row.iter()
                    .enumerate()
                    .map(|(i, cell)| format!("{cell:<width$}", width = widths[i]))
                    .collect::<Vec<_>>()
                    .join("  ")
                    .trim_end()
                    .to_string()
            };
            let header_row: Vec<String> = header.iter().map(|h| h.to_string()).collect();
            out.push_str(&render_row(&header_row));
            out.push('\n');
            out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
            out.push('\n');
            for row in &cells {
                out.push_str(&render_row(row));
                out.push('\n');
            }
            Ok(out)
        }
    }
}

/// Reads a quality-annotation file: delimited columns
/// `case_id,rater_id,legality,logicality,morality` with 0/1 values.
pub fn read_annotations(path: &std::path::Path) -> anyhow::Result<Vec<QualityAnnotation>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let line = idx + 2;
        if record.len() < 5 {
            anyhow::bail!("line {line}: expected 5 columns, found {}", record.len());
        }
        let flag = |i: usize| -> anyhow::Result<bool> {
            match record.get(i).map(str::trim) {
                Some("1") | Some("true") => Ok(true),
                Some("0") | Some("false") => Ok(false),
                other => anyhow::bail!("line {line}: column {i} is not a 0/1 flag: {other:?}"),
            }
        };
        out.push(QualityAnnotation {
            case_id: record.get(0).unwrap_or_default().trim().to_string(),
            rater_id: record.get(1).unwrap_or_default().trim().to_string(),
            legality: flag(2)?,
            logicality: flag(3)?,
            morality: flag(4)?,
        });
    }
    Ok(out)
}
