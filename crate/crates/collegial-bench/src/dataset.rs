//! Loading and normalization of benchmark cases.
//!
//! A case file is UTF-8 JSON lines, one record per line, with fields `id`,
//! `fact`, `charge`, `article`, and `gold_term`. The gold term may be an
//! integer month count or a textual term expression (`"五年"`); both are
//! normalized to months on load. Facts are right-truncated to a character
//! budget.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::term_parser::extract_prison_term_months;

/// One criminal case: the fact description, charge, applicable article
/// text, and the gold prison term in months.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Case {
    pub id: String,
    pub fact: String,
    pub charge: String,
    pub article: String,
    pub gold_term_months: u32,
}

/// Load-time policies for case files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetConfig {
    /// Facts longer than this many characters are right-truncated.
    pub max_fact_chars: usize,
    /// Abort on a bad record instead of skipping it with a warning.
    pub reject_missing_fields: bool,
    /// Upper bound on acceptable gold terms, in months.
    pub max_term_months: u32,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            max_fact_chars: 2000,
            reject_missing_fields: true,
            max_term_months: 300,
        }
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("max_fact_chars must be at least 1")]
    InvalidConfig,
    #[error("line {line}: {reason}")]
    BadRecord { line: usize, reason: String },
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum GoldField {
    Months(u32),
    Text(String),
}

#[derive(Debug, Deserialize)]
struct RawRecord {
    id: String,
    fact: String,
    charge: String,
    article: String,
    gold_term: GoldField,
}

/// Normalizes a gold answer to months: integers pass through, textual term
/// expressions (`"1年2个月"`, `"三年"`) are converted.
pub fn normalize_gold_term(raw: &GoldTerm) -> Result<u32, String> {
    match raw {
        GoldTerm::Months(n) => Ok(*n),
        GoldTerm::Text(text) => extract_prison_term_months(text)
            .ok_or_else(|| format!("gold term {text:?} has no parseable term expression")),
    }
}

/// A gold answer as it appears in a record file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GoldTerm {
    Months(u32),
    Text(String),
}

/// Keeps the leftmost `max_chars` characters of `fact`; shorter facts pass
/// through unchanged.
pub fn truncate_fact(fact: &str, max_chars: usize) -> String {
    if fact.chars().count() <= max_chars {
        fact.to_string()
    } else {
        fact.chars().take(max_chars).collect()
    }
}

fn case_from_record(
    record: RawRecord,
    line: usize,
    config: &DatasetConfig,
) -> Result<Case, DatasetError> {
    let bad = |reason: String| DatasetError::BadRecord { line, reason };
    let gold = match record.gold_term {
        GoldField::Months(n) => GoldTerm::Months(n),
        GoldField::Text(t) => GoldTerm::Text(t),
    };
    let gold_term_months = normalize_gold_term(&gold).map_err(bad)?;
    if gold_term_months > config.max_term_months {
        return Err(bad(format!(
            "gold term {gold_term_months} months exceeds the {} month ceiling",
            config.max_term_months
        )));
    }
    let fact = truncate_fact(&record.fact, config.max_fact_chars);
    if fact.is_empty() {
        return Err(bad("fact is empty".to_string()));
    }
    if record.charge.is_empty() {
        return Err(bad("charge is empty".to_string()));
    }
    if record.article.is_empty() {
        return Err(bad("article is empty".to_string()));
    }
    Ok(Case {
        id: record.id,
        fact,
        charge: record.charge,
        article: record.article,
        gold_term_months,
    })
}

fn parse_line(line_no: usize, line: &str, config: &DatasetConfig) -> Result<Case, DatasetError> {
    let record: RawRecord = serde_json::from_str(line).map_err(|e| DatasetError::BadRecord {
        line: line_no,
        reason: format!("malformed record: {e}"),
    })?;
    case_from_record(record, line_no, config)
}

/// Loads cases from a JSON-lines file in file order. Bad records abort the
/// load when `reject_missing_fields` is set, and are otherwise skipped with
/// a logged warning.
pub fn load_cases(path: &Path, config: &DatasetConfig) -> Result<Vec<Case>, DatasetError> {
    if config.max_fact_chars == 0 {
        return Err(DatasetError::InvalidConfig);
    }
    let content = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut cases = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match parse_line(idx + 1, line, config) {
            Ok(case) => cases.push(case),
            Err(err) if config.reject_missing_fields => return Err(err),
            Err(err) => log::warn!("skipping record: {err}"),
        }
    }
    Ok(cases)
}

/// Per-line validation report for the `validate` subcommand.
pub fn validate_lines(
    path: &Path,
    config: &DatasetConfig,
) -> Result<Vec<(usize, Option<String>)>, DatasetError> {
    let content = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut report = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = idx + 1;
        match parse_line(line_no, line, config) {
            Ok(_) => report.push((line_no, None)),
            Err(err) => report.push((line_no, Some(err.to_string()))),
        }
    }
    Ok(report)
}

/// Serializes cases back to the JSON-lines schema, so a load → write →
/// load round trip is field-for-field identical.
pub fn write_cases(path: &Path, cases: &[Case]) -> Result<(), DatasetError> {
    let mut out = Vec::new();
    for case in cases {
        let record = serde_json::json!({
            "id": case.id,
            "fact": case.fact,
            "charge": case.charge,
            "article": case.article,
            "gold_term": case.gold_term_months,
        });
        serde_json::to_writer(&mut out, &record).expect("serialize case");
        out.push(b'\n');
    }
    fs::File::create(path)
        .and_then(|mut f| f.write_all(&out))
        .map_err(|source| DatasetError::Io {
            path: path.display().to_string(),
            source,
        })
}

/// Maps records that embed the charge and article inside the fact text into
/// the five-field schema, splitting on the `罪名：`/`Charge:` and
/// `法条：`/`Article:` tails appended to the fact.
pub fn split_embedded_fact(fact: &str) -> Option<(String, String, String)> {
    let charge_markers = ["罪名：", "罪名:", "Charge:", "Crime:"];
    let article_markers = ["法条：", "法条:", "Article:", "Legal Articles:"];
    let find_last = |markers: &[&str]| -> Option<(usize, usize)> {
        markers
            .iter()
            .filter_map(|m| fact.rfind(m).map(|i| (i, i + m.len())))
            .max_by_key(|(i, _)| *i)
    };
    let (charge_at, charge_after) = find_last(&charge_markers)?;
    let (article_at, article_after) = find_last(&article_markers)?;
    if article_at <= charge_after {
        return None;
    }
    let body = fact[..charge_at].trim();
    let charge = fact[charge_after..article_at].trim();
    let article = fact[article_after..].trim();
    if body.is_empty() || charge.is_empty() || article.is_empty() {
        return None;
    }
    Some((body.to_string(), charge.to_string(), article.to_string()))
}
