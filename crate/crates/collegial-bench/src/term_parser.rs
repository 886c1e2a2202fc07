//! Extraction and normalization of prison-term expressions from free text.
//!
//! Model outputs mix Chinese and Arabic numerals, year and month units, and
//! distractor numbers (money amounts, article numbers). This module converts
//! all of that into whole months, and parses the structured opinion and
//! consensus-verdict formats the deliberation prompts demand.

use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

/// Errors raised while parsing model output.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("character {0:?} is outside the Chinese numeral alphabet")]
    InvalidNumeralChar(char),
    #[error("empty numeral expression")]
    EmptyNumeral,
    #[error("no prison term found in text")]
    NoTerm,
    #[error("no conclusion marker found in text")]
    NoConclusion,
    #[error("conflicting conclusion markers (both yes and no present)")]
    AmbiguousConclusion,
}

/// One agent's structured sentencing output: a term in months plus the
/// rationale behind it.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ParsedOpinion {
    pub term_months: u32,
    pub rationale: String,
}

/// The presiding judge's consensus verdict: a binary conclusion and a
/// summary carrying the points of agreement or disagreement.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ConsensusParse {
    pub consensus: bool,
    pub summary: String,
}

/// Converts a Chinese numeral expression over 零一二两三四五六七八九十百千
/// to an integer. Handles the standard positional/multiplier reading
/// (`五十四` = 54, `三百零六` = 306) for values up to 9999.
///
/// Multi-character strings without a multiplier are read digit-by-digit
/// (`二零一二` = 2012), which is how calendar years are usually written.
pub fn chinese_numeral_to_int(text: &str) -> Result<u32, ParseError> {
    if text.is_empty() {
        return Err(ParseError::EmptyNumeral);
    }
    let digit = |c: char| -> Option<u32> {
        match c {
            '零' => Some(0),
            '一' => Some(1),
            '二' | '两' => Some(2),
            '三' => Some(3),
            '四' => Some(4),
            '五' => Some(5),
            '六' => Some(6),
            '七' => Some(7),
            '八' => Some(8),
            '九' => Some(9),
            _ => None,
        }
    };
    let chars: Vec<char> = text.chars().collect();
    let has_multiplier = chars.iter().any(|c| matches!(c, '十' | '百' | '千'));

    if !has_multiplier {
        // Digit-style reading; covers both single digits and year-like runs.
        let mut value: u32 = 0;
        for &c in &chars {
            let d = digit(c).ok_or(ParseError::InvalidNumeralChar(c))?;
            value = value.saturating_mul(10).saturating_add(d);
        }
        return Ok(value);
    }

    let mut total: u32 = 0;
    let mut current: u32 = 0;
    for &c in &chars {
        if let Some(d) = digit(c) {
            current = d;
            continue;
        }
        let factor = match c {
            '十' => 10,
            '百' => 100,
            '千' => 1000,
            other => return Err(ParseError::InvalidNumeralChar(other)),
        };
        // A bare multiplier stands for one unit: 十 = 10, 三百 = 300.
        let units = if current == 0 { 1 } else { current };
        total = total.saturating_add(units.saturating_mul(factor));
        current = 0;
    }
    Ok(total.saturating_add(current))
}

const CN_NUM: &str = "[零一二两三四五六七八九十百千]+";

fn term_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        // A term is <number><year unit>, optionally followed by
        // <number><month unit>, or a bare <number><month unit>.
        let num = format!(r"(?:[0-9]+|{CN_NUM})");
        let pattern = format!(
            r"(?x)
            (?:
                (?P<y>{num})[\s-]*(?:年|[Yy]ears?)
                (?:\s*(?:零|又|and)?\s*(?P<ym>{num})[\s-]*(?:个月|[Mm]onths?|月))?
            )
            |
            (?:(?P<m>{num})[\s-]*(?:个月|[Mm]onths?|月))
            "
        );
        Regex::new(&pattern).expect("term regex compiles")
    })
}

fn parse_number(text: &str) -> Option<u32> {
    if text.bytes().all(|b| b.is_ascii_digit()) {
        text.parse::<u32>().ok()
    } else {
        chinese_numeral_to_int(text).ok()
    }
}

fn term_from_capture(caps: &regex::Captures<'_>) -> Option<u32> {
    if let Some(y) = caps.name("y") {
        let years = parse_number(y.as_str())?;
        // Four-digit values before 年 are calendar years, not sentence lengths.
        if years >= 100 {
            return None;
        }
        let months = match caps.name("ym") {
            Some(m) => parse_number(m.as_str())?,
            None => 0,
        };
        Some(years.saturating_mul(12).saturating_add(months))
    } else {
        let m = caps.name("m")?;
        parse_number(m.as_str())
    }
}

/// Finds every prison-term expression in `text` and returns the last one,
/// converted to months. Year+month pairs written together (`三年六个月`)
/// count as a single expression. Returns `None` when the text carries no
/// term at all; day-level remainders are truncated to whole months.
pub fn extract_prison_term_months(text: &str) -> Option<u32> {
    let mut last = None;
    for caps in term_regex().captures_iter(text) {
        if let Some(months) = term_from_capture(&caps) {
            last = Some(months);
        }
    }
    last
}

fn term_marker_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)(?:sentence\s*term|刑期)").expect("marker regex"))
}

fn reason_marker_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)(?:reason|理由)\s*[:：]?").expect("marker regex"))
}

fn first_term_in(text: &str) -> Option<u32> {
    term_regex()
        .captures_iter(text)
        .find_map(|caps| term_from_capture(&caps))
}

fn bare_number_after_marker(text: &str) -> Option<u32> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"^\s*[:：]?\s*([0-9]+)").expect("bare number regex"));
    re.captures(text)
        .and_then(|c| c.get(1))
        .and_then(|m| m.as_str().parse::<u32>().ok())
}

/// Parses an agent's sentencing output produced under the opinion prompt
/// contract (`刑期：X个月` / `Sentence Term: X months` plus `理由`/`Reason`).
///
/// The term is read right after the last term marker; when the marker is
/// missing the whole text is scanned with [`extract_prison_term_months`].
/// The rationale is the text after the reason marker, or the full text when
/// no reason marker is present.
pub fn parse_opinion(text: &str) -> Result<ParsedOpinion, ParseError> {
    let term = match term_marker_regex().find_iter(text).last() {
        Some(marker) => {
            let after = &text[marker.end()..];
            first_term_in(after)
                .or_else(|| bare_number_after_marker(after))
                .or_else(|| extract_prison_term_months(text))
        }
        None => extract_prison_term_months(text),
    };
    let term_months = term.ok_or(ParseError::NoTerm)?;

    let rationale = match reason_marker_regex().find(text) {
        // An empty tail after the marker falls back to the whole text; the
        // rationale may only be empty when no reason marker was present.
        Some(marker) => match text[marker.end()..].trim() {
            "" => text.trim().to_string(),
            tail => tail.to_string(),
        },
        None => text.trim().to_string(),
    };
    Ok(ParsedOpinion {
        term_months,
        rationale,
    })
}

fn conclusion_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)(?:conclusion|结论)\s*[:：]?\s*(?P<v>yes|no|是|否)").expect("regex")
    })
}

/// Parses the presiding judge's consensus-evaluation output. Maps the
/// conclusion marker (`Conclusion: Yes/No`, `结论：是/否`) to a boolean; the
/// remainder of the text becomes the summary. Fails when the marker is
/// absent or when both yes and no conclusions appear.
pub fn parse_consensus(text: &str) -> Result<ConsensusParse, ParseError> {
    let mut verdict: Option<bool> = None;
    let mut summary_start = 0usize;
    for caps in conclusion_regex().captures_iter(text) {
        let value = matches!(
            caps.name("v").map(|m| m.as_str().to_lowercase()).as_deref(),
            Some("yes") | Some("是")
        );
        match verdict {
            Some(prev) if prev != value => return Err(ParseError::AmbiguousConclusion),
            _ => verdict = Some(value),
        }
        summary_start = caps.get(0).map(|m| m.end()).unwrap_or(0);
    }
    let consensus = verdict.ok_or(ParseError::NoConclusion)?;
    let mut summary = text[summary_start..].trim().to_string();
    if summary.is_empty() {
        summary = text.trim().to_string();
    }
    Ok(ConsensusParse { consensus, summary })
}
