//! Append-only precedent store shared across case workers.

use std::collections::HashMap;
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use crate::dataset::Case;
use crate::engine::types::FinalJudgment;

/// One remembered outcome: a short case summary and the final term.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrecedentEntry {
    pub case_id: String,
    pub summary: String,
    pub term_months: u32,
}

/// Precedents keyed by charge name. Appends are serialized; reads may run
/// concurrently. Entries are never mutated once stored.
#[derive(Debug, Default)]
pub struct PrecedentMemory {
    by_charge: RwLock<HashMap<String, Vec<PrecedentEntry>>>,
}

const SUMMARY_CHARS: usize = 200;

impl PrecedentMemory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends the case outcome under its charge.
    pub fn remember(&self, case: &Case, judgment: &FinalJudgment) {
        let summary: String = case.fact.chars().take(SUMMARY_CHARS).collect();
        let entry = PrecedentEntry {
            case_id: case.id.clone(),
            summary,
            term_months: judgment.term_months,
        };
        self.by_charge
            .write()
            .expect("memory lock")
            .entry(case.charge.clone())
            .or_default()
            .push(entry);
    }

    /// Up to `k` most recent precedents for the case's charge, newest first.
    pub fn recall(&self, case: &Case, k: usize) -> Vec<PrecedentEntry> {
        if k == 0 {
            return Vec::new();
        }
        let guard = self.by_charge.read().expect("memory lock");
        match guard.get(&case.charge) {
            Some(entries) => entries.iter().rev().take(k).cloned().collect(),
            None => Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.by_charge
            .read()
            .expect("memory lock")
            .values()
            .map(Vec::len)
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
