//! Navigation and language metrics plus per-split aggregation.

pub mod lang;
pub mod nav;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use lang::{bleu2, lcs_len, metric_tokens, rouge_l, BLEU_SMOOTHING_EPSILON};
pub use nav::{
    goal_progress, goal_progress_with, pwsr, spl, success, GoalProgressMode, MetricError, PathOutcome,
    DEFAULT_SUCCESS_RADIUS,
};

use crate::dialog::EpisodeResult;

/// Means over a set of episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub split: String,
    pub episodes: usize,
    pub gp: f64,
    pub sr: f64,
    pub spl: f64,
    pub pwsr: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bleu2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rouge_l: Option<f64>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

impl SplitSummary {
    pub fn from_episodes(split: &str, eps: &[EpisodeResult]) -> Result<Self, MetricError> {
        if eps.is_empty() {
            return Err(MetricError::NoEpisodes);
        }
        let outcomes: Vec<PathOutcome> = eps.iter().map(EpisodeResult::outcome).collect();
        let lang = |f: fn(&EpisodeResult) -> Option<f64>| {
            let vals: Vec<f64> = eps.iter().filter_map(f).collect();
            (vals.len() == eps.len()).then(|| mean(vals.into_iter()))
        };
        Ok(Self {
            split: split.to_string(),
            episodes: eps.len(),
            gp: mean(eps.iter().map(|e| e.gp)),
            sr: mean(eps.iter().map(|e| e.success as u8 as f64)),
            spl: spl(&outcomes)?,
            pwsr: pwsr(&outcomes)?,
            bleu2: lang(|e| e.bleu2),
            rouge_l: lang(|e| e.rouge_l),
        })
    }
}

/// One helper's results on one protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub helper: String,
    pub protocol: String,
    pub splits: Vec<SplitSummary>,
}

impl MetricReport {
    pub fn split(&self, name: &str) -> Option<&SplitSummary> {
        self.splits.iter().find(|s| s.split == name)
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"))
}

/// Aligned plain-text table, one row per (helper, split).
pub fn render_table(reports: &[MetricReport]) -> String {
    let header = ["helper", "protocol", "split", "n", "GP", "SR", "SPL", "PWSR", "BLEU-2", "ROUGE-L"];
    let mut rows: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    for r in reports {
        for s in &r.splits {
            rows.push(vec![
                r.helper.clone(),
                r.protocol.clone(),
                s.split.clone(),
                s.episodes.to_string(),
                format!("{:.3}", s.gp),
                format!("{:.4}", s.sr),
                format!("{:.4}", s.spl),
                format!("{:.4}", s.pwsr),
                fmt_opt(s.bleu2),
                fmt_opt(s.rouge_l),
            ]);
        }
    }
    let widths: Vec<usize> = (0..header.len()).map(|c| rows.iter().map(|r| r[c].len()).max().unwrap()).collect();
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(
                |(c, cell)| {
                    if c < 3 {
                        format!("{cell:<w$}", w = widths[c])
                    } else {
                        format!("{cell:>w$}", w = widths[c])
                    }
                },
            )
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
        if i == 0 {
            let _ = writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
        }
    }
    out
}
