//! Prompt construction and action parsing.
//!
//! The prompt is three blocks (statistics, constraints, output schema) rendered
//! from the versioned templates in `assets/prompt/`. Templates use `{{name}}`
//! placeholders; an unknown placeholder is left verbatim.

mod parse;
mod stats;

use std::fmt::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocation::RawAction;
use crate::netenv::{ChannelId, NetworkState};

pub use parse::{parse_action, render_action, ParseError};
pub use stats::{summarize_state, StatSummary, Stats, IDLE_LIST_CAP};

pub const STATS_TEMPLATE: &str = include_str!("../../assets/prompt/stats.v1.txt");
pub const CONSTRAINTS_TEMPLATE: &str = include_str!("../../assets/prompt/constraints.v1.txt");
pub const SCHEMA_TEMPLATE: &str = include_str!("../../assets/prompt/schema.v1.txt");

pub const MIN_BUDGET_TOKENS: usize = 256;
pub const DEFAULT_BUDGET_TOKENS: usize = 2048;

/// Top-k sizes tried, largest first, between the full table and statistics only.
const TOP_K_LADDER: [usize; 4] = [64, 32, 16, 8];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SerializeError {
    #[error("token budget {budget} too small (minimum {minimum})")]
    BudgetTooSmall { budget: usize, minimum: usize },
}

/// How much per-entity detail follows the summary statistics.
/// Ordered from least to most detail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "level", rename_all = "snake_case")]
pub enum DetailLevel {
    StatsOnly,
    TopUsers { k: usize },
    Full,
}

impl fmt::Display for DetailLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::StatsOnly => f.write_str("stats_only"),
            Self::TopUsers { k } => write!(f, "top_{k}"),
            Self::Full => f.write_str("full"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub stats_block: String,
    pub constraints_block: String,
    pub schema_block: String,
    /// `estimate_tokens(&self.prompt_text())`.
    pub token_estimate: usize,
    pub budget: usize,
    pub detail: DetailLevel,
}

impl PromptBundle {
    pub fn prompt_text(&self) -> String {
        join_blocks(&self.stats_block, &self.constraints_block, &self.schema_block)
    }
}

fn join_blocks(a: &str, b: &str, c: &str) -> String {
    format!("{a}\n\n{b}\n\n{c}")
}

/// `ceil(bytes / 4)`.
pub fn estimate_tokens(text: &str) -> usize {
    text.len().div_ceil(4)
}

const FILLER_LINE: &str = "# rank requesters by received power and give the widest idle channels first\n";

/// Python block ending in the action dictionary, padded with comment lines
/// until it reaches `min_tokens` estimated tokens.
pub fn render_code_block(action: &RawAction, min_tokens: usize) -> String {
    let action = render_action(action);
    let mut out = String::from("```python\n");
    let target = min_tokens * 4;
    while out.len() + action.len() + 4 < target {
        out.push_str(FILLER_LINE);
    }
    out.push_str(&action);
    out.push_str("\n```");
    out
}

/// Replaces every `{{key}}` with its value. Unknown keys are left in place.
pub fn render_template(template: &str, vars: &[(&str, String)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find("{{") {
        out.push_str(&rest[..open]);
        let after = &rest[open + 2..];
        match after.find("}}") {
            Some(close) => {
                let key = &after[..close];
                match vars.iter().find(|(k, _)| *k == key) {
                    Some((_, v)) => out.push_str(v),
                    None => {
                        out.push_str("{{");
                        out.push_str(key);
                        out.push_str("}}");
                    }
                }
                rest = &after[close + 2..];
            }
            None => {
                out.push_str(&rest[open..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

fn fmt_stats(s: &Option<Stats>) -> String {
    s.map_or_else(|| "n/a".to_string(), |s| s.to_string())
}

fn idle_list(summary: &StatSummary) -> String {
    let ids: Vec<String> = summary.idle_channel_ids.iter().map(|c| c.to_string()).collect();
    let mut out = format!("[{}]", ids.join(", "));
    let hidden = summary.idle_count - summary.idle_channel_ids.len();
    if hidden > 0 {
        write!(out, " (+{hidden} more)").expect("writing to a String");
    }
    out
}

/// Per-user table (strongest first) followed by the complete idle-channel
/// list (widest first). The top-k cut applies to users only.
fn detail_table(state: &NetworkState, level: DetailLevel) -> String {
    let limit = match level {
        DetailLevel::StatsOnly => return "(per-user detail omitted)".into(),
        DetailLevel::TopUsers { k } => k,
        DetailLevel::Full => usize::MAX,
    };
    let mut channels: Vec<(f64, u32)> = state
        .channels()
        .iter()
        .filter(|c| !c.occupied)
        .map(|c| (c.bandwidth_hz, c.id.0))
        .collect();
    channels.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let widest = channels.first().map(|&(_, id)| ChannelId(id));
    // Rate grows with bandwidth, so the best rate of every user is on the
    // widest idle channel and ranking by it equals ranking by power.
    let mut users: Vec<(f64, f64, u32)> = state
        .active_ids()
        .iter()
        .map(|&u| {
            let best = widest.and_then(|c| state.pair_rate(u, c)).unwrap_or(0.0);
            (best, state.user_power(u).unwrap_or(0.0), u.0)
        })
        .collect();
    users.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.total_cmp(&a.1)).then(a.2.cmp(&b.2)));

    let mut out = String::from("users (id power_w best_rate_bps):\n");
    for (r, p, id) in users.iter().take(limit) {
        writeln!(out, "{id} {p:.4e} {r:.4e}").expect("writing to a String");
    }
    out.push_str("idle channels (id bandwidth_hz):");
    for (b, id) in &channels {
        write!(out, "\n{id} {b:.0}").expect("writing to a String");
    }
    out
}

fn stats_block(state: &NetworkState, summary: &StatSummary, level: DetailLevel) -> String {
    render_template(
        STATS_TEMPLATE,
        &[
            ("slot", state.slot().to_string()),
            ("k_t", summary.k_t.to_string()),
            ("noise_dbm_hz", format!("{}", summary.noise_density_dbm_hz)),
            ("idle_count", summary.idle_count.to_string()),
            ("idle_ids", idle_list(summary)),
            ("power_stats", fmt_stats(&summary.power_stats)),
            ("bandwidth_stats", fmt_stats(&summary.bandwidth_stats)),
            ("detail_level", level.to_string()),
            ("detail", detail_table(state, level)),
        ],
    )
    .trim_end()
    .to_string()
}

fn candidate_levels(k_t: usize) -> Vec<DetailLevel> {
    let mut levels = vec![DetailLevel::Full];
    levels.extend(
        TOP_K_LADDER
            .iter()
            .filter(|&&k| k < k_t)
            .map(|&k| DetailLevel::TopUsers { k }),
    );
    levels.push(DetailLevel::StatsOnly);
    levels
}

/// Renders the three-block prompt at the richest detail level that fits in
/// `budget_tokens`.
pub fn serialize(state: &NetworkState, budget_tokens: usize) -> Result<PromptBundle, SerializeError> {
    if budget_tokens < MIN_BUDGET_TOKENS {
        return Err(SerializeError::BudgetTooSmall {
            budget: budget_tokens,
            minimum: MIN_BUDGET_TOKENS,
        });
    }
    let summary = summarize_state(state);
    let constraints_block = CONSTRAINTS_TEMPLATE.trim_end().to_string();
    let schema_block = SCHEMA_TEMPLATE.trim_end().to_string();
    let mut smallest = usize::MAX;
    for detail in candidate_levels(summary.k_t) {
        let stats_block = stats_block(state, &summary, detail);
        let token_estimate = estimate_tokens(&join_blocks(&stats_block, &constraints_block, &schema_block));
        smallest = smallest.min(token_estimate);
        if token_estimate <= budget_tokens {
            return Ok(PromptBundle {
                stats_block,
                constraints_block,
                schema_block,
                token_estimate,
                budget: budget_tokens,
                detail,
            });
        }
    }
    Err(SerializeError::BudgetTooSmall {
        budget: budget_tokens,
        minimum: smallest,
    })
}
