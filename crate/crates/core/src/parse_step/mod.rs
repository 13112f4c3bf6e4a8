//! Parse-by-Step response normalization.
//!
//! Free-form guidance is rewritten into numbered imperative steps, either by
//! a one-shot prompt sent to a completion service or by the offline
//! [`rule`] backend. Training targets are the rendered step list.

pub mod remote;
pub mod rule;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use remote::{CompletionClient, HttpCompletion, RemoteBackend, RemoteConfig};
pub use rule::{normalize_whitespace, rule_parse, RuleParser, REWRITE_LEXICON};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepInstruction {
    /// 1-based position in the step list.
    pub index: usize,
    pub text: String,
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("response is empty")]
    EmptyResponse,
    #[error("completion backend failed after {attempts} attempt(s): {message}")]
    Remote { raw_response: String, attempts: usize, message: String },
}

/// One-shot prompt with a blank for the response to be parsed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub exemplar_block: String,
    pub blank_marker: String,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self {
            exemplar_block: concat!(
                "Commander says: 'Yes to the kitchen. Go to the left of the fireplace and then all the way up the stairs'.\n",
                "Step by step: 1. Yes. 2. go to the kitchen 3. go the left of the fireplace, 4. go upstairs.\n",
                "Commander says: \"____\". step by step: 1."
            )
            .to_string(),
            blank_marker: "____".to_string(),
        }
    }
}

/// Substitutes the response (surrounding whitespace trimmed) into the blank.
pub fn build_prompt(response: &str, template: &PromptTemplate) -> Result<String, ParseError> {
    let r = response.trim();
    if r.is_empty() {
        return Err(ParseError::EmptyResponse);
    }
    Ok(template.exemplar_block.replacen(&template.blank_marker, r, 1))
}

pub enum Backend {
    Rule(RuleParser),
    Remote(RemoteBackend),
}

impl Backend {
    pub fn rule() -> Self {
        Backend::Rule(RuleParser::default())
    }
}

/// Rewrites a response into steps with the chosen backend.
pub fn parse_by_step(response: &str, backend: &Backend) -> Result<Vec<StepInstruction>, ParseError> {
    if response.trim().is_empty() {
        return Err(ParseError::EmptyResponse);
    }
    match backend {
        Backend::Rule(p) => Ok(p.parse(response)),
        Backend::Remote(r) => r.parse(response),
    }
}

/// Renders steps as `"1. <s1> 2. <s2> ..."`.
pub fn format_steps(steps: &[StepInstruction]) -> String {
    steps.iter().map(|s| format!("{}. {}", s.index, s.text)).collect::<Vec<_>>().join(" ")
}

/// The lowercase training target built from a raw response.
pub fn training_target(response: &str, backend: &Backend) -> Result<String, ParseError> {
    Ok(format_steps(&parse_by_step(response, backend)?).to_lowercase())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prompt_contains_response_and_trailing_enumerator() {
        let p = build_prompt("Go back.", &PromptTemplate::default()).unwrap();
        assert!(p.contains("Commander says: \"Go back.\""));
        assert!(p.ends_with("step by step: 1."));
        assert_eq!(p.matches("step by step: 1.").count(), 1);
    }

    #[test]
    fn prompt_trims_only_surrounding_whitespace() {
        let t = PromptTemplate::default();
        let p = build_prompt("  go  left ,  then stop \n", &t).unwrap();
        assert!(p.contains("\"go  left ,  then stop\""));
        assert_eq!(p, build_prompt("  go  left ,  then stop \n", &t).unwrap());
        assert!(matches!(build_prompt(" ", &t), Err(ParseError::EmptyResponse)));
    }

    #[test]
    fn rule_backend_through_dispatch() {
        let steps = parse_by_step("I would go back.", &Backend::rule()).unwrap();
        assert_eq!(format_steps(&steps), "1. Go back.");
        assert!(matches!(parse_by_step("", &Backend::rule()), Err(ParseError::EmptyResponse)));
    }

    #[test]
    fn training_target_is_lowercase_enumeration() {
        let y = training_target("go to the kitchen and then stop at the lamp.", &Backend::rule()).unwrap();
        assert_eq!(y, "1. go to the kitchen. 2. stop at the lamp.");
    }
}
