//! Deterministic rule backend for step parsing.

use std::sync::OnceLock;

use regex::Regex;

use super::StepInstruction;

/// Words the rule backend may introduce that are not copied from the input.
pub const REWRITE_LEXICON: &[&str] = &["enter", "go", "yeah", "yes"];

/// Filler lexicon and rewrite switches for [`RuleParser`].
///
/// The default lexicon approximates how a completion model tidies human
/// guidance: acknowledgements stay as their own step, apologies and hedges go.
#[derive(Debug, Clone)]
pub struct RuleParser {
    /// Prefixes stripped from the start of every clause (repeatedly).
    pub leading_fillers: Vec<String>,
    /// Sentences starting with one of these words are dropped entirely.
    pub dropped_sentence_starts: Vec<String>,
    /// Acknowledgements split off as their own step.
    pub acknowledgements: Vec<String>,
}

impl Default for RuleParser {
    fn default() -> Self {
        let s = |xs: &[&str]| xs.iter().map(|x| x.to_string()).collect();
        Self {
            leading_fillers: s(&[
                "and",
                "but",
                "so",
                "then",
                "okay",
                "ok",
                "um",
                "uh",
                "well",
                "now",
                "i would",
                "i'd",
                "i think",
                "you should",
                "you need to",
                "you want to",
                "you can",
            ]),
            dropped_sentence_starts: s(&["sorry", "thanks", "thank you", "no problem", "my bad"]),
            acknowledgements: s(&["yeah", "yes", "yep"]),
        }
    }
}

fn connective_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r",?\s+and\s+then\s+|,\s*then\s+|\s+then\s+|,\s*and\s+|\s+and\s+|\s+(?:till|until)\s+you\s+")
            .unwrap()
    })
}

fn sentence_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[.!?;]+(?:\s+|$)").unwrap())
}

fn direction_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(?:the\s+)?(left|right)\b").unwrap())
}

fn exit_it_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(exit|leave)\s+it\b\s*").unwrap())
}

/// Collapses whitespace runs and trims.
pub fn normalize_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Splits `"1. a 2. b"` into `["a", "b"]` when the text is enumerated from 1.
pub(crate) fn split_enumerated(text: &str) -> Option<Vec<String>> {
    let rest = text.strip_prefix("1.")?;
    if !(rest.is_empty() || rest.starts_with(' ')) {
        return None;
    }
    let mut items = Vec::new();
    let mut rest = rest;
    let mut next = 2;
    loop {
        let marker = format!(" {next}.");
        let cut = rest.match_indices(&marker).map(|(i, _)| i).find(|&i| {
            let after = &rest[i + marker.len()..];
            after.is_empty() || after.starts_with(' ')
        });
        match cut {
            Some(i) => {
                items.push(rest[..i].trim().to_string());
                rest = &rest[i + marker.len()..];
                next += 1;
            }
            None => {
                items.push(rest.trim().to_string());
                break;
            }
        }
    }
    Some(items)
}

fn strip_word_prefix<'a>(s: &'a str, prefix: &str) -> Option<&'a str> {
    let rest = s.strip_prefix(prefix)?;
    if rest.is_empty() {
        Some(rest)
    } else if rest.starts_with(' ') || rest.starts_with(',') {
        Some(rest.trim_start_matches([' ', ',']))
    } else {
        None
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().collect::<String>() + c.as_str(),
        None => String::new(),
    }
}

impl RuleParser {
    /// Parses free-form guidance into numbered imperative steps.
    ///
    /// Returns at least one step for any input containing a non-space
    /// character; if every clause is filler the whole utterance is kept as one step.
    pub fn parse(&self, response: &str) -> Vec<StepInstruction> {
        let text = normalize_whitespace(&response.to_lowercase());
        if text.is_empty() {
            return Vec::new();
        }
        let chunks = split_enumerated(&text).unwrap_or_else(|| vec![text.clone()]);
        let mut steps: Vec<String> = Vec::new();
        for chunk in &chunks {
            for sentence in sentence_re().split(chunk) {
                self.parse_sentence(sentence, &mut steps);
            }
        }
        if steps.is_empty() {
            let whole = text.trim_end_matches(['.', ',', ';', '!', '?', ' ']);
            steps.push(whole.to_string());
        }
        steps
            .into_iter()
            .enumerate()
            .map(|(i, s)| StepInstruction { index: i + 1, text: format!("{}.", capitalize(&s)) })
            .collect()
    }

    fn strip_fillers<'a>(&self, mut s: &'a str) -> &'a str {
        'outer: loop {
            s = s.trim_matches([' ', ',']);
            for f in &self.leading_fillers {
                if let Some(rest) = strip_word_prefix(s, f) {
                    s = rest;
                    continue 'outer;
                }
            }
            return s;
        }
    }

    fn parse_sentence(&self, sentence: &str, out: &mut Vec<String>) {
        let mut s = self.strip_fillers(sentence.trim());
        if s.is_empty() {
            return;
        }
        if self.dropped_sentence_starts.iter().any(|d| strip_word_prefix(s, d).is_some()) {
            return;
        }
        for ack in &self.acknowledgements {
            if let Some(rest) = strip_word_prefix(s, ack) {
                out.push(ack.clone());
                s = self.strip_fillers(rest);
                break;
            }
        }
        for clause in connective_re().split(s) {
            if let Some(step) = self.rewrite_clause(clause) {
                out.push(step);
            }
        }
    }

    fn rewrite_clause(&self, clause: &str) -> Option<String> {
        let c = self.strip_fillers(clause);
        let c = c.trim_end_matches(['.', ',', ';', '!', '?', ' ']);
        if c.is_empty() {
            return None;
        }
        let c = match strip_word_prefix(c, "go into") {
            Some(rest) => format!("enter {rest}"),
            None => c.to_string(),
        };
        let c = exit_it_re().replace(&c, "$1 ").trim_end().to_string();
        let c = direction_re().replace(&c, "go $1").to_string();
        Some(c)
    }
}

/// [`RuleParser::parse`] with the default lexicon.
pub fn rule_parse(response: &str) -> Vec<StepInstruction> {
    RuleParser::default().parse(response)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(r: &str) -> Vec<String> {
        rule_parse(r).into_iter().map(|s| s.text).collect()
    }

    #[test]
    fn single_clause() {
        assert_eq!(texts("Go back."), ["Go back."]);
    }

    #[test]
    fn table_rows() {
        assert_eq!(
            texts("Go into the bedroom and walk through it and exit it by using a door on the left."),
            ["Enter the bedroom.", "Walk through it.", "Exit by using a door on the left."]
        );
        assert_eq!(
            texts("Yeah keep going around the outside till you get to the end. And sorry about the mixup at first."),
            ["Yeah.", "Keep going around the outside.", "Get to the end."]
        );
        assert_eq!(
            texts("Go straight a little, then the right and go downstairs."),
            ["Go straight a little.", "Go right.", "Go downstairs."]
        );
        assert_eq!(texts("I would go back."), ["Go back."]);
    }

    #[test]
    fn whitespace_insensitive() {
        assert_eq!(
            texts("  go   to the kitchen,\tthen  stop at the lamp. "),
            texts("go to the kitchen, then stop at the lamp.")
        );
    }

    #[test]
    fn oracle_style_connectives() {
        assert_eq!(
            texts("okay, go to the kitchen, then go to the hallway and then stop at the plant. sorry about the mixup."),
            ["Go to the kitchen.", "Go to the hallway.", "Stop at the plant."]
        );
    }

    #[test]
    fn enumerated_input() {
        assert_eq!(
            texts("1. Enter the bedroom. 2. Walk through it. 3. Exit by using a door on the left."),
            ["Enter the bedroom.", "Walk through it.", "Exit by using a door on the left."]
        );
        assert_eq!(
            texts("1. yes. 2. go to the kitchen 3. go upstairs."),
            ["Yes.", "Go to the kitchen.", "Go upstairs."]
        );
        assert_eq!(split_enumerated("1.5 meters"), None);
    }

    #[test]
    fn all_filler_keeps_whole_text() {
        assert_eq!(texts("Sorry."), ["Sorry."]);
        assert!(rule_parse("   ").is_empty());
    }

    #[test]
    fn indices_are_contiguous() {
        let steps = rule_parse("go left and then go right, then stop.");
        assert_eq!(steps.iter().map(|s| s.index).collect::<Vec<_>>(), [1, 2, 3]);
    }
}
