use std::collections::{BTreeSet, HashMap};

pub const PAD: &str = "[PAD]";
pub const CLS: &str = "[CLS]";
pub const MSK: &str = "[MSK]";
pub const EOS: &str = "[EOS]";
pub const SEP: &str = "[SEP]";
pub const UNK: &str = "[UNK]";
pub const SPECIALS: [&str; 6] = [PAD, CLS, MSK, EOS, SEP, UNK];

pub const PAD_ID: usize = 0;
pub const CLS_ID: usize = 1;
pub const MSK_ID: usize = 2;
pub const EOS_ID: usize = 3;
pub const SEP_ID: usize = 4;
pub const UNK_ID: usize = 5;

fn is_enumerator(chunk: &str) -> bool {
    chunk.len() >= 2 && chunk.ends_with('.') && chunk[..chunk.len() - 1].bytes().all(|b| b.is_ascii_digit())
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\''
}

/// Lowercase word/punctuation tokens; enumerators like `3.` stay whole.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.to_lowercase().split_whitespace() {
        if is_enumerator(chunk) {
            out.push(chunk.to_string());
            continue;
        }
        let mut word = String::new();
        for c in chunk.chars() {
            if is_word_char(c) {
                word.push(c);
            } else {
                if !word.is_empty() {
                    out.push(std::mem::take(&mut word));
                }
                out.push(c.to_string());
            }
        }
        if !word.is_empty() {
            out.push(word);
        }
    }
    out
}

/// Joins tokens, attaching punctuation to the preceding token.
pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut out = String::new();
    for t in tokens {
        let t = t.as_ref();
        let attach = t.chars().count() == 1 && !t.chars().all(is_word_char);
        if !out.is_empty() && !attach {
            out.push(' ');
        }
        out.push_str(t);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Specials first, then the sorted distinct tokens of `texts` and `extra`,
    /// capped at `max_size` entries in total.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>, extra: &[String], max_size: usize) -> Self {
        let mut words: BTreeSet<String> = texts.into_iter().flat_map(tokenize).collect();
        words.extend(extra.iter().flat_map(|e| tokenize(e)));
        let mut tokens: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        tokens.extend(words.into_iter().filter(|w| !SPECIALS.contains(&w.as_str())));
        tokens.truncate(max_size.max(SPECIALS.len()));
        Self::from_tokens(tokens)
    }

    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { tokens, index }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn is_special(id: usize) -> bool {
        id < SPECIALS.len()
    }

    pub fn encode(&self, text: &str) -> Vec<usize> {
        tokenize(text).iter().map(|t| self.id(t)).collect()
    }

    /// Text of the non-special ids.
    pub fn decode(&self, ids: &[usize]) -> String {
        let toks: Vec<&str> = ids.iter().filter(|&&i| !Self::is_special(i)).map(|&i| self.token(i)).collect();
        detokenize(&toks)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_enumerated_steps() {
        let t = tokenize("1. Go to the kitchen. 2. Stop at the plant.");
        assert_eq!(t, ["1.", "go", "to", "the", "kitchen", ".", "2.", "stop", "at", "the", "plant", "."]);
        assert_eq!(detokenize(&t), "1. go to the kitchen. 2. stop at the plant.");
    }

    #[test]
    fn round_trip_on_normalized_text() {
        for s in [
            "okay, go to the lobby, then stop at the lamp.",
            "where should i go to find the plant? i am in the lobby.",
            "i'd go left and then up the stairs.",
        ] {
            assert_eq!(detokenize(&tokenize(s)), s);
        }
    }

    #[test]
    fn specials_are_distinct_and_first() {
        let v = Vocabulary::build(["go to the kitchen."], &[], 512);
        for (i, s) in SPECIALS.iter().enumerate() {
            assert_eq!(v.id(s), i);
        }
        assert_eq!(v.id("zebra"), UNK_ID);
        let ids = v.encode("go to the kitchen.");
        assert_eq!(v.decode(&ids), "go to the kitchen.");
        let mut with_specials = ids.clone();
        with_specials.push(EOS_ID);
        assert_eq!(v.decode(&with_specials), "go to the kitchen.");
    }

    #[test]
    fn serde_rebuilds_index() {
        let v = Vocabulary::build(["a b c"], &[], 512);
        let json = serde_json::to_string(v.tokens()).unwrap();
        let back = Vocabulary::from_tokens(serde_json::from_str(&json).unwrap());
        assert_eq!(back.id("b"), v.id("b"));
    }
}
