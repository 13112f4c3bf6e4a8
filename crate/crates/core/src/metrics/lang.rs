use std::collections::HashMap;

/// Numerator substituted for a zero n-gram match count.
pub const BLEU_SMOOTHING_EPSILON: f64 = 1e-9;

/// Lowercased word tokens with punctuation removed.
pub fn metric_tokens(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

fn ngram_counts<'a, S: AsRef<str>>(tokens: &'a [S], n: usize) -> HashMap<Vec<&'a str>, usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w.iter().map(|t| t.as_ref()).collect()).or_insert(0) += 1;
        }
    }
    counts
}

/// Sentence BLEU with uniform weights over 1- and 2-grams.
///
/// Clipped precisions against the max count over references, brevity penalty
/// against the closest reference length (shorter wins ties). A zero match
/// count is replaced by [`BLEU_SMOOTHING_EPSILON`].
pub fn bleu2<S: AsRef<str>, R: AsRef<[S]>>(candidate: &[S], references: &[R]) -> f64 {
    if candidate.is_empty() || references.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=2 {
        let cand = ngram_counts(candidate, n);
        let mut max_ref: HashMap<Vec<&str>, usize> = HashMap::new();
        for r in references {
            for (g, c) in ngram_counts(r.as_ref(), n) {
                let e = max_ref.entry(g).or_insert(0);
                *e = (*e).max(c);
            }
        }
        let total: usize = cand.values().sum();
        let matched: usize = cand.iter().map(|(g, c)| (*c).min(*max_ref.get(g).unwrap_or(&0))).sum();
        let numerator = if matched == 0 { BLEU_SMOOTHING_EPSILON } else { matched as f64 };
        log_sum += (numerator / total.max(1) as f64).ln();
    }
    let c = candidate.len();
    let r = references.iter().map(|r| r.as_ref().len()).min_by_key(|&len| (len.abs_diff(c), len)).unwrap();
    let bp = if c > r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    bp * (log_sum / 2.0).exp()
}

pub fn lcs_len<S: AsRef<str>>(a: &[S], b: &[S]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    for x in a {
        let mut cur = vec![0usize; b.len() + 1];
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x.as_ref() == y.as_ref() { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        prev = cur;
    }
    prev[b.len()]
}

/// LCS-based F1 (beta = 1).
pub fn rouge_l<S: AsRef<str>>(candidate: &[S], reference: &[S]) -> f64 {
    if candidate.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let l = lcs_len(candidate, reference) as f64;
    if l == 0.0 {
        return 0.0;
    }
    let p = l / candidate.len() as f64;
    let r = l / reference.len() as f64;
    2.0 * p * r / (p + r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> Vec<String> {
        metric_tokens(s)
    }

    #[test]
    fn bleu_identity_and_empty() {
        let c = t("go to the kitchen and stop");
        assert!((bleu2(&c, &[c.clone()]) - 1.0).abs() < 1e-12);
        assert_eq!(bleu2::<String, Vec<String>>(&[], &[c.clone()]), 0.0);
    }

    #[test]
    fn bleu_no_bigram_overlap_is_tiny() {
        assert!(bleu2(&t("kitchen the to go"), &[t("go to the kitchen")]) < 1e-3);
        assert!(bleu2(&t("alpha beta"), &[t("gamma delta")]) < 1e-3);
    }

    #[test]
    fn bleu_hand_counted() {
        // p1 = 4/4, p2 = 2/3, BP = exp(1 - 5/4)
        let v = bleu2(&t("go to the kitchen"), &[t("go to the red kitchen")]);
        assert!((v - 0.6358881766016378).abs() < 1e-12, "{v}");
    }

    #[test]
    fn bleu_picks_closest_reference_length() {
        let c = t("a b c");
        let refs = [t("a b c d e f g"), t("a b c")];
        assert!((bleu2(&c, &refs) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rouge_cases() {
        assert_eq!(rouge_l(&t("a b c"), &t("a b c")), 1.0);
        assert_eq!(rouge_l(&t("a b"), &t("c d")), 0.0);
        assert_eq!(rouge_l(&t("a b c d"), &t("a c d b")), 0.75);
        assert_eq!(rouge_l::<String>(&[], &[]), 0.0);
    }
}
