//! Deterministic rule-based sentence splitter.
//!
//! A boundary is placed after a run of `.`, `!` or `?` (plus any closing
//! quotes or brackets) when it is followed by end-of-text, or by whitespace
//! and then an uppercase letter (optionally behind an opening quote or
//! bracket). A period that ends a known abbreviation or a single-letter
//! initial never closes a sentence. Blank lines are hard boundaries.

/// Fragments shorter than this (in characters, after trimming) are dropped.
pub const MIN_SENTENCE_CHARS: usize = 2;

/// Tokens (compared case-insensitively, including their final period) that
/// never end a sentence.
pub const ABBREVIATIONS: &[&str] = &[
    "dr.", "mr.", "mrs.", "ms.", "prof.", "sr.", "jr.", "st.", "mt.", "gen.", "col.", "lt.", "capt.",
    "sen.", "rep.", "gov.", "rev.", "hon.", "e.g.", "i.e.", "cf.", "vs.", "viz.", "al.", "approx.",
    "fig.", "figs.", "eq.", "eqs.", "no.", "nos.", "vol.", "vols.", "ch.", "sec.", "pp.", "ed.", "eds.",
    "inc.", "ltd.", "co.", "corp.", "dept.", "est.", "u.s.", "u.k.", "u.n.", "e.u.", "a.m.", "p.m.",
    "jan.", "feb.", "mar.", "apr.", "jun.", "jul.", "aug.", "sep.", "sept.", "oct.", "nov.", "dec.",
];

const TERMINATORS: [char; 3] = ['.', '!', '?'];
const CLOSERS: [char; 6] = ['"', '\'', ')', ']', '\u{201d}', '\u{2019}'];
const OPENERS: [char; 5] = ['"', '\'', '(', '[', '\u{201c}'];

pub fn segment(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for block in split_blank_lines(text) {
        split_block(block, &mut out);
    }
    out
}

fn split_blank_lines(text: &str) -> Vec<&str> {
    let mut blocks = Vec::new();
    let mut start = 0;
    let mut line_start = 0;
    for (i, c) in text.char_indices() {
        if c == '\n' {
            let line = &text[line_start..i];
            if line.trim().is_empty() && line_start > start {
                blocks.push(&text[start..line_start]);
                start = i + 1;
            }
            line_start = i + 1;
        }
    }
    blocks.push(&text[start..]);
    blocks
}

fn push_sentence(fragment: &str, out: &mut Vec<String>) {
    let s = fragment.split_whitespace().collect::<Vec<_>>().join(" ");
    if s.chars().count() >= MIN_SENTENCE_CHARS {
        out.push(s);
    }
}

fn split_block(block: &str, out: &mut Vec<String>) {
    let chars: Vec<(usize, char)> = block.char_indices().collect();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        let (_, c) = chars[i];
        if !TERMINATORS.contains(&c) {
            i += 1;
            continue;
        }
        let term_pos = i;
        let mut end = i + 1;
        while end < chars.len() && TERMINATORS.contains(&chars[end].1) {
            end += 1;
        }
        while end < chars.len() && CLOSERS.contains(&chars[end].1) {
            end += 1;
        }
        let byte_end = chars.get(end).map_or(block.len(), |&(b, _)| b);

        if is_boundary(&chars, end) && !(c == '.' && ends_with_abbreviation(block, &chars, term_pos)) {
            push_sentence(&block[start..byte_end], out);
            start = byte_end;
        }
        i = end;
    }
    if start < block.len() {
        push_sentence(&block[start..], out);
    }
}

fn is_boundary(chars: &[(usize, char)], after: usize) -> bool {
    let mut j = after;
    if j >= chars.len() || chars[j..].iter().all(|&(_, c)| c.is_whitespace()) {
        return true;
    }
    if !chars[j].1.is_whitespace() {
        return false;
    }
    while j < chars.len() && chars[j].1.is_whitespace() {
        j += 1;
    }
    while j < chars.len() && OPENERS.contains(&chars[j].1) {
        j += 1;
    }
    j < chars.len() && chars[j].1.is_uppercase()
}

/// True when the word ending at the period at `period_idx` is an
/// abbreviation or a single-letter initial such as the "J." in "J. Smith".
fn ends_with_abbreviation(block: &str, chars: &[(usize, char)], period_idx: usize) -> bool {
    let mut k = period_idx;
    while k > 0 && !chars[k - 1].1.is_whitespace() && !OPENERS.contains(&chars[k - 1].1) {
        k -= 1;
    }
    let word_start = chars[k].0;
    let word_end = chars[period_idx].0 + 1;
    let word = block[word_start..word_end].to_lowercase();
    if ABBREVIATIONS.contains(&word.as_str()) {
        return true;
    }
    let letters: Vec<char> = word.chars().collect();
    letters.len() == 2 && letters[0].is_alphabetic()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_input() {
        assert!(segment("").is_empty());
        assert!(segment("   \n\t ").is_empty());
    }

    #[test]
    fn two_plain_sentences() {
        assert_eq!(
            segment("It launched in 1990. It still operates."),
            vec!["It launched in 1990.", "It still operates."]
        );
    }

    #[test]
    fn abbreviations_are_guarded() {
        assert_eq!(
            segment("Dr. Smith agreed. See e.g. Fig. 2 for details."),
            vec!["Dr. Smith agreed.", "See e.g. Fig. 2 for details."]
        );
        assert_eq!(
            segment("The U.S. Congress funded it. NASA built it."),
            vec!["The U.S. Congress funded it.", "NASA built it."]
        );
        assert_eq!(segment("Edwin P. Hubble was born in 1889."), vec!["Edwin P. Hubble was born in 1889."]);
    }

    #[test]
    fn lowercase_after_period_does_not_split() {
        assert_eq!(segment("Version 2.5 is out. then more."), vec!["Version 2.5 is out. then more."]);
    }

    #[test]
    fn no_terminator_is_one_sentence() {
        assert_eq!(segment("a sentence without an ending"), vec!["a sentence without an ending"]);
    }

    #[test]
    fn question_exclamation_and_quotes() {
        assert_eq!(
            segment("Why did it work?! \"Nobody knows.\" (Really.) Fine!"),
            vec!["Why did it work?!", "\"Nobody knows.\"", "(Really.)", "Fine!"]
        );
    }

    #[test]
    fn blank_lines_are_boundaries() {
        assert_eq!(
            segment("**Revenge**\n\nHamlet seeks revenge. Claudius fears him.\n\n- closing note"),
            vec!["**Revenge**", "Hamlet seeks revenge.", "Claudius fears him.", "- closing note"]
        );
    }

    #[test]
    fn short_fragments_are_dropped() {
        assert_eq!(segment("Ok. A. B"), vec!["Ok.", "A. B"]);
        assert_eq!(segment("x"), Vec::<String>::new());
        assert_eq!(segment("Yes! I"), vec!["Yes!"]);
    }

    #[test]
    fn whitespace_is_normalized() {
        assert_eq!(segment("  It   orbits\nEarth.  "), vec!["It orbits Earth."]);
    }

    proptest! {
        #[test]
        fn idempotent_on_own_output(text in "[A-Za-z .!?,\n]{0,120}") {
            for sentence in segment(&text) {
                prop_assert_eq!(segment(&sentence), vec![sentence.clone()]);
            }
        }
    }
}
