// SPDX-License-Identifier: Apache-2.0

use std::collections::HashSet;
use std::path::Path;

use super::tokenize::Tokenizer;
use crate::error::{Error, Result};

const DEFAULT_ABBREVIATIONS: &str = include_str!("abbreviations.txt");

const TERMINATORS: [char; 3] = ['.', '!', '?'];
const CLOSERS: [char; 7] = ['"', '\'', ')', ']', '»', '’', '”'];
const OPENERS: [char; 6] = ['"', '\'', '(', '«', '‘', '“'];

/// Byte range of one sentence plus its token count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SentenceSpan {
    pub start: usize,
    pub end: usize,
    pub token_count: usize,
}

impl SentenceSpan {
    pub fn text<'a>(&self, source: &'a str) -> &'a str {
        &source[self.start..self.end]
    }
}

/// Rule-based sentence splitter.
///
/// A boundary follows a run of `.`/`!`/`?` (plus any closing quotes or
/// brackets) when whitespace and then an uppercase letter, opening quote or
/// digit come next, unless the run is a single period ending a listed
/// abbreviation. A blank line is always a boundary.
#[derive(Debug, Clone)]
pub struct SentenceSegmenter {
    abbreviations: HashSet<String>,
}

impl Default for SentenceSegmenter {
    fn default() -> Self {
        Self::with_abbreviations(DEFAULT_ABBREVIATIONS.lines())
    }
}

impl SentenceSegmenter {
    /// Entries are matched case-insensitively with any trailing period removed.
    pub fn with_abbreviations<'a>(entries: impl IntoIterator<Item = &'a str>) -> Self {
        let abbreviations = entries
            .into_iter()
            .map(|e| e.trim().trim_end_matches('.').to_lowercase())
            .filter(|e| !e.is_empty())
            .collect();
        Self { abbreviations }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::with_abbreviations(raw.lines()))
    }

    pub fn is_abbreviation(&self, word: &str) -> bool {
        self.abbreviations.contains(&word.to_lowercase())
    }

    /// Byte offsets where one sentence ends and whitespace before the next begins.
    fn boundaries(&self, text: &str) -> Vec<usize> {
        let chars: Vec<(usize, char)> = text.char_indices().collect();
        let at = |i: usize| chars.get(i).map(|&(_, c)| c);
        let offset = |i: usize| chars.get(i).map_or(text.len(), |&(o, _)| o);
        let mut out = Vec::new();

        let mut i = 0;
        while i < chars.len() {
            let c = chars[i].1;
            if c == '\n' {
                let mut j = i + 1;
                while matches!(at(j), Some(w) if w != '\n' && w.is_whitespace()) {
                    j += 1;
                }
                if at(j) == Some('\n') {
                    out.push(offset(i));
                    i = j + 1;
                    continue;
                }
            }
            if !TERMINATORS.contains(&c) {
                i += 1;
                continue;
            }
            let run_start = i;
            let mut j = i;
            while matches!(at(j), Some(t) if TERMINATORS.contains(&t)) {
                j += 1;
            }
            let single_period = j - run_start == 1 && c == '.';
            while matches!(at(j), Some(t) if CLOSERS.contains(&t)) {
                j += 1;
            }
            let end = j;
            if !matches!(at(j), Some(w) if w.is_whitespace()) {
                i = j.max(i + 1);
                continue;
            }
            while matches!(at(j), Some(w) if w.is_whitespace()) {
                j += 1;
            }
            let opens_sentence = match at(j) {
                Some(n) => n.is_uppercase() || n.is_ascii_digit() || OPENERS.contains(&n),
                None => false,
            };
            if opens_sentence
                && !(single_period && self.abbreviation_before(text, offset(run_start)))
            {
                out.push(offset(end));
            }
            i = end;
        }
        out
    }

    fn abbreviation_before(&self, text: &str, period: usize) -> bool {
        let head = &text[..period];
        let word_start = head
            .char_indices()
            .rev()
            .find(|(_, c)| c.is_whitespace())
            .map_or(0, |(i, c)| i + c.len_utf8());
        let word = head[word_start..].trim_start_matches(|c: char| OPENERS.contains(&c));
        !word.is_empty() && self.is_abbreviation(word)
    }

    pub fn segment(&self, text: &str, tokenizer: &dyn Tokenizer) -> Vec<SentenceSpan> {
        let mut cuts = self.boundaries(text);
        cuts.push(text.len());
        let mut spans = Vec::with_capacity(cuts.len());
        let mut prev = 0;
        for cut in cuts {
            let piece = &text[prev..cut];
            let lead = piece.len() - piece.trim_start().len();
            let trimmed = piece.trim();
            if !trimmed.is_empty() {
                let start = prev + lead;
                let end = start + trimmed.len();
                spans.push(SentenceSpan {
                    start,
                    end,
                    token_count: tokenizer.count_tokens(trimmed),
                });
            }
            prev = cut;
        }
        spans
    }
}
