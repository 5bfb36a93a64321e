// SPDX-License-Identifier: Apache-2.0

use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};

/// Byte range `[start, end)` of one token in its source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TokenSpan {
    pub start: usize,
    pub end: usize,
}

impl TokenSpan {
    pub fn text<'a>(&self, source: &'a str) -> &'a str {
        &source[self.start..self.end]
    }
}

/// Anything that can split text into budget-accountable tokens.
///
/// Implementations must be pure: equal input bytes give equal spans, and a
/// token never straddles whitespace.
pub trait Tokenizer: Send + Sync {
    fn tokenize(&self, text: &str) -> Vec<TokenSpan>;

    fn count_tokens(&self, text: &str) -> usize {
        self.tokenize(text).len()
    }
}

/// Maximal runs of alphanumeric codepoints form one token; every other
/// non-whitespace codepoint is a token on its own.
#[derive(Debug, Clone, Copy, Default)]
pub struct DefaultTokenizer;

impl DefaultTokenizer {
    fn scan(text: &str, mut emit: impl FnMut(usize, usize)) {
        let mut word_start: Option<usize> = None;
        for (i, c) in text.char_indices() {
            if c.is_alphanumeric() {
                if word_start.is_none() {
                    word_start = Some(i);
                }
                continue;
            }
            if let Some(s) = word_start.take() {
                emit(s, i);
            }
            if !c.is_whitespace() {
                emit(i, i + c.len_utf8());
            }
        }
        if let Some(s) = word_start {
            emit(s, text.len());
        }
    }
}

impl Tokenizer for DefaultTokenizer {
    fn tokenize(&self, text: &str) -> Vec<TokenSpan> {
        let mut out = Vec::new();
        Self::scan(text, |start, end| out.push(TokenSpan { start, end }));
        out
    }

    fn count_tokens(&self, text: &str) -> usize {
        let mut n = 0;
        Self::scan(text, |_, _| n += 1);
        n
    }
}

/// Greedy longest-match subword tokenizer over a vocabulary file, one entry
/// per line, with `##`-prefixed continuation pieces.
///
/// Pre-splits with [`DefaultTokenizer`]; a word with no full segmentation
/// counts as a single unknown token. Point this at the generator's vocabulary
/// to budget contexts in the generator's own units.
#[derive(Debug, Clone)]
pub struct VocabTokenizer {
    vocab: HashSet<String>,
    max_piece_chars: usize,
    lowercase: bool,
}

const CONTINUATION: &str = "##";

impl VocabTokenizer {
    pub fn new(entries: impl IntoIterator<Item = String>, lowercase: bool) -> Result<Self> {
        let vocab: HashSet<String> = entries
            .into_iter()
            .map(|e| e.trim_end_matches(['\r', '\n']).to_string())
            .filter(|e| !e.is_empty())
            .collect();
        if vocab.is_empty() {
            return Err(Error::Config("vocabulary is empty".into()));
        }
        let max_piece_chars = vocab
            .iter()
            .map(|e| e.trim_start_matches(CONTINUATION).chars().count())
            .max()
            .unwrap_or(1);
        Ok(Self {
            vocab,
            max_piece_chars,
            lowercase,
        })
    }

    pub fn from_file(path: &Path, lowercase: bool) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::new(raw.lines().map(str::to_string), lowercase)
    }

    fn contains(&self, piece: &str, continuation: bool) -> bool {
        let key = if self.lowercase {
            piece.to_lowercase()
        } else {
            piece.to_string()
        };
        if continuation {
            self.vocab.contains(&format!("{CONTINUATION}{key}"))
        } else {
            self.vocab.contains(&key)
        }
    }

    fn split_word(&self, text: &str, word: TokenSpan, out: &mut Vec<TokenSpan>) {
        let w = word.text(text);
        let bounds: Vec<usize> = w
            .char_indices()
            .map(|(i, _)| i)
            .chain(std::iter::once(w.len()))
            .collect();
        let mut pieces = Vec::new();
        let mut pos = 0;
        while pos < bounds.len() - 1 {
            let max_end = (pos + self.max_piece_chars).min(bounds.len() - 1);
            let found = (pos + 1..=max_end)
                .rev()
                .find(|&end| self.contains(&w[bounds[pos]..bounds[end]], pos > 0));
            match found {
                Some(end) => {
                    pieces.push(TokenSpan {
                        start: word.start + bounds[pos],
                        end: word.start + bounds[end],
                    });
                    pos = end;
                }
                None => {
                    out.push(word);
                    return;
                }
            }
        }
        out.extend(pieces);
    }
}

impl Tokenizer for VocabTokenizer {
    fn tokenize(&self, text: &str) -> Vec<TokenSpan> {
        let mut out = Vec::new();
        for word in DefaultTokenizer.tokenize(text) {
            self.split_word(text, word, &mut out);
        }
        out
    }
}
