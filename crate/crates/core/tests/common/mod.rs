// SPDX-License-Identifier: Apache-2.0

//! Independent reference implementations used as test oracles.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};
use std::sync::OnceLock;

use chunklab::chunking::{Chunk, ChunkMethod};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;

fn token_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[\p{Alphabetic}\p{N}]+|\S").unwrap())
}

/// Byte spans of tokens: alphanumeric runs, or any other single non-space char.
pub fn ref_tokens(text: &str) -> Vec<(usize, usize)> {
    token_re()
        .find_iter(text)
        .map(|m| (m.start(), m.end()))
        .collect()
}

/// Token windows in closed form: `1 + ceil((n - S) / stride)` windows when n > S.
pub fn ref_windows(n: usize, size: usize, stride: usize) -> Vec<(usize, usize)> {
    if n == 0 {
        return Vec::new();
    }
    let count = if n <= size {
        1
    } else {
        1 + (n - size).div_ceil(stride)
    };
    (0..count)
        .map(|k| (k * stride, (k * stride + size).min(n)))
        .collect()
}

/// Byte spans of token windows over `text`.
pub fn ref_window_spans(text: &str, size: usize, overlap: f64) -> Vec<(usize, usize)> {
    let toks = ref_tokens(text);
    let stride = size - (size as f64 * overlap).round() as usize;
    ref_windows(toks.len(), size, stride)
        .into_iter()
        .map(|(s, e)| (toks[s].0, toks[e - 1].1))
        .collect()
}

/// SQuAD-style answer normalization written with regexes.
pub fn ref_normalize(s: &str) -> String {
    static PUNCT: OnceLock<Regex> = OnceLock::new();
    static ARTICLES: OnceLock<Regex> = OnceLock::new();
    let punct = PUNCT.get_or_init(|| Regex::new(r"[^\p{Alphabetic}\p{N}\s]").unwrap());
    let articles = ARTICLES.get_or_init(|| Regex::new(r"\b(a|an|the)\b").unwrap());
    let lower = s.to_lowercase();
    let no_punct = punct.replace_all(&lower, " ");
    let no_art = articles.replace_all(&no_punct, " ");
    no_art.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn terms(text: &str) -> Vec<String> {
    ref_tokens(text)
        .into_iter()
        .map(|(s, e)| &text[s..e])
        .filter(|t| t.chars().any(char::is_alphanumeric))
        .map(str::to_lowercase)
        .collect()
}

fn counts(text: &str) -> BTreeMap<String, f64> {
    let mut m = BTreeMap::new();
    for t in terms(text) {
        *m.entry(t).or_insert(0.0) += 1.0;
    }
    m
}

/// Scores every chunk against the query with textbook BM25 and sorts by
/// score desc, chunk id asc; zero scores are dropped.
pub fn ref_bm25_rank(
    chunks: &[Chunk],
    query: &str,
    k: usize,
    k1: f64,
    b: f64,
) -> Vec<(String, f64)> {
    let n = chunks.len() as f64;
    let docs: Vec<BTreeMap<String, f64>> = chunks.iter().map(|c| counts(&c.text)).collect();
    let lens: Vec<f64> = chunks
        .iter()
        .map(|c| ref_tokens(&c.text).len() as f64)
        .collect();
    let avg = (lens.iter().sum::<f64>() / n).max(1.0);
    let mut df: HashMap<&str, f64> = HashMap::new();
    for d in &docs {
        for t in d.keys() {
            *df.entry(t).or_insert(0.0) += 1.0;
        }
    }
    let q = counts(query);
    let mut scored: Vec<(String, f64)> = chunks
        .iter()
        .zip(&docs)
        .zip(&lens)
        .map(|((c, d), &len)| {
            let len = len.max(1.0);
            let mut s = 0.0;
            for (t, qtf) in &q {
                if let Some(&tf) = d.get(t) {
                    let dfi = df[t.as_str()];
                    let idf = (1.0 + (n - dfi + 0.5) / (dfi + 0.5)).ln();
                    s += qtf * idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len / avg));
                }
            }
            (c.chunk_id.clone(), s)
        })
        .filter(|(_, s)| *s > 0.0)
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    scored.truncate(k);
    scored
}

/// Naive percentile bootstrap drawing indices from the same seeded stream.
pub fn ref_bootstrap(values: &[f64], b: usize, level: f64, seed: u64) -> (f64, f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means = Vec::with_capacity(b);
    for _ in 0..b {
        let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        means.push(idx.iter().map(|&i| values[i]).sum::<f64>() / n as f64);
    }
    means.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pct = |q: f64| {
        let pos = q * (b - 1) as f64;
        let (lo, frac) = (pos.floor() as usize, pos.fract());
        if lo + 1 < b {
            means[lo] * (1.0 - frac) + means[lo + 1] * frac
        } else {
            means[lo]
        }
    };
    let a = (1.0 - level) / 2.0;
    (mean, pct(a).min(mean), pct(1.0 - a).max(mean))
}

/// Chunk with `tokens` one-letter words as its text.
pub fn word_chunk(id: &str, tokens: usize) -> Chunk {
    let text = vec!["w"; tokens].join(" ");
    Chunk {
        chunk_id: id.to_string(),
        doc_id: "d".into(),
        start: 0,
        end: text.len(),
        text,
        token_count: tokens,
        method: ChunkMethod::Token,
        oversized: false,
        params_fingerprint: String::new(),
    }
}

pub fn text_chunk(id: &str, text: &str) -> Chunk {
    Chunk {
        chunk_id: id.to_string(),
        doc_id: "d".into(),
        start: 0,
        end: text.len(),
        text: text.to_string(),
        token_count: ref_tokens(text).len(),
        method: ChunkMethod::Sentence,
        oversized: false,
        params_fingerprint: String::new(),
    }
}

const WORDS: &[&str] = &[
    "river", "stone", "light", "north", "paper", "glass", "music", "field", "cloud", "engine",
    "market", "garden", "winter", "silver", "forest", "harbor", "signal", "castle", "valley",
    "copper",
];
const ABBREVS: &[&str] = &["Dr.", "Mr.", "e.g.", "etc.", "U.S.", "No.", "St."];

/// Random prose with abbreviations, quotes, numbers and blank lines.
pub fn random_prose(rng: &mut ChaCha8Rng, sentences: usize) -> String {
    let mut out = String::new();
    for i in 0..sentences {
        if i > 0 {
            out.push_str(if rng.random_bool(0.1) { "\n\n" } else { " " });
        }
        let n = rng.random_range(3..25);
        let mut words = Vec::with_capacity(n);
        for j in 0..n {
            let w = match rng.random_range(0..20) {
                0 => ABBREVS[rng.random_range(0..ABBREVS.len())].to_string(),
                1 => rng.random_range(1..2000).to_string(),
                2 => format!("\"{}\"", WORDS[rng.random_range(0..WORDS.len())]),
                3 => format!("{},", WORDS[rng.random_range(0..WORDS.len())]),
                _ => WORDS[rng.random_range(0..WORDS.len())].to_string(),
            };
            words.push(if j == 0 {
                let mut c = w.chars();
                c.next()
                    .map(|f| f.to_uppercase().chain(c).collect())
                    .unwrap_or_default()
            } else {
                w
            });
        }
        out.push_str(&words.join(" "));
        out.push_str([".", "!", "?", ".\"", "..."][rng.random_range(0..5)]);
    }
    out
}
