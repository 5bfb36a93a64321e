// SPDX-License-Identifier: Apache-2.0

//! Synthetic corpora for offline runs and tests.
//!
//! The QA corpus plants one answer sentence per document and a chosen number
//! of decoy sentences elsewhere. Decoys repeat the question's entity three
//! times, so under BM25 they outrank the planted chunk and push it down to
//! roughly rank `decoys + 1`.

use std::io::Write;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::corpus::{Document, QAPair};
use crate::error::{Error, Result};

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";
const ANSWER_STEMS: &[&str] = &[
    "quartz", "amber", "cobalt", "saffron", "jasper", "indigo", "copper", "marble", "cedar",
    "ivory", "onyx", "russet", "sable", "topaz", "umber", "violet", "walnut", "zircon", "basalt",
    "garnet",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ToySpec {
    pub n_docs: usize,
    pub sentences_per_doc: usize,
    pub min_words: usize,
    pub max_words: usize,
    /// Question `i` gets `i % (max_decoys + 1)` decoy sentences.
    pub max_decoys: usize,
    pub seed: u64,
}

impl Default for ToySpec {
    fn default() -> Self {
        Self {
            n_docs: 20,
            sentences_per_doc: 12,
            min_words: 8,
            max_words: 14,
            max_decoys: 2,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Planted {
    pub question_id: String,
    pub doc_id: String,
    pub decoys: usize,
}

#[derive(Debug, Clone)]
pub struct ToyDataset {
    pub docs: Vec<Document>,
    pub qa: Vec<QAPair>,
    pub planted: Vec<Planted>,
}

fn filler_word(rng: &mut ChaCha8Rng) -> String {
    let syllables = rng.random_range(2..=3);
    let mut w = String::new();
    for _ in 0..syllables {
        w.push(*CONSONANTS.choose(rng).unwrap() as char);
        w.push(*VOWELS.choose(rng).unwrap() as char);
    }
    w
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn filler_sentence(rng: &mut ChaCha8Rng, vocab: &[String], min: usize, max: usize) -> String {
    let n = rng.random_range(min..=max);
    let words: Vec<&str> = (0..n)
        .map(|_| vocab.choose(rng).unwrap().as_str())
        .collect();
    format!("{} {}.", capitalize(words[0]), words[1..].join(" "))
}

fn entity(i: usize) -> String {
    format!("Zorvath{i:02}")
}

fn answer(i: usize) -> String {
    format!("{}{}", ANSWER_STEMS[i % ANSWER_STEMS.len()], 1000 + i)
}

fn vocabulary(rng: &mut ChaCha8Rng, n: usize) -> Vec<String> {
    (0..n).map(|_| filler_word(rng)).collect()
}

/// Documents with one planted answer each and rank-controlling decoys.
pub fn toy_corpus(spec: &ToySpec) -> Result<ToyDataset> {
    if spec.n_docs < 2
        || spec.sentences_per_doc < 1
        || spec.min_words < 2
        || spec.max_words < spec.min_words
    {
        return Err(Error::domain(
            "toy spec needs n_docs >= 2, sentences >= 1, 2 <= min_words <= max_words",
        ));
    }
    if spec.max_decoys >= spec.n_docs {
        return Err(Error::domain("max_decoys must be below n_docs"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let vocab = vocabulary(&mut rng, 300);
    let mut bodies: Vec<Vec<String>> = (0..spec.n_docs)
        .map(|_| {
            (0..spec.sentences_per_doc)
                .map(|_| filler_sentence(&mut rng, &vocab, spec.min_words, spec.max_words))
                .collect()
        })
        .collect();

    let mut qa = Vec::with_capacity(spec.n_docs);
    let mut planted = Vec::with_capacity(spec.n_docs);
    for i in 0..spec.n_docs {
        let e = entity(i);
        let pos = rng.random_range(0..=bodies[i].len());
        bodies[i].insert(pos, format!("The vault code of {e} is {}.", answer(i)));
        let decoys = i % (spec.max_decoys + 1);
        for j in 0..decoys {
            let target = (i + 1 + j) % spec.n_docs;
            let pos = rng.random_range(0..=bodies[target].len());
            bodies[target].insert(
                pos,
                format!("The vault code of {e} is unknown to {e} and {e}."),
            );
        }
        let qid = format!("q{i:03}");
        qa.push(QAPair {
            id: qid.clone(),
            question: format!("What is the vault code of {e}?"),
            gold_answers: vec![answer(i)],
        });
        planted.push(Planted {
            question_id: qid,
            doc_id: format!("toy{i:03}"),
            decoys,
        });
    }
    let docs = bodies
        .into_iter()
        .enumerate()
        .map(|(i, sents)| Document {
            id: format!("toy{i:03}"),
            title: format!("Toy document {i}"),
            text: sents.join(" "),
        })
        .collect();
    Ok(ToyDataset { docs, qa, planted })
}

/// Documents of exactly `tokens_per_doc` default-tokenizer tokens: filler
/// words with a period closing every sentence.
pub fn long_doc_corpus(n_docs: usize, tokens_per_doc: usize, seed: u64) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = vocabulary(&mut rng, 500);
    (0..n_docs)
        .map(|d| {
            let mut text = String::new();
            let mut emitted = 0;
            let mut in_sentence = 0;
            while emitted < tokens_per_doc {
                let remaining = tokens_per_doc - emitted;
                if in_sentence >= 4 && (remaining == 1 || rng.random_bool(0.1)) {
                    text.push('.');
                    in_sentence = 0;
                } else {
                    let w = vocab.choose(&mut rng).unwrap();
                    if !text.is_empty() {
                        text.push(' ');
                    }
                    if in_sentence == 0 {
                        text.push_str(&capitalize(w));
                    } else {
                        text.push_str(w);
                    }
                    in_sentence += 1;
                }
                emitted += 1;
            }
            Document {
                id: format!("long{d:04}"),
                title: String::new(),
                text,
            }
        })
        .collect()
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut f =
        std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
    for item in items {
        let line = serde_json::to_string(item).expect("serializable record");
        writeln!(f, "{line}").map_err(|e| Error::io(path, e))?;
    }
    f.flush().map_err(|e| Error::io(path, e))
}

impl ToyDataset {
    /// Writes `docs.jsonl`, `qa.jsonl` and `planted.jsonl` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_jsonl(&dir.join("docs.jsonl"), &self.docs)?;
        write_jsonl(&dir.join("qa.jsonl"), &self.qa)?;
        write_jsonl(&dir.join("planted.jsonl"), &self.planted)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::count_tokens;

    #[test]
    fn deterministic_and_planted() {
        let a = toy_corpus(&ToySpec::default()).unwrap();
        let b = toy_corpus(&ToySpec::default()).unwrap();
        assert_eq!(a.docs, b.docs);
        assert_eq!(a.docs.len(), 20);
        for (q, p) in a.qa.iter().zip(&a.planted) {
            let gold = &q.gold_answers[0];
            let holders: Vec<&str> = a
                .docs
                .iter()
                .filter(|d| d.text.contains(gold.as_str()))
                .map(|d| d.id.as_str())
                .collect();
            assert_eq!(holders, vec![p.doc_id.as_str()]);
        }
        assert_eq!(a.planted.iter().map(|p| p.decoys).max(), Some(2));
    }

    #[test]
    fn long_docs_have_exact_token_counts() {
        for d in long_doc_corpus(5, 2000, 1) {
            assert_eq!(count_tokens(&d.text), 2000);
        }
        assert_eq!(count_tokens(&long_doc_corpus(1, 7, 2)[0].text), 7);
    }
}
