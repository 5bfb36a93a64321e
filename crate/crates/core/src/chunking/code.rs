// SPDX-License-Identifier: Apache-2.0

use super::{Chunk, ChunkMethod, ChunkParams, Chunker};
use crate::corpus::Document;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnitKind {
    /// Heading section, paragraph run or thematic-break section.
    Prose,
    /// A fenced block, or one top-level declaration within it.
    Code,
}

/// A structural unit of a markdown document, as trimmed byte offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodeUnit {
    pub start: usize,
    pub end: usize,
    pub kind: UnitKind,
}

struct Line<'a> {
    start: usize,
    end: usize,
    text: &'a str,
}

fn lines(text: &str) -> Vec<Line<'_>> {
    let mut out = Vec::new();
    let mut start = 0;
    for piece in text.split_inclusive('\n') {
        let end = start + piece.len();
        out.push(Line {
            start,
            end,
            text: piece.trim_end_matches(['\n', '\r']),
        });
        start = end;
    }
    out
}

/// Up to three leading spaces, as markdown allows for block markers.
fn strip_indent(line: &str) -> Option<&str> {
    let indent = line.len() - line.trim_start_matches(' ').len();
    (indent <= 3).then(|| &line[indent..])
}

fn is_heading(line: &str) -> bool {
    let Some(rest) = strip_indent(line) else {
        return false;
    };
    let hashes = rest.len() - rest.trim_start_matches('#').len();
    (1..=6).contains(&hashes)
        && rest[hashes..]
            .chars()
            .next()
            .is_none_or(|c| c == ' ' || c == '\t')
}

fn is_thematic_break(line: &str) -> bool {
    let Some(rest) = strip_indent(line) else {
        return false;
    };
    let marks: Vec<char> = rest.chars().filter(|c| !c.is_whitespace()).collect();
    marks.len() >= 3 && matches!(marks[0], '-' | '*' | '_') && marks.iter().all(|&c| c == marks[0])
}

/// Returns (fence char, run length) when `line` opens or closes a fence.
fn fence(line: &str) -> Option<(char, usize)> {
    let rest = strip_indent(line)?;
    let c = rest.chars().next()?;
    if c != '`' && c != '~' {
        return None;
    }
    let n = rest.len() - rest.trim_start_matches(c).len();
    (n >= 3).then_some((c, n))
}

fn closes(line: &str, open: (char, usize)) -> bool {
    match fence(line) {
        Some((c, n)) => {
            let rest = strip_indent(line).unwrap_or(line);
            c == open.0 && n >= open.1 && rest[n..].trim().is_empty()
        }
        None => false,
    }
}

const MODIFIERS: [&str; 12] = [
    "pub",
    "pub(crate)",
    "export",
    "default",
    "async",
    "static",
    "public",
    "private",
    "protected",
    "abstract",
    "unsafe",
    "extern",
];
const DECL_KEYWORDS: [&str; 11] = [
    "fn",
    "def",
    "class",
    "function",
    "struct",
    "enum",
    "trait",
    "impl",
    "interface",
    "func",
    "fun",
];

/// Column-zero function/class-like declaration, matched lexically.
fn is_declaration(line: &str) -> bool {
    if line.starts_with(char::is_whitespace) {
        return false;
    }
    let mut words = line
        .split_whitespace()
        .skip_while(|w| MODIFIERS.contains(w));
    let Some(word) = words.next() else {
        return false;
    };
    let kw_end = word
        .find(|c: char| !(c.is_alphanumeric() || c == '_'))
        .unwrap_or(word.len());
    let kw = &word[..kw_end];
    if !DECL_KEYWORDS.contains(&kw) {
        return false;
    }
    let rest = &word[kw_end..];
    if !rest.is_empty() {
        return rest.starts_with(['(', '<', '{', '*']);
    }
    // go methods put the receiver first: `func (r *R) Name()`
    words
        .next()
        .and_then(|w| w.chars().next())
        .is_some_and(|c| c.is_alphabetic() || c == '_' || c == '<' || (kw == "func" && c == '('))
}

fn is_decoration(line: &str) -> bool {
    line.starts_with('@') || line.starts_with("#[")
}

fn trimmed(text: &str, start: usize, end: usize, kind: UnitKind) -> Option<CodeUnit> {
    let piece = &text[start..end];
    let t = piece.trim();
    if t.is_empty() {
        return None;
    }
    let s = start + (piece.len() - piece.trim_start().len());
    Some(CodeUnit {
        start: s,
        end: s + t.len(),
        kind,
    })
}

/// Splits markdown into structural units: boundaries before ATX headings,
/// thematic breaks and fences; a fenced block is further cut before each
/// column-zero declaration after the first (decorators stay attached).
pub fn code_units(text: &str) -> Vec<CodeUnit> {
    let ls = lines(text);
    let mut units = Vec::new();
    let mut unit_start = 0;
    let mut i = 0;
    while i < ls.len() {
        let line = &ls[i];
        if let Some(open) = fence(line.text) {
            units.extend(trimmed(text, unit_start, line.start, UnitKind::Prose));
            let mut piece_start = line.start;
            let mut seen_decl = false;
            let mut j = i + 1;
            while j < ls.len() && !closes(ls[j].text, open) {
                if is_declaration(ls[j].text) {
                    if seen_decl {
                        let mut k = j;
                        while k > i + 1 && is_decoration(ls[k - 1].text) {
                            k -= 1;
                        }
                        units.extend(trimmed(text, piece_start, ls[k].start, UnitKind::Code));
                        piece_start = ls[k].start;
                    }
                    seen_decl = true;
                }
                j += 1;
            }
            let block_end = ls.get(j).map_or(text.len(), |l| l.end);
            units.extend(trimmed(text, piece_start, block_end, UnitKind::Code));
            unit_start = block_end;
            i = j + 1;
            continue;
        }
        if is_heading(line.text) || is_thematic_break(line.text) {
            units.extend(trimmed(text, unit_start, line.start, UnitKind::Prose));
            unit_start = line.start;
        }
        i += 1;
    }
    units.extend(trimmed(text, unit_start, text.len(), UnitKind::Prose));
    units
}

impl Chunker {
    /// One chunk per structural unit. Prose units over the target size are
    /// re-cut into plain token windows; a code unit over it stays whole and
    /// is flagged oversized.
    pub fn chunk_code(&self, doc: &Document, params: &ChunkParams) -> Result<Vec<Chunk>> {
        Self::expect(params, ChunkMethod::Code)?;
        let fp = params.fingerprint();
        let mut out = Vec::new();
        for unit in code_units(&doc.text) {
            let slice = &doc.text[unit.start..unit.end];
            let n = self.tokenizer.count_tokens(slice);
            if n <= params.size || unit.kind == UnitKind::Code {
                out.push(Chunk::build(
                    doc,
                    unit.start,
                    unit.end,
                    params,
                    &fp,
                    self.tokenizer.as_ref(),
                    n > params.size,
                ));
                continue;
            }
            let tokens: Vec<_> = self
                .tokenizer
                .tokenize(slice)
                .into_iter()
                .map(|t| crate::corpus::TokenSpan {
                    start: t.start + unit.start,
                    end: t.end + unit.start,
                })
                .collect();
            out.extend(self.windows(doc, &tokens, params.size, params.size, params, &fp));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn firsts(text: &str) -> Vec<&str> {
        code_units(text)
            .iter()
            .map(|u| text[u.start..u.end].lines().next().unwrap())
            .collect()
    }

    #[test]
    fn headings_split() {
        let md = "# One\nalpha beta\n\n# Two\ngamma\n";
        assert_eq!(firsts(md), vec!["# One", "# Two"]);
    }

    #[test]
    fn fence_with_three_functions() {
        let md = "```python\ndef a():\n    return 1\n\ndef b():\n    return 2\n\n@cache\ndef c():\n    return 3\n```\n";
        assert_eq!(firsts(md), vec!["```python", "def b():", "@cache"]);
    }

    #[test]
    fn declarations() {
        assert!(is_declaration("def a():"));
        assert!(is_declaration("pub fn main() {"));
        assert!(is_declaration("export default function App() {"));
        assert!(is_declaration("class Foo:"));
        assert!(is_declaration("async def go():"));
        assert!(!is_declaration("    def nested():"));
        assert!(!is_declaration("define the thing"));
        assert!(!is_declaration("classes are nice"));
        assert!(!is_declaration("x = 1"));
        assert!(!is_declaration("def = 5"));
        assert!(is_declaration("impl<T> Foo for T {"));
        assert!(is_declaration("func (r *R) Name() {"));
        assert!(!is_declaration("def (x)"));
    }

    #[test]
    fn markers() {
        assert!(is_heading("## Title"));
        assert!(is_heading("#"));
        assert!(!is_heading("#hashtag"));
        assert!(!is_heading("    # indented code"));
        assert!(is_thematic_break("---"));
        assert!(is_thematic_break(" * * *"));
        assert!(!is_thematic_break("--"));
        assert!(!is_thematic_break("-- x"));
        assert_eq!(fence("```rust"), Some(('`', 3)));
        assert_eq!(fence("~~~~"), Some(('~', 4)));
        assert_eq!(fence("``x"), None);
    }

    #[test]
    fn heading_inside_fence_is_not_boundary() {
        let md = "Intro.\n```sh\n# comment\necho hi\n```\nAfter.";
        assert_eq!(firsts(md), vec!["Intro.", "```sh", "After."]);
    }

    #[test]
    fn unclosed_fence_runs_to_end() {
        let md = "```\nfn a() {}\nfn b() {}";
        assert_eq!(firsts(md), vec!["```", "fn b() {}"]);
    }

    fn code_doc(text: &str) -> Document {
        Document {
            id: "m".into(),
            title: String::new(),
            text: text.into(),
        }
    }

    #[test]
    fn sections_become_chunks() {
        let body = |w: &str| (0..39).map(|_| w).collect::<Vec<_>>().join(" ");
        let md = format!("# {}\n\n# {}\n", body("a"), body("b"));
        let p = ChunkParams::new(ChunkMethod::Code, 100, 0.0).unwrap();
        let c = Chunker::default().chunk_code(&code_doc(&md), &p).unwrap();
        assert_eq!(
            c.iter().map(|c| c.token_count).collect::<Vec<_>>(),
            vec![40, 40]
        );
    }

    #[test]
    fn unstructured_prose_falls_back_to_windows() {
        let text = (0..250)
            .map(|i| format!("w{i}"))
            .collect::<Vec<_>>()
            .join(" ");
        let p = ChunkParams::new(ChunkMethod::Code, 100, 0.0).unwrap();
        let c = Chunker::default().chunk_code(&code_doc(&text), &p).unwrap();
        assert_eq!(
            c.iter().map(|c| c.token_count).collect::<Vec<_>>(),
            vec![100, 100, 50]
        );
    }

    #[test]
    fn long_declaration_kept_whole() {
        let body = (0..60)
            .map(|i| format!("    x{i} = {i}"))
            .collect::<Vec<_>>()
            .join("\n");
        let md = format!("```python\ndef big():\n{body}\n```");
        let p = ChunkParams::new(ChunkMethod::Code, 50, 0.0).unwrap();
        let c = Chunker::default().chunk_code(&code_doc(&md), &p).unwrap();
        assert_eq!(c.len(), 1);
        assert!(c[0].oversized);
    }
}
