// SPDX-License-Identifier: Apache-2.0

const ARTICLES: [&str; 3] = ["a", "an", "the"];

fn is_punctuation(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace()
}

/// Lowercase, punctuation to spaces, drop standalone articles, collapse whitespace.
pub fn normalize_answer(text: &str) -> String {
    let spaced: String = text
        .to_lowercase()
        .chars()
        .map(|c| if is_punctuation(c) { ' ' } else { c })
        .collect();
    spaced
        .split_whitespace()
        .filter(|w| !ARTICLES.contains(w))
        .collect::<Vec<_>>()
        .join(" ")
}

/// 1 when `predicted` normalizes to the same string as any gold answer.
pub fn exact_match(predicted: &str, gold_answers: &[String]) -> u8 {
    let p = normalize_answer(predicted);
    u8::from(gold_answers.iter().any(|g| normalize_answer(g) == p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(normalize_answer("The Eiffel Tower!"), "eiffel tower");
        assert_eq!(normalize_answer("A  dog."), "dog");
        assert_eq!(normalize_answer("an answer, the end"), "answer end");
        assert_eq!(normalize_answer("Theater"), "theater");
        assert_eq!(normalize_answer(""), "");
    }

    #[test]
    fn em_examples() {
        assert_eq!(exact_match("Paris", &["paris".into()]), 1);
        assert_eq!(exact_match("in Paris", &["paris".into()]), 0);
        assert_eq!(
            exact_match("the  PARIS.", &["Lyon".into(), "paris".into()]),
            1
        );
    }

    proptest! {
        #[test]
        fn idempotent(s in "\\PC{0,40}") {
            let once = normalize_answer(&s);
            prop_assert_eq!(normalize_answer(&once), once);
        }

        #[test]
        fn em_symmetric_over_equivalent_golds(s in "[A-Za-z ,.!]{1,30}") {
            let alt = format!("The {}!!", s.to_uppercase());
            let golds_a = vec![s.clone()];
            let golds_b = vec![alt];
            prop_assert_eq!(exact_match(&s, &golds_a), exact_match(&s, &golds_b));
        }
    }
}
