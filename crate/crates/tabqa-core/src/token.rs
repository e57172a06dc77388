//! Token counting for size bins and the utilization metric.
//!
//! The default tokenizer is rule-based so counts are reproducible offline:
//! text splits on whitespace, and each word further splits into maximal runs
//! of letters, digits, and other symbols. Counts are deterministic and
//! monotone under concatenation.

pub trait Tokenizer: Send + Sync {
    fn count(&self, text: &str) -> usize;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct RuleTokenizer;

#[derive(PartialEq, Clone, Copy)]
enum CharClass {
    Alpha,
    Digit,
    Other,
}

fn class_of(c: char) -> Option<CharClass> {
    if c.is_whitespace() {
        None
    } else if c.is_alphabetic() {
        Some(CharClass::Alpha)
    } else if c.is_ascii_digit() {
        Some(CharClass::Digit)
    } else {
        Some(CharClass::Other)
    }
}

impl Tokenizer for RuleTokenizer {
    fn count(&self, text: &str) -> usize {
        let mut count = 0;
        let mut prev: Option<CharClass> = None;
        for c in text.chars() {
            let class = class_of(c);
            if let Some(class) = class {
                if prev != Some(class) {
                    count += 1;
                }
            }
            prev = class;
        }
        count
    }
}

/// Convenience wrapper using the default tokenizer.
pub fn count_tokens(text: &str) -> usize {
    RuleTokenizer.count(text)
}

/// The tokens themselves, under the same run-splitting rules as
/// [`count_tokens`]. Used by the hashed-bag embedder.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut prev: Option<CharClass> = None;
    for c in text.chars() {
        let class = class_of(c);
        match class {
            Some(class) => {
                if prev != Some(class) && !current.is_empty() {
                    tokens.push(std::mem::take(&mut current));
                }
                current.push(c);
            }
            None => {
                if !current.is_empty() {
                    tokens.push(std::mem::take(&mut current));
                }
            }
        }
        prev = class;
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_is_zero() {
        assert_eq!(count_tokens(""), 0);
    }

    #[test]
    fn two_plain_words() {
        assert_eq!(count_tokens("hello world"), 2);
    }

    #[test]
    fn runs_split_by_class() {
        assert_eq!(count_tokens("abc123"), 2);
        assert_eq!(count_tokens("hello,"), 2);
        assert_eq!(count_tokens("1,234"), 3);
        assert_eq!(count_tokens("W 98-83"), 4);
        assert_eq!(count_tokens("..."), 1);
    }

    #[test]
    fn tokenize_yields_the_counted_tokens() {
        assert_eq!(tokenize("W 98-83"), ["W", "98", "-", "83"]);
        assert_eq!(tokenize("abc123"), ["abc", "123"]);
        assert!(tokenize("  \t").is_empty());
    }

    proptest! {
        #[test]
        fn tokenize_agrees_with_count(a in ".{0,60}") {
            prop_assert_eq!(tokenize(&a).len(), count_tokens(&a));
        }

        #[test]
        fn monotone_under_concatenation(a in ".{0,40}", b in ".{0,40}") {
            let ca = count_tokens(&a);
            let cb = count_tokens(&b);
            let cab = count_tokens(&format!("{a}{b}"));
            prop_assert!(cab >= ca.max(cb));
        }

        #[test]
        fn self_concat_not_smaller(a in ".{0,60}") {
            let doubled = format!("{a}{a}");
            prop_assert!(count_tokens(&doubled) >= count_tokens(&a));
        }
    }
}
