//! Offset-preserving word tokenizer.
//!
//! The output partitions the input: concatenating every span's text gives
//! back the original string byte for byte. Word spans are maximal runs of
//! letters, where an apostrophe or hyphen is absorbed only when it sits
//! between two letters ("post-war", "don't"). Everything else, including
//! digits, whitespace and punctuation, lands in non-word spans.

/// A contiguous slice of the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenSpan<'a> {
    pub text: &'a str,
    /// Byte offset of the first byte.
    pub start: usize,
    /// Byte offset one past the last byte.
    pub end: usize,
    pub is_word: bool,
}

fn is_letter(c: char) -> bool {
    c.is_alphabetic()
}

fn is_joiner(c: char) -> bool {
    matches!(c, '\'' | '\u{2019}' | '-')
}

pub fn tokenize(text: &str) -> Vec<TokenSpan<'_>> {
    let mut spans = Vec::new();
    let mut chars = text.char_indices().peekable();

    while let Some(&(start, c)) = chars.peek() {
        let is_word = is_letter(c);
        let mut end = start;
        if is_word {
            loop {
                // consume a run of letters
                while let Some(&(i, c)) = chars.peek() {
                    if !is_letter(c) {
                        break;
                    }
                    end = i + c.len_utf8();
                    chars.next();
                }
                // a joiner continues the word only when a letter follows it
                let mut ahead = text[end..].chars();
                match (ahead.next(), ahead.next()) {
                    (Some(j), Some(next)) if is_joiner(j) && is_letter(next) => {
                        chars.next();
                        end += j.len_utf8();
                    }
                    _ => break,
                }
            }
        } else {
            while let Some(&(i, c)) = chars.peek() {
                if is_letter(c) {
                    break;
                }
                end = i + c.len_utf8();
                chars.next();
            }
        }
        spans.push(TokenSpan {
            text: &text[start..end],
            start,
            end,
            is_word,
        });
    }
    spans
}

/// Iterator over the word spans only.
pub fn words(text: &str) -> impl Iterator<Item = TokenSpan<'_>> {
    tokenize(text).into_iter().filter(|s| s.is_word)
}

/// True when `s` tokenizes to exactly one word span covering all of it.
pub fn is_single_word(s: &str) -> bool {
    match tokenize(s).as_slice() {
        [only] => only.is_word,
        _ => false,
    }
}
