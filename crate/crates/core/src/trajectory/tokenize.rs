//! Fixed tokenization rule for trajectory text.
//!
//! A token is one of:
//! - a newline `"\n"`;
//! - an optional single leading space followed by a maximal run of ASCII
//!   letters, or a maximal run of ASCII digits;
//! - an optional single leading space followed by one other non-space
//!   character;
//! - a lone space that cannot attach to a following token.
//!
//! Concatenating the tokens reproduces the input exactly.

/// Split `text` into tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let bytes: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let start = i;
        let c = bytes[i];
        if c == '\n' {
            tokens.push("\n".to_string());
            i += 1;
            continue;
        }
        if c == ' ' {
            match bytes.get(i + 1) {
                Some(&n) if n != ' ' && n != '\n' => i += 1,
                _ => {
                    tokens.push(" ".to_string());
                    i += 1;
                    continue;
                }
            }
        }
        let head = bytes[i];
        if head.is_ascii_alphabetic() {
            while i < bytes.len() && bytes[i].is_ascii_alphabetic() {
                i += 1;
            }
        } else if head.is_ascii_digit() {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
        } else {
            i += 1;
        }
        tokens.push(bytes[start..i].iter().collect());
    }
    tokens
}

/// Number of tokens `text` occupies.
pub fn token_count(text: &str) -> usize {
    tokenize(text).len()
}
