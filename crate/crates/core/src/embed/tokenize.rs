// SPDX-License-Identifier: Apache-2.0

use crate::pycpg::lexer::{tokenize_fragment, TokenKind};

/// Token emitted for an empty statement.
pub const EMPTY_TOKEN: &str = "<empty>";

/// Splits an identifier on underscores and case transitions
/// (`parseHTTPHeader` → `parse`, `http`, `header`).
pub fn split_identifier(ident: &str) -> Vec<String> {
    let mut out = Vec::new();
    for part in ident.split('_').filter(|p| !p.is_empty()) {
        let chars: Vec<char> = part.chars().collect();
        let mut cur = String::new();
        for (i, &c) in chars.iter().enumerate() {
            if i > 0 && c.is_uppercase() {
                let prev = chars[i - 1];
                let next_lower = chars.get(i + 1).is_some_and(|n| n.is_lowercase());
                if prev.is_lowercase() || prev.is_ascii_digit() || (prev.is_uppercase() && next_lower) {
                    out.push(std::mem::take(&mut cur).to_lowercase());
                }
            }
            cur.push(c);
        }
        if !cur.is_empty() {
            out.push(cur.to_lowercase());
        }
    }
    if out.is_empty() {
        out.push(ident.to_string());
    }
    out
}

/// Statement text to embedding tokens: identifiers split into lowercase
/// subwords, numbers, operators and string literals kept whole.
pub fn tokenize_code(code: &str) -> Vec<String> {
    let mut out = Vec::new();
    for t in tokenize_fragment(code) {
        match t.kind {
            TokenKind::Name => out.extend(split_identifier(&t.text)),
            _ => out.push(t.text.to_lowercase()),
        }
    }
    if out.is_empty() {
        out.push(EMPTY_TOKEN.to_string());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn listing_call() {
        assert_eq!(
            tokenize_code("yamlconfig.update(yaml.load(open(includes)))"),
            ["yamlconfig", ".", "update", "(", "yaml", ".", "load", "(", "open", "(", "includes", ")", ")", ")"]
        );
    }

    #[test]
    fn empty_and_underscores() {
        assert_eq!(tokenize_code(""), ["<empty>"]);
        assert_eq!(tokenize_code("   "), ["<empty>"]);
        assert_eq!(tokenize_code("is_public"), ["is", "public"]);
        assert_eq!(tokenize_code("__init__"), ["init"]);
        assert_eq!(tokenize_code("_"), ["_"]);
    }

    #[test]
    fn case_transitions() {
        assert_eq!(split_identifier("parseHTTPHeader"), ["parse", "http", "header"]);
        assert_eq!(split_identifier("CSRF_COOKIE_HTTPONLY"), ["csrf", "cookie", "httponly"]);
        assert_eq!(split_identifier("utf8Decode"), ["utf8", "decode"]);
    }

    #[test]
    fn strings_operators_numbers() {
        assert_eq!(
            tokenize_code("x **= 0x1F if s != 'A b' else -1"),
            ["x", "**=", "0x1f", "if", "s", "!=", "'a b'", "else", "-", "1"]
        );
    }
}
