// SPDX-License-Identifier: Apache-2.0

//! Python tokenizer producing logical lines.
//!
//! Only what statement segmentation and def/use extraction need is
//! modelled: names, numbers, strings (with prefixes, triple quotes and
//! f-strings), operators, bracket-aware line joining and indentation.

use super::SyntaxError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Name,
    Number,
    Str,
    Op,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    /// 1-based line of the first character.
    pub line: usize,
    /// 1-based line of the last character.
    pub end_line: usize,
    pub col: usize,
    /// Byte offsets into the lexed source.
    pub start: usize,
    pub end: usize,
}

impl Token {
    pub fn is_op(&self, op: &str) -> bool {
        self.kind == TokenKind::Op && self.text == op
    }

    pub fn is_name(&self, name: &str) -> bool {
        self.kind == TokenKind::Name && self.text == name
    }

    /// String prefix letters, lowercased (`"f"`, `"rb"`, ...).
    pub fn str_prefix(&self) -> String {
        if self.kind != TokenKind::Str {
            return String::new();
        }
        self.text
            .chars()
            .take_while(|c| *c != '\'' && *c != '"')
            .collect::<String>()
            .to_ascii_lowercase()
    }

    pub fn is_fstring(&self) -> bool {
        self.str_prefix().contains('f')
    }

    /// Body of a string literal without prefix and quotes.
    pub fn str_body(&self) -> &str {
        let t = self.text.as_str();
        let q_at = t.find(['\'', '"']).unwrap_or(0);
        let rest = &t[q_at..];
        let q = if rest.starts_with("'''") || rest.starts_with("\"\"\"") { 3 } else { 1 };
        if rest.len() >= 2 * q {
            &rest[q..rest.len() - q]
        } else {
            rest.get(q..).unwrap_or("")
        }
    }
}

/// One logical line: physical lines joined by brackets or backslashes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogicalLine {
    pub indent: usize,
    pub tokens: Vec<Token>,
}

impl LogicalLine {
    pub fn first_line(&self) -> usize {
        self.tokens.first().map(|t| t.line).unwrap_or(0)
    }
}

const OPERATORS: &[&str] = &[
    "**=", "//=", ">>=", "<<=", "...", "->", ":=", "**", "//", "<<", ">>", "<=", ">=", "==", "!=", "+=", "-=",
    "*=", "/=", "%=", "&=", "|=", "^=", "@=", "+", "-", "*", "/", "%", "@", "&", "|", "^", "~", "<", ">", "(",
    ")", "[", "]", "{", "}", ",", ":", ";", ".", "=", "!",
];

const STRING_PREFIXES: &[&str] = &[
    "r", "u", "b", "f", "br", "rb", "fr", "rf", "t", "tr", "rt",
];

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    line: usize,
    line_start: usize,
    strict: bool,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str, strict: bool) -> Self {
        Lexer {
            src,
            bytes: src.as_bytes(),
            pos: 0,
            line: 1,
            line_start: 0,
            strict,
        }
    }

    fn col(&self) -> usize {
        self.src[self.line_start..self.pos].chars().count() + 1
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_at(&self, offset: usize) -> Option<u8> {
        self.bytes.get(self.pos + offset).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.line_start = self.pos;
        }
        Some(c)
    }

    fn err(&self, msg: impl Into<String>) -> SyntaxError {
        SyntaxError {
            line: self.line,
            column: self.col(),
            message: msg.into(),
        }
    }

    fn string_prefix_len(&self) -> Option<usize> {
        let rest = &self.src[self.pos..];
        for len in (1..=2).rev() {
            let Some(prefix) = rest.get(..len) else { continue };
            if STRING_PREFIXES.contains(&prefix.to_ascii_lowercase().as_str())
                && matches!(rest.as_bytes().get(len), Some(b'\'') | Some(b'"')) {
                    return Some(len);
                }
        }
        None
    }

    fn lex_string(&mut self, prefix_len: usize) -> Result<Token, SyntaxError> {
        let start = self.pos;
        let (line, col) = (self.line, self.col());
        let raw = self.src[start..start + prefix_len].to_ascii_lowercase().contains('r');
        for _ in 0..prefix_len {
            self.bump();
        }
        let q = self.bump().expect("quote present");
        let triple = self.peek() == Some(q) && self.peek_at(1) == Some(q as u8);
        if triple {
            self.bump();
            self.bump();
        }
        loop {
            let Some(c) = self.peek() else {
                if (self.strict || triple)
                    && self.strict {
                        return Err(SyntaxError {
                            line,
                            column: col,
                            message: "unterminated string literal".into(),
                        });
                    }
                break;
            };
            if c == '\\' {
                self.bump();
                // Raw strings still cannot end in an odd backslash before the quote.
                let _ = raw;
                if self.peek().is_some() {
                    self.bump();
                }
                continue;
            }
            if c == '\n' && !triple {
                if self.strict {
                    return Err(SyntaxError {
                        line,
                        column: col,
                        message: "unterminated string literal".into(),
                    });
                }
                break;
            }
            if c == q {
                if triple {
                    if self.peek_at(1) == Some(q as u8) && self.peek_at(2) == Some(q as u8) {
                        self.bump();
                        self.bump();
                        self.bump();
                        break;
                    }
                } else {
                    self.bump();
                    break;
                }
            }
            self.bump();
        }
        Ok(Token {
            kind: TokenKind::Str,
            text: self.src[start..self.pos].to_string(),
            line,
            end_line: self.line,
            col,
            start,
            end: self.pos,
        })
    }

    fn lex_number(&mut self) -> Token {
        let start = self.pos;
        let (line, col) = (self.line, self.col());
        let mut prev = '\0';
        while let Some(c) = self.peek() {
            let exp_sign = (c == '+' || c == '-') && (prev == 'e' || prev == 'E') && {
                let body = &self.src[start..self.pos];
                !body.starts_with("0x") && !body.starts_with("0X")
            };
            if c.is_ascii_alphanumeric() || c == '_' || c == '.' || exp_sign {
                prev = c;
                self.bump();
            } else {
                break;
            }
        }
        Token {
            kind: TokenKind::Number,
            text: self.src[start..self.pos].to_string(),
            line,
            end_line: line,
            col,
            start,
            end: self.pos,
        }
    }

    fn lex_name(&mut self) -> Token {
        let start = self.pos;
        let (line, col) = (self.line, self.col());
        while let Some(c) = self.peek() {
            if c.is_alphanumeric() || c == '_' {
                self.bump();
            } else {
                break;
            }
        }
        Token {
            kind: TokenKind::Name,
            text: self.src[start..self.pos].to_string(),
            line,
            end_line: line,
            col,
            start,
            end: self.pos,
        }
    }

    fn lex_op(&mut self) -> Result<Token, SyntaxError> {
        let start = self.pos;
        let (line, col) = (self.line, self.col());
        let rest = &self.src[self.pos..];
        for op in OPERATORS {
            if rest.starts_with(op) {
                if *op == "!" && self.strict {
                    return Err(self.err("unexpected character '!'"));
                }
                self.pos += op.len();
                return Ok(Token {
                    kind: TokenKind::Op,
                    text: (*op).to_string(),
                    line,
                    end_line: line,
                    col,
                    start,
                    end: self.pos,
                });
            }
        }
        let c = self.peek().unwrap_or('\0');
        if self.strict {
            return Err(self.err(format!("unexpected character {c:?}")));
        }
        self.bump();
        Ok(Token {
            kind: TokenKind::Op,
            text: c.to_string(),
            line,
            end_line: line,
            col,
            start,
            end: self.pos,
        })
    }

    fn next_token(&mut self) -> Result<Option<Token>, SyntaxError> {
        let Some(c) = self.peek() else { return Ok(None) };
        if let Some(len) = self.string_prefix_len() {
            return self.lex_string(len).map(Some);
        }
        if c == '\'' || c == '"' {
            return self.lex_string(0).map(Some);
        }
        if c.is_ascii_digit() || (c == '.' && self.peek_at(1).is_some_and(|b| b.is_ascii_digit())) {
            return Ok(Some(self.lex_number()));
        }
        if c.is_alphabetic() || c == '_' {
            return Ok(Some(self.lex_name()));
        }
        self.lex_op().map(Some)
    }
}

fn indent_width(s: &str) -> usize {
    let mut w = 0;
    for c in s.chars() {
        match c {
            ' ' => w += 1,
            '\t' => w = (w / 8 + 1) * 8,
            '\x0c' => w = 0,
            _ => break,
        }
    }
    w
}

/// Splits source into logical lines with their indentation width.
pub fn logical_lines(src: &str) -> Result<Vec<LogicalLine>, SyntaxError> {
    let mut lx = Lexer::new(src, true);
    let mut out = Vec::new();
    let mut current: Vec<Token> = Vec::new();
    let mut indent = 0usize;
    let mut depth: Vec<(char, usize, usize)> = Vec::new();
    let mut at_line_start = true;
    let mut continuation = false;

    loop {
        if at_line_start {
            if depth.is_empty() && !continuation && current.is_empty() {
                let line_text = &src[lx.pos..];
                let ws: usize = line_text
                    .char_indices()
                    .find(|(_, c)| !matches!(c, ' ' | '\t' | '\x0c'))
                    .map(|(i, _)| i)
                    .unwrap_or(line_text.len());
                indent = indent_width(&line_text[..ws]);
                lx.pos += ws;
            }
            at_line_start = false;
        }
        let Some(c) = lx.peek() else { break };
        match c {
            ' ' | '\t' | '\x0c' | '\r' => {
                lx.bump();
            }
            '#' => {
                while let Some(c) = lx.peek() {
                    if c == '\n' {
                        break;
                    }
                    lx.bump();
                }
            }
            '\n' => {
                lx.bump();
                at_line_start = true;
                if depth.is_empty() && !continuation && !current.is_empty() {
                    out.push(LogicalLine {
                        indent,
                        tokens: std::mem::take(&mut current),
                    });
                }
                continuation = false;
            }
            '\\' if matches!(lx.peek_at(1), Some(b'\n')) || (lx.peek_at(1) == Some(b'\r') && lx.peek_at(2) == Some(b'\n')) => {
                lx.bump();
                if lx.peek() == Some('\r') {
                    lx.bump();
                }
                lx.bump();
                continuation = true;
                at_line_start = true;
            }
            _ => {
                continuation = false;
                let tok = lx.next_token()?.expect("peeked a char");
                if tok.kind == TokenKind::Op {
                    match tok.text.as_str() {
                        "(" | "[" | "{" => {
                            depth.push((tok.text.chars().next().unwrap(), tok.line, tok.col))
                        }
                        ")" | "]" | "}" => {
                            let want = match tok.text.as_str() {
                                ")" => '(',
                                "]" => '[',
                                _ => '{',
                            };
                            match depth.pop() {
                                Some((open, _, _)) if open == want => {}
                                _ => {
                                    return Err(SyntaxError {
                                        line: tok.line,
                                        column: tok.col,
                                        message: format!("unmatched '{}'", tok.text),
                                    })
                                }
                            }
                        }
                        _ => {}
                    }
                }
                current.push(tok);
            }
        }
    }
    if let Some((open, line, column)) = depth.last() {
        return Err(SyntaxError {
            line: *line,
            column: *column,
            message: format!("'{open}' was never closed"),
        });
    }
    if !current.is_empty() {
        out.push(LogicalLine {
            indent,
            tokens: current,
        });
    }
    Ok(out)
}

/// Lenient tokenization of a source fragment (a diff line, an f-string
/// replacement field). Never fails; newlines and comments are dropped.
pub fn tokenize_fragment(text: &str) -> Vec<Token> {
    let mut lx = Lexer::new(text, false);
    let mut out = Vec::new();
    while let Some(c) = lx.peek() {
        match c {
            ' ' | '\t' | '\x0c' | '\r' | '\n' | '\\' => {
                lx.bump();
            }
            '#' => {
                while let Some(c) = lx.peek() {
                    if c == '\n' {
                        break;
                    }
                    lx.bump();
                }
            }
            _ => match lx.next_token() {
                Ok(Some(t)) => out.push(t),
                Ok(None) => break,
                Err(_) => {
                    lx.bump();
                }
            },
        }
    }
    out
}

/// Replacement-field expressions of an f-string body (`{expr!r:fmt}`).
pub fn fstring_fields(body: &str) -> Vec<String> {
    let chars: Vec<char> = body.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        match chars[i] {
            '{' if chars.get(i + 1) == Some(&'{') => i += 2,
            '}' if chars.get(i + 1) == Some(&'}') => i += 2,
            '{' => {
                let mut depth = 1;
                let mut j = i + 1;
                let mut expr = String::new();
                let mut in_spec = false;
                while j < chars.len() && depth > 0 {
                    let c = chars[j];
                    match c {
                        '{' | '[' | '(' => depth += 1,
                        '}' | ']' | ')' => depth -= 1,
                        _ => {}
                    }
                    if depth == 0 {
                        break;
                    }
                    if depth == 1 && !in_spec && (c == '!' || c == ':') && chars.get(j + 1) != Some(&'=') {
                        in_spec = true;
                    }
                    if !in_spec {
                        expr.push(c);
                    } else if c == '{' {
                        // Nested field inside a format spec.
                        let mut k = j + 1;
                        let mut nested = String::new();
                        while k < chars.len() && chars[k] != '}' {
                            nested.push(chars[k]);
                            k += 1;
                        }
                        out.push(nested);
                        depth -= 1;
                        j = k;
                    }
                    j += 1;
                }
                let expr = expr.trim().trim_end_matches('=').to_string();
                if !expr.is_empty() {
                    out.push(expr);
                }
                i = j + 1;
            }
            _ => i += 1,
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(l: &LogicalLine) -> Vec<&str> {
        l.tokens.iter().map(|t| t.text.as_str()).collect()
    }

    #[test]
    fn brackets_join_lines() {
        let lines = logical_lines("x = f(1,\n      2)\ny = 3\n").unwrap();
        assert_eq!(lines.len(), 2);
        assert_eq!(texts(&lines[0]), ["x", "=", "f", "(", "1", ",", "2", ")"]);
        assert_eq!(lines[0].tokens.last().unwrap().line, 2);
    }

    #[test]
    fn indent_kept_across_bracket_continuation() {
        let lines = logical_lines("def f():\n    x = call(a,\n             b)\n    return x\n").unwrap();
        assert_eq!(lines.iter().map(|l| l.indent).collect::<Vec<_>>(), [0, 4, 4]);
        let lines = logical_lines("if a:\n    y = 1 + \\\n  2\n    z\n").unwrap();
        assert_eq!(lines.iter().map(|l| l.indent).collect::<Vec<_>>(), [0, 4, 4]);
    }

    #[test]
    fn backslash_and_comments() {
        let lines = logical_lines("a = 1 + \\\n    2  # c\n# only comment\n\n  \nb = 'x#y'\n").unwrap();
        assert_eq!(lines.len(), 2);
        assert_eq!(texts(&lines[0]), ["a", "=", "1", "+", "2"]);
        assert_eq!(texts(&lines[1]), ["b", "=", "'x#y'"]);
    }

    #[test]
    fn strings_prefixes_and_triple_quotes() {
        let src = "s = rb'a\\'b' + f\"{x}\" + '''multi\nline''' + \"\"\"q\"\"\"\n";
        let lines = logical_lines(src).unwrap();
        let strs: Vec<_> = lines[0].tokens.iter().filter(|t| t.kind == TokenKind::Str).collect();
        assert_eq!(strs.len(), 4);
        assert_eq!(strs[0].str_prefix(), "rb");
        assert!(strs[1].is_fstring());
        assert_eq!(strs[2].str_body(), "multi\nline");
        assert_eq!(strs[2].end_line, 2);
    }

    #[test]
    fn indentation_widths() {
        let lines = logical_lines("if x:\n    y\n\tz\n").unwrap();
        assert_eq!(lines.iter().map(|l| l.indent).collect::<Vec<_>>(), [0, 4, 8]);
    }

    #[test]
    fn errors_carry_positions() {
        let e = logical_lines("x = (1,\n").unwrap_err();
        assert_eq!((e.line, e.column), (1, 5));
        let e = logical_lines("x = 'abc\n").unwrap_err();
        assert_eq!(e.line, 1);
        assert!(logical_lines("x = 1)\n").is_err());
        assert!(logical_lines("x = $\n").is_err());
    }

    #[test]
    fn numbers_and_operators() {
        let l = &logical_lines("x **= 1.5e-3 + 0xFF // 2 if a != b else ...\n").unwrap()[0];
        assert_eq!(
            texts(l),
            ["x", "**=", "1.5e-3", "+", "0xFF", "//", "2", "if", "a", "!=", "b", "else", "..."]
        );
    }

    #[test]
    fn fstring_fields_extracted() {
        assert_eq!(fstring_fields("a {x} {{lit}} {y.z!r} {w:>{width}}"), ["x", "y.z", "width", "w"]);
        assert_eq!(fstring_fields("{a=}"), ["a"]);
    }

    #[test]
    fn fragment_is_lenient() {
        let toks = tokenize_fragment("    ])  'unterminated");
        assert_eq!(toks.len(), 3);
        assert_eq!(toks[2].kind, TokenKind::Str);
    }
}
