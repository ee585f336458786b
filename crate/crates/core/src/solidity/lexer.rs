use super::ParseError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Ident,
    Number,
    /// String literal, stored with its quotes exactly as written.
    Str,
    Punct,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub line: usize,
    pub col: usize,
    /// Byte offsets into the source.
    pub start: usize,
    pub end: usize,
}

impl Token {
    pub fn is(&self, text: &str) -> bool {
        self.kind != TokenKind::Str && self.text == text
    }
}

// Longest first so that greedy matching picks `>>=` over `>>`.
const PUNCTS: &[&str] = &[
    ">>>=", "<<=", ">>=", ">>>", "**", "=>", "==", "!=", "<=", ">=", "&&", "||", "++", "--", "+=", "-=",
    "*=", "/=", "%=", "|=", "&=", "^=", "<<", ">>", "->", "(", ")", "{", "}", "[", "]", ";", ",", ".",
    "=", "<", ">", "+", "-", "*", "/", "%", "!", "~", "&", "|", "^", "?", ":",
];

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.src[self.pos..].chars().nth(n)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }
}

/// Splits Solidity source into tokens, dropping whitespace and comments.
pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut cur = Cursor { src, pos: 0, line: 1, col: 1 };
    let mut out = Vec::new();

    while let Some(c) = cur.peek() {
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        if cur.rest().starts_with("//") {
            while let Some(c) = cur.peek() {
                if c == '\n' {
                    break;
                }
                cur.bump();
            }
            continue;
        }
        if cur.rest().starts_with("/*") {
            let (line, col) = (cur.line, cur.col);
            cur.bump();
            cur.bump();
            loop {
                if cur.rest().starts_with("*/") {
                    cur.bump();
                    cur.bump();
                    break;
                }
                if cur.bump().is_none() {
                    return Err(ParseError::new(line, col, "unterminated block comment"));
                }
            }
            continue;
        }

        let (line, col, start) = (cur.line, cur.col, cur.pos);
        let kind = if c.is_ascii_alphabetic() || c == '_' || c == '$' {
            while matches!(cur.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_' || c == '$') {
                cur.bump();
            }
            // `hex"..."` and `unicode"..."` literals.
            let word = &src[start..cur.pos];
            if (word == "hex" || word == "unicode") && matches!(cur.peek(), Some('"') | Some('\'')) {
                lex_string(&mut cur, line, col)?;
                TokenKind::Str
            } else {
                TokenKind::Ident
            }
        } else if c.is_ascii_digit() || (c == '.' && matches!(cur.peek_at(1), Some(d) if d.is_ascii_digit())) {
            lex_number(&mut cur);
            TokenKind::Number
        } else if c == '"' || c == '\'' {
            lex_string(&mut cur, line, col)?;
            TokenKind::Str
        } else {
            let Some(p) = PUNCTS.iter().find(|p| cur.rest().starts_with(**p)) else {
                return Err(ParseError::new(line, col, format!("unexpected character `{c}`")));
            };
            for _ in 0..p.len() {
                cur.bump();
            }
            TokenKind::Punct
        };
        out.push(Token {
            kind,
            text: src[start..cur.pos].to_string(),
            line,
            col,
            start,
            end: cur.pos,
        });
    }
    Ok(out)
}

fn lex_number(cur: &mut Cursor<'_>) {
    if cur.rest().starts_with("0x") || cur.rest().starts_with("0X") {
        cur.bump();
        cur.bump();
        while matches!(cur.peek(), Some(c) if c.is_ascii_hexdigit() || c == '_') {
            cur.bump();
        }
        return;
    }
    // Digits, underscores, dots (version strings such as 0.8.19 lex as one
    // token) and a scientific exponent.
    while let Some(c) = cur.peek() {
        let dot_digit = c == '.' && matches!(cur.peek_at(1), Some(d) if d.is_ascii_digit());
        if c.is_ascii_digit() || c == '_' || dot_digit {
            cur.bump();
        } else if (c == 'e' || c == 'E') && matches!(cur.peek_at(1), Some(d) if d.is_ascii_digit() || d == '-') {
            cur.bump();
            cur.bump();
        } else {
            break;
        }
    }
}

fn lex_string(cur: &mut Cursor<'_>, line: usize, col: usize) -> Result<(), ParseError> {
    let quote = cur.bump().expect("caller saw a quote");
    loop {
        match cur.bump() {
            None | Some('\n') => return Err(ParseError::new(line, col, "unterminated string literal")),
            Some('\\') => {
                cur.bump();
            }
            Some(c) if c == quote => return Ok(()),
            Some(_) => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(src: &str) -> Vec<String> {
        tokenize(src).unwrap().into_iter().map(|t| t.text).collect()
    }

    #[test]
    fn call_with_options() {
        assert_eq!(
            texts(r#"(bool success,) = msg.sender.call{value: x}("");"#),
            ["(", "bool", "success", ",", ")", "=", "msg", ".", "sender", ".", "call", "{", "value", ":", "x", "}", "(", r#""""#, ")", ";"]
        );
    }

    #[test]
    fn versions_and_operators() {
        assert_eq!(texts("pragma solidity ^0.8.19;"), ["pragma", "solidity", "^", "0.8.19", ";"]);
        assert_eq!(texts("a >>= 1e18 >= b"), ["a", ">>=", "1e18", ">=", "b"]);
        assert_eq!(texts("x += 0xFF_FF"), ["x", "+=", "0xFF_FF"]);
    }

    #[test]
    fn comments_dropped_and_positions_tracked() {
        let toks = tokenize("// hi\n/* a\n b */ foo").unwrap();
        assert_eq!(toks.len(), 1);
        assert_eq!((toks[0].line, toks[0].col), (3, 7));
    }

    #[test]
    fn unterminated_string_is_error() {
        let err = tokenize("x = \"abc").unwrap_err();
        assert_eq!((err.line, err.column), (1, 5));
    }
}
