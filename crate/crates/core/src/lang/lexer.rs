//! Tokenizer. Unicode logical symbols are normalised to their ASCII
//! spellings so the parser only deals with one form.

use super::ast::Span;
use super::error::ParseError;

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(String),
    Real(String),
    Str(String),
    Sym(&'static str),
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(s) | Tok::Real(s) => format!("number `{s}`"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

pub const KEYWORDS: &[&str] = &[
    "function", "method", "returns", "requires", "ensures", "var", "if", "else", "while",
    "invariant", "decreases", "assert", "return", "forall", "exists", "true", "false", "int",
    "real", "bool", "string",
];

const ASCII_SYMBOLS: &[&str] = &[
    "<==>", "==>", "::", ":=", "==", "!=", "<=", ">=", "&&", "||", "->", "(", ")", "{", "}", ",",
    ";", ":", "+", "-", "*", "/", "<", ">", "=", "!",
];

fn unicode_symbol(c: char) -> Option<&'static str> {
    Some(match c {
        '∧' => "&&",
        '∨' => "||",
        '¬' => "!",
        '⟹' | '⇒' => "==>",
        '⟺' | '⇔' => "<==>",
        '→' => "->",
        '≤' => "<=",
        '≥' => ">=",
        '≠' => "!=",
        '∀' => "forall",
        '∃' => "exists",
        _ => return None,
    })
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let (mut line, mut col) = (1u32, 1u32);

    macro_rules! advance {
        ($n:expr) => {
            for _ in 0..$n {
                if chars[i] == '\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                i += 1;
            }
        };
    }

    while i < chars.len() {
        let c = chars[i];
        let span = Span::new(line, col);
        if c.is_whitespace() {
            advance!(1);
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                advance!(1);
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                advance!(1);
            }
            let word: String = chars[start..i].iter().collect();
            out.push(Token { tok: Tok::Ident(word), span });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                advance!(1);
            }
            let is_real = i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit();
            if is_real {
                advance!(1);
                while i < chars.len() && chars[i].is_ascii_digit() {
                    advance!(1);
                }
            }
            let text: String = chars[start..i].iter().collect();
            if i < chars.len() && (chars[i].is_ascii_alphabetic() || chars[i] == '_' || chars[i] == '.') {
                return Err(ParseError::new(span, format!("malformed number starting `{text}`")));
            }
            out.push(Token { tok: if is_real { Tok::Real(text) } else { Tok::Int(text) }, span });
            continue;
        }
        if c == '"' {
            advance!(1);
            let mut s = String::new();
            loop {
                if i >= chars.len() {
                    return Err(ParseError::new(span, "unterminated string literal"));
                }
                let ch = chars[i];
                if ch == '"' {
                    advance!(1);
                    break;
                }
                if ch == '\\' {
                    let esc = chars.get(i + 1).copied();
                    let decoded = match esc {
                        Some('"') => '"',
                        Some('\\') => '\\',
                        Some('n') => '\n',
                        Some('t') => '\t',
                        _ => {
                            return Err(ParseError::new(Span::new(line, col), "invalid escape in string literal"))
                        }
                    };
                    s.push(decoded);
                    advance!(2);
                    continue;
                }
                s.push(ch);
                advance!(1);
            }
            out.push(Token { tok: Tok::Str(s), span });
            continue;
        }
        if let Some(sym) = unicode_symbol(c) {
            let tok = if sym == "forall" || sym == "exists" {
                Tok::Ident(sym.to_string())
            } else {
                Tok::Sym(sym)
            };
            out.push(Token { tok, span });
            advance!(1);
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 4)].iter().collect();
        match ASCII_SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(sym) => {
                out.push(Token { tok: Tok::Sym(sym), span });
                advance!(sym.len());
            }
            None => return Err(ParseError::new(span, format!("unexpected character `{c}`"))),
        }
    }
    out.push(Token { tok: Tok::Eof, span: Span::new(line, col) });
    Ok(out)
}
