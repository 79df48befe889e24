//! Hand-rolled lexer shared by the contract and property parsers.

use num_bigint::BigInt;

use super::ast::Address;
use super::FrontendError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(BigInt),
    Addr(Address),
    /// `@attacker`, valid only in property sources.
    AtAttacker,
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Colon,
    Dot,
    Assign,
    Arrow,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    AndAnd,
    OrOr,
    Bang,
    Plus,
    Minus,
    Star,
    Slash,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(v) => format!("integer `{v}`"),
            Tok::Addr(a) => format!("address `{a}`"),
            Tok::AtAttacker => "`@attacker`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Assign => "`=`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::EqEq => "`==`".into(),
            Tok::NotEq => "`!=`".into(),
            Tok::Lt => "`<`".into(),
            Tok::Le => "`<=`".into(),
            Tok::Gt => "`>`".into(),
            Tok::Ge => "`>=`".into(),
            Tok::AndAnd => "`&&`".into(),
            Tok::OrOr => "`||`".into(),
            Tok::Bang => "`!`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

pub fn tokenize(source: &str) -> Result<Vec<Token>, FrontendError> {
    let mut tokens = Vec::new();
    let chars: Vec<char> = source.chars().collect();
    let mut i = 0usize;
    let mut line = 1u32;
    let mut col = 1u32;

    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == '/' && i + 1 < chars.len() && chars[i + 1] == '/' {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                bump!();
            }
            let word: String = chars[start..i].iter().collect();
            tokens.push(Token { tok: Tok::Ident(word), pos });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            // `0x...` is always an address literal.
            if c == '0' && i + 1 < chars.len() && (chars[i + 1] == 'x' || chars[i + 1] == 'X') {
                bump!();
                bump!();
                while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                    bump!();
                }
                let text: String = chars[start..i].iter().collect();
                match Address::parse(&text) {
                    Some(a) => tokens.push(Token { tok: Tok::Addr(a), pos }),
                    None => {
                        return Err(FrontendError::Syntax {
                            line: pos.line,
                            col: pos.col,
                            expected: format!(
                                "address of the form 0x followed by 1..=8 hex digits, found `{text}`"
                            ),
                        })
                    }
                }
                continue;
            }
            while i < chars.len() && chars[i].is_ascii_digit() {
                bump!();
            }
            if i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                return Err(FrontendError::Syntax {
                    line: pos.line,
                    col: pos.col,
                    expected: "integer literal".into(),
                });
            }
            let text: String = chars[start..i].iter().collect();
            let value: BigInt = text.parse().expect("digits parse as BigInt");
            tokens.push(Token { tok: Tok::Int(value), pos });
            continue;
        }
        if c == '@' {
            let start = i;
            bump!();
            while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                bump!();
            }
            let word: String = chars[start..i].iter().collect();
            if word == "@attacker" {
                tokens.push(Token { tok: Tok::AtAttacker, pos });
                continue;
            }
            return Err(FrontendError::Syntax {
                line: pos.line,
                col: pos.col,
                expected: format!("`@attacker`, found `{word}`"),
            });
        }
        let two: Option<Tok> = if i + 1 < chars.len() {
            match (c, chars[i + 1]) {
                ('-', '>') => Some(Tok::Arrow),
                ('=', '=') => Some(Tok::EqEq),
                ('!', '=') => Some(Tok::NotEq),
                ('<', '=') => Some(Tok::Le),
                ('>', '=') => Some(Tok::Ge),
                ('&', '&') => Some(Tok::AndAnd),
                ('|', '|') => Some(Tok::OrOr),
                _ => None,
            }
        } else {
            None
        };
        if let Some(tok) = two {
            bump!();
            bump!();
            tokens.push(Token { tok, pos });
            continue;
        }
        let one = match c {
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            ',' => Tok::Comma,
            ';' => Tok::Semi,
            ':' => Tok::Colon,
            '.' => Tok::Dot,
            '=' => Tok::Assign,
            '<' => Tok::Lt,
            '>' => Tok::Gt,
            '!' => Tok::Bang,
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            other => {
                return Err(FrontendError::Syntax {
                    line: pos.line,
                    col: pos.col,
                    expected: format!("a token, found `{other}`"),
                })
            }
        };
        bump!();
        tokens.push(Token { tok: one, pos });
    }
    tokens.push(Token { tok: Tok::Eof, pos: Pos { line, col } });
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_whitespace_are_skipped() {
        let toks = tokenize("a // comment\n  b").unwrap();
        assert_eq!(toks.len(), 3);
        assert_eq!(toks[1].pos.line, 2);
    }

    #[test]
    fn overlong_hex_is_rejected() {
        assert!(tokenize("0x123456789").is_err());
    }

    #[test]
    fn operators_longest_match() {
        let toks = tokenize("<= < -> - == =").unwrap();
        let kinds: Vec<_> = toks.into_iter().map(|t| t.tok).collect();
        assert_eq!(
            kinds,
            vec![Tok::Le, Tok::Lt, Tok::Arrow, Tok::Minus, Tok::EqEq, Tok::Assign, Tok::Eof]
        );
    }
}
