//! Hand-written lexer for ApproxC source text.

use super::ast::Span;
use super::LangError;

#[derive(Debug, Clone, PartialEq)]
pub enum Token {
    Ident(String),
    IntLit(i64),
    FloatLit(f64),
    StrLit(String),
    // keywords
    KwFunc,
    KwVar,
    KwIf,
    KwElse,
    KwWhile,
    KwFor,
    KwReturn,
    KwOutput,
    KwInt,
    KwFloat,
    // punctuation
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Colon,
    Arrow,
    At,
    Assign,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    Lt,
    Le,
    Gt,
    Ge,
    EqEq,
    Ne,
    Eof,
}

#[derive(Debug, Clone)]
pub struct SpannedToken {
    pub token: Token,
    pub span: Span,
}

pub fn tokenize(src: &str) -> Result<Vec<SpannedToken>, LangError> {
    let mut tokens = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let mut pos = 0usize;
    let mut line = 1u32;
    let mut col = 1u32;

    macro_rules! push {
        ($tok:expr, $span:expr) => {
            tokens.push(SpannedToken {
                token: $tok,
                span: $span,
            })
        };
    }

    while pos < chars.len() {
        let c = chars[pos];
        let span = Span::new(line, col);

        // whitespace
        if c == '\n' {
            pos += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            pos += 1;
            col += 1;
            continue;
        }
        // line comment
        if c == '/' && pos + 1 < chars.len() && chars[pos + 1] == '/' {
            while pos < chars.len() && chars[pos] != '\n' {
                pos += 1;
            }
            continue;
        }

        // identifiers / keywords
        if c.is_ascii_alphabetic() || c == '_' {
            let start = pos;
            while pos < chars.len() && (chars[pos].is_ascii_alphanumeric() || chars[pos] == '_') {
                pos += 1;
                col += 1;
            }
            let word: String = chars[start..pos].iter().collect();
            let tok = match word.as_str() {
                "func" => Token::KwFunc,
                "var" => Token::KwVar,
                "if" => Token::KwIf,
                "else" => Token::KwElse,
                "while" => Token::KwWhile,
                "for" => Token::KwFor,
                "return" => Token::KwReturn,
                "output" => Token::KwOutput,
                "int" => Token::KwInt,
                "float" => Token::KwFloat,
                _ => Token::Ident(word),
            };
            push!(tok, span);
            continue;
        }

        // numeric literals: 123, 1.5, 2e-3, 1.25e9
        if c.is_ascii_digit() {
            let start = pos;
            let mut is_float = false;
            while pos < chars.len() && chars[pos].is_ascii_digit() {
                pos += 1;
                col += 1;
            }
            if pos < chars.len() && chars[pos] == '.' {
                is_float = true;
                pos += 1;
                col += 1;
                while pos < chars.len() && chars[pos].is_ascii_digit() {
                    pos += 1;
                    col += 1;
                }
            }
            if pos < chars.len() && (chars[pos] == 'e' || chars[pos] == 'E') {
                let mut lookahead = pos + 1;
                if lookahead < chars.len() && (chars[lookahead] == '+' || chars[lookahead] == '-') {
                    lookahead += 1;
                }
                if lookahead < chars.len() && chars[lookahead].is_ascii_digit() {
                    is_float = true;
                    col += (lookahead - pos) as u32;
                    pos = lookahead;
                    while pos < chars.len() && chars[pos].is_ascii_digit() {
                        pos += 1;
                        col += 1;
                    }
                }
            }
            let text: String = chars[start..pos].iter().collect();
            if is_float {
                let v: f64 = text.parse().map_err(|_| LangError::Syntax {
                    line: span.line,
                    col: span.col,
                    message: format!("invalid float literal `{text}`"),
                })?;
                push!(Token::FloatLit(v), span);
            } else {
                let v: i64 = text.parse().map_err(|_| LangError::Syntax {
                    line: span.line,
                    col: span.col,
                    message: format!("integer literal `{text}` out of range"),
                })?;
                push!(Token::IntLit(v), span);
            }
            continue;
        }

        // string literal
        if c == '"' {
            pos += 1;
            col += 1;
            let mut s = String::new();
            loop {
                if pos >= chars.len() {
                    return Err(LangError::Syntax {
                        line: span.line,
                        col: span.col,
                        message: "unterminated string literal".to_string(),
                    });
                }
                match chars[pos] {
                    '"' => {
                        pos += 1;
                        col += 1;
                        break;
                    }
                    '\\' => {
                        if pos + 1 >= chars.len() {
                            return Err(LangError::Syntax {
                                line,
                                col,
                                message: "unterminated escape".to_string(),
                            });
                        }
                        let esc = chars[pos + 1];
                        s.push(match esc {
                            'n' => '\n',
                            't' => '\t',
                            '\\' => '\\',
                            '"' => '"',
                            other => {
                                return Err(LangError::Syntax {
                                    line,
                                    col,
                                    message: format!("unknown escape `\\{other}`"),
                                })
                            }
                        });
                        pos += 2;
                        col += 2;
                    }
                    '\n' => {
                        return Err(LangError::Syntax {
                            line: span.line,
                            col: span.col,
                            message: "newline in string literal".to_string(),
                        });
                    }
                    other => {
                        s.push(other);
                        pos += 1;
                        col += 1;
                    }
                }
            }
            push!(Token::StrLit(s), span);
            continue;
        }

        let two = if pos + 1 < chars.len() {
            Some((c, chars[pos + 1]))
        } else {
            None
        };
        let (tok, len) = match two {
            Some(('-', '>')) => (Token::Arrow, 2),
            Some(('<', '=')) => (Token::Le, 2),
            Some(('>', '=')) => (Token::Ge, 2),
            Some(('=', '=')) => (Token::EqEq, 2),
            Some(('!', '=')) => (Token::Ne, 2),
            _ => {
                let tok = match c {
                    '(' => Token::LParen,
                    ')' => Token::RParen,
                    '{' => Token::LBrace,
                    '}' => Token::RBrace,
                    '[' => Token::LBracket,
                    ']' => Token::RBracket,
                    ',' => Token::Comma,
                    ';' => Token::Semi,
                    ':' => Token::Colon,
                    '@' => Token::At,
                    '=' => Token::Assign,
                    '+' => Token::Plus,
                    '-' => Token::Minus,
                    '*' => Token::Star,
                    '/' => Token::Slash,
                    '%' => Token::Percent,
                    '<' => Token::Lt,
                    '>' => Token::Gt,
                    other => {
                        return Err(LangError::Syntax {
                            line,
                            col,
                            message: format!("unexpected character `{other}`"),
                        })
                    }
                };
                (tok, 1)
            }
        };
        push!(tok, span);
        pos += len;
        col += len as u32;
    }

    tokens.push(SpannedToken {
        token: Token::Eof,
        span: Span::new(line, col),
    });
    Ok(tokens)
}
