//! Recursive-descent parser producing a [`Program`].

use super::ast::*;
use super::lexer::{tokenize, SpannedToken, Token};
use super::LangError;

pub fn parse_source(src: &str) -> Result<Program, LangError> {
    let tokens = tokenize(src)?;
    let mut parser = Parser::new(tokens);
    let program = parser.parse_program()?;
    super::validate::validate(&program)?;
    Ok(program)
}

/// Parse without running semantic validation. Used internally by transforms
/// and tests that need to inspect ill-formed trees.
pub fn parse_unvalidated(src: &str) -> Result<Program, LangError> {
    let tokens = tokenize(src)?;
    Parser::new(tokens).parse_program()
}

struct Parser {
    tokens: Vec<SpannedToken>,
    pos: usize,
    string_table: Vec<String>,
}

impl Parser {
    fn new(tokens: Vec<SpannedToken>) -> Self {
        Parser {
            tokens,
            pos: 0,
            string_table: Vec::new(),
        }
    }

    fn peek(&self) -> &Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)].token
    }

    fn peek2(&self) -> &Token {
        &self.tokens[(self.pos + 1).min(self.tokens.len() - 1)].token
    }

    fn span(&self) -> Span {
        self.tokens[self.pos.min(self.tokens.len() - 1)].span
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos.min(self.tokens.len() - 1)]
            .token
            .clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error(&self, msg: impl Into<String>) -> LangError {
        let span = self.span();
        LangError::Syntax {
            line: span.line,
            col: span.col,
            message: msg.into(),
        }
    }

    fn expect(&mut self, expected: &Token, what: &str) -> Result<Span, LangError> {
        let span = self.span();
        if std::mem::discriminant(self.peek()) == std::mem::discriminant(expected) {
            self.advance();
            Ok(span)
        } else {
            Err(self.error(format!("expected {what}, found {:?}", self.peek())))
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<(String, Span), LangError> {
        let span = self.span();
        match self.advance() {
            Token::Ident(name) => Ok((name, span)),
            other => Err(LangError::Syntax {
                line: span.line,
                col: span.col,
                message: format!("expected {what}, found {other:?}"),
            }),
        }
    }

    fn intern(&mut self, s: &str) -> u32 {
        if let Some(i) = self.string_table.iter().position(|t| t == s) {
            return i as u32;
        }
        self.string_table.push(s.to_string());
        (self.string_table.len() - 1) as u32
    }

    fn parse_program(&mut self) -> Result<Program, LangError> {
        let mut output_decl: Option<OutputKind> = None;
        let mut globals = Vec::new();
        let mut functions = Vec::new();

        loop {
            match self.peek() {
                Token::Eof => break,
                Token::KwOutput => {
                    if output_decl.is_some() {
                        return Err(self.error("duplicate output declaration"));
                    }
                    output_decl = Some(self.parse_output_decl()?);
                }
                Token::KwVar => {
                    globals.push(self.parse_global()?);
                }
                Token::KwFunc | Token::At => {
                    functions.push(self.parse_function()?);
                }
                other => {
                    return Err(self.error(format!(
                        "expected `output`, `var` or `func` at top level, found {other:?}"
                    )))
                }
            }
        }

        Ok(Program {
            output_decl: output_decl.unwrap_or(OutputKind::Numeric),
            globals,
            functions,
            string_table: std::mem::take(&mut self.string_table),
        })
    }

    fn parse_output_decl(&mut self) -> Result<OutputKind, LangError> {
        self.expect(&Token::KwOutput, "`output`")?;
        let (name, _) = self.expect_ident("output kind")?;
        let kind = match name.as_str() {
            "numeric" => OutputKind::Numeric,
            "text" => OutputKind::Text,
            "image" => {
                self.expect(&Token::LParen, "`(`")?;
                let rows = self.expect_dim()?;
                self.expect(&Token::Comma, "`,`")?;
                let cols = self.expect_dim()?;
                self.expect(&Token::RParen, "`)`")?;
                OutputKind::Image { rows, cols }
            }
            other => return Err(self.error(format!("unknown output kind `{other}`"))),
        };
        self.expect(&Token::Semi, "`;`")?;
        Ok(kind)
    }

    fn expect_dim(&mut self) -> Result<u32, LangError> {
        let span = self.span();
        match self.advance() {
            Token::IntLit(v) if v > 0 && v <= u32::MAX as i64 => Ok(v as u32),
            other => Err(LangError::Syntax {
                line: span.line,
                col: span.col,
                message: format!("expected positive integer dimension, found {other:?}"),
            }),
        }
    }

    fn parse_type(&mut self) -> Result<Type, LangError> {
        let scalar = match self.advance() {
            Token::KwInt => ScalarType::Int,
            Token::KwFloat => ScalarType::Float,
            other => return Err(self.error(format!("expected `int` or `float`, found {other:?}"))),
        };
        let mut dims = Vec::new();
        while matches!(self.peek(), Token::LBracket) {
            if dims.len() == 2 {
                return Err(self.error("arrays are at most 2-dimensional"));
            }
            self.advance();
            dims.push(self.expect_dim()?);
            self.expect(&Token::RBracket, "`]`")?;
        }
        Ok(Type { scalar, dims })
    }

    fn parse_global(&mut self) -> Result<GlobalDecl, LangError> {
        let span = self.expect(&Token::KwVar, "`var`")?;
        let (name, _) = self.expect_ident("global name")?;
        self.expect(&Token::Colon, "`:`")?;
        let ty = self.parse_type()?;
        let init = if matches!(self.peek(), Token::Assign) {
            self.advance();
            Some(self.parse_expr()?)
        } else {
            None
        };
        self.expect(&Token::Semi, "`;`")?;
        Ok(GlobalDecl {
            name,
            ty,
            init,
            span,
        })
    }

    fn parse_function(&mut self) -> Result<FunctionDecl, LangError> {
        let mut memo = None;
        if matches!(self.peek(), Token::At) {
            self.advance();
            let (attr, aspan) = self.expect_ident("attribute name")?;
            if attr != "memo" {
                return Err(LangError::Syntax {
                    line: aspan.line,
                    col: aspan.col,
                    message: format!("unknown attribute `@{attr}`"),
                });
            }
            self.expect(&Token::LParen, "`(`")?;
            let tolerance = match self.advance() {
                Token::FloatLit(v) => v,
                Token::IntLit(v) => v as f64,
                other => return Err(self.error(format!("expected tolerance, found {other:?}"))),
            };
            self.expect(&Token::Comma, "`,`")?;
            let capacity = self.expect_dim()?;
            self.expect(&Token::RParen, "`)`")?;
            memo = Some(MemoAttr {
                tolerance,
                capacity,
            });
        }

        let span = self.expect(&Token::KwFunc, "`func`")?;
        let (name, _) = self.expect_ident("function name")?;
        self.expect(&Token::LParen, "`(`")?;
        let mut params = Vec::new();
        if !matches!(self.peek(), Token::RParen) {
            loop {
                let (pname, pspan) = self.expect_ident("parameter name")?;
                self.expect(&Token::Colon, "`:`")?;
                let ty = match self.advance() {
                    Token::KwInt => ScalarType::Int,
                    Token::KwFloat => ScalarType::Float,
                    other => {
                        return Err(self.error(format!(
                            "parameters are scalar `int` or `float`, found {other:?}"
                        )))
                    }
                };
                params.push(Param {
                    name: pname,
                    ty,
                    span: pspan,
                });
                if matches!(self.peek(), Token::Comma) {
                    self.advance();
                } else {
                    break;
                }
            }
        }
        self.expect(&Token::RParen, "`)`")?;
        let ret = if matches!(self.peek(), Token::Arrow) {
            self.advance();
            Some(match self.advance() {
                Token::KwInt => ScalarType::Int,
                Token::KwFloat => ScalarType::Float,
                other => return Err(self.error(format!("expected return type, found {other:?}"))),
            })
        } else {
            None
        };
        let body = self.parse_block()?;
        Ok(FunctionDecl {
            name,
            params,
            ret,
            body,
            memo,
            span,
        })
    }

    fn parse_block(&mut self) -> Result<Vec<Stmt>, LangError> {
        self.expect(&Token::LBrace, "`{`")?;
        let mut stmts = Vec::new();
        while !matches!(self.peek(), Token::RBrace) {
            if matches!(self.peek(), Token::Eof) {
                return Err(self.error("unexpected end of file inside block"));
            }
            stmts.push(self.parse_stmt()?);
        }
        self.advance();
        Ok(stmts)
    }

    fn parse_stmt(&mut self) -> Result<Stmt, LangError> {
        match self.peek() {
            Token::KwVar => self.parse_decl(),
            Token::KwIf => self.parse_if(),
            Token::KwWhile => self.parse_while(),
            Token::KwFor => self.parse_for(),
            Token::KwReturn => {
                let span = self.span();
                self.advance();
                let value = if matches!(self.peek(), Token::Semi) {
                    None
                } else {
                    Some(self.parse_expr()?)
                };
                self.expect(&Token::Semi, "`;`")?;
                Ok(Stmt::Return { value, span })
            }
            Token::Ident(_) => {
                if matches!(self.peek2(), Token::LParen) {
                    self.parse_call_stmt()
                } else {
                    self.parse_assign()
                }
            }
            other => Err(self.error(format!("expected statement, found {other:?}"))),
        }
    }

    fn parse_decl(&mut self) -> Result<Stmt, LangError> {
        let span = self.expect(&Token::KwVar, "`var`")?;
        let (name, _) = self.expect_ident("variable name")?;
        self.expect(&Token::Colon, "`:`")?;
        let ty = self.parse_type()?;
        let init = if matches!(self.peek(), Token::Assign) {
            self.advance();
            Some(self.parse_expr()?)
        } else {
            None
        };
        self.expect(&Token::Semi, "`;`")?;
        Ok(Stmt::Decl {
            name,
            ty,
            init,
            span,
        })
    }

    fn parse_if(&mut self) -> Result<Stmt, LangError> {
        let span = self.expect(&Token::KwIf, "`if`")?;
        self.expect(&Token::LParen, "`(`")?;
        let cond = self.parse_expr()?;
        self.expect(&Token::RParen, "`)`")?;
        let then_body = self.parse_block()?;
        let else_body = if matches!(self.peek(), Token::KwElse) {
            self.advance();
            if matches!(self.peek(), Token::KwIf) {
                vec![self.parse_if()?]
            } else {
                self.parse_block()?
            }
        } else {
            Vec::new()
        };
        Ok(Stmt::If {
            cond,
            then_body,
            else_body,
            span,
        })
    }

    fn parse_while(&mut self) -> Result<Stmt, LangError> {
        let span = self.expect(&Token::KwWhile, "`while`")?;
        self.expect(&Token::LParen, "`(`")?;
        let cond = self.parse_expr()?;
        self.expect(&Token::RParen, "`)`")?;
        let body = self.parse_block()?;
        Ok(Stmt::While { cond, body, span })
    }

    // for (var i: int = INIT; i < BOUND; i = i + STEP) { .. }
    fn parse_for(&mut self) -> Result<Stmt, LangError> {
        let span = self.expect(&Token::KwFor, "`for`")?;
        self.expect(&Token::LParen, "`(`")?;
        self.expect(&Token::KwVar, "`var` in for-init")?;
        let (var, _) = self.expect_ident("loop variable")?;
        self.expect(&Token::Colon, "`:`")?;
        self.expect(&Token::KwInt, "`int` (loop variables are int)")?;
        self.expect(&Token::Assign, "`=`")?;
        let init = self.parse_expr()?;
        self.expect(&Token::Semi, "`;`")?;

        let (cvar, cspan) = self.expect_ident("loop variable in condition")?;
        if cvar != var {
            return Err(LangError::Syntax {
                line: cspan.line,
                col: cspan.col,
                message: format!("for-condition must test loop variable `{var}`"),
            });
        }
        self.expect(&Token::Lt, "`<`")?;
        let bound = self.parse_expr()?;
        self.expect(&Token::Semi, "`;`")?;

        let (svar, sspan) = self.expect_ident("loop variable in step")?;
        if svar != var {
            return Err(LangError::Syntax {
                line: sspan.line,
                col: sspan.col,
                message: format!("for-step must assign loop variable `{var}`"),
            });
        }
        self.expect(&Token::Assign, "`=`")?;
        let (svar2, s2span) = self.expect_ident("loop variable in step")?;
        if svar2 != var {
            return Err(LangError::Syntax {
                line: s2span.line,
                col: s2span.col,
                message: format!("for-step must have the form `{var} = {var} + <expr>`"),
            });
        }
        self.expect(&Token::Plus, "`+`")?;
        let step = self.parse_expr()?;
        self.expect(&Token::RParen, "`)`")?;
        let body = self.parse_block()?;
        Ok(Stmt::For {
            var,
            init,
            bound,
            step,
            body,
            span,
        })
    }

    fn parse_call_stmt(&mut self) -> Result<Stmt, LangError> {
        let span = self.span();
        let (name, _) = self.expect_ident("function name")?;
        self.expect(&Token::LParen, "`(`")?;

        if let Some(kind) = EmitKind::from_name(&name) {
            let stmt = match kind {
                EmitKind::Word => {
                    let wspan = self.span();
                    let word = match self.advance() {
                        Token::StrLit(s) => self.intern(&s),
                        other => {
                            return Err(LangError::Syntax {
                                line: wspan.line,
                                col: wspan.col,
                                message: format!(
                                    "emit_word takes a string literal, found {other:?}"
                                ),
                            })
                        }
                    };
                    Stmt::Emit {
                        kind,
                        args: Vec::new(),
                        word: Some(word),
                        span,
                    }
                }
                _ => {
                    let args = self.parse_args()?;
                    Stmt::Emit {
                        kind,
                        args,
                        word: None,
                        span,
                    }
                }
            };
            self.expect(&Token::RParen, "`)`")?;
            self.expect(&Token::Semi, "`;`")?;
            return Ok(stmt);
        }

        let args = self.parse_args()?;
        self.expect(&Token::RParen, "`)`")?;
        self.expect(&Token::Semi, "`;`")?;
        Ok(Stmt::Call { name, args, span })
    }

    fn parse_assign(&mut self) -> Result<Stmt, LangError> {
        let span = self.span();
        let (name, nspan) = self.expect_ident("assignment target")?;
        let target = if matches!(self.peek(), Token::LBracket) {
            let mut indices = Vec::new();
            while matches!(self.peek(), Token::LBracket) {
                if indices.len() == 2 {
                    return Err(self.error("at most two index expressions"));
                }
                self.advance();
                indices.push(self.parse_expr()?);
                self.expect(&Token::RBracket, "`]`")?;
            }
            LValue::Index {
                name,
                indices,
                span: nspan,
            }
        } else {
            LValue::Var { name, span: nspan }
        };
        self.expect(&Token::Assign, "`=`")?;
        let value = self.parse_expr()?;
        self.expect(&Token::Semi, "`;`")?;
        Ok(Stmt::Assign {
            target,
            value,
            span,
        })
    }

    fn parse_args(&mut self) -> Result<Vec<Expr>, LangError> {
        let mut args = Vec::new();
        if matches!(self.peek(), Token::RParen) {
            return Ok(args);
        }
        loop {
            args.push(self.parse_expr()?);
            if matches!(self.peek(), Token::Comma) {
                self.advance();
            } else {
                break;
            }
        }
        Ok(args)
    }

    // expr := additive (cmp_op additive)?
    fn parse_expr(&mut self) -> Result<Expr, LangError> {
        let lhs = self.parse_additive()?;
        let op = match self.peek() {
            Token::Lt => CmpOp::Lt,
            Token::Le => CmpOp::Le,
            Token::Gt => CmpOp::Gt,
            Token::Ge => CmpOp::Ge,
            Token::EqEq => CmpOp::Eq,
            Token::Ne => CmpOp::Ne,
            _ => return Ok(lhs),
        };
        let span = self.span();
        self.advance();
        let rhs = self.parse_additive()?;
        Ok(Expr::Compare {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
            span,
        })
    }

    fn parse_additive(&mut self) -> Result<Expr, LangError> {
        let mut lhs = self.parse_term()?;
        loop {
            let op = match self.peek() {
                Token::Plus => BinOp::Add,
                Token::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            let span = self.span();
            self.advance();
            let rhs = self.parse_term()?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
                span,
            };
        }
    }

    fn parse_term(&mut self) -> Result<Expr, LangError> {
        let mut lhs = self.parse_unary()?;
        loop {
            let op = match self.peek() {
                Token::Star => BinOp::Mul,
                Token::Slash => BinOp::Div,
                Token::Percent => BinOp::Mod,
                _ => return Ok(lhs),
            };
            let span = self.span();
            self.advance();
            let rhs = self.parse_unary()?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
                span,
            };
        }
    }

    fn parse_unary(&mut self) -> Result<Expr, LangError> {
        if matches!(self.peek(), Token::Minus) {
            let span = self.span();
            self.advance();
            let expr = self.parse_unary()?;
            return Ok(Expr::Unary {
                expr: Box::new(expr),
                span,
            });
        }
        self.parse_primary()
    }

    fn parse_primary(&mut self) -> Result<Expr, LangError> {
        let span = self.span();
        match self.advance() {
            Token::IntLit(v) => Ok(Expr::IntLit { value: v, span }),
            Token::FloatLit(v) => Ok(Expr::FloatLit { value: v, span }),
            Token::LParen => {
                let e = self.parse_expr()?;
                self.expect(&Token::RParen, "`)`")?;
                Ok(e)
            }
            Token::Ident(name) => {
                if matches!(self.peek(), Token::LParen) {
                    self.advance();
                    let args = self.parse_args()?;
                    self.expect(&Token::RParen, "`)`")?;
                    if let Some(kind) = Intrinsic::from_name(&name) {
                        return Ok(Expr::IntrinsicCall { kind, args, span });
                    }
                    if EmitKind::from_name(&name).is_some() {
                        return Err(LangError::Syntax {
                            line: span.line,
                            col: span.col,
                            message: format!("`{name}` is a statement, not an expression"),
                        });
                    }
                    return Ok(Expr::Call { name, args, span });
                }
                if matches!(self.peek(), Token::LBracket) {
                    let mut indices = Vec::new();
                    while matches!(self.peek(), Token::LBracket) {
                        if indices.len() == 2 {
                            return Err(self.error("at most two index expressions"));
                        }
                        self.advance();
                        indices.push(self.parse_expr()?);
                        self.expect(&Token::RBracket, "`]`")?;
                    }
                    return Ok(Expr::Index {
                        name,
                        indices,
                        span,
                    });
                }
                Ok(Expr::Var { name, span })
            }
            other => Err(LangError::Syntax {
                line: span.line,
                col: span.col,
                message: format!("expected expression, found {other:?}"),
            }),
        }
    }
}
