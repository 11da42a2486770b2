use std::collections::{BTreeSet, HashSet};

use super::ast::*;
use super::error::{DeclarationError, ParseError, SyntaxError};
use super::lexer::{tokenize, Pos, Spanned, Token};
use super::types::{TypeName, RESERVED_TYPE_NAMES};

/// Parses one MiniJ compilation unit.
pub fn parse(text: &str, path: &str) -> Result<SourceUnit, ParseError> {
    let tokens = tokenize(text).map_err(|source| ParseError::Syntax { path: path.into(), source })?;
    let mut parser = Parser { tokens, at: 0 };
    let unit = parser.unit(path).map_err(|e| match e {
        Failure::Syntax(source) => ParseError::Syntax { path: path.into(), source },
        Failure::Declaration(source) => ParseError::Declaration { path: path.into(), source },
    })?;
    Ok(unit)
}

enum Failure {
    Syntax(SyntaxError),
    Declaration(DeclarationError),
}

impl From<SyntaxError> for Failure {
    fn from(e: SyntaxError) -> Self {
        Failure::Syntax(e)
    }
}

fn decl_err<T>(pos: Pos, message: impl Into<String>) -> Result<T, Failure> {
    Err(Failure::Declaration(DeclarationError { pos, message: message.into() }))
}

type PResult<T> = Result<T, Failure>;

struct Parser {
    tokens: Vec<Spanned>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.at].token
    }

    fn peek_at(&self, offset: usize) -> &Token {
        let i = (self.at + offset).min(self.tokens.len() - 1);
        &self.tokens[i].token
    }

    fn pos(&self) -> Pos {
        self.tokens[self.at].pos
    }

    fn advance(&mut self) -> Token {
        let tok = self.tokens[self.at].token.clone();
        if self.at + 1 < self.tokens.len() {
            self.at += 1;
        }
        tok
    }

    fn error(&self, expected: &str) -> Failure {
        Failure::Syntax(SyntaxError::new(self.pos(), expected).found(format!("`{}`", self.peek())))
    }

    fn expect(&mut self, tok: Token) -> PResult<()> {
        if *self.peek() == tok {
            self.advance();
            Ok(())
        } else {
            Err(self.error(&format!("`{tok}`")))
        }
    }

    fn eat(&mut self, tok: Token) -> bool {
        if *self.peek() == tok {
            self.advance();
            true
        } else {
            false
        }
    }

    fn ident(&mut self, what: &str) -> PResult<String> {
        match self.peek() {
            Token::Ident(name) => {
                let name = name.clone();
                self.advance();
                Ok(name)
            }
            _ => Err(self.error(what)),
        }
    }

    fn type_name(&mut self) -> PResult<TypeName> {
        let name = self.ident("a type name")?;
        Ok(TypeName::from_ident(&name))
    }

    fn unit(&mut self, path: &str) -> PResult<SourceUnit> {
        let mut classes: Vec<ClassDecl> = Vec::new();
        let mut tests: Vec<TestDecl> = Vec::new();
        loop {
            match self.peek() {
                Token::Eof => break,
                Token::Class => {
                    let class = self.class()?;
                    if classes.iter().any(|c| c.name == class.name) {
                        return decl_err(class.pos, format!("duplicate class {}", class.name));
                    }
                    classes.push(class);
                }
                Token::Test => {
                    let test = self.test()?;
                    if tests.iter().any(|t| t.name == test.name) {
                        return decl_err(test.pos, format!("duplicate test {}", test.name));
                    }
                    tests.push(test);
                }
                _ => return Err(self.error("`class` or `test`")),
            }
        }
        Ok(SourceUnit { path: path.to_string(), classes, tests })
    }

    fn test(&mut self) -> PResult<TestDecl> {
        let pos = self.pos();
        self.expect(Token::Test)?;
        let name = self.ident("a test name")?;
        self.expect(Token::LParen)?;
        self.expect(Token::RParen)?;
        let body = self.block()?;
        Ok(TestDecl { name, body, pos })
    }

    fn class(&mut self) -> PResult<ClassDecl> {
        let pos = self.pos();
        self.expect(Token::Class)?;
        let name = self.ident("a class name")?;
        if RESERVED_TYPE_NAMES.contains(&name.as_str()) {
            return decl_err(pos, format!("`{name}` is a reserved type name"));
        }
        let superclass = if self.eat(Token::Extends) {
            let parent = self.ident("a superclass name")?;
            (parent != "Object").then_some(parent)
        } else {
            None
        };
        self.expect(Token::LBrace)?;
        let mut fields: Vec<FieldDecl> = Vec::new();
        let mut methods: Vec<MethodDecl> = Vec::new();
        while !self.eat(Token::RBrace) {
            match self.member(&name)? {
                Member::Field(field) => {
                    if fields.iter().any(|f| f.name == field.name) {
                        return decl_err(field.pos, format!("duplicate field {}.{}", name, field.name));
                    }
                    fields.push(field);
                }
                Member::Method(method) => {
                    let clash =
                        methods.iter().any(|m| m.name == method.name && m.param_types() == method.param_types());
                    if clash {
                        return decl_err(method.pos, format!("duplicate method {}", method.id(&name).selector()));
                    }
                    methods.push(method);
                }
            }
        }
        Ok(ClassDecl { name, superclass, fields, methods, pos })
    }

    fn member(&mut self, class: &str) -> PResult<Member> {
        let pos = self.pos();
        let mut modifiers = BTreeSet::new();
        if self.eat(Token::Static) {
            modifiers.insert(Modifier::Static);
        }
        // constructor: ClassName '('
        if matches!(self.peek(), Token::Ident(n) if n == class) && *self.peek_at(1) == Token::LParen {
            if !modifiers.is_empty() {
                return decl_err(pos, "constructors cannot be static");
            }
            self.advance();
            return self.method_rest(class.to_string(), None, modifiers, true, pos).map(Member::Method);
        }
        let ret = if self.eat(Token::Void) { None } else { Some(self.type_name()?) };
        let name = self.ident("a member name")?;
        if *self.peek() == Token::Semi {
            self.advance();
            let Some(ty) = ret else {
                return decl_err(pos, format!("field {name} cannot be void"));
            };
            if !modifiers.is_empty() {
                return decl_err(pos, "fields cannot be static");
            }
            return Ok(Member::Field(FieldDecl { name, ty, pos }));
        }
        if name == class {
            return decl_err(pos, format!("method {name} is named like its class; constructors take no return type"));
        }
        self.method_rest(name, ret, modifiers, false, pos).map(Member::Method)
    }

    fn method_rest(
        &mut self,
        name: String,
        ret: Option<TypeName>,
        modifiers: BTreeSet<Modifier>,
        is_ctor: bool,
        pos: Pos,
    ) -> PResult<MethodDecl> {
        self.expect(Token::LParen)?;
        let mut params: Vec<Param> = Vec::new();
        if !self.eat(Token::RParen) {
            loop {
                let ppos = self.pos();
                let ty = self.type_name()?;
                let pname = self.ident("a parameter name")?;
                if params.iter().any(|p| p.name == pname) {
                    return decl_err(ppos, format!("duplicate parameter {pname}"));
                }
                params.push(Param { name: pname, ty });
                if self.eat(Token::RParen) {
                    break;
                }
                self.expect(Token::Comma)?;
            }
        }
        let mut throws = Vec::new();
        if self.eat(Token::Throws) {
            loop {
                throws.push(self.ident("an exception name")?);
                if !self.eat(Token::Comma) {
                    break;
                }
            }
        }
        let body = self.block()?;
        Ok(MethodDecl { name, params, ret, modifiers, throws, body, is_ctor, pos })
    }

    fn block(&mut self) -> PResult<Block> {
        self.expect(Token::LBrace)?;
        let mut stmts = Vec::new();
        while !self.eat(Token::RBrace) {
            if *self.peek() == Token::Eof {
                return Err(self.error("`}`"));
            }
            stmts.push(self.stmt()?);
        }
        Ok(Block { stmts })
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let pos = self.pos();
        let kind = match self.peek() {
            Token::LBrace => StmtKind::Block(self.block()?),
            Token::If => {
                self.advance();
                self.expect(Token::LParen)?;
                let cond = self.expr()?;
                self.expect(Token::RParen)?;
                let then = Box::new(self.stmt()?);
                let otherwise = if self.eat(Token::Else) { Some(Box::new(self.stmt()?)) } else { None };
                StmtKind::If { cond, then, otherwise }
            }
            Token::While => {
                self.advance();
                self.expect(Token::LParen)?;
                let cond = self.expr()?;
                self.expect(Token::RParen)?;
                StmtKind::While { cond, body: Box::new(self.stmt()?) }
            }
            Token::Return => {
                self.advance();
                let value = if *self.peek() == Token::Semi { None } else { Some(self.expr()?) };
                self.expect(Token::Semi)?;
                StmtKind::Return(value)
            }
            Token::Print | Token::Assert => {
                let is_print = self.advance() == Token::Print;
                self.expect(Token::LParen)?;
                let e = self.expr()?;
                self.expect(Token::RParen)?;
                self.expect(Token::Semi)?;
                if is_print {
                    StmtKind::Print(e)
                } else {
                    StmtKind::Assert(e)
                }
            }
            Token::Super => {
                self.advance();
                let args = self.args()?;
                self.expect(Token::Semi)?;
                StmtKind::SuperCall(args)
            }
            Token::Ident(_) if matches!(self.peek_at(1), Token::Ident(_)) => {
                let ty = self.type_name()?;
                let name = self.ident("a variable name")?;
                let init = if self.eat(Token::Assign) { Some(self.expr()?) } else { None };
                self.expect(Token::Semi)?;
                StmtKind::Local { ty, name, init }
            }
            _ => {
                let target = self.expr()?;
                let kind = match self.peek() {
                    Token::Assign => {
                        self.advance();
                        let value = self.expr()?;
                        StmtKind::Assign { target, value }
                    }
                    Token::PlusPlus | Token::MinusMinus => {
                        let op = if self.advance() == Token::PlusPlus { StepOp::Inc } else { StepOp::Dec };
                        StmtKind::Step { target, op }
                    }
                    _ => StmtKind::Expr(target),
                };
                self.expect(Token::Semi)?;
                if let StmtKind::Assign { target, .. } | StmtKind::Step { target, .. } = &kind {
                    if !matches!(target.kind, ExprKind::Name(_) | ExprKind::Field { .. }) {
                        return Err(Failure::Syntax(SyntaxError::new(target.pos, "an assignable variable or field")));
                    }
                }
                kind
            }
        };
        Ok(Stmt { kind, pos })
    }

    fn args(&mut self) -> PResult<Vec<Expr>> {
        self.expect(Token::LParen)?;
        let mut args = Vec::new();
        if self.eat(Token::RParen) {
            return Ok(args);
        }
        loop {
            args.push(self.expr()?);
            if self.eat(Token::RParen) {
                return Ok(args);
            }
            self.expect(Token::Comma)?;
        }
    }

    fn expr(&mut self) -> PResult<Expr> {
        self.binary(1)
    }

    fn binary_op(&self) -> Option<BinOp> {
        Some(match self.peek() {
            Token::OrOr => BinOp::Or,
            Token::AndAnd => BinOp::And,
            Token::EqEq => BinOp::Eq,
            Token::NotEq => BinOp::Ne,
            Token::Lt => BinOp::Lt,
            Token::Le => BinOp::Le,
            Token::Gt => BinOp::Gt,
            Token::Ge => BinOp::Ge,
            Token::Plus => BinOp::Add,
            Token::Minus => BinOp::Sub,
            Token::Star => BinOp::Mul,
            Token::Slash => BinOp::Div,
            Token::Percent => BinOp::Rem,
            _ => return None,
        })
    }

    /// Precedence climbing; all binary operators are left-associative.
    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binary_op().filter(|op| op.precedence() >= min_prec) {
            let pos = self.pos();
            self.advance();
            let rhs = self.binary(op.precedence() + 1)?;
            lhs = Expr::new(ExprKind::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) }, pos);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let pos = self.pos();
        let op = match self.peek() {
            Token::Minus => UnOp::Neg,
            Token::Bang => UnOp::Not,
            _ => return self.postfix(),
        };
        self.advance();
        let operand = self.unary()?;
        Ok(Expr::new(ExprKind::Unary { op, operand: Box::new(operand) }, pos))
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.primary()?;
        while *self.peek() == Token::Dot {
            let pos = self.pos();
            self.advance();
            let name = self.ident("a member name")?;
            e = if *self.peek() == Token::LParen {
                let args = self.args()?;
                Expr::new(ExprKind::Call { target: Some(Box::new(e)), name, args }, pos)
            } else {
                Expr::new(ExprKind::Field { target: Box::new(e), name }, pos)
            };
        }
        Ok(e)
    }

    fn primary(&mut self) -> PResult<Expr> {
        let pos = self.pos();
        let kind = match self.peek().clone() {
            Token::Int(v) => {
                self.advance();
                ExprKind::Int(v)
            }
            Token::Str(s) => {
                self.advance();
                ExprKind::Str(s)
            }
            Token::True | Token::False => ExprKind::Bool(self.advance() == Token::True),
            Token::Null => {
                self.advance();
                ExprKind::Null
            }
            Token::This => {
                self.advance();
                ExprKind::This
            }
            Token::New => {
                self.advance();
                let class = self.ident("a class name")?;
                let args = self.args()?;
                ExprKind::New { class, args }
            }
            Token::LParen => {
                self.advance();
                let inner = self.expr()?;
                self.expect(Token::RParen)?;
                return Ok(inner);
            }
            Token::Ident(name) => {
                self.advance();
                if *self.peek() == Token::LParen {
                    let args = self.args()?;
                    ExprKind::Call { target: None, name, args }
                } else {
                    ExprKind::Name(name)
                }
            }
            _ => return Err(self.error("an expression")),
        };
        Ok(Expr::new(kind, pos))
    }
}

enum Member {
    Field(FieldDecl),
    Method(MethodDecl),
}

/// Checks that no class name repeats across units.
pub(crate) fn unique_class_names(units: &[SourceUnit]) -> Result<(), (String, String, String)> {
    let mut seen: HashSet<&str> = HashSet::new();
    for unit in units {
        for class in &unit.classes {
            if !seen.insert(&class.name) {
                let first = units
                    .iter()
                    .find(|u| u.classes.iter().any(|c| c.name == class.name))
                    .map(|u| u.path.clone())
                    .unwrap_or_default();
                return Err((class.name.clone(), first, unit.path.clone()));
            }
        }
    }
    Ok(())
}
