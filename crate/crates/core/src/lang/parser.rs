//! Recursive-descent parser for rule files.
//!
//! Statements are newline-agnostic. A hard constraint ends with `.`; a weighted
//! rule has no terminator and ends where the grammar cannot extend it.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use crate::diag::{Diagnostic, DiagnosticCode, Span};

/// Parses a whole rule file.
///
/// Returns the program with rules in source order, or every diagnostic
/// collected while parsing. Verbalization annotations are attached to their
/// predicates and rules.
pub fn parse_program(text: &str) -> Result<Program, Vec<Diagnostic>> {
    let (tokens, mut diags) = tokenize(text);
    if !diags.is_empty() {
        return Err(diags);
    }
    let mut parser = Parser { tokens, pos: 0, text_len: text.len(), diags: Vec::new() };
    let mut program = Program::default();
    let mut rule_templates: Vec<(String, String, Span)> = Vec::new();

    while !parser.at_end() {
        let before = parser.diags.len();
        let ok = if let Some(Tok::Directive(_)) = parser.peek() {
            parser.directive(&mut program, &mut rule_templates)
        } else {
            parser.statement().map(|rule| program.rules.push(rule))
        };
        if ok.is_none() || parser.diags.len() > before {
            parser.recover();
        }
    }

    for (name, template, span) in rule_templates {
        match program.rules.iter_mut().find(|r| r.name.as_deref() == Some(name.as_str())) {
            Some(rule) => rule.verbalization = Some(template),
            None => parser.diags.push(
                Diagnostic::error(
                    DiagnosticCode::UnknownRuleName,
                    format!("verbalization refers to unknown rule `{name}`"),
                )
                .at(span)
                .with_token(name),
            ),
        }
    }

    diags.append(&mut parser.diags);
    if diags.is_empty() {
        Ok(program)
    } else {
        diags.sort_by_key(|d| d.span);
        Err(diags)
    }
}

/// Parses text holding exactly one statement.
pub fn parse_rule(text: &str) -> Result<Rule, Vec<Diagnostic>> {
    let program = parse_program(text)?;
    let mut rules = program.rules;
    match rules.len() {
        1 => Ok(rules.remove(0)),
        0 => Err(alloc::vec![Diagnostic::error(DiagnosticCode::UnexpectedEnd, "expected a rule")]),
        _ => Err(alloc::vec![Diagnostic::error(
            DiagnosticCode::MultipleStatements,
            format!("expected one statement, found {}", rules.len())
        )
        .at(rules[1].span)]),
    }
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    text_len: usize,
    diags: Vec<Diagnostic>,
}

type PResult<T> = Option<T>;

impl Parser {
    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.tok)
    }

    fn peek_at(&self, offset: usize) -> Option<&Tok> {
        self.tokens.get(self.pos + offset).map(|t| &t.tok)
    }

    fn span(&self) -> Span {
        match self.tokens.get(self.pos) {
            Some(t) => t.span,
            None => {
                let last = self.tokens.last().map(|t| t.span).unwrap_or_default();
                Span {
                    start: self.text_len,
                    end: self.text_len,
                    line: last.line.max(1),
                    column: last.column.max(1),
                }
            }
        }
    }

    fn prev_end(&self) -> usize {
        self.pos.checked_sub(1).and_then(|i| self.tokens.get(i)).map(|t| t.span.end).unwrap_or(0)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.tokens.get(self.pos).map(|t| t.tok.clone());
        self.pos += 1;
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn error<T>(&mut self, code: DiagnosticCode, message: impl Into<String>) -> PResult<T> {
        let span = self.span();
        let mut d = Diagnostic::error(code, message).at(span);
        match self.peek() {
            Some(t) => d = d.with_token(t.describe()),
            None if code == DiagnosticCode::UnexpectedToken => d.code = DiagnosticCode::UnexpectedEnd,
            None => {}
        }
        self.diags.push(d);
        None
    }

    fn expect(&mut self, tok: &Tok) -> PResult<()> {
        if self.eat(tok) {
            Some(())
        } else {
            let found = self.peek().map(Tok::describe).unwrap_or_else(|| "end of input".into());
            self.error(
                DiagnosticCode::UnexpectedToken,
                format!("expected `{}`, found `{found}`", tok.describe()),
            )
        }
    }

    /// Skips to just past the next `.` (or the end of input).
    fn recover(&mut self) {
        while let Some(t) = self.bump() {
            if t == Tok::Dot {
                break;
            }
        }
    }

    fn directive(
        &mut self,
        program: &mut Program,
        rule_templates: &mut Vec<(String, String, Span)>,
    ) -> PResult<()> {
        let span = self.span();
        let Some(Tok::Directive(name)) = self.bump() else { unreachable!() };
        match name.as_str() {
            "predicate" => {
                let pred = self.ident()?;
                self.expect(&Tok::Slash)?;
                let arity = match self.bump() {
                    Some(Tok::Number(n)) if n >= 1.0 && (n as usize) as f64 == n => n as usize,
                    _ => {
                        self.pos -= 1;
                        return self.error(DiagnosticCode::UnexpectedToken, "expected an arity >= 1");
                    }
                };
                match program.predicates.iter_mut().find(|p| p.name == pred) {
                    Some(p) if p.explicit => {
                        self.diags.push(
                            Diagnostic::error(
                                DiagnosticCode::DuplicatePredicate,
                                format!("predicate `{pred}` declared twice"),
                            )
                            .at(span)
                            .with_token(pred),
                        );
                    }
                    Some(p) => {
                        p.arity = arity;
                        p.explicit = true;
                    }
                    None => program.predicates.push(PredicateDecl {
                        name: pred,
                        arity,
                        verbalizations: Vec::new(),
                        explicit: true,
                    }),
                }
                Some(())
            }
            "verbalize" => {
                if matches!(self.peek(), Some(Tok::Ident(s)) if s == "rule") {
                    self.bump();
                    let rule = self.ident()?;
                    self.expect(&Tok::Colon)?;
                    let template = self.string()?;
                    rule_templates.push((rule, template, span));
                    return Some(());
                }
                let pred = self.ident()?;
                let pattern = if self.eat(&Tok::LParen) {
                    let mut pattern = Vec::new();
                    loop {
                        match self.bump() {
                            Some(Tok::Star) => pattern.push(None),
                            Some(Tok::Quoted(c)) => pattern.push(Some(c)),
                            _ => {
                                self.pos -= 1;
                                return self.error(
                                    DiagnosticCode::UnexpectedToken,
                                    "expected `*` or a quoted constant in verbalization pattern",
                                );
                            }
                        }
                        if !self.eat(&Tok::Comma) {
                            break;
                        }
                    }
                    self.expect(&Tok::RParen)?;
                    Some(pattern)
                } else {
                    None
                };
                self.expect(&Tok::Colon)?;
                let template = self.string()?;
                let verbalization = Verbalization { pattern, template };
                match program.predicates.iter_mut().find(|p| p.name == pred) {
                    Some(p) => p.verbalizations.push(verbalization),
                    None => program.predicates.push(PredicateDecl {
                        arity: verbalization.pattern.as_ref().map_or(0, Vec::len),
                        name: pred,
                        verbalizations: alloc::vec![verbalization],
                        explicit: false,
                    }),
                }
                Some(())
            }
            other => {
                self.pos -= 1;
                self.error(DiagnosticCode::UnexpectedToken, format!("unknown directive `@{other}`"))
            }
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Some(s)
            }
            _ => self.error(DiagnosticCode::UnexpectedToken, "expected an identifier"),
        }
    }

    fn string(&mut self) -> PResult<String> {
        match self.peek() {
            Some(Tok::Str(s)) => {
                let s = s.clone();
                self.pos += 1;
                Some(s)
            }
            _ => self.error(DiagnosticCode::UnexpectedToken, "expected a double-quoted template"),
        }
    }

    fn statement(&mut self) -> PResult<Rule> {
        let mut span = self.span();

        let name = match (self.peek(), self.peek_at(1)) {
            (Some(Tok::Ident(label)), Some(Tok::Colon)) => {
                let label = label.clone();
                self.pos += 2;
                Some(label)
            }
            _ => None,
        };
        let weight = match (self.peek(), self.peek_at(1)) {
            (Some(Tok::Number(w)), Some(Tok::Colon)) => {
                let w = *w;
                self.pos += 2;
                Some(w)
            }
            _ => None,
        };

        let body = self.rule_body()?;

        let mut squared = false;
        if self.peek() == Some(&Tok::Caret) {
            if weight.is_none() {
                return self.error(DiagnosticCode::UnexpectedToken, "`^2` is only allowed on weighted rules");
            }
            self.bump();
            match self.bump() {
                Some(Tok::Number(2.0)) => squared = true,
                _ => {
                    self.pos -= 1;
                    return self.error(DiagnosticCode::UnexpectedToken, "expected `2` after `^`");
                }
            }
        }

        let kind = match weight {
            Some(weight) => {
                if self.peek() == Some(&Tok::Dot) {
                    return self
                        .error(DiagnosticCode::WeightedRuleWithDot, "weighted rules must not end with `.`");
                }
                RuleKind::Weighted { weight, squared }
            }
            None => {
                let filter_terminated =
                    matches!(body, RuleBody::Arithmetic(_)) && self.peek() == Some(&Tok::LBrace);
                if !self.eat(&Tok::Dot) && !filter_terminated {
                    return self.error(DiagnosticCode::MissingDot, "constraint must end with `.`");
                }
                RuleKind::Hard
            }
        };

        let mut filters = Vec::new();
        while self.peek() == Some(&Tok::LBrace) {
            let filter_span = self.span();
            let filter = self.filter()?;
            filters.push((filter, filter_span));
        }

        let body = match body {
            RuleBody::Logical(l) => {
                if let Some((_, s)) = filters.first() {
                    self.diags.push(
                        Diagnostic::error(
                            DiagnosticCode::FilterOnNonSummation,
                            "filters can only be attached to arithmetic rules",
                        )
                        .at(*s),
                    );
                    return None;
                }
                for atom in l.atoms() {
                    if atom.has_summation() {
                        self.diags.push(
                            Diagnostic::error(
                                DiagnosticCode::SummationInLogicalRule,
                                "summation variables are only allowed in arithmetic rules",
                            )
                            .at(span)
                            .with_token(atom.predicate.clone()),
                        );
                        return None;
                    }
                }
                RuleBody::Logical(l)
            }
            RuleBody::Arithmetic(mut a) => {
                let sums = a.summation_variables();
                for (filter, s) in &filters {
                    if !sums.contains(&filter.variable.as_str()) {
                        self.diags.push(
                            Diagnostic::error(
                                DiagnosticCode::FilterOnNonSummation,
                                format!(
                                    "filter is bound to `{}`, which is not a summation variable",
                                    filter.variable
                                ),
                            )
                            .at(*s)
                            .with_token(filter.variable.clone()),
                        );
                        return None;
                    }
                }
                a.filters = filters.into_iter().map(|(f, _)| f).collect();
                RuleBody::Arithmetic(a)
            }
        };

        span.end = self.prev_end();
        Some(Rule { name, kind, body, span, verbalization: None })
    }

    fn rule_body(&mut self) -> PResult<RuleBody> {
        match self.peek() {
            Some(Tok::Tilde | Tok::Bang) => self.logical(None).map(RuleBody::Logical),
            Some(Tok::Ident(_) | Tok::Quoted(_)) if matches!(self.peek_at(1), Some(Tok::Ne | Tok::EqEq)) => {
                self.logical(None).map(RuleBody::Logical)
            }
            Some(Tok::Ident(_) | Tok::Number(_) | Tok::Minus | Tok::Plus) => {
                let lhs = self.expr()?;
                let comparator = match self.peek() {
                    Some(Tok::Eq) => Some(Comparator::Eq),
                    Some(Tok::Le) => Some(Comparator::Le),
                    Some(Tok::Ge) => Some(Comparator::Ge),
                    _ => None,
                };
                if let Some(comparator) = comparator {
                    self.bump();
                    let rhs = self.expr()?;
                    return Some(RuleBody::Arithmetic(ArithmeticRule {
                        lhs,
                        comparator,
                        rhs,
                        filters: Vec::new(),
                    }));
                }
                // Not arithmetic: the expression must have been a single atom.
                let single = lhs.constant == 0.0 && lhs.terms.len() == 1 && lhs.terms[0].coefficient == 1.0;
                if !single {
                    return self.error(DiagnosticCode::UnexpectedToken, "expected a comparison operator");
                }
                let atom = lhs.terms.into_iter().next().map(|t| t.atom)?;
                self.logical(Some(Literal { atom, negated: false })).map(RuleBody::Logical)
            }
            Some(_) => self.error(DiagnosticCode::UnexpectedToken, "expected the start of a rule"),
            None => self.error(DiagnosticCode::UnexpectedEnd, "expected a rule"),
        }
    }

    fn logical(&mut self, first: Option<Literal>) -> PResult<LogicalRule> {
        let mut items = Vec::new();
        match first {
            Some(l) => items.push(BodyItem::Literal(l)),
            None => items.push(self.body_item()?),
        }
        let mut separator: Option<Tok> = None;
        while let Some(t @ (Tok::Amp | Tok::Pipe)) = self.peek() {
            let tok = t.clone();
            if separator.as_ref().is_some_and(|s| *s != tok) {
                return self
                    .error(DiagnosticCode::UnexpectedToken, "cannot mix `&` and `|` on one side of a rule");
            }
            self.bump();
            separator = Some(tok);
            items.push(self.body_item()?);
        }

        if self.eat(&Tok::Arrow) {
            if separator == Some(Tok::Pipe) {
                return self
                    .error(DiagnosticCode::UnexpectedToken, "the body of a rule is a conjunction; use `&`");
            }
            let mut head = alloc::vec![self.literal()?];
            while self.eat(&Tok::Pipe) {
                head.push(self.literal()?);
            }
            return Some(LogicalRule { body: items, head });
        }

        if separator == Some(Tok::Amp) {
            return self.error(DiagnosticCode::UnexpectedToken, "expected `->` after a conjunction");
        }
        let mut head = Vec::new();
        for item in items {
            match item {
                BodyItem::Literal(l) => head.push(l),
                BodyItem::Builtin(_) => {
                    return self.error(
                        DiagnosticCode::UnexpectedToken,
                        "comparisons are only allowed in rule bodies",
                    )
                }
            }
        }
        Some(LogicalRule { body: Vec::new(), head })
    }

    fn body_item(&mut self) -> PResult<BodyItem> {
        if matches!(self.peek(), Some(Tok::Ident(_) | Tok::Quoted(_)))
            && matches!(self.peek_at(1), Some(Tok::Ne | Tok::EqEq))
        {
            let lhs = self.plain_term()?;
            let op = match self.bump() {
                Some(Tok::Ne) => BuiltinOp::Ne,
                _ => BuiltinOp::Eq,
            };
            let rhs = self.plain_term()?;
            return Some(BodyItem::Builtin(Builtin { lhs, op, rhs }));
        }
        self.literal().map(BodyItem::Literal)
    }

    fn literal(&mut self) -> PResult<Literal> {
        let negated = matches!(self.peek(), Some(Tok::Tilde | Tok::Bang));
        if negated {
            self.bump();
        }
        let atom = self.atom()?;
        Some(Literal { atom, negated })
    }

    fn plain_term(&mut self) -> PResult<Term> {
        match self.peek().cloned() {
            Some(Tok::Quoted(c)) => {
                self.bump();
                self.constant(c)
            }
            Some(Tok::Ident(v)) => {
                self.bump();
                self.variable(v, false)
            }
            _ => self.error(DiagnosticCode::UnexpectedToken, "expected a variable or constant"),
        }
    }

    fn constant(&mut self, text: String) -> PResult<Term> {
        if text.is_empty() {
            self.pos -= 1;
            return self.error(DiagnosticCode::InvalidTerm, "constants must not be empty");
        }
        Some(Term::Constant(text))
    }

    fn variable(&mut self, name: String, summation: bool) -> PResult<Term> {
        if !is_variable_name(&name) {
            self.pos -= 1;
            return self.error(
                DiagnosticCode::InvalidTerm,
                format!("`{name}` is not a valid variable (variables start with an uppercase letter; quote constants)"),
            );
        }
        Some(if summation { Term::Summation(name) } else { Term::Variable(name) })
    }

    fn atom(&mut self) -> PResult<AtomTemplate> {
        let predicate = match self.peek() {
            Some(Tok::Ident(p)) => p.clone(),
            _ => return self.error(DiagnosticCode::UnexpectedToken, "expected an atom"),
        };
        if !predicate.starts_with(|c: char| c.is_uppercase()) {
            return self.error(DiagnosticCode::InvalidTerm, "predicate names start with an uppercase letter");
        }
        self.bump();
        self.expect(&Tok::LParen)?;
        let mut args = Vec::new();
        loop {
            let term = match self.peek().cloned() {
                Some(Tok::Plus) => {
                    self.bump();
                    match self.peek().cloned() {
                        Some(Tok::Ident(v)) => {
                            self.bump();
                            self.variable(v, true)?
                        }
                        _ => {
                            return self
                                .error(DiagnosticCode::UnexpectedToken, "expected a variable after `+`")
                        }
                    }
                }
                _ => self.plain_term()?,
            };
            args.push(term);
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.expect(&Tok::RParen)?;
        Some(AtomTemplate { predicate, args })
    }

    fn expr(&mut self) -> PResult<LinearExpr> {
        let mut expr = LinearExpr::default();
        let mut sign = 1.0;
        if self.eat(&Tok::Minus) {
            sign = -1.0;
        } else {
            self.eat(&Tok::Plus);
        }
        loop {
            match self.peek().cloned() {
                Some(Tok::Number(n)) => {
                    self.bump();
                    if self.eat(&Tok::Star) {
                        let atom = self.atom()?;
                        expr.terms.push(LinearTerm { coefficient: sign * n, atom });
                    } else {
                        expr.constant += sign * n;
                    }
                }
                Some(Tok::Ident(_)) => {
                    let atom = self.atom()?;
                    expr.terms.push(LinearTerm { coefficient: sign, atom });
                }
                _ => return self.error(DiagnosticCode::UnexpectedToken, "expected a number or an atom"),
            }
            sign = match self.peek() {
                Some(Tok::Plus) => 1.0,
                Some(Tok::Minus) => -1.0,
                _ => break,
            };
            self.bump();
        }
        Some(expr)
    }

    fn filter(&mut self) -> PResult<Filter> {
        self.expect(&Tok::LBrace)?;
        let variable = self.ident()?;
        if !is_variable_name(&variable) {
            self.pos -= 1;
            return self.error(DiagnosticCode::InvalidTerm, "expected a variable name");
        }
        self.expect(&Tok::Colon)?;
        let mut conditions = alloc::vec![self.literal()?];
        while self.eat(&Tok::Amp) {
            conditions.push(self.literal()?);
        }
        self.expect(&Tok::RBrace)?;
        for lit in &conditions {
            if lit.atom.has_summation() {
                return self
                    .error(DiagnosticCode::UnexpectedToken, "filter atoms use plain variables, not `+V`");
            }
        }
        Some(Filter { variable, conditions })
    }
}
