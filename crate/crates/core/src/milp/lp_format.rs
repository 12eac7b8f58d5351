//! CPLEX LP text for [`MilpModel`]: a writer and a parser for the subset it emits.
//!
//! Coefficients and right-hand sides are written as exact integers (rows are
//! stored denominator-free) and bounds as exact decimals. A bound whose
//! decimal expansion does not terminate is written as a one-variable row named
//! `lb.<var>` or `ub.<var>`; the parser folds such rows back into bounds.

use std::collections::HashMap;
use std::fmt::Write as _;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use super::{LinearForm, MilpModel, Objective, Sense, VarId, VarKind};
use crate::rational::{denominator_lcm, parse_rational, to_decimal, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct LpParseError {
    pub line: usize,
    pub message: String,
}

pub fn export_lp(model: &MilpModel) -> String {
    let names: Vec<&str> = model.variables().iter().map(|v| v.name.as_str()).collect();
    let mut out = String::from("\\ exported by pwlmip\n");

    let (sense, coefficients) = match &model.objective {
        Some(obj) => (obj.sense, exportable_objective(&obj.coefficients)),
        None => (Sense::Minimize, LinearForm::new()),
    };
    out.push_str(match sense {
        Sense::Maximize => "Maximize\n",
        Sense::Minimize => "Minimize\n",
    });
    out.push_str(" obj: ");
    out.push_str(&expression(&coefficients, &names));
    out.push('\n');

    out.push_str("Subject To\n");
    for (i, row) in model.rows().iter().enumerate() {
        let lhs = expression(row.coefficients(), &names);
        let _ = writeln!(out, " r{i}: {lhs} <= {}", row.rhs());
    }
    let mut rational_bounds = Vec::new();
    for (j, var) in model.variables().iter().enumerate() {
        for (bound, prefix, sign) in [(&var.lower, "lb", -1), (&var.upper, "ub", 1)] {
            if let Some(b) = bound {
                if to_decimal(b).is_none() {
                    // sign·x ≤ sign·b, scaled to integers
                    let denom = Rational::from_integer(b.denom().clone());
                    let coef = Rational::from_integer(sign.into()) * &denom;
                    let rhs = Rational::from_integer(sign.into()) * b * &denom;
                    let form: LinearForm = [(VarId(j), coef)].into_iter().collect();
                    rational_bounds.push(format!(
                        " {prefix}.{}: {} <= {}",
                        var.name,
                        expression(&form, &names),
                        rhs
                    ));
                }
            }
        }
    }
    for line in rational_bounds {
        out.push_str(&line);
        out.push('\n');
    }

    out.push_str("Bounds\n");
    for var in model.variables() {
        let lower = var.lower.as_ref().and_then(to_decimal);
        let upper = var.upper.as_ref().and_then(to_decimal);
        let line = match (lower, upper) {
            (Some(l), Some(u)) => format!(" {l} <= {} <= {u}", var.name),
            (Some(l), None) => format!(" {} >= {l}", var.name),
            (None, Some(u)) => format!(" -inf <= {} <= {u}", var.name),
            (None, None) => format!(" {} free", var.name),
        };
        out.push_str(&line);
        out.push('\n');
    }

    let integers: Vec<&str> = model
        .variables()
        .iter()
        .filter(|v| v.kind == VarKind::Integer)
        .map(|v| v.name.as_str())
        .collect();
    if !integers.is_empty() {
        out.push_str("General\n");
        for chunk in integers.chunks(8) {
            out.push(' ');
            out.push_str(&chunk.join(" "));
            out.push('\n');
        }
    }
    out.push_str("End\n");
    out
}

/// Objective coefficients that are not terminating decimals are scaled to integers.
fn exportable_objective(coefficients: &LinearForm) -> LinearForm {
    if coefficients.values().all(|c| to_decimal(c).is_some()) {
        return coefficients.clone();
    }
    let scale = Rational::from_integer(denominator_lcm(coefficients.values()));
    coefficients.iter().map(|(v, c)| (*v, c * &scale)).collect()
}

fn expression(form: &LinearForm, names: &[&str]) -> String {
    let mut text = String::new();
    for (var, coef) in form {
        let magnitude = coef.abs();
        let sign = if coef.is_negative() { "-" } else { "+" };
        if text.is_empty() {
            if coef.is_negative() {
                text.push_str("- ");
            }
        } else {
            let _ = write!(text, " {sign} ");
        }
        if !magnitude.is_one() {
            let digits = to_decimal(&magnitude).expect("exported coefficients terminate");
            text.push_str(&digits);
            text.push(' ');
        }
        text.push_str(names[var.index()]);
    }
    if text.is_empty() {
        return "0".into();
    }
    text
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(Rational),
    Name(String),
    Plus,
    Minus,
    Colon,
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Objective(Sense),
    Constraints,
    Bounds,
    General,
    Binary,
    End,
}

fn section_header(line: &str) -> Option<Section> {
    let lower = line.trim().to_ascii_lowercase();
    let words: Vec<&str> = lower.split_whitespace().collect();
    Some(match words.as_slice() {
        ["maximize" | "maximise" | "maximum" | "max"] => Section::Objective(Sense::Maximize),
        ["minimize" | "minimise" | "minimum" | "min"] => Section::Objective(Sense::Minimize),
        ["subject", "to"] | ["such", "that"] | ["st"] | ["s.t."] => Section::Constraints,
        ["bounds" | "bound"] => Section::Bounds,
        ["general" | "generals" | "gen"] => Section::General,
        ["binary" | "binaries" | "bin"] => Section::Binary,
        ["end"] => Section::End,
        _ => return None,
    })
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || "!\"#$%&()/,.;?@_`'{}|~".contains(c)
}

fn tokenize(line: &str, line_no: usize, out: &mut Vec<(Token, usize)>) -> Result<(), LpParseError> {
    let line = line.split('\\').next().unwrap_or("");
    let chars: Vec<char> = line.chars().collect();
    let mut i = 0;
    let err = |message: String| LpParseError {
        line: line_no,
        message,
    };
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let starts_number = c.is_ascii_digit()
            || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()));
        if starts_number {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            let value = parse_rational(&text).map_err(|e| err(e.to_string()))?;
            out.push((Token::Number(value), line_no));
            continue;
        }
        if is_name_char(c) {
            let start = i;
            while i < chars.len() && (is_name_char(chars[i]) || chars[i] == '[' || chars[i] == ']')
            {
                i += 1;
            }
            out.push((Token::Name(chars[start..i].iter().collect()), line_no));
            continue;
        }
        let next = chars.get(i + 1).copied();
        let (token, width) = match (c, next) {
            ('+', _) => (Token::Plus, 1),
            ('-', _) => (Token::Minus, 1),
            (':', _) => (Token::Colon, 1),
            ('<', Some('=')) | ('=', Some('<')) => (Token::Le, 2),
            ('>', Some('=')) | ('=', Some('>')) => (Token::Ge, 2),
            ('<', _) => (Token::Le, 1),
            ('>', _) => (Token::Ge, 1),
            ('=', _) => (Token::Eq, 1),
            _ => return Err(err(format!("unexpected character {c:?}"))),
        };
        out.push((token, line_no));
        i += width;
    }
    Ok(())
}

struct Cursor<'a> {
    tokens: &'a [(Token, usize)],
    pos: usize,
    last_line: usize,
}

impl<'a> Cursor<'a> {
    fn new(tokens: &'a [(Token, usize)], last_line: usize) -> Self {
        Self {
            tokens,
            pos: 0,
            last_line,
        }
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn peek_at(&self, offset: usize) -> Option<&Token> {
        self.tokens.get(self.pos + offset).map(|(t, _)| t)
    }

    fn line(&self) -> usize {
        self.tokens
            .get(self.pos)
            .or_else(|| self.tokens.last())
            .map_or(self.last_line, |(_, l)| *l)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.peek().cloned();
        self.pos += 1;
        t
    }

    fn error(&self, message: impl Into<String>) -> LpParseError {
        LpParseError {
            line: self.line(),
            message: message.into(),
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    /// Optional `label:` prefix.
    fn label(&mut self) -> Option<String> {
        if let (Some(Token::Name(n)), Some(Token::Colon)) = (self.peek(), self.peek_at(1)) {
            let n = n.clone();
            self.pos += 2;
            return Some(n);
        }
        None
    }

    fn signed_number(&mut self) -> Result<Rational, LpParseError> {
        let mut negative = false;
        loop {
            match self.next() {
                Some(Token::Plus) => {}
                Some(Token::Minus) => negative = !negative,
                Some(Token::Number(v)) => return Ok(if negative { -v } else { v }),
                Some(Token::Name(n)) if is_infinity(&n) => {
                    return Err(self.error("infinite right-hand side"));
                }
                _ => return Err(self.error("expected a number")),
            }
        }
    }
}

fn is_infinity(name: &str) -> bool {
    matches!(name.to_ascii_lowercase().as_str(), "inf" | "infinity")
}

#[derive(Default)]
struct Builder {
    index: HashMap<String, usize>,
    names: Vec<String>,
}

impl Builder {
    fn var(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), self.names.len() - 1);
        self.names.len() - 1
    }
}

/// Linear expression up to a relational operator or the end of input.
/// Returns the terms (by builder index) and the constant part.
fn parse_expression(
    cursor: &mut Cursor,
    builder: &mut Builder,
) -> Result<(Vec<(usize, Rational)>, Rational), LpParseError> {
    let mut terms = Vec::new();
    let mut constant = Rational::zero();
    loop {
        let mut sign = Rational::one();
        let mut saw_sign = false;
        while let Some(t @ (Token::Plus | Token::Minus)) = cursor.peek() {
            if *t == Token::Minus {
                sign = -sign;
            }
            saw_sign = true;
            cursor.pos += 1;
        }
        match cursor.peek().cloned() {
            Some(Token::Number(v)) => {
                cursor.pos += 1;
                if let Some(Token::Name(n)) = cursor.peek().cloned() {
                    if !(matches!(cursor.peek_at(1), Some(Token::Colon))) {
                        cursor.pos += 1;
                        terms.push((builder.var(&n), sign * v));
                        continue;
                    }
                }
                constant += sign * v;
            }
            Some(Token::Name(n)) if !matches!(cursor.peek_at(1), Some(Token::Colon)) => {
                cursor.pos += 1;
                terms.push((builder.var(&n), sign));
            }
            _ if saw_sign => return Err(cursor.error("dangling sign")),
            _ => return Ok((terms, constant)),
        }
    }
}

struct ParsedRow {
    name: Option<String>,
    terms: Vec<(usize, Rational)>,
    op: Token,
    rhs: Rational,
}

pub fn parse_lp(text: &str) -> Result<MilpModel, LpParseError> {
    let mut sections: Vec<(Section, Vec<(Token, usize)>, usize)> = Vec::new();
    for (index, line) in text.lines().enumerate() {
        let line_no = index + 1;
        if let Some(section) = section_header(line) {
            sections.push((section, Vec::new(), line_no));
            continue;
        }
        let Some((_, tokens, _)) = sections.last_mut() else {
            let code = line.split('\\').next().unwrap_or("");
            if code.trim().is_empty() {
                continue;
            }
            return Err(LpParseError {
                line: line_no,
                message: "content before the objective section".into(),
            });
        };
        tokenize(line, line_no, tokens)?;
    }

    let mut builder = Builder::default();
    let mut objective: Option<(Sense, Vec<(usize, Rational)>)> = None;
    let mut rows: Vec<ParsedRow> = Vec::new();
    let mut bounds: HashMap<usize, (Option<Rational>, Option<Rational>)> = HashMap::new();
    let mut bound_order: Vec<usize> = Vec::new();
    let mut integers: Vec<(usize, bool)> = Vec::new();
    let mut ended = false;

    for (section, tokens, header_line) in &sections {
        if ended {
            if !tokens.is_empty() {
                return Err(LpParseError {
                    line: tokens[0].1,
                    message: "content after End".into(),
                });
            }
            continue;
        }
        let mut cursor = Cursor::new(tokens, *header_line);
        match section {
            Section::Objective(sense) => {
                if objective.is_some() {
                    return Err(cursor.error("second objective section"));
                }
                cursor.label();
                let (terms, _) = parse_expression(&mut cursor, &mut builder)?;
                if !cursor.at_end() {
                    return Err(cursor.error("unexpected token in objective"));
                }
                objective = Some((*sense, terms));
            }
            Section::Constraints => {
                while !cursor.at_end() {
                    let name = cursor.label();
                    let (terms, constant) = parse_expression(&mut cursor, &mut builder)?;
                    let op = match cursor.next() {
                        Some(op @ (Token::Le | Token::Ge | Token::Eq)) => op,
                        _ => return Err(cursor.error("expected <=, >= or =")),
                    };
                    let rhs = cursor.signed_number()? - constant;
                    rows.push(ParsedRow {
                        name,
                        terms,
                        op,
                        rhs,
                    });
                }
            }
            Section::Bounds => {
                while !cursor.at_end() {
                    parse_bound(&mut cursor, &mut builder, &mut bounds, &mut bound_order)?;
                }
            }
            Section::General | Section::Binary => {
                while let Some(token) = cursor.next() {
                    match token {
                        Token::Name(n) => {
                            integers.push((builder.var(&n), *section == Section::Binary))
                        }
                        _ => {
                            cursor.pos -= 1;
                            return Err(cursor.error("expected a variable name"));
                        }
                    }
                }
            }
            Section::End => {
                if !tokens.is_empty() {
                    return Err(cursor.error("content after End"));
                }
                ended = true;
            }
        }
    }
    if objective.is_none() {
        return Err(LpParseError {
            line: 1,
            message: "missing objective section".into(),
        });
    }

    // Fold one-variable `lb.`/`ub.` rows back into bounds.
    let mut kept_rows = Vec::new();
    for row in rows {
        let folded = match (&row.name, row.terms.as_slice(), &row.op) {
            (Some(name), [(var, coef)], Token::Le) => {
                let target = &builder.names[*var];
                if name == &format!("lb.{target}") && coef.is_negative() {
                    bounds.entry(*var).or_insert((None, None)).0 = Some(&row.rhs / coef);
                    true
                } else if name == &format!("ub.{target}") && coef.is_positive() {
                    bounds.entry(*var).or_insert((None, None)).1 = Some(&row.rhs / coef);
                    true
                } else {
                    false
                }
            }
            _ => false,
        };
        if !folded {
            kept_rows.push(row);
        }
    }

    // Variables take the order of the Bounds section, then first appearance.
    let mut order = bound_order.clone();
    let mut seen: Vec<bool> = vec![false; builder.names.len()];
    for &i in &order {
        seen[i] = true;
    }
    for (i, flag) in seen.iter().enumerate() {
        if !flag {
            order.push(i);
        }
    }
    let mut model = MilpModel::new();
    let mut id_of = vec![VarId(0); builder.names.len()];
    for &i in &order {
        let binary = integers.iter().any(|&(v, b)| v == i && b);
        let integer = integers.iter().any(|&(v, _)| v == i);
        let (lower, upper) = match bounds.get(&i) {
            Some(b) => b.clone(),
            None if binary => (Some(Rational::zero()), Some(Rational::one())),
            None => (Some(Rational::zero()), None),
        };
        let kind = if integer {
            VarKind::Integer
        } else {
            VarKind::Continuous
        };
        id_of[i] = model.add_variable(builder.names[i].clone(), kind, lower, upper);
    }
    for row in kept_rows {
        let terms: Vec<(VarId, Rational)> =
            row.terms.into_iter().map(|(i, c)| (id_of[i], c)).collect();
        match row.op {
            Token::Le => model.add_row(terms, row.rhs),
            Token::Ge => model.add_ge_row(terms, row.rhs),
            _ => {
                model.add_row(terms.clone(), row.rhs.clone());
                model.add_ge_row(terms, row.rhs);
            }
        }
    }
    let (sense, terms) = objective.expect("checked above");
    if !terms.is_empty() {
        let mut coefficients = LinearForm::new();
        for (i, c) in terms {
            *coefficients.entry(id_of[i]).or_insert_with(Rational::zero) += c;
        }
        coefficients.retain(|_, c| !c.is_zero());
        model.objective = Some(Objective {
            sense,
            coefficients,
        });
    }
    Ok(model)
}

fn bound_value(cursor: &mut Cursor) -> Result<Option<Rational>, LpParseError> {
    let mut negative = false;
    while let Some(t @ (Token::Plus | Token::Minus)) = cursor.peek() {
        if *t == Token::Minus {
            negative = !negative;
        }
        cursor.pos += 1;
    }
    match cursor.next() {
        Some(Token::Number(v)) => Ok(Some(if negative { -v } else { v })),
        Some(Token::Name(n)) if is_infinity(&n) => Ok(None),
        _ => Err(cursor.error("expected a bound value")),
    }
}

fn parse_bound(
    cursor: &mut Cursor,
    builder: &mut Builder,
    bounds: &mut HashMap<usize, (Option<Rational>, Option<Rational>)>,
    order: &mut Vec<usize>,
) -> Result<(), LpParseError> {
    let mut record = |builder: &mut Builder, name: &str| {
        let i = builder.var(name);
        if !order.contains(&i) {
            order.push(i);
        }
        i
    };
    let starts_with_name = matches!(cursor.peek(), Some(Token::Name(n)) if !is_infinity(n));
    if starts_with_name {
        let Some(Token::Name(name)) = cursor.next() else {
            unreachable!()
        };
        let i = record(builder, &name);
        let entry = bounds.entry(i).or_insert((Some(Rational::zero()), None));
        match cursor.next() {
            Some(Token::Name(f)) if f.eq_ignore_ascii_case("free") => *entry = (None, None),
            Some(Token::Le) => entry.1 = bound_value(cursor)?,
            Some(Token::Ge) => entry.0 = bound_value(cursor)?,
            Some(Token::Eq) => {
                let v = bound_value(cursor)?;
                *entry = (v.clone(), v);
            }
            _ => return Err(cursor.error("expected free, <=, >= or = after a bound variable")),
        }
        return Ok(());
    }
    let lower = bound_value(cursor)?;
    let op = cursor.next();
    let Some(Token::Name(name)) = cursor.next() else {
        return Err(cursor.error("expected a variable name in bound"));
    };
    let i = record(builder, &name);
    let entry = bounds.entry(i).or_insert((Some(Rational::zero()), None));
    match op {
        Some(Token::Le) => entry.0 = lower,
        Some(Token::Ge) => entry.1 = lower,
        _ => return Err(cursor.error("expected <= or >= in bound")),
    }
    if let Some(Token::Le | Token::Ge) = cursor.peek() {
        let op = cursor.next();
        let value = bound_value(cursor)?;
        match op {
            Some(Token::Le) => entry.1 = value,
            _ => entry.0 = value,
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn sample() -> MilpModel {
        let mut m = MilpModel::new();
        let x = m.add_variable("x", VarKind::Integer, Some(int(0)), Some(int(10)));
        let y = m.add_variable("y", VarKind::Continuous, Some(ratio(-1, 3)), None);
        let z = m.add_variable("_z.0", VarKind::Continuous, None, Some(ratio(5, 4)));
        let w = m.add_variable("w", VarKind::Continuous, None, None);
        m.add_row([(x, int(1))], int(3));
        m.add_row([(x, int(-2)), (y, ratio(3, 2)), (z, int(1))], ratio(-7, 2));
        m.add_ge_row([(w, int(1)), (y, int(-1))], int(-4));
        m.add_row(std::iter::empty(), int(5));
        m.objective = Some(Objective {
            sense: Sense::Maximize,
            coefficients: [(x, int(3)), (w, ratio(-1, 4))].into_iter().collect(),
        });
        m
    }

    #[test]
    fn writes_rows_and_general_section() {
        let mut m = MilpModel::new();
        let x = m.add_variable("x", VarKind::Integer, Some(int(0)), Some(int(10)));
        m.add_row([(x, int(1))], int(3));
        let text = export_lp(&m);
        assert!(text.contains("Subject To"));
        assert!(text.contains("x <= 3"));
        let general = text.split("General").nth(1).unwrap();
        assert!(general
            .lines()
            .any(|l| l.split_whitespace().any(|w| w == "x")));
    }

    #[test]
    fn round_trip_is_exact() {
        let m = sample();
        let text = export_lp(&m);
        assert_eq!(parse_lp(&text).unwrap(), m, "{text}");
    }

    #[test]
    fn missing_objective_round_trips() {
        let mut m = sample();
        m.objective = None;
        let text = export_lp(&m);
        assert!(text.contains("obj: 0"));
        assert_eq!(parse_lp(&text).unwrap(), m);
    }

    #[test]
    fn accepts_handwritten_variants() {
        let text = "\\ comment\nmax\n 2x + 3 y\nst\n c1: x + y <= 4\n c2: x - y >= -1.5\n x = 2\nbounds\n x <= 5\n -inf <= y <= +inf\nbin\n b\nend\n";
        let m = parse_lp(text).unwrap();
        assert_eq!(m.num_vars(), 3);
        assert_eq!(m.rows().len(), 4);
        assert_eq!(m.variable(VarId(2)).upper, Some(int(1)));
        assert_eq!(m.variable(VarId(1)).lower, None);
    }

    #[test]
    fn reports_line_of_error() {
        let text = "Minimize\n obj: x\nSubject To\n c: x <= \nEnd\n";
        let err = parse_lp(text).unwrap_err();
        assert_eq!(err.line, 4);
        let text = "Minimize\n obj: x\nSubject To\n c: x ? 3\nEnd\n";
        assert_eq!(parse_lp(text).unwrap_err().line, 4);
    }
}
