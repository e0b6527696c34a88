//! Argument-tuple literals and the canonical value serializer.
//!
//! Test inputs for function-call problems are argument tuples in a small
//! Python-ish literal grammar. They are parsed here once, then re-rendered
//! per target language, so one payload drives every runner.
//!
//! The canonical output format (shared by all language wrappers and by
//! [`ArgValue::canonical`], which acts as the cross-language reference):
//!   - `null` for missing values, `true`/`false` for booleans
//!   - integers in plain decimal
//!   - floats: `<int>.0` for integral values below 1e16, otherwise the
//!     shortest `%g` rendering that round-trips; `nan`, `inf`, `-inf`
//!   - strings raw at top level, double-quoted with escapes when nested
//!   - sequences as `[a, b]`, maps as `{k: v}` sorted by serialized key

use std::fmt::Write as _;

use super::SandboxError;

#[derive(Debug, Clone, PartialEq)]
pub enum ArgValue {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    List(Vec<ArgValue>),
    Tuple(Vec<ArgValue>),
    Map(Vec<(ArgValue, ArgValue)>),
}

impl ArgValue {
    /// Canonical text, exactly what a correct wrapper prints for this value.
    pub fn canonical(&self) -> String {
        self.render(false)
    }

    fn render(&self, nested: bool) -> String {
        match self {
            ArgValue::Null => "null".to_string(),
            ArgValue::Bool(b) => b.to_string(),
            ArgValue::Int(i) => i.to_string(),
            ArgValue::Float(f) => canonical_float(*f),
            ArgValue::Str(s) => {
                if nested {
                    quote(s)
                } else {
                    s.clone()
                }
            }
            ArgValue::List(items) | ArgValue::Tuple(items) => {
                let parts: Vec<String> = items.iter().map(|v| v.render(true)).collect();
                format!("[{}]", parts.join(", "))
            }
            ArgValue::Map(pairs) => {
                let mut parts: Vec<(String, String)> = pairs
                    .iter()
                    .map(|(k, v)| (k.render(true), v.render(true)))
                    .collect();
                parts.sort();
                let body: Vec<String> =
                    parts.into_iter().map(|(k, v)| format!("{k}: {v}")).collect();
                format!("{{{}}}", body.join(", "))
            }
        }
    }

    /// Source-literal form that re-parses to the same value: tuples keep
    /// parentheses, strings are always quoted. Used as the canonical payload
    /// text for deduplication and persistence.
    pub fn literal(&self) -> String {
        match self {
            ArgValue::Null => "None".to_string(),
            ArgValue::Bool(true) => "True".to_string(),
            ArgValue::Bool(false) => "False".to_string(),
            ArgValue::Int(i) => i.to_string(),
            ArgValue::Float(f) => canonical_float(*f),
            ArgValue::Str(s) => quote(s),
            ArgValue::List(items) => {
                let parts: Vec<String> = items.iter().map(ArgValue::literal).collect();
                format!("[{}]", parts.join(", "))
            }
            ArgValue::Tuple(items) => {
                let parts: Vec<String> = items.iter().map(ArgValue::literal).collect();
                if parts.len() == 1 {
                    format!("({},)", parts[0])
                } else {
                    format!("({})", parts.join(", "))
                }
            }
            ArgValue::Map(pairs) => {
                let parts: Vec<String> = pairs
                    .iter()
                    .map(|(k, v)| format!("{}: {}", k.literal(), v.literal()))
                    .collect();
                format!("{{{}}}", parts.join(", "))
            }
        }
    }
}

pub fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            _ => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Canonical float text. Matches the `%g` shortest-round-trip loop in the
/// language wrappers digit for digit.
pub fn canonical_float(v: f64) -> String {
    if v.is_nan() {
        return "nan".to_string();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if v.trunc() == v && v.abs() < 1e16 {
        return format!("{}.0", v.trunc() as i64);
    }
    for precision in 1..=17 {
        let text = format_g(v, precision);
        if text.parse::<f64>() == Ok(v) {
            return text;
        }
    }
    format_g(v, 17)
}

/// printf `%.*g`: round to `p` significant digits, fixed notation when the
/// decimal exponent is in [-4, p), scientific otherwise, trailing zeros
/// stripped, exponent at least two digits.
fn format_g(v: f64, p: usize) -> String {
    let sci = format!("{:.*e}", p - 1, v);
    let (mantissa, exp_text) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp_text.parse().expect("numeric exponent");
    let neg = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let digits = digits.trim_end_matches('0');
    let digits = if digits.is_empty() { "0" } else { digits };

    let mut out = String::new();
    if neg {
        out.push('-');
    }
    if exp >= -4 && exp < p as i32 {
        if exp >= 0 {
            let point = (exp as usize) + 1;
            if digits.len() <= point {
                out.push_str(digits);
                for _ in digits.len()..point {
                    out.push('0');
                }
            } else {
                out.push_str(&digits[..point]);
                out.push('.');
                out.push_str(&digits[point..]);
            }
        } else {
            out.push_str("0.");
            for _ in 0..(-exp - 1) {
                out.push('0');
            }
            out.push_str(digits);
        }
    } else {
        out.push_str(&digits[..1]);
        if digits.len() > 1 {
            out.push('.');
            out.push_str(&digits[1..]);
        }
        let _ = write!(out, "e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs());
    }
    out
}

/// Parses an argument tuple payload such as `(2, 3)` or `([3,1,2],)`.
/// The outer parentheses always denote the argument list, so `(2)` is a
/// single argument rather than a parenthesized expression.
pub fn parse_argument_tuple(payload: &str) -> Result<Vec<ArgValue>, SandboxError> {
    let mut parser = Parser::new(payload);
    parser.skip_ws();
    if !parser.eat('(') {
        return Err(parser.fail("expected `(` opening the argument tuple"));
    }
    let args = parser.comma_separated(')')?;
    parser.skip_ws();
    if !parser.at_end() {
        return Err(parser.fail("trailing characters after argument tuple"));
    }
    Ok(args)
}

/// Parses a single literal value.
pub fn parse_value(text: &str) -> Result<ArgValue, SandboxError> {
    let mut parser = Parser::new(text);
    parser.skip_ws();
    let value = parser.value()?;
    parser.skip_ws();
    if !parser.at_end() {
        return Err(parser.fail("trailing characters after value"));
    }
    Ok(value)
}

struct Parser<'a> {
    text: &'a str,
    chars: Vec<char>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Parser {
            text,
            chars: text.chars().collect(),
            pos: 0,
        }
    }

    fn fail(&self, reason: &str) -> SandboxError {
        SandboxError::InputParseFailure {
            payload: self.text.to_string(),
            reason: format!("{reason} at offset {}", self.pos),
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek();
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    fn eat(&mut self, expected: char) -> bool {
        if self.peek() == Some(expected) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.chars.len()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn comma_separated(&mut self, close: char) -> Result<Vec<ArgValue>, SandboxError> {
        let mut items = Vec::new();
        loop {
            self.skip_ws();
            if self.eat(close) {
                return Ok(items);
            }
            items.push(self.value()?);
            self.skip_ws();
            if self.eat(',') {
                continue;
            }
            if self.eat(close) {
                return Ok(items);
            }
            return Err(self.fail(&format!("expected `,` or `{close}`")));
        }
    }

    fn value(&mut self) -> Result<ArgValue, SandboxError> {
        self.skip_ws();
        match self.peek() {
            None => Err(self.fail("unexpected end of input")),
            Some('(') => {
                self.pos += 1;
                Ok(ArgValue::Tuple(self.comma_separated(')')?))
            }
            Some('[') => {
                self.pos += 1;
                Ok(ArgValue::List(self.comma_separated(']')?))
            }
            Some('{') => {
                self.pos += 1;
                self.map_body()
            }
            Some('"') | Some('\'') => self.string(),
            Some(c) if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' => self.number(),
            Some(c) if c.is_alphabetic() => self.word(),
            Some(c) => Err(self.fail(&format!("unexpected character `{c}`"))),
        }
    }

    fn map_body(&mut self) -> Result<ArgValue, SandboxError> {
        let mut pairs = Vec::new();
        loop {
            self.skip_ws();
            if self.eat('}') {
                return Ok(ArgValue::Map(pairs));
            }
            let key = self.value()?;
            self.skip_ws();
            if !self.eat(':') {
                return Err(self.fail("expected `:` in map entry"));
            }
            let value = self.value()?;
            pairs.push((key, value));
            self.skip_ws();
            if self.eat(',') {
                continue;
            }
            if self.eat('}') {
                return Ok(ArgValue::Map(pairs));
            }
            return Err(self.fail("expected `,` or `}`"));
        }
    }

    fn string(&mut self) -> Result<ArgValue, SandboxError> {
        let delim = self.bump().expect("checked by caller");
        let mut out = String::new();
        loop {
            match self.bump() {
                None => return Err(self.fail("unterminated string")),
                Some(c) if c == delim => return Ok(ArgValue::Str(out)),
                Some('\\') => match self.bump() {
                    Some('n') => out.push('\n'),
                    Some('t') => out.push('\t'),
                    Some('r') => out.push('\r'),
                    Some('0') => out.push('\0'),
                    Some('\\') => out.push('\\'),
                    Some('\'') => out.push('\''),
                    Some('"') => out.push('"'),
                    Some(other) => return Err(self.fail(&format!("unknown escape `\\{other}`"))),
                    None => return Err(self.fail("unterminated escape")),
                },
                Some(c) => out.push(c),
            }
        }
    }

    fn number(&mut self) -> Result<ArgValue, SandboxError> {
        let start = self.pos;
        if matches!(self.peek(), Some('+') | Some('-')) {
            self.pos += 1;
        }
        let mut is_float = false;
        while let Some(c) = self.peek() {
            match c {
                '0'..='9' | '_' => self.pos += 1,
                '.' => {
                    is_float = true;
                    self.pos += 1;
                }
                'e' | 'E' => {
                    is_float = true;
                    self.pos += 1;
                    if matches!(self.peek(), Some('+') | Some('-')) {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
        let raw: String = self.chars[start..self.pos]
            .iter()
            .filter(|&&c| c != '_')
            .collect();
        if is_float {
            raw.parse::<f64>()
                .map(ArgValue::Float)
                .map_err(|_| self.fail(&format!("invalid float `{raw}`")))
        } else {
            raw.parse::<i64>()
                .map(ArgValue::Int)
                .map_err(|_| self.fail(&format!("invalid integer `{raw}`")))
        }
    }

    fn word(&mut self) -> Result<ArgValue, SandboxError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_alphanumeric() || c == '_') {
            self.pos += 1;
        }
        let word: String = self.chars[start..self.pos].iter().collect();
        match word.as_str() {
            "None" | "null" | "nil" => Ok(ArgValue::Null),
            "True" | "true" => Ok(ArgValue::Bool(true)),
            "False" | "false" => Ok(ArgValue::Bool(false)),
            "nan" | "NaN" => Ok(ArgValue::Float(f64::NAN)),
            "inf" | "Infinity" => Ok(ArgValue::Float(f64::INFINITY)),
            _ => Err(self.fail(&format!("unknown keyword `{word}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_spec_examples() {
        assert_eq!(
            parse_argument_tuple("(2, 3)").unwrap(),
            vec![ArgValue::Int(2), ArgValue::Int(3)]
        );
        assert_eq!(
            parse_argument_tuple("([3,1,2],)").unwrap(),
            vec![ArgValue::List(vec![
                ArgValue::Int(3),
                ArgValue::Int(1),
                ArgValue::Int(2)
            ])]
        );
        assert!(parse_argument_tuple("(,,)").is_err());
    }

    #[test]
    fn parses_mixed_literals() {
        let args = parse_argument_tuple(
            "('hi', -2.5, True, None, {\"a\": 1, \"b\": [1, (2, 3)]})",
        )
        .unwrap();
        assert_eq!(args.len(), 5);
        assert_eq!(args[0], ArgValue::Str("hi".to_string()));
        assert_eq!(args[1], ArgValue::Float(-2.5));
        assert_eq!(args[2], ArgValue::Bool(true));
        assert_eq!(args[3], ArgValue::Null);
    }

    #[test]
    fn rejects_malformed_tuples() {
        for bad in ["", "2, 3", "(2, 3", "(2 3)", "(2, x)", "(2,) rest"] {
            assert!(parse_argument_tuple(bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn empty_and_trailing_comma_tuples() {
        assert_eq!(parse_argument_tuple("()").unwrap(), vec![]);
        assert_eq!(parse_argument_tuple("(1,)").unwrap(), vec![ArgValue::Int(1)]);
        assert_eq!(
            parse_argument_tuple("(1, 2,)").unwrap(),
            vec![ArgValue::Int(1), ArgValue::Int(2)]
        );
    }

    #[test]
    fn canonical_floats_match_shortest_g() {
        // Values cross-checked against python `%.{p}g` formatting.
        assert_eq!(canonical_float(0.1), "0.1");
        assert_eq!(canonical_float(1.0 / 3.0), "0.3333333333333333");
        assert_eq!(canonical_float(2.5), "2.5");
        assert_eq!(canonical_float(2.0), "2.0");
        assert_eq!(canonical_float(-0.75), "-0.75");
        assert_eq!(canonical_float(1e16), "1e+16");
        assert_eq!(canonical_float(1.5e16), "1.5e+16");
        assert_eq!(canonical_float(1e-5), "1e-05");
        assert_eq!(canonical_float(0.0001), "0.0001");
        assert_eq!(canonical_float(123456.789), "123456.789");
        assert_eq!(canonical_float(1e22), "1e+22");
        assert_eq!(canonical_float(1e15), "1000000000000000.0");
        assert_eq!(canonical_float(-0.0), "0.0");
        assert_eq!(canonical_float(f64::NAN), "nan");
        assert_eq!(canonical_float(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn canonical_rendering_rules() {
        let v = parse_value("[1, 'x', 2.0, None, {'b': 2, 'a': 1}]").unwrap();
        assert_eq!(v.canonical(), "[1, \"x\", 2.0, null, {\"a\": 1, \"b\": 2}]");
        // Top-level strings are raw, nested ones quoted.
        assert_eq!(parse_value("'a b'").unwrap().canonical(), "a b");
        assert_eq!(parse_value("('a',)").unwrap().canonical(), "[\"a\"]");
    }

    #[test]
    fn literal_round_trips() {
        for payload in ["(2, 3)", "([3, 1, 2],)", "()", "(\"a\\nb\", None, True)"] {
            let args = parse_argument_tuple(payload).unwrap();
            let rendered = ArgValue::Tuple(args.clone()).literal();
            let reparsed = parse_argument_tuple(&rendered).unwrap();
            assert_eq!(args, reparsed, "via {rendered:?}");
        }
    }
}
