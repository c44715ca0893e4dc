//! Python literal parsing for docstring examples (`Input: a = 1, b = [2]`
//! lines and doctest calls). Only JSON-representable literals are accepted;
//! tuples become arrays.

use serde_json::{Map, Number, Value};

struct Cursor<'a> {
    s: &'a [u8],
    i: usize,
}

impl<'a> Cursor<'a> {
    fn ws(&mut self) {
        while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
            self.i += 1;
        }
    }
    fn peek(&mut self) -> Option<u8> {
        self.ws();
        self.s.get(self.i).copied()
    }
    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.i += 1;
            true
        } else {
            false
        }
    }
    fn ident(&mut self) -> Option<&'a str> {
        self.ws();
        let start = self.i;
        while self.i < self.s.len() && (self.s[self.i].is_ascii_alphanumeric() || self.s[self.i] == b'_') {
            self.i += 1;
        }
        if start == self.i || self.s[start].is_ascii_digit() {
            self.i = start;
            return None;
        }
        std::str::from_utf8(&self.s[start..self.i]).ok()
    }

    fn value(&mut self) -> Option<Value> {
        match self.peek()? {
            b'[' | b'(' => {
                let close = if self.s[self.i] == b'[' { b']' } else { b')' };
                self.i += 1;
                let mut items = Vec::new();
                while !self.eat(close) {
                    items.push(self.value()?);
                    if !self.eat(b',') {
                        if !self.eat(close) {
                            return None;
                        }
                        break;
                    }
                }
                Some(Value::Array(items))
            }
            b'{' => {
                self.i += 1;
                let mut map = Map::new();
                while !self.eat(b'}') {
                    let Value::String(k) = self.value()? else { return None };
                    if !self.eat(b':') {
                        return None;
                    }
                    let v = self.value()?;
                    map.insert(k, v);
                    if !self.eat(b',') {
                        if !self.eat(b'}') {
                            return None;
                        }
                        break;
                    }
                }
                Some(Value::Object(map))
            }
            b'"' | b'\'' => self.string(),
            b'-' | b'+' | b'0'..=b'9' | b'.' => self.number(),
            _ => match self.ident()? {
                "True" => Some(Value::Bool(true)),
                "False" => Some(Value::Bool(false)),
                "None" => Some(Value::Null),
                _ => None,
            },
        }
    }

    fn string(&mut self) -> Option<Value> {
        let q = self.s[self.i];
        self.i += 1;
        let mut out = Vec::new();
        while self.i < self.s.len() {
            let c = self.s[self.i];
            self.i += 1;
            if c == q {
                return String::from_utf8(out).ok().map(Value::String);
            }
            if c != b'\\' {
                out.push(c);
                continue;
            }
            let e = *self.s.get(self.i)?;
            self.i += 1;
            match e {
                b'n' => out.push(b'\n'),
                b't' => out.push(b'\t'),
                b'r' => out.push(b'\r'),
                b'0' => out.push(0),
                b'u' => {
                    let hex = std::str::from_utf8(self.s.get(self.i..self.i + 4)?).ok()?;
                    let ch = char::from_u32(u32::from_str_radix(hex, 16).ok()?)?;
                    self.i += 4;
                    out.extend_from_slice(ch.to_string().as_bytes());
                }
                other => out.push(other),
            }
        }
        None
    }

    fn number(&mut self) -> Option<Value> {
        let start = self.i;
        if matches!(self.s[self.i], b'-' | b'+') {
            self.i += 1;
        }
        while self.i < self.s.len() && matches!(self.s[self.i], b'0'..=b'9' | b'.' | b'e' | b'E' | b'_' | b'-' | b'+') {
            if matches!(self.s[self.i], b'-' | b'+') && !matches!(self.s[self.i - 1], b'e' | b'E') {
                break;
            }
            self.i += 1;
        }
        let text: String = std::str::from_utf8(&self.s[start..self.i]).ok()?.replace('_', "");
        if let Ok(n) = text.parse::<i64>() {
            return Some(Value::Number(n.into()));
        }
        text.parse::<f64>().ok().and_then(Number::from_f64).map(Value::Number)
    }
}

/// Parses one complete literal.
pub fn parse_literal(text: &str) -> Option<Value> {
    let mut c = Cursor { s: text.as_bytes(), i: 0 };
    let v = c.value()?;
    (c.peek().is_none()).then_some(v)
}

/// Parses `name = literal, name = literal`.
pub fn parse_assignments(text: &str) -> Option<Map<String, Value>> {
    let mut c = Cursor { s: text.as_bytes(), i: 0 };
    let mut out = Map::new();
    loop {
        let name = c.ident()?;
        if !c.eat(b'=') {
            return None;
        }
        out.insert(name.to_string(), c.value()?);
        if !c.eat(b',') {
            break;
        }
        if c.peek().is_none() {
            break;
        }
    }
    c.peek().is_none().then_some(out)
}

/// Parses `fname(arg, ..., kw=arg)` and maps positional arguments onto
/// `params` in order.
pub fn parse_call(text: &str, fname: &str, params: &[String]) -> Option<Map<String, Value>> {
    let mut c = Cursor { s: text.as_bytes(), i: 0 };
    if c.ident()? != fname || !c.eat(b'(') {
        return None;
    }
    let mut out = Map::new();
    let mut pos = 0;
    while !c.eat(b')') {
        let save = c.i;
        let kw = c.ident().filter(|_| c.peek() == Some(b'=') && c.s.get(c.i + 1) != Some(&b'='));
        match kw {
            Some(k) => {
                c.eat(b'=');
                out.insert(k.to_string(), c.value()?);
            }
            None => {
                c.i = save;
                let v = c.value()?;
                out.insert(params.get(pos)?.clone(), v);
                pos += 1;
            }
        }
        if !c.eat(b',') {
            if !c.eat(b')') {
                return None;
            }
            break;
        }
    }
    c.peek().is_none().then_some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn literals() {
        assert_eq!(parse_literal("{'a': [1, 2.5, -3], \"b\": (True, None)}"), Some(json!({"a": [1, 2.5, -3], "b": [true, null]})));
        assert_eq!(parse_literal("'it\\'s'"), Some(json!("it's")));
        assert_eq!(parse_literal("1e3"), Some(json!(1000.0)));
        assert_eq!(parse_literal("{1: 2}"), None);
        assert_eq!(parse_literal("foo"), None);
    }

    #[test]
    fn assignments_and_calls() {
        assert_eq!(
            parse_assignments("base = {\"a\": {\"b\": 1}}, update = {\"a\": {\"c\": 2}}"),
            Some(json!({"base": {"a": {"b": 1}}, "update": {"a": {"c": 2}}}).as_object().unwrap().clone())
        );
        let params = vec!["text".to_string(), "n".to_string()];
        assert_eq!(
            parse_call("f('a b', n=2)", "f", &params),
            Some(json!({"text": "a b", "n": 2}).as_object().unwrap().clone())
        );
        assert_eq!(parse_call("g(1)", "f", &params), None);
    }
}
