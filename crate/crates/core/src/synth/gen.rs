//! Generator specs and seeded sampling.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Number, Value};

pub const PRINTABLE: &str = " !\"#$%&'()*+,-./0123456789:;<=>?@ABCDEFGHIJKLMNOPQRSTUVWXYZ[\\]^_`abcdefghijklmnopqrstuvwxyz{|}~";
pub const LOWER: &str = "abcdefghijklmnopqrstuvwxyz";
/// Map keys come from a tiny alphabet so that generated maps share keys.
pub const KEY_ALPHABET: &str = "abc";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GenSpec {
    Integer { min: i64, max: i64 },
    /// Finite floats with `|v| <= bound`.
    Float { bound: f64 },
    Text { alphabet: String, max_len: usize },
    Boolean,
    List { of: Box<GenSpec>, max_size: usize },
    Map { key: Box<GenSpec>, value: Box<GenSpec>, max_size: usize },
    /// JSON-like trees: leaves drawn from `leaves`, containers are lists or
    /// maps of at most `max_size` children, at most `max_leaves` leaves.
    Recursive {
        leaves: Vec<GenSpec>,
        key: Box<GenSpec>,
        max_size: usize,
        max_leaves: usize,
    },
    Nullable { of: Box<GenSpec> },
}

impl GenSpec {
    pub fn int(min: i64, max: i64) -> Self {
        GenSpec::Integer { min, max }
    }
    pub fn text(alphabet: &str, max_len: usize) -> Self {
        GenSpec::Text {
            alphabet: alphabet.into(),
            max_len,
        }
    }
    pub fn list(of: GenSpec, max_size: usize) -> Self {
        GenSpec::List { of: Box::new(of), max_size }
    }
    pub fn map(value: GenSpec, max_size: usize) -> Self {
        GenSpec::Map {
            key: Box::new(GenSpec::text(KEY_ALPHABET, 2)),
            value: Box::new(value),
            max_size,
        }
    }
    pub fn nullable(of: GenSpec) -> Self {
        GenSpec::Nullable { of: Box::new(of) }
    }
    /// Untyped JSON-like values.
    pub fn json_like(profile_int: (i64, i64)) -> Self {
        GenSpec::Recursive {
            leaves: vec![
                GenSpec::int(profile_int.0, profile_int.1),
                GenSpec::Float { bound: 1000.0 },
                GenSpec::text(LOWER, 5),
                GenSpec::Boolean,
            ],
            key: Box::new(GenSpec::text(KEY_ALPHABET, 2)),
            max_size: 5,
            max_leaves: 5,
        }
    }

    /// Largest integer magnitude bounds reachable from this spec.
    pub fn int_bounds(&self) -> Option<(i64, i64)> {
        let merge = |a: Option<(i64, i64)>, b: Option<(i64, i64)>| match (a, b) {
            (Some(x), Some(y)) => Some((x.0.min(y.0), x.1.max(y.1))),
            (x, None) | (None, x) => x,
        };
        match self {
            GenSpec::Integer { min, max } => Some((*min, *max)),
            GenSpec::List { of, .. } | GenSpec::Nullable { of } => of.int_bounds(),
            GenSpec::Map { key, value, .. } => merge(key.int_bounds(), value.int_bounds()),
            GenSpec::Recursive { leaves, .. } => leaves.iter().fold(None, |acc, l| merge(acc, l.int_bounds())),
            _ => None,
        }
    }

    /// Boundary values tried before random draws.
    pub fn edges(&self) -> Vec<Value> {
        let mut out: Vec<Value> = match self {
            GenSpec::Integer { min, max } => [*min, *max, 0, 1, -1]
                .into_iter()
                .filter(|v| (*min..=*max).contains(v))
                .map(Value::from)
                .collect(),
            GenSpec::Float { bound } => [0.0, 1.0, -1.0, 0.5, *bound]
                .into_iter()
                .filter(|v| v.abs() <= *bound)
                .filter_map(Number::from_f64)
                .map(Value::Number)
                .collect(),
            GenSpec::Text { alphabet, .. } => {
                let chars: Vec<char> = alphabet.chars().filter(|c| *c != ' ').collect();
                let mut v = vec![json!("")];
                if let Some(&c0) = chars.iter().find(|c| c.is_ascii_alphanumeric()).or(chars.first()) {
                    v.push(json!(c0.to_string()));
                    if alphabet.contains(' ') {
                        v.push(json!(format!("{c0} {c0}")));
                    }
                    if let Some(&c1) = chars.iter().find(|c| **c != c0 && c.is_ascii_alphanumeric()) {
                        v.push(json!(format!("{c0}{c1}")));
                    }
                }
                v
            }
            GenSpec::Boolean => vec![json!(false), json!(true)],
            GenSpec::List { of, .. } => {
                let mut v = vec![json!([])];
                if let Some(e) = of.edges().into_iter().nth(1).or_else(|| of.edges().into_iter().next()) {
                    v.push(json!([e]));
                }
                v
            }
            GenSpec::Map { key, value, .. } => {
                let mut v = vec![json!({})];
                let k = key.edges().into_iter().find_map(|k| k.as_str().filter(|s| !s.is_empty()).map(str::to_string));
                if let (Some(k), Some(e)) = (k, value.edges().into_iter().next()) {
                    let mut m = Map::new();
                    m.insert(k, e);
                    v.push(Value::Object(m));
                }
                v
            }
            GenSpec::Recursive { leaves, .. } => {
                let mut v = vec![json!({}), json!([])];
                v.extend(leaves.first().map(|l| l.edges()).unwrap_or_default().into_iter().take(1));
                v
            }
            GenSpec::Nullable { of } => {
                let mut v = vec![Value::Null];
                v.extend(of.edges());
                v
            }
        };
        let mut seen = Vec::new();
        out.retain(|x| {
            if seen.contains(x) || !self.admits(x) {
                false
            } else {
                seen.push(x.clone());
                true
            }
        });
        out
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Value {
        match self {
            GenSpec::Integer { min, max } => {
                let v = if rng.random_bool(0.3) {
                    let lo = (*min).max(-10);
                    let hi = (*max).min(10);
                    if lo <= hi {
                        rng.random_range(lo..=hi)
                    } else {
                        rng.random_range(*min..=*max)
                    }
                } else {
                    rng.random_range(*min..=*max)
                };
                Value::from(v)
            }
            GenSpec::Float { bound } => {
                let b = bound.abs();
                let v: f64 = match rng.random_range(0..3) {
                    0 => (rng.random_range(-10i32..=10) as f64).clamp(-b, b),
                    1 => (rng.random_range(-b..=b) * 100.0).round() / 100.0,
                    _ => rng.random_range(-b..=b),
                };
                Number::from_f64(v).map(Value::Number).unwrap_or(Value::from(0))
            }
            GenSpec::Text { alphabet, max_len } => Value::String(sample_text(rng, alphabet, *max_len)),
            GenSpec::Boolean => Value::Bool(rng.random_bool(0.5)),
            GenSpec::List { of, max_size } => {
                let n = sample_size(rng, *max_size);
                Value::Array((0..n).map(|_| of.sample(rng)).collect())
            }
            GenSpec::Map { key, value, max_size } => {
                let n = sample_size(rng, *max_size);
                let mut m = Map::new();
                for _ in 0..n {
                    if let Value::String(k) = key.sample(rng) {
                        let v = value.sample(rng);
                        m.insert(k, v);
                    }
                }
                Value::Object(m)
            }
            GenSpec::Recursive {
                leaves,
                key,
                max_size,
                max_leaves,
            } => {
                let mut budget = *max_leaves;
                sample_tree(rng, leaves, key, *max_size, &mut budget, 0)
            }
            GenSpec::Nullable { of } => {
                if rng.random_bool(0.2) {
                    Value::Null
                } else {
                    of.sample(rng)
                }
            }
        }
    }

    /// Whether `v` could have been produced by this spec.
    pub fn admits(&self, v: &Value) -> bool {
        match (self, v) {
            (GenSpec::Integer { min, max }, Value::Number(n)) => n.as_i64().is_some_and(|x| (*min..=*max).contains(&x)),
            (GenSpec::Float { bound }, Value::Number(n)) => n.as_f64().is_some_and(|x| x.is_finite() && x.abs() <= *bound),
            (GenSpec::Text { alphabet, max_len }, Value::String(s)) => {
                s.chars().count() <= *max_len && s.chars().all(|c| alphabet.contains(c))
            }
            (GenSpec::Boolean, Value::Bool(_)) => true,
            (GenSpec::List { of, max_size }, Value::Array(a)) => a.len() <= *max_size && a.iter().all(|x| of.admits(x)),
            (GenSpec::Map { key, value, max_size }, Value::Object(m)) => {
                m.len() <= *max_size && m.iter().all(|(k, x)| key.admits(&Value::String(k.clone())) && value.admits(x))
            }
            (GenSpec::Recursive { leaves, key, max_size, max_leaves }, v) => {
                fn walk(v: &Value, leaves: &[GenSpec], key: &GenSpec, max_size: usize, count: &mut usize) -> bool {
                    match v {
                        Value::Array(a) => a.len() <= max_size && a.iter().all(|x| walk(x, leaves, key, max_size, count)),
                        Value::Object(m) => {
                            m.len() <= max_size
                                && m.iter().all(|(k, x)| key.admits(&Value::String(k.clone())) && walk(x, leaves, key, max_size, count))
                        }
                        leaf => {
                            *count += 1;
                            leaves.iter().any(|l| l.admits(leaf))
                        }
                    }
                }
                let mut count = 0;
                walk(v, leaves, key, *max_size, &mut count) && count <= *max_leaves
            }
            (GenSpec::Nullable { .. }, Value::Null) => true,
            (GenSpec::Nullable { of }, v) => of.admits(v),
            _ => false,
        }
    }
}

fn sample_size(rng: &mut ChaCha8Rng, max: usize) -> usize {
    if rng.random_bool(0.5) {
        rng.random_range(0..=max.min(3))
    } else {
        rng.random_range(0..=max)
    }
}

fn sample_text(rng: &mut ChaCha8Rng, alphabet: &str, max_len: usize) -> String {
    let chars: Vec<char> = alphabet.chars().collect();
    if chars.is_empty() {
        return String::new();
    }
    // Half the draws use a small sub-alphabet so repeats and equal
    // substrings are common.
    let pool: Vec<char> = if chars.len() > 4 && rng.random_bool(0.5) {
        let mut p: Vec<char> = (0..rng.random_range(1..=3))
            .map(|_| {
                let alnum: Vec<char> = chars.iter().copied().filter(|c| c.is_ascii_alphanumeric()).collect();
                let from = if alnum.is_empty() { &chars } else { &alnum };
                from[rng.random_range(0..from.len())]
            })
            .collect();
        if chars.contains(&' ') {
            p.push(' ');
        }
        p
    } else {
        chars
    };
    let len = if rng.random_bool(0.5) {
        rng.random_range(0..=max_len.min(8))
    } else {
        rng.random_range(0..=max_len)
    };
    (0..len).map(|_| pool[rng.random_range(0..pool.len())]).collect()
}

fn sample_tree(rng: &mut ChaCha8Rng, leaves: &[GenSpec], key: &GenSpec, max_size: usize, budget: &mut usize, depth: usize) -> Value {
    if *budget <= 1 || depth >= 3 || rng.random_bool(0.35) {
        *budget = budget.saturating_sub(1);
        return leaves[rng.random_range(0..leaves.len())].sample(rng);
    }
    let n = rng.random_range(0..=max_size);
    if rng.random_bool(0.5) {
        let mut items = Vec::new();
        for _ in 0..n {
            if *budget == 0 {
                break;
            }
            items.push(sample_tree(rng, leaves, key, max_size, budget, depth + 1));
        }
        Value::Array(items)
    } else {
        let mut m = Map::new();
        for _ in 0..n {
            if *budget == 0 {
                break;
            }
            if let Value::String(k) = key.sample(rng) {
                let v = sample_tree(rng, leaves, key, max_size, budget, depth + 1);
                m.insert(k, v);
            }
        }
        Value::Object(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn samples_are_admitted() {
        let specs = [
            GenSpec::int(1, 5),
            GenSpec::Float { bound: 10.0 },
            GenSpec::text(PRINTABLE, 100),
            GenSpec::list(GenSpec::int(-3, 3), 4),
            GenSpec::map(GenSpec::Boolean, 3),
            GenSpec::json_like((-100, 100)),
            GenSpec::nullable(GenSpec::text(LOWER, 3)),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for s in &specs {
            for _ in 0..500 {
                let v = s.sample(&mut rng);
                assert!(s.admits(&v), "{s:?} produced {v}");
            }
            for e in s.edges() {
                assert!(s.admits(&e), "{s:?} edge {e}");
            }
        }
    }
}
