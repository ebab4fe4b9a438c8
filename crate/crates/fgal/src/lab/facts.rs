use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

/// Where an expected value comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FactOrigin {
    /// A property asserted by the construction itself.
    Claim,
    /// A value recomputed independently (closed form, brute force, eigen-solve).
    Check,
}

impl fmt::Display for FactOrigin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FactOrigin::Claim => write!(f, "[claim]"),
            FactOrigin::Check => write!(f, "[check]"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fact {
    pub id: String,
    pub origin: FactOrigin,
    pub expected: String,
    pub observed: String,
    pub pass: bool,
}

impl Fact {
    pub fn new(
        id: impl Into<String>,
        origin: FactOrigin,
        expected: impl Into<String>,
        observed: impl Into<String>,
        pass: bool,
    ) -> Self {
        Fact { id: id.into(), origin, expected: expected.into(), observed: observed.into(), pass }
    }

    /// `|observed - expected| <= tol * max(1, |expected|)`.
    pub fn close(id: &str, origin: FactOrigin, expected: f64, observed: f64, tol: f64) -> Self {
        let pass = (observed - expected).abs() <= tol * expected.abs().max(1.0);
        Fact::new(id, origin, format!("{expected:.12e}"), format!("{observed:.12e}"), pass)
    }

    /// `observed <= bound`.
    pub fn at_most(id: &str, origin: FactOrigin, bound: f64, observed: f64) -> Self {
        Fact::new(id, origin, format!("<= {bound:.6e}"), format!("{observed:.6e}"), observed <= bound)
    }

    /// `observed >= bound`.
    pub fn at_least(id: &str, origin: FactOrigin, bound: f64, observed: f64) -> Self {
        Fact::new(id, origin, format!(">= {bound:.6e}"), format!("{observed:.6e}"), observed >= bound)
    }
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "FACT {} {} expected={} observed={} {}",
            self.id,
            self.origin,
            self.expected,
            self.observed,
            if self.pass { "PASS" } else { "FAIL" }
        )
    }
}

/// `--key value` parameters of a fixture.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Params(BTreeMap<String, String>);

impl Params {
    pub fn new() -> Self {
        Params::default()
    }

    pub fn set(mut self, key: &str, value: impl ToString) -> Self {
        self.0.insert(key.to_string(), value.to_string());
        self
    }

    pub fn insert(&mut self, key: &str, value: &str) {
        self.0.insert(key.to_string(), value.to_string());
    }

    pub fn keys(&self) -> impl Iterator<Item = &String> {
        self.0.keys()
    }

    pub fn f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.0.get(key) {
            None => Ok(default),
            Some(s) => s
                .parse()
                .map_err(|_| Error::Parse(format!("parameter --{key}: '{s}' is not a number"))),
        }
    }

    pub fn usize(&self, key: &str, default: usize) -> Result<usize> {
        match self.0.get(key) {
            None => Ok(default),
            Some(s) => s.parse().map_err(|_| {
                Error::Parse(format!("parameter --{key}: '{s}' is not a nonnegative integer"))
            }),
        }
    }

    pub fn str<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.0.get(key).map(String::as_str).unwrap_or(default)
    }

    /// Comma-separated list of numbers.
    pub fn list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.0.get(key) {
            None => Ok(default.to_vec()),
            Some(s) => s
                .split(',')
                .map(|x| {
                    x.trim().parse().map_err(|_| {
                        Error::Parse(format!("parameter --{key}: '{x}' is not a number"))
                    })
                })
                .collect(),
        }
    }

    /// Rejects keys outside `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        for k in self.0.keys() {
            if !allowed.contains(&k.as_str()) {
                return Err(Error::Parse(format!(
                    "unknown parameter --{k} (expected one of: {})",
                    allowed.join(", ")
                )));
            }
        }
        Ok(())
    }
}
