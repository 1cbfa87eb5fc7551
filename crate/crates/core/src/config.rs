//! Flat `key = value` problem files.
//!
//! ```text
//! # K ≡ -1, g(s) = s^-1/2, f(s) = s^1/2
//! domain.kind = interval
//! domain.n = 255
//! K.family = constant
//! K.value = -1
//! g.family = power
//! g.alpha = 0.5
//! f.p = 0.5
//! a = 1
//! lambda = 1
//! epsilon = 0
//! ```
//!
//! Keys are case-sensitive, `#` starts a comment, unknown or repeated keys
//! are errors. Domains are the unit interval or the unit square.

use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{DomainKind, Grid};
use crate::model::{make_problem, Potential, ProblemSpec, ReactionTerm, SingularTerm};

const KEYS: [&str; 10] = [
    "domain.kind",
    "domain.n",
    "K.family",
    "K.value",
    "g.family",
    "g.alpha",
    "f.p",
    "a",
    "lambda",
    "epsilon",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SingularFamily {
    Power,
    ShiftedExp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemConfig {
    pub kind: DomainKind,
    /// Interior nodes per axis.
    pub n: usize,
    pub k_value: f64,
    pub g_family: SingularFamily,
    pub g_alpha: Option<f64>,
    pub f_p: f64,
    pub a: f64,
    pub lambda: f64,
    pub epsilon: f64,
}

fn number(key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::Config(format!("{key}: expected a number, got '{v}'")))
}

impl ProblemConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut vals: Vec<Option<String>> = vec![None; KEYS.len()];
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", lineno + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            let slot = KEYS
                .iter()
                .position(|key| *key == k)
                .ok_or_else(|| Error::Config(format!("line {}: unknown key '{k}'", lineno + 1)))?;
            if vals[slot].is_some() {
                return Err(Error::Config(format!("line {}: key '{k}' given twice", lineno + 1)));
            }
            vals[slot] = Some(v.to_string());
        }
        let get = |key: &str| -> Option<&str> {
            let i = KEYS.iter().position(|k| *k == key).expect("known key");
            vals[i].as_deref()
        };
        let need = |key: &str| get(key).ok_or_else(|| Error::Config(format!("missing key '{key}'")));

        let kind = match need("domain.kind")? {
            "interval" => DomainKind::Interval,
            "rectangle" => DomainKind::Rectangle,
            other => return Err(Error::Config(format!("domain.kind: unknown domain '{other}'"))),
        };
        let n = need("domain.n")?
            .parse::<usize>()
            .map_err(|_| Error::Config("domain.n: expected a positive integer".into()))?;
        match get("K.family").unwrap_or("constant") {
            "constant" => {}
            other => return Err(Error::Config(format!("K.family: unknown family '{other}'"))),
        }
        let k_value = number("K.value", need("K.value")?)?;
        let g_family = match need("g.family")? {
            "power" => SingularFamily::Power,
            "shifted-exp" => SingularFamily::ShiftedExp,
            other => return Err(Error::Config(format!("g.family: unknown family '{other}'"))),
        };
        let g_alpha = get("g.alpha").map(|v| number("g.alpha", v)).transpose()?;
        if g_family == SingularFamily::Power && g_alpha.is_none() {
            return Err(Error::Config("g.family = power needs g.alpha".into()));
        }
        let f_p = number("f.p", need("f.p")?)?;
        let a = get("a").map(|v| number("a", v)).transpose()?.unwrap_or(1.0);
        let lambda = get("lambda").map(|v| number("lambda", v)).transpose()?.unwrap_or(1.0);
        let epsilon = get("epsilon").map(|v| number("epsilon", v)).transpose()?.unwrap_or(0.0);
        Ok(Self {
            kind,
            n,
            k_value,
            g_family,
            g_alpha,
            f_p,
            a,
            lambda,
            epsilon,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn grid(&self) -> Result<Grid> {
        match self.kind {
            DomainKind::Interval => Grid::interval(1.0, self.n),
            DomainKind::Rectangle => Grid::rectangle(1.0, 1.0, self.n, self.n),
        }
    }

    pub fn singular(&self) -> Result<SingularTerm> {
        match self.g_family {
            SingularFamily::Power => SingularTerm::power(self.g_alpha.expect("checked at parse")),
            SingularFamily::ShiftedExp => Ok(SingularTerm::ShiftedExp),
        }
    }

    pub fn to_spec(&self) -> Result<ProblemSpec> {
        make_problem(
            self.grid()?,
            Potential::Constant(self.k_value),
            self.singular()?,
            ReactionTerm::power(self.f_p)?,
            self.a,
            self.lambda,
            self.epsilon,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const T1: &str = "domain.kind = interval\ndomain.n = 31 # nodes\nK.family = constant\nK.value = -1\n\
g.family = power\ng.alpha = 0.5\nf.p = 0.5\na = 1\nlambda = 2\n";

    #[test]
    fn parses_and_builds() {
        let c = ProblemConfig::parse(T1).unwrap();
        assert_eq!(c.n, 31);
        assert_eq!(c.lambda, 2.0);
        assert_eq!(c.epsilon, 0.0);
        let s = c.to_spec().unwrap();
        assert_eq!(s.grid().len(), 31);
        assert_eq!(s.k_min(), -1.0);
    }

    #[test]
    fn rejects_unknown_and_case() {
        let bad = format!("{T1}Lambda = 3\n");
        assert!(matches!(ProblemConfig::parse(&bad), Err(Error::Config(_))));
        let dup = format!("{T1}a = 2\n");
        assert!(matches!(ProblemConfig::parse(&dup), Err(Error::Config(_))));
        let nokey = T1.replace("g.alpha = 0.5\n", "");
        assert!(matches!(ProblemConfig::parse(&nokey), Err(Error::Config(_))));
        let badnum = T1.replace("f.p = 0.5", "f.p = half");
        assert!(matches!(ProblemConfig::parse(&badnum), Err(Error::Config(_))));
    }

    #[test]
    fn zero_potential_is_unsupported() {
        let c = ProblemConfig::parse(&T1.replace("K.value = -1", "K.value = 0")).unwrap();
        assert!(matches!(c.to_spec(), Err(Error::UnsupportedRegime(_))));
    }
}
