//! Parsing of `name(arg, ...)` preset strings.

use std::fmt;

use stefan_core::expr::{Expr, Var};

/// A preset string split into its name and top-level arguments.
#[derive(Debug, Clone, PartialEq)]
pub struct Call {
    pub name: String,
    pub args: Vec<String>,
}

impl Call {
    pub fn parse(src: &str) -> Result<Self, String> {
        let s = src.trim();
        let Some(open) = s.find('(') else {
            if s.is_empty() || !s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(format!("malformed preset `{src}`"));
            }
            return Ok(Self { name: s.to_string(), args: Vec::new() });
        };
        if !s.ends_with(')') {
            return Err(format!("malformed preset `{src}`: missing closing parenthesis"));
        }
        let name = s[..open].trim().to_string();
        let inner = &s[open + 1..s.len() - 1];
        let mut args = Vec::new();
        let mut depth = 0i32;
        let mut cur = String::new();
        for c in inner.chars() {
            match c {
                '(' => depth += 1,
                ')' => depth -= 1,
                ',' if depth == 0 => {
                    args.push(cur.trim().to_string());
                    cur.clear();
                    continue;
                }
                _ => {}
            }
            if depth < 0 {
                return Err(format!("malformed preset `{src}`: unbalanced parentheses"));
            }
            cur.push(c);
        }
        if depth != 0 {
            return Err(format!("malformed preset `{src}`: unbalanced parentheses"));
        }
        if !cur.trim().is_empty() || !args.is_empty() {
            args.push(cur.trim().to_string());
        }
        Ok(Self { name, args })
    }

    fn arity(&self, n: usize) -> Result<(), String> {
        if self.args.len() != n {
            return Err(format!("`{}` takes {n} argument(s), got {}", self.name, self.args.len()));
        }
        Ok(())
    }

    fn num(&self, i: usize) -> Result<f64, String> {
        let a = &self.args[i];
        a.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("argument {} of `{}` is not a finite number: `{a}`", i + 1, self.name))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelPreset {
    Heat,
    Stefan { varrho: f64 },
    Burgers,
    /// `μ± = f(y)` with `f` an expression in `y`.
    Reaction { f: String },
    /// Expressions from `[model.custom]`.
    Custom,
    NoisyStefan { varrho: f64, s: f64 },
    GlobalExistence { s: f64 },
    SuperlinearFront { varrho: f64, s: f64 },
    SigmaViolation { level: f64 },
}

impl ModelPreset {
    /// `ϱ` for presets with the Stefan front law.
    pub fn stefan_varrho(&self) -> Option<f64> {
        match self {
            Self::Stefan { varrho } | Self::NoisyStefan { varrho, .. } => Some(*varrho),
            _ => None,
        }
    }
}

impl TryFrom<String> for ModelPreset {
    type Error = String;

    fn try_from(src: String) -> Result<Self, String> {
        let c = Call::parse(&src)?;
        let p = match c.name.as_str() {
            "heat" => c.arity(0).map(|_| Self::Heat)?,
            "burgers" => c.arity(0).map(|_| Self::Burgers)?,
            "custom" => c.arity(0).map(|_| Self::Custom)?,
            "stefan" => {
                c.arity(1)?;
                Self::Stefan { varrho: c.num(0)? }
            }
            "reaction" => {
                c.arity(1)?;
                Expr::parse_with(&c.args[0], &[Var::Y]).map_err(|e| e.to_string())?;
                Self::Reaction { f: c.args[0].clone() }
            }
            "noisy_stefan" => {
                c.arity(2)?;
                Self::NoisyStefan { varrho: c.num(0)?, s: c.num(1)? }
            }
            "global_existence" => {
                c.arity(1)?;
                Self::GlobalExistence { s: c.num(0)? }
            }
            "superlinear_front" => {
                c.arity(2)?;
                Self::SuperlinearFront { varrho: c.num(0)?, s: c.num(1)? }
            }
            "sigma_violation" => {
                c.arity(1)?;
                Self::SigmaViolation { level: c.num(0)? }
            }
            other => {
                return Err(format!(
                    "unknown model preset `{other}` (expected heat, stefan(varrho), burgers, reaction(f), custom, \
                     noisy_stefan(varrho, s), global_existence(s), superlinear_front(varrho, s), sigma_violation(level))"
                ))
            }
        };
        Ok(p)
    }
}

impl fmt::Display for ModelPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Heat => write!(f, "heat"),
            Self::Stefan { varrho } => write!(f, "stefan({varrho})"),
            Self::Burgers => write!(f, "burgers"),
            Self::Reaction { f: e } => write!(f, "reaction({e})"),
            Self::Custom => write!(f, "custom"),
            Self::NoisyStefan { varrho, s } => write!(f, "noisy_stefan({varrho}, {s})"),
            Self::GlobalExistence { s } => write!(f, "global_existence({s})"),
            Self::SuperlinearFront { varrho, s } => write!(f, "superlinear_front({varrho}, {s})"),
            Self::SigmaViolation { level } => write!(f, "sigma_violation({level})"),
        }
    }
}

impl From<ModelPreset> for String {
    fn from(p: ModelPreset) -> Self {
        p.to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelPreset {
    Zero,
    Gaussian { width: f64 },
    Indicator { a: f64, b: f64 },
}

impl TryFrom<String> for KernelPreset {
    type Error = String;

    fn try_from(src: String) -> Result<Self, String> {
        let c = Call::parse(&src)?;
        match c.name.as_str() {
            "zero" => c.arity(0).map(|_| Self::Zero),
            "gaussian" => {
                c.arity(1)?;
                Ok(Self::Gaussian { width: c.num(0)? })
            }
            "indicator" => {
                c.arity(2)?;
                Ok(Self::Indicator { a: c.num(0)?, b: c.num(1)? })
            }
            other => Err(format!("unknown kernel preset `{other}` (expected zero, gaussian(width), indicator(a, b))")),
        }
    }
}

impl fmt::Display for KernelPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "zero"),
            Self::Gaussian { width } => write!(f, "gaussian({width})"),
            Self::Indicator { a, b } => write!(f, "indicator({a}, {b})"),
        }
    }
}

impl From<KernelPreset> for String {
    fn from(p: KernelPreset) -> Self {
        p.to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialPreset {
    Zero,
    /// `u1 = −a·x·e^{−x²}`, `u2 = b·x·e^{−x²}`.
    Bump { a: f64, b: f64 },
    /// Similarity solution of amplitude `A` started at time `t0`.
    StefanSimilarity { amplitude: f64, t0: f64 },
}

impl TryFrom<String> for InitialPreset {
    type Error = String;

    fn try_from(src: String) -> Result<Self, String> {
        let c = Call::parse(&src)?;
        match c.name.as_str() {
            "zero" => c.arity(0).map(|_| Self::Zero),
            "bump" => {
                c.arity(2)?;
                Ok(Self::Bump { a: c.num(0)?, b: c.num(1)? })
            }
            "stefan_similarity" => {
                c.arity(2)?;
                Ok(Self::StefanSimilarity { amplitude: c.num(0)?, t0: c.num(1)? })
            }
            other => Err(format!(
                "unknown initial preset `{other}` (expected zero, bump(a, b), stefan_similarity(amplitude, t0))"
            )),
        }
    }
}

impl fmt::Display for InitialPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "zero"),
            Self::Bump { a, b } => write!(f, "bump({a}, {b})"),
            Self::StefanSimilarity { amplitude, t0 } => write!(f, "stefan_similarity({amplitude}, {t0})"),
        }
    }
}

impl From<InitialPreset> for String {
    fn from(p: InitialPreset) -> Self {
        p.to_string()
    }
}
