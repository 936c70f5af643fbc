use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Shape of a scalar observable before scaling and shifting.
#[derive(Clone)]
pub enum ObservableKind {
    Identity,
    /// `x^p`, `p > 0`
    Power(f64),
    /// `cos(2π k x)`
    Cos(f64),
    /// `sin(2π k x)`
    Sin(f64),
    /// Indicator of `[a, b)`
    Indicator(f64, f64),
    Constant(f64),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for ObservableKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObservableKind::Identity => write!(f, "Identity"),
            ObservableKind::Power(p) => write!(f, "Power({p})"),
            ObservableKind::Cos(k) => write!(f, "Cos({k})"),
            ObservableKind::Sin(k) => write!(f, "Sin({k})"),
            ObservableKind::Indicator(a, b) => write!(f, "Indicator({a}, {b})"),
            ObservableKind::Constant(c) => write!(f, "Constant({c})"),
            ObservableKind::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// Scalar observable `scale * kind(x) + offset` on `[0, 1]`.
#[derive(Clone, Debug)]
pub struct Observable {
    name: String,
    kind: ObservableKind,
    scale: f64,
    offset: f64,
}

impl Observable {
    pub fn new(name: impl Into<String>, kind: ObservableKind) -> Self {
        Self { name: name.into(), kind, scale: 1.0, offset: 0.0 }
    }

    pub fn custom<F: Fn(f64) -> f64 + Send + Sync + 'static>(name: impl Into<String>, f: F) -> Self {
        Self::new(name, ObservableKind::Custom(Arc::new(f)))
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("const({c})"), ObservableKind::Constant(c))
    }

    /// Parse the compact names used in configuration files:
    /// `x`, `sqrt`, `x^p`, `cos2pi`, `cos2pi(k)`, `sin2pi(k)`,
    /// `indicator(a,b)`, `const(c)`.
    pub fn parse(spec: &str) -> Result<Self> {
        let s: String = spec.chars().filter(|c| !c.is_whitespace()).collect();
        let bad = || Error::InvalidParameter(format!("unknown observable `{spec}`"));
        let args = |inner: &str| -> Result<Vec<f64>> {
            inner.split(',').map(|a| a.parse::<f64>().map_err(|_| bad())).collect()
        };
        let kind = if s == "x" {
            ObservableKind::Identity
        } else if s == "sqrt" {
            ObservableKind::Power(0.5)
        } else if let Some(p) = s.strip_prefix("x^") {
            let p: f64 = p.parse().map_err(|_| bad())?;
            if p <= 0.0 {
                return Err(bad());
            }
            ObservableKind::Power(p)
        } else if s == "cos2pi" {
            ObservableKind::Cos(1.0)
        } else if s == "sin2pi" {
            ObservableKind::Sin(1.0)
        } else if let Some(rest) = s.strip_prefix("cos2pi(").and_then(|r| r.strip_suffix(')')) {
            ObservableKind::Cos(*args(rest)?.first().ok_or_else(bad)?)
        } else if let Some(rest) = s.strip_prefix("sin2pi(").and_then(|r| r.strip_suffix(')')) {
            ObservableKind::Sin(*args(rest)?.first().ok_or_else(bad)?)
        } else if let Some(rest) = s.strip_prefix("indicator(").and_then(|r| r.strip_suffix(')')) {
            match args(rest)?.as_slice() {
                [a, b] if a < b => ObservableKind::Indicator(*a, *b),
                _ => return Err(bad()),
            }
        } else if let Some(rest) = s.strip_prefix("const(").and_then(|r| r.strip_suffix(')')) {
            ObservableKind::Constant(*args(rest)?.first().ok_or_else(bad)?)
        } else {
            return Err(bad());
        };
        Ok(Self::new(s, kind))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &ObservableKind {
        &self.kind
    }

    /// Subtract a constant, typically `∫ φ dμ`.
    pub fn centered(mut self, mean: f64) -> Self {
        self.offset -= mean;
        self
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        self.scale *= factor;
        self.offset *= factor;
        self
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let raw = match &self.kind {
            ObservableKind::Identity => x,
            ObservableKind::Power(p) => {
                if *p == 0.5 {
                    x.sqrt()
                } else {
                    x.powf(*p)
                }
            }
            ObservableKind::Cos(k) => (TAU * k * x).cos(),
            ObservableKind::Sin(k) => (TAU * k * x).sin(),
            ObservableKind::Indicator(a, b) => {
                if x >= *a && x < *b {
                    1.0
                } else {
                    0.0
                }
            }
            ObservableKind::Constant(c) => *c,
            ObservableKind::Custom(f) => f(x),
        };
        self.scale * raw + self.offset
    }

    /// Total variation on `[0, 1]`: closed form for the builtin shapes,
    /// sampled estimate (4096 points) for custom functions.
    pub fn variation(&self) -> f64 {
        let s = self.scale.abs();
        match &self.kind {
            ObservableKind::Identity | ObservableKind::Power(_) => s,
            ObservableKind::Cos(k) | ObservableKind::Sin(k) => {
                // |k| full periods contribute 4 each; a fractional tail is sampled.
                if k.fract() == 0.0 {
                    4.0 * k.abs() * s
                } else {
                    self.sampled_variation(4096)
                }
            }
            ObservableKind::Indicator(a, b) => {
                let edges = [*a > 0.0 && *a < 1.0, *b > 0.0 && *b < 1.0];
                s * edges.iter().filter(|e| **e).count() as f64
            }
            ObservableKind::Constant(_) => 0.0,
            ObservableKind::Custom(_) => self.sampled_variation(4096),
        }
    }

    /// Variation along a uniform sample of `n + 1` points.
    pub fn sampled_variation(&self, n: usize) -> f64 {
        let mut prev = self.eval(0.0);
        let mut var = 0.0;
        for i in 1..=n {
            let v = self.eval(i as f64 / n as f64);
            var += (v - prev).abs();
            prev = v;
        }
        var
    }

    /// Sup norm estimated on a uniform sample of 4097 points.
    pub fn sup_norm(&self) -> f64 {
        (0..=4096).map(|i| self.eval(i as f64 / 4096.0).abs()).fold(0.0, f64::max)
    }

    /// `|φ|_∞ + var φ`.
    pub fn bv_norm(&self) -> f64 {
        self.sup_norm() + self.variation()
    }
}

/// `R^d`-valued observable as a list of scalar components.
#[derive(Clone, Debug)]
pub struct VectorObservable(pub Vec<Observable>);

impl VectorObservable {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn eval_into(&self, x: f64, out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.0) {
            *o = c.eval(x);
        }
    }
}
