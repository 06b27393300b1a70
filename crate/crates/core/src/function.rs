//! Scalar functions of σ ≥ 0: nonlinearities `m`, continuity moduli `ω` and
//! weights `φ`.
//!
//! A [`FunctionSpec`] is a small closed expression language. The leaf kinds
//! cover the closed-form presets; the wrapper kinds (`at_least`,
//! `linear_tail`, `shift`, `strict_dual`, `weak_dual`) express the guards and
//! derived weights used by the preset catalog. Every kind is evaluable on
//! `[0, +∞)`; negative arguments are clamped to zero.

use std::fmt;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Knee of the log-Lipschitz modulus `σ|log σ|`; linear beyond it.
const LOG_LIPSCHITZ_KNEE: f64 = 0.135_335_283_236_612_7; // e^{-2}

/// Relative step of the forward secant used to extend a modulus linearly.
const TAIL_SECANT_STEP: f64 = 1.0e-7;

const DUAL_BISECTION_STEPS: usize = 200;

fn default_scale() -> f64 {
    1.0
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionSpec {
    /// `c`
    Constant { c: f64 },
    /// `a + bσ`
    Affine { a: f64, b: f64 },
    /// `scale · σ^β`
    Power {
        beta: f64,
        #[serde(default = "default_scale")]
        scale: f64,
    },
    /// `(a + bσ)^{-2}`
    Pohozaev { a: f64, b: f64 },
    /// `σ|log σ|` on `[0, e^{-2}]`, tangent line beyond.
    LogLipschitz,
    /// `σ^p |log σ|^q` evaluated at `max(σ, floor)`.
    LogPower {
        p: f64,
        q: f64,
        #[serde(default, skip_serializing_if = "is_zero")]
        floor: f64,
    },
    /// Piecewise-linear interpolation of `(σ_i, y_i)`, constant outside.
    Table { points: Vec<[f64; 2]> },
    /// `max(floor, base(σ))`
    AtLeast { base: Box<FunctionSpec>, floor: f64 },
    /// `base` on `[0, knee]`, continued by its forward secant line.
    LinearTail { base: Box<FunctionSpec>, knee: f64 },
    /// `base(σ) + by`
    Shift { base: Box<FunctionSpec>, by: f64 },
    /// `σ · ω(1/σ)`
    StrictDual { omega: Box<FunctionSpec> },
    /// Inverse of `σ ↦ σ / sqrt(ω(1/σ))`.
    WeakDual { omega: Box<FunctionSpec> },
}

impl FunctionSpec {
    pub fn constant(c: f64) -> Self {
        FunctionSpec::Constant { c }
    }

    pub fn affine(a: f64, b: f64) -> Self {
        FunctionSpec::Affine { a, b }
    }

    pub fn power(beta: f64) -> Self {
        FunctionSpec::Power { beta, scale: 1.0 }
    }

    pub fn pohozaev(a: f64, b: f64) -> Self {
        FunctionSpec::Pohozaev { a, b }
    }

    pub fn log_power(p: f64, q: f64, floor: f64) -> Self {
        FunctionSpec::LogPower { p, q, floor }
    }

    pub fn table(points: Vec<[f64; 2]>) -> Result<Self> {
        let spec = FunctionSpec::Table { points };
        spec.validate()?;
        Ok(spec)
    }

    pub fn at_least(self, floor: f64) -> Self {
        FunctionSpec::AtLeast {
            base: Box::new(self),
            floor,
        }
    }

    pub fn with_linear_tail(self, knee: f64) -> Self {
        FunctionSpec::LinearTail {
            base: Box::new(self),
            knee,
        }
    }

    pub fn shifted(self, by: f64) -> Self {
        FunctionSpec::Shift {
            base: Box::new(self),
            by,
        }
    }

    pub fn strict_dual(omega: FunctionSpec) -> Self {
        FunctionSpec::StrictDual {
            omega: Box::new(omega),
        }
    }

    pub fn weak_dual(omega: FunctionSpec) -> Self {
        FunctionSpec::WeakDual {
            omega: Box::new(omega),
        }
    }

    /// Loads a tabulated function from a headerless or headed two-column CSV
    /// file `(σ, value)` with strictly increasing σ.
    pub fn table_from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())
            .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::table_from_reader(file)
    }

    pub fn table_from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut points = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::Parse(e.to_string()))?;
            if record.len() != 2 {
                return Err(Error::Parse(format!(
                    "table row {}: expected 2 columns, found {}",
                    line + 1,
                    record.len()
                )));
            }
            let parse = |s: &str| s.parse::<f64>();
            match (parse(&record[0]), parse(&record[1])) {
                (Ok(x), Ok(y)) => points.push([x, y]),
                // a non-numeric first row is a header
                _ if line == 0 && points.is_empty() => continue,
                _ => {
                    return Err(Error::Parse(format!(
                        "table row {}: non-numeric entry",
                        line + 1
                    )))
                }
            }
        }
        Self::table(points)
    }

    /// Checks parameters for finiteness and structural consistency.
    pub fn validate(&self) -> Result<()> {
        let finite = |name: &str, x: f64| {
            if x.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidFunction(format!("{name} must be finite")))
            }
        };
        match self {
            FunctionSpec::Constant { c } => finite("c", *c),
            FunctionSpec::Affine { a, b } | FunctionSpec::Pohozaev { a, b } => {
                finite("a", *a)?;
                finite("b", *b)
            }
            FunctionSpec::Power { beta, scale } => {
                finite("beta", *beta)?;
                finite("scale", *scale)
            }
            FunctionSpec::LogLipschitz => Ok(()),
            FunctionSpec::LogPower { p, q, floor } => {
                finite("p", *p)?;
                finite("q", *q)?;
                finite("floor", *floor)
            }
            FunctionSpec::Table { points } => {
                if points.len() < 2 {
                    return Err(Error::InvalidFunction(
                        "table needs at least two points".into(),
                    ));
                }
                for p in points {
                    finite("table entry", p[0])?;
                    finite("table entry", p[1])?;
                }
                if points.windows(2).any(|w| w[1][0] <= w[0][0]) {
                    return Err(Error::InvalidFunction(
                        "table abscissae must be strictly increasing".into(),
                    ));
                }
                Ok(())
            }
            FunctionSpec::AtLeast { base, floor } => {
                finite("floor", *floor)?;
                base.validate()
            }
            FunctionSpec::LinearTail { base, knee } => {
                if !(knee.is_finite() && *knee > 0.0) {
                    return Err(Error::InvalidFunction("knee must be positive".into()));
                }
                base.validate()
            }
            FunctionSpec::Shift { base, by } => {
                finite("by", *by)?;
                base.validate()
            }
            FunctionSpec::StrictDual { omega } | FunctionSpec::WeakDual { omega } => {
                omega.validate()
            }
        }
    }

    /// Evaluates the function at `sigma`, clamping negative arguments to 0.
    pub fn eval(&self, sigma: f64) -> f64 {
        let s = sigma.max(0.0);
        match self {
            FunctionSpec::Constant { c } => *c,
            FunctionSpec::Affine { a, b } => a + b * s,
            FunctionSpec::Power { beta, scale } => scale * s.powf(*beta),
            FunctionSpec::Pohozaev { a, b } => {
                let d = a + b * s;
                1.0 / (d * d)
            }
            FunctionSpec::LogLipschitz => {
                let k = LOG_LIPSCHITZ_KNEE;
                if s == 0.0 {
                    0.0
                } else if s <= k {
                    -s * s.ln()
                } else {
                    // value 2k and slope 1 at the knee
                    2.0 * k + (s - k)
                }
            }
            FunctionSpec::LogPower { p, q, floor } => {
                let x = s.max(*floor);
                if x == 0.0 {
                    return log_power_at_zero(*p, *q);
                }
                let l = x.ln().abs();
                x.powf(*p) * l.powf(*q)
            }
            FunctionSpec::Table { points } => interpolate_table(points, s),
            FunctionSpec::AtLeast { base, floor } => base.eval(s).max(*floor),
            FunctionSpec::LinearTail { base, knee } => {
                if s <= *knee {
                    base.eval(s)
                } else {
                    let at_knee = base.eval(*knee);
                    let h = knee * TAIL_SECANT_STEP;
                    let slope = (base.eval(knee + h) - at_knee) / h;
                    at_knee + slope * (s - knee)
                }
            }
            FunctionSpec::Shift { base, by } => base.eval(s) + by,
            FunctionSpec::StrictDual { omega } => {
                let x = s.max(f64::MIN_POSITIVE);
                x * omega.eval(1.0 / x)
            }
            FunctionSpec::WeakDual { omega } => weak_dual_eval(omega, s),
        }
    }

    /// Closed-form antiderivative `M` with `M(0) = 0`, when one is known.
    pub fn antiderivative(&self, sigma: f64) -> Option<f64> {
        let s = sigma.max(0.0);
        match self {
            FunctionSpec::Constant { c } => Some(c * s),
            FunctionSpec::Affine { a, b } => Some(a * s + 0.5 * b * s * s),
            FunctionSpec::Power { beta, scale } if *beta > -1.0 => {
                Some(scale * s.powf(beta + 1.0) / (beta + 1.0))
            }
            FunctionSpec::Pohozaev { a, b } if *a != 0.0 => Some(s / (a * (a + b * s))),
            FunctionSpec::Shift { base, by } => base.antiderivative(s).map(|m| m + by * s),
            _ => None,
        }
    }

    /// Breakpoints in `(lo, hi)` where the function is only piecewise smooth.
    pub fn breakpoints(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut out = Vec::new();
        let mut push = |x: f64| {
            if x > lo && x < hi {
                out.push(x);
            }
        };
        match self {
            FunctionSpec::Table { points } => points.iter().for_each(|p| push(p[0])),
            FunctionSpec::LogLipschitz => push(LOG_LIPSCHITZ_KNEE),
            FunctionSpec::LogPower { floor, .. } => {
                push(*floor);
                push(1.0);
            }
            FunctionSpec::LinearTail { base, knee } => {
                push(*knee);
                out.extend(base.breakpoints(lo, hi.min(*knee)));
            }
            FunctionSpec::AtLeast { base, .. } | FunctionSpec::Shift { base, .. } => {
                out.extend(base.breakpoints(lo, hi))
            }
            _ => {}
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }
}

fn log_power_at_zero(p: f64, q: f64) -> f64 {
    // limit of σ^p |log σ|^q as σ → 0⁺
    if p > 0.0 || (p == 0.0 && q < 0.0) {
        0.0
    } else if p == 0.0 && q == 0.0 {
        1.0
    } else {
        f64::INFINITY
    }
}

fn interpolate_table(points: &[[f64; 2]], s: f64) -> f64 {
    let first = points[0];
    let last = points[points.len() - 1];
    if s <= first[0] {
        return first[1];
    }
    if s >= last[0] {
        return last[1];
    }
    let idx = points.partition_point(|p| p[0] <= s);
    let [x0, y0] = points[idx - 1];
    let [x1, y1] = points[idx];
    let t = (s - x0) / (x1 - x0);
    y0 + t * (y1 - y0)
}

/// Solves `σ / sqrt(ω(1/σ)) = τ` for σ by bisection in log σ.
fn weak_dual_eval(omega: &FunctionSpec, tau: f64) -> f64 {
    if tau == 0.0 {
        return 0.0;
    }
    let g = |ln_sigma: f64| {
        let sigma = ln_sigma.exp();
        (sigma / omega.eval(1.0 / sigma).sqrt()).ln()
    };
    let target = tau.ln();
    let (mut lo, mut hi) = (-690.0_f64, 690.0_f64);
    if g(lo) >= target {
        return lo.exp();
    }
    if g(hi) <= target {
        return hi.exp();
    }
    for _ in 0..DUAL_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi)).exp()
}

impl fmt::Display for FunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FunctionSpec::Constant { c } => write!(f, "{c}"),
            FunctionSpec::Affine { a, b } => write!(f, "{a} + {b}σ"),
            FunctionSpec::Power { beta, scale } if *scale == 1.0 => write!(f, "σ^{beta}"),
            FunctionSpec::Power { beta, scale } => write!(f, "{scale}·σ^{beta}"),
            FunctionSpec::Pohozaev { a, b } => write!(f, "({a} + {b}σ)^-2"),
            FunctionSpec::LogLipschitz => write!(f, "σ|log σ|"),
            FunctionSpec::LogPower { p, q, floor } => {
                write!(f, "σ^{p}·|log σ|^{q}")?;
                if *floor > 0.0 {
                    write!(f, " (σ ≥ {floor})")?;
                }
                Ok(())
            }
            FunctionSpec::Table { points } => write!(f, "table[{} points]", points.len()),
            FunctionSpec::AtLeast { base, floor } => write!(f, "max({floor}, {base})"),
            FunctionSpec::LinearTail { base, knee } => write!(f, "{base} (linear beyond {knee})"),
            FunctionSpec::Shift { base, by } => write!(f, "{base} + {by}"),
            FunctionSpec::StrictDual { omega } => write!(f, "σ·ω(1/σ) with ω = {omega}"),
            FunctionSpec::WeakDual { omega } => {
                write!(f, "inverse of σ/sqrt(ω(1/σ)) with ω = {omega}")
            }
        }
    }
}
