//! Growth functions `Φ`, the log-type weight `ω = T_Φ^ε` and its powers.
//!
//! All evaluations go through `ln Φ`, which is available in closed form for
//! the built-in families; this keeps `ln₊Φ` exact near `Φ = 1` and avoids
//! overflow at the ends of wide geometric grids.

use serde::{Deserialize, Serialize};

use crate::error::{domain, LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Family {
    /// `c·t^s`
    Power { s: f64, c: f64 },
    /// `t^s·ln(e + t)`, `s ≥ 1`
    PowerLog { s: f64 },
}

/// Declared growth class with its type exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GrowthClass {
    /// upper type `q ≥ 1`: `Φ(st) ≤ C t^q Φ(s)` for `t ≥ 1`
    Upper(f64),
    /// lower type `p ∈ (0, 1]`: `Φ(st) ≤ C t^p Φ(s)` for `t ≤ 1`
    Lower(f64),
}

impl GrowthClass {
    pub fn exponent(&self) -> f64 {
        match *self {
            GrowthClass::Upper(q) => q,
            GrowthClass::Lower(p) => p,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthFunction {
    pub family: Family,
    pub class: GrowthClass,
    pub type_constant: f64,
}

impl GrowthFunction {
    /// `c·t^s`, declared upper(s) for `s > 1` and lower(s) for `s ≤ 1`.
    /// The class inequality is an equality, so the type constant is 1.
    pub fn power(s: f64, c: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(domain("power exponent s", s));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(domain("power coefficient c", c));
        }
        let class = if s > 1.0 {
            GrowthClass::Upper(s)
        } else {
            GrowthClass::Lower(s)
        };
        Ok(GrowthFunction { family: Family::Power { s, c }, class, type_constant: 1.0 })
    }

    /// `t^s·ln(e+t)`, declared upper(s+1) with the constant found by grid
    /// maximization.
    pub fn power_log(s: f64) -> Result<Self> {
        if !(s >= 1.0 && s.is_finite()) {
            return Err(domain("power_log exponent s (needs s >= 1)", s));
        }
        let mut phi = GrowthFunction {
            family: Family::PowerLog { s },
            class: GrowthClass::Upper(s + 1.0),
            type_constant: f64::INFINITY,
        };
        let cert = growth_class_check(&phi, &ClassGrid::default());
        phi.type_constant = cert.worst_ratio.max(1.0);
        Ok(phi)
    }

    /// Builds a growth function with an explicit declared class.
    pub fn with_class(family: Family, class: GrowthClass, type_constant: f64) -> Result<Self> {
        match class {
            GrowthClass::Upper(q) if !(q >= 1.0) => return Err(domain("upper type exponent", q)),
            GrowthClass::Lower(p) if !(p > 0.0 && p <= 1.0) => {
                return Err(domain("lower type exponent", p))
            }
            _ => {}
        }
        if !(type_constant >= 1.0) {
            return Err(domain("type constant", type_constant));
        }
        Ok(GrowthFunction { family, class, type_constant })
    }

    /// `ln Φ(t)` for `t > 0` (no domain check).
    pub fn ln_eval(&self, t: f64) -> f64 {
        match self.family {
            Family::Power { s, c } => c.ln() + s * t.ln(),
            Family::PowerLog { s } => s * t.ln() + (std::f64::consts::E + t).ln().ln(),
        }
    }

    pub fn ln_plus(&self, t: f64) -> f64 {
        self.ln_eval(t).max(0.0)
    }

    pub fn label(&self) -> String {
        match self.family {
            Family::Power { s, c } if c == 1.0 => format!("t^{s}"),
            Family::Power { s, c } => format!("{c}*t^{s}"),
            Family::PowerLog { s } => format!("t^{s}*ln(e+t)"),
        }
    }
}

/// `Φ(t)`.
pub fn growth_eval(phi: &GrowthFunction, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(domain("t", t));
    }
    Ok(match phi.family {
        Family::Power { s, c } => c * t.powf(s),
        Family::PowerLog { s } => t.powf(s) * (std::f64::consts::E + t).ln(),
    })
}

/// The exponent `p_Φ`: the upper type for upper-class `Φ`, 1 otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PPhi {
    pub value: f64,
}

pub fn p_phi(phi: &GrowthFunction) -> PPhi {
    match phi.class {
        GrowthClass::Upper(q) => PPhi { value: q },
        GrowthClass::Lower(_) => PPhi { value: 1.0 },
    }
}

/// Geometric sample grid for class certificates: `s, t = 2^{i/per_octave}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassGrid {
    pub log2_lo: i32,
    pub log2_hi: i32,
    pub per_octave: u32,
}

impl Default for ClassGrid {
    fn default() -> Self {
        ClassGrid { log2_lo: -20, log2_hi: 20, per_octave: 4 }
    }
}

impl ClassGrid {
    fn exponents(&self, lo: i32, hi: i32) -> Vec<f64> {
        let n = self.per_octave.max(1) as i32;
        (lo * n..=hi * n).map(|i| i as f64 / n as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassCertificate {
    pub pass: bool,
    /// `max Φ(st) / (t^p Φ(s))` over the grid
    pub worst_ratio: f64,
    pub worst_s: f64,
    pub worst_t: f64,
    pub ratio_ok: bool,
    /// `Φ(t)/t` has the monotonicity required by the class
    pub quotient_monotone: bool,
    /// `Φ` nondecreasing on the grid
    pub nondecreasing: bool,
    /// `Φ` strictly smaller at the low end and larger at the high end than at 1
    pub limits_ok: bool,
}

/// Grid-verifies the declared class of `phi`.
pub fn growth_class_check(phi: &GrowthFunction, grid: &ClassGrid) -> ClassCertificate {
    let ln2 = std::f64::consts::LN_2;
    let p = phi.class.exponent();
    let s_exps = grid.exponents(grid.log2_lo, grid.log2_hi);
    let t_exps = match phi.class {
        GrowthClass::Upper(_) => grid.exponents(0, grid.log2_hi),
        GrowthClass::Lower(_) => grid.exponents(grid.log2_lo, 0),
    };

    let mut worst = f64::NEG_INFINITY;
    let (mut ws, mut wt) = (1.0, 1.0);
    for &es in &s_exps {
        let s = (es * ln2).exp();
        let ln_phi_s = phi.ln_eval(s);
        for &et in &t_exps {
            let t = (et * ln2).exp();
            let lr = phi.ln_eval(s * t) - p * t.ln() - ln_phi_s;
            if lr > worst {
                worst = lr;
                ws = s;
                wt = t;
            }
        }
    }
    let worst_ratio = worst.exp();
    let ratio_ok = worst_ratio <= phi.type_constant * (1.0 + 1e-12);

    let lnphi: Vec<f64> = s_exps.iter().map(|&e| phi.ln_eval((e * ln2).exp())).collect();
    let tol = |a: f64, b: f64| 1e-12 * (1.0 + a.abs().max(b.abs()));
    let nondecreasing = lnphi.windows(2).all(|w| w[1] >= w[0] - tol(w[0], w[1]));
    let quot: Vec<f64> = s_exps.iter().zip(&lnphi).map(|(&e, &l)| l - e * ln2).collect();
    let quotient_monotone = match phi.class {
        GrowthClass::Upper(_) => quot.windows(2).all(|w| w[1] >= w[0] - tol(w[0], w[1])),
        GrowthClass::Lower(_) => quot.windows(2).all(|w| w[1] <= w[0] + tol(w[0], w[1])),
    };
    let ln1 = phi.ln_eval(1.0);
    let limits_ok = lnphi[0] < ln1 && *lnphi.last().unwrap() > ln1;

    ClassCertificate {
        pass: ratio_ok && quotient_monotone && nondecreasing && limits_ok,
        worst_ratio,
        worst_s: ws,
        worst_t: wt,
        ratio_ok,
        quotient_monotone,
        nondecreasing,
        limits_ok,
    }
}

/// `(ε₁, ε₂, k, Φ)`: the weight `ω^k` with `ω = 1 + ε₁ ln₊Φ(1/t) + ε₂ ln₊Φ(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub eps1: u8,
    pub eps2: u8,
    pub k: f64,
    pub phi: GrowthFunction,
}

impl WeightSpec {
    pub fn new(eps1: u8, eps2: u8, k: f64, phi: GrowthFunction) -> Result<Self> {
        if eps1 > 1 {
            return Err(domain("eps1", eps1 as f64));
        }
        if eps2 > 1 {
            return Err(domain("eps2", eps2 as f64));
        }
        if !k.is_finite() {
            return Err(domain("k", k));
        }
        Ok(WeightSpec { eps1, eps2, k, phi })
    }

    /// The unweighted case `ω ≡ 1`.
    pub fn trivial() -> Self {
        WeightSpec { eps1: 0, eps2: 0, k: 0.0, phi: GrowthFunction::power(1.0, 1.0).unwrap() }
    }

    pub fn with_k(mut self, k: f64) -> Self {
        self.k = k;
        self
    }

    pub fn is_trivial(&self) -> bool {
        self.k == 0.0 || (self.eps1 == 0 && self.eps2 == 0)
    }

    /// The base weight `ω(t) = T_Φ^ε(t)` (no domain check).
    pub fn base(&self, t: f64) -> f64 {
        let mut w = 1.0;
        if self.eps1 == 1 {
            w += self.phi.ln_plus(1.0 / t);
        }
        if self.eps2 == 1 {
            w += self.phi.ln_plus(t);
        }
        w
    }

    /// `ω^k(t)` (no domain check).
    pub fn eval(&self, t: f64) -> f64 {
        self.pow(t, self.k)
    }

    /// `ω^e(t)` for an arbitrary exponent `e`.
    pub fn pow(&self, t: f64, e: f64) -> f64 {
        if e == 0.0 || (self.eps1 == 0 && self.eps2 == 0) {
            1.0
        } else {
            self.base(t).powf(e)
        }
    }

    /// `k·ln ω(t)`.
    pub fn ln_eval(&self, t: f64) -> f64 {
        if self.is_trivial() {
            0.0
        } else {
            self.k * self.base(t).ln()
        }
    }
}

/// `ω^k(t)`.
pub fn weight_eval(spec: &WeightSpec, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(domain("t", t));
    }
    Ok(spec.eval(t))
}

/// `ω₀(y) = 1 + ε₁ ln₊(1/y) + ε₂ ln₊(y)`.
pub fn omega0_eval(eps1: u8, eps2: u8, y: f64) -> Result<f64> {
    if !(y > 0.0) {
        return Err(domain("y", y));
    }
    let l = y.ln();
    Ok(1.0 + eps1.min(1) as f64 * (-l).max(0.0) + eps2.min(1) as f64 * l.max(0.0))
}

/// `max_{1≤j≤jmax} ω(2^j x) / (j·ω(x))` on the base weight (`k` ignored).
pub fn weight_doubling_bound(spec: &WeightSpec, x: f64, jmax: u32) -> Result<f64> {
    if !(x > 0.0) {
        return Err(domain("x", x));
    }
    if jmax == 0 {
        return Err(LabError::Config { field: "jmax".into(), reason: "must be >= 1".into() });
    }
    let wx = spec.base(x);
    Ok((1..=jmax)
        .map(|j| spec.base(x * 2f64.powi(j as i32)) / (j as f64 * wx))
        .fold(f64::NEG_INFINITY, f64::max))
}

/// The built-in growth functions: `t`, `t²`, `√t`, `t·ln(e+t)`.
pub fn builtin_growth_functions() -> Vec<GrowthFunction> {
    vec![
        GrowthFunction::power(1.0, 1.0).unwrap(),
        GrowthFunction::power(2.0, 1.0).unwrap(),
        GrowthFunction::power(0.5, 1.0).unwrap(),
        GrowthFunction::power_log(1.0).unwrap(),
    ]
}

/// Built-in growth functions × `ε ∈ {0,1}²` × the given `k` values.
pub fn builtin_specs(ks: &[f64]) -> Vec<WeightSpec> {
    let mut out = Vec::new();
    for phi in builtin_growth_functions() {
        for (e1, e2) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
            for &k in ks {
                out.push(WeightSpec { eps1: e1, eps2: e2, k, phi });
            }
        }
    }
    out
}

/// Flat key/value form used by configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightConfig {
    #[serde(default = "default_family")]
    pub family: String,
    #[serde(default = "one")]
    pub s: f64,
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default)]
    pub eps1: u8,
    #[serde(default)]
    pub eps2: u8,
    #[serde(default)]
    pub k: f64,
}

fn default_family() -> String {
    "power".into()
}

fn one() -> f64 {
    1.0
}

impl Default for WeightConfig {
    fn default() -> Self {
        WeightConfig { family: default_family(), s: 1.0, c: 1.0, eps1: 0, eps2: 0, k: 0.0 }
    }
}

impl WeightConfig {
    pub fn to_spec(&self) -> Result<WeightSpec> {
        let phi = match self.family.as_str() {
            "power" => GrowthFunction::power(self.s, self.c)?,
            "power_log" => GrowthFunction::power_log(self.s)?,
            other => {
                return Err(LabError::Config {
                    field: "family".into(),
                    reason: format!("unknown family `{other}` (expected power or power_log)"),
                })
            }
        };
        WeightSpec::new(self.eps1, self.eps2, self.k, phi)
    }

    pub fn from_spec(spec: &WeightSpec) -> Self {
        let (family, s, c) = match spec.phi.family {
            Family::Power { s, c } => ("power", s, c),
            Family::PowerLog { s } => ("power_log", s, 1.0),
        };
        WeightConfig { family: family.into(), s, c, eps1: spec.eps1, eps2: spec.eps2, k: spec.k }
    }
}
