//! Dyadic-panel quadrature on `(0, ∞)` and on truncated half-planes.
//!
//! Half-line integrals are computed in the variable `u = log₂ y`, split into
//! panels of `1/panels_per_octave` octaves with a Gauss–Legendre rule on each.
//! Every panel is also integrated with half the nodes; the difference is the
//! error estimate. Tails beyond the domain are extrapolated from the local
//! power-law slope of the integrand and reported separately.

use std::collections::HashMap;
use std::f64::consts::LN_2;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, LabError, Result};
use crate::par;
use crate::weights::WeightSpec;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

fn compute_gauss_legendre(n: usize) -> GaussRule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    GaussRule { nodes, weights }
}

/// Cached `n`-point Gauss–Legendre rule.
pub fn gauss_legendre(n: usize) -> Arc<GaussRule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    guard.entry(n).or_insert_with(|| Arc::new(compute_gauss_legendre(n))).clone()
}

/// Composite Gauss–Legendre on `[a, b]` with `panels` equal panels.
pub fn integrate_interval<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize, n: usize) -> f64 {
    let rule = gauss_legendre(n);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for m in 0..panels {
        let c = a + (m as f64 + 0.5) * h;
        let mut s = 0.0;
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            s += w * f(c + 0.5 * h * x);
        }
        total += 0.5 * h * s;
    }
    total
}

/// Dyadic panel layout for integrals over `[2^{j_lo}, 2^{j_hi}]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PanelScheme {
    pub j_lo: i32,
    pub j_hi: i32,
    pub nodes_per_panel: usize,
    pub panels_per_octave: usize,
}

impl Default for PanelScheme {
    fn default() -> Self {
        PanelScheme { j_lo: -20, j_hi: 20, nodes_per_panel: 16, panels_per_octave: 4 }
    }
}

impl PanelScheme {
    pub fn new(j_lo: i32, j_hi: i32, nodes_per_panel: usize, panels_per_octave: usize) -> Result<Self> {
        let s = PanelScheme { j_lo, j_hi, nodes_per_panel, panels_per_octave };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.j_lo >= self.j_hi {
            return Err(LabError::Config {
                field: "j_lo/j_hi".into(),
                reason: format!("need j_lo < j_hi, got {} and {}", self.j_lo, self.j_hi),
            });
        }
        if self.nodes_per_panel < 2 {
            return Err(LabError::Config { field: "nodes_per_panel".into(), reason: "must be >= 2".into() });
        }
        if self.panels_per_octave < 1 {
            return Err(LabError::Config { field: "panels_per_octave".into(), reason: "must be >= 1".into() });
        }
        Ok(())
    }

    /// Same domain, twice the nodes per panel.
    pub fn refined(&self) -> Self {
        PanelScheme { nodes_per_panel: 2 * self.nodes_per_panel, ..*self }
    }

    pub fn with_domain(&self, j_lo: i32, j_hi: i32) -> Self {
        PanelScheme { j_lo, j_hi, ..*self }
    }

    /// Quadrature nodes and weights (for `dy`) over the whole domain.
    pub fn nodes(&self) -> (Vec<f64>, Vec<f64>) {
        log_nodes(self.j_lo as f64, self.j_hi as f64, self.panels_per_octave, self.nodes_per_panel)
    }
}

/// Nodes/weights in `y` for `∫_{2^{u_lo}}^{2^{u_hi}} · dy` on octave panels.
pub fn log_nodes(u_lo: f64, u_hi: f64, ppo: usize, n: usize) -> (Vec<f64>, Vec<f64>) {
    let rule = gauss_legendre(n);
    let panels = (((u_hi - u_lo) * ppo as f64).round() as usize).max(1);
    let h = (u_hi - u_lo) / panels as f64;
    let mut ys = Vec::with_capacity(panels * n);
    let mut ws = Vec::with_capacity(panels * n);
    for m in 0..panels {
        let c = u_lo + (m as f64 + 0.5) * h;
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            let u = c + 0.5 * h * x;
            let y = (u * LN_2).exp();
            ys.push(y);
            ws.push(0.5 * h * w * LN_2 * y);
        }
    }
    (ys, ws)
}

/// Result of a half-line integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadReport {
    /// integral over the truncated domain `[lo, hi]`
    pub value: f64,
    pub error_estimate: f64,
    /// extrapolated `∫_0^lo`; infinite when the local slope is non-integrable
    pub tail_lo: f64,
    /// extrapolated `∫_hi^∞`; infinite when the local slope is non-integrable
    pub tail_hi: f64,
    pub lo: f64,
    pub hi: f64,
}

impl QuadReport {
    pub fn total(&self) -> f64 {
        self.value + self.tail_lo + self.tail_hi
    }

    pub fn is_finite(&self) -> bool {
        self.total().is_finite()
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    fine: f64,
    coarse: f64,
    abs: f64,
}

fn check(v: f64, y: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(LabError::Integration { location: y })
    }
}

fn panels<F>(f: &F, u_lo: f64, u_hi: f64, ppo: usize, n: usize) -> Result<Vec<Panel>>
where
    F: Fn(f64) -> f64 + Sync,
{
    let fine_rule = gauss_legendre(n);
    let coarse_rule = gauss_legendre((n / 2).max(1));
    let count = (((u_hi - u_lo) * ppo as f64).round() as usize).max(1);
    let h = (u_hi - u_lo) / count as f64;
    let out = par::map(count, |m| -> Result<Panel> {
        let c = u_lo + (m as f64 + 0.5) * h;
        let apply = |rule: &GaussRule| -> Result<(f64, f64)> {
            let (mut s, mut a) = (0.0, 0.0);
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                let y = ((c + 0.5 * h * x) * LN_2).exp();
                let v = check(f(y), y)? * y;
                s += w * v;
                a += w * v.abs();
            }
            let scale = 0.5 * h * LN_2;
            Ok((s * scale, a * scale))
        };
        let (fine, abs) = apply(&fine_rule)?;
        let (coarse, _) = apply(&coarse_rule)?;
        Ok(Panel { fine, coarse, abs })
    });
    out.into_iter().collect()
}

/// Local power slopes within this distance of `-1` are treated as
/// non-integrable: such tails cannot be resolved on any practical domain.
pub const SLOPE_MARGIN: f64 = 1e-3;

fn local_slope(f0: f64, f1: f64, ratio: f64) -> f64 {
    (f1.abs() / f0.abs()).ln() / ratio.ln()
}

/// `∫_0^a f`, extrapolated from the local power law of `f` on `[a, 2a]`.
pub fn tail_below<F: Fn(f64) -> f64>(f: &F, a: f64) -> f64 {
    let fa = f(a);
    if fa == 0.0 || !fa.is_finite() {
        return if fa == 0.0 { 0.0 } else { f64::INFINITY };
    }
    let e = local_slope(fa, f(2.0 * a), 2.0);
    if !e.is_finite() {
        return 0.0;
    }
    if e + 1.0 <= SLOPE_MARGIN {
        f64::INFINITY.copysign(fa)
    } else {
        fa * a / (e + 1.0)
    }
}

/// `∫_b^∞ f`, extrapolated from the local power law of `f` on `[b/2, b]`.
pub fn tail_above<F: Fn(f64) -> f64>(f: &F, b: f64) -> f64 {
    let fb = f(b);
    if fb == 0.0 || !fb.is_finite() {
        return if fb == 0.0 { 0.0 } else { f64::INFINITY };
    }
    let e = local_slope(fb, f(0.5 * b), 0.5);
    if !e.is_finite() {
        return 0.0;
    }
    if e + 1.0 >= -SLOPE_MARGIN {
        f64::INFINITY.copysign(fb)
    } else {
        fb * b / (-(e + 1.0))
    }
}

fn summarize(ps: &[Panel]) -> (f64, f64) {
    let value: f64 = ps.iter().map(|p| p.fine).sum();
    let diff: f64 = ps.iter().map(|p| (p.fine - p.coarse).abs()).sum();
    let abs: f64 = ps.iter().map(|p| p.abs).sum();
    (value, diff + 4.0 * f64::EPSILON * abs)
}

/// `∫ f(y) dy` over `[2^{j_lo}, 2^{j_hi}]` with extrapolated tails.
pub fn integrate_halfline<F>(f: F, scheme: &PanelScheme) -> Result<QuadReport>
where
    F: Fn(f64) -> f64 + Sync,
{
    scheme.validate()?;
    let (u_lo, u_hi) = (scheme.j_lo as f64, scheme.j_hi as f64);
    let ps = panels(&f, u_lo, u_hi, scheme.panels_per_octave, scheme.nodes_per_panel)?;
    let (value, error_estimate) = summarize(&ps);
    let lo = (u_lo * LN_2).exp();
    let hi = (u_hi * LN_2).exp();
    Ok(QuadReport { value, error_estimate, tail_lo: tail_below(&f, lo), tail_hi: tail_above(&f, hi), lo, hi })
}

/// Octave limit for automatic domain extension.
pub const EXTENSION_LIMIT: i32 = 1000;

/// Like [`integrate_halfline`] but widens the domain until both tails are
/// below `tol` relative to the total, or the extension limit is reached.
pub fn integrate_auto<F>(f: F, scheme: &PanelScheme, tol: f64) -> Result<QuadReport>
where
    F: Fn(f64) -> f64 + Sync,
{
    integrate_auto_limited(f, scheme, tol, EXTENSION_LIMIT)
}

pub(crate) fn integrate_auto_limited<F>(f: F, scheme: &PanelScheme, tol: f64, limit: i32) -> Result<QuadReport>
where
    F: Fn(f64) -> f64 + Sync,
{
    integrate_auto_sided(f, scheme, tol, limit, true)
}

/// With `upper = false` the domain ends at `2^{j_hi}` and no upper tail is taken.
pub(crate) fn integrate_auto_sided<F>(f: F, scheme: &PanelScheme, tol: f64, limit: i32, upper: bool) -> Result<QuadReport>
where
    F: Fn(f64) -> f64 + Sync,
{
    scheme.validate()?;
    let ppo = scheme.panels_per_octave;
    let n = scheme.nodes_per_panel;
    let (mut u_lo, mut u_hi) = (scheme.j_lo, scheme.j_hi);
    let ps = panels(&f, u_lo as f64, u_hi as f64, ppo, n)?;
    let (mut value, mut err) = summarize(&ps);
    let y = |u: i32| (u as f64 * LN_2).exp();
    let mut tail_lo = tail_below(&f, y(u_lo));
    let mut tail_hi = if upper { tail_above(&f, y(u_hi)) } else { 0.0 };
    let mut step = 20;
    loop {
        let scale = (value + finite_or_zero(tail_lo) + finite_or_zero(tail_hi)).abs();
        let need_lo = !(tail_lo.abs() <= tol * scale) && u_lo > -limit;
        let need_hi = !(tail_hi.abs() <= tol * scale) && u_hi < limit;
        if !need_lo && !need_hi {
            break;
        }
        if need_lo {
            let new_lo = (u_lo - step).max(-limit);
            match panels(&f, new_lo as f64, u_lo as f64, ppo, n) {
                Ok(ps) => {
                    let (v, e) = summarize(&ps);
                    value += v;
                    err += e;
                    u_lo = new_lo;
                    tail_lo = tail_below(&f, y(u_lo));
                }
                // The integrand overflows further out: not integrable in practice.
                Err(_) => {
                    tail_lo = f64::INFINITY;
                    u_lo = -limit;
                }
            }
        }
        if need_hi {
            let new_hi = (u_hi + step).min(limit);
            match panels(&f, u_hi as f64, new_hi as f64, ppo, n) {
                Ok(ps) => {
                    let (v, e) = summarize(&ps);
                    value += v;
                    err += e;
                    u_hi = new_hi;
                    tail_hi = tail_above(&f, y(u_hi));
                }
                Err(_) => {
                    tail_hi = f64::INFINITY;
                    u_hi = limit;
                }
            }
        }
        step *= 2;
    }
    Ok(QuadReport { value, error_estimate: err, tail_lo, tail_hi, lo: y(u_lo), hi: y(u_hi) })
}

fn finite_or_zero(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        0.0
    }
}

const AUTO_TOL: f64 = 1e-12;

/// Weighted interval mass and its normalized ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalMass {
    /// `∫_0^t ω^k(y) y^β dy`
    pub mass: f64,
    /// `mass / (ω^k(t) t^{1+β})`
    pub ratio: f64,
    pub error_estimate: f64,
}

/// `∫_0^t ω^k(y) y^β dy` and its ratio against `ω^k(t) t^{1+β}`.
pub fn interval_mass(spec: &WeightSpec, beta: f64, t: f64, scheme: &PanelScheme) -> Result<IntervalMass> {
    if !(beta > -1.0) {
        return Err(domain("beta (mass diverges at 0)", beta));
    }
    if !(t > 0.0) {
        return Err(domain("t", t));
    }
    // Integrate y = t·s for s ∈ (0, 1]; the upper end is the panel edge.
    let span = scheme.j_hi - scheme.j_lo;
    let local = scheme.with_domain(-span, 0);
    let lt = t.ln();
    let g = |s: f64| (spec.ln_eval(t * s) + beta * (lt + s.ln())).exp();
    let r = integrate_auto_sided(g, &local, AUTO_TOL, EXTENSION_LIMIT, false)?;
    let mass = t * r.total();
    let norm = (spec.ln_eval(t) + (1.0 + beta) * lt).exp();
    Ok(IntervalMass { mass, ratio: mass / norm, error_estimate: t * r.error_estimate })
}

/// A Forelli–Rudin integral and its normalized ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForelliRudin {
    /// `∫_0^∞ ω^k(y) y^β (x+y)^{-(1+a+β)} dy`
    pub value: f64,
    /// `value / (ω^k(x) x^{-a})`
    pub ratio: f64,
    pub error_estimate: f64,
}

/// `∫_0^∞ ω^k(y) y^β (x+y)^{-(1+a+β)} dy` for gap `a > 0`.
pub fn forelli_rudin(spec: &WeightSpec, a: f64, beta: f64, x: f64, scheme: &PanelScheme) -> Result<ForelliRudin> {
    if !(a > 0.0) {
        return Err(domain("gap a (tail diverges)", a));
    }
    if !(beta > -1.0) {
        return Err(domain("beta", beta));
    }
    if !(x > 0.0) {
        return Err(domain("x", x));
    }
    // y = x·s; the weight depends on x·s, the power part on s only.
    let e = 1.0 + a + beta;
    let lx = x.ln();
    let g = |s: f64| (spec.ln_eval(x * s) + beta * s.ln() - e * s.ln_1p()).exp();
    let r = integrate_auto(g, scheme, AUTO_TOL)?;
    let scale = (-a * lx).exp();
    let value = scale * r.total();
    let ratio = value / (spec.eval(x) * scale);
    Ok(ForelliRudin { value, ratio, error_estimate: scale * r.error_estimate })
}

/// Conjugate exponent, `∞` for `p = 1`.
pub fn conjugate(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else {
        p / (p - 1.0)
    }
}

/// Mixed-norm space parameters `(p, q, α, β)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceParams {
    pub p: f64,
    pub q: f64,
    pub alpha: f64,
    pub beta: f64,
    pub p_conj: f64,
    pub q_conj: f64,
}

impl SpaceParams {
    pub fn new(p: f64, q: f64, alpha: f64, beta: f64) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(domain("p", p));
        }
        if !(q >= 1.0 && q.is_finite()) {
            return Err(domain("q", q));
        }
        if !(alpha > -1.0) {
            return Err(domain("alpha", alpha));
        }
        if !(beta > -1.0) {
            return Err(domain("beta", beta));
        }
        Ok(SpaceParams { p, q, alpha, beta, p_conj: conjugate(p), q_conj: conjugate(q) })
    }

    /// `α + 1 < q(β + 1)`.
    pub fn admissible(&self) -> bool {
        self.alpha + 1.0 < self.q * (self.beta + 1.0)
    }
}

/// Horizontal region containing the features of a slice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XWindow {
    pub lo: f64,
    pub hi: f64,
    /// narrowest feature width
    pub width: f64,
    /// widest feature width; the outer panels reach far beyond it
    pub widest: f64,
}

impl XWindow {
    pub fn new(lo: f64, hi: f64, width: f64) -> XWindow {
        XWindow { lo, hi, width, widest: width }
    }

    pub fn union(&self, other: &XWindow) -> XWindow {
        XWindow {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
            width: self.width.min(other.width),
            widest: self.widest.max(other.widest),
        }
    }
}

/// A function on the upper half-plane with a closed-form evaluator.
pub trait HalfPlaneFn: Send + Sync {
    fn eval(&self, z: Complex64) -> Complex64;

    /// Where the slice at height `y` has its features.
    fn x_window(&self, y: f64) -> XWindow {
        XWindow::new(0.0, 0.0, y + 1.0)
    }
}

impl<F> HalfPlaneFn for F
where
    F: Fn(Complex64) -> Complex64 + Send + Sync,
{
    fn eval(&self, z: Complex64) -> Complex64 {
        self(z)
    }
}

const CORE_HALF: f64 = 16.0;
const CORE_PANEL: f64 = 0.5;
const OUTER_OCTAVES: usize = 6;
const MAX_CORE_PANELS: usize = 16_384;

/// Horizontal quadrature rule: fine panels over the window, geometric panels
/// outside it, and two tail points for extrapolation.
#[derive(Debug, Clone)]
pub struct XRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// outermost abscissae `(left, right)`, where tails start
    pub left: f64,
    pub right: f64,
    /// distance scale used for the tails
    pub reach: f64,
}

impl XRule {
    pub fn new(win: XWindow) -> XRule {
        XRule::with_resolution(win, CORE_PANEL, 8)
    }

    /// Core panels of width `panel·width` with `nodes` Gauss points each.
    pub fn with_resolution(win: XWindow, panel: f64, nodes: usize) -> XRule {
        let rule = gauss_legendre(nodes);
        let h = win.width.max(1e-300);
        let a = win.lo - CORE_HALF * h;
        let b = win.hi + CORE_HALF * h;
        let count = (((b - a) / (panel * h)).ceil() as usize).clamp(1, MAX_CORE_PANELS);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let push = |lo: f64, hi: f64, nodes: &mut Vec<f64>, weights: &mut Vec<f64>| {
            let c = 0.5 * (lo + hi);
            let r = 0.5 * (hi - lo);
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                nodes.push(c + r * x);
                weights.push(r * w);
            }
        };
        let ph = (b - a) / count as f64;
        for m in 0..count {
            push(a + m as f64 * ph, a + (m + 1) as f64 * ph, &mut nodes, &mut weights);
        }
        // Outer panels at distances [0, d0], [d0, 2d0], [2d0, 4d0], ... from the core.
        let d0 = CORE_HALF * h;
        let spread = (win.widest / h).max(1.0).log2().ceil() as usize;
        let octaves = (OUTER_OCTAVES + spread).min(50);
        for o in 0..=octaves {
            let d1 = if o == 0 { 0.0 } else { d0 * (1u64 << (o - 1)) as f64 };
            let d2 = d0 * (1u64 << o) as f64;
            let dm = 0.5 * (d1 + d2);
            for (s, e) in [(d1, dm), (dm, d2)] {
                push(a - e, a - s, &mut nodes, &mut weights);
                push(b + s, b + e, &mut nodes, &mut weights);
            }
        }
        let reach = d0 * (1u64 << octaves) as f64;
        XRule { nodes, weights, left: a - reach, right: b + reach, reach }
    }

    /// `∫_ℝ g(x) dx` for nonnegative `g` with power-law tails.
    pub fn integrate<G: Fn(f64) -> f64>(&self, g: G) -> (f64, f64) {
        let mut s = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += w * g(*x);
        }
        // Tails in the distance from the window midpoint.
        let c = 0.5 * (self.left + self.right);
        let d = 0.5 * (self.right - self.left);
        let tl = tail_above(&|t: f64| g(c - t), d);
        let tr = tail_above(&|t: f64| g(c + t), d);
        (s, tl + tr)
    }
}

/// `∫_ℝ |f(x+iy)|^p dx` (value, extrapolated tail) using the evaluator.
pub fn slice_integral(f: &dyn HalfPlaneFn, p: f64, y: f64) -> (f64, f64) {
    let rule = XRule::new(f.x_window(y));
    rule.integrate(|x| f.eval(Complex64::new(x, y)).norm().powf(p))
}

/// Complex samples on a tensor grid, optionally backed by an evaluator.
#[derive(Clone)]
pub struct GridFunction {
    pub x_nodes: Vec<f64>,
    pub y_nodes: Vec<f64>,
    /// row-major `[ix * ny + iy]`
    pub values: Vec<Complex64>,
    pub evaluator: Option<Arc<dyn HalfPlaneFn>>,
}

impl std::fmt::Debug for GridFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GridFunction")
            .field("nx", &self.x_nodes.len())
            .field("ny", &self.y_nodes.len())
            .field("evaluator", &self.evaluator.is_some())
            .finish()
    }
}

/// Grid shape: `x` uniform on `[-x_half, x_half]`, `y` geometric on `[y_lo, y_hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridShape {
    pub x_half: f64,
    pub nx: usize,
    pub y_lo: f64,
    pub y_hi: f64,
    pub ny: usize,
}

impl Default for GridShape {
    fn default() -> Self {
        GridShape { x_half: 1024.0, nx: 257, y_lo: 2f64.powi(-20), y_hi: 2f64.powi(20), ny: 41 }
    }
}

impl GridShape {
    pub fn x_nodes(&self) -> Vec<f64> {
        let n = self.nx.max(2);
        (0..n).map(|i| -self.x_half + 2.0 * self.x_half * i as f64 / (n - 1) as f64).collect()
    }

    pub fn y_nodes(&self) -> Vec<f64> {
        let n = self.ny.max(2);
        let (a, b) = (self.y_lo.ln(), self.y_hi.ln());
        (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
    }
}

impl GridFunction {
    /// Samples `f` on the grid and keeps it as the evaluator.
    pub fn from_fn(f: Arc<dyn HalfPlaneFn>, shape: &GridShape) -> Result<Self> {
        let x_nodes = shape.x_nodes();
        let y_nodes = shape.y_nodes();
        let ny = y_nodes.len();
        let values = par::map(x_nodes.len() * ny, |i| f.eval(Complex64::new(x_nodes[i / ny], y_nodes[i % ny])));
        let g = GridFunction { x_nodes, y_nodes, values, evaluator: Some(f) };
        g.validate()?;
        Ok(g)
    }

    /// Plain samples without an evaluator.
    pub fn from_samples(x_nodes: Vec<f64>, y_nodes: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        let g = GridFunction { x_nodes, y_nodes, values, evaluator: None };
        g.validate()?;
        Ok(g)
    }

    pub fn zero(shape: &GridShape) -> Self {
        GridFunction::from_fn(Arc::new(|_z: Complex64| Complex64::new(0.0, 0.0)), shape).unwrap()
    }

    pub fn value(&self, ix: usize, iy: usize) -> Complex64 {
        self.values[ix * self.y_nodes.len() + iy]
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |field: &str, reason: String| LabError::Config { field: field.into(), reason };
        if self.x_nodes.len() < 2 || self.y_nodes.len() < 2 {
            return Err(cfg("grid", "need at least two nodes per axis".into()));
        }
        if !self.x_nodes.windows(2).all(|w| w[1] > w[0]) {
            return Err(cfg("x_nodes", "not strictly increasing".into()));
        }
        if !self.y_nodes.windows(2).all(|w| w[1] > w[0]) || !(self.y_nodes[0] > 0.0) {
            return Err(cfg("y_nodes", "not strictly increasing and positive".into()));
        }
        if self.values.len() != self.x_nodes.len() * self.y_nodes.len() {
            return Err(cfg("values", "shape mismatch".into()));
        }
        if let Some(bad) = self.values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(cfg("values", format!("non-finite sample at index {bad}")));
        }
        if let Some(f) = &self.evaluator {
            let ny = self.y_nodes.len();
            for (i, v) in self.values.iter().enumerate() {
                let e = f.eval(Complex64::new(self.x_nodes[i / ny], self.y_nodes[i % ny]));
                if (e - v).norm() > 1e-12 * e.norm().max(1.0) {
                    return Err(cfg("values", format!("sample {i} disagrees with evaluator")));
                }
            }
        }
        Ok(())
    }

    /// Scales all values (and the evaluator) by `c`.
    pub fn scaled(&self, c: Complex64) -> GridFunction {
        let evaluator = self.evaluator.clone().map(|f| Arc::new(Scaled { f, c }) as Arc<dyn HalfPlaneFn>);
        GridFunction {
            x_nodes: self.x_nodes.clone(),
            y_nodes: self.y_nodes.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
            evaluator,
        }
    }

    fn y_index(&self, y: f64) -> Option<usize> {
        self.y_nodes.iter().position(|&n| (n - y).abs() <= 1e-12 * y)
    }

    fn trapezoid_slice(&self, p: f64, iy: usize) -> f64 {
        let xs = &self.x_nodes;
        let mut s = 0.0;
        for ix in 0..xs.len() - 1 {
            let a = self.value(ix, iy).norm().powf(p);
            let b = self.value(ix + 1, iy).norm().powf(p);
            s += 0.5 * (a + b) * (xs[ix + 1] - xs[ix]);
        }
        s
    }
}

struct Scaled {
    f: Arc<dyn HalfPlaneFn>,
    c: Complex64,
}

impl HalfPlaneFn for Scaled {
    fn eval(&self, z: Complex64) -> Complex64 {
        self.c * self.f.eval(z)
    }
    fn x_window(&self, y: f64) -> XWindow {
        self.f.x_window(y)
    }
}

/// `(∫_ℝ |f(x+iy)|^p dx)^{1/p}`.
///
/// With an evaluator the slice is integrated over the whole line with tail
/// extrapolation; otherwise `y` must be a grid node and the samples are
/// integrated with the trapezoid rule over the grid's `x`-range.
pub fn slice_pnorm(f: &GridFunction, p: f64, y: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(domain("p", p));
    }
    if !(y > 0.0) {
        return Err(domain("y", y));
    }
    let s = match &f.evaluator {
        Some(ev) => {
            let (v, t) = slice_integral(ev.as_ref(), p, y);
            v + t
        }
        None => {
            let iy = f.y_index(y).ok_or(domain("y (not a grid node and no evaluator)", y))?;
            f.trapezoid_slice(p, iy)
        }
    };
    Ok(s.powf(1.0 / p))
}

/// Mixed-norm computation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedNormReport {
    /// `‖f‖`
    pub norm: f64,
    /// `‖f‖^q` including extrapolated tails
    pub integral: f64,
    pub error_estimate: f64,
    pub tail_lo: f64,
    pub tail_hi: f64,
    /// integrals truncated to `[2^{-J}, 2^{J}]` plus their extrapolated tails, for the ladder `J`
    pub ladder: Vec<(i32, f64)>,
    pub divergent: bool,
}

/// Growth factor per ladder step that flags divergence.
pub const DIVERGENCE_GROWTH: f64 = 1.5;

/// Octave limit for mixed-norm domain extension.
pub const MIXED_LIMIT: i32 = 200;

/// `‖f‖ = (∫_0^∞ ‖f(·+iy)‖_p^q ω^k(y) y^α dy)^{1/q}`.
///
/// Divergence is flagged when an extrapolated tail is infinite or when the
/// tail-corrected integrals over `[2^{-J}, 2^J]` grow by 1.5× or more between
/// consecutive ladder steps.
pub fn mixed_norm(f: &GridFunction, params: &SpaceParams, spec: &WeightSpec, scheme: &PanelScheme) -> Result<MixedNormReport> {
    scheme.validate()?;
    let (p, q, alpha) = (params.p, params.q, params.alpha);
    match &f.evaluator {
        Some(ev) => mixed_norm_ref(ev.as_ref(), params, spec, scheme),
        None => {
            // Trapezoid in ln y over the grid, no tails.
            let ys = &f.y_nodes;
            let h: Vec<f64> = (0..ys.len())
                .map(|iy| {
                    let s = f.trapezoid_slice(p, iy);
                    s.powf(q / p) * spec.eval(ys[iy]) * ys[iy].powf(alpha) * ys[iy]
                })
                .collect();
            let mut integral = 0.0;
            for i in 0..ys.len() - 1 {
                integral += 0.5 * (h[i] + h[i + 1]) * (ys[i + 1].ln() - ys[i].ln());
            }
            Ok(MixedNormReport {
                norm: integral.powf(1.0 / q),
                integral,
                error_estimate: f64::NAN,
                tail_lo: 0.0,
                tail_hi: 0.0,
                ladder: vec![],
                divergent: false,
            })
        }
    }
}

/// Integrates a nonnegative vertical profile `g(y)` (already including the
/// measure) and assembles a [`MixedNormReport`].
pub(crate) fn mixed_from_integrand<G>(g: &G, q: f64, scheme: &PanelScheme) -> Result<MixedNormReport>
where
    G: Fn(f64) -> f64 + Sync,
{
    let r = integrate_auto_limited(g, scheme, 1e-10, MIXED_LIMIT)?;
    let half = (-(r.lo.log2().round() as i32)).min(r.hi.log2().round() as i32).max(4);
    let ladder_j = [(half / 4).max(4), (half / 2).max(4), half];
    // Each rung carries its own extrapolated tails, so a convergent integrand
    // with a slow power tail gives a flat ladder.
    let ladder: Vec<(i32, f64)> = ladder_j
        .iter()
        .map(|&j| -> Result<(i32, f64)> {
            let s = scheme.with_domain(-j, j);
            let v: f64 = panels(g, s.j_lo as f64, s.j_hi as f64, s.panels_per_octave, s.nodes_per_panel)?
                .iter()
                .map(|p| p.fine)
                .sum();
            let (a, b) = (2f64.powi(-j), 2f64.powi(j));
            Ok((j, v + tail_below(g, a) + tail_above(g, b)))
        })
        .collect::<Result<_>>()?;
    let grows = ladder.windows(2).any(|w| w[0].1 > 0.0 && w[1].1 >= DIVERGENCE_GROWTH * w[0].1);
    let integral = r.total();
    let divergent = !integral.is_finite() || grows;
    Ok(MixedNormReport {
        norm: if divergent { f64::INFINITY } else { integral.max(0.0).powf(1.0 / q) },
        integral: if divergent { f64::INFINITY } else { integral },
        error_estimate: r.error_estimate,
        tail_lo: r.tail_lo,
        tail_hi: r.tail_hi,
        ladder,
        divergent,
    })
}

/// Mixed norm of an evaluator directly (no sampled grid).
pub fn mixed_norm_fn(f: Arc<dyn HalfPlaneFn>, params: &SpaceParams, spec: &WeightSpec, scheme: &PanelScheme) -> Result<MixedNormReport> {
    mixed_norm_ref(f.as_ref(), params, spec, scheme)
}

/// [`mixed_norm_fn`] for a borrowed evaluator.
pub fn mixed_norm_ref(f: &dyn HalfPlaneFn, params: &SpaceParams, spec: &WeightSpec, scheme: &PanelScheme) -> Result<MixedNormReport> {
    scheme.validate()?;
    let (p, q, alpha) = (params.p, params.q, params.alpha);
    let g = move |y: f64| {
        let (v, t) = slice_integral(f, p, y);
        let s = v + t;
        if s == 0.0 {
            0.0
        } else {
            (s.ln() * q / p + spec.ln_eval(y) + alpha * y.ln()).exp()
        }
    };
    mixed_from_integrand(&g, q, scheme)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{beta as beta_fn, gamma};
    use crate::weights::{GrowthFunction, WeightSpec};
    use std::f64::consts::PI;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in [2, 5, 8, 16, 32] {
            let r = gauss_legendre(n);
            let s: f64 = r.weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-14);
            // x^{2n-2} is the highest even monomial integrated exactly
            let d = 2 * n - 2;
            let v: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(d as i32)).sum();
            assert!(rel(v, 2.0 / (d as f64 + 1.0)) < 1e-12, "n={n}");
        }
    }

    #[test]
    fn halfline_examples() {
        let s = PanelScheme::default().with_domain(0, 1);
        let r = integrate_halfline(|y| y, &s).unwrap();
        assert!(rel(r.value, 1.5) < 1e-13);

        let r = integrate_halfline(|y| 1.0 / ((1.0 + y) * (1.0 + y)), &PanelScheme::default()).unwrap();
        let (a, b) = (2f64.powi(-20), 2f64.powi(20));
        let exact = 1.0 / (1.0 + a) - 1.0 / (1.0 + b);
        assert!(rel(r.value, exact) < 1e-13);
        assert!(r.error_estimate < 1e-10);

        let r = integrate_auto(|y: f64| y.powf(-0.5) * (-y).exp(), &PanelScheme::default(), 1e-13).unwrap();
        assert!(rel(r.total(), gamma(0.5)) < 1e-10);
        assert!(rel(r.total(), PI.sqrt()) < 1e-10);
    }

    #[test]
    fn non_finite_integrand_reports_location() {
        let r = integrate_halfline(|y| if y > 4.0 && y < 5.0 { f64::NAN } else { 1.0 }, &PanelScheme::default());
        match r {
            Err(LabError::Integration { location }) => assert!(location > 4.0 && location < 5.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn tails_flag_divergence() {
        let r = integrate_auto(|y: f64| 1.0 / y, &PanelScheme::default(), 1e-8).unwrap();
        assert!(!r.is_finite());
        let r = integrate_auto(|y: f64| (-0.5 * (y.ln() + y.ln_1p())).exp(), &PanelScheme::default(), 1e-12).unwrap();
        assert!(!r.is_finite());
        let r = integrate_auto(|y: f64| 1.0 / (y.sqrt() * (1.0 + y)), &PanelScheme::default(), 1e-12).unwrap();
        assert!(rel(r.total(), PI) < 1e-9);
    }

    #[test]
    fn refinement_within_estimate() {
        let f = |y: f64| y.powf(0.3) / (1.0 + y).powi(3);
        let s = PanelScheme::default().with_domain(-4, 4);
        let a = integrate_halfline(f, &s).unwrap();
        let b = integrate_halfline(f, &s.refined()).unwrap();
        assert!((a.value - b.value).abs() <= a.error_estimate);
    }

    #[test]
    fn interval_mass_unweighted() {
        let flat = WeightSpec::trivial();
        let m = interval_mass(&flat, 1.0, 2.0, &PanelScheme::default()).unwrap();
        assert!(rel(m.mass, 2.0) < 1e-12);
        assert!(rel(m.ratio, 0.5) < 1e-12);
        for beta in [-0.9, -0.5, 0.0, 0.7, 3.0] {
            for t in [1e-5, 0.3, 1.0, 17.0, 1e6] {
                let m = interval_mass(&flat, beta, t, &PanelScheme::default()).unwrap();
                assert!(rel(m.ratio, 1.0 / (1.0 + beta)) < 1e-10, "beta={beta} t={t}");
            }
        }
        assert!(interval_mass(&flat, -1.0, 1.0, &PanelScheme::default()).is_err());
    }

    #[test]
    fn interval_mass_refined_oracle() {
        let w = WeightSpec::new(1, 1, -1.0, GrowthFunction::power(1.0, 1.0).unwrap()).unwrap();
        let t = 2f64.powi(-10);
        let a = interval_mass(&w, 0.0, t, &PanelScheme::default()).unwrap();
        let b = interval_mass(&w, 0.0, t, &PanelScheme::default().refined()).unwrap();
        assert!(rel(a.mass, b.mass) < 1e-9);
        assert!(a.ratio > 0.5 && a.ratio < 1.5);
    }

    #[test]
    fn forelli_rudin_unweighted() {
        let flat = WeightSpec::trivial();
        let r = forelli_rudin(&flat, 1.0, 0.0, 3.0, &PanelScheme::default()).unwrap();
        assert!(rel(r.value, 1.0 / 3.0) < 1e-10);
        assert!(rel(r.ratio, 1.0) < 1e-10);
        let r = forelli_rudin(&flat, 0.7, 1.3, 0.2, &PanelScheme::default()).unwrap();
        assert!(rel(r.value, 0.2f64.powf(-0.7) * beta_fn(2.3, 0.7)) < 1e-9);
        assert!(forelli_rudin(&flat, 0.0, 0.0, 1.0, &PanelScheme::default()).is_err());
    }

    #[test]
    fn slice_norm_closed_form() {
        let f: Arc<dyn HalfPlaneFn> = Arc::new(|z: Complex64| (z + Complex64::i()).powi(-2));
        let g = GridFunction::from_fn(f, &GridShape { nx: 33, ny: 9, ..Default::default() }).unwrap();
        let n = slice_pnorm(&g, 2.0, 1.0).unwrap();
        assert!(rel(n, (PI / 16.0).sqrt()) < 1e-12, "{}", rel(n, (PI / 16.0).sqrt()));
        let ns: Vec<f64> = [0.5, 1.0, 2.0].iter().map(|&y| slice_pnorm(&g, 2.0, y).unwrap()).collect();
        assert!(ns[0] > ns[1] && ns[1] > ns[2]);
        assert!(slice_pnorm(&g, 0.5, 1.0).is_err());
    }

    #[test]
    fn zero_function_norms() {
        let z = GridFunction::zero(&GridShape { nx: 9, ny: 5, ..Default::default() });
        assert_eq!(slice_pnorm(&z, 2.0, 1.0).unwrap(), 0.0);
        let sp = SpaceParams::new(2.0, 2.0, 0.0, 0.0).unwrap();
        let r = mixed_norm(&z, &sp, &WeightSpec::trivial(), &PanelScheme::default()).unwrap();
        assert_eq!(r.norm, 0.0);
        assert!(!r.divergent);
    }

    #[test]
    fn mixed_norm_closed_form_and_scaling() {
        // p = q = 2, α = 0: ∫∫ |x + i(y+1)|^{-6} dx dy = ∫ (3π/8)(y+1)^{-5} dy = 3π/32
        let f: Arc<dyn HalfPlaneFn> = Arc::new(|z: Complex64| (z + Complex64::i()).powi(-3));
        let sp = SpaceParams::new(2.0, 2.0, 0.0, 0.0).unwrap();
        let flat = WeightSpec::trivial();
        let r = mixed_norm_fn(f.clone(), &sp, &flat, &PanelScheme::default()).unwrap();
        assert!(rel(r.integral, 3.0 * PI / 32.0) < 1e-9, "{}", r.integral);
        assert!(!r.divergent);
        let r2 = mixed_norm_fn(f.clone(), &sp, &flat, &PanelScheme::default().refined()).unwrap();
        assert!(rel(r.norm, r2.norm) < 1e-6);

        // f(2z): the norm scales by 2^{-(1+α)/q - 1/p}
        let fc: Arc<dyn HalfPlaneFn> = Arc::new(|z: Complex64| (2.0 * z + Complex64::i()).powi(-3));
        for (p, q, alpha) in [(2.0, 2.0, 0.0), (1.5, 3.0, 0.5), (3.0, 1.0, -0.5)] {
            let sp = SpaceParams::new(p, q, alpha, 0.0).unwrap();
            let a = mixed_norm_fn(f.clone(), &sp, &flat, &PanelScheme::default()).unwrap().norm;
            let b = mixed_norm_fn(fc.clone(), &sp, &flat, &PanelScheme::default()).unwrap().norm;
            assert!(rel(b, 2f64.powf(-(1.0 + alpha) / q - 1.0 / p) * a) < 1e-8);
        }
    }

    #[test]
    fn mixed_norm_flags_divergence() {
        // |f|^2 slices ~ (y+1)^{-1}; with α = 0 the vertical integral diverges.
        let f: Arc<dyn HalfPlaneFn> = Arc::new(|z: Complex64| (z + Complex64::i()).powi(-1));
        let sp = SpaceParams::new(2.0, 2.0, 0.0, 0.0).unwrap();
        let r = mixed_norm_fn(f, &sp, &WeightSpec::trivial(), &PanelScheme::default()).unwrap();
        assert!(r.divergent);
    }

    #[test]
    fn sampled_grid_trapezoid_close_to_evaluator() {
        let f: Arc<dyn HalfPlaneFn> = Arc::new(|z: Complex64| (z + Complex64::i()).powi(-2));
        let shape = GridShape { x_half: 200.0, nx: 4001, y_lo: 0.25, y_hi: 4.0, ny: 5 };
        let g = GridFunction::from_fn(f, &shape).unwrap();
        let plain = GridFunction::from_samples(g.x_nodes.clone(), g.y_nodes.clone(), g.values.clone()).unwrap();
        for &y in &g.y_nodes {
            let a = slice_pnorm(&g, 2.0, y).unwrap();
            let b = slice_pnorm(&plain, 2.0, y).unwrap();
            assert!(rel(b, a) < 1e-4);
        }
        assert!(slice_pnorm(&plain, 2.0, 0.3).is_err());
    }

    #[test]
    fn grid_validation() {
        assert!(GridFunction::from_samples(vec![0.0, 0.0], vec![1.0, 2.0], vec![Complex64::new(0.0, 0.0); 4]).is_err());
        assert!(GridFunction::from_samples(vec![0.0, 1.0], vec![1.0, 2.0], vec![Complex64::new(f64::NAN, 0.0); 4]).is_err());
        let mut g = GridFunction::from_fn(Arc::new(|z: Complex64| z.inv()), &GridShape { nx: 5, ny: 3, ..Default::default() }).unwrap();
        g.values[3] += 1.0;
        assert!(g.validate().is_err());
    }
}
