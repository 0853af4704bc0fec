//! Bergman kernels and projections on the upper half-plane.
//!
//! `K_α(z, w) = c_α (z − w̄)^{-(2+α)}` with
//! `c_α = (α+1) 2^α / π · e^{iπ(2+α)/2}`, so that `K_α(i, i) = (α+1)/(4π)`.
//! Powers use the principal branch; `z − w̄` lies in the upper half-plane.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, LabError, Result};
use crate::par;
use crate::quadrature::{
    gauss_legendre, log_nodes, mixed_norm_fn, GridFunction, HalfPlaneFn, MixedNormReport, PanelScheme, SpaceParams,
    XRule, XWindow, DIVERGENCE_GROWTH,
};
use crate::weights::{omega0_eval, WeightSpec};

/// A point of the upper half-plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexPoint {
    pub re: f64,
    pub im: f64,
}

impl ComplexPoint {
    pub fn new(re: f64, im: f64) -> Result<Self> {
        if !(im > 0.0) {
            return Err(domain("imaginary part", im));
        }
        if !re.is_finite() {
            return Err(domain("real part", re));
        }
        Ok(ComplexPoint { re, im })
    }

    pub fn from_complex(z: Complex64) -> Result<Self> {
        ComplexPoint::new(z.re, z.im)
    }

    pub fn c(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// `c_α = (α+1) 2^α / π · e^{iπ(2+α)/2}`.
pub fn c_alpha(alpha: f64) -> Complex64 {
    Complex64::from_polar((alpha + 1.0) * 2f64.powf(alpha) / PI, PI * (2.0 + alpha) / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub alpha: f64,
    pub c_alpha: Complex64,
}

impl KernelParams {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > -1.0) {
            return Err(domain("alpha", alpha));
        }
        Ok(KernelParams { alpha, c_alpha: c_alpha(alpha) })
    }

    /// `K_α(z, w)` without domain checks.
    #[inline]
    pub fn kernel(&self, z: Complex64, w: Complex64) -> Complex64 {
        self.c_alpha * cpow_neg(z - w.conj(), 2.0 + self.alpha)
    }
}

/// `u^{-e}` on the principal branch, with an integer fast path.
#[inline]
pub fn cpow_neg(u: Complex64, e: f64) -> Complex64 {
    if e.fract() == 0.0 && e.abs() < 64.0 {
        u.powi(-(e as i32))
    } else {
        (-e * u.ln()).exp()
    }
}

/// `K_α(z, w)`.
pub fn kernel_eval(kp: &KernelParams, z: ComplexPoint, w: ComplexPoint) -> Result<Complex64> {
    let z = ComplexPoint::new(z.re, z.im)?;
    let w = ComplexPoint::new(w.re, w.im)?;
    Ok(kp.kernel(z.c(), w.c()))
}

/// One term `coef · (z − w̄)^{-order}` with `w` in the upper half-plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coef: Complex64,
    pub anchor: Complex64,
    pub order: i32,
}

/// Finite sums `Σ c_n (z − w̄_n)^{-m_n}` with `Im w_n > 0` and `m_n ≥ 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoloTestFunction {
    pub terms: Vec<Term>,
}

impl HoloTestFunction {
    pub fn new(terms: Vec<Term>) -> Result<Self> {
        for t in &terms {
            if !(t.anchor.im > 0.0) {
                return Err(domain("anchor imaginary part", t.anchor.im));
            }
            if t.order < 2 {
                return Err(domain("order", t.order as f64));
            }
        }
        Ok(HoloTestFunction { terms })
    }

    /// `(z + c·i)^{-m}`
    pub fn shifted_power(c: f64, m: i32) -> Self {
        HoloTestFunction::new(vec![Term { coef: Complex64::new(1.0, 0.0), anchor: Complex64::new(0.0, c), order: m }]).unwrap()
    }

    pub fn zero() -> Self {
        HoloTestFunction { terms: vec![] }
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.terms.iter().map(|t| t.coef * (z - t.anchor.conj()).powi(-t.order)).sum()
    }

    pub fn derivative(&self, z: Complex64) -> Complex64 {
        self.terms
            .iter()
            .map(|t| -(t.order as f64) * t.coef * (z - t.anchor.conj()).powi(-t.order - 1))
            .sum()
    }

    /// `z ↦ f(cz)` for `c > 0`.
    pub fn dilate(&self, c: f64) -> Self {
        HoloTestFunction {
            terms: self
                .terms
                .iter()
                .map(|t| Term { coef: t.coef * c.powi(-t.order), anchor: t.anchor / c, order: t.order })
                .collect(),
        }
    }

    /// `z ↦ f(z + a)` for real `a`.
    pub fn translate(&self, a: f64) -> Self {
        HoloTestFunction {
            terms: self.terms.iter().map(|t| Term { anchor: t.anchor - a, ..*t }).collect(),
        }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        HoloTestFunction { terms: self.terms.iter().map(|t| Term { coef: t.coef * c, ..*t }).collect() }
    }

    pub fn label(&self) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        self.terms
            .iter()
            .map(|t| {
                let p = -t.anchor.conj() + Complex64::new(0.0, 0.0);
                format!("{}*(z{:+}{:+}i)^-{}", fmt_c(t.coef), p.re, p.im, t.order)
            })
            .collect::<Vec<_>>()
            .join(" + ")
    }
}

fn fmt_c(c: Complex64) -> String {
    if c.im == 0.0 {
        format!("{}", c.re)
    } else {
        format!("({}{:+}i)", c.re, c.im)
    }
}

impl HalfPlaneFn for HoloTestFunction {
    fn eval(&self, z: Complex64) -> Complex64 {
        HoloTestFunction::eval(self, z)
    }

    fn x_window(&self, y: f64) -> XWindow {
        if self.terms.is_empty() {
            return XWindow::new(0.0, 0.0, y + 1.0);
        }
        let lo = self.terms.iter().map(|t| t.anchor.re).fold(f64::INFINITY, f64::min);
        let hi = self.terms.iter().map(|t| t.anchor.re).fold(f64::NEG_INFINITY, f64::max);
        let v = self.terms.iter().map(|t| t.anchor.im).fold(f64::INFINITY, f64::min);
        let w = self.terms.iter().map(|t| t.anchor.im).fold(0.0, f64::max);
        XWindow { lo, hi, width: y + v, widest: y + w }
    }
}

/// `y·f'(z)` of a test function.
#[derive(Debug, Clone)]
pub struct ScaledDerivative(pub HoloTestFunction);

impl HalfPlaneFn for ScaledDerivative {
    fn eval(&self, z: Complex64) -> Complex64 {
        z.im * self.0.derivative(z)
    }
    fn x_window(&self, y: f64) -> XWindow {
        self.0.x_window(y)
    }
}

/// The six-member test family used throughout.
pub fn builtin_family() -> Vec<HoloTestFunction> {
    let one = Complex64::new(1.0, 0.0);
    vec![
        HoloTestFunction::shifted_power(1.0, 3),
        HoloTestFunction::shifted_power(1.0, 4),
        HoloTestFunction::shifted_power(2.0, 3),
        HoloTestFunction::shifted_power(2.0, 4),
        HoloTestFunction::new(vec![
            Term { coef: one, anchor: Complex64::new(1.0, 1.0), order: 3 },
            Term { coef: Complex64::new(0.5, 0.0), anchor: Complex64::new(-1.0, 2.0), order: 4 },
        ])
        .unwrap(),
        HoloTestFunction::new(vec![Term { coef: one, anchor: Complex64::new(0.5, 1.5), order: 2 }]).unwrap(),
    ]
}

/// Result of a planar integral with its truncation trend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanarReport {
    pub value: Complex64,
    /// `(J, integral over 2^{-J} < v < 2^{J})`
    pub trend: Vec<(i32, Complex64)>,
    /// extrapolated contribution beyond the `v`-domain (modulus)
    pub tail: f64,
    pub divergent: bool,
}

/// Horizontal resolution for planar rules: `(panel width factor, nodes)`.
pub type XResolution = (f64, usize);

/// Default horizontal resolution.
pub const FINE_X: XResolution = (0.5, 8);
/// Cheaper horizontal resolution for nested integrals.
pub const COARSE_X: XResolution = (1.0, 6);

/// `∫_0^∞ v^β ∫_ℝ g(u + iv) du dv` on the dyadic `v`-scheme.
pub fn integrate_plane<G, W>(g: &G, window: &W, beta: f64, scheme: &PanelScheme, xres: XResolution) -> Result<PlanarReport>
where
    G: Fn(Complex64) -> Complex64 + Sync,
    W: Fn(f64) -> XWindow + Sync,
{
    scheme.validate()?;
    let slice = |v: f64| -> Complex64 {
        let rule = XRule::with_resolution(window(v), xres.0, xres.1);
        let mut s = Complex64::new(0.0, 0.0);
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            s += *w * g(Complex64::new(*x, v));
        }
        s * v.powf(beta)
    };
    let (vs, ws) = scheme.nodes();
    let vals = par::map(vs.len(), |i| ws[i] * slice(vs[i]));
    if let Some(bad) = vals.iter().position(|c| !(c.re.is_finite() && c.im.is_finite())) {
        return Err(LabError::Integration { location: vs[bad] });
    }
    let jmax = (-scheme.j_lo).min(scheme.j_hi);
    let levels: Vec<i32> = [jmax / 4, jmax / 2, jmax].into_iter().filter(|&j| j >= 1).collect();
    let trend: Vec<(i32, Complex64)> = levels
        .iter()
        .map(|&j| {
            let (lo, hi) = (2f64.powi(-j), 2f64.powi(j));
            let s: Complex64 = vs.iter().zip(&vals).filter(|(v, _)| **v >= lo && **v <= hi).map(|(_, c)| *c).sum();
            (j, s)
        })
        .collect();
    let mut value: Complex64 = vals.iter().sum();
    // Power-law tails in v from the modulus slope.
    let (a, b) = (2f64.powi(scheme.j_lo), 2f64.powi(scheme.j_hi));
    let (sa, sa2) = (slice(a), slice(2.0 * a));
    let (sb, sb2) = (slice(b), slice(0.5 * b));
    let mut divergent = false;
    let mut tail = 0.0;
    if sa.norm() > 0.0 {
        let e = (sa2.norm() / sa.norm()).log2();
        if e + 1.0 <= 1e-3 {
            divergent = true;
        } else {
            value += sa * a / (e + 1.0);
            tail += sa.norm() * a / (e + 1.0);
        }
    }
    if sb.norm() > 0.0 {
        let e = (sb.norm() / sb2.norm()).log2();
        if e + 1.0 >= -1e-3 {
            divergent = true;
        } else {
            value += sb * b / (-(e + 1.0));
            tail += sb.norm() * b / (-(e + 1.0));
        }
    }
    Ok(PlanarReport { value, trend, tail, divergent })
}

fn evaluator(f: &GridFunction) -> Result<Arc<dyn HalfPlaneFn>> {
    f.evaluator.clone().ok_or(LabError::Unsupported("planar quadrature needs a grid function with an evaluator"))
}

fn check_orders(beta: f64, kp: &KernelParams) -> Result<()> {
    if (beta - kp.alpha).abs() > 1e-14 {
        return Err(LabError::Config {
            field: "beta".into(),
            reason: format!("measure exponent {beta} differs from kernel order {}", kp.alpha),
        });
    }
    Ok(())
}

/// Horizontal window of the kernel `w ↦ K(z, w)` at height `v`.
fn kernel_window(z: Complex64, v: f64) -> XWindow {
    XWindow::new(z.re, z.re, z.im + v)
}

/// `P_β f(z) = ∫ K_β(z, w) f(w) v^β dA(w)` for an evaluator-backed `f`.
pub fn project_fn(f: &dyn HalfPlaneFn, kp: &KernelParams, z: ComplexPoint, scheme: &PanelScheme) -> Result<PlanarReport> {
    let zc = z.c();
    let g = |w: Complex64| kp.kernel(zc, w) * f.eval(w);
    let win = |v: f64| f.x_window(v).union(&kernel_window(zc, v));
    integrate_plane(&g, &win, kp.alpha, scheme, FINE_X)
}

/// `P_β f(z)`; `beta` is the measure exponent and must equal `kp.alpha`.
pub fn project(f: &GridFunction, beta: f64, kp: &KernelParams, z: ComplexPoint, scheme: &PanelScheme) -> Result<PlanarReport> {
    check_orders(beta, kp)?;
    let ev = evaluator(f)?;
    project_fn(ev.as_ref(), kp, z, scheme)
}

/// `P_β^+ |f|(z) = ∫ |K_β(z, w)| |f(w)| v^β dA(w)`.
pub fn project_plus_fn(f: &dyn HalfPlaneFn, kp: &KernelParams, z: ComplexPoint, scheme: &PanelScheme, xres: XResolution) -> Result<f64> {
    let zc = z.c();
    let g = |w: Complex64| Complex64::new(kp.kernel(zc, w).norm() * f.eval(w).norm(), 0.0);
    let win = |v: f64| f.x_window(v).union(&kernel_window(zc, v));
    let r = integrate_plane(&g, &win, kp.alpha, scheme, xres)?;
    if r.divergent {
        return Err(LabError::Divergent("P+ integral".into()));
    }
    Ok(r.value.re)
}

/// `P_β^+ |f|(z)`.
pub fn project_plus(f: &GridFunction, beta: f64, kp: &KernelParams, z: ComplexPoint, scheme: &PanelScheme) -> Result<f64> {
    check_orders(beta, kp)?;
    let ev = evaluator(f)?;
    project_plus_fn(ev.as_ref(), kp, z, scheme, FINE_X)
}

/// `|c_β| ∫_ℝ (1+t²)^{-(2+β)/2} dt`, the `L¹(du)` mass of `|K_β(x+iy, ·+iv)|`
/// times `(y+v)^{1+β}`.
pub fn slice_kernel_mass(beta: f64) -> f64 {
    c_alpha(beta).norm() * PI.sqrt() * crate::special::gamma((1.0 + beta) / 2.0) / crate::special::gamma((2.0 + beta) / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceDomination {
    pub y: f64,
    /// `‖P_β^+ |f| (·+iy)‖_p`
    pub lhs: f64,
    /// `C·H_β(‖f(·+iv)‖_p)(y)` with `C` the slice kernel mass
    pub rhs: f64,
    pub ratio: f64,
}

/// Checks `‖(P_β^+ f)(·+iy)‖_p ≤ C·H_β(v ↦ ‖f(·+iv)‖_p)(y)` on `y_grid`.
pub fn slice_domination(f: &dyn HalfPlaneFn, beta: f64, p: f64, y_grid: &[f64]) -> Result<Vec<SliceDomination>> {
    let kp = KernelParams::new(beta)?;
    let inner = PanelScheme { j_lo: -14, j_hi: 14, nodes_per_panel: 8, panels_per_octave: 2 };
    let c = slice_kernel_mass(beta);
    y_grid
        .iter()
        .map(|&y| {
            let win = f.x_window(y).union(&XWindow::new(0.0, 0.0, y));
            let rule = XRule::with_resolution(win, COARSE_X.0, COARSE_X.1);
            let vals: Vec<Result<f64>> = rule
                .nodes
                .iter()
                .map(|&x| project_plus_fn(f, &kp, ComplexPoint::new(x, y)?, &inner, COARSE_X))
                .collect();
            let vals: Vec<f64> = vals.into_iter().collect::<Result<_>>()?;
            let lhs = vals.iter().zip(&rule.weights).map(|(v, w)| w * v.powf(p)).sum::<f64>().powf(1.0 / p);
            let prof = |v: f64| {
                let (s, t) = crate::quadrature::slice_integral(f, p, v);
                (s + t).powf(1.0 / p)
            };
            let h = crate::quadrature::integrate_auto(
                |v: f64| prof(v) * (beta * v.ln() - (1.0 + beta) * (y + v).ln()).exp(),
                &PanelScheme { j_lo: -16, j_hi: 16, nodes_per_panel: 8, panels_per_octave: 2 },
                1e-10,
            )?;
            let rhs = c * h.total();
            Ok(SliceDomination { y, lhs, rhs, ratio: lhs / rhs })
        })
        .collect()
}

/// The adjoint test function `P_β^* g` for `g = ω^{-k}(y) y^{-α} χ_{B(i,1)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdjointWitness {
    /// `P_β^* g(z)` from the defining integral
    pub value: Complex64,
    /// `c·ω^{-k}(v) v^{β−α} (z+i)^{-(2+β)}` with the numerically computed `c`
    pub closed_form: Complex64,
    /// `c`, computed by quadrature of the kernel over the disk
    pub c_numeric: Complex64,
    /// `π c_β` from the mean value property
    pub c_mean_value: Complex64,
}

/// Polar rule on `B(i, 1)`: `(point, area weight)`.
fn disk_rule() -> Vec<(Complex64, f64)> {
    let gl = gauss_legendre(24);
    let nt = 96;
    let mut out = Vec::with_capacity(gl.nodes.len() * nt);
    for (r, wr) in gl.nodes.iter().zip(&gl.weights) {
        let r = 0.5 * (r + 1.0);
        let wr = 0.5 * wr;
        for k in 0..nt {
            let th = 2.0 * PI * k as f64 / nt as f64;
            out.push((Complex64::i() + Complex64::from_polar(r, th), wr * r * 2.0 * PI / nt as f64));
        }
    }
    out
}

/// `P_β^* g(z) = ω^{-k}(v) v^{β−α} ∫ K_β(z, w) g(w) ω^k(Im w) (Im w)^α dA(w)` for
/// `g = ω^{-k}(Im w)(Im w)^{-α} χ_{B(i,1)}`, evaluated by disk quadrature,
/// together with its closed form.
pub fn adjoint_witness(params: &SpaceParams, spec: &WeightSpec, z: ComplexPoint) -> Result<AdjointWitness> {
    let kp = KernelParams::new(params.beta)?;
    let alpha = params.alpha;
    let zc = z.c();
    let rule = disk_rule();
    let mut integral = Complex64::new(0.0, 0.0);
    let mut disk = Complex64::new(0.0, 0.0);
    for (w, a) in &rule {
        let y = w.im;
        let g = (-spec.ln_eval(y) - alpha * y.ln()).exp();
        let k = kp.kernel(zc, *w);
        integral += *a * k * g * (spec.ln_eval(y) + alpha * y.ln()).exp();
        disk += *a * k;
    }
    let pre = (-spec.ln_eval(z.im) + (params.beta - alpha) * z.im.ln()).exp();
    let shape = cpow_neg(zc + Complex64::i(), 2.0 + params.beta);
    let c_numeric = disk / shape;
    Ok(AdjointWitness {
        value: pre * integral,
        closed_form: pre * c_numeric * shape,
        c_numeric,
        c_mean_value: PI * kp.c_alpha,
    })
}

/// `P_β^* g` as a function on the half-plane, using the mean-value constant.
#[derive(Debug, Clone, Copy)]
pub struct WitnessFn {
    pub c: Complex64,
    pub alpha: f64,
    pub beta: f64,
    pub spec: WeightSpec,
}

impl WitnessFn {
    pub fn new(params: &SpaceParams, spec: &WeightSpec) -> Self {
        WitnessFn { c: PI * c_alpha(params.beta), alpha: params.alpha, beta: params.beta, spec: *spec }
    }
}

impl HalfPlaneFn for WitnessFn {
    fn eval(&self, z: Complex64) -> Complex64 {
        let v = z.im;
        let pre = (-self.spec.ln_eval(v) + (self.beta - self.alpha) * v.ln()).exp();
        self.c * pre * cpow_neg(z + Complex64::i(), 2.0 + self.beta)
    }

    fn x_window(&self, y: f64) -> XWindow {
        XWindow::new(0.0, 0.0, y + 1.0)
    }
}

/// `∫ |w|^{q'} ...` membership predicate at `k = 0`: `y^{(β−α)q'+α}` is integrable at 0.
pub fn witness_membership_predicate(params: &SpaceParams) -> bool {
    if params.q == 1.0 {
        params.beta > params.alpha
    } else {
        (params.beta - params.alpha) * params.q_conj + params.alpha > -1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    /// `α + 1 < q(β + 1)`
    pub predicate: bool,
    /// the adjoint witness lies in the dual space on the truncation ladder
    pub bounded: bool,
    /// ladder of truncated dual norms (`q'`-th powers, or sups when `q = 1`)
    pub ladder: Vec<(i32, f64)>,
    pub detail: Option<MixedNormReport>,
}

/// Scheme used by the projection probe.
pub fn probe_scheme() -> PanelScheme {
    PanelScheme { j_lo: -20, j_hi: 20, nodes_per_panel: 8, panels_per_octave: 1 }
}

/// Truncation probe for `P_β` on `L^{p,q}(ω^k y^α)`: the adjoint witness must
/// have finite `L^{p',q'}(ω^k y^α)` norm (a finite sup of slice norms when
/// `q = 1`).
pub fn projection_probe(params: &SpaceParams, spec: &WeightSpec) -> Result<ProbeReport> {
    let w = WitnessFn::new(params, spec);
    let predicate = params.admissible();
    let pc = params.p_conj;
    let slice_norm = |v: f64| -> f64 {
        let rule = XRule::with_resolution(w.x_window(v), COARSE_X.0, COARSE_X.1);
        if pc.is_infinite() {
            rule.nodes.iter().map(|&x| w.eval(Complex64::new(x, v)).norm()).fold(0.0, f64::max)
        } else {
            let (s, t) = rule.integrate(|x| w.eval(Complex64::new(x, v)).norm().powf(pc));
            (s + t).powf(1.0 / pc)
        }
    };
    if params.q == 1.0 {
        let ladder: Vec<(i32, f64)> = [25, 50, 100, 200]
            .iter()
            .map(|&j| {
                let (vs, _) = log_nodes(-(j as f64), j as f64, 1, 2);
                (j, vs.iter().map(|&v| slice_norm(v)).fold(0.0, f64::max))
            })
            .collect();
        let bounded = ladder.iter().all(|l| l.1.is_finite())
            && !ladder.windows(2).any(|p| p[1].1 >= DIVERGENCE_GROWTH * p[0].1);
        return Ok(ProbeReport { predicate, bounded, ladder, detail: None });
    }
    let dual = SpaceParams::new(if pc.is_infinite() { 1.0 } else { pc }, params.q_conj, params.alpha, params.beta)?;
    let r = if pc.is_infinite() {
        let q = params.q_conj;
        let alpha = params.alpha;
        let g = move |v: f64| {
            let s = slice_norm(v);
            if s == 0.0 {
                0.0
            } else {
                (q * s.ln() + spec.ln_eval(v) + alpha * v.ln()).exp()
            }
        };
        crate::quadrature::mixed_from_integrand(&g, q, &probe_scheme())?
    } else {
        mixed_norm_fn(Arc::new(w), &dual, spec, &probe_scheme())?
    };
    Ok(ProbeReport { predicate, bounded: !r.divergent, ladder: r.ladder.clone(), detail: Some(r) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointwiseReport {
    /// `sup |f| y^{(1+α)/q + 1/p} ω₀(y)^{k/q} / ‖f‖` over the grid
    pub ratio: f64,
    pub norm: f64,
    pub argmax: (f64, f64),
}

/// Pointwise growth bound for the space with measure `ω^k y^α`, `k ≤ 0`:
/// `|f(x+iy)| ≲ ω₀(y)^{-k/q} y^{-(1+α)/q − 1/p} ‖f‖`.
pub fn pointwise_bound_check(f: &HoloTestFunction, params: &SpaceParams, spec: &WeightSpec, grid: &[ComplexPoint], scheme: &PanelScheme) -> Result<PointwiseReport> {
    if spec.k > 0.0 {
        return Err(domain("k (pointwise bound is for measure exponents k <= 0)", spec.k));
    }
    if f.terms.is_empty() {
        return Ok(PointwiseReport { ratio: 0.0, norm: 0.0, argmax: (0.0, 0.0) });
    }
    let norm = mixed_norm_fn(Arc::new(f.clone()), params, spec, scheme)?;
    if norm.divergent {
        return Err(LabError::Divergent("test function not in the space".into()));
    }
    let (p, q, alpha) = (params.p, params.q, params.alpha);
    let mut best = (0.0, (0.0, 0.0));
    for z in grid {
        let y = z.im;
        let w0 = omega0_eval(spec.eps1, spec.eps2, y)?;
        let r = f.eval(z.c()).norm() * y.powf((1.0 + alpha) / q + 1.0 / p) * w0.powf(spec.k / q) / norm.norm;
        if r > best.0 {
            best = (r, (z.re, z.im));
        }
    }
    Ok(PointwiseReport { ratio: best.0, norm: norm.norm, argmax: best.1 })
}

/// `∫ f(z) conj(g(z)) y^α dA(z)` for evaluator-backed grid functions.
pub fn duality_pairing(f: &GridFunction, g: &GridFunction, alpha: f64, scheme: &PanelScheme) -> Result<Complex64> {
    let (fe, ge) = (evaluator(f)?, evaluator(g)?);
    let h = |z: Complex64| fe.eval(z) * ge.eval(z).conj();
    let win = |v: f64| fe.x_window(v).union(&ge.x_window(v));
    let r = integrate_plane(&h, &win, alpha, scheme, FINE_X)?;
    if r.divergent {
        return Err(LabError::Divergent("pairing".into()));
    }
    Ok(r.value)
}

/// Tensor Gauss rule on a rectangle `[u0, u1] × [v0, v1]`.
#[derive(Debug, Clone)]
pub struct BoxRule {
    pub points: Vec<Complex64>,
    pub weights: Vec<f64>,
}

impl BoxRule {
    pub fn new(u: (f64, f64), v: (f64, f64), panels: usize, nodes: usize) -> Result<Self> {
        if !(v.0 > 0.0 && v.1 > v.0 && u.1 > u.0) {
            return Err(domain("box", v.0));
        }
        let gl = gauss_legendre(nodes);
        let axis = |a: f64, b: f64| -> Vec<(f64, f64)> {
            let h = (b - a) / panels as f64;
            let mut out = Vec::new();
            for m in 0..panels {
                let c = a + (m as f64 + 0.5) * h;
                for (x, w) in gl.nodes.iter().zip(&gl.weights) {
                    out.push((c + 0.5 * h * x, 0.5 * h * w));
                }
            }
            out
        };
        let (us, vs) = (axis(u.0, u.1), axis(v.0, v.1));
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (x, wx) in &us {
            for (y, wy) in &vs {
                points.push(Complex64::new(*x, *y));
                weights.push(wx * wy);
            }
        }
        Ok(BoxRule { points, weights })
    }

    /// `∫ h(w) (Im w)^β dA(w)` over the box.
    pub fn integrate<H: Fn(Complex64) -> Complex64 + Sync>(&self, h: H, beta: f64) -> Complex64 {
        let vals = par::map(self.points.len(), |i| self.weights[i] * self.points[i].im.powf(beta) * h(self.points[i]));
        vals.into_iter().sum()
    }
}

/// `⟨P_β f, g⟩_β` and `⟨f, P_β g⟩_β` for functions supported in boxes.
pub fn projection_pairing<F, G>(f: &F, f_box: &BoxRule, g: &G, g_box: &BoxRule, beta: f64) -> Result<(Complex64, Complex64)>
where
    F: Fn(Complex64) -> Complex64 + Sync,
    G: Fn(Complex64) -> Complex64 + Sync,
{
    let kp = KernelParams::new(beta)?;
    let pf = |z: Complex64| f_box.integrate(|w| kp.kernel(z, w) * f(w), beta);
    let pg = |z: Complex64| g_box.integrate(|w| kp.kernel(z, w) * g(w), beta);
    let lhs = g_box.integrate(|z| pf(z) * g(z).conj(), beta);
    let rhs = f_box.integrate(|z| f(z) * pg(z).conj(), beta);
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{slice_pnorm, GridShape};
    use crate::weights::GrowthFunction;

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm()
    }

    fn pt(x: f64, y: f64) -> ComplexPoint {
        ComplexPoint::new(x, y).unwrap()
    }

    #[test]
    fn kernel_values() {
        let k0 = KernelParams::new(0.0).unwrap();
        let v = kernel_eval(&k0, pt(0.0, 1.0), pt(0.0, 1.0)).unwrap();
        assert!((v - Complex64::new(1.0 / (4.0 * PI), 0.0)).norm() < 1e-15);
        let k1 = KernelParams::new(1.0).unwrap();
        let v = kernel_eval(&k1, pt(0.0, 1.0), pt(0.0, 1.0)).unwrap();
        assert!((v - Complex64::new(1.0 / (2.0 * PI), 0.0)).norm() < 1e-15);
        for a in [-0.5, 0.3, 2.5] {
            let k = KernelParams::new(a).unwrap();
            let v = kernel_eval(&k, pt(0.0, 1.0), pt(0.0, 1.0)).unwrap();
            assert!((v - Complex64::new((a + 1.0) / (4.0 * PI), 0.0)).norm() < 1e-14);
        }
        // classical form at α = 0
        let (z, w) = (Complex64::new(0.3, 0.7), Complex64::new(-1.1, 2.0));
        let classical = -1.0 / (PI * (z - w.conj()).powi(2));
        assert!(rel(k0.kernel(z, w), classical) < 1e-14);
        assert!(kernel_eval(&k0, ComplexPoint { re: 0.0, im: -1.0 }, pt(0.0, 1.0)).is_err());
    }

    #[test]
    fn hermitian_symmetry() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for a in [0.0, 0.5, 1.7] {
            let k = KernelParams::new(a).unwrap();
            for _ in 0..100 {
                let z = Complex64::new(rng.random_range(-5.0..5.0), rng.random_range(0.01..5.0));
                let w = Complex64::new(rng.random_range(-5.0..5.0), rng.random_range(0.01..5.0));
                assert!((k.kernel(z, w) - k.kernel(w, z).conj()).norm() <= 1e-14 * k.kernel(z, w).norm());
            }
        }
    }

    #[test]
    fn test_function_algebra() {
        let f = &builtin_family()[4];
        let z = Complex64::new(0.4, 0.9);
        let h = 1e-6;
        let fd = (f.eval(z + h) - f.eval(z - h)) / (2.0 * h);
        assert!(rel(f.derivative(z), fd) < 1e-8);
        assert!(rel(f.dilate(2.0).eval(z), f.eval(2.0 * z)) < 1e-14);
        assert!(rel(f.translate(0.7).eval(z), f.eval(z + 0.7)) < 1e-14);
        assert!(HoloTestFunction::new(vec![Term { coef: Complex64::new(1.0, 0.0), anchor: Complex64::new(0.0, -1.0), order: 3 }]).is_err());
        assert!(HoloTestFunction::new(vec![Term { coef: Complex64::new(1.0, 0.0), anchor: Complex64::new(0.0, 1.0), order: 1 }]).is_err());
    }

    fn grid_of(f: HoloTestFunction) -> GridFunction {
        GridFunction::from_fn(Arc::new(f), &GridShape { nx: 9, ny: 5, ..Default::default() }).unwrap()
    }

    #[test]
    fn reproduces_test_function() {
        let f = HoloTestFunction::shifted_power(1.0, 4);
        let g = grid_of(f.clone());
        let kp = KernelParams::new(1.0).unwrap();
        for z in [pt(0.0, 1.0), pt(1.0, 2.0), pt(-2.0, 0.5)] {
            let r = project(&g, 1.0, &kp, z, &PanelScheme::default()).unwrap();
            assert!(rel(r.value, f.eval(z.c())) < 1e-6, "{z:?}: {}", rel(r.value, f.eval(z.c())));
            assert!(!r.divergent);
        }
        let r = project(&g, 1.0, &kp, pt(0.0, 1.0), &PanelScheme::default()).unwrap();
        assert!((r.value - Complex64::new(1.0 / 16.0, 0.0)).norm() < 1e-7);
        assert!(project(&g, 0.0, &kp, pt(0.0, 1.0), &PanelScheme::default()).is_err());
    }

    #[test]
    fn projection_of_zero() {
        let g = grid_of(HoloTestFunction::zero());
        let kp = KernelParams::new(0.5).unwrap();
        let r = project(&g, 0.5, &kp, pt(0.3, 1.0), &PanelScheme::default()).unwrap();
        assert_eq!(r.value, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn translation_covariance_and_triangle_inequality() {
        let f = builtin_family()[4].clone();
        let kp = KernelParams::new(0.5).unwrap();
        let s = PanelScheme::default();
        let z = pt(0.2, 0.8);
        let a = 1.3;
        let lhs = project_fn(&f.translate(a), &kp, z, &s).unwrap().value;
        let rhs = project_fn(&f, &kp, pt(z.re + a, z.im), &s).unwrap().value;
        assert!(rel(lhs, rhs) < 1e-8);
        let plus = project_plus_fn(&f.translate(a), &kp, z, &s, FINE_X).unwrap();
        assert!(lhs.norm() <= plus, "{} {plus}", lhs.norm());
    }

    #[test]
    fn slice_norm_nonincreasing_for_family() {
        for f in builtin_family() {
            let g = grid_of(f);
            let ns: Vec<f64> = (-6..=6).map(|j| slice_pnorm(&g, 2.0, 2f64.powi(j)).unwrap()).collect();
            assert!(ns.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        }
    }

    #[test]
    fn slice_kernel_mass_matches_quadrature() {
        for beta in [0.0, 1.0, -0.5] {
            let t = 2000.0;
            let v = crate::quadrature::integrate_interval(|t| (1.0 + t * t).powf(-(2.0 + beta) / 2.0), -t, t, 4000, 8)
                + 2.0 * t.powf(-(1.0 + beta)) / (1.0 + beta);
            assert!((slice_kernel_mass(beta) / (c_alpha(beta).norm() * v) - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn adjoint_witness_mean_value() {
        let spec = WeightSpec::new(1, 1, -1.0, GrowthFunction::power(1.0, 1.0).unwrap()).unwrap();
        for (alpha, beta) in [(0.0, 0.0), (0.5, 1.0), (1.0, 0.3)] {
            let params = SpaceParams::new(2.0, 2.0, alpha, beta).unwrap();
            let w = adjoint_witness(&params, &spec, pt(0.0, 2.0)).unwrap();
            assert!(rel(w.value, w.closed_form) < 1e-4);
            assert!(rel(w.c_numeric, w.c_mean_value) < 1e-10);
        }
    }

    #[test]
    fn witness_membership() {
        let p = SpaceParams::new(2.0, 2.0, 0.0, 0.0).unwrap();
        assert!(witness_membership_predicate(&p));
        let p = SpaceParams::new(2.0, 2.0, 0.0, -0.6).unwrap();
        assert!(!witness_membership_predicate(&p));
        let p = SpaceParams::new(2.0, 1.0, 0.5, 0.4).unwrap();
        assert!(!witness_membership_predicate(&p));
        let p = SpaceParams::new(2.0, 1.0, 0.5, 0.6).unwrap();
        assert!(witness_membership_predicate(&p));
    }

    #[test]
    fn probe_matches_predicate() {
        let spec = WeightSpec::new(1, 1, 1.0, GrowthFunction::power(1.0, 1.0).unwrap()).unwrap();
        for (q, beta) in [(2.0, 0.0), (2.0, -0.6), (1.0, 0.3), (1.0, -0.3), (3.0, -0.5), (3.0, -0.8)] {
            let params = SpaceParams::new(2.0, q, 0.0, beta).unwrap();
            let r = projection_probe(&params, &spec).unwrap();
            assert_eq!(r.bounded, r.predicate, "q={q} beta={beta} {:?}", r.ladder);
        }
    }

    #[test]
    fn pointwise_bound() {
        let spec = WeightSpec::new(1, 1, -1.0, GrowthFunction::power(1.0, 1.0).unwrap()).unwrap();
        let params = SpaceParams::new(2.0, 2.0, 0.0, 0.0).unwrap();
        let grid: Vec<ComplexPoint> =
            (-6..=6).flat_map(|j| (-4..=4).map(move |i| pt(i as f64, 2f64.powi(j)))).collect();
        let s = PanelScheme::default();
        let z = pointwise_bound_check(&HoloTestFunction::zero(), &params, &spec, &grid, &s).unwrap();
        assert_eq!(z.ratio, 0.0);
        let mut ratios = vec![];
        for (c, m) in [(1.0, 3), (1.0, 4), (2.0, 3), (2.0, 4)] {
            let r = pointwise_bound_check(&HoloTestFunction::shifted_power(c, m), &params, &spec, &grid, &s).unwrap();
            assert!(r.ratio.is_finite() && r.ratio > 0.0);
            ratios.push(r.ratio);
        }
        let flat = WeightSpec::trivial();
        let f = HoloTestFunction::shifted_power(1.0, 3);
        let a = pointwise_bound_check(&f, &params, &flat, &grid, &s).unwrap().ratio;
        let b = pointwise_bound_check(&f.dilate(2.0), &params, &flat, &grid, &s).unwrap().ratio;
        assert!(a / b < 2.0 && b / a < 2.0);
        assert!(pointwise_bound_check(&f, &params, &spec.with_k(1.0), &grid, &s).is_err());
    }

    #[test]
    fn pairing_self_and_holder() {
        let f = HoloTestFunction::shifted_power(1.0, 3);
        let g = grid_of(f.clone());
        let s = PanelScheme::default();
        let params = SpaceParams::new(2.0, 2.0, 0.0, 0.0).unwrap();
        let flat = WeightSpec::trivial();
        let pair = duality_pairing(&g, &g, 0.0, &s).unwrap();
        let n = mixed_norm_fn(Arc::new(f.clone()), &params, &flat, &s).unwrap().norm;
        assert!((pair.re / (n * n) - 1.0).abs() < 1e-9 && pair.im.abs() < 1e-12);

        let spec = WeightSpec::new(1, 1, -1.0, GrowthFunction::power(1.0, 1.0).unwrap()).unwrap();
        let h = builtin_family()[4].clone();
        let gh = grid_of(h.clone());
        for (p, q) in [(2.0, 2.0), (1.5, 3.0), (3.0, 1.5)] {
            let sp = SpaceParams::new(p, q, 0.0, 0.0).unwrap();
            let dual = SpaceParams::new(sp.p_conj, sp.q_conj, 0.0, 0.0).unwrap();
            let lhs = duality_pairing(&g, &gh, 0.0, &s).unwrap().norm();
            let nf = mixed_norm_fn(Arc::new(f.clone()), &sp, &spec, &s).unwrap().norm;
            let ng = mixed_norm_fn(Arc::new(h.clone()), &dual, &spec.with_k(spec.k * (1.0 - sp.q_conj)), &s).unwrap().norm;
            assert!(lhs <= nf * ng);
        }
    }

    #[test]
    fn projection_is_self_adjoint_in_its_pairing() {
        let bump = |c: Complex64, r: f64| {
            move |w: Complex64| {
                let d = ((w - c).norm() / r).powi(2);
                if d < 1.0 {
                    Complex64::new((1.0 - 1.0 / (1.0 - d)).exp(), 0.3 * w.re)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
        };
        let f = bump(Complex64::new(0.0, 1.0), 0.5);
        let g = bump(Complex64::new(1.0, 2.0), 0.8);
        let fb = BoxRule::new((-0.5, 0.5), (0.5, 1.5), 8, 8).unwrap();
        let gb = BoxRule::new((0.2, 1.8), (1.2, 2.8), 8, 8).unwrap();
        for beta in [0.0, 1.0, 0.4] {
            let (l, r) = projection_pairing(&f, &fb, &g, &gb, beta).unwrap();
            assert!(rel(l, r) < 1e-10, "{l} {r}");
        }
    }

    #[test]
    fn slice_domination_holds() {
        let f = HoloTestFunction::shifted_power(1.0, 3);
        let r = slice_domination(&f, 1.0, 2.0, &[0.5, 2.0]).unwrap();
        for row in r {
            assert!(row.ratio <= 1.0 + 1e-6 && row.ratio > 0.01, "{row:?}");
        }
    }
}
