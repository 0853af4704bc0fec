//! The Hilbert-type operator `H_β f(x) = ∫_0^∞ f(y) y^β (x+y)^{-(1+β)} dy`,
//! its adjoint for the measure `ω^k(y) y^α dy`, the Schur test, discretised
//! norm estimates and a boundedness classifier.

use std::f64::consts::LN_2;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, LabError, Result};
use crate::par;
use crate::quadrature::{integrate_auto, log_nodes, PanelScheme, QuadReport, SpaceParams, SLOPE_MARGIN};
use crate::weights::WeightSpec;

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Power-law behaviour `f(y) ~ y^{at_zero}` as `y → 0` and `y^{at_inf}` as `y → ∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub at_zero: f64,
    pub at_inf: f64,
}

impl Envelope {
    pub const COMPACT: Envelope = Envelope { at_zero: f64::INFINITY, at_inf: f64::NEG_INFINITY };
}

/// A function on `(0, ∞)`.
#[derive(Clone)]
pub enum HalfLineFunction {
    /// `χ_{[a,b]}`
    Indicator { a: f64, b: f64 },
    /// smooth bump supported on `[a, b]` with peak value 1
    Bump { a: f64, b: f64 },
    /// closed-form evaluator with its envelope
    Closure { f: RealFn, envelope: Envelope },
    /// samples interpolated linearly in `ln y`, zero outside the sampled range
    Sampled { ys: Vec<f64>, values: Vec<f64> },
}

impl std::fmt::Debug for HalfLineFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HalfLineFunction::Indicator { a, b } => write!(f, "Indicator[{a}, {b}]"),
            HalfLineFunction::Bump { a, b } => write!(f, "Bump[{a}, {b}]"),
            HalfLineFunction::Closure { envelope, .. } => write!(f, "Closure({envelope:?})"),
            HalfLineFunction::Sampled { ys, .. } => write!(f, "Sampled({} nodes)", ys.len()),
        }
    }
}

impl HalfLineFunction {
    pub fn indicator(a: f64, b: f64) -> Result<Self> {
        check_support(a, b)?;
        Ok(HalfLineFunction::Indicator { a, b })
    }

    pub fn bump(a: f64, b: f64) -> Result<Self> {
        check_support(a, b)?;
        Ok(HalfLineFunction::Bump { a, b })
    }

    pub fn closure<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F, envelope: Envelope) -> Self {
        HalfLineFunction::Closure { f: Arc::new(f), envelope }
    }

    pub fn sampled(ys: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if ys.len() < 2 || ys.len() != values.len() {
            return Err(LabError::Config { field: "samples".into(), reason: "need matching lengths >= 2".into() });
        }
        if !(ys[0] > 0.0) || !ys.windows(2).all(|w| w[1] > w[0]) {
            return Err(LabError::Config { field: "samples".into(), reason: "nodes must be positive and increasing".into() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LabError::Config { field: "samples".into(), reason: "non-finite value".into() });
        }
        Ok(HalfLineFunction::Sampled { ys, values })
    }

    pub fn zero() -> Self {
        HalfLineFunction::closure(|_| 0.0, Envelope::COMPACT)
    }

    pub fn eval(&self, y: f64) -> f64 {
        match self {
            HalfLineFunction::Indicator { a, b } => {
                if y >= *a && y <= *b {
                    1.0
                } else {
                    0.0
                }
            }
            HalfLineFunction::Bump { a, b } => {
                let s = (2.0 * y - a - b) / (b - a);
                if s.abs() < 1.0 {
                    (1.0 - 1.0 / (1.0 - s * s)).exp()
                } else {
                    0.0
                }
            }
            HalfLineFunction::Closure { f, .. } => f(y),
            HalfLineFunction::Sampled { ys, values } => {
                if y < ys[0] || y > ys[ys.len() - 1] {
                    return 0.0;
                }
                let i = ys.partition_point(|&n| n <= y).clamp(1, ys.len() - 1);
                let (l0, l1) = (ys[i - 1].ln(), ys[i].ln());
                let t = (y.ln() - l0) / (l1 - l0);
                values[i - 1] + t * (values[i] - values[i - 1])
            }
        }
    }

    /// Compact support, if any.
    pub fn support(&self) -> Option<(f64, f64)> {
        match self {
            HalfLineFunction::Indicator { a, b } | HalfLineFunction::Bump { a, b } => Some((*a, *b)),
            HalfLineFunction::Sampled { ys, .. } => Some((ys[0], ys[ys.len() - 1])),
            HalfLineFunction::Closure { .. } => None,
        }
    }

    pub fn envelope(&self) -> Envelope {
        match self {
            HalfLineFunction::Closure { envelope, .. } => *envelope,
            _ => Envelope::COMPACT,
        }
    }

    /// Panel breakpoints on the support (in `log₂ y`) where the function
    /// is smooth between consecutive entries.
    fn breakpoints(&self) -> Option<Vec<f64>> {
        match self {
            HalfLineFunction::Sampled { ys, .. } => Some(ys.iter().map(|y| y.log2()).collect()),
            _ => self.support().map(|(a, b)| vec![a.log2(), b.log2()]),
        }
    }

    /// `∫ g(y) dy` over the support of `self`, for `g` smooth there.
    pub fn integrate_on_support<G: Fn(f64) -> f64 + Sync>(&self, g: G) -> Option<f64> {
        let bp = self.breakpoints()?;
        let (ppo, n) = match self {
            HalfLineFunction::Bump { .. } => (64, 16),
            HalfLineFunction::Sampled { .. } => (1, 4),
            _ => (8, 16),
        };
        let mut total = 0.0;
        for w in bp.windows(2) {
            let per = if matches!(self, HalfLineFunction::Sampled { .. }) {
                1.0 / (w[1] - w[0])
            } else {
                ppo as f64
            };
            let (ys, ws) = log_nodes(w[0], w[1], per.ceil() as usize, n);
            let vals = par::map(ys.len(), |i| ws[i] * g(ys[i]));
            total += vals.iter().sum::<f64>();
        }
        Some(total)
    }
}

fn check_support(a: f64, b: f64) -> Result<()> {
    if !(a > 0.0) {
        return Err(domain("support start", a));
    }
    if !(b > a) {
        return Err(domain("support end", b));
    }
    Ok(())
}

/// `y^β (x+y)^{-(1+β)}`, evaluated in log form.
pub fn kernel(beta: f64, x: f64, y: f64) -> f64 {
    (beta * y.ln() - (1.0 + beta) * (x + y).ln()).exp()
}

fn integrate_envelope<G: Fn(f64) -> f64 + Sync>(g: G, scheme: &PanelScheme) -> Result<QuadReport> {
    integrate_auto(g, scheme, 1e-12)
}

fn divergent_if_infinite(r: QuadReport, what: &str) -> Result<f64> {
    if r.is_finite() {
        Ok(r.total())
    } else {
        Err(LabError::Divergent(what.to_string()))
    }
}

/// `H_β f(x)`.
pub fn apply_hilbert(f: &HalfLineFunction, beta: f64, x: f64, scheme: &PanelScheme) -> Result<f64> {
    if !(beta > -1.0) {
        return Err(domain("beta", beta));
    }
    if !(x > 0.0) {
        return Err(domain("x", x));
    }
    if let Some(v) = f.integrate_on_support(|y| f.eval(y) * kernel(beta, x, y)) {
        return Ok(v);
    }
    let env = f.envelope();
    if env.at_zero + beta <= -1.0 || env.at_inf >= 0.0 {
        return Err(LabError::Divergent(format!("envelope {env:?} not integrable against the kernel")));
    }
    let r = integrate_envelope(|y| f.eval(y) * kernel(beta, x, y), scheme)?;
    divergent_if_infinite(r, "H_beta f")
}

/// `H_β^* g(x) = ω^{-k}(x) x^{β−α} ∫ g(y) ω^k(y) y^α (x+y)^{-(1+β)} dy`,
/// the adjoint of `H_β` in `L²(ω^k(y) y^α dy)`.
pub fn apply_adjoint(g: &HalfLineFunction, params: &SpaceParams, spec: &WeightSpec, x: f64, scheme: &PanelScheme) -> Result<f64> {
    if !(x > 0.0) {
        return Err(domain("x", x));
    }
    let (alpha, beta) = (params.alpha, params.beta);
    let inner = |y: f64| g.eval(y) * (spec.ln_eval(y) + alpha * y.ln() - (1.0 + beta) * (x + y).ln()).exp();
    let v = match g.integrate_on_support(inner) {
        Some(v) => v,
        None => {
            let env = g.envelope();
            if env.at_zero + alpha <= -1.0 || env.at_inf + alpha - 1.0 - beta >= -1.0 {
                return Err(LabError::Divergent(format!("envelope {env:?} not integrable against the adjoint kernel")));
            }
            divergent_if_infinite(integrate_envelope(inner, scheme)?, "adjoint")?
        }
    };
    Ok(v * (-spec.ln_eval(x) + (beta - alpha) * x.ln()).exp())
}

/// `⟨u, v⟩ = ∫ u v ω^k(y) y^α dy` over the support of `support_of`.
pub fn weighted_inner<U, V>(support_of: &HalfLineFunction, u: U, v: V, alpha: f64, spec: &WeightSpec) -> Result<f64>
where
    U: Fn(f64) -> f64 + Sync,
    V: Fn(f64) -> f64 + Sync,
{
    support_of
        .integrate_on_support(|y| u(y) * v(y) * (spec.ln_eval(y) + alpha * y.ln()).exp())
        .ok_or(LabError::Unsupported("weighted inner product needs a compactly supported factor"))
}

/// Both sides of `⟨H_β f, g⟩ = ⟨f, H_β^* g⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdjointCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub defect: f64,
}

/// Compares `⟨H_β f, g⟩` and `⟨f, H_β^* g⟩` for compactly supported `f, g`.
pub fn adjoint_check(f: &HalfLineFunction, g: &HalfLineFunction, params: &SpaceParams, spec: &WeightSpec, scheme: &PanelScheme) -> Result<AdjointCheck> {
    let beta = params.beta;
    let lhs = weighted_inner(g, |x| apply_hilbert(f, beta, x, scheme).unwrap_or(f64::NAN), |x| g.eval(x), params.alpha, spec)?;
    let rhs = weighted_inner(f, |y| f.eval(y), |y| apply_adjoint(g, params, spec, y, scheme).unwrap_or(f64::NAN), params.alpha, spec)?;
    let defect = (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
    Ok(AdjointCheck { lhs, rhs, defect })
}

/// Schur test ratios at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchurRow {
    pub x: f64,
    /// `∫ K(x,y) φ^{p'}(y) dμ(y) / φ^{p'}(x)`
    pub ratio_first: f64,
    /// `∫ K(x,y) φ^{p}(x) dμ(x) / φ^{p}(y)` evaluated at `y = x`
    pub ratio_second: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchurReport {
    pub rows: Vec<SchurRow>,
    pub sup_first: f64,
    pub sup_second: f64,
    pub inf_first: f64,
    pub inf_second: f64,
    /// both sup ratios finite
    pub bounded: bool,
}

/// Schur test for `H_β` on `L^p(ω^k y^α dy)` with `φ(t) = t^{-(α+1)/(pp')}`.
///
/// Relative to `μ = ω^k(y) y^α dy` the kernel is
/// `K(x,y) = ω^{-k}(y) y^{β−α} (x+y)^{-(1+β)}`. Non-integrable integrals
/// give infinite ratios.
pub fn schur_verify(params: &SpaceParams, spec: &WeightSpec, grid: &[f64], scheme: &PanelScheme) -> Result<SchurReport> {
    if params.p == 1.0 {
        return Err(LabError::Unsupported("Schur test requires p > 1"));
    }
    let (p, alpha, beta) = (params.p, params.alpha, params.beta);
    let pc = params.p_conj;
    let ln_phi = |t: f64| -(alpha + 1.0) / (p * pc) * t.ln();
    let rows: Vec<Result<SchurRow>> = par::map_slice(grid, |&x| {
        if !(x > 0.0) {
            return Err(domain("grid point", x));
        }
        // ∫ y^β (x+y)^{-(1+β)} φ^{p'}(y) dy: the weight cancels.
        let g1 = |y: f64| (beta * y.ln() - (1.0 + beta) * (x + y).ln() + pc * ln_phi(y)).exp();
        let r1 = integrate_envelope(g1, scheme)?;
        // ω^{-k}(y) y^{β−α} ∫ (s+y)^{-(1+β)} φ^p(s) ω^k(s) s^α ds at y = x.
        let y = x;
        let g2 = |s: f64| (-(1.0 + beta) * (s + y).ln() + p * ln_phi(s) + spec.ln_eval(s) + alpha * s.ln()).exp();
        let r2 = integrate_envelope(g2, scheme)?;
        let pre2 = (-spec.ln_eval(y) + (beta - alpha) * y.ln()).exp();
        Ok(SchurRow {
            x,
            ratio_first: r1.total() / (pc * ln_phi(x)).exp(),
            ratio_second: pre2 * r2.total() / (p * ln_phi(y)).exp(),
        })
    });
    let rows: Vec<SchurRow> = rows.into_iter().collect::<Result<_>>()?;
    let fold = |f: fn(&SchurRow) -> f64, init: f64, op: fn(f64, f64) -> f64| rows.iter().map(f).fold(init, op);
    let sup_first = fold(|r| r.ratio_first, f64::NEG_INFINITY, f64::max);
    let sup_second = fold(|r| r.ratio_second, f64::NEG_INFINITY, f64::max);
    let inf_first = fold(|r| r.ratio_first, f64::INFINITY, f64::min);
    let inf_second = fold(|r| r.ratio_second, f64::INFINITY, f64::min);
    Ok(SchurReport {
        bounded: sup_first.is_finite() && sup_second.is_finite(),
        rows,
        sup_first,
        sup_second,
        inf_first,
        inf_second,
    })
}

/// Nyström discretisation of `H_β` acting on `L^p(ω^k y^α dy)`, written as a
/// matrix on plain `ℓ^p`: `A_ij = μ_i^{1/p} k(y_i, y_j) h_j μ_j^{-1/p}` with
/// `h` the `dy` quadrature weights and `μ_i = ω^k(y_i) y_i^α h_i`.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub nodes: Vec<f64>,
    pub h: Vec<f64>,
    pub mu: Vec<f64>,
    pub p: f64,
    /// row-major `n × n`
    pub matrix: Vec<f64>,
    pub scheme: PanelScheme,
}

impl DiscreteOperator {
    pub fn new(params: &SpaceParams, spec: &WeightSpec, scheme: &PanelScheme) -> Result<Self> {
        scheme.validate()?;
        let (nodes, h) = scheme.nodes();
        let (p, alpha, beta) = (params.p, params.alpha, params.beta);
        let ln_mu: Vec<f64> = nodes.iter().zip(&h).map(|(&y, &w)| spec.ln_eval(y) + alpha * y.ln() + w.ln()).collect();
        let n = nodes.len();
        let rows = par::map(n, |i| {
            (0..n)
                .map(|j| {
                    let l = ln_mu[i] / p + beta * nodes[j].ln() - (1.0 + beta) * (nodes[i] + nodes[j]).ln() + h[j].ln()
                        - ln_mu[j] / p;
                    l.exp()
                })
                .collect::<Vec<f64>>()
        });
        Ok(DiscreteOperator {
            mu: ln_mu.iter().map(|l| l.exp()).collect(),
            nodes,
            h,
            p,
            matrix: rows.concat(),
            scheme: *scheme,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// The operator on the nested domain `[2^{-j}, 2^{j}]`.
    pub fn restrict(&self, j: i32) -> DiscreteOperator {
        let (lo, hi) = (2f64.powi(-j), 2f64.powi(j));
        let keep: Vec<usize> = (0..self.len()).filter(|&i| self.nodes[i] >= lo && self.nodes[i] <= hi).collect();
        let n = self.len();
        let mut matrix = Vec::with_capacity(keep.len() * keep.len());
        for &i in &keep {
            for &jj in &keep {
                matrix.push(self.matrix[i * n + jj]);
            }
        }
        DiscreteOperator {
            nodes: keep.iter().map(|&i| self.nodes[i]).collect(),
            h: keep.iter().map(|&i| self.h[i]).collect(),
            mu: keep.iter().map(|&i| self.mu[i]).collect(),
            p: self.p,
            matrix,
            scheme: self.scheme.with_domain(-j, j),
        }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.len();
        par::map(n, |i| self.matrix[i * n..(i + 1) * n].iter().zip(v).map(|(a, b)| a * b).sum())
    }

    pub fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        let n = self.len();
        par::map(n, |j| (0..n).map(|i| self.matrix[i * n + j] * v[i]).sum())
    }

    /// Operator norm on `ℓ^p`, estimated iteratively.
    pub fn norm(&self, max_iter: usize, tol: f64) -> NormIteration {
        let n = self.len();
        if n == 0 {
            return NormIteration { value: 0.0, iterations: 0, converged: true };
        }
        if self.p == 1.0 {
            let v = (0..n).map(|j| (0..n).map(|i| self.matrix[i * n + j]).sum::<f64>()).fold(0.0, f64::max);
            return NormIteration { value: v, iterations: 0, converged: true };
        }
        // Start near the extremal profile: flat in log coordinates with a sine window.
        let (u0, u1) = (self.nodes[0].log2(), self.nodes[n - 1].log2());
        let mut x: Vec<f64> = self
            .nodes
            .iter()
            .map(|y| (std::f64::consts::PI * (y.log2() - u0 + 0.5) / (u1 - u0 + 1.0)).sin())
            .collect();
        let p = self.p;
        let pc = p / (p - 1.0);
        let pnorm = |v: &[f64], e: f64| v.iter().map(|a| a.abs().powf(e)).sum::<f64>().powf(1.0 / e);
        let nx = pnorm(&x, p);
        x.iter_mut().for_each(|a| *a /= nx);
        let mut est = 0.0;
        for it in 1..=max_iter {
            let ax = self.apply(&x);
            let new = pnorm(&ax, p);
            let next = if p == 2.0 {
                self.apply_transpose(&ax)
            } else {
                let psi: Vec<f64> = ax.iter().map(|a| a.signum() * a.abs().powf(p - 1.0)).collect();
                let t = self.apply_transpose(&psi);
                t.iter().map(|a| a.signum() * a.abs().powf(pc - 1.0)).collect()
            };
            let nn = pnorm(&next, p);
            if !(nn > 0.0) {
                return NormIteration { value: new, iterations: it, converged: true };
            }
            x = next.into_iter().map(|a| a / nn).collect();
            if (new - est).abs() <= tol * new {
                return NormIteration { value: new.max(est), iterations: it, converged: true };
            }
            est = new.max(est);
        }
        NormIteration { value: est, iterations: max_iter, converged: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormIteration {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Discretisation used by [`norm_estimate`] by default: `[2^-60, 2^60]`,
/// 2 panels per octave, 4 nodes per panel.
pub fn default_norm_scheme() -> PanelScheme {
    PanelScheme { j_lo: -60, j_hi: 60, nodes_per_panel: 4, panels_per_octave: 2 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub value: f64,
    pub iterations: usize,
    /// false when the iteration cap was hit
    pub converged: bool,
    /// `(J, estimate on [2^{-J}, 2^{J}])` for nested domains
    pub trend: Vec<(i32, f64)>,
}

/// Estimates `‖H_β‖` on `L^p(ω^k y^α dy)` from its discretisation on
/// `scheme`, with a truncation trend over nested domains.
pub fn norm_estimate(params: &SpaceParams, spec: &WeightSpec, scheme: &PanelScheme) -> Result<NormEstimate> {
    let op = DiscreteOperator::new(params, spec, scheme)?;
    let cap = if params.p == 2.0 { 20_000 } else { 200 };
    let full = op.norm(cap, 1e-10);
    let jmax = (-scheme.j_lo).min(scheme.j_hi);
    let mut trend: Vec<(i32, f64)> = [jmax / 4, jmax / 2]
        .iter()
        .filter(|&&j| j >= 1)
        .map(|&j| (j, op.restrict(j).norm(cap, 1e-10).value))
        .collect();
    trend.push((jmax, full.value));
    Ok(NormEstimate { value: full.value, iterations: full.iterations, converged: full.converged, trend })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Bounded,
    Unbounded,
    NearCritical,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Bounded => "bounded",
            Verdict::Unbounded => "unbounded",
            Verdict::NearCritical => "near-critical",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOptions {
    /// nested truncation levels `J` for the norm trend (equally spaced)
    pub ladder: Vec<i32>,
    pub nodes_per_panel: usize,
    pub panels_per_octave: usize,
    pub max_iter: usize,
    /// growth between consecutive ladder norms counted as divergence
    pub growth_threshold: f64,
    /// increments shrinking by at least this factor count as convergence
    pub increment_ratio: f64,
    /// half-width of the excluded band around `α + 1 = p(β + 1)`
    pub band: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            ladder: vec![16, 32, 48, 64],
            nodes_per_panel: 4,
            panels_per_octave: 1,
            max_iter: 200,
            growth_threshold: 1.5,
            increment_ratio: 0.9,
            band: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub beta: f64,
    /// `α + 1 < p(β + 1)`
    pub predicate: bool,
    pub verdict: Verdict,
    pub norm_ladder: Vec<(i32, f64)>,
    /// last increment over the previous one
    pub increment_ratio: f64,
    /// last ladder norm over the previous one
    pub growth: f64,
    pub norm_bounded: bool,
    /// `‖H_β χ_{[1,2]}‖` in `L^p(ω^k y^α)`
    pub witness_direct: f64,
    /// `‖H_β^* χ_{[1,2]}‖` in `L^{p'}(ω^k y^α)`; NaN for `p = 1`
    pub witness_adjoint: f64,
    pub witness_finite: bool,
}

impl Classification {
    /// The verdict agrees with the predicate (near-critical points excluded).
    pub fn matches(&self) -> Option<bool> {
        match self.verdict {
            Verdict::NearCritical => None,
            Verdict::Bounded => Some(self.predicate),
            Verdict::Unbounded => Some(!self.predicate),
            Verdict::Inconclusive => Some(false),
        }
    }
}

/// `ln ∫_1^2 w(y) (x+y)^{-(1+β)} dy`, stable for extreme `x`.
fn ln_chi_integral<W: Fn(f64) -> f64 + Sync>(w: W, beta: f64, x: f64) -> f64 {
    let chi = HalfLineFunction::Indicator { a: 1.0, b: 2.0 };
    let scale = (1.0 + x).ln();
    let v = chi
        .integrate_on_support(|y| w(y) * (-(1.0 + beta) * ((x + y).ln() - scale)).exp())
        .unwrap_or(0.0);
    v.ln() - (1.0 + beta) * scale
}

/// Necessity witnesses: `H_β χ_{[1,2]}` must lie in `L^p(ω^k y^α)` and
/// `H_β^* χ_{[1,2]}` in `L^{p'}(ω^k y^α)`; returns both `q`-th power integrals.
pub fn witness_integrals(p: f64, alpha: f64, beta: f64, spec: &WeightSpec) -> Result<(f64, f64)> {
    let scheme = PanelScheme { j_lo: -20, j_hi: 20, nodes_per_panel: 8, panels_per_octave: 2 };
    let direct = integrate_auto(
        |x: f64| (p * ln_chi_integral(|y| y.powf(beta), beta, x) + spec.ln_eval(x) + alpha * x.ln()).exp(),
        &scheme,
        1e-9,
    )?;
    let adjoint = if p > 1.0 {
        let pc = p / (p - 1.0);
        let r = integrate_auto(
            |x: f64| {
                let inner = ln_chi_integral(|y| (spec.ln_eval(y) + alpha * y.ln()).exp(), beta, x);
                let ln_h = -spec.ln_eval(x) + (beta - alpha) * x.ln() + inner;
                (pc * ln_h + spec.ln_eval(x) + alpha * x.ln()).exp()
            },
            &scheme,
            1e-9,
        )?;
        r.total()
    } else {
        f64::NAN
    };
    Ok((direct.total(), adjoint))
}

/// Classifies boundedness of `H_β` on `L^p(ω^k y^α)` for each `β`.
///
/// Two signals are combined: the truncated norm over the nested ladder
/// (bounded when its increments shrink, or it is flat) and the necessity
/// witnesses (finite integrals). Agreement gives a verdict; disagreement is
/// inconclusive. Points within `band` of the threshold are near-critical.
pub fn threshold_classify(p: f64, alpha: f64, spec: &WeightSpec, beta_grid: &[f64], opts: &ClassifyOptions) -> Result<Vec<Classification>> {
    let jmax = *opts.ladder.iter().max().ok_or(LabError::Config { field: "ladder".into(), reason: "empty".into() })?;
    beta_grid
        .iter()
        .map(|&beta| {
            let params = SpaceParams::new(p, p, alpha, beta)?;
            let predicate = alpha + 1.0 < p * (beta + 1.0);
            let scheme = PanelScheme {
                j_lo: -jmax,
                j_hi: jmax,
                nodes_per_panel: opts.nodes_per_panel,
                panels_per_octave: opts.panels_per_octave,
            };
            let op = DiscreteOperator::new(&params, spec, &scheme)?;
            let norm_ladder: Vec<(i32, f64)> = opts
                .ladder
                .iter()
                .map(|&j| (j, op.restrict(j).norm(opts.max_iter, 1e-9).value))
                .collect();
            let m = norm_ladder.len();
            let growth = if m >= 2 { norm_ladder[m - 1].1 / norm_ladder[m - 2].1 } else { 1.0 };
            let increment_ratio = if m >= 3 {
                let d1 = norm_ladder[m - 2].1 - norm_ladder[m - 3].1;
                let d2 = norm_ladder[m - 1].1 - norm_ladder[m - 2].1;
                d2 / d1
            } else {
                f64::NAN
            };
            let flat = m >= 2 && (norm_ladder[m - 1].1 - norm_ladder[m - 2].1).abs() <= 1e-3 * norm_ladder[m - 1].1;
            let norm_bounded = flat || (growth < opts.growth_threshold && increment_ratio < opts.increment_ratio);
            let (wd, wa) = witness_integrals(p, alpha, beta, spec)?;
            let witness_finite = wd.is_finite() && (p == 1.0 || wa.is_finite());
            let verdict = if (alpha + 1.0 - p * (beta + 1.0)).abs() < opts.band {
                Verdict::NearCritical
            } else if norm_bounded && witness_finite {
                Verdict::Bounded
            } else if !norm_bounded && !witness_finite {
                Verdict::Unbounded
            } else {
                Verdict::Inconclusive
            };
            Ok(Classification {
                beta,
                predicate,
                verdict,
                norm_ladder,
                increment_ratio,
                growth,
                norm_bounded,
                witness_direct: wd,
                witness_adjoint: wa,
                witness_finite,
            })
        })
        .collect()
}

/// Local-slope margin below which tails are treated as divergent.
pub const WITNESS_SLOPE_MARGIN: f64 = SLOPE_MARGIN;

/// `2^{u}` helper for grids.
pub fn dyadic(u: f64) -> f64 {
    (u * LN_2).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::beta as beta_fn;
    use crate::weights::GrowthFunction;
    use std::f64::consts::PI;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    fn id_spec(k: f64) -> WeightSpec {
        WeightSpec::new(1, 1, k, GrowthFunction::power(1.0, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn hilbert_of_indicator() {
        let chi = HalfLineFunction::indicator(1.0, 2.0).unwrap();
        let s = PanelScheme::default();
        assert!(rel(apply_hilbert(&chi, 0.0, 1.0, &s).unwrap(), 1.5f64.ln()) < 1e-13);
        assert_eq!(apply_hilbert(&HalfLineFunction::zero(), 0.3, 2.0, &s).unwrap(), 0.0);
    }

    #[test]
    fn hilbert_of_indicator_is_comparable_to_envelope() {
        let chi = HalfLineFunction::indicator(1.0, 2.0).unwrap();
        let s = PanelScheme::default();
        for beta in [-0.5, 0.0, 1.0, 3.0] {
            let r: Vec<f64> = (-20..=20)
                .map(|j| {
                    let x = dyadic(j as f64);
                    apply_hilbert(&chi, beta, x, &s).unwrap() * (x + 1.0).powf(1.0 + beta)
                })
                .collect();
            let (lo, hi) = r.iter().fold((f64::MAX, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
            assert!(hi / lo < 2f64.powf(1.0 + beta.abs()) * 2.0, "beta={beta}");
        }
    }

    #[test]
    fn hilbert_closure_matches_closed_form() {
        // H_0 of y^{-1/2}: ∫ y^{-1/2}/(x+y) dy = π x^{-1/2}
        let f = HalfLineFunction::closure(|y: f64| y.powf(-0.5), Envelope { at_zero: -0.5, at_inf: -0.5 });
        let v = apply_hilbert(&f, 0.0, 4.0, &PanelScheme::default()).unwrap();
        assert!(rel(v, PI / 2.0) < 1e-8);
        let g = HalfLineFunction::closure(|_| 1.0, Envelope { at_zero: 0.0, at_inf: 0.0 });
        assert!(matches!(apply_hilbert(&g, 0.0, 1.0, &PanelScheme::default()), Err(LabError::Divergent(_))));
    }

    #[test]
    fn adjoint_identity_for_bumps() {
        let f = HalfLineFunction::bump(0.5, 3.0).unwrap();
        let g = HalfLineFunction::bump(0.2, 1.5).unwrap();
        let s = PanelScheme::default();
        for (alpha, beta, k) in [(0.0, 0.0, 0.0), (0.5, 1.0, -1.0), (-0.5, 0.3, 1.0), (2.0, -0.4, 2.0)] {
            let params = SpaceParams::new(2.0, 2.0, alpha, beta).unwrap();
            let c = adjoint_check(&f, &g, &params, &id_spec(k), &s).unwrap();
            assert!(c.defect < 1e-8, "{c:?}");
        }
    }

    #[test]
    fn self_adjoint_when_unweighted_and_alpha_equals_beta() {
        let f = HalfLineFunction::bump(0.5, 2.0).unwrap();
        let params = SpaceParams::new(2.0, 2.0, 0.7, 0.7).unwrap();
        let s = PanelScheme::default();
        for x in [0.1, 1.0, 5.0] {
            let a = apply_hilbert(&f, 0.7, x, &s).unwrap();
            let b = apply_adjoint(&f, &params, &WeightSpec::trivial(), x, &s).unwrap();
            assert!(rel(a, b) < 1e-12);
        }
    }

    #[test]
    fn adjoint_of_indicator_envelope() {
        let chi = HalfLineFunction::indicator(1.0, 2.0).unwrap();
        let s = PanelScheme::default();
        let spec = id_spec(-1.0);
        let params = SpaceParams::new(2.0, 2.0, 0.5, 0.0).unwrap();
        let r: Vec<f64> = (-16..=16)
            .map(|j| {
                let x = dyadic(j as f64);
                let env = spec.pow(x, -spec.k) * x.powf(params.beta - params.alpha) * (x + 1.0).powf(-1.0 - params.beta);
                apply_adjoint(&chi, &params, &spec, x, &s).unwrap() / env
            })
            .collect();
        let (lo, hi) = r.iter().fold((f64::MAX, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
        assert!(hi / lo < 4.0);
    }

    #[test]
    fn sampled_function_interpolates() {
        let ys: Vec<f64> = (0..=8).map(|i| dyadic(i as f64 / 4.0)).collect();
        let vals: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
        let f = HalfLineFunction::sampled(ys, vals).unwrap();
        assert!((f.eval(1.5) - 1.5f64.ln()).abs() < 1e-14);
        assert_eq!(f.eval(5.0), 0.0);
        // ∫_1^4 ln y dy = 4 ln 4 − 3
        let v = f.integrate_on_support(|y| f.eval(y)).unwrap();
        assert!(rel(v, 4.0 * 4f64.ln() - 3.0) < 1e-13);
    }

    #[test]
    fn schur_unweighted_is_beta_value() {
        let params = SpaceParams::new(2.0, 2.0, 0.0, 0.0).unwrap();
        let grid: Vec<f64> = (-8..=8).map(|j| dyadic(j as f64)).collect();
        let r = schur_verify(&params, &WeightSpec::trivial(), &grid, &PanelScheme::default()).unwrap();
        for row in &r.rows {
            assert!(rel(row.ratio_first, beta_fn(0.5, 0.5)) < 1e-8);
            assert!(rel(row.ratio_second, PI) < 1e-8);
        }
        assert!(r.bounded);
    }

    #[test]
    fn schur_weighted_and_divergent() {
        let grid: Vec<f64> = (-8..=8).map(|j| dyadic(j as f64)).collect();
        let params = SpaceParams::new(2.0, 2.0, 0.0, 0.0).unwrap();
        let r = schur_verify(&params, &id_spec(-1.0), &grid, &PanelScheme::default()).unwrap();
        assert!(r.bounded && r.sup_second / r.inf_second < 50.0);
        let bad = SpaceParams::new(2.0, 2.0, 1.5, 0.0).unwrap();
        let r = schur_verify(&bad, &WeightSpec::trivial(), &grid, &PanelScheme::default()).unwrap();
        assert!(!r.bounded);
        let one = SpaceParams::new(1.0, 1.0, 0.0, 0.0).unwrap();
        assert!(matches!(schur_verify(&one, &WeightSpec::trivial(), &grid, &PanelScheme::default()), Err(LabError::Unsupported(_))));
    }

    #[test]
    fn discrete_norm_p1_is_column_sum() {
        let params = SpaceParams::new(1.0, 1.0, 0.0, 0.5).unwrap();
        let op = DiscreteOperator::new(&params, &WeightSpec::trivial(), &PanelScheme::new(-30, 30, 4, 2).unwrap()).unwrap();
        // sup_y ∫ y^β (x+y)^{-1-β} dx / ... = ∫ y^β (x+y)^{-1-β} dx = 1/β on the full line
        let n = op.norm(10, 1e-9).value;
        assert!(n < 2.0 && n > 1.9, "{n}");
    }

    #[test]
    fn restriction_is_monotone() {
        let params = SpaceParams::new(2.0, 2.0, 0.0, 0.0).unwrap();
        let op = DiscreteOperator::new(&params, &id_spec(-1.0), &PanelScheme::new(-24, 24, 4, 1).unwrap()).unwrap();
        let v: Vec<f64> = [4, 8, 16, 24].iter().map(|&j| op.restrict(j).norm(5000, 1e-10).value).collect();
        assert!(v.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-9)), "{v:?}");
    }

    #[test]
    fn witnesses_match_predicate() {
        for (p, alpha, beta) in [(2.0, 0.0, 0.0), (2.0, 0.0, -0.6), (1.0, 0.0, 0.5), (1.0, 0.0, -0.2), (3.0, 1.0, -0.2)] {
            for k in [-1.0, 0.0, 1.0] {
                let (d, a) = witness_integrals(p, alpha, beta, &id_spec(k)).unwrap();
                let ok = alpha + 1.0 < p * (beta + 1.0);
                assert_eq!(d.is_finite() && (p == 1.0 || a.is_finite()), ok, "p={p} a={alpha} b={beta} k={k}");
            }
        }
    }
}
