//! Sequence spaces over a δ-lattice, sampling, atomic synthesis and
//! reconstruction, and the derivative and slice-averaging estimates.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, LN_2};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bergman::{KernelParams, ScaledDerivative};
use crate::error::{domain, LabError, Result};
use crate::lattice::DeltaLattice;
use crate::par;
use crate::quadrature::{
    gauss_legendre, log_nodes, mixed_norm_fn, mixed_norm_ref, slice_integral, HalfPlaneFn, PanelScheme, SpaceParams, XRule, XWindow,
};
use crate::weights::WeightSpec;

/// Mass fraction outside the lattice footprint above which results carry a warning.
pub const TAIL_WARNING: f64 = 0.01;

/// Finitely supported coefficients `λ_{l,j}` on a lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientArray {
    pub lattice: DeltaLattice,
    entries: BTreeMap<(i64, i64), Complex64>,
}

impl CoefficientArray {
    pub fn new(lattice: &DeltaLattice) -> Self {
        CoefficientArray { lattice: *lattice, entries: BTreeMap::new() }
    }

    pub fn insert(&mut self, l: i64, j: i64, value: Complex64) -> Result<()> {
        let c = &self.lattice.config;
        if l < c.l_range.0 || l > c.l_range.1 || j < c.j_range.0 || j > c.j_range.1 {
            return Err(LabError::Config { field: "index".into(), reason: format!("({l}, {j}) outside the lattice") });
        }
        if !(value.re.is_finite() && value.im.is_finite()) {
            return Err(domain("coefficient", value.norm()));
        }
        self.entries.insert((l, j), value);
        Ok(())
    }

    pub fn get(&self, l: i64, j: i64) -> Complex64 {
        self.entries.get(&(l, j)).copied().unwrap_or_default()
    }

    /// `(l, j, λ)` in index order.
    pub fn iter(&self) -> impl Iterator<Item = (i64, i64, Complex64)> + '_ {
        self.entries.iter().map(|(&(l, j), &v)| (l, j, v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        CoefficientArray { lattice: self.lattice, entries: self.entries.iter().map(|(k, v)| (*k, v * c)).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (k, v) in &other.entries {
            *out.entries.entry(*k).or_default() += v;
        }
        out
    }
}

/// Parameters of `ℓ^{p,q}_{ω^k,α}` on a lattice with parameter `γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequenceSpaceParams {
    pub p: f64,
    pub q: f64,
    pub alpha: f64,
    pub k: f64,
    pub gamma: f64,
    pub spec: WeightSpec,
}

impl SequenceSpaceParams {
    /// `k` is taken from `spec`.
    pub fn new(p: f64, q: f64, alpha: f64, gamma: f64, spec: &WeightSpec) -> Result<Self> {
        SpaceParams::new(p, q, alpha, alpha)?;
        if !(gamma > 0.0) {
            return Err(domain("gamma", gamma));
        }
        Ok(SequenceSpaceParams { p, q, alpha, k: spec.k, gamma, spec: *spec })
    }

    pub fn for_lattice(p: f64, q: f64, alpha: f64, spec: &WeightSpec, lattice: &DeltaLattice) -> Result<Self> {
        SequenceSpaceParams::new(p, q, alpha, lattice.gamma(), spec)
    }

    pub fn space(&self) -> SpaceParams {
        SpaceParams::new(self.p, self.q, self.alpha, self.alpha).expect("validated")
    }

    /// Row weight `ω^k(y_j) y_j^{α+1+q/p}`.
    pub fn row_weight(&self, y: f64) -> f64 {
        (self.spec.ln_eval(y) + (self.alpha + 1.0 + self.q / self.p) * y.ln()).exp()
    }

    fn check(&self, lattice: &DeltaLattice) -> Result<()> {
        if (self.gamma - lattice.gamma()).abs() > 1e-15 * lattice.gamma() {
            return Err(LabError::Config {
                field: "gamma".into(),
                reason: format!("sequence space uses {} but the lattice uses {}", self.gamma, lattice.gamma()),
            });
        }
        if (self.k - self.spec.k).abs() > 0.0 {
            return Err(LabError::Config { field: "k".into(), reason: "differs from the weight exponent".into() });
        }
        Ok(())
    }
}

fn row_groups(lam: &CoefficientArray) -> BTreeMap<i64, Vec<Complex64>> {
    let mut rows: BTreeMap<i64, Vec<Complex64>> = BTreeMap::new();
    for (_, j, v) in lam.iter() {
        rows.entry(j).or_default().push(v);
    }
    rows
}

/// `(Σ_j (Σ_l |λ_{l,j}|^p)^{q/p} ω^k(2^{γj}) 2^{γj(α+1+q/p)})^{1/q}`.
pub fn sequence_norm(lam: &CoefficientArray, sp: &SequenceSpaceParams) -> Result<f64> {
    sp.check(&lam.lattice)?;
    let mut total = 0.0;
    for (j, vals) in row_groups(lam) {
        let s: f64 = vals.iter().map(|v| v.norm().powf(sp.p)).sum();
        if s > 0.0 {
            total += s.powf(sp.q / sp.p) * sp.row_weight(lam.lattice.y(j));
        }
    }
    Ok(total.powf(1.0 / sp.q))
}

/// Largest lattice that [`sample_on_lattice`] materializes.
pub const SAMPLE_LIMIT: usize = 20_000_000;

/// `λ_{l,j} = F(z_{l,j})` over the whole index range (zeros omitted).
pub fn sample_on_lattice(f: &dyn HalfPlaneFn, lattice: &DeltaLattice) -> Result<CoefficientArray> {
    if lattice.len() > SAMPLE_LIMIT {
        return Err(LabError::Unsupported("lattice too large to materialize; use sampling_check"));
    }
    let idx: Vec<(i64, i64)> = lattice.indices().collect();
    let vals = par::map(idx.len(), |i| f.eval(lattice.point(idx[i].0, idx[i].1)));
    let mut out = CoefficientArray::new(lattice);
    for ((l, j), v) in idx.into_iter().zip(vals) {
        if v != Complex64::new(0.0, 0.0) {
            out.insert(l, j, v)?;
        }
    }
    Ok(out)
}

/// `∫_a^b g` with fine panels on the window and geometric panels outside.
pub fn integrate_segment<G: Fn(f64) -> f64>(g: &G, win: XWindow, a: f64, b: f64) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    let rule = gauss_legendre(16);
    let h = win.width.max(1e-300);
    let core = (win.lo - 16.0 * h, win.hi + 16.0 * h);
    let mut cuts = vec![a, b];
    let n_core = (((core.1 - core.0) / (0.5 * h)).ceil() as usize).min(16_384);
    for m in 0..=n_core {
        cuts.push(core.0 + m as f64 * (core.1 - core.0) / n_core as f64);
    }
    let mut d = 16.0 * h;
    while core.0 - d > a || core.1 + d < b {
        cuts.push(core.0 - d);
        cuts.push(core.1 + d);
        d *= 2.0;
    }
    cuts.retain(|c| *c >= a && *c <= b);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut s = 0.0;
    for w in cuts.windows(2) {
        let (c, r) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
        for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
            s += r * wt * g(c + r * x);
        }
    }
    s
}

/// How a lattice row sum was evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowMethod {
    Direct,
    /// trapezoid rule read backwards: `(1/s)∫ + endpoint corrections`
    EulerMaclaurin,
}

/// Rows longer than this are summed through Euler–Maclaurin when allowed.
pub const DIRECT_ROW_LIMIT: i64 = 20_000;

/// `Σ_l |F(x_{l,j} + i y_j)|^p` over the lattice's `l` range.
///
/// Long rows with small spacing relative to the distance to the nearest
/// singularity and even integer `p` (so `|F|^p` is real analytic) use
/// `Σ_{l0}^{l1} g(ls) = (1/s)∫_a^b g + (g(a)+g(b))/2 + s(g'(b)−g'(a))/12`,
/// whose remainder is far below rounding for these rows.
pub fn row_sum(f: &dyn HalfPlaneFn, lattice: &DeltaLattice, j: i64, p: f64) -> (f64, RowMethod) {
    let (l0, l1) = lattice.config.l_range;
    let y = lattice.y(j);
    let s = lattice.spacing(j);
    let g = |x: f64| f.eval(Complex64::new(x, y)).norm().powf(p);
    let win = f.x_window(y);
    let even = p.fract() == 0.0 && (p as i64) % 2 == 0;
    if l1 - l0 < DIRECT_ROW_LIMIT || !even || s > 0.05 * win.width {
        let v = (l0..=l1).map(|l| g(lattice.x(l, j))).sum();
        return (v, RowMethod::Direct);
    }
    let (a, b) = (lattice.x(l0, j), lattice.x(l1, j));
    let dh = 1e-3 * s;
    let dg = |x: f64| (g(x + dh) - g(x - dh)) / (2.0 * dh);
    let v = integrate_segment(&g, win, a, b) / s + 0.5 * (g(a) + g(b)) + s * (dg(b) - dg(a)) / 12.0;
    (v, RowMethod::EulerMaclaurin)
}

/// `∫_{y0}^{y1} (∫_{a(y)}^{b(y)} |F|^p dx)^{q/p} ω^k(y) y^α dy` where
/// `[a(y), b(y)] = [l0, l1]·(δ²/8)y`: the part of `‖F‖^q` the footprint sees.
pub fn footprint_mass(f: &dyn HalfPlaneFn, lattice: &DeltaLattice, sp: &SequenceSpaceParams, y0: f64, y1: f64) -> f64 {
    let (l0, l1) = lattice.config.l_range;
    let c = lattice.delta().powi(2) / 8.0;
    let (ys, ws) = log_nodes(y0.log2(), y1.log2(), 2, 8);
    let vals = par::map(ys.len(), |i| {
        let y = ys[i];
        let inner = integrate_segment(&|x: f64| f.eval(Complex64::new(x, y)).norm().powf(sp.p), f.x_window(y), l0 as f64 * c * y, l1 as f64 * c * y);
        if inner > 0.0 {
            ws[i] * (inner.ln() * sp.q / sp.p + sp.spec.ln_eval(y) + sp.alpha * y.ln()).exp()
        } else {
            0.0
        }
    });
    vals.into_iter().sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingReport {
    /// `Σ_j (Σ_l |F(z_{l,j})|^p)^{q/p} ω^k(y_j) y_j^{α+1+q/p}`
    pub lhs: f64,
    /// `‖F‖^q`
    pub norm_q: f64,
    /// `lhs / ‖F‖^q`
    pub ratio_upper: f64,
    /// `‖F‖^q / lhs`
    pub ratio_lower: f64,
    /// `lhs·(δ²/8)^{q/p}·γ ln 2 / ‖F‖^q`, which tends to 1 as `δ → 0`
    pub normalized: f64,
    pub tail_fraction: f64,
    pub warning: Option<String>,
    /// `F ≡ 0`: both sides vanish and the ratios are reported as 0
    pub zero: bool,
    pub rows: usize,
    pub euler_maclaurin_rows: usize,
}

/// Row sums `Σ_l |F(z_{l,j})|^p` for every `j` of the lattice.
pub fn sampling_rows(f: &dyn HalfPlaneFn, lattice: &DeltaLattice, p: f64) -> Vec<(f64, RowMethod)> {
    let rows: Vec<i64> = lattice.rows_j().collect();
    par::map(rows.len(), |r| row_sum(f, lattice, rows[r], p))
}

/// Both sides of the two-sided sampling estimate.
pub fn sampling_check(f: &dyn HalfPlaneFn, lattice: &DeltaLattice, sp: &SequenceSpaceParams, scheme: &PanelScheme) -> Result<SamplingReport> {
    sp.check(lattice)?;
    let rows = sampling_rows(f, lattice, sp.p);
    sampling_from_rows(f, lattice, sp, scheme, &rows)
}

/// [`sampling_check`] with precomputed row sums (they do not depend on `k`).
pub fn sampling_from_rows(
    f: &dyn HalfPlaneFn,
    lattice: &DeltaLattice,
    sp: &SequenceSpaceParams,
    scheme: &PanelScheme,
    rows: &[(f64, RowMethod)],
) -> Result<SamplingReport> {
    sp.check(lattice)?;
    let lhs: f64 = lattice
        .rows_j()
        .zip(rows)
        .filter(|(_, r)| r.0 > 0.0)
        .map(|(j, r)| r.0.powf(sp.q / sp.p) * sp.row_weight(lattice.y(j)))
        .sum();
    let em = rows.iter().filter(|r| r.1 == RowMethod::EulerMaclaurin).count();
    let norm = mixed_norm_ref(f, &sp.space(), &sp.spec, scheme)?;
    if norm.divergent {
        return Err(LabError::Divergent("function not in the space".into()));
    }
    let norm_q = norm.integral;
    if norm_q == 0.0 && lhs == 0.0 {
        return Ok(SamplingReport {
            lhs,
            norm_q,
            ratio_upper: 0.0,
            ratio_lower: 0.0,
            normalized: 0.0,
            tail_fraction: 0.0,
            warning: None,
            zero: true,
            rows: rows.len(),
            euler_maclaurin_rows: em,
        });
    }
    let (y0, y1) = lattice.y_footprint();
    let tail_fraction = (1.0 - footprint_mass(f, lattice, sp, y0, y1) / norm_q).max(0.0);
    let d2 = lattice.delta().powi(2);
    Ok(SamplingReport {
        lhs,
        norm_q,
        ratio_upper: lhs / norm_q,
        ratio_lower: norm_q / lhs,
        normalized: lhs * (d2 / 8.0).powf(sp.q / sp.p) * sp.gamma * LN_2 / norm_q,
        tail_fraction,
        warning: truncation_warning(tail_fraction),
        zero: false,
        rows: rows.len(),
        euler_maclaurin_rows: em,
    })
}

fn truncation_warning(tail: f64) -> Option<String> {
    (tail > TAIL_WARNING).then(|| format!("lattice footprint misses {:.2}% of the mass", 100.0 * tail))
}

/// `Σ λ_{l,j} 2^{γj(α+1+q/p)} K_α(·, z_{l,j})`.
#[derive(Debug, Clone)]
pub struct AtomicFunction {
    kernel: KernelParams,
    /// `(scaled coefficient, atom)`
    atoms: Vec<(Complex64, Complex64)>,
}

impl AtomicFunction {
    pub fn new(lam: &CoefficientArray, alpha: f64, sp: &SequenceSpaceParams) -> Result<Self> {
        sp.check(&lam.lattice)?;
        let kernel = KernelParams::new(alpha)?;
        let e = alpha + 1.0 + sp.q / sp.p;
        let atoms = lam
            .iter()
            .map(|(l, j, v)| {
                let w = lam.lattice.point(l, j);
                (v * w.im.powf(e), w)
            })
            .collect();
        Ok(AtomicFunction { kernel, atoms })
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

impl HalfPlaneFn for AtomicFunction {
    fn eval(&self, z: Complex64) -> Complex64 {
        self.atoms.iter().map(|(c, w)| c * self.kernel.kernel(z, *w)).sum()
    }

    fn x_window(&self, y: f64) -> XWindow {
        if self.atoms.is_empty() {
            return XWindow::new(0.0, 0.0, y + 1.0);
        }
        let lo = self.atoms.iter().map(|a| a.1.re).fold(f64::INFINITY, f64::min);
        let hi = self.atoms.iter().map(|a| a.1.re).fold(f64::NEG_INFINITY, f64::max);
        let v = self.atoms.iter().map(|a| a.1.im).fold(f64::INFINITY, f64::min);
        let w = self.atoms.iter().map(|a| a.1.im).fold(0.0, f64::max);
        XWindow { lo, hi, width: y + v, widest: y + w }
    }
}

/// `Σ_{l,j} λ_{l,j} 2^{γj(α+1+q/p)} K_α(z, z_{l,j})`.
pub fn synthesize(lam: &CoefficientArray, alpha: f64, sp: &SequenceSpaceParams, z: Complex64) -> Result<Complex64> {
    if !(z.im > 0.0) {
        return Err(domain("imaginary part", z.im));
    }
    Ok(AtomicFunction::new(lam, alpha, sp)?.eval(z))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthesisBound {
    /// `‖F‖^q`
    pub function_q: f64,
    /// `‖λ‖^q`
    pub sequence_q: f64,
    pub ratio: f64,
}

/// `‖synthesize(λ)‖^q / ‖λ‖^q` with the kernel order `α` of the space.
pub fn synthesis_bound(lam: &CoefficientArray, sp: &SequenceSpaceParams, scheme: &PanelScheme) -> Result<SynthesisBound> {
    let f = AtomicFunction::new(lam, sp.alpha, sp)?;
    let r = mixed_norm_fn(Arc::new(f), &sp.space(), &sp.spec, scheme)?;
    if r.divergent {
        return Err(LabError::Divergent("synthesized function".into()));
    }
    let s = sequence_norm(lam, sp)?.powf(sp.q);
    Ok(SynthesisBound { function_q: r.integral, sequence_q: s, ratio: r.integral / s })
}

/// Settings for the regularized least-squares reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReconstructOptions {
    /// verification footprint `[−x_half, x_half] × [2^{y_lo_log2}, 2^{y_hi_log2}]`
    pub x_half: f64,
    pub y_lo_log2: f64,
    pub y_hi_log2: f64,
    /// vertical distance between atom rows, in octaves
    pub row_step_log2: f64,
    /// horizontal atom spacing in units of `y_j`
    pub x_step: f64,
    pub max_per_row: usize,
    pub grid_nx: usize,
    pub grid_ny: usize,
    /// Tikhonov parameter relative to the largest singular value
    pub regularization: f64,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        ReconstructOptions {
            x_half: 8.0,
            y_lo_log2: -6.0,
            y_hi_log2: 6.0,
            row_step_log2: 1.0,
            x_step: 0.5,
            max_per_row: 33,
            grid_nx: 48,
            grid_ny: 25,
            regularization: 1e-12,
        }
    }
}

impl ReconstructOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |f: &str, r: &str| Err(LabError::Config { field: f.into(), reason: r.into() });
        if !(self.x_half > 0.0) {
            return bad("x_half", "must be positive");
        }
        if !(self.y_hi_log2 > self.y_lo_log2) {
            return bad("y_hi_log2", "must exceed y_lo_log2");
        }
        if !(self.row_step_log2 > 0.0 && self.x_step > 0.0) {
            return bad("row_step_log2", "steps must be positive");
        }
        if self.max_per_row < 2 || self.grid_nx < 2 || self.grid_ny < 2 {
            return bad("grid", "need at least two points per axis");
        }
        if !(self.regularization >= 0.0) {
            return bad("regularization", "must be nonnegative");
        }
        Ok(())
    }

    /// Verification points, `x`-major.
    pub fn grid(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.grid_nx * self.grid_ny);
        for ix in 0..self.grid_nx {
            let x = -self.x_half + 2.0 * self.x_half * ix as f64 / (self.grid_nx - 1) as f64;
            for iy in 0..self.grid_ny {
                let t = self.y_lo_log2 + (self.y_hi_log2 - self.y_lo_log2) * iy as f64 / (self.grid_ny - 1) as f64;
                out.push(Complex64::new(x, 2f64.powf(t)));
            }
        }
        out
    }
}

/// Thinned lattice atoms used by [`reconstruct`]: rows about `row_step_log2`
/// octaves apart and, per row, atoms about `x_step·y_j` apart (coarser when
/// the row would exceed `max_per_row`), all inside the footprint.
pub fn atom_set(lattice: &DeltaLattice, opts: &ReconstructOptions) -> Vec<(i64, i64)> {
    let g = lattice.gamma();
    let (j0, j1) = lattice.config.j_range;
    let (l0, l1) = lattice.config.l_range;
    let mut rows = vec![];
    let mut t = opts.y_lo_log2;
    while t <= opts.y_hi_log2 + 1e-9 {
        let j = ((t / g).round() as i64).clamp(j0, j1);
        if rows.last() != Some(&j) {
            rows.push(j);
        }
        t += opts.row_step_log2;
    }
    let mut out = vec![];
    for j in rows {
        let s = lattice.spacing(j);
        let target = (opts.x_step * lattice.y(j)).max(2.0 * opts.x_half / (opts.max_per_row - 1) as f64);
        let stride = ((target / s).round() as i64).max(1);
        let m = (opts.x_half / (stride as f64 * s)).floor() as i64;
        for i in -m..=m {
            let l = i * stride;
            if l >= l0 && l <= l1 {
                out.push((l, j));
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub coefficients: CoefficientArray,
    /// `‖synthesize(λ) − F‖ / ‖F‖` on the verification grid (ℓ²)
    pub residual: f64,
    /// absolute Tikhonov parameter
    pub regularization: f64,
    pub condition: f64,
    pub rank: usize,
    pub atoms: usize,
    pub grid_points: usize,
}

/// Least-squares fit of `synthesize(λ)` to `F` on the verification grid,
/// by Tikhonov-regularized SVD of the column-equilibrated atom matrix.
pub fn reconstruct(f: &dyn HalfPlaneFn, lattice: &DeltaLattice, sp: &SequenceSpaceParams, opts: &ReconstructOptions) -> Result<Reconstruction> {
    opts.validate()?;
    sp.check(lattice)?;
    let kp = KernelParams::new(sp.alpha)?;
    let atoms = atom_set(lattice, opts);
    if atoms.is_empty() {
        return Err(LabError::Config { field: "footprint".into(), reason: "no lattice atoms inside".into() });
    }
    let grid = opts.grid();
    let (m, n) = (grid.len(), atoms.len());
    let e = sp.alpha + 1.0 + sp.q / sp.p;
    let pts: Vec<Complex64> = atoms.iter().map(|&(l, j)| lattice.point(l, j)).collect();
    let cols: Vec<Vec<Complex64>> = par::map(n, |c| {
        let w = pts[c];
        let s = w.im.powf(e);
        grid.iter().map(|z| s * kp.kernel(*z, w)).collect()
    });
    let scale: Vec<f64> = cols.iter().map(|c| c.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()).collect();
    let a = DMatrix::from_fn(m, n, |r, c| cols[c][r] / scale[c]);
    let b = DVector::from_iterator(m, grid.iter().map(|z| f.eval(*z)));
    let bnorm = b.norm();
    let mut coefficients = CoefficientArray::new(lattice);
    if bnorm == 0.0 {
        return Ok(Reconstruction { coefficients, residual: 0.0, regularization: 0.0, condition: f64::NAN, rank: 0, atoms: n, grid_points: m });
    }
    let svd = a.clone().svd(true, true);
    let (u, vt) = match (&svd.u, &svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(LabError::Solver("SVD did not produce singular vectors".into())),
    };
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let mu = opts.regularization * smax;
    let utb = u.adjoint() * &b;
    let mut coef = DVector::<Complex64>::zeros(utb.len());
    let mut rank = 0;
    for i in 0..utb.len() {
        let s = svd.singular_values[i];
        if s > mu {
            rank += 1;
        }
        let d = s * s + mu * mu;
        if d > 0.0 {
            coef[i] = utb[i] * (s / d);
        }
    }
    let x = vt.adjoint() * coef;
    let residual = (&a * &x - &b).norm() / bnorm;
    if !residual.is_finite() {
        return Err(LabError::Solver("non-finite residual".into()));
    }
    for (c, &(l, j)) in atoms.iter().enumerate() {
        let v = x[c] / scale[c];
        if v != Complex64::new(0.0, 0.0) {
            coefficients.insert(l, j, v)?;
        }
    }
    Ok(Reconstruction { coefficients, residual, regularization: mu, condition: smax / smin, rank, atoms: n, grid_points: m })
}

/// `count` distinct atoms of `atoms` with coefficients uniform in the unit square.
pub fn random_coefficients(lattice: &DeltaLattice, atoms: &[(i64, i64)], count: usize, seed: u64) -> Result<CoefficientArray> {
    if count > atoms.len() {
        return Err(LabError::Config { field: "count".into(), reason: format!("only {} atoms available", atoms.len()) });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = CoefficientArray::new(lattice);
    let mut picks = sample(&mut rng, atoms.len(), count).into_vec();
    picks.sort_unstable();
    for i in picks {
        let v = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        out.insert(atoms[i].0, atoms[i].1, v)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptIReport {
    pub value: f64,
    /// `‖F‖^q`
    pub norm_q: f64,
    pub ratio: f64,
    pub tail_fraction: f64,
    pub warning: Option<String>,
}

/// `∫_{u−r}^{u+r} Σ_l χ_{I_{l,j}}(x) dx` through the antiderivative of the
/// multiplicity, which is a sum of clamped ramps.
fn covered_length(lattice: &DeltaLattice, j: i64, lo: f64, hi: f64) -> f64 {
    let (l0, l1) = lattice.config.l_range;
    let s = lattice.spacing(j);
    let h = 2.0 * s;
    let ramp = |x: f64| -> f64 {
        let full_hi = (((x - h) / s).floor() as i64).min(l1);
        let mut v = (full_hi - l0 + 1).max(0) as f64 * 2.0 * h;
        let top = (((x + h) / s).ceil() as i64).min(l1);
        for l in (full_hi + 1).max(l0)..=top {
            v += (x - lattice.x(l, j) + h).clamp(0.0, 2.0 * h);
        }
        v
    };
    ramp(hi) - ramp(lo)
}

/// `𝓘(F) = ∫_0^∞ Σ_j χ_{J_j}(y) (∫∫ |F(u+iv)|^p S_j(u,v,y) du dv/v²)^{q/p} ω^k(y) y^α dy`
/// with `S_j = ∫ Σ_l χ{x ∈ I_{l,j} : |x+iy − (u+iv)| < y/(2√2)} dx`, over the
/// lattice's index ranges.
pub fn script_i(f: &dyn HalfPlaneFn, lattice: &DeltaLattice, sp: &SequenceSpaceParams, scheme: &PanelScheme) -> Result<ScriptIReport> {
    sp.check(lattice)?;
    let gl_y = gauss_legendre(8);
    let gl_t = gauss_legendre(16);
    let rows: Vec<i64> = lattice.rows_j().collect();
    let c8 = 1.0 / (2.0 * 2f64.sqrt());
    let per_row = par::map(rows.len(), |ri| {
        let j = rows[ri];
        let jj = lattice.j_interval(j);
        let (yc, yr) = (0.5 * (jj.lo + jj.hi), 0.5 * (jj.hi - jj.lo));
        let mut acc = 0.0;
        for (ty, wy) in gl_y.nodes.iter().zip(&gl_y.weights) {
            let y = yc + yr * ty;
            // v = y + (y/(2√2)) sin θ removes the square-root endpoint behaviour.
            let mut inner = 0.0;
            for (tt, wt) in gl_t.nodes.iter().zip(&gl_t.weights) {
                let th = FRAC_PI_2 * tt;
                let r = y * c8 * th.cos();
                let v = y + y * c8 * th.sin();
                let rule = XRule::new(f.x_window(v));
                let (sum, tail) = rule.integrate(|u| {
                    let w = covered_length(lattice, j, u - r, u + r);
                    if w == 0.0 {
                        0.0
                    } else {
                        f.eval(Complex64::new(u, v)).norm().powf(sp.p) * w
                    }
                });
                inner += FRAC_PI_2 * wt * (sum + tail) * r / (v * v);
            }
            if inner > 0.0 {
                acc += yr * wy * (inner.ln() * sp.q / sp.p + sp.spec.ln_eval(y) + sp.alpha * y.ln()).exp();
            }
        }
        acc
    });
    let value: f64 = per_row.into_iter().sum();
    let norm = mixed_norm_ref(f, &sp.space(), &sp.spec, scheme)?;
    if norm.divergent {
        return Err(LabError::Divergent("function not in the space".into()));
    }
    if norm.integral == 0.0 {
        return Ok(ScriptIReport { value, norm_q: 0.0, ratio: 0.0, tail_fraction: 0.0, warning: None });
    }
    let (j0, j1) = lattice.config.j_range;
    let (y0, y1) = (lattice.j_interval(j0).lo, lattice.j_interval(j1).hi);
    let tail_fraction = (1.0 - footprint_mass(f, lattice, sp, y0, y1) / norm.integral).max(0.0);
    Ok(ScriptIReport {
        value,
        norm_q: norm.integral,
        ratio: value / norm.integral,
        tail_fraction,
        warning: truncation_warning(tail_fraction),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeReport {
    pub norm: f64,
    /// `‖y F′‖`
    pub derivative_norm: f64,
    /// `‖yF′‖/‖F‖`
    pub ratio: f64,
    /// `‖F‖/‖yF′‖`
    pub inverse: f64,
}

/// Compares `‖F‖` with `‖y F′(x+iy)‖` in the mixed norm.
pub fn derivative_char_check(
    f: &crate::bergman::HoloTestFunction,
    params: &SpaceParams,
    spec: &WeightSpec,
    scheme: &PanelScheme,
) -> Result<DerivativeReport> {
    if f.terms.is_empty() {
        return Err(LabError::Config { field: "function".into(), reason: "zero function has no ratio".into() });
    }
    let a = mixed_norm_fn(Arc::new(f.clone()), params, spec, scheme)?;
    let b = mixed_norm_fn(Arc::new(ScaledDerivative(f.clone())), params, spec, scheme)?;
    if a.divergent || b.divergent {
        return Err(LabError::Divergent("function not in the space".into()));
    }
    Ok(DerivativeReport { norm: a.norm, derivative_norm: b.norm, ratio: b.norm / a.norm, inverse: a.norm / b.norm })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceAverageRow {
    pub y: f64,
    /// `‖F(·+iy)‖_p^q`
    pub lhs: f64,
    /// `∫_{|v−y|<yδ²/4} ‖F(·+iv)‖_p^q dv/v`
    pub rhs: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceAverageReport {
    pub rows: Vec<SliceAverageRow>,
    /// empirical constant `max lhs/rhs` (0 when `F ≡ 0`)
    pub worst: f64,
}

/// Checks `‖F(·+iy)‖_p^q ≤ C ∫_{|v−y|<yδ²/4} ‖F(·+iv)‖_p^q dv/v` on `y_grid`.
pub fn slice_average_check(f: &dyn HalfPlaneFn, delta: f64, p: f64, q: f64, y_grid: &[f64]) -> Result<SliceAverageReport> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(domain("delta", delta));
    }
    SpaceParams::new(p, q, 0.0, 0.0)?;
    let norm_q = |v: f64| {
        let (s, t) = slice_integral(f, p, v);
        (s + t).powf(q / p)
    };
    let gl = gauss_legendre(8);
    let rows: Vec<SliceAverageRow> = y_grid
        .iter()
        .map(|&y| {
            let lhs = norm_q(y);
            let h = y * delta * delta / 4.0;
            let mut rhs = 0.0;
            for half in [-1.0, 1.0] {
                let c = y + half * 0.5 * h;
                for (x, w) in gl.nodes.iter().zip(&gl.weights) {
                    let v = c + 0.5 * h * x;
                    rhs += 0.5 * h * w * norm_q(v) / v;
                }
            }
            let ratio = if lhs == 0.0 { 0.0 } else { lhs / rhs };
            SliceAverageRow { y, lhs, rhs, ratio }
        })
        .collect();
    let worst = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(SliceAverageReport { rows, worst })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bergman::{builtin_family, HoloTestFunction};
    use crate::lattice::{build_lattice, LatticeConfig};
    use crate::weights::GrowthFunction;
    use proptest::prelude::*;

    fn phi_t() -> GrowthFunction {
        GrowthFunction::power(1.0, 1.0).unwrap()
    }

    fn lattice(delta: f64, lmax: i64, jmax: i64) -> DeltaLattice {
        build_lattice(&LatticeConfig::symmetric(delta, lmax, jmax).unwrap())
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn sequence_norm_examples() {
        let lat = lattice(0.5, 10, 10);
        let spec = WeightSpec::new(1, 1, 1.0, phi_t()).unwrap();
        let sp = SequenceSpaceParams::for_lattice(2.0, 2.0, 0.0, &spec, &lat).unwrap();
        let mut lam = CoefficientArray::new(&lat);
        lam.insert(0, 0, c(1.0, 0.0)).unwrap();
        assert!((sequence_norm(&lam, &sp).unwrap() - 1.0).abs() < 1e-15);
        lam.insert(1, 0, c(0.0, 1.0)).unwrap();
        let flat = SequenceSpaceParams::for_lattice(2.0, 2.0, 0.0, &WeightSpec::trivial(), &lat).unwrap();
        assert!((sequence_norm(&lam, &flat).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!(lam.insert(11, 0, c(1.0, 0.0)).is_err());
        let other = SequenceSpaceParams::new(2.0, 2.0, 0.0, 0.5 * lat.gamma(), &spec).unwrap();
        assert!(sequence_norm(&lam, &other).is_err());
    }

    #[test]
    fn sampling_values() {
        let lat = lattice(0.5, 5, 3);
        let f = HoloTestFunction::shifted_power(1.0, 3);
        let s = sample_on_lattice(&f, &lat).unwrap();
        assert!((s.get(0, 0) - c(0.0, 0.125)).norm() < 1e-15);
        let z = sample_on_lattice(&HoloTestFunction::zero(), &lat).unwrap();
        assert!(z.is_empty());
        // translation by a multiple of the row spacing shifts the index
        let j = 2;
        let a = lat.spacing(j) * 2.0;
        let g = f.translate(a);
        let sg = sample_on_lattice(&g, &lat).unwrap();
        assert!((sg.get(-1, j) - s.get(1, j)).norm() < 1e-14);
    }

    #[test]
    fn euler_maclaurin_rows_match_direct_sums() {
        let lat = lattice(0.1, 60_000, 3000);
        let f = builtin_family()[4].clone();
        for j in [-3000, -1000, 0, 1500, 3000] {
            let (v, m) = row_sum(&f, &lat, j, 2.0);
            let direct: f64 = lat.cols_l().map(|l| f.eval(lat.point(l, j)).norm_sqr()).sum();
            assert_eq!(m, RowMethod::EulerMaclaurin);
            assert!((v / direct - 1.0).abs() < 1e-9, "j={j} {v} {direct}");
        }
    }

    #[test]
    fn segment_integral_closed_form() {
        // ∫_a^b dx/(x²+1) = atan b − atan a
        let g = |x: f64| 1.0 / (x * x + 1.0);
        let win = XWindow::new(0.0, 0.0, 1.0);
        for (a, b) in [(-1e6, 1e6), (-3.0, 0.5), (2.0, 1e4)] {
            let v = integrate_segment(&g, win, a, b);
            assert!((v - (b.atan() - a.atan())).abs() < 1e-12);
        }
    }

    #[test]
    fn sampling_scaling_and_zero() {
        let lat = lattice(0.5, 4000, 600);
        let sp = SequenceSpaceParams::for_lattice(2.0, 2.0, 0.0, &WeightSpec::trivial(), &lat).unwrap();
        let scheme = PanelScheme::default();
        let f = HoloTestFunction::shifted_power(1.0, 3);
        let r: Vec<f64> = [0.5, 1.0, 2.0]
            .iter()
            .map(|&cc| sampling_check(&f.dilate(cc), &lat, &sp, &scheme).unwrap().ratio_upper)
            .collect();
        let (lo, hi) = (r.iter().cloned().fold(f64::INFINITY, f64::min), r.iter().cloned().fold(0.0, f64::max));
        assert!(hi / lo < 2.0, "{r:?}");
        let z = sampling_check(&HoloTestFunction::zero(), &lat, &sp, &scheme).unwrap();
        assert!(z.zero && z.lhs == 0.0);
    }

    #[test]
    fn synthesis_linear_and_kernel_atom() {
        let lat = lattice(0.5, 20, 20);
        let spec = WeightSpec::trivial();
        let sp = SequenceSpaceParams::for_lattice(2.0, 2.0, 1.0, &spec, &lat).unwrap();
        let atoms: Vec<(i64, i64)> = lat.indices().collect();
        let a = random_coefficients(&lat, &atoms, 10, 1).unwrap();
        let b = random_coefficients(&lat, &atoms, 10, 2).unwrap();
        let z = c(0.3, 0.7);
        let s = synthesize(&a.add(&b), 1.0, &sp, z).unwrap();
        let t = synthesize(&a, 1.0, &sp, z).unwrap() + synthesize(&b, 1.0, &sp, z).unwrap();
        assert!((s - t).norm() < 1e-12 * t.norm());

        let mut one = CoefficientArray::new(&lat);
        one.insert(0, 0, c(1.0, 0.0)).unwrap();
        let kp = KernelParams::new(1.0).unwrap();
        assert!((synthesize(&one, 1.0, &sp, z).unwrap() - kp.kernel(z, Complex64::i())).norm() < 1e-15);
        // ‖K_1(·, i)‖²_{A²_1} = K_1(i, i) = 1/(2π)
        let r = synthesis_bound(&one, &sp, &PanelScheme::default()).unwrap();
        assert!((r.function_q - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-8, "{r:?}");
    }

    #[test]
    fn reconstruct_round_trip_and_zero() {
        let lat = lattice(0.1, 2_000_000, 6000);
        let sp = SequenceSpaceParams::for_lattice(2.0, 2.0, 0.0, &WeightSpec::trivial(), &lat).unwrap();
        let opts = ReconstructOptions::default();
        let atoms = atom_set(&lat, &opts);
        let lam = random_coefficients(&lat, &atoms, 50, 9).unwrap();
        let f = AtomicFunction::new(&lam, 0.0, &sp).unwrap();
        let r = reconstruct(&f, &lat, &sp, &opts).unwrap();
        assert!(r.residual < 1e-6, "{}", r.residual);
        let z = reconstruct(&HoloTestFunction::zero(), &lat, &sp, &opts).unwrap();
        assert!(z.coefficients.is_empty() && z.residual == 0.0);
    }

    #[test]
    fn script_i_homogeneous_and_zero() {
        let lat = lattice(0.5, 20_000, 150);
        let sp = SequenceSpaceParams::for_lattice(2.0, 2.0, 0.0, &WeightSpec::trivial(), &lat).unwrap();
        let s = PanelScheme::default();
        let f = HoloTestFunction::shifted_power(1.0, 4);
        let a = script_i(&f, &lat, &sp, &s).unwrap();
        let b = script_i(&f.scale(c(2.0, 0.0)), &lat, &sp, &s).unwrap();
        assert!((b.value / a.value - 4.0).abs() < 1e-12);
        assert!(a.ratio.is_finite() && a.ratio > 0.0);
        let z = script_i(&HoloTestFunction::zero(), &lat, &sp, &s).unwrap();
        assert_eq!(z.value, 0.0);
    }

    #[test]
    fn covered_length_interior_is_four_times() {
        let lat = lattice(0.5, 1000, 5);
        for (lo, hi) in [(-0.3, 0.2), (1.0, 1.01), (-2.0, 2.0)] {
            let v = covered_length(&lat, 2, lo, hi);
            // brute force over intervals
            let b: f64 = lat
                .cols_l()
                .map(|l| {
                    let iv = lat.i_interval(l, 2);
                    (iv.hi.min(hi) - iv.lo.max(lo)).max(0.0)
                })
                .sum();
            assert!((v - b).abs() < 1e-12 && (v / (hi - lo) - 4.0).abs() < 0.3);
        }
    }

    #[test]
    fn derivative_ratios() {
        let params = SpaceParams::new(2.0, 2.0, 0.0, 0.0).unwrap();
        let s = PanelScheme::default();
        let f = HoloTestFunction::shifted_power(1.0, 3);
        let r = derivative_char_check(&f, &params, &WeightSpec::trivial(), &s).unwrap();
        let r2 = derivative_char_check(&f.dilate(2.0), &params, &WeightSpec::trivial(), &s).unwrap();
        assert!((r.ratio / r2.ratio - 1.0).abs() < 1e-8);
        assert!((r.ratio * r.inverse - 1.0).abs() < 1e-14);
        assert!(derivative_char_check(&HoloTestFunction::zero(), &params, &WeightSpec::trivial(), &s).is_err());
    }

    #[test]
    fn derivative_ratio_plancherel() {
        // F(x+iy) = ∫ f̂(ξ) e^{2πiξ(x+iy)} dξ over ξ > 0 gives
        // ‖yF′‖²/‖F‖² = Γ(α+3)/(4Γ(α+1)) = (α+1)(α+2)/4 at p = q = 2, k = 0.
        let s = PanelScheme::default();
        for alpha in [0.0, 0.5, 1.5] {
            let params = SpaceParams::new(2.0, 2.0, alpha, alpha).unwrap();
            let want = ((alpha + 1.0) * (alpha + 2.0) / 4.0).sqrt();
            for f in builtin_family() {
                let r = derivative_char_check(&f, &params, &WeightSpec::trivial(), &s).unwrap();
                assert!((r.ratio / want - 1.0).abs() < 1e-8, "{alpha} {}", r.ratio);
            }
        }
    }

    #[test]
    fn slice_average() {
        let f = HoloTestFunction::shifted_power(1.0, 3);
        let ys: Vec<f64> = (-4..=4).map(|j| 2f64.powi(j)).collect();
        let r = slice_average_check(&f, 0.5, 2.0, 2.0, &ys).unwrap();
        assert!(r.worst.is_finite() && r.worst > 0.0);
        let r2 = slice_average_check(&f.scale(c(2.0, 0.0)), 0.5, 2.0, 2.0, &ys).unwrap();
        assert!((r.worst / r2.worst - 1.0).abs() < 1e-12);
        let z = slice_average_check(&HoloTestFunction::zero(), 0.5, 2.0, 2.0, &ys).unwrap();
        assert_eq!(z.worst, 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn sequence_norm_homogeneous(seed in 0u64..1000, re in -3.0..3.0f64, im in -3.0..3.0f64) {
            let lat = lattice(0.3, 10, 10);
            let atoms: Vec<(i64, i64)> = lat.indices().collect();
            let lam = random_coefficients(&lat, &atoms, 12, seed).unwrap();
            for (p, q) in [(2.0, 2.0), (1.5, 3.0)] {
                let sp = SequenceSpaceParams::for_lattice(p, q, 0.3, &WeightSpec::new(1, 1, -1.0, phi_t()).unwrap(), &lat).unwrap();
                let a = sequence_norm(&lam, &sp).unwrap();
                let b = sequence_norm(&lam.scaled(c(re, im)), &sp).unwrap();
                prop_assert!((b - c(re, im).norm() * a).abs() <= 1e-12 * b.max(1e-300));
            }
        }
    }
}
