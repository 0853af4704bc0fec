//! δ-lattices in the upper half-plane and audits of their interval systems.
//!
//! `z_{l,j} = (δ²/4)·l·2^{γj−1} + i·2^{γj}`. With `y_j = 2^{γj}`:
//!
//! * `I_{l,j}  = { x : |x − x_{l,j}| < (δ²/4) y_j }`
//! * `I′_{l,j} = { x : |x − x_{l,j}| < (δ²/20) y_j }`
//! * `J_j      = { y : |y − y_j| < (δ²/4) y_j }`
//! * `J′_j     = { y : |y − y_j| < (δ²/20) y_j }`
//!
//! The lattice is lazy: points and intervals are computed on demand.

use std::f64::consts::LN_2;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, LabError, Result};
use crate::par;

/// Open interval `(lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.lo < other.hi && other.lo < self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaBounds {
    pub lo: f64,
    pub hi: f64,
    pub mid: f64,
}

fn log_ratio(r: f64) -> f64 {
    ((1.0 + r) / (1.0 - r)).ln()
}

/// Admissible open interval for `γ`:
/// `ln((1+δ²/20)/(1−δ²/20))/(4 ln 2) < γ < ln((1+δ²/4)/(1−δ²/4))/(4 ln 2)`.
pub fn gamma_bounds(delta: f64) -> Result<GammaBounds> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(domain("delta", delta));
    }
    let d2 = delta * delta;
    let lo = log_ratio(d2 / 20.0) / (4.0 * LN_2);
    let hi = log_ratio(d2 / 4.0) / (4.0 * LN_2);
    Ok(GammaBounds { lo, hi, mid: 0.5 * (lo + hi) })
}

/// Smallest `γ` for which the `J′_j` are pairwise disjoint.
pub fn j_prime_disjoint_gamma(delta: f64) -> f64 {
    log_ratio(delta * delta / 20.0) / LN_2
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeConfig {
    pub delta: f64,
    pub gamma: f64,
    /// inclusive range of `l`
    pub l_range: (i64, i64),
    /// inclusive range of `j`
    pub j_range: (i64, i64),
}

impl LatticeConfig {
    /// `gamma = None` selects the midpoint of [`gamma_bounds`].
    pub fn new(delta: f64, gamma: Option<f64>, l_range: (i64, i64), j_range: (i64, i64)) -> Result<Self> {
        let b = gamma_bounds(delta)?;
        let gamma = gamma.unwrap_or(b.mid);
        if !(gamma > b.lo && gamma < b.hi) {
            return Err(LabError::Config {
                field: "gamma".into(),
                reason: format!("{gamma} outside ({}, {})", b.lo, b.hi),
            });
        }
        if l_range.0 > l_range.1 || j_range.0 > j_range.1 {
            return Err(LabError::Config { field: "range".into(), reason: "empty index range".into() });
        }
        Ok(LatticeConfig { delta, gamma, l_range, j_range })
    }

    /// Symmetric ranges `|l| ≤ lmax`, `|j| ≤ jmax` with the midpoint `γ`.
    pub fn symmetric(delta: f64, lmax: i64, jmax: i64) -> Result<Self> {
        LatticeConfig::new(delta, None, (-lmax, lmax), (-jmax, jmax))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeRow {
    pub l: i64,
    pub j: i64,
    pub x: f64,
    pub y: f64,
    pub i_lo: f64,
    pub i_hi: f64,
    pub j_lo: f64,
    pub j_hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaLattice {
    pub config: LatticeConfig,
}

pub fn build_lattice(config: &LatticeConfig) -> DeltaLattice {
    DeltaLattice { config: *config }
}

impl DeltaLattice {
    pub fn delta(&self) -> f64 {
        self.config.delta
    }

    pub fn gamma(&self) -> f64 {
        self.config.gamma
    }

    pub fn y(&self, j: i64) -> f64 {
        2f64.powf(self.config.gamma * j as f64)
    }

    /// Horizontal spacing `(δ²/8)·y_j` on row `j`.
    pub fn spacing(&self, j: i64) -> f64 {
        self.config.delta.powi(2) / 8.0 * self.y(j)
    }

    pub fn x(&self, l: i64, j: i64) -> f64 {
        self.config.delta.powi(2) / 4.0 * l as f64 * 2f64.powf(self.config.gamma * j as f64 - 1.0)
    }

    pub fn point(&self, l: i64, j: i64) -> Complex64 {
        Complex64::new(self.x(l, j), self.y(j))
    }

    fn around(&self, c: f64, j: i64, r: f64) -> Interval {
        let h = r * self.y(j);
        Interval { lo: c - h, hi: c + h }
    }

    pub fn i_interval(&self, l: i64, j: i64) -> Interval {
        self.around(self.x(l, j), j, self.config.delta.powi(2) / 4.0)
    }

    pub fn i_prime(&self, l: i64, j: i64) -> Interval {
        self.around(self.x(l, j), j, self.config.delta.powi(2) / 20.0)
    }

    pub fn j_interval(&self, j: i64) -> Interval {
        self.around(self.y(j), j, self.config.delta.powi(2) / 4.0)
    }

    pub fn j_prime(&self, j: i64) -> Interval {
        self.around(self.y(j), j, self.config.delta.powi(2) / 20.0)
    }

    pub fn len(&self) -> usize {
        let (l, j) = (self.config.l_range, self.config.j_range);
        ((l.1 - l.0 + 1) * (j.1 - j.0 + 1)) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn rows_j(&self) -> impl Iterator<Item = i64> {
        self.config.j_range.0..=self.config.j_range.1
    }

    pub fn cols_l(&self) -> impl Iterator<Item = i64> {
        self.config.l_range.0..=self.config.l_range.1
    }

    /// All `(l, j)` pairs, `j`-major.
    pub fn indices(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        self.rows_j().flat_map(move |j| self.cols_l().map(move |l| (l, j)))
    }

    pub fn row(&self, l: i64, j: i64) -> LatticeRow {
        let (i, jj) = (self.i_interval(l, j), self.j_interval(j));
        LatticeRow { l, j, x: self.x(l, j), y: self.y(j), i_lo: i.lo, i_hi: i.hi, j_lo: jj.lo, j_hi: jj.hi }
    }

    /// `l` values of row `j` with `|x − x_{l,j}| < r·y_j`, clipped to the index range.
    fn l_candidates(&self, x: f64, j: i64, r: f64) -> std::ops::RangeInclusive<i64> {
        let s = self.spacing(j);
        let h = r * self.y(j);
        let a = ((x - h) / s).floor() as i64 - 1;
        let b = ((x + h) / s).ceil() as i64 + 1;
        a.max(self.config.l_range.0)..=b.min(self.config.l_range.1)
    }

    fn j_candidates(&self, y: f64, r: f64) -> std::ops::RangeInclusive<i64> {
        let g = self.config.gamma;
        let a = ((y / (1.0 + r)).log2() / g).floor() as i64 - 1;
        let b = ((y / (1.0 - r)).log2() / g).ceil() as i64 + 1;
        a.max(self.config.j_range.0)..=b.min(self.config.j_range.1)
    }

    /// Number of `I_{l,j}` (fixed `j`) containing `x`.
    pub fn i_multiplicity(&self, x: f64, j: i64) -> usize {
        self.l_candidates(x, j, self.config.delta.powi(2) / 4.0)
            .filter(|&l| self.i_interval(l, j).contains(x))
            .count()
    }

    pub fn i_prime_multiplicity(&self, x: f64, j: i64) -> usize {
        self.l_candidates(x, j, self.config.delta.powi(2) / 20.0)
            .filter(|&l| self.i_prime(l, j).contains(x))
            .count()
    }

    /// Number of `J_j` containing `y`.
    pub fn j_multiplicity(&self, y: f64) -> usize {
        self.j_candidates(y, self.config.delta.powi(2) / 4.0)
            .filter(|&j| self.j_interval(j).contains(y))
            .count()
    }

    pub fn j_prime_multiplicity(&self, y: f64) -> usize {
        self.j_candidates(y, self.config.delta.powi(2) / 20.0)
            .filter(|&j| self.j_prime(j).contains(y))
            .count()
    }

    /// `j` with `y ∈ J_j`.
    pub fn rows_containing(&self, y: f64) -> Vec<i64> {
        self.j_candidates(y, self.config.delta.powi(2) / 4.0)
            .filter(|&j| self.j_interval(j).contains(y))
            .collect()
    }

    /// `l` with `x ∈ I_{l,j}`.
    pub fn cols_containing(&self, x: f64, j: i64) -> Vec<i64> {
        self.l_candidates(x, j, self.config.delta.powi(2) / 4.0)
            .filter(|&l| self.i_interval(l, j).contains(x))
            .collect()
    }

    /// Vertical footprint `[y_{j_min}, y_{j_max}]`.
    pub fn y_footprint(&self) -> (f64, f64) {
        (self.y(self.config.j_range.0), self.y(self.config.j_range.1))
    }

    /// Horizontal footprint of row `j`.
    pub fn x_footprint(&self, j: i64) -> (f64, f64) {
        (self.x(self.config.l_range.0, j), self.x(self.config.l_range.1, j))
    }
}

fn check_upper(z: Complex64) -> Result<()> {
    if !(z.im > 0.0) || !z.re.is_finite() {
        return Err(domain("imaginary part", z.im));
    }
    Ok(())
}

/// Pseudo-hyperbolic ratio `|z − w| / |z̄ − w|`.
pub fn pseudo_hyperbolic(z: Complex64, w: Complex64) -> f64 {
    (z - w).norm() / (z.conj() - w).norm()
}

/// `d(z, w) = ½ ln((1+ρ)/(1−ρ)) = artanh ρ`.
pub fn bergman_distance(z: Complex64, w: Complex64) -> Result<f64> {
    check_upper(z)?;
    check_upper(w)?;
    Ok(pseudo_hyperbolic(z, w).atanh())
}

/// Euclidean disk `(center, radius)` equal to the ball `B_ρ(z)`.
pub fn bergman_ball(z: Complex64, rho: f64) -> (Complex64, f64) {
    let r = rho.tanh();
    let r2 = r * r;
    (Complex64::new(z.re, z.im * (1.0 + r2) / (1.0 - r2)), 2.0 * z.im * r / (1.0 - r2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSets {
    /// `(j, x)`: abscissae tested against row `j`
    pub xs: Vec<(i64, f64)>,
    pub ys: Vec<f64>,
}

impl SampleSets {
    pub fn len(&self) -> usize {
        self.xs.len() + self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `n` random abscissae and `n` random ordinates in the footprint, plus the
/// interval endpoints nudged by one part in `10¹²` to either side.
pub fn sample_sets(lattice: &DeltaLattice, n: usize, seed: u64) -> SampleSets {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (j0, j1) = lattice.config.j_range;
    let (l0, l1) = lattice.config.l_range;
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let j = rng.random_range(j0..=j1);
        let (a, b) = lattice.x_footprint(j);
        xs.push((j, if a < b { rng.random_range(a..=b) } else { a }));
        let (ya, yb) = lattice.y_footprint();
        ys.push(if ya < yb { 2f64.powf(rng.random_range(ya.log2()..=yb.log2())) } else { ya });
    }
    // Endpoints of neighbouring intervals coincide in exact arithmetic, so
    // the nudge is relative to the row scale to land clearly on one side.
    for j in [j0, (j0 + j1) / 2, j1] {
        let eps = 1e-9 * lattice.spacing(j);
        for l in l0..=l1 {
            for iv in [lattice.i_interval(l, j), lattice.i_prime(l, j)] {
                for e in [iv.lo, iv.hi] {
                    xs.push((j, e - eps));
                    xs.push((j, e + eps));
                }
            }
        }
    }
    for j in j0..=j1 {
        let eps = 1e-9 * lattice.spacing(j);
        for iv in [lattice.j_interval(j), lattice.j_prime(j)] {
            for e in [iv.lo, iv.hi] {
                ys.push(e - eps);
                ys.push(e + eps);
            }
        }
    }
    SampleSets { xs, ys }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub name: String,
    pub pass: bool,
    pub checked: u64,
    pub violations: u64,
    /// worst observed value (multiplicity, or overlap length)
    pub worst: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    /// properties (i)–(v) in order
    pub properties: Vec<PropertyCheck>,
    pub max_x_multiplicity: usize,
    /// empirical `N` of property (v)
    pub max_y_multiplicity: usize,
    /// samples outside the truncated footprint
    pub excluded: u64,
    pub samples: u64,
    /// smallest `γ` giving disjoint `J′_j` at this `δ`, for reference
    pub j_prime_gamma_min: f64,
}

impl CoverageReport {
    pub fn all_pass(&self) -> bool {
        self.properties.iter().all(|p| p.pass)
    }
}

fn check(name: &str, checked: u64, violations: u64, worst: f64) -> PropertyCheck {
    PropertyCheck { name: name.into(), pass: violations == 0, checked, violations, worst }
}

/// Audits properties (i)–(v) of the interval systems.
///
/// (i) sampled `y` lie in some `J_j` and sampled `x` lie in some `I_{l,j}` of
/// their row; (ii) `I′_{l,j}` pairwise disjoint per row; (iii) `J′_j` pairwise
/// disjoint; (iv) each `x` lies in at most four `I_{l,j}` per row; (v) the
/// multiplicity of `y` in `{J_j}` is finite, recorded as `N`. Disjointness is
/// checked exhaustively on adjacent pairs (the intervals are ordered) and
/// cross-checked by sampled multiplicities.
pub fn covering_audit(lattice: &DeltaLattice, samples: &SampleSets) -> CoverageReport {
    let (ya, yb) = lattice.y_footprint();
    let x_in = |(j, x): (i64, f64)| {
        let (a, b) = lattice.x_footprint(j);
        x >= a && x <= b
    };
    let xs: Vec<(i64, f64)> = samples.xs.iter().copied().filter(|s| x_in(*s)).collect();
    let ys: Vec<f64> = samples.ys.iter().copied().filter(|y| *y >= ya && *y <= yb).collect();
    let excluded = (samples.len() - xs.len() - ys.len()) as u64;

    let xm: Vec<(usize, usize)> =
        par::map(xs.len(), |i| (lattice.i_multiplicity(xs[i].1, xs[i].0), lattice.i_prime_multiplicity(xs[i].1, xs[i].0)));
    let ym: Vec<(usize, usize)> = par::map(ys.len(), |i| (lattice.j_multiplicity(ys[i]), lattice.j_prime_multiplicity(ys[i])));

    let uncovered = xm.iter().filter(|m| m.0 == 0).count() + ym.iter().filter(|m| m.0 == 0).count();
    let p1 = check("(i) coverage", (xm.len() + ym.len()) as u64, uncovered as u64, 0.0);

    let rows: Vec<i64> = lattice.rows_j().collect();
    let (l0, l1) = lattice.config.l_range;
    let row_overlaps: Vec<(u64, u64, f64)> = par::map(rows.len(), |r| {
        let j = rows[r];
        let mut n = 0;
        let mut worst = 0f64;
        for l in l0..l1 {
            let (a, b) = (lattice.i_prime(l, j), lattice.i_prime(l + 1, j));
            if a.overlaps(&b) {
                n += 1;
                worst = worst.max(a.hi - b.lo);
            }
        }
        ((l1 - l0) as u64, n, worst)
    });
    let sampled_i2 = xm.iter().filter(|m| m.1 > 1).count() as u64;
    let p2 = check(
        "(ii) I' disjoint",
        row_overlaps.iter().map(|r| r.0).sum::<u64>() + xm.len() as u64,
        row_overlaps.iter().map(|r| r.1).sum::<u64>() + sampled_i2,
        row_overlaps.iter().map(|r| r.2).fold(0.0, f64::max),
    );

    let (j0, j1) = lattice.config.j_range;
    let mut jn = 0;
    let mut jworst = 0f64;
    for j in j0..j1 {
        let (a, b) = (lattice.j_prime(j), lattice.j_prime(j + 1));
        if a.overlaps(&b) {
            jn += 1;
            jworst = jworst.max((a.hi - b.lo) / lattice.y(j));
        }
    }
    let sampled_j2 = ym.iter().filter(|m| m.1 > 1).count() as u64;
    let p3 = check("(iii) J' disjoint", (j1 - j0) as u64 + ym.len() as u64, jn + sampled_j2, jworst);

    let max_x = xm.iter().map(|m| m.0).max().unwrap_or(0);
    let p4 = check(
        "(iv) I multiplicity <= 4",
        xm.len() as u64,
        xm.iter().filter(|m| m.0 > 4).count() as u64,
        max_x as f64,
    );
    let max_y = ym.iter().map(|m| m.0).max().unwrap_or(0);
    let p5 = PropertyCheck {
        name: "(v) J multiplicity finite".into(),
        pass: !ym.is_empty(),
        checked: ym.len() as u64,
        violations: 0,
        worst: max_y as f64,
    };
    CoverageReport {
        properties: vec![p1, p2, p3, p4, p5],
        max_x_multiplicity: max_x,
        max_y_multiplicity: max_y,
        excluded,
        samples: samples.len() as u64,
        j_prime_gamma_min: j_prime_disjoint_gamma(lattice.delta()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InclusionReport {
    pub cells: u64,
    pub samples: u64,
    /// points of `I_{l,j} + iJ_j` outside `B_{δ²}(z_{l,j})`
    pub outer_violations: u64,
    /// points of `B_{δ²/80}(z_{l,j})` outside `I′_{l,j} + iJ′_j`
    pub inner_violations: u64,
    /// largest `d(z, z_{l,j})/δ²` over the sampled rectangles
    pub outer_worst: f64,
    /// largest normalized offset `max(|x−x_{l,j}|, |y−y_j|)/((δ²/20) y_j)` over the sampled balls
    pub inner_worst: f64,
}

impl InclusionReport {
    pub fn pass(&self) -> bool {
        self.outer_violations == 0 && self.inner_violations == 0
    }
}

/// Checks `I_{l,j} + iJ_j ⊂ B_{δ²}(z_{l,j})` and `B_{δ²/80}(z_{l,j}) ⊂ I′_{l,j} + iJ′_j`
/// on every cell, with the rectangle corners and the ball's extreme points
/// plus `samples_per_cell` random points of each.
pub fn inclusion_audit(lattice: &DeltaLattice, samples_per_cell: usize, seed: u64) -> InclusionReport {
    let cells: Vec<(i64, i64)> = lattice.indices().collect();
    let d2 = lattice.delta().powi(2);
    let shrink = 1.0 - 1e-12;
    let per_cell = par::map(cells.len(), |c| {
        let (l, j) = cells[c];
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (c as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let z = lattice.point(l, j);
        let (ii, jj) = (lattice.i_interval(l, j), lattice.j_interval(j));
        let (ip, jp) = (lattice.i_prime(l, j), lattice.j_prime(j));
        let mut rect: Vec<Complex64> = vec![];
        for a in [ii.lo, ii.hi] {
            for b in [jj.lo, jj.hi] {
                rect.push(Complex64::new(z.re + (a - z.re) * shrink, z.im + (b - z.im) * shrink));
            }
        }
        for _ in 0..samples_per_cell {
            rect.push(Complex64::new(rng.random_range(ii.lo..ii.hi), rng.random_range(jj.lo..jj.hi)));
        }
        let (mut ov, mut ow) = (0u64, 0f64);
        for w in &rect {
            let d = pseudo_hyperbolic(*w, z).atanh();
            ow = ow.max(d / d2);
            if !(d < d2) {
                ov += 1;
            }
        }
        let (c0, r) = bergman_ball(z, d2 / 80.0);
        let mut ball: Vec<Complex64> = (0..8)
            .map(|k| c0 + Complex64::from_polar(r * shrink, k as f64 * std::f64::consts::FRAC_PI_4))
            .collect();
        for _ in 0..samples_per_cell {
            let rr = r * shrink * rng.random::<f64>().sqrt();
            ball.push(c0 + Complex64::from_polar(rr, rng.random_range(0.0..std::f64::consts::TAU)));
        }
        let (mut iv, mut iw) = (0u64, 0f64);
        let unit = d2 / 20.0 * z.im;
        for w in &ball {
            iw = iw.max((w.re - z.re).abs().max((w.im - z.im).abs()) / unit);
            if !(ip.contains(w.re) && jp.contains(w.im)) {
                iv += 1;
            }
        }
        ((rect.len() + ball.len()) as u64, ov, ow, iv, iw)
    });
    InclusionReport {
        cells: cells.len() as u64,
        samples: per_cell.iter().map(|c| c.0).sum(),
        outer_violations: per_cell.iter().map(|c| c.1).sum(),
        inner_violations: per_cell.iter().map(|c| c.3).sum(),
        outer_worst: per_cell.iter().map(|c| c.2).fold(0.0, f64::max),
        inner_worst: per_cell.iter().map(|c| c.4).fold(0.0, f64::max),
    }
}

/// Smallest Bergman distance between distinct lattice points. By dilation
/// and translation invariance only horizontal neighbours and the nearest
/// points of the adjacent row need to be compared.
pub fn separation(lattice: &DeltaLattice) -> f64 {
    let j = lattice.config.j_range.0;
    let z = lattice.point(0, j);
    let mut best = pseudo_hyperbolic(z, lattice.point(1, j)).atanh();
    if lattice.config.j_range.1 > j {
        for l in -2..=2 {
            best = best.min(pseudo_hyperbolic(z, lattice.point(l, j + 1)).atanh());
        }
    }
    best
}
