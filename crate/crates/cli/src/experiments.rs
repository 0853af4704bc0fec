//! The experiments behind `run`. Each returns its table, the verdict of its
//! contract and a few summary lines for the header.

use bergman_lab::atomic::{
    atom_set, random_coefficients, reconstruct as reconstruct_fn, sampling_check as sampling_fn, script_i as script_i_fn,
    derivative_char_check, synthesis_bound, AtomicFunction, ReconstructOptions, SequenceSpaceParams,
};
use bergman_lab::bergman::{
    adjoint_witness as witness_fn, builtin_family, project_fn, project_plus_fn, projection_probe, ComplexPoint,
    HoloTestFunction, KernelParams, FINE_X,
};
use bergman_lab::hilbert::{norm_estimate, schur_verify, threshold_classify, ClassifyOptions, Verdict};
use bergman_lab::lattice::{
    build_lattice, covering_audit, gamma_bounds, inclusion_audit, sample_sets, DeltaLattice, LatticeConfig,
};
use bergman_lab::quadrature::{forelli_rudin as forelli_fn, interval_mass as mass_fn, SpaceParams};
use bergman_lab::special::beta as beta_fn;
use bergman_lab::weights::{growth_class_check, growth_eval, omega0_eval, weight_eval, ClassGrid};

use crate::config::ExperimentConfig;
use crate::row;
use crate::table::Table;
use crate::CliError;

pub struct Outcome {
    pub table: Table,
    pub pass: bool,
    pub notes: Vec<String>,
}

impl Outcome {
    fn new(table: Table, pass: bool) -> Self {
        Outcome { table, pass, notes: vec![] }
    }

    fn note(mut self, key: &str, value: impl std::fmt::Display) -> Self {
        self.notes.push(format!("{key} = {value}"));
        self
    }
}

pub fn dispatch(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    match cfg.experiment.as_str() {
        "weights-check" => weights_check(cfg),
        "interval-mass" => interval_mass(cfg),
        "forelli-rudin" => forelli_rudin(cfg),
        "hilbert-norm" => hilbert_norm(cfg),
        "schur-check" => schur_check(cfg),
        "threshold-map" => threshold_map(cfg),
        "bergman-project" => bergman_project(cfg),
        "adjoint-witness" => adjoint_witness(cfg),
        "lattice-audit" => lattice_audit(cfg),
        "sampling-check" => sampling_check(cfg),
        "atomic-synthesize" => atomic_synthesize(cfg),
        "reconstruct" => reconstruct(cfg),
        "derivative-check" => derivative_check(cfg),
        "script-i" => script_i(cfg),
        other => Err(CliError::Config { field: "experiment".into(), reason: format!("unknown experiment `{other}`") }),
    }
}

/// `max/min` of positive finite values, `∞` otherwise.
fn spread(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 1.0;
    }
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    if lo > 0.0 && hi.is_finite() {
        hi / lo
    } else {
        f64::INFINITY
    }
}

fn family(cfg: &ExperimentConfig) -> Vec<(usize, HoloTestFunction)> {
    let all = builtin_family().into_iter().enumerate();
    match cfg.function.parse::<usize>() {
        Ok(i) => all.filter(|(j, _)| *j == i).collect(),
        Err(_) => all.collect(),
    }
}

fn lattice(cfg: &ExperimentConfig) -> Result<DeltaLattice, CliError> {
    let (lmax, jmax) = (cfg.lmax.unwrap_or(200), cfg.jmax.unwrap_or(40));
    let lc = LatticeConfig::new(cfg.delta, cfg.gamma, (-lmax, lmax), (-jmax, jmax))?;
    Ok(build_lattice(&lc))
}

fn points(cfg: &ExperimentConfig) -> Result<Vec<ComplexPoint>, CliError> {
    cfg.points.iter().map(|z| ComplexPoint::new(z[0], z[1]).map_err(CliError::from)).collect()
}

fn space(cfg: &ExperimentConfig) -> Result<SpaceParams, CliError> {
    Ok(SpaceParams::new(cfg.p, cfg.q, cfg.alpha, cfg.beta)?)
}

fn weights_check(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let spec = cfg.spec()?;
    let cert = growth_class_check(&spec.phi, &ClassGrid::default());
    let mut t = Table::new(&["log2_t", "t", "phi", "omega0", "weight", "ok"]);
    let mut ok_all = true;
    for j in cfg.grid() {
        let x = 2f64.powf(j);
        let phi = growth_eval(&spec.phi, x)?;
        let w = weight_eval(&spec, x)?;
        let ok = w.is_finite() && w > 0.0;
        ok_all &= ok;
        t.push(row![j, x, phi, omega0_eval(spec.eps1, spec.eps2, x)?, w, ok]);
    }
    Ok(Outcome::new(t, ok_all && cert.pass)
        .note("contract", "declared growth class certified; weights finite and positive")
        .note("class_pass", cert.pass)
        .note("class_worst_ratio", format!("{:?}", cert.worst_ratio)))
}

fn interval_mass(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let spec = cfg.spec()?;
    let scheme = cfg.scheme();
    let exact = 1.0 / (1.0 + cfg.beta);
    let mut t = Table::new(&["log2_t", "t", "mass", "ratio", "rel_err"]);
    let mut ratios = vec![];
    let mut worst = 0.0f64;
    for j in cfg.grid() {
        let x = 2f64.powf(j);
        let r = mass_fn(&spec, cfg.beta, x, &scheme)?;
        let err = if spec.k == 0.0 { (r.ratio / exact - 1.0).abs() } else { f64::NAN };
        if spec.k == 0.0 {
            worst = worst.max(err);
        }
        ratios.push(r.ratio);
        t.push(row![j, x, r.mass, r.ratio, err]);
    }
    let s = spread(&ratios);
    let pass = s <= 50.0 && worst <= 1e-8;
    Ok(Outcome::new(t, pass)
        .note("contract", "max/min ratio <= 50; at k = 0 ratio = 1/(1+beta) within 1e-8")
        .note("spread", format!("{s:?}")))
}

fn forelli_rudin(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let spec = cfg.spec()?;
    let scheme = cfg.scheme();
    let b = beta_fn(cfg.beta + 1.0, cfg.a);
    let mut t = Table::new(&["log2_x", "x", "value", "ratio", "closed_form", "rel_err"]);
    let mut ratios = vec![];
    let mut worst = 0.0f64;
    for j in cfg.grid() {
        let x = 2f64.powf(j);
        let r = forelli_fn(&spec, cfg.a, cfg.beta, x, &scheme)?;
        let (closed, err) = if spec.k == 0.0 {
            let c = x.powf(-cfg.a) * b;
            (c, (r.value / c - 1.0).abs())
        } else {
            (f64::NAN, f64::NAN)
        };
        if spec.k == 0.0 {
            worst = worst.max(err);
        }
        ratios.push(r.ratio);
        t.push(row![j, x, r.value, r.ratio, closed, err]);
    }
    let s = spread(&ratios);
    Ok(Outcome::new(t, s <= 50.0 && worst <= 1e-6)
        .note("contract", "max/min ratio <= 50; at k = 0 rel_err <= 1e-6 against x^-a B(beta+1, a)")
        .note("spread", format!("{s:?}")))
}

fn hilbert_norm(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let spec = cfg.spec()?;
    let params = SpaceParams::new(cfg.p, cfg.p, cfg.alpha, cfg.beta)?;
    let r = norm_estimate(&params, &spec, &cfg.scheme())?;
    let e = (cfg.alpha + 1.0) / cfg.p;
    let exact = if spec.k == 0.0 && params.alpha + 1.0 < params.p * (params.beta + 1.0) {
        beta_fn(cfg.beta + 1.0 - e, e)
    } else {
        f64::NAN
    };
    let mut t = Table::new(&["j", "estimate", "exact", "ratio"]);
    for (j, v) in &r.trend {
        t.push(row![*j as i64, *v, exact, v / exact]);
    }
    let in_band = exact.is_nan() || (r.value >= 0.98 * exact && r.value <= exact * (1.0 + 1e-12));
    Ok(Outcome::new(t, r.converged && r.value.is_finite() && in_band)
        .note("contract", "iteration converged; at k = 0 with alpha+1 < p(beta+1) the estimate lies in [0.98, 1] x B(beta+1-(alpha+1)/p, (alpha+1)/p)")
        .note("iterations", r.iterations)
        .note("estimate", format!("{:?}", r.value)))
}

fn schur_check(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let spec = cfg.spec()?;
    let params = space(cfg)?;
    let grid: Vec<f64> = cfg.grid().iter().map(|j| 2f64.powf(*j)).collect();
    let r = schur_verify(&params, &spec, &grid, &cfg.scheme())?;
    let mut t = Table::new(&["x", "ratio_first", "ratio_second"]);
    for row in &r.rows {
        t.push(row![row.x, row.ratio_first, row.ratio_second]);
    }
    let admissible = SpaceParams::new(cfg.p, cfg.p, cfg.alpha, cfg.beta)?.admissible();
    Ok(Outcome::new(t, !admissible || r.bounded)
        .note("contract", "both Schur ratios bounded whenever alpha+1 < p(beta+1)")
        .note("admissible", admissible)
        .note("bounded", r.bounded))
}

fn threshold_map(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let spec = cfg.spec()?;
    let opts = ClassifyOptions::default();
    let betas = cfg.grid();
    let classes = threshold_classify(cfg.q, cfg.alpha, &spec, &betas, &opts)?;
    let mut t = Table::new(&[
        "beta",
        "eta",
        "predicate",
        "verdict",
        "growth",
        "increment_ratio",
        "witness_finite",
        "probe_bounded",
        "match",
    ]);
    let mut misses = 0;
    for c in &classes {
        let params = SpaceParams::new(cfg.p, cfg.q, cfg.alpha, c.beta)?;
        let probe = projection_probe(&params, &spec)?;
        let eta = cfg.q * (c.beta + 1.0) - (cfg.alpha + 1.0);
        let agrees = match c.matches() {
            None => None,
            Some(m) => Some(m && probe.bounded == c.predicate),
        };
        if agrees == Some(false) {
            misses += 1;
        }
        let label = match agrees {
            None => "excluded",
            Some(true) => "yes",
            Some(false) => "no",
        };
        let verdict = if c.verdict == Verdict::NearCritical { "near-critical".to_string() } else { c.verdict.to_string() };
        t.push(row![c.beta, eta, c.predicate, verdict, c.growth, c.increment_ratio, c.witness_finite, probe.bounded, label]);
    }
    Ok(Outcome::new(t, misses == 0)
        .note("contract", "classifier verdict and projection probe equal alpha+1 < q(beta+1) outside |eta| < band")
        .note("band", opts.band)
        .note("misclassified", misses))
}

fn bergman_project(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let kp = KernelParams::new(cfg.beta)?;
    let scheme = cfg.scheme();
    let mut t = Table::new(&["function", "label", "x", "y", "p_re", "p_im", "f_re", "f_im", "rel_err", "p_plus", "ok"]);
    let mut pass = true;
    for (i, f) in family(cfg) {
        for z in points(cfg)? {
            let want = f.eval(z.c());
            let got = project_fn(&f, &kp, z, &scheme)?;
            let plus = project_plus_fn(&f, &kp, z, &scheme, FINE_X)?;
            let err = (got.value - want).norm() / want.norm();
            let ok = !got.divergent && err <= 1e-3 && plus >= want.norm() * (1.0 - 1e-9);
            pass &= ok;
            t.push(row![i, f.label(), z.re, z.im, got.value.re, got.value.im, want.re, want.im, err, plus, ok]);
        }
    }
    Ok(Outcome::new(t, pass).note("contract", "|P f - f|/|f| <= 1e-3 and P+ f >= |f| at every point"))
}

fn adjoint_witness(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let spec = cfg.spec()?;
    let params = space(cfg)?;
    let mut t = Table::new(&["x", "y", "value_re", "value_im", "closed_re", "closed_im", "rel_err", "c_rel_err"]);
    let mut worst = 0.0f64;
    for z in points(cfg)? {
        let w = witness_fn(&params, &spec, z)?;
        let err = (w.value - w.closed_form).norm() / w.closed_form.norm();
        let c_err = (w.c_numeric - w.c_mean_value).norm() / w.c_mean_value.norm();
        worst = worst.max(err).max(c_err);
        t.push(row![z.re, z.im, w.value.re, w.value.im, w.closed_form.re, w.closed_form.im, err, c_err]);
    }
    let probe = projection_probe(&params, &spec)?;
    Ok(Outcome::new(t, worst <= 1e-8)
        .note("contract", "disk quadrature matches the closed form and the mean-value constant within 1e-8")
        .note("probe_bounded", probe.bounded)
        .note("predicate", probe.predicate))
}

fn lattice_audit(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let lat = lattice(cfg)?;
    let samples = sample_sets(&lat, cfg.samples, cfg.seed);
    let cover = covering_audit(&lat, &samples);
    let per_cell = (cfg.samples / lat.len().max(1)).max(1);
    let incl = inclusion_audit(&lat, per_cell, cfg.seed);
    let mut t = Table::new(&["property", "checked", "violations", "worst", "pass"]);
    for p in &cover.properties {
        t.push(row![p.name.as_str(), p.checked, p.violations, p.worst, p.pass]);
    }
    t.push(row!["outer inclusion", incl.samples, incl.outer_violations, incl.outer_worst, incl.outer_violations == 0]);
    t.push(row!["inner inclusion", incl.samples, incl.inner_violations, incl.inner_worst, incl.inner_violations == 0]);
    let gb = gamma_bounds(cfg.delta)?;
    Ok(Outcome::new(t, cover.all_pass() && incl.pass())
        .note("contract", "all covering properties and both inclusions hold with zero violations")
        .note("gamma_interval", format!("({:?}, {:?})", gb.lo, gb.hi))
        .note("j_prime_gamma_min", format!("{:?}", cover.j_prime_gamma_min))
        .note("samples", samples.len())
        .note("excluded", cover.excluded))
}

fn sequence_params(cfg: &ExperimentConfig, lat: &DeltaLattice) -> Result<SequenceSpaceParams, CliError> {
    Ok(SequenceSpaceParams::for_lattice(cfg.p, cfg.q, cfg.alpha, &cfg.spec()?, lat)?)
}

fn sampling_check(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let lat = lattice(cfg)?;
    let sp = sequence_params(cfg, &lat)?;
    let scheme = cfg.scheme();
    let mut t = Table::new(&[
        "function",
        "label",
        "lhs",
        "norm_q",
        "ratio_upper",
        "ratio_lower",
        "normalized",
        "footprint_normalized",
        "tail_fraction",
        "em_rows",
        "warning",
    ]);
    let mut uppers = vec![];
    for (i, f) in family(cfg) {
        let r = sampling_fn(&f, &lat, &sp, &scheme)?;
        uppers.push(r.ratio_upper);
        let warn = r.warning.clone().unwrap_or_default();
        t.push(row![
            i,
            f.label(),
            r.lhs,
            r.norm_q,
            r.ratio_upper,
            r.ratio_lower,
            r.normalized,
            r.normalized / (1.0 - r.tail_fraction),
            r.tail_fraction,
            r.euler_maclaurin_rows,
            warn
        ]);
    }
    let s = spread(&uppers);
    Ok(Outcome::new(t, s <= 10.0)
        .note("contract", "both sampling ratios finite and positive with family-wide spread <= 10")
        .note("spread", format!("{s:?}")))
}

fn atomic_synthesize(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let lat = lattice(cfg)?;
    let sp = sequence_params(cfg, &lat)?;
    let opts = ReconstructOptions::default();
    let lam = random_coefficients(&lat, &atom_set(&lat, &opts), cfg.atoms, cfg.seed)?;
    let f = AtomicFunction::new(&lam, cfg.alpha, &sp)?;
    let rec = reconstruct_fn(&f, &lat, &sp, &opts)?;
    let bound = synthesis_bound(&lam, &sp, &cfg.scheme())?;
    let mut t = Table::new(&["l", "j", "lambda_re", "lambda_im", "recovered_re", "recovered_im"]);
    for (l, j, v) in lam.iter() {
        let r = rec.coefficients.get(l, j);
        t.push(row![l, j, v.re, v.im, r.re, r.im]);
    }
    Ok(Outcome::new(t, rec.residual <= 1e-6 && bound.ratio.is_finite())
        .note("contract", "reconstruct(synthesize(lambda)) residual <= 1e-6; synthesis bound finite")
        .note("residual", format!("{:?}", rec.residual))
        .note("synthesis_ratio", format!("{:?}", bound.ratio)))
}

fn reconstruct(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let lat = lattice(cfg)?;
    let sp = sequence_params(cfg, &lat)?;
    let opts = ReconstructOptions::default();
    let mut t = Table::new(&["function", "label", "residual", "atoms", "rank", "condition", "grid_points", "ok"]);
    let mut pass = true;
    for (i, f) in family(cfg) {
        let r = reconstruct_fn(&f, &lat, &sp, &opts)?;
        let ok = r.residual <= 0.05;
        pass &= ok;
        t.push(row![i, f.label(), r.residual, r.atoms, r.rank, r.condition, r.grid_points, ok]);
    }
    Ok(Outcome::new(t, pass).note("contract", "relative residual <= 5%"))
}

fn derivative_check(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let spec = cfg.spec()?;
    let params = space(cfg)?;
    let scheme = cfg.scheme();
    let mut t = Table::new(&["function", "label", "norm", "derivative_norm", "ratio", "inverse"]);
    let mut ratios = vec![];
    for (i, f) in family(cfg) {
        let r = derivative_char_check(&f, &params, &spec, &scheme)?;
        ratios.push(r.ratio);
        t.push(row![i, f.label(), r.norm, r.derivative_norm, r.ratio, r.inverse]);
    }
    let s = spread(&ratios);
    Ok(Outcome::new(t, s <= 100.0)
        .note("contract", "ratios ||yF'||/||F|| positive and finite with max/min <= 100")
        .note("spread", format!("{s:?}")))
}

fn script_i(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let lat = lattice(cfg)?;
    let sp = sequence_params(cfg, &lat)?;
    let scheme = cfg.scheme();
    let mut t = Table::new(&["function", "label", "value", "norm_q", "ratio", "tail_fraction", "warning"]);
    let mut ratios = vec![];
    for (i, f) in family(cfg) {
        let r = script_i_fn(&f, &lat, &sp, &scheme)?;
        ratios.push(r.ratio);
        t.push(row![i, f.label(), r.value, r.norm_q, r.ratio, r.tail_fraction, r.warning.clone().unwrap_or_default()]);
    }
    let s = spread(&ratios);
    Ok(Outcome::new(t, s.is_finite()).note("contract", "ratios positive and finite").note("spread", format!("{s:?}")))
}
