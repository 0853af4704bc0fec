use std::sync::Arc;

use bergman_lab::atomic::{
    atom_set, random_coefficients, reconstruct, sampling_check, sequence_norm, synthesis_bound, AtomicFunction,
    ReconstructOptions, SequenceSpaceParams,
};
use bergman_lab::bergman::{builtin_family, project_fn, project_plus_fn, ComplexPoint, KernelParams, FINE_X};
use bergman_lab::hilbert::{adjoint_check, norm_estimate, schur_verify, HalfLineFunction};
use bergman_lab::lattice::{build_lattice, covering_audit, inclusion_audit, sample_sets, LatticeConfig};
use bergman_lab::par;
use bergman_lab::quadrature::{forelli_rudin, interval_mass, mixed_norm_fn, PanelScheme, SpaceParams};
use bergman_lab::weights::{builtin_specs, growth_class_check, ClassGrid, GrowthFunction, WeightSpec};
use num_complex::Complex64;

fn ln_factorial(n: u32) -> f64 {
    (1..=n).map(|i| (i as f64).ln()).sum()
}

#[test]
fn forelli_rudin_integer_parameters() {
    // B(m, n) = (m−1)!(n−1)!/(m+n−1)! for positive integers
    let s = PanelScheme::default();
    for (beta, a) in [(0u32, 1u32), (1, 2), (3, 1), (2, 4)] {
        let want_b = (ln_factorial(beta) + ln_factorial(a - 1) - ln_factorial(beta + a)).exp();
        for x in [0.125, 1.0, 7.0] {
            let r = forelli_rudin(&WeightSpec::trivial(), a as f64, beta as f64, x, &s).unwrap();
            let want = x.powf(-(a as f64)) * want_b;
            assert!((r.value / want - 1.0).abs() < 1e-10, "beta={beta} a={a} x={x}");
        }
    }
}

#[test]
fn builtin_classes_certify() {
    for spec in builtin_specs(&[1.0]) {
        if spec.eps1 == 1 && spec.eps2 == 1 {
            assert!(growth_class_check(&spec.phi, &ClassGrid::default()).pass, "{}", spec.phi.label());
        }
    }
}

#[test]
fn interval_mass_two_sided_for_weighted_specs() {
    let s = PanelScheme::default();
    for spec in builtin_specs(&[-1.0, 1.0]) {
        let ratios: Vec<f64> =
            (-16..=16).map(|j| interval_mass(&spec, 0.5, 2f64.powi(j), &s).unwrap().ratio).collect();
        let hi = ratios.iter().cloned().fold(0.0, f64::max);
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(hi / lo <= 50.0, "{spec:?}");
    }
}

#[test]
fn hilbert_pieces_agree() {
    let params = SpaceParams::new(2.0, 2.0, 0.0, 0.5).unwrap();
    let spec = WeightSpec::new(1, 1, 1.0, GrowthFunction::power(1.0, 1.0).unwrap()).unwrap();
    let f = HalfLineFunction::bump(0.5, 3.0).unwrap();
    let g = HalfLineFunction::indicator(1.0, 4.0).unwrap();
    let a = adjoint_check(&f, &g, &params, &spec, &PanelScheme::default()).unwrap();
    assert!(a.defect < 1e-8, "{a:?}");
    let grid: Vec<f64> = (-8..=8).map(|j| 2f64.powi(j)).collect();
    let flat = SpaceParams::new(2.0, 2.0, 0.0, 0.0).unwrap();
    let sch = schur_verify(&flat, &WeightSpec::trivial(), &grid, &PanelScheme::default()).unwrap();
    // φ² = t^{-1/2}: both Schur integrals equal B(1/2, 1/2) = π
    let want = std::f64::consts::PI;
    assert!((sch.sup_first / want - 1.0).abs() < 1e-8 && (sch.inf_second / want - 1.0).abs() < 1e-8);
}

#[test]
fn parallel_and_sequential_paths_are_bit_identical() {
    let params = SpaceParams::new(2.0, 2.0, 0.0, 0.0).unwrap();
    let scheme = PanelScheme { j_lo: -20, j_hi: 20, nodes_per_panel: 4, panels_per_octave: 2 };
    let a = norm_estimate(&params, &WeightSpec::trivial(), &scheme).unwrap();
    let b = par::sequential(|| norm_estimate(&params, &WeightSpec::trivial(), &scheme).unwrap());
    assert_eq!(a.value.to_bits(), b.value.to_bits());

    let lat = build_lattice(&LatticeConfig::symmetric(0.3, 50, 20).unwrap());
    let s = sample_sets(&lat, 2000, 4);
    let c1 = covering_audit(&lat, &s);
    let c2 = par::sequential(|| covering_audit(&lat, &s));
    assert_eq!(c1, c2);
    let i1 = inclusion_audit(&lat, 3, 5);
    let i2 = par::with_workers(2, || inclusion_audit(&lat, 3, 5));
    assert_eq!(i1, i2);
}

#[test]
fn projection_of_family_members() {
    let s = PanelScheme::default();
    let kp = KernelParams::new(1.0).unwrap();
    let z = ComplexPoint::new(0.4, 0.9).unwrap();
    for f in builtin_family() {
        let r = project_fn(&f, &kp, z, &s).unwrap();
        let want = f.eval(z.c());
        assert!((r.value - want).norm() / want.norm() < 1e-6);
        assert!(project_plus_fn(&f, &kp, z, &s, FINE_X).unwrap() >= want.norm());
    }
}

#[test]
fn atoms_sample_and_reconstruct() {
    let lat = build_lattice(&LatticeConfig::symmetric(0.3, 400_000, 2000).unwrap());
    let sp = SequenceSpaceParams::for_lattice(2.0, 2.0, 0.0, &WeightSpec::trivial(), &lat).unwrap();
    let opts = ReconstructOptions::default();
    let lam = random_coefficients(&lat, &atom_set(&lat, &opts), 20, 11).unwrap();
    let f = AtomicFunction::new(&lam, 0.0, &sp).unwrap();
    let r = reconstruct(&f, &lat, &sp, &opts).unwrap();
    assert!(r.residual < 1e-6);
    let bound = synthesis_bound(&lam, &sp, &PanelScheme::default()).unwrap();
    assert!(bound.ratio.is_finite() && bound.ratio > 0.0);
    assert!((bound.sequence_q - sequence_norm(&lam, &sp).unwrap().powi(2)).abs() < 1e-12 * bound.sequence_q);
    let report = sampling_check(&f, &lat, &sp, &PanelScheme::default()).unwrap();
    assert!(report.ratio_upper.is_finite() && report.ratio_lower.is_finite());
}

#[test]
fn mixed_norm_scaling_law() {
    let f = builtin_family()[0].clone();
    let s = PanelScheme::default();
    for (p, q, alpha) in [(2.0, 2.0, 0.0), (1.5, 3.0, 0.5), (3.0, 1.0, -0.5)] {
        let params = SpaceParams::new(p, q, alpha, alpha).unwrap();
        let a = mixed_norm_fn(Arc::new(f.clone()), &params, &WeightSpec::trivial(), &s).unwrap().norm;
        let b = mixed_norm_fn(Arc::new(f.dilate(2.0)), &params, &WeightSpec::trivial(), &s).unwrap().norm;
        let want = 2f64.powf(-(1.0 + alpha) / q - 1.0 / p);
        assert!((b / a / want - 1.0).abs() < 1e-8);
        let c = mixed_norm_fn(Arc::new(f.scale(Complex64::new(0.0, -3.0))), &params, &WeightSpec::trivial(), &s).unwrap().norm;
        assert!((c / a - 3.0).abs() < 1e-12 * 3.0);
    }
}
