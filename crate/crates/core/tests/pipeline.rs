//! Library-level checks against independent oracles.

mod support;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use nanophon::experiment::{
    fit_four_lines, fit_t1, peak_heights, splittings, temperature, HeightOptions, LineFitOptions, PulseSchedule,
    PulseTrace, Spectrum, ThermometryOptions,
};
use nanophon::fem::{assemble, solve_modes, strain_field, EigenOptions, StrainTensor};
use nanophon::hamiltonian::SivParams;
use nanophon::mesh::{HexMesh, Region};
use nanophon::rates::{gamma1_golden_rule, t1_bulk_analytic, CouplingConvention, QModel};
use nanophon::units::{MaterialParams, GHZ, NM};

fn clamped_block(h: f64) -> HexMesh {
    let mut m = HexMesh::block([5, 4, 3], [h; 3], [0.0; 3], Region::Substrate).unwrap();
    m.clamp_plane(2, 0.0, 1e-3 * h);
    m
}

/// Scaling lengths by s sends ω → ω/s, mass-normalized shapes → s^(-3/2)
/// and strains → s^(-5/2); with the zero-point factor and the Lorentzian
/// each gaining s, the rate at matched detuning changes by s^(-3).
#[test]
fn golden_rule_rate_scales_with_the_geometry() {
    let (m, p) = (MaterialParams::DIAMOND, SivParams::NOMINAL);
    let s = 3.0;
    let small = clamped_block(10.0 * NM);
    let big = small.scaled(s);
    let band = 3000.0 * GHZ;
    let opts = EigenOptions::default();
    let a = solve_modes(&small, &assemble(&small, &m).unwrap(), 0.0, band, 500, &opts).unwrap();
    let b = solve_modes(&big, &assemble(&big, &m).unwrap(), 0.0, band / s, 500, &opts).unwrap();
    assert_eq!(a.len(), b.len());
    assert!(a.len() > 20);
    let q = QModel::constant(30.0);
    let delta = a.frequencies[a.len() / 2] * 1.01;
    for e in [0, 17, 59] {
        let sa: Vec<StrainTensor> = a.shapes.iter().map(|x| strain_field(x, &small, e)).collect();
        let sb: Vec<StrainTensor> = b.shapes.iter().map(|x| strain_field(x, &big, e)).collect();
        let ga = gamma1_golden_rule(&a, &sa, &p, delta, &q, CouplingConvention::default()).unwrap();
        let gb = gamma1_golden_rule(&b, &sb, &p, delta / s, &q, CouplingConvention::default()).unwrap();
        let want = ga / s.powi(3);
        assert!((gb - want).abs() / want < 1e-6, "element {e}: {gb} vs {want}");
    }
}

#[test]
fn analytic_bulk_follows_the_independent_formula() {
    let (m, p) = (MaterialParams::DIAMOND, SivParams::NOMINAL);
    for (d, t) in [(46.0, 0.0), (46.0, 7.0), (72.0, 9.5), (120.0, 4.0), (30.0, 25.0)] {
        let got = t1_bulk_analytic(&m, &p, d * GHZ, t).unwrap();
        let want = support::t1_bulk(d * 1e9, t);
        assert!((got - want).abs() / want < 1e-12, "{d} GHz {t} K: {got} vs {want}");
    }
}

#[test]
fn noisy_spectrum_recovers_splittings_within_errors() {
    let planted = support::PlantedLines::siv(9.0, 4e15);
    let grid = support::spectrum_grid();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut hits = 0;
    let trials = 20;
    for _ in 0..trials {
        let counts = support::poisson_counts(&planted.sample(&grid), &mut rng);
        let spec = Spectrum::new(grid.clone(), counts).unwrap();
        let lines = fit_four_lines(&spec, &LineFitOptions::new()).unwrap();
        let sp = splittings(&lines).unwrap();
        assert!((sp.delta_gs - 73e9).abs() < 1e9, "{}", sp.delta_gs);
        if (sp.delta_gs - 73e9).abs() <= 2.0 * sp.sigma_gs {
            hits += 1;
        }
        let t = temperature(&lines, sp.delta_es, &ThermometryOptions::default()).unwrap();
        assert!((t - 9.0).abs() < 0.5, "{t}");
    }
    assert!(hits >= 16, "{hits}/{trials} within two standard errors");
}

#[test]
fn noiseless_trace_recovers_t1_and_heights() {
    let model = support::RecoveryModel { t1: 40e-9, k_pump: 1.0 / 8e-9, p_on: 0.3, rate: 5e11, background: 0.0 };
    let (len, w) = (250e-9, 1e-9);
    let delays: Vec<f64> = [4.0, 12.0, 25.0, 50.0, 80.0, 120.0, 200.0].iter().map(|x| x * 1e-9).collect();
    let counts = model.expected(len, &delays, w, 3500);
    let trace = PulseTrace::new(0.0, w, counts, PulseSchedule::new(len, delays.clone(), 0.0).unwrap()).unwrap();
    let opts = HeightOptions::default();
    let heights = peak_heights(&trace, &opts).unwrap();
    for (h, &tau) in heights.iter().zip(&delays) {
        let want = model.exact_height(tau, model.p_on, len, opts.baseline_window);
        assert!((h.h - want).abs() / want < 1e-9, "tau {tau}: {} vs {want}", h.h);
    }
    let fit = fit_t1(&heights).unwrap();
    assert!((fit.t1 - 40e-9).abs() / 40e-9 < 1e-8, "{}", fit.t1);
}
