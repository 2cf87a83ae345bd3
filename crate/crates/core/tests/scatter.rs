mod common;

use std::f64::consts::PI;

use common::{k_of, split_step, Box};
use num_complex::Complex64;
use tdho::gauss::{gaussian_evolve_h0, GaussianState};
use tdho::interprop::interaction_window;
use tdho::model::{PotentialComponent, PotentialSpec};
use tdho::quad_prop::{u0_plan, u0_tilde_plan, Direction};
use tdho::scatter::*;
use tdho::{DecayParams, GridSpec};

fn bump(a: f64, c: [f64; 2], w: f64) -> PotentialComponent {
    PotentialComponent::GaussianBump {
        amplitude: a,
        center: c.to_vec(),
        width: w,
    }
}

fn standard() -> PotentialSpec {
    PotentialSpec::new(vec![bump(0.5, [0.0, 0.0], 1.0)])
}

fn wide_probe_cfg() -> ScatterConfig {
    ScatterConfig {
        grid: GridSpec::new(2, 64, 8.0).unwrap(),
        ..ScatterConfig::default()
    }
}

/// Smeared line integral of `a e^{-|x-c|²/wb²}` seen by a probe of width `w`.
fn gaussian_oracle(a: f64, c: [f64; 2], wb: f64, w: f64, angle: f64, s: f64) -> f64 {
    let d = -angle.sin() * c[0] + angle.cos() * c[1] - s;
    let den = wb * wb + w * w;
    a * PI.sqrt() * wb * wb / den.sqrt() * (-d * d / den).exp()
}

#[test]
fn dressed_states_meet_their_postconditions() {
    let p = DecayParams::default();
    let spec = ProbeSpec::planar(1.0, 0.4, 0.7, 32.0).unwrap();
    let w = interaction_window(&build_probe(&spec).unwrap(), &standard(), &p, 1e-10).unwrap();
    let d = dressed_states(&spec, &p, w.t_star).unwrap();
    assert!((d.incoming.norm_sqr() - 1.0).abs() < 1e-9 && (d.outgoing.norm_sqr() - 1.0).abs() < 1e-9);
    let t = w.t_star;
    let grid = GridSpec::new(2, 64, 8.0).unwrap();
    for k in 0..2 {
        let expect = -t.sin() * spec.velocity[k] + t.cos() * spec.center[k];
        assert!((d.incoming.center[k] - expect).abs() < 1e-12);
    }
    // sampled in the moving frame the packet reads back its moments
    let centred = GaussianState {
        center: vec![0.0, 0.0],
        momentum: vec![0.0, 0.0],
        ..d.incoming.clone()
    };
    let psi = centred.sample_to_grid(&grid).unwrap();
    assert!((psi.norm() - 1.0).abs() < 1e-9);
    assert!(psi.centroid().iter().all(|c| c.abs() < 2.0 * grid.dx()));
    let at_zero = dressed_states(&ProbeSpec::planar(1.0, 0.4, 0.0, 32.0).unwrap(), &p, 0.0).unwrap();
    assert!(at_zero.incoming.center.iter().all(|c| c.abs() < 1e-15));
}

#[test]
fn diagnostic_chain_matches_grid_at_low_speed() {
    // with σ = 0 the outer factors reduce to free flight
    for p in [DecayParams::new(1.0, 0.0, 1.0).unwrap(), DecayParams::default()] {
        let spec = ProbeSpec::planar(1.0, 0.3, 0.5, 4.0).unwrap();
        let t_star = 0.4;
        let gauss = physical_boundary_states(&spec, &p, t_star).unwrap();
        let grid = GridSpec::new(2, 512, 24.0).unwrap();
        let mut psi = build_probe(&spec).unwrap().sample_to_grid(&grid).unwrap();
        let plan = u0_tilde_plan(-p.r0(), &p, Direction::Forward).unwrap().then(&u0_plan(-p.r0(), -t_star, &p).unwrap());
        plan.apply_checked(&mut psi).unwrap();
        let err = psi.relative_distance(&gauss.incoming.sample_to_grid(&grid).unwrap()).unwrap();
        assert!(err < 1e-6, "σ = {}: {err:e}", p.sigma());
    }
}

#[test]
fn comoving_element_matches_lab_frame_integrator() {
    let p = DecayParams::default();
    let v = standard();
    let spec = ProbeSpec::planar(1.0, 0.3, 0.4, 16.0).unwrap();
    let r = s_tilde_element(&spec, &v, &p, &wide_probe_cfg()).unwrap();
    let t = r.window.t_star;
    let d = dressed_states(&spec, &p, t).unwrap();
    let b = Box { dim: 2, n: 256, l: 14.0 };
    let grid = GridSpec::new(2, 256, 14.0).unwrap();
    let start = d.incoming.sample_to_grid(&grid).unwrap();
    let pot = |x: &[f64]| 0.5 * (-(x[0] * x[0] + x[1] * x[1])).exp();
    let out = split_step(start.values(), &b, -t, t, 2e-3, &[-1.0, 1.0], &k_of(1.0, 3.0 / 16.0, 1.0), &pot);
    let free = gaussian_evolve_h0(&d.incoming, -t, t, &p).unwrap().sample_to_grid(&grid).unwrap();
    let target = d.outgoing.sample_to_grid(&grid).unwrap();
    let dv = grid.cell_volume();
    let overlap: Complex64 = target
        .values()
        .iter()
        .zip(out.iter().zip(free.values()))
        .map(|(o, (a, f))| o.conj() * (a - f))
        .sum::<Complex64>()
        * dv;
    let lab = Complex64::i() * overlap * spec.speed();
    let rel = (r.scaled() - lab).norm() / lab.norm();
    assert!(rel < 1e-4, "comoving {} vs lab {lab}: {rel:e}", r.scaled());
}

#[test]
fn null_and_far_cases() {
    let p = DecayParams::default();
    let cfg = wide_probe_cfg();
    let spec = ProbeSpec::planar(1.0, 1.1, 0.2, 32.0).unwrap();
    assert_eq!(s_tilde_element(&spec, &PotentialSpec::zero(), &p, &cfg).unwrap().element, Complex64::new(0.0, 0.0));
    let far = ProbeSpec::planar(1.0, 1.1, 15.0, 32.0).unwrap();
    assert_eq!(s_tilde_element(&far, &standard(), &p, &cfg).unwrap().element, Complex64::new(0.0, 0.0));
}

#[test]
fn weak_bump_matches_xray_and_is_nearly_real() {
    let p = DecayParams::default();
    let v = PotentialSpec::new(vec![bump(0.1, [0.0, 0.0], 1.0)]);
    let oracle = gaussian_oracle(0.1, [0.0, 0.0], 1.0, 1.0, 0.0, 0.0);
    let mut last_ratio = f64::INFINITY;
    for speed in [16.0, 32.0, 64.0] {
        let spec = ProbeSpec::planar(1.0, 0.0, 0.0, speed).unwrap();
        let y = s_tilde_element(&spec, &v, &p, &wide_probe_cfg()).unwrap().scaled();
        let ratio = y.im.abs() / y.norm();
        if speed == 32.0 {
            assert!((y.re - oracle).abs() / oracle < 0.05, "{y} vs {oracle}");
            assert!(ratio <= 0.10);
        }
        assert!(ratio < last_ratio);
        last_ratio = ratio;
    }
}

#[test]
fn extrapolation_follows_inverse_speed() {
    let p = DecayParams::default();
    let spec = ProbeSpec::planar(1.0, 0.0, 0.0, 8.0).unwrap();
    let fit = highv_extrapolate(&spec, &standard(), &p, &wide_probe_cfg(), &[8.0, 16.0, 32.0, 64.0]).unwrap();
    let oracle = gaussian_oracle(0.5, [0.0, 0.0], 1.0, 1.0, 0.0, 0.0);
    assert!((fit.limit.re - oracle).abs() / oracle < 0.03, "{} vs {oracle}", fit.limit);
    let slope = fit.slope.unwrap();
    assert!((slope + 1.0).abs() <= 0.4, "slope {slope}");
    let zero = highv_extrapolate(&spec, &PotentialSpec::zero(), &p, &wide_probe_cfg(), &[8.0, 16.0, 32.0]).unwrap();
    assert!(zero.flagged && zero.slope.is_none() && zero.limit == Complex64::new(0.0, 0.0));
}

#[test]
fn born_regime_is_linear() {
    let p = DecayParams::default();
    let spec = ProbeSpec::planar(1.0, 0.5, 0.3, 32.0).unwrap();
    let cfg = wide_probe_cfg();
    let full = s_tilde_element(&spec, &standard(), &p, &cfg).unwrap().scaled();
    let half = s_tilde_element(&spec, &standard().scaled(0.5), &p, &cfg).unwrap().scaled();
    assert!((half - 0.5 * full).norm() / (0.5 * full).norm() < 0.03);
}

#[test]
fn naive_subtraction_agrees_at_high_speed() {
    let p = DecayParams::default();
    let spec = ProbeSpec::planar(1.0, 0.2, 0.0, 64.0).unwrap();
    let a = s_tilde_element(&spec, &standard(), &p, &wide_probe_cfg()).unwrap().scaled();
    let naive = ScatterConfig {
        subtraction: Subtraction::Naive,
        ..wide_probe_cfg()
    };
    let b = s_tilde_element(&spec, &standard(), &p, &naive).unwrap().scaled();
    assert!((a - b).norm() / a.norm() < 0.10);
}

// The trap is not translation invariant: moving probe and potential together
// changes the element by the drift of the path, a(1 - cos ωt), which shrinks
// with the window as |v| grows.
#[test]
fn joint_translation_defect_shrinks_with_speed() {
    let p = DecayParams::default();
    let shift = [0.6, -0.4];
    let mut defects = Vec::new();
    for speed in [16.0, 32.0, 64.0] {
        let spec = ProbeSpec::planar(1.0, 0.7, 0.2, speed).unwrap();
        let moved = ProbeSpec::new(
            1.0,
            spec.center.iter().zip(&shift).map(|(c, s)| c + s).collect(),
            spec.velocity.clone(),
        )
        .unwrap();
        let a = s_tilde_element(&spec, &standard(), &p, &wide_probe_cfg()).unwrap().scaled();
        let b = s_tilde_element(&moved, &standard().translated(&shift).unwrap(), &p, &wide_probe_cfg())
            .unwrap()
            .scaled();
        defects.push((a - b).norm() / a.norm());
    }
    assert!(defects[0] > defects[1] && defects[1] > defects[2], "{defects:?}");
    assert!(defects[2] < 1e-2);
}

#[test]
fn symmetric_potential_gives_matching_rows() {
    let p = DecayParams::default();
    let scan = ScanConfig {
        angles: 6,
        offsets: 17,
        ds: 0.25,
        speed: 32.0,
        probe_width: 0.5,
        max_hole_fraction: 0.05,
    };
    let sino = sinogram_scan(&standard(), &p, &scan, &ScatterConfig::default(), 1).unwrap();
    let base = sino.row(0).to_vec();
    let norm = (base.iter().map(|v| v * v).sum::<f64>() / base.len() as f64).sqrt();
    for k in 1..scan.angles {
        let rms = (sino.row(k).iter().zip(&base).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / base.len() as f64).sqrt();
        assert!(rms / norm < 0.02, "row {k}: {}", rms / norm);
    }
    // far offsets are exactly empty
    let wide = ScanConfig { ds: 0.25, offsets: 81, angles: 1, ..scan };
    let far = sinogram_scan(&standard(), &p, &wide, &ScatterConfig::default(), 1).unwrap();
    assert!(far.row(0)[0].abs() < 1e-6 && far.row(0)[80].abs() < 1e-6);
}

#[test]
fn holes_are_reported_and_budgeted() {
    let p = DecayParams::default();
    // a grid too small for the probe fails every sample that opens a window
    let cfg = ScatterConfig {
        grid: GridSpec::new(2, 16, 1.0).unwrap(),
        ..ScatterConfig::default()
    };
    let scan = ScanConfig {
        angles: 4,
        offsets: 9,
        ds: 0.25,
        speed: 32.0,
        probe_width: 0.5,
        max_hole_fraction: 0.05,
    };
    let v = PotentialSpec::new(vec![bump(0.3, [0.0, 4.5], 0.3)]);
    let samples = scan_samples(&v, &p, &scan, &cfg, 1, &[], &|_| {}).unwrap();
    let holes: Vec<_> = samples.iter().filter(|s| s.hole.is_some()).collect();
    assert!(!holes.is_empty() && holes.len() < samples.len());
    assert!(holes.iter().all(|s| s.hole.as_ref().unwrap().contains("grid")));
    let err = Sinogram::assemble(&scan, &samples).unwrap_err();
    assert!(matches!(err, tdho::Error::ScanHoles { .. }) && err.exit_code() == 4);
}

#[cfg(feature = "parallel")]
#[test]
fn worker_count_does_not_change_values() {
    let p = DecayParams::default();
    let scan = ScanConfig {
        angles: 3,
        offsets: 9,
        ds: 0.25,
        speed: 32.0,
        probe_width: 0.5,
        max_hole_fraction: 0.05,
    };
    let one = sinogram_scan(&standard(), &p, &scan, &ScatterConfig::default(), 1).unwrap();
    let three = sinogram_scan(&standard(), &p, &scan, &ScatterConfig::default(), 3).unwrap();
    assert_eq!(one.values, three.values);
}
