//! Interacting evolution `i∂ψ = (H0(t) + V)ψ` by Strang splitting around
//! exact quadratic steps, and the interaction window where it is needed.
//!
//! Each step is `e^{-i h V/2} · U0(t+h, t) · e^{-i h V/2}` with `U0` in the
//! three-factor shear form, so a step costs one pair of FFTs. Adjacent
//! multiplications (shear phases and potential half steps) are fused.
//!
//! [`evolve_comoving`] runs the same scheme in the frame that follows a
//! classical path `z(t) = (x̄(t), p̄(t))` of `H0`: writing
//! `ψ = W(z(t)) φ` with `W(z) = e^{i(p̄·x - x̄·p)}` gives
//! `i∂φ = (H0(t) + V(x + x̄(t))) φ` exactly, with no extra scalar phase.
//! A fast probe then sits still near the origin of a small grid.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss::{flow_decay, flow_h0, flow_harmonic, gaussian_evolve_h0, GaussianState};
use crate::grid::{GridSpec, WaveFunction, BOUNDARY_MASS_TOL};
use crate::model::{split_at_boundaries, DecayParams, PotentialComponent, PotentialSpec};

/// Flushes between overflow checks during long runs.
const CHECK_EVERY: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveConfig {
    /// Time step is `dt_scale / (1 + |v|)`.
    pub dt_scale: f64,
    /// Relative overlap below which the probe no longer sees the potential.
    pub tol_window: f64,
    /// Singular values are clamped at `clamp_factor / dx`.
    pub clamp_factor: f64,
    /// Mass allowed in the boundary bands before a run is aborted.
    pub boundary_tol: f64,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        EvolveConfig {
            dt_scale: 5e-2,
            tol_window: 1e-10,
            clamp_factor: 1.0,
            boundary_tol: BOUNDARY_MASS_TOL,
        }
    }
}

impl EvolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_scale > 0.0 && self.dt_scale.is_finite()) {
            return Err(Error::Parameter(format!("dt_scale = {} must be positive", self.dt_scale)));
        }
        if !(self.tol_window > 0.0 && self.tol_window < 1.0) {
            return Err(Error::Parameter(format!("tol_window = {} must lie in (0, 1)", self.tol_window)));
        }
        if !(self.clamp_factor > 0.0) {
            return Err(Error::Parameter("clamp_factor must be positive".into()));
        }
        if !(self.boundary_tol > 0.0 && self.boundary_tol < 1e-4) {
            return Err(Error::Parameter(format!("boundary_tol = {} must lie in (0, 1e-4)", self.boundary_tol)));
        }
        Ok(())
    }

    pub fn dt(&self, speed: f64) -> f64 {
        self.dt_scale / (1.0 + speed.abs())
    }
}

/// A potential prepared for repeated sampling on one grid.
#[derive(Debug, Clone)]
pub struct SampledPotential {
    spec: PotentialSpec,
    grid: GridSpec,
    clamp: f64,
    boundary_tol: f64,
    base: Vec<f64>,
    r2: Vec<f64>,
}

impl SampledPotential {
    pub fn new(spec: &PotentialSpec, grid: GridSpec, clamp_factor: f64) -> Self {
        let clamp = clamp_factor / grid.dx();
        let mut s = SampledPotential {
            spec: spec.clone(),
            grid,
            clamp,
            boundary_tol: BOUNDARY_MASS_TOL,
            base: vec![0.0; grid.len()],
            r2: Vec::new(),
        };
        let zero = vec![0.0; grid.dim()];
        let mut base = vec![0.0; grid.len()];
        s.sample_shifted(&zero, &mut base);
        s.base = base;
        let mut x = vec![0.0; grid.dim()];
        s.r2 = (0..grid.len())
            .map(|i| {
                grid.position(i, &mut x);
                x.iter().map(|c| c * c).sum()
            })
            .collect();
        s
    }

    /// Loosens or tightens the overflow monitor for runs with this potential.
    pub fn with_boundary_tol(mut self, tol: f64) -> Self {
        self.boundary_tol = tol;
        self
    }

    pub fn spec(&self) -> &PotentialSpec {
        &self.spec
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn clamp(&self) -> f64 {
        self.clamp
    }

    pub fn is_zero(&self) -> bool {
        self.spec.is_zero()
    }

    /// `V(x)` at the grid nodes.
    pub fn values(&self) -> &[f64] {
        &self.base
    }

    /// `V(x + shift)` at the grid nodes.
    pub fn sample_shifted(&self, shift: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let g = &self.grid;
        let coords = g.coords();
        let mut x = vec![0.0; g.dim()];
        for comp in &self.spec.components {
            if let PotentialComponent::GaussianBump { amplitude, center, width } = comp {
                // separable: product of per-axis Gaussians
                let axes: Vec<Vec<f64>> = (0..g.dim())
                    .map(|a| {
                        coords
                            .iter()
                            .map(|xi| {
                                let d = xi + shift[a] - center[a];
                                (-d * d / (width * width)).exp()
                            })
                            .collect()
                    })
                    .collect();
                accumulate_separable(out, &axes, *amplitude);
                continue;
            }
            for (i, o) in out.iter_mut().enumerate() {
                g.position(i, &mut x);
                for (xa, s) in x.iter_mut().zip(shift) {
                    *xa += s;
                }
                *o += comp.value_clamped(&x, self.clamp);
            }
        }
    }
}

fn accumulate_separable(out: &mut [f64], axes: &[Vec<f64>], scale: f64) {
    if axes.len() == 1 {
        for (o, f) in out.iter_mut().zip(&axes[0]) {
            *o += scale * f;
        }
        return;
    }
    let chunk = out.len() / axes[0].len();
    for (block, f) in out.chunks_mut(chunk).zip(&axes[0]) {
        if *f * scale != 0.0 {
            accumulate_separable(block, &axes[1..], scale * f);
        }
    }
}

/// Classical path of `H0` through `(x0, p0)` at time `t0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComovingPath {
    pub t0: f64,
    pub x0: Vec<f64>,
    pub p0: Vec<f64>,
}

impl ComovingPath {
    pub fn position(&self, t: f64, params: &DecayParams) -> Vec<f64> {
        let m = flow_h0(self.t0, t, params);
        self.x0.iter().zip(&self.p0).map(|(x, p)| m.apply(*x, *p).0).collect()
    }

    pub fn state(&self, t: f64, params: &DecayParams) -> (Vec<f64>, Vec<f64>) {
        let m = flow_h0(self.t0, t, params);
        self.x0.iter().zip(&self.p0).map(|(x, p)| m.apply(*x, *p)).unzip()
    }
}

struct Stepper<'a> {
    pot: &'a SampledPotential,
    params: &'a DecayParams,
    path: Option<&'a ComovingPath>,
    kick: f64,
    weight: f64,
    cache_key: Option<(f64, f64)>,
    multiplier: Vec<Complex64>,
    scratch: Vec<f64>,
    flushes: usize,
}

impl<'a> Stepper<'a> {
    fn flush(&mut self, psi: &mut WaveFunction, t: f64) -> Result<()> {
        let use_v = self.weight != 0.0 && !self.pot.is_zero();
        if self.kick == 0.0 && !use_v {
            self.weight = 0.0;
            return Ok(());
        }
        let static_v = self.path.is_none() || !use_v;
        let key = (self.kick, if use_v { self.weight } else { 0.0 });
        if !(static_v && self.cache_key == Some(key)) {
            let v: &[f64] = if !use_v {
                &[]
            } else if let Some(path) = self.path {
                let shift = path.position(t, self.params);
                self.pot.sample_shifted(&shift, &mut self.scratch);
                &self.scratch
            } else {
                &self.pot.base
            };
            let (kick, w) = key;
            for (i, m) in self.multiplier.iter_mut().enumerate() {
                let vi = if use_v { v[i] } else { 0.0 };
                *m = Complex64::cis(0.5 * kick * self.pot.r2[i] - w * vi);
            }
            self.cache_key = if static_v { Some(key) } else { None };
        }
        for (p, m) in psi.values_mut().iter_mut().zip(&self.multiplier) {
            *p *= m;
        }
        self.kick = 0.0;
        self.weight = 0.0;
        self.flushes += 1;
        if self.flushes.is_multiple_of(CHECK_EVERY) {
            psi.check_on_grid_within(self.pot.boundary_tol)?;
        }
        Ok(())
    }
}

fn run(
    psi: &mut WaveFunction,
    t0: f64,
    t1: f64,
    dt: f64,
    pot: &SampledPotential,
    params: &DecayParams,
    path: Option<&ComovingPath>,
) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Parameter(format!("dt = {dt} must be positive")));
    }
    if psi.grid() != pot.grid() {
        return Err(Error::Usage("potential was sampled on a different grid".into()));
    }
    if t0 == t1 {
        return Ok(());
    }
    let n = psi.grid().len();
    let mut st = Stepper {
        pot,
        params,
        path,
        kick: 0.0,
        weight: 0.0,
        cache_key: None,
        multiplier: vec![Complex64::new(1.0, 0.0); n],
        scratch: vec![0.0; n],
        flushes: 0,
    };
    let r0 = params.r0();
    for (a, b) in split_at_boundaries(t0, t1, r0) {
        let harmonic = (0.5 * (a + b)).abs() < r0;
        let m = ((b - a).abs() / dt).ceil().max(1.0) as usize;
        let h = (b - a) / m as f64;
        let harmonic_map = flow_harmonic(h, params.omega());
        for j in 0..m {
            let s = a + j as f64 * h;
            let e = if j + 1 == m { b } else { s + h };
            let map = if harmonic { harmonic_map } else { flow_decay(s, e, params)? };
            st.weight += 0.5 * (e - s);
            st.kick += (map.a - 1.0) / map.b;
            st.flush(psi, s)?;
            psi.apply_free_flow(map.b)?;
            st.kick = (map.d - 1.0) / map.b;
            st.weight = 0.5 * (e - s);
        }
    }
    st.flush(psi, t1)?;
    psi.check_on_grid_within(pot.boundary_tol)
}

/// One Strang step `e^{-i dt V/2} U0(τ+dt, τ) e^{-i dt V/2}`.
pub fn strang_step(
    psi: &WaveFunction,
    tau: f64,
    dt: f64,
    pot: &SampledPotential,
    params: &DecayParams,
) -> Result<WaveFunction> {
    let mut out = psi.clone();
    run(&mut out, tau, tau + dt, dt.abs(), pot, params, None)?;
    Ok(out)
}

/// `U(t1, t0) ψ` with steps no longer than `dt`, aligned to `±r0`.
pub fn evolve(
    psi: &WaveFunction,
    t0: f64,
    t1: f64,
    dt: f64,
    pot: &SampledPotential,
    params: &DecayParams,
) -> Result<WaveFunction> {
    let mut out = psi.clone();
    run(&mut out, t0, t1, dt, pot, params, None)?;
    Ok(out)
}

/// Evolution in the frame moving with `path`; the potential is felt at
/// `x + x̄(t)`.
pub fn evolve_comoving(
    phi: &WaveFunction,
    t0: f64,
    t1: f64,
    dt: f64,
    pot: &SampledPotential,
    params: &DecayParams,
    path: &ComovingPath,
) -> Result<WaveFunction> {
    let mut out = phi.clone();
    run(&mut out, t0, t1, dt, pot, params, Some(path))?;
    Ok(out)
}

/// `[-t*, t*]`; `empty` means the probe never meets the potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteractionWindow {
    pub t_star: f64,
    pub empty: bool,
    /// Relative overlap left at `±t*` when the window had to stop at `r0`.
    pub edge_overlap: f64,
    pub clamped: bool,
}

fn gamma_fn(x: f64) -> f64 {
    // half-integer and integer arguments only
    let mut g = if (x.fract() - 0.5).abs() < 1e-12 { PI.sqrt() } else { 1.0 };
    let mut y = if (x.fract() - 0.5).abs() < 1e-12 { 0.5 } else { 1.0 };
    while y < x - 1e-12 {
        g *= y;
        y += 1.0;
    }
    g
}

fn ball_volume(n: usize, r: f64) -> f64 {
    let nf = n as f64;
    PI.powf(0.5 * nf) / gamma_fn(0.5 * nf + 1.0) * r.powf(nf)
}

/// Upper estimate of `∫|V| |ψ|²` for a packet with centroid `x̄` and
/// per-axis position spread `s`.
pub fn overlap_estimate(spec: &PotentialSpec, xbar: &[f64], s: f64) -> f64 {
    let n = xbar.len();
    let nf = n as f64;
    let dist = |c: &[f64]| -> f64 { xbar.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() };
    let peak_density = (2.0 * PI * s * s).powf(-0.5 * nf);
    spec.components
        .iter()
        .map(|c| match c {
            PotentialComponent::GaussianBump { amplitude, center, width } => {
                let d = dist(center);
                let den = width * width + 2.0 * s * s;
                amplitude.abs() * (width * width / den).powf(0.5 * nf) * (-d * d / den).exp()
            }
            PotentialComponent::SmoothCompactBump { amplitude, center, radius } => {
                let gap = (dist(center) - radius).max(0.0);
                amplitude.abs() * ball_volume(n, *radius) * peak_density * (-gap * gap / (2.0 * s * s)).exp()
            }
            PotentialComponent::TruncatedSingular { amplitude, center, alpha, radius, .. } => {
                let gap = (dist(center) - radius).max(0.0);
                let sphere = nf * ball_volume(n, 1.0);
                let mass = sphere * radius.powf(nf - alpha) / (nf - alpha);
                amplitude.abs() * mass * peak_density * (-gap * gap / (2.0 * s * s)).exp()
            }
            PotentialComponent::PowerTail { amplitude, rho } => {
                let d = xbar.iter().map(|c| c * c).sum::<f64>();
                amplitude.abs() * (1.0 + d).powf(-0.5 * rho)
            }
        })
        .sum()
}

const WINDOW_SAMPLES: usize = 2000;

/// Smallest symmetric window outside of which the probe's potential overlap
/// stays below `tol` times its maximum. `probe` is the packet at `t = 0`.
pub fn interaction_window(
    probe: &GaussianState,
    spec: &PotentialSpec,
    params: &DecayParams,
    tol: f64,
) -> Result<InteractionWindow> {
    let r0 = params.r0();
    let f = |t: f64| -> Result<f64> {
        let g = gaussian_evolve_h0(probe, 0.0, t, params)?;
        Ok(overlap_estimate(spec, &g.center, g.position_std()))
    };
    let ts: Vec<f64> = (0..=WINDOW_SAMPLES)
        .map(|i| -r0 + 2.0 * r0 * i as f64 / WINDOW_SAMPLES as f64)
        .collect();
    let fs: Vec<f64> = ts.iter().map(|&t| f(t)).collect::<Result<_>>()?;
    let fmax = fs.iter().cloned().fold(0.0, f64::max);
    // overlap the probe would have sitting on top of every component
    let full: f64 = spec
        .components
        .iter()
        .map(|c| {
            let at = c.center().map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; probe.dim()]);
            overlap_estimate(&PotentialSpec::new(vec![c.clone()]), &at, probe.position_std())
        })
        .sum();
    if fmax == 0.0 || fmax <= tol * full {
        return Ok(InteractionWindow {
            t_star: 0.0,
            empty: true,
            edge_overlap: 0.0,
            clamped: false,
        });
    }
    let edge = fs[0].max(fs[WINDOW_SAMPLES]) / fmax;
    if edge > tol {
        if edge > tol.sqrt() {
            return Err(Error::Window(format!(
                "probe still overlaps the potential at |t| = r0 (relative {edge:.2e}); raise |v| or shrink the supports"
            )));
        }
        return Ok(InteractionWindow {
            t_star: r0,
            empty: false,
            edge_overlap: edge,
            clamped: true,
        });
    }
    let above = |t: f64| -> Result<bool> { Ok(f(t)? > tol * fmax) };
    let mut t_star: f64 = 0.0;
    // scan each side from the outside in, then bisect the crossing
    for side in [-1.0, 1.0] {
        let idx: Vec<usize> = if side < 0.0 {
            (0..=WINDOW_SAMPLES / 2).collect()
        } else {
            (WINDOW_SAMPLES / 2..=WINDOW_SAMPLES).rev().collect()
        };
        let Some(pos) = idx.iter().position(|&i| fs[i] > tol * fmax) else {
            continue;
        };
        let inner = ts[idx[pos]].abs();
        let outer = if pos == 0 { r0 } else { ts[idx[pos - 1]].abs() };
        let (mut lo, mut hi) = (inner, outer);
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            if above(side * mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        t_star = t_star.max(hi);
    }
    Ok(InteractionWindow {
        t_star,
        empty: false,
        edge_overlap: 0.0,
        clamped: false,
    })
}

/// Window from an explicit clearance radius: the smallest `t*` with the probe
/// center at least `radius` from `center` for all `t* ≤ |t| ≤ r0`.
pub fn window_for_radius(
    probe: &GaussianState,
    center: &[f64],
    radius: f64,
    params: &DecayParams,
) -> Result<InteractionWindow> {
    let r0 = params.r0();
    let dist = |t: f64| -> f64 {
        let m = flow_h0(0.0, t, params);
        probe
            .center
            .iter()
            .zip(&probe.momentum)
            .zip(center)
            .map(|((x, p), c)| {
                let d = m.apply(*x, *p).0 - c;
                d * d
            })
            .sum::<f64>()
            .sqrt()
    };
    let mut t_star: f64 = 0.0;
    let mut any = false;
    for side in [-1.0, 1.0] {
        let mut prev = r0;
        if dist(side * r0) < radius {
            return Err(Error::Window(format!(
                "probe is within {radius} of the potential at |t| = r0; raise |v"
            )));
        }
        for i in (0..WINDOW_SAMPLES / 2).rev() {
            let t = r0 * i as f64 / (WINDOW_SAMPLES / 2) as f64;
            if dist(side * t) < radius {
                let (mut lo, mut hi) = (t, prev);
                for _ in 0..50 {
                    let mid = 0.5 * (lo + hi);
                    if dist(side * mid) < radius {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                t_star = t_star.max(hi);
                any = true;
                break;
            }
            prev = t;
        }
    }
    Ok(InteractionWindow {
        t_star,
        empty: !any,
        edge_overlap: 0.0,
        clamped: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad_prop::u0_shear_plan;

    fn bump(a: f64, c: [f64; 2], w: f64) -> PotentialComponent {
        PotentialComponent::GaussianBump {
            amplitude: a,
            center: c.to_vec(),
            width: w,
        }
    }

    #[test]
    fn zero_potential_reduces_to_free_evolution() {
        let p = DecayParams::default();
        let grid = GridSpec::new(2, 64, 8.0).unwrap();
        let g = GaussianState::probe(vec![0.5, 0.0], vec![0.0, 1.0], 1.0).unwrap();
        let psi = g.sample_to_grid(&grid).unwrap();
        let pot = SampledPotential::new(&PotentialSpec::zero(), grid, 1.0);
        let out = evolve(&psi, -0.7, 1.3, 0.01, &pot, &p).unwrap();
        let mut reference = psi.clone();
        u0_shear_plan(-0.7, 1.3, &p).unwrap().apply(&mut reference).unwrap();
        assert!(out.relative_distance(&reference).unwrap() < 1e-10);
        let step = strang_step(&psi, 0.2, 0.05, &pot, &p).unwrap();
        let mut one = psi.clone();
        u0_shear_plan(0.2, 0.25, &p).unwrap().apply(&mut one).unwrap();
        assert!(step.relative_distance(&one).unwrap() < 1e-12);
    }

    #[test]
    fn unitarity_and_reversal() {
        let p = DecayParams::default();
        let grid = GridSpec::new(2, 64, 8.0).unwrap();
        let g = GaussianState::probe(vec![0.5, 0.0], vec![0.0, 1.0], 1.0).unwrap();
        let psi = g.sample_to_grid(&grid).unwrap();
        let pot = SampledPotential::new(&PotentialSpec::new(vec![bump(0.5, [0.0, 0.5], 1.0)]), grid, 1.0);
        let out = evolve(&psi, -0.4, 0.6, 0.01, &pot, &p).unwrap();
        assert!((out.norm() - psi.norm()).abs() < 1e-10);
        let back = evolve(&out, 0.6, -0.4, 0.01, &pot, &p).unwrap();
        assert!(back.relative_distance(&psi).unwrap() < 1e-8);
        assert!(evolve(&psi, 0.3, 0.3, 0.01, &pot, &p).unwrap() == psi);
    }

    #[test]
    fn comoving_frame_matches_lab_frame() {
        let p = DecayParams::default();
        let grid = GridSpec::new(2, 128, 12.0).unwrap();
        let spec = PotentialSpec::new(vec![bump(0.8, [0.3, 0.2], 1.0)]);
        let x0 = vec![-1.5, 0.3];
        let p0 = vec![3.0, -0.2];
        let g = GaussianState::probe(x0.clone(), p0.clone(), 0.8).unwrap();
        let lab = evolve(&g.sample_to_grid(&grid).unwrap(), -0.3, 0.5, 1e-3, &SampledPotential::new(&spec, grid, 1.0), &p)
            .unwrap();
        // move to the comoving frame: W(z0)† shifts the packet back to the origin
        let centered = GaussianState::probe(vec![0.0, 0.0], vec![0.0, 0.0], 0.8).unwrap();
        let path = ComovingPath { t0: -0.3, x0, p0 };
        let phi = evolve_comoving(
            &centered.sample_to_grid(&grid).unwrap(),
            -0.3,
            0.5,
            1e-3,
            &SampledPotential::new(&spec, grid, 1.0),
            &p,
            &path,
        )
        .unwrap();
        // back to the lab frame with W(z1)
        let (x1, p1) = path.state(0.5, &p);
        let mut shifted = phi.clone();
        shifted.apply_translate(&x1).unwrap();
        shifted.apply_linear_phase(&p1).unwrap();
        let dot: f64 = x1.iter().zip(&p1).map(|(a, b)| a * b).sum();
        shifted.scale(Complex64::cis(-0.5 * dot));
        // the probe at -0.3 was e^{i p0·x} times the centered envelope moved to x0,
        // i.e. W(z0) applied to it times e^{i p0·x0/2}
        let dot0: f64 = path.x0.iter().zip(&path.p0).map(|(a, b)| a * b).sum();
        shifted.scale(Complex64::cis(0.5 * dot0));
        assert!(shifted.relative_distance(&lab).unwrap() < 1e-7);
    }

    #[test]
    fn window_matches_arcsine_rule() {
        let p = DecayParams::default();
        let probe = GaussianState::probe(vec![0.0, 0.0], vec![32.0, 0.0], 1.0).unwrap();
        let w = window_for_radius(&probe, &[0.0, 0.0], 10.0, &p).unwrap();
        assert!((w.t_star - (10.0f64 / 32.0).asin()).abs() < 1e-9);
        let fast = GaussianState::probe(vec![0.0, 0.0], vec![64.0, 0.0], 1.0).unwrap();
        let w2 = window_for_radius(&fast, &[0.0, 0.0], 10.0, &p).unwrap();
        assert!((w.t_star / w2.t_star - 2.0).abs() < 0.4);
    }

    #[test]
    fn tolerance_window_and_empty_case() {
        let p = DecayParams::default();
        let spec = PotentialSpec::new(vec![bump(0.5, [0.0, 0.0], 1.0)]);
        let probe = GaussianState::probe(vec![0.0, 0.0], vec![32.0, 0.0], 1.0).unwrap();
        let w = interaction_window(&probe, &spec, &p, 1e-10).unwrap();
        assert!(!w.empty && !w.clamped);
        // overlap e^{-d²/2} falls to 1e-10 at d ≈ 6.8
        let expect = ((2.0 * 1e10f64.ln()).sqrt() / 32.0).asin();
        assert!((w.t_star - expect).abs() < 0.02, "{} vs {expect}", w.t_star);
        let far = GaussianState::probe(vec![0.0, 20.0], vec![32.0, 0.0], 1.0).unwrap();
        assert!(interaction_window(&far, &spec, &p, 1e-10).unwrap().empty);
        let slow = GaussianState::probe(vec![0.0, 0.0], vec![2.0, 0.0], 1.0).unwrap();
        assert!(matches!(interaction_window(&slow, &spec, &p, 1e-10), Err(Error::Window(_))));
    }

    #[test]
    fn clamp_bounds_singular_samples() {
        let grid = GridSpec::new(2, 32, 2.0).unwrap();
        let spec = PotentialSpec::new(vec![PotentialComponent::TruncatedSingular {
            amplitude: 1.0,
            center: vec![0.0, 0.0],
            alpha: 0.5,
            radius: 1.0,
            q: 2.0,
        }]);
        let pot = SampledPotential::new(&spec, grid, 1.0);
        let max = pot.values().iter().cloned().fold(0.0, f64::max);
        assert!((max - 1.0 / grid.dx()).abs() < 1e-12);
    }
}
