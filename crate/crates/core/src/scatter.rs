//! Boosted probes, the truncated scattering matrix element and the sinogram
//! scan.
//!
//! The element for a probe `Φ_v = e^{iv·x}Φ0(· - y)` is
//! `i((U(t*, -t*) - U0(t*, -t*)) Φ_in, Ψ_out)` with the boundary states moved
//! to `∓t*` by the exact quadratic flow. Only the window `[-t*, t*]` is done
//! on a grid, and there in the frame riding the probe's classical path, so a
//! 64² box suffices even at `|v| = 64`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss::{gaussian_evolve_h0, GaussianState};
use crate::grid::GridSpec;
use crate::interprop::{evolve_comoving, interaction_window, ComovingPath, EvolveConfig, InteractionWindow, SampledPotential};
use crate::model::{DecayParams, PotentialSpec};
use crate::quad_prop::{u0_plan, u0_tilde_plan, Direction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    pub width: f64,
    pub center: Vec<f64>,
    pub velocity: Vec<f64>,
}

impl ProbeSpec {
    pub fn new(width: f64, center: Vec<f64>, velocity: Vec<f64>) -> Result<Self> {
        let spec = ProbeSpec { width, center, velocity };
        spec.validate()?;
        Ok(spec)
    }

    /// Planar probe moving along `(cos θ, sin θ)` with impact offset `s`
    /// along `(-sin θ, cos θ)`.
    pub fn planar(width: f64, angle: f64, offset: f64, speed: f64) -> Result<Self> {
        let (s, c) = angle.sin_cos();
        Self::new(width, vec![-s * offset, c * offset], vec![c * speed, s * speed])
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(Error::Parameter(format!("probe width {} must be positive", self.width)));
        }
        if self.center.len() != self.velocity.len() || self.center.is_empty() {
            return Err(Error::Parameter("probe center and velocity need one common dimension".into()));
        }
        if !(self.speed() > 0.0) {
            return Err(Error::Parameter("probe velocity must be nonzero".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn speed(&self) -> f64 {
        self.velocity.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn direction(&self) -> Vec<f64> {
        let s = self.speed();
        self.velocity.iter().map(|v| v / s).collect()
    }

    /// Effective Fourier radius of the envelope.
    pub fn eta(&self) -> f64 {
        8.0 / self.width
    }

    pub fn with_speed(&self, speed: f64) -> ProbeSpec {
        let dir = self.direction();
        ProbeSpec {
            velocity: dir.iter().map(|d| d * speed).collect(),
            ..self.clone()
        }
    }
}

/// `Φ_v = e^{iv·x} Φ0(x - y)`.
pub fn build_probe(spec: &ProbeSpec) -> Result<GaussianState> {
    spec.validate()?;
    GaussianState::probe(spec.center.clone(), spec.velocity.clone(), spec.width)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DressedStates {
    pub t_star: f64,
    /// Incoming state at `-t*`.
    pub incoming: GaussianState,
    /// Outgoing state at `t*`.
    pub outgoing: GaussianState,
}

/// Boundary states for the interaction-picture element: `Φ_v` and `Ψ_v = Φ_v`
/// carried from `t = 0` to `∓t*` by the quadratic flow.
pub fn dressed_states(spec: &ProbeSpec, params: &DecayParams, t_star: f64) -> Result<DressedStates> {
    if !(t_star >= 0.0 && t_star <= params.r0()) {
        return Err(Error::Window(format!("t* = {t_star} must lie in [0, r0]")));
    }
    let probe = build_probe(spec)?;
    Ok(DressedStates {
        t_star,
        incoming: gaussian_evolve_h0(&probe, 0.0, -t_star, params)?,
        outgoing: gaussian_evolve_h0(&probe, 0.0, t_star, params)?,
    })
}

/// The chains `U0(-t*, -r0) Ũ0(-r0) Φ_v` and `U0(t*, r0) Ũ0(r0) Ψ_v` built from
/// the factorized outer propagator.
pub fn physical_boundary_states(spec: &ProbeSpec, params: &DecayParams, t_star: f64) -> Result<DressedStates> {
    if !(t_star >= 0.0 && t_star <= params.r0()) {
        return Err(Error::Window(format!("t* = {t_star} must lie in [0, r0]")));
    }
    let probe = build_probe(spec)?;
    let r0 = params.r0();
    let chain = |edge: f64, t: f64| -> Result<GaussianState> {
        let plan = u0_tilde_plan(edge, params, Direction::Forward)?.then(&u0_plan(edge, t, params)?);
        plan.apply_gaussian(&probe)
    };
    Ok(DressedStates {
        t_star,
        incoming: chain(-r0, -t_star)?,
        outgoing: chain(r0, t_star)?,
    })
}

/// How the free part is removed from the interacting overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Subtraction {
    /// `i((U - U0) Φ_in, Ψ_out)`.
    #[default]
    Propagator,
    /// `i((U Φ_in, Ψ_out) - (Φ_v, Ψ_v))`.
    Naive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScatterConfig {
    /// Grid for the comoving frame; it only has to hold the probe envelope.
    pub grid: GridSpec,
    pub evolve: EvolveConfig,
    pub subtraction: Subtraction,
}

impl Default for ScatterConfig {
    fn default() -> Self {
        ScatterConfig {
            grid: GridSpec::new(2, 64, 6.0).expect("static grid"),
            evolve: EvolveConfig::default(),
            subtraction: Subtraction::Propagator,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementResult {
    pub element: Complex64,
    pub speed: f64,
    pub window: InteractionWindow,
}

impl ElementResult {
    /// `|v| · element`.
    pub fn scaled(&self) -> Complex64 {
        self.element * self.speed
    }
}

/// `W(z)† g` for `W(z) = e^{i(p̄·x - x̄·p)}`.
fn pull_back(g: &GaussianState, xbar: &[f64], pbar: &[f64]) -> GaussianState {
    let mut out = g.clone();
    let mut phase = 0.0;
    for k in 0..g.dim() {
        out.center[k] -= xbar[k];
        out.momentum[k] -= pbar[k];
        phase -= pbar[k] * out.center[k] + 0.5 * pbar[k] * xbar[k];
    }
    out.gamma += phase;
    out
}

/// Matrix element over a given window.
pub fn s_tilde_element_in_window(
    spec: &ProbeSpec,
    potential: &PotentialSpec,
    params: &DecayParams,
    cfg: &ScatterConfig,
    window: InteractionWindow,
) -> Result<ElementResult> {
    let speed = spec.speed();
    let zero = ElementResult {
        element: Complex64::new(0.0, 0.0),
        speed,
        window,
    };
    if window.empty || window.t_star == 0.0 {
        return Ok(zero);
    }
    if potential.is_zero() && cfg.subtraction == Subtraction::Propagator {
        return Ok(zero);
    }
    if cfg.grid.dim() != spec.dim() {
        return Err(Error::Usage(format!(
            "scatter grid has dimension {} but the probe has {}",
            cfg.grid.dim(),
            spec.dim()
        )));
    }
    let t = window.t_star;
    let states = dressed_states(spec, params, t)?;
    let path = ComovingPath {
        t0: -t,
        x0: states.incoming.center.clone(),
        p0: states.incoming.momentum.clone(),
    };
    let (x1, p1) = path.state(t, params);
    let free_out = gaussian_evolve_h0(&states.incoming, -t, t, params)?;

    let phi_in = pull_back(&states.incoming, &path.x0, &path.p0).sample_to_grid(&cfg.grid)?;
    let pot = SampledPotential::new(potential, cfg.grid, cfg.evolve.clamp_factor).with_boundary_tol(cfg.evolve.boundary_tol);
    let phi = evolve_comoving(&phi_in, -t, t, cfg.evolve.dt(speed), &pot, params, &path)?;
    let chi = pull_back(&states.outgoing, &x1, &p1).sample_to_grid(&cfg.grid)?;
    let i = Complex64::i();
    let element = match cfg.subtraction {
        Subtraction::Propagator => {
            let free = pull_back(&free_out, &x1, &p1).sample_to_grid(&cfg.grid)?;
            i * chi.inner_product(&phi.sub(&free)?)?
        }
        Subtraction::Naive => {
            let probe = build_probe(spec)?;
            i * (chi.inner_product(&phi)? - probe.overlap(&probe))
        }
    };
    Ok(ElementResult { element, speed, window })
}

/// `i((U(t*, -t*) - U0(t*, -t*)) Φ_in, Ψ_out)` with the window chosen from
/// the potential's overlap with the transported probe.
pub fn s_tilde_element(
    spec: &ProbeSpec,
    potential: &PotentialSpec,
    params: &DecayParams,
    cfg: &ScatterConfig,
) -> Result<ElementResult> {
    let probe = build_probe(spec)?;
    if potential.is_zero() && cfg.subtraction == Subtraction::Propagator {
        return Ok(ElementResult {
            element: Complex64::new(0.0, 0.0),
            speed: spec.speed(),
            window: InteractionWindow {
                t_star: 0.0,
                empty: true,
                edge_overlap: 0.0,
                clamped: false,
            },
        });
    }
    let window = interaction_window(&probe, potential, params, cfg.evolve.tol_window)?;
    s_tilde_element_in_window(spec, potential, params, cfg, window)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    /// `a` in `|v|·element ≈ a + b/|v|`.
    pub limit: Complex64,
    pub coefficient: Complex64,
    /// Log-log slope of `| |v|·element - a |` against `|v|`.
    pub slope: Option<f64>,
    /// Residuals do not shrink monotonically, or there is nothing to fit.
    pub flagged: bool,
    pub speeds: Vec<f64>,
    pub values: Vec<Complex64>,
}

/// Least-squares fit of `y = a + b/|v|` to scaled elements.
pub fn fit_inverse_speed(speeds: &[f64], values: &[Complex64]) -> Result<Extrapolation> {
    if speeds.len() < 3 || speeds.len() != values.len() {
        return Err(Error::Parameter("extrapolation needs at least three speeds".into()));
    }
    if speeds.windows(2).any(|w| !(w[1] > w[0])) || speeds[0] <= 0.0 {
        return Err(Error::Parameter("speeds must be positive and increasing".into()));
    }
    let n = speeds.len() as f64;
    let xs: Vec<f64> = speeds.iter().map(|v| 1.0 / v).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = values.iter().sum::<Complex64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: Complex64 = xs.iter().zip(values).map(|(x, y)| (y - my) * (x - mx)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let residuals: Vec<f64> = values.iter().map(|y| (y - a).norm()).collect();
    let scale = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let degenerate = scale == 0.0 || residuals.iter().any(|r| *r <= 1e-14 * scale.max(1e-300));
    let slope = if degenerate {
        None
    } else {
        let lx: Vec<f64> = speeds.iter().map(|v| v.ln()).collect();
        let ly: Vec<f64> = residuals.iter().map(|r| r.ln()).collect();
        let mlx = lx.iter().sum::<f64>() / n;
        let mly = ly.iter().sum::<f64>() / n;
        let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mlx) * (y - mly)).sum();
        let den: f64 = lx.iter().map(|x| (x - mlx) * (x - mlx)).sum();
        Some(num / den)
    };
    let monotone = residuals.windows(2).all(|w| w[1] <= w[0]);
    Ok(Extrapolation {
        limit: a,
        coefficient: b,
        slope,
        flagged: slope.is_none() || !monotone,
        speeds: speeds.to_vec(),
        values: values.to_vec(),
    })
}

/// Runs the element at each speed (same direction, offset and envelope) and
/// fits the `1/|v|` approach to the limit.
pub fn highv_extrapolate(
    spec: &ProbeSpec,
    potential: &PotentialSpec,
    params: &DecayParams,
    cfg: &ScatterConfig,
    speeds: &[f64],
) -> Result<Extrapolation> {
    let values = speeds
        .iter()
        .map(|&v| Ok(s_tilde_element(&spec.with_speed(v), potential, params, cfg)?.scaled()))
        .collect::<Result<Vec<_>>>()?;
    fit_inverse_speed(speeds, &values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanConfig {
    pub angles: usize,
    pub offsets: usize,
    pub ds: f64,
    pub speed: f64,
    pub probe_width: f64,
    /// Largest tolerated fraction of failed samples.
    pub max_hole_fraction: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            angles: 48,
            offsets: 65,
            ds: 0.125,
            speed: 32.0,
            probe_width: 0.5,
            max_hole_fraction: 0.05,
        }
    }
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.angles == 0 || self.offsets == 0 {
            return Err(Error::Parameter("scan needs at least one angle and one offset".into()));
        }
        if self.offsets.is_multiple_of(2) {
            return Err(Error::Parameter("offset count must be odd so the offsets are symmetric about 0".into()));
        }
        if !(self.probe_width > 0.0 && self.speed > 0.0) {
            return Err(Error::Parameter("probe width and speed must be positive".into()));
        }
        if !(self.ds > 0.0 && self.ds <= 0.5 * self.probe_width + 1e-15) {
            return Err(Error::Parameter(format!(
                "offset spacing {} must be positive and at most half the probe width {}",
                self.ds, self.probe_width
            )));
        }
        Ok(())
    }

    pub fn angle(&self, k: usize) -> f64 {
        PI * k as f64 / self.angles as f64
    }

    pub fn offset(&self, m: usize) -> f64 {
        (m as f64 - ((self.offsets - 1) / 2) as f64) * self.ds
    }

    pub fn len(&self) -> usize {
        self.angles * self.offsets
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadonSample {
    pub angle_index: usize,
    pub offset_index: usize,
    pub angle: f64,
    pub direction: [f64; 2],
    pub offset: f64,
    /// `|v|·element`; the reported sinogram value is its real part.
    pub value: Complex64,
    pub speed: f64,
    /// `|Im|` of the scaled element; the limit is real, so this tracks the
    /// remaining finite-speed error.
    pub error: f64,
    pub hole: Option<String>,
}

/// Computes one sinogram sample; failures become holes.
pub fn radon_sample(
    potential: &PotentialSpec,
    params: &DecayParams,
    scan: &ScanConfig,
    cfg: &ScatterConfig,
    k: usize,
    m: usize,
) -> RadonSample {
    let angle = scan.angle(k);
    let offset = scan.offset(m);
    let result = ProbeSpec::planar(scan.probe_width, angle, offset, scan.speed)
        .and_then(|p| s_tilde_element(&p, potential, params, cfg));
    let (value, hole) = match result {
        Ok(r) => (r.scaled(), None),
        Err(e) => (Complex64::new(0.0, 0.0), Some(e.to_string())),
    };
    RadonSample {
        angle_index: k,
        offset_index: m,
        angle,
        direction: [angle.cos(), angle.sin()],
        offset,
        value,
        speed: scan.speed,
        error: value.im.abs(),
        hole,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sinogram {
    pub angles: Vec<f64>,
    pub offsets: Vec<f64>,
    /// Row-major `angles × offsets`.
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
    pub speed: f64,
    /// Width of the probe envelope; each row is the X-ray transform smeared by
    /// the projected density `e^{-u²/w²}/(√π w)`.
    pub probe_width: f64,
    pub holes: Vec<(usize, usize, String)>,
}

impl Sinogram {
    pub fn ds(&self) -> f64 {
        if self.offsets.len() > 1 {
            self.offsets[1] - self.offsets[0]
        } else {
            0.0
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.angles.len(), self.offsets.len())
    }

    pub fn at(&self, k: usize, m: usize) -> f64 {
        self.values[k * self.offsets.len() + m]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        let m = self.offsets.len();
        &self.values[k * m..(k + 1) * m]
    }

    /// Builds a sinogram from an analytic row function `f(θ, s)`.
    pub fn from_fn(scan: &ScanConfig, f: impl Fn(f64, f64) -> f64) -> Sinogram {
        let angles: Vec<f64> = (0..scan.angles).map(|k| scan.angle(k)).collect();
        let offsets: Vec<f64> = (0..scan.offsets).map(|m| scan.offset(m)).collect();
        let values = angles.iter().flat_map(|&a| offsets.iter().map(move |&s| (a, s))).map(|(a, s)| f(a, s)).collect();
        Sinogram {
            errors: vec![0.0; scan.len()],
            angles,
            offsets,
            values,
            speed: scan.speed,
            probe_width: scan.probe_width,
            holes: Vec::new(),
        }
    }

    /// Orders samples by `(angle, offset)` and enforces the hole budget.
    pub fn assemble(scan: &ScanConfig, samples: &[RadonSample]) -> Result<Sinogram> {
        let mut sino = Sinogram::from_fn(scan, |_, _| 0.0);
        let mut seen = vec![false; scan.len()];
        for s in samples {
            let idx = s.angle_index * scan.offsets + s.offset_index;
            if s.angle_index >= scan.angles || s.offset_index >= scan.offsets {
                return Err(Error::Usage(format!("sample ({}, {}) is outside the scan", s.angle_index, s.offset_index)));
            }
            seen[idx] = true;
            sino.values[idx] = s.value.re;
            sino.errors[idx] = s.error;
            if let Some(reason) = &s.hole {
                sino.holes.push((s.angle_index, s.offset_index, reason.clone()));
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::Usage(format!(
                "sample ({}, {}) is missing",
                missing / scan.offsets,
                missing % scan.offsets
            )));
        }
        sino.holes.sort_by_key(|h| (h.0, h.1));
        if sino.holes.len() as f64 > scan.max_hole_fraction * scan.len() as f64 {
            return Err(Error::ScanHoles {
                holes: sino.holes.len(),
                total: scan.len(),
            });
        }
        Ok(sino)
    }
}

/// Computes the samples not already in `done`, `workers` at a time, calling
/// `record` for each new sample as it finishes. The result is ordered by
/// `(angle, offset)` whatever the completion order.
pub fn scan_samples(
    potential: &PotentialSpec,
    params: &DecayParams,
    scan: &ScanConfig,
    cfg: &ScatterConfig,
    workers: usize,
    done: &[RadonSample],
    record: &(dyn Fn(&RadonSample) + Sync),
) -> Result<Vec<RadonSample>> {
    scan.validate()?;
    let mut have: Vec<Option<RadonSample>> = vec![None; scan.len()];
    for s in done {
        if s.angle_index < scan.angles && s.offset_index < scan.offsets {
            have[s.angle_index * scan.offsets + s.offset_index] = Some(s.clone());
        }
    }
    let todo: Vec<usize> = (0..scan.len()).filter(|i| have[*i].is_none()).collect();
    let work = |i: usize| {
        let s = radon_sample(potential, params, scan, cfg, i / scan.offsets, i % scan.offsets);
        record(&s);
        s
    };
    let fresh = run_pool(workers, &todo, work)?;
    for (i, s) in todo.into_iter().zip(fresh) {
        have[i] = Some(s);
    }
    Ok(have.into_iter().map(|s| s.expect("every index filled")).collect())
}

#[cfg(feature = "parallel")]
fn run_pool<F>(workers: usize, todo: &[usize], work: F) -> Result<Vec<RadonSample>>
where
    F: Fn(usize) -> RadonSample + Sync,
{
    use rayon::prelude::*;
    if workers <= 1 {
        return Ok(todo.iter().map(|&i| work(i)).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| todo.par_iter().map(|&i| work(i)).collect()))
}

#[cfg(not(feature = "parallel"))]
fn run_pool<F>(_workers: usize, todo: &[usize], work: F) -> Result<Vec<RadonSample>>
where
    F: Fn(usize) -> RadonSample + Sync,
{
    Ok(todo.iter().map(|&i| work(i)).collect())
}

/// Full scan: `K × M` samples over `θ_k = kπ/K` and symmetric offsets.
pub fn sinogram_scan(
    potential: &PotentialSpec,
    params: &DecayParams,
    scan: &ScanConfig,
    cfg: &ScatterConfig,
    workers: usize,
) -> Result<Sinogram> {
    let samples = scan_samples(potential, params, scan, cfg, workers, &[], &|_| {})?;
    Sinogram::assemble(scan, &samples)
}

/// RMS of a `V = 0` scan under naive subtraction, run over the windows the
/// `reference` potential would open. It measures what the discretization
/// alone contributes to a sinogram.
pub fn noise_floor(
    reference: &PotentialSpec,
    params: &DecayParams,
    scan: &ScanConfig,
    cfg: &ScatterConfig,
) -> Result<f64> {
    scan.validate()?;
    let naive = ScatterConfig {
        subtraction: Subtraction::Naive,
        ..cfg.clone()
    };
    let zero = PotentialSpec::zero();
    let mut sum = 0.0;
    for k in 0..scan.angles {
        for m in 0..scan.offsets {
            let spec = ProbeSpec::planar(scan.probe_width, scan.angle(k), scan.offset(m), scan.speed)?;
            let window = interaction_window(&build_probe(&spec)?, reference, params, cfg.evolve.tol_window)?;
            let r = s_tilde_element_in_window(&spec, &zero, params, &naive, window)?;
            sum += r.scaled().re.powi(2);
        }
    }
    Ok((sum / scan.len() as f64).sqrt())
}
