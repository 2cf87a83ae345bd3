//! X-ray reference values, filtered backprojection and comparison metrics
//! for planar potentials.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::model::{PotentialComponent, PotentialSpec};
use crate::quadrature::{integrate_real_line, integrate_with_breaks};
use crate::scatter::Sinogram;

pub const MIN_ANGLES: usize = 32;
pub const MIN_OFFSETS: usize = 33;

const LINE_TOL: f64 = 1e-11;
const SMEAR_TOL: f64 = 1e-10;
/// Gaussian tails are cut where `e^{-u²/w²}` drops below `e^{-144}`.
const GAUSS_REACH: f64 = 12.0;

fn perp(dir: [f64; 2]) -> [f64; 2] {
    [-dir[1], dir[0]]
}

fn unit(dir: [f64; 2]) -> Result<[f64; 2]> {
    let n = dir[0].hypot(dir[1]);
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::Parameter("direction must be a nonzero vector".into()));
    }
    Ok([dir[0] / n, dir[1] / n])
}

fn line_integral(c: &PotentialComponent, dir: [f64; 2], s: f64, clamp: f64) -> f64 {
    let e = perp(dir);
    let base = [s * e[0], s * e[1]];
    let at = |t: f64| [base[0] + t * dir[0], base[1] + t * dir[1]];
    let f = |t: f64| c.value_clamped(&at(t), clamp);
    match c {
        PotentialComponent::PowerTail { .. } => integrate_real_line(f, LINE_TOL),
        PotentialComponent::GaussianBump { center, width, .. } => {
            let foot = (center[0] - base[0]) * dir[0] + (center[1] - base[1]) * dir[1];
            let reach = GAUSS_REACH * width;
            integrate_with_breaks(f, foot - reach, foot + reach, &[foot], LINE_TOL)
        }
        PotentialComponent::SmoothCompactBump { center, radius, .. }
        | PotentialComponent::TruncatedSingular { center, radius, .. } => {
            let foot = (center[0] - base[0]) * dir[0] + (center[1] - base[1]) * dir[1];
            let rel = [center[0] - base[0] - foot * dir[0], center[1] - base[1] - foot * dir[1]];
            let d2 = rel[0] * rel[0] + rel[1] * rel[1];
            if d2 >= radius * radius {
                return 0.0;
            }
            let half = (radius * radius - d2).sqrt();
            let mut breaks = vec![foot];
            if let PotentialComponent::TruncatedSingular { amplitude, alpha, .. } = c {
                // radius inside which the clamp is active
                let rc = (amplitude.abs() / clamp).powf(1.0 / alpha);
                if rc * rc > d2 {
                    let h = (rc * rc - d2).sqrt();
                    breaks.extend([foot - h, foot + h]);
                }
            }
            integrate_with_breaks(f, foot - half, foot + half, &breaks, LINE_TOL)
        }
    }
}

/// Line integral of the clamped potential along `{s·v̂⊥ + t v̂}`.
pub fn xray_line(potential: &PotentialSpec, dir: [f64; 2], s: f64, clamp: f64) -> Result<f64> {
    let dir = unit(dir)?;
    check_planar(potential)?;
    Ok(potential.components.iter().map(|c| line_integral(c, dir, s, clamp)).sum())
}

fn check_planar(potential: &PotentialSpec) -> Result<()> {
    for c in &potential.components {
        if let Some(center) = c.center() {
            if center.len() != 2 {
                return Err(Error::Usage("X-ray reference is implemented for planar potentials".into()));
            }
        }
    }
    Ok(())
}

/// `∫∫ V(x + v̂t) |Φ0(x - s v̂⊥)|² dx dt` for the envelope `Φ0` of width `w`:
/// the line integral smeared across the line by `e^{-u²/w²}/(√π w)`.
/// `w = 0` gives the bare line integral.
pub fn xray_reference(potential: &PotentialSpec, dir: [f64; 2], offset: f64, w: f64, clamp: f64) -> Result<f64> {
    if w == 0.0 {
        return xray_line(potential, dir, offset, clamp);
    }
    if !(w > 0.0) {
        return Err(Error::Parameter(format!("envelope width {w} must be nonnegative")));
    }
    let dir = unit(dir)?;
    check_planar(potential)?;
    let e = perp(dir);
    let mut total = 0.0;
    for c in &potential.components {
        let rho = |u: f64| (-(u * u) / (w * w)).exp() / (PI.sqrt() * w);
        let f = |u: f64| rho(u) * line_integral(c, dir, offset + u, clamp);
        let value = match (c.center(), c.compact_radius()) {
            (None, _) => integrate_real_line(f, SMEAR_TOL),
            (Some(center), radius) => {
                let dc = center[0] * e[0] + center[1] * e[1] - offset;
                let mut breaks = vec![0.0, dc];
                if let Some(r) = radius {
                    breaks.extend([dc - r, dc + r]);
                }
                let reach = GAUSS_REACH * w;
                integrate_with_breaks(f, -reach, reach, &breaks, SMEAR_TOL)
            }
        };
        total += value;
    }
    Ok(total)
}

/// Reference sinogram on the same angles and offsets as `like`.
pub fn xray_sinogram(potential: &PotentialSpec, like: &Sinogram, w: f64, clamp: f64) -> Result<Sinogram> {
    let mut out = like.clone();
    out.holes.clear();
    let m = like.offsets.len();
    for (k, &theta) in like.angles.iter().enumerate() {
        for (j, &s) in like.offsets.iter().enumerate() {
            out.values[k * m + j] = xray_reference(potential, [theta.cos(), theta.sin()], s, w, clamp)?;
            out.errors[k * m + j] = 0.0;
        }
    }
    Ok(out)
}

/// A real scalar field on a planar grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: GridSpec) -> Self {
        Field {
            values: vec![0.0; grid.len()],
            grid,
        }
    }

    pub fn sample(potential: &PotentialSpec, grid: GridSpec, clamp: f64) -> Self {
        let mut x = vec![0.0; grid.dim()];
        let values = (0..grid.len())
            .map(|i| {
                grid.position(i, &mut x);
                potential.value_clamped(&x, clamp)
            })
            .collect();
        Field { grid, values }
    }

    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.values.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    /// 8-bit greyscale preview, `[min, max] → [0, 255]`, `x` to the right and
    /// `y` up.
    pub fn to_pgm(&self) -> Vec<u8> {
        let n = self.grid.points();
        let (lo, hi) = self
            .values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
        let mut out = format!("P5\n{n} {n}\n255\n").into_bytes();
        for row in (0..n).rev() {
            for col in 0..n {
                let v = self.values[col * n + row];
                let level = if hi > lo { (255.0 * (v - lo) / (hi - lo)).round() } else { 0.0 };
                out.push(level as u8);
            }
        }
        out
    }

    /// `x,y,value` rows.
    pub fn to_csv(&self) -> String {
        let n = self.grid.points();
        let mut out = String::from("x,y,value\n");
        for i in 0..n {
            for j in 0..n {
                out.push_str(&format!(
                    "{},{},{}\n",
                    self.grid.coord(i),
                    self.grid.coord(j),
                    self.values[i * n + j]
                ));
            }
        }
        out
    }
}

/// Nodes within `radius` of the origin.
pub fn disk_mask(grid: &GridSpec, radius: f64) -> Vec<bool> {
    let mut x = vec![0.0; grid.dim()];
    (0..grid.len())
        .map(|i| {
            grid.position(i, &mut x);
            x.iter().map(|c| c * c).sum::<f64>() <= radius * radius
        })
        .collect()
}

fn padded_len(m: usize) -> usize {
    (2 * m).next_power_of_two()
}

/// Ramp filter with Hann apodization, cut at the offset Nyquist frequency.
fn filter_rows(sino: &Sinogram) -> Vec<Vec<f64>> {
    let m = sino.offsets.len();
    let ds = sino.ds();
    let len = padded_len(m);
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    let mut h: Vec<Complex64> = (0..len)
        .map(|i| {
            let n = if i < len / 2 { i as i64 } else { i as i64 - len as i64 };
            let v = if n == 0 {
                0.25 / (ds * ds)
            } else if n % 2 != 0 {
                -1.0 / ((n * n) as f64 * PI * PI * ds * ds)
            } else {
                0.0
            };
            Complex64::new(v, 0.0)
        })
        .collect();
    fwd.process(&mut h);
    for (i, v) in h.iter_mut().enumerate() {
        let nu = if i < len / 2 { i as f64 } else { i as f64 - len as f64 } / len as f64;
        *v *= 0.5 * (1.0 + (2.0 * PI * nu).cos());
    }
    (0..sino.angles.len())
        .map(|k| {
            let mut row: Vec<Complex64> = (0..len)
                .map(|i| Complex64::new(if i < m { sino.at(k, i) } else { 0.0 }, 0.0))
                .collect();
            fwd.process(&mut row);
            for (r, f) in row.iter_mut().zip(&h) {
                *r *= f;
            }
            inv.process(&mut row);
            row[..m].iter().map(|v| v.re * ds / len as f64).collect()
        })
        .collect()
}

/// Filtered backprojection onto a planar grid.
pub fn fbp_invert(sino: &Sinogram, grid: &GridSpec) -> Result<Field> {
    let (k, m) = sino.shape();
    if k < MIN_ANGLES || m < MIN_OFFSETS {
        return Err(Error::Coverage {
            required_angles: MIN_ANGLES.max(k),
            required_offsets: MIN_OFFSETS.max(m),
        });
    }
    if grid.dim() != 2 {
        return Err(Error::Usage("reconstruction grid must be planar".into()));
    }
    let q = filter_rows(sino);
    let s0 = sino.offsets[0];
    let ds = sino.ds();
    let trig: Vec<(f64, f64)> = sino.angles.iter().map(|a| a.sin_cos()).collect();
    let n = grid.points();
    let coords = grid.coords();
    let scale = PI / k as f64;
    let pixel = |idx: usize| -> f64 {
        let (x, y) = (coords[idx / n], coords[idx % n]);
        let mut acc = 0.0;
        for (row, &(s, c)) in q.iter().zip(&trig) {
            let u = (-x * s + y * c - s0) / ds;
            if u < 0.0 || u > (m - 1) as f64 {
                continue;
            }
            let j = (u.floor() as usize).min(m - 2);
            let frac = u - j as f64;
            acc += row[j] * (1.0 - frac) + row[j + 1] * frac;
        }
        acc * scale
    };
    #[cfg(feature = "parallel")]
    let values: Vec<f64> = {
        use rayon::prelude::*;
        (0..grid.len()).into_par_iter().map(pixel).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let values: Vec<f64> = (0..grid.len()).map(pixel).collect();
    Ok(Field { grid: *grid, values })
}

/// Divides each row by the envelope transform `G(k) = e^{-k²w²/4}` through
/// `(G + ε)/(G² + ε)`, which is the identity for `w = 0` or `ε → ∞` and
/// bounded by `1/ε` for `ε ≤ 1`.
pub fn deconvolve_smear(sino: &Sinogram, w: f64, eps: f64) -> Result<Sinogram> {
    if !(w >= 0.0 && eps > 0.0) {
        return Err(Error::Parameter("deconvolution needs w >= 0 and eps > 0".into()));
    }
    let (_, m) = sino.shape();
    let ds = sino.ds();
    let len = padded_len(m);
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    let gain: Vec<f64> = (0..len)
        .map(|i| {
            let j = if i < len / 2 { i as f64 } else { i as f64 - len as f64 };
            let kk = 2.0 * PI * j / (len as f64 * ds);
            let g = (-kk * kk * w * w / 4.0).exp();
            if eps.is_infinite() {
                1.0
            } else {
                (g + eps) / (g * g + eps)
            }
        })
        .collect();
    let mut out = sino.clone();
    for k in 0..sino.angles.len() {
        let mut row: Vec<Complex64> = (0..len)
            .map(|i| Complex64::new(if i < m { sino.at(k, i) } else { 0.0 }, 0.0))
            .collect();
        fwd.process(&mut row);
        for (r, g) in row.iter_mut().zip(&gain) {
            *r *= g;
        }
        inv.process(&mut row);
        for (o, r) in out.values[k * m..(k + 1) * m].iter_mut().zip(&row) {
            *o = r.re / len as f64;
        }
    }
    out.probe_width = 0.0;
    Ok(out)
}

/// Root mean square of the entrywise difference.
pub fn sinogram_rms(a: &Sinogram, b: &Sinogram) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::Usage("sinograms have different shapes".into()));
    }
    let sum: f64 = a.values.iter().zip(&b.values).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((sum / a.values.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// `‖f - g‖ / ‖g‖` over the mask.
    pub relative_l2: f64,
    pub linf: f64,
    pub sinogram_rms: Option<f64>,
}

pub fn compare_potentials(f: &Field, g: &Field, mask: &[bool]) -> Result<Metrics> {
    if f.grid != g.grid || mask.len() != f.values.len() {
        return Err(Error::Usage("fields and mask must share one grid".into()));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    let mut linf: f64 = 0.0;
    for ((a, b), keep) in f.values.iter().zip(&g.values).zip(mask) {
        if *keep {
            num += (a - b) * (a - b);
            den += b * b;
            linf = linf.max((a - b).abs());
        }
    }
    let relative_l2 = if den > 0.0 {
        (num / den).sqrt()
    } else if num == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(Metrics {
        relative_l2,
        linf,
        sinogram_rms: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReconConfig {
    pub grid: GridSpec,
    /// Metrics are taken inside this disk.
    pub support_radius: f64,
    /// Regularization for the optional smear deconvolution.
    pub deconvolve: Option<f64>,
}

impl Default for ReconConfig {
    fn default() -> Self {
        ReconConfig {
            grid: GridSpec::new(2, 128, 4.0).expect("static grid"),
            support_radius: 3.0,
            deconvolve: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconResult {
    pub field: Field,
    pub reference: Field,
    pub metrics: Metrics,
    pub config: ReconConfig,
}

/// Inverts `sino` and measures it against `reference`.
pub fn reconstruct(sino: &Sinogram, reference: &PotentialSpec, cfg: &ReconConfig, clamp: f64) -> Result<ReconResult> {
    let input = match cfg.deconvolve {
        Some(eps) => deconvolve_smear(sino, sino.probe_width, eps)?,
        None => sino.clone(),
    };
    let field = fbp_invert(&input, &cfg.grid)?;
    let reference = Field::sample(reference, cfg.grid, clamp);
    let metrics = compare_potentials(&field, &reference, &disk_mask(&cfg.grid, cfg.support_radius))?;
    Ok(ReconResult {
        field,
        reference,
        metrics,
        config: *cfg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scatter::ScanConfig;

    fn unit_gaussian() -> PotentialSpec {
        PotentialSpec::new(vec![PotentialComponent::GaussianBump {
            amplitude: 1.0,
            center: vec![0.0, 0.0],
            width: 1.0,
        }])
    }

    #[test]
    fn gaussian_line_integrals() {
        let v = unit_gaussian();
        for theta in [0.0, 0.7, 2.0] {
            let dir = [f64::cos(theta), f64::sin(theta)];
            assert!((xray_reference(&v, dir, 0.0, 0.0, 1e6).unwrap() - PI.sqrt()).abs() < 1e-10);
            let s = 0.8;
            assert!((xray_reference(&v, dir, s, 0.0, 1e6).unwrap() - PI.sqrt() * (-s * s).exp()).abs() < 1e-10);
        }
        // smearing two Gaussians adds their squared widths
        let w: f64 = 0.5;
        let got = xray_reference(&v, [1.0, 0.0], 0.3, w, 1e6).unwrap();
        let expect = PI.sqrt() / (1.0 + w * w).sqrt() * (-0.09 / (1.0 + w * w)).exp();
        assert!((got - expect).abs() < 1e-9);
    }

    #[test]
    fn zero_sinogram_gives_zero_field() {
        let scan = ScanConfig {
            angles: 32,
            offsets: 33,
            ds: 0.1,
            probe_width: 0.2,
            ..ScanConfig::default()
        };
        let sino = Sinogram::from_fn(&scan, |_, _| 0.0);
        let f = fbp_invert(&sino, &GridSpec::new(2, 32, 2.0).unwrap()).unwrap();
        assert!(f.values.iter().all(|v| *v == 0.0));
        let small = Sinogram::from_fn(&ScanConfig { angles: 8, ..scan.clone() }, |_, _| 0.0);
        assert!(matches!(
            fbp_invert(&small, &GridSpec::new(2, 32, 2.0).unwrap()),
            Err(Error::Coverage { required_angles: 32, .. })
        ));
    }

    #[test]
    fn deconvolution_limits() {
        let scan = ScanConfig {
            angles: 2,
            offsets: 65,
            ds: 0.1,
            probe_width: 0.2,
            ..ScanConfig::default()
        };
        let sino = Sinogram::from_fn(&scan, |_, s| (-s * s).exp());
        let same = deconvolve_smear(&sino, 0.0, 1e-3).unwrap();
        let inf = deconvolve_smear(&sino, 0.5, f64::INFINITY).unwrap();
        for (a, b) in sino.values.iter().zip(same.values.iter().zip(&inf.values)) {
            assert!((a - b.0).abs() < 1e-10 && (a - b.1).abs() < 1e-10);
        }
    }

    #[test]
    fn scaled_field_metric_and_pgm() {
        let grid = GridSpec::new(2, 16, 2.0).unwrap();
        let v = Field::sample(&unit_gaussian(), grid, 1e6);
        let mut w = v.clone();
        w.values.iter_mut().for_each(|x| *x *= 0.7);
        let m = compare_potentials(&w, &v, &vec![true; grid.len()]).unwrap();
        assert!((m.relative_l2 - 0.3).abs() < 1e-12);
        assert_eq!(compare_potentials(&v, &v, &vec![true; grid.len()]).unwrap().relative_l2, 0.0);
        let pgm = v.to_pgm();
        assert!(pgm.starts_with(b"P5\n16 16\n255\n"));
        assert_eq!(pgm.len(), 13 + 256);
        assert_eq!(*pgm[13..].iter().max().unwrap(), 255);
    }
}
