//! Uniform periodic grids, complex wavefunctions on them, and the elementary
//! unitaries every propagator is composed of.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative mass tolerated in the boundary band before the overflow monitor trips.
pub const BOUNDARY_MASS_TOL: f64 = 1e-12;

/// `[-L, L)^n` sampled with `points` cells per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid", into = "RawGrid")]
pub struct GridSpec {
    dim: usize,
    points: usize,
    half_width: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    dim: usize,
    points: usize,
    half_width: f64,
}

impl TryFrom<RawGrid> for GridSpec {
    type Error = Error;

    fn try_from(raw: RawGrid) -> Result<Self> {
        GridSpec::new(raw.dim, raw.points, raw.half_width)
    }
}

impl From<GridSpec> for RawGrid {
    fn from(g: GridSpec) -> Self {
        RawGrid {
            dim: g.dim,
            points: g.points,
            half_width: g.half_width,
        }
    }
}

impl GridSpec {
    pub fn new(dim: usize, points: usize, half_width: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Parameter("grid dimension must be at least 1".into()));
        }
        if points < 8 || !points.is_multiple_of(2) {
            return Err(Error::Parameter(format!("grid points = {points} must be even and >= 8")));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::Parameter(format!("half_width = {half_width} must be positive")));
        }
        Ok(GridSpec { dim, points, half_width })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    pub fn dp(&self) -> f64 {
        PI / self.half_width
    }

    /// Largest representable momentum magnitude per axis.
    pub fn p_max(&self) -> f64 {
        PI / self.dx()
    }

    /// Total number of samples, `points^dim`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.dx()
    }

    /// Momentum of FFT bin `k`.
    pub fn momentum(&self, k: usize) -> f64 {
        let n = self.points as isize;
        let k = k as isize;
        let signed = if k < n / 2 { k } else { k - n };
        signed as f64 * self.dp()
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.coord(i)).collect()
    }

    pub fn momenta(&self) -> Vec<f64> {
        (0..self.points).map(|k| self.momentum(k)).collect()
    }

    /// Cell volume in position space.
    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(self.dim as i32)
    }

    pub fn momentum_cell_volume(&self) -> f64 {
        self.dp().powi(self.dim as i32)
    }

    /// Row-major multi-index of a flat index (axis 0 slowest).
    pub fn multi_index(&self, mut flat: usize, out: &mut [usize]) {
        for a in (0..self.dim).rev() {
            out[a] = flat % self.points;
            flat /= self.points;
        }
    }

    /// Position of a flat index.
    pub fn position(&self, flat: usize, out: &mut [f64]) {
        let mut idx = vec![0; self.dim];
        self.multi_index(flat, &mut idx);
        for (o, i) in out.iter_mut().zip(idx) {
            *o = self.coord(i);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Space {
    Position,
    Momentum,
}

/// Complex samples on a [`GridSpec`], row-major with axis 0 slowest.
/// Momentum-space values use FFT bin ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    grid: GridSpec,
    values: Vec<Complex64>,
    space: Space,
}

type KernelCache = HashMap<(usize, u64, u64), Arc<Vec<f64>>>;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
    static DILATION_KERNELS: RefCell<KernelCache> = RefCell::new(HashMap::new());
}

fn plan(n: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if forward {
            p.plan_fft_forward(n)
        } else {
            p.plan_fft_inverse(n)
        }
    })
}

/// Runs `f` on every line along `axis`, gathered into contiguous storage.
fn for_each_axis_batch(values: &mut [Complex64], grid: &GridSpec, axis: usize, f: impl FnOnce(&mut [Complex64])) {
    let n = grid.points;
    let stride = n.pow((grid.dim - 1 - axis) as u32);
    if stride == 1 {
        f(values);
        return;
    }
    let total = values.len();
    let outer = total / (n * stride);
    let mut buf = vec![Complex64::new(0.0, 0.0); total];
    for o in 0..outer {
        let base = o * n * stride;
        for k in 0..n {
            let row = &values[base + k * stride..base + (k + 1) * stride];
            for (inner, v) in row.iter().enumerate() {
                buf[(o * stride + inner) * n + k] = *v;
            }
        }
    }
    f(&mut buf);
    for o in 0..outer {
        let base = o * n * stride;
        for k in 0..n {
            let row = &mut values[base + k * stride..base + (k + 1) * stride];
            for (inner, v) in row.iter_mut().enumerate() {
                *v = buf[(o * stride + inner) * n + k];
            }
        }
    }
}

/// Unnormalized n-dimensional DFT in place.
pub(crate) fn dft_nd(values: &mut [Complex64], grid: &GridSpec, forward: bool) {
    let fft = plan(grid.points, forward);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for axis in 0..grid.dim {
        for_each_axis_batch(values, grid, axis, |buf| fft.process_with_scratch(buf, &mut scratch));
    }
}

/// Multiplies `values[i0, i1, ...]` by `Π_a factors[a][i_a]`.
pub(crate) fn multiply_separable(values: &mut [Complex64], factors: &[&[Complex64]]) {
    fn rec(values: &mut [Complex64], factors: &[&[Complex64]], scale: Complex64) {
        if factors.len() == 1 {
            for (v, f) in values.iter_mut().zip(factors[0]) {
                *v *= scale * f;
            }
            return;
        }
        let chunk = values.len() / factors[0].len();
        for (block, f) in values.chunks_mut(chunk).zip(factors[0]) {
            rec(block, &factors[1..], scale * f);
        }
    }
    rec(values, factors, Complex64::new(1.0, 0.0))
}

fn same_factors<'a>(grid: &GridSpec, f: &'a [Complex64]) -> Vec<&'a [Complex64]> {
    (0..grid.dim).map(|_| f).collect()
}

/// Periodic band-limited interpolation kernel on an `n`-point grid with
/// phase `theta = π u / L` for displacement `u`.
fn dirichlet(n: usize, theta: f64) -> f64 {
    let nf = n as f64;
    let half = (0.5 * theta).sin();
    let core = if half.abs() < 1e-13 {
        // limit at multiples of 2π for even n
        nf - 1.0
    } else {
        (0.5 * (nf - 1.0) * theta).sin() / half
    };
    (core + (0.5 * nf * theta).cos()) / nf
}

/// Row-major `n × n` kernel evaluating `s^{-1/2} ψ(x_j / s)` from samples `ψ(x_m)`.
fn dilation_kernel(grid: &GridSpec, scale: f64) -> Arc<Vec<f64>> {
    let key = (grid.points, grid.half_width.to_bits(), scale.to_bits());
    DILATION_KERNELS.with(|cache| {
        if let Some(k) = cache.borrow().get(&key) {
            return k.clone();
        }
        let n = grid.points;
        let l = grid.half_width;
        let norm = scale.powf(-0.5);
        let mut kernel = vec![0.0; n * n];
        for j in 0..n {
            let y = grid.coord(j) / scale;
            if y < -l || y >= l {
                continue;
            }
            for m in 0..n {
                kernel[j * n + m] = norm * dirichlet(n, PI * (y - grid.coord(m)) / l);
            }
        }
        let kernel = Arc::new(kernel);
        let mut c = cache.borrow_mut();
        if c.len() > 64 {
            c.clear();
        }
        c.insert(key, kernel.clone());
        kernel
    })
}

impl WaveFunction {
    pub fn zeros(grid: GridSpec) -> Self {
        WaveFunction {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
            space: Space::Position,
        }
    }

    pub fn from_values(grid: GridSpec, values: Vec<Complex64>, space: Space) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Usage(format!(
                "{} values do not match grid size {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(WaveFunction { grid, values, space })
    }

    /// Samples `f` at every position-space node.
    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let mut x = vec![0.0; grid.dim];
        let values = (0..grid.len())
            .map(|i| {
                grid.position(i, &mut x);
                f(&x)
            })
            .collect();
        WaveFunction {
            grid,
            values,
            space: Space::Position,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    fn volume(&self) -> f64 {
        match self.space {
            Space::Position => self.grid.cell_volume(),
            Space::Momentum => self.grid.momentum_cell_volume(),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.volume()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalized(mut self) -> Self {
        let n = self.norm();
        for v in &mut self.values {
            *v /= n;
        }
        self
    }

    pub fn scale(&mut self, c: Complex64) {
        for v in &mut self.values {
            *v *= c;
        }
    }

    /// `φ - ψ`.
    pub fn sub(&self, other: &WaveFunction) -> Result<WaveFunction> {
        self.check_compatible(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(WaveFunction {
            grid: self.grid,
            values,
            space: self.space,
        })
    }

    fn check_compatible(&self, other: &WaveFunction) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Usage("wavefunctions live on different grids".into()));
        }
        if self.space != other.space {
            return Err(Error::Usage("wavefunctions are in different spaces".into()));
        }
        Ok(())
    }

    fn require(&self, space: Space, op: &str) -> Result<()> {
        if self.space != space {
            return Err(Error::Usage(format!("{op} expects a {space:?}-space wavefunction")));
        }
        Ok(())
    }

    /// `(φ, ψ) = Σ conj(φ) ψ dV`, linear in the second argument.
    pub fn inner_product(&self, other: &WaveFunction) -> Result<Complex64> {
        self.check_compatible(other)?;
        let s: Complex64 = self.values.iter().zip(&other.values).map(|(a, b)| a.conj() * b).sum();
        Ok(s * self.volume())
    }

    /// `‖φ - ψ‖ / ‖ψ‖` with `self = φ`.
    pub fn relative_distance(&self, reference: &WaveFunction) -> Result<f64> {
        Ok(self.sub(reference)?.norm() / reference.norm())
    }

    /// Unitary Fourier transform with `(2π)^{-n/2}` normalization.
    pub fn fft_forward(&self) -> Result<WaveFunction> {
        self.require(Space::Position, "fft_forward")?;
        let mut values = self.values.clone();
        dft_nd(&mut values, &self.grid, true);
        let c = (self.grid.dx() / (2.0 * PI).sqrt()).powi(self.grid.dim as i32);
        let parity = self.parity_factors(c.powf(1.0 / self.grid.dim as f64));
        multiply_separable(&mut values, &same_factors(&self.grid, &parity));
        Ok(WaveFunction {
            grid: self.grid,
            values,
            space: Space::Momentum,
        })
    }

    pub fn fft_inverse(&self) -> Result<WaveFunction> {
        self.require(Space::Momentum, "fft_inverse")?;
        let mut values = self.values.clone();
        let c = self.grid.dp() / (2.0 * PI).sqrt();
        let parity = self.parity_factors(c);
        multiply_separable(&mut values, &same_factors(&self.grid, &parity));
        dft_nd(&mut values, &self.grid, false);
        Ok(WaveFunction {
            grid: self.grid,
            values,
            space: Space::Position,
        })
    }

    fn parity_factors(&self, c: f64) -> Vec<Complex64> {
        (0..self.grid.points)
            .map(|k| Complex64::new(if k % 2 == 0 { c } else { -c }, 0.0))
            .collect()
    }

    /// Multiplies by `e^{i c |x|²/2}`.
    pub fn apply_quadratic_phase(&mut self, c: f64) -> Result<()> {
        self.require(Space::Position, "quadratic_phase")?;
        if c == 0.0 {
            return Ok(());
        }
        let f: Vec<Complex64> = self.grid.coords().iter().map(|x| Complex64::cis(0.5 * c * x * x)).collect();
        multiply_separable(&mut self.values, &same_factors(&self.grid, &f));
        Ok(())
    }

    /// Multiplies by `e^{i v·x}`.
    pub fn apply_linear_phase(&mut self, v: &[f64]) -> Result<()> {
        self.require(Space::Position, "linear_phase")?;
        self.check_vector(v)?;
        let xs = self.grid.coords();
        let factors: Vec<Vec<Complex64>> = v
            .iter()
            .map(|va| xs.iter().map(|x| Complex64::cis(va * x)).collect())
            .collect();
        let refs: Vec<&[Complex64]> = factors.iter().map(|f| f.as_slice()).collect();
        multiply_separable(&mut self.values, &refs);
        Ok(())
    }

    fn check_vector(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.grid.dim {
            return Err(Error::Usage(format!(
                "vector has {} components, grid dimension is {}",
                v.len(),
                self.grid.dim
            )));
        }
        Ok(())
    }

    /// Applies a Fourier multiplier given per axis, `Π_a m_a(ξ_a)`.
    fn apply_fourier_multiplier(&mut self, per_axis: &[Vec<Complex64>]) {
        dft_nd(&mut self.values, &self.grid, true);
        let refs: Vec<&[Complex64]> = per_axis.iter().map(|f| f.as_slice()).collect();
        multiply_separable(&mut self.values, &refs);
        dft_nd(&mut self.values, &self.grid, false);
    }

    /// `e^{-iτ p²/2}`.
    pub fn apply_free_flow(&mut self, tau: f64) -> Result<()> {
        self.require(Space::Position, "free_flow")?;
        if tau == 0.0 {
            return Ok(());
        }
        let inv_n = 1.0 / self.grid.points as f64;
        let f: Vec<Complex64> = self
            .grid
            .momenta()
            .iter()
            .map(|k| Complex64::from_polar(inv_n, -0.5 * tau * k * k))
            .collect();
        let per_axis = vec![f; self.grid.dim];
        self.apply_fourier_multiplier(&per_axis);
        Ok(())
    }

    /// Shifts the content by `a` (`ψ(x) -> ψ(x - a)`) through the phase `e^{-i a·ξ}`.
    pub fn apply_translate(&mut self, a: &[f64]) -> Result<()> {
        self.require(Space::Position, "translate")?;
        self.check_vector(a)?;
        let l = self.grid.half_width;
        let r = self.support_box(BOUNDARY_MASS_TOL);
        let need = a.iter().map(|c| c.abs()).fold(0.0, f64::max) + r;
        if need > l {
            return Err(Error::overflow("translation moves content off the grid", need, self.grid.points));
        }
        let inv_n = 1.0 / self.grid.points as f64;
        let ks = self.grid.momenta();
        let per_axis: Vec<Vec<Complex64>> = a
            .iter()
            .map(|aa| ks.iter().map(|k| Complex64::from_polar(inv_n, -aa * k)).collect())
            .collect();
        self.apply_fourier_multiplier(&per_axis);
        Ok(())
    }

    /// `e^{-iθA}` with `A = (p·x + x·p)/2`, i.e. `ψ(x) -> e^{-nθ/2} ψ(e^{-θ} x)`.
    ///
    /// Resampling is exact periodic band-limited interpolation, applied one
    /// axis at a time.
    pub fn apply_dilation(&mut self, theta: f64) -> Result<()> {
        self.require(Space::Position, "dilation")?;
        if theta == 0.0 {
            return Ok(());
        }
        let s = theta.exp();
        let l = self.grid.half_width;
        if s > 1.0 {
            let r = self.support_box(BOUNDARY_MASS_TOL);
            if s * r > l {
                return Err(Error::overflow(
                    format!("dilation by {s:.4} pushes content of radius {r:.3} past the boundary"),
                    s * r,
                    self.grid.points,
                ));
            }
        } else {
            let rp = self.momentum_box(BOUNDARY_MASS_TOL)?;
            let pmax = self.grid.p_max();
            if rp / s > pmax {
                let need = ((rp / s) / pmax * self.grid.points as f64).ceil() as usize;
                return Err(Error::overflow(
                    format!("compression by {s:.4} pushes momentum {rp:.3} past Nyquist"),
                    l,
                    need + need % 2,
                ));
            }
        }
        let kernel = dilation_kernel(&self.grid, s);
        let n = self.grid.points;
        let grid = self.grid;
        for axis in 0..grid.dim {
            for_each_axis_batch(&mut self.values, &grid, axis, |buf| {
                let mut out = vec![Complex64::new(0.0, 0.0); n];
                for line in buf.chunks_mut(n) {
                    for (j, o) in out.iter_mut().enumerate() {
                        let row = &kernel[j * n..(j + 1) * n];
                        let mut acc = Complex64::new(0.0, 0.0);
                        for (k, v) in row.iter().zip(line.iter()) {
                            acc += v * k;
                        }
                        *o = acc;
                    }
                    line.copy_from_slice(&out);
                }
            });
        }
        Ok(())
    }

    /// Smallest `r` with position mass outside the box `[-r, r]^n` at most
    /// `tol` of the total.
    pub fn support_box(&self, tol: f64) -> f64 {
        let coords = match self.space {
            Space::Position => self.grid.coords(),
            Space::Momentum => self.grid.momenta(),
        };
        box_radius(&self.values, &self.grid, &coords, tol)
    }

    /// Box radius of the momentum distribution.
    pub fn momentum_box(&self, tol: f64) -> Result<f64> {
        let m = match self.space {
            Space::Position => self.fft_forward()?,
            Space::Momentum => self.clone(),
        };
        Ok(m.support_box(tol))
    }

    /// Fraction of the mass in cells within `band` of the position boundary.
    pub fn boundary_mass(&self, band: f64) -> f64 {
        let l = self.grid.half_width;
        let coords = self.grid.coords();
        let total: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let mut idx = vec![0; self.grid.dim];
        let mut edge = 0.0;
        for (i, v) in self.values.iter().enumerate() {
            self.grid.multi_index(i, &mut idx);
            if idx.iter().any(|&k| coords[k].abs() > l - band) {
                edge += v.norm_sqr();
            }
        }
        edge / total
    }

    /// Overflow monitor: errors when the boundary bands in position or
    /// momentum hold more than [`BOUNDARY_MASS_TOL`] of the mass.
    pub fn check_on_grid(&self) -> Result<()> {
        self.check_on_grid_within(BOUNDARY_MASS_TOL)
    }

    /// [`check_on_grid`](Self::check_on_grid) with an explicit mass tolerance.
    pub fn check_on_grid_within(&self, tol: f64) -> Result<()> {
        let l = self.grid.half_width;
        let band = l / 8.0;
        let edge = self.boundary_mass(band);
        if edge > tol {
            let r = self.support_box(tol);
            return Err(Error::overflow(
                format!("boundary band holds {edge:.2e} of the mass"),
                (r + band).max(l * 1.25),
                self.grid.points,
            ));
        }
        let m = self.fft_forward()?;
        let pmax = self.grid.p_max();
        let pedge = m.boundary_mass_momentum(pmax / 8.0);
        if pedge > tol {
            return Err(Error::overflow(
                format!("momentum band near Nyquist holds {pedge:.2e} of the mass"),
                l,
                self.grid.points * 2,
            ));
        }
        Ok(())
    }

    fn boundary_mass_momentum(&self, band: f64) -> f64 {
        let pmax = self.grid.p_max();
        let ks = self.grid.momenta();
        let total: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let mut idx = vec![0; self.grid.dim];
        let mut edge = 0.0;
        for (i, v) in self.values.iter().enumerate() {
            self.grid.multi_index(i, &mut idx);
            if idx.iter().any(|&k| ks[k].abs() > pmax - band) {
                edge += v.norm_sqr();
            }
        }
        edge / total
    }

    /// `⟨x⟩` per axis over the normalized density.
    pub fn centroid(&self) -> Vec<f64> {
        let coords = match self.space {
            Space::Position => self.grid.coords(),
            Space::Momentum => self.grid.momenta(),
        };
        first_moment(&self.values, &self.grid, &coords)
    }

    /// `⟨p⟩` per axis.
    pub fn mean_momentum(&self) -> Result<Vec<f64>> {
        let m = match self.space {
            Space::Position => self.fft_forward()?,
            Space::Momentum => self.clone(),
        };
        Ok(m.centroid())
    }

    /// `⟨(x_a - ⟨x_a⟩)²⟩` per axis.
    pub fn variance(&self) -> Vec<f64> {
        let coords = match self.space {
            Space::Position => self.grid.coords(),
            Space::Momentum => self.grid.momenta(),
        };
        let mean = first_moment(&self.values, &self.grid, &coords);
        let mut idx = vec![0; self.grid.dim];
        let mut acc = vec![0.0; self.grid.dim];
        let mut total = 0.0;
        for (i, v) in self.values.iter().enumerate() {
            let w = v.norm_sqr();
            total += w;
            self.grid.multi_index(i, &mut idx);
            for a in 0..self.grid.dim {
                let d = coords[idx[a]] - mean[a];
                acc[a] += w * d * d;
            }
        }
        acc.iter().map(|a| a / total).collect()
    }
}

fn first_moment(values: &[Complex64], grid: &GridSpec, coords: &[f64]) -> Vec<f64> {
    let mut idx = vec![0; grid.dim];
    let mut acc = vec![0.0; grid.dim];
    let mut total = 0.0;
    for (i, v) in values.iter().enumerate() {
        let w = v.norm_sqr();
        total += w;
        grid.multi_index(i, &mut idx);
        for a in 0..grid.dim {
            acc[a] += w * coords[idx[a]];
        }
    }
    acc.iter().map(|a| a / total).collect()
}

fn box_radius(values: &[Complex64], grid: &GridSpec, coords: &[f64], tol: f64) -> f64 {
    let mut idx = vec![0; grid.dim];
    let mut cells: Vec<(f64, f64)> = values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            grid.multi_index(i, &mut idx);
            let r = idx.iter().map(|&k| coords[k].abs()).fold(0.0, f64::max);
            (r, v.norm_sqr())
        })
        .collect();
    let total: f64 = cells.iter().map(|c| c.1).sum();
    if total == 0.0 {
        return 0.0;
    }
    cells.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut outside = 0.0;
    for (r, w) in cells {
        outside += w;
        if outside > tol * total {
            return r;
        }
    }
    0.0
}

/// `(φ, ψ)`.
pub fn inner_product(phi: &WaveFunction, psi: &WaveFunction) -> Result<Complex64> {
    phi.inner_product(psi)
}

pub fn fft_forward(psi: &WaveFunction) -> Result<WaveFunction> {
    psi.fft_forward()
}

pub fn fft_inverse(psi: &WaveFunction) -> Result<WaveFunction> {
    psi.fft_inverse()
}

pub fn quadratic_phase(psi: &WaveFunction, c: f64) -> Result<WaveFunction> {
    let mut out = psi.clone();
    out.apply_quadratic_phase(c)?;
    Ok(out)
}

pub fn linear_phase(psi: &WaveFunction, v: &[f64]) -> Result<WaveFunction> {
    let mut out = psi.clone();
    out.apply_linear_phase(v)?;
    Ok(out)
}

pub fn free_flow(psi: &WaveFunction, tau: f64) -> Result<WaveFunction> {
    let mut out = psi.clone();
    out.apply_free_flow(tau)?;
    Ok(out)
}

pub fn dilation(psi: &WaveFunction, theta: f64) -> Result<WaveFunction> {
    let mut out = psi.clone();
    out.apply_dilation(theta)?;
    Ok(out)
}

pub fn translate(psi: &WaveFunction, a: &[f64]) -> Result<WaveFunction> {
    let mut out = psi.clone();
    out.apply_translate(a)?;
    Ok(out)
}

/// Sidecar metadata for the raw binary export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveFunctionMeta {
    pub grid: GridSpec,
    pub space: Space,
    pub shape: Vec<usize>,
    pub dtype: String,
    pub layout: String,
}

impl WaveFunction {
    /// Little-endian f64 pairs `(re, im)`, row-major.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.values.len() * 16);
        for v in &self.values {
            out.extend_from_slice(&v.re.to_le_bytes());
            out.extend_from_slice(&v.im.to_le_bytes());
        }
        out
    }

    pub fn from_le_bytes(meta: &WaveFunctionMeta, bytes: &[u8]) -> Result<WaveFunction> {
        if bytes.len() != meta.grid.len() * 16 {
            return Err(Error::Usage(format!(
                "binary payload has {} bytes, expected {}",
                bytes.len(),
                meta.grid.len() * 16
            )));
        }
        let values = bytes
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().unwrap());
                let im = f64::from_le_bytes(c[8..].try_into().unwrap());
                Complex64::new(re, im)
            })
            .collect();
        WaveFunction::from_values(meta.grid, values, meta.space)
    }

    pub fn meta(&self) -> WaveFunctionMeta {
        WaveFunctionMeta {
            grid: self.grid,
            space: self.space,
            shape: vec![self.grid.points; self.grid.dim],
            dtype: "complex128-le-interleaved".into(),
            layout: "row-major, axis 0 slowest".into(),
        }
    }

    /// CSV `x,re,im` along axis 0 through the grid center (all other
    /// indices at `points/2`, i.e. coordinate 0).
    pub fn slice_csv(&self) -> String {
        let n = self.grid.points;
        let coords = match self.space {
            Space::Position => self.grid.coords(),
            Space::Momentum => self.grid.momenta(),
        };
        let stride = n.pow((self.grid.dim - 1) as u32);
        let offset: usize = (1..self.grid.dim).map(|a| (n / 2) * n.pow((self.grid.dim - 1 - a) as u32)).sum();
        let mut out = String::from("x,re,im\n");
        for (i, x) in coords.iter().enumerate() {
            let v = self.values[i * stride + offset];
            out.push_str(&format!("{x:?},{:?},{:?}\n", v.re, v.im));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(grid: GridSpec, center: f64, width: f64, k: f64) -> WaveFunction {
        WaveFunction::from_fn(grid, |x| {
            let r2: f64 = x.iter().map(|c| (c - center) * (c - center)).sum();
            Complex64::from_polar((-r2 / (2.0 * width * width)).exp(), k * x[0])
        })
        .normalized()
    }

    #[test]
    fn grid_validation_and_reciprocity() {
        assert!(GridSpec::new(2, 7, 1.0).is_err());
        assert!(GridSpec::new(2, 6, 1.0).is_err());
        assert!(GridSpec::new(0, 8, 1.0).is_err());
        assert!(GridSpec::new(1, 8, 0.0).is_err());
        let g = GridSpec::new(2, 256, 12.0).unwrap();
        let prod = g.dx() * g.dp() * g.points() as f64;
        assert!((prod / (2.0 * PI) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_self_transform() {
        let g = GridSpec::new(1, 256, 12.0).unwrap();
        let psi = WaveFunction::from_fn(g, |x| Complex64::new((-x[0] * x[0] / 2.0).exp(), 0.0));
        let hat = psi.fft_forward().unwrap();
        for k in 0..g.points() {
            let xi = g.momentum(k);
            let expected = (-xi * xi / 2.0).exp();
            assert!((hat.values()[k] - expected).norm() < 1e-8, "k={k}");
        }
        let back = hat.fft_inverse().unwrap();
        assert!(back.relative_distance(&psi).unwrap() < 1e-12);
    }

    #[test]
    fn space_tags_are_enforced() {
        let g = GridSpec::new(1, 16, 4.0).unwrap();
        let psi = WaveFunction::zeros(g);
        assert!(matches!(psi.fft_inverse(), Err(Error::Usage(_))));
        let hat = gaussian(g, 0.0, 1.0, 0.0).fft_forward().unwrap();
        assert!(hat.fft_forward().is_err());
        assert!(quadratic_phase(&hat, 1.0).is_err());
    }

    #[test]
    fn orthogonal_modes() {
        let g = GridSpec::new(1, 64, PI).unwrap();
        let s = WaveFunction::from_fn(g, |x| Complex64::new((3.0 * x[0]).sin(), 0.0));
        let c = WaveFunction::from_fn(g, |x| Complex64::new((3.0 * x[0]).cos(), 0.0));
        assert!(s.inner_product(&c).unwrap().norm() < 1e-12);
        let nn = s.inner_product(&s).unwrap();
        assert!(nn.im.abs() < 1e-14 && nn.re > 0.0);
    }

    #[test]
    fn linear_phase_shifts_momentum() {
        let g = GridSpec::new(1, 256, 12.0).unwrap();
        let psi = gaussian(g, 0.0, 1.0, 0.0);
        let boosted = linear_phase(&psi, &[3.0]).unwrap();
        let hat = boosted.fft_forward().unwrap();
        let argmax = (0..g.points())
            .max_by(|&a, &b| hat.values()[a].norm().total_cmp(&hat.values()[b].norm()))
            .unwrap();
        assert!((g.momentum(argmax) - 3.0).abs() <= g.dp());
        assert!((boosted.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn free_flow_spreads_unit_gaussian() {
        let g = GridSpec::new(1, 256, 12.0).unwrap();
        let psi = gaussian(g, 0.0, 1.0, 0.0);
        let out = free_flow(&psi, 1.0).unwrap();
        // <x²> = (1 + τ²)/2 for a unit-width packet
        assert!((out.variance()[0] - 1.0).abs() < 1e-6);
        let twice = free_flow(&free_flow(&psi, 0.4).unwrap(), 0.6).unwrap();
        assert!(twice.relative_distance(&out).unwrap() < 1e-12);
    }

    #[test]
    fn dilation_unitary_and_group_law() {
        let g = GridSpec::new(1, 256, 12.0).unwrap();
        let psi = gaussian(g, 0.5, 1.0, 0.7);
        let d = dilation(&psi, 0.3).unwrap();
        assert!((d.norm() - 1.0).abs() < 1e-9);
        let dd = dilation(&dilation(&psi, 0.1).unwrap(), 0.2).unwrap();
        assert!(dd.relative_distance(&d).unwrap() < 1e-8);
        let back = dilation(&d, -0.3).unwrap();
        assert!(back.relative_distance(&psi).unwrap() < 1e-8);
        // e^{-iθA} stretches positions by e^θ
        let var_ratio = d.variance()[0] / psi.variance()[0];
        assert!((var_ratio - (0.6f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn dilation_overflow_reports_required_width() {
        let g = GridSpec::new(1, 64, 6.0).unwrap();
        let psi = gaussian(g, 0.0, 1.0, 0.0);
        match dilation(&psi, 1.0) {
            Err(Error::Overflow { required_half_width, .. }) => assert!(required_half_width > 6.0),
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn translate_moves_centroid() {
        let g = GridSpec::new(2, 64, 8.0).unwrap();
        let psi = gaussian(g, 0.0, 1.0, 0.0);
        let moved = translate(&psi, &[1.3, -0.4]).unwrap();
        let c = moved.centroid();
        assert!((c[0] - 1.3).abs() < 1e-8 && (c[1] + 0.4).abs() < 1e-8);
        let twice = translate(&translate(&psi, &[0.3, 0.1]).unwrap(), &[1.0, -0.5]).unwrap();
        assert!(twice.relative_distance(&moved).unwrap() < 1e-12);
        assert!(translate(&psi, &[7.5, 0.0]).is_err());
    }

    #[test]
    fn dirichlet_kernel_is_cardinal() {
        for n in [8usize, 16, 64] {
            for m in 0..n {
                let theta = 2.0 * PI * m as f64 / n as f64;
                let v = dirichlet(n, theta);
                let expect = if m == 0 { 1.0 } else { 0.0 };
                assert!((v - expect).abs() < 1e-12, "n={n} m={m} v={v}");
            }
        }
    }

    #[test]
    fn binary_round_trip() {
        let g = GridSpec::new(2, 8, 2.0).unwrap();
        let psi = gaussian(g, 0.2, 0.7, 1.0);
        let bytes = psi.to_le_bytes();
        let back = WaveFunction::from_le_bytes(&psi.meta(), &bytes).unwrap();
        assert_eq!(back, psi);
        assert!(psi.slice_csv().lines().count() == 9);
    }
}
