//! Exact propagators of the quadratic Hamiltonian `H0(t)` as ordered lists
//! of elementary grid unitaries.
//!
//! Inside `|t| < r0` the harmonic propagator uses the Mehler factorization
//! `free(tan(ωh)/ω)`, then `scale(cos ωh)`, then `phase(-ω tan ωh)`.
//! Outside, `Ũ0(t) = phase(λ/t) · dilation(λ ln|t|) · free(τ(t))` with
//! `τ(t) = sgn(t) |t|^{1-2λ}/(1-2λ)`, whose generator is exactly `H0(t)`.
//! [`shear_plan`] gives a cheaper three-factor form of any short step.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss::{flow_decay, flow_harmonic, gaussian_apply, GaussianState, SymplecticMap};
use crate::grid::WaveFunction;
use crate::model::{split_at_boundaries, DecayParams};

/// Mehler pieces keep `|ωh|` at least this far from `π/2`.
pub const MEHLER_MARGIN: f64 = 0.2;

/// Longest Mehler piece actually used. Shorter than the margin requires so
/// the intermediate free flow (`tan ωh / ω`) never spreads a packet much
/// further than the true evolution does.
pub const MEHLER_MAX_PHASE: f64 = 0.25 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", content = "value", rename_all = "snake_case")]
pub enum Factor {
    /// Multiply by `e^{i c |x|²/2}`.
    QuadraticPhase(f64),
    /// `e^{-iτp²/2}`.
    FreeFlow(f64),
    /// `e^{-iθA}`.
    Dilation(f64),
}

impl Factor {
    pub fn apply(&self, psi: &mut WaveFunction) -> Result<()> {
        match *self {
            Factor::QuadraticPhase(c) => psi.apply_quadratic_phase(c),
            Factor::FreeFlow(tau) => psi.apply_free_flow(tau),
            Factor::Dilation(theta) => psi.apply_dilation(theta),
        }
    }

    pub fn map(&self) -> SymplecticMap {
        match *self {
            Factor::QuadraticPhase(c) => SymplecticMap::kick(c),
            Factor::FreeFlow(tau) => SymplecticMap::free(tau),
            Factor::Dilation(theta) => SymplecticMap::scale(theta.exp()),
        }
    }

    pub fn inverse(&self) -> Factor {
        match *self {
            Factor::QuadraticPhase(c) => Factor::QuadraticPhase(-c),
            Factor::FreeFlow(tau) => Factor::FreeFlow(-tau),
            Factor::Dilation(theta) => Factor::Dilation(-theta),
        }
    }

    fn value(&self) -> f64 {
        match *self {
            Factor::QuadraticPhase(v) | Factor::FreeFlow(v) | Factor::Dilation(v) => v,
        }
    }

    fn merged(&self, next: &Factor) -> Option<Factor> {
        match (*self, *next) {
            (Factor::QuadraticPhase(a), Factor::QuadraticPhase(b)) => Some(Factor::QuadraticPhase(a + b)),
            (Factor::FreeFlow(a), Factor::FreeFlow(b)) => Some(Factor::FreeFlow(a + b)),
            (Factor::Dilation(a), Factor::Dilation(b)) => Some(Factor::Dilation(a + b)),
            _ => None,
        }
    }
}

/// Elementary unitaries in application order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct QuadStepPlan {
    pub factors: Vec<Factor>,
}

impl QuadStepPlan {
    pub fn identity() -> Self {
        QuadStepPlan::default()
    }

    pub fn is_identity(&self) -> bool {
        self.factors.iter().all(|f| f.value() == 0.0)
    }

    /// Appends a factor, fusing it with the last one when they commute into one.
    pub fn push(&mut self, f: Factor) {
        if f.value() == 0.0 {
            return;
        }
        if let Some(last) = self.factors.last() {
            if let Some(m) = last.merged(&f) {
                self.factors.pop();
                if m.value() != 0.0 {
                    self.factors.push(m);
                }
                return;
            }
        }
        self.factors.push(f);
    }

    /// `other` after `self`.
    pub fn then(mut self, other: &QuadStepPlan) -> QuadStepPlan {
        for f in &other.factors {
            self.push(*f);
        }
        self
    }

    pub fn adjoint(&self) -> QuadStepPlan {
        let mut out = QuadStepPlan::identity();
        for f in self.factors.iter().rev() {
            out.push(f.inverse());
        }
        out
    }

    pub fn symplectic(&self) -> SymplecticMap {
        self.factors
            .iter()
            .fold(SymplecticMap::IDENTITY, |acc, f| f.map().compose(&acc))
    }

    /// Applies the factors in place without boundary checks beyond those
    /// each dilation performs.
    pub fn apply(&self, psi: &mut WaveFunction) -> Result<()> {
        for f in &self.factors {
            f.apply(psi)?;
        }
        Ok(())
    }

    /// Like [`apply`](Self::apply) but runs the overflow monitor after every
    /// free flow, so content that wrapped around the box is caught.
    pub fn apply_checked(&self, psi: &mut WaveFunction) -> Result<()> {
        for f in &self.factors {
            f.apply(psi)?;
            if matches!(f, Factor::FreeFlow(_)) {
                psi.check_on_grid()?;
            }
        }
        Ok(())
    }

    pub fn apply_gaussian(&self, g: &GaussianState) -> Result<GaussianState> {
        let mut out = g.clone();
        for f in &self.factors {
            out = gaussian_apply(&f.map(), &out)?;
        }
        Ok(out)
    }

    /// Human-readable factor list for run metadata.
    pub fn describe(&self) -> Vec<String> {
        self.factors
            .iter()
            .map(|f| match f {
                Factor::QuadraticPhase(c) => format!("quadratic_phase({c:.12e})"),
                Factor::FreeFlow(t) => format!("free_flow({t:.12e})"),
                Factor::Dilation(th) => format!("dilation({th:.12e})"),
            })
            .collect()
    }
}

fn mehler_piece(h: f64, omega: f64) -> [Factor; 3] {
    let (s, c) = (omega * h).sin_cos();
    let tan = s / c;
    [
        Factor::FreeFlow(tan / omega),
        Factor::Dilation(c.ln()),
        Factor::QuadraticPhase(-omega * tan),
    ]
}

/// `e^{-i(t1-t0)H0}` in the harmonic region, cut into pieces with
/// `|ωh| ≤ MEHLER_MAX_PHASE`.
pub fn mehler_plan(t0: f64, t1: f64, params: &DecayParams) -> Result<QuadStepPlan> {
    let r0 = params.r0();
    if t0.abs() > r0 || t1.abs() > r0 {
        return Err(Error::Domain(format!(
            "harmonic evolution on [{t0}, {t1}] leaves |t| ≤ {r0}"
        )));
    }
    harmonic_plan(t1 - t0, params.omega(), 1)
}

/// Harmonic evolution over `dt` with at least `min_pieces` Mehler pieces.
pub fn harmonic_plan(dt: f64, omega: f64, min_pieces: usize) -> Result<QuadStepPlan> {
    let mut plan = QuadStepPlan::identity();
    if dt == 0.0 {
        return Ok(plan);
    }
    let pieces = ((omega * dt).abs() / MEHLER_MAX_PHASE).ceil().max(min_pieces as f64) as usize;
    let h = dt / pieces as f64;
    let piece = mehler_piece(h, omega);
    for _ in 0..pieces {
        for f in piece {
            plan.push(f);
        }
    }
    Ok(plan)
}

pub fn mehler_evolve(psi: &WaveFunction, t0: f64, t1: f64, params: &DecayParams) -> Result<WaveFunction> {
    let mut out = psi.clone();
    mehler_plan(t0, t1, params)?.apply(&mut out)?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Adjoint,
}

/// `Ũ0(t)`, or its adjoint.
pub fn u0_tilde_plan(t: f64, params: &DecayParams, direction: Direction) -> Result<QuadStepPlan> {
    let forward = if t.abs() < params.r0() {
        harmonic_plan(t, params.omega(), 1)?
    } else {
        let lambda = params.lambda();
        let at = t.abs();
        let tau = t.signum() * at.powf(1.0 - 2.0 * lambda) / (1.0 - 2.0 * lambda);
        let mut plan = QuadStepPlan::identity();
        plan.push(Factor::FreeFlow(tau));
        plan.push(Factor::Dilation(lambda * at.ln()));
        plan.push(Factor::QuadraticPhase(lambda / t));
        plan
    };
    Ok(match direction {
        Direction::Forward => forward,
        Direction::Adjoint => forward.adjoint(),
    })
}

pub fn u0_tilde(psi: &WaveFunction, t: f64, params: &DecayParams, direction: Direction) -> Result<WaveFunction> {
    let mut out = psi.clone();
    u0_tilde_plan(t, params, direction)?.apply_checked(&mut out)?;
    Ok(out)
}

/// `U0(t1, t0)` from `Ũ0(t)Ũ0(s)*` on outer pieces and Mehler on inner ones.
pub fn u0_plan(t0: f64, t1: f64, params: &DecayParams) -> Result<QuadStepPlan> {
    let mut plan = QuadStepPlan::identity();
    for (s, t) in split_at_boundaries(t0, t1, params.r0()) {
        let mid = 0.5 * (s + t);
        let piece = if mid.abs() < params.r0() {
            harmonic_plan(t - s, params.omega(), 1)?
        } else {
            u0_tilde_plan(s, params, Direction::Adjoint)?.then(&u0_tilde_plan(t, params, Direction::Forward)?)
        };
        plan = plan.then(&piece);
    }
    Ok(plan)
}

pub fn u0_compose(psi: &WaveFunction, t0: f64, t1: f64, params: &DecayParams) -> Result<WaveFunction> {
    let mut out = psi.clone();
    u0_plan(t0, t1, params)?.apply_checked(&mut out)?;
    out.check_on_grid()?;
    Ok(out)
}

/// Three-factor form `phase((d-1)/b) · free(b) · phase((a-1)/b)` of a map
/// with `b ≠ 0`; `b = 0` maps become a dilation and a phase.
///
/// As an operator this is the metaplectic lift continuously connected to
/// the identity through maps whose `b` keeps one sign, which is every
/// propagator over a short enough step.
pub fn shear_plan(map: &SymplecticMap) -> Result<QuadStepPlan> {
    let mut plan = QuadStepPlan::identity();
    if map.b == 0.0 {
        if map.a <= 0.0 {
            return Err(Error::Domain(format!("map with b = 0 and a = {} has no shear form", map.a)));
        }
        plan.push(Factor::Dilation(map.a.ln()));
        plan.push(Factor::QuadraticPhase(map.c / map.a));
        return Ok(plan);
    }
    plan.push(Factor::QuadraticPhase((map.a - 1.0) / map.b));
    plan.push(Factor::FreeFlow(map.b));
    plan.push(Factor::QuadraticPhase((map.d - 1.0) / map.b));
    Ok(plan)
}

/// `U0(t1, t0)` assembled from shear steps only; no dilations, two FFTs per
/// piece. Harmonic pieces are cut below a quarter period.
pub fn u0_shear_plan(t0: f64, t1: f64, params: &DecayParams) -> Result<QuadStepPlan> {
    let mut plan = QuadStepPlan::identity();
    for (s, t) in split_at_boundaries(t0, t1, params.r0()) {
        let mid = 0.5 * (s + t);
        if mid.abs() < params.r0() {
            let omega = params.omega();
            let pieces = ((omega * (t - s)).abs() / (0.5 * PI)).ceil().max(1.0) as usize;
            let step = shear_plan(&flow_harmonic((t - s) / pieces as f64, omega))?;
            for _ in 0..pieces {
                plan = plan.then(&step);
            }
        } else {
            plan = plan.then(&shear_plan(&flow_decay(s, t, params)?)?);
        }
    }
    Ok(plan)
}
