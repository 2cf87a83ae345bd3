//! WebAssembly bindings for the demo page in `www/`.
//!
//! The page can evaluate one scattering element, scan a single sinogram row
//! next to its X-ray limit, and show a filtered-backprojection preview. The
//! work happens in plain functions so it can be tested off the browser.

use std::cell::RefCell;

use tdho::io::RunConfig;
use tdho::recon::{fbp_invert, xray_line, xray_reference, Field};
use tdho::scatter::{s_tilde_element, ProbeSpec, ScanConfig, Sinogram};
use tdho::{GridSpec, Result};
use wasm_bindgen::prelude::*;

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    /// `|v|` times the element.
    pub re: f64,
    pub im: f64,
    pub t_star: f64,
}

pub fn element(cfg: &RunConfig, angle: f64, offset: f64, speed: f64) -> Result<Element> {
    let probe = ProbeSpec::planar(cfg.scan.probe_width, angle, offset, speed)?;
    let r = s_tilde_element(&probe, &cfg.potential, &cfg.params, &cfg.scatter)?;
    let y = r.scaled();
    Ok(Element {
        re: y.re,
        im: y.im,
        t_star: r.window.t_star,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub offsets: Vec<f64>,
    pub scattered: Vec<Element>,
    /// Smeared X-ray transform at the same offsets.
    pub limit: Vec<f64>,
}

fn clamp(cfg: &RunConfig) -> f64 {
    cfg.scatter.evolve.clamp_factor / cfg.scatter.grid.dx()
}

/// `samples` offsets spread over the configured scan width.
pub fn row(cfg: &RunConfig, angle: f64, speed: f64, samples: usize) -> Result<Row> {
    let reach = cfg.scan.ds * (cfg.scan.offsets.saturating_sub(1)) as f64 / 2.0;
    let samples = samples.max(2);
    let offsets: Vec<f64> = (0..samples).map(|j| -reach + 2.0 * reach * j as f64 / (samples - 1) as f64).collect();
    let dir = [angle.cos(), angle.sin()];
    let mut scattered = Vec::with_capacity(samples);
    let mut limit = Vec::with_capacity(samples);
    for &s in &offsets {
        scattered.push(element(cfg, angle, s, speed)?);
        limit.push(xray_reference(&cfg.potential, dir, s, cfg.scan.probe_width, clamp(cfg))?);
    }
    Ok(Row {
        offsets,
        scattered,
        limit,
    })
}

/// FBP of the exact X-ray transform with `angles` views, next to the sampled
/// potential, both on a `points²` grid.
pub fn preview(cfg: &RunConfig, angles: usize, points: usize) -> Result<(Field, Field)> {
    let grid = GridSpec::new(2, points, cfg.recon.grid.half_width())?;
    let scan = ScanConfig {
        angles,
        probe_width: 0.0,
        ..cfg.scan.clone()
    };
    let c = clamp(cfg);
    let failed = RefCell::new(None);
    let sino = Sinogram::from_fn(&scan, |a, s| {
        xray_line(&cfg.potential, [a.cos(), a.sin()], s, c).unwrap_or_else(|e| {
            failed.borrow_mut().get_or_insert(e);
            0.0
        })
    });
    if let Some(e) = failed.into_inner() {
        return Err(e);
    }
    let field = fbp_invert(&sino, &grid)?;
    Ok((field, Field::sample(&cfg.potential, grid, c)))
}

fn js(e: tdho::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct Demo {
    cfg: RunConfig,
}

#[wasm_bindgen]
impl Demo {
    /// Parses a run configuration in the same JSON format as the CLI.
    #[wasm_bindgen(constructor)]
    pub fn new(json: &str) -> std::result::Result<Demo, JsError> {
        let cfg = RunConfig::from_json(json).map_err(js)?;
        Ok(Demo { cfg })
    }

    /// `[re, im, t*]` of `|v|` times the element.
    pub fn element(&self, angle: f64, offset: f64, speed: f64) -> std::result::Result<Vec<f64>, JsError> {
        let e = element(&self.cfg, angle, offset, speed).map_err(js)?;
        Ok(vec![e.re, e.im, e.t_star])
    }

    /// Offsets, real parts, imaginary parts and limits, concatenated.
    pub fn row(&self, angle: f64, speed: f64, samples: usize) -> std::result::Result<Vec<f64>, JsError> {
        let r = row(&self.cfg, angle, speed, samples).map_err(js)?;
        let mut out = r.offsets;
        out.extend(r.scattered.iter().map(|e| e.re));
        out.extend(r.scattered.iter().map(|e| e.im));
        out.extend(r.limit);
        Ok(out)
    }

    /// Reconstruction then reference, each `points²` values with x as the slow index.
    pub fn preview(&self, angles: usize, points: usize) -> std::result::Result<Vec<f64>, JsError> {
        let (f, g) = preview(&self.cfg, angles, points).map_err(js)?;
        let mut out = f.values;
        out.extend(g.values);
        Ok(out)
    }

    #[wasm_bindgen(getter)]
    pub fn half_width(&self) -> f64 {
        self.cfg.recon.grid.half_width()
    }
}
