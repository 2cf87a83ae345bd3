//! Run configuration, artifact files and the batch commands behind the CLI.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gauss::GaussianState;
use crate::interprop::{interaction_window, InteractionWindow};
use crate::model::{check_admissibility, DecayParams, PotentialComponent, PotentialSpec};
use crate::recon::{
    compare_potentials, disk_mask, fbp_invert, reconstruct, sinogram_rms, xray_sinogram, Field, Metrics, ReconConfig,
};
use crate::scatter::{
    noise_floor, s_tilde_element, scan_samples, ProbeSpec, RadonSample, ScanConfig, ScatterConfig, Sinogram,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub params: DecayParams,
    pub potential: PotentialSpec,
    #[serde(default)]
    pub scatter: ScatterConfig,
    #[serde(default)]
    pub scan: ScanConfig,
    /// Speeds for extrapolation runs.
    #[serde(default = "default_velocities")]
    pub velocities: Vec<f64>,
    #[serde(default)]
    pub recon: ReconConfig,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "one")]
    pub workers: usize,
    /// Seed for randomized corpora; the scattering pipeline itself is not random.
    #[serde(default)]
    pub seed: u64,
}

fn default_velocities() -> Vec<f64> {
    vec![8.0, 16.0, 32.0, 64.0]
}

fn one() -> usize {
    1
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn sha256(&self) -> String {
        hex(&Sha256::digest(self.to_json().as_bytes()))
    }

    pub fn dim(&self) -> usize {
        self.scatter.grid.dim()
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckLine {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckLine>,
    /// `(speed, window)` for a head-on probe through the origin.
    pub windows: Vec<(f64, Option<InteractionWindow>)>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let mark = if c.passed { "ok  " } else { "FAIL" };
            out.push_str(&format!("{mark} {}: {}\n", c.name, c.detail));
        }
        for (v, w) in &self.windows {
            match w {
                Some(w) if w.empty => out.push_str(&format!("window |v|={v}: empty\n")),
                Some(w) => out.push_str(&format!("window |v|={v}: t* = {:.4}\n", w.t_star)),
                None => out.push_str(&format!("window |v|={v}: exceeds r0\n")),
            }
        }
        out
    }
}

fn smallest_feature(spec: &PotentialSpec) -> Option<f64> {
    spec.components
        .iter()
        .filter_map(|c| match c {
            PotentialComponent::GaussianBump { width, .. } => Some(*width),
            PotentialComponent::SmoothCompactBump { radius, .. } => Some(*radius),
            _ => None,
        })
        .min_by(f64::total_cmp)
}

pub fn cmd_validate(cfg: &RunConfig) -> ValidationReport {
    let n = cfg.dim();
    let mut checks: Vec<CheckLine> = check_admissibility(&cfg.potential, &cfg.params, n)
        .clauses
        .iter()
        .map(|c| CheckLine {
            name: match c.component {
                Some(i) => format!("{} (component {i})", c.clause),
                None => c.clause.clone(),
            },
            passed: c.passed,
            detail: c.detail.clone(),
        })
        .collect();
    let mut push = |name: &str, r: Result<String>| {
        let (passed, detail) = match r {
            Ok(d) => (true, d),
            Err(e) => (false, e.to_string()),
        };
        checks.push(CheckLine {
            name: name.into(),
            passed,
            detail,
        });
    };
    push("evolve", cfg.scatter.evolve.validate().map(|_| format!("dt_scale = {}", cfg.scatter.evolve.dt_scale)));
    push("scan", cfg.scan.validate().map(|_| format!("{} x {} samples", cfg.scan.angles, cfg.scan.offsets)));
    push(
        "grid budget",
        GaussianState::probe(vec![0.0; n], vec![0.0; n], cfg.scan.probe_width)
            .and_then(|g| g.sample_to_grid(&cfg.scatter.grid))
            .map(|_| {
                format!(
                    "{}^{} points, half-width {}",
                    cfg.scatter.grid.points(),
                    n,
                    cfg.scatter.grid.half_width()
                )
            }),
    );
    push(
        "velocities",
        if cfg.velocities.len() >= 3 && cfg.velocities.windows(2).all(|w| w[1] > w[0]) && cfg.velocities[0] > 0.0 {
            Ok(format!("{:?}", cfg.velocities))
        } else {
            Err(Error::Config("need at least three positive increasing speeds".into()))
        },
    );
    push(
        "workers",
        if cfg.workers >= 1 {
            Ok(cfg.workers.to_string())
        } else {
            Err(Error::Config("workers must be at least 1".into()))
        },
    );
    if cfg.recon.deconvolve.is_none() {
        let feature = smallest_feature(&cfg.potential);
        push(
            "smear",
            match feature {
                Some(f) if cfg.scan.probe_width > 0.25 * f => Err(Error::Config(format!(
                    "probe width {} exceeds a quarter of the smallest feature {f}; enable recon.deconvolve or narrow the probe",
                    cfg.scan.probe_width
                ))),
                _ => Ok("accepted without deconvolution".into()),
            },
        );
    }
    let windows = if n == 2 && !cfg.potential.is_zero() {
        cfg.velocities
            .iter()
            .map(|&v| {
                let w = GaussianState::probe(vec![0.0, 0.0], vec![v, 0.0], cfg.scan.probe_width)
                    .and_then(|g| interaction_window(&g, &cfg.potential, &cfg.params, cfg.scatter.evolve.tol_window))
                    .ok();
                (v, w)
            })
            .collect()
    } else {
        Vec::new()
    };
    ValidationReport { checks, windows }
}

fn require_valid(cfg: &RunConfig) -> Result<()> {
    let report = cmd_validate(cfg);
    match report.checks.iter().find(|c| !c.passed) {
        Some(c) => Err(Error::Config(format!("{} failed: {}", c.name, c.detail))),
        None => Ok(()),
    }
}

/// Machine-readable record of how an output directory was produced.
pub fn provenance(cfg: &RunConfig, command: &str) -> Value {
    json!({
        "command": command,
        "config_sha256": cfg.sha256(),
        "version": env!("CARGO_PKG_VERSION"),
        "crate": env!("CARGO_PKG_NAME"),
        "tolerances": {
            "tol_window": cfg.scatter.evolve.tol_window,
            "dt_scale": cfg.scatter.evolve.dt_scale,
            "clamp_factor": cfg.scatter.evolve.clamp_factor,
            "boundary_tol": cfg.scatter.evolve.boundary_tol,
            "max_hole_fraction": cfg.scan.max_hole_fraction,
        },
        "config": serde_json::to_value(cfg).expect("config serializes"),
    })
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn out_dir(cfg: &RunConfig, out: Option<&Path>) -> Result<PathBuf> {
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| Error::Usage("no output directory: pass --out or set output_dir".into()))?;
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementReport {
    pub angle: f64,
    pub offset: f64,
    pub speed: f64,
    /// `|v|·element`.
    pub value: Complex64,
    pub error: f64,
    pub t_star: f64,
    pub empty_window: bool,
}

pub fn cmd_element(cfg: &RunConfig, angle: f64, offset: f64, speed: f64, out: Option<&Path>) -> Result<ElementReport> {
    require_valid(cfg)?;
    let probe = ProbeSpec::planar(cfg.scan.probe_width, angle, offset, speed)?;
    let r = s_tilde_element(&probe, &cfg.potential, &cfg.params, &cfg.scatter)?;
    let report = ElementReport {
        angle,
        offset,
        speed,
        value: r.scaled(),
        error: r.scaled().im.abs(),
        t_star: r.window.t_star,
        empty_window: r.window.empty,
    };
    if out.is_some() || cfg.output_dir.is_some() {
        let dir = out_dir(cfg, out)?;
        write_json(&dir.join("element.json"), &report)?;
        write_json(&dir.join("provenance.json"), &provenance(cfg, "element"))?;
    }
    Ok(report)
}

/// One line of `records.jsonl`; values are stored as raw bits so a resumed
/// scan reproduces the uninterrupted one exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Record {
    k: usize,
    m: usize,
    re: u64,
    im: u64,
    hole: Option<String>,
}

impl Record {
    fn from_sample(s: &RadonSample) -> Self {
        Record {
            k: s.angle_index,
            m: s.offset_index,
            re: s.value.re.to_bits(),
            im: s.value.im.to_bits(),
            hole: s.hole.clone(),
        }
    }

    fn to_sample(&self, scan: &ScanConfig) -> RadonSample {
        let angle = scan.angle(self.k);
        let value = Complex64::new(f64::from_bits(self.re), f64::from_bits(self.im));
        RadonSample {
            angle_index: self.k,
            offset_index: self.m,
            angle,
            direction: [angle.cos(), angle.sin()],
            offset: scan.offset(self.m),
            value,
            speed: scan.speed,
            error: value.im.abs(),
            hole: self.hole.clone(),
        }
    }
}

const RECORDS: &str = "records.jsonl";

fn read_records(path: &Path, scan: &ScanConfig) -> Result<Vec<RadonSample>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        // a torn last line from an interrupted run is simply recomputed
        if let Ok(r) = serde_json::from_str::<Record>(&line) {
            if r.hole.is_none() {
                out.push(r.to_sample(scan));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SinogramMeta {
    shape: [usize; 2],
    dtype: String,
    order: String,
    angles: Vec<f64>,
    offsets: Vec<f64>,
    speed: f64,
    probe_width: f64,
    holes: Vec<(usize, usize, String)>,
}

pub fn write_sinogram(dir: &Path, sino: &Sinogram) -> Result<()> {
    let (k, m) = sino.shape();
    let mut csv = String::from("angle,offset,value,error,speed\n");
    for a in 0..k {
        for j in 0..m {
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                sino.angles[a],
                sino.offsets[j],
                sino.values[a * m + j],
                sino.errors[a * m + j],
                sino.speed
            ));
        }
    }
    fs::write(dir.join("sinogram.csv"), csv)?;
    let bytes: Vec<u8> = sino.values.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(dir.join("sinogram.bin"), bytes)?;
    let meta = SinogramMeta {
        shape: [k, m],
        dtype: "f64le".into(),
        order: "row-major (angle, offset)".into(),
        angles: sino.angles.clone(),
        offsets: sino.offsets.clone(),
        speed: sino.speed,
        probe_width: sino.probe_width,
        holes: sino.holes.clone(),
    };
    write_json(&dir.join("sinogram.json"), &meta)
}

/// Reads `sinogram.json` and `sinogram.bin` from `dir`.
pub fn read_sinogram(dir: &Path) -> Result<Sinogram> {
    let meta: SinogramMeta = serde_json::from_str(&fs::read_to_string(dir.join("sinogram.json"))?)?;
    let bytes = fs::read(dir.join("sinogram.bin"))?;
    let [k, m] = meta.shape;
    if bytes.len() != 8 * k * m || meta.angles.len() != k || meta.offsets.len() != m {
        return Err(Error::Config("sinogram.bin does not match the shape in sinogram.json".into()));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok(Sinogram {
        angles: meta.angles,
        offsets: meta.offsets,
        values,
        errors: vec![0.0; k * m],
        speed: meta.speed,
        probe_width: meta.probe_width,
        holes: meta.holes,
    })
}

/// Runs (or resumes) the scan and writes CSV, binary, metadata and
/// provenance. Samples are appended to `records.jsonl` as they finish.
pub fn cmd_sinogram(cfg: &RunConfig, out: Option<&Path>, workers: Option<usize>, resume: bool) -> Result<Sinogram> {
    require_valid(cfg)?;
    let dir = out_dir(cfg, out)?;
    let records = dir.join(RECORDS);
    let done = if resume {
        read_records(&records, &cfg.scan)?
    } else {
        Vec::new()
    };
    let file = OpenOptions::new()
        .create(true)
        .write(true)
        .append(resume)
        .truncate(!resume)
        .open(&records)?;
    if resume {
        // rewrite the kept records so a torn tail never survives
        let mut f = File::create(&records)?;
        for s in &done {
            writeln!(f, "{}", serde_json::to_string(&Record::from_sample(s))?)?;
        }
    }
    drop(file);
    let writer = Mutex::new(OpenOptions::new().append(true).open(&records)?);
    let write_failed = Mutex::new(None::<std::io::Error>);
    let record = |s: &RadonSample| {
        let line = serde_json::to_string(&Record::from_sample(s)).expect("record serializes");
        let mut w = writer.lock().expect("writer lock");
        if let Err(e) = writeln!(w, "{line}").and_then(|_| w.flush()) {
            write_failed.lock().expect("error lock").get_or_insert(e);
        }
    };
    let samples = scan_samples(
        &cfg.potential,
        &cfg.params,
        &cfg.scan,
        &cfg.scatter,
        workers.unwrap_or(cfg.workers).max(1),
        &done,
        &record,
    )?;
    if let Some(e) = write_failed.into_inner().expect("error lock") {
        return Err(e.into());
    }
    write_json(&dir.join("provenance.json"), &provenance(cfg, "sinogram"))?;
    match Sinogram::assemble(&cfg.scan, &samples) {
        Ok(sino) => {
            write_sinogram(&dir, &sino)?;
            Ok(sino)
        }
        Err(e) => {
            let holes: Vec<_> = samples
                .iter()
                .filter_map(|s| s.hole.as_ref().map(|h| json!({"angle_index": s.angle_index, "offset_index": s.offset_index, "reason": h})))
                .collect();
            write_json(&dir.join("holes.json"), &holes)?;
            Err(e)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconReport {
    pub metrics: Metrics,
    pub support_radius: f64,
    pub deconvolve: Option<f64>,
    pub grid: crate::grid::GridSpec,
    pub angles: usize,
    pub offsets: usize,
}

/// Inverts a stored sinogram and writes the field (binary, CSV, PGM) with a
/// metrics document measured against the configured potential.
pub fn cmd_reconstruct(sino: &Sinogram, cfg: &RunConfig, out: Option<&Path>) -> Result<ReconReport> {
    let dir = out_dir(cfg, out)?;
    let clamp = cfg.scatter.evolve.clamp_factor / cfg.scatter.grid.dx();
    let result = reconstruct(sino, &cfg.potential, &cfg.recon, clamp)?;
    let reference = xray_sinogram(&cfg.potential, sino, sino.probe_width, clamp)?;
    let metrics = Metrics {
        sinogram_rms: Some(sinogram_rms(sino, &reference)?),
        ..result.metrics
    };
    write_field(&dir, "field", &result.field)?;
    let report = ReconReport {
        metrics,
        support_radius: cfg.recon.support_radius,
        deconvolve: cfg.recon.deconvolve,
        grid: cfg.recon.grid,
        angles: sino.angles.len(),
        offsets: sino.offsets.len(),
    };
    write_json(&dir.join("metrics.json"), &report)?;
    write_json(&dir.join("provenance.json"), &provenance(cfg, "reconstruct"))?;
    Ok(report)
}

pub fn write_field(dir: &Path, stem: &str, field: &Field) -> Result<()> {
    fs::write(dir.join(format!("{stem}.bin")), field.to_le_bytes())?;
    fs::write(dir.join(format!("{stem}.pgm")), field.to_pgm())?;
    fs::write(dir.join(format!("{stem}.csv")), field.to_csv())?;
    let g = field.grid;
    let meta = json!({
        "shape": [g.points(), g.points()],
        "dtype": "f64le",
        "order": "row-major (x, y)",
        "axis_range": [g.coord(0), g.coord(g.points() - 1)],
    });
    write_json(&dir.join(format!("{stem}.json")), &meta)
}

/// Sinogram distance beyond which two potentials count as different, in
/// units of the noise floor.
pub const DISTINGUISH_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub sinogram_distance: f64,
    pub field_distance: f64,
    pub noise_floor: f64,
    pub threshold: f64,
    pub verdict: String,
}

pub fn compare_sinograms(a: &Sinogram, b: &Sinogram, floor: f64, recon: &ReconConfig) -> Result<CompareReport> {
    let d = sinogram_rms(a, b)?;
    let fa = fbp_invert(a, &recon.grid)?;
    let fb = fbp_invert(b, &recon.grid)?;
    let field_distance = compare_potentials(&fa, &fb, &disk_mask(&recon.grid, recon.support_radius))?.linf;
    let threshold = DISTINGUISH_FACTOR * floor;
    let verdict = if d > threshold {
        "distinguishable"
    } else {
        "indistinguishable at this scale"
    };
    Ok(CompareReport {
        sinogram_distance: d,
        field_distance,
        noise_floor: floor,
        threshold,
        verdict: verdict.into(),
    })
}

/// Scans both configurations and compares them against the `V = 0` floor.
pub fn cmd_compare(a: &RunConfig, b: &RunConfig, out: Option<&Path>, workers: Option<usize>) -> Result<CompareReport> {
    if a.scan != b.scan || a.params != b.params || a.scatter != b.scatter {
        return Err(Error::Config("compared runs must share params, scan and scatter settings".into()));
    }
    let dir = out_dir(a, out)?;
    let sa = cmd_sinogram(a, Some(&dir.join("a")), workers, false)?;
    let sb = cmd_sinogram(b, Some(&dir.join("b")), workers, false)?;
    let floor = noise_floor(&a.potential.plus(&b.potential), &a.params, &a.scan, &a.scatter)?;
    let report = compare_sinograms(&sa, &sb, floor, &a.recon)?;
    write_json(&dir.join("compare.json"), &report)?;
    Ok(report)
}
