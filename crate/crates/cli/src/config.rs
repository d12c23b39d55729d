//! Flat `key = value` configuration with dotted keys. Command-line flags are
//! merged on top of the file before validation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use contactforge::distinguished::OdeConfig;
use contactforge::exec::Execution;
use contactforge::geometry::SamplingGrid;
use sha2::{Digest, Sha256};

pub const KEYS: &[(&str, &str)] = &[
    ("grid.shells", "radial shells (>= 1)"),
    ("grid.r_min", "smallest shell radius |z| (> 0)"),
    ("grid.r_max", "largest shell radius |z| (>= grid.r_min)"),
    ("grid.sphere_points", "directions per shell (>= 1)"),
    ("grid.time_samples", "samples of t in [0, 1) (>= 1)"),
    ("grid.homotopy_samples", "samples of s in [0, 1] (>= 1)"),
    ("grid.seed", "seed of the sphere sequence"),
    ("tol", "tolerance of the command's main check (> 0)"),
    ("ode.steps_per_unit", "RK4 steps per unit of s (16..=65536)"),
    ("ode.max_halvings", "step halvings allowed while building (<= 8)"),
    ("ode.residual_tol", "boundary residual accepted by the build (> 0)"),
    ("ode.cache", "file used to load and store flow samples"),
    ("spectrum.depth", "multiples per orbit family (1..=100000)"),
    ("mu.refine", "local refinement starts for mu (<= 1024)"),
    ("output.path", "write the report here instead of stdout"),
    ("exec.mode", "parallel or sequential"),
];

/// Help text listing every configuration key.
pub fn help() -> String {
    let mut s = String::from("Configuration file: one `key = value` per line, `#` starts a comment.\nFlags given on the command line override file values; `--set key=value` sets any key.\nKeys:\n");
    for (k, d) in KEYS {
        s.push_str(&format!("  {k:<24}{d}\n"));
    }
    s.push_str("Environment: CONTACTFORGE_THREADS caps the worker threads.\nExit status: 0 all checks pass, 1 a check failed or a numerical error, 2 usage error.");
    s
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Settings {
    pub raw: BTreeMap<String, String>,
    pub shells: Option<usize>,
    pub r_min: Option<f64>,
    pub r_max: Option<f64>,
    pub sphere_points: Option<usize>,
    pub time_samples: Option<usize>,
    pub homotopy_samples: Option<usize>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub steps_per_unit: Option<usize>,
    pub max_halvings: Option<usize>,
    pub residual_tol: Option<f64>,
    pub cache: Option<PathBuf>,
    pub depth: Option<usize>,
    pub refine: Option<usize>,
    pub output: Option<PathBuf>,
    pub mode: Option<Execution>,
}

pub fn parse_file(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| format!("config line {}: expected key = value", i + 1))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

pub fn parse_assignment(s: &str) -> Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("--set expects key=value, got {s:?}"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("{key}: cannot parse {v:?}"))
}

fn check(ok: bool, key: &str, what: &str) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(format!("{key}: {what}"))
    }
}

impl Settings {
    pub fn from_pairs(raw: BTreeMap<String, String>) -> Result<Self, String> {
        let mut s = Settings { raw: raw.clone(), ..Settings::default() };
        for (k, v) in &raw {
            let key = k.as_str();
            match key {
                "grid.shells" => s.shells = Some(num(key, v)?),
                "grid.r_min" => s.r_min = Some(num(key, v)?),
                "grid.r_max" => s.r_max = Some(num(key, v)?),
                "grid.sphere_points" => s.sphere_points = Some(num(key, v)?),
                "grid.time_samples" => s.time_samples = Some(num(key, v)?),
                "grid.homotopy_samples" => s.homotopy_samples = Some(num(key, v)?),
                "grid.seed" => s.seed = Some(num(key, v)?),
                "tol" => s.tol = Some(num(key, v)?),
                "ode.steps_per_unit" => s.steps_per_unit = Some(num(key, v)?),
                "ode.max_halvings" => s.max_halvings = Some(num(key, v)?),
                "ode.residual_tol" => s.residual_tol = Some(num(key, v)?),
                "ode.cache" => s.cache = Some(PathBuf::from(v)),
                "spectrum.depth" => s.depth = Some(num(key, v)?),
                "mu.refine" => s.refine = Some(num(key, v)?),
                "output.path" => s.output = Some(PathBuf::from(v)),
                "exec.mode" => {
                    s.mode = Some(match v.as_str() {
                        "parallel" => Execution::Parallel,
                        "sequential" => Execution::Sequential,
                        _ => return Err(format!("exec.mode: expected parallel or sequential, got {v:?}")),
                    })
                }
                _ => return Err(format!("unknown config key {key:?}")),
            }
        }
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<(), String> {
        for (key, v) in [("grid.shells", self.shells), ("grid.sphere_points", self.sphere_points), ("grid.time_samples", self.time_samples), ("grid.homotopy_samples", self.homotopy_samples)] {
            check(v.is_none_or(|x| x >= 1), key, "must be >= 1")?;
        }
        check(self.r_min.is_none_or(|x| x > 0.0 && x.is_finite()), "grid.r_min", "must be positive")?;
        check(self.r_max.is_none_or(|x| x.is_finite() && x >= self.r_min.unwrap_or(0.0) && x > 0.0), "grid.r_max", "must be >= grid.r_min")?;
        check(self.tol.is_none_or(|x| x > 0.0 && x.is_finite()), "tol", "must be positive")?;
        check(self.steps_per_unit.is_none_or(|x| (16..=65536).contains(&x)), "ode.steps_per_unit", "must lie in 16..=65536")?;
        check(self.max_halvings.is_none_or(|x| x <= 8), "ode.max_halvings", "must be <= 8")?;
        check(self.residual_tol.is_none_or(|x| x > 0.0 && x.is_finite()), "ode.residual_tol", "must be positive")?;
        check(self.depth.is_none_or(|x| (1..=100_000).contains(&x)), "spectrum.depth", "must lie in 1..=100000")?;
        check(self.refine.is_none_or(|x| x <= 1024), "mu.refine", "must be <= 1024")?;
        Ok(())
    }

    /// Overlays configured grid values on a command default.
    pub fn grid(&self, base: SamplingGrid) -> Result<SamplingGrid, String> {
        let g = SamplingGrid {
            shells: self.shells.unwrap_or(base.shells),
            r_min: self.r_min.unwrap_or(base.r_min),
            r_max: self.r_max.unwrap_or(base.r_max),
            sphere_points: self.sphere_points.unwrap_or(base.sphere_points),
            time_samples: self.time_samples.unwrap_or(base.time_samples),
            homotopy_samples: self.homotopy_samples.unwrap_or(base.homotopy_samples),
            seed: self.seed.unwrap_or(base.seed),
        };
        g.validate().map_err(|e| e.to_string())?;
        Ok(g)
    }

    pub fn ode(&self) -> OdeConfig {
        let d = OdeConfig::default();
        OdeConfig {
            steps_per_unit: self.steps_per_unit.unwrap_or(d.steps_per_unit),
            max_halvings: self.max_halvings.unwrap_or(d.max_halvings),
            residual_tol: self.residual_tol.unwrap_or(d.residual_tol),
            ..d
        }
    }

    pub fn tol_or(&self, default: f64) -> f64 {
        self.tol.unwrap_or(default)
    }

    pub fn mode(&self) -> Execution {
        self.mode.unwrap_or_default()
    }

    pub fn seed_or(&self, default: u64) -> u64 {
        self.seed.unwrap_or(default)
    }

    /// First 16 hex digits of SHA-256 over the sorted `key=value` lines, without
    /// the keys that cannot change results.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.raw.iter().filter(|(k, _)| !matches!(k.as_str(), "output.path" | "exec.mode")) {
            h.update(format!("{k}={v}\n").as_bytes());
        }
        h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

pub fn load(path: Option<&Path>, overrides: BTreeMap<String, String>) -> Result<Settings, String> {
    let mut raw = match path {
        Some(p) => parse_file(&std::fs::read_to_string(p).map_err(|e| format!("cannot read {}: {e}", p.display()))?)?,
        None => BTreeMap::new(),
    };
    raw.extend(overrides);
    Settings::from_pairs(raw)
}
