//! Flat key=value run configuration: file plus `--set` overrides, later
//! entries winning. Unknown keys are rejected before any computation.

use branching::laws::{ImmigrationLaw, IntensityLaw, LawSet, OffspringLaw, SlowlyVarying, SvfKind};
use std::collections::BTreeMap;

const KNOWN_KEYS: &[&str] = &[
    "offspring.gamma",
    "offspring.L.kind",
    "offspring.L.c",
    "offspring.L.beta",
    "immigration.alpha",
    "immigration.l.kind",
    "immigration.l.c",
    "immigration.l.beta",
    "intensity.theta",
    "intensity.L_R.kind",
    "intensity.L_R.c",
    "intensity.L_R.beta",
    "intensity.tau0",
    "mu",
    "t",
    "t_grid",
    "s_grid",
    "lambda_grid",
    "n_reps",
    "seed",
    "max_population",
    "max_events",
    "suite",
    "output_path",
    "output_format",
];

/// Parsed flat configuration.
#[derive(Debug, Default, Clone)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    /// Parse `key = value` lines; `#` starts a comment, blank lines skipped.
    pub fn parse_file(text: &str) -> Result<Self, String> {
        let mut config = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key=value, got {line:?}", lineno + 1))?;
            config.set(key.trim(), value.trim())?;
        }
        Ok(config)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(format!("unknown config key {key:?}"));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn apply_set_args(&mut self, sets: &[String]) -> Result<(), String> {
        for s in sets {
            let (key, value) = s
                .split_once('=')
                .ok_or_else(|| format!("--set expects KEY=VALUE, got {s:?}"))?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>, String> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<f64>()
                .map(Some)
                .map_err(|_| format!("{key}: not a number: {v:?}")),
        }
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, String> {
        Ok(self.f64(key)?.unwrap_or(default))
    }

    pub fn f64_required(&self, key: &str) -> Result<f64, String> {
        self.f64(key)?.ok_or_else(|| format!("missing required key {key}"))
    }

    pub fn u64(&self, key: &str) -> Result<Option<u64>, String> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<u64>()
                .map(Some)
                .map_err(|_| format!("{key}: not a non-negative integer: {v:?}")),
        }
    }

    /// Comma-separated list of numbers.
    pub fn grid(&self, key: &str) -> Result<Option<Vec<f64>>, String> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => {
                let items: Result<Vec<f64>, _> = v
                    .split(',')
                    .map(|p| p.trim())
                    .filter(|p| !p.is_empty())
                    .map(|p| p.parse::<f64>())
                    .collect();
                items
                    .map(Some)
                    .map_err(|_| format!("{key}: expected a comma-separated list, got {v:?}"))
            }
        }
    }

    fn svf(&self, prefix: &str, default_c: f64) -> Result<SlowlyVarying, String> {
        let kind = match self.get(&format!("{prefix}.kind")) {
            None | Some("Constant") => SvfKind::Constant,
            Some("LogPower") => SvfKind::LogPower,
            Some(other) => {
                return Err(format!(
                    "{prefix}.kind: expected Constant or LogPower, got {other:?}"
                ))
            }
        };
        let c = self.f64_or(&format!("{prefix}.c"), default_c)?;
        let beta = self.f64_or(&format!("{prefix}.beta"), 0.0)?;
        if kind == SvfKind::Constant && self.get(&format!("{prefix}.beta")).is_some() {
            return Err(format!("{prefix}.beta is only meaningful for LogPower"));
        }
        SlowlyVarying::new(kind, c, beta).map_err(|e| e.to_string())
    }

    /// Build and validate the model laws. Defaults: constant scale
    /// functions with `L = 1/(1+gamma)`, `l = 1`, `L_R = 1`, `tau0 = 1`,
    /// `mu = 1`.
    pub fn lawset(&self) -> Result<LawSet, String> {
        let gamma = self.f64_required("offspring.gamma")?;
        let alpha = self.f64_required("immigration.alpha")?;
        let theta = self.f64_required("intensity.theta")?;
        let offspring_scale = self.svf("offspring.L", 1.0 / (1.0 + gamma))?;
        let immigration_scale = self.svf("immigration.l", 1.0)?;
        let intensity_scale = self.svf("intensity.L_R", 1.0)?;
        let tau0 = self.f64_or("intensity.tau0", 1.0)?;
        let mu = self.f64_or("mu", 1.0)?;
        let offspring = OffspringLaw::new(gamma, offspring_scale).map_err(|e| e.to_string())?;
        let immigration =
            ImmigrationLaw::new(alpha, immigration_scale).map_err(|e| e.to_string())?;
        let intensity =
            IntensityLaw::new(theta, intensity_scale, tau0).map_err(|e| e.to_string())?;
        LawSet::new(offspring, immigration, intensity, mu).map_err(|e| e.to_string())
    }
}
