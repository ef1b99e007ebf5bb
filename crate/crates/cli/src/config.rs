//! Run configuration: TOML schema, validation, and conversion into the core
//! scenario and tracker types.

use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use airtrack_core::filters::FilterKind;
use airtrack_core::models::{DynamicsSpec, ModelSwitchMatrix};
use airtrack_core::scenarios::adsb::{ClassAConfig, SensorSite};
use airtrack_core::scenarios::class_b::ClassBConfig;
use airtrack_core::scenarios::geodesy::Geodetic;

/// Schema version understood by this build.
pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub scenario: Scenario,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    #[serde(default)]
    pub seed_count: Option<u64>,
    pub filters: Vec<FilterSpec>,
    #[serde(default)]
    pub class_b: ClassBSection,
    #[serde(default)]
    pub class_a: ClassASection,
    #[serde(default)]
    pub tracker: TrackerSection,
    #[serde(default)]
    pub metrics: MetricsSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    ClassB,
    ClassA,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    pub kind: String,
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub kappa: Option<f64>,
    #[serde(default)]
    pub iterations: Option<usize>,
}

impl FilterSpec {
    pub fn build(&self) -> Result<(FilterKind, String)> {
        let kind = match self.kind.as_str() {
            "ekf" => FilterKind::Ekf,
            "ckf" => FilterKind::Ckf,
            "ukf" => {
                let defaults = FilterKind::ukf_defaults();
                let (da, db) = match defaults {
                    FilterKind::Ukf { alpha, beta, .. } => (alpha, beta),
                    _ => unreachable!(),
                };
                FilterKind::Ukf {
                    alpha: self.alpha.unwrap_or(da),
                    beta: self.beta.unwrap_or(db),
                    kappa: self.kappa,
                }
            }
            "sif" => FilterKind::Sif {
                iterations: self.iterations.unwrap_or(10),
            },
            other => bail!("unknown filter kind `{other}` (expected ekf, ukf, ckf, or sif)"),
        };
        let label = self.label.clone().unwrap_or_else(|| kind.label().to_string());
        Ok((kind, label))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassBSection {
    pub n_targets: usize,
    pub box_origin: [f64; 2],
    pub box_extent: [f64; 2],
    pub speed_bound: f64,
    pub dt: f64,
    pub horizon: usize,
    pub omega_deg: f64,
    pub q: f64,
    pub switch: Vec<Vec<f64>>,
    pub noise_range_var: f64,
    pub noise_bearing_var_deg2: f64,
}

impl Default for ClassBSection {
    fn default() -> Self {
        let d = ClassBConfig::default();
        Self {
            n_targets: d.n_targets,
            box_origin: [d.box_origin.0, d.box_origin.1],
            box_extent: [d.box_extent.0, d.box_extent.1],
            speed_bound: d.speed_bound,
            dt: d.dt,
            horizon: d.horizon,
            omega_deg: d.omega.to_degrees(),
            q: d.q_x,
            switch: (0..3).map(|r| d.switch.row(r)).collect(),
            noise_range_var: d.noise[(0, 0)],
            noise_bearing_var_deg2: d.noise[(1, 1)] / (std::f64::consts::PI / 180.0).powi(2),
        }
    }
}

impl ClassBSection {
    pub fn build(&self) -> Result<ClassBConfig> {
        let k = self.switch.len();
        let switch = DMatrix::from_fn(k, k, |r, c| {
            self.switch.get(r).and_then(|row| row.get(c)).copied().unwrap_or(f64::NAN)
        });
        if switch.iter().any(|v| v.is_nan()) {
            bail!("switch matrix must be square ({k} rows)");
        }
        for r in 0..k {
            let sum: f64 = (0..k).map(|c| switch[(r, c)]).sum();
            if (sum - 1.0).abs() > 1e-9 {
                bail!("switch matrix row {r} sums to {sum}, expected 1");
            }
        }
        let switch = ModelSwitchMatrix::new(switch).map_err(|e| anyhow!("{e}"))?;
        let deg = std::f64::consts::PI / 180.0;
        Ok(ClassBConfig {
            n_targets: self.n_targets,
            box_origin: (self.box_origin[0], self.box_origin[1]),
            box_extent: (self.box_extent[0], self.box_extent[1]),
            speed_bound: self.speed_bound,
            dt: self.dt,
            horizon: self.horizon,
            switch,
            omega: self.omega_deg * deg,
            q_x: self.q,
            q_y: self.q,
            radar_position: (0.0, 0.0),
            noise: DMatrix::from_diagonal(&DVector::from_vec(vec![
                self.noise_range_var,
                self.noise_bearing_var_deg2 * deg * deg,
            ])),
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassASection {
    pub adsb_path: Option<PathBuf>,
    pub scan_interval: f64,
    pub clutter_rate: f64,
    pub max_range: f64,
    pub origin: Option<GeoPoint>,
    pub sensors: Option<Vec<SensorPoint>>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
    #[serde(default)]
    pub alt: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorPoint {
    pub label: String,
    pub lat: f64,
    pub lon: f64,
    #[serde(default)]
    pub alt: f64,
}

impl Default for ClassASection {
    fn default() -> Self {
        let d = ClassAConfig::default();
        Self {
            adsb_path: None,
            scan_interval: d.scan_interval,
            clutter_rate: d.clutter_rate,
            max_range: d.max_range,
            origin: None,
            sensors: None,
        }
    }
}

impl ClassASection {
    pub fn build(&self) -> Result<(ClassAConfig, PathBuf)> {
        let path = self
            .adsb_path
            .clone()
            .context("class_a scenario requires class_a.adsb_path")?;
        let mut config = ClassAConfig::default();
        config.scan_interval = self.scan_interval;
        config.clutter_rate = self.clutter_rate;
        config.max_range = self.max_range;
        if let Some(o) = self.origin {
            config.origin = Geodetic::new(o.lat, o.lon, o.alt);
        }
        if let Some(sensors) = &self.sensors {
            if sensors.is_empty() {
                bail!("class_a.sensors must not be empty when given");
            }
            config.sensors = sensors
                .iter()
                .map(|s| SensorSite {
                    label: s.label.clone(),
                    position: Geodetic::new(s.lat, s.lon, s.alt),
                })
                .collect();
        }
        if !(config.scan_interval > 0.0) {
            bail!("class_a.scan_interval must be positive");
        }
        if config.clutter_rate < 0.0 {
            bail!("class_a.clutter_rate must be non-negative");
        }
        Ok((config, path))
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackerSection {
    pub gate: f64,
    pub deletion_threshold: f64,
    /// Process-noise intensity for the planar scenario tracker.
    pub q: f64,
    /// Horizontal and vertical process-noise intensities for the replay
    /// scenario tracker.
    pub q_horizontal: f64,
    pub q_vertical: f64,
    /// Known-prior initial covariance diagonal value (planar scenario).
    pub prior_var: f64,
    /// Single-point initiation velocity standard deviation (replay scenario).
    pub velocity_std: f64,
}

impl Default for TrackerSection {
    fn default() -> Self {
        Self {
            gate: 5.0,
            deletion_threshold: 10.0,
            q: 400.0,
            q_horizontal: 1.0,
            q_vertical: 0.5,
            prior_var: 100.0,
            velocity_std: 150.0,
        }
    }
}

impl TrackerSection {
    pub fn dynamics(&self, scenario: Scenario) -> DynamicsSpec {
        match scenario {
            Scenario::ClassB => DynamicsSpec::Ncv2d { qx: self.q, qy: self.q },
            Scenario::ClassA => DynamicsSpec::Cv3d {
                qx: self.q_horizontal,
                qy: self.q_horizontal,
                qz: self.q_vertical,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsSection {
    pub ospa_p: f64,
    pub ospa_c: Option<f64>,
    pub siap_cutoff: Option<f64>,
}

impl Default for MetricsSection {
    fn default() -> Self {
        Self { ospa_p: 2.0, ospa_c: None, siap_cutoff: None }
    }
}

impl MetricsSection {
    /// OSPA cutoff: configured value, else the scenario default.
    pub fn ospa_c(&self, scenario: Scenario) -> f64 {
        self.ospa_c.unwrap_or(match scenario {
            Scenario::ClassB => 10.0,
            Scenario::ClassA => 250.0,
        })
    }

    pub fn siap_cutoff(&self, scenario: Scenario) -> f64 {
        self.siap_cutoff.unwrap_or(match scenario {
            Scenario::ClassB => 500.0,
            Scenario::ClassA => 250.0,
        })
    }
}

impl RunConfig {
    /// Resolved seed list; `--seed` overrides, then `seeds`, then
    /// `seed_count`, then seed 1.
    pub fn resolve_seeds(&self, override_seed: Option<u64>) -> Result<Vec<u64>> {
        if let Some(s) = override_seed {
            return Ok(vec![s]);
        }
        match (&self.seeds, self.seed_count) {
            (Some(_), Some(_)) => bail!("give either seeds or seed_count, not both"),
            (Some(list), None) => {
                if list.is_empty() {
                    bail!("seeds must not be empty");
                }
                Ok(list.clone())
            }
            (None, Some(n)) => {
                if n == 0 {
                    bail!("seed_count must be positive");
                }
                Ok((1..=n).collect())
            }
            (None, None) => Ok(vec![1]),
        }
    }

    /// Full semantic validation beyond what serde enforces.
    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            bail!("unsupported config version {} (this build reads {CONFIG_VERSION})", self.version);
        }
        if self.filters.is_empty() {
            bail!("at least one filter is required");
        }
        for f in &self.filters {
            f.build()?;
        }
        let mut labels: Vec<String> =
            self.filters.iter().map(|f| f.build().unwrap().1).collect();
        labels.sort();
        labels.dedup();
        if labels.len() != self.filters.len() {
            bail!("filter labels must be unique");
        }
        self.resolve_seeds(None)?;
        if !(self.tracker.gate > 0.0) {
            bail!("tracker.gate must be positive");
        }
        if !(self.tracker.deletion_threshold > 0.0) {
            bail!("tracker.deletion_threshold must be positive");
        }
        if self.metrics.ospa_p < 1.0 {
            bail!("metrics.ospa_p must be >= 1");
        }
        match self.scenario {
            Scenario::ClassB => {
                let b = self.class_b.build()?;
                if b.n_targets == 0 || b.horizon == 0 {
                    bail!("class_b.n_targets and class_b.horizon must be positive");
                }
                if !(b.dt > 0.0) {
                    bail!("class_b.dt must be positive");
                }
            }
            Scenario::ClassA => {
                self.class_a.build()?;
            }
        }
        Ok(())
    }
}

/// First line (1-based) of `text` that mentions `needle`, for error messages
/// about semantically invalid values.
pub fn line_of(text: &str, needle: &str) -> Option<usize> {
    text.lines().position(|l| l.contains(needle)).map(|i| i + 1)
}

/// Parse and validate a config file's contents. Error messages carry line
/// numbers where they can be located.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let config: RunConfig = toml::from_str(text).map_err(|e| anyhow!("{e}"))?;
    config.validate().map_err(|e| {
        let msg = e.to_string();
        // Attach a line number by looking up the offending table or key.
        let key = if msg.contains("switch matrix") {
            "switch"
        } else if msg.contains("class_a") {
            "class_a"
        } else if msg.contains("class_b") {
            "class_b"
        } else if msg.contains("filter") {
            "filters"
        } else if msg.contains("tracker") {
            "tracker"
        } else if msg.contains("seed") {
            "seed"
        } else if msg.contains("version") {
            "version"
        } else {
            ""
        };
        match line_of(text, key) {
            Some(line) if !key.is_empty() => anyhow!("line {line}: {msg}"),
            _ => anyhow!("{msg}"),
        }
    })?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
version = 1
scenario = "class_b"
seeds = [1]

[[filters]]
kind = "ekf"
"#;

    #[test]
    fn minimal_config_parses() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.scenario, Scenario::ClassB);
        assert_eq!(c.resolve_seeds(None).unwrap(), vec![1]);
        assert_eq!(c.filters[0].build().unwrap().1, "EKF");
    }

    #[test]
    fn bad_switch_row_names_row_and_line() {
        let text = format!(
            "{MINIMAL}\n[class_b]\nswitch = [[0.5, 0.4, 0.0], [0.4, 0.6, 0.0], [0.6, 0.4, 0.0]]\n"
        );
        let err = parse_config(&text).unwrap_err().to_string();
        assert!(err.contains("row 0"), "{err}");
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn unknown_field_is_line_numbered() {
        let text = format!("{MINIMAL}\nbogus_field = 3\n");
        let err = parse_config(&text).unwrap_err().to_string();
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn class_a_requires_path() {
        let text = MINIMAL.replace("class_b", "class_a");
        let err = parse_config(&text).unwrap_err().to_string();
        assert!(err.contains("adsb_path"), "{err}");
    }

    #[test]
    fn seed_resolution() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.resolve_seeds(Some(9)).unwrap(), vec![9]);
        let text = MINIMAL.replace("seeds = [1]", "seed_count = 3");
        let c = parse_config(&text).unwrap();
        assert_eq!(c.resolve_seeds(None).unwrap(), vec![1, 2, 3]);
    }
}
