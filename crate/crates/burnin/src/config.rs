//! Batch-run configuration.
//!
//! Runs are described by a TOML file with a `[data]` source (a raw CSV
//! path or inline summaries), a `[hyper]` table, top-level run switches,
//! and exactly one of `[fixed]` (explicit bound parameters) or `[grid]`
//! (per-parameter search ranges). Every field that falls back to a
//! default is recorded so reports can echo it.

use crate::bounds::Theorem;
use crate::grid::GridSpec;
use crate::model::{Dataset, Hyperparameters, ModelError, DEFAULT_RHO1_SLACK};
use crate::samplers::Kernel;
use serde::Deserialize;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config field `{field}`: {message}")]
    Validation { field: &'static str, message: String },
    #[error("data error: {0}")]
    Data(#[from] ModelError),
    #[error("{path}:{line}: {message}")]
    Csv { path: PathBuf, line: usize, message: String },
}

fn invalid(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Validation { field, message: message.into() }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    target_tv: Option<f64>,
    sampler: Option<String>,
    theorem: Option<String>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    data: RawData,
    hyper: RawHyper,
    fixed: Option<RawFixed>,
    grid: Option<RawGrid>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawData {
    csv: Option<PathBuf>,
    m: Option<Vec<u64>>,
    ybar: Option<Vec<f64>>,
    sse: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawM0 {
    Number(f64),
    Symbol(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHyper {
    a1: f64,
    b1: f64,
    a2: f64,
    b2: f64,
    m0: RawM0,
    s0: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFixed {
    gamma: f64,
    phi: Option<f64>,
    phi1: Option<f64>,
    phi2: Option<f64>,
    c3: Option<f64>,
    d: f64,
    r: Option<f64>,
    a: Option<f64>,
    beta: Option<f64>,
    rho1_slack: Option<f64>,
}

#[derive(Debug, Deserialize, Clone, Copy)]
#[serde(deny_unknown_fields)]
struct RawRange {
    lo: f64,
    hi: f64,
    points: usize,
    /// "linear" (default) or "log".
    scale: Option<LogScale>,
}

#[derive(Debug, Deserialize, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum LogScale {
    Linear,
    Log,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    gamma: RawRange,
    phi: Option<RawRange>,
    phi1: Option<RawRange>,
    phi2: Option<RawRange>,
    c3: Option<RawRange>,
    d: RawRange,
    r: Option<RawRange>,
    a: Option<RawRange>,
    rho1_slack: Option<f64>,
}

impl RawRange {
    fn expand(&self, field: &'static str) -> Result<Vec<f64>, ConfigError> {
        if self.points == 0 {
            return Err(invalid(field, "points must be at least 1"));
        }
        if self.points == 1 {
            return Ok(vec![self.lo]);
        }
        if !(self.lo < self.hi) {
            return Err(invalid(field, format!("lo {} must be below hi {}", self.lo, self.hi)));
        }
        let n = self.points;
        let vals = match self.scale.unwrap_or(LogScale::Linear) {
            LogScale::Linear => (0..n)
                .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (n - 1) as f64)
                .collect(),
            LogScale::Log => {
                if !(self.lo > 0.0) {
                    return Err(invalid(field, "log scale requires positive lo"));
                }
                let (ll, lh) = (self.lo.ln(), self.hi.ln());
                (0..n).map(|i| (ll + (lh - ll) * i as f64 / (n - 1) as f64).exp()).collect()
            }
        };
        Ok(vals)
    }
}

/// Where the observations come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Csv(PathBuf),
    Summaries { m: Vec<u64>, ybar: Vec<f64>, sse: f64 },
}

/// Prior mean of `mu`: a number, or the dataset grand mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum M0Spec {
    Value(f64),
    GrandMean,
}

/// Hyperparameters before the data-dependent `m0` is resolved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperSpec {
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
    pub m0: M0Spec,
    pub s0: f64,
}

impl HyperSpec {
    pub fn resolve(&self, dataset: &Dataset) -> Result<Hyperparameters, ModelError> {
        let m0 = match self.m0 {
            M0Spec::Value(v) => v,
            M0Spec::GrandMean => dataset.grand_mean(),
        };
        Hyperparameters::new(self.a1, self.b1, self.a2, self.b2, m0, self.s0)
    }
}

/// Explicit bound parameters for a single evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedParams {
    pub gamma: f64,
    /// `phi` (block) or `c3` (single-site).
    pub phi: f64,
    pub phi2: Option<f64>,
    pub d: f64,
    pub r: Option<f64>,
    pub a: Option<f64>,
    pub beta: Option<f64>,
    pub rho1_slack: f64,
}

#[derive(Debug, Clone)]
pub enum RunMode {
    Fixed(FixedParams),
    Grid(GridSpec),
}

/// A fully validated run description.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub data: DataSource,
    pub hyper: HyperSpec,
    pub sampler: Kernel,
    pub theorem: Theorem,
    pub target_tv: f64,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub mode: RunMode,
    /// Names of fields that fell back to defaults, for report echoing.
    pub defaults_applied: Vec<String>,
}

/// Loads and fully validates a TOML run configuration.
pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    let raw: RawConfig = toml::from_str(&text)
        .map_err(|e| ConfigError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
    let mut defaults = Vec::new();

    let data = match (&raw.data.csv, &raw.data.m, &raw.data.ybar, &raw.data.sse) {
        (Some(csv), None, None, None) => DataSource::Csv(csv.clone()),
        (None, Some(m), Some(ybar), Some(sse)) => {
            DataSource::Summaries { m: m.clone(), ybar: ybar.clone(), sse: *sse }
        }
        _ => {
            return Err(invalid(
                "data",
                "provide either `csv` or the inline summaries `m`, `ybar`, `sse`",
            ))
        }
    };

    let m0 = match raw.hyper.m0 {
        RawM0::Number(v) => M0Spec::Value(v),
        RawM0::Symbol(ref s) if s == "ybar" => M0Spec::GrandMean,
        RawM0::Symbol(ref s) => {
            return Err(invalid("hyper.m0", format!("expected a number or \"ybar\", got {s:?}")))
        }
    };
    let hyper = HyperSpec {
        a1: raw.hyper.a1,
        b1: raw.hyper.b1,
        a2: raw.hyper.a2,
        b2: raw.hyper.b2,
        m0,
        s0: raw.hyper.s0,
    };
    for (field, v) in [
        ("hyper.a1", hyper.a1),
        ("hyper.b1", hyper.b1),
        ("hyper.a2", hyper.a2),
        ("hyper.b2", hyper.b2),
        ("hyper.s0", hyper.s0),
    ] {
        if !(v > 0.0) {
            return Err(ConfigError::Validation {
                field: "hyper",
                message: format!("{field} must be positive, got {v}"),
            });
        }
    }

    let sampler = match raw.sampler.as_deref() {
        None => {
            defaults.push("sampler=block".to_string());
            Kernel::Block
        }
        Some("block") => Kernel::Block,
        Some("gibbs") => Kernel::Gibbs,
        Some(other) => {
            return Err(invalid("sampler", format!("expected \"block\" or \"gibbs\", got {other:?}")))
        }
    };
    let theorem = match raw.theorem.as_deref() {
        None => {
            defaults.push("theorem=rosenthal".to_string());
            Theorem::Rosenthal
        }
        Some("rosenthal") => Theorem::Rosenthal,
        Some("roberts-tweedie") => Theorem::RobertsTweedie,
        Some(other) => {
            return Err(invalid(
                "theorem",
                format!("expected \"rosenthal\" or \"roberts-tweedie\", got {other:?}"),
            ))
        }
    };
    let target_tv = raw
        .target_tv
        .ok_or_else(|| invalid("target_tv", "required (total-variation level in (0, 1))"))?;
    if !(target_tv > 0.0 && target_tv < 1.0) {
        return Err(invalid("target_tv", format!("must lie in (0, 1), got {target_tv}")));
    }
    let seed = match raw.seed {
        Some(s) => s,
        None => {
            defaults.push("seed=0".to_string());
            0
        }
    };

    let mode = match (raw.fixed, raw.grid) {
        (Some(_), Some(_)) => {
            return Err(invalid("fixed/grid", "exactly one of [fixed] or [grid] must be present"))
        }
        (None, None) => {
            return Err(invalid("fixed/grid", "one of [fixed] or [grid] is required"))
        }
        (Some(fixed), None) => {
            let phi = match (sampler, fixed.phi, fixed.phi1, fixed.c3) {
                (Kernel::Block, Some(phi), None, None) => phi,
                (Kernel::Block, None, Some(phi1), None) => phi1,
                (Kernel::Block, _, _, _) if fixed.c3.is_some() => {
                    return Err(invalid("fixed.c3", "c3 applies to the gibbs sampler only"))
                }
                (Kernel::Block, _, _, _) => {
                    return Err(invalid("fixed.phi", "the block sampler needs phi (or phi1/phi2)"))
                }
                (Kernel::Gibbs, None, None, Some(c3)) => c3,
                (Kernel::Gibbs, _, _, _) => {
                    return Err(invalid("fixed.c3", "the gibbs sampler needs c3 (and not phi)"))
                }
            };
            if sampler == Kernel::Gibbs && fixed.phi2.is_some() {
                return Err(invalid("fixed.phi2", "phi2 applies to the block sampler only"));
            }
            let r = match (theorem, fixed.r) {
                (Theorem::Rosenthal, Some(r)) => Some(r),
                (Theorem::Rosenthal, None) => {
                    return Err(invalid("fixed.r", "the rosenthal theorem needs r in (0, 1)"))
                }
                (Theorem::RobertsTweedie, Some(_)) => {
                    return Err(invalid("fixed.r", "r applies to the rosenthal theorem only"))
                }
                (Theorem::RobertsTweedie, None) => None,
            };
            let a = match (theorem, fixed.a) {
                (Theorem::RobertsTweedie, Some(a)) => Some(a),
                (Theorem::RobertsTweedie, None) => {
                    defaults.push("a=1".to_string());
                    Some(1.0)
                }
                (Theorem::Rosenthal, Some(_)) => {
                    return Err(invalid("fixed.a", "a applies to the roberts-tweedie route only"))
                }
                (Theorem::Rosenthal, None) => None,
            };
            let rho1_slack = match fixed.rho1_slack {
                Some(s) => s,
                None => {
                    if sampler == Kernel::Gibbs {
                        defaults.push(format!("rho1_slack={DEFAULT_RHO1_SLACK:e}"));
                    }
                    DEFAULT_RHO1_SLACK
                }
            };
            RunMode::Fixed(FixedParams {
                gamma: fixed.gamma,
                phi,
                phi2: fixed.phi2,
                d: fixed.d,
                r,
                a,
                beta: fixed.beta,
                rho1_slack,
            })
        }
        (None, Some(grid)) => {
            let phis = match (sampler, &grid.phi, &grid.phi1, &grid.c3) {
                (Kernel::Block, Some(r), None, None) => r.expand("grid.phi")?,
                (Kernel::Block, None, Some(r), None) => r.expand("grid.phi1")?,
                (Kernel::Gibbs, None, None, Some(r)) => r.expand("grid.c3")?,
                (Kernel::Block, _, _, _) => {
                    return Err(invalid("grid.phi", "the block sampler needs a phi (or phi1) range"))
                }
                (Kernel::Gibbs, _, _, _) => {
                    return Err(invalid("grid.c3", "the gibbs sampler needs a c3 range (and not phi)"))
                }
            };
            let phi2s = match (&grid.phi2, sampler) {
                (Some(r), Kernel::Block) => Some(r.expand("grid.phi2")?),
                (Some(_), Kernel::Gibbs) => {
                    return Err(invalid("grid.phi2", "phi2 applies to the block sampler only"))
                }
                (None, _) => None,
            };
            let rs = match (theorem, &grid.r) {
                (Theorem::Rosenthal, Some(r)) => r.expand("grid.r")?,
                (Theorem::Rosenthal, None) => {
                    return Err(invalid("grid.r", "the rosenthal theorem needs an r range"))
                }
                (Theorem::RobertsTweedie, Some(_)) => {
                    return Err(invalid("grid.r", "r applies to the rosenthal theorem only"))
                }
                (Theorem::RobertsTweedie, None) => Vec::new(),
            };
            let a_values = match (theorem, &grid.a) {
                (Theorem::RobertsTweedie, Some(r)) => r.expand("grid.a")?,
                (Theorem::RobertsTweedie, None) => {
                    defaults.push("a=1".to_string());
                    vec![1.0]
                }
                (Theorem::Rosenthal, Some(_)) => {
                    return Err(invalid("grid.a", "a applies to the roberts-tweedie route only"))
                }
                (Theorem::Rosenthal, None) => Vec::new(),
            };
            let rho1_slack = match grid.rho1_slack {
                Some(s) => s,
                None => {
                    if sampler == Kernel::Gibbs {
                        defaults.push(format!("rho1_slack={DEFAULT_RHO1_SLACK:e}"));
                    }
                    DEFAULT_RHO1_SLACK
                }
            };
            RunMode::Grid(
                GridSpec {
                    gammas: grid.gamma.expand("grid.gamma")?,
                    phis,
                    phi2s,
                    ds: grid.d.expand("grid.d")?,
                    rs,
                    a_values,
                    target_tv,
                    rho1_slack,
                }
                .normalized(),
            )
        }
    };

    Ok(RunConfig {
        data,
        hyper,
        sampler,
        theorem,
        target_tv,
        seed,
        out: raw.out,
        mode,
        defaults_applied: defaults,
    })
}

/// Parses a raw-observation CSV with header `group,value`, group labels
/// `1..K`, one observation per row.
pub fn load_csv_data(path: &Path) -> Result<Dataset, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "group,value" => {}
        Some((_, header)) => {
            return Err(ConfigError::Csv {
                path: path.to_path_buf(),
                line: 1,
                message: format!("expected header `group,value`, got {header:?}"),
            })
        }
        None => {
            return Err(ConfigError::Csv {
                path: path.to_path_buf(),
                line: 1,
                message: "empty file".to_string(),
            })
        }
    }
    let mut groups: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.splitn(2, ',');
        let g: usize = parts
            .next()
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|_| ConfigError::Csv {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("bad group label in {line:?}"),
            })?;
        let v: f64 = parts
            .next()
            .ok_or_else(|| ConfigError::Csv {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("missing value in {line:?}"),
            })?
            .trim()
            .parse()
            .map_err(|_| ConfigError::Csv {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("bad value in {line:?}"),
            })?;
        if g == 0 {
            return Err(ConfigError::Csv {
                path: path.to_path_buf(),
                line: line_no,
                message: "group labels start at 1".to_string(),
            });
        }
        if g > groups.len() {
            groups.resize(g, Vec::new());
        }
        groups[g - 1].push(v);
    }
    Ok(Dataset::from_groups(&groups)?)
}

/// Materializes the configured data source.
pub fn load_dataset(source: &DataSource) -> Result<Dataset, ConfigError> {
    match source {
        DataSource::Csv(path) => load_csv_data(path),
        DataSource::Summaries { m, ybar, sse } => {
            Ok(Dataset::from_summaries(m.clone(), ybar.clone(), *sse)?)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(name: &str, contents: &str) -> PathBuf {
        let dir = std::env::temp_dir().join("burnin-config-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join(name);
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        path
    }

    const MINIMAL: &str = r#"
target_tv = 0.01

[data]
m = [10, 10, 10, 10, 10]
ybar = [-0.80247, -1.0014, -0.69090, -1.1413, -1.0125]
sse = 32.990

[hyper]
a1 = 2.5
b1 = 1.0
a2 = 1.0
b2 = 1.0
m0 = "ybar"
s0 = 1.0

[fixed]
gamma = 0.2596
phi = 0.5385
d = 3.0079
r = 0.0789
"#;

    #[test]
    fn minimal_config_applies_defaults() {
        let path = write_tmp("minimal.toml", MINIMAL);
        let cfg = load_config(&path).unwrap();
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.sampler, Kernel::Block);
        assert_eq!(cfg.theorem, Theorem::Rosenthal);
        assert!(cfg.defaults_applied.iter().any(|d| d == "seed=0"));
        assert!(matches!(cfg.hyper.m0, M0Spec::GrandMean));
        let dataset = load_dataset(&cfg.data).unwrap();
        let hyper = cfg.hyper.resolve(&dataset).unwrap();
        assert!((hyper.m0 - dataset.grand_mean()).abs() < 1e-15);
        match cfg.mode {
            RunMode::Fixed(p) => {
                assert_eq!(p.phi, 0.5385);
                assert_eq!(p.r, Some(0.0789));
                assert_eq!(p.rho1_slack, DEFAULT_RHO1_SLACK);
            }
            _ => panic!("expected fixed mode"),
        }
    }

    #[test]
    fn fixed_and_grid_are_exclusive() {
        let both = format!(
            "{MINIMAL}\n[grid]\ngamma = {{ lo = 0.2, hi = 0.3, points = 2 }}\nphi = {{ lo = 0.3, hi = 0.6, points = 2 }}\nd = {{ lo = 3.0, hi = 4.0, points = 2 }}\nr = {{ lo = 0.05, hi = 0.09, points = 2 }}\n"
        );
        let path = write_tmp("both.toml", &both);
        let err = load_config(&path).unwrap_err();
        assert!(err.to_string().contains("exactly one"));
    }

    #[test]
    fn parse_errors_carry_line_information() {
        let path = write_tmp("broken.toml", "target_tv = 0.01\nsampler = [broken\n");
        match load_config(&path) {
            Err(ConfigError::Parse { message, .. }) => {
                assert!(message.contains("line 2") || message.contains('2'), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn gibbs_config_requires_c3() {
        let cfg = MINIMAL.replace("phi = 0.5385", "c3 = 2.6667");
        let path = write_tmp("gibbs_bad.toml", &cfg);
        // Default sampler is block, so c3 must be rejected.
        let err = load_config(&path).unwrap_err();
        assert!(err.to_string().contains("c3"));

        let cfg2 = format!("sampler = \"gibbs\"\n{cfg}");
        let path2 = write_tmp("gibbs_ok.toml", &cfg2);
        let loaded = load_config(&path2).unwrap();
        match loaded.mode {
            RunMode::Fixed(p) => assert_eq!(p.phi, 2.6667),
            _ => panic!("expected fixed mode"),
        }
    }

    #[test]
    fn grid_mode_expands_ranges() {
        let cfg = r#"
target_tv = 0.01

[data]
m = [10, 10, 10, 10, 10]
ybar = [-0.80247, -1.0014, -0.69090, -1.1413, -1.0125]
sse = 32.990

[hyper]
a1 = 2.5
b1 = 1.0
a2 = 1.0
b2 = 1.0
m0 = "ybar"
s0 = 1.0

[grid]
gamma = { lo = 0.2, hi = 0.4, points = 3 }
phi = { lo = 0.3, hi = 0.6, points = 2 }
d = { lo = 2.5, hi = 10.0, points = 3, scale = "log" }
r = { lo = 0.02, hi = 0.12, points = 4 }
"#;
        let path = write_tmp("grid.toml", cfg);
        let loaded = load_config(&path).unwrap();
        match loaded.mode {
            RunMode::Grid(g) => {
                assert_eq!(g.gammas.len(), 3);
                assert_eq!(g.phis.len(), 2);
                assert_eq!(g.ds.len(), 3);
                assert!((g.ds[1] - 5.0).abs() < 1e-12);
                assert_eq!(g.rs.len(), 4);
            }
            _ => panic!("expected grid mode"),
        }
    }

    #[test]
    fn csv_ingestion_and_validation_gate() {
        let csv = write_tmp("data.csv", "group,value\n1,1.0\n1,3.0\n2,2.0\n2,4.0\n3,0.0\n3,2.0\n");
        let d = load_csv_data(&csv).unwrap();
        assert_eq!(d.k(), 3);
        assert_eq!(d.sse(), 6.0);

        let bad = write_tmp("bad.csv", "group,value\n1,1.0\n2,2.0\n2,3.0\n");
        let err = load_csv_data(&bad).unwrap_err();
        assert!(err.to_string().contains("m' >= 2 violated"), "{err}");

        let garbled = write_tmp("garbled.csv", "group,value\n1,1.0\nx,2.0\n");
        let err = load_csv_data(&garbled).unwrap_err();
        assert!(err.to_string().contains(":3:"), "{err}");
    }
}
