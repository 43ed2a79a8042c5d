//! Run configuration and its flat `key = value` file form.

use std::fmt::Write as _;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("config line {line}: {reason}")]
    Syntax { line: usize, reason: String },

    #[error("invalid parameter `{name}`: {reason}")]
    Invalid { name: &'static str, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Jsonl,
}

impl Format {
    pub fn as_str(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Jsonl => "jsonl",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(Format::Csv),
            "jsonl" => Some(Format::Jsonl),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Coupling constant. When unset, commands that read an ensemble use
    /// the ensemble's own value.
    pub alpha: Option<f64>,
    pub base_seed: u64,
    pub shards: u64,
    pub samples_per_shard: u64,
    pub p_grid: Vec<f64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_points: usize,
    pub h: f64,
    pub t_max: f64,
    /// Root-finding tolerance.
    pub tol: f64,
    pub t_values: Vec<f64>,
    pub fk_paths: usize,
    pub fk_steps: usize,
    pub ensemble: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub format: Format,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            alpha: None,
            base_seed: 42,
            shards: 8,
            samples_per_shard: 125_000,
            p_grid: (0..=15).map(|k| k as f64 * 0.1).collect(),
            lambda_min: -3.0,
            lambda_max: -1.0,
            lambda_points: 5,
            h: 0.001,
            t_max: 10.0,
            tol: 1e-6,
            t_values: vec![1.0, 2.0],
            fk_paths: 10_000,
            fk_steps: 800,
            ensemble: None,
            out_dir: None,
            format: Format::Csv,
        }
    }
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn invalid(name: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        name,
        reason: reason.into(),
    }
}

pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse::<f64>().map_err(|_| format!("`{x}` is not a number")))
        .collect()
}

impl RunConfig {
    /// `λ` values spaced evenly over `[lambda_min, lambda_max]`.
    pub fn lambda_grid(&self) -> Vec<f64> {
        if self.lambda_points == 1 {
            return vec![self.lambda_min];
        }
        let step = (self.lambda_max - self.lambda_min) / (self.lambda_points - 1) as f64;
        (0..self.lambda_points)
            .map(|k| if k + 1 == self.lambda_points { self.lambda_max } else { self.lambda_min + step * k as f64 })
            .collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a.is_finite()) {
                return Err(invalid("alpha", format!("must be positive and finite, got {a}")));
            }
        }
        if self.shards == 0 {
            return Err(invalid("shards", "must be positive"));
        }
        if self.samples_per_shard == 0 {
            return Err(invalid("samples_per_shard", "must be positive"));
        }
        if self.p_grid.is_empty() {
            return Err(invalid("P_grid", "must be nonempty"));
        }
        if self.p_grid.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(invalid("P_grid", "entries must be finite and nonnegative"));
        }
        if self.p_grid.windows(2).any(|w| w[1] < w[0]) {
            return Err(invalid("P_grid", "must be sorted ascending"));
        }
        if !(self.lambda_min.is_finite() && self.lambda_max.is_finite() && self.lambda_min <= self.lambda_max) {
            return Err(invalid("lambda_min", "need finite lambda_min <= lambda_max"));
        }
        if self.lambda_points == 0 {
            return Err(invalid("lambda_points", "must be positive"));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(invalid("h", "must be positive"));
        }
        if !(self.t_max >= self.h && self.t_max.is_finite()) {
            return Err(invalid("T_max", "must be finite and at least h"));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(invalid("tol", "must lie in (0, 1)"));
        }
        if self.t_values.is_empty() || self.t_values.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(invalid("T_values", "must be a nonempty list of positive times"));
        }
        if self.fk_paths < 2 {
            return Err(invalid("fk_paths", "must be at least 2"));
        }
        if self.fk_steps == 0 {
            return Err(invalid("fk_steps", "must be positive"));
        }
        Ok(())
    }

    pub fn to_file_string(&self) -> String {
        let mut s = String::new();
        if let Some(a) = self.alpha {
            let _ = writeln!(s, "alpha = {a}");
        }
        let _ = writeln!(s, "base_seed = {}", self.base_seed);
        let _ = writeln!(s, "shards = {}", self.shards);
        let _ = writeln!(s, "samples_per_shard = {}", self.samples_per_shard);
        let _ = writeln!(s, "P_grid = {}", join(&self.p_grid));
        let _ = writeln!(s, "lambda_min = {}", self.lambda_min);
        let _ = writeln!(s, "lambda_max = {}", self.lambda_max);
        let _ = writeln!(s, "lambda_points = {}", self.lambda_points);
        let _ = writeln!(s, "h = {}", self.h);
        let _ = writeln!(s, "T_max = {}", self.t_max);
        let _ = writeln!(s, "tol = {}", self.tol);
        let _ = writeln!(s, "T_values = {}", join(&self.t_values));
        let _ = writeln!(s, "fk_paths = {}", self.fk_paths);
        let _ = writeln!(s, "fk_steps = {}", self.fk_steps);
        if let Some(p) = &self.ensemble {
            let _ = writeln!(s, "ensemble = {}", p.display());
        }
        if let Some(p) = &self.out_dir {
            let _ = writeln!(s, "out_dir = {}", p.display());
        }
        let _ = writeln!(s, "format = {}", self.format.as_str());
        s
    }

    /// Overlays the keys present in `text` onto `self`. Blank lines and
    /// lines starting with `#` are ignored.
    pub fn apply_file(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let syntax = |reason: String| ConfigError::Syntax { line, reason };
            let (key, value) = trimmed
                .split_once('=')
                .ok_or_else(|| syntax(format!("expected `key = value`, found `{trimmed}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let num = |v: &str| v.parse::<f64>().map_err(|_| syntax(format!("`{key}`: `{v}` is not a number")));
            let int = |v: &str| v.parse::<u64>().map_err(|_| syntax(format!("`{key}`: `{v}` is not an integer")));
            match key {
                "alpha" => self.alpha = Some(num(value)?),
                "base_seed" => self.base_seed = int(value)?,
                "shards" => self.shards = int(value)?,
                "samples_per_shard" => self.samples_per_shard = int(value)?,
                "P_grid" => self.p_grid = parse_list(value).map_err(|e| syntax(format!("`{key}`: {e}")))?,
                "lambda_min" => self.lambda_min = num(value)?,
                "lambda_max" => self.lambda_max = num(value)?,
                "lambda_points" => self.lambda_points = int(value)? as usize,
                "h" => self.h = num(value)?,
                "T_max" => self.t_max = num(value)?,
                "tol" => self.tol = num(value)?,
                "T_values" => self.t_values = parse_list(value).map_err(|e| syntax(format!("`{key}`: {e}")))?,
                "fk_paths" => self.fk_paths = int(value)? as usize,
                "fk_steps" => self.fk_steps = int(value)? as usize,
                "ensemble" => self.ensemble = Some(PathBuf::from(value)),
                "out_dir" => self.out_dir = Some(PathBuf::from(value)),
                "format" => {
                    self.format = Format::parse(value).ok_or_else(|| syntax(format!("format must be csv or jsonl, got `{value}`")))?
                }
                other => return Err(syntax(format!("unknown key `{other}`"))),
            }
        }
        Ok(())
    }

    #[cfg(test)]
    pub fn from_file_string(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        cfg.apply_file(text)?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn zero_alpha_names_the_parameter() {
        let cfg = RunConfig {
            alpha: Some(0.0),
            ..RunConfig::default()
        };
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("`alpha`"), "{err}");
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let err = RunConfig::from_file_string("alpha = 1\n\nshards = many\n").unwrap_err();
        assert_eq!(
            err,
            ConfigError::Syntax {
                line: 3,
                reason: "`shards`: `many` is not an integer".into()
            }
        );
        assert!(matches!(
            RunConfig::from_file_string("bogus = 1").unwrap_err(),
            ConfigError::Syntax { line: 1, .. }
        ));
    }

    #[test]
    fn lambda_grid_hits_both_ends() {
        let cfg = RunConfig {
            lambda_min: -2.0,
            lambda_max: -1.0,
            lambda_points: 3,
            ..RunConfig::default()
        };
        assert_eq!(cfg.lambda_grid(), vec![-2.0, -1.5, -1.0]);
    }

    fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![-1e6..1e6f64, any::<f64>().prop_filter("finite", |x| x.is_finite())]
    }

    prop_compose! {
        fn configs()(
            alpha in proptest::option::of(finite()),
            base_seed in any::<u64>(),
            shards in any::<u64>(),
            samples_per_shard in any::<u64>(),
            p_grid in proptest::collection::vec(finite(), 0..6),
            lambda in (finite(), finite()),
            lambda_points in 0usize..1000,
            h in finite(),
            t_max in finite(),
            tol in finite(),
            t_values in proptest::collection::vec(finite(), 0..4),
            fk in (0usize..1_000_000, 0usize..10_000),
            ensemble in proptest::option::of("[a-zA-Z0-9_./-]{1,20}"),
            out_dir in proptest::option::of("[a-zA-Z0-9_./-]{1,20}"),
            jsonl in any::<bool>(),
        ) -> RunConfig {
            RunConfig {
                alpha,
                base_seed,
                shards,
                samples_per_shard,
                p_grid,
                lambda_min: lambda.0,
                lambda_max: lambda.1,
                lambda_points,
                h,
                t_max,
                tol,
                t_values,
                fk_paths: fk.0,
                fk_steps: fk.1,
                ensemble: ensemble.map(PathBuf::from),
                out_dir: out_dir.map(PathBuf::from),
                format: if jsonl { Format::Jsonl } else { Format::Csv },
            }
        }
    }

    proptest! {
        #[test]
        fn file_form_round_trips(cfg in configs()) {
            let back = RunConfig::from_file_string(&cfg.to_file_string()).unwrap();
            prop_assert_eq!(back, cfg);
        }
    }
}
