//! Flat `key = value` run configuration.
//!
//! Every run is flat, so there is no nested syntax. Unknown keys are hard
//! errors (a typo in a physics parameter must not pass silently), and the
//! parser reports every problem it finds, not just the first.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    pub command: Option<String>,
    pub twice_s: Option<u32>,
    pub ell: Option<u32>,
    pub beta: Option<u32>,
    pub n: Option<u32>,
    pub seed: Option<u64>,
    pub sweeps: Option<u64>,
    pub burnin: Option<u64>,
    pub measure_every: Option<u64>,
    pub chains: Option<usize>,
    pub budget: Option<f64>,
    pub dense_budget: Option<usize>,
    pub beta_q: Option<f64>,
    pub s_grid: Option<(f64, f64, f64)>,
    pub out_dir: Option<String>,
    pub formats: Option<Vec<Format>>,
    pub start: Option<String>,
    pub pairs: Option<String>,
    pub events: Option<String>,
    pub full: Option<bool>,
}

#[derive(Debug)]
pub struct ConfigErrors(pub Vec<String>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

fn parse_positive_u32(key: &str, value: &str, errors: &mut Vec<String>) -> Option<u32> {
    match value.parse::<u32>() {
        Ok(v) if v >= 1 => Some(v),
        Ok(_) => {
            errors.push(format!("{key} must be a positive integer (got {value})"));
            None
        }
        Err(_) => {
            errors.push(format!("{key}: expected a positive integer, got '{value}'"));
            None
        }
    }
}

/// Parses the text form, collecting all errors.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigErrors> {
    let mut cfg = RunConfig::default();
    let mut errors = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            errors.push(format!("line {}: expected 'key = value'", lineno + 1));
            continue;
        };
        let key = key.trim();
        let value = value.trim();
        match key {
            "command" => match value {
                "simulate" | "enumerate" | "ed" | "contours" | "bounds" | "verify" => {
                    cfg.command = Some(value.to_string())
                }
                _ => errors.push(format!("unknown command '{value}'")),
            },
            "twice_S" => cfg.twice_s = parse_positive_u32(key, value, &mut errors),
            "ell" => cfg.ell = parse_positive_u32(key, value, &mut errors),
            "beta" => cfg.beta = parse_positive_u32(key, value, &mut errors),
            "n" => cfg.n = parse_positive_u32(key, value, &mut errors),
            "seed" => match value.parse() {
                Ok(v) => cfg.seed = Some(v),
                Err(_) => errors.push(format!("seed: expected an integer, got '{value}'")),
            },
            "sweeps" => match value.parse() {
                Ok(v) => cfg.sweeps = Some(v),
                Err(_) => errors.push(format!("sweeps: expected an integer, got '{value}'")),
            },
            "burnin" => match value.parse() {
                Ok(v) => cfg.burnin = Some(v),
                Err(_) => errors.push(format!("burnin: expected an integer, got '{value}'")),
            },
            "measure_every" => match value.parse::<u64>() {
                Ok(v) if v >= 1 => cfg.measure_every = Some(v),
                _ => errors.push(format!("measure_every must be a positive integer (got '{value}')")),
            },
            "chains" => match value.parse::<usize>() {
                Ok(v) if v >= 1 => cfg.chains = Some(v),
                _ => errors.push(format!("chains must be a positive integer (got '{value}')")),
            },
            "budget" => match value.parse::<f64>() {
                Ok(v) if v > 0.0 => cfg.budget = Some(v),
                _ => errors.push(format!("budget must be positive (got '{value}')")),
            },
            "dense_budget" => match value.parse::<usize>() {
                Ok(v) if v >= 2 => cfg.dense_budget = Some(v),
                _ => errors.push(format!("dense_budget must be an integer >= 2 (got '{value}')")),
            },
            "beta_q" => match value.parse::<f64>() {
                Ok(v) if v >= 0.0 => cfg.beta_q = Some(v),
                _ => errors.push(format!("beta_q must be nonnegative (got '{value}')")),
            },
            "S_grid" => match parse_s_grid(value) {
                Ok(g) => cfg.s_grid = Some(g),
                Err(e) => errors.push(e),
            },
            "out_dir" => cfg.out_dir = Some(value.to_string()),
            "formats" => match parse_formats(value) {
                Ok(f) => cfg.formats = Some(f),
                Err(e) => errors.push(e),
            },
            "start" => match value {
                "empty" | "dimer" => cfg.start = Some(value.to_string()),
                _ => errors.push(format!("start must be 'empty' or 'dimer' (got '{value}')")),
            },
            "pairs" => cfg.pairs = Some(value.to_string()),
            "events" => cfg.events = Some(value.to_string()),
            "full" => match value {
                "true" => cfg.full = Some(true),
                "false" => cfg.full = Some(false),
                _ => errors.push(format!("full must be true or false (got '{value}')")),
            },
            _ => errors.push(format!("unknown key '{key}'")),
        }
    }
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigErrors(errors))
    }
}

/// `lo:hi:step` over spin values.
pub fn parse_s_grid(value: &str) -> Result<(f64, f64, f64), String> {
    let parts: Vec<&str> = value.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("S_grid must be 'lo:hi:step' (got '{value}')"));
    }
    let nums: Result<Vec<f64>, _> = parts.iter().map(|p| p.trim().parse::<f64>()).collect();
    match nums {
        Ok(v) if v[0] > 0.0 && v[1] >= v[0] && v[2] > 0.0 => Ok((v[0], v[1], v[2])),
        Ok(_) => Err(format!("S_grid bounds must satisfy 0 < lo <= hi, step > 0 (got '{value}')")),
        Err(_) => Err(format!("S_grid: could not parse '{value}'")),
    }
}

pub fn parse_formats(value: &str) -> Result<Vec<Format>, String> {
    let mut out = Vec::new();
    for item in value.split(',') {
        match item.trim() {
            "csv" => out.push(Format::Csv),
            "json" => out.push(Format::Json),
            other => return Err(format!("unknown format '{other}' (use csv, json)")),
        }
    }
    Ok(out)
}

/// Renders the effective configuration back into the `key = value` form
/// that is embedded in every output file.
pub fn render_config(pairs: &[(&str, String)]) -> String {
    let mut out = String::new();
    for (k, v) in pairs {
        out.push_str(&format!("{k} = {v}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_bounds_sweep() {
        let cfg = parse_config("command = bounds\nS_grid = 8:100:0.5\n").unwrap();
        assert_eq!(cfg.command.as_deref(), Some("bounds"));
        assert_eq!(cfg.s_grid, Some((8.0, 100.0, 0.5)));
    }

    #[test]
    fn parses_simulation_config() {
        let text = "twice_S = 80\nell = 16\nbeta = 8\nn = 64\nseed = 1\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.twice_s, Some(80));
        assert_eq!(cfg.ell, Some(16));
        assert_eq!(cfg.beta, Some(8));
        assert_eq!(cfg.n, Some(64));
        assert_eq!(cfg.seed, Some(1));
    }

    #[test]
    fn rejects_zero_beta() {
        let err = parse_config("beta = 0\n").unwrap_err();
        assert!(err.0[0].contains("beta must be a positive integer"));
    }

    #[test]
    fn reports_all_errors_not_just_first() {
        let err = parse_config("beta = 0\nfrobnicate = 3\nn = x\n").unwrap_err();
        assert_eq!(err.0.len(), 3);
        assert!(err.0.iter().any(|e| e.contains("unknown key 'frobnicate'")));
        assert!(err.0.iter().any(|e| e.contains("n: expected a positive integer")));
    }

    #[test]
    fn comments_and_blanks_are_ignored() {
        let cfg = parse_config("# a comment\n\nell = 2\n").unwrap();
        assert_eq!(cfg.ell, Some(2));
    }
}
