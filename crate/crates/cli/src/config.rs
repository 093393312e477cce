//! Run configuration: command-line flags layered over an optional TOML file
//! named by `WARING_CONFIG`, layered over built-in defaults.

use std::path::Path;

use clap::{Args, ValueEnum};
use num_rational::BigRational;
use serde::Deserialize;

use waring_core::codec::parse_ratio;
use waring_core::descent::engine::RetryPolicy;
use waring_core::descent::exponents::{check_feasibility, default_c, ExponentTuple, Mode};
use waring_core::descent::pipeline::{scaled_policy, PipelineConfig};
use waring_core::ntheory::FactorBudget;
use waring_core::residue::BoundPolicy;
use waring_core::ternary::TernaryBudget;

pub const CONFIG_ENV: &str = "WARING_CONFIG";

/// Smallest exponent accepted after the fixed `2, 2, 3, 3` prefix.
pub const MIN_TAIL_EXPONENT: u32 = 3;

pub const DEFAULT_SCAN_CAP: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Desk,
    Paper,
}

/// Keys accepted in the TOML file. All optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub exponents: Option<String>,
    pub mode: Option<String>,
    pub policy: Option<PolicyKind>,
    pub omega: Option<String>,
    pub nu: Option<String>,
    pub epsilon: Option<String>,
    pub c: Option<String>,
    pub budget_z: Option<u64>,
    pub budget_rho: Option<u64>,
    pub retries: Option<usize>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    pub format: Option<Format>,
    pub scan_cap: Option<u64>,
}

impl FileConfig {
    pub fn from_path(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// The file named by `WARING_CONFIG`, or empty defaults when unset.
    pub fn from_env() -> Result<Self, String> {
        match std::env::var_os(CONFIG_ENV) {
            Some(p) if !p.is_empty() => FileConfig::from_path(Path::new(&p)),
            _ => Ok(FileConfig::default()),
        }
    }
}

/// Flags shared by the commands that run the pipeline.
#[derive(Debug, Clone, Default, Args)]
pub struct RunFlags {
    /// Tail exponents, comma separated (e.g. 6,6)
    #[arg(long, short = 'k')]
    pub exponents: Option<String>,
    /// grh, unconditional, ramanujan or ramanujan+grh
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long, value_enum)]
    pub policy: Option<PolicyKind>,
    #[arg(long)]
    pub omega: Option<String>,
    #[arg(long)]
    pub nu: Option<String>,
    #[arg(long)]
    pub epsilon: Option<String>,
    #[arg(long)]
    pub c: Option<String>,
    /// Values of z tried by the ternary solver
    #[arg(long)]
    pub budget_z: Option<u64>,
    /// Pollard rho iterations per factorization
    #[arg(long)]
    pub budget_rho: Option<u64>,
    /// Alternatives tried per descent stage
    #[arg(long)]
    pub retries: Option<usize>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub exponents: ExponentTuple,
    pub pipeline: PipelineConfig,
    pub workers: usize,
    pub format: Format,
}

pub fn parse_exponents(s: &str) -> Result<ExponentTuple, String> {
    let mut ks = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let k: u32 = part.parse().map_err(|_| format!("bad exponent {part:?}"))?;
        if k < MIN_TAIL_EXPONENT {
            return Err(format!(
                "exponent {k} is below the tail minimum {MIN_TAIL_EXPONENT} (the form already has 2,2,3,3)"
            ));
        }
        if k > 64 {
            return Err(format!("exponent {k} is too large"));
        }
        ks.push(k);
    }
    if ks.is_empty() {
        return Err("no exponents given".into());
    }
    ExponentTuple::new(&ks).map_err(|e| e.to_string())
}

fn ratio(name: &str, s: &str) -> Result<BigRational, String> {
    parse_ratio(s).map_err(|e| format!("--{name}: {e}"))
}

fn default_mode(k: &ExponentTuple) -> Mode {
    let report = check_feasibility(k);
    [Mode::Grh, Mode::Unconditional, Mode::RamanujanGrh, Mode::Ramanujan]
        .into_iter()
        .find(|m| report.verdict(*m).feasible)
        .unwrap_or(Mode::Grh)
}

impl RunConfig {
    pub fn resolve(flags: &RunFlags, file: &FileConfig) -> Result<RunConfig, String> {
        let ks = flags
            .exponents
            .as_deref()
            .or(file.exponents.as_deref())
            .ok_or("--exponents is required")?;
        let exponents = parse_exponents(ks)?;
        let mode = match flags.mode.as_deref().or(file.mode.as_deref()) {
            Some(m) => m.parse::<Mode>()?,
            None => default_mode(&exponents),
        };
        let grh = mode.assumes_grh();
        let mut policy = match flags.policy.or(file.policy).unwrap_or(PolicyKind::Desk) {
            PolicyKind::Desk => BoundPolicy::desk(grh),
            PolicyKind::Paper => BoundPolicy::paper_faithful(grh),
        };
        if let Some(e) = flags.epsilon.as_deref().or(file.epsilon.as_deref()) {
            policy.epsilon = ratio("epsilon", e)?;
        }
        policy.c = match flags.c.as_deref().or(file.c.as_deref()) {
            Some(c) => ratio("c", c)?,
            None => default_c(grh, &policy.epsilon),
        };
        if let Some(nu) = flags.nu.as_deref().or(file.nu.as_deref()) {
            policy.nu = ratio("nu", nu)?;
        }
        match flags.omega.as_deref().or(file.omega.as_deref()) {
            Some(w) => policy.omega = ratio("omega", w)?,
            None => {
                if let Some(p) = scaled_policy(&exponents, mode, &policy) {
                    policy = p;
                }
            }
        }
        policy.validate()?;

        let mut ternary = TernaryBudget::default();
        if let Some(z) = flags.budget_z.or(file.budget_z) {
            ternary.max_z = z;
        }
        if let Some(rho) = flags.budget_rho.or(file.budget_rho) {
            if rho == 0 {
                return Err("--budget-rho must be positive".into());
            }
            ternary.factor = FactorBudget { rho_iterations: rho };
        }
        let per_stage = flags.retries.or(file.retries).unwrap_or(RetryPolicy::default().per_stage);
        if per_stage == 0 {
            return Err("--retries must be positive".into());
        }
        let workers = flags.workers.or(file.workers).unwrap_or(0);
        let pipeline = PipelineConfig {
            mode,
            policy,
            retry: RetryPolicy {
                per_stage,
                total_steps: per_stage * 12,
            },
            ternary,
            seed: flags.seed.or(file.seed).unwrap_or(0),
            ..PipelineConfig::desk(mode)
        };
        Ok(RunConfig {
            exponents,
            pipeline,
            workers,
            format: flags.format.or(file.format).unwrap_or(Format::Text),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponent_parsing() {
        assert_eq!(parse_exponents("6, 6").unwrap().original(), &[6, 6]);
        assert!(parse_exponents("2").unwrap_err().contains("below the tail minimum"));
        assert!(parse_exponents("").is_err());
        assert!(parse_exponents("6,x").is_err());
    }

    #[test]
    fn flags_override_file() {
        let file: FileConfig = toml::from_str("exponents = \"6,6\"\nseed = 5\nbudget_z = 10\n").unwrap();
        let flags = RunFlags {
            seed: Some(9),
            ..Default::default()
        };
        let cfg = RunConfig::resolve(&flags, &file).unwrap();
        assert_eq!(cfg.pipeline.seed, 9);
        assert_eq!(cfg.pipeline.ternary.max_z, 10);
        assert_eq!(cfg.pipeline.mode, Mode::Grh);
        assert_eq!(cfg.format, Format::Text);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<FileConfig>("colour = 1").is_err());
    }

    #[test]
    fn default_mode_follows_feasibility() {
        let flags = RunFlags {
            exponents: Some("5,8".into()),
            ..Default::default()
        };
        let cfg = RunConfig::resolve(&flags, &FileConfig::default()).unwrap();
        assert_eq!(cfg.pipeline.mode, Mode::Grh);
        let flags = RunFlags {
            exponents: Some("4".into()),
            ..Default::default()
        };
        let cfg = RunConfig::resolve(&flags, &FileConfig::default()).unwrap();
        assert_eq!(cfg.pipeline.mode, Mode::RamanujanGrh);
    }
}
