//! Run specification: model parameters, grids, outputs and pricer controls,
//! merged from defaults, an optional flat key-value config file and CLI
//! flags (flags win).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use fwdsmile::pricer::PricingConfig;
use fwdsmile::HestonParams;

/// Uniform strike grid, linear in log-strike per unit maturity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KGrid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl KGrid {
    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let step = (self.max - self.min) / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| self.min + step * i as f64)
            .collect()
    }
}

/// Fully resolved inputs of one command invocation.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub params: HestonParams,
    pub t: f64,
    pub tau_list: Vec<f64>,
    pub k_grid: KGrid,
    /// Highest expansion order to emit (0 or 1; 2 falls back to 1 with a
    /// warning since second-order terms degenerate outside the good
    /// correlation regime).
    pub order: u8,
    pub out: Option<PathBuf>,
    pub pricing: PricingConfig,
    pub mc_check: bool,
    pub seed: u64,
}

/// Unresolved, partially filled specification; every field optional so that
/// config-file values and CLI flags can be layered.
#[derive(Debug, Clone, Default)]
pub struct SpecDraft {
    pub v: Option<f64>,
    pub theta: Option<f64>,
    pub kappa: Option<f64>,
    pub xi: Option<f64>,
    pub rho: Option<f64>,
    pub t: Option<f64>,
    pub tau: Option<Vec<f64>>,
    pub k_min: Option<f64>,
    pub k_max: Option<f64>,
    pub k_count: Option<usize>,
    pub order: Option<u8>,
    pub out: Option<PathBuf>,
    pub damping: Option<f64>,
    pub quad_rel_tol: Option<f64>,
    pub quad_abs_tol: Option<f64>,
    pub iv_tol: Option<f64>,
    pub saddle_tol: Option<f64>,
    pub mc_paths: Option<u64>,
    pub mc_steps: Option<u32>,
    pub mc_check: Option<bool>,
    pub seed: Option<u64>,
}

impl SpecDraft {
    /// Fills every unset field from `other` (lower precedence).
    pub fn or(mut self, other: SpecDraft) -> SpecDraft {
        macro_rules! take {
            ($($f:ident),*) => { $( if self.$f.is_none() { self.$f = other.$f; } )* };
        }
        take!(
            v,
            theta,
            kappa,
            xi,
            rho,
            t,
            tau,
            k_min,
            k_max,
            k_count,
            order,
            out,
            damping,
            quad_rel_tol,
            quad_abs_tol,
            iv_tol,
            saddle_tol,
            mc_paths,
            mc_steps,
            mc_check,
            seed
        );
        self
    }

    pub fn resolve(self) -> Result<RunSpec> {
        let params = HestonParams::new(
            self.v
                .ok_or_else(|| anyhow!("missing parameter v (use --params or a config file)"))?,
            self.theta
                .ok_or_else(|| anyhow!("missing parameter theta"))?,
            self.kappa
                .ok_or_else(|| anyhow!("missing parameter kappa"))?,
            self.xi.ok_or_else(|| anyhow!("missing parameter xi"))?,
            self.rho.ok_or_else(|| anyhow!("missing parameter rho"))?,
        )?;
        let tau_list = self.tau.unwrap_or_else(|| vec![5.0]);
        // NaN-rejecting guards.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if tau_list.is_empty() || tau_list.iter().any(|&t| !(t > 0.0)) {
            bail!("tau list must be non-empty and strictly positive");
        }
        let k_grid = KGrid {
            min: self.k_min.unwrap_or(-0.5),
            max: self.k_max.unwrap_or(0.5),
            count: self.k_count.unwrap_or(41),
        };
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if k_grid.count == 0 || !(k_grid.min <= k_grid.max) {
            bail!("strike grid must be non-empty with k_min <= k_max");
        }
        let order = self.order.unwrap_or(1);
        if order > 2 {
            bail!("order must be 0, 1 or 2");
        }
        let mut pricing = PricingConfig {
            damping: self.damping,
            ..Default::default()
        };
        if let Some(x) = self.quad_rel_tol {
            pricing.quad_rel_tol = x;
        }
        if let Some(x) = self.quad_abs_tol {
            pricing.quad_abs_tol = x;
        }
        if let Some(x) = self.iv_tol {
            pricing.iv_tol = x;
        }
        if let Some(x) = self.saddle_tol {
            pricing.saddle_tol = x;
        }
        if let Some(x) = self.mc_paths {
            pricing.mc_paths = x;
        }
        if let Some(x) = self.mc_steps {
            pricing.mc_steps = x;
        }
        Ok(RunSpec {
            params,
            t: self.t.unwrap_or(0.0),
            tau_list,
            k_grid,
            order,
            out: self.out,
            pricing,
            mc_check: self.mc_check.unwrap_or(false),
            seed: self.seed.unwrap_or(42),
        })
    }
}

/// Parses the flat `key = value` config format: one pair per line, `#`
/// starts a comment, keys mirror the draft fields, `tau` takes a
/// comma-separated list.
pub fn parse_config(text: &str) -> Result<SpecDraft> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .with_context(|| format!("line {}: expected key = value", lineno + 1))?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    let mut draft = SpecDraft::default();
    let f = |s: &String| -> Result<f64> { Ok(s.parse::<f64>()?) };
    for (key, value) in &map {
        match key.as_str() {
            "v" => draft.v = Some(f(value)?),
            "theta" => draft.theta = Some(f(value)?),
            "kappa" => draft.kappa = Some(f(value)?),
            "xi" => draft.xi = Some(f(value)?),
            "rho" => draft.rho = Some(f(value)?),
            "t" => draft.t = Some(f(value)?),
            "tau" => {
                draft.tau = Some(
                    value
                        .split(',')
                        .map(|s| s.trim().parse::<f64>().context("bad tau entry"))
                        .collect::<Result<Vec<_>>>()?,
                )
            }
            "k_min" => draft.k_min = Some(f(value)?),
            "k_max" => draft.k_max = Some(f(value)?),
            "k_count" => draft.k_count = Some(value.parse()?),
            "order" => draft.order = Some(value.parse()?),
            "out" => draft.out = Some(PathBuf::from(value)),
            "damping" => draft.damping = Some(f(value)?),
            "quad_rel_tol" => draft.quad_rel_tol = Some(f(value)?),
            "quad_abs_tol" => draft.quad_abs_tol = Some(f(value)?),
            "iv_tol" => draft.iv_tol = Some(f(value)?),
            "saddle_tol" => draft.saddle_tol = Some(f(value)?),
            "mc_paths" => draft.mc_paths = Some(value.parse()?),
            "mc_steps" => draft.mc_steps = Some(value.parse()?),
            "mc_check" => draft.mc_check = Some(value.parse()?),
            "seed" => draft.seed = Some(value.parse()?),
            other => bail!("unknown config key `{other}`"),
        }
    }
    Ok(draft)
}

pub fn load_config(path: &Path) -> Result<SpecDraft> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip_and_precedence() {
        let file = parse_config(
            "# base configuration\nv = 0.07\ntheta = 0.07\nkappa = 1.5\nxi = 0.65\nrho = -0.8\n\
             t = 1.0\ntau = 2, 5, 10\nk_count = 11\n",
        )
        .unwrap();
        let flags = SpecDraft {
            kappa: Some(2.0),
            ..SpecDraft::default()
        };
        let spec = flags.or(file).resolve().unwrap();
        assert_eq!(spec.params.kappa, 2.0); // flag wins
        assert_eq!(spec.params.xi, 0.65); // file fills the rest
        assert_eq!(spec.tau_list, vec![2.0, 5.0, 10.0]);
        assert_eq!(spec.k_grid.count, 11);
        assert_eq!(spec.order, 1);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(parse_config("nope = 1\n").is_err());
        assert!(parse_config("v 0.07\n").is_err());
        let draft =
            parse_config("v=0.07\ntheta=0.07\nkappa=1.5\nxi=0.65\nrho=-0.8\ntau=-1\n").unwrap();
        assert!(draft.resolve().is_err());
        let missing = SpecDraft::default();
        assert!(missing.resolve().is_err());
    }

    #[test]
    fn grid_points_are_inclusive() {
        let g = KGrid {
            min: -1.0,
            max: 1.0,
            count: 5,
        };
        assert_eq!(g.points(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(
            KGrid {
                min: 0.3,
                max: 0.9,
                count: 1
            }
            .points(),
            vec![0.3]
        );
    }
}
