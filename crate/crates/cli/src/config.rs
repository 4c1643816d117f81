use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use nsper_core::mask::{BUILTIN_TOL, FILE_TOL};
use nsper_core::{Family, PeriodicMaskTable};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Levels generated above the last analysis level for built-in families.
pub const TABLE_MARGIN: u32 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub family: Option<String>,
    pub mask_file: Option<PathBuf>,
    pub transition: Option<f64>,
    pub j_min: u32,
    pub j_max: u32,
    #[serde(rename = "K")]
    pub order: u32,
    /// Periodic coefficient cutoff; defaults to `span 2^j` per level.
    #[serde(rename = "N")]
    pub cutoff: Option<usize>,
    pub span: f64,
    pub resolution: u32,
    pub tol: f64,
    pub out: PathBuf,
    pub self_test: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            family: None,
            mask_file: None,
            transition: None,
            j_min: 3,
            j_max: 6,
            order: 1,
            cutoff: None,
            span: 2.0,
            resolution: 3,
            tol: 1e-12,
            out: PathBuf::from("out"),
            self_test: false,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// JSON run configuration; flags given here override its fields
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Built-in family: haar_cos or meyer_smooth
    #[arg(long, global = true)]
    pub family: Option<String>,
    /// Mask table JSON file
    #[arg(long, global = true)]
    pub mask_file: Option<PathBuf>,
    /// Transition width of meyer_smooth, in (0, 1]
    #[arg(long, global = true)]
    pub transition: Option<f64>,
    #[arg(long, global = true)]
    pub jmin: Option<u32>,
    #[arg(long, global = true)]
    pub jmax: Option<u32>,
    /// Spline order of the phase lift
    #[arg(short = 'K', global = true)]
    pub order: Option<u32>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Half-width of the spectral window in units of 2^j
    #[arg(long, global = true)]
    pub span: Option<f64>,
    /// Grid resolution G (step 2^-(j+G))
    #[arg(long, global = true)]
    pub res: Option<u32>,
    /// Periodic coefficient cutoff N
    #[arg(long, global = true)]
    pub cutoff: Option<usize>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Add the Gaussian self-test row to the UC table
    #[arg(long, global = true)]
    pub self_test: bool,
}

impl RunConfig {
    pub fn load(o: &Overrides) -> Result<Self, CliError> {
        let mut c = match &o.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| CliError::Io(path.clone(), e))?;
                serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
            }
            None => RunConfig::default(),
        };
        if o.family.is_some() || o.mask_file.is_some() {
            c.family = o.family.clone();
            c.mask_file = o.mask_file.clone();
        }
        c.transition = o.transition.or(c.transition);
        c.j_min = o.jmin.unwrap_or(c.j_min);
        c.j_max = o.jmax.unwrap_or(c.j_max);
        c.order = o.order.unwrap_or(c.order);
        c.tol = o.tol.unwrap_or(c.tol);
        c.span = o.span.unwrap_or(c.span);
        c.resolution = o.res.unwrap_or(c.resolution);
        c.cutoff = o.cutoff.or(c.cutoff);
        c.out = o.out.clone().unwrap_or(c.out);
        c.self_test |= o.self_test;
        c.check()?;
        Ok(c)
    }

    fn check(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Usage(m));
        match (&self.family, &self.mask_file) {
            (None, None) => return bad("one of --family or --mask-file is required".into()),
            (Some(_), Some(_)) => return bad("--family and --mask-file are exclusive".into()),
            _ => {}
        }
        if !(self.tol > 0.0 && self.tol <= 1e-2) {
            return bad(format!("tol must lie in (0, 1e-2], got {}", self.tol));
        }
        if self.j_min < 2 {
            return bad(format!("jmin must be at least 2, got {}", self.j_min));
        }
        if !(1..=8).contains(&self.order) {
            return bad(format!("K must lie in 1..=8, got {}", self.order));
        }
        if self.cutoff == Some(0) {
            return bad("N must be at least 1".into());
        }
        if !(self.span > 0.0 && self.span.is_finite()) {
            return bad(format!("span must be positive, got {}", self.span));
        }
        if self.resolution > 12 {
            return bad(format!("resolution {} is too fine", self.resolution));
        }
        Ok(())
    }

    pub fn family(&self) -> Result<Option<Family>, CliError> {
        match &self.family {
            Some(name) => Ok(Some(Family::from_name(name, self.transition)?)),
            None => Ok(None),
        }
    }

    /// The mask table covering the analysis levels; built-in tables extend
    /// `TABLE_MARGIN` levels beyond `j_max`.
    pub fn table(&self, margin: u32) -> Result<PeriodicMaskTable, CliError> {
        if let Some(f) = self.family()? {
            return Ok(f.table(2, self.j_max.max(2) + margin)?);
        }
        let path = self.mask_file.as_ref().expect("checked");
        if !path.exists() {
            return Err(CliError::Io(path.clone(), std::io::Error::from(std::io::ErrorKind::NotFound)));
        }
        Ok(PeriodicMaskTable::read_json(path)?)
    }

    pub fn validation_tol(&self) -> f64 {
        if self.family.is_some() {
            BUILTIN_TOL
        } else {
            FILE_TOL
        }
    }

    /// Compact JSON of every field that affects results (the output
    /// directory is left out).
    pub fn canonical_json(&self) -> String {
        let mut c = self.clone();
        c.out = PathBuf::new();
        serde_json::to_string(&c).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical_json().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn out_dir(&self) -> &Path {
        &self.out
    }

    /// Coefficient cutoff at level `j`.
    pub fn cutoff_at(&self, j: u32) -> usize {
        self.cutoff.unwrap_or_else(|| (self.span * (1u64 << j) as f64).ceil() as usize).max(1)
    }
}
