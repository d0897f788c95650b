//! Run configuration: a single JSON document.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use moran_dim::expansion::{expand, parse_real, DigitSequence, DigitSequenceRecord, DigitStats, ExpansionKind};
use moran_dim::family::{build_tilde_family, ContractionFamily, TildeScheme};
use moran_dim::measures::beta_digit_frequencies;
use moran_dim::pressure::{PressureProblem, RestFamily};
use moran_dim::FrequencyVector;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Driving point `x` and the expansion producing its digits.
    #[serde(default)]
    pub expansion: Option<ExpansionDecl>,
    #[serde(default)]
    pub families: BTreeMap<u64, FamilyDecl>,
    /// Family shared by every digit without its own entry.
    #[serde(default)]
    pub rest: Option<FamilyDecl>,
    #[serde(default)]
    pub eta: Option<EtaDecl>,
    /// Explicit driving prefix; defaults to the expansion digits.
    #[serde(default)]
    pub omega: Option<Vec<u64>>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub precision_bits: Option<u32>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpansionDecl {
    pub kind: KindName,
    #[serde(default)]
    pub m: Option<u64>,
    #[serde(default)]
    pub beta: Option<String>,
    pub x: String,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum KindName {
    Mary,
    Beta,
    Cf,
    Br,
}

pub fn make_kind(kind: KindName, m: Option<u64>, beta: Option<&str>) -> CliResult<ExpansionKind> {
    let need_m = || m.ok_or_else(|| CliError::config("this expansion needs --m"));
    Ok(match kind {
        KindName::Mary => ExpansionKind::mary(need_m()?)?,
        KindName::Br => {
            let m = u32::try_from(need_m()?).map_err(|_| CliError::config("m out of range"))?;
            ExpansionKind::bolyai_renyi(m)?
        }
        KindName::Cf => ExpansionKind::ContinuedFraction,
        KindName::Beta => {
            let b = beta.ok_or_else(|| CliError::config("beta expansion needs --beta"))?;
            ExpansionKind::beta(parse_real(b)?)?
        }
    })
}

impl ExpansionDecl {
    pub fn kind(&self) -> CliResult<ExpansionKind> {
        make_kind(self.kind, self.m, self.beta.as_deref())
    }

    pub fn run(&self, precision_bits: u32) -> CliResult<DigitSequence> {
        Ok(expand(&self.kind()?, &parse_real(&self.x)?, self.n, precision_bits)?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilyDecl {
    Explicit {
        gammas: Vec<f64>,
    },
    Geometric {
        a: f64,
        r: f64,
    },
    /// Ratios built from the digit counts of the sequence file.
    DigitDriven {
        sequence: PathBuf,
        digit: u64,
        #[serde(default = "simple_scheme")]
        scheme: TildeScheme,
    },
}

fn simple_scheme() -> TildeScheme {
    TildeScheme::Simple
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EtaDecl {
    /// `"empirical"`, `"gauss"` or `"parry"`.
    Named(String),
    Vector(FrequencyVector),
}

/// Loaded configuration with paths resolved against the config directory.
#[derive(Debug, Clone, Default)]
pub struct Loaded {
    pub config: RunConfig,
    pub bytes: Vec<u8>,
    pub base: PathBuf,
}

pub fn read_file(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn load(path: Option<&Path>) -> CliResult<Loaded> {
    let Some(path) = path else {
        return Ok(Loaded::default());
    };
    let bytes = read_file(path)?;
    let config: RunConfig = serde_json::from_slice(&bytes)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let loaded = Loaded { config, bytes, base };
    loaded.validate()?;
    Ok(loaded)
}

/// Reads a digit sequence, either bare or wrapped in a tool output.
pub fn read_sequence(path: &Path) -> CliResult<DigitSequence> {
    let v: serde_json::Value = serde_json::from_slice(&read_file(path)?)?;
    let v = v.get("result").cloned().unwrap_or(v);
    let rec: DigitSequenceRecord = serde_json::from_value(v)
        .map_err(|e| CliError::config(format!("{}: not a digit sequence: {e}", path.display())))?;
    Ok(DigitSequence::from_record(&rec)?)
}

impl Loaded {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    fn validate(&self) -> CliResult<()> {
        let c = &self.config;
        if let Some(t) = c.tol {
            if !(t > 0.0) {
                return Err(CliError::config(format!("tol must be positive, got {t}")));
            }
        }
        for decl in c.families.values().chain(c.rest.as_ref()) {
            if let FamilyDecl::DigitDriven { sequence, .. } = decl {
                let p = self.resolve(sequence);
                if !p.is_file() {
                    return Err(CliError::config(format!(
                        "sequence file {} does not exist",
                        p.display()
                    )));
                }
            }
        }
        if let Some(EtaDecl::Named(n)) = &c.eta {
            if !matches!(n.as_str(), "empirical" | "gauss" | "parry") {
                return Err(CliError::config(format!("unknown frequency vector '{n}'")));
            }
        }
        Ok(())
    }

    pub fn driving(&self, precision_bits: u32) -> CliResult<Option<DigitSequence>> {
        self.config
            .expansion
            .as_ref()
            .map(|e| e.run(precision_bits))
            .transpose()
    }

    pub fn omega(&self, precision_bits: u32) -> CliResult<Option<Vec<u64>>> {
        if let Some(o) = &self.config.omega {
            return Ok(Some(o.clone()));
        }
        Ok(self.driving(precision_bits)?.map(|s| s.digits().to_vec()))
    }

    fn family(&self, decl: &FamilyDecl) -> CliResult<ContractionFamily> {
        Ok(match decl {
            FamilyDecl::Explicit { gammas } => ContractionFamily::explicit(gammas.clone())?,
            FamilyDecl::Geometric { a, r } => ContractionFamily::geometric(*a, *r)?,
            FamilyDecl::DigitDriven {
                sequence,
                digit,
                scheme,
            } => {
                let seq = read_sequence(&self.resolve(sequence))?;
                let stats = DigitStats::from_digits(seq.digits(), None);
                build_tilde_family(&stats, *digit, *scheme)?
            }
        })
    }

    pub fn families(&self) -> CliResult<BTreeMap<u64, ContractionFamily>> {
        if self.config.families.is_empty() {
            return Err(CliError::config("config declares no families"));
        }
        self.config
            .families
            .iter()
            .map(|(&i, d)| Ok((i, self.family(d)?)))
            .collect()
    }

    pub fn eta(&self, precision_bits: u32) -> CliResult<FrequencyVector> {
        match &self.config.eta {
            Some(EtaDecl::Vector(v)) => Ok(v.clone()),
            Some(EtaDecl::Named(n)) if n == "gauss" => Ok(FrequencyVector::gauss()),
            Some(EtaDecl::Named(n)) if n == "parry" => {
                let e = self
                    .config
                    .expansion
                    .as_ref()
                    .filter(|e| e.kind == KindName::Beta)
                    .ok_or_else(|| CliError::config("eta \"parry\" needs a beta expansion"))?;
                let b = parse_real(e.beta.as_deref().unwrap_or_default())?;
                Ok(beta_digit_frequencies(&b)?)
            }
            Some(EtaDecl::Named(_)) | None => {
                let omega = self
                    .omega(precision_bits)?
                    .ok_or_else(|| CliError::config("no frequency vector and no driving sequence"))?;
                empirical(&omega)
            }
        }
    }

    pub fn problem(&self, precision_bits: u32) -> CliResult<PressureProblem> {
        let mut p = PressureProblem::new(self.families()?, self.eta(precision_bits)?)?;
        if let Some(r) = &self.config.rest {
            p = p.with_rest(RestFamily::Exact(self.family(r)?));
        }
        if let Some(o) = self.omega(precision_bits)? {
            p = p.with_omega(&o);
        }
        Ok(p)
    }
}

/// Finite frequency vector of the observed digits.
pub fn empirical(digits: &[u64]) -> CliResult<FrequencyVector> {
    let (Some(&lo), Some(&hi)) = (digits.iter().min(), digits.iter().max()) else {
        return Err(CliError::config("empty driving sequence"));
    };
    let stats = DigitStats::from_digits(digits, None);
    let w = (lo..=hi).map(|i| stats.frequency(i)).collect();
    Ok(FrequencyVector::finite_normalized(lo, w)?)
}
