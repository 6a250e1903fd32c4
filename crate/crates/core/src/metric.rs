//! Time-dilation profiles realised as battery charging rates.
//!
//! The Kruskal-form factor `32 M³ e^{−r/2M} / r` diverges at the origin; the
//! charging rate `φ` of a `d`-level battery cannot exceed `d − 1`, and shifting
//! the radius by `r₀ > 0` keeps every profile value finite.

use rayon::prelude::*;
use serde::Serialize;

use crate::battery::{phi, EnvState};
use crate::error::{Error, Result};

/// Offset used when none is given, as a fraction of the mass.
pub const DEFAULT_OFFSET_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricParams {
    mass: f64,
    r0: f64,
    d: usize,
    r_grid: Vec<f64>,
}

impl MetricParams {
    pub fn new(mass: f64, r0: f64, d: usize, r_grid: Vec<f64>) -> Result<Self> {
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::Domain(format!("mass must be positive, got {mass}")));
        }
        if !(r0.is_finite() && r0 > 0.0) {
            return Err(Error::Domain(format!("offset r0 must be positive, got {r0}")));
        }
        if d < 2 {
            return Err(Error::Dimension(format!("truncation d = {d} < 2")));
        }
        if r_grid.is_empty() || r_grid.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::Domain("radial grid must be nonempty, finite and >= 0".into()));
        }
        if r_grid.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Domain("radial grid must be ascending".into()));
        }
        Ok(MetricParams { mass, r0, d, r_grid })
    }

    /// Same as [`MetricParams::new`] with `r0 = 0.1 · M`.
    pub fn with_default_offset(mass: f64, d: usize, r_grid: Vec<f64>) -> Result<Self> {
        Self::new(mass, DEFAULT_OFFSET_FRACTION * mass, d, r_grid)
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn r_grid(&self) -> &[f64] {
        &self.r_grid
    }
}

/// `32 M³ e^{−r/2M} / r`.
pub fn dilation_factor(r: f64, mass: f64) -> Result<f64> {
    if !(r > 0.0 && r.is_finite()) || !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::Domain(format!(
            "dilation factor needs r > 0 and M > 0, got r = {r}, M = {mass}"
        )));
    }
    Ok(32.0 * mass.powi(3) * (-r / (2.0 * mass)).exp() / r)
}

/// Dilation factor at the shifted radius `r + r₀`; finite at `r = 0`.
pub fn offset_factor(r: f64, params: &MetricParams) -> Result<f64> {
    if r.is_nan() || r < 0.0 {
        return Err(Error::Domain(format!("radius must be >= 0, got {r}")));
    }
    dilation_factor(r + params.r0, params.mass)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesizedEnv {
    pub env: EnvState,
    pub clipped: bool,
}

/// Fock-diagonal environment with `φ = target`.
///
/// Mixes the vacuum with the smallest level `n ≥ target` (`n ≥ 1`):
/// `σ = (1 − p)|0⟩⟨0| + p|n⟩⟨n|` with `p = target / n`. Targets above `d − 1`
/// saturate at `|d−1⟩⟨d−1|` and are flagged as clipped.
pub fn synth_env(target: f64, d: usize) -> Result<SynthesizedEnv> {
    if target.is_nan() || target < 0.0 {
        return Err(Error::Domain(format!("target rate must be >= 0, got {target}")));
    }
    if d < 2 {
        return Err(Error::Dimension(format!("truncation d = {d} < 2")));
    }
    let top = (d - 1) as f64;
    if target > top {
        return Ok(SynthesizedEnv {
            env: EnvState::fock_level(d, d - 1)?,
            clipped: true,
        });
    }
    let level = (target.ceil() as usize).max(1);
    let p = target / level as f64;
    let mut spectrum = vec![0.0; d];
    spectrum[0] = 1.0 - p;
    spectrum[level] += p;
    Ok(SynthesizedEnv {
        env: EnvState::fock_diagonal(spectrum)?,
        clipped: false,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRecord {
    pub r: f64,
    pub target_factor: f64,
    pub phi_achieved: f64,
    pub clipped: bool,
    pub env: EnvState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricProfile {
    pub records: Vec<MetricRecord>,
    pub params: MetricParams,
}

pub fn build_profile(params: &MetricParams) -> Result<MetricProfile> {
    let records = params
        .r_grid
        .par_iter()
        .map(|&r| {
            let target_factor = offset_factor(r, params)?;
            let synth = synth_env(target_factor, params.d)?;
            Ok(MetricRecord {
                r,
                target_factor,
                phi_achieved: phi(&synth.env),
                clipped: synth.clipped,
                env: synth.env,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricProfile {
        records,
        params: params.clone(),
    })
}

#[derive(Debug, Serialize)]
struct RecordJson<'a> {
    r: f64,
    target: f64,
    phi: f64,
    clipped: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    env: Option<&'a EnvState>,
}

#[derive(Debug, Serialize)]
struct ProfileJson<'a> {
    #[serde(rename = "M")]
    mass: f64,
    r0: f64,
    d: usize,
    records: Vec<RecordJson<'a>>,
}

impl MetricProfile {
    /// `r,target,phi,clipped` rows.
    pub fn to_csv(&self) -> String {
        use crate::io::fmt_f64;
        let mut out = String::from("r,target,phi,clipped\n");
        for rec in &self.records {
            out.push_str(&format!(
                "{},{},{},{}\n",
                fmt_f64(rec.r),
                fmt_f64(rec.target_factor),
                fmt_f64(rec.phi_achieved),
                rec.clipped
            ));
        }
        out
    }

    /// JSON document; each record embeds its environment state when `verbose`.
    pub fn to_json(&self, verbose: bool) -> String {
        let doc = ProfileJson {
            mass: self.params.mass,
            r0: self.params.r0,
            d: self.params.d,
            records: self
                .records
                .iter()
                .map(|rec| RecordJson {
                    r: rec.r,
                    target: rec.target_factor,
                    phi: rec.phi_achieved,
                    clipped: rec.clipped,
                    env: verbose.then_some(&rec.env),
                })
                .collect(),
        };
        crate::io::to_json_string(&doc)
    }
}
