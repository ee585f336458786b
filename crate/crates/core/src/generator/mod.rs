//! Template-based synthesis of labeled contracts.
//!
//! Every output is a pure function of its [`GenParams`]: the seed drives a
//! splitmix64 stream that picks identifiers and small structural choices,
//! while the knobs select template variants. Sources are canonicalized by a
//! parse/render pass so that equal structure means equal text.

mod idents;
mod legacy;
mod templates;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use idents::{function_name, gen_identifier, IdentPool, IdentRole, FUNCTION_STEMS};
pub use legacy::gen_legacy;

use crate::rng::{RandomStream, SplitMix64};
use crate::solidity::{self, ParseError};
use crate::taxonomy::{GenKind, Label, Provenance, SecurePattern, Subtype};

#[derive(Debug, thiserror::Error)]
pub enum GenError {
    #[error("invalid generation parameters: {0}")]
    InvalidParams(String),
    #[error("template produced unparseable source: {0}")]
    Template(#[from] ParseError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KnobSpec {
    pub name: &'static str,
    pub min: u32,
    pub max: u32,
}

/// Declared knob ranges, in feature order.
pub const KNOB_SPECS: [KnobSpec; 7] = [
    KnobSpec { name: "extra_functions", min: 0, max: 3 },
    KnobSpec { name: "guard_variant", min: 0, max: 2 },
    KnobSpec { name: "ident_pool", min: 0, max: 7 },
    KnobSpec { name: "shuffle_variant", min: 0, max: 1 },
    KnobSpec { name: "pragma_variant", min: 0, max: 2 },
    KnobSpec { name: "template_family", min: 0, max: 3 },
    KnobSpec { name: "defense_mix", min: 1, max: 15 },
];

/// Structural knobs. Zero values (and `defense_mix = 1`) reproduce the
/// reference templates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Knobs {
    /// Benign functions added next to the template's own.
    pub extra_functions: u32,
    /// Style of the balance check: `require`, alternate `require`, or `if`/`revert`.
    pub guard_variant: u32,
    /// Identifier theme; 0 is the reference naming.
    pub ident_pool: u32,
    /// Member order and local caching of the paid amount.
    pub shuffle_variant: u32,
    pub pragma_variant: u32,
    /// Template family within a kind (e.g. withdraw-all vs refund).
    pub template_family: u32,
    /// Bit set over throttle, block limit, gas stipend and delegation check.
    pub defense_mix: u32,
}

impl Default for Knobs {
    fn default() -> Self {
        Self::from_array([0, 0, 0, 0, 0, 0, 1])
    }
}

impl Knobs {
    pub fn to_array(&self) -> [u32; 7] {
        [
            self.extra_functions,
            self.guard_variant,
            self.ident_pool,
            self.shuffle_variant,
            self.pragma_variant,
            self.template_family,
            self.defense_mix,
        ]
    }

    pub fn from_array(a: [u32; 7]) -> Self {
        Self {
            extra_functions: a[0],
            guard_variant: a[1],
            ident_pool: a[2],
            shuffle_variant: a[3],
            pragma_variant: a[4],
            template_family: a[5],
            defense_mix: a[6],
        }
    }

    pub fn validate(&self) -> Result<(), GenError> {
        for (spec, v) in KNOB_SPECS.iter().zip(self.to_array()) {
            if v < spec.min || v > spec.max {
                return Err(GenError::InvalidParams(format!("{} = {v} outside {}..={}", spec.name, spec.min, spec.max)));
            }
        }
        Ok(())
    }

    /// Uniform draw over the declared ranges. The reference naming pool is
    /// excluded so corpus contract names carry no label signal.
    pub fn sample(stream: &mut impl RandomStream) -> Self {
        let mut a = [0u32; 7];
        for (slot, spec) in a.iter_mut().zip(KNOB_SPECS.iter()) {
            let lo = if spec.name == "ident_pool" { 1 } else { spec.min };
            *slot = stream.range_inclusive(lo as u64, spec.max as u64) as u32;
        }
        Self::from_array(a)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenParams {
    pub seed: u64,
    pub kind: GenKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subtype: Option<Subtype>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub secure_pattern: Option<SecurePattern>,
    pub knobs: Knobs,
}

impl GenParams {
    /// Parameters with default knobs.
    pub fn new(kind: GenKind, seed: u64) -> Self {
        Self {
            seed,
            kind,
            subtype: (kind == GenKind::VulnAdvanced).then_some(Subtype::SingleFunction),
            secure_pattern: (kind == GenKind::SecureBasic).then_some(SecurePattern::ReentrancyGuard),
            knobs: Knobs::default(),
        }
    }

    pub fn with_subtype(mut self, subtype: Subtype) -> Self {
        self.subtype = Some(subtype);
        self
    }

    pub fn with_pattern(mut self, pattern: SecurePattern) -> Self {
        self.secure_pattern = Some(pattern);
        self
    }

    pub fn with_knobs(mut self, knobs: Knobs) -> Self {
        self.knobs = knobs;
        self
    }

    /// Parameters whose knobs are drawn from a stream derived from `seed`.
    pub fn sampled(kind: GenKind, seed: u64) -> Self {
        let mut stream = SplitMix64::new(seed).fork(0x6b6e_6f62);
        Self::new(kind, seed).with_knobs(Knobs::sample(&mut stream))
    }

    pub fn validate(&self) -> Result<(), GenError> {
        if (self.kind == GenKind::VulnAdvanced) != self.subtype.is_some() {
            return Err(GenError::InvalidParams("subtype is required for vuln_advanced and only there".into()));
        }
        if (self.kind == GenKind::SecureBasic) != self.secure_pattern.is_some() {
            return Err(GenError::InvalidParams("secure_pattern is required for secure_basic and only there".into()));
        }
        self.knobs.validate()
    }

    pub fn label(&self) -> Label {
        self.kind.label()
    }

    /// Subtype recorded for the output: basic vulnerable templates are
    /// single-function by construction.
    pub fn effective_subtype(&self) -> Option<Subtype> {
        match self.kind {
            GenKind::VulnBasic => Some(Subtype::SingleFunction),
            GenKind::VulnAdvanced => self.subtype,
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedContract {
    pub id: String,
    pub source: String,
    pub label: Label,
    pub subtype: Option<Subtype>,
    pub provenance: Provenance,
    pub params: GenParams,
}

/// Hex SHA-256 of the source text.
pub fn content_id(source: &str) -> String {
    hex::encode(Sha256::digest(source.as_bytes()))
}

pub fn generate(params: &GenParams) -> Result<GeneratedContract, GenError> {
    params.validate()?;
    let raw = templates::build(params);
    let unit = solidity::parse(&raw)?;
    let source = solidity::render(&unit);
    Ok(GeneratedContract {
        id: content_id(&source),
        source,
        label: params.label(),
        subtype: params.effective_subtype(),
        provenance: params.kind.provenance(),
        params: params.clone(),
    })
}

fn require_kind(params: &GenParams, kind: GenKind) -> Result<(), GenError> {
    if params.kind == kind {
        Ok(())
    } else {
        Err(GenError::InvalidParams(format!("expected kind {kind}, got {}", params.kind)))
    }
}

pub fn gen_vulnerable_basic(params: &GenParams) -> Result<GeneratedContract, GenError> {
    require_kind(params, GenKind::VulnBasic)?;
    generate(params)
}

pub fn gen_vulnerable_advanced(params: &GenParams) -> Result<GeneratedContract, GenError> {
    require_kind(params, GenKind::VulnAdvanced)?;
    generate(params)
}

pub fn gen_secure(params: &GenParams) -> Result<GeneratedContract, GenError> {
    require_kind(params, GenKind::SecureBasic)?;
    generate(params)
}

pub fn gen_secure_advanced(params: &GenParams) -> Result<GeneratedContract, GenError> {
    require_kind(params, GenKind::SecureAdvanced)?;
    generate(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_validation() {
        assert!(GenParams::new(GenKind::VulnBasic, 1).validate().is_ok());
        assert!(GenParams::new(GenKind::VulnAdvanced, 1).validate().is_ok());
        assert!(GenParams::new(GenKind::VulnBasic, 1).with_subtype(Subtype::ReadOnly).validate().is_err());
        let mut k = Knobs {
            guard_variant: 3,
            ..Knobs::default()
        };
        let err = GenParams::new(GenKind::SecureAdvanced, 1).with_knobs(k).validate().unwrap_err();
        assert!(err.to_string().contains("guard_variant"));
        k.guard_variant = 0;
        k.defense_mix = 0;
        assert!(k.validate().is_err());
    }

    #[test]
    fn wrong_kind_rejected() {
        assert!(gen_secure(&GenParams::new(GenKind::VulnBasic, 1)).is_err());
    }

    #[test]
    fn sampled_knobs_in_range() {
        for seed in 0..500 {
            let p = GenParams::sampled(GenKind::SecureAdvanced, seed);
            p.validate().unwrap();
            assert_ne!(p.knobs.ident_pool, 0);
        }
    }

    #[test]
    fn id_is_sha256_of_source() {
        let g = generate(&GenParams::new(GenKind::VulnBasic, 5)).unwrap();
        assert_eq!(g.id.len(), 64);
        assert_eq!(g.id, content_id(&g.source));
    }
}
