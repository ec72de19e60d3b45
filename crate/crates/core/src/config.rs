//! TOML specifications for spaces and norms.
//!
//! A lattice spec is a key/value document with a `[space]` table (atom count
//! and weights) and a `[norms.<name>]` table per norm. Derived variants
//! reference their base by name, so nesting never recurses inside TOML.
//! Parsing is strict: unknown keys are rejected. Round-trips preserve every
//! numeric field to full f64 precision.
//!
//! ```toml
//! [space]
//! atoms = 2
//! weights = [0.5, 0.5]
//!
//! [norms.base]
//! variant = "lorentz"
//! p = 1.0
//! weights = [1.0, 0.5]
//!
//! [norms.x]
//! variant = "convexified"
//! base = "base"
//! p = 2.0
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norm::{LatticeNorm, NormVariant};
use crate::space::{FiniteProbabilitySpace, Space};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    /// Atom count; defaults to `weights.len()` and must match it when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<usize>,
    pub weights: Vec<f64>,
}

impl SpaceSpec {
    pub fn build(&self) -> Result<Space> {
        if let Some(n) = self.atoms {
            if n != self.weights.len() {
                return Err(Error::Config(format!(
                    "space declares {n} atoms but lists {} weights",
                    self.weights.len()
                )));
            }
        }
        FiniteProbabilitySpace::new(self.weights.clone())
    }

    pub fn of(space: &Space) -> Self {
        Self {
            atoms: Some(space.len()),
            weights: space.weights().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NormSpec {
    WeightedLp {
        p: f64,
    },
    LInfinity,
    Lorentz {
        weights: Vec<f64>,
        p: f64,
        /// Rescale the weights into the `‖f‖_1 ≤ ‖f‖ ≤ 2‖f‖_∞` regime.
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        sandwich: bool,
    },
    Convexified {
        base: String,
        p: f64,
    },
    Renormed {
        base: String,
        q: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub space: SpaceSpec,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub norms: BTreeMap<String, NormSpec>,
}

impl LatticeSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Resolve every named norm against the space, following base references
    /// (cycles and dangling names are configuration errors).
    pub fn build(&self) -> Result<(Space, BTreeMap<String, LatticeNorm>)> {
        let space = self.space.build()?;
        let mut built: BTreeMap<String, LatticeNorm> = BTreeMap::new();
        for name in self.norms.keys() {
            self.build_norm_rec(name, &space, &mut built, &mut Vec::new())?;
        }
        Ok((space, built))
    }

    pub fn build_norm(&self, name: &str) -> Result<(Space, LatticeNorm)> {
        let space = self.space.build()?;
        let mut built = BTreeMap::new();
        let norm = self.build_norm_rec(name, &space, &mut built, &mut Vec::new())?;
        Ok((space, norm))
    }

    fn build_norm_rec(
        &self,
        name: &str,
        space: &Space,
        built: &mut BTreeMap<String, LatticeNorm>,
        in_progress: &mut Vec<String>,
    ) -> Result<LatticeNorm> {
        if let Some(done) = built.get(name) {
            return Ok(done.clone());
        }
        if in_progress.iter().any(|n| n == name) {
            return Err(Error::Config(format!(
                "cyclic norm definition through '{name}'"
            )));
        }
        let spec = self
            .norms
            .get(name)
            .ok_or_else(|| Error::Config(format!("unknown norm '{name}'")))?;
        in_progress.push(name.to_string());
        let norm = match spec {
            NormSpec::WeightedLp { p } => LatticeNorm::weighted_lp(space.clone(), *p)?,
            NormSpec::LInfinity => LatticeNorm::l_infinity(space.clone())?,
            NormSpec::Lorentz {
                weights,
                p,
                sandwich,
            } => {
                if *sandwich {
                    LatticeNorm::lorentz_sandwiched(space.clone(), weights.clone(), *p)?
                } else {
                    LatticeNorm::lorentz(space.clone(), weights.clone(), *p)?
                }
            }
            NormSpec::Convexified { base, p } => {
                let base = self.build_norm_rec(base, space, built, in_progress)?;
                crate::convexity::convexify(&base, *p)?
            }
            NormSpec::Renormed { base, q } => {
                let base = self.build_norm_rec(base, space, built, in_progress)?;
                crate::convexity::renorm_unit_concavity(&base, *q)?
            }
        };
        in_progress.pop();
        built.insert(name.to_string(), norm.clone());
        Ok(norm)
    }

    /// Export a built norm (and its space) as a spec, synthesizing names for
    /// nested bases (`<name>.base`, `<name>.base.base`, …).
    pub fn from_named_norm(name: &str, norm: &LatticeNorm) -> Self {
        let mut norms = BTreeMap::new();
        fn emit(name: &str, variant: &NormVariant, norms: &mut BTreeMap<String, NormSpec>) {
            let spec = match variant {
                NormVariant::WeightedLp { p } => NormSpec::WeightedLp { p: *p },
                NormVariant::LInfinity => NormSpec::LInfinity,
                NormVariant::Lorentz { weights, p } => NormSpec::Lorentz {
                    weights: weights.clone(),
                    p: *p,
                    sandwich: false,
                },
                NormVariant::Convexified { base, p } => {
                    let base_name = format!("{name}.base");
                    emit(&base_name, base, norms);
                    NormSpec::Convexified {
                        base: base_name,
                        p: *p,
                    }
                }
                NormVariant::Renormed { base, q } => {
                    let base_name = format!("{name}.base");
                    emit(&base_name, base, norms);
                    NormSpec::Renormed {
                        base: base_name,
                        q: *q,
                    }
                }
            };
            norms.insert(name.to_string(), spec);
        }
        emit(name, norm.variant(), &mut norms);
        Self {
            space: SpaceSpec::of(norm.space()),
            norms,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling;

    const SAMPLE: &str = r#"
[space]
atoms = 3
weights = [0.5, 0.25, 0.25]

[norms.l15]
variant = "weighted-lp"
p = 1.5

[norms.sup]
variant = "l-infinity"

[norms.lor]
variant = "lorentz"
weights = [1.0, 0.5, 0.25]
p = 1.0

[norms.x2]
variant = "convexified"
base = "lor"
p = 2.0

[norms.xr]
variant = "renormed"
base = "l15"
q = 2.0
"#;

    #[test]
    fn parses_and_builds_all_variants() {
        let spec = LatticeSpec::from_toml_str(SAMPLE).unwrap();
        let (space, norms) = spec.build().unwrap();
        assert_eq!(space.len(), 3);
        assert_eq!(norms.len(), 5);
        let f = crate::LatticeFunction::new(space, vec![1.0, -2.0, 0.5]).unwrap();
        for norm in norms.values() {
            assert!(norm.eval(&f).unwrap() > 0.0);
        }
    }

    #[test]
    fn rejects_unknown_keys_and_bad_references() {
        let with_unknown = SAMPLE.replace("p = 1.5", "p = 1.5\nflavor = \"mint\"");
        assert!(LatticeSpec::from_toml_str(&with_unknown).is_err());

        let dangling = r#"
[space]
weights = [1.0]

[norms.x]
variant = "convexified"
base = "nope"
p = 2.0
"#;
        let spec = LatticeSpec::from_toml_str(dangling).unwrap();
        assert!(matches!(spec.build(), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_cycles() {
        let cyclic = r#"
[space]
weights = [1.0]

[norms.a]
variant = "convexified"
base = "b"
p = 2.0

[norms.b]
variant = "convexified"
base = "a"
p = 2.0
"#;
        let spec = LatticeSpec::from_toml_str(cyclic).unwrap();
        assert!(matches!(spec.build(), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_inconsistent_atom_count() {
        let bad = r#"
[space]
atoms = 2
weights = [1.0]
"#;
        let spec = LatticeSpec::from_toml_str(bad).unwrap();
        assert!(spec.build().is_err());
    }

    #[test]
    fn round_trip_preserves_evaluation_exactly() {
        let spec = LatticeSpec::from_toml_str(SAMPLE).unwrap();
        let (space, norms) = spec.build().unwrap();
        for (name, norm) in &norms {
            let exported = LatticeSpec::from_named_norm(name, norm);
            let text = exported.to_toml_string().unwrap();
            let reparsed = LatticeSpec::from_toml_str(&text).unwrap();
            let (space2, norm2) = reparsed.build_norm(name).unwrap();
            assert_eq!(*space, *space2, "space drifted for {name}");
            for k in 0..20u64 {
                let f = sampling::gaussian_function(&space, &mut sampling::rng_for(3, k));
                let f2 = crate::LatticeFunction::new(space2.clone(), f.values().to_vec()).unwrap();
                let a = norm.eval(&f).unwrap();
                let b = norm2.eval(&f2).unwrap();
                assert!(
                    (a - b).abs() <= 1e-15 * a.abs().max(1.0),
                    "{name}: {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn sandwich_flag_round_trips_through_scaled_weights() {
        let text = r#"
[space]
weights = [0.5, 0.5]

[norms.lor]
variant = "lorentz"
weights = [2.0, 1.5]
p = 1.0
sandwich = true
"#;
        let spec = LatticeSpec::from_toml_str(text).unwrap();
        let (_, norm) = spec.build_norm("lor").unwrap();
        // Exporting emits the already-scaled weights without the flag.
        let exported = LatticeSpec::from_named_norm("lor", &norm);
        let (_, norm2) = exported.build_norm("lor").unwrap();
        assert_eq!(norm.variant(), norm2.variant());
    }
}
