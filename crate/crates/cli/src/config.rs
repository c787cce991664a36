//! JSON run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use nfl_core::noise::{parse_unit_rational, FamilyParams};
use nfl_core::{
    build_density, validate_system, Address, AddressPolicy, DensityFamily, DensityNoise, NoiseModel, System,
    TentNoise, TentVariant, TriValuedNoise,
};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub ratios: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig>,
    /// Tree depth for `tree` and `emit-intervals`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    /// Stages simulated per path.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    /// Last stage of the analytic tables, or the stage budget of `chaos`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_stage: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Grid points per stage of the density pipeline.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Dot-separated symbols, e.g. "1.2.1".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub address: Option<String>,
    /// "uniform", "cyclic" or "fixed".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum NoiseConfig {
    None,
    Trivalued {
        deltas: Vec<f64>,
    },
    Density {
        family: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        beta: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cut: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lower: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        upper: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        values: Option<Vec<f64>>,
        /// Points used to tabulate the family.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        resolution: Option<usize>,
    },
    Tent {
        epsilon: f64,
        x0: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        variant: Option<String>,
    },
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    /// sha256 of the configuration with keys in sorted order. The output
    /// path is left out so that the same run hashes the same wherever it goes.
    pub fn digest(&self) -> String {
        let value = serde_json::to_value(RunConfig { out: None, ..self.clone() }).expect("config serializes");
        let canonical = serde_json::to_string(&value).expect("value serializes");
        Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn system(&self) -> Result<System, CliError> {
        validate_system(&self.ratios).map_err(|e| CliError::Config(format!("ratios: {e}")))
    }

    pub fn noise(&self) -> Result<NoiseModel<f64>, CliError> {
        let field = |e: nfl_core::Error| CliError::Config(format!("noise: {e}"));
        Ok(match &self.noise {
            None | Some(NoiseConfig::None) => NoiseModel::Zero,
            Some(NoiseConfig::Trivalued { deltas }) => {
                NoiseModel::TriValued(TriValuedNoise::new(deltas.clone()).map_err(field)?)
            }
            Some(NoiseConfig::Density { .. }) => NoiseModel::Density(self.density_noise()?),
            Some(NoiseConfig::Tent { epsilon, x0, variant }) => {
                let x0 = parse_unit_rational(x0).map_err(|e| CliError::Config(format!("noise.x0: {e}")))?;
                let variant = parse_variant(variant.as_deref())?;
                NoiseModel::Tent(TentNoise::new(*epsilon, x0, variant).map_err(field)?)
            }
        })
    }

    pub fn trivalued(&self) -> Result<TriValuedNoise<f64>, CliError> {
        match self.noise()? {
            NoiseModel::TriValued(n) => Ok(n),
            _ => Err(CliError::Config("noise.type: this command needs \"trivalued\" noise".into())),
        }
    }

    pub fn density_noise(&self) -> Result<DensityNoise<f64>, CliError> {
        let Some(NoiseConfig::Density { family, beta, sigma, cut, lower, upper, values, resolution }) = &self.noise
        else {
            return Err(CliError::Config("noise.type: this command needs \"density\" noise".into()));
        };
        let params = FamilyParams {
            beta: *beta,
            sigma: *sigma,
            cut: *cut,
            lower: *lower,
            upper: *upper,
            values: values.clone(),
        };
        let fam = DensityFamily::from_name(family, &params).map_err(|e| CliError::Config(format!("noise.family: {e}")))?;
        let points = resolution.unwrap_or(nfl_core::noise::density::DEFAULT_RESOLUTION);
        let grid = build_density(&fam, points).map_err(|e| CliError::Config(format!("noise: {e}")))?;
        Ok(DensityNoise::shared(grid))
    }

    pub fn tent(&self) -> Result<TentNoise<f64>, CliError> {
        match self.noise()? {
            NoiseModel::Tent(n) => Ok(n),
            _ => Err(CliError::Config("noise.type: this command needs \"tent\" noise".into())),
        }
    }

    pub fn address(&self) -> Result<Option<Address>, CliError> {
        self.address
            .as_deref()
            .map(|a| a.parse::<Address>().map_err(|e| CliError::Config(format!("address: {e}"))))
            .transpose()
    }

    /// Address followed for `len` stages by the analytic tables: the
    /// configured address repeated, or symbol 1 throughout.
    pub fn table_address(&self, len: usize) -> Result<Address, CliError> {
        let pattern = match self.address()? {
            Some(a) if a.stage() > 0 => a.symbols().to_vec(),
            _ => vec![1],
        };
        let addr = Address::cyclic(&pattern, len);
        addr.check(self.ratios.len()).map_err(|e| CliError::Config(format!("address: {e}")))?;
        Ok(addr)
    }

    pub fn policy(&self, default: &str) -> Result<AddressPolicy, CliError> {
        let address = self.address()?;
        let policy = match self.policy.as_deref().unwrap_or(default) {
            "uniform" => AddressPolicy::UniformRandom,
            "cyclic" => AddressPolicy::Cyclic(match address {
                Some(a) if a.stage() > 0 => a.symbols().to_vec(),
                _ => vec![1],
            }),
            "fixed" => AddressPolicy::FixedSequence(
                address.ok_or_else(|| CliError::Config("address: the fixed policy needs an address".into()))?,
            ),
            other => {
                return Err(CliError::Config(format!(
                    "policy: unknown policy {other:?} (expected uniform, cyclic or fixed)"
                )))
            }
        };
        Ok(policy)
    }
}

pub fn parse_variant(s: Option<&str>) -> Result<TentVariant, CliError> {
    s.unwrap_or("collapse")
        .parse()
        .map_err(|e: nfl_core::Error| CliError::Config(format!("noise.variant: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unknown_keys() {
        let err = RunConfig::parse(r#"{"ratios":[0.5],"ratio":[1]}"#).unwrap_err();
        assert!(err.to_string().contains("ratio"), "{err}");
        let err = RunConfig::parse(r#"{"ratios":[0.5],"noise":{"type":"trivalued","deltas":[0.1],"x":1}}"#).unwrap_err();
        assert!(err.to_string().contains("unknown field"), "{err}");
        assert!(RunConfig::parse(r#"{"noise":{"type":"none"}}"#).unwrap_err().to_string().contains("ratios"));
    }

    #[test]
    fn digest_ignores_key_order() {
        let a = RunConfig::parse(r#"{"ratios":[0.5,0.5],"seed":3,"noise":{"type":"tent","epsilon":0.1,"x0":"1/7"}}"#).unwrap();
        let b = RunConfig::parse(r#"{"noise":{"x0":"1/7","epsilon":0.1,"type":"tent"},"seed":3,"ratios":[0.5,0.5]}"#).unwrap();
        assert_eq!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
        let c = RunConfig { seed: Some(4), ..a.clone() };
        assert_ne!(a.digest(), c.digest());
        let d = RunConfig { out: Some("x.csv".into()), ..a.clone() };
        assert_eq!(a.digest(), d.digest());
    }

    #[test]
    fn builds_models() {
        let c = RunConfig::parse(r#"{"ratios":[0.25,0.25],"noise":{"type":"trivalued","deltas":[0.1]}}"#).unwrap();
        assert_eq!(c.trivalued().unwrap().delta_max(), 0.1);
        assert!(c.tent().is_err());
        let c = RunConfig::parse(r#"{"ratios":[0.5],"noise":{"type":"density","family":"uniform","beta":1.5,"resolution":128}}"#).unwrap();
        assert_eq!(c.density_noise().unwrap().grid(1).len(), 128);
        let c = RunConfig::parse(r#"{"ratios":[0.5],"noise":{"type":"density","family":"cauchy"}}"#).unwrap();
        assert!(c.noise().unwrap_err().to_string().contains("noise.family"));
        let c = RunConfig::parse(r#"{"ratios":[1.5]}"#).unwrap();
        assert!(c.system().unwrap_err().to_string().contains("ratios"));
    }

    #[test]
    fn policies() {
        let c = RunConfig::parse(r#"{"ratios":[0.5,0.5],"address":"1.2"}"#).unwrap();
        assert_eq!(c.policy("uniform").unwrap(), AddressPolicy::UniformRandom);
        let c = RunConfig { policy: Some("cyclic".into()), ..c };
        assert_eq!(c.policy("uniform").unwrap(), AddressPolicy::Cyclic(vec![1, 2]));
        assert_eq!(c.table_address(3).unwrap().to_string(), "1.2.1");
        let c = RunConfig { policy: Some("zigzag".into()), ..c };
        assert!(c.policy("uniform").is_err());
    }
}
