//! The trained artifact (policy plus critic) and its checkpoint mapping.

use std::collections::HashMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::TrainConfig;
use crate::critic::EnsembleCritic;
use crate::error::{Error, Result};
use crate::nn::checkpoint::{Manifest, NetworkEntry, NormEntry, ParamEntry};
use crate::nn::{Checkpoint, LayerKind, Normalization, ParamStore, Sequential};
use crate::policy::PolicyNet;

#[derive(Debug, Clone)]
pub struct Model {
    pub config: TrainConfig,
    pub policy: PolicyNet,
    pub critic: EnsembleCritic,
}

fn network_entry(seq: &Sequential) -> NetworkEntry {
    let normalization = seq
        .specs()
        .iter()
        .enumerate()
        .filter(|(_, s)| s.kind == LayerKind::InputNormalization)
        .filter_map(|(i, _)| {
            seq.normalization(i).map(|n| NormEntry { layer: i, mean: n.mean.clone(), std: n.std.clone() })
        })
        .collect();
    NetworkEntry { name: seq.name().to_owned(), layers: seq.specs().to_vec(), normalization }
}

impl Model {
    /// Freshly initialized networks, seeded from `config.seed`.
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let policy = PolicyNet::new(config.policy_config(), &mut rng)?;
        let critic = EnsembleCritic::new(config.critic_config(), &mut rng)?;
        Ok(Self { config, policy, critic })
    }

    fn sequentials(&self) -> Vec<&Sequential> {
        let mut out = self.policy.sequentials();
        out.extend(self.critic.networks().map(|n| &n.seq));
        out
    }

    fn stores(&self) -> Vec<&ParamStore> {
        let mut out = vec![&self.policy.store];
        out.extend(self.critic.networks().map(|n| &n.store));
        out
    }

    /// Rounds every parameter to `f32`, the precision a checkpoint keeps.
    pub fn quantize(&mut self) {
        self.policy.store.quantize_f32();
        for net in self.critic.networks_mut() {
            net.store.quantize_f32();
        }
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let mut params = Vec::new();
        let mut values = Vec::new();
        for store in self.stores() {
            for p in store.iter() {
                params.push(ParamEntry { name: p.name().to_owned(), shape: p.shape().to_vec() });
                values.push(p.value().iter().map(|v| *v as f32).collect());
            }
        }
        let manifest = Manifest {
            networks: self.sequentials().into_iter().map(network_entry).collect(),
            params,
            hyperparameters: serde_json::to_value(&self.config)?,
        };
        Checkpoint::new(manifest, values)
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let config: TrainConfig = serde_json::from_value(ckpt.manifest.hyperparameters.clone())
            .map_err(|e| Error::Checkpoint(format!("hyperparameters: {e}")))?;
        let mut model = Self::new(config)?;

        let expected: Vec<(String, Vec<_>)> = model
            .sequentials()
            .iter()
            .map(|s| (s.name().to_owned(), s.specs().to_vec()))
            .collect();
        if expected.len() != ckpt.manifest.networks.len() {
            return Err(Error::Checkpoint(format!(
                "{} networks stored, architecture has {}",
                ckpt.manifest.networks.len(),
                expected.len()
            )));
        }
        for ((name, specs), entry) in expected.iter().zip(&ckpt.manifest.networks) {
            if *name != entry.name || *specs != entry.layers {
                return Err(Error::Checkpoint(format!("network {} does not match architecture {name}", entry.name)));
            }
        }

        let mut seqs = model.policy.sequentials_mut();
        seqs.extend(model.critic.networks_mut().map(|n| &mut n.seq));
        for (seq, entry) in seqs.into_iter().zip(&ckpt.manifest.networks) {
            for norm in &entry.normalization {
                seq.set_normalization(norm.layer, Normalization { mean: norm.mean.clone(), std: norm.std.clone() })
                    .map_err(|e| Error::Checkpoint(format!("{}: {e}", entry.name)))?;
            }
        }

        let stored: HashMap<&str, (&ParamEntry, &[f32])> = ckpt
            .manifest
            .params
            .iter()
            .zip(&ckpt.values)
            .map(|(p, v)| (p.name.as_str(), (p, v.as_slice())))
            .collect();
        let mut stores = vec![&mut model.policy.store];
        stores.extend(model.critic.networks_mut().map(|n| &mut n.store));
        let mut used = 0;
        for store in stores {
            for id in store.ids().collect::<Vec<_>>() {
                let param = store.param(id);
                let (entry, values) = stored
                    .get(param.name())
                    .ok_or_else(|| Error::Checkpoint(format!("missing parameter {}", param.name())))?;
                if entry.shape != param.shape() {
                    return Err(Error::Checkpoint(format!(
                        "parameter {} has shape {:?}, expected {:?}",
                        entry.name,
                        entry.shape,
                        param.shape()
                    )));
                }
                if let Some(i) = values.iter().position(|v| !v.is_finite()) {
                    return Err(Error::Checkpoint(format!("parameter {}[{i}] is not finite", entry.name)));
                }
                for (dst, src) in store.value_mut(id).iter_mut().zip(values.iter()) {
                    *dst = f64::from(*src);
                }
                used += 1;
            }
        }
        if used != ckpt.manifest.params.len() {
            return Err(Error::Checkpoint(format!(
                "{} stored parameters, architecture uses {used}",
                ckpt.manifest.params.len()
            )));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint()?.save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> TrainConfig {
        TrainConfig { hidden: 8, members: 3, seed: 5, ..TrainConfig::default() }
    }

    #[test]
    fn checkpoint_round_trip_is_byte_identical() {
        let mut model = Model::new(tiny()).unwrap();
        model.critic.set_output_bias(12.5);
        let bytes = model.to_checkpoint().unwrap().encode().unwrap();
        let loaded = Model::from_checkpoint(&Checkpoint::decode(&bytes).unwrap()).unwrap();
        assert_eq!(loaded.to_checkpoint().unwrap().encode().unwrap(), bytes);
        model.quantize();
        assert_eq!(model.policy.store.max_abs_diff(&loaded.policy.store).unwrap(), 0.0);
    }

    #[test]
    fn mismatched_architecture_is_rejected() {
        let model = Model::new(tiny()).unwrap();
        let mut ckpt = model.to_checkpoint().unwrap();
        ckpt.manifest.hyperparameters["hidden"] = serde_json::json!(16);
        assert!(Model::from_checkpoint(&ckpt).is_err());

        let mut ckpt = model.to_checkpoint().unwrap();
        ckpt.manifest.params.pop();
        ckpt.values.pop();
        assert!(Model::from_checkpoint(&ckpt).is_err());
    }

    #[test]
    fn names_follow_member_convention() {
        let model = Model::new(tiny()).unwrap();
        let ckpt = model.to_checkpoint().unwrap();
        let names: Vec<&str> = ckpt.manifest.networks.iter().map(|n| n.name.as_str()).collect();
        for expected in ["q_0", "q_2", "q_tgt_0", "q_tgt_2", "v", "policy.trunk"] {
            assert!(names.contains(&expected), "{expected} missing from {names:?}");
        }
    }
}
