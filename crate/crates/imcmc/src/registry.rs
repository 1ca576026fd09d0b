//! Stable string ids for the zoo, shared by the command line and the
//! Python bindings: kernels ready to run, and reference marginals to
//! compare sample streams against. Unknown ids are rejected with the list
//! of known ones, so a typo fails loudly instead of running the wrong
//! experiment.

use std::collections::BTreeMap;

use crate::addr;
use crate::addr::Address;
use crate::kernel::{CheckMode, KernelSpec};
use crate::oracle::{enumerate_model, normalized_distribution, OracleError};
use crate::value::Value;
use crate::zoo;

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("unknown kernel `{id}`; known kernels: {known}")]
    UnknownKernel { id: String, known: String },
    #[error("unknown oracle `{id}`; known oracles: {known}")]
    UnknownOracle { id: String, known: String },
    #[error("building oracle `{id}`: {source}")]
    OracleFailed {
        id: String,
        #[source]
        source: OracleError,
    },
}

fn kernel_builders() -> BTreeMap<&'static str, fn() -> KernelSpec> {
    fn toy_split_merge() -> KernelSpec {
        zoo::toy_split_merge_kernel(&zoo::toy_benchmark_dataset())
    }
    fn toy_walk() -> KernelSpec {
        zoo::toy_walk_kernel(&zoo::toy_benchmark_dataset(), 0.5)
    }
    fn gmm_split_merge() -> KernelSpec {
        zoo::gmm_split_merge_kernel(&zoo::gmm_dataset())
    }
    fn gmm_cluster_swap() -> KernelSpec {
        zoo::gmm_cluster_swap_kernel(&zoo::gmm_dataset())
    }
    fn gp_subtree() -> KernelSpec {
        let (xs, ys) = zoo::gp_dataset();
        zoo::gp_structure_kernel(&xs, &ys, zoo::WalkKind::Geometric)
    }
    fn gp_subtree_uniform() -> KernelSpec {
        let (xs, ys) = zoo::gp_dataset();
        zoo::gp_structure_kernel(&xs, &ys, zoo::WalkKind::Uniform)
    }
    fn gp_noise_walk() -> KernelSpec {
        let (xs, ys) = zoo::gp_dataset();
        zoo::gp_noise_walk_kernel(&xs, &ys)
    }
    fn hmc_std_normal() -> KernelSpec {
        zoo::hmc_standard_normal_kernel(0.3, 5)
    }
    fn hmc_no_negation() -> KernelSpec {
        zoo::hmc_no_negation_kernel(0.3, 5)
    }
    fn subregion_bug() -> KernelSpec {
        zoo::subregion_bug_kernel(CheckMode::Off)
    }
    fn toy_sqrt_merge() -> KernelSpec {
        zoo::toy_sqrt_merge_kernel(&zoo::toy_smoke_dataset())
    }
    fn toy_misspelled() -> KernelSpec {
        zoo::toy_misspelled_kernel(&zoo::toy_smoke_dataset())
    }

    BTreeMap::from([
        ("toy-split-merge", toy_split_merge as fn() -> KernelSpec),
        ("toy-walk", toy_walk),
        ("gmm-split-merge", gmm_split_merge),
        ("gmm-cluster-swap", gmm_cluster_swap),
        ("gp-subtree", gp_subtree),
        ("gp-subtree-uniform", gp_subtree_uniform),
        ("gp-noise-walk", gp_noise_walk),
        ("hmc-std-normal", hmc_std_normal),
        ("hmc-no-negation", hmc_no_negation),
        ("flip", zoo::flip_kernel),
        ("two-site", zoo::two_site_kernel),
        ("categorical-walk", zoo::categorical_walk_kernel),
        ("subregion-bug", subregion_bug),
        ("toy-sqrt-merge", toy_sqrt_merge),
        ("bd-end-only", zoo::bd_end_only_kernel),
        ("toy-misspelled", toy_misspelled),
    ])
}

/// Every registered kernel id, sorted.
pub fn kernel_ids() -> Vec<&'static str> {
    kernel_builders().into_keys().collect()
}

/// Builds the kernel registered under `id` on its standing dataset.
pub fn build_kernel(id: &str) -> Result<KernelSpec, RegistryError> {
    let builders = kernel_builders();
    match builders.get(id) {
        Some(build) => Ok(build()),
        None => Err(RegistryError::UnknownKernel {
            id: id.to_string(),
            known: kernel_ids().join(", "),
        }),
    }
}

/// A reference marginal over one discrete address: what a correct chain's
/// empirical distribution at that address must converge to. Labels are the
/// canonical JSON rendering of the value, which is also how sample streams
/// are bucketed.
#[derive(Debug, Clone)]
pub struct OracleMarginal {
    pub address: Address,
    pub support: Vec<(String, f64)>,
}

impl OracleMarginal {
    /// Probability of `label`, zero if absent from the support.
    pub fn prob(&self, label: &str) -> f64 {
        self.support
            .iter()
            .find(|(l, _)| l == label)
            .map_or(0.0, |(_, p)| *p)
    }
}

fn label(v: &Value) -> String {
    v.to_json().to_string()
}

/// Marginal of `address` under a model's enumerated posterior.
fn enumerated_marginal(
    id: &str,
    spec: &KernelSpec,
    address: Address,
) -> Result<OracleMarginal, RegistryError> {
    let states = enumerate_model(&spec.model, &spec.observations, 1e-12).map_err(|source| {
        RegistryError::OracleFailed { id: id.to_string(), source }
    })?;
    let pi = normalized_distribution(&states);
    let mut support: BTreeMap<String, f64> = BTreeMap::new();
    for ((state, _), p) in states.iter().zip(pi) {
        let v = state
            .get(&address)
            .unwrap_or_else(|| panic!("enumerated state lacks `{address}`"));
        *support.entry(label(v)).or_insert(0.0) += p;
    }
    Ok(OracleMarginal { address, support: support.into_iter().collect() })
}

/// Every registered oracle id, sorted.
pub fn oracle_ids() -> Vec<&'static str> {
    vec!["coin", "four-state", "three-state", "toy-k", "two-site-b"]
}

/// Builds the reference marginal registered under `id`.
///
/// `toy-k` is the model-count posterior of the toy benchmark run, computed
/// in closed form; the rest are exact enumerations of the small discrete
/// models.
pub fn build_oracle(id: &str) -> Result<OracleMarginal, RegistryError> {
    match id {
        "toy-k" => {
            let p2 = crate::oracle::toy_exact_posterior(&zoo::toy_benchmark_dataset());
            Ok(OracleMarginal {
                address: addr!("k"),
                support: vec![
                    (label(&Value::int(1)), 1.0 - p2),
                    (label(&Value::int(2)), p2),
                ],
            })
        }
        "coin" => enumerated_marginal(id, &zoo::flip_kernel(), addr!("coin")),
        "three-state" => enumerated_marginal(id, &zoo::categorical_walk_kernel(), addr!("v")),
        "four-state" => {
            enumerated_marginal(id, &zoo::subregion_bug_kernel(CheckMode::Off), addr!("v"))
        }
        "two-site-b" => enumerated_marginal(id, &zoo::two_site_kernel(), addr!("b")),
        _ => Err(RegistryError::UnknownOracle {
            id: id.to_string(),
            known: oracle_ids().join(", "),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn every_kernel_id_builds() {
        for id in kernel_ids() {
            let spec = build_kernel(id).unwrap();
            assert!(!spec.name.is_empty());
        }
    }

    #[test]
    fn unknown_ids_list_the_alternatives() {
        let err = build_kernel("no-such").unwrap_err().to_string();
        assert!(err.contains("toy-split-merge") && err.contains("flip"), "{err}");
        let err = build_oracle("no-such").unwrap_err().to_string();
        assert!(err.contains("toy-k") && err.contains("coin"), "{err}");
    }

    #[test]
    fn oracle_marginals_are_distributions() {
        for id in oracle_ids() {
            let m = build_oracle(id).unwrap();
            let total: f64 = m.support.iter().map(|(_, p)| p).sum();
            assert_relative_eq!(total, 1.0, epsilon = 1e-9);
            assert!(m.support.iter().all(|(_, p)| *p >= 0.0));
        }
    }

    #[test]
    fn coin_marginal_is_the_prior() {
        let m = build_oracle("coin").unwrap();
        assert_relative_eq!(m.prob("{\"tag\":\"d\",\"v\":false}"), 0.7, epsilon = 1e-12);
        assert_relative_eq!(m.prob("{\"tag\":\"d\",\"v\":true}"), 0.3, epsilon = 1e-12);
    }

    #[test]
    fn two_site_b_marginal_mixes_the_conditionals() {
        // P(b) = 0.6·bern(0.3) + 0.4·bern(0.8): exactly half and half.
        let m = build_oracle("two-site-b").unwrap();
        assert_relative_eq!(m.prob("{\"tag\":\"d\",\"v\":true}"), 0.5, epsilon = 1e-12);
    }
}
