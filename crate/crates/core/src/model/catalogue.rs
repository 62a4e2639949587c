use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, ErrorCode, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    CacheNode,
    AbrStreamingServer,
    Extensible,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::CacheNode => "cache-node",
            Role::AbrStreamingServer => "abr-streaming-server",
            Role::Extensible => "extensible",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How a backend starts a package. The in-process backend only understands
/// `factory`; `image` is reserved for container backends.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LaunchSpec {
    Factory { name: String },
    Image { reference: String },
}

/// Base paths of the two REST interfaces every microservice exposes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndpointSpec {
    pub control_path: String,
    pub data_path: String,
}

impl Default for EndpointSpec {
    fn default() -> Self {
        EndpointSpec {
            control_path: "/control".into(),
            data_path: "/data".into(),
        }
    }
}

/// A deployable microservice unit held in the component repository.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MicroservicePackage {
    pub package_id: String,
    pub role: Role,
    pub version: String,
    pub launch_spec: LaunchSpec,
    pub endpoint_spec: EndpointSpec,
}

impl MicroservicePackage {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::new(ErrorCode::InvalidConfig, msg));
        if self.package_id.is_empty() {
            return bad("package_id must be non-empty".into());
        }
        if !is_semver(&self.version) {
            return bad(format!(
                "package {}: version {:?} is not semver",
                self.package_id, self.version
            ));
        }
        for (which, path) in [
            ("control", &self.endpoint_spec.control_path),
            ("data", &self.endpoint_spec.data_path),
        ] {
            if !path.starts_with('/') {
                return bad(format!(
                    "package {}: {which} path {path:?} must start with '/'",
                    self.package_id
                ));
            }
        }
        Ok(())
    }
}

fn is_semver(v: &str) -> bool {
    let core = v.split(['-', '+']).next().unwrap_or("");
    let parts: Vec<_> = core.split('.').collect();
    parts.len() == 3
        && parts
            .iter()
            .all(|p| !p.is_empty() && p.chars().all(|c| c.is_ascii_digit()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MicroserviceSpec {
    pub role: Role,
    pub package_id: String,
    #[serde(default)]
    pub config: BTreeMap<String, String>,
}

/// Catalogue entry: what a component offers and how it decomposes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CdnComponentType {
    pub type_id: String,
    pub name: String,
    pub features: BTreeSet<String>,
    pub microservices: Vec<MicroserviceSpec>,
    pub plan_id: String,
}

impl CdnComponentType {
    pub fn summary(&self) -> ComponentSummary {
        ComponentSummary {
            type_id: self.type_id.clone(),
            name: self.name.clone(),
            features: self.features.clone(),
        }
    }
}

/// Public view of a catalogue entry; the decomposition stays provider-internal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentSummary {
    pub type_id: String,
    pub name: String,
    pub features: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CatalogueIssue {
    DanglingPackage { type_id: String, package_id: String },
    DanglingPlan { type_id: String, plan_id: String },
    DuplicateType { type_id: String },
    EmptyDecomposition { type_id: String },
}

/// Lists every inconsistency between a catalogue and the package and plan
/// repositories. An empty report means the catalogue is consistent.
pub fn validate_catalogue(
    catalogue: &[CdnComponentType],
    package_ids: &HashSet<String>,
    plan_ids: &HashSet<String>,
) -> Vec<CatalogueIssue> {
    let mut issues = Vec::new();
    let mut seen = HashSet::new();
    for ty in catalogue {
        if !seen.insert(ty.type_id.as_str()) {
            issues.push(CatalogueIssue::DuplicateType {
                type_id: ty.type_id.clone(),
            });
        }
        if ty.microservices.is_empty() {
            issues.push(CatalogueIssue::EmptyDecomposition {
                type_id: ty.type_id.clone(),
            });
        }
        for ms in &ty.microservices {
            if !package_ids.contains(&ms.package_id) {
                issues.push(CatalogueIssue::DanglingPackage {
                    type_id: ty.type_id.clone(),
                    package_id: ms.package_id.clone(),
                });
            }
        }
        if !plan_ids.contains(&ty.plan_id) {
            issues.push(CatalogueIssue::DanglingPlan {
                type_id: ty.type_id.clone(),
                plan_id: ty.plan_id.clone(),
            });
        }
    }
    issues
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abr_type(plan: &str) -> CdnComponentType {
        CdnComponentType {
            type_id: "abr-surrogate".into(),
            name: "ABR surrogate".into(),
            features: ["ABR-streaming".to_string(), "caching".to_string()].into(),
            microservices: vec![
                MicroserviceSpec {
                    role: Role::CacheNode,
                    package_id: "pkg-cache-node-1".into(),
                    config: BTreeMap::new(),
                },
                MicroserviceSpec {
                    role: Role::AbrStreamingServer,
                    package_id: "pkg-abr-server-1".into(),
                    config: BTreeMap::new(),
                },
            ],
            plan_id: plan.into(),
        }
    }

    fn ids(v: &[&str]) -> HashSet<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn empty_catalogue_is_consistent() {
        assert!(validate_catalogue(&[], &ids(&[]), &ids(&[])).is_empty());
    }

    #[test]
    fn abr_type_with_existing_packages_is_consistent() {
        let report = validate_catalogue(
            &[abr_type("abr-wire-v1")],
            &ids(&["pkg-cache-node-1", "pkg-abr-server-1"]),
            &ids(&["abr-wire-v1"]),
        );
        assert!(report.is_empty(), "{report:?}");
    }

    #[test]
    fn missing_plan_is_one_dangling_entry() {
        let report = validate_catalogue(
            &[abr_type("nope")],
            &ids(&["pkg-cache-node-1", "pkg-abr-server-1"]),
            &ids(&["abr-wire-v1"]),
        );
        assert_eq!(
            report,
            vec![CatalogueIssue::DanglingPlan {
                type_id: "abr-surrogate".into(),
                plan_id: "nope".into()
            }]
        );
    }

    #[test]
    fn duplicates_and_dangling_packages_reported() {
        let report = validate_catalogue(
            &[abr_type("p"), abr_type("p")],
            &ids(&["pkg-cache-node-1"]),
            &ids(&["p"]),
        );
        assert_eq!(report.len(), 3);
        assert!(report.contains(&CatalogueIssue::DuplicateType {
            type_id: "abr-surrogate".into()
        }));
    }

    #[test]
    fn role_wire_names() {
        assert_eq!(
            serde_json::to_string(&Role::AbrStreamingServer).unwrap(),
            "\"abr-streaming-server\""
        );
    }

    #[test]
    fn package_validation() {
        let mut pkg = MicroservicePackage {
            package_id: "pkg".into(),
            role: Role::CacheNode,
            version: "1.0.0".into(),
            launch_spec: LaunchSpec::Factory {
                name: "cache-node".into(),
            },
            endpoint_spec: EndpointSpec::default(),
        };
        assert!(pkg.validate().is_ok());
        pkg.version = "1.0".into();
        assert!(pkg.validate().is_err());
        pkg.version = "2.1.3-rc.1".into();
        assert!(pkg.validate().is_ok());
        pkg.endpoint_spec.data_path = "data".into();
        assert!(pkg.validate().is_err());
    }
}
