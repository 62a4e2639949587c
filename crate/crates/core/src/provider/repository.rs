use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, ErrorCode, Result};
use crate::model::{
    validate_catalogue, CatalogueIssue, CdnComponentType, ComponentSummary, MicroservicePackage,
    MicroserviceSpec,
};

/// On-disk form of the repository: packages plus component types.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CatalogueDocument {
    #[serde(default)]
    pub packages: Vec<MicroservicePackage>,
    #[serde(default)]
    pub types: Vec<CdnComponentType>,
}

/// Component repository: the catalogue of component types and the
/// microservice packages they decompose into.
#[derive(Debug, Clone, Default)]
pub struct ComponentRepository {
    types: Vec<CdnComponentType>,
    packages: BTreeMap<String, MicroservicePackage>,
}

impl ComponentRepository {
    pub fn new() -> Self {
        Self::default()
    }

    /// The catalogue shipped with the crate (`assets/catalogue.json`).
    pub fn seeded() -> Self {
        Self::from_json(include_str!("../../assets/catalogue.json"))
            .expect("bundled catalogue is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: CatalogueDocument = serde_json::from_str(text)?;
        let mut repo = ComponentRepository::new();
        for p in doc.packages {
            repo.store_package(p)?;
        }
        for t in doc.types {
            repo.register_type(t)?;
        }
        Ok(repo)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn store_package(&mut self, package: MicroservicePackage) -> Result<()> {
        package.validate()?;
        self.packages.insert(package.package_id.clone(), package);
        Ok(())
    }

    /// Adds a component type. Its packages must already be stored.
    pub fn register_type(&mut self, ty: CdnComponentType) -> Result<()> {
        if self.types.iter().any(|t| t.type_id == ty.type_id) {
            return Err(Error::new(
                ErrorCode::InvalidConfig,
                format!("duplicate component type {}", ty.type_id),
            ));
        }
        if ty.microservices.is_empty() {
            return Err(Error::new(
                ErrorCode::InvalidConfig,
                format!("component type {} has no microservices", ty.type_id),
            ));
        }
        if let Some(ms) = ty
            .microservices
            .iter()
            .find(|m| !self.packages.contains_key(&m.package_id))
        {
            return Err(Error::new(
                ErrorCode::PackageNotFound,
                format!("type {}: package {} not stored", ty.type_id, ms.package_id),
            ));
        }
        self.types.push(ty);
        Ok(())
    }

    /// Public view of every registered type, in registration order.
    pub fn get_catalogue(&self) -> Vec<ComponentSummary> {
        self.types.iter().map(CdnComponentType::summary).collect()
    }

    pub fn component_type(&self, type_id: &str) -> Result<&CdnComponentType> {
        self.types.iter().find(|t| t.type_id == type_id).ok_or_else(|| {
            Error::new(
                ErrorCode::UnknownComponentType,
                format!("no component type {type_id:?}"),
            )
        })
    }

    pub fn decompose(&self, type_id: &str) -> Result<(Vec<MicroserviceSpec>, String)> {
        let ty = self.component_type(type_id)?;
        Ok((ty.microservices.clone(), ty.plan_id.clone()))
    }

    pub fn fetch_package(&self, package_id: &str) -> Result<MicroservicePackage> {
        self.packages.get(package_id).cloned().ok_or_else(|| {
            Error::new(ErrorCode::PackageNotFound, format!("no package {package_id:?}"))
        })
    }

    pub fn remove_package(&mut self, package_id: &str) -> Option<MicroservicePackage> {
        self.packages.remove(package_id)
    }

    pub fn package_ids(&self) -> HashSet<String> {
        self.packages.keys().cloned().collect()
    }

    pub fn issues(&self, plan_ids: &HashSet<String>) -> Vec<CatalogueIssue> {
        validate_catalogue(&self.types, &self.package_ids(), plan_ids)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Role;
    use crate::workflow::PlanRepository;

    #[test]
    fn seeded_catalogue_is_consistent() {
        let repo = ComponentRepository::seeded();
        assert!(repo.issues(&PlanRepository::seeded().ids()).is_empty());
        let cat = repo.get_catalogue();
        assert!(cat[0].features.contains("ABR-streaming"));
    }

    #[test]
    fn summary_hides_decomposition() {
        let json = serde_json::to_string(&ComponentRepository::seeded().get_catalogue()).unwrap();
        assert!(!json.contains("pkg-"));
        assert!(!json.contains("plan"));
    }

    #[test]
    fn decompositions() {
        let repo = ComponentRepository::seeded();
        let (specs, plan) = repo.decompose("abr-surrogate").unwrap();
        let roles: Vec<Role> = specs.iter().map(|s| s.role).collect();
        assert_eq!(roles, vec![Role::CacheNode, Role::AbrStreamingServer]);
        assert_eq!(plan, "abr-wire-v1");
        let (specs, plan) = repo.decompose("cache-surrogate").unwrap();
        assert_eq!(specs.len(), 1);
        assert_eq!(plan, "cache-only-v1");
        assert_eq!(
            repo.decompose("nonexistent").unwrap_err().code(),
            ErrorCode::UnknownComponentType
        );
    }

    #[test]
    fn packages() {
        let repo = ComponentRepository::seeded();
        let a = repo.fetch_package("pkg-cache-node-1").unwrap();
        assert_eq!(a.role, Role::CacheNode);
        assert_eq!(a, repo.fetch_package("pkg-cache-node-1").unwrap());
        assert_eq!(repo.fetch_package("zz").unwrap_err().code(), ErrorCode::PackageNotFound);
    }

    #[test]
    fn empty_catalogue_and_round_trip() {
        let mut repo = ComponentRepository::new();
        assert!(repo.get_catalogue().is_empty());
        let seeded = ComponentRepository::seeded();
        for id in ["pkg-cache-node-1", "pkg-abr-server-1"] {
            repo.store_package(seeded.fetch_package(id).unwrap()).unwrap();
        }
        let ty = seeded.component_type("abr-surrogate").unwrap().clone();
        repo.register_type(ty.clone()).unwrap();
        assert_eq!(repo.get_catalogue(), vec![ty.summary()]);
        assert!(repo.register_type(ty).is_err());
    }
}
