use std::fmt;
use std::hash::{Hash, Hasher};
use std::net::SocketAddr;

use serde::{Deserialize, Serialize};
use url::Url;

use crate::error::{Error, ErrorCode, Result};

/// A geographic area traffic is attributed to. Ids compare case-insensitively;
/// they are lowercased on construction and on decode. Decodes from either
/// `{"id", "display_name"}` or a bare id string.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawRegion")]
pub struct Region {
    pub id: String,
    pub display_name: String,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawRegion {
    Id(String),
    Full {
        id: String,
        #[serde(default)]
        display_name: String,
    },
}

impl TryFrom<RawRegion> for Region {
    type Error = String;

    fn try_from(raw: RawRegion) -> std::result::Result<Self, Self::Error> {
        let (id, display_name) = match raw {
            RawRegion::Id(id) => (id, String::new()),
            RawRegion::Full { id, display_name } => (id, display_name),
        };
        if id.trim().is_empty() {
            return Err("region id must be non-empty".into());
        }
        Ok(Region::new(id, display_name))
    }
}

impl Region {
    pub fn new(id: impl AsRef<str>, display_name: impl Into<String>) -> Self {
        let id = id.as_ref().trim().to_lowercase();
        let mut display_name = display_name.into();
        if display_name.is_empty() {
            display_name = id.clone();
        }
        Region { id, display_name }
    }

    /// Region with the display name equal to its id.
    pub fn id(id: impl AsRef<str>) -> Self {
        Region::new(id, "")
    }

    pub fn matches(&self, other: &str) -> bool {
        self.id.eq_ignore_ascii_case(other.trim())
    }
}

impl PartialEq for Region {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}

impl Eq for Region {}

impl Hash for Region {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.id.hash(state);
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id)
    }
}

/// Where and how to reach a service: an http URI plus an opaque credential.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AccessInfo {
    pub endpoint: String,
    #[serde(default)]
    pub credential: String,
}

impl AccessInfo {
    pub fn new(endpoint: impl Into<String>) -> Self {
        AccessInfo {
            endpoint: endpoint.into(),
            credential: String::new(),
        }
    }

    pub fn http(addr: SocketAddr, base_path: &str) -> Self {
        let base = base_path.trim_end_matches('/');
        AccessInfo::new(format!("http://{addr}{base}"))
    }

    pub fn parse(&self) -> Result<Url> {
        let url = Url::parse(&self.endpoint).map_err(|e| {
            Error::new(
                ErrorCode::InvalidConfig,
                format!("malformed endpoint {:?}: {e}", self.endpoint),
            )
        })?;
        if url.host_str().is_none() {
            return Err(Error::new(
                ErrorCode::InvalidConfig,
                format!("endpoint {:?} has no host", self.endpoint),
            ));
        }
        match url.port_or_known_default() {
            Some(p) if p >= 1 => Ok(url),
            _ => Err(Error::new(
                ErrorCode::InvalidConfig,
                format!("endpoint {:?} has no valid port", self.endpoint),
            )),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.parse().map(|_| ())
    }

    /// Joins `path` onto the endpoint's base path.
    pub fn url(&self, path: &str) -> String {
        let base = self.endpoint.trim_end_matches('/');
        if path.starts_with('/') {
            format!("{base}{path}")
        } else {
            format!("{base}/{path}")
        }
    }
}

impl fmt::Display for AccessInfo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.endpoint)
    }
}

/// High-level description of a Point of Deployment as advertised by its owner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoDDescriptor {
    pub pod_id: String,
    pub region: Region,
    pub capacity_total: u32,
    pub capacity_free: u32,
    pub access: AccessInfo,
}

impl PoDDescriptor {
    pub fn validate(&self) -> Result<()> {
        if self.capacity_free > self.capacity_total {
            return Err(Error::new(
                ErrorCode::InvalidConfig,
                format!(
                    "pod {}: capacity_free {} exceeds capacity_total {}",
                    self.pod_id, self.capacity_free, self.capacity_total
                ),
            ));
        }
        self.access.validate()
    }

    pub fn free_ratio(&self) -> f64 {
        if self.capacity_total == 0 {
            0.0
        } else {
            f64::from(self.capacity_free) / f64::from(self.capacity_total)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn region_decodes_from_string_or_object() {
        let a: Region = serde_json::from_str("\"Quebec\"").unwrap();
        let b: Region = serde_json::from_str(r#"{"id":"quebec","display_name":"Montreal"}"#).unwrap();
        assert_eq!(a, b);
        assert_eq!(b.display_name, "Montreal");
        assert!(serde_json::from_str::<Region>("\" \"").is_err());
    }

    #[test]
    fn region_ids_normalize() {
        let a = Region::new("Quebec", "Montreal area");
        let b: Region = serde_json::from_str(r#"{"id":"QUEBEC","display_name":"x"}"#).unwrap();
        assert_eq!(a, b);
        assert_eq!(b.id, "quebec");
        assert!(a.matches("QueBec"));
        assert!(serde_json::from_str::<Region>(r#"{"id":"  "}"#).is_err());
    }

    #[test]
    fn access_info_validation() {
        assert!(AccessInfo::new("http://127.0.0.1:8080/pod").validate().is_ok());
        assert!(AccessInfo::new("not a uri").validate().is_err());
        assert!(AccessInfo::new("http://127.0.0.1:0/").validate().is_err());
        assert!(AccessInfo::new("http://127.0.0.1:70000/").validate().is_err());
    }

    #[test]
    fn url_join() {
        let a = AccessInfo::new("http://127.0.0.1:9000/ctl/");
        assert_eq!(a.url("/peers"), "http://127.0.0.1:9000/ctl/peers");
        assert_eq!(a.url("health"), "http://127.0.0.1:9000/ctl/health");
        let addr: SocketAddr = "127.0.0.1:81".parse().unwrap();
        assert_eq!(AccessInfo::http(addr, "/").endpoint, "http://127.0.0.1:81");
    }

    #[test]
    fn pod_capacity_invariant() {
        let pod = PoDDescriptor {
            pod_id: "p".into(),
            region: Region::id("bc"),
            capacity_total: 2,
            capacity_free: 3,
            access: AccessInfo::new("http://127.0.0.1:1"),
        };
        assert_eq!(pod.validate().unwrap_err().code(), ErrorCode::InvalidConfig);
    }
}
