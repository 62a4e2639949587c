use std::collections::BTreeMap;
use std::sync::Arc;

use axum::body::Body;
use axum::extract::{Path, State};
use axum::http::header;
use axum::response::Response;
use axum::routing::get;
use axum::{Json, Router};

use crate::error::{Error, ErrorCode, Result};
use crate::model::wire::{StoredContent, CONTENT_DURATION_HEADER, CONTENT_SHA256_HEADER};
use crate::model::{content_blob, sha256_hex, ContentItem};

#[derive(Debug, Clone)]
pub struct Blob {
    pub bytes: Arc<Vec<u8>>,
    pub sha256: String,
    pub duration_s: f64,
}

impl Blob {
    pub fn new(bytes: Vec<u8>, duration_s: f64) -> Self {
        let sha256 = sha256_hex(&bytes);
        Blob {
            bytes: Arc::new(bytes),
            sha256,
            duration_s,
        }
    }
}

/// The origin server: authoritative source of every content blob.
pub struct MediaServer {
    contents: BTreeMap<String, Blob>,
}

impl MediaServer {
    pub fn new(items: &[ContentItem]) -> Result<Self> {
        let mut contents = BTreeMap::new();
        for item in items {
            item.validate()?;
            let blob = Blob::new(content_blob(item)?, item.duration_s);
            if contents.insert(item.content_id.clone(), blob).is_some() {
                return Err(Error::new(
                    ErrorCode::InvalidConfig,
                    format!("duplicate content id {}", item.content_id),
                ));
            }
        }
        Ok(MediaServer { contents })
    }

    pub fn get_content(&self, content_id: &str) -> Result<Blob> {
        self.contents.get(content_id).cloned().ok_or_else(|| {
            Error::new(ErrorCode::ContentNotFound, format!("no content {content_id:?}"))
        })
    }

    pub fn listing(&self) -> Vec<StoredContent> {
        self.contents
            .iter()
            .map(|(id, b)| StoredContent {
                content_id: id.clone(),
                size_bytes: b.bytes.len() as u64,
                sha256: b.sha256.clone(),
            })
            .collect()
    }

    /// GET /contents, GET /contents/{id}
    pub fn router(self: &Arc<Self>) -> Router {
        Router::new()
            .route("/contents", get(list))
            .route("/contents/{id}", get(fetch))
            .with_state(self.clone())
    }
}

pub(crate) fn blob_response(blob: &Blob) -> Response {
    Response::builder()
        .header(header::CONTENT_TYPE, "application/octet-stream")
        .header(CONTENT_SHA256_HEADER, &blob.sha256)
        .header(CONTENT_DURATION_HEADER, blob.duration_s.to_string())
        .body(Body::from(blob.bytes.as_ref().clone()))
        .expect("static headers are valid")
}

async fn list(State(m): State<Arc<MediaServer>>) -> Json<Vec<StoredContent>> {
    Json(m.listing())
}

async fn fetch(State(m): State<Arc<MediaServer>>, Path(id): Path<String>) -> Result<Response> {
    Ok(blob_response(&m.get_content(&id)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn items() -> Vec<ContentItem> {
        vec![ContentItem {
            content_id: "c1".into(),
            size_bytes: 4096,
            duration_s: 12.0,
            blob_seed: 1,
        }]
    }

    #[test]
    fn known_content_hash_matches() {
        let m = MediaServer::new(&items()).unwrap();
        let a = m.get_content("c1").unwrap();
        assert_eq!(a.sha256, sha256_hex(&a.bytes));
        let b = m.get_content("c1").unwrap();
        assert_eq!(a.bytes, b.bytes);
    }

    #[test]
    fn unknown_content() {
        let m = MediaServer::new(&items()).unwrap();
        assert_eq!(m.get_content("zz").unwrap_err().code(), ErrorCode::ContentNotFound);
    }

    #[test]
    fn rejects_invalid_items() {
        let mut bad = items();
        bad[0].size_bytes = 0;
        assert_eq!(MediaServer::new(&bad).err().unwrap().code(), ErrorCode::InvalidContent);
        let mut dup = items();
        dup.push(dup[0].clone());
        assert!(MediaServer::new(&dup).is_err());
    }
}
