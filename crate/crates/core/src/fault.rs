//! Misbehaving endpoints for fault injection. Each counts the connection
//! attempts it receives.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use tokio::io::AsyncReadExt;
use tokio::net::TcpListener;
use tokio::task::{JoinHandle, JoinSet};

use crate::model::AccessInfo;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaultMode {
    /// Accepts and reads, never answers. Callers hit their timeout.
    BlackHole,
    /// Accepts and immediately closes. Callers see a transport error.
    Reset,
}

pub struct FaultEndpoint {
    addr: SocketAddr,
    attempts: Arc<AtomicUsize>,
    task: JoinHandle<()>,
}

impl FaultEndpoint {
    pub async fn start(mode: FaultMode) -> std::io::Result<Self> {
        Self::bind(mode, SocketAddr::from(([127, 0, 0, 1], 0))).await
    }

    pub async fn bind(mode: FaultMode, addr: SocketAddr) -> std::io::Result<Self> {
        let listener = TcpListener::bind(addr).await?;
        let addr = listener.local_addr()?;
        let attempts = Arc::new(AtomicUsize::new(0));
        let counter = attempts.clone();
        let task = tokio::spawn(async move {
            let mut held = JoinSet::new();
            loop {
                let Ok((mut sock, _)) = listener.accept().await else {
                    break;
                };
                counter.fetch_add(1, Ordering::SeqCst);
                match mode {
                    FaultMode::Reset => drop(sock),
                    FaultMode::BlackHole => {
                        held.spawn(async move {
                            let mut buf = [0u8; 4096];
                            while let Ok(n) = sock.read(&mut buf).await {
                                if n == 0 {
                                    break;
                                }
                            }
                        });
                    }
                }
            }
        });
        Ok(FaultEndpoint {
            addr,
            attempts,
            task,
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn access(&self, base_path: &str) -> AccessInfo {
        AccessInfo::http(self.addr, base_path)
    }

    pub fn attempts(&self) -> usize {
        self.attempts.load(Ordering::SeqCst)
    }
}

impl Drop for FaultEndpoint {
    fn drop(&mut self) {
        self.task.abort();
    }
}

/// An endpoint on which nothing listens: connections are refused.
pub async fn refused_endpoint() -> std::io::Result<AccessInfo> {
    let listener = TcpListener::bind(("127.0.0.1", 0)).await?;
    let addr = listener.local_addr()?;
    drop(listener);
    Ok(AccessInfo::http(addr, "/"))
}
