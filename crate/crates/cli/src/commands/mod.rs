pub mod eval;
pub mod serve;
pub mod simulate;

use anyhow::Result;
use fcxl_core::pipeline::{BackendSpec, RemoteBackend};

use crate::exit;

/// Fails fast with the backend exit code when a remote endpoint does not
/// answer.
pub fn probe_remote(spec: &BackendSpec) -> Result<()> {
    if let BackendSpec::Remote { url, timeout, .. } = spec {
        RemoteBackend::new(url.clone(), *timeout)
            .probe()
            .map_err(|e| exit::coded(exit::BACKEND, anyhow::anyhow!("remote backend {url} unreachable: {e}")))?;
    }
    Ok(())
}
