use std::io::Write as _;
use std::time::Duration;

use anyhow::Result;
use fcxl_service::{AppState, ServiceConfig};

use super::probe_remote;
use crate::exit;
use crate::{with_timeout, ServeArgs};

pub fn run(a: ServeArgs) -> Result<()> {
    let backend = with_timeout(a.backend, a.remote_timeout)?;
    if let Some(dir) = &a.ui_dir {
        if !dir.is_dir() {
            return Err(exit::coded(
                exit::CONFIG,
                anyhow::anyhow!("--ui-dir {} is not a directory", dir.display()),
            ));
        }
    }
    if a.session_ttl == 0 || a.max_pixels == 0 {
        return Err(exit::coded(
            exit::CONFIG,
            anyhow::anyhow!("--session-ttl and --max-pixels must be positive"),
        ));
    }
    probe_remote(&backend)?;
    let cfg = ServiceConfig {
        backend,
        session_ttl: Duration::from_secs(a.session_ttl),
        max_pixels: a.max_pixels,
        cors_origin: a.cors_origin,
        ui_dir: a.ui_dir,
        ..Default::default()
    };

    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&a.bind).await.map_err(|e| {
            let code = if e.kind() == std::io::ErrorKind::AddrInUse {
                exit::PORT_BUSY
            } else {
                exit::CONFIG
            };
            exit::coded(code, anyhow::anyhow!("cannot bind {}: {e}", a.bind))
        })?;
        let addr = listener.local_addr()?;
        tracing::info!(%addr, backend = %cfg.backend, "listening");
        // scripts read the bound address from the first stdout line
        println!("listening on http://{addr}");
        std::io::stdout().flush()?;
        fcxl_service::run(listener, AppState::new(cfg), fcxl_service::shutdown_signal()).await?;
        tracing::info!("stopped");
        Ok(())
    })
}
