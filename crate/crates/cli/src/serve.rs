use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use adabal_core::dataset::manifest::DatasetManifest;
use adabal_core::dataset::{make_synthetic, Dataset, SyntheticSpec};
use adabal_service::AppState;

use crate::manifest::base_dir;
use crate::CliError;

/// Dataset offered when no manifest is given: 2000 points, clustered and
/// scattered anomalies.
pub fn demo_dataset() -> Dataset {
    let mut ds = make_synthetic(&SyntheticSpec::clustered_and_scattered(2000), 0).expect("built-in spec is valid");
    ds.name = "synthetic".into();
    ds
}

/// Datasets listed under `datasets` in `manifest` (a run manifest works too),
/// or the demo dataset.
pub fn load_datasets(manifest: Option<&Path>) -> Result<Vec<Dataset>, CliError> {
    let Some(path) = manifest else { return Ok(vec![demo_dataset()]) };
    let doc = DatasetManifest::from_path(path).map_err(CliError::config)?;
    if doc.datasets.is_empty() {
        return Err(CliError::Config(format!("{} lists no datasets", path.display())));
    }
    let base = base_dir(path);
    doc.datasets
        .iter()
        .map(|e| e.load(&base).map_err(|err| CliError::Data(format!("dataset '{}': {err}", e.name))))
        .collect()
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
    log::info!("shutting down");
}

/// The `serve` subcommand. `ready` receives the bound address before requests
/// are accepted.
pub fn serve(
    bind: &str,
    datasets: Vec<Dataset>,
    state_dir: PathBuf,
    ready: impl FnOnce(SocketAddr),
) -> Result<(), CliError> {
    let state = Arc::new(AppState::new(datasets, Some(state_dir)).map_err(CliError::config)?);
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(CliError::runtime)?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(bind)
            .await
            .map_err(|e| CliError::Runtime(format!("cannot bind {bind}: {e}")))?;
        ready(listener.local_addr().map_err(CliError::runtime)?);
        adabal_service::serve(listener, state, shutdown_signal()).await.map_err(CliError::runtime)
    })
}
