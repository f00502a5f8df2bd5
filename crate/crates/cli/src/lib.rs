//! Experiment driver: configuration, named experiments and reproducible
//! CSV/JSON artifacts.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod rule;

use std::path::{Path, PathBuf};

use chrono::Utc;
use mmconc::sampling::{sample_gaussian, sample_haar_stiefel, sidecar_json, write_samples_csv, SamplerConfig};
use mmconc::Exec;

pub use config::{ConfigBuilder, Experiment, RunConfig};
pub use error::{CliError, ConfigError, Result};
pub use experiments::Outcome;

/// Runs `f` on a pool of `workers` threads, or on the global pool.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce(Exec) -> T + Send) -> Result<T> {
    #[cfg(feature = "parallel")]
    {
        if let Some(w) = workers {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| CliError::Io(std::io::Error::other(e)))?;
            return Ok(pool.install(|| f(Exec::Parallel)));
        }
        Ok(f(Exec::Parallel))
    }
    #[cfg(not(feature = "parallel"))]
    {
        if workers.is_some_and(|w| w > 1) {
            log::warn!("built without the parallel feature; running serially");
        }
        Ok(f(Exec::Serial))
    }
}

/// Runs an experiment and writes its files plus `manifest.json` under
/// `cfg.out`.
pub fn execute(experiment: Experiment, cfg: &RunConfig) -> Result<(Outcome, PathBuf)> {
    let started = Utc::now();
    let outcome = with_workers(cfg.workers, |exec| experiments::run(experiment, cfg, exec))??;
    let finished = Utc::now();
    let mut echo = cfg.clone();
    echo.experiment = Some(experiment);
    let manifest = output::RunManifest {
        experiment: experiment.name().to_string(),
        config: serde_json::to_value(&echo).expect("config serializes"),
        seed: cfg.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        started: output::timestamp(started),
        finished: output::timestamp(finished),
        input_digest: outcome.digest.clone(),
        files: Default::default(),
    };
    let path = output::write_outputs(&cfg.out, &outcome.files, manifest)?;
    Ok((outcome, path))
}

/// Writes raw samples as CSV and the sampler config as a JSON sidecar next
/// to it (`<out>.json`).
pub fn dump_samples(cfg: &SamplerConfig, haar: bool, out: &Path, workers: Option<usize>) -> Result<PathBuf> {
    let samples = with_workers(workers, |exec| {
        if haar {
            sample_haar_stiefel(cfg, exec)
        } else {
            sample_gaussian(cfg, exec)
        }
    })??;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut body = Vec::new();
    write_samples_csv(&mut body, cfg, &samples)?;
    std::fs::write(out, body)?;
    let mut sidecar = out.as_os_str().to_owned();
    sidecar.push(".json");
    let sidecar = PathBuf::from(sidecar);
    let mut json = sidecar_json(cfg);
    json.push('\n');
    std::fs::write(&sidecar, json)?;
    Ok(sidecar)
}
