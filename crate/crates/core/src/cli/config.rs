//! Run configuration: a flat TOML file merged with command-line flags
//! (flags win) and defaults.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::covariance::{KernelSpec, SpatialParams};
use crate::error::{Error, Result};
use crate::inference::{ModelSpec, SamplerConfig};
use crate::simulation::SimulationSpec;
use crate::spacetime::{TemporalMode, Transition};

/// Keys accepted in the configuration file. Paths are relative to the
/// file's directory.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub network: Option<PathBuf>,
    pub sites: Option<PathBuf>,
    pub pred_sites: Option<PathBuf>,
    pub obs: Option<PathBuf>,
    pub preds: Option<PathBuf>,
    pub draws: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,

    pub response: Option<String>,
    pub covariates: Option<Vec<String>>,
    pub time_column: Option<String>,
    pub kernels: Option<Vec<String>>,
    pub mode: Option<String>,

    pub iter: Option<usize>,
    pub warmup: Option<usize>,
    pub chains: Option<usize>,
    pub thin: Option<usize>,
    pub refresh: Option<usize>,
    pub adapt_window: Option<usize>,
    pub init_scale: Option<f64>,
    pub range_upper: Option<f64>,
    pub sd_upper: Option<f64>,
    pub beta_var: Option<f64>,

    pub nsamples: Option<usize>,
    pub chunk_size: Option<usize>,
    pub noise: Option<bool>,
    pub threshold: Option<f64>,
    pub level: Option<f64>,

    pub n_segments: Option<usize>,
    pub obs_spacing: Option<f64>,
    pub pred_spacing: Option<f64>,

    pub sim_beta: Option<Vec<f64>>,
    pub sim_kernels: Option<Vec<String>>,
    pub sigma2_u: Option<f64>,
    pub alpha_u: Option<f64>,
    pub sigma2_d: Option<f64>,
    pub alpha_d: Option<f64>,
    pub sigma2_e: Option<f64>,
    pub alpha_e: Option<f64>,
    pub sigma2_0: Option<f64>,
    pub phi: Option<Vec<f64>>,
    pub extra_noise_sd: Option<f64>,
    pub n_times: Option<usize>,
    pub missing_rate: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg: FileConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.network,
            &mut cfg.sites,
            &mut cfg.pred_sites,
            &mut cfg.obs,
            &mut cfg.preds,
            &mut cfg.draws,
            &mut cfg.predictions,
            &mut cfg.truth,
            &mut cfg.out_dir,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

/// Command-line overrides (all optional).
#[derive(Debug, Default, Clone, clap::Args)]
pub struct Flags {
    /// Stream network CSV (rid,to_rid,length,afv)
    #[arg(long)]
    pub network: Option<PathBuf>,
    /// Observed sites CSV (locID,rid,upDist,x,y)
    #[arg(long)]
    pub sites: Option<PathBuf>,
    /// Prediction sites CSV
    #[arg(long)]
    pub pred_sites: Option<PathBuf>,
    /// Observation panel CSV
    #[arg(long)]
    pub obs: Option<PathBuf>,
    /// Prediction grid CSV
    #[arg(long)]
    pub preds: Option<PathBuf>,
    /// Posterior draws CSV (defaults to <out-dir>/draws.csv)
    #[arg(long)]
    pub draws: Option<PathBuf>,
    /// Predictive draws CSV (defaults to <out-dir>/predictions.csv)
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Truth panel CSV for scoring
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// TOML configuration file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub iter: Option<usize>,
    #[arg(long)]
    pub warmup: Option<usize>,
    #[arg(long)]
    pub chains: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    /// Posterior draws used for prediction
    #[arg(long)]
    pub nsamples: Option<usize>,
    /// Prediction locations per block
    #[arg(long)]
    pub chunk_size: Option<usize>,
    /// Exceedance threshold
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Report sampler progress every N iterations (0 = quiet)
    #[arg(long)]
    pub refresh: Option<usize>,
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub network: Option<PathBuf>,
    pub sites: Option<PathBuf>,
    pub pred_sites: Option<PathBuf>,
    pub obs: Option<PathBuf>,
    pub preds: Option<PathBuf>,
    pub draws: PathBuf,
    pub predictions: PathBuf,
    pub truth: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub threads: usize,
    pub response: String,
    pub covariates: Option<Vec<String>>,
    pub time_column: String,
    pub model: ModelSpec,
    pub sampler: SamplerConfig,
    pub range_upper: Option<f64>,
    pub sd_upper: f64,
    pub beta_var: f64,
    pub nsamples: Option<usize>,
    pub chunk_size: usize,
    pub noise: bool,
    pub threshold: Option<f64>,
    pub level: f64,
    pub n_segments: usize,
    pub obs_spacing: f64,
    pub pred_spacing: f64,
    pub simulation: SimulationSpec,
}

fn kernels(names: &[String]) -> Result<Vec<KernelSpec>> {
    names.iter().map(|s| s.parse()).collect()
}

impl RunConfig {
    pub fn resolve(flags: &Flags) -> Result<Self> {
        let file = match &flags.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let pick = |flag: &Option<PathBuf>, cfg: &Option<PathBuf>| flag.clone().or_else(|| cfg.clone());
        let out_dir = pick(&flags.out_dir, &file.out_dir).unwrap_or_else(|| PathBuf::from("."));
        let seed = flags.seed.or(file.seed).unwrap_or(1);
        let threads = flags.threads.or(file.threads).unwrap_or(1);

        let kernel_names = file.kernels.clone().unwrap_or_else(|| vec!["Exponential.taildown".into()]);
        let mode: TemporalMode = file.mode.as_deref().unwrap_or("ar").parse()?;
        let model = ModelSpec::new(kernels(&kernel_names)?, mode)?;

        let d = SamplerConfig::default();
        let iter = flags.iter.or(file.iter).unwrap_or(d.iter);
        let sampler = SamplerConfig {
            iter,
            warmup: flags.warmup.or(file.warmup).unwrap_or(d.warmup),
            chains: flags.chains.or(file.chains).unwrap_or(d.chains),
            thin: flags.thin.or(file.thin).unwrap_or(d.thin),
            seed: derive_seed(seed, Purpose::Chains),
            init_scale: file.init_scale.unwrap_or(d.init_scale),
            adapt_window: file.adapt_window.unwrap_or(d.adapt_window),
            threads,
            refresh: flags.refresh.or(file.refresh).unwrap_or((iter / 10).max(1)),
            ..d
        };

        let b = SimulationSpec::benchmark(derive_seed(seed, Purpose::Simulation));
        let p = b.params;
        let sim_kernels = match &file.sim_kernels {
            Some(k) => kernels(k)?,
            None => b.kernels.clone(),
        };
        let transition = match file.phi.as_deref() {
            None => b.transition.clone(),
            Some([phi]) => Transition::Ar(*phi),
            Some(v) => Transition::Var(v.to_vec()),
        };
        let simulation = SimulationSpec {
            beta: file.sim_beta.clone().unwrap_or(b.beta.clone()),
            kernels: sim_kernels,
            params: SpatialParams {
                sigma2_u: file.sigma2_u.unwrap_or(p.sigma2_u),
                alpha_u: file.alpha_u.unwrap_or(p.alpha_u),
                sigma2_d: file.sigma2_d.unwrap_or(p.sigma2_d),
                alpha_d: file.alpha_d.unwrap_or(p.alpha_d),
                sigma2_e: file.sigma2_e.unwrap_or(p.sigma2_e),
                alpha_e: file.alpha_e.unwrap_or(p.alpha_e),
                sigma2_0: file.sigma2_0.unwrap_or(p.sigma2_0),
            },
            transition,
            extra_noise_sd: file.extra_noise_sd.unwrap_or(b.extra_noise_sd),
            n_times: file.n_times.unwrap_or(b.n_times),
            missing_rate: file.missing_rate.unwrap_or(b.missing_rate),
            seed: b.seed,
        };

        let level = file.level.unwrap_or(0.95);
        Ok(RunConfig {
            network: pick(&flags.network, &file.network),
            sites: pick(&flags.sites, &file.sites),
            pred_sites: pick(&flags.pred_sites, &file.pred_sites),
            obs: pick(&flags.obs, &file.obs),
            preds: pick(&flags.preds, &file.preds),
            draws: pick(&flags.draws, &file.draws).unwrap_or_else(|| out_dir.join("draws.csv")),
            predictions: pick(&flags.predictions, &file.predictions).unwrap_or_else(|| out_dir.join("predictions.csv")),
            truth: pick(&flags.truth, &file.truth),
            out_dir,
            seed,
            threads,
            response: file.response.clone().unwrap_or_else(|| "y".into()),
            covariates: file.covariates.clone(),
            time_column: file.time_column.clone().unwrap_or_else(|| "time".into()),
            model,
            sampler,
            range_upper: file.range_upper,
            sd_upper: file.sd_upper.unwrap_or(100.0),
            beta_var: file.beta_var.unwrap_or(1000.0),
            nsamples: flags.nsamples.or(file.nsamples),
            chunk_size: flags.chunk_size.or(file.chunk_size).unwrap_or(50),
            noise: file.noise.unwrap_or(true),
            threshold: flags.threshold.or(file.threshold),
            level,
            n_segments: file.n_segments.unwrap_or(150),
            obs_spacing: file.obs_spacing.unwrap_or(3.0),
            pred_spacing: file.pred_spacing.unwrap_or(0.3),
            simulation,
        })
    }

    /// A required path, or a configuration error naming the flag.
    pub fn require<'a>(&self, path: &'a Option<PathBuf>, flag: &str) -> Result<&'a PathBuf> {
        path.as_ref().ok_or_else(|| Error::Config(format!("missing --{flag}")))
    }
}

/// Independent uses of the root seed.
#[derive(Debug, Clone, Copy)]
pub enum Purpose {
    Network = 1,
    Simulation = 2,
    Chains = 3,
    Prediction = 4,
}

/// Split the root seed into a per-purpose seed.
pub fn derive_seed(root: u64, purpose: Purpose) -> u64 {
    use rand::{RngCore, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(purpose as u64);
    rng.next_u64()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "iter = 50\nwarmup = 20\nobs = \"data/obs.csv\"\nkernels = [\"Spherical.tailup\", \"Gaussian.Euclid\"]\nmode = \"var\"\n",
        )
        .unwrap();
        let flags = Flags { config: Some(path), warmup: Some(10), ..Default::default() };
        let rc = RunConfig::resolve(&flags).unwrap();
        assert_eq!(rc.sampler.iter, 50);
        assert_eq!(rc.sampler.warmup, 10);
        assert_eq!(rc.obs.unwrap(), dir.path().join("data/obs.csv"));
        assert_eq!(rc.model.kernels.len(), 2);
        assert_eq!(rc.model.mode, TemporalMode::Var);
    }

    #[test]
    fn unknown_key_is_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "iterations = 5\n").unwrap();
        let err = RunConfig::resolve(&Flags { config: Some(path), ..Default::default() }).unwrap_err();
        assert_eq!(err.category(), "config-error");
    }

    #[test]
    fn seeds_differ_by_purpose() {
        let a = derive_seed(7, Purpose::Chains);
        assert_eq!(a, derive_seed(7, Purpose::Chains));
        assert_ne!(a, derive_seed(7, Purpose::Prediction));
        assert_ne!(a, derive_seed(8, Purpose::Chains));
    }
}
