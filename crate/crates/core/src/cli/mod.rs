//! Command-line front end: `generate-network`, `simulate`, `distances`,
//! `fit`, `predict`, `exceed` and `score`.

pub mod config;

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use crate::inference::{fit_with_progress, summarize_draws, write_summary_csv, PosteriorDraws, PriorSpec};
use crate::network::{build_distance_bundle, generate_network, load_network, write_sites, DistanceBundle, Site};
use crate::panel::Panel;
use crate::prediction::{krige_predict, summarize_predictions, KrigingSetup, PredictionDraws, PredictionRequest};
use crate::reporting::{exceedance_prob, score};
use crate::simulation::simulate_panel;

pub use config::{derive_seed, Flags, Purpose, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "streamnet", version, about = "Bayesian space-time models on stream networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random stream network with observation and prediction sites
    GenerateNetwork(Flags),
    /// Simulate a space-time panel on a network
    Simulate(Flags),
    /// Write distance, connectivity and weight matrices
    Distances(Flags),
    /// Fit the model by MCMC
    Fit(Flags),
    /// Krige predictions from posterior draws
    Predict(Flags),
    /// Exceedance probabilities from predictive draws
    Exceed(Flags),
    /// RMSPE and interval coverage against a truth panel
    Score(Flags),
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    std::fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn load_sites(rc: &RunConfig, with_preds: bool) -> Result<(crate::network::StreamNetwork, Vec<Site>, Vec<Site>)> {
    let net_path = rc.require(&rc.network, "network")?;
    let sites = rc.require(&rc.sites, "sites")?;
    let mut paths: Vec<&Path> = vec![sites];
    if with_preds {
        paths.push(rc.require(&rc.pred_sites, "pred-sites")?);
    }
    let (net, mut sets) = load_network(net_path, &paths)?;
    for w in net.warnings() {
        eprintln!("warning: {w}");
    }
    let preds = if with_preds { sets.pop().unwrap_or_default() } else { Vec::new() };
    let obs = sets.pop().unwrap_or_default();
    Ok((net, obs, preds))
}

/// Covariate columns: configured, or every column other than the ids, the
/// time column and the response.
fn covariates(rc: &RunConfig, path: &Path) -> Result<Vec<String>> {
    if let Some(c) = &rc.covariates {
        return Ok(c.clone());
    }
    let mut rdr = csv::Reader::from_reader(open(path)?);
    let skip = ["locID", "pid", rc.time_column.as_str(), rc.response.as_str()];
    Ok(rdr.headers()?.iter().filter(|h| !skip.contains(h)).map(str::to_string).collect())
}

fn read_obs(rc: &RunConfig) -> Result<Panel> {
    let path = rc.require(&rc.obs, "obs")?;
    let covs = covariates(rc, path)?;
    Panel::read_csv_with_time(open(path)?, Some(&rc.response), &covs, &rc.time_column)
}

fn prior_for(rc: &RunConfig, bundle: &DistanceBundle) -> Result<PriorSpec> {
    let mut prior = match rc.range_upper {
        Some(r) => PriorSpec { phi_bounds: (-1.0, 1.0), range_upper: r, sd_upper: 100.0, beta_var: 1000.0 },
        None => PriorSpec::from_bundle(bundle)?,
    };
    prior.sd_upper = rc.sd_upper;
    prior.beta_var = rc.beta_var;
    prior.validate()?;
    Ok(prior)
}

fn generate(rc: &RunConfig) -> Result<()> {
    let g = generate_network(rc.n_segments, derive_seed(rc.seed, Purpose::Network), rc.obs_spacing, rc.pred_spacing)?;
    g.network.write_csv(create(&rc.out_dir, "network.csv")?)?;
    write_sites(&g.obs, create(&rc.out_dir, "sites.csv")?)?;
    write_sites(&g.preds, create(&rc.out_dir, "pred_sites.csv")?)?;
    println!("{} segments, {} observation sites, {} prediction sites", g.network.len(), g.obs.len(), g.preds.len());
    Ok(())
}

fn simulate(rc: &RunConfig) -> Result<()> {
    let (net, obs, preds) = load_sites(rc, rc.pred_sites.is_some())?;
    let data = simulate_panel(&net, &obs, &preds, &rc.simulation)?;
    let y = Some(rc.response.as_str());
    data.observed.write_csv(create(&rc.out_dir, "obs.csv")?, y)?;
    data.observed_truth.write_csv(create(&rc.out_dir, "obs_truth.csv")?, y)?;
    if let Some(pt) = &data.prediction_truth {
        pt.write_csv(create(&rc.out_dir, "preds.csv")?, None)?;
        pt.write_csv(create(&rc.out_dir, "preds_truth.csv")?, y)?;
    }
    println!(
        "{} locations x {} times, {} masked",
        data.observed.n_sites(),
        data.observed.n_times(),
        data.masked.len()
    );
    Ok(())
}

fn sorted(mut sites: Vec<Site>) -> Vec<Site> {
    sites.sort_by_key(|s| s.loc_id);
    sites
}

fn distances(rc: &RunConfig) -> Result<()> {
    let (net, obs, preds) = load_sites(rc, rc.pred_sites.is_some())?;
    let obs = sorted(obs);
    let write_all = |b: &DistanceBundle, prefix: &str| -> Result<()> {
        for m in ["D", "H", "E", "W", "flow_con"] {
            b.write_matrix(m, create(&rc.out_dir, &format!("{prefix}{m}.csv"))?)?;
        }
        Ok(())
    };
    write_all(&build_distance_bundle(&net, &obs, &obs)?, "")?;
    if !preds.is_empty() {
        write_all(&build_distance_bundle(&net, &obs, &sorted(preds))?, "cross_")?;
    }
    Ok(())
}

fn fit(rc: &RunConfig) -> Result<()> {
    rc.sampler.validate()?;
    let (net, obs_sites, _) = load_sites(rc, false)?;
    let panel = read_obs(rc)?;
    let sites = panel.sites_in_order(&obs_sites)?;
    let bundle = build_distance_bundle(&net, &sites, &sites)?;
    let prior = prior_for(rc, &bundle)?;
    let report = |p: &crate::inference::Progress| {
        let phase = if p.warmup { "warmup" } else { "sampling" };
        eprintln!("chain {}: iteration {}/{} [{phase}]", p.chain, p.iter, p.total);
    };
    let draws = fit_with_progress(&panel, &rc.model, &prior, &bundle, &rc.sampler, &report)?;
    draws.write_csv(create(&rc.out_dir, "draws.csv")?)?;
    write_summary_csv(&summarize_draws(&draws)?, create(&rc.out_dir, "summary.csv")?)?;
    let mut acc = csv::Writer::from_writer(create(&rc.out_dir, "acceptance.csv")?);
    acc.write_record(["chain", "block", "rate"])?;
    for (c, ch) in draws.chains.iter().enumerate() {
        for (block, rate) in &ch.acceptance {
            acc.write_record([(c + 1).to_string(), block.clone(), rate.to_string()])?;
        }
    }
    acc.flush()?;
    if !panel.missing().is_empty() {
        PredictionDraws::from_imputed(&draws, &panel)?.write_csv(create(&rc.out_dir, "imputed.csv")?)?;
    }
    println!("{} chains x {} kept draws", draws.n_chains(), rc.sampler.kept());
    Ok(())
}

fn predict(rc: &RunConfig) -> Result<()> {
    let (net, obs_sites, pred_sites) = load_sites(rc, true)?;
    let obs = read_obs(rc)?;
    let preds_path = rc.require(&rc.preds, "preds")?;
    let pred = Panel::read_csv_with_time(open(preds_path)?, None, obs.covariate_names(), &rc.time_column)?;
    let os = obs.sites_in_order(&obs_sites)?;
    let ps = pred.sites_in_order(&pred_sites)?;
    let ob = build_distance_bundle(&net, &os, &os)?;
    let cb = build_distance_bundle(&net, &os, &ps)?;
    let draws = PosteriorDraws::read_csv(open(&rc.draws)?, rc.model.clone())?;
    let setup = KrigingSetup::new(&rc.model, &obs, &pred, &ob, &cb)?;
    let request = PredictionRequest {
        nsamples: rc.nsamples.unwrap_or(100.min(draws.len())),
        chunk_size: rc.chunk_size,
        loc_ids: None,
        seed: derive_seed(rc.seed, Purpose::Prediction),
        add_noise: rc.noise,
        threads: rc.threads,
    };
    let out = krige_predict(&draws, &setup, &request)?;
    out.write_csv(create(&rc.out_dir, "predictions.csv")?)?;
    crate::prediction::write_summary_csv(&summarize_predictions(&out), create(&rc.out_dir, "predictions_summary.csv")?)?;
    println!("{} cells x {} draws", out.cells.len(), out.n_draws());
    Ok(())
}

fn exceed(rc: &RunConfig) -> Result<()> {
    let threshold = rc.threshold.ok_or_else(|| Error::Config("missing --threshold".into()))?;
    let pred = PredictionDraws::read_csv(open(&rc.predictions)?)?;
    exceedance_prob(&pred, threshold)?.write_csv(create(&rc.out_dir, "exceedance.csv")?)
}

fn score_cmd(rc: &RunConfig) -> Result<()> {
    let pred = PredictionDraws::read_csv(open(&rc.predictions)?)?;
    let truth_path: &PathBuf = rc.require(&rc.truth, "truth")?;
    let covs = covariates(rc, truth_path)?;
    let truth = Panel::read_csv_with_time(open(truth_path)?, Some(&rc.response), &covs, &rc.time_column)?;
    let lookup: HashMap<(i64, i64), f64> = (0..truth.len())
        .filter_map(|i| truth.y()[i].map(|v| ((truth.loc_of_row(i), truth.time_of_row(i)), v)))
        .collect();
    let s = score(&pred, &lookup, rc.level)?;
    s.write_csv(create(&rc.out_dir, "score.csv")?)?;
    println!("n={} rmspe={} coverage={} (level {})", s.n, s.rmspe, s.coverage, s.level);
    Ok(())
}

/// Execute a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    let (flags, f): (&Flags, fn(&RunConfig) -> Result<()>) = match &cli.command {
        Command::GenerateNetwork(a) => (a, generate),
        Command::Simulate(a) => (a, simulate),
        Command::Distances(a) => (a, distances),
        Command::Fit(a) => (a, fit),
        Command::Predict(a) => (a, predict),
        Command::Exceed(a) => (a, exceed),
        Command::Score(a) => (a, score_cmd),
    };
    let rc = RunConfig::resolve(flags)?;
    f(&rc)?;
    std::io::stdout().flush()?;
    Ok(())
}

/// Process exit status for an error category.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => 2,
        Error::Input(_) | Error::Csv(_) => 3,
        Error::Network(_) => 4,
        Error::Numerical(_) => 5,
        Error::Io(_) => 6,
    }
}
