use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use clusterpolicy::analysis::{entropy_distribution, write_entropy_csv};
use clusterpolicy::driver::{
    baseline_clustergcn, final_train, read_assignments, search, write_run, FinalReport, Prepared,
    SearchConfig,
};
use clusterpolicy::graph::{
    generate_lfr, load_graph, save_features, save_graph, save_splits, svd_features, SplitMasks,
    SvdOptions,
};
use clusterpolicy::nn::GcnModel;
use clusterpolicy::trainer::evaluate;

#[derive(Parser, Debug)]
#[command(name = "clusterpolicy", version, about = "Edge-weight search for ClusterGCN")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct ConfigArgs {
    /// TOML configuration file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override one setting, e.g. `--set search.k=16`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Master seed; replaces every module seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<SearchConfig> {
        Ok(SearchConfig::resolve(self.config.as_deref(), &self.sets, self.seed)?)
    }

    /// Like `resolve`, but the base file is the run directory's
    /// `config.resolved` unless `-c` names another.
    fn resolve_in(&self, run: &Path) -> Result<SearchConfig> {
        let base = self.config.clone().unwrap_or_else(|| run.join("config.resolved"));
        SearchConfig::resolve(Some(&base), &self.sets, self.seed)
            .with_context(|| format!("reading {}", base.display()))
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate an LFR graph with SVD features and a stratified split.
    GenLfr {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Write SVD features of the graph in `data.dir`.
    SvdFeatures {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Run the edge-weight search and write a run directory.
    Search {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Train for `search.final_epochs` on a run's best clusters.
    TrainFinal {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(short, long)]
        run: PathBuf,
        /// Where to write the trained model (default RUN/final_gcn.ckpt).
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Train on a partition of the unit-weight graph.
    Baseline {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Per-cluster label entropies of one or more runs as CSV.
    Entropy {
        #[arg(short, long = "run", required = true)]
        runs: Vec<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Validation and test micro-F1 of a saved model.
    Eval {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(short, long)]
        run: PathBuf,
        /// Model checkpoint (default RUN/gcn.ckpt).
        #[arg(short, long)]
        model: Option<PathBuf>,
    },
}

fn save_model(path: &Path, model: &GcnModel) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    model.save(&mut w)?;
    w.flush()?;
    Ok(())
}

fn write_report(path: &Path, r: &FinalReport) -> Result<()> {
    let text = format!(
        "test_f1 = {:.6}\nbest_val_f1 = {:.6}\nbest_epoch = {}\n",
        r.test_f1, r.best_val_f1, r.best_epoch
    );
    fs::write(path, &text)?;
    print!("{text}");
    Ok(())
}

fn gen_lfr(cfg: &SearchConfig, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    let d = &cfg.data;
    let g = generate_lfr(&cfg.lfr)?;
    let opts = SvdOptions {
        seed: cfg.seeds.svd,
        ..SvdOptions::default()
    };
    let feats = svd_features(&g, d.svd_dim, opts)?;
    let g = g.with_features(feats)?;
    let splits = SplitMasks::stratified(g.labels(), d.train_frac, d.val_frac, cfg.seeds.split)?;
    save_graph(
        &g,
        &out.join(&d.edges),
        Some(&out.join(&d.features)),
        &out.join(&d.labels),
    )?;
    save_splits(&out.join(&d.splits), &splits)?;
    info!("{} nodes, {} edges written to {}", g.n(), g.num_edges(), out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenLfr { cfg, out } => gen_lfr(&cfg.resolve()?, &out),
        Command::SvdFeatures { cfg, out } => {
            let cfg = cfg.resolve()?;
            let d = &cfg.data;
            let g = load_graph(&d.path(&d.edges), None, &d.path(&d.labels), d.task)?;
            let opts = SvdOptions {
                seed: cfg.seeds.svd,
                ..SvdOptions::default()
            };
            save_features(&out, &svd_features(&g, d.svd_dim, opts)?)?;
            Ok(())
        }
        Command::Search { cfg, out } => {
            let cfg = cfg.resolve()?;
            let data = Prepared::load(&cfg)?;
            let outcome = search(&cfg, &data)?;
            write_run(&out, &cfg, &data, &outcome)?;
            println!(
                "best_val_f1 = {:.6}\nbest_step = {}",
                outcome.best_val, outcome.best_step
            );
            Ok(())
        }
        Command::TrainFinal { cfg, run, out } => {
            let cfg = cfg.resolve_in(&run)?;
            let data = Prepared::load(&cfg)?;
            let clusters = read_assignments(&run.join("best_clusters.tsv"), &data)?;
            let report = final_train(&clusters, &cfg, &data)?;
            save_model(&out.unwrap_or_else(|| run.join("final_gcn.ckpt")), &report.model)?;
            write_report(&run.join("final.txt"), &report)
        }
        Command::Baseline { cfg, out } => {
            let cfg = cfg.resolve()?;
            let data = Prepared::load(&cfg)?;
            let (clusters, report) = baseline_clustergcn(&cfg, &data)?;
            fs::create_dir_all(&out)?;
            let mut w = BufWriter::new(File::create(out.join("best_clusters.tsv"))?);
            for (local, c) in clusters.assign.iter().enumerate() {
                writeln!(w, "{}\t{c}", data.train.nodes[local])?;
            }
            w.flush()?;
            fs::write(out.join("config.resolved"), cfg.to_toml()?)?;
            save_model(&out.join("gcn.ckpt"), &report.model)?;
            write_report(&out.join("final.txt"), &report)
        }
        Command::Entropy { runs, out } => {
            let mut loaded = Vec::with_capacity(runs.len());
            for dir in &runs {
                let cfg = ConfigArgs::default().resolve_in(dir)?;
                let data = Prepared::load(&cfg)?;
                let clusters = read_assignments(&dir.join("best_clusters.tsv"), &data)?;
                loaded.push((clusters, data));
            }
            let pairs: Vec<_> = loaded
                .iter()
                .map(|(c, d)| (c.clone(), d.train.graph.labels()))
                .collect();
            let reports = entropy_distribution(&pairs)?;
            write_entropy_csv(BufWriter::new(File::create(&out)?), &reports)?;
            Ok(())
        }
        Command::Eval { cfg, run, model } => {
            let cfg = cfg.resolve_in(&run)?;
            let data = Prepared::load(&cfg)?;
            let path = model.unwrap_or_else(|| run.join("gcn.ckpt"));
            let model = GcnModel::load(&mut BufReader::new(
                File::open(&path).with_context(|| format!("opening {}", path.display()))?,
            ))?;
            for (name, sub) in [("val_f1", &data.val), ("test_f1", &data.test)] {
                let f1 = evaluate(&model, &sub.graph, &vec![true; sub.graph.n()])?;
                println!("{name} = {f1:.6}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
