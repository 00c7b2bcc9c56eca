use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use packet2vec::embedding::load_embeddings;
use packet2vec::eval::evaluate;
use packet2vec::groundtruth::{label_capture, load_attack_records};
use packet2vec::packet_io::read_capture;
use packet2vec::pipeline::training::{
    build_dictionary, featurize_files, fit_classifier_files, flat_paths, label_files, load_trained,
    train_embedding_files, translate_files,
};
use packet2vec::pipeline::{
    bench, capture_stem, capture_stems, generate_synthetic_corpus, list_captures, run_inference,
    run_training, PipelineConfig, Split, SynthSpec, ThroughputReport,
};
use packet2vec::vocab::load_vocabulary;
use packet2vec::{Classifier, LabelVector, ScoreVector};

#[derive(Parser)]
#[command(
    name = "packet2vec",
    version,
    about = "Byte n-gram embeddings for packet classification"
)]
struct Cli {
    /// `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Configuration override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Inputs {
    /// Capture files or directories of `.pcap` files.
    #[arg(required = true)]
    captures: Vec<PathBuf>,
    /// Which captures to use, by position in sorted order.
    #[arg(long, default_value = "all")]
    split: Split,
}

impl Inputs {
    fn resolve(&self) -> Result<Vec<PathBuf>> {
        let mut all = Vec::new();
        for p in &self.captures {
            if p.is_dir() {
                all.extend(list_captures(p)?);
            } else {
                all.push(p.clone());
            }
        }
        let picked = self.split.select(&all);
        if picked.is_empty() {
            bail!("no captures selected");
        }
        Ok(picked)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic labelled corpus.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        files: usize,
        #[arg(long, default_value_t = 1000)]
        packets: usize,
        #[arg(long, default_value_t = 0.005)]
        malicious_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Count n-grams and write the dictionary.
    BuildVocab(Inputs),
    /// Write token streams for each capture.
    Translate(Inputs),
    /// Train embeddings over the translated captures in order.
    TrainEmbeddings {
        #[command(flatten)]
        inputs: Inputs,
        /// Continue from the existing embeddings file.
        #[arg(long)]
        resume: bool,
    },
    /// Write per-packet feature matrices.
    Featurize(Inputs),
    /// Write per-packet labels from an attack CSV.
    Label {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        attacks: PathBuf,
    },
    /// Fit the classifier over featurized, labelled captures.
    Train(Inputs),
    /// Every training phase in order.
    Run {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        attacks: PathBuf,
    },
    /// Score captures and report throughput.
    Predict(Inputs),
    /// Compare stored scores with labels and write curves.
    Evaluate {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        attacks: PathBuf,
    },
    /// Inference throughput at several thread counts.
    Bench {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
        threads: Vec<usize>,
    },
    /// Print the effective configuration.
    Config,
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => PipelineConfig::default(),
    };
    cfg.apply_overrides(&cli.overrides)?;
    cfg.validate()?;
    Ok(cfg)
}

fn load_model(cfg: &PipelineConfig) -> Result<Classifier> {
    let path = cfg.layout().model(cfg.classifier);
    Classifier::load(&path).with_context(|| format!("loading model {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    let layout = cfg.layout();
    match &cli.command {
        Command::Synth {
            out,
            files,
            packets,
            malicious_fraction,
            seed,
        } => {
            let spec = SynthSpec {
                files: *files,
                packets_per_file: *packets,
                malicious_fraction: *malicious_fraction,
                seed: *seed,
                ..SynthSpec::default()
            };
            let corpus = generate_synthetic_corpus(&spec, out)?;
            let malicious: usize = corpus.malicious_counts.iter().sum();
            println!(
                "wrote {} captures, {malicious} malicious packets, attacks in {}",
                corpus.captures.len(),
                corpus.attack_csv.display()
            );
        }
        Command::BuildVocab(inputs) => {
            let v = build_dictionary(&cfg, &inputs.resolve()?)?;
            println!("dictionary: {} n-grams of length {}", v.len(), v.n());
        }
        Command::Translate(inputs) => {
            let vocab = load_vocabulary(layout.dictionary())?;
            let flats = translate_files(&cfg, &vocab, &inputs.resolve()?)?;
            println!("translated {} captures", flats.len());
        }
        Command::TrainEmbeddings { inputs, resume } => {
            let vocab = load_vocabulary(layout.dictionary())?;
            let stems = capture_stems(&inputs.resolve()?)?;
            let initial = if *resume {
                Some(load_embeddings(layout.embeddings())?)
            } else {
                None
            };
            let (_, losses) =
                train_embedding_files(&cfg, &vocab, &flat_paths(&cfg, &stems)?, initial)?;
            for l in losses {
                println!(
                    "{}: {} steps, loss {:.4} -> {:.4}",
                    l.source, l.steps, l.first_loss, l.last_loss
                );
            }
        }
        Command::Featurize(inputs) => {
            let (_, emb) = load_trained(&cfg)?;
            let out = featurize_files(&cfg, &emb, &capture_stems(&inputs.resolve()?)?)?;
            println!("featurized {} captures", out.len());
        }
        Command::Label { inputs, attacks } => {
            let records = load_attack_records(attacks)?;
            let out = label_files(&cfg, &inputs.resolve()?, &records)?;
            println!("labelled {} captures", out.len());
        }
        Command::Train(inputs) => {
            let (model, fit) = fit_classifier_files(&cfg, &capture_stems(&inputs.resolve()?)?)?;
            print_fit(&model, fit.files, fit.positive_files, fit.fitted_files);
        }
        Command::Run { inputs, attacks } => {
            let r = run_training(&cfg, &inputs.resolve()?, attacks)?;
            println!("dictionary: {} n-grams", r.vocab_len);
            let model = Classifier::load(&r.model_path)?;
            print_fit(
                &model,
                r.fit.files,
                r.fit.positive_files,
                r.fit.fitted_files,
            );
        }
        Command::Predict(inputs) => {
            let (vocab, emb) = load_trained(&cfg)?;
            let model = load_model(&cfg)?;
            let mut total = ThroughputReport {
                workers: cfg.workers,
                ..Default::default()
            };
            for p in inputs.resolve()? {
                let (scores, r) = run_inference(&vocab, &emb, &model, &p, cfg.workers)?;
                let out = layout.scores(model.kind(), &capture_stem(&p)?);
                write(&out, scores.to_text())?;
                println!("{}", r.to_record());
                total.accumulate(&r);
            }
            print!("{}", total.to_table());
        }
        Command::Evaluate { inputs, attacks } => {
            let records = load_attack_records(attacks)?;
            let (mut scores, mut labels) = (Vec::new(), Vec::new());
            for p in inputs.resolve()? {
                let sp = layout.scores(cfg.classifier, &capture_stem(&p)?);
                let text = fs::read_to_string(&sp)
                    .with_context(|| format!("reading scores {}", sp.display()))?;
                let s = ScoreVector::from_text(&text)?;
                let y = label_capture(&read_capture(&p)?, &records);
                if s.len() != y.len() {
                    bail!(
                        "{}: {} scores for {} packets",
                        sp.display(),
                        s.len(),
                        y.len()
                    );
                }
                scores.extend(s.into_inner());
                labels.extend_from_slice(y.labels());
            }
            let curves = evaluate(
                &ScoreVector::new(scores),
                &LabelVector::new("evaluate", labels)?,
                &cfg.thresholds,
            )?;
            let dir = layout.eval_dir(cfg.classifier);
            curves.write_roc_csv(dir.join("roc.csv"))?;
            curves.write_pr_csv(dir.join("pr.csv"))?;
            write(&dir.join("operating_points.txt"), curves.operating_table())?;
            println!("{}", curves.summary_line());
            print!("{}", curves.operating_table());
        }
        Command::Bench { inputs, threads } => {
            let (vocab, emb) = load_trained(&cfg)?;
            let model = load_model(&cfg)?;
            let report = bench(&vocab, &emb, &model, &inputs.resolve()?, threads)?;
            print!("{}", report.to_table());
        }
        Command::Config => print!("{}", cfg.to_text()),
    }
    Ok(())
}

fn print_fit(model: &Classifier, files: usize, positive: usize, fitted: usize) {
    print!(
        "{}: {files} files, {positive} with malicious packets, {fitted} fitted",
        model.kind()
    );
    if let Classifier::RandomForest(m) = model {
        print!(", {} trees", m.trees().len());
    }
    println!();
}

fn write(path: &Path, text: String) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
