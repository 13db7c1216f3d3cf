use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mdcpe::io::{
    decode_checkpoint, decode_cube, decode_labels, generate_synthetic, load_labels,
    run_experiment, save_cube, save_labels, ExperimentConfig, Geometry, SyntheticSpec,
    CHECKPOINT_MAGIC, CUBE_MAGIC, LABEL_MAGIC, METRICS_FILE,
};
use mdcpe::metrics::{default_palette, render_map};
use mdcpe::{Error, Result};

#[derive(Parser)]
#[command(name = "mdcpe", version, about = "Spectral-spatial co-training for hyperspectral images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a config file. Any config key can be
    /// overridden with `--key value`.
    Run {
        config: PathBuf,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
        overrides: Vec<String>,
    },
    /// Write a synthetic scene to `<out>.hsic` and `<out>.hsil`.
    Generate {
        #[arg(long, default_value_t = 32)]
        height: usize,
        #[arg(long, default_value_t = 32)]
        width: usize,
        #[arg(long, default_value_t = 16)]
        bands: usize,
        #[arg(long, default_value_t = 4)]
        classes: usize,
        #[arg(long, default_value = "blocks")]
        geometry: String,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        /// Comma-separated relative class sizes, e.g. `10,1`.
        #[arg(long, value_delimiter = ',')]
        ratios: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        out: PathBuf,
    },
    /// Describe a cube, label or checkpoint file.
    Inspect { file: PathBuf },
    /// Render a label file as a PPM image.
    Render { labels: PathBuf, out: PathBuf },
}

fn parse_overrides(args: &[String]) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let key = arg.strip_prefix("--").ok_or_else(|| {
            Error::InvalidConfig(format!("expected `--key value`, got `{arg}`"))
        })?;
        match key.split_once('=') {
            Some((k, v)) => pairs.push((k.to_string(), v.to_string())),
            None => {
                let value = it
                    .next()
                    .ok_or_else(|| Error::InvalidConfig(format!("--{key} needs a value")))?;
                pairs.push((key.to_string(), value.clone()));
            }
        }
    }
    Ok(pairs)
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}

fn inspect(path: &Path) -> Result<()> {
    let bytes = read(path)?;
    let magic = bytes.get(..4).unwrap_or(&[]);
    if magic == CUBE_MAGIC {
        let cube = decode_cube(&bytes)?;
        let (lo, hi) = cube
            .values()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        println!("cube {}x{}x{} min={lo} max={hi}", cube.height(), cube.width(), cube.bands());
    } else if magic == LABEL_MAGIC {
        let field = decode_labels(&bytes)?;
        let k = field.num_classes();
        let mut counts = vec![0usize; k + 1];
        for &l in field.labels() {
            counts[l as usize] += 1;
        }
        println!("labels {}x{} classes={k}", field.height(), field.width());
        for (c, n) in counts.iter().enumerate() {
            println!("class {c}: {n}");
        }
    } else if magic == CHECKPOINT_MAGIC {
        let ck = decode_checkpoint(&bytes)?;
        println!("checkpoint with {} tensors", ck.tensors.len());
        for (k, v) in &ck.metadata {
            println!("{k} = {v}");
        }
        for (name, t) in &ck.tensors {
            println!("tensor {name} {:?}", t.shape());
        }
    } else {
        return Err(Error::InvalidInput(format!(
            "{}: unrecognized file (magic {:?})",
            path.display(),
            String::from_utf8_lossy(magic)
        )));
    }
    Ok(())
}

fn with_extension(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(ext);
    PathBuf::from(s)
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run { config, overrides } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            let pairs = parse_overrides(&overrides)?;
            cfg.apply_overrides(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
            let report = run_experiment(&cfg)?;
            println!(
                "oa={:.6} aa={:.6} kappa={:.6} best_iteration={} metrics={}",
                report.scores.oa,
                report.scores.aa,
                report.scores.kappa,
                report.state.best_iteration,
                report.output_dir.join(METRICS_FILE).display()
            );
        }
        Command::Generate { height, width, bands, classes, geometry, scale, noise, ratios, seed, out } => {
            let spec = SyntheticSpec {
                height,
                width,
                bands,
                classes,
                geometry: geometry.parse::<Geometry>()?,
                mean_scale: scale,
                noise,
                ratios,
            };
            let (cube, labels) = generate_synthetic(&spec, seed)?;
            let cube_path = with_extension(&out, ".hsic");
            let labels_path = with_extension(&out, ".hsil");
            save_cube(&cube, &cube_path)?;
            save_labels(&labels, &labels_path)?;
            println!("wrote {} and {}", cube_path.display(), labels_path.display());
        }
        Command::Inspect { file } => inspect(&file)?,
        Command::Render { labels, out } => {
            let field = load_labels(&labels)?;
            let image = render_map(&field, &default_palette(field.num_classes()))?;
            std::fs::write(&out, image).map_err(|e| Error::Io { path: out.clone(), source: e })?;
        }
    }
    Ok(())
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidConfig(_) => 2,
        Error::Format(_) => 3,
        Error::InsufficientClass { .. } => 4,
        Error::Io { .. } => 5,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let line = err.to_string().replace('\n', " ");
            eprintln!("error: {line}");
            ExitCode::from(exit_code(&err))
        }
    }
}
