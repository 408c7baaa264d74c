use std::path::PathBuf;
use std::process::ExitCode;

use girg_cli::config::{parse_config, ConfigMap, ExperimentConfig, OutputFormat, Value};
use girg_cli::run::run_experiment;
use girg_cli::CliError;

const USAGE: &str = "\
girg - geometric inhomogeneous random graph experiment runner

USAGE:
    girg --config PATH [OPTIONS]

OPTIONS:
    --config PATH         experiment config (key=value lines or a JSON object)
    --seed N              override the master seed
    --trials N            override trials per grid point
    --out PATH            write the CSV/JSON output here (default: stdout)
    --workers N           worker threads (0 = all cores; falls back to
                          GIRG_WORKERS, then the config, then 0)
    --window-factor X     override the window factor (W = X * max R, X >= 2)
    --format csv|json     output format (default csv)
    --help                print this message

EXIT CODES:
    0 success, 1 acceptance-comparison failure, 2 config error, 3 regime error
";

struct Flags {
    config: Option<PathBuf>,
    seed: Option<u64>,
    trials: Option<u64>,
    out: Option<PathBuf>,
    workers: Option<usize>,
    window_factor: Option<f64>,
    format: Option<OutputFormat>,
}

fn parse_flags(args: &[String]) -> Result<Flags, CliError> {
    let mut flags = Flags {
        config: None,
        seed: None,
        trials: None,
        out: None,
        workers: None,
        window_factor: None,
        format: None,
    };
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let mut value = |name: &str| {
            it.next()
                .cloned()
                .ok_or_else(|| CliError::Config(format!("{name} requires a value")))
        };
        match arg.as_str() {
            "--config" => flags.config = Some(PathBuf::from(value("--config")?)),
            "--seed" => {
                flags.seed = Some(value("--seed")?.parse().map_err(|_| {
                    CliError::Config("--seed expects a non-negative integer".into())
                })?)
            }
            "--trials" => {
                flags.trials = Some(value("--trials")?.parse().map_err(|_| {
                    CliError::Config("--trials expects a positive integer".into())
                })?)
            }
            "--out" => flags.out = Some(PathBuf::from(value("--out")?)),
            "--workers" => {
                flags.workers = Some(value("--workers")?.parse().map_err(|_| {
                    CliError::Config("--workers expects a non-negative integer".into())
                })?)
            }
            "--window-factor" => {
                flags.window_factor = Some(value("--window-factor")?.parse().map_err(|_| {
                    CliError::Config("--window-factor expects a number".into())
                })?)
            }
            "--format" => {
                flags.format = Some(match value("--format")?.as_str() {
                    "csv" => OutputFormat::Csv,
                    "json" => OutputFormat::Json,
                    other => {
                        return Err(CliError::Config(format!("unknown format `{other}`")))
                    }
                })
            }
            "--help" | "-h" => {
                print!("{USAGE}");
                std::process::exit(0);
            }
            other => return Err(CliError::Config(format!("unknown flag `{other}`"))),
        }
    }
    Ok(flags)
}

fn apply_overrides(map: &mut ConfigMap, flags: &Flags) {
    if let Some(seed) = flags.seed {
        map.insert("seed".into(), Value::Num(seed as f64));
    }
    if let Some(trials) = flags.trials {
        map.insert("trials".into(), Value::Num(trials as f64));
    }
    if let Some(wf) = flags.window_factor {
        map.insert("window_factor".into(), Value::Num(wf));
    }
    // Precedence for workers: flag, then GIRG_WORKERS, then the config.
    if let Some(workers) = flags.workers {
        map.insert("workers".into(), Value::Num(workers as f64));
    } else if let Ok(env) = std::env::var("GIRG_WORKERS") {
        if let Ok(workers) = env.parse::<usize>() {
            map.insert("workers".into(), Value::Num(workers as f64));
        }
    }
    if let Some(out) = &flags.out {
        map.insert("out".into(), Value::Str(out.display().to_string()));
    }
    if let Some(format) = flags.format {
        map.insert(
            "format".into(),
            Value::Str(match format {
                OutputFormat::Csv => "csv".into(),
                OutputFormat::Json => "json".into(),
            }),
        );
    }
}

fn run() -> Result<bool, CliError> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.is_empty() {
        print!("{USAGE}");
        return Err(CliError::Config("--config is required".into()));
    }
    let flags = parse_flags(&args)?;
    let path = flags
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let text = std::fs::read_to_string(path)?;
    let mut map = parse_config(&text)?;
    apply_overrides(&mut map, &flags);
    let config = ExperimentConfig::from_map(&map)?;

    let report = run_experiment(&config)?;
    let payload = match config.format {
        OutputFormat::Csv => report.to_csv(),
        OutputFormat::Json => report.to_json(),
    };
    match &config.out {
        Some(path) => {
            std::fs::write(path, payload)?;
            print!("{}", report.summary());
        }
        None => {
            print!("{payload}");
            eprint!("{}", report.summary());
        }
    }
    Ok(report.passed)
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::from(0),
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
