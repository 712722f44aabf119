//! Command-line tasks, run directories and the dataset benchmark.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::backbone::Backbone;
use crate::error::{Error, Result};
use crate::trainer::{self, save_state, Problem, Session};
use crate::types::{validate_config, ImageTensor, LossBreakdown, Mask, QualityMetrics, RunConfig, RunReport, Task};
use crate::{io, masking, metrics};

pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

pub const CSV_COLUMNS: [&str; 8] = ["image", "task", "seed", "iterations", "ssim", "psnr", "masked_ssim", "wall_s"];

#[derive(Parser, Debug)]
#[command(name = "deepcfl", version, about = "Single-image restoration with contextual feature losses")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Commands,
}

#[derive(Subcommand, Debug)]
pub enum Commands {
    /// Extend an image whose border columns were removed.
    Outpaint {
        #[command(flatten)]
        run: RunArgs,
        /// Fraction of columns removed, split between both sides.
        #[arg(long)]
        fraction: Option<f64>,
    },
    /// Fill holes given by a mask file (black = missing).
    Inpaint {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        mask: Option<PathBuf>,
    },
    /// Restore randomly removed pixels, optionally under a word-cloud mask.
    Restore {
        #[command(flatten)]
        run: RunArgs,
        /// Percentage of pixels removed at random.
        #[arg(long)]
        random: Option<f64>,
        /// Word-cloud mask file combined with the random removal.
        #[arg(long)]
        wordcloud: Option<PathBuf>,
    },
    /// Re-synthesize an image at a new size.
    Resize {
        #[command(flatten)]
        run: RunArgs,
        /// Height and width factors, e.g. `2,1`.
        #[arg(long, value_delimiter = ',')]
        factor: Option<Vec<f64>>,
    },
    /// Run a task over every PNG in a directory.
    Bench(BenchArgs),
    /// Recompute metrics from saved images.
    Eval {
        #[arg(long)]
        restored: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        mask: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Clone, Default)]
pub struct RunArgs {
    #[arg(long)]
    pub image: PathBuf,
    /// Ground truth for metrics.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run directory.
    #[arg(long, default_value = "run")]
    pub out: PathBuf,
    /// TOML configuration; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Backbone weight file, or `random`.
    #[arg(long)]
    pub weights: Option<String>,
    #[arg(long)]
    pub emit_best: bool,
    #[arg(long)]
    pub metrics_on_composite: bool,
    /// Return the composited image as `restored.png`.
    #[arg(long)]
    pub composite_output: bool,
}

#[derive(Args, Debug, Clone)]
pub struct BenchArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_parser = parse_task)]
    pub task: Task,
    #[arg(long)]
    pub fraction: Option<f64>,
    #[arg(long)]
    pub random: Option<f64>,
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub factor: Option<Vec<f64>>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "bench")]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub weights: Option<String>,
    #[arg(long)]
    pub metrics_on_composite: bool,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
}

fn parse_task(s: &str) -> std::result::Result<Task, String> {
    match s {
        "outpaint" => Ok(Task::Outpaint),
        "inpaint" => Ok(Task::Inpaint),
        "restore_random" | "restore" => Ok(Task::RestoreRandom),
        "restore_wordcloud" => Ok(Task::RestoreWordcloud),
        "resize" => Ok(Task::Resize),
        other => Err(format!("unknown task {other}")),
    }
}

/// A fully resolved single-image job.
#[derive(Clone, Debug)]
pub struct Job {
    pub image: PathBuf,
    pub gt: Option<PathBuf>,
    pub out: PathBuf,
    pub config: RunConfig,
}

fn base_config(task: Task, path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => {
            let mut c = RunConfig::load(p)?;
            c.task = task;
            Ok(c)
        }
        None => Ok(RunConfig::new(task)),
    }
}

impl RunArgs {
    fn apply(&self, c: &mut RunConfig) {
        if let Some(i) = self.iters {
            c.iterations = i;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(w) = &self.weights {
            c.backbone_weights = w.clone();
        }
        c.emit_best |= self.emit_best;
        c.metrics_on_composite |= self.metrics_on_composite;
        c.composite_output |= self.composite_output;
    }

    fn job(&self, config: RunConfig) -> Job {
        Job {
            image: self.image.clone(),
            gt: self.gt.clone(),
            out: self.out.clone(),
            config,
        }
    }
}

fn factors(v: &Option<Vec<f64>>) -> Result<Option<[f64; 2]>> {
    match v.as_deref() {
        None => Ok(None),
        Some([h, w]) => Ok(Some([*h, *w])),
        Some(f) => Err(Error::Config(format!("--factor takes two values, got {}", f.len()))),
    }
}

/// Resolves a task subcommand into a validated job.
pub fn resolve_job(cmd: &Commands) -> Result<Job> {
    let (run, mut config) = match cmd {
        Commands::Outpaint { run, fraction } => {
            let mut c = base_config(Task::Outpaint, run.config.as_deref())?;
            c.mask_fraction = fraction.or(c.mask_fraction);
            (run, c)
        }
        Commands::Inpaint { run, mask } => {
            let mut c = base_config(Task::Inpaint, run.config.as_deref())?;
            c.mask_path = mask.clone().or(c.mask_path);
            (run, c)
        }
        Commands::Restore { run, random, wordcloud } => {
            let task = if wordcloud.is_some() {
                Task::RestoreWordcloud
            } else {
                Task::RestoreRandom
            };
            let mut c = base_config(task, run.config.as_deref())?;
            if let Some(r) = random {
                c.mask_fraction = Some(r / 100.0);
            }
            c.mask_path = wordcloud.clone().or(c.mask_path);
            (run, c)
        }
        Commands::Resize { run, factor } => {
            let mut c = base_config(Task::Resize, run.config.as_deref())?;
            c.resize_factor = factors(factor)?.or(c.resize_factor);
            (run, c)
        }
        _ => return Err(Error::Config("not a training subcommand".into())),
    };
    run.apply(&mut config);
    Ok(run.job(validate_config(config)?))
}

/// Builds the task mask for an `h x w` image.
pub fn build_mask(config: &RunConfig, dims: (usize, usize)) -> Result<Mask> {
    let (h, w) = dims;
    let file = || {
        config
            .mask_path
            .as_deref()
            .ok_or_else(|| Error::Config(format!("mask file required for {}", config.task)))
    };
    match config.task {
        Task::Outpaint => masking::make_outpaint_mask(h, w, config.mask_fraction.unwrap_or_default()),
        Task::RestoreRandom => masking::make_random_mask(h, w, 100.0 * config.mask_fraction.unwrap_or_default(), config.seed),
        Task::Inpaint => masking::load_mask(file()?, dims),
        Task::RestoreWordcloud => {
            let m = masking::load_mask(file()?, dims)?;
            match config.mask_fraction {
                Some(f) => masking::make_wordcloud_mask(&m, 100.0 * f, config.seed),
                None => Ok(m),
            }
        }
        Task::Resize => Ok(Mask::ones(h, w)),
    }
}

fn quality(out: &ImageTensor, gt: &ImageTensor, mask: Option<&Mask>) -> Result<QualityMetrics> {
    // Holes confined to the window border leave no region to score.
    let masked_ssim = match mask {
        Some(m) if m.zero_count() > 0 => match metrics::masked_ssim(out, gt, m) {
            Ok(v) => Some(v),
            Err(Error::Metric(msg)) => {
                log::warn!("masked SSIM skipped: {msg}");
                None
            }
            Err(e) => return Err(e),
        },
        _ => None,
    };
    Ok(QualityMetrics {
        psnr: metrics::psnr(out, gt)?,
        ssim: metrics::ssim(out, gt)?,
        masked_ssim,
    })
}

fn write_trace(trace: &[LossBreakdown], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    let fail = |e: csv::Error| Error::io(path, e.into());
    w.write_record(["iteration", "tl", "cfl", "cal_g", "cal_d", "cvl", "rl", "cyc"]).map_err(fail)?;
    for (i, b) in trace.iter().enumerate() {
        let row = [b.tl, b.cfl, b.cal_g, b.cal_d, b.cvl, b.rl, b.cyc];
        let mut rec = vec![i.to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(fail)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Trains one job and writes its run directory:
/// `config.echo`, `trace.csv`, `restored.png`, `composite.png` (restoration
/// only), `checkpoint.bin` and `report.json`.
pub fn execute(job: &Job) -> Result<RunReport> {
    let start = Instant::now();
    let config = &job.config;
    let image = io::load_image(&job.image)?;
    let gt = job.gt.as_deref().map(io::load_image).transpose()?;
    let backbone = Backbone::from_setting(&config.backbone_weights)?;
    let (problem, mask) = if config.task == Task::Resize {
        let f = config.resize_factor.expect("validated");
        let target = trainer::resize_target(image.dims(), f);
        (Problem::Resize { source: image, target }, None)
    } else {
        let mask = build_mask(config, image.dims())?;
        let source = masking::corrupt(&image, &mask)?;
        (Problem::Restore { source, mask: mask.clone() }, Some(mask))
    };
    let mut session = Session::new(problem, config, &backbone)?;
    session.run_to(config.iterations)?;

    fs::create_dir_all(&job.out).map_err(|e| Error::io(&job.out, e))?;
    let out = |name: &str| job.out.join(name);
    let (raw, mut report) = session.finish(0.0)?;
    let composite = session.composite(&raw)?;
    let primary = match (&composite, config.composite_output) {
        (Some(c), true) => c,
        _ => &raw,
    };
    io::save_image(primary, &out("restored.png"))?;
    report.outputs.restored = Some(out("restored.png"));
    if let Some(c) = &composite {
        io::save_image(c, &out("composite.png"))?;
        report.outputs.composite = Some(out("composite.png"));
    }
    if let Some(gt) = &gt {
        if gt.dims() != raw.dims() {
            return Err(Error::dims(
                format!("{}x{} ground truth", raw.height(), raw.width()),
                format!("{}x{}", gt.height(), gt.width()),
            ));
        }
        report.metrics = Some(quality(&raw, gt, mask.as_ref())?);
        if let Some(c) = &composite {
            report.composite_metrics = Some(quality(c, gt, mask.as_ref())?);
        }
    }
    config.save(&out("config.echo"))?;
    write_trace(&report.trace, &out("trace.csv"))?;
    report.outputs.trace = Some(out("trace.csv"));
    save_state(session.state(), &out("checkpoint.bin"))?;
    report.outputs.checkpoint = Some(out("checkpoint.bin"));
    report.wall_seconds = start.elapsed().as_secs_f64();
    let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(out("report.json"), json).map_err(|e| Error::io(out("report.json"), e))?;
    Ok(report)
}

pub fn summary_line(report: &RunReport) -> String {
    let last = report.trace.last().copied().unwrap_or_default();
    let mut s = format!("iterations={} tl={:.6} rl={:.6}", report.iterations, last.tl, last.rl);
    if let Some(m) = report.headline_metrics() {
        s += &format!(" ssim={:.4} psnr={:.2}", m.ssim, m.psnr);
        if let Some(ms) = m.masked_ssim {
            s += &format!(" masked_ssim={ms:.4}");
        }
    }
    s
}

/// One CSV row of a benchmark.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub image: String,
    pub task: String,
    pub seed: u64,
    pub iterations: usize,
    pub ssim: Option<f64>,
    pub psnr: Option<f64>,
    pub masked_ssim: Option<f64>,
    pub wall_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub dataset: String,
    pub task: String,
    pub images: usize,
    pub failures: Vec<String>,
    pub mean_ssim: Option<f64>,
    pub mean_psnr: Option<f64>,
    pub mean_masked_ssim: Option<f64>,
}

fn list_pngs(dir: &Path) -> Result<Vec<PathBuf>> {
    let rd = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out: Vec<PathBuf> = rd
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .collect();
    out.sort();
    if out.is_empty() {
        return Err(Error::Config(format!("no PNG images in {}", dir.display())));
    }
    Ok(out)
}

fn bench_config(args: &BenchArgs) -> Result<RunConfig> {
    let mut c = base_config(args.task, args.config.as_deref())?;
    if let Some(f) = args.fraction {
        c.mask_fraction = Some(f);
    }
    if let Some(r) = args.random {
        c.mask_fraction = Some(r / 100.0);
    }
    if args.mask.is_some() {
        c.mask_path = args.mask.clone();
    }
    c.resize_factor = factors(&args.factor)?.or(c.resize_factor);
    if let Some(i) = args.iters {
        c.iterations = i;
    }
    if let Some(s) = args.seed {
        c.seed = s;
    }
    if let Some(w) = &args.weights {
        c.backbone_weights = w.clone();
    }
    c.metrics_on_composite |= args.metrics_on_composite;
    validate_config(c)
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn row_for(image: &Path, config: &RunConfig, report: Option<&RunReport>) -> BenchRow {
    let m = report.and_then(RunReport::headline_metrics);
    BenchRow {
        image: stem(image),
        task: config.task.to_string(),
        seed: config.seed,
        iterations: config.iterations,
        ssim: m.map(|m| m.ssim),
        psnr: m.map(|m| m.psnr),
        masked_ssim: m.and_then(|m| m.masked_ssim),
        wall_s: report.map_or(0.0, |r| r.wall_seconds),
    }
}

fn read_report(dir: &Path) -> Result<RunReport> {
    let p = dir.join("report.json");
    let s = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    serde_json::from_str(&s).map_err(|e| Error::Decode {
        path: p,
        message: e.to_string(),
    })
}

/// Runs every image of the dataset, in `workers` child processes of `exe`
/// when more than one worker is requested.
pub fn run_benchmark(args: &BenchArgs, exe: Option<&Path>) -> Result<(Vec<BenchRow>, BenchSummary)> {
    let config = bench_config(args)?;
    let images = list_pngs(&args.dataset)?;
    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let config_path = args.out.join("bench_config.toml");
    config.save(&config_path)?;
    let job_for = |img: &Path| Job {
        image: img.to_path_buf(),
        gt: Some(img.to_path_buf()),
        out: args.out.join(stem(img)),
        config: config.clone(),
    };

    let mut results: Vec<(PathBuf, std::result::Result<RunReport, String>)> = Vec::new();
    match exe {
        Some(exe) if args.workers > 1 => {
            for chunk in images.chunks(args.workers) {
                let children: Vec<_> = chunk
                    .iter()
                    .map(|img| {
                        let job = job_for(img);
                        let child = Command::new(exe)
                            .arg("job")
                            .arg("--config")
                            .arg(&config_path)
                            .arg("--image")
                            .arg(img)
                            .arg("--out")
                            .arg(&job.out)
                            .stdout(Stdio::null())
                            .stderr(Stdio::piped())
                            .spawn();
                        (img.clone(), job, child)
                    })
                    .collect();
                for (img, job, child) in children {
                    let res = match child {
                        Ok(c) => match c.wait_with_output() {
                            Ok(o) if o.status.success() => read_report(&job.out).map_err(|e| e.to_string()),
                            Ok(o) => Err(String::from_utf8_lossy(&o.stderr).trim().to_string()),
                            Err(e) => Err(e.to_string()),
                        },
                        Err(e) => Err(e.to_string()),
                    };
                    results.push((img, res));
                }
            }
        }
        _ => {
            for img in &images {
                results.push((img.clone(), execute(&job_for(img)).map_err(|e| e.to_string())));
            }
        }
    }

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (img, res) in &results {
        match res {
            Ok(r) => rows.push(row_for(img, &config, Some(r))),
            Err(e) => {
                log::error!("{}: {e}", img.display());
                failures.push(format!("{}: {e}", stem(img)));
                rows.push(row_for(img, &config, None));
            }
        }
    }
    let mean = |f: fn(&BenchRow) -> Option<f64>| -> Option<f64> {
        let v: Vec<f64> = rows.iter().filter_map(f).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    let summary = BenchSummary {
        dataset: args.dataset.display().to_string(),
        task: config.task.to_string(),
        images: images.len(),
        failures,
        mean_ssim: mean(|r| r.ssim),
        mean_psnr: mean(|r| r.psnr),
        mean_masked_ssim: mean(|r| r.masked_ssim),
    };
    let mean_row = BenchRow {
        image: "mean".into(),
        task: config.task.to_string(),
        seed: config.seed,
        iterations: config.iterations,
        ssim: summary.mean_ssim,
        psnr: summary.mean_psnr,
        masked_ssim: summary.mean_masked_ssim,
        wall_s: rows.iter().map(|r| r.wall_s).sum::<f64>() / rows.len() as f64,
    };
    let csv_path = args.out.join("results.csv");
    let fail = |e: csv::Error| Error::io(&csv_path, e.into());
    let mut w = csv::Writer::from_path(&csv_path).map_err(fail)?;
    for r in rows.iter().chain(std::iter::once(&mean_row)) {
        w.serialize(r).map_err(fail)?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::Config(e.to_string()))?;
    let sp = args.out.join("summary.json");
    fs::write(&sp, json).map_err(|e| Error::io(&sp, e))?;
    rows.push(mean_row);
    Ok((rows, summary))
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.digits$}"))
}

/// Metrics of a saved output against ground truth.
pub fn evaluate(restored: &Path, gt: &Path, mask: Option<&Path>) -> Result<QualityMetrics> {
    let a = io::load_image(restored)?;
    let b = io::load_image(gt)?;
    let m = mask.map(|p| masking::load_mask(p, b.dims())).transpose()?;
    if a.dims() != b.dims() {
        return Err(Error::dims(
            format!("{}x{}", b.height(), b.width()),
            format!("{}x{}", a.height(), a.width()),
        ));
    }
    quality(&a, &b, m.as_ref())
}

/// Hidden worker entry: runs a single job from a resolved configuration.
#[derive(Parser, Debug)]
struct WorkerCli {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn exit_code(e: &Error) -> i32 {
    if e.is_runtime() {
        EXIT_RUNTIME
    } else {
        EXIT_CONFIG
    }
}

/// Entry point of the `deepcfl` binary. Returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    if args.get(1).is_some_and(|a| a == "job") {
        let mut rest = vec![args[0].clone()];
        rest.extend(args[2..].iter().cloned());
        let w = match WorkerCli::try_parse_from(rest) {
            Ok(w) => w,
            Err(e) => {
                eprintln!("{e}");
                return EXIT_CONFIG;
            }
        };
        let job = RunConfig::load(&w.config).and_then(validate_config).map(|config| Job {
            gt: Some(w.image.clone()),
            image: w.image,
            out: w.out,
            config,
        });
        return match job.and_then(|j| execute(&j)) {
            Ok(_) => 0,
            Err(e) => {
                eprintln!("error: {e}");
                exit_code(&e)
            }
        };
    }
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Commands::Bench(b) => {
            let exe = std::env::current_exe().ok();
            run_benchmark(b, exe.as_deref()).map(|(rows, s)| {
                for r in &rows {
                    println!(
                        "{:<16} ssim={} psnr={} masked_ssim={}",
                        r.image,
                        fmt_opt(r.ssim, 4),
                        fmt_opt(r.psnr, 2),
                        fmt_opt(r.masked_ssim, 4)
                    );
                }
                println!(
                    "{} {}: SSIM {} / PSNR {} over {} images, {} failed",
                    s.dataset,
                    s.task,
                    fmt_opt(s.mean_ssim, 2),
                    fmt_opt(s.mean_psnr, 2),
                    s.images,
                    s.failures.len()
                );
            })
        }
        Commands::Eval { restored, gt, mask } => evaluate(restored, gt, mask.as_deref()).map(|m| {
            println!("ssim={:.4} psnr={:.2} masked_ssim={}", m.ssim, m.psnr, fmt_opt(m.masked_ssim, 4));
        }),
        cmd => resolve_job(cmd).and_then(|job| execute(&job)).map(|r| println!("{}", summary_line(&r))),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolves_flags_over_defaults() {
        let cli = Cli::try_parse_from([
            "deepcfl", "restore", "--image", "a.png", "--random", "50", "--seed", "3", "--iters", "7",
        ])
        .unwrap();
        let job = resolve_job(&cli.command).unwrap();
        assert_eq!(job.config.task, Task::RestoreRandom);
        assert_eq!(job.config.mask_fraction, Some(0.5));
        assert_eq!((job.config.seed, job.config.iterations), (3, 7));
        assert_eq!(job.out, PathBuf::from("run"));

        let cli = Cli::try_parse_from(["deepcfl", "resize", "--image", "a.png", "--factor", "2,1"]).unwrap();
        assert_eq!(resolve_job(&cli.command).unwrap().config.resize_factor, Some([2.0, 1.0]));
        let cli = Cli::try_parse_from(["deepcfl", "resize", "--image", "a.png", "--factor", "2,1,3"]).unwrap();
        assert!(resolve_job(&cli.command).is_err());
    }

    #[test]
    fn missing_task_inputs_are_config_errors() {
        let cli = Cli::try_parse_from(["deepcfl", "outpaint", "--image", "a.png"]).unwrap();
        assert!(matches!(resolve_job(&cli.command), Err(Error::Config(_))));
        let cli = Cli::try_parse_from(["deepcfl", "inpaint", "--image", "a.png"]).unwrap();
        assert!(matches!(resolve_job(&cli.command), Err(Error::Config(_))));
    }

    #[test]
    fn masks_follow_the_task() {
        let mut c = RunConfig::new(Task::Outpaint);
        c.mask_fraction = Some(0.2);
        assert_eq!(build_mask(&c, (8, 10)).unwrap().zero_count(), 16);
        c.task = Task::RestoreRandom;
        c.mask_fraction = Some(0.5);
        assert_eq!(build_mask(&c, (8, 10)).unwrap().zero_count(), 40);
    }
}
