//! Command-line front end. Exit codes: 0 success, 1 runtime failure,
//! 2 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::ablation::{run_grid, table, CELLS_HEADER};
use crate::data::{export_mask_image, pnm, scene, Dataset};
use crate::error::Error;
use crate::gradcheck;
use crate::net::train::{load_data, trace_csv, train_with_progress, CSV_HEADER};
use crate::net::{checkpoint, evaluate, Config};

#[derive(Debug, Parser)]
#[command(name = "svctx", version, about = "Shape-variant context segmentation toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compare analytic gradients with central finite differences.
    Gradcheck(GradcheckArgs),
    /// Write synthetic train/val scenes as PPM/PGM files with manifests.
    GenData(GenDataArgs),
    /// Train a network; writes a checkpoint, the metrics trace and the config.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a manifest.
    Eval(EvalArgs),
    /// Train a kernel-size x variant x seed grid and tabulate mIoU.
    Ablate(AblateArgs),
    /// Export shape-mask images around chosen pixels.
    VizMask(VizMaskArgs),
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Operator name, or `all`.
    #[arg(long, default_value = "all")]
    pub op: String,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Config file plus `key=value` overrides; flags beat the file.
#[derive(Debug, Args)]
pub struct ConfigArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override any config key, e.g. `--set optim.max_iter=100`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Scene seed (overrides `data.seed`).
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub train: Option<usize>,
    #[arg(long)]
    pub val: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Context variant (overrides `network.context`).
    #[arg(long)]
    pub context: Option<String>,
    /// Context kernel extent (overrides `network.context_kernel`).
    #[arg(long)]
    pub kernel: Option<usize>,
    #[arg(long)]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory for predicted label maps (`pred_NNNN.pgm`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Kernel extents; 0 trains the no-context network.
    #[arg(long, value_delimiter = ',', default_value = "0,7")]
    pub kernels: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "sfc,svc")]
    pub variants: Vec<String>,
    /// Number of seeds, starting at `--seed`.
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the table here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-cell results CSV.
    #[arg(long)]
    pub cells: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VizMaskArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// PPM image.
    #[arg(long)]
    pub image: PathBuf,
    /// Image-space pixels `"i1,j1;i2,j2"`, mapped to the mask grid.
    #[arg(long)]
    pub points: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Emit the K x K window instead of the full-size overlay.
    #[arg(long)]
    pub window: bool,
}

/// Failure classes that map to exit codes.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

type CliResult<T = ()> = std::result::Result<T, CliError>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            2
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> CliResult {
    match cmd {
        Command::Gradcheck(a) => cmd_gradcheck(a, out),
        Command::GenData(a) => cmd_gen_data(a, out),
        Command::Train(a) => cmd_train(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Ablate(a) => cmd_ablate(a, out),
        Command::VizMask(a) => cmd_viz_mask(a, out),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Runtime(Error::io(path, e))
}

fn emit(out: &mut dyn Write, text: &str) -> CliResult {
    out.write_all(text.as_bytes()).map_err(io_err(Path::new("<stdout>")))
}

/// File (if any), then `--set` overrides, then the command's own flags.
fn resolve_config(args: &ConfigArgs, flags: &[(&str, Option<String>)]) -> CliResult<Config> {
    let mut cfg = match &args.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    for o in &args.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got `{o}`")))?;
        cfg.set(k.trim(), v.trim())
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    for (k, v) in flags {
        if let Some(v) = v {
            cfg.set(k, v).map_err(|e| CliError::Usage(e.to_string()))?;
        }
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

fn create_dir(dir: &Path) -> CliResult {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

pub fn cmd_gradcheck(a: GradcheckArgs, out: &mut dyn Write) -> CliResult {
    let ops: Vec<&str> = if a.op == "all" {
        gradcheck::OPS.to_vec()
    } else if gradcheck::OPS.contains(&a.op.as_str()) {
        vec![a.op.as_str()]
    } else {
        return Err(CliError::Usage(format!(
            "unknown op `{}`; available: all, {}",
            a.op,
            gradcheck::OPS.join(", ")
        )));
    };
    let mut failed = Vec::new();
    for op in ops {
        let report = gradcheck::check_op(op, a.trials, a.seed)?;
        let status = if report.passed() { "ok" } else { "FAIL" };
        emit(
            out,
            &format!("{op}: {} trials, tolerance {:e}, {status}\n", report.trials, report.tolerance),
        )?;
        for arg in &report.args {
            emit(
                out,
                &format!("  {:<16} max rel err {:.3e} over {} coords\n", arg.name, arg.max_rel_error, arg.checked),
            )?;
        }
        if !report.passed() {
            failed.push(op);
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Runtime(Error::invalid(
            "gradcheck",
            format!("tolerance exceeded for {}", failed.join(", ")),
        )))
    }
}

pub fn cmd_gen_data(a: GenDataArgs, out: &mut dyn Write) -> CliResult {
    let cfg = resolve_config(
        &a.cfg,
        &[
            ("data.seed", a.seed.map(|v| v.to_string())),
            ("data.train_count", a.train.map(|v| v.to_string())),
            ("data.val_count", a.val.map(|v| v.to_string())),
        ],
    )?;
    create_dir(&a.out)?;
    let (train, val) = scene::gen_splits(&cfg.data.scene);
    let tm = Dataset::from_scenes(train).save(&a.out, "train")?;
    let vm = Dataset::from_scenes(val).save(&a.out, "val")?;
    emit(out, &format!("wrote {}\nwrote {}\n", tm.display(), vm.display()))
}

pub fn cmd_train(a: TrainArgs, out: &mut dyn Write) -> CliResult {
    let cfg = resolve_config(
        &a.cfg,
        &[
            ("network.context", a.context.clone()),
            ("network.context_kernel", a.kernel.map(|v| v.to_string())),
            ("optim.max_iter", a.max_iter.map(|v| v.to_string())),
        ],
    )?;
    create_dir(&a.out)?;
    let (train_set, val_set) = load_data(&cfg)?;
    emit(out, &format!("{CSV_HEADER}\n"))?;
    let mut write_err = None;
    let outcome = train_with_progress(&cfg, &train_set, &val_set, a.seed, |row| {
        if write_err.is_none() {
            write_err = writeln!(out, "{}", row.csv_line()).and_then(|_| out.flush()).err();
        }
    })?;
    if let Some(e) = write_err {
        return Err(io_err(Path::new("<stdout>"))(e));
    }
    let metrics = a.out.join("metrics.csv");
    std::fs::write(&metrics, trace_csv(&outcome.trace)).map_err(io_err(&metrics))?;
    let cfg_path = a.out.join("config.txt");
    std::fs::write(&cfg_path, cfg.to_text()).map_err(io_err(&cfg_path))?;
    let ckpt = a.out.join("model.ckpt");
    checkpoint::save(&outcome.model, outcome.optimizer.iteration, &ckpt)?;
    emit(out, &format!("wrote {}\n", ckpt.display()))
}

pub fn cmd_eval(a: EvalArgs, out: &mut dyn Write) -> CliResult {
    let (model, _) = checkpoint::load(&a.checkpoint)?;
    let data = Dataset::load_manifest(&a.manifest)?;
    let (_, m) = evaluate(&model, &data)?;
    if let Some(dir) = &a.out {
        create_dir(dir)?;
        for (n, img) in data.images.iter().enumerate() {
            let (_, h, w) = img.chw()?;
            let pixels = model.segment(img)?;
            pnm::write_pgm(&pnm::GrayImage { width: w, height: h, pixels }, dir.join(format!("pred_{n:04}.pgm")))?;
        }
    }
    emit(
        out,
        &format!(
            "pixel_acc {:.6}\nmean_acc {:.6}\nmean_iou {:.6}\n",
            m.pixel_acc, m.mean_acc, m.mean_iou
        ),
    )
}

pub fn cmd_ablate(a: AblateArgs, out: &mut dyn Write) -> CliResult {
    let cfg = resolve_config(&a.cfg, &[])?;
    if a.kernels.is_empty() || a.variants.is_empty() || a.seeds == 0 {
        return Err(CliError::Usage("empty kernel, variant or seed list".into()));
    }
    for &k in &a.kernels {
        for v in &a.variants {
            crate::ablation::cell_config(&cfg, k, v).map_err(|e| CliError::Usage(e.to_string()))?;
        }
    }
    let data = load_data(&cfg)?;
    let seeds: Vec<u64> = (a.seed..a.seed + a.seeds).collect();
    let mut cell_lines = vec![CELLS_HEADER.to_string()];
    let cells = run_grid(&cfg, &a.kernels, &a.variants, &seeds, &data, |c| {
        log::info!("{}", c.csv_line());
        cell_lines.push(c.csv_line());
    })?;
    if let Some(p) = &a.cells {
        std::fs::write(p, cell_lines.join("\n") + "\n").map_err(io_err(p))?;
    }
    let t = table(&cells, &a.kernels, &a.variants);
    match &a.out {
        Some(p) => std::fs::write(p, &t).map_err(io_err(p)),
        None => emit(out, &t),
    }
}

fn parse_points(s: &str) -> CliResult<Vec<(usize, usize)>> {
    s.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (i, j) = p
                .split_once(',')
                .ok_or_else(|| CliError::Usage(format!("point `{p}` is not `i,j`")))?;
            let parse = |v: &str| {
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| CliError::Usage(format!("point `{p}` is not `i,j`")))
            };
            Ok((parse(i)?, parse(j)?))
        })
        .collect()
}

pub fn cmd_viz_mask(a: VizMaskArgs, out: &mut dyn Write) -> CliResult {
    let points = parse_points(&a.points)?;
    if points.is_empty() {
        return Err(CliError::Usage("no points given".into()));
    }
    let (model, _) = checkpoint::load(&a.checkpoint)?;
    let image = pnm::read_ppm(&a.image)?;
    let (_, h, w) = image.chw()?;
    for &(i, j) in &points {
        if i >= h || j >= w {
            return Err(CliError::Usage(format!(
                "point ({i},{j}) out of range: rows 0..{h}, columns 0..{w}"
            )));
        }
    }
    let mask = model.shape_mask(&image)?.ok_or_else(|| {
        CliError::Runtime(Error::Config(format!(
            "checkpoint variant {} has no shape mask",
            model.config.variant_name()
        )))
    })?;
    let (sy, sx) = (h / mask.height(), w / mask.width());
    create_dir(&a.out)?;
    for (i, j) in points {
        let path = a.out.join(format!("mask_{i}_{j}.pgm"));
        export_mask_image(&mask, i / sy, j / sx, &path, !a.window)?;
        emit(out, &format!("wrote {}\n", path.display()))?;
    }
    Ok(())
}
