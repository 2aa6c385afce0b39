use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::ArgMatches;
use rayon::prelude::*;
use ridgeflow::evaluation::{format_pr_csv, match_minutiae, pr_curve, MatchCriteria};
use ridgeflow::extraction::{read_minutiae, write_minutiae};
use ridgeflow::losses::gradcheck;
use ridgeflow::pgm::{read_pgm, write_pgm, PgmFormat};
use ridgeflow::synth::{random_scene, synth_print};
use ridgeflow::{Image, Pipeline, PipelineArtifacts};

use crate::{build_config, CliResult, Failure};

/// Cell size of the orientation field written by `extract`.
pub const ORIENTATION_OUT_STRIDE: usize = 8;

fn num<T: std::str::FromStr>(m: &ArgMatches, name: &str) -> CliResult<T>
where
    T::Err: std::fmt::Display,
{
    let raw = m.get_one::<String>(name).expect("defaulted argument");
    raw.parse()
        .map_err(|e| Failure::Io(format!("--{name} {raw:?}: {e}")))
}

fn path_arg(m: &ArgMatches, name: &str) -> PathBuf {
    PathBuf::from(m.get_one::<String>(name).expect("required argument"))
}

fn pipeline(m: &ArgMatches) -> CliResult<Pipeline<f64>> {
    Ok(Pipeline::new(build_config(m)?)?)
}

fn run_file(p: &Pipeline<f64>, input: &Path) -> CliResult<PipelineArtifacts> {
    let image: Image = read_pgm(input)?;
    Ok(p.run(&image)?)
}

fn create_dir(dir: &Path) -> CliResult {
    fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))
}

fn write_extract_outputs(a: &PipelineArtifacts, dir: &Path) -> CliResult {
    create_dir(dir)?;
    a.field
        .subsample(ORIENTATION_OUT_STRIDE)?
        .write(dir.join("orientation.txt"))?;
    write_pgm(dir.join("seg.pgm"), &a.mask.to_image::<f64>(), PgmFormat::Binary)?;
    write_pgm(dir.join("enhanced.pgm"), &a.enhanced.to_display(), PgmFormat::Binary)?;
    write_minutiae(dir.join("minutiae.txt"), &a.minutiae)?;
    Ok(())
}

fn pgm_inputs(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry?.path();
        let is_pgm = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("pgm"));
        if path.is_file() && is_pgm {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(Failure::Io(format!("{}: no .pgm files", dir.display())));
    }
    Ok(files)
}

/// Single file: outputs go straight into `--out` and the count is printed.
/// Directory: each `NAME.pgm` gets `--out/NAME/`, and one `NAME COUNT` line
/// is printed per file in name order. The first failure in name order
/// decides the exit code.
pub fn extract(m: &ArgMatches, out: &mut dyn Write) -> CliResult {
    let p = pipeline(m)?;
    let input = path_arg(m, "input");
    let out_dir = path_arg(m, "out");
    if !input.is_dir() {
        let a = run_file(&p, &input)?;
        write_extract_outputs(&a, &out_dir)?;
        writeln!(out, "{}", a.minutiae.len())?;
        return Ok(());
    }

    let files = pgm_inputs(&input)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(&jobs) = m.get_one::<usize>("jobs") {
        if jobs == 0 {
            return Err(Failure::Io("--jobs must be positive".into()));
        }
        builder = builder.num_threads(jobs);
    }
    let pool = builder.build().map_err(|e| Failure::Pipeline(e.to_string()))?;
    let results: Vec<CliResult<usize>> = pool.install(|| {
        files
            .par_iter()
            .map(|f| {
                let stem = f.file_stem().unwrap_or_default();
                let a = run_file(&p, f).map_err(|e| tag(f, e))?;
                write_extract_outputs(&a, &out_dir.join(stem)).map_err(|e| tag(f, e))?;
                Ok(a.minutiae.len())
            })
            .collect()
    });
    for (f, r) in files.iter().zip(results) {
        let stem = f.file_stem().unwrap_or_default().to_string_lossy();
        writeln!(out, "{stem} {}", r?)?;
    }
    Ok(())
}

fn tag(file: &Path, f: Failure) -> Failure {
    let msg = format!("{}: {f}", file.display());
    match f {
        Failure::Check(_) => Failure::Check(msg),
        Failure::Io(_) => Failure::Io(msg),
        Failure::Pipeline(_) => Failure::Pipeline(msg),
    }
}

pub fn enhance(m: &ArgMatches, _out: &mut dyn Write) -> CliResult {
    let a = run_file(&pipeline(m)?, &path_arg(m, "input"))?;
    write_pgm(path_arg(m, "out"), &a.enhanced.to_display(), PgmFormat::Binary)?;
    Ok(())
}

pub fn orientation(m: &ArgMatches, _out: &mut dyn Write) -> CliResult {
    let stride = *m.get_one::<usize>("stride").expect("defaulted argument");
    let a = run_file(&pipeline(m)?, &path_arg(m, "input"))?;
    a.field.subsample(stride)?.write(path_arg(m, "out"))?;
    Ok(())
}

pub fn segment(m: &ArgMatches, _out: &mut dyn Write) -> CliResult {
    let a = run_file(&pipeline(m)?, &path_arg(m, "input"))?;
    write_pgm(path_arg(m, "out"), &a.mask.to_image::<f64>(), PgmFormat::Binary)?;
    Ok(())
}

/// Writes `print.pgm` and `truth.txt`. Intensities map `±(amplitude + 3σ)`
/// onto `[0, 255]`.
pub fn synth(m: &ArgMatches, out: &mut dyn Write) -> CliResult {
    let dir = path_arg(m, "out");
    let spec = random_scene(
        num(m, "width")?,
        num(m, "height")?,
        num(m, "minutiae")?,
        num(m, "min-sep")?,
        num(m, "margin")?,
        num(m, "noise")?,
        num(m, "seed")?,
    )?;
    let (img, truth) = synth_print::<f64>(&spec, num(m, "seed")?)?;
    let half = spec.amplitude + 3.0 * spec.noise_sigma;
    let display = img.map(|v| 127.5 + 127.5 * v / half);
    create_dir(&dir)?;
    write_pgm(dir.join("print.pgm"), &display, PgmFormat::Binary)?;
    write_minutiae(dir.join("truth.txt"), &truth)?;
    writeln!(out, "{}", truth.len())?;
    Ok(())
}

/// Default `--curve` thresholds: 0 to 1 in steps of 0.05.
pub fn default_thresholds() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 20.0).collect()
}

/// Prints `precision recall mean_loc_err mean_angle_err matched n_pred n_gt`.
pub fn eval(m: &ArgMatches, out: &mut dyn Write) -> CliResult {
    let pred = read_minutiae(path_arg(m, "pred"))?;
    let gt = read_minutiae(path_arg(m, "gt"))?;
    let criteria = MatchCriteria::new(num(m, "dist-thr")?, num(m, "angle-thr")?)
        .map_err(|e| Failure::Io(e.to_string()))?;
    let r = match_minutiae(&pred, &gt, &criteria);
    writeln!(
        out,
        "{:.4} {:.4} {:.2} {:.2} {} {} {}",
        r.precision,
        r.recall,
        r.mean_loc_err,
        r.mean_angle_err,
        r.pairs.len(),
        r.n_pred,
        r.n_gt
    )?;
    if let Some(curve) = m.get_one::<String>("curve") {
        let thresholds = match m.get_one::<String>("thresholds") {
            Some(list) => list
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|e| Failure::Io(format!("--thresholds {t:?}: {e}")))
                })
                .collect::<CliResult<Vec<_>>>()?,
            None => default_thresholds(),
        };
        let points = pr_curve(&pred, &gt, &criteria, &thresholds).map_err(|e| Failure::Io(e.to_string()))?;
        fs::write(curve, format_pr_csv(&points)).map_err(|e| Failure::Io(format!("{curve}: {e}")))?;
    }
    Ok(())
}

/// One `LOSS MAX_REL_ERR` line per loss; fails naming the loss and the
/// worst `(x, y, channel)`.
pub fn gradcheck(m: &ArgMatches, out: &mut dyn Write) -> CliResult {
    let seed: u64 = num(m, "seed")?;
    let bias = *m.get_one::<f64>("perturb").expect("defaulted argument");
    let reports = gradcheck::run_all(seed, bias);
    let mut failed = Vec::new();
    for r in &reports {
        writeln!(out, "{} {:.3e}", r.loss, r.max_rel_err)?;
        if !r.passed() {
            let (x, y, c) = r.worst;
            failed.push(format!(
                "{} relative error {:.3e} at x={x} y={y} channel={c}",
                r.loss, r.max_rel_err
            ));
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(format!("gradient check failed: {}", failed.join("; "))))
    }
}
