use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Serialize;

use currents_core::chain::{tuples_from_csv, tuples_to_csv, GridPattern, PolylineCurrent, SimplicialComplex2};
use currents_core::chain::{rasterize_to_chain, Chain};
use currents_core::config::RunConfig;
use currents_core::energy::{EnergyContext, EnergyConfig};
use currents_core::field::ScalarField;
use currents_core::flatnorm::{flat_norm_dual, flat_norm_primal};
use currents_core::io::write_atomic;
use currents_core::lines::{complete_lines, lift, maximal_lines, project_direction_mass};
use currents_core::optimizer::descend_with;
use currents_core::pgm::{encode_pgm, parse_pgm};
use currents_core::report::{EnergyReport, Report};
use currents_core::scenes::{generate, SceneSpec};

use crate::Common;

/// Complex cells along the longer side of a current's bounding box.
const FLATNORM_CELLS: f64 = 48.0;

fn setup(common: &Common) -> Result<RunConfig> {
    let c = common.run_config()?;
    if let Some(n) = c.threads {
        // Fails only if a pool already exists, which cannot happen in a fresh process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(c)
}

/// Reads a PGM onto the unit-square convention: spacing `1 / max(w, h)`.
fn load_image(path: &Path) -> Result<ScalarField> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let f = parse_pgm(&bytes, 1.0).with_context(|| format!("parsing {}", path.display()))?;
    let (w, h) = (f.width(), f.height());
    Ok(ScalarField::new(w, h, 1.0 / w.max(h) as f64, f.into_values())?)
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic(path, bytes).with_context(|| format!("writing {}", path.display()))
}

/// `base` with its extension replaced by `suffix`.
fn beside(base: &Path, suffix: &str) -> PathBuf {
    let stem = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    base.with_file_name(format!("{stem}{suffix}"))
}

fn read_tuples(path: &Path) -> Result<PolylineCurrent> {
    let file = std::fs::File::open(path).with_context(|| format!("reading {}", path.display()))?;
    let tuples = tuples_from_csv(file).with_context(|| format!("parsing {}", path.display()))?;
    Ok(PolylineCurrent::from_segment_tuples(&tuples)?)
}

#[derive(Debug, Args)]
pub struct DenoiseArgs {
    /// Observed image.
    #[arg(long = "in")]
    input: PathBuf,
    /// De-noised image.
    #[arg(long)]
    out: PathBuf,
    /// Energy report (JSON).
    #[arg(long)]
    report: PathBuf,
    /// Descent trace (JSON lines); defaults to the report path with `.trace.jsonl`.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Side of the flattening windows, in pixels.
    #[arg(long)]
    region_size: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Serialize)]
struct DenoiseBody {
    input: String,
    output: String,
    sweeps: usize,
    evaluations: usize,
    accepted_steps: usize,
    initial: EnergyReport,
    #[serde(flatten)]
    last: EnergyReport,
}

pub fn denoise(a: DenoiseArgs) -> Result<()> {
    let mut cfg = setup(&a.common)?;
    if let Some(n) = a.max_iters {
        cfg.descent.max_iters = n;
    }
    if let Some(r) = a.region_size {
        cfg.descent.region_size = r;
    }
    cfg.validate()?;
    let g = load_image(&a.input)?;
    let ctx = EnergyContext::with_extracted_jumps(g.clone(), cfg.weights, cfg.energy.clone())?;
    let j0 = cfg.energy.jumps(&g)?;
    let initial = ctx.evaluate(&g, &j0)?;
    let out = descend_with(&ctx, &g, j0, &cfg.descent_params())?;
    let accepted = out.trace.accepted().count();
    let last_total = out.energy.total;
    let sweeps = out.trace.records.last().map_or(0, |r| r.sweep + 1);
    let body = DenoiseBody {
        input: a.input.display().to_string(),
        output: a.out.display().to_string(),
        sweeps,
        evaluations: out.trace.records.len(),
        accepted_steps: accepted,
        initial: EnergyReport(initial),
        last: EnergyReport(out.energy),
    };
    let report = Report::new("denoise", body).to_json()?;
    let trace_path = a.trace.clone().unwrap_or_else(|| beside(&a.report, ".trace.jsonl"));
    write(&a.out, &encode_pgm(&out.field))?;
    write(&a.report, &report)?;
    write(&trace_path, out.trace.to_json_lines().as_bytes())?;
    println!("{accepted} accepted steps, energy {} -> {}", out.trace.initial, last_total);
    Ok(())
}

#[derive(Debug, Args)]
pub struct EnergyArgs {
    /// Image to score.
    #[arg(long = "in")]
    input: PathBuf,
    /// Observed image for the fidelity terms; defaults to the input itself.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Write the report here instead of standard output.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Evaluate zero-weight terms too.
    #[arg(long)]
    all_terms: bool,
    #[command(flatten)]
    common: Common,
}

pub fn energy(a: EnergyArgs) -> Result<()> {
    let cfg = setup(&a.common)?;
    let f = load_image(&a.input)?;
    let g = match &a.reference {
        Some(p) => load_image(p)?,
        None => f.clone(),
    };
    let config = EnergyConfig {
        evaluate_all: a.all_terms || cfg.energy.evaluate_all,
        ..cfg.energy.clone()
    };
    let e = currents_core::energy::energy(&f, &g, &cfg.weights, &config)?;
    let json = Report::new("energy", EnergyReport(e)).to_json()?;
    match &a.report {
        Some(p) => write(p, &json)?,
        None => print!("{}", String::from_utf8_lossy(&json)),
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct FlatnormArgs {
    /// Segment tuples `x,y,a,b`.
    current: PathBuf,
    /// Optional second current; the flat norm of the difference is computed.
    minus: Option<PathBuf>,
    /// Complex spacing; defaults to the longer bounding-box side over 48.
    #[arg(long)]
    spacing: Option<f64>,
    /// Prefix for the witness CSVs; defaults to the first input's stem.
    #[arg(long)]
    witness: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

fn edge_csv(k: &SimplicialComplex2, r: &Chain) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["x0", "y0", "x1", "y1", "coefficient"])?;
    for (e, &c) in r.coeffs.iter().enumerate() {
        if c != 0.0 {
            let [p, q] = k.edges()[e].map(|v| k.vertices()[v]);
            w.write_record([p[0], p[1], q[0], q[1], c].map(|v| format!("{v:.16e}")))?;
        }
    }
    Ok(w.into_inner()?)
}

fn triangle_csv(k: &SimplicialComplex2, t: &Chain) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["x0", "y0", "x1", "y1", "x2", "y2", "coefficient"])?;
    for (i, &c) in t.coeffs.iter().enumerate() {
        if c != 0.0 {
            let [p, q, s] = k.triangles()[i].map(|v| k.vertices()[v]);
            w.write_record([p[0], p[1], q[0], q[1], s[0], s[1], c].map(|v| format!("{v:.16e}")))?;
        }
    }
    Ok(w.into_inner()?)
}

pub fn flatnorm(a: FlatnormArgs) -> Result<()> {
    let cfg = setup(&a.common)?;
    let first = read_tuples(&a.current)?;
    let second = a.minus.as_deref().map(read_tuples).transpose()?;
    let mut both = first.clone();
    if let Some(s) = &second {
        both.extend(s.clone());
    }
    let prefix = a.witness.clone().unwrap_or_else(|| beside(&a.current, ""));
    let (r_path, t_path) = (beside(&prefix, ".witness_r.csv"), beside(&prefix, ".witness_t.csv"));
    let Some((lo, hi)) = both.bounding_box() else {
        println!("primal 0\ndual 0\ngap 0");
        write(&r_path, b"x0,y0,x1,y1,coefficient\n")?;
        write(&t_path, b"x0,y0,x1,y1,x2,y2,coefficient\n")?;
        return Ok(());
    };
    let side = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    let spacing = a.spacing.unwrap_or(side / FLATNORM_CELLS);
    if !(spacing > 0.0 && spacing.is_finite()) {
        bail!(currents_core::Error::Validation(format!("spacing must be positive, got {spacing}")));
    }
    let pad = 2.0 * spacing;
    let k = SimplicialComplex2::grid_covering(
        [lo[0] - pad, lo[1] - pad],
        [hi[0] + pad, hi[1] + pad],
        spacing,
        GridPattern::Crossed,
    )?;
    let mut x = rasterize_to_chain(&first, &k)?;
    if let Some(s) = &second {
        x = x.sub(&rasterize_to_chain(s, &k)?)?;
    }
    let scale = cfg.energy.scale;
    let primal = flat_norm_primal(&x, &k, scale)?;
    let dual = flat_norm_dual(&x, &k, scale)?;
    let gap = if primal.value > 0.0 {
        (primal.value - dual) / primal.value
    } else {
        0.0
    };
    write(&r_path, &edge_csv(&k, &primal.r_chain)?)?;
    write(&t_path, &triangle_csv(&k, &primal.t_chain)?)?;
    println!("primal {}\ndual {}\ngap {}", primal.value, dual, gap);
    Ok(())
}

#[derive(Debug, Args)]
pub struct LinesArgs {
    /// A PGM image or a segment-tuple CSV.
    #[arg(long = "in")]
    input: PathBuf,
    /// Direction histogram CSV; defaults to `<input stem>.histogram.csv`.
    #[arg(long)]
    histogram: Option<PathBuf>,
    /// Completed lines as segment tuples; defaults to `<input stem>.lines.csv`.
    #[arg(long)]
    completed: Option<PathBuf>,
    /// Longest gap to bridge, in domain units.
    #[arg(long)]
    gap_max: Option<f64>,
    /// Projection line direction, radians from the x-axis.
    #[arg(long)]
    axis: Option<f64>,
    #[command(flatten)]
    common: Common,
}

pub fn lines(a: LinesArgs) -> Result<()> {
    let mut cfg = setup(&a.common)?;
    if let Some(g) = a.gap_max {
        cfg.lines.gap_max = g;
    }
    if let Some(t) = a.axis {
        cfg.lines.axis_angle = t;
    }
    cfg.validate()?;
    let is_csv = a.input.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let current = if is_csv {
        read_tuples(&a.input)?
    } else {
        let f = load_image(&a.input)?;
        cfg.energy.jumps(&f)?.curves
    };
    let lc = &cfg.lines;
    let lifted = lift(&current);
    let done = complete_lines(&lifted, &lc.penalty, lc.gap_max, &lc.bins)?;
    let hist = project_direction_mass(&done, lc.axis_angle, &lc.bins)?;
    let hist_path = a.histogram.clone().unwrap_or_else(|| beside(&a.input, ".histogram.csv"));
    let lines_path = a.completed.clone().unwrap_or_else(|| beside(&a.input, ".lines.csv"));
    write(&hist_path, &hist.to_csv())?;
    write(&lines_path, &tuples_to_csv(&done.to_segment_tuples()))?;
    println!("{} maximal lines", maximal_lines(&done, &lc.bins));
    Ok(())
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Scene kind.
    kind: String,
    #[arg(long)]
    n: Option<u32>,
    /// Sawtooth angle, radians.
    #[arg(long)]
    theta: Option<f64>,
    /// Pixels per side.
    #[arg(long)]
    res: Option<usize>,
    #[arg(long)]
    background: Option<f64>,
    #[arg(long)]
    background_variation: Option<f64>,
    #[arg(long)]
    contrast: Option<f64>,
    /// Gaussian edge blur, pixels.
    #[arg(long)]
    edge_px: Option<f64>,
    /// Impulse-noise probability per pixel.
    #[arg(long)]
    impulse: Option<f64>,
    /// Skip the flat-norm oracle values.
    #[arg(long)]
    no_oracle: bool,
    /// Output prefix; `.pgm`, `.csv` and `.json` are appended. Defaults to the kind.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

pub fn synth(a: SynthArgs) -> Result<()> {
    let cfg = setup(&a.common)?;
    let mut spec = SceneSpec::new(&a.kind);
    spec.n = a.n.unwrap_or(spec.n);
    spec.theta = a.theta.unwrap_or(spec.theta);
    spec.res = a.res.unwrap_or(spec.res);
    spec.background = a.background.unwrap_or(spec.background);
    spec.background_variation = a.background_variation.unwrap_or(spec.background_variation);
    spec.contrast = a.contrast.unwrap_or(spec.contrast);
    spec.edge_px = a.edge_px.unwrap_or(spec.edge_px);
    spec.impulse = a.impulse.unwrap_or(spec.impulse);
    spec.seed = cfg.seed;
    spec.scale = cfg.energy.scale;
    spec.oracle = !a.no_oracle;
    let scene = generate(&spec)?;
    let prefix = a.out.clone().unwrap_or_else(|| PathBuf::from(&a.kind));
    let with = |ext: &str| {
        let mut s = prefix.clone().into_os_string();
        s.push(ext);
        PathBuf::from(s)
    };
    let json = Report::new("synth", &scene.values).to_json()?;
    write(&with(".pgm"), &encode_pgm(&scene.image))?;
    write(&with(".csv"), &tuples_to_csv(&scene.current.to_segment_tuples()))?;
    write(&with(".json"), &json)?;
    println!("{} written to {}.{{pgm,csv,json}}", spec.kind, prefix.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beside_replaces_the_extension() {
        assert_eq!(beside(Path::new("out/r.json"), ".trace.jsonl"), PathBuf::from("out/r.trace.jsonl"));
        assert_eq!(beside(Path::new("road.csv"), ""), PathBuf::from("road"));
        assert_eq!(beside(Path::new("plain"), ".lines.csv"), PathBuf::from("plain.lines.csv"));
    }

    #[test]
    fn witness_csvs_list_only_nonzero_cells() {
        let k = SimplicialComplex2::grid([0.0, 0.0], 1, 1, 1.0, GridPattern::Diagonal).unwrap();
        let mut t = Chain::zeros(2, k.num_triangles());
        t.coeffs[1] = -2.0;
        let text = String::from_utf8(triangle_csv(&k, &t).unwrap()).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.lines().nth(1).unwrap().ends_with("-2.0000000000000000e0"));
        let r = k.boundary(&t).unwrap();
        let text = String::from_utf8(edge_csv(&k, &r).unwrap()).unwrap();
        assert_eq!(text.lines().count(), 4);
    }
}
