use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use moran_dim::expansion::{expand, parse_real, DigitSequence, DigitStats, ExpansionKind};
use moran_dim::formulas::{dim_f_beta, dim_f_mary, dim_nu_eta_cf};
use moran_dim::measures::{
    eta_phi, gauss_density, gauss_grid, ulam_fixed_point_residual, ulam_invariant_density, DensityApprox, ParryDensity,
    Potential, MAX_ULAM_BRANCHES,
};
use moran_dim::moran::{box_count_intervals, fit_dimension, realize, DimensionFit, MoranSpec, TreeRecord};
use moran_dim::pressure::{solve_delta_k, solve_delta_kn, LadderEntry, PressureValue, Solution, ZeroBounds};
use moran_dim::FrequencyVector;

use crate::config::{load, make_kind, read_file, read_sequence, KindName, Loaded};
use crate::error::{CliError, CliResult};
use crate::output::{num, render, write, Meta, Output, Table};
use crate::{Cli, Command, DimCommand, MeasureCommand, SourceArgs};

const DEFAULT_TOL: f64 = 1e-12;
const DEFAULT_PRECISION: u32 = 128;

struct Ctx {
    loaded: Loaded,
    tol: f64,
    seed: u64,
    precision_bits: u32,
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let loaded = load(cli.config.as_deref())?;
    let c = &loaded.config;
    let tol = cli.tol.or(c.tol).unwrap_or(DEFAULT_TOL);
    if !(tol > 0.0) {
        return Err(CliError::config(format!("tolerance must be positive, got {tol}")));
    }
    let seed = cli.seed.or(c.seed).unwrap_or(0);
    let precision_bits = cli.precision_bits.or(c.precision_bits).unwrap_or(DEFAULT_PRECISION);
    if precision_bits < 16 {
        return Err(CliError::config("precision must be at least 16 bits"));
    }
    let out_path = cli.out.clone().or_else(|| c.out.as_ref().map(|p| loaded.resolve(p)));
    let invocation = format!(
        "{:?}|tol={tol:e}|seed={seed}|precision={precision_bits}|format={:?}",
        cli.command, cli.format
    );
    let meta = Meta::new(&loaded.bytes, &invocation, seed);
    let ctx = Ctx {
        loaded,
        tol,
        seed,
        precision_bits,
    };
    let out = match &cli.command {
        Command::Expand(src) => cmd_expand(&ctx, src)?,
        Command::Stats(src) => cmd_stats(&ctx, src)?,
        Command::Pressure { t, grid } => cmd_pressure(&ctx, t, grid.as_deref())?,
        Command::SolveH { bounds } => cmd_solve_h(&ctx, *bounds)?,
        Command::Ladder { m } => cmd_ladder(&ctx, m)?,
        Command::Dim(d) => cmd_dim(&ctx, d)?,
        Command::Measures(m) => cmd_measures(m)?,
        Command::Realize { depth, m, no_rescale } => cmd_realize(&ctx, *depth, *m, !*no_rescale)?,
        Command::Boxcount { tree, eps } => cmd_boxcount(tree, eps)?,
        Command::TildeDim { source, k, terms, full } => cmd_tilde_dim(&ctx, source, *k, *terms, *full)?,
    };
    write(&render(&out, &meta, cli.format), out_path.as_deref())
}

fn sequence(ctx: &Ctx, src: &SourceArgs) -> CliResult<DigitSequence> {
    if let Some(p) = &src.sequence {
        return read_sequence(p);
    }
    if src.kind.is_none() && src.x.is_none() {
        let decl = ctx
            .loaded
            .config
            .expansion
            .as_ref()
            .ok_or_else(|| CliError::config("give --kind/--x/--n, --sequence, or an expansion in the config"))?;
        let mut decl = decl.clone();
        if let Some(n) = src.n {
            decl.n = n;
        }
        return decl.run(ctx.precision_bits);
    }
    let kind = src.kind.ok_or_else(|| CliError::config("--kind is required"))?;
    let x = src.x.as_deref().ok_or_else(|| CliError::config("--x is required"))?;
    let n = src.n.ok_or_else(|| CliError::config("--n is required"))?;
    let kind = make_kind(kind, src.m, src.beta.as_deref())?;
    Ok(expand(&kind, &parse_real(x)?, n, ctx.precision_bits)?)
}

fn cmd_expand(ctx: &Ctx, src: &SourceArgs) -> CliResult<Output> {
    let seq = sequence(ctx, src)?;
    let mut t = Table::new(vec!["index", "digit"]);
    for (i, d) in seq.digits().iter().enumerate() {
        t.push(vec![(i + 1).to_string(), d.to_string()]);
    }
    Output::new(&seq.to_record(), t)
}

#[derive(Serialize)]
struct DigitRow {
    digit: u64,
    count: u64,
    frequency: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    target: Option<f64>,
    /// Smallest `N` with `R_i(j) > j·η_i/2` for all `j ≥ N` in the prefix.
    stabilization: Option<u64>,
}

#[derive(Serialize)]
struct StatsResult {
    depth: usize,
    digits: Vec<DigitRow>,
}

fn cmd_stats(ctx: &Ctx, src: &SourceArgs) -> CliResult<Output> {
    let seq = sequence(ctx, src)?;
    let target = match &ctx.loaded.config.eta {
        Some(_) => Some(ctx.loaded.eta(ctx.precision_bits)?),
        None => None,
    };
    let stats = DigitStats::from_digits(seq.digits(), target.as_ref());
    let depth = stats.depth();
    let rows: Vec<DigitRow> = stats
        .frequencies()
        .into_iter()
        .map(|(i, f)| {
            let eta_i = target.as_ref().map_or(f, |t| t.weight(i));
            DigitRow {
                digit: i,
                count: stats.count(i, depth),
                frequency: f,
                target: target.as_ref().map(|t| t.weight(i)),
                stabilization: stats.stabilization_for(i, eta_i),
            }
        })
        .collect();
    let mut t = Table::new(vec!["digit", "count", "frequency", "stabilization"]);
    for r in &rows {
        t.push(vec![
            r.digit.to_string(),
            r.count.to_string(),
            num(r.frequency),
            r.stabilization.map_or(String::new(), |s| s.to_string()),
        ]);
    }
    Output::new(&StatsResult { depth, digits: rows }, t)
}

fn cmd_pressure(ctx: &Ctx, ts: &[f64], grid: Option<&[f64]>) -> CliResult<Output> {
    let ts: Vec<f64> = match grid {
        Some(&[a, b, n]) => {
            if !(n >= 2.0 && n.fract() == 0.0 && b > a) {
                return Err(CliError::config(
                    "--grid needs start,end,count with count >= 2 and end > start",
                ));
            }
            let n = n as usize;
            (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
        }
        Some(_) => return Err(CliError::config("--grid takes exactly start,end,count")),
        None => ts.to_vec(),
    };
    let p = ctx.loaded.problem(ctx.precision_bits)?;
    let vals: Vec<PressureValue> = p.pressure_grid(&ts, ctx.tol)?;
    let mut t = Table::new(vec!["t", "pressure", "error_bound"]);
    for v in &vals {
        t.push(vec![num(v.t), num(v.value), num(v.error_bound)]);
    }
    Output::new(&vals, t)
}

#[derive(Serialize)]
struct SolveResult {
    #[serde(flatten)]
    solution: Solution,
    #[serde(skip_serializing_if = "Option::is_none")]
    bounds: Option<ZeroBounds>,
}

fn cmd_solve_h(ctx: &Ctx, bounds: bool) -> CliResult<Output> {
    let p = ctx.loaded.problem(ctx.precision_bits)?;
    let solution = p.solve_h(ctx.tol)?;
    let bounds = if bounds { Some(p.solve_h_bounds(ctx.tol)?) } else { None };
    let mut t = Table::new(vec!["h", "iterations", "residual", "degenerate"]);
    t.push(vec![
        num(solution.h),
        solution.iterations.to_string(),
        num(solution.residual),
        solution.degenerate.to_string(),
    ]);
    Output::new(&SolveResult { solution, bounds }, t)
}

#[derive(Serialize)]
struct LadderResult {
    ladder: Vec<LadderEntry>,
}

fn cmd_ladder(ctx: &Ctx, ms: &[usize]) -> CliResult<Output> {
    let p = ctx.loaded.problem(ctx.precision_bits)?;
    let ladder = p.ladder(ms, ctx.tol)?;
    let mut t = Table::new(vec!["M", "h_M", "degenerate"]);
    for e in &ladder {
        t.push(vec![e.m.to_string(), num(e.h), e.degenerate.to_string()]);
    }
    Output::new(&LadderResult { ladder }, t)
}

#[derive(Serialize)]
struct Dimension {
    dimension: f64,
}

fn cmd_dim(ctx: &Ctx, d: &DimCommand) -> CliResult<Output> {
    let single = |v: f64| {
        let mut t = Table::new(vec!["dimension"]);
        t.push(vec![num(v)]);
        Output::new(&Dimension { dimension: v }, t)
    };
    match d {
        DimCommand::Besicovitch { m, p } => single(dim_f_mary(*m, &FrequencyVector::finite(0, p.clone())?)?),
        DimCommand::Beta { beta, p } => {
            single(dim_f_beta(&parse_real(beta)?, &FrequencyVector::finite(0, p.clone())?)?)
        }
        DimCommand::Kp { p, samples } => {
            let eta = match p {
                Some(p) => FrequencyVector::finite(1, p.clone())?,
                None => ctx.loaded.eta(ctx.precision_bits)?,
            };
            let est = dim_nu_eta_cf(&eta, *samples, ctx.seed)?;
            let mut t = Table::new(vec!["dimension", "ci_low", "ci_high", "samples"]);
            t.push(vec![
                num(est.value),
                num(est.ci_low),
                num(est.ci_high),
                est.samples.to_string(),
            ]);
            Output::new(&est, t)
        }
    }
}

#[derive(Serialize)]
struct DensityResult {
    #[serde(skip_serializing_if = "Option::is_none")]
    normalizer: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    orbit: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fixed_point_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    l1_to_closed_form: Option<f64>,
    digit_frequencies: FrequencyVector,
    density: DensityApprox,
}

fn density_table(d: &DensityApprox) -> Table {
    let mut t = Table::new(vec!["x_left", "x_right", "density"]);
    for (i, v) in d.values.iter().enumerate() {
        let (l, r) = d.cell(i);
        t.push(vec![num(l), num(r), num(*v)]);
    }
    t
}

fn cmd_measures(m: &MeasureCommand) -> CliResult<Output> {
    match m {
        MeasureCommand::Parry { beta, grid } => {
            check_grid(*grid)?;
            let pd = ParryDensity::new(&parse_real(beta)?)?;
            let density = pd.grid(*grid);
            let t = density_table(&density);
            Output::new(
                &DensityResult {
                    normalizer: Some(pd.normalizer()),
                    orbit: Some(pd.orbit().to_vec()),
                    fixed_point_residual: None,
                    l1_to_closed_form: None,
                    digit_frequencies: pd.digit_frequencies()?,
                    density,
                },
                t,
            )
        }
        MeasureCommand::Gauss { grid } => {
            check_grid(*grid)?;
            let density = gauss_grid(*grid);
            let fmap = ExpansionKind::ContinuedFraction.fmap();
            let t = density_table(&density);
            Output::new(
                &DensityResult {
                    normalizer: None,
                    orbit: None,
                    fixed_point_residual: None,
                    l1_to_closed_form: None,
                    digit_frequencies: eta_phi(&density, fmap.as_ref(), MAX_ULAM_BRANCHES)?,
                    density,
                },
                t,
            )
        }
        MeasureCommand::Ulam {
            kind,
            m,
            beta,
            n,
            max_iter,
            scaled,
        } => {
            let ek = make_kind(*kind, *m, beta.as_deref())?;
            let fmap = ek.fmap();
            let potential = scaled.map(Potential::Scaled);
            let density = ulam_invariant_density(fmap.as_ref(), *n, *max_iter, potential.as_ref())?;
            let residual = ulam_fixed_point_residual(fmap.as_ref(), &density);
            let l1 = match (kind, &potential) {
                (KindName::Cf, None) => Some(density.l1_distance(gauss_density, 4)),
                (KindName::Beta, None) => {
                    let pd = ParryDensity::new(&parse_real(beta.as_deref().unwrap_or_default())?)?;
                    Some(density.l1_distance(|x| pd.density(x), 4))
                }
                (KindName::Mary, None) => Some(density.l1_distance(|_| 1.0, 1)),
                _ => None,
            };
            let t = density_table(&density);
            Output::new(
                &DensityResult {
                    normalizer: None,
                    orbit: None,
                    fixed_point_residual: Some(residual),
                    l1_to_closed_form: l1,
                    digit_frequencies: eta_phi(&density, fmap.as_ref(), MAX_ULAM_BRANCHES)?,
                    density,
                },
                t,
            )
        }
    }
}

fn check_grid(n: usize) -> CliResult<()> {
    if n == 0 {
        return Err(CliError::config("grid size must be positive"));
    }
    Ok(())
}

#[derive(Serialize)]
struct RealizeResult {
    #[serde(flatten)]
    tree: TreeRecord,
    #[serde(skip_serializing_if = "Option::is_none")]
    fit: Option<DimensionFit>,
}

fn cmd_realize(ctx: &Ctx, depth: usize, m: usize, rescale: bool) -> CliResult<Output> {
    let families = ctx.loaded.families()?;
    let omega = match ctx.loaded.omega(ctx.precision_bits)? {
        Some(o) => o,
        None if families.len() == 1 => vec![*families.keys().next().expect("one family"); depth],
        None => {
            return Err(CliError::config(
                "realize needs omega or a driving expansion with several families",
            ))
        }
    };
    let spec = MoranSpec::from_families(&families, m, omega, depth)?.with_rescale(rescale);
    let tree = realize(&spec)?;
    let fit = if depth >= 3 { Some(fit_dimension(&tree)?) } else { None };
    let record = tree.to_record();
    let mut t = Table::new(vec!["sigma", "left", "right"]);
    for n in &record.nodes {
        let sigma: Vec<String> = n.sigma.iter().map(u64::to_string).collect();
        t.push(vec![sigma.join("."), num(n.left), num(n.right)]);
    }
    Output::new(&RealizeResult { tree: record, fit }, t)
}

fn cmd_boxcount(tree: &Path, eps: &[f64]) -> CliResult<Output> {
    let v: serde_json::Value = serde_json::from_slice(&read_file(tree)?)?;
    let v = v.get("result").cloned().unwrap_or(v);
    let record: TreeRecord =
        serde_json::from_value(v).map_err(|e| CliError::config(format!("{}: not a tree: {e}", tree.display())))?;
    let bc = box_count_intervals(&record.leaves(), eps)?;
    let mut t = Table::new(vec!["eps", "count"]);
    for (e, c) in bc.eps.iter().zip(&bc.counts) {
        t.push(vec![num(*e), c.to_string()]);
    }
    Output::new(&bc, t)
}

#[derive(Serialize)]
struct TildeResult {
    k: usize,
    terms: usize,
    delta: f64,
    degenerate: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    full: Option<ZeroBounds>,
    eta_phi: BTreeMap<u64, f64>,
}

/// Frequencies of the invariant measure matching the expansion.
fn default_eta_phi(kind: &ExpansionKind) -> CliResult<FrequencyVector> {
    Ok(match kind {
        ExpansionKind::ContinuedFraction => FrequencyVector::gauss(),
        ExpansionKind::MAry { m } => FrequencyVector::uniform(0, *m as usize),
        ExpansionKind::Beta { beta } => ParryDensity::new(beta)?.digit_frequencies()?,
        other => {
            let fmap = other.fmap();
            let d = ulam_invariant_density(fmap.as_ref(), 1024, 10_000, None)?;
            eta_phi(&d, fmap.as_ref(), MAX_ULAM_BRANCHES)?
        }
    })
}

fn cmd_tilde_dim(ctx: &Ctx, src: &SourceArgs, k: usize, terms: usize, full: bool) -> CliResult<Output> {
    let seq = sequence(ctx, src)?;
    let eta = match &ctx.loaded.config.eta {
        Some(_) => ctx.loaded.eta(ctx.precision_bits)?,
        None => default_eta_phi(seq.kind())?,
    };
    let stats = DigitStats::from_digits(seq.digits(), Some(&eta));
    let sol = solve_delta_kn(&stats, &eta, k, terms, ctx.tol)?;
    let full = if full {
        Some(solve_delta_k(&stats, &eta, k, ctx.tol)?)
    } else {
        None
    };
    let first = eta.first_digit();
    let listed = (first..first + k as u64).map(|i| (i, eta.weight(i))).collect();
    let mut t = Table::new(vec!["k", "terms", "delta", "full_lower", "full_upper"]);
    t.push(vec![
        k.to_string(),
        terms.to_string(),
        num(sol.h),
        full.map_or(String::new(), |b| num(b.lower)),
        full.map_or(String::new(), |b| num(b.upper)),
    ]);
    Output::new(
        &TildeResult {
            k,
            terms,
            delta: sol.h,
            degenerate: sol.degenerate,
            full,
            eta_phi: listed,
        },
        t,
    )
}
