use std::fs;

use mwlil::{cluster_probe, diffusion_exact, lil_run, martingale_kernel, poisson_limit, LilConfig, LilReport};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::args::LilArgs;
use crate::error::CliResult;
use crate::output::{cell, chain_info, header, load, prepare_dir, write_csv, write_report};
use crate::svg::paths_svg;

/// Checkpoints summarised at the end of a run.
pub const FINAL_WINDOW: usize = 20;
/// Envelope violations above this count as exceedances.
pub const ENVELOPE_SLACK: f64 = 0.25;
/// Snapshots drawn in paths.svg.
const SVG_SNAPSHOTS: usize = 5;

pub fn run(args: &LilArgs) -> CliResult<()> {
    args.check()?;
    let chain = load(&args.spec)?;
    prepare_dir(&args.out)?;
    let (kernel, pi, obs) = (&chain.kernel, &chain.stationary, &chain.observable);

    let h = poisson_limit(kernel, pi, obs.matrix())?.h;
    let tr_d = diffusion_exact(&martingale_kernel(kernel, pi, &h)).trace.max(0.0);

    let base = LilConfig {
        n_max: args.n_max,
        rho: args.rho,
        seed: args.seed,
        replica: 0,
        centered: args.centered,
        grid: args.grid,
        burn_in: args.burn_in,
        dist_tol: args.tol.dist,
        ..LilConfig::default()
    };
    let reports: Vec<LilReport> = (0..args.replicas as u64)
        .into_par_iter()
        .map(|replica| lil_run(kernel, pi, obs, tr_d, &LilConfig { replica, ..base.clone() }))
        .collect::<mwlil::Result<_>>()?;

    for (r, rep) in reports.iter().enumerate() {
        let name = if r == 0 { "lil.csv".to_string() } else { format!("lil_replica_{r}.csv") };
        write_csv(
            args.out.join(name),
            &header(&["k", "n_k", "stat", "running_max", "sup_stat", "dist_to_K"], []),
            rep.checkpoints.iter().map(|c| {
                vec![
                    c.k.to_string(),
                    c.n.to_string(),
                    cell(c.stat),
                    cell(c.running_max),
                    cell(c.sup_stat),
                    cell(c.dist_to_k.value),
                ]
            }),
        )?;
    }
    let first = &reports[0];
    write_csv(
        args.out.join("lil_detail.csv"),
        &header(
            &["k", "n_k", "sup_error_bound", "dist_lower", "dist_upper", "certified", "envelope_violation"],
            [],
        ),
        first.checkpoints.iter().map(|c| {
            vec![
                c.k.to_string(),
                c.n.to_string(),
                cell(c.sup_error_bound),
                cell(c.dist_to_k.lower),
                cell(c.dist_to_k.upper),
                c.dist_to_k.certified.to_string(),
                cell(c.envelope_violation),
            ]
        }),
    )?;

    let history: Vec<_> = first
        .checkpoints
        .iter()
        .zip(&first.snapshots)
        .filter(|(c, _)| c.n >= args.burn_in)
        .map(|(c, f)| (c.n, f))
        .collect();
    if args.svg {
        let tail = &history[history.len().saturating_sub(SVG_SNAPSHOTS)..];
        fs::write(args.out.join("paths.svg"), paths_svg(tail, tr_d))?;
    }
    let probe = if history.is_empty() { None } else { Some(cluster_probe(&history, tr_d, chain.dim())?) };

    let replicas: Vec<Value> = reports.iter().map(summary).collect();
    let results = json!({
        "trace": tr_d,
        "target": first.target,
        "verdict": first.verdict_text(),
        "replicas": replicas,
        "cluster_probe": probe.map(|p| json!({ "min_distance": p.min_distance, "argmin_n": p.argmin_n })),
    });
    write_report(&args.out, "lil", args, &args.tol, Some(chain_info(&chain)), results)?;

    for (r, rep) in reports.iter().enumerate() {
        println!("replica {r}: running max {:.4} (target {:.4}): {}", rep.final_running_max(), rep.target, rep);
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

/// Median distance and envelope exceedances over the final checkpoints.
pub fn final_window(rep: &LilReport) -> (f64, usize, bool) {
    let tail = &rep.checkpoints[rep.checkpoints.len().saturating_sub(FINAL_WINDOW)..];
    let mut dists: Vec<f64> = tail.iter().map(|c| c.dist_to_k.value).collect();
    dists.sort_by(f64::total_cmp);
    let median = match dists.len() {
        0 => 0.0,
        n if n % 2 == 1 => dists[n / 2],
        n => 0.5 * (dists[n / 2 - 1] + dists[n / 2]),
    };
    let exceed = tail.iter().filter(|c| c.envelope_violation > ENVELOPE_SLACK).count();
    let certified = tail.iter().all(|c| c.dist_to_k.certified);
    (median, exceed, certified)
}

fn summary(rep: &LilReport) -> Value {
    let (median, exceed, certified) = final_window(rep);
    json!({
        "replica": rep.config.replica,
        "checkpoints": rep.checkpoints.len(),
        "final_running_max": rep.final_running_max(),
        "max_abs_sum": rep.max_abs_sum,
        "verdict": rep.verdict_text(),
        "final_window": {
            "size": FINAL_WINDOW.min(rep.checkpoints.len()),
            "median_dist_to_K": median,
            "envelope_exceedances": exceed,
            "envelope_slack": ENVELOPE_SLACK,
            "all_certified": certified,
        },
    })
}
