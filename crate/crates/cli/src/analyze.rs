use mwlil::chain::simulate_replica;
use mwlil::{
    decompose_path, diffusion_empirical, diffusion_exact, frac_membership, frac_power_apply,
    h_eps_convergence, martingale_kernel, max_increment_stat, mw_fit, poisson_limit,
    remainder_growth, simulate, solve_resolvent, RemainderConfig, Truncation,
};
use serde_json::json;

use crate::args::AnalyzeArgs;
use crate::error::CliResult;
use crate::output::{cell, chain_info, columns, header, load, nested, prepare_dir, row_cells, write_csv, write_report};

pub fn run(args: &AnalyzeArgs) -> CliResult<()> {
    args.check()?;
    let chain = load(&args.spec)?;
    prepare_dir(&args.out)?;
    let out = &args.out;
    let (kernel, pi, obs) = (&chain.kernel, &chain.stationary, &chain.observable);
    let g = obs.matrix();
    let d = chain.dim();
    let states = kernel.states();

    let resolvent = solve_resolvent(kernel, g, args.eps)?;
    write_csv(
        out.join("resolvent.csv"),
        &header(&["state"], columns("h", d)),
        (0..states.len()).map(|i| std::iter::once(states[i].clone()).chain(row_cells(&resolvent.h, i)).collect()),
    )?;

    let poisson = poisson_limit(kernel, pi, g)?;
    let qh = kernel.apply(&poisson.h);
    write_csv(
        out.join("poisson.csv"),
        &header(&["state"], columns("h", d).chain(columns("Qh", d))),
        (0..states.len()).map(|i| {
            std::iter::once(states[i].clone()).chain(row_cells(&poisson.h, i)).chain(row_cells(&qh, i)).collect()
        }),
    )?;

    let mw = mw_fit(kernel, pi, g, args.n_max, args.tol.alpha_margin)?;
    write_csv(
        out.join("mw_fit.csv"),
        &header(&["n", "V_n"], []),
        mw.n_grid.iter().zip(&mw.v).map(|(n, v)| vec![n.to_string(), cell(*v)]),
    )?;

    let heps = h_eps_convergence(kernel, pi, g, &args.eps_grid, mw.alpha_hat)?;
    write_csv(
        out.join("heps.csv"),
        &header(&["epsilon", "h_error", "kernel_error", "h_norm", "scaled_h_norm"], []),
        heps.iter().map(|r| {
            vec![cell(r.epsilon), cell(r.h_error), cell(r.kernel_error), cell(r.h_norm), cell(r.scaled_h_norm)]
        }),
    )?;

    let mk = martingale_kernel(kernel, pi, &poisson.h);
    let path = simulate(kernel, pi, obs, args.path_len, args.seed)?;
    let dec = decompose_path(&path, kernel, pi, obs, args.eps)?;
    let decomp_header = header(
        &["k"],
        columns("T", d)
            .chain(columns("M_eps", d))
            .chain(columns("epsT_h", d))
            .chain(columns("R_eps", d))
            .chain(columns("M", d))
            .chain(columns("R", d)),
    );
    write_csv(
        out.join("decomp.csv"),
        &decomp_header,
        (0..=dec.len()).map(|k| {
            let mut row = vec![k.to_string()];
            for series in [&dec.forward_sum, &dec.m_eps, &dec.eps_sum_h, &dec.r_eps, &dec.m_lim, &dec.r_lim] {
                row.extend(dec.row(series, k).iter().map(|&v| cell(v)));
            }
            row
        }),
    )?;
    let maxinc = max_increment_stat(&path, &mk)?;
    write_csv(
        out.join("maxinc.csv"),
        &header(&["n", "stat"], []),
        maxinc.iter().map(|(n, s)| vec![n.to_string(), cell(*s)]),
    )?;

    let exact = diffusion_exact(&mk);
    let long = simulate_replica(kernel, pi, obs, args.diffusion_steps, args.seed, 1)?;
    let emp = diffusion_empirical(std::slice::from_ref(&long), &mk)?;
    drop(long);
    let mut diff_rows = Vec::new();
    for i in 0..d {
        for j in 0..d {
            diff_rows.push(vec!["exact".into(), i.to_string(), j.to_string(), cell(exact.matrix[(i, j)]), String::new()]);
        }
    }
    for i in 0..d {
        for j in 0..d {
            diff_rows.push(vec![
                "empirical".into(),
                i.to_string(),
                j.to_string(),
                cell(emp.estimate.matrix[(i, j)]),
                cell(emp.stderr[(i, j)]),
            ]);
        }
    }
    write_csv(out.join("diffusion.csv"), &header(&["method", "i", "j", "value", "stderr"], []), diff_rows)?;

    let truncation = Truncation::Auto { tol: args.tol.frac, max_terms: args.tol.frac_terms };
    let frac = frac_power_apply(kernel, args.alpha, g, truncation)?;
    write_csv(
        out.join("fracpower.csv"),
        &header(&["state"], columns("f", d)),
        (0..states.len()).map(|i| std::iter::once(states[i].clone()).chain(row_cells(&frac.values, i)).collect()),
    )?;
    let membership = frac_membership(kernel, pi, g, args.beta, args.n_max)?;

    let hi = args.n_max.ilog2();
    let rem = remainder_growth(kernel, pi, obs, &RemainderConfig::dyadic(args.replicas, 6, hi, args.seed))?;
    write_csv(
        out.join("remainder.csv"),
        &header(&["n", "E_R2", "stderr", "max_R_stat", "max_m_stat"], []),
        (0..rem.n_grid.len()).map(|i| {
            vec![
                rem.n_grid[i].to_string(),
                cell(rem.e_r2[i]),
                cell(rem.e_r2_stderr[i]),
                cell(rem.max_r_stat[i]),
                cell(rem.max_m_stat[i]),
            ]
        }),
    )?;

    let r_lim_max = dec.r_lim.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let results = json!({
        "resolvent": { "epsilon": resolvent.epsilon, "residual": resolvent.residual },
        "poisson": {
            "continuation_error": poisson.continuation_error,
            "h_l2_norm": pi.l2_norm(&poisson.h),
        },
        "martingale": {
            "max_conditional_mean": mk.max_conditional_mean(),
            "l2_norm_sq": mk.l2_norm_sq(),
        },
        "decomposition": {
            "path_len": dec.len(),
            "epsilon": dec.epsilon,
            "max_identity_deviation": dec.max_identity_deviation(),
            "max_abs_remainder": r_lim_max,
        },
        "mw_fit": {
            "alpha_hat": mw.alpha_hat,
            "alpha_ok": mw.alpha_ok,
            "degenerate": mw.degenerate,
            "v1": mw.v1,
            "margin": mw.margin,
        },
        "diffusion": {
            "trace": exact.trace,
            "matrix": nested(&exact.matrix),
            "min_eigenvalue": exact.min_eigenvalue,
            "psd": exact.is_psd(),
            "empirical": {
                "trace": emp.estimate.trace,
                "matrix": nested(&emp.estimate.matrix),
                "stderr": nested(&emp.stderr),
                "steps": emp.steps,
                "batches": emp.batches,
                "max_z_score": emp.max_z_score(&exact),
            },
        },
        "fracpower": {
            "alpha": frac.alpha,
            "terms": frac.terms,
            "tail_bound": frac.tail_bound,
            "coefficient_tail": frac.coefficient_tail,
        },
        "membership": {
            "beta": membership.beta,
            "sup": membership.sup,
            "tail_slope": membership.tail_slope,
            "bounded": membership.bounded,
            "conclusion": membership.conclusion(),
        },
        "remainder": {
            "paths": args.replicas,
            "beta_hat": rem.beta_hat,
            "alpha_hat": rem.alpha_hat,
            "consistent": rem.consistent,
        },
        "max_increment": { "final": maxinc.last().map(|&(n, s)| json!({ "n": n, "stat": s })) },
    });
    write_report(out, "analyze", args, &args.tol, Some(chain_info(&chain)), results)?;

    println!("trace D        {}", exact.trace);
    println!("alpha_hat      {} ({})", mw.alpha_hat, if mw.alpha_ok { "ok" } else { "not below 1/2 - margin" });
    println!("beta_hat       {}", rem.beta_hat);
    println!("empirical D z  {:.3}", emp.max_z_score(&exact));
    println!("wrote {}", out.display());
    Ok(())
}
