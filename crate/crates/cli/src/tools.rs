use std::path::Path;

use mwlil::{dist_to_k, energy, envelope_check, frac_membership, frac_power_apply, PathFunction, Truncation};
use serde_json::json;

use crate::args::{DistKArgs, FracArgs};
use crate::error::{CliError, CliResult};
use crate::output::{chain_info, columns, header, load, prepare_dir, row_cells, write_csv, write_report};

pub fn validate(spec: &Path) -> CliResult<()> {
    let chain = load(spec)?;
    println!("valid: {} states, d = {}", chain.kernel.n_states(), chain.dim());
    let pi: Vec<String> = chain.stationary.as_slice().iter().map(|p| format!("{p:.6}")).collect();
    println!("stationary: [{}]", pi.join(", "));
    if let Some(shift) = &chain.centering_shift {
        println!("auto-centered by {shift:?}");
    }
    Ok(())
}

/// Reads `t,f_1..f_d` rows into a path function.
pub fn read_path(path: &Path) -> CliResult<PathFunction> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let cols = reader.headers().map_err(|e| CliError::spec(e.to_string()))?.len();
    if cols < 2 {
        return Err(CliError::spec("path file needs columns t,f_1..f_d"));
    }
    let d = cols - 1;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::spec(e.to_string()))?;
        for (c, field) in record.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| CliError::spec(format!("row {line}: cannot parse '{field}' as a number")))?;
            if c == 0 {
                times.push(v);
            } else {
                values.push(v);
            }
        }
    }
    PathFunction::new(times, values, d).map_err(CliError::input)
}

pub fn dist_k(args: &DistKArgs) -> CliResult<()> {
    args.tol.check()?;
    if !(args.trace >= 0.0 && args.trace.is_finite()) {
        return Err(CliError::config(format!("trace must be a finite value >= 0, got {}", args.trace)));
    }
    let f = read_path(&args.path)?;
    let dist = dist_to_k(&f, args.trace, args.tol.dist)?;
    let out = json!({
        "knots": f.knots(),
        "d": f.dim(),
        "trace": args.trace,
        "energy": energy(&f),
        "envelope_violation": envelope_check(&f, args.trace),
        "dist_to_K": dist,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

pub fn frac(args: &FracArgs) -> CliResult<()> {
    args.check()?;
    let chain = load(&args.spec)?;
    prepare_dir(&args.out)?;
    let (kernel, g) = (&chain.kernel, chain.observable.matrix());
    let truncation = match args.terms {
        Some(k) => Truncation::Fixed(k),
        None => Truncation::Auto { tol: args.tol.frac, max_terms: args.tol.frac_terms },
    };
    let app = frac_power_apply(kernel, args.alpha, g, truncation)?;
    let states = kernel.states();
    write_csv(
        args.out.join("fracpower.csv"),
        &header(&["state"], columns("f", chain.dim())),
        (0..states.len()).map(|i| std::iter::once(states[i].clone()).chain(row_cells(&app.values, i)).collect()),
    )?;
    let membership = frac_membership(kernel, &chain.stationary, g, args.beta, args.n_max)?;
    let results = json!({
        "alpha": app.alpha,
        "terms": app.terms,
        "tail_bound": app.tail_bound,
        "coefficient_tail": app.coefficient_tail,
        "membership": {
            "beta": membership.beta,
            "n_grid": membership.n_grid,
            "scaled_norms": membership.scaled_norms,
            "sup": membership.sup,
            "tail_slope": membership.tail_slope,
            "bounded": membership.bounded,
            "conclusion": membership.conclusion(),
        },
    });
    write_report(&args.out, "frac", args, &args.tol, Some(chain_info(&chain)), results)?;
    println!("(I-Q)^{} g: {} terms, tail bound {:e}", app.alpha, app.terms, app.tail_bound);
    println!("{}", membership.conclusion());
    Ok(())
}
