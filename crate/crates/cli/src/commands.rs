//! The four subcommands. Each returns the CSV it produced.

use std::path::Path;

use chaosx_core::asympt::{asymptotic as asymptotic_at, required_constants, ConstantRequest};
use chaosx_core::constants::{
    pickands_with_ladder, piterbarg, CacheEntry, ConstantEstimate, ConstantKind, ConstantsCache, Domain, DriftFunctionSpec, Provenance,
};
use chaosx_core::gauss::{dump_paths, simulate_vector};
use chaosx_core::homog::{pdf_asympt, tail_asympt, validity_floor};
use chaosx_core::mc::{compare, simulation_grid};
use chaosx_core::Error;

use crate::config::Loaded;
use crate::report::{num, opt_num, ratio_svg, Csv, RatioPoint};
use crate::CliError;

pub const CONSTANTS_HEADER: &str = "alpha,a,f,domain,S,delta,n_rep,estimate,std_error,extrapolated";
pub const ASYMPTOTIC_HEADER: &str = "u,value,regime,alpha_star,beta_star,H_alpha,P_const,integral,h0";
pub const VALIDATE_HEADER: &str = "u,p_hat,ci_low,ci_high,n,hits,grid_step,asympt,ratio,regime,seed";
pub const TAIL_HEADER: &str = "x,tail_asympt,pdf_asympt";

fn load_cache(loaded: &Loaded) -> Result<ConstantsCache, CliError> {
    ConstantsCache::load(&loaded.cache_path).map_err(|e| match e {
        Error::Io(_) | Error::Json(_) | Error::InvalidSpec(_) => {
            CliError::Config(format!("constants cache {} is unusable: {e}", loaded.cache_path.display()))
        }
        other => other.into(),
    })
}

fn request_key(r: &ConstantRequest) -> String {
    match r {
        ConstantRequest::Pickands { alpha } => ConstantsCache::pickands_key(*alpha),
        ConstantRequest::Piterbarg { alpha, a, f, domain } => ConstantsCache::piterbarg_key(*alpha, *a, f, *domain),
    }
}

fn estimate(loaded: &Loaded, r: &ConstantRequest) -> Result<CacheEntry, CliError> {
    let opts = &loaded.config.constants;
    let entry = match *r {
        ConstantRequest::Pickands { alpha } => {
            log::info!("estimating H_{alpha}");
            let (estimate, _) = pickands_with_ladder(alpha, &opts.pickands)?;
            let p = &opts.pickands;
            CacheEntry {
                kind: ConstantKind::Pickands,
                alpha,
                a: 1.0,
                f: DriftFunctionSpec::Zero.descriptor(),
                domain: Domain::HalfLine,
                estimate,
                provenance: Provenance {
                    s_list: p.s_list.clone(),
                    delta_list: p.delta_list.clone(),
                    n_rep: p.n_rep,
                    seed: p.seed,
                    estimator: serde_json::to_value(p.estimator).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                },
            }
        }
        ConstantRequest::Piterbarg { alpha, a, ref f, domain } => {
            log::info!("estimating Piterbarg constant for alpha = {alpha}, a = {a}, f = {}", f.descriptor());
            let estimate = piterbarg(alpha, a, f, domain, &opts.piterbarg)?;
            let p = &opts.piterbarg;
            CacheEntry {
                kind: ConstantKind::Piterbarg,
                alpha,
                a,
                f: f.descriptor(),
                domain,
                estimate,
                provenance: Provenance {
                    s_list: vec![p.s],
                    delta_list: vec![p.delta],
                    n_rep: p.n_rep,
                    seed: p.seed,
                    estimator: "truncated_sup".into(),
                },
            }
        }
    };
    Ok(entry)
}

fn constants_row(csv: &mut Csv, e: &CacheEntry) {
    let est: &ConstantEstimate = &e.estimate;
    csv.row([
        num(e.alpha),
        num(e.a),
        e.f.clone(),
        e.domain.to_string(),
        num(est.horizon),
        num(est.delta),
        est.n_rep.to_string(),
        num(est.value),
        num(est.std_error),
        est.extrapolated.to_string(),
    ]);
}

/// Estimates every requested constant missing from the cache (all of them
/// with `force`), saving the cache after each new estimate.
pub fn constants(loaded: &Loaded, force: bool) -> Result<Csv, CliError> {
    let requests = match (&loaded.config.constants.requests, &loaded.model) {
        (Some(r), _) => r.clone(),
        (None, Some(model)) => required_constants(model)?,
        (None, None) => {
            return Err(CliError::Config("config error at `constants.requests`: give a request list or a model block".into()));
        }
    };
    let mut cache = load_cache(loaded)?;
    let mut csv = Csv::new(CONSTANTS_HEADER);
    for r in &requests {
        let key = request_key(r);
        if force || !cache.contains(&key) {
            let entry = estimate(loaded, r)?;
            for w in &entry.estimate.warnings {
                eprintln!("chaosx: warning: {key}: {w}");
            }
            cache.insert(entry);
            cache.save(&loaded.cache_path)?;
        } else {
            log::info!("reusing cached {key}");
        }
        constants_row(&mut csv, cache.get(&key).expect("entry present"));
    }
    Ok(csv)
}

pub fn asymptotic(loaded: &Loaded) -> Result<Csv, CliError> {
    let model = loaded.model("asymptotic")?;
    let u_list = loaded.u_list("asymptotic")?;
    let cache = load_cache(loaded)?;
    let mut csv = Csv::new(ASYMPTOTIC_HEADER);
    for &u in u_list {
        let r = asymptotic_at(model, &cache, u)?;
        csv.row([
            num(u),
            num(r.value),
            r.regime.to_string(),
            num(r.alpha_star),
            num(r.beta_star),
            opt_num(r.constants.h_alpha),
            opt_num(r.constants.p_const),
            opt_num(r.constants.integral),
            num(r.constants.h0),
        ]);
    }
    Ok(csv)
}

/// Runs the comparison. The second value is the under-powered error raised
/// after the CSV has been written when no threshold saw a single hit.
pub fn validate(loaded: &Loaded, svg: Option<&Path>) -> Result<(Csv, Option<CliError>), CliError> {
    let model = loaded.model("validate")?;
    let u_list = loaded.u_list("validate")?;
    let run = &loaded.config.run;
    let cache = load_cache(loaded)?;
    let rows = compare(model, &cache, u_list, run.grid_step, run.n_samples, run.seed)?;

    let mut csv = Csv::new(VALIDATE_HEADER);
    for r in &rows {
        for w in &r.mc.warnings {
            eprintln!("chaosx: warning: {w}");
        }
        csv.row([
            num(r.u),
            num(r.mc.p_hat),
            num(r.mc.ci_low),
            num(r.mc.ci_high),
            r.mc.n.to_string(),
            r.mc.hits.to_string(),
            num(r.mc.grid_step),
            num(r.asympt_value),
            num(r.ratio),
            r.regime.to_string(),
            r.mc.seed.to_string(),
        ]);
    }

    if let Some(path) = svg {
        let points: Vec<RatioPoint> = rows
            .iter()
            .map(|r| RatioPoint { u: r.u, ratio: r.ratio, low: r.mc.ci_low / r.asympt_value, high: r.mc.ci_high / r.asympt_value })
            .collect();
        std::fs::write(path, ratio_svg(&points, loaded.config.plot.log_y))
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    }

    if let Some(dir) = &run.dump_paths {
        let grid = simulation_grid(model, u_list[0], run.grid_step)?;
        let spec = &model.spec;
        let paths = simulate_vector(spec.homog.d, &spec.corr, &spec.var, &grid, run.seed)?;
        dump_paths(dir, &paths)?;
    }

    let deferred = rows.iter().all(|r| r.mc.hits == 0).then(|| {
        CliError::UnderPowered(format!(
            "no exceedance at any threshold with n = {}; increase run.n_samples or lower run.u_list",
            run.n_samples
        ))
    });
    Ok((csv, deferred))
}

/// Tail and density asymptotics of `g(xi)`; points below the validity floor
/// are kept as `invalid` rows.
pub fn tail(loaded: &Loaded) -> Result<Csv, CliError> {
    let model = loaded.model("tail")?;
    let xs: &[f64] = match &loaded.config.tail {
        Some(t) if !t.x_list.is_empty() => &t.x_list,
        Some(_) => return Err(CliError::Config("config error at `tail.x_list`: the list is empty".into())),
        None => loaded.u_list("tail")?,
    };
    let a = &model.analysis;
    let floor = validity_floor(a);
    let mut csv = Csv::new(TAIL_HEADER);
    for &x in xs {
        if !x.is_finite() {
            return Err(CliError::Config(format!("config error at `tail.x_list`: {x} is not finite")));
        }
        if x < floor {
            csv.row([num(x), "invalid".into(), "invalid".into()]);
        } else {
            csv.row([num(x), num(tail_asympt(a, x)?), num(pdf_asympt(a, x)?)]);
        }
    }
    Ok(csv)
}
