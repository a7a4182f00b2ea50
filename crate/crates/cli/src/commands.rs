use std::fs;
use std::path::Path;

use serde_json::json;

use schauder_core::experiments::verify::{summary_table, verify_all, CRITERIA};
use schauder_core::experiments::{
    cell, corpus, mapping_ratio, mollification_rates, norm_equivalence, operator_spec, perturbation_suite,
    potential_high_order, potential_regularity, schauder_ratio, write_csv, write_json, CsvTable, ExperimentConfig,
    Manifest, Moduli, RatioReport,
};
use schauder_core::funcspace::{holder_norm, GridSpec};
use schauder_core::heatkernel::{check_derivative_bound, check_twosided, compute_symbol, density, BoxSetup};
use schauder_core::montecarlo::{ks_compare, sample_sbm};
use schauder_core::nonlocal::DiscreteOperator;
use schauder_core::Error;

use crate::{Command, Common};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_GUARD: u8 = 2;
pub const EXIT_ACCEPTANCE: u8 = 3;

/// What a command produced, for the manifest.
#[derive(Default)]
struct Produced {
    seeds: Vec<u64>,
    files: Vec<String>,
    failed_checks: Vec<u8>,
}

impl Produced {
    fn json<T: serde::Serialize>(&mut self, dir: &Path, name: &str, v: &T) -> schauder_core::Result<()> {
        write_json(&dir.join(name), v)?;
        self.files.push(name.into());
        Ok(())
    }

    fn csv(&mut self, dir: &Path, name: &str, t: &CsvTable) -> schauder_core::Result<()> {
        write_csv(&dir.join(name), t)?;
        self.files.push(name.into());
        Ok(())
    }
}

fn default_config() -> serde_json::Value {
    json!({
        "name": "default",
        "psi": {"family": "power", "alpha": 0.5},
        "varphi": {"family": "power", "alpha": 1.0}
    })
}

fn load(common: &Common, needs_config: bool) -> schauder_core::Result<ExperimentConfig> {
    match &common.config {
        Some(p) => ExperimentConfig::load(p, &common.overrides),
        None if needs_config => Err(Error::Config("--config is required for this subcommand".into())),
        None => {
            let mut v = default_config();
            for o in &common.overrides {
                schauder_core::experiments::apply_override(&mut v, o)?;
            }
            ExperimentConfig::from_value(v)
        }
    }
}

fn configure_threads(cfg: &ExperimentConfig) -> schauder_core::Result<()> {
    let requested = match cfg.threads {
        Some(t) => Some(t),
        None => match std::env::var("NONLOCAL_THREADS") {
            Ok(s) => Some(
                s.trim()
                    .parse::<usize>()
                    .ok()
                    .filter(|t| *t > 0)
                    .ok_or_else(|| Error::Config(format!("NONLOCAL_THREADS='{s}' is not a positive integer")))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(t) = requested {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numerical_guard() {
        EXIT_GUARD
    } else {
        EXIT_CONFIG
    }
}

pub fn run(cmd: Command) -> u8 {
    let (name, common) = match &cmd {
        Command::Norms(c) => ("norms", c),
        Command::Symbol(c) => ("symbol", c),
        Command::Apply(c) => ("apply", c),
        Command::Heatkernel(c) => ("heatkernel", c),
        Command::Solve(c) => ("solve", c),
        Command::Simulate(c) => ("simulate", c),
        Command::Schauder(c) => ("schauder", c),
        Command::Mapping(c) => ("mapping", c),
        Command::Perturbation(c) => ("perturbation", c),
        Command::VerifyAll(c) => ("verify-all", c),
    };
    let cfg = match load(common, name != "verify-all") {
        Ok(c) => c,
        Err(e) => {
            eprintln!("schauder {name}: {e}");
            return exit_code(&e);
        }
    };
    if let Err(e) = configure_threads(&cfg) {
        eprintln!("schauder {name}: {e}");
        return EXIT_CONFIG;
    }
    let dir = common.output_dir.as_path();
    if let Err(e) = fs::create_dir_all(dir) {
        eprintln!("schauder {name}: cannot create {}: {e}", dir.display());
        return EXIT_CONFIG;
    }
    let result = match name {
        "norms" => norms(&cfg, dir),
        "symbol" => symbol(&cfg, dir),
        "apply" => apply(&cfg, dir),
        "heatkernel" => heatkernel(&cfg, dir),
        "solve" => solve(&cfg, dir),
        "simulate" => simulate(&cfg, dir),
        "schauder" => ratio_command(&cfg, dir, schauder_ratio(&cfg)),
        "mapping" => ratio_command(&cfg, dir, mapping_ratio(&cfg)),
        "perturbation" => perturbation(&cfg, dir),
        _ => verify(&cfg, dir),
    };
    let produced = match result {
        Ok(p) => p,
        Err(e) => {
            eprintln!("schauder {name}: {e}");
            return exit_code(&e);
        }
    };
    let mut files = produced.files.clone();
    files.push("manifest.json".into());
    let manifest = Manifest {
        tool: "schauder".into(),
        version: schauder_core::VERSION.into(),
        command: name.into(),
        config_name: cfg.name.clone(),
        config_hash: cfg.hash(),
        seeds: produced.seeds.clone(),
        threads: rayon::current_num_threads(),
        outputs: files,
    };
    if let Err(e) = write_json(&dir.join("manifest.json"), &manifest) {
        eprintln!("schauder {name}: {e}");
        return EXIT_CONFIG;
    }
    if produced.failed_checks.is_empty() {
        EXIT_OK
    } else {
        let ids: Vec<String> = produced.failed_checks.iter().map(|i| i.to_string()).collect();
        eprintln!("schauder {name}: acceptance checks failed: {}", ids.join(", "));
        EXIT_ACCEPTANCE
    }
}

type Outcome = schauder_core::Result<Produced>;

fn corpus_seeds(cfg: &ExperimentConfig, size: usize) -> Vec<u64> {
    (0..size as u64).map(|i| cfg.corpus.seed + i).collect()
}

fn finest_grid(cfg: &ExperimentConfig) -> schauder_core::Result<GridSpec> {
    GridSpec::new(cfg.dim, *cfg.resolutions.last().expect("validated non-empty"), cfg.period)
}

fn norms(cfg: &ExperimentConfig, dir: &Path) -> Outcome {
    let m = Moduli::from_config(cfg)?;
    let mut out = Produced { seeds: corpus_seeds(cfg, cfg.corpus.size), ..Default::default() };
    let eq = norm_equivalence(&m.psi, cfg.dim, cfg.period, &cfg.resolutions, cfg.corpus.seed, cfg.corpus.size)?;
    let mut t = CsvTable::new(&["n", "max_ratio", "max_reciprocal"]);
    for tr in &eq.traces {
        t.push(vec![cell(tr.n), cell(tr.max_ratio), cell(tr.max_reciprocal)]);
    }
    out.csv(dir, "equivalence.csv", &t)?;
    let grid = finest_grid(cfg)?;
    let eps: Vec<f64> = (3..=7).map(|k| 2f64.powi(-k)).filter(|e| *e >= 2.0 * grid.dx()).collect();
    let moll = if eps.len() >= 2 {
        let rep = mollification_rates(&m.psi, grid, &eps, cfg.corpus.seed, cfg.corpus.size)?;
        let mut t = CsvTable::new(&["seed", "error_slope", "second_derivative_slope"]);
        for f in &rep.fits {
            t.push(vec![cell(f.seed), cell(f.error_slope), cell(f.second_derivative_slope)]);
        }
        out.csv(dir, "mollification.csv", &t)?;
        Some(rep)
    } else {
        None
    };
    out.json(dir, "report.json", &json!({"config_hash": cfg.hash(), "equivalence": eq, "mollification": moll}))?;
    Ok(out)
}

fn symbol(cfg: &ExperimentConfig, dir: &Path) -> Outcome {
    let m = Moduli::from_config(cfg)?;
    let spec = operator_spec(cfg, &m.varphi)?;
    let grid = finest_grid(cfg)?;
    let x0 = cfg.perturbation.x0;
    let table = compute_symbol(&spec.kernel, x0, grid)?;
    let mut out = Produced::default();
    table.write_csv(&dir.join("symbol.csv"))?;
    out.files.push("symbol.csv".into());
    out.json(
        dir,
        "report.json",
        &json!({
            "config_hash": cfg.hash(),
            "n": grid.n,
            "x0": x0,
            "min_nonzero": table.min_nonzero(),
            "compensator": spec.compensator,
        }),
    )?;
    Ok(out)
}

fn apply(cfg: &ExperimentConfig, dir: &Path) -> Outcome {
    let m = Moduli::from_config(cfg)?;
    let spec = operator_spec(cfg, &m.varphi)?;
    let grid = finest_grid(cfg)?;
    let op = DiscreteOperator::new(&spec, grid)?;
    let (seed, u) = corpus(&m.phipsi, grid, cfg.corpus.seed, 1)?.remove(0);
    let lu = op.apply(&u)?;
    let mut out = Produced { seeds: vec![seed], ..Default::default() };
    let mut t = CsvTable::new(&["index", "u", "lu"]);
    for i in 0..grid.len() {
        t.push(vec![cell(i), cell(u.values[i]), cell(lu.values[i])]);
    }
    out.csv(dir, "apply.csv", &t)?;
    if cfg.write_grids {
        u.write_raw(&dir.join("u.f64"))?;
        lu.write_raw(&dir.join("lu.f64"))?;
        out.files.extend(["u.f64", "u.json", "lu.f64", "lu.json"].map(String::from));
    }
    out.json(
        dir,
        "report.json",
        &json!({
            "config_hash": cfg.hash(),
            "seed": seed,
            "n": grid.n,
            "compensator": spec.compensator,
            "u_norm": holder_norm(&u, &m.phipsi)?.norm,
            "lu_norm": holder_norm(&lu, &m.psi)?.norm,
            "lu_sup": lu.sup_norm(),
        }),
    )?;
    Ok(out)
}

fn heatkernel(cfg: &ExperimentConfig, dir: &Path) -> Outcome {
    let h = &cfg.heatkernel;
    h.bernstein.validate()?;
    let setup = BoxSetup { dim: cfg.dim, n: h.n, period: h.period, images: h.images };
    let two = check_twosided(&h.bernstein, &h.times, &h.radii, &setup)?;
    let two_fine = check_twosided(&h.bernstein, &h.times, &h.radii, &setup.refined())?;
    let der = check_derivative_bound(&h.bernstein, h.derivative_order, &h.times, &h.radii, &setup)?;
    let mut out = Produced::default();
    let mut t = CsvTable::new(&["bound", "t", "x", "value", "reference", "ratio"]);
    for (name, rep) in [("two_sided", &two), ("derivative", &der)] {
        for s in &rep.samples {
            t.push(vec![name.into(), cell(s.t), cell(s.x), cell(s.value), cell(s.reference), cell(s.ratio)]);
        }
    }
    out.csv(dir, "bounds.csv", &t)?;
    if cfg.write_grids {
        for (i, &time) in h.times.iter().enumerate() {
            let q = density(&h.bernstein, time, setup.grid()?)?.with_free_space(h.images)?;
            let name = format!("density_{i}.f64");
            q.values().write_raw(&dir.join(&name))?;
            out.files.push(name);
            out.files.push(format!("density_{i}.json"));
        }
    }
    out.json(
        dir,
        "report.json",
        &json!({
            "config_hash": cfg.hash(),
            "two_sided_c_hat": two.c_hat,
            "two_sided_c_hat_refined": two_fine.c_hat,
            "derivative_c_hat": der.c_hat,
            "derivative_order": h.derivative_order,
            "setup": setup,
        }),
    )?;
    Ok(out)
}

fn ratio_outputs(out: &mut Produced, dir: &Path, rep: &RatioReport, stem: &str) -> schauder_core::Result<()> {
    out.csv(dir, &format!("{stem}.csv"), &rep.to_csv())?;
    let mut t = CsvTable::new(&["n", "seed_base", "c_hat"]);
    for tr in &rep.traces {
        t.push(vec![cell(tr.n), cell(tr.seed_base), cell(tr.c_hat)]);
    }
    out.csv(dir, &format!("{stem}_by_resolution.csv"), &t)?;
    for s in &rep.seeds {
        if !out.seeds.contains(s) {
            out.seeds.push(*s);
        }
    }
    Ok(())
}

fn ratio_command(_cfg: &ExperimentConfig, dir: &Path, rep: schauder_core::Result<RatioReport>) -> Outcome {
    let rep = rep?;
    let mut out = Produced::default();
    ratio_outputs(&mut out, dir, &rep, "ratios")?;
    out.json(dir, "report.json", &rep)?;
    Ok(out)
}

fn solve(cfg: &ExperimentConfig, dir: &Path) -> Outcome {
    let primary = potential_regularity(cfg)?;
    let high = potential_high_order(cfg)?;
    let mut out = Produced::default();
    ratio_outputs(&mut out, dir, &primary, "ratios")?;
    ratio_outputs(&mut out, dir, &high, "ratios_high_order")?;
    out.json(dir, "report.json", &json!({"potential": primary, "high_order": high}))?;
    Ok(out)
}

fn simulate(cfg: &ExperimentConfig, dir: &Path) -> Outcome {
    let s = &cfg.simulate;
    let path = sample_sbm(s.alpha, s.t, s.samples, cfg.dim, s.seed)?;
    let mut out = Produced { seeds: vec![s.seed], ..Default::default() };
    path.write_csv(&dir.join("samples.csv"))?;
    out.files.push("samples.csv".into());
    let ks = if cfg.dim == 1 {
        let q = density(&schauder_core::modulus::Bernstein::stable(s.alpha)?, s.t, GridSpec::new(1, s.n, s.period)?)?
            .with_free_space(cfg.heatkernel.images)?;
        Some(ks_compare(&path.first_axis(), &q)?)
    } else {
        None
    };
    out.json(dir, "report.json", &json!({"config_hash": cfg.hash(), "simulate": s, "ks": ks}))?;
    Ok(out)
}

fn perturbation(cfg: &ExperimentConfig, dir: &Path) -> Outcome {
    let rep = perturbation_suite(cfg)?;
    let mut out = Produced { seeds: corpus_seeds(cfg, cfg.perturbation.corpus_size), ..Default::default() };
    out.csv(dir, "perturbation.csv", &rep.to_csv())?;
    let mut t = CsvTable::new(&["r", "coefficient"]);
    for (r, c) in &rep.coefficients {
        t.push(vec![cell(r), cell(c)]);
    }
    out.csv(dir, "coefficients.csv", &t)?;
    out.json(dir, "report.json", &rep)?;
    Ok(out)
}

fn verify(cfg: &ExperimentConfig, dir: &Path) -> Outcome {
    let outcomes = verify_all(cfg.profile);
    let mut out = Produced::default();
    for o in &outcomes {
        println!("criterion {:>2} {:<28} {}  {}", o.id, o.title, if o.passed { "PASS" } else { "FAIL" }, o.summary);
        out.csv(dir, &format!("criterion_{:02}.csv", o.id), &o.table)?;
        if !o.passed {
            out.failed_checks.push(o.id);
        }
    }
    out.csv(dir, "acceptance.csv", &summary_table(&outcomes))?;
    out.json(
        dir,
        "report.json",
        &json!({"config_hash": cfg.hash(), "profile": cfg.profile, "criteria": CRITERIA.len(), "outcomes": outcomes}),
    )?;
    Ok(out)
}
