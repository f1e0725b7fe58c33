use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use dpfdr::dp::calibrate;
use dpfdr::fdr::{estimate_ck_finite, estimate_ck_many, CkEstimate};
use dpfdr::procedures::{gamma_cutoffs, inflated_level, private_bhq};
use dpfdr::pvalue::default_nu;
use dpfdr::simlab::{run_experiment, ExampleKind, ExperimentConfig};
use dpfdr::stats::format_sig12 as g12;
use dpfdr::{bhq_step_down, bhq_step_up, Dataset, Error, NoiseMode, Regime, Result, StreamSeed, TestFamily};

use crate::{BhqArgs, BudgetArgs, CkArgs, Command, Mode, PrivateBhqArgs, SimulateArgs};

pub fn run(command: Command, seed: u64) -> Result<()> {
    match command {
        Command::Bhq(a) => bhq(a),
        Command::PrivateBhq(a) => private(a, seed),
        Command::Budget(a) => budget(a),
        Command::CkEstimate(a) => ck(a, seed),
        Command::Simulate(a) => simulate(a, seed),
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::Format(format!("cannot open {}: {e}", path.display())))
}

fn check_level(q: f64) -> Result<()> {
    if q > 0.0 && q < 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("--q must lie in (0, 1), got {q}")))
    }
}

/// Reads the `p` column and, when present, the `is_null` column.
fn read_pvalues(path: &Path) -> Result<(Vec<f64>, Option<Vec<bool>>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(path)?);
    let headers = rdr.headers()?.clone();
    let p_col = headers
        .iter()
        .position(|h| h == "p")
        .ok_or_else(|| Error::Format("input has no `p` column".into()))?;
    let null_col = headers.iter().position(|h| h == "is_null");
    let mut p = Vec::new();
    let mut labels = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = &rec[p_col];
        p.push(
            field
                .parse::<f64>()
                .map_err(|_| Error::Format(format!("row {}: `{field}` is not a number", line + 1)))?,
        );
        if let Some(c) = null_col {
            labels.push(match &rec[c] {
                "1" | "true" => true,
                "0" | "false" => false,
                other => return Err(Error::Format(format!("row {}: is_null `{other}` is not 0/1", line + 1))),
            });
        }
    }
    Ok((p, null_col.map(|_| labels)))
}

fn bhq(a: BhqArgs) -> Result<()> {
    check_level(a.q)?;
    let (p, labels) = read_pvalues(&a.input)?;
    let rej = match a.mode {
        Mode::StepUp => bhq_step_up(&p, a.q)?,
        Mode::StepDown => bhq_step_down(&p, a.q)?,
    };
    let rej = match &labels {
        Some(l) => rej.with_truth(l)?,
        None => rej,
    };
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(output(a.out.as_deref())?);
    w.write_record(["R", &rej.count().to_string()])?;
    if let Some(v) = rej.false_rejections() {
        let fdp = if rej.count() == 0 { 0.0 } else { v as f64 / rej.count() as f64 };
        w.write_record(["V", &v.to_string()])?;
        w.write_record(["FDP", &g12(fdp)])?;
    }
    w.write_record(["index", "p"])?;
    for &i in rej.indices() {
        w.write_record([(i + 1).to_string(), g12(p[i])])?;
    }
    w.flush()?;
    Ok(())
}

fn private(a: PrivateBhqArgs, seed: u64) -> Result<()> {
    check_level(a.q)?;
    let family: TestFamily = a.test.parse()?;
    let data = Dataset::from_csv(open(&a.input)?)?;
    let m = data.cols();
    if a.mprime == 0 || a.mprime > m {
        return Err(Error::Parameter(format!("--mprime must lie in 1..={m}, got {}", a.mprime)));
    }
    let nu = a.nu.unwrap_or_else(|| default_nu(m, 0.5));
    let profile = family.sensitivity(&data, nu)?;
    let eta = a.eta.unwrap_or(profile.eta);
    let budget = calibrate(a.epsilon, a.delta, a.mprime, eta)?;
    let q = if a.inflate { inflated_level(a.q, m, &budget) } else { a.q };
    eprintln!("eta: {} (scanned {}), lambda: {}, nu: {}", g12(eta), g12(profile.eta), g12(budget.lambda), g12(nu));
    if budget.regime == Regime::OutsideGuarantee {
        eprintln!("warning: (epsilon, delta, m') lies outside the calibrated guarantee (epsilon <= 0.5, delta <= 0.1, m' >= 10)");
    }
    if a.inflate {
        eprintln!("inflated level q': {}", g12(q));
    }
    let mut rng = StreamSeed::new(seed).rng();
    let out = private_bhq(&data, family, &profile, q, &budget, NoiseMode::Private, &mut rng)?;
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(output(a.out.as_deref())?);
    w.write_record(["R", &out.rejections.count().to_string()])?;
    w.write_record(["index"])?;
    for &i in out.rejections.indices() {
        w.write_record([(i + 1).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn budget(a: BudgetArgs) -> Result<()> {
    if a.q.is_nan() || a.q <= 0.0 {
        return Err(Error::Parameter(format!("--q must be positive, got {}", a.q)));
    }
    if a.mprime > a.m {
        return Err(Error::Parameter(format!("--mprime {} exceeds --m {}", a.mprime, a.m)));
    }
    let b = calibrate(a.epsilon, a.delta, a.mprime, a.eta)?;
    let gammas = gamma_cutoffs(a.q, a.m, &b)?;
    let regime = match b.regime {
        Regime::Guaranteed => "guaranteed",
        Regime::OutsideGuarantee => "outside-guarantee",
    };
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(output(a.out.as_deref())?);
    w.write_record(["parameter", "value"])?;
    for (name, value) in [
        ("epsilon", g12(b.epsilon)),
        ("delta", g12(b.delta)),
        ("m_prime", b.m_prime.to_string()),
        ("eta", g12(b.eta)),
        ("lambda", g12(b.lambda)),
        ("regime", regime.to_string()),
        ("q", g12(a.q)),
        ("m", a.m.to_string()),
        ("q_inflated", g12(inflated_level(a.q, a.m, &b))),
    ] {
        w.write_record([name, &value])?;
    }
    w.write_record(["j", "gamma"])?;
    for (j, g) in gammas.gammas().iter().enumerate() {
        w.write_record([(j + 1).to_string(), g12(*g)])?;
    }
    w.flush()?;
    Ok(())
}

fn ck(a: CkArgs, seed: u64) -> Result<()> {
    let master = StreamSeed::new(seed);
    let estimates: Vec<CkEstimate> = match a.finite {
        Some(n) => a
            .k
            .iter()
            .enumerate()
            .map(|(i, &k)| estimate_ck_finite(k, n, a.reps, master.child(i as u64)))
            .collect::<Result<_>>()?,
        None => estimate_ck_many(&a.k, a.reps, a.jmax, master)?,
    };
    let mut w = csv::Writer::from_writer(output(a.out.as_deref())?);
    w.write_record(["k", "mean", "stderr", "reps", "jmax"])?;
    for e in &estimates {
        w.write_record([e.k.to_string(), g12(e.mean), g12(e.std_error), e.reps.to_string(), e.j_max.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn simulate(a: SimulateArgs, seed: u64) -> Result<()> {
    let example: ExampleKind = a.example.parse()?;
    let (grid, flag): (Vec<f64>, &str) = match example {
        ExampleKind::Normal | ExampleKind::Student => (a.m1.iter().map(|&v| v as f64).collect(), "--m1"),
        ExampleKind::Block => (a.rho.clone(), "--rho"),
        ExampleKind::Adversarial => (a.m0.iter().map(|&v| v as f64).collect(), "--m0"),
    };
    if grid.is_empty() {
        return Err(Error::Parameter(format!("{} needs {flag}", a.example)));
    }
    let mut cfg = ExperimentConfig::new(example, a.m, grid);
    cfg.q = a.q;
    cfg.reps = a.reps;
    cfg.alternative = a.alternative.parse()?;
    if let Some(mu) = a.mu {
        cfg.mu = mu;
    }
    cfg.n = a.n;
    cfg.ks = a.k;
    cfg.seed = seed;
    cfg.infeasible = a.infeasible.parse()?;
    let res = run_experiment(&cfg)?;
    for r in &res.rows {
        if r.diagnostics > 0 {
            let what = if example == ExampleKind::Adversarial {
                "replicates with an infeasible maximiser"
            } else {
                "zero-variance coordinates"
            };
            eprintln!("{} point {} k={}: {} {what}", a.example, r.point, r.k, r.diagnostics);
        }
    }
    res.write_csv(output(a.out.as_deref())?)
}
