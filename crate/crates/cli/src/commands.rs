//! One handler per subcommand.

use std::path::Path;

use indexmap::IndexMap;
use serde_json::{json, Value};

use qprob::cond::{rho_slice_check, tower_check};
use qprob::expect::{choi_matrix, dct_check, effect_series_identity, expectation_via_density};
use qprob::generate::{self, rng_for, FixtureKind};
use qprob::io;
use qprob::meanzero::{counterexample_fixtures, AtomWitness};
use qprob::{
    classify_mean_zero, conditional_expectation, expectation, qmct_run, CondOptions, Filtration,
    HermitianMatrix, MeanZeroReport, Partition, Povm, ProbeStateSet, QuantumRandomVariable,
    SampleSpace,
};

use crate::{Cli, Command, FixtureArgs, FixtureSet, GenerateKind, InputError, MartingaleAction};

const MAX_DIM: usize = 64;
/// Agreement threshold for identities that hold up to rounding.
const EXACT_TOL: f64 = 1e-10;

pub(crate) struct Output {
    pub command: String,
    pub verdicts: IndexMap<String, bool>,
    pub notes: Vec<String>,
    pub details: Value,
}

impl Output {
    fn new(command: &str) -> Self {
        Output {
            command: command.to_string(),
            verdicts: IndexMap::new(),
            notes: Vec::new(),
            details: Value::Null,
        }
    }

    fn verdict(&mut self, name: &str, ok: bool) {
        self.verdicts.insert(name.to_string(), ok);
    }

    fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }
}

fn err(msg: impl Into<String>) -> InputError {
    InputError(msg.into())
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report fields serialize")
}

pub(crate) fn dispatch(cli: &Cli) -> Result<Output, InputError> {
    match &cli.command {
        Command::Validate { input, povm, qrv, filtration } => {
            validate(input.as_deref(), povm.as_deref(), qrv.as_deref(), filtration.as_deref())
        }
        Command::Expectation(fx) => expectation_cmd(cli, fx),
        Command::Meanzero { fixtures, fixture } => meanzero(cli, *fixtures, fixture),
        Command::Condexp { fixture, partition } => condexp(cli, fixture, partition.as_deref()),
        Command::Tower { fixture, coarse, fine } => tower(cli, fixture, coarse.as_deref(), fine.as_deref()),
        Command::Martingale { action: MartingaleAction::Run { fixture, filtration } } => {
            martingale(cli, fixture, filtration.as_deref())
        }
        Command::Dct { fixture, terms } => dct(cli, fixture, *terms),
        Command::Series { fixture, lambda_min } => series(cli, fixture, *lambda_min),
        Command::Generate { kind, fixture } => generate_cmd(cli, *kind, fixture),
    }
}

// ---------------------------------------------------------------- fixtures

fn check_sizes(fx: &FixtureArgs) -> Result<(), InputError> {
    if fx.d == 0 || fx.d > MAX_DIM {
        return Err(err(format!("--d must be in 1..={MAX_DIM}, got {}", fx.d)));
    }
    if fx.atoms == 0 {
        return Err(err("--atoms must be at least 1"));
    }
    if fx.depth == 0 {
        return Err(err("--depth must be at least 1"));
    }
    if let Some(r) = fx.rank {
        if r == 0 || fx.atoms * r.min(fx.d) < fx.d {
            return Err(err(format!(
                "--rank {r} is too small: {} effects cannot sum to the identity on C^{}",
                fx.atoms, fx.d
            )));
        }
    }
    if !(fx.shift.is_finite() && fx.shift >= 0.0) {
        return Err(err("--shift must be nonnegative"));
    }
    Ok(())
}

fn load_povm(cli: &Cli, fx: &FixtureArgs) -> Result<Povm, InputError> {
    match &fx.povm {
        Some(path) => Ok(io::read_json(path)?),
        None => {
            check_sizes(fx)?;
            let mut rng = rng_for(cli.seed, FixtureKind::Povm);
            Ok(generate::random_povm(&mut rng, SampleSpace::indexed(fx.atoms), fx.d, fx.rank)?)
        }
    }
}

/// Variable from `--qrv`, or a generated positive one on `nu`'s space.
fn load_positive_qrv(cli: &Cli, fx: &FixtureArgs, nu: &Povm) -> Result<QuantumRandomVariable, InputError> {
    let psi = match &fx.qrv {
        Some(path) => io::read_json(path)?,
        None => {
            check_sizes(fx)?;
            let mut rng = rng_for(cli.seed, FixtureKind::PositiveQrv);
            generate::random_positive_qrv(&mut rng, nu.space().clone(), nu.dim(), fx.shift)?
        }
    };
    require_matching(&psi, nu)?;
    Ok(psi)
}

fn require_matching(psi: &QuantumRandomVariable, nu: &Povm) -> Result<(), InputError> {
    if psi.space() != nu.space() {
        return Err(err("the variable and the POVM are defined on different sample spaces"));
    }
    if psi.dim() != nu.dim() {
        return Err(err(format!(
            "the variable acts on C^{} but the POVM on C^{}",
            psi.dim(),
            nu.dim()
        )));
    }
    Ok(())
}

fn read_text(path: &Path) -> Result<String, InputError> {
    std::fs::read_to_string(path).map_err(|e| err(format!("{}: {e}", path.display())))
}

fn located(path: &Path, e: qprob::Error) -> InputError {
    err(format!("{}: {e}", path.display()))
}

fn load_filtration(cli: &Cli, fx: &FixtureArgs, space: &SampleSpace, path: Option<&Path>) -> Result<Filtration, InputError> {
    match path {
        Some(p) => io::filtration_from_json(space, &read_text(p)?).map_err(|e| located(p, e)),
        None => {
            check_sizes(fx)?;
            let mut rng = rng_for(cli.seed, FixtureKind::RefiningFiltration);
            Ok(generate::random_filtration(&mut rng, space.len(), fx.depth))
        }
    }
}

fn load_partition(space: &SampleSpace, path: &Path) -> Result<Partition, InputError> {
    io::partition_from_json(space, &read_text(path)?).map_err(|e| located(path, e))
}

fn opts(cli: &Cli) -> CondOptions {
    CondOptions {
        solver_tol: cli.tol_solver,
        ..CondOptions::default()
    }
}

// ---------------------------------------------------------------- commands

fn validate(
    input: Option<&Path>,
    povm: Option<&Path>,
    qrv: Option<&Path>,
    filtration: Option<&Path>,
) -> Result<Output, InputError> {
    if input.is_none() && povm.is_none() && qrv.is_none() {
        return Err(err("nothing to validate: pass --input, --povm or --qrv"));
    }
    let mut out = Output::new("validate");
    let mut details = serde_json::Map::new();
    let mut nu: Option<Povm> = None;
    let mut psi: Option<QuantumRandomVariable> = None;

    if let Some(path) = input {
        let text = read_text(path)?;
        let value: Value = io::from_json(&text).map_err(|e| located(path, e))?;
        let has = |k: &str| value.get(k).is_some();
        if has("effects") {
            nu = Some(io::from_json(&text).map_err(|e| located(path, e))?);
        } else if has("values") {
            psi = Some(io::from_json(&text).map_err(|e| located(path, e))?);
        } else if has("entries") {
            let m: HermitianMatrix = io::from_json(&text).map_err(|e| located(path, e))?;
            out.note(format!("Hermitian matrix on C^{}", m.dim()));
            details.insert(
                "matrix".into(),
                json!({ "dim": m.dim(), "min_eigenvalue": m.min_eigenvalue(), "max_eigenvalue": m.max_eigenvalue() }),
            );
        } else {
            return Err(err(format!(
                "{}: not a POVM (`effects`), variable (`values`) or matrix (`entries`) record",
                path.display()
            )));
        }
    }
    if let Some(path) = povm {
        nu = Some(io::read_json(path)?);
    }
    if let Some(path) = qrv {
        psi = Some(io::read_json(path)?);
    }
    if let Some(nu) = &nu {
        let mu = nu.induced_measure();
        out.note(format!(
            "POVM on {} points, C^{}, total deviation from identity {:.3e}",
            nu.len(),
            nu.dim(),
            nu.total().max_dist(&HermitianMatrix::identity(nu.dim()))
        ));
        details.insert(
            "povm".into(),
            json!({
                "points": nu.len(),
                "dim": nu.dim(),
                "quantum_probability": nu.is_probability(),
                "induced_measure": nu.space().labels().zip(mu.weights()).map(|(l, w)| (l.to_string(), json!(w))).collect::<serde_json::Map<_, _>>(),
            }),
        );
    }
    if let Some(psi) = &psi {
        out.note(format!(
            "variable on {} points, C^{}, positive: {}, effect valued: {}",
            psi.len(),
            psi.dim(),
            psi.is_positive(),
            psi.is_effect()
        ));
        details.insert(
            "qrv".into(),
            json!({ "points": psi.len(), "dim": psi.dim(), "positive": psi.is_positive(), "effect": psi.is_effect() }),
        );
    }
    if let (Some(nu), Some(psi)) = (&nu, &psi) {
        require_matching(psi, nu)?;
    }
    if let Some(path) = filtration {
        let space = nu
            .as_ref()
            .map(|n| n.space().clone())
            .or_else(|| psi.as_ref().map(|p| p.space().clone()))
            .ok_or_else(|| err("a filtration needs a POVM or variable to fix its sample space"))?;
        let f = io::filtration_from_json(&space, &read_text(path)?).map_err(|e| located(path, e))?;
        out.note(format!("filtration with {} stages, limit has {} blocks", f.len(), f.limit().blocks().len()));
        details.insert(
            "filtration".into(),
            json!({ "stages": f.len(), "limit_blocks": f.limit().to_labels(&space) }),
        );
    }
    out.verdict("parsed", true);
    out.details = Value::Object(details);
    Ok(out)
}

fn expectation_cmd(cli: &Cli, fx: &FixtureArgs) -> Result<Output, InputError> {
    let nu = load_povm(cli, fx)?;
    let psi = load_positive_qrv(cli, fx, &nu)?;
    nu.require_probability()?;
    let mut out = Output::new("expectation");
    let e = expectation(&psi, &nu)?;
    let dual = expectation_via_density(&psi, &nu)?;
    let one = QuantumRandomVariable::constant(nu.space().clone(), HermitianMatrix::identity(nu.dim()));
    let e_one = expectation(&one, &nu)?;
    let choi = choi_matrix(&nu)?;
    let dual_gap = e.max_dist(&dual);
    let unital_gap = e_one.max_dist(&HermitianMatrix::identity(nu.dim()));
    out.verdict("density_form_agrees", dual_gap < EXACT_TOL);
    out.verdict("unital", unital_gap < EXACT_TOL);
    out.verdict("completely_positive", choi.min_eigenvalue() >= -EXACT_TOL);
    if psi.is_positive() {
        out.verdict("positive", e.min_eigenvalue() >= -EXACT_TOL * e.max_abs().max(1.0));
    }
    out.note(format!("E[psi] eigenvalues {:?}", e.eigenvalues()));
    out.note(format!("density form gap {dual_gap:.3e}, |E[1] - 1| {unital_gap:.3e}"));
    out.details = json!({
        "expectation": e,
        "density_form": dual,
        "density_form_gap": dual_gap,
        "unital_gap": unital_gap,
        "choi_min_eigenvalue": choi.min_eigenvalue(),
    });
    Ok(out)
}

fn meanzero(cli: &Cli, set: Option<FixtureSet>, fx: &FixtureArgs) -> Result<Output, InputError> {
    let mut out = Output::new("meanzero");
    let tol = cli.tol_zero;
    match set {
        Some(FixtureSet::Counterexamples) => {
            let f = counterexample_fixtures();
            let r1 = classify_mean_zero(&f.psi1, &f.nu1, tol)?;
            let r2 = classify_mean_zero(&f.psi2, &f.nu2, tol)?;
            out.verdict("first_fixture_mean_zero_only", r1.a && !r1.c && !r1.d);
            out.verdict("second_fixture_boxtimes_null_only", r2.d && !r2.c);
            out.verdict("implications_hold", r1.implications_hold() && r2.implications_hold());
            out.note("first fixture (scalar POVM, psi = +-1):");
            describe(&mut out, &r1);
            out.note("second fixture (projective POVM, off-diagonal psi):");
            describe(&mut out, &r2);
            out.details = json!({ "first": r1, "second": r2 });
        }
        None => {
            let nu = load_povm(cli, fx)?;
            let psi = match &fx.qrv {
                Some(path) => io::read_json(path)?,
                None => {
                    let mut rng = rng_for(cli.seed, FixtureKind::GeneralQrv);
                    generate::random_general_qrv(&mut rng, nu.space().clone(), nu.dim())?
                }
            };
            require_matching(&psi, &nu)?;
            let r = classify_mean_zero(&psi, &nu, tol)?;
            out.verdict("implications_hold", r.implications_hold());
            if r.e.is_some() {
                out.verdict("equivalent_for_positive", r.all_agree());
            }
            describe(&mut out, &r);
            out.details = to_value(&r);
        }
    }
    Ok(out)
}

fn describe(out: &mut Output, r: &MeanZeroReport) {
    let e = r.e.map_or("n/a".to_string(), |v| v.to_string());
    out.note(format!(
        "  A (E = 0): {}  B (adjoint product): {}  C (ranges): {}  D (boxtimes): {}  E: {e}",
        r.a, r.b, r.c, r.d
    ));
    for w in &r.atoms {
        let AtomWitness { label, .. } = w;
        out.note(format!("  {label}: boxtimes {}", compact(&w.boxtimes)));
    }
}

fn compact(m: &HermitianMatrix) -> String {
    let d = m.dim();
    let rows: Vec<String> = (0..d)
        .map(|i| {
            let cells: Vec<String> = (0..d).map(|j| fmt_complex(m.get(i, j))).collect();
            format!("[{}]", cells.join(", "))
        })
        .collect();
    format!("[{}]", rows.join(", "))
}

fn fmt_complex(z: num_complex::Complex64) -> String {
    let clean = |v: f64| if v.abs() < 1e-14 { 0.0 } else { v };
    let (re, im) = (clean(z.re), clean(z.im));
    if im == 0.0 {
        format!("{re}")
    } else {
        format!("{re}{im:+}i")
    }
}

fn condexp(cli: &Cli, fx: &FixtureArgs, partition: Option<&Path>) -> Result<Output, InputError> {
    let nu = load_povm(cli, fx)?;
    let psi = load_positive_qrv(cli, fx, &nu)?;
    let sigma = match partition {
        Some(p) => load_partition(nu.space(), p)?,
        None => {
            let f = load_filtration(cli, fx, nu.space(), None)?;
            f.stages()[(f.len() / 2).min(f.len() - 1)].clone()
        }
    };
    let o = opts(cli);
    let solve = conditional_expectation(&psi, &nu, &sigma, o)?;
    let probes = ProbeStateSet::standard(nu.dim());
    let slice = rho_slice_check(&psi, &nu, &sigma, &probes, o)?;
    let phi = solve.to_qrv();
    let mean_gap = expectation(&phi, &nu)?.max_dist(&expectation(&psi, &nu)?);
    let clamped = !solve.clamped_blocks.is_empty();

    let mut out = Output::new("condexp");
    out.verdict("defining_property", solve.satisfies(cli.tol_solver));
    out.verdict("no_clamped_blocks", !clamped);
    out.verdict("expectation_preserved", clamped || mean_gap < cli.tol_converge);
    out.verdict("rho_slices", clamped || slice.block_deviation < cli.tol_converge);
    if solve.beyond_hypothesis {
        out.note("psi is not positive: a positive version need not exist");
    }
    out.note(format!(
        "{} blocks, max residual {:.3e}, rho-slice deviation {:.3e}",
        sigma.blocks().len(),
        solve.max_residual(),
        slice.block_deviation
    ));
    if clamped {
        out.note(format!("no positive solution on blocks {:?}; set to zero", solve.clamped_blocks));
    }
    out.details = json!({
        "partition": sigma.to_labels(nu.space()),
        "solution": solve,
        "expectation_gap": mean_gap,
        "rho_slice": slice,
    });
    Ok(out)
}

fn tower(cli: &Cli, fx: &FixtureArgs, coarse: Option<&Path>, fine: Option<&Path>) -> Result<Output, InputError> {
    let nu = load_povm(cli, fx)?;
    let psi = load_positive_qrv(cli, fx, &nu)?;
    let (f, g) = match (coarse, fine) {
        (Some(c), Some(fi)) => (load_partition(nu.space(), c)?, load_partition(nu.space(), fi)?),
        (None, None) => {
            let filt = load_filtration(cli, fx, nu.space(), None)?;
            let last = filt.len() - 1;
            (filt.stages()[(last / 2).min(last)].clone(), filt.stages()[last].clone())
        }
        _ => return Err(err("--coarse and --fine must be given together")),
    };
    if !g.refines(&f) {
        return Err(err("--fine does not refine --coarse"));
    }
    let r = tower_check(&psi, &nu, &f, &g, cli.tol_converge, opts(cli))?;
    let mut out = Output::new("tower");
    out.verdict("tower", r.passed);
    out.verdict("no_clamped_blocks", !r.clamped);
    out.note(format!(
        "deviations: inner {:.3e}, outer {:.3e}, cross {:.3e}",
        r.inner_deviation, r.outer_deviation, r.cross_deviation
    ));
    out.details = json!({
        "coarse": f.to_labels(nu.space()),
        "fine": g.to_labels(nu.space()),
        "report": r,
    });
    Ok(out)
}

fn martingale(cli: &Cli, fx: &FixtureArgs, filtration: Option<&Path>) -> Result<Output, InputError> {
    let nu = load_povm(cli, fx)?;
    let psi = load_positive_qrv(cli, fx, &nu)?;
    let filt = load_filtration(cli, fx, nu.space(), filtration)?;
    let probes = ProbeStateSet::standard(nu.dim());
    let run = qmct_run(&psi, &nu, &filt, &probes, cli.tol_gamma)?;
    let mut out = Output::new("martingale run");
    out.verdict("martingale", run.martingale.passed);
    out.verdict("limit_measurable", run.limit_measurable);
    out.verdict("gamma_verdict", run.gamma_verdict);
    if let Some(v) = run.psi_gamma_verdict {
        out.verdict("limit_gamma_equivalent_to_psi", v);
    }
    out.verdict("sigma_verdict", run.sigma_verdict);
    out.note(format!(
        "{} stages, limit has {} blocks, gamma distance {:.3e}, entrywise gap to psi {:.3e}",
        filt.len(),
        run.limit_blocks.len(),
        run.gamma_distance,
        run.entrywise_gap
    ));
    if !run.clamped_stages.is_empty() {
        out.note(format!("stages {:?} had no positive conditional expectation", run.clamped_stages));
    }
    out.details = json!({
        "filtration": filt.to_labels(nu.space()),
        "run": run,
    });
    Ok(out)
}

fn dct(cli: &Cli, fx: &FixtureArgs, terms: usize) -> Result<Output, InputError> {
    if terms < 2 {
        return Err(err("--terms must be at least 2"));
    }
    let nu = load_povm(cli, fx)?;
    let psi = load_positive_qrv(cli, fx, &nu)?;
    let probes = ProbeStateSet::standard(nu.dim());
    let eta = dct_direction(cli.seed, &psi, &nu, &probes)?;
    let seq: Vec<QuantumRandomVariable> = (1..=terms)
        .map(|n| psi.add(&eta.scale(1.0 / n as f64)))
        .collect::<qprob::Result<_>>()?;
    let r = dct_check(&seq, &nu, &probes, Some(&psi), cli.tol_converge)?;
    let mut out = Output::new("dct");
    let mut decades = serde_json::Map::new();
    let mut within = true;
    let mut n = 10usize;
    while n <= terms {
        let res = r.residuals[n - 1];
        let expected = 1.0 / n as f64;
        within &= res <= 2.0 * expected && res >= 0.5 * expected;
        decades.insert(n.to_string(), json!(res));
        out.note(format!("n = {n}: residual {res:.6e}"));
        n *= 10;
    }
    out.verdict("decays_like_one_over_n", within);
    out.verdict("envelope_finite", r.envelope.iter().all(|z| z.is_finite()));
    if let Some(rate) = r.rate {
        out.note(format!("fitted log-log rate {rate:.4}"));
    }
    out.details = json!({
        "decade_residuals": decades,
        "rate": r.rate,
        "envelope": r.envelope,
        "limit_expectation": r.limit_expectation,
        "final_residual": r.final_residual(),
    });
    Ok(out)
}

/// A random Hermitian perturbation scaled so that
/// `max_rho |tr(rho E[eta])| = 1`, which makes the residual at `n` exactly `1/n`
/// up to rounding.
pub(crate) fn dct_direction(
    seed: u64,
    psi: &QuantumRandomVariable,
    nu: &Povm,
    probes: &ProbeStateSet,
) -> Result<QuantumRandomVariable, InputError> {
    let mut rng = rng_for(seed, FixtureKind::GeneralQrv);
    for _ in 0..16 {
        let eta = generate::random_general_qrv(&mut rng, psi.space().clone(), psi.dim())?;
        let scale = probes
            .traces(&expectation(&eta, nu)?)
            .iter()
            .fold(0.0f64, |m, t| m.max(t.abs()));
        if scale > 1e-6 {
            return Ok(eta.scale(1.0 / scale));
        }
    }
    Err(err("could not draw a perturbation with nonzero expectation"))
}

fn series(cli: &Cli, fx: &FixtureArgs, lambda_min: f64) -> Result<Output, InputError> {
    let nu = load_povm(cli, fx)?;
    let psi = match &fx.qrv {
        Some(path) => io::read_json(path)?,
        None => {
            if !(lambda_min > 0.0 && lambda_min <= 1.0) {
                return Err(err("--lambda-min must lie in (0, 1]"));
            }
            let mut rng = rng_for(cli.seed, FixtureKind::EffectQrv);
            generate::random_effect_qrv(&mut rng, nu.space().clone(), nu.dim(), lambda_min)?
        }
    };
    require_matching(&psi, &nu)?;
    let r = effect_series_identity(&psi, &nu, None, cli.tol_converge)?;
    let mut out = Output::new("series");
    out.verdict("sums_to_identity", r.passed);
    out.note(format!("{} terms, |sum - 1|_max = {:.3e}", r.n_max, r.residual));
    out.details = json!({ "n_max": r.n_max, "residual": r.residual, "sum": r.sum });
    Ok(out)
}

fn generate_cmd(cli: &Cli, kind: GenerateKind, fx: &FixtureArgs) -> Result<Output, InputError> {
    check_sizes(fx)?;
    let path = cli
        .output
        .as_ref()
        .ok_or_else(|| err("generate needs --output for the fixture file"))?;
    let space = SampleSpace::indexed(fx.atoms);
    let text = match kind {
        GenerateKind::Povm => {
            let mut rng = rng_for(cli.seed, FixtureKind::Povm);
            io::to_json(&generate::random_povm(&mut rng, space, fx.d, fx.rank)?)
        }
        GenerateKind::PositiveQrv => {
            let mut rng = rng_for(cli.seed, FixtureKind::PositiveQrv);
            io::to_json(&generate::random_positive_qrv(&mut rng, space, fx.d, fx.shift)?)
        }
        GenerateKind::EffectQrv => {
            let mut rng = rng_for(cli.seed, FixtureKind::EffectQrv);
            io::to_json(&generate::random_effect_qrv(&mut rng, space, fx.d, 0.05)?)
        }
        GenerateKind::RefiningFiltration => {
            let mut rng = rng_for(cli.seed, FixtureKind::RefiningFiltration);
            let f = generate::random_filtration(&mut rng, fx.atoms, fx.depth);
            io::filtration_to_json(&space, &f)
        }
    } + "\n";
    crate::write_atomic(path, text.as_bytes())?;
    let mut out = Output::new("generate");
    out.verdict("written", true);
    out.note(format!("wrote {} ({} bytes)", path.display(), text.len()));
    out.details = json!({ "kind": format!("{kind:?}"), "path": path.display().to_string(), "bytes": text.len() });
    Ok(out)
}
