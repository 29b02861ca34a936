//! Subcommand bodies. Each returns an [`Outcome`] or an error; `main` maps
//! them onto exit codes.

use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use certdyn::certification::{
    self, measurement, Certificate, DensityMatrix, MeasurementStats, PartitionStyle, RegionPlan, Witness, WitnessSpec,
};
use certdyn::circuit_decomposition::{
    self, BondReport, CombinatoricsReport, DecomposedEvolution, DecompositionReport, Layer, SiteOrder, Verification,
};
use certdyn::exact_engine::{self, Evolver};
use certdyn::hamiltonian::{self, LocalHamiltonian, ParamOptions, StructuralParams};
use certdyn::linalg::{self, c64, CMatrix, CVector};
use certdyn::lr_bounds::{self, Bound, RequiredDistance};
use certdyn::metric_lattice::Region;
use certdyn::properties::{self, PropertyReport};
use certdyn::trotter::{self, ScanRow};
use certdyn::{io as cio, io::ComplexArray};
use serde::Serialize;

use crate::output::{emit, emit_json, fmt_f64};
use crate::{
    CertifyArgs, DecomposeArgs, GeometryArgs, LrCalcArgs, Mode, Order, SimulateArgs, Style, TrotterArgs, WitnessArgs,
};

/// How a run ended when no software error occurred.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// The mathematics does not apply to the requested parameters.
    NotApplicable,
}

fn note(msg: impl AsRef<str>) {
    eprintln!("note: {}", msg.as_ref());
}

const FORMULA_DISTANCE: &str = "D_min = v|t| + ln(1/eps) + ln||A|| + ln(2M/Z); d_a_min = max(D_min/(1-q), smallest large-enough d_a)";
const FORMULA_TROTTER: &str = "||U - U_T|| <= L tau^2 ||[H1, H2]|| / 2 with tau = t/L";
const FORMULA_CERTIFICATE: &str = "1 - <psi(t)|rho|psi(t)> <= Tr(rho G') + delta with delta = (I - Gamma gamma)/2";
const FORMULA_SEQUENTIAL: &str = "||V - U_ts|| <= n exp(v|t-s| + ln(M/(Z e)) + 2(1-q) - (1-q) r)";
const FORMULA_HYPERCUBIC: &str = "||V - U_ts|| <= n c3 exp(v|t-s| - (1-q) Omega/(2a))";
const FORMULA_STEP: &str = "per-step ||U^{H_u} - V'_u U^{H_(u-1)}|| <= (2 M alpha_q/(v Z)) ||A|| exp(v|t-s| - (1-q) d_a), summed over steps";

// ---------------------------------------------------------------- lr-calc

#[derive(Serialize)]
struct LrCalcReport<'a> {
    formula: &'static str,
    t: f64,
    eps: f64,
    q: f64,
    norm_a: f64,
    params: &'a StructuralParams,
    #[serde(flatten)]
    required: RequiredDistance,
}

pub fn lr_calc(args: &LrCalcArgs) -> Result<Outcome> {
    let params = match (&args.params, args.source.is_given()) {
        (Some(path), false) => crate::sources::load_params(path)?,
        (None, true) => hamiltonian::structural_params(&args.source.load()?, &ParamOptions::default())?,
        _ => bail!("give exactly one of --params FILE or a Hamiltonian source"),
    };
    let required = lr_bounds::required_distance(&params, args.norm_a, args.t, args.eps, args.q)?;
    let report =
        LrCalcReport { formula: FORMULA_DISTANCE, t: args.t, eps: args.eps, q: args.q, norm_a: args.norm_a, params: &params, required };
    emit_json(&report, args.out.as_deref())?;
    Ok(Outcome::Success)
}

// ---------------------------------------------------------------- trotter-scan

fn scan_csv(rows: &[ScanRow]) -> String {
    let mut out = String::from("n,error,bound\n");
    for r in rows {
        writeln!(out, "{},{},{}", r.n, fmt_f64(r.error), fmt_f64(r.bound)).expect("string write");
    }
    out
}

pub fn trotter_scan(args: &TrotterArgs) -> Result<Outcome> {
    let kind = crate::sources::model_kind(&args.model);
    let couplings = args.coupling.as_ref().map_or(vec![], |c| c.0.clone());
    // Time is given in units of 1/J with J the per-bond norm (first coupling).
    let j = couplings.first().copied().unwrap_or(1.0);
    ensure!(j != 0.0, "the first coupling sets the time unit and must be non-zero");
    let t = args.t / j.abs();
    let scan = trotter::error_scan(kind, &couplings, &args.n.0, t, args.steps)?;
    if !scan.skipped.is_empty() {
        note(format!("sizes {:?} exceed the dense cap ({}) and were skipped", scan.skipped, exact_engine::dim_cap()));
    }
    ensure!(!scan.rows.is_empty(), "no chain size fits under the dense cap");
    emit(&scan_csv(&scan.rows), args.out.as_deref())?;
    note(format!("formula: {FORMULA_TROTTER}"));
    if args.verify {
        let broken: Vec<usize> = scan.rows.iter().filter(|r| !r.satisfied()).map(|r| r.n).collect();
        ensure!(broken.is_empty(), "Trotter bound violated for n = {broken:?}");
    }
    Ok(Outcome::Success)
}

// ---------------------------------------------------------------- witness setup

struct WitnessRun {
    h: LocalHamiltonian,
    psi_t: CVector,
    rho: DensityMatrix,
    spec: WitnessSpec,
    witness: Witness,
    delta: f64,
    plan: Option<RegionPlan>,
}

fn depolarized(psi: &CVector, p: f64) -> Result<DensityMatrix> {
    ensure!((0.0..=1.0).contains(&p), "depolarizing weight {p} must lie in [0, 1]");
    let dim = psi.len();
    let pure = psi * psi.adjoint();
    let mixed = CMatrix::identity(dim, dim) * c64(1.0 / dim as f64, 0.0);
    Ok(DensityMatrix::new(pure * c64(1.0 - p, 0.0) + mixed * c64(p, 0.0))?)
}

fn load_rho(path: &Path) -> Result<DensityMatrix> {
    let array: ComplexArray = crate::sources::read_json(path)?;
    let m = array.to_square_matrix().with_context(|| format!("reading the density matrix in {}", path.display()))?;
    DensityMatrix::new(m).with_context(|| format!("validating the density matrix in {}", path.display()))
}

fn witness_run(args: &WitnessArgs) -> Result<WitnessRun> {
    let h = args.source.load()?;
    let n = h.n_sites();
    let state = crate::sources::load_state(args.state.as_deref(), n)?;
    ensure!(state.n_sites() == n, "state has {} sites but the Hamiltonian has {n}", state.n_sites());
    exact_engine::check_dim(h.total_dim())?;
    let psi_t = Evolver::whole(&h)?.evolve_state(&state.dense(), args.t, 0.0);

    let (spec, delta, plan) = if args.full_regions {
        let gamma = args.gamma.unwrap_or(args.infidelity / (2.0 * n as f64));
        let spec = WitnessSpec::untruncated(state, certification::singleton_partition(n), args.t)?;
        let delta = certification::delta(args.infidelity, gamma, n)?;
        (spec, delta, None)
    } else {
        let params = hamiltonian::structural_params(&h, &ParamOptions::default())?;
        let style = match args.style {
            Style::Singleton => PartitionStyle::Singleton,
            Style::Cubes => PartitionStyle::Cubes,
        };
        let plan = certification::plan_regions(&h, &params, args.t, args.infidelity, args.gamma, style, args.q)?;
        (plan.witness_spec(state, args.t)?, plan.delta, Some(plan))
    };
    let witness = certification::truncated_witness(&spec, &h)?;
    let rho = match (&args.rho, args.depolarize) {
        (Some(path), None) => load_rho(path)?,
        (None, p) => depolarized(&psi_t, p.unwrap_or(0.0))?,
        (Some(_), Some(_)) => bail!("--rho and --depolarize are mutually exclusive"),
    };
    ensure!(rho.dim() == psi_t.len(), "density matrix has dimension {} but the system has {}", rho.dim(), psi_t.len());
    Ok(WitnessRun { h, psi_t, rho, spec, witness, delta, plan })
}

#[derive(Serialize)]
struct PlanSummary<'a> {
    gamma: f64,
    delta: f64,
    #[serde(rename = "D")]
    d: f64,
    d_a: f64,
    radius: f64,
    cube_edge: Option<usize>,
    max_extended_size: usize,
    precondition_holds: bool,
    partition: &'a [Region],
    regions: &'a [Region],
}

impl<'a> From<&'a RegionPlan> for PlanSummary<'a> {
    fn from(p: &'a RegionPlan) -> Self {
        PlanSummary {
            gamma: p.gamma,
            delta: p.delta,
            d: p.d,
            d_a: p.d_a,
            radius: p.radius,
            cube_edge: p.cube_edge,
            max_extended_size: p.max_extended_size,
            precondition_holds: p.precondition_holds,
            partition: &p.partition,
            regions: &p.regions,
        }
    }
}

fn terms_csv(witness: &Witness, exact: &[f64], estimate: Option<&measurement::MeasurementEstimate>) -> String {
    let mut out = String::from(if estimate.is_some() {
        "term,block,expectation,estimate,sample_variance\n"
    } else {
        "term,block,expectation\n"
    });
    for (i, (term, e)) in witness.terms.iter().zip(exact).enumerate() {
        let block = term.block.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        write!(out, "{i},{block},{}", fmt_f64(*e)).expect("string write");
        if let Some(est) = estimate {
            let t = &est.terms[i];
            let var = t.sample_variance.map_or_else(String::new, fmt_f64);
            write!(out, ",{},{var}", fmt_f64(t.mean)).expect("string write");
        }
        out.push('\n');
    }
    out
}

fn scheme(args_scheme: crate::Scheme) -> measurement::MeasurementScheme {
    match args_scheme {
        crate::Scheme::PauliSettings => measurement::MeasurementScheme::PauliSettings,
        crate::Scheme::ObservableEigenbasis => measurement::MeasurementScheme::ObservableEigenbasis,
    }
}

// ---------------------------------------------------------------- certify

#[derive(Serialize)]
struct CertifyVerification {
    /// `||G - G'||` measured densely.
    witness_distance: f64,
    witness_distance_within_delta: bool,
    /// `1 - <psi(t)|rho|psi(t)>` measured densely.
    infidelity: f64,
    certificate_sound: bool,
}

#[derive(Serialize)]
struct CertifyReport<'a> {
    formula: &'static str,
    status: &'static str,
    n_sites: usize,
    t: f64,
    full_regions: bool,
    gamma_count: usize,
    plan: Option<PlanSummary<'a>>,
    certificate: &'a Certificate,
    seed: Option<u64>,
    verification: Option<CertifyVerification>,
}

pub fn certify(args: &CertifyArgs) -> Result<Outcome> {
    let run = witness_run(&args.witness)?;
    let applicable = run.plan.as_ref().map_or(true, |p| p.precondition_holds);
    let mut certificate = certification::certify_state(&run.rho, &run.witness, run.delta, args.witness.infidelity)?;
    let estimate = match args.shots {
        Some(shots) => {
            let est = measurement::simulate_measurements(&run.rho, &run.witness, shots, args.seed, scheme(args.scheme))?;
            certificate.measurement =
                Some(MeasurementStats { shots_per_term: shots, e_rho_hat: est.e_rho_hat, std_error: est.std_error });
            Some(est)
        }
        None => None,
    };
    let verification = if args.verify {
        let exact = certification::exact_witness(&run.spec, &run.h)?;
        let witness_distance = linalg::op_norm(&(exact.dense()? - run.witness.dense()?));
        let infidelity = exact_engine::infidelity(&run.psi_t, run.rho.matrix());
        let within = witness_distance <= run.delta * (1.0 + 1e-9) + 1e-12;
        Some(CertifyVerification {
            witness_distance,
            witness_distance_within_delta: within,
            infidelity,
            certificate_sound: infidelity <= certificate.bound + 1e-9,
        })
    } else {
        None
    };
    let report = CertifyReport {
        formula: FORMULA_CERTIFICATE,
        status: if applicable { "ok" } else { "not_applicable" },
        n_sites: run.h.n_sites(),
        t: args.witness.t,
        full_regions: args.witness.full_regions,
        gamma_count: run.spec.gamma_count(),
        plan: run.plan.as_ref().map(PlanSummary::from),
        certificate: &certificate,
        seed: args.shots.map(|_| args.seed),
        verification,
    };
    emit_json(&report, args.out.as_deref())?;
    if let Some(path) = &args.terms_csv {
        let exact = run.witness.expectations(&run.rho)?;
        emit(&terms_csv(&run.witness, &exact, estimate.as_ref()), Some(path))?;
    }
    if let Some(v) = &report.verification {
        // The certificate is only promised when the witness distance is within delta.
        ensure!(!v.witness_distance_within_delta || v.certificate_sound, "certificate bound violated");
        ensure!(!applicable || v.witness_distance_within_delta, "||G - G'|| exceeds delta although the plan applies");
    }
    if !applicable {
        note("the truncation regions do not meet the quasilocality precondition");
        return Ok(Outcome::NotApplicable);
    }
    Ok(Outcome::Success)
}

// ---------------------------------------------------------------- simulate

#[derive(Serialize)]
struct SimulateReport<'a> {
    seed: u64,
    scheme: measurement::MeasurementScheme,
    /// `Tr(rho G')` evaluated densely.
    #[serde(rename = "E_rho")]
    e_rho: f64,
    #[serde(flatten)]
    estimate: &'a measurement::MeasurementEstimate,
}

pub fn simulate(args: &SimulateArgs) -> Result<Outcome> {
    let run = witness_run(&args.witness)?;
    let scheme = scheme(args.scheme);
    let estimate = measurement::simulate_measurements(&run.rho, &run.witness, args.shots, args.seed, scheme)?;
    let report = SimulateReport { seed: args.seed, scheme, e_rho: run.witness.expectation(&run.rho)?, estimate: &estimate };
    emit_json(&report, args.out.as_deref())?;
    if let Some(path) = &args.terms_csv {
        let exact = run.witness.expectations(&run.rho)?;
        emit(&terms_csv(&run.witness, &exact, Some(&estimate)), Some(path))?;
    }
    Ok(Outcome::Success)
}

// ---------------------------------------------------------------- decompose

#[derive(Serialize)]
struct DecomposeReport<'a> {
    formula: &'static str,
    step_formula: &'static str,
    mode: circuit_decomposition::DecompositionMode,
    parameter: f64,
    t: f64,
    s: f64,
    q: f64,
    factors: &'a [circuit_decomposition::FactorReport],
    layers: &'a [Layer],
    step_bounds: &'a [Bound],
    error_bound: &'a Bound,
    claimed_error: &'a Bound,
    not_applicable: Vec<String>,
    bond_dim_report: &'a BondReport,
    combinatorics: Option<&'a CombinatoricsReport>,
    required_omega: Option<circuit_decomposition::RequiredOmega>,
    error_exact: Option<f64>,
    verification: Option<&'a Verification>,
}

fn reasons(bounds: &[&Bound]) -> Vec<String> {
    let mut out: Vec<String> = bounds
        .iter()
        .filter_map(|b| match b {
            Bound::NotApplicable(r) => Some(r.clone()),
            Bound::Applicable(_) => None,
        })
        .collect();
    out.dedup();
    out
}

fn dump_factors(dec: &DecomposedEvolution, report: &DecompositionReport, dir: &Path) -> Result<()> {
    #[derive(Serialize)]
    struct Entry<'a> {
        file: String,
        label: &'a str,
        layer: &'a str,
        support: &'a Region,
    }
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut manifest = Vec::new();
    for (k, (factor, info)) in dec.factors().iter().zip(&report.factors).enumerate() {
        let file = format!("factor_{k:04}.bin");
        let path = dir.join(&file);
        let f = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        cio::write_binary(&factor.operator.matrix, BufWriter::new(f)).with_context(|| format!("writing {}", path.display()))?;
        manifest.push(Entry { file, label: factor.label, layer: &info.layer, support: &factor.operator.support });
    }
    emit_json(&manifest, Some(&dir.join("factors.json")))
}

pub fn decompose(args: &DecomposeArgs) -> Result<Outcome> {
    let h = args.source.load()?;
    let params = hamiltonian::structural_params(&h, &ParamOptions::default())?;
    let n = h.n_sites();
    let (dec, combinatorics, required, formula) = match args.mode {
        Mode::Hypercubic => {
            let required = args
                .eps
                .map(|eps| circuit_decomposition::required_omega(&params, n, args.t - args.s, eps, args.q))
                .transpose()?;
            let omega = match (args.omega, &required) {
                (Some(o), _) => o,
                (None, Some(r)) => r.omega_min,
                (None, None) => bail!("hypercubic mode needs --omega or --eps"),
            };
            let edge = h.lattice().hypercube_shape().map_or(usize::MAX, |(edge, _)| edge);
            if let (None, Some(r)) = (args.omega, &required) {
                if r.omega_min > edge {
                    #[derive(Serialize)]
                    struct Unreachable<'a> {
                        formula: &'static str,
                        not_applicable: Vec<String>,
                        required_omega: &'a circuit_decomposition::RequiredOmega,
                    }
                    let reason = format!("the required cube edge {} exceeds the lattice edge {edge}", r.omega_min);
                    note(&reason);
                    let out = Unreachable { formula: FORMULA_HYPERCUBIC, not_applicable: vec![reason], required_omega: r };
                    emit_json(&out, args.out.as_deref())?;
                    return Ok(Outcome::NotApplicable);
                }
            }
            let plan = circuit_decomposition::hypercubic_plan(&h, omega)?;
            let dec = circuit_decomposition::hypercubic_decomposition(&h, &plan, args.t, args.s, args.q)?;
            (dec, Some(plan.report), required, FORMULA_HYPERCUBIC)
        }
        Mode::Sequential => {
            let Some(r) = args.r else { bail!("sequential mode needs --r") };
            let order = match args.order {
                Order::Ascending => SiteOrder::Ascending,
                Order::Color => SiteOrder::ColorSorted,
            };
            let dec = circuit_decomposition::sequential_decomposition(&h, &order, r, args.q, args.t, args.s)?;
            (dec, None, None, FORMULA_SEQUENTIAL)
        }
    };
    let report = dec.report();
    let bond = dec.bond_report(h.lattice(), h.local_dims())?;
    let verification = if args.verify { Some(circuit_decomposition::verify_decomposition(&h, &dec)?) } else { None };
    if let Some(dir) = &args.dump_dir {
        dump_factors(&dec, &report, dir)?;
    }
    let out = DecomposeReport {
        formula,
        step_formula: FORMULA_STEP,
        mode: report.mode,
        parameter: report.parameter,
        t: report.t,
        s: report.s,
        q: args.q,
        factors: &report.factors,
        layers: &dec.layers,
        step_bounds: &report.step_bounds,
        error_bound: &report.telescoped_bound,
        claimed_error: &report.claimed_error,
        not_applicable: reasons(&[&report.telescoped_bound, &report.claimed_error]),
        bond_dim_report: &bond,
        combinatorics: combinatorics.as_ref(),
        required_omega: required,
        error_exact: verification.as_ref().map(|v| v.error),
        verification: verification.as_ref(),
    };
    emit_json(&out, args.out.as_deref())?;
    if let Some(c) = &combinatorics {
        ensure!(c.violations.is_empty(), "combinatorial checks failed: {:?}", c.violations);
    }
    if let Some(v) = &verification {
        ensure!(v.telescoping_holds, "dense error {} exceeds the sum of per-step errors", fmt_f64(v.error));
        ensure!(v.bounds_hold != Some(false), "a per-step or telescoped bound is violated");
    }
    if !report.telescoped_bound.is_applicable() && !report.claimed_error.is_applicable() {
        note("no error bound applies at these parameters");
        return Ok(Outcome::NotApplicable);
    }
    Ok(Outcome::Success)
}

// ---------------------------------------------------------------- geometry-check

#[derive(Serialize)]
struct GeometryReport {
    n_sites: usize,
    reports: Vec<PropertyReport>,
}

pub fn geometry_check(args: &GeometryArgs) -> Result<Outcome> {
    let lattice = args.lattice.load()?;
    let mut reports = vec![properties::geometry_check(&lattice, args.cases, args.seed)?];
    if args.inequalities {
        reports.push(properties::inequality_check(args.cases, args.seed)?);
    }
    emit_json(&GeometryReport { n_sites: lattice.n_sites(), reports: reports.clone() }, args.out.as_deref())?;
    let failed: Vec<String> = reports
        .iter()
        .flat_map(|r| r.properties.iter().filter(|(_, t)| t.violations > 0).map(move |(name, _)| format!("{}/{name}", r.suite)))
        .collect();
    ensure!(failed.is_empty(), "properties with counterexamples: {failed:?}");
    Ok(Outcome::Success)
}

