//! Batch frontend: JSON jobs in, deterministic JSON reports out.
//!
//! A job is an object with a `"kind"` tag plus kind-specific payload; all
//! mathematical payloads are strings in the algebra grammar, and reports
//! echo them back the same way, so identical inputs produce byte-identical
//! reports. Statuses map to process exit codes: `ok` 0, `schema-error` 2
//! (malformed or precondition-violating payloads), `resource-error` 3
//! (degree/node caps, precision, time budgets), `invariant-violation` 4
//! (a named internal assertion tripped; sibling jobs keep running).

use std::collections::BTreeMap;
use std::panic::{self, AssertUnwindSafe};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Mutex};
use std::time::{Duration, Instant};

use serde::Deserialize;
use serde_json::{json, Value};

use crate::algebra::{parse_expression, Domain, RationalFunctionMatrix};
use crate::betti::{orbit_search, MCGMove, NumberRing, NumberRingPoint, OrbitOutcome};
use crate::cartier::{
    canonical_section, change_of_lift_check, lift_transition, nonabelian_katz_check, ov_check,
    FrobeniusLift, LiftChangeOutcome, OvOutcome,
};
use crate::connection::{
    katz_scan, p_curvature_report, FlatConnection, KatzOutcome, DEFAULT_DEGREE_CAP,
};
use crate::error::Error;
use crate::foliation::{
    build_schlesinger, chen_check, leaf_restrict, p_closed_test, ChenOutcome,
    HorizontalFoliation, LeafOutcome, PClosedOutcome, ResidueChart,
};
use crate::higgs::{hitchin_map, quadratic_hitchin, HiggsChart};

/// Flags shared by `run` and `scan`.
#[derive(Clone, Copy, Default)]
pub struct RunConfig {
    /// Overrides the default numerator-degree guardrail; a per-job
    /// `degree_cap` field wins over this.
    pub degree_cap: Option<usize>,
    /// Adds wall-clock timings to reports. Off by default so that reports
    /// stay byte-identical across runs.
    pub timing: bool,
}

/// One job's outcome, serialized as the report JSON.
pub struct Report {
    /// Echo of the job as parsed (keys sorted).
    pub job: Value,
    /// "ok" | "schema-error" | "resource-error" | "invariant-violation".
    pub status: &'static str,
    /// One-line outcome when status is "ok".
    pub verdict: Option<String>,
    /// Error message otherwise.
    pub error: Option<String>,
    /// Kind-specific certificates and witnesses, expressions as strings.
    pub details: Value,
    pub timing_ms: Option<u64>,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        match self.status {
            "ok" => 0,
            "schema-error" => 2,
            "resource-error" => 3,
            _ => 4,
        }
    }

    pub fn to_value(&self) -> Value {
        let mut obj = serde_json::Map::new();
        obj.insert("job".into(), self.job.clone());
        obj.insert("status".into(), json!(self.status));
        match (&self.verdict, &self.error) {
            (Some(v), _) => obj.insert("verdict".into(), json!(v)),
            (_, Some(e)) => obj.insert("error".into(), json!(e)),
            _ => None,
        };
        if !self.details.is_null() {
            obj.insert("details".into(), self.details.clone());
        }
        if let Some(ms) = self.timing_ms {
            obj.insert("timing_ms".into(), json!(ms));
        }
        obj.insert(
            "versions".into(),
            json!({ "isocurve": env!("CARGO_PKG_VERSION") }),
        );
        Value::Object(obj)
    }
}

fn classify(e: &Error) -> &'static str {
    match e {
        Error::DegreeCapExceeded { .. }
        | Error::OrbitCapExceeded(_)
        | Error::PrecisionExhausted(_) => "resource-error",
        _ => "schema-error",
    }
}

// ---------------------------------------------------------------- schemas

#[derive(Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct DomainInput {
    kind: String,
    #[serde(default)]
    p: Option<u64>,
}

impl DomainInput {
    fn to_domain(&self) -> Result<Domain, Error> {
        let need_p = || {
            self.p
                .ok_or_else(|| Error::InvalidInput(format!("domain {} needs a prime p", self.kind)))
        };
        match self.kind.as_str() {
            "Q" => Ok(Domain::Q),
            "Fp" => Domain::fp(need_p()?),
            "Zp2" => Domain::zp2(need_p()?),
            other => Err(Error::InvalidInput(format!("unknown domain kind {other}"))),
        }
    }
}

/// Shared schema for connection and Higgs charts. `parameters` lists extra
/// ambient variables (indeterminate coefficients) the entries may mention.
#[derive(Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChartInput {
    domain: DomainInput,
    variables: Vec<String>,
    #[serde(default)]
    parameters: Vec<String>,
    rank: usize,
    matrices: BTreeMap<String, Vec<Vec<String>>>,
    #[serde(default)]
    higgs: bool,
    #[serde(default)]
    trace_zero: bool,
}

impl ChartInput {
    fn ambient(&self) -> std::sync::Arc<[String]> {
        self.variables
            .iter()
            .chain(&self.parameters)
            .cloned()
            .collect()
    }

    fn parse_matrices(
        &self,
    ) -> Result<BTreeMap<String, RationalFunctionMatrix>, Error> {
        let domain = self.domain.to_domain()?;
        let vars = self.ambient();
        let mut out = BTreeMap::new();
        for (key, rows) in &self.matrices {
            out.insert(key.clone(), parse_matrix(rows, self.rank, domain, &vars)?);
        }
        Ok(out)
    }

    fn to_connection(&self) -> Result<FlatConnection, Error> {
        if self.higgs {
            return Err(Error::InvalidInput(
                "payload is marked as Higgs data, not a connection".into(),
            ));
        }
        FlatConnection::new(self.variables.clone(), self.parse_matrices()?, self.trace_zero)
    }

    fn to_higgs(&self) -> Result<HiggsChart, Error> {
        if !self.higgs {
            return Err(Error::InvalidInput(
                "Higgs payloads must set \"higgs\": true".into(),
            ));
        }
        HiggsChart::new(self.variables.clone(), self.parse_matrices()?, self.trace_zero)
    }
}

#[derive(Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct FoliationInput {
    domain: DomainInput,
    base: Vec<String>,
    fiber: Vec<String>,
    #[serde(default)]
    parameters: Vec<String>,
    lifts: BTreeMap<String, BTreeMap<String, String>>,
}

impl FoliationInput {
    fn build(&self) -> Result<(HorizontalFoliation, Domain), Error> {
        let domain = self.domain.to_domain()?;
        let vars: std::sync::Arc<[String]> = self
            .base
            .iter()
            .chain(&self.fiber)
            .chain(&self.parameters)
            .cloned()
            .collect();
        let mut r = BTreeMap::new();
        for (tj, row) in &self.lifts {
            let mut images = BTreeMap::new();
            for (yi, text) in row {
                images.insert(yi.clone(), parse_expression(text, &vars, domain)?);
            }
            r.insert(tj.clone(), images);
        }
        let fol = HorizontalFoliation::new(
            domain,
            &vars,
            self.base.clone(),
            self.fiber.clone(),
            &r,
            true,
        )?;
        Ok((fol, domain))
    }
}

#[derive(Clone, Deserialize)]
#[serde(untagged)]
enum PrimeSet {
    List(Vec<u64>),
    Range { from: u64, to: u64 },
}

impl PrimeSet {
    fn to_primes(&self) -> Vec<u64> {
        match self {
            PrimeSet::List(v) => v.clone(),
            PrimeSet::Range { from, to } => (*from..=*to).filter(|&n| is_prime(n)).collect(),
        }
    }
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

#[derive(Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PCurvatureJob {
    connection: ChartInput,
    p: u64,
}

#[derive(Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct KatzScanJob {
    connection: ChartInput,
    primes: PrimeSet,
}

#[derive(Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PClosedJob {
    foliation: FoliationInput,
    #[serde(default)]
    p: Option<u64>,
}

#[derive(Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct LeafCheckJob {
    foliation: FoliationInput,
    leaf: BTreeMap<String, String>,
}

#[derive(Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SchlesingerJob {
    n: usize,
    rank: usize,
    #[serde(default)]
    p: Option<u64>,
}

#[derive(Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChenCheckJob {
    n: usize,
    rank: usize,
    #[serde(default)]
    p: Option<u64>,
}

/// Shared schema for the Cartier-side jobs: a Higgs matrix over F_p(x) plus
/// one or two Frobenius-lift perturbations.
#[derive(Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct CartierJob {
    p: u64,
    #[serde(default)]
    var: Option<String>,
    #[serde(default)]
    lift: Option<String>,
    #[serde(default)]
    lift1: Option<String>,
    #[serde(default)]
    lift2: Option<String>,
    theta: Vec<Vec<String>>,
}

impl CartierJob {
    fn chart_var(&self) -> &str {
        self.var.as_deref().unwrap_or("x")
    }

    fn parse(&self) -> Result<(RationalFunctionMatrix, Domain, std::sync::Arc<[String]>), Error> {
        let domain = Domain::fp(self.p)?;
        let vars: std::sync::Arc<[String]> = [self.chart_var().to_string()].into();
        let theta = parse_matrix(&self.theta, self.theta.len(), domain, &vars)?;
        Ok((theta, domain, vars))
    }

    fn parse_lift(
        &self,
        text: &str,
        domain: Domain,
        vars: &std::sync::Arc<[String]>,
    ) -> Result<FrobeniusLift, Error> {
        let f = parse_expression(text, vars, domain)?;
        if !f.den().is_one() {
            return Err(Error::InvalidInput(
                "lift perturbation must be a polynomial".into(),
            ));
        }
        FrobeniusLift::new(self.chart_var().to_string(), f.num().clone())
    }

    fn single_lift(
        &self,
        domain: Domain,
        vars: &std::sync::Arc<[String]>,
    ) -> Result<FrobeniusLift, Error> {
        let text = self.lift.as_deref().ok_or_else(|| {
            Error::InvalidInput("job needs a \"lift\" perturbation".into())
        })?;
        self.parse_lift(text, domain, vars)
    }

    fn lift_pair(
        &self,
        domain: Domain,
        vars: &std::sync::Arc<[String]>,
    ) -> Result<(FrobeniusLift, FrobeniusLift), Error> {
        let (Some(t1), Some(t2)) = (self.lift1.as_deref(), self.lift2.as_deref()) else {
            return Err(Error::InvalidInput(
                "change-of-lift needs \"lift1\" and \"lift2\"".into(),
            ));
        };
        Ok((
            self.parse_lift(t1, domain, vars)?,
            self.parse_lift(t2, domain, vars)?,
        ))
    }
}

#[derive(Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct HitchinJob {
    higgs: ChartInput,
}

#[derive(Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct OrbitJob {
    minpoly: String,
    point: [String; 3],
    height_bound: f64,
    #[serde(default = "default_node_cap")]
    node_cap: usize,
}

fn default_node_cap() -> usize {
    100_000
}

fn parse_matrix(
    rows: &[Vec<String>],
    rank: usize,
    domain: Domain,
    vars: &std::sync::Arc<[String]>,
) -> Result<RationalFunctionMatrix, Error> {
    if rows.len() != rank || rows.iter().any(|r| r.len() != rank) {
        return Err(Error::InvalidInput(format!(
            "matrix must be {rank}x{rank} to match the declared rank"
        )));
    }
    let mut entries = Vec::with_capacity(rank * rank);
    for row in rows {
        for text in row {
            entries.push(parse_expression(text, vars, domain)?);
        }
    }
    Ok(RationalFunctionMatrix::new(rank, entries))
}

/// Identifier tokens of an expression, in order of first appearance.
fn identifiers(text: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_ascii_alphabetic() || ch == '_' || (!current.is_empty() && ch.is_ascii_digit()) {
            current.push(ch);
        } else if !current.is_empty() {
            if !out.contains(&current) {
                out.push(current.clone());
            }
            current.clear();
        }
    }
    if !current.is_empty() && !out.contains(&current) {
        out.push(current);
    }
    out
}

// ----------------------------------------------------------------- jobs

/// A schema-validated job together with its resource limits and the echo of
/// its JSON source.
pub struct Job {
    kind: JobKind,
    degree_cap: Option<usize>,
    time_budget_secs: Option<u64>,
    echo: Value,
}

#[derive(Clone)]
enum JobKind {
    ConnectionPCurvature(PCurvatureJob),
    KatzScan(KatzScanJob),
    FoliationPClosed(PClosedJob),
    LeafCheck(LeafCheckJob),
    Schlesinger(SchlesingerJob),
    ChenCheck(ChenCheckJob),
    OvCheck(CartierJob),
    ChangeOfLift(CartierJob),
    CanonicalSection(CartierJob),
    NonabelianKatz(CartierJob),
    Hitchin(HitchinJob),
    Orbit(OrbitJob),
}

/// Validates one job object against its kind's schema. The generic keys
/// `kind`, `degree_cap`, and `time_budget_secs` are stripped before the
/// payload schema is applied; everything else must match exactly.
pub fn parse_job(value: &Value) -> Result<Job, Error> {
    let schema = |msg: String| Error::InvalidInput(msg);
    let obj = value
        .as_object()
        .ok_or_else(|| schema("job must be a JSON object".into()))?;
    let kind = obj
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| schema("job needs a string \"kind\"".into()))?
        .to_string();
    let mut rest = obj.clone();
    rest.remove("kind");
    let degree_cap = take_uint(&mut rest, "degree_cap")?.map(|n| n as usize);
    let time_budget_secs = take_uint(&mut rest, "time_budget_secs")?;
    let payload = Value::Object(rest);

    fn decode<T: serde::de::DeserializeOwned>(kind: &str, payload: Value) -> Result<T, Error> {
        serde_json::from_value(payload)
            .map_err(|e| Error::InvalidInput(format!("{kind} payload: {e}")))
    }

    let kind = match kind.as_str() {
        "connection-pcurvature" => JobKind::ConnectionPCurvature(decode(&kind, payload)?),
        "katz-scan" => JobKind::KatzScan(decode(&kind, payload)?),
        "foliation-pclosed" => JobKind::FoliationPClosed(decode(&kind, payload)?),
        "leaf-check" => JobKind::LeafCheck(decode(&kind, payload)?),
        "schlesinger" => JobKind::Schlesinger(decode(&kind, payload)?),
        "chen-check" => JobKind::ChenCheck(decode(&kind, payload)?),
        "ov-check" => JobKind::OvCheck(decode(&kind, payload)?),
        "change-of-lift" => JobKind::ChangeOfLift(decode(&kind, payload)?),
        "canonical-section" => JobKind::CanonicalSection(decode(&kind, payload)?),
        "nonabelian-katz" => JobKind::NonabelianKatz(decode(&kind, payload)?),
        "hitchin" => JobKind::Hitchin(decode(&kind, payload)?),
        "orbit" => JobKind::Orbit(decode(&kind, payload)?),
        other => return Err(schema(format!("unknown job kind {other}"))),
    };
    Ok(Job {
        kind,
        degree_cap,
        time_budget_secs,
        echo: value.clone(),
    })
}

fn take_uint(obj: &mut serde_json::Map<String, Value>, key: &str) -> Result<Option<u64>, Error> {
    match obj.remove(key) {
        None => Ok(None),
        Some(v) => v
            .as_u64()
            .map(Some)
            .ok_or_else(|| Error::InvalidInput(format!("{key} must be a non-negative integer"))),
    }
}

// -------------------------------------------------------------- dispatch

fn matrix_json(m: &RationalFunctionMatrix) -> Value {
    json!(m.to_strings())
}

fn execute(kind: &JobKind, cap: usize) -> Result<(String, Value), Error> {
    match kind {
        JobKind::ConnectionPCurvature(job) => {
            let conn = job.connection.to_connection()?;
            let report = p_curvature_report(&conn, job.p, cap)?;
            let per_var: Vec<Value> = report
                .per_var
                .iter()
                .map(|(v, m, n)| {
                    json!({
                        "var": v,
                        "psi": m.to_strings(),
                        "nilpotency": if m.is_zero() { "zero".to_string() } else { n.to_string() },
                    })
                })
                .collect();
            let verdict = if report.vanishes { "vanishes" } else { "nonzero" };
            Ok((
                verdict.into(),
                json!({ "p": job.p, "per_var": per_var, "vanishes": report.vanishes }),
            ))
        }
        JobKind::KatzScan(job) => {
            let conn = job.connection.to_connection()?;
            let scan = katz_scan(&conn, &job.primes.to_primes(), cap)?;
            let mut bad = Vec::new();
            let mut nonzero = Vec::new();
            let per_prime: Vec<Value> = scan
                .iter()
                .map(|(p, outcome)| {
                    match outcome {
                        KatzOutcome::BadReduction => bad.push(*p),
                        KatzOutcome::Nonzero(_) => nonzero.push(*p),
                        KatzOutcome::Vanishes => {}
                    }
                    json!({ "p": p, "outcome": outcome.to_string() })
                })
                .collect();
            let mut verdict = if nonzero.is_empty() {
                "vanishes at all good primes".to_string()
            } else {
                format!("nonzero at {nonzero:?}")
            };
            if !bad.is_empty() {
                verdict += &format!("; bad: {bad:?}");
            }
            Ok((verdict, json!({ "per_prime": per_prime })))
        }
        JobKind::FoliationPClosed(job) => {
            let (fol, domain) = job.foliation.build()?;
            let p = job.p.unwrap_or_else(|| domain.characteristic());
            match p_closed_test(&fol, p, cap)? {
                PClosedOutcome::Closed => Ok(("p-closed".into(), json!({ "p": p }))),
                PClosedOutcome::Certificate { base_var, fiber_var, residual } => Ok((
                    "certificate".into(),
                    json!({
                        "p": p,
                        "base_var": base_var,
                        "fiber_var": fiber_var,
                        "residual": residual.to_string(),
                    }),
                )),
            }
        }
        JobKind::LeafCheck(job) => {
            let (fol, domain) = job.foliation.build()?;
            let mut phi = BTreeMap::new();
            for (var, text) in &job.leaf {
                phi.insert(var.clone(), parse_expression(text, fol.vars(), domain)?);
            }
            match leaf_restrict(&fol, &phi, cap)? {
                LeafOutcome::NotALeaf { base_var, fiber_var, residual } => Ok((
                    "not-a-leaf".into(),
                    json!({
                        "base_var": base_var,
                        "fiber_var": fiber_var,
                        "residual": residual.to_string(),
                    }),
                )),
                LeafOutcome::Leaf { pcurvature_values, all_vanish } => {
                    let values: Vec<Value> = pcurvature_values
                        .iter()
                        .map(|((tj, yi), v)| {
                            json!({ "base_var": tj, "fiber_var": yi, "value": v.to_string() })
                        })
                        .collect();
                    let verdict = if all_vanish {
                        "leaf; restricted p-curvature vanishes"
                    } else {
                        "leaf; restricted p-curvature nonzero"
                    };
                    Ok((
                        verdict.into(),
                        json!({ "restricted_values": values, "all_vanish": all_vanish }),
                    ))
                }
            }
        }
        JobKind::Schlesinger(job) => {
            let domain = match job.p {
                Some(p) => Domain::fp(p)?,
                None => Domain::Q,
            };
            let fol = build_schlesinger(domain, job.n, job.rank)?;
            let mut details = serde_json::Map::new();
            details.insert("n".into(), json!(job.n));
            details.insert("rank".into(), json!(job.rank));
            details.insert("flat".into(), json!(true));
            let verdict = match job.p {
                None => "flat".to_string(),
                Some(p) => match p_closed_test(&fol, p, cap)? {
                    PClosedOutcome::Closed => "flat; p-closed".to_string(),
                    PClosedOutcome::Certificate { base_var, fiber_var, residual } => {
                        details.insert(
                            "certificate".into(),
                            json!({
                                "base_var": base_var,
                                "fiber_var": fiber_var,
                                "residual": residual.to_string(),
                            }),
                        );
                        "flat; p-curvature certificate".to_string()
                    }
                },
            };
            Ok((verdict, Value::Object(details)))
        }
        JobKind::ChenCheck(job) => {
            let domain = match job.p {
                Some(p) => Domain::fp(p)?,
                None => Domain::Q,
            };
            let chart = ResidueChart::new(domain, job.n, job.rank)?;
            match chen_check(&chart)? {
                ChenOutcome::Match { c } => Ok((
                    format!("proportional; c = {c}"),
                    json!({ "c": c.to_string() }),
                )),
                ChenOutcome::AllZero => Ok(("degenerate; both fields vanish".into(), Value::Null)),
                ChenOutcome::Mismatch {
                    base_var,
                    fiber_var,
                    hamiltonian_image,
                    lift_image,
                } => Ok((
                    "mismatch".into(),
                    json!({
                        "base_var": base_var,
                        "fiber_var": fiber_var,
                        "hamiltonian_image": hamiltonian_image.to_string(),
                        "lift_image": lift_image.to_string(),
                    }),
                )),
            }
        }
        JobKind::OvCheck(job) => {
            let (theta, domain, vars) = job.parse()?;
            let lift = job.single_lift(domain, &vars)?;
            match ov_check(&theta, &lift, job.p)? {
                OvOutcome::Pass => Ok(("pass".into(), json!({ "p": job.p }))),
                OvOutcome::Fail { discrepancy } => Ok((
                    "fail".into(),
                    json!({ "p": job.p, "discrepancy": discrepancy.to_strings() }),
                )),
            }
        }
        JobKind::ChangeOfLift(job) => {
            let (theta, domain, vars) = job.parse()?;
            let (lift1, lift2) = job.lift_pair(domain, &vars)?;
            let g = lift_transition(&theta, &lift1, &lift2, job.p)?;
            match change_of_lift_check(&theta, &lift1, &lift2, job.p)? {
                LiftChangeOutcome::Pass => Ok((
                    "pass".into(),
                    json!({ "p": job.p, "transition": g.to_strings() }),
                )),
                LiftChangeOutcome::Fail { discrepancy } => Ok((
                    "fail".into(),
                    json!({
                        "p": job.p,
                        "transition": g.to_strings(),
                        "discrepancy": discrepancy.to_strings(),
                    }),
                )),
            }
        }
        JobKind::CanonicalSection(job) => {
            let (theta, domain, vars) = job.parse()?;
            let lift = job.single_lift(domain, &vars)?;
            let family = canonical_section(&theta, &lift, job.p)?;
            Ok((
                "constructed".into(),
                json!({
                    "lambda_var": family.lambda_var(),
                    "a_lambda": matrix_json(family.a_lambda()),
                    "psi": matrix_json(family.psi()),
                    "theta_tilde": matrix_json(family.theta_tilde()),
                }),
            ))
        }
        JobKind::NonabelianKatz(job) => {
            let (theta, domain, vars) = job.parse()?;
            let lift = job.single_lift(domain, &vars)?;
            let report = nonabelian_katz_check(&theta, &lift, job.p)?;
            let verdict = if report.passed() { "pass" } else { "fail" };
            Ok((
                verdict.into(),
                json!({
                    "central_fiber_vanishes": report.central_fiber_vanishes,
                    "lambda_divisible": report.lambda_divisible,
                    "frobenius_twist_matches": report.frobenius_twist_matches,
                }),
            ))
        }
        JobKind::Hitchin(job) => {
            let chart = job.higgs.to_higgs()?;
            let [var] = chart.coord_vars() else {
                return Err(Error::InvalidInput(
                    "hitchin jobs take a single-coordinate chart".into(),
                ));
            };
            let theta = chart.field(var);
            let invariants = hitchin_map(theta)?;
            let mut details = serde_json::Map::new();
            details.insert(
                "invariants".into(),
                json!(invariants.iter().map(|h| h.to_string()).collect::<Vec<_>>()),
            );
            if chart.rank() == 2 && theta.domain().characteristic() != 2 {
                let q = quadratic_hitchin(theta)?;
                details.insert("quadratic_matches".into(), json!(q == invariants[0]));
            }
            Ok(("computed".into(), Value::Object(details)))
        }
        JobKind::Orbit(job) => {
            let names = identifiers(&job.minpoly);
            let [name] = names.as_slice() else {
                return Err(Error::InvalidInput(
                    "minimal polynomial must involve exactly one variable".into(),
                ));
            };
            let vars: std::sync::Arc<[String]> = [name.clone()].into();
            let m = parse_expression(&job.minpoly, &vars, Domain::Q)?;
            if !m.den().is_one() {
                return Err(Error::InvalidInput(
                    "minimal polynomial must be a polynomial".into(),
                ));
            }
            let ring = std::sync::Arc::new(NumberRing::from_poly(m.num(), name)?);
            let mut coords = Vec::new();
            for text in &job.point {
                let f = parse_expression(text, &vars, Domain::Q)?;
                if !f.den().is_one() {
                    return Err(Error::InvalidInput(
                        "point coordinates must be ring integers".into(),
                    ));
                }
                coords.push(ring.element_from_poly(f.num())?);
            }
            let point = NumberRingPoint::new(
                ring.clone(),
                [coords[0].clone(), coords[1].clone(), coords[2].clone()],
            );
            let render = |pt: &NumberRingPoint| -> Value {
                json!(pt.coords().iter().map(|c| ring.render(c)).collect::<Vec<_>>())
            };
            match orbit_search(&point, job.height_bound, job.node_cap)? {
                OrbitOutcome::Finite { orbit, moves } => Ok((
                    format!("finite; orbit size {}", orbit.len()),
                    json!({
                        "size": orbit.len(),
                        "members": orbit.iter().map(render).collect::<Vec<_>>(),
                        "move_labels": MCGMove::all().iter().map(|m| m.label()).collect::<Vec<_>>(),
                        "move_table": moves,
                        "kappa": ring.render(&point.kappa()),
                    }),
                )),
                OrbitOutcome::Exceeded { witness } => Ok((
                    "exceeded".into(),
                    json!({
                        "witness": render(&witness),
                        "height_bound": job.height_bound,
                    }),
                )),
                OrbitOutcome::Capped => Ok((
                    "capped".into(),
                    json!({ "node_cap": job.node_cap }),
                )),
            }
        }
    }
}

// --------------------------------------------------------------- running

/// Validates and runs one job object; schema violations become reports
/// rather than errors, so batch entries stay isolated.
pub fn run_value(value: &Value, cfg: &RunConfig) -> Report {
    match parse_job(value) {
        Ok(job) => run_job(&job, cfg),
        Err(e) => Report {
            job: value.clone(),
            status: "schema-error",
            verdict: None,
            error: Some(e.to_string()),
            details: Value::Null,
            timing_ms: None,
        },
    }
}

/// Runs one already-parsed job, mapping failures to report statuses;
/// panics inside the job are caught and reported as invariant violations.
pub fn run_job(job: &Job, cfg: &RunConfig) -> Report {
    let started = Instant::now();
    let cap = job
        .degree_cap
        .or(cfg.degree_cap)
        .unwrap_or(DEFAULT_DEGREE_CAP);
    let outcome = match job.time_budget_secs {
        None => execute_caught(&job.kind, cap),
        Some(secs) => execute_with_budget(&job.kind, cap, secs),
    };
    let (status, verdict, error, details) = match outcome {
        Ok((verdict, details)) => ("ok", Some(verdict), None, details),
        Err((status, message)) => (status, None, Some(message), Value::Null),
    };
    Report {
        job: job.echo.clone(),
        status,
        verdict,
        error,
        details,
        timing_ms: cfg
            .timing
            .then(|| started.elapsed().as_millis().min(u64::MAX as u128) as u64),
    }
}

type ExecOutcome = Result<(String, Value), (&'static str, String)>;

fn execute_caught(kind: &JobKind, cap: usize) -> ExecOutcome {
    match panic::catch_unwind(AssertUnwindSafe(|| execute(kind, cap))) {
        Ok(Ok(done)) => Ok(done),
        Ok(Err(e)) => Err((classify(&e), e.to_string())),
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unnamed panic".into());
            Err(("invariant-violation", message))
        }
    }
}

/// Coarse wall-clock guard: the job runs on a detached helper thread and is
/// reported as a resource error if it misses the deadline. The helper is
/// not interrupted; it finishes (or dies with the process) in the
/// background.
fn execute_with_budget(kind: &JobKind, cap: usize, secs: u64) -> ExecOutcome {
    let (tx, rx) = mpsc::channel();
    let owned = kind.clone();
    std::thread::spawn(move || {
        let _ = tx.send(execute_caught(&owned, cap));
    });
    match rx.recv_timeout(Duration::from_secs(secs)) {
        Ok(outcome) => outcome,
        Err(_) => Err((
            "resource-error",
            format!("time budget of {secs}s exceeded"),
        )),
    }
}

/// Runs every job of a manifest `{"jobs": [...]}`; reports come back in
/// input order regardless of worker interleaving, and each failure is
/// isolated to its own report.
pub fn run_manifest(manifest: &Value, parallel: usize, cfg: &RunConfig) -> Result<Vec<Report>, Error> {
    let jobs = manifest
        .as_object()
        .and_then(|o| o.get("jobs"))
        .and_then(Value::as_array)
        .ok_or_else(|| Error::InvalidInput("manifest must be {\"jobs\": [...]}".into()))?;

    let slots: Vec<Mutex<Option<Report>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = parallel.max(1).min(jobs.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                *slots[i].lock().unwrap() = Some(run_value(&jobs[i], cfg));
            });
        }
    });
    Ok(slots
        .into_iter()
        .map(|slot| slot.into_inner().unwrap().expect("every slot filled"))
        .collect())
}

/// Batch output: the reports plus an all-pass summary, as emitted by `scan`.
pub fn manifest_value(reports: &[Report]) -> Value {
    let count = |status: &str| reports.iter().filter(|r| r.status == status).count();
    json!({
        "reports": reports.iter().map(Report::to_value).collect::<Vec<_>>(),
        "summary": {
            "total": reports.len(),
            "ok": count("ok"),
            "schema_errors": count("schema-error"),
            "resource_errors": count("resource-error"),
            "invariant_violations": count("invariant-violation"),
            "all_ok": reports.iter().all(|r| r.status == "ok"),
        },
    })
}

/// Highest-severity exit code across a batch.
pub fn batch_exit_code(reports: &[Report]) -> i32 {
    reports.iter().map(Report::exit_code).max().unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_value(v: Value) -> Report {
        let job = parse_job(&v).unwrap();
        run_job(&job, &RunConfig::default())
    }

    #[test]
    fn ov_check_job_passes() {
        let report = run_value(json!({
            "kind": "ov-check",
            "p": 7,
            "lift": "x^2",
            "theta": [["0", "x^3+1"], ["0", "0"]],
        }));
        assert_eq!(report.status, "ok");
        assert_eq!(report.verdict.as_deref(), Some("pass"));
    }

    #[test]
    fn orbit_job_reports_members_in_canonical_order() {
        let report = run_value(json!({
            "kind": "orbit",
            "minpoly": "a",
            "point": ["1", "0", "0"],
            "height_bound": 10,
            "node_cap": 1000,
        }));
        assert_eq!(report.status, "ok");
        assert_eq!(report.verdict.as_deref(), Some("finite; orbit size 6"));
        let members = report.details["members"].as_array().unwrap();
        assert_eq!(members[0], json!(["-1", "0", "0"]));
        assert_eq!(members[5], json!(["1", "0", "0"]));
    }

    #[test]
    fn orbit_job_over_a_quadratic_ring() {
        let report = run_value(json!({
            "kind": "orbit",
            "minpoly": "a^2-a-1",
            "point": ["a", "0", "0"],
            "height_bound": 100,
            "node_cap": 100_000,
        }));
        assert_eq!(report.status, "ok");
        assert_eq!(report.verdict.as_deref(), Some("finite; orbit size 6"));
    }

    #[test]
    fn schema_violations_are_reported_not_panicked() {
        let missing = parse_job(&json!({ "kind": "ov-check", "p": 7 }));
        assert!(missing.is_err());
        let unknown_kind = parse_job(&json!({ "kind": "spectral-flow" }));
        assert!(unknown_kind.is_err());
        let unknown_field = parse_job(&json!({
            "kind": "ov-check",
            "p": 7,
            "lift": "0",
            "theta": [["0"]],
            "surprise": 1,
        }));
        assert!(unknown_field.is_err());
    }

    #[test]
    fn degree_cap_maps_to_a_resource_error() {
        let v = json!({
            "kind": "connection-pcurvature",
            "degree_cap": 5,
            "p": 13,
            "connection": {
                "domain": {"kind": "Fp", "p": 13},
                "variables": ["x"],
                "rank": 1,
                "matrices": {"x": [["x^4"]]},
            },
        });
        let report = run_job(&parse_job(&v).unwrap(), &RunConfig::default());
        assert_eq!(report.status, "resource-error");
        assert_eq!(report.exit_code(), 3);
    }

    #[test]
    fn katz_scan_job_summarizes_bad_primes() {
        let report = run_value(json!({
            "kind": "katz-scan",
            "connection": {
                "domain": {"kind": "Q"},
                "variables": ["x"],
                "rank": 1,
                "matrices": {"x": [["(1/2)/x"]]},
            },
            "primes": {"from": 2, "to": 23},
        }));
        assert_eq!(report.status, "ok");
        assert_eq!(
            report.verdict.as_deref(),
            Some("vanishes at all good primes; bad: [2]")
        );
    }

    #[test]
    fn manifest_preserves_input_order_and_isolates_failures() {
        let manifest = json!({
            "jobs": [
                { "kind": "ov-check", "p": 5, "lift": "0", "theta": [["0", "1"], ["0", "0"]] },
                { "kind": "nonsense" },
                { "kind": "orbit", "minpoly": "a", "point": ["0","0","0"],
                  "height_bound": 5, "node_cap": 10 },
            ]
        });
        for parallel in [1, 3] {
            let reports = run_manifest(&manifest, parallel, &RunConfig::default()).unwrap();
            assert_eq!(reports.len(), 3);
            assert_eq!(reports[0].status, "ok");
            assert_eq!(reports[1].status, "schema-error");
            assert_eq!(reports[2].status, "ok");
            assert_eq!(batch_exit_code(&reports), 2);
        }
    }

    #[test]
    fn reports_are_byte_identical_across_runs_and_parallelism() {
        let manifest = json!({
            "jobs": [
                { "kind": "chen-check", "n": 3, "rank": 2 },
                { "kind": "ov-check", "p": 3, "lift": "x", "theta": [["0", "x^2"], ["0", "0"]] },
            ]
        });
        let render = |parallel| {
            let reports = run_manifest(&manifest, parallel, &RunConfig::default()).unwrap();
            serde_json::to_string_pretty(&manifest_value(&reports)).unwrap()
        };
        let one = render(1);
        assert_eq!(one, render(1));
        assert_eq!(one, render(2));
    }

    #[test]
    fn emitted_expressions_reparse_to_the_same_value() {
        let report = run_value(json!({
            "kind": "canonical-section",
            "p": 5,
            "lift": "x^2",
            "theta": [["0", "x^3+1"], ["0", "0"]],
        }));
        assert_eq!(report.status, "ok");
        let psi = report.details["psi"].as_array().unwrap();
        let vars: std::sync::Arc<[String]> = ["lambda".to_string(), "x".to_string()].into();
        let domain = Domain::fp(5).unwrap();
        for row in psi {
            for entry in row.as_array().unwrap() {
                let text = entry.as_str().unwrap();
                let value = parse_expression(text, &vars, domain).unwrap();
                assert_eq!(value.to_string(), text);
            }
        }
    }

    #[test]
    fn time_budget_reports_a_resource_error() {
        let v = json!({
            "kind": "connection-pcurvature",
            "time_budget_secs": 0,
            "p": 101,
            "connection": {
                "domain": {"kind": "Fp", "p": 101},
                "variables": ["x"],
                "parameters": ["c"],
                "rank": 2,
                "matrices": {
                    "x": [["0", "c*x^4+1"], ["c", "0"]],
                },
            },
        });
        let report = run_job(&parse_job(&v).unwrap(), &RunConfig::default());
        assert_eq!(report.status, "resource-error");
    }

    #[test]
    fn identifier_scan_finds_names_in_order() {
        assert_eq!(identifiers("a^2-a-1"), ["a"]);
        assert_eq!(identifiers("x*y + t10"), ["x", "y", "t10"]);
        assert!(identifiers("12 - 3").is_empty());
    }
}
