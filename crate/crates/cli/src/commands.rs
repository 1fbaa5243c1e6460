//! The six command bodies. Each returns the complete output as a string so
//! the binary can route it to standard output or a file unchanged; commands
//! with a verdict also return whether they passed. Output is deterministic:
//! identical inputs produce identical bytes.

use std::fmt::Write as _;

use ltube_core::{
    axial_profile, expectation_field, honeycomb_region1_slope, honeycomb_slope_min,
    hyperbolic_identity_residuals, region1_slope, simulate, solve_field, LatticeKind, McConfig,
    SiteClass, SplitMix64,
};

use crate::canon::Canonical;
use crate::emit::{class_token, human, machine, symmetry_token, total, verdict, Format};
use crate::report::{
    AbsorbReport, FieldReport, FieldRow, ProfileReport, ProfileRow, SlopeAnalysis, SpecEcho,
    SweepReport, SweepRow,
};
use crate::CliError;

/// Exit-0 threshold for `compare --oracle linear`: largest tolerated
/// per-site absolute deviation.
const LINEAR_MAX_ABS: f64 = 1e-9;
/// Exit-0 threshold for `compare --oracle mc`: required fraction of
/// accessible sites within four standard errors.
const MC_FRACTION_WITHIN: f64 = 0.99;
/// Walk count used by `compare --oracle mc` when `--walks` is not given.
const DEFAULT_WALKS: u64 = 200_000;

/// Scalar observables available to `sweep`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    /// Probability of absorption at the `q = 0` end (user frame).
    TotalLeft,
    /// Largest expectation value on the grid.
    Peak,
    /// Slope of the linear ramp between the source row and the far end.
    Slope,
}

impl Observable {
    pub fn token(self) -> &'static str {
        match self {
            Observable::TotalLeft => "total_left",
            Observable::Peak => "peak",
            Observable::Slope => "slope",
        }
    }
}

/// Reference implementation `compare` checks the closed form against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Oracle {
    Linear,
    Mc,
}

pub struct SweepOpts {
    pub param: String,
    pub from: f64,
    pub to: f64,
    pub steps: u32,
    pub observable: Observable,
}

pub struct CompareOpts {
    pub oracle: Oracle,
    pub walks: Option<u64>,
    pub seed: Option<u64>,
    /// Colour the PASS/FAIL verdict (the binary enables this only for a
    /// terminal with `NO_COLOR` unset).
    pub color: bool,
}

fn echo(canon: &Canonical) -> SpecEcho {
    let user = canon.user();
    SpecEcho {
        lattice: user.kind(),
        m: user.m(),
        n: user.n(),
        eta: user.eta(),
        source: [user.a(), user.b()],
    }
}

fn to_json<T: serde::Serialize>(report: &T) -> String {
    let mut text = serde_json::to_string_pretty(report).expect("report types always serialize");
    text.push('\n');
    text
}

/// `field`: expected visit counts for every site of the `(m+1) × (n+2)`
/// grid, row-major in `p`, labelled with site class and bond orientation.
pub fn field(canon: &Canonical, format: Format) -> String {
    let field = expectation_field(canon.spec());
    let user = canon.user();
    let mut rows = Vec::with_capacity(((user.m() + 1) * (user.n() + 2)) as usize);
    for p in 0..=user.m() {
        for q in 0..=user.n() + 1 {
            let (class, symmetry) = canon.labels(p, q);
            let value = field.value(p, canon.canonical_q(q));
            rows.push(FieldRow {
                p,
                q,
                class,
                symmetry,
                value,
            });
        }
    }
    match format {
        Format::Csv => {
            let mut out = String::from("p,q,class,symmetry,value\n");
            for row in &rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    row.p,
                    row.q,
                    class_token(row.class),
                    symmetry_token(row.symmetry),
                    machine(row.value)
                );
            }
            out
        }
        Format::Json => to_json(&FieldReport {
            command: "field".into(),
            spec: echo(canon),
            rows,
        }),
    }
}

/// `absorb`: per-column absorption probabilities at both ends plus the end
/// totals (totals at 15 significant digits).
pub fn absorb(canon: &Canonical, format: Format) -> String {
    let ends = canon.ends();
    match format {
        Format::Csv => {
            let mut out = String::from("p,end,value\n");
            for (p, v) in ends.left.iter().enumerate() {
                let _ = writeln!(out, "{p},left,{}", machine(*v));
            }
            for (p, v) in ends.right.iter().enumerate() {
                let _ = writeln!(out, "{p},right,{}", machine(*v));
            }
            let _ = writeln!(out, "total,left,{}", total(ends.total_left));
            let _ = writeln!(out, "total,right,{}", total(ends.total_right));
            out
        }
        Format::Json => to_json(&AbsorbReport {
            command: "absorb".into(),
            spec: echo(canon),
            left: ends.left,
            right: ends.right,
            total_left: ends.total_left,
            total_right: ends.total_right,
        }),
    }
}

/// `profile`: per-row field sums `e(q)` for the interior rows, optionally
/// with the ramp-slope analysis (honeycomb only).
pub fn profile(
    canon: &Canonical,
    format: Format,
    slope_analysis: bool,
) -> Result<String, CliError> {
    if slope_analysis && canon.user().kind() != LatticeKind::Honeycomb {
        return Err(CliError::Flags(
            "UnsupportedAnalysis: --slope-analysis applies only to honeycomb tubes \
             (square and triangular ramp slopes have no interior bias minimum)"
                .into(),
        ));
    }
    let prof = axial_profile(canon.spec());
    let user = canon.user();
    let rows: Vec<ProfileRow> = (1..=user.n())
        .map(|q| ProfileRow {
            q,
            value: prof.value(canon.canonical_q(q)),
        })
        .collect();
    let analysis = slope_analysis.then(|| {
        let spec = canon.spec();
        let (eta_argmin, slope_min) = honeycomb_slope_min(spec.n(), spec.b());
        SlopeAnalysis {
            slope: honeycomb_region1_slope(spec.n(), spec.b(), spec.eta()),
            eta_argmin,
            slope_min,
        }
    });
    Ok(match format {
        Format::Csv => {
            let mut out = String::from("q,value\n");
            for row in &rows {
                let _ = writeln!(out, "{},{}", row.q, machine(row.value));
            }
            if let Some(a) = &analysis {
                let _ = writeln!(out, "slope,{}", machine(a.slope));
                let _ = writeln!(out, "eta_argmin,{}", machine(a.eta_argmin));
                let _ = writeln!(out, "slope_min,{}", machine(a.slope_min));
            }
            out
        }
        Format::Json => to_json(&ProfileReport {
            command: "profile".into(),
            spec: echo(canon),
            rows,
            slope_analysis: analysis,
        }),
    })
}

/// Log-spaced grid from `from` to `to` with `steps` points. Both endpoints
/// are exact (no ln/exp round trip), so a single point is exactly `from`.
fn log_grid(from: f64, to: f64, steps: u32) -> Vec<f64> {
    if steps == 1 {
        return vec![from];
    }
    let step_ln = (to.ln() - from.ln()) / (steps - 1) as f64;
    (0..steps)
        .map(|i| match i {
            0 => from,
            _ if i == steps - 1 => to,
            _ => (from.ln() + step_ln * i as f64).exp(),
        })
        .collect()
}

fn observe(canon: &Canonical, observable: Observable) -> f64 {
    match observable {
        Observable::TotalLeft => canon.ends().total_left,
        Observable::Peak => expectation_field(canon.spec()).peak().2,
        Observable::Slope => region1_slope(canon.spec()),
    }
}

/// `sweep`: one scalar observable across a log-spaced bias grid.
pub fn sweep(canon: &Canonical, opts: &SweepOpts, format: Format) -> Result<String, CliError> {
    if opts.param != "eta" {
        return Err(CliError::Flags(format!(
            "UnsupportedParameter: only --param eta can be swept (got {:?})",
            opts.param
        )));
    }
    if !opts.from.is_finite() || !opts.to.is_finite() || opts.from <= 0.0 || opts.to <= 0.0 {
        return Err(CliError::Flags(
            "BadSweepRange: --from and --to must be positive finite bias values".into(),
        ));
    }
    let user = canon.user();
    let rows: Vec<SweepRow> = log_grid(opts.from, opts.to, opts.steps)
        .into_iter()
        .map(|eta| {
            let point = Canonical::new(user.kind(), user.m(), user.n(), eta, user.a(), user.b())
                .expect("geometry already validated and the new bias is positive finite");
            SweepRow {
                eta,
                value: observe(&point, opts.observable),
            }
        })
        .collect();
    Ok(match format {
        Format::Csv => {
            let mut out = String::from("eta,value\n");
            for row in &rows {
                let _ = writeln!(out, "{},{}", machine(row.eta), machine(row.value));
            }
            out
        }
        Format::Json => to_json(&SweepReport {
            command: "sweep".into(),
            spec: echo(canon),
            observable: opts.observable.token().into(),
            from: opts.from,
            to: opts.to,
            steps: opts.steps,
            rows,
        }),
    })
}

fn spec_line(canon: &Canonical) -> String {
    let user = canon.user();
    format!(
        "lattice={} m={} n={} eta={} source={},{}",
        user.kind(),
        user.m(),
        user.n(),
        user.eta(),
        user.a(),
        user.b()
    )
}

/// `compare`: evaluate the closed form against the chosen oracle and print a
/// deterministic report. Returns the text and whether the comparison passed.
pub fn compare(canon: &Canonical, opts: &CompareOpts) -> Result<(String, bool), CliError> {
    match opts.oracle {
        Oracle::Linear => {
            if opts.walks.is_some() || opts.seed.is_some() {
                return Err(CliError::Flags(
                    "InconsistentFlags: --walks and --seed apply only to --oracle mc".into(),
                ));
            }
            compare_linear(canon, opts.color)
        }
        Oracle::Mc => {
            let walks = opts.walks.unwrap_or(DEFAULT_WALKS);
            if walks == 0 {
                return Err(CliError::Flags(
                    "BadWalkCount: --walks must be at least 1".into(),
                ));
            }
            Ok(compare_mc(canon, walks, opts.seed.unwrap_or(0), opts.color))
        }
    }
}

fn compare_linear(canon: &Canonical, color: bool) -> Result<(String, bool), CliError> {
    let spec = canon.spec();
    let closed = expectation_field(spec);
    let solved = solve_field(spec)?;

    let mut sites = 0u64;
    let mut sum_sq = 0.0;
    let mut worst: Option<(i64, i64, f64, f64, f64)> = None;
    let mut zero_mesh_sites = 0u64;
    let mut zero_mesh_exact = true;
    for p in 0..=spec.m() {
        for q in 0..=spec.n() + 1 {
            let c = closed.value(p, q);
            let o = solved.value(p, q);
            let d = (c - o).abs();
            sites += 1;
            sum_sq += d * d;
            if worst.is_none_or(|w| d > w.4) {
                worst = Some((p, q, c, o, d));
            }
            if spec.classify(p, q).expect("grid coordinates").class == SiteClass::ZeroMesh {
                zero_mesh_sites += 1;
                zero_mesh_exact &= c == 0.0 && o == 0.0;
            }
        }
    }
    let (wp, wq, wc, wo, max_abs) = worst.expect("the grid is never empty");
    let rms = (sum_sq / sites as f64).sqrt();
    let pass = max_abs <= LINEAR_MAX_ABS;

    let mut out = String::from("compare: closed form vs linear oracle\n");
    let _ = writeln!(out, "{}", spec_line(canon));
    let _ = writeln!(
        out,
        "sites={sites} max_abs={} rms={}",
        human(max_abs),
        human(rms)
    );
    let _ = writeln!(
        out,
        "worst: p={wp} q={} closed={} oracle={} diff={}",
        canon.canonical_q(wq),
        human(wc),
        human(wo),
        human(max_abs)
    );
    if spec.kind() == LatticeKind::Triangular {
        let _ = writeln!(
            out,
            "zero mesh: {zero_mesh_sites} sites, identical zeros in both: {}",
            if zero_mesh_exact { "yes" } else { "no" }
        );
    }
    let _ = writeln!(
        out,
        "verdict: {} (threshold max_abs <= {})",
        verdict(pass, color),
        human(LINEAR_MAX_ABS)
    );
    Ok((out, pass))
}

fn compare_mc(canon: &Canonical, walks: u64, seed: u64, color: bool) -> (String, bool) {
    let spec = canon.spec();
    let closed = expectation_field(spec);
    let est = simulate(spec, &McConfig::new(walks, seed));

    let mut sites = 0u64;
    let mut within = 0u64;
    let mut max_abs = 0.0f64;
    let mut sum_sq = 0.0;
    // Worst offender by standardized deviation |closed − mc| / SE.
    let mut worst: Option<(i64, i64, f64, f64, f64, f64)> = None;
    for p in 0..=spec.m() {
        for q in 1..=spec.n() {
            if spec.classify(p, q).expect("grid coordinates").class != SiteClass::Interior {
                continue;
            }
            let c = closed.value(p, q);
            let mc = est.field().value(p, q);
            let se = est.se(p, q);
            let d = (c - mc).abs();
            let z = if d == 0.0 { 0.0 } else { d / se };
            sites += 1;
            if d <= 4.0 * se {
                within += 1;
            }
            max_abs = max_abs.max(d);
            sum_sq += d * d;
            if worst.is_none_or(|w| z > w.5) {
                worst = Some((p, q, c, mc, se, z));
            }
        }
    }
    let rms = (sum_sq / sites as f64).sqrt();
    let fraction = within as f64 / sites as f64;
    let pass = fraction >= MC_FRACTION_WITHIN;

    // End totals in the user frame, standardized by the binomial SE.
    let ends = canon.ends();
    let (mc_left, mc_right, se_left, se_right) = if canon.reflected() {
        (
            est.total_right(),
            est.total_left(),
            est.total_right_se(),
            est.total_left_se(),
        )
    } else {
        (
            est.total_left(),
            est.total_right(),
            est.total_left_se(),
            est.total_right_se(),
        )
    };
    let z_of = |exact: f64, estimate: f64, se: f64| {
        let d = (exact - estimate).abs();
        if d == 0.0 {
            0.0
        } else {
            d / se
        }
    };

    let mut out = String::from("compare: closed form vs monte carlo oracle\n");
    let _ = writeln!(out, "{} walks={walks} seed={seed}", spec_line(canon));
    let _ = writeln!(
        out,
        "sites={sites} within_4se={within} outside_4se={} fraction_within={fraction:.6}",
        sites - within
    );
    let _ = writeln!(out, "max_abs={} rms={}", human(max_abs), human(rms));
    if let Some((p, q, c, mc, se, z)) = worst {
        let _ = writeln!(
            out,
            "worst: p={p} q={} closed={} mc={} se={} z={}",
            canon.canonical_q(q),
            human(c),
            human(mc),
            human(se),
            human(z)
        );
    }
    let _ = writeln!(
        out,
        "totals: left closed={} mc={} z={} | right closed={} mc={} z={}",
        human(ends.total_left),
        human(mc_left),
        human(z_of(ends.total_left, mc_left, se_left)),
        human(ends.total_right),
        human(mc_right),
        human(z_of(ends.total_right, mc_right, se_right))
    );
    let _ = writeln!(out, "truncated={}", est.truncated());
    let _ = writeln!(
        out,
        "verdict: {} (threshold >= {}% of accessible sites within 4 SE)",
        verdict(pass, color),
        MC_FRACTION_WITHIN * 100.0
    );
    (out, pass)
}

/// Deviation of the discrete ring-mode sum from the delta it must resolve:
/// `(1/(m+1)) Σ_k cos(2πk·dp/(m+1))` equals 1 at `dp = 0` and 0 elsewhere.
fn ring_delta_deviation() -> f64 {
    let mut deviation = 0.0f64;
    for m in [1i64, 2, 3, 4, 5, 7, 9, 12, 17, 24] {
        let circ = m + 1;
        for dp in 0..=m {
            let mut sum = 0.0;
            for k in 0..circ {
                let reduced = (k * dp).rem_euclid(circ);
                sum += (2.0 * std::f64::consts::PI * reduced as f64 / circ as f64).cos();
            }
            let expected = if dp == 0 { circ as f64 } else { 0.0 };
            deviation = deviation.max((sum - expected).abs() / circ as f64);
        }
    }
    deviation
}

/// `selftest`: numeric smoke test — the three hyperbolic product identities
/// the honeycomb closed form rests on, over 1000 random points, plus the
/// ring delta resolution. Returns the report and whether everything passed.
pub fn selftest(color: bool) -> (String, bool) {
    const TOLERANCE: f64 = 1e-12;
    let mut rng = SplitMix64::new(0x7e57_0001);
    let mut max_residual = [0.0f64; 3];
    for _ in 0..1000 {
        let gamma = 5.0 * rng.next_f64();
        let n = 1 + (rng.next_u64() % 40) as i64;
        let b = 1 + (rng.next_u64() % n as u64) as i64;
        let residuals = hyperbolic_identity_residuals(gamma, b, n);
        for (worst, r) in max_residual.iter_mut().zip(residuals) {
            *worst = worst.max(r.abs());
        }
    }
    let delta_deviation = ring_delta_deviation();

    let mut out = String::from("selftest: numeric core smoke test\n");
    let mut all_pass = true;
    for (i, worst) in max_residual.iter().enumerate() {
        let pass = *worst <= TOLERANCE;
        all_pass &= pass;
        let _ = writeln!(
            out,
            "hyperbolic product identity {}: max relative residual {} over 1000 random points .. {}",
            i + 1,
            human(*worst),
            verdict(pass, color)
        );
    }
    let pass = delta_deviation <= TOLERANCE;
    all_pass &= pass;
    let _ = writeln!(
        out,
        "ring delta resolution: max deviation {} over circumferences 2..=25 .. {}",
        human(delta_deviation),
        verdict(pass, color)
    );
    let _ = writeln!(out, "overall: {}", verdict(all_pass, color));
    (out, all_pass)
}
