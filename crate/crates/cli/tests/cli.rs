//! End-to-end tests of the `ltube` binary: exit codes, output schemas,
//! JSON round-trips, frame mapping for mirrored honeycomb sources, and
//! byte-level determinism.

use std::process::{Command, Output};

use ltube_cli::report::{AbsorbReport, FieldReport, ProfileReport, SweepReport};

fn ltube(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ltube"))
        .args(args)
        .env("NO_COLOR", "1")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout is UTF-8")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("stderr is UTF-8")
}

fn assert_rejected(args: &[&str], constraint: &str) {
    let out = ltube(args);
    assert_eq!(out.status.code(), Some(2), "{args:?} should exit 2");
    let err = stderr(&out);
    assert!(
        err.starts_with(constraint),
        "{args:?}: expected constraint {constraint:?}, got {err:?}"
    );
    assert!(out.stdout.is_empty(), "rejected runs must not produce data");
}

// ---------------------------------------------------------------- exit codes

#[test]
fn invalid_tubes_exit_2_with_the_named_constraint() {
    assert_rejected(
        &[
            "field",
            "--lattice",
            "triangular",
            "-m",
            "7",
            "-n",
            "5",
            "--eta",
            "1",
            "--source",
            "0,2",
        ],
        "SingularCircumference",
    );
    assert_rejected(
        &[
            "field",
            "--lattice",
            "honeycomb",
            "-m",
            "2",
            "-n",
            "5",
            "--eta",
            "1",
            "--source",
            "0,2",
        ],
        "OddCircumference",
    );
    assert_rejected(
        &[
            "field",
            "--lattice",
            "triangular",
            "-m",
            "2",
            "-n",
            "5",
            "--eta",
            "1",
            "--source",
            "0,2",
        ],
        "OddCircumference",
    );
    assert_rejected(
        &[
            "absorb",
            "--lattice",
            "square",
            "-m",
            "0",
            "-n",
            "5",
            "--eta",
            "1",
            "--source",
            "0,2",
        ],
        "BadDimension",
    );
    assert_rejected(
        &[
            "absorb",
            "--lattice",
            "square",
            "-m",
            "3",
            "-n",
            "5",
            "--eta",
            "-1",
            "--source",
            "0,2",
        ],
        "BadBias",
    );
    assert_rejected(
        &[
            "profile",
            "--lattice",
            "square",
            "-m",
            "3",
            "-n",
            "5",
            "--eta",
            "1",
            "--source",
            "0,6",
        ],
        "BadSource",
    );
}

#[test]
fn inconsistent_flags_exit_2_with_a_named_constraint() {
    let spec = [
        "--lattice",
        "square",
        "-m",
        "3",
        "-n",
        "4",
        "--eta",
        "1",
        "--source",
        "0,2",
    ];
    let mut args = vec!["compare"];
    args.extend_from_slice(&spec);
    args.extend_from_slice(&["--walks", "100"]);
    assert_rejected(&args, "InconsistentFlags");

    let mut args = vec!["compare"];
    args.extend_from_slice(&spec);
    args.extend_from_slice(&["--oracle", "mc", "--walks", "0"]);
    assert_rejected(&args, "BadWalkCount");

    let mut args = vec!["profile"];
    args.extend_from_slice(&spec);
    args.push("--slope-analysis");
    assert_rejected(&args, "UnsupportedAnalysis");

    let mut args = vec!["sweep"];
    args.extend_from_slice(&spec);
    args.extend_from_slice(&[
        "--param",
        "m",
        "--from",
        "1",
        "--to",
        "2",
        "--steps",
        "3",
        "--observable",
        "peak",
    ]);
    assert_rejected(&args, "UnsupportedParameter");

    let mut args = vec!["sweep"];
    args.extend_from_slice(&spec);
    args.extend_from_slice(&[
        "--from",
        "-1",
        "--to",
        "2",
        "--steps",
        "3",
        "--observable",
        "peak",
    ]);
    assert_rejected(&args, "BadSweepRange");
}

#[test]
fn unparseable_flags_exit_2() {
    let out = ltube(&[
        "field",
        "--lattice",
        "square",
        "-m",
        "3",
        "-n",
        "4",
        "--eta",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2), "missing --source");
    let out = ltube(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2), "unknown subcommand");
    let out = ltube(&[
        "sweep",
        "--lattice",
        "square",
        "-m",
        "3",
        "-n",
        "4",
        "--eta",
        "1",
        "--source",
        "0,2",
        "--from",
        "1",
        "--to",
        "2",
        "--steps",
        "0",
        "--observable",
        "peak",
    ]);
    assert_eq!(out.status.code(), Some(2), "zero grid points");
}

// ------------------------------------------------------------------- schemas

#[test]
fn field_csv_covers_the_full_grid_with_zero_boundaries() {
    let out = ltube(&[
        "field",
        "--lattice",
        "honeycomb",
        "-m",
        "17",
        "-n",
        "29",
        "--eta",
        "1",
        "--source",
        "9,15",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "p,q,class,symmetry,value");
    assert_eq!(
        lines.len(),
        1 + 18 * 31,
        "header plus one row per grid site"
    );
    for line in &lines[1..] {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 5, "row {line:?}");
        let q: i64 = cols[1].parse().unwrap();
        let value: f64 = cols[4].parse().unwrap();
        assert!(value >= 0.0);
        if q == 0 || q == 30 {
            assert_eq!(value, 0.0, "absorbing rows hold exact zeros: {line:?}");
            assert!(cols[2].starts_with("absorbing_"));
        } else {
            assert_eq!(cols[2], "interior");
        }
        assert!(cols[3] == "left_t" || cols[3] == "right_t");
    }
}

#[test]
fn absorb_csv_lists_both_ends_and_totals_that_sum_to_one() {
    let out = ltube(&[
        "absorb",
        "--lattice",
        "triangular",
        "-m",
        "5",
        "-n",
        "6",
        "--eta",
        "0.8",
        "--source",
        "2,2",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "p,end,value");
    // 6 columns × 2 ends + 2 total rows.
    assert_eq!(lines.len(), 1 + 12 + 2);
    let total_left: f64 = lines[13]
        .strip_prefix("total,left,")
        .unwrap()
        .parse()
        .unwrap();
    let total_right: f64 = lines[14]
        .strip_prefix("total,right,")
        .unwrap()
        .parse()
        .unwrap();
    assert!((total_left + total_right - 1.0).abs() < 1e-12);
    // Triangular split depends only on the rows: (n+1−b)/(n+1) and b/(n+1).
    assert!((total_left - 5.0 / 7.0).abs() < 1e-12);
    assert!((total_right - 2.0 / 7.0).abs() < 1e-12);
}

#[test]
fn profile_csv_has_one_row_per_interior_row() {
    let out = ltube(&[
        "profile",
        "--lattice",
        "square",
        "-m",
        "3",
        "-n",
        "4",
        "--eta",
        "1",
        "--source",
        "0,2",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "q,value");
    assert_eq!(lines.len(), 1 + 4);
    for (i, line) in lines[1..].iter().enumerate() {
        assert!(line.starts_with(&format!("{},", i + 1)));
    }
}

#[test]
fn sweep_csv_grid_hits_both_endpoints_exactly() {
    let out = ltube(&[
        "sweep",
        "--lattice",
        "square",
        "-m",
        "3",
        "-n",
        "4",
        "--eta",
        "1",
        "--source",
        "0,2",
        "--from",
        "0.1",
        "--to",
        "10",
        "--steps",
        "5",
        "--observable",
        "total_left",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "eta,value");
    assert_eq!(lines.len(), 1 + 5);
    let first: f64 = lines[1].split(',').next().unwrap().parse().unwrap();
    let last: f64 = lines[5].split(',').next().unwrap().parse().unwrap();
    assert_eq!(first, 0.1);
    assert_eq!(last, 10.0);
    // The square split does not depend on η at all.
    for line in &lines[1..] {
        let v: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!((v - 0.6).abs() < 1e-12);
    }
}

// --------------------------------------------------------------- json output

#[test]
fn json_reports_round_trip_through_the_crates_own_types() {
    let spec = [
        "--lattice",
        "honeycomb",
        "-m",
        "5",
        "-n",
        "6",
        "--eta",
        "2.5",
        "--source",
        "2,4",
    ];

    let mut args = vec!["field"];
    args.extend_from_slice(&spec);
    args.extend_from_slice(&["--format", "json"]);
    let text = stdout(&ltube(&args));
    let field: FieldReport = serde_json::from_str(&text).expect("field json parses");
    assert_eq!(field.command, "field");
    assert_eq!(field.spec.source, [2, 4]);
    assert_eq!(field.rows.len(), 6 * 8);
    assert_eq!(serde_json::to_string_pretty(&field).unwrap() + "\n", text);

    let mut args = vec!["absorb"];
    args.extend_from_slice(&spec);
    args.extend_from_slice(&["--format", "json"]);
    let text = stdout(&ltube(&args));
    let absorb: AbsorbReport = serde_json::from_str(&text).expect("absorb json parses");
    assert_eq!(absorb.left.len(), 6);
    assert!((absorb.total_left + absorb.total_right - 1.0).abs() < 1e-12);
    assert_eq!(serde_json::to_string_pretty(&absorb).unwrap() + "\n", text);

    let mut args = vec!["profile"];
    args.extend_from_slice(&spec);
    args.extend_from_slice(&["--format", "json", "--slope-analysis"]);
    let text = stdout(&ltube(&args));
    let profile: ProfileReport = serde_json::from_str(&text).expect("profile json parses");
    assert_eq!(profile.rows.len(), 6);
    assert!(profile.slope_analysis.is_some());
    assert_eq!(serde_json::to_string_pretty(&profile).unwrap() + "\n", text);

    let mut args = vec!["sweep"];
    args.extend_from_slice(&spec);
    args.extend_from_slice(&[
        "--format",
        "json",
        "--from",
        "0.5",
        "--to",
        "2",
        "--steps",
        "3",
        "--observable",
        "peak",
    ]);
    let text = stdout(&ltube(&args));
    let sweep: SweepReport = serde_json::from_str(&text).expect("sweep json parses");
    assert_eq!(sweep.observable, "peak");
    assert_eq!(sweep.rows.len(), 3);
    assert_eq!(serde_json::to_string_pretty(&sweep).unwrap() + "\n", text);
}

#[test]
fn field_json_row_sums_reproduce_the_profile_output() {
    let spec = [
        "--lattice",
        "square",
        "-m",
        "3",
        "-n",
        "4",
        "--eta",
        "1",
        "--source",
        "0,2",
    ];

    let mut args = vec!["field"];
    args.extend_from_slice(&spec);
    args.extend_from_slice(&["--format", "json"]);
    let field: FieldReport = serde_json::from_str(&stdout(&ltube(&args))).unwrap();

    let mut args = vec!["profile"];
    args.extend_from_slice(&spec);
    args.extend_from_slice(&["--format", "json"]);
    let profile: ProfileReport = serde_json::from_str(&stdout(&ltube(&args))).unwrap();

    for row in &profile.rows {
        let sum: f64 = field
            .rows
            .iter()
            .filter(|r| r.q == row.q)
            .map(|r| r.value)
            .sum();
        assert!(
            (sum - row.value).abs() < 1e-12,
            "q={}: field sum {sum} vs profile {}",
            row.q,
            row.value
        );
    }
}

// ----------------------------------------------- mirrored honeycomb sources

#[test]
fn mirrored_honeycomb_source_reports_in_user_coordinates() {
    // Source (0,1) on a 2×1 honeycomb tube sits on the ⊣ sublattice
    // (a+b odd): the walk leaves it downward with the axial weight, so the
    // left end must collect more than the right.
    let spec = [
        "--lattice",
        "honeycomb",
        "-m",
        "1",
        "-n",
        "1",
        "--eta",
        "1",
        "--source",
        "0,1",
    ];

    let mut args = vec!["field"];
    args.extend_from_slice(&spec);
    let text = stdout(&ltube(&args));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[1], "0,0,absorbing_left,left_t,0.0000000000000000e0");
    assert_eq!(lines[2], "0,1,interior,right_t,1.8000000000000000e0");
    assert_eq!(lines[5], "1,1,interior,left_t,1.2000000000000002e0");

    let mut args = vec!["absorb"];
    args.extend_from_slice(&spec);
    let text = stdout(&ltube(&args));
    assert!(text.contains("total,left,6.00000000000000e-1"));
    assert!(text.contains("total,right,4.00000000000000e-1"));
    // Only the ⊣ column can reach the left end, only the ⊢ column the right.
    assert!(text.contains("0,left,5.9999999999999998e-1"));
    assert!(text.contains("1,left,0.0000000000000000e0"));
    assert!(text.contains("0,right,0.0000000000000000e0"));
}

#[test]
fn mirrored_source_profile_is_the_reverse_of_its_mirror_image() {
    // With n = 28 the reflection q → 29−q flips the parity of p+q, so the
    // ⊣-source tube (9,14) and the ⊢-source tube (9,15) are exact mirror
    // images of each other and their profiles must be reverses. (With odd n
    // the reflection preserves parity and no such ⊢/⊣ pair exists.)
    let odd = ltube(&[
        "profile",
        "--lattice",
        "honeycomb",
        "-m",
        "17",
        "-n",
        "28",
        "--eta",
        "0.7",
        "--source",
        "9,14",
        "--format",
        "json",
    ]);
    let even = ltube(&[
        "profile",
        "--lattice",
        "honeycomb",
        "-m",
        "17",
        "-n",
        "28",
        "--eta",
        "0.7",
        "--source",
        "9,15",
        "--format",
        "json",
    ]);
    let odd: ProfileReport = serde_json::from_str(&stdout(&odd)).unwrap();
    let even: ProfileReport = serde_json::from_str(&stdout(&even)).unwrap();
    for (i, row) in odd.rows.iter().enumerate() {
        let mirrored = even.rows[even.rows.len() - 1 - i].value;
        assert_eq!(row.value, mirrored, "row q={}", row.q);
    }
}

// ------------------------------------------------ determinism and plumbing

#[test]
fn identical_invocations_are_byte_identical() {
    let args = [
        "compare",
        "--lattice",
        "honeycomb",
        "-m",
        "5",
        "-n",
        "4",
        "--eta",
        "1",
        "--source",
        "2,2",
        "--oracle",
        "mc",
        "--walks",
        "20000",
        "--seed",
        "42",
    ];
    let first = ltube(&args);
    let second = ltube(&args);
    assert_eq!(first.status.code(), second.status.code());
    assert_eq!(first.stdout, second.stdout);
    assert_eq!(first.stderr, second.stderr);
    assert!(
        !stdout(&first).contains('\x1b'),
        "piped output is colour-free"
    );
}

#[test]
fn output_file_matches_standard_output() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("field.csv");
    let spec = [
        "--lattice",
        "square",
        "-m",
        "4",
        "-n",
        "3",
        "--eta",
        "2",
        "--source",
        "1,2",
    ];

    let mut args = vec!["field"];
    args.extend_from_slice(&spec);
    let on_stdout = stdout(&ltube(&args));

    let path_str = path.to_str().unwrap();
    let mut args = vec!["field"];
    args.extend_from_slice(&spec);
    args.extend_from_slice(&["-o", path_str]);
    let out = ltube(&args);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    assert_eq!(std::fs::read_to_string(&path).unwrap(), on_stdout);
}

#[test]
fn unwritable_output_path_exits_2() {
    let out = ltube(&[
        "field",
        "--lattice",
        "square",
        "-m",
        "3",
        "-n",
        "4",
        "--eta",
        "1",
        "--source",
        "0,2",
        "-o",
        "/nonexistent-dir/field.csv",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).starts_with("IoFailure"));
}

#[test]
fn single_point_sweep_equals_the_single_run_value() {
    let spec = [
        "--lattice",
        "honeycomb",
        "-m",
        "5",
        "-n",
        "6",
        "--eta",
        "0.9",
        "--source",
        "2,4",
    ];

    let mut args = vec!["sweep"];
    args.extend_from_slice(&spec);
    args.extend_from_slice(&[
        "--from",
        "0.9",
        "--to",
        "0.9",
        "--steps",
        "1",
        "--observable",
        "total_left",
        "--format",
        "json",
    ]);
    let sweep: SweepReport = serde_json::from_str(&stdout(&ltube(&args))).unwrap();

    let mut args = vec!["absorb"];
    args.extend_from_slice(&spec);
    args.extend_from_slice(&["--format", "json"]);
    let absorb: AbsorbReport = serde_json::from_str(&stdout(&ltube(&args))).unwrap();

    assert_eq!(sweep.rows.len(), 1);
    assert_eq!(sweep.rows[0].eta, 0.9);
    assert_eq!(sweep.rows[0].value.to_bits(), absorb.total_left.to_bits());
}

#[test]
fn selftest_passes_and_reports_each_check() {
    let out = ltube(&["selftest"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(
        text.matches("PASS").count(),
        5,
        "four checks plus the overall verdict"
    );
    assert!(text.ends_with("overall: PASS\n"));
}

#[test]
fn compare_linear_flags_zero_mesh_agreement_on_triangular_tubes() {
    let out = ltube(&[
        "compare",
        "--lattice",
        "triangular",
        "-m",
        "5",
        "-n",
        "3",
        "--eta",
        "1",
        "--source",
        "2,2",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(
        text.contains("zero mesh: 15 sites, identical zeros in both: yes"),
        "{text}"
    );
    assert!(text.contains("verdict: PASS"));
}
