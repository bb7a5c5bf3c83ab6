use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use statefuzz::targets::leaky::valid_session;

const BIN: &str = env!("CARGO_BIN_EXE_statefuzz");

fn statefuzz(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("STATEFUZZ_SEED_DIR")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn witness(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("testdata/witnesses").join(name)
}

fn s(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn files_in(dir: &Path) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    files
}

#[test]
fn fuzz_is_reproducible_byte_for_byte() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let args = ["fuzz", "--target", "mini_http2", "--max-execs", "20000", "--rng", "1", "--stats-interval", "1000"];
    let out_a = statefuzz(&[&args[..], &["-o", s(&a)]].concat());
    let out_b = statefuzz(&[&args[..], &["-o", s(&b)]].concat());
    assert_eq!(code(&out_a), code(&out_b));
    assert!(matches!(code(&out_a), 0 | 10));
    for name in ["stats.csv", "stt.json", "stt.dot", "report.json"] {
        assert_eq!(read(&a.join(name)), read(&b.join(name)), "{name}");
    }
    if code(&out_a) == 10 {
        assert_eq!(read(&a.join("crash/input.bin")), read(&b.join("crash/input.bin")));
    }
    let stats = String::from_utf8(read(&a.join("stats.csv"))).unwrap();
    assert!(stats.starts_with("elapsed,executions,features,stt_nodes,transition_coverage,corpus_size,crashes\n"));
}

#[test]
fn configuration_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let o = tmp.path().join("out");
    for args in [
        vec!["fuzz", "--target", "nope", "-o", s(&o)],
        vec!["fuzz", "--target", "mini_http2", "--variant", "turbo", "-o", s(&o)],
        vec!["fuzz", "--target", "mini_http2", "--stats-interval", "0", "-o", s(&o)],
        vec!["fuzz", "--bogus-flag"],
        vec!["replay", "--target", "mini_http2", "/does/not/exist"],
    ] {
        let out = statefuzz(&args);
        assert_eq!(code(&out), 2, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn output_directory_must_be_fresh_unless_appending() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("keep.txt"), "x").unwrap();
    let base = ["fuzz", "--target", "stateless_parser", "--max-execs", "100", "-o", s(tmp.path())];
    assert_eq!(code(&statefuzz(&base)), 2);
    assert!(matches!(code(&statefuzz(&[&base[..], &["--append"]].concat())), 0 | 10));
    assert!(tmp.path().join("stats.csv").exists());
    assert!(tmp.path().join("keep.txt").exists());
}

#[test]
fn leak_is_unreachable_with_reset() {
    let tmp = tempfile::tempdir().unwrap();
    let out = statefuzz(&[
        "fuzz", "--target", "leaky_parser", "--variant", "baseline", "--max-execs", "5000", "-o",
        s(&tmp.path().join("o")),
    ]);
    assert_eq!(code(&out), 0);
}

#[test]
fn leak_is_found_without_reset() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("o");
    let out = statefuzz(&[
        "fuzz", "--target", "leaky_parser", "--max-execs", "20000", "--no-implicit-reset", "-o", s(&dir),
    ]);
    assert_eq!(code(&out), 10);
    let history = files_in(&dir.join("crash/history"));
    assert_eq!(read(history.last().unwrap()), read(&dir.join("crash/input.bin")));
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Executions at the first stats row that records a crash.
fn crash_row(stats: &str) -> Option<u64> {
    stats.lines().skip(1).find_map(|line| {
        let cols: Vec<&str> = line.split(',').collect();
        (cols[6] != "0").then(|| cols[1].parse().unwrap())
    })
}

fn last_row(stats: &str) -> Vec<String> {
    stats.lines().last().unwrap().split(',').map(str::to_owned).collect()
}

#[test]
fn summary_medians_match_per_trial_stats() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("o");
    let out = statefuzz(&[
        "fuzz", "--target", "mini_http2", "--variant", "baseline", "--trials", "5", "--max-execs", "8000", "--rng",
        "3", "--stats-interval", "500", "-o", s(&dir),
    ]);
    assert!(matches!(code(&out), 0 | 10));

    let mut to_crash = Vec::new();
    let mut coverage = Vec::new();
    let mut executions = Vec::new();
    for trial in 0..5 {
        let stats = String::from_utf8(read(&dir.join(format!("trial-{trial:03}/stats.csv")))).unwrap();
        to_crash.push(crash_row(&stats).map_or(f64::INFINITY, |e| e as f64));
        let last = last_row(&stats);
        executions.push(last[1].parse::<f64>().unwrap());
        coverage.push(last[4].parse::<f64>().unwrap());
    }

    let summary = String::from_utf8(read(&dir.join("summary.csv"))).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines.len(), 7);
    let cols: Vec<&str> = lines[6].split(',').collect();
    assert_eq!(cols[0], "median");
    let parse = |v: &str| if v == "inf" { f64::INFINITY } else { v.parse::<f64>().unwrap() };
    assert_eq!(parse(cols[2]), median(&to_crash));
    assert_eq!(parse(cols[4]), median(&executions));
    assert_eq!(parse(cols[7]), median(&coverage));

    for (trial, line) in lines[1..6].iter().enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(parse(cols[2]), to_crash[trial], "trial {trial}");
    }
}

#[test]
fn seed_dir_env_overrides_corpus() {
    let tmp = tempfile::tempdir().unwrap();
    let seeds = tmp.path().join("seeds");
    std::fs::create_dir(&seeds).unwrap();
    std::fs::write(seeds.join("magic"), b"FUZ!").unwrap();
    let out = Command::new(BIN)
        .args(["fuzz", "--target", "stateless_parser", "--max-execs", "10", "-o"])
        .arg(tmp.path().join("o"))
        .env("STATEFUZZ_SEED_DIR", &seeds)
        .output()
        .unwrap();
    assert_eq!(code(&out), 10);
    let report = String::from_utf8(read(&tmp.path().join("o/report.json"))).unwrap();
    assert!(report.contains("\"executions\": 1,"), "{report}");
}

#[test]
fn replay_witnesses() {
    let out = statefuzz(&["replay", "--target", "mini_http2", s(&witness("mini_http2.bin"))]);
    assert_eq!(code(&out), 10);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("crash(h2-order)"), "{stdout}");
    assert!(stdout.contains("stream->state=2"), "{stdout}");

    let tmp = tempfile::tempdir().unwrap();
    let empty = tmp.path().join("empty.bin");
    std::fs::write(&empty, b"").unwrap();
    assert_eq!(code(&statefuzz(&["replay", "--target", "mini_http2", s(&empty)])), 0);

    let leak = witness("leaky_parser");
    assert_eq!(code(&statefuzz(&["replay", "--target", "leaky_parser", s(&leak)])), 0);
    assert_eq!(code(&statefuzz(&["replay", "--target", "leaky_parser", "--implicit", s(&leak)])), 10);
}

fn write_history(dir: &Path, inputs: &[Vec<u8>]) {
    std::fs::create_dir_all(dir).unwrap();
    for (i, input) in inputs.iter().enumerate() {
        std::fs::write(dir.join(format!("{i:06}.bin")), input).unwrap();
    }
}

#[test]
fn minimize_leak_history_to_threshold() {
    let tmp = tempfile::tempdir().unwrap();
    let history_dir = tmp.path().join("history");
    // 68 malformed inputs interleaved with 32 sessions; the last input is
    // the 32nd session.
    let mut history = Vec::new();
    let mut valid = 0;
    for i in 0..100 {
        if valid < 32 && (i % 3 == 2 || 100 - i == 32 - valid) {
            history.push(valid_session(&[b'a' + (i % 26) as u8]));
            valid += 1;
        } else {
            history.push(vec![0xff, i as u8]);
        }
    }
    assert_eq!(valid, 32);
    write_history(&history_dir, &history);

    let out = statefuzz(&["minimize", "--target", "leaky_parser", s(&history_dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8(out.stdout).unwrap().contains("100 -> 32"));
    let min_dir = tmp.path().join("history.min");
    let minimized: Vec<Vec<u8>> = files_in(&min_dir).iter().map(|p| read(p)).collect();
    assert_eq!(minimized.len(), 32);
    assert!(minimized.iter().all(|m| m[0] == 1));

    // Minimizing the result changes nothing.
    let again = tmp.path().join("again");
    let out = statefuzz(&["minimize", "--target", "leaky_parser", s(&min_dir), "-o", s(&again)]);
    assert_eq!(code(&out), 0);
    let twice: Vec<Vec<u8>> = files_in(&again).iter().map(|p| read(p)).collect();
    assert_eq!(twice, minimized);
}

#[test]
fn minimize_without_crash_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let history_dir = tmp.path().join("history");
    write_history(&history_dir, &vec![valid_session(b"x"); 5]);
    let out = statefuzz(&["minimize", "--target", "leaky_parser", s(&history_dir)]);
    assert_eq!(code(&out), 3);
}

#[test]
fn svscan_then_instrument() {
    let tmp = tempfile::tempdir().unwrap();
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("testdata/instrument/server.c");
    let manifest = tmp.path().join("manifest.txt");
    let out = statefuzz(&["svscan", s(&fixture), "-o", s(&manifest)]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8(read(&manifest)).unwrap().contains("c->state\tconn_state_t"));

    let instrumented = tmp.path().join("server.c");
    let header = tmp.path().join("statefuzz_stt.h");
    let out = statefuzz(&[
        "instrument",
        s(&fixture),
        "--manifest",
        s(&manifest),
        "-o",
        s(&instrumented),
        "--header",
        s(&header),
    ]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(read(&instrumented)).unwrap();
    assert_eq!(text.matches("__stt_update(").count(), 5);
    assert_eq!(String::from_utf8(out.stderr).unwrap().matches("CONFLICT").count(), 2);
    assert!(header.exists());
}
