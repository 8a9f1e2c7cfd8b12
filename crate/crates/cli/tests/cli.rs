use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_jifadjust"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn fixture(dir: &Path, name: &str) -> (PathBuf, PathBuf) {
    let out = dir.join(name);
    let o = run(&["synth", "--fixture", name, "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    (out.join("citations.csv"), out.join("publications.csv"))
}

fn csv_table(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

const PUBS: &str = "journal,year,citeable_items\nA,2002,10\nA,2003,10\nA,2004,10\nB,2002,5\nB,2003,5\nB,2004,5\n";

const CITES: &str = "citing_journal,citing_year,cited_journal,cited_year,count
A,2004,A,2003,6
X,2004,A,2003,4
X,2004,A,2002,5
B,2004,B,2003,3
X,2004,B,2002,2
X,2004,B,2004,1
";

#[test]
fn empty_citations_give_header_only() {
    let dir = TempDir::new().unwrap();
    let c = write(dir.path(), "c.csv", "");
    let p = write(dir.path(), "p.csv", PUBS);
    let o = run(&[
        "report",
        "--citations",
        s(&c),
        "--publications",
        s(&p),
        "--year",
        "2004",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 1);
    let o = run(&[
        "report",
        "--citations",
        s(&c),
        "--publications",
        s(&p),
        "--year",
        "2004",
        "--format",
        "json",
    ]);
    assert_eq!(stdout(&o), "[]\n");
}

#[test]
fn corrupt_line_is_reported_with_location() {
    let dir = TempDir::new().unwrap();
    let mut text = String::from(CITES);
    text.push_str("X,2004,A,2003,oops\n");
    let c = write(dir.path(), "c.csv", &text);
    let p = write(dir.path(), "p.csv", PUBS);
    assert_eq!(text.lines().count(), 8);
    let mut lines: Vec<&str> = text.lines().collect();
    lines.swap(6, 7);
    let c7 = write(dir.path(), "c7.csv", &lines.join("\n"));
    for (path, line) in [(&c, 8), (&c7, 7)] {
        let o = run(&[
            "report",
            "--citations",
            s(path),
            "--publications",
            s(&p),
            "--year",
            "2004",
        ]);
        assert_eq!(o.status.code(), Some(2));
        let msg = stderr(&o);
        assert!(msg.contains(&format!("{}:{line}:", s(path))), "{msg}");
    }
}

#[test]
fn missing_denominator_keeps_the_row() {
    let dir = TempDir::new().unwrap();
    let c = write(dir.path(), "c.csv", CITES);
    let p = write(
        dir.path(),
        "p.csv",
        "journal,year,citeable_items\nA,2002,10\nA,2003,10\nA,2004,10\n",
    );
    let o = run(&[
        "report",
        "--citations",
        s(&c),
        "--publications",
        s(&p),
        "--year",
        "2004",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let rows = csv_table(&stdout(&o));
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[1][0], "A");
    assert_eq!(rows[1][2], "0.75");
    assert_eq!(rows[2][0], "B");
    assert_eq!(rows[2][2], "");
    assert_eq!(rows[2][8], "");
    assert!(rows[2][9].contains("MissingDenominator"));
    assert!(stderr(&o).contains("warning"));
}

#[test]
fn strip_self_never_raises_jif() {
    let dir = TempDir::new().unwrap();
    let c = write(dir.path(), "c.csv", CITES);
    let p = write(dir.path(), "p.csv", PUBS);
    let base = [
        "report",
        "--citations",
        s(&c),
        "--publications",
        s(&p),
        "--year",
        "2004",
    ];
    let plain = csv_table(&stdout(&run(&base)));
    let mut args = base.to_vec();
    args.push("--strip-self");
    let stripped = csv_table(&stdout(&run(&args)));
    assert_eq!(plain.len(), stripped.len());
    for (a, b) in plain.iter().zip(&stripped).skip(1) {
        let (a, b): (f64, f64) = (a[2].parse().unwrap(), b[2].parse().unwrap());
        assert!(b <= a);
    }
    assert_eq!(stripped[1][2], "0.45");
}

#[test]
fn csv_and_json_agree_field_by_field() {
    let dir = TempDir::new().unwrap();
    for name in ["hare", "tortoise"] {
        let (c, p) = fixture(dir.path(), name);
        let base = [
            "report",
            "--citations",
            s(&c),
            "--publications",
            s(&p),
            "--year",
            "2004",
        ];
        let csv = csv_table(&stdout(&run(&base)));
        let mut args = base.to_vec();
        args.extend(["--format", "json"]);
        let json: Value = serde_json::from_str(&stdout(&run(&args))).unwrap();
        let rows = json.as_array().unwrap();
        assert_eq!(rows.len(), csv.len() - 1);
        for (row, obj) in csv[1..].iter().zip(rows) {
            for (key, cell) in csv[0].iter().zip(row) {
                let v = &obj[key.as_str()];
                let text = match v {
                    Value::Null => String::new(),
                    Value::String(t) => t.clone(),
                    Value::Array(a) => a.iter().map(|x| x.as_str().unwrap()).collect::<Vec<_>>().join(";"),
                    other => other.to_string(),
                };
                assert_eq!(&text, cell, "{name} {key}");
            }
        }
    }
}

#[test]
fn tortoise_half_life_is_over_ten() {
    let dir = TempDir::new().unwrap();
    let (c, p) = fixture(dir.path(), "tortoise");
    let o = run(&[
        "report",
        "--citations",
        s(&c),
        "--publications",
        s(&p),
        "--year",
        "2004",
    ]);
    let rows = csv_table(&stdout(&o));
    assert_eq!(rows[1][5], ">10");
    assert_eq!(rows[1][10], "Tortoise");
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let (c, p) = fixture(dir.path(), "hare");
    let svg1 = dir.path().join("a.svg");
    let svg2 = dir.path().join("b.svg");
    let a = run(&["curves", "--citations", s(&c), "--journal", "Hare", "--svg", s(&svg1)]);
    let b = run(&["curves", "--citations", s(&c), "--journal", "Hare", "--svg", s(&svg2)]);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(std::fs::read(&svg1).unwrap(), std::fs::read(&svg2).unwrap());
    let r1 = run(&[
        "adjust",
        "--citations",
        s(&c),
        "--publications",
        s(&p),
        "--year",
        "2004",
    ]);
    let r2 = run(&[
        "adjust",
        "--citations",
        s(&c),
        "--publications",
        s(&p),
        "--year",
        "2004",
    ]);
    assert_eq!(r1.stdout, r2.stdout);

    let again = dir.path().join("again");
    run(&["synth", "--fixture", "hare", "--out", s(&again)]);
    assert_eq!(
        std::fs::read(&c).unwrap(),
        std::fs::read(again.join("citations.csv")).unwrap()
    );
}

#[test]
fn unknown_journal_exits_2() {
    let dir = TempDir::new().unwrap();
    let c = write(dir.path(), "c.csv", CITES);
    let o = run(&["curves", "--citations", s(&c), "--journal", "nope"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nope"));
}

#[test]
fn configuration_errors_exit_3() {
    let dir = TempDir::new().unwrap();
    let c = write(dir.path(), "c.csv", CITES);
    let p = write(dir.path(), "p.csv", PUBS);
    let cases: [&[&str]; 5] = [
        &["report", "--citations", s(&c), "--publications", s(&p)],
        &[
            "report",
            "--citations",
            s(&c),
            "--publications",
            s(&p),
            "--year",
            "2004",
            "--hare",
            "0.1",
        ],
        &[
            "report",
            "--citations",
            s(&c),
            "--publications",
            s(&p),
            "--year",
            "2004",
            "--window",
            "1,30",
        ],
        &[
            "report",
            "--citations",
            s(&c),
            "--publications",
            s(&p),
            "--year",
            "2004",
            "--quantile",
            "0",
        ],
        &[
            "report",
            "--citations",
            s(&c),
            "--publications",
            s(&p),
            "--year",
            "2004",
            "--format",
            "xml",
        ],
    ];
    for args in cases {
        assert_eq!(run(args).status.code(), Some(3), "{args:?}");
    }
    assert_eq!(
        run(&["synth", "--fixture", "lion", "--out", s(dir.path())])
            .status
            .code(),
        Some(3)
    );
}

#[test]
fn aliases_merge_journals() {
    let dir = TempDir::new().unwrap();
    let c = write(
        dir.path(),
        "c.csv",
        "citing_journal,citing_year,cited_journal,cited_year,count\nX,2004,Opt Mater,2003,4\nX,2004,OPT MATER-AMSTERDAM,2003,6\n",
    );
    let p = write(
        dir.path(),
        "p.csv",
        "journal,year,citeable_items\nOpt Mater,2003,10\nOpt Mater,2002,10\n",
    );
    let a = write(dir.path(), "a.csv", "alias,canonical\nOpt Mater-Amsterdam,Opt Mater\n");
    let o = run(&[
        "report",
        "--citations",
        s(&c),
        "--publications",
        s(&p),
        "--aliases",
        s(&a),
        "--year",
        "2004",
    ]);
    let rows = csv_table(&stdout(&o));
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1][0], "Opt Mater");
    assert_eq!(rows[1][2], "0.5");
}

#[test]
fn stripped_hare_volumes_fall_in_line() {
    let dir = TempDir::new().unwrap();
    let (c, _) = fixture(dir.path(), "hare");
    let args = [
        "curves",
        "--citations",
        s(&c),
        "--journal",
        "Hare",
        "--year",
        "2004",
        "--format",
        "json",
    ];
    let with_self: Value = serde_json::from_str(&stdout(&run(&args))).unwrap();
    let flagged = with_self["anomalies"].as_array().unwrap();
    assert!(flagged
        .iter()
        .any(|a| a["pub_year"] == 1993 && a["reason"] == "SelfCitationSpike"));

    let mut stripped_args = args.to_vec();
    stripped_args.push("--strip-self");
    let stripped: Value = serde_json::from_str(&stdout(&run(&stripped_args))).unwrap();
    assert_eq!(stripped["anomalies"], Value::Array(vec![]));
}

#[test]
fn single_volume_mean_is_that_volume() {
    let dir = TempDir::new().unwrap();
    let c = write(
        dir.path(),
        "c.csv",
        "citing_journal,citing_year,cited_journal,cited_year,count\nX,2000,S,2000,2\nX,2001,S,2000,5\nX,2002,S,2000,3\n",
    );
    let o = run(&["curves", "--citations", s(&c), "--journal", "S", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["mean"]["values"], v["volumes"][0]["raw"]);
    assert_eq!(v["mean"]["observations"], serde_json::json!([1, 1, 1]));
    assert_eq!(v["volumes"][0]["standardized"], serde_json::json!([20.0, 70.0, 100.0]));
}

#[test]
fn curves_csv_has_mean_rows_with_observations() {
    let dir = TempDir::new().unwrap();
    let (c, _) = fixture(dir.path(), "tortoise");
    let svg = dir.path().join("t.svg");
    let o = run(&[
        "curves",
        "--citations",
        s(&c),
        "--journal",
        "Tortoise",
        "--year",
        "2004",
        "--svg",
        s(&svg),
        "--chart",
        "raw",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = csv_table(&stdout(&o));
    assert_eq!(rows[0].join(","), "journal,pub_year,kind,age,value,observations");
    let mean: Vec<_> = rows.iter().filter(|r| r[2] == "mean").collect();
    assert_eq!(mean.len(), 25);
    assert_eq!(mean[0][5], "25");
    assert_eq!(mean[24][5], "1");
    let chart = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(chart.matches("<polyline").count(), 25);
}

#[test]
fn synth_spec_errors_name_the_line() {
    let dir = TempDir::new().unwrap();
    let spec = write(
        dir.path(),
        "bad.synth",
        "journal = Bad\npub_years = 1990-2000\nkernel = flat:10\nbase_citations = lots\n",
    );
    let o = run(&["synth", "--spec", s(&spec), "--out", s(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains(&format!("{}:4:", s(&spec))), "{}", stderr(&o));
}

#[test]
fn synth_from_spec_file_matches_fixture() {
    let dir = TempDir::new().unwrap();
    let spec = write(dir.path(), "hare.synth", jifadjust::synth::fixtures::HARE);
    let out = dir.path().join("from_file");
    let o = run(&["synth", "--spec", s(&spec), "--out", s(&out)]);
    assert!(o.status.success());
    let (c, _) = fixture(dir.path(), "hare");
    assert_eq!(
        std::fs::read(c).unwrap(),
        std::fs::read(out.join("citations.csv")).unwrap()
    );
}

#[test]
fn validate_summarizes_inputs() {
    let dir = TempDir::new().unwrap();
    let c = write(dir.path(), "c.csv", CITES);
    let p = write(dir.path(), "p.csv", PUBS);
    let o = run(&["validate", "--citations", s(&c), "--publications", s(&p)]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(
        text.contains("citations: 2 cited journals, 5 cells, 21 citations"),
        "{text}"
    );
    assert!(text.contains("publications: 6 journal-years"));
    let bad = write(dir.path(), "bad.csv", "journal,year,citeable_items\nA,2004,0\n");
    let o = run(&["validate", "--publications", s(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains(":2:"));
}

#[test]
fn adjust_ranks_reverse_for_slow_journals() {
    let dir = TempDir::new().unwrap();
    let (hc, hp) = fixture(dir.path(), "hare");
    let (tc, tp) = fixture(dir.path(), "tortoise");
    let mut cites = std::fs::read_to_string(&hc).unwrap();
    cites.push_str(std::fs::read_to_string(&tc).unwrap().split_once('\n').unwrap().1);
    let mut pubs = std::fs::read_to_string(&hp).unwrap();
    pubs.push_str(std::fs::read_to_string(&tp).unwrap().split_once('\n').unwrap().1);
    let c = write(dir.path(), "c.csv", &cites);
    let p = write(dir.path(), "p.csv", &pubs);
    let o = run(&[
        "adjust",
        "--citations",
        s(&c),
        "--publications",
        s(&p),
        "--year",
        "2004",
        "--decimals",
        "1",
    ]);
    let rows = csv_table(&stdout(&o));
    assert_eq!(rows[1][..8], ["Hare", "2004", "0.2", "0.4", "1.3", "0.3", "2", "2"]);
    assert_eq!(
        rows[2][..8],
        ["Tortoise", "2004", "1.3", "0.1", "7.7", "10.0", "1", "1"]
    );
}
