use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hippo_core::store::{CanonicalTokenizer, Tokenizer};
use serde_json::json;

fn hippo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hippo"))
        .args(args)
        .env_remove("HIPPO_EXTRACTOR_URL")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const TURNS: [(&str, &str, &str); 5] = [
    ("s1", "melanie", "I painted a sunrise over the lake last week."),
    ("s1", "caroline", "That sounds lovely! Which colours did you use?"),
    ("s1", "melanie", "Mostly orange, with some purple near the hills."),
    ("s2", "caroline", "zebra17"),
    ("s2", "melanie", "My kids loved the camping trip, even the rain."),
];

fn write_transcript(dir: &Path, name: &str, turns: &[(&str, &str, &str)]) -> PathBuf {
    let mut sessions: Vec<serde_json::Value> = Vec::new();
    for &(sid, speaker, text) in turns {
        if sessions.last().is_none_or(|s| s["session_id"] != sid) {
            let hour = sessions.len() + 9;
            sessions.push(json!({
                "session_id": sid,
                "timestamp": format!("2024-05-01T{hour:02}:00:00Z"),
                "turns": [],
            }));
        }
        let last = sessions.last_mut().unwrap();
        last["turns"].as_array_mut().unwrap().push(json!({"speaker": speaker, "text": text}));
    }
    let path = dir.join(name);
    fs::write(&path, json!({ "sessions": sessions }).to_string()).unwrap();
    path
}

fn ingested_store(dir: &Path) -> PathBuf {
    let store = dir.join("mem.hippo");
    let t = write_transcript(dir, "t.json", &TURNS);
    let o = hippo(&["ingest", p(&store), p(&t)]);
    assert!(o.status.success(), "{}", stderr(&o));
    store
}

#[test]
fn ingest_reports_counts_and_appends() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("mem.hippo");
    let t = write_transcript(dir.path(), "t.json", &TURNS);
    let tokens: usize = TURNS.iter().map(|t| CanonicalTokenizer.tokenize(t.2).len()).sum();

    let o = hippo(&["ingest", p(&store), p(&t)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with(&format!("5 entries, {tokens} tokens")), "{}", stdout(&o));

    let o = hippo(&["ingest", p(&store), p(&t)]);
    assert!(stdout(&o).starts_with(&format!("5 entries, {tokens} tokens")));
    let o = hippo(&["stats", p(&store)]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("entries              10\n"), "{}", stdout(&o));
    assert!(stdout(&o).contains(&format!("tokens               {}\n", 2 * tokens)));
}

#[test]
fn empty_transcript_makes_a_valid_store() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("mem.hippo");
    let t = write_transcript(dir.path(), "t.json", &[]);
    let o = hippo(&["ingest", p(&store), p(&t)]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("0 entries, 0 tokens"));
    let o = hippo(&["stats", p(&store)]);
    assert!(stdout(&o).contains("entries              0\n"));
}

#[test]
fn bad_transcripts_name_the_problem() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("mem.hippo");
    let t = dir.path().join("bad.json");
    fs::write(&t, "{\"sessions\": [\n {\"session_id\": \"a\",\n  \"timestamp\": 5}]}").unwrap();
    let o = hippo(&["ingest", p(&store), p(&t)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
    assert!(!store.exists());
}

#[test]
fn overflow_aborts_without_saving() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("mem.hippo");
    let t = write_transcript(dir.path(), "t.json", &TURNS);
    let o = hippo(&["ingest", p(&store), p(&t), "--sigma", "12"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("vocabulary overflow") && err.contains("entries ingested"), "{err}");
    assert!(!store.exists());

    let before = {
        ingested_store(dir.path());
        fs::read(&store).unwrap()
    };
    let o = hippo(&["ingest", p(&store), p(&t), "--bits", "16"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--bits 32"));
    assert_eq!(fs::read(&store).unwrap(), before);
}

#[test]
fn query_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let store = ingested_store(dir.path());

    let o = hippo(&["query", p(&store), "zebra17", "--radius", "0"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().filter(|l| l.starts_with('#')).count(), 1, "{out}");
    assert!(out.contains("entry 3 | caroline"));
    assert!(out.contains("tokens consumed: 1"));

    let o = hippo(&["query", p(&store), "Which is it, the or a?"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no keywords extracted"));

    let o = hippo(&["query", p(&store), "quasar nebula", "--radius", "0"]);
    assert_eq!(o.status.code(), Some(1));

    let o = hippo(&["query", p(&store), "sunrise lake orange kids rain", "--radius", "32", "--topk", "1", "--tau", "0.2"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with('#')).count(), 1);

    let o = hippo(&["query", p(&store), "zebra17", "--radius", "0", "--budget", "10"]);
    assert!(stdout(&o).contains("context: 1 entries, 1 tokens"));
    assert!(stdout(&o).contains("[caroline | 2024-05-01T10:00:00.000000Z | s2]"));

    let o = hippo(&["query", p(&dir.path().join("missing")), "zebra17"]);
    assert_eq!(o.status.code(), Some(2));

    let o = hippo(&["query", p(&store), "zebra17", "--extractor", "external"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("HIPPO_EXTRACTOR_URL"));
}

#[test]
fn corrupt_store_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let store = ingested_store(dir.path());
    let mut bytes = fs::read(&store).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    fs::write(&store, bytes).unwrap();
    let o = hippo(&["query", p(&store), "zebra17"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("checksum"), "{}", stderr(&o));
}

#[test]
fn verify_passes_on_fresh_store() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("mem.hippo");
    let turns: Vec<(String, String, String)> = (0..200)
        .map(|k| {
            let words: Vec<String> = (0..1 + k % 9).map(|j| format!("w{}", (k * 7 + j * 3) % 50)).collect();
            (format!("s{}", k / 20), format!("p{}", k % 2), words.join(" "))
        })
        .collect();
    let refs: Vec<(&str, &str, &str)> = turns.iter().map(|(a, b, c)| (a.as_str(), b.as_str(), c.as_str())).collect();
    let t = write_transcript(dir.path(), "t.json", &refs);
    assert!(hippo(&["ingest", p(&store), p(&t)]).status.success());

    let o = hippo(&["verify", p(&store), "--samples", "1000"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("PASS")).count(), 3);

    let o = hippo(&["verify", p(&store), "--samples", "0"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("0 probes"));
}

#[test]
fn bench_writes_consistent_reports() {
    let dir = tempfile::tempdir().unwrap();
    let store = ingested_store(dir.path());
    let queries: Vec<String> = (0..50).map(|k| format!("sunrise painted {k} camping")).collect();
    let qfile = dir.path().join("q.txt");
    fs::write(&qfile, queries.join("\n")).unwrap();
    let report = dir.path().join("report.tsv");

    let o = hippo(&["bench", p(&store), p(&qfile), "--report", p(&report), "--threads", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("queries              50"));
    let tsv = fs::read_to_string(&report).unwrap();
    let rows: Vec<Vec<&str>> = tsv.lines().skip(1).map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows.len(), 50);
    let mut search = 0.0;
    let mut total = 0.0;
    for (k, row) in rows.iter().enumerate() {
        assert_eq!(row[0], k.to_string());
        search += row[2].parse::<f64>().unwrap();
        total += row[4].parse::<f64>().unwrap();
    }
    assert!(search <= total);
    let tokens: f64 = rows.iter().map(|r| r[5].parse::<f64>().unwrap()).sum::<f64>() / 50.0;
    assert!(stdout(&o).contains(&format!("avg token consumption {tokens:.1}")));

    let empty = dir.path().join("empty.txt");
    fs::write(&empty, "").unwrap();
    let o = hippo(&["bench", p(&store), p(&empty)]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("queries              0"));
}
