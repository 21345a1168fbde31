mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::*;

fn kpqa(args: &[&str], paths: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_kpqa"));
    cmd.args(args);
    for (flag, p) in paths {
        cmd.arg(flag).arg(p);
    }
    cmd.env("RUST_LOG", "warn").output().unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn sample_line(id: &str, question: &str, reference: &str, candidate: &str, model: Option<&str>) -> String {
    let model = model.map(|m| format!(",\"model\":{}", json_str(m))).unwrap_or_default();
    format!(
        "{{\"id\":{},\"question\":{},\"reference\":{},\"candidate\":{}{model}}}\n",
        json_str(id),
        json_str(question),
        json_str(reference),
        json_str(candidate)
    )
}

/// Column `col` of CSV rows whose first two fields are `id,metric`.
fn cell(csv: &str, id: &str, metric: &str, col: usize) -> String {
    csv.lines()
        .map(|l| l.split(',').collect::<Vec<_>>())
        .find(|f| f[0] == id && f[1] == metric)
        .unwrap_or_else(|| panic!("no row {id}/{metric} in\n{csv}"))[col]
        .to_owned()
}

#[test]
fn figure1_pair_scores() {
    let fx = Fixture::new();
    let s = fx.write("s.jsonl", &sample_line("fig1", "How many steps?", REFERENCE, GENERATED, None));
    let out = stdout(&kpqa(&["score", "--metrics", "bleu-1,rouge-l"], &[("--samples", &s)]));
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("id,metric,score,raw_score,precision,recall,flags"));
    assert_eq!(cell(&out, "fig1", "bleu-1", 2), "0.777778");
    let rouge: f64 = cell(&out, "fig1", "rouge-l", 2).parse().unwrap();
    assert!((rouge - 0.713).abs() <= 0.001, "{rouge}");
    assert_eq!(cell(&out, "fig1", "rouge-l", 4), "0.666667");
    assert_eq!(cell(&out, "fig1", "rouge-l", 5), "0.750000");
}

#[test]
fn beta_one_gives_plain_harmonic_mean() {
    let fx = Fixture::new();
    let s = fx.write("s.jsonl", &sample_line("fig1", "q", REFERENCE, GENERATED, None));
    let out = stdout(&kpqa(&["score", "--metrics", "rouge-l", "--beta", "1"], &[("--samples", &s)]));
    assert_eq!(cell(&out, "fig1", "rouge-l", 2), "0.705882");
}

#[test]
fn jsonl_output_to_file() {
    let fx = Fixture::new();
    let s = fx.write("s.jsonl", &sample_line("fig1", "q", REFERENCE, GENERATED, None));
    let o = fx.path("out.jsonl");
    let run = kpqa(&["score", "--format", "jsonl", "--metrics", "bleu-1"], &[("--samples", &s), ("--out", &o)]);
    assert!(stdout(&run).is_empty());
    let body = std::fs::read_to_string(&o).unwrap();
    let v: serde_json::Value = serde_json::from_str(body.lines().next().unwrap()).unwrap();
    assert_eq!(v["metric"], "bleu-1");
    assert!((v["score"].as_f64().unwrap() - 7.0 / 9.0).abs() < 1e-6);
    assert!(v["precision"].is_null());
}

#[test]
fn empty_samples_file_is_an_input_error() {
    let fx = Fixture::new();
    let s = fx.write("s.jsonl", "\n");
    let run = kpqa(&["score"], &[("--samples", &s)]);
    assert_eq!(run.status.code(), Some(1));
    assert!(stderr(&run).contains("no samples"), "{}", stderr(&run));
}

#[test]
fn malformed_input_and_bad_flags_exit_one() {
    let fx = Fixture::new();
    let s = fx.write("s.jsonl", "{\"id\": \"a\"}\n");
    let run = kpqa(&["score"], &[("--samples", &s)]);
    assert_eq!(run.status.code(), Some(1));
    assert!(stderr(&run).contains("line 1"), "{}", stderr(&run));

    assert_eq!(kpqa(&["score", "--no-such-flag"], &[]).status.code(), Some(1));
    assert_eq!(kpqa(&["score", "--metrics", "bleu-7"], &[("--samples", &s)]).status.code(), Some(1));
    let missing = fx.path("absent.jsonl");
    assert_eq!(kpqa(&["score"], &[("--samples", &missing)]).status.code(), Some(1));
}

#[test]
fn keyphrase_metric_without_weights_file_is_rejected() {
    let fx = Fixture::new();
    let s = fx.write("s.jsonl", &sample_line("a", "q", "x y", "x y", None));
    let run = kpqa(&["score", "--metrics", "bleu-1-kpqa"], &[("--samples", &s)]);
    assert_eq!(run.status.code(), Some(1));
    assert!(stderr(&run).contains("--weights"), "{}", stderr(&run));
}

#[test]
fn kpw_file_missing_an_id_names_it() {
    let fx = Fixture::new();
    let mut samples = sample_line("s1", "q", "paris", "paris", None);
    samples += &sample_line("s2", "q", "london", "london", None);
    let s = fx.write("s.jsonl", &samples);
    let w = fx.write(
        "w.jsonl",
        "{\"id\":\"s1\",\"side\":\"candidate\",\"tokens\":[\"paris\"],\"weights\":[0.9]}\n\
         {\"id\":\"s1\",\"side\":\"reference\",\"tokens\":[\"paris\"],\"weights\":[0.9]}\n",
    );
    let run = kpqa(&["score", "--metrics", "bleu-1-kpqa"], &[("--samples", &s), ("--weights", &w)]);
    assert_eq!(run.status.code(), Some(1));
    assert!(stderr(&run).contains("s2"), "{}", stderr(&run));
}

#[test]
fn keyphrase_scores_from_weight_file() {
    let fx = Fixture::new();
    let s = fx.write(
        "s.jsonl",
        &sample_line("a", "What is the capital of France?", "Paris.", "Paris is the capital", None),
    );
    let w = fx.write(
        "w.jsonl",
        "{\"id\":\"a\",\"side\":\"candidate\",\"tokens\":[\"paris\",\"is\",\"the\",\"capital\"],\"weights\":[0.9,0.1,0.1,0.5]}\n\
         {\"id\":\"a\",\"side\":\"reference\",\"tokens\":[\"paris\"],\"weights\":[0.95]}\n",
    );
    let out = stdout(&kpqa(
        &["score", "--metrics", "bleu-1,bleu-1-kpqa,rouge-l-kpqa,bleu-1-kpqa@uniform"],
        &[("--samples", &s), ("--weights", &w)],
    ));
    assert_eq!(cell(&out, "a", "bleu-1", 2), "0.250000");
    // 0.9 / (0.9 + 0.1 + 0.1 + 0.5)
    assert_eq!(cell(&out, "a", "bleu-1-kpqa", 2), "0.562500");
    assert_eq!(cell(&out, "a", "bleu-1-kpqa@uniform", 2), "0.250000");
    assert_eq!(cell(&out, "a", "rouge-l-kpqa", 4), "0.562500");
    assert_eq!(cell(&out, "a", "rouge-l-kpqa", 5), "1.000000");
}

#[test]
fn all_zero_weights_fall_back_to_uniform_and_flag_it() {
    let fx = Fixture::new();
    let s = fx.write("s.jsonl", &sample_line("a", "q", "x", "x y", None));
    let w = fx.write(
        "w.jsonl",
        "{\"id\":\"a\",\"side\":\"candidate\",\"tokens\":[\"x\",\"y\"],\"weights\":[0,0]}\n\
         {\"id\":\"a\",\"side\":\"reference\",\"tokens\":[\"x\"],\"weights\":[0.5]}\n",
    );
    let out = stdout(&kpqa(&["score", "--metrics", "bleu-1-kpqa"], &[("--samples", &s), ("--weights", &w)]));
    assert_eq!(cell(&out, "a", "bleu-1-kpqa", 2), "0.500000");
    assert_eq!(cell(&out, "a", "bleu-1-kpqa", 6), "candidate_uniform_fallback");
}

#[test]
fn embeddings_file_drives_bertscore() {
    let fx = Fixture::new();
    let s = fx.write("s.jsonl", &sample_line("a", "q", "red car", "red car", None));
    let line = |side: &str| {
        format!(
            "{{\"id\":\"a\",\"side\":\"{side}\",\"tokens\":[\"red\",\"car\"],\"dim\":3,\"vectors\":[[3,0,0],[0,0,2]]}}\n"
        )
    };
    let e = fx.write("e.jsonl", &(line("candidate") + &line("reference")));
    let out = stdout(&kpqa(
        &["score", "--metrics", "bertscore,bertscore@uniform"],
        &[("--samples", &s), ("--embeddings", &e)],
    ));
    assert_eq!(cell(&out, "a", "bertscore", 2), "1.000000");
    assert_eq!(cell(&out, "a", "bertscore@uniform", 2), "1.000000");

    let bad = fx.write(
        "bad.jsonl",
        "{\"id\":\"a\",\"side\":\"candidate\",\"tokens\":[\"red\",\"car\"],\"dim\":3,\"vectors\":[[0,0,0],[0,0,2]]}\n",
    );
    let run = kpqa(&["score", "--metrics", "bertscore"], &[("--samples", &s), ("--embeddings", &bad)]);
    assert_eq!(run.status.code(), Some(1));
    assert!(stderr(&run).contains("zero-norm"), "{}", stderr(&run));
}

#[test]
fn idf_build_writes_document_frequencies() {
    let fx = Fixture::new();
    let mut samples = sample_line("a", "q", "the cat sat", "x", None);
    samples += &sample_line("b", "q", "the dog, the dog", "x", None);
    let s = fx.write("s.jsonl", &samples);
    let out = stdout(&kpqa(&["idf-build"], &[("--samples", &s)]));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["doc_count"], 2);
    assert_eq!(v["df"]["the"], 2);
    assert_eq!(v["df"]["dog"], 1);
    assert_eq!(v["df"]["cat"], 1);

    // the table is accepted back by `score --idf`
    let idf = fx.write("idf.json", &out);
    let scored = kpqa(&["score", "--metrics", "bleu-1"], &[("--samples", &s), ("--idf", &idf)]);
    assert!(scored.status.success());
}

fn judgments(rows: &[(&str, &[u8])]) -> String {
    rows.iter()
        .map(|(id, r)| {
            let ratings: Vec<String> = r.iter().map(|x| x.to_string()).collect();
            format!("{{\"id\":{},\"ratings\":[{}]}}\n", json_str(id), ratings.join(","))
        })
        .collect()
}

/// Samples with ids `s00..`, each rated by three annotators with the same value.
fn rated_corpus(fx: &Fixture, n: usize) -> (Vec<String>, Vec<f64>) {
    let mut r = rng(5);
    let mut samples = String::new();
    let mut judged = Vec::new();
    let mut human = Vec::new();
    for i in 0..n {
        let id = format!("s{i:02}");
        let rating: u8 = 1 + (rand::RngExt::random_range(&mut r, 0..5u8));
        samples += &sample_line(&id, "q", "a b", "a", None);
        human.push((rating as f64 - 1.0) / 4.0);
        judged.push((id, rating));
    }
    fx.write("s.jsonl", &samples);
    let rows: Vec<(&str, [u8; 3])> = judged.iter().map(|(id, x)| (id.as_str(), [*x; 3])).collect();
    let rows: Vec<(&str, &[u8])> = rows.iter().map(|(id, x)| (*id, &x[..])).collect();
    fx.write("j.jsonl", &judgments(&rows));
    (judged.into_iter().map(|(id, _)| id).collect(), human)
}

fn score_csv(ids: &[String], scores: &[f64]) -> String {
    let mut out = String::from("id,metric,score\n");
    for (id, s) in ids.iter().zip(scores) {
        out += &format!("{id},oracle,{s}\n");
    }
    out
}

#[test]
fn meta_eval_identity_and_shuffled_scores() {
    let fx = Fixture::new();
    let (ids, human) = rated_corpus(&fx, 40);
    let paths = |sc: &Path| {
        kpqa(
            &["meta-eval"],
            &[("--samples", &fx.path("s.jsonl")), ("--judgments", &fx.path("j.jsonl")), ("--scores", sc)],
        )
    };
    let sc = fx.write("identity.csv", &score_csv(&ids, &human));
    let out = stdout(&paths(&sc));
    assert_eq!(out.lines().next(), Some("group,metric,pearson,p_value,spearman,n"));
    let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[..2], ["all", "oracle"]);
    assert_eq!(row[2], "1.000000");
    assert_eq!(row[3], "0.000000");
    assert_eq!(row[4], "1.000000");
    assert_eq!(row[5], "40");

    let mut total = 0.0;
    for seed in 0..20 {
        let sc = fx.write("shuffled.csv", &score_csv(&ids, &shuffled(&human, seed)));
        let out = stdout(&paths(&sc));
        let r: f64 = out.lines().nth(1).unwrap().split(',').nth(2).unwrap().parse().unwrap();
        total += r.abs();
    }
    assert!(total / 20.0 < 0.25, "mean |r| = {}", total / 20.0);
}

#[test]
fn meta_eval_requires_every_judgment() {
    let fx = Fixture::new();
    let (ids, human) = rated_corpus(&fx, 5);
    let sc = fx.write("sc.csv", &score_csv(&ids, &human));
    let j = fx.write("j2.jsonl", &judgments(&[("s00", &[1, 2]), ("s01", &[3])]));
    let run = kpqa(&["meta-eval"], &[("--samples", &fx.path("s.jsonl")), ("--judgments", &j), ("--scores", &sc)]);
    assert_eq!(run.status.code(), Some(1));
    let err = stderr(&run);
    assert!(err.contains("s02") && err.contains("s04"), "{err}");
}

#[test]
fn meta_eval_by_group_on_synthetic_corpus() {
    let fx = Fixture::new();
    fx.write_corpus(&synthetic_corpus(60, 3));
    let out = stdout(&kpqa(
        &["meta-eval", "--metrics", "bleu-1,bleu-1-kpqa", "--group-by", "question-type"],
        &[
            ("--samples", &fx.path("samples.jsonl")),
            ("--weights", &fx.path("weights.jsonl")),
            ("--judgments", &fx.path("judgments.jsonl")),
        ],
    ));
    let groups: Vec<&str> = out.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(groups.len(), 12);
    assert!(groups.contains(&"NUMERIC") && groups.contains(&"all"));
    for line in out.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let n: usize = f[5].parse().unwrap();
        assert_eq!(n, if f[0] == "all" { 60 } else { 12 });
    }
}

/// Two models answering the same questions; human means from `ha`/`hb`.
fn rank_fixture(fx: &Fixture, ha: &[u8], hb: &[u8], ma: &[f64], mb: &[f64]) {
    let mut samples = String::new();
    let mut j = String::new();
    let mut scores = String::from("id,metric,score\n");
    for i in 0..ha.len() {
        for (tag, h, m) in [("a", ha[i], ma[i]), ("b", hb[i], mb[i])] {
            let id = format!("{tag}{i}");
            samples += &sample_line(&id, &format!("question {i}"), "x", "x", Some(tag));
            j += &judgments(&[(&id, &[h, h])]);
            scores += &format!("{id},m,{m}\n");
        }
    }
    fx.write("s.jsonl", &samples);
    fx.write("j.jsonl", &j);
    fx.write("sc.csv", &scores);
}

fn rank_pair(fx: &Fixture) -> Output {
    kpqa(
        &["rank-pair"],
        &[
            ("--samples", &fx.path("s.jsonl")),
            ("--judgments", &fx.path("j.jsonl")),
            ("--scores", &fx.path("sc.csv")),
        ],
    )
}

#[test]
fn rank_pair_match_rates() {
    let ha = [5, 1, 5, 1, 3];
    let hb = [1, 5, 2, 4, 3];
    let fx = Fixture::new();
    rank_fixture(&fx, &ha, &hb, &[0.9, 0.1, 0.8, 0.2, 0.5], &[0.1, 0.9, 0.3, 0.7, 0.5]);
    assert_eq!(stdout(&rank_pair(&fx)), "metric,match_pct,matches,eligible\nm,100.000000,4,4\n");

    rank_fixture(&fx, &ha, &hb, &[0.5; 5], &[0.5; 5]);
    assert_eq!(stdout(&rank_pair(&fx)), "metric,match_pct,matches,eligible\nm,0.000000,0,4\n");

    // the third pair is ordered the wrong way round
    rank_fixture(&fx, &ha, &hb, &[0.9, 0.1, 0.2, 0.2, 0.5], &[0.1, 0.9, 0.3, 0.7, 0.1]);
    assert_eq!(stdout(&rank_pair(&fx)), "metric,match_pct,matches,eligible\nm,75.000000,3,4\n");
}

#[test]
fn rank_pair_needs_two_models() {
    let fx = Fixture::new();
    let mut samples = String::new();
    for tag in ["a", "b", "c"] {
        samples += &sample_line(tag, "q", "x", "x", Some(tag));
    }
    let s = fx.write("s.jsonl", &samples);
    let j = fx.write("j.jsonl", &judgments(&[("a", &[1]), ("b", &[5]), ("c", &[3])]));
    let run = kpqa(&["rank-pair"], &[("--samples", &s), ("--judgments", &j)]);
    assert_eq!(run.status.code(), Some(1));
    assert!(stderr(&run).contains("exactly 2"), "{}", stderr(&run));

    let fx = Fixture::new();
    rank_fixture(&fx, &[3, 3], &[3, 4], &[0.1, 0.2], &[0.3, 0.4]);
    let run = rank_pair(&fx);
    assert_eq!(run.status.code(), Some(1));
    assert!(stderr(&run).contains("empty comparison"), "{}", stderr(&run));
}
