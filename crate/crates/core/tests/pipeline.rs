//! Integration tests of the command layer: artifact shapes, recompute
//! oracles, and manifest reproducibility.

use condrec::commands::{self, EvalVariant};
use condrec::config::PipelineConfig;
use condrec::datamodel;
use condrec::synth::{self, SyntheticBenchmarkSpec};

fn small_benchmark(dir: &std::path::Path, seed: u64) {
    let spec = SyntheticBenchmarkSpec {
        groups: 4,
        users_per_group: 12,
        items_per_topic: 24,
        history_len: (5, 9),
        impressions_per_user: 20,
        seed,
        ..SyntheticBenchmarkSpec::default()
    };
    let ds = synth::generate(&spec).unwrap();
    datamodel::save_dataset(&ds, &dir.join("items.tsv"), &dir.join("behaviors.tsv")).unwrap();
}

fn config_for(dir: &std::path::Path, seed: u64) -> PipelineConfig {
    let text = format!(
        "data.items = {items}\ndata.behaviors = {behaviors}\noutput.dir = {out}\nseed = {seed}\n\
         train.epochs = 3\ntrain.vocab_buckets = 512\ntrain.content_dim = 32\ntrain.user_dim = 16\n\
         condense.k = 4\ncondense.m = 3\neval.k_list = 1,5\nevo.generations = 2\nevo.children = 3\n",
        items = dir.join("items.tsv").display(),
        behaviors = dir.join("behaviors.tsv").display(),
        out = dir.join("out").display(),
    );
    PipelineConfig::parse(&text).unwrap()
}

#[test]
fn evolve_writes_winners_and_consistent_trace() {
    let tmp = tempfile::tempdir().unwrap();
    small_benchmark(tmp.path(), 1);
    let config = config_for(tmp.path(), 1);
    let summary = commands::cmd_evolve(&config).unwrap();
    assert_eq!(summary.winner_paths.len(), 2);
    assert!(summary.final_prompt_path.exists());

    // E=2, N=3: header plus 6 rows; selected flags satisfy the argmax rule.
    let trace = std::fs::read_to_string(&summary.trace_path).unwrap();
    let rows: Vec<&str> = trace.lines().skip(1).collect();
    assert_eq!(rows.len(), 6);
    for generation in 1..=2 {
        let scores: Vec<(usize, f64, bool)> = rows
            .iter()
            .filter_map(|r| {
                let cols: Vec<&str> = r.split('\t').collect();
                if cols[0].parse::<usize>().unwrap() == generation {
                    Some((
                        cols[1].parse().unwrap(),
                        cols[2].parse().unwrap(),
                        cols[3] == "1",
                    ))
                } else {
                    None
                }
            })
            .collect();
        assert_eq!(scores.len(), 3);
        let selected = scores.iter().find(|(_, _, sel)| *sel).unwrap();
        for (i, score, _) in &scores {
            assert!(selected.1 >= *score, "generation {generation}");
            if *score == selected.1 {
                assert!(selected.0 <= *i, "tie must select the lowest index");
            }
        }
    }
}

#[test]
fn condense_size_report_matches_recomputation() {
    let tmp = tempfile::tempdir().unwrap();
    small_benchmark(tmp.path(), 2);
    let config = config_for(tmp.path(), 2);
    let summary = commands::cmd_condense(&config, true).unwrap();
    assert_eq!(summary.synthetic_users, 4);

    // Recompute the size report from the emitted files.
    let condensed = datamodel::load_dataset(
        &commands::condensed_items_path(&config),
        &commands::condensed_behaviors_path(&config),
    )
    .unwrap();
    let full = datamodel::load_dataset(&config.items_path, &config.behaviors_path).unwrap();
    let (train, _, _) = datamodel::split_dataset(&full, config.split, config.seed).unwrap();
    let recomputed = datamodel::size_report(&condensed, &train).unwrap();
    assert_eq!(recomputed, summary.size_report);

    // The JSON twin exists and parses.
    let json_text =
        std::fs::read_to_string(config.output_dir.join("size_report.json")).unwrap();
    let value: serde_json::Value = serde_json::from_str(&json_text).unwrap();
    assert_eq!(value["overall_bytes"], summary.size_report.overall_bytes);

    // Every synthetic history must reference only original items.
    for history in condensed.users().values() {
        for id in history.item_ids() {
            assert!(full.items().contains_key(id), "hallucinated item id {id}");
        }
    }
}

#[test]
fn compare_reports_quality_100_for_original() {
    let tmp = tempfile::tempdir().unwrap();
    small_benchmark(tmp.path(), 3);
    let config = config_for(tmp.path(), 3);
    commands::cmd_condense(&config, false).unwrap();
    for variant in
        [EvalVariant::Original, EvalVariant::Condensed, EvalVariant::Random, EvalVariant::Majority]
    {
        commands::cmd_eval(&config, variant, false).unwrap();
    }
    let rows = commands::cmd_compare(&config, true).unwrap();
    assert_eq!(rows.len(), 4);
    let original = rows.iter().find(|(name, _)| name == "original").unwrap();
    assert!((original.1.quality_pct.unwrap() - 100.0).abs() < 1e-9);
    // All four metrics present for each variant.
    for (name, report) in &rows {
        assert_eq!(report.ndcg.len() + report.recall.len(), 4, "variant {name}");
    }
    let table = std::fs::read_to_string(config.output_dir.join("compare.tsv")).unwrap();
    assert!(table.starts_with("variant\t"));
    assert_eq!(table.lines().count(), 5);
}

#[test]
fn eval_condensed_without_artifacts_is_a_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    small_benchmark(tmp.path(), 4);
    let config = config_for(tmp.path(), 4);
    let err = commands::cmd_eval(&config, EvalVariant::Condensed, false).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    assert!(err.to_string().contains("condense"));
}

#[test]
fn manifests_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    small_benchmark(tmp.path(), 5);
    let config = config_for(tmp.path(), 5);
    commands::cmd_condense(&config, false).unwrap();
    let manifest_path = config.output_dir.join("manifest-condense.txt");
    let first = std::fs::read_to_string(&manifest_path).unwrap();
    commands::cmd_condense(&config, false).unwrap();
    let second = std::fs::read_to_string(&manifest_path).unwrap();
    assert_eq!(first, second);
    assert!(first.contains("command = condense"));
    assert!(first.contains("config_sha256 = "));
}

#[test]
fn sweeps_emit_one_row_per_value() {
    let tmp = tempfile::tempdir().unwrap();
    small_benchmark(tmp.path(), 6);
    let config = config_for(tmp.path(), 6);

    let alphas = [0.0, 0.2, 1.0];
    let rows = commands::cmd_sweep_alpha(&config, &alphas, false).unwrap();
    assert_eq!(rows.len(), alphas.len());
    for (row, alpha) in rows.iter().zip(alphas) {
        assert_eq!(row.value, alpha);
    }
    let table = std::fs::read_to_string(config.output_dir.join("sweep_alpha.tsv")).unwrap();
    assert_eq!(table.lines().count(), 1 + alphas.len());
    assert!(table.starts_with("alpha\t"));

    let ks = [2usize, 4];
    let rows = commands::cmd_sweep_k(&config, &ks, false).unwrap();
    assert_eq!(rows.len(), ks.len());
    for (row, k) in rows.iter().zip(ks) {
        assert_eq!(row.value, k as f64);
        assert_eq!(row.condensed_users, k);
    }
}

#[test]
fn gen_synthetic_command_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = SyntheticBenchmarkSpec {
        groups: 3,
        users_per_group: 6,
        items_per_topic: 20,
        seed: 7,
        ..SyntheticBenchmarkSpec::default()
    };
    let mut digests = Vec::new();
    for out in ["a", "b"] {
        let mut config = PipelineConfig::default();
        config.output_dir = tmp.path().join(out);
        let stats = commands::cmd_gen_synthetic(&spec, &config).unwrap();
        assert_eq!(stats.n_users, 18);
        let items = std::fs::read(config.output_dir.join("items.tsv")).unwrap();
        let behaviors = std::fs::read(config.output_dir.join("behaviors.tsv")).unwrap();
        digests.push((
            condrec::manifest::sha256_hex(&items),
            condrec::manifest::sha256_hex(&behaviors),
        ));
    }
    assert_eq!(digests[0], digests[1]);
}
