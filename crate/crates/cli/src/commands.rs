//! The four subcommands. Each writes progress lines to `log` and its
//! artifacts under the configured output directory.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context};
use serde_json::json;
use tip_core::{
    evaluate, load_edge_lists, report_extremes, split_train_test, synth_graph, train_with,
    EvalReport, MultiModalGraph, SplitGraph, SyntheticGraph,
};

use crate::checkpoint::Checkpoint;
use crate::config::{DataSource, RunConfig};
use crate::prepared;

pub const CHECKPOINT_FILE: &str = "checkpoint.tip";
pub const LOSSES_FILE: &str = "losses.csv";

fn write_file(path: &Path, body: impl AsRef<[u8]>) -> anyhow::Result<()> {
    fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn edge_lists(g: &MultiModalGraph) -> [(&'static str, String); 3] {
    let (p, d, r) = (g.proteins(), g.drugs(), g.relations());
    let mut pp = String::from("# protein_a,protein_b\n");
    for &(a, b) in g.pp_edges() {
        writeln!(pp, "{},{}", p.name(a), p.name(b)).unwrap();
    }
    let mut pd = String::from("# protein,drug\n");
    for &(a, b) in g.pd_edges() {
        writeln!(pd, "{},{}", p.name(a), d.name(b)).unwrap();
    }
    let mut dd = String::from("# drug_a,drug_b,relation_id\n");
    for (rel, pairs) in g.dd_edges_all().iter().enumerate() {
        for &(a, b) in pairs {
            writeln!(dd, "{},{},{}", d.name(a), d.name(b), r.name(rel)).unwrap();
        }
    }
    [("pp.csv", pp), ("pd.csv", pd), ("dd.csv", dd)]
}

pub fn synth(config: &RunConfig, log: &mut dyn Write) -> anyhow::Result<SyntheticGraph> {
    let out = config.out_dir()?;
    let s = synth_graph(&config.synth_config(), config.seed_synth)?;
    create_dir(out)?;
    for (name, body) in edge_lists(&s.graph) {
        write_file(&out.join(name), body)?;
    }
    writeln!(
        log,
        "synthetic graph: {} proteins, {} drugs, {} relations; {} pp, {} pd, {} dd edges (expected {:.1})",
        s.graph.num_proteins(),
        s.graph.num_drugs(),
        s.graph.num_relations(),
        s.graph.pp_edges().len(),
        s.graph.pd_edges().len(),
        s.graph.num_dd_edges(),
        s.expected_dd_edges(),
    )?;
    Ok(s)
}

/// Node, edge and relation counts of a prepared split.
pub fn split_summary(
    config: &RunConfig,
    input_relations: usize,
    split: &SplitGraph,
) -> serde_json::Value {
    let g = &split.train;
    let test: usize = split.test_positives.iter().map(Vec::len).sum();
    json!({
        "proteins": g.num_proteins(),
        "drugs": g.num_drugs(),
        "relations": g.num_relations(),
        "relations_dropped": input_relations - g.num_relations(),
        "pp_edges": g.pp_edges().len(),
        "pd_edges": g.pd_edges().len(),
        "dd_edges": g.num_dd_edges() + test,
        "dd_train": g.num_dd_edges(),
        "dd_test": test,
        "min_count": config.min_count,
        "split_ratio": config.split_ratio,
        "seed_split": config.seed_split,
        "seed_negative": config.seed_negative,
    })
}

pub fn prepare(config: &RunConfig, log: &mut dyn Write) -> anyhow::Result<SplitGraph> {
    let out = config.out_dir()?;
    let g = match config.data_source()? {
        DataSource::Files { pp, pd, dd } => load_edge_lists(&pp, &pd, &dd)?,
        DataSource::Synth(s) => synth_graph(&s, config.seed_synth)?.graph,
    };
    let filtered = g.filter_rare_relations(config.min_count);
    if filtered.num_relations() == 0 {
        bail!(
            "no relations remain: all {} relations have fewer than {} edges",
            g.num_relations(),
            config.min_count
        );
    }
    let split = split_train_test(
        &filtered,
        config.split_ratio,
        config.seed_split,
        config.seed_negative,
    )?;
    let summary = split_summary(config, g.num_relations(), &split);
    prepared::write(out, &split, &summary)?;
    for key in [
        "proteins",
        "drugs",
        "relations",
        "pp_edges",
        "pd_edges",
        "dd_edges",
        "dd_train",
        "dd_test",
    ] {
        writeln!(log, "{key:>10}  {}", summary[key])?;
    }
    Ok(split)
}

pub fn train(config: &RunConfig, data: &Path, log: &mut dyn Write) -> anyhow::Result<Checkpoint> {
    let out = config.out_dir()?;
    let train_config = config.train_config()?;
    let (split, graph_hash) = prepared::read(data)?;
    let start = Instant::now();
    let mut echo_err = None;
    let outcome = train_with(&split, &train_config, |epoch, loss| {
        if let Err(e) = writeln!(log, "epoch {epoch:>4}  loss {loss:.6}") {
            echo_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = echo_err {
        return Err(e.into());
    }
    writeln!(
        log,
        "trained {} epochs of {} in {:.2}s",
        config.epochs,
        config.variant,
        start.elapsed().as_secs_f64()
    )?;

    create_dir(out)?;
    let mut csv = String::from("epoch,loss\n");
    for (e, l) in outcome.losses.iter().enumerate() {
        writeln!(csv, "{e},{l}").unwrap();
    }
    write_file(&out.join(LOSSES_FILE), csv)?;
    let ckpt = Checkpoint {
        // Where a run is written does not change what it computed.
        config: RunConfig {
            out: None,
            ..config.clone()
        },
        graph_hash,
        epochs: outcome.losses.len(),
        final_loss: outcome.losses.last().copied().unwrap_or(f64::NAN),
        model: outcome.model,
    };
    ckpt.save(&out.join(CHECKPOINT_FILE))?;
    Ok(ckpt)
}

pub fn eval(
    config: &RunConfig,
    data: &Path,
    checkpoint: &Path,
    log: &mut dyn Write,
) -> anyhow::Result<EvalReport> {
    let out = config.out_dir()?;
    let ckpt = Checkpoint::load(checkpoint)?;
    let (split, graph_hash) = prepared::read(data)?;
    if graph_hash != ckpt.graph_hash {
        bail!(
            "checkpoint was trained on graph {} but {} hashes to {}; refusing to evaluate",
            hex::encode(ckpt.graph_hash),
            data.display(),
            hex::encode(graph_hash)
        );
    }
    let report = evaluate(&ckpt.model, &split)?;
    let extremes = report_extremes(&report, config.extremes);

    create_dir(out)?;
    let mut jsonl = Vec::new();
    report.write_jsonl(&mut jsonl)?;
    write_file(&out.join("report.jsonl"), jsonl)?;
    write_file(
        &out.join("summary.json"),
        serde_json::to_string_pretty(&report.summary_json())? + "\n",
    )?;
    write_file(
        &out.join("extremes.json"),
        serde_json::to_string_pretty(&extremes)? + "\n",
    )?;

    match &report.summary {
        Some(s) => writeln!(
            log,
            "{} relations: AUPRC {:.4}  AUROC {:.4}  AP@50 {:.4}",
            s.relations, s.auprc, s.auroc, s.ap50
        )?,
        None => writeln!(log, "no relation has held-out edges; nothing to score")?,
    }
    if !report.excluded.is_empty() {
        writeln!(
            log,
            "excluded {} relations with empty test sets",
            report.excluded.len()
        )?;
    }
    Ok(report)
}
