//! Report rendering: a human-readable table and a line-oriented structured
//! form, both free of wall-clock content so identical runs produce
//! identical bytes. Timings render separately for the terminal.

use std::path::Path;

use crate::error::Result;
use crate::pipeline::EvaluationReport;

fn picks_text(picks: &[(usize, usize)]) -> String {
    picks
        .iter()
        .map(|(d, s)| format!("{d}.{s}"))
        .collect::<Vec<_>>()
        .join("+")
}

/// Human-readable tables, one block per held-out split.
pub fn render_human(report: &EvaluationReport) -> String {
    let mut out = String::new();
    for block in &report.blocks {
        out.push_str(&format!("held-out split: {}\n", block.held_out));
        if let Some(meta) = &block.train_meta {
            out.push_str(&format!(
                "  reward model: best epoch {} of {}, dev rho {:.6}\n",
                meta.best_epoch, meta.epochs, meta.dev_rho
            ));
        }
        out.push_str(&format!(
            "  correlation vs oracle: mean rho {:.6}, mean ndcg@1% {:.6}\n",
            block.mean_rho, block.mean_ndcg
        ));
        if !block.skipped.is_empty() {
            out.push_str(&format!(
                "  skipped degenerate clusters: {}\n",
                block.skipped.join(", ")
            ));
        }
        out.push_str("  cluster        rouge1    rouge2     U*      words  sentences\n");
        for o in &block.outcomes {
            out.push_str(&format!(
                "  {:<12} {:>8.6}  {:>8.6}  {:>8.6}  {:>5}  {}\n",
                o.cluster_id,
                o.rouge1,
                o.rouge2,
                o.u_star,
                o.word_count,
                picks_text(&o.picks)
            ));
        }
        out.push('\n');
    }
    for (split, error) in &report.failures {
        out.push_str(&format!("FAILED split {split}: {error}\n"));
    }
    out
}

/// Line-oriented structured form (tab-separated).
pub fn render_lines(report: &EvaluationReport) -> String {
    let mut out = String::new();
    for block in &report.blocks {
        out.push_str(&format!(
            "block\t{}\tmean_rho\t{:.6}\tmean_ndcg\t{:.6}\n",
            block.held_out, block.mean_rho, block.mean_ndcg
        ));
        if let Some(meta) = &block.train_meta {
            out.push_str(&format!(
                "model\t{}\tbest_epoch\t{}\tdev_rho\t{:.6}\n",
                block.held_out, meta.best_epoch, meta.dev_rho
            ));
        }
        for skipped in &block.skipped {
            out.push_str(&format!("skipped\t{}\t{}\n", block.held_out, skipped));
        }
        for o in &block.outcomes {
            out.push_str(&format!(
                "cluster\t{}\t{}\trouge1\t{:.6}\trouge2\t{:.6}\tustar\t{:.6}\twords\t{}\tpicks\t{}\n",
                block.held_out,
                o.cluster_id,
                o.rouge1,
                o.rouge2,
                o.u_star,
                o.word_count,
                picks_text(&o.picks)
            ));
        }
    }
    for (split, error) in &report.failures {
        out.push_str(&format!("failure\t{split}\t{error}\n"));
    }
    out
}

/// Wall-clock timings (kept out of the report files; print to stderr).
pub fn render_timings(report: &EvaluationReport) -> String {
    let mut out = String::new();
    for block in &report.blocks {
        let mean_test = if block.outcomes.is_empty() {
            0.0
        } else {
            block.outcomes.iter().map(|o| o.test_seconds).sum::<f64>() / block.outcomes.len() as f64
        };
        out.push_str(&format!(
            "split {}: reward training {:.2}s, mean per-cluster test {:.2}s\n",
            block.held_out, block.train_seconds, mean_test
        ));
    }
    out
}

/// Write `report.txt` (human) and `report.tsv` (structured) under
/// `out_dir`; a single writer keeps ordering deterministic.
pub fn write_report(out_dir: &Path, report: &EvaluationReport) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("report.txt"), render_human(report))?;
    std::fs::write(out_dir.join("report.tsv"), render_lines(report))?;
    Ok(())
}
