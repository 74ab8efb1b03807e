//! Evaluation reports as aligned text tables and as delimited files.
//!
//! Per-class rows use the column order
//! `TP Rate | FP Rate | Precision | Recall | F-measure`; classes are labeled
//! by id (`Class 1` = accept, `Class 2` = reject, `Class 3` = missed).

use std::fmt::Write as _;

use emiim_core::eval::{ClassMetrics, Comparison, EvalReport, ModelAverages, WeightedMetrics};

pub const CLASS_CSV_HEADER: &str = "class,tp_rate,fp_rate,precision,recall,f_measure";

/// A `# generated ...` line in local time, placed at the top of report
/// files unless suppressed.
pub fn timestamp_line() -> String {
    format!("# generated {}\n", chrono::Local::now().format("%Y-%m-%dT%H:%M:%S%z"))
}

fn rate_row(out: &mut String, label: &str, v: [f64; 5]) {
    let _ = writeln!(
        out,
        "{label:<9} | {:>7.3} | {:>7.3} | {:>9.3} | {:>6.3} | {:>9.3}",
        v[0], v[1], v[2], v[3], v[4]
    );
}

fn class_values(m: &ClassMetrics) -> [f64; 5] {
    [m.tp_rate, m.fp_rate, m.precision, m.recall, m.f_measure]
}

fn weighted_values(w: &WeightedMetrics) -> [f64; 5] {
    [w.tp_rate, w.fp_rate, w.precision, w.recall, w.f_measure]
}

/// The per-class rate table with weighted averages, kappa and accuracy.
pub fn eval_table(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} | {}-fold cross validation | {} examples",
        report.model, report.k, report.n_examples
    );
    let _ = writeln!(out, "Class     | TP Rate | FP Rate | Precision | Recall | F-measure");
    let _ = writeln!(out, "{}", "-".repeat(62));
    for m in &report.per_class {
        rate_row(&mut out, &format!("Class {}", m.class.id()), class_values(m));
    }
    rate_row(&mut out, "Weighted", weighted_values(&report.summary.weighted));
    let _ = writeln!(out, "Kappa     {:.3}", report.summary.kappa);
    let _ = writeln!(out, "Accuracy  {:.3}", report.summary.accuracy);
    let _ = writeln!(
        out,
        "Fold mean accuracy {:.3}, kappa {:.3}, weighted f-measure {:.3}",
        report.fold_mean.accuracy, report.fold_mean.kappa, report.fold_mean.weighted.f_measure
    );
    let zero: Vec<String> = report
        .zero_division_classes()
        .map(|c| format!("Class {}", c.id()))
        .collect();
    if !zero.is_empty() {
        let _ = writeln!(out, "Note: 0/0 ratios reported as 0 for {}", zero.join(", "));
    }
    out
}

fn csv_values(v: [f64; 5]) -> String {
    v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(",")
}

/// Per-class rows, then a `metric,value` summary block, then one row per
/// fold. Blocks are separated by a blank line.
pub fn eval_csv(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{CLASS_CSV_HEADER}");
    for m in &report.per_class {
        let _ = writeln!(out, "{},{}", m.class.id(), csv_values(class_values(m)));
    }
    let w = &report.summary.weighted;
    let _ = writeln!(out);
    let _ = writeln!(out, "metric,value");
    let _ = writeln!(out, "model,{}", report.model);
    let _ = writeln!(out, "k,{}", report.k);
    let _ = writeln!(out, "n_examples,{}", report.n_examples);
    for (name, v) in [
        ("weighted_tp_rate", w.tp_rate),
        ("weighted_fp_rate", w.fp_rate),
        ("weighted_precision", w.precision),
        ("weighted_recall", w.recall),
        ("weighted_f_measure", w.f_measure),
        ("kappa", report.summary.kappa),
        ("accuracy", report.summary.accuracy),
    ] {
        let _ = writeln!(out, "{name},{v:.6}");
    }
    let zero: Vec<String> = report.zero_division_classes().map(|c| c.id().to_string()).collect();
    let _ = writeln!(out, "zero_division_classes,{}", zero.join(" "));
    let _ = writeln!(out);
    let _ = writeln!(out, "fold,n_test,accuracy,kappa,weighted_precision,weighted_recall,weighted_f_measure");
    for f in &report.folds {
        let s = &f.summary;
        let _ = writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
            f.fold + 1,
            f.test_indices.len(),
            s.accuracy,
            s.kappa,
            s.weighted.precision,
            s.weighted.recall,
            s.weighted.f_measure
        );
    }
    out
}

fn avg_row(out: &mut String, label: &str, a: &ModelAverages) {
    let _ = writeln!(
        out,
        "{label:<8} | {:>9.3} | {:>6.3} | {:>9.3} | {:>6.3}",
        a.precision, a.recall, a.f_measure, a.kappa
    );
}

/// Per-log weighted results for both models followed by the averages.
pub fn comparison_table(cmp: &Comparison) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "MIIM vs E-MIIM | {} logs | {}-fold cross validation, seed {}{}",
        cmp.datasets.len(),
        cmp.options.k,
        cmp.options.seed,
        if cmp.options.stratify { ", stratified" } else { "" }
    );
    let width = cmp.datasets.iter().map(|d| d.name.len()).max().unwrap_or(0).max(3);
    let _ = writeln!(
        out,
        "{:<width$} | Model  | Precision | Recall | F-measure | Kappa",
        "Log"
    );
    for d in &cmp.datasets {
        for r in [&d.miim, &d.emiim] {
            let w = &r.summary.weighted;
            let _ = writeln!(
                out,
                "{:<width$} | {:<6} | {:>9.3} | {:>6.3} | {:>9.3} | {:>5.3}",
                d.name,
                r.model.tag(),
                w.precision,
                w.recall,
                w.f_measure,
                r.summary.kappa
            );
        }
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "Average  | Precision | Recall | F-measure | Kappa");
    avg_row(&mut out, "MIIM", &cmp.miim);
    avg_row(&mut out, "E-MIIM", &cmp.emiim);
    out
}

/// `model,precision,recall,f_measure,kappa` averages, then per-log rows.
pub fn comparison_csv(cmp: &Comparison) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "model,precision,recall,f_measure,kappa");
    for (tag, a) in [("MIIM", &cmp.miim), ("E-MIIM", &cmp.emiim)] {
        let _ = writeln!(
            out,
            "{tag},{:.6},{:.6},{:.6},{:.6}",
            a.precision, a.recall, a.f_measure, a.kappa
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "log,model,precision,recall,f_measure,kappa,accuracy");
    for d in &cmp.datasets {
        for r in [&d.miim, &d.emiim] {
            let w = &r.summary.weighted;
            let _ = writeln!(
                out,
                "{},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
                d.name,
                r.model.tag(),
                w.precision,
                w.recall,
                w.f_measure,
                r.summary.kappa,
                r.summary.accuracy
            );
        }
    }
    out
}
