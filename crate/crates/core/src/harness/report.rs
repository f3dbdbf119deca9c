//! Report emission and round-trip validation.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{PipelineOutput, SplitName};
use crate::cgi::Factor;
use crate::error::{Error, Result};
use crate::graph::UNLABELED;

fn split_str(s: SplitName) -> &'static str {
    match s {
        SplitName::Train => "train",
        SplitName::Valid => "valid",
        SplitName::Test => "test",
        SplitName::Unsplit => "unsplit",
    }
}

/// Writes `metrics.json`, `predictions.csv`, `factors.csv`, `losses.csv`,
/// and, when the analyses ran, `deciles.csv` and `overlap.csv` into
/// `out_dir`. Idempotent for fixed inputs; optional analyses that are absent
/// produce no file and no JSON key.
pub fn emit_report(output: &PipelineOutput, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    let metrics_path = out_dir.join("metrics.json");
    fs::write(
        &metrics_path,
        serde_json::to_string_pretty(&output.report)?,
    )?;
    written.push(metrics_path);

    // Prediction dump.
    {
        let mut out = Vec::new();
        let l = output.bundle.y_hat.ncols();
        let with_probs = output.predictions.iter().any(|r| r.y_hat.is_some());
        let mut header =
            String::from("node,split,z_hat,z_self,z_ensemble,z_lway,z_cgi,conflict");
        if with_probs {
            for j in 0..l {
                header.push_str(&format!(",y_hat_{j}"));
            }
            for j in 0..l {
                header.push_str(&format!(",y_self_{j}"));
            }
        }
        writeln!(out, "{header}")?;
        for row in &output.predictions {
            let mut line = format!(
                "{},{},{},{},{},{},{},{}",
                row.node,
                split_str(row.split),
                row.z_hat,
                row.z_self,
                row.z_ensemble,
                row.z_lway,
                row.z_cgi,
                u8::from(row.conflict)
            );
            if with_probs {
                for block in [&row.y_hat, &row.y_self] {
                    match block {
                        Some(vals) => {
                            for v in vals {
                                line.push_str(&format!(",{v}"));
                            }
                        }
                        None => line.push_str(&",".repeat(l)),
                    }
                }
            }
            writeln!(out, "{line}")?;
        }
        let path = out_dir.join("predictions.csv");
        fs::write(&path, out)?;
        written.push(path);
    }

    // Factor dump, with the choice label where one exists.
    {
        let mut out = Vec::new();
        let names: Vec<&str> = Factor::ALL.iter().map(|f| f.name()).collect();
        writeln!(out, "node,{},p", names.join(","))?;
        let p_by_node: HashMap<usize, i8> = output.choice_labels.iter().copied().collect();
        for (node, f) in output.factors.iter().enumerate() {
            let vals: Vec<String> = f.to_vec().iter().map(|v| format!("{v}")).collect();
            let p = p_by_node
                .get(&node)
                .map(|p| p.to_string())
                .unwrap_or_default();
            writeln!(out, "{node},{},{p}", vals.join(","))?;
        }
        let path = out_dir.join("factors.csv");
        fs::write(&path, out)?;
        written.push(path);
    }

    // Loss curves.
    {
        let mut out = Vec::new();
        writeln!(out, "epoch,train_loss,valid_loss")?;
        for (epoch, (t, v)) in output
            .losses
            .train_loss
            .iter()
            .zip(&output.losses.valid_loss)
            .enumerate()
        {
            writeln!(out, "{epoch},{t},{v}")?;
        }
        let path = out_dir.join("losses.csv");
        fs::write(&path, out)?;
        written.push(path);
    }

    if !output.deciles.is_empty() {
        let mut out = Vec::new();
        writeln!(out, "ranking,group,size,accuracy")?;
        for table in &output.deciles {
            for row in &table.rows {
                writeln!(out, "{},{},{},{}", table.ranking, row.group, row.size, row.accuracy)?;
            }
        }
        let path = out_dir.join("deciles.csv");
        fs::write(&path, out)?;
        written.push(path);
    }

    if let Some(overlap) = &output.overlap {
        let mut out = Vec::new();
        let k = overlap.ncols();
        let header: Vec<String> = (0..k).map(|j| format!("b{j}")).collect();
        writeln!(out, "group,{}", header.join(","))?;
        for (i, row) in overlap.rows().into_iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            writeln!(out, "a{i},{}", cells.join(","))?;
        }
        let path = out_dir.join("overlap.csv");
        fs::write(&path, out)?;
        written.push(path);
    }

    Ok(written)
}

fn get_acc(metrics: &serde_json::Value, key: &str) -> Result<f64> {
    metrics["accuracy"][key]
        .as_f64()
        .ok_or_else(|| Error::Validation(format!("metrics missing accuracy.{key}")))
}

/// Consistency checks over an emitted report: accuracies lie in [0, 1], the
/// relative improvements match the stored accuracies, the choice rule's
/// bounds hold, and, when the prediction dump and label file are given,
/// every accuracy is recomputed from them and compared.
pub fn validate_report(
    metrics_path: &Path,
    predictions_path: Option<&Path>,
    labels_path: Option<&Path>,
) -> Result<Vec<String>> {
    let metrics: serde_json::Value = serde_json::from_str(&fs::read_to_string(metrics_path)?)?;
    let mut findings = Vec::new();

    let methods = ["appnp", "self_only", "ensemble", "lway", "cgi", "oracle_bound"];
    let mut acc = HashMap::new();
    for m in methods {
        let v = get_acc(&metrics, m)?;
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Validation(format!("accuracy.{m} = {v} outside [0, 1]")));
        }
        acc.insert(m, v);
    }
    findings.push(format!("{} accuracies in range", methods.len()));

    for (key, reference) in [("over_appnp", "appnp"), ("over_ensemble", "ensemble")] {
        let stored = metrics["relative_improvement"][key]
            .as_f64()
            .ok_or_else(|| Error::Validation(format!("missing relative_improvement.{key}")))?;
        let base = acc[reference];
        let expect = if base > 0.0 {
            (acc["cgi"] - base) / base
        } else {
            0.0
        };
        if (stored - expect).abs() > 1e-9 {
            return Err(Error::Validation(format!(
                "relative_improvement.{key} = {stored}, expected {expect}"
            )));
        }
    }
    findings.push("relative improvements consistent".into());

    if acc["oracle_bound"] < acc["cgi"] - 1e-12 {
        return Err(Error::Validation(
            "oracle bound below the CGI accuracy".into(),
        ));
    }
    if acc["cgi"] < acc["appnp"].min(acc["self_only"]) - 1e-12 {
        return Err(Error::Validation(
            "CGI accuracy below min(appnp, self)".into(),
        ));
    }
    findings.push("choice-rule bounds hold".into());

    if let (Some(pred_path), Some(label_path)) = (predictions_path, labels_path) {
        let labels: Vec<i64> = fs::read_to_string(label_path)?
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.trim().parse::<i64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Validation(format!("label file: {e}")))?;

        let text = fs::read_to_string(pred_path)?;
        let mut lines = text.lines();
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| Error::Validation("empty prediction dump".into()))?
            .split(',')
            .collect();
        let col = |name: &str| -> Result<usize> {
            header
                .iter()
                .position(|h| *h == name)
                .ok_or_else(|| Error::Validation(format!("prediction dump lacks column {name}")))
        };
        let (c_node, c_split) = (col("node")?, col("split")?);
        let cols: Vec<(&str, usize)> = [
            ("appnp", col("z_hat")?),
            ("self_only", col("z_self")?),
            ("ensemble", col("z_ensemble")?),
            ("lway", col("z_lway")?),
            ("cgi", col("z_cgi")?),
        ]
        .to_vec();

        let mut hits: HashMap<&str, usize> = HashMap::new();
        let mut oracle_hits = 0usize;
        let mut total = 0usize;
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let cells: Vec<&str> = line.split(',').collect();
            if cells[c_split] != "test" {
                continue;
            }
            let node: usize = cells[c_node]
                .parse()
                .map_err(|_| Error::Validation("bad node id in dump".into()))?;
            if labels[node] == UNLABELED {
                continue;
            }
            total += 1;
            let mut any_right = false;
            for &(name, c) in &cols {
                let z: i64 = cells[c]
                    .parse()
                    .map_err(|_| Error::Validation(format!("bad class in column {name}")))?;
                if z == labels[node] {
                    *hits.entry(name).or_default() += 1;
                    if name == "appnp" || name == "self_only" {
                        any_right = true;
                    }
                }
            }
            if any_right {
                oracle_hits += 1;
            }
        }
        if total == 0 {
            return Err(Error::Validation("no labeled test rows in dump".into()));
        }
        for &(name, _) in &cols {
            let recomputed = *hits.get(name).unwrap_or(&0) as f64 / total as f64;
            if (recomputed - acc[name]).abs() > 1e-12 {
                return Err(Error::Validation(format!(
                    "accuracy.{name} = {} but the dump gives {recomputed}",
                    acc[name]
                )));
            }
        }
        let oracle = oracle_hits as f64 / total as f64;
        if (oracle - acc["oracle_bound"]).abs() > 1e-12 {
            return Err(Error::Validation(format!(
                "oracle_bound = {} but the dump gives {oracle}",
                acc["oracle_bound"]
            )));
        }
        findings.push(format!(
            "all accuracies recomputed from {total} labeled test rows"
        ));
    }

    Ok(findings)
}
