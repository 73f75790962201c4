//! Dataset CSV format.
//!
//! Header `seq_id,t,x_0,…,x_{d−1}` followed by either `target_0,…` columns
//! (regression on a single series, `seq_id` constant) or one `label` column
//! (classification; one sequence per `seq_id`, rows in time order, the label
//! repeated on every row). Training data comes first.

use std::path::Path;

use esnq_core::data::{Dataset, Samples, Task};
use esnq_core::linalg::Matrix;

use crate::error::{CliError, Result};

fn bad(path: &Path, message: impl Into<String>) -> CliError {
    CliError::Artifact { path: path.into(), message: message.into() }
}

pub fn save_dataset_csv(ds: &Dataset, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| bad(path, e.to_string()))?;
    let d_in = ds.d_in();
    let mut header = vec!["seq_id".to_string(), "t".to_string()];
    header.extend((0..d_in).map(|j| format!("x_{j}")));
    let io = |e: csv::Error| bad(path, e.to_string());
    match &ds.samples {
        Samples::Series { inputs, targets } => {
            header.extend((0..targets.cols()).map(|j| format!("target_{j}")));
            w.write_record(&header).map_err(io)?;
            for t in 0..inputs.rows() {
                let mut rec = vec!["0".to_string(), t.to_string()];
                rec.extend(inputs.row(t).iter().chain(targets.row(t)).map(|v| v.to_string()));
                w.write_record(&rec).map_err(io)?;
            }
        }
        Samples::Sequences { sequences, labels } => {
            header.push("label".into());
            w.write_record(&header).map_err(io)?;
            for (id, (seq, label)) in sequences.iter().zip(labels).enumerate() {
                for t in 0..seq.rows() {
                    let mut rec = vec![id.to_string(), t.to_string()];
                    rec.extend(seq.row(t).iter().map(|v| v.to_string()));
                    rec.push(label.to_string());
                    w.write_record(&rec).map_err(io)?;
                }
            }
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Reads a dataset; the first `train_fraction` of the steps (regression)
/// or sequences (classification) form the training split.
pub fn load_dataset_csv(path: &Path, name: &str, train_fraction: f64) -> Result<Dataset> {
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(path, e.to_string()))?;
    let header: Vec<String> = r.headers().map_err(|e| bad(path, e.to_string()))?.iter().map(String::from).collect();
    if header.len() < 3 || header[0] != "seq_id" || header[1] != "t" {
        return Err(bad(path, "header must start with seq_id,t"));
    }
    let d_in = header.iter().filter(|h| h.starts_with("x_")).count();
    let d_out = header.iter().filter(|h| h.starts_with("target_")).count();
    let has_label = header.last().is_some_and(|h| h == "label");
    let expected_inputs: Vec<String> = (0..d_in).map(|j| format!("x_{j}")).collect();
    if d_in == 0 || header[2..2 + d_in] != expected_inputs[..] {
        return Err(bad(path, "input columns must be x_0, x_1, … after seq_id,t"));
    }
    if has_label == (d_out > 0) || header.len() != 2 + d_in + if has_label { 1 } else { d_out } {
        return Err(bad(path, "expected either target_* columns or a single trailing label column"));
    }

    let mut rows: Vec<(String, usize, Vec<f64>)> = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(path, e.to_string()))?;
        let line = i + 2;
        let num = |k: usize| -> Result<f64> {
            let v: f64 = rec[k].trim().parse().map_err(|_| bad(path, format!("line {line}: `{}` is not a number", &rec[k])))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(bad(path, format!("line {line}: non-finite value")))
            }
        };
        let t: usize = rec[1].trim().parse().map_err(|_| bad(path, format!("line {line}: bad time index")))?;
        let values = (2..rec.len()).map(num).collect::<Result<Vec<f64>>>()?;
        rows.push((rec[0].to_string(), t, values));
    }
    if rows.is_empty() {
        return Err(bad(path, "no data rows"));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(bad(path, "train fraction must lie in (0, 1)"));
    }

    let ds = if has_label {
        let mut sequences = Vec::new();
        let mut labels = Vec::new();
        let mut i = 0;
        while i < rows.len() {
            let id = rows[i].0.clone();
            let mut data = Vec::new();
            let label_f = rows[i].2[d_in];
            let mut t = 0;
            while i < rows.len() && rows[i].0 == id {
                let (_, ti, v) = &rows[i];
                if *ti != t {
                    return Err(bad(path, format!("sequence {id}: time index {ti} out of order")));
                }
                if v[d_in] != label_f {
                    return Err(bad(path, format!("sequence {id}: label changes within the sequence")));
                }
                data.extend_from_slice(&v[..d_in]);
                t += 1;
                i += 1;
            }
            if label_f < 0.0 || label_f.fract() != 0.0 {
                return Err(bad(path, format!("sequence {id}: label must be a nonnegative integer")));
            }
            sequences.push(Matrix::from_vec(t, d_in, data)?);
            labels.push(label_f as usize);
        }
        let n_classes = labels.iter().max().map_or(0, |m| m + 1).max(2);
        let n_train = ((sequences.len() as f64 * train_fraction).round() as usize).clamp(1, sequences.len() - 1);
        Dataset {
            name: name.into(),
            task: Task::Classification { n_classes },
            n_test: sequences.len() - n_train,
            n_train,
            samples: Samples::Sequences { sequences, labels },
            normalization: None,
        }
    } else {
        let first = &rows[0].0;
        if rows.iter().any(|r| &r.0 != first) {
            return Err(bad(path, "regression data must be a single series (one seq_id)"));
        }
        let steps = rows.len();
        let mut x = Vec::with_capacity(steps * d_in);
        let mut y = Vec::with_capacity(steps * d_out);
        for (k, (_, t, v)) in rows.iter().enumerate() {
            if *t != k {
                return Err(bad(path, format!("time index {t} out of order at row {k}")));
            }
            x.extend_from_slice(&v[..d_in]);
            y.extend_from_slice(&v[d_in..]);
        }
        let n_train = ((steps as f64 * train_fraction).round() as usize).clamp(1, steps - 1);
        Dataset {
            name: name.into(),
            task: Task::Regression,
            samples: Samples::Series { inputs: Matrix::from_vec(steps, d_in, x)?, targets: Matrix::from_vec(steps, d_out, y)? },
            n_train,
            n_test: steps - n_train,
            normalization: None,
        }
    };
    ds.validate()?;
    Ok(ds)
}
