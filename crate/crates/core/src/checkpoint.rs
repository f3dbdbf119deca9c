//! Model checkpoints: a JSON header plus row-major CSV parameter blocks.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::appnp::AppnpModel;
use crate::cgi::ChoiceModel;
use crate::error::{Error, Result};
use crate::nn::MlpParams;

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct BlockHeader {
    name: String,
    rows: usize,
    cols: usize,
    file: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelHeader {
    version: u32,
    input_dim: usize,
    hidden: usize,
    num_classes: usize,
    alpha_teleport: f64,
    k_prop: usize,
    dropout_rate: f64,
    seed: u64,
    blocks: Vec<BlockHeader>,
}

fn write_block(dir: &Path, file: &str, rows: usize, cols: usize, data: &[f64]) -> Result<()> {
    let mut out = Vec::new();
    for r in 0..rows {
        let cells: Vec<String> = (0..cols).map(|c| format!("{}", data[r * cols + c])).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    fs::write(dir.join(file), out)?;
    Ok(())
}

fn read_block(dir: &Path, header: &BlockHeader) -> Result<Vec<f64>> {
    let path = dir.join(&header.file);
    let text = fs::read_to_string(&path)?;
    let mut data = Vec::with_capacity(header.rows * header.cols);
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        for cell in line.split(',') {
            let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                file: path.display().to_string(),
                line: idx + 1,
                message: format!("invalid number '{cell}'"),
            })?;
            data.push(v);
        }
    }
    if data.len() != header.rows * header.cols {
        return Err(Error::Validation(format!(
            "block '{}' has {} values, expected {}x{}",
            header.name,
            data.len(),
            header.rows,
            header.cols
        )));
    }
    Ok(data)
}

/// Writes `<stem>.json` plus one CSV per parameter block into `dir`.
pub fn save_model(model: &AppnpModel, seed: u64, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let (d, h, l) = model.mlp.dims();
    let mut files = vec![dir.join(format!("{stem}.json"))];
    let mut blocks = Vec::new();
    for (name, data) in model.mlp.blocks() {
        let (rows, cols) = match name {
            "w1" => (d, h),
            "b1" => (1, h),
            "w2" => (h, l),
            _ => (1, l),
        };
        let file = format!("{stem}.{name}.csv");
        write_block(dir, &file, rows, cols, data)?;
        files.push(dir.join(&file));
        blocks.push(BlockHeader {
            name: name.to_string(),
            rows,
            cols,
            file,
        });
    }
    let header = ModelHeader {
        version: FORMAT_VERSION,
        input_dim: d,
        hidden: h,
        num_classes: l,
        alpha_teleport: model.alpha_teleport,
        k_prop: model.k_prop,
        dropout_rate: model.dropout_rate,
        seed,
        blocks,
    };
    fs::write(
        dir.join(format!("{stem}.json")),
        serde_json::to_string_pretty(&header)?,
    )?;
    Ok(files)
}

/// Loads a checkpoint written by [`save_model`]; returns the model and the
/// seed recorded in the header.
pub fn load_model(dir: &Path, stem: &str) -> Result<(AppnpModel, u64)> {
    let header_path = dir.join(format!("{stem}.json"));
    let header: ModelHeader = serde_json::from_str(&fs::read_to_string(&header_path)?)
        .map_err(|e| Error::Validation(format!("{}: {e}", header_path.display())))?;
    if header.version != FORMAT_VERSION {
        return Err(Error::Validation(format!(
            "checkpoint version {} unsupported (expected {FORMAT_VERSION})",
            header.version
        )));
    }
    let mut params = MlpParams::zeros(header.input_dim, header.hidden, header.num_classes);
    for block in &header.blocks {
        let data = read_block(dir, block)?;
        match block.name.as_str() {
            "w1" => params.w1 = to_matrix(block, data)?,
            "b1" => params.b1 = Array1::from_vec(data),
            "w2" => params.w2 = to_matrix(block, data)?,
            "b2" => params.b2 = Array1::from_vec(data),
            other => {
                return Err(Error::Validation(format!("unknown parameter block '{other}'")))
            }
        }
    }
    if !params.is_finite() {
        return Err(Error::Numerical("checkpoint holds non-finite values".into()));
    }
    Ok((
        AppnpModel {
            mlp: params,
            alpha_teleport: header.alpha_teleport,
            k_prop: header.k_prop,
            dropout_rate: header.dropout_rate,
        },
        header.seed,
    ))
}

fn to_matrix(block: &BlockHeader, data: Vec<f64>) -> Result<Array2<f64>> {
    Array2::from_shape_vec((block.rows, block.cols), data)
        .map_err(|e| Error::Dimension(format!("block '{}': {e}", block.name)))
}

/// Choice-model checkpoint: one JSON document.
pub fn save_choice_model(model: &ChoiceModel, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    #[derive(Serialize)]
    struct Versioned<'a> {
        version: u32,
        model: &'a ChoiceModel,
    }
    fs::write(
        path,
        serde_json::to_string_pretty(&Versioned {
            version: FORMAT_VERSION,
            model,
        })?,
    )?;
    Ok(())
}

pub fn load_choice_model(path: &Path) -> Result<ChoiceModel> {
    #[derive(Deserialize)]
    struct Versioned {
        version: u32,
        model: ChoiceModel,
    }
    let v: Versioned = serde_json::from_str(&fs::read_to_string(path)?)
        .map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
    if v.version != FORMAT_VERSION {
        return Err(Error::Validation(format!(
            "choice checkpoint version {} unsupported",
            v.version
        )));
    }
    Ok(v.model)
}
