//! 1-NN classification, recognition rate, dimension sweeps, and CSV/SVG
//! artifact emission.

use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{EdrError, Result};

/// Nearest-neighbor labels for each test column under Euclidean distance;
/// ties resolve to the smaller training index.
pub fn nn_classify(
    train_emb: &DMatrix<f64>,
    train_labels: &[usize],
    test_emb: &DMatrix<f64>,
) -> Result<Vec<usize>> {
    if train_emb.ncols() == 0 {
        return Err(EdrError::Config("empty training set".into()));
    }
    if train_labels.len() != train_emb.ncols() {
        return Err(EdrError::Shape(format!(
            "{} labels for {} training columns",
            train_labels.len(),
            train_emb.ncols()
        )));
    }
    if train_emb.nrows() != test_emb.nrows() {
        return Err(EdrError::Shape(format!(
            "embedding dims differ: {} vs {}",
            train_emb.nrows(),
            test_emb.nrows()
        )));
    }
    let mut out = Vec::with_capacity(test_emb.ncols());
    for t in 0..test_emb.ncols() {
        let col = test_emb.column(t);
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for j in 0..train_emb.ncols() {
            let d = (col - train_emb.column(j)).norm_squared();
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        out.push(train_labels[best]);
    }
    Ok(out)
}

/// `100 × correct / total`.
pub fn recognition_rate(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.is_empty() {
        return Err(EdrError::Config("empty prediction list".into()));
    }
    if pred.len() != truth.len() {
        return Err(EdrError::Shape(format!(
            "{} predictions vs {} labels",
            pred.len(),
            truth.len()
        )));
    }
    let correct = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(100.0 * correct as f64 / pred.len() as f64)
}

/// One sweep cell: a `(method, d)` evaluation.
#[derive(Debug, Clone)]
pub struct SweepCell {
    pub method: String,
    pub d: usize,
    /// recognition rate in percent, or the error message for a failed cell
    pub ir: std::result::Result<f64, String>,
    pub seconds: f64,
    pub seed: u64,
}

/// Runs `run(method, d)` over the cross product of methods and dims in a
/// fixed (method, d) order. Failed cells are recorded and the sweep
/// continues.
pub fn sweep<F>(methods: &[String], dims: &[usize], seed: u64, mut run: F) -> Result<Vec<SweepCell>>
where
    F: FnMut(&str, usize) -> Result<f64>,
{
    if dims.is_empty() {
        return Err(EdrError::Config("dims list is empty".into()));
    }
    if dims.windows(2).any(|w| w[1] <= w[0]) {
        return Err(EdrError::Config("dims must be strictly increasing".into()));
    }
    let mut cells = Vec::with_capacity(methods.len() * dims.len());
    for method in methods {
        for &d in dims {
            let t0 = std::time::Instant::now();
            let ir = run(method, d).map_err(|e| e.to_string());
            if let Ok(v) = ir {
                if !(0.0..=100.0).contains(&v) {
                    return Err(EdrError::Numerical(format!("IR {v} out of [0,100]")));
                }
            }
            cells.push(SweepCell {
                method: method.clone(),
                d,
                ir,
                seconds: t0.elapsed().as_secs_f64(),
                seed,
            });
        }
    }
    Ok(cells)
}

/// Writes the sweep table as CSV (`method,d,ir,seconds,seed`). Failed cells
/// carry `NA` in the `ir` column. When `record_timing` is false the seconds
/// column is written as `0.000` so that reruns with the same seed produce
/// byte-identical files; measured timings stay available on the cells.
pub fn emit_csv(cells: &[SweepCell], path: &Path, record_timing: bool) -> Result<()> {
    if cells.is_empty() {
        return Err(EdrError::Config("no sweep cells to write".into()));
    }
    let mut out = String::from("method,d,ir,seconds,seed\n");
    for c in cells {
        let ir = match &c.ir {
            Ok(v) => format!("{v:.4}"),
            Err(_) => "NA".to_string(),
        };
        let secs = if record_timing { format!("{:.3}", c.seconds) } else { "0.000".to_string() };
        out.push_str(&format!("{},{},{},{},{}\n", c.method, c.d, ir, secs, c.seed));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Renders one polyline per method over `(d, IR)` into an 800×500 SVG with
/// axes and a legend. Failed cells are skipped.
pub fn emit_svg(cells: &[SweepCell], path: &Path) -> Result<()> {
    if cells.is_empty() {
        return Err(EdrError::Config("no sweep cells to plot".into()));
    }
    const W: f64 = 800.0;
    const H: f64 = 500.0;
    const ML: f64 = 60.0; // margins
    const MR: f64 = 140.0;
    const MT: f64 = 30.0;
    const MB: f64 = 50.0;
    let mut methods: Vec<&str> = cells.iter().map(|c| c.method.as_str()).collect();
    methods.dedup();
    let dmin = cells.iter().map(|c| c.d).min().unwrap() as f64;
    let dmax = cells.iter().map(|c| c.d).max().unwrap() as f64;
    let dspan = (dmax - dmin).max(1.0);
    let x = |d: f64| ML + (d - dmin) / dspan * (W - ML - MR);
    let y = |ir: f64| H - MB - ir / 100.0 * (H - MT - MB);

    let palette = [
        "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
        "#bcbd22", "#17becf",
    ];
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {W} {H}\" width=\"{W}\" height=\"{H}\">\n"
    ));
    svg.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
    ));
    // axes
    svg.push_str(&format!(
        "<line x1=\"{ML}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>\n",
        H - MB,
        W - MR
    ));
    svg.push_str(&format!(
        "<line x1=\"{ML}\" y1=\"{MT}\" x2=\"{ML}\" y2=\"{}\" stroke=\"black\"/>\n",
        H - MB
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"14\">subspace dimension d</text>\n",
        (ML + W - MR) / 2.0,
        H - 10.0
    ));
    svg.push_str(&format!(
        "<text x=\"18\" y=\"{}\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 18 {})\">recognition rate (%)</text>\n",
        (MT + H - MB) / 2.0,
        (MT + H - MB) / 2.0
    ));
    // y ticks every 20%
    for t in 0..=5 {
        let v = t as f64 * 20.0;
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-size=\"11\">{}</text>\n",
            ML - 6.0,
            y(v) + 4.0,
            v
        ));
    }
    for (mi, method) in methods.iter().enumerate() {
        let color = palette[mi % palette.len()];
        let pts: Vec<String> = cells
            .iter()
            .filter(|c| c.method == *method)
            .filter_map(|c| c.ir.as_ref().ok().map(|&ir| format!("{:.2},{:.2}", x(c.d as f64), y(ir))))
            .collect();
        if !pts.is_empty() {
            svg.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>\n",
                pts.join(" "),
                color
            ));
        }
        // legend
        let ly = MT + 20.0 * mi as f64;
        svg.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{ly}\" x2=\"{1}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            W - MR + 10.0,
            W - MR + 34.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\">{}</text>\n",
            W - MR + 40.0,
            ly + 4.0,
            method
        ));
    }
    svg.push_str("</svg>\n");
    std::fs::write(path, svg)?;
    Ok(())
}
