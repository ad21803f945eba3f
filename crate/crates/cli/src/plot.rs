use std::fs;
use std::path::Path;

use germflow_core::flow::HomeoPair;
use germflow_core::{FlowTrace, MapGerm};

use crate::error::Result;

/// Pairs each sampled zero of G with its image under φ, plus ‖G̃(φ(u))‖.
///
/// Rows follow sample order; pairs whose flow failed are skipped.
pub fn write_overlay(path: &Path, dim: usize, pairs: &[HomeoPair], target: &MapGerm) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["index".to_string()];
    header.extend((1..=dim).map(|i| format!("u{i}")));
    header.extend((1..=dim).map(|i| format!("phi{i}")));
    header.push("residual".into());
    w.write_record(&header)?;
    for (k, pair) in pairs.iter().enumerate() {
        let Some(phi) = &pair.phi else { continue };
        let residual = target.value(phi).iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut row = vec![k.to_string()];
        row.extend(pair.u.iter().map(|x| format!("{x:?}")));
        row.extend(phi.iter().map(|x| format!("{x:?}")));
        row.push(format!("{residual:?}"));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_traces(dir: &Path, traces: &[FlowTrace]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (k, tr) in traces.iter().enumerate() {
        let file = fs::File::create(dir.join(format!("trace_{k:04}.csv")))?;
        tr.write_csv(std::io::BufWriter::new(file))?;
    }
    Ok(())
}
