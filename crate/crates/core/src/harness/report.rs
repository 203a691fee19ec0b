use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::grid::Method;
use super::metrics::{average_ranks, compute_metrics, MethodSummary, PmaMode};
use super::protocol::DatasetResult;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub methods: Vec<Method>,
    pub pma_mode: PmaMode,
    pub datasets: Vec<DatasetResult>,
    /// `datasets x methods`.
    pub accuracy: Vec<Vec<f64>>,
    pub ranks: Vec<Vec<f64>>,
    pub summary: Vec<MethodSummary>,
}

impl BenchReport {
    pub fn build(methods: &[Method], datasets: Vec<DatasetResult>, pma_mode: PmaMode) -> Result<Self> {
        let accuracy: Vec<Vec<f64>> = datasets
            .iter()
            .map(|d| {
                methods
                    .iter()
                    .map(|&m| {
                        d.accuracy(m)
                            .ok_or_else(|| Error::InvalidInput(format!("{}: no result for {m}", d.name)))
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        let names: Vec<String> = methods.iter().map(|m| m.to_string()).collect();
        let summary = compute_metrics(&names, &accuracy, pma_mode)?;
        let ranks = accuracy.iter().map(|row| average_ranks(row)).collect();
        Ok(Self {
            methods: methods.to_vec(),
            pma_mode,
            datasets,
            accuracy,
            ranks,
            summary,
        })
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    /// One row per method with the four aggregates.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let err = |e: csv::Error| Error::Io(std::io::Error::other(e));
        out.write_record(["method", "acc_mean", "acc_std", "p95", "pma", "friedman_rank"])
            .map_err(err)?;
        for s in &self.summary {
            out.write_record([
                s.method.clone(),
                s.acc_mean.to_string(),
                s.acc_std.to_string(),
                s.p95.to_string(),
                s.pma.to_string(),
                s.friedman_rank.to_string(),
            ])
            .map_err(err)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save(&self, json: &Path, csv: &Path) -> Result<()> {
        self.write_json(std::io::BufWriter::new(std::fs::File::create(json)?))?;
        self.write_csv(std::fs::File::create(csv)?)
    }
}
