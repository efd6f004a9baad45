//! Parameter sweeps: independent seeded runs per grid point with a tidy CSV
//! emission for external plotting.

use serde::{Deserialize, Serialize};

use super::config::{derive_seed, seed_tags, LinkConfig, PlanConfig};
use super::pipeline::run_link;
use crate::error::{Error, Result};
use crate::metrics::LinkReport;

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    RopDbm,
    OsnrDb,
    CsprBiasV,
    DropDb,
}

impl SweepAxis {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "rop_dbm" => Ok(SweepAxis::RopDbm),
            "osnr_db" => Ok(SweepAxis::OsnrDb),
            "cspr_bias_v" => Ok(SweepAxis::CsprBiasV),
            "drop_db" => Ok(SweepAxis::DropDb),
            other => Err(Error::config(format!(
                "unknown sweep axis '{other}' (rop_dbm|osnr_db|cspr_bias_v|drop_db)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::RopDbm => "rop_dbm",
            SweepAxis::OsnrDb => "osnr_db",
            SweepAxis::CsprBiasV => "cspr_bias_v",
            SweepAxis::DropDb => "drop_db",
        }
    }

    fn apply(&self, cfg: &mut LinkConfig, value: f64) -> Result<()> {
        match self {
            SweepAxis::RopDbm => {
                if cfg.noise.mode != "rop" {
                    return Err(Error::config(
                        "rop_dbm sweep needs noise.mode = \"rop\"",
                    ));
                }
                cfg.noise.value = value;
            }
            SweepAxis::OsnrDb => {
                if cfg.noise.mode != "osnr" {
                    return Err(Error::config(
                        "osnr_db sweep needs noise.mode = \"osnr\"",
                    ));
                }
                cfg.noise.value = value;
            }
            SweepAxis::CsprBiasV => cfg.mzm.bias_v = value,
            SweepAxis::DropDb => match &mut cfg.plan {
                PlanConfig::Auto { drop_db, .. } => *drop_db = value,
                PlanConfig::Explicit { .. } => {
                    return Err(Error::config("drop_db sweep needs an auto plan"));
                }
            },
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub report: Option<LinkReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: String,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    /// Tidy CSV: one row per (point, band) plus an aggregate row per point.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("axis_value,band,ber,ngmi,avg_ngmi,flags\n");
        for point in &self.points {
            match &point.report {
                Some(report) => {
                    for band in &report.bands {
                        let mut flags = Vec::new();
                        if band.flags.ber_hd_ok {
                            flags.push("hd");
                        }
                        if band.flags.ber_sd_ok {
                            flags.push("sd");
                        }
                        out.push_str(&format!(
                            "{},{},{:.6e},{:.6},{:.6},{}\n",
                            point.value,
                            band.i,
                            band.ber,
                            band.ngmi,
                            report.aggregate.avg_ngmi,
                            flags.join("|")
                        ));
                    }
                    out.push_str(&format!(
                        "{},aggregate,{:.6e},{:.6},{:.6},{}\n",
                        point.value,
                        aggregate_ber(report),
                        report.aggregate.avg_ngmi,
                        report.aggregate.avg_ngmi,
                        if report.aggregate.all_bands_hd_ok { "hd" } else { "" },
                    ));
                }
                None => {
                    out.push_str(&format!(
                        "{},error,,,,{}\n",
                        point.value,
                        point.error.as_deref().unwrap_or("unknown")
                    ));
                }
            }
        }
        out
    }
}

/// Bit-count-weighted aggregate BER across bands.
pub fn aggregate_ber(report: &LinkReport) -> f64 {
    let mut errors = 0.0;
    let mut bits = 0.0;
    for band in &report.bands {
        let weight = band.baud_hz * band.m;
        errors += band.ber * weight;
        bits += weight;
    }
    if bits > 0.0 {
        errors / bits
    } else {
        f64::NAN
    }
}

/// Run the axis over the given values. Each point gets its own derived seed;
/// failures are recorded and the sweep continues. Points run on up to
/// `cfg.sweep_workers` threads and merge in order.
pub fn sweep(cfg: &LinkConfig, axis: SweepAxis, values: &[f64]) -> Result<SweepResult> {
    if values.is_empty() {
        return Err(Error::parameter("sweep needs at least one value"));
    }
    // Fail fast if the axis cannot apply to this config at all.
    {
        let mut probe = cfg.clone();
        axis.apply(&mut probe, values[0])?;
    }
    let workers = cfg.sweep_workers.max(1);
    let mut points: Vec<Option<SweepPoint>> = vec![None; values.len()];
    let jobs: Vec<(usize, f64)> = values.iter().cloned().enumerate().collect();
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for chunk in jobs.chunks(values.len().div_ceil(workers)) {
            let chunk = chunk.to_vec();
            let cfg = cfg.clone();
            handles.push(scope.spawn(move || {
                chunk
                    .into_iter()
                    .map(|(idx, value)| {
                        let mut point_cfg = cfg.clone();
                        point_cfg.seed =
                            derive_seed(cfg.seed, seed_tags::SWEEP_BASE + idx as u64);
                        let outcome = axis
                            .apply(&mut point_cfg, value)
                            .and_then(|_| run_link(&point_cfg));
                        let point = match outcome {
                            Ok(report) => SweepPoint {
                                value,
                                report: Some(report),
                                error: None,
                            },
                            Err(e) => SweepPoint {
                                value,
                                report: None,
                                error: Some(e.to_string()),
                            },
                        };
                        (idx, point)
                    })
                    .collect::<Vec<_>>()
            }));
        }
        for handle in handles {
            for (idx, point) in handle.join().expect("sweep worker panicked") {
                points[idx] = Some(point);
            }
        }
    });
    Ok(SweepResult {
        axis: axis.name().to_string(),
        points: points.into_iter().map(|p| p.expect("all points ran")).collect(),
    })
}
