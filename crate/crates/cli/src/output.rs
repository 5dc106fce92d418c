//! Trace CSV and summary JSON artifacts.
//!
//! Reals in the CSV are written in scientific notation with 17 significant
//! digits, which round-trips every `f64` exactly. JSON uses the shortest
//! representation that round-trips.

use std::io::{BufWriter, Read, Write};
use std::path::Path;

use debtsim::analysis::{kolmogorov_sum_stats, lil_stats, ssc_stats, DriftEstimate, LilStats, SscStats};
use debtsim::distributions::sigma_p_tau;
use debtsim::engine::{MartingaleTrace, RunMeta, RunResult, SeriesRow, RNG_ALGORITHM};
use debtsim::model::SystemConfig;
use serde::Serialize;

use crate::error::{CliError, CliResult};

pub fn trace_header(n: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for prefix in ["d", "u", "g"] {
        h.extend((1..=n).map(|j| format!("{prefix}_{j}")));
    }
    h.push("idle".into());
    h.push("phi".into());
    h.extend((1..=n).map(|j| format!("M_{j}")));
    h.extend((1..=n).map(|j| format!("scaled_d_{j}")));
    h
}

pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_trace_csv<W: Write>(out: W, n: usize, rows: &[SeriesRow<f64>]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trace_header(n))?;
    let mut rec: Vec<String> = Vec::with_capacity(6 * n + 3);
    for row in rows {
        rec.clear();
        rec.push(row.t.to_string());
        rec.extend(row.debts.iter().map(|&d| fmt_real(d)));
        rec.extend(row.attempts.iter().map(|u| u.to_string()));
        rec.extend(row.deliveries.iter().map(|&g| (g as u8).to_string()));
        rec.push(row.idle.to_string());
        rec.push(fmt_real(row.phi));
        rec.extend(row.martingale.iter().map(|&m| fmt_real(m)));
        rec.extend(row.scaled_debts.iter().map(|&d| fmt_real(d)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trace written by [`write_trace_csv`]. `weighted_debts` is
/// recomputed from the config; `idle_cumulative` sums the recorded rows only,
/// so it is exact only for traces with stride 1.
pub fn read_trace_csv<R: Read>(input: R, config: &SystemConfig<f64>) -> CliResult<Vec<SeriesRow<f64>>> {
    let bad = |msg: String| CliError::Config(format!("trace: {msg}"));
    let mut r = csv::Reader::from_reader(input);
    let n = config.n_clients();
    let header: Vec<String> = r
        .headers()
        .map_err(|e| bad(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header != trace_header(n) {
        return Err(bad(format!(
            "header does not match a {n}-client trace: {}",
            header.join(",")
        )));
    }
    let p = config.reliabilities();
    let mut rows = Vec::new();
    let mut idle_cumulative = 0u64;
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let at = |i: usize| rec.get(i).unwrap_or("");
        let real = |i: usize| {
            at(i).parse::<f64>()
                .map_err(|e| bad(format!("row {}, column {}: {e}", line + 2, header[i])))
        };
        let int = |i: usize| {
            at(i).parse::<u64>()
                .map_err(|e| bad(format!("row {}, column {}: {e}", line + 2, header[i])))
        };
        let block = |k: usize| 1 + k * n..1 + (k + 1) * n;
        let debts: Vec<f64> = block(0).map(real).collect::<CliResult<_>>()?;
        let attempts: Vec<u32> = block(1).map(|i| int(i).map(|v| v as u32)).collect::<CliResult<_>>()?;
        let deliveries: Vec<bool> = block(2)
            .map(|i| match at(i) {
                "0" => Ok(false),
                "1" => Ok(true),
                v => Err(bad(format!("row {}, column {}: {v:?} is not 0 or 1", line + 2, header[i]))),
            })
            .collect::<CliResult<_>>()?;
        let idle = int(1 + 3 * n)? as u32;
        idle_cumulative += idle as u64;
        let m0 = 3 + 3 * n;
        rows.push(SeriesRow {
            t: int(0)?,
            weighted_debts: debts.iter().zip(p).map(|(d, p)| d / p).collect(),
            debts,
            attempts,
            deliveries,
            idle,
            phi: real(2 + 3 * n)?,
            martingale: (m0..m0 + n).map(real).collect::<CliResult<_>>()?,
            scaled_debts: (m0 + n..m0 + 2 * n).map(real).collect::<CliResult<_>>()?,
            idle_cumulative,
        });
    }
    Ok(rows)
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> CliResult<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    let mut w = BufWriter::new(tmp);
    body(&mut w).map_err(|e| CliError::io(path, e))?;
    let tmp = w.into_inner().map_err(|e| CliError::io(path, e.into_error()))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

/// Per-run JSON written next to each trace.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub rng_algorithm: &'static str,
    pub meta: RunMeta,
    pub final_debts: Vec<f64>,
    pub delivered: Vec<u64>,
    pub attempt_totals: Vec<u64>,
    pub idle_total: u64,
    pub final_martingale: MartingaleTrace<f64>,
    pub max_debt_spread: f64,
    pub max_delivery_spread: u64,
    pub lil: Option<LilStats<f64>>,
    /// Why `lil` is missing, e.g. a run shorter than `t_min`.
    pub lil_error: Option<String>,
    pub ssc: SscStats<f64>,
    /// Window extremes of `Σ d_j/(p_j φ)`.
    pub kolmogorov: Option<(f64, f64)>,
    pub sigma_p_tau: Option<f64>,
    pub drift: Option<DriftEstimate<f64>>,
}

impl RunSummary {
    pub fn new(
        result: &RunResult<f64>,
        config: &SystemConfig<f64>,
        config_hash: &str,
        drift: Option<DriftEstimate<f64>>,
    ) -> Self {
        let (lil, lil_error) = match lil_stats(result, config, result.meta.t_min) {
            Ok(a) => (Some(a), None),
            Err(e) => (None, Some(e.to_string())),
        };
        RunSummary {
            config_hash: config_hash.to_string(),
            rng_algorithm: RNG_ALGORITHM,
            meta: result.meta.clone(),
            final_debts: result.final_state.debts.clone(),
            delivered: result.final_state.delivered.clone(),
            attempt_totals: result.attempt_totals.clone(),
            idle_total: result.idle_total,
            final_martingale: result.final_martingale.clone(),
            max_debt_spread: result.max_debt_spread,
            max_delivery_spread: result.max_delivery_spread,
            lil,
            lil_error,
            ssc: ssc_stats(result, config),
            kolmogorov: kolmogorov_sum_stats(result).ok(),
            sigma_p_tau: sigma_p_tau(&config.channel).ok(),
            drift,
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("summary serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use debtsim::engine::{run, RunConfig};
    use debtsim::policy::PolicySpec;

    #[test]
    fn header_layout() {
        assert_eq!(
            trace_header(2).join(","),
            "t,d_1,d_2,u_1,u_2,g_1,g_2,idle,phi,M_1,M_2,scaled_d_1,scaled_d_2"
        );
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let cfg = SystemConfig::new(3, vec![0.37, 0.81, 0.55], vec![0.3, 0.3, 0.3]).unwrap();
        let r = run(&RunConfig::new(cfg.clone(), PolicySpec::mwdf(), 500, 11)).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, 3, &r.series).unwrap();
        let back = read_trace_csv(buf.as_slice(), &cfg).unwrap();
        assert_eq!(back.len(), r.series.len());
        for (a, b) in r.series.iter().zip(&back) {
            assert_eq!(a.t, b.t);
            assert_eq!(a.debts, b.debts);
            assert_eq!(a.attempts, b.attempts);
            assert_eq!(a.deliveries, b.deliveries);
            assert_eq!(a.idle, b.idle);
            assert_eq!(a.phi.to_bits(), b.phi.to_bits());
            assert_eq!(a.martingale, b.martingale);
            assert_eq!(a.scaled_debts, b.scaled_debts);
            assert_eq!(a.weighted_debts, b.weighted_debts);
            assert_eq!(a.idle_cumulative, b.idle_cumulative);
        }
    }

    #[test]
    fn reals_keep_seventeen_digits() {
        assert_eq!(fmt_real(0.1), "1.0000000000000001e-1");
        for x in [1.0 / 3.0, -2.5e-300, 123456.789, 0.0] {
            assert_eq!(fmt_real(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn rejects_foreign_headers() {
        let cfg = SystemConfig::new(1, vec![0.5, 0.5], vec![0.25, 0.25]).unwrap();
        let err = read_trace_csv("t,d_1\n1,0.5\n".as_bytes(), &cfg).unwrap_err();
        assert!(err.to_string().contains("header"));
    }
}
