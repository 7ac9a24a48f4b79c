//! Wide per-step CSV for plotting several martingale traces on one axis.

use std::collections::HashMap;

use crate::detector::DetectionReport;
use crate::error::{Error, Result};
use crate::martingale::display_value;

/// One row per step `n`, one `M` column per report, then one alert-marker
/// column per report (1 on the discovery step only).
///
/// Shorter traces are padded with their last value; when that happens a
/// `<name>_padded` column per report flags the padded rows.
pub fn emit_trace_plot_data(reports: &[DetectionReport]) -> Result<String> {
    if reports.is_empty() {
        return Err(Error::Empty("report list"));
    }
    let names = column_names(reports);
    let rows = reports.iter().map(|r| r.records.len()).max().unwrap_or(0);
    let padded = reports.iter().any(|r| r.records.len() != rows);

    let mut header = vec!["n".to_string()];
    header.extend(names.iter().cloned());
    header.extend(names.iter().map(|n| format!("{n}_alert")));
    if padded {
        header.extend(names.iter().map(|n| format!("{n}_padded")));
    }
    let mut out = header.join(",");
    out.push('\n');

    for i in 0..rows {
        let step = i as u64 + 1;
        let mut cells = vec![step.to_string()];
        for r in reports {
            let value = r
                .records
                .get(i)
                .or_else(|| r.records.last())
                .map_or_else(|| "1".to_string(), |rec| display_value(rec.log_value));
            cells.push(value);
        }
        for r in reports {
            cells.push(u8::from(r.discovery_step == Some(step)).to_string());
        }
        if padded {
            for r in reports {
                cells.push(u8::from(i >= r.records.len()).to_string());
            }
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    Ok(out)
}

/// Variant names, suffixed with their position when a variant repeats.
fn column_names(reports: &[DetectionReport]) -> Vec<String> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for r in reports {
        *counts.entry(r.variant.name()).or_default() += 1;
    }
    reports
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let name = r.variant.name();
            if counts[name] > 1 {
                format!("{name}_{i}")
            } else {
                name.to_string()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::DetectorConfig;
    use crate::detector::{StepRecord, Variant};

    fn report(variant: Variant, log_values: &[f64], discovery: Option<u64>) -> DetectionReport {
        let records = log_values
            .iter()
            .enumerate()
            .map(|(i, &l)| StepRecord {
                step: i as u64 + 1,
                episode_id: 100 + i as u64,
                log_value: l,
                statistic: 0.0,
                alerted: discovery.is_some_and(|d| i as u64 + 1 >= d),
                alerted_now: discovery == Some(i as u64 + 1),
            })
            .collect();
        DetectionReport {
            variant,
            horizon: log_values.len() as u64,
            steps: log_values.len() as u64,
            shifted: true,
            discovery_step: discovery,
            discovery_episode: discovery.map(|d| 99 + d),
            false_negative: discovery.is_none(),
            recycled_from: None,
            warnings: vec![],
            epsilon: 0.01,
            config: DetectorConfig::default(),
            records,
        }
    }

    #[test]
    fn three_variants_give_one_row_per_step() {
        let logs = vec![0.0; 200];
        let reports: Vec<_> = Variant::ALL.iter().map(|&v| report(v, &logs, None)).collect();
        let csv = emit_trace_plot_data(&reports).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 201);
        assert_eq!(lines[0], "n,ours,cm,cm_fv,ours_alert,cm_alert,cm_fv_alert");
        assert_eq!(lines[1], "1,1,1,1,0,0,0");
    }

    #[test]
    fn single_variant_has_value_and_marker() {
        let csv = emit_trace_plot_data(&[report(Variant::Ours, &[0.0, 100f64.ln(), 5.0], Some(2))]).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "n,ours,ours_alert");
        assert_eq!(lines[2].split(',').nth(2), Some("1"));
        assert_eq!(lines[3].split(',').nth(2), Some("0"));
    }

    #[test]
    fn empty_list_is_an_error() {
        assert!(matches!(emit_trace_plot_data(&[]), Err(Error::Empty(_))));
    }

    #[test]
    fn short_traces_are_padded_and_flagged() {
        let a = report(Variant::Ours, &[0.0, 1.0, 2.0], Some(3));
        let b = report(Variant::Cm, &[0.5], None);
        let csv = emit_trace_plot_data(&[a, b]).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "n,ours,cm,ours_alert,cm_alert,ours_padded,cm_padded");
        let last: Vec<&str> = lines[3].split(',').collect();
        assert_eq!(last[2], 0.5f64.exp().to_string());
        assert_eq!(&last[5..], ["0", "1"]);
    }

    #[test]
    fn repeated_variants_get_distinct_columns() {
        let a = report(Variant::Cm, &[0.0], None);
        let csv = emit_trace_plot_data(&[a.clone(), a]).unwrap();
        assert!(csv.starts_with("n,cm_0,cm_1,"));
    }
}
