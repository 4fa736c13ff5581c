//! Sample log persistence.
//!
//! One CSV row per sample with a fixed column order:
//! `t,cpu,mem,io_dev0..io_devN,net_rx,net_tx,power`. The power column is
//! empty when no meter was present. Floats are written in shortest
//! round-trip form, so reading a log back reproduces the samples exactly.

use std::io::{Read, Write};

use super::{MonitorError, UtilizationSample};

pub fn write_sample_log<W: Write>(
    samples: &[UtilizationSample],
    writer: W,
) -> Result<(), MonitorError> {
    let devices = samples.iter().map(|s| s.device_io.len()).max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["t".to_string(), "cpu".to_string(), "mem".to_string()];
    header.extend((0..devices).map(|i| format!("io_dev{i}")));
    header.extend(["net_rx".to_string(), "net_tx".to_string(), "power".to_string()]);
    w.write_record(&header)
        .map_err(|e| MonitorError::Format(e.to_string()))?;
    for s in samples {
        let mut record = vec![s.timestamp.to_string(), s.cpu.to_string(), s.memory.to_string()];
        for i in 0..devices {
            record.push(s.device_io.get(i).map(|v| v.to_string()).unwrap_or_default());
        }
        record.push(s.net_rx.to_string());
        record.push(s.net_tx.to_string());
        record.push(s.power.map(|p| p.to_string()).unwrap_or_default());
        w.write_record(&record)
            .map_err(|e| MonitorError::Format(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sample_log<R: Read>(reader: R) -> Result<Vec<UtilizationSample>, MonitorError> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r
        .headers()
        .map_err(|e| MonitorError::Format(e.to_string()))?
        .clone();
    let devices = header.iter().filter(|h| h.starts_with("io_dev")).count();
    let expected = 3 + devices + 3;
    if header.len() != expected
        || header.get(0) != Some("t")
        || header.get(header.len() - 1) != Some("power")
    {
        return Err(MonitorError::Format(format!(
            "unexpected sample log header: {header:?}"
        )));
    }
    let parse = |field: &str, name: &str| -> Result<f64, MonitorError> {
        field
            .parse()
            .map_err(|_| MonitorError::Format(format!("bad {name} value: {field:?}")))
    };
    let mut samples = Vec::new();
    for row in r.records() {
        let row = row.map_err(|e| MonitorError::Format(e.to_string()))?;
        if row.len() != expected {
            return Err(MonitorError::Format(format!(
                "row has {} fields, expected {expected}",
                row.len()
            )));
        }
        let mut device_io = Vec::with_capacity(devices);
        for i in 0..devices {
            let field = &row[3 + i];
            if !field.is_empty() {
                device_io.push(parse(field, "device_io")?);
            }
        }
        let power_field = &row[expected - 1];
        samples.push(UtilizationSample {
            timestamp: parse(&row[0], "t")?,
            cpu: parse(&row[1], "cpu")?,
            memory: parse(&row[2], "mem")?,
            device_io,
            net_rx: parse(&row[expected - 3], "net_rx")?,
            net_tx: parse(&row[expected - 2], "net_tx")?,
            power: if power_field.is_empty() {
                None
            } else {
                Some(parse(power_field, "power")?)
            },
        });
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monitor::{summarize, SummarizeContext};

    fn samples() -> Vec<UtilizationSample> {
        (0..6)
            .map(|i| UtilizationSample {
                timestamp: (i + 1) as f64 * 0.5,
                cpu: 0.1 + 0.137 * i as f64,
                memory: 1.0 / (i + 3) as f64,
                device_io: vec![1234.5 + i as f64, 999.25],
                net_rx: 1e6 / (i + 1) as f64,
                net_tx: 7.0,
                power: (i % 2 == 0).then(|| 60.0 + i as f64 / 3.0),
            })
            .collect()
    }

    #[test]
    fn log_round_trips_bit_exactly() {
        let original = samples();
        let mut buf = Vec::new();
        write_sample_log(&original, &mut buf).unwrap();
        let restored = read_sample_log(&buf[..]).unwrap();
        assert_eq!(original, restored);
    }

    #[test]
    fn summarize_is_reproducible_from_a_saved_log() {
        let original = samples();
        let ctx = SummarizeContext {
            frontend_net_bw: Some(2e6),
            backend_net_bw: Some(1e3),
            device_io_capacity: Some(4e3),
            device_count: 2,
            connector_cap: Some(4),
            bottleneck_threshold: 0.9,
        };
        let direct = summarize(&original, 1..6, &ctx).unwrap();
        let mut buf = Vec::new();
        write_sample_log(&original, &mut buf).unwrap();
        let replayed = summarize(&read_sample_log(&buf[..]).unwrap(), 1..6, &ctx).unwrap();
        assert_eq!(direct, replayed);
    }
}
