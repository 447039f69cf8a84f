//! CSV, JSON and time-tag text formats.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ringpair_core::analysis::{FringeSweep, SweepPoint};
use ringpair_core::detection::{CoincidenceHistogram, TimeTagStream};
use ringpair_core::resonator::SpectrumPoint;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("line {line}: {message}")]
    Content { line: usize, message: String },
    #[error(transparent)]
    Core(#[from] ringpair_core::error::Error),
}

fn content(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Content {
        line,
        message: message.into(),
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>, FormatError> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

pub fn write_spectrum(path: &Path, points: &[SpectrumPoint]) -> Result<(), FormatError> {
    let mut w = csv_writer(path)?;
    w.write_record(["wavelength_nm", "mean_T", "std_T"])?;
    for p in points {
        w.serialize((p.wavelength_nm, p.mean, p.std))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_histogram(path: &Path, h: &CoincidenceHistogram) -> Result<(), FormatError> {
    let mut w = csv_writer(path)?;
    w.write_record(["delay_ps", "counts"])?;
    for (d, c) in h.delays_ps.iter().zip(&h.counts) {
        w.serialize((d, c))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(serde::Serialize, serde::Deserialize)]
struct SweepRow {
    #[serde(rename = "temperature_C")]
    temperature_c: f64,
    counts_00: u64,
    counts_01: u64,
    accumulation_s: f64,
    repeats: u32,
}

pub fn write_sweep(path: &Path, sweep: &FringeSweep) -> Result<(), FormatError> {
    let mut w = csv_writer(path)?;
    for p in &sweep.points {
        w.serialize(SweepRow {
            temperature_c: p.temperature_c,
            counts_00: p.counts_00,
            counts_01: p.counts_01,
            accumulation_s: p.accumulation_s,
            repeats: sweep.repeats,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sweep<R: Read>(reader: R) -> Result<FringeSweep, FormatError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut points = Vec::new();
    let mut repeats = None;
    for (i, row) in r.deserialize::<SweepRow>().enumerate() {
        let row = row?;
        if *repeats.get_or_insert(row.repeats) != row.repeats {
            return Err(content(i + 2, "repeats differs between rows"));
        }
        points.push(SweepPoint {
            temperature_c: row.temperature_c,
            counts_00: row.counts_00,
            counts_01: row.counts_01,
            accumulation_s: row.accumulation_s,
        });
    }
    Ok(FringeSweep {
        points,
        repeats: repeats.ok_or_else(|| content(1, "no sweep rows"))?,
    })
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), FormatError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Header of a time-tag file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TagHeader {
    pub duration_s: f64,
    pub seed: u64,
}

/// Writes streams as `channel_id,tag_ps` rows after a `# key = value` header.
pub fn write_tags<W: Write>(mut out: W, header: TagHeader, streams: &[&TimeTagStream]) -> Result<(), FormatError> {
    writeln!(out, "# duration_s = {}", header.duration_s)?;
    writeln!(out, "# seed = {}", header.seed)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["channel_id", "tag_ps"])?;
    for s in streams {
        for t in s.tags() {
            w.write_record([s.channel_id.as_str(), &t.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a tag file back into one stream per channel, in order of first appearance.
pub fn read_tags<R: Read>(input: R) -> Result<(TagHeader, Vec<TimeTagStream>), FormatError> {
    let mut input = BufReader::new(input);
    let (mut duration_s, mut seed) = (None, None);
    let mut lineno = 0;
    let mut line = String::new();
    loop {
        let buf = input.fill_buf()?;
        if buf.first() != Some(&b'#') {
            break;
        }
        line.clear();
        input.read_line(&mut line)?;
        lineno += 1;
        let body = line.trim_start_matches('#').trim();
        let Some((k, v)) = body.split_once('=') else {
            continue;
        };
        match k.trim() {
            "duration_s" => duration_s = Some(v.trim().parse::<f64>().map_err(|e| content(lineno, e.to_string()))?),
            "seed" => seed = Some(v.trim().parse::<u64>().map_err(|e| content(lineno, e.to_string()))?),
            _ => {}
        }
    }
    let header = TagHeader {
        duration_s: duration_s.ok_or_else(|| content(lineno, "missing '# duration_s' header"))?,
        seed: seed.ok_or_else(|| content(lineno, "missing '# seed' header"))?,
    };
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut channels: Vec<(String, Vec<u64>)> = Vec::new();
    for rec in r.deserialize::<(String, u64)>() {
        let (id, tag) = rec?;
        match channels.iter_mut().find(|(c, _)| *c == id) {
            Some((_, tags)) => tags.push(tag),
            None => channels.push((id, vec![tag])),
        }
    }
    let streams = channels
        .into_iter()
        .map(|(id, tags)| TimeTagStream::new(id, header.duration_s, tags))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((header, streams))
}
