//! Datasets: in-memory layout, file loaders and synthetic generators.
//!
//! Synthetic data is drawn from `ChaCha8Rng` seeded with
//! `ChaCha8Rng::seed_from_u64(seed)`; normal deviates come from
//! `rand_distr::StandardNormal`. Both are fixed algorithms, so a given
//! `SyntheticSpec` always produces the same matrix.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// `s` dense vectors of dimension `n`, stored row-major, each with an id.
#[derive(Clone, Debug, PartialEq)]
pub struct DataSet {
    dim: usize,
    data: Vec<f64>,
    ids: Vec<u64>,
}

impl DataSet {
    /// Row-major data with ids `0..s`.
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::invalid(format!(
                "{} values do not form rows of length {dim}",
                data.len()
            )));
        }
        let ids = (0..(data.len() / dim) as u64).collect();
        Self::with_ids(dim, data, ids)
    }

    pub fn with_ids(dim: usize, data: Vec<f64>, ids: Vec<u64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        check_dim(ids.len() * dim, data.len())?;
        if ids.is_empty() {
            return Err(Error::Empty("dataset"));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite value in row {} column {}",
                pos / dim,
                pos % dim
            )));
        }
        Ok(DataSet { dim, data, ids })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(Vec::len).ok_or(Error::Empty("dataset"))?;
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            check_dim(dim, row.len())?;
            data.extend_from_slice(row);
        }
        Self::new(dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn id(&self, i: usize) -> u64 {
        self.ids[i]
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    /// Rows at `indices`, keeping their ids.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        let mut ids = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::invalid(format!("row {i} out of range")));
            }
            data.extend_from_slice(self.row(i));
            ids.push(self.ids[i]);
        }
        Self::with_ids(self.dim, data, ids)
    }

    /// Splits into (rows not in `held_out`, rows in `held_out`).
    pub fn partition(&self, held_out: &[usize]) -> Result<(Self, Self)> {
        let mut mask = vec![false; self.len()];
        for &i in held_out {
            if i >= self.len() {
                return Err(Error::invalid(format!("row {i} out of range")));
            }
            mask[i] = true;
        }
        let kept: Vec<usize> = (0..self.len()).filter(|&i| !mask[i]).collect();
        Ok((self.subset(&kept)?, self.subset(held_out)?))
    }
}

/// Reads `fvecs` records: a little-endian `i32` dimension followed by that
/// many little-endian `f32` values, repeated. Ids are record ordinals.
pub fn read_fvecs(mut reader: impl Read) -> Result<DataSet> {
    let mut dim: Option<usize> = None;
    let mut data = Vec::new();
    let mut buf = Vec::new();
    let mut record = 0usize;
    loop {
        let d = match reader.read_i32::<LittleEndian>() {
            Ok(d) => d,
            Err(e) if e.kind() == ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        };
        if d <= 0 {
            return Err(Error::format("fvecs", format!("record {record}"), format!("invalid dimension {d}")));
        }
        let d = d as usize;
        match dim {
            None => dim = Some(d),
            Some(expected) if expected != d => {
                return Err(Error::format(
                    "fvecs",
                    format!("record {record}"),
                    format!("dimension {d} differs from {expected}"),
                ));
            }
            Some(_) => {}
        }
        buf.resize(d, 0.0f32);
        reader.read_f32_into::<LittleEndian>(&mut buf).map_err(|e| {
            if e.kind() == ErrorKind::UnexpectedEof {
                Error::format("fvecs", format!("record {record}"), "truncated record")
            } else {
                e.into()
            }
        })?;
        if let Some(j) = buf.iter().position(|v| !v.is_finite()) {
            return Err(Error::format("fvecs", format!("record {record}"), format!("non-finite value at component {j}")));
        }
        data.extend(buf.iter().map(|&v| v as f64));
        record += 1;
    }
    let dim = dim.ok_or(Error::Empty("fvecs file"))?;
    DataSet::new(dim, data)
}

pub fn load_fvecs(path: impl AsRef<Path>) -> Result<DataSet> {
    read_fvecs(BufReader::new(File::open(path)?))
}

/// Writes the dataset as `fvecs`. Values are narrowed to `f32`.
pub fn write_fvecs(path: impl AsRef<Path>, data: &DataSet) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let dim = i32::try_from(data.dim()).map_err(|_| Error::invalid("dimension exceeds i32"))?;
    for row in data.rows() {
        w.write_i32::<LittleEndian>(dim)?;
        for &v in row {
            w.write_f32::<LittleEndian>(v as f32)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One vector per CSV row. All rows must have the same number of columns.
pub fn read_csv(reader: impl Read, has_header: bool) -> Result<DataSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut dim: Option<usize> = None;
    let mut data = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        match dim {
            None => dim = Some(record.len()),
            Some(d) if d != record.len() => {
                return Err(Error::format(
                    "csv",
                    format!("line {line}"),
                    format!("expected {d} columns, found {}", record.len()),
                ));
            }
            Some(_) => {}
        }
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                Error::format("csv", format!("line {line}"), format!("column {col}: cannot parse {field:?}"))
            })?;
            if !v.is_finite() {
                return Err(Error::format("csv", format!("line {line}"), format!("column {col}: non-finite value")));
            }
            data.push(v);
        }
    }
    let dim = dim.ok_or(Error::Empty("csv file"))?;
    if dim == 0 {
        return Err(Error::Empty("csv row"));
    }
    DataSet::new(dim, data)
}

pub fn load_csv(path: impl AsRef<Path>, has_header: bool) -> Result<DataSet> {
    read_csv(BufReader::new(File::open(path)?), has_header)
}

/// Writes one header-less CSV row per vector at full f64 precision.
pub fn write_csv(path: impl AsRef<Path>, data: &DataSet) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for row in data.rows() {
        w.write_record(row.iter().map(f64::to_string))?;
    }
    w.flush()?;
    Ok(())
}

/// Saves by extension, mirroring [`load_auto`].
pub fn save_auto(path: impl AsRef<Path>, data: &DataSet) -> Result<()> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some("fvecs") => write_fvecs(path, data),
        _ => write_csv(path, data),
    }
}

/// Loads by extension: `.fvecs` as fvecs, anything else as header-less CSV.
pub fn load_auto(path: impl AsRef<Path>) -> Result<DataSet> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some("fvecs") => load_fvecs(path),
        _ => load_csv(path, false),
    }
}

/// Distribution of a synthetic dataset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum SyntheticModel {
    /// Components drawn i.i.d. from U[0, 1].
    IidUniform,
    /// Within each block, `x_j = ρ·g + √(1−ρ²)·e_j` with a shared standard
    /// normal `g` per block and independent standard normals `e_j`; the whole
    /// matrix is then shifted so its minimum is 0.
    BlockCorrelated { block_size: usize, rho: f64 },
    /// 8-bit-image-like rows: a coarse U[0, 255] grid upsampled by
    /// nearest-neighbour with window `window`, plus U[−5, 5] noise, clamped
    /// to [0, 255].
    PiecewiseSmooth { window: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub s: usize,
    pub n: usize,
    pub model: SyntheticModel,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.s == 0 || self.n == 0 {
            return Err(Error::invalid("s and n must be positive"));
        }
        match self.model {
            SyntheticModel::IidUniform => Ok(()),
            SyntheticModel::BlockCorrelated { block_size, rho } => {
                if block_size == 0 || !self.n.is_multiple_of(block_size) {
                    return Err(Error::invalid(format!(
                        "block size {block_size} must divide n = {}",
                        self.n
                    )));
                }
                if !(0.0..=1.0).contains(&rho) {
                    return Err(Error::invalid(format!("rho must lie in [0, 1], got {rho}")));
                }
                Ok(())
            }
            SyntheticModel::PiecewiseSmooth { window } => {
                if window == 0 {
                    return Err(Error::invalid("window must be positive"));
                }
                Ok(())
            }
        }
    }
}

pub fn generate(spec: &SyntheticSpec) -> Result<DataSet> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (s, n) = (spec.s, spec.n);
    let mut data = Vec::with_capacity(s * n);
    match spec.model {
        SyntheticModel::IidUniform => {
            data.extend((0..s * n).map(|_| rng.random::<f64>()));
        }
        SyntheticModel::BlockCorrelated { block_size, rho } => {
            let spread = (1.0 - rho * rho).max(0.0).sqrt();
            for _ in 0..s * (n / block_size) {
                let g: f64 = rng.sample(StandardNormal);
                for _ in 0..block_size {
                    let e: f64 = rng.sample(StandardNormal);
                    data.push(rho * g + spread * e);
                }
            }
            let min = data.iter().copied().fold(f64::INFINITY, f64::min);
            data.iter_mut().for_each(|v| *v -= min);
        }
        SyntheticModel::PiecewiseSmooth { window } => {
            let coarse_len = n.div_ceil(window);
            let mut coarse = vec![0.0; coarse_len];
            for _ in 0..s {
                coarse.iter_mut().for_each(|c| *c = rng.random_range(0.0..=255.0));
                for j in 0..n {
                    let noise: f64 = rng.random_range(-5.0..=5.0);
                    data.push((coarse[j / window] + noise).clamp(0.0, 255.0));
                }
            }
        }
    }
    DataSet::new(n, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn fvecs_bytes(rows: &[&[f32]]) -> Vec<u8> {
        let mut out = Vec::new();
        for r in rows {
            out.extend_from_slice(&(r.len() as i32).to_le_bytes());
            for v in *r {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    #[test]
    fn fvecs_small_fixture() {
        let ds = read_fvecs(Cursor::new(fvecs_bytes(&[&[1.0, 2.0], &[3.0, 4.0]]))).unwrap();
        assert_eq!((ds.len(), ds.dim()), (2, 2));
        assert_eq!(ds.row(1), &[3.0, 4.0]);
        assert_eq!(ds.ids(), &[0, 1]);
    }

    #[test]
    fn fvecs_errors() {
        assert!(matches!(read_fvecs(Cursor::new(Vec::new())), Err(Error::Empty(_))));
        let mixed = fvecs_bytes(&[&[1.0, 2.0], &[3.0, 4.0, 5.0]]);
        let err = read_fvecs(Cursor::new(mixed)).unwrap_err().to_string();
        assert!(err.contains("record 1"), "{err}");
        let mut truncated = fvecs_bytes(&[&[1.0, 2.0], &[3.0, 4.0]]);
        truncated.truncate(truncated.len() - 2);
        assert!(read_fvecs(Cursor::new(truncated)).unwrap_err().to_string().contains("truncated"));
        let nan = fvecs_bytes(&[&[1.0, f32::NAN]]);
        assert!(read_fvecs(Cursor::new(nan)).is_err());
    }

    #[test]
    fn csv_fixtures() {
        let ds = read_csv(Cursor::new("x,y\n1,2\n3.5,-4\n"), true).unwrap();
        assert_eq!(ds.as_slice(), &[1.0, 2.0, 3.5, -4.0]);
        assert!(matches!(read_csv(Cursor::new(""), false), Err(Error::Empty(_))));
        let err = read_csv(Cursor::new("1,2\n3,4,5\n"), false).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        assert!(read_csv(Cursor::new("1,abc\n"), false).is_err());
        assert!(read_csv(Cursor::new("1,NaN\n"), false).is_err());
        assert!(read_csv(Cursor::new("\"1\",\"2\"\n"), false).is_ok());
    }

    #[test]
    fn dataset_validation() {
        assert!(DataSet::new(2, vec![1.0, f64::NAN]).is_err());
        assert!(DataSet::new(2, vec![1.0, 2.0, 3.0]).is_err());
        assert!(DataSet::new(2, vec![]).is_err());
        let ds = DataSet::new(1, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let (kept, held) = ds.partition(&[2, 0]).unwrap();
        assert_eq!(kept.ids(), &[1, 3]);
        assert_eq!(held.ids(), &[2, 0]);
        assert_eq!(held.row(0), &[2.0]);
    }

    #[test]
    fn generation_is_seed_deterministic() {
        for model in [
            SyntheticModel::IidUniform,
            SyntheticModel::BlockCorrelated { block_size: 2, rho: 0.5 },
            SyntheticModel::PiecewiseSmooth { window: 3 },
        ] {
            let spec = SyntheticSpec { s: 10, n: 4, model, seed: 7 };
            let a = generate(&spec).unwrap();
            assert_eq!(a, generate(&spec).unwrap());
            let other = generate(&SyntheticSpec { seed: 8, ..spec }).unwrap();
            assert_ne!(a, other);
        }
    }

    #[test]
    fn generator_ranges() {
        let iid = generate(&SyntheticSpec { s: 100, n: 8, model: SyntheticModel::IidUniform, seed: 1 }).unwrap();
        assert!(iid.as_slice().iter().all(|v| (0.0..1.0).contains(v)));
        let img = generate(&SyntheticSpec { s: 50, n: 48, model: SyntheticModel::PiecewiseSmooth { window: 4 }, seed: 1 }).unwrap();
        assert!(img.as_slice().iter().all(|v| (0.0..=255.0).contains(v)));
        for row in img.rows() {
            for w in row.chunks(4) {
                let spread = w.iter().cloned().fold(f64::MIN, f64::max) - w.iter().cloned().fold(f64::MAX, f64::min);
                assert!(spread <= 10.0);
            }
        }
        let bc = generate(&SyntheticSpec { s: 50, n: 8, model: SyntheticModel::BlockCorrelated { block_size: 4, rho: 0.3 }, seed: 1 }).unwrap();
        assert!(bc.as_slice().iter().all(|v| *v >= 0.0));
        assert_eq!(bc.as_slice().iter().cloned().fold(f64::INFINITY, f64::min), 0.0);
    }

    #[test]
    fn fully_correlated_blocks_are_constant() {
        let ds = generate(&SyntheticSpec {
            s: 20,
            n: 12,
            model: SyntheticModel::BlockCorrelated { block_size: 3, rho: 1.0 },
            seed: 3,
        })
        .unwrap();
        for row in ds.rows() {
            for block in row.chunks(3) {
                assert!(block.iter().all(|v| *v == block[0]));
            }
        }
    }

    #[test]
    fn invalid_specs() {
        let bad = |model| SyntheticSpec { s: 4, n: 6, model, seed: 0 }.validate().is_err();
        assert!(bad(SyntheticModel::BlockCorrelated { block_size: 4, rho: 0.5 }));
        assert!(bad(SyntheticModel::BlockCorrelated { block_size: 3, rho: 1.5 }));
        assert!(bad(SyntheticModel::PiecewiseSmooth { window: 0 }));
        assert!(SyntheticSpec { s: 0, n: 6, model: SyntheticModel::IidUniform, seed: 0 }.validate().is_err());
    }
}
