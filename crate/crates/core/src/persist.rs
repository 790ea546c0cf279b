//! Binary index container.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! magic          8 bytes   "SUBSPIDX"
//! version        u32       1
//! norm kind      u8        0 = finite, 1 = infinity
//! norm exponent  f64       p (0.0 when infinite)
//! mode           u8        0 = orthogonal, 1 = adaptive
//! level count    u32       t + 1
//! dims           u32 × (t + 1)
//! item count     u64       s
//! ids            u64 × s
//! base vectors   f64 × s·dim(U_0)
//! for each level i = 1..=t:
//!   directions   f64 × dim(U_{i−1})    adaptive only; block j occupies
//!                                      [j·m, (j+1)·m)
//!   features     f32 × s·dim(U_i)      row-major
//! ```
//!
//! Features are narrowed to f32. A loaded index widens its pruning
//! thresholds by the f32 unit roundoff so no true match is lost; matches are
//! still decided on the f64 base vectors.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::dataset::DataSet;
use crate::error::{Error, Result};
use crate::norms::NormOrder;
use crate::projection::{BlockPartition, ProjectionLevel, ProjectionMode};
use crate::tree::{BuildDiagnostics, DimensionSchedule, SubspaceIndex, F32_FEATURE_TOLERANCE};

const MAGIC: &[u8; 8] = b"SUBSPIDX";
pub const FORMAT_VERSION: u32 = 1;

pub fn write_index(mut w: impl Write, index: &SubspaceIndex) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(FORMAT_VERSION)?;
    match index.norm {
        NormOrder::Finite(p) => {
            w.write_u8(0)?;
            w.write_f64::<LittleEndian>(p)?;
        }
        NormOrder::Infinity => {
            w.write_u8(1)?;
            w.write_f64::<LittleEndian>(0.0)?;
        }
    }
    w.write_u8(match index.mode {
        ProjectionMode::Orthogonal => 0,
        ProjectionMode::Adaptive => 1,
    })?;
    let dims = index.schedule.dims();
    w.write_u32::<LittleEndian>(u32_of(dims.len())?)?;
    for &d in dims {
        w.write_u32::<LittleEndian>(u32_of(d)?)?;
    }
    let base = &index.base;
    w.write_u64::<LittleEndian>(base.len() as u64)?;
    for &id in base.ids() {
        w.write_u64::<LittleEndian>(id)?;
    }
    for &v in base.as_slice() {
        w.write_f64::<LittleEndian>(v)?;
    }
    for (level, features) in index.levels.iter().zip(&index.features) {
        if index.mode == ProjectionMode::Adaptive {
            for proj in level.projectors() {
                for &v in proj.direction().expect("adaptive level") {
                    w.write_f64::<LittleEndian>(v)?;
                }
            }
        }
        for &v in features {
            let narrow = v as f32;
            if !narrow.is_finite() {
                return Err(Error::invalid(format!("feature {v} does not fit in f32")));
            }
            w.write_f32::<LittleEndian>(narrow)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn u32_of(v: usize) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::invalid(format!("{v} exceeds u32")))
}

fn truncated(e: std::io::Error, section: &str) -> Error {
    if e.kind() == ErrorKind::UnexpectedEof {
        Error::format("index file", section, "truncated")
    } else {
        e.into()
    }
}

pub fn read_index(r: impl Read) -> Result<SubspaceIndex> {
    let mut r = r;
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|e| truncated(e, "header"))?;
    if &magic != MAGIC {
        return Err(Error::format("index file", "header", "bad magic"));
    }
    let version = r.read_u32::<LittleEndian>().map_err(|e| truncated(e, "header"))?;
    if version != FORMAT_VERSION {
        return Err(Error::format("index file", "header", format!("unsupported version {version}")));
    }
    let kind = r.read_u8().map_err(|e| truncated(e, "header"))?;
    let exponent = r.read_f64::<LittleEndian>().map_err(|e| truncated(e, "header"))?;
    let norm = match kind {
        0 => NormOrder::finite(exponent)?,
        1 => NormOrder::Infinity,
        k => return Err(Error::format("index file", "header", format!("bad norm kind {k}"))),
    };
    let mode = match r.read_u8().map_err(|e| truncated(e, "header"))? {
        0 => ProjectionMode::Orthogonal,
        1 => ProjectionMode::Adaptive,
        m => return Err(Error::format("index file", "header", format!("bad mode {m}"))),
    };
    let count = r.read_u32::<LittleEndian>().map_err(|e| truncated(e, "schedule"))? as usize;
    if count > 64 {
        return Err(Error::format("index file", "schedule", format!("implausible level count {count}")));
    }
    let dims = (0..count)
        .map(|_| r.read_u32::<LittleEndian>().map(|d| d as usize))
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| truncated(e, "schedule"))?;
    let schedule = DimensionSchedule::new(dims)?;
    let s = r.read_u64::<LittleEndian>().map_err(|e| truncated(e, "ids"))? as usize;

    let mut ids = vec![0u64; s];
    r.read_u64_into::<LittleEndian>(&mut ids).map_err(|e| truncated(e, "ids"))?;
    let mut base = vec![0f64; s.checked_mul(schedule.input_dim()).ok_or(Error::invalid("size overflow"))?];
    r.read_f64_into::<LittleEndian>(&mut base).map_err(|e| truncated(e, "base vectors"))?;
    let base = DataSet::with_ids(schedule.input_dim(), base, ids)?;

    let mut levels = Vec::with_capacity(schedule.depth());
    let mut features = Vec::with_capacity(schedule.depth());
    let mut diagnostics = BuildDiagnostics::default();
    for i in 1..=schedule.depth() {
        let section = format!("level {i}");
        let partition = BlockPartition::new(schedule.dim(i - 1), schedule.dim(i))?;
        let level = match mode {
            ProjectionMode::Orthogonal => ProjectionLevel::orthogonal(partition, norm),
            ProjectionMode::Adaptive => {
                let mut flat = vec![0f64; partition.dim_in()];
                r.read_f64_into::<LittleEndian>(&mut flat).map_err(|e| truncated(e, &section))?;
                let directions = flat
                    .chunks_exact(partition.block_size())
                    .map(<[f64]>::to_vec)
                    .collect();
                ProjectionLevel::adaptive(partition, directions, norm)?
            }
        };
        let mut narrow = vec![0f32; s * schedule.dim(i)];
        r.read_f32_into::<LittleEndian>(&mut narrow).map_err(|e| truncated(e, &section))?;
        if narrow.iter().any(|v| !v.is_finite()) {
            return Err(Error::format("index file", section, "non-finite feature"));
        }
        diagnostics.diversion.push(level.diversion_report());
        features.push(narrow.into_iter().map(f64::from).collect());
        levels.push(level);
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::format("index file", "trailer", "unexpected trailing bytes"));
    }
    Ok(SubspaceIndex {
        schedule,
        norm,
        mode,
        levels,
        features,
        base,
        feature_tolerance: F32_FEATURE_TOLERANCE,
        diagnostics,
    })
}

pub fn save_index(path: impl AsRef<Path>, index: &SubspaceIndex) -> Result<()> {
    write_index(BufWriter::new(File::create(path)?), index)
}

pub fn load_index(path: impl AsRef<Path>) -> Result<SubspaceIndex> {
    read_index(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate, SyntheticModel, SyntheticSpec};

    fn sample_index(mode: ProjectionMode, norm: NormOrder) -> SubspaceIndex {
        let data = generate(&SyntheticSpec {
            s: 300,
            n: 16,
            model: SyntheticModel::BlockCorrelated { block_size: 4, rho: 0.7 },
            seed: 12,
        })
        .unwrap();
        SubspaceIndex::build(&data, &"16,4,2".parse().unwrap(), mode, norm).unwrap()
    }

    #[test]
    fn round_trip_preserves_index_at_stated_precision() {
        for (mode, norm) in [
            (ProjectionMode::Orthogonal, NormOrder::L1),
            (ProjectionMode::Adaptive, NormOrder::L2),
            (ProjectionMode::Adaptive, NormOrder::LINF),
        ] {
            let index = sample_index(mode, norm);
            let mut bytes = Vec::new();
            write_index(&mut bytes, &index).unwrap();
            let back = read_index(bytes.as_slice()).unwrap();
            assert_eq!(back.schedule, index.schedule);
            assert_eq!(back.norm, index.norm);
            assert_eq!(back.mode, index.mode);
            assert_eq!(back.base, index.base);
            assert_eq!(back.levels, index.levels);
            for (a, b) in back.features.iter().zip(&index.features) {
                assert!(a.iter().zip(b).all(|(x, y)| *x == (*y as f32) as f64));
            }
            let mut again = Vec::new();
            write_index(&mut again, &back).unwrap();
            assert_eq!(bytes, again);
        }
    }

    #[test]
    fn loaded_index_stays_exact() {
        let index = sample_index(ProjectionMode::Adaptive, NormOrder::L2);
        let mut bytes = Vec::new();
        write_index(&mut bytes, &index).unwrap();
        let back = read_index(bytes.as_slice()).unwrap();
        for q in 0..30 {
            let y = index.data().row(q * 7).to_vec();
            for eps in [0.5, 1.5, 3.0] {
                let a = index.range_query(&y, eps).unwrap();
                let b = back.range_query(&y, eps).unwrap();
                assert_eq!(a.matches, b.matches);
            }
        }
    }

    #[test]
    fn rejects_corrupt_input() {
        let index = sample_index(ProjectionMode::Orthogonal, NormOrder::L2);
        let mut bytes = Vec::new();
        write_index(&mut bytes, &index).unwrap();
        assert!(read_index(&bytes[..bytes.len() - 3]).unwrap_err().to_string().contains("truncated"));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(read_index(bad.as_slice()).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(read_index(extra.as_slice()).is_err());
        let mut version = bytes;
        version[8] = 9;
        assert!(read_index(version.as_slice()).is_err());
    }
}
