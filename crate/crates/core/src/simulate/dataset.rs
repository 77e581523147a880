//! Replicated datasets and their CSV form.
//!
//! Observations go to `rep,obs,comp_1..comp_k`; partitions, when present,
//! to a sibling `<stem>.partitions.csv` with columns `rep,obs,partition`.
//! Replicate and observation numbers are 0-based, partition labels 1-based.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::partition::Partition;

/// `N` observations of a `k`-variate vector, optionally with the partitions
/// recorded by the simulator.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub k: usize,
    pub obs: Vec<Vec<f64>>,
    pub partitions: Option<Vec<Partition>>,
}

impl Dataset {
    pub fn new(k: usize, obs: Vec<Vec<f64>>) -> Result<Self> {
        let d = Self { k, obs, partitions: None };
        d.validate()?;
        Ok(d)
    }

    pub fn with_partitions(mut self, partitions: Vec<Partition>) -> Result<Self> {
        self.partitions = Some(partitions);
        self.validate()?;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.obs.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidArgument("dataset needs k >= 1".into()));
        }
        for (l, z) in self.obs.iter().enumerate() {
            if z.len() != self.k {
                return Err(Error::InvalidArgument(format!("observation {l} has {} components, expected {}", z.len(), self.k)));
            }
            if z.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!("observation {l} has non-finite values")));
            }
        }
        if let Some(p) = &self.partitions {
            if p.len() != self.obs.len() {
                return Err(Error::InvalidArgument(format!("{} partitions for {} observations", p.len(), self.obs.len())));
            }
            if let Some(bad) = p.iter().position(|t| t.k() != self.k) {
                return Err(Error::InvalidArgument(format!("partition {bad} is not on {} components", self.k)));
            }
        }
        Ok(())
    }

    /// Column `i` across observations.
    pub fn column(&self, i: usize) -> Vec<f64> {
        self.obs.iter().map(|z| z[i]).collect()
    }
}

/// `data.csv` -> `data.partitions.csv`.
pub fn partitions_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.partitions.csv"))
}

/// Writes replicates to `path` (and the partition sibling if any replicate
/// carries partitions). All replicates must share `k`.
pub fn write_csv(path: &Path, reps: &[Dataset]) -> Result<()> {
    let k = reps.first().map(|d| d.k).unwrap_or(1);
    if reps.iter().any(|d| d.k != k) {
        return Err(Error::InvalidArgument("replicates differ in dimension".into()));
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["rep".to_string(), "obs".to_string()];
    header.extend((1..=k).map(|i| format!("comp_{i}")));
    w.write_record(&header)?;
    for (r, d) in reps.iter().enumerate() {
        for (l, z) in d.obs.iter().enumerate() {
            let mut rec = vec![r.to_string(), l.to_string()];
            rec.extend(z.iter().map(|v| format!("{v:?}")));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    if reps.iter().any(|d| d.partitions.is_some()) {
        let mut w = csv::Writer::from_path(partitions_path(path))?;
        w.write_record(["rep", "obs", "partition"])?;
        for (r, d) in reps.iter().enumerate() {
            for (l, p) in d.partitions.iter().flatten().enumerate() {
                w.write_record([r.to_string(), l.to_string(), p.to_string()])?;
            }
        }
        w.flush()?;
    }
    Ok(())
}

fn field<'a>(rec: &'a csv::StringRecord, i: usize, line: usize) -> Result<&'a str> {
    rec.get(i).ok_or_else(|| Error::Parse(format!("line {line}: missing column {i}")))
}

fn index(s: &str, what: &str, line: usize) -> Result<usize> {
    s.trim().parse().map_err(|_| Error::Parse(format!("line {line}: bad {what} {s:?}")))
}

/// Reads replicates written by [`write_csv`], including partitions when the
/// sibling file exists. Rows must be grouped by replicate in order.
pub fn read_csv(path: &Path) -> Result<Vec<Dataset>> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    if header.len() < 3 || &header[0] != "rep" || &header[1] != "obs" {
        return Err(Error::Parse(format!("{}: expected header rep,obs,comp_1..", path.display())));
    }
    let k = header.len() - 2;
    let mut reps: Vec<Dataset> = Vec::new();
    for (n, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = n + 2;
        let rep = index(field(&rec, 0, line)?, "rep", line)?;
        let obs = index(field(&rec, 1, line)?, "obs", line)?;
        if rep == reps.len() {
            reps.push(Dataset { k, obs: Vec::new(), partitions: None });
        } else if rep + 1 != reps.len() {
            return Err(Error::Parse(format!("line {line}: replicate {rep} out of order")));
        }
        let d = reps.last_mut().expect("pushed");
        if obs != d.obs.len() {
            return Err(Error::Parse(format!("line {line}: observation {obs} out of order")));
        }
        let z = (0..k)
            .map(|i| {
                let s = field(&rec, i + 2, line)?;
                s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("line {line}: bad value {s:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        d.obs.push(z);
    }
    let ppath = partitions_path(path);
    if ppath.exists() {
        let mut r = csv::Reader::from_path(&ppath)?;
        let mut parts: Vec<Vec<Partition>> = vec![Vec::new(); reps.len()];
        for (n, rec) in r.records().enumerate() {
            let rec = rec?;
            let line = n + 2;
            let rep = index(field(&rec, 0, line)?, "rep", line)?;
            let obs = index(field(&rec, 1, line)?, "obs", line)?;
            let slot = parts.get_mut(rep).ok_or_else(|| Error::Parse(format!("line {line}: unknown replicate {rep}")))?;
            if obs != slot.len() {
                return Err(Error::Parse(format!("line {line}: partition {obs} out of order")));
            }
            slot.push(Partition::parse_with_k(field(&rec, 2, line)?, k)?);
        }
        for (d, p) in reps.iter_mut().zip(parts) {
            if !p.is_empty() {
                d.partitions = Some(p);
            }
        }
    }
    for d in &reps {
        d.validate()?;
    }
    Ok(reps)
}
