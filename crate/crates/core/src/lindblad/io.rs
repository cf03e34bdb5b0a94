//! Binary container for states and trajectories.
//!
//! Layout: the 8-byte magic `SPSQRHO1`, a little-endian `u64` header length,
//! a UTF-8 JSON [`Header`], then for every state and every block the entries
//! in row-major order as little-endian `f64` pairs `(re, im)`.

use super::basis::{Basis, BasisKind};
use super::density::DensityMatrix;
use super::evolve::StateTrajectory;
use crate::error::{Error, Result};
use crate::meanfield::ModelParams;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 8] = b"SPSQRHO1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub basis: BasisKind,
    pub n_atoms: usize,
    #[serde(default)]
    pub params: Option<ModelParams>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    /// Sample times; empty for a single state.
    #[serde(default)]
    pub times: Vec<f64>,
    pub states: usize,
    /// Complex entries per state.
    pub len: usize,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl Header {
    pub fn for_basis(basis: &Basis) -> Self {
        Header {
            basis: basis.kind(),
            n_atoms: basis.n_atoms(),
            params: None,
            tolerances: BTreeMap::new(),
            times: Vec::new(),
            states: 1,
            len: basis.len(),
            metadata: BTreeMap::new(),
        }
    }
}

fn write_state(w: &mut impl Write, rho: &DensityMatrix) -> Result<()> {
    let basis = rho.basis();
    let mut bytes = Vec::with_capacity(16 * basis.len());
    for (k, bl) in basis.blocks().iter().enumerate() {
        for a in 0..bl.dim {
            for b in 0..bl.dim {
                let z = rho.get(k, a, b);
                bytes.extend_from_slice(&z.re.to_le_bytes());
                bytes.extend_from_slice(&z.im.to_le_bytes());
            }
        }
    }
    w.write_all(&bytes)?;
    Ok(())
}

fn read_state(r: &mut impl Read, basis: &Basis) -> Result<DensityMatrix> {
    let mut bytes = vec![0u8; 16 * basis.len()];
    r.read_exact(&mut bytes)?;
    let mut rho = DensityMatrix::zeros(basis.clone());
    let mut chunks = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    for (k, bl) in basis.blocks().iter().enumerate() {
        for a in 0..bl.dim {
            for b in 0..bl.dim {
                let re = chunks.next().unwrap();
                let im = chunks.next().unwrap();
                let idx = basis.index(k, a, b);
                rho.data_mut()[idx] = Complex64::new(re, im);
            }
        }
    }
    Ok(rho)
}

fn write_header(w: &mut impl Write, header: &Header) -> Result<()> {
    let json = serde_json::to_vec(header)?;
    w.write_all(MAGIC)?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    Ok(())
}

pub fn read_header(r: &mut impl Read) -> Result<Header> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a state container (bad magic)".into()));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len);
    if len > 1 << 30 {
        return Err(Error::Format(format!("header length {len} is implausible")));
    }
    let mut json = vec![0u8; len as usize];
    r.read_exact(&mut json)?;
    Ok(serde_json::from_slice(&json)?)
}

fn basis_of(header: &Header) -> Result<Basis> {
    let basis = Basis::new(header.basis, header.n_atoms)?;
    if basis.len() != header.len {
        return Err(Error::Format(format!(
            "header says {} entries per state, a {} basis with N={} has {}",
            header.len,
            header.basis,
            header.n_atoms,
            basis.len()
        )));
    }
    Ok(basis)
}

/// Writes one state; `header.states`, `len` and the basis fields are overwritten.
pub fn write_density(w: &mut impl Write, rho: &DensityMatrix, header: &Header) -> Result<()> {
    let mut h = header.clone();
    h.basis = rho.basis().kind();
    h.n_atoms = rho.basis().n_atoms();
    h.len = rho.basis().len();
    h.states = 1;
    write_header(w, &h)?;
    write_state(w, rho)
}

pub fn read_density(r: &mut impl Read) -> Result<(DensityMatrix, Header)> {
    let header = read_header(r)?;
    if header.states != 1 {
        return Err(Error::Format(format!("expected one state, found {}", header.states)));
    }
    let basis = basis_of(&header)?;
    Ok((read_state(r, &basis)?, header))
}

pub fn write_trajectory(w: &mut impl Write, traj: &StateTrajectory, header: &Header) -> Result<()> {
    let first = traj.states.first().ok_or_else(|| Error::Format("empty trajectory".into()))?;
    let mut h = header.clone();
    h.basis = first.basis().kind();
    h.n_atoms = first.basis().n_atoms();
    h.len = first.basis().len();
    h.states = traj.states.len();
    h.times = traj.times.clone();
    write_header(w, &h)?;
    for s in &traj.states {
        write_state(w, s)?;
    }
    Ok(())
}

pub fn read_trajectory(r: &mut impl Read) -> Result<(StateTrajectory, Header)> {
    let header = read_header(r)?;
    if header.times.len() != header.states {
        return Err(Error::Format("times and state count disagree".into()));
    }
    let basis = basis_of(&header)?;
    let states = (0..header.states).map(|_| read_state(r, &basis)).collect::<Result<Vec<_>>>()?;
    Ok((StateTrajectory { times: header.times.clone(), states }, header))
}

pub fn save_density(path: impl AsRef<Path>, rho: &DensityMatrix, header: &Header) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_density(&mut f, rho, header)?;
    f.flush()?;
    Ok(())
}

pub fn load_density(path: impl AsRef<Path>) -> Result<(DensityMatrix, Header)> {
    read_density(&mut std::io::BufReader::new(std::fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        for basis in [Basis::dicke(5).unwrap(), Basis::perm(5).unwrap(), Basis::full(3).unwrap()] {
            let data = (0..basis.len())
                .map(|i| Complex64::new((i as f64 * 0.37).sin() / 3.0, f64::EPSILON * i as f64))
                .collect();
            let rho = DensityMatrix::new(basis.clone(), data).unwrap();
            let mut h = Header::for_basis(&basis);
            h.params = Some(ModelParams::driven(0.1 + 0.2, 1.0 / 3.0, 1.0));
            h.tolerances.insert("ode_tol".into(), 1e-10);
            let mut buf = Vec::new();
            write_density(&mut buf, &rho, &h).unwrap();
            let (back, h2) = read_density(&mut buf.as_slice()).unwrap();
            assert_eq!(h2, h);
            assert!(back.data().iter().zip(rho.data()).all(|(a, b)| a.re.to_bits() == b.re.to_bits()
                && a.im.to_bits() == b.im.to_bits()));
        }
    }

    #[test]
    fn trajectory_round_trip_and_bad_magic() {
        let basis = Basis::dicke(2).unwrap();
        let traj = StateTrajectory {
            times: vec![0.0, 0.5],
            states: vec![DensityMatrix::all_down(basis.clone()), DensityMatrix::maximally_mixed(basis.clone()).unwrap()],
        };
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &traj, &Header::for_basis(&basis)).unwrap();
        let (back, _) = read_trajectory(&mut buf.as_slice()).unwrap();
        assert_eq!(back.times, traj.times);
        assert_eq!(back.states, traj.states);
        buf[0] = b'X';
        assert!(matches!(read_trajectory(&mut buf.as_slice()), Err(Error::Format(_))));
    }
}
