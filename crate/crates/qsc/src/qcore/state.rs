//! Density matrices and pure states over labeled tensor factors.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::linalg::{eigvalsh, hermitian_residual, max_abs, re, CMat, CVec, C64};

use super::factor::{total_dim, validate_factors, Factor};

/// A density matrix: PSD, unit-trace, Hermitian operator with named
/// tensor factors.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    factors: Vec<Factor>,
    matrix: CMat,
}

impl DensityMatrix {
    /// Validating constructor with default tolerances.
    pub fn new(factors: Vec<Factor>, matrix: CMat) -> Result<Self> {
        Self::new_with(factors, matrix, &Tolerances::default())
    }

    /// Validating constructor.
    pub fn new_with(factors: Vec<Factor>, matrix: CMat, tol: &Tolerances) -> Result<Self> {
        validate_factors(&factors)?;
        let d = total_dim(&factors);
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: matrix.nrows() });
        }
        if d > tol.max_dim {
            return Err(Error::BudgetExceeded {
                what: "density matrix".into(),
                needed: d,
                budget: tol.max_dim,
            });
        }
        let herm = hermitian_residual(&matrix);
        if herm > tol.hermitian {
            return Err(Error::InvalidState { what: "not Hermitian".into(), residual: herm });
        }
        let tr = matrix.trace();
        let tr_res = (tr - re(1.0)).norm();
        if tr_res > tol.trace {
            return Err(Error::InvalidState { what: "trace differs from 1".into(), residual: tr_res });
        }
        let min_eig = eigvalsh(&matrix).into_iter().fold(f64::INFINITY, f64::min);
        if min_eig < -tol.psd {
            return Err(Error::InvalidState {
                what: "negative eigenvalue".into(),
                residual: -min_eig,
            });
        }
        Ok(DensityMatrix { factors, matrix })
    }

    /// Construct without validation. For internal use on matrices that are
    /// valid by construction (isometric conjugations, partial traces of
    /// valid states, ...).
    pub(crate) fn trusted(factors: Vec<Factor>, matrix: CMat) -> Self {
        debug_assert_eq!(total_dim(&factors), matrix.nrows());
        DensityMatrix { factors, matrix }
    }

    /// Maximally mixed state on the given factors.
    pub fn maximally_mixed(factors: Vec<Factor>) -> Result<Self> {
        validate_factors(&factors)?;
        let d = total_dim(&factors);
        let m = CMat::identity(d, d).scale(1.0 / d as f64);
        Ok(DensityMatrix { factors, matrix: m })
    }

    /// Rank-one state from a pure state.
    pub fn from_pure(psi: &PureState) -> Self {
        let v = psi.vector();
        let m = v * v.adjoint();
        DensityMatrix { factors: psi.factors().to_vec(), matrix: m }
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    /// Total Hilbert-space dimension.
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Dimension of one labeled factor.
    pub fn factor_dim(&self, label: &str) -> Result<usize> {
        self.factors
            .iter()
            .find(|f| f.label == label)
            .map(|f| f.dim)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    /// Eigenvalues, descending.
    pub fn spectrum(&self) -> Vec<f64> {
        eigvalsh(&self.matrix)
    }

    /// Relabel a factor in place (dims unchanged).
    pub fn relabel(&mut self, old: &str, new: impl Into<String>) -> Result<()> {
        let new = new.into();
        if self.factors.iter().any(|f| f.label == new && f.label != old) {
            return Err(Error::DuplicateLabel(new));
        }
        let f = self
            .factors
            .iter_mut()
            .find(|f| f.label == old)
            .ok_or_else(|| Error::UnknownLabel(old.to_string()))?;
        f.label = new;
        Ok(())
    }
}

/// A pure state: complex unit vector with named tensor factors.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    factors: Vec<Factor>,
    vector: CVec,
}

impl PureState {
    pub fn new(factors: Vec<Factor>, vector: CVec) -> Result<Self> {
        Self::new_with(factors, vector, &Tolerances::default())
    }

    pub fn new_with(factors: Vec<Factor>, vector: CVec, tol: &Tolerances) -> Result<Self> {
        validate_factors(&factors)?;
        let d = total_dim(&factors);
        if vector.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: vector.len() });
        }
        let norm_res = (vector.norm() - 1.0).abs();
        if norm_res > tol.trace {
            return Err(Error::InvalidState { what: "vector not normalized".into(), residual: norm_res });
        }
        Ok(PureState { factors, vector })
    }

    pub(crate) fn trusted(factors: Vec<Factor>, vector: CVec) -> Self {
        debug_assert_eq!(total_dim(&factors), vector.len());
        PureState { factors, vector }
    }

    /// Computational basis state `|index>` on the given factors.
    pub fn basis_state(factors: Vec<Factor>, index: usize) -> Result<Self> {
        validate_factors(&factors)?;
        let d = total_dim(&factors);
        if index >= d {
            return Err(Error::DimensionMismatch { expected: d, got: index });
        }
        let mut v = CVec::zeros(d);
        v[index] = re(1.0);
        Ok(PureState { factors, vector: v })
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn vector(&self) -> &CVec {
        &self.vector
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    /// Overlap `<self|other>`.
    pub fn overlap(&self, other: &PureState) -> C64 {
        self.vector.dotc(&other.vector)
    }
}

// --- JSON wire format -------------------------------------------------
//
// Density matrix: {"factors":[{"label":"A","dim":2},...],
//                  "matrix":[[[re,im],...],...]}   (row-major)
// Pure state:     {"factors":...,"vector":[[re,im],...]}
//
// Numbers round-trip exactly (shortest representation that parses back to
// the same f64), which meets the >= 15 significant digits contract.

pub(crate) fn matrix_to_rows(m: &CMat) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub(crate) fn rows_to_matrix(rows: &[Vec<[f64; 2]>]) -> Result<CMat> {
    let r = rows.len();
    let c = rows.first().map(|row| row.len()).unwrap_or(0);
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::FactorMismatch("ragged matrix rows in JSON".into()));
    }
    Ok(CMat::from_fn(r, c, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
}

#[derive(Serialize, Deserialize)]
struct DmWire {
    factors: Vec<Factor>,
    matrix: Vec<Vec<[f64; 2]>>,
}

impl Serialize for DensityMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        DmWire { factors: self.factors.clone(), matrix: matrix_to_rows(&self.matrix) }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let wire = DmWire::deserialize(d)?;
        let m = rows_to_matrix(&wire.matrix).map_err(D::Error::custom)?;
        DensityMatrix::new(wire.factors, m).map_err(D::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
struct PureWire {
    factors: Vec<Factor>,
    vector: Vec<[f64; 2]>,
}

impl Serialize for PureState {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PureWire {
            factors: self.factors.clone(),
            vector: self.vector.iter().map(|x| [x.re, x.im]).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PureState {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let wire = PureWire::deserialize(d)?;
        let v = CVec::from_iterator(wire.vector.len(), wire.vector.iter().map(|x| C64::new(x[0], x[1])));
        PureState::new(wire.factors, v).map_err(D::Error::custom)
    }
}

/// Max abs elementwise difference between two states on identical factors.
pub fn state_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.factors() != b.factors() {
        return Err(Error::FactorMismatch(format!(
            "state factor lists differ: {:?} vs {:?}",
            a.factors().iter().map(|f| &f.label).collect::<Vec<_>>(),
            b.factors().iter().map(|f| &f.label).collect::<Vec<_>>()
        )));
    }
    Ok(max_abs(&(a.matrix() - b.matrix())))
}
