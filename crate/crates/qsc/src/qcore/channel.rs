//! CPTP maps stored as Stinespring isometries.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::linalg::{check_isometry, CMat};

use super::factor::{total_dim, validate_factors, Factor};
use super::state::{matrix_to_rows, rows_to_matrix};

/// A channel as an isometry from the input space into output (x) environment.
///
/// The isometry has shape `(dim(output) * dim(env)) x dim(input)` with the
/// output factors most significant, then the environment factors. Applying
/// the channel means conjugating by the isometry and tracing out the
/// environment (unless it is explicitly kept).
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    input_factors: Vec<Factor>,
    output_factors: Vec<Factor>,
    env_factors: Vec<Factor>,
    isometry: CMat,
}

impl Channel {
    pub fn new(
        input_factors: Vec<Factor>,
        output_factors: Vec<Factor>,
        env_factors: Vec<Factor>,
        isometry: CMat,
    ) -> Result<Self> {
        Self::new_with(input_factors, output_factors, env_factors, isometry, &Tolerances::default())
    }

    pub fn new_with(
        input_factors: Vec<Factor>,
        output_factors: Vec<Factor>,
        env_factors: Vec<Factor>,
        isometry: CMat,
        tol: &Tolerances,
    ) -> Result<Self> {
        validate_factors(&input_factors)?;
        validate_factors(&output_factors)?;
        validate_factors(&env_factors)?;
        let din = total_dim(&input_factors);
        let dout = total_dim(&output_factors);
        let denv = total_dim(&env_factors);
        if denv > tol.max_env_dim {
            return Err(Error::BudgetExceeded {
                what: "channel environment".into(),
                needed: denv,
                budget: tol.max_env_dim,
            });
        }
        if isometry.nrows() != dout * denv || isometry.ncols() != din {
            return Err(Error::FactorMismatch(format!(
                "isometry shape {}x{} does not match (out*env)x(in) = {}x{}",
                isometry.nrows(),
                isometry.ncols(),
                dout * denv,
                din
            )));
        }
        check_isometry(&isometry, tol)?;
        Ok(Channel { input_factors, output_factors, env_factors, isometry })
    }

    /// Identity channel on the given factors (trivial environment).
    pub fn identity(factors: Vec<Factor>) -> Result<Self> {
        let d = total_dim(&factors);
        Channel::new(factors.clone(), factors, vec![], CMat::identity(d, d))
    }

    /// Build the Stinespring dilation of a Kraus family: `V[(o,e), b] =
    /// K_e[o, b]` with the environment dimension equal to the number of
    /// operators. Trace preservation is enforced by the isometry check.
    pub fn from_kraus(
        input_factors: Vec<Factor>,
        output_factors: Vec<Factor>,
        env_label: &str,
        kraus: &[CMat],
    ) -> Result<Self> {
        let din = total_dim(&input_factors);
        let dout = total_dim(&output_factors);
        let denv = kraus.len();
        let mut v = CMat::zeros(dout * denv, din);
        for (e, k) in kraus.iter().enumerate() {
            if k.nrows() != dout || k.ncols() != din {
                return Err(Error::FactorMismatch(format!(
                    "Kraus operator {} has shape {}x{}, expected {}x{}",
                    e,
                    k.nrows(),
                    k.ncols(),
                    dout,
                    din
                )));
            }
            for o in 0..dout {
                for b in 0..din {
                    v[(o * denv + e, b)] = k[(o, b)];
                }
            }
        }
        Channel::new(input_factors, output_factors, vec![Factor::new(env_label, denv)], v)
    }

    pub fn input_factors(&self) -> &[Factor] {
        &self.input_factors
    }

    pub fn output_factors(&self) -> &[Factor] {
        &self.output_factors
    }

    pub fn env_factors(&self) -> &[Factor] {
        &self.env_factors
    }

    pub fn isometry(&self) -> &CMat {
        &self.isometry
    }

    pub fn input_dim(&self) -> usize {
        total_dim(&self.input_factors)
    }

    pub fn output_dim(&self) -> usize {
        total_dim(&self.output_factors)
    }

    pub fn env_dim(&self) -> usize {
        total_dim(&self.env_factors)
    }

    /// Kraus operators `K_e = (1_out (x) <e|_env) V`.
    pub fn kraus_operators(&self) -> Vec<CMat> {
        let dout = self.output_dim();
        let denv = self.env_dim();
        let din = self.input_dim();
        let mut ops = Vec::with_capacity(denv);
        for e in 0..denv {
            let mut k = CMat::zeros(dout, din);
            for o in 0..dout {
                for b in 0..din {
                    // row index of V: output major, env minor
                    k[(o, b)] = self.isometry[(o * denv + e, b)];
                }
            }
            ops.push(k);
        }
        ops
    }
}

#[derive(Serialize, Deserialize)]
struct ChannelWire {
    input_factors: Vec<Factor>,
    output_factors: Vec<Factor>,
    env_factors: Vec<Factor>,
    isometry: Vec<Vec<[f64; 2]>>,
}

impl Serialize for Channel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ChannelWire {
            input_factors: self.input_factors.clone(),
            output_factors: self.output_factors.clone(),
            env_factors: self.env_factors.clone(),
            isometry: matrix_to_rows(&self.isometry),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Channel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let wire = ChannelWire::deserialize(d)?;
        let v = rows_to_matrix(&wire.isometry).map_err(D::Error::custom)?;
        Channel::new(wire.input_factors, wire.output_factors, wire.env_factors, v)
            .map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::re;

    #[test]
    fn identity_channel_is_valid() {
        let ch = Channel::identity(vec![Factor::new("A", 3)]).unwrap();
        assert_eq!(ch.input_dim(), 3);
        assert_eq!(ch.env_dim(), 1);
        assert_eq!(ch.kraus_operators().len(), 1);
    }

    #[test]
    fn non_isometry_rejected() {
        let mut v = CMat::zeros(2, 2);
        v[(0, 0)] = re(1.0);
        v[(1, 1)] = re(0.5);
        assert!(Channel::new(
            vec![Factor::new("A", 2)],
            vec![Factor::new("B", 2)],
            vec![],
            v
        )
        .is_err());
    }

    #[test]
    fn kraus_sum_is_identity() {
        // V|b> = |b>|b> on a qubit (copy dilation of dephasing)
        let mut v = CMat::zeros(4, 2);
        v[(0, 0)] = re(1.0);
        v[(3, 1)] = re(1.0);
        let ch = Channel::new(
            vec![Factor::new("A", 2)],
            vec![Factor::new("B", 2)],
            vec![Factor::new("E", 2)],
            v,
        )
        .unwrap();
        let ops = ch.kraus_operators();
        let sum: CMat = ops.iter().map(|k| k.adjoint() * k).sum();
        assert!(crate::linalg::max_abs_diff(&sum, &CMat::identity(2, 2)) < 1e-14);
    }
}
