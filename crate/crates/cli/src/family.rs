//! Named state families accepted by `--family`.
//!
//! ```text
//! phi:D               maximally entangled D⊗D
//! rho-r:R, sigma-r:R  the two-qubit pair
//! rho-alpha:A         the 3⊗3 orbit state
//! pure:S1,S2,...      Schmidt state from (unnormalized) coefficients
//! mixed:DAxDB         maximally mixed
//! random:DAxDB[:K]    Ginibre state of rank K (default full), seeded by --seed
//! ```

use entbound::linalg::BipartiteShape;
use entbound::states::{
    max_entangled, pure_from_schmidt, random_state, rho_alpha, rho_r, seeded_rng, sigma_r,
    BipartiteState, IsoOrbitParams, RainsPairParams, SchmidtVector, StateError,
};

use crate::error::CliError;

/// A parsed `--family` argument.
#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    Phi(usize),
    RhoR(f64),
    SigmaR(f64),
    RhoAlpha(f64),
    Pure(Vec<f64>),
    Mixed(usize, usize),
    Random { da: usize, db: usize, rank: Option<usize> },
}

fn number<T: std::str::FromStr>(s: &str, what: &str) -> Result<T, CliError> {
    s.trim()
        .parse()
        .map_err(|_| CliError::Input(format!("cannot parse {what} from `{s}`")))
}

fn shape(s: &str) -> Result<(usize, usize), CliError> {
    let (a, b) = s
        .split_once('x')
        .ok_or_else(|| CliError::Input(format!("expected DAxDB, got `{s}`")))?;
    Ok((number(a, "dimension")?, number(b, "dimension")?))
}

impl Family {
    pub fn parse(spec: &str) -> Result<Self, CliError> {
        let (name, arg) = spec
            .split_once(':')
            .ok_or_else(|| CliError::Input(format!("family `{spec}` needs NAME:PARAMS")))?;
        Ok(match name {
            "phi" => Family::Phi(number(arg, "dimension")?),
            "rho-r" => Family::RhoR(number(arg, "r")?),
            "sigma-r" => Family::SigmaR(number(arg, "r")?),
            "rho-alpha" => Family::RhoAlpha(number(arg, "alpha")?),
            "pure" => Family::Pure(
                arg.split(',')
                    .map(|c| number(c, "Schmidt coefficient"))
                    .collect::<Result<_, _>>()?,
            ),
            "mixed" => {
                let (da, db) = shape(arg)?;
                Family::Mixed(da, db)
            }
            "random" => {
                let (dims, rank) = match arg.split_once(':') {
                    Some((d, k)) => (d, Some(number(k, "rank")?)),
                    None => (arg, None),
                };
                let (da, db) = shape(dims)?;
                Family::Random { da, db, rank }
            }
            other => return Err(CliError::Input(format!("unknown family `{other}`"))),
        })
    }

    pub fn build(&self, seed: u64) -> Result<BipartiteState, StateError> {
        match *self {
            Family::Phi(d) => max_entangled(d),
            Family::RhoR(r) => rho_r(RainsPairParams::new(r)?),
            Family::SigmaR(r) => sigma_r(RainsPairParams::new(r)?),
            Family::RhoAlpha(a) => rho_alpha(IsoOrbitParams::new(a)?),
            Family::Pure(ref c) => {
                let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
                let s = SchmidtVector::new(c.iter().map(|x| x / norm).collect())?;
                let shape = BipartiteShape::new(s.len(), s.len())?;
                pure_from_schmidt(&s, shape)
            }
            Family::Mixed(da, db) => Ok(BipartiteState::maximally_mixed(BipartiteShape::new(da, db)?)),
            Family::Random { da, db, rank } => {
                let shape = BipartiteShape::new(da, db)?;
                let rank = rank.unwrap_or(shape.dim());
                if rank == 0 || rank > shape.dim() {
                    return Err(StateError::Domain(format!(
                        "rank must lie in 1..={}, got {rank}",
                        shape.dim()
                    )));
                }
                Ok(random_state(shape, rank, &mut seeded_rng(seed)))
            }
        }
    }

    /// `r` when the state belongs to the `ρ_r` family.
    pub fn rains_parameter(&self) -> Option<f64> {
        match *self {
            Family::RhoR(r) => Some(r),
            _ => None,
        }
    }
}
