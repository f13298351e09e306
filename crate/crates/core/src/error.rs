use thiserror::Error;

/// Everything that can go wrong in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what} = {value} is outside {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("x = {0} is the branch point a, where f is two-valued")]
    SingularInput(f64),

    #[error("root solve failed: {0}")]
    Solver(String),

    #[error("quadrature did not converge (achieved {achieved:e}, requested {requested:e})")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("b = {0} is infeasible, need 0 < b < 1/4")]
    InfeasibleB(f64),

    #[error("partition table too shallow: {0}")]
    Resolution(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("cut function failed validation: {0}")]
    InvalidCut(String),

    #[error("mean counter {0} is not negative; increase k0")]
    Positivity(f64),

    #[error("only {found} usable tail points in the fit range, need {needed}")]
    InsufficientTail { found: usize, needed: usize },
}

impl Error {
    /// True for errors caused by bad user input rather than numerical breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Domain { .. }
                | Error::SingularInput(_)
                | Error::InfeasibleB(_)
                | Error::InvalidParams(_)
                | Error::InvalidCut(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_unit(what: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            value,
            domain: "[0, 1]",
        })
    }
}
