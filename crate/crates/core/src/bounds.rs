//! Closed-form maximum-TTFT bounds for the shuffled queue with delayed
//! start `T`, evaluated exactly.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::time::{rational_from_usize, Rational, Time};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundInputs {
    pub n: usize,
    pub u: usize,
    pub d: usize,
    pub s: Rational,
    /// k-LPM cycle length, equal to the user replication factor.
    pub k: usize,
    /// Delayed start time.
    pub start: Time,
    /// Slack in the asymptotic lower bounds.
    pub epsilon: Rational,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParams("k must be at least 1".into()));
        }
        let zero = Rational::from_integer(0);
        if self.epsilon < zero || self.epsilon >= Rational::from_integer(1) {
            return Err(Error::InvalidParams(format!(
                "epsilon {} outside [0, 1)",
                self.epsilon
            )));
        }
        if self.s < zero {
            return Err(Error::InvalidParams("s must be non-negative".into()));
        }
        Ok(())
    }

    /// Whether `start >= s * n`, the regime where the bounds apply.
    pub fn start_after_arrivals(&self) -> bool {
        self.start.as_rational() >= self.s * rational_from_usize(self.n)
    }

    fn n(&self) -> Rational {
        rational_from_usize(self.n)
    }

    fn u(&self) -> Rational {
        rational_from_usize(self.u)
    }

    fn d(&self) -> Rational {
        rational_from_usize(self.d)
    }

    fn k(&self) -> Rational {
        rational_from_usize(self.k)
    }

    fn slack(&self) -> Rational {
        Rational::from_integer(1) - self.epsilon
    }
}

/// `T + n (u/k + d - s/k)`: holds for k-LPM on every arrival order.
pub fn klpm_upper(b: &BoundInputs) -> Time {
    b.start + Time::from_rational(b.n() * (b.u() / b.k() + b.d() - b.s / b.k()))
}

/// `T + (1 - eps) n (u/k + d)`: LPM's maximum TTFT with high probability.
pub fn lpm_lower(b: &BoundInputs) -> Time {
    b.start + Time::from_rational(b.slack() * b.n() * (b.u() / b.k() + b.d()))
}

/// `T + (1 - eps) n (u + d - s)`: FCFS's maximum TTFT with high probability.
pub fn fcfs_lower(b: &BoundInputs) -> Time {
    b.start + Time::from_rational(b.slack() * b.n() * (b.u() + b.d() - b.s))
}

/// Completion of the `j`-th processed query (1-based) under LPM when every
/// query is pending at `T`: `T + ceil(j/k) u + d j`.
pub fn lpm_completion_identity(j: usize, k: usize, u: usize, d: usize, start: Time) -> Time {
    let users = j.div_ceil(k);
    start + Time::from_int((users * u + d * j) as i64)
}

/// True when the k-LPM upper bound is strictly below both lower bounds.
pub fn separation_holds(b: &BoundInputs) -> bool {
    let upper = klpm_upper(b);
    upper < lpm_lower(b) && upper < fcfs_lower(b)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BoundRow {
    pub formula: &'static str,
    pub inputs: String,
    pub value: String,
}

/// Every bound evaluated at `b`, for reporting.
pub fn bound_table(b: &BoundInputs) -> Result<Vec<BoundRow>> {
    b.validate()?;
    let inputs = format!(
        "n={} u={} d={} s={} k={} T={} epsilon={}",
        b.n,
        b.u,
        b.d,
        Time::from_rational(b.s),
        b.k,
        b.start,
        Time::from_rational(b.epsilon)
    );
    let row = |formula, value: String| BoundRow {
        formula,
        inputs: inputs.clone(),
        value,
    };
    Ok(vec![
        row("klpm_upper", klpm_upper(b).to_string()),
        row("lpm_lower", lpm_lower(b).to_string()),
        row("fcfs_lower", fcfs_lower(b).to_string()),
        row("separation_holds", separation_holds(b).to_string()),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs(
        n: usize,
        k: usize,
        u: usize,
        d: usize,
        s: i128,
        start: i64,
        eps: Rational,
    ) -> BoundInputs {
        BoundInputs {
            n,
            u,
            d,
            s: Rational::from_integer(s),
            k,
            start: Time::from_int(start),
            epsilon: eps,
        }
    }

    fn zero() -> Rational {
        Rational::from_integer(0)
    }

    #[test]
    fn klpm_upper_examples() {
        assert_eq!(
            klpm_upper(&inputs(4, 2, 5, 5, 0, 0, zero())),
            Time::from_int(30)
        );
        // s = u + k d makes the per-query term vanish
        assert_eq!(
            klpm_upper(&inputs(4, 2, 5, 5, 15, 7, zero())),
            Time::from_int(7)
        );
        assert_eq!(
            klpm_upper(&inputs(1000, 4, 8, 4, 2, 2000, zero())),
            Time::from_int(7500)
        );
    }

    #[test]
    fn lower_bound_examples() {
        assert_eq!(
            lpm_lower(&inputs(4, 2, 5, 5, 0, 0, zero())),
            Time::from_int(30)
        );
        assert_eq!(
            fcfs_lower(&inputs(4, 2, 5, 5, 0, 0, zero())),
            Time::from_int(40)
        );
        assert_eq!(
            fcfs_lower(&inputs(4, 2, 5, 5, 10, 3, zero())),
            Time::from_int(3)
        );
        let eps = Rational::new(1, 10);
        assert_eq!(
            lpm_lower(&inputs(1000, 4, 8, 4, 2, 2000, eps)),
            Time::from_int(7400)
        );
        assert_eq!(
            fcfs_lower(&inputs(1000, 4, 8, 4, 2, 2000, eps)),
            Time::from_int(11000)
        );
    }

    #[test]
    fn completion_identity_examples() {
        let t0 = Time::ZERO;
        assert_eq!(lpm_completion_identity(1, 2, 5, 5, t0), Time::from_int(10));
        assert_eq!(lpm_completion_identity(2, 2, 5, 5, t0), Time::from_int(15));
        assert_eq!(lpm_completion_identity(3, 2, 5, 5, t0), Time::from_int(25));
        assert_eq!(lpm_completion_identity(4, 2, 5, 5, t0), Time::from_int(30));
        assert_eq!(
            lpm_completion_identity(8, 4, 6, 3, Time::from_int(40)),
            Time::from_int(40 + 12 + 24)
        );
    }

    #[test]
    fn separation_examples() {
        for n in [1, 10, 1000] {
            for start in [0, 2 * n as i64] {
                assert!(separation_holds(&inputs(
                    n,
                    4,
                    8,
                    4,
                    2,
                    start,
                    Rational::new(1, 20)
                )));
            }
        }
        assert!(!separation_holds(&inputs(100, 4, 8, 4, 0, 0, zero())));
        assert!(!separation_holds(&inputs(100, 1, 8, 4, 2, 0, zero())));
        assert!(!separation_holds(&inputs(
            100,
            1,
            8,
            4,
            2,
            0,
            Rational::new(1, 20)
        )));
    }

    #[test]
    fn invalid_inputs() {
        assert!(inputs(4, 0, 5, 5, 0, 0, zero()).validate().is_err());
        assert!(inputs(4, 2, 5, 5, 0, 0, Rational::from_integer(1))
            .validate()
            .is_err());
        assert!(
            bound_table(&inputs(4, 2, 5, 5, 0, 0, zero()))
                .unwrap()
                .len()
                == 4
        );
    }
}
