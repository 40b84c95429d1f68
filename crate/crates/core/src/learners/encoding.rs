use crate::error::{Error, Result};
use crate::matchenv::Observation;

/// One-hot zone followed by the normalized local density, optionally
/// followed by a per-zone mean-action row.
pub fn encode_state(zone: usize, density: f64, num_zones: usize, mean_row: Option<&[f64]>) -> Vec<f64> {
    let extra = mean_row.map_or(0, <[f64]>::len);
    let mut x = vec![0.0; num_zones + 1 + extra];
    x[zone] = 1.0;
    x[num_zones] = density;
    if let Some(row) = mean_row {
        x[num_zones + 1..].copy_from_slice(row);
    }
    x
}

pub fn encode_observation(obs: &Observation, num_zones: usize, mean_row: Option<&[f64]>) -> Vec<f64> {
    encode_state(obs.zone, obs.local_density, num_zones, mean_row)
}

/// Per-zone distribution of the actions taken in the previous iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanActionTable {
    rows: Vec<Vec<f64>>,
}

impl MeanActionTable {
    pub fn uniform(num_zones: usize) -> Self {
        MeanActionTable {
            rows: vec![vec![1.0 / num_zones as f64; num_zones]; num_zones],
        }
    }

    /// Rebuild from `(zone, action)` pairs. Zones without actions fall back
    /// to the uniform row.
    pub fn from_actions(num_zones: usize, log: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut counts = vec![vec![0u64; num_zones]; num_zones];
        for (z, a) in log {
            if z >= num_zones || a >= num_zones {
                return Err(Error::Contract(format!(
                    "action log entry ({z}, {a}) outside {num_zones} zones"
                )));
            }
            counts[z][a] += 1;
        }
        let rows = counts
            .into_iter()
            .map(|row| {
                let total: u64 = row.iter().sum();
                if total == 0 {
                    vec![1.0 / num_zones as f64; num_zones]
                } else {
                    row.iter().map(|&c| c as f64 / total as f64).collect()
                }
            })
            .collect();
        Ok(MeanActionTable { rows })
    }

    pub fn num_zones(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, zone: usize) -> &[f64] {
        &self.rows[zone]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn state_layout() {
        assert_eq!(encode_state(2, 0.35, 4, None), vec![0.0, 0.0, 1.0, 0.0, 0.35]);
        let x = encode_state(0, 0.1, 2, Some(&[0.25, 0.75]));
        assert_eq!(x, vec![1.0, 0.0, 0.1, 0.25, 0.75]);
    }

    #[test]
    fn empty_rows_fall_back_to_uniform() {
        let t = MeanActionTable::from_actions(3, [(0, 1), (0, 1), (0, 2)]).unwrap();
        assert_eq!(t.row(0), &[0.0, 2.0 / 3.0, 1.0 / 3.0]);
        assert_eq!(t.row(1), &[1.0 / 3.0; 3]);
        assert!(MeanActionTable::from_actions(3, [(3, 0)]).is_err());
    }

    proptest! {
        #[test]
        fn rows_are_simplices(log in proptest::collection::vec((0usize..6, 0usize..6), 0..200)) {
            let t = MeanActionTable::from_actions(6, log).unwrap();
            for z in 0..6 {
                let s: f64 = t.row(z).iter().sum();
                prop_assert!((s - 1.0).abs() < 1e-12);
                prop_assert!(t.row(z).iter().all(|&p| p >= 0.0));
            }
        }
    }
}
