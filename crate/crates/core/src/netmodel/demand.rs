use super::NetError;

/// Origin-destination trip rates (trips/hour) and the modal split that
/// assigns a share of them to bus transit.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandMatrix {
    n: usize,
    rates: Vec<f64>,
    alpha: f64,
    row_sums: Vec<f64>,
    col_sums: Vec<f64>,
}

impl DemandMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            rates: vec![0.0; n * n],
            alpha: 1.0,
            row_sums: vec![0.0; n],
            col_sums: vec![0.0; n],
        }
    }

    /// Builds a matrix from `(origin, destination, rate)` triples. Repeated
    /// pairs accumulate.
    pub fn from_entries(
        n: usize,
        entries: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self, NetError> {
        let mut m = Self::zeros(n);
        for (o, d, rate) in entries {
            for id in [o, d] {
                if id >= n {
                    return Err(NetError::DanglingNode {
                        record: format!("demand {o}->{d}"),
                        id: id as i64,
                    });
                }
            }
            if !(rate.is_finite() && rate >= 0.0) {
                return Err(NetError::InvalidValue {
                    record: format!("demand {o}->{d}"),
                    field: "rate",
                    requirement: "finite and >= 0",
                    value: rate,
                });
            }
            m.rates[o * n + d] += rate;
            m.row_sums[o] += rate;
            m.col_sums[d] += rate;
        }
        Ok(m)
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.set_alpha(alpha);
        self
    }

    pub fn set_alpha(&mut self, alpha: f64) {
        assert!((0.0..=1.0).contains(&alpha), "modal split must lie in [0, 1]");
        self.alpha = alpha;
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn rate(&self, o: usize, d: usize) -> f64 {
        self.rates[o * self.n + d]
    }

    /// `alpha * D[o][d]`.
    pub fn transit_rate(&self, o: usize, d: usize) -> f64 {
        self.alpha * self.rate(o, d)
    }

    /// Positive entries in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.rates
            .iter()
            .enumerate()
            .filter(|(_, &r)| r > 0.0)
            .map(move |(k, &r)| (k / self.n, k % self.n, r))
    }

    /// Off-diagonal positive entries; diagonal trips never need a bus.
    pub fn trip_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.entries().filter(|&(o, d, _)| o != d)
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row_sums[i]
    }

    pub fn col_sum(&self, j: usize) -> f64 {
        self.col_sums[j]
    }

    pub fn total(&self) -> f64 {
        self.row_sums.iter().sum()
    }

    /// Total over `i != j`.
    pub fn trip_total(&self) -> f64 {
        self.total() - (0..self.size()).map(|i| self.rate(i, i)).sum::<f64>()
    }

    /// `max(max_i sum_j D_ij, max_j sum_i D_ij)`, the scale for demand features.
    pub fn reference_scale(&self) -> f64 {
        let out = self.row_sums.iter().copied().fold(0.0, f64::max);
        let inn = self.col_sums.iter().copied().fold(0.0, f64::max);
        out.max(inn)
    }
}

/// `(sum_j D_ij, sum_j D_ji)` for node `i`.
pub fn od_marginals(demand: &DemandMatrix, i: usize) -> (f64, f64) {
    (demand.row_sum(i), demand.col_sum(i))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn marginals_single_entry() {
        let d = DemandMatrix::from_entries(2, [(0, 1, 5.0)]).unwrap();
        assert_eq!(od_marginals(&d, 0), (5.0, 0.0));
        assert_eq!(od_marginals(&d, 1), (0.0, 5.0));
    }

    #[test]
    fn marginals_hand_sum() {
        let d = DemandMatrix::from_entries(3, [(0, 1, 2.0), (2, 1, 3.0), (1, 0, 4.0)]).unwrap();
        assert_eq!(od_marginals(&d, 1), (4.0, 5.0));
    }

    #[test]
    fn transit_share_and_validation() {
        let d = DemandMatrix::from_entries(2, [(0, 1, 10.0)])
            .unwrap()
            .with_alpha(0.3);
        assert!((d.transit_rate(0, 1) - 3.0).abs() < 1e-12);
        assert!(DemandMatrix::from_entries(2, [(0, 1, -1.0)]).is_err());
        assert!(DemandMatrix::from_entries(2, [(0, 2, 1.0)]).is_err());
    }

    #[test]
    fn diagonal_is_kept_but_not_a_trip() {
        let d = DemandMatrix::from_entries(2, [(0, 0, 3.0), (0, 1, 1.0)]).unwrap();
        assert_eq!(d.entries().count(), 2);
        assert_eq!(d.trip_entries().count(), 1);
    }
}
