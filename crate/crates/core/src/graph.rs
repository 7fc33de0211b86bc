//! Undirected mobility network and the implicit modularity operator.
//!
//! For zones `i != j` the edge weight is the sum of trips in both directions;
//! the diagonal holds twice the within-zone trips, so that every strength
//! `k_i = sum_j A_ij` counts each trip once as outgoing and once as incoming
//! and `sum_i k_i = 2m`. The modularity matrix `B = A - k k^T / 2m` is only
//! ever applied, never stored.

use std::io::Write;

use crate::error::{Error, Result};
use crate::fmt_num;
use crate::ingest::Survey;

/// Symmetric sparse adjacency in CSR form. Each unordered pair is
/// accumulated once and mirrored, so `A_ij` and `A_ji` are the same `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct MobilityNetwork {
    zones: Vec<String>,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    strengths: Vec<f64>,
    two_m: f64,
}

impl MobilityNetwork {
    /// Builds from upper-triangle entries `(i, j, w)` with `i <= j`. Entries
    /// must be sorted by `(i, j)` and unique.
    fn from_upper(zones: Vec<String>, upper: &[(usize, usize, f64)]) -> Self {
        let n = zones.len();
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, w) in upper {
            rows[i].push((j, w));
            if i != j {
                rows[j].push((i, w));
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in &mut rows {
            row.sort_by_key(|&(c, _)| c);
            for &(c, w) in row.iter() {
                col_idx.push(c);
                values.push(w);
            }
            row_ptr.push(col_idx.len());
        }
        let strengths: Vec<f64> = (0..n)
            .map(|i| values[row_ptr[i]..row_ptr[i + 1]].iter().sum())
            .collect();
        let two_m = strengths.iter().sum();
        MobilityNetwork {
            zones,
            row_ptr,
            col_idx,
            values,
            strengths,
            two_m,
        }
    }

    pub fn zones(&self) -> &[String] {
        &self.zones
    }

    pub fn len(&self) -> usize {
        self.zones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zones.is_empty()
    }

    /// Stored nonzeros of the full symmetric matrix.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn strengths(&self) -> &[f64] {
        &self.strengths
    }

    pub fn two_m(&self) -> f64 {
        self.two_m
    }

    /// Row `i` as `(column, weight)` pairs in ascending column order.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(pos) => self.values[r.start + pos],
            Err(_) => 0.0,
        }
    }

    /// Upper triangle plus diagonal, row-major.
    pub fn upper_edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.len()).flat_map(move |i| {
            self.row(i)
                .filter(move |&(j, _)| j >= i)
                .map(move |(j, w)| (i, j, w))
        })
    }

    /// Debug export as `i,j,A_ij` (upper triangle and diagonal).
    pub fn write_edge_list<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["i", "j", "A_ij"])?;
        for (i, j, a) in self.upper_edges() {
            w.write_record([i.to_string(), j.to_string(), fmt_num(a)])?;
        }
        w.flush().map_err(|e| Error::io("<edge list>", e))?;
        Ok(())
    }

    pub fn modularity(&self) -> ModularityOperator<'_> {
        ModularityOperator { net: self }
    }
}

/// Undirected network of a survey. Zone order is the survey's sorted order.
pub fn build_network(s: &Survey) -> MobilityNetwork {
    let mut upper: std::collections::BTreeMap<(usize, usize), f64> = Default::default();
    for (o, d, w) in s.directed_trips() {
        if w <= 0.0 {
            continue;
        }
        let i = s.zone_index(o).expect("trip endpoint is a zone");
        let j = s.zone_index(d).expect("trip endpoint is a zone");
        let key = (i.min(j), i.max(j));
        *upper.entry(key).or_insert(0.0) += if i == j { 2.0 * w } else { w };
    }
    let upper: Vec<_> = upper.into_iter().map(|((i, j), w)| (i, j, w)).collect();
    MobilityNetwork::from_upper(s.zones().to_vec(), &upper)
}

/// `v -> A v - k (k^T v) / 2m`, in `O(nnz + n)`.
#[derive(Debug, Clone, Copy)]
pub struct ModularityOperator<'a> {
    net: &'a MobilityNetwork,
}

impl<'a> ModularityOperator<'a> {
    pub fn network(&self) -> &'a MobilityNetwork {
        self.net
    }

    pub fn dim(&self) -> usize {
        self.net.len()
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; v.len()];
        self.apply_into(v, &mut out)?;
        Ok(out)
    }

    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.net.len();
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: v.len(),
            });
        }
        if out.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: out.len(),
            });
        }
        if self.net.two_m <= 0.0 {
            return Err(Error::EmptyNetwork);
        }
        let k = &self.net.strengths;
        let kv: f64 = k.iter().zip(v).map(|(a, b)| a * b).sum();
        let scale = kv / self.net.two_m;
        for (i, o) in out.iter_mut().enumerate() {
            let av: f64 = self.net.row(i).map(|(j, a)| a * v[j]).sum();
            *o = av - k[i] * scale;
        }
        Ok(())
    }

    /// Upper bound on the spectral radius of `B`: `max_i (sum_j A_ij + k_i)`,
    /// which dominates every Gershgorin row radius of `B`.
    pub fn shift_bound(&self) -> f64 {
        self.net
            .strengths
            .iter()
            .map(|&k| k + k)
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{assemble_survey, parse_trips};

    fn survey(body: &str) -> Survey {
        let t = parse_trips(format!("origin,destination,weight\n{body}").as_bytes(), "s").unwrap();
        assemble_survey(&t, &[], "s").unwrap()
    }

    fn two_zone() -> MobilityNetwork {
        build_network(&survey("z1,z2,3\nz2,z1,1\nz1,z1,2"))
    }

    #[test]
    fn two_zone_adjacency() {
        let net = two_zone();
        assert_eq!(net.weight(0, 1), 4.0);
        assert_eq!(net.weight(1, 0), 4.0);
        assert_eq!(net.weight(0, 0), 4.0);
        assert_eq!(net.weight(1, 1), 0.0);
        assert_eq!(net.strengths(), [8.0, 4.0]);
        assert_eq!(net.two_m(), 12.0);
    }

    #[test]
    fn single_zone_self_loop() {
        let net = build_network(&survey("a,a,5"));
        assert_eq!(net.weight(0, 0), 10.0);
        assert_eq!(net.strengths(), [10.0]);
        assert_eq!(net.two_m(), 10.0);
        assert_eq!(net.modularity().shift_bound(), 20.0);
        let b = net.modularity().matvec(&[1.0]).unwrap();
        assert_eq!(b, [0.0]);
    }

    #[test]
    fn scaling_weights_scales_everything() {
        let a = two_zone();
        let b = build_network(&survey("z1,z2,30\nz2,z1,10\nz1,z1,20"));
        assert_eq!(b.weight(0, 1), 10.0 * a.weight(0, 1));
        assert_eq!(b.strengths(), [80.0, 40.0]);
        assert_eq!(b.two_m(), 120.0);
        assert_eq!(
            b.modularity().shift_bound(),
            10.0 * a.modularity().shift_bound()
        );
    }

    #[test]
    fn matvec_two_zone_column() {
        let net = two_zone();
        let op = net.modularity();
        let col = op.matvec(&[1.0, 0.0]).unwrap();
        assert!((col[0] + 4.0 / 3.0).abs() < 1e-15);
        assert!((col[1] - 4.0 / 3.0).abs() < 1e-15);
        let ones = op.matvec(&[1.0, 1.0]).unwrap();
        assert!(ones.iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn shift_bound_two_zone() {
        let net = two_zone();
        let sigma = net.modularity().shift_bound();
        assert_eq!(sigma, 16.0);
        assert!(8.0 / 3.0 < sigma);
    }

    #[test]
    fn empty_network_errors() {
        let net = build_network(&survey("a,b,0"));
        assert_eq!(net.len(), 2);
        assert_eq!(net.nnz(), 0);
        assert_eq!(net.two_m(), 0.0);
        assert!(matches!(
            net.modularity().matvec(&[1.0, 1.0]).unwrap_err(),
            Error::EmptyNetwork
        ));
        let empty = build_network(&assemble_survey(&[], &[], "e").unwrap());
        assert!(empty.is_empty());
    }

    #[test]
    fn matvec_dimension_checked() {
        let net = two_zone();
        assert!(matches!(
            net.modularity().matvec(&[1.0]).unwrap_err(),
            Error::DimensionMismatch {
                expected: 2,
                got: 1
            }
        ));
    }

    #[test]
    fn edge_list_export() {
        let mut buf = Vec::new();
        two_zone().write_edge_list(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "i,j,A_ij\n0,0,4\n0,1,4\n");
    }
}
