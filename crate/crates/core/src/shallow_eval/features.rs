use std::collections::BTreeMap;

use super::ShallowError;

/// Labeled feature vectors, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    ids: Vec<String>,
    labels: Vec<usize>,
    domains: Option<Vec<String>>,
    dim: usize,
    data: Vec<f64>,
}

impl FeatureTable {
    pub fn new(
        ids: Vec<String>,
        labels: Vec<usize>,
        rows: Vec<Vec<f64>>,
        domains: Option<Vec<String>>,
    ) -> Result<Self, ShallowError> {
        let n = rows.len();
        if n == 0 {
            return Err(ShallowError::InvalidTable("table has no rows".into()));
        }
        let dim = rows[0].len();
        if dim == 0 {
            return Err(ShallowError::InvalidTable("feature dimension is zero".into()));
        }
        if ids.len() != n || labels.len() != n || domains.as_ref().is_some_and(|d| d.len() != n) {
            return Err(ShallowError::InvalidTable("column lengths differ".into()));
        }
        let mut data = Vec::with_capacity(n * dim);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != dim {
                return Err(ShallowError::InvalidTable(format!(
                    "row {i} has {} features, expected {dim}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(ShallowError::InvalidTable(format!("row {i} has a non-finite value")));
            }
            data.extend(row);
        }
        Ok(FeatureTable { ids, labels, domains, dim, data })
    }

    /// Table with generated ids `s0, s1, ...` and no domains.
    pub fn from_rows(labels: Vec<usize>, rows: Vec<Vec<f64>>) -> Result<Self, ShallowError> {
        let ids = (0..rows.len()).map(|i| format!("s{i}")).collect();
        Self::new(ids, labels, rows, None)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn domains(&self) -> Option<&[String]> {
        self.domains.as_deref()
    }

    /// One past the largest label.
    pub fn n_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    /// Row indices of each class, in table order.
    pub fn class_indices(&self, n_classes: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); n_classes];
        for (i, &l) in self.labels.iter().enumerate() {
            if l < n_classes {
                out[l].push(i);
            }
        }
        out
    }

    pub fn class_counts(&self) -> BTreeMap<usize, usize> {
        let mut m = BTreeMap::new();
        for &l in &self.labels {
            *m.entry(l).or_default() += 1;
        }
        m
    }

    pub fn subset(&self, indices: &[usize]) -> FeatureTable {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        FeatureTable {
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            domains: self.domains.as_ref().map(|d| indices.iter().map(|&i| d[i].clone()).collect()),
            dim: self.dim,
            data,
        }
    }

    /// Concatenates two tables of equal dimension. Domains are kept only when
    /// both sides carry them.
    pub fn concat(&self, other: &FeatureTable) -> Result<FeatureTable, ShallowError> {
        if self.dim != other.dim {
            return Err(ShallowError::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        let domains = match (&self.domains, &other.domains) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).cloned().collect()),
            _ => None,
        };
        Ok(FeatureTable {
            ids: self.ids.iter().chain(&other.ids).cloned().collect(),
            labels: self.labels.iter().chain(&other.labels).copied().collect(),
            domains,
            dim: self.dim,
            data: self.data.iter().chain(&other.data).copied().collect(),
        })
    }

    /// Reads `id,label[,domain],f0,...,f{d-1}`.
    pub fn parse_csv(text: &str) -> Result<Self, ShallowError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let header = rdr.headers()?.clone();
        if header.len() < 3 || &header[0] != "id" || &header[1] != "label" {
            return Err(ShallowError::InvalidTable(
                "header must start with `id,label`".into(),
            ));
        }
        let has_domain = &header[2] == "domain";
        let first_feature = if has_domain { 3 } else { 2 };
        let (mut ids, mut labels, mut rows) = (Vec::new(), Vec::new(), Vec::new());
        let mut domains = has_domain.then(Vec::new);
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            ids.push(rec[0].to_string());
            labels.push(rec[1].parse::<usize>().map_err(|e| {
                ShallowError::InvalidTable(format!("line {line}: bad label {:?}: {e}", &rec[1]))
            })?);
            if let Some(d) = domains.as_mut() {
                d.push(rec[2].to_string());
            }
            let row = rec
                .iter()
                .skip(first_feature)
                .map(|v| {
                    v.parse::<f64>().map_err(|e| {
                        ShallowError::InvalidTable(format!("line {line}: bad value {v:?}: {e}"))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        FeatureTable::new(ids, labels, rows, domains)
    }

    pub fn to_csv(&self) -> Result<String, ShallowError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["id".to_string(), "label".to_string()];
        if self.domains.is_some() {
            header.push("domain".into());
        }
        header.extend((0..self.dim).map(|j| format!("f{j}")));
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec = vec![self.ids[i].clone(), self.labels[i].to_string()];
            if let Some(d) = &self.domains {
                rec.push(d[i].clone());
            }
            rec.extend(self.row(i).iter().map(|v| format!("{v:?}")));
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| ShallowError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_tables() {
        assert!(FeatureTable::from_rows(vec![], vec![]).is_err());
        assert!(FeatureTable::from_rows(vec![0], vec![vec![]]).is_err());
        assert!(FeatureTable::from_rows(vec![0, 1], vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(FeatureTable::from_rows(vec![0], vec![vec![f64::NAN]]).is_err());
    }

    #[test]
    fn csv_round_trip_with_domain() {
        let text = "id,label,domain,f0,f1\na,0,amazon,1.5,-2\nb,2,webcam,0,3.25\n";
        let t = FeatureTable::parse_csv(text).unwrap();
        assert_eq!(t.dim(), 2);
        assert_eq!(t.n_classes(), 3);
        assert_eq!(t.domains().unwrap()[1], "webcam");
        assert_eq!(FeatureTable::parse_csv(&t.to_csv().unwrap()).unwrap(), t);
    }

    #[test]
    fn csv_without_domain() {
        let t = FeatureTable::parse_csv("id,label,f0\nx,1,0.5\n").unwrap();
        assert!(t.domains().is_none());
        assert_eq!(t.row(0), [0.5]);
        assert!(FeatureTable::parse_csv("id,label,f0\nx,one,0.5\n").is_err());
        assert!(FeatureTable::parse_csv("name,label,f0\nx,1,0.5\n").is_err());
    }
}
