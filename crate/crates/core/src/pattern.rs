//! Finite point patterns and their CSV / JSON encodings.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Window;

/// Finite list of points in R^m with an optional mark per point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointPattern {
    dim: usize,
    coords: Vec<f64>,
    marks: Option<Vec<f64>>,
}

impl PointPattern {
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            coords: Vec::new(),
            marks: None,
        }
    }

    pub fn from_points(dim: usize, points: &[Vec<f64>]) -> Result<Self> {
        let mut p = Self::empty(dim);
        for x in points {
            p.push(x)?;
        }
        Ok(p)
    }

    /// Points on the line.
    pub fn from_times(times: &[f64]) -> Result<Self> {
        let mut p = Self::empty(1);
        for &t in times {
            p.push(&[t])?;
        }
        Ok(p)
    }

    pub fn with_marks(mut self, marks: Vec<f64>) -> Result<Self> {
        if marks.len() != self.len() {
            return Err(crate::error::invalid(
                "marks",
                format!("{} marks for {} points", marks.len(), self.len()),
            ));
        }
        self.marks = Some(marks);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn marks(&self) -> Option<&[f64]> {
        self.marks.as_deref()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn push(&mut self, x: &[f64]) -> Result<()> {
        if self.marks.is_some() {
            return Err(crate::error::invalid("point", "marked pattern needs push_marked"));
        }
        self.push_coords(x)
    }

    pub fn push_marked(&mut self, x: &[f64], mark: f64) -> Result<()> {
        if self.marks.is_none() && !self.is_empty() {
            return Err(crate::error::invalid("mark", "pattern already holds unmarked points"));
        }
        self.push_coords(x)?;
        self.marks.get_or_insert_with(Vec::new).push(mark);
        Ok(())
    }

    fn push_coords(&mut self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if !x.iter().all(|c| c.is_finite()) {
            return Err(crate::error::invalid("point", "non-finite coordinate"));
        }
        self.coords.extend_from_slice(x);
        Ok(())
    }

    /// Appends all points of `other` (marks are dropped unless both carry them).
    pub fn extend(&mut self, other: &PointPattern) -> Result<()> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        match (&mut self.marks, &other.marks) {
            (Some(m), Some(o)) => m.extend_from_slice(o),
            (None, _) => {}
            (Some(_), None) if other.is_empty() => {}
            (Some(_), None) => self.marks = None,
        }
        self.coords.extend_from_slice(&other.coords);
        Ok(())
    }

    /// Number of points in the closed box `c`.
    pub fn count_in(&self, c: &Window) -> usize {
        self.iter().filter(|x| c.contains(x)).count()
    }

    /// Points (and marks) inside the closed box `w`.
    pub fn restrict(&self, w: &Window) -> PointPattern {
        let mut out = PointPattern::empty(self.dim);
        let mut marks = self.marks.as_ref().map(|_| Vec::new());
        for (i, x) in self.iter().enumerate() {
            if w.contains(x) {
                out.coords.extend_from_slice(x);
                if let (Some(m), Some(src)) = (marks.as_mut(), self.marks.as_ref()) {
                    m.push(src[i]);
                }
            }
        }
        out.marks = marks;
        out
    }

    /// True when no two points coincide.
    pub fn is_simple(&self) -> bool {
        let mut pts: Vec<&[f64]> = self.iter().collect();
        pts.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
        pts.windows(2).all(|w| w[0] != w[1])
    }

    /// Sorts points lexicographically, carrying marks along.
    pub fn sort(&mut self) {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.point(a).partial_cmp(self.point(b)).expect("finite coordinates"));
        let coords = idx.iter().flat_map(|&i| self.point(i).to_vec()).collect();
        if let Some(m) = &self.marks {
            self.marks = Some(idx.iter().map(|&i| m[i]).collect());
        }
        self.coords = coords;
    }

    /// First coordinate of every point.
    pub fn times(&self) -> Vec<f64> {
        self.iter().map(|x| x[0]).collect()
    }

    pub fn to_points(&self) -> Vec<Vec<f64>> {
        self.iter().map(<[f64]>::to_vec).collect()
    }

    /// Nearest-neighbour distance of each point (empty for fewer than two points).
    pub fn nearest_neighbour_distances(&self) -> Vec<f64> {
        let n = self.len();
        if n < 2 {
            return Vec::new();
        }
        (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i)
                    .map(|j| euclid(self.point(i), self.point(j)))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (1..=self.dim).map(|i| format!("x{i}")).collect();
        if self.marks.is_some() {
            header.push("mark".into());
        }
        wtr.write_record(&header)?;
        for (i, x) in self.iter().enumerate() {
            let mut row: Vec<String> = x.iter().map(|c| c.to_string()).collect();
            if let Some(m) = &self.marks {
                row.push(m[i].to_string());
            }
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let headers = rdr.headers()?.clone();
        let marked = headers.iter().last() == Some("mark");
        let dim = headers.len() - usize::from(marked);
        if dim == 0 {
            return Err(crate::error::invalid("csv", "no coordinate columns"));
        }
        let mut p = PointPattern::empty(dim);
        for rec in rdr.records() {
            let rec = rec?;
            let vals: Vec<f64> = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| crate::error::invalid("csv", e.to_string()))?;
            if marked {
                p.push_marked(&vals[..dim], vals[dim])?;
            } else {
                p.push(&vals)?;
            }
        }
        if marked && p.marks.is_none() {
            p.marks = Some(Vec::new());
        }
        Ok(p)
    }
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Provenance block written with every serialized pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternMeta {
    pub seed: u64,
    pub stream_id: u64,
    pub sampler: String,
    pub config_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<serde_json::Value>,
}

/// JSON document form of a pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternDocument {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    pub marks: Option<Vec<f64>>,
    pub meta: PatternMeta,
}

impl PatternDocument {
    pub fn new(pattern: &PointPattern, meta: PatternMeta) -> Self {
        Self {
            dim: pattern.dim(),
            points: pattern.to_points(),
            marks: pattern.marks().map(<[f64]>::to_vec),
            meta,
        }
    }

    pub fn pattern(&self) -> Result<PointPattern> {
        let p = PointPattern::from_points(self.dim, &self.points)?;
        match &self.marks {
            Some(m) => p.with_marks(m.clone()),
            None => Ok(p),
        }
    }
}
