use crate::error::{Error, Result};

/// Labeled points in contrast space (or any fixed dimension), stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledContrastSet {
    dim: usize,
    points: Vec<f64>,
    labels: Vec<usize>,
    class_names: Vec<String>,
}

impl LabeledContrastSet {
    pub fn new(dim: usize, points: Vec<f64>, labels: Vec<usize>, class_names: Vec<String>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("point dimension must be at least 1".into()));
        }
        if class_names.is_empty() {
            return Err(Error::InvalidInput("at least one class is required".into()));
        }
        if points.len() != dim * labels.len() {
            return Err(Error::InvalidInput(format!(
                "{} coordinates for {} labels of dimension {dim}",
                points.len(),
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::InvalidInput(format!(
                "label {bad} out of range for {} classes",
                class_names.len()
            )));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("points must be finite".into()));
        }
        Ok(Self {
            dim,
            points,
            labels,
            class_names,
        })
    }

    pub fn from_points<const D: usize>(points: &[[f64; D]], labels: Vec<usize>, class_names: Vec<String>) -> Result<Self> {
        Self::new(D, points.iter().flatten().copied().collect(), labels, class_names)
    }

    pub fn empty_like(&self) -> Self {
        Self {
            dim: self.dim,
            points: Vec::new(),
            labels: Vec::new(),
            class_names: self.class_names.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points_flat(&self) -> &[f64] {
        &self.points
    }

    pub(crate) fn points_flat_mut(&mut self) -> &mut [f64] {
        &mut self.points
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub fn push(&mut self, point: &[f64], label: usize) {
        assert_eq!(point.len(), self.dim, "point dimension");
        assert!(label < self.num_classes(), "label out of range");
        self.points.extend_from_slice(point);
        self.labels.push(label);
    }

    /// Points at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut out = self.empty_like();
        out.points.reserve(indices.len() * self.dim);
        out.labels.reserve(indices.len());
        for &i in indices {
            out.push(self.point(i), self.label(i));
        }
        out
    }

    /// Indices of the points of class `class`, in order.
    pub fn class_indices(&self, class: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == class).collect()
    }

    pub(crate) fn empty_class_error(&self, class: usize, stage: &str) -> Error {
        Error::EmptyClass(format!("{:?} (id {class}) after {stage}", self.class_names[class]))
    }
}
