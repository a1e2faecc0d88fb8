use super::LearningError;

/// Row-major feature matrix with integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<usize>,
    dim: usize,
    classes: usize,
}

impl Dataset {
    pub fn new(features: Vec<f64>, labels: Vec<usize>, dim: usize, classes: usize) -> Result<Self, LearningError> {
        if labels.is_empty() {
            return Err(LearningError::InvalidDataset("dataset has no rows".into()));
        }
        if dim == 0 || classes == 0 {
            return Err(LearningError::InvalidDataset("dimension and classes must be positive".into()));
        }
        if features.len() != labels.len() * dim {
            return Err(LearningError::InvalidDataset(format!(
                "{} feature values for {} rows of width {dim}",
                features.len(),
                labels.len()
            )));
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
            return Err(LearningError::LabelOutOfRange { label, classes });
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(LearningError::InvalidDataset("non-finite feature value".into()));
        }
        Ok(Self {
            features,
            labels,
            dim,
            classes,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn classes(&self) -> usize {
        self.classes
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    /// Rows at `indices`, in that order. Fails on an empty selection.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset, LearningError> {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset::new(features, labels, self.dim, self.classes)
    }

    /// Same features, labels replaced.
    pub fn with_labels(&self, labels: Vec<usize>) -> Result<Dataset, LearningError> {
        Dataset::new(self.features.clone(), labels, self.dim, self.classes)
    }

    /// Same labels, features replaced.
    pub fn with_features(&self, features: Vec<f64>) -> Result<Dataset, LearningError> {
        Dataset::new(features, self.labels.clone(), self.dim, self.classes)
    }

    /// Concatenate datasets with a common width and class count.
    pub fn concat(parts: &[&Dataset]) -> Result<Dataset, LearningError> {
        let first = parts
            .first()
            .ok_or_else(|| LearningError::InvalidDataset("nothing to concatenate".into()))?;
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for p in parts {
            if p.dim != first.dim || p.classes != first.classes {
                return Err(LearningError::InvalidDataset("incompatible parts".into()));
            }
            features.extend_from_slice(&p.features);
            labels.extend_from_slice(&p.labels);
        }
        Dataset::new(features, labels, first.dim, first.classes)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_input() {
        assert!(Dataset::new(vec![], vec![], 2, 2).is_err());
        assert!(Dataset::new(vec![1.0], vec![0], 2, 2).is_err());
        assert!(matches!(
            Dataset::new(vec![1.0, 2.0], vec![5], 2, 2),
            Err(LearningError::LabelOutOfRange { label: 5, classes: 2 })
        ));
        assert!(Dataset::new(vec![f64::NAN, 2.0], vec![0], 2, 2).is_err());
    }

    #[test]
    fn subset_and_concat() {
        let d = Dataset::new(vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0], vec![0, 1, 0], 2, 2).unwrap();
        let s = d.subset(&[2, 0]).unwrap();
        assert_eq!(s.row(0), &[4.0, 5.0]);
        assert_eq!(s.labels(), &[0, 0]);
        let c = Dataset::concat(&[&d, &s]).unwrap();
        assert_eq!(c.len(), 5);
        assert_eq!(c.class_counts(), vec![4, 1]);
    }
}
