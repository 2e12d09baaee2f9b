use super::Polarity;
use crate::error::{Error, Result};

/// Predicts the most frequent training label for every test sample.
/// Ties go to the earlier label in positive, negative, neutral order.
pub fn majority_predict(train_labels: &[Polarity], test_size: usize) -> Result<Vec<Polarity>> {
    if train_labels.is_empty() {
        return Err(Error::InvalidArgument("majority baseline needs training labels".into()));
    }
    let mut counts = [0usize; 3];
    for l in train_labels {
        counts[l.index()] += 1;
    }
    let mut best = 0;
    for i in 1..3 {
        if counts[i] > counts[best] {
            best = i;
        }
    }
    Ok(vec![Polarity::ALL[best]; test_size])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(pos: usize, neg: usize, neu: usize) -> Vec<Polarity> {
        let mut v = vec![Polarity::Positive; pos];
        v.extend(vec![Polarity::Negative; neg]);
        v.extend(vec![Polarity::Neutral; neu]);
        v
    }

    #[test]
    fn laptop_train_counts_pick_positive() {
        let p = majority_predict(&labels(994, 870, 464), 638).unwrap();
        assert_eq!(p.len(), 638);
        assert!(p.iter().all(|&l| l == Polarity::Positive));
    }

    #[test]
    fn ties_and_errors() {
        assert_eq!(majority_predict(&labels(0, 2, 2), 1).unwrap(), vec![Polarity::Negative]);
        assert_eq!(majority_predict(&labels(0, 1, 3), 1).unwrap(), vec![Polarity::Neutral]);
        assert!(majority_predict(&[], 3).is_err());
    }
}
