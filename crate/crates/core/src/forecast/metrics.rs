use crate::error::{Error, Result};

fn check(pred: &[f64], obs: &[f64]) -> Result<()> {
    if pred.len() != obs.len() {
        return Err(Error::Dimension {
            expected: obs.len(),
            actual: pred.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::usage("error metrics need at least one value"));
    }
    Ok(())
}

pub fn rmse(pred: &[f64], obs: &[f64]) -> Result<f64> {
    check(pred, obs)?;
    let sse: f64 = pred.iter().zip(obs).map(|(p, o)| (p - o) * (p - o)).sum();
    Ok((sse / pred.len() as f64).sqrt())
}

pub fn mae(pred: &[f64], obs: &[f64]) -> Result<f64> {
    check(pred, obs)?;
    let sae: f64 = pred.iter().zip(obs).map(|(p, o)| (p - o).abs()).sum();
    Ok(sae / pred.len() as f64)
}

/// Training RMSE over test RMSE; values well below 1 indicate overfitting.
pub fn overfitting_ratio(train_rmse: f64, test_rmse: f64) -> Result<f64> {
    if test_rmse == 0.0 {
        return Err(Error::UndefinedRatio);
    }
    if !(test_rmse > 0.0 && train_rmse >= 0.0) {
        return Err(Error::usage(format!(
            "RMSE values must be nonnegative (train {train_rmse}, test {test_rmse})"
        )));
    }
    Ok(train_rmse / test_rmse)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_sequences() {
        let a = [1.0, -2.0, 3.5];
        assert_eq!(rmse(&a, &a).unwrap(), 0.0);
        assert_eq!(mae(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn arithmetic() {
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(mae(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 3.5);
    }

    #[test]
    fn empty_and_mismatched() {
        assert!(matches!(rmse(&[], &[]), Err(Error::Usage(_))));
        assert!(mae(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn ratios() {
        assert_eq!(overfitting_ratio(0.10, 0.20).unwrap(), 0.5);
        assert_eq!(overfitting_ratio(0.3, 0.3).unwrap(), 1.0);
        assert!(matches!(overfitting_ratio(0.1, 0.0), Err(Error::UndefinedRatio)));
    }

    #[test]
    fn ratio_of_means_differs_from_mean_of_ratios() {
        // 0.09993 / 0.18258 for the averaged RMSEs is not the averaged ratio
        let r = overfitting_ratio(0.09993, 0.18258).unwrap();
        assert!((r - 0.5473).abs() < 5e-5);
    }

    proptest! {
        #[test]
        fn mae_never_exceeds_rmse(pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..50)) {
            let (p, o): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            prop_assert!(mae(&p, &o).unwrap() <= rmse(&p, &o).unwrap() * (1.0 + 1e-12) + 1e-12);
        }
    }
}
